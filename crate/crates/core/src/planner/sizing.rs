//! Prefix length formulas. Pure arithmetic, so they are exact over rationals.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrefixSizes<T> {
    pub d1: T,
    pub d2: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionalSizes<T> {
    /// `(local ps index, d1)` for each selected proxy, in the order given.
    pub d1: Vec<(usize, T)>,
    /// Proxy with the largest share; its `d1` anchors `d2`.
    pub reference_ps: usize,
    pub reference_d1: T,
    pub d2: T,
}

fn check_share<T: Scalar>(x: T) -> Result<()> {
    if x > T::one() || x < T::zero() {
        return Err(Error::invalid(format!("share {x:?} outside [0, 1]")));
    }
    Ok(())
}

/// Popular at every proxy: both prefixes scale with the mean share `m`.
/// `d1 = m·s`, `d2 = m·(s − d1)`.
pub fn size_prefixes_global<T: Scalar>(x: &[T], duration: T) -> Result<PrefixSizes<T>> {
    if x.is_empty() {
        return Err(Error::invalid("no proxies"));
    }
    if duration <= T::zero() {
        return Err(Error::invalid("video duration must be positive"));
    }
    let mut sum = T::zero();
    for &xk in x {
        check_share(xk)?;
        if xk == T::zero() {
            return Err(Error::Inconsistency(
                "video classified as globally popular has a proxy with zero share".into(),
            ));
        }
        sum = sum + xk;
    }
    let mean = sum / T::from_count(x.len());
    let d1 = mean * duration;
    let d2 = mean * (duration - d1);
    Ok(PrefixSizes { d1, d2 })
}

/// Popular at some proxies only: each selected proxy `z` gets `d1 = x^z·s`;
/// `d2 = max_k(x^k)·(s − d1_ref)` where `d1_ref` belongs to the maximal-share proxy.
pub fn size_prefixes_regional<T: Scalar>(
    x: &[T],
    selected: &[usize],
    duration: T,
) -> Result<RegionalSizes<T>> {
    if selected.is_empty() {
        return Err(Error::invalid("regional sizing needs at least one selected proxy"));
    }
    if duration <= T::zero() {
        return Err(Error::invalid("video duration must be positive"));
    }
    for &xk in x {
        check_share(xk)?;
    }
    let mut d1 = Vec::with_capacity(selected.len());
    for &z in selected {
        let xz = *x
            .get(z)
            .ok_or_else(|| Error::invalid(format!("selected proxy {z} out of range")))?;
        if xz <= T::zero() {
            return Err(Error::invalid(format!("selected proxy {z} has zero share")));
        }
        d1.push((z, xz * duration));
    }
    let (reference_ps, x_max) = argmax(x);
    let reference_d1 = x_max * duration;
    let d2 = x_max * (duration - reference_d1);
    Ok(RegionalSizes {
        d1,
        reference_ps,
        reference_d1,
        d2,
    })
}

/// First index of the maximum; `(0, 0)` for an empty slice.
pub(crate) fn argmax<T: Scalar>(x: &[T]) -> (usize, T) {
    let mut best = (0, T::zero());
    for (k, &v) in x.iter().enumerate() {
        if k == 0 || v > best.1 {
            best = (k, v);
        }
    }
    best
}
