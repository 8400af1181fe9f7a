use std::fmt;

use serde::{Deserialize, Serialize};

/// Catalog position, 1-based. Id order is global popularity rank order.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VideoId(pub u32);

impl VideoId {
    pub fn from_index(index: usize) -> Self {
        VideoId(index as u32 + 1)
    }

    /// 0-based position in catalog-ordered vectors.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl fmt::Display for VideoId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

/// Proxy server id, 0-based across the whole system (`lpsg * M + local`).
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PsId(pub usize);

impl fmt::Display for PsId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ps{}", self.0)
    }
}
