use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Index of a camera within a scenario, `0..K`.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct CameraId(pub usize);

impl fmt::Display for CameraId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cam{}", self.0)
    }
}

impl FromStr for CameraId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s.strip_prefix("cam").unwrap_or(s);
        digits
            .parse()
            .map(CameraId)
            .map_err(|_| format!("bad camera id `{s}`"))
    }
}

/// Ground-truth identity of a world object. Queries are keyed by the
/// identity they look for.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct ObjectId(pub u32);

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "obj{}", self.0)
    }
}

impl FromStr for ObjectId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s.strip_prefix("obj").unwrap_or(s);
        digits
            .parse()
            .map(ObjectId)
            .map_err(|_| format!("bad object id `{s}`"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_round_trips() {
        assert_eq!("cam3".parse::<CameraId>().unwrap(), CameraId(3));
        assert_eq!(CameraId(3).to_string(), "cam3");
        assert_eq!("obj12".parse::<ObjectId>().unwrap(), ObjectId(12));
        assert_eq!("7".parse::<ObjectId>().unwrap(), ObjectId(7));
        assert!("camx".parse::<CameraId>().is_err());
    }
}
