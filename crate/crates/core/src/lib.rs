//! A self-contained statistical test battery for pseudorandom number
//! generators.
//!
//! The crate is split the same way the data flows:
//!
//! * [`generators`] produce reproducible word streams,
//! * [`ingest`] decodes binary pipes/files and the dieharder text format,
//! * [`stats`] turns statistics into p-values,
//! * [`battery`] holds the tests and the orchestration,
//! * [`report`] classifies and renders results,
//! * [`cli`] wires it all into the `prngtest` binary.

pub mod battery;
pub mod cli;
pub mod generators;
pub mod ingest;
pub mod report;
pub mod stats;

use serde::{Deserialize, Serialize};

/// Width of one word in a stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Width {
    #[serde(rename = "32")]
    W32,
    #[serde(rename = "64")]
    W64,
}

impl Width {
    pub fn bits(self) -> u32 {
        match self {
            Width::W32 => 32,
            Width::W64 => 64,
        }
    }

    pub fn bytes(self) -> usize {
        match self {
            Width::W32 => 4,
            Width::W64 => 8,
        }
    }

    /// Largest value representable in this width.
    pub fn max_value(self) -> u64 {
        match self {
            Width::W32 => u64::from(u32::MAX),
            Width::W64 => u64::MAX,
        }
    }

    pub fn from_bits(bits: u32) -> Option<Width> {
        match bits {
            32 => Some(Width::W32),
            64 => Some(Width::W64),
            _ => None,
        }
    }
}

impl std::fmt::Display for Width {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}-bit", self.bits())
    }
}
