//! The two reference agreement systems: Scarce Knowledge (crowdfunded
//! essays with escrow) and Twitter Social Capital (tweet-registered
//! agreements settled by mutual verdict).

mod scarce;
mod tsc;

use sha2::{Digest, Sha256};

use crate::adapters::EscrowLedger;
use crate::engine::PathDefinition;
use crate::model::ProcessName;

pub use scarce::{
    build_scarce_knowledge_path, pledge_payload, AUTHOR_APPROVAL, DISTRIBUTION, ESSAY_SUBMISSION,
    PLEDGE_AUTHORING, PLEDGE_THRESHOLD, SCARCE_PATH,
};
pub use tsc::{
    build_tsc_path, DISPUTE_RESOLUTION, MENTION_AUTHORING, RECORDING, TSC_PATH, VERDICTS,
    VERDICT_COLLECTION,
};

pub const OUTCOME_DECLINED: &str = "declined";
pub const OUTCOME_FULFILLED: &str = "fulfilled";
pub const OUTCOME_ABANDONED: &str = "abandoned";

/// Hex SHA-256 of `text`.
pub fn content_digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

pub(crate) fn pname(s: &str) -> ProcessName {
    ProcessName::new(s).expect("process names in this module are valid tokens")
}

/// Both reference paths, Scarce Knowledge first.
pub fn reference_paths() -> Vec<PathDefinition> {
    vec![build_scarce_knowledge_path(), build_tsc_path()]
}

/// Builds a reference path by name.
pub fn reference_path(name: &str) -> Option<PathDefinition> {
    match name {
        SCARCE_PATH => Some(build_scarce_knowledge_path()),
        TSC_PATH => Some(build_tsc_path()),
        _ => None,
    }
}

/// Fixture balances for demo supporters `s1`..`s3` (there is no deposit flow).
pub fn demo_escrow() -> EscrowLedger {
    EscrowLedger::with_balances([("s1", 1000), ("s2", 1000), ("s3", 1000)])
}
