//! Joint write-once-memory and error-control polar coding.
//!
//! A write round stores a message in cells whose current state `s` only
//! allows 1 → 0 transitions, while protecting it against a noisy read
//! channel. The crate provides the polar transform and SC recursion
//! ([`polar`]), the cell/channel model ([`channel`]), Monte-Carlo code
//! construction ([`construction`]), the encoder and decoder ([`codec`]),
//! an experiment harness ([`harness`]) and the CLI plumbing ([`config`],
//! [`cli`]).

pub mod channel;
pub mod cli;
pub mod codec;
pub mod config;
pub mod construction;
pub mod harness;
pub mod polar;
pub mod rng;

pub use channel::{less_noisy_condition, ChannelSpec, LessNoisyCondition, ReadChannel, WomSourceModel};
pub use codec::{apply_write, decode, encode, EncodeResult, FreezeBits};
pub use construction::{
    build_partition, construct, containment_report, estimate_profile, exact_profile, EntropyProfile,
    IndexPartition, SideInfo,
};
pub use harness::{run_experiment, run_trial, ExperimentReport, TrialResult, TrialSetup};
pub use polar::{polar_transform, sc_check_combine, sc_posterior, sc_var_combine, BitBlock, ProbPair};
