//! Error type carrying the process exit code.
//!
//! Exit codes are a stable contract: 0 success, 2 usage or configuration
//! error (clap emits these itself for flag problems), 3 missing or corrupt
//! input (including a chain that fails verification), 4 protocol abort.

use std::fmt;

use qwchain::net::NetError;
use qwchain::voting::{AbortReason, VoteError};

/// A command failure with its exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flag values or an invalid configuration file. Exit 2.
    Usage(String),
    /// Missing, unreadable, or corrupt input data. Exit 3.
    Input(String),
    /// The simulated protocol aborted (compromised channel, failed
    /// verification group). Exit 4.
    Abort { kind: &'static str, detail: String },
    /// Unexpected library failure. Exit 1.
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Input(_) => 3,
            CliError::Abort { .. } => 4,
            CliError::Internal(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "error: {msg}"),
            CliError::Input(msg) => write!(f, "error: {msg}"),
            CliError::Abort { kind, detail } => {
                write!(f, "protocol abort: {kind} ({detail})")
            }
            CliError::Internal(msg) => write!(f, "internal error: {msg}"),
        }
    }
}

/// Maps a network-layer error onto the exit-code contract. Aborts keep a
/// stable kind string so scripts can grep for it.
pub fn classify_net(err: NetError) -> CliError {
    match &err {
        NetError::ChannelCompromised(_) => CliError::Abort {
            kind: "ChannelCompromised",
            detail: err.to_string(),
        },
        NetError::Vote(VoteError::ProtocolAbort(reason)) => {
            let kind = match reason {
                AbortReason::ChannelCompromised { .. } => "ChannelCompromised",
                AbortReason::GroupVerificationFailed { .. } => "GroupVerificationFailed",
            };
            CliError::Abort {
                kind,
                detail: reason.to_string(),
            }
        }
        NetError::InvalidConfig(msg) => CliError::Usage(msg.clone()),
        _ => CliError::Internal(err.to_string()),
    }
}
