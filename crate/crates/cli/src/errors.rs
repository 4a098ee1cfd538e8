//! Error classes that decide the process exit status.

use std::fmt;

use damagekit::annot::AnnotError;
use damagekit::blend::BlendError;
use damagekit::eval::EvalError;
use damagekit::io::ImageIoError;
use damagekit::synth::SynthError;
use damagekit::tile::TileError;
use damagekit::{InterchangeError, RleError};

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

/// Bad flags, bad config, or a referenced path that does not exist.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Input files that exist but cannot be used.
#[derive(Debug)]
pub struct DataError(pub String);

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for DataError {}

pub fn usage(message: impl Into<String>) -> anyhow::Error {
    UsageError(message.into()).into()
}

pub fn data(message: impl Into<String>) -> anyhow::Error {
    DataError(message.into()).into()
}

/// First classifiable cause in the chain wins; anything else is a runtime failure.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<BlendError>() {
            return match e {
                BlendError::NotConverged { .. } => EXIT_RUNTIME,
                BlendError::InvalidSettings(_) => EXIT_USAGE,
                _ => EXIT_DATA,
            };
        }
        if let Some(e) = cause.downcast_ref::<SynthError>() {
            return match e {
                SynthError::ThreadPool(_) => EXIT_RUNTIME,
                SynthError::InvalidSettings(_) => EXIT_USAGE,
                _ => EXIT_DATA,
            };
        }
        if let Some(e) = cause.downcast_ref::<ImageIoError>() {
            return match e {
                ImageIoError::Write { .. } => EXIT_RUNTIME,
                ImageIoError::Read { .. } => EXIT_DATA,
            };
        }
        if cause.is::<DataError>()
            || cause.is::<AnnotError>()
            || cause.is::<InterchangeError>()
            || cause.is::<RleError>()
            || cause.is::<TileError>()
            || cause.is::<EvalError>()
            || cause.is::<serde_json::Error>()
        {
            return EXIT_DATA;
        }
    }
    EXIT_RUNTIME
}
