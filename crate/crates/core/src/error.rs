use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::data::Violation;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// The dataset failed validation; carries every violation found.
    InvalidDataset(Vec<Violation>),
    /// An operation for one sample kind was handed the other.
    WrongKind {
        expected: &'static str,
    },
    InvalidParameter(String),
    Empty(&'static str),
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    IndexOutOfRange {
        index: usize,
        len: usize,
    },
    NonFinite(&'static str),
    TagSetMismatch,
    InvalidTagSet(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidDataset(v) => {
                write!(f, "invalid dataset ({} violation(s))", v.len())?;
                if let Some(first) = v.first() {
                    write!(f, ": {first}")?;
                }
                Ok(())
            }
            Error::WrongKind { expected } => write!(f, "expected a {expected} dataset"),
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::Empty(what) => write!(f, "{what} is empty"),
            Error::LengthMismatch { what, expected, found } => {
                write!(f, "{what}: expected length {expected}, found {found}")
            }
            Error::IndexOutOfRange { index, len } => {
                write!(f, "index {index} out of range for length {len}")
            }
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Error::TagSetMismatch => f.write_str("tag sets do not match"),
            Error::InvalidTagSet(msg) => write!(f, "invalid tag set: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
