use thiserror::Error;

use crate::sip::AsymmetryWitness;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("enumeration too large: {what} needs {atoms} ground atoms (limit {limit})")]
    Budget {
        what: String,
        atoms: usize,
        limit: u32,
    },

    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown relation `{0}`")]
    UnknownRelation(String),

    #[error("relation `{name}` has arity {expected}, got {found} argument(s)")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
    },

    #[error("element {element} lies outside the domain of size {n}")]
    OutOfDomain { element: usize, n: usize },

    #[error("invalid signature: {0}")]
    InvalidSignature(String),

    #[error("invalid domain map: {0}")]
    InvalidMap(String),

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("not a subsignature: {0}")]
    NotSubsignature(String),

    #[error("trace error: {0}")]
    Trace(String),

    #[error("invalid rational literal `{0}`")]
    Rational(String),

    #[error("invalid weight: {0}")]
    Weight(String),

    #[error("undefined conditional: the conditioning event has probability zero")]
    UndefinedConditional,

    #[error("invalid distribution: {0}")]
    InvalidDist(String),

    #[error("invalid program: {0}")]
    Program(String),

    #[error("unstratifiable program: negative cycle {}", .0.join(" -> "))]
    Unstratifiable(Vec<String>),

    #[error("missing stage annotation for `{0}`")]
    MissingStage(String),

    #[error("program is not tuple-local: {0}")]
    NotTupleLocal(String),

    #[error("invalid SIP parameters: {0}")]
    InvalidParams(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("essentially asymmetric; not representable: {0}")]
    NotRepresentable(Box<AsymmetryWitness>),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn is_budget(&self) -> bool {
        matches!(self, Error::Budget { .. })
    }
}

/// Upper bound on the number of ground atoms an exhaustive enumeration may range over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Budget {
    pub max_atoms: u32,
}

impl Budget {
    pub const DEFAULT_ATOMS: u32 = 22;

    pub fn new(max_atoms: u32) -> Self {
        Budget { max_atoms }
    }

    pub fn unlimited() -> Self {
        Budget { max_atoms: 63 }
    }

    pub fn check(&self, what: impl Into<String>, atoms: usize) -> Result<()> {
        if atoms > self.max_atoms as usize || atoms > 63 {
            return Err(Error::Budget {
                what: what.into(),
                atoms,
                limit: self.max_atoms,
            });
        }
        Ok(())
    }
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_atoms: Self::DEFAULT_ATOMS,
        }
    }
}
