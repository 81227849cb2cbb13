//! Probabilistic models: explicit DTMCs, MDPs with memoryless deterministic
//! policies, and additive perturbations of transition matrices.

mod dtmc;
mod io;
mod mdp;
mod perturbation;

pub use dtmc::{Dtmc, SparseRow, ROW_SUM_TOLERANCE};
pub use io::{load_model, parse_model, render_model, store_model, Model};
pub use mdp::{Mdp, Policy};
pub use perturbation::{apply_perturbation, PerturbationMatrix};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("row {row} sums to {sum}, expected 1")]
    RowSumViolation { row: usize, sum: f64 },

    #[error("entry ({from}, {to}) = {value} lies outside [0, 1]")]
    EntryOutOfRange { from: usize, to: usize, value: f64 },

    #[error("initial state {init} out of range for {n} states")]
    BadInit { init: usize, n: usize },

    #[error("state {state} carries label index {label}, but only {atoms} atoms are declared")]
    BadLabel {
        state: usize,
        label: usize,
        atoms: usize,
    },

    #[error("transition target {to} out of range in row {row}")]
    BadTarget { row: usize, to: usize },

    #[error("model must have at least one state")]
    Empty,

    #[error("state {state} has no enabled action")]
    NoEnabledAction { state: usize },

    #[error("(state {state}, action {action}) distribution: {source}")]
    BadDistribution {
        state: usize,
        action: String,
        #[source]
        source: Box<ModelError>,
    },

    #[error("policy chooses action '{action}' at state {state}, which is not enabled")]
    PolicyActionDisabled { state: usize, action: String },

    #[error("policy covers {got} states, model has {expected}")]
    PolicyLength { got: usize, expected: usize },

    #[error("perturbation infeasible: {0}")]
    InfeasiblePerturbation(String),

    #[error("parse error at {context}: {message}")]
    ParseError { context: String, message: String },

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl ModelError {
    pub(crate) fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        ModelError::ParseError {
            context: context.into(),
            message: message.into(),
        }
    }
}
