//! ε,max-bounded threat models: the four kinds, their free variables and
//! feasible regions, random feasible points, and interval-chain export.

mod idtmc;
mod space;
mod spec;

pub use idtmc::{build_idtmc, IdtmcExport};
pub use space::{
    feasible, free_variables, project_box_sum, random_feasible_point, FreeVariable, Polytope,
    RowGroup, BOX_TOLERANCE,
};
pub use spec::{load_threat, parse_threat, render_threat, ThreatKind, ThreatModel, Vulnerable};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ThreatError {
    #[error("epsilon {0} outside [0, 1]")]
    BadEpsilon(f64),

    #[error("{0} threat model given the wrong kind of vulnerable set")]
    KindMismatch(ThreatKind),

    #[error("vulnerable state {state} out of range for {n} states")]
    StateOutOfRange { state: usize, n: usize },

    #[error("vulnerable transition ({from}, {to}) out of range for {n} states")]
    TransitionOutOfRange { from: usize, to: usize, n: usize },

    #[error("threat model leaves no free variable")]
    EmptyThreat,

    #[error("row {state}: box and row-sum constraint have empty intersection")]
    ProjectionFailed { state: usize },

    #[error("threat file: {0}")]
    Parse(String),

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}
