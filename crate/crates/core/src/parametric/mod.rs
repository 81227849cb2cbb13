//! Parametric chains over a threat model's free variables and their
//! symbolic solution functions.
//!
//! Coefficients are exact rationals throughout; conversion to floating
//! point happens only when a function is evaluated.

mod pdtmc;
mod poly;
mod rational;

pub use pdtmc::{
    build_pdtmc, symbolic_bounded_until, symbolic_unbounded_until, synthesize, Cell,
    EliminationOrder, Pdtmc,
};
pub use poly::{rational, Evaluator, Monomial, Polynomial};
pub use rational::{RationalEvaluator, RationalFunction, DENOMINATOR_TOLERANCE};

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::property::PropertyError;
use crate::threat::ThreatError;

/// Default cap on stored terms before synthesis gives up.
pub const DEFAULT_MAX_TERMS: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParametricError {
    #[error("threat model leaves no free variable")]
    EmptyThreat,

    #[error("symbolic function grew to {terms} terms (cap {cap})")]
    DegreeOverflow { terms: usize, cap: usize },

    #[error("division by the zero polynomial")]
    DivisionByZeroPolynomial,

    #[error("assignment covers only {0} variables")]
    MissingVariable(usize),

    #[error("denominator vanishes at the evaluation point")]
    DenominatorNearZero,

    #[error("unsupported for the symbolic backend: {0}")]
    UnsupportedForSymbolic(String),

    #[error("time limit exceeded")]
    Timeout,

    #[error(transparent)]
    Property(#[from] PropertyError),

    #[error(transparent)]
    Threat(#[from] ThreatError),
}

/// Optional wall-clock limit, checked at loop boundaries.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Deadline(Option<Instant>);

impl Deadline {
    pub fn none() -> Self {
        Deadline(None)
    }

    pub fn after(d: Duration) -> Self {
        Deadline(Instant::now().checked_add(d))
    }

    pub fn expired(&self) -> bool {
        self.0.is_some_and(|t| Instant::now() >= t)
    }

    pub fn check(&self) -> Result<(), ParametricError> {
        if self.expired() {
            Err(ParametricError::Timeout)
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SynthesisOptions {
    pub max_terms: usize,
    pub deadline: Deadline,
    pub order: EliminationOrder,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions {
            max_terms: DEFAULT_MAX_TERMS,
            deadline: Deadline::none(),
            order: EliminationOrder::default(),
        }
    }
}
