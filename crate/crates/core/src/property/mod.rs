//! Property language and explicit-state satisfaction probabilities.
//!
//! Bounded until is evaluated by `k` rounds of the value-iteration
//! recurrence, next by one matrix-vector product and unbounded until by
//! prob-0/prob-1 graph precomputation followed by a direct linear solve.
//! The kernels accept sub-stochastic rows (missing mass is treated as
//! absorption in a failing sink) so finite-difference probes stay defined.

mod ast;
pub(crate) mod graph;
mod linear;
mod parser;

pub use ast::{PathFormula, StateExpr};
pub use parser::parse_property;

use thiserror::Error;

use crate::model::{Dtmc, SparseRow};

/// Rows whose mass differs from 1 by more than this are treated as leaking
/// in the prob-1 precomputation.
const LEAK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PropertyError {
    #[error("syntax error at offset {position}: expected one of {expected:?}, found {found}")]
    Syntax {
        position: usize,
        expected: Vec<String>,
        found: String,
    },

    #[error(
        "nested temporal operator or boolean combination of path formulae at offset {position}"
    )]
    NestedTemporal { position: usize },

    #[error("unknown atomic proposition '{0}'")]
    UnknownAtom(String),

    #[error("state index {state} out of range for {n} states")]
    StateOutOfRange { state: usize, n: usize },

    #[error("linear system for unbounded until is singular")]
    SingularSystem,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operator {
    Next,
    Bounded(u32),
    Unbounded,
}

/// A path formula resolved against a model's labeling. Evaluates against
/// any transition rows of the same dimension, which is how perturbed
/// matrices are checked without rebuilding models.
#[derive(Debug, Clone)]
pub struct Checker {
    init: usize,
    op: Operator,
    lhs: Vec<bool>,
    rhs: Vec<bool>,
    complement: bool,
}

impl Checker {
    pub fn new(model: &Dtmc, phi: &PathFormula) -> Result<Self, PropertyError> {
        let mut complement = false;
        let mut phi = phi;
        while let PathFormula::Complement(inner) = phi {
            complement = !complement;
            phi = inner;
        }
        let (op, lhs, rhs) = match phi {
            PathFormula::Next(e) => (Operator::Next, vec![true; model.n()], e.eval(model)?),
            PathFormula::Until { lhs, rhs, bound } => (
                bound.map_or(Operator::Unbounded, Operator::Bounded),
                lhs.eval(model)?,
                rhs.eval(model)?,
            ),
            PathFormula::Complement(_) => unreachable!(),
        };
        Ok(Checker {
            init: model.init(),
            op,
            lhs,
            rhs,
            complement,
        })
    }

    pub fn operator(&self) -> Operator {
        self.op
    }

    pub fn lhs(&self) -> &[bool] {
        &self.lhs
    }

    pub fn rhs(&self) -> &[bool] {
        &self.rhs
    }

    pub fn complement(&self) -> bool {
        self.complement
    }

    pub fn init(&self) -> usize {
        self.init
    }

    /// States whose transitions cannot influence the probability from any
    /// state: they already satisfy the target or violate the path condition.
    pub fn decided(&self) -> Vec<bool> {
        match self.op {
            Operator::Next => vec![false; self.rhs.len()],
            _ => self
                .lhs
                .iter()
                .zip(&self.rhs)
                .map(|(l, r)| *r || !*l)
                .collect(),
        }
    }

    /// Satisfaction probability from every state.
    pub fn all_states(&self, rows: &[SparseRow]) -> Result<Vec<f64>, PropertyError> {
        let mut x = match self.op {
            Operator::Next => next(rows, &self.rhs),
            Operator::Bounded(k) => bounded_until(rows, &self.lhs, &self.rhs, k),
            Operator::Unbounded => unbounded_until(rows, &self.lhs, &self.rhs)?,
        };
        if self.complement {
            for v in &mut x {
                *v = 1.0 - *v;
            }
        }
        Ok(x)
    }

    /// Satisfaction probability from the initial state.
    pub fn at_init(&self, rows: &[SparseRow]) -> Result<f64, PropertyError> {
        Ok(self.all_states(rows)?[self.init])
    }
}

/// `Pr(s₀ ⊨ φ)` on an explicit chain.
pub fn sat_prob(model: &Dtmc, phi: &PathFormula) -> Result<f64, PropertyError> {
    Checker::new(model, phi)?.at_init(model.rows())
}

/// `Pr(s ⊨ φ)` for every state `s`.
pub fn sat_prob_all_states(model: &Dtmc, phi: &PathFormula) -> Result<Vec<f64>, PropertyError> {
    Checker::new(model, phi)?.all_states(model.rows())
}

fn next(rows: &[SparseRow], target: &[bool]) -> Vec<f64> {
    rows.iter()
        .map(|row| row.iter().filter(|(t, _)| target[*t]).map(|(_, p)| p).sum())
        .collect()
}

fn bounded_until(rows: &[SparseRow], lhs: &[bool], rhs: &[bool], k: u32) -> Vec<f64> {
    let n = rows.len();
    let mut x: Vec<f64> = rhs.iter().map(|&r| if r { 1.0 } else { 0.0 }).collect();
    let mut y = vec![0.0; n];
    for _ in 0..k {
        for s in 0..n {
            y[s] = if rhs[s] {
                1.0
            } else if !lhs[s] {
                0.0
            } else {
                rows[s].iter().map(|&(t, p)| p * x[t]).sum()
            };
        }
        std::mem::swap(&mut x, &mut y);
    }
    x
}

fn unbounded_until(
    rows: &[SparseRow],
    lhs: &[bool],
    rhs: &[bool],
) -> Result<Vec<f64>, PropertyError> {
    let n = rows.len();
    let succ: Vec<Vec<usize>> = rows
        .iter()
        .map(|r| {
            r.iter()
                .filter(|(_, p)| *p != 0.0)
                .map(|(t, _)| *t)
                .collect()
        })
        .collect();
    let no = graph::prob0(&succ, lhs, rhs);
    let leak: Vec<bool> = rows
        .iter()
        .map(|r| (r.iter().map(|(_, p)| p).sum::<f64>() - 1.0).abs() > LEAK_TOLERANCE)
        .collect();
    let yes = graph::prob1(&succ, lhs, rhs, &no, &leak);

    let mut x = vec![0.0; n];
    let mut index = vec![usize::MAX; n];
    let mut maybe = Vec::new();
    for s in 0..n {
        if yes[s] {
            x[s] = 1.0;
        } else if !no[s] {
            index[s] = maybe.len();
            maybe.push(s);
        }
    }
    if maybe.is_empty() {
        return Ok(x);
    }
    let m = maybe.len();
    let mut a = vec![vec![0.0; m]; m];
    let mut b = vec![0.0; m];
    for (i, &s) in maybe.iter().enumerate() {
        a[i][i] = 1.0;
        for &(t, p) in &rows[s] {
            if yes[t] {
                b[i] += p;
            } else if index[t] != usize::MAX {
                a[i][index[t]] -= p;
            }
        }
    }
    let sol = linear::solve(a, b).ok_or(PropertyError::SingularSystem)?;
    for (i, &s) in maybe.iter().enumerate() {
        x[s] = sol[i];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four_state() -> Dtmc {
        Dtmc::from_dense(
            0,
            &[
                vec![0.0, 0.6, 0.4, 0.0],
                vec![0.1, 0.1, 0.0, 0.8],
                vec![0.3, 0.0, 0.0, 0.7],
                vec![0.0, 0.0, 0.0, 1.0],
            ],
        )
        .unwrap()
    }

    fn prop(text: &str) -> PathFormula {
        parse_property(text).unwrap()
    }

    #[test]
    fn four_state_bounded_until() {
        let p = sat_prob(&four_state(), &prop("P=? [ s!=2 U<=10 s=3 ]")).unwrap();
        // 10-step value iteration, cross-checked by path enumeration in tests/.
        assert!((p - 0.5714205552).abs() < 1e-10, "{p}");
    }

    #[test]
    fn init_in_target_is_one() {
        let m = four_state();
        for text in [
            "P=? [ s!=2 U<=3 s=0 ]",
            "P=? [ F s=0 ]",
            "P=? [ false U s=0 ]",
        ] {
            assert_eq!(sat_prob(&m, &prop(text)).unwrap(), 1.0, "{text}");
        }
    }

    #[test]
    fn unbounded_reachability() {
        let m = four_state();
        assert!((sat_prob(&m, &prop("P=? [ F s=3 ]")).unwrap() - 1.0).abs() < 1e-15);
        // Avoiding 2: x0 = .6 x1, x1 = .1 x0 + .1 x1 + .8
        let p = sat_prob(&m, &prop("P=? [ s!=2 U s=3 ]")).unwrap();
        let expect = 0.6 * 0.8 / (0.9 - 0.06);
        assert!((p - expect).abs() < 1e-14, "{p} vs {expect}");
    }

    #[test]
    fn next_and_globally() {
        let m = four_state();
        assert!((sat_prob(&m, &prop("P=? [ X s=1 ]")).unwrap() - 0.6).abs() < 1e-15);
        let g = sat_prob(&m, &prop("P=? [ G<=5 s!=2 ]")).unwrap();
        let f = sat_prob(&m, &prop("P=? [ F<=5 !s!=2 ]")).unwrap();
        assert!((g + f - 1.0).abs() < 1e-15);
        let g = sat_prob(&m, &prop("P=? [ G s!=3 ]")).unwrap();
        assert!(g.abs() < 1e-15);
    }

    #[test]
    fn unknown_atom_and_range() {
        let m = four_state();
        assert_eq!(
            sat_prob(&m, &prop("P=? [ F goal ]")),
            Err(PropertyError::UnknownAtom("goal".into()))
        );
        assert_eq!(
            sat_prob(&m, &prop("P=? [ F s=9 ]")),
            Err(PropertyError::StateOutOfRange { state: 9, n: 4 })
        );
    }

    #[test]
    fn sub_stochastic_rows_leak() {
        let rows = vec![vec![(0, 0.5), (1, 0.4)], vec![(1, 1.0)]];
        let model = Dtmc::from_dense(0, &[vec![0.5, 0.5], vec![0.0, 1.0]]).unwrap();
        let checker = Checker::new(&model, &prop("P=? [ F s=1 ]")).unwrap();
        let p = checker.at_init(&rows).unwrap();
        assert!((p - 0.8).abs() < 1e-14);
        let bounded = Checker::new(&model, &prop("P=? [ F<=2 s=1 ]")).unwrap();
        assert!((bounded.at_init(&rows).unwrap() - 0.6).abs() < 1e-14);
    }

    #[test]
    fn repeated_calls_bit_identical() {
        let m = four_state();
        let phi = prop("P=? [ s!=2 U s=3 ]");
        let a = sat_prob_all_states(&m, &phi).unwrap();
        let b = sat_prob_all_states(&m, &phi).unwrap();
        assert_eq!(a, b);
    }
}
