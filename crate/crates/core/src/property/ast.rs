use std::fmt;

use crate::model::Dtmc;

use super::PropertyError;

/// Boolean state formula over atoms and state-index comparisons.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StateExpr {
    True,
    False,
    Atom(String),
    StateEq(usize),
    StateNe(usize),
    Not(Box<StateExpr>),
    And(Box<StateExpr>, Box<StateExpr>),
    Or(Box<StateExpr>, Box<StateExpr>),
}

impl StateExpr {
    pub fn atom(name: &str) -> Self {
        StateExpr::Atom(name.to_string())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Self {
        StateExpr::Not(Box::new(self))
    }

    pub fn and(self, rhs: StateExpr) -> Self {
        StateExpr::And(Box::new(self), Box::new(rhs))
    }

    pub fn or(self, rhs: StateExpr) -> Self {
        StateExpr::Or(Box::new(self), Box::new(rhs))
    }

    /// Satisfaction set of the expression as an indicator vector.
    pub fn eval(&self, model: &Dtmc) -> Result<Vec<bool>, PropertyError> {
        let n = model.n();
        Ok(match self {
            StateExpr::True => vec![true; n],
            StateExpr::False => vec![false; n],
            StateExpr::Atom(name) => {
                let idx = model
                    .atom_index(name)
                    .ok_or_else(|| PropertyError::UnknownAtom(name.clone()))?;
                model.atom_states(idx)
            }
            StateExpr::StateEq(k) | StateExpr::StateNe(k) => {
                if *k >= n {
                    return Err(PropertyError::StateOutOfRange { state: *k, n });
                }
                let eq = matches!(self, StateExpr::StateEq(_));
                (0..n).map(|s| (s == *k) == eq).collect()
            }
            StateExpr::Not(e) => e.eval(model)?.into_iter().map(|b| !b).collect(),
            StateExpr::And(a, b) => {
                let (a, b) = (a.eval(model)?, b.eval(model)?);
                a.iter().zip(&b).map(|(x, y)| *x && *y).collect()
            }
            StateExpr::Or(a, b) => {
                let (a, b) = (a.eval(model)?, b.eval(model)?);
                a.iter().zip(&b).map(|(x, y)| *x || *y).collect()
            }
        })
    }

    fn precedence(&self) -> u8 {
        match self {
            StateExpr::Or(..) => 1,
            StateExpr::And(..) => 2,
            StateExpr::Not(_) => 3,
            _ => 4,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let paren = self.precedence() < min;
        if paren {
            write!(f, "(")?;
        }
        match self {
            StateExpr::True => write!(f, "true")?,
            StateExpr::False => write!(f, "false")?,
            StateExpr::Atom(a) => write!(f, "{a}")?,
            StateExpr::StateEq(k) => write!(f, "s={k}")?,
            StateExpr::StateNe(k) => write!(f, "s!={k}")?,
            StateExpr::Not(e) => {
                write!(f, "!")?;
                e.fmt_prec(f, 3)?;
            }
            StateExpr::And(a, b) => {
                a.fmt_prec(f, 2)?;
                write!(f, " & ")?;
                b.fmt_prec(f, 3)?;
            }
            StateExpr::Or(a, b) => {
                a.fmt_prec(f, 1)?;
                write!(f, " | ")?;
                b.fmt_prec(f, 2)?;
            }
        }
        if paren {
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Display for StateExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

/// The supported non-nested path formulae. `F`/`G` are desugared at parse
/// time; `G` becomes a [`PathFormula::Complement`] of an until.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PathFormula {
    Next(StateExpr),
    Until {
        lhs: StateExpr,
        rhs: StateExpr,
        bound: Option<u32>,
    },
    /// Probability `1 - Pr(inner)`.
    Complement(Box<PathFormula>),
}

impl PathFormula {
    pub fn until(lhs: StateExpr, rhs: StateExpr, bound: Option<u32>) -> Self {
        PathFormula::Until { lhs, rhs, bound }
    }

    pub fn eventually(target: StateExpr, bound: Option<u32>) -> Self {
        PathFormula::until(StateExpr::True, target, bound)
    }

    pub fn globally(inv: StateExpr, bound: Option<u32>) -> Self {
        PathFormula::Complement(Box::new(PathFormula::eventually(inv.not(), bound)))
    }

    /// True for formulas the bounded (polynomial) symbolic backend handles.
    pub fn is_bounded(&self) -> bool {
        match self {
            PathFormula::Next(_) => true,
            PathFormula::Until { bound, .. } => bound.is_some(),
            PathFormula::Complement(inner) => inner.is_bounded(),
        }
    }
}

fn fmt_bound(f: &mut fmt::Formatter<'_>, op: &str, bound: Option<u32>) -> fmt::Result {
    match bound {
        Some(k) => write!(f, "{op}<={k}"),
        None => write!(f, "{op}"),
    }
}

impl fmt::Display for PathFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P=? [ ")?;
        match self {
            PathFormula::Next(e) => write!(f, "X {e}")?,
            PathFormula::Until {
                lhs: StateExpr::True,
                rhs,
                bound,
            } => {
                fmt_bound(f, "F", *bound)?;
                write!(f, " {rhs}")?;
            }
            PathFormula::Until { lhs, rhs, bound } => {
                write!(f, "{lhs} ")?;
                fmt_bound(f, "U", *bound)?;
                write!(f, " {rhs}")?;
            }
            PathFormula::Complement(inner) => match inner.as_ref() {
                PathFormula::Until {
                    lhs: StateExpr::True,
                    rhs: StateExpr::Not(inv),
                    bound,
                } => {
                    fmt_bound(f, "G", *bound)?;
                    write!(f, " {inv}")?;
                }
                other => {
                    // Only produced by hand-built formulas.
                    return write!(f, "1 - {other} ]");
                }
            },
        }
        write!(f, " ]")
    }
}
