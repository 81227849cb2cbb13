use std::collections::{BTreeMap, BTreeSet, VecDeque};

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::model::{Dtmc, SparseRow};
use crate::property::{graph, Checker, Operator, PathFormula};
use crate::threat::{Polytope, ThreatModel};

use super::poly::{rational, Polynomial};
use super::rational::RationalFunction;
use super::{ParametricError, SynthesisOptions};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Cell {
    Const(BigRational),
    Var(usize),
}

/// Parametric chain: the base chain with one variable per movable
/// vulnerable cell (in the threat model's free-variable order).
#[derive(Debug, Clone)]
pub struct Pdtmc {
    base: Dtmc,
    space: Polytope,
    names: Vec<String>,
    rows: Vec<Vec<(usize, Cell)>>,
}

pub fn build_pdtmc(model: &Dtmc, tm: &ThreatModel) -> Result<Pdtmc, ParametricError> {
    let space = Polytope::new(model, tm)?;
    if space.dim() == 0 && tm.epsilon() > 0.0 {
        return Err(ParametricError::EmptyThreat);
    }
    Ok(Pdtmc::from_space(model, space))
}

impl Pdtmc {
    pub fn from_space(model: &Dtmc, space: Polytope) -> Self {
        let mut cells: Vec<BTreeMap<usize, Cell>> = model
            .rows()
            .iter()
            .map(|r| {
                r.iter()
                    .map(|&(t, p)| (t, Cell::Const(rational(p))))
                    .collect()
            })
            .collect();
        let mut names = Vec::with_capacity(space.dim());
        for (i, v) in space.vars().iter().enumerate() {
            cells[v.from].insert(v.to, Cell::Var(i));
            names.push(format!("p{}_{}", v.from, v.to));
        }
        Pdtmc {
            base: model.clone(),
            space,
            names,
            rows: cells.into_iter().map(|r| r.into_iter().collect()).collect(),
        }
    }

    pub fn base(&self) -> &Dtmc {
        &self.base
    }

    pub fn space(&self) -> &Polytope {
        &self.space
    }

    pub fn nvars(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn cells(&self, s: usize) -> &[(usize, Cell)] {
        &self.rows[s]
    }

    /// Explicit rows at the variable assignment `x`.
    pub fn instantiate(&self, x: &[f64]) -> Vec<SparseRow> {
        self.space.rows_at(&self.base, x)
    }

    fn successors(&self) -> Vec<Vec<usize>> {
        self.rows
            .iter()
            .map(|r| {
                r.iter()
                    .filter(|(_, c)| match c {
                        Cell::Const(p) => !p.is_zero(),
                        Cell::Var(i) => self.space.vars()[*i].upper > 0.0,
                    })
                    .map(|(t, _)| *t)
                    .collect()
            })
            .collect()
    }
}

/// Symbolic solution function of any supported formula.
pub fn synthesize(
    pd: &Pdtmc,
    phi: &PathFormula,
    opts: &SynthesisOptions,
) -> Result<RationalFunction, ParametricError> {
    if phi.is_bounded() {
        symbolic_bounded_until(pd, phi, opts).map(RationalFunction::from_polynomial)
    } else {
        symbolic_unbounded_until(pd, phi, opts)
    }
}

fn complemented(p: Polynomial, complement: bool) -> Polynomial {
    if complement {
        &Polynomial::one(p.nvars()) - &p
    } else {
        p
    }
}

/// Polynomial solution of a next or step-bounded until formula, by value
/// iteration in exact polynomial arithmetic.
pub fn symbolic_bounded_until(
    pd: &Pdtmc,
    phi: &PathFormula,
    opts: &SynthesisOptions,
) -> Result<Polynomial, ParametricError> {
    let checker = Checker::new(&pd.base, phi)?;
    let nv = pd.nvars();
    let n = pd.base.n();
    let (lhs, rhs) = (checker.lhs(), checker.rhs());
    let k = match checker.operator() {
        Operator::Next => {
            let mut p = Polynomial::zero(nv);
            for (t, c) in &pd.rows[pd.base.init()] {
                if rhs[*t] {
                    add_cell(&mut p, c, &Polynomial::one(nv));
                }
            }
            return Ok(complemented(p, checker.complement()));
        }
        Operator::Bounded(k) => k as usize,
        Operator::Unbounded => {
            return Err(ParametricError::UnsupportedForSymbolic(
                "unbounded until has a rational, not polynomial, solution".into(),
            ))
        }
    };

    // Only states within k - j steps of init matter for iterate j.
    let mut dist = vec![usize::MAX; n];
    let succ = pd.successors();
    let mut queue = VecDeque::from([pd.base.init()]);
    dist[pd.base.init()] = 0;
    while let Some(s) = queue.pop_front() {
        for &t in &succ[s] {
            if dist[t] == usize::MAX {
                dist[t] = dist[s] + 1;
                queue.push_back(t);
            }
        }
    }

    let one = Polynomial::one(nv);
    let mut x: Vec<Polynomial> = (0..n)
        .map(|s| {
            if rhs[s] {
                one.clone()
            } else {
                Polynomial::zero(nv)
            }
        })
        .collect();
    for j in 1..=k {
        opts.deadline.check()?;
        let horizon = k - j;
        let mut y: Vec<Polynomial> = Vec::with_capacity(n);
        let mut total = 0;
        for s in 0..n {
            let p = if rhs[s] {
                one.clone()
            } else if !lhs[s] || dist[s] > horizon {
                Polynomial::zero(nv)
            } else {
                let mut acc = Polynomial::zero(nv);
                for (t, c) in &pd.rows[s] {
                    add_cell(&mut acc, c, &x[*t]);
                }
                acc
            };
            total += p.term_count();
            if total > opts.max_terms {
                return Err(ParametricError::DegreeOverflow {
                    terms: total,
                    cap: opts.max_terms,
                });
            }
            y.push(p);
        }
        x = y;
    }
    let init = pd.base.init();
    Ok(complemented(
        std::mem::replace(&mut x[init], one),
        checker.complement(),
    ))
}

fn add_cell(acc: &mut Polynomial, cell: &Cell, value: &Polynomial) {
    match cell {
        Cell::Const(c) => acc.add_scaled(value, c),
        Cell::Var(i) => acc.add_mul_var(value, *i),
    }
}

/// Order in which interior states are eliminated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EliminationOrder {
    /// Constant rows first, then fewest in-degree × out-degree, ties by
    /// lowest state index.
    #[default]
    FewestFill,
    /// Ascending state index.
    Ascending,
}

const GOAL: usize = usize::MAX;

/// Rational solution of an unbounded until formula by state elimination.
pub fn symbolic_unbounded_until(
    pd: &Pdtmc,
    phi: &PathFormula,
    opts: &SynthesisOptions,
) -> Result<RationalFunction, ParametricError> {
    let checker = Checker::new(&pd.base, phi)?;
    if checker.operator() != Operator::Unbounded {
        return Err(ParametricError::UnsupportedForSymbolic(
            "state elimination applies to unbounded until".into(),
        ));
    }
    let nv = pd.nvars();
    let n = pd.base.n();
    let init = pd.base.init();
    let (lhs, rhs) = (checker.lhs(), checker.rhs());
    let succ = pd.successors();
    let no = graph::prob0(&succ, lhs, rhs);
    let yes = graph::prob1(&succ, lhs, rhs, &no, &vec![false; n]);
    let finish = |f: RationalFunction| {
        if checker.complement() {
            f.one_minus()
        } else {
            f
        }
    };
    if yes[init] || no[init] {
        let c = if yes[init] {
            BigRational::one()
        } else {
            BigRational::zero()
        };
        return Ok(finish(RationalFunction::constant(nv, c)));
    }

    let maybe: Vec<bool> = (0..n).map(|s| !yes[s] && !no[s]).collect();
    let mut out: Vec<BTreeMap<usize, RationalFunction>> = vec![BTreeMap::new(); n];
    let mut pred: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for s in (0..n).filter(|&s| maybe[s]) {
        for (t, c) in &pd.rows[s] {
            let w = match c {
                Cell::Const(p) => RationalFunction::constant(nv, p.clone()),
                Cell::Var(i) => RationalFunction::from_polynomial(Polynomial::var(nv, *i)),
            };
            if w.is_zero() {
                continue;
            }
            let key = if yes[*t] {
                GOAL
            } else if maybe[*t] {
                pred[*t].insert(s);
                *t
            } else {
                continue;
            };
            let slot = out[s]
                .entry(key)
                .or_insert_with(|| RationalFunction::constant(nv, BigRational::zero()));
            *slot = slot.add(&w);
        }
    }

    let mut alive: BTreeSet<usize> = (0..n).filter(|&s| maybe[s] && s != init).collect();
    while !alive.is_empty() {
        opts.deadline.check()?;
        let s = match opts.order {
            EliminationOrder::Ascending => *alive.iter().next().unwrap(),
            EliminationOrder::FewestFill => *alive
                .iter()
                .min_by_key(|&&s| {
                    let parametric = out[s].values().any(|w| w.as_constant().is_none());
                    let ins = pred[s].iter().filter(|&&p| p != s).count();
                    let outs = out[s].keys().filter(|&&t| t != s).count();
                    (parametric, ins * outs, s)
                })
                .unwrap(),
        };
        alive.remove(&s);
        eliminate(&mut out, &mut pred, s, opts)?;
    }

    let to_goal = out[init]
        .get(&GOAL)
        .cloned()
        .unwrap_or_else(|| RationalFunction::constant(nv, BigRational::zero()));
    let f = match out[init].get(&init) {
        Some(l) => to_goal.div(&l.one_minus())?,
        None => to_goal,
    };
    Ok(finish(f))
}

fn eliminate(
    out: &mut [BTreeMap<usize, RationalFunction>],
    pred: &mut [BTreeSet<usize>],
    s: usize,
    opts: &SynthesisOptions,
) -> Result<(), ParametricError> {
    let mut row = std::mem::take(&mut out[s]);
    let scale = match row.remove(&s) {
        Some(l) => {
            let stay = l.one_minus();
            if stay.is_zero() {
                return Err(ParametricError::DivisionByZeroPolynomial);
            }
            Some(stay)
        }
        None => None,
    };
    if let Some(stay) = &scale {
        for w in row.values_mut() {
            *w = w.div(stay)?;
        }
    }
    let preds: Vec<usize> = std::mem::take(&mut pred[s])
        .into_iter()
        .filter(|&p| p != s)
        .collect();
    for &t in row.keys() {
        if t != GOAL {
            pred[t].remove(&s);
        }
    }
    for p in preds {
        let w_ps = out[p].remove(&s).expect("predecessor edge");
        for (&t, w_st) in &row {
            let add = w_ps.mul(w_st);
            let slot = out[p]
                .entry(t)
                .or_insert_with(|| RationalFunction::constant(add.nvars(), BigRational::zero()));
            *slot = slot.add(&add);
            if slot.size() > opts.max_terms {
                return Err(ParametricError::DegreeOverflow {
                    terms: slot.size(),
                    cap: opts.max_terms,
                });
            }
            if t != GOAL {
                pred[t].insert(p);
            }
        }
    }
    Ok(())
}
