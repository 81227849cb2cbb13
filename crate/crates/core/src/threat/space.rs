use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::model::{Dtmc, PerturbationMatrix, SparseRow, ROW_SUM_TOLERANCE};

use super::{ThreatError, ThreatModel, Vulnerable};

/// Slack allowed on box bounds when checking feasibility of reported points.
pub const BOX_TOLERANCE: f64 = 1e-12;

/// One vulnerable cell, as an absolute probability with its box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FreeVariable {
    pub from: usize,
    pub to: usize,
    pub base: f64,
    pub lower: f64,
    pub upper: f64,
}

impl FreeVariable {
    fn new(from: usize, to: usize, base: f64, epsilon: f64) -> Self {
        FreeVariable {
            from,
            to,
            base,
            lower: (base - epsilon).max(0.0),
            upper: (base + epsilon).min(1.0),
        }
    }

    pub fn is_fixed(&self) -> bool {
        self.lower == self.upper
    }
}

fn candidate_cells(model: &Dtmc, tm: &ThreatModel) -> Vec<(usize, usize)> {
    let structural = tm.kind().preserves_structure();
    let keep = |&(s, t): &(usize, usize)| !structural || model.prob(s, t) != 0.0;
    match tm.vulnerable() {
        Vulnerable::States(states) => states
            .iter()
            .flat_map(|&s| (0..model.n()).map(move |t| (s, t)))
            .filter(keep)
            .collect(),
        Vulnerable::Transitions(cells) => cells.iter().copied().filter(keep).collect(),
    }
}

/// Free variables of `tm` on `model`, sorted by `(from, to)`.
///
/// A variable that is alone in its row is pinned to its base value, since
/// the row-sum constraint leaves it no room to move.
pub fn free_variables(model: &Dtmc, tm: &ThreatModel) -> Result<Vec<FreeVariable>, ThreatError> {
    tm.check_range(model.n())?;
    let cells = candidate_cells(model, tm);
    let mut vars: Vec<FreeVariable> = cells
        .iter()
        .map(|&(s, t)| FreeVariable::new(s, t, model.prob(s, t), tm.epsilon()))
        .collect();
    let mut i = 0;
    while i < vars.len() {
        let j = i + vars[i..]
            .iter()
            .take_while(|v| v.from == vars[i].from)
            .count();
        if j - i == 1 {
            vars[i].lower = vars[i].base;
            vars[i].upper = vars[i].base;
        }
        i = j;
    }
    Ok(vars)
}

/// Whether `x` lies in the perturbation set of `tm` around `model`.
pub fn feasible(model: &Dtmc, tm: &ThreatModel, x: &PerturbationMatrix) -> bool {
    let n = model.n();
    if tm.check_range(n).is_err() {
        return false;
    }
    let eps = tm.epsilon();
    let structural = tm.kind().preserves_structure();
    for ((s, t), d) in x.entries() {
        if s >= n || t >= n || !tm.covers(s, t) {
            return false;
        }
        let p = model.prob(s, t);
        if structural && p == 0.0 {
            return false;
        }
        let v = p + d;
        if !d.is_finite()
            || d.abs() > eps + BOX_TOLERANCE
            || !(-BOX_TOLERANCE..=1.0 + BOX_TOLERANCE).contains(&v)
        {
            return false;
        }
    }
    let rows = x.touched_rows();
    rows.iter().all(|&s| {
        let sum: f64 = x
            .entries()
            .filter(|((r, _), _)| *r == s)
            .map(|(_, d)| d)
            .sum();
        sum.abs() <= ROW_SUM_TOLERANCE
    })
}

/// Euclidean projection of `y` onto `{l ≤ v ≤ u, Σv = target}`.
///
/// Solves for the shift `λ` with `Σ clamp(yᵢ − λ, lᵢ, uᵢ) = target` exactly by
/// scanning the sorted breakpoints of the piecewise-linear sum, then pushes
/// the remaining rounding residue into coordinates with slack.
pub fn project_box_sum(y: &[f64], l: &[f64], u: &[f64], target: f64) -> Option<Vec<f64>> {
    let lo: f64 = l.iter().sum();
    let hi: f64 = u.iter().sum();
    if target < lo - ROW_SUM_TOLERANCE || target > hi + ROW_SUM_TOLERANCE {
        return None;
    }
    let g = |lam: f64| -> f64 {
        y.iter()
            .zip(l.iter().zip(u))
            .map(|(&yi, (&li, &ui))| (yi - lam).clamp(li, ui))
            .sum()
    };
    let mut bps: Vec<f64> = y
        .iter()
        .zip(l.iter().zip(u))
        .flat_map(|(&yi, (&li, &ui))| [yi - ui, yi - li])
        .collect();
    bps.sort_by(f64::total_cmp);
    bps.dedup();
    // g is non-increasing; find consecutive breakpoints bracketing target.
    let lam = if target >= g(bps[0]) {
        bps[0]
    } else if target <= g(bps[bps.len() - 1]) {
        bps[bps.len() - 1]
    } else {
        let k = bps.partition_point(|&b| g(b) > target);
        let (a, b) = (bps[k - 1], bps[k]);
        let (ga, gb) = (g(a), g(b));
        if ga == gb {
            a
        } else {
            a + (ga - target) * (b - a) / (ga - gb)
        }
    };
    let mut v: Vec<f64> = y
        .iter()
        .zip(l.iter().zip(u))
        .map(|(&yi, (&li, &ui))| (yi - lam).clamp(li, ui))
        .collect();
    let mut residue = target - v.iter().sum::<f64>();
    for i in 0..v.len() {
        if residue == 0.0 {
            break;
        }
        let next = (v[i] + residue).clamp(l[i], u[i]);
        residue -= next - v[i];
        v[i] = next;
    }
    Some(v)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowGroup {
    pub state: usize,
    pub start: usize,
    pub end: usize,
    /// Sum the group's variables must keep so the row stays stochastic.
    pub target: f64,
}

/// Feasible region of a threat model in the coordinates of its movable
/// variables: a product over rows of box ∩ affine slice.
#[derive(Debug, Clone)]
pub struct Polytope {
    vars: Vec<FreeVariable>,
    groups: Vec<RowGroup>,
}

impl Polytope {
    pub fn new(model: &Dtmc, tm: &ThreatModel) -> Result<Self, ThreatError> {
        let vars: Vec<FreeVariable> = free_variables(model, tm)?
            .into_iter()
            .filter(|v| !v.is_fixed())
            .collect();
        let mut groups = Vec::new();
        let mut i = 0;
        while i < vars.len() {
            let j = i + vars[i..]
                .iter()
                .take_while(|v| v.from == vars[i].from)
                .count();
            groups.push(RowGroup {
                state: vars[i].from,
                start: i,
                end: j,
                target: vars[i..j].iter().map(|v| v.base).sum(),
            });
            i = j;
        }
        Ok(Polytope { vars, groups })
    }

    pub fn dim(&self) -> usize {
        self.vars.len()
    }

    pub fn vars(&self) -> &[FreeVariable] {
        &self.vars
    }

    pub fn groups(&self) -> &[RowGroup] {
        &self.groups
    }

    pub fn base_point(&self) -> Vec<f64> {
        self.vars.iter().map(|v| v.base).collect()
    }

    pub fn lower(&self) -> Vec<f64> {
        self.vars.iter().map(|v| v.lower).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.vars.iter().map(|v| v.upper).collect()
    }

    /// Projects `v` onto the feasible region in place.
    pub fn project(&self, v: &mut [f64]) -> Result<(), ThreatError> {
        for g in &self.groups {
            let r = g.start..g.end;
            let l: Vec<f64> = self.vars[r.clone()].iter().map(|x| x.lower).collect();
            let u: Vec<f64> = self.vars[r.clone()].iter().map(|x| x.upper).collect();
            let p = project_box_sum(&v[r.clone()], &l, &u, g.target)
                .ok_or(ThreatError::ProjectionFailed { state: g.state })?;
            v[r].copy_from_slice(&p);
        }
        Ok(())
    }

    /// Uniform draw in each box followed by projection.
    pub fn random_point<R: Rng>(&self, rng: &mut R) -> Result<Vec<f64>, ThreatError> {
        let mut v: Vec<f64> = self
            .vars
            .iter()
            .map(|x| rng.gen_range(x.lower..=x.upper))
            .collect();
        self.project(&mut v)?;
        Ok(v)
    }

    pub fn to_perturbation(&self, v: &[f64]) -> PerturbationMatrix {
        PerturbationMatrix::from_entries(
            self.vars
                .iter()
                .zip(v)
                .map(|(x, &val)| ((x.from, x.to), val - x.base)),
        )
    }

    /// Reads the variable values of `x` (variables it does not mention stay
    /// at their base).
    pub fn from_perturbation(&self, x: &PerturbationMatrix) -> Vec<f64> {
        self.vars
            .iter()
            .map(|v| v.base + x.get(v.from, v.to))
            .collect()
    }

    /// Transition rows of `model` with the variables set to `v`. Rows are not
    /// required to stay stochastic (finite-difference probes leave the slice).
    pub fn rows_at(&self, model: &Dtmc, v: &[f64]) -> Vec<SparseRow> {
        let mut rows = model.rows().to_vec();
        for g in &self.groups {
            let mut dense: std::collections::BTreeMap<usize, f64> =
                rows[g.state].iter().copied().collect();
            for (x, &val) in self.vars[g.start..g.end].iter().zip(&v[g.start..g.end]) {
                dense.insert(x.to, val);
            }
            rows[g.state] = dense.into_iter().filter(|&(_, p)| p != 0.0).collect();
        }
        rows
    }
}

/// Deterministic random feasible perturbation.
pub fn random_feasible_point(
    model: &Dtmc,
    tm: &ThreatModel,
    seed: u64,
) -> Result<PerturbationMatrix, ThreatError> {
    let poly = Polytope::new(model, tm)?;
    if poly.dim() == 0 {
        return Err(ThreatError::EmptyThreat);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = poly.random_point(&mut rng)?;
    Ok(poly.to_perturbation(&v))
}
