use std::time::Instant;

use rayon::prelude::*;

use crate::model::Dtmc;
use crate::property::{Checker, PathFormula};
use crate::threat::{Polytope, RowGroup, ThreatModel, BOX_TOLERANCE};

use super::objective::Direct;
use super::optimizer::Objective;
use super::{finish, AttackError, AttackResult, Found, Method, StartTrace};

/// Largest number of (relevant) free variables the grid search accepts.
pub const BRUTE_FORCE_MAX_VARIABLES: usize = 8;
/// Largest number of grid points the grid search evaluates.
pub const BRUTE_FORCE_MAX_POINTS: u128 = 50_000_000;

const CHUNK: u64 = 4096;

/// Candidate values of one variable: its base plus multiples of `step`,
/// clipped to the box, together with the box endpoints.
fn axis(base: f64, lower: f64, upper: f64, step: f64, resolution: u32) -> Vec<f64> {
    let r = resolution as i64;
    let mut vals: Vec<f64> = (-r..=r)
        .map(|j| base + j as f64 * step)
        .filter(|v| *v >= lower - BOX_TOLERANCE && *v <= upper + BOX_TOLERANCE)
        .map(|v| v.clamp(lower, upper))
        .chain([lower, upper])
        .collect();
    vals.sort_by(f64::total_cmp);
    vals.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    vals
}

/// All grid assignments of one row: every combination of the leading
/// variables, with the last one fixed by the row sum and kept only if it
/// lands in its box.
fn row_options(space: &Polytope, g: &RowGroup, step: f64, resolution: u32) -> Vec<Vec<f64>> {
    let vars = &space.vars()[g.start..g.end];
    let k = vars.len();
    let axes: Vec<Vec<f64>> = vars[..k - 1]
        .iter()
        .map(|v| axis(v.base, v.lower, v.upper, step, resolution))
        .collect();
    let last = &vars[k - 1];
    let mut out = Vec::new();
    let mut idx = vec![0usize; k - 1];
    loop {
        let mut vals: Vec<f64> = idx.iter().zip(&axes).map(|(&i, a)| a[i]).collect();
        let dep = g.target - vals.iter().sum::<f64>();
        if dep >= last.lower - BOX_TOLERANCE && dep <= last.upper + BOX_TOLERANCE {
            vals.push(dep.clamp(last.lower, last.upper));
            out.push(vals);
        }
        // Odometer increment, last axis fastest.
        let mut d = k - 1;
        loop {
            if d == 0 {
                return out;
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < axes[d].len() {
                break;
            }
            idx[d] = 0;
        }
    }
}

/// Exhaustive search on a grid of step `epsilon / resolution`. Only rows
/// that can influence the result are gridded; the others stay at base.
pub fn brute_force_min(
    model: &Dtmc,
    tm: &ThreatModel,
    phi: &PathFormula,
    resolution: u32,
) -> Result<AttackResult, AttackError> {
    let started = Instant::now();
    let checker = Checker::new(model, phi)?;
    let pr_original = checker.at_init(model.rows())?;
    let space = Polytope::new(model, tm)?;
    let decided = checker.decided();
    let groups: Vec<&RowGroup> = space
        .groups()
        .iter()
        .filter(|g| !decided[g.state])
        .collect();
    let count: usize = groups.iter().map(|g| g.end - g.start).sum();
    if count > BRUTE_FORCE_MAX_VARIABLES {
        return Err(AttackError::TooManyVariables {
            count,
            max: BRUTE_FORCE_MAX_VARIABLES,
        });
    }
    let step = tm.epsilon() / resolution.max(1) as f64;
    let options: Vec<Vec<Vec<f64>>> = groups
        .iter()
        .map(|g| row_options(&space, g, step, resolution.max(1)))
        .collect();
    let points: u128 = options.iter().map(|o| o.len() as u128).product();
    if points > BRUTE_FORCE_MAX_POINTS {
        return Err(AttackError::GridTooLarge {
            points,
            max: BRUTE_FORCE_MAX_POINTS,
        });
    }
    let points = points as u64;

    let obj = Direct::new(model, &space, &checker, 0.0);
    let base = space.base_point();
    let point_at = |mut index: u64| {
        let mut v = base.clone();
        for (g, opts) in groups.iter().zip(&options).rev() {
            let len = opts.len() as u64;
            v[g.start..g.end].copy_from_slice(&opts[(index % len) as usize]);
            index /= len;
        }
        v
    };
    let best = (0..points.div_ceil(CHUNK))
        .into_par_iter()
        .filter_map(|c| {
            let mut best: Option<(f64, u64)> = None;
            for i in c * CHUNK..((c + 1) * CHUNK).min(points) {
                if let Some(f) = obj.value(&point_at(i)) {
                    if best.is_none_or(|(b, _)| f < b) {
                        best = Some((f, i));
                    }
                }
            }
            best
        })
        .reduce_with(|a, b| {
            if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) {
                b
            } else {
                a
            }
        });

    let point = best.map_or(base.clone(), |(_, i)| point_at(i));
    let found = Found {
        point,
        starts: 1,
        iterations: points as usize,
        converged: vec![true],
        traces: vec![StartTrace {
            start: 0,
            iterations: points as usize,
            converged: true,
            objective: best.map(|(f, _)| vec![f]).unwrap_or_default(),
        }],
    };
    let elapsed = started.elapsed().as_secs_f64();
    finish(
        model,
        tm,
        phi,
        Method::BruteForce,
        &space,
        &checker,
        pr_original,
        found,
        0.0,
        elapsed,
        started,
    )
}
