//! Projected gradient descent with Armijo backtracking over a product of
//! row-wise box ∩ affine slices.

use serde::Serialize;

use crate::parametric::Deadline;
use crate::threat::Polytope;

/// Armijo sufficient-decrease constant.
const ARMIJO_C: f64 = 1e-4;
/// Backtracking shrink factor.
const SHRINK: f64 = 0.5;
/// Steps shorter than this (relative to the box width) end the search.
const MIN_STEP: f64 = 1e-14;

pub(crate) trait Objective: Sync {
    /// Objective at a point of the feasible region, `None` where undefined.
    fn value(&self, v: &[f64]) -> Option<f64>;

    fn gradient(&self, v: &[f64]) -> Option<Vec<f64>>;
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StartTrace {
    pub start: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each accepted iterate, beginning with the start point.
    pub objective: Vec<f64>,
}

pub(crate) struct Outcome {
    pub point: Vec<f64>,
    pub value: f64,
    pub trace: StartTrace,
}

pub(crate) struct Settings {
    pub max_iterations: usize,
    pub objective_tolerance: f64,
    pub step_tolerance: f64,
    pub deadline: Deadline,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Runs one start. Returns `None` only if the objective is undefined at the
/// start point itself or the deadline expires.
pub(crate) fn descend(
    space: &Polytope,
    obj: &dyn Objective,
    start: usize,
    mut x: Vec<f64>,
    s: &Settings,
) -> Option<Outcome> {
    space.project(&mut x).ok()?;
    let mut f = obj.value(&x)?;
    let width = space
        .vars()
        .iter()
        .map(|v| v.upper - v.lower)
        .fold(0.0, f64::max);
    let mut trace = StartTrace {
        start,
        iterations: 0,
        converged: false,
        objective: vec![f],
    };
    for it in 0..s.max_iterations {
        if s.deadline.expired() {
            return None;
        }
        trace.iterations = it + 1;
        let Some(g) = obj.gradient(&x) else { break };
        if !g.iter().all(|v| v.is_finite()) {
            break;
        }
        // Only the part of the gradient along the row-sum slices can move
        // the point; a common shift within a row is undone by projection.
        let mut gmax = 0.0f64;
        for grp in space.groups() {
            let r = &g[grp.start..grp.end];
            let mean = r.iter().sum::<f64>() / r.len() as f64;
            gmax = r.iter().fold(gmax, |m, v| m.max((v - mean).abs()));
        }
        if gmax == 0.0 {
            trace.converged = true;
            break;
        }
        // First trial step crosses the widest box in one move.
        let mut t = width / gmax;
        let mut accepted = None;
        while t * gmax > MIN_STEP * width.max(1.0) {
            let mut y: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - t * gi).collect();
            if space.project(&mut y).is_err() {
                break;
            }
            let d: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
            let dmax = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if dmax < s.step_tolerance {
                break;
            }
            if let Some(fy) = obj.value(&y) {
                if fy <= f + ARMIJO_C * dot(&g, &d) {
                    accepted = Some((y, fy));
                    break;
                }
            }
            t *= SHRINK;
        }
        let Some((y, fy)) = accepted else {
            // No descent along the projected gradient: stationary.
            trace.converged = true;
            break;
        };
        let change = f - fy;
        x = y;
        f = fy;
        trace.objective.push(f);
        if change < s.objective_tolerance {
            trace.converged = true;
            break;
        }
    }
    Some(Outcome {
        point: x,
        value: f,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Dtmc;
    use crate::threat::{ThreatKind, ThreatModel};

    struct Quadratic {
        target: Vec<f64>,
    }

    impl Objective for Quadratic {
        fn value(&self, v: &[f64]) -> Option<f64> {
            Some(
                v.iter()
                    .zip(&self.target)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum(),
            )
        }

        fn gradient(&self, v: &[f64]) -> Option<Vec<f64>> {
            Some(
                v.iter()
                    .zip(&self.target)
                    .map(|(a, b)| 2.0 * (a - b))
                    .collect(),
            )
        }
    }

    fn settings() -> Settings {
        Settings {
            max_iterations: 200,
            objective_tolerance: 1e-14,
            step_tolerance: 1e-12,
            deadline: Deadline::none(),
        }
    }

    #[test]
    fn finds_constrained_minimum_of_quadratic() {
        let m = Dtmc::from_dense(
            0,
            &[
                vec![0.3, 0.3, 0.4],
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
            ],
        )
        .unwrap();
        let tm = ThreatModel::states(ThreatKind::Ss, 0.2, [0]).unwrap();
        let space = Polytope::new(&m, &tm).unwrap();
        // Unconstrained optimum (0.5, 0.1, 0.4) is feasible.
        let obj = Quadratic {
            target: vec![0.5, 0.1, 0.4],
        };
        let out = descend(&space, &obj, 0, space.base_point(), &settings()).unwrap();
        for (a, b) in out.point.iter().zip(&obj.target) {
            assert!((a - b).abs() < 1e-6, "{:?}", out.point);
        }
        assert!(out.trace.converged);
        // Infeasible optimum: projection of (0.9, 0.1, 0.0) onto the slice.
        let obj = Quadratic {
            target: vec![0.9, 0.1, 0.0],
        };
        let out = descend(&space, &obj, 0, space.base_point(), &settings()).unwrap();
        let expect = [0.5, 0.3, 0.2];
        for (a, b) in out.point.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-6, "{:?}", out.point);
        }
        let obj_trace = &out.trace.objective;
        assert!(obj_trace.windows(2).all(|w| w[1] <= w[0]));
    }
}
