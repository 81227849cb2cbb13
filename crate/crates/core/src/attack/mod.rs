//! Worst-case perturbations, robustness verification and maximum
//! probability drop.
//!
//! The search minimises the satisfaction probability over the threat
//! model's feasible region by projected gradient descent from several
//! starts. The objective comes either from the explicit checker
//! (`Method::Direct`, finite-difference gradients) or from a synthesized
//! solution function (`Method::Symbolic`, exact partial derivatives).
//! `brute_force_min` is an exhaustive grid search used as a reference.

mod brute;
mod objective;
mod optimizer;

pub use brute::{brute_force_min, BRUTE_FORCE_MAX_POINTS, BRUTE_FORCE_MAX_VARIABLES};
pub use optimizer::StartTrace;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{apply_perturbation, Dtmc, ModelError, PerturbationMatrix};
use crate::parametric::{
    synthesize, Deadline, EliminationOrder, ParametricError, Pdtmc, SynthesisOptions,
    DEFAULT_MAX_TERMS,
};
use crate::property::{Checker, PathFormula, PropertyError};
use crate::threat::{Polytope, ThreatError, ThreatKind, ThreatModel};

use objective::{Direct, Symbolic};
use optimizer::{descend, Objective, Outcome, Settings};

/// Slack on the robustness comparison `Pr' >= Pr - delta`.
pub const VERIFY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Synthesis,
    Optimization,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Synthesis => "synthesis",
            Phase::Optimization => "optimization",
        })
    }
}

#[derive(Debug, Error)]
pub enum AttackError {
    #[error(transparent)]
    Property(#[from] PropertyError),

    #[error(transparent)]
    Threat(#[from] ThreatError),

    #[error(transparent)]
    Parametric(ParametricError),

    #[error(transparent)]
    Model(#[from] ModelError),

    #[error("{count} free variables exceed the brute-force limit of {max}")]
    TooManyVariables { count: usize, max: usize },

    #[error("brute-force grid has {points} points (limit {max})")]
    GridTooLarge { points: u128, max: u128 },

    #[error("{0} exceeded its time limit")]
    Timeout(Phase),

    #[error("budget must lie in [0, 1], got {0}")]
    BadDelta(f64),
}

impl From<ParametricError> for AttackError {
    fn from(e: ParametricError) -> Self {
        match e {
            ParametricError::Timeout => AttackError::Timeout(Phase::Synthesis),
            ParametricError::Property(p) => AttackError::Property(p),
            ParametricError::Threat(t) => AttackError::Threat(t),
            other => AttackError::Parametric(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Direct,
    Symbolic,
    BruteForce,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Direct => "direct",
            Method::Symbolic => "symbolic",
            Method::BruteForce => "brute-force",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "direct" => Ok(Method::Direct),
            "symbolic" => Ok(Method::Symbolic),
            "brute-force" | "bruteforce" | "brute" => Ok(Method::BruteForce),
            _ => Err(format!(
                "unknown method '{s}' (expected direct, symbolic or brute-force)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OptimizerOptions {
    pub max_iterations: usize,
    pub objective_tolerance: f64,
    pub step_tolerance: f64,
    /// Start 0 is the unperturbed chain; the rest are seeded random points.
    pub starts: usize,
    pub fd_step: f64,
    pub seed: u64,
    pub max_terms: usize,
    pub order: EliminationOrder,
    pub synthesis_timeout: Option<Duration>,
    pub optimization_timeout: Option<Duration>,
    /// Grid resolution for `Method::BruteForce`.
    pub resolution: u32,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions {
            max_iterations: 200,
            objective_tolerance: 1e-8,
            step_tolerance: 1e-10,
            starts: 5,
            fd_step: 1e-6,
            seed: 42,
            max_terms: DEFAULT_MAX_TERMS,
            order: EliminationOrder::default(),
            synthesis_timeout: None,
            optimization_timeout: None,
            resolution: 20,
        }
    }
}

fn deadline(limit: Option<Duration>) -> Deadline {
    limit.map_or(Deadline::none(), Deadline::after)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttackResult {
    pub threat: ThreatModel,
    pub property: String,
    pub method: Method,
    pub n_params: usize,
    pub x_star: PerturbationMatrix,
    pub pr_original: f64,
    pub pr_perturbed: f64,
    pub delta_star: f64,
    pub starts: usize,
    pub iterations: usize,
    pub converged: Vec<bool>,
    pub traces: Vec<StartTrace>,
    pub synth_seconds: f64,
    pub opt_seconds: f64,
    pub wall_seconds: f64,
}

impl AttackResult {
    /// The result JSON with timing fields zeroed, for reproducibility checks.
    pub fn without_timing(&self) -> Self {
        AttackResult {
            synth_seconds: 0.0,
            opt_seconds: 0.0,
            wall_seconds: 0.0,
            ..self.clone()
        }
    }
}

pub(crate) struct Found {
    pub point: Vec<f64>,
    pub starts: usize,
    pub iterations: usize,
    pub converged: Vec<bool>,
    pub traces: Vec<StartTrace>,
}

/// Shared tail of every method: recompute the probability on the explicit
/// perturbed chain and fall back to no perturbation if that is better.
pub(crate) fn finish(
    model: &Dtmc,
    tm: &ThreatModel,
    phi: &PathFormula,
    method: Method,
    space: &Polytope,
    checker: &Checker,
    pr_original: f64,
    found: Found,
    synth_seconds: f64,
    opt_seconds: f64,
    started: Instant,
) -> Result<AttackResult, AttackError> {
    let mut x_star = space.to_perturbation(&found.point);
    let perturbed = apply_perturbation(model, &x_star)?;
    let mut pr_perturbed = checker.at_init(perturbed.rows())?;
    if !(pr_perturbed <= pr_original) {
        x_star = PerturbationMatrix::new();
        pr_perturbed = pr_original;
    }
    Ok(AttackResult {
        threat: tm.clone(),
        property: phi.to_string(),
        method,
        n_params: space.dim(),
        x_star,
        pr_original,
        pr_perturbed,
        delta_star: pr_original - pr_perturbed,
        starts: found.starts,
        iterations: found.iterations,
        converged: found.converged,
        traces: found.traces,
        synth_seconds,
        opt_seconds,
        wall_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Minimises `Pr(s₀ ⊨ φ)` over the threat model's feasible perturbations.
pub fn synthesize_attack(
    model: &Dtmc,
    tm: &ThreatModel,
    phi: &PathFormula,
    method: Method,
    opts: &OptimizerOptions,
) -> Result<AttackResult, AttackError> {
    if method == Method::BruteForce {
        return brute_force_min(model, tm, phi, opts.resolution);
    }
    let started = Instant::now();
    let checker = Checker::new(model, phi)?;
    let pr_original = checker.at_init(model.rows())?;
    let space = Polytope::new(model, tm)?;
    let finish = |found, synth, opt| {
        finish(
            model,
            tm,
            phi,
            method,
            &space,
            &checker,
            pr_original,
            found,
            synth,
            opt,
            started,
        )
    };
    if space.dim() == 0 {
        let found = Found {
            point: Vec::new(),
            starts: 0,
            iterations: 0,
            converged: Vec::new(),
            traces: Vec::new(),
        };
        return finish(found, 0.0, 0.0);
    }

    let symbolic;
    let direct;
    let obj: &dyn Objective = match method {
        Method::Symbolic => {
            let pd = Pdtmc::from_space(model, space.clone());
            let sopts = SynthesisOptions {
                max_terms: opts.max_terms,
                deadline: deadline(opts.synthesis_timeout),
                order: opts.order,
            };
            symbolic = Symbolic::new(&synthesize(&pd, phi, &sopts)?);
            &symbolic
        }
        _ => {
            direct = Direct::new(model, &space, &checker, opts.fd_step);
            &direct
        }
    };
    let synth_seconds = started.elapsed().as_secs_f64();

    let opt_started = Instant::now();
    let settings = Settings {
        max_iterations: opts.max_iterations,
        objective_tolerance: opts.objective_tolerance,
        step_tolerance: opts.step_tolerance,
        deadline: deadline(opts.optimization_timeout),
    };
    let points: Vec<Vec<f64>> = (0..opts.starts.max(1))
        .map(|i| {
            if i == 0 {
                Ok(space.base_point())
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                rng.set_stream(i as u64);
                space.random_point(&mut rng)
            }
        })
        .collect::<Result<_, _>>()?;
    let outcomes: Vec<Option<Outcome>> = points
        .into_par_iter()
        .enumerate()
        .map(|(i, x)| descend(&space, obj, i, x, &settings))
        .collect();
    if settings.deadline.expired() {
        return Err(AttackError::Timeout(Phase::Optimization));
    }

    let mut best: Option<&Outcome> = None;
    for o in outcomes.iter().flatten() {
        if best.is_none_or(|b| o.value < b.value) {
            best = Some(o);
        }
    }
    let best = best.ok_or(AttackError::Parametric(
        ParametricError::DenominatorNearZero,
    ))?;
    let traces: Vec<StartTrace> = outcomes.iter().flatten().map(|o| o.trace.clone()).collect();
    let found = Found {
        point: best.point.clone(),
        starts: outcomes.len(),
        iterations: traces.iter().map(|t| t.iterations).sum(),
        converged: traces.iter().map(|t| t.converged).collect(),
        traces,
    };
    finish(found, synth_seconds, opt_started.elapsed().as_secs_f64())
}

/// Largest drop in satisfaction probability the threat model allows,
/// clamped to `[0, 1]`.
pub fn max_delta(
    model: &Dtmc,
    tm: &ThreatModel,
    phi: &PathFormula,
    method: Method,
    opts: &OptimizerOptions,
) -> Result<f64, AttackError> {
    Ok(synthesize_attack(model, tm, phi, method, opts)?
        .delta_star
        .clamp(0.0, 1.0))
}

#[derive(Debug, Clone)]
pub struct Verification {
    pub robust: bool,
    pub delta: f64,
    pub attack: AttackResult,
    /// The perturbed chain, when the attack breaks the budget.
    pub witness: Option<Dtmc>,
}

/// Decides whether every feasible perturbation keeps the probability
/// within `delta` of the original, up to the optimizer's reach.
pub fn verify_robustness(
    model: &Dtmc,
    tm: &ThreatModel,
    phi: &PathFormula,
    delta: f64,
    method: Method,
    opts: &OptimizerOptions,
) -> Result<Verification, AttackError> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(AttackError::BadDelta(delta));
    }
    let attack = synthesize_attack(model, tm, phi, method, opts)?;
    let robust = attack.pr_perturbed >= attack.pr_original - delta - VERIFY_SLACK;
    let witness = if robust {
        None
    } else {
        Some(apply_perturbation(model, &attack.x_star)?)
    };
    Ok(Verification {
        robust,
        delta,
        attack,
        witness,
    })
}

#[derive(Debug)]
pub struct ComponentDelta {
    pub state: usize,
    pub delta_star: Result<f64, AttackError>,
}

/// `max_delta` with each state alone as the vulnerable set. A failure at
/// one state is recorded in its entry and does not stop the sweep.
pub fn component_sweep(
    model: &Dtmc,
    kind: ThreatKind,
    epsilon: f64,
    phi: &PathFormula,
    method: Method,
    opts: &OptimizerOptions,
) -> Result<Vec<ComponentDelta>, AttackError> {
    // Rejects a bad budget or a transition kind once, before fanning out.
    ThreatModel::states(kind, epsilon, [])?;
    Ok((0..model.n())
        .into_par_iter()
        .map(|s| ComponentDelta {
            state: s,
            delta_star: ThreatModel::states(kind, epsilon, [s])
                .map_err(AttackError::from)
                .and_then(|tm| max_delta(model, &tm, phi, method, opts)),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case_studies::simple_protocol;
    use crate::property::parse_property;
    use crate::threat::feasible;

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

    fn avoid_two() -> PathFormula {
        parse_property("P=? [ s!=2 U<=10 s=3 ]").unwrap()
    }

    #[test]
    fn spss_single_state_attack() {
        let m = four_state();
        let tm = ThreatModel::states(ThreatKind::Spss, 0.1, [1]).unwrap();
        for method in [Method::Direct, Method::Symbolic] {
            let r = synthesize_attack(&m, &tm, &avoid_two(), method, &OptimizerOptions::default())
                .unwrap();
            assert!(
                (r.delta_star - 0.033061149).abs() < 1e-6,
                "{method}: {}",
                r.delta_star
            );
            assert!(feasible(&m, &tm, &r.x_star));
            assert_eq!(r.starts, 5);
            // The worst case moves all budget from 1→3 onto the self-loop.
            assert!((r.x_star.get(1, 3) + 0.1).abs() < 1e-6);
        }
    }

    #[test]
    fn simple_protocol_closed_form() {
        let m = simple_protocol();
        let tm = ThreatModel::states(ThreatKind::Spss, 0.1, [1]).unwrap();
        let phi = parse_property("P=? [ F<=10 delivered ]").unwrap();
        let r =
            synthesize_attack(&m, &tm, &phi, Method::Direct, &OptimizerOptions::default()).unwrap();
        assert!(
            (r.pr_perturbed - (1.0 - 0.3f64.powi(5))).abs() < 1e-6,
            "{}",
            r.pr_perturbed
        );
    }

    #[test]
    fn zero_budget_is_no_attack() {
        let m = four_state();
        let tm = ThreatModel::transitions(ThreatKind::St, 0.0, [(0, 1), (0, 2), (1, 0), (1, 3)])
            .unwrap();
        let r =
            synthesize_attack(&m, &tm, &avoid_two(), Method::Direct, &Default::default()).unwrap();
        assert_eq!(r.delta_star, 0.0);
        assert!(r.x_star.is_empty());
        assert_eq!(r.starts, 0);
    }

    #[test]
    fn verify_and_max_delta_agree() {
        let m = four_state();
        let tm = ThreatModel::states(ThreatKind::Ss, 0.1, [1]).unwrap();
        let opts = OptimizerOptions::default();
        let d = max_delta(&m, &tm, &avoid_two(), Method::Direct, &opts).unwrap();
        assert!((d - 0.094159704).abs() < 1e-6, "{d}");
        let v = verify_robustness(&m, &tm, &avoid_two(), d + 1e-4, Method::Direct, &opts).unwrap();
        assert!(v.robust && v.witness.is_none());
        let v = verify_robustness(&m, &tm, &avoid_two(), d - 1e-4, Method::Direct, &opts).unwrap();
        assert!(!v.robust);
        let w = v.witness.unwrap();
        let p = crate::property::sat_prob(&w, &avoid_two()).unwrap();
        assert!(p < v.attack.pr_original - (d - 1e-4));
        assert!(matches!(
            verify_robustness(&m, &tm, &avoid_two(), 1.5, Method::Direct, &opts),
            Err(AttackError::BadDelta(_))
        ));
    }

    #[test]
    fn same_seed_same_result() {
        let m = four_state();
        let tm = ThreatModel::transitions(
            ThreatKind::St,
            0.1,
            [(0, 1), (0, 2), (1, 0), (1, 3), (2, 0), (2, 3)],
        )
        .unwrap();
        let opts = OptimizerOptions::default();
        let a = synthesize_attack(&m, &tm, &avoid_two(), Method::Direct, &opts).unwrap();
        let b = synthesize_attack(&m, &tm, &avoid_two(), Method::Direct, &opts).unwrap();
        assert_eq!(a.without_timing(), b.without_timing());
    }

    #[test]
    fn method_names_round_trip() {
        for m in [Method::Direct, Method::Symbolic, Method::BruteForce] {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("newton".parse::<Method>().is_err());
    }
}
