//! Budget sweeps, per-state sweeps, backend benchmarks and their CSV
//! renderings.
//!
//! Independent cells of a sweep run in parallel; rows always come back in
//! input order so the output bytes do not depend on scheduling. Benchmarks
//! run one case at a time so their timings are not distorted.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::attack::{
    component_sweep, synthesize_attack, AttackError, ComponentDelta, Method, OptimizerOptions,
    Phase,
};
use crate::case_studies::{pick_transitions, random_gridworld, CaseStudyError, GridSpec};
use crate::model::Dtmc;
use crate::parametric::ParametricError;
use crate::property::{parse_property, PathFormula, PropertyError};
use crate::threat::{ThreatKind, ThreatModel, Vulnerable};

/// Default per-phase limit for benchmark runs.
pub const DEFAULT_BENCH_TIMEOUT: Duration = Duration::from_secs(900);

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("bad epsilon list '{0}'")]
    BadEpsilons(String),

    #[error(transparent)]
    Attack(#[from] AttackError),

    #[error(transparent)]
    Property(#[from] PropertyError),

    #[error(transparent)]
    CaseStudy(#[from] CaseStudyError),

    #[error("csv: {0}")]
    Csv(String),
}

impl From<csv::Error> for ExperimentError {
    fn from(e: csv::Error) -> Self {
        ExperimentError::Csv(e.to_string())
    }
}

/// Rounds away representation noise from arithmetic ranges.
fn tidy(v: f64) -> f64 {
    (v * 1e12).round() / 1e12
}

/// Parses `a,b,c` or `start:stop:step` into an ascending list in `[0, 1]`.
pub fn parse_epsilons(text: &str) -> Result<Vec<f64>, ExperimentError> {
    let bad = || ExperimentError::BadEpsilons(text.to_string());
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let eps: Vec<f64> = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [start, stop, step] = parts[..] else {
            return Err(bad());
        };
        let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
        if !(step > 0.0) || stop < start {
            return Err(bad());
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize;
        (0..=count).map(|i| tidy(start + i as f64 * step)).collect()
    } else {
        text.split(',').map(num).collect::<Result<_, _>>()?
    };
    let ok = !eps.is_empty()
        && eps.iter().all(|e| (0.0..=1.0).contains(e))
        && eps.windows(2).all(|w| w[0] < w[1]);
    if ok {
        Ok(eps)
    } else {
        Err(bad())
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub epsilons: Vec<f64>,
    pub kind: ThreatKind,
    pub vulnerable: Vulnerable,
    pub property: PathFormula,
    pub method: Method,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub pr_original: f64,
    pub pr_perturbed: f64,
    pub delta_star: f64,
    pub method: Method,
    pub wall_seconds: f64,
}

/// One attack per budget level.
pub fn run_sweep(
    model: &Dtmc,
    spec: &SweepSpec,
    opts: &OptimizerOptions,
) -> Result<Vec<SweepRow>, ExperimentError> {
    spec.epsilons
        .par_iter()
        .map(|&eps| {
            let tm = ThreatModel::new(spec.kind, eps, spec.vulnerable.clone())
                .map_err(AttackError::from)?;
            let r = synthesize_attack(model, &tm, &spec.property, spec.method, opts)?;
            Ok(SweepRow {
                epsilon: eps,
                pr_original: r.pr_original,
                pr_perturbed: r.pr_perturbed,
                delta_star: r.delta_star,
                method: spec.method,
                wall_seconds: r.wall_seconds,
            })
        })
        .collect()
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<String, ExperimentError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| ExperimentError::Csv(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<String, ExperimentError> {
    to_csv(rows)
}

#[derive(Serialize)]
struct ComponentRow<'a> {
    state: usize,
    delta_star: Option<f64>,
    error: Option<&'a str>,
}

/// Runs `component_sweep` and renders it, one row per state.
pub fn component_csv(deltas: &[ComponentDelta]) -> Result<String, ExperimentError> {
    let messages: Vec<Option<String>> = deltas
        .iter()
        .map(|d| d.delta_star.as_ref().err().map(|e| e.to_string()))
        .collect();
    let rows: Vec<ComponentRow> = deltas
        .iter()
        .zip(&messages)
        .map(|(d, m)| ComponentRow {
            state: d.state,
            delta_star: d.delta_star.as_ref().ok().copied(),
            error: m.as_deref(),
        })
        .collect();
    to_csv(&rows)
}

pub fn run_component_sweep(
    model: &Dtmc,
    kind: ThreatKind,
    epsilon: f64,
    phi: &PathFormula,
    method: Method,
    opts: &OptimizerOptions,
) -> Result<String, ExperimentError> {
    component_csv(&component_sweep(model, kind, epsilon, phi, method, opts)?)
}

/// Dense matrix as CSV without a header.
pub fn matrix_csv(m: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for row in m {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// One benchmark instance.
#[derive(Debug, Clone)]
pub struct BenchCase {
    pub model: Dtmc,
    pub property: PathFormula,
    pub threat: ThreatModel,
}

/// A seeded square GridWorld under the bundled policy, asked to reach the
/// goal corner while avoiding the hazard, with `params` vulnerable
/// transitions under the selected-transitions model.
pub fn grid_bench_case(
    size: usize,
    params: usize,
    epsilon: f64,
    seed: u64,
) -> Result<BenchCase, ExperimentError> {
    let spec = GridSpec::standard(size, size, seed);
    let (mdp, policy) = random_gridworld(&spec)?;
    let model = mdp.compose(&policy).map_err(CaseStudyError::from)?;
    let hazard = spec.hazards.iter().next().copied().unwrap_or(0);
    let goal = spec.goals.iter().next().copied().unwrap_or(0);
    let property = parse_property(&format!("P=? [ s!={hazard} U s={goal} ]"))?;
    let cells = if params == 0 {
        Vec::new()
    } else {
        pick_transitions(&model, params)?
    };
    let threat =
        ThreatModel::transitions(ThreatKind::St, epsilon, cells).map_err(AttackError::from)?;
    Ok(BenchCase {
        model,
        property,
        threat,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub property: String,
    pub n_states: usize,
    pub n_params: usize,
    pub method: Method,
    pub synth_seconds: Option<f64>,
    pub opt_seconds: Option<f64>,
    pub total_seconds: f64,
    pub delta_star: Option<f64>,
    /// Phase that ran out of time, if any.
    pub timeout: Option<Phase>,
    pub error: Option<String>,
}

/// Runs every case under every method, one at a time, with `timeout`
/// applied separately to synthesis and optimization.
pub fn run_bench(
    cases: &[BenchCase],
    methods: &[Method],
    timeout: Duration,
    opts: &OptimizerOptions,
) -> Vec<BenchRow> {
    let opts = OptimizerOptions {
        synthesis_timeout: Some(timeout),
        optimization_timeout: Some(timeout),
        ..*opts
    };
    let mut rows = Vec::new();
    for case in cases {
        for &method in methods {
            let started = Instant::now();
            let r = synthesize_attack(&case.model, &case.threat, &case.property, method, &opts);
            let total = started.elapsed().as_secs_f64();
            let mut row = BenchRow {
                property: case.property.to_string(),
                n_states: case.model.n(),
                n_params: crate::threat::Polytope::new(&case.model, &case.threat)
                    .map_or(0, |p| p.dim()),
                method,
                synth_seconds: None,
                opt_seconds: None,
                total_seconds: total,
                delta_star: None,
                timeout: None,
                error: None,
            };
            match r {
                Ok(r) => {
                    row.synth_seconds = (method == Method::Symbolic).then_some(r.synth_seconds);
                    row.opt_seconds = Some(r.opt_seconds);
                    row.delta_star = Some(r.delta_star);
                }
                Err(AttackError::Timeout(phase)) => row.timeout = Some(phase),
                Err(AttackError::Parametric(e @ ParametricError::DegreeOverflow { .. })) => {
                    row.error = Some(e.to_string())
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            rows.push(row);
        }
    }
    rows
}

pub fn bench_csv(rows: &[BenchRow]) -> Result<String, ExperimentError> {
    to_csv(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case_studies::simple_protocol;

    #[test]
    fn epsilon_lists() {
        assert_eq!(parse_epsilons("0,.05,0.1").unwrap(), vec![0.0, 0.05, 0.1]);
        assert_eq!(
            parse_epsilons("0:0.3:0.1").unwrap(),
            vec![0.0, 0.1, 0.2, 0.3]
        );
        for bad in ["", "0.2,0.1", "0:1", "1.5", "0:0.3:0", "x"] {
            assert!(parse_epsilons(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn simple_protocol_sweep_csv() {
        let spec = SweepSpec {
            epsilons: vec![0.0, 0.1],
            kind: ThreatKind::Spss,
            vulnerable: Vulnerable::States([1].into()),
            property: parse_property("P=? [ F<=10 delivered ]").unwrap(),
            method: Method::Direct,
        };
        let rows = run_sweep(&simple_protocol(), &spec, &OptimizerOptions::default()).unwrap();
        assert_eq!(rows[0].delta_star, 0.0);
        assert!((rows[1].pr_perturbed - (1.0 - 0.3f64.powi(5))).abs() < 1e-6);
        let csv = sweep_csv(&rows).unwrap();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next(),
            Some("epsilon,pr_original,pr_perturbed,delta_star,method,wall_seconds")
        );
        let first = lines.next().unwrap();
        let cells: Vec<&str> = first.split(',').collect();
        assert_eq!(cells[0].parse::<f64>().unwrap(), 0.0);
        assert!((cells[1].parse::<f64>().unwrap() - 0.99968).abs() < 1e-12);
        assert_eq!(cells[3].parse::<f64>().unwrap(), 0.0);
        assert_eq!(cells[4], "direct");
        assert!(!csv.contains('\r'));
    }

    #[test]
    fn matrix_rows() {
        assert_eq!(
            matrix_csv(&[vec![0.5, 0.5], vec![0.0, 1.0]]),
            "0.5,0.5\n0,1\n"
        );
    }
}
