//! `advmc`: satisfaction probabilities, attacks and robustness checks on
//! Markov chains from the command line.
//!
//! Exit codes: 0 success, 1 domain error, 2 usage error; `verify` exits 3
//! when the model is not robust.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use advmc::attack::{
    max_delta, synthesize_attack, verify_robustness, Method, OptimizerOptions, VERIFY_SLACK,
};
use advmc::case_studies::{random_gridworld, simple_protocol, small_gridworld, zeroconf, GridSpec};
use advmc::experiments::{
    bench_csv, grid_bench_case, matrix_csv, parse_epsilons, run_bench, run_component_sweep,
    run_sweep, sweep_csv, SweepSpec, DEFAULT_BENCH_TIMEOUT,
};
use advmc::model::{load_model, render_model, Dtmc, Model, Policy};
use advmc::property::{parse_property, sat_prob_all_states, PathFormula};
use advmc::threat::{build_idtmc, load_threat, ThreatKind, ThreatModel};
use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "advmc",
    version,
    about = "Adversarial robustness of Markov chains"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ModelArgs {
    /// Model file (JSON, DTMC or MDP).
    model: PathBuf,
    /// Policy file resolving an MDP into a chain.
    #[arg(long)]
    policy: Option<PathBuf>,
}

#[derive(Args)]
struct PropArg {
    /// Property, e.g. "P=? [ s!=2 U<=10 s=3 ]".
    #[arg(long = "prop")]
    prop: String,
}

#[derive(Args)]
struct SolveArgs {
    /// direct, symbolic or brute-force.
    #[arg(long, default_value = "direct")]
    method: Method,
    #[arg(long, env = "ADVMC_SEED", default_value_t = 42)]
    seed: u64,
    /// Limit in seconds, applied separately to synthesis and optimization.
    #[arg(long)]
    timeout: Option<f64>,
    /// Number of optimizer starts (the first is the unperturbed chain).
    #[arg(long, default_value_t = 5)]
    starts: usize,
}

#[derive(Args)]
struct OutArg {
    /// Output file; standard output if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Check that a model file is well formed.
    Validate {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Satisfaction probability from the initial state.
    Satprob {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        prop: PropArg,
        /// Print the probability of every state instead.
        #[arg(long)]
        all_states: bool,
    },
    /// Worst-case perturbation under a threat model.
    Attack {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        prop: PropArg,
        /// Threat file, e.g. {"kind":"SPSS","epsilon":0.1,"vulnerable_states":[1]}
        #[arg(long)]
        threat: PathBuf,
        #[command(flatten)]
        solve: SolveArgs,
        #[command(flatten)]
        out: OutArg,
        /// Directory for dense CSVs of P, X* and P+X*.
        #[arg(long)]
        emit_heatmap: Option<PathBuf>,
    },
    /// Decide robustness for a tolerated drop; exits 3 when not robust.
    Verify {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        prop: PropArg,
        /// Threat file, e.g. {"kind":"SPSS","epsilon":0.1,"vulnerable_states":[1]}
        #[arg(long)]
        threat: PathBuf,
        /// Tolerated drop in satisfaction probability
        #[arg(long)]
        delta: f64,
        #[command(flatten)]
        solve: SolveArgs,
        #[command(flatten)]
        out: OutArg,
        /// Where to write the perturbed chain when not robust.
        #[arg(long)]
        witness: Option<PathBuf>,
    },
    /// Largest probability drop the threat model allows.
    MaxDelta {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        prop: PropArg,
        /// Threat file, e.g. {"kind":"SPSS","epsilon":0.1,"vulnerable_states":[1]}
        #[arg(long)]
        threat: PathBuf,
        #[command(flatten)]
        solve: SolveArgs,
    },
    /// One attack per budget; the threat file supplies kind and vulnerable set.
    Sweep {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        prop: PropArg,
        /// Threat file, e.g. {"kind":"SPSS","epsilon":0.1,"vulnerable_states":[1]}
        #[arg(long)]
        threat: PathBuf,
        /// "0,0.05,0.1" or "start:stop:step".
        #[arg(long)]
        epsilons: String,
        #[command(flatten)]
        solve: SolveArgs,
        #[command(flatten)]
        out: OutArg,
    },
    /// Maximum drop with each state alone vulnerable.
    ComponentSweep {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        prop: PropArg,
        /// SS or SPSS.
        #[arg(long)]
        kind: ThreatKind,
        #[arg(long)]
        epsilon: f64,
        #[command(flatten)]
        solve: SolveArgs,
        #[command(flatten)]
        out: OutArg,
    },
    /// Backend comparison on seeded square GridWorlds.
    Bench {
        /// Grid side lengths.
        #[arg(long, default_value = "5,10", value_delimiter = ',')]
        sizes: Vec<usize>,
        /// Vulnerable transition counts.
        #[arg(long, default_value = "5,20", value_delimiter = ',')]
        params: Vec<usize>,
        #[arg(long, default_value = "direct,symbolic", value_delimiter = ',')]
        methods: Vec<Method>,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, env = "ADVMC_SEED", default_value_t = 42)]
        seed: u64,
        /// Per-phase limit in seconds.
        #[arg(long, default_value_t = DEFAULT_BENCH_TIMEOUT.as_secs_f64())]
        timeout: f64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Interval chain bounding every perturbed chain.
    Idtmc {
        #[command(flatten)]
        model: ModelArgs,
        /// Threat file, e.g. {"kind":"SPSS","epsilon":0.1,"vulnerable_states":[1]}
        #[arg(long)]
        threat: PathBuf,
        #[command(flatten)]
        out: OutArg,
    },
    /// Emit a bundled model.
    Casestudy {
        #[command(subcommand)]
        which: CaseStudy,
    },
}

#[derive(Subcommand)]
enum CaseStudy {
    /// Message resend protocol.
    Simple {
        #[command(flatten)]
        out: OutArg,
    },
    /// Zeroconf address configuration.
    Zeroconf {
        /// Probe count.
        #[arg(long, default_value_t = 10)]
        n: usize,
        /// Hosts already on the network.
        #[arg(long, default_value_t = 50_000)]
        m: u64,
        /// Address space size.
        #[arg(long, default_value_t = 65_024)]
        k: u64,
        /// Per-tick forward probability.
        #[arg(long)]
        p: f64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Randomized GridWorld MDP with its bundled policy.
    Gridworld {
        #[arg(long, default_value_t = 5)]
        rows: usize,
        #[arg(long, default_value_t = 5)]
        cols: usize,
        #[arg(long, env = "ADVMC_SEED", default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        slip: Option<f64>,
        #[command(flatten)]
        out: OutArg,
        /// Where to write the bundled policy.
        #[arg(long)]
        policy_out: Option<PathBuf>,
        /// Emit the chain under the bundled policy instead of the MDP.
        #[arg(long)]
        compose: bool,
    },
    /// The fixed 3×3 grid chain.
    #[command(name = "gridworld-fig4")]
    SmallGrid {
        #[command(flatten)]
        out: OutArg,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn emit(out: &OutArg, text: &str) -> Result<()> {
    match &out.out {
        Some(path) => write(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn load_chain(args: &ModelArgs) -> Result<Dtmc> {
    match load_model(&args.model)? {
        Model::Dtmc(d) => {
            if args.policy.is_some() {
                bail!("--policy given but {} is a DTMC", args.model.display());
            }
            Ok(d)
        }
        Model::Mdp(m) => {
            let path = args
                .policy
                .as_ref()
                .ok_or_else(|| anyhow!("{} is an MDP; pass --policy", args.model.display()))?;
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            let policy: Policy = serde_json::from_str(&text)
                .with_context(|| format!("bad policy file {}", path.display()))?;
            Ok(m.compose(&policy)?)
        }
    }
}

fn property(p: &PropArg) -> Result<PathFormula> {
    Ok(parse_property(&p.prop)?)
}

fn options(s: &SolveArgs) -> Result<OptimizerOptions> {
    if s.starts == 0 {
        bail!("--starts must be at least 1");
    }
    let timeout = match s.timeout {
        Some(t) if t.is_finite() && t > 0.0 => Some(Duration::from_secs_f64(t)),
        Some(t) => bail!("--timeout must be positive, got {t}"),
        None => None,
    };
    Ok(OptimizerOptions {
        seed: s.seed,
        starts: s.starts,
        synthesis_timeout: timeout,
        optimization_timeout: timeout,
        ..OptimizerOptions::default()
    })
}

fn json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Validate { model } => {
            let d = load_chain(&model)?;
            println!("ok: {} states", d.n());
        }
        Command::Satprob {
            model,
            prop,
            all_states,
        } => {
            let d = load_chain(&model)?;
            let x = sat_prob_all_states(&d, &property(&prop)?)?;
            if all_states {
                for (s, p) in x.iter().enumerate() {
                    println!("{s},{p:.12}");
                }
            } else {
                println!("{:.12}", x[d.init()]);
            }
        }
        Command::Attack {
            model,
            prop,
            threat,
            solve,
            out,
            emit_heatmap,
        } => {
            let d = load_chain(&model)?;
            let tm = load_threat(&threat)?;
            let r = synthesize_attack(&d, &tm, &property(&prop)?, solve.method, &options(&solve)?)?;
            if let Some(dir) = emit_heatmap {
                std::fs::create_dir_all(&dir)
                    .with_context(|| format!("cannot create {}", dir.display()))?;
                let perturbed = advmc::model::apply_perturbation(&d, &r.x_star)?;
                write(&dir.join("original.csv"), &matrix_csv(&d.to_dense()))?;
                write(
                    &dir.join("perturbation.csv"),
                    &matrix_csv(&r.x_star.to_dense(d.n())),
                )?;
                write(
                    &dir.join("perturbed.csv"),
                    &matrix_csv(&perturbed.to_dense()),
                )?;
            }
            emit(&out, &json(&r))?;
        }
        Command::Verify {
            model,
            prop,
            threat,
            delta,
            solve,
            out,
            witness,
        } => {
            let d = load_chain(&model)?;
            let tm = load_threat(&threat)?;
            let v = verify_robustness(
                &d,
                &tm,
                &property(&prop)?,
                delta,
                solve.method,
                &options(&solve)?,
            )?;
            if let (Some(path), Some(w)) = (&witness, &v.witness) {
                write(path, &render_model(&Model::Dtmc(w.clone())))?;
            }
            let report = serde_json::json!({
                "robust": v.robust,
                "delta": v.delta,
                "slack": VERIFY_SLACK,
                "attack": v.attack,
            });
            match &out.out {
                Some(path) => write(path, &json(&report))?,
                None => println!("{}", if v.robust { "robust" } else { "not robust" }),
            }
            return Ok(ExitCode::from(if v.robust { 0 } else { 3 }));
        }
        Command::MaxDelta {
            model,
            prop,
            threat,
            solve,
        } => {
            let d = load_chain(&model)?;
            let tm = load_threat(&threat)?;
            let delta = max_delta(&d, &tm, &property(&prop)?, solve.method, &options(&solve)?)?;
            println!("{delta:.12}");
        }
        Command::Sweep {
            model,
            prop,
            threat,
            epsilons,
            solve,
            out,
        } => {
            let d = load_chain(&model)?;
            let template = load_threat(&threat)?;
            let spec = SweepSpec {
                epsilons: parse_epsilons(&epsilons)?,
                kind: template.kind(),
                vulnerable: template.vulnerable().clone(),
                property: property(&prop)?,
                method: solve.method,
            };
            let rows = run_sweep(&d, &spec, &options(&solve)?)?;
            emit(&out, &sweep_csv(&rows)?)?;
        }
        Command::ComponentSweep {
            model,
            prop,
            kind,
            epsilon,
            solve,
            out,
        } => {
            let d = load_chain(&model)?;
            let csv = run_component_sweep(
                &d,
                kind,
                epsilon,
                &property(&prop)?,
                solve.method,
                &options(&solve)?,
            )?;
            emit(&out, &csv)?;
        }
        Command::Bench {
            sizes,
            params,
            methods,
            epsilon,
            seed,
            timeout,
            out,
        } => {
            if !(timeout.is_finite() && timeout > 0.0) {
                bail!("--timeout must be positive, got {timeout}");
            }
            let mut cases = Vec::new();
            for &size in &sizes {
                for &count in &params {
                    cases.push(grid_bench_case(size, count, epsilon, seed)?);
                }
            }
            let opts = OptimizerOptions {
                seed,
                ..OptimizerOptions::default()
            };
            let rows = run_bench(&cases, &methods, Duration::from_secs_f64(timeout), &opts);
            emit(&out, &bench_csv(&rows)?)?;
        }
        Command::Idtmc { model, threat, out } => {
            let d = load_chain(&model)?;
            let tm: ThreatModel = load_threat(&threat)?;
            let export = build_idtmc(&d, &tm)?;
            if let Some(note) = &export.notice {
                eprintln!("note: {note}");
            }
            emit(&out, &export.to_json())?;
        }
        Command::Casestudy { which } => case_study(which)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn case_study(which: CaseStudy) -> Result<()> {
    match which {
        CaseStudy::Simple { out } => emit(&out, &render_model(&simple_protocol().into())),
        CaseStudy::Zeroconf { n, m, k, p, out } => {
            emit(&out, &render_model(&zeroconf(n, m, k, p)?.into()))
        }
        CaseStudy::SmallGrid { out } => emit(&out, &render_model(&small_gridworld().into())),
        CaseStudy::Gridworld {
            rows,
            cols,
            seed,
            slip,
            out,
            policy_out,
            compose,
        } => {
            let mut spec = GridSpec::standard(rows, cols, seed);
            if let Some(s) = slip {
                spec.slip = s;
            }
            let (mdp, policy) = random_gridworld(&spec)?;
            if let Some(path) = policy_out {
                write(&path, &json(&policy))?;
            }
            let model: Model = if compose {
                mdp.compose(&policy)?.into()
            } else {
                mdp.into()
            };
            emit(&out, &render_model(&model))
        }
    }
}
