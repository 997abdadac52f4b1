//! Command-line laboratory for monotone probabilistic cellular automata:
//! density simulation, exact edge speeds, stability certificates, random
//! contour sampling, Peierls-sum enumeration, and the divergence family.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use toomlab::automaton::NoisyAutomaton;
use toomlab::certify::{self, Preset};
use toomlab::contour::chain::ChainParams;
use toomlab::contour::{sample_contour, CemeteryReason, ChainOutcome, DecorationMode, Num};
use toomlab::diverge;
use toomlab::geometry::{check_worst_case_condition, edge_speed, find_drift};
use toomlab::model_io;
use toomlab::rat::{from_f64, parse_rat, to_f64, Rat};
use toomlab::sim;

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "toomlab", version, about)]
struct Cli {
    /// worker threads (0 = all cores); results do not depend on this
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// builtin name (toom-nec, triangular-majority, coop-id, cc-id) or a
    /// JSON model file
    #[arg(long)]
    model: String,
    /// intrinsic rate for the parametrized builtins
    #[arg(long)]
    r: Option<String>,
}

impl ModelArgs {
    fn rate(&self) -> Result<Option<Rat>, String> {
        self.r
            .as_deref()
            .map(|s| parse_rat(s).ok_or_else(|| format!("cannot parse rate `{s}`")))
            .transpose()
    }
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo density of the maximal trajectory on a torus
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        /// noise level
        #[arg(long)]
        p: f64,
        /// torus side
        #[arg(short = 'L', long = "L", default_value_t = 64)]
        side: usize,
        /// number of steps
        #[arg(short = 'T', long = "T", default_value_t = 100)]
        steps: usize,
        #[arg(long, default_value_t = 8)]
        replicas: usize,
        #[arg(long)]
        seed: u64,
        /// output CSV path (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact edge-speed table of a model against a polar function
    Speeds {
        #[command(flatten)]
        model: ModelArgs,
        /// polar file (JSON), or a builtin polar: nec, triangular, coop
        #[arg(long)]
        polar: String,
        /// also search for a drift making all compensated speeds positive
        #[arg(long, default_value_t = false)]
        drift: bool,
    },
    /// Evaluate or optimize a stability certificate
    Certify {
        /// preset: paper-4.2, paper-4.3-first, paper-4.3-improved, paper-4.4
        #[arg(long)]
        preset: String,
        /// rate for presets that need one (paper-4.4)
        #[arg(long)]
        r: Option<String>,
        /// tilt parameter; preset default when omitted
        #[arg(long)]
        theta: Option<f64>,
        /// sink parameter; preset default when omitted
        #[arg(long)]
        phat: Option<f64>,
        /// grid "a:b:n" over theta (log-spaced); triggers optimization
        #[arg(long)]
        theta_grid: Option<String>,
        /// grid "a:b:n" over p_hat (log-spaced)
        #[arg(long)]
        phat_grid: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample random decorated contours with the extending chain
    Sample {
        /// preset whose chain spec is sampled
        #[arg(long)]
        preset: String,
        #[arg(long)]
        r: Option<String>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        phat: f64,
        #[arg(long)]
        pcirc: f64,
        #[arg(long, default_value_t = 100_000)]
        runs: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        max_steps: usize,
        /// restrict sigma = 2 samples to decorated cycles
        #[arg(long, default_value_t = false)]
        cycle_order: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exhaustive partial Peierls sums by contour size
    Enumerate {
        /// preset whose chosen sets are enumerated
        #[arg(long)]
        preset: String,
        #[arg(long)]
        r: Option<String>,
        /// edge-count cap
        #[arg(long, default_value_t = 8)]
        cap: usize,
        /// noise level (exact: fractions allowed)
        #[arg(long)]
        p: String,
        /// restrict to decorated cycles (sigma = 2)
        #[arg(long, default_value_t = false)]
        cycles_only: bool,
        #[arg(long, default_value_t = 20_000_000)]
        budget: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Growth of the divergent special-contour family
    Diverge {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        r: f64,
        #[arg(long, default_value_t = 500)]
        nmax: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Config(msg)) => {
            eprintln!("{}", json!({"error": "config", "message": msg}));
            ExitCode::from(2)
        }
        Err(AppError::Run(msg)) => {
            eprintln!("{}", json!({"error": "run", "message": msg}));
            ExitCode::from(1)
        }
    }
}

enum AppError {
    Config(String),
    Run(String),
}

fn config<E: std::fmt::Display>(e: E) -> AppError {
    AppError::Config(e.to_string())
}

fn runtime<E: std::fmt::Display>(e: E) -> AppError {
    AppError::Run(e.to_string())
}

fn emit(out: Option<PathBuf>, text: &str) -> Result<(), AppError> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(runtime),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn parse_grid(text: &str) -> Result<Vec<f64>, AppError> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(AppError::Config(format!("grid `{text}` is not a:b:n")));
    }
    let a: f64 = parts[0].parse().map_err(config)?;
    let b: f64 = parts[1].parse().map_err(config)?;
    let n: usize = parts[2].parse().map_err(config)?;
    if !(a > 0.0 && b > a && n >= 2) {
        return Err(AppError::Config(format!("grid `{text}` must have 0 < a < b, n >= 2")));
    }
    Ok(certify::log_grid(a, b, n))
}

fn preset_of(name: &str, r: &Option<String>) -> Result<Preset, AppError> {
    let rate = r
        .as_deref()
        .map(|s| parse_rat(s).ok_or_else(|| AppError::Config(format!("bad rate `{s}`"))))
        .transpose()?;
    Preset::parse(name, rate).map_err(config)
}

fn run(command: Command) -> Result<(), AppError> {
    match command {
        Command::Simulate { model, p, side, steps, replicas, seed, out } => {
            let family = model_io::resolve_model(&model.model, model.rate().map_err(AppError::Config)?)
                .map_err(config)?;
            let auto = NoisyAutomaton::new(family, p).map_err(config)?;
            let report =
                sim::run_max_trajectory(&auto, side, steps, replicas, seed).map_err(runtime)?;
            let meta = json!({
                "tool": "toomlab", "version": VERSION, "command": "simulate",
                "model": model.model, "r": model.r, "p": p, "L": side, "T": steps,
                "replicas": replicas, "seed": seed,
            });
            let mut text = format!("# {meta}\nt,mean_density,stderr\n");
            for (t, (d, e)) in report.density.iter().zip(&report.stderr).enumerate() {
                writeln!(text, "{t},{d:.17},{e:.17}").unwrap();
            }
            emit(out, &text)
        }
        Command::Speeds { model, polar, drift } => {
            let family = model_io::resolve_model(&model.model, model.rate().map_err(AppError::Config)?)
                .map_err(config)?;
            let lifted = match polar.as_str() {
                "nec" => certify::nec_polar(),
                "triangular" => certify::triangular_polar(),
                "coop" => certify::coop_polar(),
                path => {
                    let text = std::fs::read_to_string(path).map_err(config)?;
                    model_io::polar_from_json(&text).map_err(config)?
                }
            };
            let spatial = &lifted.base;
            let mut text = String::new();
            writeln!(text, "# edge speeds as exact fractions; rows = forms, columns = maps")
                .unwrap();
            for (s, form) in spatial.forms().iter().enumerate() {
                let row: Vec<String> =
                    family.maps().iter().map(|m| edge_speed(m, form).to_string()).collect();
                writeln!(text, "form_{}: {}", s + 1, row.join("  ")).unwrap();
            }
            let wc = check_worst_case_condition(&family, spatial);
            writeln!(text, "worst_case_sum: {} (holds: {})", wc.sum, wc.holds).unwrap();
            if drift {
                match find_drift(&family, spatial) {
                    Ok(red) => {
                        let v: Vec<String> = red.drift.iter().map(|x| x.to_string()).collect();
                        writeln!(text, "drift: ({})", v.join(", ")).unwrap();
                        writeln!(
                            text,
                            "retained_forms: {:?} scaled by {:?}",
                            red.selected.iter().map(|i| i + 1).collect::<Vec<_>>(),
                            red.multipliers.iter().map(|m| m.to_string()).collect::<Vec<_>>()
                        )
                        .unwrap();
                        for (s, row) in red.compensated.iter().enumerate() {
                            let speeds: Vec<String> = row.iter().map(|x| x.to_string()).collect();
                            writeln!(text, "compensated_{}: {}", s + 1, speeds.join("  "))
                                .unwrap();
                        }
                    }
                    Err(e) => writeln!(text, "drift: infeasible ({e})").unwrap(),
                }
            }
            print!("{text}");
            Ok(())
        }
        Command::Certify { preset, r, theta, phat, theta_grid, phat_grid, out } => {
            let preset = preset_of(&preset, &r)?;
            let result = match (&theta_grid, &phat_grid) {
                (Some(tg), Some(pg)) => {
                    let tg = parse_grid(tg)?;
                    let pg = parse_grid(pg)?;
                    let best = certify::optimize(&preset, &tg, &pg).map_err(runtime)?;
                    serde_json::to_value(&best).unwrap()
                }
                (None, None) => {
                    let t = theta.unwrap_or(preset.default_theta());
                    let p = phat.unwrap_or(preset.default_p_hat());
                    let theta_num =
                        from_f64(t).map(Num::from_rat).unwrap_or_else(|| Num::from_f64(t));
                    let spec = certify::build_preset(&preset, theta_num, p).map_err(runtime)?;
                    let rep = certify::certificate(&spec).map_err(runtime)?;
                    serde_json::to_value(&rep).unwrap()
                }
                _ => {
                    return Err(AppError::Config(
                        "provide both --theta-grid and --phat-grid, or neither".into(),
                    ))
                }
            };
            let wrapped = json!({
                "tool": "toomlab", "version": VERSION, "command": "certify",
                "theta": theta, "phat": phat,
                "theta_grid": theta_grid, "phat_grid": phat_grid,
                "result": result,
            });
            emit(out, &format!("{}\n", serde_json::to_string_pretty(&wrapped).unwrap()))
        }
        Command::Sample { preset, r, theta, phat, pcirc, runs, seed, max_steps, cycle_order, out } => {
            let preset = preset_of(&preset, &r)?;
            let t = theta.unwrap_or(preset.default_theta());
            let spec =
                certify::build_preset(&preset, Num::from_f64(t), phat).map_err(runtime)?;
            if cycle_order && spec.chain.mode != DecorationMode::Cycle {
                return Err(AppError::Config("cycle order needs a sigma = 2 preset".into()));
            }
            let params = ChainParams::from_f64(phat, pcirc);
            let mut size_histogram: HashMap<usize, u64> = HashMap::new();
            let mut cemetery: HashMap<&'static str, u64> = HashMap::new();
            let mut completed = 0u64;
            for run in 0..runs {
                match sample_contour(&spec.chain, &params, seed, run, max_steps, cycle_order) {
                    ChainOutcome::Completed { steps, .. } => {
                        completed += 1;
                        *size_histogram.entry(steps).or_default() += 1;
                    }
                    ChainOutcome::Cemetery { reason, .. } => {
                        let key = match reason {
                            CemeteryReason::FailedDraw => "failed_draw",
                            CemeteryReason::EmbeddingClash => "embedding_clash",
                            CemeteryReason::StepCap => "step_cap",
                        };
                        *cemetery.entry(key).or_default() += 1;
                    }
                }
            }
            let mut sizes: Vec<(usize, u64)> = size_histogram.into_iter().collect();
            sizes.sort();
            // distribution test: the bare-defect contour has exact law phat
            let trivial = sizes.first().filter(|(s, _)| *s == 0).map(|(_, c)| *c).unwrap_or(0);
            let expect = runs as f64 * phat;
            let sd = (runs as f64 * phat * (1.0 - phat)).sqrt();
            let z = if sd > 0.0 { (trivial as f64 - expect) / sd } else { 0.0 };
            let wrapped = json!({
                "tool": "toomlab", "version": VERSION, "command": "sample",
                "phat": phat, "pcirc": pcirc, "runs": runs, "seed": seed,
                "max_steps": max_steps, "cycle_order": cycle_order,
                "completed": completed,
                "completed_fraction": completed as f64 / runs as f64,
                "size_histogram": sizes.iter().map(|(s, c)| json!({"edges": s, "count": c})).collect::<Vec<_>>(),
                "cemetery": cemetery,
                "distribution_test": {
                    "statistic": "trivial-contour frequency vs its exact law",
                    "observed": trivial,
                    "expected": expect,
                    "z_score": z,
                },
            });
            emit(out, &format!("{}\n", serde_json::to_string_pretty(&wrapped).unwrap()))
        }
        Command::Enumerate { preset, r, cap, p, cycles_only, budget, out } => {
            let preset = preset_of(&preset, &r)?;
            let spec = certify::build_preset(&preset, Num::from_f64(preset.default_theta()), 0.1)
                .map_err(runtime)?;
            let p = parse_rat(&p).ok_or_else(|| AppError::Config("bad p".into()))?;
            let sums = toomlab::contour::partial_peierls_sum(
                &spec.chain.sets,
                spec.chain.mode,
                cycles_only,
                spec.family.intrinsic(),
                &p,
                cap,
                budget,
            )
            .map_err(runtime)?;
            let meta = json!({
                "tool": "toomlab", "version": VERSION, "command": "enumerate",
                "cap": cap, "p": p.to_string(), "cycles_only": cycles_only,
                "contours": sums.contour_count,
            });
            let mut text = format!("# {meta}\nedges,cumulative_sum,cumulative_sum_exact\n");
            for (e, v) in sums.cumulative.iter().enumerate() {
                writeln!(text, "{e},{:.17},{}", to_f64(v), v).unwrap();
            }
            emit(out, &text)
        }
        Command::Diverge { p, r, nmax, out } => {
            let report = diverge::growth_and_verdict(p, r, nmax).map_err(runtime)?;
            let meta = json!({
                "tool": "toomlab", "version": VERSION, "command": "diverge",
                "p": p, "r": r, "nmax": nmax,
                "analytic_rate_lower_bound": report.analytic_rate_lower_bound,
                "transfer_rate": report.transfer_rate,
                "verdict": format!("{:?}", report.verdict),
                "monotone_witness_from": report.monotone_witness_from,
            });
            let mut text = format!("# {meta}\nn,nth_root,analytic_rate,transfer_rate,verdict\n");
            for (i, root) in report.nth_roots.iter().enumerate() {
                writeln!(
                    text,
                    "{},{root:.17},{:.17},{:.17},{:?}",
                    i + 1,
                    report.analytic_rate_lower_bound,
                    report.transfer_rate,
                    report.verdict
                )
                .unwrap();
            }
            emit(out, &text)
        }
    }
}
