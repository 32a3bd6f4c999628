//! The `synth`, `complete`, `image` and `verify` subcommands.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::{json, Value};

use schatten_core::metrics::{bound_terms, psnr, rmse, rse, BoundTerms, Rating};
use schatten_core::palm::{solve, Optimality, DEFAULT_EPSILON, DEFAULT_MAX_ITERS};
use schatten_core::rng::{derive_seed, keys};
use schatten_core::verify::{run_property_suite, VerifyConfig};
use schatten_core::{InitPolicy, Regularizer, SolveError, SolveReport, SolverConfig, StopRule};

use crate::data::{
    center_rows, default_rank_bound, gen_synthetic, parse_movielens, split_train_test, user_means, RatingFormat,
};
use crate::error::{McError, Result};
use crate::image::{clamp_pixel, corrupt_image, read_pgm, write_pgm, GrayImage};
use crate::report::{csv_bytes, ensure_dir, mean_std, num, write_atomic, write_json, Manifest};

#[derive(Debug, Parser)]
#[command(name = "schatten-mc", version, about = "Schatten quasi-norm matrix completion benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Repeated completion of random low-rank matrices, reporting RSE.
    Synth(SynthArgs),
    /// Rating-matrix completion with a held-out test split, reporting RMSE.
    Complete(CompleteArgs),
    /// Recovery of a grayscale image with missing pixels, reporting PSNR.
    Image(ImageArgs),
    /// Randomized checks of the quasi-norm identities.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Regularizer: fn (Schatten-2/3) or bin (Schatten-1/2).
    #[arg(long, default_value = "fn")]
    pub reg: Regularizer,
    /// Stop when max(‖ΔU‖_F, ‖ΔV‖_F) falls below this.
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    pub max_iters: usize,
    /// Start point: spectral or gaussian.
    #[arg(long, default_value = "spectral")]
    pub init: InitPolicy,
    /// Step-size test: absolute or relative.
    #[arg(long, default_value = "absolute")]
    pub stop_rule: StopRule,
}

impl SolverArgs {
    fn config(&self, lambda: f64, d: usize, seed: u64) -> Result<SolverConfig> {
        let cfg = SolverConfig::new(self.reg, lambda, d)
            .with_epsilon(self.epsilon)
            .with_max_iters(self.max_iters)
            .with_init(self.init)
            .with_stop_rule(self.stop_rule)
            .with_seed(seed);
        cfg.validate().map_err(|e| McError::Input(e.to_string()))?;
        Ok(cfg)
    }

    fn echo(&self, lambda: f64, d: usize) -> Value {
        json!({
            "reg": self.reg.as_str(),
            "lambda": lambda,
            "d": d,
            "epsilon": self.epsilon,
            "max_iters": self.max_iters,
            "init": self.init.as_str(),
            "stop_rule": self.stop_rule.as_str(),
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 100)]
    pub m: usize,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Rank of the ground truth.
    #[arg(long, default_value_t = 5)]
    pub rank: usize,
    /// Noise factor scaling the additive standard Gaussian noise.
    #[arg(long, default_value_t = 0.1)]
    pub nf: f64,
    /// Sampling ratio |Ω|/(mn).
    #[arg(long, default_value_t = 0.2)]
    pub sr: f64,
    #[arg(long, default_value_t = 5.0)]
    pub lambda: f64,
    /// Rank bound; defaults to ⌊1.25·rank⌋.
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads for independent runs (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory for runs.csv and summary.json.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CompleteArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// dat (user::item::rating), tab or csv; inferred from the extension when omitted.
    #[arg(long)]
    pub format: Option<RatingFormat>,
    #[arg(long, default_value_t = 0.5)]
    pub train_frac: f64,
    #[arg(long, default_value_t = 100.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 10)]
    pub d: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Subtract per-user training means before completion.
    #[arg(long)]
    pub center_users: bool,
    /// Also write predictions.csv for every test rating.
    #[arg(long)]
    pub write_predictions: bool,
    /// Output directory for report.json and trace.csv.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ImageArgs {
    /// Binary PGM (P5, maxval 255).
    #[arg(long)]
    pub input: PathBuf,
    /// Fraction of pixels replaced by noise and treated as missing.
    #[arg(long, default_value_t = 0.5)]
    pub corrupt_frac: f64,
    /// Standard deviation of the replacement noise in corrupted.pgm.
    #[arg(long, default_value_t = 50.0)]
    pub noise_sigma: f64,
    #[arg(long, default_value_t = 100.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 100)]
    pub d: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output directory for recovered.pgm, corrupted.pgm and report.json.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Random feasible factorizations per matrix for the lower-bound checks.
    #[arg(long, default_value_t = 100)]
    pub factorizations: usize,
    /// Write the JSON report here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Replaces every tolerance (exercises the failure path).
    #[arg(long, hide = true, allow_negative_numbers = true)]
    pub inject_tolerance: Option<f64>,
}

/// Runs a parsed command line; `argv` excludes the program name and is
/// echoed into the report manifest.
pub fn run(cli: Cli, argv: &[String]) -> Result<()> {
    match cli.command {
        Command::Synth(a) => cmd_synth(&a, argv),
        Command::Complete(a) => cmd_complete(&a, argv),
        Command::Image(a) => cmd_image(&a, argv),
        Command::Verify(a) => cmd_verify(&a, argv),
    }
}

fn input_err(msg: impl Into<String>) -> McError {
    McError::Input(msg.into())
}

fn optimality_json(o: &Optimality) -> Value {
    json!({
        "q_spectral": num(o.q_spectral),
        "duality_gap": num(o.duality_gap),
        "duality_gap_rel": num(o.duality_gap_rel),
        "c2": num(o.c2),
        "c2_lower": num(o.c2_lower),
        "c2_degenerate": o.c2_degenerate,
    })
}

fn bound_terms_json(t: &BoundTerms) -> Value {
    json!({
        "beta": num(t.beta),
        "c2": num(t.c2),
        "c2_lower": num(t.c2_lower),
        "sample_term": num(t.sample_term),
        "lambda_term": num(t.lambda_term),
        "c2_degenerate": t.c2_degenerate,
    })
}

fn solver_json(rep: &SolveReport) -> Value {
    json!({
        "iterations": rep.iterations,
        "converged": rep.converged,
        "final_objective": num(*rep.objective_trace.last().expect("trace holds the start value")),
    })
}

fn trace_rows(objective: &[f64], lipschitz: &[(f64, f64)], change: &[f64]) -> Vec<Vec<String>> {
    objective
        .iter()
        .enumerate()
        .map(|(k, f)| {
            let mut row = vec![k.to_string(), f.to_string()];
            match k.checked_sub(1) {
                Some(j) if j < lipschitz.len() => {
                    row.push(lipschitz[j].0.to_string());
                    row.push(lipschitz[j].1.to_string());
                    row.push(change.get(j).map_or(String::new(), |c| c.to_string()));
                }
                _ => row.extend([String::new(), String::new(), String::new()]),
            }
            row
        })
        .collect()
}

const TRACE_HEADER: [&str; 5] = ["iteration", "objective", "l_g", "l_h", "change"];

fn write_trace(path: &Path, objective: &[f64], lipschitz: &[(f64, f64)], change: &[f64]) -> Result<()> {
    write_atomic(path, &csv_bytes(&TRACE_HEADER, &trace_rows(objective, lipschitz, change)))
}

fn finish_manifest(manifest: &mut Manifest, started: Instant, outputs: &[&Path]) {
    manifest.outputs = outputs.iter().map(|p| p.display().to_string()).collect();
    manifest.wall_ms = started.elapsed().as_secs_f64() * 1e3;
}

fn numerical_failure(err: &SolveError) -> McError {
    McError::Numerical(err.to_string())
}

struct RunRow {
    run: usize,
    seed: u64,
    iterations: usize,
    converged: bool,
    final_objective: f64,
    rse: f64,
    wall_ms: f64,
}

pub fn cmd_synth(a: &SynthArgs, argv: &[String]) -> Result<()> {
    let started = Instant::now();
    if a.m == 0 || a.n == 0 {
        return Err(input_err("--m and --n must be positive"));
    }
    if a.rank == 0 || a.rank > a.m.min(a.n) {
        return Err(input_err(format!("--rank must lie in 1..={}", a.m.min(a.n))));
    }
    if !(a.sr > 0.0 && a.sr <= 1.0) {
        return Err(input_err(format!("--sr must lie in (0, 1], got {}", a.sr)));
    }
    if !(a.nf >= 0.0 && a.nf.is_finite()) {
        return Err(input_err(format!("--nf must be non-negative, got {}", a.nf)));
    }
    if a.runs == 0 {
        return Err(input_err("--runs must be at least 1"));
    }
    let d = a.d.unwrap_or_else(|| default_rank_bound(a.rank));
    a.solver.config(a.lambda, d, a.seed)?;
    ensure_dir(&a.out)?;

    let mut config = a.solver.echo(a.lambda, d);
    let extra = json!({
        "m": a.m, "n": a.n, "rank": a.rank, "nf": a.nf, "sr": a.sr, "runs": a.runs,
        "seed": a.seed, "threads": a.threads,
    });
    merge(&mut config, extra);
    let mut manifest = Manifest::new("synth", argv, a.seed, config);

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = a.threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| input_err(format!("thread pool: {e}")))?;
    // Each run is independent and single-threaded, and `collect` keeps
    // run order, so the output does not depend on the worker count.
    let results: Vec<std::result::Result<RunRow, (usize, u64, String)>> = pool.install(|| {
        (0..a.runs)
            .into_par_iter()
            .map(|run| {
                let seed = derive_seed(a.seed, keys::RUN + run as u64);
                let t0 = Instant::now();
                let inst = gen_synthetic(a.m, a.n, a.rank, a.nf, a.sr, seed).map_err(|e| (run, seed, e.to_string()))?;
                let cfg = a.solver.config(a.lambda, d, seed).map_err(|e| (run, seed, e.to_string()))?;
                let rep = solve(&inst.observations, &cfg).map_err(|e| (run, seed, e.to_string()))?;
                let rse = rse(&rep.factors.product(), &inst.ground_truth).map_err(|e| (run, seed, e.to_string()))?;
                Ok(RunRow {
                    run,
                    seed,
                    iterations: rep.iterations,
                    converged: rep.converged,
                    final_objective: *rep.objective_trace.last().expect("non-empty trace"),
                    rse,
                    wall_ms: t0.elapsed().as_secs_f64() * 1e3,
                })
            })
            .collect()
    });

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err((run, seed, error)) => failures.push(json!({"run": run, "seed": seed, "error": error})),
        }
    }
    let csv_path = a.out.join("runs.csv");
    let summary_path = a.out.join("summary.json");
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.run.to_string(),
                r.seed.to_string(),
                r.iterations.to_string(),
                r.converged.to_string(),
                r.final_objective.to_string(),
                r.rse.to_string(),
                format!("{:.3}", r.wall_ms),
            ]
        })
        .collect();
    write_atomic(
        &csv_path,
        &csv_bytes(
            &["run", "seed", "iterations", "converged", "final_objective", "rse", "wall_ms"],
            &csv_rows,
        ),
    )?;
    let rses: Vec<f64> = rows.iter().map(|r| r.rse).collect();
    let (mean_rse, std_rse) = mean_std(&rses);
    let iters: Vec<f64> = rows.iter().map(|r| r.iterations as f64).collect();
    finish_manifest(&mut manifest, started, &[&csv_path, &summary_path]);
    let summary = json!({
        "manifest": manifest,
        "status": if failures.is_empty() { "ok" } else { "numerical_failure" },
        "d": d,
        "runs": a.runs,
        "completed": rows.len(),
        "converged": rows.iter().filter(|r| r.converged).count(),
        "mean_rse": num(mean_rse),
        "std_rse": num(std_rse),
        "mean_iterations": num(mean_std(&iters).0),
        "failures": failures,
    });
    write_json(&summary_path, &summary)?;
    if !failures.is_empty() {
        return Err(McError::Numerical(format!("{} of {} runs failed", failures.len(), a.runs)));
    }
    Ok(())
}

fn merge(base: &mut Value, extra: Value) {
    if let (Value::Object(b), Value::Object(e)) = (base, extra) {
        b.extend(e);
    }
}

fn infer_format(path: &Path) -> RatingFormat {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("csv") => RatingFormat::Csv,
        Some("tsv") | Some("data") | Some("tab") => RatingFormat::Tab,
        _ => RatingFormat::DoubleColon,
    }
}

pub fn cmd_complete(a: &CompleteArgs, argv: &[String]) -> Result<()> {
    let started = Instant::now();
    if !(a.train_frac > 0.0 && a.train_frac < 1.0) {
        return Err(input_err(format!(
            "--train-frac must lie strictly between 0 and 1 (the test set would be empty), got {}",
            a.train_frac
        )));
    }
    let cfg = a.solver.config(a.lambda, a.d, derive_seed(a.seed, keys::INIT))?;
    let format = a.format.unwrap_or_else(|| infer_format(&a.input));
    let file = File::open(&a.input).map_err(|e| McError::io(&a.input, e))?;
    let rs = parse_movielens(BufReader::new(file), format).map_err(|e| e.in_file(&a.input))?;
    let (train, test) = split_train_test(&rs, a.train_frac, a.seed)?;
    let offsets = if a.center_users {
        user_means(&train)
    } else {
        vec![0.0; rs.m]
    };
    let train = if a.center_users {
        center_rows(&train, &offsets)?
    } else {
        train
    };
    let centered_test: Vec<Rating> = test
        .ratings
        .iter()
        .map(|r| Rating {
            value: r.value - offsets[r.user],
            ..*r
        })
        .collect();

    ensure_dir(&a.out)?;
    let report_path = a.out.join("report.json");
    let trace_path = a.out.join("trace.csv");
    let predictions_path = a.out.join("predictions.csv");
    let mut config = a.solver.echo(a.lambda, a.d);
    merge(
        &mut config,
        json!({
            "input": a.input.display().to_string(), "format": format.as_str(), "train_frac": a.train_frac,
            "seed": a.seed, "center_users": a.center_users, "write_predictions": a.write_predictions,
        }),
    );
    let mut manifest = Manifest::new("complete", argv, a.seed, config);
    let dataset = json!({
        "users": rs.m, "items": rs.n, "ratings": rs.len(), "duplicates": rs.duplicates,
        "min_value": rs.min_value, "max_value": rs.max_value,
        "train": train.len(), "test": test.len(),
    });

    let rep = match solve(&train, &cfg) {
        Ok(rep) => rep,
        Err(err) => {
            write_trace(&trace_path, &err.objective_trace, &err.lipschitz_trace, &[])?;
            finish_manifest(&mut manifest, started, &[&report_path, &trace_path]);
            let report = json!({
                "manifest": manifest, "status": "numerical_failure", "error": err.to_string(),
                "dataset": dataset, "iterations": err.iterations, "objective_trace": err.objective_trace,
            });
            write_json(&report_path, &report)?;
            return Err(numerical_failure(&err));
        }
    };
    let test_rmse = rmse(&rep.factors, &centered_test)?;
    let terms = bound_terms(&train, &rep.factors, a.lambda, a.d)?;
    write_trace(&trace_path, &rep.objective_trace, &rep.lipschitz_trace, &rep.change_trace)?;
    let mut outputs = vec![report_path.as_path(), trace_path.as_path()];
    if a.write_predictions {
        let rows: Vec<Vec<String>> = test
            .ratings
            .iter()
            .map(|r| {
                let p = rep.factors.predict(r.user, r.item) + offsets[r.user];
                vec![
                    rs.user_ids[r.user].clone(),
                    rs.item_ids[r.item].clone(),
                    r.value.to_string(),
                    p.to_string(),
                ]
            })
            .collect();
        write_atomic(&predictions_path, &csv_bytes(&["user", "item", "rating", "prediction"], &rows))?;
        outputs.push(predictions_path.as_path());
    }
    finish_manifest(&mut manifest, started, &outputs);
    let report = json!({
        "manifest": manifest,
        "status": "ok",
        "dataset": dataset,
        "solver": solver_json(&rep),
        "rmse": num(test_rmse),
        "optimality": optimality_json(&rep.optimality),
        "bound_terms": bound_terms_json(&terms),
        "objective_trace": rep.objective_trace.iter().map(|&f| num(f)).collect::<Vec<_>>(),
    });
    write_json(&report_path, &report)
}

fn pgm_bytes(img: &GrayImage) -> Vec<u8> {
    let mut buf = Vec::new();
    write_pgm(img, &mut buf).expect("in-memory write");
    buf
}

pub fn cmd_image(a: &ImageArgs, argv: &[String]) -> Result<()> {
    let started = Instant::now();
    let cfg = a.solver.config(a.lambda, a.d, derive_seed(a.seed, keys::INIT))?;
    let file = File::open(&a.input).map_err(|e| McError::io(&a.input, e))?;
    let img = read_pgm(BufReader::new(file))?;
    let c = corrupt_image(&img, a.corrupt_frac, a.noise_sigma, a.seed)?;

    ensure_dir(&a.out)?;
    let report_path = a.out.join("report.json");
    let recovered_path = a.out.join("recovered.pgm");
    let corrupted_path = a.out.join("corrupted.pgm");
    let trace_path = a.out.join("trace.csv");
    write_atomic(&corrupted_path, &pgm_bytes(&c.noisy))?;
    let mut config = a.solver.echo(a.lambda, a.d);
    merge(
        &mut config,
        json!({
            "input": a.input.display().to_string(), "corrupt_frac": a.corrupt_frac,
            "noise_sigma": a.noise_sigma, "seed": a.seed,
        }),
    );
    let mut manifest = Manifest::new("image", argv, a.seed, config);
    let image = json!({"width": img.width(), "height": img.height(), "observed": c.observations.len()});

    let rep = match solve(&c.observations, &cfg) {
        Ok(rep) => rep,
        Err(err) => {
            write_trace(&trace_path, &err.objective_trace, &err.lipschitz_trace, &[])?;
            finish_manifest(&mut manifest, started, &[&report_path, &corrupted_path, &trace_path]);
            let report = json!({
                "manifest": manifest, "status": "numerical_failure", "error": err.to_string(),
                "image": image, "iterations": err.iterations,
            });
            write_json(&report_path, &report)?;
            return Err(numerical_failure(&err));
        }
    };
    let original = img.to_matrix();
    let recovered = rep.factors.product().map(clamp_pixel);
    let p = psnr(&recovered, &original, 255.0)?;
    let out_img = GrayImage::from_matrix(&recovered)?;
    let pq = psnr(&out_img.to_matrix(), &original, 255.0)?;
    write_atomic(&recovered_path, &pgm_bytes(&out_img))?;
    write_trace(&trace_path, &rep.objective_trace, &rep.lipschitz_trace, &rep.change_trace)?;
    finish_manifest(
        &mut manifest,
        started,
        &[&report_path, &recovered_path, &corrupted_path, &trace_path],
    );
    let report = json!({
        "manifest": manifest,
        "status": "ok",
        "image": image,
        "solver": solver_json(&rep),
        "psnr_db": num(p.db),
        "psnr_identical": p.identical,
        "psnr_quantized_db": num(pq.db),
        "optimality": optimality_json(&rep.optimality),
    });
    write_json(&report_path, &report)
}

pub fn cmd_verify(a: &VerifyArgs, argv: &[String]) -> Result<()> {
    let started = Instant::now();
    if a.trials == 0 {
        return Err(input_err("--trials must be at least 1"));
    }
    let mut cfg = VerifyConfig::new(a.trials, a.seed);
    cfg.factorizations = a.factorizations;
    cfg.tolerance_override = a.inject_tolerance;
    let results = run_property_suite(&cfg)?;
    let failed = results.iter().filter(|r| !r.passed).count();
    let config = json!({
        "trials": a.trials, "seed": a.seed, "factorizations": a.factorizations,
        "inject_tolerance": a.inject_tolerance,
    });
    let mut manifest = Manifest::new("verify", argv, a.seed, config);
    let outputs: Vec<&Path> = a.out.iter().map(PathBuf::as_path).collect();
    finish_manifest(&mut manifest, started, &outputs);
    let report = json!({
        "manifest": manifest,
        "passed": failed == 0,
        "properties": results.iter().map(|r| json!({
            "name": r.name,
            "trials": r.trials,
            "max_violation": num(r.max_violation),
            "tolerance": num(r.tolerance),
            "passed": r.passed,
        })).collect::<Vec<_>>(),
    });
    match &a.out {
        Some(path) => write_json(path, &report)?,
        None => println!("{}", serde_json::to_string_pretty(&report).expect("JSON values always serialize")),
    }
    if failed > 0 {
        return Err(McError::Numerical(format!("{failed} propert{} failed", if failed == 1 { "y" } else { "ies" })));
    }
    Ok(())
}
