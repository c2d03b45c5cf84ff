use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use dpols::accounting::{dpgd_sigma, theorem1_noise, PrivacyBudget};
use dpols::data::{load_csv, normalize, risk_report, split_train_test, write_csv, TargetColumn};
use dpols::estimators::{
    fit_method, ihm_noise, linmix_default_k, AdasspScales, IhmConfig, Method, MethodOptions,
};
use dpols::experiments::{
    aggregate, log_spaced, run_grid, synth_gaussian, synth_mlp_lowrank, write_aggregate, BenchmarkData, CiRule,
    DeltaRule, ExperimentGrid, RhoRule, RowWriter, MLP_DEFAULT_N, MLP_INITIALIZER,
};
use dpols::rng::RngStream;
use dpols::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_ALL_FAILED: u8 = 4;

#[derive(Parser)]
#[command(name = "dpols", version, about = "Differentially private least squares")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one method on one dataset and print the estimate as JSON.
    Fit(FitArgs),
    /// Sweep methods, privacy levels and trials; write rows and aggregate CSVs.
    Benchmark(BenchArgs),
    /// Print the noise parameters a method would use, as JSON.
    Calibrate(CalibrateArgs),
    /// Write a synthetic dataset as CSV.
    Synth(SynthArgs),
}

#[derive(Args, Clone)]
struct BudgetArgs {
    /// Defaults to 1/n_train^2.
    #[arg(long)]
    delta: Option<f64>,
    /// Defaults to delta/10.
    #[arg(long)]
    rho: Option<f64>,
}

#[derive(Args, Clone)]
struct MethodArgs {
    /// Iterations of the iterative methods.
    #[arg(long = "T")]
    iterations: Option<u32>,
    /// Absolute sketch size.
    #[arg(long)]
    k: Option<usize>,
    /// Multiplier of the default sketch-size rule (linear mixing defaults to 2.5, IHM to 6).
    #[arg(long)]
    k_mult: Option<f64>,
    /// Clipping level; defaults to the response bound.
    #[arg(long)]
    clip: Option<f64>,
    /// Keep the -eta^2 theta term in the IHM gradient release.
    #[arg(long)]
    include_ridge_term: bool,
    /// DP-GD learning rate.
    #[arg(long)]
    lr: Option<f64>,
}

impl MethodArgs {
    fn options(&self) -> MethodOptions {
        MethodOptions {
            iterations: self.iterations,
            k: self.k,
            k_multiplier: self.k_mult,
            clip: self.clip,
            include_ridge_term: self.include_ridge_term,
            learning_rate: self.lr,
        }
    }
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Response column, by header name or zero-based index; defaults to the last column.
    #[arg(long)]
    target_col: Option<String>,
    /// Fraction of rows used for training.
    #[arg(long, default_value_t = 0.8)]
    train_frac: f64,
    /// Fail on rows with missing or non-numeric cells instead of dropping them.
    #[arg(long)]
    keep_missing: bool,
}

impl DataArgs {
    fn target(&self) -> TargetColumn {
        self.target_col.as_deref().map(|s| s.parse().unwrap()).unwrap_or_default()
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_parser = parse_method)]
    method: Method,
    #[arg(long)]
    eps: f64,
    #[command(flatten)]
    budget: BudgetArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    method_args: MethodArgs,
    #[command(flatten)]
    data_args: DataArgs,
    /// Omit the non-private per-iteration diagnostics.
    #[arg(long)]
    privacy_strict: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// CSV datasets (repeat the flag or separate with commas); each is split and normalized independently.
    #[arg(long, required = true, value_delimiter = ',')]
    data: Vec<PathBuf>,
    /// Methods to run (comma separated).
    #[arg(long, value_parser = parse_method, value_delimiter = ',', default_value = "ihm,linmix,adassp")]
    method: Vec<Method>,
    /// Privacy levels (comma separated); defaults to log-spaced points over [0.1, 10].
    #[arg(long, value_delimiter = ',')]
    eps: Vec<f64>,
    /// Number of log-spaced privacy levels when --eps is absent.
    #[arg(long, default_value_t = 9)]
    n_eps: usize,
    #[command(flatten)]
    budget: BudgetArgs,
    #[arg(long, default_value_t = 500)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    method_args: MethodArgs,
    #[command(flatten)]
    data_args: DataArgs,
    #[arg(long, value_parser = parse_ci_rule, default_value = "standard-error")]
    ci_rule: CiRule,
    #[arg(long, default_value = "rows.csv")]
    rows: PathBuf,
    #[arg(long, default_value = "aggregate.csv")]
    aggregate: PathBuf,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long, value_parser = parse_method)]
    method: Method,
    #[arg(long)]
    eps: f64,
    /// Training-set size.
    #[arg(long)]
    n: usize,
    /// Number of features.
    #[arg(long)]
    d: usize,
    #[command(flatten)]
    budget: BudgetArgs,
    #[command(flatten)]
    method_args: MethodArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    Gaussian,
    Mlp,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum, default_value = "gaussian")]
    kind: SynthKind,
    #[arg(long)]
    n: Option<usize>,
    /// Features (gaussian) or output dimension (mlp).
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    noise_sd: Option<f64>,
    /// Target condition number of the gaussian design.
    #[arg(long, default_value_t = 1.0)]
    cond: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_ci_rule(s: &str) -> Result<CiRule, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_solver_failure() {
            EXIT_ALL_FAILED
        } else if e.is_data_error() || matches!(e, Error::Asymmetric(_)) {
            EXIT_DATA
        } else {
            EXIT_CONFIG
        };
        Failure { code, message: e.to_string() }
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure {
        code: EXIT_DATA,
        message: format!("cannot write {}: {e}", path.display()),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| io_failure(path, e))
}

fn budget_for(eps: f64, b: &BudgetArgs, n_train: usize) -> Result<PrivacyBudget, Failure> {
    let delta = b.delta.unwrap_or_else(|| DeltaRule::InverseSquareN.delta(n_train));
    let rho = b.rho.unwrap_or_else(|| RhoRule::DeltaOverTen.rho(delta));
    Ok(PrivacyBudget::new(eps, delta, rho)?)
}

fn load(path: &Path, args: &DataArgs, seed: u64) -> Result<BenchmarkData, Failure> {
    let raw = load_csv(path, &args.target(), !args.keep_missing)?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(BenchmarkData::prepare(name, &raw, args.train_frac, seed)?)
}

fn print_json(value: &serde_json::Value) -> Result<(), Failure> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| Failure { code: EXIT_DATA, message: e.to_string() })?;
    writeln!(out).map_err(|e| io_failure(Path::new("<stdout>"), e))
}

fn cmd_fit(a: FitArgs) -> Result<(), Failure> {
    let raw = load_csv(&a.data, &a.data_args.target(), !a.data_args.keep_missing)?;
    let (train, test) = split_train_test(&raw, a.data_args.train_frac, a.seed)?;
    let (train, test, scales) = normalize(&train, &test)?;
    let budget = budget_for(a.eps, &a.budget, train.n())?;
    let fit = fit_method(a.method, &train, &budget, &a.method_args.options(), &RngStream::new(a.seed, 0))?;
    let report = risk_report(&train, &test, &fit.theta_vector())?;
    let mut out = json!({
        "method": a.method.name(),
        "budget": budget,
        "n_train": train.n(),
        "n_test": test.n(),
        "d": train.d(),
        "normalization": scales,
        "theta": fit.theta,
        "train_mse": report.train_mse,
        "test_mse": report.test_mse,
        "sketch_size": fit.sketch_size,
        "gamma": fit.gamma,
    });
    if !a.privacy_strict {
        out["excess_risk"] = json!(report.excess_risk);
        out["per_iteration"] = json!(fit.per_iteration);
    }
    print_json(&out)
}

fn cmd_benchmark(a: BenchArgs) -> Result<(), Failure> {
    let datasets = a
        .data
        .iter()
        .map(|p| load(p, &a.data_args, a.seed))
        .collect::<Result<Vec<_>, _>>()?;
    let epsilons = if a.eps.is_empty() { log_spaced(0.1, 10.0, a.n_eps) } else { a.eps.clone() };
    let grid = ExperimentGrid {
        methods: a.method.clone(),
        epsilons,
        trials: a.trials,
        delta_rule: a.budget.delta.map_or(DeltaRule::InverseSquareN, DeltaRule::Fixed),
        rho_rule: a.budget.rho.map_or(RhoRule::DeltaOverTen, RhoRule::Fixed),
        seed: a.seed,
        options: a.method_args.options(),
    };
    let mut writer = RowWriter::new(create(&a.rows)?)?;
    let rows = run_grid(&datasets, &grid, |r| writer.write(r))?;
    writer.finish()?;
    let agg = aggregate(&rows, a.ci_rule)?;
    write_aggregate(&agg, create(&a.aggregate)?)?;
    let failed = rows.iter().filter(|r| r.failed).count();
    eprintln!("{} rows ({failed} failed) -> {}, {}", rows.len(), a.rows.display(), a.aggregate.display());
    if failed == rows.len() {
        return Err(Failure { code: EXIT_ALL_FAILED, message: "every trial failed".into() });
    }
    Ok(())
}

fn cmd_calibrate(a: CalibrateArgs) -> Result<(), Failure> {
    if a.d == 0 || a.n < a.d {
        return Err(Error::Underdetermined { n: a.n, d: a.d }.into());
    }
    let budget = budget_for(a.eps, &a.budget, a.n)?;
    let opts = a.method_args.options();
    let clip = opts.clip.unwrap_or(1.0);
    let out = match a.method {
        Method::Ihm => {
            let mut cfg = IhmConfig { k: opts.k, clip_c: opts.clip, ..IhmConfig::default() };
            if let Some(t) = opts.iterations {
                cfg.iterations = t;
            }
            if let Some(m) = opts.k_multiplier {
                cfg.k_multiplier = m;
            }
            let noise = ihm_noise(a.d, &budget, &cfg, clip)?;
            let closed = theorem1_noise(budget.epsilon, budget.delta, noise.k as u64, noise.iterations, clip, budget.rho)?;
            json!({ "method": "ihm", "budget": budget, "noise": noise, "closed_form": closed })
        }
        Method::LinMix | Method::LinMixDyn => {
            let k = opts.k.unwrap_or_else(|| linmix_default_k(a.d, budget.rho, opts.k_multiplier.unwrap_or(2.5)));
            let gamma = dpols::accounting::calibrate_gamma(budget.epsilon, budget.delta, k as u64)?;
            json!({ "method": a.method.name(), "budget": budget, "k": k, "gamma": gamma, "eta": gamma / (k as f64).sqrt() })
        }
        Method::AdaSsp => {
            let scales = AdasspScales::new(a.d, &budget, budget.rho, 1.0, 1.0, true)?;
            json!({ "method": "adassp", "budget": budget, "scales": scales })
        }
        Method::DpGd => {
            let t = opts.iterations.unwrap_or(3);
            json!({
                "method": "dpgd",
                "budget": budget,
                "iterations": t,
                "sigma": dpgd_sigma(t, clip, a.n, budget.epsilon, budget.delta),
            })
        }
    };
    print_json(&out)
}

fn cmd_synth(a: SynthArgs) -> Result<(), Failure> {
    let (ds, meta) = match a.kind {
        SynthKind::Gaussian => {
            let (n, d, sd) = (a.n.unwrap_or(2000), a.d.unwrap_or(8), a.noise_sd.unwrap_or(0.1));
            let ds = synth_gaussian(n, d, sd, a.cond, a.seed)?;
            (ds, json!({ "kind": "gaussian", "n": n, "d": d, "noise_sd": sd, "cond": a.cond, "seed": a.seed }))
        }
        SynthKind::Mlp => {
            let (n, d, sd) = (a.n.unwrap_or(MLP_DEFAULT_N), a.d.unwrap_or(128), a.noise_sd.unwrap_or(0.1));
            let ds = synth_mlp_lowrank(n, d, sd, a.seed)?;
            let meta = json!({
                "kind": "mlp", "n": n, "out_dim": d, "noise_sd": sd, "seed": a.seed, "initializer": MLP_INITIALIZER,
            });
            (ds, meta)
        }
    };
    let mut out = create(&a.out)?;
    write_csv(&ds, &mut out)?;
    out.flush().map_err(|e| io_failure(&a.out, e))?;
    let meta_path = a.out.with_extension("meta.json");
    let meta_file = create(&meta_path)?;
    serde_json::to_writer_pretty(meta_file, &meta).map_err(|e| Failure { code: EXIT_DATA, message: e.to_string() })?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
