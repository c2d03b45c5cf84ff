//! Benchmark harness: synthetic generators, the sweep over methods, privacy
//! levels and trials, and aggregation into means with confidence intervals.

mod synth;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use synth::{synth_gaussian, synth_mlp_lowrank, MLP_DEFAULT_N, MLP_INITIALIZER};

use crate::accounting::PrivacyBudget;
use crate::data::{normalize, risk_report, split_train_test, Dataset};
use crate::estimators::{fit_method, Method, MethodOptions};
use crate::error::{Error, Result};
use crate::rng::{combine_ids, hash_str, RngStream};

pub const ROWS_HEADER: &str = "dataset,method,epsilon,trial,train_mse,test_mse,failed";
pub const AGGREGATE_HEADER: &str = "dataset,method,epsilon,trials,failed,mean_train_mse,ci_half_width,ci_rule";

/// `count` log-spaced points from `lo` to `hi` inclusive.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count)
                .map(|i| {
                    if i == 0 {
                        lo
                    } else if i == count - 1 {
                        hi
                    } else {
                        (a + (b - a) * i as f64 / (count - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DeltaRule {
    /// `1 / n_train^2`.
    InverseSquareN,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RhoRule {
    /// `delta / 10`.
    DeltaOverTen,
    Fixed(f64),
}

impl DeltaRule {
    pub fn delta(self, n_train: usize) -> f64 {
        match self {
            DeltaRule::InverseSquareN => 1.0 / (n_train as f64 * n_train as f64),
            DeltaRule::Fixed(d) => d,
        }
    }
}

impl RhoRule {
    pub fn rho(self, delta: f64) -> f64 {
        match self {
            RhoRule::DeltaOverTen => delta / 10.0,
            RhoRule::Fixed(r) => r,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentGrid {
    pub methods: Vec<Method>,
    pub epsilons: Vec<f64>,
    pub trials: usize,
    pub delta_rule: DeltaRule,
    pub rho_rule: RhoRule,
    pub seed: u64,
    pub options: MethodOptions,
}

impl Default for ExperimentGrid {
    fn default() -> Self {
        Self {
            methods: vec![Method::Ihm, Method::LinMix, Method::AdaSsp],
            epsilons: log_spaced(0.1, 10.0, 9),
            trials: 500,
            delta_rule: DeltaRule::InverseSquareN,
            rho_rule: RhoRule::DeltaOverTen,
            seed: 0,
            options: MethodOptions::default(),
        }
    }
}

impl ExperimentGrid {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if self.methods.is_empty() || self.epsilons.is_empty() {
            return Err(Error::invalid("grid needs at least one method and one epsilon"));
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(Error::invalid(format!("epsilon must be positive and finite, got {e}")));
        }
        Ok(())
    }
}

/// A named, normalized train/test pair.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkData {
    pub name: String,
    pub train: Dataset,
    pub test: Dataset,
}

impl BenchmarkData {
    /// Splits `raw` and normalizes by the training bounds.
    pub fn prepare(name: impl Into<String>, raw: &Dataset, train_fraction: f64, seed: u64) -> Result<Self> {
        let (train, test) = split_train_test(raw, train_fraction, seed)?;
        let (train, test, _) = normalize(&train, &test)?;
        Ok(Self { name: name.into(), train, test })
    }

    /// Uses an already normalized dataset for both sides.
    pub fn train_only(name: impl Into<String>, ds: Dataset) -> Self {
        Self { name: name.into(), test: ds.clone(), train: ds }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub dataset: String,
    pub method: Method,
    pub epsilon: f64,
    pub trial: usize,
    pub delta: f64,
    pub rho: f64,
    /// `None` for failed trials.
    pub train_mse: Option<f64>,
    pub test_mse: Option<f64>,
    pub failed: bool,
}

/// Stream of one trial: independent of scheduling and of the other cells.
pub fn trial_stream(seed: u64, dataset: &str, method: Method, epsilon: f64, trial: usize) -> RngStream {
    RngStream::new(
        seed,
        combine_ids(&[hash_str(dataset), hash_str(method.name()), epsilon.to_bits(), trial as u64]),
    )
}

fn run_trial(data: &BenchmarkData, grid: &ExperimentGrid, method: Method, epsilon: f64, trial: usize) -> Result<ResultRow> {
    let delta = grid.delta_rule.delta(data.train.n());
    let rho = grid.rho_rule.rho(delta);
    let budget = PrivacyBudget::new(epsilon, delta, rho)?;
    let rng = trial_stream(grid.seed, &data.name, method, epsilon, trial);
    let mut row = ResultRow {
        dataset: data.name.clone(),
        method,
        epsilon,
        trial,
        delta,
        rho,
        train_mse: None,
        test_mse: None,
        failed: false,
    };
    match fit_method(method, &data.train, &budget, &grid.options, &rng) {
        Ok(fit) => {
            let report = risk_report(&data.train, &data.test, &fit.theta_vector())?;
            row.train_mse = Some(report.train_mse);
            row.test_mse = Some(report.test_mse);
        }
        Err(e) if e.is_solver_failure() => row.failed = true,
        Err(e) => return Err(e),
    }
    Ok(row)
}

/// Runs every (dataset, method, epsilon, trial) cell. Trials of a cell run in
/// parallel; rows reach `sink` in grid order, so the output does not depend on
/// the thread count.
pub fn run_grid(
    datasets: &[BenchmarkData],
    grid: &ExperimentGrid,
    mut sink: impl FnMut(&ResultRow) -> Result<()>,
) -> Result<Vec<ResultRow>> {
    grid.validate()?;
    let mut rows = Vec::with_capacity(datasets.len() * grid.methods.len() * grid.epsilons.len() * grid.trials);
    for data in datasets {
        data.train.ensure_overdetermined()?;
        for &method in &grid.methods {
            for &epsilon in &grid.epsilons {
                let cell: Vec<ResultRow> = (0..grid.trials)
                    .into_par_iter()
                    .map(|t| run_trial(data, grid, method, epsilon, t))
                    .collect::<Result<_>>()?;
                for row in cell {
                    sink(&row)?;
                    rows.push(row);
                }
            }
        }
    }
    Ok(rows)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes rows with [`ROWS_HEADER`]. Failed trials have empty MSE fields.
pub fn write_rows<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = RowWriter::new(out)?;
    for r in rows {
        w.write(r)?;
    }
    w.finish()
}

/// Incremental writer for [`ROWS_HEADER`] files.
pub struct RowWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> RowWriter<W> {
    pub fn new(out: W) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(out);
        inner.write_record(ROWS_HEADER.split(','))?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, r: &ResultRow) -> Result<()> {
        self.inner.write_record([
            r.dataset.clone(),
            r.method.to_string(),
            r.epsilon.to_string(),
            r.trial.to_string(),
            opt(r.train_mse),
            opt(r.test_mse),
            u8::from(r.failed).to_string(),
        ])?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush().map_err(|e| Error::Csv(e.into()))
    }
}

/// Confidence-interval half-width rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CiRule {
    /// `1.96 * std / runs`, as printed in the experiment description.
    PaperVerbatim,
    /// `1.96 * std / sqrt(runs)`.
    #[default]
    StandardError,
}

impl CiRule {
    pub fn name(self) -> &'static str {
        match self {
            CiRule::PaperVerbatim => "paper-verbatim",
            CiRule::StandardError => "standard-error",
        }
    }

    pub fn half_width(self, values: &[f64]) -> f64 {
        let runs = values.len() as f64;
        let sd = sample_std(values);
        match self {
            CiRule::PaperVerbatim => 1.96 * sd / runs,
            CiRule::StandardError => 1.96 * sd / runs.sqrt(),
        }
    }
}

impl fmt::Display for CiRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CiRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper-verbatim" => Ok(CiRule::PaperVerbatim),
            "standard-error" => Ok(CiRule::StandardError),
            _ => Err(Error::invalid(format!("unknown CI rule '{s}'"))),
        }
    }
}

/// Sample standard deviation with one degree of freedom removed; 0 for fewer
/// than two values.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / (n - 1.0)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub dataset: String,
    pub method: Method,
    pub epsilon: f64,
    /// Completed trials, the run count of the interval.
    pub trials: usize,
    pub failed: usize,
    /// `None` when every trial of the group failed.
    pub mean_train_mse: Option<f64>,
    pub ci_half_width: Option<f64>,
    pub ci_rule: CiRule,
}

/// Groups rows by (dataset, method, epsilon) in order of first appearance.
pub fn aggregate(rows: &[ResultRow], rule: CiRule) -> Result<Vec<AggregateRow>> {
    if rows.is_empty() {
        return Err(Error::invalid("no rows to aggregate"));
    }
    let mut keys: Vec<(String, Method, u64)> = Vec::new();
    let mut groups: Vec<(Vec<f64>, usize)> = Vec::new();
    for r in rows {
        let key = (r.dataset.clone(), r.method, r.epsilon.to_bits());
        let idx = match keys.iter().position(|k| *k == key) {
            Some(i) => i,
            None => {
                keys.push(key);
                groups.push((Vec::new(), 0));
                keys.len() - 1
            }
        };
        match (r.failed, r.train_mse) {
            (false, Some(v)) => groups[idx].0.push(v),
            _ => groups[idx].1 += 1,
        }
    }
    Ok(keys
        .into_iter()
        .zip(groups)
        .map(|((dataset, method, bits), (values, failed))| {
            let (mean, hw) = if values.is_empty() {
                (None, None)
            } else {
                (
                    Some(values.iter().sum::<f64>() / values.len() as f64),
                    Some(rule.half_width(&values)),
                )
            };
            AggregateRow {
                dataset,
                method,
                epsilon: f64::from_bits(bits),
                trials: values.len(),
                failed,
                mean_train_mse: mean,
                ci_half_width: hw,
                ci_rule: rule,
            }
        })
        .collect())
}

/// Writes aggregates with [`AGGREGATE_HEADER`].
pub fn write_aggregate<W: Write>(rows: &[AggregateRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(AGGREGATE_HEADER.split(','))?;
    for r in rows {
        w.write_record([
            r.dataset.clone(),
            r.method.to_string(),
            r.epsilon.to_string(),
            r.trials.to_string(),
            r.failed.to_string(),
            opt(r.mean_train_mse),
            opt(r.ci_half_width),
            r.ci_rule.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(eps: f64, trial: usize, mse: Option<f64>) -> ResultRow {
        ResultRow {
            dataset: "a".into(),
            method: Method::Ihm,
            epsilon: eps,
            trial,
            delta: 1e-6,
            rho: 1e-7,
            train_mse: mse,
            test_mse: mse,
            failed: mse.is_none(),
        }
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_spaced(0.1, 10.0, 5);
        assert_eq!(g.len(), 5);
        assert_eq!(g[0], 0.1);
        assert_eq!(g[4], 10.0);
        assert!((g[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_point_group() {
        let agg = aggregate(&[row(1.0, 0, Some(1.0)), row(1.0, 1, Some(3.0))], CiRule::PaperVerbatim).unwrap();
        assert_eq!(agg.len(), 1);
        assert_eq!(agg[0].mean_train_mse, Some(2.0));
        let expected = 1.96 * 2f64.sqrt() / 2.0;
        assert!((agg[0].ci_half_width.unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn single_trial_has_zero_width() {
        for rule in [CiRule::PaperVerbatim, CiRule::StandardError] {
            let agg = aggregate(&[row(1.0, 0, Some(0.4))], rule).unwrap();
            assert_eq!(agg[0].ci_half_width, Some(0.0));
        }
    }

    #[test]
    fn failed_rows_counted_not_averaged() {
        let rows = [row(1.0, 0, Some(1.0)), row(1.0, 1, None), row(2.0, 0, None)];
        let agg = aggregate(&rows, CiRule::StandardError).unwrap();
        assert_eq!((agg[0].trials, agg[0].failed), (1, 1));
        assert_eq!(agg[0].mean_train_mse, Some(1.0));
        assert_eq!((agg[1].trials, agg[1].failed), (0, 1));
        assert_eq!(agg[1].mean_train_mse, None);
        assert!(aggregate(&[], CiRule::StandardError).is_err());
    }

    #[test]
    fn rules_differ_by_root_runs() {
        let v = [0.3, 0.5, 0.9, 1.4];
        let a = CiRule::PaperVerbatim.half_width(&v);
        let b = CiRule::StandardError.half_width(&v);
        assert!((a - b / 2.0).abs() < 1e-15);
        assert_eq!("paper-verbatim".parse::<CiRule>().unwrap(), CiRule::PaperVerbatim);
        assert!("sem".parse::<CiRule>().is_err());
    }

    #[test]
    fn headers_are_exact() {
        let mut buf = Vec::new();
        write_rows(&[row(0.5, 0, None)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, format!("{ROWS_HEADER}\na,ihm,0.5,0,,,1\n"));
    }
}
