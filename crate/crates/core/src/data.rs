//! Datasets, CSV ingestion, splitting, normalization and the empirical-risk
//! metrics every estimator is scored by.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Relative slack used when checking certified row bounds.
const BOUND_SLACK: f64 = 1e-12;

/// Design matrix, responses and their certified bounds.
///
/// `c_x` bounds every row norm of `x` and `c_y` bounds every `|y_i|`. Both are
/// checked on construction. The overdetermined condition `n >= d` is checked
/// by [`Dataset::ensure_overdetermined`], since a small held-out split may
/// legitimately have fewer rows than columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
    c_x: f64,
    c_y: f64,
}

fn max_row_norm(x: &DMatrix<f64>) -> f64 {
    x.row_iter().map(|r| r.norm()).fold(0.0, f64::max)
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, c_x: f64, c_y: f64) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::Dimension(format!(
                "x has {} rows but y has {} entries",
                x.nrows(),
                y.len()
            )));
        }
        if !(c_x >= 0.0 && c_y >= 0.0) {
            return Err(Error::invalid("row bounds must be nonnegative"));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Degenerate("non-finite entry"));
        }
        let rx = max_row_norm(&x);
        if rx > c_x * (1.0 + BOUND_SLACK) + f64::MIN_POSITIVE {
            return Err(Error::invalid(format!("row norm {rx} exceeds c_x = {c_x}")));
        }
        let ry = y.amax();
        if ry > c_y * (1.0 + BOUND_SLACK) + f64::MIN_POSITIVE {
            return Err(Error::invalid(format!("|y| = {ry} exceeds c_y = {c_y}")));
        }
        Ok(Self { x, y, c_x, c_y })
    }

    /// Builds a dataset whose bounds are the observed maxima.
    pub fn from_observed(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let c_x = max_row_norm(&x);
        let c_y = if y.is_empty() { 0.0 } else { y.amax() };
        Self::new(x, y, c_x, c_y)
    }

    /// Held-out data carries the training bounds, which its rows may exceed.
    fn held_out(x: DMatrix<f64>, y: DVector<f64>, c_x: f64, c_y: f64) -> Self {
        Self { x, y, c_x, c_y }
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn c_x(&self) -> f64 {
        self.c_x
    }

    pub fn c_y(&self) -> f64 {
        self.c_y
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn ensure_overdetermined(&self) -> Result<()> {
        if self.n() < self.d() || self.n() == 0 {
            return Err(Error::Underdetermined { n: self.n(), d: self.d() });
        }
        Ok(())
    }

    /// `[X, Y]`, the n x (d+1) concatenation.
    pub fn concatenated(&self) -> DMatrix<f64> {
        let mut xy = self.x.clone().resize_horizontally(self.d() + 1, 0.0);
        xy.set_column(self.d(), &self.y);
        xy
    }

    fn select(&self, rows: &[usize]) -> (DMatrix<f64>, DVector<f64>) {
        let x = self.x.select_rows(rows);
        let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| self.y[i]));
        (x, y)
    }
}

/// Which CSV column holds the response.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum TargetColumn {
    #[default]
    Last,
    Name(String),
    Index(usize),
}

impl std::str::FromStr for TargetColumn {
    type Err = std::convert::Infallible;

    /// Integers select by index, anything else by header name.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => TargetColumn::Index(i),
            Err(_) => TargetColumn::Name(s.to_string()),
        })
    }
}

fn parse_cell(s: &str) -> Option<f64> {
    let t = s.trim();
    if t.is_empty() {
        return None;
    }
    t.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads a headed, comma-separated file of real numbers.
///
/// A cell is missing when it is empty or does not parse as a finite real. With
/// `drop_missing` such rows are discarded; otherwise they are an error.
pub fn load_csv(path: impl AsRef<Path>, target: &TargetColumn, drop_missing: bool) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, target, drop_missing)
}

pub fn read_csv<R: std::io::Read>(reader: R, target: &TargetColumn, drop_missing: bool) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if headers.is_empty() {
        return Err(Error::Degenerate("no columns"));
    }
    let t = match target {
        TargetColumn::Last => headers.len() - 1,
        TargetColumn::Index(i) if *i < headers.len() => *i,
        TargetColumn::Index(i) => return Err(Error::UnknownColumn(i.to_string())),
        TargetColumn::Name(name) => headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::UnknownColumn(name.clone()))?,
    };
    let d = headers.len() - 1;

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (row_idx, record) in rdr.records().enumerate() {
        let record = record?;
        let mut feats = Vec::with_capacity(d);
        let mut response = None;
        let mut missing = None;
        for (j, cell) in record.iter().enumerate() {
            match parse_cell(cell) {
                Some(v) if j == t => response = Some(v),
                Some(v) => feats.push(v),
                None => {
                    missing.get_or_insert((j, cell.to_string()));
                }
            }
        }
        match (missing, response) {
            (None, Some(r)) => {
                xs.extend(feats);
                ys.push(r);
            }
            (Some(_), _) if drop_missing => continue,
            (Some((j, value)), _) => {
                return Err(Error::NonNumeric {
                    row: row_idx + 1,
                    column: headers[j].clone(),
                    value,
                })
            }
            (None, None) => unreachable!("target index is within the header width"),
        }
    }
    let n = ys.len();
    if n < d {
        return Err(Error::Underdetermined { n, d });
    }
    let x = DMatrix::from_row_slice(n, d, &xs);
    Dataset::from_observed(x, DVector::from_vec(ys))
}

/// Writes a dataset as CSV with header `x0,...,x{d-1},y`.
pub fn write_csv<W: std::io::Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (0..ds.d()).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    w.write_record(&header)?;
    for i in 0..ds.n() {
        let mut rec: Vec<String> = ds.x.row(i).iter().map(|v| format!("{v:?}")).collect();
        rec.push(format!("{:?}", ds.y[i]));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

/// Uniformly random train/test partition; row order is preserved within each side.
pub fn split_train_test(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!("train fraction {train_fraction} not in (0, 1)")));
    }
    let n = ds.n();
    let n_train = ((train_fraction * n as f64).ceil() as usize).min(n);
    if n_train < ds.d() || n_train == 0 {
        return Err(Error::Underdetermined { n: n_train, d: ds.d() });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (tr, te) = idx.split_at_mut(n_train);
    tr.sort_unstable();
    te.sort_unstable();
    let (xt, yt) = ds.select(tr);
    let (xe, ye) = ds.select(te);
    Ok((
        Dataset::held_out(xt, yt, ds.c_x, ds.c_y),
        Dataset::held_out(xe, ye, ds.c_x, ds.c_y),
    ))
}

/// Divisors applied to covariates and responses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationRecord {
    pub x_scale: f64,
    pub y_scale: f64,
}

/// Scales the training split to unit row norm and unit response bound, and
/// applies the same divisors to the held-out split.
pub fn normalize(train: &Dataset, test: &Dataset) -> Result<(Dataset, Dataset, NormalizationRecord)> {
    if train.d() != test.d() {
        return Err(Error::Dimension("train and test widths differ".into()));
    }
    let x_scale = max_row_norm(&train.x);
    if x_scale <= 0.0 {
        return Err(Error::Degenerate("all-zero covariates"));
    }
    let y_scale = if train.y.is_empty() { 0.0 } else { train.y.amax() };
    if y_scale <= 0.0 {
        return Err(Error::Degenerate("all-zero responses"));
    }
    let scale = |ds: &Dataset| {
        Dataset::held_out(&ds.x / x_scale, &ds.y / y_scale, 1.0, 1.0)
    };
    Ok((scale(train), scale(test), NormalizationRecord { x_scale, y_scale }))
}

/// Squared loss `||y - x theta||^2`.
pub fn loss(x: &DMatrix<f64>, y: &DVector<f64>, theta: &DVector<f64>) -> f64 {
    (y - x * theta).norm_squared()
}

/// Ridge regressor `(X'X + ridge I)^{-1} X'Y`; minimum-norm OLS when `ridge == 0`.
pub fn ols_solution(x: &DMatrix<f64>, y: &DVector<f64>, ridge: f64) -> DVector<f64> {
    if ridge > 0.0 {
        let mut h = linalg::gram(x);
        for i in 0..h.nrows() {
            h[(i, i)] += ridge;
        }
        let rhs = x.tr_mul(y);
        match nalgebra::Cholesky::new(h) {
            Some(ch) => ch.solve(&rhs),
            // only reachable when ridge is tiny relative to round-off
            None => linalg::min_norm_lstsq(x, y),
        }
    } else {
        linalg::min_norm_lstsq(x, y)
    }
}

pub fn ols_fit(ds: &Dataset, ridge: f64) -> DVector<f64> {
    ols_solution(&ds.x, &ds.y, ridge)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub train_mse: f64,
    pub test_mse: f64,
    /// `L(theta) - L(theta*)` on the training split.
    pub excess_risk: f64,
}

pub fn risk_report(train: &Dataset, test: &Dataset, theta: &DVector<f64>) -> Result<RiskReport> {
    if theta.len() != train.d() || test.d() != train.d() {
        return Err(Error::Dimension(format!(
            "theta has length {}, data has {} columns",
            theta.len(),
            train.d()
        )));
    }
    let mse = |ds: &Dataset| {
        if ds.n() == 0 {
            f64::NAN
        } else {
            loss(&ds.x, &ds.y, theta) / ds.n() as f64
        }
    };
    let theta_star = ols_fit(train, 0.0);
    let excess_risk = loss(&train.x, &train.y, theta) - loss(&train.x, &train.y, &theta_star);
    Ok(RiskReport {
        train_mse: mse(train),
        test_mse: mse(test),
        excess_risk,
    })
}
