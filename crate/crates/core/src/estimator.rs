//! Two-stage least-squares load model and its rolling retraining schedule.
//!
//! Stage one fits a constant per calendar year (the per-year mean of the
//! targets). Stage two regresses the detrended targets on the design rows.
//! The design is exactly collinear (every one-hot block sums to the
//! intercept), so coefficients are not identifiable but predictions are; the
//! solver uses ridge-regularized normal equations and falls back to the
//! minimum-norm pseudo-inverse when the regularized system is still
//! ill-conditioned.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;
use std::sync::Arc;

use chrono::{Days, Months, NaiveDate};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{build_matrix, FeatureLayout, FeatureMatrix};
use crate::timeseries::{CalendarConfig, HourlySeries, JoinedTable, Timestamp};

/// Default ridge scale: λ = scale · trace(AᵀA) / p.
pub const DEFAULT_RIDGE_SCALE: f64 = 1e-6;
/// Regularized systems with a larger condition estimate use the pseudo-inverse.
pub const DEFAULT_MAX_CONDITION: f64 = 1e12;
/// Upper bound on iterated-Tikhonov refinement sweeps.
pub const DEFAULT_MAX_REFINEMENTS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum RidgePolicy {
    /// λ = scale · trace(AᵀA) / p
    TraceScaled(f64),
    Fixed(f64),
}

impl Default for RidgePolicy {
    fn default() -> Self {
        RidgePolicy::TraceScaled(DEFAULT_RIDGE_SCALE)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitOptions {
    pub ridge: RidgePolicy,
    pub max_condition: f64,
    /// Refinement sweeps `b ← b + (AᵀA + λI)⁻¹(Aᵀy − AᵀA·b)` after the ridge solve;
    /// each sweep removes more of the ridge bias. Zero gives the plain ridge solution.
    pub max_refinements: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            ridge: RidgePolicy::default(),
            max_condition: DEFAULT_MAX_CONDITION,
            max_refinements: DEFAULT_MAX_REFINEMENTS,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    RidgeCholesky,
    MinimumNorm,
}

/// Stage-two result.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientFit {
    pub coefficients: Vec<f64>,
    pub lambda: f64,
    pub method: SolveMethod,
    pub condition: f64,
    pub refinements: usize,
    pub residual_mean: f64,
    pub residual_std: f64,
}

/// A fitted load model: per-year trend plus coefficient vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub trend_by_year: BTreeMap<i32, f64>,
    pub coefficients: Vec<f64>,
    pub ridge_lambda: f64,
    pub solve_method: SolveMethod,
    pub train_start: Timestamp,
    /// Last training hour (inclusive).
    pub train_end: Timestamp,
    pub n_train: usize,
    pub residual_mean: f64,
    pub residual_std: f64,
    pub layout: Arc<FeatureLayout>,
}

impl FittedModel {
    pub fn validate(&self) -> Result<()> {
        if self.coefficients.len() != self.layout.width() {
            return Err(Error::LayoutMismatch(format!(
                "{} coefficients for a {}-column layout",
                self.coefficients.len(),
                self.layout.width()
            )));
        }
        if self.trend_by_year.is_empty() {
            return Err(Error::InvalidValue("model has no trend years".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let model: FittedModel = serde_json::from_str(s)?;
        model.validate()?;
        Ok(model)
    }

    /// Trend for `year`; `None` in the flag slot means the year was fitted.
    /// Years outside the training data use the latest earlier year, or the
    /// earliest year when none precedes.
    pub fn trend_for(&self, year: i32) -> (f64, bool) {
        if let Some(v) = self.trend_by_year.get(&year) {
            return (*v, false);
        }
        let carried = self
            .trend_by_year
            .range(..year)
            .next_back()
            .or_else(|| self.trend_by_year.iter().next())
            .map(|(_, v)| *v)
            .expect("validated: trend map nonempty");
        (carried, true)
    }

    pub fn predict_row(&self, t: Timestamp, row: &[f64]) -> (f64, bool) {
        let (trend, extrapolated) = self.trend_for(t.year());
        (trend + dot(row, &self.coefficients), extrapolated)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn targets_of(matrix: &FeatureMatrix) -> Result<&[f64]> {
    matrix
        .targets()
        .ok_or_else(|| Error::InvalidValue("feature matrix has no targets".into()))
}

fn trend_in(matrix: &FeatureMatrix, range: Range<usize>) -> Result<BTreeMap<i32, f64>> {
    if range.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let y = targets_of(matrix)?;
    let mut acc: BTreeMap<i32, (f64, usize)> = BTreeMap::new();
    for i in range {
        let e = acc.entry(matrix.timestamps()[i].year()).or_insert((0.0, 0));
        e.0 += y[i];
        e.1 += 1;
    }
    Ok(acc
        .into_iter()
        .map(|(year, (sum, n))| (year, sum / n as f64))
        .collect())
}

/// Stage one: the least-squares constant per calendar year, i.e. the year's mean target.
pub fn fit_trend(matrix: &FeatureMatrix) -> Result<BTreeMap<i32, f64>> {
    trend_in(matrix, 0..matrix.nrows())
}

/// Accumulates AᵀA and Aᵀy over the nonzeros of each row.
fn normal_equations(
    matrix: &FeatureMatrix,
    range: Range<usize>,
    y: &[f64],
) -> (DMatrix<f64>, DVector<f64>) {
    let p = matrix.ncols();
    let mut gram = DMatrix::<f64>::zeros(p, p);
    let mut rhs = DVector::<f64>::zeros(p);
    let mut nz: Vec<(usize, f64)> = Vec::with_capacity(32);
    for (i, target) in range.zip(y) {
        nz.clear();
        nz.extend(
            matrix
                .row(i)
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(j, v)| (j, *v)),
        );
        for (a, &(j, vj)) in nz.iter().enumerate() {
            rhs[j] += vj * target;
            for &(k, vk) in &nz[a..] {
                gram[(j, k)] += vj * vk;
            }
        }
    }
    for j in 0..p {
        for k in 0..j {
            gram[(j, k)] = gram[(k, j)];
        }
    }
    (gram, rhs)
}

/// Minimum-norm solution of `gram · b = rhs` through the symmetric eigendecomposition.
fn pseudo_inverse_solve(
    eigen: &nalgebra::SymmetricEigen<f64, nalgebra::Dyn>,
    rhs: &DVector<f64>,
) -> DVector<f64> {
    let max = eigen.eigenvalues.amax();
    let tol = max * eigen.eigenvalues.len() as f64 * f64::EPSILON;
    let projected = eigen.eigenvectors.transpose() * rhs;
    let scaled = DVector::from_iterator(
        projected.len(),
        projected
            .iter()
            .zip(eigen.eigenvalues.iter())
            .map(|(c, mu)| if *mu > tol { c / mu } else { 0.0 }),
    );
    &eigen.eigenvectors * scaled
}

/// Ridge solve followed by iterated-Tikhonov sweeps until the update stalls.
fn refine(
    chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>,
    gram: &DMatrix<f64>,
    rhs: &DVector<f64>,
    max_sweeps: usize,
) -> (DVector<f64>, usize) {
    let mut b = chol.solve(rhs);
    for sweep in 1..=max_sweeps {
        let step = chol.solve(&(rhs - gram * &b));
        b += &step;
        if step.norm() <= 1e-13 * b.norm() {
            return (b, sweep);
        }
    }
    (b, max_sweeps)
}

fn coefficients_in(
    matrix: &FeatureMatrix,
    range: Range<usize>,
    detrended: &[f64],
    opts: &FitOptions,
) -> Result<CoefficientFit> {
    let n = range.len();
    if n == 0 {
        return Err(Error::Empty("training set"));
    }
    if detrended.len() != n {
        return Err(Error::InvalidValue(format!(
            "{} detrended targets for {n} rows",
            detrended.len()
        )));
    }
    let p = matrix.ncols();
    if n < p {
        log::warn!("fitting {p} coefficients from only {n} rows");
    }
    let (gram, rhs) = normal_equations(matrix, range.clone(), detrended);
    let trace = gram.trace();
    if trace <= 0.0 {
        return Err(Error::Degenerate("all-zero design matrix".into()));
    }
    let lambda = match opts.ridge {
        RidgePolicy::TraceScaled(scale) => scale * trace / p as f64,
        RidgePolicy::Fixed(l) => l,
    };
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidValue(format!("ridge weight {lambda}")));
    }

    let eigen = gram.clone().symmetric_eigen();
    let mu_max = eigen.eigenvalues.max().max(0.0);
    let mu_min = eigen.eigenvalues.min().max(0.0);
    let condition = (mu_max + lambda) / (mu_min + lambda);

    let mut regularized = gram.clone();
    for j in 0..p {
        regularized[(j, j)] += lambda;
    }
    let ridge = (condition.is_finite() && condition <= opts.max_condition)
        .then(|| regularized.cholesky())
        .flatten()
        .map(|c| refine(&c, &gram, &rhs, opts.max_refinements));
    let (b, method, refinements) = match ridge {
        Some((b, k)) => (b, SolveMethod::RidgeCholesky, k),
        None => (
            pseudo_inverse_solve(&eigen, &rhs),
            SolveMethod::MinimumNorm,
            0,
        ),
    };
    let coefficients: Vec<f64> = b.iter().copied().collect();

    let residuals: Vec<f64> = range
        .zip(detrended)
        .map(|(i, y)| y - dot(matrix.row(i), &coefficients))
        .collect();
    let residual_mean = residuals.iter().sum::<f64>() / n as f64;
    let residual_std = (residuals
        .iter()
        .map(|r| (r - residual_mean).powi(2))
        .sum::<f64>()
        / n as f64)
        .sqrt();

    Ok(CoefficientFit {
        coefficients,
        lambda,
        method,
        condition,
        refinements,
        residual_mean,
        residual_std,
    })
}

/// Stage two: solves for b given targets that already have the trend removed.
pub fn fit_coefficients(
    matrix: &FeatureMatrix,
    detrended: &[f64],
    opts: &FitOptions,
) -> Result<CoefficientFit> {
    coefficients_in(matrix, 0..matrix.nrows(), detrended, opts)
}

fn fit_in(matrix: &FeatureMatrix, range: Range<usize>, opts: &FitOptions) -> Result<FittedModel> {
    let trend = trend_in(matrix, range.clone())?;
    let y = targets_of(matrix)?;
    let detrended: Vec<f64> = range
        .clone()
        .map(|i| y[i] - trend[&matrix.timestamps()[i].year()])
        .collect();
    let fit = coefficients_in(matrix, range.clone(), &detrended, opts)?;
    Ok(FittedModel {
        trend_by_year: trend,
        coefficients: fit.coefficients,
        ridge_lambda: fit.lambda,
        solve_method: fit.method,
        train_start: matrix.timestamps()[range.start],
        train_end: matrix.timestamps()[range.end - 1],
        n_train: range.len(),
        residual_mean: fit.residual_mean,
        residual_std: fit.residual_std,
        layout: matrix.layout().clone(),
    })
}

/// Both stages on every row of `matrix`.
pub fn fit(matrix: &FeatureMatrix, opts: &FitOptions) -> Result<FittedModel> {
    fit_in(matrix, 0..matrix.nrows(), opts)
}

/// Model output over a set of rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Estimate {
    /// ŷ on the hourly grid spanning the rows; hours without a row are gaps.
    pub series: HourlySeries,
    /// ŷ per input row.
    pub predictions: Vec<f64>,
    /// Years that were not fitted and used a carried trend.
    pub extrapolated_years: BTreeSet<i32>,
}

impl Estimate {
    pub fn trend_extrapolated(&self) -> bool {
        !self.extrapolated_years.is_empty()
    }
}

fn check_layout(model: &FittedModel, matrix: &FeatureMatrix) -> Result<()> {
    if Arc::ptr_eq(&model.layout, matrix.layout()) || *model.layout == **matrix.layout() {
        Ok(())
    } else {
        Err(Error::LayoutMismatch(
            "rows were built with a different feature layout than the model".into(),
        ))
    }
}

/// ŷ_t = trend(year of t) + a_t · b for every row of `matrix`.
pub fn estimate(model: &FittedModel, matrix: &FeatureMatrix) -> Result<Estimate> {
    check_layout(model, matrix)?;
    let mut extrapolated_years = BTreeSet::new();
    let predictions: Vec<f64> = matrix
        .timestamps()
        .iter()
        .zip(matrix.rows())
        .map(|(t, row)| {
            let (v, carried) = model.predict_row(*t, row);
            if carried {
                extrapolated_years.insert(t.year());
            }
            v
        })
        .collect();
    let series = HourlySeries::from_points(
        matrix
            .timestamps()
            .iter()
            .copied()
            .zip(predictions.iter().copied()),
    )?;
    Ok(Estimate {
        series,
        predictions,
        extrapolated_years,
    })
}

/// Cadence of model refits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrainSchedule {
    pub update_period_days: u32,
    pub window_months: u32,
    /// When set, validity boundaries fall on `anchor + k · period` for integer k.
    pub anchor: Option<NaiveDate>,
}

impl Default for RetrainSchedule {
    fn default() -> Self {
        RetrainSchedule {
            update_period_days: 167,
            window_months: 26,
            anchor: None,
        }
    }
}

/// One model's training window and validity interval (half-open).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidityInterval {
    pub id: usize,
    pub train_from: Timestamp,
    pub valid_from: Timestamp,
    pub valid_to: Timestamp,
}

impl RetrainSchedule {
    fn validate(&self) -> Result<()> {
        if self.update_period_days == 0 || self.window_months == 0 {
            return Err(Error::InvalidValue(
                "update period and window length must be positive".into(),
            ));
        }
        Ok(())
    }

    /// First date a model can be valid from, given the first data hour.
    pub fn earliest_estimable(&self, data_start: Timestamp) -> NaiveDate {
        let first_day = if data_start.hour() == 0 {
            data_start.date()
        } else {
            data_start.date() + Days::new(1)
        };
        let earliest = first_day + Months::new(self.window_months);
        match self.anchor {
            None => earliest,
            Some(anchor) => {
                let period = self.update_period_days as i64;
                let gap = (earliest - anchor).num_days();
                let k = gap.div_euclid(period) + i64::from(gap.rem_euclid(period) != 0);
                anchor + chrono::Duration::days(k * period)
            }
        }
    }

    /// Validity intervals covering `[earliest estimable, data_end]`.
    pub fn intervals(
        &self,
        data_start: Timestamp,
        data_end: Timestamp,
    ) -> Result<Vec<ValidityInterval>> {
        self.validate()?;
        let first = self.earliest_estimable(data_start);
        if first > data_end.date() {
            return Err(Error::InsufficientHistory { earliest: first });
        }
        let mut out = Vec::new();
        let mut from = first;
        while from <= data_end.date() {
            let to = from + Days::new(self.update_period_days as u64);
            out.push(ValidityInterval {
                id: out.len(),
                train_from: Timestamp::midnight(from - Months::new(self.window_months)),
                valid_from: Timestamp::midnight(from),
                valid_to: Timestamp::midnight(to),
            });
            from = to;
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScheduledModel {
    pub interval: ValidityInterval,
    pub model: FittedModel,
}

/// Out-of-sample estimates from the retraining schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct RollingEstimate {
    /// ŷ from the first validity start to the last data hour.
    pub estimate: HourlySeries,
    /// Model id per slot of `estimate`.
    pub model_ids: Vec<Option<usize>>,
    pub models: Vec<ScheduledModel>,
    pub extrapolated_hours: usize,
}

/// Fits one model per validity interval and estimates each hour with the model
/// whose interval contains it. A model never sees data from its own interval.
pub fn rolling_estimate(
    table: &JoinedTable,
    cal: &CalendarConfig,
    schedule: &RetrainSchedule,
    opts: &FitOptions,
) -> Result<RollingEstimate> {
    let matrix = build_matrix(&table.rows, cal)?;
    rolling_estimate_matrix(&matrix, schedule, opts)
}

/// [`rolling_estimate`] on a prebuilt design matrix (targets required).
pub fn rolling_estimate_matrix(
    matrix: &FeatureMatrix,
    schedule: &RetrainSchedule,
    opts: &FitOptions,
) -> Result<RollingEstimate> {
    let ts = matrix.timestamps();
    let (Some(&first), Some(&last)) = (ts.first(), ts.last()) else {
        return Err(Error::Empty("feature matrix"));
    };
    let intervals = schedule.intervals(first, last)?;
    let rows_in = |from: Timestamp, to: Timestamp| {
        ts.partition_point(|t| *t < from)..ts.partition_point(|t| *t < to)
    };

    let models: Vec<ScheduledModel> = intervals
        .par_iter()
        .map(|iv| {
            let train = rows_in(iv.train_from, iv.valid_from);
            if train.is_empty() {
                return Err(Error::Data(format!(
                    "no training rows for model {} ({} to {})",
                    iv.id, iv.train_from, iv.valid_from
                )));
            }
            Ok(ScheduledModel {
                interval: *iv,
                model: fit_in(matrix, train, opts)?,
            })
        })
        .collect::<Result<_>>()?;

    let grid_start = intervals[0].valid_from;
    let len = (grid_start.hours_until(last) + 1).max(0) as usize;
    let mut values = vec![None; len];
    let mut model_ids = vec![None; len];
    let mut extrapolated_hours = 0;
    for sm in &models {
        let iv = sm.interval;
        for i in rows_in(iv.valid_from, iv.valid_to) {
            let t = ts[i];
            if sm.model.train_end >= t {
                return Err(Error::Data(format!(
                    "out-of-sample violation: model {} trained through {} estimates {t}",
                    iv.id, sm.model.train_end
                )));
            }
            let (v, carried) = sm.model.predict_row(t, matrix.row(i));
            extrapolated_hours += usize::from(carried);
            let slot = grid_start.hours_until(t) as usize;
            values[slot] = Some(v);
            model_ids[slot] = Some(iv.id);
        }
    }
    Ok(RollingEstimate {
        estimate: HourlySeries::new(grid_start, values)?,
        model_ids,
        models,
        extrapolated_hours,
    })
}
