//! Structure identification: input delays, nonlinearity degree and linear
//! orders.
//!
//! Orders are searched by growing the regressor one group of columns at a
//! time. Appending columns `Phi2` to a solved problem `Phi1` only needs the
//! inverse of the small Schur complement
//!
//! ```text
//! B = (Phi2' Phi2 - Phi2' Phi1 (Phi1' Phi1)^-1 Phi1' Phi2)^-1
//! A = (Phi1' Phi1)^-1 Phi1' Phi2 B
//! theta2 = B Phi2' (y - Phi1 theta0)
//! theta1 = theta0 - A Phi2' (y - Phi1 theta0)
//! ```
//!
//! and the selected order is the first at which the loss stops dropping by
//! more than the plateau threshold.

use std::collections::HashMap;
use std::fmt::Write as _;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::estimate::lstsq::{equilibrate, min_norm_ls, residual_ss, RANK_TOL};
use crate::estimate::regressor::regress_series;
use crate::estimate::{ChannelOrders, Column, RegressionProblem, StructureOrders};

pub const DEFAULT_PLATEAU_THRESHOLD: f64 = 0.02;

/// Losses below this fraction of the output power count as an exact fit.
pub const LOSS_FLOOR_REL: f64 = 1e-10;

/// Squared distance (in unit-norm column coordinates) below which appended
/// columns count as lying in the span of the existing ones.
const SCHUR_PIVOT_TOL: f64 = 1e-16;

// ---------------------------------------------------------------------------
// Delay
// ---------------------------------------------------------------------------

/// Settings of the delay detector.
///
/// The detector fits an auxiliary equation-error model with
/// `denominator_order` output lags and input taps `0..=max_lag` (powers up to
/// `powers`), then reports the first tap whose coefficient is significant.
/// The normalized cross-correlation is reported alongside as a confidence
/// check.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayProbe {
    pub max_lag: usize,
    pub denominator_order: usize,
    pub powers: usize,
    pub t_crit: f64,
}

impl DelayProbe {
    pub fn new(max_lag: usize) -> Self {
        Self {
            max_lag,
            denominator_order: max_lag,
            powers: 3,
            t_crit: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayEstimate {
    pub delay: usize,
    /// Largest |t| over powers at the selected tap.
    pub t_statistic: f64,
    /// Lag maximizing the normalized cross-correlation, and its magnitude.
    pub correlation_lag: usize,
    pub peak_correlation: f64,
    /// `2 / sqrt(N)`.
    pub significance_bound: f64,
    pub low_confidence: bool,
}

fn centered(x: &[f64]) -> Vec<f64> {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| v - mean).collect()
}

/// Normalized cross-correlation of mean-removed `u` and `y` at `lag >= 0`
/// (`y` lagging `u`).
pub fn cross_correlation(u: &[f64], y: &[f64], lag: usize) -> f64 {
    let u = centered(u);
    let y = centered(y);
    let denom = (u.iter().map(|v| v * v).sum::<f64>() * y.iter().map(|v| v * v).sum::<f64>()).sqrt();
    if denom == 0.0 || lag >= u.len() {
        return 0.0;
    }
    u[..u.len() - lag].iter().zip(&y[lag..]).map(|(a, b)| a * b).sum::<f64>() / denom
}

/// Delay of a single input-output pair with default probe settings.
pub fn estimate_delay(u: &[f64], y: &[f64], max_lag: usize) -> Result<DelayEstimate> {
    Ok(estimate_delays(&[u], y, &DelayProbe::new(max_lag))?.remove(0))
}

/// Delays of every input into `y`, estimated jointly.
pub fn estimate_delays<S: AsRef<[f64]>>(
    inputs: &[S],
    y: &[f64],
    probe: &DelayProbe,
) -> Result<Vec<DelayEstimate>> {
    let n = y.len();
    if inputs.is_empty() {
        return Err(Error::InvalidArgument("no inputs for delay estimation".into()));
    }
    for u in inputs {
        if u.as_ref().len() != n {
            return Err(Error::LengthMismatch {
                what: "delay estimation input".into(),
                expected: n,
                found: u.as_ref().len(),
            });
        }
    }
    if probe.max_lag >= n / 4 {
        return Err(Error::SeriesTooShort {
            what: format!("delay search up to lag {}", probe.max_lag),
            needed: 4 * probe.max_lag + 3,
            available: n,
        });
    }
    if probe.powers == 0 {
        return Err(Error::InvalidArgument("probe needs at least one power".into()));
    }
    let y_c = centered(y);
    if y_c.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroVariance("output series is constant".into()));
    }
    let u_c: Vec<Vec<f64>> = inputs.iter().map(|u| centered(u.as_ref())).collect();
    if let Some(j) = u_c.iter().position(|u| u.iter().all(|&v| v == 0.0)) {
        return Err(Error::ZeroVariance(format!("input {} is constant", j + 1)));
    }

    let mut columns: Vec<Column> = (1..=probe.denominator_order)
        .map(|lag| Column::OutputLag { lag })
        .collect();
    for input in 0..inputs.len() {
        for power in 1..=probe.powers {
            for lag in 0..=probe.max_lag {
                columns.push(Column::Input { input, power, lag });
            }
        }
    }
    let first = probe.max_lag.max(probe.denominator_order);
    let prob = regress_series(&u_c, &y_c, &columns, first)?;
    let sol = min_norm_ls(&prob.h, &prob.y)?;
    let index: HashMap<Column, usize> = columns.iter().enumerate().map(|(i, c)| (*c, i)).collect();
    let bound = 2.0 / (n as f64).sqrt();

    Ok((0..inputs.len())
        .map(|input| {
            let mut t_best = vec![0.0f64; probe.max_lag + 1];
            let mut significant = vec![false; probe.max_lag + 1];
            for power in 1..=probe.powers {
                let idx: Vec<usize> = (0..=probe.max_lag)
                    .map(|lag| index[&Column::Input { input, power, lag }])
                    .collect();
                let scale = idx.iter().fold(0.0f64, |m, &i| m.max(sol.theta[i].abs()));
                for (lag, &i) in idx.iter().enumerate() {
                    let coef = sol.theta[i].abs();
                    let se = sol.std_errors[i];
                    let t = if se > 0.0 {
                        coef / se
                    } else if coef > 0.0 {
                        f64::INFINITY
                    } else {
                        0.0
                    };
                    t_best[lag] = t_best[lag].max(t);
                    if t > probe.t_crit && coef > 1e-6 * scale {
                        significant[lag] = true;
                    }
                }
            }
            let (correlation_lag, peak_correlation) = (0..=probe.max_lag)
                .map(|lag| (lag, cross_correlation(&u_c[input], &y_c, lag).abs()))
                .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            let first_sig = significant.iter().position(|&s| s);
            let delay = first_sig.unwrap_or(correlation_lag);
            DelayEstimate {
                delay,
                t_statistic: t_best[delay],
                correlation_lag,
                peak_correlation,
                significance_bound: bound,
                low_confidence: first_sig.is_none() || peak_correlation < bound,
            }
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Column augmentation
// ---------------------------------------------------------------------------

/// Correction operators of one augmentation step, in the units of the
/// unscaled regressor.
#[derive(Debug, Clone)]
pub struct PartitionedUpdate {
    pub a_mat: DMatrix<f64>,
    pub b_mat: DMatrix<f64>,
    pub phi2: DMatrix<f64>,
}

/// Least-squares solution that can absorb new columns without refactoring.
///
/// Internally works on unit-norm columns and keeps `(H'H)^-1` of the
/// equilibrated regressor.
#[derive(Debug, Clone)]
pub struct AugmentedLs {
    h: DMatrix<f64>,
    norms: DVector<f64>,
    y: DVector<f64>,
    theta: DVector<f64>,
    gram_inv: DMatrix<f64>,
    columns: Vec<Column>,
}

impl AugmentedLs {
    /// Solves `prob` from scratch.
    pub fn new(prob: &RegressionProblem) -> Result<Self> {
        let sol = crate::estimate::batch_ls(prob)?;
        Self::with_solution(prob, &sol.theta)
    }

    /// Adopts `theta` as the solution of `prob` and factors the Gram inverse.
    pub fn with_solution(prob: &RegressionProblem, theta: &DVector<f64>) -> Result<Self> {
        if theta.len() != prob.cols() {
            return Err(Error::LengthMismatch {
                what: "parameter vector".into(),
                expected: prob.cols(),
                found: theta.len(),
            });
        }
        let (h, norms) = equilibrate(&prob.h);
        let r = h.clone().qr().r();
        if let Some(j) = (0..r.ncols()).find(|&j| r[(j, j)].abs() <= RANK_TOL) {
            return Err(Error::RankDeficient {
                rank: j,
                columns: prob.cols(),
                condition: f64::INFINITY,
                offending: vec![prob.columns[j].to_string()],
            });
        }
        let eye = DMatrix::identity(r.ncols(), r.ncols());
        let r_inv = r
            .solve_upper_triangular(&eye)
            .ok_or_else(|| Error::NonFinite("triangular inverse".into()))?;
        let gram_inv = &r_inv * r_inv.transpose();
        Ok(Self {
            h,
            theta: theta.component_mul(&norms),
            norms,
            y: prob.y.clone(),
            gram_inv,
            columns: prob.columns.clone(),
        })
    }

    /// Current solution in the units of the unscaled regressor.
    pub fn theta(&self) -> DVector<f64> {
        self.theta.component_div(&self.norms)
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    /// Mean squared residual.
    pub fn loss(&self) -> f64 {
        residual_ss(&self.h, &self.y, &self.theta) / self.h.nrows() as f64
    }

    /// Appends `new_cols` (described by `columns`) and updates the solution.
    pub fn augment(&mut self, new_cols: &DMatrix<f64>, columns: &[Column]) -> Result<PartitionedUpdate> {
        if new_cols.nrows() != self.h.nrows() {
            return Err(Error::LengthMismatch {
                what: "rows of appended columns".into(),
                expected: self.h.nrows(),
                found: new_cols.nrows(),
            });
        }
        if columns.len() != new_cols.ncols() {
            return Err(Error::LengthMismatch {
                what: "appended column descriptors".into(),
                expected: new_cols.ncols(),
                found: columns.len(),
            });
        }
        if new_cols.ncols() == 0 {
            return Err(Error::InvalidArgument("nothing to append".into()));
        }
        if let Some(j) = new_cols.column_iter().position(|c| c.norm() == 0.0) {
            return Err(Error::SingularAugmentation(format!(
                "appended column {} is identically zero",
                describe(columns, j)
            )));
        }
        let (phi2, norms2) = equilibrate(new_cols);
        let k = self.h.ncols();
        let q = phi2.ncols();

        // W = (H'H)^-1 H' Phi2; E = Phi2 - H W is the part of Phi2 outside span(H)
        let c = self.h.tr_mul(&phi2);
        let w = &self.gram_inv * &c;
        let e = &phi2 - &self.h * &w;
        let mut schur = e.tr_mul(&e);
        schur = (&schur + schur.transpose()) * 0.5;
        let chol = Cholesky::new(schur.clone()).ok_or_else(|| {
            Error::SingularAugmentation("Schur complement is not positive definite".into())
        })?;
        let l = chol.l();
        if let Some(j) = (0..q).find(|&j| l[(j, j)].powi(2) <= SCHUR_PIVOT_TOL) {
            return Err(Error::SingularAugmentation(format!(
                "appended column {} is numerically dependent",
                describe(columns, j)
            )));
        }
        let b = chol.inverse();
        let residual = &self.y - &self.h * &self.theta;
        let g = phi2.tr_mul(&residual);
        let theta2 = &b * &g;
        let a = &w * &b;
        let theta1 = &self.theta - &a * &g;

        let wb = &w * &b;
        let mut gram = DMatrix::zeros(k + q, k + q);
        gram.view_mut((0, 0), (k, k))
            .copy_from(&(&self.gram_inv + &wb * w.transpose()));
        gram.view_mut((0, k), (k, q)).copy_from(&(-&wb));
        gram.view_mut((k, 0), (q, k)).copy_from(&(-wb.transpose()));
        gram.view_mut((k, k), (q, q)).copy_from(&b);
        self.gram_inv = (&gram + gram.transpose()) * 0.5;

        let mut h = self.h.clone().resize_horizontally(k + q, 0.0);
        h.view_mut((0, k), (self.h.nrows(), q)).copy_from(&phi2);
        self.h = h;
        let mut theta = DVector::zeros(k + q);
        theta.rows_mut(0, k).copy_from(&theta1);
        theta.rows_mut(k, q).copy_from(&theta2);
        self.theta = theta;
        let old_norms = self.norms.clone();
        self.norms = old_norms.clone().resize_vertically(k + q, 0.0);
        self.norms.rows_mut(k, q).copy_from(&norms2);
        self.columns.extend_from_slice(columns);

        let inv1 = old_norms.map(|v| 1.0 / v);
        let inv2 = norms2.map(|v| 1.0 / v);
        let a_mat = DMatrix::from_diagonal(&inv1) * a * DMatrix::from_diagonal(&inv2);
        let b_mat = DMatrix::from_diagonal(&inv2) * &b * DMatrix::from_diagonal(&inv2);
        Ok(PartitionedUpdate {
            a_mat,
            b_mat,
            phi2: new_cols.clone(),
        })
    }
}

fn describe(columns: &[Column], j: usize) -> String {
    columns
        .get(j)
        .map(|c| c.to_string())
        .unwrap_or_else(|| format!("#{j}"))
}

/// Least-squares solution of `[H Phi2]` given the solution `theta_hat` of
/// `H` alone; returns the stacked parameters and the new loss.
pub fn augment_columns(
    prob: &RegressionProblem,
    theta_hat: &DVector<f64>,
    new_cols: &DMatrix<f64>,
) -> Result<(DVector<f64>, f64)> {
    let mut ls = AugmentedLs::with_solution(prob, theta_hat)?;
    let labels: Vec<Column> = (0..new_cols.ncols())
        .map(|i| Column::OutputLag { lag: usize::MAX - i })
        .collect();
    ls.augment(new_cols, &labels)?;
    Ok((ls.theta(), ls.loss()))
}

/// Mean squared equation error `||y - H theta||^2 / rows`.
pub fn loss_j(prob: &RegressionProblem, theta: &DVector<f64>) -> f64 {
    residual_ss(&prob.h, &prob.y, theta) / prob.rows() as f64
}

// ---------------------------------------------------------------------------
// Order search
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchBounds {
    pub n_max: usize,
    pub m_max: usize,
    pub p_max: usize,
}

impl Default for SearchBounds {
    fn default() -> Self {
        Self {
            n_max: 5,
            m_max: 5,
            p_max: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepStage {
    /// Nonlinearity degree at the largest linear orders.
    Degree,
    /// Linear orders at the selected degree.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    /// Fresh orthogonal factorization.
    Direct,
    /// Partitioned update from the previous candidate.
    Augmented,
    /// Minimum-norm solve of a rank-deficient regressor.
    MinNorm,
}

#[derive(Debug, Clone)]
pub struct Candidate {
    pub stage: SweepStage,
    /// 0 for the first degree/linear sweep pair, then one per refinement.
    pub pass: usize,
    pub orders: StructureOrders,
    pub loss: f64,
    /// `(J_prev - J) / J_prev` relative to the previous candidate of the same chain.
    pub relative_improvement: Option<f64>,
    /// Parameters in canonical column order.
    pub theta: DVector<f64>,
    pub solver: Solver,
}

#[derive(Debug, Clone)]
pub struct StructureSearchResult {
    pub output_name: String,
    pub delays: Vec<usize>,
    pub candidates: Vec<Candidate>,
    pub selected: StructureOrders,
    pub plateau_threshold: f64,
    pub loss_floor: f64,
}

/// Index at which a loss sequence stops improving.
pub fn plateau_index(losses: &[f64], threshold: f64, floor: f64) -> usize {
    for i in 0..losses.len().saturating_sub(1) {
        if losses[i] <= floor {
            return i;
        }
        if (losses[i] - losses[i + 1]) / losses[i] < threshold {
            return i;
        }
    }
    losses.len().saturating_sub(1)
}

/// Samples needed before a search with these bounds can run.
pub fn required_samples(bounds: &SearchBounds, delays: &[usize]) -> usize {
    let (first, params) = search_window(bounds, delays);
    first + params + 1
}

fn search_window(bounds: &SearchBounds, delays: &[usize]) -> (usize, usize) {
    let first = delays
        .iter()
        .map(|d| d + bounds.m_max)
        .chain(std::iter::once(bounds.n_max))
        .max()
        .unwrap_or(0);
    let params = bounds.n_max + delays.len() * bounds.p_max * (bounds.m_max + 1);
    (first, params)
}

struct ChainStep {
    columns: Vec<Column>,
    loss: f64,
    theta: DVector<f64>,
    solver: Solver,
}

/// Solves a nested sequence of regressors sharing one sample window.
fn run_chain<S: AsRef<[f64]>>(
    inputs: &[S],
    y: &[f64],
    first_sample: usize,
    base: Vec<Column>,
    steps: Vec<Vec<Column>>,
) -> Result<Vec<ChainStep>> {
    let mut out = Vec::with_capacity(steps.len() + 1);
    let base_prob = regress_series(inputs, y, &base, first_sample)?;
    let mut chain = match AugmentedLs::new(&base_prob) {
        Ok(ls) => {
            out.push(ChainStep {
                columns: base.clone(),
                loss: ls.loss(),
                theta: ls.theta(),
                solver: Solver::Direct,
            });
            Some(ls)
        }
        Err(Error::RankDeficient { .. }) => {
            out.push(min_norm_step(&base_prob)?);
            None
        }
        Err(e) => return Err(e),
    };
    let mut cols = base;
    for step in steps {
        cols.extend_from_slice(&step);
        if let Some(ls) = chain.as_mut() {
            let new = regress_series(inputs, y, &step, first_sample)?;
            match ls.augment(&new.h, &step) {
                Ok(_) => {
                    out.push(ChainStep {
                        columns: cols.clone(),
                        loss: ls.loss(),
                        theta: ls.theta(),
                        solver: Solver::Augmented,
                    });
                    continue;
                }
                Err(Error::SingularAugmentation(_)) => chain = None,
                Err(e) => return Err(e),
            }
        }
        let prob = regress_series(inputs, y, &cols, first_sample)?;
        out.push(min_norm_step(&prob)?);
    }
    Ok(out)
}

fn min_norm_step(prob: &RegressionProblem) -> Result<ChainStep> {
    let sol = min_norm_ls(&prob.h, &prob.y)?;
    Ok(ChainStep {
        columns: prob.columns.clone(),
        loss: sol.rss / prob.rows() as f64,
        theta: sol.theta,
        solver: Solver::MinNorm,
    })
}

fn canonical_theta(step: &ChainStep, orders: &StructureOrders) -> DVector<f64> {
    let by_col: HashMap<Column, f64> = step
        .columns
        .iter()
        .copied()
        .zip(step.theta.iter().copied())
        .collect();
    DVector::from_iterator(
        orders.n_params(),
        orders.columns().iter().map(|c| by_col[c]),
    )
}

fn power_group(delays: &[usize], m: usize, power: usize) -> Vec<Column> {
    let mut cols = Vec::new();
    for (input, &d) in delays.iter().enumerate() {
        for tap in 0..=m {
            cols.push(Column::Input {
                input,
                power,
                lag: d + tap,
            });
        }
    }
    cols
}

fn tap_group(delays: &[usize], p: usize, tap: usize) -> Vec<Column> {
    let mut cols = Vec::new();
    for (input, &d) in delays.iter().enumerate() {
        for power in 1..=p {
            cols.push(Column::Input {
                input,
                power,
                lag: d + tap,
            });
        }
    }
    cols
}

fn push_chain(
    into: &mut Vec<Candidate>,
    stage: SweepStage,
    pass: usize,
    steps: &[ChainStep],
    orders: impl Fn(usize) -> StructureOrders,
) -> Vec<f64> {
    let mut losses = Vec::with_capacity(steps.len());
    for (i, step) in steps.iter().enumerate() {
        let o = orders(i);
        let relative_improvement = losses
            .last()
            .map(|prev: &f64| if *prev > 0.0 { (prev - step.loss) / prev } else { 0.0 });
        into.push(Candidate {
            stage,
            pass,
            theta: canonical_theta(step, &o),
            orders: o,
            loss: step.loss,
            relative_improvement,
            solver: step.solver,
        });
        losses.push(step.loss);
    }
    losses
}

/// Upper limit on degree re-checks after the first degree/linear sweep pair.
const MAX_REFINE_PASSES: usize = 3;

struct Sweep<'a, S> {
    inputs: &'a [S],
    y: &'a [f64],
    delays: &'a [usize],
    first: usize,
    threshold: f64,
    floor: f64,
}

impl<S: AsRef<[f64]>> Sweep<'_, S> {
    /// Degree sweep `p = 1..=p_max` at fixed linear orders.
    fn degree(&self, out: &mut Vec<Candidate>, pass: usize, n: usize, m: usize, p_max: usize) -> Result<usize> {
        let base = StructureOrders::uniform(n, m, 1, self.delays)?.columns();
        let steps = (2..=p_max).map(|p| power_group(self.delays, m, p)).collect();
        let chain = run_chain(self.inputs, self.y, self.first, base, steps)?;
        let losses = push_chain(out, SweepStage::Degree, pass, &chain, |i| {
            StructureOrders::uniform(n, m, i + 1, self.delays).expect("valid orders")
        });
        Ok(plateau_index(&losses, self.threshold, self.floor) + 1)
    }

    /// `m` swept inside each `n`; `n` chosen over the per-`n` plateau losses.
    fn linear(
        &self,
        out: &mut Vec<Candidate>,
        pass: usize,
        p: usize,
        n_max: usize,
        m_max: usize,
    ) -> Result<(usize, usize)> {
        let mut best_per_n = Vec::with_capacity(n_max + 1);
        for n in 0..=n_max {
            let base = StructureOrders::uniform(n, 0, p, self.delays)?.columns();
            let steps = (1..=m_max).map(|m| tap_group(self.delays, p, m)).collect();
            let chain = run_chain(self.inputs, self.y, self.first, base, steps)?;
            let losses = push_chain(out, SweepStage::Linear, pass, &chain, |m| {
                StructureOrders::uniform(n, m, p, self.delays).expect("valid orders")
            });
            let m = plateau_index(&losses, self.threshold, self.floor);
            best_per_n.push((m, losses[m]));
        }
        let n_losses: Vec<f64> = best_per_n.iter().map(|b| b.1).collect();
        let n = plateau_index(&n_losses, self.threshold, self.floor);
        Ok((n, best_per_n[n].0))
    }
}

/// Searches nonlinearity degree, then linear orders, for output `output` of a
/// deviation-scale dataset with known input delays.
pub fn select_structure(
    data: &Dataset,
    output: usize,
    delays: &[usize],
    bounds: &SearchBounds,
    plateau_threshold: f64,
) -> Result<StructureSearchResult> {
    if output >= data.outputs().len() {
        return Err(Error::InvalidArgument(format!("output index {output} out of range")));
    }
    let mut res = select_structure_series(
        &data.input_series(),
        data.output(output),
        delays,
        bounds,
        plateau_threshold,
    )?;
    res.output_name = data.outputs()[output].name.clone();
    Ok(res)
}

pub fn select_structure_series<S: AsRef<[f64]>>(
    inputs: &[S],
    y: &[f64],
    delays: &[usize],
    bounds: &SearchBounds,
    plateau_threshold: f64,
) -> Result<StructureSearchResult> {
    if delays.len() != inputs.len() {
        return Err(Error::LengthMismatch {
            what: "delays per input".into(),
            expected: inputs.len(),
            found: delays.len(),
        });
    }
    if bounds.n_max == 0 || bounds.m_max == 0 || bounds.p_max == 0 {
        return Err(Error::InvalidArgument(
            "search bounds must be at least 1 in every order".into(),
        ));
    }
    if !(plateau_threshold.is_finite() && plateau_threshold >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "plateau threshold must be non-negative, got {plateau_threshold}"
        )));
    }
    let (first, params) = search_window(bounds, delays);
    if y.len() <= first + params {
        return Err(Error::SeriesTooShort {
            what: format!(
                "structure search (lags up to {first}, up to {params} parameters)"
            ),
            needed: first + params,
            available: y.len(),
        });
    }
    let power: f64 = y[first..].iter().map(|v| v * v).sum::<f64>() / (y.len() - first) as f64;
    let floor = LOSS_FLOOR_REL * power;
    let mut candidates = Vec::new();

    let sweep = Sweep {
        inputs,
        y,
        delays,
        first,
        threshold: plateau_threshold,
        floor,
    };
    // degree at the largest linear orders, then linear orders at that degree.
    // The degree is re-checked at the selected linear orders: surplus columns
    // at the largest orders can fit noise by more than the threshold, while a
    // higher degree at smaller orders only absorbs unmodelled dynamics, so the
    // re-check may lower p but never raise it.
    let mut p = sweep.degree(&mut candidates, 0, bounds.n_max, bounds.m_max, bounds.p_max)?;
    let (mut n, mut m) = sweep.linear(&mut candidates, 0, p, bounds.n_max, bounds.m_max)?;
    for pass in 1..=MAX_REFINE_PASSES {
        let again = sweep.degree(&mut candidates, pass, n, m, bounds.p_max)?;
        if again >= p {
            break;
        }
        p = again;
        (n, m) = sweep.linear(&mut candidates, pass, p, bounds.n_max, bounds.m_max)?;
    }

    Ok(StructureSearchResult {
        output_name: String::new(),
        delays: delays.to_vec(),
        candidates,
        selected: StructureOrders::new(
            n,
            delays.iter().map(|&d| ChannelOrders { m, d, p }).collect(),
        )?,
        plateau_threshold,
        loss_floor: floor,
    })
}

impl StructureSearchResult {
    /// Plain-text table of every candidate, followed by the selection.
    pub fn report(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# structure search: output {}", self.output_name);
        let delays: Vec<String> = self
            .delays
            .iter()
            .enumerate()
            .map(|(j, d)| format!("u{}={}", j + 1, d))
            .collect();
        let _ = writeln!(out, "# delays: {}", delays.join(" "));
        let _ = writeln!(
            out,
            "# plateau_threshold: {}  loss_floor: {:e}",
            self.plateau_threshold, self.loss_floor
        );
        let _ = writeln!(
            out,
            "{:<4} {:<7} {:>3} {:>3} {:>3} {:>24} {:>16} {:<9}",
            "pass", "stage", "n", "m", "p", "J", "rel_improvement", "solver"
        );
        for c in &self.candidates {
            let stage = match c.stage {
                SweepStage::Degree => "degree",
                SweepStage::Linear => "linear",
            };
            let first = &c.orders.inputs[0];
            let imp = c
                .relative_improvement
                .map(|v| format!("{v:.6e}"))
                .unwrap_or_else(|| "-".into());
            let solver = match c.solver {
                Solver::Direct => "direct",
                Solver::Augmented => "augmented",
                Solver::MinNorm => "min-norm",
            };
            let _ = writeln!(
                out,
                "{:<4} {:<7} {:>3} {:>3} {:>3} {:>24.16e} {:>16} {:<9}",
                c.pass, stage, c.orders.n, first.m, first.p, c.loss, imp, solver
            );
        }
        let _ = writeln!(out, "selected: {}", self.selected);
        out
    }
}
