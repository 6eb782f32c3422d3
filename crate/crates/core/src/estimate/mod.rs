//! Per-output parameter estimation.
//!
//! Each output `s` is regressed on its own lagged values and on lagged powers
//! of every input (equation-error form), one shared denominator per output.
//! The estimated products `r_i b_j` are then split per channel.

pub mod lstsq;
pub mod regressor;
pub mod rls;
pub mod separate;

use nalgebra::DVector;

pub use lstsq::{batch_ls, min_norm_ls, LsSolution, MinNormSolution};
pub use regressor::{
    build_regressor, build_regressor_from, ChannelOrders, Column, RegressionProblem,
    StructureOrders,
};
pub use rls::{rls_fit, EstimatorState, DEFAULT_ALPHA_SQ};
pub use separate::{separate_parameters, SeparatedChannel, SeparatedParameters};

use crate::dataset::Dataset;
use crate::error::{Error, Result, StageExt};
use crate::model::{MimoHammersteinModel, OperatingPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Orthogonal-factorization batch solve.
    Batch,
    /// Recursive least squares over the rows in time order.
    Rls,
}

/// Estimate for one output equation.
#[derive(Debug, Clone)]
pub struct OutputFit {
    pub orders: StructureOrders,
    pub theta: DVector<f64>,
    pub separated: SeparatedParameters,
    /// Mean squared equation error.
    pub loss: f64,
    /// Condition number of the equilibrated regressor (batch only).
    pub condition: Option<f64>,
}

pub fn fit_output(
    data: &Dataset,
    orders: &StructureOrders,
    output: usize,
    method: Method,
    alpha_sq: f64,
) -> Result<OutputFit> {
    let prob = build_regressor(data, orders, output)?;
    let (theta, condition) = match method {
        Method::Batch => {
            let sol = batch_ls(&prob)?;
            (sol.theta, Some(sol.condition))
        }
        Method::Rls => (rls_fit(&prob, alpha_sq)?.theta, None),
    };
    let loss = lstsq::residual_ss(&prob.h, &prob.y, &theta) / prob.rows() as f64;
    let separated = separate_parameters(&theta, orders)?;
    Ok(OutputFit {
        orders: orders.clone(),
        theta,
        separated,
        loss,
        condition,
    })
}

/// Fits every output and assembles the model. `data` is deviation scale;
/// the offsets become the model's operating point.
pub fn identify_model(
    data: &Dataset,
    orders: &[StructureOrders],
    method: Method,
    alpha_sq: f64,
    operating_point: OperatingPoint,
) -> Result<(MimoHammersteinModel, Vec<OutputFit>)> {
    if orders.len() != data.outputs().len() {
        return Err(Error::LengthMismatch {
            what: "structure orders per output".into(),
            expected: data.outputs().len(),
            found: orders.len(),
        });
    }
    let mut fits = Vec::with_capacity(orders.len());
    let mut rows = Vec::with_capacity(orders.len());
    for (s, o) in orders.iter().enumerate() {
        let name = &data.outputs()[s].name;
        let fit = fit_output(data, o, s, method, alpha_sq).stage(format!("estimate output {name}"))?;
        rows.push(fit.separated.to_channels(o)?);
        fits.push(fit);
    }
    let model = MimoHammersteinModel::new(
        data.inputs().iter().map(|s| s.name.clone()).collect(),
        data.outputs().iter().map(|s| s.name.clone()).collect(),
        rows,
        operating_point,
    )?;
    Ok((model, fits))
}
