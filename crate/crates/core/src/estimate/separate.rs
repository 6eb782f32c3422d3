//! Splitting estimated products `r_i * b_j` into nonlinearity and numerator.
//!
//! Per input, the entries for power `i` and tap `j` form a `p x (m+1)` matrix
//! `M[i][j] = r_i b_j`. Its best rank-one approximation (leading singular
//! triplet) is scaled so that `r_1 = 1`.

use nalgebra::{DMatrix, DVector};

use super::regressor::StructureOrders;
use crate::error::{Error, Result};
use crate::model::{HammersteinChannel, LinearDynamics, StaticNonlinearity};

/// Relative size of the first row of `M` below which `b` is indeterminate.
const FIRST_ROW_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SeparatedChannel {
    /// Nonlinearity coefficients `r2..rp`.
    pub r: Vec<f64>,
    /// Numerator `b0..bm`.
    pub b: Vec<f64>,
    /// `||M - r b'|| / ||M||` (Frobenius).
    pub residual_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparatedParameters {
    /// Shared denominator `a1..an`.
    pub a: Vec<f64>,
    pub channels: Vec<SeparatedChannel>,
}

/// Rank-one factorization of one product matrix.
pub fn factor_products(m: &DMatrix<f64>) -> std::result::Result<SeparatedChannel, String> {
    let total = m.norm();
    if total == 0.0 || m.row(0).norm() <= FIRST_ROW_TOL * total {
        return Err("linear-term coefficients are numerically zero".into());
    }
    if m.nrows() == 1 {
        return Ok(SeparatedChannel {
            r: Vec::new(),
            b: m.row(0).iter().copied().collect(),
            residual_ratio: 0.0,
        });
    }
    let svd = m.clone().svd(true, true);
    let k = svd
        .singular_values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .expect("non-empty matrix");
    let sigma = svd.singular_values[k];
    let u = svd.u.as_ref().expect("left vectors").column(k).into_owned();
    let v = svd.v_t.as_ref().expect("right vectors").row(k).transpose();
    let lead = u[0];
    if lead.abs() <= FIRST_ROW_TOL {
        return Err("leading singular vector has no linear component".into());
    }
    let r: DVector<f64> = &u / lead;
    let b: DVector<f64> = v * (sigma * lead);
    let residual_ratio = (m - &r * b.transpose()).norm() / total;
    Ok(SeparatedChannel {
        r: r.iter().skip(1).copied().collect(),
        b: b.iter().copied().collect(),
        residual_ratio,
    })
}

/// Separates a canonical-order parameter vector for one output.
pub fn separate_parameters(
    theta: &DVector<f64>,
    orders: &StructureOrders,
) -> Result<SeparatedParameters> {
    if theta.len() != orders.n_params() {
        return Err(Error::LengthMismatch {
            what: "parameter vector".into(),
            expected: orders.n_params(),
            found: theta.len(),
        });
    }
    let a = theta.rows(0, orders.n).iter().copied().collect();
    let mut offset = orders.n;
    let mut channels = Vec::with_capacity(orders.inputs.len());
    for (j, c) in orders.inputs.iter().enumerate() {
        let taps = c.m + 1;
        let m = DMatrix::from_fn(c.p, taps, |i, l| theta[offset + i * taps + l]);
        offset += c.p * taps;
        let ch = factor_products(&m).map_err(|reason| Error::Separation {
            channel: format!("input {}", j + 1),
            reason,
        })?;
        channels.push(ch);
    }
    Ok(SeparatedParameters { a, channels })
}

impl SeparatedParameters {
    /// Canonical-order parameter vector of the separated model.
    pub fn to_theta(&self, orders: &StructureOrders) -> DVector<f64> {
        let mut out = self.a.clone();
        for ch in &self.channels {
            let r = std::iter::once(1.0).chain(ch.r.iter().copied());
            for ri in r {
                out.extend(ch.b.iter().map(|bl| ri * bl));
            }
        }
        debug_assert_eq!(out.len(), orders.n_params());
        DVector::from_vec(out)
    }

    pub fn to_channels(&self, orders: &StructureOrders) -> Result<Vec<HammersteinChannel>> {
        self.channels
            .iter()
            .zip(&orders.inputs)
            .map(|(ch, c)| {
                Ok(HammersteinChannel::new(
                    StaticNonlinearity::new(ch.r.clone())?,
                    LinearDynamics::new(self.a.clone(), ch.b.clone(), c.d)?,
                ))
            })
            .collect()
    }
}
