use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Orders of the path from one input to the output being regressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct ChannelOrders {
    /// Numerator order.
    pub m: usize,
    /// Input delay in samples.
    pub d: usize,
    /// Nonlinearity degree, at least 1.
    pub p: usize,
}

/// Structure of one output equation: a shared denominator order and one
/// set of channel orders per input.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StructureOrders {
    pub n: usize,
    pub inputs: Vec<ChannelOrders>,
}

impl StructureOrders {
    pub fn new(n: usize, inputs: Vec<ChannelOrders>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::InvalidArgument("orders need at least one input".into()));
        }
        if let Some(j) = inputs.iter().position(|c| c.p == 0) {
            return Err(Error::InvalidArgument(format!(
                "nonlinearity degree of input {j} must be at least 1"
            )));
        }
        Ok(Self { n, inputs })
    }

    /// Same `m` and `p` on every input, with per-input delays.
    pub fn uniform(n: usize, m: usize, p: usize, delays: &[usize]) -> Result<Self> {
        Self::new(n, delays.iter().map(|&d| ChannelOrders { m, d, p }).collect())
    }

    /// Oldest sample any regressor column reaches back to.
    pub fn max_lag(&self) -> usize {
        self.inputs
            .iter()
            .map(|c| c.d + c.m)
            .chain(std::iter::once(self.n))
            .max()
            .unwrap_or(0)
    }

    pub fn n_params(&self) -> usize {
        self.n + self.inputs.iter().map(|c| c.p * (c.m + 1)).sum::<usize>()
    }

    /// Regressor columns in canonical order.
    pub fn columns(&self) -> Vec<Column> {
        let mut cols: Vec<Column> = (1..=self.n).map(|lag| Column::OutputLag { lag }).collect();
        for (input, c) in self.inputs.iter().enumerate() {
            for power in 1..=c.p {
                for tap in 0..=c.m {
                    cols.push(Column::Input {
                        input,
                        power,
                        lag: c.d + tap,
                    });
                }
            }
        }
        cols
    }
}

impl fmt::Display for StructureOrders {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n={}", self.n)?;
        for (j, c) in self.inputs.iter().enumerate() {
            write!(f, " | u{}: m={} d={} p={}", j + 1, c.m, c.d, c.p)?;
        }
        Ok(())
    }
}

/// What one regressor column holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Column {
    /// `-y(k - lag)`
    OutputLag { lag: usize },
    /// `u_input(k - lag)^power`, 0-based input index
    Input {
        input: usize,
        power: usize,
        lag: usize,
    },
}

impl Column {
    /// Value of this column at sample `k`.
    pub fn value<S: AsRef<[f64]>>(&self, inputs: &[S], y: &[f64], k: usize) -> f64 {
        match *self {
            Column::OutputLag { lag } => -y[k - lag],
            Column::Input { input, power, lag } => {
                let u = inputs[input].as_ref()[k - lag];
                u.powi(power as i32)
            }
        }
    }
}

impl fmt::Display for Column {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Column::OutputLag { lag } => write!(f, "-y(k-{lag})"),
            Column::Input { input, power: 1, lag } => write!(f, "u{}(k-{lag})", input + 1),
            Column::Input { input, power, lag } => write!(f, "u{}^{power}(k-{lag})", input + 1),
        }
    }
}

/// Regression `y = H theta` over the samples `first_sample..N`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionProblem {
    pub h: DMatrix<f64>,
    pub y: DVector<f64>,
    pub columns: Vec<Column>,
    pub first_sample: usize,
}

impl RegressionProblem {
    pub fn rows(&self) -> usize {
        self.h.nrows()
    }

    pub fn cols(&self) -> usize {
        self.h.ncols()
    }
}

/// Builds the equation-error regression for output `s` of a deviation-scale
/// dataset, using every sample from the largest lag on.
pub fn build_regressor(
    data: &Dataset,
    orders: &StructureOrders,
    output: usize,
) -> Result<RegressionProblem> {
    build_regressor_from(data, orders, output, orders.max_lag())
}

/// As [`build_regressor`], with rows starting at `first_sample`
/// (which must cover the largest lag).
pub fn build_regressor_from(
    data: &Dataset,
    orders: &StructureOrders,
    output: usize,
    first_sample: usize,
) -> Result<RegressionProblem> {
    if orders.inputs.len() != data.inputs().len() {
        return Err(Error::LengthMismatch {
            what: "channel orders per input".into(),
            expected: data.inputs().len(),
            found: orders.inputs.len(),
        });
    }
    if output >= data.outputs().len() {
        return Err(Error::InvalidArgument(format!(
            "output index {output} out of range"
        )));
    }
    regress_series(&data.input_series(), data.output(output), &orders.columns(), first_sample)
}

/// Assembles the regression for arbitrary `columns` over raw series.
pub fn regress_series<S: AsRef<[f64]>>(
    inputs: &[S],
    y: &[f64],
    columns: &[Column],
    first_sample: usize,
) -> Result<RegressionProblem> {
    let max_lag = columns
        .iter()
        .map(|c| match *c {
            Column::OutputLag { lag } | Column::Input { lag, .. } => lag,
        })
        .max()
        .unwrap_or(0);
    if first_sample < max_lag {
        return Err(Error::InvalidArgument(format!(
            "first sample {first_sample} precedes the largest lag {max_lag}"
        )));
    }
    if y.len() <= first_sample {
        return Err(Error::SeriesTooShort {
            what: format!("regression with lags up to {first_sample}"),
            needed: first_sample,
            available: y.len(),
        });
    }
    let rows = y.len() - first_sample;
    let h = DMatrix::from_fn(rows, columns.len(), |i, c| {
        columns[c].value(inputs, y, first_sample + i)
    });
    let yv = DVector::from_iterator(rows, y[first_sample..].iter().copied());
    Ok(RegressionProblem {
        h,
        y: yv,
        columns: columns.to_vec(),
        first_sample,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Signal;

    #[test]
    fn smallest_window() {
        let data = Dataset::new(
            1.0,
            vec![Signal::new("u", "", vec![0.0, 0.0, 0.0])],
            vec![Signal::new("y", "", vec![1.0, 2.0, 4.0])],
        )
        .unwrap();
        // n = 1 and a single zero-order linear input tap at delay 0
        let orders = StructureOrders::new(1, vec![ChannelOrders { m: 0, d: 0, p: 1 }]).unwrap();
        let prob = build_regressor(&data, &orders, 0).unwrap();
        assert_eq!(prob.rows(), 2);
        assert_eq!(prob.h.column(0).as_slice(), &[-1.0, -2.0]);
        assert_eq!(prob.y.as_slice(), &[2.0, 4.0]);
    }

    #[test]
    fn column_count_for_first_output_structure() {
        let orders = StructureOrders::uniform(3, 5, 2, &[1, 1]).unwrap();
        assert_eq!(orders.n_params(), 27);
        assert_eq!(orders.columns().len(), 27);
    }

    #[test]
    fn canonical_column_order() {
        let orders = StructureOrders::new(
            2,
            vec![ChannelOrders { m: 1, d: 3, p: 2 }],
        )
        .unwrap();
        let names: Vec<String> = orders.columns().iter().map(|c| c.to_string()).collect();
        assert_eq!(
            names,
            ["-y(k-1)", "-y(k-2)", "u1(k-3)", "u1(k-4)", "u1^2(k-3)", "u1^2(k-4)"]
        );
        assert_eq!(orders.max_lag(), 4);
    }

    #[test]
    fn too_short() {
        let data = Dataset::new(
            1.0,
            vec![Signal::new("u", "", vec![0.0; 4])],
            vec![Signal::new("y", "", vec![0.0; 4])],
        )
        .unwrap();
        let orders = StructureOrders::uniform(2, 5, 1, &[0]).unwrap();
        assert!(matches!(
            build_regressor(&data, &orders, 0),
            Err(Error::SeriesTooShort { .. })
        ));
    }
}
