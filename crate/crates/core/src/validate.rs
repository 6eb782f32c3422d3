//! Hold-out evaluation of an identified model.
//!
//! Datasets are in physical units. Inputs are shifted by the model's
//! operating point before simulation and the output operating point is added
//! back to the predictions, so errors are `actual - predicted` in signal
//! units.

use std::fmt::Write as _;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::MimoHammersteinModel;

/// Published hold-out statistics of the welding model: (output, mean error,
/// error standard deviation). Kept for reference; the raw data they were
/// computed from is not available.
pub const REFERENCE_STATS: [(&str, f64, f64); 2] =
    [("W_b", 0.07973, 0.07769), ("H_f", -0.07977, 0.03096)];

/// Contiguous split into `0..n_train` and `n_train..N`.
pub fn split_dataset(data: &Dataset, n_train: usize) -> Result<(Dataset, Dataset)> {
    if n_train == 0 || n_train >= data.len() {
        return Err(Error::InvalidArgument(format!(
            "training length must be in 1..{}, got {}",
            data.len(),
            n_train
        )));
    }
    Ok((data.slice(0..n_train)?, data.slice(n_train..data.len())?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionMode {
    /// Outputs simulated from inputs alone.
    #[default]
    FreeRun,
    /// Each prediction uses measured outputs up to the previous sample.
    OneStepAhead,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StdConvention {
    /// Divide by N.
    #[default]
    Population,
    /// Divide by N - 1.
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EvalOptions {
    pub mode: PredictionMode,
    pub std: StdConvention,
    /// First sample included in the statistics; earlier samples only warm up
    /// the simulation.
    pub score_from: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorStats {
    pub mean: f64,
    pub std: f64,
    pub rms: f64,
    pub max_abs: f64,
}

pub fn error_stats(errors: &[f64], convention: StdConvention) -> Result<ErrorStats> {
    let n = errors.len();
    if n == 0 {
        return Err(Error::EmptySeries("error series".into()));
    }
    let mean = errors.iter().sum::<f64>() / n as f64;
    let ss: f64 = errors.iter().map(|e| (e - mean).powi(2)).sum();
    let dof = match convention {
        StdConvention::Population => n,
        StdConvention::Sample => n.saturating_sub(1).max(1),
    };
    Ok(ErrorStats {
        mean,
        std: (ss / dof as f64).sqrt(),
        rms: (errors.iter().map(|e| e * e).sum::<f64>() / n as f64).sqrt(),
        max_abs: errors.iter().fold(0.0, |m, e| m.max(e.abs())),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputReport {
    pub name: String,
    pub mean_error: f64,
    pub std_error: f64,
    pub rms_error: f64,
    pub max_abs_error: f64,
    pub n_test: usize,
    /// Sample index of the first trace entry.
    pub first_index: usize,
    pub actual: Vec<f64>,
    pub predicted: Vec<f64>,
}

impl OutputReport {
    pub fn errors(&self) -> Vec<f64> {
        self.actual
            .iter()
            .zip(&self.predicted)
            .map(|(a, p)| a - p)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub options: EvalOptions,
    pub outputs: Vec<OutputReport>,
}

/// Free-run evaluation over the whole dataset.
pub fn evaluate(model: &MimoHammersteinModel, test: &Dataset) -> Result<ValidationReport> {
    evaluate_with(model, test, &EvalOptions::default())
}

pub fn evaluate_with(
    model: &MimoHammersteinModel,
    data: &Dataset,
    opts: &EvalOptions,
) -> Result<ValidationReport> {
    if data.inputs().len() != model.n_inputs() {
        return Err(Error::LengthMismatch {
            what: "dataset inputs vs model inputs".into(),
            expected: model.n_inputs(),
            found: data.inputs().len(),
        });
    }
    if data.outputs().len() != model.n_outputs() {
        return Err(Error::LengthMismatch {
            what: "dataset outputs vs model outputs".into(),
            expected: model.n_outputs(),
            found: data.outputs().len(),
        });
    }
    if opts.score_from >= data.len() {
        return Err(Error::InvalidArgument(format!(
            "scoring starts at sample {} but the dataset has {} samples",
            opts.score_from,
            data.len()
        )));
    }
    let op = model.operating_point();
    let inputs: Vec<Vec<f64>> = (0..model.n_inputs())
        .map(|j| data.input(j).iter().map(|v| v - op.inputs[j]).collect())
        .collect();
    let predicted = match opts.mode {
        PredictionMode::FreeRun => model.simulate(&inputs)?,
        PredictionMode::OneStepAhead => one_step_ahead(model, &inputs, data),
    };

    let outputs = predicted
        .into_iter()
        .enumerate()
        .map(|(s, dev)| {
            let actual = data.output(s)[opts.score_from..].to_vec();
            let predicted: Vec<f64> = dev[opts.score_from..]
                .iter()
                .map(|v| v + op.outputs[s])
                .collect();
            let errors: Vec<f64> = actual.iter().zip(&predicted).map(|(a, p)| a - p).collect();
            let st = error_stats(&errors, opts.std)?;
            Ok(OutputReport {
                name: model.output_names()[s].clone(),
                mean_error: st.mean,
                std_error: st.std,
                rms_error: st.rms,
                max_abs_error: st.max_abs,
                n_test: errors.len(),
                first_index: opts.score_from,
                actual,
                predicted,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ValidationReport {
        options: *opts,
        outputs,
    })
}

/// Deviation-scale one-step-ahead predictions from measured past outputs.
fn one_step_ahead(model: &MimoHammersteinModel, inputs: &[Vec<f64>], data: &Dataset) -> Vec<Vec<f64>> {
    let len = data.len();
    let op = model.operating_point();
    (0..model.n_outputs())
        .map(|s| {
            let y: Vec<f64> = data.output(s).iter().map(|v| v - op.outputs[s]).collect();
            let a = model.denominator(s);
            let v: Vec<Vec<f64>> = model.channels()[s]
                .iter()
                .zip(inputs)
                .map(|(ch, u)| u.iter().map(|&x| ch.nonlinearity.eval(x)).collect())
                .collect();
            (0..len)
                .map(|k| {
                    let mut acc = 0.0;
                    for (i, ai) in a.iter().enumerate() {
                        if k > i {
                            acc -= ai * y[k - i - 1];
                        }
                    }
                    for (ch, vj) in model.channels()[s].iter().zip(&v) {
                        let d = ch.dynamics.delay();
                        for (l, bl) in ch.dynamics.b().iter().enumerate() {
                            if k >= d + l {
                                acc += bl * vj[k - d - l];
                            }
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

impl ValidationReport {
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let mode = match self.options.mode {
            PredictionMode::FreeRun => "free-run",
            PredictionMode::OneStepAhead => "one-step-ahead",
        };
        let std = match self.options.std {
            StdConvention::Population => "population",
            StdConvention::Sample => "sample",
        };
        let _ = writeln!(out, "# validation: {mode} prediction, {std} standard deviation");
        let _ = writeln!(
            out,
            "{:<12} {:>6} {:>24} {:>24} {:>24} {:>24}",
            "output", "n", "mean_error", "std_error", "rms_error", "max_abs_error"
        );
        for o in &self.outputs {
            let _ = writeln!(
                out,
                "{:<12} {:>6} {:>24.16e} {:>24.16e} {:>24.16e} {:>24.16e}",
                o.name, o.n_test, o.mean_error, o.std_error, o.rms_error, o.max_abs_error
            );
        }
        let _ = writeln!(out, "# published reference (welding data, not reproduced here):");
        for (name, mean, std) in REFERENCE_STATS {
            let _ = writeln!(out, "#   {name}: mean_error {mean} std_error {std}");
        }
        out
    }

    /// Column-aligned trace for one output: index, actual, predicted, error.
    pub fn trace(&self, output: usize) -> String {
        let o = &self.outputs[output];
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>8} {:>24} {:>24} {:>24}",
            "index", "actual", "predicted", "error"
        );
        for (i, (a, p)) in o.actual.iter().zip(&o.predicted).enumerate() {
            let _ = writeln!(
                out,
                "{:>8} {:>24} {:>24} {:>24}",
                o.first_index + i,
                a,
                p,
                a - p
            );
        }
        out
    }
}
