use crate::error::{Error, Result};

/// One named, uniformly sampled series.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    pub name: String,
    pub unit: String,
    /// Nominal level of the signal, when declared.
    pub operating_point: Option<f64>,
    pub values: Vec<f64>,
}

impl Signal {
    pub fn new(name: impl Into<String>, unit: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            unit: unit.into(),
            operating_point: None,
            values,
        }
    }

    pub fn with_operating_point(mut self, level: f64) -> Self {
        self.operating_point = Some(level);
        self
    }
}

/// Multi-input multi-output time series sharing one sample period.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    sample_period: f64,
    inputs: Vec<Signal>,
    outputs: Vec<Signal>,
}

impl Dataset {
    pub fn new(sample_period: f64, inputs: Vec<Signal>, outputs: Vec<Signal>) -> Result<Self> {
        if !(sample_period.is_finite() && sample_period > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sample period must be positive, got {sample_period}"
            )));
        }
        if inputs.is_empty() || outputs.is_empty() {
            return Err(Error::InvalidArgument(
                "dataset needs at least one input and one output".into(),
            ));
        }
        let len = inputs[0].values.len();
        if len == 0 {
            return Err(Error::EmptySeries(inputs[0].name.clone()));
        }
        for sig in inputs.iter().chain(&outputs) {
            if sig.values.len() != len {
                return Err(Error::LengthMismatch {
                    what: format!("series '{}'", sig.name),
                    expected: len,
                    found: sig.values.len(),
                });
            }
            if sig.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("series '{}'", sig.name)));
            }
        }
        Ok(Self {
            sample_period,
            inputs,
            outputs,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs[0].values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    pub fn inputs(&self) -> &[Signal] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[Signal] {
        &self.outputs
    }

    pub fn input(&self, j: usize) -> &[f64] {
        &self.inputs[j].values
    }

    pub fn output(&self, s: usize) -> &[f64] {
        &self.outputs[s].values
    }

    pub fn input_series(&self) -> Vec<&[f64]> {
        self.inputs.iter().map(|s| s.values.as_slice()).collect()
    }

    /// Samples `range` of every signal, metadata unchanged.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.len() {
            return Err(Error::InvalidArgument(format!(
                "slice {}..{} out of bounds for dataset of length {}",
                range.start,
                range.end,
                self.len()
            )));
        }
        let cut = |sig: &Signal| Signal {
            values: sig.values[range.clone()].to_vec(),
            ..sig.clone()
        };
        Ok(Self {
            sample_period: self.sample_period,
            inputs: self.inputs.iter().map(cut).collect(),
            outputs: self.outputs.iter().map(cut).collect(),
        })
    }

    /// Replaces the values of every signal, keeping names and units.
    pub(crate) fn map_signals(
        &self,
        mut input: impl FnMut(usize, &Signal) -> Result<Signal>,
        mut output: impl FnMut(usize, &Signal) -> Result<Signal>,
    ) -> Result<Self> {
        let inputs = self
            .inputs
            .iter()
            .enumerate()
            .map(|(j, s)| input(j, s))
            .collect::<Result<Vec<_>>>()?;
        let outputs = self
            .outputs
            .iter()
            .enumerate()
            .map(|(s, sig)| output(s, sig))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.sample_period, inputs, outputs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ragged_series_rejected() {
        let err = Dataset::new(
            1.0,
            vec![Signal::new("u", "A", vec![1.0, 2.0])],
            vec![Signal::new("y", "mm", vec![1.0])],
        )
        .unwrap_err();
        assert!(matches!(err, Error::LengthMismatch { .. }));
    }

    #[test]
    fn non_positive_period_rejected() {
        let err = Dataset::new(
            0.0,
            vec![Signal::new("u", "A", vec![1.0])],
            vec![Signal::new("y", "mm", vec![1.0])],
        );
        assert!(err.is_err());
    }
}
