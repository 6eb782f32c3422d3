//! Conditioning of raw series: median filtering and DC removal.

use crate::dataset::{Dataset, Signal};
use crate::error::{Error, Result};

pub const DEFAULT_MEDIAN_WINDOW: usize = 5;

/// Running median over an odd centered window; samples beyond either end
/// replicate the boundary sample.
pub fn median_filter(x: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::InvalidWindow {
            window,
            len: x.len(),
            reason: "window must be odd and positive",
        });
    }
    if window > x.len() {
        return Err(Error::InvalidWindow {
            window,
            len: x.len(),
            reason: "window longer than series",
        });
    }
    if window == 1 {
        return Ok(x.to_vec());
    }
    let half = window / 2;
    let last = x.len() - 1;
    let mut buf = vec![0.0; window];
    Ok((0..x.len())
        .map(|i| {
            for (slot, off) in buf.iter_mut().zip(0..window) {
                let idx = (i + off).saturating_sub(half).min(last);
                *slot = x[idx];
            }
            let (_, median, _) = buf.select_nth_unstable_by(half, f64::total_cmp);
            *median
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DcMode {
    SubtractMean,
    SubtractReference(f64),
}

/// Removes the DC level; returns the shifted series and the offset removed.
pub fn remove_dc(x: &[f64], mode: DcMode) -> Result<(Vec<f64>, f64)> {
    if x.is_empty() {
        return Err(Error::EmptySeries("DC removal input".into()));
    }
    let offset = match mode {
        DcMode::SubtractMean => x.iter().sum::<f64>() / x.len() as f64,
        DcMode::SubtractReference(r) => r,
    };
    Ok((x.iter().map(|v| v - offset).collect(), offset))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DcPolicy {
    /// Subtract the declared operating point, or the mean when none is declared.
    Auto,
    /// Always subtract the mean.
    Mean,
    /// Leave levels untouched.
    None,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub median_window: usize,
    pub filter_inputs: bool,
    pub filter_outputs: bool,
    pub dc: DcPolicy,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            median_window: DEFAULT_MEDIAN_WINDOW,
            filter_inputs: false,
            filter_outputs: true,
            dc: DcPolicy::Auto,
        }
    }
}

/// Deviation-scale dataset plus the offset removed from every signal.
#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub data: Dataset,
    pub input_offsets: Vec<f64>,
    pub output_offsets: Vec<f64>,
}

pub fn preprocess(data: &Dataset, cfg: &PreprocessConfig) -> Result<Preprocessed> {
    let mut input_offsets = Vec::new();
    let mut output_offsets = Vec::new();
    let condition = |sig: &Signal, filter: bool, offsets: &mut Vec<f64>| -> Result<Signal> {
        let filtered = if filter {
            median_filter(&sig.values, cfg.median_window)?
        } else {
            sig.values.clone()
        };
        let mode = match (cfg.dc, sig.operating_point) {
            (DcPolicy::None, _) => DcMode::SubtractReference(0.0),
            (DcPolicy::Auto, Some(level)) => DcMode::SubtractReference(level),
            _ => DcMode::SubtractMean,
        };
        let (values, offset) = remove_dc(&filtered, mode)?;
        offsets.push(offset);
        Ok(Signal {
            name: sig.name.clone(),
            unit: sig.unit.clone(),
            operating_point: None,
            values,
        })
    };
    let out = data.map_signals(
        |_, s| condition(s, cfg.filter_inputs, &mut input_offsets),
        |_, s| condition(s, cfg.filter_outputs, &mut output_offsets),
    )?;
    Ok(Preprocessed {
        data: out,
        input_offsets,
        output_offsets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spike_removed() {
        assert_eq!(median_filter(&[1.0, 9.0, 1.0], 3).unwrap(), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn constant_and_identity() {
        let c = vec![2.5; 7];
        assert_eq!(median_filter(&c, 5).unwrap(), c);
        let x = vec![3.0, -1.0, 4.0, 1.0, -5.0];
        assert_eq!(median_filter(&x, 1).unwrap(), x);
    }

    #[test]
    fn monotone_passes_through() {
        let x: Vec<f64> = (0..20).map(|k| (k as f64).powi(2)).collect();
        assert_eq!(median_filter(&x, 5).unwrap(), x);
    }

    #[test]
    fn idempotent_without_short_runs() {
        let x = [0.0, 0.0, 5.0, 5.0, 5.0, 1.0, 1.0, 3.0, 3.0, 3.0];
        let once = median_filter(&x, 3).unwrap();
        assert_eq!(median_filter(&once, 3).unwrap(), once);
    }

    #[test]
    fn bad_windows() {
        assert!(median_filter(&[1.0, 2.0, 3.0], 2).is_err());
        assert!(median_filter(&[1.0, 2.0, 3.0], 5).is_err());
        assert!(median_filter(&[1.0], 0).is_err());
    }

    #[test]
    fn mean_removal() {
        let (y, off) = remove_dc(&[150.0, 152.0, 148.0], DcMode::SubtractMean).unwrap();
        assert_eq!(y, vec![0.0, 2.0, -2.0]);
        assert_eq!(off, 150.0);
    }

    #[test]
    fn zero_mean_unchanged() {
        let x = vec![1.0, -1.0, 2.0, -2.0];
        let (y, off) = remove_dc(&x, DcMode::SubtractMean).unwrap();
        assert_eq!(y, x);
        assert_eq!(off, 0.0);
    }

    #[test]
    fn reference_removal() {
        let (y, off) = remove_dc(&[130.0, 170.0], DcMode::SubtractReference(150.0)).unwrap();
        assert_eq!(y, vec![-20.0, 20.0]);
        assert_eq!(off, 150.0);
        assert!(remove_dc(&[], DcMode::SubtractMean).is_err());
    }

    #[test]
    fn auto_policy_prefers_operating_point() {
        let data = Dataset::new(
            1.0,
            vec![Signal::new("I_p", "A", vec![148.0, 152.0, 154.0]).with_operating_point(150.0)],
            vec![Signal::new("W_b", "mm", vec![1.0, 2.0, 3.0])],
        )
        .unwrap();
        let cfg = PreprocessConfig {
            median_window: 1,
            ..Default::default()
        };
        let pre = preprocess(&data, &cfg).unwrap();
        assert_eq!(pre.input_offsets, vec![150.0]);
        assert_eq!(pre.output_offsets, vec![2.0]);
        assert_eq!(pre.data.input(0), &[-2.0, 2.0, 4.0]);
        assert_eq!(pre.data.output(0), &[-1.0, 0.0, 1.0]);
    }
}
