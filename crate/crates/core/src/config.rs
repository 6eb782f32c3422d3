//! Run configuration for the command-line tool.
//!
//! Every field has a default, so an empty file (or no file) is a valid
//! configuration. The defaults describe the welding experiment: peak current
//! and wire feed speed driving bead width and height, 1070 samples at 1 s,
//! the first 1000 used for identification.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{Method, StructureOrders, DEFAULT_ALPHA_SQ};
use crate::excitation::{AmplitudeGrid, DEFAULT_SEED};
use crate::preprocess::PreprocessConfig;
use crate::structure::{SearchBounds, DEFAULT_PLATEAU_THRESHOLD};
use crate::validate::{PredictionMode, StdConvention};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
    pub excitation: ExcitationConfig,
    pub preprocess: PreprocessConfig,
    pub structure: StructureConfig,
    pub estimate: EstimateConfig,
    pub validate: ValidateConfig,
    pub files: FileNames,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub samples: usize,
    pub n_train: usize,
    pub sample_period: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExcitationConfig {
    pub seed: u64,
    /// Samples each drawn level is held for.
    pub hold: usize,
    pub input: Vec<InputGrid>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputGrid {
    pub name: String,
    #[serde(default)]
    pub unit: String,
    pub low: f64,
    pub high: f64,
    pub step: f64,
    pub operating_point: f64,
}

impl InputGrid {
    pub fn grid(&self) -> Result<AmplitudeGrid> {
        AmplitudeGrid::new(self.low, self.high, self.step)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StructureConfig {
    pub n_max: usize,
    pub m_max: usize,
    pub p_max: usize,
    pub max_lag: usize,
    pub plateau_threshold: f64,
    /// Input delays to use instead of estimating them.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delays: Option<Vec<usize>>,
    /// Orders per output to use instead of searching.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed: Option<Vec<FixedOrders>>,
}

impl StructureConfig {
    pub fn bounds(&self) -> SearchBounds {
        SearchBounds {
            n_max: self.n_max,
            m_max: self.m_max,
            p_max: self.p_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedOrders {
    pub n: usize,
    pub channel: Vec<crate::estimate::ChannelOrders>,
}

impl FixedOrders {
    pub fn orders(&self) -> Result<StructureOrders> {
        StructureOrders::new(self.n, self.channel.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    pub method: Method,
    pub alpha_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateConfig {
    pub mode: PredictionMode,
    pub std: StdConvention,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileNames {
    pub model: String,
    pub structure_report: String,
    pub validation_report: String,
    /// Trace file name per output; `{output}` is replaced by the output name.
    pub trace: String,
    /// Excitation file name per input; `{input}` is replaced by the input name.
    pub excitation: String,
    pub simulation: String,
    pub resolved_config: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            samples: 1070,
            n_train: 1000,
            sample_period: 1.0,
        }
    }
}

impl Default for ExcitationConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            hold: 1,
            input: vec![
                InputGrid {
                    name: "I_p".into(),
                    unit: "A".into(),
                    low: 130.0,
                    high: 170.0,
                    step: 2.0,
                    operating_point: 150.0,
                },
                InputGrid {
                    name: "V_f".into(),
                    unit: "m/min".into(),
                    low: 4.0,
                    high: 10.0,
                    step: 1.0,
                    operating_point: 7.0,
                },
            ],
        }
    }
}

impl Default for StructureConfig {
    fn default() -> Self {
        Self {
            n_max: SearchBounds::default().n_max,
            m_max: SearchBounds::default().m_max,
            p_max: SearchBounds::default().p_max,
            max_lag: 10,
            plateau_threshold: DEFAULT_PLATEAU_THRESHOLD,
            delays: None,
            fixed: None,
        }
    }
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            method: Method::Batch,
            alpha_sq: DEFAULT_ALPHA_SQ,
        }
    }
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self {
            mode: PredictionMode::FreeRun,
            std: StdConvention::Population,
        }
    }
}

impl Default for FileNames {
    fn default() -> Self {
        Self {
            model: "model.toml".into(),
            structure_report: "structure.txt".into(),
            validation_report: "validation.txt".into(),
            trace: "trace_{output}.txt".into(),
            excitation: "excitation_{input}.csv".into(),
            simulation: "simulation.csv".into(),
            resolved_config: "resolved_config.toml".into(),
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Format {
            path: origin.into(),
            message: e.to_string().trim_end().to_string(),
        })?;
        cfg.check().map_err(|message| Error::Format {
            path: origin.into(),
            message,
        })?;
        Ok(cfg)
    }

    /// Resolved configuration as TOML, for writing next to the outputs.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    fn check(&self) -> std::result::Result<(), String> {
        if self.experiment.samples == 0 {
            return Err("field 'experiment.samples': must be at least 1".into());
        }
        if !(self.experiment.sample_period.is_finite() && self.experiment.sample_period > 0.0) {
            return Err("field 'experiment.sample_period': must be positive".into());
        }
        if self.excitation.input.is_empty() {
            return Err("field 'excitation.input': at least one input grid is required".into());
        }
        if self.excitation.hold == 0 {
            return Err("field 'excitation.hold': must be at least 1".into());
        }
        for (j, g) in self.excitation.input.iter().enumerate() {
            g.grid()
                .map_err(|e| format!("field 'excitation.input[{j}]': {e}"))?;
        }
        if !(self.structure.plateau_threshold.is_finite() && self.structure.plateau_threshold >= 0.0) {
            return Err("field 'structure.plateau_threshold': must be non-negative".into());
        }
        if !(self.estimate.alpha_sq.is_finite() && self.estimate.alpha_sq > 0.0) {
            return Err("field 'estimate.alpha_sq': must be positive".into());
        }
        Ok(())
    }
}
