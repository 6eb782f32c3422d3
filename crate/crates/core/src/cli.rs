//! Command-line front end.
//!
//! Acquisition happens outside this tool: `excite` writes the input schedule
//! an experimenter applies, and `identify` takes whatever dataset comes back.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::dataset::Dataset;
use crate::error::{Error, Result, StageExt};
use crate::estimate::{identify_model, StructureOrders};
use crate::excitation::{derive_seed, generate_excitation};
use crate::model::{preset, OperatingPoint};
use crate::persistence::{load_dataset, load_model, load_series, save_dataset, save_model, save_series};
use crate::preprocess::preprocess;
use crate::structure::{estimate_delays, select_structure, DelayProbe};
use crate::validate::{evaluate_with, EvalOptions, PredictionMode, ValidationReport};

#[derive(Debug, Parser)]
#[command(name = "hammerstein", version, about = "Identify multi-input multi-output Hammerstein models")]
pub struct Cli {
    /// Run configuration (TOML); defaults apply to anything left out.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Directory for every file the command writes.
    #[arg(long, global = true, value_name = "PATH", default_value = ".")]
    pub output_dir: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write one pseudo-random excitation series per input.
    Excite {
        /// Overrides the configured generator seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Identify a model from a dataset and validate it on the held-out tail.
    Identify {
        dataset: PathBuf,
    },
    /// Free-run a model on input series (one file per input, in model order).
    Simulate {
        model: PathBuf,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Compare a model against a dataset.
    Validate {
        model: PathBuf,
        dataset: PathBuf,
        /// Predict from measured past outputs instead of free-running.
        #[arg(long)]
        one_step_ahead: bool,
        /// Samples used only to warm up the simulation.
        #[arg(long, default_value_t = 0)]
        warmup: usize,
    },
    /// Write a built-in model.
    Preset {
        name: String,
    },
}

/// Runs one command and returns the files written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p).stage("read configuration")?,
        None => RunConfig::default(),
    };
    std::fs::create_dir_all(&cli.output_dir).map_err(|e| Error::io(&cli.output_dir, e))?;
    let out = Output {
        dir: cli.output_dir.clone(),
        written: Vec::new(),
    };
    match &cli.command {
        Command::Excite { seed } => cmd_excite(cfg, *seed, out),
        Command::Identify { dataset } => cmd_identify(cfg, dataset, out),
        Command::Simulate { model, inputs } => cmd_simulate(cfg, model, inputs, out),
        Command::Validate {
            model,
            dataset,
            one_step_ahead,
            warmup,
        } => cmd_validate(cfg, model, dataset, *one_step_ahead, *warmup, out),
        Command::Preset { name } => cmd_preset(name, out),
    }
}

struct Output {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Output {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.written.push(p.clone());
        p
    }

    fn text(&mut self, name: &str, text: &str) -> Result<()> {
        let p = self.path(name);
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
    }

    fn config(&mut self, cfg: &RunConfig) -> Result<()> {
        self.text(&cfg.files.resolved_config.clone(), &cfg.to_toml())
    }
}

fn file_stem_safe(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn cmd_excite(mut cfg: RunConfig, seed: Option<u64>, mut out: Output) -> Result<Vec<PathBuf>> {
    if let Some(s) = seed {
        cfg.excitation.seed = s;
    }
    let len = cfg.experiment.samples;
    for (j, input) in cfg.excitation.input.iter().enumerate() {
        let grid = input.grid().stage(format!("excitation grid of {}", input.name))?;
        let stream_seed = derive_seed(cfg.excitation.seed, j as u64).stage("excitation seed")?;
        let values = generate_excitation(&grid, len, stream_seed, cfg.excitation.hold)
            .stage(format!("excitation of {}", input.name))?;
        let name = cfg.files.excitation.replace("{input}", &file_stem_safe(&input.name));
        save_series(&input.name, &values, out.path(&name))?;
    }
    out.config(&cfg)?;
    Ok(out.written)
}

fn cmd_identify(cfg: RunConfig, dataset: &Path, mut out: Output) -> Result<Vec<PathBuf>> {
    let data = load_dataset(dataset).stage("load dataset")?;
    let bounds = cfg.structure.bounds();
    let r = data.inputs().len();
    let n_train = cfg.experiment.n_train;

    let available = n_train.min(data.len());
    let first = bounds.n_max.max(cfg.structure.max_lag + bounds.m_max);
    let params = bounds.n_max + r * bounds.p_max * (bounds.m_max + 1);
    if cfg.structure.fixed.is_none() && available <= first + params {
        return Err(Error::SeriesTooShort {
            what: format!(
                "identification with n_max={}, m_max={}, p_max={}, max_lag={} ({} lags, {} parameters)",
                bounds.n_max, bounds.m_max, bounds.p_max, cfg.structure.max_lag, first, params
            ),
            needed: first + params,
            available,
        }
        .in_stage("check data budget"));
    }
    if n_train >= data.len() {
        return Err(Error::InvalidArgument(format!(
            "n_train = {} leaves no validation samples in a dataset of {}",
            n_train,
            data.len()
        ))
        .in_stage("split dataset"));
    }
    let train = data.slice(0..n_train).stage("split dataset")?;
    let prep = preprocess(&train, &cfg.preprocess).stage("preprocess")?;
    let dev = &prep.data;

    let mut report = String::new();
    let orders: Vec<StructureOrders> = match &cfg.structure.fixed {
        Some(fixed) => {
            if fixed.len() != data.outputs().len() {
                return Err(Error::LengthMismatch {
                    what: "fixed orders per output".into(),
                    expected: data.outputs().len(),
                    found: fixed.len(),
                }
                .in_stage("structure"));
            }
            let _ = writeln!(report, "# structure fixed by configuration");
            fixed
                .iter()
                .zip(data.outputs())
                .map(|(f, sig)| {
                    let o = f.orders().stage("structure")?;
                    let _ = writeln!(report, "{}: {}", sig.name, o);
                    Ok(o)
                })
                .collect::<Result<_>>()?
        }
        None => {
            let mut all = Vec::new();
            for s in 0..dev.outputs().len() {
                let name = &dev.outputs()[s].name;
                let delays = delays_for(&cfg, dev, s).stage(format!("delay estimation for {name}"))?;
                let res = select_structure(dev, s, &delays, &bounds, cfg.structure.plateau_threshold)
                    .stage(format!("structure search for {name}"))?;
                report.push_str(&res.report());
                report.push('\n');
                all.push(res.selected);
            }
            all
        }
    };

    let op = OperatingPoint {
        inputs: prep.input_offsets.clone(),
        outputs: prep.output_offsets.clone(),
    };
    let (model, fits) = identify_model(dev, &orders, cfg.estimate.method, cfg.estimate.alpha_sq, op)
        .stage("estimate")?;
    for (fit, name) in fits.iter().zip(model.output_names()) {
        let _ = writeln!(report, "# final fit {name}: {} J={:e}", fit.orders, fit.loss);
        for (j, ch) in fit.separated.channels.iter().enumerate() {
            let _ = writeln!(
                report,
                "#   input {}: separation residual ratio {:e}",
                model.input_names()[j],
                ch.residual_ratio
            );
        }
    }
    if !model.is_stable() {
        log::warn!("identified model has poles on or outside the unit circle");
    }

    let opts = EvalOptions {
        mode: cfg.validate.mode,
        std: cfg.validate.std,
        score_from: n_train,
    };
    let validation = evaluate_with(&model, &data, &opts).stage("validate")?;

    save_model(&model, out.path(&cfg.files.model)).stage("write model")?;
    out.text(&cfg.files.structure_report.clone(), &report)?;
    write_validation(&cfg, &validation, &mut out)?;
    out.config(&cfg)?;
    Ok(out.written)
}

fn delays_for(cfg: &RunConfig, dev: &Dataset, s: usize) -> Result<Vec<usize>> {
    if let Some(d) = &cfg.structure.delays {
        if d.len() != dev.inputs().len() {
            return Err(Error::LengthMismatch {
                what: "configured delays per input".into(),
                expected: dev.inputs().len(),
                found: d.len(),
            });
        }
        return Ok(d.clone());
    }
    let mut probe = DelayProbe::new(cfg.structure.max_lag);
    probe.powers = cfg.structure.p_max;
    let est = estimate_delays(&dev.input_series(), dev.output(s), &probe)?;
    for (j, e) in est.iter().enumerate() {
        if e.low_confidence {
            log::warn!(
                "delay of input {} into output {} is low confidence (peak correlation {:.3}, bound {:.3})",
                dev.inputs()[j].name,
                dev.outputs()[s].name,
                e.peak_correlation,
                e.significance_bound
            );
        }
    }
    Ok(est.into_iter().map(|e| e.delay).collect())
}

fn write_validation(cfg: &RunConfig, rep: &ValidationReport, out: &mut Output) -> Result<()> {
    out.text(&cfg.files.validation_report.clone(), &rep.summary())?;
    for (s, o) in rep.outputs.iter().enumerate() {
        let name = cfg.files.trace.replace("{output}", &file_stem_safe(&o.name));
        out.text(&name, &rep.trace(s))?;
    }
    Ok(())
}

fn cmd_simulate(cfg: RunConfig, model: &Path, inputs: &[PathBuf], mut out: Output) -> Result<Vec<PathBuf>> {
    let model = load_model(model).stage("load model")?;
    if inputs.len() != model.n_inputs() {
        return Err(Error::LengthMismatch {
            what: "input files vs model inputs".into(),
            expected: model.n_inputs(),
            found: inputs.len(),
        }
        .in_stage("simulate"));
    }
    let series = inputs
        .iter()
        .map(|p| load_series(p).map(|s| s.1))
        .collect::<Result<Vec<_>>>()
        .stage("load inputs")?;
    let op = model.operating_point().clone();
    let dev: Vec<Vec<f64>> = series
        .iter()
        .zip(&op.inputs)
        .map(|(u, o)| u.iter().map(|v| v - o).collect())
        .collect();
    let y = model.simulate(&dev).stage("simulate")?;
    let signal = |name: &String, values: Vec<f64>, level: f64| {
        crate::dataset::Signal::new(name.clone(), "", values).with_operating_point(level)
    };
    let data = Dataset::new(
        cfg.experiment.sample_period,
        model
            .input_names()
            .iter()
            .zip(series)
            .zip(&op.inputs)
            .map(|((n, v), o)| signal(n, v, *o))
            .collect(),
        model
            .output_names()
            .iter()
            .zip(y)
            .zip(&op.outputs)
            .map(|((n, v), o)| signal(n, v.iter().map(|x| x + o).collect(), *o))
            .collect(),
    )
    .stage("simulate")?;
    save_dataset(&data, out.path(&cfg.files.simulation)).stage("write simulation")?;
    Ok(out.written)
}

fn cmd_validate(
    cfg: RunConfig,
    model: &Path,
    dataset: &Path,
    one_step_ahead: bool,
    warmup: usize,
    mut out: Output,
) -> Result<Vec<PathBuf>> {
    let model = load_model(model).stage("load model")?;
    let data = load_dataset(dataset).stage("load dataset")?;
    let opts = EvalOptions {
        mode: if one_step_ahead {
            PredictionMode::OneStepAhead
        } else {
            cfg.validate.mode
        },
        std: cfg.validate.std,
        score_from: warmup,
    };
    let rep = evaluate_with(&model, &data, &opts).stage("validate")?;
    write_validation(&cfg, &rep, &mut out)?;
    Ok(out.written)
}

fn cmd_preset(name: &str, mut out: Output) -> Result<Vec<PathBuf>> {
    let model = preset(name).stage("preset")?;
    save_model(&model, out.path(&format!("{name}.toml"))).stage("write preset")?;
    Ok(out.written)
}
