//! Dataset, series and model files.
//!
//! All numbers are stored as decimal text that parses back to the identical
//! `f64`. See `FORMATS.md` at the repository root for the byte-level layout.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Signal};
use crate::error::{Error, Result};
use crate::model::{
    HammersteinChannel, LinearDynamics, MimoHammersteinModel, OperatingPoint, StaticNonlinearity,
};

pub const MODEL_SCHEMA: &str = "hammerstein-model/1";

/// Shortest decimal that reads back to exactly `x`; scientific notation for
/// very small or very large magnitudes.
pub fn format_f64(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && !(1e-5..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

fn parse_f64(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn check_name(name: &str, what: &str) -> Result<()> {
    if name.is_empty()
        || name.trim() != name
        || name.contains([',', '\n', '\r'])
        || name.starts_with('#')
    {
        return Err(Error::InvalidArgument(format!(
            "{what} '{name}' must be non-empty, without commas, line breaks, surrounding spaces or a leading '#'"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

pub fn dataset_to_string(data: &Dataset) -> Result<String> {
    let signals: Vec<&Signal> = data.inputs().iter().chain(data.outputs()).collect();
    for s in &signals {
        check_name(&s.name, "signal name")?;
        if s.name == "index" {
            return Err(Error::InvalidArgument("signal name 'index' is reserved".into()));
        }
        if s.unit.contains([',', '\n', '\r']) || s.unit.trim() != s.unit {
            return Err(Error::InvalidArgument(format!(
                "unit '{}' of '{}' must not contain commas, line breaks or surrounding spaces",
                s.unit, s.name
            )));
        }
    }
    let join = |it: &mut dyn Iterator<Item = String>| it.collect::<Vec<_>>().join(",");
    let mut out = String::new();
    let _ = writeln!(out, "# sample_period: {}", format_f64(data.sample_period()));
    let _ = writeln!(out, "# inputs: {}", join(&mut data.inputs().iter().map(|s| s.name.clone())));
    let _ = writeln!(out, "# outputs: {}", join(&mut data.outputs().iter().map(|s| s.name.clone())));
    let _ = writeln!(out, "# units: {}", join(&mut signals.iter().map(|s| s.unit.clone())));
    if signals.iter().any(|s| s.operating_point.is_some()) {
        let ops = join(&mut signals.iter().map(|s| {
            s.operating_point
                .map(format_f64)
                .unwrap_or_else(|| "-".into())
        }));
        let _ = writeln!(out, "# operating_point: {ops}");
    }
    let _ = writeln!(out, "index,{}", join(&mut signals.iter().map(|s| s.name.clone())));
    for k in 0..data.len() {
        out.push_str(&k.to_string());
        for s in &signals {
            out.push(',');
            out.push_str(&format_f64(s.values[k]));
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn save_dataset(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &dataset_to_string(data)?)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    parse_dataset(&read_text(path)?, &path.display().to_string())
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',').map(|c| c.trim().to_string()).collect()
}

/// Parses dataset text; `origin` labels error messages.
pub fn parse_dataset(text: &str, origin: &str) -> Result<Dataset> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_string(),
        line,
        message,
    };
    let mut period = None;
    let mut inputs: Option<Vec<String>> = None;
    let mut outputs: Option<Vec<String>> = None;
    let mut units: Option<(usize, Vec<String>)> = None;
    let mut ops: Option<(usize, Vec<String>)> = None;
    let mut header: Option<(usize, Vec<String>)> = None;
    let mut columns: Vec<Vec<f64>> = Vec::new();

    // trailing blank lines are editor noise, interior ones are errors
    let used = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).last().map_or(0, |(i, _)| i + 1);
    for (i, raw) in text.lines().take(used).enumerate() {
        let lineno = i + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if header.is_none() {
            if let Some(directive) = line.strip_prefix('#') {
                let (key, value) = directive
                    .split_once(':')
                    .ok_or_else(|| err(lineno, "directive must read '# key: value'".into()))?;
                let value = value.trim();
                match key.trim() {
                    "sample_period" => {
                        let p = parse_f64(value)
                            .ok_or_else(|| err(lineno, format!("sample period '{value}' is not a number")))?;
                        if p <= 0.0 {
                            return Err(err(lineno, format!("sample period must be positive, got {value}")));
                        }
                        period = Some(p);
                    }
                    "inputs" => inputs = Some(split_list(value)),
                    "outputs" => outputs = Some(split_list(value)),
                    "units" => units = Some((lineno, split_list(value))),
                    "operating_point" => ops = Some((lineno, split_list(value))),
                    other => return Err(err(lineno, format!("unknown directive '{other}'"))),
                }
                continue;
            }
            if line.trim().is_empty() {
                return Err(err(lineno, "blank line before header".into()));
            }
            let names = split_list(line);
            if names.first().map(String::as_str) != Some("index") {
                return Err(err(lineno, "header line must start with 'index'".into()));
            }
            let ins = inputs.as_ref().ok_or_else(|| err(lineno, "missing '# inputs:' directive".into()))?;
            let outs = outputs.as_ref().ok_or_else(|| err(lineno, "missing '# outputs:' directive".into()))?;
            let expected: Vec<&String> = ins.iter().chain(outs).collect();
            let found: Vec<&String> = names[1..].iter().collect();
            if expected != found {
                return Err(err(
                    lineno,
                    format!(
                        "header columns {:?} do not match declared inputs then outputs {:?}",
                        found, expected
                    ),
                ));
            }
            columns = vec![Vec::new(); names.len() - 1];
            header = Some((lineno, names));
            continue;
        }
        let width = header.as_ref().map(|h| h.1.len()).unwrap_or(0);
        let row = columns[0].len();
        if line.trim().is_empty() {
            return Err(err(lineno, format!("blank line at data row {}", row + 1)));
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != width {
            return Err(err(
                lineno,
                format!("data row {} has {} cells, expected {}", row + 1, cells.len(), width),
            ));
        }
        if cells[0].trim().parse::<usize>().ok() != Some(row) {
            return Err(err(
                lineno,
                format!("data row {}: index '{}' should be {}", row + 1, cells[0], row),
            ));
        }
        let names = &header.as_ref().expect("header parsed").1;
        for (c, cell) in cells[1..].iter().enumerate() {
            let v = parse_f64(cell).ok_or_else(|| {
                err(
                    lineno,
                    format!(
                        "data row {}: non-numeric cell '{}' in column '{}'",
                        row + 1,
                        cell,
                        names[c + 1]
                    ),
                )
            })?;
            columns[c].push(v);
        }
    }

    let last = text.lines().count().max(1);
    let (hline, names) = header.ok_or_else(|| err(last, "missing header line 'index,...'".into()))?;
    let period = period.ok_or_else(|| err(1, "missing '# sample_period:' directive".into()))?;
    if columns.first().is_none_or(|c| c.is_empty()) {
        return Err(err(hline, "no data rows".into()));
    }
    let width = names.len() - 1;
    let units = match units {
        Some((l, u)) if u.len() != width => {
            return Err(err(l, format!("{} units for {} signals", u.len(), width)))
        }
        Some((_, u)) => u,
        None => vec![String::new(); width],
    };
    let ops: Vec<Option<f64>> = match ops {
        Some((l, o)) => {
            if o.len() != width {
                return Err(err(l, format!("{} operating points for {} signals", o.len(), width)));
            }
            o.iter()
                .map(|c| {
                    if c == "-" {
                        Ok(None)
                    } else {
                        parse_f64(c)
                            .map(Some)
                            .ok_or_else(|| err(l, format!("operating point '{c}' is not a number or '-'")))
                    }
                })
                .collect::<Result<_>>()?
        }
        None => vec![None; width],
    };
    let n_in = inputs.as_ref().map(Vec::len).unwrap_or(0);
    let mut signals: Vec<Signal> = columns
        .into_iter()
        .enumerate()
        .map(|(c, values)| Signal {
            name: names[c + 1].clone(),
            unit: units[c].clone(),
            operating_point: ops[c],
            values,
        })
        .collect();
    let outs = signals.split_off(n_in);
    Dataset::new(period, signals, outs).map_err(|e| err(hline, e.to_string()))
}

// ---------------------------------------------------------------------------
// Single series
// ---------------------------------------------------------------------------

pub fn series_to_string(name: &str, values: &[f64]) -> Result<String> {
    check_name(name, "series name")?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("series '{name}'")));
    }
    let mut out = format!("index,{name}\n");
    for (k, v) in values.iter().enumerate() {
        let _ = writeln!(out, "{k},{}", format_f64(*v));
    }
    Ok(out)
}

/// Two-column `index,<name>` file.
pub fn save_series(name: &str, values: &[f64], path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &series_to_string(name, values)?)
}

pub fn load_series(path: impl AsRef<Path>) -> Result<(String, Vec<f64>)> {
    let path = path.as_ref();
    let origin = path.display().to_string();
    let text = read_text(path)?;
    let err = |line: usize, message: String| Error::Parse {
        path: origin.clone(),
        line,
        message,
    };
    let mut lines = text.lines().map(|l| l.strip_suffix('\r').unwrap_or(l));
    let head = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let name = match head.split_once(',') {
        Some(("index", name)) if !name.is_empty() && !name.contains(',') => name.to_string(),
        _ => return Err(err(1, "header must read 'index,<name>'".into())),
    };
    let mut values = Vec::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let (idx, cell) = line
            .split_once(',')
            .ok_or_else(|| err(lineno, format!("expected 2 cells, found '{line}'")))?;
        if idx.trim().parse::<usize>().ok() != Some(i) {
            return Err(err(lineno, format!("index '{idx}' should be {i}")));
        }
        values.push(parse_f64(cell).ok_or_else(|| err(lineno, format!("non-numeric value '{cell}'")))?);
    }
    if values.is_empty() {
        return Err(err(1, "no data rows".into()));
    }
    Ok((name, values))
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    schema: String,
    inputs: Vec<String>,
    input_operating_point: Vec<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    metadata: BTreeMap<String, String>,
    output: Vec<OutputEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputEntry {
    name: String,
    operating_point: f64,
    channel: Vec<ChannelEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelEntry {
    input: String,
    delay: usize,
    r: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
}

pub fn model_to_string(model: &MimoHammersteinModel) -> Result<String> {
    let op = model.operating_point();
    let file = ModelFile {
        schema: MODEL_SCHEMA.into(),
        inputs: model.input_names().to_vec(),
        input_operating_point: op.inputs.clone(),
        metadata: model.metadata().clone(),
        output: model
            .output_names()
            .iter()
            .enumerate()
            .map(|(s, name)| OutputEntry {
                name: name.clone(),
                operating_point: op.outputs[s],
                channel: model.channels()[s]
                    .iter()
                    .enumerate()
                    .map(|(j, ch)| ChannelEntry {
                        input: model.input_names()[j].clone(),
                        delay: ch.dynamics.delay(),
                        r: ch.nonlinearity.coeffs().to_vec(),
                        a: ch.dynamics.a().to_vec(),
                        b: ch.dynamics.b().to_vec(),
                    })
                    .collect(),
            })
            .collect(),
    };
    toml::to_string(&file).map_err(|e| Error::Format {
        path: "<model>".into(),
        message: e.to_string(),
    })
}

pub fn save_model(model: &MimoHammersteinModel, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &model_to_string(model)?)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<MimoHammersteinModel> {
    let path = path.as_ref();
    parse_model(&read_text(path)?, &path.display().to_string())
}

pub fn parse_model(text: &str, origin: &str) -> Result<MimoHammersteinModel> {
    let fail = |message: String| Error::Format {
        path: origin.to_string(),
        message,
    };
    if text.trim().is_empty() {
        return Err(fail("empty model file".into()));
    }
    // check the schema first so that foreign files get the clearer message
    if let Ok(table) = toml::from_str::<toml::Table>(text) {
        match table.get("schema").and_then(|v| v.as_str()) {
            Some(MODEL_SCHEMA) => {}
            Some(other) => {
                return Err(fail(format!(
                    "field 'schema': unsupported schema '{other}', expected '{MODEL_SCHEMA}'"
                )))
            }
            None => return Err(fail("field 'schema': missing".into())),
        }
    }
    let file: ModelFile = toml::from_str(text).map_err(|e| fail(e.to_string().trim_end().to_string()))?;

    let r = file.inputs.len();
    if file.input_operating_point.len() != r {
        return Err(fail(format!(
            "field 'input_operating_point': {} entries for {} inputs",
            file.input_operating_point.len(),
            r
        )));
    }
    let mut rows = Vec::with_capacity(file.output.len());
    for (s, out) in file.output.iter().enumerate() {
        if out.channel.len() != r {
            return Err(fail(format!(
                "field 'output[{s}].channel': {} channels for {} inputs",
                out.channel.len(),
                r
            )));
        }
        let mut row = Vec::with_capacity(r);
        for (j, ch) in out.channel.iter().enumerate() {
            let at = format!("output[{s}].channel[{j}]");
            if ch.input != file.inputs[j] {
                return Err(fail(format!(
                    "field '{at}.input': expected '{}', found '{}'",
                    file.inputs[j], ch.input
                )));
            }
            if ch.a != out.channel[0].a {
                return Err(fail(format!(
                    "field '{at}.a': channels of output '{}' must share one denominator",
                    out.name
                )));
            }
            let nl = StaticNonlinearity::new(ch.r.clone()).map_err(|e| fail(format!("field '{at}.r': {e}")))?;
            let dy = LinearDynamics::new(ch.a.clone(), ch.b.clone(), ch.delay)
                .map_err(|e| fail(format!("field '{at}': {e}")))?;
            row.push(HammersteinChannel::new(nl, dy));
        }
        rows.push(row);
    }
    MimoHammersteinModel::new(
        file.inputs.clone(),
        file.output.iter().map(|o| o.name.clone()).collect(),
        rows,
        OperatingPoint {
            inputs: file.input_operating_point,
            outputs: file.output.iter().map(|o| o.operating_point).collect(),
        },
    )
    .map(|m| m.with_metadata(file.metadata))
    .map_err(|e| fail(e.to_string()))
}
