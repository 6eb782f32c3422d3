//! Hammerstein channels and their multi-input multi-output assembly.
//!
//! A channel maps an input series `u` through a static polynomial
//! `v = u + r2*u^2 + ... + rp*u^p` and then through the rational filter
//! `B(q^-1) / A(q^-1)` with an integer input delay:
//!
//! ```text
//! y(k) = -a1*y(k-1) - ... - an*y(k-n) + b0*v(k-d) + ... + bm*v(k-d-m)
//! ```
//!
//! All values are deviations from the operating point, and simulation starts
//! from rest (`y` and `v` are zero before the first sample).

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Memoryless polynomial with unit linear coefficient and no constant term.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticNonlinearity {
    coeffs: Vec<f64>,
}

impl StaticNonlinearity {
    /// Builds the polynomial from its higher-order coefficients `r2..rp`.
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("nonlinearity coefficients".into()));
        }
        Ok(Self { coeffs })
    }

    pub fn identity() -> Self {
        Self { coeffs: Vec::new() }
    }

    /// Highest power `p` (1 for a linear channel).
    pub fn degree(&self) -> usize {
        self.coeffs.len() + 1
    }

    /// Coefficients `r2..rp`.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// All coefficients `r1..rp` with `r1 = 1`.
    pub fn full_coeffs(&self) -> Vec<f64> {
        std::iter::once(1.0).chain(self.coeffs.iter().copied()).collect()
    }

    pub fn eval(&self, u: f64) -> f64 {
        // u * (1 + u*(r2 + u*(r3 + ...)))
        let inner = self.coeffs.iter().rev().fold(0.0, |acc, &r| (acc + r) * u);
        u * (1.0 + inner)
    }
}

/// Rational discrete-time filter `q^-d B(q^-1) / A(q^-1)` with monic `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearDynamics {
    a: Vec<f64>,
    b: Vec<f64>,
    delay: usize,
}

impl LinearDynamics {
    /// `a` holds `a1..an` (the leading 1 is implied), `b` holds `b0..bm`.
    pub fn new(a: Vec<f64>, b: Vec<f64>, delay: usize) -> Result<Self> {
        if b.is_empty() {
            return Err(Error::InvalidModel(
                "numerator needs at least one coefficient (m >= 0)".into(),
            ));
        }
        if a.iter().chain(&b).any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("filter coefficients".into()));
        }
        Ok(Self { a, b, delay })
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn delay(&self) -> usize {
        self.delay
    }

    /// Denominator order `n`.
    pub fn n(&self) -> usize {
        self.a.len()
    }

    /// Numerator order `m`.
    pub fn m(&self) -> usize {
        self.b.len() - 1
    }

    /// Runs the difference equation on an already transformed input `v`.
    pub fn filter(&self, v: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; v.len()];
        for k in 0..v.len() {
            let mut acc = 0.0;
            for (i, &ai) in self.a.iter().enumerate() {
                if let Some(idx) = k.checked_sub(i + 1) {
                    acc -= ai * y[idx];
                }
            }
            for (j, &bj) in self.b.iter().enumerate() {
                if let Some(idx) = k.checked_sub(self.delay + j) {
                    acc += bj * v[idx];
                }
            }
            y[k] = acc;
        }
        y
    }

    /// Poles of the filter, i.e. the roots of `z^n + a1 z^(n-1) + ... + an`,
    /// returned as moduli.
    pub fn pole_moduli(&self) -> Vec<f64> {
        let n = self.a.len();
        if n == 0 {
            return Vec::new();
        }
        let mut companion = DMatrix::<f64>::zeros(n, n);
        for (j, &aj) in self.a.iter().enumerate() {
            companion[(0, j)] = -aj;
        }
        for i in 1..n {
            companion[(i, i - 1)] = 1.0;
        }
        companion
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .collect()
    }

    /// True when every pole lies strictly inside the unit circle.
    pub fn is_stable(&self) -> bool {
        self.pole_moduli().iter().all(|&r| r < 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HammersteinChannel {
    pub nonlinearity: StaticNonlinearity,
    pub dynamics: LinearDynamics,
}

impl HammersteinChannel {
    pub fn new(nonlinearity: StaticNonlinearity, dynamics: LinearDynamics) -> Self {
        Self {
            nonlinearity,
            dynamics,
        }
    }

    pub fn simulate(&self, u: &[f64]) -> Vec<f64> {
        let v: Vec<f64> = u.iter().map(|&x| self.nonlinearity.eval(x)).collect();
        self.dynamics.filter(&v)
    }
}

/// Nominal signal levels; model values are deviations from these.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPoint {
    pub inputs: Vec<f64>,
    pub outputs: Vec<f64>,
}

/// Grid of Hammerstein channels indexed by `(output, input)`.
///
/// Channels feeding the same output share their denominator.
#[derive(Debug, Clone, PartialEq)]
pub struct MimoHammersteinModel {
    input_names: Vec<String>,
    output_names: Vec<String>,
    channels: Vec<Vec<HammersteinChannel>>,
    operating_point: OperatingPoint,
    metadata: BTreeMap<String, String>,
}

impl MimoHammersteinModel {
    /// `channels[s][j]` is the path from input `j` to output `s`.
    pub fn new(
        input_names: Vec<String>,
        output_names: Vec<String>,
        channels: Vec<Vec<HammersteinChannel>>,
        operating_point: OperatingPoint,
    ) -> Result<Self> {
        let r = input_names.len();
        let m = output_names.len();
        if r == 0 || m == 0 {
            return Err(Error::InvalidModel(
                "a model needs at least one input and one output".into(),
            ));
        }
        if channels.len() != m {
            return Err(Error::InvalidModel(format!(
                "{} output names but {} channel rows",
                m,
                channels.len()
            )));
        }
        for (s, row) in channels.iter().enumerate() {
            if row.len() != r {
                return Err(Error::InvalidModel(format!(
                    "row {} has {} channels, expected {}",
                    s,
                    row.len(),
                    r
                )));
            }
            let shared = row[0].dynamics.a();
            for (j, ch) in row.iter().enumerate().skip(1) {
                if ch.dynamics.a() != shared {
                    return Err(Error::InvalidModel(format!(
                        "channel (output {s}, input {j}) denominator differs from channel (output {s}, input 0); \
                         channels of one output must share A"
                    )));
                }
            }
        }
        if operating_point.inputs.len() != r || operating_point.outputs.len() != m {
            return Err(Error::InvalidModel(format!(
                "operating point has {}/{} input/output entries, expected {}/{}",
                operating_point.inputs.len(),
                operating_point.outputs.len(),
                r,
                m
            )));
        }
        Ok(Self {
            input_names,
            output_names,
            channels,
            operating_point,
            metadata: BTreeMap::new(),
        })
    }

    pub fn with_metadata(mut self, metadata: BTreeMap<String, String>) -> Self {
        self.metadata = metadata;
        self
    }

    pub fn n_inputs(&self) -> usize {
        self.input_names.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.output_names.len()
    }

    pub fn input_names(&self) -> &[String] {
        &self.input_names
    }

    pub fn output_names(&self) -> &[String] {
        &self.output_names
    }

    pub fn channels(&self) -> &[Vec<HammersteinChannel>] {
        &self.channels
    }

    pub fn channel(&self, output: usize, input: usize) -> &HammersteinChannel {
        &self.channels[output][input]
    }

    pub fn operating_point(&self) -> &OperatingPoint {
        &self.operating_point
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    /// Shared denominator `a1..an` of output `s`.
    pub fn denominator(&self, output: usize) -> &[f64] {
        self.channels[output][0].dynamics.a()
    }

    pub fn is_stable(&self) -> bool {
        self.channels.iter().all(|row| row[0].dynamics.is_stable())
    }

    /// Free-run simulation; output `s` is the sum of its channel responses,
    /// accumulated in input order.
    pub fn simulate<S: AsRef<[f64]>>(&self, inputs: &[S]) -> Result<Vec<Vec<f64>>> {
        if inputs.len() != self.n_inputs() {
            return Err(Error::LengthMismatch {
                what: "number of input series".into(),
                expected: self.n_inputs(),
                found: inputs.len(),
            });
        }
        let len = inputs[0].as_ref().len();
        for u in inputs {
            if u.as_ref().len() != len {
                return Err(Error::LengthMismatch {
                    what: "input series length".into(),
                    expected: len,
                    found: u.as_ref().len(),
                });
            }
        }
        Ok(self
            .channels
            .iter()
            .map(|row| {
                let mut y = vec![0.0; len];
                for (ch, u) in row.iter().zip(inputs) {
                    for (acc, v) in y.iter_mut().zip(ch.simulate(u.as_ref())) {
                        *acc += v;
                    }
                }
                y
            })
            .collect())
    }
}

/// Names of the built-in models.
pub const PRESET_NAMES: &[&str] = &["paper-gtaw"];

/// Looks up a built-in model by name.
pub fn preset(name: &str) -> Result<MimoHammersteinModel> {
    match name {
        "paper-gtaw" => Ok(paper_preset()),
        other => Err(Error::InvalidArgument(format!(
            "unknown preset '{}'; available presets: {}",
            other,
            PRESET_NAMES.join(", ")
        ))),
    }
}

/// Dual-input dual-output weld pool model for pulsed GTAW with wire filler.
///
/// Inputs are peak current `I_p` (A) and wire feed speed `V_f` (cm/s);
/// outputs are backside width `W_b` and top reinforcement `H_f` (mm).
/// Input 1 enters with delay 1, input 2 with delay 3. Output 1 uses
/// quadratic nonlinearities, output 2 quartic ones.
pub fn paper_preset() -> MimoHammersteinModel {
    let a_wb = vec![-1.73603, 0.728305, 0.580712, -0.85552, 0.320009];
    let a_hf = vec![-1.29125, 0.253601, 0.543266, -0.69655, 0.240607];

    let ch = |r: &[f64], a: &[f64], b: &[f64], d: usize| {
        HammersteinChannel::new(
            StaticNonlinearity::new(r.to_vec()).expect("finite preset coefficients"),
            LinearDynamics::new(a.to_vec(), b.to_vec(), d).expect("valid preset filter"),
        )
    };

    let row_wb = vec![
        ch(&[-0.01476], &a_wb, &[0.004744, -0.0031, 0.000158, -0.0015], 1),
        ch(
            &[-0.04142],
            &a_wb,
            &[0.001614, -0.0047, -0.00742, 0.0000138, -0.00924, 0.002941],
            3,
        ),
    ];
    let row_hf = vec![
        ch(
            &[0.002972, -0.00315, 0.000152],
            &a_hf,
            &[0.00568, 0.002351, 0.000844, 0.000724, -0.00253, -0.00333],
            1,
        ),
        ch(
            &[0.115034, 0.133773, -0.02614],
            &a_hf,
            &[0.005929, -0.01733, 0.010646, -0.01391, -0.00406, -0.02969],
            3,
        ),
    ];

    let metadata = BTreeMap::from([
        ("stated_orders.W_b".to_string(), "d=1 p=2 m=5 n=3".to_string()),
        ("stated_orders.H_f".to_string(), "d=3 p=4 m=5 n=5".to_string()),
        ("travel_speed_mm_per_s".to_string(), "1.9".to_string()),
        ("sample_period_s".to_string(), "1".to_string()),
    ]);

    MimoHammersteinModel::new(
        vec!["I_p".into(), "V_f".into()],
        vec!["W_b".into(), "H_f".into()],
        vec![row_wb, row_hf],
        OperatingPoint {
            inputs: vec![150.0, 7.0],
            outputs: vec![0.0, 0.0],
        },
    )
    .expect("preset rows share denominators")
    .with_metadata(metadata)
}
