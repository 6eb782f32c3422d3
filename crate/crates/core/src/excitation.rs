//! Pseudo-random excitation on quantized amplitude grids.
//!
//! Samples come from a multiplicative congruential generator
//! `x' = a*x mod M`. The defaults are the minimal-standard constants
//! `a = 16807`, `M = 2^31 - 1`, so any implementation using the same seed
//! produces the same schedule.

use crate::error::{Error, Result};

pub const DEFAULT_MULTIPLIER: u64 = 16_807;
pub const DEFAULT_MODULUS: u64 = (1 << 31) - 1;
pub const DEFAULT_SEED: u64 = 12_345;

/// Spacing, in draws, between the substreams handed to different inputs.
pub const STREAM_STRIDE: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lcg {
    state: u64,
    multiplier: u64,
    modulus: u64,
}

impl Lcg {
    pub fn new(seed: u64) -> Result<Self> {
        Self::with_constants(seed, DEFAULT_MULTIPLIER, DEFAULT_MODULUS)
    }

    pub fn with_constants(seed: u64, multiplier: u64, modulus: u64) -> Result<Self> {
        if modulus < 2 {
            return Err(Error::InvalidGeneratorState(format!(
                "modulus must be at least 2, got {modulus}"
            )));
        }
        if multiplier == 0 || multiplier >= modulus {
            return Err(Error::InvalidGeneratorState(format!(
                "multiplier {multiplier} outside [1, {}]",
                modulus - 1
            )));
        }
        if seed == 0 || seed >= modulus {
            return Err(Error::InvalidGeneratorState(format!(
                "seed {seed} outside [1, {}]",
                modulus - 1
            )));
        }
        Ok(Self {
            state: seed,
            multiplier,
            modulus,
        })
    }

    pub fn state(&self) -> u64 {
        self.state
    }

    /// One step of the recurrence, returning the successor and its uniform
    /// value `state'/modulus` in `(0, 1)`.
    pub fn step(self) -> (Self, f64) {
        let next = mul_mod(self.multiplier, self.state, self.modulus);
        let lcg = Self {
            state: next,
            ..self
        };
        (lcg, next as f64 / self.modulus as f64)
    }

    pub fn next_uniform(&mut self) -> f64 {
        let (next, u) = self.step();
        *self = next;
        u
    }

    /// Skips `steps` draws in O(log steps).
    pub fn jump(self, steps: u64) -> Self {
        let factor = pow_mod(self.multiplier, steps, self.modulus);
        Self {
            state: mul_mod(factor, self.state, self.modulus),
            ..self
        }
    }
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Seed of the `stream`-th input: the base stream advanced by
/// `stream * STREAM_STRIDE` draws, so inputs never share draws for
/// schedules shorter than the stride.
pub fn derive_seed(seed: u64, stream: u64) -> Result<u64> {
    Ok(Lcg::new(seed)?.jump(stream * STREAM_STRIDE).state())
}

/// Equally spaced amplitude levels `low, low + step, ..., high`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplitudeGrid {
    low: f64,
    high: f64,
    step: f64,
    levels: usize,
}

impl AmplitudeGrid {
    pub fn new(low: f64, high: f64, step: f64) -> Result<Self> {
        if !(low.is_finite() && high.is_finite() && step.is_finite()) {
            return Err(Error::InvalidGrid("bounds and step must be finite".into()));
        }
        if step <= 0.0 {
            return Err(Error::InvalidGrid(format!("step must be positive, got {step}")));
        }
        if high <= low {
            return Err(Error::InvalidGrid(format!(
                "high ({high}) must exceed low ({low})"
            )));
        }
        let spans = (high - low) / step;
        let rounded = spans.round();
        if (spans - rounded).abs() > 1e-9 * spans.max(1.0) {
            return Err(Error::InvalidGrid(format!(
                "range {low}..{high} is not a whole number of {step} steps"
            )));
        }
        Ok(Self {
            low,
            high,
            step,
            levels: rounded as usize + 1,
        })
    }

    pub fn low(&self) -> f64 {
        self.low
    }

    pub fn high(&self) -> f64 {
        self.high
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn level(&self, index: usize) -> f64 {
        self.low + self.step * index as f64
    }

    /// Level index for a uniform draw in `[0, 1]`; the top edge folds into
    /// the last level.
    pub fn quantize(&self, uniform: f64) -> usize {
        ((uniform * self.levels as f64).floor() as usize).min(self.levels - 1)
    }
}

/// Draws `len` samples on `grid`, holding each drawn level for `hold`
/// consecutive samples.
pub fn generate_excitation(
    grid: &AmplitudeGrid,
    len: usize,
    seed: u64,
    hold: usize,
) -> Result<Vec<f64>> {
    if len == 0 {
        return Err(Error::InvalidArgument(
            "excitation length must be at least 1".into(),
        ));
    }
    if hold == 0 {
        return Err(Error::InvalidArgument("hold length must be at least 1".into()));
    }
    let mut lcg = Lcg::new(seed)?;
    let mut out = Vec::with_capacity(len);
    while out.len() < len {
        let value = grid.level(grid.quantize(lcg.next_uniform()));
        let take = hold.min(len - out.len());
        out.extend(std::iter::repeat_n(value, take));
    }
    Ok(out)
}

/// Normalized autocorrelation `rho(lag)` of the mean-removed series.
pub fn autocorrelation(x: &[f64], lag: usize) -> f64 {
    let n = x.len();
    if lag >= n {
        return 0.0;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let denom: f64 = c.iter().map(|v| v * v).sum();
    if denom == 0.0 {
        return 0.0;
    }
    c[..n - lag].iter().zip(&c[lag..]).map(|(a, b)| a * b).sum::<f64>() / denom
}
