//! Test oracles shared by the integration targets. Simulation here is a
//! direct transcription of the difference equation, independent of the
//! library's filter code.

#![allow(dead_code)]

use hammerstein::dataset::{Dataset, Signal};
use hammerstein::excitation::{derive_seed, generate_excitation, AmplitudeGrid, DEFAULT_SEED};

pub const A_WB: [f64; 5] = [-1.73603, 0.728305, 0.580712, -0.85552, 0.320009];
pub const A_HF: [f64; 5] = [-1.29125, 0.253601, 0.543266, -0.69655, 0.240607];

/// (r2..rp, b, delay).
pub type PrintedChannel = (Vec<f64>, Vec<f64>, usize);

/// Indexed `[output][input]`.
pub fn printed_channels() -> [[PrintedChannel; 2]; 2] {
    [
        [
            (vec![-0.01476], vec![0.004744, -0.0031, 0.000158, -0.0015], 1),
            (
                vec![-0.04142],
                vec![0.001614, -0.0047, -0.00742, 0.0000138, -0.00924, 0.002941],
                3,
            ),
        ],
        [
            (
                vec![0.002972, -0.00315, 0.000152],
                vec![0.00568, 0.002351, 0.000844, 0.000724, -0.00253, -0.00333],
                1,
            ),
            (
                vec![0.115034, 0.133773, -0.02614],
                vec![0.005929, -0.01733, 0.010646, -0.01391, -0.00406, -0.02969],
                3,
            ),
        ],
    ]
}

pub fn printed_denominator(output: usize) -> Vec<f64> {
    if output == 0 {
        A_WB.to_vec()
    } else {
        A_HF.to_vec()
    }
}

pub fn poly(r: &[f64], u: f64) -> f64 {
    let mut acc = u;
    for (i, ri) in r.iter().enumerate() {
        acc += ri * u.powi(i as i32 + 2);
    }
    acc
}

/// `y(k) = -sum a_i y(k-i) + sum b_l f(u(k-d-l))` from rest.
pub fn oracle_channel(a: &[f64], b: &[f64], d: usize, r: &[f64], u: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; u.len()];
    for k in 0..u.len() {
        let mut acc = 0.0;
        for (i, ai) in a.iter().enumerate() {
            if k > i {
                acc -= ai * y[k - i - 1];
            }
        }
        for (l, bl) in b.iter().enumerate() {
            if k >= d + l {
                acc += bl * poly(r, u[k - d - l]);
            }
        }
        y[k] = acc;
    }
    y
}

/// Deviation-scale outputs of the printed model.
pub fn oracle_outputs(u1: &[f64], u2: &[f64]) -> [Vec<f64>; 2] {
    let ch = printed_channels();
    let out = |s: usize| {
        let a = printed_denominator(s);
        let y1 = oracle_channel(&a, &ch[s][0].1, ch[s][0].2, &ch[s][0].0, u1);
        let y2 = oracle_channel(&a, &ch[s][1].1, ch[s][1].2, &ch[s][1].0, u2);
        y1.iter().zip(&y2).map(|(a, b)| a + b).collect::<Vec<f64>>()
    };
    [out(0), out(1)]
}

/// Default excitation in physical units: peak current and wire feed speed.
pub fn default_excitation(len: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let ip = AmplitudeGrid::new(130.0, 170.0, 2.0).unwrap();
    let vf = AmplitudeGrid::new(4.0, 10.0, 1.0).unwrap();
    (
        generate_excitation(&ip, len, derive_seed(seed, 0).unwrap(), 1).unwrap(),
        generate_excitation(&vf, len, derive_seed(seed, 1).unwrap(), 1).unwrap(),
    )
}

/// Noiseless oracle dataset in physical units with declared operating points.
pub fn oracle_dataset(len: usize) -> Dataset {
    oracle_dataset_seeded(len, DEFAULT_SEED)
}

pub fn oracle_dataset_seeded(len: usize, seed: u64) -> Dataset {
    let (ip, vf) = default_excitation(len, seed);
    let u1: Vec<f64> = ip.iter().map(|v| v - 150.0).collect();
    let u2: Vec<f64> = vf.iter().map(|v| v - 7.0).collect();
    let [wb, hf] = oracle_outputs(&u1, &u2);
    Dataset::new(
        1.0,
        vec![
            Signal::new("I_p", "A", ip).with_operating_point(150.0),
            Signal::new("V_f", "m/min", vf).with_operating_point(7.0),
        ],
        vec![
            Signal::new("W_b", "mm", wb).with_operating_point(0.0),
            Signal::new("H_f", "mm", hf).with_operating_point(0.0),
        ],
    )
    .unwrap()
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs()
}
