mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use hammerstein::dataset::{Dataset, Signal};
use hammerstein::estimate::separate::factor_products;
use hammerstein::estimate::{
    batch_ls, build_regressor, ChannelOrders, Column, EstimatorState, RegressionProblem,
    StructureOrders,
};
use hammerstein::excitation::{generate_excitation, AmplitudeGrid, Lcg};
use hammerstein::model::{
    paper_preset, HammersteinChannel, LinearDynamics, MimoHammersteinModel, OperatingPoint,
    StaticNonlinearity,
};
use hammerstein::persistence::{dataset_to_string, model_to_string, parse_dataset, parse_model};
use hammerstein::preprocess::{median_filter, remove_dc, DcMode};
use hammerstein::structure::{augment_columns, estimate_delay, loss_j, AugmentedLs};
use hammerstein::validate::{error_stats, evaluate, split_dataset, StdConvention};

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        4 => -1e3..1e3f64,
        1 => any::<f64>().prop_filter("finite", |v| v.is_finite()),
        1 => Just(0.0),
    ]
}

fn name() -> impl Strategy<Value = String> {
    "[A-Za-z][A-Za-z0-9_]{0,6}"
}

prop_compose! {
    fn dataset()(
        r in 1usize..4,
        m in 1usize..4,
        len in 1usize..30,
        period in prop_oneof![Just(1.0), 1e-3..1e3f64],
    )(
        names in proptest::collection::btree_set(name(), r + m),
        units in proptest::collection::vec("[a-z/]{0,4}", r + m),
        ops in proptest::collection::vec(proptest::option::of(finite()), r + m),
        values in proptest::collection::vec(proptest::collection::vec(finite(), len), r + m),
        r in Just(r),
        period in Just(period),
    ) -> Dataset {
        let names: Vec<String> = names.into_iter().filter(|n| n != "index").collect();
        let mut signals: Vec<Signal> = names
            .iter()
            .zip(units)
            .zip(ops)
            .zip(values)
            .map(|(((n, u), o), v)| Signal { name: n.clone(), unit: u, operating_point: o, values: v })
            .collect();
        let r = r.min(signals.len() - 1);
        let outputs = signals.split_off(r.max(1));
        Dataset::new(period, signals, outputs).unwrap()
    }
}

prop_compose! {
    fn model()(r in 1usize..3, m in 1usize..3)(
        ins in proptest::collection::btree_set(name(), r),
        outs in proptest::collection::btree_set(name(), m),
        a in proptest::collection::vec(proptest::collection::vec(finite(), 0..4), m),
        channels in proptest::collection::vec(
            proptest::collection::vec(
                (proptest::collection::vec(finite(), 0..3), proptest::collection::vec(finite(), 1..4), 0usize..4),
                r,
            ),
            m,
        ),
        op_in in proptest::collection::vec(finite(), r),
        op_out in proptest::collection::vec(finite(), m),
    ) -> Option<MimoHammersteinModel> {
        if ins.len() != op_in.len() || outs.len() != op_out.len() {
            return None;
        }
        let rows = channels
            .into_iter()
            .zip(&a)
            .map(|(row, a)| {
                row.into_iter()
                    .map(|(rc, b, d)| HammersteinChannel::new(
                        StaticNonlinearity::new(rc).unwrap(),
                        LinearDynamics::new(a.clone(), b, d).unwrap(),
                    ))
                    .collect()
            })
            .collect();
        MimoHammersteinModel::new(
            ins.into_iter().collect(),
            outs.into_iter().collect(),
            rows,
            OperatingPoint { inputs: op_in, outputs: op_out },
        )
        .ok()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn dataset_text_round_trip(d in dataset()) {
        let text = dataset_to_string(&d).unwrap();
        let back = parse_dataset(&text, "p").unwrap();
        prop_assert_eq!(&back, &d);
        for (a, b) in back.inputs().iter().chain(back.outputs()).zip(d.inputs().iter().chain(d.outputs())) {
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        prop_assert_eq!(dataset_to_string(&back).unwrap(), text);
    }

    #[test]
    fn model_text_round_trip(m in model()) {
        if let Some(m) = m {
            let text = model_to_string(&m).unwrap();
            prop_assert_eq!(parse_model(&text, "p").unwrap(), m);
        }
    }
}

proptest! {
    #[test]
    fn superposition_after_nonlinearity(
        a in proptest::collection::vec(-0.4..0.4f64, 0..3),
        b in proptest::collection::vec(-2.0..2.0f64, 1..4),
        d in 0usize..4,
        v1 in proptest::collection::vec(-5.0..5.0f64, 40),
        v2 in proptest::collection::vec(-5.0..5.0f64, 40),
    ) {
        let f = LinearDynamics::new(a, b, d).unwrap();
        let sum: Vec<f64> = v1.iter().zip(&v2).map(|(x, y)| x + y).collect();
        let lhs = f.filter(&sum);
        let y1 = f.filter(&v1);
        let y2 = f.filter(&v2);
        for k in 0..lhs.len() {
            let scale = 1.0 + y1[k].abs() + y2[k].abs();
            prop_assert!((lhs[k] - y1[k] - y2[k]).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn delay_shift(
        k in 0usize..6,
        u in proptest::collection::vec(-3.0..3.0f64, 30),
    ) {
        let model = paper_preset();
        let zeros = vec![0.0; 30];
        let base = model.simulate(&[&u, &zeros]).unwrap();
        let mut shifted = vec![0.0; k];
        shifted.extend(&u);
        let longer = model.simulate(&[&shifted, &vec![0.0; 30 + k]]).unwrap();
        for s in 0..2 {
            prop_assert!(longer[s][..k].iter().all(|&v| v == 0.0));
            prop_assert_eq!(&longer[s][k..], &base[s][..]);
        }
    }

    #[test]
    fn nonlinearity_is_polynomial(
        r in proptest::collection::vec(-1.0..1.0f64, 0..4),
        x0 in -2.0..2.0f64,
        h in 0.01..0.5f64,
    ) {
        // forward difference of order p+1 vanishes
        let f = StaticNonlinearity::new(r).unwrap();
        let order = f.degree() + 1;
        let mut vals: Vec<f64> = (0..=order).map(|i| f.eval(x0 + h * i as f64)).collect();
        let scale = vals.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for _ in 0..order {
            vals = vals.windows(2).map(|w| w[1] - w[0]).collect();
        }
        prop_assert!(vals[0].abs() <= 1e-10 * scale * 2f64.powi(order as i32));
    }

    #[test]
    fn median_commutes_with_affine_maps(
        x in proptest::collection::vec(-1e6..1e6f64, 1..60),
        a in prop_oneof![-100.0..-1e-3f64, 1e-3..100.0f64],
        b in -1e3..1e3f64,
        half in 0usize..4,
    ) {
        let w = (2 * half + 1).min(if x.len() % 2 == 1 { x.len() } else { x.len() - 1 });
        let lhs = median_filter(&x.iter().map(|v| a * v + b).collect::<Vec<_>>(), w).unwrap();
        let rhs: Vec<f64> = median_filter(&x, w).unwrap().iter().map(|v| a * v + b).collect();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn monotone_series_pass_through(x in proptest::collection::vec(-1e3..1e3f64, 5..50)) {
        let mut x = x;
        x.sort_by(f64::total_cmp);
        prop_assert_eq!(median_filter(&x, 5).unwrap(), x);
    }

    #[test]
    fn dc_add_back_around_operating_point(
        level in 1e-3..1e6f64,
        frac in proptest::collection::vec(0.5..2.0f64, 1..50),
    ) {
        // values within a factor of two of the level subtract exactly
        let x: Vec<f64> = frac.iter().map(|f| f * level).collect();
        let (shifted, offset) = remove_dc(&x, DcMode::SubtractReference(level)).unwrap();
        let back: Vec<f64> = shifted.iter().map(|v| v + offset).collect();
        prop_assert_eq!(back, x);
    }

    #[test]
    fn dc_add_back_general(x in proptest::collection::vec(-1e6..1e6f64, 1..50)) {
        let (shifted, offset) = remove_dc(&x, DcMode::SubtractMean).unwrap();
        let big = x.iter().fold(offset.abs(), |m, v| m.max(v.abs()));
        for (s, v) in shifted.iter().zip(&x) {
            prop_assert!((s + offset - v).abs() <= f64::EPSILON * big);
        }
        let mean = shifted.iter().sum::<f64>() / shifted.len() as f64;
        prop_assert!(mean.abs() <= 1e-9 * (1.0 + big));
    }

    #[test]
    fn excitation_closed_on_grid(
        low in -100i32..100,
        steps in 1usize..40,
        step in prop_oneof![Just(0.5), Just(1.0), Just(2.0), Just(0.25)],
        seed in 1u64..(1 << 31) - 1,
        hold in 1usize..4,
    ) {
        let low = low as f64;
        let high = low + steps as f64 * step;
        let grid = AmplitudeGrid::new(low, high, step).unwrap();
        let x = generate_excitation(&grid, 200, seed, hold).unwrap();
        for v in &x {
            let k = (v - low) / step;
            prop_assert!(*v >= low && *v <= high);
            prop_assert!((k - k.round()).abs() < 1e-9);
        }
        prop_assert_eq!(&x, &generate_excitation(&grid, 200, seed, hold).unwrap());
    }

    #[test]
    fn jump_matches_stepping(seed in 1u64..(1 << 31) - 1, n in 0u64..500) {
        let mut lcg = Lcg::new(seed).unwrap();
        for _ in 0..n {
            lcg.next_uniform();
        }
        prop_assert_eq!(Lcg::new(seed).unwrap().jump(n).state(), lcg.state());
    }

    #[test]
    fn residual_orthogonality(seed in any::<u64>(), rows in 10usize..80, cols in 1usize..8) {
        let prob = random_problem(seed, rows, cols, 1.0);
        let sol = batch_ls(&prob).unwrap();
        let g = prob.h.tr_mul(&(&prob.y - &prob.h * &sol.theta));
        prop_assert!(g.norm() <= 1e-8 * prob.h.norm() * prob.y.norm());
        let scripted: f64 = (0..rows)
            .map(|i| {
                let fit: f64 = (0..cols).map(|j| prob.h[(i, j)] * sol.theta[j]).sum();
                (prob.y[i] - fit).powi(2)
            })
            .sum::<f64>() / rows as f64;
        prop_assert!((loss_j(&prob, &sol.theta) - scripted).abs() <= 1e-12 * (1.0 + scripted));
    }

    #[test]
    fn rank_one_separation(
        r in proptest::collection::vec(-2.0..2.0f64, 0..4),
        b in proptest::collection::vec(-3.0..3.0f64, 1..6),
    ) {
        prop_assume!(b.iter().any(|v| v.abs() > 1e-3));
        let full: Vec<f64> = std::iter::once(1.0).chain(r.iter().copied()).collect();
        let m = DMatrix::from_fn(full.len(), b.len(), |i, j| full[i] * b[j]);
        let ch = factor_products(&m).unwrap();
        let got: Vec<f64> = std::iter::once(1.0).chain(ch.r.iter().copied()).collect();
        let rebuilt = DMatrix::from_fn(got.len(), ch.b.len(), |i, j| got[i] * ch.b[j]);
        prop_assert!((rebuilt - &m).norm() <= 1e-12 * m.norm());
    }

    #[test]
    fn augmentation_matches_direct(seed in any::<u64>(), base in 1usize..12, extra in 1usize..8, rows in 25usize..120) {
        let prob = random_problem(seed, rows, base + extra, 0.5);
        let head = RegressionProblem {
            h: prob.h.columns(0, base).into_owned(),
            y: prob.y.clone(),
            columns: prob.columns[..base].to_vec(),
            first_sample: 0,
        };
        let theta0 = batch_ls(&head).unwrap().theta;
        let new_cols = prob.h.columns(base, extra).into_owned();
        let (theta, j) = augment_columns(&head, &theta0, &new_cols).unwrap();
        let direct = batch_ls(&prob).unwrap();
        prop_assert!((&theta - &direct.theta).norm() <= 1e-8 * direct.theta.norm());
        prop_assert!((j - direct.rss / rows as f64).abs() <= 1e-10 * (1.0 + j));
        prop_assert!(j <= loss_j(&head, &theta0) + 1e-10);

        // correction operators against their defining formulas
        let mut ls = AugmentedLs::new(&head).unwrap();
        let upd = ls.augment(&new_cols, &prob.columns[base..]).unwrap();
        let h1 = &head.h;
        let gram_inv = (h1.tr_mul(h1)).try_inverse().unwrap();
        let proj = h1 * &gram_inv * h1.transpose();
        let eye = DMatrix::<f64>::identity(rows, rows);
        let b = (new_cols.tr_mul(&((eye - proj) * &new_cols))).try_inverse().unwrap();
        let a = &gram_inv * h1.tr_mul(&new_cols) * &b;
        prop_assert!((&upd.b_mat - &b).norm() <= 1e-6 * b.norm());
        prop_assert!((&upd.a_mat - &a).norm() <= 1e-6 * (a.norm() + 1e-12));
    }
}

fn random_problem(seed: u64, rows: usize, cols: usize, noise: f64) -> RegressionProblem {
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = Normal::new(0.0, 1.0).unwrap();
    let h = DMatrix::from_fn(rows, cols, |_, _| n.sample(&mut rng));
    let theta = DVector::from_fn(cols, |_, _| n.sample(&mut rng));
    let y = &h * theta + DVector::from_fn(rows, |_, _| noise * n.sample(&mut rng));
    RegressionProblem {
        h,
        y,
        columns: (0..cols).map(|i| Column::OutputLag { lag: i + 1 }).collect(),
        first_sample: 0,
    }
}

#[test]
fn gain_stays_positive_definite() {
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(10);
    let n = Normal::new(0.0, 1.0).unwrap();
    let mut state = EstimatorState::new(6, 1e6).unwrap();
    for _ in 0..10_000 {
        let phi: Vec<f64> = (0..6).map(|_| n.sample(&mut rng)).collect();
        state.update(&phi, n.sample(&mut rng)).unwrap();
    }
    assert_eq!(state.p, state.p.transpose());
    let min_eig = state.p.clone().symmetric_eigen().eigenvalues.min();
    assert!(min_eig > 0.0, "smallest eigenvalue {min_eig}");
    assert!(state.is_positive_definite());
}

#[test]
fn delay_estimate_shift_equivariant() {
    let (ip, _) = common::default_excitation(800, 4242);
    let u: Vec<f64> = ip.iter().map(|v| v - 150.0).collect();
    let ch = common::printed_channels();
    let (r, b, _) = &ch[0][0];
    for k in 0..5 {
        let y = common::oracle_channel(&common::A_WB, b, 1 + k, r, &u);
        assert_eq!(estimate_delay(&u, &y, 10).unwrap().delay, 1 + k);
    }
}

#[test]
fn regressor_reproduces_noiseless_output() {
    let data = common::oracle_dataset(300);
    let dev = hammerstein::preprocess::preprocess(
        &data,
        &hammerstein::preprocess::PreprocessConfig {
            filter_outputs: false,
            ..Default::default()
        },
    )
    .unwrap()
    .data;
    let ch = common::printed_channels();
    let orders = StructureOrders::new(
        5,
        ch[0]
            .iter()
            .map(|(r, b, d)| ChannelOrders { m: b.len() - 1, d: *d, p: r.len() + 1 })
            .collect(),
    )
    .unwrap();
    let prob = build_regressor(&dev, &orders, 0).unwrap();
    let mut theta = common::A_WB.to_vec();
    for (r, b, _) in &ch[0] {
        for ri in std::iter::once(1.0).chain(r.iter().copied()) {
            theta.extend(b.iter().map(|bl| ri * bl));
        }
    }
    let fit = &prob.h * DVector::from_vec(theta);
    assert!((fit - &prob.y).amax() < 1e-12);
    assert_eq!(build_regressor(&dev, &orders, 0).unwrap().h, prob.h);
}

#[test]
fn split_conserves_and_evaluation_is_free_run() {
    let data = common::oracle_dataset(200);
    let (train, test) = split_dataset(&data, 150).unwrap();
    assert_eq!(train.len() + test.len(), 200);
    for s in 0..2 {
        let joined: Vec<f64> = train.output(s).iter().chain(test.output(s)).copied().collect();
        assert_eq!(joined, data.output(s));
    }
    for j in 0..2 {
        let joined: Vec<f64> = train.input(j).iter().chain(test.input(j)).copied().collect();
        assert_eq!(joined, data.input(j));
    }

    let model = paper_preset();
    let base = evaluate(&model, &data).unwrap();
    let outputs: Vec<Signal> = data
        .outputs()
        .iter()
        .map(|s| Signal {
            values: s.values.iter().enumerate().map(|(k, v)| v + (k % 7) as f64).collect(),
            ..s.clone()
        })
        .collect();
    let perturbed = Dataset::new(1.0, data.inputs().to_vec(), outputs).unwrap();
    let rep = evaluate(&model, &perturbed).unwrap();
    for (a, b) in rep.outputs.iter().zip(&base.outputs) {
        assert_eq!(a.predicted, b.predicted);
        let st = error_stats(&a.errors(), StdConvention::Population).unwrap();
        assert_eq!(st.mean, a.mean_error);
        assert_eq!(st.std, a.std_error);
        assert_eq!(st.max_abs, a.max_abs_error);
    }
}
