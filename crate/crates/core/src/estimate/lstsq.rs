//! Batch least squares by Householder QR on column-equilibrated regressors.

use nalgebra::{DMatrix, DVector};

use super::regressor::RegressionProblem;
use crate::error::{Error, Result};

/// Pivot threshold on the equilibrated `R` diagonal below which a column
/// counts as linearly dependent on its predecessors.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct LsSolution {
    pub theta: DVector<f64>,
    /// Residual sum of squares.
    pub rss: f64,
    /// 2-norm condition number of the column-equilibrated regressor.
    pub condition: f64,
}

/// Unit-norm column scaling; returns the scaled matrix and the norms.
/// Zero columns keep scale 1.
pub(crate) fn equilibrate(h: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let norms = DVector::from_iterator(
        h.ncols(),
        h.column_iter().map(|c| {
            let n = c.norm();
            if n > 0.0 {
                n
            } else {
                1.0
            }
        }),
    );
    let mut scaled = h.clone();
    for (mut col, &n) in scaled.column_iter_mut().zip(norms.iter()) {
        col /= n;
    }
    (scaled, norms)
}

pub(crate) fn residual_ss(h: &DMatrix<f64>, y: &DVector<f64>, theta: &DVector<f64>) -> f64 {
    (y - h * theta).norm_squared()
}

fn condition_of(r: &DMatrix<f64>) -> f64 {
    let sv = r.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Least-squares solution of `H theta = y`; errors on numerical rank
/// deficiency, naming the dependent columns.
pub fn batch_ls(prob: &RegressionProblem) -> Result<LsSolution> {
    let (h, y) = (&prob.h, &prob.y);
    let cols = h.ncols();
    if cols == 0 {
        return Err(Error::InvalidArgument("regression has no columns".into()));
    }
    if h.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("regression data".into()));
    }
    let names: Vec<String> = prob.columns.iter().map(|c| c.to_string()).collect();
    let (scaled, norms) = equilibrate(h);

    if h.nrows() < cols {
        let rank = scaled
            .singular_values()
            .iter()
            .filter(|&&s| s > RANK_TOL)
            .count();
        return Err(Error::RankDeficient {
            rank,
            columns: cols,
            condition: f64::INFINITY,
            offending: vec![format!("{} rows for {} columns", h.nrows(), cols)],
        });
    }

    let qr = scaled.qr();
    let r = qr.r();
    let condition = condition_of(&r);
    let weak: Vec<usize> = (0..cols)
        .filter(|&j| r[(j, j)].abs() <= RANK_TOL)
        .collect();
    if !weak.is_empty() {
        let rank = r
            .singular_values()
            .iter()
            .filter(|&&s| s > RANK_TOL)
            .count();
        return Err(Error::RankDeficient {
            rank,
            columns: cols,
            condition,
            offending: dependent_columns(&r, &weak)
                .into_iter()
                .map(|j| names[j].clone())
                .collect(),
        });
    }

    let mut qty = y.clone();
    qr.q_tr_mul(&mut qty);
    let rhs = qty.rows(0, cols).into_owned();
    let theta_scaled = r
        .solve_upper_triangular(&rhs)
        .ok_or_else(|| Error::NonFinite("triangular solve".into()))?;
    let theta = theta_scaled.component_div(&norms);
    let rss = residual_ss(h, y, &theta);
    Ok(LsSolution {
        theta,
        rss,
        condition,
    })
}

/// Columns involved in each near-zero pivot: the weak column itself plus the
/// earlier columns that reproduce it.
fn dependent_columns(r: &DMatrix<f64>, weak: &[usize]) -> Vec<usize> {
    let mut out = std::collections::BTreeSet::new();
    for &j in weak {
        out.insert(j);
        // back-substitute R[..j, ..j] c = R[..j, j], skipping weak pivots
        let mut c = vec![0.0; j];
        for i in (0..j).rev() {
            if weak.contains(&i) {
                continue;
            }
            let mut acc = r[(i, j)];
            for (k, ck) in c.iter().enumerate().skip(i + 1) {
                acc -= r[(i, k)] * ck;
            }
            c[i] = acc / r[(i, i)];
        }
        let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (i, v) in c.iter().enumerate() {
            if scale > 0.0 && v.abs() > 1e-6 * scale {
                out.insert(i);
            }
        }
    }
    out.into_iter().collect()
}

/// Minimum-norm least squares via the singular value decomposition;
/// tolerates rank deficiency.
#[derive(Debug, Clone)]
pub struct MinNormSolution {
    pub theta: DVector<f64>,
    pub rss: f64,
    pub rank: usize,
    /// Standard errors of `theta` under a white equation-error model,
    /// in the units of `theta`.
    pub std_errors: DVector<f64>,
}

pub fn min_norm_ls(h: &DMatrix<f64>, y: &DVector<f64>) -> Result<MinNormSolution> {
    if h.ncols() == 0 {
        return Err(Error::InvalidArgument("regression has no columns".into()));
    }
    if h.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("regression data".into()));
    }
    let (scaled, norms) = equilibrate(h);
    let svd = scaled.svd(true, true);
    let u = svd.u.as_ref().expect("left vectors requested");
    let vt = svd.v_t.as_ref().expect("right vectors requested");
    let sv = &svd.singular_values;
    let cutoff = sv.max() * RANK_TOL;
    let keep: Vec<usize> = (0..sv.len()).filter(|&k| sv[k] > cutoff).collect();

    let mut theta_scaled = DVector::zeros(h.ncols());
    for &k in &keep {
        let coef = u.column(k).dot(y) / sv[k];
        theta_scaled.axpy(coef, &vt.row(k).transpose(), 1.0);
    }
    let theta = theta_scaled.component_div(&norms);
    let rss = residual_ss(h, y, &theta);
    let dof = h.nrows().saturating_sub(keep.len()).max(1);
    let sigma2 = rss / dof as f64;
    let std_errors = DVector::from_fn(h.ncols(), |i, _| {
        let var: f64 = keep.iter().map(|&k| (vt[(k, i)] / sv[k]).powi(2)).sum();
        (sigma2 * var).sqrt() / norms[i]
    });
    Ok(MinNormSolution {
        theta,
        rss,
        rank: keep.len(),
        std_errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::regressor::Column;

    fn problem(h: DMatrix<f64>, y: DVector<f64>) -> RegressionProblem {
        let columns = (0..h.ncols())
            .map(|j| Column::OutputLag { lag: j + 1 })
            .collect();
        RegressionProblem {
            h,
            y,
            columns,
            first_sample: 0,
        }
    }

    #[test]
    fn square_system_exact() {
        let h = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0]);
        let theta = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let y = &h * &theta;
        let sol = batch_ls(&problem(h, y)).unwrap();
        assert!((sol.theta - theta).norm() < 1e-14);
        assert!(sol.rss < 1e-28);
    }

    #[test]
    fn duplicated_column_names_both() {
        let h = DMatrix::from_row_slice(
            4,
            3,
            &[1.0, 2.0, 1.0, 0.0, 1.0, 0.0, 3.0, -1.0, 3.0, 2.0, 0.5, 2.0],
        );
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        match batch_ls(&problem(h, y)) {
            Err(Error::RankDeficient {
                rank,
                columns,
                offending,
                ..
            }) => {
                assert_eq!(rank, 2);
                assert_eq!(columns, 3);
                assert_eq!(offending, vec!["-y(k-1)", "-y(k-3)"]);
            }
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn zero_column_is_rank_deficient() {
        let h = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 2.0, 0.0, 3.0, 0.0]);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert!(matches!(
            batch_ls(&problem(h, y)),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn min_norm_splits_duplicates() {
        let h = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
        let y = DVector::from_vec(vec![2.0, 4.0, 6.0]);
        let sol = min_norm_ls(&h, &y).unwrap();
        assert_eq!(sol.rank, 1);
        assert!((sol.theta[0] - 1.0).abs() < 1e-12);
        assert!((sol.theta[1] - 1.0).abs() < 1e-12);
    }
}
