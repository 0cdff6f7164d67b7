// SPDX-License-Identifier: MIT OR Apache-2.0

//! Dense reference implementations for testing: the segment energy as an
//! explicit least-squares problem, and exhaustive search over all
//! discontinuity sets.
//!
//! Nothing here shares code with the incremental engine. The roughness
//! block is integrated by Gauss quadrature and factored by a symmetric
//! eigendecomposition.

use nalgebra::{DMatrix, Matrix4, SymmetricEigen};

use crate::error::{CssdError, Result};
use crate::model::DataSeries;

/// Largest sample count accepted by [`brute_force_solve`].
pub const MAX_BRUTE_FORCE: usize = 20;

/// Absolute tolerance under which two objective values count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

fn hermite_second_derivatives(s: f64, d: f64) -> [f64; 4] {
    [
        (12.0 * s - 6.0) / (d * d),
        (6.0 * s - 4.0) / d,
        (6.0 - 12.0 * s) / (d * d),
        (6.0 * s - 2.0) / d,
    ]
}

/// Gram matrix of the Hermite second derivatives on an interval of width
/// `d`, by two-point Gauss-Legendre quadrature (exact for the quadratic
/// integrands).
fn roughness_gram(d: f64) -> Matrix4<f64> {
    let h = 0.5 / 3f64.sqrt();
    let mut b = Matrix4::zeros();
    for s in [0.5 - h, 0.5 + h] {
        let g = hermite_second_derivatives(s, d);
        for i in 0..4 {
            for j in 0..4 {
                b[(i, j)] += 0.5 * d * g[i] * g[j];
            }
        }
    }
    b
}

/// A 2x4 matrix `V` with `V^T V` equal to the roughness Gram matrix.
fn roughness_rows(d: f64) -> [[f64; 4]; 2] {
    let eig = SymmetricEigen::new(roughness_gram(d));
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut rows = [[0.0; 4]; 2];
    for (k, &idx) in order.iter().take(2).enumerate() {
        let scale = eig.eigenvalues[idx].max(0.0).sqrt();
        for c in 0..4 {
            rows[k][c] = scale * eig.eigenvectors[(c, idx)];
        }
    }
    rows
}

/// The `(3m - 2) x 2m` system matrix and right-hand sides (one column per
/// component) of the segment `l..=r`.
pub fn dense_system(
    series: &DataSeries<f64>,
    l: usize,
    r: usize,
    p: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    series.check_range(l, r)?;
    crate::model::check_p(p)?;
    let m = r - l + 1;
    let dim = series.dim();
    let rows = 3 * m - 2;
    let mut a = DMatrix::zeros(rows, 2 * m);
    let mut b = DMatrix::zeros(rows, dim);
    let beta = (1.0 - p).sqrt();
    for k in 0..m {
        let i = l + k;
        let alpha = p.sqrt() / series.deltas()[i];
        a[(k, 2 * k)] = alpha;
        for j in 0..dim {
            b[(k, j)] = alpha * series.y(i, j);
        }
    }
    for k in 0..m - 1 {
        let d = series.xs()[l + k + 1] - series.xs()[l + k];
        let v = roughness_rows(d);
        for (q, row) in v.iter().enumerate() {
            for (c, &val) in row.iter().enumerate() {
                a[(m + 2 * k + q, 2 * k + c)] = beta * val;
            }
        }
    }
    Ok((a, b))
}

/// Segment energy per component from a dense QR least-squares solve.
pub fn dense_energy(series: &DataSeries<f64>, l: usize, r: usize, p: f64) -> Result<Vec<f64>> {
    let (a, b) = dense_system(series, l, r, p)?;
    if r - l + 1 <= 2 {
        return Ok(vec![0.0; series.dim()]);
    }
    let qr = a.clone().qr();
    let q = qr.q();
    let rr = qr.r();
    let rhs = q.transpose() * &b;
    let u = rr
        .solve_upper_triangular(&rhs)
        .ok_or_else(|| CssdError::OracleFailure("rank-deficient system".into()))?;
    if u.iter().any(|v| !v.is_finite()) {
        return Err(CssdError::OracleFailure("non-finite solution".into()));
    }
    let res = &a * &u - &b;
    Ok((0..series.dim())
        .map(|j| res.column(j).norm_squared())
        .collect())
}

/// Optimal value and every optimal set of gap indices.
#[derive(Clone, Debug, PartialEq)]
pub struct BruteForceResult {
    pub best: f64,
    pub optimal_sets: Vec<Vec<usize>>,
}

/// Enumerates all `2^(N-1)` subsets of the gaps.
pub fn brute_force_solve(series: &DataSeries<f64>, p: f64, gamma: f64) -> Result<BruteForceResult> {
    let n = series.len();
    if n > MAX_BRUTE_FORCE {
        return Err(CssdError::TooLargeForOracle {
            n,
            max: MAX_BRUTE_FORCE,
        });
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(CssdError::InvalidGamma(gamma));
    }
    let mut energy = vec![vec![0.0; n]; n];
    for l in 0..n {
        for r in l..n {
            energy[l][r] = dense_energy(series, l, r, p)?.iter().sum();
        }
    }
    let gaps = n - 1;
    let values: Vec<f64> = (0u64..1 << gaps)
        .map(|mask| {
            let mut acc = 0.0;
            let mut start = 0;
            let mut count = 0.0;
            for g in 1..n {
                if mask >> (g - 1) & 1 == 1 {
                    acc += energy[start][g - 1];
                    start = g;
                    count += 1.0;
                }
            }
            acc + energy[start][n - 1] + gamma * count
        })
        .collect();
    let best = values.iter().copied().fold(f64::INFINITY, f64::min);
    let optimal_sets = values
        .iter()
        .enumerate()
        .filter(|&(_, &v)| v - best <= TIE_TOLERANCE)
        .map(|(mask, _)| (1..n).filter(|&g| mask >> (g - 1) & 1 == 1).collect())
        .collect();
    Ok(BruteForceResult { best, optimal_sets })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_reproduces_unit_gap_matrix() {
        let b = roughness_gram(1.0);
        let want = [
            [12.0, 6.0, -12.0, 6.0],
            [6.0, 4.0, -6.0, 2.0],
            [-12.0, -6.0, 12.0, -6.0],
            [6.0, 2.0, -6.0, 4.0],
        ];
        for i in 0..4 {
            for j in 0..4 {
                assert!((b[(i, j)] - want[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn eigen_factor_reproduces_gram() {
        for d in [1e-3, 0.37, 1.0, 42.0] {
            let v = roughness_rows(d);
            let b = roughness_gram(d);
            let scale = b.amax();
            for i in 0..4 {
                for j in 0..4 {
                    let g = v[0][i] * v[0][j] + v[1][i] * v[1][j];
                    assert!((g - b[(i, j)]).abs() <= 1e-12 * scale);
                }
            }
        }
    }

    #[test]
    fn short_and_collinear_segments_cost_nothing() {
        let s = DataSeries::<f64>::scalar_unit(vec![0.0, 0.5, 2.0, 2.5], vec![1.0, 2.0, 5.0, 6.0])
            .unwrap();
        assert_eq!(dense_energy(&s, 1, 2, 0.5).unwrap(), vec![0.0]);
        assert!(dense_energy(&s, 0, 3, 0.5).unwrap()[0] < 1e-20);
        let (a, _) = dense_system(&s, 0, 3, 0.5).unwrap();
        assert_eq!(a.shape(), (10, 8));
    }

    #[test]
    fn three_point_tie_has_two_optimal_sets() {
        let s = DataSeries::<f64>::scalar_unit(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 0.0]).unwrap();
        let out = brute_force_solve(&s, 0.5, 0.01).unwrap();
        assert!((out.best - 0.01).abs() < 1e-12);
        assert_eq!(out.optimal_sets, vec![vec![1], vec![2]]);
    }

    #[test]
    fn huge_gamma_prefers_no_jumps() {
        let s = DataSeries::<f64>::scalar_unit(vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 1.0, 0.0, 1.0])
            .unwrap();
        let out = brute_force_solve(&s, 0.5, 1e6).unwrap();
        assert_eq!(out.optimal_sets, vec![Vec::<usize>::new()]);
    }

    #[test]
    fn guard_rejects_large_inputs() {
        let xs: Vec<f64> = (0..21).map(f64::from).collect();
        let s = DataSeries::<f64>::scalar_unit(xs.clone(), xs).unwrap();
        assert!(matches!(
            brute_force_solve(&s, 0.5, 1.0),
            Err(CssdError::TooLargeForOracle { n: 21, max: 20 })
        ));
    }
}
