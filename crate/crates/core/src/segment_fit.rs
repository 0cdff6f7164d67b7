// SPDX-License-Identifier: MIT OR Apache-2.0

//! The minimizing spline on one segment, its evaluation and its piecewise
//! polynomial coefficients.
//!
//! The fit reruns the energy recursion over the segment but keeps the
//! finished rows of the banded triangular factor, then back-substitutes for
//! the Hermite unknowns. This is O(m) in time and memory for `m` sites.

use crate::energy::{absorb_site, roughness_matrix, FinishedRows};
use crate::error::{CssdError, Result};
use crate::model::{check_p, CssdSolution, DataSeries, SegmentSpline};
use crate::scalar::{CompensatedSum, Real};

/// A fitted segment together with its energy per component.
#[derive(Clone, Debug, PartialEq)]
pub struct FittedSegment<T> {
    pub spline: SegmentSpline<T>,
    pub energies: Vec<T>,
}

/// Minimizing smoothing spline on sites `l..=r` (0-based, inclusive) with
/// the given evaluation domain.
pub fn fit_segment<T: Real>(
    series: &DataSeries<T>,
    l: usize,
    r: usize,
    p: T,
    domain: (T, T),
) -> Result<SegmentSpline<T>> {
    fit_segment_with_energy(series, l, r, p, domain).map(|f| f.spline)
}

/// Like [`fit_segment`], also returning the segment energy accumulated by
/// the factorization.
pub fn fit_segment_with_energy<T: Real>(
    series: &DataSeries<T>,
    l: usize,
    r: usize,
    p: T,
    domain: (T, T),
) -> Result<FittedSegment<T>> {
    series.check_range(l, r)?;
    check_p(p)?;
    let xs = series.xs();
    let dim = series.dim();
    if !(domain.0 <= xs[l] && xs[r] <= domain.1) {
        return Err(CssdError::InvalidSegment(format!(
            "domain [{}, {}] does not contain sites {}..={}",
            domain.0, domain.1, l, r
        )));
    }
    let knots = xs[l..=r].to_vec();
    let m = r - l + 1;
    if m == 1 {
        let values = (0..dim).map(|j| vec![series.y(l, j)]).collect();
        let derivs = vec![vec![T::zero()]; dim];
        let spline = SegmentSpline::new(knots, values, derivs, domain)?;
        return Ok(FittedSegment {
            spline,
            energies: vec![T::zero(); dim],
        });
    }

    let sqrt_p = p.sqrt();
    let beta = (T::one() - p).sqrt();
    let alpha0 = sqrt_p / series.deltas()[l];
    let mut r_block = [[alpha0, T::zero()], [T::zero(), T::zero()]];
    let mut z_block = vec![T::zero(); 2 * dim];
    for j in 0..dim {
        z_block[j] = alpha0 * series.y(l, j);
    }
    let mut residual = vec![T::zero(); dim];
    let mut scratch = Vec::with_capacity(5 * dim);
    let mut sums = vec![CompensatedSum::new(); dim];
    let mut rows: Vec<FinishedRows<T>> = Vec::with_capacity(m - 1);

    for i in l + 1..=r {
        let mut done = FinishedRows {
            coeffs: [[T::zero(); 4]; 2],
            rhs: Vec::with_capacity(2 * dim),
        };
        absorb_site(
            &mut r_block,
            &mut z_block,
            xs[i] - xs[i - 1],
            sqrt_p / series.deltas()[i],
            beta,
            |j| series.y(i, j),
            &mut residual,
            &mut scratch,
            Some(&mut done),
        );
        if i > l + 1 {
            for (s, &res) in sums.iter_mut().zip(&residual) {
                s.add(res * res);
            }
        }
        rows.push(done);
    }

    let mut values = vec![vec![T::zero(); m]; dim];
    let mut derivs = vec![vec![T::zero(); m]; dim];
    for j in 0..dim {
        let d_last = z_block[dim + j] / r_block[1][1];
        let f_last = (z_block[j] - r_block[0][1] * d_last) / r_block[0][0];
        values[j][m - 1] = f_last;
        derivs[j][m - 1] = d_last;
        for k in (0..m - 1).rev() {
            let rk = &rows[k];
            let (f1, d1) = (values[j][k + 1], derivs[j][k + 1]);
            let dk =
                (rk.rhs[dim + j] - rk.coeffs[1][2] * f1 - rk.coeffs[1][3] * d1) / rk.coeffs[1][1];
            let fk =
                (rk.rhs[j] - rk.coeffs[0][1] * dk - rk.coeffs[0][2] * f1 - rk.coeffs[0][3] * d1)
                    / rk.coeffs[0][0];
            values[j][k] = fk;
            derivs[j][k] = dk;
        }
    }
    let spline = SegmentSpline::new(knots, values, derivs, domain)?;
    Ok(FittedSegment {
        spline,
        energies: sums.iter().map(CompensatedSum::value).collect(),
    })
}

/// Local polynomial of one knot interval: `f(t) = sum_k coeffs[j][k] * (t - x0)^k`
/// for component `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Piece<T> {
    pub x0: T,
    pub coeffs: Vec<[T; 4]>,
}

impl<T: Real> Piece<T> {
    /// Horner evaluation of component `j`.
    pub fn eval(&self, j: usize, t: T) -> T {
        let h = t - self.x0;
        let c = &self.coeffs[j];
        c[0] + h * (c[1] + h * (c[2] + h * c[3]))
    }
}

#[inline]
fn hermite_coeffs<T: Real>(f0: T, d0: T, f1: T, d1: T, d: T) -> [T; 4] {
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let c2 = -(d1 + two * d0) / d + three * (f1 - f0) / (d * d);
    let c3 = (d1 + d0) / (d * d) + two * (f0 - f1) / (d * d * d);
    [f0, d0, c2, c3]
}

/// Local-coordinate cubic coefficients of every knot interval. A single-knot
/// segment yields one linear record.
pub fn piece_coefficients<T: Real>(s: &SegmentSpline<T>) -> Vec<Piece<T>> {
    let knots = s.knots();
    let dim = s.dim();
    if knots.len() == 1 {
        return vec![Piece {
            x0: knots[0],
            coeffs: (0..dim)
                .map(|j| [s.values()[j][0], s.derivs()[j][0], T::zero(), T::zero()])
                .collect(),
        }];
    }
    (0..knots.len() - 1)
        .map(|i| {
            let d = knots[i + 1] - knots[i];
            Piece {
                x0: knots[i],
                coeffs: (0..dim)
                    .map(|j| {
                        let (f, fd) = (&s.values()[j], &s.derivs()[j]);
                        hermite_coeffs(f[i], fd[i], f[i + 1], fd[i + 1], d)
                    })
                    .collect(),
            }
        })
        .collect()
}

/// Evaluates a segment at `t` inside its domain. Between knots the Hermite
/// cubic is used; beyond the extremal knots the spline continues linearly.
pub fn eval_spline<T: Real>(s: &SegmentSpline<T>, t: T) -> Result<Vec<T>> {
    let (a, b) = s.domain();
    if !(a <= t && t <= b) {
        return Err(CssdError::OutOfDomain {
            t: t.to_f64().unwrap_or(f64::NAN),
            a: a.to_f64().unwrap_or(f64::NAN),
            b: b.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(eval_extended(s, t))
}

/// Evaluation without the domain check; outside the knots the linear
/// extension applies on either side.
pub fn eval_extended<T: Real>(s: &SegmentSpline<T>, t: T) -> Vec<T> {
    let knots = s.knots();
    let last = knots.len() - 1;
    let dim = s.dim();
    if t <= knots[0] || t >= knots[last] {
        let i = if t <= knots[0] { 0 } else { last };
        let h = t - knots[i];
        return (0..dim)
            .map(|j| s.values()[j][i] + h * s.derivs()[j][i])
            .collect();
    }
    let i = knots.partition_point(|&k| k <= t) - 1;
    let d = knots[i + 1] - knots[i];
    let h = t - knots[i];
    (0..dim)
        .map(|j| {
            let (f, fd) = (&s.values()[j], &s.derivs()[j]);
            let c = hermite_coeffs(f[i], fd[i], f[i + 1], fd[i + 1], d);
            c[0] + h * (c[1] + h * (c[2] + h * c[3]))
        })
        .collect()
}

/// Second derivative at knot `i` from the left and from the right piece
/// (`None` where no piece exists), for component `j`.
pub fn knot_second_derivatives<T: Real>(
    s: &SegmentSpline<T>,
    j: usize,
    i: usize,
) -> (Option<T>, Option<T>) {
    let pieces = piece_coefficients(s);
    let knots = s.knots();
    let two = T::lit(2.0);
    let six = T::lit(6.0);
    let left = (i > 0 && knots.len() > 1).then(|| {
        let c = pieces[i - 1].coeffs[j];
        let d = knots[i] - knots[i - 1];
        two * c[2] + six * c[3] * d
    });
    let right = (i + 1 < knots.len()).then(|| two * pieces[i].coeffs[j][2]);
    (left, right)
}

/// The smoothing functional of a segment evaluated from its Hermite data:
/// weighted squared residuals at the knots plus the exact integral of the
/// squared second derivative, per component.
pub fn functional_value<T: Real>(
    series: &DataSeries<T>,
    l: usize,
    s: &SegmentSpline<T>,
    p: T,
) -> Result<Vec<T>> {
    let m = s.knots().len();
    series.check_range(l, l + m - 1)?;
    if series.xs()[l..l + m] != *s.knots() {
        return Err(CssdError::InvalidSegment(
            "knots differ from the series sites".into(),
        ));
    }
    let q = T::one() - p;
    let out = (0..s.dim())
        .map(|j| {
            let (f, fd) = (&s.values()[j], &s.derivs()[j]);
            let mut data = CompensatedSum::new();
            for i in 0..m {
                let r = (series.y(l + i, j) - f[i]) / series.deltas()[l + i];
                data.add(r * r);
            }
            let mut rough = CompensatedSum::new();
            for i in 0..m.saturating_sub(1) {
                let b = roughness_matrix(s.knots()[i + 1] - s.knots()[i]);
                let v = [f[i], fd[i], f[i + 1], fd[i + 1]];
                let mut acc = T::zero();
                for a in 0..4 {
                    for c in 0..4 {
                        acc += v[a] * b[a][c] * v[c];
                    }
                }
                rough.add(acc);
            }
            p * data.value() + q * rough.value()
        })
        .collect();
    Ok(out)
}

impl<T: Real> CssdSolution<T> {
    /// Evaluates the piecewise spline anywhere on the real line.
    ///
    /// At a discontinuity location the mean of the left and right limits is
    /// returned; outside the data range the boundary segments continue
    /// linearly.
    pub fn evaluate(&self, t: T) -> Vec<T> {
        let locs = self.discontinuities().locations();
        let k = locs.partition_point(|&loc| loc < t);
        let segs = self.segments();
        if k < locs.len() && locs[k] == t {
            let left = eval_extended(&segs[k], t);
            let right = eval_extended(&segs[k + 1], t);
            let half = T::lit(0.5);
            left.iter()
                .zip(&right)
                .map(|(&a, &b)| half * (a + b))
                .collect()
        } else {
            eval_extended(&segs[k], t)
        }
    }
}
