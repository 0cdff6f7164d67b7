// SPDX-License-Identifier: MIT OR Apache-2.0

//! Incremental smoothing-spline energies.
//!
//! The energy of the classical smoothing spline on sites `l..=r` is the
//! residual of a banded least-squares problem in the Hermite unknowns
//! `(f_i, f'_i)`. Each site contributes a data row `alpha_i * e_1^T` and
//! each gap a two-row block `beta * U(d)` where `U(d)^T U(d)` is the
//! roughness quadratic form of one cubic piece. Extending the interval by
//! one site only touches the trailing 2x2 block of the triangular factor,
//! so the energy of every prefix is available in O(1) per site.

use crate::error::{CssdError, Result};
use crate::model::{check_p, DataSeries};
use crate::scalar::{CompensatedSum, Real};

/// Factor `U` with `U^T U = B`, where `v^T B v` is the integrated squared
/// second derivative of the cubic Hermite piece with end data
/// `v = [f_i, f'_i, f_{i+1}, f'_{i+1}]` on a gap of width `d`.
pub fn local_roughness_factor<T: Real>(d: T) -> Result<[[T; 4]; 2]> {
    if !(d > T::zero() && d.is_finite()) {
        return Err(CssdError::NonPositiveGap(d.to_f64().unwrap_or(f64::NAN)));
    }
    Ok(roughness_factor_unchecked(d))
}

#[inline]
fn roughness_factor_unchecked<T: Real>(d: T) -> [[T; 4]; 2] {
    let sqrt3 = T::lit(3.0).sqrt();
    let inv_sqrt_d = d.sqrt().recip();
    let a = T::lit(2.0) * sqrt3 * inv_sqrt_d / d;
    let b = sqrt3 * inv_sqrt_d;
    let z = T::zero();
    [[a, b, -a, b], [z, inv_sqrt_d, z, -inv_sqrt_d]]
}

/// The roughness matrix `B` assembled directly from its closed form.
pub fn roughness_matrix<T: Real>(d: T) -> [[T; 4]; 4] {
    let d2 = d * d;
    let d3 = d2 * d;
    let c = T::lit;
    [
        [c(12.0) / d3, c(6.0) / d2, c(-12.0) / d3, c(6.0) / d2],
        [c(6.0) / d2, c(4.0) / d, c(-6.0) / d2, c(2.0) / d],
        [c(-12.0) / d3, c(-6.0) / d2, c(12.0) / d3, c(-6.0) / d2],
        [c(6.0) / d2, c(2.0) / d, c(-6.0) / d2, c(4.0) / d],
    ]
}

/// Two finished rows of the banded triangular factor: the pivot rows of
/// `f_k` and `f'_k`, with coefficients on `(f_k, f'_k, f_{k+1}, f'_{k+1})`,
/// and their reduced right-hand sides (`2 * D`, row-major).
#[derive(Clone, Debug)]
pub(crate) struct FinishedRows<T> {
    pub(crate) coeffs: [[T; 4]; 2],
    pub(crate) rhs: Vec<T>,
}

/// Absorbs the gap block and data row of one new site into the trailing
/// factor block.
///
/// `r_block`/`z_block` hold the pivot rows of the current last site's
/// unknowns. On return they hold those of the new site, `residual` holds
/// the new residual entry per component, and if `finished` is given it
/// receives the rows that no later site can touch.
#[allow(clippy::too_many_arguments)]
pub(crate) fn absorb_site<T: Real>(
    r_block: &mut [[T; 2]; 2],
    z_block: &mut [T],
    gap: T,
    alpha: T,
    beta: T,
    y: impl Fn(usize) -> T,
    residual: &mut [T],
    scratch: &mut Vec<T>,
    finished: Option<&mut FinishedRows<T>>,
) {
    let dim = residual.len();
    let zero = T::zero();
    let u = roughness_factor_unchecked(gap);
    let mut m = [
        [r_block[0][0], r_block[0][1], zero, zero],
        [zero, r_block[1][1], zero, zero],
        [
            beta * u[0][0],
            beta * u[0][1],
            beta * u[0][2],
            beta * u[0][3],
        ],
        [
            beta * u[1][0],
            beta * u[1][1],
            beta * u[1][2],
            beta * u[1][3],
        ],
        [zero, zero, alpha, zero],
    ];
    scratch.clear();
    scratch.extend_from_slice(&z_block[..2 * dim]);
    scratch.extend(std::iter::repeat_n(zero, 2 * dim));
    scratch.extend((0..dim).map(|j| alpha * y(j)));
    let rhs = scratch.as_mut_slice();

    for col in 0..4 {
        for row in col + 1..5 {
            let b = m[row][col];
            if b == zero {
                continue;
            }
            let a = m[col][col];
            let h = a.hypot(b);
            let (c, s) = (a / h, b / h);
            for k in col..4 {
                let (top, bot) = (m[col][k], m[row][k]);
                m[col][k] = c * top + s * bot;
                m[row][k] = c * bot - s * top;
            }
            m[row][col] = zero;
            for j in 0..dim {
                let (top, bot) = (rhs[col * dim + j], rhs[row * dim + j]);
                rhs[col * dim + j] = c * top + s * bot;
                rhs[row * dim + j] = c * bot - s * top;
            }
        }
    }

    if let Some(done) = finished {
        done.coeffs = [m[0], m[1]];
        done.rhs.clear();
        done.rhs.extend_from_slice(&rhs[..2 * dim]);
    }
    *r_block = [[m[2][2], m[2][3]], [zero, m[3][3]]];
    z_block[..2 * dim].copy_from_slice(&rhs[2 * dim..4 * dim]);
    residual.copy_from_slice(&rhs[4 * dim..5 * dim]);
}

/// Rolling state of the incremental factorization for one start site.
#[derive(Clone, Debug)]
pub struct EnergyState<T> {
    r_block: [[T; 2]; 2],
    z_block: Vec<T>,
    sums: Vec<CompensatedSum<T>>,
    energies: Vec<T>,
    count: usize,
    sqrt_p: T,
    beta: T,
    last_x: T,
    residual: Vec<T>,
    scratch: Vec<T>,
}

impl<T: Real> EnergyState<T> {
    /// State that has absorbed the single site `(x, y, delta)`.
    pub fn new(x: T, y: &[T], delta: T, p: T) -> Result<Self> {
        check_p(p)?;
        check_delta(delta)?;
        let dim = y.len();
        let mut state = Self {
            r_block: [[T::zero(); 2]; 2],
            z_block: vec![T::zero(); 2 * dim],
            sums: vec![CompensatedSum::new(); dim],
            energies: vec![T::zero(); dim],
            count: 0,
            sqrt_p: p.sqrt(),
            beta: (T::one() - p).sqrt(),
            last_x: x,
            residual: vec![T::zero(); dim],
            scratch: Vec::with_capacity(5 * dim),
        };
        state.reset_with(x, delta, |j| y[j]);
        Ok(state)
    }

    fn reset_with(&mut self, x: T, delta: T, y: impl Fn(usize) -> T) {
        let alpha = self.sqrt_p / delta;
        self.r_block = [[alpha, T::zero()], [T::zero(), T::zero()]];
        let dim = self.energies.len();
        for j in 0..dim {
            self.z_block[j] = alpha * y(j);
            self.z_block[dim + j] = T::zero();
        }
        self.sums
            .iter_mut()
            .for_each(|s| *s = CompensatedSum::new());
        self.energies.iter_mut().for_each(|e| *e = T::zero());
        self.count = 1;
        self.last_x = x;
    }

    /// Absorbs one more site, which must lie to the right of the last one.
    pub fn push(&mut self, x: T, y: &[T], delta: T) -> Result<()> {
        if y.len() != self.dim() {
            return Err(CssdError::DimensionMismatch {
                index: self.count,
                expected: self.dim(),
                found: y.len(),
            });
        }
        check_delta(delta)?;
        if !(x > self.last_x) || !x.is_finite() {
            return Err(CssdError::NonIncreasingX {
                x: x.to_f64().unwrap_or(f64::NAN),
                last: self.last_x.to_f64().unwrap_or(f64::NAN),
            });
        }
        self.push_unchecked(x, delta, |j| y[j]);
        Ok(())
    }

    #[inline]
    pub(crate) fn push_unchecked(&mut self, x: T, delta: T, y: impl Fn(usize) -> T) {
        let alpha = self.sqrt_p / delta;
        absorb_site(
            &mut self.r_block,
            &mut self.z_block,
            x - self.last_x,
            alpha,
            self.beta,
            y,
            &mut self.residual,
            &mut self.scratch,
            None,
        );
        // two sites are always interpolated exactly by a line
        if self.count >= 2 {
            for ((sum, e), &res) in self
                .sums
                .iter_mut()
                .zip(self.energies.iter_mut())
                .zip(&self.residual)
            {
                sum.add(res * res);
                // the compensated value may wobble by an ulp; keep it monotone
                *e = e.max(sum.value());
            }
        }
        self.count += 1;
        self.last_x = x;
    }

    /// Accumulated energy per ordinate component.
    pub fn energies(&self) -> &[T] {
        &self.energies
    }

    /// Energy summed over components in a fixed order.
    pub fn total(&self) -> T {
        let mut acc = T::zero();
        for &e in &self.energies {
            acc += e;
        }
        acc
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn last_x(&self) -> T {
        self.last_x
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// Trailing 2x2 block of the triangular factor.
    pub fn r_block(&self) -> [[T; 2]; 2] {
        self.r_block
    }

    /// Reduced right-hand sides of the trailing block, row-major `2 x D`.
    pub fn z_block(&self) -> &[T] {
        &self.z_block
    }
}

fn check_delta<T: Real>(delta: T) -> Result<()> {
    if delta > T::zero() && delta.is_finite() {
        Ok(())
    } else {
        Err(CssdError::NonPositiveDelta { index: 0 })
    }
}

/// Direction in which a prefix stream extends its interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// Yields `E[start..=start]`, `E[start..=start+1]`, ...
    Forward,
    /// Yields `E[start..=start]`, `E[start-1..=start]`, ...
    Reverse,
}

/// Lazy stream of interval energies anchored at one site.
///
/// Reverse streams mirror the abscissa, so they run the same update as
/// forward streams.
#[derive(Clone, Debug)]
pub struct EnergyStream<'a, T> {
    series: &'a DataSeries<T>,
    direction: Direction,
    next: Option<usize>,
    state: EnergyState<T>,
    started: bool,
}

impl<'a, T: Real> EnergyStream<'a, T> {
    pub fn new(
        series: &'a DataSeries<T>,
        start: usize,
        direction: Direction,
        p: T,
    ) -> Result<Self> {
        series.check_range(start, start)?;
        let x = oriented_x(series, start, direction);
        let state = EnergyState::new(x, &series.row(start), series.deltas()[start], p)?;
        Ok(Self {
            series,
            direction,
            next: step(start, direction, series.len()),
            state,
            started: false,
        })
    }

    /// Re-anchors the stream at `start` without reallocating.
    pub(crate) fn restart(&mut self, start: usize) {
        let series = self.series;
        let x = oriented_x(series, start, self.direction);
        self.state
            .reset_with(x, series.deltas()[start], |j| series.y(start, j));
        self.next = step(start, self.direction, series.len());
        self.started = false;
    }

    /// Advances to the next interval and exposes the engine state, without
    /// allocating.
    pub fn advance(&mut self) -> Option<&EnergyState<T>> {
        if !self.started {
            self.started = true;
            return Some(&self.state);
        }
        let i = self.next?;
        let series = self.series;
        let x = oriented_x(series, i, self.direction);
        self.state
            .push_unchecked(x, series.deltas()[i], |j| series.y(i, j));
        self.next = step(i, self.direction, series.len());
        Some(&self.state)
    }
}

impl<T: Real> Iterator for EnergyStream<'_, T> {
    type Item = Vec<T>;

    fn next(&mut self) -> Option<Vec<T>> {
        self.advance().map(|s| s.energies().to_vec())
    }
}

#[inline]
fn oriented_x<T: Real>(series: &DataSeries<T>, i: usize, direction: Direction) -> T {
    match direction {
        Direction::Forward => series.xs()[i],
        Direction::Reverse => -series.xs()[i],
    }
}

#[inline]
fn step(i: usize, direction: Direction, n: usize) -> Option<usize> {
    match direction {
        Direction::Forward => (i + 1 < n).then_some(i + 1),
        Direction::Reverse => i.checked_sub(1),
    }
}

/// Energies of the intervals anchored at `start`, extended one site at a
/// time in `direction`.
pub fn prefix_energies<T: Real>(
    series: &DataSeries<T>,
    start: usize,
    direction: Direction,
    p: T,
) -> Result<EnergyStream<'_, T>> {
    EnergyStream::new(series, start, direction, p)
}

/// Energy per component of the smoothing spline on sites `l..=r`.
pub fn interval_energy<T: Real>(
    series: &DataSeries<T>,
    l: usize,
    r: usize,
    p: T,
) -> Result<Vec<T>> {
    series.check_range(l, r)?;
    let mut stream = EnergyStream::new(series, l, Direction::Forward, p)?;
    let mut out = Vec::new();
    for _ in l..=r {
        out = stream.advance().expect("range checked").energies().to_vec();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gram(u: &[[f64; 4]; 2]) -> [[f64; 4]; 4] {
        let mut g = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                g[i][j] = u[0][i] * u[0][j] + u[1][i] * u[1][j];
            }
        }
        g
    }

    #[test]
    fn unit_gap_factor_reproduces_printed_matrix() {
        let u = local_roughness_factor(1.0).unwrap();
        let expected = [
            [12.0, 6.0, -12.0, 6.0],
            [6.0, 4.0, -6.0, 2.0],
            [-12.0, -6.0, 12.0, -6.0],
            [6.0, 2.0, -6.0, 4.0],
        ];
        let g = gram(&u);
        for i in 0..4 {
            for j in 0..4 {
                assert!(
                    (g[i][j] - expected[i][j]).abs() <= 1e-13 * 12.0,
                    "{i},{j}: {}",
                    g[i][j]
                );
            }
        }
        assert_eq!(roughness_matrix(1.0), expected);
    }

    #[test]
    fn factor_annihilates_lines() {
        for &d in &[0.01, 1.0, 7.5] {
            let u = local_roughness_factor(d).unwrap();
            let v = [0.0, 1.0, d, 1.0];
            for row in &u {
                let s: f64 = row.iter().zip(&v).map(|(a, b)| a * b).sum();
                assert!(s.abs() < 1e-12 * (1.0 + d.powf(-1.5)));
            }
        }
    }

    #[test]
    fn factor_rejects_bad_gaps() {
        assert!(matches!(
            local_roughness_factor(0.0),
            Err(CssdError::NonPositiveGap(_))
        ));
        assert!(matches!(
            local_roughness_factor(-1.0),
            Err(CssdError::NonPositiveGap(_))
        ));
    }

    #[test]
    fn fresh_state_has_zero_energy() {
        let st = EnergyState::<f64>::new(0.0, &[3.0, -1.0], 2.0, 0.5).unwrap();
        assert_eq!(st.energies(), &[0.0, 0.0]);
        assert_eq!(st.r_block()[0][0], 0.5f64.sqrt() / 2.0);
        assert!(matches!(
            EnergyState::<f64>::new(0.0, &[1.0], 1.0, 1.0),
            Err(CssdError::InvalidP(_))
        ));
    }

    #[test]
    fn second_site_keeps_energy_zero() {
        let mut st = EnergyState::<f64>::new(0.0, &[3.0], 1.0, 0.3).unwrap();
        st.push(0.7, &[-2.0], 0.5).unwrap();
        assert_eq!(st.energies(), &[0.0]);
    }

    #[test]
    fn collinear_sites_have_zero_energy() {
        let mut st = EnergyState::<f64>::new(0.0, &[1.0], 1.0, 0.7).unwrap();
        st.push(0.3, &[1.6], 1.0).unwrap();
        st.push(2.0, &[5.0], 1.0).unwrap();
        st.push(2.5, &[6.0], 1.0).unwrap();
        assert!(st.energies()[0].abs() < 1e-24);
    }

    #[test]
    fn push_rejects_bad_sites() {
        let mut st = EnergyState::<f64>::new(1.0, &[0.0], 1.0, 0.5).unwrap();
        assert!(matches!(
            st.push(1.0, &[0.0], 1.0),
            Err(CssdError::NonIncreasingX { .. })
        ));
        assert!(matches!(
            st.push(2.0, &[0.0], 0.0),
            Err(CssdError::NonPositiveDelta { .. })
        ));
        assert!(matches!(
            st.push(2.0, &[0.0, 1.0], 1.0),
            Err(CssdError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn incremental_equals_restart_from_scratch() {
        let xs = [0.0, 0.4, 1.1, 1.5, 2.6, 3.0];
        let ys = [0.3, -0.2, 1.0, 0.4, 0.9, -0.5];
        let mut st = EnergyState::<f64>::new(xs[0], &[ys[0]], 1.0, 0.6).unwrap();
        for i in 1..xs.len() {
            st.push(xs[i], &[ys[i]], 1.0).unwrap();
            let mut fresh = EnergyState::<f64>::new(xs[0], &[ys[0]], 1.0, 0.6).unwrap();
            for k in 1..=i {
                fresh.push(xs[k], &[ys[k]], 1.0).unwrap();
            }
            assert_eq!(st.energies(), fresh.energies());
        }
    }

    #[test]
    fn streams_have_expected_lengths_and_zero_heads() {
        let xs: Vec<f64> = (0..7)
            .map(|i| i as f64 * 0.3 + (i as f64).sin() * 0.05)
            .collect();
        let ys: Vec<f64> = (0..7).map(|i| ((i * 7) % 5) as f64).collect();
        let s = DataSeries::<f64>::scalar_unit(xs, ys).unwrap();
        let fwd: Vec<_> = prefix_energies(&s, 0, Direction::Forward, 0.5)
            .unwrap()
            .collect();
        assert_eq!(fwd.len(), 7);
        assert_eq!(fwd[0], vec![0.0]);
        assert_eq!(fwd[1], vec![0.0]);
        let rev: Vec<_> = prefix_energies(&s, 4, Direction::Reverse, 0.5)
            .unwrap()
            .collect();
        assert_eq!(rev.len(), 5);
        assert!(prefix_energies(&s, 7, Direction::Forward, 0.5).is_err());
    }

    #[test]
    fn reverse_stream_matches_forward_on_mirrored_data() {
        let xs = vec![0.0, 0.5, 1.25, 2.0, 3.5, 4.0];
        let ys = vec![1.0, -1.0, 2.0, 0.5, 0.0, 3.0];
        let ds = vec![1.0, 0.5, 2.0, 1.0, 1.5, 1.0];
        let s = DataSeries::<f64>::scalar(xs.clone(), ys.clone(), ds.clone()).unwrap();
        let m = DataSeries::<f64>::scalar(
            xs.iter().rev().map(|x| -x).collect(),
            ys.iter().rev().copied().collect(),
            ds.iter().rev().copied().collect(),
        )
        .unwrap();
        let rev: Vec<_> = prefix_energies(&s, 5, Direction::Reverse, 0.8)
            .unwrap()
            .collect();
        let fwd: Vec<_> = prefix_energies(&m, 0, Direction::Forward, 0.8)
            .unwrap()
            .collect();
        assert_eq!(rev, fwd);
    }

    #[test]
    fn vector_energies_are_per_component_scalar_runs() {
        let xs = vec![0.0, 0.3, 0.9, 1.4, 2.0];
        let a = vec![1.0, 0.0, 2.0, -1.0, 0.5];
        let b = vec![0.2, 0.1, -0.3, 0.8, 0.0];
        let ds = vec![1.0; 5];
        let v = DataSeries::<f64>::new(xs.clone(), vec![a.clone(), b.clone()], ds.clone()).unwrap();
        let sa = DataSeries::<f64>::scalar(xs.clone(), a, ds.clone()).unwrap();
        let sb = DataSeries::<f64>::scalar(xs, b, ds).unwrap();
        let ev: Vec<_> = prefix_energies(&v, 0, Direction::Forward, 0.4)
            .unwrap()
            .collect();
        let ea: Vec<_> = prefix_energies(&sa, 0, Direction::Forward, 0.4)
            .unwrap()
            .collect();
        let eb: Vec<_> = prefix_energies(&sb, 0, Direction::Forward, 0.4)
            .unwrap()
            .collect();
        for k in 0..5 {
            assert_eq!(ev[k], vec![ea[k][0], eb[k][0]]);
        }
    }

    #[test]
    fn single_precision_engine_runs() {
        let mut st = EnergyState::<f32>::new(0.0, &[0.0], 1.0, 0.5).unwrap();
        st.push(1.0, &[1.0], 1.0).unwrap();
        st.push(2.0, &[0.0], 1.0).unwrap();
        let mut st64 = EnergyState::<f64>::new(0.0, &[0.0], 1.0, 0.5).unwrap();
        st64.push(1.0, &[1.0], 1.0).unwrap();
        st64.push(2.0, &[0.0], 1.0).unwrap();
        assert!((st.energies()[0] as f64 - st64.energies()[0]).abs() < 1e-5);
    }

    fn series_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (3usize..25).prop_flat_map(|n| {
            (
                proptest::collection::vec(1u32..64, n),
                proptest::collection::vec(-4.0f64..4.0, n),
            )
                .prop_map(|(steps, ys)| {
                    // dyadic sites keep shifted gaps exact
                    let mut x = 0.0;
                    let xs = steps
                        .iter()
                        .map(|&s| {
                            x += s as f64 / 16.0;
                            x
                        })
                        .collect();
                    (xs, ys)
                })
        })
    }

    proptest! {
        #[test]
        fn factor_identity_holds_for_random_gaps(d in 1e-3f64..1e3) {
            let g = gram(&local_roughness_factor(d).unwrap());
            let b = roughness_matrix(d);
            let scale = b.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
            for i in 0..4 {
                for j in 0..4 {
                    prop_assert!((g[i][j] - b[i][j]).abs() <= 1e-13 * scale);
                }
            }
        }

        #[test]
        fn energies_monotone_in_both_directions((xs, ys) in series_strategy(), p in 0.05f64..0.95) {
            let s = DataSeries::<f64>::scalar_unit(xs, ys).unwrap();
            let n = s.len();
            let fwd: Vec<f64> = prefix_energies(&s, 0, Direction::Forward, p).unwrap().map(|e| e[0]).collect();
            prop_assert!(fwd.windows(2).all(|w| w[0] <= w[1]));
            let rev: Vec<f64> = prefix_energies(&s, n - 1, Direction::Reverse, p).unwrap().map(|e| e[0]).collect();
            prop_assert!(rev.windows(2).all(|w| w[0] <= w[1]));
        }

        #[test]
        fn shift_of_abscissa_is_bitwise_invisible((xs, ys) in series_strategy(), c in -64i32..64) {
            let s = DataSeries::<f64>::scalar_unit(xs.clone(), ys.clone()).unwrap();
            let t = DataSeries::<f64>::scalar_unit(xs.iter().map(|x| x + c as f64).collect(), ys).unwrap();
            let a: Vec<_> = prefix_energies(&s, 0, Direction::Forward, 0.5).unwrap().collect();
            let b: Vec<_> = prefix_energies(&t, 0, Direction::Forward, 0.5).unwrap().collect();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn ordinate_offset_leaves_energies((xs, ys) in series_strategy(), c in -10.0f64..10.0) {
            let s = DataSeries::<f64>::scalar_unit(xs.clone(), ys.clone()).unwrap();
            let t = DataSeries::<f64>::scalar_unit(xs, ys.iter().map(|y| y + c).collect()).unwrap();
            let a: Vec<_> = prefix_energies(&s, 0, Direction::Forward, 0.5).unwrap().collect();
            let b: Vec<_> = prefix_energies(&t, 0, Direction::Forward, 0.5).unwrap().collect();
            for (ea, eb) in a.iter().zip(&b) {
                let scale = ea[0].abs().max(eb[0].abs());
                prop_assert!((ea[0] - eb[0]).abs() <= 1e-9 * scale + 1e-12);
            }
        }
    }
}
