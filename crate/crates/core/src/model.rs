// SPDX-License-Identifier: MIT OR Apache-2.0

//! Domain types shared by the solver, the fitter and the front ends.
//!
//! Every constructor validates its invariants, so numerical code downstream
//! can assume well-formed input.

use std::ops::RangeInclusive;

use crate::error::{CssdError, Result};
use crate::scalar::Real;

/// Sorted sample sites with (possibly vector-valued) observations and
/// per-site standard deviations.
///
/// Observations are stored column-major: `column(j)` holds the `j`-th
/// component of every sample.
#[derive(Clone, Debug, PartialEq)]
pub struct DataSeries<T> {
    xs: Vec<T>,
    columns: Vec<Vec<T>>,
    deltas: Vec<T>,
}

impl<T: Real> DataSeries<T> {
    /// Builds a series from sites, one observation column per dimension and
    /// standard deviations.
    pub fn new(xs: Vec<T>, columns: Vec<Vec<T>>, deltas: Vec<T>) -> Result<Self> {
        let n = xs.len();
        if n == 0 {
            return Err(CssdError::EmptyInput);
        }
        if columns.is_empty() {
            return Err(CssdError::DimensionMismatch {
                index: 0,
                expected: 1,
                found: 0,
            });
        }
        if deltas.len() != n {
            return Err(CssdError::InvalidRange {
                start: 0,
                end: deltas.len(),
                len: n,
            });
        }
        for (j, col) in columns.iter().enumerate() {
            if col.len() != n {
                return Err(CssdError::DimensionMismatch {
                    index: j,
                    expected: n,
                    found: col.len(),
                });
            }
        }
        for i in 0..n {
            if !xs[i].is_finite()
                || !deltas[i].is_finite()
                || columns.iter().any(|c| !c[i].is_finite())
            {
                return Err(CssdError::NonFiniteValue { index: i });
            }
            if deltas[i] <= T::zero() {
                return Err(CssdError::NonPositiveDelta { index: i });
            }
            if i > 0 && xs[i] <= xs[i - 1] {
                return Err(CssdError::NotStrictlyIncreasing { index: i });
            }
        }
        Ok(Self {
            xs,
            columns,
            deltas,
        })
    }

    /// Scalar-valued series.
    pub fn scalar(xs: Vec<T>, ys: Vec<T>, deltas: Vec<T>) -> Result<Self> {
        Self::new(xs, vec![ys], deltas)
    }

    /// Scalar-valued series with unit standard deviations.
    pub fn scalar_unit(xs: Vec<T>, ys: Vec<T>) -> Result<Self> {
        let deltas = vec![T::one(); xs.len()];
        Self::new(xs, vec![ys], deltas)
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// Number of ordinate components `D`.
    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn xs(&self) -> &[T] {
        &self.xs
    }

    pub fn deltas(&self) -> &[T] {
        &self.deltas
    }

    pub fn column(&self, j: usize) -> &[T] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<T>] {
        &self.columns
    }

    #[inline]
    pub fn y(&self, i: usize, j: usize) -> T {
        self.columns[j][i]
    }

    /// Observation vector of sample `i`.
    pub fn row(&self, i: usize) -> Vec<T> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    /// Restriction to the given sample indices, which must be strictly
    /// increasing.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(CssdError::InvalidRange {
                start: bad,
                end: bad,
                len: self.len(),
            });
        }
        let xs = indices.iter().map(|&i| self.xs[i]).collect();
        let deltas = indices.iter().map(|&i| self.deltas[i]).collect();
        let columns = self
            .columns
            .iter()
            .map(|c| indices.iter().map(|&i| c[i]).collect())
            .collect();
        Self::new(xs, columns, deltas)
    }

    /// Contiguous sub-series `range` (inclusive, 0-based).
    pub fn slice(&self, range: RangeInclusive<usize>) -> Result<Self> {
        let (l, r) = (*range.start(), *range.end());
        self.check_range(l, r)?;
        Ok(Self {
            xs: self.xs[l..=r].to_vec(),
            columns: self.columns.iter().map(|c| c[l..=r].to_vec()).collect(),
            deltas: self.deltas[l..=r].to_vec(),
        })
    }

    pub(crate) fn check_range(&self, l: usize, r: usize) -> Result<()> {
        if l > r || r >= self.len() {
            return Err(CssdError::InvalidRange {
                start: l,
                end: r,
                len: self.len(),
            });
        }
        Ok(())
    }
}

/// Jump penalty: a positive real or the distinguished infinite value that
/// forces the classical (continuous) smoothing spline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gamma<T> {
    Finite(T),
    Infinite,
}

impl<T: Real> Gamma<T> {
    pub fn finite(&self) -> Option<T> {
        match *self {
            Gamma::Finite(g) => Some(g),
            Gamma::Infinite => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Gamma::Infinite)
    }

    /// The penalty as a scalar, `+inf` for [`Gamma::Infinite`].
    pub fn value(&self) -> T {
        self.finite().unwrap_or_else(T::infinity)
    }
}

/// Model parameters `(p, gamma)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hyperparams<T> {
    p: T,
    gamma: Gamma<T>,
}

impl<T: Real> Hyperparams<T> {
    pub fn new(p: T, gamma: Gamma<T>) -> Result<Self> {
        check_p(p)?;
        if let Gamma::Finite(g) = gamma {
            if !(g.is_finite() && g > T::zero()) {
                return Err(CssdError::InvalidGamma(g.to_f64().unwrap_or(f64::NAN)));
            }
        }
        Ok(Self { p, gamma })
    }

    /// Parameters for a finite jump penalty.
    pub fn finite(p: T, gamma: T) -> Result<Self> {
        Self::new(p, Gamma::Finite(gamma))
    }

    /// Parameters of the classical smoothing spline (no discontinuities).
    pub fn classical(p: T) -> Result<Self> {
        Self::new(p, Gamma::Infinite)
    }

    pub fn p(&self) -> T {
        self.p
    }

    pub fn gamma(&self) -> Gamma<T> {
        self.gamma
    }
}

pub(crate) fn check_p<T: Real>(p: T) -> Result<()> {
    if p > T::zero() && p < T::one() {
        Ok(())
    } else {
        Err(CssdError::InvalidP(p.to_f64().unwrap_or(f64::NAN)))
    }
}

/// Largest discontinuity count an optimal solution on `n` samples can have:
/// `ceil(n / 2) - 1`.
pub fn max_discontinuities(n: usize) -> usize {
    n.div_ceil(2).saturating_sub(1)
}

/// Optimal discontinuities, identified by gap index.
///
/// Gap `g` (with `1 <= g <= N - 1`) is the gap that has exactly `g` samples
/// to its left, i.e. lies between the 0-based sites `g - 1` and `g`. Its
/// displayed location is the midpoint of those two sites.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscontinuitySet<T> {
    gaps: Vec<usize>,
    locations: Vec<T>,
}

impl<T: Real> DiscontinuitySet<T> {
    pub fn empty() -> Self {
        Self {
            gaps: Vec::new(),
            locations: Vec::new(),
        }
    }

    /// Validates the gap indices against the sample sites `xs`.
    pub fn new(gaps: Vec<usize>, xs: &[T]) -> Result<Self> {
        let n = xs.len();
        for (k, &g) in gaps.iter().enumerate() {
            if g == 0 || g >= n {
                return Err(CssdError::InvalidDiscontinuities(format!(
                    "gap index {g} outside 1..={}",
                    n.saturating_sub(1)
                )));
            }
            if k > 0 && gaps[k - 1] >= g {
                return Err(CssdError::InvalidDiscontinuities(
                    "gap indices must be strictly increasing".into(),
                ));
            }
        }
        if gaps.len() > max_discontinuities(n) {
            return Err(CssdError::InvalidDiscontinuities(format!(
                "{} discontinuities exceed the bound {} for {n} samples",
                gaps.len(),
                max_discontinuities(n)
            )));
        }
        let two = T::lit(2.0);
        let locations = gaps.iter().map(|&g| (xs[g - 1] + xs[g]) / two).collect();
        Ok(Self { gaps, locations })
    }

    /// Recovers gap indices from locations that lie strictly between sites.
    pub fn from_locations(locations: &[T], xs: &[T]) -> Result<Self> {
        let gaps = locations
            .iter()
            .map(|&t| {
                let g = xs.partition_point(|&x| x < t);
                if g == 0 || g == xs.len() || xs[g] == t {
                    Err(CssdError::InvalidDiscontinuities(format!(
                        "location {t} does not lie strictly between two sites"
                    )))
                } else {
                    Ok(g)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(gaps, xs)
    }

    pub fn gaps(&self) -> &[usize] {
        &self.gaps
    }

    pub fn locations(&self) -> &[T] {
        &self.locations
    }

    pub fn len(&self) -> usize {
        self.gaps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaps.is_empty()
    }

    /// Inclusive 0-based sample ranges of the induced partition of `n`
    /// samples.
    pub fn segment_ranges(&self, n: usize) -> Vec<RangeInclusive<usize>> {
        let mut out = Vec::with_capacity(self.gaps.len() + 1);
        let mut start = 0;
        for &g in &self.gaps {
            out.push(start..=g - 1);
            start = g;
        }
        out.push(start..=n - 1);
        out
    }
}

/// One continuous piece of a fitted spline in Hermite form.
///
/// `values[j][i]` and `derivs[j][i]` are the value and slope of component
/// `j` at `knots[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentSpline<T> {
    knots: Vec<T>,
    values: Vec<Vec<T>>,
    derivs: Vec<Vec<T>>,
    domain: (T, T),
}

impl<T: Real> SegmentSpline<T> {
    /// Validates the structural invariants: knots strictly increasing inside
    /// the domain and matching component lengths.
    ///
    /// Natural end conditions and C2 continuity hold for splines produced by
    /// the fitter; they are not enforced here so that arbitrary Hermite data
    /// can be evaluated.
    pub fn new(
        knots: Vec<T>,
        values: Vec<Vec<T>>,
        derivs: Vec<Vec<T>>,
        domain: (T, T),
    ) -> Result<Self> {
        if knots.is_empty() {
            return Err(CssdError::InvalidSegment("no knots".into()));
        }
        if values.is_empty() || values.len() != derivs.len() {
            return Err(CssdError::InvalidSegment("component count mismatch".into()));
        }
        if values
            .iter()
            .chain(derivs.iter())
            .any(|c| c.len() != knots.len())
        {
            return Err(CssdError::InvalidSegment(
                "component length mismatch".into(),
            ));
        }
        if knots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CssdError::InvalidSegment(
                "knots not strictly increasing".into(),
            ));
        }
        let (a, b) = domain;
        if !(a <= knots[0] && knots[knots.len() - 1] <= b) {
            return Err(CssdError::InvalidSegment("knots outside the domain".into()));
        }
        Ok(Self {
            knots,
            values,
            derivs,
            domain,
        })
    }

    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    pub fn values(&self) -> &[Vec<T>] {
        &self.values
    }

    pub fn derivs(&self) -> &[Vec<T>] {
        &self.derivs
    }

    pub fn domain(&self) -> (T, T) {
        self.domain
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// A global minimizer of the jump-penalized smoothing functional.
#[derive(Clone, Debug, PartialEq)]
pub struct CssdSolution<T> {
    discontinuities: DiscontinuitySet<T>,
    segments: Vec<SegmentSpline<T>>,
    segment_energies: Vec<T>,
    objective: T,
    params: Hyperparams<T>,
}

impl<T: Real> CssdSolution<T> {
    pub fn new(
        discontinuities: DiscontinuitySet<T>,
        segments: Vec<SegmentSpline<T>>,
        segment_energies: Vec<T>,
        objective: T,
        params: Hyperparams<T>,
    ) -> Result<Self> {
        let k = discontinuities.len();
        if segments.len() != k + 1 || segment_energies.len() != k + 1 {
            return Err(CssdError::InvalidDiscontinuities(format!(
                "{} discontinuities need {} segments, got {}",
                k,
                k + 1,
                segments.len()
            )));
        }
        if params.gamma().is_infinite() && k > 0 {
            return Err(CssdError::InvalidDiscontinuities(
                "infinite gamma admits no discontinuities".into(),
            ));
        }
        for (i, seg) in segments.iter().enumerate() {
            let (a, b) = seg.domain();
            let lo_ok = i == 0 || a == discontinuities.locations()[i - 1];
            let hi_ok = i == k || b == discontinuities.locations()[i];
            if !(lo_ok && hi_ok) {
                return Err(CssdError::InvalidSegment(format!(
                    "segment {i} domain does not meet the discontinuity locations"
                )));
            }
        }
        let gamma = params.gamma().finite().unwrap_or_else(T::zero);
        let recomputed =
            segment_energies.iter().copied().sum::<T>() + gamma * T::from_usize_lossy(k);
        let tol = T::lit(1e-10).max(T::lit(1e3) * T::epsilon());
        let scale = objective
            .abs()
            .max(recomputed.abs())
            .max(T::min_positive_value());
        if (objective - recomputed).abs() > tol * scale {
            return Err(CssdError::InvalidSegment(format!(
                "objective {objective} disagrees with energies plus penalties {recomputed}"
            )));
        }
        Ok(Self {
            discontinuities,
            segments,
            segment_energies,
            objective,
            params,
        })
    }

    pub fn discontinuities(&self) -> &DiscontinuitySet<T> {
        &self.discontinuities
    }

    pub fn segments(&self) -> &[SegmentSpline<T>] {
        &self.segments
    }

    pub fn segment_energies(&self) -> &[T] {
        &self.segment_energies
    }

    pub fn objective(&self) -> T {
        self.objective
    }

    pub fn params(&self) -> Hyperparams<T> {
        self.params
    }
}
