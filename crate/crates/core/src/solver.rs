// SPDX-License-Identifier: MIT OR Apache-2.0

//! Pruned dynamic program over the midpoint partitions and reconstruction
//! of the optimal piecewise spline.

use crate::energy::{interval_energy, Direction, EnergyStream};
use crate::error::{CssdError, Result};
use crate::model::{check_p, CssdSolution, DataSeries, DiscontinuitySet, Gamma, Hyperparams};
use crate::scalar::Real;
use crate::segment_fit::fit_segment_with_energy;

/// Whether the inner loop of the dynamic program may stop early.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Pruning {
    #[default]
    Enabled,
    Disabled,
}

/// Bellman values and traceback pointers.
///
/// `fstar()[r]` is the optimal value on the first `r` samples, with
/// `fstar()[0] = -gamma`. `starts()[r]` is the 0-based index of the first
/// sample of the last segment in that optimum (`starts()[0]` is unused).
#[derive(Clone, Debug, PartialEq)]
pub struct DpTables<T> {
    fstar: Vec<T>,
    starts: Vec<usize>,
}

impl<T: Real> DpTables<T> {
    pub fn fstar(&self) -> &[T] {
        &self.fstar
    }

    pub fn starts(&self) -> &[usize] {
        &self.starts
    }

    /// 1-based left boundaries `Z_1..Z_N`.
    pub fn z(&self) -> Vec<usize> {
        self.starts[1..].iter().map(|&s| s + 1).collect()
    }

    /// Optimal value on the full series.
    pub fn optimum(&self) -> T {
        self.fstar[self.fstar.len() - 1]
    }
}

fn check_gamma<T: Real>(gamma: T) -> Result<()> {
    if gamma.is_finite() && gamma > T::zero() {
        Ok(())
    } else {
        Err(CssdError::InvalidGamma(gamma.to_f64().unwrap_or(f64::NAN)))
    }
}

/// Solves the partition problem for a finite jump penalty with pruning.
pub fn solve_partition<T: Real>(series: &DataSeries<T>, p: T, gamma: T) -> Result<DpTables<T>> {
    solve_partition_with(series, p, gamma, Pruning::Enabled)
}

/// Solves the partition problem.
///
/// Among equally good last segments the one starting earliest wins, so the
/// right-most interval of the returned partition is as long as possible.
pub fn solve_partition_with<T: Real>(
    series: &DataSeries<T>,
    p: T,
    gamma: T,
    pruning: Pruning,
) -> Result<DpTables<T>> {
    check_p(p)?;
    check_gamma(gamma)?;
    let n = series.len();
    let mut fstar = Vec::with_capacity(n + 1);
    fstar.push(-gamma);
    let mut starts = vec![0usize; n + 1];
    let mut forward = EnergyStream::new(series, 0, Direction::Forward, p)?;
    let mut reverse = EnergyStream::new(series, 0, Direction::Reverse, p)?;

    for r in 1..=n {
        let mut best = forward
            .advance()
            .expect("one forward step per sample")
            .total();
        let mut best_start = 0;
        if r >= 3 {
            reverse.restart(r - 1);
            reverse.advance();
            for s in (1..=r - 2).rev() {
                let head = reverse.advance().expect("sites left of the anchor").total() + gamma;
                if pruning == Pruning::Enabled && head > best {
                    break;
                }
                let v = head + fstar[s];
                if v < best || (v == best && best_start != 0) {
                    best = v;
                    best_start = s;
                }
            }
        }
        fstar.push(best);
        starts[r] = best_start;
    }
    Ok(DpTables { fstar, starts })
}

/// Reads the optimal discontinuity set off the traceback pointers.
pub fn traceback<T: Real>(
    tables: &DpTables<T>,
    series: &DataSeries<T>,
) -> Result<DiscontinuitySet<T>> {
    let n = series.len();
    if tables.starts.len() != n + 1 || tables.fstar.len() != n + 1 {
        return Err(CssdError::CorruptTraceback(format!(
            "tables cover {} samples, series has {n}",
            tables.starts.len().saturating_sub(1)
        )));
    }
    let mut gaps = Vec::new();
    let mut r = n;
    while r > 0 {
        let s = tables.starts[r];
        if s >= r {
            return Err(CssdError::CorruptTraceback(format!(
                "start {s} does not precede end {r}"
            )));
        }
        if s > 0 {
            gaps.push(s);
        }
        r = s;
    }
    gaps.reverse();
    DiscontinuitySet::new(gaps, series.xs()).map_err(|e| CssdError::CorruptTraceback(e.to_string()))
}

fn total<T: Real>(energies: &[T]) -> T {
    let mut acc = T::zero();
    for &e in energies {
        acc += e;
    }
    acc
}

/// Computes a global minimizer of the jump-penalized smoothing functional.
pub fn solve_cssd<T: Real>(
    series: &DataSeries<T>,
    params: &Hyperparams<T>,
) -> Result<CssdSolution<T>> {
    let p = params.p();
    let n = series.len();
    let xs = series.xs();
    let (jumps, optimum) = match params.gamma() {
        Gamma::Infinite => (DiscontinuitySet::empty(), None),
        Gamma::Finite(gamma) => {
            let tables = solve_partition(series, p, gamma)?;
            (traceback(&tables, series)?, Some(tables.optimum()))
        }
    };
    let ranges = jumps.segment_ranges(n);
    let last = ranges.len() - 1;
    let mut segments = Vec::with_capacity(ranges.len());
    let mut energies = Vec::with_capacity(ranges.len());
    for (k, range) in ranges.iter().enumerate() {
        let a = if k == 0 {
            xs[0]
        } else {
            jumps.locations()[k - 1]
        };
        let b = if k == last {
            xs[n - 1]
        } else {
            jumps.locations()[k]
        };
        let fit = fit_segment_with_energy(series, *range.start(), *range.end(), p, (a, b))?;
        energies.push(total(&fit.energies));
        segments.push(fit.spline);
    }
    let objective = optimum.unwrap_or_else(|| total(&energies));
    CssdSolution::new(jumps, segments, energies, objective, *params)
}

/// Functional value of the partition induced by `jumps`, from fresh energy
/// streams on every interval.
pub fn objective<T: Real>(
    series: &DataSeries<T>,
    jumps: &DiscontinuitySet<T>,
    params: &Hyperparams<T>,
) -> Result<T> {
    let checked = DiscontinuitySet::new(jumps.gaps().to_vec(), series.xs())?;
    let penalty = match params.gamma() {
        Gamma::Finite(g) => g * T::from_usize_lossy(checked.len()),
        Gamma::Infinite if checked.is_empty() => T::zero(),
        Gamma::Infinite => {
            return Err(CssdError::InvalidDiscontinuities(
                "infinite gamma admits no discontinuities".into(),
            ))
        }
    };
    let mut acc = T::zero();
    for range in checked.segment_ranges(series.len()) {
        acc += total(&interval_energy(
            series,
            *range.start(),
            *range.end(),
            params.p(),
        )?);
    }
    Ok(acc + penalty)
}
