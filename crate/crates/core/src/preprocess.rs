// SPDX-License-Identifier: MIT OR Apache-2.0

//! Input validation, sorting, merging of coincident sites and mesh-ratio
//! diagnostics.

use log::{info, warn};

use crate::error::{CssdError, Result};
use crate::model::DataSeries;
use crate::scalar::Real;

/// Mesh ratio above which the least-squares systems are considered at risk
/// of ill-conditioning.
pub const DEFAULT_MESH_RATIO_THRESHOLD: f64 = 1e6;

/// One raw observation as read from a file. A missing `delta` means unit
/// standard deviation.
#[derive(Clone, Debug, PartialEq)]
pub struct RawSample<T> {
    pub x: T,
    pub y: Vec<T>,
    pub delta: Option<T>,
}

impl<T> RawSample<T> {
    pub fn new(x: T, y: Vec<T>, delta: Option<T>) -> Self {
        Self { x, y, delta }
    }
}

/// Validates raw samples, sorts them by abscissa and merges coincident
/// sites.
pub fn validate_and_sort<T: Real>(raw: &[RawSample<T>]) -> Result<DataSeries<T>> {
    let first = raw.first().ok_or(CssdError::EmptyInput)?;
    let dim = first.y.len();
    if dim == 0 {
        return Err(CssdError::DimensionMismatch {
            index: 0,
            expected: 1,
            found: 0,
        });
    }
    let mut samples = Vec::with_capacity(raw.len());
    for (index, s) in raw.iter().enumerate() {
        if s.y.len() != dim {
            return Err(CssdError::DimensionMismatch {
                index,
                expected: dim,
                found: s.y.len(),
            });
        }
        let delta = s.delta.unwrap_or_else(T::one);
        if !s.x.is_finite() || !delta.is_finite() || s.y.iter().any(|v| !v.is_finite()) {
            return Err(CssdError::NonFiniteValue { index });
        }
        if delta <= T::zero() {
            return Err(CssdError::NonPositiveDelta { index });
        }
        samples.push(RawSample::new(s.x, s.y.clone(), Some(delta)));
    }
    // stable, so merged groups keep their input order
    samples.sort_by(|a, b| a.x.partial_cmp(&b.x).expect("finite abscissae"));
    merge_coincident(&samples)
}

/// Merges runs of equal abscissae by inverse-variance weighting.
///
/// For a group with weights `w_i = 1 / delta_i^2` the merged observation is
/// `sum(w_i y_i) / sum(w_i)` componentwise and the merged standard deviation
/// is `sum(w_i)^(-1/2)`. Input must be sorted non-decreasingly in `x`.
pub fn merge_coincident<T: Real>(samples: &[RawSample<T>]) -> Result<DataSeries<T>> {
    if samples.is_empty() {
        return Err(CssdError::EmptyInput);
    }
    let dim = samples[0].y.len();
    let mut xs = Vec::with_capacity(samples.len());
    let mut columns = vec![Vec::with_capacity(samples.len()); dim];
    let mut deltas = Vec::with_capacity(samples.len());
    let mut merged_groups = 0usize;

    let mut start = 0;
    while start < samples.len() {
        let x = samples[start].x;
        let mut end = start + 1;
        while end < samples.len() && samples[end].x == x {
            end += 1;
        }
        if end < samples.len() && samples[end].x < x {
            return Err(CssdError::NotStrictlyIncreasing { index: end });
        }
        let group = &samples[start..end];
        if group.len() == 1 {
            let s = &group[0];
            xs.push(s.x);
            for (j, col) in columns.iter_mut().enumerate() {
                col.push(s.y[j]);
            }
            deltas.push(s.delta.unwrap_or_else(T::one));
        } else {
            merged_groups += 1;
            let weights: Vec<T> = group
                .iter()
                .map(|s| {
                    let d = s.delta.unwrap_or_else(T::one);
                    T::one() / (d * d)
                })
                .collect();
            let total: T = weights.iter().copied().sum();
            xs.push(x);
            for (j, col) in columns.iter_mut().enumerate() {
                let acc: T = group.iter().zip(&weights).map(|(s, &w)| w * s.y[j]).sum();
                col.push(acc / total);
            }
            deltas.push(T::one() / total.sqrt());
        }
        start = end;
    }
    if merged_groups > 0 {
        info!("merged {merged_groups} groups of coincident sample sites");
    }
    DataSeries::new(xs, columns, deltas)
}

/// Ratio of the largest to the smallest gap between adjacent sites.
pub fn mesh_ratio<T: Real>(series: &DataSeries<T>) -> Result<T> {
    if series.len() < 2 {
        return Err(CssdError::TooFewPoints {
            required: 2,
            found: series.len(),
        });
    }
    let (lo, hi) = series
        .xs()
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold((T::infinity(), T::zero()), |(lo, hi), d| {
            (lo.min(d), hi.max(d))
        });
    Ok(hi / lo)
}

/// Computes the mesh ratio and logs a warning when it exceeds `threshold`.
/// Returns the ratio if the warning fired.
pub fn check_mesh_ratio<T: Real>(series: &DataSeries<T>, threshold: T) -> Result<Option<T>> {
    let ratio = mesh_ratio(series)?;
    if ratio > threshold {
        warn!("mesh ratio {ratio} exceeds {threshold}; the fit may be ill-conditioned, consider binning");
        Ok(Some(ratio))
    } else {
        Ok(None)
    }
}

/// Repeatedly merges the closest pair of adjacent sites (inverse-variance
/// weighted in both abscissa and ordinate) until the mesh ratio is at most
/// `threshold` or fewer than three sites remain.
pub fn bin_closest<T: Real>(series: &DataSeries<T>, threshold: T) -> Result<DataSeries<T>> {
    let mut xs = series.xs().to_vec();
    let mut columns = series.columns().to_vec();
    let mut weights: Vec<T> = series
        .deltas()
        .iter()
        .map(|&d| T::one() / (d * d))
        .collect();
    let mut merges = 0usize;
    while xs.len() >= 3 {
        let gaps: Vec<T> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let (imin, &dmin) = gaps
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).expect("finite gaps"))
            .expect("at least two gaps");
        let dmax = gaps.iter().copied().fold(T::zero(), T::max);
        if dmax / dmin <= threshold {
            break;
        }
        let (wa, wb) = (weights[imin], weights[imin + 1]);
        let w = wa + wb;
        xs[imin] = (wa * xs[imin] + wb * xs[imin + 1]) / w;
        xs.remove(imin + 1);
        for col in columns.iter_mut() {
            col[imin] = (wa * col[imin] + wb * col[imin + 1]) / w;
            col.remove(imin + 1);
        }
        weights[imin] = w;
        weights.remove(imin + 1);
        merges += 1;
    }
    if merges > 0 {
        info!("binning merged {merges} site pairs");
    }
    let deltas = weights.iter().map(|&w| T::one() / w.sqrt()).collect();
    DataSeries::new(xs, columns, deltas)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(x: f64, y: f64, d: Option<f64>) -> RawSample<f64> {
        RawSample::new(x, vec![y], d)
    }

    #[test]
    fn sorts_by_abscissa() {
        let out = validate_and_sort(&[s(2.0, 0.0, Some(1.0)), s(1.0, 5.0, Some(1.0))]).unwrap();
        assert_eq!(out.xs(), &[1.0, 2.0]);
        assert_eq!(out.column(0), &[5.0, 0.0]);
    }

    #[test]
    fn missing_deltas_default_to_one() {
        let out = validate_and_sort(&[s(1.0, 0.0, None), s(2.0, 1.0, None)]).unwrap();
        assert_eq!(out.deltas(), &[1.0, 1.0]);
    }

    #[test]
    fn coincident_sites_are_merged_during_validation() {
        let out = validate_and_sort(&[
            s(1.0, 0.0, Some(1.0)),
            s(1.0, 2.0, Some(1.0)),
            s(3.0, 4.0, Some(1.0)),
        ])
        .unwrap();
        assert_eq!(out.xs(), &[1.0, 3.0]);
        assert_eq!(out.column(0), &[1.0, 4.0]);
        assert!((out.deltas()[0] - 1.0 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn merge_formula_examples() {
        let out = merge_coincident(&[s(1.0, 0.0, Some(1.0)), s(1.0, 2.0, Some(1.0))]).unwrap();
        assert_eq!(out.xs(), &[1.0]);
        assert_eq!(out.column(0), &[1.0]);
        assert!((out.deltas()[0] - 2f64.sqrt().recip()).abs() < 1e-15);

        // weights 1 and 1/4: (0 * 1 + 3 * 0.25) / 1.25 = 0.6
        let out = merge_coincident(&[s(1.0, 0.0, Some(1.0)), s(1.0, 3.0, Some(2.0))]).unwrap();
        assert!((out.column(0)[0] - 0.6).abs() < 1e-15);
        assert!((out.deltas()[0] - 1.25f64.powf(-0.5)).abs() < 1e-15);

        let plain = [
            s(1.0, 7.0, Some(1.0)),
            s(2.0, 8.0, Some(2.0)),
            s(3.0, 9.0, Some(3.0)),
        ];
        let out = merge_coincident(&plain).unwrap();
        assert_eq!(out.xs(), &[1.0, 2.0, 3.0]);
        assert_eq!(out.column(0), &[7.0, 8.0, 9.0]);
        assert_eq!(out.deltas(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn merge_rejects_unsorted_input() {
        assert!(merge_coincident(&[s(2.0, 0.0, None), s(1.0, 0.0, None)]).is_err());
    }

    #[test]
    fn validation_errors_carry_indices() {
        assert_eq!(validate_and_sort::<f64>(&[]), Err(CssdError::EmptyInput));
        assert_eq!(
            validate_and_sort(&[s(0.0, 1.0, None), s(f64::NAN, 1.0, None)]),
            Err(CssdError::NonFiniteValue { index: 1 })
        );
        assert_eq!(
            validate_and_sort(&[s(0.0, 1.0, None), s(1.0, f64::INFINITY, None)]),
            Err(CssdError::NonFiniteValue { index: 1 })
        );
        assert_eq!(
            validate_and_sort(&[s(0.0, 1.0, Some(-1.0))]),
            Err(CssdError::NonPositiveDelta { index: 0 })
        );
        assert!(matches!(
            validate_and_sort(&[s(0.0, 1.0, None), RawSample::new(1.0, vec![1.0, 2.0], None)]),
            Err(CssdError::DimensionMismatch { index: 1, .. })
        ));
    }

    #[test]
    fn mesh_ratio_examples() {
        let eq = DataSeries::<f64>::scalar_unit(vec![0.0, 0.5, 1.0, 1.5], vec![0.0; 4]).unwrap();
        assert_eq!(mesh_ratio(&eq).unwrap(), 1.0);
        let two = DataSeries::<f64>::scalar_unit(vec![0.0, 1.0, 3.0], vec![0.0; 3]).unwrap();
        assert_eq!(mesh_ratio(&two).unwrap(), 2.0);
        let one = DataSeries::<f64>::scalar_unit(vec![0.0], vec![0.0]).unwrap();
        assert!(matches!(
            mesh_ratio(&one),
            Err(CssdError::TooFewPoints { .. })
        ));
    }

    #[test]
    fn mesh_ratio_warning_threshold() {
        // (1 - 1e-6) / 1e-6 = 999999, just below the default threshold
        let tight = DataSeries::<f64>::scalar_unit(vec![0.0, 1e-6, 1.0], vec![0.0; 3]).unwrap();
        let r = mesh_ratio(&tight).unwrap();
        assert!((r - 1e6).abs() / 1e6 < 1e-5);
        assert_eq!(
            check_mesh_ratio(&tight, DEFAULT_MESH_RATIO_THRESHOLD).unwrap(),
            None
        );
        assert!(check_mesh_ratio(&tight, 0.5e6).unwrap().is_some());
        let tighter = DataSeries::<f64>::scalar_unit(vec![0.0, 1e-7, 1.0], vec![0.0; 3]).unwrap();
        assert!(check_mesh_ratio(&tighter, DEFAULT_MESH_RATIO_THRESHOLD)
            .unwrap()
            .is_some());
    }

    #[test]
    fn binning_reduces_mesh_ratio() {
        let xs = vec![0.0, 1e-9, 1.0, 2.0, 2.0 + 1e-8, 3.0];
        let series =
            DataSeries::<f64>::scalar_unit(xs, vec![1.0, 3.0, 0.0, 2.0, 4.0, 5.0]).unwrap();
        let binned = bin_closest(&series, 10.0).unwrap();
        assert_eq!(binned.len(), 4);
        assert!(mesh_ratio(&binned).unwrap() <= 10.0);
        assert!((binned.column(0)[0] - 2.0).abs() < 1e-12);
        assert!((binned.deltas()[0] - 2f64.sqrt().recip()).abs() < 1e-15);
    }

    fn raw_strategy() -> impl Strategy<Value = Vec<RawSample<f64>>> {
        proptest::collection::vec((0u8..12, -5.0f64..5.0, 0.1f64..3.0), 1..40).prop_map(|v| {
            v.into_iter()
                .map(|(x, y, d)| RawSample::new(x as f64 * 0.5, vec![y], Some(d)))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn sorting_and_merging_is_idempotent(raw in raw_strategy()) {
            let once = validate_and_sort(&raw).unwrap();
            let again: Vec<RawSample<f64>> = (0..once.len())
                .map(|i| RawSample::new(once.xs()[i], once.row(i), Some(once.deltas()[i])))
                .collect();
            let twice = validate_and_sort(&again).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn merging_preserves_information_weight(raw in raw_strategy()) {
            let out = validate_and_sort(&raw).unwrap();
            for (i, &x) in out.xs().iter().enumerate() {
                let before: f64 = raw.iter().filter(|s| s.x == x).map(|s| s.delta.unwrap().powi(-2)).sum();
                let after = out.deltas()[i].powi(-2);
                prop_assert!((before - after).abs() <= 1e-12 * before);
            }
        }
    }
}
