// SPDX-License-Identifier: MIT OR Apache-2.0

//! K-fold cross validation and a derivative-free search for `(p, gamma)`.

use std::f64::consts::FRAC_PI_2;

use log::debug;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{CssdError, Result};
use crate::model::{DataSeries, Gamma, Hyperparams};
use crate::scalar::Real;
use crate::solver::solve_cssd;

/// Splits `0..n` into `k` random folds whose sizes differ by at most one.
/// Each fold is sorted.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > n {
        return Err(CssdError::BadFoldCount { k, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::with_capacity(n / k + 1); k];
    for (pos, &i) in order.iter().enumerate() {
        folds[pos % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

fn complement(n: usize, fold: &[usize]) -> Vec<usize> {
    let mut held = vec![false; n];
    for &i in fold {
        held[i] = true;
    }
    (0..n).filter(|&i| !held[i]).collect()
}

/// Cross-validation score: the mean over all samples of the squared,
/// `delta`-normalized prediction errors of the models fitted without the
/// sample's fold.
///
/// Folds are fitted in parallel; the per-fold sums are combined in fold
/// order, so the result does not depend on the thread count.
pub fn cv_score<T: Real>(
    series: &DataSeries<T>,
    folds: &[Vec<usize>],
    params: &Hyperparams<T>,
) -> Result<T> {
    let n = series.len();
    for fold in folds {
        if let Some(&bad) = fold.iter().find(|&&i| i >= n) {
            return Err(CssdError::InvalidRange {
                start: bad,
                end: bad,
                len: n,
            });
        }
    }
    let sums = folds
        .par_iter()
        .enumerate()
        .map(|(f, fold)| {
            let train = complement(n, fold);
            if train.is_empty() {
                return Err(CssdError::DegenerateFold { fold: f });
            }
            let model = solve_cssd(&series.subset(&train)?, params)?;
            let mut acc = T::zero();
            for &i in fold {
                let pred = model.evaluate(series.xs()[i]);
                for (j, &v) in pred.iter().enumerate() {
                    let r = (v - series.y(i, j)) / series.deltas()[i];
                    acc += r * r;
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<T>>>()?;
    let mut total = T::zero();
    for s in sums {
        total += s;
    }
    Ok(total / T::from_usize_lossy(n))
}

/// Position of a jump penalty on the unit interval under
/// `gamma -> (2 / pi) atan(gamma)`.
///
/// The coordinate keeps its distance to the nearer end of `[0, 1]`
/// explicitly, so large penalties survive the round trip without
/// cancellation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaCoord {
    upper: bool,
    offset: f64,
}

impl GammaCoord {
    pub fn from_gamma(gamma: Gamma<f64>) -> Self {
        match gamma {
            Gamma::Infinite => Self {
                upper: true,
                offset: 0.0,
            },
            Gamma::Finite(g) if g <= 1.0 => Self {
                upper: false,
                offset: g.atan() / FRAC_PI_2,
            },
            Gamma::Finite(g) => Self {
                upper: true,
                offset: g.recip().atan() / FRAC_PI_2,
            },
        }
    }

    /// Coordinate of a point `v` in `[0, 1]`.
    pub fn from_unit(v: f64) -> Self {
        if v <= 0.5 {
            Self {
                upper: false,
                offset: v,
            }
        } else {
            Self {
                upper: true,
                offset: 1.0 - v,
            }
        }
    }

    pub fn unit(&self) -> f64 {
        if self.upper {
            1.0 - self.offset
        } else {
            self.offset
        }
    }

    /// The penalty; the upper end maps to [`Gamma::Infinite`].
    pub fn gamma(&self) -> Gamma<f64> {
        match (self.upper, self.offset) {
            (true, o) if o <= 0.0 => Gamma::Infinite,
            (true, o) => Gamma::Finite((o * FRAC_PI_2).tan().recip()),
            (false, o) => Gamma::Finite((o * FRAC_PI_2).tan()),
        }
    }
}

/// `logit(p)`.
pub fn p_to_coord(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Inverse of [`p_to_coord`].
pub fn coord_to_p(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

/// Outcome of a parameter search.
#[derive(Clone, Debug, PartialEq)]
pub struct Selection<T> {
    pub params: Hyperparams<T>,
    pub score: T,
    pub start_score: T,
    pub evaluations: usize,
}

const U_GRID: (f64, f64) = (-4.0, 14.0);
const V_GRID: (f64, f64) = (0.02, 0.98);
const U_BOX: (f64, f64) = (-12.0, 25.0);
const V_BOX: (f64, f64) = (1e-9, 1.0);

struct Search<'a, T: Real> {
    series: &'a DataSeries<T>,
    folds: &'a [Vec<usize>],
    budget: usize,
    used: usize,
    best: (Hyperparams<T>, f64),
}

impl<T: Real> Search<'_, T> {
    fn remaining(&self) -> usize {
        self.budget - self.used
    }

    fn params_at(u: f64, v: f64) -> Result<Hyperparams<T>> {
        let p = T::lit(coord_to_p(u.clamp(U_BOX.0, U_BOX.1)));
        let p = p.max(T::epsilon()).min(T::one() - T::epsilon());
        let gamma = match GammaCoord::from_unit(v.clamp(V_BOX.0, V_BOX.1)).gamma() {
            Gamma::Infinite => Gamma::Infinite,
            Gamma::Finite(g) => Gamma::Finite(T::lit(g).max(T::min_positive_value())),
        };
        Hyperparams::new(p, gamma)
    }

    /// Scores `params`, counting one evaluation. NaN scores rank last.
    fn eval(&mut self, params: Hyperparams<T>) -> Result<f64> {
        self.used += 1;
        let score = cv_score(self.series, self.folds, &params)?
            .to_f64()
            .filter(|v| !v.is_nan())
            .unwrap_or(f64::INFINITY);
        debug!(
            "cv p={} gamma={:?} score={score}",
            params.p(),
            params.gamma()
        );
        if score < self.best.1 {
            self.best = (params, score);
        }
        Ok(score)
    }

    fn eval_at(&mut self, u: f64, v: f64) -> Result<f64> {
        let params = Self::params_at(u, v)?;
        self.eval(params)
    }

    fn grid(&mut self, count: usize) -> Result<()> {
        let side = (count as f64).sqrt().floor() as usize;
        if side < 2 {
            return Ok(());
        }
        for a in 0..side {
            for b in 0..side {
                let u = U_GRID.0 + (U_GRID.1 - U_GRID.0) * a as f64 / (side - 1) as f64;
                let v = V_GRID.0 + (V_GRID.1 - V_GRID.0) * b as f64 / (side - 1) as f64;
                self.eval_at(u, v)?;
            }
        }
        Ok(())
    }

    fn clamp(x: [f64; 2]) -> [f64; 2] {
        [x[0].clamp(U_BOX.0, U_BOX.1), x[1].clamp(V_BOX.0, V_BOX.1)]
    }

    /// Simplex refinement around `origin`, the coordinates of the current
    /// best parameters.
    fn nelder_mead(&mut self, origin: [f64; 2]) -> Result<()> {
        if self.remaining() < 2 {
            return Ok(());
        }
        let origin = Self::clamp(origin);
        let mut simplex = vec![(origin, self.best.1)];
        let du = if origin[0] + 1.5 > U_BOX.1 { -1.5 } else { 1.5 };
        let dv = if origin[1] > 0.5 { -0.1 } else { 0.1 };
        for step in [[du, 0.0], [0.0, dv]] {
            let x = Self::clamp([origin[0] + step[0], origin[1] + step[1]]);
            let f = self.eval_at(x[0], x[1])?;
            simplex.push((x, f));
        }
        let lerp = |a: [f64; 2], b: [f64; 2], t: f64| {
            Self::clamp([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])])
        };
        while self.remaining() > 0 {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let spread = simplex
                .iter()
                .map(|(x, _)| {
                    (x[0] - simplex[0].0[0])
                        .abs()
                        .max((x[1] - simplex[0].0[1]).abs())
                })
                .fold(0.0, f64::max);
            if spread < 1e-9 {
                break;
            }
            let centroid = [
                0.5 * (simplex[0].0[0] + simplex[1].0[0]),
                0.5 * (simplex[0].0[1] + simplex[1].0[1]),
            ];
            let worst = simplex[2];
            let xr = lerp(centroid, worst.0, -1.0);
            let fr = self.eval_at(xr[0], xr[1])?;
            if fr < simplex[0].1 {
                if self.remaining() == 0 {
                    simplex[2] = (xr, fr);
                    break;
                }
                let xe = lerp(centroid, worst.0, -2.0);
                let fe = self.eval_at(xe[0], xe[1])?;
                simplex[2] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < simplex[1].1 {
                simplex[2] = (xr, fr);
                continue;
            }
            if self.remaining() == 0 {
                break;
            }
            let (xc, fc) = if fr < worst.1 {
                let x = lerp(centroid, xr, 0.5);
                (x, self.eval_at(x[0], x[1])?)
            } else {
                let x = lerp(centroid, worst.0, 0.5);
                (x, self.eval_at(x[0], x[1])?)
            };
            if fc < worst.1.min(fr) {
                simplex[2] = (xc, fc);
                continue;
            }
            for k in 1..3 {
                if self.remaining() == 0 {
                    break;
                }
                let x = lerp(simplex[0].0, simplex[k].0, 0.5);
                simplex[k] = (x, self.eval_at(x[0], x[1])?);
            }
        }
        Ok(())
    }
}

fn coords<T: Real>(params: &Hyperparams<T>) -> [f64; 2] {
    let p = params.p().to_f64().unwrap_or(0.5);
    let gamma = match params.gamma() {
        Gamma::Infinite => Gamma::Infinite,
        Gamma::Finite(g) => Gamma::Finite(g.to_f64().unwrap_or(f64::INFINITY)),
    };
    [p_to_coord(p), GammaCoord::from_gamma(gamma).unit()]
}

/// Searches `(logit p, (2 / pi) atan gamma)` for the best cross-validation
/// score on fixed folds, spending at most `budget` score evaluations.
///
/// The start is scored first and only strictly better parameters replace
/// it. Next come the classical spline at the starting `p`, a coarse grid
/// using about half of the remaining budget, and a Nelder-Mead refinement
/// from the best point so far.
pub fn select_params_with_folds<T: Real>(
    series: &DataSeries<T>,
    folds: &[Vec<usize>],
    start: &Hyperparams<T>,
    budget: usize,
) -> Result<Selection<T>> {
    if budget == 0 {
        return Err(CssdError::ZeroBudget);
    }
    let mut search = Search {
        series,
        folds,
        budget,
        used: 0,
        best: (*start, f64::INFINITY),
    };
    let start_score = search.eval(*start)?;
    search.best = (*start, start_score);
    if search.remaining() > 0 && !start.gamma().is_infinite() {
        search.eval(Hyperparams::new(start.p(), Gamma::Infinite)?)?;
    }
    let grid_budget = search.remaining() / 2;
    search.grid(grid_budget)?;
    let origin = coords(&search.best.0);
    search.nelder_mead(origin)?;
    let (params, score) = search.best;
    Ok(Selection {
        params,
        score: T::lit(score),
        start_score: T::lit(start_score),
        evaluations: search.used,
    })
}

/// [`select_params_with_folds`] on the folds of [`kfold_split`].
pub fn select_params<T: Real>(
    series: &DataSeries<T>,
    k: usize,
    seed: u64,
    start: &Hyperparams<T>,
    budget: usize,
) -> Result<Selection<T>> {
    let folds = kfold_split(series.len(), k, seed)?;
    select_params_with_folds(series, &folds, start, budget)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segment_fit::eval_extended;
    use proptest::prelude::*;

    #[test]
    fn folds_are_balanced_and_seeded() {
        let f = kfold_split(10, 5, 3).unwrap();
        assert!(f.iter().all(|g| g.len() == 2));
        let mut sizes: Vec<usize> = kfold_split(11, 5, 3)
            .unwrap()
            .iter()
            .map(Vec::len)
            .collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![2, 2, 2, 2, 3]);
        assert_eq!(
            kfold_split(50, 7, 9).unwrap(),
            kfold_split(50, 7, 9).unwrap()
        );
        assert_ne!(
            kfold_split(50, 7, 9).unwrap(),
            kfold_split(50, 7, 10).unwrap()
        );
        assert!(matches!(
            kfold_split(3, 4, 0),
            Err(CssdError::BadFoldCount { .. })
        ));
        assert!(matches!(
            kfold_split(3, 1, 0),
            Err(CssdError::BadFoldCount { .. })
        ));
    }

    #[test]
    fn lines_are_predicted_exactly() {
        let xs: Vec<f64> = (0..20).map(|i| f64::from(i) * 0.37).collect();
        let ys = xs.iter().map(|x| 2.0 - 0.5 * x).collect();
        let s = DataSeries::<f64>::scalar_unit(xs, ys).unwrap();
        let folds = kfold_split(20, 5, 1).unwrap();
        let score = cv_score(&s, &folds, &Hyperparams::classical(0.7).unwrap()).unwrap();
        assert!(score <= 1e-16, "{score}");
    }

    #[test]
    fn small_instance_by_hand() {
        let s = DataSeries::<f64>::scalar(
            vec![0.0, 1.0, 2.0, 3.0],
            vec![1.0, 3.0, 2.0, 5.0],
            vec![1.0, 0.5, 2.0, 1.0],
        )
        .unwrap();
        let folds = vec![vec![0, 2], vec![1, 3]];
        let params = Hyperparams::classical(0.5).unwrap();
        // two training points are interpolated by their line
        let line = |(x0, y0): (f64, f64), (x1, y1): (f64, f64), x: f64| {
            y0 + (y1 - y0) * (x - x0) / (x1 - x0)
        };
        let r0 = line((1.0, 3.0), (3.0, 5.0), 0.0) - 1.0;
        let r2 = (line((1.0, 3.0), (3.0, 5.0), 2.0) - 2.0) / 2.0;
        let r1 = (line((0.0, 1.0), (2.0, 2.0), 1.0) - 3.0) / 0.5;
        let r3 = line((0.0, 1.0), (2.0, 2.0), 3.0) - 5.0;
        let want = (r0 * r0 + r1 * r1 + r2 * r2 + r3 * r3) / 4.0;
        let got = cv_score(&s, &folds, &params).unwrap();
        assert!((got - want).abs() <= 1e-12 * want, "{got} vs {want}");
    }

    #[test]
    fn held_out_site_on_a_jump_sees_the_mean_limit() {
        // training sites 0, 1, 3, 4 jump between 1 and 3; the held-out site 2
        // sits exactly on the midpoint of that gap
        let xs = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        let ys = vec![0.0, 0.0, 7.0, 10.0, 10.0];
        let s = DataSeries::<f64>::scalar_unit(xs, ys).unwrap();
        let params = Hyperparams::finite(0.5, 0.1).unwrap();
        let train = s.subset(&[0, 1, 3, 4]).unwrap();
        let model = solve_cssd(&train, &params).unwrap();
        assert_eq!(model.discontinuities().locations(), &[2.0]);
        let segs = model.segments();
        let mean = 0.5 * (eval_extended(&segs[0], 2.0)[0] + eval_extended(&segs[1], 2.0)[0]);
        assert!((mean - 5.0).abs() < 1e-12);
        let score = cv_score(&s, &[vec![2], vec![0, 1, 3, 4]], &params).unwrap();
        let other = cv_score(&s, &[vec![0, 1, 3, 4]], &params).unwrap();
        assert!((score - other - (5.0f64 - 7.0).powi(2) / 5.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_fold_is_reported() {
        let s = DataSeries::<f64>::scalar_unit(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        let err = cv_score(&s, &[vec![0, 1]], &Hyperparams::classical(0.5).unwrap()).unwrap_err();
        assert_eq!(err, CssdError::DegenerateFold { fold: 0 });
    }

    #[test]
    fn gamma_coordinate_round_trips() {
        for k in 0..=1200 {
            let g = 10f64.powf(-6.0 + 0.01 * f64::from(k));
            let c = GammaCoord::from_gamma(Gamma::Finite(g));
            let back = c.gamma().finite().unwrap();
            assert!((back - g).abs() <= 1e-12 * g, "{g} -> {back}");
            assert!((c.unit() - g.atan() / FRAC_PI_2).abs() < 1e-15);
        }
        assert_eq!(
            GammaCoord::from_gamma(Gamma::Infinite).gamma(),
            Gamma::Infinite
        );
        assert_eq!(GammaCoord::from_unit(1.0).gamma(), Gamma::Infinite);
        assert!((coord_to_p(p_to_coord(0.999)) - 0.999).abs() < 1e-15);
    }

    #[test]
    fn budget_of_one_returns_the_start() {
        let s = crate::signals::sample(
            crate::signals::Signal::G1,
            30,
            0.1,
            crate::signals::Sites::UniformRandom,
            2,
        )
        .unwrap();
        let start = Hyperparams::finite(0.99, 1.0).unwrap();
        let sel = select_params(&s, 5, 0, &start, 1).unwrap();
        assert_eq!(sel.params, start);
        assert_eq!(sel.evaluations, 1);
        let folds = kfold_split(30, 5, 0).unwrap();
        assert_eq!(sel.score, cv_score(&s, &folds, &start).unwrap());
        assert!(matches!(
            select_params(&s, 5, 0, &start, 0),
            Err(CssdError::ZeroBudget)
        ));
    }

    #[test]
    fn search_respects_budget_and_improves() {
        let s = crate::signals::sample(
            crate::signals::Signal::HeaviSine,
            60,
            0.3,
            crate::signals::Sites::UniformRandom,
            8,
        )
        .unwrap();
        let start = Hyperparams::finite(0.5, 100.0).unwrap();
        let sel = select_params(&s, 5, 1, &start, 40).unwrap();
        assert!(sel.evaluations <= 40);
        assert!(sel.score <= sel.start_score);
        assert!(sel.score < sel.start_score);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn search_never_worsens_the_start(seed in 0u64..1000, budget in 1usize..25, lp in 0.1f64..0.99, lg in -2.0f64..2.0) {
            let s = crate::signals::sample(crate::signals::Signal::G1, 25, 0.2, crate::signals::Sites::UniformRandom, seed).unwrap();
            let start = Hyperparams::finite(lp, 10f64.powf(lg)).unwrap();
            let sel = select_params(&s, 4, seed, &start, budget).unwrap();
            prop_assert!(sel.evaluations <= budget);
            prop_assert!(sel.score <= sel.start_score);
        }
    }
}
