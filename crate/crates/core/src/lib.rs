// SPDX-License-Identifier: MIT OR Apache-2.0

//! Cubic smoothing splines with discontinuities.
//!
//! Fits a piecewise smoothing spline whose breakpoints are chosen to
//! globally minimize
//!
//! ```text
//! p * sum(((y_i - f(x_i)) / delta_i)^2) + (1 - p) * integral(f''^2) + gamma * |J|
//! ```
//!
//! over all discontinuity sets `J` and functions `f` that are twice
//! continuously differentiable away from `J`. The solver runs a pruned
//! dynamic program over the midpoints between data sites, fed by an O(1)
//! per-site update of the smoothing-spline energies.
//!
//! All numerical code is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below cover the common case.

pub mod energy;
pub mod error;
pub mod model;
pub mod model_selection;
pub mod oracle;
pub mod preprocess;
pub mod scalar;
pub mod segment_fit;
pub mod signals;
pub mod solver;

pub use energy::{
    local_roughness_factor, prefix_energies, roughness_matrix, Direction, EnergyState, EnergyStream,
};
pub use error::{CssdError, Result};
pub use model::{
    max_discontinuities, CssdSolution, DataSeries, DiscontinuitySet, Gamma, Hyperparams,
    SegmentSpline,
};
pub use model_selection::{
    cv_score, kfold_split, select_params, select_params_with_folds, GammaCoord, Selection,
};
pub use preprocess::{
    bin_closest, check_mesh_ratio, merge_coincident, mesh_ratio, validate_and_sort, RawSample,
    DEFAULT_MESH_RATIO_THRESHOLD,
};
pub use scalar::Real;
pub use segment_fit::{eval_spline, fit_segment, functional_value, piece_coefficients, Piece};
pub use solver::{
    objective, solve_cssd, solve_partition, solve_partition_with, traceback, DpTables, Pruning,
};

pub type DataSeries64 = DataSeries<f64>;
pub type DataSeries32 = DataSeries<f32>;
pub type Hyperparams64 = Hyperparams<f64>;
pub type Hyperparams32 = Hyperparams<f32>;
pub type Gamma64 = Gamma<f64>;
pub type DiscontinuitySet64 = DiscontinuitySet<f64>;
pub type SegmentSpline64 = SegmentSpline<f64>;
pub type CssdSolution64 = CssdSolution<f64>;
pub type CssdSolution32 = CssdSolution<f32>;
pub type DpTables64 = DpTables<f64>;
pub type Selection64 = Selection<f64>;
