// SPDX-License-Identifier: MIT OR Apache-2.0

//! Versioned JSON representation of a solution.

use cssd::{piece_coefficients, CssdSolution64, DataSeries64, Gamma};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// A jump penalty: a number, or the string `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaJson {
    Finite(f64),
    Infinite(InfTag),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum InfTag {
    #[serde(rename = "inf")]
    Inf,
}

impl From<Gamma<f64>> for GammaJson {
    fn from(g: Gamma<f64>) -> Self {
        match g {
            Gamma::Finite(v) => GammaJson::Finite(v),
            Gamma::Infinite => GammaJson::Infinite(InfTag::Inf),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamsJson {
    pub p: f64,
    pub gamma: GammaJson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscontinuityJson {
    pub gap_index: usize,
    pub location: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PieceJson {
    pub x0: f64,
    /// `[c0, c1, c2, c3]` per component, for `f(t) = sum c_k (t - x0)^k`.
    pub coeffs: Vec<[f64; 4]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentJson {
    pub domain: [f64; 2],
    pub knots: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub derivs: Vec<Vec<f64>>,
    pub pieces: Vec<PieceJson>,
    pub energy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedJson {
    pub x: Vec<f64>,
    /// Fitted value per site, one entry per component.
    pub y: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvJson {
    pub cv_score: f64,
    pub start_score: f64,
    pub folds: usize,
    pub seed: u64,
    pub evaluations_used: usize,
    pub restarts: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionJson {
    pub schema: u32,
    pub params: ParamsJson,
    pub objective: f64,
    pub discontinuities: Vec<DiscontinuityJson>,
    pub segments: Vec<SegmentJson>,
    pub fitted: FittedJson,
    #[serde(skip_serializing_if = "Option::is_none", flatten)]
    pub cv: Option<CvJson>,
}

impl SolutionJson {
    pub fn new(series: &DataSeries64, sol: &CssdSolution64, cv: Option<CvJson>) -> Self {
        let jumps = sol.discontinuities();
        let discontinuities = jumps
            .gaps()
            .iter()
            .zip(jumps.locations())
            .map(|(&gap_index, &location)| DiscontinuityJson {
                gap_index,
                location,
            })
            .collect();
        let segments = sol
            .segments()
            .iter()
            .zip(sol.segment_energies())
            .map(|(s, &energy)| SegmentJson {
                domain: [s.domain().0, s.domain().1],
                knots: s.knots().to_vec(),
                values: s.values().to_vec(),
                derivs: s.derivs().to_vec(),
                pieces: piece_coefficients(s)
                    .into_iter()
                    .map(|pc| PieceJson {
                        x0: pc.x0,
                        coeffs: pc.coeffs,
                    })
                    .collect(),
                energy,
            })
            .collect();
        let mut fitted = Vec::with_capacity(series.len());
        for s in sol.segments() {
            for i in 0..s.knots().len() {
                fitted.push(s.values().iter().map(|c| c[i]).collect());
            }
        }
        let params = sol.params();
        Self {
            schema: SCHEMA_VERSION,
            params: ParamsJson {
                p: params.p(),
                gamma: params.gamma().into(),
            },
            objective: sol.objective(),
            discontinuities,
            segments,
            fitted: FittedJson {
                x: series.xs().to_vec(),
                y: fitted,
            },
            cv,
        }
    }
}
