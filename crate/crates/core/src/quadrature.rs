//! Measurement cells for expectations over the next observation.
//!
//! Discrete emissions get one exact cell per symbol. Scalar Gaussian
//! emissions get `K` equal cells on `[min mean - 4 sd, max mean + 4 sd]`
//! plus one tail cell on each side. Cell masses come from the Gaussian CDF;
//! the filter is evaluated at cell midpoints, and at `4.5 sd` beyond the
//! extreme means for the tails.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::belief::{Belief, EmissionModel, Observation};
use crate::error::{Error, Result};

pub const DEFAULT_CELLS: usize = 60;

/// Half-width of the gridded region, in standard deviations.
const SPAN_SDS: f64 = 4.0;
/// Where tail cells are evaluated, in standard deviations.
const TAIL_SDS: f64 = 4.5;

/// How a quadrature was built; stored in policy artifacts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QuadratureSpec {
    Exact,
    Gaussian { cells: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureCell {
    /// Observation at which the filter is evaluated for this cell.
    pub observation: Observation,
    /// `P(Y in cell | X = i)` for every state `i`.
    pub state_probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementQuadrature {
    spec: QuadratureSpec,
    cells: Vec<QuadratureCell>,
}

impl MeasurementQuadrature {
    /// Builds the quadrature for `emissions`. `cells` is ignored for
    /// discrete emissions.
    pub fn new(emissions: &EmissionModel, cells: usize) -> Result<Self> {
        match emissions {
            EmissionModel::Discrete { likelihood } => {
                let n_obs = likelihood[0].len();
                let cells = (0..n_obs)
                    .map(|k| QuadratureCell {
                        observation: Observation::Symbol(k),
                        state_probs: likelihood.iter().map(|row| row[k]).collect(),
                    })
                    .collect();
                Ok(Self { spec: QuadratureSpec::Exact, cells })
            }
            EmissionModel::ScalarGaussian { means, std_dev } => {
                if cells == 0 {
                    return Err(Error::Config("quadrature needs at least one interior cell".into()));
                }
                let sd = *std_dev;
                let lo_mean = means.iter().copied().fold(f64::INFINITY, f64::min);
                let hi_mean = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lo = lo_mean - SPAN_SDS * sd;
                let hi = hi_mean + SPAN_SDS * sd;
                let width = (hi - lo) / cells as f64;
                let edges: Vec<f64> = (0..=cells).map(|k| lo + width * k as f64).collect();

                let dists = means
                    .iter()
                    .map(|&m| Normal::new(m, sd).map_err(|e| Error::InvalidModel(e.to_string())))
                    .collect::<Result<Vec<_>>>()?;
                let cdf_at = |x: f64| dists.iter().map(|d| d.cdf(x)).collect::<Vec<_>>();

                let mut out = Vec::with_capacity(cells + 2);
                out.push(QuadratureCell {
                    observation: Observation::Scalar(lo_mean - TAIL_SDS * sd),
                    state_probs: cdf_at(lo),
                });
                let mut prev = cdf_at(lo);
                for k in 0..cells {
                    let next = cdf_at(edges[k + 1]);
                    out.push(QuadratureCell {
                        observation: Observation::Scalar(0.5 * (edges[k] + edges[k + 1])),
                        state_probs: next.iter().zip(&prev).map(|(b, a)| b - a).collect(),
                    });
                    prev = next;
                }
                out.push(QuadratureCell {
                    observation: Observation::Scalar(hi_mean + TAIL_SDS * sd),
                    state_probs: prev.iter().map(|c| 1.0 - c).collect(),
                });
                Ok(Self { spec: QuadratureSpec::Gaussian { cells }, cells: out })
            }
        }
    }

    pub fn spec(&self) -> QuadratureSpec {
        self.spec
    }

    pub fn is_exact(&self) -> bool {
        self.spec == QuadratureSpec::Exact
    }

    pub fn cells(&self) -> &[QuadratureCell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// `P(cell | predicted)` for every cell.
    pub fn cell_probabilities(&self, predicted: &Belief) -> Vec<f64> {
        self.cells
            .iter()
            .map(|c| c.state_probs.iter().zip(predicted.probs()).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Checks that this quadrature was built for `emissions`.
    pub fn check_matches(&self, emissions: &EmissionModel) -> Result<()> {
        let n_states = match emissions {
            EmissionModel::Discrete { likelihood } => likelihood.len(),
            EmissionModel::ScalarGaussian { means, .. } => means.len(),
        };
        let ok = match (emissions, self.spec) {
            (EmissionModel::Discrete { likelihood }, QuadratureSpec::Exact) => self.cells.len() == likelihood[0].len(),
            (EmissionModel::ScalarGaussian { .. }, QuadratureSpec::Gaussian { .. }) => true,
            _ => false,
        };
        if !ok || self.cells.iter().any(|c| c.state_probs.len() != n_states) {
            return Err(Error::Config(format!("quadrature {:?} does not match the emission model", self.spec)));
        }
        Ok(())
    }
}
