//! Belief-space dynamic programming on a simplex grid.
//!
//! The belief simplex is replaced by the lattice of probability vectors whose
//! entries are multiples of `1 / divisions`. From each grid point and control
//! the filter is run once per measurement cell and the result projected back
//! onto the lattice, giving a finite Markov chain on which backward induction
//! is exact.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::belief::{Belief, ControlledHmm};
use crate::error::{Error, Result};
use crate::quadrature::{MeasurementQuadrature, QuadratureSpec};

/// Default cap on the number of grid points.
pub const DEFAULT_GRID_LIMIT: u128 = 5_000_000;

/// Lattice points of the belief simplex, sorted lexicographically with the
/// largest first coordinate first (`[1, 0]` before `[0.5, 0.5]`).
#[derive(Debug, Clone)]
pub struct SimplexGrid {
    n_states: usize,
    divisions: usize,
    points: Vec<Belief>,
    /// `binom[a][b] = C(a, b)` for `b <= n_states`.
    binom: Vec<Vec<u64>>,
}

/// Number of lattice points: compositions of `divisions` into `n_states`
/// non-negative parts.
pub fn grid_point_count(n_states: usize, divisions: usize) -> u128 {
    let (a, b) = ((divisions + n_states - 1) as u128, (n_states - 1) as u128);
    let mut c: u128 = 1;
    for k in 0..b {
        c = c.saturating_mul(a - k) / (k + 1);
    }
    c
}

/// Converts a step `resolution` into an integer number of divisions.
pub fn divisions_for(resolution: f64) -> Result<usize> {
    if !(resolution > 0.0 && resolution <= 1.0) {
        return Err(Error::Config(format!("grid resolution {resolution} must be in (0, 1]")));
    }
    let m = (1.0 / resolution).round();
    if ((m * resolution) - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("1 / resolution must be an integer, got {}", 1.0 / resolution)));
    }
    Ok(m as usize)
}

/// Builds the grid with the default size guard.
pub fn build_grid(n_states: usize, resolution: f64) -> Result<SimplexGrid> {
    SimplexGrid::with_limit(n_states, resolution, DEFAULT_GRID_LIMIT)
}

impl SimplexGrid {
    pub fn with_limit(n_states: usize, resolution: f64, limit: u128) -> Result<Self> {
        if n_states == 0 {
            return Err(Error::Config("grid needs at least one state".into()));
        }
        let divisions = divisions_for(resolution)?;
        let count = grid_point_count(n_states, divisions);
        if count > limit {
            return Err(Error::SizeGuard { what: "simplex grid points".into(), count, limit });
        }
        let mut points = Vec::with_capacity(count as usize);
        let mut parts = vec![0usize; n_states];
        compositions(&mut parts, 0, divisions, &mut |c| {
            let probs = c.iter().map(|&k| k as f64 / divisions as f64).collect();
            points.push(Belief::from_exact(probs));
        });
        debug_assert_eq!(points.len() as u128, count);

        let rows = divisions + n_states + 1;
        let mut binom = vec![vec![0u64; n_states + 1]; rows];
        for a in 0..rows {
            binom[a][0] = 1;
            for b in 1..=n_states.min(a) {
                binom[a][b] = binom[a - 1][b - 1] + if b < a { binom[a - 1][b] } else { 0 };
            }
        }
        Ok(Self { n_states, divisions, points, binom })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn divisions(&self) -> usize {
        self.divisions
    }

    pub fn resolution(&self) -> f64 {
        1.0 / self.divisions as f64
    }

    pub fn points(&self) -> &[Belief] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Position of the lattice point with integer coordinates `parts`.
    fn rank(&self, parts: &[usize]) -> usize {
        let n = self.n_states;
        let mut remaining = self.divisions;
        let mut rank = 0u64;
        for (i, &c) in parts.iter().enumerate().take(n - 1) {
            // Points with a larger value in slot i come first.
            let k = n - i - 1;
            if remaining > c {
                rank += self.binom[remaining - c - 1 + k][k];
            }
            remaining -= c;
        }
        rank as usize
    }

    /// Index of the grid point nearest to `belief` in Euclidean distance,
    /// ties going to the lowest index.
    ///
    /// Any nearest lattice point rounds each scaled coordinate either down
    /// or up, and the round-ups go to the largest fractional parts. Among
    /// equal fractional parts the earliest coordinates are rounded up, which
    /// gives the lexicographically largest, i.e. lowest-index, point.
    pub fn project(&self, belief: &Belief) -> usize {
        debug_assert_eq!(belief.len(), self.n_states);
        let m = self.divisions as f64;
        let scaled: Vec<f64> = belief.probs().iter().map(|p| p * m).collect();
        let mut parts: Vec<usize> = scaled.iter().map(|s| s.floor() as usize).collect();
        let floor_sum: usize = parts.iter().sum();
        let mut deficit = self.divisions.saturating_sub(floor_sum).min(self.n_states);
        let mut order: Vec<usize> = (0..self.n_states).collect();
        order.sort_by(|&a, &b| {
            let (fa, fb) = (scaled[a] - parts[a] as f64, scaled[b] - parts[b] as f64);
            fb.total_cmp(&fa).then(a.cmp(&b))
        });
        for &i in &order {
            if deficit == 0 {
                break;
            }
            parts[i] += 1;
            deficit -= 1;
        }
        // Rounding noise can leave the sum above the target; trim from the
        // smallest fractional parts.
        let mut excess = parts.iter().sum::<usize>().saturating_sub(self.divisions);
        for &i in order.iter().rev() {
            if excess == 0 {
                break;
            }
            if parts[i] > 0 {
                parts[i] -= 1;
                excess -= 1;
            }
        }
        self.rank(&parts)
    }
}

/// Visits compositions of `total` into `parts.len() - slot` parts, largest
/// leading value first.
fn compositions(parts: &mut [usize], slot: usize, total: usize, visit: &mut impl FnMut(&[usize])) {
    if slot == parts.len() - 1 {
        parts[slot] = total;
        visit(parts);
        return;
    }
    for v in (0..=total).rev() {
        parts[slot] = v;
        compositions(parts, slot + 1, total - v, visit);
    }
}

/// Which stage reward a policy was solved for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardKind {
    SmoothingAverse,
    MinInfoGain,
    Zero,
}

impl std::fmt::Display for RewardKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RewardKind::SmoothingAverse => "smoothing-averse",
            RewardKind::MinInfoGain => "min-info-gain",
            RewardKind::Zero => "zero",
        })
    }
}

impl std::str::FromStr for RewardKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smoothing-averse" => Ok(RewardKind::SmoothingAverse),
            "min-info-gain" => Ok(RewardKind::MinInfoGain),
            "zero" => Ok(RewardKind::Zero),
            other => Err(Error::Config(format!("unknown reward kind {other:?}"))),
        }
    }
}

/// `J_t` at every grid point for `t = 0..=T`; row `T` is all zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    pub horizon: usize,
    pub values: Vec<Vec<f64>>,
}

/// Maximising control at every grid point for `t = 0..T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPolicy {
    pub horizon: usize,
    pub controls: Vec<Vec<usize>>,
}

/// One successor of a (grid point, control) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub target: usize,
    pub prob: f64,
}

/// The finite Markov chain on grid points induced by the filter and the
/// measurement quadrature, with the stage reward at each (point, control).
///
/// Successor lists are kept per pair in measurement-cell order; they are
/// sparse (at most one entry per cell) and stage-independent, so they are
/// computed once and reused by every stage.
#[derive(Debug, Clone)]
pub struct ApproxChain {
    n_points: usize,
    n_controls: usize,
    rewards: Vec<f64>,
    successors: Vec<Vec<Transition>>,
}

impl ApproxChain {
    pub fn build<R>(hmm: &ControlledHmm, grid: &SimplexGrid, quadrature: &MeasurementQuadrature, reward: &R) -> Result<Self>
    where
        R: Fn(&Belief, usize) -> Result<f64> + Sync,
    {
        if grid.n_states() != hmm.n_states() {
            return Err(Error::Consistency(format!(
                "grid has {} states, model has {}",
                grid.n_states(),
                hmm.n_states()
            )));
        }
        quadrature.check_matches(hmm.emissions())?;
        let nc = hmm.n_controls();
        let pairs: Vec<(f64, Vec<Transition>)> = (0..grid.len() * nc)
            .into_par_iter()
            .map(|k| {
                let (point, u) = (&grid.points()[k / nc], k % nc);
                let r = reward(point, u)?;
                let predicted = hmm.predict_marginal(point, u)?;
                let mut succ = Vec::with_capacity(quadrature.len());
                for (cell, prob) in quadrature.cells().iter().zip(quadrature.cell_probabilities(&predicted)) {
                    if prob > 0.0 {
                        let post = hmm.measurement_update(&predicted, cell.observation)?;
                        succ.push(Transition { target: grid.project(&post), prob });
                    }
                }
                Ok((r, succ))
            })
            .collect::<Result<_>>()?;
        let (rewards, successors) = pairs.into_iter().unzip();
        Ok(Self { n_points: grid.len(), n_controls: nc, rewards, successors })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn n_controls(&self) -> usize {
        self.n_controls
    }

    pub fn reward(&self, point: usize, u: usize) -> f64 {
        self.rewards[point * self.n_controls + u]
    }

    pub fn successors(&self, point: usize, u: usize) -> &[Transition] {
        &self.successors[point * self.n_controls + u]
    }

    /// `reward(point, u) + E[next_values[successor]]`, summed in cell order.
    pub fn q_value(&self, point: usize, u: usize, next_values: &[f64]) -> f64 {
        let cont: f64 = self.successors(point, u).iter().map(|t| t.prob * next_values[t.target]).sum();
        self.reward(point, u) + cont
    }

    /// Backward induction over `horizon` stages.
    pub fn solve(&self, horizon: usize) -> (ValueTable, GridPolicy) {
        let mut values = vec![vec![0.0; self.n_points]; horizon + 1];
        let mut controls = vec![vec![0usize; self.n_points]; horizon];
        for t in (0..horizon).rev() {
            let next = &values[t + 1];
            let stage: Vec<(f64, usize)> = (0..self.n_points)
                .into_par_iter()
                .map(|p| {
                    let mut best = (self.q_value(p, 0, next), 0);
                    for u in 1..self.n_controls {
                        let q = self.q_value(p, u, next);
                        if q > best.0 {
                            best = (q, u);
                        }
                    }
                    best
                })
                .collect();
            for (p, (v, u)) in stage.into_iter().enumerate() {
                values[t][p] = v;
                controls[t][p] = u;
            }
        }
        (ValueTable { horizon, values }, GridPolicy { horizon, controls })
    }

    /// Expected total reward of a fixed control sequence started at `start`.
    pub fn open_loop_value(&self, start: usize, controls: &[usize]) -> f64 {
        let mut dist = vec![0.0; self.n_points];
        dist[start] = 1.0;
        let mut total = 0.0;
        for &u in controls {
            let mut next = vec![0.0; self.n_points];
            for (p, &w) in dist.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                total += w * self.reward(p, u);
                for t in self.successors(p, u) {
                    next[t.target] += w * t.prob;
                }
            }
            dist = next;
        }
        total
    }
}

/// Solves the finite-horizon recursion on `grid`. Ties between controls go
/// to the lowest control index.
pub fn backward_induction<R>(
    hmm: &ControlledHmm,
    grid: &SimplexGrid,
    quadrature: &MeasurementQuadrature,
    horizon: usize,
    reward: &R,
) -> Result<(ValueTable, GridPolicy)>
where
    R: Fn(&Belief, usize) -> Result<f64> + Sync,
{
    Ok(ApproxChain::build(hmm, grid, quadrature, reward)?.solve(horizon))
}

/// Control stored for the grid point nearest `belief` at stage `t`.
pub fn policy_lookup(policy: &GridPolicy, grid: &SimplexGrid, belief: &Belief, t: usize) -> Result<usize> {
    if t >= policy.horizon {
        return Err(Error::Input(format!("stage {t} out of range for horizon {}", policy.horizon)));
    }
    if belief.len() != grid.n_states() {
        return Err(Error::Domain(format!("belief has {} states, grid has {}", belief.len(), grid.n_states())));
    }
    Ok(policy.controls[t][grid.project(belief)])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactHeader {
    pub n_states: usize,
    pub n_controls: usize,
    pub resolution: f64,
    pub divisions: usize,
    pub horizon: usize,
    pub reward_kind: RewardKind,
    pub quadrature: QuadratureSpec,
    pub gamma: f64,
}

/// A solved policy with its value table, as written by `solve`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyArtifact {
    pub header: ArtifactHeader,
    pub values: ValueTable,
    pub policy: GridPolicy,
}

impl PolicyArtifact {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    /// Rebuilds the grid the policy was solved on.
    pub fn grid(&self) -> Result<SimplexGrid> {
        SimplexGrid::with_limit(self.header.n_states, 1.0 / self.header.divisions as f64, u128::MAX)
    }

    /// Refuses a policy whose header disagrees with the model it will drive.
    pub fn check_matches(&self, hmm: &ControlledHmm, horizon: usize) -> Result<()> {
        let h = &self.header;
        let mut problems = Vec::new();
        if h.n_states != hmm.n_states() {
            problems.push(format!("n_states {} vs {}", h.n_states, hmm.n_states()));
        }
        if h.n_controls != hmm.n_controls() {
            problems.push(format!("n_controls {} vs {}", h.n_controls, hmm.n_controls()));
        }
        if h.horizon != horizon {
            problems.push(format!("horizon {} vs {}", h.horizon, horizon));
        }
        let is_exact = matches!(h.quadrature, QuadratureSpec::Exact);
        if is_exact != hmm.emissions().n_symbols().is_some() {
            problems.push(format!("quadrature {:?} does not fit the emission model", h.quadrature));
        }
        if self.policy.controls.len() != h.horizon || self.values.values.len() != h.horizon + 1 {
            problems.push("table sizes disagree with the header horizon".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Consistency(format!("policy artifact mismatch: {}", problems.join(", "))))
        }
    }
}
