//! Cloud-based control with an output privacy filter.
//!
//! A three-state controlled Markov chain is driven by a cloud service that
//! sees the filter outputs `Y_t` and its own controls. The client wants the
//! trajectory hidden from that service, which is exactly an omniscient
//! smoother adversary. This module solves the smoothing-averse and
//! minimum-information-gain policies on a belief grid and compares them by
//! Monte Carlo.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::belief::{Belief, ControlledHmm, EmissionModel, Observation};
use crate::dp::{
    backward_induction, policy_lookup, ArtifactHeader, GridPolicy, PolicyArtifact, RewardKind, SimplexGrid,
};
use crate::error::{Error, Result};
use crate::quadrature::MeasurementQuadrature;
use crate::smoother::{
    additive_objective_realisation, expected_cost, expected_stage_reward, forward_backward_smoother,
    map_error_rate, min_info_gain_stage_reward, SmoothedPosteriors,
};

pub const DEFAULT_HORIZON: usize = 10;
pub const DEFAULT_RUNS: usize = 200;
pub const DEFAULT_RESOLUTION: f64 = 0.01;

/// Transition matrices of the three-state example, one per control.
pub fn standard_transitions() -> Vec<Vec<Vec<f64>>> {
    vec![
        vec![vec![0.8, 0.8, 0.1], vec![0.1, 0.1, 0.8], vec![0.1, 0.1, 0.1]],
        vec![vec![0.1, 0.1, 0.1], vec![0.8, 0.1, 0.1], vec![0.1, 0.8, 0.8]],
        vec![vec![0.9, 0.05, 0.05], vec![0.05, 0.9, 0.05], vec![0.05, 0.05, 0.9]],
    ]
}

pub const STANDARD_MEANS: [f64; 3] = [1.0, 3.0, 5.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudScenario {
    pub hmm: ControlledHmm,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default = "default_runs")]
    pub n_runs: usize,
    /// `stage_cost[state][control]`; all zeros when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage_cost: Option<Vec<Vec<f64>>>,
}

fn default_horizon() -> usize {
    DEFAULT_HORIZON
}

fn default_runs() -> usize {
    DEFAULT_RUNS
}

impl CloudScenario {
    /// Three states, three controls, unit-variance Gaussian outputs with
    /// means 1, 3, 5, uniform prior, `T = 10`, no stage cost.
    pub fn standard() -> Self {
        let hmm = ControlledHmm::new(
            standard_transitions(),
            EmissionModel::ScalarGaussian { means: STANDARD_MEANS.to_vec(), std_dev: 1.0 },
            Belief::uniform(3),
        )
        .expect("standard model is valid");
        Self { hmm, horizon: DEFAULT_HORIZON, gamma: 0.0, n_runs: DEFAULT_RUNS, stage_cost: None }
    }

    /// The standard scenario with each Gaussian output binned into three
    /// symbols at the midpoints between the means (`y < 2`, `2 <= y < 4`,
    /// `y >= 4`). Used where exact enumeration needs a finite alphabet.
    pub fn discretised_standard() -> Self {
        let cuts = [2.0, 4.0];
        let likelihood = STANDARD_MEANS
            .iter()
            .map(|&m| {
                let d = Normal::new(m, 1.0).expect("unit normal");
                let (a, b) = (d.cdf(cuts[0]), d.cdf(cuts[1]));
                let row = [a, b - a, 1.0 - b];
                let s: f64 = row.iter().sum();
                row.iter().map(|p| p / s).collect()
            })
            .collect();
        let hmm = ControlledHmm::new(standard_transitions(), EmissionModel::Discrete { likelihood }, Belief::uniform(3))
            .expect("discretised model is valid");
        Self { hmm, ..Self::standard() }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let scenario: Self = serde_json::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be finite and >= 0, got {}", self.gamma)));
        }
        if let Some(cost) = &self.stage_cost {
            let (n, m) = (self.hmm.n_states(), self.hmm.n_controls());
            if cost.len() != n || cost.iter().any(|r| r.len() != m) {
                return Err(Error::Config(format!("stage_cost must be {n} x {m}")));
            }
            if cost.iter().flatten().any(|c| !(c.is_finite() && *c >= 0.0)) {
                return Err(Error::Config("stage costs must be finite and >= 0".into()));
            }
        }
        Ok(())
    }

    pub fn cost(&self, state: usize, u: usize) -> f64 {
        self.stage_cost.as_ref().map_or(0.0, |c| c[state][u])
    }

    /// Expected stage reward `r(belief, u)` for the chosen objective.
    pub fn stage_reward(&self, kind: RewardKind, quadrature: &MeasurementQuadrature, belief: &Belief, u: usize) -> Result<f64> {
        let cost = |x: usize, u: usize| self.cost(x, u);
        match kind {
            RewardKind::SmoothingAverse => expected_stage_reward(&self.hmm, belief, u, cost, self.gamma, quadrature),
            RewardKind::MinInfoGain => Ok(min_info_gain_stage_reward(&self.hmm, belief, u, quadrature)?
                - self.gamma * expected_cost(belief, u, cost)),
            RewardKind::Zero => Ok(0.0),
        }
    }

    /// Builds the belief grid and runs backward induction.
    pub fn solve(&self, kind: RewardKind, grid: &SimplexGrid, cells: usize) -> Result<PolicyArtifact> {
        self.validate()?;
        let quadrature = MeasurementQuadrature::new(self.hmm.emissions(), cells)?;
        let reward = |b: &Belief, u: usize| self.stage_reward(kind, &quadrature, b, u);
        let (values, policy) = backward_induction(&self.hmm, grid, &quadrature, self.horizon, &reward)?;
        Ok(PolicyArtifact {
            header: ArtifactHeader {
                n_states: self.hmm.n_states(),
                n_controls: self.hmm.n_controls(),
                resolution: grid.resolution(),
                divisions: grid.divisions(),
                horizon: self.horizon,
                reward_kind: kind,
                quadrature: quadrature.spec(),
                gamma: self.gamma,
            },
            values,
            policy,
        })
    }
}

/// A grid policy ready for look-ups.
pub struct GridController<'a> {
    policy: &'a GridPolicy,
    grid: SimplexGrid,
}

impl<'a> GridController<'a> {
    pub fn new(artifact: &'a PolicyArtifact, scenario: &CloudScenario) -> Result<Self> {
        artifact.check_matches(&scenario.hmm, scenario.horizon)?;
        Ok(Self { policy: &artifact.policy, grid: artifact.grid()? })
    }

    pub fn control(&self, belief: &Belief, t: usize) -> Result<usize> {
        policy_lookup(self.policy, &self.grid, belief, t)
    }
}

/// One simulated trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeRecord {
    pub seed: u64,
    pub states: Vec<usize>,
    pub controls: Vec<usize>,
    pub observations: Vec<Observation>,
    /// Filter beliefs `pi_0 .. pi_T`.
    pub beliefs: Vec<Belief>,
    pub additive_objective: f64,
    /// `h(X^T | y^T, u^{T-1})` by the backward chain rule.
    pub trajectory_entropy: f64,
    #[serde(skip)]
    pub smoothed: SmoothedPosteriors,
    /// MAP errors over `t = 1..=T`.
    pub map_errors: usize,
    pub map_error_rate: f64,
}

fn sample_index(probs: impl Iterator<Item = f64>, u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.enumerate() {
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Draws an observation from state `x`. Consumes exactly one uniform so
/// that streams stay aligned across policies.
fn sample_observation(emissions: &EmissionModel, x: usize, rng: &mut ChaCha8Rng) -> Observation {
    let u: f64 = rng.random();
    match emissions {
        EmissionModel::Discrete { likelihood } => Observation::Symbol(sample_index(likelihood[x].iter().copied(), u)),
        EmissionModel::ScalarGaussian { means, std_dev } => {
            let z = Normal::new(0.0, 1.0).expect("unit normal").inverse_cdf(u.clamp(1e-300, 1.0 - 1e-16));
            Observation::Scalar(means[x] + std_dev * z)
        }
    }
}

/// Simulates one episode under `artifact`, fully determined by `seed`.
pub fn run_episode(scenario: &CloudScenario, artifact: &PolicyArtifact, seed: u64) -> Result<EpisodeRecord> {
    let controller = GridController::new(artifact, scenario)?;
    run_episode_with(scenario, &|b: &Belief, t| controller.control(b, t), seed)
}

/// Simulates one episode with an arbitrary belief-feedback controller.
/// `seed` is used directly as the episode's RNG seed.
pub fn run_episode_with<P>(scenario: &CloudScenario, controller: &P, seed: u64) -> Result<EpisodeRecord>
where
    P: Fn(&Belief, usize) -> Result<usize> + ?Sized,
{
    use rand::SeedableRng;
    let hmm = &scenario.hmm;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let horizon = scenario.horizon;

    let x0 = sample_index(hmm.initial().probs().iter().copied(), rng.random());
    let y0 = sample_observation(hmm.emissions(), x0, &mut rng);
    let mut states = vec![x0];
    let mut observations = vec![y0];
    let mut controls = Vec::with_capacity(horizon);
    let mut beliefs = vec![hmm.measurement_update(hmm.initial(), y0)?];

    for t in 0..horizon {
        let u = controller(&beliefs[t], t)?;
        let x = states[t];
        let next = sample_index((0..hmm.n_states()).map(|i| hmm.transition(u, i, x)), rng.random());
        let y = sample_observation(hmm.emissions(), next, &mut rng);
        beliefs.push(hmm.filter_update(&beliefs[t], u, y)?);
        states.push(next);
        controls.push(u);
        observations.push(y);
    }

    let additive_objective = additive_objective_realisation(hmm, &controls, &observations)?;
    let smoothed = forward_backward_smoother(hmm, &controls, &observations)?;
    let trajectory_entropy = smoothed.trajectory_entropy();
    let map_error_rate = map_error_rate(&smoothed, &states, 1..horizon + 1)?;
    let map_errors = (1..=horizon).filter(|&t| smoothed.marginals[t].argmax() != states[t]).count();
    Ok(EpisodeRecord {
        seed,
        states,
        controls,
        observations,
        beliefs,
        additive_objective,
        trajectory_entropy,
        smoothed,
        map_errors,
        map_error_rate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyMetrics {
    pub policy: String,
    pub mean_entropy_nats: f64,
    pub map_error: f64,
    pub n_runs: usize,
}

#[derive(Debug, Clone)]
pub struct PolicyEvaluation {
    pub metrics: PolicyMetrics,
    pub episodes: Vec<EpisodeRecord>,
}

/// Runs `n_runs` episodes per policy. Episode `i` of every policy uses
/// stream `i` of `master_seed`, so policies are compared on common random
/// numbers.
pub fn evaluate_policies(
    scenario: &CloudScenario,
    policies: &[(String, &PolicyArtifact)],
    master_seed: u64,
    n_runs: usize,
) -> Result<Vec<PolicyEvaluation>> {
    if n_runs == 0 {
        return Err(Error::Config("at least one run is required".into()));
    }
    policies
        .iter()
        .map(|(name, artifact)| {
            let controller = GridController::new(artifact, scenario)?;
            let episodes = (0..n_runs as u64)
                .into_par_iter()
                .map(|i| {
                    let seed = crate::seed::derive_seed(master_seed, i);
                    run_episode_with(scenario, &|b: &Belief, t| controller.control(b, t), seed)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(PolicyEvaluation { metrics: summarise(name, &episodes), episodes })
        })
        .collect()
}

pub fn summarise(name: &str, episodes: &[EpisodeRecord]) -> PolicyMetrics {
    let n = episodes.len() as f64;
    PolicyMetrics {
        policy: name.to_string(),
        mean_entropy_nats: episodes.iter().map(|e| e.trajectory_entropy).sum::<f64>() / n,
        map_error: episodes.iter().map(|e| e.map_error_rate).sum::<f64>() / n,
        n_runs: episodes.len(),
    }
}
