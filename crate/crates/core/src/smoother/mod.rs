//! Smoother entropy as a sum of filter-computable stage rewards.
//!
//! The stage reward for the step from `pi_{t-1}` under control `u_{t-1}`
//! with measurement `y_t` is
//!
//! ```text
//! r~ = h(X_t | y^t, u^{t-1}) - h(X_t | y^{t-1}, u^{t-1}) + h(X_t | X_{t-1}, y^{t-1}, u^{t-1})
//! ```
//!
//! and its expected sum over a horizon (with `h(X_0 | y_0)` as the first
//! term) equals the joint entropy of the smoother's trajectory posterior.
//! [`enumeration`] holds brute-force routes to the same quantities for
//! checking.

pub mod enumeration;

use std::ops::Range;

use serde::Serialize;

use crate::belief::{conditional_entropy_of_joint, entropy_of, Belief, ControlledHmm, Observation};
use crate::error::{Error, Result};
use crate::quadrature::MeasurementQuadrature;

pub use enumeration::exact_smoother_entropy_enumeration;

/// The three entropies that make up one stage reward, in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StageRewardBreakdown {
    /// Entropy of the corrected belief.
    pub h_post: f64,
    /// Entropy of the predicted belief.
    pub h_pred: f64,
    /// Conditional entropy of the next state given the previous one.
    pub h_trans: f64,
    pub r_tilde: f64,
}

impl StageRewardBreakdown {
    fn new(h_post: f64, h_pred: f64, h_trans: f64) -> Self {
        Self { h_post, h_pred, h_trans, r_tilde: h_post - h_pred + h_trans }
    }
}

/// Prediction-side quantities shared by every measurement branch.
struct Prediction {
    predicted: Belief,
    h_pred: f64,
    h_trans: f64,
}

fn predict(hmm: &ControlledHmm, prev: &Belief, u: usize) -> Result<Prediction> {
    let joint = hmm.predict_joint(prev, u)?;
    let h_trans = conditional_entropy_of_joint(&joint, prev)?;
    let predicted = Belief::from_weights(joint.next_marginal())?;
    Ok(Prediction { h_pred: predicted.entropy(), predicted, h_trans })
}

fn stage_step(hmm: &ControlledHmm, prev: &Belief, u: usize, y: Observation) -> Result<(StageRewardBreakdown, Belief)> {
    let p = predict(hmm, prev, u)?;
    let post = hmm.measurement_update(&p.predicted, y)?;
    Ok((StageRewardBreakdown::new(post.entropy(), p.h_pred, p.h_trans), post))
}

/// Stage reward `r~(prev, u, y)` with its entropy terms.
pub fn stage_reward_tilde(hmm: &ControlledHmm, prev: &Belief, u: usize, y: Observation) -> Result<StageRewardBreakdown> {
    stage_step(hmm, prev, u, y).map(|(b, _)| b)
}

/// `E[h_post | belief, u]` under the quadrature, together with the
/// prediction terms.
fn expected_terms(
    hmm: &ControlledHmm,
    belief: &Belief,
    u: usize,
    quadrature: &MeasurementQuadrature,
) -> Result<(f64, Prediction)> {
    quadrature.check_matches(hmm.emissions())?;
    let p = predict(hmm, belief, u)?;
    let mut h_post = 0.0;
    for (cell, prob) in quadrature.cells().iter().zip(quadrature.cell_probabilities(&p.predicted)) {
        if prob > 0.0 {
            h_post += prob * hmm.measurement_update(&p.predicted, cell.observation)?.entropy();
        }
    }
    Ok((h_post, p))
}

/// Expected stage reward `r(pi, u) = E[r~(pi, u, Y) - gamma c(X, u)]`.
///
/// `cost(state, control)` is the instantaneous cost. The expectation over
/// `Y` is exact for discrete emissions and a cell quadrature otherwise.
pub fn expected_stage_reward<C>(
    hmm: &ControlledHmm,
    belief: &Belief,
    u: usize,
    cost: C,
    gamma: f64,
    quadrature: &MeasurementQuadrature,
) -> Result<f64>
where
    C: Fn(usize, usize) -> f64,
{
    let (h_post, p) = expected_terms(hmm, belief, u, quadrature)?;
    Ok(h_post - p.h_pred + p.h_trans - gamma * expected_cost(belief, u, cost))
}

/// `sum_i belief[i] * cost(i, u)`.
pub fn expected_cost<C: Fn(usize, usize) -> f64>(belief: &Belief, u: usize, cost: C) -> f64 {
    belief.probs().iter().enumerate().map(|(i, p)| p * cost(i, u)).sum()
}

/// Baseline reward that only penalises the information the next
/// measurement carries about the state: `E[h_post] - h_pred`.
pub fn min_info_gain_stage_reward(
    hmm: &ControlledHmm,
    belief: &Belief,
    u: usize,
    quadrature: &MeasurementQuadrature,
) -> Result<f64> {
    let (h_post, p) = expected_terms(hmm, belief, u, quadrature)?;
    Ok(h_post - p.h_pred)
}

fn check_lengths(controls: &[usize], observations: &[Observation]) -> Result<()> {
    if observations.len() != controls.len() + 1 {
        return Err(Error::Input(format!(
            "expected {} observations for {} controls, got {}",
            controls.len() + 1,
            controls.len(),
            observations.len()
        )));
    }
    Ok(())
}

/// Forward filter over one realisation. Returns `pi_0 .. pi_T`, where
/// `pi_0` is the initial belief corrected by `y_0` without prediction.
pub fn filter_beliefs(hmm: &ControlledHmm, controls: &[usize], observations: &[Observation]) -> Result<Vec<Belief>> {
    check_lengths(controls, observations)?;
    let mut beliefs = Vec::with_capacity(observations.len());
    beliefs.push(hmm.measurement_update(hmm.initial(), observations[0])?);
    for (t, &u) in controls.iter().enumerate() {
        let next = hmm.filter_update(&beliefs[t], u, observations[t + 1])?;
        beliefs.push(next);
    }
    Ok(beliefs)
}

/// Realised additive objective `h(X_0 | y_0) + sum_t r~(pi_{t-1}, u_{t-1}, y_t)`
/// along one measurement sequence.
pub fn additive_objective_realisation(
    hmm: &ControlledHmm,
    controls: &[usize],
    observations: &[Observation],
) -> Result<f64> {
    check_lengths(controls, observations)?;
    let mut belief = hmm.measurement_update(hmm.initial(), observations[0])?;
    let mut total = belief.entropy();
    for (t, &u) in controls.iter().enumerate() {
        let (stage, post) = stage_step(hmm, &belief, u, observations[t + 1])?;
        total += stage.r_tilde;
        belief = post;
    }
    Ok(total)
}

/// Average of [`additive_objective_realisation`] over every observation
/// sequence, weighted by the filter's predictive probability of the
/// sequence. Discrete emissions only.
pub fn expected_additive_objective(hmm: &ControlledHmm, controls: &[usize]) -> Result<f64> {
    let n_obs = hmm
        .emissions()
        .n_symbols()
        .ok_or_else(|| Error::Domain("expected additive objective needs discrete emissions".into()))?;
    let len = controls.len() + 1;
    let count = enumeration::sequence_count(n_obs, len, "observation sequences")?;
    let mut total = 0.0;
    let mut ys = vec![0usize; len];
    for _ in 0..count {
        let observations: Vec<Observation> = ys.iter().map(|&k| Observation::Symbol(k)).collect();
        if let Some(prob) = predictive_probability(hmm, controls, &observations)? {
            total += prob * additive_objective_realisation(hmm, controls, &observations)?;
        }
        enumeration::advance(&mut ys, n_obs);
    }
    Ok(total)
}

/// `p(y^T | u^{T-1})` as a product of one-step predictive likelihoods, or
/// `None` when the sequence has zero probability.
fn predictive_probability(hmm: &ControlledHmm, controls: &[usize], observations: &[Observation]) -> Result<Option<f64>> {
    let initial = hmm.initial();
    let mut prob = initial
        .probs()
        .iter()
        .enumerate()
        .try_fold(0.0, |acc, (i, p)| Ok::<_, Error>(acc + p * hmm.emissions().likelihood(i, observations[0])?))?;
    if prob <= 0.0 {
        return Ok(None);
    }
    let mut belief = hmm.measurement_update(initial, observations[0])?;
    for (t, &u) in controls.iter().enumerate() {
        let step = hmm.measurement_likelihood(&belief, u, observations[t + 1])?;
        if step <= 0.0 {
            return Ok(None);
        }
        prob *= step;
        belief = hmm.filter_update(&belief, u, observations[t + 1])?;
    }
    Ok(Some(prob))
}

/// Fixed-interval smoother output for one realisation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothedPosteriors {
    /// `p(x_t | y^T, u^{T-1})` for `t = 0..=T`.
    pub marginals: Vec<Belief>,
    /// `pairwise[t][i][j] = p(x_t = i, x_{t+1} = j | y^T, u^{T-1})` for `t < T`.
    pub pairwise: Vec<Vec<Vec<f64>>>,
}

impl SmoothedPosteriors {
    pub fn horizon(&self) -> usize {
        self.marginals.len() - 1
    }

    /// Joint entropy of the trajectory posterior by the backward chain rule
    /// `h(X_T | y^T) + sum_t h(X_t | X_{t+1}, y^T)`.
    pub fn trajectory_entropy(&self) -> f64 {
        let mut h = self.marginals.last().map_or(0.0, Belief::entropy);
        for (t, table) in self.pairwise.iter().enumerate() {
            let next = &self.marginals[t + 1];
            for row in table {
                for (j, &p) in row.iter().enumerate() {
                    if p > 0.0 {
                        h -= p * (p / next[j]).ln();
                    }
                }
            }
        }
        h
    }
}

/// Forward-backward (Rauch-Tung-Striebel form) smoother for a discrete HMM.
pub fn forward_backward_smoother(
    hmm: &ControlledHmm,
    controls: &[usize],
    observations: &[Observation],
) -> Result<SmoothedPosteriors> {
    let filtered = filter_beliefs(hmm, controls, observations)?;
    let n = hmm.n_states();
    let horizon = controls.len();

    let mut marginals = vec![filtered[horizon].clone(); horizon + 1];
    let mut pairwise = vec![Vec::new(); horizon];
    for t in (0..horizon).rev() {
        let u = controls[t];
        let predicted = hmm.predict_marginal(&filtered[t], u)?;
        let later = marginals[t + 1].clone();
        let mut table = vec![vec![0.0; n]; n];
        for (i, row) in table.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                if predicted[j] > 0.0 {
                    *cell = filtered[t][i] * hmm.transition(u, j, i) / predicted[j] * later[j];
                }
            }
        }
        marginals[t] = Belief::from_weights(table.iter().map(|row| row.iter().sum()).collect())?;
        pairwise[t] = table;
    }
    Ok(SmoothedPosteriors { marginals, pairwise })
}

/// Fraction of times in `t_range` where the smoothed MAP state differs
/// from the true state. Ties in the MAP go to the lowest state index.
pub fn map_error_rate(smoothed: &SmoothedPosteriors, true_states: &[usize], t_range: Range<usize>) -> Result<f64> {
    if true_states.len() != smoothed.marginals.len() {
        return Err(Error::Input(format!(
            "{} true states for {} smoothed marginals",
            true_states.len(),
            smoothed.marginals.len()
        )));
    }
    if t_range.end > true_states.len() {
        return Err(Error::Input(format!("time range {t_range:?} exceeds horizon {}", smoothed.horizon())));
    }
    if t_range.is_empty() {
        return Ok(0.0);
    }
    let len = t_range.len();
    let errors = t_range.filter(|&t| smoothed.marginals[t].argmax() != true_states[t]).count();
    Ok(errors as f64 / len as f64)
}

/// Entropy of a probability slice in nats.
pub fn entropy(probs: &[f64]) -> f64 {
    entropy_of(probs)
}
