//! Brute-force enumeration over state and observation sequences.
//!
//! Nothing here touches the filter: joint probabilities
//! `p(x^T, y^T | u^{T-1})` are multiplied out directly from the initial
//! belief, transition matrices and emission kernel. These routines serve as
//! oracles for the additive objective and the forward-backward smoother.

use crate::belief::{Belief, ControlledHmm, Observation};
use crate::error::{Error, Result};

/// Largest number of (state sequence, observation sequence) pairs the
/// enumerators will visit.
pub const ENUMERATION_LIMIT: u128 = 10_000_000;

pub(crate) fn sequence_count(radix: usize, len: usize, what: &str) -> Result<u128> {
    let count = (radix as u128).checked_pow(len as u32).unwrap_or(u128::MAX);
    if count > ENUMERATION_LIMIT {
        return Err(Error::SizeGuard { what: what.into(), count, limit: ENUMERATION_LIMIT });
    }
    Ok(count)
}

/// Odometer increment with the last digit fastest.
pub(crate) fn advance(digits: &mut [usize], radix: usize) {
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < radix {
            return;
        }
        *d = 0;
    }
}

/// `p(x^T, y^T | u^{T-1})` for every state sequence, in odometer order
/// (first state most significant).
pub fn joint_trajectory_probabilities(
    hmm: &ControlledHmm,
    controls: &[usize],
    observations: &[Observation],
) -> Result<Vec<f64>> {
    if observations.len() != controls.len() + 1 {
        return Err(Error::Input(format!(
            "expected {} observations for {} controls, got {}",
            controls.len() + 1,
            controls.len(),
            observations.len()
        )));
    }
    if let Some(&u) = controls.iter().find(|&&u| u >= hmm.n_controls()) {
        return Err(Error::Domain(format!("control index {u} out of range")));
    }
    let n = hmm.n_states();
    let count = sequence_count(n, observations.len(), "state sequences")? as usize;
    // Emission likelihoods per (t, state), looked up once.
    let emit = observations
        .iter()
        .map(|&y| (0..n).map(|i| hmm.emissions().likelihood(i, y)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;

    let mut out = Vec::with_capacity(count);
    let mut xs = vec![0usize; observations.len()];
    for _ in 0..count {
        let mut p = hmm.initial()[xs[0]] * emit[0][xs[0]];
        for t in 1..xs.len() {
            p *= hmm.transition(controls[t - 1], xs[t], xs[t - 1]) * emit[t][xs[t]];
        }
        out.push(p);
        advance(&mut xs, n);
    }
    Ok(out)
}

/// `h(X^T | y^T, u^{T-1})` for one realisation by normalising the joint
/// over all state sequences.
pub fn trajectory_entropy_enumeration(
    hmm: &ControlledHmm,
    controls: &[usize],
    observations: &[Observation],
) -> Result<f64> {
    let joint = joint_trajectory_probabilities(hmm, controls, observations)?;
    let evidence: f64 = joint.iter().sum();
    if !(evidence > 0.0) {
        return Err(Error::DegenerateMeasurement(evidence));
    }
    Ok(posterior_entropy(&joint, evidence))
}

fn posterior_entropy(joint: &[f64], evidence: f64) -> f64 {
    -joint.iter().filter(|&&p| p > 0.0).map(|&p| (p / evidence) * (p / evidence).ln()).sum::<f64>()
}

/// Smoothed marginals `p(x_t | y^T, u^{T-1})` by summing the normalised
/// joint over every other time index.
pub fn enumerate_smoothed_marginals(
    hmm: &ControlledHmm,
    controls: &[usize],
    observations: &[Observation],
) -> Result<Vec<Belief>> {
    let joint = joint_trajectory_probabilities(hmm, controls, observations)?;
    let n = hmm.n_states();
    let len = observations.len();
    let mut marginals = vec![vec![0.0; n]; len];
    let mut xs = vec![0usize; len];
    for p in &joint {
        for (t, &x) in xs.iter().enumerate() {
            marginals[t][x] += p;
        }
        advance(&mut xs, n);
    }
    marginals.into_iter().map(Belief::from_weights).collect()
}

/// Smoother entropy `h(X^T | Y^T, U^{T-1} = u^{T-1})` for an open-loop
/// control sequence, summing `p(y^T) h(X^T | y^T)` over every observation
/// sequence. Needs discrete emissions and at most [`ENUMERATION_LIMIT`]
/// (state, observation) sequence pairs.
pub fn exact_smoother_entropy_enumeration(hmm: &ControlledHmm, controls: &[usize]) -> Result<f64> {
    let n_obs = hmm
        .emissions()
        .n_symbols()
        .ok_or_else(|| Error::Domain("enumeration needs discrete emissions".into()))?;
    let len = controls.len() + 1;
    let pairs = (hmm.n_states() as u128 * n_obs as u128).checked_pow(len as u32).unwrap_or(u128::MAX);
    if pairs > ENUMERATION_LIMIT {
        return Err(Error::SizeGuard { what: "state/observation sequence pairs".into(), count: pairs, limit: ENUMERATION_LIMIT });
    }
    let count = sequence_count(n_obs, len, "observation sequences")?;
    let mut ys = vec![0usize; len];
    let mut total = 0.0;
    for _ in 0..count {
        let observations: Vec<Observation> = ys.iter().map(|&k| Observation::Symbol(k)).collect();
        let joint = joint_trajectory_probabilities(hmm, controls, &observations)?;
        let evidence: f64 = joint.iter().sum();
        if evidence > 0.0 {
            total += evidence * posterior_entropy(&joint, evidence);
        }
        advance(&mut ys, n_obs);
    }
    Ok(total)
}
