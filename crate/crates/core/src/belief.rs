//! Finite-state controlled hidden Markov models and the Bayesian filter.
//!
//! Transition matrices are column-stochastic: `A(u)[i][j]` is the probability
//! of moving to state `i` from state `j` under control `u`. All probability
//! arithmetic is done in linear space and renormalised after every update.
//! Entropies are in nats.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on probability vectors after construction or update.
pub const PROB_TOL: f64 = 1e-12;

/// Tolerance accepted on user-supplied probabilities before renormalising.
pub const INPUT_TOL: f64 = 1e-9;

/// Tolerance for the joint/marginal agreement check in
/// [`conditional_entropy_of_joint`].
pub const MARGINAL_TOL: f64 = 1e-10;

/// A probability vector over the hidden states.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Belief {
    probs: Vec<f64>,
}

impl Belief {
    /// Validates `probs` (finite, non-negative, summing to one within
    /// [`INPUT_TOL`]) and renormalises it exactly.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Domain("belief must have at least one state".into()));
        }
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::Domain(format!("belief entry {i} is {p}, expected a finite value >= 0")));
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > INPUT_TOL {
            return Err(Error::Domain(format!("belief entries sum to {sum}, expected 1")));
        }
        Ok(Self::normalised(probs, sum))
    }

    /// Normalises non-negative weights into a belief.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Domain("weights must be finite and non-negative".into()));
        }
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::DegenerateMeasurement(sum));
        }
        Ok(Self::normalised(weights, sum))
    }

    fn normalised(mut probs: Vec<f64>, sum: f64) -> Self {
        if sum != 1.0 {
            probs.iter_mut().for_each(|p| *p /= sum);
        }
        Self { probs }
    }

    /// Takes `probs` as is. Callers guarantee a valid distribution up to
    /// rounding (e.g. lattice points `k / m`).
    pub(crate) fn from_exact(probs: Vec<f64>) -> Self {
        debug_assert!((probs.iter().sum::<f64>() - 1.0).abs() <= PROB_TOL);
        Self { probs }
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform belief needs at least one state");
        Self { probs: vec![1.0 / n as f64; n] }
    }

    pub fn point_mass(n: usize, state: usize) -> Self {
        assert!(state < n, "state {state} out of range for {n} states");
        let mut probs = vec![0.0; n];
        probs[state] = 1.0;
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Index of the most probable state; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate().skip(1) {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    /// Entropy in nats, see [`discrete_entropy`].
    pub fn entropy(&self) -> f64 {
        discrete_entropy(self)
    }
}

impl std::ops::Index<usize> for Belief {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.probs[i]
    }
}

/// Joint table over `(x_t, x_{t-1})` produced by one prediction step.
/// Entry `(i, j)` is `A(u)[i][j] * belief[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    n: usize,
    data: Vec<f64>,
}

impl JointTable {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Domain("joint table must be square and non-empty".into()));
        }
        Ok(Self { n, data: rows.into_iter().flatten().collect() })
    }

    pub fn n_states(&self) -> usize {
        self.n
    }

    /// `P(x_t = next, x_{t-1} = prev)`.
    pub fn get(&self, next: usize, prev: usize) -> f64 {
        self.data[next * self.n + prev]
    }

    /// Marginal over `x_t` (sum over the previous state).
    pub fn next_marginal(&self) -> Vec<f64> {
        self.data.chunks(self.n).map(|row| row.iter().sum()).collect()
    }

    /// Marginal over `x_{t-1}` (sum over the next state).
    pub fn prev_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for row in self.data.chunks(self.n) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        out
    }

    pub fn total(&self) -> f64 {
        self.data.iter().sum()
    }
}

/// A measurement: a symbol for discrete emissions or a real value for
/// Gaussian emissions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Observation {
    Symbol(usize),
    Scalar(f64),
}

impl fmt::Display for Observation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observation::Symbol(k) => write!(f, "#{k}"),
            Observation::Scalar(y) => write!(f, "{y}"),
        }
    }
}

/// Measurement kernel `p(y | x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "params", rename_all = "snake_case")]
pub enum EmissionModel {
    /// `likelihood[state][symbol]`, each row a distribution over symbols.
    Discrete { likelihood: Vec<Vec<f64>> },
    /// `y ~ N(means[state], std_dev^2)`.
    ScalarGaussian { means: Vec<f64>, std_dev: f64 },
}

impl EmissionModel {
    fn validate(&self, n_states: usize) -> Result<()> {
        match self {
            EmissionModel::Discrete { likelihood } => {
                if likelihood.len() != n_states {
                    return Err(Error::InvalidModel(format!(
                        "emission table has {} rows, expected {n_states}",
                        likelihood.len()
                    )));
                }
                let n_obs = likelihood.first().map_or(0, Vec::len);
                if n_obs == 0 {
                    return Err(Error::InvalidModel("emission table has no symbols".into()));
                }
                for (i, row) in likelihood.iter().enumerate() {
                    if row.len() != n_obs {
                        return Err(Error::InvalidModel(format!(
                            "emission row {i} has {} entries, expected {n_obs}",
                            row.len()
                        )));
                    }
                    if let Some((k, p)) = row.iter().enumerate().find(|(_, p)| !p.is_finite() || **p < 0.0) {
                        return Err(Error::InvalidModel(format!("emission entry [{i}][{k}] is {p}")));
                    }
                    let sum: f64 = row.iter().sum();
                    if (sum - 1.0).abs() > PROB_TOL {
                        return Err(Error::InvalidModel(format!("emission row {i} sums to {sum}, expected 1")));
                    }
                }
            }
            EmissionModel::ScalarGaussian { means, std_dev } => {
                if means.len() != n_states {
                    return Err(Error::InvalidModel(format!(
                        "emission model has {} means, expected {n_states}",
                        means.len()
                    )));
                }
                if let Some((i, m)) = means.iter().enumerate().find(|(_, m)| !m.is_finite()) {
                    return Err(Error::InvalidModel(format!("emission mean {i} is {m}")));
                }
                if !(std_dev.is_finite() && *std_dev > 0.0) {
                    return Err(Error::InvalidModel(format!("emission std_dev is {std_dev}, expected > 0")));
                }
            }
        }
        Ok(())
    }

    /// Number of symbols for discrete emissions, `None` for continuous ones.
    pub fn n_symbols(&self) -> Option<usize> {
        match self {
            EmissionModel::Discrete { likelihood } => likelihood.first().map(Vec::len),
            EmissionModel::ScalarGaussian { .. } => None,
        }
    }

    /// `p(y | x = state)`: a mass for discrete emissions, a density for
    /// Gaussian ones.
    pub fn likelihood(&self, state: usize, y: Observation) -> Result<f64> {
        match (self, y) {
            (EmissionModel::Discrete { likelihood }, Observation::Symbol(k)) => {
                let row = &likelihood[state];
                row.get(k)
                    .copied()
                    .ok_or_else(|| Error::Domain(format!("symbol {k} out of range (have {})", row.len())))
            }
            (EmissionModel::ScalarGaussian { means, std_dev }, Observation::Scalar(v)) => {
                Ok(gaussian_pdf(v, means[state], *std_dev))
            }
            (EmissionModel::Discrete { .. }, Observation::Scalar(_)) => {
                Err(Error::Domain("discrete emission model needs a symbol observation".into()))
            }
            (EmissionModel::ScalarGaussian { .. }, Observation::Symbol(_)) => {
                Err(Error::Domain("gaussian emission model needs a scalar observation".into()))
            }
        }
    }
}

pub(crate) fn gaussian_pdf(x: f64, mean: f64, std_dev: f64) -> f64 {
    let z = (x - mean) / std_dev;
    (-0.5 * z * z).exp() / (std_dev * (2.0 * PI).sqrt())
}

/// A finite-state controlled HMM with control-independent emissions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HmmDocument", into = "HmmDocument")]
pub struct ControlledHmm {
    n_states: usize,
    n_controls: usize,
    /// One row-major `n x n` matrix per control.
    transitions: Vec<Vec<f64>>,
    emissions: EmissionModel,
    initial: Belief,
}

/// On-disk JSON layout of a [`ControlledHmm`].
#[derive(Debug, Clone, Serialize, Deserialize)]
struct HmmDocument {
    n_states: usize,
    n_controls: usize,
    transitions: Vec<Vec<Vec<f64>>>,
    emissions: EmissionModel,
    initial: Vec<f64>,
}

impl TryFrom<HmmDocument> for ControlledHmm {
    type Error = Error;

    fn try_from(doc: HmmDocument) -> Result<Self> {
        if doc.transitions.len() != doc.n_controls {
            return Err(Error::InvalidModel(format!(
                "found {} transition matrices, expected n_controls = {}",
                doc.transitions.len(),
                doc.n_controls
            )));
        }
        let initial = Belief::new(doc.initial).map_err(|e| Error::InvalidModel(format!("initial belief: {e}")))?;
        ControlledHmm::new(doc.transitions, doc.emissions, initial)
    }
}

impl From<ControlledHmm> for HmmDocument {
    fn from(hmm: ControlledHmm) -> Self {
        let n = hmm.n_states;
        HmmDocument {
            n_states: n,
            n_controls: hmm.n_controls,
            transitions: hmm
                .transitions
                .iter()
                .map(|a| a.chunks(n).map(<[f64]>::to_vec).collect())
                .collect(),
            emissions: hmm.emissions,
            initial: hmm.initial.probs,
        }
    }
}

impl ControlledHmm {
    /// Builds and validates a model. `transitions[u][i][j]` is
    /// `P(X_{t+1} = i | X_t = j, U_t = u)`; every column must sum to one.
    pub fn new(transitions: Vec<Vec<Vec<f64>>>, emissions: EmissionModel, initial: Belief) -> Result<Self> {
        let n = initial.len();
        if transitions.is_empty() {
            return Err(Error::InvalidModel("at least one control is required".into()));
        }
        let mut flat = Vec::with_capacity(transitions.len());
        for (u, a) in transitions.iter().enumerate() {
            if a.len() != n || a.iter().any(|row| row.len() != n) {
                return Err(Error::InvalidModel(format!("transition matrix for control {u} is not {n}x{n}")));
            }
            for (i, row) in a.iter().enumerate() {
                for (j, &p) in row.iter().enumerate() {
                    if !p.is_finite() || p < 0.0 {
                        return Err(Error::InvalidModel(format!(
                            "transition matrix for control {u}: entry [{i}][{j}] is {p}"
                        )));
                    }
                }
            }
            for j in 0..n {
                let sum: f64 = a.iter().map(|row| row[j]).sum();
                if (sum - 1.0).abs() > PROB_TOL {
                    return Err(Error::InvalidModel(format!(
                        "transition matrix for control {u}: column {j} sums to {sum}, expected 1"
                    )));
                }
            }
            flat.push(a.iter().flatten().copied().collect());
        }
        emissions.validate(n)?;
        Ok(Self { n_states: n, n_controls: flat.len(), transitions: flat, emissions, initial })
    }

    /// Skips validation. Only for negative-control tests that need a
    /// deliberately broken model.
    #[doc(hidden)]
    pub fn new_unchecked(transitions: Vec<Vec<Vec<f64>>>, emissions: EmissionModel, initial: Belief) -> Self {
        Self {
            n_states: initial.len(),
            n_controls: transitions.len(),
            transitions: transitions.into_iter().map(|a| a.into_iter().flatten().collect()).collect(),
            emissions,
            initial,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_controls(&self) -> usize {
        self.n_controls
    }

    pub fn emissions(&self) -> &EmissionModel {
        &self.emissions
    }

    pub fn initial(&self) -> &Belief {
        &self.initial
    }

    /// `P(X_{t+1} = next | X_t = prev, U_t = u)`.
    pub fn transition(&self, u: usize, next: usize, prev: usize) -> f64 {
        self.transitions[u][next * self.n_states + prev]
    }

    /// Column `prev` of `A(u)`, the next-state distribution from `prev`.
    pub fn transition_column(&self, u: usize, prev: usize) -> Vec<f64> {
        (0..self.n_states).map(|i| self.transition(u, i, prev)).collect()
    }

    /// Returns a copy with the initial belief replaced.
    pub fn with_initial(&self, initial: Belief) -> Result<Self> {
        self.check_belief(&initial)?;
        Ok(Self { initial, ..self.clone() })
    }

    fn check_control(&self, u: usize) -> Result<()> {
        if u >= self.n_controls {
            return Err(Error::Domain(format!("control index {u} out of range (n_controls = {})", self.n_controls)));
        }
        Ok(())
    }

    fn check_belief(&self, belief: &Belief) -> Result<()> {
        if belief.len() != self.n_states {
            return Err(Error::Domain(format!(
                "belief has {} entries, model has {} states",
                belief.len(),
                self.n_states
            )));
        }
        Ok(())
    }

    /// Joint prediction table: entry `(i, j) = A(u)[i][j] * belief[j]`.
    pub fn predict_joint(&self, belief: &Belief, u: usize) -> Result<JointTable> {
        self.check_control(u)?;
        self.check_belief(belief)?;
        let n = self.n_states;
        let a = &self.transitions[u];
        let data = (0..n * n).map(|k| a[k] * belief[k % n]).collect();
        Ok(JointTable { n, data })
    }

    /// Predicted belief `A(u) * belief`.
    pub fn predict_marginal(&self, belief: &Belief, u: usize) -> Result<Belief> {
        self.check_control(u)?;
        self.check_belief(belief)?;
        let n = self.n_states;
        let a = &self.transitions[u];
        let probs = a.chunks(n).map(|row| row.iter().zip(belief.probs()).map(|(x, p)| x * p).sum()).collect();
        Belief::from_weights(probs)
    }

    /// Bayes correction of `prior` with measurement `y`, no prediction.
    pub fn measurement_update(&self, prior: &Belief, y: Observation) -> Result<Belief> {
        self.check_belief(prior)?;
        let weights = prior
            .probs()
            .iter()
            .enumerate()
            .map(|(i, p)| Ok(self.emissions.likelihood(i, y)? * p))
            .collect::<Result<Vec<_>>>()?;
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::DegenerateMeasurement(sum));
        }
        Belief::from_weights(weights)
    }

    /// One step of the Bayesian filter: predict under `u`, then correct with `y`.
    pub fn filter_update(&self, belief: &Belief, u: usize, y: Observation) -> Result<Belief> {
        let predicted = self.predict_marginal(belief, u)?;
        self.measurement_update(&predicted, y)
    }

    /// Predictive likelihood `p(y | belief, u)`: the emission kernel
    /// integrated against the predicted belief.
    pub fn measurement_likelihood(&self, belief: &Belief, u: usize, y: Observation) -> Result<f64> {
        let predicted = self.predict_marginal(belief, u)?;
        predicted
            .probs()
            .iter()
            .enumerate()
            .try_fold(0.0, |acc, (i, p)| Ok(acc + p * self.emissions.likelihood(i, y)?))
    }
}

/// Shannon entropy in nats with `0 ln 0 = 0`.
pub fn discrete_entropy(belief: &Belief) -> f64 {
    entropy_of(belief.probs())
}

pub(crate) fn entropy_of(probs: &[f64]) -> f64 {
    -probs.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>()
}

/// `h(X_t | X_{t-1})` under the joint table `joint`, whose previous-state
/// marginal must equal `prev`.
pub fn conditional_entropy_of_joint(joint: &JointTable, prev: &Belief) -> Result<f64> {
    if prev.len() != joint.n {
        return Err(Error::Consistency(format!(
            "joint table is {0}x{0} but previous belief has {1} states",
            joint.n,
            prev.len()
        )));
    }
    for (j, (m, p)) in joint.prev_marginal().iter().zip(prev.probs()).enumerate() {
        if (m - p).abs() > MARGINAL_TOL {
            return Err(Error::Consistency(format!(
                "joint marginal over state {j} is {m}, previous belief has {p}"
            )));
        }
    }
    let n = joint.n;
    let mut h = 0.0;
    for i in 0..n {
        for j in 0..n {
            let pij = joint.get(i, j);
            if pij > 0.0 {
                h -= pij * (pij / prev[j]).ln();
            }
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn two_state(a: [[f64; 2]; 2], likelihood: Vec<Vec<f64>>) -> ControlledHmm {
        ControlledHmm::new(
            vec![a.iter().map(|r| r.to_vec()).collect()],
            EmissionModel::Discrete { likelihood },
            Belief::uniform(2),
        )
        .unwrap()
    }

    fn cloud_matrix_3() -> Vec<Vec<f64>> {
        vec![vec![0.9, 0.05, 0.05], vec![0.05, 0.9, 0.05], vec![0.05, 0.05, 0.9]]
    }

    #[test]
    fn predict_joint_identity_and_uniform() {
        let belief = Belief::new(vec![0.3, 0.7]).unwrap();
        let id = two_state([[1.0, 0.0], [0.0, 1.0]], vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let joint = id.predict_joint(&belief, 0).unwrap();
        assert_eq!(
            (joint.get(0, 0), joint.get(0, 1), joint.get(1, 0), joint.get(1, 1)),
            (0.3, 0.0, 0.0, 0.7)
        );

        let mix = two_state([[0.5, 0.5], [0.5, 0.5]], vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let joint = mix.predict_joint(&belief, 0).unwrap();
        let expect = [[0.15, 0.35], [0.15, 0.35]];
        for i in 0..2 {
            for j in 0..2 {
                assert!(close(joint.get(i, j), expect[i][j], 1e-15));
            }
        }
        assert!(close(joint.total(), 1.0, PROB_TOL));
        assert_eq!(mix.predict_marginal(&belief, 0).unwrap().probs(), &[0.5, 0.5]);
        assert_eq!(id.predict_marginal(&belief, 0).unwrap().probs(), &[0.3, 0.7]);
    }

    #[test]
    fn predict_rejects_bad_control() {
        let hmm = two_state([[1.0, 0.0], [0.0, 1.0]], vec![vec![1.0], vec![1.0]]);
        assert!(matches!(hmm.predict_joint(&Belief::uniform(2), 1), Err(Error::Domain(_))));
        assert!(matches!(hmm.predict_marginal(&Belief::uniform(2), 5), Err(Error::Domain(_))));
    }

    #[test]
    fn predict_marginal_first_column_of_a3() {
        let hmm = ControlledHmm::new(
            vec![cloud_matrix_3()],
            EmissionModel::ScalarGaussian { means: vec![1.0, 3.0, 5.0], std_dev: 1.0 },
            Belief::uniform(3),
        )
        .unwrap();
        let p = hmm.predict_marginal(&Belief::point_mass(3, 0), 0).unwrap();
        assert_eq!(p.probs(), &[0.9, 0.05, 0.05]);
    }

    #[test]
    fn filter_uninformative_equals_prediction() {
        let hmm = two_state([[0.8, 0.1], [0.2, 0.9]], vec![vec![0.25, 0.75], vec![0.25, 0.75]]);
        let b = Belief::new(vec![0.4, 0.6]).unwrap();
        let post = hmm.filter_update(&b, 0, Observation::Symbol(1)).unwrap();
        let pred = hmm.predict_marginal(&b, 0).unwrap();
        for (a, c) in post.probs().iter().zip(pred.probs()) {
            assert!(close(*a, *c, 1e-15));
        }
    }

    #[test]
    fn filter_perfect_measurement() {
        let hmm = two_state([[0.8, 0.1], [0.2, 0.9]], vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let post = hmm.filter_update(&Belief::uniform(2), 0, Observation::Symbol(1)).unwrap();
        assert_eq!(post.probs(), &[0.0, 1.0]);
    }

    #[test]
    fn filter_two_state_bayes() {
        // Likelihood column at the observed symbol is [0.9, 0.2].
        let hmm = two_state([[0.8, 0.1], [0.2, 0.9]], vec![vec![0.9, 0.1], vec![0.2, 0.8]]);
        let post = hmm.filter_update(&Belief::uniform(2), 0, Observation::Symbol(0)).unwrap();
        // predicted = [0.45, 0.55]; unnormalised = [0.405, 0.11]
        let z = 0.405 + 0.11;
        assert!(close(post[0], 0.405 / z, 1e-15));
        assert!(close(post[1], 0.11 / z, 1e-15));
    }

    #[test]
    fn filter_zero_normaliser_is_error() {
        let hmm = two_state([[1.0, 0.0], [0.0, 1.0]], vec![vec![1.0, 0.0], vec![1.0, 0.0]]);
        let err = hmm.filter_update(&Belief::uniform(2), 0, Observation::Symbol(1)).unwrap_err();
        assert!(matches!(err, Error::DegenerateMeasurement(_)));
    }

    #[test]
    fn observation_kind_mismatch() {
        let hmm = two_state([[1.0, 0.0], [0.0, 1.0]], vec![vec![1.0], vec![1.0]]);
        assert!(hmm.filter_update(&Belief::uniform(2), 0, Observation::Scalar(0.3)).is_err());
        assert!(hmm.filter_update(&Belief::uniform(2), 0, Observation::Symbol(4)).is_err());
    }

    #[test]
    fn measurement_likelihood_cases() {
        let hmm = ControlledHmm::new(
            vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]],
            EmissionModel::Discrete { likelihood: vec![vec![0.25; 4], vec![0.25; 4]] },
            Belief::uniform(2),
        )
        .unwrap();
        for k in 0..4 {
            let l = hmm.measurement_likelihood(&Belief::new(vec![0.1, 0.9]).unwrap(), 0, Observation::Symbol(k));
            assert!(close(l.unwrap(), 0.25, 1e-15));
        }

        let g = ControlledHmm::new(
            vec![cloud_matrix_3()],
            EmissionModel::ScalarGaussian { means: vec![1.0, 3.0, 5.0], std_dev: 1.0 },
            Belief::uniform(3),
        )
        .unwrap();
        let id3 = ControlledHmm::new(
            vec![vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]],
            g.emissions().clone(),
            Belief::uniform(3),
        )
        .unwrap();
        let l = id3.measurement_likelihood(&Belief::point_mass(3, 1), 0, Observation::Scalar(2.5)).unwrap();
        assert!(close(l, (-0.125f64).exp() / (2.0 * PI).sqrt(), 1e-15));

        // A(3) keeps the uniform belief uniform, so the predictive density is
        // the equal-weight mixture of N(1,1), N(3,1), N(5,1) at y = 3.
        let l = g.measurement_likelihood(&Belief::uniform(3), 0, Observation::Scalar(3.0)).unwrap();
        let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
        let expect = (phi(2.0) + phi(0.0) + phi(-2.0)) / 3.0;
        assert!(close(l, expect, 1e-15));
        assert!(close(l, 0.168_974_737_809_269_6, 1e-12));
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(discrete_entropy(&Belief::point_mass(3, 2)), 0.0);
        assert!(close(discrete_entropy(&Belief::uniform(3)), 3f64.ln(), 1e-15));
        assert!(close(discrete_entropy(&Belief::new(vec![0.5, 0.5, 0.0]).unwrap()), 2f64.ln(), 1e-15));
    }

    #[test]
    fn conditional_entropy_examples() {
        let id = two_state([[1.0, 0.0], [0.0, 1.0]], vec![vec![1.0], vec![1.0]]);
        let b = Belief::new(vec![0.3, 0.7]).unwrap();
        let j = id.predict_joint(&b, 0).unwrap();
        assert_eq!(conditional_entropy_of_joint(&j, &b).unwrap(), 0.0);

        let mix = two_state([[0.5, 0.5], [0.5, 0.5]], vec![vec![1.0], vec![1.0]]);
        let j = mix.predict_joint(&b, 0).unwrap();
        assert!(close(conditional_entropy_of_joint(&j, &b).unwrap(), 2f64.ln(), 1e-15));

        let a3 = ControlledHmm::new(
            vec![cloud_matrix_3()],
            EmissionModel::Discrete { likelihood: vec![vec![1.0]; 3] },
            Belief::uniform(3),
        )
        .unwrap();
        let prev = Belief::point_mass(3, 0);
        let j = a3.predict_joint(&prev, 0).unwrap();
        let direct = -(0.9f64 * 0.9f64.ln() + 2.0 * 0.05 * 0.05f64.ln());
        let h = conditional_entropy_of_joint(&j, &prev).unwrap();
        assert!(close(h, direct, 1e-15));
        assert!(close(h, 0.394_397_691_447_442_7, 1e-14));
    }

    #[test]
    fn conditional_entropy_marginal_mismatch() {
        let mix = two_state([[0.5, 0.5], [0.5, 0.5]], vec![vec![1.0], vec![1.0]]);
        let j = mix.predict_joint(&Belief::new(vec![0.3, 0.7]).unwrap(), 0).unwrap();
        let err = conditional_entropy_of_joint(&j, &Belief::uniform(2)).unwrap_err();
        assert!(matches!(err, Error::Consistency(_)));
    }

    #[test]
    fn json_validation_reports_indices() {
        let text = r#"{"n_states":2,"n_controls":1,
            "transitions":[[[0.9,0.1],[0.2,0.9]]],
            "emissions":{"type":"discrete","params":{"likelihood":[[1.0],[1.0]]}},
            "initial":[0.5,0.5]}"#;
        let err = ControlledHmm::from_json(text).unwrap_err().to_string();
        assert!(err.contains("control 0: column 0"), "{err}");

        let text = r#"{"n_states":2,"n_controls":1,
            "transitions":[[[0.9,0.1],[0.1,0.9]]],
            "emissions":{"type":"scalar_gaussian","params":{"means":[0.0,1.0],"std_dev":0.0}},
            "initial":[0.5,0.5]}"#;
        let err = ControlledHmm::from_json(text).unwrap_err().to_string();
        assert!(err.contains("std_dev"), "{err}");
    }

    #[test]
    fn json_round_trip() {
        let hmm = two_state([[0.8, 0.1], [0.2, 0.9]], vec![vec![0.9, 0.1], vec![0.2, 0.8]]);
        let back = ControlledHmm::from_json(&hmm.to_json().unwrap()).unwrap();
        assert_eq!(hmm, back);
    }

    #[test]
    fn belief_validation() {
        assert!(Belief::new(vec![0.5, 0.6]).is_err());
        assert!(Belief::new(vec![-0.1, 1.1]).is_err());
        assert!(Belief::new(vec![]).is_err());
        assert_eq!(Belief::new(vec![0.25, 0.25, 0.5]).unwrap().argmax(), 2);
        assert_eq!(Belief::uniform(3).argmax(), 0);
    }
}
