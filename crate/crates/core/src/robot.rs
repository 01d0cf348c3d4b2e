//! Covert navigation: a unicycle robot localising against known landmarks
//! while trying to keep its trajectory hard to reconstruct.
//!
//! The motion model displaces `x` by `v dt sin(theta)` and `y` by
//! `v dt cos(theta)`, and each landmark returns a range and the bearing
//! `atan2(dy, dx) - theta`. Both are implemented exactly in that form.
//!
//! Continuous beliefs make exact dynamic programming intractable, so the
//! turn rate is chosen by receding-horizon Monte Carlo: every candidate rate
//! is held for a short rollout, an EKF runs alongside a simulated true
//! state, and the stage reward is assembled from Gaussian entropies of the
//! EKF covariances minus a goal-distance cost.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix2x3, Matrix3, SMatrix, SymmetricEigen, Vector2, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{derive_seed, stream_rng};

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w >= PI {
        w - 2.0 * PI
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub x: f64,
    pub y: f64,
    /// Radians in `[-pi, pi)`.
    pub heading: f64,
}

impl RobotState {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self { x, y, heading: wrap_angle(heading) }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.heading)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn distance_to(&self, p: &Vector2<f64>) -> f64 {
        ((p[0] - self.x).powi(2) + (p[1] - self.y).powi(2)).sqrt()
    }
}

/// Linear speed (m/s) and turn rate (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotControl {
    pub speed: f64,
    pub turn_rate: f64,
}

/// Noise-free-plus-`noise` unicycle transition over one step of length `dt`.
pub fn unicycle_step(state: &RobotState, u: RobotControl, dt: f64, noise: &Vector3<f64>) -> RobotState {
    RobotState::new(
        state.x + u.speed * dt * state.heading.sin() + noise[0],
        state.y + u.speed * dt * state.heading.cos() + noise[1],
        state.heading + dt * u.turn_rate + noise[2],
    )
}

/// Jacobian of [`unicycle_step`] with respect to the state.
pub fn motion_jacobian(state: &RobotState, u: RobotControl, dt: f64) -> Matrix3<f64> {
    let (s, c) = state.heading.sin_cos();
    Matrix3::new(
        1.0, 0.0, u.speed * dt * c, //
        0.0, 1.0, -u.speed * dt * s, //
        0.0, 0.0, 1.0,
    )
}

/// Range and bearing from `state` to `landmark`, plus `noise`. The bearing
/// is wrapped into `[-pi, pi)`.
pub fn range_bearing(state: &RobotState, landmark: &Vector2<f64>, noise: &Vector2<f64>) -> Result<Vector2<f64>> {
    let (dx, dy) = (landmark[0] - state.x, landmark[1] - state.y);
    let range = (dx * dx + dy * dy).sqrt();
    if !(range > 0.0) {
        return Err(Error::Domain(format!(
            "degenerate geometry: robot at ({}, {}) coincides with a landmark",
            state.x, state.y
        )));
    }
    Ok(Vector2::new(range + noise[0], wrap_angle(dy.atan2(dx) - state.heading + noise[1])))
}

/// Jacobian of the noise-free [`range_bearing`] with respect to the state.
pub fn measurement_jacobian(state: &RobotState, landmark: &Vector2<f64>) -> Result<Matrix2x3<f64>> {
    let (dx, dy) = (landmark[0] - state.x, landmark[1] - state.y);
    let q = dx * dx + dy * dy;
    if !(q > 0.0) {
        return Err(Error::Domain("degenerate geometry: zero range to landmark".into()));
    }
    let r = q.sqrt();
    Ok(Matrix2x3::new(
        -dx / r, -dy / r, 0.0, //
        dy / q, -dx / q, -1.0,
    ))
}

/// Differential entropy `0.5 ln((2 pi e)^k det cov)` of a Gaussian, in nats.
pub fn gaussian_entropy<const K: usize>(cov: &SMatrix<f64, K, K>) -> Result<f64> {
    let scale = cov.amax().max(1.0);
    if (cov - cov.transpose()).amax() > 1e-10 * scale {
        return Err(Error::Domain("covariance is not symmetric".into()));
    }
    let chol = cov
        .cholesky()
        .ok_or_else(|| Error::Domain("covariance is not positive definite".into()))?;
    let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    if !log_det.is_finite() {
        return Err(Error::Domain("covariance is singular".into()));
    }
    Ok(0.5 * (K as f64 * (2.0 * PI * std::f64::consts::E).ln() + log_det))
}

macro_rules! psd_sqrt {
    ($name:ident, $m:ty) => {
        /// Symmetric square root of a PSD matrix, clamping tiny negative
        /// eigenvalues to zero.
        fn $name(m: &$m) -> $m {
            let eig = SymmetricEigen::new(0.5 * (m + m.transpose()));
            let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
            eig.eigenvectors * <$m>::from_diagonal(&roots) * eig.eigenvectors.transpose()
        }
    };
}
psd_sqrt!(psd_sqrt2, Matrix2<f64>);
psd_sqrt!(psd_sqrt3, Matrix3<f64>);

fn standard_normal<const K: usize>(rng: &mut ChaCha8Rng) -> SMatrix<f64, K, 1> {
    SMatrix::<f64, K, 1>::from_fn(|_, _| rng.sample(StandardNormal))
}

/// EKF pose estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBelief {
    pub mean: RobotState,
    pub cov: Matrix3<f64>,
}

impl GaussianBelief {
    /// Draws a pose from the belief.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> RobotState {
        let z = standard_normal::<3>(rng);
        RobotState::from_vector(&(self.mean.to_vector() + psd_sqrt3(&self.cov) * z))
    }
}

fn symmetrise(m: &Matrix3<f64>) -> Matrix3<f64> {
    0.5 * (m + m.transpose())
}

/// Scenario parameters. Covariances are stored row-major in the JSON form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobotScenario {
    pub landmarks: Vec<[f64; 2]>,
    pub process_noise_cov: [[f64; 3]; 3],
    pub meas_noise_cov: [[f64; 2]; 2],
    pub dt: f64,
    pub goal: [f64; 3],
    pub gamma: f64,
    pub rollout_count: usize,
    pub rollout_horizon: usize,
    pub speed: f64,
    pub turn_candidates: usize,
    pub initial_pose: [f64; 3],
    pub initial_cov: [[f64; 3]; 3],
    pub step_budget: usize,
    /// Episode ends once the estimated position is this close to the goal.
    pub goal_tolerance: f64,
}

impl Default for RobotScenario {
    fn default() -> Self {
        let deg = PI / 180.0;
        Self {
            landmarks: vec![[-20.0, 10.0], [-60.0, 25.0], [-105.0, 30.0], [-45.0, 85.0], [-135.0, 95.0]],
            process_noise_cov: [[0.1 * 0.1, 0.0, 0.0], [0.0, 0.1 * 0.1, 0.0], [0.0, 0.0, deg * deg]],
            meas_noise_cov: [[50.0 * 50.0, 0.0], [0.0, (PI / 18.0).powi(2)]],
            dt: 1.0,
            goal: [-150.0, 50.0, 0.0],
            gamma: 100.0,
            rollout_count: 10,
            rollout_horizon: 10,
            speed: 1.0,
            turn_candidates: 16,
            initial_pose: [0.0, 0.0, PI / 2.0],
            initial_cov: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, (PI / 18.0).powi(2)]],
            step_budget: 200,
            goal_tolerance: 5.0,
        }
    }
}

fn mat3(a: &[[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| a[i][j])
}

impl RobotScenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let spd3 = |name: &str, m: Matrix3<f64>| -> Result<()> {
            if (m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) {
                return Err(Error::Config(format!("{name} is not symmetric")));
            }
            if m.cholesky().is_none() {
                return Err(Error::Config(format!("{name} is not positive definite")));
            }
            Ok(())
        };
        spd3("process_noise_cov", self.process_noise())?;
        spd3("initial_cov", self.initial_covariance())?;
        let r = self.meas_noise();
        if (r - r.transpose()).amax() > 1e-12 * r.amax().max(1.0) || r.cholesky().is_none() {
            return Err(Error::Config("meas_noise_cov must be symmetric positive definite".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be finite and >= 0, got {}", self.gamma)));
        }
        if self.landmarks.is_empty() {
            return Err(Error::Config("at least one landmark is required".into()));
        }
        if self.turn_candidates == 0 || self.rollout_count == 0 || self.rollout_horizon == 0 {
            return Err(Error::Config("turn_candidates, rollout_count and rollout_horizon must be positive".into()));
        }
        Ok(())
    }

    pub fn process_noise(&self) -> Matrix3<f64> {
        mat3(&self.process_noise_cov)
    }

    pub fn meas_noise(&self) -> Matrix2<f64> {
        Matrix2::from_fn(|i, j| self.meas_noise_cov[i][j])
    }

    pub fn initial_covariance(&self) -> Matrix3<f64> {
        mat3(&self.initial_cov)
    }

    pub fn landmark(&self, j: usize) -> Vector2<f64> {
        Vector2::new(self.landmarks[j][0], self.landmarks[j][1])
    }

    pub fn landmark_points(&self) -> Vec<Vector2<f64>> {
        (0..self.landmarks.len()).map(|j| self.landmark(j)).collect()
    }

    pub fn prior(&self) -> GaussianBelief {
        let [x, y, h] = self.initial_pose;
        GaussianBelief { mean: RobotState::new(x, y, h), cov: self.initial_covariance() }
    }

    /// Candidate turn rates: `turn_candidates` values evenly spaced on `[-pi, pi)`.
    pub fn candidate_turn_rates(&self) -> Vec<f64> {
        let n = self.turn_candidates as f64;
        (0..self.turn_candidates).map(|k| -PI + 2.0 * PI * k as f64 / n).collect()
    }

    /// Squared distance between an estimated pose and the goal pose, with
    /// the heading difference wrapped.
    pub fn goal_cost(&self, pose: &RobotState) -> f64 {
        let [gx, gy, gh] = self.goal;
        (pose.x - gx).powi(2) + (pose.y - gy).powi(2) + wrap_angle(pose.heading - gh).powi(2)
    }

    pub fn goal_distance(&self, pose: &RobotState) -> f64 {
        ((pose.x - self.goal[0]).powi(2) + (pose.y - self.goal[1]).powi(2)).sqrt()
    }

    fn control(&self, turn_rate: f64) -> RobotControl {
        RobotControl { speed: self.speed, turn_rate }
    }
}

/// EKF time update through the noise-free motion model.
pub fn ekf_predict(belief: &GaussianBelief, u: RobotControl, scenario: &RobotScenario) -> GaussianBelief {
    let f = motion_jacobian(&belief.mean, u, scenario.dt);
    GaussianBelief {
        mean: unicycle_step(&belief.mean, u, scenario.dt, &Vector3::zeros()),
        cov: symmetrise(&(f * belief.cov * f.transpose() + scenario.process_noise())),
    }
}

/// EKF measurement update, one landmark at a time, with bearing innovations
/// wrapped into `[-pi, pi)`. The covariance uses the Joseph form.
pub fn ekf_update(belief: &GaussianBelief, measurements: &[Vector2<f64>], scenario: &RobotScenario) -> Result<GaussianBelief> {
    if measurements.len() != scenario.landmarks.len() {
        return Err(Error::Input(format!(
            "{} measurements for {} landmarks",
            measurements.len(),
            scenario.landmarks.len()
        )));
    }
    let r = scenario.meas_noise();
    let mut mean = belief.mean.to_vector();
    let mut cov = belief.cov;
    for (j, z) in measurements.iter().enumerate() {
        let lm = scenario.landmark(j);
        let state = RobotState::from_vector(&mean);
        let h = measurement_jacobian(&state, &lm)?;
        let predicted = range_bearing(&state, &lm, &Vector2::zeros())?;
        let s = h * cov * h.transpose() + r;
        let s_inv = s
            .try_inverse()
            .filter(|m| m.iter().all(|v| v.is_finite()))
            .ok_or_else(|| Error::Numerical(format!("innovation covariance for landmark {j} is singular")))?;
        let gain = cov * h.transpose() * s_inv;
        let innovation = Vector2::new(z[0] - predicted[0], wrap_angle(z[1] - predicted[1]));
        mean += gain * innovation;
        mean[2] = wrap_angle(mean[2]);
        let i_kh = Matrix3::identity() - gain * h;
        cov = symmetrise(&(i_kh * cov * i_kh.transpose() + gain * r * gain.transpose()));
    }
    Ok(GaussianBelief { mean: RobotState::from_vector(&mean), cov })
}

/// Entropy terms of one EKF step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepEntropy {
    pub h_post: f64,
    pub h_pred: f64,
    /// Entropy of the process noise, `h(X_t | X_{t-1})` for additive noise.
    pub h_process: f64,
}

impl StepEntropy {
    pub fn r_tilde(&self) -> f64 {
        self.h_post - self.h_pred + self.h_process
    }
}

/// Rollout score of one candidate turn rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateScore {
    pub turn_rate: f64,
    pub score: f64,
}

/// Standard-normal draws consumed by one rollout, in draw order: the
/// initial pose, then per step the process noise followed by one
/// measurement-noise pair per landmark.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct RolloutNoise {
    pub initial: Vector3<f64>,
    pub process: Vec<Vector3<f64>>,
    pub meas: Vec<Vec<Vector2<f64>>>,
}

impl RolloutNoise {
    pub(crate) fn draw(rng: &mut ChaCha8Rng, horizon: usize, n_landmarks: usize) -> Self {
        let initial = standard_normal::<3>(rng);
        let mut process = Vec::with_capacity(horizon);
        let mut meas = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            process.push(standard_normal::<3>(rng));
            meas.push((0..n_landmarks).map(|_| standard_normal::<2>(rng)).collect());
        }
        Self { initial, process, meas }
    }
}

/// Sum over one rollout of the stage reward minus the goal cost, holding
/// the turn rate fixed.
pub(crate) fn rollout_score(
    belief: &GaussianBelief,
    scenario: &RobotScenario,
    turn: f64,
    noise: &RolloutNoise,
    h_process: f64,
) -> Result<f64> {
    let u = scenario.control(turn);
    let q_sqrt = psd_sqrt3(&scenario.process_noise());
    let r_sqrt = psd_sqrt2(&scenario.meas_noise());
    let landmarks = scenario.landmark_points();
    let mut truth = RobotState::from_vector(&(belief.mean.to_vector() + psd_sqrt3(&belief.cov) * noise.initial));
    let mut est = *belief;
    let mut total = 0.0;
    for (w, v) in noise.process.iter().zip(&noise.meas) {
        truth = unicycle_step(&truth, u, scenario.dt, &(q_sqrt * w));
        let meas = landmarks
            .iter()
            .zip(v)
            .map(|(lm, z)| range_bearing(&truth, lm, &(r_sqrt * z)))
            .collect::<Result<Vec<_>>>()?;
        let pred = ekf_predict(&est, u, scenario);
        est = ekf_update(&pred, &meas, scenario)?;
        total += gaussian_entropy(&est.cov)? - gaussian_entropy(&pred.cov)? + h_process
            - scenario.gamma * scenario.goal_cost(&est.mean);
    }
    Ok(total)
}

/// Averages the rollout objective for every candidate turn rate. Rollout
/// `n` uses stream `n` of `seed` for every candidate, so candidates are
/// compared on common random numbers. With `include_process_entropy`
/// unset the constant `h(Q)` term is left out of each step.
pub fn score_candidates(
    belief: &GaussianBelief,
    scenario: &RobotScenario,
    candidates: &[f64],
    seed: u64,
    include_process_entropy: bool,
) -> Result<Vec<CandidateScore>> {
    let h_process = if include_process_entropy { gaussian_entropy(&scenario.process_noise())? } else { 0.0 };
    let noises: Vec<RolloutNoise> = (0..scenario.rollout_count)
        .map(|n| RolloutNoise::draw(&mut stream_rng(seed, n as u64), scenario.rollout_horizon, scenario.landmarks.len()))
        .collect();
    candidates
        .par_iter()
        .map(|&turn| {
            let mut total = 0.0;
            for noise in &noises {
                total += rollout_score(belief, scenario, turn, noise, h_process)?;
            }
            Ok(CandidateScore { turn_rate: turn, score: total / scenario.rollout_count as f64 })
        })
        .collect()
}

/// Picks the best-scoring candidate; ties go to the smallest `|u|`, then to
/// the negative rate.
pub fn best_candidate(scores: &[CandidateScore]) -> Option<f64> {
    let mut order: Vec<&CandidateScore> = scores.iter().collect();
    order.sort_by(|a, b| a.turn_rate.abs().total_cmp(&b.turn_rate.abs()).then(a.turn_rate.total_cmp(&b.turn_rate)));
    let mut best: Option<&CandidateScore> = None;
    for c in order {
        if best.is_none_or(|b| c.score > b.score) {
            best = Some(c);
        }
    }
    best.map(|c| c.turn_rate)
}

/// Receding-horizon turn-rate choice for the current belief.
pub fn receding_horizon_control(belief: &GaussianBelief, scenario: &RobotScenario, seed: u64) -> Result<f64> {
    let candidates = scenario.candidate_turn_rates();
    let scores = score_candidates(belief, scenario, &candidates, seed, true)?;
    best_candidate(&scores).ok_or_else(|| Error::Config("no candidate turn rates".into()))
}

/// One step of a navigation episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NavigationStep {
    pub pose: RobotState,
    pub estimate: GaussianBelief,
    pub turn_rate: f64,
    pub entropy: StepEntropy,
    pub goal_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NavigationRecord {
    pub seed: u64,
    pub initial_pose: RobotState,
    pub initial_estimate: GaussianBelief,
    pub steps: Vec<NavigationStep>,
    /// Whether the estimate reached the goal tolerance within the budget.
    pub reached_goal: bool,
}

impl NavigationRecord {
    /// True poses including the initial one.
    pub fn poses(&self) -> Vec<RobotState> {
        std::iter::once(self.initial_pose).chain(self.steps.iter().map(|s| s.pose)).collect()
    }

    pub fn final_pose(&self) -> RobotState {
        self.steps.last().map_or(self.initial_pose, |s| s.pose)
    }
}

/// Runs one navigation episode. The true-world noise uses its own stream of
/// `episode_seed`; the rollouts at step `t` use stream `t`.
pub fn run_navigation(scenario: &RobotScenario, episode_seed: u64) -> Result<NavigationRecord> {
    scenario.validate()?;
    let mut world = stream_rng(episode_seed, u64::MAX);
    let q_sqrt = psd_sqrt3(&scenario.process_noise());
    let r_sqrt = psd_sqrt2(&scenario.meas_noise());
    let h_process = gaussian_entropy(&scenario.process_noise())?;
    let landmarks = scenario.landmark_points();

    let prior = scenario.prior();
    let initial_pose = prior.sample(&mut world);
    let mut truth = initial_pose;
    let mut est = prior;
    let mut steps = Vec::new();
    let mut reached_goal = false;
    for t in 0..scenario.step_budget {
        if scenario.goal_distance(&est.mean) < scenario.goal_tolerance {
            reached_goal = true;
            break;
        }
        let turn = receding_horizon_control(&est, scenario, derive_seed(episode_seed, t as u64))?;
        let u = scenario.control(turn);
        truth = unicycle_step(&truth, u, scenario.dt, &(q_sqrt * standard_normal::<3>(&mut world)));
        let meas = landmarks
            .iter()
            .map(|lm| range_bearing(&truth, lm, &(r_sqrt * standard_normal::<2>(&mut world))))
            .collect::<Result<Vec<_>>>()?;
        let pred = ekf_predict(&est, u, scenario);
        est = ekf_update(&pred, &meas, scenario)?;
        steps.push(NavigationStep {
            pose: truth,
            estimate: est,
            turn_rate: turn,
            entropy: StepEntropy {
                h_post: gaussian_entropy(&est.cov)?,
                h_pred: gaussian_entropy(&pred.cov)?,
                h_process,
            },
            goal_cost: scenario.goal_cost(&est.mean),
        });
    }
    if !reached_goal && scenario.goal_distance(&est.mean) < scenario.goal_tolerance {
        reached_goal = true;
    }
    Ok(NavigationRecord { seed: episode_seed, initial_pose, initial_estimate: prior, steps, reached_goal })
}

/// Runs `episodes` navigation episodes; episode `i` uses stream `i` of
/// `master_seed`.
pub fn run_batch(scenario: &RobotScenario, master_seed: u64, episodes: usize) -> Result<Vec<NavigationRecord>> {
    (0..episodes as u64)
        .into_par_iter()
        .map(|i| run_navigation(scenario, derive_seed(master_seed, i)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryStats {
    /// Mean true `(x, y)` per step, shorter episodes held at their last pose.
    pub mean_path: Vec<[f64; 2]>,
    /// Population standard deviation of `(x, y)` per step.
    pub std_path: Vec<[f64; 2]>,
    pub mean_min_landmark_distance: f64,
    pub mean_final_goal_distance: f64,
    /// Fraction of episodes that reached the goal within the step budget.
    pub termination_rate: f64,
}

/// Minimum over the trajectory of the distance to the nearest landmark.
pub fn min_landmark_distance(record: &NavigationRecord, scenario: &RobotScenario) -> f64 {
    let landmarks = scenario.landmark_points();
    record
        .poses()
        .iter()
        .flat_map(|p| landmarks.iter().map(move |lm| p.distance_to(lm)))
        .fold(f64::INFINITY, f64::min)
}

pub fn trajectory_stats(batch: &[NavigationRecord], scenario: &RobotScenario) -> Result<TrajectoryStats> {
    if batch.is_empty() {
        return Err(Error::Input("trajectory statistics need at least one episode".into()));
    }
    let paths: Vec<Vec<RobotState>> = batch.iter().map(NavigationRecord::poses).collect();
    let len = paths.iter().map(Vec::len).max().unwrap_or(0);
    let n = batch.len() as f64;
    let mut mean_path = Vec::with_capacity(len);
    let mut std_path = Vec::with_capacity(len);
    for t in 0..len {
        let at = |p: &Vec<RobotState>| p[t.min(p.len() - 1)];
        let (mx, my) = paths.iter().map(at).fold((0.0, 0.0), |(a, b), s| (a + s.x, b + s.y));
        let (mx, my) = (mx / n, my / n);
        let (vx, vy) = paths
            .iter()
            .map(at)
            .fold((0.0, 0.0), |(a, b), s| (a + (s.x - mx).powi(2), b + (s.y - my).powi(2)));
        mean_path.push([mx, my]);
        std_path.push([(vx / n).sqrt(), (vy / n).sqrt()]);
    }
    Ok(TrajectoryStats {
        mean_path,
        std_path,
        mean_min_landmark_distance: batch.iter().map(|r| min_landmark_distance(r, scenario)).sum::<f64>() / n,
        mean_final_goal_distance: batch.iter().map(|r| scenario.goal_distance(&r.final_pose())).sum::<f64>() / n,
        termination_rate: batch.iter().filter(|r| r.reached_goal).count() as f64 / n,
    })
}
