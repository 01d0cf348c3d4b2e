//! Exhaustive search over measurement-feedback control assignments on the
//! projected belief chain, shared by the DP oracle and acceptance targets.
#![allow(dead_code)]

use smoothing_averse::dp::{build_grid, ApproxChain, SimplexGrid};
use smoothing_averse::quadrature::MeasurementQuadrature;
use smoothing_averse::smoother::expected_stage_reward;
use smoothing_averse::{Belief, ControlledHmm, EmissionModel, Observation};

pub fn toy() -> ControlledHmm {
    ControlledHmm::new(
        vec![vec![vec![0.9, 0.2], vec![0.1, 0.8]], vec![vec![0.5, 0.5], vec![0.5, 0.5]]],
        EmissionModel::Discrete { likelihood: vec![vec![0.8, 0.2], vec![0.3, 0.7]] },
        Belief::uniform(2),
    )
    .unwrap()
}

fn state_control_cost(x: usize, u: usize) -> f64 {
    if x == u {
        0.0
    } else {
        1.0
    }
}

pub struct Setup {
    pub hmm: ControlledHmm,
    pub grid: SimplexGrid,
    quad: MeasurementQuadrature,
    gamma: f64,
}

impl Setup {
    pub fn new(hmm: ControlledHmm, gamma: f64) -> Self {
        let grid = build_grid(hmm.n_states(), 0.25).unwrap();
        let quad = MeasurementQuadrature::new(hmm.emissions(), 0).unwrap();
        Self { hmm, grid, quad, gamma }
    }

    pub fn reward(&self, b: &Belief, u: usize) -> f64 {
        expected_stage_reward(&self.hmm, b, u, state_control_cost, self.gamma, &self.quad).unwrap()
    }

    pub fn chain(&self) -> ApproxChain {
        ApproxChain::build(&self.hmm, &self.grid, &self.quad, &|b: &Belief, u| Ok(self.reward(b, u))).unwrap()
    }

    /// Successors of a grid point recomputed from the filter, one per symbol.
    pub fn branches(&self, point: usize, u: usize) -> Vec<(f64, usize)> {
        let b = &self.grid.points()[point];
        let m = self.hmm.emissions().n_symbols().unwrap();
        let predicted = self.hmm.predict_marginal(b, u).unwrap();
        (0..m)
            .filter_map(|y| {
                let y = Observation::Symbol(y);
                let p = self.hmm.measurement_likelihood(b, u, y).unwrap();
                (p > 0.0).then(|| (p, self.grid.project(&self.hmm.measurement_update(&predicted, y).unwrap())))
            })
            .collect()
    }

    /// Value of every feedback assignment on the subtree rooted at `point`
    /// with `remaining` stages: a control here, and an independent
    /// assignment below each measurement branch.
    pub fn all_assignment_values(&self, point: usize, remaining: usize) -> Vec<f64> {
        if remaining == 0 {
            return vec![0.0];
        }
        let mut out = Vec::new();
        for u in 0..self.hmm.n_controls() {
            let r = self.reward(&self.grid.points()[point], u);
            let mut partial = vec![r];
            for (p, next) in self.branches(point, u) {
                let below = self.all_assignment_values(next, remaining - 1);
                partial = partial.iter().flat_map(|acc| below.iter().map(move |v| acc + p * v)).collect();
            }
            out.extend(partial);
        }
        out
    }
}

pub fn assignment_count(n_controls: usize, n_symbols: usize, horizon: usize) -> usize {
    (0..horizon).fold(1, |below, _| n_controls * below.pow(n_symbols as u32))
}

/// Largest `|J_0(p) - best assignment value|` over every start point.
pub fn exhaustive_gap(setup: &Setup, horizon: usize) -> f64 {
    let (values, _) = setup.chain().solve(horizon);
    let m = setup.hmm.emissions().n_symbols().unwrap();
    let mut gap: f64 = 0.0;
    for p in 0..setup.grid.len() {
        let all = setup.all_assignment_values(p, horizon);
        assert_eq!(all.len(), assignment_count(setup.hmm.n_controls(), m, horizon));
        let best = all.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        gap = gap.max((values.values[0][p] - best).abs());
    }
    gap
}

/// Largest Bellman residual over every stage and point, including the
/// residual of the stored control.
pub fn bellman_gap(setup: &Setup, horizon: usize) -> f64 {
    let (values, policy) = setup.chain().solve(horizon);
    let mut gap: f64 = values.values[horizon].iter().fold(0.0, |a, v| a.max(v.abs()));
    for t in 0..horizon {
        for p in 0..setup.grid.len() {
            let b = &setup.grid.points()[p];
            let qs: Vec<f64> = (0..setup.hmm.n_controls())
                .map(|u| {
                    setup.reward(b, u)
                        + setup.branches(p, u).iter().map(|&(w, q)| w * values.values[t + 1][q]).sum::<f64>()
                })
                .collect();
            let best = qs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            gap = gap.max((values.values[t][p] - best).abs()).max((qs[policy.controls[t][p]] - best).abs());
        }
    }
    gap
}

pub fn check_against_exhaustive(setup: &Setup, horizon: usize) {
    let gap = exhaustive_gap(setup, horizon);
    assert!(gap <= 1e-10, "J_0 differs from exhaustive search by {gap:e}");
}

pub fn check_bellman(setup: &Setup, horizon: usize) {
    let gap = bellman_gap(setup, horizon);
    assert!(gap <= 1e-12, "Bellman residual {gap:e}");
}
