//! Monte-Carlo G(PO)MDP estimation of the pseudo gradient, plus truncation
//! and concentration error bounds.
//!
//! An estimate averages `K₁` independent finite-horizon trajectories. Each
//! trajectory draws its randomness from a substream derived from
//! `(base seed, call index, trajectory index)`, and the average is reduced in
//! trajectory order, so estimates are bit-identical under any parallel
//! schedule (rollouts are embarrassingly parallel and run on the ambient
//! rayon pool when `K₁` is large enough to pay for it).

use crate::error::{Error, Result};
use crate::game::TabularGame;
use crate::policy::PolicyParams;
use crate::seeds::{self, domains};
use rand::RngCore;
use rayon::prelude::*;

/// Below this trajectory count the rollouts run serially.
const PARALLEL_THRESHOLD: usize = 256;

/// A finite-horizon rollout: `T+1` steps of (state, joint action, rewards).
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<usize>,
    /// Per step, the per-agent actions.
    pub actions: Vec<Vec<usize>>,
    /// Per step, the per-agent reward vector.
    pub rewards: Vec<Vec<f64>>,
    /// Which substream produced this trajectory.
    pub seed_id: u64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Roll out `T+1` steps under π_θ from a sampled initial state.
pub fn rollout<R: RngCore>(
    game: &TabularGame,
    params: &PolicyParams,
    horizon: usize,
    rng: &mut R,
) -> Result<Trajectory> {
    let mut states = Vec::with_capacity(horizon + 1);
    let mut actions = Vec::with_capacity(horizon + 1);
    let mut rewards = Vec::with_capacity(horizon + 1);
    let mut s = game.sample_initial(rng);
    for l in 0..=horizon {
        let a: Vec<usize> = (0..game.n_agents)
            .map(|i| params.sample_action(i, s, rng))
            .collect();
        let j = game.encode_joint(&a);
        rewards.push((0..game.n_agents).map(|i| game.reward(i, s, j)).collect());
        states.push(s);
        actions.push(a);
        if l < horizon {
            s = game.sample_transition(s, j, rng)?;
        }
    }
    Ok(Trajectory { states, actions, rewards, seed_id: 0 })
}

/// A G(PO)MDP estimate of the pseudo gradient field.
#[derive(Debug, Clone)]
pub struct GradientEstimate {
    /// Per agent, the estimated ∇_{θ_i} J_i.
    pub gradient: Vec<Vec<f64>>,
    /// Estimated field F̂(θ) = (−∇̂_{θ_i} J_i)_i, concatenated.
    pub field: Vec<f64>,
    pub horizon: usize,
    pub n_trajectories: usize,
    pub base_seed: u64,
    pub call_index: u64,
    /// Largest ‖∇ log π‖ observed while building the estimate.
    pub max_grad_log_norm: f64,
}

/// G(PO)MDP contribution of a single trajectory: per agent,
/// `Σ_{l=0}^{T} (Σ_{τ=0}^{l} ∇ log π_i(a_i(τ)|s(τ))) γ^l r_i(l)`.
/// Returns the per-agent gradient contributions and the largest score norm.
fn trajectory_contribution(
    game: &TabularGame,
    params: &PolicyParams,
    traj: &Trajectory,
) -> Result<(Vec<Vec<f64>>, f64)> {
    let n = game.n_agents;
    let mut cum: Vec<Vec<f64>> = (0..n).map(|i| vec![0.0; params.space.agent_dim(i)]).collect();
    let mut out: Vec<Vec<f64>> = (0..n).map(|i| vec![0.0; params.space.agent_dim(i)]).collect();
    let mut max_glp = 0.0f64;
    let mut glow = 1.0;
    for l in 0..traj.len() {
        let s = traj.states[l];
        for i in 0..n {
            let a = traj.actions[l][i];
            let p = params.action_prob(i, s, a);
            if p <= 0.0 {
                return Err(Error::Estimation(format!(
                    "zero-probability action in trajectory (agent {i}, s={s}, a={a})"
                )));
            }
            // cum += ∇ log π = (∇π)/π. The parameterizations touch a single
            // coordinate per (s,a), so the score norm is |∂π/∂θ|/π.
            let scale = 1.0 / p;
            params.accumulate_grad_prob(i, s, a, scale, &mut cum[i]);
            max_glp = max_glp.max(params.grad_prob_coeff() * scale);
            let w = glow * traj.rewards[l][i];
            for (o, cv) in out[i].iter_mut().zip(cum[i].iter()) {
                *o += w * cv;
            }
        }
        glow *= game.discount;
    }
    Ok((out, max_glp))
}

/// Average the G(PO)MDP contributions of `K₁` trajectories of horizon `T`.
///
/// Trajectory `w` draws from the substream `(base_seed, call_index, w)`;
/// identical arguments produce bit-identical estimates regardless of the
/// rayon thread count.
pub fn gpomdp_estimate(
    game: &TabularGame,
    params: &PolicyParams,
    horizon: usize,
    n_trajectories: usize,
    base_seed: u64,
    call_index: u64,
) -> Result<GradientEstimate> {
    if n_trajectories == 0 {
        return Err(Error::Domain("gpomdp_estimate needs at least one trajectory".into()));
    }
    let one = |w: usize| -> Result<(Vec<Vec<f64>>, f64)> {
        let mut rng = seeds::stream(base_seed, &[domains::TRAJECTORY, call_index, w as u64]);
        let mut traj = rollout(game, params, horizon, &mut rng)?;
        traj.seed_id = w as u64;
        trajectory_contribution(game, params, &traj)
    };
    let contribs: Vec<(Vec<Vec<f64>>, f64)> = if n_trajectories >= PARALLEL_THRESHOLD {
        (0..n_trajectories)
            .into_par_iter()
            .map(one)
            .collect::<Result<Vec<_>>>()?
    } else {
        (0..n_trajectories).map(one).collect::<Result<Vec<_>>>()?
    };

    // Deterministic reduction: sum in trajectory order.
    let n = game.n_agents;
    let mut gradient: Vec<Vec<f64>> = (0..n).map(|i| vec![0.0; params.space.agent_dim(i)]).collect();
    let mut max_glp = 0.0f64;
    for (c, glp) in &contribs {
        max_glp = max_glp.max(*glp);
        for (gi, ci) in gradient.iter_mut().zip(c) {
            for (g, v) in gi.iter_mut().zip(ci) {
                *g += v;
            }
        }
    }
    let scale = 1.0 / n_trajectories as f64;
    for gi in &mut gradient {
        for g in gi.iter_mut() {
            *g *= scale;
        }
    }
    let mut field = Vec::with_capacity(params.space.total_dim());
    for gi in &gradient {
        field.extend(gi.iter().map(|x| -x));
    }
    Ok(GradientEstimate {
        gradient,
        field,
        horizon,
        n_trajectories,
        base_seed,
        call_index,
        max_grad_log_norm: max_glp,
    })
}

/// Truncation bound
/// `σ_T = 2N (B_Θ U_R)² [((T+1)/(1−γ) + γ/(1−γ)²) γ^{T+1}]²`.
pub fn truncation_bound(n_agents: usize, b_theta: f64, u_r: f64, gamma: f64, horizon: usize) -> Result<f64> {
    if b_theta < 0.0 || u_r < 0.0 || n_agents == 0 {
        return Err(Error::Domain("truncation_bound arguments must be nonnegative".into()));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Domain(format!("discount out of range: {gamma}")));
    }
    let gap = 1.0 - gamma;
    let t1 = (horizon as f64 + 1.0) / gap + gamma / (gap * gap);
    let bracket = t1 * gamma.powi(horizon as i32 + 1);
    Ok(2.0 * n_agents as f64 * (b_theta * u_r).powi(2) * bracket * bracket)
}

/// Concentration bound
/// `M(T, K₁, δ) = σ_T + 16 log(8K₁/δ) N B_Θ² U_R² γ² / ((1−γ)⁴ K₁)`,
/// valid with probability at least `1 − δ/(4K₁)`.
pub fn error_bound(
    horizon: usize,
    n_trajectories: usize,
    delta: f64,
    n_agents: usize,
    b_theta: f64,
    u_r: f64,
    gamma: f64,
) -> Result<f64> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Domain(format!("delta out of range: {delta}")));
    }
    if n_trajectories == 0 {
        return Err(Error::Domain("error_bound needs at least one trajectory".into()));
    }
    let sigma_t = truncation_bound(n_agents, b_theta, u_r, gamma, horizon)?;
    let gap4 = (1.0 - gamma).powi(4);
    let k1 = n_trajectories as f64;
    let tail = 16.0 * (8.0 * k1 / delta).ln() * n_agents as f64 * b_theta.powi(2) * u_r.powi(2)
        * gamma.powi(2)
        / (gap4 * k1);
    Ok(sigma_t + tail)
}
