//! Exact dynamic-programming evaluation: value functions, discounted
//! occupancy, total rewards, the pseudo gradient field F(θ) and its proximal
//! regularization.
//!
//! All linear systems are solved by dense LU factorization; `γ < 1` makes
//! `I − γP^π` invertible, and at desk scale (≤ 100 states) direct solves are
//! the right tool. Residuals are checked against `RESIDUAL_TOL` after every
//! solve.

use crate::error::{Error, Result};
use crate::game::TabularGame;
use crate::policy::PolicyParams;
use nalgebra::{DMatrix, DVector};

/// Residual tolerance for Bellman and occupancy solves.
pub const RESIDUAL_TOL: f64 = 1e-9;

/// Everything the exact evaluator produces at a single θ.
///
/// Memoizes intermediate results for one parameter point; not meant to be
/// shared across θ values.
#[derive(Debug, Clone)]
pub struct FieldEvaluation {
    /// Per agent, V_i over states.
    pub value: Vec<Vec<f64>>,
    /// Per agent, Q_i over (state, joint action), state-major.
    pub qvalue: Vec<Vec<f64>>,
    /// Discounted state occupancy d (sums to 1).
    pub occupancy: Vec<f64>,
    /// Per agent, J_i = Σ_s ρ(s) V_i(s).
    pub total_reward: Vec<f64>,
    /// Per agent, ∇_{θ_i} J_i.
    pub gradient: Vec<Vec<f64>>,
    /// F(θ) = (−∇_{θ_i} J_i)_i concatenated in agent order.
    pub field: Vec<f64>,
}

/// Per-state joint action probabilities π_θ(a|s) and per-agent marginals.
struct JointProbs {
    /// `joint[s][j] = Π_i π_i(a_i|s)`.
    joint: Vec<Vec<f64>>,
    /// `single[i][s][a]`.
    single: Vec<Vec<Vec<f64>>>,
}

fn joint_probs(game: &TabularGame, params: &PolicyParams) -> JointProbs {
    let ja = game.joint_count();
    let single: Vec<Vec<Vec<f64>>> = (0..game.n_agents)
        .map(|i| (0..game.n_states).map(|s| params.action_probs(i, s)).collect())
        .collect();
    let mut joint = vec![vec![0.0; ja]; game.n_states];
    let mut actions = vec![0usize; game.n_agents];
    for (s, row) in joint.iter_mut().enumerate() {
        for (j, slot) in row.iter_mut().enumerate() {
            game.decode_joint_into(j, &mut actions);
            *slot = actions
                .iter()
                .enumerate()
                .map(|(i, &a)| single[i][s][a])
                .product();
        }
    }
    JointProbs { joint, single }
}

/// The state-to-state Markov kernel P^π(s'|s) induced by the joint policy.
pub fn induced_kernel(game: &TabularGame, params: &PolicyParams) -> DMatrix<f64> {
    let probs = joint_probs(game, params);
    kernel_from_probs(game, &probs)
}

fn kernel_from_probs(game: &TabularGame, probs: &JointProbs) -> DMatrix<f64> {
    let s_n = game.n_states;
    let ja = game.joint_count();
    let mut p = DMatrix::zeros(s_n, s_n);
    for s in 0..s_n {
        for j in 0..ja {
            let w = probs.joint[s][j];
            if w == 0.0 {
                continue;
            }
            let row = game.transition_row(s, j);
            for s2 in 0..s_n {
                p[(s, s2)] += w * row[s2];
            }
        }
    }
    p
}

fn policy_reward(game: &TabularGame, probs: &JointProbs, i: usize) -> DVector<f64> {
    let ja = game.joint_count();
    DVector::from_fn(game.n_states, |s, _| {
        (0..ja).map(|j| probs.joint[s][j] * game.reward(i, s, j)).sum()
    })
}

fn solve_bellman(game: &TabularGame, kernel: &DMatrix<f64>, r_pi: &DVector<f64>) -> Result<Vec<f64>> {
    let s_n = game.n_states;
    let a = DMatrix::identity(s_n, s_n) - kernel * game.discount;
    let v = a
        .clone()
        .lu()
        .solve(r_pi)
        .ok_or_else(|| Error::Numeric("singular Bellman system".into()))?;
    let res = (&a * &v - r_pi).amax();
    if res > RESIDUAL_TOL {
        return Err(Error::Numeric(format!("Bellman residual {res} above tolerance")));
    }
    Ok(v.iter().copied().collect())
}

/// V_i: solves `(I − γP^π) V = r_i^π`.
pub fn value_function(game: &TabularGame, params: &PolicyParams, i: usize) -> Result<Vec<f64>> {
    let probs = joint_probs(game, params);
    let kernel = kernel_from_probs(game, &probs);
    solve_bellman(game, &kernel, &policy_reward(game, &probs, i))
}

/// Q_i(s, a) = r_i(s, a) + γ Σ_{s'} P(s'|s,a) V_i(s').
pub fn action_value(game: &TabularGame, params: &PolicyParams, i: usize) -> Result<Vec<f64>> {
    let v = value_function(game, params, i)?;
    Ok(q_from_value(game, i, &v))
}

fn q_from_value(game: &TabularGame, i: usize, v: &[f64]) -> Vec<f64> {
    let ja = game.joint_count();
    let mut q = vec![0.0; game.n_states * ja];
    for s in 0..game.n_states {
        for j in 0..ja {
            let row = game.transition_row(s, j);
            let cont: f64 = row.iter().zip(v).map(|(p, vv)| p * vv).sum();
            q[s * ja + j] = game.reward(i, s, j) + game.discount * cont;
        }
    }
    q
}

/// Discounted occupancy `d = (1−γ)·ρᵀ(I − γP^π)^{-1}` (a distribution).
pub fn discounted_occupancy(game: &TabularGame, params: &PolicyParams) -> Result<Vec<f64>> {
    let kernel = induced_kernel(game, params);
    occupancy_from_kernel(game, &kernel)
}

fn occupancy_from_kernel(game: &TabularGame, kernel: &DMatrix<f64>) -> Result<Vec<f64>> {
    let s_n = game.n_states;
    let a_t = DMatrix::identity(s_n, s_n) - kernel.transpose() * game.discount;
    let rho = DVector::from_row_slice(&game.initial_dist);
    let x = a_t
        .clone()
        .lu()
        .solve(&rho)
        .ok_or_else(|| Error::Numeric("singular occupancy system".into()))?;
    let res = (&a_t * &x - &rho).amax();
    if res > RESIDUAL_TOL {
        return Err(Error::Numeric(format!("occupancy residual {res} above tolerance")));
    }
    let d: Vec<f64> = x.iter().map(|&v| v * (1.0 - game.discount)).collect();
    let sum: f64 = d.iter().sum();
    if (sum - 1.0).abs() > RESIDUAL_TOL || d.iter().any(|&v| v < -RESIDUAL_TOL) {
        return Err(Error::Numeric(format!("occupancy is not a distribution (sum {sum})")));
    }
    Ok(d)
}

/// J_i = Σ_s ρ(s) V_i(s).
pub fn total_reward(game: &TabularGame, params: &PolicyParams, i: usize) -> Result<f64> {
    let v = value_function(game, params, i)?;
    Ok(v.iter().zip(&game.initial_dist).map(|(vv, r)| vv * r).sum())
}

/// F(θ) = (−∇_{θ_i} J_i)_i. Convenience wrapper around [`evaluate`].
pub fn pseudo_gradient(game: &TabularGame, params: &PolicyParams) -> Result<Vec<f64>> {
    Ok(evaluate(game, params)?.field)
}

/// Full evaluation at one θ: values, Q, occupancy, J, gradients, field.
pub fn evaluate(game: &TabularGame, params: &PolicyParams) -> Result<FieldEvaluation> {
    let probs = joint_probs(game, params);
    let kernel = kernel_from_probs(game, &probs);
    let occupancy = occupancy_from_kernel(game, &kernel)?;
    let ja = game.joint_count();
    let n = game.n_agents;
    let inv_gap = 1.0 / (1.0 - game.discount);

    let mut value = Vec::with_capacity(n);
    let mut qvalue = Vec::with_capacity(n);
    let mut total = Vec::with_capacity(n);
    for i in 0..n {
        let v = solve_bellman(game, &kernel, &policy_reward(game, &probs, i))?;
        total.push(v.iter().zip(&game.initial_dist).map(|(vv, r)| vv * r).sum());
        qvalue.push(q_from_value(game, i, &v));
        value.push(v);
    }

    // ∇_{θ_i} J_i[c] = 1/(1−γ) Σ_s d(s) Σ_{a_i} ∂π_i(a_i|s)/∂θ_i[c] · W_i(s, a_i),
    // with W_i(s, a_i) = Σ_{a_{-i}} π_{-i}(a_{-i}|s) Q_i(s, a).
    let mut actions = vec![0usize; n];
    let mut gradient: Vec<Vec<f64>> = (0..n)
        .map(|i| vec![0.0; params.space.agent_dim(i)])
        .collect();
    for i in 0..n {
        let m = game.n_actions[i];
        for s in 0..game.n_states {
            let mut w = vec![0.0; m];
            for j in 0..ja {
                game.decode_joint_into(j, &mut actions);
                let mut opp = 1.0;
                for (other, &a) in actions.iter().enumerate() {
                    if other != i {
                        opp *= probs.single[other][s][a];
                    }
                }
                w[actions[i]] += opp * qvalue[i][s * ja + j];
            }
            for (a, &wa) in w.iter().enumerate() {
                params.accumulate_grad_prob(i, s, a, occupancy[s] * wa * inv_gap, &mut gradient[i]);
            }
        }
    }

    let mut field = Vec::with_capacity(params.space.total_dim());
    for g in &gradient {
        field.extend(g.iter().map(|x| -x));
    }
    Ok(FieldEvaluation {
        value,
        qvalue,
        occupancy,
        total_reward: total,
        gradient,
        field,
    })
}

/// The Lipschitz-constant formula
/// `L = sqrt(2 U_R² L_Θ² / (1−γ)⁶ + 2 (1+γ)² U_R² N B_Θ⁴ / (1−γ)⁶)`
/// for parameterizations with a Lipschitz, bounded score function.
pub fn lipschitz_bound(u_r: f64, l_theta: f64, b_theta: f64, n_agents: usize, gamma: f64) -> Result<f64> {
    if u_r < 0.0 || l_theta < 0.0 || b_theta < 0.0 {
        return Err(Error::Domain("lipschitz_bound arguments must be nonnegative".into()));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Domain(format!("discount out of range: {gamma}")));
    }
    let gap6 = (1.0 - gamma).powi(6);
    let term1 = 2.0 * u_r.powi(2) * l_theta.powi(2) / gap6;
    let term2 = 2.0 * (1.0 + gamma).powi(2) * u_r.powi(2) * (n_agents as f64) * b_theta.powi(4) / gap6;
    Ok((term1 + term2).sqrt())
}

/// The proximally regularized field `F_k(θ) = F(θ) + (1/β)(θ − center)`.
#[derive(Debug, Clone)]
pub struct RegularizedField {
    pub beta: f64,
    pub center: Vec<f64>,
}

impl RegularizedField {
    /// Requires β ∈ (0, 1/L) for the configured Lipschitz constant.
    pub fn new(beta: f64, lipschitz: f64, center: Vec<f64>) -> Result<Self> {
        if !(beta > 0.0 && beta * lipschitz < 1.0) {
            return Err(Error::Config(format!(
                "beta out of range: need beta in (0, 1/L), got beta={beta}, L={lipschitz}"
            )));
        }
        Ok(Self { beta, center })
    }

    /// Add the proximal term to a base field value at θ.
    pub fn apply(&self, base_field: &[f64], theta: &[f64]) -> Vec<f64> {
        debug_assert_eq!(base_field.len(), self.center.len());
        debug_assert_eq!(theta.len(), self.center.len());
        let inv_beta = 1.0 / self.beta;
        base_field
            .iter()
            .zip(theta.iter().zip(&self.center))
            .map(|(f, (t, c))| f + inv_beta * (t - c))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game;
    use crate::policy::{ParamKind, ParamSpace};
    use crate::seeds;

    #[test]
    fn zero_rewards_give_zero_values_and_field() {
        let g = game::zero_reward_example();
        let space = ParamSpace::for_game(&g, ParamKind::TwoActionBox { alpha: 0.01 }).unwrap();
        let p = space.uniform_params();
        let ev = evaluate(&g, &p).unwrap();
        assert!(ev.value[0].iter().all(|&v| v == 0.0));
        assert!(ev.qvalue[1].iter().all(|&q| q == 0.0));
        assert!(ev.field.iter().all(|&f| f == 0.0));
        assert_eq!(ev.total_reward, vec![0.0, 0.0]);
    }

    #[test]
    fn single_state_constant_reward_is_geometric_series() {
        let c = 2.5;
        let mut g = game::zero_reward_example();
        g.reward = vec![c; 8];
        g.reward_bound = c;
        let space = ParamSpace::for_game(&g, ParamKind::Direct).unwrap();
        let p = space.uniform_params();
        let v = value_function(&g, &p, 0).unwrap();
        assert!((v[0] - c / (1.0 - g.discount)).abs() < 1e-9);
        let q = action_value(&g, &p, 0).unwrap();
        for &qv in &q {
            assert!((qv - c / (1.0 - g.discount)).abs() < 1e-9);
        }
        let d = discounted_occupancy(&g, &p).unwrap();
        assert_eq!(d.len(), 1);
        assert!((d[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn induced_kernel_ignores_theta_on_two_player_example() {
        let g = game::two_player_example();
        let space = ParamSpace::for_game(&g, ParamKind::TwoActionBox { alpha: 0.01 }).unwrap();
        let mut rng = seeds::stream(17, &[seeds::domains::TEST]);
        for _ in 0..20 {
            let p = space.random_params(&mut rng);
            let k = induced_kernel(&g, &p);
            assert!((k[(0, 0)] - 0.6).abs() < 1e-12);
            assert!((k[(0, 1)] - 0.4).abs() < 1e-12);
            assert!((k[(1, 0)] - 0.7).abs() < 1e-12);
            assert!((k[(1, 1)] - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn kernel_rows_sum_to_one_random_theta() {
        let g = game::chain_three_example();
        let space = ParamSpace::for_game(&g, ParamKind::AlphaGreedy { alpha: 0.05 }).unwrap();
        let mut rng = seeds::stream(23, &[seeds::domains::TEST]);
        for _ in 0..100 {
            let p = space.random_params(&mut rng);
            let k = induced_kernel(&g, &p);
            for s in 0..g.n_states {
                let sum: f64 = (0..g.n_states).map(|s2| k[(s, s2)]).sum();
                assert!((sum - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn identity_kernel_occupancy_equals_rho() {
        let mut g = game::zero_reward_example();
        g.n_states = 2;
        g.initial_dist = vec![0.3, 0.7];
        g.transition = {
            let mut t = vec![0.0; 2 * 4 * 2];
            for s in 0..2 {
                for j in 0..4 {
                    t[(s * 4 + j) * 2 + s] = 1.0;
                }
            }
            t
        };
        g.reward = vec![0.0; 2 * 2 * 4];
        let space = ParamSpace::for_game(&g, ParamKind::Direct).unwrap();
        let d = discounted_occupancy(&g, &space.uniform_params()).unwrap();
        assert!((d[0] - 0.3).abs() < 1e-12);
        assert!((d[1] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn value_matches_q_under_policy() {
        let g = game::chain_three_example();
        let space = ParamSpace::for_game(&g, ParamKind::AlphaGreedy { alpha: 0.1 }).unwrap();
        let mut rng = seeds::stream(31, &[seeds::domains::TEST]);
        for _ in 0..100 {
            let p = space.random_params(&mut rng);
            let ev = evaluate(&g, &p).unwrap();
            let ja = g.joint_count();
            let mut actions = vec![0usize; g.n_agents];
            for i in 0..g.n_agents {
                for s in 0..g.n_states {
                    let mut vq = 0.0;
                    for j in 0..ja {
                        g.decode_joint_into(j, &mut actions);
                        let w: f64 = actions
                            .iter()
                            .enumerate()
                            .map(|(m, &a)| p.action_prob(m, s, a))
                            .product();
                        vq += w * ev.qvalue[i][s * ja + j];
                    }
                    assert!((vq - ev.value[i][s]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn reward_bound_caps_total_reward() {
        let g = game::two_player_example();
        let space = ParamSpace::for_game(&g, ParamKind::TwoActionBox { alpha: 0.01 }).unwrap();
        let cap = g.reward_bound / (1.0 - g.discount);
        let mut rng = seeds::stream(37, &[seeds::domains::TEST]);
        for _ in 0..100 {
            let p = space.random_params(&mut rng);
            for i in 0..2 {
                let j = total_reward(&g, &p, i).unwrap();
                assert!(j.abs() <= cap);
            }
        }
    }

    #[test]
    fn lipschitz_bound_formula() {
        assert_eq!(lipschitz_bound(0.0, 1.0, 1.0, 2, 0.9).unwrap(), 0.0);
        let l1 = lipschitz_bound(1.0, 2.0, 1.5, 3, 0.8).unwrap();
        let l2 = lipschitz_bound(2.0, 2.0, 1.5, 3, 0.8).unwrap();
        assert!((l2 - 2.0 * l1).abs() < 1e-12, "homogeneous of degree 1 in U_R");
        assert!(lipschitz_bound(1.0, 1.0, 1.0, 2, 1.0).is_err());
        assert!(lipschitz_bound(-1.0, 1.0, 1.0, 2, 0.5).is_err());
    }

    #[test]
    fn regularized_field_basics() {
        let center = vec![0.25, 0.5, 0.75, 0.5];
        let rf = RegularizedField::new(0.5 / 5.63, 5.63, center.clone()).unwrap();
        // At the center the proximal term vanishes.
        let base = vec![1.0, -2.0, 3.0, -4.0];
        assert_eq!(rf.apply(&base, &center), base);
        // Zero base field leaves (θ − center)/β.
        let theta = vec![0.5, 0.5, 0.5, 0.5];
        let out = rf.apply(&[0.0; 4], &theta);
        for (o, (t, c)) in out.iter().zip(theta.iter().zip(&center)) {
            assert!((o - (t - c) / rf.beta).abs() < 1e-12);
        }
        assert!(RegularizedField::new(1.0 / 5.63, 5.63, center).is_err());
    }
}
