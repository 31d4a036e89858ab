//! Nash-gap machinery: exact best-response values, per-iterate gaps, the
//! weighted gap aggregates, the Stampacchia prime gap and Minty residual
//! checks, and the gradient-domination inequality.
//!
//! Suprema over an agent's feasible set exploit that the total reward is
//! affine in the agent's per-state action distribution: the best response is
//! attained at an (α-smoothed) deterministic decision rule and linear
//! objectives maximize at block vertices.

use crate::error::{Error, Result};
use crate::eval;
use crate::game::TabularGame;
use crate::policy::{Block, ParamKind, ParamSpace, PolicyParams};
use crate::seeds::{self, domains};
use nalgebra::{DMatrix, DVector};

/// Best response of agent `i` against the opponents fixed by `params`:
/// the exact value `sup_{θ_i ∈ Θ_i} J_i(θ_i, θ_{-i})` together with a
/// maximizing θ_i.
///
/// Marginalizes the opponents into a single-agent MDP and runs policy
/// iteration over the (α-smoothed) deterministic decision rules, which are
/// the vertices of the per-state feasible action-distribution set. Ties in
/// the improvement step break toward the lowest action index.
pub fn best_response(game: &TabularGame, params: &PolicyParams, i: usize) -> Result<(f64, Vec<f64>)> {
    let s_n = game.n_states;
    let m = game.n_actions[i];
    let ja = game.joint_count();
    let alpha = params.space.kind.alpha();

    // Marginalized kernel and reward over (s, a_i).
    let mut pbar = vec![0.0; s_n * m * s_n];
    let mut rbar = vec![0.0; s_n * m];
    let mut actions = vec![0usize; game.n_agents];
    for s in 0..s_n {
        for j in 0..ja {
            game.decode_joint_into(j, &mut actions);
            let mut opp = 1.0;
            for (other, &a) in actions.iter().enumerate() {
                if other != i {
                    opp *= params.action_prob(other, s, a);
                }
            }
            if opp == 0.0 {
                continue;
            }
            let a_i = actions[i];
            rbar[s * m + a_i] += opp * game.reward(i, s, j);
            let row = game.transition_row(s, j);
            for s2 in 0..s_n {
                pbar[(s * m + a_i) * s_n + s2] += opp * row[s2];
            }
        }
    }

    // Action distribution of the vertex that smooths pure action `a`.
    let vertex_prob = |a: usize, b: usize| -> f64 {
        let base = if a == b { 1.0 } else { 0.0 };
        (1.0 - alpha) * base + alpha / m as f64
    };

    let evaluate_rule = |rule: &[usize]| -> Result<DVector<f64>> {
        let mut p_mu = DMatrix::zeros(s_n, s_n);
        let mut r_mu = DVector::zeros(s_n);
        for s in 0..s_n {
            for b in 0..m {
                let w = vertex_prob(rule[s], b);
                r_mu[s] += w * rbar[s * m + b];
                for s2 in 0..s_n {
                    p_mu[(s, s2)] += w * pbar[(s * m + b) * s_n + s2];
                }
            }
        }
        let a_mat = DMatrix::identity(s_n, s_n) - p_mu * game.discount;
        a_mat
            .lu()
            .solve(&r_mu)
            .ok_or_else(|| Error::Numeric("singular best-response evaluation".into()))
    };

    let mut rule = vec![0usize; s_n];
    let mut v = evaluate_rule(&rule)?;
    // Policy iteration over finitely many rules terminates; the cap is a
    // safety net.
    for _ in 0..10_000 {
        let mut changed = false;
        let mut next = rule.clone();
        for s in 0..s_n {
            // Pure-action action values; the α-smoothing adds an
            // action-independent offset, so argmax over pure actions is the
            // vertex argmax.
            let q = |a: usize| -> f64 {
                let mut total = rbar[s * m + a];
                for s2 in 0..s_n {
                    total += game.discount * pbar[(s * m + a) * s_n + s2] * v[s2];
                }
                total
            };
            let current = q(rule[s]);
            // Lowest-index argmax (strict > keeps the earliest maximum);
            // switch only on strict improvement so iteration terminates.
            let mut best_a = 0usize;
            let mut best_q = q(0);
            for a in 1..m {
                let qa = q(a);
                if qa > best_q {
                    best_a = a;
                    best_q = qa;
                }
            }
            if best_q > current && best_a != rule[s] {
                next[s] = best_a;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        rule = next;
        v = evaluate_rule(&rule)?;
    }

    let value = game
        .initial_dist
        .iter()
        .zip(v.iter())
        .map(|(r, vv)| r * vv)
        .sum();

    // Map the optimal rule back into Θ_i.
    let theta_i = match params.space.kind {
        ParamKind::TwoActionBox { .. } => rule
            .iter()
            .map(|&a| if a == 0 { 1.0 } else { 0.0 })
            .collect(),
        _ => {
            let mut t = vec![0.0; s_n * m];
            for (s, &a) in rule.iter().enumerate() {
                t[s * m + a] = 1.0;
            }
            t
        }
    };
    Ok((value, theta_i))
}

/// `sup_{θ_i ∈ Θ_i} J_i(θ_i, θ_{-i})`.
pub fn best_response_value(game: &TabularGame, params: &PolicyParams, i: usize) -> Result<f64> {
    Ok(best_response(game, params, i)?.0)
}

/// Per-agent best-response gaps and their maximum.
pub fn nash_gap(game: &TabularGame, params: &PolicyParams) -> Result<(Vec<f64>, f64)> {
    let mut gaps = Vec::with_capacity(game.n_agents);
    for i in 0..game.n_agents {
        let br = best_response_value(game, params, i)?;
        let j = eval::total_reward(game, params, i)?;
        gaps.push(br - j);
    }
    let sup = gaps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok((gaps, sup))
}

/// Weighted gap aggregates `ε_K = Σ_{k≤K} k^w g(k) / Σ_{k≤K} k^w` for every
/// prefix K, computed with compensated (Neumaier) summation.
pub fn weighted_gap(gaps: &[f64], exponent: f64) -> Vec<f64> {
    let mut num = Kahan::default();
    let mut den = Kahan::default();
    gaps.iter()
        .enumerate()
        .map(|(idx, &g)| {
            let w = ((idx + 1) as f64).powf(exponent);
            num.add(w * g);
            den.add(w);
            num.value() / den.value()
        })
        .collect()
}

#[derive(Default, Clone, Copy)]
struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Supremum of `⟨F_i(θ), θ_i − θ̄_i⟩` over `θ̄_i ∈ Θ_i` for one agent: the
/// agent's share of the prime gap. Linear in θ̄_i, so the supremum sits at a
/// block vertex.
fn agent_linear_gap(space: &ParamSpace, field: &[f64], flat: &[f64], i: usize) -> f64 {
    let off = space.agent_offset(i);
    let mut pos = off;
    let mut total = 0.0;
    for block in space.agent_blocks(i) {
        match block {
            Block::UnitInterval => {
                let f = field[pos];
                let t = flat[pos];
                total += (f * t - f * 0.0).max(f * t - f * 1.0);
                pos += 1;
            }
            Block::Simplex { len } => {
                let f = &field[pos..pos + len];
                let t = &flat[pos..pos + len];
                let inner: f64 = f.iter().zip(t).map(|(a, b)| a * b).sum();
                let min = f.iter().cloned().fold(f64::INFINITY, f64::min);
                total += inner - min;
                pos += len;
            }
        }
    }
    total
}

/// Prime gap of the Stampacchia VI at θ̂: `sup_{θ∈Θ} ⟨F(θ̂), θ̂ − θ⟩`.
/// Zero exactly at first-order Nash equilibria.
pub fn svi_prime_gap(game: &TabularGame, params: &PolicyParams) -> Result<f64> {
    let field = eval::pseudo_gradient(game, params)?;
    let flat = params.to_flat();
    Ok((0..game.n_agents)
        .map(|i| agent_linear_gap(&params.space, &field, &flat, i))
        .sum())
}

/// Result of a Minty-residual scan.
#[derive(Debug, Clone)]
pub struct MviReport {
    /// Minimum of `⟨F(θ), θ − θ*⟩` over the sampled θ.
    pub min_residual: f64,
    /// The sample point attaining the minimum.
    pub argmin: Vec<f64>,
    pub n_points: usize,
}

/// Scan `⟨F(θ), θ − candidate⟩` over a regular grid (`grid_points` per
/// coordinate, projected onto Θ) plus `n_random` uniform feasible points.
/// A nonnegative minimum is consistent with `candidate` solving the Minty
/// variational inequality on the sample.
///
/// This is the inequality the convergence analysis consumes: a Minty
/// solution satisfies `⟨F(θ), θ − θ*⟩ ≥ 0` for all feasible θ.
pub fn mvi_residual(
    game: &TabularGame,
    space: &ParamSpace,
    candidate: &[f64],
    grid_points: usize,
    n_random: usize,
    seed: u64,
) -> Result<MviReport> {
    if candidate.len() != space.total_dim() {
        return Err(Error::Domain("candidate has the wrong dimension".into()));
    }
    let dim = space.total_dim();
    if grid_points > 1 && (grid_points as f64).powi(dim as i32) > 2e7 {
        return Err(Error::Domain(format!(
            "grid of {grid_points}^{dim} points is too large"
        )));
    }
    let mut min_residual = f64::INFINITY;
    let mut argmin = candidate.to_vec();
    let mut n_points = 0;

    let mut visit = |flat: Vec<f64>| -> Result<()> {
        let p = PolicyParams::from_flat(space, &flat);
        let field = eval::pseudo_gradient(game, &p)?;
        let res: f64 = field
            .iter()
            .zip(flat.iter().zip(candidate))
            .map(|(f, (t, c))| f * (t - c))
            .sum();
        n_points += 1;
        if res < min_residual {
            min_residual = res;
            argmin = flat;
        }
        Ok(())
    };

    if grid_points > 1 {
        let total = (grid_points as u64).pow(dim as u32);
        for idx in 0..total {
            let mut rem = idx;
            let mut raw = vec![0.0; dim];
            for c in 0..dim {
                let g = rem % grid_points as u64;
                rem /= grid_points as u64;
                raw[c] = g as f64 / (grid_points as f64 - 1.0);
            }
            visit(space.project_flat(&raw)?)?;
        }
    }
    let mut rng = seeds::stream(seed, &[domains::METRICS]);
    for _ in 0..n_random {
        visit(space.random_params(&mut rng).to_flat())?;
    }
    Ok(MviReport { min_residual, argmin, n_points })
}

/// Check the gradient-domination inequality
/// `gap_i ≤ M₁ · sup_{θ̄_i} ⟨F_i(θ), θ_i − θ̄_i⟩` for every agent.
/// Returns the worst slack (right side minus left side); nonnegative slack
/// means the inequality holds.
pub fn gradient_domination_check(
    game: &TabularGame,
    params: &PolicyParams,
    m1: f64,
) -> Result<(bool, f64)> {
    if m1 <= 0.0 {
        return Err(Error::Domain(format!("M1 must be positive, got {m1}")));
    }
    let field = eval::pseudo_gradient(game, params)?;
    let flat = params.to_flat();
    let mut worst = f64::INFINITY;
    for i in 0..game.n_agents {
        let br = best_response_value(game, params, i)?;
        let j = eval::total_reward(game, params, i)?;
        let gap = br - j;
        let sup = agent_linear_gap(&params.space, &field, &flat, i);
        worst = worst.min(m1 * sup - gap);
    }
    Ok((worst >= -1e-9, worst))
}

/// One row of a gap report.
#[derive(Debug, Clone)]
pub struct GapRow {
    /// Outer iteration index (1-based).
    pub k: usize,
    pub gaps: Vec<f64>,
    pub sup_gap: f64,
    /// Weighted aggregate ε_k over iterations 1..=k.
    pub eps_weighted: f64,
}

/// Per-iterate Nash gaps and the weighted aggregate series for a sequence of
/// iterates θ_1..θ_K.
#[derive(Debug, Clone)]
pub struct GapReport {
    pub rows: Vec<GapRow>,
    pub weight_exponent: f64,
}

impl GapReport {
    pub fn eps_final(&self) -> f64 {
        self.rows.last().map(|r| r.eps_weighted).unwrap_or(0.0)
    }
}

/// Evaluate gaps at θ_1..θ_K (flat iterates) and aggregate with exponent `w`.
pub fn gap_report(
    game: &TabularGame,
    space: &ParamSpace,
    iterates: &[Vec<f64>],
    weight_exponent: f64,
) -> Result<GapReport> {
    let mut sup_gaps = Vec::with_capacity(iterates.len());
    let mut all_gaps = Vec::with_capacity(iterates.len());
    for flat in iterates {
        let p = PolicyParams::from_flat(space, flat);
        let (gaps, sup) = nash_gap(game, &p)?;
        sup_gaps.push(sup);
        all_gaps.push(gaps);
    }
    let eps = weighted_gap(&sup_gaps, weight_exponent);
    let rows = all_gaps
        .into_iter()
        .zip(sup_gaps.into_iter().zip(eps))
        .enumerate()
        .map(|(idx, (gaps, (sup_gap, eps_weighted)))| GapRow {
            k: idx + 1,
            gaps,
            sup_gap,
            eps_weighted,
        })
        .collect();
    Ok(GapReport { rows, weight_exponent })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game;
    use crate::policy::ParamKind;

    fn two_player() -> (TabularGame, ParamSpace) {
        let g = game::two_player_example();
        let s = ParamSpace::for_game(&g, ParamKind::TwoActionBox { alpha: 0.01 }).unwrap();
        (g, s)
    }

    #[test]
    fn single_action_agent_has_zero_gap() {
        let mut g = game::zero_reward_example();
        g.n_actions = vec![1, 2];
        g.transition = vec![1.0; 2];
        g.reward = vec![0.5, 0.5, 0.25, 0.25];
        g.reward_bound = 1.0;
        assert!(g.validate().is_valid());
        let space = ParamSpace::for_game(&g, ParamKind::Direct).unwrap();
        let p = space.uniform_params();
        let br = best_response_value(&g, &p, 0).unwrap();
        let j = eval::total_reward(&g, &p, 0).unwrap();
        assert!((br - j).abs() < 1e-9);
    }

    #[test]
    fn best_response_matches_exhaustive_enumeration() {
        let (g, space) = two_player();
        // Opponent pinned at its action-0 vertex.
        let p = PolicyParams::from_flat(&space, &[0.3, 0.8, 1.0, 1.0]);
        let (br, _) = best_response(&g, &p, 0).unwrap();
        // Enumerate agent 0's four deterministic rules by brute force.
        let mut best = f64::NEG_INFINITY;
        for t0 in [0.0, 1.0] {
            for t1 in [0.0, 1.0] {
                let q = PolicyParams::from_flat(&space, &[t0, t1, 1.0, 1.0]);
                best = best.max(eval::total_reward(&g, &q, 0).unwrap());
            }
        }
        assert!((br - best).abs() < 1e-9, "policy iteration {br} vs enumeration {best}");
    }

    #[test]
    fn best_response_dominates_current_value() {
        let (g, space) = two_player();
        let mut rng = seeds::stream(13, &[domains::TEST]);
        for _ in 0..100 {
            let p = space.random_params(&mut rng);
            for i in 0..2 {
                let br = best_response_value(&g, &p, i).unwrap();
                let j = eval::total_reward(&g, &p, i).unwrap();
                assert!(br - j >= -1e-9);
            }
        }
    }

    #[test]
    fn gap_invariant_under_reward_shift() {
        let (g, space) = two_player();
        let mut shifted = g.clone();
        let c = 1.5;
        let ja = shifted.joint_count();
        for s in 0..shifted.n_states {
            for j in 0..ja {
                shifted.reward[s * ja + j] += c;
            }
        }
        shifted.reward_bound += c;
        let mut rng = seeds::stream(29, &[domains::TEST]);
        for _ in 0..20 {
            let p = space.random_params(&mut rng);
            let (ga, _) = nash_gap(&g, &p).unwrap();
            let (gb, _) = nash_gap(&shifted, &p).unwrap();
            assert!((ga[0] - gb[0]).abs() < 1e-9, "agent-0 gap shifted by constant reward");
            assert!((ga[1] - gb[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn weighted_gap_examples() {
        // Constant gaps are a fixed point of the convex combination.
        let eps = weighted_gap(&[3.25; 17], 0.5);
        for e in eps {
            assert!((e - 3.25).abs() < 1e-12);
        }
        // K = 2, exponent 1/2, g = (1, 0): ε_2 = 1/(1 + √2).
        let eps = weighted_gap(&[1.0, 0.0], 0.5);
        assert!((eps[1] - 1.0 / (1.0 + 2.0f64.sqrt())).abs() < 1e-15);
        // Convex combination stays within [min, max].
        let mut rng = seeds::stream(31, &[domains::TEST]);
        let gaps: Vec<f64> = (0..50).map(|_| rand::Rng::random::<f64>(&mut rng) * 7.0).collect();
        let lo = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = gaps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for e in weighted_gap(&gaps, 0.25) {
            assert!(e >= lo - 1e-12 && e <= hi + 1e-12);
        }
    }

    #[test]
    fn svi_prime_gap_zero_field() {
        let g = game::zero_reward_example();
        let space = ParamSpace::for_game(&g, ParamKind::TwoActionBox { alpha: 0.01 }).unwrap();
        let p = space.uniform_params();
        assert_eq!(svi_prime_gap(&g, &p).unwrap(), 0.0);
    }

    #[test]
    fn svi_prime_gap_box_formula() {
        let (g, space) = two_player();
        let p = PolicyParams::from_flat(&space, &[0.2, 0.7, 0.4, 0.9]);
        let field = eval::pseudo_gradient(&g, &p).unwrap();
        let flat = p.to_flat();
        let expected: f64 = field
            .iter()
            .zip(&flat)
            .map(|(f, t)| (f * t).max(f * (t - 1.0)))
            .sum();
        assert!((svi_prime_gap(&g, &p).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn mvi_residual_zero_field() {
        let g = game::zero_reward_example();
        let space = ParamSpace::for_game(&g, ParamKind::TwoActionBox { alpha: 0.01 }).unwrap();
        let rep = mvi_residual(&g, &space, &[0.5, 0.5], 5, 100, 3).unwrap();
        assert_eq!(rep.min_residual, 0.0);
    }

    #[test]
    fn domination_rejects_nonpositive_m1() {
        let (g, space) = two_player();
        let p = space.uniform_params();
        assert!(gradient_domination_check(&g, &p, 0.0).is_err());
    }

    #[test]
    fn domination_fails_for_tiny_m1() {
        let (g, space) = two_player();
        let mut rng = seeds::stream(41, &[domains::TEST]);
        let mut any_fail = false;
        for _ in 0..50 {
            let p = space.random_params(&mut rng);
            let (ok, _) = gradient_domination_check(&g, &p, 1e-6).unwrap();
            if !ok {
                any_fail = true;
            }
        }
        assert!(any_fail, "M1 = 1e-6 must violate domination somewhere");
    }
}
