//! Finite discounted stochastic games in tabular form.
//!
//! Joint actions are stored as a single flattened index with agent 0
//! fastest-varying: for per-agent actions `a = (a_0, ..., a_{N-1})` the joint
//! index is `a_0 + a_1·|A_0| + a_2·|A_0||A_1| + ...`. Every transition and
//! reward table in this crate (and in game config files) uses this encoding.

use crate::error::{Error, Result};
use crate::report::ValidationReport;
use crate::seeds::sample_categorical;
use rand::RngCore;

/// Tolerance for probability-vector row sums.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// A finite `N`-agent discounted stochastic game with a time-homogeneous
/// transition kernel.
///
/// The struct is plain data; [`TabularGame::validate`] reports every violated
/// model invariant. Operations that assume validity state so in their docs.
/// Values are immutable after construction and safe to share across threads.
#[derive(Debug, Clone)]
pub struct TabularGame {
    pub n_agents: usize,
    pub n_states: usize,
    /// Actions available to each agent.
    pub n_actions: Vec<usize>,
    /// `transition[(s * JA + j) * n_states + s2]` = P(s2 | s, joint action j).
    pub transition: Vec<f64>,
    /// `reward[(i * n_states + s) * JA + j]` = r_i(s, joint action j).
    pub reward: Vec<f64>,
    /// Discount factor in (0, 1).
    pub discount: f64,
    /// Distribution of the initial state.
    pub initial_dist: Vec<f64>,
    /// Uniform bound on |r_i(s,a)|.
    pub reward_bound: f64,
}

impl TabularGame {
    /// Number of joint actions `Π_i |A_i|`.
    pub fn joint_count(&self) -> usize {
        self.n_actions.iter().product()
    }

    /// Flatten per-agent actions into the joint index (agent 0 fastest).
    pub fn encode_joint(&self, actions: &[usize]) -> usize {
        debug_assert_eq!(actions.len(), self.n_agents);
        let mut idx = 0;
        let mut stride = 1;
        for (i, &a) in actions.iter().enumerate() {
            idx += a * stride;
            stride *= self.n_actions[i];
        }
        idx
    }

    /// Inverse of [`encode_joint`](Self::encode_joint), writing into `out`.
    pub fn decode_joint_into(&self, mut j: usize, out: &mut [usize]) {
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = j % self.n_actions[i];
            j /= self.n_actions[i];
        }
    }

    pub fn decode_joint(&self, j: usize) -> Vec<usize> {
        let mut out = vec![0; self.n_agents];
        self.decode_joint_into(j, &mut out);
        out
    }

    /// Transition row P(· | s, j).
    pub fn transition_row(&self, s: usize, j: usize) -> &[f64] {
        let base = (s * self.joint_count() + j) * self.n_states;
        &self.transition[base..base + self.n_states]
    }

    pub fn reward(&self, agent: usize, s: usize, j: usize) -> f64 {
        self.reward[(agent * self.n_states + s) * self.joint_count() + j]
    }

    /// Check every model invariant and list the violations.
    ///
    /// Idempotent and side-effect free.
    pub fn validate(&self) -> ValidationReport {
        let mut rep = ValidationReport::new();
        rep.check(self.n_agents > 0, || "n_agents must be positive".into());
        rep.check(self.n_states > 0, || "n_states must be positive".into());
        rep.check(self.n_actions.len() == self.n_agents, || {
            format!(
                "n_actions has {} entries, expected {}",
                self.n_actions.len(),
                self.n_agents
            )
        });
        for (i, &m) in self.n_actions.iter().enumerate() {
            rep.check(m > 0, || format!("agent {i} has no actions"));
        }
        rep.check(
            self.discount > 0.0 && self.discount < 1.0,
            || format!("discount out of range: {} not in (0,1)", self.discount),
        );
        rep.check(self.reward_bound > 0.0, || {
            format!("reward_bound must be positive, got {}", self.reward_bound)
        });

        let ja = self.joint_count();
        if self.transition.len() != self.n_states * ja * self.n_states {
            rep.violation(format!(
                "transition table has {} entries, expected {}",
                self.transition.len(),
                self.n_states * ja * self.n_states
            ));
        } else {
            for s in 0..self.n_states {
                for j in 0..ja {
                    let row = self.transition_row(s, j);
                    if row.iter().any(|&p| p < 0.0) {
                        rep.violation(format!("transition row (s={s}, a={j}) has a negative entry"));
                    }
                    let sum: f64 = row.iter().sum();
                    rep.check((sum - 1.0).abs() <= ROW_SUM_TOL, || {
                        format!("row sum != 1: transition (s={s}, a={j}) sums to {sum}")
                    });
                }
            }
        }

        if self.initial_dist.len() != self.n_states {
            rep.violation(format!(
                "initial_dist has {} entries, expected {}",
                self.initial_dist.len(),
                self.n_states
            ));
        } else {
            if self.initial_dist.iter().any(|&p| p < 0.0) {
                rep.violation("initial_dist has a negative entry");
            }
            let sum: f64 = self.initial_dist.iter().sum();
            rep.check((sum - 1.0).abs() <= ROW_SUM_TOL, || {
                format!("row sum != 1: initial_dist sums to {sum}")
            });
        }

        if self.reward.len() != self.n_agents * self.n_states * ja {
            rep.violation(format!(
                "reward table has {} entries, expected {}",
                self.reward.len(),
                self.n_agents * self.n_states * ja
            ));
        } else {
            let max = self.reward.iter().fold(0.0f64, |m, r| m.max(r.abs()));
            rep.check(max <= self.reward_bound, || {
                format!(
                    "reward magnitude {max} exceeds reward_bound {}",
                    self.reward_bound
                )
            });
        }
        rep
    }

    /// Draw the successor state for `(s, joint action j)`.
    pub fn sample_transition<R: RngCore>(&self, s: usize, j: usize, rng: &mut R) -> Result<usize> {
        if s >= self.n_states || j >= self.joint_count() {
            return Err(Error::IndexOutOfRange(format!(
                "sample_transition(s={s}, a={j}) on a game with {} states, {} joint actions",
                self.n_states,
                self.joint_count()
            )));
        }
        Ok(sample_categorical(self.transition_row(s, j), rng))
    }

    /// Draw an initial state from `initial_dist`.
    pub fn sample_initial<R: RngCore>(&self, rng: &mut R) -> usize {
        sample_categorical(&self.initial_dist, rng)
    }
}

/// The bundled two-agent, two-state, two-action example game: state-independent
/// bimatrix rewards (both agents' first action strictly dominant), a fixed
/// action-independent kernel with rows (0.6, 0.4) and (0.7, 0.3), discount 0.9
/// and uniform initial distribution. Also shipped as `configs/two_player.cfg`.
pub fn two_player_example() -> TabularGame {
    let n_agents = 2;
    let n_states = 2;
    let n_actions = vec![2, 2];
    let ja = 4;
    // Joint index j = a0 + 2*a1.
    let r0 = [3.0, 0.0, 4.0, 2.0]; // agent 0 payoff per joint action
    let r1 = [3.0, 4.0, 0.0, 2.0];
    let mut reward = vec![0.0; n_agents * n_states * ja];
    for s in 0..n_states {
        for j in 0..ja {
            reward[(s) * ja + j] = r0[j];
            reward[(n_states + s) * ja + j] = r1[j];
        }
    }
    let rows = [[0.6, 0.4], [0.7, 0.3]];
    let mut transition = vec![0.0; n_states * ja * n_states];
    for s in 0..n_states {
        for j in 0..ja {
            let base = (s * ja + j) * n_states;
            transition[base] = rows[s][0];
            transition[base + 1] = rows[s][1];
        }
    }
    TabularGame {
        n_agents,
        n_states,
        n_actions,
        transition,
        reward,
        discount: 0.9,
        initial_dist: vec![0.5, 0.5],
        reward_bound: 4.0,
    }
}

/// A three-state game with an action-dependent kernel and asymmetric action
/// counts (2 and 3). Exercises the general code paths that the two-player
/// example (whose kernel ignores actions) cannot. Shipped as
/// `configs/chain_three.cfg`.
pub fn chain_three_example() -> TabularGame {
    let n_agents = 2;
    let n_states = 3;
    let n_actions = vec![2, 3];
    let ja = 6;
    let mut transition = vec![0.0; n_states * ja * n_states];
    let mut reward = vec![0.0; n_agents * n_states * ja];
    for s in 0..n_states {
        for j in 0..ja {
            let a0 = j % 2;
            let a1 = j / 2;
            // Drift right when the agents agree in parity, left otherwise.
            let up = if a0 == a1 % 2 { 0.7 } else { 0.25 };
            let next = (s + 1) % n_states;
            let prev = (s + n_states - 1) % n_states;
            let base = (s * ja + j) * n_states;
            transition[base + next] += up;
            transition[base + prev] += 0.2;
            transition[base + s] += 0.8 - up;
            reward[s * ja + j] = (s as f64 + 1.0) * 0.5 - (a0 as f64) + 0.5 * (a1 as f64);
            reward[(n_states + s) * ja + j] = 1.0 - (s as f64) * 0.4 + (a0 as f64) - (a1 as f64) * 0.3;
        }
    }
    TabularGame {
        n_agents,
        n_states,
        n_actions,
        transition,
        reward,
        discount: 0.9,
        initial_dist: vec![0.6, 0.3, 0.1],
        reward_bound: 3.0,
    }
}

/// Two agents, one state, all rewards zero. Shipped as `configs/zero_reward.cfg`.
pub fn zero_reward_example() -> TabularGame {
    TabularGame {
        n_agents: 2,
        n_states: 1,
        n_actions: vec![2, 2],
        transition: vec![1.0; 4],
        reward: vec![0.0; 8],
        discount: 0.9,
        initial_dist: vec![1.0],
        reward_bound: 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds;

    #[test]
    fn joint_encoding_is_agent0_fastest() {
        let g = chain_three_example();
        assert_eq!(g.encode_joint(&[1, 0]), 1);
        assert_eq!(g.encode_joint(&[0, 1]), 2);
        assert_eq!(g.encode_joint(&[1, 2]), 5);
        for j in 0..g.joint_count() {
            assert_eq!(g.encode_joint(&g.decode_joint(j)), j);
        }
    }

    #[test]
    fn bundled_games_are_valid() {
        assert!(two_player_example().validate().is_valid());
        assert!(chain_three_example().validate().is_valid());
        assert!(zero_reward_example().validate().is_valid());
    }

    #[test]
    fn validate_reports_row_sum_violation() {
        let mut g = two_player_example();
        g.transition[0] = 0.6;
        g.transition[1] = 0.3;
        let rep = g.validate();
        assert!(!rep.is_valid());
        assert!(rep.violations().iter().any(|v| v.contains("row sum != 1")));
    }

    #[test]
    fn validate_reports_discount_out_of_range() {
        let mut g = two_player_example();
        g.discount = 1.0;
        let rep = g.validate();
        assert!(rep.violations().iter().any(|v| v.contains("discount out of range")));
    }

    #[test]
    fn validate_is_idempotent() {
        let g = two_player_example();
        let a = g.validate();
        let b = g.validate();
        assert_eq!(a.violations(), b.violations());
    }

    #[test]
    fn dirac_row_always_hits() {
        let mut g = zero_reward_example();
        g.n_states = 2;
        g.initial_dist = vec![1.0, 0.0];
        g.transition = {
            // Both states jump to state 0 deterministically.
            let mut t = vec![0.0; 2 * 4 * 2];
            for s in 0..2 {
                for j in 0..4 {
                    t[(s * 4 + j) * 2] = 1.0;
                }
            }
            t
        };
        g.reward = vec![0.0; 2 * 2 * 4];
        assert!(g.validate().is_valid());
        let mut rng = seeds::stream(3, &[seeds::domains::TEST]);
        for _ in 0..200 {
            assert_eq!(g.sample_transition(0, 0, &mut rng).unwrap(), 0);
            assert_eq!(g.sample_initial(&mut rng), 0);
        }
    }

    #[test]
    fn sample_transition_rejects_bad_indices() {
        let g = two_player_example();
        let mut rng = seeds::stream(3, &[seeds::domains::TEST]);
        assert!(g.sample_transition(2, 0, &mut rng).is_err());
        assert!(g.sample_transition(0, 4, &mut rng).is_err());
    }
}
