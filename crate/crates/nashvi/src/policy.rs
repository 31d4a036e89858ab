//! Parameterized stationary policies and the admissible parameter set Θ.
//!
//! Three parameterization kinds are supported:
//!
//! * `Direct` — θ\[i]\[s] is itself a distribution over `A_i`;
//! * `AlphaGreedy(α)` — π = (1−α)·θ + α/|A_i|, a convex mix with uniform
//!   giving every action probability at least α/|A_i|;
//! * `TwoActionBox(α)` — two-action agents with a scalar θ per state:
//!   π(a=0) = (1−α)θ + α/2 and π(a=1) = (1−α)(1−θ) + α/2.
//!
//! Parameter vectors serialize as flat arrays per agent in row-major
//! (state, action) order; `TwoActionBox` has one coordinate per state.

use crate::error::{Error, Result};
use crate::report::ValidationReport;
use crate::seeds::sample_categorical;
use rand::RngCore;

/// Tolerance for simplex membership of policy parameters.
pub const SIMPLEX_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamKind {
    Direct,
    AlphaGreedy { alpha: f64 },
    TwoActionBox { alpha: f64 },
}

impl ParamKind {
    pub fn alpha(&self) -> f64 {
        match self {
            ParamKind::Direct => 0.0,
            ParamKind::AlphaGreedy { alpha } | ParamKind::TwoActionBox { alpha } => *alpha,
        }
    }
}

/// Structure of one flat block of the feasible set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Block {
    /// `len` consecutive coordinates constrained to the probability simplex.
    Simplex { len: usize },
    /// One coordinate constrained to `[0, 1]`.
    UnitInterval,
}

/// The feasible parameter set Θ: per agent, a product of per-state simplices
/// (`Direct`, `AlphaGreedy`) or unit intervals (`TwoActionBox`).
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpace {
    pub kind: ParamKind,
    pub n_states: usize,
    pub n_actions: Vec<usize>,
}

impl ParamSpace {
    pub fn new(kind: ParamKind, n_states: usize, n_actions: Vec<usize>) -> Result<Self> {
        match kind {
            ParamKind::Direct => {}
            ParamKind::AlphaGreedy { alpha } => {
                if !(alpha > 0.0 && alpha < 1.0) {
                    return Err(Error::Domain(format!(
                        "alpha-greedy exploration rate must lie in (0,1), got {alpha}"
                    )));
                }
            }
            ParamKind::TwoActionBox { alpha } => {
                if !(0.0..1.0).contains(&alpha) {
                    return Err(Error::Domain(format!(
                        "two-action box alpha must lie in [0,1), got {alpha}"
                    )));
                }
                if n_actions.iter().any(|&m| m != 2) {
                    return Err(Error::Domain(
                        "two-action box parameterization requires |A_i| = 2 for every agent".into(),
                    ));
                }
            }
        }
        if n_states == 0 || n_actions.is_empty() || n_actions.iter().any(|&m| m == 0) {
            return Err(Error::Domain("empty state or action space".into()));
        }
        Ok(Self { kind, n_states, n_actions })
    }

    pub fn for_game(game: &crate::game::TabularGame, kind: ParamKind) -> Result<Self> {
        Self::new(kind, game.n_states, game.n_actions.clone())
    }

    pub fn n_agents(&self) -> usize {
        self.n_actions.len()
    }

    /// Dimension of agent `i`'s parameter vector.
    pub fn agent_dim(&self, i: usize) -> usize {
        match self.kind {
            ParamKind::TwoActionBox { .. } => self.n_states,
            _ => self.n_states * self.n_actions[i],
        }
    }

    pub fn total_dim(&self) -> usize {
        (0..self.n_agents()).map(|i| self.agent_dim(i)).sum()
    }

    /// Offset of agent `i`'s block in the concatenated flat vector.
    pub fn agent_offset(&self, i: usize) -> usize {
        (0..i).map(|m| self.agent_dim(m)).sum()
    }

    /// Constraint blocks of agent `i`'s parameter vector, in coordinate order.
    pub fn agent_blocks(&self, i: usize) -> Vec<Block> {
        match self.kind {
            ParamKind::TwoActionBox { .. } => vec![Block::UnitInterval; self.n_states],
            _ => vec![Block::Simplex { len: self.n_actions[i] }; self.n_states],
        }
    }

    /// Diameter bound `D = sqrt(Σ_i D_i²)` with `‖θ_i‖ ≤ √2·D_i`.
    ///
    /// For every kind, `sup ‖θ_i‖² = n_states` (simplex vertices or box
    /// corners), so `D_i² = n_states / 2`.
    pub fn diameter(&self) -> f64 {
        ((self.n_agents() * self.n_states) as f64 / 2.0).sqrt()
    }

    /// The center of Θ: uniform distributions (or θ = 1/2 per state).
    pub fn uniform_params(&self) -> PolicyParams {
        let theta = (0..self.n_agents())
            .map(|i| match self.kind {
                ParamKind::TwoActionBox { .. } => vec![0.5; self.n_states],
                _ => vec![1.0 / self.n_actions[i] as f64; self.n_states * self.n_actions[i]],
            })
            .collect();
        PolicyParams { space: self.clone(), theta }
    }

    /// Uniform sample from Θ (uniform on each simplex / interval).
    pub fn random_params<R: RngCore>(&self, rng: &mut R) -> PolicyParams {
        let theta = (0..self.n_agents())
            .map(|i| {
                let mut v = Vec::with_capacity(self.agent_dim(i));
                match self.kind {
                    ParamKind::TwoActionBox { .. } => {
                        for _ in 0..self.n_states {
                            v.push(rand::Rng::random::<f64>(rng));
                        }
                    }
                    _ => {
                        let m = self.n_actions[i];
                        for _ in 0..self.n_states {
                            // Exponential spacings give a uniform simplex draw.
                            let mut e: Vec<f64> = (0..m)
                                .map(|_| -(1.0 - rand::Rng::random::<f64>(rng)).ln())
                                .collect();
                            let sum: f64 = e.iter().sum();
                            for x in &mut e {
                                *x /= sum;
                            }
                            v.extend(e);
                        }
                    }
                }
                v
            })
            .collect();
        PolicyParams { space: self.clone(), theta }
    }

    /// Euclidean projection of a raw flat vector onto Θ.
    ///
    /// Per-state simplex blocks use the deterministic sort-and-threshold
    /// method; interval coordinates clamp.
    pub fn project(&self, raw: &[f64]) -> Result<PolicyParams> {
        let flat = self.project_flat(raw)?;
        Ok(PolicyParams::from_flat(self, &flat))
    }

    /// Flat-vector variant of [`project`](Self::project).
    pub fn project_flat(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.total_dim() {
            return Err(Error::Domain(format!(
                "projection input has {} coordinates, expected {}",
                raw.len(),
                self.total_dim()
            )));
        }
        let mut out = raw.to_vec();
        let mut pos = 0;
        for i in 0..self.n_agents() {
            for block in self.agent_blocks(i) {
                match block {
                    Block::UnitInterval => {
                        out[pos] = out[pos].clamp(0.0, 1.0);
                        pos += 1;
                    }
                    Block::Simplex { len } => {
                        project_simplex(&mut out[pos..pos + len]);
                        pos += len;
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Project a vector onto the probability simplex in place (sort-threshold).
///
/// Points already on the simplex (up to accumulated rounding) are returned
/// unchanged, which makes the projection exactly idempotent.
pub fn project_simplex(v: &mut [f64]) {
    let sum: f64 = v.iter().sum();
    if v.iter().all(|&x| x >= 0.0) && (sum - 1.0).abs() <= 4.0 * f64::EPSILON * v.len() as f64 {
        return;
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut acc = 0.0;
    let mut tau = 0.0;
    for (r, &u) in sorted.iter().enumerate() {
        acc += u;
        let t = (acc - 1.0) / (r as f64 + 1.0);
        if u - t > 0.0 {
            tau = t;
        } else {
            break;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - tau).max(0.0);
    }
}

/// A point of Θ: per-agent parameter vectors plus the space they live in.
///
/// Immutable value; all operations are pure, so concurrent evaluation at
/// distinct parameters is safe.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub space: ParamSpace,
    /// Per agent, the flat parameter vector (row-major (state, action)).
    pub theta: Vec<Vec<f64>>,
}

impl PolicyParams {
    /// Reassemble from a concatenated flat vector. Panics on length mismatch.
    pub fn from_flat(space: &ParamSpace, flat: &[f64]) -> Self {
        assert_eq!(flat.len(), space.total_dim(), "flat parameter length mismatch");
        let mut theta = Vec::with_capacity(space.n_agents());
        let mut pos = 0;
        for i in 0..space.n_agents() {
            let d = space.agent_dim(i);
            theta.push(flat[pos..pos + d].to_vec());
            pos += d;
        }
        Self { space: space.clone(), theta }
    }

    /// Concatenate the per-agent vectors.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.space.total_dim());
        for t in &self.theta {
            out.extend_from_slice(t);
        }
        out
    }

    pub fn validate(&self) -> ValidationReport {
        let mut rep = ValidationReport::new();
        if self.theta.len() != self.space.n_agents() {
            rep.violation(format!(
                "{} agent parameter vectors, expected {}",
                self.theta.len(),
                self.space.n_agents()
            ));
            return rep;
        }
        for (i, t) in self.theta.iter().enumerate() {
            if t.len() != self.space.agent_dim(i) {
                rep.violation(format!(
                    "agent {i} parameter vector has {} coordinates, expected {}",
                    t.len(),
                    self.space.agent_dim(i)
                ));
                continue;
            }
            let mut pos = 0;
            for (b, block) in self.space.agent_blocks(i).into_iter().enumerate() {
                match block {
                    Block::UnitInterval => {
                        let x = t[pos];
                        rep.check((-SIMPLEX_TOL..=1.0 + SIMPLEX_TOL).contains(&x), || {
                            format!("agent {i} state {b}: θ = {x} outside [0,1]")
                        });
                        pos += 1;
                    }
                    Block::Simplex { len } => {
                        let seg = &t[pos..pos + len];
                        let sum: f64 = seg.iter().sum();
                        rep.check((sum - 1.0).abs() <= SIMPLEX_TOL, || {
                            format!("agent {i} state {b}: simplex sum {sum} != 1")
                        });
                        rep.check(seg.iter().all(|&x| x >= -SIMPLEX_TOL), || {
                            format!("agent {i} state {b}: negative simplex entry")
                        });
                        pos += len;
                    }
                }
            }
        }
        rep
    }

    /// π_{θ_i}(a | s).
    pub fn action_prob(&self, i: usize, s: usize, a: usize) -> f64 {
        let m = self.space.n_actions[i];
        debug_assert!(s < self.space.n_states && a < m);
        match self.space.kind {
            ParamKind::Direct => self.theta[i][s * m + a],
            ParamKind::AlphaGreedy { alpha } => {
                (1.0 - alpha) * self.theta[i][s * m + a] + alpha / m as f64
            }
            ParamKind::TwoActionBox { alpha } => {
                let t = self.theta[i][s];
                if a == 0 {
                    (1.0 - alpha) * t + alpha / 2.0
                } else {
                    (1.0 - alpha) * (1.0 - t) + alpha / 2.0
                }
            }
        }
    }

    /// The action distribution π_{θ_i}(· | s).
    pub fn action_probs(&self, i: usize, s: usize) -> Vec<f64> {
        (0..self.space.n_actions[i])
            .map(|a| self.action_prob(i, s, a))
            .collect()
    }

    /// ∂π_{θ_i}(a|s)/∂θ_i as a dense vector over agent i's coordinates.
    ///
    /// The parameterizations are affine, so this is exact.
    pub fn grad_theta_prob(&self, i: usize, s: usize, a: usize) -> Vec<f64> {
        let mut g = vec![0.0; self.space.agent_dim(i)];
        self.accumulate_grad_prob(i, s, a, 1.0, &mut g);
        g
    }

    /// Add `w · ∂π_{θ_i}(a|s)/∂θ_i` into `out` (length `agent_dim(i)`).
    pub(crate) fn accumulate_grad_prob(&self, i: usize, s: usize, a: usize, w: f64, out: &mut [f64]) {
        let m = self.space.n_actions[i];
        match self.space.kind {
            ParamKind::Direct => out[s * m + a] += w,
            ParamKind::AlphaGreedy { alpha } => out[s * m + a] += w * (1.0 - alpha),
            ParamKind::TwoActionBox { alpha } => {
                let sign = if a == 0 { 1.0 } else { -1.0 };
                out[s] += w * sign * (1.0 - alpha);
            }
        }
    }

    /// Magnitude of the single nonzero entry of ∂π(a|s)/∂θ, identical for
    /// every (i, s, a) within a kind.
    pub(crate) fn grad_prob_coeff(&self) -> f64 {
        match self.space.kind {
            ParamKind::Direct => 1.0,
            ParamKind::AlphaGreedy { alpha } | ParamKind::TwoActionBox { alpha } => 1.0 - alpha,
        }
    }

    /// ∇_{θ_i} log π_{θ_i}(a|s). Errors when the action has zero probability
    /// (possible only for `Direct` at the simplex boundary).
    pub fn grad_log_prob(&self, i: usize, s: usize, a: usize) -> Result<Vec<f64>> {
        let p = self.action_prob(i, s, a);
        if p <= 0.0 {
            return Err(Error::Domain(format!(
                "grad_log_prob at zero-probability action (agent {i}, s={s}, a={a})"
            )));
        }
        let mut g = self.grad_theta_prob(i, s, a);
        for x in &mut g {
            *x /= p;
        }
        Ok(g)
    }

    /// Sample an action from π_{θ_i}(· | s).
    pub fn sample_action<R: RngCore>(&self, i: usize, s: usize, rng: &mut R) -> usize {
        let probs = self.action_probs(i, s);
        sample_categorical(&probs, rng)
    }

    /// Exact supremum of ‖∇ log π‖ over the feasible set, per kind.
    /// Unbounded for `Direct` (boundary), returned as infinity.
    pub fn grad_log_sup(space: &ParamSpace) -> f64 {
        match space.kind {
            ParamKind::Direct => f64::INFINITY,
            ParamKind::AlphaGreedy { alpha } => {
                let m_max = space.n_actions.iter().copied().max().unwrap_or(1) as f64;
                (1.0 - alpha) * m_max / alpha
            }
            ParamKind::TwoActionBox { alpha } => (1.0 - alpha) / (alpha / 2.0),
        }
    }
}
