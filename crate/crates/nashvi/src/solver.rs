//! The two-loop learning procedure: outer proximal updates of the
//! regularized field, inner single-call extra-gradient iterations, the final
//! half-step, and the weighted random output index τ_K.
//!
//! Exact mode evaluates the pseudo gradient by dynamic programming and reuses
//! each fresh evaluation as the next iteration's extrapolation value (the
//! single-call property). Stochastic mode draws a fresh G(PO)MDP estimate at
//! every prox line and at the final half-step.

use crate::error::{Error, Result};
use crate::estimator::gpomdp_estimate;
use crate::eval;
use crate::game::TabularGame;
use crate::policy::{ParamSpace, PolicyParams};
use crate::report::ValidationReport;
use crate::seeds::{self, domains};
use rand::RngCore;
use std::time::{Duration, Instant};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Exact,
    Stochastic,
}

/// Trajectory count per estimator call in stochastic mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum K1Rule {
    Fixed(usize),
    /// `K₁ = k + 1` at outer iteration `k` (couples sample size to the index).
    OuterPlusOne,
}

impl K1Rule {
    pub fn at(&self, outer_k: usize) -> usize {
        match self {
            K1Rule::Fixed(n) => *n,
            K1Rule::OuterPlusOne => outer_k + 1,
        }
    }
}

/// Inner iteration schedule H_k.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerSchedule {
    /// H_k = k (the default).
    OuterIndex,
    Fixed(usize),
}

impl InnerSchedule {
    pub fn at(&self, outer_k: usize) -> usize {
        match self {
            InnerSchedule::OuterIndex => outer_k,
            InnerSchedule::Fixed(h) => *h,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub mode: Mode,
    /// Lipschitz constant of F used to size every step.
    pub lipschitz: f64,
    /// Proximal weight β ∈ (0, 1/L).
    pub beta: f64,
    /// Constant inner step size for exact mode.
    pub exact_eta: f64,
    /// Outer iteration count K.
    pub outer_iters: usize,
    pub inner_schedule: InnerSchedule,
    /// Weight exponent of γ_k = k^exponent (1/2 exact, 1/4 stochastic).
    pub weight_exponent: f64,
    /// Stochastic-mode constants l₂ ≥ max{1/β−L, 6(L²+1/β²)} and
    /// l₁ = min{1/(2√l₂), 1/(4l₂)}; the inner step is η_h = l₁/h^{2/3}.
    pub stoch_l2: f64,
    pub stoch_l1: f64,
    pub k1_rule: K1Rule,
    /// Estimator horizon T.
    pub horizon: usize,
    pub seed: u64,
    /// Cap on the total number of inner iterations across the whole run.
    pub max_total_inner: usize,
}

impl SolverConfig {
    /// The three step-size window expressions of the exact inner loop.
    pub fn eta_window(lipschitz: f64, beta: f64) -> (f64, f64, f64) {
        let mu = 1.0 / beta - lipschitz;
        let c = lipschitz * lipschitz + 1.0 / (beta * beta);
        let w1 = 1.0 / mu;
        let w2 = (-mu + (mu * mu + 32.0 * c).sqrt()) / 16.0;
        let w3 = (-mu + (mu * mu + 8.0 * c).sqrt()) / 32.0;
        (w1, w2, w3)
    }

    /// η̃ = 1 / (2 sqrt(L² + 1/β²)), the final half-step size.
    pub fn eta_tilde(&self) -> f64 {
        1.0 / (2.0 * (self.lipschitz.powi(2) + self.beta.powi(2).recip()).sqrt())
    }

    /// Inner step size at inner index `h` (1-based).
    pub fn inner_eta(&self, h: usize) -> f64 {
        match self.mode {
            Mode::Exact => self.exact_eta,
            Mode::Stochastic => self.stoch_l1 / (h as f64).powf(2.0 / 3.0),
        }
    }

    /// Exact-mode defaults: β = 0.5/L, η = 0.9 · min(window), γ_k = k^{1/2}.
    pub fn exact_defaults(lipschitz: f64, outer_iters: usize, seed: u64) -> Self {
        let beta = 0.5 / lipschitz;
        let (w1, w2, w3) = Self::eta_window(lipschitz, beta);
        Self {
            mode: Mode::Exact,
            lipschitz,
            beta,
            exact_eta: 0.9 * w1.min(w2).min(w3),
            outer_iters,
            inner_schedule: InnerSchedule::OuterIndex,
            weight_exponent: 0.5,
            stoch_l2: 0.0,
            stoch_l1: 0.0,
            k1_rule: K1Rule::OuterPlusOne,
            horizon: 0,
            seed,
            max_total_inner: usize::MAX,
        }
    }

    /// Stochastic-mode defaults: β = 0.5/L, l₂ at its lower bound,
    /// γ_k = k^{1/4}.
    pub fn stochastic_defaults(
        lipschitz: f64,
        outer_iters: usize,
        k1_rule: K1Rule,
        horizon: usize,
        seed: u64,
    ) -> Self {
        let beta = 0.5 / lipschitz;
        let mu = 1.0 / beta - lipschitz;
        let c = lipschitz * lipschitz + 1.0 / (beta * beta);
        let l2 = mu.max(6.0 * c);
        let l1 = (0.5 / l2.sqrt()).min(0.25 / l2);
        let (w1, w2, w3) = Self::eta_window(lipschitz, beta);
        Self {
            mode: Mode::Stochastic,
            lipschitz,
            beta,
            exact_eta: 0.9 * w1.min(w2).min(w3),
            outer_iters,
            inner_schedule: InnerSchedule::OuterIndex,
            weight_exponent: 0.25,
            stoch_l2: l2,
            stoch_l1: l1,
            k1_rule,
            horizon,
            seed,
            max_total_inner: usize::MAX,
        }
    }

    /// Check every configuration invariant; report-style.
    pub fn validate(&self) -> ValidationReport {
        let mut rep = ValidationReport::new();
        rep.check(self.lipschitz > 0.0, || {
            format!("lipschitz constant must be positive, got {}", self.lipschitz)
        });
        rep.check(
            self.beta > 0.0 && self.beta * self.lipschitz < 1.0,
            || format!("beta out of range: need beta in (0, 1/L), got beta={}", self.beta),
        );
        rep.check(self.outer_iters >= 1, || "outer iteration count K must be >= 1".into());
        rep.check(
            self.weight_exponent > 0.0,
            || format!("weight exponent must be positive, got {}", self.weight_exponent),
        );
        if self.beta > 0.0 && self.beta * self.lipschitz < 1.0 {
            match self.mode {
                Mode::Exact => {
                    let (w1, w2, w3) = Self::eta_window(self.lipschitz, self.beta);
                    let win = w1.min(w2).min(w3);
                    rep.check(self.exact_eta > 0.0 && self.exact_eta < win, || {
                        format!(
                            "eta out of range: need eta in (0, {win:.6}), got {}",
                            self.exact_eta
                        )
                    });
                }
                Mode::Stochastic => {
                    let mu = 1.0 / self.beta - self.lipschitz;
                    let c = self.lipschitz.powi(2) + self.beta.powi(2).recip();
                    let lower = mu.max(6.0 * c);
                    rep.check(self.stoch_l2 >= lower - 1e-12, || {
                        format!("l2 below its lower bound: {} < {lower}", self.stoch_l2)
                    });
                    let l1 = (0.5 / self.stoch_l2.sqrt()).min(0.25 / self.stoch_l2);
                    rep.check((self.stoch_l1 - l1).abs() <= 1e-12 * l1.max(1.0), || {
                        format!("l1 != min(1/(2*sqrt(l2)), 1/(4*l2)): {} vs {l1}", self.stoch_l1)
                    });
                    rep.check(self.horizon >= 1, || "estimator horizon T must be >= 1".into());
                    if let K1Rule::Fixed(n) = self.k1_rule {
                        rep.check(n >= 1, || "K1 must be >= 1".into());
                    }
                }
            }
        }
        rep
    }

    /// Weights γ_k = k^exponent for k = 1..K (γ_0 = 0 by convention).
    pub fn weights(&self) -> Vec<f64> {
        (1..=self.outer_iters)
            .map(|k| (k as f64).powf(self.weight_exponent))
            .collect()
    }
}

/// One proximal step: `argmin_{θ∈Θ} { ⟨2η g, θ⟩ + ‖θ − z‖² } = Π_Θ(z − η g)`.
pub fn prox_step(space: &ParamSpace, z: &[f64], g: &[f64], eta: f64) -> Result<Vec<f64>> {
    if z.len() != g.len() {
        return Err(Error::Domain(format!(
            "prox_step shape mismatch: point has {} coordinates, field {}",
            z.len(),
            g.len()
        )));
    }
    let raw: Vec<f64> = z.iter().zip(g).map(|(zi, gi)| zi - eta * gi).collect();
    space.project_flat(&raw)
}

/// Diagnostics of one outer iteration.
#[derive(Debug, Clone)]
pub struct OuterDiagnostics {
    /// ‖θ^{H_k+1} − θ^{H_k}‖ at the end of the inner loop.
    pub final_inner_step: f64,
    /// Fresh pseudo-gradient evaluations (exact) or estimator calls
    /// (stochastic) consumed by this outer iteration, half-step included.
    pub field_evals: usize,
}

/// Record of a full run: iterate sequence θ_1..θ_{K+1}, diagnostics, τ_K.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub mode: Mode,
    /// θ_1..θ_{K+1} as flat vectors; every entry lies in Θ.
    pub iterates: Vec<Vec<f64>>,
    pub diagnostics: Vec<OuterDiagnostics>,
    /// Weights γ_1..γ_K used for τ_K and the gap aggregates.
    pub weights: Vec<f64>,
    /// γ_0 = 0 convention recorded for completeness.
    pub gamma_zero: f64,
    /// Sampled output index τ_K ∈ {1, ..., K} (1-based).
    pub tau: usize,
    pub seed: u64,
    pub wall_time: Duration,
}

impl RunRecord {
    /// The algorithm output θ_{τ_K}.
    pub fn output(&self) -> &[f64] {
        &self.iterates[self.tau - 1]
    }

    pub fn final_iterate(&self) -> &[f64] {
        &self.iterates[self.iterates.len() - 1]
    }
}

/// Draw τ_K with P(τ_K = k) = γ_k / Σ γ_k; returns a 1-based index.
pub fn sample_tau<R: RngCore>(weights: &[f64], rng: &mut R) -> Result<usize> {
    if weights.is_empty() {
        return Err(Error::Domain("sample_tau needs at least one weight".into()));
    }
    if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
        return Err(Error::Domain("sample_tau weights must be positive and finite".into()));
    }
    Ok(seeds::sample_categorical(weights, rng) + 1)
}

/// Inner single-call extra-gradient loop (exact mode).
///
/// `field_k` is the regularized field F_k. Runs H iterations from
/// `θ¹ = z¹ = start` with constant step η, reusing each fresh evaluation
/// (one evaluation per iteration after warm-up). Returns
/// `(θ^{H+1}, z^{H+1}, evals, ‖θ^{H+1} − θ^H‖)`.
pub fn inner_loop_exact<F>(
    space: &ParamSpace,
    mut field_k: F,
    start: &[f64],
    h_count: usize,
    eta: f64,
) -> Result<(Vec<f64>, Vec<f64>, usize, f64)>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let mut theta = start.to_vec();
    let mut z = start.to_vec();
    let mut g = field_k(&theta)?;
    let mut evals = 1;
    let mut last_step = 0.0;
    for _h in 1..=h_count {
        let theta_next = prox_step(space, &z, &g, eta)?;
        let g_next = field_k(&theta_next)?;
        evals += 1;
        z = prox_step(space, &z, &g_next, eta)?;
        last_step = norm_diff(&theta_next, &theta);
        theta = theta_next;
        g = g_next;
    }
    Ok((theta, z, evals, last_step))
}

/// Inner loop with fresh (noisy) field draws at both prox lines and a
/// per-iteration step size η_h. Used by stochastic mode.
pub fn inner_loop_fresh<F>(
    space: &ParamSpace,
    mut field_k: F,
    start: &[f64],
    h_count: usize,
    mut eta_h: impl FnMut(usize) -> f64,
) -> Result<(Vec<f64>, Vec<f64>, usize, f64)>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let mut theta = start.to_vec();
    let mut z = start.to_vec();
    let mut evals = 0;
    let mut last_step = 0.0;
    for h in 1..=h_count {
        let eta = eta_h(h);
        let g = field_k(&theta)?;
        let theta_next = prox_step(space, &z, &g, eta)?;
        let g_next = field_k(&theta_next)?;
        evals += 2;
        z = prox_step(space, &z, &g_next, eta)?;
        last_step = norm_diff(&theta_next, &theta);
        theta = theta_next;
    }
    Ok((theta, z, evals, last_step))
}

fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// The final half-step of an outer iteration:
/// `θ_{k+1} = Π_Θ(z_final − η̃ F_k(z_final))`.
pub fn outer_step<F>(
    space: &ParamSpace,
    mut field_k: F,
    z_final: &[f64],
    eta_tilde: f64,
) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let g = field_k(z_final)?;
    prox_step(space, z_final, &g, eta_tilde)
}

fn check_config(cfg: &SolverConfig, expected: Mode) -> Result<()> {
    if cfg.mode != expected {
        return Err(Error::Config(format!("config mode {:?} does not match algorithm", cfg.mode)));
    }
    let rep = cfg.validate();
    if !rep.is_valid() {
        return Err(Error::Config(format!("invalid solver config:\n{rep}")));
    }
    Ok(())
}

fn run_two_loop(
    game: &TabularGame,
    space: &ParamSpace,
    cfg: &SolverConfig,
    init: Option<&PolicyParams>,
) -> Result<RunRecord> {
    let start = Instant::now();
    let init = match init {
        Some(p) => p.clone(),
        None => space.uniform_params(),
    };
    let rep = init.validate();
    if !rep.is_valid() {
        return Err(Error::Domain(format!("initial parameters infeasible:\n{rep}")));
    }
    let eta_tilde = cfg.eta_tilde();
    let mut theta_k = init.to_flat();
    let mut iterates = vec![theta_k.clone()];
    let mut diagnostics = Vec::with_capacity(cfg.outer_iters);
    let mut total_inner = 0usize;
    // One counter addresses every estimator call of the run.
    let mut call_index: u64 = 0;

    for k in 1..=cfg.outer_iters {
        let h_k = cfg.inner_schedule.at(k);
        total_inner = total_inner.saturating_add(h_k);
        if total_inner > cfg.max_total_inner {
            return Err(Error::Config(format!(
                "total inner iterations exceed the configured cap {}",
                cfg.max_total_inner
            )));
        }
        let reg = eval::RegularizedField::new(cfg.beta, cfg.lipschitz, theta_k.clone())?;

        let (evals, final_inner_step, theta_next) = match cfg.mode {
            Mode::Exact => {
                let mut field_k = |flat: &[f64]| -> Result<Vec<f64>> {
                    let p = PolicyParams::from_flat(space, flat);
                    Ok(reg.apply(&eval::pseudo_gradient(game, &p)?, flat))
                };
                let (_, z, inner_evals, step) =
                    inner_loop_exact(space, &mut field_k, &theta_k, h_k, cfg.exact_eta)?;
                let next = outer_step(space, &mut field_k, &z, eta_tilde)?;
                (inner_evals + 1, step, next)
            }
            Mode::Stochastic => {
                let k1 = cfg.k1_rule.at(k);
                let mut calls = 0usize;
                let mut field_k = |flat: &[f64]| -> Result<Vec<f64>> {
                    let p = PolicyParams::from_flat(space, flat);
                    let est = gpomdp_estimate(game, &p, cfg.horizon, k1, cfg.seed, call_index)?;
                    call_index += 1;
                    calls += 1;
                    Ok(reg.apply(&est.field, flat))
                };
                let (_, z, _, step) =
                    inner_loop_fresh(space, &mut field_k, &theta_k, h_k, |h| cfg.inner_eta(h))?;
                let next = outer_step(space, &mut field_k, &z, eta_tilde)?;
                (calls, step, next)
            }
        };
        theta_k = theta_next;
        iterates.push(theta_k.clone());
        diagnostics.push(OuterDiagnostics { final_inner_step, field_evals: evals });
    }

    let weights = cfg.weights();
    let mut tau_rng = seeds::stream(cfg.seed, &[domains::TAU]);
    let tau = sample_tau(&weights, &mut tau_rng)?;
    Ok(RunRecord {
        mode: cfg.mode,
        iterates,
        diagnostics,
        weights,
        gamma_zero: 0.0,
        tau,
        seed: cfg.seed,
        wall_time: start.elapsed(),
    })
}

/// Exact-gradient learning: K outer proximal updates, each solved by the
/// single-call extra-gradient inner loop, with output index τ_K drawn with
/// weights γ_k = k^{1/2}.
pub fn run_algorithm1(
    game: &TabularGame,
    space: &ParamSpace,
    cfg: &SolverConfig,
    init: Option<&PolicyParams>,
) -> Result<RunRecord> {
    check_config(cfg, Mode::Exact)?;
    run_two_loop(game, space, cfg, init)
}

/// Estimated-gradient learning: the same two-loop scheme with fresh G(PO)MDP
/// estimates at every prox line and the final half-step, η_h = l₁/h^{2/3},
/// and output weights γ_k = k^{1/4}.
pub fn run_algorithm2(
    game: &TabularGame,
    space: &ParamSpace,
    cfg: &SolverConfig,
    init: Option<&PolicyParams>,
) -> Result<RunRecord> {
    check_config(cfg, Mode::Stochastic)?;
    run_two_loop(game, space, cfg, init)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game;
    use crate::policy::ParamKind;

    fn box_space() -> ParamSpace {
        ParamSpace::new(ParamKind::TwoActionBox { alpha: 0.01 }, 2, vec![2, 2]).unwrap()
    }

    #[test]
    fn eta_window_frozen_values() {
        // Independent transcription of the three window expressions.
        let (w1, w2, w3) = SolverConfig::eta_window(5.63, 0.5 / 5.63);
        assert!((w1 - 0.17761989342806395).abs() < 1e-15);
        assert!((w2 - 4.112918222045675).abs() < 1e-12);
        assert!((w3 - 0.9506121705233418).abs() < 1e-13);
        let cfg = SolverConfig::exact_defaults(5.63, 10, 0);
        assert!(cfg.validate().is_valid());
        assert!((cfg.eta_tilde() - 0.039717015586141914).abs() < 1e-15);
        // A midpoint of the window is accepted.
        let mut mid = cfg.clone();
        mid.exact_eta = 0.5 * w1.min(w2).min(w3);
        assert!(mid.validate().is_valid());
    }

    #[test]
    fn validate_rejects_beta_boundary() {
        let mut cfg = SolverConfig::exact_defaults(5.63, 10, 0);
        cfg.beta = 1.0 / 5.63;
        let rep = cfg.validate();
        assert!(rep.violations().iter().any(|v| v.contains("beta out of range")));
    }

    #[test]
    fn validate_rejects_low_l2() {
        let mut cfg = SolverConfig::stochastic_defaults(5.63, 10, K1Rule::OuterPlusOne, 20, 0);
        assert!(cfg.validate().is_valid());
        assert!((cfg.stoch_l2 - 950.9069999999999).abs() < 1e-9);
        assert!((cfg.stoch_l1 - 0.0002629068878449733).abs() < 1e-15);
        cfg.stoch_l2 -= 1.0;
        let rep = cfg.validate();
        assert!(rep.violations().iter().any(|v| v.contains("l2 below its lower bound")));
    }

    #[test]
    fn prox_step_basics() {
        let space = box_space();
        let z = vec![0.5, 0.5, 0.5, 0.5];
        // Zero field: projection of z (already feasible).
        let p = prox_step(&space, &z, &[0.0; 4], 0.3).unwrap();
        assert_eq!(p, z);
        // Small step stays interior and equals z - eta*g exactly.
        let g = vec![0.1, -0.2, 0.3, 0.0];
        let q = prox_step(&space, &z, &g, 0.5).unwrap();
        for c in 0..4 {
            assert!((q[c] - (z[c] - 0.5 * g[c])).abs() < 1e-15);
        }
        assert!(prox_step(&space, &z, &[0.0; 3], 0.1).is_err());
    }

    #[test]
    fn inner_loop_zero_field_is_fixed_point() {
        let space = box_space();
        let start = vec![0.3, 0.6, 0.2, 0.9];
        let (theta, z, evals, step) =
            inner_loop_exact(&space, |_| Ok(vec![0.0; 4]), &start, 12, 0.1).unwrap();
        assert_eq!(theta, start);
        assert_eq!(z, start);
        assert_eq!(evals, 13);
        assert_eq!(step, 0.0);
    }

    #[test]
    fn inner_loop_affine_field_contracts_geometrically() {
        // F_k(θ) = θ − c is 1-strongly monotone and 1-Lipschitz, so the
        // proof's contraction factor is 1 − η·1 per iteration.
        let space = box_space();
        let c = vec![0.4, 0.6, 0.55, 0.45];
        let cc = c.clone();
        let eta = 0.2;
        let h = 40;
        let start = vec![0.9, 0.1, 0.2, 0.8];
        let mut dists = Vec::new();
        for hh in 1..=h {
            let (_, z, _, _) = inner_loop_exact(
                &space,
                |x: &[f64]| Ok(x.iter().zip(&cc).map(|(a, b)| a - b).collect()),
                &start,
                hh,
                eta,
            )
            .unwrap();
            dists.push(norm_diff(&z, &c));
        }
        assert!(dists[h - 1] < 1e-2, "converges to c, final dist {}", dists[h - 1]);
        // Fitted per-iteration contraction at least η(1/β − L) = η·1.
        let fitted = (dists[h - 1] / dists[9]).powf(1.0 / (h as f64 - 10.0));
        assert!(fitted <= 1.0 - eta + 0.05, "fitted rate {fitted}");
    }

    #[test]
    fn outer_step_zero_field_projects() {
        let space = box_space();
        let z = vec![0.2, 0.8, 0.4, 0.6];
        let out = outer_step(&space, |_| Ok(vec![0.0; 4]), &z, 0.05).unwrap();
        assert_eq!(out, z);
    }

    #[test]
    fn sample_tau_degenerate_and_bad_weights() {
        let mut rng = seeds::stream(3, &[domains::TEST]);
        for _ in 0..50 {
            assert_eq!(sample_tau(&[1.0], &mut rng).unwrap(), 1);
        }
        assert!(sample_tau(&[], &mut rng).is_err());
        assert!(sample_tau(&[1.0, 0.0], &mut rng).is_err());
        assert!(sample_tau(&[1.0, -0.5], &mut rng).is_err());
        assert!(sample_tau(&[1.0, f64::NAN], &mut rng).is_err());
    }

    #[test]
    fn algorithm1_k1_degenerate() {
        let g = game::two_player_example();
        let space = box_space();
        let cfg = SolverConfig::exact_defaults(5.63, 1, 42);
        let rec = run_algorithm1(&g, &space, &cfg, None).unwrap();
        assert_eq!(rec.iterates.len(), 2);
        assert_eq!(rec.tau, 1);
        let p = PolicyParams::from_flat(&space, rec.final_iterate());
        assert!(p.validate().is_valid());
    }

    #[test]
    fn field_eval_accounting() {
        let g = game::two_player_example();
        let space = box_space();
        let cfg = SolverConfig::exact_defaults(5.63, 5, 1);
        let rec = run_algorithm1(&g, &space, &cfg, None).unwrap();
        // Inner loop: H_k + 1 fresh evaluations (single-call caching);
        // the final half-step adds one more.
        for (k, d) in rec.diagnostics.iter().enumerate() {
            assert_eq!(d.field_evals, (k + 1) + 2);
        }

        let mut cfg2 = SolverConfig::stochastic_defaults(5.63, 4, K1Rule::Fixed(8), 5, 1);
        cfg2.weight_exponent = 0.25;
        let rec2 = run_algorithm2(&g, &space, &cfg2, None).unwrap();
        for (k, d) in rec2.diagnostics.iter().enumerate() {
            assert_eq!(d.field_evals, 2 * (k + 1) + 1);
        }
    }

    #[test]
    fn zero_reward_stochastic_run_stays_at_start() {
        // With F ≡ 0 the proximal term anchors every iterate at θ_1.
        let g = game::zero_reward_example();
        let space = ParamSpace::new(ParamKind::TwoActionBox { alpha: 0.01 }, 1, vec![2, 2]).unwrap();
        let cfg = SolverConfig::stochastic_defaults(1.0, 6, K1Rule::Fixed(4), 3, 9);
        let rec = run_algorithm2(&g, &space, &cfg, None).unwrap();
        for it in &rec.iterates {
            for (a, b) in it.iter().zip(rec.iterates[0].iter()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let g = game::two_player_example();
        let space = box_space();
        let cfg = SolverConfig::stochastic_defaults(5.63, 6, K1Rule::OuterPlusOne, 8, 77);
        let a = run_algorithm2(&g, &space, &cfg, None).unwrap();
        let b = run_algorithm2(&g, &space, &cfg, None).unwrap();
        assert_eq!(a.iterates, b.iterates);
        assert_eq!(a.tau, b.tau);
    }
}
