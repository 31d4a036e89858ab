//! Game config files.
//!
//! One TOML document per game. Indices are 0-based; `actions` lists one
//! action per agent (`[a_0, ..., a_{N-1}]`). Every `(state, actions)`
//! transition row must be given exactly once; reward entries default to zero
//! when omitted. Rows whose sums deviate from 1 by at most the validation
//! tolerance are renormalized; larger deviations are rejected.
//!
//! ```toml
//! n_agents = 2
//! n_states = 2
//! n_actions = [2, 2]
//! gamma = 0.9
//! rho = [0.5, 0.5]
//! reward_bound = 4.0
//!
//! [[transitions]]
//! state = 0
//! actions = [0, 0]
//! probs = [0.6, 0.4]
//!
//! [[rewards]]
//! agent = 0
//! state = 0
//! actions = [0, 0]
//! value = 3.0
//! ```

use crate::error::{Error, Result};
use crate::game::{TabularGame, ROW_SUM_TOL};
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GameFile {
    n_agents: usize,
    n_states: usize,
    n_actions: Vec<usize>,
    gamma: f64,
    rho: Vec<f64>,
    reward_bound: f64,
    #[serde(default)]
    transitions: Vec<TransitionRow>,
    #[serde(default)]
    rewards: Vec<RewardEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionRow {
    state: usize,
    actions: Vec<usize>,
    probs: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RewardEntry {
    agent: usize,
    state: usize,
    actions: Vec<usize>,
    value: f64,
}

fn renormalize(probs: &mut [f64], what: &str) -> Result<()> {
    if probs.iter().any(|&p| p < 0.0) {
        return Err(Error::Config(format!("{what} has a negative probability")));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > ROW_SUM_TOL {
        return Err(Error::Config(format!("{what} sums to {sum}, expected 1")));
    }
    for p in probs.iter_mut() {
        *p /= sum;
    }
    Ok(())
}

/// Parse a game config document.
pub fn parse_game(text: &str) -> Result<TabularGame> {
    let file: GameFile = toml::from_str(text).map_err(|e| Error::Config(format!("game file: {e}")))?;
    if file.n_actions.len() != file.n_agents {
        return Err(Error::Config(format!(
            "n_actions has {} entries, expected n_agents = {}",
            file.n_actions.len(),
            file.n_agents
        )));
    }
    if file.n_agents == 0 || file.n_states == 0 || file.n_actions.iter().any(|&m| m == 0) {
        return Err(Error::Config("empty agent, state or action space".into()));
    }
    let ja: usize = file.n_actions.iter().product();
    let encode = |actions: &[usize], what: &str| -> Result<usize> {
        if actions.len() != file.n_agents {
            return Err(Error::Config(format!(
                "{what}: actions list has {} entries, expected {}",
                actions.len(),
                file.n_agents
            )));
        }
        let mut idx = 0;
        let mut stride = 1;
        for (i, &a) in actions.iter().enumerate() {
            if a >= file.n_actions[i] {
                return Err(Error::Config(format!("{what}: action {a} out of range for agent {i}")));
            }
            idx += a * stride;
            stride *= file.n_actions[i];
        }
        Ok(idx)
    };

    let mut transition = vec![f64::NAN; file.n_states * ja * file.n_states];
    let mut seen = vec![false; file.n_states * ja];
    for row in &file.transitions {
        let what = format!("transition row (state={}, actions={:?})", row.state, row.actions);
        if row.state >= file.n_states {
            return Err(Error::Config(format!("{what}: state out of range")));
        }
        let j = encode(&row.actions, &what)?;
        if row.probs.len() != file.n_states {
            return Err(Error::Config(format!(
                "{what}: {} probabilities, expected {}",
                row.probs.len(),
                file.n_states
            )));
        }
        if seen[row.state * ja + j] {
            return Err(Error::Config(format!("{what}: duplicate entry")));
        }
        seen[row.state * ja + j] = true;
        let mut probs = row.probs.clone();
        renormalize(&mut probs, &what)?;
        let base = (row.state * ja + j) * file.n_states;
        transition[base..base + file.n_states].copy_from_slice(&probs);
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(Error::Config(format!(
            "missing transition row for state {} joint action {}",
            missing / ja,
            missing % ja
        )));
    }

    let mut reward = vec![0.0; file.n_agents * file.n_states * ja];
    for entry in &file.rewards {
        let what = format!(
            "reward entry (agent={}, state={}, actions={:?})",
            entry.agent, entry.state, entry.actions
        );
        if entry.agent >= file.n_agents || entry.state >= file.n_states {
            return Err(Error::Config(format!("{what}: index out of range")));
        }
        let j = encode(&entry.actions, &what)?;
        reward[(entry.agent * file.n_states + entry.state) * ja + j] = entry.value;
    }

    let mut rho = file.rho.clone();
    if rho.len() != file.n_states {
        return Err(Error::Config(format!(
            "rho has {} entries, expected {}",
            rho.len(),
            file.n_states
        )));
    }
    renormalize(&mut rho, "rho")?;

    let game = TabularGame {
        n_agents: file.n_agents,
        n_states: file.n_states,
        n_actions: file.n_actions,
        transition,
        reward,
        discount: file.gamma,
        initial_dist: rho,
        reward_bound: file.reward_bound,
    };
    let rep = game.validate();
    if !rep.is_valid() {
        return Err(Error::Config(format!("invalid game:\n{rep}")));
    }
    Ok(game)
}

/// Load a game config from disk.
pub fn load_game(path: impl AsRef<Path>) -> Result<TabularGame> {
    let text = std::fs::read_to_string(path.as_ref())?;
    parse_game(&text)
}

/// Render a game as a config document (used to ship the bundled examples).
pub fn render_game(game: &TabularGame) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let _ = writeln!(out, "n_agents = {}", game.n_agents);
    let _ = writeln!(out, "n_states = {}", game.n_states);
    let _ = writeln!(out, "n_actions = {:?}", game.n_actions);
    let _ = writeln!(out, "gamma = {}", game.discount);
    let _ = writeln!(out, "rho = {:?}", game.initial_dist);
    let _ = writeln!(out, "reward_bound = {}", game.reward_bound);
    let ja = game.joint_count();
    for s in 0..game.n_states {
        for j in 0..ja {
            let actions = game.decode_joint(j);
            let _ = writeln!(out, "\n[[transitions]]");
            let _ = writeln!(out, "state = {s}");
            let _ = writeln!(out, "actions = {actions:?}");
            let _ = writeln!(out, "probs = {:?}", game.transition_row(s, j));
        }
    }
    for i in 0..game.n_agents {
        for s in 0..game.n_states {
            for j in 0..ja {
                let v = game.reward(i, s, j);
                if v != 0.0 {
                    let actions = game.decode_joint(j);
                    let _ = writeln!(out, "\n[[rewards]]");
                    let _ = writeln!(out, "agent = {i}");
                    let _ = writeln!(out, "state = {s}");
                    let _ = writeln!(out, "actions = {actions:?}");
                    let _ = writeln!(out, "value = {v}");
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game;

    #[test]
    fn round_trip_bundled_games() {
        for g in [
            game::two_player_example(),
            game::chain_three_example(),
            game::zero_reward_example(),
        ] {
            let text = render_game(&g);
            let parsed = parse_game(&text).unwrap();
            // Loader renormalization may touch the last ulp of each row.
            for (a, b) in parsed.transition.iter().zip(&g.transition) {
                assert!((a - b).abs() < 1e-14);
            }
            assert_eq!(parsed.reward, g.reward);
            for (a, b) in parsed.initial_dist.iter().zip(&g.initial_dist) {
                assert!((a - b).abs() < 1e-14);
            }
            assert_eq!(parsed.discount, g.discount);
            assert!(parsed.validate().is_valid());
        }
    }

    #[test]
    fn rejects_bad_row_sum() {
        let g = game::two_player_example();
        let text = render_game(&g).replace("probs = [0.6, 0.4]", "probs = [0.6, 0.3]");
        let err = parse_game(&text).unwrap_err();
        assert!(err.to_string().contains("sums to"), "{err}");
    }

    #[test]
    fn rejects_missing_and_duplicate_rows() {
        let g = game::two_player_example();
        let full = render_game(&g);
        // Drop the final transitions block.
        let idx = full.rfind("[[transitions]]").unwrap();
        let truncated: String = full[..idx].to_string() + &full[full[idx..].find("\n\n").map(|o| idx + o).unwrap_or(full.len())..];
        let err = parse_game(&truncated).unwrap_err();
        assert!(err.to_string().contains("missing transition row"), "{err}");

        let dup = format!("{full}\n[[transitions]]\nstate = 0\nactions = [0, 0]\nprobs = [0.6, 0.4]\n");
        let err = parse_game(&dup).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
    }

    #[test]
    fn rejects_gamma_one() {
        let g = game::two_player_example();
        let text = render_game(&g).replace("gamma = 0.9", "gamma = 1.0");
        let err = parse_game(&text).unwrap_err();
        assert!(err.to_string().contains("discount out of range"), "{err}");
    }
}
