//! Self-contained deterministic continuous-control environments with
//! bounded nonnegative rewards.
//!
//! Both tasks are infinite-horizon MDPs with time-limit truncation only:
//! there are no terminal states, and bootstrapping always uses the next
//! state. Actions are accepted in `[-1, 1]^act_dim` and scaled internally
//! by the task's action bound; out-of-range components are clamped and
//! flagged so the caller can keep a warning counter.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::ConfigError;

/// Static description of a task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvSpec {
    pub obs_dim: usize,
    pub act_dim: usize,
    /// Actions in `[-1, 1]` are multiplied by this bound inside `step`.
    pub action_bound: f64,
    pub episode_len: usize,
    /// Rewards always land in `[0, reward_bound]`.
    pub reward_bound: f64,
}

/// The available tasks, addressable by the config strings `pendulum` and
/// `pointreach`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    Pendulum,
    PointReach,
}

impl EnvKind {
    pub fn parse(name: &str) -> Result<Self, ConfigError> {
        match name {
            "pendulum" => Ok(Self::Pendulum),
            "pointreach" => Ok(Self::PointReach),
            other => Err(ConfigError::UnknownEnv(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Pendulum => "pendulum",
            Self::PointReach => "pointreach",
        }
    }

    pub fn spec(&self) -> EnvSpec {
        match self {
            Self::Pendulum => EnvSpec {
                obs_dim: 3,
                act_dim: 1,
                action_bound: PENDULUM_TORQUE_BOUND,
                episode_len: 200,
                reward_bound: 1.0,
            },
            Self::PointReach => EnvSpec {
                obs_dim: 4,
                act_dim: 2,
                action_bound: 1.0,
                episode_len: 100,
                reward_bound: 1.0,
            },
        }
    }

    /// Draw an initial state. Pendulum: `theta ~ U(-pi, pi)`,
    /// `theta_dot ~ U(-1, 1)`. PointReach: position `~ U(-4, 4)^2`,
    /// velocity exactly zero.
    pub fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> (EnvState, Vec<f64>) {
        let state = match self {
            Self::Pendulum => EnvState {
                vec: vec![rng.random_range(-PI..PI), rng.random_range(-1.0..1.0)],
                steps: 0,
            },
            Self::PointReach => EnvState {
                vec: vec![
                    rng.random_range(-4.0..4.0),
                    rng.random_range(-4.0..4.0),
                    0.0,
                    0.0,
                ],
                steps: 0,
            },
        };
        let obs = self.observe(&state);
        (state, obs)
    }

    pub fn observe(&self, state: &EnvState) -> Vec<f64> {
        match self {
            Self::Pendulum => vec![state.vec[0].cos(), state.vec[0].sin(), state.vec[1]],
            Self::PointReach => state.vec.clone(),
        }
    }

    /// Advance one step. Pure function of `(state, action)`.
    pub fn step(&self, state: &EnvState, action: &[f64]) -> Step {
        debug_assert_eq!(action.len(), self.spec().act_dim);
        debug_assert!(state.steps < self.spec().episode_len, "episode already truncated");
        let mut clamped = false;
        let mut clamp = |a: f64| -> f64 {
            if !(-1.0..=1.0).contains(&a) {
                clamped = true;
                a.clamp(-1.0, 1.0)
            } else {
                a
            }
        };
        match self {
            Self::Pendulum => {
                let theta = state.vec[0];
                let theta_dot = state.vec[1];
                let u = PENDULUM_TORQUE_BOUND * clamp(action[0]);
                // Reward comes from the state the action was taken in,
                // normalized so the worst reachable cost maps to 0.
                let cost = theta * theta + 0.1 * theta_dot * theta_dot + 0.001 * u * u;
                let reward = 1.0 - cost / PENDULUM_COST_MAX;

                let accel = (3.0 * PENDULUM_G / (2.0 * PENDULUM_LEN)) * theta.sin()
                    + (3.0 / (PENDULUM_MASS * PENDULUM_LEN * PENDULUM_LEN)) * u;
                let new_theta_dot =
                    (theta_dot + accel * PENDULUM_DT).clamp(-PENDULUM_SPEED_MAX, PENDULUM_SPEED_MAX);
                let new_theta = wrap_angle(theta + new_theta_dot * PENDULUM_DT);

                let next = EnvState {
                    vec: vec![new_theta, new_theta_dot],
                    steps: state.steps + 1,
                };
                let obs = self.observe(&next);
                let truncated = next.steps >= self.spec().episode_len;
                Step { state: next, obs, reward, truncated, clamped }
            }
            Self::PointReach => {
                let (px, py, vx, vy) = (state.vec[0], state.vec[1], state.vec[2], state.vec[3]);
                let ax = clamp(action[0]);
                let ay = clamp(action[1]);
                let nvx = (vx + 0.1 * ax).clamp(-1.0, 1.0);
                let nvy = (vy + 0.1 * ay).clamp(-1.0, 1.0);
                let npx = (px + 0.1 * nvx).clamp(-5.0, 5.0);
                let npy = (py + 0.1 * nvy).clamp(-5.0, 5.0);
                let reward = (-(npx * npx + npy * npy).sqrt()).exp();
                let next = EnvState {
                    vec: vec![npx, npy, nvx, nvy],
                    steps: state.steps + 1,
                };
                let obs = self.observe(&next);
                let truncated = next.steps >= self.spec().episode_len;
                Step { state: next, obs, reward, truncated, clamped }
            }
        }
    }
}

/// Pendulum constants: torque bound 2, g = 10, unit mass and length,
/// dt = 0.05, speed clamp 8.
pub const PENDULUM_TORQUE_BOUND: f64 = 2.0;
const PENDULUM_G: f64 = 10.0;
const PENDULUM_MASS: f64 = 1.0;
const PENDULUM_LEN: f64 = 1.0;
const PENDULUM_DT: f64 = 0.05;
const PENDULUM_SPEED_MAX: f64 = 8.0;
/// Largest reachable pendulum cost: pi^2 + 0.1 * 8^2 + 0.001 * 2^2.
pub const PENDULUM_COST_MAX: f64 = PI * PI + 6.4 + 0.004;

/// Environment-specific state vector plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    /// Pendulum: `[theta, theta_dot]`; PointReach: `[px, py, vx, vy]`.
    pub vec: Vec<f64>,
    pub steps: usize,
}

/// Result of one environment step.
#[derive(Debug, Clone)]
pub struct Step {
    pub state: EnvState,
    pub obs: Vec<f64>,
    pub reward: f64,
    pub truncated: bool,
    /// True if any action component fell outside `[-1, 1]`.
    pub clamped: bool,
}

/// Wrap an angle into `(-pi, pi]`.
fn wrap_angle(theta: f64) -> f64 {
    let w = (theta + PI).rem_euclid(2.0 * PI);
    if w == 0.0 {
        PI
    } else {
        w - PI
    }
}
