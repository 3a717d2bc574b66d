//! Scripted controllers used to validate the environment and the evaluation
//! protocol.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::sim::{Action, EnvConfig, EpisodeState, Observation};

pub trait Policy {
    fn act(&mut self, state: &EpisodeState, obs: &Observation, cfg: &EnvConfig) -> Action;
}

/// Steers straight at the ground-truth target: turn while the target lies
/// more than half a turn increment off the heading, otherwise move forward.
#[derive(Debug, Clone, Copy, Default)]
pub struct OraclePolicy;

impl OraclePolicy {
    pub fn choose(state: &EpisodeState, cfg: &EnvConfig) -> Action {
        let bearing = state.pose.bearing_to(state.target().position);
        if bearing.abs() > 0.5 * cfg.turn_delta {
            if bearing > 0.0 {
                Action::TurnLeft
            } else {
                Action::TurnRight
            }
        } else {
            Action::MoveForward
        }
    }
}

impl Policy for OraclePolicy {
    fn act(&mut self, state: &EpisodeState, _obs: &Observation, cfg: &EnvConfig) -> Action {
        OraclePolicy::choose(state, cfg)
    }
}

/// Uniform over the four actions.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        RandomPolicy {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn draw(&mut self) -> Action {
        Action::ALL[self.rng.gen_range(0..Action::ALL.len())]
    }
}

impl Policy for RandomPolicy {
    fn act(&mut self, _state: &EpisodeState, _obs: &Observation, _cfg: &EnvConfig) -> Action {
        self.draw()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NoOpPolicy;

impl Policy for NoOpPolicy {
    fn act(&mut self, _state: &EpisodeState, _obs: &Observation, _cfg: &EnvConfig) -> Action {
        Action::NoOp
    }
}

/// Policy selector; builds a fresh instance per episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Oracle,
    Random,
    NoOp,
}

impl PolicyKind {
    pub fn build(self, episode_seed: u64) -> Box<dyn Policy + Send> {
        match self {
            PolicyKind::Oracle => Box::new(OraclePolicy),
            PolicyKind::Random => Box::new(RandomPolicy::new(episode_seed)),
            PolicyKind::NoOp => Box::new(NoOpPolicy),
        }
    }
}
