//! Discrete-time navigation episodes over a mapped scene.
//!
//! Each step applies one of four actions, advances the tick counter, checks
//! contact against every object's reach radius, and hands out rewards from
//! the configured scheme. Episodes end on contact or after `timeout` steps.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_6};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::language::tokenize;
use crate::mapping::{EnvObject, MappedScene, ObjectKind, Pose};
use crate::program::InstructionRecord;
use crate::scene::{Color, ObjectId, Size, Vec2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("instruction is for scene {instruction} but the mapped scene is {scene}")]
    SceneMismatch { instruction: u64, scene: u64 },
    #[error("target object {0} is not in the scene")]
    UnknownTarget(ObjectId),
    #[error("episode already finished")]
    EpisodeFinished,
    #[error("action code {0} is outside 0..=3")]
    InvalidAction(u8),
    #[error("invalid environment config: {0}")]
    InvalidConfig(String),
}

/// Reward constants. Sparse pays only on termination; dense also charges
/// every step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardScheme {
    #[default]
    Sparse,
    Dense,
}

impl RewardScheme {
    pub fn correct(self) -> f64 {
        match self {
            RewardScheme::Sparse => 1.0,
            RewardScheme::Dense => 10.0,
        }
    }

    pub fn wrong(self) -> f64 {
        match self {
            RewardScheme::Sparse => -0.2,
            RewardScheme::Dense => -5.0,
        }
    }

    pub fn timeout(self) -> f64 {
        0.0
    }

    pub fn per_step(self) -> f64 {
        match self {
            RewardScheme::Sparse => 0.0,
            RewardScheme::Dense => -0.1,
        }
    }

    pub fn terminal_bonus(self, outcome: Outcome) -> f64 {
        match outcome {
            Outcome::ReachedTarget => self.correct(),
            Outcome::ReachedWrong => self.wrong(),
            Outcome::Timeout => self.timeout(),
        }
    }
}

impl fmt::Display for RewardScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RewardScheme::Sparse => "sparse",
            RewardScheme::Dense => "dense",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    /// Episode length limit in decision steps.
    pub timeout: u32,
    pub turn_delta: f64,
    pub move_step: f64,
    /// Contact radius for small objects; large objects use
    /// [`crate::mapping::LARGE_RADIUS_SCALE`] times this.
    pub reach_radius: f64,
    pub fov: f64,
    pub reward: RewardScheme,
    pub terminate_on_any_contact: bool,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            timeout: 30,
            turn_delta: FRAC_PI_6,
            move_step: 25.6,
            reach_radius: 24.0,
            fov: FRAC_PI_2,
            reward: RewardScheme::Sparse,
            terminate_on_any_contact: true,
        }
    }
}

impl EnvConfig {
    pub fn with_reward(reward: RewardScheme) -> Self {
        EnvConfig {
            reward,
            ..EnvConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let positive = [
            ("turn_delta", self.turn_delta),
            ("move_step", self.move_step),
            ("reach_radius", self.reach_radius),
            ("fov", self.fov),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| v.is_nan() || *v <= 0.0) {
            return Err(SimError::InvalidConfig(format!("{name} must be positive")));
        }
        if self.timeout == 0 {
            return Err(SimError::InvalidConfig("timeout must be at least 1".into()));
        }
        Ok(())
    }

    pub fn reach_of(&self, o: &EnvObject) -> f64 {
        self.reach_radius * o.radius_scale()
    }
}

/// Wire encoding: 0 turn left, 1 turn right, 2 move forward, 3 no-op.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    TurnLeft = 0,
    TurnRight = 1,
    MoveForward = 2,
    NoOp = 3,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::TurnLeft, Action::TurnRight, Action::MoveForward, Action::NoOp];

    pub fn code(self) -> u8 {
        self as u8
    }
}

impl TryFrom<u8> for Action {
    type Error = SimError;

    fn try_from(code: u8) -> Result<Self, SimError> {
        Action::ALL
            .get(code as usize)
            .copied()
            .ok_or(SimError::InvalidAction(code))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    ReachedTarget,
    ReachedWrong,
    Timeout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeState {
    pub scene: Arc<MappedScene>,
    pub target_id: ObjectId,
    pub pose: Pose,
    pub t: u32,
    pub outcome: Option<Outcome>,
    pub instruction_tokens: Vec<u32>,
}

impl EpisodeState {
    pub fn is_done(&self) -> bool {
        self.outcome.is_some()
    }

    pub fn target(&self) -> &EnvObject {
        self.scene
            .object(self.target_id)
            .expect("target checked on reset")
    }

    /// Return accumulated so far: the per-step charge for every elapsed step
    /// plus the terminal bonus once the episode is over.
    pub fn episode_return(&self, scheme: RewardScheme) -> f64 {
        let bonus = self.outcome.map_or(0.0, |o| scheme.terminal_bonus(o));
        scheme.per_step() * f64::from(self.t) + bonus
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibleObject {
    pub id: ObjectId,
    pub kind: ObjectKind,
    pub color: Color,
    pub size: Size,
    pub bearing: f64,
    pub distance: f64,
}

/// Symbolic egocentric view: every object inside the field of view, sorted
/// by bearing (right to left), plus the instruction tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub instruction_tokens: Vec<u32>,
    pub visible: Vec<VisibleObject>,
    pub t: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
}

pub fn reset(
    cfg: &EnvConfig,
    scene: Arc<MappedScene>,
    instr: &InstructionRecord,
) -> Result<(EpisodeState, Observation), SimError> {
    cfg.validate()?;
    if instr.scene_id != scene.scene_id {
        return Err(SimError::SceneMismatch {
            instruction: instr.scene_id,
            scene: scene.scene_id,
        });
    }
    if scene.object(instr.target_id).is_none() {
        return Err(SimError::UnknownTarget(instr.target_id));
    }
    let state = EpisodeState {
        pose: scene.spawn,
        scene,
        target_id: instr.target_id,
        t: 0,
        outcome: None,
        instruction_tokens: tokenize(&instr.text),
    };
    let obs = observe(&state, cfg);
    Ok((state, obs))
}

/// First object in contact with `p`; the target wins ties.
fn contact(state: &EpisodeState, p: Vec2, cfg: &EnvConfig) -> Option<ObjectId> {
    let touching = |o: &&EnvObject| o.position.distance(p) <= cfg.reach_of(o);
    let target = state.target();
    if touching(&target) {
        return Some(target.id);
    }
    state.scene.objects.iter().find(touching).map(|o| o.id)
}

pub fn step(state: &mut EpisodeState, action: Action, cfg: &EnvConfig) -> Result<StepResult, SimError> {
    if state.is_done() {
        return Err(SimError::EpisodeFinished);
    }
    let pose = state.pose;
    state.pose = match action {
        Action::TurnLeft => Pose::new(pose.x, pose.y, pose.heading + cfg.turn_delta),
        Action::TurnRight => Pose::new(pose.x, pose.y, pose.heading - cfg.turn_delta),
        Action::MoveForward => {
            let to = pose.position() + Vec2::new(pose.heading.cos(), pose.heading.sin()) * cfg.move_step;
            let to = state.scene.env_bounds.clamp(to);
            Pose { x: to.x, y: to.y, ..pose }
        }
        Action::NoOp => pose,
    };
    state.t += 1;

    let scheme = cfg.reward;
    let mut reward = scheme.per_step();
    let outcome = match contact(state, state.pose.position(), cfg) {
        Some(id) if id == state.target_id => Some(Outcome::ReachedTarget),
        Some(_) if cfg.terminate_on_any_contact => Some(Outcome::ReachedWrong),
        _ if state.t >= cfg.timeout => Some(Outcome::Timeout),
        _ => None,
    };
    if let Some(o) = outcome {
        reward += scheme.terminal_bonus(o);
        state.outcome = Some(o);
    }
    Ok(StepResult {
        observation: observe(state, cfg),
        reward,
        done: state.is_done(),
    })
}

pub fn observe(state: &EpisodeState, cfg: &EnvConfig) -> Observation {
    let half = 0.5 * cfg.fov;
    let mut visible: Vec<VisibleObject> = state
        .scene
        .objects
        .iter()
        .filter_map(|o| {
            let bearing = state.pose.bearing_to(o.position);
            (bearing.abs() <= half).then(|| VisibleObject {
                id: o.id,
                kind: o.kind,
                color: o.color,
                size: o.size,
                bearing,
                distance: o.position.distance(state.pose.position()),
            })
        })
        .collect();
    visible.sort_by(|a, b| a.bearing.total_cmp(&b.bearing).then(a.id.cmp(&b.id)));
    Observation {
        instruction_tokens: state.instruction_tokens.clone(),
        visible,
        t: state.t,
    }
}
