//! Evaluation rollouts: episode pools, the obstacle-free filter, and
//! per-kind success rates.

use std::collections::HashMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, HarnessError};
use crate::mapping::{map_scene, MappedScene, MappingConfig};
use crate::policy::{OraclePolicy, Policy, PolicyKind};
use crate::program::{InstructionKind, InstructionRecord};
use crate::scene::{ObjectId, SceneGraph};
use crate::sim::{reset, step, EnvConfig, Outcome, SimError};

const POLICY_STREAM: u64 = 3;

/// An instruction paired with its mapped scene.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub scene: Arc<MappedScene>,
    pub record: InstructionRecord,
}

impl Episode {
    pub fn kind(&self) -> InstructionKind {
        self.record.kind
    }

    /// Number of objects in the scene.
    pub fn n_objects(&self) -> usize {
        self.scene.objects.len()
    }
}

/// Maps every scene once and pairs each record with it, in record order.
pub fn build_episodes(
    scenes: &[SceneGraph],
    records: &[InstructionRecord],
    mapping: &MappingConfig,
) -> Result<Vec<Episode>, HarnessError> {
    let mut mapped = HashMap::with_capacity(scenes.len());
    for s in scenes {
        mapped.insert(s.id, Arc::new(map_scene(s, mapping)?));
    }
    records
        .iter()
        .map(|r| {
            let scene = mapped.get(&r.scene_id).ok_or_else(|| {
                HarnessError::InsufficientData(format!("record refers to missing scene {}", r.scene_id))
            })?;
            Ok(Episode {
                scene: Arc::clone(scene),
                record: r.clone(),
            })
        })
        .collect()
}

/// True if the oracle's path toward the target never enters another
/// object's reach radius. The path is traced in a copy of the scene holding
/// only the target, so other objects cannot cut it short.
pub fn is_obstacle_free(ep: &Episode, cfg: &EnvConfig) -> bool {
    let Some(target) = ep.scene.object(ep.record.target_id) else {
        return false;
    };
    let others: Vec<_> = ep
        .scene
        .objects
        .iter()
        .filter(|o| o.id != target.id)
        .map(|o| (o.position, cfg.reach_of(o)))
        .collect();
    let clear = |p| others.iter().all(|&(q, r)| q.distance(p) > r);

    let solo = Arc::new(MappedScene {
        objects: vec![*target],
        ..(*ep.scene).clone()
    });
    let Ok((mut state, _)) = reset(cfg, solo, &ep.record) else {
        return false;
    };
    if !clear(state.pose.position()) {
        return false;
    }
    while !state.is_done() {
        let action = OraclePolicy::choose(&state, cfg);
        if step(&mut state, action, cfg).is_err() || !clear(state.pose.position()) {
            return false;
        }
    }
    true
}

/// Draws up to `n` episodes (all when `n` is `None`) of the given kind in a
/// seeded order, optionally keeping only obstacle-free ones.
pub fn select_episodes(
    pool: &[Episode],
    kind: Option<InstructionKind>,
    n: Option<usize>,
    seed: u64,
    obstacle_free: bool,
    cfg: &EnvConfig,
) -> Vec<Episode> {
    let mut order: Vec<usize> = (0..pool.len())
        .filter(|&i| kind.is_none_or(|k| pool[i].kind() == k))
        .collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let limit = n.unwrap_or(usize::MAX);
    let mut out = Vec::new();
    for i in order {
        if out.len() >= limit {
            break;
        }
        if !obstacle_free || is_obstacle_free(&pool[i], cfg) {
            out.push(pool[i].clone());
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub scene_id: u64,
    pub kind: InstructionKind,
    pub target_id: ObjectId,
    pub outcome: Outcome,
    pub steps: u32,
    pub rewards: Vec<f64>,
    pub episode_return: f64,
}

impl EpisodeResult {
    pub fn success(&self) -> bool {
        self.outcome == Outcome::ReachedTarget
    }
}

pub fn run_episode(ep: &Episode, policy: &mut dyn Policy, cfg: &EnvConfig) -> Result<EpisodeResult, SimError> {
    let (mut state, mut obs) = reset(cfg, Arc::clone(&ep.scene), &ep.record)?;
    let mut rewards = Vec::new();
    while !state.is_done() {
        let action = policy.act(&state, &obs, cfg);
        let r = step(&mut state, action, cfg)?;
        rewards.push(r.reward);
        obs = r.observation;
    }
    Ok(EpisodeResult {
        scene_id: ep.record.scene_id,
        kind: ep.record.kind,
        target_id: ep.record.target_id,
        outcome: state.outcome.expect("loop exits only when done"),
        steps: state.t,
        rewards,
        episode_return: state.episode_return(cfg.reward),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub episodes: usize,
    pub simple_episodes: usize,
    pub complex_episodes: usize,
    /// `None` when no episode of that kind was run.
    pub simple_accuracy: Option<f64>,
    pub complex_accuracy: Option<f64>,
    pub accuracy: f64,
    pub mean_return: f64,
    pub mean_steps: f64,
    pub reached_target: usize,
    pub reached_wrong: usize,
    pub timeouts: usize,
}

impl EvalReport {
    pub fn from_results(results: &[EpisodeResult]) -> Self {
        let of_kind = |k| results.iter().filter(move |r: &&EpisodeResult| r.kind == k);
        let rate = |k| {
            let n = of_kind(k).count();
            (n > 0).then(|| of_kind(k).filter(|r| r.success()).count() as f64 / n as f64)
        };
        let count = |o| results.iter().filter(|r| r.outcome == o).count();
        let n = results.len();
        let mean = |f: &dyn Fn(&EpisodeResult) -> f64| {
            if n == 0 {
                0.0
            } else {
                results.iter().map(f).sum::<f64>() / n as f64
            }
        };
        EvalReport {
            episodes: n,
            simple_episodes: of_kind(InstructionKind::Simple).count(),
            complex_episodes: of_kind(InstructionKind::Complex).count(),
            simple_accuracy: rate(InstructionKind::Simple),
            complex_accuracy: rate(InstructionKind::Complex),
            accuracy: mean(&|r| if r.success() { 1.0 } else { 0.0 }),
            mean_return: mean(&|r| r.episode_return),
            mean_steps: mean(&|r| f64::from(r.steps)),
            reached_target: count(Outcome::ReachedTarget),
            reached_wrong: count(Outcome::ReachedWrong),
            timeouts: count(Outcome::Timeout),
        }
    }
}

/// Runs every episode with a fresh policy from `factory(episode_seed)`.
/// Results come back in episode order regardless of thread count.
pub fn evaluate_with<F>(
    episodes: &[Episode],
    factory: F,
    cfg: &EnvConfig,
    seed: u64,
) -> Result<Vec<EpisodeResult>, SimError>
where
    F: Fn(u64) -> Box<dyn Policy + Send> + Sync,
{
    episodes
        .par_iter()
        .enumerate()
        .map(|(i, ep)| {
            let mut policy = factory(derive_seed(seed, &[POLICY_STREAM, i as u64]));
            run_episode(ep, policy.as_mut(), cfg)
        })
        .collect()
}

pub fn evaluate(
    episodes: &[Episode],
    policy: PolicyKind,
    cfg: &EnvConfig,
    seed: u64,
) -> Result<(EvalReport, Vec<EpisodeResult>), SimError> {
    let results = evaluate_with(episodes, |s| policy.build(s), cfg, seed)?;
    Ok((EvalReport::from_results(&results), results))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::dataset::{build_dataset, DatasetManifest};
    use crate::sim::RewardScheme;

    fn pool() -> Vec<Episode> {
        let d = build_dataset(&DatasetManifest::new(5, 30)).unwrap();
        build_episodes(&d.scenes, &d.records, &MappingConfig::default()).unwrap()
    }

    #[test]
    fn oracle_never_touches_obstacles() {
        let cfg = EnvConfig::default();
        let pool = pool();
        let eps = select_episodes(&pool, None, None, 1, true, &cfg);
        assert!(!eps.is_empty());
        let (report, results) = evaluate(&eps, PolicyKind::Oracle, &cfg, 1).unwrap();
        assert_eq!(report.reached_wrong, 0);
        assert!(report.accuracy > 0.95, "{report:?}");
        // misses come only from heading quantization on long diagonals
        for r in results.iter().filter(|r| !r.success()) {
            assert_eq!((r.outcome, r.steps), (Outcome::Timeout, cfg.timeout));
        }
    }

    #[test]
    fn selection_respects_kind_and_count() {
        let cfg = EnvConfig::default();
        let pool = pool();
        let eps = select_episodes(&pool, Some(InstructionKind::Complex), Some(7), 2, false, &cfg);
        assert_eq!(eps.len(), 7);
        assert!(eps.iter().all(|e| e.kind() == InstructionKind::Complex));
        assert_eq!(eps, select_episodes(&pool, Some(InstructionKind::Complex), Some(7), 2, false, &cfg));
    }

    #[test]
    fn report_accounting() {
        let cfg = EnvConfig::with_reward(RewardScheme::Dense);
        let pool = pool();
        let (report, results) = evaluate(&pool[..40], PolicyKind::Random, &cfg, 9).unwrap();
        assert_eq!(report.episodes, 40);
        assert_eq!(report.reached_target + report.reached_wrong + report.timeouts, 40);
        for r in &results {
            assert_eq!(r.rewards.len() as u32, r.steps);
            assert!(r.steps <= cfg.timeout);
            let summed: f64 = r.rewards.iter().sum();
            assert!((summed - r.episode_return).abs() < 1e-9);
        }
        let (again, _) = evaluate(&pool[..40], PolicyKind::Random, &cfg, 9).unwrap();
        assert_eq!(report, again);
    }

    #[test]
    fn missing_kind_has_no_accuracy() {
        let cfg = EnvConfig::default();
        let pool = pool();
        let eps = select_episodes(&pool, Some(InstructionKind::Simple), Some(5), 0, false, &cfg);
        let (report, _) = evaluate(&eps, PolicyKind::NoOp, &cfg, 0).unwrap();
        assert!(report.simple_accuracy.is_some());
        assert_eq!(report.complex_accuracy, None);
        assert_eq!(report.timeouts, 5);
    }
}
