//! Training curricula: staged episode samplers that grow scene size and the
//! share of complex instructions.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::eval::{run_episode, Episode, EpisodeResult};
use super::{derive_seed, HarnessError};
use crate::policy::PolicyKind;
use crate::program::InstructionKind;
use crate::sim::EnvConfig;

const SAMPLER_STREAM: u64 = 4;
const POLICY_STREAM: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurriculumStage {
    pub n_objects: usize,
    /// Probability that a drawn episode uses a complex instruction.
    pub complex_proportion: f64,
    pub episode_budget: usize,
}

/// Three-object scenes with a growing complex share, then five objects.
pub fn default_curriculum(episode_budget: usize) -> Vec<CurriculumStage> {
    [(3, 0.0), (3, 0.1), (3, 0.5), (3, 0.75), (5, 0.5)]
        .into_iter()
        .map(|(n_objects, complex_proportion)| CurriculumStage {
            n_objects,
            complex_proportion,
            episode_budget,
        })
        .collect()
}

pub fn validate_stages(stages: &[CurriculumStage]) -> Result<(), HarnessError> {
    if stages.is_empty() {
        return Err(HarnessError::InvalidManifest("curriculum has no stages".into()));
    }
    for (i, s) in stages.iter().enumerate() {
        if !(0.0..=1.0).contains(&s.complex_proportion) {
            return Err(HarnessError::InvalidManifest(format!(
                "stage {i}: complex_proportion {} outside [0, 1]",
                s.complex_proportion
            )));
        }
        if s.n_objects == 0 {
            return Err(HarnessError::InvalidManifest(format!("stage {i}: n_objects is 0")));
        }
    }
    Ok(())
}

pub fn write_stages(path: &Path, stages: &[CurriculumStage]) -> Result<(), HarnessError> {
    let text = serde_json::to_string_pretty(stages).map_err(|e| HarnessError::json(path, e))?;
    fs::write(path, text + "\n").map_err(|e| HarnessError::io(path, e))
}

pub fn read_stages(path: &Path) -> Result<Vec<CurriculumStage>, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let stages: Vec<CurriculumStage> = serde_json::from_str(&text).map_err(|e| HarnessError::json(path, e))?;
    validate_stages(&stages)?;
    Ok(stages)
}

/// Endless seeded draws for one stage: each draw is complex with the stage's
/// probability, then uniform within the matching pool.
pub struct StageSampler<'a> {
    simple: Vec<&'a Episode>,
    complex: Vec<&'a Episode>,
    p: f64,
    rng: ChaCha8Rng,
}

impl<'a> Iterator for StageSampler<'a> {
    type Item = &'a Episode;

    fn next(&mut self) -> Option<&'a Episode> {
        let pool = if self.rng.gen::<f64>() < self.p {
            &self.complex
        } else {
            &self.simple
        };
        Some(pool[self.rng.gen_range(0..pool.len())])
    }
}

pub fn stage_sampler<'a>(
    stage: &CurriculumStage,
    pool: &'a [Episode],
    seed: u64,
) -> Result<StageSampler<'a>, HarnessError> {
    let of_kind = |k| -> Vec<&'a Episode> {
        pool.iter()
            .filter(|e| e.n_objects() == stage.n_objects && e.kind() == k)
            .collect()
    };
    let simple = of_kind(InstructionKind::Simple);
    let complex = of_kind(InstructionKind::Complex);
    let p = stage.complex_proportion;
    if (p < 1.0 && simple.is_empty()) || (p > 0.0 && complex.is_empty()) {
        return Err(HarnessError::InsufficientData(format!(
            "{}-object stage with complex share {p} needs {}{}{} episodes",
            stage.n_objects,
            if p < 1.0 && simple.is_empty() { "simple" } else { "" },
            if p < 1.0 && simple.is_empty() && p > 0.0 && complex.is_empty() { " and " } else { "" },
            if p > 0.0 && complex.is_empty() { "complex" } else { "" },
        )));
    }
    Ok(StageSampler {
        simple,
        complex,
        p,
        rng: ChaCha8Rng::seed_from_u64(seed),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum AdvanceRule {
    /// Move on once the stage's episode budget is spent.
    Budget,
    /// Move on early when the success rate over the last `window` episodes
    /// reaches `accuracy`; the budget still caps the stage.
    Threshold { accuracy: f64, window: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: usize,
    pub n_objects: usize,
    pub complex_proportion: f64,
    pub episodes: usize,
    pub complex_episodes: usize,
    pub accuracy: f64,
    pub advanced_early: bool,
}

/// Runs each stage in order with fresh policies from `policy`. Non-learning
/// policies make this a rehearsal of the schedule; learners plug in through
/// the sampler directly.
pub fn run_curriculum(
    stages: &[CurriculumStage],
    pool: &[Episode],
    policy: PolicyKind,
    cfg: &EnvConfig,
    rule: AdvanceRule,
    seed: u64,
) -> Result<Vec<StageReport>, HarnessError> {
    validate_stages(stages)?;
    let mut reports = Vec::with_capacity(stages.len());
    for (i, stage) in stages.iter().enumerate() {
        let sampler = stage_sampler(stage, pool, derive_seed(seed, &[SAMPLER_STREAM, i as u64]))?;
        let mut results: Vec<EpisodeResult> = Vec::new();
        let mut advanced_early = false;
        for (j, ep) in sampler.take(stage.episode_budget).enumerate() {
            let mut p = policy.build(derive_seed(seed, &[POLICY_STREAM, i as u64, j as u64]));
            results.push(run_episode(ep, p.as_mut(), cfg)?);
            if let AdvanceRule::Threshold { accuracy, window } = rule {
                if window > 0 && results.len() >= window {
                    let recent = &results[results.len() - window..];
                    let rate = recent.iter().filter(|r| r.success()).count() as f64 / window as f64;
                    if rate >= accuracy {
                        advanced_early = results.len() < stage.episode_budget;
                        break;
                    }
                }
            }
        }
        let n = results.len();
        reports.push(StageReport {
            stage: i,
            n_objects: stage.n_objects,
            complex_proportion: stage.complex_proportion,
            episodes: n,
            complex_episodes: results.iter().filter(|r| r.kind == InstructionKind::Complex).count(),
            accuracy: if n == 0 {
                0.0
            } else {
                results.iter().filter(|r| r.success()).count() as f64 / n as f64
            },
            advanced_early,
        });
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::dataset::{build_dataset, DatasetManifest};
    use crate::harness::eval::build_episodes;
    use crate::mapping::MappingConfig;

    fn pool() -> Vec<Episode> {
        let mut m = DatasetManifest::new(8, 12);
        m.object_counts = vec![3, 5];
        let d = build_dataset(&m).unwrap();
        build_episodes(&d.scenes, &d.records, &MappingConfig::default()).unwrap()
    }

    #[test]
    fn defaults() {
        let c = default_curriculum(100);
        let got: Vec<_> = c.iter().map(|s| (s.n_objects, s.complex_proportion)).collect();
        assert_eq!(got, [(3, 0.0), (3, 0.1), (3, 0.5), (3, 0.75), (5, 0.5)]);
    }

    #[test]
    fn sampler_matches_proportion() {
        let pool = pool();
        for stage in default_curriculum(0) {
            let n = 10_000;
            let draws: Vec<_> = stage_sampler(&stage, &pool, 4).unwrap().take(n).collect();
            assert!(draws.iter().all(|e| e.n_objects() == stage.n_objects));
            let frac = draws.iter().filter(|e| e.kind() == InstructionKind::Complex).count() as f64 / n as f64;
            assert!((frac - stage.complex_proportion).abs() <= 0.02, "{stage:?}: {frac}");
        }
    }

    #[test]
    fn missing_pool_is_an_error() {
        let pool = pool();
        let stage = CurriculumStage {
            n_objects: 4,
            complex_proportion: 0.5,
            episode_budget: 1,
        };
        assert!(matches!(
            stage_sampler(&stage, &pool, 0),
            Err(HarnessError::InsufficientData(_))
        ));
    }

    #[test]
    fn threshold_advances_early() {
        let pool = pool();
        let cfg = EnvConfig::default();
        let stages = default_curriculum(50);
        let budget = run_curriculum(&stages, &pool, PolicyKind::NoOp, &cfg, AdvanceRule::Budget, 1).unwrap();
        assert!(budget.iter().all(|r| r.episodes == 50 && r.accuracy == 0.0));
        let rule = AdvanceRule::Threshold {
            accuracy: 0.0,
            window: 5,
        };
        let early = run_curriculum(&stages, &pool, PolicyKind::NoOp, &cfg, rule, 1).unwrap();
        assert!(early.iter().all(|r| r.episodes == 5 && r.advanced_early));
    }

    #[test]
    fn stages_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stages.json");
        let stages = default_curriculum(1000);
        write_stages(&path, &stages).unwrap();
        assert_eq!(read_stages(&path).unwrap(), stages);
    }
}
