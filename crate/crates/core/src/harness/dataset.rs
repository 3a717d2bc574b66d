//! Dataset pipeline: scene generation, instruction sampling, file formats
//! and whole-dataset validation.
//!
//! Work fans out across scenes with rayon, but every scene slot draws from
//! its own derived seed and results are gathered in slot order, so the bytes
//! written never depend on scheduling.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::oracle::verifies;
use super::{derive_seed, HarnessError};
use crate::language::{parse, realize, Lexicon, LexiconMode};
use crate::program::{sample_instruction, InstructionKind, InstructionRecord};
use crate::scene::{validate_scene_with, SceneBounds, SceneGraph, ValidationOptions, Violation};
use crate::source::{
    generate_scene, load_scene_file, GenConfig, ImportConfig, SceneSelection, SourceError,
    DEFAULT_MAX_REJECTIONS, DEFAULT_MIN_SEPARATION,
};

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// Fresh scenes tried for one slot before the build fails.
pub const MAX_SLOT_ATTEMPTS: u64 = 64;

const SCENE_STREAM: u64 = 1;
const INSTRUCTION_STREAM: u64 = 2;

/// Everything needed to rebuild a generated dataset byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub seed: u64,
    pub scene_count: usize,
    pub simple_per_scene: usize,
    pub complex_per_scene: usize,
    pub lexicon: LexiconMode,
    pub bounds: SceneBounds,
    /// Object count of scene `i` is `object_counts[i % len]`.
    pub object_counts: Vec<usize>,
    pub d_min: f64,
    pub tool_version: String,
}

impl DatasetManifest {
    pub fn new(seed: u64, scene_count: usize) -> Self {
        DatasetManifest {
            seed,
            scene_count,
            simple_per_scene: 5,
            complex_per_scene: 5,
            lexicon: LexiconMode::Env,
            bounds: SceneBounds::default(),
            object_counts: vec![3, 4, 5],
            d_min: DEFAULT_MIN_SEPARATION,
            tool_version: TOOL_VERSION.to_string(),
        }
    }

    /// 14,000 scenes with 5 simple and 5 complex instructions each.
    pub fn full_scale(seed: u64) -> Self {
        DatasetManifest::new(seed, 14_000)
    }

    pub fn per_scene(&self, kind: InstructionKind) -> usize {
        match kind {
            InstructionKind::Simple => self.simple_per_scene,
            InstructionKind::Complex => self.complex_per_scene,
        }
    }

    fn validate(&self) -> Result<(), HarnessError> {
        if self.object_counts.is_empty() || self.object_counts.contains(&0) {
            return Err(HarnessError::InvalidManifest(
                "object_counts must be non-empty and positive".into(),
            ));
        }
        if !self.bounds.is_valid() {
            return Err(HarnessError::InvalidManifest("empty scene bounds".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedScene {
    pub scene_id: u64,
    pub attempt: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub scenes: Vec<SceneGraph>,
    /// Ordered by scene, then kind (simple first), then index.
    pub records: Vec<InstructionRecord>,
    pub skipped: Vec<SkippedScene>,
}

/// Samples the requested number of instructions of each kind, or explains
/// why the scene cannot support them.
fn instructions_for_scene(
    scene: &SceneGraph,
    manifest: &DatasetManifest,
    lexicon: &Lexicon,
    attempt: u64,
) -> Result<Vec<InstructionRecord>, String> {
    let mut out = Vec::with_capacity(manifest.simple_per_scene + manifest.complex_per_scene);
    for (k, kind) in InstructionKind::ALL.into_iter().enumerate() {
        for i in 0..manifest.per_scene(kind) {
            let seed = derive_seed(
                manifest.seed,
                &[INSTRUCTION_STREAM, scene.id, attempt, k as u64, i as u64],
            );
            let record = sample_instruction(scene, kind, seed, lexicon).map_err(|e| e.to_string())?;
            out.push(record);
        }
    }
    Ok(out)
}

fn slot_config(manifest: &DatasetManifest, slot: usize, attempt: u64) -> GenConfig {
    GenConfig {
        scene_id: slot as u64,
        n_objects: manifest.object_counts[slot % manifest.object_counts.len()],
        bounds: manifest.bounds,
        d_min: manifest.d_min,
        max_rejections: DEFAULT_MAX_REJECTIONS,
        seed: derive_seed(manifest.seed, &[SCENE_STREAM, slot as u64, attempt]),
    }
}

type SlotResult = Result<(SceneGraph, Vec<InstructionRecord>, Vec<SkippedScene>), HarnessError>;

fn build_slot(slot: usize, manifest: &DatasetManifest, lexicon: &Lexicon) -> SlotResult {
    let scene_id = slot as u64;
    let mut skipped = Vec::new();
    for attempt in 0..MAX_SLOT_ATTEMPTS {
        let scene = match generate_scene(&slot_config(manifest, slot, attempt)) {
            Ok(s) => s,
            Err(e @ SourceError::InvalidConfig(_)) => return Err(e.into()),
            Err(e) => {
                skipped.push(SkippedScene {
                    scene_id,
                    attempt,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        match instructions_for_scene(&scene, manifest, lexicon, attempt) {
            Ok(records) => return Ok((scene, records, skipped)),
            Err(reason) => skipped.push(SkippedScene {
                scene_id,
                attempt,
                reason,
            }),
        }
    }
    Err(HarnessError::SlotExhausted {
        scene_id,
        attempts: MAX_SLOT_ATTEMPTS,
        last: skipped.pop().map(|s| s.reason).unwrap_or_default(),
    })
}

/// Generates `scene_count` scenes and their instructions. Scenes that cannot
/// carry the requested instructions are redrawn and the redraw is logged.
pub fn build_dataset(manifest: &DatasetManifest) -> Result<Dataset, HarnessError> {
    manifest.validate()?;
    let lexicon = Lexicon::new(manifest.lexicon);
    let slots: Vec<SlotResult> = (0..manifest.scene_count)
        .into_par_iter()
        .map(|slot| build_slot(slot, manifest, &lexicon))
        .collect();

    let mut dataset = Dataset {
        manifest: manifest.clone(),
        scenes: Vec::with_capacity(manifest.scene_count),
        records: Vec::new(),
        skipped: Vec::new(),
    };
    for slot in slots {
        let (scene, records, skipped) = slot?;
        for s in &skipped {
            info!("redrew scene {} (attempt {}): {}", s.scene_id, s.attempt, s.reason);
        }
        dataset.scenes.push(scene);
        dataset.records.extend(records);
        dataset.skipped.extend(skipped);
    }
    Ok(dataset)
}

/// Samples instructions for existing scenes (e.g. imported from CLEVR).
/// Scenes that cannot carry the requested instructions are dropped.
pub fn build_instructions(
    scenes: Vec<SceneGraph>,
    manifest: &DatasetManifest,
) -> Dataset {
    let lexicon = Lexicon::new(manifest.lexicon);
    let results: Vec<_> = scenes
        .into_par_iter()
        .map(|scene| {
            let r = instructions_for_scene(&scene, manifest, &lexicon, 0);
            (scene, r)
        })
        .collect();

    let mut dataset = Dataset {
        manifest: manifest.clone(),
        scenes: Vec::new(),
        records: Vec::new(),
        skipped: Vec::new(),
    };
    for (scene, r) in results {
        match r {
            Ok(records) => {
                dataset.scenes.push(scene);
                dataset.records.extend(records);
            }
            Err(reason) => {
                warn!("skipping scene {}: {}", scene.id, reason);
                dataset.skipped.push(SkippedScene {
                    scene_id: scene.id,
                    attempt: 0,
                    reason,
                });
            }
        }
    }
    dataset.manifest.scene_count = dataset.scenes.len();
    dataset
}

/// The scenes of a manifest without instructions. Slots are redrawn only
/// when generation itself fails, so these can differ from [`build_dataset`]'s.
pub fn generate_scenes(manifest: &DatasetManifest) -> Result<Vec<SceneGraph>, HarnessError> {
    manifest.validate()?;
    (0..manifest.scene_count)
        .into_par_iter()
        .map(|slot| {
            let scene_id = slot as u64;
            let mut last = None;
            for attempt in 0..MAX_SLOT_ATTEMPTS {
                match generate_scene(&slot_config(manifest, slot, attempt)) {
                    Ok(s) => return Ok(s),
                    Err(e @ SourceError::InvalidConfig(_)) => return Err(e.into()),
                    Err(e) => last = Some(e.to_string()),
                }
            }
            Err(HarnessError::SlotExhausted {
                scene_id,
                attempts: MAX_SLOT_ATTEMPTS,
                last: last.unwrap_or_default(),
            })
        })
        .collect()
}

/// CLEVR-shaped scene document: `3d_coords` carries the planar position
/// with a zero third component.
pub fn scene_to_json(scene: &SceneGraph) -> Value {
    let objects: Vec<Value> = scene
        .objects
        .iter()
        .map(|o| {
            let mut v = json!({
                "color": o.color,
                "shape": o.shape,
                "size": o.size,
                "3d_coords": [o.position.x, o.position.y, 0.0],
            });
            if let Some(m) = o.material {
                v["material"] = json!(m);
            }
            v
        })
        .collect();
    json!({
        "scene_id": scene.id,
        "image_index": scene.id,
        "objects": objects,
        "camera": scene.camera,
        "bounds": scene.bounds,
    })
}

pub fn write_scene_file(
    path: &Path,
    scenes: &[SceneGraph],
    manifest: Option<&DatasetManifest>,
) -> Result<(), HarnessError> {
    let doc = json!({
        "info": manifest,
        "scenes": scenes.iter().map(scene_to_json).collect::<Vec<_>>(),
    });
    let mut out = BufWriter::new(File::create(path).map_err(|e| HarnessError::io(path, e))?);
    serde_json::to_writer_pretty(&mut out, &doc).map_err(|e| HarnessError::json(path, e))?;
    out.write_all(b"\n").map_err(|e| HarnessError::io(path, e))?;
    out.flush().map_err(|e| HarnessError::io(path, e))
}

/// Reads a scene file written by [`write_scene_file`] or a raw CLEVR file.
/// Fails if any entry does not import.
pub fn read_scene_file(path: &Path) -> Result<(Vec<SceneGraph>, Option<DatasetManifest>), HarnessError> {
    let loaded = load_scene_file(path, &ImportConfig::default(), SceneSelection::All)?;
    if let Some((index, e)) = loaded.skipped.into_iter().next() {
        return Err(HarnessError::BadScene {
            path: path.display().to_string(),
            index,
            message: e.to_string(),
        });
    }
    Ok((loaded.scenes, read_manifest(path)?))
}

fn read_manifest(path: &Path) -> Result<Option<DatasetManifest>, HarnessError> {
    #[derive(Deserialize)]
    struct Info {
        #[serde(default)]
        info: Option<Value>,
    }
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let info: Info = serde_json::from_str(&text).map_err(|e| HarnessError::json(path, e))?;
    // CLEVR files carry an unrelated "info" block
    Ok(info.info.and_then(|v| serde_json::from_value(v).ok()))
}

/// One JSON record per line.
pub fn write_instruction_file(path: &Path, records: &[InstructionRecord]) -> Result<(), HarnessError> {
    let mut out = BufWriter::new(File::create(path).map_err(|e| HarnessError::io(path, e))?);
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(|e| HarnessError::json(path, e))?;
        out.write_all(b"\n").map_err(|e| HarnessError::io(path, e))?;
    }
    out.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn read_instruction_file(path: &Path) -> Result<Vec<InstructionRecord>, HarnessError> {
    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| HarnessError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| HarnessError::BadRecord {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordIssue {
    /// Position in the record list (line number minus one for files).
    pub index: usize,
    pub scene_id: u64,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetValidation {
    pub scene_issues: Vec<(u64, Violation)>,
    pub record_issues: Vec<RecordIssue>,
    pub records_checked: usize,
}

impl DatasetValidation {
    pub fn is_valid(&self) -> bool {
        self.scene_issues.is_empty() && self.record_issues.is_empty()
    }
}

/// Re-checks every scene structurally and every record with the brute-force
/// interpreter, plus text/program agreement under `lexicon`.
pub fn validate_dataset(
    scenes: &[SceneGraph],
    records: &[InstructionRecord],
    lexicon: &Lexicon,
    scene_opts: &ValidationOptions,
) -> DatasetValidation {
    let mut report = DatasetValidation {
        records_checked: records.len(),
        ..DatasetValidation::default()
    };
    for s in scenes {
        for v in validate_scene_with(s, scene_opts).violations {
            report.scene_issues.push((s.id, v));
        }
    }

    let by_id: HashMap<u64, &SceneGraph> = scenes.iter().map(|s| (s.id, s)).collect();
    report.record_issues = records
        .par_iter()
        .enumerate()
        .filter_map(|(index, r)| {
            check_record(r, &by_id, lexicon).err().map(|message| RecordIssue {
                index,
                scene_id: r.scene_id,
                message,
            })
        })
        .collect();
    report
}

fn check_record(
    r: &InstructionRecord,
    scenes: &HashMap<u64, &SceneGraph>,
    lexicon: &Lexicon,
) -> Result<(), String> {
    let scene = scenes
        .get(&r.scene_id)
        .ok_or_else(|| format!("scene {} not found", r.scene_id))?;
    if r.kind != r.program.kind() {
        return Err(format!("kind {} disagrees with program form", r.kind));
    }
    if !verifies(&r.program.to_node(), scene, r.target_id) {
        return Err(format!(
            "program does not denote exactly {{{}}} (\"{}\")",
            r.target_id, r.text
        ));
    }
    match parse(&r.text, lexicon) {
        Ok(p) if p == r.program => {}
        Ok(_) => return Err(format!("text {:?} parses to a different program", r.text)),
        Err(e) => return Err(format!("text {:?}: {e}", r.text)),
    }
    if realize(&r.program, lexicon) != r.text {
        return Err(format!("text {:?} is not the canonical rendering", r.text));
    }
    Ok(())
}
