//! Scene sources: seeded rejection-sampled generation and CLEVR ingestion.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use thiserror::Error;

use crate::scene::{
    CameraFrame, Color, Material, ObjectId, SceneBounds, SceneGraph, SceneObject, Shape, Size,
    UnknownValue, Vec2, RELATION_MARGIN,
};

pub const DEFAULT_MIN_SEPARATION: f64 = 0.6;
pub const DEFAULT_MAX_REJECTIONS: usize = 1000;

#[derive(Debug, Error)]
pub enum SourceError {
    #[error("invalid generation config: {0}")]
    InvalidConfig(String),
    #[error("gave up placing object {object} after {rejections} consecutive rejections")]
    GenerationExhausted { object: usize, rejections: usize },
}

#[derive(Debug, Error, PartialEq)]
pub enum ImportError {
    #[error("scene has no objects")]
    EmptyScene,
    #[error("object {object} is missing {attribute:?}")]
    MissingAttribute {
        object: usize,
        attribute: &'static str,
    },
    #[error("object {object}: {source}")]
    UnknownValue {
        object: usize,
        #[source]
        source: UnknownValue,
    },
    #[error("object {object} at ({x}, {y}) lies outside the scene bounds")]
    OutOfBounds { object: usize, x: f64, y: f64 },
    #[error("malformed scene document: {0}")]
    Malformed(String),
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: no top-level \"scenes\" array")]
    NoScenes { path: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub scene_id: u64,
    pub n_objects: usize,
    pub bounds: SceneBounds,
    pub d_min: f64,
    pub max_rejections: usize,
    pub seed: u64,
}

impl GenConfig {
    pub fn new(n_objects: usize, seed: u64) -> Self {
        GenConfig {
            scene_id: 0,
            n_objects,
            bounds: SceneBounds::default(),
            d_min: DEFAULT_MIN_SEPARATION,
            max_rejections: DEFAULT_MAX_REJECTIONS,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SourceError> {
        if self.n_objects == 0 {
            return Err(SourceError::InvalidConfig("n_objects must be at least 1".into()));
        }
        if self.d_min.is_nan() || self.d_min <= 2.0 * RELATION_MARGIN {
            return Err(SourceError::InvalidConfig(format!(
                "d_min must exceed {}",
                2.0 * RELATION_MARGIN
            )));
        }
        if self.max_rejections == 0 {
            return Err(SourceError::InvalidConfig("max_rejections must be at least 1".into()));
        }
        if !self.bounds.is_valid() {
            return Err(SourceError::InvalidConfig("empty scene bounds".into()));
        }
        Ok(())
    }
}

/// Draws a scene with uniformly random attributes and positions, rejecting
/// placements that crowd an earlier object or leave a pair without any
/// relation. Pure function of `cfg`.
pub fn generate_scene(cfg: &GenConfig) -> Result<SceneGraph, SourceError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let camera = CameraFrame::default();
    let b = cfg.bounds;
    let mut objects: Vec<SceneObject> = Vec::with_capacity(cfg.n_objects);

    for index in 0..cfg.n_objects {
        let color = *Color::ALL.choose(&mut rng).expect("non-empty");
        let shape = *Shape::ALL.choose(&mut rng).expect("non-empty");
        let size = *Size::ALL.choose(&mut rng).expect("non-empty");

        let mut rejections = 0;
        let position = loop {
            let p = Vec2::new(rng.gen_range(b.x_min..=b.x_max), rng.gen_range(b.y_min..=b.y_max));
            let ok = objects.iter().all(|o| {
                let offset = p - o.position;
                let ambiguous = offset.dot(camera.left_dir).abs() <= RELATION_MARGIN
                    && offset.dot(camera.front_dir).abs() <= RELATION_MARGIN;
                offset.norm() >= cfg.d_min && !ambiguous
            });
            if ok {
                break p;
            }
            rejections += 1;
            if rejections >= cfg.max_rejections {
                return Err(SourceError::GenerationExhausted {
                    object: index,
                    rejections,
                });
            }
        };

        objects.push(SceneObject {
            id: ObjectId(index),
            color,
            shape,
            size,
            material: None,
            position,
        });
    }

    Ok(SceneGraph {
        id: cfg.scene_id,
        objects,
        camera,
        bounds: cfg.bounds,
    })
}

/// Where an imported scene's camera frame comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CameraSource {
    Fixed(CameraFrame),
    /// CLEVR's per-scene `directions.left` / `directions.front`, projected on
    /// the ground plane and orthonormalized. Falls back to the default frame
    /// when the document carries no directions.
    Document,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImportConfig {
    pub bounds: SceneBounds,
    pub camera: CameraSource,
}

impl Default for ImportConfig {
    fn default() -> Self {
        ImportConfig {
            bounds: SceneBounds::default(),
            camera: CameraSource::Fixed(CameraFrame::default()),
        }
    }
}

/// Builds a scene from one entry of a CLEVR `scenes` array.
///
/// Object `k` becomes id `k`, positioned at the first two components of
/// `3d_coords`. Stored relationships are ignored. Documents written by this
/// crate also carry `scene_id`, `camera` and `bounds`; those keys override
/// the configuration when present.
pub fn import_clevr_scene(doc: &Value, cfg: &ImportConfig) -> Result<SceneGraph, ImportError> {
    let objects = doc
        .get("objects")
        .ok_or_else(|| ImportError::Malformed("missing \"objects\"".into()))?
        .as_array()
        .ok_or_else(|| ImportError::Malformed("\"objects\" is not an array".into()))?;
    if objects.is_empty() {
        return Err(ImportError::EmptyScene);
    }

    let bounds = match doc.get("bounds") {
        Some(v) => {
            let b: SceneBounds = serde_json::from_value(v.clone())
                .map_err(|e| ImportError::Malformed(format!("bounds: {e}")))?;
            if !b.is_valid() {
                return Err(ImportError::Malformed("bounds: min >= max".into()));
            }
            b
        }
        None => cfg.bounds,
    };
    let camera = match doc.get("camera") {
        Some(v) => {
            let c: CameraFrame = serde_json::from_value(v.clone())
                .map_err(|e| ImportError::Malformed(format!("camera: {e}")))?;
            c.check().map_err(|e| ImportError::Malformed(e.to_string()))?;
            c
        }
        None => match cfg.camera {
            CameraSource::Fixed(c) => c,
            CameraSource::Document => clevr_directions(doc)?.unwrap_or_default(),
        },
    };
    let id = doc
        .get("scene_id")
        .or_else(|| doc.get("image_index"))
        .and_then(Value::as_u64)
        .unwrap_or(0);

    let mut parsed = Vec::with_capacity(objects.len());
    for (k, o) in objects.iter().enumerate() {
        let color: Color = attribute(o, k, "color")?;
        let shape: Shape = attribute(o, k, "shape")?;
        let size: Size = attribute(o, k, "size")?;
        let material: Option<Material> = match o.get("material") {
            Some(_) => Some(attribute(o, k, "material")?),
            None => None,
        };
        let coords = o
            .get("3d_coords")
            .ok_or(ImportError::MissingAttribute {
                object: k,
                attribute: "3d_coords",
            })?
            .as_array()
            .filter(|c| c.len() >= 2)
            .ok_or_else(|| ImportError::Malformed(format!("object {k}: 3d_coords needs 3 numbers")))?;
        let coord = |i: usize| {
            coords[i]
                .as_f64()
                .ok_or_else(|| ImportError::Malformed(format!("object {k}: non-numeric coordinate")))
        };
        let position = Vec2::new(coord(0)?, coord(1)?);
        if !bounds.contains(position) {
            return Err(ImportError::OutOfBounds {
                object: k,
                x: position.x,
                y: position.y,
            });
        }
        parsed.push(SceneObject {
            id: ObjectId(k),
            color,
            shape,
            size,
            material,
            position,
        });
    }

    Ok(SceneGraph {
        id,
        objects: parsed,
        camera,
        bounds,
    })
}

fn attribute<T>(o: &Value, object: usize, key: &'static str) -> Result<T, ImportError>
where
    T: std::str::FromStr<Err = UnknownValue>,
{
    let raw = o.get(key).ok_or(ImportError::MissingAttribute {
        object,
        attribute: key,
    })?;
    let s = raw
        .as_str()
        .ok_or_else(|| ImportError::Malformed(format!("object {object}: {key} is not a string")))?;
    s.parse()
        .map_err(|source| ImportError::UnknownValue { object, source })
}

fn clevr_directions(doc: &Value) -> Result<Option<CameraFrame>, ImportError> {
    let dir = |name: &str| -> Option<Vec2> {
        let v = doc.get("directions")?.get(name)?.as_array()?;
        Some(Vec2::new(v.first()?.as_f64()?, v.get(1)?.as_f64()?))
    };
    let (Some(left), Some(front)) = (dir("left"), dir("front")) else {
        return Ok(None);
    };
    let front = front.normalized();
    // Gram-Schmidt: keep front, remove its component from left
    let left = (left - front * left.dot(front)).normalized();
    CameraFrame::new(left, front)
        .map(Some)
        .map_err(|e| ImportError::Malformed(format!("directions: {e}")))
}

/// Which entries of a scene file to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneSelection {
    All,
    First(usize),
    Random { count: usize, seed: u64 },
}

/// A file's successfully imported scenes plus the entries that were skipped.
#[derive(Debug, Default)]
pub struct LoadedScenes {
    pub scenes: Vec<SceneGraph>,
    pub skipped: Vec<(usize, ImportError)>,
}

/// Reads a JSON document with a top-level `scenes` array. Entries that fail
/// to import are skipped and reported. Scenes without an explicit id get
/// their index in the file.
pub fn load_scene_file(
    path: &Path,
    cfg: &ImportConfig,
    selection: SceneSelection,
) -> Result<LoadedScenes, LoadError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: name.clone(),
        source,
    })?;
    let doc: Value = serde_json::from_str(&text).map_err(|source| LoadError::Json {
        path: name.clone(),
        source,
    })?;
    let entries = doc
        .get("scenes")
        .and_then(Value::as_array)
        .ok_or(LoadError::NoScenes { path: name })?;
    Ok(import_entries(entries, cfg, selection))
}

pub fn import_entries(entries: &[Value], cfg: &ImportConfig, selection: SceneSelection) -> LoadedScenes {
    let mut indices: Vec<usize> = (0..entries.len()).collect();
    match selection {
        SceneSelection::All => {}
        SceneSelection::First(n) => indices.truncate(n),
        SceneSelection::Random { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            indices.shuffle(&mut rng);
            indices.truncate(count);
            indices.sort_unstable();
        }
    }

    let mut out = LoadedScenes::default();
    for i in indices {
        let entry = &entries[i];
        match import_clevr_scene(entry, cfg) {
            Ok(mut scene) => {
                if entry.get("scene_id").is_none() && entry.get("image_index").is_none() {
                    scene.id = i as u64;
                }
                out.scenes.push(scene);
            }
            Err(e) => out.skipped.push((i, e)),
        }
    }
    out
}
