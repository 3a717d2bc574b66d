//! Scene-to-environment mapping: a per-axis linear coordinate transform,
//! shape-to-kind nouns, and an agent spawn pose that looks at the scene the
//! way the scene camera did.

use std::f64::consts::TAU;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{CameraFrame, Color, ObjectId, SceneBounds, SceneGraph, SceneObject, Shape, Size, Vec2};

/// Reach-radius multiplier for large objects.
pub const LARGE_RADIUS_SCALE: f64 = 1.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MappingError {
    #[error("scene bounds have zero extent on the {0} axis")]
    DegenerateBounds(char),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvBounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl EnvBounds {
    pub const fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        EnvBounds {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.x_min < self.x_max && self.y_min < self.y_max
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    pub fn clamp(&self, p: Vec2) -> Vec2 {
        Vec2::new(p.x.clamp(self.x_min, self.x_max), p.y.clamp(self.y_min, self.y_max))
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        )
    }

    fn corners(&self) -> [Vec2; 4] {
        [
            Vec2::new(self.x_min, self.y_min),
            Vec2::new(self.x_min, self.y_max),
            Vec2::new(self.x_max, self.y_min),
            Vec2::new(self.x_max, self.y_max),
        ]
    }
}

/// Environment object kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectKind {
    Column,
    Skull,
    Torch,
}

impl ObjectKind {
    pub fn from_shape(shape: Shape) -> Self {
        match shape {
            Shape::Sphere => ObjectKind::Column,
            Shape::Cube => ObjectKind::Skull,
            Shape::Cylinder => ObjectKind::Torch,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ObjectKind::Column => "column",
            ObjectKind::Skull => "skull",
            ObjectKind::Torch => "torch",
        }
    }
}

impl fmt::Display for ObjectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvObject {
    pub id: ObjectId,
    pub kind: ObjectKind,
    pub color: Color,
    pub size: Size,
    pub position: Vec2,
}

impl EnvObject {
    pub fn radius_scale(&self) -> f64 {
        match self.size {
            Size::Small => 1.0,
            Size::Large => LARGE_RADIUS_SCALE,
        }
    }
}

/// Agent position and heading; heading is kept in `[0, 2π)`, measured
/// counter-clockwise from the environment +x axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Pose {
            x,
            y,
            heading: normalize_heading(heading),
        }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    /// Signed angle from the heading to `p`, positive to the agent's left,
    /// in `(-π, π]`.
    pub fn bearing_to(&self, p: Vec2) -> f64 {
        let d = p - self.position();
        wrap_angle(d.y.atan2(d.x) - self.heading)
    }
}

pub fn normalize_heading(h: f64) -> f64 {
    let r = h.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = normalize_heading(a);
    if r > std::f64::consts::PI {
        r - TAU
    } else {
        r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappedScene {
    pub scene_id: u64,
    pub objects: Vec<EnvObject>,
    pub spawn: Pose,
    pub env_bounds: EnvBounds,
    /// Image of the scene bounds; every object lies inside it.
    pub object_band: EnvBounds,
    /// Scene camera frame expressed in environment coordinates.
    pub camera: CameraFrame,
}

impl MappedScene {
    pub fn object(&self, id: ObjectId) -> Option<&EnvObject> {
        self.objects.iter().find(|o| o.id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MappingConfig {
    pub env_bounds: EnvBounds,
    /// Region the scene bounds are mapped onto.
    pub object_band: EnvBounds,
    /// Distance between the spawn point and the environment edge behind it.
    pub standoff: f64,
}

impl Default for MappingConfig {
    fn default() -> Self {
        MappingConfig {
            env_bounds: EnvBounds::new(0.0, 512.0, 0.0, 512.0),
            object_band: EnvBounds::new(64.0, 448.0, 64.0, 448.0),
            standoff: 48.0,
        }
    }
}

fn map_axis(v: f64, s_min: f64, s_max: f64, e_min: f64, e_max: f64) -> f64 {
    (v * (e_max - e_min) + (s_max * e_min - s_min * e_max)) / (s_max - s_min)
}

/// Affine map from scene coordinates onto `eb`, one axis at a time.
pub fn map_point(sb: &SceneBounds, eb: &EnvBounds, p: Vec2) -> Result<Vec2, MappingError> {
    if sb.x_max == sb.x_min {
        return Err(MappingError::DegenerateBounds('x'));
    }
    if sb.y_max == sb.y_min {
        return Err(MappingError::DegenerateBounds('y'));
    }
    Ok(Vec2::new(
        map_axis(p.x, sb.x_min, sb.x_max, eb.x_min, eb.x_max),
        map_axis(p.y, sb.y_min, sb.y_max, eb.y_min, eb.y_max),
    ))
}

/// Per-axis scale factors of [`map_point`].
pub fn axis_scales(sb: &SceneBounds, eb: &EnvBounds) -> (f64, f64) {
    (
        (eb.x_max - eb.x_min) / (sb.x_max - sb.x_min),
        (eb.y_max - eb.y_min) / (sb.y_max - sb.y_min),
    )
}

/// Camera directions pushed through the linear part of the map and
/// renormalized. Orthogonality survives when the scales are equal or the
/// frame is axis-aligned.
pub fn map_camera(camera: &CameraFrame, sb: &SceneBounds, eb: &EnvBounds) -> CameraFrame {
    let (sx, sy) = axis_scales(sb, eb);
    let map_dir = |d: Vec2| Vec2::new(d.x * sx, d.y * sy).normalized();
    CameraFrame {
        left_dir: map_dir(camera.left_dir),
        front_dir: map_dir(camera.front_dir),
    }
}

/// Material, if any, is dropped.
pub fn map_object(o: &SceneObject, sb: &SceneBounds, eb: &EnvBounds) -> Result<EnvObject, MappingError> {
    Ok(EnvObject {
        id: o.id,
        kind: ObjectKind::from_shape(o.shape),
        color: o.color,
        size: o.size,
        position: map_point(sb, eb, o.position)?,
    })
}

/// Spawn on the environment edge behind the objects along the mapped
/// camera's front direction, moved `standoff` inward, facing the band center.
pub fn spawn_pose(ms: &MappedScene, camera: &CameraFrame, standoff: f64) -> Pose {
    let front = camera.front_dir.normalized();
    let center = ms.object_band.center();
    let reach = ms
        .env_bounds
        .corners()
        .iter()
        .map(|&c| (c - center).dot(-front))
        .fold(0.0_f64, f64::max);
    let p = ms.env_bounds.clamp(center - front * (reach - standoff));
    Pose::new(p.x, p.y, front.y.atan2(front.x))
}

pub fn map_scene(scene: &SceneGraph, cfg: &MappingConfig) -> Result<MappedScene, MappingError> {
    let objects = scene
        .objects
        .iter()
        .map(|o| map_object(o, &scene.bounds, &cfg.object_band))
        .collect::<Result<Vec<_>, _>>()?;
    let camera = map_camera(&scene.camera, &scene.bounds, &cfg.object_band);
    let mut ms = MappedScene {
        scene_id: scene.id,
        objects,
        spawn: Pose::new(0.0, 0.0, 0.0),
        env_bounds: cfg.env_bounds,
        object_band: cfg.object_band,
        camera,
    };
    ms.spawn = spawn_pose(&ms, &camera, cfg.standoff);
    Ok(ms)
}
