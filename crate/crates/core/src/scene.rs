//! Scene graphs: objects with discrete attributes on a ground plane, a camera
//! frame that grounds the four spatial relations, and structural validation.
//!
//! Relations are never stored; they are recomputed from positions on demand
//! with [`relate`].

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Half-width of the dead band around each camera axis. Inside it no relation
/// on that axis is asserted.
pub const RELATION_MARGIN: f64 = 0.05;

/// Tolerance for camera frame unit length and orthogonality.
pub const FRAME_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("cannot relate object {0} to itself")]
    SameObject(ObjectId),
    #[error("object {0} does not exist in the scene")]
    UnknownId(ObjectId),
    #[error("camera frame must be orthonormal (|left|={left_norm}, |front|={front_norm}, dot={dot})")]
    InvalidCamera {
        left_norm: f64,
        front_norm: f64,
        dot: f64,
    },
    #[error("bounds must satisfy min < max on both axes")]
    InvalidBounds,
}

/// Error returned when parsing an attribute word outside the vocabulary.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown {kind} value {value:?}")]
pub struct UnknownValue {
    pub kind: &'static str,
    pub value: String,
}

macro_rules! vocabulary {
    ($(#[$meta:meta])* $name:ident, $kind:literal, { $($variant:ident => $word:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "lowercase")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $word),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = UnknownValue;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($word => Ok($name::$variant),)+
                    _ => Err(UnknownValue { kind: $kind, value: s.to_string() }),
                }
            }
        }
    };
}

vocabulary!(
    /// The eight CLEVR colors.
    Color, "color", {
        Gray => "gray",
        Red => "red",
        Blue => "blue",
        Green => "green",
        Brown => "brown",
        Purple => "purple",
        Cyan => "cyan",
        Yellow => "yellow",
    }
);

vocabulary!(Shape, "shape", {
    Cube => "cube",
    Sphere => "sphere",
    Cylinder => "cylinder",
});

vocabulary!(Size, "size", {
    Small => "small",
    Large => "large",
});

vocabulary!(
    /// Kept on ingestion only; never part of a descriptor or the mapping.
    Material, "material", {
        Rubber => "rubber",
        Metal => "metal",
    }
);

vocabulary!(SpatialRelation, "relation", {
    Left => "left",
    Right => "right",
    Front => "front",
    Behind => "behind",
});

impl SpatialRelation {
    pub fn inverse(self) -> SpatialRelation {
        match self {
            SpatialRelation::Left => SpatialRelation::Right,
            SpatialRelation::Right => SpatialRelation::Left,
            SpatialRelation::Front => SpatialRelation::Behind,
            SpatialRelation::Behind => SpatialRelation::Front,
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

/// A point or direction on the ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    /// Unit vector in the same direction. Returns `self` unchanged for the
    /// zero vector.
    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        if n == 0.0 {
            self
        } else {
            Vec2::new(self.x / n, self.y / n)
        }
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(pub usize);

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Partial attribute description. The all-absent descriptor is the bare noun
/// "object" and matches everything.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct ObjectDescriptor {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<Size>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<Color>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<Shape>,
}

impl ObjectDescriptor {
    pub const ANY: ObjectDescriptor = ObjectDescriptor {
        size: None,
        color: None,
        shape: None,
    };

    pub fn new(size: Option<Size>, color: Option<Color>, shape: Option<Shape>) -> Self {
        ObjectDescriptor { size, color, shape }
    }

    pub fn exact(size: Size, color: Color, shape: Shape) -> Self {
        ObjectDescriptor::new(Some(size), Some(color), Some(shape))
    }

    pub fn is_fully_specified(&self) -> bool {
        self.size.is_some() && self.color.is_some() && self.shape.is_some()
    }

    pub fn matches(&self, object: &SceneObject) -> bool {
        matches(self, object)
    }

    /// Every descriptor, absent fields included (3 · 9 · 4 = 108).
    pub fn enumerate() -> impl Iterator<Item = ObjectDescriptor> {
        optional(Size::ALL).flat_map(|size| {
            optional(Color::ALL).flat_map(move |color| {
                optional(Shape::ALL).map(move |shape| ObjectDescriptor { size, color, shape })
            })
        })
    }

    /// Descriptors that name a concrete shape, as required of a referent.
    pub fn enumerate_with_shape() -> impl Iterator<Item = ObjectDescriptor> {
        ObjectDescriptor::enumerate().filter(|d| d.shape.is_some())
    }

    /// The 48 fully specified object types.
    pub fn enumerate_fully_specified() -> impl Iterator<Item = ObjectDescriptor> {
        Size::ALL.iter().flat_map(|&size| {
            Color::ALL.iter().flat_map(move |&color| {
                Shape::ALL
                    .iter()
                    .map(move |&shape| ObjectDescriptor::exact(size, color, shape))
            })
        })
    }
}

fn optional<T: Copy>(values: &'static [T]) -> impl Iterator<Item = Option<T>> + Clone {
    std::iter::once(None).chain(values.iter().copied().map(Some))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: ObjectId,
    pub color: Color,
    pub shape: Shape,
    pub size: Size,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub material: Option<Material>,
    pub position: Vec2,
}

impl SceneObject {
    pub fn descriptor(&self) -> ObjectDescriptor {
        ObjectDescriptor::exact(self.size, self.color, self.shape)
    }
}

/// View frame of the scene camera projected on the ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraFrame {
    pub left_dir: Vec2,
    pub front_dir: Vec2,
}

impl Default for CameraFrame {
    fn default() -> Self {
        CameraFrame {
            left_dir: Vec2::new(-1.0, 0.0),
            front_dir: Vec2::new(0.0, 1.0),
        }
    }
}

impl CameraFrame {
    pub fn new(left_dir: Vec2, front_dir: Vec2) -> Result<Self, SceneError> {
        let frame = CameraFrame {
            left_dir,
            front_dir,
        };
        frame.check()?;
        Ok(frame)
    }

    pub fn check(&self) -> Result<(), SceneError> {
        let left_norm = self.left_dir.norm();
        let front_norm = self.front_dir.norm();
        let dot = self.left_dir.dot(self.front_dir);
        if (left_norm - 1.0).abs() > FRAME_TOLERANCE
            || (front_norm - 1.0).abs() > FRAME_TOLERANCE
            || dot.abs() > FRAME_TOLERANCE
        {
            return Err(SceneError::InvalidCamera {
                left_norm,
                front_norm,
                dot,
            });
        }
        Ok(())
    }

    /// Direction along which `relation` holds.
    pub fn direction(&self, relation: SpatialRelation) -> Vec2 {
        match relation {
            SpatialRelation::Left => self.left_dir,
            SpatialRelation::Right => -self.left_dir,
            SpatialRelation::Behind => self.front_dir,
            SpatialRelation::Front => -self.front_dir,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneBounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Default for SceneBounds {
    fn default() -> Self {
        SceneBounds {
            x_min: -3.0,
            x_max: 3.0,
            y_min: -3.0,
            y_max: 3.0,
        }
    }
}

impl SceneBounds {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self, SceneError> {
        let bounds = SceneBounds {
            x_min,
            x_max,
            y_min,
            y_max,
        };
        if bounds.is_valid() {
            Ok(bounds)
        } else {
            Err(SceneError::InvalidBounds)
        }
    }

    pub fn is_valid(&self) -> bool {
        self.x_min < self.x_max && self.y_min < self.y_max
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        )
    }
}

/// Immutable once built; shared freely between episode workers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGraph {
    pub id: u64,
    pub objects: Vec<SceneObject>,
    pub camera: CameraFrame,
    pub bounds: SceneBounds,
}

impl SceneGraph {
    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn object(&self, id: ObjectId) -> Option<&SceneObject> {
        // ids are normally 0..n-1 and stored in order
        match self.objects.get(id.0) {
            Some(o) if o.id == id => Some(o),
            _ => self.objects.iter().find(|o| o.id == id),
        }
    }

    pub fn ids(&self) -> impl Iterator<Item = ObjectId> + '_ {
        self.objects.iter().map(|o| o.id)
    }

    pub fn relate(&self, a: ObjectId, b: ObjectId) -> Result<RelationSet, SceneError> {
        relate(self, a, b)
    }
}

/// Subset of the four relations, at most one per camera axis when produced
/// by [`relate`].
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct RelationSet(u8);

impl RelationSet {
    pub const EMPTY: RelationSet = RelationSet(0);

    pub fn contains(self, r: SpatialRelation) -> bool {
        self.0 & r.bit() != 0
    }

    pub fn insert(&mut self, r: SpatialRelation) {
        self.0 |= r.bit();
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn union(self, other: RelationSet) -> RelationSet {
        RelationSet(self.0 | other.0)
    }

    pub fn iter(self) -> impl Iterator<Item = SpatialRelation> {
        SpatialRelation::ALL
            .iter()
            .copied()
            .filter(move |&r| self.contains(r))
    }

    /// The set obtained by swapping left/right and front/behind.
    pub fn inverse(self) -> RelationSet {
        self.iter().fold(RelationSet::EMPTY, |mut acc, r| {
            acc.insert(r.inverse());
            acc
        })
    }
}

impl FromIterator<SpatialRelation> for RelationSet {
    fn from_iter<I: IntoIterator<Item = SpatialRelation>>(iter: I) -> Self {
        let mut set = RelationSet::EMPTY;
        for r in iter {
            set.insert(r);
        }
        set
    }
}

impl fmt::Debug for RelationSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Relations that hold for an object displaced by `offset` from its referent.
pub fn relations_for_offset(offset: Vec2, camera: &CameraFrame, margin: f64) -> RelationSet {
    SpatialRelation::ALL
        .iter()
        .copied()
        .filter(|&r| offset.dot(camera.direction(r)) > margin)
        .collect()
}

/// Relations `r` such that object `a` stands in relation `r` to object `b`.
pub fn relate(scene: &SceneGraph, a: ObjectId, b: ObjectId) -> Result<RelationSet, SceneError> {
    relate_with_margin(scene, a, b, RELATION_MARGIN)
}

pub fn relate_with_margin(
    scene: &SceneGraph,
    a: ObjectId,
    b: ObjectId,
    margin: f64,
) -> Result<RelationSet, SceneError> {
    if a == b {
        return Err(SceneError::SameObject(a));
    }
    let oa = scene.object(a).ok_or(SceneError::UnknownId(a))?;
    let ob = scene.object(b).ok_or(SceneError::UnknownId(b))?;
    Ok(relations_for_offset(
        oa.position - ob.position,
        &scene.camera,
        margin,
    ))
}

/// True iff every present field of `d` equals the object's attribute.
pub fn matches(d: &ObjectDescriptor, o: &SceneObject) -> bool {
    d.size.is_none_or(|s| s == o.size)
        && d.color.is_none_or(|c| c == o.color)
        && d.shape.is_none_or(|s| s == o.shape)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    InvalidBounds,
    InvalidCamera(String),
    OutOfBounds { id: ObjectId, position: Vec2 },
    DuplicateId { id: ObjectId },
    /// Object at `index` carries an id other than `index`.
    IdOutOfSequence { index: usize, id: ObjectId },
    MinSeparation { a: ObjectId, b: ObjectId, distance: f64 },
    /// The pair lies inside the dead band on both camera axes, so no
    /// relation holds in either direction.
    AmbiguousRelation { a: ObjectId, b: ObjectId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::InvalidBounds => write!(f, "scene bounds are empty"),
            Violation::InvalidCamera(msg) => write!(f, "invalid camera frame: {msg}"),
            Violation::OutOfBounds { id, position } => {
                write!(f, "object {id} at ({}, {}) is out of bounds", position.x, position.y)
            }
            Violation::DuplicateId { id } => write!(f, "duplicate object id {id}"),
            Violation::IdOutOfSequence { index, id } => {
                write!(f, "object at index {index} has id {id}")
            }
            Violation::MinSeparation { a, b, distance } => {
                write!(f, "objects {a} and {b} are {distance} apart")
            }
            Violation::AmbiguousRelation { a, b } => {
                write!(f, "objects {a} and {b} have no relation on either axis")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationOptions {
    pub d_min: f64,
    pub margin: f64,
    pub check_ambiguity: bool,
}

impl ValidationOptions {
    pub fn new(d_min: f64) -> Self {
        ValidationOptions {
            d_min,
            margin: RELATION_MARGIN,
            check_ambiguity: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_scene(scene: &SceneGraph, d_min: f64) -> ValidationReport {
    validate_scene_with(scene, &ValidationOptions::new(d_min))
}

pub fn validate_scene_with(scene: &SceneGraph, opts: &ValidationOptions) -> ValidationReport {
    let mut violations = Vec::new();
    if !scene.bounds.is_valid() {
        violations.push(Violation::InvalidBounds);
    }
    if let Err(e) = scene.camera.check() {
        violations.push(Violation::InvalidCamera(e.to_string()));
    }

    let mut seen = std::collections::BTreeSet::new();
    for (index, o) in scene.objects.iter().enumerate() {
        if !seen.insert(o.id) {
            violations.push(Violation::DuplicateId { id: o.id });
        } else if o.id.0 != index {
            violations.push(Violation::IdOutOfSequence { index, id: o.id });
        }
        if !scene.bounds.contains(o.position) {
            violations.push(Violation::OutOfBounds {
                id: o.id,
                position: o.position,
            });
        }
    }

    for (i, a) in scene.objects.iter().enumerate() {
        for b in &scene.objects[i + 1..] {
            let offset = a.position - b.position;
            let distance = offset.norm();
            if distance < opts.d_min {
                violations.push(Violation::MinSeparation {
                    a: a.id,
                    b: b.id,
                    distance,
                });
            }
            if opts.check_ambiguity
                && offset.dot(scene.camera.left_dir).abs() <= opts.margin
                && offset.dot(scene.camera.front_dir).abs() <= opts.margin
            {
                violations.push(Violation::AmbiguousRelation { a: a.id, b: b.id });
            }
        }
    }
    ValidationReport { violations }
}
