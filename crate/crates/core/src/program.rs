//! Filter programs: the semantic form of an instruction.
//!
//! A program is a term over four node types (`scene`, `filter`, `relate`,
//! `unique`) that denotes a set of objects. [`FilterProgram`] restricts terms
//! to the two instruction forms in use; the interpreter itself works on any
//! [`Node`].

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Value};
use thiserror::Error;

use crate::language::{realize, Lexicon};
use crate::scene::{
    matches, relations_for_offset, Color, ObjectDescriptor, ObjectId, SceneGraph, Shape, Size,
    SpatialRelation, RELATION_MARGIN,
};

pub type ObjectSet = BTreeSet<ObjectId>;

/// Default number of candidate programs tried before giving up on a scene.
pub const DEFAULT_ATTEMPTS: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("expected exactly one referent, found {found}")]
    NonUniqueReferent { found: usize },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProgramError {
    #[error("malformed program: {0}")]
    Malformed(String),
    #[error("term is not a simple or complex instruction program")]
    UnsupportedForm,
    #[error("referent descriptor must name a shape")]
    ReferentWithoutShape,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SampleError {
    #[error("no uniquely identifying {kind} instruction found for scene {scene_id} in {attempts} attempts")]
    NoUniqueInstruction {
        scene_id: u64,
        kind: InstructionKind,
        attempts: usize,
    },
}

/// A program term.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Node {
    Scene,
    Filter(ObjectDescriptor, Box<Node>),
    Relate(SpatialRelation, Box<Node>),
    Unique(Box<Node>),
}

impl Node {
    pub fn filter(d: ObjectDescriptor, inner: Node) -> Node {
        Node::Filter(d, Box::new(inner))
    }

    pub fn relate(r: SpatialRelation, inner: Node) -> Node {
        Node::Relate(r, Box::new(inner))
    }

    pub fn unique(inner: Node) -> Node {
        Node::Unique(Box::new(inner))
    }

    /// Nested prefix form, e.g. `["unique",["filter",{"color":"red"},["scene"]]]`.
    pub fn to_json(&self) -> Value {
        match self {
            Node::Scene => json!(["scene"]),
            Node::Filter(d, inner) => json!(["filter", d, inner.to_json()]),
            Node::Relate(r, inner) => json!(["relate", r, inner.to_json()]),
            Node::Unique(inner) => json!(["unique", inner.to_json()]),
        }
    }

    pub fn from_json(v: &Value) -> Result<Node, ProgramError> {
        let malformed = |msg: &str| ProgramError::Malformed(format!("{msg}: {v}"));
        let items = v.as_array().ok_or_else(|| malformed("expected an array"))?;
        let head = items
            .first()
            .and_then(Value::as_str)
            .ok_or_else(|| malformed("expected a node name"))?;
        match (head, items.len()) {
            ("scene", 1) => Ok(Node::Scene),
            ("filter", 3) => {
                let d: ObjectDescriptor = serde_json::from_value(items[1].clone())
                    .map_err(|e| ProgramError::Malformed(format!("descriptor: {e}")))?;
                if let Some(extra) = items[1]
                    .as_object()
                    .and_then(|m| m.keys().find(|k| !matches!(k.as_str(), "size" | "color" | "shape")))
                {
                    return Err(ProgramError::Malformed(format!("unknown descriptor field {extra:?}")));
                }
                Ok(Node::filter(d, Node::from_json(&items[2])?))
            }
            ("relate", 3) => {
                let r: SpatialRelation = serde_json::from_value(items[1].clone())
                    .map_err(|e| ProgramError::Malformed(format!("relation: {e}")))?;
                Ok(Node::relate(r, Node::from_json(&items[2])?))
            }
            ("unique", 2) => Ok(Node::unique(Node::from_json(&items[1])?)),
            _ => Err(malformed("unknown node or wrong arity")),
        }
    }
}

impl Serialize for Node {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Node {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let v = Value::deserialize(deserializer)?;
        Node::from_json(&v).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstructionKind {
    Simple,
    Complex,
}

impl InstructionKind {
    pub const ALL: [InstructionKind; 2] = [InstructionKind::Simple, InstructionKind::Complex];
}

impl fmt::Display for InstructionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InstructionKind::Simple => "simple",
            InstructionKind::Complex => "complex",
        })
    }
}

/// An instruction program in one of the two supported forms.
///
/// * simple: `unique(filter(target, scene))`
/// * complex: `unique(filter(target, relate(r, unique(filter(referent, scene)))))`
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FilterProgram {
    Simple {
        target: ObjectDescriptor,
    },
    Complex {
        target: ObjectDescriptor,
        relation: SpatialRelation,
        referent: ObjectDescriptor,
    },
}

impl FilterProgram {
    pub fn simple(target: ObjectDescriptor) -> Self {
        FilterProgram::Simple { target }
    }

    pub fn complex(
        target: ObjectDescriptor,
        relation: SpatialRelation,
        referent: ObjectDescriptor,
    ) -> Result<Self, ProgramError> {
        if referent.shape.is_none() {
            return Err(ProgramError::ReferentWithoutShape);
        }
        Ok(FilterProgram::Complex {
            target,
            relation,
            referent,
        })
    }

    pub fn kind(&self) -> InstructionKind {
        match self {
            FilterProgram::Simple { .. } => InstructionKind::Simple,
            FilterProgram::Complex { .. } => InstructionKind::Complex,
        }
    }

    pub fn target(&self) -> &ObjectDescriptor {
        match self {
            FilterProgram::Simple { target } | FilterProgram::Complex { target, .. } => target,
        }
    }

    pub fn to_node(&self) -> Node {
        match *self {
            FilterProgram::Simple { target } => Node::unique(Node::filter(target, Node::Scene)),
            FilterProgram::Complex {
                target,
                relation,
                referent,
            } => Node::unique(Node::filter(
                target,
                Node::relate(relation, Node::unique(Node::filter(referent, Node::Scene))),
            )),
        }
    }

    pub fn from_node(node: &Node) -> Result<Self, ProgramError> {
        let Node::Unique(inner) = node else {
            return Err(ProgramError::UnsupportedForm);
        };
        let Node::Filter(target, rest) = inner.as_ref() else {
            return Err(ProgramError::UnsupportedForm);
        };
        match rest.as_ref() {
            Node::Scene => Ok(FilterProgram::simple(*target)),
            Node::Relate(relation, referent_term) => match referent_term.as_ref() {
                Node::Unique(f) => match f.as_ref() {
                    Node::Filter(referent, scene) if **scene == Node::Scene => {
                        FilterProgram::complex(*target, *relation, *referent)
                    }
                    _ => Err(ProgramError::UnsupportedForm),
                },
                _ => Err(ProgramError::UnsupportedForm),
            },
            _ => Err(ProgramError::UnsupportedForm),
        }
    }

    /// Every program in the finite grammar: 108 simple and 108 · 4 · 81
    /// complex programs.
    pub fn enumerate() -> impl Iterator<Item = FilterProgram> {
        let simple = ObjectDescriptor::enumerate().map(FilterProgram::simple);
        let complex = ObjectDescriptor::enumerate().flat_map(|target| {
            SpatialRelation::ALL.iter().flat_map(move |&relation| {
                ObjectDescriptor::enumerate_with_shape().map(move |referent| FilterProgram::Complex {
                    target,
                    relation,
                    referent,
                })
            })
        });
        simple.chain(complex)
    }
}

impl Serialize for FilterProgram {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_node().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for FilterProgram {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let node = Node::deserialize(deserializer)?;
        FilterProgram::from_node(&node).map_err(serde::de::Error::custom)
    }
}

/// One unit of supervision: the program denotes exactly `{target_id}` in the
/// named scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstructionRecord {
    pub scene_id: u64,
    pub kind: InstructionKind,
    pub text: String,
    pub program: FilterProgram,
    pub target_id: ObjectId,
}

pub fn eval_node(node: &Node, scene: &SceneGraph) -> Result<ObjectSet, EvalError> {
    match node {
        Node::Scene => Ok(scene.ids().collect()),
        Node::Filter(d, inner) => {
            let set = eval_node(inner, scene)?;
            Ok(set
                .into_iter()
                .filter(|&id| scene.object(id).is_some_and(|o| matches(d, o)))
                .collect())
        }
        Node::Relate(r, inner) => {
            let anchor = single(eval_node(inner, scene)?)?;
            let anchor = scene
                .object(anchor)
                .expect("denotations only contain scene ids");
            Ok(scene
                .objects
                .iter()
                .filter(|o| o.id != anchor.id)
                .filter(|o| {
                    relations_for_offset(o.position - anchor.position, &scene.camera, RELATION_MARGIN)
                        .contains(*r)
                })
                .map(|o| o.id)
                .collect())
        }
        Node::Unique(inner) => {
            let set = eval_node(inner, scene)?;
            single(set.clone())?;
            Ok(set)
        }
    }
}

fn single(set: ObjectSet) -> Result<ObjectId, EvalError> {
    let mut it = set.iter();
    match (it.next(), it.next()) {
        (Some(&id), None) => Ok(id),
        _ => Err(EvalError::NonUniqueReferent { found: set.len() }),
    }
}

pub fn eval_program(p: &FilterProgram, scene: &SceneGraph) -> Result<ObjectSet, EvalError> {
    eval_node(&p.to_node(), scene)
}

/// The single object the program picks out, if there is one.
pub fn denotes_unique(p: &FilterProgram, scene: &SceneGraph) -> Option<ObjectId> {
    eval_program(p, scene).ok().and_then(|set| single(set).ok())
}

fn draw_descriptor<R: Rng>(rng: &mut R, require_shape: bool) -> ObjectDescriptor {
    fn pick<T: Copy, R: Rng>(rng: &mut R, values: &[T]) -> Option<T> {
        let i = rng.gen_range(0..=values.len());
        values.get(i).copied()
    }
    let size = pick(rng, Size::ALL);
    let color = pick(rng, Color::ALL);
    let shape = if require_shape {
        Shape::ALL.choose(rng).copied()
    } else {
        pick(rng, Shape::ALL)
    };
    ObjectDescriptor { size, color, shape }
}

/// Draws a uniformly random program of the given kind.
pub fn draw_program<R: Rng>(rng: &mut R, kind: InstructionKind) -> FilterProgram {
    match kind {
        InstructionKind::Simple => FilterProgram::simple(draw_descriptor(rng, false)),
        InstructionKind::Complex => {
            let target = draw_descriptor(rng, false);
            let relation = *SpatialRelation::ALL.choose(rng).expect("non-empty");
            let referent = draw_descriptor(rng, true);
            FilterProgram::Complex {
                target,
                relation,
                referent,
            }
        }
    }
}

pub fn sample_instruction(
    scene: &SceneGraph,
    kind: InstructionKind,
    seed: u64,
    lexicon: &Lexicon,
) -> Result<InstructionRecord, SampleError> {
    sample_instruction_with(scene, kind, seed, lexicon, DEFAULT_ATTEMPTS)
}

/// Rejection-samples uniformly drawn programs until one picks out a single
/// object. Deterministic in `seed`.
pub fn sample_instruction_with(
    scene: &SceneGraph,
    kind: InstructionKind,
    seed: u64,
    lexicon: &Lexicon,
    attempts: usize,
) -> Result<InstructionRecord, SampleError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..attempts {
        let program = draw_program(&mut rng, kind);
        if let Some(target_id) = denotes_unique(&program, scene) {
            return Ok(InstructionRecord {
                scene_id: scene.id,
                kind,
                text: realize(&program, lexicon),
                program,
                target_id,
            });
        }
    }
    Err(SampleError::NoUniqueInstruction {
        scene_id: scene.id,
        kind,
        attempts,
    })
}

/// Counts fully specified complex instructions by enumeration, restricted to
/// the given relations.
pub fn enumerate_complex_space_with(relations: &[SpatialRelation]) -> usize {
    let mut count = 0;
    for _target in ObjectDescriptor::enumerate_fully_specified() {
        for _relation in relations {
            for _referent in ObjectDescriptor::enumerate_fully_specified() {
                count += 1;
            }
        }
    }
    count
}

pub fn enumerate_complex_space() -> usize {
    enumerate_complex_space_with(SpatialRelation::ALL)
}
