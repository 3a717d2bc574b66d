//! Grounded navigation instructions from symbolic scene graphs.
//!
//! Scenes ([`scene`]) are generated or imported ([`source`]); filter
//! programs over them ([`program`]) are sampled so they pick out exactly one
//! object and rendered as English ([`language`]). Scenes are then mapped into
//! a 2D navigation arena ([`mapping`]) where agents act in discrete episodes
//! ([`sim`]). [`harness`] ties it together for dataset builds and rollouts.

pub mod harness;
pub mod language;
pub mod mapping;
pub mod policy;
pub mod program;
pub mod scene;
pub mod sim;
pub mod source;

pub use language::{parse, realize, Lexicon, LexiconMode, Vocabulary};
pub use mapping::{map_scene, MappedScene, MappingConfig, Pose};
pub use policy::{Policy, PolicyKind};
pub use program::{FilterProgram, InstructionKind, InstructionRecord, Node};
pub use scene::{ObjectDescriptor, ObjectId, SceneGraph, SpatialRelation};
pub use sim::{Action, EnvConfig, Observation, Outcome, RewardScheme};
