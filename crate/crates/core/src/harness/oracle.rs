//! Brute-force reference interpreter.
//!
//! Decides membership object by object, node by node, and recomputes spatial
//! relations from raw coordinates. Shares nothing with
//! [`crate::program::eval_node`] beyond the term type, so the two can check
//! each other.

use crate::program::Node;
use crate::scene::{ObjectDescriptor, ObjectId, SceneGraph, SceneObject, SpatialRelation, RELATION_MARGIN};

fn has_attributes(d: &ObjectDescriptor, o: &SceneObject) -> bool {
    if let Some(size) = d.size {
        if size != o.size {
            return false;
        }
    }
    if let Some(color) = d.color {
        if color != o.color {
            return false;
        }
    }
    if let Some(shape) = d.shape {
        if shape != o.shape {
            return false;
        }
    }
    true
}

fn stands_in(relation: SpatialRelation, o: &SceneObject, anchor: &SceneObject, scene: &SceneGraph) -> bool {
    let dx = o.position.x - anchor.position.x;
    let dy = o.position.y - anchor.position.y;
    let (ax, ay) = match relation {
        SpatialRelation::Left => (scene.camera.left_dir.x, scene.camera.left_dir.y),
        SpatialRelation::Right => (-scene.camera.left_dir.x, -scene.camera.left_dir.y),
        SpatialRelation::Behind => (scene.camera.front_dir.x, scene.camera.front_dir.y),
        SpatialRelation::Front => (-scene.camera.front_dir.x, -scene.camera.front_dir.y),
    };
    dx * ax + dy * ay > RELATION_MARGIN
}

/// `None` when some `unique` or `relate` node sees a non-singleton set.
fn member(node: &Node, scene: &SceneGraph, o: &SceneObject) -> Option<bool> {
    match node {
        Node::Scene => Some(true),
        Node::Filter(d, inner) => Some(has_attributes(d, o) && member(inner, scene, o)?),
        Node::Relate(r, inner) => {
            let mut anchors = Vec::new();
            for x in &scene.objects {
                if member(inner, scene, x)? {
                    anchors.push(x);
                }
            }
            if anchors.len() != 1 {
                return None;
            }
            let anchor = anchors[0];
            Some(o.id != anchor.id && stands_in(*r, o, anchor, scene))
        }
        Node::Unique(inner) => {
            let mut count = 0;
            for x in &scene.objects {
                if member(inner, scene, x)? {
                    count += 1;
                }
            }
            if count != 1 {
                return None;
            }
            member(inner, scene, o)
        }
    }
}

/// Denotation of `node`, or `None` if evaluation fails a uniqueness check.
pub fn brute_force_denotation(node: &Node, scene: &SceneGraph) -> Option<Vec<ObjectId>> {
    let mut out = Vec::new();
    for o in &scene.objects {
        if member(node, scene, o)? {
            out.push(o.id);
        }
    }
    Some(out)
}

/// True iff `node` denotes exactly `{target}`.
pub fn verifies(node: &Node, scene: &SceneGraph, target: ObjectId) -> bool {
    brute_force_denotation(node, scene).is_some_and(|d| d == [target])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::{eval_node, FilterProgram};
    use crate::scene::tests::{object, scene};
    use crate::scene::{Color, Shape, Size};

    #[test]
    fn agrees_on_small_scene() {
        let s = scene(vec![
            object(0, Size::Small, Color::Red, Shape::Sphere, 2.0, 0.0),
            object(1, Size::Large, Color::Blue, Shape::Cube, -2.0, 0.0),
            object(2, Size::Small, Color::Red, Shape::Cube, -1.0, 2.0),
        ]);
        for p in FilterProgram::enumerate() {
            let node = p.to_node();
            let fast = eval_node(&node, &s).ok().map(|set| set.into_iter().collect::<Vec<_>>());
            assert_eq!(fast, brute_force_denotation(&node, &s), "{p:?}");
        }
    }

    #[test]
    fn verifies_only_singletons() {
        let s = scene(vec![
            object(0, Size::Small, Color::Red, Shape::Sphere, 2.0, 0.0),
            object(1, Size::Large, Color::Red, Shape::Cube, -2.0, 0.0),
        ]);
        let red = ObjectDescriptor::new(None, Some(Color::Red), None);
        let node = Node::filter(red, Node::Scene);
        assert_eq!(brute_force_denotation(&node, &s), Some(vec![ObjectId(0), ObjectId(1)]));
        assert!(!verifies(&Node::unique(node), &s, ObjectId(0)));
        let cube = ObjectDescriptor::new(None, None, Some(Shape::Cube));
        assert!(verifies(&Node::unique(Node::filter(cube, Node::Scene)), &s, ObjectId(1)));
    }
}
