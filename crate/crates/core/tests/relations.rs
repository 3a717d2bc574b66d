use std::f64::consts::TAU;

use navgen::scene::{
    matches, relations_for_offset, CameraFrame, Color, ObjectDescriptor, ObjectId, SceneObject, Shape, Size,
    SpatialRelation, Vec2, RELATION_MARGIN,
};
use navgen::source::{generate_scene, GenConfig};
use proptest::prelude::*;

fn rotated_camera(theta: f64) -> CameraFrame {
    let (s, c) = theta.sin_cos();
    let rot = |v: Vec2| Vec2::new(c * v.x - s * v.y, s * v.x + c * v.y);
    CameraFrame::new(rot(Vec2::new(-1.0, 0.0)), rot(Vec2::new(0.0, 1.0))).unwrap()
}

#[test]
fn generated_scenes_obey_relation_algebra() {
    use SpatialRelation::*;
    for seed in 0..1000u64 {
        let scene = generate_scene(&GenConfig::new(3 + (seed % 3) as usize, seed)).unwrap();
        for a in scene.ids() {
            for b in scene.ids().filter(|&b| b != a) {
                let ab = scene.relate(a, b).unwrap();
                let ba = scene.relate(b, a).unwrap();
                assert_eq!(ab.inverse(), ba, "scene {seed}: {a} vs {b}");
                assert!(!(ab.contains(Left) && ab.contains(Right)));
                assert!(!(ab.contains(Front) && ab.contains(Behind)));
                // ambiguity-free generation: some relation always holds
                assert!(!ab.is_empty(), "scene {seed}: {a} vs {b}");
            }
        }
    }
}

fn any_descriptor() -> impl Strategy<Value = ObjectDescriptor> {
    (
        proptest::option::of(proptest::sample::select(Size::ALL.to_vec())),
        proptest::option::of(proptest::sample::select(Color::ALL.to_vec())),
        proptest::option::of(proptest::sample::select(Shape::ALL.to_vec())),
    )
        .prop_map(|(size, color, shape)| ObjectDescriptor::new(size, color, shape))
}

fn any_object() -> impl Strategy<Value = SceneObject> {
    (
        proptest::sample::select(Size::ALL.to_vec()),
        proptest::sample::select(Color::ALL.to_vec()),
        proptest::sample::select(Shape::ALL.to_vec()),
    )
        .prop_map(|(size, color, shape)| SceneObject {
            id: ObjectId(0),
            color,
            shape,
            size,
            material: None,
            position: Vec2::new(0.0, 0.0),
        })
}

proptest! {
    #[test]
    fn offsets_are_antisymmetric(x in -6.0..6.0f64, y in -6.0..6.0f64, theta in 0.0..TAU) {
        let cam = rotated_camera(theta);
        let fwd = relations_for_offset(Vec2::new(x, y), &cam, RELATION_MARGIN);
        let back = relations_for_offset(Vec2::new(-x, -y), &cam, RELATION_MARGIN);
        prop_assert_eq!(fwd.inverse(), back);
        prop_assert!(fwd.len() <= 2);
    }

    #[test]
    fn dropping_a_field_never_loses_matches(d in any_descriptor(), o in any_object(), field in 0..3usize) {
        let mut coarser = d;
        match field {
            0 => coarser.size = None,
            1 => coarser.color = None,
            _ => coarser.shape = None,
        }
        if matches(&d, &o) {
            prop_assert!(matches(&coarser, &o));
        }
        prop_assert!(matches(&ObjectDescriptor::ANY, &o));
        prop_assert!(matches(&o.descriptor(), &o));
    }
}
