use navgen::mapping::{axis_scales, map_point, map_scene, EnvBounds, MappingConfig};
use navgen::scene::{relations_for_offset, SceneBounds, Vec2, RELATION_MARGIN};
use navgen::source::{generate_scene, GenConfig};
use proptest::prelude::*;

fn defaults() -> (SceneBounds, EnvBounds) {
    (SceneBounds::default(), MappingConfig::default().object_band)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn preserves_affine_combinations(
        px in -3.0..3.0f64, py in -3.0..3.0f64,
        qx in -3.0..3.0f64, qy in -3.0..3.0f64,
        t in 0.0..1.0f64,
    ) {
        let (sb, eb) = defaults();
        let p = Vec2::new(px, py);
        let q = Vec2::new(qx, qy);
        let r = p + (q - p) * t;
        let (mp, mq, mr) = (map_point(&sb, &eb, p).unwrap(), map_point(&sb, &eb, q).unwrap(), map_point(&sb, &eb, r).unwrap());
        let expected = mp + (mq - mp) * t;
        prop_assert!(close(mr.x, expected.x) && close(mr.y, expected.y));
        // equal axis scales: distance ratios survive
        let d = p.distance(q);
        if d > 1e-6 {
            prop_assert!(close(mp.distance(mr) / mp.distance(mq), p.distance(r) / d));
        }
    }

    #[test]
    fn preserves_axis_order(a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let (sb, eb) = defaults();
        let ma = map_point(&sb, &eb, Vec2::new(a, b)).unwrap();
        let mb = map_point(&sb, &eb, Vec2::new(b, a)).unwrap();
        prop_assert_eq!(a < b, ma.x < mb.x);
        prop_assert_eq!(b < a, ma.y < mb.y);
        prop_assert!(eb.contains(ma));
    }
}

#[test]
fn endpoints_are_fixed_points() {
    let (sb, eb) = defaults();
    let at = |x: f64| map_point(&sb, &eb, Vec2::new(x, x)).unwrap();
    assert_eq!(at(-3.0), Vec2::new(64.0, 64.0));
    assert_eq!(at(0.0), Vec2::new(256.0, 256.0));
    assert_eq!(at(3.0), Vec2::new(448.0, 448.0));
}

#[test]
fn relations_survive_the_mapping() {
    let cfg = MappingConfig::default();
    let (scale, _) = axis_scales(&SceneBounds::default(), &cfg.object_band);
    for seed in 0..300 {
        let scene = generate_scene(&GenConfig::new(5, seed)).unwrap();
        let mapped = map_scene(&scene, &cfg).unwrap();
        for a in &scene.objects {
            for b in scene.objects.iter().filter(|b| b.id != a.id) {
                let before = relations_for_offset(a.position - b.position, &scene.camera, RELATION_MARGIN);
                let ma = mapped.object(a.id).unwrap().position;
                let mb = mapped.object(b.id).unwrap().position;
                let after = relations_for_offset(ma - mb, &mapped.camera, RELATION_MARGIN * scale);
                assert_eq!(before, after, "scene {seed}: {} vs {}", a.id, b.id);
            }
        }
    }
}
