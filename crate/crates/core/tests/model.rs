use proptest::prelude::*;
use proptest::strategy::ValueTree;
use scenevo::geom::{Polyline, Vec2};
use scenevo::model::{
    load_scenario, save_scenario, scenario_from_str, scenario_to_string, AdvScenario, AgentClass, AgentKind, AgentSpec,
    Background, Behavior, Footprint, LightState, MetaScenario, PerturbationRecord, Pose, RoadType, ScenarioIoError,
    StaticObstacle, Trajectory,
};
use scenevo::roads::RoadLibrary;

/// Finite doubles of every magnitude, signed zeros and subnormals included.
fn float() -> impl Strategy<Value = f64> {
    prop_oneof![
        4 => -500.0..500.0f64,
        1 => prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO,
    ]
}

fn point() -> impl Strategy<Value = Vec2> {
    (float(), float()).prop_map(|(x, y)| Vec2::new(x, y))
}

fn spec(kind: AgentKind, id: String) -> impl Strategy<Value = AgentSpec> {
    (
        prop::sample::select(AgentClass::ALL.to_vec()),
        prop::sample::select(Behavior::ALL.to_vec()),
        (float(), float(), float()),
        (0.1..20.0f64, 0.1..4.0f64),
    )
        .prop_map(move |(class, behavior, (x, y, h), (l, w))| {
            let mut s = AgentSpec::new(id.clone(), kind, class, Pose::new(x, y, h), behavior);
            s.footprint = Footprint::new(l, w);
            s
        })
}

fn scenario() -> impl Strategy<Value = AdvScenario> {
    (
        prop::sample::select(RoadType::ALL.to_vec()),
        prop::sample::select(LightState::ALL.to_vec()),
        1usize..30,
        prop::sample::select(vec![0.05, 0.1, 0.2, 1.0 / 3.0]),
        0usize..4,
        prop::collection::vec((-200.0..200.0f64, -200.0..200.0f64), 0..3),
    )
        .prop_flat_map(|(road, light, frames, dt, n_bg, obstacles)| {
            (
                spec(AgentKind::Ego, "ego".into()),
                spec(AgentKind::Adversary, "adversary".into()),
                prop::collection::vec(point(), frames),
                (0..n_bg)
                    .map(|i| (spec(AgentKind::Background, format!("bg-{i}")), prop::collection::vec(point(), frames)))
                    .collect::<Vec<_>>(),
                prop::collection::vec((0..n_bg.max(1), 0..frames, 0..=frames, 0..=frames, prop::collection::vec(point(), 0..4)), 0..3),
                Just((road, light, dt, obstacles)),
            )
        })
        .prop_map(|(ego, adversary, adv_pts, bgs, perts, (road, light, dt, obstacles))| {
            let mut context = RoadLibrary::standard().get(road).unwrap().with_light(light);
            for (i, (x, y)) in obstacles.into_iter().enumerate() {
                context.obstacles.push(StaticObstacle {
                    id: format!("obstacle-{i}"),
                    class: AgentClass::Truck,
                    footprint: Footprint::new(8.0, 2.5),
                    pose: Pose::new(x, y, 0.3 * i as f64),
                });
            }
            context.lanes[0].centerline = Polyline::new(vec![Vec2::new(-0.0, 1e-300), Vec2::new(0.1 + 0.2, 7.0 / 3.0)]);
            let meta = MetaScenario { ego, adversary, context, adversary_trajectory: Trajectory::new(dt, adv_pts) };
            let backgrounds =
                bgs.into_iter().map(|(spec, pts)| Background { spec, trajectory: Trajectory::new(dt, pts) }).collect();
            let perturbations = perts
                .into_iter()
                .map(|(agent_index, keyframe, a, b, pts)| PerturbationRecord {
                    agent_index,
                    keyframe,
                    window: (a, b),
                    original: pts.clone(),
                    optimized: pts.iter().map(|p| Vec2::new(p.y, p.x)).collect(),
                })
                .collect();
            AdvScenario { meta, backgrounds, perturbations }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn save_load_is_lossless(s in scenario()) {
        let text = scenario_to_string(&s);
        let back = scenario_from_str(&text).unwrap();
        prop_assert_eq!(&back, &s);
        // Bit-level: signed zeros and last-digit rounding survive as well.
        prop_assert_eq!(scenario_to_string(&back), text);
    }
}

#[test]
fn file_round_trip_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    for i in 0..20 {
        let s = scenario().new_tree(&mut runner).unwrap().current();
        let path = dir.path().join(format!("s{i}.json"));
        save_scenario(&s, &path).unwrap();
        assert_eq!(load_scenario(&path).unwrap(), s);
    }

    let text = std::fs::read_to_string(dir.path().join("s0.json")).unwrap();
    let wrong = text.replacen("\"v1\"", "\"v0\"", 1);
    assert!(matches!(scenario_from_str(&wrong), Err(ScenarioIoError::Version { .. })));
    let broken = &text[..text.len() / 2];
    assert!(matches!(scenario_from_str(broken), Err(ScenarioIoError::Parse { .. })));
    assert!(matches!(load_scenario(dir.path().join("missing.json")), Err(ScenarioIoError::Io { .. })));
}
