use crate::knowledge::instantiate::TRIGGER_DISTANCE;
use crate::model::{AgentClass, Behavior, MetaScenario};

/// Scenic-syntax template with `{slot}` markers.
pub const SCENIC_TEMPLATE: &str = include_str!("../../data/scenic_template.scenic");

fn blueprint(c: AgentClass) -> &'static str {
    match c {
        AgentClass::Car => "Car",
        AgentClass::Truck => "Truck",
        AgentClass::Pedestrian => "Pedestrian",
        AgentClass::Cyclist => "Bicycle",
        AgentClass::Scooter => "Motorcycle",
    }
}

fn behavior_call(b: Behavior) -> &'static str {
    match b {
        Behavior::LaneFollow => "FollowLaneBehavior(target_speed=ADV_SPEED)",
        Behavior::Stationary => "StayBehavior()",
        Behavior::Crossing => "CrossingBehavior(speed=ADV_SPEED)",
        Behavior::SuddenEmergence => "WaitThenCrossBehavior(trigger=TRIGGER_DISTANCE, speed=ADV_SPEED)",
        Behavior::RedLightRun => "RunRedLightBehavior(speed=ADV_SPEED)",
        Behavior::CutIn => "CutInBehavior(speed=ADV_SPEED)",
        Behavior::SuddenBrake => "SuddenBrakeBehavior(speed=ADV_SPEED)",
        Behavior::LeftTurn => "LeftTurnBehavior(speed=ADV_SPEED)",
    }
}

/// Slot names and values for `m`, in template order.
pub fn scenic_slots(m: &MetaScenario) -> Vec<(&'static str, String)> {
    let ctx = &m.context;
    let ego = &m.ego.initial_pose;
    let adv = &m.adversary.initial_pose;
    let occluder = match ctx.obstacles.first() {
        Some(o) => format!(
            "occluder = new {} at ({:.2}, {:.2}), facing {:.1} deg",
            blueprint(o.class),
            o.pose.x,
            o.pose.y,
            o.pose.heading.to_degrees()
        ),
        None => "# no occluder".to_owned(),
    };
    let trigger = if m.adversary.behavior == Behavior::SuddenEmergence { TRIGGER_DISTANCE } else { 0.0 };
    vec![
        ("town", format!("desk_{}", ctx.road_type.as_str())),
        ("road", ctx.road_type.as_str().to_owned()),
        ("light", ctx.light_state.as_str().to_owned()),
        ("ego_speed", "10.0".to_owned()),
        ("adv_class", m.adversary.class.as_str().to_owned()),
        ("behavior", m.adversary.behavior.as_str().to_owned()),
        ("adv_speed", format!("{:.2}", m.adversary_trajectory.max_speed())),
        ("trigger_distance", format!("{trigger:.1}")),
        ("ego_x", format!("{:.2}", ego.x)),
        ("ego_y", format!("{:.2}", ego.y)),
        ("ego_heading", format!("{:.1}", ego.heading.to_degrees())),
        ("adv_blueprint", blueprint(m.adversary.class).to_owned()),
        ("adv_x", format!("{:.2}", adv.x)),
        ("adv_y", format!("{:.2}", adv.y)),
        ("adv_heading", format!("{:.1}", adv.heading.to_degrees())),
        ("behavior_call", behavior_call(m.adversary.behavior).to_owned()),
        ("occluder", occluder),
        ("min_distance", "5".to_owned()),
        ("duration", format!("{:.1}", m.frames() as f64 * m.dt())),
    ]
}

/// Fills the shipped template. The text is never executed.
pub fn emit_scenic(m: &MetaScenario) -> String {
    emit_with(SCENIC_TEMPLATE, m)
}

pub fn emit_with(template: &str, m: &MetaScenario) -> String {
    let mut out = template.to_owned();
    for (name, value) in scenic_slots(m) {
        out = out.replace(&format!("{{{name}}}"), &value);
    }
    out
}

/// `{slot}` markers left in `text`.
pub fn unfilled_slots(text: &str) -> Vec<String> {
    let mut found = Vec::new();
    let mut rest = text;
    while let Some(i) = rest.find('{') {
        let tail = &rest[i + 1..];
        match tail.find('}') {
            Some(j) if j > 0 && tail[..j].chars().all(|c| c.is_ascii_alphanumeric() || c == '_') => {
                found.push(tail[..j].to_owned());
                rest = &tail[j + 1..];
            }
            _ => rest = tail,
        }
    }
    found
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knowledge::instantiate::instantiate_meta;
    use crate::knowledge::kb::Placement;
    use crate::knowledge::parse::Structured;
    use crate::model::{LightState, RoadType};
    use crate::roads::RoadLibrary;

    fn flagship() -> MetaScenario {
        let s = Structured {
            class: AgentClass::Pedestrian,
            placement: Placement::OccludedRoadside,
            offset: 25.0,
            behavior: Behavior::SuddenEmergence,
            road: RoadType::Straight,
            light: LightState::None,
        };
        instantiate_meta(&s, &RoadLibrary::standard()).unwrap()
    }

    #[test]
    fn template_slots_all_known() {
        let m = flagship();
        let names: Vec<&str> = scenic_slots(&m).into_iter().map(|(n, _)| n).collect();
        let mut in_template = unfilled_slots(SCENIC_TEMPLATE);
        in_template.sort();
        in_template.dedup();
        for n in &in_template {
            assert!(names.contains(&n.as_str()), "{n}");
        }
        assert!(unfilled_slots(&emit_scenic(&m)).is_empty());
        assert_eq!(emit_scenic(&m).lines().count(), SCENIC_TEMPLATE.lines().count());
    }

    #[test]
    fn flagship_matches_golden() {
        assert_eq!(emit_scenic(&flagship()), include_str!("../../data/golden/flagship.scenic"));
    }

    #[test]
    fn light_change_touches_one_line() {
        let a = flagship();
        let mut b = a.clone();
        b.context.light_state = LightState::Red;
        let (ta, tb) = (emit_scenic(&a), emit_scenic(&b));
        let diff: Vec<(&str, &str)> = ta.lines().zip(tb.lines()).filter(|(x, y)| x != y).collect();
        assert_eq!(diff, vec![("param light_state = 'none'", "param light_state = 'red'")]);
    }

    #[test]
    fn unfilled_detection() {
        assert_eq!(unfilled_slots("a {x} {} {y_1} {not a slot}"), vec!["x", "y_1"]);
    }
}
