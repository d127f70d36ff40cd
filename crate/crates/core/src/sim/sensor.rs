use crate::geom::{wrap_angle, OrientedRect, Vec2};

/// True iff the open segment `(eye, target)` crosses any obstacle.
pub fn line_of_sight_occluded(eye: Vec2, target: Vec2, obstacles: &[OrientedRect]) -> bool {
    obstacles.iter().any(|o| o.intersects_open_segment(eye, target))
}

/// Range and field-of-view limits of the ego sensor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SensorModel {
    pub range: f64,
    pub fov: f64,
}

impl SensorModel {
    fn in_cone(&self, eye: Vec2, heading: f64, p: Vec2) -> bool {
        let d = p - eye;
        let dist = d.norm();
        if dist > self.range {
            return false;
        }
        dist == 0.0 || wrap_angle(d.angle() - heading).abs() <= 0.5 * self.fov + 1e-12
    }

    /// A target counts as seen when its centre or any corner lies within range
    /// and field of view with a clear line of sight. `blockers` must exclude
    /// the ego's and the target's own footprints.
    pub fn sees(&self, eye: Vec2, heading: f64, target: &OrientedRect, blockers: &[OrientedRect]) -> bool {
        std::iter::once(target.center)
            .chain(target.corners())
            .any(|p| p != eye && self.in_cone(eye, heading, p) && !line_of_sight_occluded(eye, p, blockers))
    }
}
