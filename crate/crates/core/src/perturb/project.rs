use crate::geom::{Polyline, Vec2};
use crate::scalar::Scalar;

/// Upper bound on sweeps over the four sub-steps.
const MAX_PASSES: usize = 1000;

/// Lane corridor a perturbed segment must stay in.
#[derive(Clone, Debug, PartialEq)]
pub struct Corridor<S = f64> {
    pub centerline: Polyline<S>,
    /// Largest allowed `|lateral offset|`: lane half-width minus vehicle half-width.
    pub limit: S,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeasibilityConstraints<S = f64> {
    pub v_max: S,
    pub a_max: S,
    pub corridor: Option<Corridor<S>>,
    pub blend_frames: usize,
}

impl<S: Scalar> FeasibilityConstraints<S> {
    pub fn new(v_max: S, corridor: Option<Corridor<S>>) -> Self {
        FeasibilityConstraints { v_max, a_max: S::lit(4.0), corridor, blend_frames: 3 }
    }
}

fn tolerance<S: Scalar>() -> S {
    S::lit(1e-9).max(S::epsilon() * S::lit(1e3))
}

/// Per-frame displacement at most `v_max·dt`, or the original displacement
/// where the baseline already moves faster.
fn limit_speed<S: Scalar>(p: &mut [Vec2<S>], o: &[Vec2<S>], step: S, tol: S) -> bool {
    let mut changed = false;
    for j in 1..p.len() {
        let d = p[j] - p[j - 1];
        let lim = step.max((o[j] - o[j - 1]).norm());
        let n = d.norm();
        if n > lim + tol {
            p[j] = p[j - 1] + d * (lim / n);
            changed = true;
        }
    }
    changed
}

/// Second differences at most `a_max·dt²` (or the original's). A violation
/// at frame `j` is removed by moving `p[j]` alone, so fixes stay local.
fn limit_accel<S: Scalar>(p: &mut [Vec2<S>], o: &[Vec2<S>], step: S, tol: S) -> bool {
    let two = S::lit(2.0);
    let mut changed = false;
    let n_frames = p.len();
    let mut fix = |p: &mut [Vec2<S>], j: usize| {
        let dd = p[j + 1] - p[j] * two + p[j - 1];
        let lim = step.max((o[j + 1] - o[j] * two + o[j - 1]).norm());
        let n = dd.norm();
        if n > lim + tol {
            p[j] += dd * ((S::one() - lim / n) / two);
            changed = true;
        }
    };
    for j in 1..n_frames.saturating_sub(1) {
        fix(p, j);
    }
    for j in (1..n_frames.saturating_sub(1)).rev() {
        fix(p, j);
    }
    changed
}

/// `lims[j]`: corridor limit at frame `j`, widened to the original's offset.
fn limit_lateral<S: Scalar>(p: &mut [Vec2<S>], lims: &[S], c: &Corridor<S>, tol: S) -> bool {
    let mut changed = false;
    for (pj, &lim) in p.iter_mut().zip(lims) {
        let proj = c.centerline.project(*pj);
        let l = proj.lateral;
        if l.abs() > lim + tol {
            let normal = proj.tangent.perp();
            *pj -= normal * (l - l.signum() * lim);
            changed = true;
        }
    }
    changed
}

/// Deviation from the original ramps linearly from zero at each end of the
/// segment over `b` frames.
fn blend_ends<S: Scalar>(p: &mut [Vec2<S>], o: &[Vec2<S>], b: usize, tol: S) -> bool {
    let n = p.len();
    if b == 0 || n == 0 {
        return false;
    }
    let bf = S::from_usize_lossy(b);
    let mut changed = false;
    let mut set = |p: &mut [Vec2<S>], j: usize, target: Vec2<S>| {
        if (p[j] - target).norm() > tol {
            p[j] = target;
            changed = true;
        }
    };
    let head = p[b] - o[b];
    for j in 0..b {
        set(p, j, o[j] + head * (S::from_usize_lossy(j) / bf));
    }
    let tail = p[n - 1 - b] - o[n - 1 - b];
    for j in n - b..n {
        set(p, j, o[j] + tail * (S::from_usize_lossy(n - 1 - j) / bf));
    }
    changed
}

fn lateral_limits<S: Scalar>(o: &[Vec2<S>], c: &FeasibilityConstraints<S>) -> Vec<S> {
    match &c.corridor {
        Some(corr) => o.iter().map(|&q| corr.limit.max(corr.centerline.project(q).lateral.abs())).collect(),
        None => Vec::new(),
    }
}

fn pass<S: Scalar>(
    p: &mut [Vec2<S>],
    o: &[Vec2<S>],
    lims: &[S],
    c: &FeasibilityConstraints<S>,
    dt: S,
    tol: S,
) -> bool {
    let b = c.blend_frames.min(p.len().saturating_sub(1) / 2);
    let mut changed = limit_speed(p, o, c.v_max * dt, tol);
    changed |= limit_accel(p, o, c.a_max * dt * dt, tol);
    if let Some(corr) = &c.corridor {
        changed |= limit_lateral(p, lims, corr, tol);
    }
    changed |= blend_ends(p, o, b, tol);
    changed
}

/// Enforces, in order: displacement per frame, change of velocity per frame,
/// corridor offset and boundary blending. The sweep repeats until nothing
/// moves; a segment that already satisfies every constraint is returned as is.
pub fn project_feasible<S: Scalar>(
    segment: &[Vec2<S>],
    original: &[Vec2<S>],
    c: &FeasibilityConstraints<S>,
    dt: S,
) -> Vec<Vec2<S>> {
    assert_eq!(segment.len(), original.len(), "segment and original must have equal length");
    let tol = tolerance::<S>();
    let lims = lateral_limits(original, c);
    let mut p = segment.to_vec();
    for _ in 0..MAX_PASSES {
        if !pass(&mut p, original, &lims, c, dt, tol) {
            break;
        }
    }
    p
}

/// True when one sweep of the projection leaves the segment untouched.
pub fn is_feasible<S: Scalar>(segment: &[Vec2<S>], original: &[Vec2<S>], c: &FeasibilityConstraints<S>, dt: S) -> bool {
    if segment.len() != original.len() {
        return false;
    }
    let mut p = segment.to_vec();
    !pass(&mut p, original, &lateral_limits(original, c), c, dt, tolerance::<S>())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize, v: f64, y: f64) -> Vec<Vec2> {
        (0..n).map(|j| Vec2::new(j as f64 * v * 0.1, y)).collect()
    }

    fn straight_corridor(limit: f64) -> Corridor {
        Corridor { centerline: Polyline::new(vec![Vec2::new(-50.0, 0.0), Vec2::new(200.0, 0.0)]), limit }
    }

    #[test]
    fn feasible_segment_unchanged() {
        let o = line(20, 10.0, 0.0);
        let c = FeasibilityConstraints::new(20.0, Some(straight_corridor(0.85)));
        let mut p = o.clone();
        for (j, q) in p.iter_mut().enumerate().take(16).skip(4) {
            q.y += 0.01 * (j as f64 - 3.0).min(3.0);
        }
        let once = project_feasible(&p, &o, &c, 0.1);
        assert_eq!(project_feasible(&once, &o, &c, 0.1), once);
        assert!(is_feasible(&once, &o, &c, 0.1));
        assert_eq!(project_feasible(&o, &o, &c, 0.1), o);
    }

    #[test]
    fn speed_spike_clamped_to_v_max_dt() {
        let o = line(12, 10.0, 0.0);
        let mut p = o.clone();
        // frame 6 jumps 6 m ahead of frame 5: 60 m/s
        p[6] = Vec2::new(p[5].x + 6.0, 0.0);
        let c = FeasibilityConstraints { v_max: 20.0, a_max: 1e9, corridor: None, blend_frames: 0 };
        let q = project_feasible(&p, &o, &c, 0.1);
        assert!(((q[6] - q[5]).norm() - 2.0).abs() < 1e-12);
        assert!(q.windows(2).all(|w| (w[1] - w[0]).norm() <= 2.0 + 1e-9));
    }

    #[test]
    fn corridor_excursion_moved_to_boundary_along_normal() {
        let o = line(10, 10.0, 0.0);
        let mut p = o.clone();
        p[5].y = 1.85;
        let c = FeasibilityConstraints { v_max: 1e9, a_max: 1e9, corridor: Some(straight_corridor(0.85)), blend_frames: 0 };
        let q = project_feasible(&p, &o, &c, 0.1);
        assert!((q[5].y - 0.85).abs() < 1e-12);
        assert_eq!(q[5].x, p[5].x);
    }

    #[test]
    fn blended_ends_rejoin_original() {
        let o = line(20, 10.0, 0.0);
        let p: Vec<Vec2> = o.iter().map(|q| *q + Vec2::new(0.0, 0.5)).collect();
        let c = FeasibilityConstraints { v_max: 1e9, a_max: 1e9, corridor: None, blend_frames: 3 };
        let q = project_feasible(&p, &o, &c, 0.1);
        assert_eq!(q[0], o[0]);
        assert_eq!(q[19], o[19]);
        assert!((q[1].y - 0.5 / 3.0).abs() < 1e-12);
        assert!((q[3].y - 0.5).abs() < 1e-12);
    }
}
