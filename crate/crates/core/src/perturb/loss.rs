use serde::{Deserialize, Serialize};

use crate::geom::Vec2;
use crate::perturb::PerturbError;
use crate::scalar::Scalar;

/// Guards the occlusion term when ego and adversary coincide (metres).
pub const OCC_EPS: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights<S = f64> {
    pub lambda1: S,
    pub lambda2: S,
    pub lambda3: S,
}

impl<S: Scalar> Default for LossWeights<S> {
    fn default() -> Self {
        LossWeights { lambda1: S::lit(0.3), lambda2: S::lit(0.2), lambda3: S::lit(0.5) }
    }
}

impl<S: Scalar> LossWeights<S> {
    pub fn new(lambda1: S, lambda2: S, lambda3: S) -> Result<Self, PerturbError> {
        let w = LossWeights { lambda1, lambda2, lambda3 };
        if [lambda1, lambda2, lambda3].iter().any(|l| !(*l >= S::zero()) || !l.is_finite()) {
            return Err(PerturbError::Domain(format!("loss weights must be finite and >= 0, got ({lambda1}, {lambda2}, {lambda3})")));
        }
        Ok(w)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossTerms<S = f64> {
    pub total: S,
    pub l_ego: S,
    pub l_occ: S,
    pub l_smooth: S,
}

fn check<S: Scalar>(seg: &[Vec2<S>], ego: &[Vec2<S>], adv: &[Vec2<S>]) -> Result<(), PerturbError> {
    if ego.len() != seg.len() || adv.len() != seg.len() {
        return Err(PerturbError::Dimension(format!(
            "segment has {} frames, ego {}, adversary {}",
            seg.len(),
            ego.len(),
            adv.len()
        )));
    }
    if seg.len() < 3 {
        return Err(PerturbError::Domain(format!("segment needs at least 3 frames for the smoothness term, got {}", seg.len())));
    }
    Ok(())
}

#[inline]
fn second_diff<S: Scalar>(seg: &[Vec2<S>], t: usize) -> Vec2<S> {
    seg[t + 1] - seg[t] * S::lit(2.0) + seg[t - 1]
}

pub fn loss<S: Scalar>(seg: &[Vec2<S>], ego: &[Vec2<S>], adv: &[Vec2<S>], w: &LossWeights<S>) -> Result<LossTerms<S>, PerturbError> {
    check(seg, ego, adv)?;
    let n = seg.len();
    let eps = S::lit(OCC_EPS);
    let mut l_ego = S::zero();
    let mut l_occ = S::zero();
    for t in 0..n {
        let r = seg[t] - ego[t];
        let v = adv[t] - ego[t];
        l_ego = l_ego + r.norm();
        l_occ = l_occ + r.cross(v).abs() / v.norm().max(eps);
    }
    let nf = S::from_usize_lossy(n);
    l_ego = l_ego / nf;
    l_occ = l_occ / nf;
    let mut l_smooth = S::zero();
    for t in 1..n - 1 {
        l_smooth = l_smooth + second_diff(seg, t).norm_sq();
    }
    l_smooth = l_smooth / S::from_usize_lossy(n - 2);
    let total = w.lambda1 * l_ego + w.lambda2 * l_occ + w.lambda3 * l_smooth;
    Ok(LossTerms { total, l_ego, l_occ, l_smooth })
}

/// Analytic gradient of `total` with respect to every segment position.
/// Where a norm or the cross product is exactly zero the subgradient 0 is used.
pub fn loss_gradient<S: Scalar>(
    seg: &[Vec2<S>],
    ego: &[Vec2<S>],
    adv: &[Vec2<S>],
    w: &LossWeights<S>,
) -> Result<Vec<Vec2<S>>, PerturbError> {
    check(seg, ego, adv)?;
    let n = seg.len();
    let eps = S::lit(OCC_EPS);
    let nf = S::from_usize_lossy(n);
    let mut g = vec![Vec2::zero(); n];
    for t in 0..n {
        let r = seg[t] - ego[t];
        let d = r.norm();
        if d > S::zero() {
            g[t] += r * (w.lambda1 / (d * nf));
        }
        let v = adv[t] - ego[t];
        let c = r.cross(v);
        if c != S::zero() {
            let sign = c.signum();
            // d(r × v)/dr = (v.y, -v.x)
            g[t] += Vec2::new(v.y, -v.x) * (sign * w.lambda2 / (v.norm().max(eps) * nf));
        }
    }
    let k = S::lit(2.0) * w.lambda3 / S::from_usize_lossy(n - 2);
    for t in 1..n - 1 {
        let d = second_diff(seg, t) * k;
        g[t - 1] += d;
        g[t] -= d * S::lit(2.0);
        g[t + 1] += d;
    }
    Ok(g)
}
