use serde::{Deserialize, Serialize};

use crate::geom::Vec2;
use crate::model::ModelError;
use crate::scalar::Scalar;

/// Default simulation timestep (10 Hz).
pub const DEFAULT_DT: f64 = 0.1;

/// Positions sampled at a uniform timestep. Heading and speed are derived on
/// demand and never stored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<S = f64> {
    pub dt: S,
    pub points: Vec<Vec2<S>>,
}

impl<S: Scalar> Trajectory<S> {
    pub fn new(dt: S, points: Vec<Vec2<S>>) -> Self {
        Trajectory { dt, points }
    }

    /// `frames` copies of the same position.
    pub fn stationary(dt: S, at: Vec2<S>, frames: usize) -> Self {
        Trajectory { dt, points: vec![at; frames] }
    }

    /// Number of frames `T`.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn duration(&self) -> S {
        if self.points.is_empty() {
            S::zero()
        } else {
            self.dt * S::from_usize_lossy(self.points.len() - 1)
        }
    }

    /// Position at frame `t`, holding the last position past the end.
    pub fn at(&self, t: usize) -> Vec2<S> {
        let last = self.points.len().saturating_sub(1);
        self.points[t.min(last)]
    }

    /// Forward-difference displacement used by both speed and heading.
    fn step(&self, t: usize) -> Vec2<S> {
        let n = self.points.len();
        if n < 2 {
            return Vec2::zero();
        }
        let i = if t + 1 < n { t } else { n - 2 };
        self.points[i + 1] - self.points[i]
    }

    /// Speed at frame `t`: `|p[t+1] - p[t]| / dt`, the last frame copying the
    /// one before it.
    pub fn speed(&self, t: usize) -> S {
        self.step(t).norm() / self.dt
    }

    pub fn speeds(&self) -> Vec<S> {
        (0..self.points.len()).map(|t| self.speed(t)).collect()
    }

    /// Heading of motion at frame `t`. Frames without displacement inherit the
    /// nearest earlier heading (or the first moving heading at the start).
    pub fn headings(&self) -> Vec<S> {
        let n = self.points.len();
        let raw: Vec<Option<S>> = (0..n)
            .map(|t| {
                let d = self.step(t);
                (d.norm() > S::lit(1e-9)).then(|| d.angle())
            })
            .collect();
        let first = raw.iter().flatten().next().copied().unwrap_or_else(S::zero);
        let mut prev = first;
        raw.into_iter()
            .map(|h| {
                if let Some(h) = h {
                    prev = h;
                }
                prev
            })
            .collect()
    }

    pub fn heading(&self, t: usize) -> S {
        self.headings().get(t).copied().unwrap_or_else(S::zero)
    }

    pub fn max_speed(&self) -> S {
        self.speeds().into_iter().fold(S::zero(), S::max)
    }

    /// First frame holding a non-finite coordinate.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.points.iter().position(|p| !p.is_finite())
    }

    /// Linear interpolation onto a new uniform timestep. The first and last
    /// positions are kept exactly; when the duration is not a multiple of
    /// `new_dt` the final interval is shorter than `new_dt`.
    pub fn resample(&self, new_dt: S) -> Result<Self, ModelError> {
        if !(new_dt > S::zero()) || !new_dt.is_finite() {
            return Err(ModelError::NonPositiveDt(new_dt.to_f64_lossy()));
        }
        let n = self.points.len();
        if n < 2 {
            return Ok(Trajectory { dt: new_dt, points: self.points.clone() });
        }
        let duration = self.duration();
        let steps = (duration / new_dt).round().to_usize().unwrap_or(0).max(1);
        let ratio = new_dt / self.dt;
        let snap = S::lit(1e-9);
        let last = n - 1;
        let mut points = Vec::with_capacity(steps + 1);
        for k in 0..steps {
            let u = S::from_usize_lossy(k) * ratio;
            let nearest = u.round();
            if (u - nearest).abs() < snap {
                let i = nearest.to_usize().unwrap_or(last).min(last);
                points.push(self.points[i]);
                continue;
            }
            let i = u.floor().to_usize().unwrap_or(last).min(last);
            if i >= last {
                points.push(self.points[last]);
            } else {
                let frac = u - S::from_usize_lossy(i);
                points.push(self.points[i].lerp(self.points[i + 1], frac));
            }
        }
        points.push(self.points[last]);
        Ok(Trajectory { dt: new_dt, points })
    }

    pub fn cast<T: Scalar>(&self) -> Trajectory<T> {
        Trajectory {
            dt: T::lit(self.dt.to_f64_lossy()),
            points: self.points.iter().map(|p| p.cast()).collect(),
        }
    }
}
