//! Planar geometry shared by every module: vectors, oriented rectangles
//! (separating-axis overlap, segment clipping) and polylines with
//! arc-length parameterisation.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::de::{Deserialize, Deserializer};
use serde::ser::{Serialize, Serializer};

use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec2<S = f64> {
    pub x: S,
    pub y: S,
}

impl<S: Scalar> Vec2<S> {
    #[inline]
    pub fn new(x: S, y: S) -> Self {
        Vec2 { x, y }
    }

    #[inline]
    pub fn zero() -> Self {
        Vec2::new(S::zero(), S::zero())
    }

    /// Unit vector pointing along `angle` (radians, counter-clockwise from +x).
    #[inline]
    pub fn from_angle(angle: S) -> Self {
        let (s, c) = angle.sin_cos();
        Vec2::new(c, s)
    }

    #[inline]
    pub fn dot(self, o: Self) -> S {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    #[inline]
    pub fn cross(self, o: Self) -> S {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm_sq(self) -> S {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> S {
        self.x.hypot(self.y)
    }

    /// Left-hand normal (rotated +90°).
    #[inline]
    pub fn perp(self) -> Self {
        Vec2::new(-self.y, self.x)
    }

    /// Unit vector in the same direction, or zero for a zero vector.
    pub fn normalized(self) -> Self {
        let n = self.norm();
        if n > S::zero() {
            self * (S::one() / n)
        } else {
            Vec2::zero()
        }
    }

    #[inline]
    pub fn angle(self) -> S {
        self.y.atan2(self.x)
    }

    pub fn rotate(self, angle: S) -> Self {
        let (s, c) = angle.sin_cos();
        Vec2::new(self.x * c - self.y * s, self.x * s + self.y * c)
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    #[inline]
    pub fn lerp(self, o: Self, t: S) -> Self {
        self + (o - self) * t
    }

    pub fn cast<T: Scalar>(self) -> Vec2<T> {
        Vec2::new(T::lit(self.x.to_f64_lossy()), T::lit(self.y.to_f64_lossy()))
    }
}

impl<S: Scalar> Add for Vec2<S> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl<S: Scalar> AddAssign for Vec2<S> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<S: Scalar> Sub for Vec2<S> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl<S: Scalar> SubAssign for Vec2<S> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<S: Scalar> Mul<S> for Vec2<S> {
    type Output = Self;
    #[inline]
    fn mul(self, k: S) -> Self {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl<S: Scalar> Neg for Vec2<S> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Vec2::new(-self.x, -self.y)
    }
}

impl<S: Scalar> fmt::Display for Vec2<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

// Serialized as a bare `[x, y]` pair so scenario files stay compact.
impl<S: Serialize> Serialize for Vec2<S> {
    fn serialize<Z: Serializer>(&self, serializer: Z) -> Result<Z::Ok, Z::Error> {
        (&self.x, &self.y).serialize(serializer)
    }
}

impl<'de, S: Deserialize<'de>> Deserialize<'de> for Vec2<S> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let [x, y] = <[S; 2]>::deserialize(deserializer)?;
        Ok(Vec2 { x, y })
    }
}

/// Rectangle with arbitrary heading, described by its center and half extents
/// along (length) and across (width) the heading.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrientedRect<S = f64> {
    pub center: Vec2<S>,
    pub heading: S,
    pub half_length: S,
    pub half_width: S,
}

impl<S: Scalar> OrientedRect<S> {
    pub fn new(center: Vec2<S>, heading: S, length: S, width: S) -> Self {
        let half = S::lit(0.5);
        OrientedRect { center, heading, half_length: length * half, half_width: width * half }
    }

    /// Unit axes (forward, left).
    pub fn axes(&self) -> [Vec2<S>; 2] {
        let f = Vec2::from_angle(self.heading);
        [f, f.perp()]
    }

    /// Corners in counter-clockwise order starting front-left.
    pub fn corners(&self) -> [Vec2<S>; 4] {
        let [f, l] = self.axes();
        let fl = f * self.half_length;
        let wl = l * self.half_width;
        [
            self.center + fl + wl,
            self.center - fl + wl,
            self.center - fl - wl,
            self.center + fl - wl,
        ]
    }

    /// Center of the front edge.
    pub fn front_center(&self) -> Vec2<S> {
        self.center + Vec2::from_angle(self.heading) * self.half_length
    }

    fn project_onto(&self, axis: Vec2<S>) -> (S, S) {
        let [f, l] = self.axes();
        let c = self.center.dot(axis);
        let r = self.half_length * f.dot(axis).abs() + self.half_width * l.dot(axis).abs();
        (c - r, c + r)
    }

    /// Separating-axis overlap test. Touching edges count as overlap.
    pub fn overlaps(&self, other: &Self) -> bool {
        let [a0, a1] = self.axes();
        let [b0, b1] = other.axes();
        [a0, a1, b0, b1].iter().all(|&axis| {
            let (min_a, max_a) = self.project_onto(axis);
            let (min_b, max_b) = other.project_onto(axis);
            max_a >= min_b && max_b >= min_a
        })
    }

    fn to_local(&self, p: Vec2<S>) -> Vec2<S> {
        let [f, l] = self.axes();
        let d = p - self.center;
        Vec2::new(d.dot(f), d.dot(l))
    }

    pub fn contains(&self, p: Vec2<S>) -> bool {
        let q = self.to_local(p);
        q.x.abs() <= self.half_length && q.y.abs() <= self.half_width
    }

    /// True when the open segment `(a, b)` meets the closed rectangle.
    ///
    /// Liang-Barsky clipping in the rectangle's local frame.
    pub fn intersects_open_segment(&self, a: Vec2<S>, b: Vec2<S>) -> bool {
        let p = self.to_local(a);
        let d = self.to_local(b) - p;
        let mut t0 = S::zero();
        let mut t1 = S::one();
        let slabs = [
            (d.x, p.x, self.half_length),
            (d.y, p.y, self.half_width),
        ];
        for (dir, start, half) in slabs {
            if dir == S::zero() {
                if start.abs() > half {
                    return false;
                }
                continue;
            }
            let mut lo = (-half - start) / dir;
            let mut hi = (half - start) / dir;
            if lo > hi {
                std::mem::swap(&mut lo, &mut hi);
            }
            t0 = t0.max(lo);
            t1 = t1.min(hi);
            if t0 > t1 {
                return false;
            }
        }
        // Exclude contact only at the segment endpoints themselves.
        t1 > S::zero() && t0 < S::one()
    }
}

/// Closest-point query result on a polyline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolylineProjection<S = f64> {
    /// Arc length of the closest point from the first vertex.
    pub arc_length: S,
    /// Signed lateral offset, positive to the left of the travel direction.
    pub lateral: S,
    pub point: Vec2<S>,
    /// Unit tangent of the segment holding the closest point.
    pub tangent: Vec2<S>,
    pub segment: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Polyline<S = f64> {
    points: Vec<Vec2<S>>,
    cumulative: Vec<S>,
}

impl<S: Scalar> Polyline<S> {
    /// Builds a polyline; consecutive duplicate vertices are dropped.
    pub fn new(points: Vec<Vec2<S>>) -> Self {
        let mut pts: Vec<Vec2<S>> = Vec::with_capacity(points.len());
        for p in points {
            if pts.last().map_or(true, |&q| (p - q).norm() > S::zero()) {
                pts.push(p);
            }
        }
        let mut cumulative = Vec::with_capacity(pts.len());
        let mut acc = S::zero();
        for (i, p) in pts.iter().enumerate() {
            if i > 0 {
                acc = acc + (*p - pts[i - 1]).norm();
            }
            cumulative.push(acc);
        }
        Polyline { points: pts, cumulative }
    }

    pub fn points(&self) -> &[Vec2<S>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn length(&self) -> S {
        self.cumulative.last().copied().unwrap_or_else(S::zero)
    }

    pub fn first(&self) -> Option<Vec2<S>> {
        self.points.first().copied()
    }

    pub fn last(&self) -> Option<Vec2<S>> {
        self.points.last().copied()
    }

    fn segment_for(&self, s: S) -> usize {
        let n = self.points.len();
        if n < 2 {
            return 0;
        }
        // Last segment whose start is <= s, clamped to valid segments.
        let idx = self.cumulative.partition_point(|&c| c <= s);
        idx.saturating_sub(1).min(n - 2)
    }

    /// Point and unit tangent at arc length `s`; extrapolates linearly past
    /// either end.
    pub fn sample(&self, s: S) -> (Vec2<S>, Vec2<S>) {
        match self.points.len() {
            0 => (Vec2::zero(), Vec2::new(S::one(), S::zero())),
            1 => (self.points[0], Vec2::new(S::one(), S::zero())),
            _ => {
                let i = self.segment_for(s);
                let a = self.points[i];
                let b = self.points[i + 1];
                let t = (b - a).normalized();
                (a + t * (s - self.cumulative[i]), t)
            }
        }
    }

    pub fn point_at(&self, s: S) -> Vec2<S> {
        self.sample(s).0
    }

    pub fn heading_at(&self, s: S) -> S {
        self.sample(s).1.angle()
    }

    /// Closest point on the polyline (ties resolved toward the earlier segment).
    pub fn project(&self, p: Vec2<S>) -> PolylineProjection<S> {
        let n = self.points.len();
        if n < 2 {
            let point = self.points.first().copied().unwrap_or_else(Vec2::zero);
            return PolylineProjection {
                arc_length: S::zero(),
                lateral: (p - point).norm(),
                point,
                tangent: Vec2::new(S::one(), S::zero()),
                segment: 0,
            };
        }
        let mut best = (S::infinity(), 0, S::zero());
        for i in 0..n - 1 {
            let a = self.points[i];
            let ab = self.points[i + 1] - a;
            let w = (p - a).dot(ab) / ab.norm_sq();
            let w = w.max(S::zero()).min(S::one());
            let d2 = (p - (a + ab * w)).norm_sq();
            if d2 < best.0 {
                best = (d2, i, w);
            }
        }
        let (d2, i, w) = best;
        let a = self.points[i];
        let len = self.cumulative[i + 1] - self.cumulative[i];
        let t = (self.points[i + 1] - a) * (S::one() / len);
        let u = w * len;
        let q = a + t * u;
        let dist = d2.sqrt();
        let lateral = if t.cross(p - q) < S::zero() { -dist } else { dist };
        PolylineProjection { arc_length: self.cumulative[i] + u, lateral, point: q, tangent: t, segment: i }
    }

    pub fn cast<T: Scalar>(&self) -> Polyline<T> {
        Polyline::new(self.points.iter().map(|p| p.cast()).collect())
    }
}

impl<S: Serialize> Serialize for Polyline<S> {
    fn serialize<Z: Serializer>(&self, serializer: Z) -> Result<Z::Ok, Z::Error> {
        self.points.serialize(serializer)
    }
}

impl<'de, S: Scalar + Deserialize<'de>> Deserialize<'de> for Polyline<S> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Ok(Polyline::new(Vec::<Vec2<S>>::deserialize(deserializer)?))
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle<S: Scalar>(a: S) -> S {
    let two_pi = S::PI() + S::PI();
    let mut r = a % two_pi;
    if r > S::PI() {
        r = r - two_pi;
    } else if r <= -S::PI() {
        r = r + two_pi;
    }
    r
}
