//! Plan-view vector math, angle helpers and circular azimuth sets.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::ops::{Add, Mul, Neg, Sub};

/// A point or displacement in the plan view, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector at `angle` radians from +x, counter-clockwise.
    pub fn from_angle(angle: f64) -> Self {
        Self::new(angle.cos(), angle.sin())
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn rotate(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wraps radians into `[0, 2π)`.
pub fn wrap_tau(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Wraps radians into `(-π, π]`.
pub fn wrap_pi(a: f64) -> f64 {
    let r = wrap_tau(a);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Wraps degrees into `[0, 360)`.
pub fn wrap_deg(a: f64) -> f64 {
    let r = a.rem_euclid(360.0);
    if r >= 360.0 {
        0.0
    } else {
        r
    }
}

/// Shortest distance from `p` to the segment `a`–`b`.
pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len_sq = ab.norm_sq();
    if len_sq == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

/// Shortest distance between segments `p0`–`p1` and `q0`–`q1`.
pub fn segment_segment_distance(p0: Vec2, p1: Vec2, q0: Vec2, q1: Vec2) -> f64 {
    if segments_intersect(p0, p1, q0, q1) {
        return 0.0;
    }
    point_segment_distance(p0, q0, q1)
        .min(point_segment_distance(p1, q0, q1))
        .min(point_segment_distance(q0, p0, p1))
        .min(point_segment_distance(q1, p0, p1))
}

fn segments_intersect(p0: Vec2, p1: Vec2, q0: Vec2, q1: Vec2) -> bool {
    let d1 = (p1 - p0).cross(q0 - p0);
    let d2 = (p1 - p0).cross(q1 - p0);
    let d3 = (q1 - q0).cross(p0 - q0);
    let d4 = (q1 - q0).cross(p1 - q0);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

/// Ray parameter of the first intersection of `origin + t·dir` (unit `dir`)
/// with segment `a`–`b`, if any with `t ≥ 0`.
pub fn ray_segment(origin: Vec2, dir: Vec2, a: Vec2, b: Vec2) -> Option<f64> {
    let e = b - a;
    let denom = dir.cross(e);
    let w = a - origin;
    if denom.abs() < 1e-15 {
        // Parallel. Collinear overlap counts as a hit at the nearer endpoint.
        if w.cross(dir).abs() > 1e-12 {
            return None;
        }
        let ta = w.dot(dir);
        let tb = (b - origin).dot(dir);
        let (lo, hi) = if ta <= tb { (ta, tb) } else { (tb, ta) };
        return if hi < 0.0 { None } else { Some(lo.max(0.0)) };
    }
    let t = w.cross(e) / denom;
    let s = w.cross(dir) / denom;
    (t >= 0.0 && (-1e-12..=1.0 + 1e-12).contains(&s)).then_some(t)
}

/// Ray parameter of the first intersection with a disc boundary. An origin
/// already inside the disc yields `Some(0.0)`.
pub fn ray_disc(origin: Vec2, dir: Vec2, center: Vec2, radius: f64) -> Option<f64> {
    let oc = origin - center;
    let c = oc.norm_sq() - radius * radius;
    if c <= 0.0 {
        return Some(0.0);
    }
    let b = oc.dot(dir);
    if b > 0.0 {
        return None;
    }
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    // Numerically stable near root.
    let sq = disc.sqrt();
    let q = -b + sq;
    Some(c / q)
}

/// A half-open circular interval of azimuths `[start, start + width)`, degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub start_deg: f64,
    pub width_deg: f64,
}

impl Arc {
    pub fn new(start_deg: f64, width_deg: f64) -> Self {
        Self {
            start_deg: wrap_deg(start_deg),
            width_deg: width_deg.clamp(0.0, 360.0),
        }
    }

    pub fn centered(center_deg: f64, half_width_deg: f64) -> Self {
        Self::new(center_deg - half_width_deg, 2.0 * half_width_deg)
    }

    /// Arc from `start` counter-clockwise to `end`; `start == end` is empty.
    pub fn from_bounds(start_deg: f64, end_deg: f64) -> Self {
        let width = wrap_deg(end_deg - start_deg);
        Self::new(start_deg, width)
    }

    pub fn end_deg(&self) -> f64 {
        wrap_deg(self.start_deg + self.width_deg)
    }

    pub fn contains(&self, az_deg: f64) -> bool {
        wrap_deg(az_deg - self.start_deg) < self.width_deg
    }
}

/// Union of circular arcs kept as sorted, disjoint `[lo, hi)` pieces in
/// `[0, 360)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ArcSet {
    pieces: Vec<(f64, f64)>,
}

impl ArcSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn full() -> Self {
        Self {
            pieces: vec![(0.0, 360.0)],
        }
    }

    pub fn from_arc(arc: Arc) -> Self {
        let mut s = Self::new();
        s.insert(arc);
        s
    }

    pub fn insert(&mut self, arc: Arc) {
        if arc.width_deg <= 0.0 {
            return;
        }
        if arc.width_deg >= 360.0 {
            self.pieces = vec![(0.0, 360.0)];
            return;
        }
        let lo = arc.start_deg;
        let hi = lo + arc.width_deg;
        if hi <= 360.0 {
            self.pieces.push((lo, hi));
        } else {
            self.pieces.push((lo, 360.0));
            self.pieces.push((0.0, hi - 360.0));
        }
        self.normalize();
    }

    pub fn union(&mut self, other: &ArcSet) {
        self.pieces.extend_from_slice(&other.pieces);
        self.normalize();
    }

    fn normalize(&mut self) {
        self.pieces.retain(|(lo, hi)| hi > lo);
        self.pieces.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(self.pieces.len());
        for &(lo, hi) in &self.pieces {
            match merged.last_mut() {
                Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
                _ => merged.push((lo, hi)),
            }
        }
        self.pieces = merged;
    }

    pub fn pieces(&self) -> &[(f64, f64)] {
        &self.pieces
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    /// Total angular measure in degrees.
    pub fn measure_deg(&self) -> f64 {
        self.pieces.iter().map(|(lo, hi)| hi - lo).sum()
    }

    pub fn contains(&self, az_deg: f64) -> bool {
        let a = wrap_deg(az_deg);
        self.pieces.iter().any(|&(lo, hi)| a >= lo && a < hi)
    }

    /// Pieces of `self` that fall inside `arc`, as `[lo, hi)` degree pairs in
    /// counter-clockwise order starting from `arc.start_deg`. `hi` may exceed
    /// 360 when the piece wraps.
    pub fn intersect_arc(&self, arc: Arc) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        if arc.width_deg <= 0.0 {
            return out;
        }
        // Work in the arc's own frame: offsets in [0, width).
        for &(lo, hi) in &self.pieces {
            for shift in [-360.0, 0.0, 360.0] {
                let a = lo + shift - arc.start_deg;
                let b = hi + shift - arc.start_deg;
                let a = a.max(0.0);
                let b = b.min(arc.width_deg);
                if b > a {
                    out.push((arc.start_deg + a, arc.start_deg + b));
                }
            }
        }
        out.sort_by(|x, y| x.0.total_cmp(&y.0));
        // Merge pieces split at the 0/360 seam.
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(out.len());
        for (lo, hi) in out {
            match merged.last_mut() {
                Some(last) if lo <= last.1 + 1e-12 => last.1 = last.1.max(hi),
                _ => merged.push((lo, hi)),
            }
        }
        merged
    }

    pub fn intersects_arc(&self, arc: Arc) -> bool {
        !self.intersect_arc(arc).is_empty()
    }
}
