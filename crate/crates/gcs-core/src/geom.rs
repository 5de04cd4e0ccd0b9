//! Small planar geometry kernel: vectors, oriented lines, poses and rigid motions.

use serde::{Deserialize, Serialize};

pub type Vec2 = [f64; 2];

#[inline]
pub fn add(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn scale(a: Vec2, k: f64) -> Vec2 {
    [a[0] * k, a[1] * k]
}

#[inline]
pub fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn cross(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub fn norm(a: Vec2) -> f64 {
    a[0].hypot(a[1])
}

#[inline]
pub fn dist(a: Vec2, b: Vec2) -> f64 {
    norm(sub(a, b))
}

/// Counter-clockwise quarter turn.
#[inline]
pub fn perp(a: Vec2) -> Vec2 {
    [-a[1], a[0]]
}

pub fn normalize(a: Vec2) -> Option<Vec2> {
    let n = norm(a);
    if n > 0.0 && n.is_finite() {
        Some([a[0] / n, a[1] / n])
    } else {
        None
    }
}

/// Twice the signed area of the triangle (a, b, c); positive when c lies left of a→b.
#[inline]
pub fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    cross(sub(b, a), sub(c, a))
}

/// Oriented line `{x : n·x = d}` with unit normal `n`.
///
/// The direction of travel is `n` turned clockwise, so the normal points to the left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub n: Vec2,
    pub d: f64,
}

impl Line {
    pub fn new(n: Vec2, d: f64) -> Option<Line> {
        let len = norm(n);
        if !(len > 0.0) || !len.is_finite() {
            return None;
        }
        Some(Line {
            n: [n[0] / len, n[1] / len],
            d: d / len,
        })
    }

    pub fn x_axis() -> Line {
        Line { n: [0.0, 1.0], d: 0.0 }
    }

    /// Line through `p` travelling along `dir` (need not be unit).
    pub fn through(p: Vec2, dir: Vec2) -> Option<Line> {
        let t = normalize(dir)?;
        let n = perp(t);
        Some(Line { n, d: dot(n, p) })
    }

    pub fn direction(&self) -> Vec2 {
        [self.n[1], -self.n[0]]
    }

    /// Direction angle in `(-π, π]`.
    pub fn angle(&self) -> f64 {
        let t = self.direction();
        t[1].atan2(t[0])
    }

    /// Positive on the left of the travel direction.
    pub fn signed_dist(&self, p: Vec2) -> f64 {
        dot(self.n, p) - self.d
    }

    pub fn foot(&self, p: Vec2) -> Vec2 {
        sub(p, scale(self.n, self.signed_dist(p)))
    }

    /// A point on the line (the foot of the origin).
    pub fn anchor(&self) -> Vec2 {
        scale(self.n, self.d)
    }

    pub fn reversed(&self) -> Line {
        Line { n: [-self.n[0], -self.n[1]], d: -self.d }
    }

    pub fn offset(&self, s: f64) -> Line {
        Line { n: self.n, d: self.d + s }
    }

    pub fn intersect(&self, other: &Line) -> Option<Vec2> {
        let det = cross(self.n, other.n);
        if det.abs() < 1e-14 {
            return None;
        }
        let x = (self.d * other.n[1] - other.d * self.n[1]) / det;
        let y = (self.n[0] * other.d - other.n[0] * self.d) / det;
        Some([x, y])
    }
}

/// Directed angle from `a` to `b` reduced to `[0, π)`.
pub fn line_angle(a: &Line, b: &Line) -> f64 {
    wrap_pi(b.angle() - a.angle())
}

/// Reduce an angle to `[0, π)`.
pub fn wrap_pi(a: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let mut r = a.rem_euclid(pi);
    if r >= pi {
        r -= pi;
    }
    r
}

/// Smallest absolute difference of two angles taken modulo π.
pub fn angle_diff_mod_pi(a: f64, b: f64) -> f64 {
    let r = wrap_pi(a - b);
    r.min(std::f64::consts::PI - r)
}

/// Placement of one geometric element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Pose {
    Point { p: Vec2 },
    Line { n: Vec2, d: f64 },
    Circle { c: Vec2, r: f64 },
}

impl Pose {
    pub fn point(p: Vec2) -> Pose {
        Pose::Point { p }
    }

    pub fn line(l: Line) -> Pose {
        Pose::Line { n: l.n, d: l.d }
    }

    pub fn circle(c: Vec2, r: f64) -> Pose {
        Pose::Circle { c, r }
    }

    /// Position of a point-like pose: the point itself or the circle center.
    pub fn center(&self) -> Option<Vec2> {
        match *self {
            Pose::Point { p } => Some(p),
            Pose::Circle { c, .. } => Some(c),
            Pose::Line { .. } => None,
        }
    }

    pub fn as_line(&self) -> Option<Line> {
        match *self {
            Pose::Line { n, d } => Some(Line { n, d }),
            _ => None,
        }
    }

    pub fn radius(&self) -> f64 {
        match *self {
            Pose::Circle { r, .. } => r,
            _ => 0.0,
        }
    }

    pub fn transformed(&self, m: &Motion) -> Pose {
        match *self {
            Pose::Point { p } => Pose::Point { p: m.apply(p) },
            Pose::Circle { c, r } => Pose::Circle { c: m.apply(c), r },
            Pose::Line { n, d } => Pose::line(m.apply_line(&Line { n, d })),
        }
    }

    /// Largest coordinate difference between two poses of the same shape.
    ///
    /// Lines are compared by normal and offset; poses of different shapes are infinitely apart.
    pub fn max_diff(&self, other: &Pose) -> f64 {
        match (self, other) {
            (Pose::Point { p: a }, Pose::Point { p: b }) => (a[0] - b[0]).abs().max((a[1] - b[1]).abs()),
            (Pose::Circle { c: a, r: ra }, Pose::Circle { c: b, r: rb }) => (a[0] - b[0])
                .abs()
                .max((a[1] - b[1]).abs())
                .max((ra - rb).abs()),
            (Pose::Line { n: na, d: da }, Pose::Line { n: nb, d: db }) => (na[0] - nb[0])
                .abs()
                .max((na[1] - nb[1]).abs())
                .max((da - db).abs()),
            _ => f64::INFINITY,
        }
    }

    /// Distance between poses treating lines as unoriented.
    pub fn geometric_diff(&self, other: &Pose) -> f64 {
        match (self, other) {
            (Pose::Line { n, d }, Pose::Line { .. }) => {
                let flipped = Pose::Line { n: [-n[0], -n[1]], d: -d };
                self.max_diff(other).min(flipped.max_diff(other))
            }
            _ => self.max_diff(other),
        }
    }
}

/// Orientation-preserving rigid motion `x ↦ R(θ)x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Motion {
    pub cos: f64,
    pub sin: f64,
    pub t: Vec2,
}

impl Motion {
    pub fn identity() -> Motion {
        Motion { cos: 1.0, sin: 0.0, t: [0.0, 0.0] }
    }

    pub fn rotation(theta: f64) -> Motion {
        Motion { cos: theta.cos(), sin: theta.sin(), t: [0.0, 0.0] }
    }

    pub fn translation(t: Vec2) -> Motion {
        Motion { cos: 1.0, sin: 0.0, t }
    }

    pub fn rotate(&self, v: Vec2) -> Vec2 {
        [self.cos * v[0] - self.sin * v[1], self.sin * v[0] + self.cos * v[1]]
    }

    pub fn apply(&self, p: Vec2) -> Vec2 {
        add(self.rotate(p), self.t)
    }

    pub fn apply_line(&self, l: &Line) -> Line {
        let n = self.rotate(l.n);
        Line { n, d: l.d + dot(n, self.t) }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Motion) -> Motion {
        Motion {
            cos: self.cos * other.cos - self.sin * other.sin,
            sin: self.sin * other.cos + self.cos * other.sin,
            t: self.apply(other.t),
        }
    }

    pub fn inverse(&self) -> Motion {
        let inv = Motion { cos: self.cos, sin: -self.sin, t: [0.0, 0.0] };
        let t = inv.rotate(self.t);
        Motion { cos: self.cos, sin: -self.sin, t: [-t[0], -t[1]] }
    }

    /// Motion taking the frame (origin `p`, x-direction `dir`) to the standard frame.
    pub fn to_frame(p: Vec2, dir: Vec2) -> Option<Motion> {
        let u = normalize(dir)?;
        let rot = Motion { cos: u[0], sin: -u[1], t: [0.0, 0.0] };
        let t = rot.rotate(p);
        Some(Motion { cos: u[0], sin: -u[1], t: [-t[0], -t[1]] })
    }

    /// Motion taking the frame (origin `p0`, direction `d0`) onto (origin `p1`, direction `d1`).
    pub fn frame_to_frame(p0: Vec2, d0: Vec2, p1: Vec2, d1: Vec2) -> Option<Motion> {
        let to_std = Motion::to_frame(p0, d0)?;
        let from_std = Motion::to_frame(p1, d1)?.inverse();
        Some(from_std.compose(&to_std))
    }
}

/// Real roots of `a x² + b x + c` computed without cancellation.
///
/// A discriminant whose magnitude is at most `snap` times `b² + |4ac|` is treated as zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuadRoots {
    None { disc: f64 },
    Double(f64),
    Two(f64, f64),
}

pub fn solve_quadratic(a: f64, b: f64, c: f64, snap: f64) -> QuadRoots {
    if a == 0.0 {
        if b == 0.0 {
            return QuadRoots::None { disc: f64::NEG_INFINITY };
        }
        return QuadRoots::Double(-c / b);
    }
    let disc = b * b - 4.0 * a * c;
    let mag = b * b + (4.0 * a * c).abs();
    if disc.abs() <= snap * mag {
        return QuadRoots::Double(-b / (2.0 * a));
    }
    if disc < 0.0 {
        return QuadRoots::None { disc: disc / mag.max(f64::MIN_POSITIVE) };
    }
    let q = -0.5 * (b + b.signum_or_one() * disc.sqrt());
    let r1 = q / a;
    let r2 = if q != 0.0 { c / q } else { -r1 };
    if r1 <= r2 {
        QuadRoots::Two(r1, r2)
    } else {
        QuadRoots::Two(r2, r1)
    }
}

trait SignumOrOne {
    fn signum_or_one(self) -> f64;
}

impl SignumOrOne for f64 {
    fn signum_or_one(self) -> f64 {
        if self < 0.0 {
            -1.0
        } else {
            1.0
        }
    }
}

/// Best orientation-preserving motion taking `from` onto `to` in the least-squares sense.
pub fn align_rigid(from: &[Vec2], to: &[Vec2]) -> Motion {
    assert_eq!(from.len(), to.len());
    if from.is_empty() {
        return Motion::identity();
    }
    let n = from.len() as f64;
    let ca = scale(from.iter().fold([0.0, 0.0], |s, p| add(s, *p)), 1.0 / n);
    let cb = scale(to.iter().fold([0.0, 0.0], |s, p| add(s, *p)), 1.0 / n);
    let (mut sd, mut sc) = (0.0, 0.0);
    for (a, b) in from.iter().zip(to) {
        let u = sub(*a, ca);
        let v = sub(*b, cb);
        sd += dot(u, v);
        sc += cross(u, v);
    }
    let theta = if sd == 0.0 && sc == 0.0 { 0.0 } else { sc.atan2(sd) };
    let rot = Motion::rotation(theta);
    let t = sub(cb, rot.rotate(ca));
    Motion { t, ..rot }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn quadratic_stable_small_root() {
        // x² - 1e8 x + 1 has roots near 1e-8 and 1e8; naive formula loses the small one.
        match solve_quadratic(1.0, -1e8, 1.0, 1e-12) {
            QuadRoots::Two(a, b) => {
                assert!((a - 1e-8).abs() < 1e-20);
                assert!((b - 1e8).abs() < 1e-4);
            }
            r => panic!("{r:?}"),
        }
    }

    #[test]
    fn quadratic_snaps_tangent() {
        assert_eq!(solve_quadratic(1.0, -2.0, 1.0 + 1e-15, 1e-12), QuadRoots::Double(1.0));
        assert!(matches!(solve_quadratic(1.0, 0.0, 1.0, 1e-12), QuadRoots::None { .. }));
    }

    #[test]
    fn line_orientation_and_side() {
        let l = Line::x_axis();
        assert_eq!(l.direction(), [1.0, 0.0]);
        assert!(l.signed_dist([0.0, 2.0]) > 0.0);
        let m = Line::through([0.0, 0.0], [0.0, 1.0]).unwrap();
        assert!((line_angle(&l, &m) - PI / 2.0).abs() < 1e-15);
        assert!(m.signed_dist([-1.0, 0.0]) > 0.0);
    }

    #[test]
    fn motion_roundtrip() {
        let m = Motion { t: [1.0, -2.0], ..Motion::rotation(0.7) };
        let p = [0.3, 4.0];
        let q = m.inverse().apply(m.apply(p));
        assert!(dist(p, q) < 1e-14);
        let l = Line::through([1.0, 1.0], [1.0, 2.0]).unwrap();
        let ml = m.apply_line(&l);
        assert!(ml.signed_dist(m.apply([1.0, 1.0])).abs() < 1e-14);
        assert!(ml.signed_dist(m.apply([2.0, 3.0])).abs() < 1e-14);
    }

    #[test]
    fn frame_to_frame_maps_both() {
        let m = Motion::frame_to_frame([1.0, 1.0], [1.0, 0.0], [3.0, -1.0], [0.0, 2.0]).unwrap();
        assert!(dist(m.apply([1.0, 1.0]), [3.0, -1.0]) < 1e-14);
        assert!(dist(m.apply([2.0, 1.0]), [3.0, 0.0]) < 1e-14);
    }

    #[test]
    fn align_recovers_motion() {
        let m = Motion { t: [5.0, 1.0], ..Motion::rotation(-2.1) };
        let pts = vec![[0.0, 0.0], [1.0, 0.0], [0.3, 2.0], [-1.0, 0.5]];
        let moved: Vec<_> = pts.iter().map(|p| m.apply(*p)).collect();
        let a = align_rigid(&pts, &moved);
        for (p, q) in pts.iter().zip(&moved) {
            assert!(dist(a.apply(*p), *q) < 1e-12);
        }
    }
}
