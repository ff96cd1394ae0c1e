//! Planar primitives used throughout the crate: points, rigid transforms,
//! circles, lines and the symmetric 3×3 matrices shared by the conic
//! classification and the Gramians.
//!
//! All tolerances are absolute lengths in meters unless stated otherwise.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::{Matrix2, Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default absolute collinearity tolerance (m).
pub const DEFAULT_COLLINEAR_TOL: f64 = 1e-9;
/// Default absolute tangency window for circle intersections (m).
pub const DEFAULT_TANGENCY_TOL: f64 = 1e-9;

/// Wraps an angle into `[-π, π)`.
pub fn wrap_angle(a: f64) -> f64 {
    if (-PI..PI).contains(&a) {
        return a;
    }
    let mut w = (a + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can round up to exactly 2π
    if w >= PI {
        w -= 2.0 * PI;
    }
    w
}

/// Smallest signed difference `a - b`, wrapped into `[-π, π)`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    wrap_angle(a - b)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn polar(radius: f64, angle: f64) -> Self {
        Self::new(radius * angle.cos(), radius * angle.sin())
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3-D cross product.
    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn dist(self, o: Point2) -> f64 {
        (self - o).norm()
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn rotate(self, phi: f64) -> Point2 {
        let (s, c) = phi.sin_cos();
        Point2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    /// Counter-clockwise quarter turn.
    pub fn perp(self) -> Point2 {
        Point2::new(-self.y, self.x)
    }

    pub fn normalized(self) -> Point2 {
        let n = self.norm();
        Point2::new(self.x / n, self.y / n)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Rotation of `self` about `pivot` by `phi`.
    pub fn rotate_about(self, pivot: Point2, phi: f64) -> Point2 {
        (self - pivot).rotate(phi) + pivot
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Point2 {
    fn add_assign(&mut self, o: Point2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, k: f64) -> Point2 {
        Point2::new(self.x * k, self.y * k)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

/// Roto-translation `p ↦ R(phi)·p + (dx, dy)` from the vehicle frame to the
/// world frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform2 {
    pub dx: f64,
    pub dy: f64,
    pub phi: f64,
}

impl Default for RigidTransform2 {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl RigidTransform2 {
    pub const IDENTITY: RigidTransform2 = RigidTransform2 {
        dx: 0.0,
        dy: 0.0,
        phi: 0.0,
    };

    pub fn new(dx: f64, dy: f64, phi: f64) -> Self {
        Self {
            dx,
            dy,
            phi: wrap_angle(phi),
        }
    }

    pub fn translation(self) -> Point2 {
        Point2::new(self.dx, self.dy)
    }

    pub fn apply(self, p: Point2) -> Point2 {
        p.rotate(self.phi) + self.translation()
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(self, other: RigidTransform2) -> RigidTransform2 {
        let t = self.apply(other.translation());
        RigidTransform2::new(t.x, t.y, self.phi + other.phi)
    }

    pub fn inverse(self) -> RigidTransform2 {
        let t = (-self.translation()).rotate(-self.phi);
        RigidTransform2::new(t.x, t.y, -self.phi)
    }

    /// Rotation by `phi` about `pivot`.
    pub fn rotation_about(pivot: Point2, phi: f64) -> RigidTransform2 {
        let t = pivot - pivot.rotate(phi);
        RigidTransform2::new(t.x, t.y, phi)
    }

    /// The unique transform sending `a_src → a_dst` and the direction of
    /// `b_src - a_src` onto `b_dst - a_dst`. Exact when the two segments have
    /// equal length.
    pub fn from_two_points(a_src: Point2, b_src: Point2, a_dst: Point2, b_dst: Point2) -> Self {
        let phi = (b_dst - a_dst).angle() - (b_src - a_src).angle();
        let t = a_dst - a_src.rotate(phi);
        RigidTransform2::new(t.x, t.y, phi)
    }

    /// Componentwise closeness with wrapped angle difference.
    pub fn approx_eq(self, o: RigidTransform2, tol_len: f64, tol_ang: f64) -> bool {
        (self.dx - o.dx).abs() <= tol_len
            && (self.dy - o.dy).abs() <= tol_len
            && angle_diff(self.phi, o.phi).abs() <= tol_ang
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center: Point2,
    pub radius: f64,
}

impl Circle {
    pub fn new(center: Point2, radius: f64) -> Self {
        debug_assert!(radius >= 0.0, "negative radius {radius}");
        Self { center, radius }
    }

    pub fn distance_to(&self, p: Point2) -> f64 {
        (p.dist(self.center) - self.radius).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CircleIntersection {
    Empty,
    Tangent(Point2),
    Pair(Point2, Point2),
    Coincident,
}

impl CircleIntersection {
    pub fn points(&self) -> Vec<Point2> {
        match *self {
            CircleIntersection::Tangent(p) => vec![p],
            CircleIntersection::Pair(p, q) => vec![p, q],
            _ => Vec::new(),
        }
    }
}

/// Intersection of two circles with an absolute tangency window `tol`.
///
/// Near-tangent configurations inside the window are reported as a single
/// tangent point, which is how the degenerate cases collapse two solutions
/// into one.
pub fn circle_circle_intersect(a: Circle, b: Circle, tol: f64) -> CircleIntersection {
    let delta = b.center - a.center;
    let d = delta.norm();
    if d <= tol && (a.radius - b.radius).abs() <= tol {
        return CircleIntersection::Coincident;
    }
    if d <= tol {
        // concentric, different radii
        return CircleIntersection::Empty;
    }
    let u = delta * (1.0 / d);
    let outer = a.radius + b.radius;
    let inner = (a.radius - b.radius).abs();

    if (d - outer).abs() <= tol {
        let pa = a.center + u * a.radius;
        let pb = b.center - u * b.radius;
        return CircleIntersection::Tangent((pa + pb) * 0.5);
    }
    if (d - inner).abs() <= tol {
        // internal tangency: both touch points lie on the far side of the
        // smaller circle, along the centre line
        let dir = if a.radius >= b.radius { u } else { -u };
        let pa = a.center + dir * a.radius;
        let pb = b.center + dir * b.radius;
        return CircleIntersection::Tangent((pa + pb) * 0.5);
    }
    if d > outer || d < inner {
        return CircleIntersection::Empty;
    }
    let along = (d * d + a.radius * a.radius - b.radius * b.radius) / (2.0 * d);
    let h = (a.radius * a.radius - along * along).max(0.0).sqrt();
    let base = a.center + u * along;
    let off = u.perp() * h;
    CircleIntersection::Pair(base + off, base - off)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line2 {
    pub point: Point2,
    pub direction: Point2,
}

impl Line2 {
    /// Normalizes `direction`; returns `None` for a zero direction.
    pub fn new(point: Point2, direction: Point2) -> Option<Self> {
        let n = direction.norm();
        if !(n > 0.0) || !n.is_finite() {
            return None;
        }
        Some(Self {
            point,
            direction: direction * (1.0 / n),
        })
    }

    pub fn through(a: Point2, b: Point2) -> Option<Self> {
        Self::new(a, b - a)
    }

    /// Line `a·x + b·y + c = 0`.
    pub fn from_coefficients(a: f64, b: f64, c: f64) -> Option<Self> {
        let n2 = a * a + b * b;
        if !(n2 > 0.0) {
            return None;
        }
        let foot = Point2::new(-a * c / n2, -b * c / n2);
        Self::new(foot, Point2::new(-b, a))
    }

    /// Perpendicular bisector of the segment `a b`.
    pub fn bisector(a: Point2, b: Point2) -> Option<Self> {
        Self::new((a + b) * 0.5, (b - a).perp())
    }

    pub fn normal(&self) -> Point2 {
        self.direction.perp()
    }

    /// Signed offset of `p` along the left normal.
    pub fn signed_distance(&self, p: Point2) -> f64 {
        self.direction.cross(p - self.point)
    }

    /// `(a, b, c)` with unit `(a, b)` such that the line is `a x + b y + c = 0`.
    pub fn coefficients(&self) -> [f64; 3] {
        let n = self.normal();
        [n.x, n.y, -n.dot(self.point)]
    }

    pub fn project(&self, p: Point2) -> Point2 {
        self.point + self.direction * self.direction.dot(p - self.point)
    }

    pub fn at(&self, s: f64) -> Point2 {
        self.point + self.direction * s
    }
}

pub fn point_line_distance(p: Point2, l: &Line2) -> f64 {
    l.signed_distance(p).abs()
}

/// Principal-direction line fit through `points`; `None` when all points
/// coincide.
pub fn fit_line(points: &[Point2]) -> Option<Line2> {
    if points.is_empty() {
        return None;
    }
    let n = points.len() as f64;
    let c = points.iter().fold(Point2::ORIGIN, |acc, &p| acc + p) * (1.0 / n);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in points {
        let q = *p - c;
        sxx += q.x * q.x;
        sxy += q.x * q.y;
        syy += q.y * q.y;
    }
    if sxx + syy == 0.0 {
        return None;
    }
    let eig = SymmetricEigen::new(Matrix2::new(sxx, sxy, sxy, syy));
    let k = if eig.eigenvalues[0] >= eig.eigenvalues[1] { 0 } else { 1 };
    let v = eig.eigenvectors.column(k);
    Line2::new(c, Point2::new(v[0], v[1]))
}

/// True when every point lies within `tol` of the principal-direction line
/// through the centroid.
pub fn collinear(points: &[Point2], tol: f64) -> bool {
    match fit_line(points) {
        None => true,
        Some(line) => points.iter().all(|&p| point_line_distance(p, &line) <= tol),
    }
}

/// True when all points lie within `tol` of their centroid.
pub fn coincident(points: &[Point2], tol: f64) -> bool {
    if points.is_empty() {
        return true;
    }
    let n = points.len() as f64;
    let c = points.iter().fold(Point2::ORIGIN, |acc, &p| acc + p) * (1.0 / n);
    points.iter().all(|&p| p.dist(c) <= tol)
}

/// Symmetric 3×3 matrix stored by its upper triangle
/// `[m00, m01, m02, m11, m12, m22]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SymMat3(pub [f64; 6]);

impl SymMat3 {
    pub const ZERO: SymMat3 = SymMat3([0.0; 6]);

    pub fn diag(a: f64, b: f64, c: f64) -> Self {
        SymMat3([a, 0.0, 0.0, b, 0.0, c])
    }

    pub fn outer(v: [f64; 3]) -> Self {
        SymMat3([
            v[0] * v[0],
            v[0] * v[1],
            v[0] * v[2],
            v[1] * v[1],
            v[1] * v[2],
            v[2] * v[2],
        ])
    }

    /// `(u vᵀ + v uᵀ) / 2`.
    pub fn sym_outer(u: [f64; 3], v: [f64; 3]) -> Self {
        let m = |i: usize, j: usize| 0.5 * (u[i] * v[j] + u[j] * v[i]);
        SymMat3([m(0, 0), m(0, 1), m(0, 2), m(1, 1), m(1, 2), m(2, 2)])
    }

    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        let s = |i: usize, j: usize| 0.5 * (m[(i, j)] + m[(j, i)]);
        SymMat3([s(0, 0), s(0, 1), s(0, 2), s(1, 1), s(1, 2), s(2, 2)])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        match (i, j) {
            (0, 0) => self.0[0],
            (0, 1) => self.0[1],
            (0, 2) => self.0[2],
            (1, 1) => self.0[3],
            (1, 2) => self.0[4],
            (2, 2) => self.0[5],
            _ => panic!("index ({i}, {j}) out of range"),
        }
    }

    pub fn to_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.get(i, j))
    }

    pub fn scale(&self, k: f64) -> Self {
        SymMat3(self.0.map(|v| v * k))
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn trace(&self) -> f64 {
        self.0[0] + self.0[3] + self.0[5]
    }

    pub fn det(&self) -> f64 {
        self.to_matrix().determinant()
    }

    /// Determinant of the upper-left 2×2 block.
    pub fn det2(&self) -> f64 {
        self.0[0] * self.0[3] - self.0[1] * self.0[1]
    }

    /// Ascending eigenvalues with matching unit eigenvectors.
    pub fn eigen(&self) -> ([f64; 3], [[f64; 3]; 3]) {
        let eig = SymmetricEigen::new(self.to_matrix());
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let vals = idx.map(|k| eig.eigenvalues[k]);
        let vecs = idx.map(|k| {
            let c = eig.eigenvectors.column(k);
            [c[0], c[1], c[2]]
        });
        (vals, vecs)
    }

    pub fn mul_vec(&self, v: [f64; 3]) -> [f64; 3] {
        let m = self.to_matrix();
        let r = m * nalgebra::Vector3::new(v[0], v[1], v[2]);
        [r[0], r[1], r[2]]
    }

    /// `[x, y, 1] Q [x, y, 1]ᵀ`.
    pub fn quadratic_form(&self, p: Point2) -> f64 {
        let v = [p.x, p.y, 1.0];
        let qv = self.mul_vec(v);
        v[0] * qv[0] + v[1] * qv[1] + v[2] * qv[2]
    }
}

impl Add for SymMat3 {
    type Output = SymMat3;
    fn add(self, o: SymMat3) -> SymMat3 {
        let mut out = self.0;
        for (a, b) in out.iter_mut().zip(o.0) {
            *a += b;
        }
        SymMat3(out)
    }
}

impl AddAssign for SymMat3 {
    fn add_assign(&mut self, o: SymMat3) {
        *self = *self + o;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConicClass {
    DegenerateLinePair,
    WholePlane,
    NondegenerateConic,
    PointConic,
}

/// Classifies the conic `[x y 1] Q [x y 1]ᵀ = 0`.
///
/// `WholePlane` is decided on the raw entries; the determinant tests run on
/// `Q / max|Q_ij|` so that the result does not depend on the scale of `Q`.
/// Parallel or coincident line pairs (`det S ≈ 0`) are reported as
/// `DegenerateLinePair`.
pub fn classify_conic(q: &SymMat3, tol: f64) -> ConicClass {
    let m = q.max_abs();
    if m <= tol {
        return ConicClass::WholePlane;
    }
    let qn = q.scale(1.0 / m);
    if qn.det().abs() > tol {
        return ConicClass::NondegenerateConic;
    }
    if qn.det2() > tol {
        ConicClass::PointConic
    } else {
        ConicClass::DegenerateLinePair
    }
}

/// Centre `-S⁻¹ b` of the conic.
pub fn conic_center(q: &SymMat3, tol: f64) -> Result<Point2> {
    let m = q.max_abs();
    if m == 0.0 {
        return Err(Error::SingularCenter);
    }
    let qn = q.scale(1.0 / m);
    let det_s = qn.det2();
    if det_s.abs() <= tol {
        return Err(Error::SingularCenter);
    }
    let (s00, s01, s11) = (qn.0[0], qn.0[1], qn.0[3]);
    let (b0, b1) = (qn.0[2], qn.0[4]);
    // -S^{-1} b
    let x = -(s11 * b0 - s01 * b1) / det_s;
    let y = -(-s01 * b0 + s00 * b1) / det_s;
    Ok(Point2::new(x, y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn apply_transform_examples() {
        let p = RigidTransform2::IDENTITY.apply(Point2::new(3.0, 4.0));
        assert_eq!(p, Point2::new(3.0, 4.0));

        let p = RigidTransform2::new(0.0, 0.0, PI / 2.0).apply(Point2::new(1.0, 0.0));
        assert_abs_diff_eq!(p.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.y, 1.0, epsilon = 1e-15);

        let p = RigidTransform2::new(1.0, 2.0, PI).apply(Point2::new(1.0, 0.0));
        assert_abs_diff_eq!(p.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.y, 2.0, epsilon = 1e-15);
    }

    #[test]
    fn phi_is_normalized() {
        assert_abs_diff_eq!(RigidTransform2::new(0.0, 0.0, PI).phi, -PI);
        assert_abs_diff_eq!(RigidTransform2::new(0.0, 0.0, 3.0 * PI).phi, -PI, epsilon = 1e-12);
        assert!(wrap_angle(PI - 1e-17) < PI);
        assert_abs_diff_eq!(angle_diff(PI - 0.1, -PI + 0.1), -0.2, epsilon = 1e-12);
    }

    #[test]
    fn circle_examples() {
        let unit = |x: f64| Circle::new(Point2::new(x, 0.0), 1.0);
        match circle_circle_intersect(unit(0.0), unit(2.0), 1e-9) {
            CircleIntersection::Tangent(p) => {
                assert_abs_diff_eq!(p.x, 1.0, epsilon = 1e-12);
                assert_abs_diff_eq!(p.y, 0.0, epsilon = 1e-12);
            }
            other => panic!("expected tangent, got {other:?}"),
        }
        match circle_circle_intersect(unit(0.0), unit(1.0), 1e-9) {
            CircleIntersection::Pair(p, q) => {
                assert_abs_diff_eq!(p.x, 0.5, epsilon = 1e-12);
                assert_abs_diff_eq!(q.x, 0.5, epsilon = 1e-12);
                assert_abs_diff_eq!(p.y.abs(), 3f64.sqrt() / 2.0, epsilon = 1e-12);
                assert_abs_diff_eq!(p.y, -q.y, epsilon = 1e-12);
            }
            other => panic!("expected pair, got {other:?}"),
        }
        assert_eq!(
            circle_circle_intersect(unit(0.0), unit(4.0), 1e-9),
            CircleIntersection::Empty
        );
        assert_eq!(
            circle_circle_intersect(unit(0.0), unit(0.0), 1e-9),
            CircleIntersection::Coincident
        );
    }

    #[test]
    fn internal_tangency() {
        let a = Circle::new(Point2::ORIGIN, 3.0);
        let b = Circle::new(Point2::new(1.0, 0.0), 2.0);
        match circle_circle_intersect(a, b, 1e-9) {
            CircleIntersection::Tangent(p) => assert_abs_diff_eq!(p.x, 3.0, epsilon = 1e-12),
            other => panic!("{other:?}"),
        }
        match circle_circle_intersect(b, a, 1e-9) {
            CircleIntersection::Tangent(p) => assert_abs_diff_eq!(p.x, 3.0, epsilon = 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn collinear_examples() {
        let p = |x, y| Point2::new(x, y);
        assert!(collinear(&[p(0.0, 0.0), p(1.0, 1.0), p(2.0, 2.0)], 1e-9));
        assert!(!collinear(&[p(0.0, 0.0), p(1.0, 0.0), p(0.0, 1.0)], 1e-9));
        assert!(collinear(&[p(0.0, 0.0), p(1.0, 0.0)], 1e-9));
        assert!(collinear(&[p(2.0, 2.0)], 1e-9));
    }

    #[test]
    fn conic_examples() {
        assert_eq!(classify_conic(&SymMat3::ZERO, 1e-9), ConicClass::WholePlane);
        let pair = SymMat3::diag(1.0, -1.0, 0.0);
        assert_eq!(classify_conic(&pair, 1e-9), ConicClass::DegenerateLinePair);
        let c = conic_center(&pair, 1e-9).unwrap();
        assert_abs_diff_eq!(c.norm(), 0.0, epsilon = 1e-15);
        assert_eq!(
            classify_conic(&SymMat3::diag(1.0, 1.0, -1.0), 1e-9),
            ConicClass::NondegenerateConic
        );
        assert_eq!(
            classify_conic(&SymMat3::diag(1.0, 1.0, 0.0), 1e-9),
            ConicClass::PointConic
        );
        // parabola-like S: singular centre
        assert!(matches!(
            conic_center(&SymMat3::diag(1.0, 0.0, 0.0), 1e-9),
            Err(Error::SingularCenter)
        ));
    }

    #[test]
    fn line_pair_conic_from_product() {
        // (x - y)(x + y - 2) = 0, crossing at (1, 1)
        let l1 = [1.0, -1.0, 0.0];
        let l2 = [1.0, 1.0, -2.0];
        let q = SymMat3::sym_outer(l1, l2);
        assert_eq!(classify_conic(&q, 1e-9), ConicClass::DegenerateLinePair);
        let c = conic_center(&q, 1e-9).unwrap();
        assert_abs_diff_eq!(c.x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.y, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn point_line_distance_examples() {
        let x_axis = Line2::new(Point2::ORIGIN, Point2::new(1.0, 0.0)).unwrap();
        assert_abs_diff_eq!(point_line_distance(Point2::new(0.0, 1.0), &x_axis), 1.0);
        assert_abs_diff_eq!(point_line_distance(Point2::new(2.0, 0.0), &x_axis), 0.0);
        let diag = Line2::new(Point2::ORIGIN, Point2::new(1.0, 1.0)).unwrap();
        assert_abs_diff_eq!(
            point_line_distance(Point2::new(1.0, 1.0), &diag),
            0.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(diag.direction.norm(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn line_coefficients_round_trip() {
        let l = Line2::from_coefficients(3.0, -4.0, 5.0).unwrap();
        let [a, b, c] = l.coefficients();
        // same line up to sign
        let k = if a * 3.0 > 0.0 { 5.0 } else { -5.0 };
        assert_abs_diff_eq!(a * k, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b * k, -4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c * k, 5.0, epsilon = 1e-12);
    }

    fn arb_transform() -> impl Strategy<Value = RigidTransform2> {
        (-50.0..50.0f64, -50.0..50.0f64, -10.0..10.0f64)
            .prop_map(|(x, y, p)| RigidTransform2::new(x, y, p))
    }

    fn arb_point() -> impl Strategy<Value = Point2> {
        (-20.0..20.0f64, -20.0..20.0f64).prop_map(|(x, y)| Point2::new(x, y))
    }

    proptest! {
        #[test]
        fn transforms_are_rigid(t in arb_transform(), p in arb_point(), q in arb_point()) {
            let before = p.dist(q);
            let after = t.apply(p).dist(t.apply(q));
            prop_assert!((before - after).abs() <= 1e-12 * before.max(1.0));
        }

        #[test]
        fn compose_with_inverse_is_identity(t in arb_transform()) {
            let id = t.compose(t.inverse());
            prop_assert!(id.approx_eq(RigidTransform2::IDENTITY, 1e-12 * (1.0 + t.translation().norm()), 1e-12));
            let id2 = t.inverse().compose(t);
            prop_assert!(id2.approx_eq(RigidTransform2::IDENTITY, 1e-12 * (1.0 + t.translation().norm()), 1e-12));
            prop_assert!(t.phi >= -PI && t.phi < PI);
        }

        #[test]
        fn intersections_lie_on_both_circles(
            c1 in arb_point(), c2 in arb_point(), r1 in 0.0..30.0f64, r2 in 0.0..30.0f64,
        ) {
            let tol = 1e-9;
            let a = Circle::new(c1, r1);
            let b = Circle::new(c2, r2);
            for p in circle_circle_intersect(a, b, tol).points() {
                prop_assert!(a.distance_to(p) <= 2.0 * tol + 1e-12 * (1.0 + r1));
                prop_assert!(b.distance_to(p) <= 2.0 * tol + 1e-12 * (1.0 + r2));
            }
        }

        #[test]
        fn conic_class_is_scale_invariant(
            e in proptest::array::uniform6(-5.0..5.0f64), k in prop_oneof![-100.0..-0.01f64, 0.01..100.0f64],
        ) {
            let q = SymMat3(e);
            prop_assume!(q.max_abs() > 1e-6);
            // keep away from the decision boundaries
            let qn = q.scale(1.0 / q.max_abs());
            prop_assume!(qn.det().abs() > 1e-6 && qn.det2().abs() > 1e-6);
            prop_assert_eq!(classify_conic(&q, 1e-9), classify_conic(&q.scale(k), 1e-9));
        }
    }
}
