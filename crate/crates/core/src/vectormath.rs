//! Small 3D geometry kit: vectors, unit vectors, planes, and the handful of
//! reflection/angle primitives the tracer and the reflector controller share.

use std::ops::{Add, AddAssign, Div, Index, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unit-length tolerance accepted at API boundaries.
pub const UNIT_TOLERANCE: f64 = 1e-9;

/// Half-sum norms below this are treated as a degenerate bisector.
pub const DEGENERATE_BISECTOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn component_min(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn component_max(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    pub fn max_abs(self) -> f64 {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }

    pub fn map(self, f: impl Fn(f64) -> f64) -> Vec3 {
        Vec3::new(f(self.x), f(self.y), f(self.z))
    }

    /// Componentwise product.
    pub fn hadamard(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x * o.x, self.y * o.y, self.z * o.z)
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_slice(s: &[f64]) -> Vec3 {
        Vec3::new(s[0], s[1], s[2])
    }

    /// Normalizes, failing on (near) zero length.
    pub fn normalized(self) -> Result<UnitVec3> {
        let n = self.norm();
        if !(n > 1e-300) || !n.is_finite() {
            return Err(Error::DegenerateGeometry(format!(
                "cannot normalize vector of length {n:e}"
            )));
        }
        Ok(UnitVec3(self / n))
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

/// A direction with unit Euclidean length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitVec3(Vec3);

impl UnitVec3 {
    pub const X: UnitVec3 = UnitVec3(Vec3::new(1.0, 0.0, 0.0));
    pub const Y: UnitVec3 = UnitVec3(Vec3::new(0.0, 1.0, 0.0));
    pub const Z: UnitVec3 = UnitVec3(Vec3::new(0.0, 0.0, 1.0));

    /// Wraps `v`, rejecting anything that is not unit-length within
    /// [`UNIT_TOLERANCE`]. Accepted inputs are renormalized exactly.
    pub fn try_new(v: Vec3) -> Result<Self> {
        let n = v.norm();
        if (n - 1.0).abs() > UNIT_TOLERANCE || !n.is_finite() {
            return Err(Error::contract(format!("expected unit vector, |v| = {n}")));
        }
        Ok(UnitVec3(v / n))
    }

    pub fn vec(self) -> Vec3 {
        self.0
    }

    pub fn dot(self, o: UnitVec3) -> f64 {
        self.0.dot(o.0)
    }

    pub fn flip(self) -> UnitVec3 {
        UnitVec3(-self.0)
    }

    /// Some unit vector orthogonal to `self`.
    pub fn any_orthogonal(self) -> UnitVec3 {
        let v = self.0;
        let helper = if v.x.abs() < 0.9 { Vec3::new(1.0, 0.0, 0.0) } else { Vec3::new(0.0, 1.0, 0.0) };
        UnitVec3((helper - v * helper.dot(v)).normalized().expect("helper not parallel").0)
    }
}

impl From<UnitVec3> for Vec3 {
    fn from(u: UnitVec3) -> Vec3 {
        u.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub point: Vec3,
    pub normal: UnitVec3,
}

impl Plane {
    pub fn new(point: Vec3, normal: UnitVec3) -> Self {
        Plane { point, normal }
    }

    /// Signed distance of `p` along the plane normal.
    pub fn signed_distance(&self, p: Vec3) -> f64 {
        (p - self.point).dot(self.normal.vec())
    }
}

/// Right-handed orthonormal frame. `z` is the frame's "up" axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub x: UnitVec3,
    pub y: UnitVec3,
    pub z: UnitVec3,
}

impl Frame {
    pub const WORLD: Frame = Frame { x: UnitVec3::X, y: UnitVec3::Y, z: UnitVec3::Z };

    /// Builds a frame with the given `z` axis whose `x` axis is the
    /// component of `x_hint` orthogonal to `z`.
    pub fn from_z_and_x_hint(z: UnitVec3, x_hint: Vec3) -> Result<Frame> {
        let zv = z.vec();
        let x = (x_hint - zv * x_hint.dot(zv)).normalized()?;
        let y = UnitVec3(zv.cross(x.vec()));
        Ok(Frame { x, y, z })
    }

    pub fn to_local(&self, v: Vec3) -> Vec3 {
        Vec3::new(v.dot(self.x.vec()), v.dot(self.y.vec()), v.dot(self.z.vec()))
    }

    pub fn to_world(&self, v: Vec3) -> Vec3 {
        self.x.vec() * v.x + self.y.vec() * v.y + self.z.vec() * v.z
    }
}

fn check_unit(v: UnitVec3, what: &str) -> Result<()> {
    let n = v.vec().norm();
    if (n - 1.0).abs() > UNIT_TOLERANCE {
        return Err(Error::contract(format!("{what} is not unit length (|v| = {n})")));
    }
    Ok(())
}

/// Specular reflection of direction `d` about normal `n`: `d − 2(d·n)n`.
pub fn reflect_direction(d: UnitVec3, n: UnitVec3) -> Result<UnitVec3> {
    check_unit(d, "direction")?;
    check_unit(n, "normal")?;
    let (dv, nv) = (d.vec(), n.vec());
    let r = dv - nv * (2.0 * dv.dot(nv));
    // |r| = |d| analytically; renormalize away rounding drift.
    Ok(UnitVec3(r / r.norm()))
}

/// Tile normal that specularly reflects the ray arriving from `ap` towards
/// `focal`: the normalized half-sum of the unit vectors tile→focal and
/// tile→ap.
pub fn bisector_normal(tile: Vec3, focal: Vec3, ap: Vec3) -> Result<UnitVec3> {
    let to_focal = (focal - tile)
        .normalized()
        .map_err(|_| Error::DegenerateGeometry("focal point coincides with tile".into()))?;
    let to_ap = (ap - tile)
        .normalized()
        .map_err(|_| Error::DegenerateGeometry("access point coincides with tile".into()))?;
    let half_sum = (to_focal.vec() + to_ap.vec()) * 0.5;
    if half_sum.norm() < DEGENERATE_BISECTOR {
        return Err(Error::DegenerateGeometry(
            "focal and access point are antipodal through the tile".into(),
        ));
    }
    half_sum.normalized()
}

/// Elevation `theta = acos(n·z)` in `[0, π]` and azimuth
/// `phi = atan2(n·y, n·x)` in `(−π, π]`.
pub fn normal_to_angles(n: UnitVec3) -> Result<(f64, f64)> {
    check_unit(n, "normal")?;
    let v = n.vec();
    let theta = v.z.clamp(-1.0, 1.0).acos();
    let phi = v.y.atan2(v.x);
    Ok((theta, phi))
}

pub fn angles_to_normal(theta: f64, phi: f64) -> UnitVec3 {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let v = Vec3::new(st * cp, st * sp, ct);
    UnitVec3(v / v.norm())
}

pub fn mirror_point(p: Vec3, plane: &Plane) -> Vec3 {
    p - plane.normal.vec() * (2.0 * plane.signed_distance(p))
}

/// Smallest rotation carrying unit vector `from` onto `to`, applied to `v`.
pub fn rotate_between(from: UnitVec3, to: UnitVec3, v: Vec3) -> Vec3 {
    let (a, b) = (from.vec(), to.vec());
    let axis = a.cross(b);
    let s = axis.norm();
    let c = a.dot(b);
    if s < 1e-15 {
        if c > 0.0 {
            return v;
        }
        // Half turn about any axis orthogonal to `from`.
        let k = from.any_orthogonal().vec();
        return k * (2.0 * k.dot(v)) - v;
    }
    let k = axis / s;
    // Rodrigues.
    v * c + k.cross(v) * s + k * (k.dot(v) * (1.0 - c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI};

    fn unit(x: f64, y: f64, z: f64) -> UnitVec3 {
        Vec3::new(x, y, z).normalized().unwrap()
    }

    fn random_unit(rng: &mut ChaCha8Rng) -> UnitVec3 {
        loop {
            let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            if v.norm() > 0.1 && v.norm() < 1.0 {
                return v.normalized().unwrap();
            }
        }
    }

    fn random_point(rng: &mut ChaCha8Rng, span: f64) -> Vec3 {
        Vec3::new(rng.random_range(-span..span), rng.random_range(-span..span), rng.random_range(-span..span))
    }

    fn close(a: Vec3, b: Vec3, tol: f64) -> bool {
        (a - b).max_abs() <= tol
    }

    #[test]
    fn reflect_normal_incidence_retroreflects() {
        let r = reflect_direction(unit(0.0, 0.0, -1.0), UnitVec3::Z).unwrap();
        assert!(close(r.vec(), Vec3::new(0.0, 0.0, 1.0), 1e-15));
    }

    #[test]
    fn reflect_mirror_symmetry() {
        let r = reflect_direction(unit(1.0, 0.0, -1.0), UnitVec3::Z).unwrap();
        assert!(close(r.vec(), Vec3::new(FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2), 1e-15));
    }

    #[test]
    fn reflect_rejects_non_unit() {
        let bad = UnitVec3(Vec3::new(2.0, 0.0, 0.0));
        assert!(matches!(reflect_direction(bad, UnitVec3::Z), Err(Error::Contract(_))));
        assert!(matches!(reflect_direction(UnitVec3::Z, bad), Err(Error::Contract(_))));
    }

    #[test]
    fn reflect_identity_over_random_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let d = random_unit(&mut rng);
            let n = random_unit(&mut rng);
            let r = reflect_direction(d, n).unwrap();
            assert!((d.dot(n) + r.dot(n)).abs() < 1e-12);
            // d, r, n coplanar: triple product vanishes.
            assert!(d.vec().cross(r.vec()).dot(n.vec()).abs() < 1e-12);
            // Involution.
            let back = reflect_direction(r, n).unwrap();
            assert!(close(back.vec(), d.vec(), 1e-12));
        }
    }

    #[test]
    fn bisector_symmetric_case() {
        let n = bisector_normal(Vec3::ZERO, Vec3::new(-1.0, 0.0, 1.0), Vec3::new(1.0, 0.0, 1.0)).unwrap();
        assert!(close(n.vec(), Vec3::new(0.0, 0.0, 1.0), 1e-15));
    }

    #[test]
    fn bisector_retroreflection_points_at_ap() {
        let p = Vec3::new(0.0, 0.0, 5.0);
        let n = bisector_normal(Vec3::ZERO, p, p).unwrap();
        assert!(close(n.vec(), Vec3::new(0.0, 0.0, 1.0), 1e-15));
    }

    #[test]
    fn bisector_degenerate_cases_error() {
        let e = bisector_normal(Vec3::ZERO, Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 0.0, -3.0));
        assert!(matches!(e, Err(Error::DegenerateGeometry(_))));
        let e = bisector_normal(Vec3::ZERO, Vec3::ZERO, Vec3::new(0.0, 0.0, 1.0));
        assert!(matches!(e, Err(Error::DegenerateGeometry(_))));
    }

    #[test]
    fn bisector_focuses_reflected_ray_on_focal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let tile = random_point(&mut rng, 5.0);
            let ap = random_point(&mut rng, 10.0);
            let focal = random_point(&mut rng, 10.0);
            let Ok(n) = bisector_normal(tile, focal, ap) else { continue };
            let incoming = (tile - ap).normalized().unwrap();
            let out = reflect_direction(incoming, n).unwrap();
            let want = (focal - tile).normalized().unwrap();
            // asin of the cross norm stays accurate for tiny angles.
            let err = out.vec().cross(want.vec()).norm().asin();
            assert!(out.dot(want) > 0.0 && err < 1e-9, "angular error {err}");
        }
    }

    #[test]
    fn angles_of_axes() {
        let (t, p) = normal_to_angles(UnitVec3::Z).unwrap();
        assert_eq!((t, p), (0.0, 0.0));
        let (t, p) = normal_to_angles(UnitVec3::Y).unwrap();
        assert!((t - FRAC_PI_2).abs() < 1e-15 && (p - FRAC_PI_2).abs() < 1e-15);
        let (t, p) = normal_to_angles(unit(1.0, 0.0, 1.0)).unwrap();
        assert!((t - FRAC_PI_4).abs() < 1e-15 && p.abs() < 1e-15);
    }

    #[test]
    fn angles_to_normal_cases() {
        for phi in [-3.0, 0.0, 1.0, PI] {
            assert!(close(angles_to_normal(0.0, phi).vec(), Vec3::new(0.0, 0.0, 1.0), 1e-15));
        }
        assert!(close(angles_to_normal(FRAC_PI_2, 0.0).vec(), Vec3::new(1.0, 0.0, 0.0), 1e-15));
    }

    #[test]
    fn angle_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let theta = rng.random_range(1e-6..PI - 1e-6);
            let phi = rng.random_range(-PI + 1e-9..PI);
            let (t, p) = normal_to_angles(angles_to_normal(theta, phi)).unwrap();
            assert!((t - theta).abs() < 1e-12 || (theta.sin() < 1e-4), "theta {theta} -> {t}");
            assert!((p - phi).abs() < 1e-12 * (1.0 / theta.sin()).max(1.0), "phi {phi} -> {p}");
        }
    }

    #[test]
    fn mirror_point_cases() {
        let plane = Plane::new(Vec3::ZERO, UnitVec3::Z);
        assert_eq!(mirror_point(Vec3::new(0.0, 0.0, 2.0), &plane), Vec3::new(0.0, 0.0, -2.0));
        let on = Vec3::new(3.0, -1.0, 0.0);
        assert_eq!(mirror_point(on, &plane), on);
    }

    #[test]
    fn mirror_point_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..1000 {
            let plane = Plane::new(random_point(&mut rng, 5.0), random_unit(&mut rng));
            let p = random_point(&mut rng, 10.0);
            let q = mirror_point(p, &plane);
            let mid = (p + q) * 0.5;
            assert!(plane.signed_distance(mid).abs() < 1e-12);
            // Distance to any point on the plane is preserved.
            let on = plane.point;
            assert!((p.distance(on) - q.distance(on)).abs() < 1e-10);
        }
    }

    #[test]
    fn rotate_between_maps_from_to_to() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let a = random_unit(&mut rng);
            let b = random_unit(&mut rng);
            assert!(close(rotate_between(a, b, a.vec()), b.vec(), 1e-12));
        }
        let a = UnitVec3::Z;
        let r = rotate_between(a, a.flip(), a.vec());
        assert!(close(r, -a.vec(), 1e-12));
    }
}
