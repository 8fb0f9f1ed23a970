//! Rigid-body math: vectors, unit quaternions, poses and TRS matrices.
//!
//! Conventions used everywhere in the crate:
//!
//! * quaternions are stored as `(w, x, y, z)`, right-handed, and act as
//!   active rotations (`q * p * q⁻¹`);
//! * matrices are row-major and multiply column vectors (`M · p`);
//! * a [`TrsMatrix`] is always `T · R · S` with a uniform positive scale.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for double precision geometry checks.
pub const EPS_F64: f64 = 1e-9;
/// Tolerance wherever single precision packed data is involved.
pub const EPS_F32: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("scale must be positive, got {0}")]
    NonPositiveScale(f64),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("cannot normalize a zero-norm quaternion")]
    ZeroNorm,
    #[error("quaternion norm {0} is not 1")]
    NotNormalized(f64),
    #[error("cannot average an empty sample set")]
    EmptySamples,
    #[error("rotation samples cancel out (antipodal set); mean has zero norm")]
    DegenerateAverage,
    #[error("matrix is not a valid TRS transform: {0}")]
    InvalidTrs(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
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

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    /// Unit vector in the same direction, or `None` for a (near) zero vector.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > f64::EPSILON && n.is_finite()).then(|| self / n)
    }

    pub fn max_abs_diff(self, o: Vec3) -> f64 {
        (self.x - o.x)
            .abs()
            .max((self.y - o.y).abs())
            .max((self.z - o.z).abs())
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

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

/// Rotation stored as a normalized quaternion `(w, x, y, z)`.
///
/// Every constructor and operation renormalizes, so `|q| = 1` holds to well
/// within `1e-9`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct UnitQuaternion {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl TryFrom<[f64; 4]> for UnitQuaternion {
    type Error = GeometryError;
    fn try_from(c: [f64; 4]) -> Result<Self, GeometryError> {
        Self::new_normalize(c[0], c[1], c[2], c[3])
    }
}

impl From<UnitQuaternion> for [f64; 4] {
    fn from(q: UnitQuaternion) -> [f64; 4] {
        q.to_array()
    }
}

impl Default for UnitQuaternion {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl UnitQuaternion {
    pub const IDENTITY: UnitQuaternion = UnitQuaternion {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    /// Normalizes `(w, x, y, z)`. Fails on zero norm or non-finite input.
    pub fn new_normalize(w: f64, x: f64, y: f64, z: f64) -> Result<Self, GeometryError> {
        if !(w.is_finite() && x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(GeometryError::NonFinite("quaternion"));
        }
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if n <= f64::EPSILON {
            return Err(GeometryError::ZeroNorm);
        }
        Ok(Self {
            w: w / n,
            x: x / n,
            y: y / n,
            z: z / n,
        })
    }

    /// Accepts components as-is when already normalized to within `1e-9`;
    /// used by decoders that must preserve bits.
    pub fn from_unit_components(w: f64, x: f64, y: f64, z: f64) -> Result<Self, GeometryError> {
        if !(w.is_finite() && x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(GeometryError::NonFinite("quaternion"));
        }
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if (n - 1.0).abs() > EPS_F64 {
            return Err(GeometryError::NotNormalized(n));
        }
        Ok(Self { w, x, y, z })
    }

    fn renormalized(w: f64, x: f64, y: f64, z: f64) -> Self {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        Self {
            w: w / n,
            x: x / n,
            y: y / n,
            z: z / n,
        }
    }

    /// Rotation of `angle` radians about `axis` (need not be normalized).
    /// A zero axis yields the identity.
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        match axis.normalized() {
            Some(a) => {
                let (s, c) = (angle * 0.5).sin_cos();
                Self::renormalized(c, a.x * s, a.y * s, a.z * s)
            }
            None => Self::IDENTITY,
        }
    }

    /// Exponential map: rotation by `|v|` radians about `v`.
    pub fn from_rotation_vector(v: Vec3) -> Self {
        Self::from_axis_angle(v, v.norm())
    }

    /// Intrinsic Z-Y-X (yaw, pitch, roll) Euler angles, radians.
    pub fn from_euler(roll: f64, pitch: f64, yaw: f64) -> Self {
        let qz = Self::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), yaw);
        let qy = Self::from_axis_angle(Vec3::new(0.0, 1.0, 0.0), pitch);
        let qx = Self::from_axis_angle(Vec3::new(1.0, 0.0, 0.0), roll);
        qz * qy * qx
    }

    /// `(roll, pitch, yaw)` for the Z-Y-X convention of [`Self::from_euler`].
    pub fn euler_angles(&self) -> (f64, f64, f64) {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        let roll = (2.0 * (w * x + y * z)).atan2(1.0 - 2.0 * (x * x + y * y));
        let sinp = (2.0 * (w * y - z * x)).clamp(-1.0, 1.0);
        let pitch = sinp.asin();
        let yaw = (2.0 * (w * z + x * y)).atan2(1.0 - 2.0 * (y * y + z * z));
        (roll, pitch, yaw)
    }

    /// Log map, inverse of [`Self::from_rotation_vector`] (angle in `[0, π]`).
    pub fn to_rotation_vector(&self) -> Vec3 {
        let q = if self.w < 0.0 { -*self } else { *self };
        let v = Vec3::new(q.x, q.y, q.z);
        let s = v.norm();
        if s < 1e-12 {
            return v * 2.0;
        }
        let angle = 2.0 * s.atan2(q.w);
        v * (angle / s)
    }

    pub fn w(&self) -> f64 {
        self.w
    }
    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn conjugate(&self) -> Self {
        Self {
            w: self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    pub fn inverse(&self) -> Self {
        self.conjugate()
    }

    pub fn dot(&self, o: &UnitQuaternion) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    /// Active rotation of a vector.
    pub fn rotate(&self, v: Vec3) -> Vec3 {
        // v' = v + 2w(u×v) + 2u×(u×v), u the vector part
        let u = Vec3::new(self.x, self.y, self.z);
        let t = u.cross(v) * 2.0;
        v + t * self.w + u.cross(t)
    }

    pub fn to_rotation_matrix(&self) -> [[f64; 3]; 3] {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        [
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ]
    }

    /// Inverse of [`Self::to_rotation_matrix`] for an orthonormal matrix.
    pub fn from_rotation_matrix(m: &[[f64; 3]; 3]) -> Result<Self, GeometryError> {
        let trace = m[0][0] + m[1][1] + m[2][2];
        let (w, x, y, z) = if trace > 0.0 {
            let s = (trace + 1.0).sqrt() * 2.0;
            (
                0.25 * s,
                (m[2][1] - m[1][2]) / s,
                (m[0][2] - m[2][0]) / s,
                (m[1][0] - m[0][1]) / s,
            )
        } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
            let s = (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt() * 2.0;
            (
                (m[2][1] - m[1][2]) / s,
                0.25 * s,
                (m[0][1] + m[1][0]) / s,
                (m[0][2] + m[2][0]) / s,
            )
        } else if m[1][1] > m[2][2] {
            let s = (1.0 + m[1][1] - m[0][0] - m[2][2]).sqrt() * 2.0;
            (
                (m[0][2] - m[2][0]) / s,
                (m[0][1] + m[1][0]) / s,
                0.25 * s,
                (m[1][2] + m[2][1]) / s,
            )
        } else {
            let s = (1.0 + m[2][2] - m[0][0] - m[1][1]).sqrt() * 2.0;
            (
                (m[1][0] - m[0][1]) / s,
                (m[0][2] + m[2][0]) / s,
                (m[1][2] + m[2][1]) / s,
                0.25 * s,
            )
        };
        Self::new_normalize(w, x, y, z)
    }
}

impl Mul for UnitQuaternion {
    type Output = UnitQuaternion;
    /// Hamilton product; `(a * b).rotate(v) == a.rotate(b.rotate(v))`.
    fn mul(self, b: UnitQuaternion) -> UnitQuaternion {
        let a = self;
        UnitQuaternion::renormalized(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }
}

impl Neg for UnitQuaternion {
    type Output = UnitQuaternion;
    fn neg(self) -> UnitQuaternion {
        UnitQuaternion {
            w: -self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }
}

/// Rigid transform without scale. `pose.transform_point(p) = R·p + t`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub translation: Vec3,
    pub rotation: UnitQuaternion,
}

impl Pose {
    pub const IDENTITY: Pose = Pose {
        translation: Vec3::ZERO,
        rotation: UnitQuaternion::IDENTITY,
    };

    pub fn new(translation: Vec3, rotation: UnitQuaternion) -> Self {
        Self {
            translation,
            rotation,
        }
    }

    pub fn from_translation(t: Vec3) -> Self {
        Self::new(t, UnitQuaternion::IDENTITY)
    }

    pub fn is_finite(&self) -> bool {
        self.translation.is_finite() && self.rotation.to_array().iter().all(|c| c.is_finite())
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            translation: self.translation + self.rotation.rotate(other.translation),
            rotation: self.rotation * other.rotation,
        }
    }

    pub fn transform_point(&self, p: Vec3) -> Vec3 {
        self.rotation.rotate(p) + self.translation
    }

    pub fn to_trs(&self) -> TrsMatrix {
        TrsMatrix::from_parts(self.translation, self.rotation, 1.0)
    }

    /// Euclidean distance between translations.
    pub fn position_error(&self, other: &Pose) -> f64 {
        self.translation.distance(other.translation)
    }

    pub fn rotation_error(&self, other: &Pose) -> f64 {
        angular_distance(&self.rotation, &other.rotation)
    }
}

/// Inverse of a rigid transform: `p ∘ invert_rigid(p) = identity`.
pub fn invert_rigid(p: &Pose) -> Pose {
    let r_inv = p.rotation.inverse();
    Pose {
        translation: -r_inv.rotate(p.translation),
        rotation: r_inv,
    }
}

/// Row-major 4×4 affine transform `T · R · S` with uniform scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrsMatrix {
    m: [f64; 16],
}

impl Default for TrsMatrix {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl TrsMatrix {
    pub const IDENTITY: TrsMatrix = TrsMatrix {
        m: [
            1.0, 0.0, 0.0, 0.0, //
            0.0, 1.0, 0.0, 0.0, //
            0.0, 0.0, 1.0, 0.0, //
            0.0, 0.0, 0.0, 1.0,
        ],
    };

    fn from_parts(t: Vec3, r: UnitQuaternion, s: f64) -> Self {
        let rm = r.to_rotation_matrix();
        let mut m = [0.0; 16];
        for (i, row) in rm.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                m[i * 4 + j] = v * s;
            }
        }
        m[3] = t.x;
        m[7] = t.y;
        m[11] = t.z;
        m[15] = 1.0;
        Self { m }
    }

    /// Wraps raw row-major entries after checking the TRS invariants.
    pub fn from_row_major(m: [f64; 16]) -> Result<Self, GeometryError> {
        let out = Self { m };
        out.validate()?;
        Ok(out)
    }

    pub fn entries(&self) -> &[f64; 16] {
        &self.m
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.m[row * 4 + col]
    }

    pub fn translation(&self) -> Vec3 {
        Vec3::new(self.m[3], self.m[7], self.m[11])
    }

    /// Uniform scale, the length of the first basis column.
    pub fn scale(&self) -> f64 {
        Vec3::new(self.m[0], self.m[4], self.m[8]).norm()
    }

    pub fn rotation(&self) -> UnitQuaternion {
        let s = self.scale();
        let mut r = [[0.0; 3]; 3];
        for (i, row) in r.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.m[i * 4 + j] / s;
            }
        }
        UnitQuaternion::from_rotation_matrix(&r).unwrap_or_default()
    }

    /// Checks bottom row, positive uniform scale and an orthonormal,
    /// right-handed rotation block, all to `1e-9`.
    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.m.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite("matrix"));
        }
        if self.m[12..16] != [0.0, 0.0, 0.0, 1.0] {
            return Err(GeometryError::InvalidTrs("bottom row is not (0,0,0,1)"));
        }
        let s = self.scale();
        if s <= EPS_F64 {
            return Err(GeometryError::InvalidTrs("scale is not positive"));
        }
        let col = |j: usize| Vec3::new(self.m[j], self.m[4 + j], self.m[8 + j]) / s;
        let (c0, c1, c2) = (col(0), col(1), col(2));
        let tol = EPS_F64 * 10.0;
        for (a, b) in [(c0, c1), (c0, c2), (c1, c2)] {
            if a.dot(b).abs() > tol {
                return Err(GeometryError::InvalidTrs(
                    "rotation block is not orthogonal",
                ));
            }
        }
        for c in [c0, c1, c2] {
            if (c.norm() - 1.0).abs() > tol {
                return Err(GeometryError::InvalidTrs("scale is not uniform"));
            }
        }
        if c0.cross(c1).dot(c2) <= 0.0 {
            return Err(GeometryError::InvalidTrs(
                "rotation block has negative determinant",
            ));
        }
        Ok(())
    }

    pub fn transform_point(&self, p: Vec3) -> Vec3 {
        let m = &self.m;
        Vec3::new(
            m[0] * p.x + m[1] * p.y + m[2] * p.z + m[3],
            m[4] * p.x + m[5] * p.y + m[6] * p.z + m[7],
            m[8] * p.x + m[9] * p.y + m[10] * p.z + m[11],
        )
    }

    /// Matrix product `self · other`: `other` is applied first.
    pub fn compose(&self, other: &TrsMatrix) -> TrsMatrix {
        let (a, b) = (&self.m, &other.m);
        let mut m = [0.0; 16];
        for i in 0..4 {
            for j in 0..4 {
                m[i * 4 + j] = (0..4).map(|k| a[i * 4 + k] * b[k * 4 + j]).sum();
            }
        }
        m[12..16].copy_from_slice(&[0.0, 0.0, 0.0, 1.0]);
        TrsMatrix { m }
    }

    /// Closed-form inverse: `(T·R·S)⁻¹ = S⁻¹·Rᵀ·T⁻¹`.
    pub fn inverse(&self) -> TrsMatrix {
        let s2 = self.scale().powi(2);
        let mut m = [0.0; 16];
        for i in 0..3 {
            for j in 0..3 {
                m[i * 4 + j] = self.m[j * 4 + i] / s2;
            }
        }
        let t = self.translation();
        for i in 0..3 {
            m[i * 4 + 3] = -(m[i * 4] * t.x + m[i * 4 + 1] * t.y + m[i * 4 + 2] * t.z);
        }
        m[15] = 1.0;
        TrsMatrix { m }
    }

    pub fn max_abs_diff(&self, other: &TrsMatrix) -> f64 {
        self.m
            .iter()
            .zip(other.m.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Builds `T(t) · R(r) · S(s)`.
pub fn compose_trs(t: Vec3, r: UnitQuaternion, s: f64) -> Result<TrsMatrix, GeometryError> {
    if !t.is_finite() {
        return Err(GeometryError::NonFinite("translation"));
    }
    if !r.to_array().iter().all(|c| c.is_finite()) {
        return Err(GeometryError::NonFinite("rotation"));
    }
    if !s.is_finite() {
        return Err(GeometryError::NonFinite("scale"));
    }
    if s <= 0.0 {
        return Err(GeometryError::NonPositiveScale(s));
    }
    // accept slightly denormalized input, the product needs an exact rotation
    let r = UnitQuaternion::new_normalize(r.w, r.x, r.y, r.z)?;
    Ok(TrsMatrix::from_parts(t, r, s))
}

pub fn transform_point(m: &TrsMatrix, p: Vec3) -> Vec3 {
    m.transform_point(p)
}

pub fn compose(a: &TrsMatrix, b: &TrsMatrix) -> TrsMatrix {
    a.compose(b)
}

pub fn average_positions(samples: &[Vec3]) -> Result<Vec3, GeometryError> {
    if samples.is_empty() {
        return Err(GeometryError::EmptySamples);
    }
    let sum = samples.iter().fold(Vec3::ZERO, |acc, p| acc + *p);
    Ok(sum / samples.len() as f64)
}

/// Hemisphere-aligned, renormalized component-wise mean.
///
/// Each sample is sign-flipped to have a nonnegative dot product with the
/// first sample before summation. Accurate for clustered samples (all within
/// 90° of the first); not a substitute for the eigenvector method on widely
/// spread sets.
pub fn average_rotations(samples: &[UnitQuaternion]) -> Result<UnitQuaternion, GeometryError> {
    let first = samples.first().ok_or(GeometryError::EmptySamples)?;
    let mut acc = [0.0f64; 4];
    for q in samples {
        let sign = if q.dot(first) < 0.0 { -1.0 } else { 1.0 };
        for (a, c) in acc.iter_mut().zip(q.to_array()) {
            *a += sign * c;
        }
    }
    let norm = acc.iter().map(|c| c * c).sum::<f64>().sqrt();
    if norm <= EPS_F64 * samples.len() as f64 {
        return Err(GeometryError::DegenerateAverage);
    }
    UnitQuaternion::new_normalize(acc[0], acc[1], acc[2], acc[3])
}

/// Rotation angle between two orientations, in `[0, π]`; blind to the
/// quaternion double cover.
///
/// Equal to `2·acos(|a·b|)`, evaluated as `4·atan2(|a − b|, |a + b|)` with
/// `b` sign-aligned to `a`, which stays accurate for tiny angles.
pub fn angular_distance(a: &UnitQuaternion, b: &UnitQuaternion) -> f64 {
    let s = if a.dot(b) < 0.0 { -1.0 } else { 1.0 };
    let (a, b) = (a.to_array(), b.to_array());
    let diff = (0..4)
        .map(|i| (a[i] - s * b[i]).powi(2))
        .sum::<f64>()
        .sqrt();
    let sum = (0..4)
        .map(|i| (a[i] + s * b[i]).powi(2))
        .sum::<f64>()
        .sqrt();
    4.0 * diff.atan2(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn z_axis() -> Vec3 {
        Vec3::new(0.0, 0.0, 1.0)
    }

    #[test]
    fn identity_trs() {
        let m = compose_trs(Vec3::ZERO, UnitQuaternion::IDENTITY, 1.0).unwrap();
        assert_eq!(m, TrsMatrix::IDENTITY);
    }

    #[test]
    fn translation_only_trs() {
        let m = compose_trs(Vec3::new(1.0, 2.0, 3.0), UnitQuaternion::IDENTITY, 1.0).unwrap();
        let mut expected = *TrsMatrix::IDENTITY.entries();
        expected[3] = 1.0;
        expected[7] = 2.0;
        expected[11] = 3.0;
        assert_eq!(m.entries(), &expected);
    }

    #[test]
    fn rotate_and_scale_point() {
        let r = UnitQuaternion::from_axis_angle(z_axis(), FRAC_PI_2);
        let m = compose_trs(Vec3::ZERO, r, 2.0).unwrap();
        let p = m.transform_point(Vec3::new(1.0, 0.0, 0.0));
        assert!(p.max_abs_diff(Vec3::new(0.0, 2.0, 0.0)) < EPS_F64);
    }

    #[test]
    fn rejects_bad_scale_and_nan() {
        assert_eq!(
            compose_trs(Vec3::ZERO, UnitQuaternion::IDENTITY, 0.0),
            Err(GeometryError::NonPositiveScale(0.0))
        );
        assert!(compose_trs(Vec3::ZERO, UnitQuaternion::IDENTITY, -1.0).is_err());
        assert!(matches!(
            compose_trs(Vec3::new(f64::NAN, 0.0, 0.0), UnitQuaternion::IDENTITY, 1.0),
            Err(GeometryError::NonFinite(_))
        ));
        assert!(compose_trs(Vec3::ZERO, UnitQuaternion::IDENTITY, f64::INFINITY).is_err());
    }

    #[test]
    fn transform_identity_and_translation() {
        let p = Vec3::new(5.0, -1.0, 2.0);
        assert_eq!(TrsMatrix::IDENTITY.transform_point(p), p);
        let m = compose_trs(Vec3::new(1.0, 0.0, 0.0), UnitQuaternion::IDENTITY, 1.0).unwrap();
        assert_eq!(m.transform_point(Vec3::ZERO), Vec3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn compose_with_identity_and_inverse() {
        let r = UnitQuaternion::from_euler(0.3, -0.2, 1.1);
        let m = compose_trs(Vec3::new(0.5, -2.0, 1.0), r, 1.7).unwrap();
        assert_eq!(compose(&TrsMatrix::IDENTITY, &m), m);
        assert!(compose(&m, &m.inverse()).max_abs_diff(&TrsMatrix::IDENTITY) < EPS_F64);
        m.validate().unwrap();
    }

    #[test]
    fn validate_rejects_skew() {
        let mut e = *TrsMatrix::IDENTITY.entries();
        e[1] = 0.5;
        assert!(TrsMatrix::from_row_major(e).is_err());
        let mut e = *TrsMatrix::IDENTITY.entries();
        e[14] = 0.1;
        assert!(TrsMatrix::from_row_major(e).is_err());
        let mut e = *TrsMatrix::IDENTITY.entries();
        e[10] = -1.0;
        assert!(TrsMatrix::from_row_major(e).is_err());
    }

    #[test]
    fn decompose_roundtrip() {
        let r = UnitQuaternion::from_euler(2.0, 0.4, -2.5);
        let m = compose_trs(Vec3::new(1.0, 2.0, 3.0), r, 0.25).unwrap();
        assert!((m.scale() - 0.25).abs() < EPS_F64);
        assert!(angular_distance(&m.rotation(), &r) < 1e-8);
        assert_eq!(m.translation(), Vec3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn invert_rigid_examples() {
        assert_eq!(invert_rigid(&Pose::IDENTITY), Pose::IDENTITY);
        let p = Pose::from_translation(Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(invert_rigid(&p).translation, Vec3::new(-1.0, 0.0, 0.0));
    }

    #[test]
    fn average_positions_examples() {
        let one = Vec3::new(1.0, 1.0, 1.0);
        assert_eq!(average_positions(&[one]).unwrap(), one);
        let mid = average_positions(&[Vec3::ZERO, Vec3::new(2.0, 0.0, 0.0)]).unwrap();
        assert_eq!(mid, Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(average_positions(&[]), Err(GeometryError::EmptySamples));
    }

    #[test]
    fn average_rotations_examples() {
        let q = UnitQuaternion::from_euler(0.1, 0.2, 0.3);
        assert!(angular_distance(&average_rotations(&[q]).unwrap(), &q) < EPS_F64);
        let id = UnitQuaternion::IDENTITY;
        assert_eq!(average_rotations(&[id, id]).unwrap(), id);
        let five = 5f64.to_radians();
        let a = UnitQuaternion::from_axis_angle(z_axis(), five);
        let b = UnitQuaternion::from_axis_angle(z_axis(), -five);
        let avg = average_rotations(&[a, b]).unwrap();
        assert!(angular_distance(&avg, &id) < EPS_F64);
        assert_eq!(average_rotations(&[]), Err(GeometryError::EmptySamples));
    }

    #[test]
    fn average_rotations_handles_double_cover() {
        let q = UnitQuaternion::from_euler(0.0, 0.0, 0.4);
        let avg = average_rotations(&[q, -q, q]).unwrap();
        assert!(angular_distance(&avg, &q) < EPS_F64);
    }

    #[test]
    fn angular_distance_examples() {
        let q = UnitQuaternion::from_euler(0.5, 0.1, -0.9);
        assert!(angular_distance(&q, &q) < 1e-7);
        assert!(angular_distance(&q, &-q) < 1e-7);
        let x90 = UnitQuaternion::from_axis_angle(Vec3::new(1.0, 0.0, 0.0), FRAC_PI_2);
        let d = angular_distance(&UnitQuaternion::IDENTITY, &x90);
        assert!((d - FRAC_PI_2).abs() < EPS_F64);
        let flip = UnitQuaternion::from_axis_angle(z_axis(), PI);
        assert!((angular_distance(&UnitQuaternion::IDENTITY, &flip) - PI).abs() < 1e-7);
    }

    #[test]
    fn euler_roundtrip() {
        let q = UnitQuaternion::from_euler(0.3, -0.4, 2.0);
        let (r, p, y) = q.euler_angles();
        assert!((r - 0.3).abs() < EPS_F64);
        assert!((p + 0.4).abs() < EPS_F64);
        assert!((y - 2.0).abs() < EPS_F64);
    }

    #[test]
    fn rotation_vector_roundtrip() {
        let v = Vec3::new(0.2, -0.7, 0.4);
        let back = UnitQuaternion::from_rotation_vector(v).to_rotation_vector();
        assert!(back.max_abs_diff(v) < EPS_F64);
    }

    #[test]
    fn zero_norm_rejected() {
        assert_eq!(
            UnitQuaternion::new_normalize(0.0, 0.0, 0.0, 0.0),
            Err(GeometryError::ZeroNorm)
        );
    }
}
