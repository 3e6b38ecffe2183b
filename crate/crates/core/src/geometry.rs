//! 3D/2D geometric primitives and rigid-transform algebra used by every other
//! module.
//!
//! Conventions: right-handed frames, column vectors, transforms applied as
//! `p' = R·p + t`. Euler angles follow the intrinsic Z-Y-X (yaw, pitch, roll)
//! convention and are reported in degrees; all internal math is in radians.

use nalgebra::{Matrix3, Vector2, Vector3};

/// Tolerance for rotation-matrix orthonormality and determinant checks.
pub const RIGID_TOL: f64 = 1e-9;

/// A 3D point in meters, in some named Cartesian frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        debug_assert!(x.is_finite() && y.is_finite() && z.is_finite());
        Self { x, y, z }
    }

    pub fn from_vector(v: Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    /// Drops the height component.
    pub fn xy(self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn distance(self, other: Point3) -> f64 {
        (self.to_vector() - other.to_vector()).norm()
    }
}

/// A 2D point in meters (ground-plane coordinates).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        debug_assert!(x.is_finite() && y.is_finite());
        Self { x, y }
    }

    pub fn from_vector(v: Vector2<f64>) -> Self {
        Self::new(v.x, v.y)
    }

    pub fn to_vector(self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Rotates the point about the origin by `angle` radians (counter-clockwise).
    pub fn rotated(self, angle: f64) -> Point2 {
        let (s, c) = angle.sin_cos();
        Point2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

/// A timestamped point cloud whose points all share one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub frame_id: String,
    /// Capture time in seconds, shared by every point of the frame.
    pub capture_time: f64,
    pub points: Vec<Point3>,
}

impl PointCloud {
    pub fn new(frame_id: impl Into<String>, capture_time: f64, points: Vec<Point3>) -> Self {
        Self {
            frame_id: frame_id.into(),
            capture_time,
            points,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// A proper rigid transform `p ↦ R·p + t`.
///
/// The rotation must be orthonormal with determinant +1 (within [`RIGID_TOL`]);
/// constructors that build rotations from angles guarantee this, data parsed
/// from files should be checked with [`RigidTransform::is_rigid`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self::new(Matrix3::identity(), translation)
    }

    /// Builds a transform from intrinsic Z-Y-X Euler angles (degrees) and a translation.
    pub fn from_euler(angles: EulerAngles, translation: Vector3<f64>) -> Self {
        Self::new(euler_to_rotation(angles), translation)
    }

    /// Applies the transform to a point: `R·p + t`.
    pub fn apply(&self, p: Point3) -> Point3 {
        Point3::from_vector(self.rotation * p.to_vector() + self.translation)
    }

    /// Applies only the rotation (for free vectors).
    pub fn apply_vector(&self, v: Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// Composes two transforms; `other` is applied first:
    /// `compose(a, b).apply(p) == a.apply(b.apply(p))`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// Returns the inverse transform `(Rᵀ, -Rᵀ·t)`.
    pub fn invert(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Checks orthonormality (`R·Rᵀ = I`) and `det R = +1` within `tol`.
    pub fn is_rigid(&self, tol: f64) -> bool {
        let gram = self.rotation * self.rotation.transpose();
        let ortho = (gram - Matrix3::identity()).abs().max() <= tol;
        let proper = (self.rotation.determinant() - 1.0).abs() <= tol;
        ortho && proper && self.translation.iter().all(|c| c.is_finite())
    }

    /// Serializes as 12 numbers: the 9 rotation entries row-major, then the translation.
    pub fn to_record(&self) -> [f64; 12] {
        let r = &self.rotation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
            self.translation.x,
            self.translation.y,
            self.translation.z,
        ]
    }

    pub fn from_record(rec: &[f64; 12]) -> Self {
        Self {
            rotation: Matrix3::new(
                rec[0], rec[1], rec[2], rec[3], rec[4], rec[5], rec[6], rec[7], rec[8],
            ),
            translation: Vector3::new(rec[9], rec[10], rec[11]),
        }
    }
}

/// Rotation about the x axis by `angle` radians.
pub fn rotation_x(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

/// Rotation about the y axis by `angle` radians.
pub fn rotation_y(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

/// Rotation about the z axis by `angle` radians.
pub fn rotation_z(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Intrinsic Z-Y-X (yaw ψ1, pitch ψ2, roll ψ3) angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerAngles {
    /// Yaw about z, degrees.
    pub psi1: f64,
    /// Pitch about y, degrees; decompositions return it in [-90°, 90°].
    pub psi2: f64,
    /// Roll about x, degrees.
    pub psi3: f64,
}

impl EulerAngles {
    pub fn new(psi1: f64, psi2: f64, psi3: f64) -> Self {
        Self { psi1, psi2, psi3 }
    }
}

/// Builds the rotation matrix `Rz(ψ1)·Ry(ψ2)·Rx(ψ3)` from degrees.
pub fn euler_to_rotation(angles: EulerAngles) -> Matrix3<f64> {
    rotation_z(angles.psi1.to_radians())
        * rotation_y(angles.psi2.to_radians())
        * rotation_x(angles.psi3.to_radians())
}

/// Decomposes an orthonormal matrix into intrinsic Z-Y-X Euler angles.
///
/// Returns the angles (degrees) and a gimbal-lock flag. At gimbal lock
/// (|cos ψ2| < 1e-9) ψ3 is fixed to 0 and ψ1 absorbs the remaining rotation.
pub fn rotation_to_euler(r: &Matrix3<f64>) -> (EulerAngles, bool) {
    let sin_p2 = (-r[(2, 0)]).clamp(-1.0, 1.0);
    let psi2 = sin_p2.asin();
    let gimbal = psi2.cos().abs() < 1e-9;
    let (psi1, psi3) = if gimbal {
        (f64::atan2(-r[(0, 1)], r[(1, 1)]), 0.0)
    } else {
        (
            f64::atan2(r[(1, 0)], r[(0, 0)]),
            f64::atan2(r[(2, 1)], r[(2, 2)]),
        )
    };
    (
        EulerAngles::new(psi1.to_degrees(), psi2.to_degrees(), psi3.to_degrees()),
        gimbal,
    )
}

/// Wraps an angle to (-π, π].
pub fn wrap_angle(angle: f64) -> f64 {
    let mut a = angle % std::f64::consts::TAU;
    if a <= -std::f64::consts::PI {
        a += std::f64::consts::TAU;
    } else if a > std::f64::consts::PI {
        a -= std::f64::consts::TAU;
    }
    a
}
