//! Domain types shared by every stage of the pipeline.

use nalgebra::{Matrix3, Rotation3, Vector3};

pub type Point3 = nalgebra::Point3<f64>;

/// Instance id of a correspondence, or `None` for an outlier.
pub type Label = Option<usize>;

pub const OUTLIER: Label = None;

/// A putative match between a source model point and a target scene point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub source: Point3,
    pub target: Point3,
}

impl Correspondence {
    pub fn new(source: Point3, target: Point3) -> Self {
        Self { source, target }
    }

    pub fn from_arrays(source: [f64; 3], target: [f64; 3]) -> Self {
        Self {
            source: Point3::from(source),
            target: Point3::from(target),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.source.iter().chain(self.target.iter()).all(|v| v.is_finite())
    }
}

/// Rotation followed by translation: `y = R x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::new(Matrix3::identity(), Vector3::zeros())
    }

    /// Rotation of `angle` radians about `axis` (need not be normalized).
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64, translation: Vector3<f64>) -> Self {
        let rot = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
        Self::new(*rot.matrix(), translation)
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform::new(rt, -(rt * self.translation))
    }

    /// Checks `RᵀR = I` and `det R = +1` to within `tol`.
    pub fn is_valid(&self, tol: f64) -> bool {
        let ortho = (self.rotation.transpose() * self.rotation - Matrix3::identity()).amax();
        let det = self.rotation.determinant();
        self.rotation.iter().all(|v| v.is_finite())
            && self.translation.iter().all(|v| v.is_finite())
            && ortho <= tol
            && (det - 1.0).abs() <= tol
    }

    /// Row-major rotation entries followed by the translation.
    pub fn to_row_major(&self) -> [f64; 12] {
        let r = &self.rotation;
        let t = &self.translation;
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
            t.x,
            t.y,
            t.z,
        ]
    }

    pub fn from_row_major(v: &[f64; 12]) -> Self {
        Self::new(
            Matrix3::new(v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]),
            Vector3::new(v[9], v[10], v[11]),
        )
    }
}

/// A pose hypothesis for one instance and the correspondences it explains.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceHypothesis {
    pub transform: RigidTransform,
    /// Sorted ascending, no duplicates.
    pub inlier_indices: Vec<usize>,
}

impl InstanceHypothesis {
    pub fn new(transform: RigidTransform, mut inlier_indices: Vec<usize>) -> Self {
        inlier_indices.sort_unstable();
        inlier_indices.dedup();
        Self {
            transform,
            inlier_indices,
        }
    }

    pub fn inlier_count(&self) -> usize {
        self.inlier_indices.len()
    }
}
