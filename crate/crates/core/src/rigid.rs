//! Least-squares rigid alignment of point pairs.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::types::{Correspondence, RigidTransform};

/// Ratio of the middle to the largest eigenvalue of the source scatter below
/// which the selection is treated as collinear.
const COLLINEAR_RATIO: f64 = 1e-12;
/// Largest eigenvalue of the source scatter below which points are coincident.
const COINCIDENT_SCATTER: f64 = 1e-24;

/// Squared residual `‖y − (R x + t)‖²` of one correspondence.
#[inline]
pub fn alignment_error(transform: &RigidTransform, c: &Correspondence) -> f64 {
    (c.target.coords - (transform.rotation * c.source.coords + transform.translation)).norm_squared()
}

/// Solves `argmin Σ ‖y_i − (R x_i + t)‖²` over the selected correspondences with
/// the SVD (Kabsch) method. Reflections are removed by flipping the singular
/// vector of the smallest singular value.
pub fn solve_rigid(correspondences: &[Correspondence], indices: &[usize]) -> Result<RigidTransform> {
    if indices.len() < 3 {
        return Err(Error::DegenerateInput(format!(
            "need at least 3 correspondences, got {}",
            indices.len()
        )));
    }
    let inv_n = 1.0 / indices.len() as f64;
    let mut src_mean = Vector3::zeros();
    let mut dst_mean = Vector3::zeros();
    for &i in indices {
        let c = &correspondences[i];
        src_mean += c.source.coords;
        dst_mean += c.target.coords;
    }
    src_mean *= inv_n;
    dst_mean *= inv_n;

    let mut cross = Matrix3::zeros();
    let mut scatter = Matrix3::zeros();
    for &i in indices {
        let c = &correspondences[i];
        let xs = c.source.coords - src_mean;
        let ys = c.target.coords - dst_mean;
        cross += xs * ys.transpose();
        scatter += xs * xs.transpose();
    }

    let mut eig = scatter.symmetric_eigen().eigenvalues;
    eig.as_mut_slice().sort_by(|a, b| b.total_cmp(a));
    if eig[0] <= COINCIDENT_SCATTER {
        return Err(Error::DegenerateInput("source points are coincident".into()));
    }
    if eig[1] <= COLLINEAR_RATIO * eig[0] {
        return Err(Error::DegenerateInput("source points are collinear".into()));
    }

    let svd = cross.svd(true, true);
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Err(Error::DegenerateInput("SVD did not converge".into()));
    };
    let mut v = v_t.transpose();
    let mut rotation = v * u.transpose();
    if rotation.determinant() < 0.0 {
        let smallest = svd.singular_values.imin();
        let mut col = v.column_mut(smallest);
        col.neg_mut();
        rotation = v * u.transpose();
    }
    let translation = dst_mean - rotation * src_mean;
    Ok(RigidTransform::new(rotation, translation))
}
