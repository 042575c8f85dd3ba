//! Distance invariance matrix.
//!
//! Entry `(i, j)` scores how well correspondences `i` and `j` preserve the
//! distance between their endpoints: `s²` with `s = min(d/d', d'/d)`, where `d`
//! is the source-side and `d'` the target-side distance. Rigid motions preserve
//! distances, so two inliers of the same instance score close to 1. Column `i`
//! is the compatibility vector of correspondence `i`.

use rayon::prelude::*;

use crate::types::Correspondence;

/// Dense symmetric `n × n` matrix, row-major, 32-bit entries.
#[derive(Debug, Clone, PartialEq)]
pub struct CompatibilityMatrix {
    n: usize,
    values: Vec<f32>,
}

impl CompatibilityMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f32 {
        self.values[i * self.n + j]
    }

    /// Compatibility vector of correspondence `i` (row `i`, equal to column `i`).
    pub fn column(&self, i: usize) -> &[f32] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.values
    }

    /// Comma-separated rows, one line per row.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.n * self.n * 12);
        for i in 0..self.n {
            for (j, v) in self.column(i).iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                out.push_str(&format!("{v:.9}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Squared ratio score of two correspondences, in `[0, 1]`.
///
/// Coincident endpoints on both sides score 1; a zero distance on exactly one
/// side scores 0.
pub fn pairwise_score(a: &Correspondence, b: &Correspondence) -> f64 {
    let d = (a.source - b.source).norm();
    let d_prime = (a.target - b.target).norm();
    match (d == 0.0, d_prime == 0.0) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        (false, false) => {
            let s = if d < d_prime { d / d_prime } else { d_prime / d };
            s * s
        }
    }
}

/// Builds the full matrix. Rows of the upper triangle are computed in parallel,
/// then mirrored.
pub fn build_matrix(correspondences: &[Correspondence]) -> CompatibilityMatrix {
    let n = correspondences.len();
    let mut values = vec![0.0f32; n * n];
    if n == 0 {
        return CompatibilityMatrix { n, values };
    }
    values.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let ci = &correspondences[i];
        row[i] = 1.0;
        for (j, cj) in correspondences.iter().enumerate().skip(i + 1) {
            row[j] = pairwise_score(ci, cj) as f32;
        }
    });
    for i in 0..n {
        for j in 0..i {
            values[i * n + j] = values[j * n + i];
        }
    }
    CompatibilityMatrix { n, values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Point3, RigidTransform};
    use nalgebra::Vector3;
    use proptest::prelude::*;

    fn c(s: [f64; 3], t: [f64; 3]) -> Correspondence {
        Correspondence::from_arrays(s, t)
    }

    #[test]
    fn score_examples() {
        let a = c([0.0, 0.0, 0.0], [0.0, 0.0, 0.0]);
        assert_eq!(pairwise_score(&a, &c([1.0, 0.0, 0.0], [0.0, 1.0, 0.0])), 1.0);
        assert_eq!(pairwise_score(&a, &c([1.0, 0.0, 0.0], [0.0, 2.0, 0.0])), 0.25);
        assert_eq!(pairwise_score(&a, &c([0.0, 0.0, 0.0], [0.0, 0.0, 0.0])), 1.0);
        assert_eq!(pairwise_score(&a, &c([0.0, 0.0, 0.0], [0.0, 0.0, 1.0])), 0.0);
        assert_eq!(pairwise_score(&a, &c([0.0, 0.0, 1.0], [0.0, 0.0, 0.0])), 0.0);
    }

    #[test]
    fn single_correspondence() {
        let m = build_matrix(&[c([1.0, 2.0, 3.0], [4.0, 5.0, 6.0])]);
        assert_eq!(m.len(), 1);
        assert_eq!(m.get(0, 0), 1.0);
    }

    #[test]
    fn exact_inliers_are_all_ones() {
        let t = RigidTransform::from_axis_angle(Vector3::new(0.2, 1.0, -0.4), 1.3, Vector3::new(3.0, -2.0, 1.0));
        let corrs: Vec<_> = (0..20)
            .map(|i| {
                let f = i as f64;
                let p = Point3::new(f.sin(), (1.7 * f).cos(), 0.1 * f);
                Correspondence::new(p, t.apply(&p))
            })
            .collect();
        let m = build_matrix(&corrs);
        assert!(m.as_slice().iter().all(|&v| (v as f64 - 1.0).abs() < 1e-6));
    }

    #[test]
    fn csv_dump_shape() {
        let corrs = vec![
            c([0.0, 0.0, 0.0], [0.0, 0.0, 0.0]),
            c([1.0, 0.0, 0.0], [0.0, 2.0, 0.0]),
        ];
        let csv = build_matrix(&corrs).to_csv();
        assert_eq!(csv, "1.000000000,0.250000000\n0.250000000,1.000000000\n");
    }

    fn arb_point() -> impl Strategy<Value = [f64; 3]> {
        prop::array::uniform3(-10.0f64..10.0)
    }

    fn arb_corrs() -> impl Strategy<Value = Vec<Correspondence>> {
        prop::collection::vec((arb_point(), arb_point()), 1..40)
            .prop_map(|v| v.into_iter().map(|(s, t)| c(s, t)).collect())
    }

    proptest! {
        #[test]
        fn symmetric_unit_diagonal_bounded(corrs in arb_corrs()) {
            let m = build_matrix(&corrs);
            for i in 0..m.len() {
                prop_assert_eq!(m.get(i, i), 1.0);
                for j in 0..m.len() {
                    prop_assert_eq!(m.get(i, j), m.get(j, i));
                    prop_assert!((0.0..=1.0).contains(&m.get(i, j)));
                }
            }
        }

        #[test]
        fn rigid_motion_invariance(
            corrs in arb_corrs(),
            axis in prop::array::uniform3(-1.0f64..1.0),
            angle in -3.0f64..3.0,
            shift in arb_point(),
            move_source in any::<bool>(),
        ) {
            prop_assume!(Vector3::from(axis).norm() > 1e-3);
            let m = RigidTransform::from_axis_angle(Vector3::from(axis), angle, Vector3::from(shift));
            let moved: Vec<_> = corrs
                .iter()
                .map(|c| if move_source {
                    Correspondence::new(m.apply(&c.source), c.target)
                } else {
                    Correspondence::new(c.source, m.apply(&c.target))
                })
                .collect();
            for (i, a) in corrs.iter().enumerate() {
                for (j, b) in corrs.iter().enumerate() {
                    let before = pairwise_score(a, b);
                    let after = pairwise_score(&moved[i], &moved[j]);
                    // Exact zero distances are not preserved by floating point
                    // rotation, so only compare well-separated pairs.
                    let d = (a.source - b.source).norm().min((a.target - b.target).norm());
                    if i != j && d > 1e-6 {
                        prop_assert!((before - after).abs() < 1e-9);
                    }
                }
            }
        }

        #[test]
        fn scaling_targets_scales_exact_inliers(k in 0.2f64..5.0) {
            let corrs: Vec<_> = (0..12)
                .map(|i| {
                    let f = i as f64 + 1.0;
                    let p = Point3::new(f.cos(), (0.3 * f).sin(), f * 0.05);
                    Correspondence::new(p, Point3::from(p.coords * k))
                })
                .collect();
            let m = build_matrix(&corrs);
            let expected = k.min(1.0 / k).powi(2);
            for i in 0..12 {
                for j in 0..12 {
                    if i != j {
                        prop_assert!((m.get(i, j) as f64 - expected).abs() < 1e-6);
                    }
                }
            }
        }
    }
}
