//! Synthetic multi-instance scenes with ground truth.
//!
//! A procedural source model (2–3 box or sphere surfaces, centred on its
//! centroid and scaled to a unit bounding-box diagonal) is copied `K` times into
//! a cubic workspace under random rigid transforms. Inlier correspondences pair
//! every model point with its noisy image in each copy. Outliers pair a random
//! model point with either a point on a distractor object (a second procedural
//! shape placed in the scene) or a uniform random point in the workspace.

use std::f64::consts::TAU;

use nalgebra::{UnitQuaternion, Vector3};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::types::{Correspondence, Label, Point3, RigidTransform};

/// Placement attempts per object before giving up.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

const SOURCE_STREAM: u64 = 1;
const SCENE_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SceneSpec {
    pub num_points_per_instance: usize,
    pub num_instances: usize,
    /// Fraction of all correspondences that are outliers.
    pub outlier_ratio: f64,
    /// Per-coordinate Gaussian noise on inlier targets.
    pub noise_sigma: f64,
    /// Half-width of the cubic workspace that holds instance centres and
    /// uniform outliers.
    pub workspace_extent: f64,
    /// Minimum distance between the centres of any two placed objects.
    pub min_instance_separation: f64,
    /// Share of outliers whose target lies on the distractor object.
    pub clutter_fraction: f64,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            num_points_per_instance: 256,
            num_instances: 1,
            outlier_ratio: 0.0,
            noise_sigma: 0.01,
            workspace_extent: 6.0,
            min_instance_separation: 2.5,
            clutter_fraction: 0.3,
            seed: 0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let problem = if self.num_instances == 0 {
            Some("num_instances must be at least 1".to_string())
        } else if self.num_points_per_instance < 3 {
            Some("num_points_per_instance must be at least 3".to_string())
        } else if !(0.0..1.0).contains(&self.outlier_ratio) {
            Some(format!("outlier_ratio must be in [0, 1), got {}", self.outlier_ratio))
        } else if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            Some(format!("noise_sigma must be non-negative, got {}", self.noise_sigma))
        } else if !(self.workspace_extent > 0.0 && self.workspace_extent.is_finite()) {
            Some(format!("workspace_extent must be positive, got {}", self.workspace_extent))
        } else if !(self.min_instance_separation >= 0.0) {
            Some(format!(
                "min_instance_separation must be non-negative, got {}",
                self.min_instance_separation
            ))
        } else if !(0.0..=1.0).contains(&self.clutter_fraction) {
            Some(format!("clutter_fraction must be in [0, 1], got {}", self.clutter_fraction))
        } else {
            None
        };
        problem.map_or(Ok(()), |p| Err(Error::InvalidConfig(p)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub transforms: Vec<RigidTransform>,
    /// True instance of each correspondence, `None` for outliers.
    pub labels: Vec<Label>,
    /// The source model, centred on the origin.
    pub model: Vec<Point3>,
}

/// Uniformly distributed rotation (Shoemake's quaternion method).
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> nalgebra::Matrix3<f64> {
    let u1: f64 = rng.random();
    let u2: f64 = rng.random();
    let u3: f64 = rng.random();
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let q = nalgebra::Quaternion::new(
        b * (TAU * u3).cos(),
        a * (TAU * u2).sin(),
        a * (TAU * u2).cos(),
        b * (TAU * u3).sin(),
    );
    *UnitQuaternion::from_quaternion(q).to_rotation_matrix().matrix()
}

enum Primitive {
    Sphere { center: Vector3<f64>, radius: f64 },
    Box { center: Vector3<f64>, half: Vector3<f64>, orient: nalgebra::Matrix3<f64> },
}

impl Primitive {
    fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let center = Vector3::from_fn(|_, _| rng.random_range(-0.35..0.35));
        if rng.random_bool(0.5) {
            Primitive::Sphere {
                center,
                radius: rng.random_range(0.15..0.45),
            }
        } else {
            Primitive::Box {
                center,
                half: Vector3::from_fn(|_, _| rng.random_range(0.1..0.5)),
                orient: random_rotation(rng),
            }
        }
    }

    fn area(&self) -> f64 {
        match self {
            Primitive::Sphere { radius, .. } => 2.0 * TAU * radius * radius,
            Primitive::Box { half: h, .. } => 8.0 * (h.x * h.y + h.y * h.z + h.z * h.x),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector3<f64> {
        match self {
            Primitive::Sphere { center, radius } => {
                let dir = loop {
                    let v = Vector3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
                    let n = v.norm();
                    if n > 1e-9 {
                        break v / n;
                    }
                };
                center + dir * *radius
            }
            Primitive::Box { center, half, orient } => {
                // Faces normal to axis k have area proportional to the product
                // of the other two half-extents.
                let face_areas = [half.y * half.z, half.x * half.z, half.x * half.y];
                let axis = WeightedIndex::new(face_areas)
                    .expect("box extents are positive")
                    .sample(rng);
                let mut local = Vector3::from_fn(|i, _| rng.random_range(-half[i]..half[i]));
                local[axis] = if rng.random_bool(0.5) { half[axis] } else { -half[axis] };
                center + orient * local
            }
        }
    }
}

/// Random points on a composite of 2–3 primitive surfaces, centred on their
/// centroid and scaled to a bounding-box diagonal of 1.
pub fn procedural_shape<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<Point3> {
    loop {
        let parts: Vec<Primitive> = (0..rng.random_range(2..=3)).map(|_| Primitive::random(rng)).collect();
        let pick = WeightedIndex::new(parts.iter().map(Primitive::area)).expect("areas are positive");
        let raw: Vec<Vector3<f64>> = (0..n).map(|_| parts[pick.sample(rng)].sample(rng)).collect();
        if let Some(points) = normalize(raw) {
            return points;
        }
    }
}

/// Centre on the centroid and scale to unit bounding-box diagonal; `None` when
/// the points do not span three dimensions.
fn normalize(raw: Vec<Vector3<f64>>) -> Option<Vec<Point3>> {
    if raw.len() < 3 {
        return None;
    }
    let centroid = raw.iter().sum::<Vector3<f64>>() / raw.len() as f64;
    let centred: Vec<Vector3<f64>> = raw.iter().map(|p| p - centroid).collect();
    let scatter = centred.iter().map(|p| p * p.transpose()).sum::<nalgebra::Matrix3<f64>>();
    let eig = scatter.symmetric_eigen().eigenvalues;
    if eig.min() <= 1e-6 * eig.max() {
        return None;
    }
    let (lo, hi) = centred.iter().fold(
        (Vector3::repeat(f64::INFINITY), Vector3::repeat(f64::NEG_INFINITY)),
        |(lo, hi), p| (lo.inf(p), hi.sup(p)),
    );
    let scale = 1.0 / (hi - lo).norm();
    Some(centred.into_iter().map(|p| Point3::from(p * scale)).collect())
}

/// The source model for `spec`; depends only on the seed and point count.
pub fn generate_source(spec: &SceneSpec) -> Vec<Point3> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(SOURCE_STREAM);
    procedural_shape(&mut rng, spec.num_points_per_instance)
}

fn place_centers<R: Rng + ?Sized>(rng: &mut R, count: usize, spec: &SceneSpec) -> Result<Vec<Vector3<f64>>> {
    let w = spec.workspace_extent;
    let mut centers: Vec<Vector3<f64>> = Vec::with_capacity(count);
    for object in 0..count {
        let mut placed = false;
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let c = Vector3::from_fn(|_, _| rng.random_range(-w..w));
            if centers.iter().all(|o| (o - c).norm() >= spec.min_instance_separation) {
                centers.push(c);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::SeparationInfeasible {
                object,
                separation: spec.min_instance_separation,
                attempts: MAX_PLACEMENT_ATTEMPTS,
            });
        }
    }
    Ok(centers)
}

/// Number of outliers that makes `outliers / (inliers + outliers)` closest to `ratio`.
pub fn outlier_count(inliers: usize, ratio: f64) -> usize {
    (inliers as f64 * ratio / (1.0 - ratio)).round() as usize
}

/// Generates a shuffled correspondence set and its ground truth.
pub fn generate_scene(spec: &SceneSpec) -> Result<(Vec<Correspondence>, GroundTruth)> {
    spec.validate()?;
    let model = generate_source(spec);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(SCENE_STREAM);

    let k = spec.num_instances;
    let n_in = k * model.len();
    let n_out = outlier_count(n_in, spec.outlier_ratio);
    let n_clutter = (spec.clutter_fraction * n_out as f64).round() as usize;

    let centers = place_centers(&mut rng, k + usize::from(n_clutter > 0), spec)?;
    let transforms: Vec<RigidTransform> = centers[..k]
        .iter()
        .map(|c| RigidTransform::new(random_rotation(&mut rng), *c))
        .collect();

    let mut items: Vec<(Correspondence, Label)> = Vec::with_capacity(n_in + n_out);
    let noise = (spec.noise_sigma > 0.0)
        .then(|| Normal::new(0.0, spec.noise_sigma).expect("sigma is finite and positive"));
    for (id, t) in transforms.iter().enumerate() {
        for x in &model {
            let mut y = t.apply(x);
            if let Some(noise) = &noise {
                y.coords += Vector3::from_fn(|_, _| noise.sample(&mut rng));
            }
            items.push((Correspondence::new(*x, y), Some(id)));
        }
    }

    if n_clutter > 0 {
        let distractor = RigidTransform::new(random_rotation(&mut rng), centers[k]);
        for p in procedural_shape(&mut rng, n_clutter) {
            let x = model[rng.random_range(0..model.len())];
            items.push((Correspondence::new(x, distractor.apply(&p)), None));
        }
    }
    let w = spec.workspace_extent;
    for _ in n_clutter..n_out {
        let x = model[rng.random_range(0..model.len())];
        let y = Point3::from(Vector3::from_fn(|_, _| rng.random_range(-w..w)));
        items.push((Correspondence::new(x, y), None));
    }

    items.shuffle(&mut rng);
    let (corrs, labels) = items.into_iter().unzip();
    Ok((
        corrs,
        GroundTruth {
            transforms,
            labels,
            model,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rigid::alignment_error;

    #[test]
    fn source_is_normalized() {
        let spec = SceneSpec::default();
        let pts = generate_source(&spec);
        assert_eq!(pts.len(), 256);
        let (lo, hi) = pts.iter().fold(
            (Vector3::repeat(f64::INFINITY), Vector3::repeat(f64::NEG_INFINITY)),
            |(lo, hi), p| (lo.inf(&p.coords), hi.sup(&p.coords)),
        );
        assert!(((hi - lo).norm() - 1.0).abs() < 1e-9);
        let centroid = pts.iter().map(|p| p.coords).sum::<Vector3<f64>>() / pts.len() as f64;
        assert!(centroid.norm() < 1e-12);
    }

    #[test]
    fn source_depends_on_seed() {
        let a = generate_source(&SceneSpec { seed: 5, ..SceneSpec::default() });
        let b = generate_source(&SceneSpec { seed: 5, ..SceneSpec::default() });
        let c = generate_source(&SceneSpec { seed: 6, ..SceneSpec::default() });
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn clean_single_instance() {
        let spec = SceneSpec {
            noise_sigma: 0.0,
            seed: 3,
            ..SceneSpec::default()
        };
        let (corrs, truth) = generate_scene(&spec).unwrap();
        assert_eq!(corrs.len(), 256);
        assert!(truth.labels.iter().all(|l| *l == Some(0)));
        assert!(corrs.iter().all(|c| alignment_error(&truth.transforms[0], c) < 1e-24));
    }

    #[test]
    fn realized_outlier_ratio() {
        for (i, ratio) in [0.5, 0.55, 0.63, 0.7].into_iter().enumerate() {
            let spec = SceneSpec {
                num_instances: 20,
                outlier_ratio: ratio,
                seed: i as u64,
                ..SceneSpec::default()
            };
            let (corrs, truth) = generate_scene(&spec).unwrap();
            assert_eq!(corrs.len(), truth.labels.len());
            let outliers = truth.labels.iter().filter(|l| l.is_none()).count();
            let realized = outliers as f64 / corrs.len() as f64;
            assert!((realized - ratio).abs() < 0.01, "{realized} vs {ratio}");
            for k in 0..20 {
                assert_eq!(truth.labels.iter().filter(|l| **l == Some(k)).count(), 256);
            }
        }
    }

    #[test]
    fn inliers_within_noise_bound() {
        let spec = SceneSpec {
            num_instances: 3,
            outlier_ratio: 0.3,
            noise_sigma: 0.02,
            seed: 9,
            ..SceneSpec::default()
        };
        let (corrs, truth) = generate_scene(&spec).unwrap();
        let bound = 5.0 * spec.noise_sigma * 3f64.sqrt();
        let (mut inside, mut total) = (0, 0);
        for (c, l) in corrs.iter().zip(&truth.labels) {
            if let Some(k) = l {
                total += 1;
                if alignment_error(&truth.transforms[*k], c).sqrt() <= bound {
                    inside += 1;
                }
            }
        }
        assert!(inside as f64 >= 0.99 * total as f64);
    }

    #[test]
    fn instances_are_separated_and_valid() {
        let spec = SceneSpec {
            num_instances: 30,
            outlier_ratio: 0.5,
            seed: 4,
            ..SceneSpec::default()
        };
        let (_, truth) = generate_scene(&spec).unwrap();
        for (i, a) in truth.transforms.iter().enumerate() {
            assert!(a.is_valid(1e-9));
            for b in &truth.transforms[i + 1..] {
                assert!((a.translation - b.translation).norm() >= spec.min_instance_separation);
            }
        }
    }

    #[test]
    fn infeasible_separation() {
        let spec = SceneSpec {
            num_instances: 2,
            min_instance_separation: 100.0,
            ..SceneSpec::default()
        };
        assert!(matches!(generate_scene(&spec), Err(Error::SeparationInfeasible { object: 1, .. })));
    }

    #[test]
    fn invalid_specs() {
        for spec in [
            SceneSpec { num_instances: 0, ..SceneSpec::default() },
            SceneSpec { outlier_ratio: 1.0, ..SceneSpec::default() },
            SceneSpec { noise_sigma: -1.0, ..SceneSpec::default() },
        ] {
            assert!(matches!(generate_scene(&spec), Err(Error::InvalidConfig(_))));
        }
    }

    #[test]
    fn scene_is_deterministic() {
        let spec = SceneSpec { num_instances: 4, outlier_ratio: 0.6, seed: 21, ..SceneSpec::default() };
        let a = generate_scene(&spec).unwrap();
        let b = generate_scene(&spec).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn rotation_sampling_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut mean = nalgebra::Matrix3::zeros();
        for _ in 0..10_000 {
            let r = random_rotation(&mut rng);
            assert!((r.determinant() - 1.0).abs() < 1e-9);
            mean += r;
        }
        mean /= 10_000.0;
        assert!(mean.amax() < 0.05, "{mean}");
    }
}
