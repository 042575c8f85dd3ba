//! Multi-instance rigid point cloud registration.
//!
//! Given a set of putative point correspondences between a source model and a
//! target scene that contains several copies of that model, `multireg` groups the
//! correspondences by clustering the columns of a distance invariance matrix,
//! refines the clusters into rigid transforms and reports one pose per detected
//! instance. A synthetic scene generator and hit-based metrics are included for
//! benchmarking.
//!
//! ```
//! use multireg::{pipeline, synthgen::{self, SceneSpec}};
//!
//! let spec = SceneSpec { num_instances: 2, noise_sigma: 0.0, seed: 3, ..SceneSpec::default() };
//! let (corrs, truth) = synthgen::generate_scene(&spec).unwrap();
//! let result = pipeline::register(&corrs, &pipeline::PipelineConfig::default()).unwrap();
//! assert_eq!(result.instances.len(), truth.transforms.len());
//! ```

pub mod bench;
pub mod clustering;
pub mod compatibility;
pub mod error;
pub mod eval;
pub mod extraction;
pub mod io;
pub mod pipeline;
pub mod refinement;
pub mod rigid;
pub mod synthgen;
pub mod types;

pub use error::{Error, Result};
pub use types::{Correspondence, InstanceHypothesis, Label, Point3, RigidTransform};
