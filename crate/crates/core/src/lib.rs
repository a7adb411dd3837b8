//! Semantic- and visibility-aware UV parameterization of triangle meshes.
//!
//! The crate is organized around three optimization pipelines built on a
//! four-subnetwork cycle-mapping backbone (DeformNet / WrapNet / CutNet /
//! UnwrapNet, trained with a scratch reverse-mode tape):
//!
//! - `base`: geometry-preserving UV learning (wrap, cycle, repulsion and
//!   distortion objectives),
//! - `visibility`: the base objective plus a differentiable ambient-occlusion
//!   weighted seam term that steers cuts toward occluded regions,
//! - `semantic`: shape-diameter-driven partitioning (1-D GMM + graph-cut
//!   refinement), per-part training, and grid atlas packing.
//!
//! Supporting modules provide OBJ I/O ([`mesh`], [`obj`]), BVH ray casting and
//! the AO / shape-diameter field estimators ([`spatial`]), the segmentation
//! stack ([`seg`]), evaluation metrics ([`metrics`]) and artifact export
//! ([`export`]). The `uvforge` binary ties these together behind `segment`,
//! `param`, `eval` and `export` subcommands.

pub mod cache;
pub mod cli;
pub mod error;
pub mod export;
pub mod geom;
pub mod label;
pub mod loss;
pub mod manifest;
pub mod mesh;
pub mod metrics;
pub mod nn;
pub mod obj;
pub mod seg;
pub mod spatial;
pub mod synth;
pub mod train;

pub use error::Error;
pub use geom::Vec3;
pub use label::Labeling;
pub use mesh::{Adjacency, Mesh, SubmeshMap};
pub use spatial::{Bvh, FieldConfig, FieldDomain, ScalarField};

pub type Result<T> = std::result::Result<T, Error>;
