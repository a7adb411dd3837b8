//! BVH-accelerated ray casting and the two geometric field estimators:
//! Monte-Carlo ambient occlusion and the shape diameter function.

mod bvh;
mod fields;

pub use bvh::{brute_force_intersect, Bvh, Hit, Ray};
pub use fields::{
    ambient_occlusion, shape_diameter, FieldConfig, FieldDomain, ScalarField,
};
