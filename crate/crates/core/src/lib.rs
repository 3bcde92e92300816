//! Max-entropy image augmentation.
//!
//! Three families of random image transforms (spectral filtering, smooth
//! spatial warps, per-channel color curves) plus an optional additive noise
//! primitive. They are composed into randomly drawn chains and mixed with
//! the clean image under Dirichlet weights. Every draw is keyed by a
//! splittable counter-based RNG and recorded as a serializable [`Recipe`], so
//! any augmented image can be replayed exactly.
//!
//! Beyond the transforms, the crate ships the offline dataset pipeline
//! ([`pipeline`]), an embedding-space coverage metric ([`analysis`]), Monte
//! Carlo self-checks of the sampling laws ([`validate`]), and a throughput
//! benchmark ([`bench`]).

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod augment;
pub mod batch;
pub mod bench;
pub mod color;
pub mod config;
pub mod error;
pub mod image;
pub mod pipeline;
pub mod rng;
pub mod spatial;
pub mod spectral;
pub mod validate;

pub use augment::{apply_recipe, prime_augment, sample_recipe, AdditiveParams, Recipe, Step};
pub use color::{apply_color, sample_color_params, ColorParams};
pub use config::{PrimeConfig, Primitive};
pub use error::{Error, Result};
pub use image::{clamp_image, CoordGrid, Image};
pub use rng::RngState;
pub use spatial::{
    apply_spatial, displacement_field, sample_spatial_params, DisplacementField, SpatialParams,
};
pub use spectral::{apply_spectral, sample_spectral_params, SpectralParams};
