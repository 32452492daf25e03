//! Event/image fusion: the parameter-free polarity overlay and a toy-scale
//! hierarchical event adapter with its efficiency accounting and gradient
//! verification.

mod accounting;
mod adapter;
mod dropout;
mod gradcheck;
mod nn;
mod overlay;

pub use accounting::{additional_macs, count_parameters, flops_estimate, padded_resolution, shape_trace};
pub use adapter::{
    adapter_forward, image_only_forward, patch_embed_shared, AdapterConfig, AdapterParams, BlockKind, FusionActivation,
    ParamRole, TensorSpec, TokenGrid,
};
pub use dropout::{image_dropout, DropoutOutcome};
pub use gradcheck::{gradient_check, gradient_check_with, toy_gradient_check, GradCheckOptions, CHECK_WEIGHT_STD, GradCheckReport, Probe};
pub use nn::Mat;
pub use overlay::{overlay, PolarityColorMap};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FusionError {
    #[error("input is {got_w}x{got_h} but {want_w}x{want_h} was expected")]
    GeometryMismatch {
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },
    #[error("resolution {width}x{height} is not divisible by patch size {patch}")]
    IndivisibleResolution { width: usize, height: usize, patch: usize },
    #[error("tensor `{tensor}` has shape {got:?}, expected {expected:?}")]
    ShapeMismatch {
        tensor: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("invalid adapter config: {0}")]
    InvalidConfig(String),
    #[error("dropout rate must lie in [0, 1], got {0}")]
    InvalidRate(f64),
    #[error("on and off colors must differ")]
    IndistinctColors,
    #[error("non-finite gradient for `{tensor}`[{index}]")]
    NonFiniteGradient { tensor: String, index: usize },
    #[error("{count} parameters is too many for finite differences (limit {limit})")]
    TooManyParameters { count: usize, limit: usize },
}
