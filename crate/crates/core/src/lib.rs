//! Deep image-in-image steganography.
//!
//! A stego system that hides a full-size color image inside another: a
//! strided-convolution feature extractor feeds a ResNet-style
//! transposed-convolution decoder for both embedding and extraction,
//! trained end-to-end with an alpha-weighted MSE loss. The crate also
//! carries the evaluation stack: PSNR/SSIM/capacity metrics, k-bit LSB
//! baselines, and histogram/difference steganalysis.
//!
//! Numeric code is generic over the element type via [`scalar::Scalar`]:
//! `f32` for training and inference, `f64` for gradient checking.

pub mod autodiff;
pub mod checkpoint;
pub mod conv;
pub mod error;
pub mod gradcheck;
pub mod image_io;
pub mod layers;
pub mod lsb;
pub mod metrics;
pub mod models;
pub mod optim;
pub mod param;
pub mod scalar;
pub mod steganalysis;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Production tensor type.
pub type Tensor32 = tensor::Tensor<f32>;
/// Gradient-check tensor type.
pub type Tensor64 = tensor::Tensor<f64>;
