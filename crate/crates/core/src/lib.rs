//! Semi-fragile, content-dependent image watermarking.
//!
//! The sender partitions a grayscale image into keyed 8x8 and 4x4 blocks,
//! derives a two-part watermark from block averages, and hides three copies
//! of every bit in the lifting-wavelet coefficients of 4x4 carrier blocks.
//! The receiver regenerates the watermark from what it received, compares it
//! with what it extracts, and turns the disagreement into error maps,
//! energy features, and a four-way verdict (clean, recompressed, tampered,
//! tampered and recompressed).

pub mod attack;
pub mod auth;
pub mod error;
pub mod features;
pub mod image;
pub mod key;
pub mod lwt;
pub mod partition;
pub mod qim;
pub mod svm;
pub mod watermark;

pub use crate::auth::{authenticate, Authentication, ErrorMapSet};
pub use crate::error::{Error, Result};
pub use crate::features::{feature_vector, FeatureVector};
pub use crate::image::{read_image, write_image, GrayImage};
pub use crate::key::SecretKey;
pub use crate::qim::QuantizerConfig;
pub use crate::svm::{ClassLabel, ClassifierModel};
pub use crate::watermark::{embed, extract, Extraction};
