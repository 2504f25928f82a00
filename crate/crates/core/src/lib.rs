//! Color-preserving style transfer.
//!
//! The style-transfer stage itself is external (see [`styler_hook`]). This
//! crate supplies what goes around it: an affine color map that gives the
//! style image the content's color mean and covariance
//! ([`affine_transfer`]), and a luminance-only path that styles the `Y`
//! channel and reuses the content's `I`/`Q` chroma ([`luminance`]).
//! [`pipeline`] wires both into the three run modes exposed by the
//! `stylecolor` binary.

pub mod affine_transfer;
pub mod cli;
pub mod colorstats;
pub mod error;
pub mod imageio;
pub mod linalg3;
pub mod luminance;
pub mod pipeline;
pub mod styler_hook;

pub use affine_transfer::{AffineColorMap, Regularization, Variant};
pub use colorstats::{ColorStats, ScalarStats};
pub use error::{Error, Result};
pub use imageio::{ImageFormat, ImagePlanarF, ImageU8};
pub use pipeline::{Mode, PipelineConfig, RunReport};
pub use styler_hook::StylerSpec;
