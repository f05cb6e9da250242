//! Sidelobe-free pseudo-noise pulse-compression thermography.
//!
//! The crate covers the whole processing chain of a coded-excitation
//! thermography measurement:
//!
//! * [`codes`]: maximum-length and Legendre sequences, their bias-shifted
//!   variants with a perfect periodic autocorrelation, and Barker/Golay
//!   reference codes for comparison.
//! * [`waveform`]: frame timing, oversampled bipolar and unipolar heat-source
//!   modulation, and the zero-padded matched filter.
//! * [`thermal`]: 1-D semi-infinite (optionally layered) surface impulse
//!   responses and synthetic thermogram stacks.
//! * [`dc`]: the constrained power-law fit of the step-heating trend and its
//!   bias-aware removal.
//! * [`compression`]: cyclic matched filtering, period averaging, decimation
//!   to the bit rate and an SNR figure of merit.
//! * [`stack`]: the `TGS1` thermogram container and CSV/PGM exports.
//! * [`pipeline`]: the configuration-driven end-to-end run with a
//!   reproducibility manifest.

pub mod codes;
pub mod compression;
pub mod dc;
mod dsp;
pub mod nnls;
pub mod pipeline;
pub mod stack;
pub mod thermal;
pub mod waveform;

pub use codes::{CodeError, CodeKind, Pacf, PnCode};
pub use compression::{CompressedTrace, Normalization};
pub use dc::DcFit;
pub use stack::ThermogramStack;
pub use thermal::{PixelModel, SceneConfig};
pub use waveform::{ExcitationWaveform, MatchedFilter, Timing};

/// Version tag of the on-disk stack container.
pub const FORMAT_VERSION: &str = "TGS1";

/// Version tag of the built-in primitive polynomial table.
pub const CODE_TABLE_VERSION: &str = "gf2-primitive-2..16/v1";
