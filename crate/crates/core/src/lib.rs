//! Fourier hologram processing: point-cloud CGH synthesis, numerical
//! reconstruction, display-specific view rendering, compression ladders and
//! the subjective-score statistics used to compare display setups.

pub mod field;
mod fft;
pub mod propagation;
pub mod cgh;
pub mod view;
pub mod codec;
pub mod stats;
