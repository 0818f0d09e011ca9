//! Audio decoding and acoustic features.

pub mod mfcc;
pub mod spectrogram;
pub mod wav;

pub use mfcc::{compute_mfcc, FeatureMatrix, MfccConfig, MfccExtractor};
pub use spectrogram::{
    compute_spectrogram, fit_length, fit_length_to, FixedSpectrogram, Spectrogram, FIXED_WIDTH,
    NUM_BINS,
};
pub use wav::{read_wav, write_wav, Waveform};
