//! Waveforms, WAV I/O, log-mel features, and the synthetic keyword corpus.
//!
//! Everything downstream runs at a single fixed rate ([`SAMPLE_RATE`] =
//! 16 kHz); other rates are rejected rather than resampled.

mod mel;
mod synth;
mod wav;

pub use mel::{log_mel, FeatureMatrix, EPS_FEAT};
pub use synth::{
    phoneme_inventory, synth_keyword, synth_music, text_to_phonemes, Phoneme, ToyKeyword,
    INVENTORY_SIZE,
};
pub use wav::{read_wav, write_wav};

/// Fixed operating sample rate in Hz for all DSP paths.
pub const SAMPLE_RATE: u32 = 16_000;

/// Mono sampled audio. Amplitudes are dimensionless with nominal range
/// [-1, 1]; `sample_rate` is in Hz and must be positive.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        assert!(sample_rate > 0, "sample_rate must be positive");
        Waveform {
            samples,
            sample_rate,
        }
    }

    /// All-zero waveform of `len` samples.
    pub fn silence(len: usize, sample_rate: u32) -> Self {
        Waveform::new(vec![0.0; len], sample_rate)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Mean squared amplitude over the whole span; 0 for empty input.
    pub fn power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64
    }

    /// Mean squared amplitude over nonzero samples only. Zero-padding and
    /// structural silence (exact zeros) do not dilute the estimate; returns
    /// 0 when every sample is zero.
    pub fn power_nonzero(&self) -> f64 {
        let mut sum = 0.0;
        let mut n = 0usize;
        for &s in &self.samples {
            if s != 0.0 {
                sum += s * s;
                n += 1;
            }
        }
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }

    /// True when every sample is exactly zero (or the waveform is empty).
    pub fn is_silent(&self) -> bool {
        self.samples.iter().all(|&s| s == 0.0)
    }
}
