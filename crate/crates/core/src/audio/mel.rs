//! Framed log-mel feature extraction.
//!
//! Conventional frontend: Hann window, power spectrum via FFT, triangular
//! HTK-mel filterbank over 0..8000 Hz, natural log of (band energy + floor).
//! The floor [`EPS_FEAT`] keeps silence finite at log(1e-10).

use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{Error, Result};

use super::{Waveform, SAMPLE_RATE};

/// Power floor added to each mel band before the log.
pub const EPS_FEAT: f64 = 1e-10;

/// Time-major feature matrix: `n_frames() x n_mels` entries, row-major.
///
/// Frame count follows the framing identity: for input length N and window /
/// hop sizes in samples, `T_f = 1 + (N - win) / hop` when `N >= win`, else 0.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub data: Vec<f64>,
    pub n_mels: usize,
    /// Analysis window length in seconds.
    pub frame_len: f64,
    /// Hop between adjacent frames in seconds.
    pub frame_hop: f64,
}

impl FeatureMatrix {
    pub fn n_frames(&self) -> usize {
        if self.n_mels == 0 {
            0
        } else {
            self.data.len() / self.n_mels
        }
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.n_mels..(t + 1) * self.n_mels]
    }
}

/// Log-mel spectrogram of a 16 kHz waveform.
///
/// Input shorter than one window yields an empty matrix (not an error).
/// Rates other than 16 kHz are rejected; nothing in this crate resamples.
pub fn log_mel(w: &Waveform, n_mels: usize, win_s: f64, hop_s: f64) -> Result<FeatureMatrix> {
    if w.sample_rate != SAMPLE_RATE {
        return Err(Error::Config(format!(
            "sample_rate={} unsupported, operating rate is {}",
            w.sample_rate, SAMPLE_RATE
        )));
    }
    if !(hop_s > 0.0 && win_s >= hop_s) {
        return Err(Error::Config(format!(
            "invalid framing: win_s={win_s}, hop_s={hop_s} (need win_s >= hop_s > 0)"
        )));
    }
    if n_mels == 0 {
        return Err(Error::Config("n_mels must be positive".into()));
    }

    let fs = SAMPLE_RATE as f64;
    let win = (win_s * fs).round() as usize;
    let hop = (hop_s * fs).round() as usize;
    let n = w.samples.len();
    let n_frames = if n >= win { 1 + (n - win) / hop } else { 0 };

    let mut out = FeatureMatrix {
        data: Vec::with_capacity(n_frames * n_mels),
        n_mels,
        frame_len: win_s,
        frame_hop: hop_s,
    };
    if n_frames == 0 {
        return Ok(out);
    }

    let n_fft = win.next_power_of_two();
    let n_bins = n_fft / 2 + 1;
    let window: Vec<f64> = (0..win)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / win as f64).cos())
        .collect();
    let filters = mel_filterbank(n_mels, n_bins, n_fft, fs);

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n_fft);
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    let mut power = vec![0.0f64; n_bins];

    for t in 0..n_frames {
        let start = t * hop;
        for i in 0..n_fft {
            let s = if i < win {
                w.samples[start + i] * window[i]
            } else {
                0.0
            };
            buf[i] = Complex::new(s, 0.0);
        }
        fft.process(&mut buf);
        for (k, p) in power.iter_mut().enumerate() {
            *p = buf[k].norm_sqr();
        }
        for filter in &filters {
            let energy: f64 = filter.iter().map(|&(k, wgt)| wgt * power[k]).sum();
            out.data.push((energy + EPS_FEAT).ln());
        }
    }
    Ok(out)
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filters as sparse (bin, weight) lists; peaks are 1.
fn mel_filterbank(n_mels: usize, n_bins: usize, n_fft: usize, fs: f64) -> Vec<Vec<(usize, f64)>> {
    let mel_hi = hz_to_mel(fs / 2.0);
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(mel_hi * i as f64 / (n_mels + 1) as f64))
        .collect();
    (0..n_mels)
        .map(|m| {
            let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            let mut taps = Vec::new();
            for k in 0..n_bins {
                let f = k as f64 * fs / n_fft as f64;
                let wgt = if f <= lo || f >= hi {
                    0.0
                } else if f <= mid {
                    (f - lo) / (mid - lo)
                } else {
                    (hi - f) / (hi - mid)
                };
                if wgt > 0.0 {
                    taps.push((k, wgt));
                }
            }
            taps
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, amp: f64, n: usize) -> Waveform {
        let samples = (0..n)
            .map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / 16000.0).sin())
            .collect();
        Waveform::new(samples, SAMPLE_RATE)
    }

    #[test]
    fn frame_count_one_second() {
        // 1 + floor((16000 - 400) / 160) = 98
        let f = log_mel(&tone(440.0, 0.5, 16000), 40, 0.025, 0.010).unwrap();
        assert_eq!(f.n_frames(), 98);
        assert_eq!(f.n_mels, 40);
    }

    #[test]
    fn silence_hits_the_floor() {
        let f = log_mel(&Waveform::silence(1600, SAMPLE_RATE), 40, 0.025, 0.010).unwrap();
        assert!(f.data.iter().all(|&e| e == EPS_FEAT.ln()));
    }

    #[test]
    fn level_shift_is_log_power_ratio() {
        let a = log_mel(&tone(440.0, 0.25, 8000), 40, 0.025, 0.010).unwrap();
        let b = log_mel(&tone(440.0, 0.5, 8000), 40, 0.025, 0.010).unwrap();
        let ln4 = 4.0f64.ln();
        let mut checked = 0;
        for (ea, eb) in a.data.iter().zip(&b.data) {
            // Only bands whose energy dominates the floor obey the pure
            // power-scaling shift; near the floor the constant term bends it.
            if *ea >= (1e6 * EPS_FEAT).ln() {
                assert!(((eb - ea) - ln4).abs() < 1e-6, "shift {}", eb - ea);
                checked += 1;
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn short_input_yields_empty_matrix() {
        let f = log_mel(&tone(440.0, 0.5, 399), 40, 0.025, 0.010).unwrap();
        assert_eq!(f.n_frames(), 0);
        assert!(f.data.is_empty());
    }

    #[test]
    fn wrong_rate_rejected() {
        let w = Waveform::new(vec![0.0; 8000], 8000);
        assert!(log_mel(&w, 40, 0.025, 0.010).is_err());
    }
}
