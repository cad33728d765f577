//! Signal mixing at a prescribed signal-to-interference ratio, and the fast
//! convolution used to render acoustic paths.

use rustfft::{num_complex::Complex, FftPlanner};

use crate::audio::Waveform;
use crate::error::{Error, Result};

/// Full linear convolution (output length `a.len() + b.len() - 1`) via FFT.
///
/// Structural zeros are preserved exactly: samples before the first (and
/// after the last) nonzero product of the two supports are written as 0.0
/// rather than FFT round-off, so nonzero-support power measurements see the
/// true onset.
pub fn fft_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    let (Some(a0), Some(b0)) = (first_nonzero(a), first_nonzero(b)) else {
        return vec![0.0; out_len];
    };
    let a1 = last_nonzero(a).unwrap();
    let b1 = last_nonzero(b).unwrap();
    let (sa, sb) = (&a[a0..=a1], &b[b0..=b1]);

    let support_len = sa.len() + sb.len() - 1;
    let n = support_len.next_power_of_two();
    let mut fa = vec![Complex::new(0.0, 0.0); n];
    let mut fb = vec![Complex::new(0.0, 0.0); n];
    for (dst, &s) in fa.iter_mut().zip(sa) {
        dst.re = s;
    }
    for (dst, &s) in fb.iter_mut().zip(sb) {
        dst.re = s;
    }
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    fft.process(&mut fa);
    fft.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    planner.plan_fft_inverse(n).process(&mut fa);

    let mut out = vec![0.0; out_len];
    let offset = a0 + b0;
    let scale = 1.0 / n as f64;
    for i in 0..support_len {
        out[offset + i] = fa[i].re * scale;
    }
    out
}

fn first_nonzero(x: &[f64]) -> Option<usize> {
    x.iter().position(|&v| v != 0.0)
}

fn last_nonzero(x: &[f64]) -> Option<usize> {
    x.iter().rposition(|&v| v != 0.0)
}

/// Scales `echo` so that the target-to-echo power ratio equals `sir_db`, then
/// sums. Powers are mean squares over each signal's nonzero support, so
/// leading silence and padding do not bias the ratio. Returns the mix and the
/// applied echo gain; the resulting SIR equals `sir_db` by construction.
pub fn mix_at_sir(
    target_at_mic: &Waveform,
    echo_at_mic: &Waveform,
    sir_db: f64,
) -> Result<(Waveform, f64)> {
    if target_at_mic.sample_rate != echo_at_mic.sample_rate {
        return Err(Error::Config(format!(
            "sample rate mismatch: {} vs {}",
            target_at_mic.sample_rate, echo_at_mic.sample_rate
        )));
    }
    if target_at_mic.len() != echo_at_mic.len() {
        return Err(Error::LengthMismatch {
            what: "mix_at_sir",
            left: target_at_mic.len(),
            right: echo_at_mic.len(),
        });
    }
    let p_t = target_at_mic.power_nonzero();
    let p_e = echo_at_mic.power_nonzero();
    if p_t == 0.0 {
        return Err(Error::DegenerateSignal("mix_at_sir: silent target".into()));
    }
    if p_e == 0.0 {
        return Err(Error::DegenerateSignal("mix_at_sir: silent echo".into()));
    }
    let g = (p_t / (p_e * 10f64.powf(sir_db / 10.0))).sqrt();
    let samples = target_at_mic
        .samples
        .iter()
        .zip(&echo_at_mic.samples)
        .map(|(t, e)| t + g * e)
        .collect();
    Ok((
        Waveform::new(samples, target_at_mic.sample_rate),
        g,
    ))
}
