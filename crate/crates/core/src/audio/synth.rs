//! Synthetic phoneme-keyword corpus.
//!
//! Each of the 20 toy phonemes is a fixed two-formant pattern: an impulse
//! train driven through two parallel resonators at (F1, F2), plus low-level
//! noise. The formant table lives in `assets/phonemes.tsv` (committed, so
//! alignments and spectra are reproducible) and the table order deliberately
//! alternates low and high spectral weight, keeping neighbouring ids far
//! apart in centroid. Keyword text maps to phonemes one grapheme at a time:
//! 'a'..'t' are ids 0..19.

use std::sync::OnceLock;

use rand_core::RngCore;

use crate::error::{Error, Result};
use crate::rng;

use super::{Waveform, SAMPLE_RATE};

/// Number of phonemes in the toy inventory.
pub const INVENTORY_SIZE: usize = 20;

/// Nominal phoneme duration before jitter, in samples (80 ms at 16 kHz).
const NOMINAL_DUR: usize = 1280;
/// Nominal glottal pitch in Hz before jitter.
const NOMINAL_F0: f64 = 140.0;
/// Rendered peak amplitude per phoneme segment.
const PEAK: f64 = 0.25;

/// One toy phoneme: a two-formant pattern.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phoneme {
    pub id: usize,
    pub symbol: char,
    pub f1_hz: f64,
    pub f2_hz: f64,
}

/// A rendered keyword with exact per-phoneme sample spans.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyKeyword {
    pub text: String,
    pub phoneme_ids: Vec<usize>,
    /// Half-open (start, end) sample spans, contiguous and ordered.
    pub alignment: Vec<(usize, usize)>,
}

static INVENTORY: OnceLock<Vec<Phoneme>> = OnceLock::new();

/// The committed 20-phoneme formant table.
pub fn phoneme_inventory() -> &'static [Phoneme] {
    INVENTORY.get_or_init(|| {
        let tsv = include_str!("../../assets/phonemes.tsv");
        let rows: Vec<Phoneme> = tsv
            .lines()
            .skip(1)
            .filter(|l| !l.trim().is_empty())
            .map(|line| {
                let mut cols = line.split('\t');
                let id: usize = cols.next().unwrap().parse().unwrap();
                let symbol = cols.next().unwrap().chars().next().unwrap();
                let f1_hz: f64 = cols.next().unwrap().parse().unwrap();
                let f2_hz: f64 = cols.next().unwrap().parse().unwrap();
                Phoneme {
                    id,
                    symbol,
                    f1_hz,
                    f2_hz,
                }
            })
            .collect();
        assert_eq!(rows.len(), INVENTORY_SIZE, "phonemes.tsv row count");
        for (i, p) in rows.iter().enumerate() {
            assert_eq!(p.id, i, "phonemes.tsv ids must be dense and ordered");
        }
        rows
    })
}

/// Grapheme-to-phoneme lookup: each character 'a'..'t' is one phoneme id.
/// Empty text yields an empty sequence; other characters are rejected.
pub fn text_to_phonemes(text: &str) -> Result<Vec<usize>> {
    text.chars()
        .map(|c| match c {
            'a'..='t' => Ok(c as usize - 'a' as usize),
            _ => Err(Error::Config(format!(
                "keyword character {c:?} outside lexicon 'a'..'t'"
            ))),
        })
        .collect()
}

/// Renders a phoneme sequence as one contiguous waveform at 16 kHz.
///
/// `speaker_jitter` perturbs pitch by up to ±10% and duration by up to ±15%,
/// deterministically per (seed, phoneme position); seed 0 means no jitter
/// (nominal 80 ms, 140 Hz), which makes duration arithmetic exact in tests.
/// Alignment spans are recorded exactly; segments are contiguous.
pub fn synth_keyword(phoneme_ids: &[usize], speaker_jitter: u64) -> Result<(Waveform, ToyKeyword)> {
    if phoneme_ids.is_empty() || phoneme_ids.len() > 6 {
        return Err(Error::Config(format!(
            "keyword length {} outside 1..=6 phonemes",
            phoneme_ids.len()
        )));
    }
    let inventory = phoneme_inventory();
    for &id in phoneme_ids {
        if id >= INVENTORY_SIZE {
            return Err(Error::Config(format!(
                "phoneme id {id} outside inventory 0..{INVENTORY_SIZE}"
            )));
        }
    }

    let mut samples = Vec::new();
    let mut alignment = Vec::with_capacity(phoneme_ids.len());
    for (pos, &id) in phoneme_ids.iter().enumerate() {
        let mut jrng = rng::chacha(rng::mix64(speaker_jitter, pos as u64));
        let (pitch_mult, dur_mult) = if speaker_jitter == 0 {
            // Draw and discard so the noise stream below stays aligned
            // between jittered and unjittered renderings.
            let _ = rng::unit_f64(&mut jrng);
            let _ = rng::unit_f64(&mut jrng);
            (1.0, 1.0)
        } else {
            (
                rng::uniform(&mut jrng, 0.9, 1.1),
                rng::uniform(&mut jrng, 0.85, 1.15),
            )
        };
        let dur = (NOMINAL_DUR as f64 * dur_mult).round() as usize;
        let seg = render_phoneme(&inventory[id], NOMINAL_F0 * pitch_mult, dur, &mut jrng);
        let start = samples.len();
        samples.extend_from_slice(&seg);
        alignment.push((start, start + dur));
    }

    let text: String = phoneme_ids.iter().map(|&id| inventory[id].symbol).collect();
    Ok((
        Waveform::new(samples, SAMPLE_RATE),
        ToyKeyword {
            text,
            phoneme_ids: phoneme_ids.to_vec(),
            alignment,
        },
    ))
}

/// One phoneme segment: impulse train through two parallel resonators,
/// normalized to [`PEAK`], plus noise 40 dB down, with 5 ms fades.
fn render_phoneme(p: &Phoneme, f0: f64, dur: usize, noise_rng: &mut impl RngCore) -> Vec<f64> {
    let fs = SAMPLE_RATE as f64;
    let period = (fs / f0).round() as usize;

    let mut excitation = vec![0.0; dur];
    let mut n = 0;
    while n < dur {
        excitation[n] = 1.0;
        n += period;
    }

    let mut seg = resonate(&excitation, p.f1_hz, 80.0);
    let second = resonate(&excitation, p.f2_hz, 120.0);
    for (s, x) in seg.iter_mut().zip(&second) {
        *s += 0.7 * x;
    }

    let peak = seg.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let scale = PEAK / peak;
    for s in seg.iter_mut() {
        *s *= scale;
    }
    for s in seg.iter_mut() {
        *s += PEAK * 0.01 * (2.0 * rng::unit_f64(noise_rng) - 1.0);
    }

    let fade = (0.005 * fs) as usize;
    if dur >= 2 * fade {
        for i in 0..fade {
            let g = 0.5 - 0.5 * (std::f64::consts::PI * i as f64 / fade as f64).cos();
            seg[i] *= g;
            seg[dur - 1 - i] *= g;
        }
    }
    seg
}

/// Two-pole resonator at centre frequency `f` with bandwidth `bw` (Hz).
fn resonate(x: &[f64], f: f64, bw: f64) -> Vec<f64> {
    let fs = SAMPLE_RATE as f64;
    let r = (-std::f64::consts::PI * bw / fs).exp();
    let a1 = 2.0 * r * (2.0 * std::f64::consts::PI * f / fs).cos();
    let a2 = -r * r;
    let mut y = vec![0.0; x.len()];
    let (mut y1, mut y2) = (0.0, 0.0);
    for (n, &xn) in x.iter().enumerate() {
        let yn = xn + a1 * y1 + a2 * y2;
        y[n] = yn;
        y2 = y1;
        y1 = yn;
    }
    y
}

/// Deterministic toy "music": a four-slot arpeggio with harmonics, decay and
/// tremolo. Stands in for a playback-music pool when none is configured;
/// duration is drawn from U(0.4, 0.7) s.
pub fn synth_music(seed: u64) -> Waveform {
    let fs = SAMPLE_RATE as f64;
    let mut rng = rng::chacha(seed);
    let dur_s = rng::uniform(&mut rng, 0.4, 0.7);
    let n = (dur_s * fs).round() as usize;
    let slot = n / 4;
    let root = 220.0 * 2f64.powf(rng::below(&mut rng, 12) as f64 / 12.0);
    let intervals = [0, 3, 7, 12];

    let mut samples = vec![0.0; n];
    for (k, s) in samples.iter_mut().enumerate() {
        let idx = (k / slot.max(1)).min(3);
        let f = root * 2f64.powf(intervals[idx] as f64 / 12.0);
        let t_in_slot = (k - idx * slot) as f64 / fs;
        let decay = (-6.0 * t_in_slot).exp();
        let t = k as f64 / fs;
        let tremolo = 1.0 + 0.3 * (2.0 * std::f64::consts::PI * 5.5 * t).sin();
        let mut v = 0.0;
        for (h, amp) in [(1.0, 1.0), (2.0, 0.5), (3.0, 0.25)] {
            v += amp * (2.0 * std::f64::consts::PI * f * h * t).sin();
        }
        *s = v * decay * tremolo;
    }
    let peak = samples.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if peak > 0.0 {
        let scale = PEAK / peak;
        for s in samples.iter_mut() {
            *s *= scale;
        }
    }
    Waveform::new(samples, SAMPLE_RATE)
}
