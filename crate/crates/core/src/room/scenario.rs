//! Assembly of one scenario example from its constituent signals.

use crate::audio::{text_to_phonemes, Waveform, SAMPLE_RATE};
use crate::error::{Error, Result};

use super::rir::generate_rir_offset;
use super::{default_order, fft_convolve, mix_at_sir, ScenarioExample, ScenarioKind, ScenarioSpec};

/// Renders the acoustic paths prescribed by `spec` and assembles the example.
///
/// - user path: `user_speech` convolved with the user->mic response;
/// - echo path: `playback_src`, shifted by the integer part of the
///   propagation delay (the fractional part is folded into the speaker->mic
///   response's sinc interpolation), convolved with that response;
/// - mixed: user path alone (`NonPlayback`), the SIR-controlled sum
///   (`Playback*`), or the echo path alone (`SelfReferencing`).
///
/// The dry playback becomes `playback_ref`, zero-padded to the mixed length
/// (all zeros for `NonPlayback`). Which inputs must be present follows the
/// kind; for `SelfReferencing` the caller supplies a rendering of the keyword
/// as the playback source and `y_utt` must be 0.
pub fn synthesize_example(
    spec: &ScenarioSpec,
    user_speech: Option<&Waveform>,
    playback_src: Option<&Waveform>,
    keyword: &str,
    y_utt: u8,
    y_phon: &[u8],
) -> Result<ScenarioExample> {
    check_presence(spec.kind, user_speech, playback_src)?;
    if spec.kind == ScenarioKind::SelfReferencing && y_utt != 0 {
        return Err(Error::Config(
            "self_referencing examples must carry y_utt = 0".into(),
        ));
    }
    let kw_ids = text_to_phonemes(keyword)?;
    if kw_ids.len() != y_phon.len() {
        return Err(Error::LengthMismatch {
            what: "y_phon vs keyword phonemes",
            left: y_phon.len(),
            right: kw_ids.len(),
        });
    }
    for w in [user_speech, playback_src].into_iter().flatten() {
        if w.sample_rate != SAMPLE_RATE {
            return Err(Error::Config(format!(
                "sample_rate={} unsupported, operating rate is {SAMPLE_RATE}",
                w.sample_rate
            )));
        }
        if w.is_silent() {
            return Err(Error::DegenerateSignal(
                "synthesize_example: silent source signal".into(),
            ));
        }
    }

    let order = default_order(&spec.room);
    let fs = SAMPLE_RATE as f64;

    let user_path = user_speech
        .map(|u| -> Result<Waveform> {
            let rir = super::generate_rir(&spec.room, spec.user_pos, spec.mic_pos, order)?;
            Ok(Waveform::new(
                fft_convolve(&u.samples, &rir.taps),
                SAMPLE_RATE,
            ))
        })
        .transpose()?;

    let echo_path = playback_src
        .map(|p| -> Result<Waveform> {
            let delay_samples = spec.propagation_delay * fs;
            let whole = delay_samples.floor();
            let frac = delay_samples - whole;
            let rir = generate_rir_offset(
                &spec.room,
                spec.speaker_pos,
                spec.mic_pos,
                order,
                frac,
            )?;
            let mut shifted = vec![0.0; whole as usize];
            shifted.extend_from_slice(&p.samples);
            Ok(Waveform::new(
                fft_convolve(&shifted, &rir.taps),
                SAMPLE_RATE,
            ))
        })
        .transpose()?;

    let mixed = match spec.kind {
        ScenarioKind::NonPlayback => user_path.unwrap(),
        ScenarioKind::SelfReferencing => echo_path.unwrap(),
        ScenarioKind::PlaybackMusic | ScenarioKind::PlaybackSpeech => {
            let sir = spec.sir_db.ok_or_else(|| {
                Error::Config("playback scenario without sir_db".into())
            })?;
            let (mut u, mut e) = (user_path.unwrap(), echo_path.unwrap());
            let len = u.len().max(e.len());
            u.samples.resize(len, 0.0);
            e.samples.resize(len, 0.0);
            mix_at_sir(&u, &e, sir)?.0
        }
    };

    let mut playback_ref = match playback_src {
        Some(p) => p.clone(),
        None => Waveform::silence(0, SAMPLE_RATE),
    };
    playback_ref.samples.resize(mixed.len(), 0.0);

    Ok(ScenarioExample {
        mixed,
        playback_ref,
        keyword: keyword.to_string(),
        y_utt,
        y_phon: y_phon.to_vec(),
        spec: spec.clone(),
    })
}

fn check_presence(
    kind: ScenarioKind,
    user: Option<&Waveform>,
    playback: Option<&Waveform>,
) -> Result<()> {
    let fail = |what: &str| Err(Error::Config(format!("{kind}: {what}")));
    match kind {
        ScenarioKind::NonPlayback => {
            if user.is_none() {
                return fail("user_speech is required");
            }
            if playback.is_some() {
                return fail("playback_src must be absent");
            }
        }
        ScenarioKind::SelfReferencing => {
            if user.is_some() {
                return fail("user_speech must be absent");
            }
            if playback.is_none() {
                return fail("playback_src is required");
            }
        }
        ScenarioKind::PlaybackMusic | ScenarioKind::PlaybackSpeech => {
            if user.is_none() || playback.is_none() {
                return fail("both user_speech and playback_src are required");
            }
        }
    }
    Ok(())
}
