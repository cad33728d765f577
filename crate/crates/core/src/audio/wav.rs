//! WAV file I/O: RIFF PCM, 16-bit little-endian, mono.
//!
//! Reading scales integer codes to [-1, 1) by dividing by 32768; writing
//! quantizes by rounding `sample * 32768` and clamping to the i16 range, so a
//! round trip moves every sample by at most 1/32768.

use std::path::Path;

use crate::error::{Error, Result};

use super::Waveform;

/// Reads a PCM 16-bit mono WAV file. The sample rate is taken from the
/// header; amplitude codes are scaled by 1/32768.
///
/// Errors name the offending header field when the payload is not PCM,
/// not mono, or not 16-bit.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let reader = hound::WavReader::open(path.as_ref()).map_err(map_open_err)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::WavFormat {
            field: "channels",
            value: spec.channels.to_string(),
            expected: "1",
        });
    }
    if spec.sample_format != hound::SampleFormat::Int {
        return Err(Error::WavFormat {
            field: "sample_format",
            value: "float".to_string(),
            expected: "pcm int",
        });
    }
    if spec.bits_per_sample != 16 {
        return Err(Error::WavFormat {
            field: "bits_per_sample",
            value: spec.bits_per_sample.to_string(),
            expected: "16",
        });
    }
    let sample_rate = spec.sample_rate;
    let samples: std::result::Result<Vec<i16>, _> = reader.into_samples::<i16>().collect();
    let samples = samples.map_err(map_open_err)?;
    Ok(Waveform::new(
        samples.iter().map(|&s| s as f64 / 32768.0).collect(),
        sample_rate,
    ))
}

/// Writes a waveform as PCM 16-bit mono. Amplitudes are clamped to the
/// representable range before quantization, so out-of-range input is stored
/// as the nearest extreme code rather than wrapping.
pub fn write_wav(path: impl AsRef<Path>, w: &Waveform) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: w.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path.as_ref(), spec).map_err(map_open_err)?;
    for &s in &w.samples {
        let code = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(code).map_err(map_open_err)?;
    }
    writer.finalize().map_err(map_open_err)?;
    Ok(())
}

fn map_open_err(e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::Io(io),
        other => Error::WavFormat {
            field: "riff",
            value: other.to_string(),
            expected: "pcm wav",
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::SAMPLE_RATE;

    fn tone(freq: f64, amp: f64, n: usize) -> Waveform {
        let samples = (0..n)
            .map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / 16000.0).sin())
            .collect();
        Waveform::new(samples, SAMPLE_RATE)
    }

    #[test]
    fn header_echo() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.wav");
        let w = tone(440.0, 0.5, 16000);
        write_wav(&path, &w).unwrap();
        let r = read_wav(&path).unwrap();
        assert_eq!(r.len(), 16000);
        assert_eq!(r.sample_rate, 16000);
    }

    #[test]
    fn max_code_scaling() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.wav");
        // 32767/32768 quantizes to code 32767 and must read back exactly.
        let w = Waveform::new(vec![32767.0 / 32768.0], SAMPLE_RATE);
        write_wav(&path, &w).unwrap();
        let r = read_wav(&path).unwrap();
        assert_eq!(r.samples[0], 32767.0 / 32768.0);
    }

    #[test]
    fn stereo_rejected_naming_field() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stereo.wav");
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 16000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut writer = hound::WavWriter::create(&path, spec).unwrap();
        for _ in 0..32 {
            writer.write_sample(0i16).unwrap();
            writer.write_sample(0i16).unwrap();
        }
        writer.finalize().unwrap();
        let err = read_wav(&path).unwrap_err();
        assert!(err.to_string().contains("channels=2"), "got: {err}");
    }

    #[test]
    fn round_trip_error_bound() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.wav");
        let w = tone(440.0, 0.9, 4000);
        write_wav(&path, &w).unwrap();
        let r = read_wav(&path).unwrap();
        let max_err = w
            .samples
            .iter()
            .zip(&r.samples)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(max_err <= 1.0 / 32768.0, "max_err={max_err}");
    }

    #[test]
    fn empty_waveform_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.wav");
        write_wav(&path, &Waveform::silence(0, SAMPLE_RATE)).unwrap();
        let r = read_wav(&path).unwrap();
        assert!(r.is_empty());
        assert_eq!(r.sample_rate, 16000);
    }

    #[test]
    fn out_of_range_clamps_to_max_code() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("clip.wav");
        let w = Waveform::new(vec![1.5, -1.5], SAMPLE_RATE);
        write_wav(&path, &w).unwrap();
        let r = read_wav(&path).unwrap();
        assert_eq!(r.samples[0], 32767.0 / 32768.0);
        assert_eq!(r.samples[1], -1.0);
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = read_wav("/nonexistent/nope.wav").unwrap_err();
        assert!(err.is_io());
    }
}
