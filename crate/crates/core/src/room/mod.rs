//! Room acoustics and barge-in scenario synthesis.
//!
//! A shoebox room, a user, a loudspeaker and a microphone. The image-source
//! method renders the two acoustic paths (user -> mic, speaker -> mic) and
//! four scenario kinds are assembled from them:
//!
//! - `NonPlayback`: reverberant user speech only.
//! - `PlaybackMusic` / `PlaybackSpeech`: user speech mixed with the device's
//!   delayed, reverberant playback at a controlled signal-to-interference
//!   ratio.
//! - `SelfReferencing`: the device hears only its own playback of the
//!   keyword; every ground-truth label is 0.
//!
//! Examples carry the mixed capture and the dry playback reference. Clean
//! user speech is deliberately not a field anywhere in this module or in the
//! manifest schema: downstream consumers cannot depend on it.

mod dataset;
mod mix;
mod rir;
mod sample;
mod scenario;

pub use dataset::{
    build_dataset, load_manifest, synth_manifest_example, DatasetConfig, KindCounts, ManifestEntry,
};
pub use mix::{fft_convolve, mix_at_sir};
pub use rir::{
    default_order, generate_rir, generate_rir_with_absorption,
    sabine_absorption, schroeder_rt60, Rir,
};
pub use sample::sample_scenario;
pub use scenario::synthesize_example;

use serde::{Deserialize, Serialize};

use crate::audio::Waveform;

/// Speed of sound used throughout, m/s.
pub const SPEED_OF_SOUND: f64 = 343.0;

/// The four barge-in scenario kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    NonPlayback,
    PlaybackMusic,
    PlaybackSpeech,
    SelfReferencing,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 4] = [
        ScenarioKind::NonPlayback,
        ScenarioKind::PlaybackMusic,
        ScenarioKind::PlaybackSpeech,
        ScenarioKind::SelfReferencing,
    ];

    /// True for the two kinds where user speech and playback coexist and a
    /// signal-to-interference ratio is defined.
    pub fn is_playback(self) -> bool {
        matches!(
            self,
            ScenarioKind::PlaybackMusic | ScenarioKind::PlaybackSpeech
        )
    }

    /// Manifest string form (also the serde representation).
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::NonPlayback => "non_playback",
            ScenarioKind::PlaybackMusic => "playback_music",
            ScenarioKind::PlaybackSpeech => "playback_speech",
            ScenarioKind::SelfReferencing => "self_referencing",
        }
    }
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A shoebox room. Floor area is length * width by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoomSpec {
    pub length: f64,
    pub width: f64,
    pub height: f64,
    /// Target reverberation time in seconds.
    pub rt60: f64,
    pub speed_of_sound: f64,
}

impl RoomSpec {
    pub fn new(length: f64, width: f64, height: f64, rt60: f64) -> Self {
        assert!(
            length > 0.0 && width > 0.0 && height > 0.0 && rt60 > 0.0,
            "room dimensions and rt60 must be positive"
        );
        RoomSpec {
            length,
            width,
            height,
            rt60,
            speed_of_sound: SPEED_OF_SOUND,
        }
    }

    /// Room from floor area and length/width aspect ratio.
    pub fn from_floor(area: f64, aspect: f64, height: f64, rt60: f64) -> Self {
        RoomSpec::new((area * aspect).sqrt(), (area / aspect).sqrt(), height, rt60)
    }

    pub fn floor_area(&self) -> f64 {
        self.length * self.width
    }

    pub fn volume(&self) -> f64 {
        self.length * self.width * self.height
    }

    /// Total interior surface area of the six walls.
    pub fn surface_area(&self) -> f64 {
        2.0 * (self.length * self.width
            + self.length * self.height
            + self.width * self.height)
    }

    pub fn dims(&self) -> [f64; 3] {
        [self.length, self.width, self.height]
    }

    /// True when `p` lies strictly inside with at least `margin` to every wall.
    pub fn contains_with_margin(&self, p: [f64; 3], margin: f64) -> bool {
        p.iter()
            .zip(self.dims())
            .all(|(&x, d)| x >= margin && x <= d - margin)
    }
}

/// One sampled barge-in configuration: room, geometry, playback delay, and
/// (for playback kinds) the target signal-to-interference ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub room: RoomSpec,
    pub user_pos: [f64; 3],
    pub speaker_pos: [f64; 3],
    pub mic_pos: [f64; 3],
    /// Loopback latency between the dry playback reference and its acoustic
    /// emission, in seconds.
    pub propagation_delay: f64,
    /// Absent for kinds without simultaneous user speech and playback.
    pub sir_db: Option<f64>,
    pub seed: u64,
}

/// One synthesized example: what the microphone heard, what the device was
/// playing, and the labels. There is no clean-user-speech field.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioExample {
    /// Microphone capture.
    pub mixed: Waveform,
    /// Dry device audio-out, zero-padded to the mixed length
    /// (all zeros for `NonPlayback`).
    pub playback_ref: Waveform,
    pub keyword: String,
    /// Utterance label; always 0 for `SelfReferencing`.
    pub y_utt: u8,
    /// Per-phoneme labels for the keyword's phoneme sequence.
    pub y_phon: Vec<u8>,
    pub spec: ScenarioSpec,
}
