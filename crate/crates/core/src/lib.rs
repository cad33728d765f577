//! Barge-in simulation and echo-aware keyword spotting.
//!
//! A device that talks while it listens hears itself: the loudspeaker signal
//! re-enters the microphone as a delayed, reverberant echo and the keyword
//! spotter triggers on its own prompt. This crate reproduces that problem and
//! two families of fixes at desk scale, end to end:
//!
//! - [`audio`] — waveform and WAV I/O primitives, log-mel features, and a
//!   synthetic phoneme-keyword corpus so experiments need no external data.
//! - [`room`] — image-source room impulse responses and the four barge-in
//!   scenarios (non-playback, playback music/speech, self-referencing),
//!   sampled from fixed distributions into reproducible datasets.
//! - [`aec`] — a classical NLMS echo canceller, the explicit baseline.
//! - [`autodiff`] — a minimal reverse-mode engine with exactly the operators
//!   the model needs, plus Adam and a finite-difference gradient checker.
//! - [`model`] — the five-module keyword spotter (shared audio encoder, text
//!   encoder, refiner mask subnets, attention pattern extractor, GRU
//!   discriminator) whose refiner performs echo cancellation implicitly, in
//!   embedding space, from the mixed signal and the dry playback reference.
//! - [`metrics`] — sample-level EER / AUC / MAE with the self-referencing
//!   protocol (MAE only; the other two are undefined when every label is 0).
//!
//! Everything is deterministic given its seeds: datasets, training runs and
//! checkpoints are byte-reproducible, and any single example can be
//! regenerated in isolation from the seed recorded in the manifest.

pub mod aec;
pub mod audio;
pub mod autodiff;
pub mod error;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod room;

pub use error::{Error, Result};
