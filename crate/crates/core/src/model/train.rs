//! Mini-batch training against a dataset manifest.
//!
//! The loop only ever reads the mixed and playback WAVs plus the labels —
//! the manifest schema carries no clean-speech path, so a reconstruction
//! loss against clean speech is not even expressible here.

use std::fs;
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::audio::{read_wav, FeatureMatrix};
use crate::autodiff::ops::{add, scale};
use crate::autodiff::{Adam, Tensor};
use crate::error::{Error, Result};
use crate::rng::{self, chacha};
use crate::room::ManifestEntry;

use super::config::ModelConfig;
use super::net::{
    audio_encode_features, encoder_features, forward_from_embeddings, loss, EmbeddingRole,
};
use super::params::ModelParams;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    /// Fraction of the manifest held out for validation (0 disables the
    /// held-out split; the final model is then the "best" one).
    pub val_fraction: f64,
    /// Steps between validation passes; 0 means once per epoch
    /// (ceil(train examples / batch size) steps).
    pub val_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 1000,
            batch_size: 16,
            lr: 1e-3,
            seed: 0,
            val_fraction: 0.2,
            val_every: 0,
        }
    }
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub steps_run: usize,
    pub initial_train_loss: f64,
    pub final_train_loss: f64,
    pub best_val_loss: f64,
    pub best_step: usize,
    pub checkpoint_path: PathBuf,
    pub log_path: PathBuf,
}

#[derive(Serialize)]
struct LogLine {
    step: usize,
    loss: f64,
    lr: f64,
}

#[derive(Serialize)]
struct ValLine {
    step: usize,
    loss: f64,
}

/// One example, frontend-processed once and reused every epoch.
struct Example {
    mixed: FeatureMatrix,
    playback: FeatureMatrix,
    phoneme_ids: Vec<usize>,
    y_utt: f64,
    y_phon: Vec<f64>,
}

fn load_examples(
    manifest_dir: &Path,
    entries: &[ManifestEntry],
    params: &ModelParams,
) -> Result<Vec<Example>> {
    entries
        .iter()
        .map(|e| {
            if e.phoneme_ids.is_empty() {
                return Err(Error::Config(format!(
                    "example {} carries no phoneme ids; nothing to score",
                    e.id
                )));
            }
            let mixed = read_wav(manifest_dir.join(&e.mixed_path))?;
            let playback = read_wav(manifest_dir.join(&e.playback_path))?;
            Ok(Example {
                mixed: encoder_features(&mixed, params)?,
                playback: encoder_features(&playback, params)?,
                phoneme_ids: e.phoneme_ids.clone(),
                y_utt: f64::from(e.y_utt),
                y_phon: e.y_phon.iter().map(|&b| f64::from(b)).collect(),
            })
        })
        .collect()
}

fn example_loss(ex: &Example, params: &ModelParams) -> Result<Tensor> {
    let em = audio_encode_features(&ex.mixed, params, EmbeddingRole::Mixed)?;
    let ep = audio_encode_features(&ex.playback, params, EmbeddingRole::Playback)?;
    let out = forward_from_embeddings(&em, &ep, &ex.phoneme_ids, params)?;
    loss(&out, ex.y_utt, &ex.y_phon, params.config.phoneme_loss_weight)
}

fn mean_loss(examples: &[&Example], params: &ModelParams) -> Result<Tensor> {
    let mut acc: Option<Tensor> = None;
    for ex in examples {
        let l = example_loss(ex, params)?;
        acc = Some(match acc {
            Some(a) => add(&a, &l)?,
            None => l,
        });
    }
    Ok(scale(
        &acc.expect("mean_loss on non-empty batch"),
        1.0 / examples.len() as f64,
    ))
}

/// Trains a fresh model on `entries` (paths relative to `manifest_dir`) and
/// writes into `out_dir`: `log.jsonl` with one {step, loss, lr} line per
/// step, `val.jsonl` with one {step, loss} line per validation pass, and
/// `best.json`, the checkpoint with the lowest validation loss.
///
/// Batches draw half positives, half negatives, with replacement, from the
/// training split. Everything is a pure function of (data, configs, seed):
/// two runs produce byte-identical logs and checkpoints.
pub fn train(
    manifest_dir: &Path,
    entries: &[ManifestEntry],
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    out_dir: &Path,
) -> Result<TrainOutcome> {
    if entries.is_empty() {
        return Err(Error::Config("training manifest is empty".into()));
    }
    if cfg.steps == 0 {
        return Err(Error::Config("steps must be >= 1".into()));
    }
    if cfg.batch_size < 2 || cfg.batch_size % 2 != 0 {
        return Err(Error::Config(format!(
            "batch_size {} must be even and >= 2 (half positives, half negatives)",
            cfg.batch_size
        )));
    }
    if !(cfg.lr.is_finite() && cfg.lr > 0.0) {
        return Err(Error::Config(format!("lr {} must be positive", cfg.lr)));
    }
    if !(0.0..1.0).contains(&cfg.val_fraction) {
        return Err(Error::Config(format!(
            "val_fraction {} must be in [0, 1)",
            cfg.val_fraction
        )));
    }

    let params = ModelParams::init(model_cfg, rng::mix64(cfg.seed, 1))?;
    let examples = load_examples(manifest_dir, entries, &params)?;

    // Deterministic shuffle, then split off the validation head.
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut rng_split = chacha(rng::mix64(cfg.seed, 0));
    for i in (1..order.len()).rev() {
        order.swap(i, rng::below(&mut rng_split, i + 1));
    }
    let mut val_n = (cfg.val_fraction * examples.len() as f64).round() as usize;
    if cfg.val_fraction > 0.0 {
        val_n = val_n.clamp(1, examples.len() - 1);
    }
    let (val_idx, train_idx) = order.split_at(val_n);

    let positives: Vec<usize> = train_idx
        .iter()
        .copied()
        .filter(|&i| examples[i].y_utt == 1.0)
        .collect();
    let negatives: Vec<usize> = train_idx
        .iter()
        .copied()
        .filter(|&i| examples[i].y_utt == 0.0)
        .collect();
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::Config(format!(
            "training split needs both classes, got {} positive / {} negative",
            positives.len(),
            negatives.len()
        )));
    }

    let epoch_steps = train_idx.len().div_ceil(cfg.batch_size).max(1);
    let val_every = if cfg.val_every == 0 {
        epoch_steps
    } else {
        cfg.val_every
    };

    fs::create_dir_all(out_dir)?;
    let log_path = out_dir.join("log.jsonl");
    let val_path = out_dir.join("val.jsonl");
    let checkpoint_path = out_dir.join("best.json");
    let mut log = BufWriter::new(fs::File::create(&log_path)?);
    let mut val_log = BufWriter::new(fs::File::create(&val_path)?);

    let mut opt = Adam::new(cfg.lr);
    let mut best_val_loss = f64::INFINITY;
    let mut best_step = 0;
    let mut initial_train_loss = f64::NAN;
    let mut final_train_loss = f64::NAN;

    for step in 0..cfg.steps {
        let mut rng_b = chacha(rng::mix64(cfg.seed, 2 + step as u64));
        let half = cfg.batch_size / 2;
        let batch: Vec<&Example> = (0..cfg.batch_size)
            .map(|i| {
                let pool = if i < half { &positives } else { &negatives };
                &examples[pool[rng::below(&mut rng_b, pool.len())]]
            })
            .collect();

        let loss_t = mean_loss(&batch, &params)?;
        let loss_v = loss_t.value();
        if !loss_v.is_finite() {
            return Err(Error::NonFinite(format!(
                "training loss became non-finite at step {step}"
            )));
        }
        if step == 0 {
            initial_train_loss = loss_v;
        }
        final_train_loss = loss_v;
        serde_json::to_writer(
            &mut log,
            &LogLine {
                step,
                loss: loss_v,
                lr: cfg.lr,
            },
        )?;
        log.write_all(b"\n")?;

        loss_t.backward();
        opt.step(params.named())?;

        let last = step + 1 == cfg.steps;
        if (step + 1) % val_every == 0 || last {
            let val_loss = if val_idx.is_empty() {
                loss_v
            } else {
                let vs: Vec<&Example> = val_idx.iter().map(|&i| &examples[i]).collect();
                let v = mean_loss(&vs, &params)?.value();
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "validation loss became non-finite at step {step}"
                    )));
                }
                v
            };
            serde_json::to_writer(
                &mut val_log,
                &ValLine {
                    step,
                    loss: val_loss,
                },
            )?;
            val_log.write_all(b"\n")?;
            if val_loss < best_val_loss {
                best_val_loss = val_loss;
                best_step = step;
                params.save(&checkpoint_path)?;
            }
        }
    }
    log.flush()?;
    val_log.flush()?;

    Ok(TrainOutcome {
        steps_run: cfg.steps,
        initial_train_loss,
        final_train_loss,
        best_val_loss,
        best_step,
        checkpoint_path,
        log_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MaskKind, ModelParams};
    use crate::room::{build_dataset, DatasetConfig, KindCounts};

    fn tiny_dataset(dir: &Path, seed: u64) -> Vec<ManifestEntry> {
        let cfg = DatasetConfig {
            seed,
            keywords: vec!["dak".into(), "bem".into()],
            counts: KindCounts {
                non_playback: 4,
                playback_music: 2,
                playback_speech: 2,
                self_referencing: 2,
            },
            music_pool: None,
            speech_pool: None,
        };
        build_dataset(&cfg, dir, 2).unwrap()
    }

    fn tiny_model() -> ModelConfig {
        ModelConfig {
            mask_subnet: MaskKind::C,
            emb_dim: 8,
            conv_channels: 2,
            n_mels: 8,
            gru_hidden: 8,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn short_run_trains_logs_and_checkpoints_deterministically() {
        let data = tempfile::tempdir().unwrap();
        let entries = tiny_dataset(data.path(), 77);
        let tc = TrainConfig {
            steps: 4,
            batch_size: 4,
            val_fraction: 0.25,
            ..TrainConfig::default()
        };
        let run = |out: &Path| train(data.path(), &entries, &tiny_model(), &tc, out).unwrap();

        let out1 = tempfile::tempdir().unwrap();
        let r1 = run(out1.path());
        assert_eq!(r1.steps_run, 4);
        assert!(r1.initial_train_loss.is_finite() && r1.final_train_loss.is_finite());
        assert!(r1.best_val_loss.is_finite());
        let log = fs::read_to_string(&r1.log_path).unwrap();
        assert_eq!(log.lines().count(), 4);
        let first: serde_json::Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
        assert_eq!(first["step"], 0);
        assert_eq!(first["lr"], 1e-3);
        let best = ModelParams::load(&r1.checkpoint_path).unwrap();
        assert_eq!(best.config, tiny_model());

        // Same seed, fresh directory: byte-identical artifacts.
        let out2 = tempfile::tempdir().unwrap();
        let r2 = run(out2.path());
        assert_eq!(
            fs::read(&r1.log_path).unwrap(),
            fs::read(&r2.log_path).unwrap()
        );
        assert_eq!(
            fs::read(&r1.checkpoint_path).unwrap(),
            fs::read(&r2.checkpoint_path).unwrap()
        );
        assert_eq!(r1.best_step, r2.best_step);
    }

    #[test]
    fn empty_manifest_is_a_config_error() {
        let out = tempfile::tempdir().unwrap();
        let err = train(
            Path::new("."),
            &[],
            &tiny_model(),
            &TrainConfig::default(),
            out.path(),
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("empty"), "{err}");
    }

    #[test]
    fn single_class_split_is_rejected() {
        let data = tempfile::tempdir().unwrap();
        let cfg = DatasetConfig {
            seed: 5,
            keywords: vec!["dak".into()],
            counts: KindCounts {
                self_referencing: 6, // all labels zero
                ..KindCounts::default()
            },
            music_pool: None,
            speech_pool: None,
        };
        let entries = build_dataset(&cfg, data.path(), 1).unwrap();
        let out = tempfile::tempdir().unwrap();
        let err = train(
            data.path(),
            &entries,
            &tiny_model(),
            &TrainConfig {
                steps: 1,
                batch_size: 2,
                val_fraction: 0.0,
                ..TrainConfig::default()
            },
            out.path(),
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("both classes"), "{err}");
    }

    #[test]
    fn bad_hyperparameters_are_named() {
        let data = tempfile::tempdir().unwrap();
        let entries = tiny_dataset(data.path(), 78);
        let out = tempfile::tempdir().unwrap();
        for (patch, needle) in [
            (
                TrainConfig {
                    steps: 0,
                    ..TrainConfig::default()
                },
                "steps",
            ),
            (
                TrainConfig {
                    batch_size: 3,
                    ..TrainConfig::default()
                },
                "batch_size",
            ),
            (
                TrainConfig {
                    lr: 0.0,
                    ..TrainConfig::default()
                },
                "lr",
            ),
            (
                TrainConfig {
                    val_fraction: 1.0,
                    ..TrainConfig::default()
                },
                "val_fraction",
            ),
        ] {
            let err = train(data.path(), &entries, &tiny_model(), &patch, out.path())
                .unwrap_err()
                .to_string();
            assert!(err.contains(needle), "{needle}: {err}");
        }
    }
}
