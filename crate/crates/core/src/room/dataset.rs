//! Dataset construction: sampled scenarios rendered to WAV pairs plus a
//! JSONL manifest.
//!
//! Example `i` of a build is derived from `mix64(dataset_seed, i)` and
//! nothing else, so any single example is regenerable in isolation
//! ([`synth_manifest_example`]) and manifests are byte-identical across runs
//! and thread counts.
//!
//! The manifest schema is closed (`deny_unknown_fields`) and carries the
//! mixed capture and dry playback reference only. A clean-user-speech field
//! does not exist and cannot be smuggled in through the manifest; training
//! and evaluation are structurally confined to mixed-signal data.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::audio::{
    read_wav, synth_keyword, synth_music, text_to_phonemes, write_wav, Waveform, INVENTORY_SIZE,
    SAMPLE_RATE,
};
use crate::error::{Error, Result};
use crate::rng;

use super::{sample_scenario, synthesize_example, ScenarioExample, ScenarioKind};

/// Maximum user-speech onset jitter in seconds. Randomizing the utterance
/// start keeps onset timing from separating self-referencing examples
/// (whose playback starts at the propagation delay) from genuine speech.
const ONSET_JITTER_S: f64 = 0.08;

/// Examples requested per scenario kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KindCounts {
    #[serde(default)]
    pub non_playback: usize,
    #[serde(default)]
    pub playback_music: usize,
    #[serde(default)]
    pub playback_speech: usize,
    #[serde(default)]
    pub self_referencing: usize,
}

impl KindCounts {
    pub fn total(&self) -> usize {
        self.non_playback + self.playback_music + self.playback_speech + self.self_referencing
    }

    pub fn get(&self, kind: ScenarioKind) -> usize {
        match kind {
            ScenarioKind::NonPlayback => self.non_playback,
            ScenarioKind::PlaybackMusic => self.playback_music,
            ScenarioKind::PlaybackSpeech => self.playback_speech,
            ScenarioKind::SelfReferencing => self.self_referencing,
        }
    }
}

/// Dataset build configuration; the `[dataset]` table of a TOML config.
///
/// Keywords are lexicon text ('a'..'t' per phoneme). The optional pools are
/// plain text files listing 16 kHz mono WAV paths (one per line) used as
/// playback sources for the respective kind; without a pool, deterministic
/// synthetic stand-ins are used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub seed: u64,
    pub keywords: Vec<String>,
    pub counts: KindCounts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub music_pool: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speech_pool: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
struct DatasetConfigFile {
    dataset: DatasetConfig,
}

impl DatasetConfig {
    /// Parses a TOML document containing a `[dataset]` table.
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let file: DatasetConfigFile = toml::from_str(s)?;
        Ok(file.dataset)
    }

    /// Renders back to the same TOML layout `from_toml_str` accepts.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(&DatasetConfigFile {
            dataset: self.clone(),
        })
        .expect("dataset config serializes")
    }
}

/// One manifest line. Field order is the on-disk JSON key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: u64,
    pub kind: ScenarioKind,
    pub mixed_path: String,
    pub playback_path: String,
    pub keyword: String,
    pub phoneme_ids: Vec<usize>,
    pub y_utt: u8,
    pub y_phon: Vec<u8>,
    /// Null for kinds without a defined signal-to-interference ratio.
    pub sir_db: Option<f64>,
    pub rt60: f64,
    pub delay_s: f64,
    pub seed: u64,
}

fn wav_basenames(id: u64) -> (String, String) {
    (
        format!("wav/ex{id:05}_mixed.wav"),
        format!("wav/ex{id:05}_playback.wav"),
    )
}

/// Builds the dataset under `out_dir`: WAV pairs in `out_dir/wav/` and
/// `out_dir/manifest.jsonl` with paths relative to the manifest's directory.
/// Synthesis parallelizes over examples (`threads >= 1`); output bytes do
/// not depend on the thread count. Returns the manifest entries in id order.
pub fn build_dataset(
    config: &DatasetConfig,
    out_dir: &Path,
    threads: usize,
) -> Result<Vec<ManifestEntry>> {
    validate_config(config)?;
    let pools = Pools::load(config)?;

    std::fs::create_dir_all(out_dir.join("wav"))?;

    // Round-robin over kinds while quotas remain, so any prefix of the
    // manifest is close to kind-balanced.
    let mut remaining = config.counts;
    let mut plan: Vec<(u64, ScenarioKind)> = Vec::with_capacity(config.counts.total());
    let mut id = 0u64;
    while remaining.total() > 0 {
        for kind in ScenarioKind::ALL {
            if remaining.get(kind) > 0 {
                plan.push((id, kind));
                id += 1;
                match kind {
                    ScenarioKind::NonPlayback => remaining.non_playback -= 1,
                    ScenarioKind::PlaybackMusic => remaining.playback_music -= 1,
                    ScenarioKind::PlaybackSpeech => remaining.playback_speech -= 1,
                    ScenarioKind::SelfReferencing => remaining.self_referencing -= 1,
                }
            }
        }
    }

    let threads = threads.max(1).min(plan.len().max(1));
    let chunk = plan.len().div_ceil(threads);
    let mut entries: Vec<ManifestEntry> = Vec::with_capacity(plan.len());
    if !plan.is_empty() {
        let results: Vec<Result<Vec<ManifestEntry>>> = std::thread::scope(|scope| {
            let handles: Vec<_> = plan
                .chunks(chunk)
                .map(|part| {
                    let pools = &pools;
                    scope.spawn(move || {
                        part.iter()
                            .map(|&(id, kind)| {
                                let seed = rng::mix64(config.seed, id);
                                let (example, entry) =
                                    synth_example_inner(config, pools, kind, id, seed)?;
                                let (mixed_rel, playback_rel) = wav_basenames(id);
                                write_wav(out_dir.join(&mixed_rel), &example.mixed)?;
                                write_wav(out_dir.join(&playback_rel), &example.playback_ref)?;
                                Ok(entry)
                            })
                            .collect()
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        for r in results {
            entries.extend(r?);
        }
        entries.sort_by_key(|e| e.id);
    }

    let mut file = std::io::BufWriter::new(std::fs::File::create(out_dir.join("manifest.jsonl"))?);
    for entry in &entries {
        serde_json::to_writer(&mut file, entry)?;
        file.write_all(b"\n")?;
    }
    file.flush()?;
    Ok(entries)
}

/// Regenerates a single example from its manifest coordinates (kind, id,
/// seed) without touching the rest of the dataset.
pub fn synth_manifest_example(
    config: &DatasetConfig,
    kind: ScenarioKind,
    id: u64,
    seed: u64,
) -> Result<(ScenarioExample, ManifestEntry)> {
    validate_config(config)?;
    let pools = Pools::load(config)?;
    synth_example_inner(config, &pools, kind, id, seed)
}

/// Reads a JSONL manifest.
pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut entries = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        entries.push(serde_json::from_str(&line)?);
    }
    Ok(entries)
}

fn validate_config(config: &DatasetConfig) -> Result<()> {
    if config.counts.total() > 0 && config.keywords.is_empty() {
        return Err(Error::Config(
            "keywords: empty source pool (at least one keyword required)".into(),
        ));
    }
    for kw in &config.keywords {
        let ids = text_to_phonemes(kw)?;
        if ids.is_empty() || ids.len() > 6 {
            return Err(Error::Config(format!(
                "keyword {kw:?}: length {} outside 1..=6 phonemes",
                ids.len()
            )));
        }
    }
    Ok(())
}

/// Playback source pools, loaded once per build.
struct Pools {
    music: Option<Vec<PathBuf>>,
    speech: Option<Vec<PathBuf>>,
}

impl Pools {
    fn load(config: &DatasetConfig) -> Result<Self> {
        let read_pool = |field: &str, path: &Option<PathBuf>| -> Result<Option<Vec<PathBuf>>> {
            let Some(path) = path else { return Ok(None) };
            let text = std::fs::read_to_string(path).map_err(|e| {
                Error::Config(format!("{field}: cannot read pool {}: {e}", path.display()))
            })?;
            let base = path.parent().unwrap_or(Path::new(""));
            let list: Vec<PathBuf> = text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(|l| base.join(l))
                .collect();
            if list.is_empty() {
                return Err(Error::Config(format!(
                    "{field}: empty source pool {}",
                    path.display()
                )));
            }
            Ok(Some(list))
        };
        Ok(Pools {
            music: read_pool("music_pool", &config.music_pool)?,
            speech: read_pool("speech_pool", &config.speech_pool)?,
        })
    }

    fn draw(&self, kind: ScenarioKind, rng: &mut impl RngCore) -> Result<Option<Waveform>> {
        let pool = match kind {
            ScenarioKind::PlaybackMusic => &self.music,
            ScenarioKind::PlaybackSpeech => &self.speech,
            _ => &None,
        };
        let Some(list) = pool else { return Ok(None) };
        let path = &list[rng::below(rng, list.len())];
        let w = read_wav(path)?;
        if w.sample_rate != SAMPLE_RATE {
            return Err(Error::Config(format!(
                "pool wav {}: sample_rate={} (expected {SAMPLE_RATE})",
                path.display(),
                w.sample_rate
            )));
        }
        Ok(Some(w))
    }
}

fn synth_example_inner(
    config: &DatasetConfig,
    pools: &Pools,
    kind: ScenarioKind,
    id: u64,
    seed: u64,
) -> Result<(ScenarioExample, ManifestEntry)> {
    let mut rng = rng::chacha(seed);
    let kw_idx = rng::below(&mut rng, config.keywords.len());
    let keyword = &config.keywords[kw_idx];
    let kw_ids = text_to_phonemes(keyword)?;

    let spec = sample_scenario(kind, rng::mix64(seed, 1))?;
    let fs = SAMPLE_RATE as f64;

    let (user_speech, spoken_ids, y_utt): (Option<Waveform>, Vec<usize>, u8) = match kind {
        ScenarioKind::SelfReferencing => (None, Vec::new(), 0),
        _ => {
            let positive = rng::unit_f64(&mut rng) < 0.5;
            let spoken = if positive {
                kw_ids.clone()
            } else {
                negative_ids(&mut rng, config, kw_idx, &kw_ids)
            };
            let (mut w, _) = synth_keyword(&spoken, rng::mix64(seed, 2))?;
            let onset =
                (rng::uniform(&mut rng, 0.0, ONSET_JITTER_S) * fs).round() as usize;
            let mut samples = vec![0.0; onset];
            samples.append(&mut w.samples);
            w.samples = samples;
            (Some(w), spoken, positive as u8)
        }
    };

    let playback_src: Option<Waveform> = match kind {
        ScenarioKind::NonPlayback => None,
        ScenarioKind::SelfReferencing => {
            // The device replays the keyword itself: a re-synthesis under a
            // different jitter seed, not the identical recording.
            Some(synth_keyword(&kw_ids, rng::mix64(seed, 5))?.0)
        }
        ScenarioKind::PlaybackMusic => Some(match pools.draw(kind, &mut rng)? {
            Some(w) => w,
            None => synth_music(rng::mix64(seed, 3)),
        }),
        ScenarioKind::PlaybackSpeech => Some(match pools.draw(kind, &mut rng)? {
            Some(w) => w,
            None => {
                let ids = negative_ids(&mut rng, config, kw_idx, &kw_ids);
                synth_keyword(&ids, rng::mix64(seed, 4))?.0
            }
        }),
    };

    let y_phon: Vec<u8> = kw_ids
        .iter()
        .map(|p| spoken_ids.contains(p) as u8)
        .collect();

    let example = synthesize_example(
        &spec,
        user_speech.as_ref(),
        playback_src.as_ref(),
        keyword,
        y_utt,
        &y_phon,
    )?;

    let (mixed_path, playback_path) = wav_basenames(id);
    let entry = ManifestEntry {
        id,
        kind,
        mixed_path,
        playback_path,
        keyword: keyword.clone(),
        phoneme_ids: kw_ids,
        y_utt,
        y_phon,
        sir_db: spec.sir_db,
        rt60: spec.room.rt60,
        delay_s: spec.propagation_delay,
        seed,
    };
    Ok((example, entry))
}

/// Phoneme sequence for a negative example: another configured keyword when
/// available (half the time), otherwise a random non-keyword sequence.
fn negative_ids(
    rng: &mut impl RngCore,
    config: &DatasetConfig,
    kw_idx: usize,
    kw_ids: &[usize],
) -> Vec<usize> {
    if config.keywords.len() > 1 && rng::unit_f64(rng) < 0.5 {
        let mut other = rng::below(rng, config.keywords.len() - 1);
        if other >= kw_idx {
            other += 1;
        }
        return text_to_phonemes(&config.keywords[other]).expect("keywords pre-validated");
    }
    loop {
        let len = 2 + rng::below(rng, 5);
        let ids: Vec<usize> = (0..len).map(|_| rng::below(rng, INVENTORY_SIZE)).collect();
        if ids != kw_ids {
            return ids;
        }
    }
}
