//! Named parameter store and checkpoint I/O.
//!
//! Every trainable tensor lives in one `BTreeMap<String, Tensor>` so the
//! optimizer, the checkpoint format, and parameter counting all see the same
//! flat name -> tensor view. Checkpoints are version-tagged JSON of
//! name -> {shape, row-major values} plus the architecture config, written
//! atomically (temp file + rename) so a crash mid-save never truncates the
//! best checkpoint.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write as _};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::rng::{self, chacha, uniform};

use super::config::{MaskKind, ModelConfig};

const CHECKPOINT_FORMAT: &str = "bargebench-checkpoint";
const CHECKPOINT_VERSION: u32 = 1;

pub struct ModelParams {
    pub config: ModelConfig,
    map: BTreeMap<String, Tensor>,
}

impl std::fmt::Debug for ModelParams {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelParams")
            .field("config", &self.config)
            .field("tensors", &self.map.len())
            .field("param_count", &self.param_count())
            .finish()
    }
}

#[derive(Serialize, Deserialize)]
struct SavedTensor {
    shape: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    config: ModelConfig,
    params: BTreeMap<String, SavedTensor>,
}

impl ModelParams {
    /// Fresh parameters for `config`: weights uniform in +-sqrt(6/(fan_in +
    /// fan_out)), biases zero, except the mask subnet bias which starts at
    /// +2 so the refined path opens near-transparent (sigmoid(2) ~ 0.88) and
    /// early training matches the no-refiner baseline instead of fighting a
    /// half-closed mask.
    ///
    /// Each tensor draws from its own stream keyed by (seed, position), so
    /// adding or removing a subnet never reshuffles the others.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let d = config.emb_dim;
        let ch = config.conv_channels;
        let k = config.conv_kernel;
        let proj_in = ch * config.freq_after_convs();
        let up = config.upsample_stride;
        let h = config.gru_hidden;

        let mut map = BTreeMap::new();
        let mut slot = 0u64;
        let mut add = |map: &mut BTreeMap<String, Tensor>,
                       name: &str,
                       shape: &[usize],
                       fan: Option<(usize, usize)>,
                       bias_init: f64| {
            slot += 1;
            let n: usize = shape.iter().product();
            let values = match fan {
                Some((fan_in, fan_out)) => {
                    let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    let mut rng = chacha(rng::mix64(seed, slot));
                    (0..n).map(|_| uniform(&mut rng, -s, s)).collect()
                }
                None => vec![bias_init; n],
            };
            map.insert(name.to_string(), Tensor::parameter(shape, values));
        };

        add(&mut map, "encoder.conv1.w", &[ch, 1, k, k], Some((k * k, ch * k * k)), 0.0);
        add(&mut map, "encoder.conv1.b", &[ch], None, 0.0);
        add(&mut map, "encoder.conv2.w", &[ch, ch, k, k], Some((ch * k * k, ch * k * k)), 0.0);
        add(&mut map, "encoder.conv2.b", &[ch], None, 0.0);
        add(&mut map, "encoder.proj.w", &[proj_in, d], Some((proj_in, d)), 0.0);
        add(&mut map, "encoder.proj.b", &[d], None, 0.0);
        add(&mut map, "encoder.up.w", &[d, d, up], Some((d, d)), 0.0);
        add(&mut map, "encoder.up.b", &[d], None, 0.0);

        add(&mut map, "text.embed", &[config.phoneme_inventory, d], Some((1, d)), 0.0);
        add(&mut map, "text.dense.w", &[d, d], Some((d, d)), 0.0);
        add(&mut map, "text.dense.b", &[d], None, 0.0);

        match config.mask_subnet {
            MaskKind::D => {
                add(&mut map, "mask_d.w", &[2 * d, d], Some((2 * d, d)), 0.0);
                add(&mut map, "mask_d.b", &[d], None, 2.0);
            }
            MaskKind::C => {
                let kk = config.mask_kernel;
                add(&mut map, "mask_c.wm", &[d, kk], Some((kk, kk)), 0.0);
                add(&mut map, "mask_c.wp", &[d, kk], Some((kk, kk)), 0.0);
                add(&mut map, "mask_c.b", &[d], None, 2.0);
            }
            MaskKind::None => {}
        }

        for name in ["attn.q", "attn.k", "attn.v"] {
            add(&mut map, &format!("{name}.w"), &[d, d], Some((d, d)), 0.0);
            add(&mut map, &format!("{name}.b"), &[d], None, 0.0);
        }

        for gate in ["z", "r", "n"] {
            add(&mut map, &format!("gru.w{gate}"), &[d, h], Some((d, h)), 0.0);
            add(&mut map, &format!("gru.u{gate}"), &[h, h], Some((h, h)), 0.0);
            add(&mut map, &format!("gru.b{gate}_x"), &[h], None, 0.0);
            add(&mut map, &format!("gru.b{gate}_h"), &[h], None, 0.0);
        }

        add(&mut map, "head.utt.w", &[h, 1], Some((h, 1)), 0.0);
        add(&mut map, "head.utt.b", &[1], None, 0.0);
        add(&mut map, "head.phon.w", &[h, 1], Some((h, 1)), 0.0);
        add(&mut map, "head.phon.b", &[1], None, 0.0);

        Ok(ModelParams {
            config: config.clone(),
            map,
        })
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.map
            .get(name)
            .ok_or_else(|| Error::Config(format!("model has no parameter '{name}'")))
    }

    /// All parameters in name order, the view the optimizer consumes.
    pub fn named(&self) -> Vec<(&str, &Tensor)> {
        self.map.iter().map(|(k, v)| (k.as_str(), v)).collect()
    }

    /// Exact count of trainable scalars.
    pub fn param_count(&self) -> usize {
        self.map.values().map(Tensor::len).sum()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let ckpt = Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            params: self
                .map
                .iter()
                .map(|(name, t)| {
                    (
                        name.clone(),
                        SavedTensor {
                            shape: t.shape(),
                            values: t.values_vec(),
                        },
                    )
                })
                .collect(),
        };
        let tmp = path.with_extension("tmp");
        {
            let mut w = BufWriter::new(fs::File::create(&tmp)?);
            serde_json::to_writer(&mut w, &ckpt)?;
            w.flush()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_reader(std::io::BufReader::new(
            fs::File::open(path)?,
        ))?;
        if ckpt.format != CHECKPOINT_FORMAT || ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!(
                "checkpoint {}: format '{}' v{} (expected '{CHECKPOINT_FORMAT}' v{CHECKPOINT_VERSION})",
                path.display(),
                ckpt.format,
                ckpt.version
            )));
        }
        ckpt.config.validate()?;
        // Shape-check against a freshly built skeleton so a checkpoint from
        // a different architecture fails here, not deep inside a matmul.
        let skeleton = ModelParams::init(&ckpt.config, 0)?;
        let mut map = BTreeMap::new();
        for (name, expect) in &skeleton.map {
            let saved = ckpt.params.get(name).ok_or_else(|| {
                Error::Config(format!("checkpoint is missing parameter '{name}'"))
            })?;
            if saved.shape != expect.shape() || saved.values.len() != expect.len() {
                return Err(Error::Config(format!(
                    "checkpoint parameter '{name}': shape {:?} (expected {:?})",
                    saved.shape,
                    expect.shape()
                )));
            }
            if saved.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "checkpoint parameter '{name}' contains non-finite values"
                )));
            }
            map.insert(
                name.clone(),
                Tensor::parameter(&saved.shape, saved.values.clone()),
            );
        }
        if let Some(extra) = ckpt.params.keys().find(|k| !skeleton.map.contains_key(*k)) {
            return Err(Error::Config(format!(
                "checkpoint has unexpected parameter '{extra}'"
            )));
        }
        Ok(ModelParams {
            config: ckpt.config,
            map,
        })
    }
}
