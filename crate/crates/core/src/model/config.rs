//! Model hyperparameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which refiner mask subnet sits between the audio embeddings and the
/// pattern extractor. `None` bypasses the refiner entirely (the plain
/// keyword-spotting baseline).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskKind {
    /// Per-frame dense mask over the concatenated mixed and playback frames.
    D,
    /// Depthwise causal time-convolution mask (sees `mask_kernel` frames of
    /// history, so it can line up a delayed echo).
    C,
    None,
}

impl std::fmt::Display for MaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MaskKind::D => "d",
            MaskKind::C => "c",
            MaskKind::None => "none",
        })
    }
}

/// Architecture description; the `[model]` table of a TOML config.
///
/// Defaults reproduce the desk-scale network: 40 log-mel bands, two stride-2
/// 3x3 conv blocks, 128-dimensional embeddings upsampled x2 in time, one
/// attention head, a 128-unit GRU. Time resolution after the encoder is 20 ms
/// per embedding row (10 ms hop, /4 through the convs, x2 through the
/// transposed conv), so the default `mask_kernel` of 4 lets Subnet C see
/// 80 ms of history — enough to cover the 10-100 ms playback delay range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub mask_subnet: MaskKind,
    /// Kernel width K of mask subnet C.
    pub mask_kernel: usize,
    pub n_mels: usize,
    /// Analysis window / hop in seconds for the log-mel frontend.
    pub win_s: f64,
    pub hop_s: f64,
    pub conv_channels: usize,
    /// Square conv kernel side for both frontend blocks.
    pub conv_kernel: usize,
    pub emb_dim: usize,
    pub upsample_stride: usize,
    pub attention_heads: usize,
    pub gru_hidden: usize,
    /// Phoneme inventory size (embedding table rows).
    pub phoneme_inventory: usize,
    /// Weight of the per-phoneme loss term next to the utterance term.
    pub phoneme_loss_weight: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            mask_subnet: MaskKind::None,
            mask_kernel: 4,
            n_mels: 40,
            win_s: 0.025,
            hop_s: 0.010,
            conv_channels: 32,
            conv_kernel: 3,
            emb_dim: 128,
            upsample_stride: 2,
            attention_heads: 1,
            gru_hidden: 128,
            phoneme_inventory: crate::audio::INVENTORY_SIZE,
            phoneme_loss_weight: 1.0,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ModelConfigFile {
    model: ModelConfig,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let need = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(format!("model config: {what}")))
            }
        };
        need(self.mask_kernel >= 1, "mask_kernel must be >= 1")?;
        need(self.n_mels >= 4, "n_mels must be >= 4")?;
        need(
            self.hop_s > 0.0 && self.win_s >= self.hop_s,
            "need win_s >= hop_s > 0",
        )?;
        need(self.conv_channels >= 1, "conv_channels must be >= 1")?;
        need(self.conv_kernel >= 1, "conv_kernel must be >= 1")?;
        need(self.emb_dim >= 1, "emb_dim must be >= 1")?;
        need(self.upsample_stride >= 1, "upsample_stride must be >= 1")?;
        need(
            self.attention_heads == 1,
            "only single-head attention is implemented",
        )?;
        need(self.gru_hidden >= 1, "gru_hidden must be >= 1")?;
        need(self.phoneme_inventory >= 1, "phoneme_inventory must be >= 1")?;
        need(
            self.phoneme_loss_weight.is_finite() && self.phoneme_loss_weight >= 0.0,
            "phoneme_loss_weight must be finite and >= 0",
        )?;
        // The frontend halves the mel axis twice; the projection input width
        // must come out positive.
        need(
            self.n_mels.div_ceil(4) >= 1,
            "n_mels too small for two stride-2 blocks",
        )
    }

    /// Frequency bins entering the per-frame projection: n_mels halved by
    /// each of the two stride-2 conv blocks.
    pub fn freq_after_convs(&self) -> usize {
        self.n_mels.div_ceil(2).div_ceil(2)
    }

    /// Parses a TOML document containing a `[model]` table.
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let file: ModelConfigFile = toml::from_str(s)?;
        file.model.validate()?;
        Ok(file.model)
    }

    /// Renders back to the same TOML layout `from_toml_str` accepts.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(&ModelConfigFile {
            model: self.clone(),
        })
        .expect("model config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let mut cfg = ModelConfig {
            mask_subnet: MaskKind::C,
            mask_kernel: 5,
            ..ModelConfig::default()
        };
        let s = cfg.to_toml_string();
        assert!(s.contains("mask_subnet = \"c\""), "{s}");
        assert_eq!(ModelConfig::from_toml_str(&s).unwrap(), cfg);
        cfg.mask_subnet = MaskKind::None;
        let s = cfg.to_toml_string();
        assert!(s.contains("mask_subnet = \"none\""), "{s}");
        assert_eq!(ModelConfig::from_toml_str(&s).unwrap(), cfg);
    }

    #[test]
    fn partial_toml_fills_defaults() {
        let cfg = ModelConfig::from_toml_str("[model]\nmask_subnet = \"d\"\n").unwrap();
        assert_eq!(cfg.mask_subnet, MaskKind::D);
        assert_eq!(cfg.emb_dim, 128);
        assert_eq!(cfg.mask_kernel, 4);
    }

    #[test]
    fn invalid_configs_are_named() {
        for (toml, needle) in [
            ("[model]\nmask_kernel = 0\n", "mask_kernel"),
            ("[model]\nattention_heads = 2\n", "single-head"),
            ("[model]\nhop_s = 0.05\n", "win_s"),
            ("[model]\nphoneme_loss_weight = -1.0\n", "phoneme_loss_weight"),
        ] {
            let err = ModelConfig::from_toml_str(toml).unwrap_err().to_string();
            assert!(err.contains(needle), "{toml:?} -> {err}");
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(ModelConfig::from_toml_str("[model]\nclean_loss_weight = 1.0\n").is_err());
    }

    #[test]
    fn default_freq_width_matches_projection() {
        assert_eq!(ModelConfig::default().freq_after_convs(), 10);
    }
}
