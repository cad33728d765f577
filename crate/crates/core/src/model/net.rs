//! Forward graphs for the five model stages.
//!
//! Stages compose over [`Tensor`]s so one `backward()` call on the loss
//! reaches every parameter. The mixed and playback waveforms run through the
//! *same* encoder parameters (shared storage, not copies); the refiner then
//! predicts a per-frame, per-dimension sigmoid mask from both embeddings and
//! multiplies it into the mixed one — echo cancellation in embedding space,
//! with no clean-speech target anywhere.

use crate::audio::{log_mel, FeatureMatrix, Waveform, EPS_FEAT};
use crate::autodiff::ops::{
    add, add_row, bce, concat, conv1d_depthwise, conv2d, masked_softmax, matmul, mul, relu,
    scale, sigmoid, slice_rows, time_major, transpose2d, transposed_conv1d, GruCell,
};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

use super::config::MaskKind;
use super::params::ModelParams;

/// Which signal an audio embedding was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingRole {
    Mixed,
    Playback,
    Enhanced,
}

/// T_a x emb_dim embedding rows plus the role they were computed in.
pub struct AudioEmbedding {
    pub emb: Tensor,
    pub role: EmbeddingRole,
}

/// Audio-then-text concatenation with the boundary index preserved, so the
/// discriminator can find the text rows again.
pub struct JointEmbedding {
    pub emb: Tensor,
    /// First text row; rows [0, boundary) are audio.
    pub boundary: usize,
}

/// Utterance and per-phoneme detection probabilities, still attached to the
/// graph: `p_utt` is [1,1], `p_phon` is [T_t,1].
pub struct ModelOutput {
    pub p_utt: Tensor,
    pub p_phon: Tensor,
}

impl ModelOutput {
    pub fn utt_score(&self) -> f64 {
        self.p_utt.value_at(0)
    }

    pub fn phon_scores(&self) -> Vec<f64> {
        self.p_phon.values_vec()
    }
}

/// Fixed affine normalization of log-mel features: the silence floor
/// ln(EPS_FEAT) maps to 0 and typical speech energies land around 2-3.
/// Fixed (not dataset statistics) so single examples regenerate bit-exactly
/// without a stats pass.
fn normalize_feat(x: f64) -> f64 {
    (x - EPS_FEAT.ln()) / 8.0
}

/// Log-mel frontend for `audio_encode`, exposed separately so a trainer can
/// cache features across epochs.
pub fn encoder_features(w: &Waveform, p: &ModelParams) -> Result<FeatureMatrix> {
    log_mel(w, p.config.n_mels, p.config.win_s, p.config.hop_s)
}

/// Shared audio encoder over precomputed features: two stride-2 conv blocks,
/// per-frame linear projection to emb_dim, then transposed-conv upsampling
/// along time. T_f frames become T_a = upsample_stride * ceil(T_f/4) rows.
pub fn audio_encode_features(
    feats: &FeatureMatrix,
    p: &ModelParams,
    role: EmbeddingRole,
) -> Result<AudioEmbedding> {
    let t_f = feats.n_frames();
    if t_f == 0 {
        return Err(Error::DegenerateSignal(
            "audio shorter than one analysis frame".into(),
        ));
    }
    let x = Tensor::constant(
        &[1, t_f, feats.n_mels],
        feats.data.iter().map(|&v| normalize_feat(v)).collect(),
    );
    let h1 = relu(&conv2d(&x, p.get("encoder.conv1.w")?, p.get("encoder.conv1.b")?, (2, 2))?);
    let h2 = relu(&conv2d(&h1, p.get("encoder.conv2.w")?, p.get("encoder.conv2.b")?, (2, 2))?);
    let frames = relu(&add_row(
        &matmul(&time_major(&h2)?, p.get("encoder.proj.w")?)?,
        p.get("encoder.proj.b")?,
    )?);
    let upsampled = transposed_conv1d(
        &transpose2d(&frames)?,
        p.get("encoder.up.w")?,
        p.get("encoder.up.b")?,
        p.config.upsample_stride,
    )?;
    Ok(AudioEmbedding {
        emb: transpose2d(&upsampled)?,
        role,
    })
}

/// Shared audio encoder from a waveform (frontend + [`audio_encode_features`]).
pub fn audio_encode(w: &Waveform, p: &ModelParams, role: EmbeddingRole) -> Result<AudioEmbedding> {
    audio_encode_features(&encoder_features(w, p)?, p, role)
}

/// Text encoder: learned phoneme embedding lookup, dense layer, ReLU.
/// An empty id list yields an empty 0 x emb_dim matrix; downstream stages
/// reject it.
pub fn text_encode(phoneme_ids: &[usize], p: &ModelParams) -> Result<Tensor> {
    let table = p.get("text.embed")?;
    let inventory = table.shape()[0];
    if let Some(&bad) = phoneme_ids.iter().find(|&&id| id >= inventory) {
        return Err(Error::Config(format!(
            "phoneme id {bad} outside inventory 0..{inventory}"
        )));
    }
    let looked_up = crate::autodiff::ops::gather_rows(table, phoneme_ids)?;
    Ok(relu(&add_row(
        &matmul(&looked_up, p.get("text.dense.w")?)?,
        p.get("text.dense.b")?,
    )?))
}

fn check_refiner_inputs(mixed: &AudioEmbedding, playback: &AudioEmbedding) -> Result<()> {
    if mixed.role != EmbeddingRole::Mixed || playback.role != EmbeddingRole::Playback {
        return Err(Error::NotApplicable(format!(
            "refiner wants (mixed, playback) embeddings, got ({:?}, {:?})",
            mixed.role, playback.role
        )));
    }
    if mixed.emb.shape() != playback.emb.shape() {
        return Err(Error::ShapeMismatch {
            op: "refine_mask",
            details: format!("{:?} vs {:?}", mixed.emb.shape(), playback.emb.shape()),
        });
    }
    Ok(())
}

/// Mask Subnet D: one dense layer over each frame's concatenated mixed and
/// playback embeddings, sigmoid output in (0,1)^{T_a x emb_dim}. Purely
/// per-frame — it cannot model a playback delay.
pub fn refine_mask_d(
    mixed: &AudioEmbedding,
    playback: &AudioEmbedding,
    p: &ModelParams,
) -> Result<Tensor> {
    check_refiner_inputs(mixed, playback)?;
    let joint = concat(&mixed.emb, &playback.emb, 1)?;
    Ok(sigmoid(&add_row(
        &matmul(&joint, p.get("mask_d.w")?)?,
        p.get("mask_d.b")?,
    )?))
}

/// Mask Subnet C: depthwise causal convolution over time with kernel width
/// K on both embeddings, summed per dimension — K frames of history let it
/// align an echo that arrives delayed. ~K/64 the parameters of Subnet D.
pub fn refine_mask_c(
    mixed: &AudioEmbedding,
    playback: &AudioEmbedding,
    p: &ModelParams,
) -> Result<Tensor> {
    check_refiner_inputs(mixed, playback)?;
    let d = mixed.emb.shape()[1];
    let zero_bias = Tensor::constant(&[d], vec![0.0; d]);
    let zm = conv1d_depthwise(
        &transpose2d(&mixed.emb)?,
        p.get("mask_c.wm")?,
        p.get("mask_c.b")?,
    )?;
    let zp = conv1d_depthwise(
        &transpose2d(&playback.emb)?,
        p.get("mask_c.wp")?,
        &zero_bias,
    )?;
    transpose2d(&sigmoid(&add(&zm, &zp)?))
}

/// Elementwise product of the mixed embedding and a refiner mask; the
/// enhanced embedding the pattern extractor consumes.
pub fn apply_mask(mixed: &AudioEmbedding, mask: &Tensor) -> Result<AudioEmbedding> {
    if mixed.emb.shape() != mask.shape() {
        return Err(Error::ShapeMismatch {
            op: "apply_mask",
            details: format!("{:?} vs {:?}", mixed.emb.shape(), mask.shape()),
        });
    }
    Ok(AudioEmbedding {
        emb: mul(&mixed.emb, mask)?,
        role: EmbeddingRole::Enhanced,
    })
}

/// Runs the refiner selected by the config (or nothing for
/// [`MaskKind::None`]) and returns the embedding to feed the extractor.
pub fn refine(
    mixed: &AudioEmbedding,
    playback: &AudioEmbedding,
    p: &ModelParams,
) -> Result<AudioEmbedding> {
    match p.config.mask_subnet {
        MaskKind::D => apply_mask(mixed, &refine_mask_d(mixed, playback, p)?),
        MaskKind::C => apply_mask(mixed, &refine_mask_c(mixed, playback, p)?),
        MaskKind::None => Ok(AudioEmbedding {
            emb: mixed.emb.clone(),
            role: mixed.role,
        }),
    }
}

/// Pattern extractor: concatenates audio rows then text rows and applies
/// single-head scaled dot-product self-attention under a lower-triangular
/// mask, so row i attends to rows 0..=i only.
pub fn pattern_extract(
    audio: &AudioEmbedding,
    text: &Tensor,
    p: &ModelParams,
) -> Result<JointEmbedding> {
    let t_a = audio.emb.shape()[0];
    let t_t = text.shape()[0];
    if t_a == 0 {
        return Err(Error::DegenerateSignal("empty audio embedding".into()));
    }
    if t_t == 0 {
        return Err(Error::DegenerateSignal("empty keyword".into()));
    }
    let j0 = concat(&audio.emb, text, 0)?;
    let q = add_row(&matmul(&j0, p.get("attn.q.w")?)?, p.get("attn.q.b")?)?;
    let k = add_row(&matmul(&j0, p.get("attn.k.w")?)?, p.get("attn.k.b")?)?;
    let v = add_row(&matmul(&j0, p.get("attn.v.w")?)?, p.get("attn.v.b")?)?;
    let d = j0.shape()[1] as f64;
    let logits = scale(&matmul(&q, &transpose2d(&k)?)?, 1.0 / d.sqrt());
    let n = t_a + t_t;
    let mut mask = vec![0.0; n * n];
    for r in 0..n {
        for c in (r + 1)..n {
            mask[r * n + c] = -1e30;
        }
    }
    let attn = masked_softmax(&logits, Some(&Tensor::constant(&[n, n], mask)))?;
    Ok(JointEmbedding {
        emb: matmul(&attn, &v)?,
        boundary: t_a,
    })
}

fn gru_cell(p: &ModelParams) -> Result<GruCell> {
    Ok(GruCell {
        wz: p.get("gru.wz")?.clone(),
        uz: p.get("gru.uz")?.clone(),
        bz_x: p.get("gru.bz_x")?.clone(),
        bz_h: p.get("gru.bz_h")?.clone(),
        wr: p.get("gru.wr")?.clone(),
        ur: p.get("gru.ur")?.clone(),
        br_x: p.get("gru.br_x")?.clone(),
        br_h: p.get("gru.br_h")?.clone(),
        wn: p.get("gru.wn")?.clone(),
        un: p.get("gru.un")?.clone(),
        bn_x: p.get("gru.bn_x")?.clone(),
        bn_h: p.get("gru.bn_h")?.clone(),
    })
}

/// Pattern discriminator: a GRU consumes the joint rows in order (audio
/// prefix, then text); the final hidden state feeds the utterance head and
/// the hidden states at the text positions feed a shared per-phoneme head.
pub fn discriminate(joint: &JointEmbedding, p: &ModelParams) -> Result<ModelOutput> {
    let total = joint.emb.shape()[0];
    let t_t = total - joint.boundary;
    if t_t == 0 {
        return Err(Error::DegenerateSignal("empty keyword".into()));
    }
    let cell = gru_cell(p)?;
    let hidden = p.config.gru_hidden;
    let mut h = Tensor::constant(&[1, hidden], vec![0.0; hidden]);
    let mut text_states: Option<Tensor> = None;
    for t in 0..total {
        h = cell.step(&slice_rows(&joint.emb, t, t + 1)?, &h)?;
        if t >= joint.boundary {
            text_states = Some(match text_states {
                Some(acc) => concat(&acc, &h, 0)?,
                None => h.clone(),
            });
        }
    }
    let p_utt = sigmoid(&add_row(
        &matmul(&h, p.get("head.utt.w")?)?,
        p.get("head.utt.b")?,
    )?);
    let p_phon = sigmoid(&add_row(
        &matmul(&text_states.expect("t_t >= 1"), p.get("head.phon.w")?)?,
        p.get("head.phon.b")?,
    )?);
    Ok(ModelOutput { p_utt, p_phon })
}

/// Training criterion: BCE(P_utt, y_utt) + lambda * mean_i BCE(P_phon[i],
/// y_phon[i]). Takes only probabilities and labels — there is no signal
/// argument to smuggle a clean-speech reconstruction term through.
pub fn loss(out: &ModelOutput, y_utt: f64, y_phon: &[f64], lambda: f64) -> Result<Tensor> {
    if out.p_phon.len() != y_phon.len() {
        return Err(Error::LengthMismatch {
            what: "p_phon vs y_phon",
            left: out.p_phon.len(),
            right: y_phon.len(),
        });
    }
    let utt = bce(&out.p_utt, &[y_utt])?;
    if lambda == 0.0 {
        return Ok(utt);
    }
    add(&utt, &scale(&bce(&out.p_phon, y_phon)?, lambda))
}

/// Full forward pass from waveforms to the scalar training loss.
pub fn forward_loss(
    mixed: &Waveform,
    playback: &Waveform,
    phoneme_ids: &[usize],
    y_utt: f64,
    y_phon: &[f64],
    p: &ModelParams,
) -> Result<Tensor> {
    let out = forward(mixed, playback, phoneme_ids, p)?;
    loss(&out, y_utt, y_phon, p.config.phoneme_loss_weight)
}

/// Full forward pass from waveforms to probabilities.
pub fn forward(
    mixed: &Waveform,
    playback: &Waveform,
    phoneme_ids: &[usize],
    p: &ModelParams,
) -> Result<ModelOutput> {
    let em = audio_encode(mixed, p, EmbeddingRole::Mixed)?;
    let ep = audio_encode(playback, p, EmbeddingRole::Playback)?;
    forward_from_embeddings(&em, &ep, phoneme_ids, p)
}

/// Refiner, extractor and discriminator over already-encoded audio.
pub fn forward_from_embeddings(
    mixed: &AudioEmbedding,
    playback: &AudioEmbedding,
    phoneme_ids: &[usize],
    p: &ModelParams,
) -> Result<ModelOutput> {
    let enhanced = refine(mixed, playback, p)?;
    let text = text_encode(phoneme_ids, p)?;
    let joint = pattern_extract(&enhanced, &text, p)?;
    discriminate(&joint, p)
}
