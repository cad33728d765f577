//! Sample-level EER, AUC, and MAE.
//!
//! Detection metrics follow the convention "predict positive iff
//! score >= threshold". The ROC is the tie-grouped staircase over unique
//! score thresholds; AUC is its trapezoidal area, which equals the
//! Mann-Whitney pair statistic with ties counted 1/2; EER is the
//! FPR = FNR crossing, linearly interpolated along the staircase. Every
//! implementation here is cross-checked in tests against an O(n^2)
//! brute-force oracle.
//!
//! Self-referencing sets carry only MAE: every label is 0 by construction,
//! so ranking metrics are undefined there, and the report leaves them null.
//! All values are reported in [0, 1]; rendering as percent is left to
//! presentation layers.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::audio::read_wav;
use crate::error::{Error, Result};
use crate::model::{forward, ModelParams};
use crate::room::{ManifestEntry, ScenarioKind};

/// Scores with their binary labels for one scenario kind.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSet {
    scores: Vec<f64>,
    labels: Vec<u8>,
    pub kind: ScenarioKind,
}

impl ScoredSet {
    pub fn new(scores: Vec<f64>, labels: Vec<u8>, kind: ScenarioKind) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::LengthMismatch {
                what: "scores vs labels",
                left: scores.len(),
                right: labels.len(),
            });
        }
        if scores.is_empty() {
            return Err(Error::Config("empty scored set".into()));
        }
        if let Some(bad) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::Config(format!("score {bad} outside [0, 1]")));
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::Config(format!("label {bad} is not binary")));
        }
        Ok(ScoredSet {
            scores,
            labels,
            kind,
        })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        false // non-emptiness is a construction invariant
    }
}

/// Tie-grouped ROC staircase points with the threshold that produces each
/// point; the first point (0,0) gets a threshold above every score.
fn staircase(set: &ScoredSet) -> Result<(Vec<(f64, f64)>, Vec<f64>)> {
    let n_pos = set.labels.iter().filter(|&&l| l == 1).count();
    let n_neg = set.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::NotApplicable(format!(
            "ranking metrics need both classes, got {n_pos} positive / {n_neg} negative"
        )));
    }
    let mut order: Vec<usize> = (0..set.len()).collect();
    order.sort_by(|&a, &b| set.scores[b].total_cmp(&set.scores[a]));

    let max_score = set.scores[order[0]];
    let mut points = vec![(0.0, 0.0)];
    let mut thresholds = vec![max_score + 1.0];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let t = set.scores[order[i]];
        while i < order.len() && set.scores[order[i]] == t {
            if set.labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
        thresholds.push(t);
    }
    Ok((points, thresholds))
}

/// Ordered (FPR, TPR) staircase from (0,0) to (1,1), one point per unique
/// score threshold.
pub fn roc(set: &ScoredSet) -> Result<Vec<(f64, f64)>> {
    Ok(staircase(set)?.0)
}

/// Area under [`roc`] by the trapezoid rule; identical to the Mann-Whitney
/// statistic (fraction of positive/negative pairs ranked correctly, ties
/// counted half).
pub fn auc(set: &ScoredSet) -> Result<f64> {
    let pts = roc(set)?;
    let mut area = 0.0;
    for w in pts.windows(2) {
        let ((f0, t0), (f1, t1)) = (w[0], w[1]);
        area += (f1 - f0) * (t0 + t1) / 2.0;
    }
    Ok(area)
}

/// Equal error rate: the FPR = FNR crossing, linearly interpolated along
/// the ROC staircase, with the correspondingly interpolated threshold.
pub fn eer(set: &ScoredSet) -> Result<(f64, f64)> {
    let (pts, ths) = staircase(set)?;
    // diff = FPR - FNR runs from -1 at (0,0) to +1 at (1,1), nondecreasing.
    for k in 1..pts.len() {
        let (f1, t1) = pts[k];
        let fnr1 = 1.0 - t1;
        if f1 - fnr1 < 0.0 {
            continue;
        }
        if f1 - fnr1 == 0.0 {
            return Ok((f1, ths[k]));
        }
        let (f0, t0) = pts[k - 1];
        let fnr0 = 1.0 - t0;
        let u = (fnr0 - f0) / ((f1 - f0) + (fnr0 - fnr1));
        return Ok((f0 + u * (f1 - f0), ths[k - 1] + u * (ths[k] - ths[k - 1])));
    }
    unreachable!("diff reaches +1 at (1,1)")
}

/// Mean absolute error between scores and labels.
pub fn mae(set: &ScoredSet) -> f64 {
    set.scores
        .iter()
        .zip(&set.labels)
        .map(|(s, &l)| (s - f64::from(l)).abs())
        .sum::<f64>()
        / set.len() as f64
}

/// Metrics for one scenario kind; `auc`/`eer` are null for self-referencing
/// sets (all labels 0 by protocol) and for any set where only one class
/// occurred.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindReport {
    pub kind: ScenarioKind,
    pub n: usize,
    pub auc: Option<f64>,
    pub eer: Option<f64>,
    pub eer_threshold: Option<f64>,
    pub mae: f64,
    pub roc: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub kinds: Vec<KindReport>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// One row per kind, empty cells where a metric is not applicable.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,n,auc,eer,mae\n");
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for k in &self.kinds {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                k.kind.as_str(),
                k.n,
                cell(k.auc),
                cell(k.eer),
                k.mae
            ));
        }
        out
    }

    pub fn kind(&self, kind: ScenarioKind) -> Option<&KindReport> {
        self.kinds.iter().find(|k| k.kind == kind)
    }
}

/// Builds one report row from a scored set. Self-referencing sets carry MAE
/// only — every label is 0 by protocol, so ranking metrics are undefined; the
/// same applies to any other set where only one class is present.
pub fn report_for(set: &ScoredSet) -> Result<KindReport> {
    let ranking = if set.kind == ScenarioKind::SelfReferencing {
        None
    } else {
        match staircase(set) {
            Ok((pts, _)) => {
                let a = auc(set)?;
                let (e, th) = eer(set)?;
                Some((a, e, th, pts))
            }
            Err(Error::NotApplicable(_)) => None,
            Err(e) => return Err(e),
        }
    };
    Ok(match ranking {
        Some((a, e, th, pts)) => KindReport {
            kind: set.kind,
            n: set.len(),
            auc: Some(a),
            eer: Some(e),
            eer_threshold: Some(th),
            mae: mae(set),
            roc: pts,
        },
        None => KindReport {
            kind: set.kind,
            n: set.len(),
            auc: None,
            eer: None,
            eer_threshold: None,
            mae: mae(set),
            roc: Vec::new(),
        },
    })
}

/// Scores every manifest example with the model's utterance head and
/// aggregates per scenario kind (kinds absent from the manifest produce no
/// row). Scoring itself is exactly the training-time forward pass.
pub fn evaluate(
    params: &ModelParams,
    manifest_dir: &Path,
    entries: &[ManifestEntry],
) -> Result<EvalReport> {
    if entries.is_empty() {
        return Err(Error::Config("evaluation manifest is empty".into()));
    }
    let mut by_kind: Vec<(Vec<f64>, Vec<u8>)> = vec![(Vec::new(), Vec::new()); 4];
    for e in entries {
        let mixed = read_wav(manifest_dir.join(&e.mixed_path))?;
        let playback = read_wav(manifest_dir.join(&e.playback_path))?;
        let out = forward(&mixed, &playback, &e.phoneme_ids, params)?;
        let slot = ScenarioKind::ALL
            .iter()
            .position(|&k| k == e.kind)
            .expect("kind is one of ALL");
        by_kind[slot].0.push(out.utt_score());
        by_kind[slot].1.push(e.y_utt);
    }
    let mut kinds = Vec::new();
    for (slot, (scores, labels)) in by_kind.into_iter().enumerate() {
        if scores.is_empty() {
            continue;
        }
        let set = ScoredSet::new(scores, labels, ScenarioKind::ALL[slot])?;
        kinds.push(report_for(&set)?);
    }
    Ok(EvalReport { kinds })
}
