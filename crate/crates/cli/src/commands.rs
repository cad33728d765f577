//! Subcommand implementations. Each one resolves its configuration (file
//! table + flag overrides + `--seed`), echoes the result, runs, and prints
//! machine-readable `key=value` lines on stdout.

use std::path::{Path, PathBuf};

use bargebench::aec::{erle, nlms_process};
use bargebench::audio::{read_wav, write_wav, Waveform};
use bargebench::metrics::{evaluate, EvalReport};
use bargebench::model::{train, ModelParams};
use bargebench::room::{build_dataset, load_manifest, ScenarioKind};
use bargebench::{Error, Result};

use crate::config::{echo_resolved, EvalSection, FileConfig, ReportSection};
use crate::svg;

/// Global flags shared by every subcommand.
pub struct Ctx {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: usize,
}

impl Ctx {
    fn out_dir(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| Error::Config("--out <dir> is required".into()))
    }

    fn load_config(&self) -> Result<FileConfig> {
        match &self.config {
            Some(p) => FileConfig::load(p),
            None => Ok(FileConfig::empty()),
        }
    }

    fn require_config(&self) -> Result<FileConfig> {
        match &self.config {
            Some(p) => FileConfig::load(p),
            None => Err(Error::Config("--config <toml> is required".into())),
        }
    }

    fn threads(&self) -> usize {
        if self.threads == 0 {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        } else {
            self.threads
        }
    }

    fn warn_unused_seed(&self, cmd: &str) {
        if self.seed.is_some() {
            log::warn!("--seed has no effect on `{cmd}`");
        }
    }
}

pub fn simulate(ctx: &Ctx) -> Result<()> {
    let file = ctx.require_config()?;
    let mut dataset = FileConfig::require(&file.dataset, "dataset")?.clone();
    if let Some(seed) = ctx.seed {
        dataset.seed = seed;
    }
    let out = ctx.out_dir()?;
    let resolved = FileConfig {
        dataset: Some(dataset.clone()),
        ..FileConfig::empty()
    };
    let resolved_path = echo_resolved(&resolved, out)?;
    println!("resolved_config={}", resolved_path.display());

    let entries = build_dataset(&dataset, out, ctx.threads())?;
    println!("manifest={}", out.join("manifest.jsonl").display());
    println!("total={}", entries.len());
    for kind in ScenarioKind::ALL {
        let n = entries.iter().filter(|e| e.kind == kind).count();
        println!("{}={n}", kind.as_str());
    }
    Ok(())
}

pub struct AecArgs {
    pub mic: Option<PathBuf>,
    pub reference: Option<PathBuf>,
    pub taps: Option<usize>,
    pub step: Option<f64>,
    pub eps: Option<f64>,
}

fn tail_quarter(w: &Waveform) -> Waveform {
    let start = w.len() - w.len() / 4;
    Waveform::new(w.samples[start..].to_vec(), w.sample_rate)
}

pub fn aec(ctx: &Ctx, args: &AecArgs) -> Result<()> {
    ctx.warn_unused_seed("aec");
    let file = ctx.load_config()?;
    let mut sect = file.aec.clone().unwrap_or_default();
    if let Some(m) = &args.mic {
        sect.mic = Some(m.clone());
    }
    if let Some(r) = &args.reference {
        sect.reference = Some(r.clone());
    }
    if let Some(t) = args.taps {
        sect.taps = t;
    }
    if let Some(s) = args.step {
        sect.step = s;
    }
    if let Some(e) = args.eps {
        sect.eps = e;
    }
    let mic_path = sect
        .mic
        .clone()
        .ok_or_else(|| Error::Config("aec needs --mic (or [aec] mic in the config)".into()))?;
    let ref_path = sect.reference.clone().ok_or_else(|| {
        Error::Config("aec needs --reference (or [aec] reference in the config)".into())
    })?;
    let out = ctx.out_dir()?;
    let resolved = FileConfig {
        aec: Some(sect.clone()),
        ..FileConfig::empty()
    };
    let resolved_path = echo_resolved(&resolved, out)?;
    println!("resolved_config={}", resolved_path.display());

    let mic = read_wav(&mic_path)?;
    let reference = read_wav(&ref_path)?;
    let (residual, _) = nlms_process(&mic, &reference, sect.taps, sect.step, sect.eps)?;
    let res_path = out.join("residual.wav");
    write_wav(&res_path, &residual)?;
    println!("residual={}", res_path.display());

    // Converged figure: the final quarter excludes the adaptation
    // transient. The full-span number is reported alongside it.
    let erle_db = erle(&tail_quarter(&mic), &tail_quarter(&residual))?;
    println!("erle_db={erle_db}");
    println!("erle_full_db={}", erle(&mic, &residual)?);
    Ok(())
}

pub fn train_cmd(ctx: &Ctx) -> Result<()> {
    let file = ctx.require_config()?;
    let mut section = FileConfig::require(&file.train, "train")?.clone();
    if let Some(seed) = ctx.seed {
        section.seed = seed;
    }
    let model_cfg = file.model.clone().unwrap_or_default();
    let out = ctx.out_dir()?;
    let resolved = FileConfig {
        model: Some(model_cfg.clone()),
        train: Some(section.clone()),
        ..FileConfig::empty()
    };
    let resolved_path = echo_resolved(&resolved, out)?;
    println!("resolved_config={}", resolved_path.display());

    let entries = load_manifest(&section.manifest)?;
    let manifest_dir = section.manifest.parent().unwrap_or(Path::new("."));
    let outcome = train(manifest_dir, &entries, &model_cfg, &section.optimizer(), out)?;
    println!("checkpoint={}", outcome.checkpoint_path.display());
    println!("log={}", outcome.log_path.display());
    println!("steps={}", outcome.steps_run);
    println!("initial_train_loss={}", outcome.initial_train_loss);
    println!("final_train_loss={}", outcome.final_train_loss);
    println!("best_step={}", outcome.best_step);
    println!("best_val_loss={}", outcome.best_val_loss);
    Ok(())
}

pub struct EvalArgs {
    pub checkpoint: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
}

pub fn eval_cmd(ctx: &Ctx, args: &EvalArgs) -> Result<()> {
    ctx.warn_unused_seed("eval");
    let file = ctx.load_config()?;
    let mut sect = file.eval.clone().unwrap_or_default();
    if let Some(c) = &args.checkpoint {
        sect.checkpoint = Some(c.clone());
    }
    if let Some(m) = &args.manifest {
        sect.manifest = Some(m.clone());
    }
    let ckpt_path = sect.checkpoint.clone().ok_or_else(|| {
        Error::Config("eval needs --checkpoint (or [eval] checkpoint in the config)".into())
    })?;
    let man_path = sect.manifest.clone().ok_or_else(|| {
        Error::Config("eval needs --manifest (or [eval] manifest in the config)".into())
    })?;
    let out = ctx.out_dir()?;
    let resolved = FileConfig {
        eval: Some(EvalSection {
            checkpoint: Some(ckpt_path.clone()),
            manifest: Some(man_path.clone()),
        }),
        ..FileConfig::empty()
    };
    let resolved_path = echo_resolved(&resolved, out)?;
    println!("resolved_config={}", resolved_path.display());

    let params = ModelParams::load(&ckpt_path)?;
    let entries = load_manifest(&man_path)?;
    let manifest_dir = man_path.parent().unwrap_or(Path::new("."));
    let report = evaluate(&params, manifest_dir, &entries)?;

    let json_path = out.join("report.json");
    std::fs::write(&json_path, report.to_json())?;
    let csv_path = out.join("report.csv");
    std::fs::write(&csv_path, report.to_csv())?;
    println!("report_json={}", json_path.display());
    println!("report_csv={}", csv_path.display());
    if let Some(doc) = svg::roc_curves(&report) {
        let svg_path = out.join("roc.svg");
        std::fs::write(&svg_path, doc)?;
        println!("roc_svg={}", svg_path.display());
    }
    for k in &report.kinds {
        let name = k.kind.as_str();
        println!("{name}_n={}", k.n);
        if let Some(a) = k.auc {
            println!("{name}_auc={a}");
        }
        if let Some(e) = k.eer {
            println!("{name}_eer={e}");
        }
        println!("{name}_mae={}", k.mae);
    }
    Ok(())
}

fn metric_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn report_cmd(ctx: &Ctx, inputs: &[PathBuf]) -> Result<()> {
    ctx.warn_unused_seed("report");
    let file = ctx.load_config()?;
    let mut sect = file.report.clone().unwrap_or_default();
    if !inputs.is_empty() {
        sect.inputs = inputs.to_vec();
    }
    if sect.inputs.is_empty() {
        return Err(Error::Config(
            "report needs at least one eval report (argument or [report] inputs)".into(),
        ));
    }
    let out = ctx.out_dir()?;
    let resolved = FileConfig {
        report: Some(ReportSection {
            inputs: sect.inputs.clone(),
        }),
        ..FileConfig::empty()
    };
    let resolved_path = echo_resolved(&resolved, out)?;
    println!("resolved_config={}", resolved_path.display());

    let mut labels: Vec<String> = Vec::new();
    let mut reports: Vec<EvalReport> = Vec::new();
    for path in &sect.inputs {
        let text = std::fs::read_to_string(path)?;
        reports.push(EvalReport::from_json(&text)?);
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("report")
            .to_string();
        let mut label = stem.clone();
        let mut n = 2;
        while labels.contains(&label) {
            label = format!("{stem}-{n}");
            n += 1;
        }
        labels.push(label);
    }

    // Reports must describe the same scenario kinds or the comparison rows
    // would not line up.
    let kinds: Vec<ScenarioKind> = reports[0].kinds.iter().map(|k| k.kind).collect();
    for (label, r) in labels.iter().zip(&reports) {
        let theirs: Vec<ScenarioKind> = r.kinds.iter().map(|k| k.kind).collect();
        if theirs != kinds {
            return Err(Error::Config(format!(
                "report '{label}' covers kinds {theirs:?}, the first report covers {kinds:?}; \
                 comparisons need identical kind sets"
            )));
        }
    }

    let mut csv = String::from("kind,metric");
    for l in &labels {
        csv.push(',');
        csv.push_str(l);
    }
    csv.push('\n');
    for kind in &kinds {
        for metric in ["auc", "eer", "mae"] {
            csv.push_str(kind.as_str());
            csv.push(',');
            csv.push_str(metric);
            for r in &reports {
                let k = r.kind(*kind).expect("kind sets verified equal");
                let cell = match metric {
                    "auc" => metric_cell(k.auc),
                    "eer" => metric_cell(k.eer),
                    _ => k.mae.to_string(),
                };
                csv.push(',');
                csv.push_str(&cell);
            }
            csv.push('\n');
        }
    }
    let csv_path = out.join("comparison.csv");
    std::fs::write(&csv_path, csv)?;
    println!("comparison={}", csv_path.display());

    if kinds.contains(&ScenarioKind::SelfReferencing) {
        let values: Vec<f64> = reports
            .iter()
            .map(|r| r.kind(ScenarioKind::SelfReferencing).expect("verified").mae)
            .collect();
        let chart = svg::mae_bars("self-referencing MAE", &labels, &values);
        let chart_path = out.join("self_referencing_mae.svg");
        std::fs::write(&chart_path, chart)?;
        println!("chart={}", chart_path.display());
        for (label, v) in labels.iter().zip(&values) {
            println!("{label}_self_referencing_mae={v}");
        }
    }
    Ok(())
}
