//! End-to-end synthetic experiment: simulate a dataset and three detectors,
//! run pseudo-label selection on simulated separation output, fit every
//! fusion method on the development half and score all systems on the
//! evaluation half.

use serde::{Deserialize, Serialize};

use crate::decode::{decode_all, PostProcessConfig};
use crate::error::{Error, Result};
use crate::fusion::{
    apply_logistic_fusion_sets, classwise_weights, fit_alpha, fit_logistic_fusion, fuse_average_sets,
    fuse_classwise_sets, sweep_beta, AlphaFit, AlphaObjective, BetaSweep, ClassF1Table, FusionMode,
    LogisticFusionModel,
};
use crate::metrics::{event_f1, psds_many, CollarConfig, PsdsConfig};
use crate::report::{report_tables, ReportTables, SystemResult};
use crate::spl::{assign_pseudo_label, select_all, selection_report, SelectionSummary, DEFAULT_TAU};
use crate::synth::{
    gen_truth, model_seed, pseudo_label_correct, simulate_model, simulate_separation, sources_per_mixture,
    ScenarioConfig,
};
use crate::types::{EventList, FrameGrid};

pub const DEFAULT_BETAS: [f64; 6] = [0.0, 1.0, 2.0, 4.0, 8.0, 16.0];

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub tau: f64,
    pub betas: Vec<f64>,
    /// `None` means the default post-processing for the scenario's classes.
    pub decode: Option<PostProcessConfig>,
    pub collar: CollarConfig,
    pub psds1: PsdsConfig,
    pub psds2: PsdsConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            tau: DEFAULT_TAU,
            betas: DEFAULT_BETAS.to_vec(),
            decode: None,
            collar: CollarConfig::default(),
            psds1: PsdsConfig::psds1(),
            psds2: PsdsConfig::psds2(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagAccuracy {
    pub all_sources: f64,
    pub selected_sources: f64,
    pub n_all: usize,
    pub n_selected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedParameters {
    pub f1_table: ClassF1Table,
    pub beta_sweep: BetaSweep,
    /// Pair combination of the first two models, fitted for reference.
    pub alpha_fit: Option<AlphaFit>,
    pub logistic: LogisticFusionModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub n_dev_clips: usize,
    pub n_eval_clips: usize,
    pub sources_per_mixture: usize,
    pub tables: ReportTables,
    pub selection: SelectionSummary,
    pub tag_accuracy: TagAccuracy,
    pub fitted: FittedParameters,
}

impl ExperimentReport {
    pub fn macro_f1(&self, system: &str) -> Option<f64> {
        self.tables
            .systems
            .iter()
            .find(|s| s.system == system)
            .and_then(|s| s.collar_f1)
    }
}

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Input(format!("stage '{name}' failed: {e}")))
}

fn split<T: Clone>(items: &[T], n_dev: usize) -> (Vec<T>, Vec<T>) {
    (items[..n_dev].to_vec(), items[n_dev..].to_vec())
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let sc = &cfg.scenario;
    stage("config", sc.validate())?;
    if sc.n_clips < 2 {
        return Err(Error::Config("the experiment needs at least 2 clips".into()));
    }
    if sc.models.is_empty() {
        return Err(Error::Config("the experiment needs at least one model".into()));
    }
    let vocab = sc.vocabulary()?;
    let decode_cfg = cfg.decode.clone().unwrap_or_else(|| PostProcessConfig::defaults(vocab.len()));

    let (truth, weak) = stage("simulate", gen_truth(sc))?;
    let clip_ids = sc.clip_ids();
    let n_dev = sc.n_clips / 2;
    let (dev_ids, eval_ids) = split(&clip_ids, n_dev);
    let keep = |ids: &[String]| {
        let set: std::collections::HashSet<&str> = ids.iter().map(String::as_str).collect();
        EventList::from_trusted(
            truth
                .iter()
                .filter(|e| set.contains(e.clip_id.as_str()))
                .cloned()
                .collect(),
        )
    };
    let (dev_truth, eval_truth) = (keep(&dev_ids), keep(&eval_ids));

    // separation + selective pseudo-labeling
    let n_sources = sources_per_mixture(&truth, &clip_ids);
    let sep = stage(
        "separate",
        simulate_separation(&truth, &clip_ids, &vocab, &sc.separation, n_sources, sc.seed),
    )?;
    let selections = stage("spl", select_all(&sep.manifest, &sep.tags, &weak, &vocab, cfg.tau))?;
    let selected: std::collections::HashSet<&str> = selections
        .iter()
        .flat_map(|r| r.selected.iter().map(|s| s.source_id.as_str()))
        .collect();
    let mut correct_all = 0;
    let mut correct_sel = 0;
    for (tag, st) in sep.tags.iter().zip(&sep.sources) {
        let ok = pseudo_label_correct(&assign_pseudo_label(tag, &vocab, cfg.tau)?.verdict, st);
        correct_all += ok as usize;
        if selected.contains(tag.source_id.as_str()) {
            correct_sel += ok as usize;
        }
    }
    let frac = |a: usize, n: usize| if n == 0 { 0.0 } else { a as f64 / n as f64 };
    let tag_accuracy = TagAccuracy {
        all_sources: frac(correct_all, sep.tags.len()),
        selected_sources: frac(correct_sel, selected.len()),
        n_all: sep.tags.len(),
        n_selected: selected.len(),
    };

    // detector posteriors
    let mut dev_sets: Vec<Vec<FrameGrid>> = Vec::new();
    let mut eval_sets: Vec<Vec<FrameGrid>> = Vec::new();
    for (m, skill) in sc.models.iter().enumerate() {
        let grids = stage("models", simulate_model(&truth, &clip_ids, skill, sc, model_seed(sc.seed, m)))?;
        let (d, e) = split(&grids, n_dev);
        dev_sets.push(d);
        eval_sets.push(e);
    }
    let model_ids: Vec<String> = sc.models.iter().map(|m| m.id.clone()).collect();

    // fit fusion parameters on the development half
    let f1_table = stage(
        "fit",
        ClassF1Table::from_dev(model_ids.clone(), &dev_sets, &dev_truth, &vocab, &decode_cfg, &cfg.collar),
    )?;
    let beta_sweep = stage(
        "fit",
        sweep_beta(&dev_sets, &f1_table, &dev_truth, &vocab, &cfg.betas, &decode_cfg, &cfg.collar),
    )?;
    let logistic = stage("fit", fit_logistic_fusion(&dev_sets, &dev_truth, &vocab))?;
    let alpha_fit = if dev_sets.len() >= 2 {
        Some(stage(
            "fit",
            fit_alpha(
                &dev_sets[0],
                &dev_sets[1],
                &dev_truth,
                &vocab,
                &decode_cfg,
                &cfg.collar,
                AlphaObjective::MacroCollarF1,
            ),
        )?)
    } else {
        None
    };

    // systems on the evaluation half
    let mut systems: Vec<(String, Vec<FrameGrid>)> = model_ids
        .iter()
        .cloned()
        .zip(eval_sets.iter().cloned())
        .collect();
    systems.push(("average".into(), stage("fuse", fuse_average_sets(&eval_sets))?));
    systems.push((
        "logistic".into(),
        stage("fuse", apply_logistic_fusion_sets(&logistic, &eval_sets))?,
    ));
    let weights = classwise_weights(&f1_table, beta_sweep.beta, FusionMode::Normalized)?;
    systems.push(("classwise".into(), stage("fuse", fuse_classwise_sets(&eval_sets, &weights))?));

    let mut results = Vec::with_capacity(systems.len());
    for (name, grids) in &systems {
        let est = stage("decode", decode_all(grids, &decode_cfg, &vocab))?;
        let f1 = stage("score", event_f1(&eval_truth, &est, &vocab, &cfg.collar))?;
        let mut psds = stage(
            "score",
            psds_many(grids, &eval_truth, &vocab, &decode_cfg, &[&cfg.psds1, &cfg.psds2]),
        )?;
        let psds2 = psds.pop();
        let psds1 = psds.pop();
        results.push(SystemResult {
            name: name.clone(),
            f1: Some(f1),
            psds1,
            psds2,
        });
    }

    Ok(ExperimentReport {
        seed: sc.seed,
        n_dev_clips: dev_ids.len(),
        n_eval_clips: eval_ids.len(),
        sources_per_mixture: n_sources,
        tables: report_tables(&results),
        selection: selection_report(&selections),
        tag_accuracy,
        fitted: FittedParameters {
            f1_table,
            beta_sweep,
            alpha_fit,
            logistic,
        },
    })
}
