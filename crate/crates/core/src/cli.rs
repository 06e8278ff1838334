//! The `sedfuse` command line.
//!
//! Exit codes: 0 on success, 2 for usage or validation errors, 1 for
//! internal failures.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::decode::{decode_all, DecodeConfigFile, PostProcessConfig};
use crate::error::{Error, Result};
use crate::experiment::{run_experiment, ExperimentConfig, DEFAULT_BETAS};
use crate::formats::{
    self, infer_vocab_from_grids, infer_vocab_from_tags, parse_events, parse_framegrids, parse_manifest,
    parse_tags, parse_weak_labels, read_json, write_atomic, write_events, write_framegrids, write_json,
};
use crate::fusion::{
    apply_logistic_fusion_sets, classwise_weights, combine_pair_sets, fit_alpha, fit_logistic_fusion,
    fuse_average_sets, fuse_classwise_sets, sweep_beta, AlphaObjective, ClassF1Table, FusionMode,
    LogisticFusionModel, ParameterCurve,
};
use crate::metrics::{event_f1, psds_many, CollarConfig, F1Report, PsdsConfig, PsdsReport};
use crate::report::{report_tables, ReportTables, SystemResult};
use crate::spl::{select_all, selection_report, selections_to_string, DEFAULT_TAU};
use crate::synth::{
    gen_truth, model_seed, simulate_model, simulate_separation, sources_per_mixture, ScenarioConfig,
};
use crate::types::{ClassVocabulary, OTHER_LABEL};

pub const THREADS_ENV: &str = "SEDFUSE_THREADS";
pub const MANIFEST_FILE: &str = "run_manifest.json";

#[derive(Debug, Parser)]
#[command(name = "sedfuse", version, about = "Sound event detection fusion and scoring toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset (events, weak labels, grids, tags, manifest).
    Simulate(SimulateArgs),
    /// Select high-confidence single-event pseudo-labels for separated sources.
    Spl(SplArgs),
    /// Fuse frame posteriors from several systems.
    Fuse(FuseArgs),
    /// Decode frame posteriors into events.
    Decode(DecodeArgs),
    /// Score detections: collar-based F1, PSDS1, PSDS2.
    Score(ScoreArgs),
    /// Run the full synthetic experiment and write the result tables.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct VocabArgs {
    /// Comma-separated class list; inferred from the inputs when omitted.
    #[arg(long, value_delimiter = ',')]
    pub classes: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct DecodeOptions {
    /// decode_cfg.json with per-class thresholds and median windows.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// A threshold for every class (`0.5`) or per class (`Speech=0.4,Dog=0.6`).
    #[arg(long)]
    pub thresholds: Option<String>,
    /// A window for every class (`7`) or per class (`Speech=5,Dog=9`).
    #[arg(long = "median-windows")]
    pub median_windows: Option<String>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SplArgs {
    #[arg(long)]
    pub tags: PathBuf,
    #[arg(long)]
    pub weak: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Strong labels whose classes are added to each mixture's known labels.
    #[arg(long)]
    pub events: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_TAU)]
    pub tau: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub vocab: VocabArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FuseMode {
    Average,
    Logistic,
    Classwise,
    Pair,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightMode {
    Normalized,
    Faithful,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    #[arg(long, value_enum)]
    pub mode: FuseMode,
    /// Input grid files, one per system, clip-aligned.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long = "f1-table")]
    pub f1_table: Option<PathBuf>,
    /// One value, or a comma-separated list to sweep (requires --truth).
    #[arg(long)]
    pub beta: Option<String>,
    /// A value in [0, 1], or `fit` (requires --truth).
    #[arg(long)]
    pub alpha: Option<String>,
    #[arg(long = "weight-mode", value_enum, default_value = "normalized")]
    pub weight_mode: WeightMode,
    /// Strong labels of the input clips, used for fitting.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// A fitted logistic fusion model to apply.
    #[arg(long = "logistic-model")]
    pub logistic_model: Option<PathBuf>,
    #[command(flatten)]
    pub decode: DecodeOptions,
    #[command(flatten)]
    pub vocab: VocabArgs,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    #[arg(long)]
    pub grids: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub decode: DecodeOptions,
    #[command(flatten)]
    pub vocab: VocabArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    F1,
    Psds1,
    Psds2,
    All,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Decoded detections (events.tsv) for collar F1.
    #[arg(long)]
    pub est: Option<PathBuf>,
    /// Frame posteriors for PSDS (and for F1 when --est is absent).
    #[arg(long)]
    pub grids: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "all")]
    pub metric: Metric,
    /// JSON object with optional "psds1" and "psds2" configurations.
    #[arg(long = "psds-config")]
    pub psds_config: Option<PathBuf>,
    /// Output directory for report.json and report.txt.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "system")]
    pub name: String,
    #[command(flatten)]
    pub decode: DecodeOptions,
    #[command(flatten)]
    pub vocab: VocabArgs,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// scenario.json; defaults are used when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_TAU)]
    pub tau: f64,
    /// Comma-separated beta values to sweep on the development half.
    #[arg(long, value_delimiter = ',')]
    pub beta: Option<Vec<f64>>,
    #[arg(long = "psds-config")]
    pub psds_config: Option<PathBuf>,
    /// decode_cfg.json with per-class thresholds and median windows.
    #[arg(long = "decode-config")]
    pub decode_config: Option<PathBuf>,
    #[arg(long)]
    pub thresholds: Option<String>,
    #[arg(long = "median-windows")]
    pub median_windows: Option<String>,
}

/// Written next to every output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub configs: Vec<String>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub wall_clock_unix_seconds: f64,
}

impl RunManifest {
    fn new(subcommand: &str) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            configs: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            seed: None,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_clock_unix_seconds: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0.0, |d| d.as_secs_f64()),
        }
    }

    fn write_in(&self, dir: &Path) -> Result<()> {
        write_json(self, dir.join(MANIFEST_FILE))
    }

    /// `<file>.manifest.json` next to a single-file output.
    fn write_beside(&self, output: &Path) -> Result<()> {
        let mut name = output.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        write_json(self, output.with_file_name(name))
    }
}

fn show(p: &Path) -> String {
    p.display().to_string()
}

/// `psds_cfg.json`: either or both presets may be overridden.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsdsConfigFile {
    #[serde(default)]
    pub psds1: Option<PsdsConfig>,
    #[serde(default)]
    pub psds2: Option<PsdsConfig>,
}

impl PsdsConfigFile {
    fn resolve(path: Option<&Path>) -> Result<(PsdsConfig, PsdsConfig)> {
        let file: PsdsConfigFile = match path {
            Some(p) => read_json(p)?,
            None => PsdsConfigFile::default(),
        };
        let p1 = file.psds1.unwrap_or_else(PsdsConfig::psds1);
        let p2 = file.psds2.unwrap_or_else(PsdsConfig::psds2);
        p1.validate()?;
        p2.validate()?;
        Ok((p1, p2))
    }
}

/// Parses `0.5` or `A=0.4,B=0.6` into a map over `vocab` (None = keep).
fn per_class_values<T: std::str::FromStr + Copy>(
    spec: &str,
    vocab: &ClassVocabulary,
    flag: &str,
) -> Result<Vec<Option<T>>> {
    let bad = |s: &str| Error::Config(format!("{flag}: cannot parse '{s}'"));
    if !spec.contains('=') {
        let v: T = spec.trim().parse().map_err(|_| bad(spec))?;
        return Ok(vec![Some(v); vocab.len()]);
    }
    let mut out = vec![None; vocab.len()];
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (name, value) = item.split_once('=').ok_or_else(|| bad(item))?;
        let j = vocab.index_of(name.trim()).ok_or_else(|| Error::Vocabulary {
            location: flag.to_string(),
            class: name.trim().to_string(),
        })?;
        out[j] = Some(value.trim().parse().map_err(|_| bad(item))?);
    }
    Ok(out)
}

fn decode_config(opts: &DecodeOptions, vocab: &ClassVocabulary, manifest: &mut RunManifest) -> Result<PostProcessConfig> {
    let base = match &opts.config {
        Some(p) => {
            manifest.configs.push(show(p));
            let file: DecodeConfigFile = read_json(p)?;
            PostProcessConfig::from_file(&file, vocab)?
        }
        None => PostProcessConfig::defaults(vocab.len()),
    };
    let mut thresholds = base.thresholds().to_vec();
    let mut windows = base.windows().to_vec();
    if let Some(spec) = &opts.thresholds {
        for (t, v) in thresholds.iter_mut().zip(per_class_values::<f64>(spec, vocab, "--thresholds")?) {
            if let Some(v) = v {
                *t = v;
            }
        }
    }
    if let Some(spec) = &opts.median_windows {
        for (w, v) in windows.iter_mut().zip(per_class_values::<usize>(spec, vocab, "--median-windows")?) {
            if let Some(v) = v {
                *w = v;
            }
        }
    }
    PostProcessConfig::new(thresholds, windows)
}

fn explicit_vocab(args: &VocabArgs) -> Result<Option<ClassVocabulary>> {
    args.classes.as_ref().map(ClassVocabulary::new).transpose()
}

/// Sorted distinct labels of an events file.
fn infer_vocab_from_events(path: &Path) -> Result<ClassVocabulary> {
    let text = formats::read_to_string(path)?;
    let mut names: Vec<String> = text
        .lines()
        .skip(1)
        .filter_map(|l| l.trim_end_matches('\r').split('\t').nth(3))
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect();
    names.sort();
    names.dedup();
    if names.is_empty() {
        return Err(Error::Input(format!(
            "{}: no events; pass --classes to name the vocabulary",
            path.display()
        )));
    }
    ClassVocabulary::new(names)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let mut manifest = RunManifest::new("simulate");
    manifest.configs.push(show(&args.config));
    let mut cfg: ScenarioConfig = read_json(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    manifest.seed = Some(cfg.seed);
    let vocab = cfg.vocabulary()?;
    ensure_dir(&args.out)?;

    let (truth, weak) = gen_truth(&cfg)?;
    let ids = cfg.clip_ids();
    let mut outputs = vec![
        ("events.tsv".to_string(), formats::events_to_string(&truth)),
        ("weak.tsv".to_string(), formats::weak_labels_to_string(&weak, &vocab)),
    ];
    for (m, skill) in cfg.models.iter().enumerate() {
        let grids = simulate_model(&truth, &ids, skill, &cfg, model_seed(cfg.seed, m))?;
        let name = if cfg.models.len() == 1 {
            "grids.jsonl".to_string()
        } else {
            format!("grids_{}.jsonl", skill.id)
        };
        outputs.push((name, formats::framegrids_to_string(&grids, &vocab)?));
    }
    let n = sources_per_mixture(&truth, &ids);
    let sep = simulate_separation(&truth, &ids, &vocab, &cfg.separation, n, cfg.seed)?;
    outputs.push(("tags.jsonl".into(), formats::tags_to_string(&sep.tags, &vocab)));
    outputs.push(("sep_manifest.jsonl".into(), formats::manifest_to_string(&sep.manifest)));
    for (name, text) in &outputs {
        let path = args.out.join(name);
        write_atomic(&path, text.as_bytes())?;
        manifest.outputs.push(show(&path));
    }
    manifest.write_in(&args.out)?;
    println!(
        "wrote {} clips, {} events, {} separated sources to {}",
        cfg.n_clips,
        truth.len(),
        sep.tags.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_spl(args: &SplArgs) -> Result<()> {
    let mut manifest = RunManifest::new("spl");
    let manifest_data = parse_manifest(&args.manifest)?;
    let vocab = match explicit_vocab(&args.vocab)? {
        Some(v) => v,
        None if manifest_data.is_empty() => {
            // nothing to select from; still validate the flags and write an empty result
            if !(args.tau > 0.0 && args.tau < 1.0) {
                return Err(Error::Config(format!("tau {} is not in (0, 1)", args.tau)));
            }
            write_atomic(&args.out, b"")?;
            manifest.outputs.push(show(&args.out));
            manifest.write_beside(&args.out)?;
            println!("{}", serde_json::to_string_pretty(&selection_report(&[])).unwrap());
            return Ok(());
        }
        None => infer_vocab_from_tags(&args.tags, OTHER_LABEL)?,
    };
    let tags = parse_tags(&args.tags, &vocab)?;
    let mut weak = parse_weak_labels(&args.weak, &vocab)?;
    manifest.inputs.extend([show(&args.tags), show(&args.weak), show(&args.manifest)]);
    if let Some(p) = &args.events {
        let strong = parse_events(p, &vocab)?;
        weak.union_with(&crate::types::WeakLabelSet::from_events(&strong));
        manifest.inputs.push(show(p));
    }
    let results = select_all(&manifest_data, &tags, &weak, &vocab, args.tau)?;
    write_atomic(&args.out, selections_to_string(&results).as_bytes())?;
    manifest.outputs.push(show(&args.out));
    manifest.write_beside(&args.out)?;
    println!("{}", serde_json::to_string_pretty(&selection_report(&results)).unwrap());
    Ok(())
}

fn write_curves(curves: &[ParameterCurve], out: &Path, manifest: &mut RunManifest) -> Result<()> {
    let path = parent_dir(out).join("curves.json");
    write_json(&curves, &path)?;
    manifest.outputs.push(show(&path));
    Ok(())
}

fn cmd_fuse(args: &FuseArgs) -> Result<()> {
    let mut manifest = RunManifest::new("fuse");
    let vocab = match explicit_vocab(&args.vocab)? {
        Some(v) => v,
        None => infer_vocab_from_grids(&args.inputs[0])?,
    };
    let usage = |msg: &str| Err(Error::Config(format!("--mode {:?}: {msg}", args.mode).to_lowercase()));
    match args.mode {
        FuseMode::Pair if args.inputs.len() != 2 => return usage("needs exactly two inputs"),
        FuseMode::Pair if args.alpha.is_none() => return usage("requires --alpha"),
        FuseMode::Classwise if args.f1_table.is_none() || args.beta.is_none() => {
            return usage("requires --f1-table and --beta")
        }
        FuseMode::Logistic if args.logistic_model.is_none() && args.truth.is_none() => {
            return usage("requires --logistic-model or --truth")
        }
        _ => {}
    }
    let sets = args
        .inputs
        .iter()
        .map(|p| {
            manifest.inputs.push(show(p));
            parse_framegrids(p, &vocab)
        })
        .collect::<Result<Vec<_>>>()?;
    let truth = args
        .truth
        .as_ref()
        .map(|p| {
            manifest.inputs.push(show(p));
            parse_events(p, &vocab)
        })
        .transpose()?;
    let collar = CollarConfig::default();
    let fused = match args.mode {
        FuseMode::Average => fuse_average_sets(&sets)?,
        FuseMode::Pair => {
            let spec = args.alpha.as_deref().unwrap();
            let alpha = if spec == "fit" {
                let truth = truth.as_ref().ok_or_else(|| Error::Config("--alpha fit requires --truth".into()))?;
                let dcfg = decode_config(&args.decode, &vocab, &mut manifest)?;
                let fit = fit_alpha(
                    &sets[0],
                    &sets[1],
                    truth,
                    &vocab,
                    &dcfg,
                    &collar,
                    AlphaObjective::MacroCollarF1,
                )?;
                write_curves(&[fit.curve()], &args.out, &mut manifest)?;
                eprintln!("fitted alpha = {}", fit.alpha);
                fit.alpha
            } else {
                spec.parse()
                    .map_err(|_| Error::Config(format!("--alpha: cannot parse '{spec}'")))?
            };
            combine_pair_sets(&sets[0], &sets[1], alpha)?
        }
        FuseMode::Classwise => {
            let table_path = args.f1_table.as_ref().unwrap();
            manifest.configs.push(show(table_path));
            let table: ClassF1Table = read_json(table_path)?;
            let table = table.aligned_to(&vocab)?;
            if table.n_models() != sets.len() {
                return Err(Error::Config(format!(
                    "F1 table has {} models, {} inputs given",
                    table.n_models(),
                    sets.len()
                )));
            }
            let betas: Vec<f64> = args
                .beta
                .as_deref()
                .unwrap()
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("--beta: cannot parse '{s}'")))
                })
                .collect::<Result<_>>()?;
            let beta = if betas.len() == 1 {
                betas[0]
            } else {
                let truth = truth
                    .as_ref()
                    .ok_or_else(|| Error::Config("a --beta sweep requires --truth".into()))?;
                let dcfg = decode_config(&args.decode, &vocab, &mut manifest)?;
                let sweep = sweep_beta(&sets, &table, truth, &vocab, &betas, &dcfg, &collar)?;
                write_curves(&[sweep.curve()], &args.out, &mut manifest)?;
                eprintln!("selected beta = {}", sweep.beta);
                sweep.beta
            };
            let mode = match args.weight_mode {
                WeightMode::Normalized => FusionMode::Normalized,
                WeightMode::Faithful => FusionMode::Faithful,
            };
            fuse_classwise_sets(&sets, &classwise_weights(&table, beta, mode)?)?
        }
        FuseMode::Logistic => {
            let model: LogisticFusionModel = match (&args.logistic_model, &truth) {
                (Some(p), _) => {
                    manifest.configs.push(show(p));
                    read_json(p)?
                }
                (None, Some(truth)) => {
                    let model = fit_logistic_fusion(&sets, truth, &vocab)?;
                    let mut name = args.out.file_name().unwrap_or_default().to_os_string();
                    name.push(".logistic.json");
                    let path = args.out.with_file_name(name);
                    write_json(&model, &path)?;
                    manifest.outputs.push(show(&path));
                    model
                }
                (None, None) => unreachable!("checked above"),
            };
            apply_logistic_fusion_sets(&model, &sets)?
        }
    };
    write_framegrids(&fused, &vocab, &args.out)?;
    manifest.outputs.push(show(&args.out));
    manifest.write_beside(&args.out)?;
    Ok(())
}

fn cmd_decode(args: &DecodeArgs) -> Result<()> {
    let mut manifest = RunManifest::new("decode");
    let vocab = match explicit_vocab(&args.vocab)? {
        Some(v) => v,
        None => infer_vocab_from_grids(&args.grids)?,
    };
    let cfg = decode_config(&args.decode, &vocab, &mut manifest)?;
    let grids = parse_framegrids(&args.grids, &vocab)?;
    manifest.inputs.push(show(&args.grids));
    let events = decode_all(&grids, &cfg, &vocab)?;
    write_events(&events, &args.out)?;
    manifest.outputs.push(show(&args.out));
    manifest.write_beside(&args.out)?;
    Ok(())
}

/// Contents of `report.json` written by `score`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub tables: ReportTables,
    pub f1: Option<F1Report>,
    pub psds1: Option<PsdsReport>,
    pub psds2: Option<PsdsReport>,
}

fn cmd_score(args: &ScoreArgs) -> Result<()> {
    let mut manifest = RunManifest::new("score");
    let vocab = match explicit_vocab(&args.vocab)? {
        Some(v) => v,
        None => match &args.grids {
            Some(g) => infer_vocab_from_grids(g)?,
            None => infer_vocab_from_events(&args.reference)?,
        },
    };
    let reference = parse_events(&args.reference, &vocab)?;
    manifest.inputs.push(show(&args.reference));
    if reference.is_empty() {
        return Err(Error::Input(format!("{}: reference has no events", args.reference.display())));
    }
    let want_f1 = matches!(args.metric, Metric::F1 | Metric::All);
    let want_psds1 = matches!(args.metric, Metric::Psds1 | Metric::All);
    let want_psds2 = matches!(args.metric, Metric::Psds2 | Metric::All);
    let dcfg = decode_config(&args.decode, &vocab, &mut manifest)?;
    let grids = args
        .grids
        .as_ref()
        .map(|p| {
            manifest.inputs.push(show(p));
            parse_framegrids(p, &vocab)
        })
        .transpose()?;

    let f1 = if want_f1 {
        let est = match (&args.est, &grids) {
            (Some(p), _) => {
                manifest.inputs.push(show(p));
                parse_events(p, &vocab)?
            }
            (None, Some(g)) => decode_all(g, &dcfg, &vocab)?,
            (None, None) => return Err(Error::Config("F1 needs --est or --grids".into())),
        };
        Some(event_f1(&reference, &est, &vocab, &CollarConfig::default())?)
    } else {
        None
    };
    let (mut psds1, mut psds2) = (None, None);
    if want_psds1 || want_psds2 {
        let grids = grids
            .as_ref()
            .ok_or_else(|| Error::Config("PSDS needs --grids".into()))?;
        if let Some(p) = &args.psds_config {
            manifest.configs.push(show(p));
        }
        let (c1, c2) = PsdsConfigFile::resolve(args.psds_config.as_deref())?;
        let mut cfgs = Vec::new();
        if want_psds1 {
            cfgs.push(&c1);
        }
        if want_psds2 {
            cfgs.push(&c2);
        }
        let mut reports = psds_many(grids, &reference, &vocab, &dcfg, &cfgs)?.into_iter();
        if want_psds1 {
            psds1 = reports.next();
        }
        if want_psds2 {
            psds2 = reports.next();
        }
    }
    let tables = report_tables(&[SystemResult {
        name: args.name.clone(),
        f1: f1.clone(),
        psds1: psds1.clone(),
        psds2: psds2.clone(),
    }]);
    let text = tables.render_text();
    let report = ScoreReport {
        tables,
        f1,
        psds1,
        psds2,
    };
    ensure_dir(&args.out)?;
    write_json(&report, args.out.join("report.json"))?;
    write_atomic(args.out.join("report.txt"), text.as_bytes())?;
    manifest.outputs.extend([show(&args.out.join("report.json")), show(&args.out.join("report.txt"))]);
    manifest.write_in(&args.out)?;
    print!("{text}");
    Ok(())
}

fn cmd_experiment(args: &ExperimentArgs) -> Result<()> {
    let mut manifest = RunManifest::new("experiment");
    let mut scenario: ScenarioConfig = match &args.config {
        Some(p) => {
            manifest.configs.push(show(p));
            read_json(p)?
        }
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    scenario.validate()?;
    manifest.seed = Some(scenario.seed);
    let vocab = scenario.vocabulary()?;
    let decode_opts = DecodeOptions {
        config: args.decode_config.clone(),
        thresholds: args.thresholds.clone(),
        median_windows: args.median_windows.clone(),
    };
    let decode = decode_config(&decode_opts, &vocab, &mut manifest)?;
    if let Some(p) = &args.psds_config {
        manifest.configs.push(show(p));
    }
    let (psds1, psds2) = PsdsConfigFile::resolve(args.psds_config.as_deref())?;
    let cfg = ExperimentConfig {
        scenario,
        tau: args.tau,
        betas: args.beta.clone().unwrap_or_else(|| DEFAULT_BETAS.to_vec()),
        decode: Some(decode),
        psds1,
        psds2,
        ..Default::default()
    };
    let report = run_experiment(&cfg)?;
    ensure_dir(&args.out)?;
    let text = report.tables.render_text();
    let outputs = [
        ("report.json", {
            let mut s = serde_json::to_string_pretty(&report).expect("report serializes");
            s.push('\n');
            s
        }),
        ("report.txt", text.clone()),
        ("f1_table.json", {
            let mut s = serde_json::to_string_pretty(&report.fitted.f1_table).expect("table serializes");
            s.push('\n');
            s
        }),
        ("curves.json", {
            let mut curves = vec![report.fitted.beta_sweep.curve()];
            curves.extend(report.fitted.alpha_fit.as_ref().map(|a| a.curve()));
            let mut s = serde_json::to_string_pretty(&curves).expect("curves serialize");
            s.push('\n');
            s
        }),
    ];
    for (name, contents) in &outputs {
        let path = args.out.join(name);
        write_atomic(&path, contents.as_bytes())?;
        manifest.outputs.push(show(&path));
    }
    manifest.write_in(&args.out)?;
    print!("{text}");
    println!(
        "\nSPL: {} of {} sources selected; tag accuracy {:.3} (selected) vs {:.3} (all)",
        report.selection.selected,
        report.selection.total_sources,
        report.tag_accuracy.selected_sources,
        report.tag_accuracy.all_sources
    );
    Ok(())
}

/// Maps an error to the documented exit code.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { source, .. } if source.kind() != std::io::ErrorKind::NotFound => 1,
        _ => 2,
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            // fails only if a pool was already built in this process
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Spl(a) => cmd_spl(a),
        Command::Fuse(a) => cmd_fuse(a),
        Command::Decode(a) => cmd_decode(a),
        Command::Score(a) => cmd_score(a),
        Command::Experiment(a) => cmd_experiment(a),
    }
}

/// Parses arguments, runs the subcommand and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    configure_threads();
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn per_class_values_accept_scalar_and_map() {
        let v = ClassVocabulary::new(["A", "B"]).unwrap();
        assert_eq!(per_class_values::<f64>("0.3", &v, "--t").unwrap(), vec![Some(0.3), Some(0.3)]);
        assert_eq!(per_class_values::<usize>("B=5", &v, "--w").unwrap(), vec![None, Some(5)]);
        assert!(per_class_values::<f64>("C=0.1", &v, "--t").is_err());
        assert!(per_class_values::<f64>("x", &v, "--t").is_err());
    }

    #[test]
    fn io_errors_map_to_exit_codes() {
        let missing = Error::Io {
            path: "x".into(),
            source: std::io::Error::from(std::io::ErrorKind::NotFound),
        };
        let denied = Error::Io {
            path: "x".into(),
            source: std::io::Error::from(std::io::ErrorKind::PermissionDenied),
        };
        assert_eq!(exit_code(&missing), 2);
        assert_eq!(exit_code(&denied), 1);
        assert_eq!(exit_code(&Error::Config("bad".into())), 2);
    }
}
