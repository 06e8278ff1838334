//! Event-based scoring: collar F1 with maximum bipartite matching, and the
//! polyphonic sound detection score (PSDS) over an operating-point sweep.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decode::{decode_all, PostProcessConfig};
use crate::error::{Error, Result};
use crate::types::{ClassVocabulary, Event, EventList, FrameGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollarConfig {
    pub onset_collar: f64,
    pub offset_collar_min: f64,
    pub offset_collar_ratio: f64,
}

impl Default for CollarConfig {
    fn default() -> Self {
        Self {
            onset_collar: 0.2,
            offset_collar_min: 0.2,
            offset_collar_ratio: 0.2,
        }
    }
}

impl CollarConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.onset_collar, self.offset_collar_min, self.offset_collar_ratio]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("collars must be non-negative: {self:?}")))
        }
    }

    /// Whether `est` falls within the onset and offset collars of `reference`.
    pub fn compatible(&self, reference: &Event, est: &Event) -> bool {
        let offset_collar = self
            .offset_collar_min
            .max(self.offset_collar_ratio * reference.duration());
        (est.onset - reference.onset).abs() <= self.onset_collar
            && (est.offset - reference.offset).abs() <= offset_collar
    }
}

/// Maximum-cardinality matching in a bipartite graph given as adjacency
/// lists from left to right vertices. Returns `right_match[r] = Some(l)`.
pub fn max_bipartite_matching(adj: &[Vec<usize>], n_right: usize) -> Vec<Option<usize>> {
    fn augment(
        l: usize,
        adj: &[Vec<usize>],
        seen: &mut [bool],
        right_match: &mut [Option<usize>],
    ) -> bool {
        for &r in &adj[l] {
            if seen[r] {
                continue;
            }
            seen[r] = true;
            if right_match[r].is_none_or(|other| augment(other, adj, seen, right_match)) {
                right_match[r] = Some(l);
                return true;
            }
        }
        false
    }

    let mut right_match = vec![None; n_right];
    let mut seen = vec![false; n_right];
    for l in 0..adj.len() {
        seen.iter_mut().for_each(|s| *s = false);
        augment(l, adj, &mut seen, &mut right_match);
    }
    right_match
}

/// Matched `(reference index, estimate index)` pairs into the original
/// lists, sorted by reference index.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Matching {
    pub pairs: Vec<(usize, usize)>,
}

impl Matching {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

fn group_indices(list: &EventList) -> BTreeMap<(&str, &str), Vec<usize>> {
    let mut groups: BTreeMap<(&str, &str), Vec<usize>> = BTreeMap::new();
    for (i, e) in list.iter().enumerate() {
        groups
            .entry((e.clip_id.as_str(), e.class.as_str()))
            .or_default()
            .push(i);
    }
    groups
}

/// One-to-one matching of estimates to references under the collar rule,
/// maximal within every (clip, class) group.
pub fn match_events(reference: &EventList, estimated: &EventList, cfg: &CollarConfig) -> Matching {
    let ref_groups = group_indices(reference);
    let est_groups = group_indices(estimated);
    let mut pairs = Vec::new();
    for (key, refs) in &ref_groups {
        let Some(ests) = est_groups.get(key) else {
            continue;
        };
        let adj: Vec<Vec<usize>> = refs
            .iter()
            .map(|&r| {
                (0..ests.len())
                    .filter(|&j| cfg.compatible(&reference.events()[r], &estimated.events()[ests[j]]))
                    .collect()
            })
            .collect();
        for (j, m) in max_bipartite_matching(&adj, ests.len()).into_iter().enumerate() {
            if let Some(i) = m {
                pairs.push((refs[i], ests[j]));
            }
        }
    }
    pairs.sort_unstable();
    Matching { pairs }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub class: String,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

impl ClassScore {
    pub fn from_counts(class: impl Into<String>, tp: usize, fp: usize, fn_: usize) -> Self {
        let precision = ratio(tp as f64, (tp + fp) as f64);
        let recall = ratio(tp as f64, (tp + fn_) as f64);
        Self {
            class: class.into(),
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1: ratio(2.0 * precision * recall, precision + recall),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Report {
    pub classes: Vec<ClassScore>,
    pub macro_f1: f64,
}

impl F1Report {
    pub fn class(&self, name: &str) -> Option<&ClassScore> {
        self.classes.iter().find(|c| c.class == name)
    }
}

/// Collar-based event F1 per class; macro F1 is the unweighted mean over
/// every vocabulary class.
pub fn event_f1(
    reference: &EventList,
    estimated: &EventList,
    vocab: &ClassVocabulary,
    cfg: &CollarConfig,
) -> Result<F1Report> {
    cfg.validate()?;
    for e in reference.iter().chain(estimated.iter()) {
        if !vocab.contains(&e.class) {
            return Err(Error::Vocabulary {
                location: format!("clip '{}'", e.clip_id),
                class: e.class.clone(),
            });
        }
    }
    let matching = match_events(reference, estimated, cfg);
    let c = vocab.len();
    let mut n_ref = vec![0usize; c];
    let mut n_est = vec![0usize; c];
    let mut tp = vec![0usize; c];
    for e in reference {
        n_ref[vocab.index_of(&e.class).unwrap()] += 1;
    }
    for e in estimated {
        n_est[vocab.index_of(&e.class).unwrap()] += 1;
    }
    for &(r, _) in &matching.pairs {
        tp[vocab.index_of(&reference.events()[r].class).unwrap()] += 1;
    }
    let classes: Vec<ClassScore> = (0..c)
        .map(|i| ClassScore::from_counts(vocab.name(i), tp[i], n_est[i] - tp[i], n_ref[i] - tp[i]))
        .collect();
    let macro_f1 = classes.iter().map(|s| s.f1).sum::<f64>() / c as f64;
    Ok(F1Report { classes, macro_f1 })
}

// ---------------------------------------------------------------------------
// PSDS

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsdsConfig {
    pub dtc: f64,
    pub gtc: f64,
    #[serde(default = "default_cttc")]
    pub cttc: f64,
    #[serde(default)]
    pub alpha_ct: f64,
    #[serde(default = "default_alpha_st")]
    pub alpha_st: f64,
    #[serde(default = "default_e_max")]
    pub e_max: f64,
    #[serde(default = "default_operating_points")]
    pub operating_points: Vec<f64>,
}

fn default_cttc() -> f64 {
    0.3
}
fn default_alpha_st() -> f64 {
    1.0
}
fn default_e_max() -> f64 {
    100.0
}
fn default_operating_points() -> Vec<f64> {
    linear_operating_points(50, 0.01, 0.99)
}

/// `n` thresholds evenly spaced on `[lo, hi]`.
pub fn linear_operating_points(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n).map(|i| lo + i as f64 * step).collect()
        }
    }
}

impl PsdsConfig {
    pub fn psds1() -> Self {
        Self {
            dtc: 0.7,
            gtc: 0.7,
            cttc: default_cttc(),
            alpha_ct: 0.0,
            alpha_st: 1.0,
            e_max: 100.0,
            operating_points: default_operating_points(),
        }
    }

    pub fn psds2() -> Self {
        Self {
            dtc: 0.1,
            gtc: 0.1,
            cttc: 0.3,
            alpha_ct: 0.5,
            alpha_st: 1.0,
            e_max: 100.0,
            operating_points: default_operating_points(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("dtc", self.dtc), ("gtc", self.gtc), ("cttc", self.cttc)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Config(format!("{name} = {v} is not in (0, 1]")));
            }
        }
        for (name, v) in [("alpha_ct", self.alpha_ct), ("alpha_st", self.alpha_st)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} = {v} must be >= 0")));
            }
        }
        if !(self.e_max.is_finite() && self.e_max > 0.0) {
            return Err(Error::Config(format!("e_max = {} must be positive", self.e_max)));
        }
        if self.operating_points.is_empty() {
            return Err(Error::Config("no operating points".into()));
        }
        for w in self.operating_points.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Config("operating points must be strictly increasing".into()));
            }
        }
        if self.operating_points.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
            return Err(Error::Config("operating points must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPointSummary {
    pub threshold: f64,
    /// Mean over scored classes of the per-class effective FP rate (per hour).
    pub efpr: f64,
    pub tpr_mean: f64,
    pub tpr_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRoc {
    pub class: String,
    /// `(effective FP rate per hour, TPR)` per operating point.
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdsReport {
    pub psds: f64,
    pub operating_points: Vec<OperatingPointSummary>,
    pub class_roc: Vec<ClassRoc>,
}

/// Sorted, non-overlapping union of intervals.
fn merge_intervals(mut iv: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    iv.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(iv.len());
    for (a, b) in iv {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

/// Total overlap of `[a, b)` with a merged interval list.
fn overlap(a: f64, b: f64, merged: &[(f64, f64)]) -> f64 {
    merged
        .iter()
        .map(|&(x, y)| (b.min(y) - a.max(x)).max(0.0))
        .sum()
}

/// Per-class counts at one operating point.
#[derive(Debug, Clone)]
struct PointCounts {
    tp: Vec<usize>,
    fp: Vec<usize>,
    // ct[c][k]: detections of class c cross-triggered on ground truth of class k
    ct: Vec<Vec<usize>>,
}

struct GroundTruthIndex {
    merged: BTreeMap<(String, usize), Vec<(f64, f64)>>,
    events: Vec<(String, usize, f64, f64)>,
    n_events: Vec<usize>,
    duration: Vec<f64>,
}

impl GroundTruthIndex {
    fn new(reference: &EventList, vocab: &ClassVocabulary) -> Result<Self> {
        let c = vocab.len();
        let mut raw: BTreeMap<(String, usize), Vec<(f64, f64)>> = BTreeMap::new();
        let mut events = Vec::with_capacity(reference.len());
        let mut n_events = vec![0; c];
        for e in reference {
            let k = vocab.index_of(&e.class).ok_or_else(|| Error::Vocabulary {
                location: format!("reference clip '{}'", e.clip_id),
                class: e.class.clone(),
            })?;
            raw.entry((e.clip_id.clone(), k)).or_default().push((e.onset, e.offset));
            events.push((e.clip_id.clone(), k, e.onset, e.offset));
            n_events[k] += 1;
        }
        let merged: BTreeMap<_, _> = raw.into_iter().map(|(k, v)| (k, merge_intervals(v))).collect();
        let mut duration = vec![0.0; c];
        for ((_, k), iv) in &merged {
            duration[*k] += iv.iter().map(|(a, b)| b - a).sum::<f64>();
        }
        Ok(Self {
            merged,
            events,
            n_events,
            duration,
        })
    }

    fn intervals(&self, clip: &str, class: usize) -> &[(f64, f64)] {
        self.merged
            .get(&(clip.to_string(), class))
            .map_or(&[], Vec::as_slice)
    }
}

fn count_point(
    detections: &EventList,
    gt: &GroundTruthIndex,
    vocab: &ClassVocabulary,
    cfg: &PsdsConfig,
) -> Result<PointCounts> {
    let c = vocab.len();
    let mut fp = vec![0usize; c];
    let mut ct = vec![vec![0usize; c]; c];
    let mut passing: BTreeMap<(String, usize), Vec<(f64, f64)>> = BTreeMap::new();
    for d in detections {
        let k = vocab.index_of(&d.class).ok_or_else(|| Error::Vocabulary {
            location: format!("detection clip '{}'", d.clip_id),
            class: d.class.clone(),
        })?;
        let dur = d.duration();
        let same = overlap(d.onset, d.offset, gt.intervals(&d.clip_id, k));
        if same / dur >= cfg.dtc {
            passing
                .entry((d.clip_id.clone(), k))
                .or_default()
                .push((d.onset, d.offset));
            continue;
        }
        let mut cross = false;
        if cfg.alpha_ct > 0.0 {
            for other in (0..c).filter(|&o| o != k) {
                let inter = overlap(d.onset, d.offset, gt.intervals(&d.clip_id, other));
                if inter / dur >= cfg.cttc {
                    ct[k][other] += 1;
                    cross = true;
                }
            }
        }
        if !cross {
            fp[k] += 1;
        }
    }
    let passing: BTreeMap<_, _> = passing
        .into_iter()
        .map(|(key, v)| (key, merge_intervals(v)))
        .collect();
    let mut tp = vec![0usize; c];
    for (clip, k, a, b) in &gt.events {
        if let Some(dets) = passing.get(&(clip.clone(), *k)) {
            if overlap(*a, *b, dets) / (b - a) >= cfg.gtc {
                tp[*k] += 1;
            }
        }
    }
    Ok(PointCounts { tp, fp, ct })
}

/// PSDS from pre-decoded detections, one list per operating point (same
/// order as `cfg.operating_points`). `dataset_seconds` is the total audio
/// duration used for FP rates.
pub fn psds_from_detections(
    detections: &[EventList],
    reference: &EventList,
    vocab: &ClassVocabulary,
    dataset_seconds: f64,
    cfg: &PsdsConfig,
) -> Result<PsdsReport> {
    cfg.validate()?;
    if reference.is_empty() {
        return Err(Error::Input("PSDS needs a non-empty reference".into()));
    }
    if !(dataset_seconds.is_finite() && dataset_seconds > 0.0) {
        return Err(Error::Input(format!(
            "dataset duration must be positive, got {dataset_seconds} s"
        )));
    }
    if detections.len() != cfg.operating_points.len() {
        return Err(Error::Shape(format!(
            "{} detection lists for {} operating points",
            detections.len(),
            cfg.operating_points.len()
        )));
    }
    let gt = GroundTruthIndex::new(reference, vocab)?;
    let hours = dataset_seconds / 3600.0;
    // classes without any reference event have no TPR and are not scored
    let scored: Vec<usize> = (0..vocab.len()).filter(|&k| gt.n_events[k] > 0).collect();

    let counts: Vec<PointCounts> = detections
        .par_iter()
        .map(|d| count_point(d, &gt, vocab, cfg))
        .collect::<Result<_>>()?;

    let mut class_roc: Vec<ClassRoc> = scored
        .iter()
        .map(|&k| ClassRoc {
            class: vocab.name(k).to_string(),
            points: Vec::with_capacity(counts.len()),
        })
        .collect();
    let mut summaries = Vec::with_capacity(counts.len());
    for (pc, &threshold) in counts.iter().zip(&cfg.operating_points) {
        let mut tprs = Vec::with_capacity(scored.len());
        let mut efprs = Vec::with_capacity(scored.len());
        for (roc, &k) in class_roc.iter_mut().zip(&scored) {
            let tpr = pc.tp[k] as f64 / gt.n_events[k] as f64;
            let mut efpr = pc.fp[k] as f64 / hours;
            if cfg.alpha_ct > 0.0 {
                let ctrs: Vec<f64> = scored
                    .iter()
                    .filter(|&&o| o != k && gt.duration[o] > 0.0)
                    .map(|&o| pc.ct[k][o] as f64 / (gt.duration[o] / 3600.0))
                    .collect();
                if !ctrs.is_empty() {
                    efpr += cfg.alpha_ct * ctrs.iter().sum::<f64>() / ctrs.len() as f64;
                }
            }
            roc.points.push((efpr, tpr));
            tprs.push(tpr);
            efprs.push(efpr);
        }
        let (tpr_mean, tpr_std) = mean_std(&tprs);
        summaries.push(OperatingPointSummary {
            threshold,
            efpr: mean_std(&efprs).0,
            tpr_mean,
            tpr_std,
        });
    }
    let psds = roc_area(&class_roc, cfg.alpha_st, cfg.e_max);
    Ok(PsdsReport {
        psds,
        operating_points: summaries,
        class_roc,
    })
}

/// Population mean and standard deviation.
fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Best TPR reachable at effective FP rate `x` on one class ROC.
fn staircase_tpr(points: &[(f64, f64)], x: f64) -> f64 {
    points
        .iter()
        .filter(|(e, _)| *e <= x)
        .map(|(_, t)| *t)
        .fold(0.0, f64::max)
}

/// Normalized area under the effective ROC: per-class upper staircases are
/// combined as `mean - alpha_st * std`, clamped at 0, made non-decreasing
/// and integrated over `[0, e_max]`.
fn roc_area(class_roc: &[ClassRoc], alpha_st: f64, e_max: f64) -> f64 {
    if class_roc.is_empty() {
        return 0.0;
    }
    let mut xs: Vec<f64> = std::iter::once(0.0)
        .chain(
            class_roc
                .iter()
                .flat_map(|r| r.points.iter().map(|p| p.0))
                .filter(|&e| e <= e_max),
        )
        .collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mut area = 0.0;
    let mut level: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let tprs: Vec<f64> = class_roc.iter().map(|r| staircase_tpr(&r.points, x)).collect();
        let (mean, std) = mean_std(&tprs);
        level = level.max((mean - alpha_st * std).max(0.0));
        let next = xs.get(i + 1).copied().unwrap_or(e_max);
        area += level * (next - x);
    }
    (area / e_max).clamp(0.0, 1.0)
}

/// Decodes `grids` at every operating point of each config and scores them.
/// Configs sharing an operating-point list share the decoding work.
pub fn psds_many(
    grids: &[FrameGrid],
    reference: &EventList,
    vocab: &ClassVocabulary,
    decode_cfg: &PostProcessConfig,
    cfgs: &[&PsdsConfig],
) -> Result<Vec<PsdsReport>> {
    if grids.is_empty() {
        return Err(Error::Input("PSDS needs at least one clip".into()));
    }
    let seconds: f64 = grids.iter().map(FrameGrid::duration_seconds).sum();
    let mut cache: Vec<(Vec<f64>, Vec<EventList>)> = Vec::new();
    let mut out = Vec::with_capacity(cfgs.len());
    for cfg in cfgs {
        cfg.validate()?;
        let idx = match cache.iter().position(|(ops, _)| *ops == cfg.operating_points) {
            Some(i) => i,
            None => {
                let dets = cfg
                    .operating_points
                    .par_iter()
                    .map(|&t| decode_all(grids, &decode_cfg.with_threshold(t)?, vocab))
                    .collect::<Result<Vec<_>>>()?;
                cache.push((cfg.operating_points.clone(), dets));
                cache.len() - 1
            }
        };
        out.push(psds_from_detections(&cache[idx].1, reference, vocab, seconds, cfg)?);
    }
    Ok(out)
}

pub fn psds(
    grids: &[FrameGrid],
    reference: &EventList,
    vocab: &ClassVocabulary,
    decode_cfg: &PostProcessConfig,
    cfg: &PsdsConfig,
) -> Result<PsdsReport> {
    Ok(psds_many(grids, reference, vocab, decode_cfg, &[cfg])?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(clip: &str, on: f64, off: f64, class: &str) -> Event {
        Event::new(clip, on, off, class)
    }

    fn vocab() -> ClassVocabulary {
        ClassVocabulary::new(["Speech", "Dog"]).unwrap()
    }

    fn list(events: Vec<Event>) -> EventList {
        EventList::new(events, &vocab()).unwrap()
    }

    #[test]
    fn collar_hand_cases() {
        let cfg = CollarConfig::default();
        let r = ev("c", 1.0, 2.0, "Speech");
        assert!(cfg.compatible(&r, &ev("c", 1.15, 2.10, "Speech")));
        assert!(!cfg.compatible(&r, &ev("c", 1.25, 2.0, "Speech")));
        // long events get a proportional offset collar: 0.2 * 5 s = 1 s
        let long = ev("c", 0.0, 5.0, "Speech");
        assert!(cfg.compatible(&long, &ev("c", 0.1, 5.9, "Speech")));
    }

    #[test]
    fn matching_is_maximum_not_greedy() {
        // greedy on ref 0 would take est 0 and leave ref 1 unmatched
        let reference = list(vec![ev("c", 1.0, 2.0, "Speech"), ev("c", 1.3, 2.3, "Speech")]);
        let est = list(vec![ev("c", 1.15, 2.15, "Speech"), ev("c", 0.9, 1.9, "Speech")]);
        assert_eq!(match_events(&reference, &est, &CollarConfig::default()).len(), 2);
    }

    #[test]
    fn matching_respects_clip_and_class() {
        let reference = list(vec![ev("a", 1.0, 2.0, "Speech")]);
        let other_clip = list(vec![ev("b", 1.0, 2.0, "Speech")]);
        let other_class = list(vec![ev("a", 1.0, 2.0, "Dog")]);
        assert!(match_events(&reference, &other_clip, &CollarConfig::default()).is_empty());
        assert!(match_events(&reference, &other_class, &CollarConfig::default()).is_empty());
    }

    #[test]
    fn f1_degenerate_and_perfect() {
        let reference = list(vec![ev("a", 1.0, 2.0, "Speech"), ev("a", 3.0, 4.0, "Dog")]);
        let perfect = event_f1(&reference, &reference, &vocab(), &CollarConfig::default()).unwrap();
        assert_eq!(perfect.macro_f1, 1.0);
        let empty = event_f1(&reference, &EventList::empty(), &vocab(), &CollarConfig::default()).unwrap();
        let s = empty.class("Speech").unwrap();
        assert_eq!((s.tp, s.fp, s.fn_, s.precision, s.recall, s.f1), (0, 0, 1, 0.0, 0.0, 0.0));
        assert_eq!(empty.macro_f1, 0.0);
    }

    #[test]
    fn f1_counts_worked_example() {
        let reference = list(vec![ev("a", 1.0, 2.0, "Speech")]);
        let miss = list(vec![ev("a", 1.25, 2.0, "Speech")]);
        let r = event_f1(&reference, &miss, &vocab(), &CollarConfig::default()).unwrap();
        let s = r.class("Speech").unwrap();
        assert_eq!((s.tp, s.fp, s.fn_), (0, 1, 1));
    }

    #[test]
    fn merged_intervals() {
        assert_eq!(
            merge_intervals(vec![(3.0, 4.0), (0.0, 1.0), (0.5, 2.0), (2.0, 2.5)]),
            vec![(0.0, 2.5), (3.0, 4.0)]
        );
        assert_eq!(overlap(0.5, 3.5, &[(0.0, 1.0), (3.0, 4.0)]), 1.0);
    }

    #[test]
    fn operating_points_default() {
        let ops = PsdsConfig::psds1().operating_points;
        assert_eq!(ops.len(), 50);
        assert!((ops[0] - 0.01).abs() < 1e-15 && (ops[49] - 0.99).abs() < 1e-12);
        PsdsConfig::psds1().validate().unwrap();
        PsdsConfig::psds2().validate().unwrap();
    }

    #[test]
    fn config_rejects_bad_points() {
        let mut cfg = PsdsConfig::psds1();
        cfg.operating_points = vec![0.5, 0.4];
        assert!(cfg.validate().is_err());
        cfg.operating_points = vec![0.0, 0.4];
        assert!(cfg.validate().is_err());
        let mut cfg = PsdsConfig::psds1();
        cfg.dtc = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn cross_triggers_move_fp_into_ct() {
        // a Dog detection sitting on Speech ground truth
        let reference = list(vec![ev("a", 0.0, 10.0, "Speech"), ev("a", 20.0, 21.0, "Dog")]);
        let dets = list(vec![ev("a", 1.0, 3.0, "Dog")]);
        let gt = GroundTruthIndex::new(&reference, &vocab()).unwrap();
        let c1 = count_point(&dets, &gt, &vocab(), &PsdsConfig::psds1()).unwrap();
        assert_eq!((c1.fp[1], c1.ct[1][0]), (1, 0));
        let c2 = count_point(&dets, &gt, &vocab(), &PsdsConfig::psds2()).unwrap();
        assert_eq!((c2.fp[1], c2.ct[1][0]), (0, 1));
    }

    #[test]
    fn empty_reference_is_error() {
        let cfg = PsdsConfig::psds1();
        let dets = vec![EventList::empty(); 50];
        assert!(psds_from_detections(&dets, &EventList::empty(), &vocab(), 10.0, &cfg).is_err());
        let reference = list(vec![ev("a", 0.0, 1.0, "Dog")]);
        assert!(psds_from_detections(&dets, &reference, &vocab(), 0.0, &cfg).is_err());
    }
}
