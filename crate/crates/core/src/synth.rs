//! Seeded synthetic scenarios: ground-truth timelines, simulated detector
//! posteriors with per-class skill, and simulated separation + tagging.
//!
//! Every clip draws from its own [`SplitMix64`] stream derived from
//! `(seed, stream, clip index)`, so results do not depend on evaluation
//! order or thread count.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::types::{
    ClassVocabulary, Event, EventList, FrameGrid, SeparationManifest, TagPrediction, WeakLabelSet,
    DESED_CLASSES,
};

const STREAM_TRUTH: u64 = 1;
const STREAM_MODEL: u64 = 2;
const STREAM_SEPARATION: u64 = 3;

/// False-alarm bursts last this many frames (inclusive range).
const FALSE_ALARM_FRAMES: (u64, u64) = (5, 40);
const PLACEMENT_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRange {
    pub min: usize,
    pub max: usize,
}

/// A number that may also be written as the string `"inf"` in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Value(f64),
    Text(String),
}

impl Number {
    fn value(&self) -> Result<f64> {
        match self {
            Number::Value(v) => Ok(*v),
            Number::Text(s) if s.eq_ignore_ascii_case("inf") => Ok(f64::INFINITY),
            Number::Text(s) => Err(Error::Config(format!("expected a number or \"inf\", got '{s}'"))),
        }
    }
}

/// One value for every class, or an explicit per-class list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerClass {
    All(Number),
    Each(Vec<Number>),
}

impl PerClass {
    pub fn all(v: f64) -> Self {
        PerClass::All(Number::Value(v))
    }

    pub fn each(values: impl IntoIterator<Item = f64>) -> Self {
        PerClass::Each(values.into_iter().map(Number::Value).collect())
    }

    pub fn resolve(&self, n: usize, what: &str) -> Result<Vec<f64>> {
        match self {
            PerClass::All(v) => Ok(vec![v.value()?; n]),
            PerClass::Each(vs) if vs.len() == n => vs.iter().map(Number::value).collect(),
            PerClass::Each(vs) => Err(Error::Config(format!(
                "{what}: {} values for {n} classes",
                vs.len()
            ))),
        }
    }
}

/// Detection quality of one simulated model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSkill {
    pub id: String,
    /// Probability that a true event is missed entirely.
    pub miss_rate: PerClass,
    /// Per-frame probability that a spurious burst starts.
    pub false_alarm_rate: PerClass,
    /// Maximum boundary displacement in frames (uniform in `[-j, j]`).
    pub jitter_frames: PerClass,
    /// Shape of the posterior draws; `"inf"` gives exact 0/1 posteriors.
    pub sharpness: PerClass,
}

/// A skill spec resolved against a class count.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedSkill {
    pub miss_rate: Vec<f64>,
    pub false_alarm_rate: Vec<f64>,
    pub jitter_frames: Vec<u64>,
    pub sharpness: Vec<f64>,
}

impl ModelSkill {
    pub fn uniform(id: impl Into<String>, miss: f64, false_alarm: f64, jitter: f64, sharpness: f64) -> Self {
        Self {
            id: id.into(),
            miss_rate: PerClass::all(miss),
            false_alarm_rate: PerClass::all(false_alarm),
            jitter_frames: PerClass::all(jitter),
            sharpness: PerClass::all(sharpness),
        }
    }

    /// Exact 0/1 posteriors with no errors.
    pub fn noiseless(id: impl Into<String>) -> Self {
        Self::uniform(id, 0.0, 0.0, 0.0, f64::INFINITY)
    }

    pub fn resolve(&self, n_classes: usize) -> Result<ResolvedSkill> {
        let miss_rate = self.miss_rate.resolve(n_classes, "miss_rate")?;
        let false_alarm_rate = self.false_alarm_rate.resolve(n_classes, "false_alarm_rate")?;
        let jitter = self.jitter_frames.resolve(n_classes, "jitter_frames")?;
        let sharpness = self.sharpness.resolve(n_classes, "sharpness")?;
        for (name, rates) in [("miss_rate", &miss_rate), ("false_alarm_rate", &false_alarm_rate)] {
            if rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
                return Err(Error::Config(format!("model '{}': {name} must be in [0, 1]", self.id)));
            }
        }
        if jitter.iter().any(|j| !(j.is_finite() && *j >= 0.0)) {
            return Err(Error::Config(format!("model '{}': jitter must be >= 0", self.id)));
        }
        if sharpness.iter().any(|s| s.is_nan() || *s <= 0.0) {
            return Err(Error::Config(format!("model '{}': sharpness must be > 0", self.id)));
        }
        Ok(ResolvedSkill {
            miss_rate,
            false_alarm_rate,
            jitter_frames: jitter.iter().map(|j| j.round() as u64).collect(),
            sharpness,
        })
    }
}

/// Three models, each strong on a different third of the classes.
pub fn heterogeneous_models(n_models: usize, n_classes: usize) -> Vec<ModelSkill> {
    (0..n_models)
        .map(|m| {
            let strong = |c: usize| c % n_models == m;
            let pick = |s: f64, w: f64| PerClass::each((0..n_classes).map(|c| if strong(c) { s } else { w }));
            ModelSkill {
                id: format!("model_{}", m + 1),
                miss_rate: pick(0.05, 0.35),
                false_alarm_rate: pick(0.0005, 0.003),
                jitter_frames: pick(1.0, 6.0),
                sharpness: pick(6.0, 2.5),
            }
        })
        .collect()
}

/// Failure model for separation and tagging.
///
/// A mixture is separated cleanly (one event per source) with probability
/// `clean`. Otherwise each event independently ends up buried in a
/// background-dominated source with probability `residual`, or else shares
/// a source with an earlier event with probability `leakage`. Each source's
/// tag is then corrupted with probability `tag_error`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationSkill {
    pub clean: f64,
    pub leakage: f64,
    pub residual: f64,
    pub tag_error: f64,
}

impl Default for SeparationSkill {
    fn default() -> Self {
        Self {
            clean: 0.5,
            leakage: 0.2,
            residual: 0.1,
            tag_error: 0.1,
        }
    }
}

impl SeparationSkill {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("clean", self.clean),
            ("leakage", self.leakage),
            ("residual", self.residual),
            ("tag_error", self.tag_error),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("separation {name} = {p} not in [0, 1]")));
            }
        }
        Ok(())
    }
}

fn default_seed() -> u64 {
    42
}
fn default_n_clips() -> usize {
    200
}
fn default_clip_seconds() -> f64 {
    10.0
}
fn default_frames() -> usize {
    512
}
fn default_classes() -> usize {
    10
}
fn default_events() -> CountRange {
    CountRange { min: 1, max: 4 }
}
fn default_duration() -> Range {
    Range { min: 0.5, max: 4.0 }
}
fn default_true() -> bool {
    true
}
fn default_models() -> Vec<ModelSkill> {
    heterogeneous_models(3, default_classes())
}

/// `scenario.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_n_clips")]
    pub n_clips: usize,
    #[serde(default = "default_clip_seconds")]
    pub clip_seconds: f64,
    #[serde(default = "default_frames")]
    pub frames_per_clip: usize,
    #[serde(default = "default_classes")]
    pub n_classes: usize,
    #[serde(default = "default_events")]
    pub events_per_clip: CountRange,
    /// Event duration bounds used for every class without an override.
    #[serde(default = "default_duration")]
    pub duration_seconds: Range,
    /// Optional per-class duration bounds, in vocabulary order.
    #[serde(default)]
    pub class_durations: Option<Vec<Range>>,
    /// Whether events of different classes may overlap in time.
    #[serde(default = "default_true")]
    pub allow_overlap: bool,
    #[serde(default = "default_models")]
    pub models: Vec<ModelSkill>,
    #[serde(default)]
    pub separation: SeparationSkill,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

impl ScenarioConfig {
    pub fn hop_seconds(&self) -> f64 {
        self.clip_seconds / self.frames_per_clip as f64
    }

    pub fn vocabulary(&self) -> Result<ClassVocabulary> {
        if self.n_classes == 0 {
            return Err(Error::Config("n_classes must be >= 1".into()));
        }
        if self.n_classes <= DESED_CLASSES.len() {
            ClassVocabulary::desed(self.n_classes)
        } else {
            ClassVocabulary::new((0..self.n_classes).map(|i| format!("class_{i:02}")))
        }
    }

    fn duration_bounds(&self, class: usize) -> Range {
        self.class_durations
            .as_ref()
            .map_or(self.duration_seconds, |d| d[class])
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames_per_clip == 0 {
            return Err(Error::Config("frames_per_clip must be >= 1".into()));
        }
        if !(self.clip_seconds.is_finite() && self.clip_seconds > 0.0) {
            return Err(Error::Config("clip_seconds must be positive".into()));
        }
        self.vocabulary()?;
        if self.events_per_clip.min > self.events_per_clip.max {
            return Err(Error::Config("events_per_clip.min exceeds max".into()));
        }
        if let Some(d) = &self.class_durations {
            if d.len() != self.n_classes {
                return Err(Error::Config(format!(
                    "class_durations has {} entries for {} classes",
                    d.len(),
                    self.n_classes
                )));
            }
        }
        for c in 0..self.n_classes {
            let r = self.duration_bounds(c);
            if !(r.min > 0.0 && r.min <= r.max && r.max <= self.clip_seconds) {
                return Err(Error::Config(format!(
                    "infeasible duration bounds [{}, {}] for a {} s clip",
                    r.min, r.max, self.clip_seconds
                )));
            }
        }
        for m in &self.models {
            m.resolve(self.n_classes)?;
        }
        self.separation.validate()
    }

    pub fn clip_id(index: usize) -> String {
        format!("synth_{index:05}")
    }

    pub fn clip_ids(&self) -> Vec<String> {
        (0..self.n_clips).map(Self::clip_id).collect()
    }
}

/// Frame interval `[start, end)` of one class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Span {
    class: usize,
    start: usize,
    end: usize,
}

fn place_events(cfg: &ScenarioConfig, rng: &mut SplitMix64) -> Vec<Span> {
    let t_len = cfg.frames_per_clip;
    let hop = cfg.hop_seconds();
    let n = rng.int_inclusive(cfg.events_per_clip.min as u64, cfg.events_per_clip.max as u64) as usize;
    let mut placed: Vec<Span> = Vec::with_capacity(n);
    for _ in 0..n {
        for _ in 0..PLACEMENT_ATTEMPTS {
            let class = rng.index(cfg.n_classes);
            let r = cfg.duration_bounds(class);
            let seconds = r.min + rng.next_f64() * (r.max - r.min);
            let frames = ((seconds / hop).round() as usize).clamp(1, t_len);
            let start = rng.int_inclusive(0, (t_len - frames) as u64) as usize;
            let span = Span {
                class,
                start,
                end: start + frames,
            };
            let clash = placed.iter().any(|p| {
                // same-class events need a gap so they stay separate runs
                (p.class == span.class && span.start <= p.end && p.start <= span.end)
                    || (!cfg.allow_overlap && span.start < p.end && p.start < span.end)
            });
            if !clash {
                placed.push(span);
                break;
            }
        }
    }
    placed.sort_by_key(|s| (s.start, s.class));
    placed
}

/// Strong labels for every clip plus their class projection as weak labels.
/// Times are whole multiples of the frame hop.
pub fn gen_truth(cfg: &ScenarioConfig) -> Result<(EventList, WeakLabelSet)> {
    cfg.validate()?;
    let vocab = cfg.vocabulary()?;
    let hop = cfg.hop_seconds();
    let mut events = Vec::new();
    for k in 0..cfg.n_clips {
        let mut rng = SplitMix64::derive(cfg.seed, &[STREAM_TRUTH, k as u64]);
        let clip = ScenarioConfig::clip_id(k);
        for s in place_events(cfg, &mut rng) {
            events.push(Event::new(
                clip.clone(),
                s.start as f64 * hop,
                s.end as f64 * hop,
                vocab.name(s.class),
            ));
        }
    }
    let events = EventList::new(events, &vocab)?;
    let weak = WeakLabelSet::from_events(&events);
    Ok((events, weak))
}

fn event_frames(e: &Event, hop: f64) -> (usize, usize) {
    ((e.onset / hop).round() as usize, (e.offset / hop).round() as usize)
}

/// Simulated posteriors of one model for the given clips.
///
/// Active frames draw from Beta(s, 1) (`u^(1/s)`), inactive frames from
/// Beta(1, s) (`1 - u^(1/s)`); infinite sharpness gives exact 1 and 0.
pub fn simulate_model(
    truth: &EventList,
    clip_ids: &[String],
    skill: &ModelSkill,
    cfg: &ScenarioConfig,
    seed: u64,
) -> Result<Vec<FrameGrid>> {
    let vocab = cfg.vocabulary()?;
    let s = skill.resolve(vocab.len())?;
    let (t_len, c_len, hop) = (cfg.frames_per_clip, vocab.len(), cfg.hop_seconds());
    let by_clip = truth.by_clip();
    clip_ids
        .iter()
        .enumerate()
        .map(|(k, clip)| {
            let mut rng = SplitMix64::derive(seed, &[STREAM_MODEL, k as u64]);
            let mut active = vec![false; t_len * c_len];
            for e in by_clip.get(clip.as_str()).into_iter().flatten() {
                let c = vocab.index_of(&e.class).ok_or_else(|| Error::Vocabulary {
                    location: format!("clip '{clip}'"),
                    class: e.class.clone(),
                })?;
                if rng.bernoulli(s.miss_rate[c]) {
                    continue;
                }
                let (a, b) = event_frames(e, hop);
                let j = s.jitter_frames[c];
                let shift = |rng: &mut SplitMix64, x: usize| {
                    let d = rng.int_inclusive(0, 2 * j) as i64 - j as i64;
                    (x as i64 + d).clamp(0, t_len as i64) as usize
                };
                let a2 = shift(&mut rng, a).min(t_len - 1);
                let b2 = shift(&mut rng, b).max(a2 + 1).min(t_len);
                for t in a2..b2 {
                    active[t * c_len + c] = true;
                }
            }
            for c in 0..c_len {
                for t in 0..t_len {
                    if rng.bernoulli(s.false_alarm_rate[c]) {
                        let len = rng.int_inclusive(FALSE_ALARM_FRAMES.0, FALSE_ALARM_FRAMES.1) as usize;
                        for u in t..(t + len).min(t_len) {
                            active[u * c_len + c] = true;
                        }
                    }
                }
            }
            let values = active
                .iter()
                .enumerate()
                .map(|(i, &on)| {
                    let sharp = s.sharpness[i % c_len];
                    if sharp.is_infinite() {
                        return if on { 1.0 } else { 0.0 };
                    }
                    let v = rng.next_f64().powf(1.0 / sharp);
                    if on {
                        v
                    } else {
                        1.0 - v
                    }
                })
                .collect();
            FrameGrid::new(clip.clone(), hop, c_len, values)
        })
        .collect()
}

/// Model seeds are derived from the scenario seed and the model index.
pub fn model_seed(scenario_seed: u64, model_index: usize) -> u64 {
    SplitMix64::derive(scenario_seed, &[STREAM_MODEL, u64::MAX, model_index as u64]).next_u64()
}

/// Ground truth of one separated source.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceTruth {
    pub source_id: String,
    pub mixture_id: String,
    pub events: Vec<Event>,
    /// The source is dominated by background even though it carries events.
    pub buried: bool,
}

/// What a perfect tagger would say about a source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SourceContent {
    Single(String),
    Mixed,
    Background,
}

impl SourceTruth {
    pub fn content(&self) -> SourceContent {
        if self.buried || self.events.is_empty() {
            return SourceContent::Background;
        }
        let classes: BTreeSet<&str> = self.events.iter().map(|e| e.class.as_str()).collect();
        if classes.len() == 1 {
            SourceContent::Single(classes.into_iter().next().unwrap().to_string())
        } else {
            SourceContent::Mixed
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationOutput {
    pub manifest: SeparationManifest,
    pub tags: Vec<TagPrediction>,
    pub sources: Vec<SourceTruth>,
}

/// One plus the largest number of events in any clip.
pub fn sources_per_mixture(truth: &EventList, clip_ids: &[String]) -> usize {
    let by_clip = truth.by_clip();
    1 + clip_ids
        .iter()
        .map(|c| by_clip.get(c.as_str()).map_or(0, Vec::len))
        .max()
        .unwrap_or(0)
}

fn high(rng: &mut SplitMix64) -> f64 {
    0.7 + 0.3 * rng.next_f64()
}

fn low(rng: &mut SplitMix64) -> f64 {
    0.3 * rng.next_f64()
}

/// Splits each mixture into `n_sources` simulated sources and tags them.
pub fn simulate_separation(
    truth: &EventList,
    clip_ids: &[String],
    vocab: &ClassVocabulary,
    skill: &SeparationSkill,
    n_sources: usize,
    seed: u64,
) -> Result<SeparationOutput> {
    skill.validate()?;
    let by_clip = truth.by_clip();
    let c_len = vocab.len();
    let mut entries = Vec::with_capacity(clip_ids.len());
    let mut tags = Vec::new();
    let mut sources = Vec::new();
    for (k, mixture) in clip_ids.iter().enumerate() {
        let events: Vec<&Event> = by_clip.get(mixture.as_str()).cloned().unwrap_or_default();
        if n_sources < events.len() + 1 {
            return Err(Error::Config(format!(
                "{n_sources} sources cannot hold the {} events of '{mixture}' plus background",
                events.len()
            )));
        }
        let mut rng = SplitMix64::derive(seed, &[STREAM_SEPARATION, k as u64]);
        let mut slots: Vec<usize> = (0..n_sources).collect();
        rng.shuffle(&mut slots);
        let mut content: Vec<Vec<Event>> = vec![Vec::new(); n_sources];
        let mut buried = vec![false; n_sources];
        let clean = rng.bernoulli(skill.clean);
        let mut next_slot = 0;
        let mut used: Vec<usize> = Vec::new();
        for e in events {
            let mut fresh = || {
                let s = slots[next_slot];
                next_slot += 1;
                s
            };
            let slot = if clean {
                fresh()
            } else if rng.bernoulli(skill.residual) {
                let s = fresh();
                buried[s] = true;
                s
            } else {
                let joinable: Vec<usize> = used.iter().copied().filter(|&s| !buried[s]).collect();
                if !joinable.is_empty() && rng.bernoulli(skill.leakage) {
                    joinable[rng.index(joinable.len())]
                } else {
                    fresh()
                }
            };
            if !used.contains(&slot) {
                used.push(slot);
            }
            content[slot].push(e.clone());
        }

        let ids: Vec<String> = (0..n_sources).map(|j| format!("{mixture}_src{j}")).collect();
        for j in 0..n_sources {
            let st = SourceTruth {
                source_id: ids[j].clone(),
                mixture_id: mixture.clone(),
                events: std::mem::take(&mut content[j]),
                buried: buried[j],
            };
            let mut target: Vec<f64> = (0..c_len).map(|_| low(&mut rng)).collect();
            let mut other = low(&mut rng);
            let truth_class = match st.content() {
                SourceContent::Single(c) => {
                    let i = vocab.index_of(&c).expect("event classes are in the vocabulary");
                    target[i] = high(&mut rng);
                    Some(i)
                }
                SourceContent::Mixed => {
                    let present: BTreeSet<usize> = st
                        .events
                        .iter()
                        .map(|e| vocab.index_of(&e.class).expect("event classes are in the vocabulary"))
                        .collect();
                    for i in present {
                        target[i] = high(&mut rng);
                    }
                    None
                }
                SourceContent::Background => {
                    other = high(&mut rng);
                    None
                }
            };
            if rng.bernoulli(skill.tag_error) {
                // the tagger confidently reports a single wrong class
                let wrong = match truth_class {
                    Some(i) if c_len > 1 => (i + 1 + rng.index(c_len - 1)) % c_len,
                    Some(i) => i,
                    None => rng.index(c_len),
                };
                target = (0..c_len).map(|_| low(&mut rng)).collect();
                target[wrong] = high(&mut rng);
                other = low(&mut rng);
            }
            tags.push(TagPrediction::new(&st.source_id, mixture, target, other, vocab)?);
            sources.push(st);
        }
        entries.push((mixture.clone(), ids));
    }
    Ok(SeparationOutput {
        manifest: SeparationManifest::new(entries)?,
        tags,
        sources,
    })
}

/// Whether a pseudo-label agrees with the source's actual content.
pub fn pseudo_label_correct(verdict: &crate::spl::Verdict, truth: &SourceTruth) -> bool {
    use crate::spl::Verdict;
    match (verdict, truth.content()) {
        (Verdict::SingleEvent(a), SourceContent::Single(b)) => *a == b,
        (Verdict::Ambiguous, SourceContent::Mixed) => true,
        (Verdict::Other, SourceContent::Background) => true,
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            seed,
            n_clips: 20,
            ..Default::default()
        }
    }

    #[test]
    fn defaults_match_documented_scale() {
        let cfg = ScenarioConfig::default();
        assert_eq!((cfg.n_clips, cfg.frames_per_clip, cfg.n_classes), (200, 512, 10));
        assert_eq!(cfg.clip_seconds, 10.0);
        assert_eq!(cfg.models.len(), 3);
        cfg.validate().unwrap();
    }

    #[test]
    fn truth_is_deterministic_and_frame_aligned() {
        let cfg = small(7);
        let (a, wa) = gen_truth(&cfg).unwrap();
        let (b, wb) = gen_truth(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(wa, wb);
        let hop = cfg.hop_seconds();
        for e in &a {
            let (f0, f1) = event_frames(e, hop);
            assert_eq!(e.onset, f0 as f64 * hop);
            assert_eq!(e.offset, f1 as f64 * hop);
        }
        assert_ne!(a, gen_truth(&small(8)).unwrap().0);
    }

    #[test]
    fn single_event_bound() {
        let cfg = ScenarioConfig {
            events_per_clip: CountRange { min: 1, max: 1 },
            allow_overlap: false,
            ..small(3)
        };
        let (ev, _) = gen_truth(&cfg).unwrap();
        for (_, list) in ev.by_clip() {
            assert!(list.len() <= 1);
        }
    }

    #[test]
    fn infeasible_durations_rejected() {
        let too_long = ScenarioConfig {
            duration_seconds: Range { min: 1.0, max: 11.0 },
            ..small(1)
        };
        assert!(gen_truth(&too_long).is_err());
        let inverted = ScenarioConfig {
            duration_seconds: Range { min: 3.0, max: 2.0 },
            ..small(1)
        };
        assert!(gen_truth(&inverted).is_err());
    }

    #[test]
    fn per_class_values_parse_from_json() {
        let skill: ModelSkill = serde_json::from_str(
            r#"{"id":"m","miss_rate":0.1,"false_alarm_rate":[0.0,0.1],"jitter_frames":2,"sharpness":"inf"}"#,
        )
        .unwrap();
        let r = skill.resolve(2).unwrap();
        assert_eq!(r.false_alarm_rate, vec![0.0, 0.1]);
        assert!(r.sharpness[0].is_infinite());
        assert!(skill.resolve(3).is_err());
    }

    #[test]
    fn separation_conserves_events() {
        let cfg = small(11);
        let (truth, _) = gen_truth(&cfg).unwrap();
        let ids = cfg.clip_ids();
        let n = sources_per_mixture(&truth, &ids);
        let out = simulate_separation(&truth, &ids, &cfg.vocabulary().unwrap(), &cfg.separation, n, 5).unwrap();
        let mut total = 0;
        for s in &out.sources {
            total += s.events.len();
        }
        assert_eq!(total, truth.len());
        assert_eq!(out.manifest.sources_per_mixture(), Some(n));
        assert!(simulate_separation(&truth, &ids, &cfg.vocabulary().unwrap(), &cfg.separation, 1, 5).is_err());
    }
}
