//! Domain types shared by every pipeline stage.
//!
//! All types validate their invariants on construction and are immutable
//! afterwards, so they can be shared freely across threads.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use crate::error::{Error, Result};

/// Default name of the reserved non-target class.
pub const OTHER_LABEL: &str = "other";

/// The ten target classes of the DESED domestic sound event set.
pub const DESED_CLASSES: [&str; 10] = [
    "Alarm_bell_ringing",
    "Blender",
    "Cat",
    "Dishes",
    "Dog",
    "Electric_shaver_toothbrush",
    "Frying",
    "Running_water",
    "Speech",
    "Vacuum_cleaner",
];

/// Ordered set of target class names plus the reserved `other` label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassVocabulary {
    classes: Vec<String>,
    other_label: String,
}

impl ClassVocabulary {
    pub fn new<I, S>(classes: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::with_other_label(classes, OTHER_LABEL)
    }

    pub fn with_other_label<I, S>(classes: I, other_label: impl Into<String>) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let classes: Vec<String> = classes.into_iter().map(Into::into).collect();
        let other_label = other_label.into();
        if classes.is_empty() {
            return Err(Error::Config("vocabulary must contain at least one class".into()));
        }
        if other_label.is_empty() {
            return Err(Error::Config("the `other` label must be non-empty".into()));
        }
        let mut seen = HashSet::new();
        for name in &classes {
            if name.is_empty() {
                return Err(Error::Config("class names must be non-empty".into()));
            }
            if name.contains(['\t', '\n', ',']) {
                return Err(Error::Config(format!(
                    "class name '{name}' contains a tab, newline or comma"
                )));
            }
            if *name == other_label {
                return Err(Error::Config(format!(
                    "'{other_label}' is reserved and cannot be a target class"
                )));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::Config(format!("duplicate class name '{name}'")));
            }
        }
        Ok(Self {
            classes,
            other_label,
        })
    }

    /// The DESED vocabulary, or its first `n` classes.
    pub fn desed(n: usize) -> Result<Self> {
        if n == 0 || n > DESED_CLASSES.len() {
            return Err(Error::Config(format!(
                "DESED vocabulary has {} classes, requested {n}",
                DESED_CLASSES.len()
            )));
        }
        Self::new(DESED_CLASSES[..n].iter().copied())
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn other_label(&self) -> &str {
        &self.other_label
    }

    pub fn index_of(&self, class: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == class)
    }

    pub fn name(&self, index: usize) -> &str {
        &self.classes[index]
    }

    pub fn contains(&self, class: &str) -> bool {
        self.index_of(class).is_some()
    }
}

/// Frame-level class posteriors for one clip: `T` frames by `C` classes,
/// stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameGrid {
    clip_id: String,
    hop_seconds: f64,
    n_classes: usize,
    values: Vec<f64>,
}

impl FrameGrid {
    pub fn new(
        clip_id: impl Into<String>,
        hop_seconds: f64,
        n_classes: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        let clip_id = clip_id.into();
        if !(hop_seconds.is_finite() && hop_seconds > 0.0) {
            return Err(Error::validation(
                &clip_id,
                "hop_seconds",
                format!("must be positive and finite, got {hop_seconds}"),
            ));
        }
        if n_classes == 0 {
            return Err(Error::validation(&clip_id, "classes", "grid has no classes"));
        }
        if values.is_empty() || !values.len().is_multiple_of(n_classes) {
            return Err(Error::validation(
                &clip_id,
                "posteriors",
                format!(
                    "{} values do not form a non-empty T x {n_classes} matrix",
                    values.len()
                ),
            ));
        }
        if let Some(i) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::validation(
                &clip_id,
                format!("frame {} class {}", i / n_classes, i % n_classes),
                format!("posterior {} outside [0, 1]", values[i]),
            ));
        }
        Ok(Self {
            clip_id,
            hop_seconds,
            n_classes,
            values,
        })
    }

    /// Builds a grid from a per-cell function.
    pub fn from_fn(
        clip_id: impl Into<String>,
        hop_seconds: f64,
        n_frames: usize,
        n_classes: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(n_frames * n_classes);
        for t in 0..n_frames {
            for c in 0..n_classes {
                values.push(f(t, c));
            }
        }
        Self::new(clip_id, hop_seconds, n_classes, values)
    }

    pub fn clip_id(&self) -> &str {
        &self.clip_id
    }

    pub fn hop_seconds(&self) -> f64 {
        self.hop_seconds
    }

    pub fn n_frames(&self) -> usize {
        self.values.len() / self.n_classes
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn duration_seconds(&self) -> f64 {
        self.n_frames() as f64 * self.hop_seconds
    }

    #[inline]
    pub fn get(&self, frame: usize, class: usize) -> f64 {
        self.values[frame * self.n_classes + class]
    }

    pub fn row(&self, frame: usize) -> &[f64] {
        &self.values[frame * self.n_classes..(frame + 1) * self.n_classes]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Same clip, frame count, class count and hop.
    pub fn check_aligned(&self, other: &FrameGrid) -> Result<()> {
        if self.clip_id != other.clip_id {
            return Err(Error::Shape(format!(
                "clip ids differ: '{}' vs '{}'",
                self.clip_id, other.clip_id
            )));
        }
        if self.n_frames() != other.n_frames() || self.n_classes != other.n_classes {
            return Err(Error::Shape(format!(
                "clip '{}': {}x{} vs {}x{}",
                self.clip_id,
                self.n_frames(),
                self.n_classes,
                other.n_frames(),
                other.n_classes
            )));
        }
        if self.hop_seconds != other.hop_seconds {
            return Err(Error::Shape(format!(
                "clip '{}': hop {} vs {}",
                self.clip_id, self.hop_seconds, other.hop_seconds
            )));
        }
        Ok(())
    }

    /// Returns a copy whose cells are `f(t, c, value)`; the result is
    /// validated like any other grid.
    pub fn map(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Result<FrameGrid> {
        let c = self.n_classes;
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| f(i / c, i % c, v))
            .collect();
        FrameGrid::new(self.clip_id.clone(), self.hop_seconds, c, values)
    }

    /// Reorders columns: output column `j` is input column `order[j]`.
    pub fn permute_columns(&self, order: &[usize]) -> Result<FrameGrid> {
        if order.len() != self.n_classes {
            return Err(Error::Shape(format!(
                "permutation of length {} for {} classes",
                order.len(),
                self.n_classes
            )));
        }
        let mut values = Vec::with_capacity(self.values.len());
        for t in 0..self.n_frames() {
            let row = self.row(t);
            values.extend(order.iter().map(|&j| row[j]));
        }
        FrameGrid::new(self.clip_id.clone(), self.hop_seconds, self.n_classes, values)
    }
}

/// Checks that a set of per-model grid lists is clip-for-clip aligned.
pub fn check_grid_sets_aligned(sets: &[Vec<FrameGrid>]) -> Result<()> {
    let Some(first) = sets.first() else {
        return Err(Error::Input("no grid sets given".into()));
    };
    for (m, set) in sets.iter().enumerate().skip(1) {
        if set.len() != first.len() {
            return Err(Error::Shape(format!(
                "model {m} has {} clips, model 0 has {}",
                set.len(),
                first.len()
            )));
        }
        for (a, b) in first.iter().zip(set) {
            a.check_aligned(b)?;
        }
    }
    Ok(())
}

/// One strong-label interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub clip_id: String,
    pub onset: f64,
    pub offset: f64,
    pub class: String,
}

impl Event {
    pub fn new(
        clip_id: impl Into<String>,
        onset: f64,
        offset: f64,
        class: impl Into<String>,
    ) -> Self {
        Self {
            clip_id: clip_id.into(),
            onset,
            offset,
            class: class.into(),
        }
    }

    pub fn duration(&self) -> f64 {
        self.offset - self.onset
    }

    pub(crate) fn check_times(&self) -> std::result::Result<(), String> {
        if !(self.onset.is_finite() && self.offset.is_finite()) {
            return Err("onset and offset must be finite".into());
        }
        if self.onset < 0.0 {
            return Err(format!("negative onset {}", self.onset));
        }
        if self.onset >= self.offset {
            return Err(format!(
                "onset {} is not before offset {}",
                self.onset, self.offset
            ));
        }
        Ok(())
    }
}

/// Strong labels or decoded detections, in file order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventList {
    events: Vec<Event>,
}

impl EventList {
    /// Validates times and class membership.
    pub fn new(events: Vec<Event>, vocab: &ClassVocabulary) -> Result<Self> {
        for (i, e) in events.iter().enumerate() {
            if let Err(msg) = e.check_times() {
                return Err(Error::validation(&e.clip_id, format!("event {i}"), msg));
            }
            if !vocab.contains(&e.class) {
                return Err(Error::Vocabulary {
                    location: format!("clip '{}' event {i}", e.clip_id),
                    class: e.class.clone(),
                });
            }
        }
        Ok(Self { events })
    }

    /// Wraps events produced internally (decoders, generators) whose
    /// invariants hold by construction.
    pub(crate) fn from_trusted(events: Vec<Event>) -> Self {
        debug_assert!(events.iter().all(|e| e.check_times().is_ok()));
        Self { events }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Event> {
        self.events.iter()
    }

    pub fn into_events(self) -> Vec<Event> {
        self.events
    }

    /// Events of one clip, in list order.
    pub fn for_clip<'a>(&'a self, clip_id: &'a str) -> impl Iterator<Item = &'a Event> + 'a {
        self.events.iter().filter(move |e| e.clip_id == clip_id)
    }

    /// Groups events by clip id.
    pub fn by_clip(&self) -> BTreeMap<&str, Vec<&Event>> {
        let mut map: BTreeMap<&str, Vec<&Event>> = BTreeMap::new();
        for e in &self.events {
            map.entry(e.clip_id.as_str()).or_default().push(e);
        }
        map
    }

    /// Distinct clip ids in first-appearance order.
    pub fn clip_ids(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.events
            .iter()
            .filter(|e| seen.insert(e.clip_id.as_str()))
            .map(|e| e.clip_id.as_str())
            .collect()
    }

    pub fn extend(&mut self, other: EventList) {
        self.events.extend(other.events);
    }
}

impl<'a> IntoIterator for &'a EventList {
    type Item = &'a Event;
    type IntoIter = std::slice::Iter<'a, Event>;

    fn into_iter(self) -> Self::IntoIter {
        self.events.iter()
    }
}

/// Clip-level class presence annotations.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeakLabelSet {
    labels: BTreeMap<String, BTreeSet<String>>,
}

impl WeakLabelSet {
    pub fn new(labels: BTreeMap<String, BTreeSet<String>>, vocab: &ClassVocabulary) -> Result<Self> {
        for (clip, set) in &labels {
            if set.is_empty() {
                return Err(Error::validation(clip, "weak labels", "empty label set"));
            }
            if let Some(bad) = set.iter().find(|c| !vocab.contains(c)) {
                return Err(Error::Vocabulary {
                    location: format!("clip '{clip}' weak labels"),
                    class: bad.clone(),
                });
            }
        }
        Ok(Self { labels })
    }

    /// Weak labels as the class projection of strong labels.
    pub fn from_events(events: &EventList) -> Self {
        let mut labels: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for e in events {
            labels
                .entry(e.clip_id.clone())
                .or_default()
                .insert(e.class.clone());
        }
        Self { labels }
    }

    pub fn get(&self, clip_id: &str) -> Option<&BTreeSet<String>> {
        self.labels.get(clip_id)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &BTreeSet<String>)> {
        self.labels.iter()
    }

    /// Adds every class in `other` to the matching clip's set.
    pub fn union_with(&mut self, other: &WeakLabelSet) {
        for (clip, set) in &other.labels {
            self.labels
                .entry(clip.clone())
                .or_default()
                .extend(set.iter().cloned());
        }
    }
}

/// Clip-level tagging output for one separated source.
#[derive(Debug, Clone, PartialEq)]
pub struct TagPrediction {
    pub source_id: String,
    pub parent_clip_id: String,
    /// Target-class probabilities in vocabulary order.
    pub target: Vec<f64>,
    /// Probability of the non-target class.
    pub other: f64,
}

impl TagPrediction {
    pub fn new(
        source_id: impl Into<String>,
        parent_clip_id: impl Into<String>,
        target: Vec<f64>,
        other: f64,
        vocab: &ClassVocabulary,
    ) -> Result<Self> {
        let source_id = source_id.into();
        if target.len() != vocab.len() {
            return Err(Error::validation(
                &source_id,
                "probs",
                format!("{} target probabilities for {} classes", target.len(), vocab.len()),
            ));
        }
        for (i, p) in target.iter().chain(std::iter::once(&other)).enumerate() {
            if !(0.0..=1.0).contains(p) {
                let name = if i < vocab.len() {
                    vocab.name(i)
                } else {
                    vocab.other_label()
                };
                return Err(Error::validation(
                    &source_id,
                    format!("probs[{name}]"),
                    format!("probability {p} outside [0, 1]"),
                ));
            }
        }
        Ok(Self {
            source_id,
            parent_clip_id: parent_clip_id.into(),
            target,
            other,
        })
    }
}

/// Mixture id to its ordered separated source ids.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SeparationManifest {
    entries: Vec<(String, Vec<String>)>,
}

impl SeparationManifest {
    pub fn new(entries: Vec<(String, Vec<String>)>) -> Result<Self> {
        let mut seen_mix = HashSet::new();
        let mut seen_src = HashSet::new();
        let n = entries.first().map(|(_, s)| s.len());
        for (mix, sources) in &entries {
            if !seen_mix.insert(mix.as_str()) {
                return Err(Error::validation(mix, "manifest", "duplicate mixture id"));
            }
            if Some(sources.len()) != n {
                return Err(Error::validation(
                    mix,
                    "manifest",
                    format!(
                        "{} sources, but the first mixture has {}",
                        sources.len(),
                        n.unwrap_or(0)
                    ),
                ));
            }
            for s in sources {
                if !seen_src.insert(s.as_str()) {
                    return Err(Error::validation(
                        mix,
                        "manifest",
                        format!("source id '{s}' appears more than once"),
                    ));
                }
            }
        }
        Ok(Self { entries })
    }

    /// Number of sources per mixture, or `None` for an empty manifest.
    pub fn sources_per_mixture(&self) -> Option<usize> {
        self.entries.first().map(|(_, s)| s.len())
    }

    pub fn entries(&self) -> &[(String, Vec<String>)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocabulary_rejects_reserved_and_duplicates() {
        assert!(ClassVocabulary::new(["Cat", "other"]).is_err());
        assert!(ClassVocabulary::new(["Cat", "Cat"]).is_err());
        assert!(ClassVocabulary::new(Vec::<String>::new()).is_err());
        assert!(ClassVocabulary::new([""]).is_err());
        let v = ClassVocabulary::desed(10).unwrap();
        assert_eq!(v.index_of("Speech"), Some(8));
        assert_eq!(v.other_label(), "other");
    }

    #[test]
    fn grid_range_error_names_frame() {
        let mut values = vec![0.5; 20];
        values[13] = 1.2;
        let err = FrameGrid::new("clipA", 0.1, 2, values).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("clipA") && msg.contains("frame 6"), "{msg}");
    }

    #[test]
    fn permutation_round_trip_preserves_values() {
        let g = FrameGrid::from_fn("c", 0.1, 4, 3, |t, c| (t * 3 + c) as f64 / 12.0).unwrap();
        let p = g.permute_columns(&[2, 0, 1]).unwrap();
        assert_eq!(p.get(1, 0), g.get(1, 2));
        let back = p.permute_columns(&[1, 2, 0]).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn manifest_requires_constant_source_count() {
        let ok = SeparationManifest::new(vec![
            ("m1".into(), vec!["a".into(), "b".into()]),
            ("m2".into(), vec!["c".into(), "d".into()]),
        ]);
        assert_eq!(ok.unwrap().sources_per_mixture(), Some(2));
        assert!(SeparationManifest::new(vec![
            ("m1".into(), vec!["a".into(), "b".into()]),
            ("m2".into(), vec!["c".into()]),
        ])
        .is_err());
        assert!(SeparationManifest::new(vec![
            ("m1".into(), vec!["a".into()]),
            ("m2".into(), vec!["a".into()]),
        ])
        .is_err());
    }

    #[test]
    fn event_list_validates() {
        let v = ClassVocabulary::new(["Speech"]).unwrap();
        assert!(EventList::new(vec![Event::new("c", 2.0, 1.0, "Speech")], &v).is_err());
        assert!(EventList::new(vec![Event::new("c", -1.0, 1.0, "Speech")], &v).is_err());
        assert!(matches!(
            EventList::new(vec![Event::new("c", 0.0, 1.0, "Dog")], &v),
            Err(Error::Vocabulary { .. })
        ));
    }
}
