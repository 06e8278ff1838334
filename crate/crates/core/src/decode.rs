//! Frame posteriors to event lists: thresholding, majority (median)
//! smoothing on the binary activity, and run-length extraction.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ClassVocabulary, Event, EventList, FrameGrid};

pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const DEFAULT_MEDIAN_WINDOW: usize = 7;

/// Per-class decision thresholds and median window lengths, indexed in
/// vocabulary order.
#[derive(Debug, Clone, PartialEq)]
pub struct PostProcessConfig {
    thresholds: Vec<f64>,
    windows: Vec<usize>,
}

/// On-disk form (`decode_cfg.json`). Classes that are absent fall back to
/// the defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecodeConfigFile {
    #[serde(default)]
    pub thresholds: BTreeMap<String, f64>,
    #[serde(default)]
    pub median_windows: BTreeMap<String, usize>,
}

fn check_threshold(t: f64) -> Result<()> {
    if t > 0.0 && t < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("threshold {t} is not in (0, 1)")))
    }
}

fn check_window(w: usize) -> Result<()> {
    if w % 2 == 1 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "median window {w} must be an odd positive number of frames"
        )))
    }
}

impl PostProcessConfig {
    pub fn new(thresholds: Vec<f64>, windows: Vec<usize>) -> Result<Self> {
        if thresholds.len() != windows.len() || thresholds.is_empty() {
            return Err(Error::Config(format!(
                "{} thresholds and {} windows",
                thresholds.len(),
                windows.len()
            )));
        }
        thresholds.iter().try_for_each(|&t| check_threshold(t))?;
        windows.iter().try_for_each(|&w| check_window(w))?;
        Ok(Self {
            thresholds,
            windows,
        })
    }

    /// Threshold 0.5 and window 7 for every class.
    pub fn defaults(n_classes: usize) -> Self {
        Self {
            thresholds: vec![DEFAULT_THRESHOLD; n_classes],
            windows: vec![DEFAULT_MEDIAN_WINDOW; n_classes],
        }
    }

    pub fn uniform(n_classes: usize, threshold: f64, window: usize) -> Result<Self> {
        Self::new(vec![threshold; n_classes], vec![window; n_classes])
    }

    pub fn from_file(file: &DecodeConfigFile, vocab: &ClassVocabulary) -> Result<Self> {
        let mut cfg = Self::defaults(vocab.len());
        for (name, &t) in &file.thresholds {
            let j = vocab.index_of(name).ok_or_else(|| Error::Vocabulary {
                location: "decode config thresholds".into(),
                class: name.clone(),
            })?;
            check_threshold(t)?;
            cfg.thresholds[j] = t;
        }
        for (name, &w) in &file.median_windows {
            let j = vocab.index_of(name).ok_or_else(|| Error::Vocabulary {
                location: "decode config median_windows".into(),
                class: name.clone(),
            })?;
            check_window(w)?;
            cfg.windows[j] = w;
        }
        Ok(cfg)
    }

    pub fn to_file(&self, vocab: &ClassVocabulary) -> DecodeConfigFile {
        DecodeConfigFile {
            thresholds: vocab.classes().iter().cloned().zip(self.thresholds.iter().copied()).collect(),
            median_windows: vocab.classes().iter().cloned().zip(self.windows.iter().copied()).collect(),
        }
    }

    /// Same windows, every threshold replaced by `threshold`.
    pub fn with_threshold(&self, threshold: f64) -> Result<Self> {
        check_threshold(threshold)?;
        Ok(Self {
            thresholds: vec![threshold; self.thresholds.len()],
            windows: self.windows.clone(),
        })
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn windows(&self) -> &[usize] {
        &self.windows
    }

    pub fn n_classes(&self) -> usize {
        self.thresholds.len()
    }

    fn check_classes(&self, n: usize) -> Result<()> {
        if n == self.n_classes() {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "decode config covers {} classes, grid has {n}",
                self.n_classes()
            )))
        }
    }
}

/// Boolean frame activity for one clip, row-major `T x C`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryGrid {
    pub clip_id: String,
    hop_seconds: u64, // f64 bits; keeps Eq derivable
    n_classes: usize,
    active: Vec<bool>,
}

impl BinaryGrid {
    pub fn new(clip_id: impl Into<String>, hop_seconds: f64, n_classes: usize, active: Vec<bool>) -> Result<Self> {
        let clip_id = clip_id.into();
        if !(hop_seconds.is_finite() && hop_seconds > 0.0) {
            return Err(Error::validation(&clip_id, "hop_seconds", "must be positive"));
        }
        if n_classes == 0 || active.is_empty() || !active.len().is_multiple_of(n_classes) {
            return Err(Error::validation(
                &clip_id,
                "activity",
                format!("{} cells do not form a T x {n_classes} matrix", active.len()),
            ));
        }
        Ok(Self {
            clip_id,
            hop_seconds: hop_seconds.to_bits(),
            n_classes,
            active,
        })
    }

    pub fn hop_seconds(&self) -> f64 {
        f64::from_bits(self.hop_seconds)
    }

    pub fn n_frames(&self) -> usize {
        self.active.len() / self.n_classes
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    #[inline]
    pub fn get(&self, frame: usize, class: usize) -> bool {
        self.active[frame * self.n_classes + class]
    }

    pub fn cells(&self) -> &[bool] {
        &self.active
    }

    pub fn column(&self, class: usize) -> Vec<bool> {
        (0..self.n_frames()).map(|t| self.get(t, class)).collect()
    }
}

/// Cell is active iff posterior >= its class threshold.
pub fn binarize(grid: &FrameGrid, cfg: &PostProcessConfig) -> Result<BinaryGrid> {
    cfg.check_classes(grid.n_classes())?;
    let c = grid.n_classes();
    let active = grid
        .values()
        .iter()
        .enumerate()
        .map(|(i, &p)| p >= cfg.thresholds[i % c])
        .collect();
    BinaryGrid::new(grid.clip_id(), grid.hop_seconds(), c, active)
}

/// Majority filter over a centered window; frames outside the clip count as
/// inactive.
pub fn smooth_column(column: &[bool], window: usize) -> Result<Vec<bool>> {
    check_window(window)?;
    if window == 1 {
        return Ok(column.to_vec());
    }
    let half = window / 2;
    let n = column.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0usize);
    for &a in column {
        prefix.push(prefix.last().unwrap() + a as usize);
    }
    Ok((0..n)
        .map(|t| {
            let lo = t.saturating_sub(half);
            let hi = (t + half + 1).min(n);
            2 * (prefix[hi] - prefix[lo]) > window
        })
        .collect())
}

pub fn median_smooth(bgrid: &BinaryGrid, cfg: &PostProcessConfig) -> Result<BinaryGrid> {
    cfg.check_classes(bgrid.n_classes())?;
    let (t_len, c_len) = (bgrid.n_frames(), bgrid.n_classes());
    let mut out = bgrid.active.clone();
    for c in 0..c_len {
        if cfg.windows[c] == 1 {
            continue;
        }
        let smoothed = smooth_column(&bgrid.column(c), cfg.windows[c])?;
        for (t, v) in smoothed.into_iter().enumerate().take(t_len) {
            out[t * c_len + c] = v;
        }
    }
    Ok(BinaryGrid {
        active: out,
        ..bgrid.clone()
    })
}

/// Maximal active runs `[a, b]` become events `(a * hop, (b + 1) * hop)`.
/// Output is grouped by class in vocabulary order, onset-sorted within a
/// class.
pub fn extract_events(bgrid: &BinaryGrid, vocab: &ClassVocabulary) -> Result<EventList> {
    if vocab.len() != bgrid.n_classes() {
        return Err(Error::Shape(format!(
            "vocabulary has {} classes, grid has {}",
            vocab.len(),
            bgrid.n_classes()
        )));
    }
    let hop = bgrid.hop_seconds();
    let t_len = bgrid.n_frames();
    let mut events = Vec::new();
    for c in 0..bgrid.n_classes() {
        let mut start = None;
        for t in 0..=t_len {
            let on = t < t_len && bgrid.get(t, c);
            match (on, start) {
                (true, None) => start = Some(t),
                (false, Some(a)) => {
                    events.push(Event::new(
                        bgrid.clip_id.clone(),
                        a as f64 * hop,
                        t as f64 * hop,
                        vocab.name(c),
                    ));
                    start = None;
                }
                _ => {}
            }
        }
    }
    Ok(EventList::from_trusted(events))
}

pub fn decode(grid: &FrameGrid, cfg: &PostProcessConfig, vocab: &ClassVocabulary) -> Result<EventList> {
    let b = binarize(grid, cfg)?;
    let s = median_smooth(&b, cfg)?;
    extract_events(&s, vocab)
}

/// Decodes every grid and concatenates the events in grid order.
pub fn decode_all(grids: &[FrameGrid], cfg: &PostProcessConfig, vocab: &ClassVocabulary) -> Result<EventList> {
    let mut all = EventList::empty();
    for g in grids {
        all.extend(decode(g, cfg, vocab)?);
    }
    Ok(all)
}

// Relative slack when checking that an event ends inside the clip.
const END_SLACK: f64 = 1e-9;

/// Frame `f` of class `c` is active iff `f * hop` lies in `[onset, offset)`
/// of some event of class `c` in clip `clip_id`.
pub fn rasterize(
    events: &EventList,
    clip_id: &str,
    hop_seconds: f64,
    n_frames: usize,
    vocab: &ClassVocabulary,
) -> Result<BinaryGrid> {
    let c_len = vocab.len();
    let mut active = vec![false; n_frames * c_len];
    let clip_end = n_frames as f64 * hop_seconds;
    for e in events.for_clip(clip_id) {
        let c = vocab.index_of(&e.class).ok_or_else(|| Error::Vocabulary {
            location: format!("clip '{clip_id}'"),
            class: e.class.clone(),
        })?;
        if e.offset > clip_end * (1.0 + END_SLACK) {
            return Err(Error::validation(
                clip_id,
                format!("event {}-{} {}", e.onset, e.offset, e.class),
                format!("ends after the clip end {clip_end}"),
            ));
        }
        // start a frame early so the comparison below decides the boundary
        let first = ((e.onset / hop_seconds).floor() as usize).saturating_sub(1);
        for f in first..n_frames {
            let t = f as f64 * hop_seconds;
            if t >= e.offset {
                break;
            }
            if t >= e.onset {
                active[f * c_len + c] = true;
            }
        }
    }
    BinaryGrid::new(clip_id, hop_seconds, c_len, active)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_class() -> ClassVocabulary {
        ClassVocabulary::new(["A"]).unwrap()
    }

    fn row(bits: &[u8]) -> BinaryGrid {
        BinaryGrid::new("c", 0.1, 1, bits.iter().map(|&b| b == 1).collect()).unwrap()
    }

    #[test]
    fn threshold_is_inclusive() {
        let g = FrameGrid::new("c", 0.1, 2, vec![0.5; 8]).unwrap();
        let cfg = PostProcessConfig::defaults(2);
        assert!(binarize(&g, &cfg).unwrap().cells().iter().all(|&a| a));
        let g = FrameGrid::new("c", 0.1, 2, vec![0.49; 8]).unwrap();
        assert!(binarize(&g, &cfg).unwrap().cells().iter().all(|&a| !a));
    }

    #[test]
    fn majority_filter_hand_cases() {
        assert_eq!(
            smooth_column(&[false, true, false, true, false], 3).unwrap(),
            vec![false, false, true, false, false]
        );
        assert_eq!(
            smooth_column(&[false, false, true, false, false], 3).unwrap(),
            vec![false; 5]
        );
        let x = [true, false, true, true];
        assert_eq!(smooth_column(&x, 1).unwrap(), x.to_vec());
        // edge padding counts as inactive
        assert_eq!(smooth_column(&[true, true, false], 3).unwrap(), vec![true, true, false]);
        assert_eq!(smooth_column(&[true, false, false], 3).unwrap(), vec![false; 3]);
        assert!(smooth_column(&x, 4).is_err());
    }

    #[test]
    fn even_window_is_config_error() {
        assert!(PostProcessConfig::new(vec![0.5], vec![2]).is_err());
        assert!(PostProcessConfig::new(vec![0.5], vec![0]).is_err());
        assert!(PostProcessConfig::new(vec![1.0], vec![1]).is_err());
    }

    #[test]
    fn runs_become_events() {
        let ev = extract_events(&row(&[0, 1, 1, 1, 0, 0, 1]), &one_class()).unwrap();
        let times: Vec<(f64, f64)> = ev.iter().map(|e| (e.onset, e.offset)).collect();
        assert_eq!(times.len(), 2);
        assert!((times[0].0 - 0.1).abs() < 1e-12 && (times[0].1 - 0.4).abs() < 1e-12);
        assert!((times[1].0 - 0.6).abs() < 1e-12 && (times[1].1 - 0.7).abs() < 1e-12);
        assert!(extract_events(&row(&[0, 0, 0]), &one_class()).unwrap().is_empty());
    }

    #[test]
    fn rasterize_interval_membership() {
        let v = one_class();
        let ev = EventList::new(vec![Event::new("c", 0.1, 0.4, "A")], &v).unwrap();
        let b = rasterize(&ev, "c", 0.1, 7, &v).unwrap();
        assert_eq!(b.column(0), vec![false, true, true, true, false, false, false]);
        let empty = rasterize(&EventList::empty(), "c", 0.1, 7, &v).unwrap();
        assert!(empty.cells().iter().all(|&a| !a));
        let late = EventList::new(vec![Event::new("c", 0.5, 0.9, "A")], &v).unwrap();
        assert!(rasterize(&late, "c", 0.1, 7, &v).is_err());
    }

    #[test]
    fn decode_zero_grid_is_empty() {
        let v = ClassVocabulary::new(["A", "B"]).unwrap();
        let g = FrameGrid::new("c", 0.1, 2, vec![0.0; 40]).unwrap();
        assert!(decode(&g, &PostProcessConfig::defaults(2), &v).unwrap().is_empty());
    }

    #[test]
    fn config_file_overrides_by_name() {
        let v = ClassVocabulary::new(["A", "B"]).unwrap();
        let file: DecodeConfigFile =
            serde_json::from_str(r#"{"thresholds":{"B":0.3},"median_windows":{"A":1}}"#).unwrap();
        let cfg = PostProcessConfig::from_file(&file, &v).unwrap();
        assert_eq!(cfg.thresholds(), &[0.5, 0.3]);
        assert_eq!(cfg.windows(), &[1, 7]);
        let bad: DecodeConfigFile = serde_json::from_str(r#"{"median_windows":{"A":4}}"#).unwrap();
        assert!(PostProcessConfig::from_file(&bad, &v).is_err());
        let unknown: DecodeConfigFile = serde_json::from_str(r#"{"thresholds":{"Z":0.3}}"#).unwrap();
        assert!(PostProcessConfig::from_file(&unknown, &v).is_err());
    }
}
