//! Selective pseudo-labeling of separated sources.
//!
//! Every separated source gets a pseudo-label from its tag probabilities.
//! A source is kept only when it looks like a single event *and* that
//! event's class is among the parent mixture's known labels.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ClassVocabulary, SeparationManifest, TagPrediction, WeakLabelSet};

pub const DEFAULT_TAU: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "class", rename_all = "snake_case")]
pub enum Verdict {
    /// Exactly one target class is active.
    SingleEvent(String),
    /// No target class is active.
    Other,
    /// Two or more target classes are active.
    Ambiguous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabel {
    pub verdict: Verdict,
    pub confidence: f64,
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("tau {tau} is not in (0, 1)")))
    }
}

/// Indices of target classes with probability >= `tau`.
pub fn active_classes(tag: &TagPrediction, tau: f64) -> Vec<usize> {
    tag.target
        .iter()
        .enumerate()
        .filter(|(_, &p)| p >= tau)
        .map(|(i, _)| i)
        .collect()
}

pub fn assign_pseudo_label(tag: &TagPrediction, vocab: &ClassVocabulary, tau: f64) -> Result<PseudoLabel> {
    check_tau(tau)?;
    let active = active_classes(tag, tau);
    Ok(match active.as_slice() {
        [] => PseudoLabel {
            verdict: Verdict::Other,
            confidence: tag.other,
        },
        [only] => PseudoLabel {
            verdict: Verdict::SingleEvent(vocab.name(*only).to_string()),
            confidence: tag.target[*only],
        },
        many => PseudoLabel {
            verdict: Verdict::Ambiguous,
            confidence: many.iter().map(|&i| tag.target[i]).fold(0.0, f64::max),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    Other,
    Ambiguous,
    NotInWeakLabels,
}

impl RejectReason {
    pub const ALL: [RejectReason; 3] = [Self::Other, Self::Ambiguous, Self::NotInWeakLabels];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Other => "other",
            Self::Ambiguous => "ambiguous",
            Self::NotInWeakLabels => "not-in-weak-labels",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectedSource {
    pub source_id: String,
    pub class: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedSource {
    pub source_id: String,
    pub reason: RejectReason,
}

/// One mixture's selection; one line of `selection.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct SelectionResult {
    pub mixture_id: String,
    pub selected: Vec<SelectedSource>,
    pub rejected: Vec<RejectedSource>,
}

impl SelectionResult {
    pub fn n_sources(&self) -> usize {
        self.selected.len() + self.rejected.len()
    }
}

/// Applies the selection rule to the sources of one mixture, keeping input
/// order. `weak` is the mixture's known label set.
pub fn select(
    mixture_id: &str,
    sources: &[TagPrediction],
    weak: &BTreeSet<String>,
    vocab: &ClassVocabulary,
    tau: f64,
) -> Result<SelectionResult> {
    check_tau(tau)?;
    let mut result = SelectionResult {
        mixture_id: mixture_id.to_string(),
        ..Default::default()
    };
    for tag in sources {
        if tag.parent_clip_id != mixture_id {
            return Err(Error::Input(format!(
                "source '{}' belongs to '{}', not mixture '{mixture_id}'",
                tag.source_id, tag.parent_clip_id
            )));
        }
        let label = assign_pseudo_label(tag, vocab, tau)?;
        let reason = match label.verdict {
            Verdict::SingleEvent(class) if weak.contains(&class) => {
                result.selected.push(SelectedSource {
                    source_id: tag.source_id.clone(),
                    class,
                });
                continue;
            }
            Verdict::SingleEvent(_) => RejectReason::NotInWeakLabels,
            Verdict::Other => RejectReason::Other,
            Verdict::Ambiguous => RejectReason::Ambiguous,
        };
        result.rejected.push(RejectedSource {
            source_id: tag.source_id.clone(),
            reason,
        });
    }
    Ok(result)
}

/// Runs [`select`] for every mixture of a separation manifest.
///
/// Tags are looked up by source id; a source without a tag, a tag whose
/// parent disagrees with the manifest, or a mixture without weak labels is
/// an error.
pub fn select_all(
    manifest: &SeparationManifest,
    tags: &[TagPrediction],
    weak: &WeakLabelSet,
    vocab: &ClassVocabulary,
    tau: f64,
) -> Result<Vec<SelectionResult>> {
    let mut by_id: BTreeMap<&str, &TagPrediction> = BTreeMap::new();
    for t in tags {
        if by_id.insert(t.source_id.as_str(), t).is_some() {
            return Err(Error::Input(format!("duplicate tag for source '{}'", t.source_id)));
        }
    }
    let mut results = Vec::with_capacity(manifest.len());
    for (mixture, source_ids) in manifest.entries() {
        let labels = weak
            .get(mixture)
            .ok_or_else(|| Error::Input(format!("mixture '{mixture}' has no weak labels")))?;
        let sources = source_ids
            .iter()
            .map(|s| {
                by_id
                    .get(s.as_str())
                    .map(|t| (*t).clone())
                    .ok_or_else(|| Error::Input(format!("no tag prediction for source '{s}'")))
                    .and_then(|t| {
                        if t.parent_clip_id == *mixture {
                            Ok(t)
                        } else {
                            Err(Error::Input(format!(
                                "source '{s}' is listed under mixture '{mixture}' but tagged with parent '{}'",
                                t.parent_clip_id
                            )))
                        }
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        results.push(select(mixture, &sources, labels, vocab, tau)?);
    }
    Ok(results)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSummary {
    pub mixtures: usize,
    pub total_sources: usize,
    pub selected: usize,
    pub rejected: BTreeMap<String, usize>,
    pub selected_per_class: BTreeMap<String, usize>,
    /// selected / total_sources, or 0 when there are no sources.
    pub selection_rate: f64,
    pub rate_defined: bool,
}

pub fn selection_report(results: &[SelectionResult]) -> SelectionSummary {
    let mut rejected: BTreeMap<String, usize> = RejectReason::ALL
        .iter()
        .map(|r| (r.as_str().to_string(), 0))
        .collect();
    let mut selected_per_class: BTreeMap<String, usize> = BTreeMap::new();
    let mut total = 0;
    let mut selected = 0;
    for r in results {
        total += r.n_sources();
        selected += r.selected.len();
        for s in &r.selected {
            *selected_per_class.entry(s.class.clone()).or_default() += 1;
        }
        for s in &r.rejected {
            *rejected.get_mut(s.reason.as_str()).unwrap() += 1;
        }
    }
    SelectionSummary {
        mixtures: results.len(),
        total_sources: total,
        selected,
        rejected,
        selected_per_class,
        selection_rate: if total == 0 { 0.0 } else { selected as f64 / total as f64 },
        rate_defined: total > 0,
    }
}

pub fn selections_to_string(results: &[SelectionResult]) -> String {
    let mut out = String::new();
    for r in results {
        out.push_str(&serde_json::to_string(r).expect("selection serializes"));
        out.push('\n');
    }
    out
}

pub fn parse_selections_str(text: &str) -> Result<Vec<SelectionResult>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| Error::parse("selection.jsonl", i + 1, format!("invalid selection record: {e}")))
        })
        .collect()
}
