//! Combining frame posteriors from several systems.
//!
//! * [`combine_pair`]: convex pair combination `alpha * sed + (1 - alpha) * fsed`,
//!   with [`fit_alpha`] choosing `alpha` on a development set.
//! * [`classwise_weights`] / [`fuse_classwise`]: per-class softmax over the
//!   systems' development F1, sharpened by `beta`.
//! * [`fuse_average`] and the per-class logistic regression baseline.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decode::{decode_all, rasterize, PostProcessConfig};
use crate::error::{Error, Result};
use crate::metrics::{event_f1, CollarConfig};
use crate::types::{check_grid_sets_aligned, ClassVocabulary, EventList, FrameGrid};

/// Probability clamp used by every binary cross-entropy in this module.
pub const BCE_EPS: f64 = 1e-7;

/// Scores closer than this are treated as ties by the parameter searches.
const TIE_TOL: f64 = 1e-12;

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::Config(format!("alpha {alpha} outside [0, 1]")))
    }
}

pub fn combine_pair(p_sed: &FrameGrid, p_fsed: &FrameGrid, alpha: f64) -> Result<FrameGrid> {
    check_alpha(alpha)?;
    p_sed.check_aligned(p_fsed)?;
    let values = p_sed
        .values()
        .iter()
        .zip(p_fsed.values())
        .map(|(&a, &b)| (alpha * a + (1.0 - alpha) * b).clamp(a.min(b), a.max(b)))
        .collect();
    FrameGrid::new(p_sed.clip_id(), p_sed.hop_seconds(), p_sed.n_classes(), values)
}

pub fn combine_pair_sets(sed: &[FrameGrid], fsed: &[FrameGrid], alpha: f64) -> Result<Vec<FrameGrid>> {
    if sed.len() != fsed.len() {
        return Err(Error::Shape(format!("{} vs {} clips", sed.len(), fsed.len())));
    }
    sed.iter().zip(fsed).map(|(a, b)| combine_pair(a, b, alpha)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FusionMode {
    /// Includes the `1/M` prefactor in front of the weighted sum.
    Faithful,
    /// Plain weighted sum; fusing identical grids returns the grid.
    #[default]
    Normalized,
}

/// Development-set F1 of each model (rows) for each class (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassF1Table {
    pub models: Vec<String>,
    pub classes: Vec<String>,
    pub f1: Vec<Vec<f64>>,
}

impl ClassF1Table {
    pub fn new(models: Vec<String>, classes: Vec<String>, f1: Vec<Vec<f64>>) -> Result<Self> {
        let t = Self { models, classes, f1 };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() || self.f1.len() != self.models.len() {
            return Err(Error::Shape(format!(
                "F1 table has {} model ids and {} rows",
                self.models.len(),
                self.f1.len()
            )));
        }
        for (m, row) in self.f1.iter().enumerate() {
            if row.len() != self.classes.len() {
                return Err(Error::Shape(format!(
                    "F1 row for '{}' has {} values for {} classes",
                    self.models[m],
                    row.len(),
                    self.classes.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::Config(format!(
                    "F1 value {v} for model '{}' outside [0, 1]",
                    self.models[m]
                )));
            }
        }
        Ok(())
    }

    pub fn n_models(&self) -> usize {
        self.models.len()
    }

    /// Reorders columns to match `vocab`; errors if the class sets differ.
    pub fn aligned_to(&self, vocab: &ClassVocabulary) -> Result<Self> {
        if self.classes.len() != vocab.len() {
            return Err(Error::Shape(format!(
                "F1 table has {} classes, vocabulary has {}",
                self.classes.len(),
                vocab.len()
            )));
        }
        let cols: Vec<usize> = vocab
            .classes()
            .iter()
            .map(|name| {
                self.classes.iter().position(|c| c == name).ok_or_else(|| Error::Vocabulary {
                    location: "F1 table".into(),
                    class: name.clone(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            models: self.models.clone(),
            classes: vocab.classes().to_vec(),
            f1: self
                .f1
                .iter()
                .map(|row| cols.iter().map(|&j| row[j]).collect())
                .collect(),
        })
    }

    /// Decodes each model's development grids and records class-wise F1.
    pub fn from_dev(
        models: Vec<String>,
        dev_sets: &[Vec<FrameGrid>],
        truth: &EventList,
        vocab: &ClassVocabulary,
        decode_cfg: &PostProcessConfig,
        collar: &CollarConfig,
    ) -> Result<Self> {
        if models.len() != dev_sets.len() {
            return Err(Error::Shape(format!(
                "{} model ids for {} grid sets",
                models.len(),
                dev_sets.len()
            )));
        }
        let f1 = dev_sets
            .iter()
            .map(|set| {
                let est = decode_all(set, decode_cfg, vocab)?;
                let report = event_f1(truth, &est, vocab, collar)?;
                Ok(report.classes.iter().map(|c| c.f1).collect())
            })
            .collect::<Result<_>>()?;
        Self::new(models, vocab.classes().to_vec(), f1)
    }
}

/// Per-class model weights (`weights[m][c]`); every column sums to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionWeights {
    pub weights: Vec<Vec<f64>>,
    pub beta: f64,
    pub mode: FusionMode,
}

impl FusionWeights {
    pub fn n_models(&self) -> usize {
        self.weights.len()
    }

    pub fn n_classes(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }
}

/// Softmax over models of `beta * F1`, computed per class with the column
/// maximum subtracted.
pub fn classwise_weights(table: &ClassF1Table, beta: f64, mode: FusionMode) -> Result<FusionWeights> {
    table.validate()?;
    if !beta.is_finite() {
        return Err(Error::Config(format!("beta must be finite, got {beta}")));
    }
    let m = table.n_models();
    let c = table.classes.len();
    let mut weights = vec![vec![0.0; c]; m];
    // column-wise softmax over models
    #[allow(clippy::needless_range_loop)]
    for j in 0..c {
        let scaled: Vec<f64> = (0..m).map(|i| beta * table.f1[i][j]).collect();
        let top = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scaled.iter().map(|s| (s - top).exp()).collect();
        let total: f64 = exps.iter().sum();
        for i in 0..m {
            weights[i][j] = exps[i] / total;
        }
    }
    Ok(FusionWeights { weights, beta, mode })
}

fn check_fusable(grids: &[&FrameGrid]) -> Result<()> {
    let first = grids
        .first()
        .ok_or_else(|| Error::Input("fusion needs at least one grid".into()))?;
    grids.iter().skip(1).try_for_each(|g| first.check_aligned(g))
}

pub fn fuse_classwise(grids: &[&FrameGrid], weights: &FusionWeights) -> Result<FrameGrid> {
    check_fusable(grids)?;
    let first = grids[0];
    let (m, c) = (grids.len(), first.n_classes());
    if weights.n_models() != m || weights.n_classes() != c {
        return Err(Error::Shape(format!(
            "weights are {}x{}, grids are {m} models x {c} classes",
            weights.n_models(),
            weights.n_classes()
        )));
    }
    let scale = match weights.mode {
        FusionMode::Faithful => 1.0 / m as f64,
        FusionMode::Normalized => 1.0,
    };
    let values = (0..first.values().len())
        .map(|i| {
            let j = i % c;
            let mut acc = 0.0;
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for (g, w) in grids.iter().zip(&weights.weights) {
                let v = g.values()[i];
                acc += w[j] * v;
                lo = lo.min(v);
                hi = hi.max(v);
            }
            // rounding can push a convex combination one ulp outside its inputs
            (scale * acc).clamp(scale * lo, scale * hi)
        })
        .collect();
    FrameGrid::new(first.clip_id(), first.hop_seconds(), c, values)
}

pub fn fuse_average(grids: &[&FrameGrid]) -> Result<FrameGrid> {
    check_fusable(grids)?;
    let first = grids[0];
    let m = grids.len() as f64;
    let values = (0..first.values().len())
        .map(|i| {
            let (sum, lo, hi) = grids.iter().fold(
                (0.0, f64::INFINITY, f64::NEG_INFINITY),
                |(s, lo, hi), g| {
                    let v = g.values()[i];
                    (s + v, lo.min(v), hi.max(v))
                },
            );
            (sum / m).clamp(lo, hi)
        })
        .collect();
    FrameGrid::new(first.clip_id(), first.hop_seconds(), first.n_classes(), values)
}

/// Transposes `sets[model][clip]` into per-clip slices and applies `f`.
fn per_clip<F>(sets: &[Vec<FrameGrid>], f: F) -> Result<Vec<FrameGrid>>
where
    F: Fn(&[&FrameGrid]) -> Result<FrameGrid> + Sync,
{
    check_grid_sets_aligned(sets)?;
    (0..sets[0].len())
        .into_par_iter()
        .map(|k| {
            let clip: Vec<&FrameGrid> = sets.iter().map(|s| &s[k]).collect();
            f(&clip)
        })
        .collect()
}

pub fn fuse_classwise_sets(sets: &[Vec<FrameGrid>], weights: &FusionWeights) -> Result<Vec<FrameGrid>> {
    per_clip(sets, |g| fuse_classwise(g, weights))
}

pub fn fuse_average_sets(sets: &[Vec<FrameGrid>]) -> Result<Vec<FrameGrid>> {
    per_clip(sets, fuse_average)
}

/// Binary cross-entropy of one prediction, clamped to `[BCE_EPS, 1 - BCE_EPS]`.
#[inline]
pub fn bce(p: f64, y: f64) -> f64 {
    let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// Rasterized 0/1 frame targets for every grid, flattened like the grids.
pub fn frame_targets(grids: &[FrameGrid], truth: &EventList, vocab: &ClassVocabulary) -> Result<Vec<Vec<f64>>> {
    grids
        .iter()
        .map(|g| {
            let b = rasterize(truth, g.clip_id(), g.hop_seconds(), g.n_frames(), vocab)?;
            Ok(b.cells().iter().map(|&a| a as u8 as f64).collect())
        })
        .collect()
}

/// Mean frame BCE of `grids` against rasterized `truth`.
pub fn mean_frame_bce(grids: &[FrameGrid], truth: &EventList, vocab: &ClassVocabulary) -> Result<f64> {
    let targets = frame_targets(grids, truth, vocab)?;
    Ok(mean_bce_against(grids, &targets))
}

fn mean_bce_against(grids: &[FrameGrid], targets: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    let mut n = 0usize;
    for (g, y) in grids.iter().zip(targets) {
        for (&p, &t) in g.values().iter().zip(y) {
            total += bce(p, t);
        }
        n += y.len();
    }
    total / n as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaObjective {
    #[default]
    MacroCollarF1,
    FrameBce,
}

/// `(parameter, score)` pairs from a one-dimensional search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterCurve {
    pub parameter: String,
    pub objective: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaFit {
    pub alpha: f64,
    pub objective: AlphaObjective,
    /// For the BCE objective the score is the negated BCE.
    pub curve: Vec<(f64, f64)>,
}

impl AlphaFit {
    pub fn curve(&self) -> ParameterCurve {
        ParameterCurve {
            parameter: "alpha".into(),
            objective: match self.objective {
                AlphaObjective::MacroCollarF1 => "macro-collar-f1".into(),
                AlphaObjective::FrameBce => "neg-frame-bce".into(),
            },
            points: self.curve.clone(),
        }
    }
}

/// Picks the best-scoring candidate; ties are resolved by `prefer`, which
/// returns true when its first argument should win.
fn argmax_with_ties(curve: &[(f64, f64)], prefer: impl Fn(f64, f64) -> bool) -> f64 {
    let best = curve.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    curve
        .iter()
        .filter(|p| p.1 >= best - TIE_TOL)
        .map(|p| p.0)
        .reduce(|a, b| if prefer(b, a) { b } else { a })
        .expect("non-empty curve")
}

/// Grid search over alpha in {0.00, 0.01, ..., 1.00}. Ties go to the alpha
/// closest to 0.5, then to the smaller alpha.
#[allow(clippy::too_many_arguments)]
pub fn fit_alpha(
    dev_sed: &[FrameGrid],
    dev_fsed: &[FrameGrid],
    truth: &EventList,
    vocab: &ClassVocabulary,
    decode_cfg: &PostProcessConfig,
    collar: &CollarConfig,
    objective: AlphaObjective,
) -> Result<AlphaFit> {
    if dev_sed.is_empty() {
        return Err(Error::Input("alpha fitting needs a non-empty development set".into()));
    }
    let targets = match objective {
        AlphaObjective::FrameBce => Some(frame_targets(dev_sed, truth, vocab)?),
        AlphaObjective::MacroCollarF1 => None,
    };
    let curve = (0..=100)
        .into_par_iter()
        .map(|i| {
            let alpha = i as f64 / 100.0;
            let fused = combine_pair_sets(dev_sed, dev_fsed, alpha)?;
            let score = match &targets {
                Some(y) => -mean_bce_against(&fused, y),
                None => {
                    let est = decode_all(&fused, decode_cfg, vocab)?;
                    event_f1(truth, &est, vocab, collar)?.macro_f1
                }
            };
            Ok((alpha, score))
        })
        .collect::<Result<Vec<_>>>()?;
    let alpha = argmax_with_ties(&curve, |a, b| {
        let (da, db) = ((a - 0.5).abs(), (b - 0.5).abs());
        da < db - 1e-12 || ((da - db).abs() <= 1e-12 && a < b)
    });
    Ok(AlphaFit {
        alpha,
        objective,
        curve,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaSweep {
    pub beta: f64,
    pub curve: Vec<(f64, f64)>,
}

impl BetaSweep {
    pub fn curve(&self) -> ParameterCurve {
        ParameterCurve {
            parameter: "beta".into(),
            objective: "macro-collar-f1".into(),
            points: self.curve.clone(),
        }
    }
}

/// Scores class-wise fusion (normalized mode) on the development set for
/// every beta; ties go to the smallest beta.
pub fn sweep_beta(
    dev_sets: &[Vec<FrameGrid>],
    table: &ClassF1Table,
    truth: &EventList,
    vocab: &ClassVocabulary,
    betas: &[f64],
    decode_cfg: &PostProcessConfig,
    collar: &CollarConfig,
) -> Result<BetaSweep> {
    if betas.is_empty() {
        return Err(Error::Config("beta sweep needs at least one value".into()));
    }
    let table = table.aligned_to(vocab)?;
    let curve = betas
        .iter()
        .map(|&beta| {
            let w = classwise_weights(&table, beta, FusionMode::Normalized)?;
            let fused = fuse_classwise_sets(dev_sets, &w)?;
            let est = decode_all(&fused, decode_cfg, vocab)?;
            Ok((beta, event_f1(truth, &est, vocab, collar)?.macro_f1))
        })
        .collect::<Result<Vec<_>>>()?;
    let beta = argmax_with_ties(&curve, |a, b| a < b);
    Ok(BetaSweep { beta, curve })
}

// ---------------------------------------------------------------------------
// logistic regression fusion

pub const LOGISTIC_MAX_ITERATIONS: usize = 10_000;
pub const LOGISTIC_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassLogistic {
    pub class: String,
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Set when the targets were all 0 or all 1; the class then uses the
    /// equal-weight average.
    pub fallback: bool,
    pub iterations: usize,
    /// Training loss at the last iterate; `None` for fallback classes.
    pub final_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFusionModel {
    pub n_models: usize,
    pub classes: Vec<ClassLogistic>,
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean logistic loss of `sigmoid(w . x + b)` and its gradient.
///
/// `features` is row-major `n x m`. Returns `(loss, d loss / d w, d loss / d b)`.
pub fn logistic_objective(
    features: &[f64],
    m: usize,
    targets: &[f64],
    weights: &[f64],
    bias: f64,
) -> (f64, Vec<f64>, f64) {
    let n = targets.len();
    let mut loss = 0.0;
    let mut gw = vec![0.0; m];
    let mut gb = 0.0;
    for (x, &y) in features.chunks_exact(m).zip(targets) {
        let z = bias + x.iter().zip(weights).map(|(a, w)| a * w).sum::<f64>();
        // one exp serves both softplus(z) and sigmoid(z)
        let e = (-z.abs()).exp();
        let sp = z.max(0.0) + e.ln_1p();
        let s = if z >= 0.0 { 1.0 / (1.0 + e) } else { e / (1.0 + e) };
        loss += sp - y * z;
        let r = s - y;
        gb += r;
        for (g, a) in gw.iter_mut().zip(x) {
            *g += r * a;
        }
    }
    let inv = 1.0 / n as f64;
    gw.iter_mut().for_each(|g| *g *= inv);
    (loss * inv, gw, gb * inv)
}

/// Largest eigenvalue of the symmetric PSD matrix `E[x~ x~^T]` with a bias
/// column appended, by power iteration.
fn second_moment_spectral_radius(features: &[f64], m: usize) -> f64 {
    let d = m + 1;
    let n = features.len() / m;
    let mut s = vec![0.0; d * d];
    for x in features.chunks_exact(m) {
        for i in 0..d {
            let xi = if i < m { x[i] } else { 1.0 };
            for j in 0..d {
                let xj = if j < m { x[j] } else { 1.0 };
                s[i * d + j] += xi * xj;
            }
        }
    }
    s.iter_mut().for_each(|v| *v /= n as f64);
    let mut v = vec![1.0 / (d as f64).sqrt(); d];
    let mut lambda = 0.0;
    for _ in 0..200 {
        let w: Vec<f64> = (0..d).map(|i| (0..d).map(|j| s[i * d + j] * v[j]).sum()).collect();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        lambda = norm;
        v = w.into_iter().map(|x| x / norm).collect();
    }
    lambda
}

fn fit_class(features: &[f64], m: usize, targets: &[f64], class: &str) -> ClassLogistic {
    let positives = targets.iter().filter(|&&y| y > 0.5).count();
    if positives == 0 || positives == targets.len() {
        return ClassLogistic {
            class: class.to_string(),
            weights: vec![1.0 / m as f64; m],
            bias: 0.0,
            fallback: true,
            iterations: 0,
            final_loss: None,
        };
    }
    // the loss is L-smooth with L = lambda_max / 4, so a 1/L step always
    // passes the sufficient-decrease test below; longer steps are tried first
    let smoothness = 0.25 * second_moment_spectral_radius(features, m);
    let min_step = 1.0 / smoothness.max(1e-12);
    let mut step = min_step;
    let mut w = vec![0.0; m];
    let mut b = 0.0;
    let (mut loss, mut gw, mut gb) = logistic_objective(features, m, targets, &w, b);
    let mut iterations = 0;
    while iterations < LOGISTIC_MAX_ITERATIONS {
        let grad_sq = gw.iter().map(|g| g * g).sum::<f64>() + gb * gb;
        step *= 2.0;
        let (nw, nb, next, ngw, ngb) = loop {
            let nw: Vec<f64> = w.iter().zip(&gw).map(|(wi, gi)| wi - step * gi).collect();
            let nb = b - step * gb;
            let (next, ngw, ngb) = logistic_objective(features, m, targets, &nw, nb);
            if next <= loss - 0.5 * step * grad_sq || step <= min_step {
                break (nw, nb, next, ngw, ngb);
            }
            step = (step * 0.5).max(min_step);
        };
        iterations += 1;
        let improvement = loss - next;
        w = nw;
        b = nb;
        loss = next;
        gw = ngw;
        gb = ngb;
        if improvement < LOGISTIC_TOLERANCE {
            break;
        }
    }
    ClassLogistic {
        class: class.to_string(),
        weights: w,
        bias: b,
        fallback: false,
        iterations,
        final_loss: Some(loss),
    }
}

/// Fits one logistic regression per class on frame-level inputs (one
/// feature per model) against rasterized 0/1 targets, by full-batch
/// gradient descent from zero.
pub fn fit_logistic_fusion(
    dev_sets: &[Vec<FrameGrid>],
    truth: &EventList,
    vocab: &ClassVocabulary,
) -> Result<LogisticFusionModel> {
    check_grid_sets_aligned(dev_sets)?;
    let m = dev_sets.len();
    let c = vocab.len();
    let reference = &dev_sets[0];
    if reference.is_empty() {
        return Err(Error::Input("logistic fusion needs development clips".into()));
    }
    if reference[0].n_classes() != c {
        return Err(Error::Shape(format!(
            "grids have {} classes, vocabulary has {c}",
            reference[0].n_classes()
        )));
    }
    let targets = frame_targets(reference, truth, vocab)?;
    let classes = (0..c)
        .into_par_iter()
        .map(|j| {
            let mut x = Vec::new();
            let mut y = Vec::new();
            for (k, tgt) in targets.iter().enumerate() {
                for t in 0..reference[k].n_frames() {
                    for set in dev_sets {
                        x.push(set[k].get(t, j));
                    }
                    y.push(tgt[t * c + j]);
                }
            }
            fit_class(&x, m, &y, vocab.name(j))
        })
        .collect();
    Ok(LogisticFusionModel { n_models: m, classes })
}

pub fn apply_logistic_fusion(model: &LogisticFusionModel, grids: &[&FrameGrid]) -> Result<FrameGrid> {
    check_fusable(grids)?;
    let first = grids[0];
    let c = first.n_classes();
    if grids.len() != model.n_models || model.classes.len() != c {
        return Err(Error::Shape(format!(
            "model expects {} inputs x {} classes, got {} x {c}",
            model.n_models,
            model.classes.len(),
            grids.len()
        )));
    }
    let values = (0..first.values().len())
        .map(|i| {
            let cls = &model.classes[i % c];
            if cls.fallback {
                let mean = grids.iter().map(|g| g.values()[i]).sum::<f64>() / grids.len() as f64;
                mean.clamp(0.0, 1.0)
            } else {
                let z = cls.bias
                    + grids
                        .iter()
                        .zip(&cls.weights)
                        .map(|(g, w)| w * g.values()[i])
                        .sum::<f64>();
                sigmoid(z)
            }
        })
        .collect();
    FrameGrid::new(first.clip_id(), first.hop_seconds(), c, values)
}

pub fn apply_logistic_fusion_sets(model: &LogisticFusionModel, sets: &[Vec<FrameGrid>]) -> Result<Vec<FrameGrid>> {
    per_clip(sets, |g| apply_logistic_fusion(model, g))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(values: Vec<f64>, c: usize) -> FrameGrid {
        FrameGrid::new("clip", 0.1, c, values).unwrap()
    }

    #[test]
    fn pair_endpoints_and_midpoint() {
        let a = grid(vec![0.2, 0.9], 2);
        let b = grid(vec![0.6, 0.1], 2);
        assert_eq!(combine_pair(&a, &b, 1.0).unwrap(), a);
        assert_eq!(combine_pair(&a, &b, 0.0).unwrap(), b);
        assert!((combine_pair(&a, &b, 0.5).unwrap().get(0, 0) - 0.4).abs() < 1e-15);
        assert!(combine_pair(&a, &b, 1.5).is_err());
        let other = FrameGrid::new("x", 0.1, 2, vec![0.0, 0.0]).unwrap();
        assert!(matches!(combine_pair(&a, &other, 0.5), Err(Error::Shape(_))));
    }

    #[test]
    fn softmax_weights_examples() {
        let t = ClassF1Table::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec!["X".into()],
            vec![vec![0.1], vec![0.5], vec![0.9]],
        )
        .unwrap();
        let w = classwise_weights(&t, 0.0, FusionMode::Normalized).unwrap();
        assert!(w.weights.iter().all(|r| (r[0] - 1.0 / 3.0).abs() < 1e-15));

        let t2 = ClassF1Table::new(vec!["a".into(), "b".into()], vec!["X".into()], vec![vec![0.4], vec![0.6]]).unwrap();
        let w = classwise_weights(&t2, 1.0, FusionMode::Normalized).unwrap();
        // 1 / (1 + e^0.2) computed independently
        let expected = 1.0 / (1.0 + 0.2f64.exp());
        assert!((w.weights[0][0] - expected).abs() < 1e-15);
        assert!((w.weights[0][0] - 0.4502).abs() < 1e-4);
        assert!((w.weights[1][0] - 0.5498).abs() < 1e-4);

        let w = classwise_weights(&t, 50.0, FusionMode::Normalized).unwrap();
        assert!(w.weights[2][0] >= 1.0 - 1e-6);
        assert!(classwise_weights(&t, f64::NAN, FusionMode::Normalized).is_err());
    }

    #[test]
    fn faithful_mode_divides_by_model_count() {
        let a = grid(vec![0.4], 1);
        let b = grid(vec![0.8], 1);
        let t = ClassF1Table::new(vec!["a".into(), "b".into()], vec!["X".into()], vec![vec![0.3], vec![0.9]]).unwrap();
        let w = classwise_weights(&t, 0.0, FusionMode::Faithful).unwrap();
        assert!((fuse_classwise(&[&a, &b], &w).unwrap().get(0, 0) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn average_basics() {
        let a = grid(vec![0.0, 0.3], 2);
        let b = grid(vec![1.0, 0.3], 2);
        assert_eq!(fuse_average(&[&a]).unwrap(), a);
        assert_eq!(fuse_average(&[&a, &b]).unwrap().row(0), &[0.5, 0.3]);
        assert!(fuse_average(&[]).is_err());
    }

    #[test]
    fn logistic_zero_model_outputs_half() {
        let g = grid(vec![0.0, 0.7, 1.0, 0.2], 2);
        let model = LogisticFusionModel {
            n_models: 1,
            classes: (0..2)
                .map(|j| ClassLogistic {
                    class: format!("c{j}"),
                    weights: vec![0.0],
                    bias: 0.0,
                    fallback: false,
                    iterations: 0,
                    final_loss: None,
                })
                .collect(),
        };
        assert!(apply_logistic_fusion(&model, &[&g]).unwrap().values().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn degenerate_class_falls_back() {
        let fit = fit_class(&[0.2, 0.4, 0.9, 0.1], 2, &[0.0, 0.0], "X");
        assert!(fit.fallback);
        assert_eq!(fit.weights, vec![0.5, 0.5]);
    }

    #[test]
    fn tie_rules() {
        let flat = vec![(0.0, 1.0), (0.3, 1.0), (0.5, 1.0), (0.7, 1.0)];
        let pick = argmax_with_ties(&flat, |a, b| {
            let (da, db) = ((a - 0.5).abs(), (b - 0.5).abs());
            da < db - 1e-12 || ((da - db).abs() <= 1e-12 && a < b)
        });
        assert_eq!(pick, 0.5);
        let sym = vec![(0.4, 1.0), (0.6, 1.0)];
        let pick = argmax_with_ties(&sym, |a, b| {
            let (da, db) = ((a - 0.5).abs(), (b - 0.5).abs());
            da < db - 1e-12 || ((da - db).abs() <= 1e-12 && a < b)
        });
        assert_eq!(pick, 0.4);
        assert_eq!(argmax_with_ties(&[(4.0, 0.2), (1.0, 0.2), (2.0, 0.1)], |a, b| a < b), 1.0);
    }
}
