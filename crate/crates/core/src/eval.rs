//! Accuracy metrics and the report tables: weight-range breakdown, error
//! histograms, feature sensitivity and per-constraint physics shares. Also a
//! closed-form least-squares linear baseline.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::Tensor;
use crate::domain::{to_feature_vector, BridgeSample, DomainError, FeatureVector, StandardizationStats, FEATURE_COUNT, FEATURE_NAMES};
use crate::models::{Model, ModelError};
use crate::training::LossHistory;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("report i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("report serialization: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub count: usize,
    pub mse: f64,
    pub rmse: f64,
    pub mae: f64,
    /// `None` when the truth has zero variance.
    pub r2: Option<f64>,
}

fn check_pair(truth: &[f64], pred: &[f64]) -> Result<(), EvalError> {
    if truth.is_empty() || truth.len() != pred.len() {
        return Err(EvalError::Contract(format!("need equal non-zero lengths, got {} truths and {} predictions", truth.len(), pred.len())));
    }
    Ok(())
}

pub fn compute_metrics(truth: &[f64], pred: &[f64]) -> Result<Metrics, EvalError> {
    check_pair(truth, pred)?;
    let n = truth.len() as f64;
    let mut ss_res = 0.0;
    let mut abs = 0.0;
    for (t, p) in truth.iter().zip(pred) {
        ss_res += (p - t) * (p - t);
        abs += (p - t).abs();
    }
    let mean = truth.iter().sum::<f64>() / n;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean) * (t - mean)).sum();
    let mse = ss_res / n;
    Ok(Metrics { count: truth.len(), mse, rmse: mse.sqrt(), mae: abs / n, r2: (ss_tot > 0.0).then(|| 1.0 - ss_res / ss_tot) })
}

/// Bins on the true weight; each includes its lower bound, the last bounded bin also its upper.
pub const RANGE_BINS_G: [(f64, f64); 3] = [(20.0, 61.0), (61.0, 121.0), (121.0, 200.0)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeBin {
    pub label: String,
    pub lower_g: f64,
    pub upper_g: f64,
    pub count: usize,
    pub metrics: Option<Metrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeBreakdown {
    pub bins: Vec<RangeBin>,
}

fn range_slot(t: f64) -> usize {
    let (lo, hi) = (RANGE_BINS_G[0].0, RANGE_BINS_G[RANGE_BINS_G.len() - 1].1);
    if t < lo {
        return 0;
    }
    if t > hi {
        return RANGE_BINS_G.len() + 1;
    }
    1 + RANGE_BINS_G.iter().position(|&(a, b)| t >= a && t < b).unwrap_or(RANGE_BINS_G.len() - 1)
}

pub fn range_breakdown(truth: &[f64], pred: &[f64]) -> Result<RangeBreakdown, EvalError> {
    check_pair(truth, pred)?;
    let mut bounds = vec![("below".to_string(), f64::NEG_INFINITY, RANGE_BINS_G[0].0)];
    bounds.extend(RANGE_BINS_G.iter().map(|&(a, b)| (format!("{a}-{b}"), a, b)));
    bounds.push(("above".to_string(), RANGE_BINS_G[RANGE_BINS_G.len() - 1].1, f64::INFINITY));
    let mut groups: Vec<(Vec<f64>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); bounds.len()];
    for (&t, &p) in truth.iter().zip(pred) {
        let g = &mut groups[range_slot(t)];
        g.0.push(t);
        g.1.push(p);
    }
    let bins = bounds
        .into_iter()
        .zip(groups)
        .map(|((label, lower_g, upper_g), (t, p))| RangeBin {
            label,
            lower_g,
            upper_g,
            count: t.len(),
            metrics: if t.is_empty() { None } else { compute_metrics(&t, &p).ok() },
        })
        .collect();
    Ok(RangeBreakdown { bins })
}

/// Bin `k` covers `[(k - ½)·width, (k + ½)·width)`, so bin 0 is centred on zero error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    /// `(bin centre, count)` in ascending order, empty bins omitted.
    pub bins: Vec<(f64, usize)>,
}

impl Histogram {
    fn build(values: &[f64], width: f64) -> Self {
        let mut counts = std::collections::BTreeMap::<i64, usize>::new();
        for v in values {
            *counts.entry((v / width).round() as i64).or_default() += 1;
        }
        Self { bin_width: width, bins: counts.into_iter().map(|(k, c)| (k as f64 * width, c)).collect() }
    }

    pub fn total(&self) -> usize {
        self.bins.iter().map(|b| b.1).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorDistribution {
    /// Of `|p - t|` in grams.
    pub absolute: Histogram,
    /// Of `100·(p - t)/t` in percent.
    pub relative: Histogram,
    /// Share of relative errors within ±10%.
    pub within_10_percent: f64,
    /// Samples with zero truth, left out of the relative histogram.
    pub zero_truth_excluded: usize,
}

pub fn error_distribution(truth: &[f64], pred: &[f64], bin_width_abs: f64, bin_width_rel: f64) -> Result<ErrorDistribution, EvalError> {
    check_pair(truth, pred)?;
    if !(bin_width_abs > 0.0 && bin_width_rel > 0.0) {
        return Err(EvalError::Contract("bin widths must be positive".into()));
    }
    let abs: Vec<f64> = truth.iter().zip(pred).map(|(t, p)| (p - t).abs()).collect();
    let rel: Vec<f64> = truth.iter().zip(pred).filter(|(t, _)| **t != 0.0).map(|(t, p)| 100.0 * (p - t) / t).collect();
    let within = rel.iter().filter(|r| r.abs() <= 10.0 + 1e-9).count();
    Ok(ErrorDistribution {
        absolute: Histogram::build(&abs, bin_width_abs),
        within_10_percent: if rel.is_empty() { 0.0 } else { within as f64 / rel.len() as f64 },
        zero_truth_excluded: truth.len() - rel.len(),
        relative: Histogram::build(&rel, bin_width_rel),
    })
}

/// Anything that maps standardized feature rows to grams.
pub trait Regressor {
    fn predict_rows(&self, rows: &[FeatureVector]) -> Result<Vec<f64>, EvalError>;

    fn is_trained(&self) -> bool {
        true
    }
}

impl Regressor for Model {
    fn predict_rows(&self, rows: &[FeatureVector]) -> Result<Vec<f64>, EvalError> {
        let data: Vec<[f64; FEATURE_COUNT]> = rows.iter().map(|r| r.0).collect();
        Ok(self.predict_standardized(&Tensor::from_rows(&data).map_err(ModelError::from)?)?)
    }

    fn is_trained(&self) -> bool {
        self.metadata.provenance.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScore {
    pub feature: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    /// In feature-slot order.
    pub scores: Vec<FeatureScore>,
    /// Slot indices by descending score.
    pub ranking: Vec<usize>,
    pub perturbation_std: f64,
    pub samples: usize,
    /// Set when the regressor reports itself untrained.
    pub untrained: bool,
}

/// Mean absolute output change when each standardized slot moves by `±perturbation`,
/// averaged over both signs. At most `max_samples` rows are used, sampled with `seed`.
pub fn feature_sensitivity<R: Regressor + ?Sized>(
    model: &R,
    rows: &[FeatureVector],
    perturbation: f64,
    max_samples: Option<usize>,
    seed: u64,
) -> Result<SensitivityReport, EvalError> {
    if rows.is_empty() {
        return Err(EvalError::Contract("sensitivity needs at least one sample".into()));
    }
    let rows: Vec<FeatureVector> = match max_samples {
        Some(k) if k < rows.len() => {
            let mut idx = sample(&mut ChaCha8Rng::seed_from_u64(seed), rows.len(), k).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| rows[i]).collect()
        }
        _ => rows.to_vec(),
    };
    let base = model.predict_rows(&rows)?;
    let mut scores = Vec::with_capacity(FEATURE_COUNT);
    for slot in 0..FEATURE_COUNT {
        let mut total = 0.0;
        for sign in [1.0, -1.0] {
            let moved: Vec<FeatureVector> = rows
                .iter()
                .map(|r| {
                    let mut v = *r;
                    v.0[slot] += sign * perturbation;
                    v
                })
                .collect();
            let out = model.predict_rows(&moved)?;
            total += out.iter().zip(&base).map(|(a, b)| (a - b).abs()).sum::<f64>() / rows.len() as f64;
        }
        scores.push(FeatureScore { feature: FEATURE_NAMES[slot].to_string(), score: total / 2.0 });
    }
    let mut ranking: Vec<usize> = (0..FEATURE_COUNT).collect();
    ranking.sort_by(|&a, &b| scores[b].score.total_cmp(&scores[a].score).then(a.cmp(&b)));
    Ok(SensitivityReport { scores, ranking, perturbation_std: perturbation, samples: rows.len(), untrained: !model.is_trained() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContributionRow {
    pub epoch: usize,
    pub constraint: String,
    pub value: f64,
    /// `value / physics total`; `None` when the epoch's total is zero.
    pub share: Option<f64>,
}

pub fn physics_contribution_report(history: &LossHistory) -> Result<Vec<ContributionRow>, EvalError> {
    if history.epochs.is_empty() {
        return Err(EvalError::Contract("empty loss history".into()));
    }
    let mut rows = Vec::new();
    for e in &history.epochs {
        let total: f64 = e.constraints.iter().sum();
        for (name, &value) in history.constraints.iter().zip(&e.constraints) {
            rows.push(ContributionRow { epoch: e.epoch, constraint: name.clone(), value, share: (total > 0.0).then(|| value / total) });
        }
    }
    Ok(rows)
}

pub fn contribution_csv(rows: &[ContributionRow]) -> String {
    let mut out = String::from("epoch,constraint,value,share\n");
    for r in rows {
        let share = r.share.map(|s| s.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{},{}\n", r.epoch, r.constraint, r.value, share));
    }
    out
}

/// Ordinary least squares on standardized features, solved by SVD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearBaseline {
    pub stats: StandardizationStats,
    pub coefficients: [f64; FEATURE_COUNT],
    pub intercept: f64,
}

impl LinearBaseline {
    pub fn fit(samples: &[BridgeSample]) -> Result<Self, EvalError> {
        let vectors: Vec<FeatureVector> = samples.iter().map(|s| to_feature_vector(&s.params)).collect::<Result<_, _>>()?;
        let stats = StandardizationStats::fit(&vectors)?;
        let n = samples.len();
        let design = DMatrix::from_fn(n, FEATURE_COUNT + 1, |r, c| if c == 0 { 1.0 } else { stats.apply(&vectors[r]).0[c - 1] });
        let y = DVector::from_iterator(n, samples.iter().map(|s| s.weight_g));
        let beta = design
            .svd(true, true)
            .solve(&y, 1e-10)
            .map_err(|e| EvalError::Contract(format!("least squares failed: {e}")))?;
        let mut coefficients = [0.0; FEATURE_COUNT];
        coefficients.copy_from_slice(&beta.as_slice()[1..]);
        Ok(Self { stats, coefficients, intercept: beta[0] })
    }

    pub fn predict(&self, samples: &[BridgeSample]) -> Result<Vec<f64>, EvalError> {
        let rows: Vec<FeatureVector> = samples.iter().map(|s| to_feature_vector(&s.params).map(|v| self.stats.apply(&v))).collect::<Result<_, _>>()?;
        self.predict_rows(&rows)
    }
}

impl Regressor for LinearBaseline {
    fn predict_rows(&self, rows: &[FeatureVector]) -> Result<Vec<f64>, EvalError> {
        Ok(rows.iter().map(|r| self.intercept + r.0.iter().zip(&self.coefficients).map(|(x, c)| x * c).sum::<f64>()).collect())
    }
}

/// Metrics plus the mean true weight, as written to `metrics.json` and embedded in model files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub arch: String,
    pub samples: usize,
    pub mse: f64,
    pub rmse: f64,
    pub mae: f64,
    pub r2: Option<f64>,
    pub mean_weight_g: f64,
    pub within_10_percent: f64,
}

/// Everything `evaluate` writes.
#[derive(Debug, Clone)]
pub struct EvaluationReport {
    pub summary: EvaluationSummary,
    pub range: RangeBreakdown,
    pub errors: ErrorDistribution,
    pub sensitivity: SensitivityReport,
    pub contributions: Vec<ContributionRow>,
    pub predictions: Vec<f64>,
}

pub const REPORT_FILES: [&str; 5] =
    ["metrics.json", "range_breakdown.csv", "error_distribution.csv", "sensitivity.csv", "physics_contribution.csv"];

/// Absolute-error bin width in grams and relative-error bin width in percent.
pub const ERROR_BIN_WIDTHS: (f64, f64) = (2.0, 2.0);

/// Evaluates `model` on `samples`; `history` feeds the physics-contribution table
/// (left empty when the history has no epochs).
pub fn evaluate_model(model: &Model, samples: &[BridgeSample], history: &LossHistory) -> Result<EvaluationReport, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::Contract("no samples to evaluate".into()));
    }
    let rows: Vec<FeatureVector> = samples.iter().map(|s| to_feature_vector(&s.params).map(|v| model.stats.apply(&v))).collect::<Result<_, _>>()?;
    let predictions = model.predict_rows(&rows)?;
    let truth: Vec<f64> = samples.iter().map(|s| s.weight_g).collect();
    let m = compute_metrics(&truth, &predictions)?;
    let errors = error_distribution(&truth, &predictions, ERROR_BIN_WIDTHS.0, ERROR_BIN_WIDTHS.1)?;
    let summary = EvaluationSummary {
        arch: model.architecture().to_string(),
        samples: m.count,
        mse: m.mse,
        rmse: m.rmse,
        mae: m.mae,
        r2: m.r2,
        mean_weight_g: truth.iter().sum::<f64>() / truth.len() as f64,
        within_10_percent: errors.within_10_percent,
    };
    Ok(EvaluationReport {
        summary,
        range: range_breakdown(&truth, &predictions)?,
        errors,
        sensitivity: feature_sensitivity(model, &rows, 1.0, None, 0)?,
        contributions: if history.epochs.is_empty() { Vec::new() } else { physics_contribution_report(history)? },
        predictions,
    })
}

impl EvaluationReport {
    /// Writes the five files named in [`REPORT_FILES`] into `dir`.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<(), EvalError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(REPORT_FILES[0]), serde_json::to_string_pretty(&self.summary)?)?;

        let mut range = String::from("bin,lower_g,upper_g,count,mse,rmse,mae,r2\n");
        for b in &self.range.bins {
            let m = b.metrics.map(|m| (m.mse.to_string(), m.rmse.to_string(), m.mae.to_string(), m.r2.map(|r| r.to_string()).unwrap_or_default()));
            let (mse, rmse, mae, r2) = m.unwrap_or_default();
            range.push_str(&format!("{},{},{},{},{mse},{rmse},{mae},{r2}\n", b.label, b.lower_g, b.upper_g, b.count));
        }
        std::fs::write(dir.join(REPORT_FILES[1]), range)?;

        let mut errors = String::from("kind,bin_centre,bin_width,count\n");
        for (kind, h) in [("absolute_g", &self.errors.absolute), ("relative_pct", &self.errors.relative)] {
            for (centre, count) in &h.bins {
                errors.push_str(&format!("{kind},{centre},{},{count}\n", h.bin_width));
            }
        }
        std::fs::write(dir.join(REPORT_FILES[2]), errors)?;

        let mut sens = String::from("rank,feature,score\n");
        for (rank, &i) in self.sensitivity.ranking.iter().enumerate() {
            let s = &self.sensitivity.scores[i];
            sens.push_str(&format!("{},{},{}\n", rank + 1, s.feature, s.score));
        }
        std::fs::write(dir.join(REPORT_FILES[3]), sens)?;

        std::fs::write(dir.join(REPORT_FILES[4]), contribution_csv(&self.contributions))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::EpochRecord;
    use proptest::prelude::*;

    #[test]
    fn metric_hand_cases() {
        let m = compute_metrics(&[0.0, 0.0, 4.0, 4.0], &[0.0, 1.0, 3.0, 4.0]).unwrap();
        assert_eq!(m.r2, Some(0.875));
        assert_eq!(m.mse, 0.5);
        assert_eq!(m.mae, 0.5);
        let t = [3.0, 5.0, 10.0];
        let p = compute_metrics(&t, &t).unwrap();
        assert_eq!((p.mse, p.mae, p.r2), (0.0, 0.0, Some(1.0)));
        let mean = compute_metrics(&t, &[6.0; 3]).unwrap();
        assert_eq!(mean.r2, Some(0.0));
        assert_eq!(compute_metrics(&[2.0, 2.0], &[1.0, 3.0]).unwrap().r2, None);
        assert!(compute_metrics(&[1.0], &[]).is_err());
        assert!(compute_metrics(&[], &[]).is_err());
    }

    #[test]
    fn range_bins_partition() {
        let truth = [10.0, 20.0, 60.9, 61.0, 120.5, 121.0, 200.0, 200.1];
        let b = range_breakdown(&truth, &truth).unwrap();
        let counts: Vec<usize> = b.bins.iter().map(|x| x.count).collect();
        assert_eq!(counts, vec![1, 2, 2, 2, 1]);
        let all50 = range_breakdown(&[50.0; 5], &[51.0; 5]).unwrap();
        assert_eq!(all50.bins[1].count, 5);
        assert!(all50.bins[0].metrics.is_none());
    }

    #[test]
    fn error_histograms() {
        let t = [50.0, 80.0, 120.0, 160.0];
        let perfect = error_distribution(&t, &t, 1.0, 1.0).unwrap();
        assert_eq!(perfect.absolute.bins, vec![(0.0, 4)]);
        assert_eq!(perfect.relative.bins, vec![(0.0, 4)]);
        let p: Vec<f64> = t.iter().map(|v| 1.05 * v).collect();
        let d = error_distribution(&t, &p, 1.0, 1.0).unwrap();
        assert_eq!(d.relative.bins, vec![(5.0, 4)]);
        assert_eq!(d.within_10_percent, 1.0);
        let z = error_distribution(&[0.0, 10.0], &[1.0, 10.0], 1.0, 1.0).unwrap();
        assert_eq!(z.zero_truth_excluded, 1);
        assert_eq!(z.absolute.total(), 2);
        assert_eq!(z.relative.total(), 1);
    }

    struct Probe;

    impl Regressor for Probe {
        fn predict_rows(&self, rows: &[FeatureVector]) -> Result<Vec<f64>, EvalError> {
            Ok(rows.iter().map(|r| 3.0 * r.0[1]).collect())
        }
    }

    #[test]
    fn linear_probe_sensitivity() {
        let rows: Vec<FeatureVector> = (0..10).map(|i| FeatureVector([i as f64 * 0.1; FEATURE_COUNT])).collect();
        let r = feature_sensitivity(&Probe, &rows, 1.0, None, 0).unwrap();
        assert_eq!(r.scores[1].score, 3.0);
        assert!(r.scores.iter().enumerate().all(|(i, s)| i == 1 || s.score == 0.0));
        assert_eq!(r.ranking[0], 1);
        let mut sorted = r.ranking.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..FEATURE_COUNT).collect::<Vec<_>>());
    }

    #[test]
    fn ignored_feature_scores_zero() {
        use crate::models::{PinnConfig, TargetScale};
        let stats = StandardizationStats { mean: [0.0; 8], std: [1.0; 8], degenerate: [false; 8] };
        let mut model = Model::new_pinn(PinnConfig::default(), stats, TargetScale::default(), 0).unwrap();
        let crate::models::Network::Pinn(net) = &mut model.network else { unreachable!() };
        let w = &mut net.hidden[0].0.weight;
        let cols = w.cols();
        w.data_mut()[4 * cols..5 * cols].fill(0.0);
        let rows: Vec<FeatureVector> = (0..6).map(|i| FeatureVector([i as f64 * 0.3 - 1.0; 8])).collect();
        let r = feature_sensitivity(&model, &rows, 1.0, None, 0).unwrap();
        assert_eq!(r.scores[4].score, 0.0);
        assert!(r.untrained);
    }

    #[test]
    fn contribution_shares() {
        let history = LossHistory {
            constraints: vec!["a".into(), "b".into(), "c".into()],
            epochs: vec![
                EpochRecord { epoch: 1, data_loss: 1.0, physics_loss: 2.0, total_loss: 1.3, val_loss: 1.0, constraints: vec![0.0, 2.0, 0.0] },
                EpochRecord { epoch: 2, data_loss: 1.0, physics_loss: 0.6, total_loss: 0.88, val_loss: 1.0, constraints: vec![0.1, 0.2, 0.3] },
                EpochRecord { epoch: 3, data_loss: 1.0, physics_loss: 0.0, total_loss: 0.7, val_loss: 1.0, constraints: vec![0.0; 3] },
            ],
            best_epoch: None,
        };
        let rows = physics_contribution_report(&history).unwrap();
        assert_eq!(rows.len(), 9);
        assert_eq!(rows[1].share, Some(1.0));
        let s: f64 = rows[3..6].iter().map(|r| r.share.unwrap()).sum();
        assert!((s - 1.0).abs() < 1e-9);
        assert!(rows[6..].iter().all(|r| r.share.is_none()));
        assert_eq!(contribution_csv(&rows).lines().count(), 10);
    }

    #[test]
    fn linear_baseline_recovers_affine_map() {
        use crate::data::synthesize;
        let ds = synthesize(3, 40).unwrap();
        let mut samples = ds.samples.clone();
        for s in &mut samples {
            let v = to_feature_vector(&s.params).unwrap().0;
            s.weight_g = 5.0 + 0.5 * v[1] + 2.0 * v[0];
        }
        let lin = LinearBaseline::fit(&samples).unwrap();
        let pred = lin.predict(&samples).unwrap();
        for (p, s) in pred.iter().zip(&samples) {
            assert!((p - s.weight_g).abs() < 1e-8 * s.weight_g.abs().max(1.0));
        }
    }

    proptest! {
        #[test]
        fn r2_invariant_under_reordering(pairs in prop::collection::vec((0.0f64..200.0, 0.0f64..200.0), 3..40), rot in 0usize..40) {
            let (t, p): (Vec<f64>, Vec<f64>) = pairs.iter().cloned().unzip();
            let k = rot % t.len();
            let (mut t2, mut p2) = (t.clone(), p.clone());
            t2.rotate_left(k);
            p2.rotate_left(k);
            let a = compute_metrics(&t, &p).unwrap().r2;
            let b = compute_metrics(&t2, &p2).unwrap().r2;
            match (a, b) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0)),
                (a, b) => prop_assert_eq!(a, b),
            }
            if let Some(r) = a { prop_assert!(r <= 1.0) }
        }

        #[test]
        fn within_ten_percent_scale_invariant(pairs in prop::collection::vec((1.0f64..200.0, 0.5f64..1.5), 1..30), k in 0.1f64..10.0) {
            let t: Vec<f64> = pairs.iter().map(|x| x.0).collect();
            // Keep ratios away from the ±10% boundary so rescaling cannot flip them by rounding.
            let p: Vec<f64> = pairs.iter().map(|x| x.0 * if (x.1 - 1.1).abs() < 1e-6 || (x.1 - 0.9).abs() < 1e-6 { 1.0 } else { x.1 }).collect();
            let a = error_distribution(&t, &p, 1.0, 1.0).unwrap().within_10_percent;
            let ts: Vec<f64> = t.iter().map(|v| v * k).collect();
            let ps: Vec<f64> = p.iter().map(|v| v * k).collect();
            prop_assert_eq!(a, error_distribution(&ts, &ps, 1.0, 1.0).unwrap().within_10_percent);
        }
    }
}
