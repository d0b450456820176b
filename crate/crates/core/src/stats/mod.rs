//! Baseline statistics: percentiles against the human distribution,
//! per-group aggregates, DAT-vs-surprisal regressions, and the
//! surprisal-controlled comparison.

mod report;

pub use report::{
    emit_report, CurvePoint, FitRow, GroupReportRow, HumanSummary, LabeledSurprisalControl,
    MatrixRow, RunReport, ScatterRow,
};

use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harness::Sample;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("cannot read {path}: {source}")]
    FileNotReadable {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("no usable row in {path}: {detail}")]
    NoUsableRows { path: String, detail: String },
    #[error("empty group: {0}")]
    EmptyGroup(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("surprisal ranges do not overlap")]
    NoOverlap,
    #[error("write failure at {path}: {source}")]
    WriteFailure {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Which normalization the standard deviation uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StdMode {
    /// Divide by n (descriptive bands).
    Population,
    /// Divide by n − 1.
    Sample,
}

/// Streaming (Welford) mean and standard deviation.
pub fn mean_std(values: &[f64], mode: StdMode) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mut mean = 0.0f64;
    let mut m2 = 0.0f64;
    for (i, v) in values.iter().enumerate() {
        let delta = v - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (v - mean);
    }
    let n = values.len();
    let variance = match mode {
        StdMode::Population => m2 / n as f64,
        StdMode::Sample => {
            if n < 2 {
                0.0
            } else {
                m2 / (n - 1) as f64
            }
        }
    };
    (mean, variance.max(0.0).sqrt())
}

/// The human baseline: one DAT score per participant, optionally paired
/// with mean surprisals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HumanDataset {
    pub scores: Vec<f64>,
    pub surprisals: Option<Vec<f64>>,
}

impl HumanDataset {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// (surprisal, dat) pairs, when surprisals were loaded.
    pub fn points(&self) -> Option<Vec<(f64, f64)>> {
        self.surprisals.as_ref().map(|surprisals| {
            surprisals
                .iter()
                .copied()
                .zip(self.scores.iter().copied())
                .collect()
        })
    }
}

/// A loaded human dataset plus how many rows were dropped.
#[derive(Debug, Clone)]
pub struct HumanLoad {
    pub dataset: HumanDataset,
    pub rows_skipped: usize,
}

/// Read the human CSV, keeping rows whose score column parses as a number.
///
/// Column names are configuration: the distribution files differ. When
/// `surprisal_col` is given, only rows with both values parse are kept so
/// the two lists stay parallel.
pub fn load_human_scores(
    path: impl AsRef<Path>,
    score_col: &str,
    surprisal_col: Option<&str>,
) -> Result<HumanLoad, StatsError> {
    let path = path.as_ref();
    let not_readable = |source| StatsError::FileNotReadable {
        path: path.display().to_string(),
        source,
    };
    let file = File::open(path).map_err(not_readable)?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| StatsError::NoUsableRows {
            path: path.display().to_string(),
            detail: format!("header: {e}"),
        })?
        .clone();
    let score_idx = headers
        .iter()
        .position(|h| h == score_col)
        .ok_or_else(|| StatsError::NoUsableRows {
            path: path.display().to_string(),
            detail: format!("no column named {score_col:?}"),
        })?;
    let surprisal_idx = match surprisal_col {
        None => None,
        Some(name) => Some(headers.iter().position(|h| h == name).ok_or_else(|| {
            StatsError::NoUsableRows {
                path: path.display().to_string(),
                detail: format!("no column named {name:?}"),
            }
        })?),
    };

    let mut scores = Vec::new();
    let mut surprisals = Vec::new();
    let mut rows_skipped = 0usize;
    for record in reader.records() {
        let Ok(record) = record else {
            rows_skipped += 1;
            continue;
        };
        let parsed_score = record
            .get(score_idx)
            .and_then(|f| f.trim().parse::<f64>().ok())
            .filter(|v| v.is_finite());
        let parsed_surprisal = surprisal_idx.map(|idx| {
            record
                .get(idx)
                .and_then(|f| f.trim().parse::<f64>().ok())
                .filter(|v| v.is_finite())
        });
        match (parsed_score, parsed_surprisal) {
            (Some(score), None) => scores.push(score),
            (Some(score), Some(Some(surprisal))) => {
                scores.push(score);
                surprisals.push(surprisal);
            }
            _ => rows_skipped += 1,
        }
    }
    if scores.is_empty() {
        return Err(StatsError::NoUsableRows {
            path: path.display().to_string(),
            detail: "score column never parsed".to_string(),
        });
    }
    Ok(HumanLoad {
        dataset: HumanDataset {
            scores,
            surprisals: surprisal_idx.map(|_| surprisals),
        },
        rows_skipped,
    })
}

/// Share of the human distribution strictly below `score`, in percent.
pub fn percentile(score: f64, dataset: &HumanDataset) -> f64 {
    if dataset.is_empty() {
        return f64::NAN;
    }
    let below = dataset.scores.iter().filter(|&&h| h < score).count();
    100.0 * below as f64 / dataset.len() as f64
}

/// Aggregation key: one row per model/condition/decoding setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupKey {
    pub model_id: String,
    pub condition: String,
    pub strategy: String,
    pub temperature: f64,
}

impl GroupKey {
    fn of(sample: &Sample) -> Self {
        Self {
            model_id: sample.model_id.clone(),
            condition: sample.condition.to_string(),
            strategy: match sample.config.strategy {
                crate::harness::Strategy::Greedy => "greedy".to_string(),
                crate::harness::Strategy::TopP => "top_p".to_string(),
            },
            temperature: sample.config.effective_temperature(),
        }
    }

    fn sort_key(&self) -> (&str, &str, &str, f64) {
        (
            &self.model_id,
            &self.condition,
            &self.strategy,
            self.temperature,
        )
    }
}

/// Per-group aggregate over scored samples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupStats {
    pub key: GroupKey,
    pub mean: f64,
    pub std: f64,
    /// Scored samples contributing to mean/std.
    pub count: usize,
    /// Samples in the group without a DAT result, over all group samples.
    pub invalid_answer_rate: f64,
}

/// Group samples by (model, condition, strategy, temperature) and compute
/// mean, standard deviation, count, and invalid-answer rate per group.
pub fn aggregate(samples: &[Sample], mode: StdMode) -> Result<Vec<GroupStats>, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::EmptyGroup("no samples".to_string()));
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| {
        let (ka, kb) = (GroupKey::of(&samples[a]), GroupKey::of(&samples[b]));
        ka.sort_key()
            .0
            .cmp(kb.sort_key().0)
            .then(ka.condition.cmp(&kb.condition))
            .then(ka.strategy.cmp(&kb.strategy))
            .then(ka.temperature.total_cmp(&kb.temperature))
    });

    let mut groups: Vec<GroupStats> = Vec::new();
    let mut current: Option<(GroupKey, Vec<f64>, usize)> = None;
    for idx in order {
        let sample = &samples[idx];
        let key = GroupKey::of(sample);
        let matches_current = current.as_ref().is_some_and(|(k, _, _)| {
            k.model_id == key.model_id
                && k.condition == key.condition
                && k.strategy == key.strategy
                && k.temperature.total_cmp(&key.temperature).is_eq()
        });
        if !matches_current {
            if let Some(group) = current.take() {
                groups.push(finish_group(group, mode));
            }
            current = Some((key, Vec::new(), 0));
        }
        let (_, scores, total) = current.as_mut().expect("group initialized");
        *total += 1;
        if let Some(dat) = &sample.dat {
            scores.push(dat.score);
        }
    }
    if let Some(group) = current.take() {
        groups.push(finish_group(group, mode));
    }
    Ok(groups)
}

fn finish_group((key, scores, total): (GroupKey, Vec<f64>, usize), mode: StdMode) -> GroupStats {
    let (mean, std) = mean_std(&scores, mode);
    GroupStats {
        key,
        mean,
        std,
        count: scores.len(),
        invalid_answer_rate: (total - scores.len()) as f64 / total as f64,
    }
}

/// Ordinary least squares of dat on surprisal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Pearson correlation; 0 when the response is constant.
    pub r: f64,
}

impl LinearFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

/// Fit `dat = slope · surprisal + intercept` on `(surprisal, dat)` points.
pub fn linear_fit(points: &[(f64, f64)]) -> Result<LinearFit, StatsError> {
    if points.len() < 3 {
        return Err(StatsError::DegenerateInput(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0f64;
    let mut syy = 0.0f64;
    let mut sxy = 0.0f64;
    for (x, y) in points {
        sxx += (x - mean_x) * (x - mean_x);
        syy += (y - mean_y) * (y - mean_y);
        sxy += (x - mean_x) * (y - mean_y);
    }
    if sxx == 0.0 {
        return Err(StatsError::DegenerateInput(
            "zero variance in surprisal".to_string(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let r = if syy == 0.0 { 0.0 } else { sxy / (sxx.sqrt() * syy.sqrt()) };
    Ok(LinearFit { slope, intercept, r })
}

/// Surprisal-controlled comparison of a model against the human baseline.
///
/// Two complementary readings are reported because the controlling method
/// itself is a modeling choice: (a) the gap between per-source OLS fits
/// evaluated at the pooled mean surprisal, and (b) the mean paired
/// difference of per-bin DAT means over equal-width surprisal bins where
/// both sources have at least [`MIN_BIN_POINTS`] points.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurprisalControl {
    pub model_fit: Option<LinearFit>,
    pub human_fit: Option<LinearFit>,
    pub pooled_mean_surprisal: f64,
    /// model_fit − human_fit at the pooled mean surprisal.
    pub intercept_gap: Option<f64>,
    pub bins: usize,
    pub usable_bins: usize,
    /// Mean over usable bins of (model bin mean − human bin mean).
    pub paired_difference: Option<f64>,
    /// Set when fewer than 3 bins were usable; reported, not fatal.
    pub low_bin_coverage: bool,
}

/// Minimum points per source a bin needs to enter the paired comparison.
pub const MIN_BIN_POINTS: usize = 5;

pub fn surprisal_control(
    model_points: &[(f64, f64)],
    human_points: &[(f64, f64)],
    bins: usize,
) -> Result<SurprisalControl, StatsError> {
    if model_points.is_empty() || human_points.is_empty() {
        return Err(StatsError::DegenerateInput(
            "both point sets must be nonempty".to_string(),
        ));
    }
    let bins = bins.max(1);
    let range = |points: &[(f64, f64)]| {
        let lo = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let hi = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    let (model_lo, model_hi) = range(model_points);
    let (human_lo, human_hi) = range(human_points);
    let lo = model_lo.max(human_lo);
    let hi = model_hi.min(human_hi);
    if lo > hi {
        return Err(StatsError::NoOverlap);
    }

    let model_fit = linear_fit(model_points).ok();
    let human_fit = linear_fit(human_points).ok();
    let pooled_mean_surprisal = model_points
        .iter()
        .chain(human_points)
        .map(|p| p.0)
        .sum::<f64>()
        / (model_points.len() + human_points.len()) as f64;
    let intercept_gap = match (&model_fit, &human_fit) {
        (Some(m), Some(h)) => {
            Some(m.predict(pooled_mean_surprisal) - h.predict(pooled_mean_surprisal))
        }
        _ => None,
    };

    // Equal-width bins over the overlapping range; degenerate width means
    // everything lands in one bin.
    let width = (hi - lo) / bins as f64;
    let bin_of = |x: f64| -> usize {
        if width == 0.0 {
            0
        } else {
            (((x - lo) / width) as usize).min(bins - 1)
        }
    };
    let mut model_bins: Vec<Vec<f64>> = vec![Vec::new(); bins];
    let mut human_bins: Vec<Vec<f64>> = vec![Vec::new(); bins];
    for (x, y) in model_points {
        if *x >= lo && *x <= hi {
            model_bins[bin_of(*x)].push(*y);
        }
    }
    for (x, y) in human_points {
        if *x >= lo && *x <= hi {
            human_bins[bin_of(*x)].push(*y);
        }
    }
    let mut diffs = Vec::new();
    for (m, h) in model_bins.iter().zip(&human_bins) {
        if m.len() >= MIN_BIN_POINTS && h.len() >= MIN_BIN_POINTS {
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            diffs.push(mean(m) - mean(h));
        }
    }
    let usable_bins = diffs.len();
    let paired_difference = if diffs.is_empty() {
        None
    } else {
        Some(diffs.iter().sum::<f64>() / diffs.len() as f64)
    };

    Ok(SurprisalControl {
        model_fit,
        human_fit,
        pooled_mean_surprisal,
        intercept_gap,
        bins,
        usable_bins,
        paired_difference,
        low_bin_coverage: usable_bins < 3,
    })
}

/// One (temperature, mean, std) row per temperature, ascending.
pub fn temperature_curve(samples: &[Sample], mode: StdMode) -> Result<Vec<CurvePoint>, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::EmptyGroup("no samples".to_string()));
    }
    let mut scored: Vec<(f64, f64)> = samples
        .iter()
        .filter_map(|s| {
            s.dat
                .as_ref()
                .map(|d| (s.config.effective_temperature(), d.score))
        })
        .collect();
    if scored.is_empty() {
        return Err(StatsError::EmptyGroup("no scored samples".to_string()));
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut curve = Vec::new();
    let mut i = 0;
    while i < scored.len() {
        let t = scored[i].0;
        let mut scores = Vec::new();
        while i < scored.len() && scored[i].0.total_cmp(&t).is_eq() {
            scores.push(scored[i].1);
            i += 1;
        }
        let (mean, std) = mean_std(&scores, mode);
        curve.push(CurvePoint {
            temperature: t,
            mean,
            std,
            count: scores.len(),
        });
    }
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dat::DatResult;
    use crate::harness::{DecodingConfig, PromptCondition};

    fn sample_with_score(model: &str, temperature: f64, score: Option<f64>) -> Sample {
        let config = if temperature == 0.0 {
            DecodingConfig::greedy()
        } else {
            DecodingConfig::top_p(0.9, temperature).unwrap()
        };
        Sample {
            seq: 0,
            model_id: model.to_string(),
            condition: PromptCondition::Dat,
            config,
            raw_text: String::new(),
            answer: Default::default(),
            dat: score.map(|s| DatResult {
                score: s,
                n: 7,
                words: Vec::new(),
                matrix: Vec::new(),
                mean_surprisal: 0.0,
            }),
            timestamp_ms: 0,
            attempt_count: 1,
            error: None,
        }
    }

    #[test]
    fn percentile_bounds() {
        let dataset = HumanDataset {
            scores: vec![70.0, 75.0, 80.0, 85.0],
            surprisals: None,
        };
        assert_eq!(percentile(60.0, &dataset), 0.0);
        assert_eq!(percentile(90.0, &dataset), 100.0);
        assert_eq!(percentile(78.0, &dataset), 50.0);
        // nondecreasing in score
        let mut last = 0.0;
        for s in [60.0, 70.0, 74.0, 77.0, 81.0, 86.0] {
            let p = percentile(s, &dataset);
            assert!(p >= last);
            last = p;
        }
    }

    #[test]
    fn aggregate_arithmetic() {
        let samples = vec![
            sample_with_score("m", 0.0, Some(80.0)),
            sample_with_score("m", 0.0, Some(90.0)),
        ];
        let groups = aggregate(&samples, StdMode::Population).unwrap();
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].mean, 85.0);
        assert_eq!(groups[0].std, 5.0);
        assert_eq!(groups[0].count, 2);
        assert_eq!(groups[0].invalid_answer_rate, 0.0);
    }

    #[test]
    fn aggregate_single_sample_and_invalid_rate() {
        let samples = vec![
            sample_with_score("m", 0.0, Some(80.0)),
            sample_with_score("m", 0.0, None),
        ];
        let groups = aggregate(&samples, StdMode::Population).unwrap();
        assert_eq!(groups[0].std, 0.0);
        assert_eq!(groups[0].count, 1);
        assert_eq!(groups[0].invalid_answer_rate, 0.5);
    }

    #[test]
    fn aggregate_splits_groups() {
        let samples = vec![
            sample_with_score("a", 0.0, Some(80.0)),
            sample_with_score("b", 0.0, Some(90.0)),
            sample_with_score("a", 0.7, Some(70.0)),
        ];
        let groups = aggregate(&samples, StdMode::Population).unwrap();
        assert_eq!(groups.len(), 3);
        assert!(aggregate(&[], StdMode::Population).is_err());
    }

    #[test]
    fn welford_matches_two_pass() {
        let values: Vec<f64> = (0..1000).map(|i| 85.0 + ((i * 37) % 97) as f64 * 0.13).collect();
        let (mean, std) = mean_std(&values, StdMode::Population);
        let two_pass_mean = values.iter().sum::<f64>() / values.len() as f64;
        let two_pass_var = values
            .iter()
            .map(|v| (v - two_pass_mean).powi(2))
            .sum::<f64>()
            / values.len() as f64;
        assert!((mean - two_pass_mean).abs() < 1e-9);
        assert!((std - two_pass_var.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn linear_fit_exact_line() {
        let points: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 2.0 * i as f64 + 1.0)).collect();
        let fit = linear_fit(&points).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.intercept - 1.0).abs() < 1e-12);
        assert!((fit.r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn linear_fit_constant_response() {
        let points: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 3.0)).collect();
        let fit = linear_fit(&points).unwrap();
        assert_eq!(fit.slope, 0.0);
        assert_eq!(fit.r, 0.0);
    }

    #[test]
    fn linear_fit_degenerate_inputs() {
        assert!(linear_fit(&[(0.0, 1.0), (1.0, 2.0)]).is_err());
        assert!(linear_fit(&[(1.0, 1.0), (1.0, 2.0), (1.0, 3.0)]).is_err());
    }

    #[test]
    fn surprisal_control_identity_and_shift() {
        let human: Vec<(f64, f64)> = (0..60)
            .map(|i| (5.0 + (i % 12) as f64 * 0.5, 70.0 + (i % 7) as f64))
            .collect();
        let identical = surprisal_control(&human, &human, 10).unwrap();
        assert_eq!(identical.paired_difference, Some(0.0));
        assert!(identical.intercept_gap.unwrap().abs() < 1e-9);

        let shifted: Vec<(f64, f64)> = human.iter().map(|(x, y)| (*x, y + 5.0)).collect();
        let shift = surprisal_control(&shifted, &human, 10).unwrap();
        assert!((shift.paired_difference.unwrap() - 5.0).abs() < 1e-9);
        assert!((shift.intercept_gap.unwrap() - 5.0).abs() < 1e-9);
    }

    #[test]
    fn surprisal_control_disjoint_ranges() {
        let a = vec![(1.0, 70.0), (2.0, 71.0)];
        let b = vec![(10.0, 70.0), (11.0, 71.0)];
        assert!(matches!(
            surprisal_control(&a, &b, 10),
            Err(StatsError::NoOverlap)
        ));
    }

    #[test]
    fn temperature_curve_sorted_rows() {
        let samples = vec![
            sample_with_score("m", 0.7, Some(80.0)),
            sample_with_score("m", 0.1, Some(70.0)),
            sample_with_score("m", 0.7, Some(84.0)),
            sample_with_score("m", 0.4, Some(75.0)),
        ];
        let curve = temperature_curve(&samples, StdMode::Population).unwrap();
        let temps: Vec<f64> = curve.iter().map(|p| p.temperature).collect();
        assert_eq!(temps, vec![0.1, 0.4, 0.7]);
        assert_eq!(curve[2].mean, 82.0);
        assert_eq!(curve[2].count, 2);
    }
}
