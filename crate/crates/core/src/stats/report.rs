//! Report assembly and deterministic emission.
//!
//! The JSON report carries everything; the CSVs are flat views (scatter,
//! temperature curve, distance matrices) meant for external plotting.
//! Output bytes are a pure function of the inputs: orderings are explicit
//! and no timestamps are embedded.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{GroupStats, StatsError, SurprisalControl};
use crate::harness::Sample;

/// One temperature-curve row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub temperature: f64,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

/// Per-group report row: aggregate plus percentile against the human set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupReportRow {
    pub model_id: String,
    pub condition: String,
    pub strategy: String,
    pub temperature: f64,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
    pub invalid_answer_rate: f64,
    /// Percentile of the group mean against the human scores, when human
    /// data was provided.
    pub percentile_vs_human: Option<f64>,
}

impl GroupReportRow {
    pub fn from_stats(stats: &GroupStats, percentile_vs_human: Option<f64>) -> Self {
        Self {
            model_id: stats.key.model_id.clone(),
            condition: stats.key.condition.clone(),
            strategy: stats.key.strategy.clone(),
            temperature: stats.key.temperature,
            mean: stats.mean,
            std: stats.std,
            count: stats.count,
            invalid_answer_rate: stats.invalid_answer_rate,
            percentile_vs_human,
        }
    }
}

/// OLS fit row for one scatter source.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitRow {
    pub source: String,
    pub slope: f64,
    pub intercept: f64,
    pub r: f64,
    pub points: usize,
}

/// Surprisal control against the human baseline, labeled per model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabeledSurprisalControl {
    pub source: String,
    #[serde(flatten)]
    pub control: SurprisalControl,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HumanSummary {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
}

/// One scatter observation: a scored answer or a human participant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScatterRow {
    pub source: String,
    pub dat: f64,
    pub surprisal: f64,
}

/// One distance-matrix cell (flattened for CSV emission).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixRow {
    pub source: String,
    pub seq: usize,
    pub row: usize,
    pub col: usize,
    pub word_row: String,
    pub word_col: String,
    pub distance: f64,
}

/// The full aggregated report.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunReport {
    /// Methodological notes (e.g. greedy decoded as temperature 0).
    pub notes: Vec<String>,
    pub groups: Vec<GroupReportRow>,
    pub temperature_curve: Vec<CurvePoint>,
    pub fits: Vec<FitRow>,
    pub surprisal_controls: Vec<LabeledSurprisalControl>,
    pub human: Option<HumanSummary>,
    pub scatter: Vec<ScatterRow>,
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>, StatsError> {
    let file = std::fs::File::create(path).map_err(|source| StatsError::WriteFailure {
        path: path.display().to_string(),
        source,
    })?;
    Ok(std::io::BufWriter::new(file))
}

fn write_failure(path: &Path) -> impl FnOnce(std::io::Error) -> StatsError + '_ {
    move |source| StatsError::WriteFailure {
        path: path.display().to_string(),
        source,
    }
}

/// Write `report.json`, `scatter.csv`, `curve.csv`, and `matrix.csv` into
/// `out_dir`; matrices come from the scored samples. Returns the paths
/// written. Output is byte-identical across runs on identical inputs.
pub fn emit_report(
    report: &RunReport,
    samples: &[Sample],
    out_dir: impl AsRef<Path>,
) -> Result<Vec<PathBuf>, StatsError> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|source| StatsError::WriteFailure {
        path: out_dir.display().to_string(),
        source,
    })?;
    let mut written = Vec::new();

    let json_path = out_dir.join("report.json");
    {
        let mut w = create(&json_path)?;
        let body = serde_json::to_string_pretty(report).expect("report serializes");
        w.write_all(body.as_bytes())
            .and_then(|_| w.write_all(b"\n"))
            .map_err(write_failure(&json_path))?;
    }
    written.push(json_path);

    let scatter_path = out_dir.join("scatter.csv");
    {
        let mut w = create(&scatter_path)?;
        writeln!(w, "source,dat,surprisal").map_err(write_failure(&scatter_path))?;
        for row in &report.scatter {
            writeln!(w, "{},{},{}", row.source, row.dat, row.surprisal)
                .map_err(write_failure(&scatter_path))?;
        }
    }
    written.push(scatter_path);

    let curve_path = out_dir.join("curve.csv");
    {
        let mut w = create(&curve_path)?;
        writeln!(w, "temperature,mean,std,count").map_err(write_failure(&curve_path))?;
        for point in &report.temperature_curve {
            writeln!(
                w,
                "{},{},{},{}",
                point.temperature, point.mean, point.std, point.count
            )
            .map_err(write_failure(&curve_path))?;
        }
    }
    written.push(curve_path);

    let matrix_path = out_dir.join("matrix.csv");
    {
        let mut w = create(&matrix_path)?;
        writeln!(w, "source,seq,row,col,word_row,word_col,distance")
            .map_err(write_failure(&matrix_path))?;
        for sample in samples {
            let Some(dat) = &sample.dat else { continue };
            for (i, row) in dat.matrix.iter().enumerate() {
                for (j, distance) in row.iter().enumerate() {
                    writeln!(
                        w,
                        "{},{},{},{},{},{},{}",
                        sample.model_id, sample.seq, i, j, dat.words[i], dat.words[j], distance
                    )
                    .map_err(write_failure(&matrix_path))?;
                }
            }
        }
    }
    written.push(matrix_path);

    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dat::DatResult;
    use crate::harness::{DecodingConfig, PromptCondition};

    fn scored_sample() -> Sample {
        Sample {
            seq: 0,
            model_id: "m".to_string(),
            condition: PromptCondition::Dat,
            config: DecodingConfig::greedy(),
            raw_text: "a, b".to_string(),
            answer: Default::default(),
            dat: Some(DatResult {
                score: 100.0,
                n: 2,
                words: vec!["a".to_string(), "b".to_string()],
                matrix: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
                mean_surprisal: 1.0,
            }),
            timestamp_ms: 0,
            attempt_count: 1,
            error: None,
        }
    }

    #[test]
    fn empty_scatter_keeps_header() {
        let dir = tempfile::tempdir().unwrap();
        emit_report(&RunReport::default(), &[], dir.path()).unwrap();
        let scatter = std::fs::read_to_string(dir.path().join("scatter.csv")).unwrap();
        assert_eq!(scatter, "source,dat,surprisal\n");
    }

    #[test]
    fn matrix_has_n_squared_entries() {
        let dir = tempfile::tempdir().unwrap();
        emit_report(&RunReport::default(), &[scored_sample()], dir.path()).unwrap();
        let matrix = std::fs::read_to_string(dir.path().join("matrix.csv")).unwrap();
        assert_eq!(matrix.lines().count(), 1 + 4);
    }

    #[test]
    fn report_round_trips_and_is_reproducible() {
        let report = RunReport {
            notes: vec!["greedy decoded as temperature 0".to_string()],
            scatter: vec![ScatterRow {
                source: "m".to_string(),
                dat: 88.5,
                surprisal: 9.25,
            }],
            temperature_curve: vec![CurvePoint {
                temperature: 0.7,
                mean: 80.0,
                std: 4.0,
                count: 10,
            }],
            ..Default::default()
        };
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        emit_report(&report, &[scored_sample()], dir_a.path()).unwrap();
        emit_report(&report, &[scored_sample()], dir_b.path()).unwrap();
        for name in ["report.json", "scatter.csv", "curve.csv", "matrix.csv"] {
            let a = std::fs::read(dir_a.path().join(name)).unwrap();
            let b = std::fs::read(dir_b.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between identical runs");
        }
        let text = std::fs::read_to_string(dir_a.path().join("report.json")).unwrap();
        let back: RunReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back.scatter.len(), report.scatter.len());
        assert_eq!(back.notes, report.notes);
    }
}
