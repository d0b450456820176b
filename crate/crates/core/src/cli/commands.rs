use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{AppConfig, DataBundle, FileConfig};
use super::{CliError, EndpointArgs, EvalArgs, RandomBaselineArgs, ReportArgs, ScoreArgs, SweepArgs};
use crate::dat::{dat_score, select_valid_words_with, DatResult};
use crate::embedding::LoadSummary;
use crate::harness::{
    collect_samples, converged_sample_size, parse_word_list, read_sample_log, CollectOptions,
    DecodingConfig, HarnessError, PromptTemplates, ReqwestBackend, Sample, ScoringContext,
    Strategy,
};
use crate::lexicon::sample_random_nouns;
use crate::stats::{
    aggregate, emit_report, linear_fit, load_human_scores, mean_std, percentile,
    surprisal_control, temperature_curve, FitRow, GroupReportRow, HumanDataset, HumanSummary,
    LabeledSurprisalControl, RunReport, ScatterRow, StatsError, StdMode,
};

const GREEDY_NOTE: &str = "greedy decoding approximated by temperature 0 at the API boundary";
const SURPRISAL_NOTE: &str = "surprisal is the negative natural log of relative word frequency";

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("output serializes"));
}

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct ScoreOutput<'a> {
    #[serde(flatten)]
    dat: &'a DatResult,
    rejected: &'a [crate::dat::Rejection],
    raw_count: usize,
    embedding_load: LoadSummary,
}

pub fn cmd_score(args: &ScoreArgs, file: &FileConfig) -> Result<(), CliError> {
    let config = AppConfig::resolve(&args.data, &EndpointArgs::default(), file)?;
    let data = DataBundle::load(&config)?;

    let text = match &args.input {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?,
        None => {
            let mut buf = String::new();
            std::io::stdin()
                .read_to_string(&mut buf)
                .map_err(|e| CliError::config(format!("cannot read stdin: {e}")))?;
            buf
        }
    };
    let candidates = parse_word_list(&text);
    let answer = select_valid_words_with(
        &candidates,
        &data.lexicon,
        &data.table,
        config.select_options(args.allow_duplicates),
    );
    if answer.valid_words.len() < 2 {
        return Err(CliError::validation(format!(
            "only {} valid word(s) after validation; need at least 2 ({} rejected)",
            answer.valid_words.len(),
            answer.rejected.len()
        )));
    }
    let dat = dat_score(&answer.valid_words, &data.table, &data.freq)
        .map_err(|e| CliError::validation(e.to_string()))?;
    print_json(&ScoreOutput {
        dat: &dat,
        rejected: &answer.rejected,
        raw_count: answer.raw_words.len(),
        embedding_load: data.table.summary(),
    });
    Ok(())
}

// ---------------------------------------------------------------------------
// random-baseline
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct RandomBaselineOutput {
    seed: u64,
    runs: usize,
    scoring_count: usize,
    mean: f64,
    std: f64,
    scores: Vec<f64>,
}

pub fn cmd_random_baseline(args: &RandomBaselineArgs, file: &FileConfig) -> Result<(), CliError> {
    if args.runs == 0 {
        return Err(CliError::config("--runs must be at least 1"));
    }
    let config = AppConfig::resolve(&args.data, &EndpointArgs::default(), file)?;
    let data = DataBundle::load(&config)?;

    let seed = args.seed.or(config.seed).unwrap_or_else(|| rand::rng().random());
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut scores = Vec::with_capacity(args.runs);
    for _ in 0..args.runs {
        let draw_seed: u64 = master.random();
        let words =
            sample_random_nouns(&data.lexicon, &data.table, config.scoring_count, draw_seed)
                .map_err(|e| CliError::config(e.to_string()))?;
        let result = dat_score(&words, &data.table, &data.freq)
            .map_err(|e| CliError::config(e.to_string()))?;
        scores.push(result.score);
    }
    let (mean, std) = mean_std(&scores, StdMode::Population);
    print_json(&RandomBaselineOutput {
        seed,
        runs: args.runs,
        scoring_count: config.scoring_count,
        mean,
        std,
        scores,
    });
    Ok(())
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

fn decoding_from(
    strategy: Option<Strategy>,
    p: Option<f64>,
    temperature: Option<f64>,
    config: &AppConfig,
) -> Result<DecodingConfig, CliError> {
    match strategy.unwrap_or(Strategy::Greedy) {
        Strategy::Greedy => Ok(DecodingConfig::greedy()),
        Strategy::TopP => {
            DecodingConfig::top_p(p.unwrap_or(config.p), temperature.unwrap_or(config.temperature))
                .map_err(|e| CliError::config(e.to_string()))
        }
    }
}

fn templates_from(prompt_file: Option<&Path>) -> Result<PromptTemplates, CliError> {
    match prompt_file {
        None => Ok(PromptTemplates::default()),
        Some(path) => PromptTemplates::with_dat_template_file(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display()))),
    }
}

#[derive(Serialize)]
struct AutoN {
    pilot: usize,
    sigma_hat: Option<f64>,
    target_n: usize,
}

#[derive(Serialize)]
struct EvalOutput {
    model: String,
    condition: String,
    strategy: String,
    temperature: f64,
    p: Option<f64>,
    n: usize,
    scored: usize,
    mean: f64,
    std: f64,
    invalid_answer_rate: f64,
    failed_requests: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    auto_n: Option<AutoN>,
    log: PathBuf,
    out: PathBuf,
}

/// Collect into `log_path` (honoring --auto-n sizing) and return all
/// samples re-read from the log, so partially failed phases still report.
fn run_collection(
    endpoint: &crate::harness::ModelEndpoint,
    condition: crate::harness::PromptCondition,
    decoding: DecodingConfig,
    plan: CollectionPlan,
    ctx: &ScoringContext<'_>,
    templates: &PromptTemplates,
    parallelism: usize,
    log_path: &Path,
) -> Result<(Vec<Sample>, Option<AutoN>), CliError> {
    let backend = ReqwestBackend;
    let file = File::create(log_path)
        .map_err(|e| CliError::config(format!("cannot create {}: {e}", log_path.display())))?;
    let mut writer = BufWriter::new(file);

    let mut options = CollectOptions::new(condition, decoding, 0);
    options.parallelism = parallelism;

    let endpoint_err = |e: HarnessError| match e {
        HarnessError::AllRequestsFailed(n) => {
            CliError::endpoint(format!("all {n} requests failed; partial log preserved"))
        }
        other => CliError::endpoint(other.to_string()),
    };

    let auto_n = match plan {
        CollectionPlan::Fixed(n) => {
            options.n = n;
            collect_samples(&backend, endpoint, &options, ctx, templates, Some(&mut writer))
                .map_err(endpoint_err)?;
            None
        }
        CollectionPlan::Auto { pilot, alpha, epsilon } => {
            options.n = pilot;
            let outcome =
                collect_samples(&backend, endpoint, &options, ctx, templates, Some(&mut writer))
                    .map_err(endpoint_err)?;
            let scores = outcome.scores();
            let (sigma_hat, target_n) = if scores.len() >= 2 {
                let (_, sigma) = mean_std(&scores, StdMode::Sample);
                let n = converged_sample_size(sigma, alpha, epsilon)
                    .map_err(|e| CliError::config(e.to_string()))?;
                (Some(sigma), n.max(pilot))
            } else {
                (None, pilot)
            };
            if target_n > pilot {
                options.n = target_n - pilot;
                options.seq_base = pilot;
                match collect_samples(&backend, endpoint, &options, ctx, templates, Some(&mut writer))
                {
                    Ok(_) => {}
                    // the pilot succeeded, so the run as a whole did not
                    Err(HarnessError::AllRequestsFailed(_)) if !scores.is_empty() => {}
                    Err(e) => return Err(endpoint_err(e)),
                }
            }
            Some(AutoN {
                pilot,
                sigma_hat,
                target_n,
            })
        }
    };
    writer
        .flush()
        .map_err(|e| CliError::config(format!("cannot write {}: {e}", log_path.display())))?;
    drop(writer);
    let samples = read_sample_log(log_path)
        .map_err(|e| CliError::config(format!("cannot re-read {}: {e}", log_path.display())))?;
    Ok((samples, auto_n))
}

enum CollectionPlan {
    Fixed(usize),
    Auto { pilot: usize, alpha: f64, epsilon: f64 },
}

fn base_notes(decoding: &DecodingConfig) -> Vec<String> {
    let mut notes = vec![SURPRISAL_NOTE.to_string()];
    if decoding.strategy == Strategy::Greedy {
        notes.insert(0, GREEDY_NOTE.to_string());
    }
    notes
}

pub fn cmd_eval(args: &EvalArgs, file: &FileConfig) -> Result<(), CliError> {
    let config = AppConfig::resolve(&args.data, &args.endpoint, file)?;
    let data = DataBundle::load(&config)?;
    let endpoint = config.endpoint()?;
    let decoding = decoding_from(args.strategy, args.p, args.temperature, &config)?;
    let templates = templates_from(args.prompt_file.as_deref())?;

    let plan = if args.auto_n {
        CollectionPlan::Auto {
            pilot: args.pilot.unwrap_or(config.pilot),
            alpha: args.alpha,
            epsilon: args.epsilon,
        }
    } else {
        let n = args
            .n
            .ok_or_else(|| CliError::config("pass --n <count> or --auto-n"))?;
        if n == 0 {
            return Err(CliError::config("--n must be at least 1"));
        }
        CollectionPlan::Fixed(n)
    };

    let out_dir = args.out.clone().unwrap_or_else(|| config.out.clone());
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::config(format!("cannot create {}: {e}", out_dir.display())))?;
    let log_path = out_dir.join("samples.jsonl");

    let ctx = ScoringContext {
        lexicon: &data.lexicon,
        table: &data.table,
        freq: &data.freq,
        options: config.select_options(false),
    };
    let (samples, auto_n) = run_collection(
        &endpoint,
        args.condition,
        decoding,
        plan,
        &ctx,
        &templates,
        config.parallelism,
        &log_path,
    )?;

    let report = build_report(&samples, None, 10, StdMode::Population, base_notes(&decoding))?;
    emit_report(&report, &samples, &out_dir).map_err(|e| CliError::config(e.to_string()))?;

    let scores: Vec<f64> = samples.iter().filter_map(|s| s.dat.as_ref().map(|d| d.score)).collect();
    let (mean, std) = mean_std(&scores, StdMode::Population);
    let failed = samples.iter().filter(|s| s.error.is_some()).count();
    print_json(&EvalOutput {
        model: endpoint.model.clone(),
        condition: args.condition.to_string(),
        strategy: match decoding.strategy {
            Strategy::Greedy => "greedy".to_string(),
            Strategy::TopP => "top_p".to_string(),
        },
        temperature: decoding.effective_temperature(),
        p: decoding.effective_top_p(),
        n: samples.len(),
        scored: scores.len(),
        mean,
        std,
        invalid_answer_rate: if samples.is_empty() {
            0.0
        } else {
            (samples.len() - scores.len()) as f64 / samples.len() as f64
        },
        failed_requests: failed,
        auto_n,
        log: log_path,
        out: out_dir,
    });
    Ok(())
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

fn parse_grid(raw: Option<&str>) -> Result<Vec<f64>, CliError> {
    let grid: Vec<f64> = match raw {
        None => (1..=10).map(|i| i as f64 / 10.0).collect(),
        Some(raw) => raw
            .split(',')
            .map(|piece| {
                piece
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| CliError::config(format!("bad grid value {piece:?}: {e}")))
            })
            .collect::<Result<_, _>>()?,
    };
    if grid.is_empty() {
        return Err(CliError::config("temperature grid is empty"));
    }
    if let Some(bad) = grid.iter().find(|t| !(**t > 0.0)) {
        return Err(CliError::config(format!(
            "temperatures must be positive, got {bad}"
        )));
    }
    Ok(grid)
}

#[derive(Serialize)]
struct SweepOutput {
    model: String,
    condition: String,
    p: f64,
    n_per_point: usize,
    curve: Vec<crate::stats::CurvePoint>,
    curve_csv: PathBuf,
    out: PathBuf,
}

pub fn cmd_sweep(args: &SweepArgs, file: &FileConfig) -> Result<(), CliError> {
    let config = AppConfig::resolve(&args.data, &args.endpoint, file)?;
    let data = DataBundle::load(&config)?;
    let endpoint = config.endpoint()?;
    let templates = templates_from(args.prompt_file.as_deref())?;
    let grid = parse_grid(args.grid.as_deref())?;
    if args.n == 0 {
        return Err(CliError::config("--n must be at least 1"));
    }
    let p = args.p.unwrap_or(config.p);

    let out_dir = args.out.clone().unwrap_or_else(|| config.out.clone());
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::config(format!("cannot create {}: {e}", out_dir.display())))?;

    let ctx = ScoringContext {
        lexicon: &data.lexicon,
        table: &data.table,
        freq: &data.freq,
        options: config.select_options(false),
    };

    let mut all_samples = Vec::new();
    for &t in &grid {
        let decoding = DecodingConfig::top_p(p, t).map_err(|e| CliError::config(e.to_string()))?;
        let point_dir = out_dir.join(format!("t{t}"));
        std::fs::create_dir_all(&point_dir)
            .map_err(|e| CliError::config(format!("cannot create {}: {e}", point_dir.display())))?;
        let (samples, _) = run_collection(
            &endpoint,
            args.condition,
            decoding,
            CollectionPlan::Fixed(args.n),
            &ctx,
            &templates,
            config.parallelism,
            &point_dir.join("samples.jsonl"),
        )?;
        all_samples.extend(samples);
    }

    let curve =
        temperature_curve(&all_samples, StdMode::Population).map_err(stats_to_cli)?;
    let curve_csv = out_dir.join("curve.csv");
    {
        let file = File::create(&curve_csv)
            .map_err(|e| CliError::config(format!("cannot create {}: {e}", curve_csv.display())))?;
        let mut w = BufWriter::new(file);
        writeln!(w, "temperature,mean,std,count")
            .and_then(|_| {
                curve.iter().try_for_each(|point| {
                    writeln!(
                        w,
                        "{},{},{},{}",
                        point.temperature, point.mean, point.std, point.count
                    )
                })
            })
            .map_err(|e| CliError::config(format!("cannot write {}: {e}", curve_csv.display())))?;
    }

    print_json(&SweepOutput {
        model: endpoint.model.clone(),
        condition: args.condition.to_string(),
        p,
        n_per_point: args.n,
        curve,
        curve_csv,
        out: out_dir,
    });
    Ok(())
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

fn stats_to_cli(e: StatsError) -> CliError {
    CliError::config(e.to_string())
}

/// Assemble the aggregate report from samples and (optionally) human data.
fn build_report(
    samples: &[Sample],
    human: Option<&HumanDataset>,
    bins: usize,
    mode: StdMode,
    mut notes: Vec<String>,
) -> Result<RunReport, CliError> {
    let groups = aggregate(samples, mode).map_err(stats_to_cli)?;
    let group_rows: Vec<GroupReportRow> = groups
        .iter()
        .map(|g| {
            let pct = human
                .filter(|h| !h.is_empty() && g.count > 0)
                .map(|h| percentile(g.mean, h));
            GroupReportRow::from_stats(g, pct)
        })
        .collect();

    let curve = temperature_curve(samples, mode).unwrap_or_default();

    let mut model_ids: Vec<String> = samples.iter().map(|s| s.model_id.clone()).collect();
    model_ids.sort();
    model_ids.dedup();

    let mut scatter: Vec<ScatterRow> = Vec::new();
    for sample in samples {
        if let Some(dat) = &sample.dat {
            scatter.push(ScatterRow {
                source: sample.model_id.clone(),
                dat: dat.score,
                surprisal: dat.mean_surprisal,
            });
        }
    }
    let human_points = human.and_then(|h| h.points());
    if let Some(points) = &human_points {
        for (surprisal, dat) in points {
            scatter.push(ScatterRow {
                source: "human".to_string(),
                dat: *dat,
                surprisal: *surprisal,
            });
        }
    }

    let mut fits = Vec::new();
    let mut controls = Vec::new();
    for model_id in &model_ids {
        let points: Vec<(f64, f64)> = samples
            .iter()
            .filter(|s| &s.model_id == model_id)
            .filter_map(|s| s.dat.as_ref().map(|d| (d.mean_surprisal, d.score)))
            .collect();
        match linear_fit(&points) {
            Ok(fit) => fits.push(FitRow {
                source: model_id.clone(),
                slope: fit.slope,
                intercept: fit.intercept,
                r: fit.r,
                points: points.len(),
            }),
            Err(e) => notes.push(format!("no fit for {model_id}: {e}")),
        }
        if let Some(human_points) = &human_points {
            match surprisal_control(&points, human_points, bins) {
                Ok(control) => controls.push(LabeledSurprisalControl {
                    source: model_id.clone(),
                    control,
                }),
                Err(e) => notes.push(format!("no surprisal control for {model_id}: {e}")),
            }
        }
    }
    if let Some(points) = &human_points {
        match linear_fit(points) {
            Ok(fit) => fits.push(FitRow {
                source: "human".to_string(),
                slope: fit.slope,
                intercept: fit.intercept,
                r: fit.r,
                points: points.len(),
            }),
            Err(e) => notes.push(format!("no fit for human baseline: {e}")),
        }
    }

    let human_summary = human.map(|h| {
        let (mean, std) = mean_std(&h.scores, mode);
        HumanSummary {
            count: h.len(),
            mean,
            std,
        }
    });

    Ok(RunReport {
        notes,
        groups: group_rows,
        temperature_curve: curve,
        fits,
        surprisal_controls: controls,
        human: human_summary,
        scatter,
    })
}

#[derive(Serialize)]
struct ReportOutput {
    samples: usize,
    scored: usize,
    logs: Vec<PathBuf>,
    human_rows: Option<usize>,
    human_rows_skipped: Option<usize>,
    files: Vec<PathBuf>,
}

pub fn cmd_report(args: &ReportArgs, file: &FileConfig) -> Result<(), CliError> {
    let config = AppConfig::resolve(&super::DataArgs::default(), &EndpointArgs::default(), file)?;

    let mut samples = Vec::new();
    for log in &args.logs {
        let mut batch = read_sample_log(log)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", log.display())))?;
        samples.append(&mut batch);
    }
    if samples.is_empty() {
        return Err(CliError::config("sample logs contain no samples"));
    }

    let human_path = args.human.clone().or_else(|| config.human.clone());
    let human_load = match &human_path {
        None => None,
        Some(path) => {
            let score_col = args
                .human_score_col
                .clone()
                .unwrap_or_else(|| config.human_score_col.clone());
            let surprisal_col = args
                .human_surprisal_col
                .clone()
                .or_else(|| config.human_surprisal_col.clone());
            Some(
                load_human_scores(path, &score_col, surprisal_col.as_deref())
                    .map_err(stats_to_cli)?,
            )
        }
    };

    let mode = if args.sample_std {
        StdMode::Sample
    } else {
        StdMode::Population
    };
    let notes = {
        let mut notes = vec![SURPRISAL_NOTE.to_string()];
        if samples.iter().any(|s| s.config.strategy == Strategy::Greedy) {
            notes.insert(0, GREEDY_NOTE.to_string());
        }
        notes
    };
    let report = build_report(
        &samples,
        human_load.as_ref().map(|h| &h.dataset),
        args.bins,
        mode,
        notes,
    )?;

    let out_dir = args.out.clone().unwrap_or_else(|| config.out.clone());
    let files = emit_report(&report, &samples, &out_dir).map_err(stats_to_cli)?;

    let scored = samples.iter().filter(|s| s.dat.is_some()).count();
    print_json(&ReportOutput {
        samples: samples.len(),
        scored,
        logs: args.logs.clone(),
        human_rows: human_load.as_ref().map(|h| h.dataset.len()),
        human_rows_skipped: human_load.as_ref().map(|h| h.rows_skipped),
        files,
    });
    Ok(())
}
