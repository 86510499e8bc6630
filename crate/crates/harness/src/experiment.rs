//! Method-comparison experiments: dataset, questions, one run per
//! (question, method), persisted rows and a summary computed from those rows.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use gridcf::case::{Case, NetworkCase, UcCase};
use gridcf::ce::dcopf::{explain_dcopf, DcopfHints};
use gridcf::ce::uc::{derive_fixed_binaries, explain_uc, UcHints};
use gridcf::ce::{knn1_uc, CeConfig, CeResult, Method, PAPER_TIME_LIMIT};
use gridcf::dataset::{ProblemKind, SolveDataset};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;
use crate::metrics::compute_metrics;
use crate::questions::{generate_questions, CeQuestion, QuestionRegion, QuestionSet};
use crate::sampling::{sample_dcopf_demands, sample_uc_profiles, ProfileOptions};

pub const DATASET_FILE: &str = "dataset.jsonl";
pub const QUESTIONS_FILE: &str = "questions.json";
pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const RUNS_FILE: &str = "runs.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Desk,
    Paper,
}

impl Scale {
    pub fn samples(self, kind: ProblemKind) -> usize {
        match (self, kind) {
            (Scale::Desk, ProblemKind::Dcopf) => 200,
            (Scale::Desk, ProblemKind::Uc) => 100,
            (Scale::Paper, ProblemKind::Dcopf) => 5000,
            (Scale::Paper, ProblemKind::Uc) => 500,
        }
    }

    pub fn questions(self) -> usize {
        match self {
            Scale::Desk => 20,
            Scale::Paper => 200,
        }
    }

    pub fn time_limit(self) -> Duration {
        match self {
            Scale::Desk => Duration::from_secs(60),
            Scale::Paper => PAPER_TIME_LIMIT,
        }
    }
}

impl std::str::FromStr for Scale {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "desk" => Ok(Scale::Desk),
            "paper" => Ok(Scale::Paper),
            other => Err(format!("unknown scale '{other}' (expected desk or paper)")),
        }
    }
}

pub fn kind_of(case: &Case) -> ProblemKind {
    match case {
        Case::Network(_) => ProblemKind::Dcopf,
        Case::Uc(_) => ProblemKind::Uc,
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub case: Case,
    pub samples: usize,
    pub questions: usize,
    pub methods: Vec<Method>,
    pub time_limit: Duration,
    pub seed: u64,
    pub workers: usize,
    pub out_dir: Option<PathBuf>,
    pub profile: ProfileOptions,
}

impl ExperimentConfig {
    /// Defaults for `scale`, with every method that applies to the case.
    pub fn at_scale(case: Case, scale: Scale, seed: u64) -> Self {
        let kind = kind_of(&case);
        let methods = match kind {
            ProblemKind::Dcopf => Method::DCOPF.to_vec(),
            ProblemKind::Uc => Method::UC.to_vec(),
        };
        let time_limit = scale.time_limit();
        Self {
            case,
            samples: scale.samples(kind),
            questions: scale.questions(),
            methods,
            time_limit,
            seed,
            workers: 1,
            out_dir: None,
            profile: ProfileOptions {
                noise: true,
                solve_limit: Some(time_limit),
            },
        }
    }

    /// Seed of the question draw, derived from the dataset seed.
    pub fn question_seed(&self) -> u64 {
        self.seed ^ 0x9e37_79b9_7f4a_7c15
    }
}

/// One line of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub case: String,
    pub question_id: usize,
    pub method: String,
    pub status: String,
    pub distance_mw: Option<f64>,
    pub pnd_pct: Option<f64>,
    pub knn1_pct: Option<f64>,
    pub runtime_s: f64,
    pub iterations: usize,
}

impl ResultRow {
    /// The row without its wallclock column, for determinism checks.
    pub fn without_runtime(&self) -> ResultRow {
        ResultRow {
            runtime_s: 0.0,
            ..self.clone()
        }
    }
}

/// Full outcome of one (question, method) run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub question_id: usize,
    pub method: Method,
    pub result: Option<CeResult>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub count: usize,
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

impl Stats {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Stats> {
        let mut count = 0usize;
        let (mut min, mut max, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
        for v in values {
            count += 1;
            min = min.min(v);
            max = max.max(v);
            sum += v;
        }
        (count > 0).then(|| Stats {
            count,
            min,
            mean: sum / count as f64,
            max,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub runs: usize,
    pub optimal: usize,
    pub timeout: usize,
    pub infeasible: usize,
    pub heuristic_infeasible: usize,
    pub errors: usize,
    pub runtime_s: Option<Stats>,
    pub pnd_pct: Option<Stats>,
    pub knn1_pct: Option<Stats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub rows: usize,
    pub methods: Vec<MethodSummary>,
}

/// Summary statistics from result rows alone, methods in order of appearance.
pub fn summarize(rows: &[ResultRow]) -> Summary {
    let mut order: Vec<&str> = Vec::new();
    for r in rows {
        if !order.contains(&r.method.as_str()) {
            order.push(&r.method);
        }
    }
    let methods = order
        .into_iter()
        .map(|m| {
            let mine: Vec<&ResultRow> = rows.iter().filter(|r| r.method == m).collect();
            let count = |s: &str| mine.iter().filter(|r| r.status == s).count();
            MethodSummary {
                method: m.to_string(),
                runs: mine.len(),
                optimal: count("optimal"),
                timeout: count("timeout"),
                infeasible: count("infeasible"),
                heuristic_infeasible: count("heuristic-infeasible"),
                errors: count("error"),
                runtime_s: Stats::of(mine.iter().map(|r| r.runtime_s)),
                pnd_pct: Stats::of(mine.iter().filter_map(|r| r.pnd_pct)),
                knn1_pct: Stats::of(mine.iter().filter_map(|r| r.knn1_pct)),
            }
        })
        .collect();
    Summary {
        rows: rows.len(),
        methods,
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub case: String,
    pub dataset: SolveDataset,
    pub questions: QuestionSet,
    pub runs: Vec<RunRecord>,
    pub rows: Vec<ResultRow>,
    pub summary: Summary,
    pub seconds: f64,
}

fn round_to(x: f64, digits: i32) -> f64 {
    let s = 10f64.powi(digits);
    (x * s).round() / s
}

/// Shared, per-case hints derived once from the dataset.
enum CaseHints {
    Dcopf(Result<DcopfHints, String>),
    Uc,
}

fn run_one(
    case: &Case,
    dataset: &SolveDataset,
    hints: &CaseHints,
    q: &CeQuestion,
    method: Method,
    ce: &CeConfig,
) -> Result<CeResult, String> {
    let factual = &dataset.samples[q.sample].theta;
    match (case, &q.region, hints) {
        (Case::Network(net), QuestionRegion::Dcopf(region), CaseHints::Dcopf(h)) => {
            let empty = DcopfHints::default();
            let h = match method {
                Method::Sos1 => &empty,
                _ => h.as_ref().map_err(Clone::clone)?,
            };
            explain_dcopf(net, factual, region, method, h, ce).map_err(|e| e.to_string())
        }
        (Case::Uc(uc), QuestionRegion::Uc(region), CaseHints::Uc) => {
            let h = uc_hints(uc, dataset, factual, region, method).map_err(|e| e.to_string())?;
            explain_uc(uc, factual, region, method, &h, ce).map_err(|e| e.to_string())
        }
        _ => Err("question does not match the case kind".into()),
    }
}

fn uc_hints(
    uc: &UcCase,
    dataset: &SolveDataset,
    factual: &gridcf::case::DemandScenario,
    region: &gridcf::ce::SolutionRegionUc,
    method: Method,
) -> Result<UcHints, gridcf::ce::CeError> {
    if method != Method::DecompCut {
        return Ok(UcHints::default());
    }
    let g = region.resolve(uc)?;
    Ok(UcHints {
        fixed: Some(derive_fixed_binaries(dataset, Some((g, region.hour)))),
        distance_bound: knn1_uc(dataset, factual, g, region.hour).map(|k| k.distance),
    })
}

fn build_dataset(config: &ExperimentConfig) -> Result<SolveDataset, HarnessError> {
    match &config.case {
        Case::Network(net) => sample_dcopf_demands(net, config.samples, config.seed),
        Case::Uc(uc) => sample_uc_profiles(uc, config.samples, config.seed, &config.profile),
    }
}

/// Loads `dataset.jsonl` from `dir` when its header matches the config.
fn cached_dataset(dir: &Path, config: &ExperimentConfig) -> Option<SolveDataset> {
    let text = fs::read_to_string(dir.join(DATASET_FILE)).ok()?;
    let ds = SolveDataset::from_jsonl(&text).ok()?;
    let matches = ds.kind == kind_of(&config.case)
        && ds.case_id == config.case.content_id()
        && ds.seed == config.seed
        && ds.len() == config.samples;
    matches.then_some(ds)
}

fn write(path: PathBuf, contents: &[u8]) -> Result<(), HarnessError> {
    fs::write(&path, contents).map_err(|e| HarnessError::io(path, e))
}

pub fn rows_to_csv(rows: &[ResultRow]) -> Result<Vec<u8>, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record([
            "case",
            "question_id",
            "method",
            "status",
            "distance_mw",
            "pnd_pct",
            "knn1_pct",
            "runtime_s",
            "iterations",
        ])?;
    }
    w.into_inner().map_err(|e| HarnessError::io("results.csv", e.into_error()))
}

pub fn read_rows(path: &Path) -> Result<Vec<ResultRow>, HarnessError> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(HarnessError::from)).collect()
}

fn case_name(case: &Case) -> String {
    case.name().to_string()
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    let started = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.max(1))
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    pool.install(|| run_in_pool(config, started))
}

fn run_in_pool(config: &ExperimentConfig, started: Instant) -> Result<ExperimentReport, HarnessError> {
    if let Some(dir) = &config.out_dir {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    let cached = config.out_dir.as_deref().and_then(|d| cached_dataset(d, config));
    let dataset = match cached {
        Some(ds) => ds,
        None => {
            let ds = build_dataset(config)?;
            if let Some(dir) = &config.out_dir {
                write(dir.join(DATASET_FILE), ds.to_jsonl().as_bytes())?;
            }
            ds
        }
    };
    let questions = generate_questions(&dataset, &config.case, config.questions, config.question_seed())?;
    let hints = match &config.case {
        Case::Network(net) => CaseHints::Dcopf(dcopf_hints(&dataset, net)),
        Case::Uc(_) => CaseHints::Uc,
    };
    let ce = CeConfig::with_time_limit(config.time_limit);
    let tasks: Vec<(&CeQuestion, Method)> = questions
        .questions
        .iter()
        .flat_map(|q| config.methods.iter().map(move |&m| (q, m)))
        .collect();
    let outcomes: Vec<(RunRecord, ResultRow)> = tasks
        .par_iter()
        .map(|&(q, method)| {
            let out = run_one(&config.case, &dataset, &hints, q, method, &ce);
            to_records(config, &dataset, q, method, out)
        })
        .collect();
    let (runs, rows): (Vec<RunRecord>, Vec<ResultRow>) = outcomes.into_iter().unzip();
    let summary = summarize(&rows);
    if let Some(dir) = &config.out_dir {
        write(dir.join(QUESTIONS_FILE), &serde_json::to_vec_pretty(&questions)?)?;
        write(dir.join(RESULTS_FILE), &rows_to_csv(&rows)?)?;
        write(dir.join(SUMMARY_FILE), &serde_json::to_vec_pretty(&summary)?)?;
        let mut lines = String::new();
        for r in &runs {
            lines.push_str(&serde_json::to_string(r)?);
            lines.push('\n');
        }
        write(dir.join(RUNS_FILE), lines.as_bytes())?;
    }
    Ok(ExperimentReport {
        case: case_name(&config.case),
        dataset,
        questions,
        runs,
        rows,
        summary,
        seconds: started.elapsed().as_secs_f64(),
    })
}

fn dcopf_hints(dataset: &SolveDataset, net: &NetworkCase) -> Result<DcopfHints, String> {
    DcopfHints::from_dataset(dataset, net).map_err(|e| e.to_string())
}

fn to_records(
    config: &ExperimentConfig,
    dataset: &SolveDataset,
    q: &CeQuestion,
    method: Method,
    out: Result<CeResult, String>,
) -> (RunRecord, ResultRow) {
    let case = case_name(&config.case);
    match out {
        Ok(result) => {
            let factual = &dataset.samples[q.sample].theta;
            let m = compute_metrics(&result, &config.case, dataset, factual, &q.region);
            let row = ResultRow {
                case,
                question_id: q.id,
                method: method.as_str().to_string(),
                status: m.status,
                distance_mw: m.distance_mw.map(|d| round_to(d, 6)),
                pnd_pct: m.pnd_pct.map(|d| round_to(d, 6)),
                knn1_pct: m.knn1_pct.map(|d| round_to(d, 6)),
                runtime_s: round_to(m.runtime_s, 3),
                iterations: m.iterations,
            };
            let run = RunRecord {
                question_id: q.id,
                method,
                result: Some(result),
                error: None,
            };
            (run, row)
        }
        Err(message) => {
            let row = ResultRow {
                case,
                question_id: q.id,
                method: method.as_str().to_string(),
                status: "error".into(),
                distance_mw: None,
                pnd_pct: None,
                knn1_pct: None,
                runtime_s: 0.0,
                iterations: 0,
            };
            let run = RunRecord {
                question_id: q.id,
                method,
                result: None,
                error: Some(message),
            };
            (run, row)
        }
    }
}
