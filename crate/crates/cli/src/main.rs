use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use gridcf::case::{parse_case, Case, DemandScenario, NetworkCase, UcCase};
use gridcf::ce::dcopf::{explain_dcopf, DcopfHints};
use gridcf::ce::uc::{derive_fixed_binaries, explain_uc, UcHints};
use gridcf::ce::{knn1_uc, CeConfig, Method, SolutionRegionDcopf, SolutionRegionUc};
use gridcf::dataset::SolveDataset;
use gridcf::dcopf::solve_dcopf;
use gridcf::fixtures;
use gridcf::matpower::import_matpower;
use gridcf::uc::solve_uc;
use gridcf_harness::experiment::{kind_of, rows_to_csv};
use gridcf_harness::{generate_questions, run_experiment, sample_dcopf_demands, sample_uc_profiles};
use gridcf_harness::{ExperimentConfig, ProfileOptions, Scale};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "gridcf", version, about = "Counterfactual explanations for DC-OPF and unit commitment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CaseArg {
    /// Bundled case name (case5-fig1, case14-desk, case118, uc-three-unit, ...) or a .toml/.m path.
    #[arg(long)]
    case: String,
}

#[derive(Args)]
struct OutArg {
    /// Write here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a DC-OPF case, at its default demand unless --demand is given.
    SolveDcopf {
        #[command(flatten)]
        case: CaseArg,
        /// JSON array of nodal demands, MW.
        #[arg(long)]
        demand: Option<String>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Solve a unit-commitment case for one hourly profile.
    SolveUc {
        #[command(flatten)]
        case: CaseArg,
        /// JSON array of hourly demand, MW. Defaults to the bundled factual profile.
        #[arg(long)]
        profile: Option<String>,
        #[arg(long)]
        time_limit_s: Option<f64>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Sample a solve dataset as JSON lines.
    GenDataset {
        #[command(flatten)]
        case: CaseArg,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Per-sample UC solve limit.
        #[arg(long)]
        time_limit_s: Option<f64>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Draw "why not" questions from a dataset.
    GenQuestions {
        #[command(flatten)]
        case: CaseArg,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Compute one counterfactual explanation.
    Explain(ExplainArgs),
    /// Run every method over a sampled question set.
    Experiment {
        #[command(flatten)]
        case: CaseArg,
        #[arg(long, default_value = "desk")]
        scale: Scale,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated subset of methods.
        #[arg(long, value_delimiter = ',')]
        method: Vec<Method>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        questions: Option<usize>,
        #[arg(long)]
        time_limit_s: Option<f64>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Directory for dataset, questions, results.csv and summary.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ExplainArgs {
    #[command(flatten)]
    case: CaseArg,
    #[arg(long)]
    method: Method,
    /// Generator id (DC-OPF) or unit id (UC).
    #[arg(long)]
    generator: String,
    /// DC-OPF: MW floor on the generator's output.
    #[arg(long)]
    threshold: Option<f64>,
    /// UC: hour at which the unit must be committed.
    #[arg(long)]
    hour: Option<usize>,
    /// JSON array with the factual demand; defaults to the case default.
    #[arg(long)]
    scenario: Option<String>,
    /// Dataset for the mip, mip+cut and decomp+cut methods.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    time_limit_s: Option<f64>,
    #[command(flatten)]
    out: OutArg,
}

fn load_case(spec: &str) -> Result<Case> {
    if let Some(net) = fixtures::network_by_name(spec) {
        return Ok(Case::Network(net));
    }
    if let Some(uc) = fixtures::uc_by_name(spec) {
        return Ok(Case::Uc(uc));
    }
    let path = Path::new(spec);
    let text = fs::read_to_string(path).with_context(|| format!("'{spec}' is neither a bundled case nor a readable file"))?;
    if path.extension().is_some_and(|e| e == "m") {
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("matpower");
        return Ok(Case::Network(import_matpower(&text, name)?));
    }
    Ok(parse_case(&text)?)
}

fn network(case: Case) -> Result<NetworkCase> {
    match case {
        Case::Network(net) => Ok(net),
        Case::Uc(uc) => bail!("'{}' is a unit-commitment case", uc.meta.name),
    }
}

fn unit_commitment(case: Case) -> Result<UcCase> {
    match case {
        Case::Uc(uc) => Ok(uc),
        Case::Network(net) => bail!("'{}' is a network case", net.meta.name),
    }
}

fn values(json: &str) -> Result<Vec<f64>> {
    serde_json::from_str(json).context("expected a JSON array of numbers")
}

fn duration(seconds: Option<f64>) -> Result<Option<Duration>> {
    seconds.map(Duration::try_from_secs_f64).transpose().context("invalid time limit")
}

fn read_dataset(path: &Path) -> Result<SolveDataset> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(SolveDataset::from_jsonl(&text)?)
}

fn emit_text(text: &str, out: &OutArg) -> Result<()> {
    match &out.out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            match writeln!(stdout, "{text}") {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                other => Ok(other?),
            }
        }
    }
}

fn emit<T: Serialize>(value: &T, out: &OutArg) -> Result<()> {
    emit_text(&serde_json::to_string_pretty(value)?, out)
}

fn uc_factual(case: &UcCase, given: Option<&str>) -> Result<DemandScenario> {
    match given {
        Some(json) => Ok(DemandScenario::hourly(values(json)?)),
        None if case.horizon == fixtures::uc_factual_profile().values.len() => Ok(fixtures::uc_factual_profile()),
        None => bail!("--scenario is required for this case"),
    }
}

fn explain(args: ExplainArgs) -> Result<()> {
    let config = match duration(args.time_limit_s)? {
        Some(limit) => CeConfig::with_time_limit(limit),
        None => CeConfig::default(),
    };
    let dataset = args.dataset.as_deref().map(read_dataset).transpose()?;
    let result = match load_case(&args.case.case)? {
        Case::Network(net) => {
            let threshold = args.threshold.context("--threshold is required for DC-OPF cases")?;
            let region = SolutionRegionDcopf {
                generator: args.generator,
                threshold,
            };
            let factual = match &args.scenario {
                Some(json) => DemandScenario::nodal(values(json)?),
                None => net.default_demand(),
            };
            let hints = match (&dataset, args.method) {
                (Some(ds), Method::Mip | Method::MipCut) => DcopfHints::from_dataset(ds, &net)?,
                (None, Method::Mip | Method::MipCut) => bail!("{} needs --dataset", args.method),
                _ => DcopfHints::default(),
            };
            explain_dcopf(&net, &factual, &region, args.method, &hints, &config)?
        }
        Case::Uc(uc) => {
            let hour = args.hour.context("--hour is required for UC cases")?;
            let region = SolutionRegionUc {
                unit: args.generator,
                hour,
            };
            let factual = uc_factual(&uc, args.scenario.as_deref())?;
            let hints = match (&dataset, args.method) {
                (Some(ds), Method::DecompCut) => {
                    let g = region.resolve(&uc)?;
                    UcHints {
                        fixed: Some(derive_fixed_binaries(ds, Some((g, hour)))),
                        distance_bound: knn1_uc(ds, &factual, g, hour).map(|k| k.distance),
                    }
                }
                (None, Method::DecompCut) => bail!("decomp+cut needs --dataset"),
                _ => UcHints::default(),
            };
            explain_uc(&uc, &factual, &region, args.method, &hints, &config)?
        }
    };
    emit(&result, &args.out)
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::SolveDcopf { case, demand, out } => {
            let net = network(load_case(&case.case)?)?;
            let scenario = match demand {
                Some(json) => DemandScenario::nodal(values(&json)?),
                None => net.default_demand(),
            };
            emit(&solve_dcopf(&net, &scenario)?, &out)
        }
        Command::SolveUc {
            case,
            profile,
            time_limit_s,
            out,
        } => {
            let uc = unit_commitment(load_case(&case.case)?)?;
            let scenario = uc_factual(&uc, profile.as_deref())?;
            emit(&solve_uc(&uc, &scenario, duration(time_limit_s)?)?, &out)
        }
        Command::GenDataset {
            case,
            samples,
            seed,
            time_limit_s,
            out,
        } => {
            let dataset = match load_case(&case.case)? {
                Case::Network(net) => sample_dcopf_demands(&net, samples, seed)?,
                Case::Uc(uc) => {
                    let mut options = ProfileOptions::default();
                    if let Some(limit) = duration(time_limit_s)? {
                        options.solve_limit = Some(limit);
                    }
                    sample_uc_profiles(&uc, samples, seed, &options)?
                }
            };
            emit_text(dataset.to_jsonl().trim_end(), &out)
        }
        Command::GenQuestions {
            case,
            dataset,
            count,
            seed,
            out,
        } => {
            let case = load_case(&case.case)?;
            let dataset = read_dataset(&dataset)?;
            emit(&generate_questions(&dataset, &case, count, seed)?, &out)
        }
        Command::Explain(args) => explain(args),
        Command::Experiment {
            case,
            scale,
            seed,
            method,
            samples,
            questions,
            time_limit_s,
            workers,
            out,
        } => {
            let case = load_case(&case.case)?;
            let kind = kind_of(&case);
            let mut config = ExperimentConfig::at_scale(case, scale, seed);
            if !method.is_empty() {
                config.methods = method;
            }
            config.samples = samples.unwrap_or(config.samples);
            config.questions = questions.unwrap_or(config.questions);
            if let Some(limit) = duration(time_limit_s)? {
                config.time_limit = limit;
                config.profile.solve_limit = Some(limit);
            }
            config.workers = workers;
            config.out_dir = out;
            eprintln!(
                "{kind:?}: {} samples, {} questions, methods {:?}",
                config.samples,
                config.questions,
                config.methods.iter().map(|m| m.as_str()).collect::<Vec<_>>()
            );
            let report = run_experiment(&config)?;
            if config.out_dir.is_none() {
                print!("{}", String::from_utf8(rows_to_csv(&report.rows)?)?);
            }
            eprintln!("{}", serde_json::to_string_pretty(&report.summary)?);
            eprintln!("finished in {:.1} s", report.seconds);
            Ok(())
        }
        Command::Serve { port, workers, data_dir } => {
            let config = gridcf_service::ServiceConfig { workers, data_dir };
            let state = gridcf_service::AppState::new(config)?;
            let runtime = tokio::runtime::Runtime::new()?;
            eprintln!("listening on 0.0.0.0:{port}");
            runtime.block_on(gridcf_service::serve(state, port))?;
            Ok(())
        }
    }
}
