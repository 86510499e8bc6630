//! HTTP handlers. Solves run on the blocking pool; explanation jobs also wait
//! for one of the `workers` permits.

use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use gridcf::case::{Case, DemandScenario};
use gridcf::ce::dcopf::{explain_dcopf, DcopfHints};
use gridcf::ce::uc::{derive_fixed_binaries, explain_uc, UcHints};
use gridcf::ce::{knn1_uc, CeConfig, CeResult, Method};
use gridcf::dataset::{ProblemKind, SolveDataset};
use gridcf::dcopf::solve_dcopf;
use gridcf::uc::solve_uc;
use serde::Deserialize;
use serde_json::json;

use crate::decode::{decode_case, decode_json};
use crate::error::ApiError;
use crate::model::{
    CaseCreated, CaseDocument, DatasetSummary, ExplainJob, ExplainRequest, JobCreated, JobState, NamedDelta,
    RegionRequest, SolveRequest, Spread,
};
use crate::state::{now_ms, AppState};

type Shared = Arc<AppState>;

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/api/cases", post(upload_case))
        .route("/api/cases/{id}", get(get_case))
        .route("/api/cases/{id}/solve", post(solve_case))
        .route("/api/cases/{id}/explain", post(explain_case))
        .route("/api/cases/{id}/dataset/summary", get(dataset_summary))
        .route("/api/jobs/{id}", get(get_job))
        .with_state(state)
}

fn kind_of(case: &Case) -> ProblemKind {
    match case {
        Case::Network(_) => ProblemKind::Dcopf,
        Case::Uc(_) => ProblemKind::Uc,
    }
}

fn lookup(state: &AppState, id: &str) -> Result<Arc<Case>, ApiError> {
    state.case(id).ok_or_else(|| ApiError::not_found("case", id))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker panicked: {e}")))
}

#[derive(Debug, Deserialize)]
struct UploadQuery {
    name: Option<String>,
}

async fn upload_case(
    State(state): State<Shared>,
    Query(query): Query<UploadQuery>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Json<CaseCreated>, ApiError> {
    let content_type = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("");
    let name = query.name.unwrap_or_else(|| "uploaded".into());
    let case = decode_case(content_type, &body, &name)?;
    let created = CaseCreated {
        id: String::new(),
        name: case.name().to_string(),
        kind: kind_of(&case),
    };
    let id = state.insert_case(case);
    Ok(Json(CaseCreated { id, ..created }))
}

async fn get_case(State(state): State<Shared>, Path(id): Path<String>) -> Result<Json<CaseDocument>, ApiError> {
    let case = lookup(&state, &id)?;
    Ok(Json(CaseDocument {
        has_dataset: state.dataset(&id).is_some(),
        name: case.name().to_string(),
        kind: kind_of(&case),
        case: (*case).clone(),
        id,
    }))
}

fn scenario_for(case: &Case, given: Option<DemandScenario>) -> Result<DemandScenario, ApiError> {
    match (case, given) {
        (_, Some(s)) => Ok(s),
        (Case::Network(net), None) => Ok(net.default_demand()),
        (Case::Uc(_), None) => Err(ApiError::bad_request("missing_scenario", "unit-commitment requests need an hourly scenario")),
    }
}

fn limit(seconds: Option<f64>) -> Result<Option<Duration>, ApiError> {
    match seconds {
        None => Ok(CeConfig::default().time_limit),
        Some(s) if s.is_finite() && s > 0.0 => Ok(Some(Duration::from_secs_f64(s))),
        Some(s) => Err(ApiError::bad_request("bad_time_limit", format!("time limit {s} is not a positive number of seconds"))),
    }
}

async fn solve_case(State(state): State<Shared>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let req: SolveRequest = decode_json(&body)?;
    let case = lookup(&state, &id)?;
    let scenario = scenario_for(&case, req.scenario)?;
    let time_limit = limit(req.time_limit_s)?;
    let outcome = blocking(move || match &*case {
        Case::Network(net) => solve_dcopf(net, &scenario)
            .map(|s| (s.is_optimal(), s.status, serde_json::to_value(&s)))
            .map_err(|e| e.to_string()),
        Case::Uc(uc) => solve_uc(uc, &scenario, time_limit)
            .map(|s| (s.is_optimal(), s.status, serde_json::to_value(&s)))
            .map_err(|e| e.to_string()),
    })
    .await?;
    let (optimal, status, value) = outcome.map_err(|e| ApiError::bad_request("bad_scenario", e))?;
    let value = value.map_err(|e| ApiError::internal(e.to_string()))?;
    if optimal {
        Ok(Json(value).into_response())
    } else {
        let body = json!({ "error": "not_optimal", "status": status, "solution": value });
        Ok((StatusCode::UNPROCESSABLE_ENTITY, Json(body)).into_response())
    }
}

/// A validated explanation request, ready to run off the async runtime.
struct Prepared {
    case: Arc<Case>,
    dataset: Option<Arc<SolveDataset>>,
    factual: DemandScenario,
    region: RegionRequest,
    method: Method,
    config: CeConfig,
}

fn needs_dataset(method: Method) -> bool {
    matches!(method, Method::Mip | Method::MipCut | Method::DecompCut)
}

fn prepare(state: &AppState, id: &str, req: &ExplainRequest) -> Result<Prepared, ApiError> {
    let case = lookup(state, id)?;
    let matches = matches!(
        (&*case, &req.region),
        (Case::Network(_), RegionRequest::Dcopf(_)) | (Case::Uc(_), RegionRequest::Uc(_))
    );
    if !matches {
        return Err(ApiError::bad_request("bad_region", "region does not fit the case kind"));
    }
    if req.method.is_dcopf() != matches!(&*case, Case::Network(_)) {
        return Err(ApiError::bad_request("bad_method", format!("method {} does not apply to this case", req.method)));
    }
    let region_error = |e: gridcf::ce::CeError| ApiError::bad_request("bad_region", e.to_string());
    match (&*case, &req.region) {
        (Case::Network(net), RegionRequest::Dcopf(r)) => {
            r.resolve(net).map_err(region_error)?;
        }
        (Case::Uc(uc), RegionRequest::Uc(r)) => {
            r.resolve(uc).map_err(region_error)?;
        }
        _ => unreachable!("kinds checked above"),
    }
    let dataset = state.dataset(id);
    if needs_dataset(req.method) && dataset.is_none() {
        return Err(ApiError::bad_request(
            "needs_dataset",
            format!("method {} needs a dataset attached to the case", req.method),
        ));
    }
    Ok(Prepared {
        factual: scenario_for(&case, req.scenario.clone())?,
        case,
        dataset,
        region: req.region.clone(),
        method: req.method,
        config: CeConfig {
            time_limit: limit(req.time_limit_s)?,
            ..CeConfig::default()
        },
    })
}

/// `Some(true)` when the factual solution already lies in the region,
/// `None` when the factual scenario has no optimal solution.
fn region_met(p: &Prepared) -> Result<Option<bool>, String> {
    match (&*p.case, &p.region) {
        (Case::Network(net), RegionRequest::Dcopf(r)) => {
            let g = r.resolve(net).map_err(|e| e.to_string())?;
            let sol = solve_dcopf(net, &p.factual).map_err(|e| e.to_string())?;
            Ok(sol.is_optimal().then(|| sol.pg[g] >= r.threshold))
        }
        (Case::Uc(uc), RegionRequest::Uc(r)) => {
            let g = r.resolve(uc).map_err(|e| e.to_string())?;
            let sol = solve_uc(uc, &p.factual, p.config.time_limit).map_err(|e| e.to_string())?;
            Ok(sol.is_optimal().then(|| sol.u[g][r.hour]))
        }
        _ => Err("region does not fit the case kind".into()),
    }
}

fn run(p: &Prepared) -> Result<CeResult, String> {
    match (&*p.case, &p.region) {
        (Case::Network(net), RegionRequest::Dcopf(r)) => {
            let hints = match (&p.dataset, p.method) {
                (Some(ds), Method::Mip | Method::MipCut) => DcopfHints::from_dataset(ds, net).map_err(|e| e.to_string())?,
                _ => DcopfHints::default(),
            };
            explain_dcopf(net, &p.factual, r, p.method, &hints, &p.config).map_err(|e| e.to_string())
        }
        (Case::Uc(uc), RegionRequest::Uc(r)) => {
            let hints = match (&p.dataset, p.method) {
                (Some(ds), Method::DecompCut) => {
                    let g = r.resolve(uc).map_err(|e| e.to_string())?;
                    UcHints {
                        fixed: Some(derive_fixed_binaries(ds, Some((g, r.hour)))),
                        distance_bound: knn1_uc(ds, &p.factual, g, r.hour).map(|k| k.distance),
                    }
                }
                _ => UcHints::default(),
            };
            explain_uc(uc, &p.factual, r, p.method, &hints, &p.config).map_err(|e| e.to_string())
        }
        _ => Err("region does not fit the case kind".into()),
    }
}

fn named_deltas(case: &Case, result: &CeResult) -> Vec<NamedDelta> {
    result
        .deltas
        .iter()
        .enumerate()
        .map(|(i, &delta)| NamedDelta {
            id: match case {
                Case::Network(net) => net.demands.get(i).map_or_else(|| format!("d{i}"), |d| d.id.clone()),
                Case::Uc(_) => format!("t{i}"),
            },
            delta,
        })
        .collect()
}

fn pnd(dataset: Option<&SolveDataset>, result: &CeResult) -> Option<f64> {
    let peak = dataset?.peak_demand();
    (result.is_optimal() && peak > 0.0).then(|| result.distance / peak * 100.0)
}

async fn explain_case(State(state): State<Shared>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let req: ExplainRequest = decode_json(&body)?;
    let prepared = Arc::new(prepare(&state, &id, &req)?);
    let check = prepared.clone();
    match blocking(move || region_met(&check)).await?.map_err(|e| ApiError::bad_request("bad_request", e))? {
        None => {
            return Err(ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "factual_not_optimal",
                "the factual scenario has no optimal solution",
            ))
        }
        Some(true) => {
            let p = prepared.clone();
            let result = blocking(move || run(&p)).await?.map_err(ApiError::internal)?;
            let body = json!({
                "error": "region_satisfied",
                "message": "the factual solution already lies in the region",
                "deltas": named_deltas(&prepared.case, &result),
                "result": result,
            });
            return Ok((StatusCode::CONFLICT, Json(body)).into_response());
        }
        Some(false) => {}
    }
    let job_id = state.new_job_id();
    state.insert_job(ExplainJob {
        id: job_id.clone(),
        case_id: id,
        request: req,
        state: JobState::Queued,
        result: None,
        deltas: Vec::new(),
        pnd_pct: None,
        error: None,
        submitted_ms: now_ms(),
        started_ms: None,
        finished_ms: None,
    });
    tokio::spawn(execute(state.clone(), job_id.clone(), prepared));
    let created = JobCreated {
        job_id,
        state: JobState::Queued,
    };
    Ok((StatusCode::ACCEPTED, Json(created)).into_response())
}

async fn execute(state: Shared, job_id: String, prepared: Arc<Prepared>) {
    let Ok(_permit) = state.permits.clone().acquire_owned().await else {
        return;
    };
    state.update_job(&job_id, |j| {
        j.state = JobState::Running;
        j.started_ms = Some(now_ms());
    });
    let p = prepared.clone();
    let outcome = tokio::task::spawn_blocking(move || run(&p)).await;
    state.update_job(&job_id, |j| {
        j.finished_ms = Some(now_ms());
        match outcome {
            Ok(Ok(result)) => {
                j.deltas = named_deltas(&prepared.case, &result);
                j.pnd_pct = pnd(prepared.dataset.as_deref(), &result);
                j.result = Some(result);
                j.state = JobState::Done;
            }
            Ok(Err(e)) => {
                j.error = Some(e);
                j.state = JobState::Failed;
            }
            Err(e) => {
                j.error = Some(format!("worker panicked: {e}"));
                j.state = JobState::Failed;
            }
        }
    });
}

async fn get_job(State(state): State<Shared>, Path(id): Path<String>) -> Result<Json<ExplainJob>, ApiError> {
    state.job(&id).map(Json).ok_or_else(|| ApiError::not_found("job", &id))
}

fn spread(values: impl Iterator<Item = f64>) -> Spread {
    let (mut min, mut max, mut sum, mut n) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
    for v in values {
        min = min.min(v);
        max = max.max(v);
        sum += v;
        n += 1;
    }
    if n == 0 {
        return Spread { min: 0.0, mean: 0.0, max: 0.0 };
    }
    Spread { min, mean: sum / n as f64, max }
}

pub fn summarize_dataset(ds: &SolveDataset) -> DatasetSummary {
    let width = ds.samples.first().map_or(0, |s| s.theta.len());
    let demand = (0..width)
        .map(|i| spread(ds.samples.iter().filter_map(|s| s.theta.values.get(i).copied())))
        .collect();
    let n = ds.len().max(1) as f64;
    let generation = match ds.kind {
        ProblemKind::Dcopf => {
            let gens = ds.samples.first().and_then(|s| s.pg()).map_or(0, <[f64]>::len);
            (0..gens)
                .map(|g| ds.samples.iter().filter_map(|s| s.pg()).map(|pg| pg[g]).sum::<f64>() / n)
                .collect()
        }
        ProblemKind::Uc => {
            let units = ds.samples.first().and_then(|s| s.commitment()).map_or(0, Vec::len);
            (0..units)
                .map(|g| {
                    let rows = ds.samples.iter().filter_map(|s| s.commitment()).map(|u| &u[g]);
                    let (on, all) = rows.fold((0usize, 0usize), |(on, all), r| {
                        (on + r.iter().filter(|&&b| b).count(), all + r.len())
                    });
                    if all == 0 { 0.0 } else { on as f64 / all as f64 }
                })
                .collect()
        }
    };
    DatasetSummary {
        case_id: ds.case_id.clone(),
        kind: ds.kind,
        seed: ds.seed,
        samples: ds.len(),
        peak_demand_mw: ds.peak_demand(),
        demand,
        generation,
    }
}

async fn dataset_summary(State(state): State<Shared>, Path(id): Path<String>) -> Result<Json<DatasetSummary>, ApiError> {
    lookup(&state, &id)?;
    let ds = state
        .dataset(&id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "no_dataset", format!("case '{id}' has no dataset attached")))?;
    Ok(Json(summarize_dataset(&ds)))
}
