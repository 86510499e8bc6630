//! Shared service state: cases, attached datasets and explanation jobs.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use gridcf::case::{parse_case, serialize_case, Case};
use gridcf::dataset::SolveDataset;
use tokio::sync::Semaphore;

use crate::model::{ExplainJob, JobState};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Largest number of explanation jobs running at once.
    pub workers: usize,
    /// Optional directory for cases (`cases/`), datasets (`datasets/`) and
    /// finished jobs (`jobs/`).
    pub data_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self { workers: 1, data_dir: None }
    }
}

pub struct AppState {
    pub config: ServiceConfig,
    cases: RwLock<HashMap<String, Arc<Case>>>,
    datasets: RwLock<HashMap<String, Arc<SolveDataset>>>,
    jobs: RwLock<HashMap<String, ExplainJob>>,
    next_job: AtomicU64,
    pub permits: Arc<Semaphore>,
}

pub fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

impl AppState {
    /// Builds the state, loading any cases stored under the data directory.
    pub fn new(config: ServiceConfig) -> std::io::Result<Arc<Self>> {
        let state = Arc::new(Self {
            permits: Arc::new(Semaphore::new(config.workers.max(1))),
            config,
            cases: RwLock::new(HashMap::new()),
            datasets: RwLock::new(HashMap::new()),
            jobs: RwLock::new(HashMap::new()),
            next_job: AtomicU64::new(1),
        });
        if let Some(dir) = state.config.data_dir.clone() {
            for sub in ["cases", "datasets", "jobs"] {
                std::fs::create_dir_all(dir.join(sub))?;
            }
            state.load_cases(&dir.join("cases"))?;
        }
        Ok(state)
    }

    fn load_cases(&self, dir: &Path) -> std::io::Result<()> {
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "toml") {
                let text = std::fs::read_to_string(&path)?;
                if let Ok(case) = parse_case(&text) {
                    self.cases.write().expect("case lock").insert(case.content_id(), Arc::new(case));
                }
            }
        }
        Ok(())
    }

    /// Stores a case under its content id; storing the same content again is a no-op.
    pub fn insert_case(&self, case: Case) -> String {
        let id = case.content_id();
        let fresh = {
            let mut cases = self.cases.write().expect("case lock");
            if cases.contains_key(&id) {
                false
            } else {
                cases.insert(id.clone(), Arc::new(case.clone()));
                true
            }
        };
        if fresh {
            if let Some(dir) = &self.config.data_dir {
                let _ = std::fs::write(dir.join("cases").join(format!("{id}.toml")), serialize_case(&case));
            }
        }
        id
    }

    pub fn case(&self, id: &str) -> Option<Arc<Case>> {
        self.cases.read().expect("case lock").get(id).cloned()
    }

    pub fn attach_dataset(&self, dataset: SolveDataset) {
        self.datasets
            .write()
            .expect("dataset lock")
            .insert(dataset.case_id.clone(), Arc::new(dataset));
    }

    /// The dataset for a case: attached in memory, or `datasets/<id>.jsonl`.
    pub fn dataset(&self, case_id: &str) -> Option<Arc<SolveDataset>> {
        if let Some(ds) = self.datasets.read().expect("dataset lock").get(case_id) {
            return Some(ds.clone());
        }
        let path = self.config.data_dir.as_ref()?.join("datasets").join(format!("{case_id}.jsonl"));
        let text = std::fs::read_to_string(path).ok()?;
        let ds = SolveDataset::from_jsonl(&text).ok()?;
        if ds.case_id != case_id {
            return None;
        }
        let ds = Arc::new(ds);
        self.datasets
            .write()
            .expect("dataset lock")
            .insert(case_id.to_string(), ds.clone());
        Some(ds)
    }

    pub fn new_job_id(&self) -> String {
        format!("job-{}", self.next_job.fetch_add(1, Ordering::Relaxed))
    }

    pub fn insert_job(&self, job: ExplainJob) {
        self.jobs.write().expect("job lock").insert(job.id.clone(), job);
    }

    pub fn job(&self, id: &str) -> Option<ExplainJob> {
        self.jobs.read().expect("job lock").get(id).cloned()
    }

    /// Applies `update` unless it would move the job backwards.
    pub fn update_job(&self, id: &str, update: impl FnOnce(&mut ExplainJob)) {
        let snapshot = {
            let mut jobs = self.jobs.write().expect("job lock");
            let Some(job) = jobs.get_mut(id) else { return };
            let before = job.state;
            let mut next = job.clone();
            update(&mut next);
            if next.state < before {
                return;
            }
            *job = next;
            matches!(job.state, JobState::Done | JobState::Failed).then(|| job.clone())
        };
        if let (Some(job), Some(dir)) = (snapshot, &self.config.data_dir) {
            if let Ok(text) = serde_json::to_string_pretty(&job) {
                let _ = std::fs::write(dir.join("jobs").join(format!("{}.json", job.id)), text);
            }
        }
    }
}
