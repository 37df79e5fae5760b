//! Algorithm registry and the single-worker job queue.
//!
//! A job is executed as `init`, `read` in one read transaction, `compute`
//! with no transaction open, and `write` in one write transaction that also
//! marks the job succeeded. Both algorithm transactions are tagged
//! [`ALGORITHM_TAG`]; queue bookkeeping uses [`JOBS_TAG`]. A failed job is
//! recorded by a separate bookkeeping transaction, so a result id resolves
//! exactly when its job succeeded.

mod builtin;
mod registry;


use std::collections::{HashMap, VecDeque};
use std::panic::{self, AssertUnwindSafe};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use chrono::{SecondsFormat, Utc};
use parking_lot::{Condvar, Mutex, RwLock};
use serde::{Deserialize, Serialize};

use crate::domain::keys::KEY;
use crate::domain::{dataset, project, require_key, DomainError, Role, User};
use crate::graphstore::{props, Mode, NodeId, NodeRecord, Page, Properties, Store, StoreError, Value};

pub use builtin::{goeburst_descriptor, radial_descriptor, GoeBurst, Radial, GOEBURST, RADIAL};
pub use registry::{Algorithm, AlgorithmDescriptor, AlgorithmKind, BoxError, ParamSpec, ParamType, Params};

use registry::Registry;

pub const ALGORITHM_TAG: &str = "algorithm";
pub const JOBS_TAG: &str = "jobs";
pub const JOB: &str = "Job";

const SEQ: &str = "seq";
const STATUS: &str = "status";

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("unknown algorithm {0:?}")]
    UnknownAlgorithm(String),
    #[error("algorithm {0:?} is already registered")]
    DuplicateAlgorithm(String),
    #[error("invalid context: {0}")]
    InvalidContext(String),
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("a job for result {0:?} is still queued or running")]
    Conflict(String),
    #[error("unknown job {0:?}")]
    UnknownJob(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

impl From<StoreError> for EngineError {
    fn from(e: StoreError) -> Self {
        EngineError::Domain(e.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Queued,
    Running,
    Succeeded,
    Failed,
}

impl JobStatus {
    fn as_str(self) -> &'static str {
        match self {
            JobStatus::Queued => "queued",
            JobStatus::Running => "running",
            JobStatus::Succeeded => "succeeded",
            JobStatus::Failed => "failed",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [Self::Queued, Self::Running, Self::Succeeded, Self::Failed]
            .into_iter()
            .find(|x| x.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JobContext {
    pub project: String,
    pub dataset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inference: Option<String>,
    /// Id the output is stored under.
    pub result: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: String,
    pub algorithm: String,
    pub context: JobContext,
    pub parameters: Params,
    pub status: JobStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub user: String,
    pub submitted_at: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub started_at: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<String>,
}

/// What a caller asks the engine to run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Submission {
    pub algorithm: String,
    pub project: String,
    pub dataset: String,
    #[serde(default)]
    pub inference: Option<String>,
    /// Result id; allocated when absent.
    #[serde(default)]
    pub result: Option<String>,
    #[serde(default)]
    pub parameters: Params,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn opt(node: &NodeRecord, key: &str) -> Option<String> {
    node.str(key).map(str::to_owned)
}

fn decode(node: &NodeRecord) -> Job {
    let text = |k: &str| node.str(k).unwrap_or_default().to_owned();
    Job {
        id: text(KEY),
        algorithm: text("algorithm"),
        context: JobContext {
            project: text("project_key"),
            dataset: text("dataset_key"),
            inference: opt(node, "inference_key"),
            result: text("result"),
        },
        parameters: node
            .str("parameters")
            .and_then(|s| serde_json::from_str(s).ok())
            .unwrap_or_default(),
        status: node.str(STATUS).and_then(JobStatus::parse).unwrap_or(JobStatus::Queued),
        error: opt(node, "error"),
        user: text("user"),
        submitted_at: text("submitted_at"),
        started_at: opt(node, "started_at"),
        finished_at: opt(node, "finished_at"),
    }
}

fn encode(job: &Job, seq: u64) -> Properties {
    let mut p = props([
        (KEY, Value::from(&job.id)),
        (SEQ, Value::from(seq)),
        ("algorithm", Value::from(&job.algorithm)),
        ("project_key", Value::from(&job.context.project)),
        ("dataset_key", Value::from(&job.context.dataset)),
        ("result", Value::from(&job.context.result)),
        ("parameters", Value::from(serde_json::Value::Object(job.parameters.clone()).to_string())),
        (STATUS, Value::from(job.status.as_str())),
        ("user", Value::from(&job.user)),
        ("submitted_at", Value::from(&job.submitted_at)),
    ]);
    if let Some(i) = &job.context.inference {
        p.insert("inference_key".into(), Value::from(i));
    }
    p
}

fn finish_props(status: JobStatus, started: &str, error: Option<&str>) -> Properties {
    let mut p = props([
        (STATUS, Value::from(status.as_str())),
        ("started_at", Value::from(started)),
        ("finished_at", Value::from(now())),
    ]);
    if let Some(e) = error {
        p.insert("error".into(), Value::from(e));
    }
    p
}

/// Identity of a stored result; at most one live job per key.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct ResultKey {
    kind: AlgorithmKind,
    project: String,
    dataset: String,
    inference: Option<String>,
    result: String,
}

struct Entry {
    job: Job,
    node: NodeId,
    key: ResultKey,
}

#[derive(Default)]
struct Queue {
    pending: VecDeque<Entry>,
    running: Option<(String, String)>,
    active: HashMap<ResultKey, String>,
    next_seq: u64,
    shutdown: bool,
}

struct Inner {
    store: Store,
    registry: RwLock<Registry>,
    queue: Mutex<Queue>,
    wake: Condvar,
    submit: Mutex<()>,
    system: User,
}

/// Handle to the job engine. Cheap to clone.
#[derive(Clone)]
pub struct Engine {
    inner: Arc<Inner>,
}

impl Engine {
    /// Opens the engine over `store` with the built-in algorithms registered
    /// and every persisted queued job back in the queue.
    pub fn open(store: Store) -> Result<Self, EngineError> {
        store.ensure_node_index(JOB, &[KEY]);
        store.ensure_node_index(JOB, &[STATUS]);

        let mut registry = Registry::default();
        registry.register(goeburst_descriptor(), GoeBurst::default)?;
        registry.register(radial_descriptor(), Radial::default)?;

        let tx = store.begin_tagged(Mode::Read, JOBS_TAG)?;
        let next_seq = tx
            .match_nodes(JOB, &Properties::new(), Page::all(), true)
            .iter()
            .filter_map(|n| n.int(SEQ))
            .max()
            .map_or(0, |s| s as u64 + 1);
        let mut waiting: Vec<(i64, Entry)> = [JobStatus::Queued, JobStatus::Running]
            .into_iter()
            .flat_map(|s| tx.match_nodes(JOB, &props([(STATUS, s.as_str())]), Page::all(), true))
            .map(|n| {
                let job = decode(&n);
                let kind = registry.resolve(&job.algorithm).map_or(AlgorithmKind::Inference, |d| d.kind);
                let key = ResultKey {
                    kind,
                    project: job.context.project.clone(),
                    dataset: job.context.dataset.clone(),
                    inference: job.context.inference.clone(),
                    result: job.context.result.clone(),
                };
                (n.int(SEQ).unwrap_or(0), Entry { job, node: n.id, key })
            })
            .collect();
        drop(tx);
        waiting.sort_by_key(|(seq, _)| *seq);

        let mut queue = Queue {
            next_seq,
            ..Queue::default()
        };
        for (_, entry) in waiting {
            queue.active.insert(entry.key.clone(), entry.job.id.clone());
            queue.pending.push_back(entry);
        }
        if !queue.pending.is_empty() {
            log::info!("re-queued {} job(s)", queue.pending.len());
        }
        Ok(Self {
            inner: Arc::new(Inner {
                store,
                registry: RwLock::new(registry),
                queue: Mutex::new(queue),
                wake: Condvar::new(),
                submit: Mutex::new(()),
                system: User::new("engine", Role::Admin),
            }),
        })
    }

    pub fn store(&self) -> &Store {
        &self.inner.store
    }

    pub fn register<A, F>(&self, descriptor: AlgorithmDescriptor, factory: F) -> Result<(), EngineError>
    where
        A: Algorithm + 'static,
        F: Fn() -> A + Send + Sync + 'static,
    {
        self.inner.registry.write().register(descriptor, factory)
    }

    pub fn algorithms(&self) -> Vec<AlgorithmDescriptor> {
        self.inner.registry.read().descriptors()
    }

    /// Resolves a full or short algorithm name.
    pub fn descriptor(&self, name: &str) -> Option<AlgorithmDescriptor> {
        self.inner.registry.read().resolve(name).cloned()
    }

    /// Validates and enqueues a job on behalf of `user`, who needs write
    /// access to the project.
    pub fn submit(&self, user: &User, submission: Submission) -> Result<Job, EngineError> {
        let descriptor = self
            .descriptor(&submission.algorithm)
            .ok_or_else(|| EngineError::UnknownAlgorithm(submission.algorithm.clone()))?;
        let parameters = descriptor.validate(&submission.parameters)?;
        self.check_context(user, &descriptor, &submission)?;

        let result = match submission.result {
            Some(r) => {
                require_key("result", &r).map_err(|e| EngineError::InvalidParameters(e.to_string()))?;
                r
            }
            None => uuid::Uuid::new_v4().simple().to_string(),
        };
        let job = Job {
            id: uuid::Uuid::new_v4().to_string(),
            algorithm: descriptor.name.clone(),
            context: JobContext {
                project: submission.project,
                dataset: submission.dataset,
                inference: submission.inference,
                result,
            },
            parameters,
            status: JobStatus::Queued,
            error: None,
            user: user.id.clone(),
            submitted_at: now(),
            started_at: None,
            finished_at: None,
        };
        let key = ResultKey {
            kind: descriptor.kind,
            project: job.context.project.clone(),
            dataset: job.context.dataset.clone(),
            inference: job.context.inference.clone(),
            result: job.context.result.clone(),
        };

        let _serial = self.inner.submit.lock();
        let seq = {
            let mut q = self.inner.queue.lock();
            if q.active.contains_key(&key) {
                return Err(EngineError::Conflict(key.result));
            }
            q.active.insert(key.clone(), job.id.clone());
            q.next_seq += 1;
            q.next_seq - 1
        };
        let stored = (|| {
            let mut tx = self.inner.store.begin_tagged(Mode::Write, JOBS_TAG)?;
            let node = tx.create_node([JOB], encode(&job, seq))?;
            tx.commit()?;
            Ok::<_, StoreError>(node)
        })();
        let mut q = self.inner.queue.lock();
        match stored {
            Ok(node) => {
                q.pending.push_back(Entry {
                    job: job.clone(),
                    node,
                    key,
                });
                self.inner.wake.notify_all();
                Ok(job)
            }
            Err(e) => {
                q.active.remove(&key);
                Err(e.into())
            }
        }
    }

    fn check_context(&self, user: &User, descriptor: &AlgorithmDescriptor, s: &Submission) -> Result<(), EngineError> {
        let invalid = |m: String| EngineError::InvalidContext(m);
        let tx = self.inner.store.begin_tagged(Mode::Read, JOBS_TAG)?;
        let project = project::open(&tx, user, &s.project, false).map_err(|e| match e {
            DomainError::NotFound { .. } => invalid(format!("project {:?} does not exist", s.project)),
            other => other.into(),
        })?;
        project.require_write()?;
        let ds = dataset::open(&tx, &project, &s.dataset, false).map_err(|e| match e {
            DomainError::NotFound { .. } => invalid(format!("dataset {:?} does not exist", s.dataset)),
            other => other.into(),
        })?;
        match (descriptor.kind, &s.inference) {
            (AlgorithmKind::Inference, None) => Ok(()),
            (AlgorithmKind::Inference, Some(_)) => Err(invalid(format!("{} runs over a dataset, not an inference", descriptor.name))),
            (AlgorithmKind::Visualization, None) => Err(invalid(format!("{} needs an inference", descriptor.name))),
            (AlgorithmKind::Visualization, Some(i)) => {
                if crate::inference::repo::exists(&tx, &ds, i) {
                    Ok(())
                } else {
                    Err(invalid(format!("inference {i:?} does not exist")))
                }
            }
        }
    }

    pub fn get_job(&self, id: &str) -> Result<Job, EngineError> {
        let tx = self.inner.store.begin_tagged(Mode::Read, JOBS_TAG)?;
        let node = tx
            .find_node(JOB, &props([(KEY, id)]))
            .ok_or_else(|| EngineError::UnknownJob(id.to_owned()))?;
        let mut job = decode(&node);
        if let Some((running, started)) = &self.inner.queue.lock().running {
            if running == id {
                job.status = JobStatus::Running;
                job.started_at = Some(started.clone());
            }
        }
        Ok(job)
    }

    /// Whether a job for this result is queued or running.
    pub fn is_pending(&self, kind: AlgorithmKind, context: &JobContext) -> bool {
        let key = ResultKey {
            kind,
            project: context.project.clone(),
            dataset: context.dataset.clone(),
            inference: context.inference.clone(),
            result: context.result.clone(),
        };
        self.inner.queue.lock().active.contains_key(&key)
    }

    pub fn queued(&self) -> usize {
        self.inner.queue.lock().pending.len()
    }

    /// Executes the oldest queued job. Returns its id, or `None` if the queue
    /// was empty.
    pub fn run_next(&self) -> Option<String> {
        let started = now();
        let entry = {
            let mut q = self.inner.queue.lock();
            let entry = q.pending.pop_front()?;
            q.running = Some((entry.job.id.clone(), started.clone()));
            entry
        };
        let id = entry.job.id.clone();
        log::info!("job {id} ({}) started", entry.job.algorithm);

        let outcome = panic::catch_unwind(AssertUnwindSafe(|| self.execute(&entry, &started)))
            .unwrap_or_else(|p| {
                let msg = p
                    .downcast_ref::<&str>()
                    .map(|s| s.to_string())
                    .or_else(|| p.downcast_ref::<String>().cloned())
                    .unwrap_or_else(|| "algorithm panicked".into());
                Err(msg.into())
            });
        match outcome {
            Ok(()) => log::info!("job {id} succeeded"),
            Err(e) => {
                let message = e.to_string();
                log::warn!("job {id} failed: {message}");
                if let Err(e) = self.record_failure(entry.node, &started, &message) {
                    log::error!("could not record failure of job {id}: {e}");
                }
            }
        }

        let mut q = self.inner.queue.lock();
        q.running = None;
        q.active.remove(&entry.key);
        Some(id)
    }

    fn execute(&self, entry: &Entry, started: &str) -> Result<(), BoxError> {
        let job = &entry.job;
        let mut algorithm = self
            .inner
            .registry
            .read()
            .instantiate(&job.algorithm)
            .ok_or_else(|| EngineError::UnknownAlgorithm(job.algorithm.clone()))?;
        algorithm.init(&job.context, &job.parameters)?;

        let store = &self.inner.store;
        let tx1 = store.begin_tagged(Mode::Read, ALGORITHM_TAG)?;
        let project = project::open(&tx1, &self.inner.system, &job.context.project, false)?;
        let ds = dataset::open(&tx1, &project, &job.context.dataset, false)?;
        let input = algorithm.read(&tx1, &ds)?;
        tx1.commit()?;

        let output = algorithm.compute(input)?;

        let mut tx2 = store.begin_tagged(Mode::Write, ALGORITHM_TAG)?;
        algorithm.write(&mut tx2, &ds, output)?;
        tx2.set_node_properties(entry.node, finish_props(JobStatus::Succeeded, started, None))?;
        tx2.commit()?;
        Ok(())
    }

    fn record_failure(&self, node: NodeId, started: &str, message: &str) -> Result<(), StoreError> {
        let mut tx = self.inner.store.begin_tagged(Mode::Write, JOBS_TAG)?;
        tx.set_node_properties(node, finish_props(JobStatus::Failed, started, Some(message)))?;
        tx.commit().map(|_| ())
    }

    /// Runs queued jobs until the queue is empty; returns how many ran.
    pub fn run_until_idle(&self) -> usize {
        std::iter::from_fn(|| self.run_next()).count()
    }

    /// Starts the worker thread. Idle polls wait at most `poll` between
    /// checks; submissions wake the worker immediately.
    pub fn start_worker(&self, poll: Duration) -> Worker {
        self.inner.queue.lock().shutdown = false;
        let engine = self.clone();
        let handle = std::thread::Builder::new()
            .name("phylodb-worker".into())
            .spawn(move || loop {
                {
                    let mut q = engine.inner.queue.lock();
                    if q.shutdown {
                        return;
                    }
                    if q.pending.is_empty() {
                        engine.inner.wake.wait_for(&mut q, poll);
                        continue;
                    }
                }
                engine.run_next();
            })
            .expect("spawn worker thread");
        Worker {
            engine: self.clone(),
            handle: Some(handle),
        }
    }
}

/// Running worker thread; stops once the current job finishes when dropped.
pub struct Worker {
    engine: Engine,
    handle: Option<JoinHandle<()>>,
}

impl Worker {
    pub fn stop(mut self) {
        self.shutdown();
    }

    fn shutdown(&mut self) {
        self.engine.inner.queue.lock().shutdown = true;
        self.engine.inner.wake.notify_all();
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for Worker {
    fn drop(&mut self) {
        self.shutdown();
    }
}
