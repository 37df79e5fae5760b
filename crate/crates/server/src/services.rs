//! Use cases behind the HTTP controllers. Each call runs in its own short
//! transaction; this is the only layer that touches the store.

use serde::{Deserialize, Serialize};

use phylodb_core::domain::{
    allele, dataset, isolate, profile, project, schema, Allele, AllelicProfile, Dataset, DatasetHandle,
    DomainError, Isolate, Paged, Project, ProjectHandle, Schema, User, Versioned, Visibility,
};
use phylodb_core::domain::tsv::ImportReport;
use phylodb_core::engine::{AlgorithmDescriptor, AlgorithmKind, Engine, Job, Params, Submission};
use phylodb_core::graphstore::{Page, Store, Transaction};
use phylodb_core::inference::repo::{self as inferences, InferenceResult, InferenceSummary};
use phylodb_core::viz::repo::{self as visualizations, VisualizationResult};

use crate::error::{ApiError, ApiResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectView {
    pub id: String,
    pub name: String,
    pub visibility: Visibility,
    pub members: Vec<String>,
    pub deprecated: bool,
}

impl ProjectView {
    fn of(handle: &ProjectHandle) -> Self {
        Self::from_project(handle.project(), handle.is_deprecated())
    }

    fn from_project(p: &Project, deprecated: bool) -> Self {
        Self {
            id: p.id.clone(),
            name: p.name.clone(),
            visibility: p.visibility,
            members: p.members.iter().cloned().collect(),
            deprecated,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetView {
    pub id: String,
    pub project: String,
    pub schema: String,
    pub description: String,
    pub loci: Vec<String>,
    pub deprecated: bool,
}

impl DatasetView {
    fn of(tx: &Transaction, ds: &DatasetHandle) -> Self {
        Self {
            id: ds.id().to_owned(),
            project: ds.project().id().to_owned(),
            schema: ds.dataset().schema.clone(),
            description: ds.dataset().description.clone(),
            loci: ds.schema().loci.clone(),
            deprecated: tx.node(ds.node()).is_some_and(|n| n.is_deprecated()),
        }
    }
}

/// Fields a client may send for a new job; the addressed resource comes from
/// the path.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobRequest {
    pub algorithm: String,
    #[serde(default)]
    pub parameters: Params,
    #[serde(default)]
    pub id: Option<String>,
}

#[derive(Clone)]
pub struct Services {
    store: Store,
    engine: Engine,
}

impl Services {
    pub fn new(store: Store, engine: Engine) -> Self {
        Self { store, engine }
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    fn read<T>(&self, f: impl FnOnce(&Transaction) -> ApiResult<T>) -> ApiResult<T> {
        let tx = self.store.read()?;
        f(&tx)
    }

    fn write<T>(&self, f: impl FnOnce(&mut Transaction) -> ApiResult<T>) -> ApiResult<T> {
        let mut tx = self.store.write()?;
        let out = f(&mut tx)?;
        tx.commit()?;
        Ok(out)
    }

    // ---- projects ----

    pub fn list_projects(&self, user: &User, page: Page, deprecated: bool) -> ApiResult<Paged<ProjectView>> {
        self.read(|tx| {
            let listed = project::list(tx, user, page, deprecated);
            let items = listed
                .items
                .iter()
                .map(|p| {
                    let h = project::open(tx, user, &p.id, true)?;
                    Ok(ProjectView::of(&h))
                })
                .collect::<Result<_, DomainError>>()?;
            Ok(Paged { items, total: listed.total })
        })
    }

    pub fn create_project(&self, user: &User, p: Project) -> ApiResult<ProjectView> {
        self.write(|tx| {
            match project::open(tx, user, &p.id, true) {
                Err(DomainError::NotFound { .. }) => {}
                Ok(_) | Err(DomainError::Forbidden(_)) => {
                    return Err(DomainError::Conflict(format!("project '{}' already exists", p.id)).into())
                }
                Err(e) => return Err(e.into()),
            }
            let (h, _) = project::save(tx, user, &p)?;
            Ok(ProjectView::of(&h))
        })
    }

    pub fn get_project(&self, user: &User, id: &str, deprecated: bool) -> ApiResult<ProjectView> {
        self.read(|tx| Ok(ProjectView::of(&project::open(tx, user, id, deprecated)?)))
    }

    pub fn update_project(&self, user: &User, id: &str, mut p: Project) -> ApiResult<ProjectView> {
        self.write(|tx| {
            project::open(tx, user, id, false)?.require_write()?;
            p.id = id.to_owned();
            let (h, _) = project::save(tx, user, &p)?;
            Ok(ProjectView::of(&h))
        })
    }

    pub fn delete_project(&self, user: &User, id: &str) -> ApiResult<()> {
        self.write(|tx| Ok(project::delete(tx, &project::open(tx, user, id, false)?)?))
    }

    // ---- datasets ----

    fn dataset(tx: &Transaction, user: &User, p: &str, d: &str, deprecated: bool) -> ApiResult<DatasetHandle> {
        let project = project::open(tx, user, p, false)?;
        Ok(dataset::open(tx, &project, d, deprecated)?)
    }

    pub fn list_datasets(&self, user: &User, p: &str, page: Page, deprecated: bool) -> ApiResult<Paged<DatasetView>> {
        self.read(|tx| {
            let project = project::open(tx, user, p, false)?;
            let listed = dataset::list(tx, &project, page, deprecated);
            let items = listed
                .items
                .iter()
                .map(|d| Ok(DatasetView::of(tx, &dataset::open(tx, &project, &d.id, true)?)))
                .collect::<Result<_, DomainError>>()?;
            Ok(Paged { items, total: listed.total })
        })
    }

    pub fn create_dataset(&self, user: &User, p: &str, d: Dataset) -> ApiResult<DatasetView> {
        self.write(|tx| {
            let project = project::open(tx, user, p, false)?;
            project.require_write()?;
            if dataset::open(tx, &project, &d.id, true).is_ok() {
                return Err(DomainError::Conflict(format!("dataset '{}' already exists", d.id)).into());
            }
            let (h, _) = dataset::save(tx, &project, &d)?;
            Ok(DatasetView::of(tx, &h))
        })
    }

    pub fn get_dataset(&self, user: &User, p: &str, d: &str, deprecated: bool) -> ApiResult<DatasetView> {
        self.read(|tx| Ok(DatasetView::of(tx, &Self::dataset(tx, user, p, d, deprecated)?)))
    }

    pub fn update_dataset(&self, user: &User, p: &str, d: &str, mut body: Dataset) -> ApiResult<DatasetView> {
        self.write(|tx| {
            let current = Self::dataset(tx, user, p, d, false)?;
            current.require_write()?;
            body.id = d.to_owned();
            let (h, _) = dataset::save(tx, current.project(), &body)?;
            Ok(DatasetView::of(tx, &h))
        })
    }

    pub fn delete_dataset(&self, user: &User, p: &str, d: &str) -> ApiResult<()> {
        self.write(|tx| Ok(dataset::delete(tx, &Self::dataset(tx, user, p, d, false)?)?))
    }

    // ---- profiles ----

    pub fn list_profiles(
        &self,
        user: &User,
        p: &str,
        d: &str,
        page: Page,
        deprecated: bool,
    ) -> ApiResult<Paged<Versioned<AllelicProfile>>> {
        self.read(|tx| Ok(profile::list(tx, &Self::dataset(tx, user, p, d, false)?, page, deprecated)?))
    }

    /// Stores a new version; the flag tells whether the profile was created.
    pub fn save_profile(
        &self,
        user: &User,
        p: &str,
        d: &str,
        body: AllelicProfile,
    ) -> ApiResult<(Versioned<AllelicProfile>, bool)> {
        self.write(|tx| {
            let ds = Self::dataset(tx, user, p, d, false)?;
            let created = profile::find(tx, &ds, &body.id).is_none();
            let version = profile::save(tx, &ds, &body)?;
            Ok((profile::get(tx, &ds, &body.id, Some(version), false)?, created))
        })
    }

    pub fn get_profile(
        &self,
        user: &User,
        p: &str,
        d: &str,
        id: &str,
        version: Option<u32>,
        deprecated: bool,
    ) -> ApiResult<Versioned<AllelicProfile>> {
        self.read(|tx| Ok(profile::get(tx, &Self::dataset(tx, user, p, d, false)?, id, version, deprecated)?))
    }

    pub fn delete_profile(&self, user: &User, p: &str, d: &str, id: &str) -> ApiResult<()> {
        self.write(|tx| Ok(profile::delete(tx, &Self::dataset(tx, user, p, d, false)?, id)?))
    }

    pub fn import_profiles(&self, user: &User, p: &str, d: &str, text: &str) -> ApiResult<ImportReport> {
        self.write(|tx| {
            let mut ds = Self::dataset(tx, user, p, d, false)?;
            Ok(profile::import(tx, &mut ds, text)?)
        })
    }

    pub fn export_profiles(&self, user: &User, p: &str, d: &str) -> ApiResult<String> {
        self.read(|tx| Ok(profile::export(tx, &Self::dataset(tx, user, p, d, false)?)?))
    }

    // ---- isolates ----

    pub fn list_isolates(
        &self,
        user: &User,
        p: &str,
        d: &str,
        page: Page,
        deprecated: bool,
    ) -> ApiResult<Paged<Versioned<Isolate>>> {
        self.read(|tx| Ok(isolate::list(tx, &Self::dataset(tx, user, p, d, false)?, page, deprecated)?))
    }

    pub fn save_isolate(&self, user: &User, p: &str, d: &str, body: Isolate) -> ApiResult<(Versioned<Isolate>, bool)> {
        self.write(|tx| {
            let ds = Self::dataset(tx, user, p, d, false)?;
            let created = isolate::get(tx, &ds, &body.id, None, true).is_err();
            let version = isolate::save(tx, &ds, &body)?;
            Ok((isolate::get(tx, &ds, &body.id, Some(version), false)?, created))
        })
    }

    pub fn get_isolate(
        &self,
        user: &User,
        p: &str,
        d: &str,
        id: &str,
        version: Option<u32>,
        deprecated: bool,
    ) -> ApiResult<Versioned<Isolate>> {
        self.read(|tx| Ok(isolate::get(tx, &Self::dataset(tx, user, p, d, false)?, id, version, deprecated)?))
    }

    pub fn delete_isolate(&self, user: &User, p: &str, d: &str, id: &str) -> ApiResult<()> {
        self.write(|tx| Ok(isolate::delete(tx, &Self::dataset(tx, user, p, d, false)?, id)?))
    }

    pub fn import_isolates(&self, user: &User, p: &str, d: &str, text: &str) -> ApiResult<ImportReport> {
        self.write(|tx| Ok(isolate::import(tx, &Self::dataset(tx, user, p, d, false)?, text)?))
    }

    pub fn export_isolates(&self, user: &User, p: &str, d: &str) -> ApiResult<String> {
        self.read(|tx| Ok(isolate::export(tx, &Self::dataset(tx, user, p, d, false)?)?))
    }

    // ---- schemas and alleles ----

    pub fn list_schemas(&self, page: Page) -> ApiResult<Paged<Schema>> {
        self.read(|tx| Ok(schema::list(tx, page)?))
    }

    pub fn save_schema(&self, user: &User, body: Schema) -> ApiResult<(Versioned<Schema>, bool)> {
        self.write(|tx| {
            let (version, created) = schema::save(tx, user, &body)?;
            Ok((schema::get(tx, &body.id, Some(version))?, created))
        })
    }

    pub fn get_schema(&self, id: &str, version: Option<u32>) -> ApiResult<Versioned<Schema>> {
        self.read(|tx| Ok(schema::get(tx, id, version)?))
    }

    pub fn list_alleles(&self, taxon: &str, locus: &str, page: Page) -> ApiResult<Paged<Versioned<Allele>>> {
        self.read(|tx| Ok(allele::list(tx, taxon, locus, page)?))
    }

    pub fn save_allele(&self, user: &User, body: Allele) -> ApiResult<(Versioned<Allele>, bool)> {
        self.write(|tx| {
            let created = allele::get(tx, &body.taxon, &body.locus, &body.id, None).is_err();
            let version = allele::save(tx, user, &body)?;
            Ok((allele::get(tx, &body.taxon, &body.locus, &body.id, Some(version))?, created))
        })
    }

    pub fn get_allele(&self, taxon: &str, locus: &str, id: &str, version: Option<u32>) -> ApiResult<Versioned<Allele>> {
        self.read(|tx| Ok(allele::get(tx, taxon, locus, id, version)?))
    }

    pub fn delete_allele(&self, user: &User, taxon: &str, locus: &str, id: &str) -> ApiResult<()> {
        self.write(|tx| Ok(allele::delete(tx, user, taxon, locus, id)?))
    }

    // ---- algorithms and jobs ----

    pub fn algorithms(&self) -> Vec<AlgorithmDescriptor> {
        self.engine.algorithms()
    }

    fn submit(&self, user: &User, kind: AlgorithmKind, mut submission: Submission) -> ApiResult<Job> {
        match self.engine.descriptor(&submission.algorithm) {
            Some(d) if d.kind == kind => submission.algorithm = d.name,
            _ => {
                return Err(ApiError::bad_request(format!(
                    "unknown {} algorithm {:?}",
                    match kind {
                        AlgorithmKind::Inference => "inference",
                        AlgorithmKind::Visualization => "visualization",
                    },
                    submission.algorithm
                )))
            }
        }
        Ok(self.engine.submit(user, submission)?)
    }

    pub fn submit_inference(&self, user: &User, p: &str, d: &str, req: JobRequest) -> ApiResult<Job> {
        self.submit(
            user,
            AlgorithmKind::Inference,
            Submission {
                algorithm: req.algorithm,
                project: p.to_owned(),
                dataset: d.to_owned(),
                inference: None,
                result: req.id,
                parameters: req.parameters,
            },
        )
    }

    pub fn submit_visualization(&self, user: &User, p: &str, d: &str, inference: &str, req: JobRequest) -> ApiResult<Job> {
        self.read(|tx| {
            let ds = Self::dataset(tx, user, p, d, false)?;
            if !inferences::exists(tx, &ds, inference) {
                return Err(DomainError::NotFound { kind: "inference", id: inference.to_owned() }.into());
            }
            Ok(())
        })?;
        self.submit(
            user,
            AlgorithmKind::Visualization,
            Submission {
                algorithm: req.algorithm,
                project: p.to_owned(),
                dataset: d.to_owned(),
                inference: Some(inference.to_owned()),
                result: req.id,
                parameters: req.parameters,
            },
        )
    }

    pub fn list_inferences(&self, user: &User, p: &str, d: &str, page: Page) -> ApiResult<Paged<InferenceSummary>> {
        self.read(|tx| Ok(inferences::list(tx, &Self::dataset(tx, user, p, d, false)?, page)))
    }

    pub fn get_inference(&self, user: &User, p: &str, d: &str, id: &str) -> ApiResult<InferenceResult> {
        self.read(|tx| Ok(inferences::get(tx, &Self::dataset(tx, user, p, d, false)?, id)?))
    }

    pub fn list_visualizations(&self, user: &User, p: &str, d: &str, inference: &str, page: Page) -> ApiResult<Paged<String>> {
        self.read(|tx| {
            let ds = Self::dataset(tx, user, p, d, false)?;
            if !inferences::exists(tx, &ds, inference) {
                return Err(DomainError::NotFound { kind: "inference", id: inference.to_owned() }.into());
            }
            Ok(visualizations::list(tx, &ds, inference, page))
        })
    }

    pub fn get_visualization(
        &self,
        user: &User,
        p: &str,
        d: &str,
        inference: &str,
        id: &str,
    ) -> ApiResult<VisualizationResult> {
        self.read(|tx| Ok(visualizations::get(tx, &Self::dataset(tx, user, p, d, false)?, inference, id)?))
    }

    /// A job is visible to whoever can read its project.
    pub fn get_job(&self, user: &User, id: &str) -> ApiResult<Job> {
        let job = self.engine.get_job(id)?;
        self.read(|tx| match project::open(tx, user, &job.context.project, true) {
            Ok(_) => Ok(()),
            Err(DomainError::Forbidden(_)) => Err(ApiError::not_found(format!("unknown job {id:?}"))),
            Err(e) => Err(e.into()),
        })?;
        Ok(job)
    }
}
