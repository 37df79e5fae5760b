//! HTTP controllers: request parsing, status codes and headers. All work is
//! delegated to [`Services`](crate::services::Services).

use std::collections::HashMap;

use axum::body::Bytes;
use axum::extract::{FromRequest, Path, Query, Request, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Extension, Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json_};

use phylodb_core::domain::{Allele, AllelicProfile, Dataset, Isolate, Paged, Project, Schema, User, Visibility};
use phylodb_core::graphstore::Page;

use crate::error::{ApiError, ApiResult};
use crate::services::{JobRequest, Services};
use crate::AppState;

pub const MAX_LIMIT: usize = 1000;
pub const TOTAL_COUNT: &str = "x-total-count";
const TSV: &str = "text/tab-separated-values; charset=utf-8";

/// JSON request body whose parse errors become a 400 [`ErrorBody`](crate::error::ErrorBody).
pub struct JsonBody<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for JsonBody<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        let bytes = Bytes::from_request(req, state)
            .await
            .map_err(|e| ApiError::bad_request(e.body_text()))?;
        serde_json::from_slice(&bytes)
            .map(JsonBody)
            .map_err(|e| ApiError::bad_request(format!("invalid JSON body: {e}")))
    }
}

/// UTF-8 text body.
pub struct TextBody(pub String);

impl<S: Send + Sync> FromRequest<S> for TextBody {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        let bytes = Bytes::from_request(req, state)
            .await
            .map_err(|e| ApiError::bad_request(e.body_text()))?;
        String::from_utf8(bytes.to_vec())
            .map(TextBody)
            .map_err(|_| ApiError::bad_request("body is not valid UTF-8"))
    }
}

type Params = Query<HashMap<String, String>>;

struct ListQuery {
    page: Page,
    deprecated: bool,
}

fn flag(q: &HashMap<String, String>, name: &str) -> ApiResult<bool> {
    match q.get(name).map(String::as_str) {
        None | Some("false") | Some("0") => Ok(false),
        Some("true") | Some("1") | Some("") => Ok(true),
        Some(other) => Err(ApiError::bad_request(format!("{name} must be true or false, got {other:?}"))),
    }
}

fn number<T: std::str::FromStr>(q: &HashMap<String, String>, name: &str) -> ApiResult<Option<T>> {
    q.get(name)
        .map(|v| {
            v.parse()
                .map_err(|_| ApiError::bad_request(format!("{name} must be a non-negative integer, got {v:?}")))
        })
        .transpose()
}

fn list_query(state: &AppState, q: &HashMap<String, String>) -> ApiResult<ListQuery> {
    let page = number::<usize>(q, "page")?.unwrap_or(0);
    let limit = number::<u64>(q, "limit")?
        .map_or(state.page_limit, |l| l.clamp(1, MAX_LIMIT as u64) as usize);
    Ok(ListQuery {
        page: Page::new(page, limit).map_err(|e| ApiError::bad_request(e.to_string()))?,
        deprecated: flag(q, "deprecated")?,
    })
}

fn paged<T: Serialize>(p: Paged<T>, page: Page) -> Response {
    let mut headers = HeaderMap::new();
    headers.insert(TOTAL_COUNT, HeaderValue::from(p.total));
    headers.insert("x-page", HeaderValue::from(page.offset()));
    headers.insert("x-limit", HeaderValue::from(page.limit()));
    (headers, Json(p.items)).into_response()
}

fn saved<T: Serialize>(body: T, created: bool, location: String) -> Response {
    if created {
        let loc = HeaderValue::from_str(&location).unwrap_or_else(|_| HeaderValue::from_static("/"));
        (StatusCode::CREATED, [(header::LOCATION, loc)], Json(body)).into_response()
    } else {
        Json(body).into_response()
    }
}

fn tsv(text: String) -> Response {
    ([(header::CONTENT_TYPE, HeaderValue::from_static(TSV))], text).into_response()
}

fn accepted(body: Json_, location: String) -> Response {
    let loc = HeaderValue::from_str(&location).unwrap_or_else(|_| HeaderValue::from_static("/"));
    (StatusCode::ACCEPTED, [(header::LOCATION, loc)], Json(body)).into_response()
}

async fn run<T, F>(state: &AppState, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&Services) -> ApiResult<T> + Send + 'static,
{
    let services = state.services.clone();
    tokio::task::spawn_blocking(move || f(&services))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("handler failed: {e}")))?
}

// ---- projects ----

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProjectBody {
    #[serde(default)]
    id: String,
    #[serde(default)]
    name: String,
    #[serde(default)]
    visibility: Visibility,
    #[serde(default)]
    members: Vec<String>,
}

impl ProjectBody {
    fn into_project(self) -> Project {
        Project {
            id: self.id,
            name: self.name,
            visibility: self.visibility,
            members: self.members.into_iter().collect(),
        }
    }
}

async fn list_projects(State(s): State<AppState>, Extension(u): Extension<User>, Query(q): Params) -> ApiResult<Response> {
    let lq = list_query(&s, &q)?;
    let page = lq.page;
    let p = run(&s, move |sv| sv.list_projects(&u, lq.page, lq.deprecated)).await?;
    Ok(paged(p, page))
}

async fn create_project(
    State(s): State<AppState>,
    Extension(u): Extension<User>,
    JsonBody(body): JsonBody<ProjectBody>,
) -> ApiResult<Response> {
    let p = run(&s, move |sv| sv.create_project(&u, body.into_project())).await?;
    let loc = format!("/projects/{}", p.id);
    Ok(saved(p, true, loc))
}

async fn get_project(
    State(s): State<AppState>,
    Extension(u): Extension<User>,
    Path(p): Path<String>,
    Query(q): Params,
) -> ApiResult<Response> {
    let deprecated = flag(&q, "deprecated")?;
    Ok(Json(run(&s, move |sv| sv.get_project(&u, &p, deprecated)).await?).into_response())
}

async fn update_project(
    State(s): State<AppState>,
    Extension(u): Extension<User>,
    Path(p): Path<String>,
    JsonBody(body): JsonBody<ProjectBody>,
) -> ApiResult<Response> {
    if !body.id.is_empty() && body.id != p {
        return Err(ApiError::bad_request("body id does not match the path"));
    }
    Ok(Json(run(&s, move |sv| sv.update_project(&u, &p, body.into_project())).await?).into_response())
}

async fn delete_project(State(s): State<AppState>, Extension(u): Extension<User>, Path(p): Path<String>) -> ApiResult<StatusCode> {
    run(&s, move |sv| sv.delete_project(&u, &p)).await?;
    Ok(StatusCode::NO_CONTENT)
}

// ---- datasets ----

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetBody {
    #[serde(default)]
    id: String,
    schema: String,
    #[serde(default)]
    description: String,
}

async fn list_datasets(
    State(s): State<AppState>,
    Extension(u): Extension<User>,
    Path(p): Path<String>,
    Query(q): Params,
) -> ApiResult<Response> {
    let lq = list_query(&s, &q)?;
    let page = lq.page;
    let r = run(&s, move |sv| sv.list_datasets(&u, &p, lq.page, lq.deprecated)).await?;
    Ok(paged(r, page))
}

async fn create_dataset(
    State(s): State<AppState>,
    Extension(u): Extension<User>,
    Path(p): Path<String>,
    JsonBody(b): JsonBody<DatasetBody>,
) -> ApiResult<Response> {
    let loc_project = p.clone();
    let d = Dataset { id: b.id, schema: b.schema, description: b.description };
    let view = run(&s, move |sv| sv.create_dataset(&u, &p, d)).await?;
    let loc = format!("/projects/{loc_project}/datasets/{}", view.id);
    Ok(saved(view, true, loc))
}

async fn get_dataset(
    State(s): State<AppState>,
    Extension(u): Extension<User>,
    Path((p, d)): Path<(String, String)>,
    Query(q): Params,
) -> ApiResult<Response> {
    let deprecated = flag(&q, "deprecated")?;
    Ok(Json(run(&s, move |sv| sv.get_dataset(&u, &p, &d, deprecated)).await?).into_response())
}

async fn update_dataset(
    State(s): State<AppState>,
    Extension(u): Extension<User>,
    Path((p, d)): Path<(String, String)>,
    JsonBody(b): JsonBody<DatasetBody>,
) -> ApiResult<Response> {
    if !b.id.is_empty() && b.id != d {
        return Err(ApiError::bad_request("body id does not match the path"));
    }
    let body = Dataset { id: d.clone(), schema: b.schema, description: b.description };
    Ok(Json(run(&s, move |sv| sv.update_dataset(&u, &p, &d, body)).await?).into_response())
}

async fn delete_dataset(
    State(s): State<AppState>,
    Extension(u): Extension<User>,
    Path((p, d)): Path<(String, String)>,
) -> ApiResult<StatusCode> {
    run(&s, move |sv| sv.delete_dataset(&u, &p, &d)).await?;
    Ok(StatusCode::NO_CONTENT)
}

// ---- profiles ----

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileBody {
    #[serde(default)]
    id: String,
    alleles: Vec<Json_>,
}

impl ProfileBody {
    fn into_profile(self) -> ApiResult<AllelicProfile> {
        let alleles = self
            .alleles
            .into_iter()
            .enumerate()
            .map(|(i, v)| match v {
                Json_::Null => Ok(None),
                Json_::String(s) => Ok(Some(s)),
                Json_::Number(n) => Ok(Some(n.to_string())),
                _ => Err(ApiError::bad_request(format!("allele {} must be a string, number or null", i + 1))),
            })
            .collect::<ApiResult<Vec<_>>>()?;
        Ok(AllelicProfile { id: self.id, alleles, frequency: 0 })
    }
}

async fn list_profiles(
    State(s): State<AppState>,
    Extension(u): Extension<User>,
    Path((p, d)): Path<(String, String)>,
    Query(q): Params,
) -> ApiResult<Response> {
    let lq = list_query(&s, &q)?;
    let page = lq.page;
    let r = run(&s, move |sv| sv.list_profiles(&u, &p, &d, lq.page, lq.deprecated)).await?;
    Ok(paged(r, page))
}

async fn save_profile(
    State(s): State<AppState>,
    Extension(u): Extension<User>,
    Path((p, d)): Path<(String, String)>,
    JsonBody(b): JsonBody<ProfileBody>,
) -> ApiResult<Response> {
    let profile = b.into_profile()?;
    let loc = format!("/projects/{p}/datasets/{d}/profiles/{}", profile.id);
    let (v, created) = run(&s, move |sv| sv.save_profile(&u, &p, &d, profile)).await?;
    Ok(saved(v, created, loc))
}

async fn put_profile(
    State(s): State<AppState>,
    Extension(u): Extension<User>,
    Path((p, d, id)): Path<(String, String, String)>,
    JsonBody(mut b): JsonBody<ProfileBody>,
) -> ApiResult<Response> {
    if !b.id.is_empty() && b.id != id {
        return Err(ApiError::bad_request("body id does not match the path"));
    }
    b.id = id;
    let profile = b.into_profile()?;
    let loc = format!("/projects/{p}/datasets/{d}/profiles/{}", profile.id);
    let (v, created) = run(&s, move |sv| sv.save_profile(&u, &p, &d, profile)).await?;
    Ok(saved(v, created, loc))
}

async fn get_profile(
    State(s): State<AppState>,
    Extension(u): Extension<User>,
    Path((p, d, id)): Path<(String, String, String)>,
    Query(q): Params,
) -> ApiResult<Response> {
    let version = number::<u32>(&q, "version")?;
    let deprecated = flag(&q, "deprecated")?;
    Ok(Json(run(&s, move |sv| sv.get_profile(&u, &p, &d, &id, version, deprecated)).await?).into_response())
}

async fn delete_profile(
    State(s): State<AppState>,
    Extension(u): Extension<User>,
    Path((p, d, id)): Path<(String, String, String)>,
) -> ApiResult<StatusCode> {
    run(&s, move |sv| sv.delete_profile(&u, &p, &d, &id)).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn import_profiles(
    State(s): State<AppState>,
    Extension(u): Extension<User>,
    Path((p, d)): Path<(String, String)>,
    TextBody(text): TextBody,
) -> ApiResult<Response> {
    Ok(Json(run(&s, move |sv| sv.import_profiles(&u, &p, &d, &text)).await?).into_response())
}

async fn export_profiles(
    State(s): State<AppState>,
    Extension(u): Extension<User>,
    Path((p, d)): Path<(String, String)>,
) -> ApiResult<Response> {
    Ok(tsv(run(&s, move |sv| sv.export_profiles(&u, &p, &d)).await?))
}

// ---- isolates ----

async fn list_isolates(
    State(s): State<AppState>,
    Extension(u): Extension<User>,
    Path((p, d)): Path<(String, String)>,
    Query(q): Params,
) -> ApiResult<Response> {
    let lq = list_query(&s, &q)?;
    let page = lq.page;
    let r = run(&s, move |sv| sv.list_isolates(&u, &p, &d, lq.page, lq.deprecated)).await?;
    Ok(paged(r, page))
}

async fn save_isolate(
    State(s): State<AppState>,
    Extension(u): Extension<User>,
    Path((p, d)): Path<(String, String)>,
    JsonBody(body): JsonBody<Isolate>,
) -> ApiResult<Response> {
    let loc = format!("/projects/{p}/datasets/{d}/isolates/{}", body.id);
    let (v, created) = run(&s, move |sv| sv.save_isolate(&u, &p, &d, body)).await?;
    Ok(saved(v, created, loc))
}

async fn put_isolate(
    State(s): State<AppState>,
    Extension(u): Extension<User>,
    Path((p, d, id)): Path<(String, String, String)>,
    JsonBody(mut body): JsonBody<Isolate>,
) -> ApiResult<Response> {
    if !body.id.is_empty() && body.id != id {
        return Err(ApiError::bad_request("body id does not match the path"));
    }
    body.id = id;
    let loc = format!("/projects/{p}/datasets/{d}/isolates/{}", body.id);
    let (v, created) = run(&s, move |sv| sv.save_isolate(&u, &p, &d, body)).await?;
    Ok(saved(v, created, loc))
}

async fn get_isolate(
    State(s): State<AppState>,
    Extension(u): Extension<User>,
    Path((p, d, id)): Path<(String, String, String)>,
    Query(q): Params,
) -> ApiResult<Response> {
    let version = number::<u32>(&q, "version")?;
    let deprecated = flag(&q, "deprecated")?;
    Ok(Json(run(&s, move |sv| sv.get_isolate(&u, &p, &d, &id, version, deprecated)).await?).into_response())
}

async fn delete_isolate(
    State(s): State<AppState>,
    Extension(u): Extension<User>,
    Path((p, d, id)): Path<(String, String, String)>,
) -> ApiResult<StatusCode> {
    run(&s, move |sv| sv.delete_isolate(&u, &p, &d, &id)).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn import_isolates(
    State(s): State<AppState>,
    Extension(u): Extension<User>,
    Path((p, d)): Path<(String, String)>,
    TextBody(text): TextBody,
) -> ApiResult<Response> {
    Ok(Json(run(&s, move |sv| sv.import_isolates(&u, &p, &d, &text)).await?).into_response())
}

async fn export_isolates(
    State(s): State<AppState>,
    Extension(u): Extension<User>,
    Path((p, d)): Path<(String, String)>,
) -> ApiResult<Response> {
    Ok(tsv(run(&s, move |sv| sv.export_isolates(&u, &p, &d)).await?))
}

// ---- schemas and alleles ----

async fn list_schemas(State(s): State<AppState>, Query(q): Params) -> ApiResult<Response> {
    let lq = list_query(&s, &q)?;
    let page = lq.page;
    Ok(paged(run(&s, move |sv| sv.list_schemas(lq.page)).await?, page))
}

async fn save_schema(
    State(s): State<AppState>,
    Extension(u): Extension<User>,
    JsonBody(body): JsonBody<Schema>,
) -> ApiResult<Response> {
    let loc = format!("/schemas/{}", body.id);
    let (v, created) = run(&s, move |sv| sv.save_schema(&u, body)).await?;
    Ok(saved(v, created, loc))
}

async fn put_schema(
    State(s): State<AppState>,
    Extension(u): Extension<User>,
    Path(id): Path<String>,
    JsonBody(mut body): JsonBody<Schema>,
) -> ApiResult<Response> {
    if body.id != id {
        return Err(ApiError::bad_request("body id does not match the path"));
    }
    body.id = id;
    let loc = format!("/schemas/{}", body.id);
    let (v, created) = run(&s, move |sv| sv.save_schema(&u, body)).await?;
    Ok(saved(v, created, loc))
}

async fn get_schema(State(s): State<AppState>, Path(id): Path<String>, Query(q): Params) -> ApiResult<Response> {
    let version = number::<u32>(&q, "version")?;
    Ok(Json(run(&s, move |sv| sv.get_schema(&id, version)).await?).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AlleleBody {
    id: String,
    #[serde(default)]
    sequence: Option<String>,
}

async fn list_alleles(
    State(s): State<AppState>,
    Path((t, l)): Path<(String, String)>,
    Query(q): Params,
) -> ApiResult<Response> {
    let lq = list_query(&s, &q)?;
    let page = lq.page;
    Ok(paged(run(&s, move |sv| sv.list_alleles(&t, &l, lq.page)).await?, page))
}

async fn save_allele(
    State(s): State<AppState>,
    Extension(u): Extension<User>,
    Path((t, l)): Path<(String, String)>,
    JsonBody(b): JsonBody<AlleleBody>,
) -> ApiResult<Response> {
    let loc = format!("/taxa/{t}/loci/{l}/alleles/{}", b.id);
    let allele = Allele { taxon: t, locus: l, id: b.id, sequence: b.sequence };
    let (v, created) = run(&s, move |sv| sv.save_allele(&u, allele)).await?;
    Ok(saved(v, created, loc))
}

async fn get_allele(
    State(s): State<AppState>,
    Path((t, l, a)): Path<(String, String, String)>,
    Query(q): Params,
) -> ApiResult<Response> {
    let version = number::<u32>(&q, "version")?;
    Ok(Json(run(&s, move |sv| sv.get_allele(&t, &l, &a, version)).await?).into_response())
}

async fn delete_allele(
    State(s): State<AppState>,
    Extension(u): Extension<User>,
    Path((t, l, a)): Path<(String, String, String)>,
) -> ApiResult<StatusCode> {
    run(&s, move |sv| sv.delete_allele(&u, &t, &l, &a)).await?;
    Ok(StatusCode::NO_CONTENT)
}

// ---- algorithms, inferences, visualizations, jobs ----

async fn list_algorithms(State(s): State<AppState>) -> Response {
    Json(s.services.algorithms()).into_response()
}

async fn list_inferences(
    State(s): State<AppState>,
    Extension(u): Extension<User>,
    Path((p, d)): Path<(String, String)>,
    Query(q): Params,
) -> ApiResult<Response> {
    let lq = list_query(&s, &q)?;
    let page = lq.page;
    Ok(paged(run(&s, move |sv| sv.list_inferences(&u, &p, &d, lq.page)).await?, page))
}

async fn submit_inference(
    State(s): State<AppState>,
    Extension(u): Extension<User>,
    Path((p, d)): Path<(String, String)>,
    JsonBody(req): JsonBody<JobRequest>,
) -> ApiResult<Response> {
    let job = run(&s, move |sv| sv.submit_inference(&u, &p, &d, req)).await?;
    let loc = format!("/jobs/{}", job.id);
    Ok(accepted(json!({ "job": job.id, "inference": job.context.result }), loc))
}

async fn get_inference(
    State(s): State<AppState>,
    Extension(u): Extension<User>,
    Path((p, d, i)): Path<(String, String, String)>,
) -> ApiResult<Response> {
    Ok(Json(run(&s, move |sv| sv.get_inference(&u, &p, &d, &i)).await?).into_response())
}

async fn list_visualizations(
    State(s): State<AppState>,
    Extension(u): Extension<User>,
    Path((p, d, i)): Path<(String, String, String)>,
    Query(q): Params,
) -> ApiResult<Response> {
    let lq = list_query(&s, &q)?;
    let page = lq.page;
    Ok(paged(run(&s, move |sv| sv.list_visualizations(&u, &p, &d, &i, lq.page)).await?, page))
}

async fn submit_visualization(
    State(s): State<AppState>,
    Extension(u): Extension<User>,
    Path((p, d, i)): Path<(String, String, String)>,
    JsonBody(req): JsonBody<JobRequest>,
) -> ApiResult<Response> {
    let job = run(&s, move |sv| sv.submit_visualization(&u, &p, &d, &i, req)).await?;
    let loc = format!("/jobs/{}", job.id);
    Ok(accepted(json!({ "job": job.id, "visualization": job.context.result }), loc))
}

async fn get_visualization(
    State(s): State<AppState>,
    Extension(u): Extension<User>,
    Path((p, d, i, v)): Path<(String, String, String, String)>,
) -> ApiResult<Response> {
    Ok(Json(run(&s, move |sv| sv.get_visualization(&u, &p, &d, &i, &v)).await?).into_response())
}

async fn get_job(State(s): State<AppState>, Extension(u): Extension<User>, Path(j): Path<String>) -> ApiResult<Response> {
    Ok(Json(run(&s, move |sv| sv.get_job(&u, &j)).await?).into_response())
}

/// Routes that require an authenticated user.
pub fn protected() -> Router<AppState> {
    let ds = "/projects/{p}/datasets/{d}";
    Router::new()
        .route("/algorithms", get(list_algorithms))
        .route("/projects", get(list_projects).post(create_project))
        .route("/projects/{p}", get(get_project).put(update_project).delete(delete_project))
        .route("/projects/{p}/datasets", get(list_datasets).post(create_dataset))
        .route(ds, get(get_dataset).put(update_dataset).delete(delete_dataset))
        .route(&format!("{ds}/profiles"), get(list_profiles).post(save_profile))
        .route(&format!("{ds}/profiles/import"), axum::routing::post(import_profiles))
        .route(&format!("{ds}/profiles/export"), get(export_profiles))
        .route(&format!("{ds}/profiles/{{id}}"), get(get_profile).put(put_profile).delete(delete_profile))
        .route(&format!("{ds}/isolates"), get(list_isolates).post(save_isolate))
        .route(&format!("{ds}/isolates/import"), axum::routing::post(import_isolates))
        .route(&format!("{ds}/isolates/export"), get(export_isolates))
        .route(&format!("{ds}/isolates/{{id}}"), get(get_isolate).put(put_isolate).delete(delete_isolate))
        .route(&format!("{ds}/inferences"), get(list_inferences).post(submit_inference))
        .route(&format!("{ds}/inferences/{{i}}"), get(get_inference))
        .route(
            &format!("{ds}/inferences/{{i}}/visualizations"),
            get(list_visualizations).post(submit_visualization),
        )
        .route(&format!("{ds}/inferences/{{i}}/visualizations/{{v}}"), get(get_visualization))
        .route("/jobs/{j}", get(get_job))
        .route("/schemas", get(list_schemas).post(save_schema))
        .route("/schemas/{s}", get(get_schema).put(put_schema))
        .route("/taxa/{t}/loci/{l}/alleles", get(list_alleles).post(save_allele))
        .route("/taxa/{t}/loci/{l}/alleles/{a}", get(get_allele).delete(delete_allele))
}
