mod common;

use axum::http::{Method, StatusCode};
use serde_json::{json, Value};

use common::{profile, App, DS};
use phylodb_core::domain::Role;

fn assert_error(r: &common::Reply, status: StatusCode) {
    assert_eq!(r.status, status, "{}", r.text);
    let body = r.json();
    assert_eq!(body["status"], status.as_u16(), "{body}");
    assert!(body["message"].as_str().is_some_and(|m| !m.is_empty()), "{body}");
}

#[tokio::test]
async fn health_needs_no_token() {
    let app = App::new();
    let r = app.send(Method::GET, "/healthz", None, None).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.text, "ok");
}

#[tokio::test]
async fn bad_tokens_are_rejected() {
    let app = App::new();
    let good = app.token("u1");
    let mut tampered = good.clone();
    let last = tampered.pop().unwrap();
    tampered.push(if last == 'x' { 'y' } else { 'x' });
    let expired = app.tokens.mint("u1", Role::User, -10);
    let foreign = phylodb_server::auth::HmacTokens::new("some-other-secret-123").mint("u1", Role::User, 60);

    for t in [None, Some(tampered.as_str()), Some(expired.as_str()), Some(foreign.as_str()), Some("")] {
        let r = app.send(Method::GET, "/projects", t, None).await;
        assert_error(&r, StatusCode::UNAUTHORIZED);
        assert_eq!(r.headers["www-authenticate"], "Bearer");
    }
    let r = app
        .send(Method::GET, "/projects", None, None)
        .await;
    assert_error(&r, StatusCode::UNAUTHORIZED);
    assert_eq!(app.get("/projects", &good).await.status, StatusCode::OK);
}

#[tokio::test]
async fn unauthenticated_writes_touch_nothing() {
    let app = App::new();
    app.seed("owner").await;
    app.post(&format!("{DS}/profiles"), &app.token("owner"), profile("1", [1; 7])).await;
    let before = app.store.stats();

    let writes: Vec<(Method, String, Option<Value>)> = vec![
        (Method::POST, "/projects".into(), Some(json!({"id": "p2"}))),
        (Method::PUT, "/projects/p1".into(), Some(json!({"name": "x"}))),
        (Method::DELETE, "/projects/p1".into(), None),
        (Method::POST, "/projects/p1/datasets".into(), Some(json!({"id": "d2", "schema": "mlst"}))),
        (Method::DELETE, DS.into(), None),
        (Method::POST, format!("{DS}/profiles"), Some(profile("2", [2; 7]))),
        (Method::PUT, format!("{DS}/profiles/1"), Some(profile("1", [3; 7]))),
        (Method::DELETE, format!("{DS}/profiles/1"), None),
        (Method::POST, format!("{DS}/isolates"), Some(json!({"id": "i1"}))),
        (Method::POST, format!("{DS}/inferences"), Some(json!({"algorithm": "goeburst"}))),
        (Method::POST, "/schemas".into(), Some(json!({"id": "s", "taxon": "t", "loci": ["a"]}))),
        (Method::POST, "/taxa/t/loci/l/alleles".into(), Some(json!({"id": "1"}))),
    ];
    for (method, uri, body) in writes {
        let body = body.map(|b| ("application/json", b.to_string()));
        let r = app.send(method.clone(), &uri, Some("garbage"), body).await;
        assert_error(&r, StatusCode::UNAUTHORIZED);
    }
    let r = app
        .send(Method::POST, &format!("{DS}/profiles/import"), None, Some(("text/tab-separated-values", "x".into())))
        .await;
    assert_error(&r, StatusCode::UNAUTHORIZED);

    let after = app.store.stats();
    assert_eq!(after.write_transactions, before.write_transactions);
    assert_eq!(after.commits, before.commits);
}

#[tokio::test]
async fn project_crud_and_membership() {
    let app = App::new();
    let owner = app.token("owner");
    let other = app.token("other");

    let r = app
        .post("/projects", &owner, json!({"id": "p1", "name": "one", "visibility": "private"}))
        .await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", r.text);
    assert_eq!(r.headers["location"], "/projects/p1");
    assert_eq!(r.json()["members"], json!(["owner"]));
    assert_error(&app.post("/projects", &owner, json!({"id": "p1"})).await, StatusCode::CONFLICT);
    assert_error(&app.post("/projects", &owner, json!({"id": ""})).await, StatusCode::BAD_REQUEST);

    assert_error(&app.get("/projects/p1", &other).await, StatusCode::FORBIDDEN);
    assert_error(&app.put("/projects/p1", &other, json!({"name": "hijack"})).await, StatusCode::FORBIDDEN);
    assert_error(&app.delete("/projects/p1", &other).await, StatusCode::FORBIDDEN);
    assert_eq!(app.get("/projects", &other).await.total(), 0);

    let r = app
        .put(
            "/projects/p1",
            &owner,
            json!({"name": "renamed", "visibility": "private", "members": ["owner", "other"]}),
        )
        .await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text);
    assert_eq!(app.get("/projects/p1", &other).await.json()["name"], "renamed");
    assert_eq!(app.get("/projects", &other).await.total(), 1);

    assert_error(&app.get("/projects/nope", &owner).await, StatusCode::NOT_FOUND);
    assert_eq!(app.delete("/projects/p1", &owner).await.status, StatusCode::NO_CONTENT);
    assert_error(&app.get("/projects/p1", &owner).await, StatusCode::NOT_FOUND);
    let r = app.get("/projects/p1?deprecated=true", &owner).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json()["deprecated"], true);
    assert_error(&app.get("/projects/p1?deprecated=maybe", &owner).await, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn public_projects_are_readable_not_writable() {
    let app = App::new();
    app.seed("owner").await;
    let other = app.token("other");
    assert_eq!(app.get(&format!("{DS}/profiles"), &other).await.status, StatusCode::OK);
    assert_error(
        &app.post(&format!("{DS}/profiles"), &other, profile("1", [1; 7])).await,
        StatusCode::FORBIDDEN,
    );
    assert_error(
        &app.post(&format!("{DS}/inferences"), &other, json!({"algorithm": "goeburst"})).await,
        StatusCode::FORBIDDEN,
    );
}

#[tokio::test]
async fn datasets() {
    let app = App::new();
    app.seed("owner").await;
    let t = app.token("owner");
    let r = app.get(DS, &t).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json()["loci"], json!(common::LOCI));
    assert_error(
        &app.post("/projects/p1/datasets", &t, json!({"id": "d2", "schema": "missing"})).await,
        StatusCode::NOT_FOUND,
    );
    assert_error(
        &app.post("/projects/p1/datasets", &t, json!({"id": "d1", "schema": "mlst"})).await,
        StatusCode::CONFLICT,
    );
    let r = app.put(DS, &t, json!({"schema": "mlst", "description": "pneumo"})).await;
    assert_eq!(r.json()["description"], "pneumo", "{}", r.text);
    assert_eq!(app.delete(DS, &t).await.status, StatusCode::NO_CONTENT);
    assert_error(&app.get(DS, &t).await, StatusCode::NOT_FOUND);
    assert_error(&app.get(&format!("{DS}/profiles"), &t).await, StatusCode::NOT_FOUND);
    assert_eq!(app.get(&format!("{DS}?deprecated=true"), &t).await.status, StatusCode::OK);
}

#[tokio::test]
async fn profile_versions_and_validation() {
    let app = App::new();
    app.seed("owner").await;
    let t = app.token("owner");
    let url = format!("{DS}/profiles");

    let r = app.post(&url, &t, profile("7", [1, 2, 3, 4, 5, 6, 7])).await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", r.text);
    assert_eq!(r.headers["location"], format!("{url}/7"));
    let r = app.post(&url, &t, profile("7", [1, 2, 3, 4, 5, 6, 8])).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json()["version"], 2);

    let v1 = app.get(&format!("{url}/7?version=1"), &t).await.json();
    assert_eq!(v1["alleles"], profile("7", [1, 2, 3, 4, 5, 6, 7])["alleles"]);
    let cur = app.get(&format!("{url}/7"), &t).await.json();
    assert_eq!(cur["alleles"][6], "8");
    assert_eq!(cur["current_version"], 2);
    assert_error(&app.get(&format!("{url}/7?version=9"), &t).await, StatusCode::NOT_FOUND);
    assert_error(&app.get(&format!("{url}/7?version=x"), &t).await, StatusCode::BAD_REQUEST);
    assert_error(&app.get(&format!("{url}/missing"), &t).await, StatusCode::NOT_FOUND);

    let r = app.post(&url, &t, json!({"id": "8", "alleles": ["1", "2"]})).await;
    assert_error(&r, StatusCode::BAD_REQUEST);
    assert!(r.text.contains('7'), "error should name the expected count: {}", r.text);
    assert_error(&app.post(&url, &t, json!({"id": "8", "alleles": [true]})).await, StatusCode::BAD_REQUEST);

    let r = app.put(&format!("{url}/9"), &t, json!({"alleles": [1, 1, 1, 1, 1, 1, 1]})).await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", r.text);

    assert_eq!(app.delete(&format!("{url}/7"), &t).await.status, StatusCode::NO_CONTENT);
    assert_error(&app.get(&format!("{url}/7"), &t).await, StatusCode::NOT_FOUND);
    let old = app.get(&format!("{url}/7?version=1&deprecated=true"), &t).await;
    assert_eq!(old.status, StatusCode::OK);
    assert_eq!(old.json()["deprecated"], true);
}

#[tokio::test]
async fn pagination_partitions_the_set() {
    let app = App::new();
    app.seed("owner").await;
    let t = app.token("owner");
    let url = format!("{DS}/profiles");
    for i in 1..=5 {
        app.post(&url, &t, profile(&i.to_string(), [i; 7])).await;
    }
    let mut seen = Vec::new();
    let mut sizes = Vec::new();
    for page in 0..4 {
        let r = app.get(&format!("{url}?limit=2&page={page}"), &t).await;
        assert_eq!(r.status, StatusCode::OK);
        assert_eq!(r.total(), 5);
        let items = r.json().as_array().unwrap().clone();
        sizes.push(items.len());
        seen.extend(items.into_iter().map(|v| v["id"].as_str().unwrap().to_owned()));
    }
    assert_eq!(sizes, [2, 2, 1, 0]);
    assert_eq!(seen, ["1", "2", "3", "4", "5"]);

    let r = app.get(&format!("{url}?limit=5000"), &t).await;
    assert_eq!(r.headers["x-limit"], "1000");
    let r = app.get(&format!("{url}?limit=0"), &t).await;
    assert_eq!(r.headers["x-limit"], "1");
    assert_eq!(r.json().as_array().unwrap().len(), 1);
    assert_eq!(app.get(&url, &t).await.headers["x-limit"], "20");
    assert_error(&app.get(&format!("{url}?page=-1"), &t).await, StatusCode::BAD_REQUEST);
}

fn tsv(rows: impl IntoIterator<Item = String>) -> String {
    let mut out = format!("ST\t{}\n", common::LOCI.join("\t"));
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    out
}

#[tokio::test]
async fn import_export() {
    let app = App::new();
    app.seed("owner").await;
    let t = app.token("owner");

    let body = tsv((1..=100).map(|i| format!("{i}\t{}", vec![(i % 9 + 1).to_string(); 7].join("\t"))));
    let r = app.post_tsv(&format!("{DS}/profiles/import"), &t, body).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text);
    assert_eq!(r.json()["created"], 100);

    let exported = app.get(&format!("{DS}/profiles/export"), &t).await;
    assert!(exported.headers["content-type"].to_str().unwrap().starts_with("text/tab-separated-values"));
    app.post("/projects/p1/datasets", &t, json!({"id": "d2", "schema": "mlst"})).await;
    let r = app
        .post_tsv("/projects/p1/datasets/d2/profiles/import", &t, exported.text.clone())
        .await;
    assert_eq!(r.json()["created"], 100);
    let again = app.get("/projects/p1/datasets/d2/profiles/export", &t).await;
    assert_eq!(again.text, exported.text);

    let mut rows: Vec<String> = (200..210).map(|i| format!("{i}\t1\t2\t3\t4\t5\t6\t7")).collect();
    rows[4] = "204\t1\t2".into();
    let r = app.post_tsv(&format!("{DS}/profiles/import"), &t, tsv(rows)).await;
    let report = r.json();
    assert_eq!(report["created"], 9, "{report}");
    assert_eq!(report["errors"].as_array().unwrap().len(), 1);
    assert_eq!(report["errors"][0]["line"], 6);

    let r = app
        .post_tsv(&format!("{DS}/profiles/import"), &t, "ST\tfoo\n1\t2\n".into())
        .await;
    assert_error(&r, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn isolates() {
    let app = App::new();
    app.seed("owner").await;
    let t = app.token("owner");
    app.post(&format!("{DS}/profiles"), &t, profile("1", [1; 7])).await;
    let url = format!("{DS}/isolates");
    let r = app
        .post(&url, &t, json!({"id": "i1", "profile": "1", "ancillary": {"country": "PT"}}))
        .await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", r.text);
    assert_error(&app.post(&url, &t, json!({"id": "i2", "profile": "nope"})).await, StatusCode::NOT_FOUND);
    let r = app.put(&format!("{url}/i1"), &t, json!({"profile": "1", "ancillary": {"country": "ES"}})).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text);
    let v1 = app.get(&format!("{url}/i1?version=1"), &t).await.json();
    assert_eq!(v1["ancillary"]["country"], "PT");
    assert_eq!(app.get(&url, &t).await.total(), 1);
    let export = app.get(&format!("{url}/export"), &t).await;
    assert!(export.text.contains("ES"), "{}", export.text);
}

#[tokio::test]
async fn schemas_and_alleles_are_admin_writes() {
    let app = App::new();
    let admin = app.admin();
    let user = app.token("u1");
    let s = json!({"id": "s1", "taxon": "t", "loci": ["a", "b"]});
    assert_error(&app.post("/schemas", &user, s.clone()).await, StatusCode::FORBIDDEN);
    assert_eq!(app.post("/schemas", &admin, s).await.status, StatusCode::CREATED);
    assert_eq!(app.get("/schemas/s1", &user).await.json()["loci"], json!(["a", "b"]));
    assert_eq!(app.get("/schemas", &user).await.total(), 1);

    let url = "/taxa/t/loci/a/alleles";
    assert_error(&app.post(url, &user, json!({"id": "1"})).await, StatusCode::FORBIDDEN);
    let r = app.post(url, &admin, json!({"id": "1", "sequence": "ACGT"})).await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", r.text);
    assert_eq!(r.headers["location"], format!("{url}/1"));
    app.post(url, &admin, json!({"id": "1", "sequence": "ACGA"})).await;
    assert_eq!(app.get(&format!("{url}/1?version=1"), &user).await.json()["sequence"], "ACGT");
    assert_eq!(app.get(url, &user).await.total(), 1);
    assert_error(&app.delete(&format!("{url}/1"), &user).await, StatusCode::FORBIDDEN);
    assert_eq!(app.delete(&format!("{url}/1"), &admin).await.status, StatusCode::NO_CONTENT);
    assert_error(&app.get(&format!("{url}/1"), &user).await, StatusCode::NOT_FOUND);
}

async fn three_profiles(app: &App, t: &str) {
    for (id, a) in [("1", [1, 1, 1, 1, 1, 1, 1]), ("2", [1, 1, 1, 1, 1, 1, 2]), ("3", [1, 1, 1, 1, 1, 2, 2])] {
        app.post(&format!("{DS}/profiles"), t, profile(id, a)).await;
    }
}

#[tokio::test]
async fn inference_jobs() {
    let app = App::new();
    app.seed("owner").await;
    let t = app.token("owner");
    three_profiles(&app, &t).await;
    let url = format!("{DS}/inferences");

    let r = app
        .post(&url, &t, json!({"algorithm": "goeburst", "parameters": {"lvs": 3}, "id": "inf1"}))
        .await;
    assert_eq!(r.status, StatusCode::ACCEPTED, "{}", r.text);
    let body = r.json();
    assert_eq!(body["inference"], "inf1");
    let job = body["job"].as_str().unwrap().to_owned();
    assert_eq!(r.headers["location"], format!("/jobs/{job}"));

    assert_error(&app.get(&format!("{url}/inf1"), &t).await, StatusCode::NOT_FOUND);
    assert_eq!(app.get(&format!("/jobs/{job}"), &t).await.json()["status"], "queued");
    let dup = app.post(&url, &t, json!({"algorithm": "goeburst", "id": "inf1"})).await;
    assert_error(&dup, StatusCode::CONFLICT);

    app.drain().await;
    let j = app.get(&format!("/jobs/{job}"), &t).await.json();
    assert_eq!(j["status"], "succeeded", "{j}");
    let inf = app.get(&format!("{url}/inf1"), &t).await.json();
    assert_eq!(inf["edges"].as_array().unwrap().len(), 2, "{inf}");
    assert_eq!(app.get(&url, &t).await.total(), 1);

    // Resubmitting once the job is done overwrites.
    let r = app.post(&url, &t, json!({"algorithm": "goeburst", "id": "inf1"})).await;
    assert_eq!(r.status, StatusCode::ACCEPTED);
    app.drain().await;

    for bad in [
        json!({"algorithm": "nope"}),
        json!({"algorithm": "goeburst", "parameters": {"lvs": 0}}),
        json!({"algorithm": "goeburst", "parameters": {"lvs": "3"}}),
        json!({"algorithm": "goeburst", "parameters": {"bogus": 1}}),
        json!({"algorithm": "radial"}),
        json!({"algorithm": "goeburst", "extra": 1}),
    ] {
        assert_error(&app.post(&url, &t, bad).await, StatusCode::BAD_REQUEST);
    }
    assert_error(&app.get("/jobs/nope", &t).await, StatusCode::NOT_FOUND);
    assert_error(&app.get(&format!("{url}/nope"), &t).await, StatusCode::NOT_FOUND);

    let r = app.get("/algorithms", &t).await.json();
    let names: Vec<&str> = r.as_array().unwrap().iter().map(|a| a["name"].as_str().unwrap()).collect();
    assert!(names.contains(&"algorithms.inference.goeburst"), "{names:?}");
}

#[tokio::test]
async fn lvs_larger_than_loci_fails_the_job() {
    let app = App::new();
    app.seed("owner").await;
    let t = app.token("owner");
    three_profiles(&app, &t).await;
    let r = app
        .post(&format!("{DS}/inferences"), &t, json!({"algorithm": "goeburst", "parameters": {"lvs": 8}}))
        .await;
    let body = r.json();
    app.drain().await;
    let j = app.get(&format!("/jobs/{}", body["job"].as_str().unwrap()), &t).await.json();
    assert_eq!(j["status"], "failed", "{j}");
    assert!(j["error"].as_str().is_some());
}

#[tokio::test]
async fn visualizations() {
    let app = App::new();
    app.seed("owner").await;
    let t = app.token("owner");
    three_profiles(&app, &t).await;
    app.post(&format!("{DS}/inferences"), &t, json!({"algorithm": "goeburst", "id": "inf1"}))
        .await;
    app.drain().await;

    let url = format!("{DS}/inferences/inf1/visualizations");
    for id in ["v1", "v2"] {
        let r = app.post(&url, &t, json!({"algorithm": "radial", "id": id})).await;
        assert_eq!(r.status, StatusCode::ACCEPTED, "{}", r.text);
        assert_eq!(r.json()["visualization"], id);
    }
    app.drain().await;
    for id in ["v1", "v2"] {
        let v = app.get(&format!("{url}/{id}"), &t).await.json();
        let coords = v["coordinates"].as_array().unwrap();
        assert_eq!(coords.len(), 3, "{v}");
        let root = coords.iter().find(|c| c["x"] == 0.0 && c["y"] == 0.0);
        assert!(root.is_some(), "{v}");
    }
    assert_eq!(app.get(&url, &t).await.total(), 2);

    assert_error(
        &app.post(&format!("{DS}/inferences/zzz/visualizations"), &t, json!({"algorithm": "radial"})).await,
        StatusCode::NOT_FOUND,
    );
    assert_error(&app.post(&url, &t, json!({"algorithm": "nope"})).await, StatusCode::BAD_REQUEST);
    assert_error(&app.post(&url, &t, json!({"algorithm": "goeburst"})).await, StatusCode::BAD_REQUEST);
    assert_error(&app.get(&format!("{url}/v9"), &t).await, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn error_bodies_everywhere() {
    let app = App::new();
    let t = app.token("u1");
    assert_error(&app.get("/nowhere", &t).await, StatusCode::NOT_FOUND);
    assert_error(
        &app.send(Method::PATCH, "/projects", Some(&t), None).await,
        StatusCode::METHOD_NOT_ALLOWED,
    );
    let r = app
        .send(Method::POST, "/projects", Some(&t), Some(("application/json", "{not json".into())))
        .await;
    assert_error(&r, StatusCode::BAD_REQUEST);
    let r = app.post("/projects", &t, json!({"id": "p", "unknown": 1})).await;
    assert_error(&r, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn worker_completes_jobs_in_background() {
    let app = App::new();
    app.seed("owner").await;
    let t = app.token("owner");
    three_profiles(&app, &t).await;
    let worker = app.state.services.engine().start_worker(std::time::Duration::from_millis(5));
    let r = app
        .post(&format!("{DS}/inferences"), &t, json!({"algorithm": "goeburst", "id": "bg"}))
        .await;
    let job = r.json()["job"].as_str().unwrap().to_owned();
    let mut status = Value::Null;
    for _ in 0..400 {
        status = app.get(&format!("/jobs/{job}"), &t).await.json()["status"].clone();
        if status == "succeeded" {
            break;
        }
        tokio::time::sleep(std::time::Duration::from_millis(10)).await;
    }
    assert_eq!(status, "succeeded");
    tokio::task::spawn_blocking(move || worker.stop()).await.unwrap();
}
