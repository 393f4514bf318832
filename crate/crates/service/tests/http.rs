use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use latentscope_core::experiment::{
    generate_synthetic_stimuli, read_answer_log, Bounds, GridGeometry, ScoreReport, StimulusManifest,
    SynthConfig, MANIFEST_FILE,
};
use latentscope_service::store::{recover, LogEntry};
use latentscope_service::{Server, ServiceConfig};
use reqwest::{Client, StatusCode};
use serde_json::{json, Value};
use tokio::sync::oneshot;

struct Harness {
    _dir: tempfile::TempDir,
    root: PathBuf,
    base: String,
    client: Client,
    stop: Option<oneshot::Sender<()>>,
    task: Option<tokio::task::JoinHandle<()>>,
}

const KEY: &str = "secret";

fn geometry() -> GridGeometry {
    GridGeometry::new(Bounds::new(-2.0, 3.0, -1.0, 1.0).unwrap(), 5, 5).unwrap()
}

fn config(root: &Path, tasks: u32) -> ServiceConfig {
    let mut c = ServiceConfig::new(
        "127.0.0.1:0".parse().unwrap(),
        root.join("stim").join(MANIFEST_FILE),
        root.join("log.jsonl"),
        KEY,
    );
    c.tasks_per_session = tasks;
    c
}

impl Harness {
    async fn new(tasks: u32) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let synth = SynthConfig { resolution: 5, n_texts: 2, ..SynthConfig::default() };
        generate_synthetic_stimuli(root.join("stim"), &synth, Some(&geometry())).unwrap();
        let mut h = Harness { _dir: dir, root, base: String::new(), client: Client::new(), stop: None, task: None };
        h.start(tasks).await;
        h
    }

    async fn start(&mut self, tasks: u32) {
        let server = Server::bind(&config(&self.root, tasks)).await.unwrap();
        self.base = format!("http://{}", server.local_addr());
        let (tx, rx) = oneshot::channel();
        self.stop = Some(tx);
        self.task = Some(tokio::spawn(async move {
            server.run(async { rx.await.ok(); }).await.unwrap();
        }));
    }

    async fn restart(&mut self, tasks: u32) {
        self.stop.take().unwrap().send(()).unwrap();
        self.task.take().unwrap().await.unwrap();
        self.start(tasks).await;
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    async fn create(&self, variant: u8) -> String {
        let r = self.client.post(self.url("/sessions")).json(&json!({ "variant": variant })).send().await.unwrap();
        assert_eq!(r.status(), StatusCode::CREATED);
        let v: Value = r.json().await.unwrap();
        v["session_id"].as_str().unwrap().to_string()
    }

    async fn answer(&self, id: &str, task: u32, x: f64, y: f64) -> reqwest::Response {
        self.client
            .post(self.url(&format!("/sessions/{id}/answers")))
            .json(&json!({ "task_index": task, "x": x, "y": y, "duration_ms": 1500.0 }))
            .send()
            .await
            .unwrap()
    }

    async fn results(&self) -> ScoreReport {
        let r = self.client.get(self.url(&format!("/results?key={KEY}"))).send().await.unwrap();
        assert_eq!(r.status(), StatusCode::OK);
        r.json().await.unwrap()
    }

    fn log(&self) -> Vec<LogEntry> {
        recover(&self.root.join("log.jsonl")).unwrap().entries
    }

    fn plan(&self, id: &str) -> latentscope_service::session::SessionRecord {
        self.log()
            .into_iter()
            .find_map(|e| match e {
                LogEntry::Session(s) if s.session_id == id => Some(s),
                _ => None,
            })
            .unwrap()
    }
}

fn keys(v: &Value, out: &mut BTreeSet<String>) {
    match v {
        Value::Object(m) => {
            for (k, v) in m {
                out.insert(k.clone());
                keys(v, out);
            }
        }
        Value::Array(a) => a.iter().for_each(|v| keys(v, out)),
        _ => {}
    }
}

#[tokio::test]
async fn sessions_follow_their_variant() {
    let h = Harness::new(15).await;
    let a = h.create(1).await;
    let b = h.create(2).await;
    assert_ne!(a, b);
    assert!(a.len() >= 32);
    let p1 = h.plan(&a);
    assert_eq!(p1.tasks.len(), 15);
    assert!(p1.tasks.iter().all(|t| t.reference_text == t.space_text));
    assert!(h.plan(&b).tasks.iter().all(|t| t.reference_text != t.space_text));

    let bad = h.client.post(h.url("/sessions")).json(&json!({ "variant": 3 })).send().await.unwrap();
    assert!(bad.status().is_client_error());
    let bad = h.client.post(h.url("/sessions")).body("{").header("content-type", "application/json").send().await.unwrap();
    assert!(bad.status().is_client_error());
}

#[tokio::test]
async fn participant_responses_do_not_reveal_the_anchor() {
    let h = Harness::new(15).await;
    let mut shapes = BTreeSet::new();
    let mut shared = BTreeSet::new();
    for variant in [1, 2, 1, 2] {
        let r = h.client.post(h.url("/sessions")).json(&json!({ "variant": variant })).send().await.unwrap();
        let summary: Value = r.json().await.unwrap();
        let mut k = BTreeSet::new();
        keys(&summary, &mut k);
        assert!(k.iter().all(|k| !k.contains("anchor") && !k.contains("seed") && k != "tasks"), "{k:?}");
        let id = summary["session_id"].as_str().unwrap().to_string();
        let plan = h.plan(&id);
        for t in 1..=15u32 {
            let v: Value = h.client.get(h.url(&format!("/sessions/{id}/tasks/{t}"))).send().await.unwrap().json().await.unwrap();
            let mut k = BTreeSet::new();
            keys(&v, &mut k);
            assert!(!k.contains("true_anchor") && !k.contains("reference_text"));
            shapes.insert(k.into_iter().collect::<Vec<_>>());
            // everything except identity fields and the space text is the
            // same for every task, whatever its true anchor
            let mut rest = v.as_object().unwrap().clone();
            for f in ["session_id", "task_index", "reference_url", "space_text", "space_url_template", "variant"] {
                rest.remove(f);
            }
            shared.insert(serde_json::to_string(&rest).unwrap());
            assert_eq!(v["reference_url"], format!("/sessions/{id}/tasks/{t}/reference"));
            let anchor = plan.tasks[t as usize - 1].true_anchor;
            h.answer(&id, t, anchor.1 as f64, anchor.0 as f64).await;
            let ack: Value = h.answer(&id, t, 0.0, 0.0).await.json().await.unwrap();
            let mut k = BTreeSet::new();
            keys(&ack, &mut k);
            assert!(k.iter().all(|k| !k.contains("anchor")));
        }
    }
    assert_eq!(shapes.len(), 1);
    assert_eq!(shared.len(), 1);
}

#[tokio::test]
async fn tasks_are_served_in_order() {
    let h = Harness::new(15).await;
    let id = h.create(1).await;
    let get = |t: u32| h.client.get(h.url(&format!("/sessions/{id}/tasks/{t}"))).send();
    assert_eq!(get(1).await.unwrap().status(), StatusCode::OK);
    assert_eq!(get(2).await.unwrap().status(), StatusCode::CONFLICT);
    assert_eq!(get(0).await.unwrap().status(), StatusCode::NOT_FOUND);
    assert_eq!(get(16).await.unwrap().status(), StatusCode::NOT_FOUND);
    for t in 1..=5 {
        assert_eq!(h.answer(&id, t, 0.0, 0.0).await.status(), StatusCode::OK);
    }
    assert_eq!(get(7).await.unwrap().status(), StatusCode::CONFLICT);
    assert_eq!(get(3).await.unwrap().status(), StatusCode::CONFLICT);
    assert_eq!(get(6).await.unwrap().status(), StatusCode::OK);
    assert_eq!(h.answer(&id, 7, 0.0, 0.0).await.status(), StatusCode::CONFLICT);
    assert_eq!(h.answer(&id, 4, 0.0, 0.0).await.status(), StatusCode::CONFLICT);

    let r = h.client.get(h.url("/sessions/nope/tasks/1")).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::UNAUTHORIZED);
    assert_eq!(h.answer("nope", 1, 0.0, 0.0).await.status(), StatusCode::UNAUTHORIZED);

    let malformed = h.client.post(h.url(&format!("/sessions/{id}/answers"))).json(&json!({ "task_index": 6 })).send().await.unwrap();
    assert!(malformed.status().is_client_error());
    let negative = h.client
        .post(h.url(&format!("/sessions/{id}/answers")))
        .json(&json!({ "task_index": 6, "x": 0.0, "y": 0.0, "duration_ms": -1.0 }))
        .send()
        .await
        .unwrap();
    assert_eq!(negative.status(), StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn audio_is_passed_through() {
    let h = Harness::new(15).await;
    let manifest = StimulusManifest::load(h.root.join("stim").join(MANIFEST_FILE)).unwrap();
    let r = h.client.get(h.url("/audio/t0/0/0")).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    assert_eq!(r.headers()["content-type"], "audio/wav");
    let bytes = r.bytes().await.unwrap();
    assert_eq!(bytes.as_ref(), std::fs::read(manifest.resolve("t0", 0, 0).unwrap()).unwrap());
    for bad in ["/audio/t0/5/0", "/audio/t0/0/5", "/audio/t9/0/0"] {
        assert_eq!(h.client.get(h.url(bad)).send().await.unwrap().status(), StatusCode::NOT_FOUND, "{bad}");
    }
    assert!(h.client.get(h.url("/audio/t0/-1/0")).send().await.unwrap().status().is_client_error());
    assert_eq!(h.client.get(h.url("/healthz")).send().await.unwrap().status(), StatusCode::OK);
}

#[tokio::test]
async fn reference_audio_matches_the_true_anchor() {
    let h = Harness::new(15).await;
    let manifest = StimulusManifest::load(h.root.join("stim").join(MANIFEST_FILE)).unwrap();
    let g = geometry();
    for variant in [1, 2] {
        let id = h.create(variant).await;
        let plan = h.plan(&id);
        for t in 1..=15u32 {
            let task = &plan.tasks[t as usize - 1];
            let bytes = h.client.get(h.url(&format!("/sessions/{id}/tasks/{t}/reference"))).send().await.unwrap().bytes().await.unwrap();
            let (xi, yi) = g.nearest_lattice(g.anchor(task.true_anchor.0, task.true_anchor.1));
            let want = std::fs::read(manifest.resolve(&task.reference_text, xi, yi).unwrap()).unwrap();
            assert_eq!(bytes.as_ref(), want);
            h.answer(&id, t, 0.0, 0.0).await;
        }
        let after = h.client.get(h.url(&format!("/sessions/{id}/tasks/3/reference"))).send().await.unwrap();
        assert_eq!(after.status(), StatusCode::CONFLICT);
    }
}

#[tokio::test]
async fn results_count_every_answer() {
    let h = Harness::new(15).await;
    let g = geometry();
    let mut remaining = 488;
    while remaining > 0 {
        let id = h.create(1).await;
        let plan = h.plan(&id);
        for t in 1..=15u32.min(remaining) {
            let (r, c) = plan.tasks[t as usize - 1].true_anchor;
            let [x, y] = g.anchor(r, c);
            assert_eq!(h.answer(&id, t, x, y).await.status(), StatusCode::OK);
            remaining -= 1;
        }
    }
    let unauthorized = h.client.get(h.url("/results?key=wrong")).send().await.unwrap();
    assert_eq!(unauthorized.status(), StatusCode::UNAUTHORIZED);
    let report = h.results().await;
    assert_eq!(report.variants.len(), 1);
    assert_eq!(report.variants[0].distances.n, 488);
    assert_eq!(report.overall.mean, 0.0);
}

#[tokio::test]
async fn resubmission_is_last_write_wins() {
    let h = Harness::new(15).await;
    let id = h.create(1).await;
    let g = geometry();
    let (r, c) = h.plan(&id).tasks[0].true_anchor;
    let [x, y] = g.anchor(r, c);
    h.answer(&id, 1, x + 10.0, y).await;
    let ack: Value = h.answer(&id, 1, x, y).await.json().await.unwrap();
    assert_eq!(ack["completed"], 1);
    assert_eq!(read_answer_log(h.root.join("log.jsonl")).unwrap().len(), 2);
    let report = h.results().await;
    assert_eq!(report.overall.n, 1);
    assert_eq!(report.overall.mean, 0.0);
    // clicks outside the rectangle are clamped but kept raw in the log
    let log = read_answer_log(h.root.join("log.jsonl")).unwrap();
    assert_eq!(log[0].clicked[0], g.bounds.x_max);
    assert_eq!(log[0].clicked_raw[0], x + 10.0);
}

#[tokio::test]
async fn state_survives_a_restart() {
    let mut h = Harness::new(15).await;
    let id = h.create(2).await;
    for t in 1..=4 {
        h.answer(&id, t, 0.0, 0.0).await;
    }
    h.restart(15).await;
    let status = |t: u32| {
        let url = h.url(&format!("/sessions/{id}/tasks/{t}"));
        let c = h.client.clone();
        async move { c.get(url).send().await.unwrap().status() }
    };
    assert_eq!(status(4).await, StatusCode::CONFLICT);
    assert_eq!(status(5).await, StatusCode::OK);
    assert_eq!(h.answer(&id, 5, 0.0, 0.0).await.status(), StatusCode::OK);
    let other = h.create(2).await;
    assert_ne!(h.plan(&other).seed, h.plan(&id).seed);
    assert_eq!(h.results().await.overall.n, 5);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 8)]
async fn parallel_writers_lose_nothing() {
    let h = Harness::new(100).await;
    let mut ids = Vec::new();
    for i in 0..100 {
        ids.push(h.create(1 + (i % 2) as u8).await);
    }
    let mut joins = Vec::new();
    for id in ids {
        let client = h.client.clone();
        let url = h.url(&format!("/sessions/{id}/answers"));
        joins.push(tokio::spawn(async move {
            for t in 1..=100u32 {
                let r = client
                    .post(&url)
                    .json(&json!({ "task_index": t, "x": 0.1, "y": 0.2, "duration_ms": t as f64 }))
                    .send()
                    .await
                    .unwrap();
                assert_eq!(r.status(), StatusCode::OK);
            }
        }));
    }
    for j in joins {
        j.await.unwrap();
    }
    let log = read_answer_log(h.root.join("log.jsonl")).unwrap();
    assert_eq!(log.len(), 10_000);
    let distinct: BTreeSet<_> = log.iter().map(|a| (a.session_id.clone(), a.task_index)).collect();
    assert_eq!(distinct.len(), 10_000);
    let report = h.results().await;
    assert_eq!(report.overall.n, 10_000);
    assert_eq!(report.variants.iter().map(|v| v.distances.n).sum::<usize>(), 10_000);
}
