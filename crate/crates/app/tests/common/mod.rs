#![allow(dead_code)]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use bundlerec::corpus::{synth_corpus, FoldSplit, SynthConfig};
use bundlerec::graphfeat::WalkConfig;
use bundlerec::hin::LdaConfig;
use bundlerec::recmodel::{train_recommender, FeatureContext, PipelineConfig, Strategy, TrainConfig, Variant};
use bundlerec::textfeat::InceptionConfig;
use bundlerec_app::service::Engine;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

pub fn small_pipeline() -> PipelineConfig {
    PipelineConfig {
        inception: InceptionConfig { seq_len: 12, embed_dim: 6, windows: vec![2, 3], channels: 4, out_dim: 6 },
        walk: WalkConfig { dim: 8, walks_per_node: 4, epochs: 2, ..WalkConfig::default() },
        lda: LdaConfig { k: 5, iterations: 30, ..LdaConfig::default() },
        k_neighbors: 5,
        normalize_vm: false,
    }
}

pub fn small_corpus() -> SynthConfig {
    SynthConfig { n_mashups: 40, n_services: 16, vocab_size: 80, n_tags: 8, n_providers: 4, seed: 5 }
}

/// A briefly trained full-data model over a small synthetic corpus.
pub fn engine(variant: Variant, strategy: Strategy, top_n: usize) -> Engine {
    let repo = Arc::new(synth_corpus(&small_corpus()).unwrap().repository);
    let fold = FoldSplit::full(&repo);
    let ctx = FeatureContext::build(repo, &fold, &small_pipeline(), 1).unwrap();
    let cfg = TrainConfig { epochs: 2, lr: 3e-3, ..TrainConfig::default() };
    let rec = train_recommender(&ctx, variant, strategy, &cfg, 2).unwrap();
    Engine::new(ctx, rec, top_n).unwrap()
}

pub async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

pub async fn call_raw(app: &Router, uri: &str, body: &str) -> (StatusCode, Value) {
    let req = Request::builder()
        .method("POST")
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

pub fn ids(view: &Value) -> Vec<String> {
    view["recommendations"].as_array().unwrap().iter().map(|r| r["service_id"].as_str().unwrap().to_string()).collect()
}
