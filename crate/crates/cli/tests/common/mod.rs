//! Request plumbing and independent checks shared by the API tests and the
//! acceptance run.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use http_body_util::BodyExt;
use roleseer_cli::schemas;
use roleseer_cli::service::{router, AppState};
use roleseer_core::roles::SnapshotRoles;
use serde_json::Value;
use tower::ServiceExt;

pub async fn call(state: &Arc<AppState>, method: Method, uri: &str, body: Option<&str>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map(|b| Body::from(b.to_owned())).unwrap_or_else(Body::empty))
        .unwrap();
    let resp = router(state.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

pub async fn get(state: &Arc<AppState>, uri: &str) -> (StatusCode, Value) {
    call(state, Method::GET, uri, None).await
}

pub fn schema_errors(schema: &str, v: &Value) -> Vec<String> {
    let s = schemas::schema_value(schema).unwrap();
    let validator = jsonschema::validator_for(&s).unwrap();
    validator.iter_errors(v).map(|e| format!("{schema}: {e} at {}", e.instance_path())).collect()
}

/// Each player's cluster at their last clustered timestamp of the snapshot.
fn last_roles(s: &SnapshotRoles) -> BTreeMap<String, u64> {
    let mut m: BTreeMap<String, (usize, u64)> = BTreeMap::new();
    for p in &s.points {
        let e = m.entry(p.player.clone()).or_insert((p.timestamp, p.cluster as u64));
        if p.timestamp >= e.0 {
            *e = (p.timestamp, p.cluster as u64);
        }
    }
    m.into_iter().map(|(k, v)| (k, v.1)).collect()
}

/// Recounts transition flows from the role assignments and compares them
/// with the served ones. Returns one line per disagreement.
pub fn flow_recount_errors(roles: &[SnapshotRoles], flows: &[Value]) -> Vec<String> {
    let mut errors = Vec::new();
    let mut expected: BTreeMap<(u64, u64, u64), BTreeSet<String>> = BTreeMap::new();
    let last: Vec<_> = roles.iter().map(last_roles).collect();
    for (s, w) in last.windows(2).enumerate() {
        for (p, ca) in &w[0] {
            if let Some(cb) = w[1].get(p) {
                expected.entry((s as u64, *ca, *cb)).or_default().insert(p.clone());
            }
        }
    }
    if flows.len() != expected.len() {
        errors.push(format!("{} flows served, {} recounted", flows.len(), expected.len()));
    }
    let mut out_ratio: BTreeMap<(u64, u64), f64> = BTreeMap::new();
    for f in flows {
        let s = f["from"]["snapshot"].as_u64().unwrap();
        let key = (s, f["from"]["cluster"].as_u64().unwrap(), f["to"]["cluster"].as_u64().unwrap());
        let players: BTreeSet<String> = f["players"].as_array().unwrap().iter().map(|p| p.as_str().unwrap().to_owned()).collect();
        if expected.get(&key) != Some(&players) {
            errors.push(format!("flow {} players differ from recount", f["id"]));
        }
        if f["size"].as_u64() != Some(players.len() as u64) {
            errors.push(format!("flow {} size {} but {} players", f["id"], f["size"], players.len()));
        }
        *out_ratio.entry((key.0, key.1)).or_default() += f["ratio"].as_f64().unwrap();
    }
    // outgoing shares of a role add up to the share of its players seen again
    for ((s, c), total) in out_ratio {
        let (a, b) = (&last[s as usize], &last[s as usize + 1]);
        let members = a.values().filter(|&&x| x == c).count();
        let stayed = a.iter().filter(|(p, &x)| x == c && b.contains_key(*p)).count();
        let want = stayed as f64 / members as f64;
        if (total - want).abs() > 1e-9 {
            errors.push(format!("role {s}:{c} outgoing ratios sum to {total}, recount {want}"));
        }
    }
    errors
}
