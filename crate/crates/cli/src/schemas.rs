//! JSON schemas of every API response, written under `schemas/`.

use std::path::Path;

use roleseer_core::metrics::OverviewStats;
use roleseer_core::query::{FlowDetail, LassoRequest, LassoResult, PlayerMetrics, PlayerStoryline, SnapshotsView};
use roleseer_core::roles::RoleCluster;
use schemars::schema::RootSchema;
use schemars::schema_for;

use crate::service::ErrorBody;

pub const SCHEMA_VERSION: &str = "1";

/// `(file stem, schema)` for each payload.
pub fn all() -> Vec<(&'static str, RootSchema)> {
    vec![
        ("overview", schema_for!(OverviewStats)),
        ("snapshots", schema_for!(SnapshotsView)),
        ("role", schema_for!(RoleCluster)),
        ("flow", schema_for!(FlowDetail)),
        ("lasso_request", schema_for!(LassoRequest)),
        ("lasso", schema_for!(LassoResult)),
        ("storyline", schema_for!(PlayerStoryline)),
        ("player_metrics", schema_for!(PlayerMetrics)),
        ("error", schema_for!(ErrorBody)),
    ]
}

pub fn schema_value(name: &str) -> Option<serde_json::Value> {
    let (_, s) = all().into_iter().find(|(n, _)| *n == name)?;
    Some(serde_json::to_value(s).expect("schema serializes"))
}

/// Writes `v<version>/<name>.schema.json` files under `dir`.
pub fn write_all(dir: &Path) -> anyhow::Result<Vec<std::path::PathBuf>> {
    let dir = dir.join(format!("v{SCHEMA_VERSION}"));
    std::fs::create_dir_all(&dir)?;
    let mut out = Vec::new();
    for (name, s) in all() {
        let p = dir.join(format!("{name}.schema.json"));
        let mut text = serde_json::to_string_pretty(&s)?;
        text.push('\n');
        std::fs::write(&p, text)?;
        out.push(p);
    }
    Ok(out)
}
