use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use roleseer_core::pipeline::{self, PipelineConfig, StageOutcome};
use roleseer_core::store::Store;
use roleseer_core::synth::{generate, write_output, Scenario};

#[derive(Debug, Parser)]
#[command(name = "roleseer", version, about = "Role detection and transition analysis over game interaction logs")]
pub struct Cli {
    /// Artifact store directory.
    #[arg(long, global = true, env = "ROLESEER_STORE", default_value = "store")]
    pub store: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

/// Settings that override the configuration stored at ingest.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    #[arg(long)]
    pub window_hours: Option<f64>,
    #[arg(long)]
    pub snapshot_size: Option<usize>,
    #[arg(long)]
    pub dims: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub tau: Option<f64>,
    /// JSON file with a full pipeline configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl ConfigArgs {
    /// Stored configuration (or a file, or defaults) with the flags applied.
    pub fn resolve(&self, store: &Store) -> anyhow::Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => serde_json::from_slice(&std::fs::read(p).with_context(|| format!("reading {}", p.display()))?)?,
            None => pipeline::stored_config(store)?.unwrap_or_default(),
        };
        if let Some(v) = self.window_hours {
            cfg.window_hours = v;
        }
        if let Some(v) = self.snapshot_size {
            cfg.snapshot_size = v;
        }
        if let Some(v) = self.dims {
            cfg.dims = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.tau {
            cfg.tau = v;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse logs into timestamp graphs and snapshots.
    Ingest {
        /// Event log, JSONL or CSV.
        events: PathBuf,
        /// Status log, JSONL or CSV.
        #[arg(long)]
        status: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Node metrics per timestamp.
    Metrics(StageArgs),
    /// Node embeddings per timestamp.
    Embed(StageArgs),
    /// Align consecutive embedding spaces.
    Align(StageArgs),
    /// Cluster roles, match identities, compute flows.
    Roles(StageArgs),
    /// Clustering quality and temporal diversity reports.
    Eval(StageArgs),
    /// Every stage from ingest to eval.
    Run {
        events: PathBuf,
        #[arg(long)]
        status: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Generate a synthetic log with planted roles.
    Synth {
        #[arg(long)]
        players: Option<usize>,
        #[arg(long)]
        days: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Scenario JSON; flags override its fields.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the API's JSON schemas.
    Schemas {
        #[arg(long, default_value = "schemas")]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Args)]
pub struct StageArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
}

fn report(outcomes: &[StageOutcome]) {
    for o in outcomes {
        let state = if o.cached { "cached" } else { "done" };
        println!("{:<8} {state:<6} {}", o.stage, &o.hash[..12]);
    }
}

pub fn synth_scenario(players: Option<usize>, days: Option<f64>, seed: Option<u64>, file: Option<&std::path::Path>) -> anyhow::Result<Scenario> {
    let mut s = match file {
        Some(p) => serde_json::from_slice(&std::fs::read(p).with_context(|| format!("reading {}", p.display()))?)?,
        None => {
            let n = players.unwrap_or(100);
            let timestamps = (days.unwrap_or(1.5) * 24.0 / 6.0).ceil() as usize;
            Scenario::planted(n, timestamps.max(1), 20, seed.unwrap_or(0))
        }
    };
    if let Some(n) = players {
        s.player_count = n;
    }
    if let Some(d) = days {
        s.duration_days = d;
    }
    if let Some(v) = seed {
        s.seed = v;
    }
    Ok(s)
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let store = Store::new(&cli.store);
    match cli.command {
        Command::Ingest { events, status, config } => {
            let cfg = config.resolve(&store)?;
            report(&[pipeline::run_ingest(&store, &events, status.as_deref(), &cfg)?]);
        }
        Command::Metrics(a) => report(&[pipeline::run_metrics(&store, &a.config.resolve(&store)?)?]),
        Command::Embed(a) => report(&[pipeline::run_embed(&store, &a.config.resolve(&store)?)?]),
        Command::Align(a) => report(&[pipeline::run_align(&store, &a.config.resolve(&store)?)?]),
        Command::Roles(a) => report(&[pipeline::run_roles(&store, &a.config.resolve(&store)?)?]),
        Command::Eval(a) => report(&[pipeline::run_eval(&store, &a.config.resolve(&store)?)?]),
        Command::Run { events, status, config } => {
            let cfg = config.resolve(&store)?;
            report(&pipeline::run_all(&store, &events, status.as_deref(), &cfg)?);
        }
        Command::Serve { port, host } => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(crate::service::serve(&store, &host, port))?;
        }
        Command::Synth {
            players,
            days,
            seed,
            scenario,
            out,
        } => {
            let s = synth_scenario(players, days, seed, scenario.as_deref())?;
            let o = generate(&s)?;
            write_output(&o, &out)?;
            println!("{} events, {} status records, {} timestamps -> {}", o.events.len(), o.status.len(), s.timestamp_count(), out.display());
        }
        Command::Schemas { out } => {
            for p in crate::schemas::write_all(&out)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}
