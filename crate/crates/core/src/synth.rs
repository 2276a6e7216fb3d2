//! Synthetic interaction logs with planted roles.
//!
//! Players are split into communities. Each player follows a per-snapshot
//! script of archetypes; pair event counts per window are Poisson with a
//! rate set by the two players' archetypes and communities.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand::distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Poisson};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{write_events, EventType, InteractionEvent, PlayerId, StatusRecord};
use crate::seed::stage_seed;

/// Window-aligned start of every generated log.
pub const SYNTH_EPOCH: i64 = 1_600_020_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Archetype {
    /// Interacts with most of its community.
    Hub,
    /// Links its own community with the next one.
    Bridge,
    /// Sparse ties inside its community.
    Periphery,
    /// Online, solo activity only.
    Isolate,
    /// Emits nothing.
    Offline,
}

impl Archetype {
    pub const ALL: [Archetype; 5] = [Archetype::Hub, Archetype::Bridge, Archetype::Periphery, Archetype::Isolate, Archetype::Offline];

    pub fn as_str(self) -> &'static str {
        match self {
            Archetype::Hub => "hub",
            Archetype::Bridge => "bridge",
            Archetype::Periphery => "periphery",
            Archetype::Isolate => "isolate",
            Archetype::Offline => "offline",
        }
    }

    fn social(self) -> bool {
        matches!(self, Archetype::Hub | Archetype::Bridge | Archetype::Periphery)
    }
}

/// Event rates per hour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct Rates {
    /// Pair rate when either player is the community's hub.
    pub hub: f64,
    /// Pair rate between a bridge and either community it links.
    pub bridge: f64,
    pub periphery: f64,
    /// Pair rate across unrelated communities.
    pub inter: f64,
    /// Solo events per online player.
    pub solo: f64,
}

impl Default for Rates {
    fn default() -> Self {
        Rates {
            hub: 0.5,
            bridge: 0.06,
            periphery: 0.01,
            inter: 0.0,
            solo: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Script {
    pub player: usize,
    /// Archetype per snapshot; the last entry holds for the remainder.
    pub roles: Vec<Archetype>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct Scenario {
    pub player_count: usize,
    pub duration_days: f64,
    pub seed: u64,
    pub window_hours: f64,
    pub snapshot_size: usize,
    /// Community sizes; players are assigned in order. Empty means one
    /// community holding everybody.
    pub communities: Vec<usize>,
    pub rates: Rates,
    /// Archetype of players without a script.
    pub default_role: Archetype,
    pub scripts: Vec<Script>,
    /// Pair event mix per archetype; missing entries use the built-in mix.
    pub mix: BTreeMap<Archetype, Vec<(EventType, f64)>>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            player_count: 100,
            duration_days: 1.5,
            seed: 0,
            window_hours: 6.0,
            snapshot_size: 3,
            communities: Vec::new(),
            rates: Rates::default(),
            default_role: Archetype::Periphery,
            scripts: Vec::new(),
            mix: BTreeMap::new(),
        }
    }
}

fn default_mix(role: Archetype) -> Vec<(EventType, f64)> {
    use EventType::*;
    match role {
        Archetype::Hub => vec![(Chatting, 0.3), (Battle, 0.2), (Task, 0.2), (Fighting, 0.2), (Carbon, 0.1)],
        Archetype::Bridge => vec![(Chatting, 0.4), (UsingProps, 0.2), (Task, 0.2), (Battle, 0.2)],
        _ => vec![(Chatting, 0.4), (KillingMonster, 0.3), (Fighting, 0.2), (KillingPlayer, 0.1)],
    }
}

pub fn player_name(i: usize) -> PlayerId {
    format!("p{i:04}")
}

impl Scenario {
    /// Communities of `community_size` with one hub each, a bridge in every
    /// third community and every tenth player isolated.
    pub fn planted(player_count: usize, timestamps: usize, community_size: usize, seed: u64) -> Scenario {
        let window_hours = 6.0;
        let sizes = community_sizes(player_count, community_size);
        let mut scripts = Vec::new();
        let mut start = 0;
        for (c, &size) in sizes.iter().enumerate() {
            for k in 0..size {
                let role = match k {
                    0 => Archetype::Hub,
                    1 if c % 3 == 2 => Archetype::Bridge,
                    _ if k % 10 == 9 => Archetype::Isolate,
                    _ => continue,
                };
                scripts.push(Script {
                    player: start + k,
                    roles: vec![role],
                });
            }
            start += size;
        }
        Scenario {
            player_count,
            duration_days: timestamps as f64 * window_hours / 24.0,
            seed,
            window_hours,
            communities: sizes,
            scripts,
            ..Scenario::default()
        }
    }

    pub fn window_secs(&self) -> i64 {
        (self.window_hours * 3600.0).round() as i64
    }

    pub fn timestamp_count(&self) -> usize {
        (self.duration_days * 24.0 / self.window_hours).ceil() as usize
    }

    pub fn snapshot_count(&self) -> usize {
        self.timestamp_count().div_ceil(self.snapshot_size.max(1))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.window_hours > 0.0) || !(self.duration_days > 0.0) || self.snapshot_size == 0 {
            return Err(Error::invalid("window_hours, duration_days and snapshot_size must be positive"));
        }
        let r = &self.rates;
        if [r.hub, r.bridge, r.periphery, r.inter, r.solo].iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(Error::invalid("rates must be finite and non-negative"));
        }
        if !self.communities.is_empty() && self.communities.iter().sum::<usize>() != self.player_count {
            return Err(Error::invalid("community sizes must sum to player_count"));
        }
        for s in &self.scripts {
            if s.player >= self.player_count || s.roles.is_empty() {
                return Err(Error::invalid(format!("bad script for player {}", s.player)));
            }
        }
        for (role, mix) in &self.mix {
            if mix.is_empty() || mix.iter().any(|(_, w)| !(*w >= 0.0)) || mix.iter().all(|(_, w)| *w == 0.0) {
                return Err(Error::invalid(format!("bad event mix for {}", role.as_str())));
            }
        }
        Ok(())
    }

    /// Community index of every player.
    pub fn community_of(&self) -> Vec<usize> {
        if self.communities.is_empty() {
            return vec![0; self.player_count];
        }
        self.communities.iter().enumerate().flat_map(|(c, &n)| std::iter::repeat_n(c, n)).collect()
    }

    /// Archetype of every player per snapshot.
    pub fn role_table(&self) -> Vec<Vec<Archetype>> {
        let snaps = self.snapshot_count();
        let mut table = vec![vec![self.default_role; snaps]; self.player_count];
        for s in &self.scripts {
            for (k, slot) in table[s.player].iter_mut().enumerate() {
                *slot = s.roles[k.min(s.roles.len() - 1)];
            }
        }
        table
    }

    fn pair_rate(&self, a: (Archetype, usize), b: (Archetype, usize), n_comm: usize) -> f64 {
        if !a.0.social() || !b.0.social() {
            return 0.0;
        }
        let r = &self.rates;
        if a.1 == b.1 {
            if a.0 == Archetype::Hub || b.0 == Archetype::Hub {
                r.hub
            } else if a.0 == Archetype::Bridge || b.0 == Archetype::Bridge {
                r.bridge
            } else {
                r.periphery
            }
        } else {
            let linked = |x: (Archetype, usize), y: (Archetype, usize)| x.0 == Archetype::Bridge && (x.1 + 1) % n_comm == y.1;
            if linked(a, b) || linked(b, a) {
                r.bridge
            } else {
                r.inter
            }
        }
    }
}

/// Splits `n` into groups of `size`, folding a short remainder into the last.
pub fn community_sizes(n: usize, size: usize) -> Vec<usize> {
    let size = size.max(1);
    let mut out = vec![size; n / size];
    let rest = n % size;
    match out.last_mut() {
        Some(last) if rest < size / 2 => *last += rest,
        _ if rest > 0 => out.push(rest),
        _ => {}
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct PlantedTransition {
    pub player: PlayerId,
    /// Snapshot at which the new archetype starts.
    pub snapshot: usize,
    pub from: Archetype,
    pub to: Archetype,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Truth {
    pub origin: i64,
    pub window_hours: f64,
    pub snapshot_size: usize,
    pub timestamp_count: usize,
    pub communities: BTreeMap<PlayerId, usize>,
    /// Archetype per player per timestamp.
    pub roles: BTreeMap<PlayerId, Vec<Archetype>>,
    pub transitions: Vec<PlantedTransition>,
}

impl Truth {
    pub fn role_at(&self, player: &str, timestamp: usize) -> Option<Archetype> {
        self.roles.get(player).and_then(|r| r.get(timestamp)).copied()
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub events: Vec<InteractionEvent>,
    pub status: Vec<StatusRecord>,
    pub truth: Truth,
}

fn sample_time<R: Rng>(rng: &mut R, start: i64, len: i64) -> i64 {
    start + rng.random_range(0..len)
}

/// Generates the event log, status samples and ground truth.
pub fn generate(scenario: &Scenario) -> Result<SynthOutput> {
    scenario.validate()?;
    let n = scenario.player_count;
    let names: Vec<PlayerId> = (0..n).map(player_name).collect();
    let community = scenario.community_of();
    let n_comm = community.iter().max().map_or(1, |m| m + 1);
    let roles = scenario.role_table();
    let win = scenario.window_secs();
    let hours = scenario.window_hours;
    let mixes: BTreeMap<Archetype, (Vec<EventType>, WeightedIndex<f64>)> = Archetype::ALL
        .iter()
        .map(|&a| {
            let mix = scenario.mix.get(&a).cloned().unwrap_or_else(|| default_mix(a));
            let types = mix.iter().map(|m| m.0).collect();
            let dist = WeightedIndex::new(mix.iter().map(|m| m.1)).expect("validated mix");
            (a, (types, dist))
        })
        .collect();

    // pairs that can ever interact, by community membership and bridges
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_comm];
    for (i, &c) in community.iter().enumerate() {
        members[c].push(i);
    }

    let mut events = Vec::new();
    let mut status = Vec::new();
    let timestamps = scenario.timestamp_count();
    for t in 0..timestamps {
        let snap = t / scenario.snapshot_size;
        let start = SYNTH_EPOCH + t as i64 * win;
        let mut rng = ChaCha8Rng::seed_from_u64(stage_seed(scenario.seed, "synth", t as u64));
        let role = |i: usize| roles[i][snap];

        for i in 0..n {
            if role(i) == Archetype::Offline {
                continue;
            }
            // one guaranteed solo event keeps every online player visible
            let solo = 1 + Poisson::new(scenario.rates.solo * hours).map_or(0, |p| p.sample(&mut rng) as usize);
            for _ in 0..solo {
                let ty = *[EventType::KillingMonster, EventType::Task].choose(&mut rng).expect("non-empty");
                let mut e = InteractionEvent::new(sample_time(&mut rng, start, win), &names[i], None, ty);
                if ty == EventType::Task {
                    e.value = Some(rng.random_range(1..=50) as f64);
                }
                events.push(e);
            }
            status.push(StatusRecord {
                ts: start,
                player: names[i].clone(),
                cash: (1000.0 * (1.0 + rng.random::<f64>())).round(),
                grade: (10 + i % 50 + t) as f64,
                combat: (100.0 * (1.0 + rng.random::<f64>())).round(),
            });
        }

        for i in 0..n {
            for j in i + 1..n {
                let rate = scenario.pair_rate((role(i), community[i]), (role(j), community[j]), n_comm);
                if rate <= 0.0 {
                    continue;
                }
                let k = Poisson::new(rate * hours).map_or(0, |p| p.sample(&mut rng) as usize);
                for _ in 0..k {
                    let (a, b) = if rng.random::<bool>() { (i, j) } else { (j, i) };
                    let (types, dist) = &mixes[&role(a)];
                    let ty = types[dist.sample(&mut rng)];
                    let mut e = InteractionEvent::new(sample_time(&mut rng, start, win), &names[a], Some(&names[b]), ty);
                    if matches!(ty, EventType::Task | EventType::UsingProps | EventType::Carbon) {
                        e.value = Some(rng.random_range(1..=50) as f64);
                    }
                    events.push(e);
                }
            }
        }
    }
    events.sort_by(|a, b| (a.occurred_at, &a.actor, &a.target).cmp(&(b.occurred_at, &b.actor, &b.target)));

    let mut transitions = Vec::new();
    for (i, r) in roles.iter().enumerate() {
        for s in 1..r.len() {
            if r[s] != r[s - 1] {
                transitions.push(PlantedTransition {
                    player: names[i].clone(),
                    snapshot: s,
                    from: r[s - 1],
                    to: r[s],
                });
            }
        }
    }
    let truth = Truth {
        origin: SYNTH_EPOCH,
        window_hours: hours,
        snapshot_size: scenario.snapshot_size,
        timestamp_count: timestamps,
        communities: names.iter().cloned().zip(community.iter().copied()).collect(),
        roles: names
            .iter()
            .zip(&roles)
            .map(|(p, r)| (p.clone(), (0..timestamps).map(|t| r[t / scenario.snapshot_size]).collect()))
            .collect(),
        transitions,
    };
    Ok(SynthOutput { events, status, truth })
}

/// Writes `events.jsonl`, `status.jsonl` and `truth.json` into `dir`.
pub fn write_output(out: &SynthOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("events.jsonl"))?);
    write_events(&mut f, &out.events)?;
    f.flush()?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("status.jsonl"))?);
    for s in &out.status {
        serde_json::to_writer(&mut f, s)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    std::fs::write(dir.join("truth.json"), serde_json::to_vec_pretty(&out.truth)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::build_timestamp_graphs;

    #[test]
    fn isolates_have_no_edges() {
        let s = Scenario {
            player_count: 15,
            default_role: Archetype::Isolate,
            ..Scenario::default()
        };
        let out = generate(&s).unwrap();
        assert!(out.events.iter().all(|e| e.target.is_none()));
        let graphs = build_timestamp_graphs(&out.events, 6.0).unwrap();
        assert_eq!(graphs.len(), s.timestamp_count());
        assert!(graphs.iter().all(|g| g.edge_count() == 0 && g.node_count() == 15));
    }

    #[test]
    fn seeded_output_identical() {
        let s = Scenario::planted(60, 3, 20, 7);
        let a = generate(&s).unwrap();
        let b = generate(&s).unwrap();
        assert_eq!(a.events, b.events);
        assert_eq!(a.truth, b.truth);
    }

    #[test]
    fn community_split() {
        assert_eq!(community_sizes(50, 20), vec![20, 20, 10]);
        assert_eq!(community_sizes(45, 20), vec![20, 25]);
        assert_eq!(community_sizes(40, 20), vec![20, 20]);
        assert_eq!(community_sizes(5, 20), vec![5]);
    }

    #[test]
    fn scripts_cover_duration() {
        let mut s = Scenario::planted(40, 6, 20, 1);
        s.scripts.push(Script {
            player: 3,
            roles: vec![Archetype::Periphery, Archetype::Hub],
        });
        let out = generate(&s).unwrap();
        let r = &out.truth.roles["p0003"];
        assert_eq!(r.len(), 6);
        assert_eq!(r[2], Archetype::Periphery);
        assert_eq!(r[3], Archetype::Hub);
        assert_eq!(out.truth.transitions.len(), 1);
    }

    #[test]
    fn invalid_rates_rejected() {
        let mut s = Scenario::default();
        s.rates.hub = -1.0;
        assert!(generate(&s).is_err());
    }
}
