//! Interaction-log ingestion: parsing, intimacy accumulation under weekly
//! caps, and slicing into per-window social graphs.

mod graph;
mod intimacy;
mod parse;

use std::fmt;
use std::str::FromStr;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

pub use graph::{
    build_timestamp_graphs, build_timestamp_graphs_with, group_snapshots, InGameMetrics,
    IngestConfig, IngestOutput, Snapshot, TimestampGraph, Window, DEFAULT_WINDOW_HOURS,
    DEFAULT_WEEK_ANCHOR_SECS,
};
pub use intimacy::{default_rules, intimacy_delta, Delta, IntimacyRule, WeeklyBound};
pub use parse::{parse_events, parse_status, write_events, LogFormat, ParsedLog, SkippedRecord, StatusRecord};

/// Player identifier as it appears in the logs.
pub type PlayerId = String;

/// The eight interaction kinds the game awards intimacy for.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema,
)]
#[serde(rename_all = "snake_case")]
pub enum EventType {
    KillingMonster,
    KillingPlayer,
    Task,
    UsingProps,
    Fighting,
    Chatting,
    Carbon,
    Battle,
}

impl EventType {
    pub const ALL: [EventType; 8] = [
        EventType::KillingMonster,
        EventType::KillingPlayer,
        EventType::Task,
        EventType::UsingProps,
        EventType::Fighting,
        EventType::Chatting,
        EventType::Carbon,
        EventType::Battle,
    ];

    pub const COUNT: usize = Self::ALL.len();

    /// Position in [`EventType::ALL`]; used as a dense vocabulary index.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EventType::KillingMonster => "killing_monster",
            EventType::KillingPlayer => "killing_player",
            EventType::Task => "task",
            EventType::UsingProps => "using_props",
            EventType::Fighting => "fighting",
            EventType::Chatting => "chatting",
            EventType::Carbon => "carbon",
            EventType::Battle => "battle",
        }
    }
}

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventType {
    type Err = String;

    /// Accepts `snake_case`, `CamelCase` and space separated spellings.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        let ty = match key.as_str() {
            "killingmonster" => EventType::KillingMonster,
            "killingplayer" => EventType::KillingPlayer,
            "task" => EventType::Task,
            "usingprops" => EventType::UsingProps,
            "fighting" => EventType::Fighting,
            "chatting" => EventType::Chatting,
            "carbon" => EventType::Carbon,
            "battle" => EventType::Battle,
            _ => return Err(format!("unknown event type `{s}`")),
        };
        Ok(ty)
    }
}

/// One timestamped interaction. `target` is absent for solo activity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct InteractionEvent {
    pub occurred_at: i64,
    pub actor: PlayerId,
    pub target: Option<PlayerId>,
    pub event_type: EventType,
    /// Intimacy amount for variable-valued event types.
    pub value: Option<f64>,
}

impl InteractionEvent {
    pub fn new(occurred_at: i64, actor: &str, target: Option<&str>, event_type: EventType) -> Self {
        InteractionEvent {
            occurred_at,
            actor: actor.to_owned(),
            target: target.map(str::to_owned),
            event_type,
            value: None,
        }
    }

    pub fn with_value(mut self, value: f64) -> Self {
        self.value = Some(value);
        self
    }

    pub fn involves(&self, player: &str) -> bool {
        self.actor == player || self.target.as_deref() == Some(player)
    }

    /// The other participant, seen from `player`.
    pub fn counterparty(&self, player: &str) -> Option<&str> {
        match self.target.as_deref() {
            Some(t) if self.actor == player => Some(t),
            Some(_) if self.target.as_deref() == Some(player) => Some(self.actor.as_str()),
            _ => None,
        }
    }

    /// Unordered pair key with the lexicographically smaller id first.
    pub fn pair(&self) -> Option<(&str, &str)> {
        let target = self.target.as_deref()?;
        let actor = self.actor.as_str();
        Some(if actor < target { (actor, target) } else { (target, actor) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn event_type_spellings() {
        assert_eq!("Battle".parse::<EventType>().unwrap(), EventType::Battle);
        assert_eq!("using_props".parse::<EventType>().unwrap(), EventType::UsingProps);
        assert_eq!("Killing Monster".parse::<EventType>().unwrap(), EventType::KillingMonster);
        assert!("dancing".parse::<EventType>().is_err());
        for ty in EventType::ALL {
            assert_eq!(ty.as_str().parse::<EventType>().unwrap(), ty);
            assert_eq!(EventType::ALL[ty.index()], ty);
        }
    }

    #[test]
    fn pair_is_ordered() {
        let e = InteractionEvent::new(0, "zed", Some("amy"), EventType::Chatting);
        assert_eq!(e.pair(), Some(("amy", "zed")));
        assert_eq!(e.counterparty("amy"), Some("zed"));
        assert_eq!(e.counterparty("zed"), Some("amy"));
        assert_eq!(e.counterparty("bob"), None);
    }
}
