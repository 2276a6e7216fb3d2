use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::{EventType, InteractionEvent};
use crate::error::{Error, Result};

/// Intimacy awarded per event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Delta {
    Fixed(f64),
    /// Taken from the event's `value` field.
    Variable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum WeeklyBound {
    Limited(f64),
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct IntimacyRule {
    pub event_type: EventType,
    pub per_event_delta: Delta,
    pub weekly_bound: WeeklyBound,
}

/// The game's intimacy table.
pub fn default_rules() -> Vec<IntimacyRule> {
    use Delta::*;
    use EventType::*;
    use WeeklyBound::*;
    let rule = |event_type, per_event_delta, weekly_bound| IntimacyRule {
        event_type,
        per_event_delta,
        weekly_bound,
    };
    vec![
        rule(KillingMonster, Fixed(1.0), Limited(1500.0)),
        rule(KillingPlayer, Fixed(1.0), Limited(300.0)),
        rule(Task, Variable, Limited(100.0)),
        rule(UsingProps, Variable, Limited(5000.0)),
        rule(Fighting, Fixed(25.0), Limited(350.0)),
        rule(Chatting, Fixed(2.0), Limited(210.0)),
        rule(Carbon, Variable, Unbounded),
        rule(Battle, Fixed(120.0), Unbounded),
    ]
}

impl IntimacyRule {
    fn clipped(&self, raw: f64, accumulated_this_week: f64) -> f64 {
        match self.weekly_bound {
            WeeklyBound::Unbounded => raw,
            WeeklyBound::Limited(bound) => raw.min((bound - accumulated_this_week).max(0.0)),
        }
    }
}

/// Intimacy an event adds given what the same pair already accumulated for
/// this event type in the current week.
pub fn intimacy_delta(
    event: &InteractionEvent,
    rules: &[IntimacyRule],
    accumulated_this_week: f64,
) -> Result<f64> {
    let rule = rules
        .iter()
        .find(|r| r.event_type == event.event_type)
        .ok_or(Error::MissingRule(event.event_type))?;
    if let Some(v) = event.value {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::invalid(format!("event value must be a nonnegative number, got {v}")));
        }
    }
    let raw = match rule.per_event_delta {
        Delta::Fixed(d) => d,
        Delta::Variable => event.value.unwrap_or(0.0),
    };
    Ok(rule.clipped(raw, accumulated_this_week))
}
