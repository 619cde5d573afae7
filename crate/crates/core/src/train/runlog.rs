use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    TrainLoss,
    LearningRate,
    ValMetric,
    BestCheckpoint,
}

/// One log line: `{step, kind, value}` plus a wall-clock timestamp. The
/// timestamp is excluded from reproducibility comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEvent {
    pub step: u64,
    pub kind: EventKind,
    pub value: f64,
    pub t: f64,
}

/// Append-only training log. Step indices are monotone non-decreasing; the
/// best-checkpoint pointer always equals the extremum of the validation
/// metrics logged so far.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub events: Vec<LogEvent>,
}

impl RunLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, step: u64, kind: EventKind, value: f64) {
        debug_assert!(
            self.events.last().map_or(true, |e| e.step <= step),
            "step indices must be monotone"
        );
        let t = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0);
        self.events.push(LogEvent {
            step,
            kind,
            value,
            t,
        });
    }

    pub fn values_of(&self, kind: EventKind) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.events
            .iter()
            .filter(move |e| e.kind == kind)
            .map(|e| (e.step, e.value))
    }

    /// The `(step, kind, value)` triples, which must reproduce bit-exactly
    /// under a fixed seed (timestamps excluded).
    pub fn series(&self) -> Vec<(u64, EventKind, f64)> {
        self.events.iter().map(|e| (e.step, e.kind, e.value)).collect()
    }

    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("event serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let mut events = Vec::new();
        for line in text.lines() {
            if line.trim().is_empty() {
                continue;
            }
            events.push(serde_json::from_str(line)?);
        }
        Ok(Self { events })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip() {
        let mut log = RunLog::new();
        log.push(0, EventKind::TrainLoss, 2.5);
        log.push(0, EventKind::LearningRate, 1e-5);
        log.push(1, EventKind::ValMetric, 1.25);
        log.push(1, EventKind::BestCheckpoint, 1.25);
        let text = log.to_jsonl();
        assert_eq!(text.lines().count(), 4);
        let back = RunLog::from_jsonl(&text).unwrap();
        assert_eq!(back.series(), log.series());
    }

    #[test]
    fn series_filters_by_kind() {
        let mut log = RunLog::new();
        log.push(0, EventKind::TrainLoss, 1.0);
        log.push(1, EventKind::TrainLoss, 0.5);
        log.push(1, EventKind::ValMetric, 0.7);
        let losses: Vec<_> = log.values_of(EventKind::TrainLoss).collect();
        assert_eq!(losses, vec![(0, 1.0), (1, 0.5)]);
    }
}
