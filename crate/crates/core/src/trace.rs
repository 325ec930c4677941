//! Ordered event logs written as JSON lines.

use serde::Serialize;
use serde_json::Value;

use crate::spacetime::SpacetimePoint;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Prepare,
    Teleport,
    Broadcast,
    Reconstruct,
    Deliver,
}

/// One line of a trace. Field order is fixed so traces diff cleanly.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceEvent {
    pub seq: usize,
    pub point: SpacetimePoint,
    pub kind: EventKind,
    pub data: Value,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Trace {
    events: Vec<TraceEvent>,
}

impl Trace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, point: &SpacetimePoint, kind: EventKind, data: Value) {
        let seq = self.events.len();
        self.events.push(TraceEvent {
            seq,
            point: point.clone(),
            kind,
            data,
        });
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("trace events serialize"));
            out.push('\n');
        }
        out
    }
}
