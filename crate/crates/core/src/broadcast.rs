//! Append-only classical message store with causal read auditing.
//!
//! A message emitted at `X` may be read at `Y` only when `X ⪯ Y`. Every read
//! goes through [`MessageStore::read`], which records an audit entry and
//! fails with [`CausalityViolation`] when the message lies outside the
//! reader's past light cone.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::qudit_sim::BellOutcome;
use crate::spacetime::{CausalOrder, SpacetimeError, SpacetimePoint};
use crate::task::{Assignment, SummoningTask};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MessageKey {
    /// The value of input `m_k`, announced at `P_k`.
    Input {
        #[serde(with = "crate::index::one_based")]
        input: usize,
    },
    /// A classical token description, announced at the start point.
    Token,
    /// A Bell outcome from one teleportation in a pair route.
    TeleportOutcome {
        #[serde(with = "crate::index::one_based_pair")]
        pair: (usize, usize),
        slot: usize,
        hop: usize,
        history: Vec<u32>,
    },
    /// One entry of a broadcast operation log.
    Descriptor { seq: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    Value(u32),
    Outcome(BellOutcome),
    Bytes(Vec<u8>),
    Record(serde_json::Value),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Message {
    pub seq: usize,
    pub emitted_at: SpacetimePoint,
    pub key: MessageKey,
    pub payload: Payload,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditEntry {
    pub key: MessageKey,
    pub emitted_at: SpacetimePoint,
    pub read_at: SpacetimePoint,
    pub ok: bool,
}

#[derive(Debug, Error)]
pub enum BroadcastError {
    #[error(transparent)]
    Causality(#[from] CausalityViolation),
    #[error("no message {0:?} has been emitted")]
    Missing(MessageKey),
    #[error("message {0:?} was already emitted")]
    Duplicate(MessageKey),
    #[error(transparent)]
    Spacetime(#[from] SpacetimeError),
}

#[derive(Clone, Debug, Error, PartialEq, Serialize)]
#[error("causality violation: {what} from {from} used at {at}")]
pub struct CausalityViolation {
    pub what: String,
    pub from: Box<SpacetimePoint>,
    pub at: Box<SpacetimePoint>,
}

impl CausalityViolation {
    pub fn new(what: impl Into<String>, from: SpacetimePoint, at: SpacetimePoint) -> Self {
        CausalityViolation {
            what: what.into(),
            from: Box::new(from),
            at: Box::new(at),
        }
    }
}

#[derive(Clone, Debug)]
pub struct MessageStore {
    order: CausalOrder,
    messages: Vec<Message>,
    index: HashMap<MessageKey, usize>,
    audit: Vec<AuditEntry>,
}

impl MessageStore {
    pub fn new(order: CausalOrder) -> Self {
        Self {
            order,
            messages: Vec::new(),
            index: HashMap::new(),
            audit: Vec::new(),
        }
    }

    pub fn order(&self) -> CausalOrder {
        self.order
    }

    pub fn emit(&mut self, at: &SpacetimePoint, key: MessageKey, payload: Payload) -> Result<usize, BroadcastError> {
        if self.index.contains_key(&key) {
            return Err(BroadcastError::Duplicate(key));
        }
        let seq = self.messages.len();
        self.index.insert(key.clone(), seq);
        self.messages.push(Message {
            seq,
            emitted_at: at.clone(),
            key,
            payload,
        });
        Ok(seq)
    }

    /// Reads a message at `at`, auditing the access.
    pub fn read(&mut self, at: &SpacetimePoint, key: &MessageKey) -> Result<&Payload, BroadcastError> {
        let &idx = self.index.get(key).ok_or_else(|| BroadcastError::Missing(key.clone()))?;
        let emitted_at = self.messages[idx].emitted_at.clone();
        let ok = self.order.precedes(&emitted_at, at)?;
        self.audit.push(AuditEntry {
            key: key.clone(),
            emitted_at: emitted_at.clone(),
            read_at: at.clone(),
            ok,
        });
        if !ok {
            return Err(CausalityViolation::new(format!("{key:?}"), emitted_at, at.clone()).into());
        }
        Ok(&self.messages[idx].payload)
    }

    pub fn read_value(&mut self, at: &SpacetimePoint, key: &MessageKey) -> Result<u32, BroadcastError> {
        match self.read(at, key)? {
            Payload::Value(v) => Ok(*v),
            _ => Err(BroadcastError::Missing(key.clone())),
        }
    }

    pub fn read_outcome(&mut self, at: &SpacetimePoint, key: &MessageKey) -> Result<BellOutcome, BroadcastError> {
        match self.read(at, key)? {
            Payload::Outcome(o) => Ok(*o),
            _ => Err(BroadcastError::Missing(key.clone())),
        }
    }

    /// Reads the inputs at the given indices, in order.
    pub fn read_inputs(&mut self, at: &SpacetimePoint, inputs: &[usize]) -> Result<Vec<u32>, BroadcastError> {
        inputs
            .iter()
            .map(|&k| self.read_value(at, &MessageKey::Input { input: k }))
            .collect()
    }

    /// Messages visible from `at`, in emission order. Reads through this
    /// view are audited like single reads.
    pub fn visible(&mut self, at: &SpacetimePoint) -> Result<Vec<Message>, BroadcastError> {
        let mut out = Vec::new();
        for m in &self.messages {
            if self.order.precedes(&m.emitted_at, at)? {
                self.audit.push(AuditEntry {
                    key: m.key.clone(),
                    emitted_at: m.emitted_at.clone(),
                    read_at: at.clone(),
                    ok: true,
                });
                out.push(m.clone());
            }
        }
        Ok(out)
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn audit(&self) -> &[AuditEntry] {
        &self.audit
    }

    /// Every recorded read was causally allowed.
    pub fn audit_passed(&self) -> bool {
        self.audit.iter().all(|e| e.ok)
    }
}

/// Bob announces each input value at its input point.
pub fn emit_inputs(store: &mut MessageStore, task: &SummoningTask, m: &Assignment) -> Result<(), BroadcastError> {
    for (k, &v) in m.values().iter().enumerate() {
        store.emit(task.input_point(k), MessageKey::Input { input: k }, Payload::Value(v))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(t: i64, x: i64) -> SpacetimePoint {
        SpacetimePoint::exact(t, &[x], 1)
    }

    #[test]
    fn reads_inside_the_light_cone_succeed() {
        let mut s = MessageStore::new(CausalOrder::default());
        s.emit(&pt(0, 0), MessageKey::Token, Payload::Bytes(vec![1])).unwrap();
        assert_eq!(s.read(&pt(2, 2), &MessageKey::Token).unwrap(), &Payload::Bytes(vec![1]));
        assert!(s.audit_passed());
    }

    #[test]
    fn reads_outside_the_light_cone_fail_and_are_logged() {
        let mut s = MessageStore::new(CausalOrder::default());
        s.emit(&pt(0, 0), MessageKey::Input { input: 0 }, Payload::Value(1)).unwrap();
        let err = s.read(&pt(1, 2), &MessageKey::Input { input: 0 }).unwrap_err();
        assert!(matches!(err, BroadcastError::Causality(_)));
        assert!(!s.audit_passed());
        assert_eq!(s.audit().len(), 1);
    }

    #[test]
    fn keys_are_write_once() {
        let mut s = MessageStore::new(CausalOrder::default());
        s.emit(&pt(0, 0), MessageKey::Token, Payload::Value(0)).unwrap();
        assert!(matches!(
            s.emit(&pt(0, 0), MessageKey::Token, Payload::Value(1)),
            Err(BroadcastError::Duplicate(_))
        ));
        assert!(matches!(
            s.read(&pt(0, 0), &MessageKey::Descriptor { seq: 0 }),
            Err(BroadcastError::Missing(_))
        ));
    }

    #[test]
    fn visible_filters_by_past_cone() {
        let mut s = MessageStore::new(CausalOrder::default());
        s.emit(&pt(0, -1), MessageKey::Input { input: 0 }, Payload::Value(0)).unwrap();
        s.emit(&pt(0, 1), MessageKey::Input { input: 1 }, Payload::Value(1)).unwrap();
        let seen = s.visible(&pt(1, -1)).unwrap();
        assert_eq!(seen.len(), 1);
        assert_eq!(seen[0].key, MessageKey::Input { input: 0 });
    }
}
