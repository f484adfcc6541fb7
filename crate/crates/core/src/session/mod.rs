//! First-in first-serve arbitration of several operators over one arm.
//!
//! Control rotates per command: each accepted setpoint is one cycle, at most
//! one cycle is active, and each operator may have at most one command
//! outstanding (queued or active) until its feedback arrives.
//!
//! Every transition either fails and leaves the state untouched, or applies
//! and returns the roster and status frames that must be broadcast.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::time::Duration;

use thiserror::Error;

use crate::protocol::{CodecError, HostDirection, UserStatus, WireJoints, WireMessage};

pub const DEFAULT_QUEUE_BOUND: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClientId(String);

impl ClientId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ClientId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ClientId {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("client {0} is already connected")]
    DuplicateClient(ClientId),
    #[error("client {0} is not connected")]
    UnknownClient(ClientId),
    #[error("queue is full ({0} pending commands)")]
    QueueFull(usize),
    #[error("setpoint out of range: {0}")]
    Range(#[from] CodecError),
    #[error("no active command to complete")]
    NoActiveCommand,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PendingCommand {
    /// Admission number, strictly increasing in acceptance order.
    pub ticket: u64,
    pub client: ClientId,
    pub setpoint: WireJoints,
    pub enqueued_at: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveCommand {
    pub ticket: u64,
    pub client: ClientId,
    pub setpoint: WireJoints,
    pub enqueued_at: Duration,
    pub started_at: Duration,
}

impl ActiveCommand {
    fn start(cmd: PendingCommand, now: Duration) -> Self {
        Self {
            ticket: cmd.ticket,
            client: cmd.client,
            setpoint: cmd.setpoint,
            enqueued_at: cmd.enqueued_at,
            started_at: now,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubmitDecision {
    Active,
    /// One-based queue position.
    Queued(u32),
    RejectedLockstep,
}

/// The finished cycle, addressed to its owner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivery {
    pub completed: ActiveCommand,
    pub feedback: WireJoints,
    /// Next cycle, if the queue was non-empty.
    pub promoted: Option<ActiveCommand>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LeaveOutcome {
    /// The departing client's in-flight cycle, if it owned one.
    pub aborted: Option<ActiveCommand>,
    pub promoted: Option<ActiveCommand>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionState {
    clients: BTreeMap<ClientId, String>,
    queue: VecDeque<PendingCommand>,
    active: Option<ActiveCommand>,
    awaiting_feedback: BTreeSet<ClientId>,
    queue_bound: usize,
    next_ticket: u64,
}

impl Default for SessionState {
    fn default() -> Self {
        Self::new(DEFAULT_QUEUE_BOUND)
    }
}

impl SessionState {
    pub fn new(queue_bound: usize) -> Self {
        Self {
            clients: BTreeMap::new(),
            queue: VecDeque::new(),
            active: None,
            awaiting_feedback: BTreeSet::new(),
            queue_bound,
            next_ticket: 0,
        }
    }

    pub fn clients(&self) -> impl Iterator<Item = (&ClientId, &str)> {
        self.clients.iter().map(|(k, v)| (k, v.as_str()))
    }

    pub fn client_count(&self) -> usize {
        self.clients.len()
    }

    pub fn contains(&self, id: &ClientId) -> bool {
        self.clients.contains_key(id)
    }

    pub fn host_of(&self, id: &ClientId) -> Option<&str> {
        self.clients.get(id).map(String::as_str)
    }

    pub fn queue(&self) -> impl Iterator<Item = &PendingCommand> {
        self.queue.iter()
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    pub fn active(&self) -> Option<&ActiveCommand> {
        self.active.as_ref()
    }

    pub fn is_awaiting(&self, id: &ClientId) -> bool {
        self.awaiting_feedback.contains(id)
    }

    pub fn is_idle(&self) -> bool {
        self.active.is_none() && self.queue.is_empty()
    }

    pub fn status_of(&self, id: &ClientId) -> UserStatus {
        if self.active.as_ref().is_some_and(|a| &a.client == id) {
            return UserStatus::Active;
        }
        match self.queue.iter().position(|c| &c.client == id) {
            Some(i) => UserStatus::Queued(i as u32 + 1),
            None => UserStatus::Idle,
        }
    }

    pub fn join(
        &mut self,
        client: ClientId,
        host: impl Into<String>,
    ) -> Result<Vec<WireMessage>, SessionError> {
        if self.clients.contains_key(&client) {
            return Err(SessionError::DuplicateClient(client));
        }
        let host = host.into();
        self.clients.insert(client, host.clone());
        Ok(vec![
            WireMessage::HostEvent {
                direction: HostDirection::Join,
                host,
            },
            self.count_event(),
        ])
    }

    pub fn leave(
        &mut self,
        client: &ClientId,
        now: Duration,
    ) -> Result<(LeaveOutcome, Vec<WireMessage>), SessionError> {
        let host = self
            .clients
            .remove(client)
            .ok_or_else(|| SessionError::UnknownClient(client.clone()))?;
        self.awaiting_feedback.remove(client);
        let mut events = vec![
            WireMessage::HostEvent {
                direction: HostDirection::Leave,
                host,
            },
            self.count_event(),
        ];
        let mut outcome = LeaveOutcome::default();

        if let Some(pos) = self.queue.iter().position(|c| &c.client == client) {
            self.queue.remove(pos);
            events.extend(self.queue_status_events(pos));
        }
        if self.active.as_ref().is_some_and(|a| &a.client == client) {
            outcome.aborted = self.active.take();
            outcome.promoted = self.promote(now, &mut events);
        }
        Ok((outcome, events))
    }

    pub fn submit(
        &mut self,
        client: &ClientId,
        setpoint: WireJoints,
        now: Duration,
    ) -> Result<(SubmitDecision, Vec<WireMessage>), SessionError> {
        if !self.clients.contains_key(client) {
            return Err(SessionError::UnknownClient(client.clone()));
        }
        setpoint.validate()?;
        if self.awaiting_feedback.contains(client) {
            return Ok((SubmitDecision::RejectedLockstep, Vec::new()));
        }
        let cmd = PendingCommand {
            ticket: self.next_ticket,
            client: client.clone(),
            setpoint,
            enqueued_at: now,
        };
        let decision = if self.active.is_none() {
            self.active = Some(ActiveCommand::start(cmd, now));
            SubmitDecision::Active
        } else {
            if self.queue.len() >= self.queue_bound {
                return Err(SessionError::QueueFull(self.queue_bound));
            }
            self.queue.push_back(cmd);
            SubmitDecision::Queued(self.queue.len() as u32)
        };
        self.next_ticket += 1;
        self.awaiting_feedback.insert(client.clone());
        let status = match decision {
            SubmitDecision::Active => UserStatus::Active,
            SubmitDecision::Queued(n) => UserStatus::Queued(n),
            SubmitDecision::RejectedLockstep => unreachable!(),
        };
        Ok((decision, vec![status_event(client, status)]))
    }

    pub fn complete_active(
        &mut self,
        feedback: WireJoints,
        now: Duration,
    ) -> Result<(Delivery, Vec<WireMessage>), SessionError> {
        let completed = self.active.take().ok_or(SessionError::NoActiveCommand)?;
        self.awaiting_feedback.remove(&completed.client);
        let mut events = vec![status_event(&completed.client, UserStatus::Idle)];
        let promoted = self.promote(now, &mut events);
        Ok((
            Delivery {
                completed,
                feedback,
                promoted,
            },
            events,
        ))
    }

    fn promote(&mut self, now: Duration, events: &mut Vec<WireMessage>) -> Option<ActiveCommand> {
        debug_assert!(self.active.is_none());
        let next = self.queue.pop_front()?;
        let active = ActiveCommand::start(next, now);
        events.push(status_event(&active.client, UserStatus::Active));
        events.extend(self.queue_status_events(0));
        self.active = Some(active.clone());
        Some(active)
    }

    /// Status frames for queued commands from `from` onward, whose position changed.
    fn queue_status_events(&self, from: usize) -> Vec<WireMessage> {
        self.queue
            .iter()
            .enumerate()
            .skip(from)
            .map(|(i, c)| status_event(&c.client, UserStatus::Queued(i as u32 + 1)))
            .collect()
    }

    fn count_event(&self) -> WireMessage {
        WireMessage::ClientCount(self.clients.len() as u32)
    }

    /// Checks the structural invariants. Used by tests and debug assertions.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut owners: Vec<&ClientId> = self.queue.iter().map(|c| &c.client).collect();
        if let Some(a) = &self.active {
            owners.push(&a.client);
        }
        let unique: BTreeSet<&ClientId> = owners.iter().copied().collect();
        if unique.len() != owners.len() {
            return Err("a client has two outstanding commands".into());
        }
        if unique.len() != self.awaiting_feedback.len()
            || !unique.iter().all(|c| self.awaiting_feedback.contains(*c))
        {
            return Err("awaiting set disagrees with queue and active".into());
        }
        if let Some(c) = unique.iter().find(|c| !self.clients.contains_key(**c)) {
            return Err(format!("outstanding command for departed client {c}"));
        }
        if self.active.is_none() && !self.queue.is_empty() {
            return Err("queue non-empty with no active command".into());
        }
        if self.queue.len() > self.queue_bound {
            return Err("queue exceeds its bound".into());
        }
        Ok(())
    }
}

fn status_event(client: &ClientId, status: UserStatus) -> WireMessage {
    WireMessage::UserStatus {
        client: client.to_string(),
        status,
    }
}
