//! Transport-independent heart of the robot server.
//!
//! `ServerEngine` owns the arm and the session table. Drivers feed it
//! connection events, received lines and clock ticks, each stamped with the
//! driver's notion of "now", and forward the returned frames. The TCP server
//! and the network simulator are both thin drivers around it.

use std::time::Duration;

use bytes::Bytes;

use super::log::{Direction, WireLogEntry, BROADCAST_PEER};
use crate::arm::{clamp_to_limits, step_motion, ArmConfig, ArmState, JointVector};
use crate::protocol::{decode, encode, CodecError, Handshake, UserStatus, WireJoints, WireMessage};
use crate::session::{ActiveCommand, ClientId, SessionError, SessionState, SubmitDecision, DEFAULT_QUEUE_BOUND};

pub const DEFAULT_TICK: Duration = Duration::from_millis(10);
pub const DEFAULT_BROADCAST_RATE_HZ: f64 = 10.0;

/// Parameters of the engine that do not depend on the transport.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub arm: ArmConfig,
    /// Interim feedback rate while the arm moves.
    pub broadcast_rate_hz: f64,
    pub queue_bound: usize,
    /// Integration step of the actuation loop.
    pub tick: Duration,
    pub home: JointVector,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            arm: ArmConfig::default(),
            broadcast_rate_hz: DEFAULT_BROADCAST_RATE_HZ,
            queue_bound: DEFAULT_QUEUE_BOUND,
            tick: DEFAULT_TICK,
            home: JointVector::ZERO,
        }
    }
}

/// A frame to hand to one client's connection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outbound {
    pub to: ClientId,
    pub line: Bytes,
}

/// Server-side timing of one finished cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompletedCycle {
    /// Admission ticket; completions in FIFO order have increasing tickets.
    pub ticket: u64,
    pub owner: ClientId,
    pub setpoint: WireJoints,
    pub feedback: WireJoints,
    /// When the setpoint frame was received.
    pub received_at: Duration,
    /// When the cycle became active and the arm was commanded.
    pub started_at: Duration,
    /// When the terminal feedback was emitted.
    pub completed_at: Duration,
}

#[derive(Debug)]
pub struct ServerEngine {
    cfg: EngineConfig,
    arm: ArmState,
    session: SessionState,
    last_broadcast: Duration,
    log: Vec<WireLogEntry>,
    cycles: Vec<CompletedCycle>,
}

impl ServerEngine {
    pub fn new(cfg: EngineConfig) -> Self {
        let home = clamp_to_limits(&cfg.arm, &cfg.home);
        Self {
            arm: ArmState::at_rest(home),
            session: SessionState::new(cfg.queue_bound),
            last_broadcast: Duration::ZERO,
            log: Vec::new(),
            cycles: Vec::new(),
            cfg,
        }
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn arm(&self) -> &ArmState {
        &self.arm
    }

    pub fn session(&self) -> &SessionState {
        &self.session
    }

    /// True when nothing is active or queued and the arm sits exactly on its target.
    pub fn is_idle(&self) -> bool {
        self.session.is_idle() && self.arm.current == self.arm.target
    }

    pub fn drain_log(&mut self) -> Vec<WireLogEntry> {
        std::mem::take(&mut self.log)
    }

    pub fn drain_cycles(&mut self) -> Vec<CompletedCycle> {
        std::mem::take(&mut self.cycles)
    }

    pub fn connect(
        &mut self,
        client: ClientId,
        host: &str,
        now: Duration,
    ) -> Result<Vec<Outbound>, SessionError> {
        let events = self.session.join(client.clone(), host)?;
        let hello = WireMessage::Handshake(Handshake::for_arm(client.as_str(), &self.cfg.arm));
        let mut out = Vec::new();
        self.unicast(&mut out, &client, &hello, now);
        for ev in &events {
            self.broadcast(&mut out, ev, now);
        }
        Ok(out)
    }

    /// Removes a client. Unknown clients are ignored so drivers may report a
    /// close more than once.
    pub fn disconnect(&mut self, client: &ClientId, now: Duration) -> Vec<Outbound> {
        let mut out = Vec::new();
        let Ok((outcome, events)) = self.session.leave(client, now) else {
            return out;
        };
        if outcome.aborted.is_some() {
            self.arm.halt();
        }
        for ev in &events {
            self.broadcast(&mut out, ev, now);
        }
        if let Some(next) = outcome.promoted {
            self.activate(&next, now);
        }
        out
    }

    pub fn receive(&mut self, client: &ClientId, line: &[u8], now: Duration) -> Vec<Outbound> {
        let text = String::from_utf8_lossy(line.strip_suffix(b"\n").unwrap_or(line)).into_owned();
        self.log.push(WireLogEntry {
            at: now,
            direction: Direction::In,
            peer: client.to_string(),
            frame: text,
        });
        let mut out = Vec::new();
        if !self.session.contains(client) {
            return out;
        }
        match decode(line) {
            Ok(WireMessage::Setpoint(joints)) => self.handle_setpoint(&mut out, client, joints, now),
            Ok(WireMessage::Ping(n)) => self.unicast(&mut out, client, &WireMessage::Pong(n), now),
            Ok(other) => {
                let detail = other.prefix().to_string();
                self.unicast(&mut out, client, &WireMessage::error("UNEXPECTED", &detail), now)
            }
            Err(e) => {
                let msg = WireMessage::error(e.kind(), error_detail(&e));
                self.unicast(&mut out, client, &msg, now)
            }
        }
        out
    }

    /// Clamps and arbitrates one setpoint. The addressed terminal feedback
    /// follows from a later `tick`; rejections are answered immediately.
    pub fn handle_setpoint(
        &mut self,
        out: &mut Vec<Outbound>,
        client: &ClientId,
        joints: WireJoints,
        now: Duration,
    ) {
        let clamped = clamp_to_limits(&self.cfg.arm, &joints.to_angles());
        let setpoint = WireJoints::from_angles(&clamped).expect("joint limits lie within wire range");
        match self.session.submit(client, setpoint, now) {
            Ok((decision, events)) => {
                for ev in &events {
                    self.broadcast(out, ev, now);
                }
                match decision {
                    SubmitDecision::Active => {
                        let active = self.session.active().cloned().expect("just activated");
                        self.activate(&active, now);
                    }
                    SubmitDecision::Queued(_) => {}
                    SubmitDecision::RejectedLockstep => {
                        let msg = WireMessage::error("LOCKSTEP", "outstanding_command");
                        self.unicast(out, client, &msg, now);
                    }
                }
            }
            Err(SessionError::QueueFull(_)) => {
                self.unicast(out, client, &WireMessage::error("QFULL", "queue_full"), now);
            }
            Err(SessionError::Range(_)) => {
                self.unicast(out, client, &WireMessage::error("RANGE", "joint"), now);
            }
            Err(SessionError::UnknownClient(_)) => {}
            Err(e) => unreachable!("submit cannot fail with {e}"),
        }
    }

    /// Advances the actuation loop by one integration step.
    pub fn tick(&mut self, now: Duration) -> Vec<Outbound> {
        let mut out = Vec::new();
        self.arm = step_motion(&self.cfg.arm, &self.arm, self.cfg.tick.as_secs_f64());
        let Some(active) = self.session.active().cloned() else {
            return out;
        };
        let feedback = WireJoints::from_angles(&self.arm.current).expect("arm pose within wire range");
        if self.arm.moving {
            if now.saturating_sub(self.last_broadcast) >= self.broadcast_period() {
                self.last_broadcast = now;
                let msg = WireMessage::Feedback {
                    joints: feedback,
                    reached: false,
                };
                self.broadcast(&mut out, &msg, now);
            }
            return out;
        }

        let addressed = WireMessage::UserStatus {
            client: active.client.to_string(),
            status: UserStatus::Active,
        };
        self.broadcast(&mut out, &addressed, now);
        let terminal = WireMessage::Feedback {
            joints: feedback,
            reached: true,
        };
        self.broadcast(&mut out, &terminal, now);
        let (delivery, events) = self
            .session
            .complete_active(feedback, now)
            .expect("an active command exists");
        self.cycles.push(CompletedCycle {
            ticket: delivery.completed.ticket,
            owner: delivery.completed.client.clone(),
            setpoint: delivery.completed.setpoint,
            feedback,
            received_at: delivery.completed.enqueued_at,
            started_at: delivery.completed.started_at,
            completed_at: now,
        });
        for ev in &events {
            self.broadcast(&mut out, ev, now);
        }
        if let Some(next) = delivery.promoted {
            self.activate(&next, now);
        }
        out
    }

    /// Final status to every client before the transport closes.
    pub fn shutdown(&mut self, now: Duration) -> Vec<Outbound> {
        let mut out = Vec::new();
        let ids: Vec<ClientId> = self.session.clients().map(|(id, _)| id.clone()).collect();
        for id in ids {
            let msg = WireMessage::UserStatus {
                client: id.to_string(),
                status: UserStatus::Idle,
            };
            self.unicast(&mut out, &id, &msg, now);
        }
        self.arm.halt();
        out
    }

    fn broadcast_period(&self) -> Duration {
        Duration::from_secs_f64(1.0 / self.cfg.broadcast_rate_hz)
    }

    fn activate(&mut self, cmd: &ActiveCommand, now: Duration) {
        self.arm.retarget(&self.cfg.arm, cmd.setpoint.to_angles());
        self.last_broadcast = now;
    }

    fn encode_logged(&mut self, peer: &str, msg: &WireMessage, now: Duration) -> Bytes {
        let line = encode(msg).expect("server emits only valid frames");
        self.log.push(WireLogEntry {
            at: now,
            direction: Direction::Out,
            peer: peer.to_string(),
            frame: msg.to_string(),
        });
        Bytes::from(line)
    }

    fn unicast(&mut self, out: &mut Vec<Outbound>, to: &ClientId, msg: &WireMessage, now: Duration) {
        let line = self.encode_logged(to.as_str(), msg, now);
        out.push(Outbound { to: to.clone(), line });
    }

    /// Encodes once and fans the same bytes out to every client.
    fn broadcast(&mut self, out: &mut Vec<Outbound>, msg: &WireMessage, now: Duration) {
        let line = self.encode_logged(BROADCAST_PEER, msg, now);
        out.extend(self.session.clients().map(|(id, _)| Outbound {
            to: id.clone(),
            line: line.clone(),
        }));
    }
}

fn error_detail(e: &CodecError) -> &'static str {
    match e {
        CodecError::UnknownPrefix(_) => "prefix",
        CodecError::Arity { .. } => "field_count",
        CodecError::Parse { field, .. }
        | CodecError::Range { field, .. }
        | CodecError::InvalidField { field } => field,
    }
}
