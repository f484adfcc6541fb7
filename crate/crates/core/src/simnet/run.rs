use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::time::Duration;

use super::link::{LinkProfile, SimLink};
use super::report::{CycleReport, PingSample, Rejection, RunReport};
use super::script::{Action, ScenarioScript, ScriptStep};
use super::{profiles, SimError};
use crate::latency::{measure_cycle, CycleTimestamps, DEFAULT_PING_TIMEOUT};
use crate::protocol::{decode, encode, UserStatus, WireJoints, WireMessage};
use crate::server::{CompletedCycle, EngineConfig, Outbound, ServerEngine};
use crate::session::ClientId;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub engine: EngineConfig,
    pub ping_timeout: Duration,
    /// Runs still producing events past this instant fail with [`SimError::Timeout`].
    pub max_virtual_time: Duration,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            engine: EngineConfig::default(),
            ping_timeout: DEFAULT_PING_TIMEOUT,
            max_virtual_time: Duration::from_secs(24 * 3600),
        }
    }
}

#[derive(Debug)]
enum ToServer {
    Connect(String),
    Line(Vec<u8>),
    Disconnect,
}

#[derive(Debug)]
enum Event {
    Wake(usize),
    AtServer(usize, ToServer),
    AtClient(usize, Vec<u8>),
    Tick,
    PingDeadline(usize, u64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Block {
    Handshake,
    Await,
    Ping { nonce: u64, sent: Duration },
}

#[derive(Debug, Clone)]
struct Submission {
    request_sent: Duration,
    connection_open: Duration,
    setpoint: WireJoints,
    bytes_out: usize,
}

struct Client {
    id: ClientId,
    steps: VecDeque<ScriptStep>,
    up: SimLink,
    down: SimLink,
    closed: bool,
    block: Option<Block>,
    unclassified: VecDeque<Submission>,
    accepted: Option<Submission>,
    last_was_own_active: bool,
    next_nonce: u64,
}

impl Client {
    fn outstanding(&self) -> bool {
        self.accepted.is_some() || !self.unclassified.is_empty()
    }
}

struct Sim<'a> {
    cfg: &'a SimConfig,
    profile: &'a LinkProfile,
    engine: ServerEngine,
    clients: Vec<Client>,
    index: HashMap<ClientId, usize>,
    heap: BinaryHeap<Reverse<(Duration, u64)>>,
    events: HashMap<u64, Event>,
    seq: u64,
    tick_armed: bool,
    completions: HashMap<ClientId, VecDeque<CompletedCycle>>,
    report: RunReport,
}

fn link_seed(seed: u64, client: usize, direction: u64) -> u64 {
    seed ^ (client as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ direction.wrapping_mul(0xD1B5_4A32_D192_ED03)
}

/// Runs `script` against a fresh server over `profile` links.
pub fn run_scenario(profile: &LinkProfile, script: &ScenarioScript, cfg: &SimConfig) -> Result<RunReport, SimError> {
    profile.validate()?;
    script.validate()?;
    let names = script.clients();
    let clients: Vec<Client> = names
        .iter()
        .enumerate()
        .map(|(i, name)| Client {
            id: ClientId::new(*name),
            steps: script.steps.iter().filter(|s| s.client == *name).cloned().collect(),
            up: SimLink::new(profile.clone(), link_seed(script.seed, i, 0)),
            down: SimLink::new(profile.clone(), link_seed(script.seed, i, 1)),
            closed: false,
            block: None,
            unclassified: VecDeque::new(),
            accepted: None,
            last_was_own_active: false,
            next_nonce: 0,
        })
        .collect();
    let index = clients.iter().enumerate().map(|(i, c)| (c.id.clone(), i)).collect();
    let mut sim = Sim {
        cfg,
        profile,
        engine: ServerEngine::new(cfg.engine.clone()),
        clients,
        index,
        heap: BinaryHeap::new(),
        events: HashMap::new(),
        seq: 0,
        tick_armed: false,
        completions: HashMap::new(),
        report: RunReport::new(profile, script.seed),
    };
    for i in 0..sim.clients.len() {
        let at = sim.clients[i].steps.front().map_or(Duration::ZERO, |s| s.at);
        sim.schedule(at, Event::Wake(i));
    }
    sim.run()?;
    Ok(sim.report)
}

/// The reference scenario over each calibrated profile.
pub fn run_table1(seed: u64, cfg: &SimConfig) -> Result<Vec<RunReport>, SimError> {
    let script = ScenarioScript::table1(seed);
    profiles::canonical()
        .iter()
        .map(|p| run_scenario(p, &script, cfg))
        .collect()
}

impl Sim<'_> {
    fn schedule(&mut self, at: Duration, ev: Event) {
        let seq = self.seq;
        self.seq += 1;
        self.heap.push(Reverse((at, seq)));
        self.events.insert(seq, ev);
    }

    fn run(&mut self) -> Result<(), SimError> {
        while let Some(Reverse((now, seq))) = self.heap.pop() {
            if now > self.cfg.max_virtual_time {
                return Err(SimError::Timeout(self.cfg.max_virtual_time));
            }
            self.report.end_time = now;
            let ev = self.events.remove(&seq).expect("every scheduled event is stored");
            match ev {
                Event::Wake(i) => self.wake(i, now),
                Event::AtServer(i, msg) => self.at_server(i, msg, now)?,
                Event::AtClient(i, line) => self.at_client(i, line, now),
                Event::Tick => {
                    self.tick_armed = false;
                    let out = self.engine.tick(now);
                    self.after_engine(out, now)?;
                }
                Event::PingDeadline(i, nonce) => {
                    let c = &mut self.clients[i];
                    if let Some(Block::Ping { nonce: n, sent }) = c.block {
                        if n == nonce {
                            c.block = None;
                            self.report.pings.push(PingSample {
                                client: c.id.to_string(),
                                nonce,
                                sent_at: sent,
                                rtt: None,
                            });
                            self.schedule(now, Event::Wake(i));
                        }
                    }
                }
            }
        }
        if let Some(c) = self.clients.iter().find(|c| !c.closed && (c.block.is_some() || !c.steps.is_empty())) {
            return Err(SimError::Stalled {
                client: c.id.to_string(),
            });
        }
        Ok(())
    }

    /// Executes the client's due actions until it blocks or runs out.
    fn wake(&mut self, i: usize, now: Duration) {
        loop {
            let c = &mut self.clients[i];
            if c.closed || c.block.is_some() {
                return;
            }
            let Some(step) = c.steps.front() else {
                return;
            };
            if step.at > now {
                let at = step.at;
                self.schedule(at, Event::Wake(i));
                return;
            }
            let step = c.steps.pop_front().expect("peeked");
            let setup = self.profile.setup_delay;
            match step.action {
                Action::Connect { host } => {
                    let host = host.unwrap_or_else(|| format!("10.0.0.{}", i + 1));
                    let at = c.up.transmit(0, now + setup);
                    c.block = Some(Block::Handshake);
                    self.schedule(at, Event::AtServer(i, ToServer::Connect(host)));
                }
                Action::Submit(angles) => {
                    let setpoint = WireJoints::from_angles(&angles).expect("validated script");
                    let line = encode(&WireMessage::Setpoint(setpoint)).expect("valid setpoint");
                    let open = now + setup;
                    let at = c.up.transmit(line.len(), open);
                    c.unclassified.push_back(Submission {
                        request_sent: now,
                        connection_open: open,
                        setpoint,
                        bytes_out: line.len(),
                    });
                    self.schedule(at, Event::AtServer(i, ToServer::Line(line)));
                }
                Action::Await => {
                    if c.outstanding() {
                        c.block = Some(Block::Await);
                    }
                }
                Action::Ping => {
                    let nonce = c.next_nonce;
                    c.next_nonce += 1;
                    let line = encode(&WireMessage::Ping(nonce)).expect("ping encodes");
                    let at = c.up.transmit(line.len(), now);
                    c.block = Some(Block::Ping { nonce, sent: now });
                    let deadline = now + self.cfg.ping_timeout;
                    self.schedule(at, Event::AtServer(i, ToServer::Line(line)));
                    self.schedule(deadline, Event::PingDeadline(i, nonce));
                }
                Action::Disconnect => {
                    let at = c.up.transmit(0, now);
                    c.closed = true;
                    self.schedule(at, Event::AtServer(i, ToServer::Disconnect));
                }
            }
        }
    }

    fn at_server(&mut self, i: usize, msg: ToServer, now: Duration) -> Result<(), SimError> {
        let id = self.clients[i].id.clone();
        let out = match msg {
            ToServer::Connect(host) => self
                .engine
                .connect(id, &host, now)
                .expect("script clients have unique names"),
            ToServer::Line(line) => self.engine.receive(&id, &line, now),
            ToServer::Disconnect => self.engine.disconnect(&id, now),
        };
        self.after_engine(out, now)
    }

    fn after_engine(&mut self, out: Vec<Outbound>, now: Duration) -> Result<(), SimError> {
        for o in out {
            let Some(&j) = self.index.get(&o.to) else {
                continue;
            };
            let at = self.clients[j].down.transmit(o.line.len(), now);
            self.schedule(at, Event::AtClient(j, o.line.to_vec()));
        }
        for c in self.engine.drain_cycles() {
            self.completions.entry(c.owner.clone()).or_default().push_back(c);
        }
        self.report.server_log.extend(self.engine.drain_log());
        self.engine
            .session()
            .check_invariants()
            .map_err(|reason| SimError::Invariant { at: now, reason })?;
        if !self.tick_armed && !self.engine.is_idle() {
            let dt = self.cfg.engine.tick.as_nanos();
            let k = now.as_nanos() / dt + 1;
            let at = Duration::from_nanos((k * dt) as u64);
            self.tick_armed = true;
            self.schedule(at, Event::Tick);
        }
        Ok(())
    }

    fn at_client(&mut self, i: usize, line: Vec<u8>, now: Duration) {
        let c = &mut self.clients[i];
        if c.closed {
            return;
        }
        let text = String::from_utf8_lossy(line.strip_suffix(b"\n").unwrap_or(&line)).into_owned();
        self.report.client_frames.push((now, c.id.to_string(), text));
        let Ok(msg) = decode(&line) else {
            return;
        };
        let mut unblock = false;
        let own_active = matches!(&msg, WireMessage::UserStatus { client, status: UserStatus::Active } if client == c.id.as_str());
        match &msg {
            WireMessage::Handshake(_) => {
                if c.block == Some(Block::Handshake) {
                    c.block = None;
                    unblock = true;
                }
            }
            WireMessage::Error { code, .. } => {
                if c.unclassified.pop_front().is_some() {
                    self.report.rejections.push(Rejection {
                        client: c.id.to_string(),
                        at: now,
                        code: code.clone(),
                    });
                }
                unblock = c.block == Some(Block::Await) && !c.outstanding();
            }
            WireMessage::UserStatus { client, status } if client == c.id.as_str() => {
                if matches!(status, UserStatus::Active | UserStatus::Queued(_)) && c.accepted.is_none() {
                    c.accepted = c.unclassified.pop_front();
                }
            }
            WireMessage::Feedback { reached: true, joints } if c.last_was_own_active => {
                if let Some(sub) = c.accepted.take() {
                    let done = self
                        .completions
                        .get_mut(&c.id)
                        .and_then(VecDeque::pop_front)
                        .expect("server journals a cycle before emitting its terminal frame");
                    debug_assert_eq!(done.feedback, *joints);
                    let ts = CycleTimestamps {
                        request_sent: sub.request_sent,
                        connection_open: sub.connection_open,
                        processing_start: done.received_at,
                        processing_end: done.completed_at,
                        response_received: now,
                    };
                    let record = measure_cycle(&ts, sub.bytes_out as u64, line.len() as u64, self.profile.bandwidth_bps)
                        .expect("simulated timestamps are monotone");
                    self.report.cycles.push(CycleReport {
                        client: c.id.to_string(),
                        ticket: done.ticket,
                        setpoint: sub.setpoint,
                        feedback: *joints,
                        timestamps: ts,
                        record,
                        propagation: self.profile.one_way_propagation.as_secs_f64(),
                    });
                    unblock = c.block == Some(Block::Await) && !c.outstanding();
                }
            }
            WireMessage::Pong(n) => {
                if let Some(Block::Ping { nonce, sent }) = c.block {
                    if nonce == *n {
                        c.block = None;
                        self.report.pings.push(PingSample {
                            client: c.id.to_string(),
                            nonce,
                            sent_at: sent,
                            rtt: Some(now - sent),
                        });
                        unblock = true;
                    }
                }
            }
            _ => {}
        }
        c.last_was_own_active = own_active;
        if unblock {
            if c.block == Some(Block::Await) {
                c.block = None;
            }
            self.schedule(now, Event::Wake(i));
        }
    }
}
