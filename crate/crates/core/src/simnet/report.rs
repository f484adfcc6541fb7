use std::fmt::Write as _;
use std::io;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::link::LinkProfile;
use super::SimError;
use crate::latency::{summarize, CycleTimestamps, LatencyRecord, LatencySummary};
use crate::protocol::WireJoints;
use crate::server::WireLogEntry;

#[derive(Debug, Clone, PartialEq)]
pub struct CycleReport {
    pub client: String,
    pub ticket: u64,
    pub setpoint: WireJoints,
    pub feedback: WireJoints,
    pub timestamps: CycleTimestamps,
    pub record: LatencyRecord,
    /// One-way propagation of the link, in seconds. Not a model term.
    pub propagation: f64,
}

impl CycleReport {
    /// Model prediction plus the propagation paid in both directions.
    pub fn expected_with_propagation(&self) -> f64 {
        self.record.predicted() + 2.0 * self.propagation
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PingSample {
    pub client: String,
    pub nonce: u64,
    pub sent_at: Duration,
    /// `None` when the pong did not arrive within the timeout.
    pub rtt: Option<Duration>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub client: String,
    pub at: Duration,
    pub code: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub profile: LinkProfile,
    pub seed: u64,
    pub cycles: Vec<CycleReport>,
    pub pings: Vec<PingSample>,
    pub rejections: Vec<Rejection>,
    pub server_log: Vec<WireLogEntry>,
    /// Every frame as received by a client: (arrival, client, frame).
    pub client_frames: Vec<(Duration, String, String)>,
    pub end_time: Duration,
}

impl RunReport {
    pub fn new(profile: &LinkProfile, seed: u64) -> Self {
        Self {
            profile: profile.clone(),
            seed,
            cycles: Vec::new(),
            pings: Vec::new(),
            rejections: Vec::new(),
            server_log: Vec::new(),
            client_frames: Vec::new(),
            end_time: Duration::ZERO,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty() && self.pings.is_empty() && self.client_frames.is_empty()
    }

    pub fn records(&self) -> Vec<LatencyRecord> {
        self.cycles.iter().map(|c| c.record).collect()
    }

    /// Answered ping round trips in seconds.
    pub fn ping_rtts(&self) -> Vec<f64> {
        self.pings.iter().filter_map(|p| p.rtt).map(|d| d.as_secs_f64()).collect()
    }

    pub fn ping_timeouts(&self) -> usize {
        self.pings.iter().filter(|p| p.rtt.is_none()).count()
    }

    pub fn summary(&self) -> Result<LatencySummary, SimError> {
        Ok(summarize(&self.records(), &self.ping_rtts())?)
    }

    /// Full deterministic dump; equal runs give equal text.
    pub fn to_text(&self) -> String {
        let p = &self.profile;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "profile {} prop={:?} bw={} setup={:?} jitter={:?} seed={}",
            p.name, p.one_way_propagation, p.bandwidth_bps, p.setup_delay, p.jitter, self.seed
        );
        for c in &self.cycles {
            let r = &c.record;
            let _ = writeln!(
                s,
                "cycle {} #{} S[{}] F[{}] t_p={:.9} sum_d={} t_c={:.9} t_r={:.9} pred={:.9}",
                c.client,
                c.ticket,
                join(&c.setpoint.0),
                join(&c.feedback.0),
                r.t_p,
                r.sum_d,
                r.t_c,
                r.t_r,
                r.predicted()
            );
        }
        for ping in &self.pings {
            let _ = writeln!(s, "ping {} {} {:?} {:?}", ping.client, ping.nonce, ping.sent_at, ping.rtt);
        }
        for r in &self.rejections {
            let _ = writeln!(s, "reject {} {:?} {}", r.client, r.at, r.code);
        }
        for e in &self.server_log {
            let _ = writeln!(s, "server {e}");
        }
        for (at, who, frame) in &self.client_frames {
            let _ = writeln!(s, "client {:.9} {who} {frame}", at.as_secs_f64());
        }
        let _ = writeln!(s, "end {:.9}", self.end_time.as_secs_f64());
        s
    }
}

fn join(v: &[i32]) -> String {
    v.iter().map(i32::to_string).collect::<Vec<_>>().join(" ")
}

/// One condition of the comparison table. Missing values are NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub profile: String,
    pub n: usize,
    pub rtt_mean_ms: f64,
    pub tr_mean_s: f64,
    pub tr_p95_s: f64,
    pub tr_pred_mean_s: f64,
    /// Mean of measured minus predicted response time.
    pub residual_mean_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub rows: Vec<TableRow>,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

pub fn emit_table(reports: &[RunReport]) -> Result<Table, SimError> {
    if reports.is_empty() {
        return Err(SimError::EmptyReports);
    }
    let rows = reports
        .iter()
        .map(|r| {
            let recs = r.records();
            let rtts = r.ping_rtts();
            let (tr_mean, tr_p95) = match summarize(&recs, &rtts) {
                Ok(s) => (s.mean, s.p95),
                Err(_) => (f64::NAN, f64::NAN),
            };
            TableRow {
                profile: r.profile.name.clone(),
                n: recs.len(),
                rtt_mean_ms: mean(rtts.iter().map(|x| x * 1e3)),
                tr_mean_s: tr_mean,
                tr_p95_s: tr_p95,
                tr_pred_mean_s: mean(recs.iter().map(LatencyRecord::predicted)),
                residual_mean_ms: mean(recs.iter().map(|x| x.residual() * 1e3)),
            }
        })
        .collect();
    Ok(Table { rows })
}

impl Table {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<12} {:>4} {:>12} {:>11} {:>10} {:>11} {:>13}",
            "condition", "n", "ping RTT ms", "cycle s", "p95 s", "model s", "residual ms"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<12} {:>4} {:>12.3} {:>11.3} {:>10.3} {:>11.3} {:>13.3}",
                r.profile, r.n, r.rtt_mean_ms, r.tr_mean_s, r.tr_p95_s, r.tr_pred_mean_s, r.residual_mean_ms
            );
        }
        s.push_str("residual = measured - model; it includes propagation, which the model omits.\n");
        s.push_str("host CPU contention is not simulated.\n");
        s
    }

    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), SimError> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| SimError::Io("csv output".into(), e))?;
        Ok(())
    }

    pub fn read_csv<R: io::Read>(input: R) -> Result<Self, SimError> {
        let mut r = csv::Reader::from_reader(input);
        let rows = r.deserialize().collect::<Result<Vec<TableRow>, _>>()?;
        Ok(Self { rows })
    }
}
