//! Line-oriented client scripts.
//!
//! ```text
//! # comment
//! seed 42
//! 0.0   op1 connect
//! 0.5   op1 submit 90 0 0 0 0
//! 0.5   op1 await
//! 4.0   op1 ping
//! 5.0   op1 disconnect
//! ```
//!
//! Times are seconds of virtual time. An action runs at its time or, if the
//! client is still blocked on an earlier `connect`, `await` or `ping`, as
//! soon as it unblocks.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::time::Duration;

use thiserror::Error;

use crate::arm::{JointVector, JOINT_COUNT};
use crate::protocol::WireJoints;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("script line {line}: {reason}")]
pub struct ScriptError {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Connect { host: Option<String> },
    /// Setpoint in degrees, sent as-is; the server clamps to joint limits.
    Submit(JointVector),
    /// Block until every accepted or unanswered submission is resolved.
    Await,
    Ping,
    Disconnect,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Connect { host: None } => f.write_str("connect"),
            Action::Connect { host: Some(h) } => write!(f, "connect {h}"),
            Action::Submit(j) => {
                f.write_str("submit")?;
                for a in j.iter() {
                    write!(f, " {a}")?;
                }
                Ok(())
            }
            Action::Await => f.write_str("await"),
            Action::Ping => f.write_str("ping"),
            Action::Disconnect => f.write_str("disconnect"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScriptStep {
    pub at: Duration,
    pub client: String,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScenarioScript {
    pub seed: u64,
    pub steps: Vec<ScriptStep>,
}

fn valid_token(s: &str) -> bool {
    !s.is_empty() && s != "*" && s.bytes().all(|b| b.is_ascii_graphic())
}

impl ScenarioScript {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            steps: Vec::new(),
        }
    }

    pub fn push(&mut self, at: Duration, client: &str, action: Action) -> &mut Self {
        self.steps.push(ScriptStep {
            at,
            client: client.to_string(),
            action,
        });
        self
    }

    pub fn parse(text: &str) -> Result<Self, ScriptError> {
        let mut script = ScenarioScript::default();
        let mut lines = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: String| ScriptError { line: lineno, reason };
            let f: Vec<&str> = line.split_whitespace().collect();
            if f[0] == "seed" {
                if f.len() != 2 {
                    return Err(err("seed takes one integer".into()));
                }
                script.seed = f[1].parse().map_err(|_| err(format!("bad seed {:?}", f[1])))?;
                continue;
            }
            if f.len() < 3 {
                return Err(err("expected `<t> <client> <action> [args]`".into()));
            }
            let t: f64 = f[0].parse().map_err(|_| err(format!("bad time {:?}", f[0])))?;
            if !(t.is_finite() && t >= 0.0) {
                return Err(err(format!("time must be >= 0, got {t}")));
            }
            if !valid_token(f[1]) {
                return Err(err(format!("bad client name {:?}", f[1])));
            }
            let args = &f[3..];
            let arity = |n: usize| {
                if args.len() == n {
                    Ok(())
                } else {
                    Err(err(format!("{} takes {n} argument(s), got {}", f[2], args.len())))
                }
            };
            let action = match f[2] {
                "connect" => match args {
                    [] => Action::Connect { host: None },
                    [h] if valid_token(h) => Action::Connect {
                        host: Some(h.to_string()),
                    },
                    _ => return Err(err("connect takes an optional host token".into())),
                },
                "submit" => {
                    arity(JOINT_COUNT)?;
                    let mut j = [0.0; JOINT_COUNT];
                    for (slot, a) in j.iter_mut().zip(args) {
                        *slot = a.parse().map_err(|_| err(format!("bad angle {a:?}")))?;
                    }
                    Action::Submit(JointVector(j))
                }
                "await" => {
                    arity(0)?;
                    Action::Await
                }
                "ping" => {
                    arity(0)?;
                    Action::Ping
                }
                "disconnect" => {
                    arity(0)?;
                    Action::Disconnect
                }
                other => return Err(err(format!("unknown action {other:?}"))),
            };
            lines.push(lineno);
            script.steps.push(ScriptStep {
                at: Duration::from_secs_f64(t),
                client: f[1].to_string(),
                action,
            });
        }
        script.check(&lines)?;
        Ok(script)
    }

    /// Checks per-client well-formedness.
    pub fn validate(&self) -> Result<(), ScriptError> {
        let lines: Vec<usize> = (1..=self.steps.len()).collect();
        self.check(&lines)
    }

    fn check(&self, lines: &[usize]) -> Result<(), ScriptError> {
        #[derive(PartialEq)]
        enum St {
            New,
            Up,
            Gone,
        }
        let mut seen: BTreeMap<&str, (St, Duration)> = BTreeMap::new();
        for (step, &line) in self.steps.iter().zip(lines) {
            let err = |reason: String| ScriptError { line, reason };
            if !valid_token(&step.client) {
                return Err(err(format!("bad client name {:?}", step.client)));
            }
            let (st, last) = seen.entry(&step.client).or_insert((St::New, Duration::ZERO));
            if step.at < *last {
                return Err(err(format!("time goes backwards for {}", step.client)));
            }
            *last = step.at;
            match (&*st, &step.action) {
                (St::Gone, _) => return Err(err(format!("{} acts after disconnect", step.client))),
                (St::New, Action::Connect { .. }) => *st = St::Up,
                (St::New, _) => return Err(err(format!("{} acts before connect", step.client))),
                (St::Up, Action::Connect { .. }) => {
                    return Err(err(format!("{} connects twice", step.client)))
                }
                (St::Up, Action::Disconnect) => *st = St::Gone,
                (St::Up, Action::Submit(j)) => {
                    WireJoints::from_angles(j).map_err(|e| err(e.to_string()))?;
                }
                (St::Up, _) => {}
            }
        }
        Ok(())
    }

    /// Number of distinct clients, in order of first appearance.
    pub fn clients(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for s in &self.steps {
            if !out.contains(&s.client.as_str()) {
                out.push(&s.client);
            }
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("seed {}\n", self.seed);
        for step in &self.steps {
            let _ = writeln!(s, "{} {} {}", step.at.as_secs_f64(), step.client, step.action);
        }
        s
    }

    /// One operator: ten pings, then five round trips of the reference task.
    pub fn table1(seed: u64) -> Self {
        let mut s = ScenarioScript::new(seed);
        let zero = Duration::ZERO;
        s.push(zero, "op1", Action::Connect { host: None });
        for _ in 0..10 {
            s.push(zero, "op1", Action::Ping);
        }
        for _ in 0..5 {
            s.push(zero, "op1", Action::Submit(JointVector([90.0, 0.0, 0.0, 0.0, 0.0])));
            s.push(zero, "op1", Action::Await);
            s.push(zero, "op1", Action::Submit(JointVector::ZERO));
            s.push(zero, "op1", Action::Await);
        }
        s
    }
}
