//! Symbol-prefixed line protocol spoken between operators and the robot
//! server.
//!
//! Every frame is one ASCII line: a single prefix character, then
//! space-separated fields, then `\n`. Joint angles travel as signed integer
//! tenths of a degree. `PROTOCOL.md` at the repository root is the normative
//! grammar; this module is its reference codec.

mod framing;

pub use framing::{FramingError, LineFramer, MAX_LINE_LEN};

use std::fmt;

use thiserror::Error;

use crate::arm::{ArmConfig, JointVector, JOINT_COUNT};

/// Largest magnitude of a wire angle, in tenths of a degree.
pub const WIRE_ANGLE_LIMIT: i32 = 3600;

/// Every prefix symbol the grammar defines.
pub const PREFIXES: [char; 9] = ['S', 'F', 'N', 'H', 'U', 'P', 'p', 'E', 'C'];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("unknown prefix {0:?}")]
    UnknownPrefix(String),
    #[error("frame '{prefix}' expects {expected} fields, found {found}")]
    Arity {
        prefix: char,
        expected: &'static str,
        found: usize,
    },
    #[error("field {field}: cannot parse {value:?}")]
    Parse { field: &'static str, value: String },
    #[error("field {field}: value {value} out of range")]
    Range { field: &'static str, value: String },
    #[error("field {field}: strings must be non-empty printable ASCII without spaces")]
    InvalidField { field: &'static str },
}

impl CodecError {
    /// Short token used in `E` frames and logs.
    pub fn kind(&self) -> &'static str {
        match self {
            CodecError::UnknownPrefix(_) => "UNKNOWN_PREFIX",
            CodecError::Arity { .. } => "ARITY",
            CodecError::Parse { .. } => "PARSE",
            CodecError::Range { .. } => "RANGE",
            CodecError::InvalidField { .. } => "INVALID_FIELD",
        }
    }
}

/// Five joint angles in integer tenths of a degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct WireJoints(pub [i32; JOINT_COUNT]);

impl WireJoints {
    pub fn from_angles(j: &JointVector) -> Result<Self, CodecError> {
        let mut out = [0; JOINT_COUNT];
        for (o, a) in out.iter_mut().zip(j.iter()) {
            *o = angle_to_wire(a)?;
        }
        Ok(Self(out))
    }

    pub fn to_angles(&self) -> JointVector {
        JointVector(self.0.map(wire_to_angle))
    }

    pub fn validate(&self) -> Result<(), CodecError> {
        for v in self.0 {
            check_wire_angle("joint", v as i64)?;
        }
        Ok(())
    }
}

/// Converts degrees to tenths, rounding half away from zero.
pub fn angle_to_wire(a: f64) -> Result<i32, CodecError> {
    if !a.is_finite() || a.abs() > 360.0 {
        return Err(CodecError::Range {
            field: "angle",
            value: a.to_string(),
        });
    }
    // f64::round rounds half away from zero.
    Ok((a * 10.0).round() as i32)
}

pub fn wire_to_angle(i: i32) -> f64 {
    i as f64 / 10.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HostDirection {
    Join,
    Leave,
}

impl HostDirection {
    fn token(self) -> &'static str {
        match self {
            HostDirection::Join => "JOIN",
            HostDirection::Leave => "LEAVE",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UserStatus {
    Active,
    /// One-based position in the waiting queue.
    Queued(u32),
    Idle,
}

/// Arm geometry published to each operator on connect, all in tenths
/// (degrees, millimetres, degrees per second).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Handshake {
    pub client: String,
    pub limits: [(i32, i32); JOINT_COUNT],
    pub link_lengths: [u32; JOINT_COUNT],
    pub speeds: [u32; JOINT_COUNT],
}

impl Handshake {
    pub fn for_arm(client: impl Into<String>, cfg: &ArmConfig) -> Self {
        let tenths = |v: f64| (v * 10.0).round();
        Self {
            client: client.into(),
            limits: cfg
                .limits
                .map(|l| (tenths(l.min) as i32, tenths(l.max) as i32)),
            link_lengths: cfg.link_lengths.map(|v| tenths(v) as u32),
            speeds: cfg.speeds.map(|v| tenths(v) as u32),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum WireMessage {
    Setpoint(WireJoints),
    Feedback { joints: WireJoints, reached: bool },
    ClientCount(u32),
    HostEvent { direction: HostDirection, host: String },
    UserStatus { client: String, status: UserStatus },
    Ping(u64),
    Pong(u64),
    Error { code: String, detail: String },
    Handshake(Handshake),
}

impl WireMessage {
    pub fn prefix(&self) -> char {
        match self {
            WireMessage::Setpoint(_) => 'S',
            WireMessage::Feedback { .. } => 'F',
            WireMessage::ClientCount(_) => 'N',
            WireMessage::HostEvent { .. } => 'H',
            WireMessage::UserStatus { .. } => 'U',
            WireMessage::Ping(_) => 'P',
            WireMessage::Pong(_) => 'p',
            WireMessage::Error { .. } => 'E',
            WireMessage::Handshake(_) => 'C',
        }
    }

    pub fn error(code: &str, detail: &str) -> Self {
        WireMessage::Error {
            code: code.to_string(),
            detail: detail.to_string(),
        }
    }

    pub fn validate(&self) -> Result<(), CodecError> {
        match self {
            WireMessage::Setpoint(j) | WireMessage::Feedback { joints: j, .. } => j.validate(),
            WireMessage::ClientCount(_) | WireMessage::Ping(_) | WireMessage::Pong(_) => Ok(()),
            WireMessage::HostEvent { host, .. } => check_token("host", host),
            WireMessage::UserStatus { client, status } => {
                check_token("client", client)?;
                match status {
                    UserStatus::Queued(0) => Err(CodecError::Range {
                        field: "position",
                        value: "0".into(),
                    }),
                    _ => Ok(()),
                }
            }
            WireMessage::Error { code, detail } => {
                check_token("code", code)?;
                check_token("detail", detail)
            }
            WireMessage::Handshake(h) => {
                check_token("client", &h.client)?;
                for (lo, hi) in h.limits {
                    check_wire_angle("limit", lo as i64)?;
                    check_wire_angle("limit", hi as i64)?;
                }
                Ok(())
            }
        }
    }
}

/// Renders the frame without its trailing newline. Assumes a valid message.
impl fmt::Display for WireMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let joints = |f: &mut fmt::Formatter<'_>, j: &WireJoints| {
            j.0.iter().try_for_each(|v| write!(f, " {v}"))
        };
        write!(f, "{}", self.prefix())?;
        match self {
            WireMessage::Setpoint(j) => joints(f, j),
            WireMessage::Feedback { joints: j, reached } => {
                joints(f, j)?;
                write!(f, " {}", u8::from(*reached))
            }
            WireMessage::ClientCount(n) => write!(f, " {n}"),
            WireMessage::HostEvent { direction, host } => {
                write!(f, " {} {host}", direction.token())
            }
            WireMessage::UserStatus { client, status } => match status {
                UserStatus::Active => write!(f, " {client} ACTIVE"),
                UserStatus::Queued(n) => write!(f, " {client} QUEUED {n}"),
                UserStatus::Idle => write!(f, " {client} IDLE"),
            },
            WireMessage::Ping(n) | WireMessage::Pong(n) => write!(f, " {n}"),
            WireMessage::Error { code, detail } => write!(f, " {code} {detail}"),
            WireMessage::Handshake(h) => {
                write!(f, " {}", h.client)?;
                for (lo, hi) in h.limits {
                    write!(f, " {lo} {hi}")?;
                }
                h.link_lengths.iter().try_for_each(|v| write!(f, " {v}"))?;
                h.speeds.iter().try_for_each(|v| write!(f, " {v}"))
            }
        }
    }
}

/// Encodes one frame, newline included.
pub fn encode(m: &WireMessage) -> Result<Vec<u8>, CodecError> {
    m.validate()?;
    let mut line = m.to_string().into_bytes();
    line.push(b'\n');
    Ok(line)
}

/// Decodes one frame. A single trailing `\n` is accepted and ignored.
pub fn decode(line: &[u8]) -> Result<WireMessage, CodecError> {
    let line = line.strip_suffix(b"\n").unwrap_or(line);
    let text = std::str::from_utf8(line).map_err(|_| CodecError::Parse {
        field: "frame",
        value: String::from_utf8_lossy(line).into_owned(),
    })?;
    let mut tokens = text.split(' ');
    let head = tokens.next().unwrap_or("");
    let prefix = match head.chars().next() {
        Some(c) if head.len() == 1 && PREFIXES.contains(&c) => c,
        _ => return Err(CodecError::UnknownPrefix(head.to_string())),
    };
    let fields: Vec<&str> = tokens.collect();
    let arity = |expected: &'static str, ok: bool| {
        if ok {
            Ok(())
        } else {
            Err(CodecError::Arity {
                prefix,
                expected,
                found: fields.len(),
            })
        }
    };

    let msg = match prefix {
        'S' => {
            arity("5", fields.len() == JOINT_COUNT)?;
            WireMessage::Setpoint(parse_joints(&fields)?)
        }
        'F' => {
            arity("6", fields.len() == JOINT_COUNT + 1)?;
            let joints = parse_joints(&fields[..JOINT_COUNT])?;
            let reached = match fields[JOINT_COUNT] {
                "1" => true,
                "0" => false,
                other => {
                    return Err(CodecError::Parse {
                        field: "reached",
                        value: other.to_string(),
                    })
                }
            };
            WireMessage::Feedback { joints, reached }
        }
        'N' => {
            arity("1", fields.len() == 1)?;
            WireMessage::ClientCount(parse_bounded("count", fields[0], 0, u32::MAX as i128)? as u32)
        }
        'H' => {
            arity("2", fields.len() == 2)?;
            let direction = match fields[0] {
                "JOIN" => HostDirection::Join,
                "LEAVE" => HostDirection::Leave,
                other => {
                    return Err(CodecError::Parse {
                        field: "direction",
                        value: other.to_string(),
                    })
                }
            };
            WireMessage::HostEvent {
                direction,
                host: parse_token("host", fields[1])?,
            }
        }
        'U' => {
            arity("2 or 3", fields.len() == 2 || fields.len() == 3)?;
            let client = parse_token("client", fields[0])?;
            let status = match (fields[1], fields.len()) {
                ("ACTIVE", 2) => UserStatus::Active,
                ("IDLE", 2) => UserStatus::Idle,
                ("QUEUED", 3) => {
                    UserStatus::Queued(parse_bounded("position", fields[2], 1, u32::MAX as i128)? as u32)
                }
                ("ACTIVE" | "IDLE" | "QUEUED", _) => {
                    return Err(CodecError::Arity {
                        prefix,
                        expected: if fields[1] == "QUEUED" { "3" } else { "2" },
                        found: fields.len(),
                    })
                }
                (other, _) => {
                    return Err(CodecError::Parse {
                        field: "status",
                        value: other.to_string(),
                    })
                }
            };
            WireMessage::UserStatus { client, status }
        }
        'P' | 'p' => {
            arity("1", fields.len() == 1)?;
            let nonce = parse_bounded("nonce", fields[0], 0, u64::MAX as i128)? as u64;
            if prefix == 'P' {
                WireMessage::Ping(nonce)
            } else {
                WireMessage::Pong(nonce)
            }
        }
        'E' => {
            arity("2", fields.len() == 2)?;
            WireMessage::Error {
                code: parse_token("code", fields[0])?,
                detail: parse_token("detail", fields[1])?,
            }
        }
        'C' => {
            arity("21", fields.len() == 1 + 4 * JOINT_COUNT)?;
            let client = parse_token("client", fields[0])?;
            let ints = &fields[1..];
            let mut limits = [(0, 0); JOINT_COUNT];
            for (i, l) in limits.iter_mut().enumerate() {
                let lim = WIRE_ANGLE_LIMIT as i128;
                *l = (
                    parse_bounded("limit", ints[2 * i], -lim, lim)? as i32,
                    parse_bounded("limit", ints[2 * i + 1], -lim, lim)? as i32,
                );
            }
            let mut link_lengths = [0; JOINT_COUNT];
            let mut speeds = [0; JOINT_COUNT];
            for i in 0..JOINT_COUNT {
                link_lengths[i] =
                    parse_bounded("link_length", ints[2 * JOINT_COUNT + i], 0, u32::MAX as i128)? as u32;
                speeds[i] = parse_bounded("speed", ints[3 * JOINT_COUNT + i], 0, u32::MAX as i128)? as u32;
            }
            WireMessage::Handshake(Handshake {
                client,
                limits,
                link_lengths,
                speeds,
            })
        }
        _ => unreachable!("prefix checked against PREFIXES"),
    };
    Ok(msg)
}

fn check_wire_angle(field: &'static str, v: i64) -> Result<(), CodecError> {
    if v.abs() > WIRE_ANGLE_LIMIT as i64 {
        Err(CodecError::Range {
            field,
            value: v.to_string(),
        })
    } else {
        Ok(())
    }
}

fn is_token(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_graphic())
}

fn check_token(field: &'static str, s: &str) -> Result<(), CodecError> {
    if is_token(s) {
        Ok(())
    } else {
        Err(CodecError::InvalidField { field })
    }
}

fn parse_token(field: &'static str, s: &str) -> Result<String, CodecError> {
    if is_token(s) {
        Ok(s.to_string())
    } else {
        Err(CodecError::Parse {
            field,
            value: s.to_string(),
        })
    }
}

/// Parses a canonical decimal integer: optional `-`, no `+`, no leading
/// zeros and no `-0`.
fn parse_canonical(field: &'static str, s: &str) -> Result<i128, CodecError> {
    let digits = s.strip_prefix('-').unwrap_or(s);
    let canonical = !digits.is_empty()
        && digits.bytes().all(|b| b.is_ascii_digit())
        && (digits == "0" || !digits.starts_with('0'))
        && !(s.starts_with('-') && digits == "0");
    if !canonical {
        return Err(CodecError::Parse {
            field,
            value: s.to_string(),
        });
    }
    // More than 39 digits cannot fit any field; report it as a range fault.
    s.parse::<i128>().map_err(|_| CodecError::Range {
        field,
        value: s.to_string(),
    })
}

fn parse_bounded(field: &'static str, s: &str, lo: i128, hi: i128) -> Result<i128, CodecError> {
    let v = parse_canonical(field, s)?;
    if v < lo || v > hi {
        return Err(CodecError::Range {
            field,
            value: s.to_string(),
        });
    }
    Ok(v)
}

fn parse_joints(fields: &[&str]) -> Result<WireJoints, CodecError> {
    let mut out = [0; JOINT_COUNT];
    let lim = WIRE_ANGLE_LIMIT as i128;
    for (o, f) in out.iter_mut().zip(fields) {
        *o = parse_bounded("joint", f, -lim, lim)? as i32;
    }
    Ok(WireJoints(out))
}
