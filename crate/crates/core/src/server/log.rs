use std::fmt;
use std::str::FromStr;
use std::time::Duration;

/// Peer column value for frames fanned out to every client.
pub const BROADCAST_PEER: &str = "*";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    In,
    Out,
}

/// One logged frame: `<seconds> <in|out> <peer> <frame>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WireLogEntry {
    pub at: Duration,
    pub direction: Direction,
    pub peer: String,
    /// Frame text without its trailing newline.
    pub frame: String,
}

impl fmt::Display for WireLogEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dir = match self.direction {
            Direction::In => "in",
            Direction::Out => "out",
        };
        write!(
            f,
            "{}.{:09} {dir} {} {}",
            self.at.as_secs(),
            self.at.subsec_nanos(),
            self.peer,
            self.frame
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed wire log line: {0}")]
pub struct LogParseError(String);

impl FromStr for WireLogEntry {
    type Err = LogParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || LogParseError(s.to_string());
        let mut parts = s.splitn(4, ' ');
        let (Some(ts), Some(dir), Some(peer)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(bad());
        };
        let frame = parts.next().unwrap_or("").to_string();
        let (secs, nanos) = ts.split_once('.').ok_or_else(bad)?;
        if nanos.len() != 9 {
            return Err(bad());
        }
        let at = Duration::new(
            secs.parse().map_err(|_| bad())?,
            nanos.parse().map_err(|_| bad())?,
        );
        let direction = match dir {
            "in" => Direction::In,
            "out" => Direction::Out,
            _ => return Err(bad()),
        };
        Ok(Self {
            at,
            direction,
            peer: peer.to_string(),
            frame,
        })
    }
}
