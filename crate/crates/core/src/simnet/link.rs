use std::path::Path;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SimError;

/// A simulated network condition between one client and the server.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkProfile {
    pub name: String,
    pub one_way_propagation: Duration,
    /// Link speed in bits per second.
    pub bandwidth_bps: f64,
    /// Cost of opening a request, paid before each command frame enters the link.
    pub setup_delay: Duration,
    /// Upper bound of the uniform per-frame jitter draw.
    pub jitter: Duration,
}

impl LinkProfile {
    pub fn new(name: impl Into<String>, one_way_propagation: Duration, bandwidth_bps: f64) -> Self {
        Self {
            name: name.into(),
            one_way_propagation,
            bandwidth_bps,
            setup_delay: Duration::ZERO,
            jitter: Duration::ZERO,
        }
    }

    pub fn with_setup_delay(mut self, d: Duration) -> Self {
        self.setup_delay = d;
        self
    }

    pub fn with_jitter(mut self, d: Duration) -> Self {
        self.jitter = d;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.bandwidth_bps.is_finite() && self.bandwidth_bps > 0.0) {
            return Err(SimError::Profile(format!(
                "{}: bandwidth must be > 0, got {}",
                self.name, self.bandwidth_bps
            )));
        }
        if self.name.is_empty() || self.name.contains(|c: char| c.is_whitespace() || c == ',') {
            return Err(SimError::Profile(format!("bad profile name {:?}", self.name)));
        }
        Ok(())
    }

    /// Time to clock `bytes` onto the link.
    pub fn transmission_time(&self, bytes: usize) -> Duration {
        Duration::from_secs_f64(8.0 * bytes as f64 / self.bandwidth_bps)
    }

    /// Delivery instant of a frame handed to the link at `now`, given a jitter draw.
    pub fn delivery_time(&self, frame_bytes: usize, now: Duration, jitter_draw: Duration) -> Duration {
        now + self.one_way_propagation + self.transmission_time(frame_bytes) + jitter_draw
    }

    pub fn from_toml_str(s: &str) -> Result<Self, SimError> {
        let f: ProfileFile = toml::from_str(s).map_err(|e| SimError::Profile(e.to_string()))?;
        let ms = |v: f64, key: &str| {
            if v.is_finite() && v >= 0.0 {
                Ok(Duration::from_secs_f64(v / 1e3))
            } else {
                Err(SimError::Profile(format!("{key} must be >= 0, got {v}")))
            }
        };
        let p = LinkProfile {
            name: f.name,
            one_way_propagation: ms(f.one_way_propagation_ms, "one_way_propagation_ms")?,
            bandwidth_bps: f.bandwidth_bps,
            setup_delay: ms(f.setup_delay_ms, "setup_delay_ms")?,
            jitter: ms(f.jitter_ms, "jitter_ms")?,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Io(path.display().to_string(), e))?;
        Self::from_toml_str(&text)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileFile {
    name: String,
    one_way_propagation_ms: f64,
    bandwidth_bps: f64,
    #[serde(default)]
    setup_delay_ms: f64,
    #[serde(default)]
    jitter_ms: f64,
}

/// One direction of a simulated connection. Frames never overtake each other.
#[derive(Debug)]
pub struct SimLink {
    profile: LinkProfile,
    rng: ChaCha8Rng,
    last_delivery: Duration,
}

impl SimLink {
    pub fn new(profile: LinkProfile, seed: u64) -> Self {
        Self {
            profile,
            rng: ChaCha8Rng::seed_from_u64(seed),
            last_delivery: Duration::ZERO,
        }
    }

    pub fn profile(&self) -> &LinkProfile {
        &self.profile
    }

    /// Schedules a frame handed over at `now` and returns its delivery instant.
    pub fn transmit(&mut self, frame_bytes: usize, now: Duration) -> Duration {
        let jitter_ns = self.profile.jitter.as_nanos() as u64;
        let draw = if jitter_ns == 0 {
            Duration::ZERO
        } else {
            Duration::from_nanos(self.rng.random_range(0..=jitter_ns))
        };
        let at = self
            .profile
            .delivery_time(frame_bytes, now, draw)
            .max(self.last_delivery);
        self.last_delivery = at;
        at
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_profile_delivers_now() {
        let p = LinkProfile::new("zero", Duration::ZERO, f64::INFINITY);
        let now = Duration::from_millis(1234);
        assert_eq!(p.delivery_time(500, now, Duration::ZERO), now);
    }

    #[test]
    fn serialization_delay_9600() {
        let p = LinkProfile::new("slow", Duration::ZERO, 9600.0);
        assert_eq!(
            p.delivery_time(120, Duration::ZERO, Duration::ZERO),
            Duration::from_millis(100)
        );
    }

    #[test]
    fn jitter_is_seeded() {
        let p = LinkProfile::new("j", Duration::from_millis(1), 1e6).with_jitter(Duration::from_millis(3));
        let run = |seed| {
            let mut l = SimLink::new(p.clone(), seed);
            (0..100u64)
                .map(|i| l.transmit(20, Duration::from_millis(i * 10)))
                .collect::<Vec<_>>()
        };
        assert_eq!(run(7), run(7));
        assert_ne!(run(7), run(8));
    }

    #[test]
    fn fifo_under_jitter() {
        let p = LinkProfile::new("j", Duration::ZERO, 1e9).with_jitter(Duration::from_millis(50));
        let mut l = SimLink::new(p, 1);
        let mut last = Duration::ZERO;
        for i in 0..1000u64 {
            let at = l.transmit(10, Duration::from_micros(i * 100));
            assert!(at >= last);
            last = at;
        }
    }

    #[test]
    fn profile_file() {
        let p = LinkProfile::from_toml_str(
            "name = \"wan\"\none_way_propagation_ms = 12.5\nbandwidth_bps = 1e6\njitter_ms = 1\n",
        )
        .unwrap();
        assert_eq!(p.one_way_propagation, Duration::from_micros(12_500));
        assert_eq!(p.setup_delay, Duration::ZERO);
        assert_eq!(p.jitter, Duration::from_millis(1));
        assert!(LinkProfile::from_toml_str("name = \"x\"\none_way_propagation_ms = 1\nbandwidth_bps = 0\n").is_err());
        assert!(LinkProfile::from_toml_str("name = \"x\"\none_way_propagation_ms = -1\nbandwidth_bps = 10\n").is_err());
    }
}
