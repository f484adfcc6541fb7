//! Response-time decomposition of a teleoperation cycle.
//!
//! A cycle's response time is modelled as
//! `t_r = t_p + sum_D / v_l + t_c`: request processing (including arm
//! motion), transfer of all bytes sent and received over the link speed, and
//! connection setup. Propagation delay is not part of the model; callers
//! that know it report it as a residual.

mod ping;

pub use ping::{null_link, ping, EchoLink, NullLink, TcpEchoLink, DEFAULT_PING_TIMEOUT};

use std::io;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LatencyError {
    #[error("link speed must be positive, got {0}")]
    Domain(f64),
    #[error("negative or non-finite term {0}")]
    NegativeTerm(&'static str),
    #[error("cycle timestamps are not monotone")]
    NonMonotoneTimestamps,
    #[error("no pong within {0:?}")]
    PingTimeout(Duration),
    #[error("cannot summarize an empty sample")]
    EmptySample,
    #[error("transport error: {0}")]
    Io(#[from] io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Predicted response time in seconds.
pub fn predict_response(t_p: f64, sum_d_bits: f64, v_l: f64, t_c: f64) -> Result<f64, LatencyError> {
    if !(v_l > 0.0) || !v_l.is_finite() {
        return Err(LatencyError::Domain(v_l));
    }
    for (name, v) in [("t_p", t_p), ("sum_D", sum_d_bits), ("t_c", t_c)] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(LatencyError::NegativeTerm(name));
        }
    }
    Ok(t_p + sum_d_bits / v_l + t_c)
}

/// One cycle decomposed into the model's terms. Times in seconds, data in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyRecord {
    pub t_p: f64,
    pub sum_d: f64,
    pub v_l: f64,
    pub t_c: f64,
    /// Measured total response time.
    pub t_r: f64,
}

impl LatencyRecord {
    pub fn predicted(&self) -> f64 {
        self.t_p + self.sum_d / self.v_l + self.t_c
    }

    /// Measured minus predicted response time.
    pub fn residual(&self) -> f64 {
        self.t_r - self.predicted()
    }
}

/// Instants marking one request cycle, all on the same clock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CycleTimestamps {
    pub request_sent: Duration,
    pub connection_open: Duration,
    pub processing_start: Duration,
    pub processing_end: Duration,
    pub response_received: Duration,
}

pub fn measure_cycle(
    ts: &CycleTimestamps,
    bytes_out: u64,
    bytes_in: u64,
    v_l: f64,
) -> Result<LatencyRecord, LatencyError> {
    let order = [
        ts.request_sent,
        ts.connection_open,
        ts.processing_start,
        ts.processing_end,
        ts.response_received,
    ];
    if order.windows(2).any(|w| w[1] < w[0]) {
        return Err(LatencyError::NonMonotoneTimestamps);
    }
    if !(v_l > 0.0) || !v_l.is_finite() {
        return Err(LatencyError::Domain(v_l));
    }
    Ok(LatencyRecord {
        t_p: (ts.processing_end - ts.processing_start).as_secs_f64(),
        sum_d: 8.0 * (bytes_out + bytes_in) as f64,
        v_l,
        t_c: (ts.connection_open - ts.request_sent).as_secs_f64(),
        t_r: (ts.response_received - ts.request_sent).as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Nearest-rank 95th percentile.
    pub p95: f64,
    /// Mean ping round trip in seconds, if any pings were answered.
    pub rtt_mean: Option<f64>,
}

pub fn summarize(records: &[LatencyRecord], ping_rtts: &[f64]) -> Result<LatencySummary, LatencyError> {
    if records.is_empty() {
        return Err(LatencyError::EmptySample);
    }
    let mut t: Vec<f64> = records.iter().map(|r| r.t_r).collect();
    t.sort_by(f64::total_cmp);
    let n = t.len();
    let mean = t.iter().sum::<f64>() / n as f64;
    let rank = ((0.95 * n as f64).ceil() as usize).clamp(1, n);
    let rtt_mean = (!ping_rtts.is_empty()).then(|| ping_rtts.iter().sum::<f64>() / ping_rtts.len() as f64);
    Ok(LatencySummary {
        count: n,
        // clamp guards the summation rounding on identical samples
        mean: mean.clamp(t[0], t[n - 1]),
        min: t[0],
        max: t[n - 1],
        p95: t[rank - 1],
        rtt_mean,
    })
}

/// One row of the summary CSV export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub profile: String,
    pub n: usize,
    pub rtt_mean_ms: f64,
    pub tr_mean_s: f64,
    pub tr_p95_s: f64,
}

impl SummaryRow {
    pub fn new(profile: impl Into<String>, s: &LatencySummary) -> Self {
        Self {
            profile: profile.into(),
            n: s.count,
            rtt_mean_ms: s.rtt_mean.map_or(f64::NAN, |r| r * 1e3),
            tr_mean_s: s.mean,
            tr_p95_s: s.p95,
        }
    }
}

/// Writes the `profile,n,rtt_mean_ms,tr_mean_s,tr_p95_s` CSV.
pub fn write_summary_csv<W: io::Write>(out: W, rows: &[SummaryRow]) -> Result<(), LatencyError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary_csv<R: io::Read>(input: R) -> Result<Vec<SummaryRow>, LatencyError> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(LatencyError::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ms(v: u64) -> Duration {
        Duration::from_millis(v)
    }

    #[test]
    fn predict_zero() {
        assert_eq!(predict_response(0.0, 0.0, 9600.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn predict_reference() {
        let v = predict_response(3.0, 9600.0, 9600.0, 0.1).unwrap();
        assert!((v - 4.1).abs() < 1e-12);
    }

    #[test]
    fn predict_domain_errors() {
        assert!(matches!(predict_response(0.0, 0.0, 0.0, 0.0), Err(LatencyError::Domain(_))));
        assert!(matches!(predict_response(0.0, 0.0, -5.0, 0.0), Err(LatencyError::Domain(_))));
        assert!(matches!(
            predict_response(-1.0, 0.0, 1.0, 0.0),
            Err(LatencyError::NegativeTerm("t_p"))
        ));
    }

    #[test]
    fn measure_all_equal() {
        let ts = CycleTimestamps::default();
        let r = measure_cycle(&ts, 0, 0, 9600.0).unwrap();
        assert_eq!((r.t_p, r.sum_d, r.t_c, r.t_r), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn measure_reference_terms() {
        let ts = CycleTimestamps {
            request_sent: ms(0),
            connection_open: ms(50),
            processing_start: ms(100),
            processing_end: ms(3100),
            response_received: ms(3200),
        };
        let r = measure_cycle(&ts, 40, 80, 9600.0).unwrap();
        assert!((r.t_c - 0.05).abs() < 1e-12);
        assert!((r.t_p - 3.0).abs() < 1e-12);
        assert_eq!(r.sum_d, 960.0);
        assert!((r.predicted() - 3.15).abs() < 1e-12);
        assert!((r.t_r - 3.2).abs() < 1e-12);
    }

    #[test]
    fn measure_rejects_non_monotone() {
        let ts = CycleTimestamps {
            request_sent: ms(10),
            connection_open: ms(5),
            ..Default::default()
        };
        assert!(matches!(
            measure_cycle(&ts, 0, 0, 1.0),
            Err(LatencyError::NonMonotoneTimestamps)
        ));
    }

    fn rec(t_r: f64) -> LatencyRecord {
        LatencyRecord {
            t_p: t_r,
            sum_d: 0.0,
            v_l: 1.0,
            t_c: 0.0,
            t_r,
        }
    }

    #[test]
    fn summarize_cycle_values() {
        let s = summarize(&[rec(3.0), rec(3.1), rec(3.1)], &[]).unwrap();
        assert!((s.mean - 3.0666666666666667).abs() < 1e-12);
        assert_eq!((s.min, s.max, s.p95), (3.0, 3.1, 3.1));
        assert_eq!(s.rtt_mean, None);
    }

    #[test]
    fn summarize_single() {
        let s = summarize(&[rec(2.5)], &[0.001]).unwrap();
        assert_eq!((s.min, s.mean, s.max, s.p95), (2.5, 2.5, 2.5, 2.5));
        assert_eq!(s.rtt_mean, Some(0.001));
    }

    #[test]
    fn summarize_empty() {
        assert!(matches!(summarize(&[], &[1.0]), Err(LatencyError::EmptySample)));
    }

    #[test]
    fn p95_nearest_rank() {
        let recs: Vec<_> = (1..=20).map(|i| rec(i as f64)).collect();
        // ceil(0.95 * 20) = 19
        assert_eq!(summarize(&recs, &[]).unwrap().p95, 19.0);
        let recs: Vec<_> = (1..=21).map(|i| rec(i as f64)).collect();
        // ceil(0.95 * 21) = 20
        assert_eq!(summarize(&recs, &[]).unwrap().p95, 20.0);
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![SummaryRow {
            profile: "Local".into(),
            n: 10,
            rtt_mean_ms: 1.0004,
            tr_mean_s: 3.0051,
            tr_p95_s: 3.01,
        }];
        let mut buf = Vec::new();
        write_summary_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("profile,n,rtt_mean_ms,tr_mean_s,tr_p95_s\n"));
        assert_eq!(read_summary_csv(&buf[..]).unwrap(), rows);
    }

    /// Independent evaluation: integer-scaled arithmetic in a different order.
    fn oracle(t_p: f64, d: f64, v: f64, t_c: f64) -> f64 {
        let transfer = d * (1.0 / v);
        (t_c + transfer) + t_p
    }

    proptest! {
        #[test]
        fn predict_matches_oracle(t_p in 0.0f64..100.0, d in 0.0f64..1e7, v in 1.0f64..1e9, t_c in 0.0f64..10.0) {
            let a = predict_response(t_p, d, v, t_c).unwrap();
            let b = oracle(t_p, d, v, t_c);
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }

        #[test]
        fn predict_is_monotone(t_p in 0.0f64..10.0, d in 0.0f64..1e6, v in 100.0f64..1e8, t_c in 0.0f64..1.0, bump in 1e-3f64..1.0) {
            let base = predict_response(t_p, d, v, t_c).unwrap();
            prop_assert!(predict_response(t_p + bump, d, v, t_c).unwrap() > base);
            prop_assert!(predict_response(t_p, d + bump * 1e3, v, t_c).unwrap() > base);
            prop_assert!(predict_response(t_p, d, v, t_c + bump).unwrap() > base);
            if d >= 1.0 {
                prop_assert!(predict_response(t_p, d, v * (1.0 + bump), t_c).unwrap() < base);
            }
        }

        #[test]
        fn summary_ordering(vals in proptest::collection::vec(0.0f64..10.0, 1..50)) {
            let recs: Vec<_> = vals.iter().map(|v| rec(*v)).collect();
            let s = summarize(&recs, &[]).unwrap();
            prop_assert!(s.min <= s.mean && s.mean <= s.max);
            prop_assert!(s.min <= s.p95 && s.p95 <= s.max);
        }
    }
}
