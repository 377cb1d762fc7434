//! Closed-loop latency and throughput harness for the simulated warehouse,
//! with and without the attestation proxy.

use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::client::RequestStream;
use crate::sim::{Deployment, HbwClient, SimConfig, SimError};

/// Published reference measurements (30 s runs on the original hardware).
/// They only give context for locally measured overheads.
pub mod reference {
    pub const UNATTESTED_LATENCY_MS: f64 = 0.1452;
    pub const ATTESTED_LATENCY_MS: f64 = 0.1903;
    pub const LATENCY_ERROR_MS: f64 = 0.0007;
    pub const UNATTESTED_MESSAGES: u64 = 191_250;
    pub const ATTESTED_MESSAGES: u64 = 145_054;
    pub const UNATTESTED_KB: f64 = 3_060.0;
    pub const ATTESTED_KB: f64 = 2_321.0;
}

pub const DEFAULT_DURATION: Duration = Duration::from_secs(30);

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("simulation failed: {0}")]
    Sim(#[from] SimError),
    #[error("no request completed")]
    NoSamples,
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: io::Error },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub attested: bool,
    /// Seconds.
    pub duration: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub mean_latency_ms: f64,
    /// Standard error of the mean.
    pub latency_stderr_ms: f64,
    pub p50_ms: f64,
    pub p99_ms: f64,
    /// Completed request/response pairs.
    pub messages: u64,
    /// Client wire bytes in both directions, length prefixes included, / 1000.
    pub kilobytes: f64,
    pub samples: Vec<f64>,
}

/// Nearest-rank percentile of ascending `sorted`.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

pub fn mean_and_stderr(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

impl BenchReport {
    pub fn from_samples(config: BenchConfig, samples: Vec<f64>, wire_bytes: u64) -> Result<Self, BenchError> {
        if samples.is_empty() {
            return Err(BenchError::NoSamples);
        }
        let (mean, stderr) = mean_and_stderr(&samples);
        let mut sorted = samples.clone();
        sorted.sort_by(f64::total_cmp);
        Ok(BenchReport {
            config,
            mean_latency_ms: mean,
            latency_stderr_ms: stderr,
            p50_ms: percentile(&sorted, 50.0),
            p99_ms: percentile(&sorted, 99.0),
            messages: samples.len() as u64,
            kilobytes: wire_bytes as f64 / 1000.0,
            samples,
        })
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<(), BenchError> {
        let path = path.as_ref();
        let err = |source| BenchError::Write {
            path: path.display().to_string(),
            source,
        };
        let file = File::create(path).map_err(err)?;
        serde_json::to_writer_pretty(BufWriter::new(file), self).map_err(|e| err(e.into()))
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<20} {:.4} ± {:.4} ms  p50 {:.4} ms  p99 {:.4} ms  {} msgs  {:.0} KB",
            if self.config.attested { "with attestation" } else { "without attestation" },
            self.mean_latency_ms,
            self.latency_stderr_ms,
            self.p50_ms,
            self.p99_ms,
            self.messages,
            self.kilobytes
        )
    }
}

/// Boot the services and run a closed-loop client for `duration` (at
/// least one request).
pub fn run_bench(duration: Duration, attested: bool, seed: u64) -> Result<BenchReport, BenchError> {
    let cfg = SimConfig {
        attested,
        seed,
        ..SimConfig::default()
    };
    let mut deployment = Deployment::start(&cfg)?;
    let mut client = HbwClient::connect(deployment.client_target())?;
    let start = Instant::now();
    let summary = client.drive(RequestStream::new(seed), |sent| sent == 0 || start.elapsed() < duration)?;
    drop(client);
    deployment.shutdown();

    let samples: Vec<f64> = summary.latencies.iter().map(|d| d.as_secs_f64() * 1e3).collect();
    BenchReport::from_samples(
        BenchConfig {
            attested,
            duration: duration.as_secs_f64(),
            seed,
        },
        samples,
        summary.bytes_sent + summary.bytes_received,
    )
}

fn fmt_float(x: f64) -> String {
    let s = x.to_string();
    if s.contains(['.', 'e', 'N', 'i']) {
        s
    } else {
        format!("{s}.0")
    }
}

/// Write the empirical CDF of the samples as `latency_ms,cumulative_fraction`.
pub fn write_cdf<W: Write>(samples: &[f64], mut out: W) -> io::Result<()> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    writeln!(out, "latency_ms,cumulative_fraction")?;
    for (i, x) in sorted.iter().enumerate() {
        writeln!(out, "{},{}", fmt_float(*x), fmt_float((i + 1) as f64 / n))?;
    }
    Ok(())
}

pub fn emit_cdf(report: &BenchReport, path: impl AsRef<Path>) -> Result<(), BenchError> {
    let path = path.as_ref();
    if report.samples.is_empty() {
        return Err(BenchError::NoSamples);
    }
    let err = |source| BenchError::Write {
        path: path.display().to_string(),
        source,
    };
    let file = File::create(path).map_err(err)?;
    let mut w = BufWriter::new(file);
    write_cdf(&report.samples, &mut w).map_err(err)?;
    w.flush().map_err(err)
}

/// Attested vs. unattested runs with the same seed and duration.
#[derive(Clone, Debug)]
pub struct Comparison {
    pub unattested: BenchReport,
    pub attested: BenchReport,
}

impl Comparison {
    pub fn run(duration: Duration, seed: u64) -> Result<Self, BenchError> {
        Ok(Comparison {
            unattested: run_bench(duration, false, seed)?,
            attested: run_bench(duration, true, seed)?,
        })
    }

    /// Relative mean latency increase, in percent.
    pub fn latency_overhead_pct(&self) -> f64 {
        (self.attested.mean_latency_ms / self.unattested.mean_latency_ms - 1.0) * 100.0
    }

    /// Relative decrease in completed messages, in percent.
    pub fn throughput_drop_pct(&self) -> f64 {
        (1.0 - self.attested.messages as f64 / self.unattested.messages as f64) * 100.0
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use reference::*;
        writeln!(f, "{}", self.unattested)?;
        writeln!(f, "{}", self.attested)?;
        writeln!(
            f,
            "measured:  latency +{:.1}%  throughput -{:.1}%",
            self.latency_overhead_pct(),
            self.throughput_drop_pct()
        )?;
        write!(
            f,
            "reference: {UNATTESTED_LATENCY_MS} vs {ATTESTED_LATENCY_MS} ± {LATENCY_ERROR_MS} ms, \
             {UNATTESTED_MESSAGES} vs {ATTESTED_MESSAGES} msgs, {UNATTESTED_KB} vs {ATTESTED_KB} KB \
             (latency +{:.1}%, throughput -{:.1}%)",
            (ATTESTED_LATENCY_MS / UNATTESTED_LATENCY_MS - 1.0) * 100.0,
            (1.0 - ATTESTED_MESSAGES as f64 / UNATTESTED_MESSAGES as f64) * 100.0,
        )
    }
}
