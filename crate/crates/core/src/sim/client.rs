//! Seeded HMI client issuing random store/retrieve requests, one at a time.

use std::net::ToSocketAddrs;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::wire::RpcClient;
use super::{input_method, SimConfig, SimError};
use crate::hbw::{Input, ItemColor};

/// Deterministic stream of uniformly random requests.
pub struct RequestStream {
    rng: ChaCha8Rng,
}

impl RequestStream {
    pub fn new(seed: u64) -> Self {
        RequestStream {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Iterator for RequestStream {
    type Item = Input;

    fn next(&mut self) -> Option<Input> {
        let color = ItemColor::ALL[self.rng.gen_range(0..ItemColor::ALL.len())];
        Some(if self.rng.gen_bool(0.5) {
            Input::StoreRequest(color)
        } else {
            Input::RetrieveRequest(color)
        })
    }
}

pub fn request_sequence(seed: u64, n: usize) -> Vec<Input> {
    RequestStream::new(seed).take(n).collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Ok(String),
    Rejected(String),
}

impl Outcome {
    pub fn is_ok(&self) -> bool {
        matches!(self, Outcome::Ok(_))
    }
}

#[derive(Clone, Debug, Default)]
pub struct ClientSummary {
    pub sent: u64,
    pub ok: u64,
    pub rejected: u64,
    pub outcomes: Vec<(Input, Outcome)>,
    /// Per-request round trip time.
    pub latencies: Vec<Duration>,
    /// Wire bytes written and read, including length prefixes.
    pub bytes_sent: u64,
    pub bytes_received: u64,
}

/// A connected HMI client.
pub struct HbwClient {
    rpc: RpcClient,
}

impl HbwClient {
    pub fn connect(target: impl ToSocketAddrs) -> Result<Self, SimError> {
        Ok(HbwClient {
            rpc: RpcClient::connect(target)?,
        })
    }

    pub fn request(&mut self, input: Input) -> Result<Outcome, SimError> {
        let (method, color) = input_method(input);
        Ok(match self.rpc.call(method, &[color.as_str()])? {
            Ok(result) => Outcome::Ok(result),
            Err(reason) => Outcome::Rejected(reason),
        })
    }

    pub fn bytes(&self) -> (u64, u64) {
        self.rpc.bytes()
    }

    /// Issue requests from `stream` until `keep_going` returns false.
    pub fn drive(
        &mut self,
        stream: impl Iterator<Item = Input>,
        mut keep_going: impl FnMut(u64) -> bool,
    ) -> Result<ClientSummary, SimError> {
        let mut summary = ClientSummary::default();
        for input in stream {
            if !keep_going(summary.sent) {
                break;
            }
            let start = Instant::now();
            let outcome = self.request(input)?;
            summary.latencies.push(start.elapsed());
            summary.sent += 1;
            if outcome.is_ok() {
                summary.ok += 1;
            } else {
                summary.rejected += 1;
            }
            summary.outcomes.push((input, outcome));
        }
        (summary.bytes_sent, summary.bytes_received) = self.bytes();
        Ok(summary)
    }
}

/// Send `cfg.requests` seeded random requests to `target`.
pub fn run_client(target: impl ToSocketAddrs, cfg: &SimConfig) -> Result<ClientSummary, SimError> {
    let mut client = HbwClient::connect(target)?;
    let n = cfg.requests;
    client.drive(RequestStream::new(cfg.seed), |sent| sent < n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_determinism() {
        assert_eq!(request_sequence(7, 50), request_sequence(7, 50));
        assert_ne!(request_sequence(7, 50), request_sequence(8, 50));
    }

    #[test]
    fn covers_every_request_kind() {
        let seq = request_sequence(1, 600);
        for input in Input::ALL {
            let n = seq.iter().filter(|i| **i == input).count();
            assert!((50..150).contains(&n), "{input}: {n}");
        }
    }
}
