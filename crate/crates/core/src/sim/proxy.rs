//! Attestation proxy.
//!
//! Sits on both links: HMI client to controller, and controller to driver.
//! Each RPC is turned into a [`TraceEvent`] and checked by a single
//! [`SessionMonitor`] in arrival order. Conformant traffic is forwarded
//! unchanged. On the first nonconformant RPC the proxy answers
//! `fail-safe`, drops the RPC, and rejects everything afterwards.
//!
//! A controller answers the client before it calls the driver, so the two
//! links are ordered explicitly: a driver call waits until the pending
//! controller response has been observed, and the client's response is held
//! back until the protocol cycle is complete and the driver has acknowledged.

use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use super::wire::{Conn, Incoming, WireMessage};
use super::{parse_driver_call, parse_input, parse_response, Service, SimError, FAIL_SAFE, INSPECT};
use crate::attest::{SessionMonitor, TraceEvent, Verdict};
use crate::hbw::HbwState;

/// Longest time one link waits for the other before giving up on ordering.
const ORDERING_TIMEOUT: Duration = Duration::from_secs(2);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FailSafeRecord {
    /// Number of HMI requests seen when the offense happened (1-based).
    pub request: u64,
    pub event: TraceEvent,
    pub reason: String,
}

#[derive(Debug)]
struct Attestation {
    monitor: SessionMonitor,
    requests: u64,
    awaiting_response: bool,
    driver_calls_in_flight: usize,
    failsafes: Vec<FailSafeRecord>,
}

impl Attestation {
    fn observe(&mut self, event: TraceEvent) -> Verdict {
        let was_halted = self.monitor.halted();
        let verdict = self.monitor.observe(event);
        if let Verdict::FailSafe(reason) = &verdict {
            if !was_halted {
                log::warn!("proxy: fail-safe on `{event}` (request {}): {reason}", self.requests);
                self.failsafes.push(FailSafeRecord {
                    request: self.requests,
                    event,
                    reason: reason.clone(),
                });
            }
        }
        verdict
    }
}

type Shared = Arc<(Mutex<Attestation>, Condvar)>;

fn wait_until<'a>(
    shared: &'a Shared,
    mut guard: MutexGuard<'a, Attestation>,
    done: impl Fn(&Attestation) -> bool,
) -> MutexGuard<'a, Attestation> {
    let deadline = Instant::now() + ORDERING_TIMEOUT;
    while !done(&guard) {
        let now = Instant::now();
        if now >= deadline {
            log::warn!("proxy: ordering wait timed out");
            break;
        }
        guard = shared.1.wait_timeout(guard, deadline - now).unwrap().0;
    }
    guard
}

pub struct ProxyHandle {
    client_side: Service,
    driver_side: Service,
    shared: Shared,
}

impl ProxyHandle {
    /// Client-facing address.
    pub fn addr(&self) -> SocketAddr {
        self.client_side.addr()
    }

    /// Address the controller should use as its driver.
    pub fn driver_addr(&self) -> SocketAddr {
        self.driver_side.addr()
    }

    pub fn failsafes(&self) -> Vec<FailSafeRecord> {
        self.shared.0.lock().unwrap().failsafes.clone()
    }

    pub fn halted(&self) -> bool {
        self.shared.0.lock().unwrap().monitor.halted()
    }

    pub fn monitor_state(&self) -> HbwState {
        *self.shared.0.lock().unwrap().monitor.state()
    }

    pub fn shutdown(&mut self) {
        self.client_side.shutdown();
        self.driver_side.shutdown();
    }

    pub fn wait(self) {
        let ProxyHandle {
            client_side,
            driver_side,
            ..
        } = self;
        client_side.wait();
        driver_side.wait();
    }
}

/// Start the proxy. `client_listener` faces HMI clients and forwards to
/// `controller`; `driver_listener` faces the controller and forwards to
/// `driver`. `initial` is the warehouse state the session starts from.
pub fn run_proxy(
    client_listener: TcpListener,
    driver_listener: TcpListener,
    controller: SocketAddr,
    driver: SocketAddr,
    initial: HbwState,
) -> Result<ProxyHandle, SimError> {
    let shared: Shared = Arc::new((
        Mutex::new(Attestation {
            monitor: SessionMonitor::new(initial),
            requests: 0,
            awaiting_response: false,
            driver_calls_in_flight: 0,
            failsafes: Vec::new(),
        }),
        Condvar::new(),
    ));
    let s = shared.clone();
    let client_side = Service::spawn(client_listener, "proxy-client", move |stream| {
        if let Err(e) = serve_client_link(stream, controller, &s) {
            log::debug!("proxy client link ended: {e}");
        }
    })?;
    let s = shared.clone();
    let driver_side = Service::spawn(driver_listener, "proxy-driver", move |stream| {
        if let Err(e) = serve_driver_link(stream, driver, &s) {
            log::debug!("proxy driver link ended: {e}");
        }
    })?;
    Ok(ProxyHandle {
        client_side,
        driver_side,
        shared,
    })
}

fn serve_client_link(stream: TcpStream, controller: SocketAddr, shared: &Shared) -> Result<(), SimError> {
    let mut down = Conn::new(stream)?;
    let mut up = Conn::connect(controller)?;
    loop {
        let (id, method, args) = match down.recv()? {
            Incoming::Closed => return Ok(()),
            Incoming::Malformed(e) => {
                down.send(&WireMessage::error(0, format!("malformed frame: {e}")))?;
                continue;
            }
            Incoming::Message(WireMessage::Request { id, method, args }) => (id, method, args),
            Incoming::Message(other) => {
                down.send(&WireMessage::error(other.id(), "expected a request"))?;
                continue;
            }
        };
        let request = WireMessage::Request {
            id,
            method: method.clone(),
            args: args.clone(),
        };
        if method == INSPECT {
            up.send(&request)?;
            forward_reply(&mut up, &mut down)?;
            continue;
        }
        let Some(input) = parse_input(&method, &args) else {
            down.send(&WireMessage::error(id, format!("unknown request `{method}`")))?;
            continue;
        };
        {
            let mut att = shared.0.lock().unwrap();
            if att.monitor.halted() {
                drop(att);
                down.send(&WireMessage::error(id, FAIL_SAFE))?;
                continue;
            }
            att.requests += 1;
            if !att.observe(TraceEvent::InputEvent(input)).is_conformant() {
                drop(att);
                down.send(&WireMessage::error(id, FAIL_SAFE))?;
                continue;
            }
            att.awaiting_response = true;
        }
        up.send(&request)?;
        let reply = match up.recv()? {
            Incoming::Message(m) => m,
            Incoming::Malformed(e) => WireMessage::error(id, format!("malformed reply: {e}")),
            Incoming::Closed => {
                clear_awaiting(shared);
                return Err(SimError::Protocol("controller closed the connection".into()));
            }
        };
        let reply = match reply {
            WireMessage::Response { id: rid, result } if rid == id => {
                let mut att = shared.0.lock().unwrap();
                att.awaiting_response = false;
                shared.1.notify_all();
                let verdict = match parse_response(&result) {
                    Some(cmd) => att.observe(TraceEvent::CommandEvent(cmd)),
                    None => Verdict::FailSafe(format!("unrecognized response `{result}`")),
                };
                if verdict.is_conformant() {
                    let att = wait_until(shared, att, |a| {
                        a.monitor.halted() || (a.monitor.at_boundary() && a.driver_calls_in_flight == 0)
                    });
                    if att.monitor.halted() {
                        WireMessage::error(id, FAIL_SAFE)
                    } else {
                        WireMessage::response(id, result)
                    }
                } else {
                    WireMessage::error(id, FAIL_SAFE)
                }
            }
            other => {
                clear_awaiting(shared);
                other
            }
        };
        down.send(&reply)?;
    }
}

fn clear_awaiting(shared: &Shared) {
    shared.0.lock().unwrap().awaiting_response = false;
    shared.1.notify_all();
}

fn serve_driver_link(stream: TcpStream, driver: SocketAddr, shared: &Shared) -> Result<(), SimError> {
    let mut down = Conn::new(stream)?;
    let mut up = Conn::connect(driver)?;
    loop {
        let (id, method, args) = match down.recv()? {
            Incoming::Closed => return Ok(()),
            Incoming::Malformed(e) => {
                down.send(&WireMessage::error(0, format!("malformed frame: {e}")))?;
                continue;
            }
            Incoming::Message(WireMessage::Request { id, method, args }) => (id, method, args),
            Incoming::Message(other) => {
                down.send(&WireMessage::error(other.id(), "expected a request"))?;
                continue;
            }
        };
        let request = WireMessage::Request {
            id,
            method: method.clone(),
            args: args.clone(),
        };
        if method == INSPECT {
            up.send(&request)?;
            forward_reply(&mut up, &mut down)?;
            continue;
        }
        let Some(cmd) = parse_driver_call(&method, &args) else {
            down.send(&WireMessage::error(id, format!("unknown call `{method}`")))?;
            continue;
        };
        {
            let att = shared.0.lock().unwrap();
            let mut att = wait_until(shared, att, |a| a.monitor.halted() || !a.awaiting_response);
            let verdict = if att.monitor.halted() {
                Verdict::FailSafe("halted".into())
            } else {
                att.observe(TraceEvent::CommandEvent(cmd))
            };
            if !verdict.is_conformant() {
                shared.1.notify_all();
                drop(att);
                down.send(&WireMessage::error(id, FAIL_SAFE))?;
                continue;
            }
            att.driver_calls_in_flight += 1;
        }
        up.send(&request)?;
        let result = forward_reply(&mut up, &mut down);
        let mut att = shared.0.lock().unwrap();
        att.driver_calls_in_flight -= 1;
        shared.1.notify_all();
        drop(att);
        result?;
    }
}

fn forward_reply(up: &mut Conn, down: &mut Conn) -> Result<(), SimError> {
    match up.recv()? {
        Incoming::Message(m) => Ok(down.send(&m)?),
        Incoming::Malformed(e) => Err(SimError::Protocol(format!("malformed upstream reply: {e}"))),
        Incoming::Closed => Err(SimError::Protocol("upstream closed the connection".into())),
    }
}
