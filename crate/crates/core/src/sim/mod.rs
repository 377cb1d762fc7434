//! Networked simulation of the warehouse: an HMI client, the controller,
//! the low-level driver service and the attestation proxy, all speaking the
//! framed protocol in [`wire`].
//!
//! Without attestation the client talks to the controller and the
//! controller to the driver directly. With attestation both links pass
//! through the proxy, which feeds every observed RPC to one
//! [`SessionMonitor`](crate::attest::SessionMonitor).

pub mod client;
pub mod controller;
pub mod driver;
pub mod proxy;
pub mod wire;

use std::fmt;
use std::io;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use thiserror::Error;

use crate::hbw::{Bays, HbwCmd, HbwState, Input, ItemColor};

pub use client::{request_sequence, ClientSummary, HbwClient, Outcome};
pub use controller::{run_controller, ControllerHandle};
pub use driver::{run_driver, DriverHandle, DriverSnapshot};
pub use proxy::{run_proxy, FailSafeRecord, ProxyHandle};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("protocol: {0}")]
    Protocol(String),
}

pub const STORE_REQUEST: &str = "storeRequest";
pub const RETRIEVE_REQUEST: &str = "retrieveRequest";
pub const STORE: &str = "store";
pub const RETRIEVE: &str = "retrieve";
pub const INSPECT: &str = "_inspect";
pub const FAIL_SAFE: &str = "fail-safe";

/// Wire spelling of a controller response.
pub fn response_name(cmd: HbwCmd) -> Option<&'static str> {
    match cmd {
        HbwCmd::IsFull => Some("isFull"),
        HbwCmd::NotFull => Some("notFull"),
        HbwCmd::HasColor => Some("hasColor"),
        HbwCmd::NoColor => Some("doesNotHaveColor"),
        HbwCmd::Store(_) | HbwCmd::Retrieve(_) => None,
    }
}

pub fn parse_response(result: &str) -> Option<HbwCmd> {
    match result {
        "isFull" => Some(HbwCmd::IsFull),
        "notFull" => Some(HbwCmd::NotFull),
        "hasColor" => Some(HbwCmd::HasColor),
        "doesNotHaveColor" => Some(HbwCmd::NoColor),
        _ => None,
    }
}

fn single_color(args: &[String]) -> Option<ItemColor> {
    match args {
        [c] => c.parse().ok(),
        _ => None,
    }
}

/// Map an HMI request to the input it carries.
pub fn parse_input(method: &str, args: &[String]) -> Option<Input> {
    let c = single_color(args)?;
    match method {
        STORE_REQUEST => Some(Input::StoreRequest(c)),
        RETRIEVE_REQUEST => Some(Input::RetrieveRequest(c)),
        _ => None,
    }
}

/// Map a controller-to-driver call to its command.
pub fn parse_driver_call(method: &str, args: &[String]) -> Option<HbwCmd> {
    let c = single_color(args)?;
    match method {
        STORE => Some(HbwCmd::Store(c)),
        RETRIEVE => Some(HbwCmd::Retrieve(c)),
        _ => None,
    }
}

pub fn input_method(input: Input) -> (&'static str, ItemColor) {
    match input {
        Input::StoreRequest(c) => (STORE_REQUEST, c),
        Input::RetrieveRequest(c) => (RETRIEVE_REQUEST, c),
    }
}

/// The five malicious controller behaviours.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AttackPattern {
    /// Answer `notFull` to a store request, then store a different color.
    StoreWrongColor = 1,
    /// Answer `notFull` and store even though every bay is occupied.
    StoreWithFull = 2,
    /// Answer a store request with `hasColor` and retrieve the item.
    CommandMismatch = 3,
    /// Answer a retrieve request with `notFull`, then retrieve.
    ResponseMismatch = 4,
    /// Answer `hasColor` and retrieve a color that is not stored.
    RetrieveWithNoColor = 5,
}

impl AttackPattern {
    pub const ALL: [AttackPattern; 5] = [
        AttackPattern::StoreWrongColor,
        AttackPattern::StoreWithFull,
        AttackPattern::CommandMismatch,
        AttackPattern::ResponseMismatch,
        AttackPattern::RetrieveWithNoColor,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.id() == id)
    }
}

impl fmt::Display for AttackPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            AttackPattern::StoreWrongColor => "store wrong color",
            AttackPattern::StoreWithFull => "store with full",
            AttackPattern::CommandMismatch => "command mismatch",
            AttackPattern::ResponseMismatch => "response mismatch",
            AttackPattern::RetrieveWithNoColor => "retrieve with no color",
        };
        f.pad(&format!("{}- {name}", self.id()))
    }
}

impl FromStr for AttackPattern {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.parse::<u8>()
            .ok()
            .and_then(AttackPattern::from_id)
            .ok_or_else(|| format!("attack pattern must be 1..5, got `{s}`"))
    }
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub requests: u64,
    pub seed: u64,
    pub attested: bool,
    pub compromised: Option<AttackPattern>,
    pub driver_addr: SocketAddr,
    pub controller_addr: SocketAddr,
    /// Client-facing proxy address.
    pub proxy_addr: SocketAddr,
    /// Driver-facing proxy address, used by the controller when attested.
    pub proxy_driver_addr: SocketAddr,
}

impl Default for SimConfig {
    fn default() -> Self {
        let any: SocketAddr = "127.0.0.1:0".parse().unwrap();
        SimConfig {
            requests: 100,
            seed: 0,
            attested: true,
            compromised: None,
            driver_addr: any,
            controller_addr: any,
            proxy_addr: any,
            proxy_driver_addr: any,
        }
    }
}

/// A running TCP service: one accept thread, one thread per connection.
pub struct Service {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    accept: Option<JoinHandle<()>>,
}

impl Service {
    pub fn spawn<F>(listener: TcpListener, name: &'static str, handler: F) -> io::Result<Self>
    where
        F: Fn(TcpStream) + Send + Sync + 'static,
    {
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let handler = Arc::new(handler);
        let flag = stop.clone();
        let accept = thread::Builder::new()
            .name(format!("{name}-accept"))
            .spawn(move || {
                for stream in listener.incoming() {
                    if flag.load(Ordering::SeqCst) {
                        break;
                    }
                    match stream {
                        Ok(stream) => {
                            let h = handler.clone();
                            let spawned = thread::Builder::new()
                                .name(format!("{name}-conn"))
                                .spawn(move || h(stream));
                            if let Err(e) = spawned {
                                log::error!("{name}: cannot spawn connection thread: {e}");
                            }
                        }
                        Err(e) => log::warn!("{name}: accept failed: {e}"),
                    }
                }
            })?;
        Ok(Service {
            addr,
            stop,
            accept: Some(accept),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stop accepting new connections. Established connections end when
    /// their peers disconnect.
    pub fn shutdown(&mut self) {
        if let Some(accept) = self.accept.take() {
            self.stop.store(true, Ordering::SeqCst);
            // Wake the blocking accept.
            let _ = TcpStream::connect(self.addr);
            let _ = accept.join();
        }
    }

    /// Block until the service stops.
    pub fn wait(mut self) {
        if let Some(accept) = self.accept.take() {
            let _ = accept.join();
        }
    }
}

impl Drop for Service {
    fn drop(&mut self) {
        self.shutdown();
    }
}

/// All services of one simulated warehouse.
pub struct Deployment {
    pub driver: DriverHandle,
    pub controller: ControllerHandle,
    pub proxy: Option<ProxyHandle>,
}

impl Deployment {
    /// Start driver, controller and (when `cfg.attested`) the proxy on the
    /// configured addresses. Port 0 picks a free port.
    pub fn start(cfg: &SimConfig) -> Result<Self, SimError> {
        Self::start_with(cfg, Bays::empty())
    }

    pub fn start_with(cfg: &SimConfig, bays: Bays) -> Result<Self, SimError> {
        let driver = run_driver(TcpListener::bind(cfg.driver_addr)?, bays)?;
        let controller_listener = TcpListener::bind(cfg.controller_addr)?;
        if cfg.attested {
            let proxy_client = TcpListener::bind(cfg.proxy_addr)?;
            let proxy_driver = TcpListener::bind(cfg.proxy_driver_addr)?;
            let controller = run_controller(
                controller_listener,
                proxy_driver.local_addr()?,
                bays,
                cfg.compromised,
            )?;
            let proxy = run_proxy(
                proxy_client,
                proxy_driver,
                controller.addr(),
                driver.addr(),
                HbwState::sigma(bays, None),
            )?;
            Ok(Deployment {
                driver,
                controller,
                proxy: Some(proxy),
            })
        } else {
            let controller = run_controller(controller_listener, driver.addr(), bays, cfg.compromised)?;
            Ok(Deployment {
                driver,
                controller,
                proxy: None,
            })
        }
    }

    /// Where an HMI client should connect.
    pub fn client_target(&self) -> SocketAddr {
        match &self.proxy {
            Some(p) => p.addr(),
            None => self.controller.addr(),
        }
    }

    pub fn shutdown(&mut self) {
        if let Some(p) = &mut self.proxy {
            p.shutdown();
        }
        self.controller.shutdown();
        self.driver.shutdown();
    }
}

#[derive(Clone, Debug)]
pub struct SimOutcome {
    pub client: ClientSummary,
    pub driver: DriverSnapshot,
    pub controller_mirror: Bays,
    /// Request number (1-based) at which a compromised controller first misbehaved.
    pub first_injection: Option<u64>,
    pub failsafes: Vec<FailSafeRecord>,
    pub monitor_state: Option<HbwState>,
}

impl SimOutcome {
    pub fn damaged(&self) -> bool {
        self.driver.damaged
    }

    pub fn mirror_diverged(&self) -> bool {
        self.controller_mirror != self.driver.bays
    }
}

/// Boot the services, run the seeded client to completion and collect the
/// final state of every component.
pub fn run_simulation(cfg: &SimConfig) -> Result<SimOutcome, SimError> {
    let mut deployment = Deployment::start(cfg)?;
    let client = client::run_client(deployment.client_target(), cfg)?;
    // The controller holds its lock until its last driver call returns, so
    // read it before the driver.
    let controller_mirror = deployment.controller.mirror();
    let outcome = SimOutcome {
        client,
        driver: deployment.driver.snapshot(),
        controller_mirror,
        first_injection: deployment.controller.first_injection(),
        failsafes: deployment.proxy.as_ref().map(|p| p.failsafes()).unwrap_or_default(),
        monitor_state: deployment.proxy.as_ref().map(|p| p.monitor_state()),
    };
    deployment.shutdown();
    Ok(outcome)
}
