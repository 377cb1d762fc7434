//! Warehouse controller. Decides every HMI request against its mirror of
//! the bays, answers the client and then drives the low-level driver.
//! A compromised controller follows one of the [`AttackPattern`]s.

use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::{Arc, Mutex};

use super::wire::{Conn, Incoming, RpcClient, WireMessage};
use super::{parse_input, response_name, AttackPattern, Service, SimError, INSPECT, RETRIEVE, STORE};
use crate::hbw::{find_color, update_bay, Bays, Color, HbwCmd, Input, ItemColor};

#[derive(Debug)]
struct ControllerState {
    mirror: Bays,
    requests: u64,
    first_injection: Option<u64>,
}

/// What the controller does for one request.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Decision {
    pub response: HbwCmd,
    pub driver_call: Option<HbwCmd>,
    pub mirror: Bays,
    pub malicious: bool,
}

/// The honest decision, per the warehouse protocol.
pub fn decide(mirror: &Bays, input: Input) -> Decision {
    let honest = |response, driver_call, mirror| Decision {
        response,
        driver_call,
        mirror,
        malicious: false,
    };
    match input {
        Input::StoreRequest(c) => match find_color(Color::Empty, 1, mirror) {
            None => honest(HbwCmd::IsFull, None, *mirror),
            Some(n) => honest(HbwCmd::NotFull, Some(HbwCmd::Store(c)), update_bay(mirror, n, c.into())),
        },
        Input::RetrieveRequest(c) => match find_color(c.into(), 1, mirror) {
            None => honest(HbwCmd::NoColor, None, *mirror),
            Some(n) => honest(HbwCmd::HasColor, Some(HbwCmd::Retrieve(c)), update_bay(mirror, n, Color::Empty)),
        },
    }
}

fn other_color(c: ItemColor) -> ItemColor {
    match c {
        ItemColor::Red => ItemColor::Blue,
        ItemColor::White => ItemColor::Red,
        ItemColor::Blue => ItemColor::White,
    }
}

/// The decision of a controller compromised with `attack`. The mirror is
/// always updated as the honest controller would.
pub fn decide_compromised(mirror: &Bays, input: Input, attack: AttackPattern) -> Decision {
    let honest = decide(mirror, input);
    let bad = |response, driver_call| Decision {
        response,
        driver_call,
        mirror: honest.mirror,
        malicious: true,
    };
    match (attack, input, honest.response) {
        (AttackPattern::StoreWrongColor, Input::StoreRequest(c), HbwCmd::NotFull) => {
            bad(HbwCmd::NotFull, Some(HbwCmd::Store(other_color(c))))
        }
        (AttackPattern::StoreWithFull, Input::StoreRequest(c), HbwCmd::IsFull) => {
            bad(HbwCmd::NotFull, Some(HbwCmd::Store(c)))
        }
        (AttackPattern::CommandMismatch, Input::StoreRequest(c), HbwCmd::NotFull) => {
            bad(HbwCmd::HasColor, Some(HbwCmd::Retrieve(c)))
        }
        (AttackPattern::ResponseMismatch, Input::RetrieveRequest(c), _) => {
            bad(HbwCmd::NotFull, Some(HbwCmd::Retrieve(c)))
        }
        (AttackPattern::RetrieveWithNoColor, Input::RetrieveRequest(c), HbwCmd::NoColor) => {
            bad(HbwCmd::HasColor, Some(HbwCmd::Retrieve(c)))
        }
        _ => honest,
    }
}

pub struct ControllerHandle {
    service: Service,
    state: Arc<Mutex<ControllerState>>,
}

impl ControllerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.service.addr()
    }

    pub fn mirror(&self) -> Bays {
        self.state.lock().unwrap().mirror
    }

    pub fn first_injection(&self) -> Option<u64> {
        self.state.lock().unwrap().first_injection
    }

    pub fn shutdown(&mut self) {
        self.service.shutdown();
    }

    pub fn wait(self) {
        self.service.wait();
    }
}

pub fn run_controller(
    listener: TcpListener,
    driver: SocketAddr,
    bays: Bays,
    compromised: Option<AttackPattern>,
) -> Result<ControllerHandle, SimError> {
    let state = Arc::new(Mutex::new(ControllerState {
        mirror: bays,
        requests: 0,
        first_injection: None,
    }));
    let shared = state.clone();
    let service = Service::spawn(listener, "controller", move |stream| {
        if let Err(e) = serve(stream, driver, compromised, &shared) {
            log::debug!("controller connection ended: {e}");
        }
    })?;
    Ok(ControllerHandle { service, state })
}

fn driver_method(cmd: HbwCmd) -> (&'static str, ItemColor) {
    match cmd {
        HbwCmd::Store(c) => (STORE, c),
        HbwCmd::Retrieve(c) => (RETRIEVE, c),
        other => unreachable!("`{other}` is not a driver call"),
    }
}

fn serve(
    stream: TcpStream,
    driver_addr: SocketAddr,
    compromised: Option<AttackPattern>,
    state: &Mutex<ControllerState>,
) -> Result<(), SimError> {
    let mut conn = Conn::new(stream)?;
    let mut driver: Option<RpcClient> = None;
    loop {
        let (id, method, args) = match conn.recv()? {
            Incoming::Closed => return Ok(()),
            Incoming::Malformed(e) => {
                conn.send(&WireMessage::error(0, format!("malformed frame: {e}")))?;
                continue;
            }
            Incoming::Message(WireMessage::Request { id, method, args }) => (id, method, args),
            Incoming::Message(other) => {
                conn.send(&WireMessage::error(other.id(), "expected a request"))?;
                continue;
            }
        };
        if method == INSPECT {
            let mirror = state.lock().unwrap().mirror;
            conn.send(&WireMessage::response(id, mirror.to_string()))?;
            continue;
        }
        let Some(input) = parse_input(&method, &args) else {
            conn.send(&WireMessage::error(id, format!("unknown request `{method}` {args:?}")))?;
            continue;
        };
        if driver.is_none() {
            match RpcClient::connect(driver_addr) {
                Ok(c) => driver = Some(c),
                Err(e) => {
                    conn.send(&WireMessage::error(id, format!("driver unreachable: {e}")))?;
                    continue;
                }
            }
        }

        // One warehouse: requests are decided and executed one at a time.
        let mut st = state.lock().unwrap();
        st.requests += 1;
        let decision = match compromised {
            Some(attack) => decide_compromised(&st.mirror, input, attack),
            None => decide(&st.mirror, input),
        };
        if decision.malicious && st.first_injection.is_none() {
            st.first_injection = Some(st.requests);
        }
        st.mirror = decision.mirror;
        let response = response_name(decision.response).expect("decisions answer with a response command");
        conn.send(&WireMessage::response(id, response))?;
        if let Some(cmd) = decision.driver_call {
            let (m, c) = driver_method(cmd);
            let client = driver.as_mut().expect("connected above");
            match client.call(m, &[c.as_str()]) {
                Ok(Ok(_)) => {}
                Ok(Err(reason)) => log::warn!("controller: driver refused `{cmd}`: {reason}"),
                Err(e) => {
                    log::warn!("controller: driver call `{cmd}` failed: {e}");
                    driver = None;
                }
            }
        }
    }
}
