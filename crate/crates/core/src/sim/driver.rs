//! Low-level driver service. Executes every `store`/`retrieve` it receives
//! and records physical damage instead of refusing.

use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::wire::{Conn, Incoming, WireMessage};
use super::{parse_driver_call, Service, SimError, INSPECT};
use crate::hbw::{find_color, update_bay, Bays, Color, HbwCmd};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DriverSnapshot {
    pub bays: Bays,
    pub damaged: bool,
    /// Every command executed, in order.
    pub executed: Vec<HbwCmd>,
}

#[derive(Debug)]
struct DriverState {
    bays: Bays,
    damaged: bool,
    executed: Vec<HbwCmd>,
}

impl DriverState {
    fn execute(&mut self, cmd: HbwCmd) {
        self.executed.push(cmd);
        match cmd {
            HbwCmd::Store(c) => match find_color(Color::Empty, 1, &self.bays) {
                Some(n) => self.bays = update_bay(&self.bays, n, c.into()),
                None => {
                    log::error!("driver: store {c} into a full warehouse");
                    self.damaged = true;
                }
            },
            HbwCmd::Retrieve(c) => match find_color(c.into(), 1, &self.bays) {
                Some(n) => self.bays = update_bay(&self.bays, n, Color::Empty),
                None => {
                    log::error!("driver: retrieve {c} but none is stored");
                    self.damaged = true;
                }
            },
            _ => unreachable!("drivers only receive store/retrieve"),
        }
    }

    fn snapshot(&self) -> DriverSnapshot {
        DriverSnapshot {
            bays: self.bays,
            damaged: self.damaged,
            executed: self.executed.clone(),
        }
    }
}

pub struct DriverHandle {
    service: Service,
    state: Arc<Mutex<DriverState>>,
}

impl DriverHandle {
    pub fn addr(&self) -> SocketAddr {
        self.service.addr()
    }

    pub fn snapshot(&self) -> DriverSnapshot {
        self.state.lock().unwrap().snapshot()
    }

    pub fn shutdown(&mut self) {
        self.service.shutdown();
    }

    pub fn wait(self) {
        self.service.wait();
    }
}

/// Serve the driver on `listener`, starting with `bays` loaded.
pub fn run_driver(listener: TcpListener, bays: Bays) -> Result<DriverHandle, SimError> {
    let state = Arc::new(Mutex::new(DriverState {
        bays,
        damaged: false,
        executed: Vec::new(),
    }));
    let shared = state.clone();
    let service = Service::spawn(listener, "driver", move |stream| {
        if let Err(e) = serve(stream, &shared) {
            log::debug!("driver connection ended: {e}");
        }
    })?;
    Ok(DriverHandle { service, state })
}

fn serve(stream: TcpStream, state: &Mutex<DriverState>) -> Result<(), SimError> {
    let mut conn = Conn::new(stream)?;
    loop {
        let reply = match conn.recv()? {
            Incoming::Closed => return Ok(()),
            Incoming::Malformed(e) => WireMessage::error(0, format!("malformed frame: {e}")),
            Incoming::Message(WireMessage::Request { id, method, args }) => {
                if method == INSPECT {
                    let snap = state.lock().unwrap().snapshot();
                    WireMessage::response(id, serde_json::to_string(&snap).expect("snapshot serializes"))
                } else if let Some(cmd) = parse_driver_call(&method, &args) {
                    state.lock().unwrap().execute(cmd);
                    WireMessage::response(id, "ok")
                } else {
                    WireMessage::error(id, format!("unknown call `{method}` {args:?}"))
                }
            }
            Incoming::Message(other) => WireMessage::error(other.id(), "expected a request"),
        };
        conn.send(&reply)?;
    }
}
