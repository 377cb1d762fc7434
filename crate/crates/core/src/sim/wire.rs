//! Framed request/response transport.
//!
//! Every frame is a 4-byte big-endian payload length followed by a UTF-8
//! JSON object:
//!
//! ```text
//! {"type":"request","id":7,"method":"storeRequest","args":["red"]}
//! {"type":"response","id":7,"result":"notFull"}
//! {"type":"error","id":7,"reason":"fail-safe"}
//! ```

use std::io::{self, BufReader, ErrorKind, Read, Write};
use std::net::{SocketAddr, TcpStream, ToSocketAddrs};

use serde::{Deserialize, Serialize};

use super::SimError;

/// Frames larger than this are rejected as malformed.
pub const MAX_FRAME: usize = 1 << 20;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum WireMessage {
    Request { id: u64, method: String, args: Vec<String> },
    Response { id: u64, result: String },
    Error { id: u64, reason: String },
}

impl WireMessage {
    pub fn id(&self) -> u64 {
        match self {
            WireMessage::Request { id, .. } | WireMessage::Response { id, .. } | WireMessage::Error { id, .. } => *id,
        }
    }

    pub fn request(id: u64, method: &str, args: &[&str]) -> Self {
        WireMessage::Request {
            id,
            method: method.to_string(),
            args: args.iter().map(|a| a.to_string()).collect(),
        }
    }

    pub fn response(id: u64, result: impl Into<String>) -> Self {
        WireMessage::Response {
            id,
            result: result.into(),
        }
    }

    pub fn error(id: u64, reason: impl Into<String>) -> Self {
        WireMessage::Error {
            id,
            reason: reason.into(),
        }
    }
}

/// Encode one message as a complete frame.
pub fn encode_frame(msg: &WireMessage) -> Vec<u8> {
    let payload = serde_json::to_vec(msg).expect("wire messages always serialize");
    let mut frame = Vec::with_capacity(4 + payload.len());
    frame.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    frame.extend_from_slice(&payload);
    frame
}

/// Outcome of reading one frame.
#[derive(Debug)]
pub enum Incoming {
    Message(WireMessage),
    /// A complete frame whose payload is not a valid message.
    Malformed(String),
    Closed,
}

/// A TCP connection speaking the framed protocol, with byte accounting.
pub struct Conn {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    bytes_sent: u64,
    bytes_received: u64,
}

impl Conn {
    pub fn new(stream: TcpStream) -> io::Result<Self> {
        stream.set_nodelay(true)?;
        let writer = stream.try_clone()?;
        Ok(Conn {
            reader: BufReader::new(stream),
            writer,
            bytes_sent: 0,
            bytes_received: 0,
        })
    }

    pub fn connect(addr: impl ToSocketAddrs) -> io::Result<Self> {
        Conn::new(TcpStream::connect(addr)?)
    }

    pub fn peer_addr(&self) -> io::Result<SocketAddr> {
        self.writer.peer_addr()
    }

    pub fn send(&mut self, msg: &WireMessage) -> io::Result<()> {
        let frame = encode_frame(msg);
        self.writer.write_all(&frame)?;
        self.bytes_sent += frame.len() as u64;
        Ok(())
    }

    pub fn recv(&mut self) -> io::Result<Incoming> {
        let mut len = [0u8; 4];
        match self.reader.read_exact(&mut len) {
            Ok(()) => {}
            Err(e) if e.kind() == ErrorKind::UnexpectedEof => return Ok(Incoming::Closed),
            Err(e) if e.kind() == ErrorKind::ConnectionReset => return Ok(Incoming::Closed),
            Err(e) => return Err(e),
        }
        let len = u32::from_be_bytes(len) as usize;
        if len > MAX_FRAME {
            return Err(io::Error::new(ErrorKind::InvalidData, format!("frame of {len} bytes")));
        }
        let mut payload = vec![0u8; len];
        self.reader.read_exact(&mut payload)?;
        self.bytes_received += 4 + len as u64;
        Ok(match serde_json::from_slice(&payload) {
            Ok(msg) => Incoming::Message(msg),
            Err(e) => Incoming::Malformed(e.to_string()),
        })
    }

    /// Total bytes written and read, including length prefixes.
    pub fn bytes(&self) -> (u64, u64) {
        (self.bytes_sent, self.bytes_received)
    }
}

/// Client side of a connection: issues requests with strictly increasing ids
/// and waits for the matching reply.
pub struct RpcClient {
    conn: Conn,
    next_id: u64,
}

impl RpcClient {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self, SimError> {
        Ok(RpcClient {
            conn: Conn::connect(addr)?,
            next_id: 1,
        })
    }

    /// `Ok(Ok(result))` for a response, `Ok(Err(reason))` for an error reply.
    pub fn call(&mut self, method: &str, args: &[&str]) -> Result<Result<String, String>, SimError> {
        let id = self.next_id;
        self.next_id += 1;
        self.conn.send(&WireMessage::request(id, method, args))?;
        match self.conn.recv()? {
            Incoming::Message(WireMessage::Response { id: rid, result }) if rid == id => Ok(Ok(result)),
            Incoming::Message(WireMessage::Error { id: rid, reason }) if rid == id => Ok(Err(reason)),
            Incoming::Message(other) => Err(SimError::Protocol(format!(
                "reply to request {id} has id {} ({other:?})",
                other.id()
            ))),
            Incoming::Malformed(e) => Err(SimError::Protocol(e)),
            Incoming::Closed => Err(SimError::Protocol("connection closed".into())),
        }
    }

    pub fn bytes(&self) -> (u64, u64) {
        self.conn.bytes()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn frame_layout() {
        let frame = encode_frame(&WireMessage::response(3, "ok"));
        let payload = br#"{"type":"response","id":3,"result":"ok"}"#;
        assert_eq!(&frame[..4], &(payload.len() as u32).to_be_bytes());
        assert_eq!(&frame[4..], payload);
    }

    #[test]
    fn request_json_fields() {
        let v: serde_json::Value = serde_json::from_slice(&encode_frame(&WireMessage::request(1, "store", &["red"]))[4..]).unwrap();
        assert_eq!(v, serde_json::json!({"type": "request", "id": 1, "method": "store", "args": ["red"]}));
    }

    proptest! {
        #[test]
        fn frames_decode(id in any::<u64>(), text in ".{0,40}", kind in 0u8..3) {
            let msg = match kind {
                0 => WireMessage::Request { id, method: text.clone(), args: vec![text.clone()] },
                1 => WireMessage::response(id, text),
                _ => WireMessage::error(id, text),
            };
            let frame = encode_frame(&msg);
            let len = u32::from_be_bytes(frame[..4].try_into().unwrap()) as usize;
            prop_assert_eq!(len, frame.len() - 4);
            let back: WireMessage = serde_json::from_slice(&frame[4..]).unwrap();
            prop_assert_eq!(back, msg);
        }
    }
}
