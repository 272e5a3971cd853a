//! Byte-exact message framing between the two parties and an in-process
//! duplex channel for tests. Frame layout: 4-byte magic "HECN", 1-byte
//! version, 1-byte message type, 8-byte little-endian payload length, payload.

use std::sync::mpsc::{channel, Receiver, Sender};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"HECN";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum MsgType {
    ConvInit = 1,
    ConvC0 = 2,
    ConvResult = 3,
    FcInit = 4,
    FcC0 = 5,
    FcResult = 6,
    ReluMasked = 7,
    ReluReenc = 8,
}

impl MsgType {
    pub fn from_byte(b: u8) -> Result<Self> {
        Ok(match b {
            1 => Self::ConvInit,
            2 => Self::ConvC0,
            3 => Self::ConvResult,
            4 => Self::FcInit,
            5 => Self::FcC0,
            6 => Self::FcResult,
            7 => Self::ReluMasked,
            8 => Self::ReluReenc,
            _ => return Err(Error::Frame(format!("unknown message type {b}"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WireMessage {
    pub msg_type: MsgType,
    pub payload: Vec<u8>,
}

pub fn frame(msg: &WireMessage) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + msg.payload.len());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(msg.msg_type as u8);
    out.extend_from_slice(&(msg.payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&msg.payload);
    out
}

/// Parse one frame from the front of `bytes`; returns the message and the
/// number of bytes consumed.
pub fn deframe(bytes: &[u8]) -> Result<(WireMessage, usize)> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Frame("truncated header".into()));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Frame("bad magic".into()));
    }
    if bytes[4] != VERSION {
        return Err(Error::Frame(format!("unsupported version {}", bytes[4])));
    }
    let msg_type = MsgType::from_byte(bytes[5])?;
    let len = u64::from_le_bytes(bytes[6..14].try_into().unwrap()) as usize;
    if bytes.len() < HEADER_LEN + len {
        return Err(Error::Frame("truncated payload".into()));
    }
    let payload = bytes[HEADER_LEN..HEADER_LEN + len].to_vec();
    Ok((WireMessage { msg_type, payload }, HEADER_LEN + len))
}

/// Append residues in fixed-width little-endian form.
pub fn write_residues(out: &mut Vec<u8>, vals: &[u128], width: usize) {
    for &v in vals {
        out.extend_from_slice(&v.to_le_bytes()[..width]);
    }
}

/// Parse `count` fixed-width residues and check them against `modulus`.
pub fn read_residues(bytes: &[u8], count: usize, width: usize, modulus: u128) -> Result<Vec<u128>> {
    if bytes.len() != count * width {
        return Err(Error::Frame(format!(
            "expected {} residue bytes, got {}",
            count * width,
            bytes.len()
        )));
    }
    let mut out = Vec::with_capacity(count);
    for chunk in bytes.chunks_exact(width) {
        let mut buf = [0u8; 16];
        buf[..width].copy_from_slice(chunk);
        let v = u128::from_le_bytes(buf);
        if v >= modulus {
            return Err(Error::Frame("residue exceeds modulus".into()));
        }
        out.push(v);
    }
    Ok(out)
}

/// One side of an in-process duplex channel. Tracks raw frame bytes per
/// direction; the semantic residue-byte counters live in the cost model.
pub struct Endpoint {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
    pub frame_bytes_sent: u64,
    pub frame_bytes_received: u64,
}

impl Endpoint {
    pub fn send(&mut self, msg: &WireMessage) -> Result<()> {
        let bytes = frame(msg);
        self.frame_bytes_sent += bytes.len() as u64;
        self.tx
            .send(bytes)
            .map_err(|_| Error::Frame("peer endpoint dropped".into()))
    }

    pub fn recv(&mut self) -> Result<WireMessage> {
        let bytes = self
            .rx
            .recv()
            .map_err(|_| Error::Frame("peer endpoint dropped".into()))?;
        self.frame_bytes_received += bytes.len() as u64;
        let (msg, used) = deframe(&bytes)?;
        if used != bytes.len() {
            return Err(Error::Frame("trailing bytes after frame".into()));
        }
        Ok(msg)
    }

    /// Receive and require a specific message type.
    pub fn recv_expect(&mut self, want: MsgType) -> Result<WireMessage> {
        let msg = self.recv()?;
        if msg.msg_type != want {
            return Err(Error::Frame(format!(
                "expected {want:?}, got {:?}",
                msg.msg_type
            )));
        }
        Ok(msg)
    }
}

pub fn channel_pair() -> (Endpoint, Endpoint) {
    let (tx_a, rx_b) = channel();
    let (tx_b, rx_a) = channel();
    (
        Endpoint { tx: tx_a, rx: rx_a, frame_bytes_sent: 0, frame_bytes_received: 0 },
        Endpoint { tx: tx_b, rx: rx_b, frame_bytes_sent: 0, frame_bytes_received: 0 },
    )
}
