//! Length-prefixed binary frames.
//!
//! Each frame is `len: u32 LE | tag: u8 | body`, where `len` counts the tag and
//! body. All integers are little-endian; strings are `u16` length + UTF-8.
//!
//! | tag | frame  | body                                                    |
//! |-----|--------|---------------------------------------------------------|
//! | 1   | HELLO  | version u32, model str, layers u32                      |
//! | 2   | PLAN   | x1 u32, scenario_digest u64                             |
//! | 3   | TENSOR | split_index u32, payload_len u64, payload               |
//! | 4   | RESULT | digest [u8; 8], server_compute_ns u64                   |
//! | 5   | TIMING | t_edge_ns u64, t_tx_ns u64, t_server_ns u64, total_ns u64 |
//! | 6   | ERROR  | code u16, message str                                   |

use std::io::{self, Read, Write};

use thiserror::Error;

pub const PROTOCOL_VERSION: u32 = 1;
/// Largest accepted frame (tag + body).
pub const MAX_FRAME_LEN: u32 = 1 << 30;

const TAG_HELLO: u8 = 1;
const TAG_PLAN: u8 = 2;
const TAG_TENSOR: u8 = 3;
const TAG_RESULT: u8 = 4;
const TAG_TIMING: u8 = 5;
const TAG_ERROR: u8 = 6;

/// ERROR frame codes.
pub mod code {
    pub const BAD_VERSION: u16 = 1;
    pub const PLAN_OUT_OF_RANGE: u16 = 2;
    pub const MALFORMED_FRAME: u16 = 3;
    pub const UNEXPECTED_FRAME: u16 = 4;
    pub const MODEL_MISMATCH: u16 = 5;
    pub const TENSOR_MISMATCH: u16 = 6;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Frame {
    Hello {
        version: u32,
        model: String,
        layers: u32,
    },
    Plan {
        x1: u32,
        scenario_digest: u64,
    },
    Tensor {
        split_index: u32,
        payload: Vec<u8>,
    },
    Result {
        digest: [u8; 8],
        server_compute_ns: u64,
    },
    Timing {
        t_edge_ns: u64,
        t_tx_ns: u64,
        t_server_ns: u64,
        total_ns: u64,
    },
    Error {
        code: u16,
        message: String,
    },
}

impl Frame {
    pub fn name(&self) -> &'static str {
        match self {
            Frame::Hello { .. } => "HELLO",
            Frame::Plan { .. } => "PLAN",
            Frame::Tensor { .. } => "TENSOR",
            Frame::Result { .. } => "RESULT",
            Frame::Timing { .. } => "TIMING",
            Frame::Error { .. } => "ERROR",
        }
    }
}

#[derive(Debug, Error)]
pub enum WireError {
    #[error("connection closed")]
    Closed,
    #[error("truncated frame")]
    Truncated,
    #[error("frame length {0} exceeds limit")]
    TooLarge(u64),
    #[error("unknown frame tag {0}")]
    UnknownTag(u8),
    #[error("malformed frame: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    let mut end = s.len().min(u16::MAX as usize);
    while !s.is_char_boundary(end) {
        end -= 1;
    }
    let bytes = &s.as_bytes()[..end];
    buf.extend_from_slice(&(bytes.len() as u16).to_le_bytes());
    buf.extend_from_slice(bytes);
}

/// Serializes a frame including its length prefix.
pub fn encode(frame: &Frame) -> Vec<u8> {
    let mut body = Vec::new();
    let tag = match frame {
        Frame::Hello {
            version,
            model,
            layers,
        } => {
            body.extend_from_slice(&version.to_le_bytes());
            put_str(&mut body, model);
            body.extend_from_slice(&layers.to_le_bytes());
            TAG_HELLO
        }
        Frame::Plan {
            x1,
            scenario_digest,
        } => {
            body.extend_from_slice(&x1.to_le_bytes());
            body.extend_from_slice(&scenario_digest.to_le_bytes());
            TAG_PLAN
        }
        Frame::Tensor {
            split_index,
            payload,
        } => {
            body.reserve(12 + payload.len());
            body.extend_from_slice(&split_index.to_le_bytes());
            body.extend_from_slice(&(payload.len() as u64).to_le_bytes());
            body.extend_from_slice(payload);
            TAG_TENSOR
        }
        Frame::Result {
            digest,
            server_compute_ns,
        } => {
            body.extend_from_slice(digest);
            body.extend_from_slice(&server_compute_ns.to_le_bytes());
            TAG_RESULT
        }
        Frame::Timing {
            t_edge_ns,
            t_tx_ns,
            t_server_ns,
            total_ns,
        } => {
            for v in [t_edge_ns, t_tx_ns, t_server_ns, total_ns] {
                body.extend_from_slice(&v.to_le_bytes());
            }
            TAG_TIMING
        }
        Frame::Error { code, message } => {
            body.extend_from_slice(&code.to_le_bytes());
            put_str(&mut body, message);
            TAG_ERROR
        }
    };
    let len = (body.len() + 1) as u32;
    let mut out = Vec::with_capacity(body.len() + 5);
    out.extend_from_slice(&len.to_le_bytes());
    out.push(tag);
    out.extend_from_slice(&body);
    out
}

pub fn write_frame<W: Write>(w: &mut W, frame: &Frame) -> io::Result<()> {
    w.write_all(&encode(frame))?;
    w.flush()
}

/// Fills `buf`, distinguishing a clean close before the first byte.
fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<bool, WireError> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => {
                return if filled == 0 {
                    Ok(false)
                } else {
                    Err(WireError::Truncated)
                }
            }
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(true)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        if self.buf.len() - self.pos < n {
            return Err(WireError::Malformed("body shorter than its fields".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, WireError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, WireError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String, WireError> {
        let n = self.u16()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| WireError::Malformed("invalid UTF-8".into()))
    }

    fn finish(self) -> Result<(), WireError> {
        if self.pos != self.buf.len() {
            return Err(WireError::Malformed(format!(
                "{} trailing bytes",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

/// Decodes a frame body (tag + fields, no length prefix).
pub fn decode(body: &[u8]) -> Result<Frame, WireError> {
    let (&tag, rest) = body
        .split_first()
        .ok_or_else(|| WireError::Malformed("empty frame".into()))?;
    let mut c = Cursor { buf: rest, pos: 0 };
    let frame = match tag {
        TAG_HELLO => Frame::Hello {
            version: c.u32()?,
            model: c.string()?,
            layers: c.u32()?,
        },
        TAG_PLAN => Frame::Plan {
            x1: c.u32()?,
            scenario_digest: c.u64()?,
        },
        TAG_TENSOR => {
            let split_index = c.u32()?;
            let len = c.u64()?;
            let remaining = (rest.len() - c.pos) as u64;
            if len != remaining {
                return Err(WireError::Malformed(format!(
                    "payload_len {len} but {remaining} payload bytes"
                )));
            }
            Frame::Tensor {
                split_index,
                payload: c.take(len as usize)?.to_vec(),
            }
        }
        TAG_RESULT => Frame::Result {
            digest: c.take(8)?.try_into().unwrap(),
            server_compute_ns: c.u64()?,
        },
        TAG_TIMING => Frame::Timing {
            t_edge_ns: c.u64()?,
            t_tx_ns: c.u64()?,
            t_server_ns: c.u64()?,
            total_ns: c.u64()?,
        },
        TAG_ERROR => Frame::Error {
            code: c.u16()?,
            message: c.string()?,
        },
        other => return Err(WireError::UnknownTag(other)),
    };
    c.finish()?;
    Ok(frame)
}

/// Reads one frame; a clean close before the prefix yields [`WireError::Closed`].
pub fn read_frame<R: Read>(r: &mut R) -> Result<Frame, WireError> {
    let mut prefix = [0u8; 4];
    if !read_full(r, &mut prefix)? {
        return Err(WireError::Closed);
    }
    let len = u32::from_le_bytes(prefix);
    if len == 0 {
        return Err(WireError::Malformed("zero-length frame".into()));
    }
    if len > MAX_FRAME_LEN {
        return Err(WireError::TooLarge(len.into()));
    }
    let mut body = vec![0u8; len as usize];
    if !read_full(r, &mut body)? {
        return Err(WireError::Truncated);
    }
    decode(&body)
}
