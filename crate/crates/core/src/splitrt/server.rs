use std::io::{self, BufReader, BufWriter, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::time::{Duration, Instant};

use crate::objective::Scenario;
use crate::profile::{CostTable, ModelProfile, ProfileError};

use super::synth::{run_layers, SyntheticTensor};
use super::wire::{code, read_frame, write_frame, Frame, WireError, PROTOCOL_VERSION};
use super::{spin_for, ComputeMode};

/// Idle limit per frame read before a session is dropped.
pub const READ_TIMEOUT: Duration = Duration::from_secs(30);

/// How a session ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SessionOutcome {
    Completed {
        x1: usize,
    },
    /// An ERROR frame with this code was sent.
    Rejected {
        code: u16,
    },
    /// The peer went away before finishing.
    Disconnected,
}

/// Server side of the split harness: executes the suffix of a model.
pub struct SplitServer {
    listener: TcpListener,
    profile: ModelProfile,
    table: CostTable,
    scenario: Scenario,
    compute: ComputeMode,
}

struct Reject(u16, String);

impl From<WireError> for Reject {
    fn from(e: WireError) -> Self {
        Reject(code::MALFORMED_FRAME, e.to_string())
    }
}

impl SplitServer {
    pub fn bind(
        addr: impl ToSocketAddrs,
        profile: ModelProfile,
        scenario: Scenario,
        compute: ComputeMode,
    ) -> io::Result<Self> {
        let table = CostTable::new(&profile, scenario.dtype_bytes).map_err(|e: ProfileError| {
            io::Error::new(io::ErrorKind::InvalidInput, e.to_string())
        })?;
        Ok(Self {
            listener: TcpListener::bind(addr)?,
            profile,
            table,
            scenario,
            compute,
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Accepts sessions one at a time, forever.
    pub fn serve(&self) -> io::Result<()> {
        loop {
            self.serve_one()?;
        }
    }

    /// Accepts and handles a single session.
    pub fn serve_one(&self) -> io::Result<SessionOutcome> {
        let (stream, peer) = self.listener.accept()?;
        let outcome = self.session(stream);
        match &outcome {
            Ok(o) => eprintln!("session {peer}: {o:?}"),
            Err(e) => eprintln!("session {peer}: i/o error: {e}"),
        }
        Ok(outcome.unwrap_or(SessionOutcome::Disconnected))
    }

    fn session(&self, stream: TcpStream) -> io::Result<SessionOutcome> {
        stream.set_read_timeout(Some(READ_TIMEOUT))?;
        stream.set_nodelay(true)?;
        let mut reader = BufReader::new(stream.try_clone()?);
        let mut writer = BufWriter::new(stream);
        match self.exchange(&mut reader, &mut writer) {
            Ok(Some(x1)) => Ok(SessionOutcome::Completed { x1 }),
            Ok(None) => Ok(SessionOutcome::Disconnected),
            Err(Reject(code, message)) => {
                // the peer may already be gone
                let _ = write_frame(&mut writer, &Frame::Error { code, message });
                let _ = writer.get_ref().shutdown(std::net::Shutdown::Both);
                Ok(SessionOutcome::Rejected { code })
            }
        }
    }

    fn exchange<R: io::Read, W: Write>(
        &self,
        r: &mut R,
        w: &mut W,
    ) -> Result<Option<usize>, Reject> {
        let total = self.profile.total_layers();

        let frame = match read_frame(r) {
            Err(WireError::Closed) => return Ok(None),
            other => other?,
        };
        match frame {
            Frame::Hello {
                version,
                model,
                layers,
            } => {
                if version != PROTOCOL_VERSION {
                    return Err(Reject(
                        code::BAD_VERSION,
                        format!("protocol version {version}, server speaks {PROTOCOL_VERSION}"),
                    ));
                }
                if model != self.profile.name || layers as usize != total {
                    return Err(Reject(
                        code::MODEL_MISMATCH,
                        format!(
                            "client model {model} ({layers} layers), server has {} ({total} layers)",
                            self.profile.name
                        ),
                    ));
                }
            }
            other => return Err(unexpected("HELLO", &other)),
        }

        let x1 = match read_frame(r)? {
            Frame::Plan {
                x1,
                scenario_digest,
            } => {
                let x1 = x1 as usize;
                if x1 > total {
                    return Err(Reject(
                        code::PLAN_OUT_OF_RANGE,
                        format!("x1={x1} outside [0, {total}]"),
                    ));
                }
                if scenario_digest != self.scenario.digest() {
                    eprintln!(
                        "note: client scenario digest {scenario_digest:016x} differs from server's"
                    );
                }
                x1
            }
            other => return Err(unexpected("PLAN", &other)),
        };

        let payload = match read_frame(r)? {
            Frame::Tensor {
                split_index,
                payload,
            } => {
                if split_index as usize != x1 {
                    return Err(Reject(
                        code::TENSOR_MISMATCH,
                        format!("tensor after layer {split_index}, plan says {x1}"),
                    ));
                }
                payload
            }
            other => return Err(unexpected("TENSOR", &other)),
        };

        let tensor = SyntheticTensor::new(
            payload,
            self.profile.boundary_shape(x1),
            self.scenario.dtype_bytes,
        )
        .map_err(|e| Reject(code::TENSOR_MISMATCH, e.to_string()))?;

        let start = Instant::now();
        let out = run_layers(&self.profile, x1 + 1, total, tensor, |i| {
            if self.compute == ComputeMode::Emulated {
                spin_for(self.table.layer_work(i) as f64 / self.scenario.server.capacity());
            }
        })
        .map_err(|e| Reject(code::TENSOR_MISMATCH, e.to_string()))?;
        let server_compute_ns = start.elapsed().as_nanos() as u64;

        write_frame(
            w,
            &Frame::Result {
                digest: out.digest(),
                server_compute_ns,
            },
        )
        .map_err(|e| Reject(code::MALFORMED_FRAME, e.to_string()))?;

        // the edge reports its measurements last; absence is not an error
        if let Ok(Frame::Timing {
            t_edge_ns,
            t_tx_ns,
            t_server_ns,
            total_ns,
        }) = read_frame(r)
        {
            eprintln!(
                "timing x1={x1}: edge {t_edge_ns} ns, tx {t_tx_ns} ns, server {t_server_ns} ns, total {total_ns} ns"
            );
        }
        Ok(Some(x1))
    }
}

fn unexpected(wanted: &str, got: &Frame) -> Reject {
    Reject(
        code::UNEXPECTED_FRAME,
        format!("expected {wanted}, got {}", got.name()),
    )
}
