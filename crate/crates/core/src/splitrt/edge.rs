use std::io::{BufReader, BufWriter};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Instant;

use serde::Serialize;

use crate::objective::{LatencyBreakdown, Scenario, SplitPlan};
use crate::profile::{CostTable, ModelProfile};

use super::server::READ_TIMEOUT;
use super::synth::{execute_monolithic, run_layers, SyntheticTensor};
use super::throttle::Throttled;
use super::wire::{read_frame, write_frame, Frame, PROTOCOL_VERSION};
use super::{spin_for, ComputeMode, RunError};

/// Per-segment latencies in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SegmentTimes {
    pub t_edge_s: f64,
    pub t_tx_s: f64,
    pub t_server_s: f64,
    pub total_s: f64,
}

impl From<LatencyBreakdown> for SegmentTimes {
    fn from(b: LatencyBreakdown) -> Self {
        Self {
            t_edge_s: b.t_edge,
            t_tx_s: b.t_tx,
            t_server_s: b.t_server,
            total_s: b.total(),
        }
    }
}

/// Outcome of one split inference.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub model: String,
    pub x1: usize,
    pub x2: usize,
    pub tx_bytes: u64,
    pub predicted: SegmentTimes,
    pub measured: SegmentTimes,
    pub digest: String,
    pub expected_digest: String,
    #[serde(rename = "match")]
    pub matches: bool,
}

fn hex(d: [u8; 8]) -> String {
    d.iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs the edge half of `plan` against the server at `addr`.
pub fn run_edge(
    addr: impl ToSocketAddrs + std::fmt::Display,
    profile: &ModelProfile,
    scenario: &Scenario,
    plan: SplitPlan,
    compute: ComputeMode,
) -> Result<RunReport, RunError> {
    let total = profile.total_layers();
    if plan.total_layers() != total {
        return Err(RunError::Setup(format!(
            "plan covers {} layers, model has {total}",
            plan.total_layers()
        )));
    }
    let table = CostTable::new(profile, scenario.dtype_bytes)
        .map_err(|e| RunError::Setup(e.to_string()))?;
    let x1 = plan.x1();
    let input = SyntheticTensor::input(profile.input_shape, scenario.dtype_bytes);
    let expected = execute_monolithic(profile, &input)?;

    let stream = TcpStream::connect(&addr).map_err(|source| RunError::Connect {
        addr: addr.to_string(),
        source,
    })?;
    stream.set_read_timeout(Some(READ_TIMEOUT))?;
    stream.set_nodelay(true)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream.try_clone()?);

    let started = Instant::now();
    write_frame(
        &mut writer,
        &Frame::Hello {
            version: PROTOCOL_VERSION,
            model: profile.name.clone(),
            layers: total as u32,
        },
    )?;
    write_frame(
        &mut writer,
        &Frame::Plan {
            x1: x1 as u32,
            scenario_digest: scenario.digest(),
        },
    )?;

    let edge_start = Instant::now();
    let boundary = run_layers(profile, 1, x1, input, |i| {
        if compute == ComputeMode::Emulated {
            spin_for(table.layer_work(i) as f64 / scenario.edge.capacity());
        }
    })?;
    let t_edge = edge_start.elapsed().as_secs_f64();

    let tx_bytes = boundary.bytes().len() as u64;
    let tx_start = Instant::now();
    {
        let mut throttled = Throttled::new(&stream, scenario.link.bandwidth_bps);
        write_frame(
            &mut throttled,
            &Frame::Tensor {
                split_index: x1 as u32,
                payload: boundary.into_bytes(),
            },
        )?;
    }
    let t_tx = tx_start.elapsed().as_secs_f64();

    let (digest, server_ns) = match read_frame(&mut reader)? {
        Frame::Result {
            digest,
            server_compute_ns,
        } => (digest, server_compute_ns),
        Frame::Error { code, message } => return Err(RunError::Remote { code, message }),
        other => {
            return Err(RunError::Protocol(format!(
                "expected RESULT, got {}",
                other.name()
            )))
        }
    };
    let total_s = started.elapsed().as_secs_f64();
    let t_server = server_ns as f64 * 1e-9;

    let ns = |s: f64| (s * 1e9) as u64;
    // best effort: the result is already in hand
    let _ = write_frame(
        &mut writer,
        &Frame::Timing {
            t_edge_ns: ns(t_edge),
            t_tx_ns: ns(t_tx),
            t_server_ns: server_ns,
            total_ns: ns(total_s),
        },
    );

    Ok(RunReport {
        model: profile.name.clone(),
        x1,
        x2: plan.x2(),
        tx_bytes,
        predicted: LatencyBreakdown::of(plan, &table, scenario).into(),
        measured: SegmentTimes {
            t_edge_s: t_edge,
            t_tx_s: t_tx,
            t_server_s: t_server,
            total_s,
        },
        digest: hex(digest),
        expected_digest: hex(expected),
        matches: digest == expected,
    })
}
