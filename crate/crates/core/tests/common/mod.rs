//! Helpers shared by the integration test targets.

#![allow(dead_code)]

use std::net::SocketAddr;
use std::thread::{self, JoinHandle};

use rand::Rng;
use splitplan::objective::{LinkSpec, Scenario, BYTES_PER_MB, HZ_PER_GHZ};
use splitplan::profile::{infer_shape, CostTable, LayerKind, ModelProfile, TensorShape, Window};
use splitplan::splitrt::{ComputeMode, SessionOutcome, SplitServer};

/// A scenario drawn uniformly from the sensitivity ranges of every parameter.
pub fn sampled_scenario(rng: &mut impl Rng) -> Scenario {
    let mut s = Scenario {
        link: LinkSpec::from_mbps(rng.gen_range(1.0..=200.0)),
        ..Scenario::default()
    };
    s.edge.cores = rng.gen_range(1..=8);
    s.edge.clock_hz = rng.gen_range(1.0..=2.0) * HZ_PER_GHZ;
    s.edge.storage_bytes = Some(rng.gen_range(256..=16_000u64) * BYTES_PER_MB);
    s.server.cores = rng.gen_range(1..=8);
    s.server.clock_hz = rng.gen_range(1.5..=3.2) * HZ_PER_GHZ;
    s
}

/// A random valid layer chain of `1..=max_layers` layers on a small input.
pub fn random_toy_profile(rng: &mut impl Rng, max_layers: usize) -> ModelProfile {
    let layers = rng.gen_range(1..=max_layers);
    let side = rng.gen_range(4..=24);
    let input = TensorShape::new(rng.gen_range(1..=4), side, side);
    let mut shape = input;
    let mut kinds = Vec::with_capacity(layers);
    while kinds.len() < layers {
        let spatial = shape.height > 1 || shape.width > 1;
        let kind = match rng.gen_range(0..7) {
            0 | 1 if spatial => {
                let k = if shape.height >= 3 && shape.width >= 3 && rng.gen_bool(0.5) {
                    3
                } else {
                    1
                };
                let stride = rng.gen_range(1..=2);
                let mut conv =
                    LayerKind::conv(shape.channels, rng.gen_range(1..=16), k, stride, k / 2);
                if let LayerKind::Conv2d { has_bias, .. } = &mut conv {
                    *has_bias = rng.gen_bool(0.5);
                }
                conv
            }
            2 if shape.height >= 2 && shape.width >= 2 => {
                if rng.gen_bool(0.5) {
                    LayerKind::max_pool(2, 2)
                } else {
                    LayerKind::AvgPool2d(Window::square(2, 2, 0))
                }
            }
            3 => LayerKind::ReLU,
            4 => LayerKind::Dropout,
            5 => LayerKind::Flatten,
            _ => {
                let n = shape.elements().expect("small shapes");
                LayerKind::linear(n, rng.gen_range(1..=64))
            }
        };
        if let Ok(out) = infer_shape(&kind, shape) {
            shape = out;
            kinds.push(kind);
        }
    }
    ModelProfile::from_kinds("toy", input, kinds).expect("generated chain is valid")
}

/// A random scenario whose edge storage sits near the toy model's memory range,
/// so the storage constraint actually binds.
pub fn toy_scenario(rng: &mut impl Rng, profile: &ModelProfile) -> Scenario {
    let mut s = sampled_scenario(rng);
    let table = CostTable::new(profile, s.dtype_bytes).expect("toy costs fit");
    let top = table.edge_mem(table.total_layers());
    s.edge.storage_bytes = Some(rng.gen_range(0..=top + top / 4));
    s
}

/// Ten layers alternating convolution and activation.
pub fn ten_layer_toy() -> ModelProfile {
    let kinds = (0..10).map(|i| {
        if i % 2 == 0 {
            LayerKind::conv(if i == 0 { 3 } else { 8 }, 8, 3, 1, 1)
        } else {
            LayerKind::ReLU
        }
    });
    ModelProfile::from_kinds("toy10", TensorShape::new(3, 16, 16), kinds).unwrap()
}

/// Starts a loopback server that handles `sessions` sessions on a background thread.
pub fn spawn_server(
    profile: ModelProfile,
    scenario: Scenario,
    sessions: usize,
) -> (SocketAddr, JoinHandle<Vec<SessionOutcome>>) {
    let server =
        SplitServer::bind("127.0.0.1:0", profile, scenario, ComputeMode::Synthetic).unwrap();
    let addr = server.local_addr().unwrap();
    let handle =
        thread::spawn(move || (0..sessions).map(|_| server.serve_one().unwrap()).collect());
    (addr, handle)
}
