//! JSON profile files.
//!
//! ```json
//! {"name": "toy", "input_shape": [3, 32, 32],
//!  "layers": [{"index": 1, "kind": "conv2d",
//!              "params": {"kernel_h": 3, "kernel_w": 3, "stride_h": 1, "stride_w": 1,
//!                         "pad_h": 1, "pad_w": 1, "in_channels": 3, "out_channels": 8,
//!                         "has_bias": true},
//!              "out_shape": [8, 32, 32]}]}
//! ```
//!
//! Unknown keys are rejected. `out_shape` is recomputed when absent and
//! verified when present. An optional `meta` object is accepted and ignored.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::{
    infer_shape, LayerDescriptor, LayerKind, ModelProfile, ProfileError, TensorShape, Window,
};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfile {
    name: String,
    input_shape: [u64; 3],
    layers: Vec<RawLayer>,
    #[serde(default)]
    #[allow(dead_code)]
    meta: Option<Value>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayer {
    index: usize,
    kind: String,
    #[serde(default)]
    params: Option<Map<String, Value>>,
    #[serde(default)]
    out_shape: Option<[u64; 3]>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConvParams {
    kernel_h: u64,
    kernel_w: u64,
    stride_h: u64,
    stride_w: u64,
    pad_h: u64,
    pad_w: u64,
    in_channels: u64,
    out_channels: u64,
    has_bias: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoolParams {
    kernel_h: u64,
    kernel_w: u64,
    stride_h: u64,
    stride_w: u64,
    pad_h: u64,
    pad_w: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AdaptiveParams {
    out_h: u64,
    out_w: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinearParams {
    in_features: u64,
    out_features: u64,
    has_bias: bool,
}

impl From<PoolParams> for Window {
    fn from(p: PoolParams) -> Self {
        Window {
            kernel_h: p.kernel_h,
            kernel_w: p.kernel_w,
            stride_h: p.stride_h,
            stride_w: p.stride_w,
            pad_h: p.pad_h,
            pad_w: p.pad_w,
        }
    }
}

impl From<Window> for PoolParams {
    fn from(w: Window) -> Self {
        PoolParams {
            kernel_h: w.kernel_h,
            kernel_w: w.kernel_w,
            stride_h: w.stride_h,
            stride_w: w.stride_w,
            pad_h: w.pad_h,
            pad_w: w.pad_w,
        }
    }
}

fn shape(a: [u64; 3]) -> TensorShape {
    TensorShape::new(a[0], a[1], a[2])
}

fn params<T: DeserializeOwned>(
    index: usize,
    map: Option<Map<String, Value>>,
) -> Result<T, ProfileError> {
    serde_json::from_value(Value::Object(map.unwrap_or_default())).map_err(|e| {
        ProfileError::InvalidParams {
            index,
            message: e.to_string(),
        }
    })
}

fn no_params(index: usize, map: Option<Map<String, Value>>) -> Result<(), ProfileError> {
    match map {
        Some(m) if !m.is_empty() => Err(ProfileError::InvalidParams {
            index,
            message: format!("unexpected parameters {:?}", m.keys().collect::<Vec<_>>()),
        }),
        _ => Ok(()),
    }
}

fn parse_kind(
    index: usize,
    kind: &str,
    map: Option<Map<String, Value>>,
) -> Result<LayerKind, ProfileError> {
    let k = match kind {
        "conv2d" => {
            let p: ConvParams = params(index, map)?;
            LayerKind::Conv2d {
                window: Window {
                    kernel_h: p.kernel_h,
                    kernel_w: p.kernel_w,
                    stride_h: p.stride_h,
                    stride_w: p.stride_w,
                    pad_h: p.pad_h,
                    pad_w: p.pad_w,
                },
                in_channels: p.in_channels,
                out_channels: p.out_channels,
                has_bias: p.has_bias,
            }
        }
        "max_pool2d" => LayerKind::MaxPool2d(params::<PoolParams>(index, map)?.into()),
        "avg_pool2d" => LayerKind::AvgPool2d(params::<PoolParams>(index, map)?.into()),
        "adaptive_avg_pool2d" => {
            let p: AdaptiveParams = params(index, map)?;
            LayerKind::AdaptiveAvgPool2d {
                out_h: p.out_h,
                out_w: p.out_w,
            }
        }
        "linear" => {
            let p: LinearParams = params(index, map)?;
            LayerKind::Linear {
                in_features: p.in_features,
                out_features: p.out_features,
                has_bias: p.has_bias,
            }
        }
        "relu" => {
            no_params(index, map)?;
            LayerKind::ReLU
        }
        "dropout" => {
            no_params(index, map)?;
            LayerKind::Dropout
        }
        "flatten" => {
            no_params(index, map)?;
            LayerKind::Flatten
        }
        other => {
            return Err(ProfileError::UnknownKind {
                index,
                kind: other.to_string(),
            })
        }
    };
    k.validate()
        .map_err(|message| ProfileError::InvalidParams { index, message })?;
    Ok(k)
}

/// Parses and validates a profile from JSON text.
pub fn parse_profile(text: &str) -> Result<ModelProfile, ProfileError> {
    let raw: RawProfile =
        serde_json::from_str(text).map_err(|e| ProfileError::Parse(e.to_string()))?;
    let input_shape = shape(raw.input_shape);
    if !input_shape.is_valid() {
        return Err(ProfileError::ShapeChain {
            index: 0,
            message: format!("invalid input shape {input_shape}"),
        });
    }
    let mut layers = Vec::with_capacity(raw.layers.len());
    let mut current = input_shape;
    for (pos, rl) in raw.layers.into_iter().enumerate() {
        let index = pos + 1;
        if rl.index != index {
            return Err(ProfileError::IndexMismatch {
                expected: index,
                found: rl.index,
            });
        }
        let kind = parse_kind(index, &rl.kind, rl.params)?;
        let out = infer_shape(&kind, current)
            .map_err(|message| ProfileError::ShapeChain { index, message })?;
        if let Some(stored) = rl.out_shape.map(shape) {
            if stored != out {
                return Err(ProfileError::ShapeChain {
                    index,
                    message: format!("stored out_shape {stored} but inferred {out}"),
                });
            }
        }
        layers.push(LayerDescriptor {
            index,
            kind,
            in_shape: current,
            out_shape: out,
        });
        current = out;
    }
    Ok(ModelProfile {
        name: raw.name,
        input_shape,
        layers,
    })
}

pub fn load_profile(path: impl AsRef<Path>) -> Result<ModelProfile, ProfileError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| ProfileError::Io(format!("{}: {e}", path.display())))?;
    parse_profile(&text)
}

fn kind_params(kind: &LayerKind) -> Value {
    let v = match *kind {
        LayerKind::Conv2d {
            window,
            in_channels,
            out_channels,
            has_bias,
        } => serde_json::to_value(ConvParams {
            kernel_h: window.kernel_h,
            kernel_w: window.kernel_w,
            stride_h: window.stride_h,
            stride_w: window.stride_w,
            pad_h: window.pad_h,
            pad_w: window.pad_w,
            in_channels,
            out_channels,
            has_bias,
        }),
        LayerKind::MaxPool2d(w) | LayerKind::AvgPool2d(w) => {
            serde_json::to_value(PoolParams::from(w))
        }
        LayerKind::AdaptiveAvgPool2d { out_h, out_w } => {
            serde_json::to_value(AdaptiveParams { out_h, out_w })
        }
        LayerKind::Linear {
            in_features,
            out_features,
            has_bias,
        } => serde_json::to_value(LinearParams {
            in_features,
            out_features,
            has_bias,
        }),
        LayerKind::ReLU | LayerKind::Dropout | LayerKind::Flatten => Ok(json!({})),
    };
    v.expect("plain structs always serialize")
}

pub fn profile_to_json(profile: &ModelProfile) -> Value {
    let layers: Vec<Value> = profile
        .layers
        .iter()
        .map(|l| {
            json!({
                "index": l.index,
                "kind": l.kind.name(),
                "params": kind_params(&l.kind),
                "out_shape": l.out_shape.as_array(),
            })
        })
        .collect();
    json!({
        "name": profile.name,
        "input_shape": profile.input_shape.as_array(),
        "layers": layers,
    })
}

pub fn save_profile(profile: &ModelProfile, path: impl AsRef<Path>) -> Result<(), ProfileError> {
    let path = path.as_ref();
    let text =
        serde_json::to_string_pretty(&profile_to_json(profile)).expect("json values serialize");
    fs::write(path, text + "\n").map_err(|e| ProfileError::Io(format!("{}: {e}", path.display())))
}
