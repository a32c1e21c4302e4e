//! Declarative model profiles.
//!
//! A [`ModelProfile`] is an ordered list of layer descriptors together with the
//! input geometry. Every cost the planner uses (work, weight bytes, activation
//! bytes) is derived from this geometry by [`derive_costs`].

mod builtin;
mod cost;
mod format;

pub use builtin::{builtin_profile, synthetic_profile, BUILTIN_MODELS};
pub use cost::{derive_costs, CostTable};
pub use format::{load_profile, parse_profile, profile_to_json, save_profile};

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProfileError {
    #[error("failed to read profile: {0}")]
    Io(String),
    #[error("profile parse error: {0}")]
    Parse(String),
    #[error("unknown layer kind `{kind}` at layer {index}")]
    UnknownKind { index: usize, kind: String },
    #[error("invalid parameters for layer {index}: {message}")]
    InvalidParams { index: usize, message: String },
    #[error("layer index {found} at position {expected}")]
    IndexMismatch { expected: usize, found: usize },
    #[error("shape-chain mismatch at layer {index}: {message}")]
    ShapeChain { index: usize, message: String },
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("operation count overflow at layer {0}")]
    Overflow(usize),
}

/// Activation geometry. A flat vector of `n` features is `n x 1 x 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TensorShape {
    pub channels: u64,
    pub height: u64,
    pub width: u64,
}

impl TensorShape {
    pub const fn new(channels: u64, height: u64, width: u64) -> Self {
        Self {
            channels,
            height,
            width,
        }
    }

    pub const fn flat(features: u64) -> Self {
        Self::new(features, 1, 1)
    }

    pub fn is_valid(&self) -> bool {
        self.channels >= 1 && self.height >= 1 && self.width >= 1
    }

    /// Number of scalar elements, `None` on overflow.
    pub fn elements(&self) -> Option<u64> {
        self.channels
            .checked_mul(self.height)?
            .checked_mul(self.width)
    }

    pub fn as_array(&self) -> [u64; 3] {
        [self.channels, self.height, self.width]
    }
}

impl fmt::Display for TensorShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.channels, self.height, self.width)
    }
}

/// Spatial window parameters shared by convolution and pooling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Window {
    pub kernel_h: u64,
    pub kernel_w: u64,
    pub stride_h: u64,
    pub stride_w: u64,
    pub pad_h: u64,
    pub pad_w: u64,
}

impl Window {
    pub const fn square(kernel: u64, stride: u64, pad: u64) -> Self {
        Self {
            kernel_h: kernel,
            kernel_w: kernel,
            stride_h: stride,
            stride_w: stride,
            pad_h: pad,
            pad_w: pad,
        }
    }

    fn validate(&self) -> Result<(), String> {
        if self.kernel_h == 0 || self.kernel_w == 0 {
            return Err("kernel dimensions must be >= 1".into());
        }
        if self.stride_h == 0 || self.stride_w == 0 {
            return Err("stride dimensions must be >= 1".into());
        }
        Ok(())
    }

    fn size(&self) -> Option<u64> {
        self.kernel_h.checked_mul(self.kernel_w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerKind {
    Conv2d {
        window: Window,
        in_channels: u64,
        out_channels: u64,
        has_bias: bool,
    },
    ReLU,
    MaxPool2d(Window),
    AvgPool2d(Window),
    AdaptiveAvgPool2d {
        out_h: u64,
        out_w: u64,
    },
    Linear {
        in_features: u64,
        out_features: u64,
        has_bias: bool,
    },
    Dropout,
    Flatten,
}

impl LayerKind {
    pub fn conv(in_channels: u64, out_channels: u64, kernel: u64, stride: u64, pad: u64) -> Self {
        LayerKind::Conv2d {
            window: Window::square(kernel, stride, pad),
            in_channels,
            out_channels,
            has_bias: true,
        }
    }

    pub fn max_pool(kernel: u64, stride: u64) -> Self {
        LayerKind::MaxPool2d(Window::square(kernel, stride, 0))
    }

    pub fn linear(in_features: u64, out_features: u64) -> Self {
        LayerKind::Linear {
            in_features,
            out_features,
            has_bias: true,
        }
    }

    /// Name used in the profile file format.
    pub fn name(&self) -> &'static str {
        match self {
            LayerKind::Conv2d { .. } => "conv2d",
            LayerKind::ReLU => "relu",
            LayerKind::MaxPool2d(_) => "max_pool2d",
            LayerKind::AvgPool2d(_) => "avg_pool2d",
            LayerKind::AdaptiveAvgPool2d { .. } => "adaptive_avg_pool2d",
            LayerKind::Linear { .. } => "linear",
            LayerKind::Dropout => "dropout",
            LayerKind::Flatten => "flatten",
        }
    }

    /// Checks the parameter invariants that do not depend on the input shape.
    pub fn validate(&self) -> Result<(), String> {
        match self {
            LayerKind::Conv2d {
                window,
                in_channels,
                out_channels,
                ..
            } => {
                window.validate()?;
                if *in_channels == 0 || *out_channels == 0 {
                    return Err("channel counts must be >= 1".into());
                }
                Ok(())
            }
            LayerKind::MaxPool2d(w) | LayerKind::AvgPool2d(w) => w.validate(),
            LayerKind::AdaptiveAvgPool2d { out_h, out_w } => {
                if *out_h == 0 || *out_w == 0 {
                    return Err("adaptive output size must be >= 1".into());
                }
                Ok(())
            }
            LayerKind::Linear {
                in_features,
                out_features,
                ..
            } => {
                if *in_features == 0 || *out_features == 0 {
                    return Err("feature counts must be >= 1".into());
                }
                Ok(())
            }
            LayerKind::ReLU | LayerKind::Dropout | LayerKind::Flatten => Ok(()),
        }
    }

    /// Weight element count (including bias).
    pub fn weight_elements(&self) -> Option<u64> {
        match *self {
            LayerKind::Conv2d {
                window,
                in_channels,
                out_channels,
                has_bias,
            } => {
                let w = window
                    .size()?
                    .checked_mul(in_channels)?
                    .checked_mul(out_channels)?;
                w.checked_add(if has_bias { out_channels } else { 0 })
            }
            LayerKind::Linear {
                in_features,
                out_features,
                has_bias,
            } => in_features
                .checked_mul(out_features)?
                .checked_add(if has_bias { out_features } else { 0 }),
            _ => Some(0),
        }
    }

    /// Multiply-accumulate-equivalent operation count for mapping `input` to `out`.
    pub fn work(&self, input: TensorShape, out: TensorShape) -> Option<u64> {
        let out_elems = out.elements()?;
        match *self {
            LayerKind::Conv2d {
                window,
                in_channels,
                has_bias,
                ..
            } => {
                let per_output = window.size()?.checked_mul(in_channels)?;
                let macs = per_output.checked_mul(out_elems)?;
                macs.checked_add(if has_bias { out_elems } else { 0 })
            }
            LayerKind::Linear {
                in_features,
                out_features,
                has_bias,
            } => in_features
                .checked_mul(out_features)?
                .checked_add(if has_bias { out_features } else { 0 }),
            LayerKind::ReLU | LayerKind::Dropout => Some(out_elems),
            LayerKind::MaxPool2d(w) | LayerKind::AvgPool2d(w) => w.size()?.checked_mul(out_elems),
            LayerKind::AdaptiveAvgPool2d { out_h, out_w } => {
                let win = adaptive_window(input.height, out_h)
                    .checked_mul(adaptive_window(input.width, out_w))?;
                win.checked_mul(out_elems)
            }
            LayerKind::Flatten => Some(0),
        }
    }
}

/// Largest adaptive pooling window along one axis.
fn adaptive_window(input: u64, output: u64) -> u64 {
    // bin i covers [floor(i*in/out), ceil((i+1)*in/out))
    (0..output)
        .map(|i| {
            let start = i * input / output;
            let end = ((i + 1) * input).div_ceil(output);
            end - start
        })
        .max()
        .unwrap_or(1)
}

fn window_dim(input: u64, kernel: u64, stride: u64, pad: u64, axis: &str) -> Result<u64, String> {
    let padded = pad
        .checked_mul(2)
        .and_then(|p| p.checked_add(input))
        .ok_or_else(|| format!("{axis} padding overflows"))?;
    if padded < kernel {
        return Err(format!(
            "negative computed {axis}: input {input} + 2*{pad} < kernel {kernel}"
        ));
    }
    Ok((padded - kernel) / stride + 1)
}

/// Output geometry of `kind` applied to `input`.
///
/// `Linear` accepts any input whose element count equals `in_features`; a
/// preceding feature map is flattened implicitly.
pub fn infer_shape(kind: &LayerKind, input: TensorShape) -> Result<TensorShape, String> {
    kind.validate()?;
    if !input.is_valid() {
        return Err(format!("invalid input shape {input}"));
    }
    match *kind {
        LayerKind::Conv2d {
            window,
            in_channels,
            out_channels,
            ..
        } => {
            if input.channels != in_channels {
                return Err(format!(
                    "conv2d expects {in_channels} input channels, got {}",
                    input.channels
                ));
            }
            let h = window_dim(
                input.height,
                window.kernel_h,
                window.stride_h,
                window.pad_h,
                "height",
            )?;
            let w = window_dim(
                input.width,
                window.kernel_w,
                window.stride_w,
                window.pad_w,
                "width",
            )?;
            Ok(TensorShape::new(out_channels, h, w))
        }
        LayerKind::MaxPool2d(window) | LayerKind::AvgPool2d(window) => {
            let h = window_dim(
                input.height,
                window.kernel_h,
                window.stride_h,
                window.pad_h,
                "height",
            )?;
            let w = window_dim(
                input.width,
                window.kernel_w,
                window.stride_w,
                window.pad_w,
                "width",
            )?;
            Ok(TensorShape::new(input.channels, h, w))
        }
        LayerKind::AdaptiveAvgPool2d { out_h, out_w } => {
            if out_h > input.height || out_w > input.width {
                return Err(format!(
                    "adaptive pool output {out_h}x{out_w} exceeds input {}x{}",
                    input.height, input.width
                ));
            }
            Ok(TensorShape::new(input.channels, out_h, out_w))
        }
        LayerKind::Linear {
            in_features,
            out_features,
            ..
        } => {
            let n = input
                .elements()
                .ok_or_else(|| "input element count overflows".to_string())?;
            if n != in_features {
                return Err(format!(
                    "linear expects {in_features} input features, got {n} ({input})"
                ));
            }
            Ok(TensorShape::flat(out_features))
        }
        LayerKind::ReLU | LayerKind::Dropout => Ok(input),
        LayerKind::Flatten => input
            .elements()
            .map(TensorShape::flat)
            .ok_or_else(|| "input element count overflows".to_string()),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerDescriptor {
    /// 1-based position in the parent profile.
    pub index: usize,
    pub kind: LayerKind,
    pub in_shape: TensorShape,
    pub out_shape: TensorShape,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelProfile {
    pub name: String,
    pub input_shape: TensorShape,
    pub layers: Vec<LayerDescriptor>,
}

impl ModelProfile {
    /// Builds a profile by running shape inference over `kinds`.
    pub fn from_kinds(
        name: impl Into<String>,
        input_shape: TensorShape,
        kinds: impl IntoIterator<Item = LayerKind>,
    ) -> Result<Self, ProfileError> {
        if !input_shape.is_valid() {
            return Err(ProfileError::ShapeChain {
                index: 0,
                message: format!("invalid input shape {input_shape}"),
            });
        }
        let mut layers = Vec::new();
        let mut shape = input_shape;
        for (pos, kind) in kinds.into_iter().enumerate() {
            let index = pos + 1;
            let out = infer_shape(&kind, shape)
                .map_err(|message| ProfileError::ShapeChain { index, message })?;
            layers.push(LayerDescriptor {
                index,
                kind,
                in_shape: shape,
                out_shape: out,
            });
            shape = out;
        }
        Ok(Self {
            name: name.into(),
            input_shape,
            layers,
        })
    }

    /// Total layer count.
    pub fn total_layers(&self) -> usize {
        self.layers.len()
    }

    /// Re-checks the index and shape-chain invariants.
    pub fn validate(&self) -> Result<(), ProfileError> {
        let mut shape = self.input_shape;
        for (pos, layer) in self.layers.iter().enumerate() {
            let index = pos + 1;
            if layer.index != index {
                return Err(ProfileError::IndexMismatch {
                    expected: index,
                    found: layer.index,
                });
            }
            if layer.in_shape != shape {
                return Err(ProfileError::ShapeChain {
                    index,
                    message: format!(
                        "in_shape {} does not match previous output {shape}",
                        layer.in_shape
                    ),
                });
            }
            let out = infer_shape(&layer.kind, shape)
                .map_err(|message| ProfileError::ShapeChain { index, message })?;
            if out != layer.out_shape {
                return Err(ProfileError::ShapeChain {
                    index,
                    message: format!("stored out_shape {} but inferred {out}", layer.out_shape),
                });
            }
            shape = out;
        }
        Ok(())
    }

    /// Shape of the tensor leaving the first `x1` layers (input shape for 0).
    pub fn boundary_shape(&self, x1: usize) -> TensorShape {
        if x1 == 0 {
            self.input_shape
        } else {
            self.layers[x1 - 1].out_shape
        }
    }
}
