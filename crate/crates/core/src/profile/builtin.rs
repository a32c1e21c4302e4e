//! Built-in architecture tables.
//!
//! | model       | layers | enumeration                                                    |
//! |-------------|--------|----------------------------------------------------------------|
//! | alexnet     | 21     | 13 feature ops, adaptive avg-pool 6x6, 7 classifier ops        |
//! | vgg13       | 32     | 25 feature ops, 7 classifier ops (avg-pool and flatten omitted) |
//! | vgg16       | 38     | 31 feature ops, 7 classifier ops                               |
//! | vgg19       | 44     | 37 feature ops, 7 classifier ops                               |
//! | mobilenetv2 | 21     | block level: stem, 17 inverted-residual surrogates, 1x1 head, pool, linear |
//!
//! Classifier ops are Linear/ReLU/Dropout in the usual order; the first
//! Linear flattens its input implicitly. MobileNetV2 blocks are represented by
//! a single 3x3 convolution with the block's channel change and stride, with
//! batch-norm folded into the bias.

use super::{LayerKind, ModelProfile, ProfileError, TensorShape};

pub const BUILTIN_MODELS: [&str; 5] = ["alexnet", "vgg13", "vgg16", "vgg19", "mobilenetv2"];

const IMAGE: TensorShape = TensorShape::new(3, 224, 224);

pub fn builtin_profile(name: &str) -> Result<ModelProfile, ProfileError> {
    let kinds = match name.to_ascii_lowercase().as_str() {
        "alexnet" => alexnet(),
        "vgg13" => vgg(&[2, 2, 2, 2, 2]),
        "vgg16" => vgg(&[2, 2, 3, 3, 3]),
        "vgg19" => vgg(&[2, 2, 4, 4, 4]),
        "mobilenetv2" => mobilenet_v2(),
        other => {
            if let Some(n) = other.strip_prefix("synthetic-") {
                let layers = n
                    .parse()
                    .map_err(|_| ProfileError::UnknownModel(name.to_string()))?;
                return synthetic_profile(layers);
            }
            return Err(ProfileError::UnknownModel(name.to_string()));
        }
    };
    ModelProfile::from_kinds(name.to_ascii_lowercase(), IMAGE, kinds)
}

fn alexnet() -> Vec<LayerKind> {
    vec![
        LayerKind::conv(3, 64, 11, 4, 2),
        LayerKind::ReLU,
        LayerKind::max_pool(3, 2),
        LayerKind::conv(64, 192, 5, 1, 2),
        LayerKind::ReLU,
        LayerKind::max_pool(3, 2),
        LayerKind::conv(192, 384, 3, 1, 1),
        LayerKind::ReLU,
        LayerKind::conv(384, 256, 3, 1, 1),
        LayerKind::ReLU,
        LayerKind::conv(256, 256, 3, 1, 1),
        LayerKind::ReLU,
        LayerKind::max_pool(3, 2),
        LayerKind::AdaptiveAvgPool2d { out_h: 6, out_w: 6 },
        LayerKind::Dropout,
        LayerKind::linear(256 * 6 * 6, 4096),
        LayerKind::ReLU,
        LayerKind::Dropout,
        LayerKind::linear(4096, 4096),
        LayerKind::ReLU,
        LayerKind::linear(4096, 1000),
    ]
}

/// `convs_per_stage` gives the number of 3x3 convolutions before each pool.
fn vgg(convs_per_stage: &[usize; 5]) -> Vec<LayerKind> {
    const WIDTHS: [u64; 5] = [64, 128, 256, 512, 512];
    let mut kinds = Vec::new();
    let mut channels = 3;
    for (&n, &width) in convs_per_stage.iter().zip(WIDTHS.iter()) {
        for _ in 0..n {
            kinds.push(LayerKind::conv(channels, width, 3, 1, 1));
            kinds.push(LayerKind::ReLU);
            channels = width;
        }
        kinds.push(LayerKind::max_pool(2, 2));
    }
    kinds.extend([
        LayerKind::linear(512 * 7 * 7, 4096),
        LayerKind::ReLU,
        LayerKind::Dropout,
        LayerKind::linear(4096, 4096),
        LayerKind::ReLU,
        LayerKind::Dropout,
        LayerKind::linear(4096, 1000),
    ]);
    kinds
}

fn mobilenet_v2() -> Vec<LayerKind> {
    // (expansion, channels, repeats, first stride); expansion only affects the
    // real block internals and is kept for reference.
    const SETTINGS: [(u64, u64, usize, u64); 7] = [
        (1, 16, 1, 1),
        (6, 24, 2, 2),
        (6, 32, 3, 2),
        (6, 64, 4, 2),
        (6, 96, 3, 1),
        (6, 160, 3, 2),
        (6, 320, 1, 1),
    ];
    let mut kinds = vec![LayerKind::conv(3, 32, 3, 2, 1)];
    let mut channels = 32;
    for &(_, width, repeats, stride) in &SETTINGS {
        for r in 0..repeats {
            let s = if r == 0 { stride } else { 1 };
            kinds.push(LayerKind::conv(channels, width, 3, s, 1));
            channels = width;
        }
    }
    kinds.push(LayerKind::conv(320, 1280, 1, 1, 0));
    kinds.push(LayerKind::AdaptiveAvgPool2d { out_h: 1, out_w: 1 });
    kinds.push(LayerKind::linear(1280, 1000));
    kinds
}

/// Uniform synthetic profile with exactly `layers` layers.
///
/// Conv/ReLU pairs at 64 channels on a 3x224x224 input, with a 2x2 max-pool at
/// every tenth position while the feature map is at least 14 pixels wide.
pub fn synthetic_profile(layers: usize) -> Result<ModelProfile, ProfileError> {
    let mut kinds = Vec::with_capacity(layers);
    let mut channels = 3;
    let mut side = IMAGE.height;
    let mut pair = 0usize;
    for pos in 1..=layers {
        if pos % 10 == 0 && side >= 14 {
            kinds.push(LayerKind::max_pool(2, 2));
            side /= 2;
            continue;
        }
        if pair.is_multiple_of(2) {
            kinds.push(LayerKind::conv(channels, 64, 3, 1, 1));
            channels = 64;
        } else {
            kinds.push(LayerKind::ReLU);
        }
        pair += 1;
    }
    ModelProfile::from_kinds(format!("synthetic-{layers}"), IMAGE, kinds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::infer_shape;

    #[test]
    fn layer_counts() {
        let expected = [21, 32, 38, 44, 21];
        for (name, want) in BUILTIN_MODELS.iter().zip(expected) {
            let p = builtin_profile(name).unwrap();
            assert_eq!(p.total_layers(), want, "{name}");
            assert_eq!(p.input_shape, TensorShape::new(3, 224, 224));
        }
    }

    #[test]
    fn shape_chain_replays() {
        for name in BUILTIN_MODELS {
            let p = builtin_profile(name).unwrap();
            let mut shape = p.input_shape;
            for layer in &p.layers {
                shape = infer_shape(&layer.kind, shape).unwrap();
                assert_eq!(shape, layer.out_shape, "{name} layer {}", layer.index);
            }
            assert_eq!(shape, TensorShape::flat(1000), "{name}");
            p.validate().unwrap();
        }
    }

    #[test]
    fn vgg_feature_map_before_classifier() {
        let p = builtin_profile("vgg16").unwrap();
        assert_eq!(p.layers[30].out_shape, TensorShape::new(512, 7, 7));
    }

    #[test]
    fn unknown_name() {
        assert_eq!(
            builtin_profile("resnet50"),
            Err(ProfileError::UnknownModel("resnet50".into()))
        );
    }

    #[test]
    fn synthetic_sizes() {
        for n in [10, 70, 120, 170, 220] {
            let p = synthetic_profile(n).unwrap();
            assert_eq!(p.total_layers(), n);
            p.validate().unwrap();
        }
        assert_eq!(builtin_profile("synthetic-70").unwrap().total_layers(), 70);
    }
}
