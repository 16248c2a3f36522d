//! Grad-CAM++ channel importances, noise-smoothed variants, and the
//! per-class localization matrices and maps read off the final feature map.
//!
//! The class probability depends on the final feature map only through
//! global average pooling, the linear head, and softmax, so the first three
//! derivatives of `P_j` w.r.t. each feature entry have closed forms that are
//! constant across spatial positions within a channel.

use crate::chart::resize_bilinear;
use crate::nn::model::{ForwardTrace, ResNetModel};
use crate::nn::tensor::{Scalar, Tensor};
use crate::nn::NnError;
use crate::util::stream_rng;
use rand_distr::{Distribution, Normal};

/// Denominators smaller than this collapse the spatial weight to zero.
pub const ALPHA_DENOM_GUARD: f64 = 1e-12;

/// First, second, and third derivatives of `P_j` w.r.t. each entry of the
/// final feature map, shaped like the map itself.
#[derive(Debug, Clone)]
pub struct HeadDerivatives<T> {
    pub g: Tensor<T>,
    pub g2: Tensor<T>,
    pub g3: Tensor<T>,
}

/// Nonnegative per-class importance matrix over the final feature map grid.
#[derive(Debug, Clone)]
pub struct LocalizationMatrix<T> {
    pub h: usize,
    pub w: usize,
    pub data: Vec<T>,
}

/// The matrix resized to display resolution (224 x 224).
#[derive(Debug, Clone)]
pub struct LocalizationMap<T> {
    pub side: usize,
    pub data: Vec<T>,
}

pub const MAP_SIDE: usize = 224;

/// Closed-form head derivatives for class `j`.
///
/// With `u_c = (A[j,c] - A[1-j,c]) / (H*W)` and `s = P_j`:
/// `g = s(1-s) u_c`, `g2 = s(1-s)(1-2s) u_c^2`,
/// `g3 = s(1-s)(1-6s+6s^2) u_c^3`.
pub fn head_derivatives<T: Scalar>(
    trace: &ForwardTrace<T>,
    fc_weight: &Tensor<T>,
    class_j: usize,
) -> HeadDerivatives<T> {
    assert!(class_j < 2);
    let shape = trace.final_feature.shape();
    let (h, w, c) = (shape[0], shape[1], shape[2]);
    let s = trace.probs[class_j];
    let one = T::one();
    let k1 = s * (one - s);
    let k2 = k1 * (one - T::of(2.0) * s);
    let k3 = k1 * (one - T::of(6.0) * s + T::of(6.0) * s * s);
    let hw = T::of((h * w) as f64);

    let mut g = Tensor::zeros(&[h, w, c]);
    let mut g2 = Tensor::zeros(&[h, w, c]);
    let mut g3 = Tensor::zeros(&[h, w, c]);
    for ch in 0..c {
        let u =
            (fc_weight.data()[class_j * c + ch] - fc_weight.data()[(1 - class_j) * c + ch]) / hw;
        let (v1, v2, v3) = (k1 * u, k2 * u * u, k3 * u * u * u);
        for pos in 0..h * w {
            g.data_mut()[pos * c + ch] = v1;
            g2.data_mut()[pos * c + ch] = v2;
            g3.data_mut()[pos * c + ch] = v3;
        }
    }
    HeadDerivatives { g, g2, g3 }
}

/// Grad-CAM++ channel weights: spatially weighted sums of positive
/// gradients, with the spatial weight
/// `alpha = g2 / (2 g2 + sum_{h,w} F * g3)` per channel.
pub fn gradcam_pp_channel_weights<T: Scalar>(
    final_feature: &Tensor<T>,
    derivs: &HeadDerivatives<T>,
) -> Vec<T> {
    let shape = final_feature.shape();
    let (h, w, c) = (shape[0], shape[1], shape[2]);
    assert_eq!(derivs.g.shape(), shape, "derivatives shaped like the feature map");
    let mut fg3 = vec![T::zero(); c];
    for pos in 0..h * w {
        for ch in 0..c {
            fg3[ch] += final_feature.data()[pos * c + ch] * derivs.g3.data()[pos * c + ch];
        }
    }
    let guard = T::of(ALPHA_DENOM_GUARD);
    let mut weights = vec![T::zero(); c];
    for pos in 0..h * w {
        for ch in 0..c {
            let at = pos * c + ch;
            let g2 = derivs.g2.data()[at];
            let den = T::of(2.0) * g2 + fg3[ch];
            let alpha = if den.abs() < guard { T::zero() } else { g2 / den };
            let relu_g = derivs.g.data()[at].max(T::zero());
            weights[ch] += alpha * relu_g;
        }
    }
    weights
}

/// The `b` Gaussian-noised copies of a normalized input that the smoothing
/// average runs over. Copy `i` draws from an RNG stream derived from
/// `(seed, i)`, so the set is independent of evaluation order. With zero
/// noise the copies are the input itself.
pub fn noised_copies<T: Scalar>(
    normalized_image: &Tensor<T>,
    b: usize,
    sigma: [f64; 3],
    seed: u64,
) -> Vec<Tensor<T>> {
    assert!(b >= 1, "need at least one noised copy");
    let std_normal = Normal::new(0.0f64, 1.0).unwrap();
    (0..b)
        .map(|copy| {
            if sigma.iter().all(|&s| s == 0.0) {
                normalized_image.clone()
            } else {
                let mut rng = stream_rng(seed, copy as u64);
                let mut noised = normalized_image.clone();
                for (i, v) in noised.data_mut().iter_mut().enumerate() {
                    let ch = i % 3;
                    *v += T::of(std_normal.sample(&mut rng) * sigma[ch]);
                }
                noised
            }
        })
        .collect()
}

/// Smooth Grad-CAM channel weights for both classes in one pass over the
/// noised copies (the copies and forward passes are shared): gradient terms
/// are averaged across copies inside the spatial-weight ratio, then the
/// ReLU is applied to the averaged gradient. Returns the weights together
/// with the clean-image forward trace.
pub fn smooth_channel_weights_both<T: Scalar>(
    model: &ResNetModel<T>,
    normalized_image: &Tensor<T>,
    b: usize,
    sigma: [f64; 3],
    seed: u64,
) -> Result<([Vec<T>; 2], ForwardTrace<T>), NnError> {
    let clean_trace = model.forward(normalized_image)?;
    let shape = clean_trace.final_feature.shape().to_vec();
    let (h, w, c) = (shape[0], shape[1], shape[2]);

    let mut sum_g = [vec![T::zero(); h * w * c], vec![T::zero(); h * w * c]];
    let mut sum_g2 = [vec![T::zero(); h * w * c], vec![T::zero(); h * w * c]];
    let mut sum_fg3 = [vec![T::zero(); c], vec![T::zero(); c]];

    for copy in noised_copies(normalized_image, b, sigma, seed) {
        let trace = model.forward(&copy)?;
        for j in 0..2 {
            let d = head_derivatives(&trace, model.fc_weight(), j);
            for i in 0..h * w * c {
                sum_g[j][i] += d.g.data()[i];
                sum_g2[j][i] += d.g2.data()[i];
            }
            for pos in 0..h * w {
                for ch in 0..c {
                    sum_fg3[j][ch] +=
                        trace.final_feature.data()[pos * c + ch] * d.g3.data()[pos * c + ch];
                }
            }
        }
    }

    let inv_b = T::one() / T::of(b as f64);
    let guard = T::of(ALPHA_DENOM_GUARD);
    let mut weights = [vec![T::zero(); c], vec![T::zero(); c]];
    for j in 0..2 {
        for pos in 0..h * w {
            for ch in 0..c {
                let at = pos * c + ch;
                let mean_g2 = sum_g2[j][at] * inv_b;
                let den = T::of(2.0) * mean_g2 + sum_fg3[j][ch] * inv_b;
                let alpha = if den.abs() < guard { T::zero() } else { mean_g2 / den };
                let relu_mean_g = (sum_g[j][at] * inv_b).max(T::zero());
                weights[j][ch] += alpha * relu_mean_g;
            }
        }
    }
    Ok((weights, clean_trace))
}

/// Single-class variant of [`smooth_channel_weights_both`].
pub fn smooth_channel_weights<T: Scalar>(
    model: &ResNetModel<T>,
    normalized_image: &Tensor<T>,
    class_j: usize,
    b: usize,
    sigma: [f64; 3],
    seed: u64,
) -> Result<(Vec<T>, ForwardTrace<T>), NnError> {
    let (mut both, trace) = smooth_channel_weights_both(model, normalized_image, b, sigma, seed)?;
    Ok((std::mem::take(&mut both[class_j]), trace))
}

/// `W(h,w) = ReLU( sum_c G(c) * F(h,w,c) )`.
pub fn localization_matrix<T: Scalar>(
    final_feature: &Tensor<T>,
    channel_weights: &[T],
) -> LocalizationMatrix<T> {
    let shape = final_feature.shape();
    let (h, w, c) = (shape[0], shape[1], shape[2]);
    assert_eq!(channel_weights.len(), c);
    let mut data = Vec::with_capacity(h * w);
    for pos in 0..h * w {
        let mut acc = T::zero();
        for ch in 0..c {
            acc += channel_weights[ch] * final_feature.data()[pos * c + ch];
        }
        data.push(acc.max(T::zero()));
    }
    LocalizationMatrix { h, w, data }
}

/// Bilinear resize of the localization matrix to 224 x 224.
pub fn localization_map<T: Scalar>(matrix: &LocalizationMatrix<T>) -> LocalizationMap<T> {
    let data = resize_bilinear(&matrix.data, matrix.h, matrix.w, 1, MAP_SIDE, MAP_SIDE);
    LocalizationMap { side: MAP_SIDE, data }
}

/// Per-class localization output for one image under one model.
#[derive(Debug, Clone)]
pub struct Localization<T> {
    pub matrix: [LocalizationMatrix<T>; 2],
    pub map: [LocalizationMap<T>; 2],
    pub probs: [T; 2],
}

#[derive(Debug, Clone, Copy)]
pub struct SaliencyParams {
    /// Number of noised copies.
    pub b: usize,
    /// Per-channel noise standard deviation in normalized-pixel units.
    pub sigma: [f64; 3],
    pub seed: u64,
}

impl Default for SaliencyParams {
    fn default() -> Self {
        Self { b: 8, sigma: [0.15; 3], seed: 0 }
    }
}

/// Smooth Grad-CAM localization for both classes of one raw `[0,1]` image.
pub fn localize_raw(
    model: &ResNetModel<f32>,
    raw_image: &[f32],
    params: &SaliencyParams,
) -> Result<Localization<f32>, NnError> {
    let side = model.input_side();
    let norm = model
        .norm
        .as_ref()
        .ok_or_else(|| NnError::Checkpoint("model has no normalization statistics".into()))?;
    let normalized = Tensor::from_vec(&[side, side, 3], crate::chart::apply_norm(raw_image, norm));
    localize_normalized(model, &normalized, params)
}

/// As [`localize_raw`] but on an already-normalized input tensor.
pub fn localize_normalized<T: Scalar>(
    model: &ResNetModel<T>,
    normalized: &Tensor<T>,
    params: &SaliencyParams,
) -> Result<Localization<T>, NnError> {
    let ([w0, w1], trace) =
        smooth_channel_weights_both(model, normalized, params.b, params.sigma, params.seed)?;
    let m0 = localization_matrix(&trace.final_feature, &w0);
    let m1 = localization_matrix(&trace.final_feature, &w1);
    let map0 = localization_map(&m0);
    let map1 = localization_map(&m1);
    Ok(Localization { matrix: [m0, m1], map: [map0, map1], probs: trace.probs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::model::{Depth, MicroSpec, ResNetConfig};

    fn tiny_model(seed: u64) -> ResNetModel<f64> {
        ResNetModel::<f64>::init(
            ResNetConfig::new(Depth::Micro(MicroSpec {
                input_side: 16,
                base_width: 4,
                stage_blocks: vec![1],
            })),
            seed,
        )
        .unwrap()
    }

    fn rand_image(side: usize, seed: u64) -> Tensor<f64> {
        let mut rng = stream_rng(seed, 77);
        use rand::Rng;
        Tensor::from_vec(
            &[side, side, 3],
            (0..side * side * 3).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect(),
        )
    }

    #[test]
    fn zero_head_kills_derivatives() {
        let mut model = tiny_model(1);
        let fcw_idx = model.params.iter().position(|(n, _)| n == "fc.w").unwrap();
        model.params[fcw_idx].1 = Tensor::zeros(model.params[fcw_idx].1.shape());
        let img = rand_image(16, 2);
        let trace = model.forward(&img).unwrap();
        let d = head_derivatives(&trace, model.fc_weight(), 1);
        assert!(d.g.data().iter().all(|&v| v == 0.0));
        assert!(d.g2.data().iter().all(|&v| v == 0.0));
        assert!(d.g3.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn symmetric_probability_kills_second_derivative() {
        // identical fc rows force s = 0.5; then g2 carries the (1 - 2s) factor
        let mut model = tiny_model(3);
        let c = model.final_feature_dims().1;
        let fcw_idx = model.params.iter().position(|(n, _)| n == "fc.w").unwrap();
        let mut a = vec![0.0f64; 2 * c];
        for ch in 0..c {
            let v = 0.1 * (ch as f64 + 1.0);
            a[ch] = v;
            a[c + ch] = v;
        }
        model.params[fcw_idx].1 = Tensor::from_vec(&[2, c], a);
        let fcb_idx = model.params.iter().position(|(n, _)| n == "fc.b").unwrap();
        model.params[fcb_idx].1 = Tensor::zeros(&[2]);
        let img = rand_image(16, 4);
        let trace = model.forward(&img).unwrap();
        assert!((trace.probs[1] - 0.5).abs() < 1e-12);
        let d = head_derivatives(&trace, model.fc_weight(), 1);
        assert!(d.g2.data().iter().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn derivatives_constant_within_channel() {
        let model = tiny_model(5);
        let img = rand_image(16, 6);
        let trace = model.forward(&img).unwrap();
        for j in 0..2 {
            let d = head_derivatives(&trace, model.fc_weight(), j);
            let shape = trace.final_feature.shape();
            let (hw, c) = (shape[0] * shape[1], shape[2]);
            for ch in 0..c {
                let v0 = d.g.data()[ch];
                for pos in 1..hw {
                    assert_eq!(d.g.data()[pos * c + ch], v0);
                }
            }
        }
    }

    #[test]
    fn class_gradients_are_negatives_and_supports_disjoint() {
        let model = tiny_model(7);
        let img = rand_image(16, 8);
        let trace = model.forward(&img).unwrap();
        let d0 = head_derivatives(&trace, model.fc_weight(), 0);
        let d1 = head_derivatives(&trace, model.fc_weight(), 1);
        for (a, b) in d0.g.data().iter().zip(d1.g.data()) {
            assert!((a + b).abs() < 1e-12, "g0 = -g1");
            if *a > 0.0 {
                assert_eq!(b.max(0.0), 0.0);
            }
        }
    }

    #[test]
    fn all_nonpositive_gradients_give_zero_weights() {
        let model = tiny_model(9);
        let img = rand_image(16, 10);
        let trace = model.forward(&img).unwrap();
        let mut d = head_derivatives(&trace, model.fc_weight(), 1);
        for v in d.g.data_mut().iter_mut() {
            *v = -v.abs();
        }
        let w = gradcam_pp_channel_weights(&trace.final_feature, &d);
        assert!(w.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_cell_alpha_collapses() {
        // H = W = 1: alpha = g2 / (2 g2 + F g3), G = alpha * relu(g)
        let ff = Tensor::from_vec(&[1, 1, 1], vec![2.0f64]);
        let d = HeadDerivatives {
            g: Tensor::from_vec(&[1, 1, 1], vec![0.5f64]),
            g2: Tensor::from_vec(&[1, 1, 1], vec![0.3f64]),
            g3: Tensor::from_vec(&[1, 1, 1], vec![0.1f64]),
        };
        let w = gradcam_pp_channel_weights(&ff, &d);
        let alpha = 0.3 / (2.0 * 0.3 + 2.0 * 0.1);
        assert!((w[0] - alpha * 0.5).abs() < 1e-15);
    }

    #[test]
    fn localization_hand_case() {
        // F constant 1 over 2 channels, weights (1, -2): sum = -1, ReLU -> 0
        let ff = Tensor::filled(&[2, 2, 2], 1.0f64);
        let m = localization_matrix(&ff, &[1.0, -2.0]);
        assert!(m.data.iter().all(|&v| v == 0.0));
        let z = localization_matrix(&ff, &[0.0, 0.0]);
        assert!(z.data.iter().all(|&v| v == 0.0));
        let map = localization_map(&z);
        assert_eq!(map.side, MAP_SIDE);
        assert!(map.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn localization_matrices_nonnegative() {
        let model = tiny_model(11);
        let img = rand_image(16, 12);
        let out =
            localize_normalized(&model, &img, &SaliencyParams { b: 2, sigma: [0.1; 3], seed: 5 })
                .unwrap();
        for j in 0..2 {
            assert!(out.matrix[j].data.iter().all(|&v| v >= 0.0));
            assert!(out.map[j].data.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn sigma_zero_collapses_to_plain_gradcam_pp() {
        let model = tiny_model(13);
        let img = rand_image(16, 14);
        for b in [1usize, 4] {
            let (w, trace) = smooth_channel_weights(&model, &img, 1, b, [0.0; 3], 9).unwrap();
            let d = head_derivatives(&trace, model.fc_weight(), 1);
            let plain = gradcam_pp_channel_weights(&trace.final_feature, &d);
            for (a, b) in w.iter().zip(&plain) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn smooth_weights_deterministic_in_seed() {
        let model = tiny_model(15);
        let img = rand_image(16, 16);
        let (w1, _) = smooth_channel_weights(&model, &img, 0, 4, [0.1; 3], 42).unwrap();
        let (w2, _) = smooth_channel_weights(&model, &img, 0, 4, [0.1; 3], 42).unwrap();
        assert_eq!(w1, w2);
        let (w3, _) = smooth_channel_weights(&model, &img, 0, 4, [0.1; 3], 43).unwrap();
        assert_ne!(w1, w3);
    }
}
