//! The residual-network family: one convolution per block, ReLU, then a
//! learnable 1x1 rescale of the block output from `S` blocks earlier added
//! at every block index `l = S*n + 1`. A global average pool and a 2-class
//! softmax head sit on top.

use super::ops::{
    avgpool_global, avgpool_global_backward, batchnorm_backward, batchnorm_eval, batchnorm_train,
    conv2d, conv2d_backward, conv_out_dim, linear, linear_backward, maxpool, maxpool_backward,
    relu, relu_backward, softmax_rows, BnCache,
};
use super::tensor::{Scalar, Tensor};
use super::NnError;
use crate::chart::NormStats;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub const INPUT_CHANNELS: usize = 3;
pub const NUM_CLASSES: usize = 2;

/// Shape of a desk-scale variant: small input, narrow stages.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MicroSpec {
    pub input_side: usize,
    pub base_width: usize,
    /// Basic (2-conv) blocks per stage; stage `s` has width `base_width << s`.
    pub stage_blocks: Vec<usize>,
}

impl Default for MicroSpec {
    fn default() -> Self {
        Self { input_side: 32, base_width: 8, stage_blocks: vec![1, 1] }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Depth {
    R18,
    R34,
    R50,
    Micro(MicroSpec),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResNetConfig {
    pub depth: Depth,
    /// Batch normalization after each convolution (off by default; the block
    /// recursion itself has none).
    pub batch_norm: bool,
}

impl ResNetConfig {
    pub fn new(depth: Depth) -> Self {
        Self { depth, batch_norm: false }
    }

    pub fn micro() -> Self {
        Self::new(Depth::Micro(MicroSpec::default()))
    }

    pub fn input_side(&self) -> usize {
        match &self.depth {
            Depth::Micro(m) => m.input_side,
            _ => 224,
        }
    }

    /// Skip period: basic blocks add the rescaled source every 2 layers,
    /// bottleneck blocks every 3.
    pub fn skip_period(&self) -> usize {
        match &self.depth {
            Depth::R50 => 3,
            _ => 2,
        }
    }

    pub(crate) fn plan(&self) -> Result<Plan, NnError> {
        let plan = build_plan(self);
        let last = plan
            .units
            .last()
            .ok_or_else(|| NnError::Checkpoint("empty layer plan".into()))?;
        if last.out_side < 2 {
            return Err(NnError::ShapeMismatch {
                op: "plan",
                detail: format!(
                    "final feature map is {0}x{0}; localization needs at least 2x2",
                    last.out_side
                ),
            });
        }
        Ok(plan)
    }
}

/// How a skip source is brought to the block's output shape: identity when
/// shapes already match, a learnable 1x1 projection otherwise. The paper's
/// stated parameter counts (~11M/21M/23M) pin this down: an unconditional
/// projection would overshoot ResNet50 by ~50%.
#[derive(Debug, Clone, Copy)]
pub(crate) enum SkipKind {
    Identity,
    Projection { param: usize, stride: usize },
}

#[derive(Debug, Clone)]
pub(crate) struct UnitPlan {
    pub stride: usize,
    pub pad: usize,
    pub c_out: usize,
    pub out_side: usize,
    pub maxpool_after: bool,
    /// side after optional pooling
    pub final_side: usize,
    pub conv_param: usize,
    pub bn_param: Option<(usize, usize)>,
    pub bn_state: Option<usize>,
    /// `(source unit index (0-based), rescale kind)`
    pub skip: Option<(usize, SkipKind)>,
}

#[derive(Debug, Clone)]
pub(crate) struct Plan {
    pub units: Vec<UnitPlan>,
    pub fc_w: usize,
    pub fc_b: usize,
    pub param_shapes: Vec<(String, Vec<usize>)>,
    pub n_bn_states: usize,
}

struct PlanBuilder {
    units: Vec<UnitPlan>,
    param_shapes: Vec<(String, Vec<usize>)>,
    n_bn_states: usize,
    side: usize,
    batch_norm: bool,
}

impl PlanBuilder {
    fn push_conv(&mut self, k: usize, stride: usize, pad: usize, c_in: usize, c_out: usize, pool: bool) {
        let l = self.units.len() + 1;
        let conv_param = self.param_shapes.len();
        self.param_shapes.push((format!("conv{l:02}.w"), vec![k, k, c_in, c_out]));
        let bn_param = if self.batch_norm {
            let g = self.param_shapes.len();
            self.param_shapes.push((format!("bn{l:02}.gamma"), vec![c_out]));
            self.param_shapes.push((format!("bn{l:02}.beta"), vec![c_out]));
            Some((g, g + 1))
        } else {
            None
        };
        let bn_state = if self.batch_norm {
            self.n_bn_states += 1;
            Some(self.n_bn_states - 1)
        } else {
            None
        };
        let out_side = conv_out_dim(self.side, k, stride, pad);
        let final_side = if pool { conv_out_dim(out_side, 3, 2, 1) } else { out_side };
        self.units.push(UnitPlan {
            stride,
            pad,
            c_out,
            out_side,
            maxpool_after: pool,
            final_side,
            conv_param,
            bn_param,
            bn_state,
            skip: None,
        });
        self.side = final_side;
    }
}

fn build_plan(config: &ResNetConfig) -> Plan {
    let mut b = PlanBuilder {
        units: Vec::new(),
        param_shapes: Vec::new(),
        n_bn_states: 0,
        side: config.input_side(),
        batch_norm: config.batch_norm,
    };

    match &config.depth {
        Depth::R18 | Depth::R34 => {
            let blocks: &[usize] = match config.depth {
                Depth::R18 => &[2, 2, 2, 2],
                _ => &[3, 4, 6, 3],
            };
            b.push_conv(7, 2, 3, INPUT_CHANNELS, 64, true);
            let mut c_in = 64;
            for (stage, &nb) in blocks.iter().enumerate() {
                let width = 64 << stage;
                for block in 0..nb {
                    let stride = if stage > 0 && block == 0 { 2 } else { 1 };
                    b.push_conv(3, stride, 1, c_in, width, false);
                    b.push_conv(3, 1, 1, width, width, false);
                    c_in = width;
                }
            }
        }
        Depth::R50 => {
            let blocks = [3usize, 4, 6, 3];
            b.push_conv(7, 2, 3, INPUT_CHANNELS, 64, true);
            let mut c_in = 64;
            for (stage, &nb) in blocks.iter().enumerate() {
                let mid = 64 << stage;
                for block in 0..nb {
                    let stride = if stage > 0 && block == 0 { 2 } else { 1 };
                    b.push_conv(1, 1, 0, c_in, mid, false);
                    b.push_conv(3, stride, 1, mid, mid, false);
                    b.push_conv(1, 1, 0, mid, mid * 4, false);
                    c_in = mid * 4;
                }
            }
        }
        Depth::Micro(m) => {
            b.push_conv(3, 1, 1, INPUT_CHANNELS, m.base_width, true);
            let mut c_in = m.base_width;
            for (stage, &nb) in m.stage_blocks.iter().enumerate() {
                let width = m.base_width << stage;
                for block in 0..nb {
                    let stride = if stage > 0 && block == 0 { 2 } else { 1 };
                    b.push_conv(3, stride, 1, c_in, width, false);
                    b.push_conv(3, 1, 1, width, width, false);
                    c_in = width;
                }
            }
        }
    }

    // skip junctions land at l = S*n + 1 and draw from l - S
    let s = config.skip_period();
    for l in (s + 1..=b.units.len()).filter(|l| (l - 1) % s == 0) {
        let src = l - s - 1; // 0-based
        let dst = l - 1;
        let (src_side, src_c) = (b.units[src].final_side, b.units[src].c_out);
        let (dst_side, dst_c) = (b.units[dst].final_side, b.units[dst].c_out);
        assert_eq!(src_side % dst_side, 0, "skip spatial sizes must divide");
        let stride = src_side / dst_side;
        let kind = if src_c == dst_c && stride == 1 {
            SkipKind::Identity
        } else {
            let param = b.param_shapes.len();
            b.param_shapes.push((format!("skip{:02}.w", l), vec![1, 1, src_c, dst_c]));
            SkipKind::Projection { param, stride }
        };
        b.units[dst].skip = Some((src, kind));
    }

    let c_last = b.units.last().map(|u| u.c_out).unwrap_or(0);
    let fc_w = b.param_shapes.len();
    b.param_shapes.push(("fc.w".into(), vec![NUM_CLASSES, c_last]));
    let fc_b = b.param_shapes.len();
    b.param_shapes.push(("fc.b".into(), vec![NUM_CLASSES]));

    Plan {
        units: b.units,
        fc_w,
        fc_b,
        param_shapes: b.param_shapes,
        n_bn_states: b.n_bn_states,
    }
}

/// Per-channel running statistics for one batch-norm site.
#[derive(Debug, Clone, PartialEq)]
pub struct BnRunning<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

/// A parameterized network: ordered named tensors plus inference metadata.
#[derive(Debug, Clone)]
pub struct ResNetModel<T: Scalar> {
    pub config: ResNetConfig,
    pub params: Vec<(String, Tensor<T>)>,
    pub bn_running: Vec<BnRunning<T>>,
    /// Normalization fitted on the training images; applied to every input.
    pub norm: Option<NormStats>,
    pub seed: u64,
    pub(crate) plan: Plan,
}

/// Head outputs of one forward pass on a single image.
#[derive(Debug, Clone)]
pub struct ForwardTrace<T: Scalar> {
    /// Final feature map `[H, W, C]`.
    pub final_feature: Tensor<T>,
    /// Channel-wise global averages.
    pub pooled: Vec<T>,
    /// Pre-softmax class scores.
    pub scores: [T; 2],
    /// Class probabilities, strictly positive, summing to one.
    pub probs: [T; 2],
}

pub(crate) struct ForwardCache<T: Scalar> {
    /// `xs[0]` is the input batch, `xs[l]` the post-block output of unit `l`.
    pub xs: Vec<Tensor<T>>,
    pub relu_in: Vec<Tensor<T>>,
    pub bn_caches: Vec<Option<BnCache<T>>>,
    pub pool_arg: Vec<Option<(Vec<usize>, Vec<u32>)>>,
    pub pooled: Tensor<T>,
    pub probs: Tensor<T>,
}

impl<T: Scalar> ResNetModel<T> {
    /// Kaiming-initialized model: `N(0, sqrt(2 / fan_in))` filters, zero
    /// biases, unit batch-norm scales. Deterministic in `seed`.
    pub fn init(config: ResNetConfig, seed: u64) -> Result<Self, NnError> {
        let plan = config.plan()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_ba5e);
        let std_normal = Normal::new(0.0f64, 1.0).unwrap();
        let mut params = Vec::with_capacity(plan.param_shapes.len());
        for (name, shape) in &plan.param_shapes {
            let tensor = if name.ends_with(".gamma") {
                Tensor::filled(shape, T::one())
            } else if name.ends_with(".beta") || name == "fc.b" {
                Tensor::zeros(shape)
            } else {
                // conv / rescale / fc weights: fan_in = k*k*c_in (weights are
                // [k,k,c_in,c_out]; fc.w is [classes, c_in])
                let fan_in: usize = match shape.len() {
                    4 => shape[0] * shape[1] * shape[2],
                    2 => shape[1],
                    _ => shape.iter().product(),
                };
                let std = (2.0 / fan_in as f64).sqrt();
                let data = (0..shape.iter().product::<usize>())
                    .map(|_| T::of(std_normal.sample(&mut rng) * std))
                    .collect();
                Tensor::from_vec(shape, data)
            };
            params.push((name.clone(), tensor));
        }
        let bn_running = (0..plan.n_bn_states)
            .map(|i| {
                let c = plan.units.iter().find(|u| u.bn_state == Some(i)).unwrap().c_out;
                BnRunning { mean: vec![T::zero(); c], var: vec![T::one(); c] }
            })
            .collect();
        Ok(Self { config, params, bn_running, norm: None, seed, plan })
    }

    pub fn param(&self, idx: usize) -> &Tensor<T> {
        &self.params[idx].1
    }

    pub fn fc_weight(&self) -> &Tensor<T> {
        &self.params[self.plan.fc_w].1
    }

    pub fn fc_bias(&self) -> &Tensor<T> {
        &self.params[self.plan.fc_b].1
    }

    /// Spatial side and channel count of the final feature map.
    pub fn final_feature_dims(&self) -> (usize, usize) {
        let last = self.plan.units.last().unwrap();
        (last.final_side, last.c_out)
    }

    pub fn input_side(&self) -> usize {
        self.config.input_side()
    }

    /// Forward a batch `[N, side, side, 3]`. In training mode batch norm
    /// uses batch statistics (cached for the caller to fold into running
    /// stats); in eval mode it uses the stored running statistics.
    pub(crate) fn forward_batch(
        &self,
        input: &Tensor<T>,
        train_mode: bool,
        par: bool,
        check_finite: bool,
    ) -> Result<ForwardCache<T>, NnError> {
        let n_units = self.plan.units.len();
        let mut xs = Vec::with_capacity(n_units + 1);
        xs.push(input.clone());
        let mut relu_in = Vec::with_capacity(n_units);
        let mut bn_caches = Vec::with_capacity(n_units);
        let mut pool_arg = Vec::with_capacity(n_units);

        let units = &self.plan.units;
        for (i, unit) in units.iter().enumerate() {
            let z = conv2d(&xs[i], &self.params[unit.conv_param].1, unit.stride, unit.pad, par)?;
            let (pre_act, bn_cache) = match (unit.bn_param, unit.bn_state) {
                (Some((g, b)), Some(state)) => {
                    if train_mode {
                        let (out, cache) =
                            batchnorm_train(&z, &self.params[g].1, &self.params[b].1);
                        (out, Some(cache))
                    } else {
                        let running = &self.bn_running[state];
                        let out = batchnorm_eval(
                            &z,
                            &self.params[g].1,
                            &self.params[b].1,
                            &running.mean,
                            &running.var,
                        );
                        (out, None)
                    }
                }
                _ => (z, None),
            };
            let mut act = relu(&pre_act);
            relu_in.push(pre_act);
            bn_caches.push(bn_cache);

            if let Some((src, kind)) = unit.skip {
                match kind {
                    SkipKind::Identity => act.add_assign(&xs[src + 1]),
                    SkipKind::Projection { param, stride } => {
                        let rescaled =
                            conv2d(&xs[src + 1], &self.params[param].1, stride, 0, par)?;
                        act.add_assign(&rescaled);
                    }
                }
            }

            if unit.maxpool_after {
                let in_shape = act.shape().to_vec();
                let (pooled, arg) = maxpool(&act, 3, 2, 1);
                pool_arg.push(Some((in_shape, arg)));
                act = pooled;
            } else {
                pool_arg.push(None);
            }

            if check_finite && !act.is_finite() {
                return Err(NnError::NonFinite { layer: format!("conv{:02}", i + 1) });
            }
            xs.push(act);
        }

        let pooled = avgpool_global(xs.last().unwrap());
        let scores = linear(&pooled, self.fc_weight(), self.fc_bias());
        let probs = softmax_rows(&scores);
        if check_finite && !probs.is_finite() {
            return Err(NnError::NonFinite { layer: "fc".into() });
        }
        Ok(ForwardCache { xs, relu_in, bn_caches, pool_arg, pooled, probs })
    }

    /// Forward one image `[side, side, 3]`, returning the head trace.
    pub fn forward(&self, image: &Tensor<T>) -> Result<ForwardTrace<T>, NnError> {
        let side = self.input_side();
        if image.shape() != [side, side, INPUT_CHANNELS] {
            return Err(NnError::ShapeMismatch {
                op: "forward",
                detail: format!(
                    "expected [{side}, {side}, {INPUT_CHANNELS}], got {:?}",
                    image.shape()
                ),
            });
        }
        let batched = image.clone().reshaped(&[1, side, side, INPUT_CHANNELS]);
        let cache = self.forward_batch(&batched, false, false, true)?;
        let (fside, c) = self.final_feature_dims();
        let final_feature =
            cache.xs.last().unwrap().clone().reshaped(&[fside, fside, c]);
        Ok(ForwardTrace {
            final_feature,
            pooled: cache.pooled.data().to_vec(),
            scores: {
                let s = linear(&cache.pooled, self.fc_weight(), self.fc_bias());
                [s.data()[0], s.data()[1]]
            },
            probs: [cache.probs.data()[0], cache.probs.data()[1]],
        })
    }

    /// Sum of per-sample cross-entropy over the batch and gradients for
    /// every parameter, via reverse-mode accumulation.
    pub fn loss_and_grads(
        &mut self,
        input: &Tensor<T>,
        labels: &[u8],
        par: bool,
        train_mode: bool,
    ) -> Result<(T, Vec<Tensor<T>>), NnError> {
        let n = labels.len();
        if n == 0 {
            return Err(NnError::EmptyBatch);
        }
        assert_eq!(input.shape()[0], n, "batch size vs labels");
        let cache = self.forward_batch(input, train_mode, par, false)?;

        if train_mode && self.config.batch_norm {
            // fold batch statistics into the running averages, momentum 0.1
            let mom = T::of(0.1);
            let one_m = T::one() - mom;
            for (l, bn) in cache.bn_caches.iter().enumerate() {
                if let (Some(state), Some(bn)) = (self.plan.units[l].bn_state, bn.as_ref()) {
                    let running = &mut self.bn_running[state];
                    for (r, &m) in running.mean.iter_mut().zip(&bn.mean) {
                        *r = *r * one_m + m * mom;
                    }
                    for (r, &v) in running.var.iter_mut().zip(&bn.var) {
                        *r = *r * one_m + v * mom;
                    }
                }
            }
        }

        let clamp = T::of(1e-12);
        let mut loss = T::zero();
        for (row, &y) in cache.probs.data().chunks_exact(2).zip(labels) {
            let p = if y == 1 { row[1] } else { row[0] };
            loss = loss - p.max(clamp).ln();
        }
        if !loss.is_finite() {
            return Err(NnError::NonFinite { layer: "loss".into() });
        }

        // d loss / d scores = probs - onehot(y), per sample
        let mut dscores = cache.probs.clone();
        for (row, &y) in dscores.data_mut().chunks_exact_mut(2).zip(labels) {
            row[y as usize] -= T::one();
        }

        let mut grads: Vec<Tensor<T>> =
            self.params.iter().map(|(_, p)| Tensor::zeros(p.shape())).collect();

        let (dpooled, dfc_w, dfc_b) =
            linear_backward(&cache.pooled, self.fc_weight(), &dscores);
        grads[self.plan.fc_w] = dfc_w;
        grads[self.plan.fc_b] = dfc_b;

        let n_units = self.plan.units.len();
        let mut dxs: Vec<Option<Tensor<T>>> = vec![None; n_units + 1];
        dxs[n_units] =
            Some(avgpool_global_backward(cache.xs[n_units].shape(), &dpooled));

        let units = self.plan.units.clone();
        for l in (0..n_units).rev() {
            let unit = &units[l];
            let mut g = dxs[l + 1].take().expect("gradient present");
            if let Some((in_shape, arg)) = &cache.pool_arg[l] {
                g = maxpool_backward(in_shape, arg, &g);
            }
            if let Some((src, kind)) = unit.skip {
                let dsrc = match kind {
                    SkipKind::Identity => g.clone(),
                    SkipKind::Projection { param, stride } => {
                        let (dsrc, drescale) = conv2d_backward(
                            &cache.xs[src + 1],
                            &self.params[param].1,
                            &g,
                            stride,
                            0,
                            par,
                        );
                        grads[param].add_assign(&drescale);
                        dsrc
                    }
                };
                match &mut dxs[src + 1] {
                    Some(existing) => existing.add_assign(&dsrc),
                    slot @ None => *slot = Some(dsrc),
                }
            }
            let mut g = relu_backward(&cache.relu_in[l], &g);
            if let (Some((gp, bp)), Some(cache_bn)) = (unit.bn_param, cache.bn_caches[l].as_ref())
            {
                let (gin, dgamma, dbeta) = batchnorm_backward(cache_bn, &self.params[gp].1, &g);
                grads[gp].add_assign(&dgamma);
                grads[bp].add_assign(&dbeta);
                g = gin;
            }
            let (dx, dw) = conv2d_backward(
                &cache.xs[l],
                &self.params[unit.conv_param].1,
                &g,
                unit.stride,
                unit.pad,
                par,
            );
            grads[unit.conv_param].add_assign(&dw);
            match &mut dxs[l] {
                Some(existing) => existing.add_assign(&dx),
                slot @ None => *slot = Some(dx),
            }
        }

        Ok((loss, grads))
    }

    /// Total number of scalar parameters.
    pub fn n_params(&self) -> usize {
        self.params.iter().map(|(_, p)| p.len()).sum()
    }

    /// Distance of the forward pass from the nearest piecewise-linear kink:
    /// the minimum over ReLU input magnitudes and max-pool top-two gaps.
    /// Finite-difference checks screen instances with tiny margins, where a
    /// perturbation could flip a branch.
    pub fn kink_margin(&self, input: &Tensor<T>) -> Result<f64, NnError> {
        let cache = self.forward_batch(input, false, false, false)?;
        let mut margin = f64::INFINITY;
        for (l, pre_act) in cache.relu_in.iter().enumerate() {
            for &z in pre_act.data() {
                margin = margin.min(z.as_f64().abs());
            }
            if self.plan.units[l].maxpool_after {
                // recompute window gaps from the post-activation tensor
                let act = relu(pre_act);
                let act = if let Some((src, kind)) = self.plan.units[l].skip {
                    let mut a = act;
                    match kind {
                        SkipKind::Identity => a.add_assign(&cache.xs[src + 1]),
                        SkipKind::Projection { param, stride } => {
                            let r =
                                conv2d(&cache.xs[src + 1], &self.params[param].1, stride, 0, false)?;
                            a.add_assign(&r);
                        }
                    }
                    a
                } else {
                    act
                };
                margin = margin.min(maxpool_top2_gap(&act, 3, 2, 1));
            }
        }
        Ok(margin)
    }
}

impl ResNetModel<f32> {
    pub fn to_f64(&self) -> ResNetModel<f64> {
        ResNetModel {
            config: self.config.clone(),
            params: self.params.iter().map(|(n, p)| (n.clone(), p.to_f64())).collect(),
            bn_running: self
                .bn_running
                .iter()
                .map(|r| BnRunning {
                    mean: r.mean.iter().map(|&v| v as f64).collect(),
                    var: r.var.iter().map(|&v| v as f64).collect(),
                })
                .collect(),
            norm: self.norm.clone(),
            seed: self.seed,
            plan: self.plan.clone(),
        }
    }
}

/// Smallest gap between the best and second-best value over all pooling
/// windows (windows with a single candidate contribute nothing).
fn maxpool_top2_gap<T: Scalar>(input: &Tensor<T>, k: usize, stride: usize, pad: usize) -> f64 {
    let shape = input.shape();
    let (n, h, w, c) = (shape[0], shape[1], shape[2], shape[3]);
    let ho = super::ops::conv_out_dim(h, k, stride, pad);
    let wo = super::ops::conv_out_dim(w, k, stride, pad);
    let mut gap = f64::INFINITY;
    for ni in 0..n {
        for oy in 0..ho {
            for ox in 0..wo {
                for ch in 0..c {
                    let mut best = f64::NEG_INFINITY;
                    let mut second = f64::NEG_INFINITY;
                    for i in 0..k {
                        let iy = (oy * stride + i) as isize - pad as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for j in 0..k {
                            let ix = (ox * stride + j) as isize - pad as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            let v = input.data()
                                [((ni * h + iy as usize) * w + ix as usize) * c + ch]
                                .as_f64();
                            if v > best {
                                second = best;
                                best = v;
                            } else if v > second {
                                second = v;
                            }
                        }
                    }
                    if second.is_finite() {
                        gap = gap.min(best - second);
                    }
                }
            }
        }
    }
    gap
}

/// One residual block application: `ReLU(Conv(input; params)) +
/// R(skip) * indicator`. `R` is a 1x1 convolution when `rescale_filters` is
/// given, the identity otherwise.
pub fn residual_block<T: Scalar>(
    input: &Tensor<T>,
    conv_filters: &Tensor<T>,
    stride: usize,
    pad: usize,
    skip_source: &Tensor<T>,
    rescale_filters: Option<(&Tensor<T>, usize)>,
    indicator: bool,
) -> Result<Tensor<T>, NnError> {
    let mut out = relu(&conv2d(input, conv_filters, stride, pad, false)?);
    if indicator {
        let rescaled = match rescale_filters {
            Some((filters, rescale_stride)) => {
                conv2d(skip_source, filters, rescale_stride, 0, false)?
            }
            None => skip_source.clone(),
        };
        if rescaled.shape() != out.shape() {
            return Err(NnError::ShapeMismatch {
                op: "residual_block",
                detail: format!(
                    "main branch {:?} vs rescaled skip {:?}",
                    out.shape(),
                    rescaled.shape()
                ),
            });
        }
        out.add_assign(&rescaled);
    }
    Ok(out)
}
