//! Finite-difference gradient checks shared by the dev suite and the
//! acceptance suite.

use super::{central_diff, rel_err};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use triplei_core::nn::model::{Depth, MicroSpec, ResNetConfig, ResNetModel};
use triplei_core::nn::ops::{
    avgpool_global, avgpool_global_backward, batchnorm_backward, batchnorm_train, conv2d,
    conv2d_backward, linear, linear_backward, maxpool, maxpool_backward, relu, relu_backward,
};
use triplei_core::nn::tensor::Tensor;

const H: f64 = 1e-5;

const TOL: f64 = 1e-6;

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect()
}

/// Margin-screened random vector: entries stay away from zero so ReLU-style
/// kinks cannot flip under the probe step.
fn rand_vec_margin(rng: &mut ChaCha8Rng, n: usize, margin: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let v = rng.gen::<f64>() * 2.0 - 1.0;
            if v >= 0.0 {
                v + margin
            } else {
                v - margin
            }
        })
        .collect()
}

fn assert_grads_match(analytic: &[f64], f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], ctx: &str) {
    for i in 0..x.len() {
        let fd = central_diff(f, x, i, H);
        let err = rel_err(analytic[i], fd);
        assert!(
            err <= TOL,
            "{ctx}: coord {i}: analytic {} vs fd {fd} (rel {err:e})",
            analytic[i]
        );
    }
}

pub fn conv2d_gradients() {
    for trial in 0..20u64 {
        let mut rng = rng_for(trial);
        let (n, h, w, c, k, co) = (2, 5, 5, 2, 3, 3);
        let (stride, pad) = if trial % 2 == 0 { (1, 1) } else { (2, 0) };
        let x0 = rand_vec(&mut rng, n * h * w * c);
        let f0 = rand_vec(&mut rng, k * k * c * co);
        let x_t = Tensor::from_vec(&[n, h, w, c], x0.clone());
        let f_t = Tensor::from_vec(&[k, k, c, co], f0.clone());
        let out = conv2d(&x_t, &f_t, stride, pad, false).unwrap();
        let cot = rand_vec(&mut rng, out.len());

        let gout = Tensor::from_vec(out.shape(), cot.clone());
        let (gin, gfilt) = conv2d_backward(&x_t, &f_t, &gout, stride, pad, false);

        let objective_x = |xs: &[f64]| -> f64 {
            let xt = Tensor::from_vec(&[n, h, w, c], xs.to_vec());
            conv2d(&xt, &f_t, stride, pad, false)
                .unwrap()
                .data()
                .iter()
                .zip(&cot)
                .map(|(a, b)| a * b)
                .sum()
        };
        assert_grads_match(gin.data(), &mut { objective_x }, &x0, "conv2d d/dx");

        let objective_f = |fs: &[f64]| -> f64 {
            let ft = Tensor::from_vec(&[k, k, c, co], fs.to_vec());
            conv2d(&x_t, &ft, stride, pad, false)
                .unwrap()
                .data()
                .iter()
                .zip(&cot)
                .map(|(a, b)| a * b)
                .sum()
        };
        assert_grads_match(gfilt.data(), &mut { objective_f }, &f0, "conv2d d/dfilt");
    }
}

pub fn relu_gradients() {
    for trial in 0..20u64 {
        let mut rng = rng_for(100 + trial);
        let n = 40;
        let x0 = rand_vec_margin(&mut rng, n, 1e-3);
        let x_t = Tensor::from_vec(&[1, 2, 5, 4], x0.clone());
        let cot = rand_vec(&mut rng, n);
        let gout = Tensor::from_vec(&[1, 2, 5, 4], cot.clone());
        let gin = relu_backward(&x_t, &gout);
        let mut objective = |xs: &[f64]| -> f64 {
            let xt = Tensor::from_vec(&[1, 2, 5, 4], xs.to_vec());
            relu(&xt).data().iter().zip(&cot).map(|(a, b)| a * b).sum()
        };
        assert_grads_match(gin.data(), &mut objective, &x0, "relu");
    }
}

pub fn maxpool_gradients() {
    for trial in 0..20u64 {
        let mut rng = rng_for(200 + trial);
        let (n, h, w, c) = (1, 6, 6, 2);
        // spread values far apart so window argmaxes never flip under h
        let mut x0 = rand_vec(&mut rng, n * h * w * c);
        for (i, v) in x0.iter_mut().enumerate() {
            *v += (i % 17) as f64 * 0.01;
        }
        let x_t = Tensor::from_vec(&[n, h, w, c], x0.clone());
        let (out, arg) = maxpool(&x_t, 3, 2, 1);
        let cot = rand_vec(&mut rng, out.len());
        let gout = Tensor::from_vec(out.shape(), cot.clone());
        let gin = maxpool_backward(&[n, h, w, c], &arg, &gout);
        let mut objective = |xs: &[f64]| -> f64 {
            let xt = Tensor::from_vec(&[n, h, w, c], xs.to_vec());
            maxpool(&xt, 3, 2, 1).0.data().iter().zip(&cot).map(|(a, b)| a * b).sum()
        };
        assert_grads_match(gin.data(), &mut objective, &x0, "maxpool");
    }
}

pub fn avgpool_gradients() {
    for trial in 0..20u64 {
        let mut rng = rng_for(300 + trial);
        let (n, h, w, c) = (2, 3, 4, 3);
        let x0 = rand_vec(&mut rng, n * h * w * c);
        let x_t = Tensor::from_vec(&[n, h, w, c], x0.clone());
        let out = avgpool_global(&x_t);
        let cot = rand_vec(&mut rng, out.len());
        let gout = Tensor::from_vec(out.shape(), cot.clone());
        let gin = avgpool_global_backward(&[n, h, w, c], &gout);
        let mut objective = |xs: &[f64]| -> f64 {
            let xt = Tensor::from_vec(&[n, h, w, c], xs.to_vec());
            avgpool_global(&xt).data().iter().zip(&cot).map(|(a, b)| a * b).sum()
        };
        assert_grads_match(gin.data(), &mut objective, &x0, "avgpool_global");
    }
}

pub fn linear_gradients() {
    for trial in 0..20u64 {
        let mut rng = rng_for(400 + trial);
        let (n, c) = (3, 5);
        let x0 = rand_vec(&mut rng, n * c);
        let a0 = rand_vec(&mut rng, 2 * c);
        let b0 = rand_vec(&mut rng, 2);
        let x_t = Tensor::from_vec(&[n, c], x0.clone());
        let a_t = Tensor::from_vec(&[2, c], a0.clone());
        let b_t = Tensor::from_vec(&[2], b0.clone());
        let cot = rand_vec(&mut rng, n * 2);
        let gout = Tensor::from_vec(&[n, 2], cot.clone());
        let (gx, ga, gb) = linear_backward(&x_t, &a_t, &gout);

        let mut obj_x = |xs: &[f64]| -> f64 {
            let xt = Tensor::from_vec(&[n, c], xs.to_vec());
            linear(&xt, &a_t, &b_t).data().iter().zip(&cot).map(|(p, q)| p * q).sum()
        };
        assert_grads_match(gx.data(), &mut obj_x, &x0, "linear d/dx");

        let mut obj_a = |ws: &[f64]| -> f64 {
            let wt = Tensor::from_vec(&[2, c], ws.to_vec());
            linear(&x_t, &wt, &b_t).data().iter().zip(&cot).map(|(p, q)| p * q).sum()
        };
        assert_grads_match(ga.data(), &mut obj_a, &a0, "linear d/dA");

        let mut obj_b = |bs: &[f64]| -> f64 {
            let bt = Tensor::from_vec(&[2], bs.to_vec());
            linear(&x_t, &a_t, &bt).data().iter().zip(&cot).map(|(p, q)| p * q).sum()
        };
        assert_grads_match(gb.data(), &mut obj_b, &b0, "linear d/db");
    }
}

pub fn batchnorm_gradients() {
    for trial in 0..20u64 {
        let mut rng = rng_for(500 + trial);
        let (n, h, w, c) = (3, 2, 2, 2);
        let x0 = rand_vec(&mut rng, n * h * w * c);
        let g0: Vec<f64> = (0..c).map(|_| 0.5 + rng.gen::<f64>()).collect();
        let b0 = rand_vec(&mut rng, c);
        let x_t = Tensor::from_vec(&[n, h, w, c], x0.clone());
        let g_t = Tensor::from_vec(&[c], g0.clone());
        let b_t = Tensor::from_vec(&[c], b0.clone());
        let (out, cache) = batchnorm_train(&x_t, &g_t, &b_t);
        let cot = rand_vec(&mut rng, out.len());
        let gout = Tensor::from_vec(out.shape(), cot.clone());
        let (gin, dgamma, dbeta) = batchnorm_backward(&cache, &g_t, &gout);

        let mut obj_x = |xs: &[f64]| -> f64 {
            let xt = Tensor::from_vec(&[n, h, w, c], xs.to_vec());
            batchnorm_train(&xt, &g_t, &b_t).0.data().iter().zip(&cot).map(|(p, q)| p * q).sum()
        };
        assert_grads_match(gin.data(), &mut obj_x, &x0, "batchnorm d/dx");

        let mut obj_g = |gs: &[f64]| -> f64 {
            let gt = Tensor::from_vec(&[c], gs.to_vec());
            batchnorm_train(&x_t, &gt, &b_t).0.data().iter().zip(&cot).map(|(p, q)| p * q).sum()
        };
        assert_grads_match(dgamma.data(), &mut obj_g, &g0, "batchnorm d/dgamma");

        let mut obj_b = |bs: &[f64]| -> f64 {
            let bt = Tensor::from_vec(&[c], bs.to_vec());
            batchnorm_train(&x_t, &g_t, &bt).0.data().iter().zip(&cot).map(|(p, q)| p * q).sum()
        };
        assert_grads_match(dbeta.data(), &mut obj_b, &b0, "batchnorm d/dbeta");
    }
}

fn fd_config(batch_norm: bool) -> ResNetConfig {
    let mut config = ResNetConfig::new(Depth::Micro(MicroSpec {
        input_side: 12,
        base_width: 3,
        stage_blocks: vec![1, 1],
    }));
    config.batch_norm = batch_norm;
    config
}

/// Loss of the whole micro network against finite differences over every
/// parameter. Instances whose forward pass runs close to a ReLU or pooling
/// kink are redrawn, since a kink flip invalidates the finite difference,
/// not the gradient.
pub fn full_model_check(batch_norm: bool, trials: usize, salt: u64) {
    let mut done = 0usize;
    let mut attempt = 0u64;
    while done < trials {
        attempt += 1;
        assert!(attempt < 50 * trials as u64, "too many kink-screened redraws");
        let seed = salt + attempt;
        let mut rng = rng_for(seed);
        let mut model = ResNetModel::<f64>::init(fd_config(batch_norm), seed).unwrap();
        let side = model.input_side();
        let batch = 2usize;
        let x0 = rand_vec(&mut rng, batch * side * side * 3);
        let input = Tensor::from_vec(&[batch, side, side, 3], x0.clone());
        if model.kink_margin(&input).unwrap() < 1e-3 {
            continue;
        }
        let labels = vec![0u8, 1];
        let (_, grads) = model.loss_and_grads(&input, &labels, false, true).unwrap();

        let flat_grads: Vec<f64> =
            grads.iter().flat_map(|g| g.data().iter().cloned()).collect();
        let flat_params: Vec<f64> =
            model.params.iter().flat_map(|(_, p)| p.data().iter().cloned()).collect();

        let shapes: Vec<Vec<usize>> =
            model.params.iter().map(|(_, p)| p.shape().to_vec()).collect();
        let loss_at = |theta: &[f64]| -> f64 {
            let mut m = model.clone();
            let mut at = 0usize;
            for (i, shape) in shapes.iter().enumerate() {
                let len: usize = shape.iter().product();
                m.params[i].1 = Tensor::from_vec(shape, theta[at..at + len].to_vec());
                at += len;
            }
            m.loss_and_grads(&input, &labels, false, true).unwrap().0
        };

        let mut max_rel = 0.0f64;
        for i in 0..flat_params.len() {
            let fd = central_diff(&mut { loss_at }, &flat_params, i, H);
            let err = rel_err(flat_grads[i], fd);
            max_rel = max_rel.max(err);
            assert!(
                err <= TOL,
                "full model (bn={batch_norm}) param {i}: analytic {} vs fd {fd} (rel {err:e})",
                flat_grads[i]
            );
        }
        assert!(max_rel.is_finite());
        done += 1;
    }
}

pub fn full_micro_model_gradients() {
    full_model_check(false, 4, 9000);
}

pub fn full_micro_model_gradients_with_batchnorm() {
    full_model_check(true, 2, 19000);
}
