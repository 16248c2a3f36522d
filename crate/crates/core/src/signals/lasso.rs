//! Ordinary least squares and two-stage adaptive LASSO via coordinate
//! descent. Design matrices are row-major `[n, k]`; fitted coefficient
//! vectors are `[intercept, beta_1, ..., beta_k]` and the intercept is
//! never penalized.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LassoError {
    #[error("need more than one sample, got {0}")]
    TooFewSamples(usize),
    #[error("design matrix is singular")]
    Singular,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite value in design or response")]
    NonFinite,
    #[error("coordinate descent did not converge: {sweeps} sweeps, last max step {max_delta:e}")]
    NonConvergence { sweeps: usize, max_delta: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct LassoParams {
    pub lambda: f64,
    pub gamma: f64,
    pub ridge_jitter: f64,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl LassoParams {
    pub fn with_lambda(lambda: f64) -> Self {
        Self { lambda, gamma: 1.0, ridge_jitter: 1e-6, tol: 1e-8, max_sweeps: 10_000 }
    }
}

fn validate(x: &[f64], y: &[f64], n: usize, k: usize) -> Result<(), LassoError> {
    if n <= 1 {
        return Err(LassoError::TooFewSamples(n));
    }
    if x.len() != n * k {
        return Err(LassoError::Dimension(format!(
            "design has {} entries, expected {n} x {k}",
            x.len()
        )));
    }
    if y.len() != n {
        return Err(LassoError::Dimension(format!("response has {} entries, expected {n}", y.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(LassoError::NonFinite);
    }
    Ok(())
}

/// Gaussian elimination with partial pivoting on `a` (p x p), solving
/// `a beta = b` in place.
fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>, p: usize) -> Result<Vec<f64>, LassoError> {
    for col in 0..p {
        let pivot = (col..p)
            .max_by(|&i, &j| a[i * p + col].abs().partial_cmp(&a[j * p + col].abs()).unwrap())
            .unwrap();
        if a[pivot * p + col].abs() < 1e-300 {
            return Err(LassoError::Singular);
        }
        if pivot != col {
            for j in 0..p {
                a.swap(col * p + j, pivot * p + j);
            }
            b.swap(col, pivot);
        }
        let inv = 1.0 / a[col * p + col];
        for row in col + 1..p {
            let f = a[row * p + col] * inv;
            if f == 0.0 {
                continue;
            }
            for j in col..p {
                a[row * p + j] -= f * a[col * p + j];
            }
            b[row] -= f * b[col];
        }
    }
    let mut out = vec![0.0; p];
    for row in (0..p).rev() {
        let mut acc = b[row];
        for j in row + 1..p {
            acc -= a[row * p + j] * out[j];
        }
        out[row] = acc / a[row * p + row];
    }
    Ok(out)
}

/// Ridge solve of the intercept-augmented normal equations; `jitter` is
/// added to every diagonal entry.
fn ridge(x: &[f64], y: &[f64], n: usize, k: usize, jitter: f64) -> Result<Vec<f64>, LassoError> {
    let p = k + 1;
    let col = |row: usize, j: usize| -> f64 {
        if j == 0 {
            1.0
        } else {
            x[row * k + (j - 1)]
        }
    };
    let mut xtx = vec![0.0; p * p];
    let mut xty = vec![0.0; p];
    for row in 0..n {
        for i in 0..p {
            let xi = col(row, i);
            xty[i] += xi * y[row];
            for j in i..p {
                xtx[i * p + j] += xi * col(row, j);
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            xtx[i * p + j] = xtx[j * p + i];
        }
        xtx[i * p + i] += jitter;
    }
    solve_dense(xtx, xty, p)
}

/// Ordinary least squares with intercept (a whisper of ridge for numerical
/// safety on collinear cross-sections).
pub fn ols(x: &[f64], y: &[f64], n: usize, k: usize) -> Result<Vec<f64>, LassoError> {
    validate(x, y, n, k)?;
    ridge(x, y, n, k, 1e-10)
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Two-stage adaptive LASSO: a ridge pilot estimate sets per-coefficient
/// penalty weights `1 / (|beta0_k|^gamma + 1e-8)`, then coordinate descent
/// minimizes `0.5 ||y - X beta||^2 + lambda * sum_k w_k |beta_k|`.
pub fn adaptive_lasso(
    x: &[f64],
    y: &[f64],
    n: usize,
    k: usize,
    params: &LassoParams,
) -> Result<Vec<f64>, LassoError> {
    validate(x, y, n, k)?;
    let pilot = ridge(x, y, n, k, params.ridge_jitter)?;
    let weights: Vec<f64> =
        pilot[1..].iter().map(|b| 1.0 / (b.abs().powf(params.gamma) + 1e-8)).collect();
    coordinate_descent(x, y, n, k, params, &weights)
}

fn coordinate_descent(
    x: &[f64],
    y: &[f64],
    n: usize,
    k: usize,
    params: &LassoParams,
    weights: &[f64],
) -> Result<Vec<f64>, LassoError> {
    // column squared norms
    let mut col_sq = vec![0.0; k];
    for row in 0..n {
        for j in 0..k {
            col_sq[j] += x[row * k + j] * x[row * k + j];
        }
    }
    let mut beta = vec![0.0; k];
    let mut intercept = 0.0;
    let mut resid: Vec<f64> = y.to_vec();

    for sweep in 1..=params.max_sweeps {
        let mut max_delta = 0.0f64;

        // intercept: unpenalized mean of residual-plus-intercept
        let new_intercept =
            intercept + resid.iter().sum::<f64>() / n as f64;
        let delta = new_intercept - intercept;
        if delta != 0.0 {
            for r in resid.iter_mut() {
                *r -= delta;
            }
            intercept = new_intercept;
            max_delta = max_delta.max(delta.abs());
        }

        for j in 0..k {
            if col_sq[j] == 0.0 {
                continue;
            }
            let mut dot = 0.0;
            for row in 0..n {
                dot += x[row * k + j] * resid[row];
            }
            let z = dot + beta[j] * col_sq[j];
            let new_beta = soft_threshold(z, params.lambda * weights[j]) / col_sq[j];
            let delta = new_beta - beta[j];
            if delta != 0.0 {
                for row in 0..n {
                    resid[row] -= delta * x[row * k + j];
                }
                beta[j] = new_beta;
                max_delta = max_delta.max(delta.abs());
            }
        }

        if max_delta < params.tol {
            let mut out = Vec::with_capacity(k + 1);
            out.push(intercept);
            out.extend(beta);
            return Ok(out);
        }
        if sweep == params.max_sweeps {
            return Err(LassoError::NonConvergence { sweeps: sweep, max_delta });
        }
    }
    unreachable!("loop always returns")
}

/// Adaptive LASSO with the penalty chosen by BIC over a 20-point log grid.
/// Returns the coefficients and the selected lambda.
pub fn adaptive_lasso_bic(
    x: &[f64],
    y: &[f64],
    n: usize,
    k: usize,
    gamma: f64,
) -> Result<(Vec<f64>, f64), LassoError> {
    validate(x, y, n, k)?;
    let base = LassoParams { gamma, ..LassoParams::with_lambda(0.0) };
    let pilot = ridge(x, y, n, k, base.ridge_jitter)?;
    let weights: Vec<f64> =
        pilot[1..].iter().map(|b| 1.0 / (b.abs().powf(gamma) + 1e-8)).collect();

    // smallest lambda that zeroes every coefficient (relative to the
    // intercept-only residual)
    let ybar = y.iter().sum::<f64>() / n as f64;
    let mut lambda_max = 0.0f64;
    for j in 0..k {
        let mut dot = 0.0;
        for row in 0..n {
            dot += x[row * k + j] * (y[row] - ybar);
        }
        lambda_max = lambda_max.max(dot.abs() / weights[j]);
    }
    if lambda_max == 0.0 {
        let coefs = coordinate_descent(x, y, n, k, &base, &weights)?;
        return Ok((coefs, 0.0));
    }

    let grid: Vec<f64> = (0..20)
        .map(|i| lambda_max * 10f64.powf(-4.0 * (19 - i) as f64 / 19.0))
        .collect();
    let mut best: Option<(f64, Vec<f64>, f64)> = None; // (bic, coefs, lambda)
    for &lambda in &grid {
        let params = LassoParams { lambda, gamma, ..base };
        let coefs = coordinate_descent(x, y, n, k, &params, &weights)?;
        let mut rss = 0.0;
        for row in 0..n {
            let mut pred = coefs[0];
            for j in 0..k {
                pred += coefs[j + 1] * x[row * k + j];
            }
            let e = y[row] - pred;
            rss += e * e;
        }
        let df = 1 + coefs[1..].iter().filter(|b| **b != 0.0).count();
        let bic = n as f64 * (rss.max(1e-300) / n as f64).ln() + (n as f64).ln() * df as f64;
        let better = match &best {
            None => true,
            // ties prefer the sparser (larger lambda) fit; grid is ascending
            Some((b, _, _)) => bic <= *b,
        };
        if better {
            best = Some((bic, coefs, lambda));
        }
    }
    let (_, coefs, lambda) = best.expect("grid is nonempty");
    Ok((coefs, lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::stream_rng;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn random_design(n: usize, k: usize, seed: u64) -> (Vec<f64>, rand_chacha::ChaCha8Rng) {
        let mut rng = stream_rng(seed, 0);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let x: Vec<f64> = (0..n * k).map(|_| normal.sample(&mut rng)).collect();
        (x, rng)
    }

    #[test]
    fn zero_penalty_matches_ols() {
        let (n, k) = (60, 4);
        let (x, mut rng) = random_design(n, k, 1);
        let y: Vec<f64> = (0..n)
            .map(|row| {
                1.5 + 2.0 * x[row * k] - 0.5 * x[row * k + 2] + 0.01 * rng.gen::<f64>()
            })
            .collect();
        let reference = ols(&x, &y, n, k).unwrap();
        let lasso = adaptive_lasso(&x, &y, n, k, &LassoParams::with_lambda(0.0)).unwrap();
        for (a, b) in reference.iter().zip(&lasso) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn orthonormal_design_soft_threshold_closed_form() {
        // orthonormal columns, zero-mean so they are orthogonal to the
        // intercept column too
        let n = 8;
        let k = 3;
        let mut x = vec![0.0; n * k];
        // three orthonormal columns built from sign patterns / sqrt(n)
        let s = 1.0 / (n as f64).sqrt();
        let patterns: [[f64; 8]; 3] = [
            [1.0, 1.0, 1.0, 1.0, -1.0, -1.0, -1.0, -1.0],
            [1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0],
            [1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0],
        ];
        for row in 0..n {
            for j in 0..k {
                x[row * k + j] = patterns[j][row] * s;
            }
        }
        let mut rng = stream_rng(5, 1);
        let y: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect();
        let lambda = 0.07;
        let params = LassoParams::with_lambda(lambda);
        let got = adaptive_lasso(&x, &y, n, 3, &params).unwrap();

        // oracle: on an orthonormal design the ridge pilot is the projection
        // shrunk by the jitter, and each coefficient is the soft-thresholded
        // projection under its adaptive weight
        let ybar: f64 = y.iter().sum::<f64>() / n as f64;
        for j in 0..k {
            let proj: f64 = (0..n).map(|r| x[r * k + j] * (y[r] - ybar)).sum();
            let pilot = proj / (1.0 + params.ridge_jitter);
            let w = 1.0 / (pilot.abs() + 1e-8);
            let want = soft_threshold(proj, lambda * w);
            assert!(
                (got[j + 1] - want).abs() < 1e-8,
                "coef {j}: got {} want {want}",
                got[j + 1]
            );
        }
        assert!((got[0] - ybar).abs() < 1e-8);
    }

    #[test]
    fn planted_sparse_support_recovery() {
        // small version of the recovery benchmark; the acceptance suite
        // runs the full 100-trial protocol
        let mut hits = 0;
        for trial in 0..10u64 {
            let (n, k) = (500, 20);
            let (x, mut rng) = random_design(n, k, 100 + trial);
            let normal = Normal::new(0.0, 1.0).unwrap();
            let active = [2usize, 9, 17];
            let coefs = [1.5, -2.0, 1.0];
            let signal_var: f64 = coefs.iter().map(|c| c * c).sum();
            let noise_sd = (signal_var / 10.0).sqrt();
            let y: Vec<f64> = (0..n)
                .map(|row| {
                    let mut v = 0.3;
                    for (a, c) in active.iter().zip(&coefs) {
                        v += c * x[row * k + a];
                    }
                    v + noise_sd * normal.sample(&mut rng)
                })
                .collect();
            let (fit, _) = adaptive_lasso_bic(&x, &y, n, k, 1.0).unwrap();
            let support: Vec<usize> = (0..k).filter(|j| fit[j + 1] != 0.0).collect();
            if support == active {
                hits += 1;
            }
        }
        assert!(hits >= 9, "support recovered in {hits}/10 trials");
    }

    #[test]
    fn degenerate_inputs_error() {
        assert!(matches!(ols(&[1.0], &[1.0], 1, 1), Err(LassoError::TooFewSamples(1))));
        let x = vec![1.0, f64::NAN, 0.0, 1.0];
        assert!(matches!(
            adaptive_lasso(&x, &[1.0, 2.0], 2, 2, &LassoParams::with_lambda(0.1)),
            Err(LassoError::NonFinite)
        ));
    }
}
