//! Bilinear resampling (align-corners false), generic over f32/f64.

use num_traits::Float;

/// Resize an `h x w x c` row-major image to `out_h x out_w x c`.
///
/// Source coordinates follow the half-pixel convention
/// `src = (dst + 0.5) * (in / out) - 0.5`, clamped to the source grid, with
/// interpolation weights computed in the element type.
pub fn resize_bilinear<T: Float>(
    src: &[T],
    h: usize,
    w: usize,
    c: usize,
    out_h: usize,
    out_w: usize,
) -> Vec<T> {
    assert_eq!(src.len(), h * w * c, "source length vs shape");
    assert!(h >= 1 && w >= 1 && out_h >= 1 && out_w >= 1);
    let half = T::from(0.5).unwrap();
    let zero = T::zero();
    let one = T::one();

    let axis = |n_in: usize, n_out: usize, i: usize| -> (usize, usize, T) {
        let scale = T::from(n_in).unwrap() / T::from(n_out).unwrap();
        let pos = (T::from(i).unwrap() + half) * scale - half;
        let pos = pos.max(zero).min(T::from(n_in - 1).unwrap());
        let lo = pos.floor();
        let lo_i = lo.to_usize().unwrap();
        let hi_i = (lo_i + 1).min(n_in - 1);
        (lo_i, hi_i, pos - lo)
    };

    let mut out = Vec::with_capacity(out_h * out_w * c);
    for oy in 0..out_h {
        let (y0, y1, fy) = axis(h, out_h, oy);
        for ox in 0..out_w {
            let (x0, x1, fx) = axis(w, out_w, ox);
            let w00 = (one - fy) * (one - fx);
            let w01 = (one - fy) * fx;
            let w10 = fy * (one - fx);
            let w11 = fy * fx;
            let base00 = (y0 * w + x0) * c;
            let base01 = (y0 * w + x1) * c;
            let base10 = (y1 * w + x0) * c;
            let base11 = (y1 * w + x1) * c;
            for ch in 0..c {
                out.push(
                    src[base00 + ch] * w00
                        + src[base01 + ch] * w01
                        + src[base10 + ch] * w10
                        + src[base11 + ch] * w11,
                );
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two-loop reference with no shared code: recomputes weights per output
    /// pixel directly from the definition.
    fn oracle(src: &[f64], h: usize, w: usize, out_h: usize, out_w: usize) -> Vec<f64> {
        let mut out = vec![0.0; out_h * out_w];
        for oy in 0..out_h {
            for ox in 0..out_w {
                let sy = ((oy as f64 + 0.5) * h as f64 / out_h as f64 - 0.5)
                    .clamp(0.0, (h - 1) as f64);
                let sx = ((ox as f64 + 0.5) * w as f64 / out_w as f64 - 0.5)
                    .clamp(0.0, (w - 1) as f64);
                let y0 = sy.floor() as usize;
                let x0 = sx.floor() as usize;
                let y1 = (y0 + 1).min(h - 1);
                let x1 = (x0 + 1).min(w - 1);
                let fy = sy - y0 as f64;
                let fx = sx - x0 as f64;
                out[oy * out_w + ox] = src[y0 * w + x0] * (1.0 - fy) * (1.0 - fx)
                    + src[y0 * w + x1] * (1.0 - fy) * fx
                    + src[y1 * w + x0] * fy * (1.0 - fx)
                    + src[y1 * w + x1] * fy * fx;
            }
        }
        out
    }

    #[test]
    fn constant_image_stays_constant() {
        let src = vec![0.37f64; 7 * 13 * 3];
        let out = resize_bilinear(&src, 7, 13, 3, 224, 224);
        assert!(out.iter().all(|&v| (v - 0.37).abs() < 1e-15));
    }

    #[test]
    fn same_size_is_identity() {
        let src: Vec<f64> = (0..6 * 6).map(|i| (i as f64).sin()).collect();
        let out = resize_bilinear(&src, 6, 6, 1, 6, 6);
        for (a, b) in src.iter().zip(&out) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn ramp_matches_brute_force_oracle() {
        let (h, w) = (224, 220);
        let src: Vec<f64> = (0..h * w)
            .map(|i| {
                let (y, x) = (i / w, i % w);
                0.3 * y as f64 + 0.11 * x as f64 + 0.001 * (y * x) as f64
            })
            .collect();
        let got = resize_bilinear(&src, h, w, 1, 224, 224);
        let want = oracle(&src, h, w, 224, 224);
        for (g, e) in got.iter().zip(&want) {
            assert!((g - e).abs() < 1e-12, "got {g}, want {e}");
        }
    }

    #[test]
    fn resize_is_linear_in_pixels() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let (h, w) = (17, 31);
        let x: Vec<f64> = (0..h * w).map(|_| rng.gen::<f64>()).collect();
        let y: Vec<f64> = (0..h * w).map(|_| rng.gen::<f64>()).collect();
        let (a, b) = (1.7, -0.4);
        let combined: Vec<f64> = x.iter().zip(&y).map(|(xi, yi)| a * xi + b * yi).collect();
        let rx = resize_bilinear(&x, h, w, 1, 50, 41);
        let ry = resize_bilinear(&y, h, w, 1, 50, 41);
        let rc = resize_bilinear(&combined, h, w, 1, 50, 41);
        for i in 0..rc.len() {
            assert!((rc[i] - (a * rx[i] + b * ry[i])).abs() < 1e-12);
        }
    }
}
