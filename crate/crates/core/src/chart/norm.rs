//! Per-channel normalization statistics from training-sample images.

use super::{ChartError, CHANNELS};
use serde::{Deserialize, Serialize};

const STD_FLOOR: f64 = 1e-6;

/// Per-channel mean and standard deviation (population), std floored at 1e-6.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: [f64; CHANNELS],
    pub std: [f64; CHANNELS],
}

/// Welford accumulation over the pixels of every training image.
pub fn fit_norm<'a, I>(training_images: I) -> Result<NormStats, ChartError>
where
    I: IntoIterator<Item = &'a [f32]>,
{
    let mut count = [0u64; CHANNELS];
    let mut mean = [0.0f64; CHANNELS];
    let mut m2 = [0.0f64; CHANNELS];
    for img in training_images {
        assert_eq!(img.len() % CHANNELS, 0, "image length must be a multiple of 3");
        for (i, &v) in img.iter().enumerate() {
            let c = i % CHANNELS;
            let v = v as f64;
            count[c] += 1;
            let delta = v - mean[c];
            mean[c] += delta / count[c] as f64;
            m2[c] += delta * (v - mean[c]);
        }
    }
    if count[0] == 0 {
        return Err(ChartError::EmptyTrainingSet);
    }
    let mut std = [0.0; CHANNELS];
    for c in 0..CHANNELS {
        std[c] = (m2[c] / count[c] as f64).sqrt().max(STD_FLOOR);
    }
    Ok(NormStats { mean, std })
}

/// Per-channel `(x - mean) / std`, f32 in, f32 out.
pub fn apply_norm(tensor: &[f32], stats: &NormStats) -> Vec<f32> {
    tensor
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let c = i % CHANNELS;
            ((v as f64 - stats.mean[c]) / stats.std[c]) as f32
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_white_training_set() {
        let img = vec![1.0f32; 6 * CHANNELS];
        let stats = fit_norm([img.as_slice()]).unwrap();
        for c in 0..CHANNELS {
            assert_eq!(stats.mean[c], 1.0);
            assert_eq!(stats.std[c], STD_FLOOR);
        }
        let normed = apply_norm(&img, &stats);
        assert!(normed.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_point_statistics() {
        let a = vec![0.0f32; 4 * CHANNELS];
        let b = vec![1.0f32; 4 * CHANNELS];
        let stats = fit_norm([a.as_slice(), b.as_slice()]).unwrap();
        for c in 0..CHANNELS {
            assert!((stats.mean[c] - 0.5).abs() < 1e-12);
            assert!((stats.std[c] - 0.5).abs() < 1e-12);
        }
        let na = apply_norm(&a, &stats);
        let nb = apply_norm(&b, &stats);
        assert!(na.iter().all(|&v| (v + 1.0).abs() < 1e-6));
        assert!(nb.iter().all(|&v| (v - 1.0).abs() < 1e-6));
    }

    #[test]
    fn streaming_matches_two_pass_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let images: Vec<Vec<f32>> =
            (0..100).map(|_| (0..5 * 7 * CHANNELS).map(|_| rng.gen::<f32>()).collect()).collect();
        let stats = fit_norm(images.iter().map(|i| i.as_slice())).unwrap();

        // naive two-pass oracle
        for c in 0..CHANNELS {
            let values: Vec<f64> = images
                .iter()
                .flat_map(|img| {
                    img.iter()
                        .enumerate()
                        .filter(move |(i, _)| i % CHANNELS == c)
                        .map(|(_, &v)| v as f64)
                })
                .collect();
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64;
            assert!((stats.mean[c] - mean).abs() < 1e-10);
            assert!((stats.std[c] - var.sqrt()).abs() < 1e-10);
        }
    }

    #[test]
    fn empty_training_set_is_error() {
        let out = fit_norm(std::iter::empty::<&[f32]>());
        assert!(matches!(out, Err(ChartError::EmptyTrainingSet)));
    }
}
