//! End-to-end glue: panels to rendered datasets, trained ensembles, weight
//! panels, enhanced signals, and side-by-side backtests. The CLI wraps
//! these with configuration and artifact management; the functions
//! themselves are deterministic in their seeds.

use crate::chart::{render_window, resize_bilinear, ChartError, ChartSpec, CHANNELS};
use crate::market::{collapse_bars, compute_labels, PricePanel};
use crate::nn::checkpoint::TrainMeta;
use crate::nn::model::{ResNetConfig, ResNetModel};
use crate::nn::train::{ensemble_predict, train, Dataset, TrainHistory, TrainParams};
use crate::nn::NnError;
use crate::saliency::{localize_normalized, Localization, SaliencyParams};
use crate::signals::SignalSeries;
use crate::triple_i::{
    compress_resize_normalize, transfer_weights, twma, TripleIWeights, WeightEntry, WeightPanel,
};
use crate::util::{splitmix64, stream_rng};
use rand::Rng;
use rayon::prelude::*;

/// How windows become model inputs.
#[derive(Debug, Clone)]
pub struct RenderSpec {
    pub chart: ChartSpec,
    /// Square model input side (224 canonical, smaller for micro runs).
    pub model_side: usize,
}

impl RenderSpec {
    /// Render the window ending at `(stock, day)` and resize it to the
    /// model input size, keeping raw `[0,1]` values.
    pub fn render(
        &self,
        panel: &PricePanel,
        stock: usize,
        day: usize,
    ) -> Result<Vec<f32>, ChartError> {
        let native = render_window(panel, stock, day, &self.chart)?;
        Ok(resize_bilinear(
            &native.data,
            native.height,
            native.width,
            CHANNELS,
            self.model_side,
            self.model_side,
        ))
    }
}

/// A rendered, labelled image set plus the (stock, day) grid points it came
/// from.
pub struct RenderedDataset {
    pub dataset: Dataset,
    pub points: Vec<(usize, usize)>,
    pub skipped: usize,
}

/// Render every window ending in `days` (subsampled by `stride`) that is
/// complete and has a forward label. Rendering is pure, so the panel is
/// swept in parallel and results are stitched in grid order.
pub fn build_dataset(
    panel: &PricePanel,
    render: &RenderSpec,
    horizon_r: usize,
    days: std::ops::Range<usize>,
    stride: usize,
) -> RenderedDataset {
    assert!(stride >= 1);
    let (labels, _) = compute_labels(panel, horizon_r);
    let mut label_grid = vec![None
        ; panel.n_stocks() * panel.n_days()];
    for l in &labels {
        label_grid[l.stock * panel.n_days() + l.day] = Some(l.y);
    }

    let candidates: Vec<(usize, usize, u8)> = days
        .step_by(stride)
        .flat_map(|t| {
            (0..panel.n_stocks())
                .filter_map(|s| label_grid[s * panel.n_days() + t].map(|y| (s, t, y)))
                .collect::<Vec<_>>()
        })
        .collect();

    let rendered: Vec<Option<(Vec<f32>, u8, (usize, usize))>> = candidates
        .par_iter()
        .map(|&(s, t, y)| render.render(panel, s, t).ok().map(|img| (img, y, (s, t))))
        .collect();

    let mut images = Vec::new();
    let mut labels = Vec::new();
    let mut points = Vec::new();
    let mut skipped = 0usize;
    for item in rendered {
        match item {
            Some((img, y, pt)) => {
                images.push(img);
                labels.push(y);
                points.push(pt);
            }
            None => skipped += 1,
        }
    }
    RenderedDataset {
        dataset: Dataset { images, labels, side: render.model_side },
        points,
        skipped,
    }
}

/// Train one model per seed on the same rendered dataset.
pub fn train_ensemble(
    config: &ResNetConfig,
    dataset: &Dataset,
    base: &TrainParams,
    seeds: &[u64],
) -> Result<Vec<(ResNetModel<f32>, TrainHistory)>, NnError> {
    seeds
        .iter()
        .map(|&seed| train(config.clone(), dataset, &TrainParams { seed, ..base.clone() }))
        .collect()
}

/// Ensemble members plus shared inference settings.
pub struct Ensemble {
    pub models: Vec<ResNetModel<f32>>,
    pub saliency_b: usize,
    pub saliency_sigma: [f64; 3],
    pub seed: u64,
}

impl Ensemble {
    pub fn train_meta(histories: &[TrainHistory]) -> Vec<TrainMeta> {
        histories.iter().map(|h| h.train_meta()).collect()
    }
}

fn per_point_params(base: &Ensemble, stock: usize, day: usize) -> SaliencyParams {
    let label = ((stock as u64) << 32) | day as u64;
    SaliencyParams {
        b: base.saliency_b,
        sigma: base.saliency_sigma,
        seed: splitmix64(base.seed ^ splitmix64(label)),
    }
}

/// Triple-I weights for every complete window ending in `days`: the
/// ensemble's averaged probabilities pick the class, the per-member
/// localization matrices are compressed to weight vectors and averaged.
pub fn compute_weight_panel(
    ensemble: &Ensemble,
    panel: &PricePanel,
    render: &RenderSpec,
    days: std::ops::Range<usize>,
) -> Result<WeightPanel, NnError> {
    let d = render.chart.window_d;
    let mut out = WeightPanel::empty(d, panel.n_stocks(), panel.n_days());
    let points: Vec<(usize, usize)> = days
        .flat_map(|t| (0..panel.n_stocks()).map(move |s| (s, t)))
        .collect();
    let entries: Vec<Option<((usize, usize), WeightEntry)>> = points
        .par_iter()
        .map(|&(s, t)| {
            weight_entry_at(ensemble, panel, render, s, t)
                .map(|opt| opt.map(|e| ((s, t), e)))
        })
        .collect::<Result<Vec<_>, NnError>>()?;
    for item in entries.into_iter().flatten() {
        let ((s, t), entry) = item;
        out.set(s, t, entry);
    }
    Ok(out)
}

fn weight_entry_at(
    ensemble: &Ensemble,
    panel: &PricePanel,
    render: &RenderSpec,
    stock: usize,
    day: usize,
) -> Result<Option<WeightEntry>, NnError> {
    let Ok(raw) = render.render(panel, stock, day) else {
        return Ok(None);
    };
    let (_, y_hat) = ensemble_predict(&ensemble.models, &raw)?;
    let d = render.chart.window_d;
    let params = per_point_params(ensemble, stock, day);
    let mut per_class: [Vec<TripleIWeights>; 2] = [Vec::new(), Vec::new()];
    for model in &ensemble.models {
        let loc: Localization<f32> = localize_from_raw(model, &raw, &params)?;
        for j in 0..2 {
            per_class[j].push(compress_resize_normalize(&loc.matrix[j], d));
        }
    }
    Ok(Some(WeightEntry {
        by_class: [
            TripleIWeights::average(&per_class[0]),
            TripleIWeights::average(&per_class[1]),
        ],
        y_hat,
    }))
}

fn localize_from_raw(
    model: &ResNetModel<f32>,
    raw: &[f32],
    params: &SaliencyParams,
) -> Result<Localization<f32>, NnError> {
    let side = model.input_side();
    let norm = model
        .norm
        .as_ref()
        .ok_or_else(|| NnError::Checkpoint("model has no normalization statistics".into()))?;
    let normalized = crate::nn::tensor::Tensor::from_vec(
        &[side, side, CHANNELS],
        crate::chart::apply_norm(raw, norm),
    );
    localize_normalized(model, &normalized, params)
}

/// TWMA-enhance a signal under a weight panel.
pub fn enhance(signal: &SignalSeries, weights: &WeightPanel) -> SignalSeries {
    twma(signal, weights)
}

/// Time-scale transfer: collapse the daily panel into `period`-day bars,
/// score the condensed windows with a model trained at the fine scale, and
/// spread each period weight uniformly over its days. The returned panel is
/// aligned with the daily calendar and carries `D * period`-day vectors.
pub fn transfer_weight_panel(
    ensemble: &Ensemble,
    daily_panel: &PricePanel,
    render: &RenderSpec,
    period: usize,
    daily_days: std::ops::Range<usize>,
) -> Result<WeightPanel, NnError> {
    let d_periods = render.chart.window_d;
    let collapsed = collapse_bars(daily_panel, period);
    let daily_d = d_periods * period;
    let mut out = WeightPanel::empty(daily_d, daily_panel.n_stocks(), daily_panel.n_days());

    // daily day t hosts weights when it closes a collapsed block
    let points: Vec<(usize, usize, usize)> = daily_days
        .filter_map(|t| {
            if (t + 1) % period != 0 {
                return None;
            }
            let block = (t + 1) / period - 1;
            if block >= collapsed.n_days() {
                return None;
            }
            Some((block, t))
        })
        .flat_map(|(block, t)| {
            (0..daily_panel.n_stocks()).map(move |s| (s, block, t))
        })
        .collect();

    let entries: Vec<Option<((usize, usize), WeightEntry)>> = points
        .par_iter()
        .map(|&(s, block, t)| -> Result<_, NnError> {
            let entry = weight_entry_at(ensemble, &collapsed, render, s, block)?;
            Ok(entry.map(|e| {
                ((s, t), WeightEntry {
                    by_class: [
                        transfer_weights(&e.by_class[0], period),
                        transfer_weights(&e.by_class[1], period),
                    ],
                    y_hat: e.y_hat,
                })
            }))
        })
        .collect::<Result<Vec<_>, NnError>>()?;
    for item in entries.into_iter().flatten() {
        let ((s, t), entry) = item;
        out.set(s, t, entry);
    }
    Ok(out)
}

/// A planted, separable image task for learning sanity checks: class 1
/// lights the top half, class 0 the bottom half, plus pixel noise.
pub fn separable_image_dataset(n: usize, side: usize, seed: u64) -> Dataset {
    let mut images = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = stream_rng(seed, i as u64);
        let y = (i % 2) as u8;
        let mut img = vec![0.0f32; side * side * CHANNELS];
        for row in 0..side {
            let bright = if y == 1 { row < side / 2 } else { row >= side / 2 };
            for col in 0..side {
                for c in 0..CHANNELS {
                    let base: f32 = if bright { 0.85 } else { 0.15 };
                    img[(row * side + col) * CHANNELS + c] =
                        (base + 0.1 * rng.gen::<f32>()).clamp(0.0, 1.0);
                }
            }
        }
        images.push(img);
        labels.push(y);
    }
    Dataset { images, labels, side }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::Structure;
    use crate::market::{synth_panel, Regime};
    use crate::nn::model::{Depth, MicroSpec};

    fn micro_config() -> ResNetConfig {
        ResNetConfig::new(Depth::Micro(MicroSpec {
            input_side: 16,
            base_width: 4,
            stage_blocks: vec![1],
        }))
    }

    #[test]
    fn dataset_builder_counts_and_labels() {
        let panel = synth_panel(3, 30, 5, &Regime::RandomWalk { daily_vol: 0.02 });
        let render = RenderSpec { chart: ChartSpec::new(5, Structure::OhlcVbMa), model_side: 16 };
        let built = build_dataset(&panel, &render, 1, 4..29, 1);
        // window end days 4..=28 all renderable, label needs t+1 <= 29
        assert_eq!(built.dataset.len(), 3 * 25);
        assert_eq!(built.skipped, 0);
        for (img, (s, t)) in built.dataset.images.iter().zip(&built.points) {
            assert_eq!(img.len(), 16 * 16 * 3);
            let want = u8::from(
                panel.close(*s, t + 1).unwrap() / panel.close(*s, *t).unwrap() > 1.0,
            );
            let at = built.points.iter().position(|p| p == &(*s, *t)).unwrap();
            assert_eq!(built.dataset.labels[at], want);
        }
    }

    #[test]
    fn weight_panel_entries_are_simplex_vectors() {
        let panel = synth_panel(2, 24, 9, &Regime::RandomWalk { daily_vol: 0.03 });
        let render = RenderSpec { chart: ChartSpec::new(5, Structure::OhlcVbMa), model_side: 16 };
        let built = build_dataset(&panel, &render, 1, 4..23, 1);
        let trained = train_ensemble(
            &micro_config(),
            &built.dataset,
            &TrainParams { max_epochs: 1, patience: 0, lr: 1e-3, batch_size: 8, ..Default::default() },
            &[1],
        )
        .unwrap();
        let ensemble = Ensemble {
            models: trained.into_iter().map(|(m, _)| m).collect(),
            saliency_b: 2,
            saliency_sigma: [0.1; 3],
            seed: 3,
        };
        let weights = compute_weight_panel(&ensemble, &panel, &render, 6..10).unwrap();
        assert!(weights.n_entries() > 0);
        for s in 0..2 {
            for t in 6..10 {
                if let Some(e) = weights.get(s, t) {
                    for j in 0..2 {
                        let total: f64 = e.by_class[j].w.iter().sum();
                        assert!((total - 1.0).abs() < 1e-10);
                        assert!(e.by_class[j].w.iter().all(|&v| v >= 0.0));
                        assert_eq!(e.by_class[j].w.len(), 5);
                    }
                    assert!(e.y_hat <= 1);
                }
            }
        }
    }

    #[test]
    fn weight_panel_is_deterministic() {
        let panel = synth_panel(2, 20, 11, &Regime::RandomWalk { daily_vol: 0.03 });
        let render = RenderSpec { chart: ChartSpec::new(5, Structure::OhlcVb), model_side: 16 };
        let built = build_dataset(&panel, &render, 1, 4..19, 1);
        let trained = train_ensemble(
            &micro_config(),
            &built.dataset,
            &TrainParams { max_epochs: 1, patience: 0, lr: 1e-3, batch_size: 8, ..Default::default() },
            &[2],
        )
        .unwrap();
        let ensemble = Ensemble {
            models: trained.into_iter().map(|(m, _)| m).collect(),
            saliency_b: 3,
            saliency_sigma: [0.1; 3],
            seed: 8,
        };
        let a = compute_weight_panel(&ensemble, &panel, &render, 6..9).unwrap();
        let b = compute_weight_panel(&ensemble, &panel, &render, 6..9).unwrap();
        for s in 0..2 {
            for t in 6..9 {
                assert_eq!(a.get(s, t), b.get(s, t));
            }
        }
    }

    #[test]
    fn transfer_panel_lands_on_block_ends() {
        let panel = synth_panel(2, 45, 13, &Regime::RandomWalk { daily_vol: 0.02 });
        let render = RenderSpec { chart: ChartSpec::new(5, Structure::OhlcVbMa), model_side: 16 };
        // train on condensed bars so shapes match the transfer windows
        let collapsed = collapse_bars(&panel, 4);
        let built = build_dataset(&collapsed, &render, 1, 4..collapsed.n_days() - 1, 1);
        let trained = train_ensemble(
            &micro_config(),
            &built.dataset,
            &TrainParams { max_epochs: 1, patience: 0, lr: 1e-3, batch_size: 8, ..Default::default() },
            &[4],
        )
        .unwrap();
        let ensemble = Ensemble {
            models: trained.into_iter().map(|(m, _)| m).collect(),
            saliency_b: 1,
            saliency_sigma: [0.0; 3],
            seed: 5,
        };
        let weights = transfer_weight_panel(&ensemble, &panel, &render, 4, 0..45).unwrap();
        assert_eq!(weights.d, 20);
        assert!(weights.n_entries() > 0);
        for s in 0..2 {
            for t in 0..45 {
                if let Some(e) = weights.get(s, t) {
                    assert_eq!((t + 1) % 4, 0, "weights only on block-closing days");
                    // block-constant by construction
                    for j in 0..2 {
                        assert_eq!(e.by_class[j].w.len(), 20);
                        for p in 0..5 {
                            let block = &e.by_class[j].w[p * 4..(p + 1) * 4];
                            for v in block {
                                assert_eq!(*v, block[0]);
                            }
                        }
                        let total: f64 = e.by_class[j].w.iter().sum();
                        assert!((total - 1.0).abs() < 1e-10);
                    }
                }
            }
        }
    }
}
