// scratch: inspect learned weights and accuracy on the reversal regime
use triplei_core::chart::{ChartSpec, Structure};
use triplei_core::market::{synth_panel, Regime};
use triplei_core::nn::model::ResNetConfig;
use triplei_core::nn::train::TrainParams;
use triplei_core::pipeline::{build_dataset, compute_weight_panel, train_ensemble, Ensemble, RenderSpec};

fn main() {
    let panel = synth_panel(
        24,
        400,
        1000,
        &Regime::RecencyReversal { strength: 1.0, lag_weights: vec![0.1, 0.9], daily_vol: 0.02 },
    );
    let render = RenderSpec { chart: ChartSpec::new(5, Structure::OhlcVbMa), model_side: 32 };
    let built = build_dataset(&panel, &render, 1, 5..250, 2);
    println!("dataset: {} images", built.dataset.len());
    let t0 = std::time::Instant::now();
    let trained = train_ensemble(
        &ResNetConfig::new(triplei_core::nn::model::Depth::Micro(triplei_core::nn::model::MicroSpec { input_side: 32, base_width: 8, stage_blocks: vec![1] })),
        &built.dataset,
        &TrainParams { lr: 2e-3, batch_size: 128, patience: 4, max_epochs: 15, ..Default::default() },
        &[1],
    )
    .unwrap();
    println!(
        "trained in {:?}; best epoch {} val_acc {:.3}",
        t0.elapsed(),
        trained[0].1.best_epoch,
        trained[0].1.best_val_acc
    );
    let ensemble = Ensemble {
        models: trained.into_iter().map(|(m, _)| m).collect(),
        saliency_b: 4,
        saliency_sigma: [0.15; 3],
        seed: 5,
    };
    let weights = compute_weight_panel(&ensemble, &panel, &render, 250..280).unwrap();
    let mut mean = [[0.0f64; 5]; 2];
    let mut count = 0.0;
    for s in 0..24 {
        for t in 250..280 {
            if let Some(e) = weights.get(s, t) {
                for j in 0..2 {
                    for d in 0..5 {
                        mean[j][d] += e.by_class[j].w[d];
                    }
                }
                count += 1.0;
            }
        }
    }
    for j in 0..2 {
        let row: Vec<String> = mean[j].iter().map(|v| format!("{:.3}", v / count)).collect();
        println!("mean omega class {j}: [{}] (d=1 most recent)", row.join(", "));
    }
}
