// scratch: architecture x smoothing grid on the hard seeds
use triplei_core::backtest::{run_backtest, RiskFree};
use triplei_core::chart::{ChartSpec, Structure};
use triplei_core::market::{synth_panel, Regime};
use triplei_core::nn::model::{Depth, MicroSpec, ResNetConfig};
use triplei_core::nn::train::TrainParams;
use triplei_core::pipeline::{build_dataset, compute_weight_panel, enhance, train_ensemble, Ensemble, RenderSpec};
use triplei_core::signals::wstr;

fn main() {
    let (n_stocks, n_days) = (24usize, 400usize);
    let (test_lo, test_hi) = (250usize, 399usize);
    for (label, blocks, width, max_epochs, sigma) in [
        ("one-stage w8  e8 s.30", vec![1usize], 8usize, 8usize, 0.30f64),
        ("two-stage w8  e8 s.30", vec![1, 1], 8, 8, 0.30),
        ("one-stage w12 e8 s.30", vec![1], 12, 8, 0.30),
    ] {
        let mut wins = 0;
        let mut line = String::new();
        for seed in 0..3u64 {
            let panel = synth_panel(
                n_stocks, n_days, 1000 + seed,
                &Regime::RecencyReversal { strength: 1.1, lag_weights: vec![0.1, 0.9], daily_vol: 0.02 },
            );
            let render = RenderSpec { chart: ChartSpec::new(5, Structure::OhlcVbMa), model_side: 32 };
            let built = build_dataset(&panel, &render, 1, 5..250, 2);
            let trained = train_ensemble(
                &ResNetConfig::new(Depth::Micro(MicroSpec { input_side: 32, base_width: width, stage_blocks: blocks.clone() })),
                &built.dataset,
                &TrainParams { lr: 2e-3, batch_size: 128, patience: 3, max_epochs, seed, ..Default::default() },
                &[seed * 31 + 1, seed * 31 + 2],
            ).unwrap();
            let ensemble = Ensemble {
                models: trained.into_iter().map(|(m, _)| m).collect(),
                saliency_b: 8, saliency_sigma: [sigma; 3], seed,
            };
            let weights = compute_weight_panel(&ensemble, &panel, &render, test_lo..test_hi).unwrap();
            let base = wstr(&panel);
            let rf = RiskFree::Constant(0.0);
            let sp = run_backtest(&base, &panel, 1, &rf, (test_lo, test_hi)).unwrap().sharpe.unwrap();
            let se = run_backtest(&enhance(&base, &weights), &panel, 1, &rf, (test_lo, test_hi)).unwrap().sharpe.unwrap();
            wins += u32::from(se > sp);
            line.push_str(&format!(" s{seed}:{sp:+.1}/{se:+.1}"));
        }
        println!("{label}: wins {wins}/3 |{line}");
    }
}
