// scratch: tuning probe for the TWMA-efficacy criterion
use triplei_core::backtest::{run_backtest, RiskFree};
use triplei_core::chart::{ChartSpec, Structure};
use triplei_core::market::{synth_panel, Regime};
use triplei_core::nn::model::ResNetConfig;
use triplei_core::nn::train::TrainParams;
use triplei_core::pipeline::{
    build_dataset, compute_weight_panel, enhance, train_ensemble, Ensemble, RenderSpec,
};
use triplei_core::signals::wstr;

fn main() {
    let t0 = std::time::Instant::now();
    let (n_stocks, n_days) = (24usize, 400usize);
    let (train_lo, train_hi, test_lo, test_hi) = (5usize, 250usize, 250usize, 399usize);
    let mut wins = 0;
    for seed in 0..3u64 {
        let t1 = std::time::Instant::now();
        let panel = synth_panel(
            n_stocks,
            n_days,
            1000 + seed,
            &Regime::RecencyReversal {
                strength: 1.1,
                lag_weights: vec![0.1, 0.9],
                daily_vol: 0.02,
            },
        );
        let render = RenderSpec { chart: ChartSpec::new(5, Structure::OhlcVbMa), model_side: 32 };
        let built = build_dataset(&panel, &render, 1, train_lo..train_hi, 2);
        let trained = train_ensemble(
            &ResNetConfig::new(triplei_core::nn::model::Depth::Micro(triplei_core::nn::model::MicroSpec { input_side: 32, base_width: 8, stage_blocks: vec![1] })),
            &built.dataset,
            &TrainParams {
                lr: 2e-3,
                batch_size: 128,
                patience: 4,
                max_epochs: 12,
                seed,
                ..Default::default()
            },
            &[seed * 31 + 1],
        )
        .unwrap();
        let acc = trained[0].1.best_val_acc;
        let ensemble = Ensemble {
            models: trained.into_iter().map(|(m, _)| m).collect(),
            saliency_b: 4,
            saliency_sigma: [0.15; 3],
            seed,
        };
        let weights = compute_weight_panel(&ensemble, &panel, &render, test_lo..test_hi).unwrap();
        let base = wstr(&panel);
        let enhanced = enhance(&base, &weights);
        let rf = RiskFree::Constant(0.0);
        let plain = run_backtest(&base, &panel, 1, &rf, (test_lo, test_hi)).unwrap();
        let twma_r = run_backtest(&enhanced, &panel, 1, &rf, (test_lo, test_hi)).unwrap();
        let (sp, se) = (plain.sharpe.unwrap(), twma_r.sharpe.unwrap());
        let win = se > sp;
        wins += u32::from(win);
        println!(
            "seed {seed}: val_acc {acc:.3} plain SR {sp:8.3} enhanced SR {se:8.3} win={win} ({:?})",
            t1.elapsed()
        );
    }
    println!("wins: {wins}/3 total {:?}", t0.elapsed());
}
