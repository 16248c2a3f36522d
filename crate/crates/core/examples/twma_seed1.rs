// scratch: why does seed 1 collapse, and which smoothing settings fix it
use triplei_core::backtest::{run_backtest, RiskFree};
use triplei_core::chart::{ChartSpec, Structure};
use triplei_core::market::{synth_panel, Regime};
use triplei_core::nn::model::{Depth, MicroSpec, ResNetConfig};
use triplei_core::nn::train::TrainParams;
use triplei_core::pipeline::{build_dataset, compute_weight_panel, enhance, train_ensemble, Ensemble, RenderSpec};
use triplei_core::signals::wstr;

fn main() {
    let seed = 1u64;
    let (n_stocks, n_days) = (24usize, 400usize);
    let (test_lo, test_hi) = (250usize, 399usize);
    let panel = synth_panel(
        n_stocks, n_days, 1000 + seed,
        &Regime::RecencyReversal { strength: 1.1, lag_weights: vec![0.1, 0.9], daily_vol: 0.02 },
    );
    let render = RenderSpec { chart: ChartSpec::new(5, Structure::OhlcVbMa), model_side: 32 };
    let built = build_dataset(&panel, &render, 1, 5..250, 2);
    let base = wstr(&panel);
    let rf = RiskFree::Constant(0.0);
    let plain = run_backtest(&base, &panel, 1, &rf, (test_lo, test_hi)).unwrap().sharpe.unwrap();
    println!("plain SR {plain:.2}");

    for (label, max_epochs, b, sigma) in [
        ("base    e12 b4 s.15", 12usize, 4usize, 0.15f64),
        ("moreB   e12 b8 s.15", 12, 8, 0.15),
        ("bigS    e12 b8 s.40", 12, 8, 0.40),
        ("short   e6  b8 s.15", 6, 8, 0.15),
    ] {
        let trained = train_ensemble(
            &ResNetConfig::new(Depth::Micro(MicroSpec { input_side: 32, base_width: 8, stage_blocks: vec![1] })),
            &built.dataset,
            &TrainParams { lr: 2e-3, batch_size: 128, patience: 4, max_epochs, seed, ..Default::default() },
            &[seed * 31 + 1, seed * 31 + 2],
        ).unwrap();
        let accs: Vec<f64> = trained.iter().map(|(_, h)| h.best_val_acc).collect();
        let ensemble = Ensemble {
            models: trained.into_iter().map(|(m, _)| m).collect(),
            saliency_b: b, saliency_sigma: [sigma; 3], seed,
        };
        let weights = compute_weight_panel(&ensemble, &panel, &render, test_lo..test_hi).unwrap();
        // per-point dispersion of omega_1 within each class
        let mut vals: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        for s in 0..n_stocks { for t in test_lo..test_hi {
            if let Some(e) = weights.get(s, t) {
                for j in 0..2 { vals[j].push(e.by_class[j].w[0]); }
            }
        }}
        let stats = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let sd = (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt();
            (m, sd)
        };
        let (m0, s0) = stats(&vals[0]);
        let (m1, s1) = stats(&vals[1]);
        let se = run_backtest(&enhance(&base, &weights), &panel, 1, &rf, (test_lo, test_hi))
            .unwrap().sharpe.unwrap();
        println!("{label}: acc {:.2}/{:.2} enhanced SR {se:8.2} | omega1 c0 {m0:.2}±{s0:.2} c1 {m1:.2}±{s1:.2}",
            accs[0], accs[1]);
    }
}
