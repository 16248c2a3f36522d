// scratch: per-seed diagnosis of weight shapes vs fixed references
use triplei_core::backtest::{run_backtest, RiskFree};
use triplei_core::chart::{ChartSpec, Structure};
use triplei_core::market::{synth_panel, Regime};
use triplei_core::nn::model::{Depth, MicroSpec, ResNetConfig};
use triplei_core::nn::train::TrainParams;
use triplei_core::pipeline::{build_dataset, compute_weight_panel, enhance, train_ensemble, Ensemble, RenderSpec};
use triplei_core::signals::wstr;
use triplei_core::triple_i::{TripleIWeights, WeightEntry, WeightPanel, WeightSource};

fn fixed_panel(w: &[f64], n_stocks: usize, n_days: usize, lo: usize, hi: usize) -> WeightPanel {
    let tw = TripleIWeights { w: w.to_vec(), source: WeightSource::Direct };
    let mut p = WeightPanel::empty(w.len(), n_stocks, n_days);
    for s in 0..n_stocks {
        for t in lo..hi {
            p.set(s, t, WeightEntry { by_class: [tw.clone(), tw.clone()], y_hat: 1 });
        }
    }
    p
}

fn main() {
    let (n_stocks, n_days) = (24usize, 400usize);
    let (test_lo, test_hi) = (250usize, 399usize);
    let mut wins = 0;
    for seed in 0..6u64 {
        let panel = synth_panel(
            n_stocks, n_days, 1000 + seed,
            &Regime::RecencyReversal { strength: 1.1, lag_weights: vec![0.1, 0.9], daily_vol: 0.02 },
        );
        let render = RenderSpec { chart: ChartSpec::new(5, Structure::OhlcVbMa), model_side: 32 };
        let built = build_dataset(&panel, &render, 1, 5..250, 2);
        let trained = train_ensemble(
            &ResNetConfig::new(Depth::Micro(MicroSpec { input_side: 32, base_width: 8, stage_blocks: vec![1] })),
            &built.dataset,
            &TrainParams { lr: 2e-3, batch_size: 128, patience: 4, max_epochs: 12, seed, ..Default::default() },
            &[seed * 31 + 1, seed * 31 + 2],
        ).unwrap();
        let accs: Vec<f64> = trained.iter().map(|(_, h)| h.best_val_acc).collect();
        let ensemble = Ensemble {
            models: trained.into_iter().map(|(m, _)| m).collect(),
            saliency_b: 4, saliency_sigma: [0.15; 3], seed,
        };
        let weights = compute_weight_panel(&ensemble, &panel, &render, test_lo..test_hi).unwrap();
        // mean shapes
        let mut mean = [[0.0f64; 5]; 2]; let mut count = 0.0;
        for s in 0..n_stocks { for t in test_lo..test_hi {
            if let Some(e) = weights.get(s, t) {
                for j in 0..2 { for d in 0..5 { mean[j][d] += e.by_class[j].w[d]; } }
                count += 1.0;
            }
        }}
        let base = wstr(&panel);
        let rf = RiskFree::Constant(0.0);
        let sr = |sig: &triplei_core::signals::SignalSeries| {
            run_backtest(sig, &panel, 1, &rf, (test_lo, test_hi)).unwrap().sharpe.unwrap()
        };
        let sp = sr(&base);
        let se = sr(&enhance(&base, &weights));
        let s_half = sr(&enhance(&base, &fixed_panel(&[0.5, 0.5, 0.0, 0.0, 0.0], n_stocks, n_days, test_lo, test_hi)));
        let s_unif = sr(&enhance(&base, &fixed_panel(&[0.2; 5], n_stocks, n_days, test_lo, test_hi)));
        let win = se > sp; wins += u32::from(win);
        let fmt = |m: &[f64; 5]| m.iter().map(|v| format!("{:.2}", v / count)).collect::<Vec<_>>().join(",");
        println!("seed {seed}: acc {:.2}/{:.2} | plain {sp:7.2} learned {se:7.2} half {s_half:7.2} unif {s_unif:7.2} | w0 [{}] w1 [{}] win={win}",
            accs[0], accs[1], fmt(&mean[0]), fmt(&mean[1]));
    }
    println!("wins {wins}/6");
}
