//! Momentum and reversal signal definitions, plus TREND's normalized
//! moving-average-price features.
//!
//! Windows follow the usual conventions: MOM is the 2-12 month momentum
//! `close[t-21]/close[t-252] - 1`, STR the 1-month reversal, WSTR the
//! 1-week reversal. Reversal signals are negated so that for every signal
//! a higher value reads more bullish.

use super::SignalSeries;
use crate::market::PricePanel;

fn ratio_signal(
    panel: &PricePanel,
    name: &str,
    num_lag: usize,
    den_lag: usize,
    negate: bool,
) -> SignalSeries {
    let mut out = SignalSeries::for_panel(name, panel);
    for s in 0..panel.n_stocks() {
        for t in 0..panel.n_days() {
            if t < den_lag {
                continue;
            }
            let (Some(num), Some(den)) =
                (panel.close(s, t - num_lag), panel.close(s, t - den_lag))
            else {
                continue;
            };
            let r = num / den - 1.0;
            out.set(s, t, if negate { -r } else { r });
        }
    }
    out
}

/// 2-12 momentum: the return from 12 months back to 1 month back.
pub fn mom(panel: &PricePanel) -> SignalSeries {
    ratio_signal(panel, "MOM", 21, 252, false)
}

/// 1-month short-term reversal (negated past month return).
pub fn str_signal(panel: &PricePanel) -> SignalSeries {
    ratio_signal(panel, "STR", 0, 21, true)
}

/// 1-week reversal (negated past week return).
pub fn wstr(panel: &PricePanel) -> SignalSeries {
    ratio_signal(panel, "WSTR", 0, 5, true)
}

/// TREND features: for each lag `L`, the L-day moving average of closes
/// divided by today's close. One feature series per lag; days lacking the
/// full window (or containing holes) are omitted.
pub fn trend_features(panel: &PricePanel, lags: &[usize]) -> Vec<SignalSeries> {
    lags.iter()
        .map(|&lag| {
            assert!(lag >= 1);
            let mut out = SignalSeries::for_panel(format!("MA{lag}/close"), panel);
            for s in 0..panel.n_stocks() {
                for t in 0..panel.n_days() {
                    if t + 1 < lag {
                        continue;
                    }
                    let window: Option<Vec<f64>> =
                        (t + 1 - lag..=t).map(|u| panel.close(s, u)).collect();
                    let (Some(window), Some(today)) = (window, panel.close(s, t)) else {
                        continue;
                    };
                    let ma = window.iter().sum::<f64>() / lag as f64;
                    out.set(s, t, ma / today);
                }
            }
            out
        })
        .collect()
}

pub const TREND_DEFAULT_LAGS: [usize; 4] = [5, 10, 20, 50];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{synth_panel, Regime};

    #[test]
    fn flat_prices_zero_signals() {
        let panel = synth_panel(2, 300, 3, &Regime::Flat);
        for sig in [mom(&panel), str_signal(&panel), wstr(&panel)] {
            assert!(sig.n_defined() > 0);
            for s in 0..2 {
                for t in 0..300 {
                    if let Some(v) = sig.get(s, t) {
                        assert_eq!(v, 0.0, "{} at ({s},{t})", sig.name);
                    }
                }
            }
        }
        for feat in trend_features(&panel, &TREND_DEFAULT_LAGS) {
            for s in 0..2 {
                for t in 0..300 {
                    if let Some(v) = feat.get(s, t) {
                        assert!((v - 1.0).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn signals_match_brute_force() {
        let panel = synth_panel(3, 320, 11, &Regime::RandomWalk { daily_vol: 0.02 });
        let m = mom(&panel);
        let s_ = str_signal(&panel);
        let w = wstr(&panel);
        for s in 0..3 {
            for t in 0..320 {
                let close = |u: usize| panel.close(s, u).unwrap();
                if t >= 252 {
                    let want = close(t - 21) / close(t - 252) - 1.0;
                    assert!((m.get(s, t).unwrap() - want).abs() < 1e-15);
                } else {
                    assert!(m.get(s, t).is_none());
                }
                if t >= 21 {
                    let want = -(close(t) / close(t - 21) - 1.0);
                    assert!((s_.get(s, t).unwrap() - want).abs() < 1e-15);
                }
                if t >= 5 {
                    let want = -(close(t) / close(t - 5) - 1.0);
                    assert!((w.get(s, t).unwrap() - want).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn mom_direct_example() {
        // close[t-252] = 100, close[t-21] = 120 -> MOM = 0.20; build via a
        // panel where we can find such closes is awkward, so check the
        // formula on the synthetic panel instead
        let panel = synth_panel(1, 260, 5, &Regime::RandomWalk { daily_vol: 0.01 });
        let t = 255;
        let want = panel.close(0, t - 21).unwrap() / panel.close(0, t - 252).unwrap() - 1.0;
        assert_eq!(mom(&panel).get(0, t), Some(want));
    }

    #[test]
    fn trend_features_match_loop_oracle() {
        let panel = synth_panel(2, 80, 13, &Regime::RandomWalk { daily_vol: 0.03 });
        let feats = trend_features(&panel, &[2, 10]);
        for s in 0..2 {
            for t in 0..80 {
                if t >= 9 {
                    let ma: f64 =
                        (t - 9..=t).map(|u| panel.close(s, u).unwrap()).sum::<f64>() / 10.0;
                    let want = ma / panel.close(s, t).unwrap();
                    assert!((feats[1].get(s, t).unwrap() - want).abs() < 1e-15);
                }
            }
        }
        // doubling prices daily: MA_2 / close = (c/2 + c) / (2 c) = 0.75
        // emulate by direct construction of the ratio
        let t = 40;
        let c_prev = panel.close(0, t - 1).unwrap();
        let c_now = panel.close(0, t).unwrap();
        let want = (c_prev + c_now) / 2.0 / c_now;
        assert!((feats[0].get(0, t).unwrap() - want).abs() < 1e-15);
    }
}
