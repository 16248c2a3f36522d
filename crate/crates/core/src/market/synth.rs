//! Deterministic synthetic OHLCV panels with plantable return structure.

use super::{OhlcvBar, PricePanel};
use crate::util::stream_rng;
use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Return-generating process for synthetic panels.
#[derive(Debug, Clone, PartialEq)]
pub enum Regime {
    /// Constant price, zero range, constant volume.
    Flat,
    /// iid Gaussian log-returns.
    RandomWalk { daily_vol: f64 },
    /// Next-day return follows the trailing 5-day mean return.
    Momentum { strength: f64, daily_vol: f64 },
    /// Next-day return reverses a weighted sum of recent returns;
    /// `lag_weights[0]` multiplies the most recent day's return.
    RecencyReversal {
        strength: f64,
        lag_weights: Vec<f64>,
        daily_vol: f64,
    },
}

/// Weekday trading calendar starting 2015-01-05.
pub(crate) fn trading_calendar(n_days: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n_days);
    let mut d = NaiveDate::from_ymd_opt(2015, 1, 5).unwrap();
    while out.len() < n_days {
        if d.weekday() != Weekday::Sat && d.weekday() != Weekday::Sun {
            out.push(d);
        }
        d += Duration::days(1);
    }
    out
}

/// Generate a panel of `n_stocks` x `n_days` bars. Deterministic for a fixed
/// seed: each stock draws from its own (seed, stock)-derived stream, so
/// adding stocks or days never perturbs existing bars.
pub fn synth_panel(n_stocks: usize, n_days: usize, seed: u64, regime: &Regime) -> PricePanel {
    assert!(n_stocks >= 1 && n_days >= 1, "need at least one stock and one day");
    let calendar = trading_calendar(n_days);
    let mut bars = Vec::with_capacity(n_stocks * n_days);
    let mut caps = Vec::with_capacity(n_stocks * n_days);
    let mut stocks = Vec::with_capacity(n_stocks);
    for s in 0..n_stocks {
        stocks.push(format!("S{s:04}"));
        let mut rng = stream_rng(seed, s as u64);
        let (stock_bars, stock_caps) = gen_stock(&mut rng, &calendar, regime);
        bars.extend(stock_bars.into_iter().map(Some));
        caps.extend(stock_caps.into_iter().map(Some));
    }
    PricePanel::new(stocks, calendar, bars, caps).expect("synthetic bars satisfy invariants")
}

fn gen_stock(
    rng: &mut ChaCha8Rng,
    calendar: &[NaiveDate],
    regime: &Regime,
) -> (Vec<OhlcvBar>, Vec<f64>) {
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let p0 = 20.0 * (1.0 + rng.gen::<f64>() * 4.0); // 20..100
    let shares = 1.0e6 * (1.0 + rng.gen::<f64>() * 9.0);
    let base_volume = 1.0e4 * (1.0 + rng.gen::<f64>() * 9.0);

    let n = calendar.len();
    let mut rets = vec![0.0f64; n];
    match regime {
        Regime::Flat => {}
        Regime::RandomWalk { daily_vol } => {
            for r in rets.iter_mut() {
                *r = daily_vol * std_normal.sample(rng);
            }
        }
        Regime::Momentum { strength, daily_vol } => {
            for t in 0..n {
                let lookback = t.min(5);
                let drift = if lookback == 0 {
                    0.0
                } else {
                    let past: f64 = rets[t - lookback..t].iter().sum();
                    strength * past / lookback as f64
                };
                rets[t] = drift + daily_vol * std_normal.sample(rng);
            }
        }
        Regime::RecencyReversal { strength, lag_weights, daily_vol } => {
            for t in 0..n {
                let mut drift = 0.0;
                for (j, w) in lag_weights.iter().enumerate() {
                    if t > j {
                        drift -= strength * w * rets[t - 1 - j];
                    }
                }
                rets[t] = drift + daily_vol * std_normal.sample(rng);
            }
        }
    }

    let vol_scale = match regime {
        Regime::Flat => 0.0,
        Regime::RandomWalk { daily_vol }
        | Regime::Momentum { daily_vol, .. }
        | Regime::RecencyReversal { daily_vol, .. } => *daily_vol,
    };

    let mut bars = Vec::with_capacity(n);
    let mut caps = Vec::with_capacity(n);
    let mut prev_close = p0;
    for (t, date) in calendar.iter().enumerate() {
        let close = prev_close * rets[t].exp();
        let (open, high, low, volume);
        if vol_scale == 0.0 {
            open = prev_close;
            high = close.max(open);
            low = close.min(open);
            volume = base_volume;
        } else {
            let gap = 0.25 * vol_scale * std_normal.sample(rng);
            open = prev_close * gap.exp();
            let wick_up = (0.5 * vol_scale * std_normal.sample(rng)).abs();
            let wick_dn = (0.5 * vol_scale * std_normal.sample(rng)).abs();
            high = open.max(close) * wick_up.exp();
            low = open.min(close) * (-wick_dn).exp();
            // volume swells on large moves so images carry activity information
            let shock = 0.3 * std_normal.sample(rng) + (rets[t].abs() / vol_scale).min(4.0);
            volume = base_volume * shock.exp();
        }
        bars.push(OhlcvBar { date: *date, open, high, low, close, volume });
        caps.push(close * shares);
        prev_close = close;
    }
    (bars, caps)
}
