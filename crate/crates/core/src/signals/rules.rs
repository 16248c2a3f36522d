//! The technical trading-rule universe: five families over parameter grids,
//! each rule emitting a {-1, 0, +1} position per (stock, day).

use super::{SignalError, SignalSeries};
use crate::market::PricePanel;
use std::collections::BTreeSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RuleFamily {
    /// Enter long after the close rises `x` above the running trough, short
    /// after it falls `x` below the running peak; otherwise hold the state.
    Filter { x: f64 },
    /// Sign of fast-vs-slow moving-average spread on closes.
    MaCross { fast: usize, slow: usize },
    /// Breakout past the prior `n`-day close maximum/minimum.
    SupportResistance { n: usize },
    /// Breakout from an `n`-day channel of relative width at most `c`.
    ChannelBreakout { n: usize, c: f64 },
    /// Sign of fast-vs-slow moving-average spread on on-balance volume.
    ObvMa { fast: usize, slow: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradingRule {
    pub family: RuleFamily,
    pub id: String,
}

impl TradingRule {
    pub fn new(family: RuleFamily) -> Self {
        let id = match family {
            RuleFamily::Filter { x } => format!("filter({x})"),
            RuleFamily::MaCross { fast, slow } => format!("ma-cross({fast},{slow})"),
            RuleFamily::SupportResistance { n } => format!("support-resistance({n})"),
            RuleFamily::ChannelBreakout { n, c } => format!("channel-breakout({n},{c})"),
            RuleFamily::ObvMa { fast, slow } => format!("obv-ma({fast},{slow})"),
        };
        Self { family, id }
    }

    /// Trading days of history the rule needs before emitting.
    pub fn lookback(&self) -> usize {
        match self.family {
            RuleFamily::Filter { .. } => 1,
            RuleFamily::MaCross { fast, slow } => fast.max(slow),
            RuleFamily::SupportResistance { n } => n + 1,
            RuleFamily::ChannelBreakout { n, .. } => n + 1,
            RuleFamily::ObvMa { fast, slow } => fast.max(slow) + 1,
        }
    }
}

/// Parameter grids, one per family; the universe is their disjoint union
/// and its size is the exact sum of per-family grid products.
#[derive(Debug, Clone)]
pub struct RuleGrid {
    pub filter_x: Vec<f64>,
    pub ma_fast: Vec<usize>,
    pub ma_slow: Vec<usize>,
    pub sr_n: Vec<usize>,
    pub cb_n: Vec<usize>,
    pub cb_c: Vec<f64>,
    pub obv_fast: Vec<usize>,
    pub obv_slow: Vec<usize>,
}

impl RuleGrid {
    /// Desk-scale grid (~200 rules).
    pub fn desk() -> Self {
        Self {
            filter_x: vec![
                0.005, 0.01, 0.015, 0.02, 0.025, 0.03, 0.035, 0.04, 0.045, 0.05, 0.06, 0.07,
                0.08, 0.09, 0.10, 0.12, 0.14, 0.16, 0.18, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45,
                0.50, 0.60, 0.70, 0.80, 0.90,
            ],
            ma_fast: vec![1, 2, 3, 5, 7, 9, 10],
            ma_slow: vec![12, 15, 20, 25, 30, 40, 50],
            sr_n: vec![2, 3, 4, 5, 7, 10, 12, 15, 20, 25, 30, 40, 50, 75, 100, 125, 150, 175, 200, 250],
            cb_n: vec![5, 10, 15, 20, 25, 50, 100],
            cb_c: vec![0.005, 0.01, 0.02, 0.03, 0.05, 0.075, 0.10],
            obv_fast: vec![1, 2, 3, 5, 7, 9, 10],
            obv_slow: vec![12, 15, 20, 25, 30, 40, 50],
        }
    }

    /// Full grid (several thousand rules).
    pub fn full() -> Self {
        let mut filter_x: Vec<f64> = Vec::new();
        for i in 1..=200 {
            filter_x.push(i as f64 * 0.005);
        }
        let fast: Vec<usize> = (1..=30).collect();
        let slow: Vec<usize> = (31..=70).collect();
        let sr: Vec<usize> = (2..=121).collect();
        let cb_n: Vec<usize> = (2..=41).collect();
        let cb_c: Vec<f64> = (1..=30).map(|i| i as f64 * 0.005).collect();
        Self {
            filter_x,
            ma_fast: fast.clone(),
            ma_slow: slow.clone(),
            sr_n: sr,
            cb_n,
            cb_c,
            obv_fast: fast,
            obv_slow: slow,
        }
    }

    /// Exact combinatorial size of the universe this grid generates.
    pub fn size(&self) -> usize {
        self.filter_x.len()
            + self.ma_fast.len() * self.ma_slow.len()
            + self.sr_n.len()
            + self.cb_n.len() * self.cb_c.len()
            + self.obv_fast.len() * self.obv_slow.len()
    }
}

/// Enumerate the rule universe; duplicate grid entries are a config error.
pub fn rule_universe(grid: &RuleGrid) -> Result<Vec<TradingRule>, SignalError> {
    let mut rules = Vec::with_capacity(grid.size());
    for &x in &grid.filter_x {
        rules.push(TradingRule::new(RuleFamily::Filter { x }));
    }
    for &fast in &grid.ma_fast {
        for &slow in &grid.ma_slow {
            rules.push(TradingRule::new(RuleFamily::MaCross { fast, slow }));
        }
    }
    for &n in &grid.sr_n {
        rules.push(TradingRule::new(RuleFamily::SupportResistance { n }));
    }
    for &n in &grid.cb_n {
        for &c in &grid.cb_c {
            rules.push(TradingRule::new(RuleFamily::ChannelBreakout { n, c }));
        }
    }
    for &fast in &grid.obv_fast {
        for &slow in &grid.obv_slow {
            rules.push(TradingRule::new(RuleFamily::ObvMa { fast, slow }));
        }
    }
    let mut ids = BTreeSet::new();
    for rule in &rules {
        if !ids.insert(rule.id.as_str()) {
            return Err(SignalError::DuplicateRule(rule.id.clone()));
        }
    }
    Ok(rules)
}

fn ma(values: &[Option<f64>], t: usize, n: usize) -> Option<f64> {
    if t + 1 < n {
        return None;
    }
    let window: Option<Vec<f64>> = (t + 1 - n..=t).map(|u| values[u]).collect();
    window.map(|w| w.iter().sum::<f64>() / n as f64)
}

fn sign_of(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Evaluate one rule over the whole panel.
pub fn eval_rule(rule: &TradingRule, panel: &PricePanel) -> SignalSeries {
    let n_days = panel.n_days();
    let mut out = SignalSeries::for_panel(rule.id.clone(), panel);
    for s in 0..panel.n_stocks() {
        let closes: Vec<Option<f64>> = (0..n_days).map(|t| panel.close(s, t)).collect();
        match rule.family {
            RuleFamily::Filter { x } => {
                let mut state = 0.0f64;
                let mut trough = f64::INFINITY;
                let mut peak = f64::NEG_INFINITY;
                for t in 0..n_days {
                    let Some(p) = closes[t] else { continue };
                    trough = trough.min(p);
                    peak = peak.max(p);
                    if state != 1.0 && p >= trough * (1.0 + x) {
                        state = 1.0;
                        peak = p;
                    } else if state != -1.0 && p <= peak * (1.0 - x) {
                        state = -1.0;
                        trough = p;
                    }
                    out.set(s, t, state);
                }
            }
            RuleFamily::MaCross { fast, slow } => {
                for t in 0..n_days {
                    if let (Some(f), Some(sl)) = (ma(&closes, t, fast), ma(&closes, t, slow)) {
                        out.set(s, t, sign_of(f - sl));
                    }
                }
            }
            RuleFamily::SupportResistance { n } => {
                for t in n..n_days {
                    let prior: Option<Vec<f64>> = (t - n..t).map(|u| closes[u]).collect();
                    let (Some(prior), Some(p)) = (prior, closes[t]) else { continue };
                    let hi = prior.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let lo = prior.iter().cloned().fold(f64::INFINITY, f64::min);
                    out.set(s, t, if p > hi { 1.0 } else if p < lo { -1.0 } else { 0.0 });
                }
            }
            RuleFamily::ChannelBreakout { n, c } => {
                for t in n..n_days {
                    let prior: Option<Vec<f64>> = (t - n..t).map(|u| closes[u]).collect();
                    let (Some(prior), Some(p)) = (prior, closes[t]) else { continue };
                    let hi = prior.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let lo = prior.iter().cloned().fold(f64::INFINITY, f64::min);
                    let is_channel = (hi - lo) / lo <= c;
                    let v = if is_channel && p > hi {
                        1.0
                    } else if is_channel && p < lo {
                        -1.0
                    } else {
                        0.0
                    };
                    out.set(s, t, v);
                }
            }
            RuleFamily::ObvMa { fast, slow } => {
                let mut obv = vec![None; n_days];
                let mut acc = 0.0;
                let mut prev_close: Option<f64> = None;
                for t in 0..n_days {
                    if let (Some(bar), Some(p)) = (panel.bar(s, t), closes[t]) {
                        if let Some(prev) = prev_close {
                            acc += sign_of(p - prev) * bar.volume;
                        }
                        obv[t] = Some(acc);
                        prev_close = Some(p);
                    }
                }
                for t in 0..n_days {
                    if let (Some(f), Some(sl)) = (ma(&obv, t, fast), ma(&obv, t, slow)) {
                        out.set(s, t, sign_of(f - sl));
                    }
                }
            }
        }
    }
    out
}
