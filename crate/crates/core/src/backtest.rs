//! Equal-weight long-short decile portfolios, the three report metrics
//! (annualized excess return, annualized Sharpe ratio, monthly turnover),
//! per-decile tables, and paired rule-universe comparisons.

use crate::market::PricePanel;
use crate::signals::SignalSeries;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};
use std::io::Write;
use thiserror::Error;

pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;
pub const TRADING_DAYS_PER_MONTH: f64 = 21.0;

#[derive(Debug, Error)]
pub enum BacktestError {
    #[error("test window [{start}, {end}] is invalid for a {n_days}-day panel")]
    BadWindow { start: usize, end: usize, n_days: usize },
    #[error("no rebalance day had 10 or more valid stocks")]
    NoRebalances,
    #[error("need at least 10 valid stocks, got {0}")]
    TooFewStocks(usize),
    #[error("paired comparison needs matching ids")]
    NotPaired,
    #[error("paired comparison needs at least 2 rules, got {0}")]
    TooFewRules(usize),
    #[error("risk-free series has {got} days, panel has {want}")]
    RiskFreeLength { got: usize, want: usize },
}

/// Daily risk-free rate: one constant or one value per panel day.
#[derive(Debug, Clone)]
pub enum RiskFree {
    Constant(f64),
    Series(Vec<f64>),
}

impl RiskFree {
    /// Compounded rate over trading days `(from, to]`.
    fn period(&self, from: usize, to: usize) -> f64 {
        match self {
            RiskFree::Constant(c) => (1.0 + c).powi((to - from) as i32) - 1.0,
            RiskFree::Series(days) => {
                let mut acc = 1.0;
                for d in from + 1..=to {
                    acc *= 1.0 + days[d];
                }
                acc - 1.0
            }
        }
    }
}

/// One rebalance: long the top decile, short the bottom, equal weights
/// within each side.
#[derive(Debug, Clone)]
pub struct PortfolioSnapshot {
    pub day: usize,
    pub long: Vec<usize>,
    pub short: Vec<usize>,
    pub holding_r: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecileRow {
    pub decile: usize,
    pub annualized_return: f64,
    pub sharpe: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BacktestReport {
    pub strategy: String,
    /// Annualized mean excess period return.
    pub annualized_return: f64,
    /// Annualized Sharpe ratio; `None` when period volatility is zero.
    pub sharpe: Option<f64>,
    /// Mean drifted-weight replacement per rebalance scaled to a 21-day
    /// month; `None` with fewer than two rebalances.
    pub monthly_turnover: Option<f64>,
    pub n_rebalances: usize,
    pub skipped_days: usize,
    /// Excess long-short return per holding period, with rebalance days.
    pub period_returns: Vec<(usize, f64)>,
    /// Long-only decile rows (decile 1 = lowest signal) plus the
    /// long-short spread as decile 11.
    pub deciles: Vec<DecileRow>,
}

/// Rank-based decile assignment, ties broken by stock index; returns ten
/// groups ordered low to high, sizes differing by at most one.
pub fn form_deciles(cross_section: &[(usize, f64)]) -> Result<Vec<Vec<usize>>, BacktestError> {
    let n = cross_section.len();
    if n < 10 {
        return Err(BacktestError::TooFewStocks(n));
    }
    let mut ordered: Vec<(usize, f64)> = cross_section.to_vec();
    ordered.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    let mut out = Vec::with_capacity(10);
    for k in 0..10 {
        let lo = k * n / 10;
        let hi = (k + 1) * n / 10;
        out.push(ordered[lo..hi].iter().map(|(s, _)| *s).collect());
    }
    Ok(out)
}

fn annualize(period_excess: &[f64], holding_r: usize) -> (f64, Option<f64>) {
    let n = period_excess.len();
    let mean = period_excess.iter().sum::<f64>() / n as f64;
    let periods_per_year = TRADING_DAYS_PER_YEAR / holding_r as f64;
    let ret = mean * periods_per_year;
    if n < 2 {
        return (ret, None);
    }
    let var =
        period_excess.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    // a constant return series is zero-volatility even when rounding leaves
    // sub-ulp jitter in the deviations
    let degenerate = sd <= mean.abs() * 1e-12;
    let sharpe =
        if sd > 0.0 && !degenerate { Some(mean / sd * periods_per_year.sqrt()) } else { None };
    (ret, sharpe)
}

/// Run one long-short decile backtest over `[start, end]` (day indexes into
/// the panel calendar) with non-overlapping `holding_r`-day periods.
pub fn run_backtest(
    signal: &SignalSeries,
    panel: &PricePanel,
    holding_r: usize,
    risk_free: &RiskFree,
    window: (usize, usize),
) -> Result<BacktestReport, BacktestError> {
    assert!(holding_r >= 1);
    let (start, end) = window;
    if start > end || end >= panel.n_days() {
        return Err(BacktestError::BadWindow { start, end, n_days: panel.n_days() });
    }
    if let RiskFree::Series(days) = risk_free {
        if days.len() != panel.n_days() {
            return Err(BacktestError::RiskFreeLength {
                got: days.len(),
                want: panel.n_days(),
            });
        }
    }

    let ret_of = |s: usize, t0: usize, t1: usize| -> Option<f64> {
        Some(panel.close(s, t1)? / panel.close(s, t0)? - 1.0)
    };

    let mut period_returns = Vec::new();
    let mut decile_period_returns: Vec<Vec<f64>> = vec![Vec::new(); 10];
    let mut snapshots: Vec<PortfolioSnapshot> = Vec::new();
    let mut skipped = 0usize;

    let mut t = start;
    while t + holding_r <= end {
        let candidates: Vec<(usize, f64)> = signal
            .cross_section(t)
            .into_iter()
            .filter(|(s, _)| {
                panel.close(*s, t).is_some() && panel.close(*s, t + holding_r).is_some()
            })
            .collect();
        match form_deciles(&candidates) {
            Ok(deciles) => {
                let rf = risk_free.period(t, t + holding_r);
                let side_return = |members: &[usize]| -> f64 {
                    let total: f64 =
                        members.iter().map(|&s| ret_of(s, t, t + holding_r).unwrap()).sum();
                    total / members.len() as f64
                };
                for (k, members) in deciles.iter().enumerate() {
                    decile_period_returns[k].push(side_return(members) - rf);
                }
                let long = deciles[9].clone();
                let short = deciles[0].clone();
                let spread = side_return(&long) - side_return(&short) - rf;
                period_returns.push((t, spread));
                snapshots.push(PortfolioSnapshot { day: t, long, short, holding_r });
            }
            Err(BacktestError::TooFewStocks(_)) => skipped += 1,
            Err(e) => return Err(e),
        }
        t += holding_r;
    }

    if period_returns.is_empty() {
        return Err(BacktestError::NoRebalances);
    }

    let excess: Vec<f64> = period_returns.iter().map(|(_, r)| *r).collect();
    let (annualized_return, sharpe) = annualize(&excess, holding_r);

    let monthly_turnover = turnover(&snapshots, panel).map(|per_rebalance| {
        per_rebalance * TRADING_DAYS_PER_MONTH / holding_r as f64
    });

    let mut deciles = Vec::with_capacity(11);
    for (k, rets) in decile_period_returns.iter().enumerate() {
        let (r, s) = annualize(rets, holding_r);
        deciles.push(DecileRow { decile: k + 1, annualized_return: r, sharpe: s });
    }
    deciles.push(DecileRow {
        decile: 11, // long-short spread row
        annualized_return,
        sharpe,
    });

    Ok(BacktestReport {
        strategy: signal.name.clone(),
        annualized_return,
        sharpe,
        monthly_turnover,
        n_rebalances: period_returns.len(),
        skipped_days: skipped,
        period_returns,
        deciles,
    })
}

/// Mean over rebalance transitions of `sum_i |w_new - w_drift|`, where the
/// previous weights drift with realized returns and are renormalized per
/// side. `None` with fewer than two snapshots.
fn turnover(snapshots: &[PortfolioSnapshot], panel: &PricePanel) -> Option<f64> {
    if snapshots.len() < 2 {
        return None;
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for pair in snapshots.windows(2) {
        let (prev, next) = (&pair[0], &pair[1]);
        let grown = |s: usize| -> f64 {
            match (panel.close(s, prev.day), panel.close(s, next.day)) {
                (Some(c0), Some(c1)) => c1 / c0,
                _ => 1.0,
            }
        };
        let drift_side = |members: &[usize]| -> Vec<(usize, f64)> {
            let raw: Vec<(usize, f64)> =
                members.iter().map(|&s| (s, grown(s) / members.len() as f64)).collect();
            let total: f64 = raw.iter().map(|(_, w)| w).sum();
            raw.into_iter().map(|(s, w)| (s, w / total)).collect()
        };
        let mut w_drift: std::collections::BTreeMap<usize, f64> = std::collections::BTreeMap::new();
        for (s, w) in drift_side(&prev.long) {
            *w_drift.entry(s).or_insert(0.0) += w;
        }
        for (s, w) in drift_side(&prev.short) {
            *w_drift.entry(s).or_insert(0.0) -= w;
        }
        let mut w_new: std::collections::BTreeMap<usize, f64> = std::collections::BTreeMap::new();
        for &s in &next.long {
            *w_new.entry(s).or_insert(0.0) += 1.0 / next.long.len() as f64;
        }
        for &s in &next.short {
            *w_new.entry(s).or_insert(0.0) -= 1.0 / next.short.len() as f64;
        }
        let stocks: std::collections::BTreeSet<usize> =
            w_drift.keys().chain(w_new.keys()).cloned().collect();
        let tv: f64 = stocks
            .into_iter()
            .map(|s| {
                (w_new.get(&s).copied().unwrap_or(0.0) - w_drift.get(&s).copied().unwrap_or(0.0))
                    .abs()
            })
            .sum();
        total += tv;
        count += 1;
    }
    Some(total / count as f64)
}

/// Outcome of a one-sided paired t-test that strategy A's Sharpe ratios
/// exceed strategy B's, rule by rule.
#[derive(Debug, Clone, Serialize)]
pub struct DistributionComparison {
    pub n: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub mean_diff: f64,
    pub t_stat: Option<f64>,
    /// One-sided p-value for `mean(A - B) > 0`.
    pub p_value: Option<f64>,
    pub verdict: ComparisonVerdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ComparisonVerdict {
    /// Ordinary t statistic and p-value.
    Tested,
    /// All differences are zero: no difference, t undefined.
    NoDifference,
    /// All differences equal and nonzero: certainty flag, p pinned to 0/1.
    DegenerateCertainty,
}

/// Paired comparison of per-rule Sharpe ratios. `a` and `b` must be aligned
/// rule-by-rule (same ids in the same order).
pub fn compare_universes(
    a: &[(String, f64)],
    b: &[(String, f64)],
) -> Result<DistributionComparison, BacktestError> {
    if a.len() != b.len() {
        return Err(BacktestError::NotPaired);
    }
    if a.len() < 2 {
        return Err(BacktestError::TooFewRules(a.len()));
    }
    for ((ida, _), (idb, _)) in a.iter().zip(b) {
        if ida != idb {
            return Err(BacktestError::NotPaired);
        }
    }
    let n = a.len();
    let diffs: Vec<f64> = a.iter().zip(b).map(|((_, x), (_, y))| x - y).collect();
    let mean_a = a.iter().map(|(_, v)| v).sum::<f64>() / n as f64;
    let mean_b = b.iter().map(|(_, v)| v).sum::<f64>() / n as f64;
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();

    if sd <= mean.abs() * 1e-12 {
        let verdict = if mean == 0.0 {
            ComparisonVerdict::NoDifference
        } else {
            ComparisonVerdict::DegenerateCertainty
        };
        let p = match verdict {
            ComparisonVerdict::NoDifference => None,
            _ => Some(if mean > 0.0 { 0.0 } else { 1.0 }),
        };
        return Ok(DistributionComparison {
            n,
            mean_a,
            mean_b,
            mean_diff: mean,
            t_stat: None,
            p_value: p,
            verdict,
        });
    }

    let t = mean / (sd / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("valid dof");
    let p = 1.0 - dist.cdf(t);
    Ok(DistributionComparison {
        n,
        mean_a,
        mean_b,
        mean_diff: mean,
        t_stat: Some(t),
        p_value: Some(p),
        verdict: ComparisonVerdict::Tested,
    })
}

/// Fixed-width histogram bins for Sharpe-ratio distributions.
pub fn histogram(values: &[f64], n_bins: usize) -> Vec<(f64, f64, usize)> {
    assert!(n_bins >= 1);
    if values.is_empty() {
        return Vec::new();
    }
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / n_bins as f64 } else { 1.0 };
    let mut bins: Vec<(f64, f64, usize)> = (0..n_bins)
        .map(|i| (lo + i as f64 * width, lo + (i + 1) as f64 * width, 0))
        .collect();
    for &v in values {
        let mut idx = ((v - lo) / width) as usize;
        if idx >= n_bins {
            idx = n_bins - 1;
        }
        bins[idx].2 += 1;
    }
    bins
}

pub fn write_histogram_csv<W: Write>(
    bins: &[(f64, f64, usize)],
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "bin_lo,bin_hi,count")?;
    for (lo, hi, n) in bins {
        writeln!(w, "{lo},{hi},{n}")?;
    }
    Ok(())
}

/// A minimal static SVG bar chart of a histogram.
pub fn write_histogram_svg<W: Write>(
    bins: &[(f64, f64, usize)],
    title: &str,
    mut w: W,
) -> std::io::Result<()> {
    let (width, height, margin) = (640.0f64, 360.0f64, 40.0f64);
    let max_count = bins.iter().map(|b| b.2).max().unwrap_or(1).max(1) as f64;
    writeln!(
        w,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">"
    )?;
    writeln!(w, "<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{title}</text>", width / 2.0)?;
    let plot_w = width - 2.0 * margin;
    let plot_h = height - 2.0 * margin;
    let bar_w = plot_w / bins.len().max(1) as f64;
    for (i, (_, _, count)) in bins.iter().enumerate() {
        let h = *count as f64 / max_count * plot_h;
        let x = margin + i as f64 * bar_w;
        let y = height - margin - h;
        writeln!(
            w,
            "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{h:.2}\" fill=\"#4477aa\"/>",
            bar_w * 0.92
        )?;
    }
    if let (Some(first), Some(last)) = (bins.first(), bins.last()) {
        writeln!(
            w,
            "<text x=\"{margin}\" y=\"{}\" font-size=\"11\">{:.2}</text>",
            height - margin / 2.0,
            first.0
        )?;
        writeln!(
            w,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-size=\"11\">{:.2}</text>",
            width - margin,
            height - margin / 2.0,
            last.1
        )?;
    }
    writeln!(w, "</svg>")?;
    Ok(())
}

/// `strategy,ret,sr,to` rows; undefined metrics print as `NA`.
pub fn write_report_csv<W: Write>(reports: &[BacktestReport], mut w: W) -> std::io::Result<()> {
    writeln!(w, "strategy,annualized_return,sharpe,monthly_turnover,n_rebalances")?;
    for r in reports {
        let sr = r.sharpe.map(|v| v.to_string()).unwrap_or_else(|| "NA".into());
        let to = r.monthly_turnover.map(|v| v.to_string()).unwrap_or_else(|| "NA".into());
        writeln!(w, "{},{},{},{},{}", r.strategy, r.annualized_return, sr, to, r.n_rebalances)?;
    }
    Ok(())
}

/// Per-decile table rows (`strategy,decile,ret,sr`), decile 11 being the
/// long-short spread.
pub fn write_decile_csv<W: Write>(reports: &[BacktestReport], mut w: W) -> std::io::Result<()> {
    writeln!(w, "strategy,decile,annualized_return,sharpe")?;
    for r in reports {
        for row in &r.deciles {
            let sr = row.sharpe.map(|v| v.to_string()).unwrap_or_else(|| "NA".into());
            writeln!(w, "{},{},{},{}", r.strategy, row.decile, row.annualized_return, sr)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{load_panel_reader, synth_panel, Regime};

    #[test]
    fn deciles_of_ten_distinct_signals() {
        let xs: Vec<(usize, f64)> = (0..10).map(|s| (s, (s + 1) as f64)).collect();
        let deciles = form_deciles(&xs).unwrap();
        for (k, group) in deciles.iter().enumerate() {
            assert_eq!(group, &vec![k]);
        }
    }

    #[test]
    fn tied_signals_fill_in_stock_order() {
        let xs: Vec<(usize, f64)> = (0..20).map(|s| (s, 1.0)).collect();
        let deciles = form_deciles(&xs).unwrap();
        let flat: Vec<usize> = deciles.into_iter().flatten().collect();
        assert_eq!(flat, (0..20).collect::<Vec<_>>());
    }

    #[test]
    fn decile_boundaries_match_sort_oracle() {
        let mut rng = crate::util::stream_rng(7, 0);
        use rand::Rng;
        let xs: Vec<(usize, f64)> = (0..1000).map(|s| (s, rng.gen::<f64>())).collect();
        let deciles = form_deciles(&xs).unwrap();
        let mut sorted = xs.clone();
        sorted.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let mut offset = 0;
        for (k, group) in deciles.iter().enumerate() {
            assert_eq!(group.len(), 100);
            let want: Vec<usize> = sorted[offset..offset + 100].iter().map(|x| x.0).collect();
            assert_eq!(group, &want, "decile {}", k + 1);
            offset += 100;
        }
    }

    #[test]
    fn decile_sizes_differ_by_at_most_one() {
        for n in [10usize, 11, 19, 23, 97, 1000] {
            let xs: Vec<(usize, f64)> = (0..n).map(|s| (s, (s * 7 % 13) as f64)).collect();
            let deciles = form_deciles(&xs).unwrap();
            let sizes: Vec<usize> = deciles.iter().map(|d| d.len()).collect();
            let lo = *sizes.iter().min().unwrap();
            let hi = *sizes.iter().max().unwrap();
            assert!(hi - lo <= 1, "n = {n}: sizes {sizes:?}");
            assert_eq!(sizes.iter().sum::<usize>(), n);
        }
    }

    #[test]
    fn decile_assignment_is_rank_invariant() {
        let mut rng = crate::util::stream_rng(8, 1);
        use rand::Rng;
        let xs: Vec<(usize, f64)> = (0..57).map(|s| (s, rng.gen::<f64>() * 4.0 - 2.0)).collect();
        let base = form_deciles(&xs).unwrap();
        let affine: Vec<(usize, f64)> = xs.iter().map(|(s, v)| (*s, 2.0 * v + 3.0)).collect();
        let cubed: Vec<(usize, f64)> = xs.iter().map(|(s, v)| (*s, v.powi(3))).collect();
        assert_eq!(base, form_deciles(&affine).unwrap());
        assert_eq!(base, form_deciles(&cubed).unwrap());
    }

    #[test]
    fn negating_signal_swaps_legs() {
        let mut rng = crate::util::stream_rng(9, 2);
        use rand::Rng;
        let xs: Vec<(usize, f64)> = (0..40).map(|s| (s, rng.gen::<f64>())).collect();
        let neg: Vec<(usize, f64)> = xs.iter().map(|(s, v)| (*s, -v)).collect();
        let a = form_deciles(&xs).unwrap();
        let b = form_deciles(&neg).unwrap();
        let mut top: Vec<usize> = a[9].clone();
        let mut bottom_of_neg: Vec<usize> = b[0].clone();
        top.sort();
        bottom_of_neg.sort();
        assert_eq!(top, bottom_of_neg);
    }

    /// Two stocks is below the 10-stock minimum, so build the constant-spread
    /// fixture with 10 stocks: 5 winners at +1% per day, 5 losers at -1%.
    #[test]
    fn constant_spread_has_undefined_sharpe() {
        let mut csv = String::from("date,ticker,open,high,low,close,volume\n");
        let calendar = synth_panel(1, 6, 0, &Regime::Flat);
        for t in 0..6 {
            for s in 0..10 {
                // exactly representable growth factors give exactly constant
                // period returns
                let growth: f64 = if s < 5 { 0.5 } else { 1.5 };
                let c = 100.0 * growth.powi(t as i32);
                csv.push_str(&format!(
                    "{},S{s:02},{c},{c},{c},{c},10\n",
                    calendar.calendar()[t]
                ));
            }
        }
        let panel = load_panel_reader(csv.as_bytes()).unwrap();
        let mut signal = SignalSeries::for_panel("spread", &panel);
        for s in 0..10 {
            for t in 0..6 {
                signal.set(s, t, if s < 5 { -1.0 - s as f64 } else { 1.0 + s as f64 });
            }
        }
        let report =
            run_backtest(&signal, &panel, 1, &RiskFree::Constant(0.0), (0, 5)).unwrap();
        // every period: long +50%, short -50% -> spread 100%
        for (_, r) in &report.period_returns {
            assert_eq!(*r, 1.0);
        }
        assert!(report.sharpe.is_none(), "zero volatility flags Sharpe undefined");
        assert!((report.annualized_return - 252.0).abs() < 1e-9);
        // identical portfolios with equal drift across members: turnover 0
        let to = report.monthly_turnover.unwrap();
        assert!(to.abs() < 1e-12, "turnover {to}");
    }

    #[test]
    fn turnover_is_bounded_by_full_replacement() {
        let panel = synth_panel(30, 80, 21, &Regime::RandomWalk { daily_vol: 0.03 });
        let mut rng = crate::util::stream_rng(10, 3);
        use rand::Rng;
        let mut signal = SignalSeries::for_panel("noise", &panel);
        for s in 0..30 {
            for t in 0..80 {
                signal.set(s, t, rng.gen::<f64>());
            }
        }
        for r in [1usize, 5] {
            let report =
                run_backtest(&signal, &panel, r, &RiskFree::Constant(0.0), (0, 79)).unwrap();
            let to = report.monthly_turnover.unwrap();
            assert!(to <= 21.0 / r as f64 * 4.0 + 1e-9, "R {r}: {to}");
            assert!(to >= 0.0);
        }
    }

    #[test]
    fn windows_and_degenerate_inputs_error() {
        let panel = synth_panel(12, 30, 2, &Regime::RandomWalk { daily_vol: 0.02 });
        let signal = SignalSeries::for_panel("empty", &panel);
        assert!(matches!(
            run_backtest(&signal, &panel, 1, &RiskFree::Constant(0.0), (5, 40)),
            Err(BacktestError::BadWindow { .. })
        ));
        // a signal with no values never forms a portfolio
        assert!(matches!(
            run_backtest(&signal, &panel, 1, &RiskFree::Constant(0.0), (0, 29)),
            Err(BacktestError::NoRebalances)
        ));
    }

    #[test]
    fn doubling_returns_doubles_portfolio_series() {
        // linearity of equal-weight accounting, checked through the
        // brute-force identity: spread = mean(long rets) - mean(short rets)
        let panel = synth_panel(20, 40, 31, &Regime::RandomWalk { daily_vol: 0.02 });
        let mut signal = SignalSeries::for_panel("s", &panel);
        let mut rng = crate::util::stream_rng(11, 4);
        use rand::Rng;
        for s in 0..20 {
            for t in 0..40 {
                signal.set(s, t, rng.gen::<f64>());
            }
        }
        let report =
            run_backtest(&signal, &panel, 1, &RiskFree::Constant(0.0), (0, 39)).unwrap();
        for (t, spread) in &report.period_returns {
            let candidates: Vec<(usize, f64)> = signal.cross_section(*t);
            let deciles = form_deciles(&candidates).unwrap();
            let mean_ret = |members: &[usize]| -> f64 {
                members
                    .iter()
                    .map(|&s| {
                        panel.close(s, t + 1).unwrap() / panel.close(s, *t).unwrap() - 1.0
                    })
                    .sum::<f64>()
                    / members.len() as f64
            };
            let want = mean_ret(&deciles[9]) - mean_ret(&deciles[0]);
            assert!((spread - want).abs() < 1e-12);
            // doubling every stock return doubles the spread
            let want2 = deciles[9]
                .iter()
                .map(|&s| 2.0 * (panel.close(s, t + 1).unwrap() / panel.close(s, *t).unwrap() - 1.0))
                .sum::<f64>()
                / deciles[9].len() as f64
                - deciles[0]
                    .iter()
                    .map(|&s| {
                        2.0 * (panel.close(s, t + 1).unwrap() / panel.close(s, *t).unwrap() - 1.0)
                    })
                    .sum::<f64>()
                    / deciles[0].len() as f64;
            assert!((want2 - 2.0 * want).abs() < 1e-12);
        }
    }

    #[test]
    fn paired_t_test_cases() {
        let a: Vec<(String, f64)> = (0..50).map(|i| (format!("r{i}"), i as f64)).collect();
        let same = compare_universes(&a, &a).unwrap();
        assert_eq!(same.verdict, ComparisonVerdict::NoDifference);
        assert!(same.t_stat.is_none());

        let b: Vec<(String, f64)> = a.iter().map(|(id, v)| (id.clone(), v - 0.25)).collect();
        let sure = compare_universes(&a, &b).unwrap();
        assert_eq!(sure.verdict, ComparisonVerdict::DegenerateCertainty);
        assert_eq!(sure.p_value, Some(0.0));

        assert!(matches!(
            compare_universes(&a[..1], &b[..1]),
            Err(BacktestError::TooFewRules(1))
        ));
        let misaligned: Vec<(String, f64)> =
            (0..50).map(|i| (format!("x{i}"), 0.1)).collect();
        assert!(matches!(compare_universes(&a, &misaligned), Err(BacktestError::NotPaired)));
    }

    #[test]
    fn t_test_matches_textbook_formula() {
        let mut rng = crate::util::stream_rng(13, 5);
        use rand::Rng;
        let a: Vec<(String, f64)> =
            (0..50).map(|i| (format!("r{i}"), rng.gen::<f64>() - 0.3)).collect();
        let b: Vec<(String, f64)> =
            a.iter().map(|(id, v)| (id.clone(), v - 0.2 + 0.4 * rng.gen::<f64>())).collect();
        let cmp = compare_universes(&a, &b).unwrap();
        let diffs: Vec<f64> = a.iter().zip(&b).map(|((_, x), (_, y))| x - y).collect();
        let n = diffs.len() as f64;
        let mean = diffs.iter().sum::<f64>() / n;
        let sd =
            (diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0)).sqrt();
        let t = mean / (sd / n.sqrt());
        assert!((cmp.t_stat.unwrap() - t).abs() < 1e-12);
        assert!(cmp.p_value.unwrap() > 0.0 && cmp.p_value.unwrap() < 1.0);
    }

    #[test]
    fn histogram_covers_all_values() {
        let values = vec![-1.0, -0.5, 0.0, 0.5, 1.0, 1.0, 1.0];
        let bins = histogram(&values, 4);
        assert_eq!(bins.iter().map(|b| b.2).sum::<usize>(), values.len());
        let mut csv = Vec::new();
        write_histogram_csv(&bins, &mut csv).unwrap();
        assert!(String::from_utf8(csv).unwrap().starts_with("bin_lo,bin_hi,count"));
        let mut svg = Vec::new();
        write_histogram_svg(&bins, "SRs", &mut svg).unwrap();
        let svg = String::from_utf8(svg).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }
}
