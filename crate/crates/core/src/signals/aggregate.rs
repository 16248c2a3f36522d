//! Cross-sectional fit-smooth-predict aggregation: daily regressions of
//! forward returns on feature panels, trailing-mean coefficient smoothing,
//! and the composite signal they imply.

use super::lasso::{adaptive_lasso_bic, ols};
use super::{SignalError, SignalSeries};
use crate::market::PricePanel;

/// Cross-sectional rank transform into `(-1, 1)`: average ranks `r` in
/// `1..=N` map to `2 r / (N + 1) - 1`.
pub fn rank_normalize(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    values
        .iter()
        .map(|&v| {
            let below = values.iter().filter(|&&o| o < v).count() as f64;
            let equal = values.iter().filter(|&&o| o == v).count() as f64;
            let avg_rank = below + (equal + 1.0) / 2.0;
            2.0 * (avg_rank / (n + 1.0)) - 1.0
        })
        .collect()
}

/// Apply [`rank_normalize`] to every day's cross-section of a series.
pub fn rank_normalize_series(series: &SignalSeries) -> SignalSeries {
    let mut out = SignalSeries::empty(
        format!("rank({})", series.name),
        series.n_stocks,
        series.n_days,
    );
    out.higher_is_bullish = series.higher_is_bullish;
    for t in 0..series.n_days {
        let xs = series.cross_section(t);
        if xs.is_empty() {
            continue;
        }
        let normalized = rank_normalize(&xs.iter().map(|(_, v)| *v).collect::<Vec<_>>());
        for ((s, _), v) in xs.iter().zip(normalized) {
            out.set(*s, t, v);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggregateMethod {
    Ols,
    AdaptiveLasso,
}

#[derive(Debug, Clone)]
pub struct AggregateParams {
    pub method: AggregateMethod,
    /// Forward return horizon of the fitted response.
    pub horizon_r: usize,
    /// Trailing window (in fitted days) for coefficient smoothing.
    pub smoothing: usize,
    /// Days with fewer cross-sectional observations than this are skipped.
    pub min_stocks: usize,
}

impl AggregateParams {
    pub fn new(method: AggregateMethod, horizon_r: usize) -> Self {
        Self { method, horizon_r, smoothing: 252, min_stocks: 2 }
    }
}

/// One day's fitted coefficients.
#[derive(Debug, Clone)]
pub struct CrossSectionFit {
    pub day: usize,
    /// `[intercept, beta_1, ..., beta_k]`.
    pub coefficients: Vec<f64>,
    pub n_obs: usize,
    pub lambda: Option<f64>,
}

/// Daily cross-sectional regressions of `r[i, t+R]` on the feature panel,
/// coefficient smoothing by trailing mean, and the smoothed-coefficient
/// prediction as the emitted signal.
///
/// The signal at day `t` only uses fits from days `u <= t - R`, whose
/// response windows have closed by `t`; with `R = 1` this is the usual
/// one-day-lagged coefficient mean.
pub fn aggregate_signal(
    panel: &PricePanel,
    features: &[SignalSeries],
    name: &str,
    params: &AggregateParams,
) -> Result<(SignalSeries, Vec<CrossSectionFit>), SignalError> {
    assert!(!features.is_empty(), "need at least one feature");
    let k = features.len();
    let n_days = panel.n_days();
    let n_stocks = panel.n_stocks();
    for f in features {
        assert_eq!(f.n_stocks, n_stocks, "feature grid mismatch");
        assert_eq!(f.n_days, n_days, "feature grid mismatch");
    }
    let r = params.horizon_r;

    // rows with every feature and the forward return present
    let complete_rows = |t: usize, with_return: bool| -> Vec<(usize, Vec<f64>)> {
        (0..n_stocks)
            .filter_map(|s| {
                let feats: Option<Vec<f64>> = features.iter().map(|f| f.get(s, t)).collect();
                let feats = feats?;
                if with_return {
                    let c0 = panel.close(s, t)?;
                    let c1 = panel.close(s, t + r)?;
                    let ret = c1 / c0 - 1.0;
                    let mut row = feats;
                    row.push(ret);
                    Some((s, row))
                } else {
                    Some((s, feats))
                }
            })
            .collect()
    };

    let mut fits: Vec<CrossSectionFit> = Vec::new();
    for t in 0..n_days.saturating_sub(r) {
        let rows = complete_rows(t, true);
        if rows.len() < params.min_stocks.max(2) {
            continue;
        }
        let n = rows.len();
        let mut x = Vec::with_capacity(n * k);
        let mut y = Vec::with_capacity(n);
        for (_, row) in &rows {
            x.extend_from_slice(&row[..k]);
            y.push(row[k]);
        }
        let (coefficients, lambda) = match params.method {
            AggregateMethod::Ols => (ols(&x, &y, n, k)?, None),
            AggregateMethod::AdaptiveLasso => {
                let (c, l) = adaptive_lasso_bic(&x, &y, n, k, 1.0)?;
                (c, Some(l))
            }
        };
        fits.push(CrossSectionFit { day: t, coefficients, n_obs: n, lambda });
    }

    let mut signal = SignalSeries::empty(name, n_stocks, n_days);
    for t in 0..n_days {
        // usable fits: response realized by day t
        let usable: Vec<&CrossSectionFit> =
            fits.iter().filter(|f| f.day + r <= t).collect();
        if usable.is_empty() {
            continue;
        }
        let tail = &usable[usable.len().saturating_sub(params.smoothing)..];
        let mut smoothed = vec![0.0; k + 1];
        for fit in tail {
            for (acc, &c) in smoothed.iter_mut().zip(&fit.coefficients) {
                *acc += c;
            }
        }
        let inv = 1.0 / tail.len() as f64;
        for c in smoothed.iter_mut() {
            *c *= inv;
        }
        for (s, feats) in complete_rows(t, false) {
            let mut v = smoothed[0];
            for (j, f) in feats.iter().enumerate() {
                v += smoothed[j + 1] * f;
            }
            signal.set(s, t, v);
        }
    }
    Ok((signal, fits))
}
