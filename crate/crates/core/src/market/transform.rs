//! Labels, bar down-sampling, and the capitalization size filter.

use super::{OhlcvBar, PanelError, PricePanel, ReturnLabel};

#[derive(Debug, Clone, Default)]
pub struct LabelSummary {
    pub emitted: usize,
    pub skipped_missing_future: usize,
}

/// Forward R-day labels: `ret = close[t+R]/close[t] - 1`, `y = 1` iff
/// strictly positive. Pairs whose day `t+R` is missing are skipped and
/// counted.
pub fn compute_labels(
    panel: &PricePanel,
    horizon_r: usize,
) -> (Vec<ReturnLabel>, LabelSummary) {
    assert!(horizon_r >= 1, "horizon must be at least one day");
    let mut labels = Vec::new();
    let mut summary = LabelSummary::default();
    for s in 0..panel.n_stocks() {
        for t in 0..panel.n_days() {
            let Some(c0) = panel.close(s, t) else { continue };
            let future = t + horizon_r;
            if future >= panel.n_days() {
                summary.skipped_missing_future += 1;
                continue;
            }
            let Some(c1) = panel.close(s, future) else {
                summary.skipped_missing_future += 1;
                continue;
            };
            let ret = c1 / c0 - 1.0;
            labels.push(ReturnLabel {
                stock: s,
                day: t,
                horizon_r,
                ret,
                y: u8::from(ret > 0.0),
            });
            summary.emitted += 1;
        }
    }
    (labels, summary)
}

/// Collapse each consecutive block of `period` days into one bar:
/// open of the first day, max high, min low, close of the last day, summed
/// volume. Partial trailing blocks are dropped. A block containing a hole
/// collapses to a hole. The collapsed bar carries the block's last date.
pub fn collapse_bars(panel: &PricePanel, period: usize) -> PricePanel {
    assert!(period >= 2, "period must be at least 2");
    let n_blocks = panel.n_days() / period;
    let calendar: Vec<_> =
        (0..n_blocks).map(|b| panel.calendar()[b * period + period - 1]).collect();
    let mut bars = Vec::with_capacity(panel.n_stocks() * n_blocks);
    let mut caps = Vec::with_capacity(panel.n_stocks() * n_blocks);
    for s in 0..panel.n_stocks() {
        for b in 0..n_blocks {
            let days = b * period..(b + 1) * period;
            let block: Option<Vec<&OhlcvBar>> =
                days.clone().map(|t| panel.bar(s, t)).collect();
            match block {
                Some(block) => {
                    bars.push(Some(OhlcvBar {
                        date: block[period - 1].date,
                        open: block[0].open,
                        high: block.iter().map(|x| x.high).fold(f64::MIN, f64::max),
                        low: block.iter().map(|x| x.low).fold(f64::MAX, f64::min),
                        close: block[period - 1].close,
                        volume: block.iter().map(|x| x.volume).sum(),
                    }));
                    caps.push(panel.mktcap(s, b * period + period - 1));
                }
                None => {
                    bars.push(None);
                    caps.push(None);
                }
            }
        }
    }
    PricePanel::new(panel.stocks().to_vec(), calendar, bars, caps)
        .expect("aggregation preserves bar invariants")
}

/// Keep the top-`k` stocks by market capitalization, re-ranked every 126
/// trading days; bars of unselected stocks become holes within each span.
/// Ranking uses the capitalization on the first day of the span (the last
/// earlier observation if missing there).
pub fn apply_size_filter(panel: &PricePanel, k: usize) -> Result<PricePanel, PanelError> {
    if !panel.has_mktcap() {
        return Err(PanelError::MissingMktcap);
    }
    let n_days = panel.n_days();
    let n_stocks = panel.n_stocks();
    let mut bars = vec![None; n_stocks * n_days];
    let mut caps = vec![None; n_stocks * n_days];
    let mut span_start = 0;
    while span_start < n_days {
        let span_end = (span_start + 126).min(n_days);
        let mut ranked: Vec<(usize, f64)> = (0..n_stocks)
            .filter_map(|s| {
                (0..=span_start)
                    .rev()
                    .find_map(|t| panel.mktcap(s, t))
                    .map(|c| (s, c))
            })
            .collect();
        // descending by cap, stock index breaks ties for determinism
        ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        for &(s, _) in ranked.iter().take(k) {
            for t in span_start..span_end {
                bars[s * n_days + t] = panel.bar(s, t).copied();
                caps[s * n_days + t] = panel.mktcap(s, t);
            }
        }
        span_start = span_end;
    }
    PricePanel::new(panel.stocks().to_vec(), panel.calendar().to_vec(), bars, caps)
}
