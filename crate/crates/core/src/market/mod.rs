//! Daily OHLCV panels: ingest, validation, synthesis, labels, down-sampling.

mod csv_io;
mod synth;
mod transform;

pub use csv_io::{load_panel, load_panel_lenient, load_panel_reader, save_panel, LoadSummary};
pub use synth::{synth_panel, Regime};
pub use transform::{apply_size_filter, collapse_bars, compute_labels, LabelSummary};

use chrono::NaiveDate;
use thiserror::Error;

/// One trading day of open/high/low/close prices and volume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OhlcvBar {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

impl OhlcvBar {
    /// Check bar invariants: positive prices, `low <= min(open, close)`,
    /// `high >= max(open, close)`, nonnegative volume.
    pub fn validate(&self) -> Result<(), String> {
        if !(self.open > 0.0 && self.high > 0.0 && self.low > 0.0 && self.close > 0.0) {
            return Err("prices must be positive".into());
        }
        if !self.open.is_finite()
            || !self.high.is_finite()
            || !self.low.is_finite()
            || !self.close.is_finite()
            || !self.volume.is_finite()
        {
            return Err("non-finite field".into());
        }
        if self.low > self.open.min(self.close) {
            return Err("low above min(open, close)".into());
        }
        if self.high < self.open.max(self.close) {
            return Err("high below max(open, close)".into());
        }
        if self.volume < 0.0 {
            return Err("negative volume".into());
        }
        Ok(())
    }
}

/// Binary forward-return label for one (stock, day).
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnLabel {
    pub stock: usize,
    pub day: usize,
    pub horizon_r: usize,
    /// Simple return close[t + R] / close[t] - 1.
    pub ret: f64,
    /// 1 iff `ret > 0` (strict).
    pub y: u8,
}

/// A rectangular (stock x trading day) grid of optional bars.
///
/// Stocks and calendar are ordered; a missing `(stock, day)` cell is a hole.
/// Panels are immutable after construction and safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    stocks: Vec<String>,
    calendar: Vec<NaiveDate>,
    bars: Vec<Option<OhlcvBar>>,
    mktcap: Vec<Option<f64>>,
}

#[derive(Debug, Error)]
pub enum PanelError {
    #[error("empty input: no data rows")]
    EmptyInput,
    #[error("{} rejected row(s): {}", .0.len(), format_bad_rows(.0))]
    BadRows(Vec<(u64, String)>),
    #[error("calendar not strictly increasing at index {0}")]
    CalendarOrder(usize),
    #[error("size filter requested but no mktcap column present")]
    MissingMktcap,
    #[error("duplicate bar for {stock} on {date}")]
    DuplicateBar { stock: String, date: NaiveDate },
    #[error("csv: {0}")]
    Csv(#[from] ::csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

fn format_bad_rows(rows: &[(u64, String)]) -> String {
    let shown: Vec<String> = rows
        .iter()
        .take(8)
        .map(|(line, why)| format!("line {line}: {why}"))
        .collect();
    let mut s = shown.join("; ");
    if rows.len() > 8 {
        s.push_str(&format!("; ... and {} more", rows.len() - 8));
    }
    s
}

impl PricePanel {
    /// Build a panel from parts. Calendar must be strictly increasing and
    /// every present bar must satisfy the bar invariants.
    pub fn new(
        stocks: Vec<String>,
        calendar: Vec<NaiveDate>,
        bars: Vec<Option<OhlcvBar>>,
        mktcap: Vec<Option<f64>>,
    ) -> Result<Self, PanelError> {
        assert_eq!(bars.len(), stocks.len() * calendar.len(), "bar grid shape");
        assert_eq!(mktcap.len(), bars.len(), "mktcap grid shape");
        for i in 1..calendar.len() {
            if calendar[i] <= calendar[i - 1] {
                return Err(PanelError::CalendarOrder(i));
            }
        }
        let mut bad = Vec::new();
        for (idx, bar) in bars.iter().enumerate() {
            if let Some(b) = bar {
                if let Err(why) = b.validate() {
                    bad.push((idx as u64, why));
                }
            }
        }
        if !bad.is_empty() {
            return Err(PanelError::BadRows(bad));
        }
        Ok(Self { stocks, calendar, bars, mktcap })
    }

    pub fn n_stocks(&self) -> usize {
        self.stocks.len()
    }

    pub fn n_days(&self) -> usize {
        self.calendar.len()
    }

    pub fn stocks(&self) -> &[String] {
        &self.stocks
    }

    pub fn calendar(&self) -> &[NaiveDate] {
        &self.calendar
    }

    pub fn stock_index(&self, ticker: &str) -> Option<usize> {
        self.stocks.iter().position(|s| s == ticker)
    }

    #[inline]
    pub fn bar(&self, stock: usize, day: usize) -> Option<&OhlcvBar> {
        self.bars[stock * self.calendar.len() + day].as_ref()
    }

    pub fn mktcap(&self, stock: usize, day: usize) -> Option<f64> {
        self.mktcap[stock * self.calendar.len() + day]
    }

    pub fn has_mktcap(&self) -> bool {
        self.mktcap.iter().any(|m| m.is_some())
    }

    pub fn close(&self, stock: usize, day: usize) -> Option<f64> {
        self.bar(stock, day).map(|b| b.close)
    }

    /// The `d`-day window of bars ending at `end_day` (inclusive), or `None`
    /// if the window extends past the calendar start or contains a hole.
    pub fn window(&self, stock: usize, end_day: usize, d: usize) -> Option<Vec<OhlcvBar>> {
        if d == 0 || end_day + 1 < d {
            return None;
        }
        let start = end_day + 1 - d;
        let mut out = Vec::with_capacity(d);
        for t in start..=end_day {
            out.push(*self.bar(stock, t)?);
        }
        Some(out)
    }

    pub fn n_bars(&self) -> usize {
        self.bars.iter().filter(|b| b.is_some()).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bar(date: &str, o: f64, h: f64, l: f64, c: f64, v: f64) -> OhlcvBar {
        OhlcvBar {
            date: date.parse().unwrap(),
            open: o,
            high: h,
            low: l,
            close: c,
            volume: v,
        }
    }

    #[test]
    fn bar_invariants() {
        assert!(bar("2023-01-03", 10.0, 11.0, 9.0, 10.5, 100.0).validate().is_ok());
        assert!(bar("2023-01-03", 10.0, 9.5, 9.0, 10.5, 100.0).validate().is_err()); // high < close
        assert!(bar("2023-01-03", 10.0, 11.0, 10.2, 10.5, 100.0).validate().is_err()); // low > open
        assert!(bar("2023-01-03", -1.0, 11.0, 9.0, 10.5, 100.0).validate().is_err());
        assert!(bar("2023-01-03", 10.0, 11.0, 9.0, 10.5, -5.0).validate().is_err());
    }

    #[test]
    fn calendar_must_increase() {
        let days: Vec<NaiveDate> =
            vec!["2023-01-03".parse().unwrap(), "2023-01-03".parse().unwrap()];
        let err = PricePanel::new(vec!["A".into()], days, vec![None, None], vec![None, None]);
        assert!(matches!(err, Err(PanelError::CalendarOrder(1))));
    }

    #[test]
    fn window_rejects_holes() {
        let days: Vec<NaiveDate> = vec![
            "2023-01-03".parse().unwrap(),
            "2023-01-04".parse().unwrap(),
            "2023-01-05".parse().unwrap(),
        ];
        let b = bar("2023-01-03", 10.0, 11.0, 9.0, 10.5, 100.0);
        let panel = PricePanel::new(
            vec!["A".into()],
            days,
            vec![Some(b), None, Some(b)],
            vec![None, None, None],
        )
        .unwrap();
        assert!(panel.window(0, 2, 3).is_none());
        assert!(panel.window(0, 2, 1).is_some());
        assert!(panel.window(0, 0, 1).is_some());
        assert!(panel.window(0, 0, 2).is_none()); // past calendar start
    }
}
