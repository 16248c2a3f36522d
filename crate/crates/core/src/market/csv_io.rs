//! CSV ingest/export for price panels.
//!
//! Schema: `date,ticker,open,high,low,close,volume[,mktcap]`, dates ISO-8601.
//! Lines starting with `#` are treated as comments.

use super::{OhlcvBar, PanelError, PricePanel};
use chrono::NaiveDate;
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

/// Counts of rows dropped by a lenient load, reportable as JSON on stderr.
#[derive(Debug, Clone, Default, Serialize)]
pub struct LoadSummary {
    pub rows_read: usize,
    pub rows_rejected: usize,
    pub rejected_lines: Vec<u64>,
}

impl LoadSummary {
    /// Emit the summary as one JSON line on standard error.
    pub fn emit_stderr(&self) {
        if self.rows_rejected > 0 {
            eprintln!("{}", serde_json::to_string(self).unwrap());
        }
    }
}

struct RawRow {
    date: NaiveDate,
    ticker: String,
    bar: OhlcvBar,
    mktcap: Option<f64>,
}

fn parse_row(line: u64, rec: &csv::StringRecord) -> Result<RawRow, (u64, String)> {
    let fail = |why: String| (line, why);
    if rec.len() < 7 {
        return Err(fail(format!("expected >= 7 fields, got {}", rec.len())));
    }
    let date = NaiveDate::parse_from_str(rec[0].trim(), "%Y-%m-%d")
        .map_err(|e| fail(format!("bad date `{}`: {e}", &rec[0])))?;
    let ticker = rec[1].trim().to_string();
    if ticker.is_empty() {
        return Err(fail("empty ticker".into()));
    }
    let num = |i: usize, name: &str| -> Result<f64, (u64, String)> {
        rec[i]
            .trim()
            .parse::<f64>()
            .map_err(|e| fail(format!("bad {name} `{}`: {e}", &rec[i])))
    };
    let bar = OhlcvBar {
        date,
        open: num(2, "open")?,
        high: num(3, "high")?,
        low: num(4, "low")?,
        close: num(5, "close")?,
        volume: num(6, "volume")?,
    };
    bar.validate().map_err(|why| fail(why))?;
    let mktcap = if rec.len() > 7 && !rec[7].trim().is_empty() {
        Some(num(7, "mktcap")?)
    } else {
        None
    };
    Ok(RawRow { date, ticker, bar, mktcap })
}

fn assemble(rows: Vec<RawRow>) -> Result<PricePanel, PanelError> {
    if rows.is_empty() {
        return Err(PanelError::EmptyInput);
    }
    let mut tickers: Vec<String> = rows.iter().map(|r| r.ticker.clone()).collect();
    tickers.sort();
    tickers.dedup();
    let mut dates: Vec<NaiveDate> = rows.iter().map(|r| r.date).collect();
    dates.sort();
    dates.dedup();
    let stock_idx: BTreeMap<&str, usize> =
        tickers.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let date_idx: BTreeMap<NaiveDate, usize> =
        dates.iter().enumerate().map(|(i, d)| (*d, i)).collect();

    let n_days = dates.len();
    let mut bars = vec![None; tickers.len() * n_days];
    let mut mktcap = vec![None; tickers.len() * n_days];
    for row in rows {
        let s = stock_idx[row.ticker.as_str()];
        let t = date_idx[&row.date];
        let cell = &mut bars[s * n_days + t];
        if cell.is_some() {
            return Err(PanelError::DuplicateBar { stock: row.ticker, date: row.date });
        }
        *cell = Some(row.bar);
        mktcap[s * n_days + t] = row.mktcap;
    }
    PricePanel::new(tickers, dates, bars, mktcap)
}

fn read_rows<R: Read>(
    reader: R,
) -> Result<(Vec<RawRow>, Vec<(u64, String)>, usize), PanelError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut good = Vec::new();
    let mut bad = Vec::new();
    let mut total = 0usize;
    for rec in rdr.records() {
        let rec = rec?;
        total += 1;
        // +1 for the header row; csv positions are zero-based byte records.
        let line = rec.position().map(|p| p.line()).unwrap_or(total as u64 + 1);
        match parse_row(line, &rec) {
            Ok(row) => good.push(row),
            Err(e) => bad.push(e),
        }
    }
    Ok((good, bad, total))
}

/// Strict load: any malformed or invariant-violating row fails the whole
/// load, with offending line numbers in the error. An optional `size_filter`
/// keeps only the top-K stocks by market capitalization (re-ranked every 126
/// trading days); it requires the `mktcap` column.
pub fn load_panel(path: &Path, size_filter: Option<usize>) -> Result<PricePanel, PanelError> {
    let file = std::fs::File::open(path)?;
    let (good, bad, _) = read_rows(file)?;
    if !bad.is_empty() {
        return Err(PanelError::BadRows(bad));
    }
    let panel = assemble(good)?;
    match size_filter {
        Some(k) => super::apply_size_filter(&panel, k),
        None => Ok(panel),
    }
}

/// Load from any reader (strict). Used by in-memory callers and fuzzing.
pub fn load_panel_reader<R: Read>(reader: R) -> Result<PricePanel, PanelError> {
    let (good, bad, _) = read_rows(reader)?;
    if !bad.is_empty() {
        return Err(PanelError::BadRows(bad));
    }
    assemble(good)
}

/// Lenient load: bad rows are skipped and counted instead of failing.
pub fn load_panel_lenient(path: &Path) -> Result<(PricePanel, LoadSummary), PanelError> {
    let file = std::fs::File::open(path)?;
    let (good, bad, total) = read_rows(file)?;
    let summary = LoadSummary {
        rows_read: total,
        rows_rejected: bad.len(),
        rejected_lines: bad.iter().map(|(l, _)| *l).collect(),
    };
    let panel = assemble(good)?;
    Ok((panel, summary))
}

/// Export in the input schema, one row per present bar, date-major then
/// stock order. `load_panel` of the output reproduces the panel bit-exactly.
pub fn save_panel<W: Write>(panel: &PricePanel, mut w: W) -> Result<(), PanelError> {
    let with_cap = panel.has_mktcap();
    if with_cap {
        writeln!(w, "date,ticker,open,high,low,close,volume,mktcap")?;
    } else {
        writeln!(w, "date,ticker,open,high,low,close,volume")?;
    }
    for t in 0..panel.n_days() {
        for s in 0..panel.n_stocks() {
            if let Some(bar) = panel.bar(s, t) {
                write!(
                    w,
                    "{},{},{},{},{},{},{}",
                    panel.calendar()[t],
                    panel.stocks()[s],
                    bar.open,
                    bar.high,
                    bar.low,
                    bar.close,
                    bar.volume
                )?;
                if with_cap {
                    match panel.mktcap(s, t) {
                        Some(c) => writeln!(w, ",{c}")?,
                        None => writeln!(w, ",")?,
                    }
                } else {
                    writeln!(w)?;
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_row_identity() {
        let csv = "date,ticker,open,high,low,close,volume\n2023-01-03,AAA,10,11,9,10.5,100\n";
        let panel = load_panel_reader(csv.as_bytes()).unwrap();
        assert_eq!(panel.n_stocks(), 1);
        assert_eq!(panel.n_days(), 1);
        let bar = panel.bar(0, 0).unwrap();
        assert_eq!(bar.open, 10.0);
        assert_eq!(bar.close, 10.5);
        assert_eq!(bar.volume, 100.0);
    }

    #[test]
    fn invariant_violation_lists_line() {
        let csv = "date,ticker,open,high,low,close,volume\n2023-01-03,AAA,10,9,11,10.5,100\n";
        match load_panel_reader(csv.as_bytes()) {
            Err(PanelError::BadRows(rows)) => {
                assert_eq!(rows.len(), 1);
                assert_eq!(rows[0].0, 2);
            }
            other => panic!("expected BadRows, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_error() {
        let csv = "date,ticker,open,high,low,close,volume\n";
        assert!(matches!(load_panel_reader(csv.as_bytes()), Err(PanelError::EmptyInput)));
    }

    #[test]
    fn malformed_row_reports_line() {
        let csv = "date,ticker,open,high,low,close,volume\n2023-01-03,AAA,10,11,9,10.5,100\nnot-a-date,AAA,1,1,1,1,1\n";
        match load_panel_reader(csv.as_bytes()) {
            Err(PanelError::BadRows(rows)) => assert_eq!(rows[0].0, 3),
            other => panic!("expected BadRows, got {other:?}"),
        }
    }

    /// Three stocks, ten days, against a hand-built in-memory oracle.
    #[test]
    fn fixture_matches_hand_built_panel() {
        let mut csv = String::from("date,ticker,open,high,low,close,volume\n");
        let tickers = ["AAA", "BBB", "CCC"];
        let mut expect_bars = Vec::new();
        for day in 0..10u32 {
            let date = NaiveDate::from_ymd_opt(2023, 2, 1 + day).unwrap();
            for (si, t) in tickers.iter().enumerate() {
                let base = 10.0 + si as f64 + day as f64 * 0.1;
                let bar = OhlcvBar {
                    date,
                    open: base,
                    high: base + 0.5,
                    low: base - 0.5,
                    close: base + 0.25,
                    volume: 100.0 + day as f64,
                };
                expect_bars.push((t.to_string(), date, bar));
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    date, t, bar.open, bar.high, bar.low, bar.close, bar.volume
                ));
            }
        }
        let panel = load_panel_reader(csv.as_bytes()).unwrap();
        assert_eq!(panel.n_bars(), 30);
        for (ticker, date, bar) in expect_bars {
            let s = panel.stock_index(&ticker).unwrap();
            let t = panel.calendar().iter().position(|d| *d == date).unwrap();
            assert_eq!(panel.bar(s, t), Some(&bar));
        }
    }

    #[test]
    fn save_load_round_trip_is_bit_exact() {
        let csv = "date,ticker,open,high,low,close,volume,mktcap\n\
                   2023-01-03,AAA,10.125,11.5,9.25,10.0625,100.5,1234.5\n\
                   2023-01-03,BBB,3.3,4.4,2.2,3.7,50,\n\
                   2023-01-04,AAA,10.0625,12,10,11.875,1,2\n";
        let panel = load_panel_reader(csv.as_bytes()).unwrap();
        let mut out = Vec::new();
        save_panel(&panel, &mut out).unwrap();
        let reloaded = load_panel_reader(out.as_slice()).unwrap();
        assert_eq!(panel, reloaded);
    }
}
