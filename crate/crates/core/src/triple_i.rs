//! Triple-I (image-induced importance) weights: localization matrices
//! compressed column-wise, resized to the window length, normalized to sum
//! to one, then used to weighted-moving-average signal series (TWMA).
//! Includes the EWMA baseline and time-scale weight transfer.

use crate::io::{read_tensor, write_tensor, TensorHeader};
use crate::market::PricePanel;
use crate::nn::tensor::Scalar;
use crate::saliency::LocalizationMatrix;
use crate::signals::SignalSeries;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use thiserror::Error;

/// Sums below this trigger the uniform fallback in weight normalization.
pub const ZERO_MASS_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightSource {
    Direct,
    Transferred,
    Ewma,
    UniformFallback,
}

/// A nonnegative weight vector summing to one. `w[d-1]` weights day
/// `t - d + 1`, so index 0 is the most recent day.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleIWeights {
    pub w: Vec<f64>,
    pub source: WeightSource,
}

#[derive(Debug, Error)]
pub enum TripleIError {
    #[error("lambda must lie strictly inside (0, 1), got {0}")]
    LambdaRange(f64),
    #[error("blob: {0}")]
    Blob(#[from] crate::io::BlobError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("weight panel: {0}")]
    Panel(String),
}

impl TripleIWeights {
    pub fn uniform(d: usize) -> Self {
        Self { w: vec![1.0 / d as f64; d], source: WeightSource::UniformFallback }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    /// Mean of several weight vectors (e.g. across ensemble members); stays
    /// on the simplex.
    pub fn average(members: &[TripleIWeights]) -> TripleIWeights {
        assert!(!members.is_empty());
        let d = members[0].w.len();
        let mut w = vec![0.0; d];
        for m in members {
            assert_eq!(m.w.len(), d);
            for (acc, &v) in w.iter_mut().zip(&m.w) {
                *acc += v;
            }
        }
        let inv = 1.0 / members.len() as f64;
        for v in w.iter_mut() {
            *v *= inv;
        }
        TripleIWeights { w, source: members[0].source }
    }
}

/// 1-D linear resample of `src` to `len` points, endpoints mapped to
/// endpoints. A single-point target takes the mean of the source.
fn resample_linear(src: &[f64], len: usize) -> Vec<f64> {
    assert!(!src.is_empty() && len >= 1);
    if len == 1 {
        return vec![src.iter().sum::<f64>() / src.len() as f64];
    }
    if src.len() == 1 {
        return vec![src[0]; len];
    }
    let scale = (src.len() - 1) as f64 / (len - 1) as f64;
    (0..len)
        .map(|i| {
            let pos = i as f64 * scale;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(src.len() - 1);
            let frac = pos - lo as f64;
            src[lo] * (1.0 - frac) + src[hi] * frac
        })
        .collect()
}

/// The three-step weight construction: column means of the localization
/// matrix, linear resize to length `d`, then normalization to unit sum.
/// Columns run oldest-to-newest left-to-right (time is drawn left to
/// right), so the resized vector is reversed into most-recent-first order.
/// An all-zero matrix falls back to uniform weights.
pub fn compress_resize_normalize<T: Scalar>(
    matrix: &LocalizationMatrix<T>,
    d: usize,
) -> TripleIWeights {
    assert!(d >= 1);
    let mut col_means = vec![0.0f64; matrix.w];
    for row in 0..matrix.h {
        for col in 0..matrix.w {
            col_means[col] += matrix.data[row * matrix.w + col].as_f64();
        }
    }
    for v in col_means.iter_mut() {
        *v /= matrix.h as f64;
    }
    let resized = resample_linear(&col_means, d);
    let total: f64 = resized.iter().sum();
    if total < ZERO_MASS_GUARD {
        return TripleIWeights::uniform(d);
    }
    let w: Vec<f64> = resized.iter().rev().map(|v| v / total).collect();
    TripleIWeights { w, source: WeightSource::Direct }
}

/// Exponentially decayed weights `w_d ∝ lambda (1 - lambda)^(d-1)`.
pub fn ewma_weights(lambda: f64, d: usize) -> Result<TripleIWeights, TripleIError> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(TripleIError::LambdaRange(lambda));
    }
    let raw: Vec<f64> = (0..d).map(|i| lambda * (1.0 - lambda).powi(i as i32)).collect();
    let total: f64 = raw.iter().sum();
    Ok(TripleIWeights {
        w: raw.into_iter().map(|v| v / total).collect(),
        source: WeightSource::Ewma,
    })
}

/// Split each period weight evenly over its `period` days, preserving
/// temporal order; the total stays one.
pub fn transfer_weights(period_weights: &TripleIWeights, period: usize) -> TripleIWeights {
    assert!(period >= 1);
    let mut w = Vec::with_capacity(period_weights.w.len() * period);
    for &pw in &period_weights.w {
        for _ in 0..period {
            w.push(pw / period as f64);
        }
    }
    TripleIWeights { w, source: WeightSource::Transferred }
}

/// Per-(stock, day) weight pair plus the ensemble class prediction that
/// selects which vector TWMA uses.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightEntry {
    pub by_class: [TripleIWeights; 2],
    pub y_hat: u8,
}

/// Dense panel of weight entries aligned with a price panel's grid.
#[derive(Debug, Clone)]
pub struct WeightPanel {
    pub d: usize,
    pub n_stocks: usize,
    pub n_days: usize,
    entries: Vec<Option<WeightEntry>>,
}

impl WeightPanel {
    pub fn empty(d: usize, n_stocks: usize, n_days: usize) -> Self {
        Self { d, n_stocks, n_days, entries: vec![None; n_stocks * n_days] }
    }

    pub fn get(&self, stock: usize, day: usize) -> Option<&WeightEntry> {
        self.entries[stock * self.n_days + day].as_ref()
    }

    pub fn set(&mut self, stock: usize, day: usize, entry: WeightEntry) {
        assert_eq!(entry.by_class[0].len(), self.d);
        assert_eq!(entry.by_class[1].len(), self.d);
        self.entries[stock * self.n_days + day] = Some(entry);
    }

    pub fn n_entries(&self) -> usize {
        self.entries.iter().filter(|e| e.is_some()).count()
    }

    /// `ticker,date,class,d,omega` rows (plus the class prediction as class
    /// `yhat`, omega column repurposed for the 0/1 value).
    pub fn write_csv<W: Write>(&self, panel: &PricePanel, mut w: W) -> std::io::Result<()> {
        writeln!(w, "ticker,date,class,d,omega")?;
        for s in 0..self.n_stocks {
            for t in 0..self.n_days {
                if let Some(e) = self.get(s, t) {
                    let (ticker, date) = (&panel.stocks()[s], panel.calendar()[t]);
                    for class in 0..2 {
                        for (i, omega) in e.by_class[class].w.iter().enumerate() {
                            writeln!(w, "{ticker},{date},{class},{},{omega}", i + 1)?;
                        }
                    }
                    writeln!(w, "{ticker},{date},yhat,0,{}", e.y_hat)?;
                }
            }
        }
        Ok(())
    }

    /// Compact binary: one f32 tensor `[n_entries, 2, d]` with entry
    /// coordinates and predictions in the header metadata.
    pub fn write_blob<W: Write>(&self, w: W) -> Result<(), TripleIError> {
        let mut coords = Vec::new();
        let mut yhat = Vec::new();
        let mut data = Vec::new();
        for s in 0..self.n_stocks {
            for t in 0..self.n_days {
                if let Some(e) = self.get(s, t) {
                    coords.push(serde_json::json!([s, t]));
                    yhat.push(serde_json::json!(e.y_hat));
                    for class in 0..2 {
                        data.extend(e.by_class[class].w.iter().map(|&v| v as f32));
                    }
                }
            }
        }
        let n = coords.len();
        let header = TensorHeader::f32_row_major(vec![n, 2, self.d])
            .with_meta("kind", serde_json::json!("triple-i-weights"))
            .with_meta("n_stocks", serde_json::json!(self.n_stocks))
            .with_meta("n_days", serde_json::json!(self.n_days))
            .with_meta("coords", serde_json::Value::Array(coords))
            .with_meta("yhat", serde_json::Value::Array(yhat));
        write_tensor(w, &header, &data)?;
        Ok(())
    }

    pub fn read_blob<R: Read>(r: R) -> Result<Self, TripleIError> {
        let (header, data) = read_tensor(r)?;
        if header.shape.len() != 3 || header.shape[1] != 2 {
            return Err(TripleIError::Panel(format!(
                "expected shape [n, 2, d], got {:?}",
                header.shape
            )));
        }
        let (n, d) = (header.shape[0], header.shape[2]);
        let get_usize = |v: &serde_json::Value| v.as_u64().map(|x| x as usize);
        let n_stocks = header
            .meta
            .get("n_stocks")
            .and_then(get_usize)
            .ok_or_else(|| TripleIError::Panel("missing n_stocks".into()))?;
        let n_days = header
            .meta
            .get("n_days")
            .and_then(get_usize)
            .ok_or_else(|| TripleIError::Panel("missing n_days".into()))?;
        let coords = header
            .meta
            .get("coords")
            .and_then(|v| v.as_array())
            .ok_or_else(|| TripleIError::Panel("missing coords".into()))?;
        let yhat = header
            .meta
            .get("yhat")
            .and_then(|v| v.as_array())
            .ok_or_else(|| TripleIError::Panel("missing yhat".into()))?;
        if coords.len() != n || yhat.len() != n {
            return Err(TripleIError::Panel("coords/yhat length mismatch".into()));
        }
        let mut out = WeightPanel::empty(d, n_stocks, n_days);
        for (i, (coord, yh)) in coords.iter().zip(yhat).enumerate() {
            let pair = coord
                .as_array()
                .filter(|a| a.len() == 2)
                .ok_or_else(|| TripleIError::Panel("bad coord".into()))?;
            let (s, t) = (
                get_usize(&pair[0]).ok_or_else(|| TripleIError::Panel("bad coord".into()))?,
                get_usize(&pair[1]).ok_or_else(|| TripleIError::Panel("bad coord".into()))?,
            );
            if s >= n_stocks || t >= n_days {
                return Err(TripleIError::Panel(format!("coord ({s},{t}) out of grid")));
            }
            let mut by_class = Vec::new();
            for class in 0..2 {
                let base = (i * 2 + class) * d;
                by_class.push(TripleIWeights {
                    w: data[base..base + d].iter().map(|&v| v as f64).collect(),
                    source: WeightSource::Direct,
                });
            }
            let y = get_usize(yh).ok_or_else(|| TripleIError::Panel("bad yhat".into()))? as u8;
            let mut it = by_class.into_iter();
            out.set(s, t, WeightEntry {
                by_class: [it.next().unwrap(), it.next().unwrap()],
                y_hat: y,
            });
        }
        Ok(out)
    }
}

/// Triple-I weighted moving average of a signal: at each covered
/// (stock, day), the class predicted by the ensemble picks the weight
/// vector, and the signal's last `d` values are averaged under it.
/// Days with missing weights or incomplete signal history are omitted.
pub fn twma(signal: &SignalSeries, weights: &WeightPanel) -> SignalSeries {
    assert_eq!(signal.n_stocks, weights.n_stocks, "grid mismatch");
    assert_eq!(signal.n_days, weights.n_days, "grid mismatch");
    let d = weights.d;
    let mut out = SignalSeries::empty(
        format!("twma({})", signal.name),
        signal.n_stocks,
        signal.n_days,
    );
    out.higher_is_bullish = signal.higher_is_bullish;
    for s in 0..signal.n_stocks {
        for t in 0..signal.n_days {
            let Some(entry) = weights.get(s, t) else { continue };
            if t + 1 < d {
                continue;
            }
            let w = &entry.by_class[entry.y_hat as usize].w;
            let mut acc = 0.0;
            let mut complete = true;
            for (i, &omega) in w.iter().enumerate() {
                match signal.get(s, t - i) {
                    Some(x) => acc += omega * x,
                    None => {
                        complete = false;
                        break;
                    }
                }
            }
            if complete {
                out.set(s, t, acc);
            }
        }
    }
    out
}
