//! Technical trading signals: momentum/reversal definitions, the
//! alpha-expression language, cross-sectional aggregation with adaptive
//! LASSO, and the trading-rule universe.

pub mod alpha;
pub mod lasso;
pub mod rules;

mod aggregate;
mod technical;

pub use aggregate::{
    aggregate_signal, rank_normalize, rank_normalize_series, AggregateMethod, AggregateParams,
    CrossSectionFit,
};
pub use alpha::{default_alphas, eval_alpha, eval_alpha_grid, parse_alpha, AlphaExpr};
pub use lasso::{adaptive_lasso, adaptive_lasso_bic, ols, LassoError, LassoParams};
pub use rules::{eval_rule, rule_universe, RuleFamily, RuleGrid, TradingRule};
pub use technical::{mom, str_signal, trend_features, wstr, TREND_DEFAULT_LAGS};

use crate::market::PricePanel;
use std::io::Write;
use thiserror::Error;

/// A panel-aligned cross-sectional signal: one optional value per
/// (stock, day), with a fixed orientation (higher means more bullish).
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSeries {
    pub name: String,
    pub n_stocks: usize,
    pub n_days: usize,
    values: Vec<Option<f64>>,
    pub higher_is_bullish: bool,
}

impl SignalSeries {
    pub fn empty(name: impl Into<String>, n_stocks: usize, n_days: usize) -> Self {
        Self {
            name: name.into(),
            n_stocks,
            n_days,
            values: vec![None; n_stocks * n_days],
            higher_is_bullish: true,
        }
    }

    pub fn for_panel(name: impl Into<String>, panel: &PricePanel) -> Self {
        Self::empty(name, panel.n_stocks(), panel.n_days())
    }

    #[inline]
    pub fn get(&self, stock: usize, day: usize) -> Option<f64> {
        self.values[stock * self.n_days + day]
    }

    #[inline]
    pub fn set(&mut self, stock: usize, day: usize, value: f64) {
        assert!(value.is_finite(), "signal values must be finite");
        self.values[stock * self.n_days + day] = Some(value);
    }

    pub fn clear(&mut self, stock: usize, day: usize) {
        self.values[stock * self.n_days + day] = None;
    }

    /// All defined values on one day, as (stock, value) pairs in stock order.
    pub fn cross_section(&self, day: usize) -> Vec<(usize, f64)> {
        (0..self.n_stocks).filter_map(|s| self.get(s, day).map(|v| (s, v))).collect()
    }

    pub fn n_defined(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    /// `ticker,date,signal_name,value` rows for every defined cell.
    pub fn write_csv<W: Write>(&self, panel: &PricePanel, mut w: W) -> std::io::Result<()> {
        writeln!(w, "ticker,date,signal_name,value")?;
        for s in 0..self.n_stocks {
            for t in 0..self.n_days {
                if let Some(v) = self.get(s, t) {
                    writeln!(w, "{},{},{},{}", panel.stocks()[s], panel.calendar()[t], self.name, v)?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("alpha parse error at {position}: {message}")]
    Parse { position: usize, message: String },
    #[error("alpha type error at {path}: {message}")]
    Type { path: String, message: String },
    #[error("duplicate rule id {0}")]
    DuplicateRule(String),
    #[error("lasso: {0}")]
    Lasso(#[from] LassoError),
    #[error("cross-section too small: {got} stocks, need {need}")]
    TooFewStocks { got: usize, need: usize },
}
