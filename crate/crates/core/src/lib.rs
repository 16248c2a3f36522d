//! Chart-image driven enhancement of technical trading signals.
//!
//! The pipeline: daily OHLCV panels are rasterized into price-chart images,
//! a small residual network is trained from scratch to classify the sign of
//! forward returns, smooth Grad-CAM localization maps are extracted from the
//! trained network, and the maps are compressed into per-day importance
//! weights (triple-I weights) that re-weight existing technical signals
//! (TWMA). Enhanced and original signals are compared with a long-short
//! decile backtester.
//!
//! Modules mirror the pipeline stages:
//!
//! * [`market`] — OHLCV panels: CSV ingest, synthesis, labels, down-sampling
//! * [`chart`] — deterministic chart rasterizer, bilinear resize, normalization
//! * [`nn`] — dense tensor ops, ResNet forward/backward, Adam, training
//! * [`saliency`] — Grad-CAM++ / smooth Grad-CAM localization maps
//! * [`triple_i`] — localization → weight vectors, TWMA, EWMA, time-scale transfer
//! * [`signals`] — MOM/STR/WSTR/TREND/ALPHA, alpha-expression DSL, adaptive LASSO, trading rules
//! * [`backtest`] — decile portfolios, Ret/SR/turnover, rule-universe comparisons

pub mod backtest;
pub mod chart;
pub mod io;
pub mod market;
pub mod nn;
pub mod pipeline;
pub mod saliency;
pub mod signals;
pub mod triple_i;
mod util;
