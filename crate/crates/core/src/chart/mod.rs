//! Deterministic rasterization of OHLCV windows into chart images.
//!
//! Native images are 224 rows by `11 * D` columns, RGB in `[0, 1]`:
//! a 175-row price area on top, an 11-row gap, and a 38-row volume area.
//! Each day owns an 11-column slot: a 5-px opening tick on the left, the
//! 1-px high-low line in the middle column, a 5-px closing tick on the
//! right. Native images are bilinearly resized to the model input size.

mod norm;
mod png_io;
mod render;
mod resize;

pub use norm::{apply_norm, fit_norm, NormStats};
pub use png_io::{write_overlay_png, write_png};
pub use render::{render_native, render_window, NativeImage};
pub use resize::resize_bilinear;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const IMG_HEIGHT: usize = 224;
pub const IMG_SIDE: usize = 224;
pub const DAY_SLOT_WIDTH: usize = 11;
pub const PRICE_ROWS: usize = 175;
pub const GAP_ROWS: usize = 11;
pub const VOLUME_ROWS: usize = 38;
pub const CHANNELS: usize = 3;

pub const COLOR_WHITE: [f32; 3] = [1.0, 1.0, 1.0];
pub const COLOR_OHLC: [f32; 3] = [0.0, 0.0, 0.0];
pub const COLOR_MA: [f32; 3] = [0.0, 0.0, 1.0];
pub const COLOR_VOL_UP: [f32; 3] = [0.0, 0.8, 0.0];
pub const COLOR_VOL_DOWN: [f32; 3] = [0.9, 0.0, 0.0];

/// Which chart elements are drawn. OHLC bars are always present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Structure {
    /// OHLC bars + volume bars + moving-average line.
    OhlcVbMa,
    /// OHLC bars + volume bars.
    OhlcVb,
    /// OHLC bars + moving-average line.
    OhlcMa,
    /// OHLC bars only.
    Ohlc,
}

impl Structure {
    pub fn volume(self) -> bool {
        matches!(self, Structure::OhlcVbMa | Structure::OhlcVb)
    }

    pub fn moving_average(self) -> bool {
        matches!(self, Structure::OhlcVbMa | Structure::OhlcMa)
    }

    pub const ALL: [Structure; 4] =
        [Structure::OhlcVbMa, Structure::OhlcVb, Structure::OhlcMa, Structure::Ohlc];
}

impl std::fmt::Display for Structure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Structure::OhlcVbMa => "ohlc-vb-ma",
            Structure::OhlcVb => "ohlc-vb",
            Structure::OhlcMa => "ohlc-ma",
            Structure::Ohlc => "ohlc",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Structure {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ohlc-vb-ma" => Ok(Structure::OhlcVbMa),
            "ohlc-vb" => Ok(Structure::OhlcVb),
            "ohlc-ma" => Ok(Structure::OhlcMa),
            "ohlc" => Ok(Structure::Ohlc),
            other => Err(format!("unknown chart structure `{other}`")),
        }
    }
}

/// Rendering geometry for one window length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChartSpec {
    pub window_d: usize,
    pub structure: Structure,
}

impl ChartSpec {
    pub fn new(window_d: usize, structure: Structure) -> Self {
        assert!(window_d >= 1, "window must cover at least one day");
        Self { window_d, structure }
    }

    pub fn native_width(&self) -> usize {
        DAY_SLOT_WIDTH * self.window_d
    }
}

/// A 224 x 224 x 3 chart tensor plus provenance.
#[derive(Debug, Clone)]
pub struct ChartImage {
    pub tensor: Vec<f32>,
    pub stock: String,
    pub end_day: NaiveDate,
    pub spec: ChartSpec,
}

impl ChartImage {
    pub fn from_native(
        native: &NativeImage,
        stock: String,
        end_day: NaiveDate,
        spec: ChartSpec,
    ) -> Self {
        let tensor = resize_bilinear(
            &native.data,
            native.height,
            native.width,
            CHANNELS,
            IMG_SIDE,
            IMG_SIDE,
        );
        Self { tensor, stock, end_day, spec }
    }
}

#[derive(Debug, Error)]
pub enum ChartError {
    #[error("window has a missing bar at offset {0}")]
    Hole(usize),
    #[error("window length {got} does not match spec window {want}")]
    WindowLength { got: usize, want: usize },
    #[error("window extends before the calendar start")]
    ShortHistory,
    #[error("no training images")]
    EmptyTrainingSet,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("png: {0}")]
    Png(#[from] ::png::EncodingError),
}
