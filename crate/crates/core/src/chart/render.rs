//! The native rasterizer: pure, integer-exact pixel placement.

use super::{
    ChartError, ChartSpec, CHANNELS, COLOR_MA, COLOR_OHLC, COLOR_VOL_DOWN, COLOR_VOL_UP,
    COLOR_WHITE, DAY_SLOT_WIDTH, IMG_HEIGHT, PRICE_ROWS, VOLUME_ROWS,
};
use crate::market::{OhlcvBar, PricePanel};

/// An RGB image at native chart resolution (224 x 11D), row-major HWC.
#[derive(Debug, Clone, PartialEq)]
pub struct NativeImage {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl NativeImage {
    fn blank(height: usize, width: usize) -> Self {
        let mut data = Vec::with_capacity(height * width * CHANNELS);
        for _ in 0..height * width {
            data.extend_from_slice(&COLOR_WHITE);
        }
        Self { height, width, data }
    }

    #[inline]
    fn put(&mut self, row: usize, col: usize, color: [f32; 3]) {
        let at = (row * self.width + col) * CHANNELS;
        self.data[at..at + CHANNELS].copy_from_slice(&color);
    }

    pub fn pixel(&self, row: usize, col: usize) -> [f32; 3] {
        let at = (row * self.width + col) * CHANNELS;
        [self.data[at], self.data[at + 1], self.data[at + 2]]
    }
}

/// Continuous price-to-row map over the 175-row price area. Strictly
/// decreasing in price (rows grow downward); a zero price range pins
/// everything to the middle row.
pub fn price_to_row(price: f64, pmin: f64, pmax: f64) -> f64 {
    if pmax > pmin {
        (pmax - price) / (pmax - pmin) * (PRICE_ROWS - 1) as f64
    } else {
        ((PRICE_ROWS - 1) / 2) as f64
    }
}

/// Rescale so the first close is 1, exactly as the model sees prices.
fn rescaled(window: &[OhlcvBar]) -> Vec<[f64; 4]> {
    let anchor = window[0].close;
    window
        .iter()
        .map(|b| [b.open / anchor, b.high / anchor, b.low / anchor, b.close / anchor])
        .collect()
}

/// Expanding-prefix moving average of rescaled closes: day d averages the
/// closes of days 0..=d within the window.
fn prefix_ma(prices: &[[f64; 4]]) -> Vec<f64> {
    let mut out = Vec::with_capacity(prices.len());
    let mut acc = 0.0;
    for (d, p) in prices.iter().enumerate() {
        acc += p[3];
        out.push(acc / (d + 1) as f64);
    }
    out
}

/// Rasterize a complete D-day window into a 224 x 11D x 3 image.
pub fn render_native(window: &[OhlcvBar], spec: &ChartSpec) -> Result<NativeImage, ChartError> {
    if window.len() != spec.window_d {
        return Err(ChartError::WindowLength { got: window.len(), want: spec.window_d });
    }
    let d = spec.window_d;
    let prices = rescaled(window);
    let ma = prefix_ma(&prices);

    let mut pmin = f64::INFINITY;
    let mut pmax = f64::NEG_INFINITY;
    for p in &prices {
        pmin = pmin.min(p[2]);
        pmax = pmax.max(p[1]);
    }
    for &m in &ma {
        pmin = pmin.min(m);
        pmax = pmax.max(m);
    }

    let mut img = NativeImage::blank(IMG_HEIGHT, spec.native_width());
    let row_of = |p: f64| price_to_row(p, pmin, pmax).round() as usize;

    if spec.structure.volume() {
        let vmax = window.iter().map(|b| b.volume).fold(0.0, f64::max);
        if vmax > 0.0 {
            for (day, bar) in window.iter().enumerate() {
                let h = (bar.volume / vmax * VOLUME_ROWS as f64).round() as usize;
                let color = if bar.close >= bar.open { COLOR_VOL_UP } else { COLOR_VOL_DOWN };
                let col0 = day * DAY_SLOT_WIDTH;
                for row in IMG_HEIGHT - h..IMG_HEIGHT {
                    for col in col0..col0 + DAY_SLOT_WIDTH {
                        img.put(row, col, color);
                    }
                }
            }
        }
    }

    for (day, p) in prices.iter().enumerate() {
        let col0 = day * DAY_SLOT_WIDTH;
        let open_row = row_of(p[0]);
        let close_row = row_of(p[3]);
        let top = row_of(p[1]);
        let bottom = row_of(p[2]);
        for col in col0..col0 + 5 {
            img.put(open_row, col, COLOR_OHLC);
        }
        for row in top..=bottom {
            img.put(row, col0 + 5, COLOR_OHLC);
        }
        for col in col0 + 6..col0 + DAY_SLOT_WIDTH {
            img.put(close_row, col, COLOR_OHLC);
        }
    }

    if spec.structure.moving_average() {
        let dots: Vec<(i64, i64)> = ma
            .iter()
            .enumerate()
            .map(|(day, &m)| ((day * DAY_SLOT_WIDTH + 5) as i64, row_of(m) as i64))
            .collect();
        for pair in dots.windows(2) {
            draw_segment(&mut img, pair[0], pair[1]);
        }
        if d == 1 {
            let (c, r) = dots[0];
            img.put(r as usize, c as usize, COLOR_MA);
        }
    }

    Ok(img)
}

/// Bresenham line segment, both endpoints inclusive.
fn draw_segment(img: &mut NativeImage, from: (i64, i64), to: (i64, i64)) {
    let (mut x, mut y) = from;
    let (x1, y1) = to;
    let dx = (x1 - x).abs();
    let dy = -(y1 - y).abs();
    let sx = if x < x1 { 1 } else { -1 };
    let sy = if y < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        img.put(y as usize, x as usize, COLOR_MA);
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// Render the window of `spec.window_d` days ending at `end_day`; missing
/// bars or insufficient history are render-skip errors.
pub fn render_window(
    panel: &PricePanel,
    stock: usize,
    end_day: usize,
    spec: &ChartSpec,
) -> Result<NativeImage, ChartError> {
    let d = spec.window_d;
    if end_day + 1 < d {
        return Err(ChartError::ShortHistory);
    }
    let start = end_day + 1 - d;
    let mut window = Vec::with_capacity(d);
    for (off, t) in (start..=end_day).enumerate() {
        match panel.bar(stock, t) {
            Some(b) => window.push(*b),
            None => return Err(ChartError::Hole(off)),
        }
    }
    render_native(&window, spec)
}
