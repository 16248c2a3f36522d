//! Shared test oracles: an independent per-pixel reference rasterizer and
//! finite-difference gradient utilities. Everything here recomputes results
//! from definitions, not through the library's code paths.

#![allow(dead_code)]

pub mod nn_checks;

use triplei_core::chart::{
    ChartSpec, NativeImage, COLOR_MA, COLOR_OHLC, COLOR_VOL_DOWN, COLOR_VOL_UP, COLOR_WHITE,
    IMG_HEIGHT, PRICE_ROWS, VOLUME_ROWS,
};
use triplei_core::market::OhlcvBar;

/// Reference rasterizer: decides every pixel's color by predicate instead
/// of painting. Bit-exact agreement with the production renderer is the
/// acceptance bar.
pub fn reference_render(window: &[OhlcvBar], spec: &ChartSpec) -> NativeImage {
    let d = window.len();
    assert_eq!(d, spec.window_d);
    let anchor = window[0].close;
    let o: Vec<f64> = window.iter().map(|b| b.open / anchor).collect();
    let h: Vec<f64> = window.iter().map(|b| b.high / anchor).collect();
    let l: Vec<f64> = window.iter().map(|b| b.low / anchor).collect();
    let c: Vec<f64> = window.iter().map(|b| b.close / anchor).collect();
    let mut ma = Vec::with_capacity(d);
    let mut acc = 0.0;
    for (i, &ci) in c.iter().enumerate() {
        acc += ci;
        ma.push(acc / (i + 1) as f64);
    }

    let mut pmin = f64::INFINITY;
    let mut pmax = f64::NEG_INFINITY;
    for day in 0..d {
        for v in [o[day], h[day], l[day], c[day], ma[day]] {
            pmin = pmin.min(v);
            pmax = pmax.max(v);
        }
    }
    let row = |p: f64| -> usize {
        if pmax > pmin {
            ((pmax - p) / (pmax - pmin) * (PRICE_ROWS - 1) as f64).round() as usize
        } else {
            (PRICE_ROWS - 1) / 2
        }
    };

    // MA polyline pixel set via a midpoint-rounding line between dots
    let mut ma_pixels = std::collections::BTreeSet::new();
    if spec.structure.moving_average() {
        let dots: Vec<(i64, i64)> =
            (0..d).map(|day| ((day * 11 + 5) as i64, row(ma[day]) as i64)).collect();
        if d == 1 {
            ma_pixels.insert(dots[0]);
        }
        for pair in dots.windows(2) {
            for px in line_pixels(pair[0], pair[1]) {
                ma_pixels.insert(px);
            }
        }
    }

    let vmax = window.iter().map(|b| b.volume).fold(0.0f64, f64::max);
    let vol_height: Vec<usize> = window
        .iter()
        .map(|b| {
            if vmax > 0.0 {
                (b.volume / vmax * VOLUME_ROWS as f64).round() as usize
            } else {
                0
            }
        })
        .collect();

    let width = 11 * d;
    let mut data = Vec::with_capacity(IMG_HEIGHT * width * 3);
    for y in 0..IMG_HEIGHT {
        for x in 0..width {
            let day = x / 11;
            let cin = x % 11;
            let color = if y < PRICE_ROWS {
                if ma_pixels.contains(&(x as i64, y as i64)) {
                    COLOR_MA
                } else if cin < 5 && y == row(o[day]) {
                    COLOR_OHLC
                } else if cin == 5 && y >= row(h[day]) && y <= row(l[day]) {
                    COLOR_OHLC
                } else if cin > 5 && y == row(c[day]) {
                    COLOR_OHLC
                } else {
                    COLOR_WHITE
                }
            } else if spec.structure.volume()
                && y >= IMG_HEIGHT - vol_height[day]
            {
                if window[day].close >= window[day].open {
                    COLOR_VOL_UP
                } else {
                    COLOR_VOL_DOWN
                }
            } else {
                COLOR_WHITE
            };
            data.extend_from_slice(&color);
        }
    }
    NativeImage { height: IMG_HEIGHT, width, data }
}

/// Integer line rasterization in the dominant-axis formulation (one pixel
/// per step along the longer axis, decision variable stepping the other).
pub fn line_pixels(a: (i64, i64), b: (i64, i64)) -> Vec<(i64, i64)> {
    let adx = (b.0 - a.0).abs();
    let ady = (b.1 - a.1).abs();
    let sx = if a.0 < b.0 { 1 } else { -1 };
    let sy = if a.1 < b.1 { 1 } else { -1 };
    let mut out = Vec::new();
    if adx >= ady {
        let mut d = 2 * ady - adx;
        let mut y = a.1;
        for k in 0..=adx {
            out.push((a.0 + k * sx, y));
            if d >= 0 {
                y += sy;
                d -= 2 * adx;
            }
            d += 2 * ady;
        }
    } else {
        let mut d = 2 * adx - ady;
        let mut x = a.0;
        for k in 0..=ady {
            out.push((x, a.1 + k * sy));
            if d >= 0 {
                x += sx;
                d -= 2 * ady;
            }
            d += 2 * adx;
        }
    }
    out
}

/// Guarded relative error for finite-difference comparisons. The floor
/// turns the criterion absolute (at 1e-9) for near-zero derivatives, where
/// the quotient would otherwise amplify finite-difference roundoff.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
}

/// Central finite difference of a scalar function at x along coordinate i.
pub fn central_diff(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], i: usize, h: f64) -> f64 {
    let mut xp = x.to_vec();
    xp[i] += h;
    let fp = f(&xp);
    xp[i] = x[i] - h;
    let fm = f(&xp);
    (fp - fm) / (2.0 * h)
}

/// Second central difference.
pub fn central_diff2(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], i: usize, h: f64) -> f64 {
    let f0 = f(x);
    let mut xp = x.to_vec();
    xp[i] += h;
    let fp = f(&xp);
    xp[i] = x[i] - h;
    let fm = f(&xp);
    (fp - 2.0 * f0 + fm) / (h * h)
}

/// Third derivative via the five-point antisymmetric stencil.
pub fn central_diff3(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], i: usize, h: f64) -> f64 {
    let mut xt = x.to_vec();
    let mut at = |v: f64| {
        xt[i] = x[i] + v;
        f(&xt)
    };
    (at(2.0 * h) - 2.0 * at(h) + 2.0 * at(-h) - at(-2.0 * h)) / (2.0 * h * h * h)
}

// --------------------------------------------------- backtest accounting

pub struct OracleReport {
    pub ret: f64,
    pub sharpe: Option<f64>,
    pub turnover: Option<f64>,
}

/// Brute-force long-short accounting, written from the definitions: sorted
/// decile formation with stock-id tie-breaks, non-overlapping holding
/// periods, compounded constant risk-free, drifted-weight turnover scaled
/// to a 21-day month.
pub fn oracle_backtest(
    signal: &triplei_core::signals::SignalSeries,
    panel: &triplei_core::market::PricePanel,
    holding: usize,
    rf_daily: f64,
    window: (usize, usize),
) -> OracleReport {
    let close = |s: usize, t: usize| panel.close(s, t).unwrap();
    let mut period_excess: Vec<f64> = Vec::new();
    let mut legs: Vec<(usize, Vec<usize>, Vec<usize>)> = Vec::new();
    let mut t = window.0;
    while t + holding <= window.1 {
        let mut xs: Vec<(usize, f64)> = (0..signal.n_stocks)
            .filter_map(|s| {
                let v = signal.get(s, t)?;
                panel.close(s, t)?;
                panel.close(s, t + holding)?;
                Some((s, v))
            })
            .collect();
        if xs.len() >= 10 {
            xs.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
            let n = xs.len();
            let bottom: Vec<usize> = xs[..n / 10].iter().map(|(s, _)| *s).collect();
            let top: Vec<usize> = xs[9 * n / 10..].iter().map(|(s, _)| *s).collect();
            let mean_ret = |members: &[usize]| -> f64 {
                members
                    .iter()
                    .map(|&s| close(s, t + holding) / close(s, t) - 1.0)
                    .sum::<f64>()
                    / members.len() as f64
            };
            let rf_period = (1.0 + rf_daily).powi(holding as i32) - 1.0;
            period_excess.push(mean_ret(&top) - mean_ret(&bottom) - rf_period);
            legs.push((t, top, bottom));
        }
        t += holding;
    }
    let n = period_excess.len() as f64;
    let mean = period_excess.iter().sum::<f64>() / n;
    let periods_per_year = 252.0 / holding as f64;
    let ret = mean * periods_per_year;
    let sharpe = if period_excess.len() < 2 {
        None
    } else {
        let var = period_excess.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>()
            / (n - 1.0);
        let sd = var.sqrt();
        if sd > 0.0 && sd > mean.abs() * 1e-12 {
            Some(mean / sd * periods_per_year.sqrt())
        } else {
            None
        }
    };
    let turnover = if legs.len() < 2 {
        None
    } else {
        let mut total = 0.0;
        for pair in legs.windows(2) {
            let (t0, prev_long, prev_short) = (&pair[0].0, &pair[0].1, &pair[0].2);
            let (t1, next_long, next_short) = (&pair[1].0, &pair[1].1, &pair[1].2);
            let mut drift: std::collections::BTreeMap<usize, f64> = Default::default();
            for (members, sign) in [(prev_long, 1.0), (prev_short, -1.0)] {
                let grown: Vec<f64> =
                    members.iter().map(|&s| close(s, *t1) / close(s, *t0)).collect();
                let raw_total: f64 = grown.iter().sum::<f64>() / members.len() as f64;
                for (&s, g) in members.iter().zip(&grown) {
                    *drift.entry(s).or_insert(0.0) +=
                        sign * (g / members.len() as f64) / raw_total;
                }
            }
            let mut fresh: std::collections::BTreeMap<usize, f64> = Default::default();
            for &s in next_long {
                *fresh.entry(s).or_insert(0.0) += 1.0 / next_long.len() as f64;
            }
            for &s in next_short {
                *fresh.entry(s).or_insert(0.0) -= 1.0 / next_short.len() as f64;
            }
            let all: std::collections::BTreeSet<usize> =
                drift.keys().chain(fresh.keys()).cloned().collect();
            total += all
                .into_iter()
                .map(|s| {
                    (fresh.get(&s).copied().unwrap_or(0.0)
                        - drift.get(&s).copied().unwrap_or(0.0))
                    .abs()
                })
                .sum::<f64>();
        }
        Some(total / (legs.len() - 1) as f64 * 21.0 / holding as f64)
    };
    OracleReport { ret, sharpe, turnover }
}

// ------------------------------------------------------- t distribution

fn ln_gamma_times_two(twice: u64) -> f64 {
    // ln Gamma(twice / 2) for positive integers `twice`
    assert!(twice >= 1);
    if twice % 2 == 0 {
        // ln (k-1)! for k = twice/2
        let k = twice / 2;
        (1..k).map(|j| (j as f64).ln()).sum()
    } else {
        // ln Gamma(k + 1/2) = ln Gamma(1/2) + sum ln(j - 1/2)
        let k = (twice - 1) / 2;
        let mut acc = 0.5 * std::f64::consts::PI.ln();
        for j in 1..=k {
            acc += (j as f64 - 0.5).ln();
        }
        acc
    }
}

/// Upper-tail probability of Student's t via Simpson quadrature of the
/// density (integer degrees of freedom).
pub fn t_upper_tail_quadrature(t: f64, dof: f64) -> f64 {
    let nu = dof;
    let twice_nu = (2.0 * dof).round() as u64;
    assert_eq!(twice_nu % 2, 0, "integer dof expected");
    let ln_norm = ln_gamma_times_two(twice_nu / 2 + 1)
        - ln_gamma_times_two(twice_nu / 2)
        - 0.5 * (nu * std::f64::consts::PI).ln();
    let pdf = |x: f64| (ln_norm - (nu + 1.0) / 2.0 * (1.0 + x * x / nu).ln()).exp();
    let simpson = |a: f64, b: f64, n: usize| -> f64 {
        let n = if n % 2 == 0 { n } else { n + 1 };
        let h = (b - a) / n as f64;
        let mut acc = pdf(a) + pdf(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * pdf(a + i as f64 * h);
        }
        acc * h / 3.0
    };
    if t >= 0.0 {
        0.5 - simpson(0.0, t, 16384)
    } else {
        0.5 + simpson(t, 0.0, 16384)
    }
}
