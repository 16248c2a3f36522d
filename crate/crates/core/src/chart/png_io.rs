//! Lossless PNG export of chart images and localization-map overlays.

use super::ChartError;
use std::io::Write;

fn to_rgb8(data: &[f32]) -> Vec<u8> {
    data.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect()
}

/// Write an RGB f32 image in `[0,1]` as an 8-bit PNG. `tag` key/value pairs
/// are stored as tEXt chunks (used to stamp artifacts with the config hash).
pub fn write_png<W: Write>(
    w: W,
    data: &[f32],
    height: usize,
    width: usize,
    tags: &[(&str, &str)],
) -> Result<(), ChartError> {
    assert_eq!(data.len(), height * width * 3);
    let mut enc = png::Encoder::new(w, width as u32, height as u32);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    for (k, v) in tags {
        enc.add_text_chunk(k.to_string(), v.to_string())?;
    }
    let mut writer = enc.write_header()?;
    writer.write_image_data(&to_rgb8(data))?;
    Ok(())
}

/// Alpha-blend a nonnegative localization map over a chart image and write
/// the blend as PNG. The map is min-max scaled to `[0,1]` for display only;
/// hotter locations pull pixels toward red.
pub fn write_overlay_png<W: Write>(
    w: W,
    chart: &[f32],
    map: &[f64],
    height: usize,
    width: usize,
    tags: &[(&str, &str)],
) -> Result<(), ChartError> {
    assert_eq!(chart.len(), height * width * 3);
    assert_eq!(map.len(), height * width);
    let lo = map.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = map.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scale = if hi > lo { 1.0 / (hi - lo) } else { 0.0 };
    let mut blended = Vec::with_capacity(chart.len());
    for (i, px) in chart.chunks_exact(3).enumerate() {
        let heat = ((map[i] - lo) * scale) as f32;
        let alpha = 0.55 * heat;
        blended.push(px[0] * (1.0 - alpha) + alpha); // toward red
        blended.push(px[1] * (1.0 - alpha));
        blended.push(px[2] * (1.0 - alpha));
    }
    write_png(w, &blended, height, width, tags)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_has_signature_and_text_chunk() {
        let img = vec![0.5f32; 4 * 4 * 3];
        let mut buf = Vec::new();
        write_png(&mut buf, &img, 4, 4, &[("config_hash", "deadbeef")]).unwrap();
        assert_eq!(&buf[..8], &[0x89, b'P', b'N', b'G', b'\r', b'\n', 0x1a, b'\n']);
        let hay = buf.windows(8).any(|w| w == b"deadbeef");
        assert!(hay, "tEXt chunk payload must appear in the file");
    }

    #[test]
    fn overlay_handles_constant_map() {
        let img = vec![1.0f32; 2 * 2 * 3];
        let map = vec![0.0f64; 4];
        let mut buf = Vec::new();
        write_overlay_png(&mut buf, &img, &map, 2, 2, &[]).unwrap();
        assert!(!buf.is_empty());
    }
}
