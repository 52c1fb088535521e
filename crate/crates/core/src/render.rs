//! Grayscale rendering of a feature matrix as binary PGM.

use crate::matrix::{FeatureMatrix, COLS, ROWS};

/// 0.0 maps to black and 1.0 to white; halves round away from zero.
pub fn pixel(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Binary PGM (P5) image: the timestamp row at the top, one `scale`×`scale`
/// block per cell. A `scale` of 0 is treated as 1.
pub fn render_pgm(matrix: &FeatureMatrix, scale: usize) -> Vec<u8> {
    let scale = scale.max(1);
    let (width, height) = (COLS * scale, ROWS * scale);
    let header = format!("P5\n{width} {height}\n255\n");
    let mut out = Vec::with_capacity(header.len() + width * height);
    out.extend_from_slice(header.as_bytes());
    for r in 0..ROWS {
        let mut line = Vec::with_capacity(width);
        for &v in matrix.row(r) {
            line.extend(std::iter::repeat_n(pixel(v), scale));
        }
        for _ in 0..scale {
            out.extend_from_slice(&line);
        }
    }
    out
}
