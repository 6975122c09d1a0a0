//! Contact sheets: the frames of a stack side by side, each captioned with
//! its EV in a small built-in bitmap font.

use crate::exposure::ExposureStack;
use crate::imgcore::SrgbImage;

const GLYPH_W: usize = 3;
const GLYPH_H: usize = 5;
const GAP: usize = 4;

/// 3x5 glyphs, one row per byte (low three bits, MSB on the left).
fn glyph(c: char) -> [u8; GLYPH_H] {
    match c {
        '0' => [7, 5, 5, 5, 7],
        '1' => [2, 6, 2, 2, 7],
        '2' => [7, 1, 7, 4, 7],
        '3' => [7, 1, 7, 1, 7],
        '4' => [5, 5, 7, 1, 1],
        '5' => [7, 4, 7, 1, 7],
        '6' => [7, 4, 7, 5, 7],
        '7' => [7, 1, 2, 2, 2],
        '8' => [7, 5, 7, 5, 7],
        '9' => [7, 5, 7, 1, 7],
        '+' => [0, 2, 7, 2, 0],
        '-' => [0, 0, 7, 0, 0],
        '.' => [0, 0, 0, 0, 2],
        'E' => [7, 4, 6, 4, 7],
        'V' => [5, 5, 5, 5, 2],
        _ => [0; GLYPH_H],
    }
}

/// Caption text for a frame, e.g. `EV+1.00`.
pub fn ev_caption(ev: f64) -> String {
    let ev = if ev.abs() < 0.005 { 0.0 } else { ev };
    format!("EV{ev:+.2}")
}

fn draw_text(buf: &mut [u8], stride: usize, x0: usize, y0: usize, scale: usize, text: &str) {
    for (k, c) in text.chars().enumerate() {
        let g = glyph(c);
        let gx = x0 + k * (GLYPH_W + 1) * scale;
        for (row, bits) in g.iter().enumerate() {
            for col in 0..GLYPH_W {
                if bits >> (GLYPH_W - 1 - col) & 1 == 0 {
                    continue;
                }
                for dy in 0..scale {
                    for dx in 0..scale {
                        let x = gx + col * scale + dx;
                        let y = y0 + row * scale + dy;
                        let i = (y * stride + x) * 3;
                        if i + 3 <= buf.len() && x < stride {
                            buf[i..i + 3].copy_from_slice(&[255, 255, 255]);
                        }
                    }
                }
            }
        }
    }
}

/// Frames left to right in stack order on a dark background with a caption
/// strip underneath.
pub fn contact_sheet(stack: &ExposureStack) -> SrgbImage {
    let (w, h) = stack.dims();
    let n = stack.len();
    let scale = (w / 64).clamp(1, 4);
    let strip = GLYPH_H * scale + 2 * GAP;
    let width = n * w + (n + 1) * GAP;
    let height = h + GAP + strip;
    let mut buf = vec![24u8; width * height * 3];
    for (j, (frame, &ev)) in stack.frames().iter().zip(stack.evs()).enumerate() {
        let x0 = GAP + j * (w + GAP);
        for y in 0..h {
            let src = &frame.data()[y * w * 3..(y + 1) * w * 3];
            let dst = ((GAP + y) * width + x0) * 3;
            buf[dst..dst + w * 3].copy_from_slice(src);
        }
        let text = ev_caption(ev);
        let text_w = text.len() * (GLYPH_W + 1) * scale;
        let tx = x0 + w.saturating_sub(text_w) / 2;
        draw_text(&mut buf, width, tx, GAP + h + GAP, scale, &text);
    }
    SrgbImage::new(width, height, buf).expect("buffer sized for the sheet")
}
