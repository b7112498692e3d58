//! Overlay rendering: fitted lane polylines drawn over a base image.

use lmd_core::fitting::{evaluate_lane, LaneModel};
use lmd_core::netpbm::RgbImage;
use lmd_core::LabelMap;

/// Fixed cycling palette, one color per group id.
pub const PALETTE: [[u8; 3]; 8] = [
    [255, 64, 64],
    [64, 255, 64],
    [96, 96, 255],
    [255, 255, 0],
    [255, 0, 255],
    [0, 255, 255],
    [255, 160, 0],
    [160, 64, 255],
];

pub fn group_color(group_id: u32) -> [u8; 3] {
    PALETTE[((group_id - 1) % PALETTE.len() as u32) as usize]
}

/// Gray rendering of a label map (class id scaled up for visibility) used as
/// the overlay background when no photograph is available.
pub fn labels_as_rgb(labels: &LabelMap) -> RgbImage {
    let mut img = RgbImage::filled(labels.width(), labels.height(), [0, 0, 0]);
    for y in 0..labels.height() {
        for x in 0..labels.width() {
            let g = labels.at(y, x).saturating_mul(60);
            img.put(y, x, [g, g, g]);
        }
    }
    img
}

fn plot(img: &mut RgbImage, y: i64, x: i64, rgb: [u8; 3]) {
    if y >= 0 && x >= 0 && (y as usize) < img.height && (x as usize) < img.width {
        img.put(y as usize, x as usize, rgb);
    }
}

/// Integer Bresenham segment, clipped at the image border.
fn draw_segment(img: &mut RgbImage, from: (i64, i64), to: (i64, i64), rgb: [u8; 3]) {
    let (mut y, mut x) = from;
    let dy = (to.0 - y).abs();
    let dx = (to.1 - x).abs();
    let sy = if y < to.0 { 1 } else { -1 };
    let sx = if x < to.1 { 1 } else { -1 };
    let mut err = dx - dy;
    loop {
        plot(img, y, x, rgb);
        if (y, x) == to {
            break;
        }
        let e2 = 2 * err;
        if e2 > -dy {
            err -= dy;
            x += sx;
        }
        if e2 < dx {
            err += dx;
            y += sy;
        }
    }
}

/// Draws each fitted lane as a polyline sampled at every row of its domain.
pub fn render_lanes(img: &mut RgbImage, lanes: &[(u32, LaneModel)]) {
    for (group_id, model) in lanes {
        let color = group_color(*group_id);
        let r0 = model.domain.0.floor().max(0.0) as i64;
        let r1 = (model.domain.1.ceil() as i64).min(img.height as i64 - 1);
        if r1 < r0 {
            continue;
        }
        let rows: Vec<f64> = (r0..=r1).map(|r| r as f64).collect();
        let points = evaluate_lane(model, &rows);
        let mut prev: Option<(i64, i64)> = None;
        for p in points {
            let cur = (p.row.round() as i64, p.col.round() as i64);
            match prev {
                Some(q) => draw_segment(img, q, cur, color),
                None => plot(img, cur.0, cur.1, color),
            }
            prev = Some(cur);
        }
    }
}
