use serde::{Deserialize, Serialize};

use super::font::{text_pixels, GLYPH_H};
use super::{MuzzleEstimate, PersonBox, Result, ShooterError};
use crate::flow::Frame;
use crate::geometry::BBox;
use crate::smoke::SmokeBlob;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OverlayStyle {
    /// Weight of the flow visualization where it is blended in.
    pub alpha: f64,
    pub labels: bool,
    pub shooter_color: [u8; 3],
    pub smoke_color: [u8; 3],
    pub muzzle_color: [u8; 3],
    /// Half-length of the muzzle cross arms.
    pub cross_radius: i64,
}

impl Default for OverlayStyle {
    fn default() -> Self {
        Self {
            alpha: 0.4,
            labels: true,
            shooter_color: [0, 255, 0],
            smoke_color: [255, 0, 255],
            muzzle_color: [255, 255, 0],
            cross_radius: 4,
        }
    }
}

struct Canvas {
    w: usize,
    h: usize,
    rgb: Vec<u8>,
}

impl Canvas {
    fn put(&mut self, x: i64, y: i64, c: [u8; 3]) {
        if x < 0 || y < 0 || x >= self.w as i64 || y >= self.h as i64 {
            return;
        }
        let i = 3 * (y as usize * self.w + x as usize);
        self.rgb[i..i + 3].copy_from_slice(&c);
    }

    /// 1-pixel border of the pixels the box covers.
    fn rect(&mut self, b: &BBox, c: [u8; 3]) {
        let (x0, y0) = (b.x0.floor() as i64, b.y0.floor() as i64);
        let (x1, y1) = (b.x1.ceil() as i64 - 1, b.y1.ceil() as i64 - 1);
        if x1 < x0 || y1 < y0 {
            return;
        }
        for x in x0..=x1 {
            self.put(x, y0, c);
            self.put(x, y1, c);
        }
        for y in y0..=y1 {
            self.put(x0, y, c);
            self.put(x1, y, c);
        }
    }

    fn label(&mut self, text: &str, b: &BBox, c: [u8; 3]) {
        let x = b.x0.floor() as i64;
        let above = b.y0.floor() as i64 - GLYPH_H as i64 - 2;
        let y = if above >= 0 { above } else { b.y1.ceil() as i64 + 2 };
        for (px, py) in text_pixels(text, x, y) {
            self.put(px, py, c);
        }
    }
}

/// Composite flow visualization and detections over a video frame.
///
/// `flow_viz` is blended in only where `motion_mask` is set. Shooter and
/// smoke boxes get 1-pixel borders, the muzzle a cross marker.
pub fn render_overlay(
    frame: &Frame,
    flow_viz: &Frame,
    motion_mask: &[bool],
    people: &[PersonBox],
    smoke: &[SmokeBlob],
    muzzle: &[MuzzleEstimate],
    style: &OverlayStyle,
) -> Result<Frame> {
    if (frame.width, frame.height) != (flow_viz.width, flow_viz.height) || motion_mask.len() != frame.len() {
        return Err(ShooterError::DimensionMismatch(format!(
            "frame {}x{}, flow {}x{}, mask {}",
            frame.width,
            frame.height,
            flow_viz.width,
            flow_viz.height,
            motion_mask.len()
        )));
    }
    let mut canvas = Canvas {
        w: frame.width,
        h: frame.height,
        rgb: frame.rgb_bytes(),
    };
    let viz = flow_viz.rgb_bytes();
    for (i, _) in motion_mask.iter().enumerate().filter(|(_, m)| **m) {
        for c in 3 * i..3 * i + 3 {
            let v = (1.0 - style.alpha) * canvas.rgb[c] as f64 + style.alpha * viz[c] as f64;
            canvas.rgb[c] = v.round().clamp(0.0, 255.0) as u8;
        }
    }
    for s in smoke {
        canvas.rect(&s.bbox, style.smoke_color);
        if style.labels {
            canvas.label("smoke", &s.bbox, style.smoke_color);
        }
    }
    for p in people {
        canvas.rect(&p.bbox, style.shooter_color);
        if style.labels {
            canvas.label("shooter", &p.bbox, style.shooter_color);
        }
    }
    for m in muzzle {
        let (x, y) = (m.point.x.floor() as i64, m.point.y.floor() as i64);
        for d in -style.cross_radius..=style.cross_radius {
            canvas.put(x + d, y, style.muzzle_color);
            canvas.put(x, y + d, style.muzzle_color);
        }
        if style.labels {
            let r = style.cross_radius as f64;
            let anchor = BBox::new(m.point.x + r + 2.0, m.point.y - r, m.point.x + r + 3.0, m.point.y + r);
            canvas.label("muzzle", &anchor, style.muzzle_color);
        }
    }
    Ok(Frame::from_rgb(frame.width, frame.height, canvas.rgb))
}
