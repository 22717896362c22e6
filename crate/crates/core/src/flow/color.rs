//! Middlebury color-wheel rendering of flow fields.

use std::f64::consts::PI;

use super::{FlowField, Frame};

/// Components beyond this magnitude are the unknown-flow sentinel.
pub const UNKNOWN_FLOW_THRESHOLD: f64 = 1e9;

const RY: usize = 15;
const YG: usize = 6;
const GC: usize = 4;
const CB: usize = 11;
const BM: usize = 13;
const MR: usize = 6;

/// The 55-entry hue table: red → yellow → green → cyan → blue → magenta → red.
pub fn color_wheel() -> Vec<[u8; 3]> {
    let ramp = |i: usize, n: usize| (255 * i / n) as u8;
    let mut wheel = Vec::with_capacity(RY + YG + GC + CB + BM + MR);
    wheel.extend((0..RY).map(|i| [255, ramp(i, RY), 0]));
    wheel.extend((0..YG).map(|i| [255 - ramp(i, YG), 255, 0]));
    wheel.extend((0..GC).map(|i| [0, 255, ramp(i, GC)]));
    wheel.extend((0..CB).map(|i| [0, 255 - ramp(i, CB), 255]));
    wheel.extend((0..BM).map(|i| [ramp(i, BM), 0, 255]));
    wheel.extend((0..MR).map(|i| [255, 0, 255 - ramp(i, MR)]));
    wheel
}

/// Continuous position on the wheel in `[0, 55)` for direction `(u, v)`.
///
/// One full turn spans all 55 bins, so rotating a vector by `2π/55`
/// advances the position by exactly one bin.
pub fn hue_position(u: f64, v: f64) -> f64 {
    let n = (RY + YG + GC + CB + BM + MR) as f64;
    let a = (-v).atan2(-u) / PI;
    let pos = (a + 1.0) / 2.0 * n;
    if pos >= n {
        pos - n
    } else {
        pos
    }
}

pub fn hue_bin(u: f64, v: f64) -> usize {
    hue_position(u, v).floor() as usize % color_wheel().len()
}

fn is_unknown(u: f64, v: f64) -> bool {
    !(u.abs() <= UNKNOWN_FLOW_THRESHOLD && v.abs() <= UNKNOWN_FLOW_THRESHOLD)
}

fn percentile_99(mut mags: Vec<f64>) -> f64 {
    if mags.is_empty() {
        return 0.0;
    }
    mags.sort_by(f64::total_cmp);
    let pos = 0.99 * (mags.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    mags[lo] + (mags[hi] - mags[lo]) * (pos - lo as f64)
}

/// Render `field` as an RGB frame.
///
/// Saturation is `|flow| / max_mag`; vectors beyond `max_mag` are darkened
/// to 75%. When `max_mag` is `None` the 99th percentile of known magnitudes
/// is used. Invalid or sentinel vectors render black.
pub fn flow_to_color(field: &FlowField, max_mag: Option<f64>) -> Frame {
    let known = |i: usize| field.valid[i] && !is_unknown(field.u[i] as f64, field.v[i] as f64);
    let max_mag = max_mag.unwrap_or_else(|| {
        percentile_99(
            (0..field.len())
                .filter(|&i| known(i))
                .map(|i| field.magnitude(i))
                .collect(),
        )
    });
    let max_mag = if max_mag > 0.0 && max_mag.is_finite() {
        max_mag
    } else {
        1.0
    };
    let wheel = color_wheel();
    let n = wheel.len();

    let mut rgb = Vec::with_capacity(field.len() * 3);
    for i in 0..field.len() {
        if !known(i) {
            rgb.extend_from_slice(&[0, 0, 0]);
            continue;
        }
        let (u, v) = (field.u[i] as f64 / max_mag, field.v[i] as f64 / max_mag);
        let rad = u.hypot(v);
        let fk = hue_position(u, v);
        let k0 = fk.floor() as usize % n;
        let k1 = (k0 + 1) % n;
        let f = fk - fk.floor();
        for c in 0..3 {
            let col0 = wheel[k0][c] as f64 / 255.0;
            let col1 = wheel[k1][c] as f64 / 255.0;
            let mut col = (1.0 - f) * col0 + f * col1;
            if rad <= 1.0 {
                col = 1.0 - rad * (1.0 - col);
            } else {
                col *= 0.75;
            }
            rgb.push((255.0 * col) as u8);
        }
    }
    Frame::from_rgb(field.width, field.height, rgb)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(u: f32, v: f32) -> FlowField {
        FlowField::constant(1, 1, u, v)
    }

    #[test]
    fn wheel_has_55_entries_starting_red() {
        let w = color_wheel();
        assert_eq!(w.len(), 55);
        assert_eq!(w[0], [255, 0, 0]);
        assert_eq!(w[15], [255, 255, 0]);
        assert_eq!(w[21], [0, 255, 0]);
        assert_eq!(w[25], [0, 255, 255]);
        assert_eq!(w[36], [0, 0, 255]);
        assert_eq!(w[49], [255, 0, 255]);
    }

    #[test]
    fn zero_flow_is_white() {
        let img = flow_to_color(&FlowField::zeros(3, 2), None);
        assert!(img.rgb.unwrap().iter().all(|&c| c == 255));
    }

    #[test]
    fn saturated_angle_zero_is_first_hue() {
        let img = flow_to_color(&single(4.0, 0.0), Some(4.0));
        assert_eq!(img.rgb.unwrap(), vec![255, 0, 0]);
        assert_eq!(hue_bin(4.0, 0.0), 0);
    }

    #[test]
    fn sentinel_is_black() {
        let img = flow_to_color(&single(2e9, 0.0), Some(1.0));
        assert_eq!(img.rgb.unwrap(), vec![0, 0, 0]);
        let mut f = single(1.0, 1.0);
        f.valid[0] = false;
        assert_eq!(flow_to_color(&f, None).rgb.unwrap(), vec![0, 0, 0]);
    }

    #[test]
    fn beyond_max_is_darkened() {
        let img = flow_to_color(&single(8.0, 0.0), Some(4.0));
        assert_eq!(img.rgb.unwrap(), vec![191, 0, 0]);
    }

    #[test]
    fn rotation_advances_one_bin() {
        let n = 55;
        for k in 0..n {
            let a = 2.0 * (k as f64 + 0.5) / n as f64 - 1.0;
            let (u, v) = (-(PI * a).cos(), -(PI * a).sin());
            let phi = 2.0 * PI / n as f64;
            let (ur, vr) = (u * phi.cos() - v * phi.sin(), u * phi.sin() + v * phi.cos());
            assert_eq!(hue_bin(u, v), k);
            assert_eq!(hue_bin(ur, vr), (k + 1) % n);
        }
    }
}
