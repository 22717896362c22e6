//! Coarse-to-fine Horn–Schunck.
//!
//! Each pyramid level linearizes the brightness constancy constraint around
//! the flow inherited from the coarser level (the second frame is warped by
//! it) and minimizes
//!
//! ```text
//! E(u, v) = Σ_p (Ix u + Iy v + It')²  +  α² Σ_{p~q} [(u_p − u_q)² + (v_p − v_q)²]
//! ```
//!
//! over 4-neighbour edges with red–black Gauss–Seidel sweeps. Every
//! half-sweep minimizes `E` exactly over one color class, so the energy never
//! increases. Pixels with fewer neighbours (borders) use only the edges they
//! have, which is the replicate-padding boundary condition.

use serde::{Deserialize, Serialize};

use super::{FlowError, FlowField, Frame, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowParams {
    /// Smoothness weight, in units of `intensity_scale`.
    pub alpha: f64,
    pub iterations: usize,
    pub pyramid_levels: usize,
    pub scale: f64,
    /// Intensities in `[0, 1]` are multiplied by this before solving, so
    /// `alpha` keeps its usual 8-bit meaning.
    pub intensity_scale: f64,
    /// Coarsening stops before either side drops below this many pixels.
    pub min_level_size: usize,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            alpha: 15.0,
            iterations: 100,
            pyramid_levels: 4,
            scale: 0.5,
            intensity_scale: 255.0,
            min_level_size: 8,
        }
    }
}

impl FlowParams {
    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0)
            || self.iterations == 0
            || self.pyramid_levels == 0
            || !(self.scale > 0.0 && self.scale < 1.0)
        {
            return Err(FlowError::InvalidParameter(format!("{self:?}")));
        }
        Ok(())
    }
}

/// Diagnostics of one solve.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlowTrace {
    /// Level sizes from finest to coarsest.
    pub level_sizes: Vec<(usize, usize)>,
    /// Energy at the finest level before the first sweep and after each one.
    pub finest_energies: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Plane {
    w: usize,
    h: usize,
    data: Vec<f64>,
}

impl Plane {
    fn new(w: usize, h: usize) -> Self {
        Self {
            w,
            h,
            data: vec![0.0; w * h],
        }
    }

    fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.w + x]
    }

    /// Bilinear sample with clamped (replicated) borders.
    fn sample(&self, x: f64, y: f64) -> f64 {
        let x = x.clamp(0.0, (self.w - 1) as f64);
        let y = y.clamp(0.0, (self.h - 1) as f64);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.w - 1);
        let y1 = (y0 + 1).min(self.h - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let top = self.at(x0, y0) * (1.0 - fx) + self.at(x1, y0) * fx;
        let bot = self.at(x0, y1) * (1.0 - fx) + self.at(x1, y1) * fx;
        top * (1.0 - fy) + bot * fy
    }

    fn blur(&self, sigma: f64) -> Plane {
        let radius = (3.0 * sigma).ceil() as isize;
        let kernel: Vec<f64> = (-radius..=radius)
            .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
            .collect();
        let norm: f64 = kernel.iter().sum();
        let kernel: Vec<f64> = kernel.iter().map(|k| k / norm).collect();
        let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;

        let mut tmp = Plane::new(self.w, self.h);
        for y in 0..self.h {
            for x in 0..self.w {
                tmp.data[y * self.w + x] = kernel
                    .iter()
                    .enumerate()
                    .map(|(k, wk)| wk * self.at(clamp(x as isize + k as isize - radius, self.w), y))
                    .sum();
            }
        }
        let mut out = Plane::new(self.w, self.h);
        for y in 0..self.h {
            for x in 0..self.w {
                out.data[y * self.w + x] = kernel
                    .iter()
                    .enumerate()
                    .map(|(k, wk)| wk * tmp.at(x, clamp(y as isize + k as isize - radius, self.h)))
                    .sum();
            }
        }
        out
    }

    /// Resample to `w x h` by pixel-center bilinear interpolation.
    fn resize(&self, w: usize, h: usize) -> Plane {
        let sx = self.w as f64 / w as f64;
        let sy = self.h as f64 / h as f64;
        let mut out = Plane::new(w, h);
        for y in 0..h {
            for x in 0..w {
                out.data[y * w + x] = self.sample((x as f64 + 0.5) * sx - 0.5, (y as f64 + 0.5) * sy - 0.5);
            }
        }
        out
    }

    /// Central difference with replicated borders.
    fn gradient(&self) -> (Plane, Plane) {
        let mut gx = Plane::new(self.w, self.h);
        let mut gy = Plane::new(self.w, self.h);
        for y in 0..self.h {
            let ym = y.saturating_sub(1);
            let yp = (y + 1).min(self.h - 1);
            for x in 0..self.w {
                let xm = x.saturating_sub(1);
                let xp = (x + 1).min(self.w - 1);
                gx.data[y * self.w + x] = 0.5 * (self.at(xp, y) - self.at(xm, y));
                gy.data[y * self.w + x] = 0.5 * (self.at(x, yp) - self.at(x, ym));
            }
        }
        (gx, gy)
    }
}

/// Linearized data term of one level: `Ix u + Iy v + It'`.
struct DataTerm {
    w: usize,
    h: usize,
    ix: Vec<f64>,
    iy: Vec<f64>,
    it: Vec<f64>,
}

impl DataTerm {
    fn build(a: &Plane, b: &Plane, u0: &Plane, v0: &Plane) -> Self {
        let (w, h) = (a.w, a.h);
        let mut warped = Plane::new(w, h);
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                warped.data[i] = b.sample(x as f64 + u0.data[i], y as f64 + v0.data[i]);
            }
        }
        let (ax, ay) = a.gradient();
        let (bx, by) = warped.gradient();
        let mut ix = vec![0.0; w * h];
        let mut iy = vec![0.0; w * h];
        let mut it = vec![0.0; w * h];
        for i in 0..w * h {
            ix[i] = 0.5 * (ax.data[i] + bx.data[i]);
            iy[i] = 0.5 * (ay.data[i] + by.data[i]);
            // constraint on the total flow u = u0 + du
            it[i] = warped.data[i] - a.data[i] - ix[i] * u0.data[i] - iy[i] * v0.data[i];
        }
        Self { w, h, ix, iy, it }
    }

    fn energy(&self, u: &[f64], v: &[f64], alpha2: f64) -> f64 {
        let (w, h) = (self.w, self.h);
        let mut data = 0.0;
        let mut smooth = 0.0;
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let r = self.ix[i] * u[i] + self.iy[i] * v[i] + self.it[i];
                data += r * r;
                if x + 1 < w {
                    smooth += (u[i] - u[i + 1]).powi(2) + (v[i] - v[i + 1]).powi(2);
                }
                if y + 1 < h {
                    smooth += (u[i] - u[i + w]).powi(2) + (v[i] - v[i + w]).powi(2);
                }
            }
        }
        data + alpha2 * smooth
    }

    /// One red–black Gauss–Seidel sweep.
    fn sweep(&self, u: &mut [f64], v: &mut [f64], alpha2: f64) {
        let (w, h) = (self.w, self.h);
        for color in 0..2 {
            for y in 0..h {
                let start = (y + color) % 2;
                for x in (start..w).step_by(2) {
                    let i = y * w + x;
                    let (mut su, mut sv, mut n) = (0.0, 0.0, 0.0);
                    if x > 0 {
                        su += u[i - 1];
                        sv += v[i - 1];
                        n += 1.0;
                    }
                    if x + 1 < w {
                        su += u[i + 1];
                        sv += v[i + 1];
                        n += 1.0;
                    }
                    if y > 0 {
                        su += u[i - w];
                        sv += v[i - w];
                        n += 1.0;
                    }
                    if y + 1 < h {
                        su += u[i + w];
                        sv += v[i + w];
                        n += 1.0;
                    }
                    let (ub, vb) = (su / n, sv / n);
                    let (ix, iy) = (self.ix[i], self.iy[i]);
                    let k = alpha2 * n;
                    let t = (ix * ub + iy * vb + self.it[i]) / (k + ix * ix + iy * iy);
                    u[i] = ub - ix * t;
                    v[i] = vb - iy * t;
                }
            }
        }
    }
}

/// Discretized objective of a single-level solve from `a` to `b` at flow
/// `field`, linearized around zero flow.
pub fn hs_energy(a: &Frame, b: &Frame, field: &FlowField, params: &FlowParams) -> Result<f64> {
    check_frames(a, b)?;
    let pa = to_plane(a, params.intensity_scale);
    let pb = to_plane(b, params.intensity_scale);
    let zero = Plane::new(a.width, a.height);
    let term = DataTerm::build(&pa, &pb, &zero, &zero);
    let u: Vec<f64> = field.u.iter().map(|&x| x as f64).collect();
    let v: Vec<f64> = field.v.iter().map(|&x| x as f64).collect();
    Ok(term.energy(&u, &v, params.alpha * params.alpha))
}

fn to_plane(f: &Frame, scale: f64) -> Plane {
    Plane {
        w: f.width,
        h: f.height,
        data: f.gray.iter().map(|g| g * scale).collect(),
    }
}

fn check_frames(a: &Frame, b: &Frame) -> Result<()> {
    if a.width != b.width || a.height != b.height {
        return Err(FlowError::DimensionMismatch(a.width, a.height, b.width, b.height));
    }
    if a.width < 16 || a.height < 16 {
        return Err(FlowError::FrameTooSmall(a.width, a.height));
    }
    Ok(())
}

pub fn compute_flow(a: &Frame, b: &Frame, params: &FlowParams) -> Result<FlowField> {
    compute_flow_traced(a, b, params).map(|(f, _)| f)
}

pub fn compute_flow_traced(a: &Frame, b: &Frame, params: &FlowParams) -> Result<(FlowField, FlowTrace)> {
    check_frames(a, b)?;
    params.validate()?;

    let mut pyr_a = vec![to_plane(a, params.intensity_scale)];
    let mut pyr_b = vec![to_plane(b, params.intensity_scale)];
    let sigma = 0.5 / params.scale;
    while pyr_a.len() < params.pyramid_levels {
        let last = pyr_a.last().unwrap();
        let w = (last.w as f64 * params.scale).round() as usize;
        let h = (last.h as f64 * params.scale).round() as usize;
        if w < params.min_level_size || h < params.min_level_size {
            break;
        }
        let na = last.blur(sigma).resize(w, h);
        let nb = pyr_b.last().unwrap().blur(sigma).resize(w, h);
        pyr_a.push(na);
        pyr_b.push(nb);
    }

    let mut trace = FlowTrace {
        level_sizes: pyr_a.iter().map(|p| (p.w, p.h)).collect(),
        finest_energies: Vec::new(),
    };
    let alpha2 = params.alpha * params.alpha;
    let coarsest = pyr_a.last().unwrap();
    let mut u = Plane::new(coarsest.w, coarsest.h);
    let mut v = Plane::new(coarsest.w, coarsest.h);
    for level in (0..pyr_a.len()).rev() {
        let (pa, pb) = (&pyr_a[level], &pyr_b[level]);
        if u.w != pa.w || u.h != pa.h {
            let (fx, fy) = (pa.w as f64 / u.w as f64, pa.h as f64 / u.h as f64);
            u = u.resize(pa.w, pa.h);
            v = v.resize(pa.w, pa.h);
            u.data.iter_mut().for_each(|x| *x *= fx);
            v.data.iter_mut().for_each(|x| *x *= fy);
        }
        let term = DataTerm::build(pa, pb, &u, &v);
        if level == 0 {
            trace.finest_energies.push(term.energy(&u.data, &v.data, alpha2));
        }
        for _ in 0..params.iterations {
            term.sweep(&mut u.data, &mut v.data, alpha2);
            if level == 0 {
                trace.finest_energies.push(term.energy(&u.data, &v.data, alpha2));
            }
        }
    }

    let field = FlowField {
        width: a.width,
        height: a.height,
        u: u.data.iter().map(|&x| x as f32).collect(),
        v: v.data.iter().map(|&x| x as f32).collect(),
        valid: vec![true; a.width * a.height],
    };
    Ok((field, trace))
}
