use std::path::Path;

use image::{DynamicImage, ImageFormat};

use super::{FlowError, Result};

/// A grayscale frame in `[0, 1]`, optionally carrying its 8-bit RGB source.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    pub gray: Vec<f64>,
    pub rgb: Option<Vec<u8>>,
}

/// Rec.601 luma of an 8-bit RGB triple, scaled to `[0, 1]`.
fn luma(r: u8, g: u8, b: u8) -> f64 {
    (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64) / 255.0
}

impl Frame {
    pub fn from_gray(width: usize, height: usize, gray: Vec<f64>) -> Self {
        assert_eq!(gray.len(), width * height, "pixel count");
        Self {
            width,
            height,
            gray,
            rgb: None,
        }
    }

    pub fn from_rgb(width: usize, height: usize, rgb: Vec<u8>) -> Self {
        assert_eq!(rgb.len(), width * height * 3, "pixel count");
        let gray = rgb.chunks_exact(3).map(|p| luma(p[0], p[1], p[2])).collect();
        Self {
            width,
            height,
            gray,
            rgb: Some(rgb),
        }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// RGB bytes, replicating gray when no color source is attached.
    pub fn rgb_bytes(&self) -> Vec<u8> {
        match &self.rgb {
            Some(rgb) => rgb.clone(),
            None => self
                .gray
                .iter()
                .flat_map(|&g| {
                    let b = (g.clamp(0.0, 1.0) * 255.0).round() as u8;
                    [b, b, b]
                })
                .collect(),
        }
    }

    pub fn rgb_at(&self, x: usize, y: usize) -> [u8; 3] {
        let i = y * self.width + x;
        match &self.rgb {
            Some(rgb) => [rgb[3 * i], rgb[3 * i + 1], rgb[3 * i + 2]],
            None => {
                let b = (self.gray[i].clamp(0.0, 1.0) * 255.0).round() as u8;
                [b, b, b]
            }
        }
    }

    pub fn to_image(&self) -> image::RgbImage {
        image::RgbImage::from_raw(self.width as u32, self.height as u32, self.rgb_bytes())
            .expect("buffer size matches dimensions")
    }

    /// PNG encoding of the RGB view, for browsers.
    pub fn to_png(&self) -> Result<Vec<u8>> {
        let mut out = std::io::Cursor::new(Vec::new());
        self.to_image()
            .write_to(&mut out, ImageFormat::Png)
            .map_err(|e| FlowError::Image(e.to_string()))?;
        Ok(out.into_inner())
    }
}

/// Read an 8-bit binary PGM (P5) or PPM (P6).
pub fn read_pnm(path: impl AsRef<Path>) -> Result<Frame> {
    let bytes = std::fs::read(path)?;
    let img =
        image::load_from_memory_with_format(&bytes, ImageFormat::Pnm).map_err(|e| FlowError::Image(e.to_string()))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    Ok(match img {
        DynamicImage::ImageLuma8(g) => {
            Frame::from_gray(w, h, g.into_raw().into_iter().map(|v| v as f64 / 255.0).collect())
        }
        other => Frame::from_rgb(w, h, other.into_rgb8().into_raw()),
    })
}

fn write_pnm_header(out: &mut Vec<u8>, magic: &str, w: usize, h: usize) {
    out.extend_from_slice(format!("{magic}\n{w} {h}\n255\n").as_bytes());
}

/// Write the RGB view as binary PPM (P6).
pub fn write_ppm(path: impl AsRef<Path>, frame: &Frame) -> Result<()> {
    let mut out = Vec::with_capacity(frame.len() * 3 + 20);
    write_pnm_header(&mut out, "P6", frame.width, frame.height);
    out.extend_from_slice(&frame.rgb_bytes());
    std::fs::write(path, out)?;
    Ok(())
}

/// Write the gray channel as binary PGM (P5).
pub fn write_pgm(path: impl AsRef<Path>, frame: &Frame) -> Result<()> {
    let mut out = Vec::with_capacity(frame.len() + 20);
    write_pnm_header(&mut out, "P5", frame.width, frame.height);
    out.extend(frame.gray.iter().map(|&g| (g.clamp(0.0, 1.0) * 255.0).round() as u8));
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_round_trip_keeps_color() {
        let dir = tempfile::tempdir().unwrap();
        let rgb: Vec<u8> = (0..4 * 3 * 3).map(|i| (i * 7) as u8).collect();
        let frame = Frame::from_rgb(4, 3, rgb.clone());
        let path = dir.path().join("f.ppm");
        write_ppm(&path, &frame).unwrap();
        let back = read_pnm(&path).unwrap();
        assert_eq!(back.rgb, Some(rgb));
        assert_eq!((back.width, back.height), (4, 3));
    }

    #[test]
    fn pgm_round_trip_keeps_gray() {
        let dir = tempfile::tempdir().unwrap();
        let gray: Vec<f64> = (0..20).map(|i| i as f64 / 255.0).collect();
        let frame = Frame::from_gray(5, 4, gray.clone());
        let path = dir.path().join("f.pgm");
        write_pgm(&path, &frame).unwrap();
        let back = read_pnm(&path).unwrap();
        assert!(back.rgb.is_none());
        assert_eq!(back.gray, gray);
    }

    #[test]
    fn luma_weights() {
        let f = Frame::from_rgb(1, 1, vec![255, 0, 0]);
        assert!((f.gray[0] - 0.299).abs() < 1e-12);
    }
}
