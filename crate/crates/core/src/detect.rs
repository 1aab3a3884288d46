//! Minimal grayscale line detector: central-difference edges and a dense Hough
//! accumulator with 8-neighborhood peak picking.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::types::DetectedLine;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "pixel buffer has {} bytes, expected {}x{}",
                pixels.len(),
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }

    /// Parses a binary PGM (P5) with maxval up to 255.
    pub fn from_pgm(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::InvalidInput(format!("PGM: {m}"));
        let mut pos = 0;
        let mut fields = Vec::with_capacity(4);
        while fields.len() < 4 {
            while pos < bytes.len() {
                if bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                } else if bytes[pos].is_ascii_whitespace() {
                    pos += 1;
                } else {
                    break;
                }
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(bad("truncated header"));
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header"))?);
        }
        if fields[0] != "P5" {
            return Err(bad("only binary P5 images are supported"));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| bad("bad header number"));
        let (w, h, maxval) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
        if maxval == 0 || maxval > 255 {
            return Err(bad("maxval must be in 1..=255"));
        }
        // Exactly one whitespace byte separates the header from the raster.
        pos += 1;
        let data = bytes.get(pos..pos + w * h).ok_or_else(|| bad("truncated raster"))?;
        let pixels = if maxval == 255 {
            data.to_vec()
        } else {
            data.iter()
                .map(|&v| ((v as usize * 255 + maxval / 2) / maxval).min(255) as u8)
                .collect()
        };
        Self::new(w, h, pixels)
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectConfig {
    pub edge_threshold: f64,
    pub rho_step: f64,
    pub theta_step: f64,
    pub votes_min: usize,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            edge_threshold: 40.0,
            rho_step: 1.0,
            theta_step: PI / 180.0,
            votes_min: 80,
        }
    }
}

/// Marks pixels whose central-difference gradient magnitude exceeds `threshold`
/// with 255. Border pixels are always 0.
pub fn detect_edges(img: &GrayImage, threshold: f64) -> Result<GrayImage> {
    if img.width < 3 || img.height < 3 {
        return Err(Error::Empty("image must be at least 3x3"));
    }
    if !(threshold > 0.0 && threshold < 255.0) {
        return Err(Error::InvalidInput("edge threshold must lie in (0, 255)".into()));
    }
    let mut out = GrayImage::filled(img.width, img.height, 0);
    let t2 = threshold * threshold;
    for y in 1..img.height - 1 {
        for x in 1..img.width - 1 {
            let gx = (img.get(x + 1, y) as f64 - img.get(x - 1, y) as f64) / 2.0;
            let gy = (img.get(x, y + 1) as f64 - img.get(x, y - 1) as f64) / 2.0;
            if gx * gx + gy * gy > t2 {
                out.set(x, y, 255);
            }
        }
    }
    Ok(out)
}

/// Hough accumulator over `theta` in `[0, pi)` and signed `rho`.
pub struct Accumulator {
    pub n_theta: usize,
    pub n_rho: usize,
    /// Index of `rho = 0`.
    pub rho_zero: usize,
    pub rho_step: f64,
    pub theta_step: f64,
    pub votes: Vec<u32>,
}

impl Accumulator {
    pub fn rho_of(&self, r: usize) -> f64 {
        (r as f64 - self.rho_zero as f64) * self.rho_step
    }

    pub fn theta_of(&self, t: usize) -> f64 {
        t as f64 * self.theta_step
    }

    #[inline]
    pub fn at(&self, t: usize, r: usize) -> u32 {
        self.votes[t * self.n_rho + r]
    }
}

pub fn hough_accumulate(binary: &GrayImage, rho_step: f64, theta_step: f64) -> Accumulator {
    let n_theta = (PI / theta_step).round().max(1.0) as usize;
    let diag = (binary.width as f64).hypot(binary.height as f64);
    let rho_zero = (diag / rho_step).ceil() as usize + 1;
    let n_rho = 2 * rho_zero + 1;
    let trig: Vec<(f64, f64)> = (0..n_theta)
        .map(|t| (t as f64 * theta_step).sin_cos())
        .collect();
    let mut votes = vec![0u32; n_theta * n_rho];
    for y in 0..binary.height {
        for x in 0..binary.width {
            if binary.get(x, y) == 0 {
                continue;
            }
            for (t, &(s, c)) in trig.iter().enumerate() {
                let rho = x as f64 * c + y as f64 * s;
                let r = (rho / rho_step).round() as isize + rho_zero as isize;
                votes[t * n_rho + r as usize] += 1;
            }
        }
    }
    Accumulator {
        n_theta,
        n_rho,
        rho_zero,
        rho_step,
        theta_step,
        votes,
    }
}

/// Accumulator peaks with at least `votes_min` votes, as canonical lines.
///
/// A cell is a peak when no 8-neighbor has more votes and no neighbor earlier
/// in scan order has equal votes (plateaus yield one peak). The theta axis
/// wraps: the neighbor of the last theta row is the first row at mirrored rho.
pub fn hough_lines(
    binary: &GrayImage,
    rho_step: f64,
    theta_step: f64,
    votes_min: usize,
) -> Result<Vec<DetectedLine>> {
    if !(rho_step > 0.0 && theta_step > 0.0) || votes_min < 2 {
        return Err(Error::InvalidInput(
            "rho_step and theta_step must be > 0 and votes_min >= 2".into(),
        ));
    }
    let acc = hough_accumulate(binary, rho_step, theta_step);
    let nt = acc.n_theta as isize;
    let nr = acc.n_rho as isize;
    let neighbor = |t: isize, r: isize| -> Option<u32> {
        let (mut t, mut r) = (t, r);
        if t < 0 {
            t += nt;
            r = 2 * acc.rho_zero as isize - r;
        } else if t >= nt {
            t -= nt;
            r = 2 * acc.rho_zero as isize - r;
        }
        if r < 0 || r >= nr {
            None
        } else {
            Some(acc.at(t as usize, r as usize))
        }
    };
    let mut lines = Vec::new();
    for t in 0..nt {
        for r in 0..nr {
            let v = acc.at(t as usize, r as usize);
            if (v as usize) < votes_min {
                continue;
            }
            let mut is_peak = true;
            'n: for dt in -1..=1 {
                for dr in -1..=1 {
                    if dt == 0 && dr == 0 {
                        continue;
                    }
                    if let Some(w) = neighbor(t + dt, r + dr) {
                        let earlier = (dt, dr) < (0, 0);
                        if w > v || (w == v && earlier) {
                            is_peak = false;
                            break 'n;
                        }
                    }
                }
            }
            if is_peak {
                lines.push(DetectedLine::canonical(
                    acc.rho_of(r as usize),
                    acc.theta_of(t as usize),
                ));
            }
        }
    }
    Ok(lines)
}

pub fn detect_lines(img: &GrayImage, cfg: &DetectConfig) -> Result<Vec<DetectedLine>> {
    let edges = detect_edges(img, cfg.edge_threshold)?;
    hough_lines(&edges, cfg.rho_step, cfg.theta_step, cfg.votes_min)
}

/// Draws lines one pixel thick: every pixel whose center lies within half a
/// pixel of a line gets `value`.
pub fn rasterize_lines(img: &mut GrayImage, lines: &[DetectedLine], value: u8) {
    for l in lines {
        for y in 0..img.height {
            for x in 0..img.width {
                if l.distance(x as f64, y as f64).abs() <= 0.5 {
                    img.set(x, y, value);
                }
            }
        }
    }
}
