use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Generator, GeneratorDims};
use crate::error::{Error, Result};
use crate::image::ImageGrid;
use crate::latent::LatentCode;
use crate::rng::RngStream;

/// Transition width of the smooth clamp.
pub const SOFTCLIP_WIDTH: f64 = 0.01;

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Smooth clamp onto `(0, 1)`: `w * (softplus(u/w) - softplus((u-1)/w))`.
pub fn softclip(u: f64) -> f64 {
    let w = SOFTCLIP_WIDTH;
    // exact value is inside (0, 1); the clamp only removes rounding
    (w * (softplus(u / w) - softplus((u - 1.0) / w))).clamp(0.0, 1.0)
}

pub fn softclip_grad(u: f64) -> f64 {
    let w = SOFTCLIP_WIDTH;
    sigmoid(u / w) - sigmoid((u - 1.0) / w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlobGeneratorConfig {
    pub seed: u64,
    pub z_dim: usize,
    pub y_dim: usize,
    pub height: usize,
    pub width: usize,
    pub blobs: usize,
    /// Smallest and largest blob radius as fractions of `min(H, W)`.
    pub radius_range: [f64; 2],
    /// Standard deviation of the entries of the `y -> color` map, times
    /// `sqrt(y_dim)`.
    pub color_gain: f64,
}

impl Default for BlobGeneratorConfig {
    fn default() -> Self {
        Self {
            seed: 17,
            z_dim: 12,
            y_dim: 8,
            height: 64,
            width: 64,
            blobs: 6,
            radius_range: [0.06, 0.22],
            color_gain: 0.7,
        }
    }
}

/// Sum of coloured Gaussian blobs. `z` drives blob centres and radii through
/// fixed linear maps followed by sigmoids; `y` drives blob colours linearly:
///
/// `u[p] = sum_b color_b(y) * exp(-|p - center_b(z)|^2 / radius_b(z)^2)`,
/// `image[p] = softclip(u[p])`.
#[derive(Debug, Clone)]
pub struct BlobGenerator {
    cfg: BlobGeneratorConfig,
    // rows of length z_dim, one per blob
    center_x: Vec<f64>,
    center_y: Vec<f64>,
    radius: Vec<f64>,
    bias: Vec<[f64; 3]>,
    // (3 * blobs) x y_dim, or fixed colours when y_dim == 0
    color: Vec<f64>,
    fixed_color: Vec<f64>,
}

struct BlobState {
    cx: f64,
    cy: f64,
    r: f64,
    // pre-activation sigmoids, kept for the backward pass
    sx: f64,
    sy: f64,
    sr: f64,
    color: [f64; 3],
    ex: Vec<f64>,
    ey: Vec<f64>,
}

impl BlobGenerator {
    pub fn new(cfg: BlobGeneratorConfig) -> Result<Self> {
        if cfg.z_dim == 0 || cfg.blobs == 0 || cfg.height == 0 || cfg.width == 0 {
            return Err(Error::InvalidParams(
                "blob generator needs z_dim, blobs, height, width >= 1".into(),
            ));
        }
        let [rmin, rmax] = cfg.radius_range;
        if !(rmin > 0.0 && rmax >= rmin) {
            return Err(Error::InvalidParams(format!("bad radius range {rmin}..{rmax}")));
        }
        let mut rng = RngStream::new(cfg.seed, 0x6c6f_6273).rng();
        let mut gauss =
            |n: usize, sd: f64| -> Vec<f64> { (0..n).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect() };
        let zs = 1.0 / (cfg.z_dim as f64).sqrt();
        let center_x = gauss(cfg.blobs * cfg.z_dim, zs);
        let center_y = gauss(cfg.blobs * cfg.z_dim, zs);
        let radius = gauss(cfg.blobs * cfg.z_dim, zs);
        let b = gauss(cfg.blobs * 3, 0.5);
        let bias = b.chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
        let ys = if cfg.y_dim > 0 {
            cfg.color_gain / (cfg.y_dim as f64).sqrt()
        } else {
            0.0
        };
        let color = gauss(cfg.blobs * 3 * cfg.y_dim, ys);
        let fixed_color = gauss(cfg.blobs * 3, cfg.color_gain).into_iter().map(f64::abs).collect();
        Ok(Self {
            cfg,
            center_x,
            center_y,
            radius,
            bias,
            color,
            fixed_color,
        })
    }

    pub fn config(&self) -> &BlobGeneratorConfig {
        &self.cfg
    }

    fn blob_states(&self, code: &LatentCode) -> Vec<BlobState> {
        let (h, w) = (self.cfg.height, self.cfg.width);
        let zd = self.cfg.z_dim;
        let yd = self.cfg.y_dim;
        let scale = h.min(w) as f64;
        let [rmin, rmax] = self.cfg.radius_range;
        let dot = |row: &[f64]| row.iter().zip(&code.z).map(|(a, b)| a * b).sum::<f64>();
        (0..self.cfg.blobs)
            .map(|b| {
                let sx = sigmoid(dot(&self.center_x[b * zd..(b + 1) * zd]) + self.bias[b][0]);
                let sy = sigmoid(dot(&self.center_y[b * zd..(b + 1) * zd]) + self.bias[b][1]);
                let sr = sigmoid(dot(&self.radius[b * zd..(b + 1) * zd]) + self.bias[b][2]);
                let cx = w as f64 * sx;
                let cy = h as f64 * sy;
                let r = scale * (rmin + (rmax - rmin) * sr);
                let mut color = [0.0; 3];
                for (ch, c) in color.iter_mut().enumerate() {
                    *c = if yd == 0 {
                        self.fixed_color[b * 3 + ch]
                    } else {
                        let row = &self.color[(b * 3 + ch) * yd..(b * 3 + ch + 1) * yd];
                        row.iter().zip(&code.y).map(|(a, v)| a * v).sum()
                    };
                }
                let inv = 1.0 / (r * r);
                let ex = (0..w).map(|c| (-(c as f64 + 0.5 - cx).powi(2) * inv).exp()).collect();
                let ey = (0..h).map(|rr| (-(rr as f64 + 0.5 - cy).powi(2) * inv).exp()).collect();
                BlobState {
                    cx,
                    cy,
                    r,
                    sx,
                    sy,
                    sr,
                    color,
                    ex,
                    ey,
                }
            })
            .collect()
    }

    /// Pre-clamp intensities.
    fn raw(&self, blobs: &[BlobState]) -> Vec<f64> {
        let (h, w) = (self.cfg.height, self.cfg.width);
        let mut u = vec![0.0; h * w * 3];
        for b in blobs {
            for r in 0..h {
                let ey = b.ey[r];
                if ey < 1e-300 {
                    continue;
                }
                for c in 0..w {
                    let e = ey * b.ex[c];
                    let base = (r * w + c) * 3;
                    for ch in 0..3 {
                        u[base + ch] += b.color[ch] * e;
                    }
                }
            }
        }
        u
    }
}

impl Generator for BlobGenerator {
    fn dims(&self) -> GeneratorDims {
        GeneratorDims {
            z_dim: self.cfg.z_dim,
            y_dim: self.cfg.y_dim,
            height: self.cfg.height,
            width: self.cfg.width,
        }
    }

    fn forward(&self, code: &LatentCode) -> Result<ImageGrid> {
        self.check_code(code)?;
        let blobs = self.blob_states(code);
        let u = self.raw(&blobs);
        ImageGrid::from_vec(self.cfg.height, self.cfg.width, u.into_iter().map(softclip).collect())
    }

    fn vjp(&self, code: &LatentCode, cotangent: &ImageGrid) -> Result<LatentCode> {
        self.check_code(code)?;
        let (h, w) = (self.cfg.height, self.cfg.width);
        if cotangent.dims() != (h, w) {
            return Err(Error::mismatch(
                "generator cotangent",
                format!("{h}x{w}"),
                format!("{}x{}", cotangent.height(), cotangent.width()),
            ));
        }
        let blobs = self.blob_states(code);
        let u = self.raw(&blobs);
        let gu: Vec<f64> = u
            .iter()
            .zip(cotangent.as_slice())
            .map(|(&u, &g)| g * softclip_grad(u))
            .collect();

        let zd = self.cfg.z_dim;
        let yd = self.cfg.y_dim;
        let scale = h.min(w) as f64;
        let [rmin, rmax] = self.cfg.radius_range;
        let mut gz = vec![0.0; zd];
        let mut gy = vec![0.0; yd];
        for (bi, b) in blobs.iter().enumerate() {
            let inv = 1.0 / (b.r * b.r);
            let mut g_color = [0.0; 3];
            let (mut g_cx, mut g_cy, mut g_r) = (0.0, 0.0, 0.0);
            for r in 0..h {
                let ey = b.ey[r];
                if ey < 1e-300 {
                    continue;
                }
                let dy = r as f64 + 0.5 - b.cy;
                for c in 0..w {
                    let e = ey * b.ex[c];
                    let base = (r * w + c) * 3;
                    let mut q = 0.0;
                    for ch in 0..3 {
                        g_color[ch] += gu[base + ch] * e;
                        q += gu[base + ch] * b.color[ch];
                    }
                    let qe = q * e;
                    let dx = c as f64 + 0.5 - b.cx;
                    g_cx += qe * 2.0 * dx * inv;
                    g_cy += qe * 2.0 * dy * inv;
                    g_r += qe * 2.0 * (dx * dx + dy * dy) * inv / b.r;
                }
            }
            let g_ux = g_cx * w as f64 * b.sx * (1.0 - b.sx);
            let g_uy = g_cy * h as f64 * b.sy * (1.0 - b.sy);
            let g_ur = g_r * scale * (rmax - rmin) * b.sr * (1.0 - b.sr);
            for j in 0..zd {
                gz[j] += g_ux * self.center_x[bi * zd + j]
                    + g_uy * self.center_y[bi * zd + j]
                    + g_ur * self.radius[bi * zd + j];
            }
            if yd > 0 {
                for (ch, gc) in g_color.iter().enumerate() {
                    let row = &self.color[(bi * 3 + ch) * yd..(bi * 3 + ch + 1) * yd];
                    for (g, a) in gy.iter_mut().zip(row) {
                        *g += gc * a;
                    }
                }
            }
        }
        Ok(LatentCode { z: gz, y: gy })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{central_fd_latent, random_code, random_image, rel_err};

    fn small() -> BlobGenerator {
        BlobGenerator::new(BlobGeneratorConfig {
            height: 20,
            width: 24,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn softclip_shape() {
        assert!(softclip(-5.0) > 0.0 && softclip(-5.0) < 1e-12);
        assert!((softclip(6.0) - 1.0).abs() < 1e-12);
        assert!((softclip(0.5) - 0.5).abs() < 1e-12);
        let h = 1e-6;
        for u in [-0.02, 0.0, 0.004, 0.5, 0.999, 1.01] {
            let fd = (softclip(u + h) - softclip(u - h)) / (2.0 * h);
            assert!((fd - softclip_grad(u)).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_colors_give_blank_image() {
        let g = small();
        let img = g.forward(&LatentCode::zeros(12, 8)).unwrap();
        // softclip(0) = w ln 2: blank up to the smoothing width
        let floor = softclip(0.0);
        assert!(img.as_slice().iter().all(|&v| v == floor));
        assert!(floor < SOFTCLIP_WIDTH);
        assert!(img.as_slice().iter().all(|&v| crate::io::quantize(v) <= 2));
    }

    #[test]
    fn forward_is_deterministic_and_in_range() {
        let g = small();
        let xi = random_code(12, 8, 3);
        let a = g.forward(&xi).unwrap();
        let b = g.forward(&xi).unwrap();
        assert_eq!(a, b);
        assert!(a.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
        let g2 = small();
        assert_eq!(g2.forward(&xi).unwrap(), a);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let g = small();
        assert!(g.forward(&LatentCode::zeros(11, 8)).is_err());
        assert!(g.vjp(&LatentCode::zeros(12, 8), &ImageGrid::zeros(3, 3)).is_err());
    }

    #[test]
    fn unconditional_generator_uses_fixed_colors() {
        let g = BlobGenerator::new(BlobGeneratorConfig {
            y_dim: 0,
            height: 16,
            width: 16,
            ..Default::default()
        })
        .unwrap();
        let img = g.forward(&random_code(12, 0, 1)).unwrap();
        assert!(img.as_slice().iter().any(|&v| v > 0.05));
    }

    #[test]
    fn vjp_matches_central_differences() {
        let g = small();
        for probe in 0..10 {
            let xi = random_code(12, 8, 100 + probe);
            let cot = random_image(20, 24, 200 + probe);
            let analytic = g.vjp(&xi, &cot).unwrap();
            let fd = central_fd_latent(&xi, 1e-4, |x| g.forward(x).unwrap().dot(&cot));
            let err = rel_err(&analytic.to_flat(), &fd.to_flat());
            assert!(err < 1e-4, "probe {probe}: rel err {err}");
        }
    }
}
