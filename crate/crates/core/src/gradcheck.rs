//! Central finite-difference helpers used to validate every hand-written
//! vector-Jacobian product, plus seeded random probes.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::image::ImageGrid;
use crate::latent::LatentCode;
use crate::rng::RngStream;

/// `|a - b| / max(|a|, |b|)` in the Euclidean norm; 0 when both vanish.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let denom = na.max(nb);
    if denom == 0.0 {
        0.0
    } else {
        diff / denom
    }
}

/// Central-difference gradient of a scalar function of a flat vector.
pub fn central_fd(x: &[f64], h: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = xp[i];
            xp[i] = orig + h;
            let fp = f(&xp);
            xp[i] = orig - h;
            let fm = f(&xp);
            xp[i] = orig;
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

pub fn central_fd_latent(code: &LatentCode, h: f64, f: impl Fn(&LatentCode) -> f64) -> LatentCode {
    let zd = code.z.len();
    let g = central_fd(&code.to_flat(), h, |x| f(&LatentCode::from_flat(x, zd)));
    LatentCode::from_flat(&g, zd)
}

pub fn central_fd_image(img: &ImageGrid, h: f64, f: impl Fn(&ImageGrid) -> f64) -> ImageGrid {
    let (hh, ww) = img.dims();
    let g = central_fd(img.as_slice(), h, |x| {
        f(&ImageGrid::from_vec(hh, ww, x.to_vec()).expect("same shape"))
    });
    ImageGrid::from_vec(hh, ww, g).expect("same shape")
}

/// Directional derivative along `dir` by central differences.
pub fn directional_fd(x: &[f64], dir: &[f64], h: f64, f: impl Fn(&[f64]) -> f64) -> f64 {
    let xp: Vec<f64> = x.iter().zip(dir).map(|(a, d)| a + h * d).collect();
    let xm: Vec<f64> = x.iter().zip(dir).map(|(a, d)| a - h * d).collect();
    (f(&xp) - f(&xm)) / (2.0 * h)
}

/// Standard normal code with `z` truncated to `[-2, 2]`.
pub fn random_code(z_dim: usize, y_dim: usize, seed: u64) -> LatentCode {
    LatentCode::sample_gaussian(z_dim, y_dim, RngStream::new(seed, 0x7072_6f62), 2.0)
}

/// Uniform `[0, 1)` pixels.
pub fn random_image(height: usize, width: usize, seed: u64) -> ImageGrid {
    let mut rng = RngStream::new(seed, 0x696d_6167).rng();
    let data = (0..height * width * 3).map(|_| rng.random::<f64>()).collect();
    ImageGrid::from_vec(height, width, data).expect("shape")
}

pub fn random_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = RngStream::new(seed, 0x7665_6374).rng();
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}
