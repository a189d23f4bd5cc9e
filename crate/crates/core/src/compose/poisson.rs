//! Gradient-domain pasting. Inside the paste region each channel solves the
//! 5-point Poisson equation whose guidance field is the source gradient
//! between two region pixels and the background gradient across the region
//! edge; pixels outside the region are Dirichlet data from the background.

use serde::{Deserialize, Serialize};

use super::CompositionParams;
use crate::error::{Error, Result};
use crate::image::ImageGrid;
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoissonSettings {
    /// Stop once `|A u - b|_inf` falls below this.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for PoissonSettings {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iters: 10_000,
        }
    }
}

impl PoissonSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Config("compose.poisson.tol must be > 0".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("compose.poisson.max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PoissonResult {
    pub image: ImageGrid,
    /// False when some channel hit `max_iters` before reaching `tol`.
    pub converged: bool,
    /// Largest iteration count over the channels.
    pub iterations: usize,
    /// Largest final `|A u - b|_inf` over the channels.
    pub residual: f64,
    /// Per channel, `|r|_2` after every iteration (entry 0 is the start).
    pub residual_history: [Vec<f64>; 3],
}

/// The sparse system for one channel over an `h x w` region placed at
/// `(top, left)` inside a `bh x bw` background.
#[derive(Debug, Clone)]
pub struct PoissonSystem {
    h: usize,
    w: usize,
    /// Number of in-image neighbours of each unknown.
    degree: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl PoissonSystem {
    pub fn build(source: &ImageGrid, bg: &ImageGrid, top: usize, left: usize, ch: usize) -> Self {
        let (h, w) = source.dims();
        let (bh, bw) = bg.dims();
        let mut degree = vec![0.0; h * w];
        let mut rhs = vec![0.0; h * w];
        for r in 0..h {
            for c in 0..w {
                let (gr, gc) = (top + r, left + c);
                let mut b = 0.0;
                let mut d = 0.0;
                for (dr, dc) in [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)] {
                    let (nr, nc) = (gr as isize + dr, gc as isize + dc);
                    if nr < 0 || nc < 0 || nr >= bh as isize || nc >= bw as isize {
                        continue;
                    }
                    d += 1.0;
                    let (lr, lc) = (r as isize + dr, c as isize + dc);
                    if lr >= 0 && lc >= 0 && lr < h as isize && lc < w as isize {
                        b += source.get(r, c, ch) - source.get(lr as usize, lc as usize, ch);
                    } else {
                        // guidance (bg_p - bg_q) plus Dirichlet value bg_q
                        b += bg.get(gr, gc, ch);
                    }
                }
                degree[r * w + c] = d;
                rhs[r * w + c] = b;
            }
        }
        Self { h, w, degree, rhs }
    }

    pub fn len(&self) -> usize {
        self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `A u`: degree times the pixel minus its neighbours inside the region.
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        let (h, w) = (self.h, self.w);
        for r in 0..h {
            for c in 0..w {
                let i = r * w + c;
                let mut v = self.degree[i] * u[i];
                if r > 0 {
                    v -= u[i - w];
                }
                if r + 1 < h {
                    v -= u[i + w];
                }
                if c > 0 {
                    v -= u[i - 1];
                }
                if c + 1 < w {
                    v -= u[i + 1];
                }
                out[i] = v;
            }
        }
    }

    /// Dense copy of `A`, row-major.
    pub fn dense(&self) -> Vec<f64> {
        let n = self.len();
        let mut a = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            self.apply(&e, &mut col);
            for i in 0..n {
                a[i * n + j] = col[i];
            }
            e[j] = 0.0;
        }
        a
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

struct Solve {
    u: Vec<f64>,
    iterations: usize,
    residual: f64,
    converged: bool,
    history: Vec<f64>,
}

/// Conjugate residual iteration. The system is symmetric positive definite,
/// and unlike plain CG this minimizes `|r|_2` over each Krylov space, so the
/// recorded residual norms are non-increasing.
fn conjugate_residual(sys: &PoissonSystem, u0: Vec<f64>, settings: &PoissonSettings) -> Solve {
    let n = sys.len();
    let mut u = u0;
    let mut tmp = vec![0.0; n];
    sys.apply(&u, &mut tmp);
    let mut r: Vec<f64> = sys.rhs.iter().zip(&tmp).map(|(b, a)| b - a).collect();
    let mut history = vec![dot(&r, &r).sqrt()];
    let mut ar = vec![0.0; n];
    sys.apply(&r, &mut ar);
    let mut p = r.clone();
    let mut ap = ar.clone();
    let mut rar = dot(&r, &ar);
    let mut iterations = 0;
    while inf_norm(&r) >= settings.tol && iterations < settings.max_iters {
        let apap = dot(&ap, &ap);
        if apap == 0.0 {
            break;
        }
        let alpha = rar / apap;
        for i in 0..n {
            u[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        iterations += 1;
        history.push(dot(&r, &r).sqrt());
        sys.apply(&r, &mut ar);
        let rar_next = dot(&r, &ar);
        let beta = rar_next / rar;
        rar = rar_next;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
            ap[i] = ar[i] + beta * ap[i];
        }
    }
    // report the true residual, not the recursively updated one
    sys.apply(&u, &mut tmp);
    let residual = inf_norm(&sys.rhs.iter().zip(&tmp).map(|(b, a)| b - a).collect::<Vec<_>>());
    Solve {
        u,
        iterations,
        residual,
        converged: residual < settings.tol,
        history,
    }
}

/// Blends `fg_scaled` (already resampled to the paste region) into `bg`.
/// The solve starts from the background, so a source equal to the
/// background region returns the background unchanged.
pub fn poisson_blend(
    fg_scaled: &ImageGrid,
    bg: &ImageGrid,
    params: &CompositionParams,
    settings: &PoissonSettings,
) -> Result<PoissonResult> {
    settings.validate().map_err(|e| Error::InvalidParams(e.to_string()))?;
    let region = params.region(bg.dims())?;
    if fg_scaled.dims() != (region.height, region.width) {
        return Err(Error::mismatch(
            "poisson source",
            format!("{}x{}", region.height, region.width),
            format!("{}x{}", fg_scaled.height(), fg_scaled.width()),
        ));
    }
    if (region.height, region.width) == bg.dims() {
        return Err(Error::InvalidParams(
            "poisson region covers the whole background; no boundary values".into(),
        ));
    }
    let start = bg.window(region.top, region.left, region.height, region.width);
    let solves = par::map_range(3, |ch| {
        let sys = PoissonSystem::build(fg_scaled, bg, region.top, region.left, ch);
        let u0 = (0..sys.len()).map(|i| start.as_slice()[i * 3 + ch]).collect();
        conjugate_residual(&sys, u0, settings)
    });
    let mut patch = ImageGrid::zeros(region.height, region.width);
    for (ch, s) in solves.iter().enumerate() {
        for (i, v) in s.u.iter().enumerate() {
            patch.as_mut_slice()[i * 3 + ch] = v.clamp(0.0, 1.0);
        }
    }
    let mut image = bg.clone();
    image.paste(&patch, region.top, region.left);
    let [h0, h1, h2] = [0, 1, 2].map(|c| solves[c].history.clone());
    Ok(PoissonResult {
        image,
        converged: solves.iter().all(|s| s.converged),
        iterations: solves.iter().map(|s| s.iterations).max().unwrap_or(0),
        residual: solves.iter().map(|s| s.residual).fold(0.0, f64::max),
        residual_history: [h0, h1, h2],
    })
}
