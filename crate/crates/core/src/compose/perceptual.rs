//! Multi-scale local-statistics dissimilarity standing in for a learned
//! perceptual metric. Each pyramid level contributes the mean over windows
//! and channels of `(mu_a - mu_b)^2 + (sd_a - sd_b)^2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageGrid;

const SD_EPS: f64 = 1e-6;
const BINOMIAL: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerceptualSettings {
    pub levels: usize,
    /// Side of the square statistics window.
    pub window: usize,
    /// Per-level weights; `None` means `1 / levels` each.
    pub weights: Option<Vec<f64>>,
}

impl Default for PerceptualSettings {
    fn default() -> Self {
        Self {
            levels: 3,
            window: 4,
            weights: None,
        }
    }
}

impl PerceptualSettings {
    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 {
            return Err(Error::Config("compose.per.levels must be >= 1".into()));
        }
        if self.window == 0 {
            return Err(Error::Config("compose.per.window must be >= 1".into()));
        }
        if let Some(w) = &self.weights {
            if w.len() != self.levels || w.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                return Err(Error::Config(
                    "compose.per.weights must have one non-negative entry per level".into(),
                ));
            }
        }
        Ok(())
    }

    fn weight(&self, level: usize) -> f64 {
        match &self.weights {
            Some(w) => w[level],
            None => 1.0 / self.levels as f64,
        }
    }
}

/// Separable 5-tap binomial blur (edge-replicated) followed by keeping even
/// rows and columns.
fn reduce(img: &ImageGrid) -> ImageGrid {
    let (h, w) = img.dims();
    let (oh, ow) = (h.div_ceil(2), w.div_ceil(2));
    let mut out = ImageGrid::zeros(oh, ow);
    for or in 0..oh {
        for oc in 0..ow {
            for ch in 0..3 {
                let mut acc = 0.0;
                for (i, wr) in BINOMIAL.iter().enumerate() {
                    let r = clamp_index(2 * or as isize + i as isize - 2, h);
                    for (j, wc) in BINOMIAL.iter().enumerate() {
                        let c = clamp_index(2 * oc as isize + j as isize - 2, w);
                        acc += wr * wc * img.get(r, c, ch);
                    }
                }
                out.set(or, oc, ch, acc);
            }
        }
    }
    out
}

/// Transpose of [`reduce`] for an input of the given dims.
fn reduce_transpose(cot: &ImageGrid, dims: (usize, usize)) -> ImageGrid {
    let (h, w) = dims;
    let mut out = ImageGrid::zeros(h, w);
    let (oh, ow) = cot.dims();
    for or in 0..oh {
        for oc in 0..ow {
            for ch in 0..3 {
                let g = cot.get(or, oc, ch);
                for (i, wr) in BINOMIAL.iter().enumerate() {
                    let r = clamp_index(2 * or as isize + i as isize - 2, h);
                    for (j, wc) in BINOMIAL.iter().enumerate() {
                        let c = clamp_index(2 * oc as isize + j as isize - 2, w);
                        let v = out.get(r, c, ch) + wr * wc * g;
                        out.set(r, c, ch, v);
                    }
                }
            }
        }
    }
    out
}

fn clamp_index(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

fn pyramid(img: &ImageGrid, levels: usize) -> Vec<ImageGrid> {
    let mut out = vec![img.clone()];
    for _ in 1..levels {
        let next = reduce(out.last().unwrap());
        out.push(next);
    }
    out
}

/// Window boundaries along one axis; the last window absorbs any remainder.
fn spans(n: usize, window: usize) -> Vec<(usize, usize)> {
    let count = (n / window).max(1);
    (0..count)
        .map(|i| {
            let start = i * window;
            let end = if i + 1 == count { n } else { start + window };
            (start, end)
        })
        .collect()
}

struct WindowStats {
    mean: f64,
    sd: f64,
}

fn stats(img: &ImageGrid, rs: (usize, usize), cs: (usize, usize), ch: usize) -> WindowStats {
    let n = ((rs.1 - rs.0) * (cs.1 - cs.0)) as f64;
    let mut sum = 0.0;
    for r in rs.0..rs.1 {
        for c in cs.0..cs.1 {
            sum += img.get(r, c, ch);
        }
    }
    let mean = sum / n;
    let mut ss = 0.0;
    for r in rs.0..rs.1 {
        for c in cs.0..cs.1 {
            ss += (img.get(r, c, ch) - mean).powi(2);
        }
    }
    WindowStats {
        mean,
        sd: (ss / n + SD_EPS).sqrt(),
    }
}

/// Loss of one level plus its gradient w.r.t. `a` (the gradient w.r.t. `b`
/// follows by symmetry).
fn level_loss(a: &ImageGrid, b: &ImageGrid, window: usize, want_grad: bool) -> (f64, Option<ImageGrid>) {
    let (h, w) = a.dims();
    let (rows, cols) = (spans(h, window), spans(w, window));
    let count = (rows.len() * cols.len() * 3) as f64;
    let mut loss = 0.0;
    let mut grad = want_grad.then(|| ImageGrid::zeros(h, w));
    for &rs in &rows {
        for &cs in &cols {
            let n = ((rs.1 - rs.0) * (cs.1 - cs.0)) as f64;
            for ch in 0..3 {
                let sa = stats(a, rs, cs, ch);
                let sb = stats(b, rs, cs, ch);
                let dm = sa.mean - sb.mean;
                let ds = sa.sd - sb.sd;
                loss += dm * dm + ds * ds;
                if let Some(g) = grad.as_mut() {
                    for r in rs.0..rs.1 {
                        for c in cs.0..cs.1 {
                            let x = a.get(r, c, ch);
                            let d = 2.0 * dm / n + 2.0 * ds * (x - sa.mean) / (n * sa.sd);
                            g.set(r, c, ch, d / count);
                        }
                    }
                }
            }
        }
    }
    (loss / count, grad)
}

fn check(a: &ImageGrid, b: &ImageGrid, settings: &PerceptualSettings) -> Result<()> {
    a.same_dims(b, "perceptual loss operands")?;
    settings.validate().map_err(|e| Error::InvalidParams(e.to_string()))
}

pub fn perceptual_loss(a: &ImageGrid, b: &ImageGrid, settings: &PerceptualSettings) -> Result<f64> {
    check(a, b, settings)?;
    let (pa, pb) = (pyramid(a, settings.levels), pyramid(b, settings.levels));
    Ok((0..settings.levels)
        .map(|l| settings.weight(l) * level_loss(&pa[l], &pb[l], settings.window, false).0)
        .sum())
}

/// Loss together with its gradients w.r.t. `a` and `b`.
pub fn perceptual_loss_grad(
    a: &ImageGrid,
    b: &ImageGrid,
    settings: &PerceptualSettings,
) -> Result<(f64, ImageGrid, ImageGrid)> {
    check(a, b, settings)?;
    let (pa, pb) = (pyramid(a, settings.levels), pyramid(b, settings.levels));
    let mut loss = 0.0;
    let mut cot_a: Option<ImageGrid> = None;
    let mut cot_b: Option<ImageGrid> = None;
    // walk coarse to fine so each level's cotangent is pushed down once
    for l in (0..settings.levels).rev() {
        let wl = settings.weight(l);
        let (la, ga) = level_loss(&pa[l], &pb[l], settings.window, true);
        let (_, gb) = level_loss(&pb[l], &pa[l], settings.window, true);
        loss += wl * la;
        let mut ga = ga.unwrap();
        let mut gb = gb.unwrap();
        ga.scale(wl);
        gb.scale(wl);
        if let Some(up) = cot_a.take() {
            ga.add_scaled(&reduce_transpose(&up, pa[l].dims()), 1.0);
        }
        if let Some(up) = cot_b.take() {
            gb.add_scaled(&reduce_transpose(&up, pb[l].dims()), 1.0);
        }
        cot_a = Some(ga);
        cot_b = Some(gb);
    }
    Ok((loss, cot_a.unwrap(), cot_b.unwrap()))
}
