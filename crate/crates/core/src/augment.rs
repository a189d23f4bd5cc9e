//! Differentiable random augmentations and the augmentation-averaged score.
//!
//! Every stage is affine in the pixel values once its parameters are drawn,
//! so the vector-Jacobian product of a drawn pipeline depends only on the
//! parameters. Stages always run in the order color, translate, resize,
//! cutout.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genscore::{Scorer, TextEmbedding};
use crate::image::{ImageGrid, Resample1d, Resample2d};
use crate::par;
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugKind {
    Color,
    Translate,
    Resize,
    Cutout,
}

impl AugKind {
    pub const ALL: [AugKind; 4] = [AugKind::Color, AugKind::Translate, AugKind::Resize, AugKind::Cutout];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ColorRanges {
    /// Per-channel brightness offsets are drawn from `[-brightness, brightness]`.
    pub brightness: f64,
    /// Contrast scale range, applied around the image mean.
    pub contrast: [f64; 2],
}

impl Default for ColorRanges {
    fn default() -> Self {
        Self {
            brightness: 0.2,
            contrast: [0.5, 1.5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TranslateRanges {
    /// Largest shift as a fraction of the image side (floored to pixels).
    pub max_frac: f64,
}

impl Default for TranslateRanges {
    fn default() -> Self {
        Self { max_frac: 0.125 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResizeRanges {
    pub range: [f64; 2],
}

impl Default for ResizeRanges {
    fn default() -> Self {
        Self { range: [0.75, 1.25] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CutoutRanges {
    /// Box side as a fraction of `min(H, W)` (floored to pixels).
    pub frac: f64,
}

impl Default for CutoutRanges {
    fn default() -> Self {
        Self { frac: 0.25 }
    }
}

/// The `aug.*` configuration block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugConfig {
    pub enabled: BTreeSet<AugKind>,
    pub n_draws: usize,
    pub color: ColorRanges,
    pub translate: TranslateRanges,
    pub resize: ResizeRanges,
    pub cutout: CutoutRanges,
}

impl Default for AugConfig {
    fn default() -> Self {
        Self {
            enabled: AugKind::ALL.into_iter().collect(),
            n_draws: 16,
            color: ColorRanges::default(),
            translate: TranslateRanges::default(),
            resize: ResizeRanges::default(),
            cutout: CutoutRanges::default(),
        }
    }
}

impl AugConfig {
    pub fn disabled() -> Self {
        Self {
            enabled: BTreeSet::new(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_draws == 0 {
            return bad("aug.n_draws must be >= 1".into());
        }
        let [c0, c1] = self.color.contrast;
        if !(self.color.brightness >= 0.0 && c0 > 0.0 && c1 >= c0) {
            return bad("aug.color ranges invalid".into());
        }
        if !(0.0..1.0).contains(&self.translate.max_frac) {
            return bad("aug.translate.max_frac must be in [0, 1)".into());
        }
        let [r0, r1] = self.resize.range;
        if !(r0 > 0.0 && r1 >= r0) {
            return bad("aug.resize.range invalid".into());
        }
        if !(0.0..=1.0).contains(&self.cutout.frac) {
            return bad("aug.cutout.frac must be in [0, 1]".into());
        }
        Ok(())
    }

    /// Spec bound to a particular random stream.
    pub fn spec(&self, stream: RngStream) -> AugSpec {
        AugSpec {
            config: self.clone(),
            stream,
        }
    }
}

/// Augmentation configuration plus the stream its draws come from.
#[derive(Debug, Clone, PartialEq)]
pub struct AugSpec {
    pub config: AugConfig,
    pub stream: RngStream,
}

impl AugSpec {
    /// Same configuration, fresh draws for optimizer step `step`.
    pub fn at_step(&self, step: u64) -> AugSpec {
        AugSpec {
            config: self.config.clone(),
            stream: self.stream.derive(step),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.config.enabled.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorParams {
    pub brightness: [f64; 3],
    pub contrast: f64,
}

/// Axis-aligned box zeroed by the cutout stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CutoutBox {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

/// One fully drawn augmentation. `None` stages are skipped.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AugmentationParams {
    pub color: Option<ColorParams>,
    /// `(dy, dx)`: content moves down/right by this many pixels.
    pub translate: Option<(i64, i64)>,
    pub resize: Option<f64>,
    pub cutout: Option<CutoutBox>,
}

impl AugmentationParams {
    pub fn identity() -> Self {
        Self::default()
    }

    /// Draws parameters for every enabled stage from `rng`.
    pub fn sample(config: &AugConfig, dims: (usize, usize), rng: &mut impl Rng) -> Self {
        let (h, w) = dims;
        let en = |k| config.enabled.contains(&k);
        let mut p = Self::identity();
        if en(AugKind::Color) {
            let b = config.color.brightness;
            let [c0, c1] = config.color.contrast;
            let brightness = std::array::from_fn(|_| rng.random_range(-b..=b));
            p.color = Some(ColorParams {
                brightness,
                contrast: rng.random_range(c0..=c1),
            });
        }
        if en(AugKind::Translate) {
            let my = (config.translate.max_frac * h as f64).floor() as i64;
            let mx = (config.translate.max_frac * w as f64).floor() as i64;
            p.translate = Some((rng.random_range(-my..=my), rng.random_range(-mx..=mx)));
        }
        if en(AugKind::Resize) {
            let [r0, r1] = config.resize.range;
            p.resize = Some(rng.random_range(r0..=r1));
        }
        if en(AugKind::Cutout) {
            let side = (config.cutout.frac * h.min(w) as f64).floor() as usize;
            if side > 0 {
                p.cutout = Some(CutoutBox {
                    top: rng.random_range(0..=h - side),
                    left: rng.random_range(0..=w - side),
                    height: side,
                    width: side,
                });
            }
        }
        p
    }

    pub fn apply(&self, image: &ImageGrid) -> ImageGrid {
        let mut img = image.clone();
        if let Some(c) = self.color {
            if c.contrast == 1.0 {
                for (i, v) in img.as_mut_slice().iter_mut().enumerate() {
                    *v += c.brightness[i % 3];
                }
            } else {
                let mu = img.mean();
                for (i, v) in img.as_mut_slice().iter_mut().enumerate() {
                    *v = c.contrast * (*v - mu) + mu + c.brightness[i % 3];
                }
            }
        }
        if let Some((dy, dx)) = self.translate {
            img = shift(&img, dy, dx);
        }
        if let Some(r) = self.resize {
            img = resize_op(img.dims(), r).apply(&img);
        }
        if let Some(b) = self.cutout {
            zero_box(&mut img, b);
        }
        img
    }

    /// Gradient w.r.t. the input image of `<cotangent, apply(image)>`.
    pub fn vjp(&self, cotangent: &ImageGrid) -> ImageGrid {
        let mut g = cotangent.clone();
        if let Some(b) = self.cutout {
            zero_box(&mut g, b);
        }
        if let Some(r) = self.resize {
            g = resize_op(g.dims(), r).transpose_apply(&g);
        }
        if let Some((dy, dx)) = self.translate {
            g = shift(&g, -dy, -dx);
        }
        if let Some(c) = self.color {
            let mean_g = g.mean();
            for v in g.as_mut_slice() {
                *v = c.contrast * *v + (1.0 - c.contrast) * mean_g;
            }
        }
        g
    }
}

fn shift(img: &ImageGrid, dy: i64, dx: i64) -> ImageGrid {
    let (h, w) = img.dims();
    let mut out = ImageGrid::zeros(h, w);
    for r in 0..h as i64 {
        let sr = r - dy;
        if sr < 0 || sr >= h as i64 {
            continue;
        }
        for c in 0..w as i64 {
            let sc = c - dx;
            if sc < 0 || sc >= w as i64 {
                continue;
            }
            for ch in 0..3 {
                out.set(r as usize, c as usize, ch, img.get(sr as usize, sc as usize, ch));
            }
        }
    }
    out
}

/// Zoom by `scale` about the image centre, keeping the frame size:
/// output `i` samples input `(i - c) / scale + c` bilinearly, zero outside.
fn resize_op(dims: (usize, usize), scale: f64) -> Resample2d {
    let axis = |n: usize| {
        let c = (n as f64 - 1.0) / 2.0;
        Resample1d::from_coords(n, (0..n).map(|i| (i as f64 - c) / scale + c))
    };
    Resample2d {
        rows: axis(dims.0),
        cols: axis(dims.1),
    }
}

fn zero_box(img: &mut ImageGrid, b: CutoutBox) {
    let (h, w) = img.dims();
    for r in b.top..(b.top + b.height).min(h) {
        for c in b.left..(b.left + b.width).min(w) {
            for ch in 0..3 {
                img.set(r, c, ch, 0.0);
            }
        }
    }
}

/// Score and image-gradient averaged over explicitly given augmentations.
pub fn augclip_with_params(
    scorer: &dyn Scorer,
    text: &TextEmbedding,
    image: &ImageGrid,
    params: &[AugmentationParams],
) -> Result<(f64, ImageGrid)> {
    if params.is_empty() {
        return Err(Error::InvalidParams("need at least one augmentation draw".into()));
    }
    let draws = par::try_map_range(params.len(), |j| {
        let p = &params[j];
        let (s, g) = scorer.score_and_grad(text, &p.apply(image))?;
        Ok::<_, Error>((s, p.vjp(&g)))
    })?;
    reduce_draws(image.dims(), draws)
}

fn reduce_draws(dims: (usize, usize), draws: Vec<(f64, ImageGrid)>) -> Result<(f64, ImageGrid)> {
    let n = draws.len() as f64;
    let (scores, grads): (Vec<f64>, Vec<Vec<f64>>) = draws.into_iter().map(|(s, g)| (s, g.into_vec())).unzip();
    let s = par::tree_sum(&scores) / n;
    let g: Vec<f64> = par::tree_sum_vecs(&grads).into_iter().map(|v| v / n).collect();
    Ok((s, ImageGrid::from_vec(dims.0, dims.1, g)?))
}

/// Draws used by [`augclip_estimate`]: draw `j` comes from stream
/// `spec.stream.derive(j)`.
pub fn draw_params(spec: &AugSpec, dims: (usize, usize)) -> Vec<AugmentationParams> {
    (0..spec.config.n_draws)
        .map(|j| {
            let mut rng = spec.stream.derive(j as u64).rng();
            AugmentationParams::sample(&spec.config, dims, &mut rng)
        })
        .collect()
}

/// Monte Carlo estimate of the augmentation-averaged score and its image
/// gradient. With nothing enabled this is exactly the plain score.
pub fn augclip_estimate(
    scorer: &dyn Scorer,
    text: &TextEmbedding,
    image: &ImageGrid,
    spec: &AugSpec,
) -> Result<(f64, ImageGrid)> {
    if spec.config.n_draws == 0 {
        return Err(Error::InvalidParams("aug n_draws must be >= 1".into()));
    }
    if spec.is_identity() {
        return scorer.score_and_grad(text, image);
    }
    augclip_with_params(scorer, text, image, &draw_params(spec, image.dims()))
}

/// Score-only convenience wrapper.
pub fn augclip_score(scorer: &dyn Scorer, text: &TextEmbedding, image: &ImageGrid, spec: &AugSpec) -> Result<f64> {
    augclip_estimate(scorer, text, image, spec).map(|(s, _)| s)
}
