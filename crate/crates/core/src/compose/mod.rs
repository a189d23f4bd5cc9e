//! Two-layer composed generation: a foreground image is downscaled and
//! pasted over a background image, both generated from their own basis
//! ensembles. The score of the fused image is the primary objective and the
//! perceptual gap between the pasted foreground and the background it
//! covers is the secondary one.

mod perceptual;
mod poisson;

pub use perceptual::{perceptual_loss, perceptual_loss_grad, PerceptualSettings};
pub use poisson::{poisson_blend, PoissonResult, PoissonSettings, PoissonSystem};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::augment::{augclip_estimate, augclip_score, AugSpec};
use crate::dbgd::{bilevel_descent, BiEval, DirectionRule, Stepper};
use crate::error::{Error, Result};
use crate::genscore::{generate, Generator, Scorer, TextEmbedding};
use crate::image::{ImageGrid, Resample2d};
use crate::latent::BasisEnsemble;
use crate::optim::OptimSettings;
use crate::par;
use crate::trace::ScoreTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VPos {
    Top,
    Center,
    Bottom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HPos {
    Left,
    Center,
    Right,
}

/// Axis offset of a `d`-long span inside `full`: start, centre (floored) or end.
fn offset(full: usize, d: usize, at: usize) -> usize {
    match at {
        0 => 0,
        1 => (full - d) / 2,
        _ => full - d,
    }
}

/// One of the nine paste anchors. Serialized as `"top_left"`, `"center"`,
/// `"bottom_right"` and so on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Position {
    pub v: VPos,
    pub h: HPos,
}

impl Position {
    pub const fn new(v: VPos, h: HPos) -> Self {
        Self { v, h }
    }

    /// Row-major over `{top, center, bottom} x {left, center, right}`.
    pub fn all() -> [Position; 9] {
        let vs = [VPos::Top, VPos::Center, VPos::Bottom];
        let hs = [HPos::Left, HPos::Center, HPos::Right];
        std::array::from_fn(|i| Position::new(vs[i / 3], hs[i % 3]))
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = match self.v {
            VPos::Top => "top",
            VPos::Center => "center",
            VPos::Bottom => "bottom",
        };
        let h = match self.h {
            HPos::Left => "left",
            HPos::Center => "center",
            HPos::Right => "right",
        };
        if self.v == VPos::Center && self.h == HPos::Center {
            f.write_str("center")
        } else {
            write!(f, "{v}_{h}")
        }
    }
}

impl FromStr for Position {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Position::all()
            .into_iter()
            .find(|p| p.to_string() == s)
            .ok_or_else(|| Error::Config(format!("unknown position {s:?}")))
    }
}

impl TryFrom<String> for Position {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Position> for String {
    fn from(p: Position) -> String {
        p.to_string()
    }
}

/// Paste rectangle in background coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Region {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompositionParams {
    pub alpha: f64,
    pub position: Position,
}

impl CompositionParams {
    pub fn new(alpha: f64, position: Position) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidParams(format!("alpha must be in (0, 1], got {alpha}")));
        }
        Ok(Self { alpha, position })
    }

    /// The `floor(alpha H) x floor(alpha W)` paste region.
    pub fn region(&self, dims: (usize, usize)) -> Result<Region> {
        let (h, w) = dims;
        let (dh, dw) = (
            (self.alpha * h as f64).floor() as usize,
            (self.alpha * w as f64).floor() as usize,
        );
        if dh < 1 || dw < 1 {
            return Err(Error::InvalidParams(format!(
                "alpha {} scales {h}x{w} below one pixel",
                self.alpha
            )));
        }
        let v = self.position.v as usize;
        let hh = self.position.h as usize;
        Ok(Region {
            top: offset(h, dh, v),
            left: offset(w, dw, hh),
            height: dh,
            width: dw,
        })
    }

    fn resampler(&self, fg_dims: (usize, usize), bg_dims: (usize, usize)) -> Result<(Region, Resample2d)> {
        let r = self.region(bg_dims)?;
        Ok((r, Resample2d::scale_to(fg_dims, (r.height, r.width))))
    }
}

impl fmt::Display for CompositionParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.alpha, self.position)
    }
}

/// The foreground resampled to the paste region.
pub fn scaled_foreground(fg: &ImageGrid, bg_dims: (usize, usize), params: &CompositionParams) -> Result<ImageGrid> {
    let (_, rs) = params.resampler(fg.dims(), bg_dims)?;
    Ok(rs.apply(fg))
}

pub fn fuse(fg: &ImageGrid, bg: &ImageGrid, params: &CompositionParams) -> Result<ImageGrid> {
    let (r, rs) = params.resampler(fg.dims(), bg.dims())?;
    let mut out = bg.clone();
    out.paste(&rs.apply(fg), r.top, r.left);
    Ok(out)
}

/// Gradients of `<cot, fuse(fg, bg)>` w.r.t. `fg` and `bg`.
pub fn fuse_vjp(
    cot: &ImageGrid,
    fg_dims: (usize, usize),
    params: &CompositionParams,
) -> Result<(ImageGrid, ImageGrid)> {
    let (r, rs) = params.resampler(fg_dims, cot.dims())?;
    let g_fg = rs.transpose_apply(&cot.window(r.top, r.left, r.height, r.width));
    let mut g_bg = cot.clone();
    g_bg.paste(&ImageGrid::zeros(r.height, r.width), r.top, r.left);
    Ok((g_fg, g_bg))
}

/// The part of `bg` that [`fuse`] overwrites.
pub fn crop(bg: &ImageGrid, params: &CompositionParams) -> Result<ImageGrid> {
    let r = params.region(bg.dims())?;
    Ok(bg.window(r.top, r.left, r.height, r.width))
}

pub fn crop_vjp(cot: &ImageGrid, bg_dims: (usize, usize), params: &CompositionParams) -> Result<ImageGrid> {
    let r = params.region(bg_dims)?;
    if cot.dims() != (r.height, r.width) {
        return Err(Error::mismatch(
            "crop cotangent",
            format!("{}x{}", r.height, r.width),
            format!("{}x{}", cot.height(), cot.width()),
        ));
    }
    let mut g = ImageGrid::zeros(bg_dims.0, bg_dims.1);
    g.paste(cot, r.top, r.left);
    Ok(g)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuseState {
    pub fg: BasisEnsemble,
    pub bg: BasisEnsemble,
    pub params: CompositionParams,
}

impl FuseState {
    /// Foreground parameters followed by background parameters.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.fg.to_flat();
        v.extend(self.bg.to_flat());
        v
    }

    pub fn with_flat(&self, flat: &[f64]) -> Result<Self> {
        let n = self.fg.param_len();
        if flat.len() != n + self.bg.param_len() {
            return Err(Error::mismatch("fuse parameters", n + self.bg.param_len(), flat.len()));
        }
        Ok(Self {
            fg: self.fg.with_flat(&flat[..n])?,
            bg: self.bg.with_flat(&flat[n..])?,
            params: self.params,
        })
    }

    pub fn images(&self, gen: &dyn Generator) -> Result<(ImageGrid, ImageGrid)> {
        Ok((
            generate(gen, &self.fg.effective_code())?,
            generate(gen, &self.bg.effective_code())?,
        ))
    }

    pub fn fused(&self, gen: &dyn Generator) -> Result<ImageGrid> {
        let (f, b) = self.images(gen)?;
        fuse(&f, &b, &self.params)
    }
}

/// Both objectives at one state, with gradients over [`FuseState::to_flat`].
/// The loss compares the pasted (downscaled) foreground with the background
/// patch it replaces.
pub fn fuse_objectives(
    gen: &dyn Generator,
    scorer: &dyn Scorer,
    text: &TextEmbedding,
    state: &FuseState,
    per: &PerceptualSettings,
    aug: &AugSpec,
) -> Result<(BiEval, ImageGrid)> {
    let p = &state.params;
    let (code_fg, code_bg) = (state.fg.effective_code(), state.bg.effective_code());
    let img_fg = generate(gen, &code_fg)?;
    let img_bg = generate(gen, &code_bg)?;
    let (r, rs) = p.resampler(img_fg.dims(), img_bg.dims())?;

    let mut fused = img_bg.clone();
    let small = rs.apply(&img_fg);
    fused.paste(&small, r.top, r.left);
    let (s, g_fused) = augclip_estimate(scorer, text, &fused, aug)?;
    let (gs_fg, gs_bg) = fuse_vjp(&g_fused, img_fg.dims(), p)?;

    let patch = img_bg.window(r.top, r.left, r.height, r.width);
    let (l, gl_small, gl_patch) = perceptual_loss_grad(&small, &patch, per)?;
    let gl_fg = rs.transpose_apply(&gl_small);
    let gl_bg = crop_vjp(&gl_patch, img_bg.dims(), p)?;

    let pull =
        |ens: &BasisEnsemble, code, cot: &ImageGrid| -> Result<Vec<f64>> { Ok(ens.pullback(&gen.vjp(code, cot)?)) };
    let mut grad_s = pull(&state.fg, &code_fg, &gs_fg)?;
    grad_s.extend(pull(&state.bg, &code_bg, &gs_bg)?);
    let mut grad_l = pull(&state.fg, &code_fg, &gl_fg)?;
    grad_l.extend(pull(&state.bg, &code_bg, &gl_bg)?);
    Ok((BiEval { s, grad_s, l, grad_l }, fused))
}

/// Everything a single composition run needs besides the models.
#[derive(Debug, Clone)]
pub struct ComposeRun {
    pub opt: OptimSettings,
    pub rule: DirectionRule,
    pub per: PerceptualSettings,
    /// Augmentations for step `t` come from `aug.at_step(t)`.
    pub aug: AugSpec,
}

#[derive(Debug, Clone)]
pub struct ComposeOutcome {
    pub state: FuseState,
    pub trace: ScoreTrace,
    /// Fused image before blending.
    pub fused: ImageGrid,
}

/// Runs the bi-level descent over both ensembles with the composition
/// parameters held fixed.
pub fn compose_optimize(
    gen: &dyn Generator,
    scorer: &dyn Scorer,
    text: &TextEmbedding,
    init: FuseState,
    run: &ComposeRun,
) -> Result<ComposeOutcome> {
    let eval = |x: &[f64], t: usize| {
        let st = init.with_flat(x)?;
        fuse_objectives(gen, scorer, text, &st, &run.per, &run.aug.at_step(t as u64)).map(|(e, _)| e)
    };
    let (x, trace) = bilevel_descent(
        eval,
        init.to_flat(),
        run.rule,
        Stepper::Adam(run.opt.adam()),
        run.opt.iters,
    )?;
    let state = init.with_flat(&x)?;
    let fused = state.fused(gen)?;
    Ok(ComposeOutcome { state, trace, fused })
}

#[derive(Debug, Clone)]
pub struct GridCandidate {
    pub params: CompositionParams,
    pub outcome: ComposeOutcome,
    /// Score of the final fused image under the shared evaluation stream.
    pub final_score: f64,
}

#[derive(Debug, Clone)]
pub struct GridSearch {
    pub candidates: Vec<GridCandidate>,
    pub best: usize,
}

impl GridSearch {
    pub fn winner(&self) -> &GridCandidate {
        &self.candidates[self.best]
    }
}

/// Optimizes every candidate in `gamma` from the same initial ensembles and
/// keeps the highest re-evaluated score; ties go to the earliest candidate.
/// Candidate `i` draws its training augmentations from
/// `run.aug.stream.derive(i)`, so results do not depend on scheduling.
#[allow(clippy::too_many_arguments)]
pub fn grid_search_compose(
    gen: &dyn Generator,
    scorer: &dyn Scorer,
    text: &TextEmbedding,
    fg: &BasisEnsemble,
    bg: &BasisEnsemble,
    gamma: &[CompositionParams],
    run: &ComposeRun,
    eval_aug: &AugSpec,
) -> Result<GridSearch> {
    if gamma.is_empty() {
        return Err(Error::InvalidParams("composition grid is empty".into()));
    }
    let candidates = par::try_map_range(gamma.len(), |i| {
        let mut r = run.clone();
        r.aug.stream = run.aug.stream.derive(i as u64);
        let init = FuseState {
            fg: fg.clone(),
            bg: bg.clone(),
            params: gamma[i],
        };
        let outcome = compose_optimize(gen, scorer, text, init, &r)?;
        let final_score = augclip_score(scorer, text, &outcome.fused, eval_aug)?;
        Ok::<_, Error>(GridCandidate {
            params: gamma[i],
            outcome,
            final_score,
        })
    })?;
    let mut best = 0;
    for (i, c) in candidates.iter().enumerate() {
        if c.final_score > candidates[best].final_score {
            best = i;
        }
    }
    Ok(GridSearch { candidates, best })
}

/// The `compose.*` configuration block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ComposeConfig {
    pub alphas: Vec<f64>,
    pub positions: Vec<Position>,
    pub per: PerceptualSettings,
    pub poisson: PoissonSettings,
}

impl Default for ComposeConfig {
    fn default() -> Self {
        Self {
            alphas: vec![0.65, 0.5],
            positions: Position::all().to_vec(),
            per: PerceptualSettings::default(),
            poisson: PoissonSettings::default(),
        }
    }
}

impl ComposeConfig {
    /// Alpha-major enumeration of the candidate grid.
    pub fn gamma(&self) -> Result<Vec<CompositionParams>> {
        let mut out = Vec::with_capacity(self.alphas.len() * self.positions.len());
        for &a in &self.alphas {
            for &p in &self.positions {
                out.push(CompositionParams::new(a, p).map_err(|e| Error::Config(e.to_string()))?);
            }
        }
        Ok(out)
    }

    pub fn validate(&self, dims: (usize, usize)) -> Result<()> {
        let gamma = self.gamma()?;
        if gamma.is_empty() {
            return Err(Error::Config(
                "compose.alphas and compose.positions must be non-empty".into(),
            ));
        }
        for g in &gamma {
            g.region(dims).map_err(|e| Error::Config(e.to_string()))?;
        }
        self.per.validate()?;
        self.poisson.validate()
    }
}
