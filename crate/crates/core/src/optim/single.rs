use super::{l2, AdamState, OptimSettings};
use crate::augment::{augclip_estimate, AugSpec};
use crate::error::{Error, Result};
use crate::genscore::{generate, Generator, Scorer, TextEmbedding};
use crate::image::ImageGrid;
use crate::latent::{BasisEnsemble, LatentCode};
use crate::trace::{ScoreTrace, TraceRow};

#[derive(Debug, Clone)]
pub struct SingleRun {
    pub ensemble: BasisEnsemble,
    pub trace: ScoreTrace,
    pub image: ImageGrid,
}

/// Maximizes the augmentation-averaged score of `g(sum_i w_i xi_i)` jointly
/// over the basis codes and weights, starting from `basis` with `w_i = 1/k`.
pub fn optimize_single(
    gen: &dyn Generator,
    scorer: &dyn Scorer,
    text: &TextEmbedding,
    basis: Vec<LatentCode>,
    z_bound: f64,
    opt: &OptimSettings,
    aug: &AugSpec,
) -> Result<SingleRun> {
    let ensemble = BasisEnsemble::uniform(basis, z_bound)?;
    optimize_ensemble(gen, scorer, text, ensemble, opt, aug, true)
}

/// Adam ascent over a given ensemble. With `train_weights = false` the
/// weights stay at their initial values.
///
/// The trace has one row per evaluated iterate: row `t` is the objective
/// before step `t`, and the last row (`t = iters`) is the returned point.
/// Augmentations for row `t` come from `aug.at_step(t)`.
pub fn optimize_ensemble(
    gen: &dyn Generator,
    scorer: &dyn Scorer,
    text: &TextEmbedding,
    ensemble: BasisEnsemble,
    opt: &OptimSettings,
    aug: &AugSpec,
    train_weights: bool,
) -> Result<SingleRun> {
    let k = ensemble.k();
    let mut params = ensemble.to_flat();
    let mut adam = AdamState::new(params.len(), opt.adam());
    let mut trace = ScoreTrace::new();
    let mut ens = ensemble;
    for t in 0..=opt.iters {
        ens = ens.with_flat(&params)?;
        let code = ens.effective_code();
        let image = generate(gen, &code)?;
        let (s, g_img) = augclip_estimate(scorer, text, &image, &aug.at_step(t as u64))?;
        let mut grad = ens.pullback(&gen.vjp(&code, &g_img)?);
        if !train_weights {
            let n = grad.len();
            grad[n - k..].iter_mut().for_each(|g| *g = 0.0);
        }
        let gnorm = l2(&grad);
        trace.push(TraceRow {
            iter: t,
            s,
            l: 0.0,
            lambda: 0.0,
            gnorm_s: gnorm,
            gnorm_l: 0.0,
        })?;
        if !s.is_finite() || !gnorm.is_finite() {
            return Err(Error::Diverged {
                iteration: t,
                what: if s.is_finite() { "gradient" } else { "objective" },
                trace: Box::new(trace),
            });
        }
        if t == opt.iters {
            return Ok(SingleRun {
                ensemble: ens,
                trace,
                image,
            });
        }
        let ascent: Vec<f64> = grad.iter().map(|g| -g).collect();
        adam.step(&ascent, &mut params)?;
    }
    unreachable!("loop returns at t == iters")
}

/// Direct Adam ascent on a single code, no basis or weights. Returns the
/// final (truncated) code, the trace and the final image.
pub fn optimize_naive(
    gen: &dyn Generator,
    scorer: &dyn Scorer,
    text: &TextEmbedding,
    init: LatentCode,
    z_bound: f64,
    opt: &OptimSettings,
    aug: &AugSpec,
) -> Result<(LatentCode, ScoreTrace, ImageGrid)> {
    let z_dim = init.z.len();
    let mut x = init.to_flat();
    let mut adam = AdamState::new(x.len(), opt.adam());
    let mut trace = ScoreTrace::new();
    for t in 0..=opt.iters {
        let raw = LatentCode::from_flat(&x, z_dim);
        let code = raw.clone().truncated(z_bound);
        let image = generate(gen, &code)?;
        let (s, g_img) = augclip_estimate(scorer, text, &image, &aug.at_step(t as u64))?;
        let mut g = gen.vjp(&code, &g_img)?;
        for (gz, r) in g.z.iter_mut().zip(&raw.z) {
            if r.abs() > z_bound {
                *gz = 0.0;
            }
        }
        let gnorm = l2(&g.to_flat());
        trace.push(TraceRow {
            iter: t,
            s,
            l: 0.0,
            lambda: 0.0,
            gnorm_s: gnorm,
            gnorm_l: 0.0,
        })?;
        if !s.is_finite() {
            return Err(Error::Diverged {
                iteration: t,
                what: "objective",
                trace: Box::new(trace),
            });
        }
        if t == opt.iters {
            return Ok((code, trace, image));
        }
        let ascent: Vec<f64> = g.to_flat().iter().map(|v| -v).collect();
        adam.step(&ascent, &mut x)?;
    }
    unreachable!("loop returns at t == iters")
}
