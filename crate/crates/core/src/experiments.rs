//! Seeded benchmark suites shared by the `bench` command and the acceptance
//! tests. Every suite derives all of its randomness from one root stream,
//! so a report is a pure function of its settings.

use serde::{Deserialize, Serialize};

use crate::augment::{augclip_score, AugConfig};
use crate::compose::{compose_optimize, fuse, ComposeRun, CompositionParams, FuseState, PerceptualSettings, Position};
use crate::dbgd::{
    bilevel_descent, dbgd_direction, dbgd_optimize, quadratic_oracle, BarrierSettings, DirectionRule, Stepper,
};
use crate::error::Result;
use crate::genscore::{
    BlobGenerator, BlobGeneratorConfig, Generator, PlantedScorer, Scorer, TwoBasinParams, TwoBasinScorer,
};
use crate::image::ImageGrid;
use crate::latent::{BasisEnsemble, LatentCode, DEFAULT_Z_BOUND};
use crate::optim::{init_search, optimize_single, InitSettings, OptimSettings, YMode};
use crate::par;
use crate::rng::RngStream;

/// One checked property of a suite.
#[derive(Debug, Clone, PartialEq)]
pub struct Property {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Property {
    fn new(name: &str, pass: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            pass,
            detail,
        }
    }
}

fn sized(base: &BlobGeneratorConfig, size: usize) -> Result<BlobGenerator> {
    BlobGenerator::new(BlobGeneratorConfig {
        height: size,
        width: size,
        ..base.clone()
    })
}

fn jitter(code: &LatentCode, noise: f64, stream: RngStream) -> Result<LatentCode> {
    let n = LatentCode::sample_gaussian(code.z.len(), code.y.len(), stream, f64::INFINITY);
    Ok(code.lerp(1.0, &n, noise)?.truncated(DEFAULT_Z_BOUND))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Two-basin problem: a broad basin around a mean colour and a narrow,
/// lower basin around one exact image. Both come from generated images, so
/// both are reachable.
///
/// The broad basin's colour is the mean colour of the candidate image whose
/// distance from the narrow image's mean colour is closest to `separation`,
/// so the basins are apart by construction rather than by luck of the draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwoBasinSpec {
    /// Target distance between the two basins' mean colours.
    pub separation: f64,
    /// Number of generated images searched for the broad-basin colour.
    pub candidates: usize,
    pub params: TwoBasinParams,
}

impl Default for TwoBasinSpec {
    fn default() -> Self {
        Self {
            separation: 0.2,
            candidates: 64,
            params: TwoBasinParams {
                good_width: 0.15,
                bad_weight: 0.5,
                ..TwoBasinParams::default()
            },
        }
    }
}

impl TwoBasinSpec {
    fn code(gen: &dyn Generator, seed: u64, tag: u64) -> LatentCode {
        let d = gen.dims();
        let root = RngStream::new(seed, 0x6261_7369);
        LatentCode::sample_gaussian(d.z_dim, d.y_dim, root.derive(tag), DEFAULT_Z_BOUND)
    }

    /// Code whose image is the narrow basin.
    pub fn bad_code(&self, gen: &dyn Generator, seed: u64) -> LatentCode {
        Self::code(gen, seed, 0)
    }

    pub fn build(&self, gen: &dyn Generator, seed: u64) -> Result<TwoBasinScorer> {
        let bad = gen.forward(&self.bad_code(gen, seed))?;
        let bad_mean = TwoBasinScorer::mean_color(&bad);
        let mut best: Option<([f64; 3], f64)> = None;
        for i in 0..self.candidates.max(1) {
            let m = TwoBasinScorer::mean_color(&gen.forward(&Self::code(gen, seed, 1 + i as u64))?);
            let dist = m
                .iter()
                .zip(&bad_mean)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            let miss = (dist - self.separation).abs();
            if best.is_none_or(|(_, b)| miss < b) {
                best = Some((m, miss));
            }
        }
        Ok(TwoBasinScorer::new(
            best.expect("at least one candidate").0,
            bad,
            self.params,
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basin {
    Good,
    Bad,
    Neither,
}

impl Basin {
    pub fn label(&self) -> &'static str {
        match self {
            Basin::Good => "good",
            Basin::Bad => "bad",
            Basin::Neither => "neither",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StagnationSettings {
    pub seeds: usize,
    pub size: usize,
    pub iters: usize,
    /// Scale of the Gaussian perturbation of the narrow-basin code.
    pub init_noise: f64,
    /// A term at or above this value labels the basin.
    pub basin_threshold: f64,
    pub problem: TwoBasinSpec,
}

impl Default for StagnationSettings {
    fn default() -> Self {
        Self {
            seeds: 20,
            size: 32,
            iters: 300,
            init_noise: 0.1,
            basin_threshold: 0.5,
            problem: TwoBasinSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StagnationRow {
    pub seed: usize,
    /// `"plain"` or `"augclip"`.
    pub method: &'static str,
    /// Plain score of the final image.
    pub final_score: f64,
    pub good_term: f64,
    pub bad_term: f64,
    pub basin: Basin,
}

#[derive(Debug, Clone)]
pub struct StagnationReport {
    pub rows: Vec<StagnationRow>,
    pub escapes_plain: usize,
    pub escapes_aug: usize,
}

impl StagnationReport {
    /// Augmented optimization escapes at least twice as often, and at
    /// least once.
    pub fn property(&self) -> Property {
        let pass = self.escapes_aug >= 1 && self.escapes_aug >= 2 * self.escapes_plain;
        Property::new(
            "stagnation_escape",
            pass,
            format!("escapes plain={} augclip={}", self.escapes_plain, self.escapes_aug),
        )
    }
}

/// Starts every seed next to the narrow basin's code and runs plain-score
/// and augmented-score ascent from the same point.
pub fn stagnation_bench(
    base: &BlobGeneratorConfig,
    aug: &AugConfig,
    opt: &OptimSettings,
    settings: &StagnationSettings,
    seed: u64,
) -> Result<StagnationReport> {
    let gen = sized(base, settings.size)?;
    let scorer = settings.problem.build(&gen, seed)?;
    let text = scorer.embed_text("");
    let bad = settings.problem.bad_code(&gen, seed);
    let root = RngStream::new(seed, 0x7374_6167);
    let opt = OptimSettings {
        iters: settings.iters,
        ..opt.clone()
    };
    let label = |img: &ImageGrid| -> (f64, f64, Basin) {
        let (g, b) = (scorer.good_term(img), scorer.bad_term(img));
        let basin = if g >= settings.basin_threshold {
            Basin::Good
        } else if b >= settings.basin_threshold {
            Basin::Bad
        } else {
            Basin::Neither
        };
        (g, b, basin)
    };
    let per_seed = par::try_map_range(settings.seeds, |i| {
        let s = root.derive(i as u64);
        let init = jitter(&bad, settings.init_noise, s.derive(0))?;
        let mut rows = Vec::with_capacity(2);
        for (method, cfg) in [("plain", AugConfig::disabled()), ("augclip", aug.clone())] {
            let run = optimize_single(
                &gen,
                &scorer,
                &text,
                vec![init.clone()],
                DEFAULT_Z_BOUND,
                &opt,
                &cfg.spec(s.derive(1)),
            )?;
            let (good_term, bad_term, basin) = label(&run.image);
            rows.push(StagnationRow {
                seed: i,
                method,
                final_score: scorer.score(&text, &run.image)?,
                good_term,
                bad_term,
                basin,
            });
        }
        Ok::<_, crate::error::Error>(rows)
    })?;
    let rows: Vec<StagnationRow> = per_seed.into_iter().flatten().collect();
    let escapes = |m: &str| rows.iter().filter(|r| r.method == m && r.basin == Basin::Good).count();
    Ok(StagnationReport {
        escapes_plain: escapes("plain"),
        escapes_aug: escapes("augclip"),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblationSettings {
    pub seeds: usize,
    pub size: usize,
    pub iters: usize,
    /// Candidate count for the sampled configurations.
    #[serde(rename = "M")]
    pub m: usize,
    pub ks: Vec<usize>,
    /// Success means a final score of at least this fraction of the maximum.
    pub success_frac: f64,
}

impl Default for AblationSettings {
    fn default() -> Self {
        Self {
            seeds: 20,
            size: 32,
            iters: 1000,
            m: 1000,
            ks: vec![1, 5, 10],
            success_frac: 0.99,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub seed: usize,
    pub m: usize,
    pub k: usize,
    pub final_score: f64,
}

#[derive(Debug, Clone)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
    /// `(m, k, successes, mean final score)` in run order; the first entry
    /// is the `M = 1, k = 1` baseline.
    pub summary: Vec<(usize, usize, usize, f64)>,
}

impl AblationReport {
    pub fn properties(&self) -> Vec<Property> {
        let base = self.summary[0];
        let sampled = &self.summary[1..];
        let k5 = sampled.iter().find(|r| r.1 == 5).copied();
        let success = match k5 {
            Some(r) => Property::new(
                "ablation_success_k5_vs_baseline",
                r.2 >= base.2,
                format!("M={} k=5: {} successes; M=1 k=1: {}", r.0, r.2, base.2),
            ),
            None => Property::new("ablation_success_k5_vs_baseline", false, "k=5 not run".into()),
        };
        let means: Vec<f64> = sampled.iter().map(|r| r.3).collect();
        let monotone = means.windows(2).all(|w| w[1] >= w[0]);
        let detail = sampled
            .iter()
            .map(|r| format!("k={}: {:.6}", r.1, r.3))
            .collect::<Vec<_>>()
            .join(", ");
        vec![
            success,
            Property::new("ablation_mean_nondecreasing_in_k", monotone, detail),
        ]
    }
}

/// Planted-optimum problems: every seed plants a random code, then compares
/// a single random start (`M = 1, k = 1`) against top-`k` of `M` candidates
/// for each `k`. Augmentation is off so the score maximum is exactly 1.
pub fn k_ablation(
    base: &BlobGeneratorConfig,
    opt: &OptimSettings,
    settings: &AblationSettings,
    seed: u64,
) -> Result<AblationReport> {
    let gen = sized(base, settings.size)?;
    let d = gen.dims();
    let root = RngStream::new(seed, 0x6162_6c61);
    let aug = AugConfig::disabled().spec(root);
    let opt = OptimSettings {
        iters: settings.iters,
        ..opt.clone()
    };
    let kmax = settings.ks.iter().copied().max().unwrap_or(1);
    let configs: Vec<(usize, usize)> = std::iter::once((1, 1))
        .chain(settings.ks.iter().map(|&k| (settings.m, k)))
        .collect();
    let per_seed = par::try_map_range(settings.seeds, |i| {
        let s = root.derive(i as u64);
        let star = LatentCode::sample_gaussian(d.z_dim, d.y_dim, s.derive(0), DEFAULT_Z_BOUND);
        let scorer = PlantedScorer::from_code(&gen, &star)?;
        let text = scorer.embed_text("");
        let init = |m: usize, k: usize| {
            let st = InitSettings {
                m,
                k,
                y_mode: YMode::Gaussian,
                ..InitSettings::default()
            };
            init_search(&gen, &scorer, &text, &st, &aug, s.derive(1))
        };
        // top-k lists are prefixes of one another, so one search serves all k
        let single = init(1, 1)?;
        let pool = init(settings.m, kmax.min(settings.m))?;
        let mut rows = Vec::with_capacity(configs.len());
        for &(m, k) in &configs {
            let cands = if m == 1 {
                &single[..]
            } else {
                &pool[..k.min(pool.len())]
            };
            let basis = cands.iter().map(|c| c.code.clone()).collect();
            let run = optimize_single(&gen, &scorer, &text, basis, DEFAULT_Z_BOUND, &opt, &aug)?;
            rows.push(AblationRow {
                seed: i,
                m,
                k,
                final_score: run.trace.last().map(|r| r.s).unwrap_or(f64::NAN),
            });
        }
        Ok::<_, crate::error::Error>(rows)
    })?;
    let rows: Vec<AblationRow> = per_seed.into_iter().flatten().collect();
    let summary = configs
        .iter()
        .map(|&(m, k)| {
            let scores: Vec<f64> = rows
                .iter()
                .filter(|r| r.m == m && r.k == k)
                .map(|r| r.final_score)
                .collect();
            let wins = scores.iter().filter(|&&s| s >= settings.success_frac).count();
            (m, k, wins, mean(&scores))
        })
        .collect();
    Ok(AblationReport { rows, summary })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FuseToySettings {
    pub seeds: usize,
    pub size: usize,
    pub iters: usize,
    pub alpha: f64,
    pub init_noise: f64,
}

impl Default for FuseToySettings {
    fn default() -> Self {
        Self {
            seeds: 5,
            size: 64,
            iters: 1000,
            alpha: 0.5,
            init_noise: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuseToyRow {
    pub seed: usize,
    pub s_dbgd: f64,
    pub l_dbgd: f64,
    pub s_score_only: f64,
    pub l_score_only: f64,
}

#[derive(Debug, Clone)]
pub struct FuseToyReport {
    pub rows: Vec<FuseToyRow>,
}

impl FuseToyReport {
    pub fn means(&self) -> [f64; 4] {
        let col = |f: fn(&FuseToyRow) -> f64| mean(&self.rows.iter().map(f).collect::<Vec<_>>());
        [
            col(|r| r.s_dbgd),
            col(|r| r.l_dbgd),
            col(|r| r.s_score_only),
            col(|r| r.l_score_only),
        ]
    }

    /// Mean loss at least 30% lower, mean score within 2%.
    pub fn property(&self) -> Property {
        let [sd, ld, ss, ls] = self.means();
        let pass = ld <= 0.7 * ls && (sd - ss).abs() <= 0.02 * ss.abs();
        Property::new(
            "fuse_loss_for_free",
            pass,
            format!(
                "dbgd s={sd:.6} l={ld:.6}; score-only s={ss:.6} l={ls:.6}; l ratio={:.3}",
                ld / ls
            ),
        )
    }
}

/// The target is the fusion of two planted images; both runs start from the
/// same perturbed codes. The score constrains everything visible, so only
/// the covered background and the detail lost in downscaling are free for
/// the loss.
pub fn fuse_toy(
    base: &BlobGeneratorConfig,
    opt: &OptimSettings,
    barrier: &BarrierSettings,
    settings: &FuseToySettings,
    seed: u64,
) -> Result<FuseToyReport> {
    let gen = sized(base, settings.size)?;
    let d = gen.dims();
    let root = RngStream::new(seed, 0x6675_7365);
    let params = CompositionParams::new(settings.alpha, Position::all()[4])?;
    let opt = OptimSettings {
        iters: settings.iters,
        ..opt.clone()
    };
    let rows = par::try_map_range(settings.seeds, |i| {
        let s = root.derive(i as u64);
        let code = |tag| LatentCode::sample_gaussian(d.z_dim, d.y_dim, s.derive(tag), DEFAULT_Z_BOUND);
        let (f, b) = (code(0), code(1));
        let target = fuse(&gen.forward(&f)?, &gen.forward(&b)?, &params)?;
        let scorer = PlantedScorer::new(target);
        let text = scorer.embed_text("");
        let init = FuseState {
            fg: BasisEnsemble::uniform(vec![jitter(&f, settings.init_noise, s.derive(2))?], DEFAULT_Z_BOUND)?,
            bg: BasisEnsemble::uniform(vec![jitter(&b, settings.init_noise, s.derive(3))?], DEFAULT_Z_BOUND)?,
            params,
        };
        let mut out = [(0.0, 0.0); 2];
        for (j, rule) in [DirectionRule::Dbgd(*barrier), DirectionRule::ScoreOnly]
            .into_iter()
            .enumerate()
        {
            let run = ComposeRun {
                opt: opt.clone(),
                rule,
                per: PerceptualSettings::default(),
                aug: AugConfig::disabled().spec(s.derive(4)),
            };
            let o = compose_optimize(&gen, &scorer, &text, init.clone(), &run)?;
            let last = o.trace.last().copied().expect("non-empty trace");
            out[j] = (last.s, last.l);
        }
        Ok::<_, crate::error::Error>(FuseToyRow {
            seed: i,
            s_dbgd: out[0].0,
            l_dbgd: out[0].1,
            s_score_only: out[1].0,
            l_score_only: out[1].1,
        })
    })?;
    Ok(FuseToyReport { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadraticSettings {
    pub iters: usize,
    /// Adam step size. Adam circles the constraint surface with an
    /// amplitude that grows with the step size.
    pub lr: f64,
    pub barrier_pairs: usize,
    pub barrier_dim: usize,
}

impl Default for QuadraticSettings {
    fn default() -> Self {
        Self {
            iters: 2000,
            lr: 2e-3,
            barrier_pairs: 1000,
            barrier_dim: 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QuadraticReport {
    pub dbgd_final: Vec<f64>,
    pub inverse_final: Vec<f64>,
    pub barrier_worst_slack: f64,
    pub max_score_drop: f64,
}

impl QuadraticReport {
    pub fn dbgd_distance(&self) -> f64 {
        (self.dbgd_final[0].powi(2) + (self.dbgd_final[1] - 1.0).powi(2)).sqrt()
    }

    pub fn inverse_distance(&self) -> f64 {
        ((self.inverse_final[0] - 1.0).powi(2) + (self.inverse_final[1] - 1.0).powi(2)).sqrt()
    }

    /// Score gap between the two solutions, `s(dbgd) - s(inverse)`.
    pub fn score_gap(&self) -> f64 {
        let s = |x: &[f64]| -x[0] * x[0];
        s(&self.dbgd_final) - s(&self.inverse_final)
    }

    pub fn properties(&self) -> Vec<Property> {
        vec![
            Property::new(
                "dbgd_barrier_identity",
                self.barrier_worst_slack >= -1e-12,
                format!(
                    "worst <-v, grad_s> - beta |grad_s|^2 = {:.3e}",
                    self.barrier_worst_slack
                ),
            ),
            Property::new(
                "dbgd_reaches_bilevel_solution",
                self.dbgd_distance() < 1e-2,
                format!(
                    "final {:?}, distance to (0, 1) = {:.3e}",
                    self.dbgd_final,
                    self.dbgd_distance()
                ),
            ),
            Property::new(
                "inverse_reaches_loss_minimizer",
                self.score_gap() >= 0.5,
                format!(
                    "final {:?}, distance to (1, 1) = {:.3e}, score gap = {:.4}",
                    self.inverse_final,
                    self.inverse_distance(),
                    self.score_gap()
                ),
            ),
            Property::new(
                "dbgd_first_order_ascent",
                self.max_score_drop <= 1e-5,
                format!("largest per-step score decrease = {:.3e}", self.max_score_drop),
            ),
        ]
    }
}

/// The bi-level quadratic oracle, the barrier identity on random gradient
/// pairs, and the small-step monotonicity check.
pub fn dbgd_quadratic_suite(
    settings: &QuadraticSettings,
    barrier: &BarrierSettings,
    seed: u64,
) -> Result<QuadraticReport> {
    let opt = OptimSettings {
        lr: settings.lr,
        iters: settings.iters,
        weight_decay: 0.0,
    };
    let x0 = vec![0.5, 0.0];
    let (dbgd_final, _) = dbgd_optimize(quadratic_oracle, x0.clone(), barrier, &opt)?;
    let (inverse_final, _) = bilevel_descent(
        quadratic_oracle,
        x0.clone(),
        DirectionRule::Inverse(*barrier),
        Stepper::Adam(opt.adam()),
        settings.iters,
    )?;

    let root = RngStream::new(seed, 0x6261_7272);
    let mut worst = f64::INFINITY;
    for i in 0..settings.barrier_pairs {
        let draw = |tag| {
            LatentCode::sample_gaussian(
                settings.barrier_dim,
                0,
                root.derive(i as u64).derive(tag),
                f64::INFINITY,
            )
            .z
        };
        let (gl, gs) = (draw(0), draw(1));
        let (v, _) = dbgd_direction(&gl, &gs, barrier)?;
        let ns2: f64 = gs.iter().map(|x| x * x).sum();
        if ns2 > barrier.tau {
            let lhs: f64 = -v.iter().zip(&gs).map(|(a, b)| a * b).sum::<f64>();
            worst = worst.min(lhs - barrier.beta * ns2);
        }
    }

    let (_, trace) = bilevel_descent(
        quadratic_oracle,
        x0,
        DirectionRule::Dbgd(*barrier),
        Stepper::Gradient { step: 1e-3 },
        1000,
    )?;
    let max_drop = trace.rows().windows(2).map(|w| w[0].s - w[1].s).fold(0.0, f64::max);
    Ok(QuadraticReport {
        dbgd_final,
        inverse_final,
        barrier_worst_slack: worst,
        max_score_drop: max_drop,
    })
}

/// Sample variance of the augmented score over `reps` independent streams.
pub fn estimator_variance(
    scorer: &dyn Scorer,
    text: &crate::genscore::TextEmbedding,
    image: &ImageGrid,
    aug: &AugConfig,
    reps: usize,
    stream: RngStream,
) -> Result<f64> {
    let v = par::try_map_range(reps, |i| {
        augclip_score(scorer, text, image, &aug.spec(stream.derive(i as u64)))
    })?;
    let m = mean(&v);
    Ok(v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (reps as f64 - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_base() -> BlobGeneratorConfig {
        BlobGeneratorConfig {
            blobs: 3,
            ..BlobGeneratorConfig::default()
        }
    }

    #[test]
    fn quadratic_suite_properties_hold() {
        let r = dbgd_quadratic_suite(&QuadraticSettings::default(), &BarrierSettings::default(), 3).unwrap();
        for p in r.properties() {
            assert!(p.pass, "{}: {}", p.name, p.detail);
        }
    }

    #[test]
    fn stagnation_rows_cover_seeds_times_methods() {
        let s = StagnationSettings {
            seeds: 3,
            size: 16,
            iters: 5,
            ..Default::default()
        };
        let r = stagnation_bench(
            &tiny_base(),
            &AugConfig {
                n_draws: 2,
                ..Default::default()
            },
            &OptimSettings::default(),
            &s,
            1,
        )
        .unwrap();
        assert_eq!(r.rows.len(), 6);
        assert_eq!(r.rows.iter().filter(|x| x.method == "plain").count(), 3);
    }

    #[test]
    fn ablation_summary_starts_with_baseline() {
        let s = AblationSettings {
            seeds: 2,
            size: 16,
            iters: 3,
            m: 12,
            ks: vec![1, 2],
            success_frac: 0.99,
        };
        let r = k_ablation(&tiny_base(), &OptimSettings::default(), &s, 1).unwrap();
        assert_eq!(r.rows.len(), 6);
        assert_eq!(
            r.summary.iter().map(|x| (x.0, x.1)).collect::<Vec<_>>(),
            vec![(1, 1), (12, 1), (12, 2)]
        );
    }

    #[test]
    fn reports_are_deterministic() {
        let s = FuseToySettings {
            seeds: 2,
            size: 16,
            iters: 4,
            ..Default::default()
        };
        let a = fuse_toy(
            &tiny_base(),
            &OptimSettings::default(),
            &BarrierSettings::default(),
            &s,
            5,
        )
        .unwrap();
        let b = par::sequential(|| {
            fuse_toy(
                &tiny_base(),
                &OptimSettings::default(),
                &BarrierSettings::default(),
                &s,
                5,
            )
            .unwrap()
        });
        assert_eq!(a.rows, b.rows);
    }
}
