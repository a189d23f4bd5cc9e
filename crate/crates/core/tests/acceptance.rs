//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Runtime budgets are part of the criteria.

mod common;

use std::collections::BTreeMap;
use std::error::Error as StdError;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use common::dense_solve;
use latentforge::attack::{attack_trials, DEFAULT_EPSILON};
use latentforge::augment::{augclip_estimate, augclip_score, AugConfig, AugKind, AugmentationParams};
use latentforge::compose::{
    crop, crop_vjp, fuse, fuse_vjp, perceptual_loss, perceptual_loss_grad, poisson_blend, CompositionParams,
    PerceptualSettings, PoissonSettings, Position,
};
use latentforge::config::RunConfig;
use latentforge::dbgd::{
    bilevel_descent, dbgd_direction, dbgd_optimize, BarrierSettings, BiEval, DirectionRule, Stepper,
};
use latentforge::experiments::{
    estimator_variance, fuse_toy, k_ablation, stagnation_bench, AblationSettings, FuseToySettings, StagnationSettings,
    TwoBasinSpec,
};
use latentforge::genscore::{
    BlobGenerator, BlobGeneratorConfig, Generator, HashEmbedScorer, PlantedScorer, Scorer, TwoBasinScorer,
};
use latentforge::gradcheck::{central_fd_image, central_fd_latent, random_code, random_image, random_vector, rel_err};
use latentforge::optim::OptimSettings;
use latentforge::{ImageGrid, RngStream};

type Outcome = Result<(bool, String), Box<dyn StdError>>;
type Criterion = (&'static str, Option<Duration>, fn() -> Outcome);

const QUERY: &str = "a red balloon over a field";

fn defaults() -> RunConfig {
    RunConfig::with_query(QUERY)
}

fn secs(d: Duration) -> String {
    format!("{:.2} s", d.as_secs_f64())
}

// ---------------------------------------------------------------------------
// 1, 2: barrier descent

fn barrier_identity() -> Outcome {
    let b = BarrierSettings::default();
    let mut worst = f64::INFINITY;
    for i in 0..1000u64 {
        let gl = random_vector(10, 2 * i);
        let gs = random_vector(10, 2 * i + 1);
        let (v, _) = dbgd_direction(&gl, &gs, &b)?;
        let lhs: f64 = -v.iter().zip(&gs).map(|(a, c)| a * c).sum::<f64>();
        let ns2: f64 = gs.iter().map(|x| x * x).sum();
        worst = worst.min(lhs - b.beta * ns2);
    }
    Ok((
        worst >= -1e-12,
        format!("1000 pairs in dimension 10, min <-v, grad_s> - beta |grad_s|^2 = {worst:.3e}"),
    ))
}

/// `s = -x1^2`, `l = (x1 - 1)^2 + (x2 - 1)^2`, written out independently
/// of the library's oracle.
fn quadratic(x: &[f64], _t: usize) -> latentforge::Result<BiEval> {
    let (a, b) = (x[0], x[1]);
    Ok(BiEval {
        s: -a * a,
        grad_s: vec![-2.0 * a, 0.0],
        l: (a - 1.0) * (a - 1.0) + (b - 1.0) * (b - 1.0),
        grad_l: vec![2.0 * a - 2.0, 2.0 * b - 2.0],
    })
}

fn bilevel_oracle() -> Outcome {
    let b = BarrierSettings::default();
    // Adam with the default 5e-3 limit-cycles across x1 = 0 with an
    // amplitude of a few lr; 2e-3 keeps the cycle well inside 1e-2.
    let opt = OptimSettings {
        lr: 2e-3,
        iters: 2000,
        weight_decay: 0.0,
    };
    let (x, trace) = dbgd_optimize(quadratic, vec![0.5, 0.0], &b, &opt)?;
    let (xi, _) = bilevel_descent(
        quadratic,
        vec![0.5, 0.0],
        DirectionRule::Inverse(b),
        Stepper::Adam(opt.adam()),
        opt.iters,
    )?;
    let d = (x[0].powi(2) + (x[1] - 1.0).powi(2)).sqrt();
    let di = ((xi[0] - 1.0).powi(2) + (xi[1] - 1.0).powi(2)).sqrt();
    let gap = -x[0].powi(2) + xi[0].powi(2);
    let pass = d < 1e-2 && trace.len() <= 2001 && di < 5e-2 && gap >= 0.5;
    Ok((
        pass,
        format!(
            "dbgd final ({:.5}, {:.5}), distance to (0,1) {d:.2e}; inverse final ({:.5}, {:.5}), distance to (1,1) {di:.2e}, score gap {gap:.4}",
            x[0], x[1], xi[0], xi[1]
        ),
    ))
}

// ---------------------------------------------------------------------------
// 3 to 6: experiment analogues

fn fuse_for_free() -> Outcome {
    let cfg = defaults();
    let s = FuseToySettings::default();
    let r = fuse_toy(&cfg.generator, &cfg.opt, &cfg.dbgd.barrier(), &s, cfg.seed)?;
    let p = r.property();
    Ok((
        p.pass && s.size == 64,
        format!("{} seeds at {}x{}: {}", s.seeds, s.size, s.size, p.detail),
    ))
}

fn attack_gap() -> Outcome {
    let cfg = defaults();
    let gen = cfg.build_generator()?;
    let scorer = cfg.scorer.build(&gen)?;
    let text = scorer.embed_text(&cfg.query);
    let full = cfg.aug.enabled.len() == AugKind::ALL.len() && cfg.aug.n_draws == 16;
    let setup_ok = full
        && cfg.attack.epsilon == DEFAULT_EPSILON
        && cfg.attack.seeds == 50
        && (gen.dims().height, gen.dims().width) == (64, 64);
    let trials = attack_trials(
        &gen,
        scorer.as_ref(),
        &text,
        &cfg.aug,
        &cfg.attack,
        cfg.root_stream().derive(20),
    )?;
    let wins = trials.iter().filter(|t| t.gains.gain_plain > t.gains.gain_aug).count();
    let mean =
        |f: fn(&latentforge::attack::AttackTrial) -> f64| trials.iter().map(f).sum::<f64>() / trials.len() as f64;
    Ok((
        setup_ok && 5 * wins >= 4 * trials.len(),
        format!(
            "plain gain > augmented gain on {wins}/{} seeds; mean gains plain {:.4}, augmented {:.4}",
            trials.len(),
            mean(|t| t.gains.gain_plain),
            mean(|t| t.gains.gain_aug)
        ),
    ))
}

fn stagnation_escape() -> Outcome {
    let cfg = defaults();
    let s = StagnationSettings::default();
    let r = stagnation_bench(&cfg.generator, &cfg.aug, &cfg.opt, &s, cfg.seed)?;
    let p = r.property();
    Ok((p.pass && s.seeds == 20, format!("{} seeds: {}", s.seeds, p.detail)))
}

fn k_ablation_check() -> Outcome {
    let cfg = defaults();
    let s = AblationSettings::default();
    let r = k_ablation(&cfg.generator, &cfg.opt, &s, cfg.seed)?;
    let props = r.properties();
    let setup_ok = s.seeds == 20 && s.m == 1000 && s.ks == [1, 5, 10];
    let detail = props.iter().map(|p| p.detail.clone()).collect::<Vec<_>>().join("; ");
    Ok((setup_ok && props.iter().all(|p| p.pass), detail))
}

// ---------------------------------------------------------------------------
// 7: gradient checks

struct GradGroup {
    name: &'static str,
    tol: f64,
    worst: f64,
    probes: usize,
}

impl GradGroup {
    fn new(name: &'static str, tol: f64) -> Self {
        Self {
            name,
            tol,
            worst: 0.0,
            probes: 0,
        }
    }

    fn record(&mut self, analytic: &[f64], fd: &[f64]) {
        self.worst = self.worst.max(rel_err(analytic, fd));
        self.probes += 1;
    }

    fn pass(&self) -> bool {
        self.probes >= 10 && self.worst < self.tol
    }
}

const H: f64 = 1e-4;
const SMOOTH: f64 = 1e-4;
const BILINEAR: f64 = 1e-3;

fn small_generator() -> latentforge::Result<BlobGenerator> {
    BlobGenerator::new(BlobGeneratorConfig {
        height: 16,
        width: 16,
        ..Default::default()
    })
}

fn only(kind: AugKind) -> AugConfig {
    AugConfig {
        enabled: [kind].into_iter().collect(),
        ..Default::default()
    }
}

fn gradient_checks() -> Outcome {
    let gen = small_generator()?;
    let d = gen.dims();
    let (h, w) = (d.height, d.width);
    let mut groups = Vec::new();

    let mut g = GradGroup::new("generator", SMOOTH);
    for p in 0..10 {
        let xi = random_code(d.z_dim, d.y_dim, 100 + p);
        let cot = random_image(h, w, 200 + p);
        let a = gen.vjp(&xi, &cot)?;
        let fd = central_fd_latent(&xi, H, |x| gen.forward(x).unwrap().dot(&cot));
        g.record(&a.to_flat(), &fd.to_flat());
    }
    groups.push(g);

    let hash = HashEmbedScorer::new(7, 64)?;
    let planted = PlantedScorer::new(random_image(h, w, 300));
    let two = TwoBasinSpec::default().build(&gen, 1)?;
    let scorers: [(&'static str, &dyn Scorer); 3] = [
        ("hash scorer", &hash),
        ("planted scorer", &planted),
        ("two-basin scorer", &two),
    ];
    // Two-basin gradients are ~exp(-40) on uniform noise, below what finite
    // differences of a score near -1 can resolve, so its probes walk from
    // the narrow basin towards the broad one.
    let basin_probe = |p: u64| {
        let noise = random_image(h, w, 450 + p);
        let m = TwoBasinScorer::mean_color(&two.bad_target);
        ImageGrid::from_fn(h, w, |r, c, ch| {
            let t = p as f64 / 9.0;
            two.bad_target.get(r, c, ch) + t * (two.good_color[ch] - m[ch]) + 0.04 * (noise.get(r, c, ch) - 0.5)
        })
    };
    for (name, sc) in scorers {
        let mut g = GradGroup::new(name, SMOOTH);
        let t = sc.embed_text(QUERY);
        for p in 0..10 {
            let img = if name == "two-basin scorer" {
                basin_probe(p)
            } else {
                random_image(h, w, 400 + p)
            };
            let (_, a) = sc.score_and_grad(&t, &img)?;
            let fd = central_fd_image(&img, H, |i| sc.score(&t, i).unwrap());
            g.record(a.as_slice(), fd.as_slice());
        }
        groups.push(g);
    }

    let kinds = [
        ("color", AugKind::Color, SMOOTH),
        ("translate", AugKind::Translate, SMOOTH),
        ("resize", AugKind::Resize, BILINEAR),
        ("cutout", AugKind::Cutout, SMOOTH),
    ];
    for (name, kind, tol) in kinds {
        let mut g = GradGroup::new(name, tol);
        let cfg = only(kind);
        let mut rng = RngStream::new(11, kind as u64).rng();
        for p in 0..10 {
            let params = AugmentationParams::sample(&cfg, (h, w), &mut rng);
            let x = random_image(h, w, 500 + p);
            let cot = random_image(h, w, 600 + p);
            let fd = central_fd_image(&x, H, |im| params.apply(im).dot(&cot));
            g.record(params.vjp(&cot).as_slice(), fd.as_slice());
        }
        groups.push(g);
    }

    let mut g = GradGroup::new("augmented score estimate", BILINEAR);
    let t = hash.embed_text(QUERY);
    for p in 0..10 {
        let spec = AugConfig {
            n_draws: 4,
            ..Default::default()
        }
        .spec(RngStream::new(12, p));
        let img = random_image(h, w, 700 + p);
        let (_, a) = augclip_estimate(&hash, &t, &img, &spec)?;
        let fd = central_fd_image(&img, H, |i| augclip_score(&hash, &t, i, &spec).unwrap());
        g.record(a.as_slice(), fd.as_slice());
    }
    groups.push(g);

    let per = PerceptualSettings::default();
    let mut g = GradGroup::new("perceptual loss", SMOOTH);
    for p in 0..10 {
        let a = random_image(h, w, 800 + p);
        let b = random_image(h, w, 900 + p);
        let (_, ga, gb) = perceptual_loss_grad(&a, &b, &per)?;
        let fa = central_fd_image(&a, H, |x| perceptual_loss(x, &b, &per).unwrap());
        let fb = central_fd_image(&b, H, |x| perceptual_loss(&a, x, &per).unwrap());
        g.record(
            &[ga.as_slice(), gb.as_slice()].concat(),
            &[fa.as_slice(), fb.as_slice()].concat(),
        );
    }
    groups.push(g);

    let mut gf = GradGroup::new("fuse (foreground)", BILINEAR);
    let mut gb = GradGroup::new("fuse (background)", SMOOTH);
    let mut gc = GradGroup::new("crop", SMOOTH);
    for p in 0..10u64 {
        let alpha = [0.65, 0.5][p as usize % 2];
        let params = CompositionParams::new(alpha, Position::all()[p as usize % 9])?;
        let fg = random_image(h, w, 1000 + p);
        let bg = random_image(h, w, 1100 + p);
        let cot = random_image(h, w, 1200 + p);
        let (a_fg, a_bg) = fuse_vjp(&cot, fg.dims(), &params)?;
        let fd_fg = central_fd_image(&fg, H, |x| fuse(x, &bg, &params).unwrap().dot(&cot));
        let fd_bg = central_fd_image(&bg, H, |x| fuse(&fg, x, &params).unwrap().dot(&cot));
        gf.record(a_fg.as_slice(), fd_fg.as_slice());
        gb.record(a_bg.as_slice(), fd_bg.as_slice());
        let r = params.region(bg.dims())?;
        let cot_c = random_image(r.height, r.width, 1300 + p);
        let a_c = crop_vjp(&cot_c, bg.dims(), &params)?;
        let fd_c = central_fd_image(&bg, H, |x| crop(x, &params).unwrap().dot(&cot_c));
        gc.record(a_c.as_slice(), fd_c.as_slice());
    }
    groups.extend([gf, gb, gc]);

    let pass = groups.iter().all(GradGroup::pass);
    let detail = groups
        .iter()
        .map(|g| {
            let mark = if g.pass() { "" } else { " (over tolerance)" };
            format!("{} {:.1e}/{:.0e}{mark}", g.name, g.worst, g.tol)
        })
        .collect::<Vec<_>>()
        .join(", ");
    Ok((pass, format!("worst relative error over 10 probes each: {detail}")))
}

// ---------------------------------------------------------------------------
// 8: Monte Carlo variance

fn estimator_halving() -> Outcome {
    let cfg = defaults();
    let gen = cfg.build_generator()?;
    let scorer = cfg.scorer.build(&gen)?;
    let text = scorer.embed_text(&cfg.query);
    let d = gen.dims();
    let image = gen.forward(&random_code(d.z_dim, d.y_dim, 3))?;
    let var = |n: usize| {
        let aug = AugConfig {
            n_draws: n,
            ..cfg.aug.clone()
        };
        estimator_variance(
            scorer.as_ref(),
            &text,
            &image,
            &aug,
            200,
            RngStream::new(5, 1000 + n as u64),
        )
    };
    let (v16, v32) = (var(16)?, var(32)?);
    let ratio = v16 / v32;
    Ok((
        (2.0 / 1.25..=2.0 * 1.25).contains(&ratio),
        format!("200 streams: var(16) = {v16:.4e}, var(32) = {v32:.4e}, ratio {ratio:.3} (target 2 within x1.25)"),
    ))
}

// ---------------------------------------------------------------------------
// 9: Poisson blending

fn poisson_checks() -> Outcome {
    let settings = PoissonSettings::default();
    let mut worst_res: f64 = 0.0;
    let mut worst_diff: f64 = 0.0;
    let mut exact = true;
    for (size, seed) in [(8usize, 1u64), (16, 2)] {
        for (i, pos) in Position::all().into_iter().enumerate() {
            for alpha in [0.65, 0.5] {
                let bg = random_image(size, size, seed * 100 + i as u64);
                let p = CompositionParams::new(alpha, pos)?;
                let r = p.region(bg.dims())?;
                let mut src = random_image(r.height, r.width, seed * 1000 + i as u64);
                src.scale(0.5);
                let out = poisson_blend(&src, &bg, &p, &settings)?;
                worst_res = worst_res.max(if out.converged { out.residual } else { f64::INFINITY });
                for ch in 0..3 {
                    let u = dense_solve(&src, &bg, r.top, r.left, ch);
                    for rr in 0..r.height {
                        for cc in 0..r.width {
                            let want = u[rr * r.width + cc].clamp(0.0, 1.0);
                            let got = out.image.get(r.top + rr, r.left + cc, ch);
                            worst_diff = worst_diff.max((got - want).abs());
                        }
                    }
                }
                let same = bg.window(r.top, r.left, r.height, r.width);
                exact &= poisson_blend(&same, &bg, &p, &settings)?.image == bg;
            }
        }
    }
    Ok((
        worst_res < 1e-6 && worst_diff < 1e-5 && exact,
        format!(
            "36 instances on 8x8 and 16x16: max residual {worst_res:.2e}, max deviation from dense solve {worst_diff:.2e}, identical source bit-exact: {exact}"
        ),
    ))
}

// ---------------------------------------------------------------------------
// 10: default constants

fn default_constants() -> Outcome {
    let v: serde_json::Value = serde_json::from_str(&defaults().resolved_json())?;
    let checks: [(&str, bool); 7] = [
        ("M = 10000", v["init"]["M"] == 10_000),
        ("init batch = 10", v["init"]["batch"] == 10),
        ("lr = 5e-3", v["opt"]["lr"] == 5e-3),
        ("iterations = 1000", v["opt"]["iters"] == 1000),
        ("beta = 1", v["dbgd"]["beta"] == 1.0),
        ("z truncation = 2", v["init"]["z_bound"] == 2.0),
        ("18 composition candidates", {
            let alphas = v["compose"]["alphas"].as_array().map_or(0, Vec::len);
            let positions = v["compose"]["positions"].as_array().map_or(0, Vec::len);
            alphas * positions == 18 && defaults().compose.gamma()?.len() == 18
        }),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    let detail = if failed.is_empty() {
        checks.iter().map(|c| c.0).collect::<Vec<_>>().join(", ")
    } else {
        format!("mismatched: {}", failed.join(", "))
    };
    Ok((failed.is_empty(), detail))
}

// ---------------------------------------------------------------------------
// 11: CLI determinism

const DETERMINISM_CONFIG: &str = r#"{
  "query": "a red balloon over a field",
  "seed": 11,
  "generator": {"height": 32, "width": 32},
  "aug": {"n_draws": 8},
  "opt": {"iters": 40},
  "init": {"M": 200, "k": 5, "batch": 10}
}"#;

fn snapshot(dir: &Path) -> Result<BTreeMap<PathBuf, Vec<u8>>, Box<dyn StdError>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d)? {
            let p = e?.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|e| e == "ppm" || e == "csv") {
                out.insert(p.strip_prefix(dir)?.to_path_buf(), std::fs::read(&p)?);
            }
        }
    }
    Ok(out)
}

fn cli(cmd: &str, config: &Path, out: &Path, threads: &str) -> Result<(), Box<dyn StdError>> {
    let o = Command::new(env!("CARGO_BIN_EXE_latentforge"))
        .env_remove("LATENTFORGE_THREADS")
        .arg(cmd)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(["--threads", threads])
        .output()?;
    if !o.status.success() {
        return Err(format!("{cmd} failed: {}", String::from_utf8_lossy(&o.stderr)).into());
    }
    Ok(())
}

fn cli_determinism() -> Outcome {
    let tmp = tempfile::TempDir::new()?;
    let cfg = tmp.path().join("config.json");
    std::fs::write(&cfg, DETERMINISM_CONFIG)?;
    let mut details = Vec::new();
    let mut pass = true;
    for cmd in ["optimize", "compose"] {
        let first = tmp.path().join(format!("{cmd}_t1"));
        cli(cmd, &cfg, &first, "1")?;
        let resolved = first.join("resolved_config.json");
        let reference = snapshot(&first)?;
        let mut same = !reference.is_empty();
        for threads in ["2", "4", "8"] {
            let dir = tmp.path().join(format!("{cmd}_t{threads}"));
            cli(cmd, &resolved, &dir, threads)?;
            same &= snapshot(&dir)? == reference;
        }
        pass &= same;
        details.push(format!(
            "{cmd}: {} PPM/CSV files {} across 1/2/4/8 threads",
            reference.len(),
            if same { "identical" } else { "DIFFER" }
        ));
    }
    Ok((pass, details.join("; ")))
}

// ---------------------------------------------------------------------------

fn main() {
    let criteria: [Criterion; 11] = [
        ("barrier identity", Some(Duration::from_secs(1)), barrier_identity),
        (
            "bi-level quadratic oracle",
            Some(Duration::from_secs(5)),
            bilevel_oracle,
        ),
        (
            "fuse loss improves at no score cost",
            Some(Duration::from_secs(120)),
            fuse_for_free,
        ),
        ("adversarial gain gap", Some(Duration::from_secs(60)), attack_gap),
        ("wrong-basin escape", Some(Duration::from_secs(120)), stagnation_escape),
        ("top-k ablation", Some(Duration::from_secs(300)), k_ablation_check),
        ("gradient checks", Some(Duration::from_secs(30)), gradient_checks),
        (
            "estimator variance halving",
            Some(Duration::from_secs(30)),
            estimator_halving,
        ),
        ("Poisson blending", Some(Duration::from_secs(10)), poisson_checks),
        ("default constants", None, default_constants),
        ("CLI determinism", None, cli_determinism),
    ];
    let mut failures = 0;
    for (i, (name, budget, f)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let result = f();
        let took = start.elapsed();
        let (pass, detail) = match result {
            Ok((ok, detail)) => match budget {
                Some(b) if took > b => (false, format!("{detail}; over the {} budget", secs(b))),
                _ => (ok, detail),
            },
            Err(e) => (false, format!("error: {e}")),
        };
        let timing = match budget {
            Some(b) => format!("{} of {}", secs(took), secs(b)),
            None => secs(took),
        };
        println!(
            "{} criterion {} ({name}): {detail} [{timing}]",
            if pass { "PASS" } else { "FAIL" },
            i + 1
        );
        failures += usize::from(!pass);
    }
    println!("acceptance: {} of 11 criteria passed", 11 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
