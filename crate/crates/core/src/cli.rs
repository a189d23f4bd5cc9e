//! Command-line front end. Every command computes all of its artifacts in
//! memory first and writes them only once the whole run has succeeded, so
//! a failed run leaves no partial output.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::attack::attack_trials;
use crate::augment::AugSpec;
use crate::compose::{grid_search_compose, poisson_blend, scaled_foreground, ComposeRun};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::experiments::{dbgd_quadratic_suite, k_ablation, stagnation_bench, Property};
use crate::genscore::{generate, Generator, Scorer};
use crate::image::ImageGrid;
use crate::io::{encode_ppm, fmt_decimal, read_latent, trace_csv};
use crate::latent::BasisEnsemble;
use crate::optim::{init_search, optimize_single};

pub const THREADS_ENV: &str = "LATENTFORGE_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "latentforge",
    version,
    about = "Text-guided latent optimization on synthetic generators"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Top-k initialization followed by over-parameterized ascent.
    Optimize(CommonArgs),
    /// Foreground/background composition with grid search and blending.
    Compose(CommonArgs),
    /// Sign-gradient attack on plain and augmented scores.
    Attack(CommonArgs),
    /// Images along the segment between two stored latent codes.
    Interpolate(CommonArgs),
    /// Stagnation, k-ablation and bi-level oracle suites.
    Bench(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: LATENTFORGE_THREADS, then all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

/// Files produced by a command, relative to the output directory.
#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Artifacts {
    pub fn add(&mut self, rel: impl Into<PathBuf>, bytes: impl Into<Vec<u8>>) {
        self.files.push((rel.into(), bytes.into()));
    }

    fn image(&mut self, rel: impl Into<PathBuf>, img: &ImageGrid) {
        self.add(rel, encode_ppm(img));
    }

    pub fn files(&self) -> &[(PathBuf, Vec<u8>)] {
        &self.files
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        for (rel, bytes) in &self.files {
            let path = dir.join(rel);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

struct Models {
    gen: Box<dyn Generator>,
    scorer: Box<dyn Scorer>,
}

fn models(cfg: &RunConfig) -> Result<Models> {
    let gen = cfg.build_generator()?;
    let scorer = cfg.scorer.build(&gen)?;
    Ok(Models {
        gen: Box::new(gen),
        scorer,
    })
}

fn csv_line(fields: &[String]) -> String {
    let mut s = fields.join(",");
    s.push('\n');
    s
}

/// `init_search` then `optimize_single`.
pub fn cmd_optimize(cfg: &RunConfig) -> Result<Artifacts> {
    let m = models(cfg)?;
    let text = m.scorer.embed_text(&cfg.query);
    let root = cfg.root_stream();
    let init_aug = cfg.aug.spec(root.derive(1));
    let cands = init_search(
        m.gen.as_ref(),
        m.scorer.as_ref(),
        &text,
        &cfg.init,
        &init_aug,
        root.derive(2),
    )?;
    let basis = cands.iter().map(|c| c.code.clone()).collect();
    let run = optimize_single(
        m.gen.as_ref(),
        m.scorer.as_ref(),
        &text,
        basis,
        cfg.init.z_bound,
        &cfg.opt,
        &cfg.aug.spec(root.derive(3)),
    )?;

    let mut out = Artifacts::default();
    out.image("final.ppm", &run.image);
    out.add("trace.csv", trace_csv(&run.trace));
    let mut topk = String::from("rank,index,score\n");
    for (rank, c) in cands.iter().enumerate() {
        topk += &csv_line(&[rank.to_string(), c.index.to_string(), fmt_decimal(c.score)]);
    }
    out.add("init_topk.csv", topk);
    let code = serde_json::to_string_pretty(&run.ensemble.effective_code()).expect("code serializes");
    out.add("final_code.json", code + "\n");
    out.add("resolved_config.json", cfg.resolved_json());
    Ok(out)
}

/// Two initializations, the composition grid search, then Poisson blending
/// of the winner.
pub fn cmd_compose(cfg: &RunConfig) -> Result<Artifacts> {
    let m = models(cfg)?;
    let (gen, scorer) = (m.gen.as_ref(), m.scorer.as_ref());
    let text = scorer.embed_text(&cfg.query);
    let root = cfg.root_stream();
    let init_aug = cfg.aug.spec(root.derive(10));
    let ensemble = |stream| -> Result<BasisEnsemble> {
        let c = init_search(gen, scorer, &text, &cfg.init, &init_aug, stream)?;
        BasisEnsemble::uniform(c.into_iter().map(|c| c.code).collect(), cfg.init.z_bound)
    };
    let fg = ensemble(root.derive(11))?;
    let bg = ensemble(root.derive(12))?;
    let run = ComposeRun {
        opt: cfg.opt.clone(),
        rule: cfg.dbgd.rule(),
        per: cfg.compose.per.clone(),
        aug: cfg.aug.spec(root.derive(13)),
    };
    let eval: AugSpec = cfg.aug.spec(root.derive(14));
    let gamma = cfg.compose.gamma()?;
    let gs = grid_search_compose(gen, scorer, &text, &fg, &bg, &gamma, &run, &eval)?;

    let win = gs.winner();
    let (img_fg, img_bg) = win.outcome.state.images(gen)?;
    let small = scaled_foreground(&img_fg, img_bg.dims(), &win.params)?;
    let blend = poisson_blend(&small, &img_bg, &win.params, &cfg.compose.poisson)?;
    if !blend.converged {
        eprintln!(
            "warning: Poisson solve stopped after {} iterations with residual {:.3e}",
            blend.iterations, blend.residual
        );
    }

    let mut out = Artifacts::default();
    let mut grid = String::from("candidate,alpha,position,s_final,l_final\n");
    for (i, c) in gs.candidates.iter().enumerate() {
        out.add(format!("cand_{i}/trace.csv"), trace_csv(&c.outcome.trace));
        let l = c.outcome.trace.last().map(|r| r.l).unwrap_or(f64::NAN);
        grid += &csv_line(&[
            i.to_string(),
            c.params.alpha.to_string(),
            c.params.position.to_string(),
            fmt_decimal(c.final_score),
            fmt_decimal(l),
        ]);
    }
    out.add("grid_results.csv", grid);
    out.image("fused.ppm", &win.outcome.fused);
    out.image("blended.ppm", &blend.image);
    let winner = serde_json::json!({
        "candidate": gs.best,
        "alpha": win.params.alpha,
        "position": win.params.position,
        "s_final": win.final_score,
        "poisson_converged": blend.converged,
        "poisson_iterations": blend.iterations,
        "poisson_residual": blend.residual,
    });
    out.add(
        "winner.json",
        serde_json::to_string_pretty(&winner).expect("json") + "\n",
    );
    out.add("resolved_config.json", cfg.resolved_json());
    Ok(out)
}

pub fn cmd_attack(cfg: &RunConfig) -> Result<Artifacts> {
    let m = models(cfg)?;
    let text = m.scorer.embed_text(&cfg.query);
    let trials = attack_trials(
        m.gen.as_ref(),
        m.scorer.as_ref(),
        &text,
        &cfg.aug,
        &cfg.attack,
        cfg.root_stream().derive(20),
    )?;
    let mut out = Artifacts::default();
    let mut csv = String::from("seed,gain_plain,gain_aug\n");
    for t in &trials {
        csv += &csv_line(&[
            t.seed.to_string(),
            fmt_decimal(t.gains.gain_plain),
            fmt_decimal(t.gains.gain_aug),
        ]);
    }
    out.add("attack.csv", csv);
    for t in trials.iter().take(3) {
        out.image(format!("attack_{}_original.ppm", t.seed), &t.image);
        out.image(format!("attack_{}_plain.ppm", t.seed), &t.gains.attacked_plain);
        out.image(format!("attack_{}_aug.ppm", t.seed), &t.gains.attacked_aug);
    }
    out.add("resolved_config.json", cfg.resolved_json());
    Ok(out)
}

/// Image `i` is `g(a xi_1 + (1 - a) xi_2)` with `a = i / steps`.
pub fn cmd_interpolate(cfg: &RunConfig) -> Result<Artifacts> {
    let ic = &cfg.interpolate;
    let (Some(from), Some(to)) = (&ic.from, &ic.to) else {
        return Err(Error::Config(
            "interpolate needs interpolate.from and interpolate.to".into(),
        ));
    };
    let (x1, x2) = (read_latent(from)?, read_latent(to)?);
    let gen = cfg.build_generator()?;
    gen.check_code(&x1)?;
    gen.check_code(&x2)?;
    let n = ic.steps;
    let mut out = Artifacts::default();
    for i in 0..=n {
        let a = i as f64 / n as f64;
        let code = x1.lerp(a, &x2, 1.0 - a)?;
        out.image(format!("interp_{i:03}.ppm"), &generate(&gen, &code)?);
    }
    out.add("resolved_config.json", cfg.resolved_json());
    Ok(out)
}

/// Artifacts plus the property verdicts; the caller exits non-zero if any
/// property failed.
pub fn cmd_bench(cfg: &RunConfig) -> Result<(Artifacts, Vec<Property>)> {
    let b = &cfg.bench;
    let barrier = cfg.dbgd.barrier();
    let stag = stagnation_bench(&cfg.generator, &cfg.aug, &cfg.opt, &b.stagnation, cfg.seed)?;
    let abl = k_ablation(&cfg.generator, &cfg.opt, &b.ablation, cfg.seed)?;
    let quad = dbgd_quadratic_suite(&b.quadratic, &barrier, cfg.seed)?;

    let mut props = vec![stag.property()];
    props.extend(abl.properties());
    props.extend(quad.properties());

    let mut out = Artifacts::default();
    let mut s = String::from("seed,method,final_score,good_term,bad_term,basin\n");
    for r in &stag.rows {
        s += &csv_line(&[
            r.seed.to_string(),
            r.method.to_string(),
            fmt_decimal(r.final_score),
            fmt_decimal(r.good_term),
            fmt_decimal(r.bad_term),
            r.basin.label().to_string(),
        ]);
    }
    out.add("stagnation_summary.csv", s);
    let mut a = String::from("seed,M,k,final_score\n");
    for r in &abl.rows {
        a += &csv_line(&[
            r.seed.to_string(),
            r.m.to_string(),
            r.k.to_string(),
            fmt_decimal(r.final_score),
        ]);
    }
    out.add("ablation.csv", a);
    let mut p = String::from("property,result,detail\n");
    for prop in &props {
        let verdict = if prop.pass { "pass" } else { "fail" };
        p += &format!("{},{},\"{}\"\n", prop.name, verdict, prop.detail.replace('"', "'"));
    }
    out.add("properties.csv", p);
    out.add("resolved_config.json", cfg.resolved_json());
    Ok((out, props))
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("{THREADS_ENV}={v:?} is not a thread count")))?,
            ),
            Err(_) => None,
        },
    };
    if n == Some(0) {
        return Err(Error::Config("thread count must be >= 1".into()));
    }
    Ok(n)
}

#[cfg(feature = "parallel")]
fn with_threads<R: Send>(n: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match n {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("cannot start {n} worker threads: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

#[cfg(not(feature = "parallel"))]
fn with_threads<R: Send>(_n: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    Ok(f())
}

fn execute(cli: Cli) -> Result<bool> {
    let (args, which) = match &cli.command {
        Command::Optimize(a) => (a, "optimize"),
        Command::Compose(a) => (a, "compose"),
        Command::Attack(a) => (a, "attack"),
        Command::Interpolate(a) => (a, "interpolate"),
        Command::Bench(a) => (a, "bench"),
    };
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let threads = thread_count(args.threads)?;
    let (artifacts, props) = with_threads(threads, || -> Result<(Artifacts, Vec<Property>)> {
        Ok(match &cli.command {
            Command::Optimize(_) => (cmd_optimize(&cfg)?, vec![]),
            Command::Compose(_) => (cmd_compose(&cfg)?, vec![]),
            Command::Attack(_) => (cmd_attack(&cfg)?, vec![]),
            Command::Interpolate(_) => (cmd_interpolate(&cfg)?, vec![]),
            Command::Bench(_) => cmd_bench(&cfg)?,
        })
    })??;
    artifacts.write_to(&args.out)?;
    eprintln!(
        "{which}: wrote {} files to {}",
        artifacts.files().len(),
        args.out.display()
    );
    let mut ok = true;
    for p in &props {
        eprintln!("{} {}: {}", if p.pass { "PASS" } else { "FAIL" }, p.name, p.detail);
        ok &= p.pass;
    }
    Ok(ok)
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
