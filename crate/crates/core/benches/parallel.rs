//! Parallel against sequential execution of the three data-parallel hot
//! paths: the augmentation-averaged estimate, top-k initialization and the
//! composition grid search.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use latentforge::augment::{augclip_estimate, AugConfig};
use latentforge::compose::{grid_search_compose, ComposeConfig, ComposeRun};
use latentforge::config::RunConfig;
use latentforge::genscore::{BlobGenerator, BlobGeneratorConfig, Generator};
use latentforge::gradcheck::random_code;
use latentforge::optim::{init_search, InitSettings, OptimSettings};
use latentforge::{par, BasisEnsemble, RngStream};

fn modes(c: &mut Criterion, group: &str, f: impl Fn()) {
    let mut g = c.benchmark_group(group);
    g.sample_size(10);
    g.bench_function(BenchmarkId::new("mode", "parallel"), |b| b.iter(&f));
    g.bench_function(BenchmarkId::new("mode", "sequential"), |b| {
        b.iter(|| par::sequential(&f))
    });
    g.finish();
}

fn generator(size: usize) -> BlobGenerator {
    BlobGenerator::new(BlobGeneratorConfig {
        height: size,
        width: size,
        ..Default::default()
    })
    .expect("valid generator")
}

fn bench_estimate(c: &mut Criterion) {
    let cfg = RunConfig::with_query("a red balloon over a field");
    let gen = generator(64);
    let scorer = cfg.scorer.build(&gen).expect("scorer");
    let text = scorer.embed_text(&cfg.query);
    let image = gen.forward(&random_code(12, 8, 1)).expect("image");
    let spec = AugConfig {
        n_draws: 64,
        ..Default::default()
    }
    .spec(RngStream::new(1, 1));
    modes(c, "augclip_estimate_64x64_n64", || {
        black_box(augclip_estimate(scorer.as_ref(), &text, &image, &spec).expect("estimate"));
    });
}

fn bench_init(c: &mut Criterion) {
    let cfg = RunConfig::with_query("a red balloon over a field");
    let gen = generator(32);
    let scorer = cfg.scorer.build(&gen).expect("scorer");
    let text = scorer.embed_text(&cfg.query);
    let settings = InitSettings {
        m: 400,
        ..Default::default()
    };
    let aug = AugConfig {
        n_draws: 4,
        ..Default::default()
    }
    .spec(RngStream::new(2, 0));
    modes(c, "init_search_32x32_m400", || {
        black_box(init_search(&gen, scorer.as_ref(), &text, &settings, &aug, RngStream::new(2, 1)).expect("init"));
    });
}

fn bench_grid(c: &mut Criterion) {
    let cfg = RunConfig::with_query("a red balloon over a field");
    let gen = generator(32);
    let scorer = cfg.scorer.build(&gen).expect("scorer");
    let text = scorer.embed_text(&cfg.query);
    let ens = |seed| BasisEnsemble::uniform(vec![random_code(12, 8, seed)], 2.0).expect("ensemble");
    let (fg, bg) = (ens(3), ens(4));
    let aug = AugConfig {
        n_draws: 2,
        ..Default::default()
    };
    let run = ComposeRun {
        opt: OptimSettings {
            iters: 10,
            ..Default::default()
        },
        rule: cfg.dbgd.rule(),
        per: cfg.compose.per.clone(),
        aug: aug.spec(RngStream::new(5, 0)),
    };
    let gamma = ComposeConfig::default().gamma().expect("gamma");
    let eval = aug.spec(RngStream::new(5, 1));
    modes(c, "grid_search_32x32_18_candidates", || {
        black_box(grid_search_compose(&gen, scorer.as_ref(), &text, &fg, &bg, &gamma, &run, &eval).expect("grid"));
    });
}

criterion_group!(benches, bench_estimate, bench_init, bench_grid);
criterion_main!(benches);
