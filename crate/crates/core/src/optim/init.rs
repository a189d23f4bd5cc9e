use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::augment::{augclip_score, AugSpec};
use crate::error::{Error, Result};
use crate::genscore::{generate, Generator, Scorer, TextEmbedding};
use crate::latent::LatentCode;
use crate::par;
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YMode {
    /// `y` copied from a uniformly chosen row of the class table.
    ClassTable,
    /// `y ~ N(0, I)`.
    Gaussian,
}

/// The `init.*` configuration block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitSettings {
    #[serde(rename = "M")]
    pub m: usize,
    pub k: usize,
    pub batch: usize,
    pub y_mode: YMode,
    /// Rows in the class-embedding table.
    pub classes: usize,
    pub class_seed: u64,
    pub z_bound: f64,
}

impl Default for InitSettings {
    fn default() -> Self {
        Self {
            m: 10_000,
            k: 5,
            batch: 10,
            y_mode: YMode::ClassTable,
            classes: 1000,
            class_seed: 1,
            z_bound: crate::latent::DEFAULT_Z_BOUND,
        }
    }
}

impl InitSettings {
    pub fn validate(&self) -> Result<()> {
        if !(1 <= self.k && self.k <= self.m) {
            return Err(Error::Config(format!(
                "init needs 1 <= k <= M, got k={} M={}",
                self.k, self.m
            )));
        }
        if self.batch == 0 {
            return Err(Error::Config("init.batch must be >= 1".into()));
        }
        if self.y_mode == YMode::ClassTable && self.classes == 0 {
            return Err(Error::Config("init.classes must be >= 1".into()));
        }
        if !(self.z_bound > 0.0) {
            return Err(Error::Config("init.z_bound must be positive".into()));
        }
        Ok(())
    }
}

/// Fixed, seeded class-embedding table (`classes x y_dim`, standard normal).
#[derive(Debug, Clone, PartialEq)]
pub struct ClassTable {
    y_dim: usize,
    rows: Vec<f64>,
}

impl ClassTable {
    pub fn new(classes: usize, y_dim: usize, seed: u64) -> Self {
        let mut rng = RngStream::new(seed, 0x636c_6173).rng();
        let rows = (0..classes * y_dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self { y_dim, rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len().checked_div(self.y_dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, class: usize) -> &[f64] {
        &self.rows[class * self.y_dim..(class + 1) * self.y_dim]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub index: usize,
    pub score: f64,
    pub code: LatentCode,
}

/// Candidate `index` of an initialization run: `z ~ N(0, I)` truncated, `y`
/// per the configured mode. Depends only on `(stream, index)`.
pub fn sample_candidate(
    dims: (usize, usize),
    settings: &InitSettings,
    table: &ClassTable,
    stream: RngStream,
    index: usize,
) -> LatentCode {
    let (z_dim, y_dim) = dims;
    let mut rng = stream.derive(index as u64).rng();
    let z = (0..z_dim)
        .map(|_| {
            rng.sample::<f64, _>(StandardNormal)
                .clamp(-settings.z_bound, settings.z_bound)
        })
        .collect();
    let y = match settings.y_mode {
        YMode::ClassTable if y_dim > 0 => {
            let class = rng.random_range(0..table.len());
            table.row(class).to_vec()
        }
        _ => (0..y_dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
    };
    LatentCode { z, y }
}

/// Samples `M` codes, scores each by the augmentation-averaged score and
/// returns the best `k` in descending score order (ties by index).
///
/// Candidate `i` draws its code from `stream.derive(i)` and its
/// augmentations from `aug.at_step(i)`, so the result does not depend on the
/// batch size or on evaluation order.
pub fn init_search(
    gen: &dyn Generator,
    scorer: &dyn Scorer,
    text: &TextEmbedding,
    settings: &InitSettings,
    aug: &AugSpec,
    stream: RngStream,
) -> Result<Vec<Candidate>> {
    settings.validate()?;
    let d = gen.dims();
    let table = ClassTable::new(settings.classes, d.y_dim, settings.class_seed);
    let m = settings.m;
    let batch = settings.batch;
    let n_batches = m.div_ceil(batch);
    let batches = par::try_map_range(n_batches, |b| {
        (b * batch..((b + 1) * batch).min(m))
            .map(|i| {
                let code = sample_candidate((d.z_dim, d.y_dim), settings, &table, stream, i);
                let img = generate(gen, &code)?;
                augclip_score(scorer, text, &img, &aug.at_step(i as u64))
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    let scores: Vec<f64> = batches.into_iter().flatten().collect();
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("candidate score"));
    }
    Ok(top_k(&scores, settings.k)
        .into_iter()
        .map(|i| Candidate {
            index: i,
            score: scores[i],
            code: sample_candidate((d.z_dim, d.y_dim), settings, &table, stream, i),
        })
        .collect())
}

/// Indices of the `k` largest scores, best first, ties broken by index.
pub(crate) fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}
