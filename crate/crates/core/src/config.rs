//! Run configuration: one JSON document, strict keys, everything but the
//! query defaulted.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attack::AttackSettings;
use crate::augment::AugConfig;
use crate::compose::ComposeConfig;
use crate::dbgd::DbgdConfig;
use crate::error::{Error, Result};
use crate::experiments::{AblationSettings, QuadraticSettings, StagnationSettings, TwoBasinSpec};
use crate::genscore::{BlobGenerator, BlobGeneratorConfig, Generator, HashEmbedScorer, PlantedScorer, Scorer};
use crate::latent::{LatentCode, DEFAULT_Z_BOUND};
use crate::optim::{InitSettings, OptimSettings};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScorerSpec {
    /// Random-projection embedding scorer.
    Hash { seed: u64, embed_dim: usize },
    /// Score peaks at `g(code)`; with no code, one is drawn from `code_seed`.
    Planted {
        code_seed: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        code: Option<LatentCode>,
    },
    /// Broad colour basin plus a narrow image basin, built from `seed`.
    TwoBasin {
        seed: u64,
        #[serde(default)]
        problem: TwoBasinSpec,
    },
}

impl Default for ScorerSpec {
    fn default() -> Self {
        ScorerSpec::Hash { seed: 7, embed_dim: 64 }
    }
}

impl ScorerSpec {
    pub fn build(&self, gen: &dyn Generator) -> Result<Box<dyn Scorer>> {
        Ok(match self {
            ScorerSpec::Hash { seed, embed_dim } => {
                let d = gen.dims();
                if d.height < crate::genscore::POOL_GRID || d.width < crate::genscore::POOL_GRID {
                    return Err(Error::Config("hash scorer needs images of at least 8x8".into()));
                }
                Box::new(HashEmbedScorer::new(*seed, *embed_dim).map_err(as_config)?)
            }
            ScorerSpec::Planted { code_seed, code } => {
                let d = gen.dims();
                let code = match code {
                    Some(c) => c.clone(),
                    None => LatentCode::sample_gaussian(
                        d.z_dim,
                        d.y_dim,
                        RngStream::new(*code_seed, 0x706c_616e),
                        DEFAULT_Z_BOUND,
                    ),
                };
                gen.check_code(&code).map_err(as_config)?;
                Box::new(PlantedScorer::from_code(gen, &code)?)
            }
            ScorerSpec::TwoBasin { seed, problem } => Box::new(problem.build(gen, *seed)?),
        })
    }
}

/// The `interpolate.*` block. Paths are resolved against the working
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InterpolateConfig {
    pub from: Option<PathBuf>,
    pub to: Option<PathBuf>,
    pub steps: usize,
}

impl Default for InterpolateConfig {
    fn default() -> Self {
        Self {
            from: None,
            to: None,
            steps: 8,
        }
    }
}

/// The `bench.*` block.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub stagnation: StagnationSettings,
    pub ablation: AblationSettings,
    pub quadratic: QuadraticSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub query: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub generator: BlobGeneratorConfig,
    #[serde(default)]
    pub scorer: ScorerSpec,
    #[serde(default)]
    pub aug: AugConfig,
    #[serde(default)]
    pub opt: OptimSettings,
    #[serde(default)]
    pub init: InitSettings,
    #[serde(default)]
    pub dbgd: DbgdConfig,
    #[serde(default)]
    pub compose: ComposeConfig,
    #[serde(default)]
    pub attack: AttackSettings,
    #[serde(default)]
    pub interpolate: InterpolateConfig,
    #[serde(default)]
    pub bench: BenchConfig,
}

impl RunConfig {
    /// All defaults with the given query.
    pub fn with_query(query: &str) -> Self {
        serde_json::from_value(serde_json::json!({ "query": query })).expect("defaults deserialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Pretty JSON with a trailing newline; loading it gives back `self`.
    pub fn resolved_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    pub fn root_stream(&self) -> RngStream {
        RngStream::new(self.seed, 0)
    }

    pub fn build_generator(&self) -> Result<BlobGenerator> {
        BlobGenerator::new(self.generator.clone()).map_err(as_config)
    }

    /// Checks every section that does not depend on the command.
    pub fn validate(&self) -> Result<()> {
        let gen = self.build_generator()?;
        self.scorer.build(&gen)?;
        self.aug.validate()?;
        self.opt.validate()?;
        self.init.validate()?;
        self.dbgd.validate()?;
        self.compose.validate((self.generator.height, self.generator.width))?;
        self.attack.validate()?;
        if self.interpolate.steps == 0 {
            return Err(Error::Config("interpolate.steps must be >= 1".into()));
        }
        Ok(())
    }
}

/// Re-labels a construction failure as a configuration error without
/// doubling the prefix.
fn as_config(e: Error) -> Error {
    match e {
        Error::Config(m) => Error::Config(m),
        other => Error::Config(other.to_string()),
    }
}
