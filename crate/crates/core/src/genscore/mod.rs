//! Differentiable generator and text-image scorer contracts, with synthetic
//! implementations small enough to run and check exhaustively.

mod blob;
mod scorers;

pub use blob::{softclip, softclip_grad, BlobGenerator, BlobGeneratorConfig};
pub use scorers::{HashEmbedScorer, PlantedScorer, TwoBasinParams, TwoBasinScorer, POOL_GRID};

use crate::error::{Error, Result};
use crate::image::ImageGrid;
use crate::latent::LatentCode;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GeneratorDims {
    pub z_dim: usize,
    pub y_dim: usize,
    pub height: usize,
    pub width: usize,
}

/// A differentiable map from latent codes to images.
pub trait Generator: Send + Sync {
    fn dims(&self) -> GeneratorDims;

    /// Deterministic forward pass. Output lies in `[0, 1]`.
    fn forward(&self, code: &LatentCode) -> Result<ImageGrid>;

    /// Vector-Jacobian product: gradient w.r.t. the code of
    /// `<cotangent, forward(code)>`.
    fn vjp(&self, code: &LatentCode, cotangent: &ImageGrid) -> Result<LatentCode>;

    fn check_code(&self, code: &LatentCode) -> Result<()> {
        let d = self.dims();
        if code.z.len() != d.z_dim || code.y.len() != d.y_dim {
            return Err(Error::mismatch(
                "generator input",
                format!("z={}, y={}", d.z_dim, d.y_dim),
                format!("z={}, y={}", code.z.len(), code.y.len()),
            ));
        }
        Ok(())
    }
}

/// Unit-norm text embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct TextEmbedding(pub Vec<f64>);

/// A relevance score between a text embedding and an image, differentiable
/// in the image.
pub trait Scorer: Send + Sync {
    fn embed_text(&self, text: &str) -> TextEmbedding;

    fn score(&self, text: &TextEmbedding, image: &ImageGrid) -> Result<f64> {
        self.score_and_grad(text, image).map(|(s, _)| s)
    }

    /// Score together with its gradient w.r.t. the image (unit cotangent).
    fn score_and_grad(&self, text: &TextEmbedding, image: &ImageGrid) -> Result<(f64, ImageGrid)>;
}

/// Cosine similarity `<e, f> / (|e| |f|)`.
pub fn cosine_score(e: &[f64], f: &[f64]) -> Result<f64> {
    if e.len() != f.len() {
        return Err(Error::mismatch("cosine operands", e.len(), f.len()));
    }
    let ne = e.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nf = f.iter().map(|v| v * v).sum::<f64>().sqrt();
    if ne == 0.0 {
        return Err(Error::DegenerateFeature("text embedding"));
    }
    if nf == 0.0 {
        return Err(Error::DegenerateFeature("image feature"));
    }
    let dot: f64 = e.iter().zip(f).map(|(a, b)| a * b).sum();
    Ok((dot / (ne * nf)).clamp(-1.0, 1.0))
}

pub fn generate(gen: &dyn Generator, code: &LatentCode) -> Result<ImageGrid> {
    gen.check_code(code)?;
    gen.forward(code)
}

/// Score of `g(code)` and its gradient w.r.t. the code.
pub fn score_gradient_wrt_latent(
    gen: &dyn Generator,
    scorer: &dyn Scorer,
    text: &TextEmbedding,
    code: &LatentCode,
) -> Result<(f64, LatentCode)> {
    let image = generate(gen, code)?;
    let (s, g_img) = scorer.score_and_grad(text, &image)?;
    let g = gen.vjp(code, &g_img)?;
    Ok((s, g))
}
