use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{cosine_score, Generator, Scorer, TextEmbedding};
use crate::error::{Error, Result};
use crate::image::ImageGrid;
use crate::latent::LatentCode;
use crate::rng::{fnv1a64, mix64, RngStream};

/// Side of the average-pooling grid feeding the hash scorer's projection.
pub const POOL_GRID: usize = 8;
const POOLED_LEN: usize = POOL_GRID * POOL_GRID * 3;

/// Oracle scorer with a known optimum: `1 - 2 * mean((I - target)^2)`.
/// The text is ignored.
#[derive(Debug, Clone)]
pub struct PlantedScorer {
    target: ImageGrid,
}

impl PlantedScorer {
    pub fn new(target: ImageGrid) -> Self {
        Self { target }
    }

    /// Plants the optimum at `g(code)`.
    pub fn from_code(gen: &dyn Generator, code: &LatentCode) -> Result<Self> {
        Ok(Self::new(super::generate(gen, code)?))
    }

    pub fn target(&self) -> &ImageGrid {
        &self.target
    }
}

impl Scorer for PlantedScorer {
    fn embed_text(&self, _text: &str) -> TextEmbedding {
        TextEmbedding(vec![1.0])
    }

    fn score_and_grad(&self, _text: &TextEmbedding, image: &ImageGrid) -> Result<(f64, ImageGrid)> {
        image.same_dims(&self.target, "planted scorer input")?;
        let n = image.len() as f64;
        let mut grad = image.clone();
        grad.add_scaled(&self.target, -1.0);
        let mse = grad.dot(&grad) / n;
        grad.scale(-4.0 / n);
        Ok((1.0 - 2.0 * mse, grad))
    }
}

/// Synthetic encoder pair: the image feature is a fixed random projection of
/// the image average-pooled onto an 8x8 grid, the text embedding a unit
/// Gaussian vector seeded by a stable hash of the text. The score is their
/// cosine similarity.
#[derive(Debug, Clone)]
pub struct HashEmbedScorer {
    seed: u64,
    embed_dim: usize,
    // embed_dim x POOLED_LEN, row-major
    proj: Vec<f64>,
}

impl HashEmbedScorer {
    pub fn new(seed: u64, embed_dim: usize) -> Result<Self> {
        if embed_dim == 0 {
            return Err(Error::InvalidParams("embedding dimension must be positive".into()));
        }
        let mut rng = RngStream::new(seed, 0x7072_6f6a).rng();
        let sd = 1.0 / (POOLED_LEN as f64).sqrt();
        let proj = (0..embed_dim * POOLED_LEN)
            .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Ok(Self { seed, embed_dim, proj })
    }

    pub fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    fn bins(len: usize) -> Vec<usize> {
        (0..len).map(|i| i * POOL_GRID / len).collect()
    }

    /// Average pool onto the fixed grid; pixel `(r, c)` lands in bin
    /// `(r * 8 / H, c * 8 / W)`.
    pub fn pool(image: &ImageGrid) -> Result<Vec<f64>> {
        let (h, w) = image.dims();
        if h < POOL_GRID || w < POOL_GRID {
            return Err(Error::InvalidParams(format!(
                "hash scorer needs images of at least {POOL_GRID}x{POOL_GRID}, got {h}x{w}"
            )));
        }
        let (rb, cb) = (Self::bins(h), Self::bins(w));
        let mut sums = vec![0.0; POOLED_LEN];
        let mut counts = vec![0usize; POOL_GRID * POOL_GRID];
        for r in 0..h {
            for c in 0..w {
                let bin = rb[r] * POOL_GRID + cb[c];
                counts[bin] += 1;
                for ch in 0..3 {
                    sums[bin * 3 + ch] += image.get(r, c, ch);
                }
            }
        }
        for (bin, &n) in counts.iter().enumerate() {
            for ch in 0..3 {
                sums[bin * 3 + ch] /= n as f64;
            }
        }
        Ok(sums)
    }

    pub fn feature(&self, image: &ImageGrid) -> Result<Vec<f64>> {
        let pooled = Self::pool(image)?;
        Ok(self
            .proj
            .chunks(POOLED_LEN)
            .map(|row| row.iter().zip(&pooled).map(|(a, b)| a * b).sum())
            .collect())
    }
}

impl Scorer for HashEmbedScorer {
    fn embed_text(&self, text: &str) -> TextEmbedding {
        let mut rng = RngStream::new(fnv1a64(text.as_bytes()) ^ mix64(self.seed), 0x7465_7874).rng();
        let mut v: Vec<f64> = (0..self.embed_dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in &mut v {
            *x /= n;
        }
        TextEmbedding(v)
    }

    fn score_and_grad(&self, text: &TextEmbedding, image: &ImageGrid) -> Result<(f64, ImageGrid)> {
        let f = self.feature(image)?;
        let s = cosine_score(&text.0, &f)?;
        let ne = text.0.iter().map(|v| v * v).sum::<f64>().sqrt();
        let nf = f.iter().map(|v| v * v).sum::<f64>().sqrt();
        // d cos / d f = e / (|e||f|) - cos * f / |f|^2
        let gf: Vec<f64> = text
            .0
            .iter()
            .zip(&f)
            .map(|(e, fv)| e / (ne * nf) - s * fv / (nf * nf))
            .collect();
        let mut gpool = vec![0.0; POOLED_LEN];
        for (row, g) in self.proj.chunks(POOLED_LEN).zip(&gf) {
            for (acc, a) in gpool.iter_mut().zip(row) {
                *acc += g * a;
            }
        }
        let (h, w) = image.dims();
        let (rb, cb) = (Self::bins(h), Self::bins(w));
        let mut counts = vec![0usize; POOL_GRID * POOL_GRID];
        for &r in &rb {
            for &c in &cb {
                counts[r * POOL_GRID + c] += 1;
            }
        }
        let mut grad = ImageGrid::zeros(h, w);
        for r in 0..h {
            for c in 0..w {
                let bin = rb[r] * POOL_GRID + cb[c];
                let inv = 1.0 / counts[bin] as f64;
                for ch in 0..3 {
                    grad.set(r, c, ch, gpool[bin * 3 + ch] * inv);
                }
            }
        }
        Ok((s, grad))
    }
}

/// Two-basin landscape. A broad term rewards the image's mean colour for
/// being close to `good_color`; a narrow term rewards pixel-exact agreement
/// with `bad_target`. Pixel-exact agreement does not survive random
/// perturbation, so the narrow basin is a strong local maximum of the plain
/// score but nearly vanishes under augmentation averaging.
///
/// `s = 2 (w_g G + w_b B) / (w_g + w_b) - 1` with
/// `G = exp(-|mean(I) - good|^2 / sigma_g^2)` and
/// `B = exp(-mse(I, bad) / sigma_b^2)`.
#[derive(Debug, Clone)]
pub struct TwoBasinScorer {
    pub good_color: [f64; 3],
    pub bad_target: ImageGrid,
    pub params: TwoBasinParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwoBasinParams {
    pub good_weight: f64,
    pub bad_weight: f64,
    pub good_width: f64,
    pub bad_width: f64,
}

impl Default for TwoBasinParams {
    fn default() -> Self {
        Self {
            good_weight: 1.0,
            bad_weight: 1.0,
            good_width: 0.25,
            bad_width: 0.05,
        }
    }
}

impl TwoBasinScorer {
    pub fn new(good_color: [f64; 3], bad_target: ImageGrid, params: TwoBasinParams) -> Self {
        Self {
            good_color,
            bad_target,
            params,
        }
    }

    pub fn mean_color(image: &ImageGrid) -> [f64; 3] {
        let mut m = [0.0; 3];
        for px in image.as_slice().chunks(3) {
            for ch in 0..3 {
                m[ch] += px[ch];
            }
        }
        let n = (image.height() * image.width()) as f64;
        m.map(|v| v / n)
    }

    /// Broad-basin term `G` alone, in `[0, 1]`.
    pub fn good_term(&self, image: &ImageGrid) -> f64 {
        let m = Self::mean_color(image);
        let d2: f64 = m.iter().zip(&self.good_color).map(|(a, b)| (a - b).powi(2)).sum();
        (-d2 / self.params.good_width.powi(2)).exp()
    }

    /// Narrow-basin term `B` alone, in `[0, 1]`.
    pub fn bad_term(&self, image: &ImageGrid) -> f64 {
        let n = image.len() as f64;
        let mse = image
            .as_slice()
            .iter()
            .zip(self.bad_target.as_slice())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            / n;
        (-mse / self.params.bad_width.powi(2)).exp()
    }
}

impl Scorer for TwoBasinScorer {
    fn embed_text(&self, _text: &str) -> TextEmbedding {
        TextEmbedding(vec![1.0])
    }

    fn score_and_grad(&self, _text: &TextEmbedding, image: &ImageGrid) -> Result<(f64, ImageGrid)> {
        image.same_dims(&self.bad_target, "two-basin scorer input")?;
        let p = &self.params;
        let norm = 2.0 / (p.good_weight + p.bad_weight);
        let g = self.good_term(image);
        let b = self.bad_term(image);
        let s = norm * (p.good_weight * g + p.bad_weight * b) - 1.0;

        let m = Self::mean_color(image);
        let npx = (image.height() * image.width()) as f64;
        let n = image.len() as f64;
        let cg: [f64; 3] = std::array::from_fn(|ch| {
            norm * p.good_weight * g * (-2.0 * (m[ch] - self.good_color[ch]) / p.good_width.powi(2)) / npx
        });
        let cb = norm * p.bad_weight * b * (-2.0 / (p.bad_width.powi(2) * n));
        let mut grad = image.clone();
        for (i, (gv, t)) in grad
            .as_mut_slice()
            .iter_mut()
            .zip(self.bad_target.as_slice())
            .enumerate()
        {
            *gv = cg[i % 3] + cb * (*gv - t);
        }
        Ok((s, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genscore::{score_gradient_wrt_latent, BlobGenerator, BlobGeneratorConfig};
    use crate::gradcheck::{central_fd_image, central_fd_latent, random_code, random_image, rel_err};

    struct Scaled<S>(S, f64);

    impl<S: Scorer> Scorer for Scaled<S> {
        fn embed_text(&self, text: &str) -> TextEmbedding {
            self.0.embed_text(text)
        }
        fn score_and_grad(&self, t: &TextEmbedding, i: &ImageGrid) -> Result<(f64, ImageGrid)> {
            let (s, mut g) = self.0.score_and_grad(t, i)?;
            g.scale(self.1);
            Ok((s * self.1, g))
        }
    }

    fn gen() -> BlobGenerator {
        BlobGenerator::new(BlobGeneratorConfig {
            height: 16,
            width: 16,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn planted_gradient_vanishes_at_optimum() {
        let g = gen();
        let star = random_code(12, 8, 9);
        let sc = PlantedScorer::from_code(&g, &star).unwrap();
        let t = sc.embed_text("anything");
        let (s, grad) = score_gradient_wrt_latent(&g, &sc, &t, &star).unwrap();
        assert_eq!(s, 1.0);
        assert!(grad.norm() < 1e-8);
    }

    #[test]
    fn planted_score_bounded_by_optimum() {
        let g = gen();
        let star = random_code(12, 8, 9);
        let sc = PlantedScorer::from_code(&g, &star).unwrap();
        let t = sc.embed_text("");
        for seed in 20..40 {
            let img = g.forward(&random_code(12, 8, seed)).unwrap();
            let s = sc.score(&t, &img).unwrap();
            assert!((-1.0..1.0).contains(&s));
        }
    }

    #[test]
    fn scorer_gradients_match_finite_differences() {
        let hash = HashEmbedScorer::new(3, 32).unwrap();
        let planted = PlantedScorer::new(random_image(12, 10, 1));
        let two = TwoBasinScorer::new([0.3, 0.5, 0.2], random_image(12, 10, 2), Default::default());
        let scorers: [(&str, &dyn Scorer); 3] = [("hash", &hash), ("planted", &planted), ("two", &two)];
        for (name, sc) in scorers {
            let t = sc.embed_text("a photo of a cat");
            for probe in 0..10 {
                let img = random_image(12, 10, 50 + probe);
                let (_, g) = sc.score_and_grad(&t, &img).unwrap();
                let fd = central_fd_image(&img, 1e-4, |i| sc.score(&t, i).unwrap());
                let e = rel_err(g.as_slice(), fd.as_slice());
                assert!(e < 1e-4, "{name} probe {probe}: {e}");
            }
        }
    }

    #[test]
    fn latent_gradient_matches_finite_differences() {
        let g = gen();
        let sc = HashEmbedScorer::new(5, 64).unwrap();
        let t = sc.embed_text("red blob");
        for probe in 0..10 {
            let xi = random_code(12, 8, 300 + probe);
            let (_, grad) = score_gradient_wrt_latent(&g, &sc, &t, &xi).unwrap();
            let fd = central_fd_latent(&xi, 1e-4, |x| sc.score(&t, &g.forward(x).unwrap()).unwrap());
            let e = rel_err(&grad.to_flat(), &fd.to_flat());
            assert!(e < 1e-4, "probe {probe}: {e}");
        }
    }

    #[test]
    fn scaling_scorer_scales_gradient_exactly() {
        let g = gen();
        let base = HashEmbedScorer::new(5, 64).unwrap();
        let t = base.embed_text("x");
        let xi = random_code(12, 8, 4);
        let (_, g1) = score_gradient_wrt_latent(&g, &base, &t, &xi).unwrap();
        let (_, g2) = score_gradient_wrt_latent(&g, &Scaled(base.clone(), 4.0), &t, &xi).unwrap();
        for (a, b) in g1.to_flat().iter().zip(g2.to_flat()) {
            assert_eq!(4.0 * a, b);
        }
    }

    #[test]
    fn text_embedding_is_stable_unit_vector() {
        let sc = HashEmbedScorer::new(11, 48).unwrap();
        let a = sc.embed_text("a photo of a dog");
        let b = sc.embed_text("a photo of a dog");
        let c = sc.embed_text("a photo of a cat");
        assert_eq!(a, b);
        assert_ne!(a, c);
        let n: f64 = a.0.iter().map(|v| v * v).sum();
        assert!((n - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hash_score_in_range_and_pool_handles_odd_sizes() {
        let sc = HashEmbedScorer::new(1, 16).unwrap();
        let t = sc.embed_text("q");
        let img = random_image(13, 9, 8);
        let s = sc.score(&t, &img).unwrap();
        assert!((-1.0..=1.0).contains(&s));
        let pooled = HashEmbedScorer::pool(&ImageGrid::filled(13, 9, 0.25)).unwrap();
        assert!(pooled.iter().all(|&v| (v - 0.25).abs() < 1e-15));
        assert!(HashEmbedScorer::pool(&ImageGrid::zeros(4, 40)).is_err());
        assert!(matches!(
            sc.score(&t, &ImageGrid::zeros(16, 16)),
            Err(Error::DegenerateFeature(_))
        ));
    }

    #[test]
    fn two_basin_extremes() {
        let bad = random_image(8, 8, 3);
        let sc = TwoBasinScorer::new([0.9, 0.9, 0.9], bad.clone(), Default::default());
        let t = sc.embed_text("");
        assert_eq!(sc.bad_term(&bad), 1.0);
        let good = ImageGrid::filled(8, 8, 0.9);
        assert!((sc.good_term(&good) - 1.0).abs() < 1e-12);
        let s = sc.score(&t, &good).unwrap();
        assert!((-1.0..=1.0).contains(&s));
    }
}
