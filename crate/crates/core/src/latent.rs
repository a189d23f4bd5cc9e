//! Generator inputs: a single latent code and the over-parameterized basis
//! ensemble that spans it.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Default bound for the hard clamp applied to the noise part.
pub const DEFAULT_Z_BOUND: f64 = 2.0;

/// Generator input `(z, y)`: a noise vector and a class-embedding vector.
/// `y` may be empty for unconditional generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentCode {
    pub z: Vec<f64>,
    pub y: Vec<f64>,
}

impl LatentCode {
    pub fn new(z: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if z.is_empty() {
            return Err(Error::InvalidParams(
                "latent code needs at least one z component".into(),
            ));
        }
        Ok(Self { z, y })
    }

    pub fn zeros(z_dim: usize, y_dim: usize) -> Self {
        Self {
            z: vec![0.0; z_dim],
            y: vec![0.0; y_dim],
        }
    }

    /// Standard normal draw with `z` clamped to `[-z_bound, z_bound]`.
    pub fn sample_gaussian(z_dim: usize, y_dim: usize, stream: RngStream, z_bound: f64) -> Self {
        let mut rng = stream.rng();
        let z = (0..z_dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal).clamp(-z_bound, z_bound))
            .collect();
        let y = (0..y_dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        Self { z, y }
    }

    pub fn len(&self) -> usize {
        self.z.len() + self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Hard clamp of every `z` component into `[-bound, bound]`; `y` is left
    /// untouched.
    pub fn truncated(mut self, bound: f64) -> Self {
        for v in &mut self.z {
            *v = v.clamp(-bound, bound);
        }
        self
    }

    /// `z` followed by `y`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        out.extend_from_slice(&self.z);
        out.extend_from_slice(&self.y);
        out
    }

    pub fn from_flat(flat: &[f64], z_dim: usize) -> Self {
        Self {
            z: flat[..z_dim].to_vec(),
            y: flat[z_dim..].to_vec(),
        }
    }

    /// `self * a + other * b`, component-wise.
    pub fn lerp(&self, a: f64, other: &LatentCode, b: f64) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self {
            z: self.z.iter().zip(&other.z).map(|(p, q)| a * p + b * q).collect(),
            y: self.y.iter().zip(&other.y).map(|(p, q)| a * p + b * q).collect(),
        })
    }

    pub fn norm(&self) -> f64 {
        self.z.iter().chain(&self.y).map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.z.iter().chain(&self.y).all(|v| v.is_finite())
    }

    pub(crate) fn check_same_shape(&self, other: &LatentCode) -> Result<()> {
        if self.z.len() != other.z.len() || self.y.len() != other.y.len() {
            return Err(Error::mismatch(
                "latent code",
                format!("z={}, y={}", self.z.len(), self.y.len()),
                format!("z={}, y={}", other.z.len(), other.y.len()),
            ));
        }
        Ok(())
    }
}

/// `k` basis codes with one unconstrained scalar weight each. The code fed to
/// the generator is the weighted sum, with `z` truncated after summation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisEnsemble {
    basis: Vec<LatentCode>,
    weights: Vec<f64>,
    z_bound: f64,
}

impl BasisEnsemble {
    pub fn new(basis: Vec<LatentCode>, weights: Vec<f64>, z_bound: f64) -> Result<Self> {
        if basis.is_empty() {
            return Err(Error::InvalidParams("basis ensemble needs k >= 1".into()));
        }
        if basis.len() != weights.len() {
            return Err(Error::mismatch("basis ensemble weights", basis.len(), weights.len()));
        }
        for b in &basis[1..] {
            basis[0].check_same_shape(b)?;
        }
        if !(z_bound > 0.0) {
            return Err(Error::InvalidParams(format!("z bound must be positive, got {z_bound}")));
        }
        Ok(Self {
            basis,
            weights,
            z_bound,
        })
    }

    /// Weights initialised to `1/k`.
    pub fn uniform(basis: Vec<LatentCode>, z_bound: f64) -> Result<Self> {
        let k = basis.len().max(1);
        let weights = vec![1.0 / k as f64; basis.len()];
        Self::new(basis, weights, z_bound)
    }

    pub fn k(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[LatentCode] {
        &self.basis
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn z_bound(&self) -> f64 {
        self.z_bound
    }

    pub fn z_dim(&self) -> usize {
        self.basis[0].z.len()
    }

    pub fn y_dim(&self) -> usize {
        self.basis[0].y.len()
    }

    /// Weighted sum before truncation.
    pub fn raw_sum(&self) -> LatentCode {
        let mut out = LatentCode::zeros(self.z_dim(), self.y_dim());
        for (code, &w) in self.basis.iter().zip(&self.weights) {
            for (o, v) in out.z.iter_mut().zip(&code.z) {
                *o += w * v;
            }
            for (o, v) in out.y.iter_mut().zip(&code.y) {
                *o += w * v;
            }
        }
        out
    }

    pub fn effective_code(&self) -> LatentCode {
        self.raw_sum().truncated(self.z_bound)
    }

    /// Number of scalars in [`Self::to_flat`]: all basis codes then all weights.
    pub fn param_len(&self) -> usize {
        self.k() * (self.z_dim() + self.y_dim()) + self.k()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_len());
        for b in &self.basis {
            out.extend_from_slice(&b.z);
            out.extend_from_slice(&b.y);
        }
        out.extend_from_slice(&self.weights);
        out
    }

    /// Rebuilds an ensemble with this one's shape from a flat vector.
    pub fn with_flat(&self, flat: &[f64]) -> Result<Self> {
        if flat.len() != self.param_len() {
            return Err(Error::mismatch("ensemble parameters", self.param_len(), flat.len()));
        }
        let d = self.z_dim() + self.y_dim();
        let k = self.k();
        let basis = (0..k)
            .map(|i| LatentCode::from_flat(&flat[i * d..(i + 1) * d], self.z_dim()))
            .collect();
        Ok(Self {
            basis,
            weights: flat[k * d..].to_vec(),
            z_bound: self.z_bound,
        })
    }

    /// Pulls a gradient w.r.t. the effective code back onto the flat
    /// parameters. Components of `z` pinned by the clamp get zero gradient.
    pub fn pullback(&self, grad_effective: &LatentCode) -> Vec<f64> {
        let raw = self.raw_sum();
        let gz: Vec<f64> = grad_effective
            .z
            .iter()
            .zip(&raw.z)
            .map(|(g, r)| if r.abs() <= self.z_bound { *g } else { 0.0 })
            .collect();
        let gy = &grad_effective.y;
        let mut out = Vec::with_capacity(self.param_len());
        for &w in &self.weights {
            out.extend(gz.iter().map(|g| w * g));
            out.extend(gy.iter().map(|g| w * g));
        }
        for b in &self.basis {
            let dot = b.z.iter().zip(&gz).map(|(v, g)| v * g).sum::<f64>()
                + b.y.iter().zip(gy).map(|(v, g)| v * g).sum::<f64>();
            out.push(dot);
        }
        out
    }
}
