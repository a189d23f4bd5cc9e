//! One-step sign-gradient attacks and the plain-versus-augmented robustness
//! comparison.

use serde::{Deserialize, Serialize};

use crate::augment::{augclip_estimate, augclip_score, AugConfig, AugSpec};
use crate::error::{Error, Result};
use crate::genscore::{generate, Generator, Scorer, TextEmbedding};
use crate::image::ImageGrid;
use crate::optim::{sample_candidate, ClassTable, InitSettings};
use crate::par;
use crate::rng::RngStream;

pub const DEFAULT_EPSILON: f64 = 4.0 / 255.0;

/// The `attack.*` configuration block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackSettings {
    /// Infinity-norm budget in pixel units.
    pub epsilon: f64,
    pub seeds: usize,
}

impl Default for AttackSettings {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            seeds: 50,
        }
    }
}

impl AttackSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!(
                "attack.epsilon must be >= 0, got {}",
                self.epsilon
            )));
        }
        if self.seeds == 0 {
            return Err(Error::Config("attack.seeds must be >= 1".into()));
        }
        Ok(())
    }
}

/// `clamp(I + eps * sign(grad), 0, 1)` with `sign(0) = 0`.
pub fn fgsm(
    score_eval: impl Fn(&ImageGrid) -> Result<(f64, ImageGrid)>,
    image: &ImageGrid,
    epsilon: f64,
) -> Result<ImageGrid> {
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidParams(format!("epsilon must be >= 0, got {epsilon}")));
    }
    let (_, grad) = score_eval(image)?;
    image.same_dims(&grad, "attack gradient")?;
    if grad.as_slice().iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("attack gradient"));
    }
    let mut out = image.clone();
    for (x, g) in out.as_mut_slice().iter_mut().zip(grad.as_slice()) {
        let sign = if *g > 0.0 {
            1.0
        } else if *g < 0.0 {
            -1.0
        } else {
            0.0
        };
        let mut y = (*x + epsilon * sign).clamp(0.0, 1.0);
        // rounding can overshoot the budget by an ulp
        while (y - *x).abs() > epsilon {
            y = if y > *x { y.next_down() } else { y.next_up() };
        }
        *x = y;
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct AttackGains {
    pub gain_plain: f64,
    pub gain_aug: f64,
    pub attacked_plain: ImageGrid,
    pub attacked_aug: ImageGrid,
}

/// Attacks the plain score and, separately, the augmented score estimated
/// with `attack_aug`. The augmented gain is measured with `eval_aug`, an
/// independent fixed stream, so the attacker cannot overfit the draws it
/// is judged on.
pub fn attack_gain_report(
    scorer: &dyn Scorer,
    text: &TextEmbedding,
    image: &ImageGrid,
    epsilon: f64,
    attack_aug: &AugSpec,
    eval_aug: &AugSpec,
) -> Result<AttackGains> {
    let plain = |img: &ImageGrid| scorer.score_and_grad(text, img);
    let attacked_plain = fgsm(plain, image, epsilon)?;
    let gain_plain = scorer.score(text, &attacked_plain)? - scorer.score(text, image)?;

    let aug = |img: &ImageGrid| augclip_estimate(scorer, text, img, attack_aug);
    let attacked_aug = fgsm(aug, image, epsilon)?;
    let gain_aug =
        augclip_score(scorer, text, &attacked_aug, eval_aug)? - augclip_score(scorer, text, image, eval_aug)?;
    Ok(AttackGains {
        gain_plain,
        gain_aug,
        attacked_plain,
        attacked_aug,
    })
}

#[derive(Debug, Clone)]
pub struct AttackTrial {
    pub seed: usize,
    pub image: ImageGrid,
    pub gains: AttackGains,
}

/// Trial `i` attacks the image of a random code drawn from `stream.derive(i)`;
/// its attack and evaluation augmentations come from two further derived
/// streams.
pub fn attack_trials(
    gen: &dyn Generator,
    scorer: &dyn Scorer,
    text: &TextEmbedding,
    aug: &AugConfig,
    settings: &AttackSettings,
    stream: RngStream,
) -> Result<Vec<AttackTrial>> {
    let d = gen.dims();
    let init = InitSettings::default();
    let table = ClassTable::new(init.classes, d.y_dim, init.class_seed);
    par::try_map_range(settings.seeds, |i| {
        let s = stream.derive(i as u64);
        let code = sample_candidate((d.z_dim, d.y_dim), &init, &table, s, 0);
        let image = generate(gen, &code)?;
        let gains = attack_gain_report(
            scorer,
            text,
            &image,
            settings.epsilon,
            &aug.spec(s.derive(1)),
            &aug.spec(s.derive(2)),
        )?;
        Ok(AttackTrial { seed: i, image, gains })
    })
}
