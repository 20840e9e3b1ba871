//! Latent sampling with the probability-flow ODE in σ-time, Heun steps and
//! classifier-free guidance.

mod generate;
mod network;
mod score;


use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

pub use generate::{decode_sparse_volume, generate_shapes, GenerateConfig, GeneratedShapes};
pub use network::{train_denoiser, DenoiserTrainConfig, ToyDenoiser};
pub use score::{DeltaScore, EmpiricalScore, GaussianScore, ScoreFunction};

use crate::config::KeyValues;
use crate::error::{Error, Result};
use crate::nnet::{LatentSet, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSchedule {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub rho: f64,
    pub steps: usize,
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        NoiseSchedule {
            sigma_min: 0.002,
            sigma_max: 80.0,
            rho: 7.0,
            steps: 32,
        }
    }
}

impl NoiseSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_min > 0.0 && self.sigma_min < self.sigma_max && self.sigma_max.is_finite()) {
            return Err(Error::invalid(format!(
                "need 0 < sigma_min < sigma_max, got {} and {}",
                self.sigma_min, self.sigma_max
            )));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::invalid(format!("rho must be positive, got {}", self.rho)));
        }
        if self.steps < 2 {
            return Err(Error::invalid(format!("need at least 2 steps, got {}", self.steps)));
        }
        Ok(())
    }
}

/// `steps` levels warped by `rho` from `sigma_max` down to `sigma_min`, then 0.
pub fn schedule_sigmas(sched: &NoiseSchedule) -> Result<Vec<f64>> {
    sched.validate()?;
    let n = sched.steps;
    let inv = 1.0 / sched.rho;
    let (hi, lo) = (sched.sigma_max.powf(inv), sched.sigma_min.powf(inv));
    let mut out: Vec<f64> = (0..n)
        .map(|i| (hi + i as f64 / (n - 1) as f64 * (lo - hi)).powf(sched.rho))
        .collect();
    out[0] = sched.sigma_max;
    out[n - 1] = sched.sigma_min;
    out.push(0.0);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GuidanceConvention {
    /// `(1 + w) θ(∅) − w θ(c)`, the formula exactly as printed.
    AsPaper,
    /// `(1 + w) θ(c) − w θ(∅)`.
    #[default]
    Standard,
}

impl std::str::FromStr for GuidanceConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "as-paper" | "as_paper" => Ok(GuidanceConvention::AsPaper),
            "standard" => Ok(GuidanceConvention::Standard),
            other => Err(Error::invalid(format!("unknown guidance convention {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GuidanceConfig {
    pub w: f64,
    pub convention: GuidanceConvention,
}

/// Guided combination of the unconditional and conditional branches.
pub fn combine_guidance(uncond: &Tensor, cond: &Tensor, cfg: &GuidanceConfig) -> Tensor {
    let (amp, damp) = match cfg.convention {
        GuidanceConvention::AsPaper => (uncond, cond),
        GuidanceConvention::Standard => (cond, uncond),
    };
    Tensor {
        shape: amp.shape.clone(),
        data: amp
            .data
            .iter()
            .zip(&damp.data)
            .map(|(a, b)| (1.0 + cfg.w) * a - cfg.w * b)
            .collect(),
    }
}

/// Classifier-free guided score. At `w = 0` only the selected branch is
/// evaluated; without a condition both branches coincide.
pub fn cfg_score(
    score: &dyn ScoreFunction,
    state: &Tensor,
    sigma: f64,
    condition: Option<usize>,
    cfg: &GuidanceConfig,
) -> Result<Tensor> {
    if cfg.w == 0.0 {
        return match cfg.convention {
            GuidanceConvention::AsPaper => score.score(state, sigma, None),
            GuidanceConvention::Standard => score.score(state, sigma, condition),
        };
    }
    if condition.is_none() {
        return score.score(state, sigma, None);
    }
    let uncond = score.score(state, sigma, None)?;
    let cond = score.score(state, sigma, condition)?;
    Ok(combine_guidance(&uncond, &cond, cfg))
}

fn checked(s: Tensor, like: &Tensor) -> Result<Tensor> {
    if s.shape != like.shape {
        return Err(Error::shape(format!("score shape {:?} vs state {:?}", s.shape, like.shape)));
    }
    if !s.is_finite() {
        return Err(Error::Numeric("score returned non-finite values".into()));
    }
    Ok(s)
}

/// One step of `dz/dσ = −σ Score(z, σ)` from `sigma_cur` to `sigma_next`:
/// trapezoidal predictor-corrector, or plain Euler when `sigma_next = 0`.
pub fn ode_step_heun<F>(state: &Tensor, sigma_cur: f64, sigma_next: f64, score: F) -> Result<Tensor>
where
    F: Fn(&Tensor, f64) -> Result<Tensor>,
{
    if !(sigma_cur > sigma_next && sigma_next >= 0.0) {
        return Err(Error::invalid(format!("need sigma_cur > sigma_next >= 0, got {sigma_cur} and {sigma_next}")));
    }
    let h = sigma_next - sigma_cur;
    let s0 = checked(score(state, sigma_cur)?, state)?;
    let d0: Vec<f64> = s0.data.iter().map(|s| -sigma_cur * s).collect();
    let euler = Tensor {
        shape: state.shape.clone(),
        data: state.data.iter().zip(&d0).map(|(z, d)| z + h * d).collect(),
    };
    if sigma_next == 0.0 {
        return Ok(euler);
    }
    let s1 = checked(score(&euler, sigma_next)?, state)?;
    Ok(Tensor {
        shape: state.shape.clone(),
        data: state
            .data
            .iter()
            .zip(&d0)
            .zip(&s1.data)
            .map(|((z, a), s)| z + 0.5 * h * (a - sigma_next * s))
            .collect(),
    })
}

/// Integrates through consecutive levels of `sigmas`.
pub fn integrate<F>(state: &Tensor, sigmas: &[f64], score: F) -> Result<Tensor>
where
    F: Fn(&Tensor, f64) -> Result<Tensor>,
{
    let mut z = state.clone();
    for w in sigmas.windows(2) {
        z = ode_step_heun(&z, w[0], w[1], &score)?;
    }
    Ok(z)
}

/// Draws `count` latents of shape `n_s x channels`. Sample `i` starts from
/// Gaussian noise of scale `sigma_max` seeded with `seed + i`.
#[allow(clippy::too_many_arguments)]
pub fn sample_latents(
    score: &dyn ScoreFunction,
    n_s: usize,
    channels: usize,
    sched: &NoiseSchedule,
    cfg: &GuidanceConfig,
    condition: Option<usize>,
    seed: u64,
    count: usize,
) -> Result<Vec<LatentSet>> {
    let sigmas = schedule_sigmas(sched)?;
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let data = (0..n_s * channels)
                .map(|_| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    sched.sigma_max * e
                })
                .collect();
            let z0 = Tensor::matrix(n_s, channels, data)?;
            let z = integrate(&z0, &sigmas, |z, s| cfg_score(score, z, s, condition, cfg))?;
            LatentSet::new(z)
        })
        .collect()
}

/// Sampler settings as read from a `key=value` file.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub schedule: NoiseSchedule,
    pub guidance: GuidanceConfig,
    pub seed: u64,
    pub count: usize,
    pub category: Option<usize>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            schedule: NoiseSchedule::default(),
            guidance: GuidanceConfig::default(),
            seed: 0,
            count: 1,
            category: None,
        }
    }
}

impl SamplerConfig {
    pub const KEYS: [&'static str; 9] = [
        "sigma_min",
        "sigma_max",
        "rho",
        "steps",
        "guidance_w",
        "guidance_convention",
        "seed",
        "count",
        "category",
    ];

    /// Overrides fields from recognized keys, leaving others untouched.
    pub fn apply(&mut self, kv: &mut KeyValues) -> Result<()> {
        kv.set("sigma_min", &mut self.schedule.sigma_min)?;
        kv.set("sigma_max", &mut self.schedule.sigma_max)?;
        kv.set("rho", &mut self.schedule.rho)?;
        kv.set("steps", &mut self.schedule.steps)?;
        kv.set("guidance_w", &mut self.guidance.w)?;
        kv.set("guidance_convention", &mut self.guidance.convention)?;
        kv.set("seed", &mut self.seed)?;
        kv.set("count", &mut self.count)?;
        if let Some(c) = kv.get::<String>("category")? {
            self.category = match c.as_str() {
                "" | "none" => None,
                s => Some(s.parse().map_err(|_| Error::Format(format!("invalid category {s:?}")))?),
            };
        }
        Ok(())
    }

    /// Parses a complete sampler file; unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = KeyValues::parse(text)?;
        let mut cfg = SamplerConfig::default();
        cfg.apply(&mut kv)?;
        kv.finish()?;
        cfg.schedule.validate()?;
        Ok(cfg)
    }
}
