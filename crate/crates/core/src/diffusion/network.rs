//! A small attention denoiser over latent point sets with EDM-style
//! preconditioning, trained by denoising score matching.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::score::ScoreFunction;
use crate::error::{Error, Result};
use crate::io::{self, NamedArray};
use crate::nnet::{normalize, Adam, Affine, Attention, Bound, Graph, Linear, Mlp, Params, Tensor, Var};

const ARCH_RECORD: &str = "denoiser";

#[derive(Debug, Clone)]
pub struct ToyDenoiser {
    pub channels: usize,
    pub hidden: usize,
    /// Labels `0..classes`; index `classes` is the null (unconditional) label.
    pub classes: usize,
    pub sigma_data: f64,
    pub params: Params,
    input: Linear,
    attn: Attention,
    attn_norm: Affine,
    mlp: Mlp,
    mlp_norm: Affine,
    output: Linear,
}

impl ToyDenoiser {
    pub fn new(channels: usize, hidden: usize, classes: usize, sigma_data: f64, seed: u64) -> Result<Self> {
        if channels == 0 || hidden == 0 {
            return Err(Error::invalid("denoiser widths must be positive"));
        }
        if !(sigma_data > 0.0 && sigma_data.is_finite()) {
            return Err(Error::invalid(format!("sigma_data must be positive, got {sigma_data}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Params::new();
        let input = Linear::new(&mut params, "den.input", channels + 1 + classes + 1, hidden, &mut rng);
        let attn = Attention::new(&mut params, "den.attn", hidden, &mut rng);
        let attn_norm = Affine::new(&mut params, "den.attn_norm", hidden);
        let mlp = Mlp::new(&mut params, "den.mlp", hidden, 2 * hidden, hidden, &mut rng);
        let mlp_norm = Affine::new(&mut params, "den.mlp_norm", hidden);
        let output = Linear::new(&mut params, "den.output", hidden, channels, &mut rng);
        Ok(ToyDenoiser {
            channels,
            hidden,
            classes,
            sigma_data,
            params,
            input,
            attn,
            attn_norm,
            mlp,
            mlp_norm,
            output,
        })
    }

    fn label_index(&self, condition: Option<usize>) -> Result<usize> {
        match condition {
            None => Ok(self.classes),
            Some(c) if c < self.classes => Ok(c),
            Some(c) => Err(Error::invalid(format!("category {c} outside 0..{}", self.classes))),
        }
    }

    /// `D(z, σ) = c_skip z + c_out F(c_in z, ln σ / 4, label)` on the tape.
    pub fn denoise_graph(&self, g: &mut Graph, p: &Bound, z: Var, sigma: f64, condition: Option<usize>) -> Result<Var> {
        let (n, c) = g.value(z).dims2()?;
        if c != self.channels {
            return Err(Error::shape(format!("state has {c} channels, denoiser expects {}", self.channels)));
        }
        let sd2 = self.sigma_data * self.sigma_data;
        let s2 = sigma * sigma;
        let c_in = 1.0 / (s2 + sd2).sqrt();
        let c_skip = sd2 / (s2 + sd2);
        let c_out = sigma * self.sigma_data / (s2 + sd2).sqrt();
        let label = self.label_index(condition)?;
        let mut extra = Tensor::zeros(n, 2 + self.classes);
        for i in 0..n {
            extra.data[i * (2 + self.classes)] = sigma.ln() / 4.0;
            extra.data[i * (2 + self.classes) + 1 + label] = 1.0;
        }
        let extra = g.leaf(extra)?;
        let x = g.scale(z, c_in);
        let x = g.concat_cols(x, extra)?;
        let h = self.input.forward(g, p, x)?;
        let a = self.attn.forward(g, p, h, h)?;
        let h = g.add(h, a)?;
        let h = normalize(g, p, &self.attn_norm, h)?;
        let m = self.mlp.forward(g, p, h)?;
        let h = g.add(h, m)?;
        let h = normalize(g, p, &self.mlp_norm, h)?;
        let f = self.output.forward(g, p, h)?;
        let f = g.scale(f, c_out);
        let skip = g.scale(z, c_skip);
        g.add(skip, f)
    }

    pub fn denoise(&self, state: &Tensor, sigma: f64, condition: Option<usize>) -> Result<Tensor> {
        let mut g = Graph::new();
        let p = self.params.bind(&mut g)?;
        let z = g.leaf(state.clone())?;
        let d = self.denoise_graph(&mut g, &p, z, sigma, condition)?;
        Ok(g.value(d).clone())
    }

    pub fn to_records(&self) -> Vec<NamedArray> {
        let mut recs = vec![NamedArray {
            name: ARCH_RECORD.into(),
            dims: vec![4],
            data: vec![self.channels as f64, self.hidden as f64, self.classes as f64, self.sigma_data],
        }];
        recs.extend(self.params.to_records());
        recs
    }

    pub fn from_records(records: &[NamedArray]) -> Result<Self> {
        let arch = records
            .iter()
            .find(|r| r.name == ARCH_RECORD && r.data.len() == 4)
            .ok_or_else(|| Error::Format("checkpoint lacks a denoiser record".into()))?;
        let a = &arch.data;
        let mut net = ToyDenoiser::new(a[0] as usize, a[1] as usize, a[2] as usize, a[3], 0)?;
        net.params.load_records(records)?;
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_checkpoint(path, &self.to_records())
    }

    pub fn load(path: &Path) -> Result<Self> {
        ToyDenoiser::from_records(&io::read_checkpoint(path)?)
    }
}

impl ScoreFunction for ToyDenoiser {
    fn score(&self, state: &Tensor, sigma: f64, condition: Option<usize>) -> Result<Tensor> {
        let d = self.denoise(state, sigma, condition)?;
        let inv = 1.0 / (sigma * sigma);
        Ok(Tensor {
            shape: state.shape.clone(),
            data: d.data.iter().zip(&state.data).map(|(d, z)| (d - z) * inv).collect(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct DenoiserTrainConfig {
    pub steps: usize,
    pub lr: f64,
    pub seed: u64,
    pub hidden: usize,
    /// Examples per step.
    pub batch: usize,
    /// Probability of replacing the label with the null label.
    pub p_uncond: f64,
    /// Mean and spread of `ln σ` during training.
    pub p_mean: f64,
    pub p_std: f64,
}

impl Default for DenoiserTrainConfig {
    fn default() -> Self {
        DenoiserTrainConfig {
            steps: 200,
            lr: 2e-3,
            seed: 0,
            hidden: 32,
            batch: 8,
            p_uncond: 0.1,
            p_mean: -1.2,
            p_std: 1.2,
        }
    }
}

/// Fits a [`ToyDenoiser`] to `examples` with the σ-weighted denoising loss.
/// Returns the network and the per-step batch losses.
pub fn train_denoiser(
    examples: &[Tensor],
    labels: &[Option<usize>],
    cfg: &DenoiserTrainConfig,
) -> Result<(ToyDenoiser, Vec<f64>)> {
    let first = examples.first().ok_or_else(|| Error::invalid("no training latents"))?;
    if labels.len() != examples.len() || examples.iter().any(|e| e.shape != first.shape) {
        return Err(Error::shape("training latents must share one shape and carry one label each"));
    }
    let (_, channels) = first.dims2()?;
    let classes = labels.iter().flatten().map(|&c| c + 1).max().unwrap_or(0);
    let all: Vec<f64> = examples.iter().flat_map(|e| e.data.iter().copied()).collect();
    let mean = all.iter().sum::<f64>() / all.len() as f64;
    let var = all.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / all.len() as f64;
    let sigma_data = var.sqrt().max(1e-3);
    let mut net = ToyDenoiser::new(channels, cfg.hidden, classes, sigma_data, cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let log_sigma = Normal::new(cfg.p_mean, cfg.p_std).map_err(|e| Error::invalid(e.to_string()))?;
    let mut opt = Adam::new(cfg.lr, net.params.values());
    let mut losses = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let mut g = Graph::new();
        let p = net.params.bind(&mut g)?;
        let mut total: Option<Var> = None;
        for _ in 0..cfg.batch.max(1) {
            let i = rng.random_range(0..examples.len());
            let x = &examples[i];
            let sigma: f64 = log_sigma.sample(&mut rng).exp();
            let noisy = Tensor {
                shape: x.shape.clone(),
                data: x
                    .data
                    .iter()
                    .map(|v| {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        v + sigma * e
                    })
                    .collect(),
            };
            let label = if rng.random::<f64>() < cfg.p_uncond { None } else { labels[i] };
            let z = g.leaf(noisy)?;
            let d = net.denoise_graph(&mut g, &p, z, sigma, label)?;
            let target = g.leaf(x.clone())?;
            let l = g.mse(d, target)?;
            let weight = (sigma * sigma + sigma_data * sigma_data) / (sigma * sigma_data).powi(2);
            let l = g.scale(l, weight / cfg.batch.max(1) as f64);
            total = Some(match total {
                None => l,
                Some(t) => g.add(t, l)?,
            });
        }
        let loss = total.expect("batch is non-empty");
        let value = g.value(loss).data[0];
        if !value.is_finite() {
            return Err(Error::Numeric(format!("denoiser training diverged at step {step}")));
        }
        losses.push(value);
        let grads = g.backward(loss);
        let gs: Vec<Tensor> = p
            .vars()
            .iter()
            .zip(net.params.values())
            .map(|(&v, t)| grads.get_or_zeros(v, t))
            .collect();
        opt.step(net.params.values_mut(), &gs);
    }
    Ok((net, losses))
}
