use crate::error::{Error, Result};
use crate::nnet::Tensor;

/// `∇ log p_σ(z)` for the data law blurred by noise of scale `σ`.
pub trait ScoreFunction: Sync {
    fn score(&self, state: &Tensor, sigma: f64, condition: Option<usize>) -> Result<Tensor>;
}

fn same_shape(a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape != b.shape {
        return Err(Error::shape(format!("state {:?} vs reference {:?}", a.shape, b.shape)));
    }
    Ok(())
}

/// Data concentrated at a single point `mean`: `(μ − z) / σ²`.
#[derive(Debug, Clone)]
pub struct DeltaScore {
    pub mean: Tensor,
}

impl ScoreFunction for DeltaScore {
    fn score(&self, state: &Tensor, sigma: f64, _: Option<usize>) -> Result<Tensor> {
        same_shape(state, &self.mean)?;
        let inv = 1.0 / (sigma * sigma);
        Ok(Tensor {
            shape: state.shape.clone(),
            data: self.mean.data.iter().zip(&state.data).map(|(m, z)| (m - z) * inv).collect(),
        })
    }
}

/// Isotropic Gaussian data `N(μ, s² I)`: `(μ − z) / (s² + σ²)`.
#[derive(Debug, Clone)]
pub struct GaussianScore {
    pub mean: Tensor,
    pub variance: f64,
}

impl ScoreFunction for GaussianScore {
    fn score(&self, state: &Tensor, sigma: f64, _: Option<usize>) -> Result<Tensor> {
        same_shape(state, &self.mean)?;
        let inv = 1.0 / (self.variance + sigma * sigma);
        Ok(Tensor {
            shape: state.shape.clone(),
            data: self.mean.data.iter().zip(&state.data).map(|(m, z)| (m - z) * inv).collect(),
        })
    }
}

/// Exact score of a finite set of labelled examples blurred by `σ`; a
/// condition restricts the mixture to examples with that label.
#[derive(Debug, Clone)]
pub struct EmpiricalScore {
    pub examples: Vec<Tensor>,
    pub labels: Vec<Option<usize>>,
}

impl EmpiricalScore {
    pub fn new(examples: Vec<Tensor>, labels: Vec<Option<usize>>) -> Result<Self> {
        if examples.is_empty() {
            return Err(Error::invalid("empirical score needs at least one example"));
        }
        if examples.len() != labels.len() {
            return Err(Error::shape("one label per example"));
        }
        if examples.iter().any(|e| e.shape != examples[0].shape) {
            return Err(Error::shape("examples differ in shape"));
        }
        Ok(EmpiricalScore { examples, labels })
    }

    /// Posterior mean of the clean example given `state`.
    pub fn denoise(&self, state: &Tensor, sigma: f64, condition: Option<usize>) -> Result<Tensor> {
        same_shape(state, &self.examples[0])?;
        let chosen: Vec<&Tensor> = self
            .examples
            .iter()
            .zip(&self.labels)
            .filter(|(_, l)| condition.is_none() || **l == condition)
            .map(|(e, _)| e)
            .collect();
        if chosen.is_empty() {
            return Err(Error::invalid(format!("no examples with label {condition:?}")));
        }
        let logits: Vec<f64> = chosen
            .iter()
            .map(|e| {
                let d2: f64 = e.data.iter().zip(&state.data).map(|(a, b)| (a - b) * (a - b)).sum();
                -d2 / (2.0 * sigma * sigma)
            })
            .collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = w.iter().sum();
        let mut out = vec![0.0; state.len()];
        for (e, wi) in chosen.iter().zip(&w) {
            for (o, v) in out.iter_mut().zip(&e.data) {
                *o += wi / total * v;
            }
        }
        Tensor::new(state.shape.clone(), out)
    }
}

impl ScoreFunction for EmpiricalScore {
    fn score(&self, state: &Tensor, sigma: f64, condition: Option<usize>) -> Result<Tensor> {
        let d = self.denoise(state, sigma, condition)?;
        let inv = 1.0 / (sigma * sigma);
        Ok(Tensor {
            shape: state.shape.clone(),
            data: d.data.iter().zip(&state.data).map(|(d, z)| (d - z) * inv).collect(),
        })
    }
}
