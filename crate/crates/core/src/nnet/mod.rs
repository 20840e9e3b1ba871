//! Toy-scale autoencoder: tensors, a reverse-mode tape, layers, the
//! skeleton-conditioned encoder and attention decoder, and training.

mod graph;
mod layers;
mod model;
mod params;
mod tensor;
mod train;


pub use graph::{Gradients, Graph, Var, LAYER_NORM_EPS};
pub use layers::{
    feature_knn, fusion_block, normalize, pointnet_layer, positional_embed, query_group_maxpool, Affine, Attention,
    FusionBlock, Linear, Mlp, PointNetLayer,
};
pub use model::{composite_loss, destandardize, standardize, ArchConfig, AutoEncoder, Decoder, Encoder, LatentSet};
pub use params::{Bound, ParamId, Params};
pub use tensor::Tensor;
pub use train::{train_toy, train_toy_with_skeleton, Adam, TrainConfig, TrainReport, TOY_MAX_LATENT, TOY_MAX_POINTS, TOY_MAX_SAMPLES, TOY_MAX_SKELETON};

use crate::error::Result;

/// Norm-wise relative error between the tape gradient of `sum(f(inputs))`
/// and central finite differences with the given step.
pub fn gradient_check<F>(inputs: &[Tensor], step: f64, f: F) -> Result<f64>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let eval = |inputs: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone())).collect::<Result<_>>()?;
        let out = f(&mut g, &vars)?;
        Ok(g.value(out).data.iter().sum())
    };
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone())).collect::<Result<_>>()?;
    let out = f(&mut g, &vars)?;
    let grads = g.backward(out);

    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    let mut work = inputs.to_vec();
    for (t, &v) in inputs.iter().zip(&vars) {
        analytic.extend(grads.get_or_zeros(v, t).data);
    }
    for ti in 0..work.len() {
        for i in 0..work[ti].len() {
            let orig = work[ti].data[i];
            work[ti].data[i] = orig + step;
            let hi = eval(&work)?;
            work[ti].data[i] = orig - step;
            let lo = eval(&work)?;
            work[ti].data[i] = orig;
            numeric.push((hi - lo) / (2.0 * step));
        }
    }
    Ok(relative_error(&analytic, &numeric))
}

/// `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}
