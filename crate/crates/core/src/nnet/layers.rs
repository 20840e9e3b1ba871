use rand::Rng;

use super::graph::{Graph, Var};
use super::params::{Bound, ParamId, Params};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    pub fn new<R: Rng>(params: &mut Params, name: &str, d_in: usize, d_out: usize, rng: &mut R) -> Self {
        let std = 1.0 / (d_in.max(1) as f64).sqrt();
        Linear {
            w: params.add(format!("{name}.w"), Tensor::randn(d_in, d_out, std, rng)),
            b: params.add(format!("{name}.b"), Tensor::zeros(1, d_out)),
        }
    }

    pub fn forward(&self, g: &mut Graph, p: &Bound, x: Var) -> Result<Var> {
        let y = g.matmul(x, p.var(self.w))?;
        g.add_row(y, p.var(self.b))
    }
}

/// Per-channel scale and shift.
#[derive(Debug, Clone)]
pub struct Affine {
    pub gamma: ParamId,
    pub beta: ParamId,
}

impl Affine {
    pub fn new(params: &mut Params, name: &str, d: usize) -> Self {
        Affine {
            gamma: params.add(format!("{name}.gamma"), Tensor::filled(1, d, 1.0)),
            beta: params.add(format!("{name}.beta"), Tensor::zeros(1, d)),
        }
    }

    pub fn forward(&self, g: &mut Graph, p: &Bound, x: Var) -> Result<Var> {
        let y = g.mul_row(x, p.var(self.gamma))?;
        g.add_row(y, p.var(self.beta))
    }
}

/// Layer normalization followed by a learnable affine.
pub fn normalize(g: &mut Graph, p: &Bound, affine: &Affine, x: Var) -> Result<Var> {
    let n = g.layer_norm(x)?;
    affine.forward(g, p, n)
}

/// Linear, GELU, linear.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub first: Linear,
    pub second: Linear,
}

impl Mlp {
    pub fn new<R: Rng>(params: &mut Params, name: &str, d_in: usize, hidden: usize, d_out: usize, rng: &mut R) -> Self {
        Mlp {
            first: Linear::new(params, &format!("{name}.0"), d_in, hidden, rng),
            second: Linear::new(params, &format!("{name}.1"), hidden, d_out, rng),
        }
    }

    pub fn forward(&self, g: &mut Graph, p: &Bound, x: Var) -> Result<Var> {
        let h = self.first.forward(g, p, x)?;
        let h = g.gelu(h);
        self.second.forward(g, p, h)
    }
}

/// Shared per-point transform: linear, layer norm with affine, GELU.
#[derive(Debug, Clone)]
pub struct PointNetLayer {
    pub linear: Linear,
    pub norm: Affine,
}

impl PointNetLayer {
    pub fn new<R: Rng>(params: &mut Params, name: &str, d_in: usize, d_out: usize, rng: &mut R) -> Self {
        PointNetLayer {
            linear: Linear::new(params, &format!("{name}.linear"), d_in, d_out, rng),
            norm: Affine::new(params, &format!("{name}.norm"), d_out),
        }
    }
}

pub fn pointnet_layer(g: &mut Graph, p: &Bound, layer: &PointNetLayer, x: Var) -> Result<Var> {
    let h = layer.linear.forward(g, p, x)?;
    let h = normalize(g, p, &layer.norm, h)?;
    Ok(g.gelu(h))
}

/// Indices of the `k` nearest `base` rows to each `query` row in Euclidean
/// feature distance, nearest first, ties by lower index; flattened row-major.
pub fn feature_knn(query: &Tensor, base: &Tensor, k: usize) -> Result<Vec<usize>> {
    let (nq, d) = query.dims2()?;
    let (nb, d2) = base.dims2()?;
    if d != d2 {
        return Err(Error::shape(format!("feature widths {d} vs {d2}")));
    }
    if k == 0 || k > nb {
        return Err(Error::TooFew { requested: k, available: nb });
    }
    let mut out = Vec::with_capacity(nq * k);
    let mut scored: Vec<(f64, usize)> = Vec::with_capacity(nb);
    for i in 0..nq {
        let q = query.row(i);
        scored.clear();
        scored.extend((0..nb).map(|j| {
            let d2: f64 = q.iter().zip(base.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            (d2, j)
        }));
        scored.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let head = &mut scored[..k];
        head.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        out.extend(head.iter().map(|&(_, j)| j));
    }
    Ok(out)
}

/// Groups the `k` surface rows nearest (in feature space) to each skeleton
/// row and max-pools them. Gradients reach `surf` only; the grouping is a
/// piecewise-constant selection.
pub fn query_group_maxpool(g: &mut Graph, skel: Var, surf: Var, k: usize) -> Result<Var> {
    let idx = feature_knn(g.value(skel), g.value(surf), k)?;
    let grouped = g.gather_rows(surf, &idx)?;
    g.max_pool_groups(grouped, k)
}

/// Sinusoidal embedding of `m x 3` coordinates into `d` channels: for each
/// axis in turn, `d/6` (sin, cos) pairs at frequencies `2^j * pi`.
pub fn positional_embed(coords: &Tensor, d: usize) -> Result<Tensor> {
    let (m, c) = coords.dims2()?;
    if c != 3 {
        return Err(Error::shape(format!("coordinates must have 3 columns, got {c}")));
    }
    if d == 0 || d % 6 != 0 {
        return Err(Error::invalid(format!("embedding width {d} is not a positive multiple of 6")));
    }
    let freqs = d / 6;
    let mut data = Vec::with_capacity(m * d);
    for i in 0..m {
        for a in 0..3 {
            let x = coords.get(i, a);
            for j in 0..freqs {
                let w = (1u64 << j) as f64 * std::f64::consts::PI;
                data.push((w * x).sin());
                data.push((w * x).cos());
            }
        }
    }
    Tensor::matrix(m, d, data)
}

/// Single-head scaled dot-product attention with learned projections.
#[derive(Debug, Clone)]
pub struct Attention {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
    width: usize,
}

impl Attention {
    pub fn new<R: Rng>(params: &mut Params, name: &str, d: usize, rng: &mut R) -> Self {
        Attention {
            q: Linear::new(params, &format!("{name}.q"), d, d, rng),
            k: Linear::new(params, &format!("{name}.k"), d, d, rng),
            v: Linear::new(params, &format!("{name}.v"), d, d, rng),
            o: Linear::new(params, &format!("{name}.o"), d, d, rng),
            width: d,
        }
    }

    /// Attention weights (rows = queries, softmax over keys) and the output.
    pub fn forward_with_weights(&self, g: &mut Graph, p: &Bound, queries: Var, keys: Var) -> Result<(Var, Var)> {
        let q = self.q.forward(g, p, queries)?;
        let k = self.k.forward(g, p, keys)?;
        let v = self.v.forward(g, p, keys)?;
        let kt = g.transpose(k)?;
        let logits = g.matmul(q, kt)?;
        let logits = g.scale(logits, 1.0 / (self.width as f64).sqrt());
        let w = g.softmax_rows(logits)?;
        let mixed = g.matmul(w, v)?;
        Ok((w, self.o.forward(g, p, mixed)?))
    }

    pub fn forward(&self, g: &mut Graph, p: &Bound, queries: Var, keys: Var) -> Result<Var> {
        Ok(self.forward_with_weights(g, p, queries, keys)?.1)
    }
}

/// Self-attention over the latent rows and cross-attention from the query
/// rows into them, each with a residual and layer norm.
#[derive(Debug, Clone)]
pub struct FusionBlock {
    pub self_attn: Attention,
    pub self_norm: Affine,
    pub query_mlp: Mlp,
    pub cross_attn: Attention,
    pub cross_norm: Affine,
}

impl FusionBlock {
    pub fn new<R: Rng>(params: &mut Params, name: &str, d: usize, rng: &mut R) -> Self {
        FusionBlock {
            self_attn: Attention::new(params, &format!("{name}.sa"), d, rng),
            self_norm: Affine::new(params, &format!("{name}.sa_norm"), d),
            query_mlp: Mlp::new(params, &format!("{name}.mlp"), d, 2 * d, d, rng),
            cross_attn: Attention::new(params, &format!("{name}.ca"), d, rng),
            cross_norm: Affine::new(params, &format!("{name}.ca_norm"), d),
        }
    }
}

/// Returns the updated `(f_q, f_z)`.
pub fn fusion_block(g: &mut Graph, p: &Bound, block: &FusionBlock, f_q: Var, f_z: Var) -> Result<(Var, Var)> {
    let (m, d) = g.value(f_q).dims2()?;
    let (_, dz) = g.value(f_z).dims2()?;
    if d != dz {
        return Err(Error::shape(format!("query width {d} vs latent width {dz}")));
    }
    let sa = block.self_attn.forward(g, p, f_z, f_z)?;
    let z = g.add(f_z, sa)?;
    let z = normalize(g, p, &block.self_norm, z)?;
    let q = block.query_mlp.forward(g, p, f_q)?;
    let ca = block.cross_attn.forward(g, p, q, z)?;
    let out = g.add(q, ca)?;
    let out = normalize(g, p, &block.cross_norm, out)?;
    debug_assert_eq!(g.value(out).rows(), m);
    Ok((out, z))
}
