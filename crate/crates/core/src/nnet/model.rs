use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::graph::{Graph, Var};
use super::layers::{
    fusion_block, normalize, pointnet_layer, positional_embed, query_group_maxpool, Affine, FusionBlock, Linear, Mlp,
    PointNetLayer,
};
use super::params::{Bound, Params};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::geom::{Point3, PointCloud};
use crate::io::{self, NamedArray};
use crate::skeleton::Skeleton;

const ARCH_RECORD: &str = "arch";

/// Network hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchConfig {
    /// Width of the initial per-branch MLPs.
    pub init_width: usize,
    /// Feature width `d_l` of each aggregation level.
    pub level_widths: Vec<usize>,
    /// Neighbor count `k_l` of each aggregation level.
    pub level_k: Vec<usize>,
    /// Latent feature channels `d`.
    pub latent_dim: usize,
    /// Number of decoder fusion blocks `M`.
    pub fusion_blocks: usize,
    /// Query positional-embedding width (multiple of 6).
    pub pe_dim: usize,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig {
            init_width: 32,
            level_widths: vec![32, 64],
            level_k: vec![8, 8],
            latent_dim: 32,
            fusion_blocks: 2,
            pe_dim: 36,
        }
    }
}

impl ArchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.level_widths.is_empty() || self.level_widths.len() != self.level_k.len() {
            return Err(Error::invalid("level widths and neighbor counts must be non-empty and equal length"));
        }
        if self.init_width == 0 || self.latent_dim == 0 || self.level_widths.contains(&0) || self.level_k.contains(&0) {
            return Err(Error::invalid("widths and neighbor counts must be positive"));
        }
        if self.pe_dim == 0 || self.pe_dim % 6 != 0 {
            return Err(Error::invalid(format!("pe_dim {} is not a positive multiple of 6", self.pe_dim)));
        }
        Ok(())
    }

    fn to_record(&self) -> NamedArray {
        let mut data = vec![
            self.init_width as f64,
            self.latent_dim as f64,
            self.fusion_blocks as f64,
            self.pe_dim as f64,
        ];
        data.extend(self.level_widths.iter().map(|&w| w as f64));
        data.extend(self.level_k.iter().map(|&k| k as f64));
        NamedArray {
            name: ARCH_RECORD.into(),
            dims: vec![data.len()],
            data,
        }
    }

    fn from_record(rec: &NamedArray) -> Result<Self> {
        let v: Vec<usize> = rec.data.iter().map(|&x| x as usize).collect();
        if v.len() < 6 || (v.len() - 4) % 2 != 0 {
            return Err(Error::Format("malformed architecture record".into()));
        }
        let levels = (v.len() - 4) / 2;
        let arch = ArchConfig {
            init_width: v[0],
            latent_dim: v[1],
            fusion_blocks: v[2],
            pe_dim: v[3],
            level_widths: v[4..4 + levels].to_vec(),
            level_k: v[4 + levels..].to_vec(),
        };
        arch.validate()?;
        Ok(arch)
    }
}

/// `n_s x (4 + d)` latent: skeleton position and radius, then features.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSet {
    pub data: Tensor,
}

impl LatentSet {
    pub fn new(data: Tensor) -> Result<Self> {
        let (_, c) = data.dims2()?;
        if c < 4 {
            return Err(Error::shape(format!("latent needs at least 4 columns, got {c}")));
        }
        Ok(LatentSet { data })
    }

    pub fn n_s(&self) -> usize {
        self.data.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.data.cols() - 4
    }

    /// Columns 0..4 as `[x, y, z, r]` rows.
    pub fn skeleton_rows(&self) -> Vec<[f64; 4]> {
        (0..self.n_s())
            .map(|i| {
                let r = self.data.row(i);
                [r[0], r[1], r[2], r[3]]
            })
            .collect()
    }

    pub fn feature_row(&self, i: usize) -> &[f64] {
        &self.data.row(i)[4..]
    }
}

#[derive(Debug, Clone)]
pub struct Encoder {
    pub surf_mlp: Mlp,
    pub skel_mlp: Mlp,
    pub levels: Vec<PointNetLayer>,
    pub project: Linear,
    pub standardize: Affine,
}

#[derive(Debug, Clone)]
pub struct Decoder {
    pub destandardize: Affine,
    pub latent_in: Linear,
    pub query_in: Linear,
    pub blocks: Vec<FusionBlock>,
    pub out: Linear,
}

/// Skeleton-conditioned point encoder and cross-attention implicit decoder.
#[derive(Debug, Clone)]
pub struct AutoEncoder {
    pub arch: ArchConfig,
    pub params: Params,
    pub encoder: Encoder,
    pub decoder: Decoder,
}

/// Per-row layer norm then the encoder-side affine.
pub fn standardize(g: &mut Graph, p: &Bound, affine: &Affine, feats: Var) -> Result<Var> {
    normalize(g, p, affine, feats)
}

/// Affine on columns `4..`; columns `0..4` pass through untouched.
pub fn destandardize(g: &mut Graph, p: &Bound, affine: &Affine, latent: Var) -> Result<Var> {
    let c = g.value(latent).cols();
    let head = g.slice_cols(latent, 0, 4)?;
    let tail = g.slice_cols(latent, 4, c)?;
    let tail = affine.forward(g, p, tail)?;
    g.concat_cols(head, tail)
}

fn points_tensor(points: &[Point3]) -> Tensor {
    Tensor {
        shape: vec![points.len(), 3],
        data: points.iter().flatten().copied().collect(),
    }
}

fn skeleton_tensor(skel: &Skeleton) -> Tensor {
    Tensor {
        shape: vec![skel.points.len(), 4],
        data: skel.rows().into_iter().flatten().collect(),
    }
}

impl AutoEncoder {
    pub fn new(arch: ArchConfig, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Params::new();
        let w0 = arch.init_width;
        let surf_mlp = Mlp::new(&mut params, "enc.surf_mlp", 3, w0, w0, &mut rng);
        let skel_mlp = Mlp::new(&mut params, "enc.skel_mlp", 4, w0, w0, &mut rng);
        let mut levels = Vec::new();
        let mut prev = w0;
        for (l, &w) in arch.level_widths.iter().enumerate() {
            levels.push(PointNetLayer::new(&mut params, &format!("enc.level{l}"), prev, w, &mut rng));
            prev = w;
        }
        let d = arch.latent_dim;
        let project = Linear::new(&mut params, "enc.project", prev, d, &mut rng);
        let standardize = Affine::new(&mut params, "enc.std", d);
        let destandardize = Affine::new(&mut params, "dec.destd", d);
        let latent_in = Linear::new(&mut params, "dec.latent_in", 4 + d, d, &mut rng);
        let query_in = Linear::new(&mut params, "dec.query_in", arch.pe_dim, d, &mut rng);
        let blocks = (0..arch.fusion_blocks)
            .map(|b| FusionBlock::new(&mut params, &format!("dec.block{b}"), d, &mut rng))
            .collect();
        let out = Linear::new(&mut params, "dec.out", d, 1, &mut rng);
        Ok(AutoEncoder {
            arch,
            params,
            encoder: Encoder {
                surf_mlp,
                skel_mlp,
                levels,
                project,
                standardize,
            },
            decoder: Decoder {
                destandardize,
                latent_in,
                query_in,
                blocks,
                out,
            },
        })
    }

    /// Latent on the tape from `n x 3` surface points and `n_s x 4` skeleton rows.
    pub fn encode_graph(&self, g: &mut Graph, p: &Bound, surf: Var, skel: Var) -> Result<Var> {
        let z = self.encode_features(g, p, surf, skel)?;
        let z = standardize(g, p, &self.encoder.standardize, z)?;
        g.concat_cols(skel, z)
    }

    /// Skeleton-branch features projected to `d` channels, before standardization.
    pub fn encode_features(&self, g: &mut Graph, p: &Bound, surf: Var, skel: Var) -> Result<Var> {
        let (n, c) = g.value(surf).dims2()?;
        let (_, cs) = g.value(skel).dims2()?;
        if c != 3 || cs != 4 {
            return Err(Error::shape(format!("encoder inputs need 3 and 4 columns, got {c} and {cs}")));
        }
        if let Some(&k) = self.arch.level_k.iter().max() {
            if k > n {
                return Err(Error::TooFew { requested: k, available: n });
            }
        }
        let enc = &self.encoder;
        let mut f = enc.surf_mlp.forward(g, p, surf)?;
        let mut fs = enc.skel_mlp.forward(g, p, skel)?;
        for (layer, &k) in enc.levels.iter().zip(&self.arch.level_k) {
            f = pointnet_layer(g, p, layer, f)?;
            let fs_hat = pointnet_layer(g, p, layer, fs)?;
            fs = query_group_maxpool(g, fs_hat, f, k)?;
        }
        enc.project.forward(g, p, fs)
    }

    /// `m x 1` signed distances on the tape.
    pub fn decode_graph(&self, g: &mut Graph, p: &Bound, latent: Var, coords: &Tensor) -> Result<Var> {
        let (_, c) = g.value(latent).dims2()?;
        if c != 4 + self.arch.latent_dim {
            return Err(Error::shape(format!(
                "latent has {c} columns, decoder expects {}",
                4 + self.arch.latent_dim
            )));
        }
        let dec = &self.decoder;
        let z = destandardize(g, p, &dec.destandardize, latent)?;
        let mut f_z = dec.latent_in.forward(g, p, z)?;
        let pe = g.leaf(positional_embed(coords, self.arch.pe_dim)?)?;
        let mut f_q = dec.query_in.forward(g, p, pe)?;
        for block in &dec.blocks {
            (f_q, f_z) = fusion_block(g, p, block, f_q, f_z)?;
        }
        dec.out.forward(g, p, f_q)
    }

    pub fn encode(&self, pc: &PointCloud, skel: &Skeleton) -> Result<LatentSet> {
        pc.require_non_empty()?;
        let mut g = Graph::new();
        let p = self.params.bind(&mut g)?;
        let surf = g.leaf(points_tensor(pc.points()))?;
        let sk = g.leaf(skeleton_tensor(skel))?;
        let z = self.encode_graph(&mut g, &p, surf, sk)?;
        LatentSet::new(g.value(z).clone())
    }

    pub fn decode(&self, latent: &LatentSet, coords: &[Point3]) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let p = self.params.bind(&mut g)?;
        let z = g.leaf(latent.data.clone())?;
        let y = self.decode_graph(&mut g, &p, z, &points_tensor(coords))?;
        Ok(g.value(y).data.clone())
    }

    /// Decodes in chunks of `chunk` queries; each query is independent.
    pub fn decode_chunked(&self, latent: &LatentSet, coords: &[Point3], chunk: usize) -> Result<Vec<f64>> {
        use rayon::prelude::*;
        let parts: Vec<Vec<f64>> = coords
            .par_chunks(chunk.max(1))
            .map(|c| self.decode(latent, c))
            .collect::<Result<_>>()?;
        Ok(parts.concat())
    }

    /// `MSE(pred, gt) + lambda * MSE(decode(latent, skeleton points), radii)`.
    pub fn loss(&self, pred: &[f64], gt: &[f64], skel: &Skeleton, latent: &LatentSet, lambda: f64) -> Result<f64> {
        if pred.len() != gt.len() {
            return Err(Error::shape(format!("{} predictions vs {} targets", pred.len(), gt.len())));
        }
        let at_skel = if lambda == 0.0 { Vec::new() } else { self.decode(latent, &skel.points)? };
        Ok(composite_loss(pred, gt, &at_skel, &skel.radii, lambda))
    }

    pub fn to_records(&self) -> Vec<NamedArray> {
        let mut recs = vec![self.arch.to_record()];
        recs.extend(self.params.to_records());
        recs
    }

    pub fn from_records(records: &[NamedArray]) -> Result<Self> {
        let arch_rec = records
            .iter()
            .find(|r| r.name == ARCH_RECORD)
            .ok_or_else(|| Error::Format("checkpoint lacks an architecture record".into()))?;
        let mut model = AutoEncoder::new(ArchConfig::from_record(arch_rec)?, 0)?;
        model.params.load_records(records)?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_checkpoint(path, &self.to_records())
    }

    pub fn load(path: &Path) -> Result<Self> {
        AutoEncoder::from_records(&io::read_checkpoint(path)?)
    }
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// The composite objective from already-decoded values.
pub fn composite_loss(pred: &[f64], gt: &[f64], at_skeleton: &[f64], radii: &[f64], lambda: f64) -> f64 {
    let base = mse(pred, gt);
    if lambda == 0.0 {
        base
    } else {
        base + lambda * mse(at_skeleton, radii)
    }
}

pub(crate) fn cloud_tensor(points: &[Point3]) -> Tensor {
    points_tensor(points)
}

pub(crate) fn skel_tensor(skel: &Skeleton) -> Tensor {
    skeleton_tensor(skel)
}
