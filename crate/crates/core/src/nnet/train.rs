use super::graph::Graph;
use super::model::{cloud_tensor, skel_tensor, ArchConfig, AutoEncoder};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::field::{sample_training_coords, SdfVolume, DEFAULT_TRUNCATION};
use crate::geom::PointCloud;
use crate::skeleton::{skeletonize, Skeleton, SkeletonizeConfig};

pub const TOY_MAX_POINTS: usize = 512;
pub const TOY_MAX_SKELETON: usize = 32;
pub const TOY_MAX_LATENT: usize = 32;
pub const TOY_MAX_SAMPLES: usize = 512;

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub steps: usize,
    pub lr: f64,
    pub seed: u64,
    /// Weight of the skeleton-radius term.
    pub lambda: f64,
    /// SDF samples drawn once and used as the full batch.
    pub samples: usize,
    pub truncation: f64,
    pub inside_frac: f64,
    pub skeleton: SkeletonizeConfig,
    pub arch: ArchConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 300,
            lr: 1e-3,
            seed: 0,
            lambda: 1.0,
            samples: 512,
            truncation: DEFAULT_TRUNCATION,
            inside_frac: 0.9,
            skeleton: SkeletonizeConfig {
                n_s: 32,
                ..SkeletonizeConfig::default()
            },
            arch: ArchConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Loss before each update.
    pub losses: Vec<f64>,
    pub model: AutoEncoder,
    pub skeleton: Skeleton,
}

/// Adam with the usual defaults (beta1 0.9, beta2 0.999, eps 1e-8).
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    pub fn new(lr: f64, params: &[Tensor]) -> Self {
        let zeros = |t: &Tensor| Tensor {
            shape: t.shape.clone(),
            data: vec![0.0; t.len()],
        };
        Adam {
            lr,
            m: params.iter().map(zeros).collect(),
            v: params.iter().map(zeros).collect(),
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            for i in 0..p.len() {
                m.data[i] = Self::B1 * m.data[i] + (1.0 - Self::B1) * g.data[i];
                v.data[i] = Self::B2 * v.data[i] + (1.0 - Self::B2) * g.data[i] * g.data[i];
                let mh = m.data[i] / c1;
                let vh = v.data[i] / c2;
                p.data[i] -= self.lr * mh / (vh.sqrt() + Self::EPS);
            }
        }
    }
}

fn check_toy_sizes(pc: &PointCloud, n_s: usize, cfg: &TrainConfig) -> Result<()> {
    let limits = [
        ("surface points", pc.len(), TOY_MAX_POINTS),
        ("skeletal points", n_s, TOY_MAX_SKELETON),
        ("latent channels", cfg.arch.latent_dim, TOY_MAX_LATENT),
        ("SDF samples", cfg.samples, TOY_MAX_SAMPLES),
    ];
    for (what, got, max) in limits {
        if got > max {
            return Err(Error::invalid(format!("{what}: {got} exceeds the toy limit {max}")));
        }
    }
    Ok(())
}

/// Full-batch Adam on the composite loss for a single shape. The skeleton
/// and the SDF samples are drawn once; the run is deterministic per seed.
pub fn train_toy(vol: &SdfVolume, pc: &PointCloud, cfg: &TrainConfig) -> Result<TrainReport> {
    check_toy_sizes(pc, cfg.skeleton.n_s, cfg)?;
    let skeleton = skeletonize(pc, &cfg.skeleton)?;
    train_toy_with_skeleton(vol, pc, skeleton, cfg)
}

/// [`train_toy`] with a precomputed skeleton; `cfg.skeleton` is ignored.
pub fn train_toy_with_skeleton(vol: &SdfVolume, pc: &PointCloud, skeleton: Skeleton, cfg: &TrainConfig) -> Result<TrainReport> {
    check_toy_sizes(pc, skeleton.len(), cfg)?;
    if skeleton.is_empty() {
        return Err(Error::invalid("empty skeleton"));
    }
    if !(cfg.lr >= 0.0 && cfg.lr.is_finite()) {
        return Err(Error::invalid(format!("learning rate {} must be finite and non-negative", cfg.lr)));
    }
    let batch = sample_training_coords(vol, cfg.samples, cfg.truncation, cfg.inside_frac, cfg.seed.wrapping_add(1))?;
    let mut model = AutoEncoder::new(cfg.arch.clone(), cfg.seed)?;

    let m = batch.len();
    let mut queries = batch.coords.clone();
    queries.extend_from_slice(&skeleton.points);
    let queries = cloud_tensor(&queries);
    let surf_t = cloud_tensor(pc.points());
    let skel_t = skel_tensor(&skeleton);
    let gt = Tensor::matrix(m, 1, batch.values.clone())?;
    let radii = Tensor::matrix(skeleton.len(), 1, skeleton.radii.clone())?;

    let mut opt = Adam::new(cfg.lr, model.params.values());
    let mut losses = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let mut g = Graph::new();
        let p = model.params.bind(&mut g)?;
        let surf = g.leaf(surf_t.clone())?;
        let sk = g.leaf(skel_t.clone())?;
        let z = model.encode_graph(&mut g, &p, surf, sk)?;
        let y = model.decode_graph(&mut g, &p, z, &queries)?;
        let sample_rows: Vec<usize> = (0..m).collect();
        let skel_rows: Vec<usize> = (m..m + skeleton.len()).collect();
        let pred_s = g.gather_rows(y, &sample_rows)?;
        let pred_k = g.gather_rows(y, &skel_rows)?;
        let gt_v = g.leaf(gt.clone())?;
        let r_v = g.leaf(radii.clone())?;
        let base = g.mse(pred_s, gt_v)?;
        let loss = if cfg.lambda == 0.0 {
            base
        } else {
            let sk_loss = g.mse(pred_k, r_v)?;
            let sk_loss = g.scale(sk_loss, cfg.lambda);
            g.add(base, sk_loss)?
        };
        let value = g.value(loss).data[0];
        if !value.is_finite() {
            return Err(Error::Numeric(format!("training diverged at step {step}: loss {value}")));
        }
        losses.push(value);
        let grads = g.backward(loss);
        let grad_ts: Vec<Tensor> = p
            .vars()
            .iter()
            .zip(model.params.values())
            .map(|(&v, t)| grads.get_or_zeros(v, t))
            .collect();
        opt.step(model.params.values_mut(), &grad_ts);
    }
    Ok(TrainReport {
        losses,
        model,
        skeleton,
    })
}
