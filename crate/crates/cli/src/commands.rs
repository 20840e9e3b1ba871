use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde_json::json;
use skelgen_core::diffusion::{
    generate_shapes, train_denoiser as fit_denoiser, DenoiserTrainConfig, EmpiricalScore, GenerateConfig, SamplerConfig, ScoreFunction,
    ToyDenoiser,
};
use skelgen_core::field::{marching_cubes, mesh_to_sdf, GridSpec, DEFAULT_FILL};
use skelgen_core::geom::{fps, normalize_unit_cube};
use skelgen_core::io;
use skelgen_core::metrics::{
    chamfer, coverage, emd, f1_score, frechet_feature_distance, hausdorff, kernel_feature_distance, mmd, nna_1,
    set_distances, Base, FeatureSet, MetricReport, MmdDirection, F1_THRESHOLD, GEN_POINTS, RECON_POINTS,
};
use skelgen_core::nnet::{
    train_toy_with_skeleton, AutoEncoder, TrainConfig, TOY_MAX_POINTS, TOY_MAX_SAMPLES, TOY_MAX_SKELETON,
};
use skelgen_core::skeleton::{skeletonize as run_skeletonize, EpsPolicy, SkeletonizeConfig};
use skelgen_core::PointCloud;

use crate::files::{self, create_dir, evaluation_points, list_shapes, read_latent, read_text, stem, write_text};
use crate::settings::{at, require, usage, CliResult, Failure, Settings};
use crate::Common;

fn settings(c: &Common) -> CliResult<Settings> {
    Settings::load(c.profile, c.config.as_deref())
}

fn probability(name: &str, v: f64) -> CliResult<()> {
    require(v > 0.0 && v <= 1.0, || format!("{name} must lie in (0, 1], got {v}"))
}

fn resolution_ok(r: usize) -> CliResult<()> {
    require(r >= 8, || format!("resolution must be at least 8, got {r}"))
}

fn subsample(pc: PointCloud, n: usize) -> CliResult<PointCloud> {
    if pc.len() <= n {
        return Ok(pc);
    }
    Ok(pc.select(&fps(&pc, n, 0)?))
}

#[derive(Args, Debug)]
pub struct BuildSdf {
    /// Watertight input mesh (.obj or .ply)
    pub mesh: PathBuf,
    #[command(flatten)]
    pub common: Common,
    /// Grid nodes per axis [default: 100; toy 32]
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Points in the output cloud [default: 2560; vessel 4096]
    #[arg(long)]
    pub points: Option<usize>,
    /// Truncation half-width; the band |sdf| <= trunc must be non-empty [default: 0.1]
    #[arg(long)]
    pub trunc: Option<f64>,
    /// Grid margin around the normalized shape [default: 0.1]
    #[arg(long)]
    pub padding: Option<f64>,
    /// Surface samples drawn per output point before farthest point sampling [default: 8]
    #[arg(long)]
    pub oversample: Option<usize>,
}

pub fn build_sdf(a: BuildSdf) -> CliResult<()> {
    let mut s = settings(&a.common)?;
    let resolution = s.pick("resolution", a.resolution, s.defaults.resolution)?;
    let points = s.pick("points", a.points, s.defaults.points)?;
    let trunc = s.pick("trunc", a.trunc, 0.1)?;
    let padding = s.pick("padding", a.padding, 0.1)?;
    let oversample = s.pick("oversample", a.oversample, 8)?;
    let seed = s.pick("seed", a.common.seed, 0)?;
    s.finish()?;
    resolution_ok(resolution)?;
    require(points > 0, || "points must be positive".into())?;
    require(oversample > 0, || "oversample must be positive".into())?;
    require(trunc > 0.0, || format!("trunc must be positive, got {trunc}"))?;
    require(padding >= 0.0, || format!("padding must be non-negative, got {padding}"))?;

    let mesh = at(&a.mesh, io::read_mesh(&a.mesh))?;
    at(&a.mesh, mesh.check_watertight())?;
    let (_, transform) = at(&a.mesh, PointCloud::new(mesh.vertices.clone()).and_then(|v| normalize_unit_cube(&v)))?;
    let mesh = mesh.transformed(|p| transform.apply(p));
    let vol = mesh_to_sdf(&mesh, resolution, padding)?;
    if !vol.values.iter().any(|v| v.abs() <= trunc) {
        return Err(Failure::Input(format!("no voxel within the truncation band {trunc}")));
    }
    let dense = PointCloud::new(mesh.sample_surface(points * oversample, seed)?)?;
    let cloud = dense.select(&fps(&dense, points, 0)?);

    create_dir(&a.common.out)?;
    io::write_xyz(&a.common.out.join("cloud.xyz"), cloud.points())?;
    io::write_volume(&a.common.out.join("volume.msdf"), &vol)?;
    let meta = json!({
        "scale": transform.scale,
        "offset": transform.offset,
        "resolution": resolution,
        "padding": padding,
        "truncation": trunc,
        "points": points,
        "seed": seed,
        "grid_origin": vol.origin(),
        "grid_spacing": vol.spacing(),
    });
    let text = serde_json::to_string_pretty(&meta).map_err(|e| Failure::Numeric(e.to_string()))?;
    write_text(&a.common.out.join("normalization.json"), &(text + "\n"))?;
    println!(
        "wrote {} points and a {resolution}^3 volume to {}",
        cloud.len(),
        a.common.out.display()
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct SkeletonArgs {
    /// Skeletal points [default: 256; vessel 400; toy 32]
    #[arg(long)]
    pub n_s: Option<usize>,
    /// Center-update iterations [default: 2]
    #[arg(long)]
    pub iters: Option<usize>,
    /// Neighborhood size [default: 32]
    #[arg(long)]
    pub k: Option<usize>,
    /// DBSCAN core-point threshold [default: 4]
    #[arg(long)]
    pub min_pts: Option<usize>,
    /// DBSCAN radius as a multiple of the local nearest-neighbor spacing [default: 2]
    #[arg(long)]
    pub eps_factor: Option<f64>,
    /// Two-stage extraction through 4 n_s intermediate points [default: off]
    #[arg(long)]
    pub hierarchical: bool,
}

impl SkeletonArgs {
    fn resolve(&self, s: &mut Settings) -> CliResult<SkeletonizeConfig> {
        let d = SkeletonizeConfig::default();
        let factor = match d.eps {
            EpsPolicy::Adaptive { factor } => factor,
            EpsPolicy::Fixed(_) => 2.0,
        };
        let cfg = SkeletonizeConfig {
            n_s: s.pick("n_s", self.n_s, s.defaults.n_s)?,
            iterations: s.pick("iters", self.iters, d.iterations)?,
            k: s.pick("k", self.k, d.k)?,
            min_pts: s.pick("min_pts", self.min_pts, d.min_pts)?,
            eps: EpsPolicy::Adaptive {
                factor: s.pick("eps_factor", self.eps_factor, factor)?,
            },
            hierarchical: s.pick("hierarchical", self.hierarchical.then_some(true), false)?,
        };
        cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
pub struct Skeletonize {
    /// Input point cloud (.xyz or .ply)
    pub cloud: PathBuf,
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub skeleton: SkeletonArgs,
}

pub fn skeletonize(a: Skeletonize) -> CliResult<()> {
    let mut s = settings(&a.common)?;
    let cfg = a.skeleton.resolve(&mut s)?;
    s.pick("seed", a.common.seed, 0)?;
    s.finish()?;
    let pc = at(&a.cloud, io::read_point_cloud(&a.cloud))?;
    let sk = at(&a.cloud, run_skeletonize(&pc, &cfg))?;
    create_dir(&a.common.out)?;
    io::write_skeleton_ply(&a.common.out.join("skeleton.ply"), &sk)?;
    io::write_skeleton_csv(&a.common.out.join("skeleton.csv"), &sk)?;
    println!("wrote {} skeletal points to {}", sk.len(), a.common.out.display());
    Ok(())
}

#[derive(Args, Debug)]
pub struct TrainToy {
    /// Ground-truth SDF volume (.msdf)
    #[arg(long)]
    pub volume: PathBuf,
    /// Surface point cloud in the volume's frame
    #[arg(long)]
    pub cloud: PathBuf,
    /// Precomputed skeleton (.csv or .ply); extracted from the cloud when absent
    #[arg(long)]
    pub skeleton: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
    /// Optimizer steps [default: 300]
    #[arg(long)]
    pub steps: Option<usize>,
    /// Adam learning rate [default: 0.001; toy 0.01]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Weight of the skeleton-radius loss [default: 1]
    #[arg(long)]
    pub lambda: Option<f64>,
    /// SDF samples in the full batch, at most 512 [default: 512]
    #[arg(long)]
    pub samples: Option<usize>,
    /// Encoder input points (farthest point subsample), at most 512 [default: 512]
    #[arg(long)]
    pub train_points: Option<usize>,
    /// Fraction of samples drawn from the truncation band [default: 0.9; toy 0.6]
    #[arg(long)]
    pub inside_frac: Option<f64>,
    /// Truncation half-width for sampling [default: 0.1]
    #[arg(long)]
    pub trunc: Option<f64>,
    /// Skeletal points when extracting (toy limit 32) [default: 32]
    #[arg(long)]
    pub n_s: Option<usize>,
}

pub fn train_toy(a: TrainToy) -> CliResult<()> {
    let mut s = settings(&a.common)?;
    let d = TrainConfig::default();
    let steps = s.pick("steps", a.steps, d.steps)?;
    let lr = s.pick("lr", a.lr, s.defaults.lr)?;
    let lambda = s.pick("lambda", a.lambda, d.lambda)?;
    let samples = s.pick("samples", a.samples, d.samples)?;
    let train_points = s.pick("train_points", a.train_points, TOY_MAX_POINTS)?;
    let inside_frac = s.pick("inside_frac", a.inside_frac, s.defaults.inside_frac)?;
    let trunc = s.pick("trunc", a.trunc, d.truncation)?;
    let n_s = s.pick("n_s", a.n_s, d.skeleton.n_s)?;
    let seed = s.pick("seed", a.common.seed, 0)?;
    s.finish()?;
    require(steps > 0, || "steps must be positive".into())?;
    require(lr >= 0.0 && lr.is_finite(), || format!("lr must be finite and non-negative, got {lr}"))?;
    require((1..=TOY_MAX_SAMPLES).contains(&samples), || format!("samples must lie in 1..={TOY_MAX_SAMPLES}"))?;
    require((1..=TOY_MAX_POINTS).contains(&train_points), || format!("train_points must lie in 1..={TOY_MAX_POINTS}"))?;
    require((1..=TOY_MAX_SKELETON).contains(&n_s), || format!("n_s must lie in 1..={TOY_MAX_SKELETON}"))?;
    require((0.0..=1.0).contains(&inside_frac), || format!("inside_frac must lie in [0, 1], got {inside_frac}"))?;
    require(trunc > 0.0, || format!("trunc must be positive, got {trunc}"))?;

    let vol = at(&a.volume, io::read_volume(&a.volume))?;
    let pc = subsample(at(&a.cloud, io::read_point_cloud(&a.cloud))?, train_points)?;
    let cfg = TrainConfig {
        steps,
        lr,
        seed,
        lambda,
        samples,
        truncation: trunc,
        inside_frac,
        skeleton: SkeletonizeConfig {
            n_s,
            ..SkeletonizeConfig::default()
        },
        ..d
    };
    let skeleton = match &a.skeleton {
        Some(path) => at(path, io::read_skeleton(path))?,
        None => run_skeletonize(&pc, &cfg.skeleton)?,
    };
    let report = train_toy_with_skeleton(&vol, &pc, skeleton, &cfg)?;
    let latent = report.model.encode(&pc, &report.skeleton)?;

    create_dir(&a.common.out)?;
    report.model.save(&a.common.out.join("model.sknn"))?;
    let mut csv = String::from("step,loss\n");
    for (i, l) in report.losses.iter().enumerate() {
        csv.push_str(&format!("{i},{l}\n"));
    }
    write_text(&a.common.out.join("losses.csv"), &csv)?;
    io::write_skeleton_csv(&a.common.out.join("skeleton.csv"), &report.skeleton)?;
    write_text(&a.common.out.join("latent.csv"), &files::latent_csv(&latent))?;
    println!(
        "loss {:.6} -> {:.6} over {steps} steps",
        report.losses[0],
        report.losses[report.losses.len() - 1]
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct Reconstruct {
    /// Trained auto-encoder checkpoint
    #[arg(long)]
    pub model: PathBuf,
    /// Surface point cloud to encode
    #[arg(long)]
    pub cloud: PathBuf,
    /// Skeleton of the shape (.csv or .ply)
    #[arg(long)]
    pub skeleton: PathBuf,
    #[command(flatten)]
    pub common: Common,
    /// Encoder input points (farthest point subsample) [default: 512]
    #[arg(long)]
    pub train_points: Option<usize>,
    /// Decoding grid nodes per axis over [-1, 1]^3 [default: 100; toy 32]
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Fraction of voxels decoded around the skeleton [default: 0.3; vessel 0.1; toy 1]
    #[arg(long)]
    pub p: Option<f64>,
    /// Value of voxels that are not decoded [default: -1]
    #[arg(long)]
    pub fill: Option<f64>,
}

pub fn reconstruct(a: Reconstruct) -> CliResult<()> {
    let mut s = settings(&a.common)?;
    let train_points = s.pick("train_points", a.train_points, TOY_MAX_POINTS)?;
    let resolution = s.pick("resolution", a.resolution, s.defaults.resolution)?;
    let p = s.pick("p", a.p, s.defaults.p)?;
    let fill = s.pick("fill", a.fill, DEFAULT_FILL)?;
    s.pick("seed", a.common.seed, 0)?;
    s.finish()?;
    resolution_ok(resolution)?;
    probability("p", p)?;
    require(train_points > 0, || "train_points must be positive".into())?;

    let model = at(&a.model, AutoEncoder::load(&a.model))?;
    let pc = subsample(at(&a.cloud, io::read_point_cloud(&a.cloud))?, train_points)?;
    let skeleton = at(&a.skeleton, io::read_skeleton(&a.skeleton))?;
    let latent = model.encode(&pc, &skeleton)?;
    let grid = GridSpec::centered_cube(resolution, 1.0)?;
    let vol = skelgen_core::diffusion::decode_sparse_volume(&model, &latent, &grid, p, fill)?;
    let mesh = marching_cubes(&vol, 0.0);
    if mesh.is_empty() {
        return Err(Failure::Numeric("decoded field has no zero crossing".into()));
    }
    create_dir(&a.common.out)?;
    io::write_mesh(&a.common.out.join("mesh.obj"), &mesh)?;
    io::write_volume(&a.common.out.join("volume.msdf"), &vol)?;
    write_text(&a.common.out.join("latent.csv"), &files::latent_csv(&latent))?;
    println!(
        "wrote a mesh with {} vertices and {} triangles to {}",
        mesh.vertices.len(),
        mesh.triangles.len(),
        a.common.out.display()
    );
    Ok(())
}

fn parse_labels(spec: Option<&str>, count: usize) -> CliResult<Vec<Option<usize>>> {
    let Some(spec) = spec else {
        return Ok(vec![None; count]);
    };
    let labels: Vec<Option<usize>> = spec
        .split(',')
        .map(|t| match t.trim() {
            "" | "none" => Ok(None),
            v => v.parse().map(Some).map_err(|_| Failure::Usage(format!("invalid label {v:?}"))),
        })
        .collect::<CliResult<_>>()?;
    require(labels.len() == count, || format!("{} labels for {count} latent files", labels.len()))?;
    Ok(labels)
}

#[derive(Args, Debug)]
pub struct TrainDenoiser {
    /// Latent CSV files (as written by train-toy or reconstruct)
    #[arg(required = true)]
    pub latents: Vec<PathBuf>,
    #[command(flatten)]
    pub common: Common,
    /// Comma-separated class label per latent file ("none" for unlabeled) [default: all unlabeled]
    #[arg(long)]
    pub labels: Option<String>,
    /// Optimizer steps [default: 200]
    #[arg(long)]
    pub steps: Option<usize>,
    /// Adam learning rate [default: 0.002]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Hidden width [default: 32]
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Examples per step [default: 8]
    #[arg(long)]
    pub batch: Option<usize>,
    /// Label dropout probability [default: 0.1]
    #[arg(long)]
    pub p_uncond: Option<f64>,
}

pub fn train_denoiser(a: TrainDenoiser) -> CliResult<()> {
    let mut s = settings(&a.common)?;
    let d = DenoiserTrainConfig::default();
    let cfg = DenoiserTrainConfig {
        steps: s.pick("steps", a.steps, d.steps)?,
        lr: s.pick("lr", a.lr, d.lr)?,
        hidden: s.pick("hidden", a.hidden, d.hidden)?,
        batch: s.pick("batch", a.batch, d.batch)?,
        p_uncond: s.pick("p_uncond", a.p_uncond, d.p_uncond)?,
        seed: s.pick("seed", a.common.seed, 0)?,
        ..d
    };
    let labels = s.pick("labels", a.labels.clone(), String::new())?;
    s.finish()?;
    require(cfg.steps > 0 && cfg.batch > 0 && cfg.hidden > 0, || "steps, batch and hidden must be positive".into())?;
    require((0.0..=1.0).contains(&cfg.p_uncond), || "p_uncond must lie in [0, 1]".into())?;
    let labels = parse_labels((!labels.is_empty()).then_some(labels.as_str()), a.latents.len())?;
    let examples = a
        .latents
        .iter()
        .map(|p| read_latent(p).map(|l| l.data))
        .collect::<CliResult<Vec<_>>>()?;
    let (net, losses) = fit_denoiser(&examples, &labels, &cfg)?;
    create_dir(&a.common.out)?;
    net.save(&a.common.out.join("denoiser.sknn"))?;
    let mut csv = String::from("step,loss\n");
    for (i, l) in losses.iter().enumerate() {
        csv.push_str(&format!("{i},{l}\n"));
    }
    write_text(&a.common.out.join("losses.csv"), &csv)?;
    println!("trained on {} latents for {} steps", examples.len(), cfg.steps);
    Ok(())
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ConventionArg {
    /// (1 + w)·θ(∅) − w·θ(c)
    AsPaper,
    /// (1 + w)·θ(c) − w·θ(∅)
    Standard,
}

#[derive(Args, Debug)]
pub struct Sample {
    /// Trained auto-encoder checkpoint used for decoding
    #[arg(long)]
    pub model: PathBuf,
    /// Learned denoiser checkpoint (from train-denoiser)
    #[arg(long, conflicts_with = "examples")]
    pub denoiser: Option<PathBuf>,
    /// Latent CSV files defining an exact empirical score instead of a denoiser
    #[arg(long, num_args = 1..)]
    pub examples: Vec<PathBuf>,
    /// Class labels of --examples, comma separated [default: all unlabeled]
    #[arg(long)]
    pub labels: Option<String>,
    #[command(flatten)]
    pub common: Common,
    /// Number of shapes [default: 1]
    #[arg(long)]
    pub count: Option<usize>,
    /// ODE steps [default: 32]
    #[arg(long)]
    pub steps: Option<usize>,
    /// Smallest noise level [default: 0.002]
    #[arg(long)]
    pub sigma_min: Option<f64>,
    /// Largest noise level [default: 80]
    #[arg(long)]
    pub sigma_max: Option<f64>,
    /// Schedule curvature [default: 7]
    #[arg(long)]
    pub rho: Option<f64>,
    /// Guidance weight [default: 0]
    #[arg(long)]
    pub guidance_w: Option<f64>,
    /// Guidance convention [default: standard]
    #[arg(long, value_enum)]
    pub guidance_convention: Option<ConventionArg>,
    /// Class label to condition on [default: unconditional]
    #[arg(long)]
    pub category: Option<usize>,
    /// Skeletal points per latent when sampling from a denoiser [default: profile n_s]
    #[arg(long)]
    pub n_s: Option<usize>,
    /// Decoding grid nodes per axis [default: 100; toy 32]
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Fraction of voxels decoded around the skeleton [default: 0.3; vessel 0.1; toy 1]
    #[arg(long)]
    pub p: Option<f64>,
    /// Value of voxels that are not decoded [default: -1]
    #[arg(long)]
    pub fill: Option<f64>,
}

pub fn sample(a: Sample) -> CliResult<()> {
    use skelgen_core::diffusion::GuidanceConvention;
    let mut s = settings(&a.common)?;
    let mut sc = SamplerConfig::default();
    sc.apply(s.keys()).map_err(|e| Failure::Usage(e.to_string()))?;
    if let Some(v) = a.count {
        sc.count = v;
    }
    if let Some(v) = a.steps {
        sc.schedule.steps = v;
    }
    if let Some(v) = a.sigma_min {
        sc.schedule.sigma_min = v;
    }
    if let Some(v) = a.sigma_max {
        sc.schedule.sigma_max = v;
    }
    if let Some(v) = a.rho {
        sc.schedule.rho = v;
    }
    if let Some(v) = a.guidance_w {
        sc.guidance.w = v;
    }
    if let Some(c) = a.guidance_convention {
        sc.guidance.convention = match c {
            ConventionArg::AsPaper => GuidanceConvention::AsPaper,
            ConventionArg::Standard => GuidanceConvention::Standard,
        };
    }
    if let Some(c) = a.category {
        sc.category = Some(c);
    }
    if let Some(v) = a.common.seed {
        sc.seed = v;
    }
    let n_s = s.pick("n_s", a.n_s, s.defaults.n_s)?;
    let resolution = s.pick("resolution", a.resolution, s.defaults.resolution)?;
    let p = s.pick("p", a.p, s.defaults.p)?;
    let fill = s.pick("fill", a.fill, DEFAULT_FILL)?;
    s.finish()?;
    sc.schedule.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    resolution_ok(resolution)?;
    probability("p", p)?;
    require(n_s > 0, || "n_s must be positive".into())?;
    if a.denoiser.is_none() && a.examples.is_empty() {
        return usage("one of --denoiser or --examples is required");
    }
    if sc.count == 0 {
        println!("count is 0: nothing to sample");
        return Ok(());
    }

    let model = at(&a.model, AutoEncoder::load(&a.model))?;
    let (score, n_s): (Box<dyn ScoreFunction>, usize) = match &a.denoiser {
        Some(path) => (Box::new(at(path, ToyDenoiser::load(path))?), n_s),
        None => {
            let labels = parse_labels(a.labels.as_deref(), a.examples.len())?;
            let examples = a
                .examples
                .iter()
                .map(|p| read_latent(p).map(|l| l.data))
                .collect::<CliResult<Vec<_>>>()?;
            let rows = examples[0].rows();
            (Box::new(EmpiricalScore::new(examples, labels)?), rows)
        }
    };
    let cfg = GenerateConfig {
        schedule: sc.schedule,
        guidance: sc.guidance,
        condition: sc.category,
        n_s,
        p,
        resolution,
        fill,
        seed: sc.seed,
        count: sc.count,
    };
    let out = generate_shapes(score.as_ref(), &model, &cfg)?;
    create_dir(&a.common.out)?;
    let mut summary = String::from("index,status,vertices,triangles\n");
    for (i, (latent, mesh)) in out.latents.iter().zip(&out.meshes).enumerate() {
        write_text(&a.common.out.join(format!("latent_{i:03}.csv")), &files::latent_csv(latent))?;
        match mesh {
            Some(m) => {
                io::write_mesh(&a.common.out.join(format!("shape_{i:03}.obj")), m)?;
                summary.push_str(&format!("{i},ok,{},{}\n", m.vertices.len(), m.triangles.len()));
            }
            None => summary.push_str(&format!("{i},empty,0,0\n")),
        }
    }
    write_text(&a.common.out.join("samples.csv"), &summary)?;
    if !out.failures.is_empty() {
        eprintln!("warning: {} of {} samples produced no surface", out.failures.len(), sc.count);
    }
    println!("sampled {} shapes into {}", sc.count, a.common.out.display());
    Ok(())
}

#[derive(Args, Debug)]
pub struct EvalRecon {
    /// Reconstructed shape (mesh or point cloud)
    #[arg(long)]
    pub pred: PathBuf,
    /// Ground-truth shape (mesh or point cloud)
    #[arg(long)]
    pub gt: PathBuf,
    #[command(flatten)]
    pub common: Common,
    /// Points per shape after farthest point subsampling [default: 2560]
    #[arg(long)]
    pub points: Option<usize>,
    /// F1 distance threshold [default: 0.06]
    #[arg(long)]
    pub tau: Option<f64>,
}

pub fn eval_recon(a: EvalRecon) -> CliResult<()> {
    let mut s = settings(&a.common)?;
    let points = s.pick("points", a.points, RECON_POINTS)?;
    let tau = s.pick("tau", a.tau, F1_THRESHOLD)?;
    let seed = s.pick("seed", a.common.seed, 0)?;
    s.finish()?;
    require(points > 0, || "points must be positive".into())?;
    require(tau > 0.0, || format!("tau must be positive, got {tau}"))?;
    let pred = evaluation_points(&a.pred, points, seed)?;
    let gt = evaluation_points(&a.gt, points, seed)?;
    let name = stem(&a.pred);
    let e = emd(&pred, &gt)?;
    let mut report = MetricReport::new();
    report.push("cd", &name, chamfer(&pred, &gt)?)?;
    report.push("emd", &name, e.value)?;
    report.push("hd", &name, hausdorff(&pred, &gt)?)?;
    report.push("f1", &name, f1_score(&pred, &gt, tau)?)?;
    report.param("points", points as f64);
    report.param("tau", tau);
    report.param("seed", seed as f64);
    report.param("emd_gap", e.gap);
    create_dir(&a.common.out)?;
    report.write_csv(&a.common.out.join("report.csv"))?;
    print!("{}", report.to_table());
    Ok(())
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DirectionArg {
    /// Average over reference shapes of the nearest generated shape
    Reference,
    /// Average over generated shapes of the nearest reference shape
    Generated,
}

#[derive(Args, Debug)]
pub struct EvalGen {
    /// Directory of generated shapes (.obj, .ply, .xyz)
    #[arg(long)]
    pub gen: PathBuf,
    /// Directory of reference shapes
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[command(flatten)]
    pub common: Common,
    /// Points per shape after farthest point subsampling [default: 2048]
    #[arg(long)]
    pub points: Option<usize>,
    /// MMD averaging direction [default: reference]
    #[arg(long, value_enum)]
    pub mmd_direction: Option<DirectionArg>,
    /// Skip the EMD-based metrics [default: off]
    #[arg(long)]
    pub no_emd: bool,
    /// Per-shape feature CSV of the generated set (enables fid/kid)
    #[arg(long, requires = "ref_features")]
    pub gen_features: Option<PathBuf>,
    /// Per-shape feature CSV of the reference set
    #[arg(long, requires = "gen_features")]
    pub ref_features: Option<PathBuf>,
}

pub fn eval_gen(a: EvalGen) -> CliResult<()> {
    let mut s = settings(&a.common)?;
    let points = s.pick("points", a.points, GEN_POINTS)?;
    let seed = s.pick("seed", a.common.seed, 0)?;
    let direction = s.pick(
        "mmd_direction",
        a.mmd_direction.map(|d| match d {
            DirectionArg::Reference => "reference".to_string(),
            DirectionArg::Generated => "generated".to_string(),
        }),
        "reference".to_string(),
    )?;
    let no_emd = s.pick("no_emd", a.no_emd.then_some(true), false)?;
    s.finish()?;
    let direction = match direction.as_str() {
        "reference" => MmdDirection::OverReference,
        "generated" => MmdDirection::OverGenerated,
        other => return usage(format!("mmd_direction must be reference or generated, got {other:?}")),
    };
    require(points > 0, || "points must be positive".into())?;

    let load = |dir: &PathBuf| -> CliResult<Vec<PointCloud>> {
        list_shapes(dir)?.iter().map(|p| evaluation_points(p, points, seed)).collect()
    };
    let gen = load(&a.gen)?;
    let reference = load(&a.reference)?;
    let mut report = MetricReport::new();
    let bases: &[Base] = if no_emd { &[Base::Chamfer] } else { &[Base::Chamfer, Base::Emd] };
    for &base in bases {
        let d = set_distances(&gen, &reference, base)?;
        report.push(&format!("mmd-{}", base.id()), "set", mmd(&d.gen_ref, direction)?)?;
        report.push(&format!("cov-{}", base.id()), "set", coverage(&d.gen_ref)?)?;
        if gen.len() >= 2 && reference.len() >= 2 {
            report.push(&format!("1nna-{}", base.id()), "set", nna_1(&d)?)?;
        } else {
            eprintln!("warning: 1-NNA needs at least 2 shapes per set; skipped");
        }
    }
    if let (Some(gf), Some(rf)) = (&a.gen_features, &a.ref_features) {
        let fa = at(gf, FeatureSet::parse_csv(&read_text(gf)?))?;
        let fb = at(rf, FeatureSet::parse_csv(&read_text(rf)?))?;
        report.push("fid", "set", frechet_feature_distance(&fa, &fb)?)?;
        report.push("kid", "set", kernel_feature_distance(&fa, &fb)?)?;
    }
    report.param("points", points as f64);
    report.param("seed", seed as f64);
    report.param("generated", gen.len() as f64);
    report.param("reference", reference.len() as f64);
    create_dir(&a.common.out)?;
    report.write_csv(&a.common.out.join("report.csv"))?;
    print!("{}", report.to_table());
    Ok(())
}
