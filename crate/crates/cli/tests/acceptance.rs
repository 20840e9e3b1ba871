//! End-to-end acceptance run: one PASS/FAIL line per criterion, each with
//! its own oracle, pinned tolerances and runtime budget.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use skelgen_core::diffusion::{
    cfg_score, combine_guidance, ode_step_heun, sample_latents, schedule_sigmas, DeltaScore, GaussianScore,
    GuidanceConfig, GuidanceConvention, NoiseSchedule, ScoreFunction,
};
use skelgen_core::field::{
    assemble_sparse_volume, marching_cubes, mesh_to_sdf, shapes, skeleton_guided_mask, TriangleMesh,
};
use skelgen_core::geom::{dist, dist2, Point3};
use skelgen_core::metrics::{
    chamfer, chamfer_with, emd_exact, f1_score, frechet_feature_distance, hausdorff, nna_1, set_distances, Base,
    ChamferVariant, FeatureSet,
};
use skelgen_core::nnet::{
    fusion_block, pointnet_layer, query_group_maxpool, ArchConfig, Attention, AutoEncoder, Bound, FusionBlock,
    Graph, Params, PointNetLayer, Tensor, Var,
};
use skelgen_core::skeleton::{skeletonize, skeletonize_traced, SkeletonizeConfig};
use skelgen_core::{io, PointCloud, Result as CoreResult};

type Outcome = Result<String, String>;

// ---------------------------------------------------------------- tolerances

const C1_AXIS_TOL: f64 = 0.03;
const C1_RADIUS_REL: f64 = 0.30;
const C2_FD_STEP: f64 = 1e-6;
const C2_REL_TOL: f64 = 1e-6;
const C3_CHAMFER_SPACINGS: f64 = 2.0;
const C4_DELTA_TOL: f64 = 1e-2;
const C4_MEAN_REL: f64 = 0.05;
const C4_VAR_REL: f64 = 0.10;
const C4_MIN_ORDER: f64 = 1.8;
const C6_ORACLE_TOL: f64 = 1e-12;
const C6_NNA_BAND: (f64, f64) = (45.0, 55.0);
// Standard error of the plug-in estimate at n = 1e5 is about 0.01; 3 sigma.
const C6_FRECHET_TOL: f64 = 0.03;
const C7_MIN_F1: f64 = 95.0;
const C7_LOSS_RATIO: f64 = 0.5;

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn core<T>(r: CoreResult<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> PointCloud {
    PointCloud::new((0..n).map(|_| [rng.random(), rng.random(), rng.random()]).collect()).unwrap()
}

fn randn(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn rand_tensor(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor {
    Tensor::matrix(r, c, (0..r * c).map(|_| randn(rng)).collect()).unwrap()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

// ------------------------------------------------------------- criterion 1

fn cylinder_surface(n: usize, radius: f64, length: f64, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PointCloud::new(
        (0..n)
            .map(|_| {
                let t: f64 = rng.random_range(0.0..2.0 * PI);
                let z: f64 = rng.random_range(-length / 2.0..length / 2.0);
                [radius * t.cos(), radius * t.sin(), z]
            })
            .collect(),
    )
    .unwrap()
}

fn criterion_1() -> Outcome {
    let pc = cylinder_surface(2048, 0.1, 1.6, 11);
    let cfg = SkeletonizeConfig {
        n_s: 16,
        iterations: 2,
        k: 32,
        hierarchical: true,
        ..SkeletonizeConfig::default()
    };
    let sk = core(skeletonize(&pc, &cfg))?;
    ensure(sk.len() == 16, || format!("{} skeletal points", sk.len()))?;
    let axis = sk.points.iter().map(|p| p[0].hypot(p[1])).fold(0.0, f64::max);
    let radius = sk.radii.iter().map(|r| (r - 0.1).abs() / 0.1).fold(0.0, f64::max);
    ensure(axis < C1_AXIS_TOL, || format!("max axis distance {axis:.4}"))?;
    ensure(radius < C1_RADIUS_REL, || format!("max radius error {:.1}%", 100.0 * radius))?;
    Ok(format!("max axis distance {axis:.4}, max radius error {:.1}%", 100.0 * radius))
}

// ------------------------------------------------------------- criterion 2

/// Analytic gradient of `sum(weights ∘ f(inputs))` from the tape against a
/// central difference of the same weighted sum computed here.
fn tape_vs_fd<F>(inputs: &[Tensor], seed: u64, f: F) -> Result<f64, String>
where
    F: Fn(&mut Graph, &[Var]) -> CoreResult<Var>,
{
    let eval = |inputs: &[Tensor]| -> CoreResult<Tensor> {
        let mut g = Graph::new();
        let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone())).collect::<CoreResult<_>>()?;
        let out = f(&mut g, &vars)?;
        Ok(g.value(out).clone())
    };
    let base = core(eval(inputs))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<f64> = (0..base.data.len()).map(|_| randn(&mut rng)).collect();
    let objective = |t: &Tensor| t.data.iter().zip(&weights).map(|(a, b)| a * b).sum::<f64>();

    let mut g = Graph::new();
    let vars: Vec<Var> = core(inputs.iter().map(|t| g.leaf(t.clone())).collect())?;
    let out = core(f(&mut g, &vars))?;
    let w = core(g.leaf(Tensor {
        shape: base.shape.clone(),
        data: weights.clone(),
    }))?;
    let weighted = core(g.mul(out, w))?;
    let grads = g.backward(weighted);

    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    let mut probe = inputs.to_vec();
    for (k, v) in vars.iter().enumerate() {
        let ga = grads.get_or_zeros(*v, &inputs[k]);
        for i in 0..inputs[k].data.len() {
            let x = inputs[k].data[i];
            probe[k].data[i] = x + C2_FD_STEP;
            let up = objective(&core(eval(&probe))?);
            probe[k].data[i] = x - C2_FD_STEP;
            let down = objective(&core(eval(&probe))?);
            probe[k].data[i] = x;
            numeric.push((up - down) / (2.0 * C2_FD_STEP));
            analytic.push(ga.data[i]);
        }
    }
    Ok(rel_err(&analytic, &numeric))
}

fn small_arch() -> ArchConfig {
    ArchConfig {
        init_width: 6,
        level_widths: vec![6, 8],
        level_k: vec![3, 3],
        latent_dim: 6,
        fusion_blocks: 2,
        pe_dim: 12,
    }
}

fn skeleton_jvp_error(seed: u64, hierarchical: bool) -> Result<Option<f64>, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pc = PointCloud::new(
        (0..400)
            .map(|_| {
                let (t, z): (f64, f64) = (rng.random_range(0.0..2.0 * PI), rng.random_range(-0.8..0.8));
                let r = 0.2 + 0.01 * randn(&mut rng);
                [r * t.cos(), r * t.sin(), z]
            })
            .collect(),
    )
    .unwrap();
    let cfg = SkeletonizeConfig {
        n_s: 8,
        hierarchical,
        ..SkeletonizeConfig::default()
    };
    let dir: Vec<Point3> = (0..pc.len()).map(|_| [randn(&mut rng), randn(&mut rng), randn(&mut rng)]).collect();
    let (_, trace) = core(skeletonize_traced(&pc, &cfg))?;
    let shifted = |s: f64| {
        let pts = pc
            .points()
            .iter()
            .zip(&dir)
            .map(|(p, d)| [p[0] + s * d[0], p[1] + s * d[1], p[2] + s * d[2]])
            .collect();
        core(PointCloud::new(pts).and_then(|c| skeletonize_traced(&c, &cfg)))
    };
    let (plus, tp) = shifted(C2_FD_STEP)?;
    let (minus, tm) = shifted(-C2_FD_STEP)?;
    if tp != trace || tm != trace {
        return Ok(None);
    }
    let jvp: Vec<f64> = trace.jvp(&dir).into_iter().flatten().collect();
    let fd: Vec<f64> = plus
        .points
        .iter()
        .zip(&minus.points)
        .flat_map(|(a, b)| (0..3).map(move |c| (a[c] - b[c]) / (2.0 * C2_FD_STEP)))
        .collect();
    Ok(Some(rel_err(&jvp, &fd)))
}

fn criterion_2() -> Outcome {
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    let mut record = |name: &'static str, e: f64| {
        let w = worst.entry(name).or_insert(0.0);
        *w = w.max(e);
    };
    for hierarchical in [false, true] {
        let mut done = 0;
        let mut seed = 100;
        while done < 3 {
            ensure(seed < 130, || "too few smooth skeletonization instances".into())?;
            if let Some(e) = skeleton_jvp_error(seed, hierarchical)? {
                record(if hierarchical { "skeleton-jvp-hier" } else { "skeleton-jvp" }, e);
                done += 1;
            }
            seed += 1;
        }
    }
    for s in 0..3u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + s);
        let a = rand_tensor(&mut rng, 4, 6);
        let b = rand_tensor(&mut rng, 4, 6);
        let m = rand_tensor(&mut rng, 6, 3);
        let row = rand_tensor(&mut rng, 1, 6);
        let two = [a.clone(), b.clone()];
        let cases: Vec<(&'static str, Vec<Tensor>, Box<dyn Fn(&mut Graph, &[Var]) -> CoreResult<Var>>)> = vec![
            ("matmul", vec![a.clone(), m.clone()], Box::new(|g, v| g.matmul(v[0], v[1]))),
            ("add", two.to_vec(), Box::new(|g, v| g.add(v[0], v[1]))),
            ("sub", two.to_vec(), Box::new(|g, v| g.sub(v[0], v[1]))),
            ("mul", two.to_vec(), Box::new(|g, v| g.mul(v[0], v[1]))),
            ("add_row", vec![a.clone(), row.clone()], Box::new(|g, v| g.add_row(v[0], v[1]))),
            ("mul_row", vec![a.clone(), row.clone()], Box::new(|g, v| g.mul_row(v[0], v[1]))),
            ("scale", vec![a.clone()], Box::new(|g, v| Ok(g.scale(v[0], 0.37)))),
            ("gelu", vec![a.clone()], Box::new(|g, v| Ok(g.gelu(v[0])))),
            ("layer_norm", vec![a.clone()], Box::new(|g, v| g.layer_norm(v[0]))),
            ("softmax", vec![a.clone()], Box::new(|g, v| g.softmax_rows(v[0]))),
            ("transpose", vec![a.clone()], Box::new(|g, v| g.transpose(v[0]))),
            ("gather", vec![a.clone()], Box::new(|g, v| g.gather_rows(v[0], &[2, 0, 2, 3, 1]))),
            ("max_pool", vec![a.clone()], Box::new(|g, v| g.max_pool_groups(v[0], 2))),
            ("concat", two.to_vec(), Box::new(|g, v| g.concat_cols(v[0], v[1]))),
            ("slice", vec![a.clone()], Box::new(|g, v| g.slice_cols(v[0], 1, 5))),
            ("mean", vec![a.clone()], Box::new(|g, v| g.mean(v[0]))),
            ("mse", two.to_vec(), Box::new(|g, v| g.mse(v[0], v[1]))),
        ];
        for (name, inputs, f) in &cases {
            record(name, tape_vs_fd(inputs, 300 + s, f)?);
        }

        // Layers: inputs first, parameters after.
        let mut params = Params::new();
        let pn = PointNetLayer::new(&mut params, "pn", 6, 5, &mut rng);
        let mut inputs = vec![a.clone()];
        inputs.extend(params.values().iter().cloned());
        record(
            "pointnet",
            tape_vs_fd(&inputs, 310 + s, |g, v| pointnet_layer(g, &Bound::from_vars(v[1..].to_vec()), &pn, v[0]))?,
        );
        let surf = rand_tensor(&mut rng, 12, 5);
        let skel = rand_tensor(&mut rng, 3, 5);
        record(
            "query_group_maxpool",
            tape_vs_fd(&[skel.clone(), surf.clone()], 320 + s, |g, v| query_group_maxpool(g, v[0], v[1], 4))?,
        );
        let mut params = Params::new();
        let attn = Attention::new(&mut params, "attn", 6, &mut rng);
        let keys = rand_tensor(&mut rng, 5, 6);
        let mut inputs = vec![a.clone(), keys.clone()];
        inputs.extend(params.values().iter().cloned());
        record(
            "attention",
            tape_vs_fd(&inputs, 330 + s, |g, v| attn.forward(g, &Bound::from_vars(v[2..].to_vec()), v[0], v[1]))?,
        );
        let mut params = Params::new();
        let block = FusionBlock::new(&mut params, "fb", 6, &mut rng);
        let mut inputs = vec![a.clone(), keys];
        inputs.extend(params.values().iter().cloned());
        record(
            "fusion_block",
            tape_vs_fd(&inputs, 340 + s, |g, v| {
                let (q, z) = fusion_block(g, &Bound::from_vars(v[2..].to_vec()), &block, v[0], v[1])?;
                let zq = g.slice_cols(z, 0, 6)?;
                let qz = g.concat_cols(q, q)?;
                let m = g.mean(zq)?;
                let m = g.scale(m, 1.0);
                let qm = g.mean(qz)?;
                g.add(m, qm)
            })?,
        );

        // Whole auto-encoder: surface points and every parameter.
        let model = core(AutoEncoder::new(small_arch(), 40 + s))?;
        let surf = rand_tensor(&mut rng, 16, 3);
        let sk: Vec<f64> = (0..4)
            .flat_map(|_| {
                let p = [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)];
                [p[0], p[1], p[2], rng.random_range(0.05..0.3)]
            })
            .collect();
        let sk = Tensor::matrix(4, 4, sk).unwrap();
        let queries = rand_tensor(&mut rng, 5, 3);
        let mut inputs = vec![surf];
        inputs.extend(model.params.values().iter().cloned());
        record(
            "autoencoder",
            tape_vs_fd(&inputs, 350 + s, |g, v| {
                let p = Bound::from_vars(v[1..].to_vec());
                let skv = g.leaf(sk.clone())?;
                let z = model.encode_graph(g, &p, v[0], skv)?;
                model.decode_graph(g, &p, z, &queries)
            })?,
        );
    }
    let (name, err) = worst
        .iter()
        .fold(("", 0.0), |acc, (n, &e)| if e > acc.1 { (n, e) } else { acc });
    ensure(err < C2_REL_TOL, || format!("{name} relative error {err:.2e}"))?;
    Ok(format!("{} checks, worst {name} {err:.2e}", worst.len()))
}

// ------------------------------------------------------------- criterion 3

fn criterion_3() -> Outcome {
    let meshes: [(&str, TriangleMesh); 3] = [
        ("sphere", shapes::icosphere(0.8, 3)),
        ("torus", shapes::torus(0.6, 0.25, 64, 32)),
        ("cylinder", shapes::cylinder(0.4, 1.4, 64, 8)),
    ];
    let mut parts = Vec::new();
    for (name, mesh) in &meshes {
        let vol = core(mesh_to_sdf(mesh, 64, 0.1))?;
        let extracted = marching_cubes(&vol, 0.0);
        ensure(!extracted.is_empty(), || format!("{name}: empty surface"))?;
        let dense = core(mesh.sample_surface(20_000, 5).and_then(PointCloud::new))?;
        let verts = core(PointCloud::new(extracted.vertices.clone()))?;
        let cd = core(chamfer_with(&verts, &dense, ChamferVariant::Unsquared))?;
        let limit = C3_CHAMFER_SPACINGS * vol.spacing();
        ensure(cd < limit, || format!("{name}: chamfer {cd:.4} >= {limit:.4}"))?;
        parts.push(format!("{name} {:.3}", cd / vol.spacing()));
    }

    let mesh = shapes::icosphere(0.4, 3);
    let vol = core(mesh_to_sdf(&mesh, 64, 0.6))?;
    let surface = core(mesh.sample_surface(1024, 0).and_then(PointCloud::new))?;
    let sk = core(skeletonize(
        &surface,
        &SkeletonizeConfig {
            n_s: 64,
            ..SkeletonizeConfig::default()
        },
    ))?;
    let mask = core(skeleton_guided_mask(&vol.grid, &sk.points, 0.3))?;
    let covered = vol
        .values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v >= -0.1)
        .all(|(i, _)| mask.binary_search(&i).is_ok());
    ensure(covered, || "0.3 mask does not cover the interior and truncation band".into())?;
    let values: Vec<f64> = mask.iter().map(|&i| vol.values[i]).collect();
    let sparse = core(assemble_sparse_volume(vol.grid, &mask, &values, -1.0))?;
    ensure(marching_cubes(&sparse, 0.0) == marching_cubes(&vol, 0.0), || {
        "sparse p=0.3 mesh differs from the full-volume mesh".into()
    })?;
    Ok(format!("chamfer/spacing: {}; sparse mesh identical", parts.join(", ")))
}

// ------------------------------------------------------------- criterion 4

fn criterion_4() -> Outcome {
    let sched = NoiseSchedule::default();
    ensure(sched.steps == 32, || "default schedule is not 32 steps".into())?;
    let guide = GuidanceConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(400);
    let mu = rand_tensor(&mut rng, 8, 6);
    let delta = DeltaScore { mean: mu.clone() };
    let out = core(sample_latents(&delta, 8, 6, &sched, &guide, None, 1, 16))?;
    let delta_err = out
        .iter()
        .flat_map(|z| z.data.data.iter().zip(&mu.data).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max);
    ensure(delta_err < C4_DELTA_TOL, || format!("delta: max deviation {delta_err:.2e}"))?;

    let mean = [1.0, -2.0, 0.5, 3.0];
    let s2 = 0.25;
    let gauss = GaussianScore {
        mean: Tensor::matrix(1, 4, mean.to_vec()).unwrap(),
        variance: s2,
    };
    let n = 4096;
    let out = core(sample_latents(&gauss, 1, 4, &sched, &guide, None, 7, n))?;
    let mut worst_mean: f64 = 0.0;
    let mut worst_var: f64 = 0.0;
    for (c, &mu_c) in mean.iter().enumerate() {
        let xs: Vec<f64> = out.iter().map(|z| z.data.data[c]).collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        worst_mean = worst_mean.max((m - mu_c).abs() / mu_c.abs());
        worst_var = worst_var.max((v - s2).abs() / s2);
    }
    ensure(worst_mean <= C4_MEAN_REL, || format!("gaussian: mean error {:.2}%", 100.0 * worst_mean))?;
    ensure(worst_var <= C4_VAR_REL, || format!("gaussian: variance error {:.2}%", 100.0 * worst_var))?;

    // Closed-form flow for N(mu, s²): z(σ) = mu + (z0 − mu) √((s² + σ²) / (s² + σ0²)).
    let z0 = 37.0;
    let (mu1, var1) = (0.7, 0.25);
    let score = |z: &Tensor, sigma: f64| -> CoreResult<Tensor> {
        Ok(Tensor {
            shape: z.shape.clone(),
            data: z.data.iter().map(|x| (mu1 - x) / (var1 + sigma * sigma)).collect(),
        })
    };
    let mut errors = Vec::new();
    for steps in [16, 32, 64, 128] {
        let sigmas = core(schedule_sigmas(&NoiseSchedule { steps, ..sched }))?;
        let levels = &sigmas[..steps];
        let mut z = Tensor::matrix(1, 1, vec![z0]).unwrap();
        for w in levels.windows(2) {
            z = core(ode_step_heun(&z, w[0], w[1], score))?;
        }
        let end = levels[steps - 1];
        let exact = mu1 + (z0 - mu1) * ((var1 + end * end) / (var1 + levels[0] * levels[0])).sqrt();
        errors.push((z.data[0] - exact).abs());
    }
    let orders: Vec<f64> = errors.windows(2).map(|e| (e[0] / e[1]).log2()).collect();
    let min_order = orders.iter().cloned().fold(f64::INFINITY, f64::min);
    ensure(min_order >= C4_MIN_ORDER, || format!("convergence orders {orders:.3?}"))?;
    Ok(format!(
        "delta max dev {delta_err:.1e}; gaussian mean err {:.2}%, var err {:.2}%; orders {:.2?}",
        100.0 * worst_mean,
        100.0 * worst_var,
        orders
    ))
}

// ------------------------------------------------------------- criterion 5

struct LabelScore;

impl ScoreFunction for LabelScore {
    fn score(&self, state: &Tensor, _: f64, c: Option<usize>) -> CoreResult<Tensor> {
        let shift = c.map_or(0.25, |c| 1.5 + c as f64);
        Ok(Tensor {
            shape: state.shape.clone(),
            data: state.data.iter().map(|x| x * x - shift).collect(),
        })
    }
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let state = rand_tensor(&mut rng, 3, 5);
    for convention in [GuidanceConvention::AsPaper, GuidanceConvention::Standard] {
        let cfg = GuidanceConfig { w: 0.0, convention };
        let got = core(cfg_score(&LabelScore, &state, 0.3, Some(2), &cfg))?;
        let branch = match convention {
            GuidanceConvention::AsPaper => None,
            GuidanceConvention::Standard => Some(2),
        };
        let want = core(LabelScore.score(&state, 0.3, branch))?;
        ensure(got == want, || format!("{convention:?}: w = 0 differs from its branch"))?;
        let (u, c) = (rand_tensor(&mut rng, 2, 2), rand_tensor(&mut rng, 2, 2));
        let picked = combine_guidance(&u, &c, &cfg);
        let expect = if branch.is_none() { &u } else { &c };
        ensure(&picked == expect, || format!("{convention:?}: combine at w = 0 not exact"))?;
    }
    let uncond = Tensor::matrix(1, 1, vec![1.0]).unwrap();
    let cond = Tensor::matrix(1, 1, vec![2.0]).unwrap();
    let paper = combine_guidance(
        &uncond,
        &cond,
        &GuidanceConfig {
            w: 1.0,
            convention: GuidanceConvention::AsPaper,
        },
    );
    let standard = combine_guidance(
        &uncond,
        &cond,
        &GuidanceConfig {
            w: 1.0,
            convention: GuidanceConvention::Standard,
        },
    );
    ensure(paper.data == [0.0], || format!("as-paper example gave {:?}", paper.data))?;
    ensure(standard.data == [3.0], || format!("standard example gave {:?}", standard.data))?;
    Ok("w = 0 selects the branch exactly; worked example 0 (as-paper) and 3 (standard)".into())
}

// ------------------------------------------------------------- criterion 6

fn brute_nearest(p: Point3, set: &[Point3]) -> f64 {
    set.iter().map(|&q| dist2(p, q)).fold(f64::INFINITY, f64::min)
}

fn brute_emd(a: &[Point3], b: &[Point3]) -> f64 {
    // Heap's algorithm over all permutations of b.
    let n = a.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    let cost = |perm: &[usize]| (0..n).map(|i| dist(a[i], b[perm[i]])).sum::<f64>();
    let mut best = cost(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(cost(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best / n as f64
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(600);
    let mut emd_worst: f64 = 0.0;
    for _ in 0..20 {
        let (a, b) = (random_cloud(&mut rng, 8), random_cloud(&mut rng, 8));
        let got = core(emd_exact(&a, &b))?.value;
        emd_worst = emd_worst.max((got - brute_emd(a.points(), b.points())).abs());
    }
    ensure(emd_worst <= C6_ORACLE_TOL, || format!("emd vs 8! oracle: {emd_worst:.2e}"))?;

    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let (a, b) = (random_cloud(&mut rng, 16), random_cloud(&mut rng, 16));
        let (pa, pb) = (a.points(), b.points());
        let ab: Vec<f64> = pa.iter().map(|&p| brute_nearest(p, pb)).collect();
        let ba: Vec<f64> = pb.iter().map(|&p| brute_nearest(p, pa)).collect();
        let cd = ab.iter().sum::<f64>() / 16.0 + ba.iter().sum::<f64>() / 16.0;
        let hd = ab.iter().chain(&ba).cloned().fold(0.0, f64::max).sqrt();
        let tau: f64 = 0.25;
        let within = |d: &[f64]| d.iter().filter(|&&x| x.sqrt() <= tau).count() as f64 / d.len() as f64;
        let (p, r) = (within(&ab), within(&ba));
        let f1 = if p + r == 0.0 { 0.0 } else { 200.0 * p * r / (p + r) };
        worst = worst
            .max((core(chamfer(&a, &b))? - cd).abs())
            .max((core(hausdorff(&a, &b))? - hd).abs())
            .max((core(f1_score(&a, &b, tau))? - f1).abs());
    }
    ensure(worst <= C6_ORACLE_TOL, || format!("CD/HD/F1 vs double loop: {worst:.2e}"))?;

    let mut total = 0.0;
    for trial in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(10_000 + trial);
        let mut draw = || -> Vec<PointCloud> {
            (0..64)
                .map(|_| PointCloud::new(vec![[randn(&mut rng), randn(&mut rng), randn(&mut rng)]]).unwrap())
                .collect()
        };
        let (gen, reference) = (draw(), draw());
        total += core(set_distances(&gen, &reference, Base::Chamfer).and_then(|d| nna_1(&d)))?;
    }
    let nna = total / 100.0;
    ensure((C6_NNA_BAND.0..=C6_NNA_BAND.1).contains(&nna), || format!("mean 1-NNA {nna:.2}%"))?;

    let n = 100_000;
    let fa = FeatureSet::new((0..n).map(|_| vec![randn(&mut rng)]).collect()).unwrap();
    let fb = FeatureSet::new((0..n).map(|_| vec![1.0 + randn(&mut rng)]).collect()).unwrap();
    let fd = core(frechet_feature_distance(&fa, &fb))?;
    ensure((fd - 1.0).abs() <= C6_FRECHET_TOL, || format!("1-D Fréchet {fd:.4}"))?;
    Ok(format!(
        "emd dev {emd_worst:.1e}, CD/HD/F1 dev {worst:.1e}, mean 1-NNA {nna:.2}%, Fréchet {fd:.4}"
    ))
}

// ------------------------------------------------------- CLI criteria (7, 8)

fn skelgen(args: &[&str], threads: Option<&str>) -> Result<String, String> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_skelgen"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("SKELGEN_THREADS", t),
        None => cmd.env_remove("SKELGEN_THREADS"),
    };
    let out = cmd.output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "skelgen {} exited {:?}: {}",
            args.first().unwrap_or(&""),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr).trim()
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn csv_value(path: &Path, metric: &str) -> Result<f64, String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    text.lines()
        .find_map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f.first() == Some(&metric)).then(|| f[2].parse::<f64>().ok()).flatten()
        })
        .ok_or_else(|| format!("{metric} missing from {}", path.display()))
}

fn loss_trace(path: &Path) -> Result<Vec<f64>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    text.lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).and_then(|v| v.parse().ok()).ok_or_else(|| format!("bad line {l:?}")))
        .collect()
}

struct Pipeline {
    root: PathBuf,
}

impl Pipeline {
    fn dir(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }
}

fn criterion_7(root: &Path) -> Result<(String, Pipeline), String> {
    let pl = Pipeline { root: root.to_path_buf() };
    let mesh = root.join("sphere.obj");
    core(io::write_obj(&mesh, &shapes::icosphere(0.8, 3)))?;
    let (data, skel, train, recon, eval) = (pl.dir("data"), pl.dir("skel"), pl.dir("train"), pl.dir("recon"), pl.dir("eval"));
    skelgen(&["build-sdf", p(&mesh), "--profile", "toy", "--out", p(&data)], None)?;
    let cloud = data.join("cloud.xyz");
    skelgen(&["skeletonize", p(&cloud), "--profile", "toy", "--out", p(&skel)], None)?;
    let sk = skel.join("skeleton.csv");
    skelgen(
        &[
            "train-toy", "--volume", p(&data.join("volume.msdf")), "--cloud", p(&cloud), "--skeleton", p(&sk),
            "--profile", "toy", "--steps", "300", "--out", p(&train),
        ],
        None,
    )?;
    skelgen(
        &[
            "reconstruct", "--model", p(&train.join("model.sknn")), "--cloud", p(&cloud), "--skeleton", p(&sk),
            "--profile", "toy", "--out", p(&recon),
        ],
        None,
    )?;
    skelgen(
        &["eval-recon", "--pred", p(&recon.join("mesh.obj")), "--gt", p(&cloud), "--out", p(&eval)],
        None,
    )?;
    let losses = loss_trace(&train.join("losses.csv"))?;
    ensure(losses.len() == 300, || format!("{} loss entries", losses.len()))?;
    let (first, last) = (losses[0], losses[losses.len() - 1]);
    let f1 = csv_value(&eval.join("report.csv"), "f1")?;
    ensure(last <= C7_LOSS_RATIO * first, || format!("loss {first:.4} -> {last:.4}"))?;
    ensure(f1 >= C7_MIN_F1, || format!("F1@0.06 {f1:.2}%"))?;
    Ok((format!("F1@0.06 {f1:.2}%, loss {first:.4} -> {last:.5}"), pl))
}

fn tree(dir: &Path) -> Result<BTreeMap<PathBuf, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(|e| format!("{}: {e}", dir.display()))? {
        let path = entry.map_err(|e| e.to_string())?.path();
        let rel = path.strip_prefix(dir).unwrap().to_path_buf();
        out.insert(rel, std::fs::read(&path).map_err(|e| e.to_string())?);
    }
    Ok(out)
}

fn criterion_8(pl: &Pipeline) -> Outcome {
    let data = pl.dir("data");
    let cloud = data.join("cloud.xyz");
    let sk = pl.dir("skel").join("skeleton.csv");
    let model = pl.dir("train").join("model.sknn");
    let latent = pl.dir("train").join("latent.csv");
    let mesh = pl.root.join("sphere.obj");
    let gen_dir = pl.root.join("gen-set");
    std::fs::create_dir_all(&gen_dir).map_err(|e| e.to_string())?;
    for (name, m) in [("a.obj", shapes::icosphere(0.7, 2)), ("b.obj", shapes::torus(0.6, 0.2, 32, 16))] {
        core(io::write_obj(&gen_dir.join(name), &m))?;
    }
    let denoiser = pl.dir("den-check").join("denoiser.sknn");
    let commands: Vec<(&str, Vec<String>)> = vec![
        ("build-sdf", vec!["build-sdf".into(), p(&mesh).into(), "--profile".into(), "toy".into()]),
        ("skeletonize", vec!["skeletonize".into(), p(&cloud).into(), "--profile".into(), "toy".into()]),
        (
            "skeletonize --hierarchical",
            vec!["skeletonize".into(), p(&cloud).into(), "--profile".into(), "toy".into(), "--hierarchical".into()],
        ),
        (
            "train-toy",
            ["train-toy", "--volume", p(&data.join("volume.msdf")), "--cloud", p(&cloud), "--skeleton", p(&sk), "--profile", "toy", "--steps", "25"]
                .map(String::from)
                .to_vec(),
        ),
        (
            "reconstruct",
            ["reconstruct", "--model", p(&model), "--cloud", p(&cloud), "--skeleton", p(&sk), "--profile", "toy"]
                .map(String::from)
                .to_vec(),
        ),
        (
            "train-denoiser",
            ["train-denoiser", p(&latent), "--steps", "20", "--seed", "3"].map(String::from).to_vec(),
        ),
        (
            "sample --examples",
            ["sample", "--model", p(&model), "--examples", p(&latent), "--profile", "toy", "--count", "2", "--seed", "5"]
                .map(String::from)
                .to_vec(),
        ),
        (
            "sample --denoiser",
            ["sample", "--model", p(&model), "--denoiser", p(&denoiser), "--profile", "toy", "--count", "2", "--steps", "8"]
                .map(String::from)
                .to_vec(),
        ),
        (
            "eval-recon",
            ["eval-recon", "--pred", p(&pl.dir("recon").join("mesh.obj")), "--gt", p(&cloud)].map(String::from).to_vec(),
        ),
        (
            "eval-gen",
            ["eval-gen", "--gen", p(&gen_dir), "--ref", p(&gen_dir), "--points", "512"].map(String::from).to_vec(),
        ),
    ];
    // The denoiser used by `sample --denoiser` comes from a separate run.
    skelgen(&["train-denoiser", p(&latent), "--steps", "20", "--out", p(&pl.dir("den-check"))], None)?;
    let mut checked = 0;
    for (i, (name, args)) in commands.iter().enumerate() {
        let mut outputs = Vec::new();
        for (run, threads) in [(0, None), (1, Some("2"))] {
            let out = pl.root.join(format!("det-{i}-{run}"));
            let mut full: Vec<&str> = args.iter().map(String::as_str).collect();
            full.extend(["--out", p(&out)]);
            skelgen(&full, threads)?;
            outputs.push(tree(&out)?);
        }
        ensure(!outputs[0].is_empty(), || format!("{name}: wrote nothing"))?;
        ensure(outputs[0] == outputs[1], || format!("{name}: outputs differ between runs"))?;
        checked += outputs[0].len();
    }
    Ok(format!(
        "{} commands, {checked} files bitwise identical across reruns (second run with 2 threads)",
        commands.len()
    ))
}

// -------------------------------------------------------------------- driver

struct Line {
    id: usize,
    title: &'static str,
    result: Outcome,
    elapsed: Duration,
    budget: Duration,
}

fn timed<T>(f: impl FnOnce() -> Result<T, String>) -> (Result<T, String>, Duration) {
    let t = Instant::now();
    let r = f();
    (r, t.elapsed())
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let mut lines = Vec::new();
    let mut push = |id, title, budget: Duration, (result, elapsed): (Outcome, Duration)| {
        lines.push(Line {
            id,
            title,
            result,
            elapsed,
            budget,
        })
    };
    push(1, "skeleton geometry", secs(5), timed(criterion_1));
    push(2, "differentiability", secs(60), timed(criterion_2));
    push(3, "field round-trip", secs(30), timed(criterion_3));
    push(4, "diffusion correctness", secs(60), timed(criterion_4));
    push(5, "CFG algebra", secs(5), timed(criterion_5));
    push(6, "metrics oracle equivalence", secs(300), timed(criterion_6));
    let (r7, t7) = timed(|| criterion_7(tmp.path()));
    let pipeline = r7.as_ref().ok().map(|(_, pl)| Pipeline { root: pl.root.clone() });
    push(7, "toy end-to-end", secs(600), (r7.map(|(s, _)| s), t7));
    let r8 = match &pipeline {
        Some(pl) => timed(|| criterion_8(pl)),
        None => (Err("skipped: criterion 7 produced no pipeline outputs".to_string()), Duration::ZERO),
    };
    push(8, "determinism", secs(600), r8);

    let mut failed = 0;
    for l in &lines {
        let (ok, detail) = match &l.result {
            Ok(d) if l.elapsed <= l.budget => (true, d.clone()),
            Ok(d) => (false, format!("{d}; runtime exceeds {:?}", l.budget)),
            Err(e) => (false, e.clone()),
        };
        failed += usize::from(!ok);
        println!(
            "criterion {} [{}] {}: {} ({:.2}s)",
            l.id,
            if ok { "PASS" } else { "FAIL" },
            l.title,
            detail,
            l.elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", lines.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
