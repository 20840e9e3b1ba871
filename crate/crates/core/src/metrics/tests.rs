use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::*;
use crate::geom::{dist, dist2, Point3};

fn pc(points: &[Point3]) -> PointCloud {
    PointCloud::new(points.to_vec()).unwrap()
}

fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> PointCloud {
    pc(&(0..n).map(|_| [rng.random(), rng.random(), rng.random()]).collect::<Vec<_>>())
}

fn gaussian_cloud(rng: &mut ChaCha8Rng, n: usize) -> PointCloud {
    pc(&(0..n)
        .map(|_| {
            let p: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
            p
        })
        .collect::<Vec<_>>())
}

fn brute_nearest(p: Point3, set: &[Point3]) -> f64 {
    set.iter().map(|&q| dist2(p, q)).fold(f64::INFINITY, f64::min)
}

fn brute_chamfer(a: &PointCloud, b: &PointCloud) -> f64 {
    let ab: f64 = a.points().iter().map(|&p| brute_nearest(p, b.points())).sum::<f64>() / a.len() as f64;
    let ba: f64 = b.points().iter().map(|&p| brute_nearest(p, a.points())).sum::<f64>() / b.len() as f64;
    ab + ba
}

fn brute_hausdorff(a: &PointCloud, b: &PointCloud) -> f64 {
    let one = |x: &PointCloud, y: &PointCloud| {
        x.points()
            .iter()
            .map(|&p| brute_nearest(p, y.points()).sqrt())
            .fold(0.0, f64::max)
    };
    one(a, b).max(one(b, a))
}

fn brute_f1(pred: &PointCloud, gt: &PointCloud, tau: f64) -> f64 {
    let frac = |x: &PointCloud, y: &PointCloud| {
        x.points()
            .iter()
            .filter(|&&p| y.points().iter().any(|&q| dist(p, q) <= tau))
            .count() as f64
            / x.len() as f64
    };
    let (p, r) = (frac(pred, gt), frac(gt, pred));
    if p + r == 0.0 {
        0.0
    } else {
        200.0 * p * r / (p + r)
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn brute_emd(a: &PointCloud, b: &PointCloud) -> f64 {
    let n = a.len();
    permutations(n)
        .iter()
        .map(|perm| (0..n).map(|i| dist(a.points()[i], b.points()[perm[i]])).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
        / n as f64
}

#[test]
fn chamfer_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = random_cloud(&mut rng, 16);
    assert_eq!(chamfer(&a, &a).unwrap(), 0.0);
    assert_eq!(chamfer(&pc(&[[0.0; 3]]), &pc(&[[1.0, 0.0, 0.0]])).unwrap(), 2.0);
    for _ in 0..10 {
        let (a, b) = (random_cloud(&mut rng, 16), random_cloud(&mut rng, 16));
        let c = chamfer(&a, &b).unwrap();
        assert!((c - brute_chamfer(&a, &b)).abs() < 1e-12);
        assert!((c - chamfer(&b, &a).unwrap()).abs() < 1e-12);
    }
    let un = chamfer_with(&pc(&[[0.0; 3]]), &pc(&[[2.0, 0.0, 0.0]]), ChamferVariant::Unsquared).unwrap();
    assert_eq!(un, 4.0);
    assert!(matches!(chamfer(&a, &a.select(&[])), Err(Error::EmptyCloud)));
}

#[test]
fn emd_examples() {
    let a = pc(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
    let b = pc(&[[0.0, 1.0, 0.0], [1.0, 1.0, 0.0]]);
    let r = emd(&a, &b).unwrap();
    assert!((r.value - 1.0).abs() < 1e-15);
    assert_eq!(r.assignment, vec![0, 1]);
    assert_eq!(emd(&a, &a).unwrap().value, 0.0);
    assert!(matches!(emd(&a, &pc(&[[0.0; 3]])), Err(Error::ShapeMismatch(_))));
}

#[test]
fn emd_exact_matches_factorial_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let (a, b) = (random_cloud(&mut rng, 8), random_cloud(&mut rng, 8));
        let r = emd_exact(&a, &b).unwrap();
        let brute = brute_emd(&a, &b);
        assert!((r.value - brute).abs() < 1e-12, "{} vs {brute}", r.value);
        let mut seen = r.assignment.clone();
        seen.sort_unstable();
        assert_eq!(seen, (0..8).collect::<Vec<_>>());
        assert!((r.value - emd_exact(&b, &a).unwrap().value).abs() < 1e-12);
    }
}

#[test]
fn auction_certificate_holds() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (a, b) = (random_cloud(&mut rng, 300), random_cloud(&mut rng, 300));
    let exact = emd_exact(&a, &b).unwrap().value;
    let auc = emd_auction(&a, &b, 0.01).unwrap();
    assert!(auc.gap <= 0.01);
    assert!(auc.value >= exact - 1e-12);
    assert!(auc.value <= exact * 1.01 + 1e-12, "{} vs {exact}", auc.value);
    let tight = emd_auction(&a, &b, 1e-6).unwrap();
    assert!((tight.value - exact).abs() <= 1e-6 * exact + 1e-12);
}

#[test]
fn emd_large_uses_certified_auction() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (a, b) = (random_cloud(&mut rng, 1100), random_cloud(&mut rng, 1100));
    let r = emd(&a, &b).unwrap();
    assert!(r.gap > 0.0 || r.value > 0.0);
    assert!(r.gap <= 0.01);
}

#[test]
fn hausdorff_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = random_cloud(&mut rng, 20);
    assert_eq!(hausdorff(&a, &a).unwrap(), 0.0);
    assert_eq!(hausdorff(&pc(&[[0.0; 3]]), &pc(&[[1.0, 0.0, 0.0]])).unwrap(), 1.0);
    for _ in 0..10 {
        let (a, b) = (random_cloud(&mut rng, 17), random_cloud(&mut rng, 23));
        assert!((hausdorff(&a, &b).unwrap() - brute_hausdorff(&a, &b)).abs() < 1e-12);
    }
}

#[test]
fn f1_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let a = random_cloud(&mut rng, 20);
    assert_eq!(f1_score(&a, &a, F1_THRESHOLD).unwrap(), 100.0);
    let far = pc(&[[5.0, 5.0, 5.0]]);
    assert_eq!(f1_score(&a, &far, F1_THRESHOLD).unwrap(), 0.0);
    let gt = pc(&[[0.0; 3], [1.0, 0.0, 0.0]]);
    let pred = pc(&[[0.0; 3], [1.0, 0.0, 0.0], [0.0, 3.0, 0.0], [0.0, 0.0, 3.0]]);
    let f1 = f1_score(&pred, &gt, F1_THRESHOLD).unwrap();
    assert!((f1 - 200.0 / 3.0).abs() < 1e-12);
    for _ in 0..10 {
        let (p, g) = (random_cloud(&mut rng, 30), random_cloud(&mut rng, 25));
        assert!((f1_score(&p, &g, 0.2).unwrap() - brute_f1(&p, &g, 0.2)).abs() < 1e-12);
    }
    assert!(f1_score(&a, &a, 0.0).is_err());
}

#[test]
fn metrics_are_permutation_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (a, b) = (random_cloud(&mut rng, 12), random_cloud(&mut rng, 12));
    let rev: Vec<usize> = (0..12).rev().collect();
    let ar = a.select(&rev);
    assert!((chamfer(&a, &b).unwrap() - chamfer(&ar, &b).unwrap()).abs() < 1e-12);
    assert_eq!(hausdorff(&a, &b).unwrap(), hausdorff(&ar, &b).unwrap());
    assert!((emd(&a, &b).unwrap().value - emd(&ar, &b).unwrap().value).abs() < 1e-12);
    assert_eq!(f1_score(&a, &b, 0.3).unwrap(), f1_score(&ar, &b, 0.3).unwrap());
}

fn singleton(x: f64) -> PointCloud {
    pc(&[[x, 0.0, 0.0]])
}

#[test]
fn mmd_examples() {
    let refs = vec![singleton(0.0), singleton(3.0)];
    let d = pairwise_distances(&refs, &refs, Base::Chamfer).unwrap();
    assert_eq!(mmd(&d, MmdDirection::OverReference).unwrap(), 0.0);
    // One generated shape equal to the first reference.
    let gen = vec![singleton(0.0)];
    let d = pairwise_distances(&gen, &refs, Base::Emd).unwrap();
    assert_eq!(mmd(&d, MmdDirection::OverReference).unwrap(), 1.5);
    assert_eq!(mmd(&d, MmdDirection::OverGenerated).unwrap(), 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let gen: Vec<_> = (0..4).map(|_| random_cloud(&mut rng, 6)).collect();
    let refs: Vec<_> = (0..4).map(|_| random_cloud(&mut rng, 6)).collect();
    let d = pairwise_distances(&gen, &refs, Base::Chamfer).unwrap();
    let brute: f64 = refs
        .iter()
        .map(|r| gen.iter().map(|g| brute_chamfer(g, r)).fold(f64::INFINITY, f64::min))
        .sum::<f64>()
        / 4.0;
    assert!((mmd(&d, MmdDirection::OverReference).unwrap() - brute).abs() < 1e-12);
    assert!(mmd(&[], MmdDirection::OverReference).is_err());
}

#[test]
fn coverage_examples() {
    let refs = vec![singleton(0.0), singleton(1.0), singleton(5.0)];
    let d = pairwise_distances(&refs, &refs, Base::Chamfer).unwrap();
    assert_eq!(coverage(&d).unwrap(), 100.0);
    let gen = vec![singleton(4.0), singleton(6.0), singleton(9.0)];
    let d = pairwise_distances(&gen, &refs, Base::Chamfer).unwrap();
    assert!((coverage(&d).unwrap() - 100.0 / 3.0).abs() < 1e-12);
    // 3v3 brute force: gen near refs 0 and 2.
    let gen = vec![singleton(-0.2), singleton(0.3), singleton(4.0)];
    let d = pairwise_distances(&gen, &refs, Base::Emd).unwrap();
    let mut hit = [false; 3];
    for g in &gen {
        let x = g.points()[0][0];
        let best = (0..3)
            .min_by(|&i, &j| (x - refs[i].points()[0][0]).abs().total_cmp(&(x - refs[j].points()[0][0]).abs()))
            .unwrap();
        hit[best] = true;
    }
    let brute = 100.0 * hit.iter().filter(|&&h| h).count() as f64 / 3.0;
    assert!((coverage(&d).unwrap() - brute).abs() < 1e-12);
}

#[test]
fn nna_examples() {
    let shapes: Vec<_> = [0.0, 1.5, 4.0, 9.0].iter().map(|&x| singleton(x)).collect();
    let dup = set_distances(&shapes, &shapes, Base::Chamfer).unwrap();
    assert_eq!(nna_1(&dup).unwrap(), 0.0);
    let gen: Vec<_> = (0..5).map(|i| singleton(2.0 * i as f64)).collect();
    let refs: Vec<_> = (0..5).map(|i| singleton(2.0 * i as f64 + 1.0)).collect();
    assert_eq!(nna_1(&set_distances(&gen, &refs, Base::Chamfer).unwrap()).unwrap(), 0.0);
    let near: Vec<_> = (0..4).map(|i| singleton(0.1 * i as f64)).collect();
    let far: Vec<_> = (0..4).map(|i| singleton(100.0 + 0.1 * i as f64)).collect();
    assert_eq!(nna_1(&set_distances(&near, &far, Base::Emd).unwrap()).unwrap(), 100.0);
    let one = set_distances(&near[..1], &far, Base::Chamfer).unwrap();
    assert!(matches!(nna_1(&one), Err(Error::TooFew { .. })));
}

#[test]
fn nna_same_distribution_is_near_half() {
    let mean: f64 = (0..100u64)
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let gen: Vec<_> = (0..64).map(|_| gaussian_cloud(&mut rng, 1)).collect();
            let refs: Vec<_> = (0..64).map(|_| gaussian_cloud(&mut rng, 1)).collect();
            nna_1(&set_distances(&gen, &refs, Base::Chamfer).unwrap()).unwrap()
        })
        .sum::<f64>()
        / 100.0;
    assert!((45.0..=55.0).contains(&mean), "mean 1-NNA {mean}");
}

fn features(rng: &mut ChaCha8Rng, n: usize, mean: &[f64], std: &[f64]) -> FeatureSet {
    FeatureSet::new(
        (0..n)
            .map(|_| {
                mean.iter()
                    .zip(std)
                    .map(|(m, s)| {
                        let e: f64 = rng.sample(StandardNormal);
                        m + s * e
                    })
                    .collect()
            })
            .collect(),
    )
    .unwrap()
}

#[test]
fn frechet_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let a = features(&mut rng, 50, &[0.0, 1.0, -2.0], &[1.0, 0.5, 2.0]);
    assert!(frechet_feature_distance(&a, &a).unwrap().abs() < 1e-8);
    let a = features(&mut rng, 100_000, &[0.0], &[1.0]);
    let b = features(&mut rng, 100_000, &[1.0], &[1.0]);
    let f = frechet_feature_distance(&a, &b).unwrap();
    assert!((f - 1.0).abs() < 0.02, "1-D Fréchet {f}");
    // Diagonal 2-D: |Δμ|² + Σ (σa − σb)².
    let a = features(&mut rng, 50_000, &[0.0, 0.0], &[1.0, 2.0]);
    let b = features(&mut rng, 50_000, &[1.0, -1.0], &[2.0, 1.0]);
    let f = frechet_feature_distance(&a, &b).unwrap();
    assert!((f - 4.0).abs() < 0.1, "2-D Fréchet {f}");
}

#[test]
fn frechet_rotation_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let a = features(&mut rng, 40, &[0.0, 1.0, 0.5], &[1.0, 0.3, 2.0]);
    let b = features(&mut rng, 40, &[0.5, 0.0, 0.0], &[0.7, 1.0, 1.5]);
    let (c, s) = (0.6f64, 0.8f64);
    let rot = |f: &FeatureSet| {
        FeatureSet::new(
            f.rows()
                .iter()
                .map(|r| vec![c * r[0] - s * r[1], s * r[0] + c * r[1], r[2]])
                .collect(),
        )
        .unwrap()
    };
    let f0 = frechet_feature_distance(&a, &b).unwrap();
    let f1 = frechet_feature_distance(&rot(&a), &rot(&b)).unwrap();
    assert!(f0 >= 0.0);
    assert!((f0 - f1).abs() < 1e-8);
    let bad = FeatureSet::new(vec![vec![0.0; 2]; 4]).unwrap();
    assert!(matches!(frechet_feature_distance(&a, &bad), Err(Error::ShapeMismatch(_))));
    let few = FeatureSet::new(vec![vec![0.0; 3]]).unwrap();
    assert!(matches!(frechet_feature_distance(&a, &few), Err(Error::TooFew { .. })));
}

#[test]
fn kid_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let a = features(&mut rng, 30, &[0.0, 0.0], &[1.0, 1.0]);
    assert!(kernel_feature_distance(&a, &a).unwrap() <= 1e-8);
    // Constants 0 vs 1 in 1-D: k(0,0)=1, k(1,1)=8, k(0,1)=1 → 1 + 8 − 2 = 7.
    let zeros = FeatureSet::new(vec![vec![0.0]; 3]).unwrap();
    let ones = FeatureSet::new(vec![vec![1.0]; 4]).unwrap();
    assert!((kernel_feature_distance(&zeros, &ones).unwrap() - 7.0).abs() < 1e-12);
    let b = features(&mut rng, 20, &[0.5, 0.0], &[1.0, 2.0]);
    let k = |x: &[f64], y: &[f64]| ((x[0] * y[0] + x[1] * y[1]) / 2.0 + 1.0).powi(3);
    let (ra, rb) = (a.rows(), b.rows());
    let (mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0);
    for i in 0..ra.len() {
        for j in 0..ra.len() {
            if i != j {
                xx += k(&ra[i], &ra[j]);
            }
        }
    }
    for i in 0..rb.len() {
        for j in 0..rb.len() {
            if i != j {
                yy += k(&rb[i], &rb[j]);
            }
        }
    }
    for x in ra {
        for y in rb {
            xy += k(x, y);
        }
    }
    let naive = xx / (30.0 * 29.0) + yy / (20.0 * 19.0) - 2.0 * xy / 600.0;
    assert_eq!(kernel_feature_distance(&a, &b).unwrap(), naive);
}

#[test]
fn feature_csv_ingestion() {
    let f = FeatureSet::parse_csv("f0,f1\n1,2\n3,4\n").unwrap();
    assert_eq!(f.rows(), &[vec![1.0, 2.0], vec![3.0, 4.0]]);
    assert!(FeatureSet::parse_csv("1,2\n3\n").is_err());
    assert!(FeatureSet::parse_csv("1,2\nx,4\n").is_err());
}

#[test]
fn subsample_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let a = random_cloud(&mut rng, 40);
    let all = eval_protocol_subsample(&a, 40).unwrap();
    let mut got: Vec<_> = all.points().to_vec();
    let mut want: Vec<_> = a.points().to_vec();
    got.sort_by(|x, y| x.partial_cmp(y).unwrap());
    want.sort_by(|x, y| x.partial_cmp(y).unwrap());
    assert_eq!(got, want);
    assert_eq!(eval_protocol_subsample(&a, 1).unwrap().points(), &[a.points()[0]]);
    // Farthest-point oracle.
    let sub = eval_protocol_subsample(&a, 10).unwrap();
    let mut chosen = vec![0usize];
    let mut d: Vec<f64> = a.points().iter().map(|&p| dist2(p, a.points()[0])).collect();
    while chosen.len() < 10 {
        let next = (0..40).fold(0, |b, i| if d[i] > d[b] { i } else { b });
        chosen.push(next);
        for i in 0..40 {
            d[i] = d[i].min(dist2(a.points()[i], a.points()[next]));
        }
    }
    assert_eq!(sub, a.select(&chosen));
    assert!(eval_protocol_subsample(&a, 41).is_err());
}

#[test]
fn report_csv_and_scaling() {
    let mut r = MetricReport::new();
    r.push("cd", "shape0", 0.0123).unwrap();
    r.push("f1", "shape0", 88.5).unwrap();
    r.param("tau", 0.06);
    assert!(r.push("hd", "x", f64::NAN).is_err());
    let csv = r.to_csv();
    assert_eq!(csv, "metric,name,value,scale\nparam,tau,0.06,1\ncd,shape0,0.0123,100\nf1,shape0,88.5,1\n");
    assert_eq!(r.get("cd", "shape0"), Some(0.0123));
    assert!(r.to_table().contains("1.2300"));
}
