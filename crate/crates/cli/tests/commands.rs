use std::path::Path;
use std::process::{Command, Output};

use skelgen_core::field::shapes;
use skelgen_core::{io, PointCloud};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skelgen"))
        .args(args)
        .env_remove("SKELGEN_THREADS")
        .output()
        .unwrap()
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn csv_value(path: &Path, metric: &str) -> f64 {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines()
        .find_map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0] == metric).then(|| f[2].parse().unwrap())
        })
        .unwrap_or_else(|| panic!("{metric} missing"))
}

#[test]
fn help_and_usage_exit_codes() {
    assert_eq!(code(&["--help"]), 0);
    for cmd in [
        "build-sdf", "skeletonize", "train-toy", "reconstruct", "train-denoiser", "sample", "eval-recon", "eval-gen",
    ] {
        let o = run(&[cmd, "--help"]);
        assert_eq!(o.status.code(), Some(0), "{cmd}");
        assert!(String::from_utf8_lossy(&o.stdout).contains("--out"), "{cmd}");
    }
    assert_eq!(code(&[]), 1);
    assert_eq!(code(&["no-such-command"]), 1);
    assert_eq!(code(&["skeletonize", "x.xyz"]), 1, "missing --out");
}

#[test]
fn input_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    assert_eq!(code(&["skeletonize", p(&tmp.path().join("missing.xyz")), "--out", p(&out)]), 2);
    let bad = tmp.path().join("bad.xyz");
    std::fs::write(&bad, "0 0 zero\n").unwrap();
    assert_eq!(code(&["skeletonize", p(&bad), "--out", p(&out)]), 2);

    let few = tmp.path().join("few.xyz");
    io::write_xyz(&few, &[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
    assert_eq!(code(&["skeletonize", p(&few), "--n-s", "16", "--out", p(&out)]), 2);
}

#[test]
fn bad_values_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let mesh = tmp.path().join("s.obj");
    io::write_obj(&mesh, &shapes::icosphere(0.8, 2)).unwrap();
    let out = tmp.path().join("o");
    assert_eq!(code(&["build-sdf", p(&mesh), "--resolution", "4", "--out", p(&out)]), 1);

    let cfg = tmp.path().join("cfg.txt");
    std::fs::write(&cfg, "resolution = 16\nno_such_key = 3\n").unwrap();
    assert_eq!(code(&["build-sdf", p(&mesh), "--config", p(&cfg), "--out", p(&out)]), 1);
    assert!(!out.join("volume.msdf").exists());
}

#[test]
fn build_sdf_writes_positive_inside() {
    let tmp = tempfile::tempdir().unwrap();
    let mesh = tmp.path().join("s.obj");
    io::write_obj(&mesh, &shapes::icosphere(0.8, 2)).unwrap();
    let out = tmp.path().join("o");
    let o = run(&["build-sdf", p(&mesh), "--resolution", "17", "--points", "300", "--out", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let vol = io::read_volume(&out.join("volume.msdf")).unwrap();
    assert_eq!(vol.grid.dims, [17; 3]);
    let center = vol.grid.index(8, 8, 8);
    assert!(vol.values[center] > 0.0);
    assert!(vol.values[0] < 0.0);
    assert_eq!(io::read_point_cloud(&out.join("cloud.xyz")).unwrap().len(), 300);
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("normalization.json")).unwrap()).unwrap();
    assert_eq!(meta["resolution"], 17);
}

#[test]
fn skeletonize_cylinder_and_hierarchical_differs() {
    let tmp = tempfile::tempdir().unwrap();
    let cloud = tmp.path().join("cyl.xyz");
    let pts: Vec<_> = (0..2048)
        .map(|i| {
            let t = i as f64 * 2.399_963;
            let z = -0.8 + 1.6 * (i as f64 + 0.5) / 2048.0;
            [0.1 * t.cos(), 0.1 * t.sin(), z]
        })
        .collect();
    io::write_xyz(&cloud, &pts).unwrap();
    let (plain, hier) = (tmp.path().join("plain"), tmp.path().join("hier"));
    let base = ["skeletonize", p(&cloud), "--n-s", "16", "--iters", "2", "--k", "32"];
    assert_eq!(code(&[&base[..], &["--out", p(&plain)]].concat()), 0);
    assert_eq!(code(&[&base[..], &["--hierarchical", "--out", p(&hier)]].concat()), 0);
    let sk = io::read_skeleton(&hier.join("skeleton.csv")).unwrap();
    assert_eq!(sk.len(), 16);
    for (q, r) in sk.points.iter().zip(&sk.radii) {
        assert!(q[0].hypot(q[1]) < 0.03, "{q:?}");
        assert!((r - 0.1).abs() < 0.03, "{r}");
    }
    assert!(io::read_skeleton(&hier.join("skeleton.ply")).is_ok());
    assert_ne!(
        std::fs::read(plain.join("skeleton.csv")).unwrap(),
        std::fs::read(hier.join("skeleton.csv")).unwrap()
    );
}

#[test]
fn sample_zero_count_is_noop() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let missing = tmp.path().join("none.sknn");
    let o = run(&["sample", "--model", p(&missing), "--examples", p(&missing), "--count", "0", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.exists());
}

#[test]
fn eval_gen_identical_sets() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("set");
    std::fs::create_dir(&dir).unwrap();
    io::write_obj(&dir.join("a.obj"), &shapes::icosphere(0.8, 2)).unwrap();
    io::write_obj(&dir.join("b.obj"), &shapes::torus(0.6, 0.2, 32, 16)).unwrap();
    io::write_obj(&dir.join("c.obj"), &shapes::cylinder(0.3, 1.2, 32, 4)).unwrap();
    let out = tmp.path().join("o");
    let o = run(&["eval-gen", "--gen", p(&dir), "--ref", p(&dir), "--points", "256", "--out", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = out.join("report.csv");
    assert_eq!(csv_value(&report, "mmd-cd"), 0.0);
    assert_eq!(csv_value(&report, "mmd-emd"), 0.0);
    assert_eq!(csv_value(&report, "cov-cd"), 100.0);
    assert_eq!(csv_value(&report, "1nna-cd"), 0.0);
}

#[test]
fn eval_recon_identical_clouds() {
    let tmp = tempfile::tempdir().unwrap();
    let mesh = tmp.path().join("s.obj");
    io::write_obj(&mesh, &shapes::icosphere(0.8, 3)).unwrap();
    let out = tmp.path().join("o");
    assert_eq!(code(&["eval-recon", "--pred", p(&mesh), "--gt", p(&mesh), "--points", "512", "--out", p(&out)]), 0);
    let report = out.join("report.csv");
    assert_eq!(csv_value(&report, "cd"), 0.0);
    assert_eq!(csv_value(&report, "hd"), 0.0);
    assert_eq!(csv_value(&report, "f1"), 100.0);

    let cloud = tmp.path().join("small.xyz");
    let pc = PointCloud::new(vec![[0.0; 3], [1.0, 0.0, 0.0]]).unwrap();
    io::write_xyz(&cloud, pc.points()).unwrap();
    assert_eq!(code(&["eval-recon", "--pred", p(&cloud), "--gt", p(&mesh), "--out", p(&out)]), 2);
}
