use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use msc_core::dictionary::load_dictionary;
use msc_core::io::{load_matrix, save_matrix};
use msc_core::sparse::{kkt_violation, Regularizer, SparseCode};
use msc_core::Matrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn msc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_msc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn random_data(path: &Path, rows: usize, cols: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<f64> = (0..rows * cols)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    save_matrix(&Matrix::from_col_major(rows, cols, data).unwrap(), path).unwrap();
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn modality(name: &str, path: &Path) -> String {
    format!("{name}={}", path.display())
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    a: PathBuf,
    b: PathBuf,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let a = root.join("a.msc");
    let b = root.join("b.msc");
    random_data(&a, 8, 120, 1);
    random_data(&b, 6, 120, 2);
    Fixture {
        _dir: dir,
        root,
        a,
        b,
    }
}

#[test]
fn two_modalities_give_a_joint_model() {
    let f = fixture();
    let out = f.root.join("joint");
    let r = msc(&[
        "train-dict",
        "--modality",
        &modality("a", &f.a),
        "--modality",
        &modality("b", &f.b),
        "--k",
        "10",
        "--epochs",
        "3",
        "--out",
        p(&out),
    ]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let (dict, meta) = load_dictionary(&out.join("dictionary")).unwrap();
    assert_eq!(dict.atoms().shape(), (14, 10));
    assert_eq!(meta.modality_blocks.len(), 2);
    assert!(meta.lambda_cross.is_some());
    assert!(String::from_utf8_lossy(&r.stdout).contains("epoch   3"));
}

#[test]
fn missing_input_is_a_data_error() {
    let f = fixture();
    let r = msc(&[
        "train-dict",
        "--modality",
        &format!("a={}", f.root.join("nope.msc").display()),
        "--out",
        p(&f.root.join("x")),
    ]);
    assert_eq!(code(&r), 3);
}

#[test]
fn bad_configuration_exits_2() {
    let f = fixture();
    let cfg = f.root.join("cfg.json");
    std::fs::write(&cfg, r#"{"num_atoms": 0}"#).unwrap();
    let r = msc(&[
        "train-dict",
        "--config",
        p(&cfg),
        "--modality",
        &modality("a", &f.a),
        "--out",
        p(&f.root.join("x")),
    ]);
    assert_eq!(code(&r), 2);
    std::fs::write(&cfg, r#"{"unknown": 1}"#).unwrap();
    let r = msc(&["synth-classify", "--config", p(&cfg), "--out", p(&f.root.join("y"))]);
    assert_eq!(code(&r), 2);
    let r = msc(&["synth-classify", "--schemes", "joint,nope", "--out", p(&f.root.join("y"))]);
    assert_eq!(code(&r), 2);
    let r = msc(&["denoise", "--sigma", "-1", "--out", p(&f.root.join("z"))]);
    assert_eq!(code(&r), 2);
}

#[test]
fn retraining_with_the_same_seed_is_byte_identical() {
    let f = fixture();
    let run = |dir: &str, seed: &str| {
        let out = f.root.join(dir);
        let r = msc(&[
            "train-dict",
            "--modality",
            &modality("a", &f.a),
            "--k",
            "12",
            "--epochs",
            "4",
            "--seed",
            seed,
            "--out",
            p(&out),
        ]);
        assert_eq!(code(&r), 0);
        (
            std::fs::read(out.join("dictionary.msc")).unwrap(),
            std::fs::read(out.join("dictionary.json")).unwrap(),
        )
    };
    let first = run("r1", "5");
    assert_eq!(first, run("r2", "5"));
    assert_ne!(first.0, run("r3", "6").0);
}

fn train_unimodal(f: &Fixture, dir: &str, lambda: &str) -> PathBuf {
    let out = f.root.join(dir);
    let r = msc(&[
        "train-dict",
        "--modality",
        &modality("a", &f.a),
        "--k",
        "12",
        "--lambda",
        lambda,
        "--epochs",
        "3",
        "--out",
        p(&out),
    ]);
    assert_eq!(code(&r), 0);
    out.join("dictionary")
}

#[test]
fn encoded_codes_satisfy_kkt() {
    let f = fixture();
    let stem = train_unimodal(&f, "u", "0.2");
    let out = f.root.join("codes");
    let r = msc(&["encode", "--dict", p(&stem), "--modality", &modality("a", &f.a), "--out", p(&out)]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let codes = load_matrix(out.join("codes.msc")).unwrap();
    let (dict, _) = load_dictionary(&stem).unwrap();
    let x = load_matrix(&f.a).unwrap();
    assert_eq!(codes.shape(), (12, 120));
    for j in 0..x.cols() {
        let c = SparseCode::from_dense(codes.col(j), Regularizer::L1 { lambda: 0.2 }).unwrap();
        assert!(kkt_violation(x.col(j), dict.atoms(), &c, 0.2) < 1e-6);
    }
}

#[test]
fn zero_data_encodes_to_zero() {
    let f = fixture();
    let stem = train_unimodal(&f, "u", "0.1");
    let zeros = f.root.join("zeros.msc");
    save_matrix(&Matrix::zeros(8, 5), &zeros).unwrap();
    let out = f.root.join("zc");
    let r = msc(&["encode", "--dict", p(&stem), "--modality", &modality("a", &zeros), "--out", p(&out)]);
    assert_eq!(code(&r), 0);
    let codes = load_matrix(out.join("codes.msc")).unwrap();
    assert_eq!(codes, Matrix::zeros(12, 5));
}

#[test]
fn cross_modal_needs_a_joint_dictionary() {
    let f = fixture();
    let stem = train_unimodal(&f, "u", "0.1");
    let r = msc(&[
        "encode",
        "--dict",
        p(&stem),
        "--modality",
        &modality("a", &f.a),
        "--cross-modal",
        "a",
        "--out",
        p(&f.root.join("x")),
    ]);
    assert_eq!(code(&r), 2);
}

#[test]
fn cross_modal_codes_from_joint_dictionary() {
    let f = fixture();
    let out = f.root.join("joint");
    let r = msc(&[
        "train-dict",
        "--modality",
        &modality("a", &f.a),
        "--modality",
        &modality("b", &f.b),
        "--k",
        "10",
        "--epochs",
        "2",
        "--out",
        p(&out),
    ]);
    assert_eq!(code(&r), 0);
    let stem = out.join("dictionary");
    let cross = f.root.join("cross");
    let r = msc(&[
        "encode",
        "--dict",
        p(&stem),
        "--modality",
        &modality("b", &f.b),
        "--cross-modal",
        "b",
        "--out",
        p(&cross),
    ]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    assert_eq!(load_matrix(cross.join("codes.msc")).unwrap().shape(), (10, 120));
    let joint = f.root.join("jc");
    let r = msc(&[
        "encode",
        "--dict",
        p(&stem),
        "--modality",
        &modality("a", &f.a),
        "--out",
        p(&joint),
    ]);
    assert_eq!(code(&r), 2, "joint coding without modality b");
    let r = msc(&[
        "encode",
        "--dict",
        p(&stem),
        "--modality",
        &modality("a", &f.a),
        "--modality",
        &modality("b", &f.b),
        "--out",
        p(&joint),
    ]);
    assert_eq!(code(&r), 0);
}

#[test]
fn synth_classify_report_is_reproducible() {
    let f = fixture();
    let cfg = f.root.join("c.json");
    std::fs::write(
        &cfg,
        r#"{"examples": 100, "folds": 2, "num_atoms": 12, "epochs": 3, "svm_c_grid": [1.0]}"#,
    )
    .unwrap();
    let run = |dir: &str| {
        let out = f.root.join(dir);
        let r = msc(&[
            "synth-classify",
            "--config",
            p(&cfg),
            "--schemes",
            "uni-a,joint,cross-b",
            "--seed",
            "3",
            "--out",
            p(&out),
        ]);
        assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
        assert!(String::from_utf8_lossy(&r.stdout).contains("wall time"));
        std::fs::read_to_string(out.join("report.json")).unwrap()
    };
    let first = run("s1");
    assert_eq!(first, run("s2"));
    let v: serde_json::Value = serde_json::from_str(&first).unwrap();
    assert_eq!(v["config"]["seed"], 3);
    assert_eq!(v["config"]["generator"]["dim_a"], 12);
    let schemes: Vec<&str> = v["results"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["scheme"].as_str().unwrap())
        .collect();
    assert_eq!(schemes, ["uni-a", "joint", "cross-b"]);
}

#[test]
fn denoise_on_external_images() {
    let f = fixture();
    let imgs = f.root.join("imgs.msc");
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let data: Vec<f64> = (0..64 * 40)
        .map(|i| 0.5 + 0.3 * ((i % 8) as f64 / 8.0) + 0.05 * rand::Rng::random::<f64>(&mut rng))
        .collect();
    save_matrix(&Matrix::from_col_major(64, 40, data).unwrap(), &imgs).unwrap();
    let cfg = f.root.join("d.json");
    std::fs::write(
        &cfg,
        r#"{"train_images": 30, "test_images": 10, "num_atoms": 20, "epochs": 1,
            "train_patches": 90, "validation_patches": 20, "repetitions": 1,
            "lambda_cross_scales": [0.25, 1.0]}"#,
    )
    .unwrap();
    let out = f.root.join("dn");
    let r = msc(&[
        "denoise",
        "--config",
        p(&cfg),
        "--modality",
        &modality("images", &imgs),
        "--sigma",
        "0.01",
        "--out",
        p(&out),
    ]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 1);
    assert!(out.join("report.txt").exists());
    let r = msc(&["denoise", "--modality", &modality("clean", &imgs), "--out", p(&out)]);
    assert_eq!(code(&r), 2);
}
