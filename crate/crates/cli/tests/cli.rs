use std::path::Path;
use std::process::{Command, Output};

use gcm_core::pipeline::commands::verify_manifest;
use gcm_core::pipeline::RunManifest;

const MODEL: [&str; 6] = ["--A", "-1", "--B", "1.09", "--kappa", "0.01"];

fn gcm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gcm")).current_dir(dir).args(args).output().expect("gcm runs")
}

fn with_model<'a>(args: &[&'a str]) -> Vec<&'a str> {
    let mut v: Vec<&str> = args.to_vec();
    v.extend(MODEL);
    v
}

#[test]
fn invalid_scheme_is_usage_error() {
    let d = tempfile::tempdir().unwrap();
    let out = gcm(d.path(), &with_model(&["spectrum", "--scheme", "3d"]));
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(gcm(d.path(), &["no-such-command"]).status.code(), Some(2));
    assert_eq!(gcm(d.path(), &["spectrum"]).status.code(), Some(2));
}

#[test]
fn warm_cache_skips_eigensolve() {
    let d = tempfile::tempdir().unwrap();
    let args = with_model(&["spectrum", "--scheme", "2d-even,5d", "--dimension", "200", "--out", "o"]);
    assert!(gcm(d.path(), &args).status.success());
    let cold = RunManifest::load(&d.path().join("o/manifest-spectrum.json")).unwrap();
    let first = std::fs::read(d.path().join("o/spectrum_5d.csv")).unwrap();
    assert_eq!(cold.cache_hits(), 0);
    assert!(gcm(d.path(), &args).status.success());
    let warm = RunManifest::load(&d.path().join("o/manifest-spectrum.json")).unwrap();
    assert_eq!(warm.cache_hits(), 2);
    assert_eq!(warm.config_hash, cold.config_hash);
    assert_eq!(std::fs::read(d.path().join("o/spectrum_5d.csv")).unwrap(), first);
    assert!(verify_manifest(&warm, &d.path().join("o")).unwrap().is_empty());
}

#[test]
fn every_output_carries_header_and_is_listed() {
    let d = tempfile::tempdir().unwrap();
    let args = with_model(&["spectrum", "--scheme", "2d-odd", "--dimension", "150", "--out", "o", "--cache", "off"]);
    assert!(gcm(d.path(), &args).status.success());
    let m = RunManifest::load(&d.path().join("o/manifest-spectrum.json")).unwrap();
    assert_eq!(m.outputs.len(), 1);
    let text = std::fs::read_to_string(d.path().join("o").join(&m.outputs[0].path)).unwrap();
    assert!(text.starts_with("# tool = gcm "));
    assert!(text.contains(&format!("# config_hash = {}", m.config_hash)));
    assert!(!d.path().join("gcm-cache").exists());
}

#[test]
fn external_level_list() {
    let d = tempfile::tempdir().unwrap();
    // Poisson-like levels: cumulative sums of a deterministic pseudo-random sequence
    let mut e = 0.0;
    let mut x: u64 = 12345;
    let mut text = String::new();
    for _ in 0..600 {
        x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let u = ((x >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
        e -= u.ln();
        text.push_str(&format!("{e}\n"));
    }
    std::fs::write(d.path().join("levels.txt"), text).unwrap();
    let out = gcm(
        d.path(),
        &with_model(&["brody", "--input", "levels.txt", "--bin-size", "200", "--shift", "100", "--error-trials", "20", "--out", "o"]),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(d.path().join("o/brody_levels.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 5);
    for r in rows {
        let f: Vec<&str> = r.split(',').collect();
        let omega: f64 = f[1].parse().unwrap();
        let adj: f64 = f[6].parse().unwrap();
        assert!((omega + adj - 1.0).abs() < 1e-12);
        assert!(omega.abs() < 0.35, "{omega}");
    }
}

#[test]
fn compare_joins_and_rejects_disjoint() {
    let d = tempfile::tempdir().unwrap();
    let brody = "# x\ncentroid_energy,omega,stat_err,bin_start,bin_size,flags,one_minus_omega\n\
                 0.0,0.2,0.1,0,10,ok,0.8\n1.0,0.5,0.1,5,10,ok,0.5\n2.0,0.9,0.1,10,10,ok,0.1\n";
    let freg = "# x\nB,E,f_reg,sigma,n_regular,n_chaotic,n_undecided\n1,0.1,0.9,0.01,9,1,0\n1,1.1,0.4,0.01,4,6,0\n1,1.9,0.05,0.01,0,10,0\n1,7,0.5,0.01,5,5,0\n";
    let far = "# x\nB,E,f_reg,sigma,n_regular,n_chaotic,n_undecided\n1,10,0.9,0.01,9,1,0\n";
    std::fs::write(d.path().join("b.csv"), brody).unwrap();
    std::fs::write(d.path().join("f.csv"), freg).unwrap();
    std::fs::write(d.path().join("far.csv"), far).unwrap();
    let out = gcm(d.path(), &with_model(&["compare", "b.csv", "f.csv", "--out", "o"]));
    assert!(out.status.success());
    let joined = std::fs::read_to_string(d.path().join("o/compare.csv")).unwrap();
    assert_eq!(joined.lines().filter(|l| !l.starts_with('#')).count(), 4);
    assert!(joined.contains("# pearson = 0.9"));
    assert_eq!(gcm(d.path(), &with_model(&["compare", "b.csv", "far.csv", "--out", "o"])).status.code(), Some(1));
}

#[test]
fn classical_integrable_limit_is_regular() {
    let d = tempfile::tempdir().unwrap();
    let out = gcm(
        d.path(),
        &["classical", "--A", "-1", "--B", "0", "--kappa", "0.01", "--energies", "0.5", "--count", "6", "--t-max", "200", "--out", "o"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(d.path().join("o/freg_B0.0.csv")).unwrap();
    let row = csv.lines().last().unwrap();
    assert!(row.starts_with("0.0,0.5,1.0,"), "{row}");
}

#[test]
fn config_file_with_overrides() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(
        d.path().join("run.toml"),
        "[model]\nA = -1.0\nB = 1.09\nkappa = 0.01\n[stats]\nbias_omegas = [0.5]\nbias_trials = 4\nbin_size = 100\n",
    )
    .unwrap();
    let args = ["bias-study", "--config", "run.toml", "--bias-trials", "6", "--seed", "3", "--out", "o"];
    assert!(gcm(d.path(), &args).status.success());
    let m = RunManifest::load(&d.path().join("o/manifest-bias-study.json")).unwrap();
    assert_eq!(m.config.stats.bias_trials, 6);
    assert_eq!(m.config.stats.seed, 3);
    let first = std::fs::read(d.path().join("o/bias_study.csv")).unwrap();
    assert!(gcm(d.path(), &args).status.success());
    assert_eq!(std::fs::read(d.path().join("o/bias_study.csv")).unwrap(), first);
    assert_eq!(gcm(d.path(), &["bias-study", "--config", "missing.toml"]).status.code(), Some(2));
}
