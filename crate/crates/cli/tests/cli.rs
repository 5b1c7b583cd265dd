use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use deptopo_core::io::{read_measures, read_trees, MeasureRow};
use deptopo_core::samplers::sample_pa_tree;
use deptopo_core::seed::stream;
use deptopo_core::tree::DirectedTree;
use serde_json::Value;

fn deptopo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deptopo")).args(args).env_remove("DEPTOPO_OUT").output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = deptopo(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

/// One sentence per tree, with a final punctuation token under the root and
/// the occasional multiword range line.
fn conllu(trees: &[DirectedTree]) -> String {
    let mut s = String::new();
    for (k, tree) in trees.iter().enumerate() {
        let _ = writeln!(s, "# sent_id = {k}");
        for v in 0..tree.n() {
            if k % 7 == 0 && v == 1 {
                let _ = writeln!(s, "2-3\tdelta\t_\t_\t_\t_\t_\t_\t_\t_");
            }
            let head = tree.parent(v).map_or(0, |p| p + 1);
            let _ = writeln!(s, "{}\tw{v}\tw\tNOUN\t_\t_\t{head}\tdep\t_\t_", v + 1);
        }
        let _ = writeln!(s, "{}\t.\t.\tPUNCT\t_\t_\t{}\tpunct\t_\t_", tree.n() + 1, tree.root() + 1);
        s.push('\n');
    }
    s
}

fn language_trees(language: &str, count: usize) -> Vec<DirectedTree> {
    (0..count)
        .map(|i| {
            let mut rng = stream(7, "fixture", language, i as u64);
            sample_pa_tree(4 + (i * 5) % 23, 0.4, &mut rng).unwrap()
        })
        .collect()
}

/// Writes a corpus of `languages` and returns the manifest path.
fn fixture(dir: &Path, languages: &[(&str, usize)]) -> PathBuf {
    let mut manifest = String::from("# fixture corpus\n");
    for (language, count) in languages {
        let file = format!("{language}.conllu");
        fs::write(dir.join(&file), conllu(&language_trees(language, *count))).unwrap();
        let _ = writeln!(manifest, "{language}\t{file}");
    }
    let path = dir.join("manifest.txt");
    fs::write(&path, manifest).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn measures(path: &Path) -> Vec<MeasureRow> {
    read_measures(fs::File::open(path).unwrap()).unwrap()
}

fn summary(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("run_summary.json")).unwrap()).unwrap()
}

fn data_lines(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().filter(|l| !l.starts_with('#')).count() - 1
}

#[test]
fn extrema_table_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    ok(&["extrema", "--n-max", "50", "--out", s(&out)]);
    let text = fs::read_to_string(out.join("extrema.csv")).unwrap();
    assert!(text.starts_with("# deptopo extrema"));
    assert_eq!(data_lines(&out.join("extrema.csv")), 49);
    let row10 = text.lines().find(|l| l.starts_with("10,")).unwrap();
    let max_h_ks: f64 = row10.split(',').nth(2).unwrap().parse().unwrap();
    assert!((max_h_ks - 1.584963).abs() < 1e-6);

    ok(&["extrema", "--n-max", "50", "--out", s(&out)]);
    assert_eq!(fs::read_to_string(out.join("extrema.csv")).unwrap(), text);
}

#[test]
fn measure_fixture_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = fixture(dir.path(), &[("Fixture", 60)]);
    let out = dir.path().join("out");
    ok(&["measure", "--manifest", s(&manifest), "--out", s(&out)]);
    let rows = measures(&out.join("real_measures.csv"));
    assert_eq!(rows.len(), 60);
    for r in &rows {
        assert!((0.0..=1.0).contains(&r.norm_h_ks) && (0.0..=1.0).contains(&r.norm_h_deg), "{r:?}");
    }
    // the trailing punctuation token is dropped, so sizes match the source trees
    let expected = language_trees("Fixture", 60);
    for r in &rows {
        assert_eq!(r.n, expected[r.sentence_index].n());
    }
    let trees = read_trees(fs::File::open(out.join("real_trees.csv")).unwrap()).unwrap();
    assert_eq!(trees[0].tree, expected[trees[0].sentence_index]);
    assert_eq!(summary(&out)["measure"]["status"], "ok");
    assert!(out.join("extrema.csv").exists());
}

#[test]
fn cap_limits_rows_per_language() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = fixture(dir.path(), &[("Big", 130)]);
    let out = dir.path().join("out");
    ok(&["measure", "--manifest", s(&manifest), "--out", s(&out), "--cap", "80"]);
    assert_eq!(measures(&out.join("real_measures.csv")).len(), 80);
}

#[test]
fn full_pipeline_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = fixture(dir.path(), &[("Alpha", 70), ("Beta", 55)]);
    let config = dir.path().join("run.conf");
    fs::write(&config, "# small run\nepochs = 3\npopulation = 20\nreps = 5\nalpha_grid = 0.25,0.75\n").unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        ok(&["all", "--sweep", "--manifest", s(&manifest), "--config", s(&config), "--epochs", "6", "--out", s(&out)]);
        out
    };
    let (a, b) = (run("a"), run("b"));

    let files = [
        "extrema.csv",
        "real_measures.csv",
        "real_trees.csv",
        "uniform_measures.csv",
        "uniform_trees.csv",
        "optimized_measures.csv",
        "optimized_trees.csv",
        "trajectory.csv",
        "pa_measures.csv",
        "pa_trees.csv",
        "pa_sweep.csv",
        "comparisons.csv",
        "classifiers.csv",
        "paired_t.csv",
        "means.csv",
        "reports/Alpha.uniform.txt",
    ];
    for f in files {
        let text = fs::read(a.join(f)).unwrap();
        assert_eq!(text, fs::read(b.join(f)).unwrap(), "{f} differs between runs");
        assert!(text.starts_with(b"# deptopo"), "{f} lacks a schema line");
    }

    let real = measures(&a.join("real_measures.csv"));
    assert_eq!(real.len(), 125);
    assert_eq!(measures(&a.join("uniform_measures.csv")).len(), 125);
    assert_eq!(measures(&a.join("pa_measures.csv")).len(), 125);
    // at most `population` trees per language go through the optimizer
    assert_eq!(measures(&a.join("optimized_measures.csv")).len(), 40);
    // the flag beats the config file: 6 epochs, one row each, per language
    assert_eq!(data_lines(&a.join("trajectory.csv")), 12);
    // one row per language for the estimate plus one per grid value
    assert_eq!(data_lines(&a.join("pa_sweep.csv")), 6);
    assert_eq!(data_lines(&a.join("classifiers.csv")), 6);

    let summary = summary(&a);
    assert_eq!(summary["config"]["epochs"], 6);
    assert_eq!(summary["config"]["population"], 20);
    for stage in ["measure", "baseline", "optimize", "pa", "compare"] {
        assert_eq!(summary[stage]["status"], "ok", "{stage}: {}", summary[stage]);
    }
    let report = fs::read_to_string(a.join("reports/Beta.pa.txt")).unwrap();
    assert!(report.contains("kld_vs_real=") && report.contains("zero_baseline="));
}

#[test]
fn alpha_override_applies_to_every_language() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = fixture(dir.path(), &[("Alpha", 55), ("Beta", 55)]);
    let out = dir.path().join("out");
    ok(&["measure", "--manifest", s(&manifest), "--out", s(&out)]);
    ok(&["pa", "--out", s(&out), "--alpha-override", "0.5"]);
    let alpha = &summary(&out)["pa"]["alpha"];
    assert_eq!(alpha["Alpha"], 0.5);
    assert_eq!(alpha["Beta"], 0.5);
    ok(&["pa", "--out", s(&out)]);
    assert_ne!(summary(&out)["pa"]["alpha"]["Alpha"], 0.5);
}

#[test]
fn bad_language_does_not_stop_the_others() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = fixture(dir.path(), &[("Good", 60), ("Small", 20)]);
    let mut text = fs::read_to_string(&manifest).unwrap();
    text.push_str("Missing\tnot-there.conllu\n");
    fs::write(&manifest, text).unwrap();
    let out = dir.path().join("out");
    ok(&["measure", "--manifest", s(&manifest), "--out", s(&out)]);
    assert_eq!(measures(&out.join("real_measures.csv")).len(), 60);
    let summary = summary(&out);
    assert_eq!(summary["measure"]["status"], "partial");
    let failed: Vec<&str> =
        summary["measure"]["failures"].as_array().unwrap().iter().map(|f| f["language"].as_str().unwrap()).collect();
    assert_eq!(failed, ["Missing", "Small"]);
}

#[test]
fn errors_are_reported_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let result = deptopo(&["measure", "--out", s(&out)]);
    assert!(!result.status.success());
    let report: Value = serde_json::from_slice(&result.stderr).expect("json on stderr");
    assert_eq!(report["status"], "error");
    assert_eq!(report["stage"], "measure");

    let result = deptopo(&["baseline", "--out", s(&out), "--rho", "1.5"]);
    assert!(!result.status.success());
    let report: Value = serde_json::from_slice(&result.stderr).unwrap();
    assert!(report["message"].as_str().unwrap().contains("rho"), "{report}");
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("env-out");
    let status = Command::new(env!("CARGO_BIN_EXE_deptopo"))
        .args(["extrema", "--n-max", "10"])
        .env("DEPTOPO_OUT", &out)
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(data_lines(&out.join("extrema.csv")), 9);
}
