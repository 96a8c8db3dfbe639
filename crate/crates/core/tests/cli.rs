//! Command-line contract: exit codes, outputs, round trips and determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use circlekit::json::{
    self, DecompositionReportJson, FiniteKernelJson, FormDecompositionJson, KernelGramJson, MeasureJson,
};
use circlekit::kernel::KernelGram;
use circlekit::forms::FormDecomposition;
use circlekit::kernelpair::FiniteKernel;
use circlekit::measure::CircleMeasure;
use serde_json::Value;
use tempfile::TempDir;

const LEBESGUE: &str = r#"{"density": {"coeffs": [{"j": 0, "re": 1.0, "im": 0.0}], "real": true}, "atoms": []}"#;
const TWICE_LEBESGUE: &str = r#"{"density": {"coeffs": [{"j": 0, "re": 2.0, "im": 0.0}], "real": true}, "atoms": []}"#;
const MIXED: &str = r#"{"density": {"coeffs": [{"j": 0, "re": 0.5, "im": 0.0}], "real": true},
                       "atoms": [{"angle": 1.5707963267948966, "weight": 0.7}]}"#;

struct Work {
    dir: TempDir,
}

impl Work {
    fn new() -> Self {
        Work { dir: tempfile::tempdir().unwrap() }
    }

    fn file(&self, name: &str, body: &str) -> PathBuf {
        let p = self.dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn circlekit(args: &[&str], seed: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_circlekit"));
    cmd.args(args).env_remove("CIRCLEKIT_SEED");
    if let Some(s) = seed {
        cmd.env("CIRCLEKIT_SEED", s);
    }
    cmd.output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Parses, rebuilds through the domain type and re-emits.
fn reemit<D, T>(text: &str) -> String
where
    D: serde::Serialize + serde::de::DeserializeOwned + for<'a> From<&'a T>,
    T: for<'a> TryFrom<&'a D, Error = circlekit::error::Error>,
{
    let dto: D = serde_json::from_str(text).unwrap();
    let value = T::try_from(&dto).unwrap();
    json::to_string(&D::from(&value)).unwrap() + "\n"
}

#[test]
fn decompose_writes_a_report() {
    let w = Work::new();
    let (mu, lam, out, trace) = (w.file("mu.json", MIXED), w.file("m.json", LEBESGUE), w.path("rep.json"), w.path("t.csv"));
    let o = circlekit(&["decompose", "--mu", s(&mu), "--lambda", s(&lam), "-N", "256", "--out", s(&out), "--trace", s(&trace)], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let rep: DecompositionReportJson = serde_json::from_str(&text).unwrap();
    let ac = CircleMeasure::try_from(&rep.mu_ac).unwrap();
    let sing = CircleMeasure::try_from(&rep.mu_s).unwrap();
    assert!((ac.total_mass() - 0.5).abs() <= 1e-3);
    assert!((sing.total_mass() - 0.7).abs() <= 1e-3);
    assert_eq!(std::fs::read_to_string(&trace).unwrap().lines().count(), 4);
}

#[test]
fn halfcircle_csv_has_matching_coefficients() {
    let w = Work::new();
    let out = w.path("hc.csv");
    let o = circlekit(&["halfcircle", "--order", "16", "--out", s(&out)], None);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("j,moment_re,moment_im,log_re,log_im,discrepancy"));
    let gaps: Vec<f64> = lines.map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(gaps.len(), 17);
    assert!(gaps.iter().all(|&g| g <= 1e-10), "{gaps:?}");
}

#[test]
fn domination_failure_exits_with_a_witness() {
    let w = Work::new();
    let (two, one) = (w.file("twom.json", TWICE_LEBESGUE), w.file("m.json", LEBESGUE));
    let o = circlekit(&["dominate", "--mu", s(&two), "--lambda", s(&one), "-t", "1"], None);
    assert_eq!(o.status.code(), Some(3));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["verdict"], "Violated");
    assert!(v["min_eig"].as_f64().unwrap() < 0.0);
    assert_eq!(v["witness"].as_array().unwrap().len(), v["points"].as_array().unwrap().len());

    let o = circlekit(&["dominate", "--mu", s(&two), "--lambda", s(&one), "-t", "1.5"], None);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(serde_json::from_str::<Value>(&stdout(&o)).unwrap()["verdict"], "Dominated");
}

#[test]
fn usage_and_validation_errors_exit_2() {
    let w = Work::new();
    let (mu, lam) = (w.file("mu.json", MIXED), w.file("m.json", LEBESGUE));
    let bad = w.file("bad.json", r#"{"density": {"samples": [1.0, -1.0], "grid": 2}, "atoms": []}"#);
    let cases: Vec<Vec<&str>> = vec![
        vec![],
        vec!["frobnicate"],
        vec!["moments", "--mu", s(&mu)],
        vec!["decompose", "--mu", s(&mu), "--lambda", s(&lam), "-N", "100"],
        vec!["moments", "--mu", s(&bad), "-N", "4"],
        vec!["moments", "--mu", "/nonexistent/mu.json", "-N", "4"],
        vec!["herglotz", "--mu", s(&mu), "--z", "1.5,0"],
        vec!["kernel", "--mu", s(&mu), "-N", "4", "--points", "8"],
    ];
    for args in cases {
        let o = circlekit(&args, None);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!o.stderr.is_empty(), "{args:?}");
    }
    assert_eq!(circlekit(&["--help"], None).status.code(), Some(0));
    let o = circlekit(&["kernel", "--mu", s(&mu), "--points", "4"], Some("not-a-seed"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn emitted_json_reloads_to_the_same_bytes() {
    let w = Work::new();
    let (mu, lam) = (w.file("mu.json", MIXED), w.file("m.json", LEBESGUE));

    let b = w.file("b.json", r#"{"rational": {"num": [{"re": 0.0, "im": 0.0}, {"re": 0.5, "im": 0.0}], "den": [{"re": 1.0, "im": 0.0}]}}"#);
    let o = circlekit(&["clark", "--b", s(&b), "--grid", "512"], None);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(reemit::<MeasureJson, CircleMeasure>(&text), text);

    for args in [vec!["-N", "6"], vec!["--points", "6"]] {
        let mut full = vec!["kernel", "--mu", s(&mu)];
        full.extend(args);
        let text = stdout(&circlekit(&full, None));
        assert_eq!(reemit::<KernelGramJson, KernelGram>(&text), text);
    }

    let o = circlekit(&["forms", "--mu", s(&mu), "--lambda", s(&lam), "-N", "8"], None);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(reemit::<FormDecompositionJson, FormDecomposition>(&text), text);

    let k = w.file("k.json", r#"{"n": 2, "entries": [[{"re": 2.0, "im": 0.0}, {"re": 1.0, "im": 0.0}], [{"re": 1.0, "im": 0.0}, {"re": 1.0, "im": 0.0}]]}"#);
    let big = w.file("bigk.json", r#"{"n": 2, "entries": [[{"re": 1.0, "im": 0.0}, {"re": 0.0, "im": 0.0}], [{"re": 0.0, "im": 0.0}, {"re": 0.0, "im": 0.0}]]}"#);
    let o = circlekit(&["kernelpair", "--k", s(&k), "--big-k", s(&big)], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    for part in ["k_ac", "k_s"] {
        let text = json::to_string(&v[part]).unwrap();
        assert_eq!(reemit::<FiniteKernelJson, FiniteKernel>(&text), text + "\n");
    }

    let out = w.path("rep.json");
    assert_eq!(circlekit(&["decompose", "--mu", s(&mu), "--lambda", s(&lam), "-N", "128", "--out", s(&out)], None).status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut rep: DecompositionReportJson = serde_json::from_str(&text).unwrap();
    rep.mu_ac = MeasureJson::from(&CircleMeasure::try_from(&rep.mu_ac).unwrap());
    rep.mu_s = MeasureJson::from(&CircleMeasure::try_from(&rep.mu_s).unwrap());
    assert_eq!(json::to_string(&rep).unwrap() + "\n", text);
}

#[test]
fn runs_are_bit_stable() {
    let w = Work::new();
    let (mu, lam) = (w.file("mu.json", MIXED), w.file("m.json", LEBESGUE));
    let runs = [
        vec!["kernel", "--mu", s(&mu), "--points", "16"],
        vec!["decompose", "--mu", s(&mu), "--lambda", s(&lam), "-N", "128"],
        vec!["szego", "--mu", s(&mu)],
    ];
    for args in runs {
        let first = circlekit(&args, None).stdout;
        assert_eq!(circlekit(&args, None).stdout, first, "{args:?}");
        let mut single = vec!["--threads", "1"];
        single.extend(&args);
        assert_eq!(circlekit(&single, None).stdout, first, "{args:?} on one thread");
    }
}

#[test]
fn seed_variable_moves_the_grid() {
    let w = Work::new();
    let mu = w.file("mu.json", MIXED);
    let args = ["kernel", "--mu", s(&mu), "--points", "5"];
    let default = circlekit(&args, None).stdout;
    assert_eq!(circlekit(&args, Some("0xC1AC")).stdout, default);
    assert_eq!(circlekit(&args, Some("49580")).stdout, default);
    let moved = circlekit(&args, Some("7")).stdout;
    assert_ne!(moved, default);
    assert_eq!(circlekit(&args, Some("7")).stdout, moved);
}
