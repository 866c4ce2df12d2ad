use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn meemi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_meemi"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

fn synth(dir: &Path, seed: u64) -> PathBuf {
    let out = dir.join(format!("synth{seed}"));
    let seed = seed.to_string();
    let run = meemi(&[
        "synth", "--vocab-size", "300", "--dim", "12", "--noise", "0.05", "--seed", &seed, "--out",
        p(&out),
    ]);
    assert!(run.status.success(), "{}", stderr(&run));
    out
}

#[test]
fn synth_writes_all_files() {
    let tmp = TempDir::new().unwrap();
    let s = synth(tmp.path(), 1);
    for f in ["src.vec", "tgt.vec", "gold.tsv", "train.tsv", "test.tsv"] {
        assert!(s.join(f).is_file(), "{f} missing");
    }
    let test = fs::read_to_string(s.join("test.tsv")).unwrap();
    assert_eq!(test.lines().count(), 60);
}

#[test]
fn align_then_meemi_then_eval() {
    let tmp = TempDir::new().unwrap();
    let s = synth(tmp.path(), 2);
    let a = tmp.path().join("aligned");
    let run = meemi(&[
        "align", "--src", p(&s.join("src.vec")), "--tgt", p(&s.join("tgt.vec")), "--dict",
        p(&s.join("train.tsv")), "--out", p(&a),
    ]);
    assert!(run.status.success(), "{}", stderr(&run));
    assert!(a.join("src.map").is_file());

    let m = tmp.path().join("meemi");
    let run = meemi(&[
        "meemi", "--space", &format!("src={}", p(&a.join("src.vec"))), "--space",
        &format!("tgt={}", p(&a.join("tgt.vec"))), "--dict", p(&s.join("train.tsv")), "--out", p(&m),
    ]);
    assert!(run.status.success(), "{}", stderr(&run));
    assert!(m.join("src.map").is_file() && m.join("tgt.map").is_file());

    let report = tmp.path().join("report.json");
    let run = meemi(&[
        "eval", "--task", "dict", "--src", p(&m.join("src.vec")), "--tgt", p(&m.join("tgt.vec")),
        "--dict", p(&s.join("test.tsv")), "--out", p(&report),
    ]);
    assert!(run.status.success(), "{}", stderr(&run));
    let json: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    for key in ["P@1", "P@5", "P@10"] {
        let v = json["metrics"][key].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&v));
    }
    assert_eq!(json["config"]["seed"], 0);
    assert!(json["metadata"]["generated_at_unix"].is_u64());
}

#[test]
fn missing_dictionary_names_the_path() {
    let tmp = TempDir::new().unwrap();
    let s = synth(tmp.path(), 3);
    let missing = tmp.path().join("no-such-dict.tsv");
    let run = meemi(&[
        "align", "--src", p(&s.join("src.vec")), "--tgt", p(&s.join("tgt.vec")), "--dict",
        p(&missing), "--out", p(&tmp.path().join("o")),
    ]);
    assert_eq!(run.status.code(), Some(2));
    assert!(stderr(&run).contains("no-such-dict.tsv"));
}

#[test]
fn oversized_train_size_fails() {
    let tmp = TempDir::new().unwrap();
    let s = synth(tmp.path(), 4);
    let run = meemi(&[
        "align", "--src", p(&s.join("src.vec")), "--tgt", p(&s.join("tgt.vec")), "--dict",
        p(&s.join("train.tsv")), "--train-size", "8000", "--out", p(&tmp.path().join("o")),
    ]);
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn three_language_meemi_writes_hub_map() {
    let tmp = TempDir::new().unwrap();
    let s1 = synth(tmp.path(), 5);
    let s2 = synth(tmp.path(), 6);
    let out = tmp.path().join("multi");
    let run = meemi(&[
        "meemi",
        "--space", &format!("en={}", p(&s1.join("tgt.vec"))),
        "--space", &format!("de={}", p(&s1.join("src.vec"))),
        "--space", &format!("it={}", p(&s2.join("src.vec"))),
        "--dict", &format!("de={}", p(&s1.join("gold.tsv"))),
        "--dict", &format!("it={}", p(&s2.join("gold.tsv"))),
        "--hub", "en", "--align", "--out", p(&out),
    ]);
    assert!(run.status.success(), "{}", stderr(&run));
    for lang in ["en", "de", "it"] {
        assert!(out.join(format!("{lang}.map")).is_file(), "{lang}.map missing");
    }
}

#[test]
fn weighted_with_three_languages_is_usage_error() {
    let run = meemi(&[
        "meemi", "--space", "a=x", "--space", "b=y", "--space", "c=z", "--dict", "d", "--hub", "a",
        "--weighted", "--out", "o",
    ]);
    assert_eq!(run.status.code(), Some(1));
}

#[test]
fn weighted_bilingual_run() {
    let tmp = TempDir::new().unwrap();
    let s = synth(tmp.path(), 7);
    let freq = tmp.path().join("freq.tsv");
    let counts: String = (0..300).map(|i| format!("w{i}\t{}\n", 1000 - i)).collect();
    fs::write(&freq, counts).unwrap();
    let out = tmp.path().join("w");
    let run = meemi(&[
        "meemi", "--space", &format!("src={}", p(&s.join("src.vec"))), "--space",
        &format!("tgt={}", p(&s.join("tgt.vec"))), "--dict", p(&s.join("train.tsv")), "--align",
        "--weighted", "--freq", &format!("src={}", p(&freq)), "--freq", &format!("tgt={}", p(&freq)),
        "--out", p(&out),
    ]);
    assert!(run.status.success(), "{}", stderr(&run));
}

#[test]
fn similarity_all_oov_fails_with_coverage() {
    let tmp = TempDir::new().unwrap();
    let s = synth(tmp.path(), 8);
    let data = tmp.path().join("sim.tsv");
    fs::write(&data, "foo\tbar\t3.0\nbaz\tqux\t1.0\n").unwrap();
    let run = meemi(&["eval", "--task", "sim", "--src", p(&s.join("src.vec")), "--dataset", p(&data)]);
    assert_eq!(run.status.code(), Some(2));
    assert!(stderr(&run).contains("2 skipped"), "{}", stderr(&run));
}

#[test]
fn similarity_report() {
    let tmp = TempDir::new().unwrap();
    let s = synth(tmp.path(), 9);
    let data = tmp.path().join("sim.tsv");
    fs::write(&data, "w1\tw1\t10\nw1\tw2\t2\nw3\tw4\t1\nw5\tnope\t4\n").unwrap();
    let run = meemi(&[
        "eval", "--task", "sim", "--src", p(&s.join("src.vec")), "--dataset", p(&data), "--format", "json",
    ]);
    assert!(run.status.success(), "{}", stderr(&run));
    let json: Value = serde_json::from_str(&stdout(&run)).unwrap();
    assert_eq!(json["coverage"]["evaluated"], 3);
    assert_eq!(json["coverage"]["skipped_oov"], 1);
    assert!(json["metrics"]["spearman_rho"].is_f64());
}

#[test]
fn hypernym_default_k_is_echoed() {
    let tmp = TempDir::new().unwrap();
    let s = synth(tmp.path(), 10);
    let train = tmp.path().join("train.tsv");
    let test = tmp.path().join("test.tsv");
    let lines: String = (0..100).map(|i| format!("w{i}\tw{}\tw{}\n", 200 + i % 7, 250 + i % 3)).collect();
    fs::write(&train, lines).unwrap();
    fs::write(&test, "w150\tw201\tw251\nw151\tw202\n").unwrap();
    let run = meemi(&[
        "eval", "--task", "hyper", "--src", p(&s.join("src.vec")), "--train", p(&train), "--test",
        p(&test), "--format", "json",
    ]);
    assert!(run.status.success(), "{}", stderr(&run));
    let json: Value = serde_json::from_str(&stdout(&run)).unwrap();
    assert_eq!(json["config"]["k"], 15);
    for key in ["MRR", "MAP", "P@5"] {
        assert!(json["metrics"][key].is_f64(), "{key} missing");
    }
}

#[test]
fn translate_prints_k_lines_and_rejects_oov() {
    let tmp = TempDir::new().unwrap();
    let s = synth(tmp.path(), 11);
    let a = tmp.path().join("a");
    let run = meemi(&[
        "align", "--src", p(&s.join("src.vec")), "--tgt", p(&s.join("tgt.vec")), "--dict",
        p(&s.join("gold.tsv")), "--out", p(&a),
    ]);
    assert!(run.status.success(), "{}", stderr(&run));
    let run = meemi(&["translate", "w42", "--src", p(&a.join("src.vec")), "--tgt", p(&a.join("tgt.vec")), "--k", "5"]);
    assert!(run.status.success(), "{}", stderr(&run));
    let text = stdout(&run);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    let first: Vec<&str> = lines[0].split_whitespace().collect();
    assert_eq!(first[..2], ["1", "w42"]);
    assert!(first[2].parse::<f64>().is_ok());

    let run = meemi(&["translate", "zzz", "--src", p(&a.join("src.vec")), "--tgt", p(&a.join("tgt.vec"))]);
    assert!(!run.status.success());
    assert!(stderr(&run).contains("OOV"));
}

#[test]
fn ablate_writes_csv_and_json() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("abl");
    let run = meemi(&[
        "ablate", "--vocab-size", "400", "--dim", "10", "--noise", "0.1", "--sizes", "50,200",
        "--trials", "2", "--out", p(&out),
    ]);
    assert!(run.status.success(), "{}", stderr(&run));
    let csv = fs::read_to_string(out.join("ablation.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("size,seed,metric,base,meemi,delta"));
    assert_eq!(csv.lines().count(), 5);
    let json: Value = serde_json::from_str(&fs::read_to_string(out.join("ablation.json")).unwrap()).unwrap();
    assert_eq!(json["summary"].as_array().unwrap().len(), 2);
}

#[test]
fn reports_are_reproducible() {
    let run_once = |dir: &Path| {
        let s = synth(dir, 12);
        let report = dir.join("r.json");
        let run = meemi(&[
            "eval", "--task", "dict", "--src", p(&s.join("src.vec")), "--tgt", p(&s.join("tgt.vec")),
            "--dict", p(&s.join("test.tsv")), "--seed", "12", "--out", p(&report),
        ]);
        assert!(run.status.success(), "{}", stderr(&run));
        let mut json: Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
        json.as_object_mut().unwrap().remove("metadata");
        serde_json::to_string(&json).unwrap()
    };
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    assert_eq!(run_once(a.path()), run_once(b.path()));
}

#[test]
fn help_and_unknown_flags() {
    for sub in ["align", "meemi", "eval", "translate", "synth", "ablate"] {
        let run = meemi(&[sub, "--help"]);
        assert_eq!(run.status.code(), Some(0), "{sub} --help");
        let run = meemi(&[sub, "--no-such-flag"]);
        assert_eq!(run.status.code(), Some(1), "{sub} accepted an unknown flag");
    }
}
