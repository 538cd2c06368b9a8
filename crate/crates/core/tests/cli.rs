use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cfa::data::{load_repair_csv, read_schema};
use cfa::metrics::{crossing_rank, k_grid};
use cfa::{partition_population, Ranking};
use serde_json::Value;

fn cfa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cfa"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = cfa(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(p: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn sweep_rows(dir: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(dir.join("sweep.csv")).unwrap();
    r.records().map(|row| row.unwrap().iter().map(str::to_string).collect()).collect()
}

const SMALL_SPEC: &str = r#"
features = ["gender", "ethnicity"]
min_score = 0
max_score = 100
seed = 11

[[groups]]
traits = ["0", "0"]
count = 400
mean = 60.0
std_dev = 10.0

[[groups]]
traits = ["0", "2"]
count = 300
mean = 45.0
std_dev = 9.0

[[groups]]
traits = ["1", "2"]
count = 300
mean = 35.0
std_dev = 8.0
"#;

/// {10,20,30} and {40,50,60}, equal weights.
fn two_group_csv(dir: &Path) -> PathBuf {
    let p = dir.join("two.csv");
    fs::write(
        &p,
        "id,group,score\na1,A,10\na2,A,20\na3,A,30\nb1,B,40\nb2,B,50\nb3,B,60\n",
    )
    .unwrap();
    p
}

/// Two groups with separated score ranges, 200 records each.
fn separated_csv(dir: &Path) -> PathBuf {
    let p = dir.join("separated.csv");
    let mut s = String::from("id,group,score\n");
    for i in 0..200 {
        s += &format!("a{i:03},A,{}\n", 20 + (i * 7) % 30);
        s += &format!("b{i:03},B,{}\n", 60 + (i * 11) % 30);
    }
    fs::write(&p, s).unwrap();
    p
}

#[test]
fn generate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    fs::write(&spec, SMALL_SPEC).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        ok(&["generate", "--synthetic-spec", path(&spec), "--seed", "7", "--out", path(out)]);
    }
    for f in ["population.csv", "population_manifest.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
    }
    let manifest = json(a.join("population_manifest.json"));
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["population"], 1000);
    let rows = fs::read_to_string(a.join("population.csv")).unwrap().lines().count();
    assert_eq!(rows, 1001);
}

#[test]
fn generate_default_population() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["generate", "--out", path(dir.path())]);
    let rows = fs::read_to_string(dir.path().join("population.csv")).unwrap().lines().count();
    assert_eq!(rows, 100_001);
}

#[test]
fn invalid_input_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("bad.toml");
    fs::write(&spec, SMALL_SPEC.replace("count = 300", "count = 0")).unwrap();
    let out = cfa(&["generate", "--synthetic-spec", path(&spec), "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("count 0"));

    assert_eq!(cfa(&["repair"]).status.code(), Some(1));
    let input = two_group_csv(dir.path());
    let out = cfa(&["repair", "--input", path(&input), "--theta", "1.5", "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    let out = cfa(&["repair", "--input", path(&input), "--theta-group", "race=A:1", "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(1));

    let broken = dir.path().join("broken.csv");
    fs::write(&broken, "id,group,score\na,A,1\nb,B,abc\n").unwrap();
    let out = cfa(&["repair", "--input", path(&broken), "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn theta_zero_keeps_raw_scores() {
    let dir = tempfile::tempdir().unwrap();
    let input = separated_csv(dir.path());
    let out = dir.path().join("r");
    ok(&["repair", "--input", path(&input), "--theta", "0", "--out", path(&out)]);
    let repaired = out.join("repaired.csv");
    let (records, fair) = load_repair_csv(&repaired, &read_schema(&repaired).unwrap()).unwrap();
    assert!(records.iter().zip(&fair).all(|(r, f)| r.raw_score == *f));

    let eval = dir.path().join("e");
    ok(&["evaluate", "--input", path(&input), "--repaired", path(&repaired), "--out", path(&eval)]);
    let report = json(eval.join("report.json"));
    assert_eq!(report["min_precision"], 1.0);
    assert_eq!(report["min_ndcg"], 1.0);
    assert_eq!(report["individual_fairness_error"], 0.0);
    assert_eq!(report["utility"], 0.0);
}

#[test]
fn full_repair_of_two_groups() {
    let dir = tempfile::tempdir().unwrap();
    let input = two_group_csv(dir.path());
    let out = dir.path().join("r");
    ok(&["repair", "--input", path(&input), "--theta", "1", "--out", path(&out)]);
    let manifest = json(out.join("manifest.json"));
    assert!(manifest["parity_gap"].as_f64().unwrap() <= manifest["grid_resolution"].as_f64().unwrap());
    assert_eq!(manifest["parity_gap"], 0.0);
    assert_eq!(manifest["groups"][0]["weight"], 0.5);
    assert_eq!(manifest["barycenter"]["mean"], 35.0);

    let repaired = out.join("repaired.csv");
    let (_, fair) = load_repair_csv(&repaired, &read_schema(&repaired).unwrap()).unwrap();
    assert_eq!(fair, vec![25.0, 35.0, 45.0, 25.0, 35.0, 45.0]);

    let eval = dir.path().join("e");
    ok(&["evaluate", "--repaired", path(&repaired), "--k-step", "1", "--out", path(&eval)]);
    let report = json(eval.join("report.json"));
    // every displacement within a group is the same constant
    assert_eq!(report["individual_fairness_error"], 0.0);
    assert_eq!(report["utility"], -112.5);
}

#[test]
fn group_override_touches_only_that_group() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    fs::write(&spec, SMALL_SPEC).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["repair", "--synthetic-spec", path(&spec), "--theta", "0.5", "--out", path(&a)]);
    ok(&[
        "repair", "--synthetic-spec", path(&spec), "--theta", "0.5",
        "--theta-group", "gender=1,ethnicity=2:1.0", "--out", path(&b),
    ]);
    let schema = vec!["gender".to_string(), "ethnicity".to_string()];
    let (ra, fa) = load_repair_csv(&a.join("repaired.csv"), &schema).unwrap();
    let (_, fb) = load_repair_csv(&b.join("repaired.csv"), &schema).unwrap();
    let mut changed = 0;
    for (r, (x, y)) in ra.iter().zip(fa.iter().zip(&fb)) {
        if r.traits == ["1", "2"] {
            changed += usize::from(x != y);
        } else {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
    assert!(changed > 0);
    let manifest = json(b.join("manifest.json"));
    let thetas: Vec<f64> = manifest["groups"].as_array().unwrap().iter().map(|g| g["theta"].as_f64().unwrap()).collect();
    assert_eq!(thetas, vec![0.5, 0.5, 1.0]);
}

#[test]
fn crossing_ranks_in_report_match_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    fs::write(&spec, SMALL_SPEC).unwrap();
    let out = dir.path().join("r");
    ok(&["repair", "--synthetic-spec", path(&spec), "--theta", "0.5", "--out", path(&out)]);
    let repaired = out.join("repaired.csv");
    ok(&["evaluate", "--repaired", path(&repaired), "--k-step", "50", "--out", path(&out)]);
    let report = json(out.join("report.json"));

    let schema = read_schema(&repaired).unwrap();
    let (records, fair) = load_repair_csv(&repaired, &schema).unwrap();
    let partition = partition_population(&records, &schema).unwrap();
    let ids: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
    let ranking = Ranking::from_scores(&ids, &fair).unwrap();
    let ks = k_grid(records.len(), 50);
    for g in 0..partition.num_groups() {
        let expected = crossing_rank(&ranking, &partition, g, 0.8, &ks).unwrap();
        let got = report["groups"][g]["crossing_rank"].as_u64().map(|k| k as usize);
        assert_eq!(got, expected);
    }
    let header = fs::read_to_string(out.join("metrics_k.csv")).unwrap();
    let header = header.lines().next().unwrap();
    assert!(header.starts_with("k,precision,ndcg,share:gender=0/ethnicity=0"));
}

#[test]
fn evaluate_rejects_mismatched_files() {
    let dir = tempfile::tempdir().unwrap();
    let input = two_group_csv(dir.path());
    let out = dir.path().join("r");
    ok(&["repair", "--input", path(&input), "--out", path(&out)]);
    let other = dir.path().join("other.csv");
    fs::write(&other, "id,group,score\na1,A,10\na2,A,20\na3,A,30\nb1,B,40\nb2,B,50\nzz,B,60\n").unwrap();
    let res = cfa(&[
        "evaluate", "--input", path(&other), "--repaired", path(&out.join("repaired.csv")),
        "--out", path(&out),
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("id mismatch"));
}

#[test]
fn sweep_table() {
    let dir = tempfile::tempdir().unwrap();
    let input = separated_csv(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["sweep", "--input", path(&input), "--thetas", "0,0.5,1", "--out", path(&a)]);
    ok(&["sweep", "--input", path(&input), "--thetas", "1,0.5,0", "--out", path(&b)]);
    assert_eq!(
        fs::read(a.join("sweep.csv")).unwrap(),
        fs::read(b.join("sweep.csv")).unwrap()
    );
    let rows = sweep_rows(&a);
    assert_eq!(rows.len(), 3);
    let gaps: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
    for t in ["theta_0", "theta_0.5", "theta_1"] {
        for f in ["repaired.csv", "manifest.json", "metrics_k.csv", "report.json"] {
            assert!(a.join(t).join(f).exists(), "{t}/{f}");
        }
    }

    let c = dir.path().join("c");
    ok(&["sweep", "--input", path(&input), "--thetas", "0", "--out", path(&c)]);
    let rows = sweep_rows(&c);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][1], "0");

    let bad = cfa(&["sweep", "--input", path(&input), "--thetas", "0,2", "--out", path(&c)]);
    assert_eq!(bad.status.code(), Some(1));
}
