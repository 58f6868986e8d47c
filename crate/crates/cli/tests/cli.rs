use std::path::Path;
use std::process::{Command, Output};
use std::sync::Arc;

use minimax_support::distributions::DegreesOfFreedom;
use minimax_support::family::{FoldedNctFamily, Member, SamplingFamily};
use minimax_support::quadrature::QuadratureSpec;
use minimax_support::support::support;
use minimax_support::universal::nmwl_density;
use serde_json::Value;

fn msupport(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_msupport"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("valid JSON on stdout")
}

/// Rows of a CSV as maps from column name to cell.
fn csv_rows(text: &str) -> Vec<std::collections::HashMap<String, String>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().unwrap().clone();
    r.records()
        .map(|rec| header.iter().map(String::from).zip(rec.unwrap().iter().map(String::from)).collect())
        .collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn support_row_matches_library() {
    let o = msupport(&["support", "--df", "117", "--t", "3.0", "--method", "nmwl", "--n-eff", "119"]);
    assert_eq!(o.status.code(), Some(0));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 1);

    let fam: Arc<dyn SamplingFamily> = Arc::new(FoldedNctFamily::new(DegreesOfFreedom::new(117.0).unwrap()));
    let q = QuadratureSpec::default().with_t_max(20.0);
    let g = nmwl_density(fam.clone(), 0.0, 119, &q).unwrap();
    let want = support(&g, &Member::null(fam), 3.0).unwrap().finite().unwrap();
    assert!((num(&rows[0]["support_nats"]) - want).abs() <= 1e-9);
    // metadata goes to stderr when the CSV goes to stdout
    let meta: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(meta["tool"], "msupport");
    assert_eq!(meta["config"]["n_eff"], 119);
}

#[test]
fn support_at_null_mode_is_not_positive() {
    let o = msupport(&["support", "--df", "117", "--t", "0"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(num(&csv_rows(&stdout(&o))[0]["support_nats"]) <= 0.0);
}

#[test]
fn bits_are_nats_over_ln_two() {
    let nats = msupport(&["support", "--df", "17", "--t", "2.5"]);
    let bits = msupport(&["support", "--df", "17", "--t", "2.5", "--units", "bits"]);
    let n = num(&csv_rows(&stdout(&nats))[0]["support_nats"]);
    let b = num(&csv_rows(&stdout(&bits))[0]["support_bits"]);
    assert!((b - n / 2f64.ln()).abs() <= 1e-12);
}

#[test]
fn statistic_outside_space_is_a_partial_failure() {
    let o = msupport(&["support", "--df", "17", "--t", "1,-1"]);
    assert_eq!(o.status.code(), Some(2));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows[1]["support_nats"], "NA");
    assert!(rows[1]["flags"].starts_with("error"));
}

#[test]
fn malformed_input_names_row_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("stats.csv");
    std::fs::write(&p, "feature_id,t\na,1.0\nb,oops\n").unwrap();
    let o = msupport(&["support", "--df", "17", "--input", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("row 3") && err.contains("`t`"), "{err}");
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[support]\ndf = 17\nunits = \"bits\"\n").unwrap();
    let c = cfg.to_str().unwrap();
    let from_file = msupport(&["--config", c, "support", "--t", "2"]);
    assert!(stdout(&from_file).contains("support_bits"));
    let flagged = msupport(&["--config", c, "support", "--t", "2", "--units", "nats"]);
    assert!(stdout(&flagged).contains("support_nats"));
    std::fs::write(&cfg, "[support]\nunknown-key = 1\n").unwrap();
    assert_eq!(msupport(&["--config", c, "support", "--t", "2"]).status.code(), Some(1));
}

fn synth(dir: &Path) -> String {
    let table = dir.join("table.csv");
    let o = msupport(&["synth", "--seed", "3", "-o", table.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.join("table.csv.meta.json").exists());
    table.to_str().unwrap().to_string()
}

#[test]
fn case_study_writes_twenty_rows_and_figure() {
    let dir = tempfile::tempdir().unwrap();
    let table = synth(dir.path());
    let out = dir.path().join("out");
    let o = msupport(&[
        "case-study", "--input", &table, "--cancer-group", "cancer-A", "--out-dir", out.to_str().unwrap(), "--svg",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&std::fs::read_to_string(out.join("results.csv")).unwrap());
    assert_eq!(rows.len(), 20);
    assert!(rows.iter().all(|r| r["schema_version"] == "1"));
    let meta: Value = serde_json::from_str(&std::fs::read_to_string(out.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["metadata"]["config"]["cancer_group"], "cancer-A");
    assert_eq!(meta["run"]["features_in"], 20);
    let svg = std::fs::read_to_string(out.join("figure.svg")).unwrap();
    assert_eq!(svg.matches("<circle").count(), 21);
    assert!(svg.contains("S* = 5"));
}

#[test]
fn case_study_input_errors_are_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let table = synth(dir.path());
    let missing = dir.path().join("no-such-labels.csv");
    let o = msupport(&[
        "case-study", "--input", &table, "--labels", missing.to_str().unwrap(), "--cancer-group", "cancer-B",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let o = msupport(&["case-study", "--input", &table]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stderr).unwrap().contains("--cancer-group"));
}

#[test]
fn kl_of_identical_members_is_zero() {
    let o = msupport(&["simulate", "kl", "--p", "nct:2,117", "--q", "nct:2,117"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(json(&o)["kl_nats"].as_f64().unwrap().abs() <= 1e-8);
}

#[test]
fn universality_curve_decreases() {
    let o = msupport(&["simulate", "universality", "--theta", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    let kl: Vec<f64> = v["curves"][0]["curve"]["kl_per_observation"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert_eq!(kl.len(), 4);
    assert!(kl.windows(2).all(|w| w[1] < w[0]), "{kl:?}");
}

#[test]
fn capacity_prior_edge_cases() {
    let single = json(&msupport(&["capacity-prior", "--grid", "1.5"]));
    assert_eq!(single["prior"]["masses"][0], 1.0);
    let sym = json(&msupport(&["capacity-prior", "--family", "normal", "--grid=-2,2"]));
    let m: Vec<f64> = sym["prior"]["masses"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!((m[0] - 0.5).abs() <= 1e-9 && (m[1] - 0.5).abs() <= 1e-9, "{m:?}");
    let full = json(&msupport(&["capacity-prior"]));
    assert!(full["diagnostics"]["gap"].as_f64().unwrap() < 1e-4);
    assert_eq!(full["diagnostics"]["converged"], true);
}

#[test]
fn fit_mixture_reads_statistics() {
    let o = msupport(&["fit-mixture", "--df", "117", "--t", "0.2,0.5,3.1,2.9,3.4,0.1"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    let pi0 = v["fit"]["pi0_hat"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&pi0));
    assert_eq!(v["features"].as_array().unwrap().len(), 6);
    assert_eq!(v["metadata"]["schema_version"], 1);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(msupport(&["support", "--method", "bogus"]).status.code(), Some(1));
    assert_eq!(msupport(&["support"]).status.code(), Some(1));
    assert_eq!(msupport(&["--help"]).status.code(), Some(0));
}
