use std::process::{Command, Output};

fn incseq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_incseq"))
        .args(args)
        .env_remove("INCSEQ_OUTPUT_DIR")
        .env_remove("INCSEQ_SEED")
        .output()
        .expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

#[test]
fn moments_summary() {
    let out = incseq(&["moments", "--n", "3", "--k", "2"]);
    assert!(out.status.success());
    assert!(text(&out.stderr).contains("first=3/2 second=19/6 var=11/12"), "{}", text(&out.stderr));
    let csv = text(&out.stdout);
    assert!(csv.starts_with("n,k,first_num,first_den,second_num,second_den,var_num,var_den"));
    assert!(csv.contains("\n3,2,3,2,19,6,11,12,"));
}

#[test]
fn identity_check_reports_ok() {
    let out = incseq(&["identity-check", "--N", "4", "--jmax", "3"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(text(&out.stderr).starts_with("OK"));
    assert!(!text(&out.stdout).contains(",false"));
}

#[test]
fn lln_reruns_are_byte_identical() {
    let args = ["lln", "--n", "400", "--exponent", "0.3", "--eps", "0.25", "--samples", "2000", "--seed", "7"];
    let first = incseq(&args);
    let second = incseq(&args);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
    assert!(text(&first.stdout).starts_with("l,n,k,epsilon,exceedance,stderr,samples,seed\n0.3,400,6,0.25,"));
    let other = incseq(&["lln", "--n", "400", "--k", "6", "--samples", "2000", "--seed", "8"]);
    assert_ne!(first.stdout, other.stdout);
}

#[test]
fn thread_count_does_not_change_results() {
    let base = ["exponent-scan", "--l-list", "0.2,0.3", "--n-list", "20,40", "--samples", "300", "--seed", "3"];
    let one = incseq(&[&base[..], &["--threads", "1"]].concat());
    let four = incseq(&[&base[..], &["--threads", "4"]].concat());
    assert!(one.status.success());
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn output_file_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tv.json");
    let out = incseq(&["tv", "--n", "3", "--k", "2", "--format", "json", "--output", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(text(&out.stdout).contains("exact=5/18"));
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(doc["command"], "tv");
    assert_eq!(doc["rows"][0]["exact"], "5/18");

    let out = Command::new(env!("CARGO_BIN_EXE_incseq"))
        .args(["moments", "--n", "4", "--k", "2"])
        .env("INCSEQ_OUTPUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("moments.csv").exists());
}

#[test]
fn exit_codes() {
    assert_eq!(incseq(&["moments", "--n", "3", "--k", "5"]).status.code(), Some(64));
    assert_eq!(incseq(&["moments", "--n", "3"]).status.code(), Some(64));
    assert_eq!(incseq(&["no-such-command"]).status.code(), Some(64));
    assert_eq!(incseq(&["lln", "--n", "10", "--exponent", "0.7"]).status.code(), Some(64));
    assert_eq!(incseq(&["moments", "--n", "300", "--k", "100"]).status.code(), Some(2));
    assert_eq!(incseq(&["walk-check", "--n-max", "900"]).status.code(), Some(2));
    assert_eq!(incseq(&["--help"]).status.code(), Some(0));
    assert_eq!(incseq(&["--version"]).status.code(), Some(0));
}

#[test]
fn walk_check_is_clean() {
    let out = incseq(&["walk-check", "--n-max", "120", "--band-max", "500"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    assert!(text(&out.stderr).contains("violations=0"));
    assert!(text(&out.stdout).starts_with("check,n,a,exact_num,exact_den,envelope,ok\n"));
}
