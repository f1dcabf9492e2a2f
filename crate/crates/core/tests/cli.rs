use std::fs;
use std::process::{Command, Output};

fn parchr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_parchr")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn run_prints_the_final_store() {
    let o = parchr(&["run", "--example", "min", "--size", "5", "--strategy", "pars", "--processors", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("final store: min(1)"), "{text}");
    assert!(text.contains("validated=true oracle=pass"), "{text}");
}

#[test]
fn run_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path().join("primes");
    let base = base.to_str().unwrap();
    let args = ["run", "--example", "primes", "--size", "12", "--processors", "n", "--format", "both", "--out", base];
    assert_eq!(parchr(&args).status.code(), Some(0));
    let csv = fs::read_to_string(format!("{base}.csv")).unwrap();
    assert!(csv.starts_with("step,applicable,applicable_raw,applied,store_size,gc\n"));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(format!("{base}.json")).unwrap()).unwrap();
    assert_eq!(json["processors"], "12");
    assert_eq!(json["oracle_result"], "pass");

    assert_eq!(parchr(&args).status.code(), Some(2), "refuses to overwrite");
    let mut forced = args.to_vec();
    forced.push("--force");
    assert_eq!(parchr(&forced).status.code(), Some(0));
}

#[test]
fn run_accepts_a_program_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gcd.chr");
    fs::write(&path, "gcd(0) <=> true.\ngcd(N) \\ gcd(M) <=> N =< M | gcd(M-N).\n").unwrap();
    let o = parchr(&["run", "--program", path.to_str().unwrap(), "--query", "gcd(12), gcd(18)", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(json["example"], "gcd");
    assert_eq!(json["oracle_result"], "skipped");
    assert_eq!(json["final_store_size"], 1);
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(parchr(&["run", "--example", "min"]).status.code(), Some(2));
    assert_eq!(parchr(&["run", "--example", "nope", "--size", "3"]).status.code(), Some(2));
    assert_eq!(parchr(&["run", "--example", "min", "--size", "3", "--processors", "0"]).status.code(), Some(2));
    assert_eq!(
        parchr(&["run", "--example", "min", "--size", "3", "--program", "x.chr", "--query", "a"]).status.code(),
        Some(2)
    );
    assert_eq!(parchr(&["sweep", "--example", "min", "--size", "3", "--seed", "", "--out", "x"]).status.code(), Some(2));
    assert_eq!(parchr(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(parchr(&["--help"]).status.code(), Some(0));
}

#[test]
fn sweep_writes_every_run_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let args = [
        "sweep", "--example", "min,fib", "--size", "5", "--strategy", "par,parr", "--processors", "unbounded,n",
        "--seed", "0,1", "--out", out,
    ];
    let first = parchr(&args);
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stderr));
    assert!(dir.path().join("min_5_parr_5_1.csv").exists());
    assert!(dir.path().join("fib_5_par_unbounded_0.json").exists());
    let aggregate = fs::read_to_string(dir.path().join("aggregate.csv")).unwrap();
    assert_eq!(aggregate.lines().count(), 1 + 16);

    let stamp = fs::metadata(dir.path().join("min_5_par_unbounded_0.csv")).unwrap().modified().unwrap();
    let again = parchr(&args);
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(fs::read_to_string(dir.path().join("aggregate.csv")).unwrap(), aggregate);
    let after = fs::metadata(dir.path().join("min_5_par_unbounded_0.csv")).unwrap().modified().unwrap();
    assert_eq!(stamp, after);
}

#[test]
fn check_flags_a_scheduler_that_loses_work() {
    let good = parchr(&["check", "--criteria", "2", "--seeds", "2"]);
    assert_eq!(good.status.code(), Some(0), "{}", stdout(&good));
    assert!(stdout(&good).starts_with("PASS  2"));
    let bad = parchr(&["check", "--criteria", "2", "--seeds", "2", "--broken-strategy"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).starts_with("FAIL  2"));
}

#[test]
fn check_can_emit_json() {
    let o = parchr(&["check", "--criteria", "1,12", "--seeds", "1", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["criteria"].as_array().map(Vec::len), Some(2));
}
