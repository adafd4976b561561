use std::path::Path;
use std::process::{Command, Output};

fn spanlab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spanlab"))
        .args(args)
        .current_dir(dir)
        .env_remove("SPANLAB_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn bounds_table_lists_delaunay_length() {
    let dir = tempfile::tempdir().unwrap();
    let o = spanlab(&["bounds", "--table"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("name,param,value,paper_tag,schema_version\n"));
    let row = text.lines().find(|l| l.starts_with("delaunay_length,")).unwrap();
    assert!(row.contains("3.3953"), "{row}");
}

#[test]
fn psi_star_outside_domain_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = spanlab(&["bounds", "--psi-star", "2.5"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("(1, 2)"), "{err}");
}

#[test]
fn usage_and_io_errors_have_their_own_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(spanlab(&["bounds"], dir.path()).status.code(), Some(2));
    assert_eq!(spanlab(&["generate", "poisson", "--window", "1,2"], dir.path()).status.code(), Some(2));
    assert_eq!(spanlab(&["measure", "missing.json"], dir.path()).status.code(), Some(4));
    std::fs::write(dir.path().join("bad.json"), "{\"schema_version\": 1}").unwrap();
    assert_eq!(spanlab(&["build", "bad.json", "delaunay"], dir.path()).status.code(), Some(4));
}

#[test]
fn generate_build_measure_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let run = |tag: &str| {
        let cfg = format!("cfg-{tag}.json");
        let net = format!("net-{tag}.json");
        assert!(spanlab(&["generate", "poisson", "--side", "15", "--seed", "11", "-o", &cfg], d).status.success());
        assert!(spanlab(&["build", &cfg, "delaunay", "-o", &net], d).status.success());
        let m = spanlab(&["measure", &net, "--stretch", "steiner", "--lines", "200"], d);
        assert!(m.status.success(), "{}", String::from_utf8_lossy(&m.stderr));
        (std::fs::read(d.join(&cfg)).unwrap(), std::fs::read(d.join(&net)).unwrap(), stdout(&m))
    };
    let (a, b) = (run("a"), run("b"));
    assert_eq!(a, b);
    let lines: Vec<&str> = a.2.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].ends_with("schema_version"));
    let max_stretch: f64 = lines[1].split(',').nth(4).unwrap().parse().unwrap();
    assert!((1.0..2.42).contains(&max_stretch));
}

#[test]
fn recorded_runs_replay() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = spanlab(
        &["--record", "run.json", "experiment", "crossing", "--replicates", "30", "--seed", "5", "-o", "res.csv"],
        d,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = spanlab(&["repro", "run.json"], d);
    assert!(r.status.success());
    let text = std::fs::read_to_string(d.join("res.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "estimator,params_json,mean,se,n,seed,schema_version");
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[1], lines[3]);
    assert_eq!(lines[2], lines[4]);
}

#[test]
fn json_measurement_and_threads_flag() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(spanlab(&["generate", "hex", "--side", "8", "-o", "hex.json"], d).status.success());
    assert!(spanlab(&["build", "hex.json", "lattice", "-o", "net.json"], d).status.success());
    let o = spanlab(&["--threads", "1", "measure", "net.json", "--format", "json", "--filter", "all"], d);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["stretch"]["exact"], true);
    assert!(v["normalized_length"].as_f64().unwrap() > 1.0);
}
