use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn odmts(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_odmts"))
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "odmts {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_twice_writes_identical_trips() {
    let dir = tempfile::tempdir().unwrap();
    let config = scenarios().join("low_ridership.toml");
    let mut files = Vec::new();
    for i in 0..2 {
        let trips = dir.path().join(format!("trips{i}.csv"));
        let summary = dir.path().join(format!("summary{i}.csv"));
        odmts(&[
            "simulate",
            path(&config),
            "--trips",
            path(&trips),
            "--summary",
            path(&summary),
        ]);
        files.push(fs::read(&trips).unwrap());
    }
    assert!(!files[0].is_empty());
    assert_eq!(files[0], files[1]);
}

#[test]
fn demand_file_reproduces_generated_run() {
    let dir = tempfile::tempdir().unwrap();
    let demand = dir.path().join("demand.csv");
    odmts(&[
        "gen-demand",
        path(&scenarios().join("low_ridership.toml")),
        "--out",
        path(&demand),
    ]);
    let text = fs::read_to_string(&demand).unwrap();
    assert!(text.starts_with("id,time,pickup,dropoff,passengers,type\n"));

    let original = fs::read_to_string(scenarios().join("low_ridership.toml")).unwrap();
    let base = path(&scenarios()).replace('\\', "/");
    let fixed: String = original
        .lines()
        .take_while(|l| !l.starts_with("[demand.profile]"))
        .map(|l| l.replace("\"grid_", &format!("\"{base}/grid_")))
        .collect::<Vec<_>>()
        .join("\n")
        + "\n[demand]\nfile = \"demand.csv\"\n";
    let config = dir.path().join("fixed.toml");
    fs::write(&config, fixed).unwrap();

    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let s = dir.path().join("s.csv");
    odmts(&[
        "simulate",
        path(&scenarios().join("low_ridership.toml")),
        "--trips",
        path(&a),
        "--summary",
        path(&s),
    ]);
    odmts(&[
        "simulate",
        path(&config),
        "--trips",
        path(&b),
        "--summary",
        path(&s),
    ]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn fleetcalc_reports_three_route_network() {
    let dir = tempfile::tempdir().unwrap();
    let routes = dir.path().join("routes.toml");
    fs::write(
        &routes,
        r#"
[[routes]]
one_way_time = 30
headway = 35
shape = "two_way"
[[routes]]
one_way_time = 45
headway = 35
shape = "two_way"
[[routes]]
one_way_time = 35
headway = 30
shape = "circular"
"#,
    )
    .unwrap();
    let out = odmts(&["fleetcalc", path(&routes), "--shuttles", "5"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("total              8 buses"), "{text}");
    assert!(text.contains("37.5%"), "{text}");
}

#[test]
fn solve_writes_solution_and_plan_dump() {
    let dir = tempfile::tempdir().unwrap();
    let instance = dir.path().join("instance.toml");
    fs::write(
        &instance,
        r#"
miss_penalty = 3600
k = 2
requests = [
    { id = 1, pickup = 1, dropoff = 2, request_time = 0 },
    { id = 2, pickup = 2, dropoff = 0, request_time = 0 },
]
shuttles = [
    { id = 0, heading_stop = 0, arrival_time = 0, capacity = 2 },
    { id = 1, heading_stop = 2, arrival_time = 0, capacity = 2 },
]
[network]
mode = "euclidean"
speed = 10.0
stops = [{ id = 0, x = 0.0, y = 0.0 }, { id = 1, x = 100.0, y = 0.0 }, { id = 2, x = 200.0, y = 0.0 }]
"#,
    )
    .unwrap();
    let dump = dir.path().join("plans.toml");
    let out = odmts(&["solve", path(&instance), "--dump-plans", path(&dump)]);
    let solution = String::from_utf8(out.stdout).unwrap();
    assert!(solution.contains("objective = 10"), "{solution}");
    let again = odmts(&["solve", path(&dump)]);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), solution);
}

#[test]
fn baseline_sweep_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let config = scenarios().join("low_ridership.toml");
    let bt = dir.path().join("bt.csv");
    let ot = dir.path().join("ot.csv");
    let s = dir.path().join("s.csv");
    odmts(&[
        "baseline",
        path(&config),
        "--trips",
        path(&bt),
        "--summary",
        path(&s),
    ]);
    odmts(&[
        "simulate",
        path(&config),
        "--trips",
        path(&ot),
        "--summary",
        path(&s),
    ]);
    let out = odmts(&["compare", path(&bt), path(&ot)]);
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.starts_with("series,bin_start,base,odmts,delta,delta_pct,comparable\n"));
    assert!(table.contains("mean_trip_time,"));

    let sweep = dir.path().join("sweep");
    let out = odmts(&[
        "sweep",
        path(&config),
        "--sizes",
        "2,5",
        "--out-dir",
        path(&sweep),
    ]);
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 3);
    assert!(sweep.join("summary_2.csv").exists());
    assert!(sweep.join("summary_5.csv").exists());
}

#[test]
fn bad_config_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(&config, "horizon = 10\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_odmts"))
        .args(["simulate", path(&config)])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}
