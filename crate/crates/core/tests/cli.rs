use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn cpfilter(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cpfilter")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

const SMALL_SCENARIO: &str = r#"
area_width_m = 1200.0
area_height_m = 1200.0
duration_s = 4.0
vehicle_count = 40
seed = 3

[mobility]
grid_rows = 2
grid_cols = 2
"#;

fn write_scenario(dir: &Path) -> PathBuf {
    let p = dir.join("scenario.toml");
    std::fs::write(&p, SMALL_SCENARIO).unwrap();
    p
}

#[test]
fn simulate_writes_metrics_and_cdf_per_filter() {
    let dir = tempfile::tempdir().unwrap();
    let scen = write_scenario(dir.path());
    let out = dir.path().join("out");
    let o = cpfilter(&["simulate", "--scenario", scen.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for name in ["cmr", "hopdis", "hop"] {
        for kind in ["metrics", "cdf"] {
            let p = out.join(format!("{kind}_{name}.csv"));
            assert!(p.is_file(), "missing {}", p.display());
        }
        let metrics = std::fs::read_to_string(out.join(format!("metrics_{name}.csv"))).unwrap();
        assert!(metrics.starts_with("vehicle,generated,"));
        assert_eq!(metrics.lines().count(), 40 + 2);
    }
    let text = stdout(&o);
    assert!(text.starts_with("filter"));
    assert!(text.contains("wrote 6 file(s)"));
}

#[test]
fn missing_scenario_names_the_path() {
    let o = cpfilter(&["simulate", "--scenario", "/nonexistent/scen.toml"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("/nonexistent/scen.toml"), "{}", stderr(&o));
}

#[test]
fn unknown_scenario_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    std::fs::write(&p, "vehicle_cuont = 3\n").unwrap();
    let o = cpfilter(&["simulate", "--scenario", p.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("vehicle_cuont"), "{}", stderr(&o));
}

#[test]
fn seeded_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let scen = write_scenario(dir.path());
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        let o = cpfilter(&[
            "simulate", "--scenario", scen.to_str().unwrap(), "--seed", "7", "--filter", "cmr", "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        (
            std::fs::read(out.join("metrics_cmr.csv")).unwrap(),
            std::fs::read(out.join("cdf_cmr.csv")).unwrap(),
        )
    };
    assert_eq!(run("a"), run("b"));
    assert!(!dir.path().join("a/metrics_hop.csv").exists());
}

fn accuracy(text: &str) -> f64 {
    let line = text.lines().find(|l| l.starts_with("holdout accuracy:")).expect(text);
    line.rsplit(' ').next().unwrap().parse().unwrap()
}

#[test]
fn train_two_cluster_is_accurate_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let p = dir.path().join(name);
        let o = cpfilter(&[
            "train", "--synthetic", "2000", "--generator", "two-cluster", "--out", p.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        (stdout(&o), std::fs::read(&p).unwrap())
    };
    let (text, m1) = run("a.txt");
    assert!(accuracy(&text) >= 0.9, "{text}");
    assert!(text.contains("objective learned:"));
    let (_, m2) = run("b.txt");
    assert_eq!(m1, m2);
}

#[test]
fn train_heuristic_reports_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.txt");
    let o = cpfilter(&["train", "--synthetic", "1000", "--out", p.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let acc = accuracy(&stdout(&o));
    assert!((0.5..=1.0).contains(&acc));
}

#[test]
fn train_on_one_class_fails_naming_the_label() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    std::fs::write(&data, "d,v,r,c,label\n10,1,5,1,0\n20,2,9,1,0\n30,0,40,0,0\n40,5,2,2,0\n").unwrap();
    let o = cpfilter(&["train", "--data", data.to_str().unwrap(), "--out", dir.path().join("m").to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("requires attention"), "{}", stderr(&o));
}

#[test]
fn rank_prints_top_l() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("objs.csv");
    std::fs::write(&data, "id,d,v,r,c\n1,90,0,170,0\n2,5,20,3,3\n3,40,5,60,1\n").unwrap();
    for algo in ["fitness", "radix"] {
        let o = cpfilter(&["rank", "--data", data.to_str().unwrap(), "--top", "2", "--algo", algo]);
        assert!(o.status.success(), "{}", stderr(&o));
        let text = stdout(&o);
        let rows: Vec<Vec<&str>> = text
            .lines()
            .skip(1)
            .take_while(|l| !l.starts_with("ranked"))
            .map(|l| l.split_whitespace().collect())
            .collect();
        assert_eq!(rows.len(), 2, "{text}");
        assert_eq!(rows[0][1], "2", "{algo}: {text}");
        assert!(text.contains("ranked 3 object(s) in"));
    }
}

#[test]
fn rank_reports_time_for_a_hundred_objects() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("objs.csv");
    let rows: String = (0..100).map(|i| format!("{}, {}, {}, {}\n", i, i % 30, (i * 7) % 180, i % 4)).collect();
    std::fs::write(&data, rows).unwrap();
    let o = cpfilter(&["rank", "--data", data.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let last = text.lines().last().unwrap();
    assert!(last.starts_with("ranked 100 object(s) in") && last.ends_with("ms (Fitness)"), "{last}");
    assert_eq!(text.lines().count(), 1 + 7 + 1);
}

#[test]
fn packet_encode_matches_fixture_and_decodes() {
    let json = fixture("packet_3_objects.json");
    let expected = std::fs::read_to_string(fixture("packet_3_objects.hex")).unwrap();
    let o = cpfilter(&["packet", "encode", "--json", json.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), expected.trim());
    assert_eq!(lines.next().unwrap(), "47 bytes");

    let o = cpfilter(&["packet", "decode", expected.trim()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("objects: 3"), "{text}");
    assert!(text.contains("bicycle"));
}

#[test]
fn packet_decode_from_stdin() {
    let expected = std::fs::read_to_string(fixture("packet_no_objects.hex")).unwrap();
    let mut child = Command::new(env!("CARGO_BIN_EXE_cpfilter"))
        .args(["packet", "decode", "--json"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    use std::io::Write;
    child.stdin.take().unwrap().write_all(expected.as_bytes()).unwrap();
    let o = child.wait_with_output().unwrap();
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["payload"]["objects"].as_array().unwrap().len(), 0);
}

#[test]
fn truncated_packet_is_reported() {
    let hex = std::fs::read_to_string(fixture("packet_3_objects.hex")).unwrap();
    let o = cpfilter(&["packet", "decode", &hex.trim()[..20]]);
    assert!(!o.status.success());
    assert!(stderr(&o).to_lowercase().contains("truncated"), "{}", stderr(&o));
}
