use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn topofilter(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_topofilter")).args(args).current_dir(dir).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn verdicts(v: &Value) -> Vec<(String, String)> {
    v["records"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| (r["id"].as_str().unwrap().to_owned(), r["verdict"].as_str().unwrap().to_owned()))
        .collect()
}

fn workdir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let files = [
        ("sierpinski.json", r#"{"kind": "topology", "points": 2, "opens": [[], [1], [0, 1]]}"#),
        ("broken.json", r#"{"kind": "topology", "points": 2, "opens": [[], [0], [1]]}"#),
        ("filter.json", r#"{"kind": "filter", "topology": "sierpinski.json", "values": [0, 1, 1]}"#),
        ("not-a-filter.json", r#"{"kind": "filter", "topology": "sierpinski.json", "values": [0, 1, 0]}"#),
        ("swap.json", r#"{"kind": "map", "source": "sierpinski.json", "target": "sierpinski.json", "image": [1, 0]}"#),
        ("collapse.json", r#"{"kind": "map", "source": "sierpinski.json", "target": "sierpinski.json", "image": [1, 1]}"#),
        ("diagonal.json", r#"{"kind": "relation", "points": 3, "pairs": [[0, 0], [1, 1], [2, 2]]}"#),
        ("chain.json", r#"{"kind": "relation", "points": 3, "pairs": [[0, 1], [1, 2]]}"#),
        ("rotation.json", r#"{"kind": "flow", "flow": {"name": "rotation", "omega": 1.0}, "domain": [-1, 1]}"#),
    ];
    for (name, text) in files {
        std::fs::write(dir.path().join(name), text).unwrap();
    }
    let ray: Vec<[f64; 2]> = (1..=20).map(|k| [0.5f64.powi(k), 0.0]).collect();
    let ray = serde_json::json!({ "kind": "sequence", "x": [0, 0], "u": [1, 0], "points": ray });
    std::fs::write(dir.path().join("ray.json"), ray.to_string()).unwrap();
    dir
}

#[test]
fn topology_documents() {
    let dir = workdir();
    let ok = topofilter(&["check", "topology", "sierpinski.json"], dir.path());
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(json(&ok)["records"][0]["details"]["t0"], true);

    let bad = topofilter(&["check", "topology", "broken.json"], dir.path());
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("error"));

    let missing = topofilter(&["check", "topology", "nowhere.json"], dir.path());
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn filters_and_maps() {
    let dir = workdir();
    let f = topofilter(&["check", "filter", "filter.json"], dir.path());
    assert_eq!(f.status.code(), Some(0));
    assert_eq!(json(&f)["records"][0]["details"]["kernel"], serde_json::json!([1]));
    assert_eq!(topofilter(&["check", "filter", "not-a-filter.json"], dir.path()).status.code(), Some(2));

    let swap = topofilter(&["check", "map", "swap.json"], dir.path());
    assert_eq!(swap.status.code(), Some(1));
    let v = json(&swap);
    assert_eq!(verdicts(&v), vec![("continuity".into(), "fail".into())]);
    assert_eq!(v["records"][0]["witness"]["open"], serde_json::json!([1]));
    assert_eq!(topofilter(&["check", "map", "collapse.json"], dir.path()).status.code(), Some(0));

    let wrong_kind = topofilter(&["check", "map", "filter.json"], dir.path());
    assert_eq!(wrong_kind.status.code(), Some(2));
}

#[test]
fn enumeration_counts() {
    let dir = workdir();
    for (n, t0, count) in [(2, false, 4), (3, false, 29), (3, true, 19), (4, false, 355), (4, true, 219)] {
        let mut args = vec!["enumerate", "topologies", "--points"];
        let n = n.to_string();
        args.push(&n);
        if t0 {
            args.push("--t0");
        }
        let out = topofilter(&args, dir.path());
        assert_eq!(out.status.code(), Some(0));
        assert_eq!(json(&out)["count"], count);
    }
    let filters = json(&topofilter(&["enumerate", "filters", "sierpinski.json"], dir.path()));
    assert_eq!(filters["count"], 2);
    let improper = json(&topofilter(&["--improper-filters", "enumerate", "filters", "sierpinski.json"], dir.path()));
    assert_eq!(improper["count"], 3);
}

#[test]
fn uniformity_of_relations() {
    let dir = workdir();
    let d = topofilter(&["check", "uniformity", "diagonal.json"], dir.path());
    assert_eq!(d.status.code(), Some(0));
    let c = json(&topofilter(&["check", "uniformity", "chain.json"], dir.path()));
    let failing: Vec<_> = verdicts(&c).into_iter().filter(|(_, v)| v == "fail").map(|(id, _)| id).collect();
    assert!(failing.contains(&"symmetric".to_string()), "{failing:?}");
}

#[test]
fn geometry_commands() {
    let dir = workdir();
    let c = topofilter(&["geom", "classify", "ray.json"], dir.path());
    assert_eq!(c.status.code(), Some(0));
    assert_eq!(json(&c)["records"][0]["details"]["matches_filter"], true);

    let inside = json(&topofilter(&["geom", "cone", "--x", "0,0", "--u", "1,0", "--eps", "0.5", "--sigma", "0.5", "--y", "0.2,0.01"], dir.path()));
    assert_eq!(inside["records"][0]["details"]["member"], true);
    let outside = json(&topofilter(&["geom", "cone", "--x", "0,0", "--u", "1,0", "--eps", "0.5", "--sigma", "0.5", "--y", "-0.2,0"], dir.path()));
    assert_eq!(outside["records"][0]["details"]["member"], false);

    let t = topofilter(&["geom", "transport", "--map", r#"{"name":"sine-shear","k":0.5}"#, "--x", "0.3,-0.1", "--u", "0,1"], dir.path());
    assert_eq!(t.status.code(), Some(0), "{}", String::from_utf8_lossy(&t.stderr));
    assert_eq!(topofilter(&["geom", "transport", "--map", "no-such-map", "--x", "0,0", "--u", "1,0"], dir.path()).status.code(), Some(2));
}

#[test]
fn snowflake_commands() {
    let dir = workdir();
    let eq = topofilter(&["snowflake", "separate", "--p", "0,1,1/2", "--q", "0,1,1/2", "--m", "2"], dir.path());
    assert_eq!(eq.status.code(), Some(0));
    let d = topofilter(&["snowflake", "derive", "--map", "sin", "--x", "0", "--p", "0,1", "--m", "2"], dir.path());
    assert_eq!(d.status.code(), Some(0));
    let doubled = topofilter(&["snowflake", "derive", "--map", "sin", "--x", "0", "--p", "0,2", "--m", "2"], dir.path());
    assert_eq!(doubled.status.code(), Some(0));
    let q1 = json(&doubled)["records"][0]["details"]["q"][1].as_f64().unwrap();
    assert!((q1 - 2.0).abs() < 1e-9, "{q1}");
    assert_eq!(topofilter(&["snowflake", "separate", "--p", "0,x", "--q", "0", "--m", "2"], dir.path()).status.code(), Some(2));
}

#[test]
fn flow_commands() {
    let dir = workdir();
    let c = topofilter(&["--samples", "500", "flow", "conditions", "rotation.json"], dir.path());
    assert_eq!(c.status.code(), Some(0));
    assert_eq!(verdicts(&json(&c)).len(), 5);
    for cmd in ["lemacon", "step3"] {
        let out = topofilter(&["--samples", "2000", "flow", cmd, "rotation.json"], dir.path());
        assert_eq!(out.status.code(), Some(0), "{cmd}");
    }
    let t = topofilter(&["--samples", "1000", "flow", "transport", "rotation.json", "--map", "cubic"], dir.path());
    assert_eq!(t.status.code(), Some(0));
}

#[test]
fn suites_and_reports() {
    let dir = workdir();
    let out = dir.path().join("report.json");
    let a = topofilter(&["--seed", "5", "--out", out.to_str().unwrap(), "suite", "finite-axioms"], dir.path());
    assert_eq!(a.status.code(), Some(0));
    let written = std::fs::read(&out).unwrap();
    assert_eq!(written, a.stdout);
    let b = topofilter(&["--seed", "5", "--threads", "1", "suite", "finite-axioms"], dir.path());
    assert_eq!(a.stdout, b.stdout);

    let v = json(&a);
    assert_eq!(v["suite"], "finite-axioms");
    assert_eq!(v["config"]["seed"], 5);
    assert!(verdicts(&v).iter().all(|(id, verdict)| id.starts_with("finite-axioms/") && verdict == "pass"));

    let timed = json(&topofilter(&["--timings", "suite", "cones"], dir.path()));
    assert!(timed["records"][0]["elapsed_ms"].is_number());

    assert_eq!(topofilter(&["suite", "unknown"], dir.path()).status.code(), Some(2));
    assert_eq!(topofilter(&["--max-points", "9", "suite", "finite-axioms"], dir.path()).status.code(), Some(2));
    assert_eq!(topofilter(&["--tol", "-1", "suite", "cones"], dir.path()).status.code(), Some(2));
}

#[test]
fn usage_errors_exit_two() {
    let dir = workdir();
    assert_eq!(topofilter(&[], dir.path()).status.code(), Some(2));
    assert_eq!(topofilter(&["frobnicate"], dir.path()).status.code(), Some(2));
}
