use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

use elastica::geometry::{chain_from_angles, regular_polygon, Point};
use elastica::io::angles_to_json;

fn elastica(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_elastica")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn elastica_energy_of_circle() {
    let o = elastica(&["energy", "elastica", "--curve", "circle"]);
    assert!(o.status.success());
    let e: f64 = stdout(&o).trim().parse().unwrap();
    assert!((e - PI * PI).abs() < 1e-12);
}

#[test]
fn discrete_energy_of_square() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("a.json");
    std::fs::write(&file, angles_to_json(&regular_polygon(4).unwrap()).unwrap()).unwrap();
    let o = elastica(&["energy", "discrete", "--angles", path(&file), "--potential", "canonical"]);
    assert!(o.status.success());
    let e: f64 = stdout(&o).trim().parse().unwrap();
    assert!((e - 16.0).abs() < 1e-12, "{e}");
}

#[test]
fn recover_circle_octagon_row() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("r.svg");
    let o = elastica(&["recover", "--curve", "circle", "--eps", "1/8", "--svg", path(&svg)]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 2);
    let fields: Vec<f64> = rows[1].split(',').map(|x| x.parse().unwrap()).collect();
    let golden = 64.0 * (PI / 8.0).tan().powi(2);
    assert!((fields[3] - golden).abs() < 1e-10 * golden, "{} vs {golden}", fields[3]);
    assert!((golden - 10.98066).abs() < 1e-5);
    let drawing = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(drawing.matches("<path").count(), 2);
}

#[test]
fn recover_csv_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for f in [&a, &b] {
        let o = elastica(&["recover", "--curve", "perturbed:a=0.2,m=2", "--eps", "1/16..1/32", "--csv", path(f)]);
        assert!(o.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn minimize_is_deterministic_and_reaches_bound() {
    let run = || elastica(&["minimize", "--n", "16", "--starts", "4", "--seed", "7", "--tol", "1e-8"]);
    let (first, second) = (run(), run());
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
    let text = stdout(&first);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "start_id,final_energy,gap_to_jensen,max_increment_dev,iters");
    let mut count = 0;
    for line in lines {
        let gap: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert!(gap.abs() < 1e-9);
        count += 1;
    }
    assert_eq!(count, 4);
}

#[test]
fn project_then_smooth() {
    let dir = tempfile::tempdir().unwrap();
    let projected = dir.path().join("p.csv");
    let smoothed = dir.path().join("s.csv");
    let o = elastica(&["project", "--expr", "a=0.2,m=2", "--out", path(&projected), "--samples", "512"]);
    assert!(o.status.success());
    let o = elastica(&["smooth", "--in", path(&projected), "--delta", "1e-2", "--out", path(&smoothed), "--samples", "512"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&smoothed).unwrap();
    assert!(text.starts_with("s,theta"));
    assert_eq!(text.lines().count(), 514);
}

#[test]
fn chain_show_octagon() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("c.json");
    let svg = dir.path().join("c.svg");
    let chain = chain_from_angles(&regular_polygon(8).unwrap(), 0.125, Point::new(0.0, 0.0)).unwrap();
    std::fs::write(&file, chain.to_json().unwrap()).unwrap();
    let o = elastica(&["chain", "show", "--in", path(&file), "--svg", path(&svg)]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("links 8"));
    let drawing = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(drawing.matches("<circle").count(), 8);
}

#[test]
fn bad_flags_exit_two() {
    for args in [
        &["recover", "--eps", "1/7..1/8"][..],
        &["energy", "elastica", "--potential", "bogus"],
        &["minimize", "--n"],
        &["project", "--expr", "a=0.2", "--out", "x.csv"],
        &["no-such-command"],
    ] {
        assert_eq!(elastica(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn numerical_failure_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("a.json");
    std::fs::write(&file, r#"{"thetas":[0.0,0.1,0.2,0.3]}"#).unwrap();
    let o = elastica(&["energy", "discrete", "--angles", path(&file)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn verify_all_quick_prints_every_criterion() {
    let o = elastica(&["verify-all", "--quick"]);
    let text = stdout(&o);
    for id in 1..=8 {
        assert!(text.lines().any(|l| l.starts_with(&format!("{id} "))), "criterion {id} missing");
    }
    let failing = text.lines().filter(|l| l.contains(" FAIL ")).count();
    assert_eq!(o.status.code(), Some(if failing == 0 { 0 } else { 1 }));
}
