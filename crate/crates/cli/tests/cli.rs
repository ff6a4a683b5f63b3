//! End-to-end tests against the built binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use parmc::acir::{codec, eval_exact};
use parmc::Rational;

fn model(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models").join(name)
}

fn parmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_parmc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn rows(stdout: &[u8]) -> Vec<Vec<f64>> {
    String::from_utf8_lossy(stdout)
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split_whitespace().map(|f| f.parse().unwrap()).collect())
        .collect()
}

#[test]
fn dice_reach_grid() {
    let out = parmc(&[
        "--model",
        model("dice.pmc").to_str().unwrap(),
        "--prop",
        "reach",
        "--target",
        "six",
        "--grid",
        "x=0.002:0.002:0.998",
        "--arith",
        "exact",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = rows(&out.stdout);
    assert_eq!(rows.len(), 499);
    let at_half = rows.iter().find(|r| r[0] == 0.5).expect("x=0.5 sampled");
    assert!((at_half[1] - 1.0 / 6.0).abs() < 1e-15);
    let report = String::from_utf8_lossy(&out.stderr);
    assert!(report.contains("points=499"), "{report}");
    assert!(report.contains("elimination_ms="), "{report}");
}

#[test]
fn two_cycle_lra_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let dat = dir.path().join("lra.dat");
    let out = parmc(&[
        "--model",
        model("two_cycle.pmc").to_str().unwrap(),
        "--prop",
        "lra",
        "--reward-up",
        "up",
        "--reward-low",
        "low",
        "--grid",
        "a=0.25:1:0.25,b=0.75:1:0.75",
        "--arith",
        "exact",
        "--out",
        dat.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let rows = rows(&std::fs::read(&dat).unwrap());
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0], vec![0.25, 0.75, 0.5]);
}

#[test]
fn interval_mode_brackets_the_value() {
    let out = parmc(&[
        "--model",
        model("dice.pmc").to_str().unwrap(),
        "--prop",
        "reach",
        "--target",
        "six",
        "--grid",
        "x=0.1:0.1:0.9",
        "--arith",
        "interval",
    ]);
    assert!(out.status.success());
    let rows = rows(&out.stdout);
    assert_eq!(rows.len(), 9);
    let one: Rational = "1".parse().unwrap();
    let two: Rational = "2".parse().unwrap();
    for (i, row) in rows.iter().enumerate() {
        let (lo, hi) = (row[1], row[2]);
        let x: Rational = format!("{}/10", i + 1).parse().unwrap();
        let residue = &one - &x;
        let exact = &(&residue * &residue) * &(&two - &x).recip().unwrap();
        let lo_bound = Rational::from_f64(lo).unwrap();
        let hi_bound = Rational::from_f64(hi).unwrap();
        assert!(
            lo_bound <= exact && exact <= hi_bound,
            "x={x}: [{lo}, {hi}] misses {exact}"
        );
        assert!(hi - lo < 1e-12);
    }
    assert!(String::from_utf8_lossy(&out.stderr).contains("max_interval_diameter="));
}

#[test]
fn heuristics_agree_on_the_result() {
    let mut values = Vec::new();
    for heuristic in ["num-new", "min-prod", "target-bfs", "random", "bfs", "reverse-bfs"] {
        let out = parmc(&[
            "--model",
            model("dice.pmc").to_str().unwrap(),
            "--prop",
            "reach",
            "--target",
            "six",
            "--grid",
            "x=0.3:1:0.3",
            "--heuristic",
            heuristic,
            "--seed",
            "7",
            "--arith",
            "exact",
        ]);
        assert!(out.status.success(), "{heuristic}");
        values.push(rows(&out.stdout)[0][1]);
    }
    assert!(values.iter().all(|v| v == &values[0]), "{values:?}");
}

#[test]
fn emitted_dag_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let acir = dir.path().join("six.acir");
    let out = parmc(&[
        "--model",
        model("dice.pmc").to_str().unwrap(),
        "--prop",
        "reach",
        "--target",
        "six",
        "--grid",
        "x=0.5:1:0.5",
        "--simplify",
        "sz",
        "--emit-dag",
        acir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let bytes = std::fs::read(&acir).unwrap();
    let (store, roots) = codec::decode(&bytes).unwrap();
    assert_eq!(roots.len(), 1);
    let half: Rational = "1/2".parse().unwrap();
    let sixth: Rational = "1/6".parse().unwrap();
    assert_eq!(eval_exact(&store, roots[0], &[half]).unwrap(), sixth);
}

#[test]
fn accumulated_reward_property_runs() {
    // Expected tries until a p-coin lands heads: 1/p.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("geometric.pmc");
    std::fs::write(
        &path,
        "@parameters\np\n@states 2\n@initial 0\n@labels\n1: \"goal\"\n@transitions\n\
         0 0 1 - p\n0 1 p\n1 1 1\n@rewards steps\n0: 1\n1: 1\n",
    )
    .unwrap();
    let out = parmc(&[
        "--model",
        path.to_str().unwrap(),
        "--prop",
        "acc",
        "--target",
        "goal",
        "--grid",
        "p=0.25:0.25:0.5",
        "--arith",
        "exact",
        "--reward",
        "steps",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = rows(&out.stdout);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0], vec![0.25, 4.0]);
    assert_eq!(rows[1], vec![0.5, 2.0]);
}

#[test]
fn usage_errors_exit_two() {
    let cases: Vec<Vec<&str>> = vec![
        // Missing --target for reach.
        vec!["--model", "m", "--prop", "reach", "--grid", "x=0:1:1"],
        // Unknown property value.
        vec!["--model", "m", "--prop", "bogus", "--target", "t", "--grid", "x=0:1:1"],
    ];
    for args in cases {
        let mut full = args.clone();
        let dice = model("dice.pmc");
        if full[1] == "m" {
            full[1] = dice.to_str().unwrap();
        }
        let out = parmc(&full);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
    // Grid problems: descending range, unknown axis, missing axis, duplicate.
    for grid in ["x=0.9:0.1:0.5", "y=0.1:0.1:0.5", "x=0.1:0.1:0.5,x=0.2:0.1:0.5"] {
        let out = parmc(&[
            "--model",
            model("dice.pmc").to_str().unwrap(),
            "--prop",
            "reach",
            "--target",
            "six",
            "--grid",
            grid,
        ]);
        assert_eq!(out.status.code(), Some(2), "grid {grid}");
    }
    let out = parmc(&[
        "--model",
        model("two_cycle.pmc").to_str().unwrap(),
        "--prop",
        "lra",
        "--reward-up",
        "up",
        "--reward-low",
        "low",
        "--grid",
        "a=0.5:1:0.5",
    ]);
    assert_eq!(out.status.code(), Some(2), "axis for b missing");
}

#[test]
fn module_errors_exit_one() {
    let out = parmc(&[
        "--model",
        "/nonexistent.pmc",
        "--prop",
        "reach",
        "--target",
        "six",
        "--grid",
        "x=0.5:1:0.5",
    ]);
    assert_eq!(out.status.code(), Some(1));

    // Grid corner drives a transition probability to zero.
    let out = parmc(&[
        "--model",
        model("dice.pmc").to_str().unwrap(),
        "--prop",
        "reach",
        "--target",
        "six",
        "--grid",
        "x=0:0.5:1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("(0, 1]"));

    // Syntax error in the model file.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.pmc");
    std::fs::write(&path, "@states one\n").unwrap();
    let out = parmc(&[
        "--model",
        path.to_str().unwrap(),
        "--prop",
        "reach",
        "--target",
        "six",
        "--grid",
        "x=0.5:1:0.5",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn witness_override_is_honored() {
    // The accumulated lower reward over the cycle is 2a - 1, which vanishes
    // at the default centroid witness a = 1/2 of this grid. An explicit
    // witness away from the root must let the run through.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gap.pmc");
    std::fs::write(
        &path,
        "@parameters\na\n@states 2\n@initial 0\n@transitions\n0 1 1\n1 0 1\n\
         @rewards up\n0: 1\n1: 1\n@rewards low\n0: 2 * a - 1\n1: 0\n",
    )
    .unwrap();
    let base = [
        "--model",
        path.to_str().unwrap(),
        "--prop",
        "lra",
        "--reward-up",
        "up",
        "--reward-low",
        "low",
        "--grid",
        "a=0.25:0.5:0.75",
        "--arith",
        "exact",
    ];
    let out = parmc(&base);
    assert_eq!(out.status.code(), Some(1), "centroid witness hits the pole");
    let mut with_witness = base.to_vec();
    with_witness.extend_from_slice(&["--witness", "a=3/4"]);
    let out = parmc(&with_witness);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    // u / l per cycle is 2 / (2a - 1).
    let rows = rows(&out.stdout);
    assert_eq!(rows[0], vec![0.25, -4.0]);
    assert_eq!(rows[1], vec![0.75, 4.0]);
}
