use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use consensus_flow::scenario::RunReport;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_consensus-flow"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("spawn consensus-flow")
}

fn csv(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn two_node_demo_matches_closed_form() {
    let out = tempfile::tempdir().unwrap();
    let o = run(bin()
        .arg("simulate")
        .arg(configs().join("two_node.toml"))
        .arg("--out")
        .arg(out.path()));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let dir = out.path().join("two-node");
    for row in csv(&dir.join("trajectory.csv")) {
        let e = (-2.0 * row[0]).exp();
        assert!((row[1] - (1.0 + e)).abs() <= 1e-9, "{row:?}");
        assert!((row[2] - (1.0 - e)).abs() <= 1e-9, "{row:?}");
    }
    let header = fs::read_to_string(dir.join("series.csv")).unwrap();
    assert!(header.starts_with("t,V,Psi_V,dist_consensus_inf\n"));
    for row in csv(&dir.join("series.csv")) {
        assert!((row[1] - (-4.0 * row[0]).exp()).abs() <= 1e-8, "{row:?}");
        assert!(
            (row[2] - 4.0 * (-4.0 * row[0]).exp()).abs() <= 1e-8,
            "{row:?}"
        );
    }
    let report: RunReport =
        serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert!(report.passed());
    assert!(report.files.iter().all(|p| p.exists()));
    assert_eq!(report.consensus_value, 1.0);
}

#[test]
fn gibbs_pair_is_monotone_and_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for out in [&a, &b] {
        let o = run(bin()
            .arg("simulate")
            .arg(configs().join("gibbs_pair.toml"))
            .arg("--out")
            .arg(out.path()));
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["gibbs-linear", "gibbs-log-laplacian"] {
        let series = csv(&a.path().join(name).join("series.csv"));
        assert!(
            series.windows(2).all(|w| w[1][1] <= w[0][1]),
            "{name} V not monotone"
        );
        for file in ["trajectory.csv", "series.csv"] {
            assert_eq!(
                fs::read(a.path().join(name).join(file)).unwrap(),
                fs::read(b.path().join(name).join(file)).unwrap()
            );
        }
        let ra = fs::read_to_string(a.path().join(name).join("report.json")).unwrap();
        let rb = fs::read_to_string(b.path().join(name).join("report.json")).unwrap();
        // reports differ only in the output directory embedded in file paths
        let strip = |s: &str, dir: &Path| s.replace(dir.to_str().unwrap(), "<out>");
        assert_eq!(strip(&ra, a.path()), strip(&rb, b.path()));
    }
    let o = run(bin().arg("report").arg(a.path()));
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("gibbs-linear") && text.contains("gibbs-log-laplacian"));
    assert!(text.contains("V_monotone=true"));
}

#[test]
fn output_dir_from_environment() {
    let out = tempfile::tempdir().unwrap();
    let o = run(bin()
        .arg("simulate")
        .arg(configs().join("two_node.toml"))
        .env("CONSENSUS_FLOW_OUT_DIR", out.path()));
    assert!(o.status.success());
    assert!(out.path().join("two-node/report.json").is_file());
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    fs::copy(configs().join("two_node.edges"), dir.join("two_node.edges")).unwrap();
    let p = dir.join("c.toml");
    fs::write(&p, body).unwrap();
    p
}

const BASE: &str = r#"
[[scenario]]
name = "s"
graph = { kind = "edge-list", path = "two_node.edges" }
initial = { pattern = "values", values = [2.0, 0.5] }
potential = { name = "entropy" }
integration = { t_end = 1.0, dt = 0.01 }
"#;

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");

    let cfg = write_config(dir.path(), BASE);
    assert_eq!(
        run(bin().arg("simulate").arg(&cfg).arg("--out").arg(&out))
            .status
            .code(),
        Some(0)
    );

    let cfg = write_config(dir.path(), &BASE.replace("dt = 0.01", "dt = 0.01, dtt = 2"));
    let o = run(bin().arg("simulate").arg(&cfg).arg("--out").arg(&out));
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("dtt"));

    let cfg = write_config(dir.path(), &BASE.replace("[2.0, 0.5]", "[2.0, 0.0]"));
    let o = run(bin().arg("simulate").arg(&cfg).arg("--out").arg(&out));
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("component 1"));

    let o = run(bin().args(["verify", "--count", "0", "--sizes", "4"]));
    assert_eq!(o.status.code(), Some(3));
    let o = run(bin().args(["verify", "--strict", "--lenient"]));
    assert_eq!(o.status.code(), Some(2));
    let o = run(bin().arg("report").arg(dir.path().join("missing")));
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn verify_prints_one_line_per_check() {
    let o = run(bin().args([
        "verify",
        "--seed",
        "1",
        "--count",
        "1",
        "--sizes",
        "4",
        "--lenient",
    ]));
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.lines().count() > 10);
    for line in text.lines() {
        assert!(line.contains(" PASS residual="), "{line}");
        assert!(line.contains(" seed="));
    }
}

#[test]
fn flowmap_prints_stochastic_matrix() {
    let o = run(bin()
        .arg("flowmap")
        .arg(configs().join("two_node.edges"))
        .arg("--t")
        .arg((0.5 * std::f64::consts::LN_2).to_string()));
    assert!(o.status.success());
    let rows: Vec<Vec<f64>> = String::from_utf8_lossy(&o.stdout)
        .lines()
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    let want = [[0.75, 0.25], [0.25, 0.75]];
    for i in 0..2 {
        for j in 0..2 {
            assert!((rows[i][j] - want[i][j]).abs() <= 1e-12);
        }
    }
}
