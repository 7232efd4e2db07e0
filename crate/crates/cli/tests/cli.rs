use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn fixture(name: &str) -> PathBuf {
    root().join("crates/core/fixtures").join(name)
}

fn example_config() -> PathBuf {
    root().join("configs/example.toml")
}

fn plc(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plc"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("run plc")
}

fn read(path: PathBuf) -> String {
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn simulate_preset_writes_components() {
    let dir = tempfile::tempdir().unwrap();
    let o = plc(
        dir.path(),
        &["simulate", "--preset", "bw_tv", "--dt", "0.01"],
    );
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("1950.0"), "{}", stdout(&o));
    let csv = read(dir.path().join("bw_tv_plc.csv"));
    assert!(csv.starts_with("t,value,component\n"));
    for c in [
        "total",
        "bass_first",
        "gompertz_branch",
        "penetration",
        "relative_price",
    ] {
        assert!(csv.contains(&format!(",{c}\n")), "{c}");
    }
}

#[test]
fn simulate_plot_data_format() {
    let dir = tempfile::tempdir().unwrap();
    let o = plc(
        dir.path(),
        &["--format", "plot-data", "simulate", "--preset", "c_class"],
    );
    assert!(o.status.success(), "{o:?}");
    let dat = read(dir.path().join("c_class_plc.dat"));
    assert!(dat.starts_with("# total: t value\n"));
}

#[test]
fn simulate_from_config_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = example_config();
    let o = plc(
        dir.path(),
        &[
            "--config",
            cfg.to_str().unwrap(),
            "simulate",
            "--scenario",
            "custom",
        ],
    );
    assert!(o.status.success(), "{o:?}");
    assert!(dir.path().join("custom_plc.csv").exists());
}

#[test]
fn output_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let pen = fixture("bw_tv_penetration.csv");
    let args = [
        "fit",
        "--kind",
        "gompertz",
        "--preset",
        "bw_tv",
        "--penetration",
        pen.to_str().unwrap(),
        "--decline-rate",
        "0.2",
    ];
    assert!(plc(a.path(), &args).status.success());
    assert!(plc(b.path(), &args).status.success());
    assert_eq!(
        read(a.path().join("gompertz_fit.json")),
        read(b.path().join("gompertz_fit.json"))
    );
    assert_eq!(
        read(a.path().join("gompertz_fit.csv")),
        read(b.path().join("gompertz_fit.csv"))
    );
}

#[test]
fn fit_price_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let prices = fixture("bw_tv_price.csv");
    let o = plc(
        dir.path(),
        &[
            "fit",
            "--kind",
            "price",
            "--prices",
            prices.to_str().unwrap(),
        ],
    );
    assert!(o.status.success(), "{o:?}");
    let csv = read(dir.path().join("price_fit.csv"));
    let a: f64 = csv
        .lines()
        .find_map(|l| l.strip_prefix("a,"))
        .expect("decline rate row")
        .parse()
        .unwrap();
    assert!((a - 0.2).abs() < 0.01, "{a}");
}

#[test]
fn fit_plc_on_sales_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let sales = fixture("c_class_sales.csv");
    let o = plc(
        dir.path(),
        &[
            "fit",
            "--preset",
            "c_class",
            "--sales",
            sales.to_str().unwrap(),
        ],
    );
    assert!(o.status.success(), "{o:?}");
    let curve = read(dir.path().join("plc_curve.csv"));
    assert!(curve.contains(",observed\n") && curve.contains(",fitted\n"));
    let json = read(dir.path().join("plc_fit.json"));
    assert!(json.contains("\"t_p\""));
}

#[test]
fn compete_writes_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = example_config();
    let o = plc(
        dir.path(),
        &[
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "5",
            "compete",
            "--steps",
            "200",
        ],
    );
    assert!(o.status.success(), "{o:?}");
    let traj = read(dir.path().join("trajectory.csv"));
    assert!(traj.starts_with("t,brand_id,share,price,sales\n"));
    // 50 brands at 11 record points.
    assert_eq!(traj.lines().count(), 1 + 50 * 11);
    assert!(read(dir.path().join("mean_price.csv")).starts_with("tau,t,mean_price,variance\n"));
}

#[test]
fn compete_seed_changes_jumps() {
    let cfg = example_config();
    let run = |seed: &str| {
        let dir = tempfile::tempdir().unwrap();
        let o = plc(
            dir.path(),
            &[
                "--config",
                cfg.to_str().unwrap(),
                "--seed",
                seed,
                "compete",
                "--steps",
                "100",
            ],
        );
        assert!(o.status.success(), "{o:?}");
        read(dir.path().join("trajectory.csv"))
    };
    assert_eq!(run("1"), run("1"));
    assert_ne!(run("1"), run("2"));
}

#[test]
fn sizedist_sample_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = plc(
        dir.path(),
        &[
            "--seed", "9", "sizedist", "--units", "1500", "--steps", "100",
        ],
    );
    assert!(o.status.success(), "{o:?}");
    let sizes = read(dir.path().join("sizes.csv"));
    assert!(sizes.starts_with("unit_id,size\n0,"));
    assert_eq!(sizes.lines().count(), 1501);
    assert!(read(dir.path().join("size_report.csv")).contains("ks_distance,"));
}

#[test]
fn volume_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = plc(
        dir.path(),
        &[
            "volume",
            "--potential",
            "10",
            "--upper",
            "1",
            "--to",
            "2",
            "--step",
            "0.5",
        ],
    );
    assert!(o.status.success(), "{o:?}");
    let csv = read(dir.path().join("volume.csv"));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "mu,volume,density");
    assert_eq!(lines.len(), 6);
    assert_eq!(lines[1], "0,10,1");
}

#[test]
fn substitute_reaches_half_share() {
    let dir = tempfile::tempdir().unwrap();
    let o = plc(
        dir.path(),
        &[
            "substitute",
            "--f1",
            "0.6",
            "--f2",
            "0.1",
            "--initial-share",
            "0.1",
            "--dt",
            "0.001",
            "--horizon",
            "10",
        ],
    );
    assert!(o.status.success(), "{o:?}");
    let csv = read(dir.path().join("substitution.csv"));
    let half = (9f64).ln() / 0.5;
    let row = csv
        .lines()
        .skip(1)
        .map(|l| {
            let mut it = l.split(',');
            (
                it.next().unwrap().parse::<f64>().unwrap(),
                it.next().unwrap().parse::<f64>().unwrap(),
            )
        })
        .min_by(|a, b| (a.0 - half).abs().total_cmp(&(b.0 - half).abs()))
        .unwrap();
    assert!((row.1 - 0.5).abs() < 1e-3, "{row:?}");
}

#[test]
fn validation_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        plc(dir.path(), &["simulate", "--preset", "vinyl"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(plc(dir.path(), &["simulate"]).status.code(), Some(2));
    assert_eq!(
        plc(dir.path(), &["volume", "--width", "0"]).status.code(),
        Some(2)
    );
    assert_eq!(plc(dir.path(), &["compete"]).status.code(), Some(2));
    assert_eq!(plc(dir.path(), &["frobnicate"]).status.code(), Some(2));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[scenario.bw_tv]\nR = -1\n").unwrap();
    let o = plc(dir.path(), &["--config", bad.to_str().unwrap(), "simulate"]);
    assert_eq!(o.status.code(), Some(2));

    let malformed = dir.path().join("prices.csv");
    std::fs::write(&malformed, "t,value\n1948,100\n1949,abc\n").unwrap();
    let o = plc(
        dir.path(),
        &[
            "fit",
            "--kind",
            "price",
            "--prices",
            malformed.to_str().unwrap(),
        ],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains(":3:"), "{o:?}");
}

#[test]
fn exhausted_budget_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let pen = fixture("bw_tv_penetration.csv");
    let o = plc(
        dir.path(),
        &[
            "fit",
            "--kind",
            "gompertz",
            "--penetration",
            pen.to_str().unwrap(),
            "--max-evals",
            "10",
        ],
    );
    assert_eq!(o.status.code(), Some(3), "{o:?}");
    assert!(dir.path().join("gompertz_fit.json").exists());
}

#[test]
fn missing_input_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = plc(
        dir.path(),
        &[
            "fit",
            "--kind",
            "price",
            "--prices",
            "/definitely/not/here.csv",
        ],
    );
    assert_eq!(o.status.code(), Some(1));
}
