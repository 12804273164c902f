use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn drmtest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drmtest"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = drmtest(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn decompose_mixed_measure() {
    let text = ok(&["decompose", "--measure", "mixed"]);
    assert!(text.contains("c_r         0.33333333333333"));
    assert!(text.contains("c_l         0.2"));
    assert!(text.contains("c_c         0.46666666666666"));
}

#[test]
fn record_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let rec = dir.path().join("g.txt");
    fs::write(
        &rec,
        ok(&["decompose", "--measure", "gluevar", "--emit-record"]),
    )
    .unwrap();
    let from_record = ok(&[
        "cellprobs",
        "--record",
        path(&rec),
        "--levels",
        "0.025",
        "--mode",
        "left",
    ]);
    let from_measure = ok(&["cellprobs", "--measure", "gluevar", "--m", "1"]);
    assert_eq!(from_record, from_measure);
}

#[test]
fn cellprobs_avar_exact() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("cells.csv");
    let text = ok(&[
        "cellprobs",
        "--measure",
        "avar:0.025",
        "--m",
        "1",
        "--csv",
        path(&csv),
    ]);
    assert_eq!(text, "cell,probability\n0,0.98125\n1,0.0125\n2,0.00625\n");
    assert_eq!(fs::read_to_string(csv).unwrap(), text);
}

fn write_inputs(dir: &Path, n: usize, scale: f64) -> (String, String) {
    let losses = dir.join("losses.csv");
    let forecasts = dir.join("forecasts.csv");
    let mut l = String::from("t,loss\n");
    let mut f = String::from("t,family,param1,param2\n");
    for t in 1..=n {
        // a deterministic low-discrepancy sequence of standard normal scores
        let u = ((t as f64) * 0.618_033_988_749_895).fract();
        let z = drmtest_core::math::normal_quantile(u.clamp(1e-9, 1.0 - 1e-9));
        l.push_str(&format!("{t},{}\n", scale * z));
        f.push_str(&format!("{t},normal,0,1\n"));
    }
    fs::write(&losses, l).unwrap();
    fs::write(&forecasts, f).unwrap();
    (path(&losses).to_owned(), path(&forecasts).to_owned())
}

#[test]
fn backtest_reports_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let (losses, forecasts) = write_inputs(dir.path(), 500, 1.0);
    let csv = dir.path().join("tests.csv");
    let ind = dir.path().join("ind.csv");
    let text = ok(&[
        "backtest",
        "--losses",
        &losses,
        "--forecasts",
        &forecasts,
        "--measure",
        "avar:0.025",
        "--m",
        "2",
        "--csv",
        path(&csv),
        "--indicators",
        path(&ind),
    ]);
    assert!(text.contains("n = 500, m = 2"));
    let results = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = results.lines().collect();
    assert_eq!(lines[0], "test,statistic,pvalue,reject");
    assert_eq!(lines.len(), 4);
    assert!(lines[2].starts_with("nass,"));
    let indicators = fs::read_to_string(&ind).unwrap();
    assert_eq!(indicators.lines().count(), 501);
    assert!(indicators.starts_with("t,i1,i2,i3,breached\n"));

    // losses five times too large are rejected by every test
    let (losses, forecasts) = write_inputs(dir.path(), 500, 5.0);
    ok(&[
        "backtest",
        "--losses",
        &losses,
        "--forecasts",
        &forecasts,
        "--measure",
        "avar:0.025",
        "--m",
        "2",
        "--csv",
        path(&csv),
    ]);
    let results = fs::read_to_string(&csv).unwrap();
    assert!(
        results.lines().skip(1).all(|l| l.ends_with(",true")),
        "{results}"
    );

    let text = ok(&[
        "backtest",
        "--losses",
        &losses,
        "--forecasts",
        &forecasts,
        "--measure",
        "avar:0.025",
        "--m",
        "2",
        "--baseline",
    ]);
    assert!(text.contains("yes"));
}

#[test]
fn study_output_does_not_depend_on_workers() {
    let dir = tempfile::tempdir().unwrap();
    let run = |workers: &str, name: &str| {
        let csv = dir.path().join(name);
        ok(&[
            "study",
            "dist",
            "--reps",
            "200",
            "--n",
            "100,250",
            "--m",
            "1,2",
            "--alternatives",
            "N,T3",
            "--workers",
            workers,
            "--seed",
            "9",
            "--csv",
            path(&csv),
        ]);
        fs::read_to_string(csv).unwrap()
    };
    let one = run("1", "a.csv");
    assert_eq!(one, run("3", "b.csv"));
    assert!(one.starts_with("measure,test,alt,n,m,estimate,se,band\n"));
    assert_eq!(one.lines().count(), 1 + 2 * 3 * 2 * 2);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("study.toml");
    fs::write(
        &cfg,
        "reps = 150\nns = [100]\nms = [1]\nalternatives = [\"N\"]\n",
    )
    .unwrap();
    let text = ok(&["study", "dist", "--config", path(&cfg)]);
    assert!(text.contains("(N = 150)"), "{text}");
    let text = ok(&[
        "study",
        "dist",
        "--config",
        path(&cfg),
        "--reps",
        "120",
        "--m",
        "2",
    ]);
    assert!(text.contains("(N = 120)"));
    assert!(text.contains("       2\n"));
}

#[test]
fn klm_and_rvar_studies_run() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("klm.csv");
    ok(&[
        "study",
        "klm",
        "--reps",
        "100",
        "--n",
        "250",
        "--m",
        "2",
        "--alternatives",
        "T3",
        "--csv",
        path(&csv),
    ]);
    let klm = fs::read_to_string(&csv).unwrap();
    assert!(klm.starts_with("test,alt,n,m,randomized,klm,delta,se_randomized,se_klm\n"));
    let plot = dir.path().join("plot.csv");
    ok(&[
        "study",
        "rvar",
        "--reps",
        "100",
        "--n",
        "250",
        "--m",
        "2",
        "--alternatives",
        "ST",
        "--betas",
        "0.01,0.001",
        "--plot-data",
        path(&plot),
    ]);
    let plot = fs::read_to_string(plot).unwrap();
    assert!(plot.starts_with("beta,test,alt,n,m,estimate\n"));
    assert!(plot.contains("0.001,nass,ST:3:1.2,250,2,"));
}

#[test]
fn bad_input_fails_cleanly() {
    let out = drmtest(&["cellprobs", "--measure", "nonsense", "--m", "1"]);
    assert!(!out.status.success());
    let out = drmtest(&["study", "dist", "--reps", "10"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("replications"));
    let out = drmtest(&["study", "klm", "--measure", "gluevar", "--reps", "100"]);
    assert!(!out.status.success());
}
