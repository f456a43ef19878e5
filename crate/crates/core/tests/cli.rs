use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn rydfit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rydfit")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn fit_line_on_fixture() {
    let o = rydfit(&["fit-line", path(&data("trace_33f_fm.csv")), "--model", "wahlquist"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["converged"], true);
    assert!((v["center_mhz"].as_f64().unwrap() - 236_429_214.0).abs() < 0.5);
}

#[test]
fn fit_line_writes_plot_and_out() {
    let dir = tempfile::tempdir().unwrap();
    let plot = dir.path().join("plot.csv");
    let out = dir.path().join("fit.json");
    let o = rydfit(&[
        "--out",
        path(&out),
        "fit-line",
        path(&data("trace_33f_fast.csv")),
        "--model",
        "lorentzian",
        "--plot",
        path(&plot),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert!((v["fwhm_mhz"].as_f64().unwrap() - 20.0).abs() < 0.4);
    let plot = fs::read_to_string(&plot).unwrap();
    assert!(plot.starts_with("freq_mhz,signal,model\n"));
    assert_eq!(plot.lines().count(), 10_001);
}

#[test]
fn missing_file_names_path() {
    let o = rydfit(&["fit-line", "/no/such/trace.csv"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/no/such/trace.csv"));
}

#[test]
fn malformed_trace_names_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.csv");
    let mut text = String::from("freq_mhz,signal\n");
    for i in 0..10 {
        text.push_str(&format!("{i},0.{i}\n"));
    }
    text.push_str("11,oops\n");
    fs::write(&p, text).unwrap();
    let o = rydfit(&["fit-line", path(&p)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 12"), "{}", stderr(&o));
}

#[test]
fn flat_trace_is_non_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("flat.csv");
    let mut text = String::from("freq_mhz,signal\n");
    for i in 0..40 {
        text.push_str(&format!("{},0.5\n", 236_429_000 + i));
    }
    fs::write(&p, text).unwrap();
    let o = rydfit(&["fit-line", path(&p)]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(json(&o)["converged"], false);
}

#[test]
fn reduce_fixture_reproduces_level_table() {
    let o = rydfit(&["reduce", path(&data("scan_sets.csv")), path(&data("error_budget.csv"))]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,energy_mhz,sigma_mhz"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[0], "33");
    assert!((first[1].parse::<f64>().unwrap() - 1_007_000_764.0).abs() <= 0.5);
    assert_eq!(first[2], "8.0");
    assert_eq!(text.lines().count(), 29);
}

#[test]
fn reduce_orders_by_n_and_rejects_single_scan() {
    let dir = tempfile::tempdir().unwrap();
    let sets = dir.path().join("sets.csv");
    fs::write(
        &sets,
        "n,center_mhz\n40,237395343\n33,236429214\n40,237395345\n33,236429216\n",
    )
    .unwrap();
    let o = rydfit(&["reduce", path(&sets), path(&data("error_budget.csv"))]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let ns: Vec<String> = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().to_string())
        .collect();
    assert_eq!(ns, ["33", "40"]);

    fs::write(&sets, "n,center_mhz\n33,236429214\n33,236429216\n41,237494542\n").unwrap();
    let o = rydfit(&["reduce", path(&sets), path(&data("error_budget.csv"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("n=41"), "{}", stderr(&o));
}

#[test]
fn empty_budget_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let b = dir.path().join("budget.csv");
    fs::write(&b, "label,value_mhz\n").unwrap();
    assert_eq!(rydfit(&["budget", path(&b)]).status.code(), Some(1));
    assert_eq!(
        rydfit(&["reduce", path(&data("scan_sets.csv")), path(&b)])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn budget_total() {
    let o = rydfit(&["budget", path(&data("error_budget.csv"))]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).lines().any(|l| l == "total,8.0"));
    let o = rydfit(&["--json", "budget", path(&data("error_budget.csv"))]);
    assert_eq!(json(&o)["total_mhz"], 8.0);
}

#[test]
fn fit_series_method3_and_per_level_plot() {
    let dir = tempfile::tempdir().unwrap();
    let plot = dir.path().join("levels.csv");
    let o = rydfit(&[
        "fit-series",
        path(&data("f_levels.csv")),
        "--method",
        "3",
        "--plot",
        path(&plot),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&o);
    assert!((v["e_ionisation_mhz"].as_f64().unwrap() - 1_010_024_717.0).abs() < 8.0);
    assert_eq!(v["per_level"].as_array().unwrap().len(), 28);
    let plot = fs::read_to_string(&plot).unwrap();
    assert!(plot.starts_with("n,E_meas_mhz,E_model_mhz,residual_mhz,effective_n,defect\n"));
    assert_eq!(plot.lines().count(), 29);
}

#[test]
fn fit_series_methods_1_and_2_agree() {
    let e = |m: &str| {
        let o = rydfit(&["fit-series", path(&data("f_levels.csv")), "--method", m, "--order", "3"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        json(&o)["e_ionisation_mhz"].as_f64().unwrap()
    };
    assert!((e("1") - e("2")).abs() < 1.0);
}

#[test]
fn fit_series_too_few_levels() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("three.csv");
    fs::write(&p, "n,energy_mhz\n33,1007000764\n34,1007176099\n35,1007336627\n").unwrap();
    let o = rydfit(&["fit-series", path(&p), "--method", "1", "--order", "3"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("at least 5"), "{}", stderr(&o));
}

#[test]
fn predict_from_fit_output() {
    let dir = tempfile::tempdir().unwrap();
    let fit_json = dir.path().join("fit.json");
    let o = rydfit(&[
        "--out",
        path(&fit_json),
        "fit-series",
        path(&data("f_levels.csv")),
        "--method",
        "3",
    ]);
    assert_eq!(o.status.code(), Some(0));

    let o = rydfit(&["predict", path(&fit_json), "--n", "105..120"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("n,E_pred_mhz\n"));
    let e: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(e.len(), 16);
    assert!(e.windows(2).all(|w| w[1] > w[0]));
    assert!(e.iter().all(|&x| x < 1_010_024_717.0 + 8.0));

    assert_eq!(rydfit(&["predict", path(&fit_json), "--n", "0"]).status.code(), Some(1));
}

#[test]
fn predict_from_bare_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("params.json");
    fs::write(
        &p,
        r#"{"e_ionisation": 1010024717.0, "method": "method3", "coefficients": [0.0164, 0.0]}"#,
    )
    .unwrap();
    let o = rydfit(&["predict", path(&p), "--n", "50"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let row = stdout(&o).lines().nth(1).unwrap().to_string();
    let e: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    assert!((e - 1_008_707_917.0).abs() < 10.0);
}

#[test]
fn config_file_applies_and_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        format!(
            "method = 1\norder = 2\noutput_dir = {}\n",
            dir.path().join("out").display()
        ),
    )
    .unwrap();
    let o = rydfit(&[
        "--config",
        path(&cfg),
        "--out",
        "fit.json",
        "fit-series",
        path(&data("f_levels.csv")),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/fit.json")).unwrap()).unwrap();
    assert_eq!(v["params"]["method"], "method1");
    assert_eq!(v["order"], 2);

    fs::write(&cfg, "colour = blue\n").unwrap();
    let o = rydfit(&["--config", path(&cfg), "budget", path(&data("error_budget.csv"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("colour"));
}

#[test]
fn outputs_are_deterministic() {
    let run = || {
        stdout(&rydfit(&[
            "fit-series",
            path(&data("f_levels.csv")),
            "--method",
            "1",
            "--closure",
            "self-consistent",
        ]))
    };
    assert_eq!(run(), run());
}

#[test]
fn pipeline_reduce_fit_predict() {
    let dir = tempfile::tempdir().unwrap();
    let levels = dir.path().join("levels.csv");
    let fit_json = dir.path().join("fit.json");
    let start = std::time::Instant::now();
    let o = rydfit(&[
        "--out",
        path(&levels),
        "reduce",
        path(&data("scan_sets.csv")),
        path(&data("error_budget.csv")),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let o = rydfit(&["--out", path(&fit_json), "fit-series", path(&levels), "--method", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let o = rydfit(&["predict", path(&fit_json), "--n", "85,90,95,100"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(start.elapsed().as_secs_f64() < 10.0);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&fit_json).unwrap()).unwrap();
    assert!((v["e_ionisation_mhz"].as_f64().unwrap() - 1_010_024_717.0).abs() < 8.0);
}
