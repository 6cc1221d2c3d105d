use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smoothmax")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn sample_is_seeded_csv() {
    let args = ["sample", "--p", "1", "--q", "inf", "--delta", "0.5", "--n", "20", "--seed", "3"];
    let a = run(&args);
    assert!(a.status.success());
    let text = stdout(&a);
    assert_eq!(text.lines().next(), Some("x,y"));
    assert_eq!(text.lines().count(), 21);
    assert_eq!(text, stdout(&run(&args)));
}

#[test]
fn maxima_and_density_print_json() {
    let o = run(&["maxima", "--p", "2", "--q", "2", "--delta", "0.1", "--n", "500", "--seed", "1"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["count"].as_u64().unwrap() as usize, v["maxima"].as_array().unwrap().len());

    let o = run(&["density", "--p", "inf", "--q", "inf", "--delta", "0.1", "--x", "0", "--y", "-0"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["density"].as_f64().unwrap() - 0.25).abs() < 1e-9, "{v}");
}

#[test]
fn bad_input_is_rejected() {
    assert!(!run(&["sample", "--p", "0.5", "--q", "2", "--n", "5"]).status.success());
    assert!(!run(&["density", "--p", "2", "--q", "2", "--delta", "0", "--x", "0", "--y", "0"]).status.success());
    assert!(!run(&["experiment", "--p", "2", "--q", "2", "--delta", "1", "--n", "64,128", "--reps", "5"])
        .status
        .success());
}

#[test]
fn witness_passes() {
    let o = run(&["witness", "--family", "b2b2", "--delta", "1", "--n", "4096", "--samples", "20000"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("\"pass\": true"));
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap()
}

#[test]
fn experiment_then_report_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("run");
    let o = run(&[
        "experiment", "--p", "1", "--q", "1", "--delta", "1", "--n", "256,512,1024,2048", "--reps", "40", "--seed",
        "2", "--out", first.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["records.csv", "fits.json", "verdicts.json", "plot_1_1_d1.csv"] {
        assert!(first.join(f).exists(), "{f}");
    }

    let second = tmp.path().join("again");
    let records = first.join("records.csv");
    let o = run(&["report", records.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["records.csv", "fits.json", "verdicts.json", "plot_1_1_d1.csv"] {
        assert_eq!(read(&first, f), read(&second, f), "{f}");
    }

    let o = run(&["fit", records.to_str().unwrap(), "--p", "1", "--q", "1", "--delta", "1"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v.to_string().contains("slope"));
}
