use std::path::Path;
use std::process::{Command, Output};

fn distreg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_distreg")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = distreg(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn data_rows(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#') && !l.is_empty()).collect()
}

fn stderr_line(out: &Output) -> String {
    let err = String::from_utf8_lossy(&out.stderr).into_owned();
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    err.trim_end().to_string()
}

#[test]
fn gen_writes_one_row_per_training_item() {
    let text = ok(&["gen", "--kind", "1d", "--n-train", "200"]);
    assert!(text.starts_with("# seed="));
    let rows = data_rows(&text);
    assert_eq!(rows[0], "m,sigma,y");
    assert_eq!(rows.len(), 201);

    let text = ok(&["gen", "--kind", "2d", "--n-train", "7", "--seed", "3"]);
    assert_eq!(data_rows(&text)[0], "m1,m2,s11,s12,s22,y");
    assert_eq!(data_rows(&text).len(), 8);
}

#[test]
fn invalid_range_is_rejected_before_writing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.csv");
    let res = distreg(&["gen", "--sigma-range", "0,0.3", "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
    assert!(stderr_line(&res).starts_with("error[parameter]: "));
    assert!(!out.exists());
}

#[test]
fn unwritable_path_names_the_path() {
    let res = distreg(&["gen", "--n-train", "3", "--out", "/nonexistent-dir/x.csv"]);
    let line = stderr_line(&res);
    assert!(line.starts_with("error[io]: ") && line.contains("/nonexistent-dir/x.csv"), "{line}");
}

#[test]
fn bad_flags_are_usage_errors() {
    let res = distreg(&["table1", "--no-such-flag"]);
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr_line(&res).starts_with("error[usage]: "));
}

#[test]
fn table1_rows_and_metadata() {
    let text = ok(&[
        "table1", "--n-train", "40", "--n-test", "700", "--lambda-count", "3", "--l-count", "3", "--zeta-count", "3",
    ]);
    assert!(text.contains("n_test=700"));
    let rows = data_rows(&text);
    assert_eq!(rows[0], "model,params,rmse");
    let names: Vec<&str> = rows[1..].iter().map(|r| r.split(',').next().unwrap()).collect();
    assert_eq!(names, ["Wasserstein", "Legendre-5", "Legendre-10", "Histogram"]);
}

#[test]
fn table2_has_a_row_per_model_and_noise_level() {
    let small = ["--n-train", "30", "--n-test", "30", "--lambda-count", "2", "--l-count", "2", "--xi-count", "2", "--cs", "0,25"];
    let three = ok(&[&["table2"][..], &small].concat());
    assert_eq!(data_rows(&three).len(), 1 + 6);
    let one = ok(&[&["table2", "--noise-levels", "1"][..], &small].concat());
    let rows = data_rows(&one);
    assert_eq!(rows.len(), 1 + 2);
    assert!(rows[1].starts_with("Wasserstein2D,") && rows[2].starts_with("SlicedWasserstein2D,"));
}

#[test]
fn grid_single_cell_and_standard_sizes() {
    let single = ok(&[
        "grid", "--n-train", "20", "--n-test", "10", "--lambda-min", "5", "--lambda-max", "5", "--lambda-count", "1",
        "--l-min", "10", "--l-max", "10", "--l-count", "1",
    ]);
    assert!(single.contains("# best=gamma=1;H=1;l=10;lambda=5\n"));
    assert_eq!(data_rows(&single).len(), 2);

    let full = ok(&["grid", "--n-train", "20", "--n-test", "10"]);
    assert_eq!(data_rows(&full).len(), 1 + 750);
    assert!(full.contains("spacing=geometric"));

    let res = distreg(&["grid", "--family", "legendre", "--dimension", "2", "--n-train", "5"]);
    assert!(stderr_line(&res).starts_with("error[parameter]: "));
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn teoae_predicts_every_subject() {
    let dir = tempfile::tempdir().unwrap();
    let curves = dir.path().join("c.csv");
    let hist = dir.path().join("h.csv");
    ok(&["gen", "--kind", "teoae", "--out", curves.to_str().unwrap()]);
    let text = ok(&["teoae", "--input", curves.to_str().unwrap(), "--hist-out", hist.to_str().unwrap()]);
    let rows = data_rows(&text);
    assert_eq!(rows[0], "name,age,predicted_age,abs_error");
    assert_eq!(rows.len(), 1 + 48);
    let hist = std::fs::read_to_string(hist).unwrap();
    let counts: usize = data_rows(&hist)[1..]
        .iter()
        .map(|r| r.rsplit(',').next().unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(counts, 48);
}

#[test]
fn teoae_identical_curves_follow_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "c.csv", "name,age,v0,v1,v2\na,40,1,2,3\nb,40,0.5,1,1.5\nc,40,3,6,9\n");
    let text = ok(&["teoae", "--input", &input, "--lambda", "0.5", "--gamma", "2"]);
    // K is constant γ² = 4, so each prediction is a·(n−1)γ² / ((n−1)γ² + λ)
    let expected = 40.0 * 8.0 / 8.5;
    for row in &data_rows(&text)[1..4] {
        let pred: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
        assert!((pred - expected).abs() < 1e-4, "{row}");
    }
}

#[test]
fn teoae_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let one = write(dir.path(), "one.csv", "name,age,v0,v1\na,20,1,2\n");
    let res = distreg(&["teoae", "--input", &one]);
    assert!(stderr_line(&res).starts_with("error[domain]: "));

    let ragged = write(dir.path(), "r.csv", "# x\nname,age,v0,v1,v2\na,20,1,2,3\nb,30,1,2\n");
    let line = stderr_line(&distreg(&["teoae", "--input", &ragged]));
    assert!(line.starts_with("error[parse]: line 4"), "{line}");
    assert!(line.contains("2 values") && line.contains('3'), "{line}");

    let bad = write(dir.path(), "b.csv", "name,age,v0\na,twenty,1\n");
    let line = stderr_line(&distreg(&["teoae", "--input", &bad]));
    assert!(line.starts_with("error[parse]: line 2, column 2"), "{line}");

    let missing = dir.path().join("missing.csv");
    let line = stderr_line(&distreg(&["teoae", "--input", missing.to_str().unwrap()]));
    assert!(line.starts_with("error[io]: ") && line.contains("missing.csv"));
}
