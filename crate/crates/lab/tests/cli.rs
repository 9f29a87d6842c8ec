//! End-to-end runs of the `anderson-moments` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use anderson_lab::io::{read_rows, EventRow, Manifest, MomentRow};

fn bin(dir: &Path, args: &[&str], threads: Option<&str>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_anderson-moments"));
    c.args(args).arg("--output").arg(dir);
    match threads {
        Some(t) => c.env("ANDERSON_MOMENTS_THREADS", t),
        None => c.env_remove("ANDERSON_MOMENTS_THREADS"),
    };
    c.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn manifests(dir: &Path) -> Vec<Manifest> {
    fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| {
            let p = e.unwrap().path();
            p.to_string_lossy()
                .ends_with(".manifest.json")
                .then(|| serde_json::from_str(&fs::read_to_string(&p).unwrap()).unwrap())
        })
        .collect()
}

#[test]
fn constant_kernel_row_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(dir.path(), &["moments", "--kernel", "constant:1.0", "--H", "0.25", "--n", "2", "--t", "1", "--samples", "1"], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows: Vec<MomentRow> = read_rows(&dir.path().join("moments.csv")).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].log_moment, 1.0);
    assert_eq!(rows[0].stderr_log, 0.0);
    let m = manifests(dir.path());
    assert_eq!(m.len(), 1);
    assert!(m[0].success);
    assert_eq!(m[0].run_id, rows[0].run_id);
    assert_eq!(m[0].config_digest.len(), 64);
}

#[test]
fn reruns_are_bit_identical_across_thread_counts() {
    let args = ["moments", "--kernel", "fbm:0.75", "--H", "0.25", "--n", "2,3", "--t", "0.5,1", "--samples", "3000", "--K", "32", "--seed", "5", "--variant", "skorohod,stratonovich", "--x", "-0.25"];
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(bin(a.path(), &args, Some("1")).status.code(), Some(0));
    assert_eq!(bin(b.path(), &args, Some("3")).status.code(), Some(0));
    let ra: Vec<MomentRow> = read_rows(&a.path().join("moments.csv")).unwrap();
    let rb: Vec<MomentRow> = read_rows(&b.path().join("moments.csv")).unwrap();
    assert_eq!(ra.len(), 8);
    for (x, y) in ra.iter().zip(&rb) {
        assert_eq!(MomentRow { wall_time_s: 0.0, ..x.clone() }, MomentRow { wall_time_s: 0.0, ..y.clone() });
        assert_eq!(x.log_moment.to_bits(), y.log_moment.to_bits());
    }
    for pair in ra.chunks(2) {
        assert!(pair[0].log_moment <= pair[1].log_moment, "Skorohod above Stratonovich");
    }
    let (ma, mb) = (&manifests(a.path())[0], &manifests(b.path())[0]);
    assert_eq!(ma.run_id, mb.run_id);
    assert_ne!(ma.config_digest, mb.config_digest, "threads is a config field");
    assert_eq!((ma.threads, mb.threads), (1, 3));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"kernel":{"kind":"constant","sigma2":0.5},"H":0.4,"n":[3],"t":[2.0],"samples":2}"#).unwrap();
    let o = bin(dir.path(), &["moments", "--config", cfg.to_str().unwrap(), "--H", "0.25"], None);
    assert_eq!(o.status.code(), Some(0));
    let rows: Vec<MomentRow> = read_rows(&dir.path().join("moments.csv")).unwrap();
    let exact = 0.5 * 6.0 * 0.5 * 2f64.powf(0.5);
    assert!((rows[0].log_moment - exact).abs() <= 1e-12);
    assert_eq!(rows[0].h, 0.25);
}

#[test]
fn bounds_table_has_worked_example() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(dir.path(), &["bounds", "--H", "0.25", "--alpha", "0.5", "--d", "1", "--c1", "1", "--c2", "0", "--n", "4", "--t", "1", "--c-eps", "1"], None);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let value = |key: &str| -> String {
        out.lines()
            .find(|l| l.starts_with(key))
            .and_then(|l| l.split_whitespace().last())
            .unwrap_or_else(|| panic!("{key} missing from\n{out}"))
            .to_string()
    };
    assert_eq!(value("M0 [n=4 t=1]"), "0.125");
    assert_eq!(value("f(M0) [n=4 t=1]"), "1");
    assert_eq!(value("c3"), "16");
    for key in ["c1", "c2", "N", "n0(x)", "t0(x)", "exponent_n", "exponent_t"] {
        value(key);
    }
}

#[test]
fn fit_recovers_constant_kernel_time_slope() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(dir.path(), &["moments", "--kernel", "constant:1", "--H", "0.25", "--n", "2", "--t", "0.5,1,1.5,2", "--samples", "2"], None);
    assert_eq!(o.status.code(), Some(0));
    let csv = dir.path().join("moments.csv");
    let o = bin(dir.path(), &["fit", "--input", csv.to_str().unwrap(), "--mode", "t"], None);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let slope: f64 = out.lines().find(|l| l.starts_with("slope")).unwrap().split_whitespace().last().unwrap().parse().unwrap();
    assert!((slope - 0.5).abs() <= 1e-6, "{out}");
    assert!(out.contains("target     0.5"));

    // Two rows are not enough.
    let short = dir.path().join("short.csv");
    let text = fs::read_to_string(&csv).unwrap();
    fs::write(&short, text.lines().take(3).collect::<Vec<_>>().join("\n")).unwrap();
    let o = bin(dir.path(), &["fit", "--input", short.to_str().unwrap(), "--mode", "t"], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(bin(dir.path(), &["moments", "--kernel", "gauss:1"], None).status.code(), Some(64));
    assert_eq!(bin(dir.path(), &["moments", "--samples", "many"], None).status.code(), Some(64));
    assert_eq!(bin(dir.path(), &["frobnicate"], None).status.code(), Some(64));
    // Outside the desk-scale envelope.
    assert_eq!(bin(dir.path(), &["moments", "--n", "7", "--samples", "10"], None).status.code(), Some(2));
    // Rejected numerical precondition.
    assert_eq!(bin(dir.path(), &["moments", "--H", "0.7", "--samples", "10"], None).status.code(), Some(2));
    let o = bin(dir.path(), &["moments", "--n", "7", "--samples", "10", "--K", "8", "--allow-large", "--kernel", "constant:0.1"], None);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(bin(dir.path(), &["--version"], None).status.code(), Some(0));
}

#[test]
fn validate_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(dir.path(), &["validate"], None);
    let out = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{out}");
    assert!(out.lines().count() >= 10 && !out.contains("FAIL"), "{out}");
}

#[test]
fn events_and_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(dir.path(), &["events", "--K", "64", "--samples", "2000", "--M", "2", "--x-j", "0.2", "--r-nodes", "16", "--c-eps-samples", "2000", "--grid-check"], None);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let rows: Vec<EventRow> = read_rows(&dir.path().join("events.csv")).unwrap();
    assert!(rows.iter().any(|r| r.event == "inclusions" && r.p_hat == 0.0));
    assert!(rows.iter().any(|r| r.event == "A1" && r.steps == 128));
    assert!(rows.iter().all(|r| r.pass));

    let o = bin(dir.path(), &["moments", "--n", "3", "--samples", "10", "--K", "8", "--dump-paths", "2", "--dump-gram", "2"], None);
    assert_eq!(o.status.code(), Some(0));
    let paths = fs::read_to_string(dir.path().join("paths.csv")).unwrap();
    assert!(paths.starts_with("sample,coord,time,value\n"));
    assert_eq!(paths.lines().count(), 1 + 6 * 9);
    let gram = fs::read_to_string(dir.path().join("gram.csv")).unwrap();
    assert_eq!(gram.lines().count(), 1 + 2 * 9);
}

#[test]
fn solution_draws() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(dir.path(), &["solution", "--t", "0.5", "--K", "16", "--draws", "50", "--inner-samples", "50", "--z-nodes", "81"], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("solution.csv")).unwrap();
    assert_eq!(text.lines().count(), 51);
    assert!(stdout(&o).contains("E[u]"));
}
