use std::path::Path;
use std::process::{Command, Output};

fn vsdp(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vsdp"))
        .args(args)
        .current_dir(dir)
        .env_remove("VSDP_THREADS")
        .output()
        .unwrap()
}

fn fixture(name: &str) -> String {
    format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn sweep_writes_csv_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let o = vsdp(
        &["sweep", &fixture("tiny_sweep.conf"), "--out-csv", "out.csv", "--out-plot", "out.svg", "--threads", "2"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("out.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("preset,ebn0_db,detector,bits,errors,ber,iters,gap,seed\n"));
    let svg = std::fs::read_to_string(dir.path().join("out.svg")).unwrap();
    assert!(svg.contains("<polyline"));

    // The environment variable and the flag select threads, never results.
    let o = Command::new(env!("CARGO_BIN_EXE_vsdp"))
        .args(["sweep", &fixture("tiny_sweep.conf"), "--out-csv", "env.csv"])
        .current_dir(dir.path())
        .env("VSDP_THREADS", "1")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(dir.path().join("env.csv")).unwrap(), csv);

    let o = vsdp(&["sweep", &fixture("tiny_sweep.conf"), "--out-csv", "seed.csv", "--seed", "4"], dir.path());
    assert!(o.status.success());
    assert_ne!(std::fs::read_to_string(dir.path().join("seed.csv")).unwrap(), csv);
}

#[test]
fn sweep_failures_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let o = vsdp(&["sweep", "missing.conf", "--out-csv", "x.csv"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("missing.conf"), "{}", stderr(&o));

    std::fs::write(dir.path().join("bad.conf"), "nb = 4\nwibble = 2\n").unwrap();
    let o = vsdp(&["sweep", "bad.conf", "--out-csv", "x.csv"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));

    let o = vsdp(&["sweep", &fixture("tiny_sweep.conf")], dir.path());
    assert!(!o.status.success(), "no output path given");

    let o = Command::new(env!("CARGO_BIN_EXE_vsdp"))
        .args(["sweep", &fixture("tiny_sweep.conf"), "--out-csv", "x.csv"])
        .current_dir(dir.path())
        .env("VSDP_THREADS", "many")
        .output()
        .unwrap();
    assert!(!o.status.success());
    assert!(stderr(&o).contains("VSDP_THREADS"));
}

#[test]
fn simulate_then_demod() {
    let dir = tempfile::tempdir().unwrap();
    let o = vsdp(
        &["simulate", "--preset", "cm1", "--seed", "5", "--out-system", "blk.sys", "--out-channel", "ch.txt"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let sent = stdout(&o).trim().strip_prefix("sent ").unwrap().to_string();
    assert_eq!(sent.split_whitespace().count(), 10);

    let o = vsdp(&["demod", "blk.sys", "--ml", "--gap-tol", "1e-9", "--max-iter", "30000", "--trace", "t.tsv"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains(&format!("sdp {sent}\n")), "{out}");
    assert!(out.contains(&format!("ml {sent}\n")), "{out}");
    let trace = std::fs::read_to_string(dir.path().join("t.tsv")).unwrap();
    assert!(trace.lines().count() >= 2);
}

#[test]
fn demod_reads_the_fixture_system() {
    let dir = tempfile::tempdir().unwrap();
    let o = vsdp(&["demod", &fixture("two_symbols.sys"), "--ml"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("ml +1 -1\n"));

    std::fs::write(dir.path().join("short.sys"), "2 2 3\n1 1 1\n").unwrap();
    let o = vsdp(&["demod", "short.sys"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error:"));
}

#[test]
fn plot_subcommand_and_bad_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = vsdp(&["plot", &fixture("small.csv"), "p.svg"], dir.path());
    assert!(o.status.success());
    assert_eq!(
        std::fs::read_to_string(dir.path().join("p.svg")).unwrap(),
        std::fs::read_to_string(fixture("small.svg")).unwrap()
    );
    std::fs::write(dir.path().join("bad.csv"), "nope\n").unwrap();
    let o = vsdp(&["plot", "bad.csv", "q.svg"], dir.path());
    assert!(!o.status.success());
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = vsdp(&["selftest"], dir.path());
    assert!(o.status.success(), "{}", stdout(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().filter(|l| l.starts_with("PASS ")).count(), 7, "{out}");
    assert!(!out.contains("FAIL"));
}
