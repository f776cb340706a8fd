use std::path::Path;
use std::process::{Command, Output};

use resetctl_cli::table::Table;

fn resetctl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_resetctl"))
        .args(args)
        .env_remove("RESETCTL_OUT")
        .output()
        .expect("binary runs")
}

fn csv_files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    v.sort();
    v
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn hosidf_defaults_write_eight_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("h");
    let o = resetctl(&["hosidf", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let files = csv_files(&out);
    assert_eq!(files.len(), 8, "{files:?}");
    for seq in 1..=4 {
        for n in [1, 3] {
            assert!(files.contains(&format!("hosidf_seq{seq}_n{n}.csv")));
        }
    }
    let t = Table::read(&out.join("hosidf_seq1_n1.csv")).unwrap();
    assert_eq!(t.header, ["freq_hz", "re", "im", "mag_db", "phase_deg"]);
    assert_eq!(t.rows.len(), 801);
    // written tables parse back to the same bits and re-serialize identically
    let text = std::fs::read_to_string(out.join("hosidf_seq2_n3.csv")).unwrap();
    assert_eq!(Table::from_csv(&text).unwrap().to_csv(), text);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[sim]\nsettle_periods = 4\nmeasure_periods = 2\nrepetitions = 2\nfmin_hz = 5.0\nfmax_hz = 40.0\npoints = 3\n",
    );
    let run = |name: &str| {
        let out = tmp.path().join(name);
        let o = resetctl(&[
            "sensitivity",
            "--config",
            &cfg,
            "--noise-pct",
            "1",
            "--seed",
            "7",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let (a, b) = (run("a"), run("b"));
    for f in ["sensitivity.csv", "run_info.txt"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let t = Table::read(&a.join("sensitivity.csv")).unwrap();
    assert_eq!(t.rows.len(), 12);
}

#[test]
fn step_writes_series_and_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[sim]\nstep_duration_s = 0.2\n[output]\nplots = true\n",
    );
    let out = tmp.path().join("s");
    let o = resetctl(&[
        "step",
        "--config",
        &cfg,
        "--sequence",
        "1,3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        csv_files(&out),
        ["step_metrics.csv", "step_seq1.csv", "step_seq3.csv"]
    );
    assert!(out.join("step.svg").exists());
    let m = Table::read(&out.join("step_metrics.csv")).unwrap();
    assert_eq!(m.rows.len(), 2);
    let s = Table::read(&out.join("step_seq1.csv")).unwrap();
    assert_eq!(s.header, ["time_s", "y", "u", "e"]);
    assert_eq!(s.rows.len(), 4000);
}

#[test]
fn compare_ranks_every_sequence() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[sim]\nsettle_periods = 4\nmeasure_periods = 2\n",
    );
    let out = tmp.path().join("c");
    let o = resetctl(&["compare", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rank = Table::read(&out.join("compare_rank.csv")).unwrap();
    assert_eq!(rank.rows.len(), 20);
    for chunk in rank.rows.chunks(4) {
        let mut r: Vec<i64> = chunk.iter().map(|row| row[2].as_f64() as i64).collect();
        r.sort();
        assert_eq!(r, [1, 2, 3, 4]);
    }
    let info = std::fs::read_to_string(out.join("run_info.txt")).unwrap();
    assert!(info.contains("kp_used="));
    assert!(info.contains("noise_pct=tabulated"));
}

#[test]
fn config_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[sim]\nbogus = 1\n");
    let out = tmp.path().join("x");
    assert_eq!(
        resetctl(&["hosidf", "--config", &cfg, "--out", out.to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        resetctl(&["hosidf", "--sequence", "5"]).status.code(),
        Some(1)
    );
    assert_eq!(
        resetctl(&["hosidf", "--no-such-flag"]).status.code(),
        Some(1)
    );
    let cfg = write_config(
        tmp.path(),
        "[plant]\nnum = [1.0, 0.0, 0.0]\nden = [1.0, 1.0]\n",
    );
    assert_eq!(
        resetctl(&["hosidf", "--config", &cfg, "--out", out.to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn numerical_failure_exits_with_two() {
    // the configured gain used as is destabilizes the loop
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[controller]\nkp_mode = \"fixed\"\n[sim]\nstep_duration_s = 0.5\n",
    );
    let out = tmp.path().join("n");
    let o = resetctl(&[
        "step",
        "--config",
        &cfg,
        "--sequence",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn io_failure_exits_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let out = blocker.join("sub");
    assert_eq!(
        resetctl(&["hosidf", "--out", out.to_str().unwrap()])
            .status
            .code(),
        Some(3)
    );
    let missing = tmp.path().join("missing.toml");
    assert_eq!(
        resetctl(&["hosidf", "--config", missing.to_str().unwrap()])
            .status
            .code(),
        Some(3)
    );
}
