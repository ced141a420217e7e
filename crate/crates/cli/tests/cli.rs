//! End-to-end tests of the `spod` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use spod_cli::{matrix_to_bytes, read_matrix, read_summary};

fn spod() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spod"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("failed to launch spod");
    assert!(
        out.status.success(),
        "command failed: {:?}\nstdout: {}\nstderr: {}",
        cmd,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn exit_code(cmd: &mut Command) -> i32 {
    cmd.output().expect("failed to launch spod").status.code().unwrap_or(-1)
}

fn generate(dir: &Path, spec: &str, extra: &[&str]) {
    run_ok(
        spod()
            .arg("generate")
            .arg(spec)
            .arg("--out")
            .arg(dir)
            .args(extra),
    );
}

#[test]
fn generate_writes_benchmark_files() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    generate(dir, "multilinear", &[]);

    let q = read_matrix(&dir.join("Q.matrix")).unwrap();
    assert_eq!(q.dim(), (400, 200));
    for k in 1..=2 {
        let text = fs::read_to_string(dir.join(format!("shifts_{k}.txt"))).unwrap();
        assert_eq!(text.lines().count(), 200);
    }
    let truth = fs::read_to_string(dir.join("truth.txt")).unwrap();
    assert!(truth.contains("ranks=4,2"));
    assert!(truth.contains("noise_count=0"));

    // binary round trip is byte-identical
    let bytes = fs::read(dir.join("Q.matrix")).unwrap();
    assert_eq!(matrix_to_bytes(q.view()), bytes);
}

#[test]
fn generate_is_deterministic_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        generate(dir, "sine_noise", &["--seed", "7"]);
    }
    for name in ["Q.matrix", "shifts_1.txt", "shifts_2.txt", "truth.txt"] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name} differs between identically seeded runs"
        );
    }
}

#[test]
fn generate_noise_override_gives_clean_variant() {
    let tmp = tempfile::tempdir().unwrap();
    generate(tmp.path(), "sine_noise", &["--noise", "0"]);
    let truth = fs::read_to_string(tmp.path().join("truth.txt")).unwrap();
    assert!(truth.contains("noise_count=0"));
}

#[test]
fn decompose_max_iter_one_writes_single_history_row() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let out = tmp.path().join("run");
    generate(&data, "multilinear", &[]);
    run_ok(
        spod()
            .arg("decompose")
            .args(["--method", "jfb", "--lambda", "0.3", "--max-iter", "1"])
            .arg("--input")
            .arg(data.join("Q.matrix"))
            .arg("--shifts")
            .arg(data.join("shifts_1.txt"))
            .arg("--shifts")
            .arg(data.join("shifts_2.txt"))
            .arg("--out")
            .arg(&out),
    );
    let history = fs::read_to_string(out.join("history.csv")).unwrap();
    let lines: Vec<&str> = history.lines().collect();
    assert_eq!(lines.len(), 2, "header plus exactly one row:\n{history}");
    assert_eq!(
        lines[0],
        "iteration,objective,rel_error,rank_1,rank_2,noise_l1,seconds"
    );
    for name in ["frame_1.matrix", "frame_2.matrix", "E.matrix", "spectra.txt",
                 "manifest.json", "summary.json"] {
        assert!(out.join(name).exists(), "{name} missing");
    }
}

#[test]
fn decompose_jfb_history_objective_is_non_increasing() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let out = tmp.path().join("run");
    generate(&data, "multilinear", &[]);
    run_ok(
        spod()
            .arg("decompose")
            .args(["--method", "jfb", "--lambda", "0.3", "--max-iter", "40"])
            .arg("--input")
            .arg(data.join("Q.matrix"))
            .arg("--shifts")
            .arg(data.join("shifts_1.txt"))
            .arg("--shifts")
            .arg(data.join("shifts_2.txt"))
            .arg("--out")
            .arg(&out),
    );
    let history = fs::read_to_string(out.join("history.csv")).unwrap();
    let objectives: Vec<f64> = history
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(objectives.len(), 40);
    for pair in objectives.windows(2) {
        assert!(pair[1] <= pair[0], "objective increased: {pair:?}");
    }
}

#[test]
fn decompose_alm_matches_reference_error_and_ranks() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let out = tmp.path().join("run");
    generate(&data, "multilinear", &[]);
    run_ok(
        spod()
            .arg("decompose")
            .args(["--method", "alm"])
            .arg("--input")
            .arg(data.join("Q.matrix"))
            .arg("--shifts")
            .arg(data.join("shifts_1.txt"))
            .arg("--shifts")
            .arg(data.join("shifts_2.txt"))
            .arg("--out")
            .arg(&out),
    );
    let summary = read_summary(&out.join("summary.json")).unwrap();
    assert!(summary.relative_error <= 1e-4, "rel_error = {}", summary.relative_error);
    assert_eq!(summary.ranks, vec![4, 2]);

    // final history row agrees with the summary
    let history = fs::read_to_string(out.join("history.csv")).unwrap();
    let last = history.lines().last().unwrap();
    let cells: Vec<&str> = last.split(',').collect();
    let rel: f64 = cells[2].parse().unwrap();
    assert!((rel - summary.relative_error).abs() <= 1e-12 * (1.0 + rel));
    assert_eq!(cells[3], "4");
    assert_eq!(cells[4], "2");
}

#[test]
fn manifest_replay_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let (run1, run2) = (tmp.path().join("run1"), tmp.path().join("run2"));
    generate(&data, "multilinear", &[]);
    let base_args = |out: &Path| {
        let mut cmd = spod();
        cmd.arg("decompose")
            .args(["--method", "bfb", "--lambda", "0.3", "--max-iter", "5"])
            .arg("--input")
            .arg(data.join("Q.matrix"))
            .arg("--shifts")
            .arg(data.join("shifts_1.txt"))
            .arg("--shifts")
            .arg(data.join("shifts_2.txt"))
            .arg("--out")
            .arg(out);
        cmd
    };
    run_ok(&mut base_args(&run1));
    run_ok(
        spod()
            .arg("decompose")
            .arg("--manifest")
            .arg(run1.join("manifest.json"))
            .arg("--out")
            .arg(&run2),
    );
    let s1 = read_summary(&run1.join("summary.json")).unwrap();
    let s2 = read_summary(&run2.join("summary.json")).unwrap();
    assert!(
        (s1.relative_error - s2.relative_error).abs() <= 1e-12 * (1.0 + s1.relative_error),
        "replay drifted: {} vs {}",
        s1.relative_error,
        s2.relative_error
    );
    assert_eq!(s1.ranks, s2.ranks);
    assert_eq!(s1.iterations, s2.iterations);
    assert_eq!(s1.method, s2.method);

    // frame files are byte-identical
    assert_eq!(
        fs::read(run1.join("frame_1.matrix")).unwrap(),
        fs::read(run2.join("frame_1.matrix")).unwrap()
    );
}

#[test]
fn report_tabulates_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    generate(&data, "multilinear", &[]);
    let mut runs = Vec::new();
    for (i, method) in ["jfb", "bfb"].iter().enumerate() {
        let out = tmp.path().join(format!("run{i}"));
        run_ok(
            spod()
                .arg("decompose")
                .args(["--method", method, "--lambda", "0.3", "--max-iter", "3"])
                .args(["--label", "multilinear"])
                .arg("--input")
                .arg(data.join("Q.matrix"))
                .arg("--shifts")
                .arg(data.join("shifts_1.txt"))
                .arg("--shifts")
                .arg(data.join("shifts_2.txt"))
                .arg("--out")
                .arg(&out),
        );
        runs.push(out);
    }
    let report_dir = tmp.path().join("report");
    let out = run_ok(
        spod()
            .arg("report")
            .args(&runs)
            .arg("--out")
            .arg(&report_dir),
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().count(), 3, "header + two rows:\n{stdout}");
    assert!(stdout.contains("jfb") && stdout.contains("bfb"));
    let csv = fs::read_to_string(report_dir.join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(report_dir.join("report.txt").exists());
}

#[test]
fn out_dir_env_variable_is_the_default() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("from-env");
    run_ok(
        spod()
            .arg("generate")
            .arg("multilinear")
            .env("SPOD_OUT_DIR", &dir),
    );
    assert!(dir.join("Q.matrix").exists());
}

#[test]
fn error_exit_codes_are_distinct() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    generate(&data, "multilinear", &[]);

    // usage errors -> 2
    assert_eq!(exit_code(spod().arg("generate").arg("nonsense")), 2);
    assert_eq!(exit_code(spod().arg("report")), 2);
    assert_eq!(
        exit_code(
            spod()
                .arg("decompose")
                .args(["--method", "nonsense"])
                .arg("--input")
                .arg(data.join("Q.matrix"))
                .arg("--shifts")
                .arg(data.join("shifts_1.txt"))
        ),
        2
    );
    // shape mismatch between Q and shifts -> usage error
    let short = tmp.path().join("short.txt");
    fs::write(&short, "1.0\n2.0\n").unwrap();
    assert_eq!(
        exit_code(
            spod()
                .arg("decompose")
                .arg("--input")
                .arg(data.join("Q.matrix"))
                .arg("--shifts")
                .arg(&short)
                .arg("--out")
                .arg(tmp.path().join("x"))
        ),
        2
    );
    // missing input file -> i/o error 3
    assert_eq!(
        exit_code(
            spod()
                .arg("decompose")
                .arg("--input")
                .arg(data.join("missing.matrix"))
                .arg("--shifts")
                .arg(data.join("shifts_1.txt"))
        ),
        3
    );
}

#[test]
fn csv_importer_feeds_decompose() {
    let tmp = tempfile::tempdir().unwrap();
    // 8 x 4 rank-1 matrix, zero shifts
    let mut csv = String::new();
    for i in 0..8 {
        let row: Vec<String> = (0..4).map(|j| format!("{}", (i + 1) as f64 * (j + 1) as f64)).collect();
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    let input = tmp.path().join("q.csv");
    fs::write(&input, csv).unwrap();
    let shifts = tmp.path().join("shifts.txt");
    fs::write(&shifts, "0\n0\n0\n0\n").unwrap();
    let out = tmp.path().join("run");
    run_ok(
        spod()
            .arg("decompose")
            .args(["--method", "jfb", "--lambda", "0.01", "--max-iter", "50"])
            .arg("--input")
            .arg(&input)
            .arg("--shifts")
            .arg(&shifts)
            .arg("--out")
            .arg(&out),
    );
    let summary = read_summary(&out.join("summary.json")).unwrap();
    assert_eq!(summary.ranks, vec![1]);
    assert!(summary.relative_error <= 1e-2);
}
