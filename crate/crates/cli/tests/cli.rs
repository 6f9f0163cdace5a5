use std::process::{Command, Output};

fn fram(args: &[&str], envs: &[(&str, &std::path::Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fram"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

#[test]
fn select_passes_and_prints_a_table() {
    let out = fram(
        &[
            "select",
            "--n",
            "500",
            "--trials",
            "3",
            "--delta",
            "8",
            "--adversary",
            "targeted:0.01",
        ],
        &[],
    );
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.matches("PASS").count(), 3);
    assert!(text.contains("pass_rate=1.0000"));
}

#[test]
fn json_output_is_machine_readable() {
    let out = fram(
        &[
            "sort",
            "--n",
            "256",
            "--delta",
            "4",
            "--variant",
            "rand",
            "--trials",
            "2",
            "--json",
            "-",
        ],
        &[],
    );
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["pass_rate"], 1.0);
    assert_eq!(v["trials"].as_array().unwrap().len(), 2);
    assert_eq!(v["trials"][0]["extra_cells"], 0);
}

#[test]
fn bad_arguments_exit_with_usage_error() {
    assert_eq!(
        fram(&["select", "--adversary", "meteor"], &[])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        fram(&["select", "--n", "10", "--k", "11"], &[])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        fram(&["sort", "--n", "10", "--delta-unknown"], &[])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        fram(&["bench", "--sizes", "100"], &[]).status.code(),
        Some(2)
    );
}

#[test]
fn kdtree_reads_points_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("points.csv");
    let rows: String = (0..200)
        .map(|i| format!("{},{}\n", i * 7 % 101, i * 13 % 97))
        .collect();
    std::fs::write(&path, rows).unwrap();
    let input = format!("file:{}", path.display());
    let out = fram(
        &[
            "kdtree",
            "--input",
            &input,
            "--delta",
            "2",
            "--queries",
            "30",
            "--csv",
            "-",
        ],
        &[],
    );
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let row = text.lines().nth(1).unwrap();
    assert!(row.starts_with("0,") && row.ends_with(",true"));
    assert!(row.split(',').nth(2) == Some("200"));
}

#[test]
fn kdtree_reads_binary_points() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("points.bin");
    let bytes: Vec<u8> = (0..300i64)
        .flat_map(|i| [i, 1000 - i])
        .flat_map(i64::to_le_bytes)
        .collect();
    std::fs::write(&path, bytes).unwrap();
    let input = format!("file:{}", path.display());
    assert!(fram(&["kdtree", "--input", &input, "--build-only"], &[])
        .status
        .success());
}

#[test]
fn traces_go_to_the_configured_directory() {
    let dir = tempfile::tempdir().unwrap();
    let traces = dir.path().join("t");
    let out = fram(
        &[
            "split",
            "--n",
            "64",
            "--delta",
            "2",
            "--adversary",
            "uniform:0.01",
            "--trials",
            "2",
            "--trace",
        ],
        &[("FRAM_TRACE_DIR", &traces)],
    );
    assert!(out.status.success());
    let files: Vec<_> = std::fs::read_dir(&traces).unwrap().collect();
    assert_eq!(files.len(), 2);
    let first = std::fs::read_to_string(files[0].as_ref().unwrap().path()).unwrap();
    let event: serde_json::Value = serde_json::from_str(first.lines().next().unwrap()).unwrap();
    assert!(event.get("step").is_some());
}

#[test]
fn bench_reports_a_spread() {
    let out = fram(
        &[
            "bench",
            "--algorithm",
            "split",
            "--sizes",
            "1000,4000",
            "--trials",
            "2",
        ],
        &[],
    );
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("spread"));
}
