use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn simnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_simnet"))
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn generate(dir: &Path) -> std::path::PathBuf {
    let data = dir.join("samples.jsonl");
    let out = simnet(&[
        "generate",
        "--families",
        "3",
        "--per-family",
        "6",
        "--seed",
        "4",
        "--out",
        s(&data),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    data
}

#[test]
fn generate_then_ingest() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path());
    assert_eq!(fs::read_to_string(&data).unwrap().lines().count(), 18);
    let out = simnet(&["ingest", "--dataset", s(&data)]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("family02"));
    assert!(stdout.contains("18"));
}

#[test]
fn run_writes_artifacts_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path());
    let out_dir = dir.path().join("out");
    let cache = dir.path().join("tensor.bin");
    let args = [
        "run",
        "--dataset",
        s(&data),
        "--threshold",
        "60",
        "--iterations",
        "40",
        "--k",
        "3",
        "--seed",
        "2",
        "--cache",
        s(&cache),
        "--out",
        s(&out_dir),
    ];
    let first = simnet(&args);
    assert_eq!(
        first.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    assert!(String::from_utf8_lossy(&first.stdout).contains("accuracy"));
    let names = [
        "report.json",
        "report.txt",
        "graph.json",
        "graph.dot",
        "trace.jsonl",
    ];
    let before: Vec<Vec<u8>> = names
        .iter()
        .map(|n| fs::read(out_dir.join(n)).unwrap())
        .collect();
    assert!(cache.exists());
    assert_eq!(simnet(&args).status.code(), Some(0));
    for (n, b) in names.iter().zip(before) {
        assert_eq!(fs::read(out_dir.join(n)).unwrap(), b, "{n} differs");
    }
}

#[test]
fn export_document_shape() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path());
    let graph = dir.path().join("g").join("graph.json");
    let out = simnet(&[
        "export",
        "--dataset",
        s(&data),
        "--threshold",
        "0.6",
        "--out",
        s(&graph),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let doc =
        simnet::export::GraphDocument::from_json(&fs::read_to_string(&graph).unwrap()).unwrap();
    assert_eq!(doc.nodes.len(), 18);
    assert!(graph.with_extension("dot").exists());
}

#[test]
fn subcommands_run() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path());
    let cache = dir.path().join("t.bin");
    let d = s(&data);
    for args in [
        vec!["similarity", "--dataset", d, "--cache", s(&cache)],
        vec![
            "cluster",
            "--dataset",
            d,
            "--cache",
            s(&cache),
            "--threshold",
            "70",
            "--weights",
            "0.7,0.1,0.1,0.1",
        ],
        vec![
            "optimize",
            "--dataset",
            d,
            "--iterations",
            "10",
            "--threshold",
            "70",
        ],
        vec![
            "crossval",
            "--dataset",
            d,
            "--iterations",
            "5",
            "--k",
            "3",
            "--threshold",
            "0.70",
        ],
        vec![
            "sweep",
            "--dataset",
            d,
            "--iterations",
            "5",
            "--from",
            "80",
            "--to",
            "90",
            "--step",
            "5",
        ],
        vec![
            "sweep",
            "--dataset",
            d,
            "--iterations",
            "5",
            "--from",
            "80",
            "--to",
            "85",
            "--step",
            "5",
            "--k",
            "3",
        ],
    ] {
        let out = simnet(&args);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(simnet(&["--help"]).status.code(), Some(0));
    assert_eq!(simnet(&["--version"]).status.code(), Some(0));
    assert_eq!(simnet(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(simnet(&["ingest"]).status.code(), Some(1));

    let missing = dir.path().join("absent.jsonl");
    let out = simnet(&["run", "--dataset", s(&missing), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(
        err.contains("ingest") && err.contains("absent.jsonl"),
        "{err}"
    );

    let bad = dir.path().join("bad.jsonl");
    fs::write(&bad, "{\"id\": \"x\", \"family\": \"f\"}\n").unwrap();
    assert_eq!(
        simnet(&["ingest", "--dataset", s(&bad)]).status.code(),
        Some(2)
    );
    assert_eq!(
        simnet(&["ingest", "--dataset", s(&bad), "--skip-invalid"])
            .status
            .code(),
        Some(0)
    );

    let data = generate(dir.path());
    assert_eq!(
        simnet(&["cluster", "--dataset", s(&data), "--threshold", "101"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        simnet(&["cluster", "--dataset", s(&data), "--weights", "1,1"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        simnet(&["crossval", "--dataset", s(&data), "--k", "7"])
            .status
            .code(),
        Some(3)
    );
}
