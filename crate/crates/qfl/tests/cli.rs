use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output};

use flate2::write::GzEncoder;
use flate2::Compression;

const LABELS: [u8; 5] = [2, 5, 1, 3, 7];

fn idx_images(n: usize) -> Vec<u8> {
    let mut b = vec![0, 0, 8, 3];
    for d in [n as u32, 28, 28] {
        b.extend(d.to_be_bytes());
    }
    b.extend((0..n * 784).map(|i| ((i * 37 + i / 784 * 11) % 256) as u8));
    b
}

fn idx_labels(n: usize) -> Vec<u8> {
    let mut b = vec![0, 0, 8, 1];
    b.extend((n as u32).to_be_bytes());
    b.extend((0..n).map(|i| LABELS[i % LABELS.len()]));
    b
}

fn gz(bytes: &[u8]) -> Vec<u8> {
    let mut e = GzEncoder::new(Vec::new(), Compression::fast());
    e.write_all(bytes).unwrap();
    e.finish().unwrap()
}

fn fake_mnist(dir: &Path) {
    fs::create_dir_all(dir).unwrap();
    fs::write(dir.join("train-images-idx3-ubyte.gz"), gz(&idx_images(50))).unwrap();
    fs::write(dir.join("train-labels-idx1-ubyte.gz"), gz(&idx_labels(50))).unwrap();
    fs::write(dir.join("t10k-images-idx3-ubyte"), idx_images(20)).unwrap();
    fs::write(dir.join("t10k-labels-idx1-ubyte"), idx_labels(20)).unwrap();
}

fn qfl(args: &[&str], data: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qfl"))
        .args(args)
        .args([
            "--grid",
            "2x2",
            "--depth",
            "1",
            "--participants",
            "2",
            "--epochs",
            "3",
            "--skip-count-check",
        ])
        .arg("--data-dir")
        .arg(data)
        .arg("--output-dir")
        .arg(out)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_writes_outputs_and_repeats_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("mnist");
    fake_mnist(&data);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let o = qfl(&["run", "--seed", "4", "--optimizer", "fqngd"], &data, out);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in [
        "history.csv",
        "timing.csv",
        "result.json",
        "config.echo",
        "circuit.txt",
        "params.bin",
    ] {
        assert!(a.join(f).is_file(), "missing {f}");
    }
    let history = fs::read_to_string(a.join("history.csv")).unwrap();
    let mut lines = history.lines();
    assert_eq!(lines.next().unwrap(), "epoch,train_loss,test_accuracy,loss_p0,loss_p1");
    assert_eq!(lines.count(), 3);
    assert_eq!(history, fs::read_to_string(b.join("history.csv")).unwrap());
    assert_eq!(
        fs::read(a.join("params.bin")).unwrap(),
        fs::read(b.join("params.bin")).unwrap()
    );

    let params = qfl::params_file::decode(&fs::read(a.join("params.bin")).unwrap()).unwrap();
    assert_eq!(params.len(), 12);
    let result: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("result.json")).unwrap()).unwrap();
    assert_eq!(result["optimizer"], "fqngd");
    assert_eq!(result["param_count"], 12);
}

#[test]
fn sweep_writes_comparison_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("mnist");
    fake_mnist(&data);
    let out = tmp.path().join("sweep");
    let o = qfl(&["sweep", "--seed", "1", "--jobs", "2"], &data, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let cmp = fs::read_to_string(out.join("comparison.csv")).unwrap();
    assert_eq!(cmp.lines().next().unwrap(), "epoch,sgd,adagrad,adam,fqngd");
    assert_eq!(cmp.lines().count(), 5);
    assert!(out.join("accuracy_table.csv").is_file());
    assert!(out.join("sweep.json").is_file());
    for name in ["sgd", "adagrad", "adam", "fqngd"] {
        assert!(out.join(name).join("history.csv").is_file());
    }
}

#[test]
fn metric_prints_json() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("mnist");
    fake_mnist(&data);
    let o = qfl(
        &["metric", "--seed", "2", "--sample", "1"],
        &data,
        &tmp.path().join("m"),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v.is_object());
}

#[test]
fn failures_map_to_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("mnist");
    fake_mnist(&data);

    let o = qfl(&["run"], &data, &tmp.path().join("noseed"));
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    let o = qfl(&["run", "--seed", "1", "--eta", "-1"], &data, &tmp.path().join("eta"));
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    let o = qfl(
        &["run", "--seed", "1"],
        &tmp.path().join("absent"),
        &tmp.path().join("absent_out"),
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));

    let mut bad = idx_labels(20);
    bad[3] = 9;
    fs::write(data.join("t10k-labels-idx1-ubyte"), bad).unwrap();
    let o = qfl(&["run", "--seed", "1"], &data, &tmp.path().join("magic"));
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("byte 0: bad magic"), "{}", stderr(&o));
}

#[test]
fn official_counts_are_enforced() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("mnist");
    fake_mnist(&data);
    let o = Command::new(env!("CARGO_BIN_EXE_qfl"))
        .args(["run", "--seed", "1", "--data-dir"])
        .arg(&data)
        .arg("--output-dir")
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(!tmp.path().join("out").exists());
}
