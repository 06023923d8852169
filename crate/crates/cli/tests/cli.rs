use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use stegodetect::persist;

const BIN: &str = env!("CARGO_BIN_EXE_stegodetect");

const SMALL_MODEL: &[&str] = &["--embedding-dim", "16", "--hidden-units", "8", "--fused-dim", "8"];

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("STEGODETECT_SEED")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> (String, String) {
    let out = run(args);
    let stdout = String::from_utf8(out.stdout).unwrap();
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(out.status.success(), "{args:?} failed:\n{stderr}");
    (stdout, stderr)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn source_text(dir: &Path) -> PathBuf {
    let lines = [
        "the nation is strong and the people are free",
        "we will build new roads and new schools for our children",
        "our economy grew faster than at any time in a decade",
        "the congress must act to protect working families",
        "tonight i ask you to join me in this great work",
        "we have made real progress but our work is not done",
        "every child deserves a good school and a safe home",
        "the world is watching what we do here tonight",
        "we must never forget the sacrifice of our soldiers",
        "let us work together to keep our country safe and strong",
    ];
    let path = dir.join("source.txt");
    fs::write(&path, lines.repeat(3).join("\n")).unwrap();
    path
}

fn generated(dir: &Path, bpw: &str, per_class: &str) -> PathBuf {
    let src = source_text(dir);
    let data = dir.join("data");
    ok(&[
        "generate",
        "--source",
        s(&src),
        "--out-dir",
        s(&data),
        "--bpw",
        bpw,
        "--per-class",
        per_class,
        "--seed",
        "7",
    ]);
    data
}

#[test]
fn generate_writes_one_file_per_rate_and_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let data = generated(dir.path(), "0,1,3,5", "50");
    let mut names: Vec<String> = fs::read_dir(&data)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["bpw1.txt", "bpw3.txt", "bpw5.txt", "cover.txt", "manifest.tsv"]);
    for f in ["cover.txt", "bpw1.txt", "bpw3.txt", "bpw5.txt"] {
        assert_eq!(fs::read_to_string(data.join(f)).unwrap().lines().count(), 50, "{f}");
    }
    let first: Vec<String> = names
        .iter()
        .map(|n| fs::read_to_string(data.join(n)).unwrap())
        .collect();

    let again = dir.path().join("again");
    let src = dir.path().join("source.txt");
    let (stdout, _) = ok(&[
        "generate",
        "--source",
        s(&src),
        "--out-dir",
        s(&again),
        "--bpw",
        "0,1,3,5",
        "--per-class",
        "50",
        "--seed",
        "7",
        "--verify",
    ]);
    let second: Vec<String> = names
        .iter()
        .map(|n| fs::read_to_string(again.join(n)).unwrap())
        .collect();
    assert_eq!(first, second);
    assert!(stdout.contains("verify\t150\tpayloads recovered"), "{stdout}");
}

#[test]
fn defaults_match_published_hyperparameters() {
    let dir = tempfile::tempdir().unwrap();
    let data = generated(dir.path(), "0,2", "40");
    let ck = dir.path().join("m.ck");
    let mut args = vec![
        "train",
        "--data",
        s(&data),
        "--task",
        "binary",
        "--bpw",
        "2",
        "--checkpoint",
        s(&ck),
        "--max-epochs",
        "1",
    ];
    args.extend_from_slice(SMALL_MODEL);
    let (stdout, stderr) = ok(&args);
    for line in [
        "learning-rate = 0.001",
        "batch-size = 128",
        "dropout = 0.5",
        "l2-coeff = 0.0001",
        "patience = 5",
        "arch = ts-birnn",
        "num-layers = 2",
    ] {
        assert!(stderr.contains(line), "missing {line:?} in echo:\n{stderr}");
    }
    assert!(ck.exists());
    assert!(stdout.contains("val_acc\t"), "{stdout}");
    let log = fs::read_to_string(dir.path().join("m.ck.log.tsv")).unwrap();
    assert!(
        log.starts_with("epoch\ttrain_loss\tval_acc\tval_p\tval_r\tval_f1\n1\t"),
        "{log}"
    );
}

#[test]
fn rate_task_gets_six_classes() {
    let dir = tempfile::tempdir().unwrap();
    let data = generated(dir.path(), "0,1,2,3,4,5", "20");
    let ck = dir.path().join("rate.ck");
    let mut args = vec![
        "train",
        "--data",
        s(&data),
        "--task",
        "rate",
        "--checkpoint",
        s(&ck),
        "--max-epochs",
        "1",
    ];
    args.extend_from_slice(SMALL_MODEL);
    ok(&args);
    let loaded = persist::load(&ck).unwrap();
    assert_eq!(loaded.params.config.num_classes, 6);
    let (stdout, _) = ok(&["eval", "--data", s(&data), "--checkpoint", s(&ck)]);
    assert!(stdout.contains("macro"), "{stdout}");
}

/// Two disjoint vocabularies: trivially separable.
fn toy_corpus(dir: &Path) -> PathBuf {
    let data = dir.join("toy");
    fs::create_dir_all(&data).unwrap();
    let cover: Vec<String> = (0..60)
        .map(|i| format!("alpha{} beta{} gamma{}", i % 5, i % 7, i % 3))
        .collect();
    let stego: Vec<String> = (0..60)
        .map(|i| format!("delta{} omega{} sigma{} tau", i % 5, i % 7, i % 3))
        .collect();
    fs::write(data.join("cover.txt"), cover.join("\n")).unwrap();
    fs::write(data.join("bpw1.txt"), stego.join("\n\n")).unwrap();
    fs::write(data.join("manifest.tsv"), "cover.txt\ttoy\t0\nbpw1.txt\ttoy\t1\n").unwrap();
    data
}

fn train_toy(dir: &Path) -> (PathBuf, PathBuf) {
    let data = toy_corpus(dir);
    let ck = dir.join("toy.ck");
    let mut args = vec![
        "train",
        "--data",
        s(&data),
        "--bpw",
        "1",
        "--checkpoint",
        s(&ck),
        "--dropout",
        "0",
        "--learning-rate",
        "0.05",
        "--max-epochs",
        "10",
        "--batch-size",
        "8",
        "--seed",
        "5",
    ];
    args.extend_from_slice(SMALL_MODEL);
    ok(&args);
    (data, ck)
}

fn parse_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .filter_map(|l| {
            let fields: Vec<&str> = l.split_whitespace().collect();
            (fields.len() == 4 && fields[0].parse::<u8>().is_ok())
                .then(|| fields.iter().map(|f| f.parse().unwrap()).collect())
        })
        .collect()
}

#[test]
fn toy_task_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let (data, ck) = train_toy(dir.path());

    // Memorized training split, and report file equal to the printed table.
    let report = dir.path().join("train.report");
    let (stdout, _) = ok(&[
        "eval",
        "--data",
        s(&data),
        "--checkpoint",
        s(&ck),
        "--split",
        "train",
        "--seed",
        "5",
        "--report",
        s(&report),
    ]);
    let printed = parse_rows(&stdout);
    let written = parse_rows(&fs::read_to_string(&report).unwrap());
    assert_eq!(printed, written);
    assert_eq!(printed, vec![vec![1.0, 1.0, 1.0, 1.0]]);

    // Predictions: one record per line, skips for empty lines, batch = one by one.
    let lines = [
        "alpha1 beta2 gamma0",
        "...",
        "delta3 omega1 sigma2 tau",
        "unseen words only",
        "alpha0 delta0",
    ];
    let input = dir.path().join("in.txt");
    fs::write(&input, lines.join("\n")).unwrap();
    let (batch, _) = ok(&["predict", "--checkpoint", s(&ck), "--input", s(&input)]);
    let records: Vec<&str> = batch.lines().collect();
    assert_eq!(records.len(), lines.len());
    assert_eq!(records[1], "skip\tempty after tokenization");
    assert!(records[0].starts_with("0\t"), "{batch}");
    assert!(records[2].starts_with("1\t"), "{batch}");
    let mut one_by_one = Vec::new();
    for line in lines {
        let mut child = Command::new(BIN)
            .args(["predict", "--checkpoint", s(&ck)])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .unwrap();
        child.stdin.take().unwrap().write_all(line.as_bytes()).unwrap();
        let out = child.wait_with_output().unwrap();
        one_by_one.push(String::from_utf8(out.stdout).unwrap().trim_end().to_string());
    }
    assert_eq!(records, one_by_one);
    for r in records.iter().filter(|r| !r.starts_with("skip")) {
        let p: f64 = r.split('\t').nth(1).unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&p));
    }

    // Feature export: one record per sample, tags agree with the manifest, deterministic.
    let f1 = dir.path().join("f1.tsv");
    let f2 = dir.path().join("f2.tsv");
    ok(&[
        "export-features",
        "--data",
        s(&data),
        "--checkpoint",
        s(&ck),
        "--features",
        s(&f1),
    ]);
    ok(&[
        "export-features",
        "--data",
        s(&data),
        "--checkpoint",
        s(&ck),
        "--features",
        s(&f2),
    ]);
    let dump = fs::read_to_string(&f1).unwrap();
    assert_eq!(dump, fs::read_to_string(&f2).unwrap());
    let mut rows = dump.lines();
    assert_eq!(rows.next().unwrap().split('\t').count(), 2 + 8);
    let tags: Vec<(String, String)> = rows
        .map(|r| {
            let f: Vec<&str> = r.split('\t').collect();
            assert_eq!(f.len(), 10);
            (f[0].to_string(), f[1].to_string())
        })
        .collect();
    // Files are ingested in path order: bpw1.txt, then cover.txt.
    let mut expected = vec![("1".to_string(), "1".to_string()); 60];
    expected.extend(vec![("0".to_string(), "0".to_string()); 60]);
    assert_eq!(tags, expected);
}

#[test]
fn config_file_and_environment_seed() {
    let dir = tempfile::tempdir().unwrap();
    let src = source_text(dir.path());
    let out = dir.path().join("gen");
    let cfg = dir.path().join("run.ini");
    fs::write(
        &cfg,
        format!(
            "[generate]\nsource = {}\nout_dir = {}\nbpw = 0,4\nper-class = 5\n",
            s(&src),
            s(&out)
        ),
    )
    .unwrap();
    let output = Command::new(BIN)
        .args(["generate", "--config", s(&cfg), "--per-class", "6"])
        .env("STEGODETECT_SEED", "99")
        .output()
        .unwrap();
    assert!(output.status.success());
    let echo = String::from_utf8(output.stderr).unwrap();
    assert!(echo.contains("seed = 99"), "{echo}");
    assert!(echo.contains("per-class = 6"), "{echo}");
    assert!(echo.contains("bpw = 0,4"), "{echo}");
    assert_eq!(fs::read_to_string(out.join("bpw4.txt")).unwrap().lines().count(), 6);

    // The echoed configuration alone reproduces the run.
    let echoed = dir.path().join("echo.ini");
    let config: Vec<&str> = echo
        .lines()
        .take_while(|l| l.starts_with(['#', '[']) || l.contains(" = "))
        .collect();
    fs::write(&echoed, config.join("\n")).unwrap();
    let first = fs::read_to_string(out.join("bpw4.txt")).unwrap();
    fs::remove_dir_all(&out).unwrap();
    ok(&["generate", "--config", s(&echoed)]);
    assert_eq!(fs::read_to_string(out.join("bpw4.txt")).unwrap(), first);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| run(args).status.code();

    assert_eq!(code(&["train", "--no-such-flag", "1"]), Some(2));
    assert_eq!(code(&["train", "--data", "x"]), Some(2));
    assert_eq!(
        code(&["generate", "--source", "a", "--out-dir", "b", "--bpw", "0,9"]),
        Some(2)
    );
    assert_eq!(
        code(&[
            "generate",
            "--source",
            s(&dir.path().join("missing.txt")),
            "--out-dir",
            "b"
        ]),
        Some(5)
    );

    let garbage = dir.path().join("garbage.ck");
    fs::write(&garbage, b"TSRNNCK1 but not really a checkpoint").unwrap();
    assert_eq!(
        code(&["predict", "--checkpoint", s(&garbage), "--input", s(&garbage)]),
        Some(3)
    );

    // A huge learning rate blows the weights up. Optimized builds report a
    // numeric divergence; debug builds abort at the first non-finite value.
    let data = toy_corpus(dir.path());
    let mut args = vec![
        "train",
        "--data",
        s(&data),
        "--bpw",
        "1",
        "--checkpoint",
        "/dev/null",
        "--learning-rate",
        "1e30",
        "--max-epochs",
        "3",
        "--batch-size",
        "8",
        "--clip-norm",
        "1e30",
    ];
    args.extend_from_slice(SMALL_MODEL);
    let out = run(&args);
    let stderr = String::from_utf8_lossy(&out.stderr);
    if cfg!(debug_assertions) {
        assert!(
            out.status.code() == Some(4) || stderr.contains("non-finite value"),
            "{stderr}"
        );
    } else {
        assert_eq!(out.status.code(), Some(4), "{stderr}");
    }
}
