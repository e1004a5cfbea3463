use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn memestream(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_memestream"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = memestream(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn snapshots(dir: &Path) -> Vec<Value> {
    fs::read_to_string(dir.join("snapshots.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn synth(dir: &Path, hours: &str) -> std::path::PathBuf {
    let input = dir.join("stream.jsonl");
    ok(&["synth", "--out", p(&input), "--duration-hours", hours, "--n-memes", "4"]);
    input
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("o");
    assert_eq!(memestream(&[]).status.code(), Some(64));
    assert_eq!(memestream(&["--help"]).status.code(), Some(0));
    assert_eq!(memestream(&["run", "--bogus"]).status.code(), Some(64));
    assert_eq!(
        memestream(&["run", "--input", p(&tmp.path().join("missing")), "--out", p(&out)]).status.code(),
        Some(2)
    );
    let input = synth(tmp.path(), "1");
    assert_eq!(
        memestream(&["run", "--input", p(&input), "--out", p(&out), "--algorithm", "b2"]).status.code(),
        Some(64)
    );
    assert_eq!(
        memestream(&["run", "--input", p(&input), "--out", p(&out), "--k", "0"]).status.code(),
        Some(64)
    );
    assert_eq!(
        memestream(&["run", "--input", p(&input), "--out", p(&out), "--weights", "1,0,0,0"]).status.code(),
        Some(64)
    );
}

#[test]
fn single_tweet_gives_single_cluster() {
    let tmp = TempDir::new().unwrap();
    let input = tmp.path().join("one.jsonl");
    fs::write(
        &input,
        r#"{"id":"1","timestamp":100,"author_id":"a","text":"hello #world"}"#.to_string() + "\n",
    )
    .unwrap();
    let out = tmp.path().join("o");
    ok(&["run", "--input", p(&input), "--out", p(&out), "--algorithm", "b1"]);
    let snaps = snapshots(&out);
    assert_eq!(snaps.len(), 1);
    let clusters = snaps[0]["clusters"].as_array().unwrap();
    assert_eq!(clusters.len(), 1);
    assert_eq!(clusters[0]["tweet_ids"], serde_json::json!(["1"]));
    // Unlabeled input produces no metrics.
    assert!(!out.join("metrics.csv").exists());
}

#[test]
fn malformed_lines_are_skipped() {
    let tmp = TempDir::new().unwrap();
    let input = tmp.path().join("mixed.jsonl");
    fs::write(
        &input,
        concat!(
            r#"{"id":"1","timestamp":100,"author_id":"a","text":"hello"}"#,
            "\nnot json\n",
            r#"{"id":"2","timestamp":101,"author_id":"b","text":"hello"}"#,
            "\n"
        ),
    )
    .unwrap();
    let out = tmp.path().join("o");
    ok(&["run", "--input", p(&input), "--out", p(&out), "--algorithm", "b1"]);
    let snaps = snapshots(&out);
    let n: usize = snaps[0]["clusters"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["tweet_ids"].as_array().unwrap().len())
        .sum();
    assert_eq!(n, 2);
}

/// Blinded hashtags must not influence clustering, and neither may labels.
#[test]
fn blinded_labels_do_not_leak() {
    let tmp = TempDir::new().unwrap();
    let input = synth(tmp.path(), "2");
    let records: Vec<Value> = fs::read_to_string(&input)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let rewrite = |tagged: bool, name: &str| {
        let path = tmp.path().join(name);
        let lines: Vec<String> = records
            .iter()
            .map(|r| {
                let mut r = r.clone();
                let label = r["labels"][0].as_str().unwrap().to_string();
                if tagged {
                    let text = format!("{} {}", r["text"].as_str().unwrap(), label.to_uppercase());
                    r["text"] = Value::String(text);
                } else {
                    r["labels"] = serde_json::json!(["#other"]);
                }
                r.to_string()
            })
            .collect();
        fs::write(&path, lines.join("\n") + "\n").unwrap();
        path
    };
    let tagged = rewrite(true, "tagged.jsonl");
    let relabeled = rewrite(false, "relabeled.jsonl");
    let blind = tmp.path().join("blind.txt");
    fs::write(&blind, (0..4).map(|m| format!("#meme{m}\n")).collect::<String>()).unwrap();

    let runs = [("plain", &input, false), ("tagged", &tagged, true), ("relabeled", &relabeled, false)];
    for (name, path, blinded) in runs {
        let out = tmp.path().join(name);
        let mut args = vec!["run", "--input", p(path), "--out", p(&out)];
        if blinded {
            args.extend(["--blind-labels", p(&blind)]);
        }
        ok(&args);
    }
    let plain = fs::read(tmp.path().join("plain/snapshots.jsonl")).unwrap();
    assert_eq!(plain, fs::read(tmp.path().join("tagged/snapshots.jsonl")).unwrap());
    assert_eq!(plain, fs::read(tmp.path().join("relabeled/snapshots.jsonl")).unwrap());

    // Without blinding the tags are visible to the engine.
    let out = tmp.path().join("unblinded");
    ok(&["run", "--input", p(&tagged), "--out", p(&out)]);
    assert_ne!(plain, fs::read(out.join("snapshots.jsonl")).unwrap());
}

#[test]
fn manifest_rerun_is_identical() {
    let tmp = TempDir::new().unwrap();
    let input = synth(tmp.path(), "3");
    let first = tmp.path().join("first");
    ok(&["run", "--input", p(&input), "--out", p(&first), "--ell", "2", "--seed", "7", "--k", "5"]);
    let second = tmp.path().join("second");
    ok(&["run", "--manifest", p(&first.join("manifest.json")), "--out", p(&second)]);
    for f in ["snapshots.jsonl", "metrics.csv", "mcr.csv", "confusion.jsonl", "manifest.json"] {
        assert_eq!(
            fs::read(first.join(f)).unwrap(),
            fs::read(second.join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn eval_of_perfect_snapshot_is_one() {
    let tmp = TempDir::new().unwrap();
    let truth = tmp.path().join("truth.jsonl");
    let mut lines = String::new();
    for i in 0..6 {
        let label = if i < 3 { "#a" } else { "#b" };
        lines += &format!(r#"{{"id":"{i}","timestamp":{i},"author_id":"u","text":"x","labels":["{label}"]}}"#);
        lines.push('\n');
    }
    fs::write(&truth, lines).unwrap();
    let snaps = tmp.path().join("snaps.jsonl");
    fs::write(
        &snaps,
        r#"{"window_end":3600,"clusters":[{"id":0,"tweet_ids":["0","1","2"]},{"id":1,"tweet_ids":["3","4","5"]}],"retired":[]}"#
            .to_string()
            + "\n",
    )
    .unwrap();
    let out = tmp.path().join("e");
    ok(&["eval", "--snapshots", p(&snaps), "--truth", p(&truth), "--out", p(&out)]);
    let mut rdr = csv::Reader::from_path(out.join("metrics.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 1);
    let header = rdr.headers().unwrap().clone();
    for col in ["lfk_nmi", "nmi"] {
        let i = header.iter().position(|h| h == col).unwrap();
        let v: f64 = rows[0][i].parse().unwrap();
        assert!((v - 1.0).abs() < 1e-12, "{col} = {v}");
    }
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    csv::Reader::from_path(path)
        .unwrap()
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect()
}

#[test]
fn single_cell_sweep_matches_run() {
    let tmp = TempDir::new().unwrap();
    let input = synth(tmp.path(), "4");
    let sweep = tmp.path().join("sweep.csv");
    ok(&["sweep", "--input", p(&input), "--out", p(&sweep), "--ells", "2", "--delta-ts", "1800"]);
    let out = tmp.path().join("run");
    ok(&["run", "--input", p(&input), "--out", p(&out), "--ell", "2", "--delta-t", "1800"]);
    let evald = tmp.path().join("eval");
    ok(&[
        "eval",
        "--snapshots",
        p(&out.join("snapshots.jsonl")),
        "--truth",
        p(&input),
        "--out",
        p(&evald),
    ]);

    let nmis = |path: &Path| -> Vec<f64> { read_csv(path).iter().map(|r| r[2].parse().unwrap()).collect() };
    let from_run = nmis(&out.join("metrics.csv"));
    let from_eval = nmis(&evald.join("metrics.csv"));
    assert_eq!(from_run.len(), from_eval.len());
    // Full truth and windowed truth agree on every clustered tweet.
    for (a, b) in from_run.iter().zip(&from_eval) {
        assert!((a - b).abs() < 1e-12);
    }
    let row = &read_csv(&sweep)[0];
    assert_eq!(row[0], "2");
    assert_eq!(row[1], "1800");
    assert_eq!(row[2], "3600");
    assert_eq!(row[4].parse::<usize>().unwrap(), from_run.len());
    let mean: f64 = row[6].parse().unwrap();
    let expected = from_run.iter().sum::<f64>() / from_run.len() as f64;
    assert!((mean - expected).abs() < 1e-12, "{mean} vs {expected}");
}

#[test]
fn sweep_is_deterministic_across_thread_counts() {
    let tmp = TempDir::new().unwrap();
    let input = synth(tmp.path(), "3");
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let out = tmp.path().join(format!("sweep{threads}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_memestream"))
            .args(["sweep", "--input", p(&input), "--out", p(&out)])
            .args(["--ells", "1,2,3", "--delta-ts", "900,1800,3600"])
            .env("MEMESTREAM_THREADS", threads)
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(read_csv(&tmp.path().join("sweep1.csv")).len(), 9);
}
