// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::Path;
use std::process::{Command, Output};

use awarescope::dataset::Category;
use awarescope::store::{write_dump, DumpHeader, LayerMatrix, RankRecord};

fn awarescope(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_awarescope")).args(args).output().expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Small dump over a 1000-symbol vocabulary with a spread of ranks.
fn write_v1000_dump(dir: &Path) {
    let v = 1000;
    let n = 40;
    let d = 6;
    let records: Vec<RankRecord> = (0..n)
        .map(|i| {
            let rank = [1, 3, 450, 990, 720, 200, 999, 2][i % 8];
            RankRecord::new(format!("s{i:02}"), Category::ALL[i % 4], vec![rank, (rank % 997) + 1], v)
        })
        .collect();
    let layers = (0..2)
        .map(|l| {
            let data = (0..n * d).map(|j| ((j * 31 + l * 7) % 17) as f32 / 17.0 - 0.5).collect();
            LayerMatrix::new(l, n, d, data).unwrap()
        })
        .collect::<Vec<_>>();
    write_dump(&DumpHeader::new("fixture", 2, d, v, n), &records, &layers, dir).unwrap();
}

#[test]
fn label_writes_outputs_with_default_band() {
    let tmp = tempfile::tempdir().unwrap();
    let dump = tmp.path().join("dump");
    write_v1000_dump(&dump);
    let out = tmp.path().join("labels");
    let res = awarescope(&["label", "--dump", dump.to_str().unwrap(), "--k", "500", "--l", "0.3", "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "{}", stderr(&res));
    for f in ["labels.jsonl", "label_summary.json", "run_config.json"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
}

#[test]
fn overlapping_bands_exit_2_and_name_the_rule() {
    let tmp = tempfile::tempdir().unwrap();
    let dump = tmp.path().join("dump");
    write_v1000_dump(&dump);
    let res = awarescope(&["label", "--dump", dump.to_str().unwrap(), "--k", "800", "--l", "0.3", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    let msg = stderr(&res);
    assert!(msg.contains("overlap") && msg.contains("ceil((1 - l) * V)"), "{msg}");
}

#[test]
fn usage_errors_exit_1() {
    let res = awarescope(&["label", "--no-such-flag"]);
    assert_eq!(res.status.code(), Some(1));
    assert!(stderr(&res).contains("Usage"), "{}", stderr(&res));
    assert_eq!(awarescope(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(awarescope(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_files_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope");
    let res = awarescope(&["label", "--dump", missing.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(3), "{}", stderr(&res));
}

#[test]
fn corrupt_dump_fails_validation_with_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let dump = tmp.path().join("dump");
    write_v1000_dump(&dump);
    let ok = awarescope(&["validate-dump", "--dump", dump.to_str().unwrap()]);
    assert_eq!(ok.status.code(), Some(0), "{}", stderr(&ok));

    // Chop the last layer file mid-row.
    let layer = dump.join("acts_layer1.bin");
    let bytes = std::fs::read(&layer).unwrap();
    std::fs::write(&layer, &bytes[..bytes.len() - 3]).unwrap();
    let bad = awarescope(&["validate-dump", "--dump", dump.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn rerun_from_run_config_reproduces_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let p = |s: &str| tmp.path().join(s).to_string_lossy().into_owned();
    assert_eq!(awarescope(&["build-dataset", "--synthetic", "3", "--out", &p("data")]).status.code(), Some(0));
    assert_eq!(awarescope(&["render-prompts", "--facts", &p("data/facts.jsonl"), "--out", &p("data")]).status.code(), Some(0));
    let res = awarescope(&[
        "extract", "--model", "toy", "--prompts", &p("data/prompts.jsonl"), "--facts", &p("data/facts.jsonl"),
        "--out", &p("dump"), "--n-layers", "2", "--d-model", "16", "--n-heads", "2", "--d-mlp", "32",
    ]);
    assert_eq!(res.status.code(), Some(0), "{}", stderr(&res));
    let res = awarescope(&["label", "--dump", &p("dump"), "--k", "60", "--l", "0.3", "--out", &p("labels")]);
    assert_eq!(res.status.code(), Some(0), "{}", stderr(&res));
    let res = awarescope(&["train-probes", "--dump", &p("dump"), "--labels", &p("labels"), "--out", &p("probes"), "--seed", "5"]);
    assert_eq!(res.status.code(), Some(0), "{}", stderr(&res));

    let config: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("probes/run_config.json")).unwrap()).unwrap();
    // Every default is written out, not just the flags that were passed.
    assert_eq!(config["cli"]["seed"], 5);
    assert_eq!(config["cli"]["command"]["train-probes"]["train"]["epochs"], 3);

    let files = ["probes.json", "metrics.csv", "split.json"];
    let before: Vec<Vec<u8>> = files.iter().map(|f| std::fs::read(tmp.path().join("probes").join(f)).unwrap()).collect();
    for f in files {
        std::fs::remove_file(tmp.path().join("probes").join(f)).unwrap();
    }
    let res = awarescope(&["rerun", "--config", &p("probes/run_config.json")]);
    assert_eq!(res.status.code(), Some(0), "{}", stderr(&res));
    for (f, want) in files.iter().zip(before) {
        assert_eq!(std::fs::read(tmp.path().join("probes").join(f)).unwrap(), want, "{f} differs after rerun");
    }
}

#[test]
fn json_flag_prints_a_machine_readable_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let dump = tmp.path().join("dump");
    write_v1000_dump(&dump);
    let res = awarescope(&["--json", "validate-dump", "--dump", dump.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&res.stdout).expect("stdout is JSON");
    assert!(v.is_object(), "{v}");
}
