// SPDX-License-Identifier: MIT OR Apache-2.0

//! The files an out-of-process extractor consumes and produces, exercised
//! through the Python helpers in `extractor/`. Skipped when `python3` is absent.

use std::path::{Path, PathBuf};
use std::process::Command;

use awarescope::dataset::{synthetic_facts, write_facts, Category};
use awarescope::prompting::{render_all, write_prompts, PerturbationKind, TemplateId, TemplateSet};
use awarescope::store::{read_dump, validate, write_dump, DumpHeader, LayerMatrix, RankRecord};
use awarescope::toy_model::{seeded_weights, ModelConfig, ModelWeights};

fn helpers_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../extractor")
}

/// Runs `script` with the helpers importable; `None` when python3 is missing.
fn python(script: &str, args: &[&Path]) -> Option<String> {
    let out = Command::new("python3")
        .arg("-c")
        .arg(format!("import sys; sys.path.insert(0, {:?})\n{script}", helpers_dir().to_str().unwrap()))
        .args(args)
        .output();
    let out = match out {
        Ok(o) => o,
        Err(_) => {
            eprintln!("python3 not found, skipping");
            return None;
        }
    };
    assert!(out.status.success(), "python failed:\n{}", String::from_utf8_lossy(&out.stderr));
    Some(String::from_utf8(out.stdout).unwrap())
}

const WRITE_FROM_PROMPTS: &str = r#"
import awarescope_io as io
prompts, facts, out = sys.argv[1:4]
facts = io.read_facts(facts)
records, rows = [], []
for i, p in enumerate(io.read_prompts(prompts)):
    f = facts[p["sample_id"]]
    records.append({"sample_id": p["sample_id"], "category": f["category"],
                     "ranks": [1 + (i * 37 + j) % 500 for j in range(len(f["attribute_text"]) % 3 + 1)]})
    rows.append([len(p["text"]) / 10.0, i * 0.5, -1.25])
layers = [rows, [[v * 2 for v in r] for r in rows]]
io.write_dump(out, "external-test", records, layers, vocab_size=500, perturbation="none")
"#;

#[test]
fn python_written_dump_passes_validation() {
    let tmp = tempfile::tempdir().unwrap();
    let facts = synthetic_facts(3, 4);
    let prompts = render_all(&facts, &TemplateSet::shipped(TemplateId::Template2Balanced), PerturbationKind::None, 73).unwrap();
    write_facts(&tmp.path().join("facts.jsonl"), &facts).unwrap();
    write_prompts(&tmp.path().join("prompts.jsonl"), &prompts).unwrap();
    let dump = tmp.path().join("dump");
    if python(WRITE_FROM_PROMPTS, &[&tmp.path().join("prompts.jsonl"), &tmp.path().join("facts.jsonl"), &dump]).is_none() {
        return;
    }
    let report = validate(&dump);
    assert!(report.ok, "{:?}", report.issues);
    let d = read_dump(&dump).unwrap();
    assert_eq!(d.header.n_samples, prompts.len());
    assert_eq!(d.layers.len(), 2);
    assert_eq!(d.records[1].sample_id, prompts[1].sample_id);
    assert_eq!(d.layers[1].data[3], 2.0 * d.layers[0].data[3]);
}

const ECHO_DUMP: &str = r#"
import json, awarescope_io as io
header, records, layers = io.read_dump(sys.argv[1])
print(json.dumps({"n": header["n_samples"], "ids": [r["sample_id"] for r in records], "layers": layers}))
"#;

#[test]
fn python_reads_rust_written_dump() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("dump");
    let (n, d) = (5, 3);
    let records: Vec<RankRecord> =
        (0..n).map(|i| RankRecord::new(format!("r{i}"), Category::ALL[i % 4], vec![i as u32 + 1], 10)).collect();
    let layer = LayerMatrix::new(0, n, d, (0..n * d).map(|j| j as f32 * 0.25 - 1.0).collect()).unwrap();
    write_dump(&DumpHeader::new("rust", 1, d, 10, n), &records, std::slice::from_ref(&layer), &dir).unwrap();
    let Some(stdout) = python(ECHO_DUMP, &[&dir]) else { return };
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["n"], n);
    assert_eq!(v["ids"][4], "r4");
    let flat: Vec<f32> = v["layers"][0].as_array().unwrap().iter().flat_map(|r| r.as_array().unwrap().clone()).map(|x| x.as_f64().unwrap() as f32).collect();
    assert_eq!(flat, layer.data);
}

const REENCODE: &str = r#"
import awarescope_io as io
extra, tensors = io.read_tensors(sys.argv[1])
io.write_tensors(sys.argv[2], extra, tensors)
print(len(tensors))
"#;

#[test]
fn toy_weights_survive_a_python_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let config = ModelConfig { n_layers: 2, d_model: 8, n_heads: 2, d_mlp: 16, ..ModelConfig::default() };
    let weights = seeded_weights(config, 11).unwrap();
    let (src, dst) = (tmp.path().join("toy_weights.bin"), tmp.path().join("copy.bin"));
    weights.save(&src).unwrap();
    let Some(count) = python(REENCODE, &[&src, &dst]) else { return };
    assert_eq!(count.trim(), weights.to_tensors().len().to_string());
    assert_eq!(ModelWeights::load(&dst).unwrap(), weights);
}
