// SPDX-License-Identifier: MIT OR Apache-2.0

//! On-disk activation dumps.
//!
//! A dump directory holds `manifest.json` (the [`DumpHeader`]), `ranks.jsonl`
//! (one [`RankRecord`] per sample) and `acts_layer{l}.bin` for every layer: a
//! row-major `n_samples x d_model` matrix of little-endian `f32`. Row `i` of
//! every layer file belongs to line `i` of `ranks.jsonl`; the manifest stores a
//! SHA-256 of the sample-id sequence so reordering is detected.

use std::borrow::Cow;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::Category;
use crate::error::{Error, Result};
use crate::prompting::PerturbationKind;

pub const FORMAT_VERSION: u32 = 1;
pub const DTYPE_TAG: &str = "f32le";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const RANKS_FILE: &str = "ranks.jsonl";

pub fn layer_file_name(layer: usize) -> String {
    format!("acts_layer{layer}.bin")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DumpHeader {
    pub model_id: String,
    pub checkpoint_step: Option<u64>,
    pub n_layers: usize,
    pub d_model: usize,
    pub vocab_size: usize,
    pub n_samples: usize,
    pub dtype: String,
    pub perturbation: PerturbationKind,
    pub format_version: u32,
    /// Hex SHA-256 over the sample ids in row order, each followed by `\n`.
    #[serde(default)]
    pub sample_order_hash: String,
}

impl DumpHeader {
    pub fn new(model_id: impl Into<String>, n_layers: usize, d_model: usize, vocab_size: usize, n_samples: usize) -> Self {
        Self {
            model_id: model_id.into(),
            checkpoint_step: None,
            n_layers,
            d_model,
            vocab_size,
            n_samples,
            dtype: DTYPE_TAG.to_owned(),
            perturbation: PerturbationKind::None,
            format_version: FORMAT_VERSION,
            sample_order_hash: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankRecord {
    pub sample_id: String,
    pub category: Category,
    pub gold_token_count: usize,
    /// 1-based gold-token ranks.
    pub ranks: Vec<u32>,
    pub vocab_size: usize,
}

impl RankRecord {
    pub fn new(sample_id: impl Into<String>, category: Category, ranks: Vec<u32>, vocab_size: usize) -> Self {
        Self { sample_id: sample_id.into(), category, gold_token_count: ranks.len(), ranks, vocab_size }
    }

    pub fn check(&self) -> std::result::Result<(), String> {
        if self.gold_token_count == 0 || self.ranks.len() != self.gold_token_count {
            return Err(format!(
                "{}: gold_token_count {} with {} ranks",
                self.sample_id,
                self.gold_token_count,
                self.ranks.len()
            ));
        }
        if let Some(r) = self.ranks.iter().find(|&&r| r == 0 || r as usize > self.vocab_size) {
            return Err(format!("{}: rank {r} outside 1..={}", self.sample_id, self.vocab_size));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerMatrix {
    pub layer: usize,
    pub n_rows: usize,
    pub d_model: usize,
    pub data: Vec<f32>,
}

impl LayerMatrix {
    pub fn new(layer: usize, n_rows: usize, d_model: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != n_rows * d_model {
            return Err(Error::consistency(format!(
                "layer {layer}: {} values for {n_rows}x{d_model}",
                data.len()
            )));
        }
        Ok(Self { layer, n_rows, d_model, data })
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.d_model..(i + 1) * self.d_model]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.d_model)
    }

    fn to_bytes(&self) -> Vec<u8> {
        self.data.iter().flat_map(|v| v.to_le_bytes()).collect()
    }
}

/// A fully loaded dump.
#[derive(Debug, Clone, PartialEq)]
pub struct Dump {
    pub header: DumpHeader,
    pub records: Vec<RankRecord>,
    pub layers: Vec<LayerMatrix>,
}

impl Dump {
    pub fn sample_ids(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|r| r.sample_id.as_str())
    }
}

pub fn sample_order_hash<'a>(ids: impl IntoIterator<Item = &'a str>) -> String {
    let mut h = Sha256::new();
    for id in ids {
        h.update(id.as_bytes());
        h.update(b"\n");
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn check_consistency(header: &DumpHeader, records: &[RankRecord], layers: &[LayerMatrix]) -> Result<()> {
    if header.n_samples == 0 {
        return Err(Error::consistency("a dump needs at least one sample"));
    }
    if header.dtype != DTYPE_TAG || header.format_version != FORMAT_VERSION {
        return Err(Error::consistency(format!(
            "unsupported dtype/version {}/{}",
            header.dtype, header.format_version
        )));
    }
    if records.len() != header.n_samples {
        return Err(Error::consistency(format!(
            "header declares {} samples but {} rank records were given",
            header.n_samples,
            records.len()
        )));
    }
    if layers.len() != header.n_layers {
        return Err(Error::consistency(format!(
            "header declares {} layers but {} matrices were given",
            header.n_layers,
            layers.len()
        )));
    }
    for rec in records {
        if rec.vocab_size != header.vocab_size {
            return Err(Error::consistency(format!("{}: vocab size differs from header", rec.sample_id)));
        }
        rec.check().map_err(Error::Consistency)?;
    }
    for (l, m) in layers.iter().enumerate() {
        if m.layer != l || m.n_rows != header.n_samples || m.d_model != header.d_model {
            return Err(Error::consistency(format!(
                "layer matrix {l} is {}x{} (index {}), expected {}x{}",
                m.n_rows, m.d_model, m.layer, header.n_samples, header.d_model
            )));
        }
        if m.data.len() != m.n_rows * m.d_model {
            return Err(Error::consistency(format!("layer {l}: data length mismatch")));
        }
        if let Some(i) = m.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::consistency(format!(
                "layer {l}: non-finite value at row {}",
                i / header.d_model
            )));
        }
    }
    Ok(())
}

/// Writes a dump atomically: everything goes to a sibling temp directory that
/// is renamed into place. An existing dump at `dir` is replaced.
pub fn write_dump(header: &DumpHeader, records: &[RankRecord], layers: &[LayerMatrix], dir: &Path) -> Result<PathBuf> {
    check_consistency(header, records, layers)?;
    let mut header = header.clone();
    header.sample_order_hash = sample_order_hash(records.iter().map(|r| r.sample_id.as_str()));

    let name = dir
        .file_name()
        .ok_or_else(|| Error::input(format!("{} is not a usable dump directory", dir.display())))?;
    let parent = dir.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(parent)?;
    let tmp = parent.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    if tmp.exists() {
        fs::remove_dir_all(&tmp)?;
    }
    fs::create_dir(&tmp)?;

    fs::write(tmp.join(MANIFEST_FILE), serde_json::to_vec_pretty(&header)?)?;
    let mut ranks = BufWriter::new(File::create(tmp.join(RANKS_FILE))?);
    for rec in records {
        serde_json::to_writer(&mut ranks, rec)?;
        ranks.write_all(b"\n")?;
    }
    ranks.flush()?;
    drop(ranks);
    for m in layers {
        fs::write(tmp.join(layer_file_name(m.layer)), m.to_bytes())?;
    }

    if dir.exists() {
        let replaceable = dir.join(MANIFEST_FILE).exists() || fs::read_dir(dir)?.next().is_none();
        if !replaceable {
            fs::remove_dir_all(&tmp)?;
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::AlreadyExists,
                format!("{} exists and is not a dump directory", dir.display()),
            )));
        }
        fs::remove_dir_all(dir)?;
    }
    fs::rename(&tmp, dir)?;
    Ok(dir.join(MANIFEST_FILE))
}

/// An I/O error that names the file involved.
fn io_at(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

pub fn read_header(dir: &Path) -> Result<DumpHeader> {
    let path = dir.join(MANIFEST_FILE);
    let bytes = fs::read(&path).map_err(|e| io_at(&path, e))?;
    let header: DumpHeader =
        serde_json::from_slice(&bytes).map_err(|e| Error::validation(format!("{}: {e}", path.display())))?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::validation(format!(
            "format version {} is not supported (expected {FORMAT_VERSION})",
            header.format_version
        )));
    }
    if header.dtype != DTYPE_TAG {
        return Err(Error::validation(format!("dtype `{}` is not {DTYPE_TAG}", header.dtype)));
    }
    if header.n_samples == 0 {
        return Err(Error::validation("manifest declares zero samples"));
    }
    Ok(header)
}

pub fn read_ranks(dir: &Path, header: &DumpHeader) -> Result<Vec<RankRecord>> {
    let path = dir.join(RANKS_FILE);
    let file = File::open(&path).map_err(|e| io_at(&path, e))?;
    let mut records = Vec::with_capacity(header.n_samples);
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RankRecord = serde_json::from_str(&line)
            .map_err(|e| Error::validation(format!("{RANKS_FILE} line {}: {e}", i + 1)))?;
        rec.check().map_err(|m| Error::validation(format!("{RANKS_FILE} line {}: {m}", i + 1)))?;
        if rec.vocab_size != header.vocab_size {
            return Err(Error::validation(format!("{RANKS_FILE} line {}: vocab size differs from manifest", i + 1)));
        }
        records.push(rec);
    }
    if records.len() != header.n_samples {
        return Err(Error::validation(format!(
            "{RANKS_FILE} has {} records, manifest declares {}",
            records.len(),
            header.n_samples
        )));
    }
    let hash = sample_order_hash(records.iter().map(|r| r.sample_id.as_str()));
    if !header.sample_order_hash.is_empty() && hash != header.sample_order_hash {
        return Err(Error::validation("sample order hash does not match ranks.jsonl"));
    }
    Ok(records)
}

/// Loads one layer matrix; the unit of streaming for per-layer work.
pub fn read_layer(dir: &Path, header: &DumpHeader, layer: usize) -> Result<LayerMatrix> {
    if layer >= header.n_layers {
        return Err(Error::input(format!("layer {layer} outside 0..{}", header.n_layers)));
    }
    let name = layer_file_name(layer);
    let mut bytes = Vec::new();
    File::open(dir.join(&name))
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::validation(format!("{name}: {e}")))?;
    let expected = header.n_samples * header.d_model * 4;
    if bytes.len() != expected {
        return Err(Error::validation(format!(
            "{name} (layer {layer}) has {} bytes, expected {expected}",
            bytes.len()
        )));
    }
    let data: Vec<f32> = bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::validation(format!(
            "{name} (layer {layer}): non-finite value at row {}, column {}",
            i / header.d_model,
            i % header.d_model
        )));
    }
    LayerMatrix::new(layer, header.n_samples, header.d_model, data)
}

pub fn read_dump(dir: &Path) -> Result<Dump> {
    let header = read_header(dir)?;
    let records = read_ranks(dir, &header)?;
    let layers = (0..header.n_layers).map(|l| read_layer(dir, &header, l)).collect::<Result<_>>()?;
    Ok(Dump { header, records, layers })
}

/// Per-layer access to a dump, either fully loaded or read from disk on demand.
pub trait LayerSource: Sync {
    fn header(&self) -> &DumpHeader;
    fn records(&self) -> &[RankRecord];
    fn layer(&self, layer: usize) -> Result<Cow<'_, LayerMatrix>>;
}

impl LayerSource for Dump {
    fn header(&self) -> &DumpHeader {
        &self.header
    }

    fn records(&self) -> &[RankRecord] {
        &self.records
    }

    fn layer(&self, layer: usize) -> Result<Cow<'_, LayerMatrix>> {
        self.layers
            .get(layer)
            .map(Cow::Borrowed)
            .ok_or_else(|| Error::input(format!("layer {layer} outside 0..{}", self.layers.len())))
    }
}

/// A dump on disk whose layer files are read one at a time.
#[derive(Debug, Clone)]
pub struct DumpDir {
    pub dir: PathBuf,
    pub header: DumpHeader,
    pub records: Vec<RankRecord>,
}

impl DumpDir {
    pub fn open(dir: &Path) -> Result<Self> {
        let header = read_header(dir)?;
        let records = read_ranks(dir, &header)?;
        Ok(Self { dir: dir.to_path_buf(), header, records })
    }
}

impl LayerSource for DumpDir {
    fn header(&self) -> &DumpHeader {
        &self.header
    }

    fn records(&self) -> &[RankRecord] {
        &self.records
    }

    fn layer(&self, layer: usize) -> Result<Cow<'_, LayerMatrix>> {
        read_layer(&self.dir, &self.header, layer).map(Cow::Owned)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub issues: Vec<String>,
}

/// Checks a dump directory without loading more than one layer at a time.
/// Problems are collected rather than returned as errors.
pub fn validate(dir: &Path) -> ValidationReport {
    let mut issues = Vec::new();
    let header = match read_header(dir) {
        Ok(h) => Some(h),
        Err(e) => {
            issues.push(e.to_string());
            None
        }
    };
    if let Some(header) = header {
        if let Err(e) = read_ranks(dir, &header) {
            issues.push(e.to_string());
        }
        for l in 0..header.n_layers {
            if let Err(e) = read_layer(dir, &header, l) {
                issues.push(e.to_string());
            }
        }
        if let Ok(entries) = fs::read_dir(dir) {
            for entry in entries.flatten() {
                let name = entry.file_name().to_string_lossy().into_owned();
                if let Some(l) = name.strip_prefix("acts_layer").and_then(|s| s.strip_suffix(".bin")) {
                    if l.parse::<usize>().map_or(true, |l| l >= header.n_layers) {
                        issues.push(format!("unexpected layer file {name}"));
                    }
                }
            }
        }
    }
    ValidationReport { ok: issues.is_empty(), issues }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_dump(n: usize, layers: usize, d: usize) -> Dump {
        let mut header = DumpHeader::new("unit", layers, d, 50, n);
        header.checkpoint_step = Some(10);
        let records = (0..n)
            .map(|i| RankRecord::new(format!("player/Q{i}/birth_place"), Category::Player, vec![1 + i as u32, 50], 50))
            .collect();
        let layers = (0..layers)
            .map(|l| LayerMatrix::new(l, n, d, (0..n * d).map(|i| (i + 100 * l) as f32 * 0.5).collect()).unwrap())
            .collect();
        Dump { header, records, layers }
    }

    #[test]
    fn layer_files_have_expected_size() {
        let dir = tempfile::tempdir().unwrap();
        let d = sample_dump(2, 3, 4);
        let target = dir.path().join("dump");
        write_dump(&d.header, &d.records, &d.layers, &target).unwrap();
        for l in 0..3 {
            assert_eq!(fs::metadata(target.join(layer_file_name(l))).unwrap().len(), 32);
        }
    }

    #[test]
    fn count_mismatch_is_a_consistency_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut d = sample_dump(2, 1, 4);
        d.header.n_samples = 3;
        let err = write_dump(&d.header, &d.records, &d.layers, &dir.path().join("x")).unwrap_err();
        assert!(matches!(err, Error::Consistency(_)));
    }

    #[test]
    fn write_then_read_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let d = sample_dump(3, 2, 5);
        let target = dir.path().join("dump");
        write_dump(&d.header, &d.records, &d.layers, &target).unwrap();
        let back = read_dump(&target).unwrap();
        assert_eq!(back.records, d.records);
        assert_eq!(back.layers, d.layers);
        assert_eq!(back.header.sample_order_hash, sample_order_hash(d.sample_ids()));
        assert!(validate(&target).ok);
    }

    #[test]
    fn truncated_layer_names_the_layer() {
        let dir = tempfile::tempdir().unwrap();
        let d = sample_dump(2, 2, 4);
        let target = dir.path().join("dump");
        write_dump(&d.header, &d.records, &d.layers, &target).unwrap();
        let f = target.join(layer_file_name(1));
        let bytes = fs::read(&f).unwrap();
        fs::write(&f, &bytes[..bytes.len() - 3]).unwrap();
        match read_dump(&target) {
            Err(Error::Validation(m)) => assert!(m.contains("layer 1"), "{m}"),
            other => panic!("{other:?}"),
        }
        let report = validate(&target);
        assert!(!report.ok);
    }

    #[test]
    fn zero_rank_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let d = sample_dump(2, 1, 2);
        let target = dir.path().join("dump");
        write_dump(&d.header, &d.records, &d.layers, &target).unwrap();
        let text = fs::read_to_string(target.join(RANKS_FILE)).unwrap().replacen("\"ranks\":[1,", "\"ranks\":[0,", 1);
        fs::write(target.join(RANKS_FILE), text).unwrap();
        assert!(matches!(read_dump(&target), Err(Error::Validation(_))));
    }

    #[test]
    fn nan_is_reported_with_layer_and_row() {
        let dir = tempfile::tempdir().unwrap();
        let d = sample_dump(3, 2, 2);
        let target = dir.path().join("dump");
        write_dump(&d.header, &d.records, &d.layers, &target).unwrap();
        let f = target.join(layer_file_name(1));
        let mut bytes = fs::read(&f).unwrap();
        bytes[2 * 2 * 4..2 * 2 * 4 + 4].copy_from_slice(&f32::NAN.to_le_bytes());
        fs::write(&f, bytes).unwrap();
        let report = validate(&target);
        assert!(!report.ok);
        assert!(report.issues.iter().any(|i| i.contains("layer 1") && i.contains("row 2")), "{:?}", report.issues);
    }

    #[test]
    fn d_model_mismatch_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let d = sample_dump(2, 1, 4);
        let target = dir.path().join("dump");
        write_dump(&d.header, &d.records, &d.layers, &target).unwrap();
        let mut header = read_header(&target).unwrap();
        header.d_model = 5;
        fs::write(target.join(MANIFEST_FILE), serde_json::to_vec(&header).unwrap()).unwrap();
        assert!(!validate(&target).ok);
    }

    #[test]
    fn version_mismatch_and_reordering_are_caught() {
        let dir = tempfile::tempdir().unwrap();
        let d = sample_dump(2, 1, 2);
        let target = dir.path().join("dump");
        write_dump(&d.header, &d.records, &d.layers, &target).unwrap();
        let ranks = fs::read_to_string(target.join(RANKS_FILE)).unwrap();
        let mut lines: Vec<_> = ranks.lines().collect();
        lines.reverse();
        fs::write(target.join(RANKS_FILE), lines.join("\n")).unwrap();
        assert!(matches!(read_dump(&target), Err(Error::Validation(_))));

        let mut header = d.header.clone();
        header.format_version = 2;
        fs::write(target.join(MANIFEST_FILE), serde_json::to_vec(&header).unwrap()).unwrap();
        assert!(matches!(read_dump(&target), Err(Error::Validation(_))));
    }

    #[test]
    fn refuses_to_replace_a_foreign_directory() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("busy");
        fs::create_dir(&target).unwrap();
        fs::write(target.join("notes.txt"), "keep").unwrap();
        let d = sample_dump(1, 1, 1);
        assert!(matches!(write_dump(&d.header, &d.records, &d.layers, &target), Err(Error::Io(_))));
        assert!(target.join("notes.txt").exists());
    }
}
