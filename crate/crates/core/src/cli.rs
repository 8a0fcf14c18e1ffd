// SPDX-License-Identifier: MIT OR Apache-2.0

//! Command-line front end.
//!
//! Every subcommand writes `run_config.json` with the fully resolved arguments
//! into its output directory; `rerun --config` replays such a file.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analysis::{checkpoint_curve, kl_sweep, perturbation_eval, SweepGrid};
use crate::dataset::{
    build_dataset_live, build_dataset_offline, manifest_for, read_facts, resolve_endpoint, synthetic_facts,
    user_agent_from_env, write_facts, Category, EntityOrder, ReqwestTransport, SparqlClient,
};
use crate::error::{Error, Result};
use crate::extract::extract_toy;
use crate::labeling::{label_dataset, read_labeled, write_labels, write_summary, BandConfig, LabeledDataset};
use crate::probe::{
    read_probes, split, train_all_layers, train_all_layers_seeds, write_metrics_csv, write_probes, Split, SplitSpec,
    TrainConfig,
};
use crate::prompting::{read_prompts, render_all, write_prompts, PerturbationKind, TemplateId, TemplateSet};
use crate::report::{emit_report, load_report_inputs, write_results, ReportInputs};
use crate::separation::{labeled_rows, run_separation, Latents, SaeEncoder};
use crate::store::{validate, write_dump, DumpDir, LayerSource};
use crate::toy_model::{seeded_weights, ModelConfig, ModelWeights};

pub const RUN_CONFIG_FILE: &str = "run_config.json";
pub const SPLIT_FILE: &str = "split.json";

#[derive(Debug, Clone, Parser, Serialize, Deserialize)]
#[command(name = "awarescope", version, about = "Linear probes for factual self-awareness in transformer activations")]
pub struct Cli {
    /// Seed for every random choice not given its own seed.
    #[arg(long, global = true, default_value_t = 73)]
    pub seed: u64,
    /// Print machine-readable JSON on standard output.
    #[arg(long, global = true)]
    pub json: bool,
    /// Worker threads (defaults to the available parallelism).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Build facts.jsonl from Wikidata, saved responses, or the synthetic grammar.
    BuildDataset(BuildDatasetArgs),
    /// Render prompts.jsonl from facts with one perturbation.
    RenderPrompts(RenderArgs),
    /// Run a model over prompts and write an activation dump.
    Extract(ExtractArgs),
    /// Label a dump's samples as known / forgotten.
    Label(LabelArgs),
    /// Train one linear probe per layer.
    TrainProbes(TrainArgs),
    /// Separation scores of probe outputs or SAE latents.
    Separation(SeparationArgs),
    /// Relabel and retrain over a (k, l) grid.
    Sweep(SweepArgs),
    /// Evaluate frozen probes on perturbed dumps.
    PerturbEval(PerturbArgs),
    /// Probe accuracy across training checkpoints.
    Checkpoints(CheckpointArgs),
    /// Write CSV and SVG reports from result documents.
    Report(ReportArgs),
    /// Check a dump directory for consistency.
    ValidateDump(ValidateArgs),
    /// Replay a recorded run_config.json.
    Rerun(RerunArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BandArgs {
    #[arg(long, default_value_t = 500)]
    pub k: u32,
    #[arg(long, default_value_t = 0.3)]
    pub l: f64,
}

impl BandArgs {
    fn band(&self) -> BandConfig {
        BandConfig::new(self.k, self.l)
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrainOpts {
    #[arg(long, default_value_t = 3)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long, default_value_t = 0.7)]
    pub train_fraction: f64,
    /// Split seed (defaults to --seed).
    #[arg(long)]
    pub split_seed: Option<u64>,
    /// Probe base seed (defaults to --seed).
    #[arg(long)]
    pub probe_seed: Option<u64>,
}

impl TrainOpts {
    fn config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            base_lr: self.lr,
            weight_decay: self.weight_decay,
            batch_size: self.batch_size,
            base_seed: self.probe_seed.unwrap_or(seed),
            threshold: self.threshold,
        }
    }

    fn split(&self, seed: u64) -> SplitSpec {
        SplitSpec { train_fraction: self.train_fraction, split_seed: self.split_seed.unwrap_or(seed) }
    }

    fn resolve(&mut self, seed: u64) {
        self.split_seed.get_or_insert(seed);
        self.probe_seed.get_or_insert(seed);
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BuildDatasetArgs {
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Categories to query (default: all four).
    #[arg(long, value_delimiter = ',')]
    pub categories: Vec<Category>,
    #[arg(long, default_value_t = 100)]
    pub entity_limit: usize,
    #[arg(long, value_enum, default_value_t = EntityOrder::SitelinksDesc)]
    pub order: EntityOrder,
    /// Read saved `{category}.json` responses from this directory.
    #[arg(long, conflicts_with = "synthetic")]
    pub offline: Option<PathBuf>,
    /// Generate this many synthetic entities per category instead of querying.
    #[arg(long)]
    pub synthetic: Option<usize>,
    /// SPARQL endpoint (overrides AWARESCOPE_ENDPOINT).
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long, default_value_t = 60)]
    pub timeout_secs: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct RenderArgs {
    #[arg(long)]
    pub facts: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = TemplateId::Template2Balanced)]
    pub template: TemplateId,
    #[arg(long, value_enum, default_value_t = PerturbationKind::None)]
    pub perturbation: PerturbationKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Toy,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ExtractArgs {
    #[arg(long, value_enum)]
    pub model: ModelKind,
    #[arg(long)]
    pub prompts: PathBuf,
    #[arg(long)]
    pub facts: PathBuf,
    /// Dump directory to create.
    #[arg(long)]
    pub out: PathBuf,
    /// Load toy_weights.bin instead of seeding fresh weights.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Seed of freshly initialized weights (defaults to --seed).
    #[arg(long)]
    pub model_seed: Option<u64>,
    #[arg(long)]
    pub checkpoint_step: Option<u64>,
    /// Also save the weights used.
    #[arg(long)]
    pub save_weights: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub n_layers: usize,
    #[arg(long, default_value_t = 64)]
    pub d_model: usize,
    #[arg(long, default_value_t = 4)]
    pub n_heads: usize,
    #[arg(long, default_value_t = 256)]
    pub d_mlp: usize,
    #[arg(long, default_value_t = 256)]
    pub max_seq_len: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct LabelArgs {
    #[arg(long)]
    pub dump: PathBuf,
    #[command(flatten)]
    pub band: BandArgs,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub dump: PathBuf,
    /// Directory holding labels.jsonl and label_summary.json.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[command(flatten)]
    pub train: TrainOpts,
    /// Also train with each of these base seeds and aggregate per layer across them.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    Test,
    All,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SeparationArgs {
    #[arg(long)]
    pub dump: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    /// probes.json from train-probes.
    #[arg(long, required_unless_present = "sae_dir", conflicts_with = "sae_dir")]
    pub probes: Option<PathBuf>,
    /// Directory of `sae_layer{l}.bin` encoders.
    #[arg(long)]
    pub sae_dir: Option<PathBuf>,
    /// split.json from train-probes (recomputed from the seed when absent).
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Subset::Test)]
    pub subset: Subset,
    #[arg(long, default_value_t = 0.7)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 5)]
    pub top: usize,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub dump: PathBuf,
    #[arg(long = "k", value_delimiter = ',', default_values_t = vec![1u32, 5, 10, 50, 100, 500, 1000])]
    pub k: Vec<u32>,
    #[arg(long = "l", value_delimiter = ',', default_values_t = vec![0.1f64, 0.2, 0.3, 0.4, 0.5])]
    pub l: Vec<f64>,
    /// Layers to train (default: all).
    #[arg(long, value_delimiter = ',')]
    pub layers: Vec<usize>,
    #[command(flatten)]
    pub train: TrainOpts,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PerturbArgs {
    #[arg(long)]
    pub probes: PathBuf,
    /// Unperturbed dump the probes were trained on.
    #[arg(long)]
    pub base: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub split: PathBuf,
    /// `kind=DIR`, once per perturbation.
    #[arg(long = "variant", value_parser = parse_variant)]
    pub variants: Vec<(PerturbationKind, PathBuf)>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CheckpointArgs {
    /// `step=DIR`, in the order the curve should list them.
    #[arg(long = "checkpoint", value_parser = parse_checkpoint, required = true)]
    pub checkpoints: Vec<(u64, PathBuf)>,
    #[command(flatten)]
    pub band: BandArgs,
    #[command(flatten)]
    pub train: TrainOpts,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReportArgs {
    /// Directory with probes.json, separation.json, sweep.json, robustness.json or checkpoints.json.
    #[arg(long = "from", required = true, value_delimiter = ',')]
    pub from: Vec<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Also draw SVG charts.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ValidateArgs {
    #[arg(long)]
    pub dump: PathBuf,
    /// Where run_config.json goes (not written when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct RerunArgs {
    #[arg(long)]
    pub config: PathBuf,
}

fn parse_variant(s: &str) -> std::result::Result<(PerturbationKind, PathBuf), String> {
    let (kind, dir) = s.split_once('=').ok_or("expected kind=DIR")?;
    let kind = kind.replace('-', "_").parse::<PerturbationKind>().map_err(|e| e.to_string())?;
    Ok((kind, PathBuf::from(dir)))
}

fn parse_checkpoint(s: &str) -> std::result::Result<(u64, PathBuf), String> {
    let (step, dir) = s.split_once('=').ok_or("expected step=DIR")?;
    Ok((step.parse().map_err(|e| format!("bad step `{step}`: {e}"))?, PathBuf::from(dir)))
}

/// Result of a subcommand: a JSON summary and its human rendering.
struct Outcome {
    summary: Value,
    text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub tool_version: String,
    pub cli: Cli,
}

impl Cli {
    /// Fills every optional seed so the recorded config is explicit.
    fn materialize(&mut self) {
        let seed = self.seed;
        match &mut self.command {
            Command::BuildDataset(a) => {
                if a.offline.is_none() && a.synthetic.is_none() {
                    a.endpoint = Some(resolve_endpoint(a.endpoint.as_deref()));
                }
                if a.categories.is_empty() {
                    a.categories = Category::ALL.to_vec();
                }
            }
            Command::Extract(a) => {
                if a.weights.is_none() {
                    a.model_seed.get_or_insert(seed);
                }
            }
            Command::TrainProbes(a) => a.train.resolve(seed),
            Command::Sweep(a) => a.train.resolve(seed),
            Command::Checkpoints(a) => a.train.resolve(seed),
            _ => {}
        }
    }

    fn out_dir(&self) -> Option<&Path> {
        match &self.command {
            Command::BuildDataset(a) => Some(&a.out),
            Command::RenderPrompts(a) => Some(&a.out),
            Command::Extract(a) => Some(&a.out),
            Command::Label(a) => Some(&a.out),
            Command::TrainProbes(a) => Some(&a.out),
            Command::Separation(a) => Some(&a.out),
            Command::Sweep(a) => Some(&a.out),
            Command::PerturbEval(a) => Some(&a.out),
            Command::Checkpoints(a) => Some(&a.out),
            Command::Report(a) => Some(&a.out),
            Command::ValidateDump(a) => a.out.as_deref(),
            Command::Rerun(_) => None,
        }
    }
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let json = cli.json;
    match execute(cli) {
        Ok(out) => {
            if json {
                println!("{}", serde_json::to_string_pretty(&out.summary).unwrap_or_default());
            } else {
                println!("{}", out.text);
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(mut cli: Cli) -> Result<Outcome> {
    if let Command::Rerun(a) = &cli.command {
        let cfg: RunConfig = serde_json::from_slice(&std::fs::read(&a.config)?)?;
        if matches!(cfg.cli.command, Command::Rerun(_)) {
            return Err(Error::config("a rerun config cannot point at another rerun"));
        }
        return execute(cfg.cli);
    }
    cli.materialize();
    let pool = match cli.workers {
        Some(0) => return Err(Error::config("--workers must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    }
    .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(&cli))
}

fn write_run_config(cli: &Cli, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let cfg = RunConfig { tool_version: env!("CARGO_PKG_VERSION").to_owned(), cli: cli.clone() };
    std::fs::write(dir.join(RUN_CONFIG_FILE), serde_json::to_vec_pretty(&cfg)?)?;
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<Outcome> {
    // Dumps are written atomically by rename, so their config is recorded after.
    let dump_output = matches!(cli.command, Command::Extract(_));
    if !dump_output {
        if let Some(dir) = cli.out_dir() {
            write_run_config(cli, dir)?;
        }
    }
    let out = match &cli.command {
        Command::BuildDataset(a) => build_dataset(a, cli.seed),
        Command::RenderPrompts(a) => render_prompts(a, cli.seed),
        Command::Extract(a) => extract(a),
        Command::Label(a) => label(a),
        Command::TrainProbes(a) => train_probes(a, cli.seed),
        Command::Separation(a) => separation(a, cli.seed),
        Command::Sweep(a) => sweep(a, cli.seed),
        Command::PerturbEval(a) => perturb_eval(a),
        Command::Checkpoints(a) => checkpoints(a, cli.seed),
        Command::Report(a) => report(a),
        Command::ValidateDump(a) => validate_dump(a),
        Command::Rerun(_) => unreachable!("handled in execute"),
    }?;
    if dump_output {
        if let Some(dir) = cli.out_dir() {
            write_run_config(cli, dir)?;
        }
    }
    Ok(out)
}

fn build_dataset(a: &BuildDatasetArgs, seed: u64) -> Result<Outcome> {
    let (records, manifest) = if let Some(n) = a.synthetic {
        let records = synthetic_facts(n, seed);
        let manifest = manifest_for(&records);
        (records, manifest)
    } else if let Some(dir) = &a.offline {
        build_dataset_offline(dir, &a.categories, a.entity_limit)?
    } else {
        let endpoint = resolve_endpoint(a.endpoint.as_deref());
        let transport = ReqwestTransport::new(Duration::from_secs(a.timeout_secs))?;
        let mut client = SparqlClient::new(endpoint, user_agent_from_env()?, transport)?;
        build_dataset_live(&mut client, &a.categories, a.entity_limit, a.order)?
    };
    write_facts(&a.out.join("facts.jsonl"), &records)?;
    std::fs::write(a.out.join("build_manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
    let text = format!(
        "{} facts over {} entities -> {}",
        records.len(),
        manifest.entity_counts.values().sum::<usize>(),
        a.out.join("facts.jsonl").display()
    );
    Ok(Outcome { summary: serde_json::to_value(&manifest)?, text })
}

fn render_prompts(a: &RenderArgs, seed: u64) -> Result<Outcome> {
    let facts = read_facts(&a.facts)?;
    let prompts = render_all(&facts, &TemplateSet::shipped(a.template), a.perturbation, seed)?;
    let path = a.out.join("prompts.jsonl");
    write_prompts(&path, &prompts)?;
    Ok(Outcome {
        summary: json!({ "prompts": prompts.len(), "perturbation": a.perturbation, "path": path }),
        text: format!("{} prompts ({}) -> {}", prompts.len(), a.perturbation, path.display()),
    })
}

fn toy_weights(a: &ExtractArgs) -> Result<ModelWeights> {
    match &a.weights {
        Some(p) => ModelWeights::load(p),
        None => {
            let cfg = ModelConfig {
                n_layers: a.n_layers,
                d_model: a.d_model,
                n_heads: a.n_heads,
                d_mlp: a.d_mlp,
                max_seq_len: a.max_seq_len,
                ..ModelConfig::default()
            };
            seeded_weights(cfg, a.model_seed.expect("materialized"))
        }
    }
}

fn extract(a: &ExtractArgs) -> Result<Outcome> {
    let weights = toy_weights(a)?;
    if let Some(p) = &a.save_weights {
        weights.save(p)?;
    }
    let prompts = read_prompts(&a.prompts)?;
    let facts = read_facts(&a.facts)?;
    let dump = extract_toy(&weights, &prompts, &facts, a.checkpoint_step)?;
    write_dump(&dump.header, &dump.records, &dump.layers, &a.out)?;
    let h = &dump.header;
    Ok(Outcome {
        summary: serde_json::to_value(h)?,
        text: format!("{} samples x {} layers x {} -> {}", h.n_samples, h.n_layers, h.d_model, a.out.display()),
    })
}

fn label_text(ds: &LabeledDataset) -> String {
    let mut s = format!(
        "k={} l={} V={}: {} known, {} forgotten, {} excluded, ratio {}",
        ds.band.k,
        ds.band.l,
        ds.vocab_size,
        ds.totals.known,
        ds.totals.forgotten,
        ds.totals.excluded,
        ds.ratio.map_or("undefined".to_owned(), |r| format!("{r:.3}"))
    );
    for (c, t) in &ds.per_category {
        s.push_str(&format!("\n  {c:<8} {:>6} {:>6} {:>6}", t.known, t.forgotten, t.excluded));
    }
    s
}

fn label(a: &LabelArgs) -> Result<Outcome> {
    let dump = DumpDir::open(&a.dump)?;
    let ds = label_dataset(&dump.records, &a.band.band())?;
    write_labels(&a.out.join("labels.jsonl"), &ds)?;
    write_summary(&a.out.join("label_summary.json"), &ds)?;
    Ok(Outcome { summary: serde_json::to_value(crate::labeling::LabelSummary::of(&ds))?, text: label_text(&ds) })
}

fn run_table(run: &crate::probe::ProbeRun) -> String {
    let mut s = String::from("layer  train_acc  test_acc  baseline  test_delta  test_auc");
    for r in &run.layers {
        s.push_str(&format!(
            "\n{:>5}  {:>9.3}  {:>8.3}  {:>8.3}  {:>10.3}  {:>8}",
            r.params.layer,
            r.train.accuracy,
            r.test.accuracy,
            r.test.random_baseline,
            r.test.delta,
            r.test.auc.map_or("n/a".to_owned(), |v| format!("{v:.3}"))
        ));
    }
    let (m, sd) = (&run.test_aggregate.mean, &run.test_aggregate.std);
    s.push_str(&format!("\n test accuracy {:.3} ({:.3}), delta {:.3} ({:.3})", m.accuracy, sd.accuracy, m.delta, sd.delta));
    s
}

fn train_probes(a: &TrainArgs, seed: u64) -> Result<Outcome> {
    let dump = DumpDir::open(&a.dump)?;
    let labels = read_labeled(&a.labels)?;
    let cfg = a.train.config(seed);
    let s = split(&labels, &a.train.split(seed))?;
    std::fs::write(a.out.join(SPLIT_FILE), serde_json::to_vec_pretty(&s)?)?;
    let run = train_all_layers(&dump, &labels, &s, &cfg)?;
    write_probes(&a.out.join("probes.json"), &run)?;
    write_metrics_csv(&a.out.join("metrics.csv"), &run)?;
    let mut summary = json!({ "n_train": run.n_train, "n_test": run.n_test, "test": run.test_aggregate, "train": run.train_aggregate });
    let mut text = run_table(&run);
    if !a.seeds.is_empty() {
        let (_, per_layer) = train_all_layers_seeds(&dump, &labels, &s, &cfg, &a.seeds)?;
        write_results(&a.out.join("probes_seeds.json"), &per_layer)?;
        summary["seeds"] = json!(a.seeds);
        summary["per_layer_across_seeds"] = serde_json::to_value(&per_layer)?;
        for p in &per_layer {
            text.push_str(&format!(
                "\n layer {} across seeds: test accuracy {:.3} ({:.3})",
                p.layer, p.test.mean.accuracy, p.test.std.accuracy
            ));
        }
    }
    Ok(Outcome { summary, text })
}

fn load_split(path: &Path) -> Result<Split> {
    Ok(serde_json::from_slice(&std::fs::read(path)?)?)
}

fn separation(a: &SeparationArgs, seed: u64) -> Result<Outcome> {
    let dump = DumpDir::open(&a.dump)?;
    let labels = read_labeled(&a.labels)?;
    let ids = match a.subset {
        Subset::All => None,
        Subset::Test => Some(match &a.split {
            Some(p) => load_split(p)?.test,
            None => split(&labels, &SplitSpec { train_fraction: a.train_fraction, split_seed: seed })?.test,
        }),
    };
    let rows = labeled_rows(&dump, &labels, ids.as_deref())?;
    let results = if let Some(p) = &a.probes {
        let run = read_probes(p)?;
        let params: Vec<_> = run.layers.into_iter().map(|r| r.params).collect();
        run_separation(&dump, &rows, Latents::Probe(&params), a.top)?
    } else {
        let dir = a.sae_dir.as_ref().expect("clap requires probes or sae_dir");
        let mut encoders = BTreeMap::new();
        for l in 0..dump.header().n_layers {
            let p = dir.join(format!("sae_layer{l}.bin"));
            if p.exists() {
                encoders.insert(l, SaeEncoder::load(&p)?);
            }
        }
        if encoders.is_empty() {
            return Err(Error::input(format!("no sae_layer{{l}}.bin files in {}", dir.display())));
        }
        run_separation(&dump, &rows, Latents::Sae(&encoders), a.top)?
    };
    write_results(&a.out.join("separation.json"), &results)?;
    let inputs = ReportInputs { separation: Some(results.clone()), ..Default::default() };
    emit_report(&inputs, &a.out, false)?;
    let mut text = String::from("layer  direction  maxmin  latent");
    for r in &results {
        for (d, mm) in [("known", r.maxmin_known), ("forgotten", r.maxmin_forgotten)] {
            if let Some((v, j)) = mm {
                text.push_str(&format!("\n{:>5}  {d:<9}  {v:>6.3}  {j:>6}", r.layer));
            }
        }
    }
    Ok(Outcome { summary: serde_json::to_value(crate::separation::maxmin_rows(&results))?, text })
}

fn sweep(a: &SweepArgs, seed: u64) -> Result<Outcome> {
    let dump = DumpDir::open(&a.dump)?;
    let grid = SweepGrid { k: a.k.clone(), l: a.l.clone() };
    let layers = (!a.layers.is_empty()).then_some(a.layers.as_slice());
    let cells = kl_sweep(&dump, &grid, &a.train.split(seed), &a.train.config(seed), layers)?;
    write_results(&a.out.join("sweep.json"), &cells)?;
    emit_report(&ReportInputs { sweep: Some(cells.clone()), ..Default::default() }, &a.out, false)?;
    let mut text = String::from("    k     l  ratio  test/train delta");
    for c in &cells {
        text.push_str(&format!(
            "\n{:>5} {:>5}  {:>5}  {}",
            c.k,
            c.l,
            c.ratio.map_or("-".to_owned(), |r| format!("{r:.2}")),
            crate::report::sweep_cell_text(c)
        ));
    }
    Ok(Outcome { summary: serde_json::to_value(crate::analysis::sweep_rows(&cells))?, text })
}

fn perturb_eval(a: &PerturbArgs) -> Result<Outcome> {
    let probes = read_probes(&a.probes)?;
    let base = DumpDir::open(&a.base)?;
    let labels = read_labeled(&a.labels)?;
    let s = load_split(&a.split)?;
    let mut dumps = BTreeMap::new();
    for (kind, dir) in &a.variants {
        if dumps.insert(*kind, DumpDir::open(dir)?).is_some() {
            return Err(Error::config(format!("perturbation {kind} given twice")));
        }
    }
    let variants: BTreeMap<PerturbationKind, &dyn LayerSource> =
        dumps.iter().map(|(k, d)| (*k, d as &dyn LayerSource)).collect();
    let rep = perturbation_eval(&probes, &base, &labels, &s, &variants)?;
    write_results(&a.out.join("robustness.json"), &rep)?;
    emit_report(&ReportInputs { robustness: Some(rep.clone()), ..Default::default() }, &a.out, false)?;
    let rows = crate::analysis::robustness_rows(&rep);
    let mut text = String::from("modification        subset  loss    auc     acc");
    for r in &rows {
        text.push_str(&format!(
            "\n{:<18}  {:<6}  {:.3}  {}  {:.3}",
            r.modification,
            r.subset,
            r.loss,
            r.auc.map_or("n/a  ".to_owned(), |v| format!("{v:.3}")),
            r.acc
        ));
    }
    Ok(Outcome { summary: serde_json::to_value(rows)?, text })
}

fn checkpoints(a: &CheckpointArgs, seed: u64) -> Result<Outcome> {
    let dumps = a.checkpoints.iter().map(|(s, d)| Ok((*s, DumpDir::open(d)?))).collect::<Result<Vec<_>>>()?;
    let refs: Vec<(u64, &dyn LayerSource)> = dumps.iter().map(|(s, d)| (*s, d as &dyn LayerSource)).collect();
    let curve = checkpoint_curve(&refs, &a.band.band(), &a.train.split(seed), &a.train.config(seed))?;
    write_results(&a.out.join("checkpoints.json"), &curve)?;
    emit_report(&ReportInputs { checkpoints: Some(curve.clone()), ..Default::default() }, &a.out, false)?;
    let mut text = String::from("step  baseline  test accuracy by layer");
    for (i, s) in curve.steps.iter().enumerate() {
        let accs: Vec<String> = curve.test_accuracy[i].iter().map(|v| format!("{v:.3}")).collect();
        text.push_str(&format!("\n{s:>4}  {:>8.3}  {}", curve.test_baseline[i], accs.join(" ")));
    }
    Ok(Outcome { summary: serde_json::to_value(crate::analysis::checkpoint_rows(&curve))?, text })
}

fn report(a: &ReportArgs) -> Result<Outcome> {
    let mut inputs = ReportInputs::default();
    for dir in &a.from {
        let found = load_report_inputs(dir)?;
        inputs.probes = found.probes.or(inputs.probes);
        inputs.separation = found.separation.or(inputs.separation);
        inputs.sweep = found.sweep.or(inputs.sweep);
        inputs.robustness = found.robustness.or(inputs.robustness);
        inputs.checkpoints = found.checkpoints.or(inputs.checkpoints);
    }
    let files = emit_report(&inputs, &a.out, a.svg)?;
    if files.is_empty() {
        return Err(Error::input("no result documents found to report on"));
    }
    let names: Vec<String> = files.iter().map(|p| p.display().to_string()).collect();
    Ok(Outcome { summary: json!({ "files": names }), text: names.join("\n") })
}

fn validate_dump(a: &ValidateArgs) -> Result<Outcome> {
    let report = validate(&a.dump);
    if !report.ok {
        return Err(Error::validation(report.issues.join("; ")));
    }
    Ok(Outcome { summary: serde_json::to_value(&report)?, text: format!("{}: ok", a.dump.display()) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argument_definitions_are_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn variant_and_checkpoint_specs() {
        assert_eq!(parse_variant("few-shot-only=d").unwrap().0, PerturbationKind::FewShotOnly);
        assert!(parse_variant("nope=d").is_err());
        assert_eq!(parse_checkpoint("500=x").unwrap(), (500, PathBuf::from("x")));
        assert!(parse_checkpoint("x").is_err());
    }
}
