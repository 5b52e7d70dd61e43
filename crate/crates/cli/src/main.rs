//! Command-line front end: every stage of the repair and evaluation pipeline
//! as its own subcommand, reading and writing plain files.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use dyadicot::embed::{
    random_walks, read_embedding_binary, read_embedding_text, skipgram_train, write_embedding_binary,
    write_embedding_text, Combiner, EmbeddingMatrix, SkipGramParams, WalkParams,
};
use dyadicot::graph::{load_dataset, split_edges, write_edge_file, write_node_file, Graph};
use dyadicot::metrics::{aggregate, assortativity, MetricsReport};
use dyadicot::ot::SolverKind;
use dyadicot::pipeline::{
    compare_runs, evaluate_variant, projection_tables, read_report, run_pipeline, DatasetPaths, DatasetSummary,
    PipelineConfig,
};
use dyadicot::repair::{repair_graph, RepairConfig, RepairMode};
use dyadicot::Error;

#[derive(Parser, Debug)]
#[command(name = "dyadicot", version, about = "Optimal-transport repair for dyadic fairness in link prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load a dataset, write it back in canonical form and print a summary.
    Ingest(Opts),
    /// Repair a dataset and write the repaired node and edge files.
    Repair(Opts),
    /// Train one node embedding per seed on the full graph.
    Embed(Opts),
    /// Split, embed, predict links and measure a graph for every seed.
    Evaluate(EvaluateOpts),
    /// Run the full pipeline on the original and the repaired graph.
    Pipeline(Opts),
    /// Side-by-side table of pipeline reports.
    Compare(CompareOpts),
    /// PCA projection tables of a node embedding.
    Project(ProjectOpts),
}

#[derive(Copy, Clone, Debug, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ModeArg {
    Binary,
    Multiclass,
    Auto,
}

#[derive(Copy, Clone, Debug, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum SolverArg {
    Exact,
    Entropic,
    Auto,
}

#[derive(Copy, Clone, Debug, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum CombinerArg {
    Hadamard,
    Concat,
}

/// Settings shared by the subcommands. Each one can also be given in a flat
/// TOML file passed with `--config`; flags win over the file.
#[derive(Args, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Settings {
    /// Dataset directory (`*.content`/`*.cites`, `*.nodes`/`*.edges` or `nodes.*`/`edges.*`).
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Attribute weight in the repair cost, in [0, 1].
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
    /// Entropic regularization; defaults to 0.05 × median cost.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Binarize repaired adjacency at this weight.
    #[arg(long)]
    threshold: Option<f64>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    test_fraction: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    num_walks: Option<usize>,
    #[arg(long)]
    walk_length: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    negatives: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long, value_enum)]
    combiner: Option<CombinerArg>,
    #[arg(long)]
    normalize_attributes: Option<bool>,
    #[arg(long)]
    barycenter_iters: Option<usize>,
    #[arg(long)]
    write_artifacts: Option<bool>,
}

#[derive(Args, Debug)]
struct Opts {
    /// Flat TOML file with any of the option names as keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Args, Debug)]
struct EvaluateOpts {
    #[command(flatten)]
    opts: Opts,
    /// Dataset supplying the sensitive values, the edge split and the
    /// DyadicRB edges; defaults to `--dataset`.
    #[arg(long)]
    original: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CompareOpts {
    /// `report.json` files or the run directories holding them.
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    /// Write `comparison.csv` here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ProjectOpts {
    /// Embedding file, binary or text (`.txt`).
    #[arg(long)]
    embedding: PathBuf,
    #[command(flatten)]
    opts: Opts,
}

macro_rules! merge {
    ($dst:ident, $src:ident; $($f:ident),*) => {
        $( if $dst.$f.is_none() { $dst.$f = $src.$f; } )*
    };
}

impl Settings {
    fn fill_from(&mut self, file: Settings) {
        merge!(self, file; dataset, eta, mode, solver, epsilon, threshold, seeds, test_fraction, out, jobs, dim,
            num_walks, walk_length, window, negatives, epochs, p, q, l2, combiner, normalize_attributes,
            barycenter_iters, write_artifacts);
    }

    fn dataset(&self) -> anyhow::Result<DatasetPaths> {
        let dir = self.dataset.as_ref().ok_or_else(|| anyhow!("--dataset is required"))?;
        Ok(DatasetPaths::from_dir(dir)?)
    }

    fn out(&self) -> anyhow::Result<PathBuf> {
        self.out.clone().ok_or_else(|| anyhow!("--out is required"))
    }

    fn repair(&self) -> RepairConfig {
        let d = RepairConfig::default();
        let mut method = d.method;
        if let Some(s) = self.solver {
            method.kind = match s {
                SolverArg::Exact => SolverKind::Exact,
                SolverArg::Entropic => SolverKind::Entropic,
                SolverArg::Auto => SolverKind::Auto,
            };
        }
        if self.epsilon.is_some() {
            method.sinkhorn.epsilon = self.epsilon;
        }
        RepairConfig {
            eta: self.eta.unwrap_or(d.eta),
            mode: match self.mode {
                Some(ModeArg::Binary) => RepairMode::Binary,
                Some(ModeArg::Multiclass) => RepairMode::Multiclass,
                Some(ModeArg::Auto) | None => RepairMode::Auto,
            },
            method,
            threshold: self.threshold.or(d.threshold),
            normalize_attributes: self.normalize_attributes.unwrap_or(d.normalize_attributes),
            barycenter_iters: self.barycenter_iters.unwrap_or(d.barycenter_iters),
            ..d
        }
    }

    fn walks(&self) -> WalkParams {
        let d = WalkParams::default();
        WalkParams {
            num_walks: self.num_walks.unwrap_or(d.num_walks),
            walk_length: self.walk_length.unwrap_or(d.walk_length),
            p: self.p.unwrap_or(d.p),
            q: self.q.unwrap_or(d.q),
            ..d
        }
    }

    fn skipgram(&self) -> SkipGramParams {
        let d = SkipGramParams::default();
        SkipGramParams {
            dim: self.dim.unwrap_or(d.dim),
            window: self.window.unwrap_or(d.window),
            negatives: self.negatives.unwrap_or(d.negatives),
            epochs: self.epochs.unwrap_or(d.epochs),
            ..d
        }
    }

    fn pipeline(&self) -> anyhow::Result<PipelineConfig> {
        let mut cfg = PipelineConfig::new(self.dataset()?, self.out()?);
        cfg.repair = self.repair();
        cfg.walks = self.walks();
        cfg.skipgram = self.skipgram();
        if let Some(l2) = self.l2 {
            cfg.classifier.l2 = l2;
        }
        if let Some(c) = self.combiner {
            cfg.combiner = match c {
                CombinerArg::Hadamard => Combiner::Hadamard,
                CombinerArg::Concat => Combiner::Concat,
            };
        }
        if let Some(f) = self.test_fraction {
            cfg.test_fraction = f;
        }
        if let Some(s) = &self.seeds {
            cfg.seeds = s.clone();
        }
        if let Some(w) = self.write_artifacts {
            cfg.write_artifacts = w;
        }
        Ok(cfg)
    }
}

impl Opts {
    fn resolve(self) -> anyhow::Result<Settings> {
        let mut settings = self.settings;
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let file: Settings = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            settings.fill_from(file);
        }
        if let Some(jobs) = settings.jobs {
            rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
        }
        Ok(settings)
    }
}

/// Error from one named stage.
#[derive(Debug)]
struct StageError {
    stage: &'static str,
    source: anyhow::Error,
}

impl std::fmt::Display for StageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "stage `{}` failed: {:#}", self.stage, self.source)
    }
}

fn stage<T>(name: &'static str, r: anyhow::Result<T>) -> Result<T, StageError> {
    r.map_err(|source| StageError { stage: name, source })
}

fn core<T>(name: &'static str, r: dyadicot::Result<T>) -> Result<T, StageError> {
    r.map_err(|e| match e {
        Error::Stage { stage, source } => StageError { stage, source: (*source).into() },
        e => StageError { stage: name, source: e.into() },
    })
}

fn write(path: &Path, contents: &str) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn load(paths: &DatasetPaths) -> Result<Graph, StageError> {
    core("load", load_dataset(&paths.nodes, &paths.edges))
}

fn ingest(opts: Opts) -> Result<(), StageError> {
    let s = stage("config", opts.resolve())?;
    let g = load(&stage("config", s.dataset())?)?;
    let summary = DatasetSummary::of(&g);
    let json = stage("write", serde_json::to_string_pretty(&summary).map_err(Into::into))?;
    println!("{json}");
    if let Some(out) = &s.out {
        stage("write", fs::create_dir_all(out).map_err(Into::into))?;
        core("write", write_node_file(&g, &out.join("graph.nodes")))?;
        core("write", write_edge_file(&g, &out.join("graph.edges"), false))?;
        stage("write", write(&out.join("summary.json"), &(json + "\n")))?;
    }
    Ok(())
}

fn repair(opts: Opts) -> Result<(), StageError> {
    let s = stage("config", opts.resolve())?;
    let paths = stage("config", s.dataset())?;
    let out = stage("config", s.out())?;
    let g = load(&paths)?;
    let repaired = core("repair", repair_graph(&g, &s.repair()))?;
    let before = core("measure", assortativity(&g))?;
    let after = core("measure", assortativity(&repaired.graph))?;
    stage("write", fs::create_dir_all(&out).map_err(Into::into))?;
    core("write", write_node_file(&repaired.graph, &out.join("repaired.nodes")))?;
    core("write", write_edge_file(&repaired.graph, &out.join("repaired.edges"), true))?;
    let meta = serde_json::json!({
        "config": s.repair(),
        "meta": repaired.meta,
        "assortativity_original": before.value,
        "assortativity_repaired": after.value,
    });
    let json = serde_json::to_string_pretty(&meta).expect("plain data") + "\n";
    stage("write", write(&out.join("repair.json"), &json))?;
    println!("assortativity {:.4} -> {:.4}", before.value, after.value);
    Ok(())
}

fn embed(opts: Opts) -> Result<(), StageError> {
    let s = stage("config", opts.resolve())?;
    let paths = stage("config", s.dataset())?;
    let out = stage("config", s.out())?;
    let g = load(&paths)?;
    stage("write", fs::create_dir_all(&out).map_err(Into::into))?;
    for seed in s.seeds.clone().unwrap_or_else(|| vec![0]) {
        let corpus = core("walks", random_walks(&g, &WalkParams { seed, ..s.walks() }))?;
        let emb = core("skipgram", skipgram_train(&corpus, g.node_ids(), &SkipGramParams { seed, ..s.skipgram() }))?;
        core("write", write_embedding_binary(&emb, &out.join(format!("embedding_seed{seed}.bin"))))?;
        core("write", write_embedding_text(&emb, &out.join(format!("embedding_seed{seed}.txt"))))?;
    }
    Ok(())
}

fn evaluate(opts: EvaluateOpts) -> Result<(), StageError> {
    let s = stage("config", opts.opts.resolve())?;
    let cfg = stage("config", s.pipeline())?;
    let g = load(&cfg.dataset)?;
    let original = match &opts.original {
        Some(dir) => load(&core("config", DatasetPaths::from_dir(dir))?)?,
        None => g.clone(),
    };
    if original.sensitive() != g.sensitive() || original.node_ids() != g.node_ids() {
        return Err(StageError {
            stage: "config",
            source: anyhow!("evaluated graph and original graph have different nodes or groups"),
        });
    }
    let ac = core("measure", assortativity(&g))?;
    let mut reports = Vec::new();
    for &seed in &cfg.seeds {
        let split = core("split", split_edges(&original, cfg.test_fraction, seed))?;
        let (report, _) = core("evaluate", evaluate_variant(&g, &original, &split, seed, &cfg, (ac.value, ac.degenerate)))?;
        reports.push(report);
    }
    stage("write", fs::create_dir_all(&cfg.out).map_err(Into::into))?;
    let json = serde_json::json!({ "per_seed": reports, "aggregate": aggregate(&reports) });
    stage("write", write(&cfg.out.join("metrics.json"), &(serde_json::to_string_pretty(&json).expect("plain data") + "\n")))?;
    let mut csv = MetricsReport::csv_header() + "\n";
    for r in &reports {
        csv += &(r.csv_row() + "\n");
    }
    stage("write", write(&cfg.out.join("metrics.csv"), &csv))?;
    print!("{csv}");
    Ok(())
}

fn pipeline(opts: Opts) -> Result<(), StageError> {
    let s = stage("config", opts.resolve())?;
    let cfg = stage("config", s.pipeline())?;
    let art = core("pipeline", run_pipeline(&cfg))?;
    let table = core(
        "compare",
        compare_runs(&[art.report.column("original", false), art.report.column("repaired", true)]),
    )?;
    print!("{}", table.render());
    Ok(())
}

fn compare(opts: CompareOpts) -> Result<(), StageError> {
    let mut columns = Vec::new();
    for path in &opts.reports {
        let file = if path.is_dir() { path.join(dyadicot::pipeline::REPORT_FILE) } else { path.clone() };
        let report = core("load", read_report(&file))?;
        let label = file
            .parent()
            .and_then(|p| p.file_name())
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".into());
        if opts.reports.len() == 1 {
            columns.push(report.column("original", false));
            columns.push(report.column("repaired", true));
        } else {
            columns.push(report.column(&format!("{label}/original"), false));
            columns.push(report.column(&format!("{label}/repaired"), true));
        }
    }
    let table = core("compare", compare_runs(&columns))?;
    print!("{}", table.render());
    if let Some(out) = &opts.out {
        stage("write", fs::create_dir_all(out).map_err(Into::into))?;
        stage("write", write(&out.join("comparison.csv"), &table.to_csv()))?;
    }
    Ok(())
}

fn read_embedding(path: &Path) -> dyadicot::Result<EmbeddingMatrix> {
    if path.extension().is_some_and(|e| e == "txt") {
        read_embedding_text(path)
    } else {
        read_embedding_binary(path)
    }
}

fn project(opts: ProjectOpts) -> Result<(), StageError> {
    let s = stage("config", opts.opts.resolve())?;
    let paths = stage("config", s.dataset())?;
    let out = stage("config", s.out())?;
    let g = load(&paths)?;
    let emb = core("load", read_embedding(&opts.embedding))?;
    if emb.node_ids != g.node_ids() {
        return Err(StageError {
            stage: "project",
            source: anyhow!("embedding rows do not match the dataset's nodes"),
        });
    }
    let (nodes, pairs) = core("project", projection_tables(&emb, &g))?;
    stage("write", fs::create_dir_all(&out).map_err(Into::into))?;
    stage("write", write(&out.join("projection_nodes.csv"), &nodes))?;
    stage("write", write(&out.join("projection_pairs.csv"), &pairs))?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), StageError> {
    match cli.command {
        Command::Ingest(o) => ingest(o),
        Command::Repair(o) => repair(o),
        Command::Embed(o) => embed(o),
        Command::Evaluate(o) => evaluate(o),
        Command::Pipeline(o) => pipeline(o),
        Command::Compare(o) => compare(o),
        Command::Project(o) => project(o),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_the_config_file() {
        let file: Settings = toml::from_str("eta = 0.25\nseeds = [3, 4]\nsolver = \"entropic\"\ndim = 16\n").unwrap();
        let mut s = Settings { eta: Some(0.75), ..Default::default() };
        s.fill_from(file);
        assert_eq!(s.eta, Some(0.75));
        assert_eq!(s.seeds, Some(vec![3, 4]));
        assert_eq!(s.repair().method.kind, SolverKind::Entropic);
        assert_eq!(s.skipgram().dim, 16);
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        assert!(toml::from_str::<Settings>("etaa = 0.3\n").is_err());
    }

    #[test]
    fn command_line_parses() {
        Cli::try_parse_from([
            "dyadicot", "pipeline", "--dataset", "d", "--eta", "0.3", "--mode", "binary", "--solver", "exact",
            "--seeds", "0,1,2", "--test-fraction", "0.2", "--out", "o", "--jobs", "2",
        ])
        .unwrap();
    }

    #[test]
    fn stage_errors_keep_the_inner_stage() {
        let e = core::<()>("pipeline", Err(Error::SingleGroup.in_stage("repair"))).unwrap_err();
        assert_eq!(e.stage, "repair");
    }
}
