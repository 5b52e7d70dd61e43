//! End-to-end runs: load, repair, then for every seed split edges, embed the
//! original and the repaired graph on the same split, predict links and
//! measure. Reports contain no timestamps, so equal inputs give equal bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::embed::{
    edge_features, pca_project, random_walks, skipgram_train, write_embedding_binary, Combiner, EmbeddingMatrix,
    SkipGramParams, WalkParams,
};
use crate::error::{Error, Result};
use crate::graph::{load_dataset, split_edges, write_edge_file, write_node_file, EdgeSplit, Graph};
use crate::metrics::bias::TRAIN_FRACTION;
use crate::metrics::{
    aggregate, assortativity, assumption_diagnostics, dber, ddi, dyadic_rb, link_prediction_eval, min_dber_bound,
    representation_bias, AggregateReport, ClassifierConfig, MetricsReport, Summary,
};
use crate::repair::{repair_graph, RepairConfig, RepairMeta};

pub const REPORT_FILE: &str = "report.json";
pub const METRICS_CSV: &str = "metrics.csv";
pub const FAILED_MARKER: &str = "FAILED";

/// Package version plus `git describe` of the build.
pub fn code_version() -> String {
    format!("{} ({})", env!("CARGO_PKG_VERSION"), env!("DYADICOT_GIT_DESCRIBE"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetPaths {
    pub nodes: PathBuf,
    pub edges: PathBuf,
}

impl DatasetPaths {
    /// Finds the node and edge files in a dataset directory: `*.content` and
    /// `*.cites`, `*.nodes` and `*.edges`, or `nodes.*` and `edges.*`,
    /// optionally gzipped.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        let mut names: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
        names.sort();
        let find = |suffixes: &[&str], prefix: &str| -> Option<PathBuf> {
            names
                .iter()
                .find(|p| {
                    let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
                    let base = name.strip_suffix(".gz").unwrap_or(name);
                    suffixes.iter().any(|s| base.ends_with(s)) || base.starts_with(prefix)
                })
                .cloned()
        };
        let nodes = find(&[".content", ".nodes"], "nodes.");
        let edges = find(&[".cites", ".edges"], "edges.");
        match (nodes, edges) {
            (Some(nodes), Some(edges)) => Ok(DatasetPaths { nodes, edges }),
            _ => Err(Error::format(
                dir.display().to_string(),
                "dataset directory needs a node file (*.content, *.nodes or nodes.*) and an edge file (*.cites, *.edges or edges.*)",
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub dataset: DatasetPaths,
    pub repair: RepairConfig,
    /// Walk settings; the seed is replaced by each run seed.
    pub walks: WalkParams,
    /// Skip-gram settings; the seed is replaced by each run seed.
    pub skipgram: SkipGramParams,
    pub classifier: ClassifierConfig,
    pub combiner: Combiner,
    pub test_fraction: f64,
    pub seeds: Vec<u64>,
    /// Write embeddings and projection tables besides the report.
    pub write_artifacts: bool,
    #[serde(skip)]
    pub out: PathBuf,
}

impl PipelineConfig {
    pub fn new(dataset: DatasetPaths, out: PathBuf) -> Self {
        PipelineConfig {
            dataset,
            repair: RepairConfig::default(),
            walks: WalkParams::default(),
            skipgram: SkipGramParams::default(),
            classifier: ClassifierConfig::default(),
            combiner: Combiner::default(),
            test_fraction: 0.1,
            seeds: vec![0, 1, 2, 3, 4],
            write_artifacts: true,
            out,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::InvalidParameter("at least one seed is required".into()));
        }
        for p in [&self.dataset.nodes, &self.dataset.edges] {
            if !p.exists() {
                return Err(Error::io(p, std::io::Error::from(std::io::ErrorKind::NotFound)));
            }
        }
        if !(0.0..1.0).contains(&self.test_fraction) || self.test_fraction == 0.0 {
            return Err(Error::InvalidParameter(format!(
                "test fraction must be in (0, 1), got {}",
                self.test_fraction
            )));
        }
        self.repair.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n_nodes: usize,
    pub n_edges: usize,
    pub attr_dim: usize,
    pub n_groups: usize,
}

impl DatasetSummary {
    pub fn of(g: &Graph) -> Self {
        DatasetSummary {
            n_nodes: g.n_nodes(),
            n_edges: g.n_edges(),
            attr_dim: g.attr_dim(),
            n_groups: g.groups().len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantReport {
    pub assortativity: f64,
    pub assortativity_degenerate: bool,
    pub per_seed: Vec<MetricsReport>,
    pub aggregate: AggregateReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub code_version: String,
    pub config: PipelineConfig,
    pub dataset: DatasetSummary,
    pub repair: RepairMeta,
    pub original: VariantReport,
    pub repaired: VariantReport,
}

/// Everything a run leaves behind, with the paths written under `out`.
#[derive(Debug, Clone)]
pub struct RunArtifact {
    pub report: RunReport,
    pub files: Vec<PathBuf>,
}

struct Variant<'a> {
    name: &'static str,
    graph: &'a Graph,
}

/// Embeds `graph` without the split's test edges, predicts links and
/// measures. Sensitive values and the edge list for DyadicRB come from
/// `original`; `ac` is the graph's precomputed assortativity.
pub fn evaluate_variant(
    graph: &Graph,
    original: &Graph,
    split: &EdgeSplit,
    seed: u64,
    cfg: &PipelineConfig,
    ac: (f64, bool),
) -> Result<(MetricsReport, EmbeddingMatrix)> {
    let train_graph = graph.without_pairs(&split.test_pos).map_err(|e| e.in_stage("split"))?;
    let walks = WalkParams { seed, ..cfg.walks };
    let corpus = random_walks(&train_graph, &walks).map_err(|e| e.in_stage("walks"))?;
    let sg = SkipGramParams { seed, ..cfg.skipgram };
    let emb = skipgram_train(&corpus, graph.node_ids(), &sg).map_err(|e| e.in_stage("skipgram"))?;

    let clf = ClassifierConfig { seed, ..cfg.classifier };
    let sensitive = original.sensitive();
    let lp = link_prediction_eval(&emb, split, sensitive, cfg.combiner, &clf).map_err(|e| e.in_stage("predict"))?;
    let measure = |e: Error| e.in_stage("measure");
    let rb = representation_bias(&emb, sensitive, TRAIN_FRACTION, seed, &clf).map_err(measure)?;
    let edges: Vec<(usize, usize)> = original.edges().iter().map(|e| (e.u, e.v)).collect();
    let drb = dyadic_rb(&emb, &edges, sensitive, seed, &clf).map_err(measure)?;
    let report = MetricsReport {
        seed,
        acc: lp.acc,
        ddi: ddi(&lp.sample).ok(),
        dber: dber(&lp.sample).ok(),
        rb,
        dyadic_rb: drb,
        assortativity: ac.0,
        assortativity_degenerate: ac.1,
        min_dber_bound: min_dber_bound(&lp.sample).ok(),
        diagnostics: assumption_diagnostics(&lp.sample),
    };
    Ok((report, emb))
}

/// PCA table `id,proj_1..proj_k,label` for rows of `features`.
pub fn emit_projection(features: ArrayView2<'_, f64>, ids: &[String], labels: &[String], k: usize) -> Result<String> {
    if features.nrows() == 0 {
        return Err(Error::InvalidParameter("no embedding rows to project".into()));
    }
    if ids.len() != features.nrows() || labels.len() != features.nrows() {
        return Err(Error::Dimension("ids, labels and features differ in length".into()));
    }
    let pca = pca_project(features, k)?;
    let mut out = String::from("id");
    for c in 1..=k {
        let _ = write!(out, ",proj_{c}");
    }
    out.push_str(",label\n");
    for (r, (id, label)) in ids.iter().zip(labels).enumerate() {
        out.push_str(id);
        for c in 0..k {
            let _ = write!(out, ",{:?}", pca.projected[[r, c]]);
        }
        let _ = writeln!(out, ",{label}");
    }
    Ok(out)
}

/// Node table colored by sensitive group and pair table colored by
/// same/different group for the graph's edges.
pub fn projection_tables(emb: &EmbeddingMatrix, g: &Graph) -> Result<(String, String)> {
    let names = g.group_names();
    let labels: Vec<String> = g.sensitive().iter().map(|s| names[s].clone()).collect();
    let nodes = emit_projection(emb.vectors.view(), g.node_ids(), &labels, 2)?;
    let edges: Vec<(usize, usize)> = g.edges().iter().map(|e| (e.u, e.v)).collect();
    let pair_features = edge_features(emb, &edges, Combiner::Concat)?;
    let ids = g.node_ids();
    let pair_ids: Vec<String> = edges.iter().map(|&(u, v)| format!("{}|{}", ids[u], ids[v])).collect();
    let s = g.sensitive();
    let pair_labels: Vec<String> = edges
        .iter()
        .map(|&(u, v)| if s[u] == s[v] { "same" } else { "different" }.to_string())
        .collect();
    let pairs = emit_projection(pair_features.view(), &pair_ids, &pair_labels, 2)?;
    Ok((nodes, pairs))
}

fn write_file(path: PathBuf, contents: &[u8], files: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    files.push(path);
    Ok(())
}

fn run_stages(cfg: &PipelineConfig) -> Result<RunArtifact> {
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    let mut files = Vec::new();
    let g = load_dataset(&cfg.dataset.nodes, &cfg.dataset.edges).map_err(|e| e.in_stage("load"))?;
    log::info!("loaded {} nodes, {} edges, {} groups", g.n_nodes(), g.n_edges(), g.groups().len());

    let repaired = repair_graph(&g, &cfg.repair).map_err(|e| e.in_stage("repair"))?;
    if cfg.write_artifacts {
        let nodes = cfg.out.join("repaired.nodes");
        let edges = cfg.out.join("repaired.edges");
        write_node_file(&repaired.graph, &nodes).map_err(|e| e.in_stage("write"))?;
        write_edge_file(&repaired.graph, &edges, true).map_err(|e| e.in_stage("write"))?;
        files.extend([nodes, edges]);
    }

    let ac_of = |graph: &Graph| -> Result<(f64, bool)> {
        let a = assortativity(graph).map_err(|e| e.in_stage("measure"))?;
        Ok((a.value, a.degenerate))
    };
    let variants = [
        (Variant { name: "original", graph: &g }, ac_of(&g)?),
        (
            Variant {
                name: "repaired",
                graph: &repaired.graph,
            },
            ac_of(&repaired.graph)?,
        ),
    ];
    log::info!("assortativity original {:.4}, repaired {:.4}", variants[0].1 .0, variants[1].1 .0);

    let mut per_seed: BTreeMap<&str, Vec<MetricsReport>> = BTreeMap::new();
    for (i, &seed) in cfg.seeds.iter().enumerate() {
        let split = split_edges(&g, cfg.test_fraction, seed).map_err(|e| e.in_stage("split"))?;
        for (variant, ac) in &variants {
            log::info!("seed {seed}: {} pipeline", variant.name);
            let (report, emb) = evaluate_variant(variant.graph, &g, &split, seed, cfg, *ac)?;
            if cfg.write_artifacts {
                let path = cfg.out.join(format!("embedding_{}_seed{seed}.bin", variant.name));
                write_embedding_binary(&emb, &path).map_err(|e| e.in_stage("write"))?;
                files.push(path);
                if i == 0 {
                    let (nodes, pairs) = projection_tables(&emb, &g).map_err(|e| e.in_stage("project"))?;
                    write_file(cfg.out.join(format!("projection_nodes_{}.csv", variant.name)), nodes.as_bytes(), &mut files)?;
                    write_file(cfg.out.join(format!("projection_pairs_{}.csv", variant.name)), pairs.as_bytes(), &mut files)?;
                }
            }
            per_seed.entry(variant.name).or_default().push(report);
        }
    }

    let mut variant_report = |name: &str, ac: (f64, bool)| {
        let reports = per_seed.remove(name).unwrap_or_default();
        VariantReport {
            assortativity: ac.0,
            assortativity_degenerate: ac.1,
            aggregate: aggregate(&reports),
            per_seed: reports,
        }
    };
    let original = variant_report("original", variants[0].1);
    let repaired_report = variant_report("repaired", variants[1].1);
    let report = RunReport {
        code_version: code_version(),
        config: cfg.clone(),
        dataset: DatasetSummary::of(&g),
        repair: repaired.meta,
        original,
        repaired: repaired_report,
    };

    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    write_file(cfg.out.join(REPORT_FILE), json.as_bytes(), &mut files)?;
    let mut csv = format!("variant,{}\n", MetricsReport::csv_header());
    for (name, v) in [("original", &report.original), ("repaired", &report.repaired)] {
        for r in &v.per_seed {
            let _ = writeln!(csv, "{name},{}", r.csv_row());
        }
    }
    write_file(cfg.out.join(METRICS_CSV), csv.as_bytes(), &mut files)?;
    Ok(RunArtifact { report, files })
}

/// Runs the whole pipeline, writing into `cfg.out`. On failure a `FAILED`
/// marker with the stage-tagged error is left next to any partial output.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunArtifact> {
    fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    let marker = cfg.out.join(FAILED_MARKER);
    if marker.exists() {
        fs::remove_file(&marker).map_err(|e| Error::io(&marker, e))?;
    }
    let result = run_stages(cfg);
    if let Err(e) = &result {
        let _ = fs::write(&marker, format!("{e}\n"));
    }
    result
}

pub fn read_report(path: &Path) -> Result<RunReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// One column of a comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonColumn {
    pub label: String,
    pub dataset: DatasetSummary,
    pub metrics: AggregateReport,
    pub assortativity: f64,
}

impl RunReport {
    pub fn column(&self, label: &str, repaired: bool) -> ComparisonColumn {
        let v = if repaired { &self.repaired } else { &self.original };
        ComparisonColumn {
            label: label.to_string(),
            dataset: self.dataset.clone(),
            metrics: v.aggregate,
            assortativity: v.assortativity,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub labels: Vec<String>,
    /// `(metric name, one summary per column)`.
    pub rows: Vec<(String, Vec<Option<Summary>>)>,
}

fn fmt_num(x: f64) -> String {
    let s = format!("{x:.3}");
    if let Some(rest) = s.strip_prefix("0.") {
        format!(".{rest}")
    } else if let Some(rest) = s.strip_prefix("-0.") {
        format!("-.{rest}")
    } else {
        s
    }
}

impl ComparisonTable {
    /// Differences of every column's mean from the first column's.
    pub fn deltas(&self) -> Vec<(String, Vec<Option<f64>>)> {
        self.rows
            .iter()
            .map(|(name, cells)| {
                let base = cells.first().copied().flatten();
                let d = cells
                    .iter()
                    .map(|c| base.zip(*c).map(|(b, c)| c.mean - b.mean))
                    .collect();
                (name.clone(), d)
            })
            .collect()
    }

    /// Plain-text table with `mean±std` cells.
    pub fn render(&self) -> String {
        let mut cells: Vec<Vec<String>> = vec![std::iter::once("metric".to_string()).chain(self.labels.iter().cloned()).collect()];
        for (name, row) in &self.rows {
            let mut line = vec![name.clone()];
            for c in row {
                line.push(match c {
                    Some(s) => format!("{}±{}", fmt_num(s.mean), fmt_num(s.std)),
                    None => "n/a".into(),
                });
            }
            cells.push(line);
        }
        let widths: Vec<usize> = (0..cells[0].len())
            .map(|j| cells.iter().map(|r| r[j].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (i, row) in cells.iter().enumerate() {
            let padded: Vec<String> = row
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:<w$}", w = *w))
                .collect();
            out.push_str(padded.join("  ").trim_end());
            out.push('\n');
            if i == 0 {
                out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
                out.push('\n');
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric");
        for l in &self.labels {
            let _ = write!(out, ",{l}_mean,{l}_std");
        }
        out.push('\n');
        for (name, row) in &self.rows {
            out.push_str(name);
            for c in row {
                match c {
                    Some(s) => {
                        let _ = write!(out, ",{},{}", s.mean, s.std);
                    }
                    None => out.push_str(",,"),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Side-by-side ACC, DDI, RB, DyadicRB and AC of runs on the same dataset.
pub fn compare_runs(columns: &[ComparisonColumn]) -> Result<ComparisonTable> {
    if columns.len() < 2 {
        return Err(Error::InvalidParameter("comparison needs at least two runs".into()));
    }
    if columns.iter().any(|c| c.dataset != columns[0].dataset) {
        return Err(Error::InvalidParameter("runs were made on different datasets".into()));
    }
    let pick = |f: &dyn Fn(&ComparisonColumn) -> Option<Summary>| -> Vec<Option<Summary>> { columns.iter().map(f).collect() };
    let rows = vec![
        ("ACC".to_string(), pick(&|c| c.metrics.acc)),
        ("DDI".to_string(), pick(&|c| c.metrics.ddi)),
        ("DBER".to_string(), pick(&|c| c.metrics.dber)),
        ("RB".to_string(), pick(&|c| c.metrics.rb)),
        ("DyadicRB".to_string(), pick(&|c| c.metrics.dyadic_rb)),
        (
            "AC".to_string(),
            pick(&|c| {
                Some(Summary {
                    mean: c.assortativity,
                    std: 0.0,
                    n: 1,
                })
            }),
        ),
    ];
    Ok(ComparisonTable {
        labels: columns.iter().map(|c| c.label.clone()).collect(),
        rows,
    })
}
