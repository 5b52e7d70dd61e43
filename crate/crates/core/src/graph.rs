//! Attributed graph model, dataset ingestion and the two splits the pipeline
//! relies on: nodes by sensitive group and edges into train/test sets.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Undirected weighted edge with `u < v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

/// Node attributes, a dense `[0, 1]` adjacency and one sensitive category per node.
///
/// Graphs built by [`load_dataset`] are symmetric and binary. Repaired graphs
/// may carry real weights and, when symmetrization is disabled, asymmetric rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    node_ids: Vec<String>,
    attributes: Array2<f64>,
    adjacency: Array2<f64>,
    sensitive: Vec<usize>,
    group_names: BTreeMap<usize, String>,
}

impl Graph {
    pub fn new(
        node_ids: Vec<String>,
        attributes: Array2<f64>,
        adjacency: Array2<f64>,
        sensitive: Vec<usize>,
    ) -> Result<Self> {
        let n = node_ids.len();
        if attributes.nrows() != n {
            return Err(Error::InvalidGraph(format!(
                "{} attribute rows for {n} nodes",
                attributes.nrows()
            )));
        }
        if adjacency.dim() != (n, n) {
            return Err(Error::InvalidGraph(format!(
                "adjacency is {:?}, expected ({n}, {n})",
                adjacency.dim()
            )));
        }
        if sensitive.len() != n {
            return Err(Error::InvalidGraph(format!(
                "{} sensitive values for {n} nodes",
                sensitive.len()
            )));
        }
        if attributes.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidGraph("non-finite attribute value".into()));
        }
        for ((i, j), &w) in adjacency.indexed_iter() {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::InvalidGraph(format!(
                    "adjacency entry ({i}, {j}) = {w} outside [0, 1]"
                )));
            }
            if i == j && w != 0.0 {
                return Err(Error::InvalidGraph(format!("self-loop on node {i}")));
            }
        }
        let group_names = sensitive
            .iter()
            .map(|&s| (s, s.to_string()))
            .collect::<BTreeMap<_, _>>();
        Ok(Graph {
            node_ids,
            attributes,
            adjacency,
            sensitive,
            group_names,
        })
    }

    /// Builds a symmetric graph from an undirected edge list. Repeated pairs keep
    /// the largest weight; self-loops are dropped.
    pub fn from_edges(
        node_ids: Vec<String>,
        attributes: Array2<f64>,
        sensitive: Vec<usize>,
        edges: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let n = node_ids.len();
        let mut adjacency = Array2::<f64>::zeros((n, n));
        for &(u, v, w) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({u}, {v}) out of range for {n} nodes"
                )));
            }
            if u == v {
                continue;
            }
            let w = adjacency[[u, v]].max(w);
            adjacency[[u, v]] = w;
            adjacency[[v, u]] = w;
        }
        Graph::new(node_ids, attributes, adjacency, sensitive)
    }

    /// Attaches human-readable names to sensitive category ids.
    pub fn with_group_names(mut self, names: BTreeMap<usize, String>) -> Self {
        for (id, name) in names {
            if self.group_names.contains_key(&id) {
                self.group_names.insert(id, name);
            }
        }
        self
    }

    pub fn n_nodes(&self) -> usize {
        self.node_ids.len()
    }

    pub fn attr_dim(&self) -> usize {
        self.attributes.ncols()
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn attributes(&self) -> ArrayView2<'_, f64> {
        self.attributes.view()
    }

    pub fn adjacency(&self) -> ArrayView2<'_, f64> {
        self.adjacency.view()
    }

    pub fn sensitive(&self) -> &[usize] {
        &self.sensitive
    }

    pub fn group_names(&self) -> &BTreeMap<usize, String> {
        &self.group_names
    }

    /// Distinct sensitive values in increasing order.
    pub fn groups(&self) -> Vec<usize> {
        self.sensitive
            .iter()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn is_symmetric(&self) -> bool {
        let a = &self.adjacency;
        (0..a.nrows()).all(|i| (0..i).all(|j| a[[i, j]] == a[[j, i]]))
    }

    pub fn is_binary(&self) -> bool {
        self.adjacency.iter().all(|&w| w == 0.0 || w == 1.0)
    }

    /// Undirected edges `u < v` with a positive weight in either direction.
    /// The weight is the larger of the two directed entries.
    pub fn edges(&self) -> Vec<Edge> {
        let a = &self.adjacency;
        let n = self.n_nodes();
        let mut out = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                let w = a[[u, v]].max(a[[v, u]]);
                if w > 0.0 {
                    out.push(Edge { u, v, weight: w });
                }
            }
        }
        out
    }

    pub fn n_edges(&self) -> usize {
        let a = &self.adjacency;
        let n = self.n_nodes();
        (0..n)
            .map(|u| ((u + 1)..n).filter(|&v| a[[u, v]] > 0.0 || a[[v, u]] > 0.0).count())
            .sum()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[[u, v]] > 0.0 || self.adjacency[[v, u]] > 0.0
    }

    /// Copy of this graph with a new adjacency, keeping ids, attributes and groups.
    pub fn with_adjacency(&self, adjacency: Array2<f64>) -> Result<Graph> {
        let g = Graph::new(
            self.node_ids.clone(),
            self.attributes.clone(),
            adjacency,
            self.sensitive.clone(),
        )?;
        Ok(g.with_group_names(self.group_names.clone()))
    }

    /// Copy of this graph with new attributes and adjacency.
    pub fn with_features(&self, attributes: Array2<f64>, adjacency: Array2<f64>) -> Result<Graph> {
        let g = Graph::new(
            self.node_ids.clone(),
            attributes,
            adjacency,
            self.sensitive.clone(),
        )?;
        Ok(g.with_group_names(self.group_names.clone()))
    }

    /// The graph with the given undirected pairs removed from the adjacency.
    pub fn without_pairs(&self, pairs: &[(usize, usize)]) -> Result<Graph> {
        let mut adjacency = self.adjacency.clone();
        for &(u, v) in pairs {
            adjacency[[u, v]] = 0.0;
            adjacency[[v, u]] = 0.0;
        }
        self.with_adjacency(adjacency)
    }
}

/// Rows `[x_i | e_i]` of the nodes sharing one sensitive value.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupView {
    pub group_id: usize,
    pub rows: Array2<f64>,
    /// `member_index[r]` is the graph node behind row `r`.
    pub member_index: Vec<usize>,
    pub attr_dim: usize,
}

impl GroupView {
    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    pub fn attribute_block(&self) -> ArrayView2<'_, f64> {
        self.rows.slice(s![.., ..self.attr_dim])
    }

    pub fn adjacency_block(&self) -> ArrayView2<'_, f64> {
        self.rows.slice(s![.., self.attr_dim..])
    }
}

/// Splits the concatenated `[attributes | adjacency]` representation by
/// sensitive value, one view per observed value in increasing order.
pub fn split_groups(g: &Graph) -> Result<Vec<GroupView>> {
    let groups = g.groups();
    if groups.len() < 2 {
        return Err(Error::SingleGroup);
    }
    let features = concatenate(Axis(1), &[g.attributes(), g.adjacency()])
        .expect("attribute and adjacency blocks share the row count");
    Ok(groups
        .into_iter()
        .map(|k| {
            let member_index: Vec<usize> = (0..g.n_nodes())
                .filter(|&i| g.sensitive[i] == k)
                .collect();
            GroupView {
                group_id: k,
                rows: features.select(Axis(0), &member_index),
                member_index,
                attr_dim: g.attr_dim(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSplit {
    pub train_edges: Vec<(usize, usize)>,
    /// Non-edges sampled to balance the training set, disjoint from `test_neg`.
    pub train_neg: Vec<(usize, usize)>,
    pub test_pos: Vec<(usize, usize)>,
    pub test_neg: Vec<(usize, usize)>,
    pub seed: u64,
}

/// Holds out `round(test_fraction * |E|)` edges plus as many sampled
/// non-edges, and samples one non-edge per remaining training edge.
pub fn split_edges(g: &Graph, test_fraction: f64, seed: u64) -> Result<EdgeSplit> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::InvalidParameter(format!(
            "test_fraction {test_fraction} outside [0, 1)"
        )));
    }
    let mut edges: Vec<(usize, usize)> = g.edges().iter().map(|e| (e.u, e.v)).collect();
    if edges.is_empty() {
        return Err(Error::InvalidGraph("edge split needs at least one edge".into()));
    }
    let n_test = (test_fraction * edges.len() as f64).round() as usize;
    if n_test >= edges.len() {
        return Err(Error::InvalidParameter(format!(
            "test_fraction {test_fraction} leaves no training edges"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    edges.shuffle(&mut rng);
    let test_pos: Vec<_> = edges[..n_test].to_vec();
    let mut train_edges: Vec<_> = edges[n_test..].to_vec();
    train_edges.sort_unstable();

    let mut negatives = sample_non_edges(g, n_test + train_edges.len(), &mut rng)?;
    let train_neg = negatives.split_off(n_test);
    Ok(EdgeSplit {
        train_edges,
        train_neg,
        test_pos,
        test_neg: negatives,
        seed,
    })
}

fn sample_non_edges(g: &Graph, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<(usize, usize)>> {
    let n = g.n_nodes();
    let total_pairs = n * n.saturating_sub(1) / 2;
    let available = total_pairs - g.n_edges();
    if count > available {
        return Err(Error::InvalidGraph(format!(
            "need {count} non-edges but the graph only has {available}"
        )));
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    if 3 * count > available {
        let mut all: Vec<(usize, usize)> = (0..n)
            .flat_map(|u| ((u + 1)..n).map(move |v| (u, v)))
            .filter(|&(u, v)| !g.has_edge(u, v))
            .collect();
        let (chosen, _) = all.partial_shuffle(rng, count);
        return Ok(chosen.to_vec());
    }
    let mut seen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a == b {
            continue;
        }
        let pair = (a.min(b), a.max(b));
        if g.has_edge(pair.0, pair.1) || !seen.insert(pair) {
            continue;
        }
        out.push(pair);
    }
    Ok(out)
}

fn open_maybe_gz(path: &Path) -> Result<Box<dyn BufRead>> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut magic = [0u8; 2];
    let read = file.read(&mut magic).map_err(|e| Error::io(path, e))?;
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    if read == 2 && magic == [0x1f, 0x8b] {
        Ok(Box::new(BufReader::new(GzDecoder::new(file))))
    } else {
        Ok(Box::new(BufReader::new(file)))
    }
}

/// Orders category labels numerically when they all parse as integers,
/// lexicographically otherwise.
fn label_order(labels: &[String]) -> BTreeMap<String, usize> {
    let mut distinct: Vec<&String> = labels.iter().collect::<BTreeSet<_>>().into_iter().collect();
    if distinct.iter().all(|l| l.parse::<i64>().is_ok()) {
        distinct.sort_by_key(|l| l.parse::<i64>().unwrap());
    }
    distinct
        .into_iter()
        .enumerate()
        .map(|(i, l)| (l.clone(), i))
        .collect()
}

/// Reads a node file (`id \t a_1 .. a_d \t label`) and an edge file
/// (`id \t id` or `id \t id \t weight`), either possibly gzip-compressed.
///
/// Node order follows the node file. Edges are symmetrized, deduplicated and
/// stripped of self-loops; unweighted edges get weight 1.
pub fn load_dataset(node_file: &Path, edge_file: &Path) -> Result<Graph> {
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut values = Vec::new();
    let mut width = None;
    let mut index = HashMap::new();

    for (lineno, line) in open_maybe_gz(node_file)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(node_file, e))?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        let location = format!("{}:{}", node_file.display(), lineno + 1);
        if tokens.len() < 2 {
            return Err(Error::format(location, "expected `id [attributes...] label`"));
        }
        let d = tokens.len() - 2;
        match width {
            None => width = Some(d),
            Some(w) if w != d => {
                return Err(Error::format(
                    location,
                    format!("{d} attributes, previous rows had {w}"),
                ))
            }
            _ => {}
        }
        for tok in &tokens[1..tokens.len() - 1] {
            let x: f64 = tok
                .parse()
                .map_err(|_| Error::format(location.clone(), format!("bad attribute `{tok}`")))?;
            values.push(x);
        }
        let id = tokens[0].to_string();
        if index.insert(id.clone(), ids.len()).is_some() {
            return Err(Error::format(location, format!("duplicate node id `{id}`")));
        }
        ids.push(id);
        labels.push(tokens[tokens.len() - 1].to_string());
    }

    let n = ids.len();
    let d = width.unwrap_or(0);
    let attributes = Array2::from_shape_vec((n, d), values)
        .map_err(|e| Error::format(node_file.display().to_string(), e.to_string()))?;
    let order = label_order(&labels);
    let sensitive: Vec<usize> = labels.iter().map(|l| order[l]).collect();

    let mut edges = Vec::new();
    for (lineno, line) in open_maybe_gz(edge_file)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(edge_file, e))?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        let location = format!("{}:{}", edge_file.display(), lineno + 1);
        if tokens.len() != 2 && tokens.len() != 3 {
            return Err(Error::format(location, "expected `id id [weight]`"));
        }
        let lookup = |tok: &str| {
            index
                .get(tok)
                .copied()
                .ok_or_else(|| Error::UnknownNode(tok.to_string()))
        };
        let u = lookup(tokens[0])?;
        let v = lookup(tokens[1])?;
        let w = match tokens.get(2) {
            Some(tok) => tok
                .parse::<f64>()
                .map_err(|_| Error::format(location.clone(), format!("bad weight `{tok}`")))?,
            None => 1.0,
        };
        edges.push((u, v, w));
    }

    let names = order.into_iter().map(|(name, id)| (id, name)).collect();
    Ok(Graph::from_edges(ids, attributes, sensitive, &edges)?.with_group_names(names))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Writes the node file in the ingestion format, using group names as labels.
pub fn write_node_file(g: &Graph, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    for i in 0..g.n_nodes() {
        let mut line = g.node_ids[i].clone();
        for x in g.attributes.row(i) {
            line.push('\t');
            line.push_str(&x.to_string());
        }
        line.push('\t');
        line.push_str(&g.group_names[&g.sensitive[i]]);
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `id \t id` lines for binary graphs, or `id \t id \t weight` when
/// `weighted` is set.
pub fn write_edge_file(g: &Graph, path: &Path, weighted: bool) -> Result<()> {
    let mut w = create(path)?;
    for e in g.edges() {
        let (a, b) = (&g.node_ids[e.u], &g.node_ids[e.v]);
        let res = if weighted {
            writeln!(w, "{a}\t{b}\t{}", e.weight)
        } else {
            writeln!(w, "{a}\t{b}")
        };
        res.map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
