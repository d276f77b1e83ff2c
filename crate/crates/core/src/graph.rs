//! Graph, sensitive-group and cluster-label data model with the text formats
//! used to move them in and out of the toolkit.
//!
//! Adjacency is kept as a compressed neighbor list; the dense form is only
//! materialized on request (tests, tiny fixtures, debug dumps).

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Undirected, unweighted simple graph on nodes `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    /// Sorted unique pairs with `u < v`.
    edges: Vec<(usize, usize)>,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
}

impl Graph {
    /// Builds a graph from unordered pairs. Duplicates and reversed
    /// duplicates collapse to one edge.
    pub fn from_edges<I>(n: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut set = BTreeSet::new();
        for (u, v) in pairs {
            if u == v {
                return Err(Error::SelfLoop { line: 0, node: u });
            }
            if u >= n || v >= n {
                return Err(Error::Dimension(format!(
                    "edge ({u}, {v}) out of range for n = {n}"
                )));
            }
            set.insert((u.min(v), u.max(v)));
        }
        let edges: Vec<_> = set.into_iter().collect();

        let mut degree = vec![0usize; n];
        for &(u, v) in &edges {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut cursor = offsets[..n].to_vec();
        let mut neighbors = vec![0usize; offsets[n]];
        for &(u, v) in &edges {
            neighbors[cursor[u]] = v;
            cursor[u] += 1;
            neighbors[cursor[v]] = u;
            cursor[v] += 1;
        }
        for i in 0..n {
            neighbors[offsets[i]..offsets[i + 1]].sort_unstable();
        }

        Ok(Self {
            n,
            edges,
            offsets,
            neighbors,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n).map(|i| self.degree(i)).collect()
    }

    /// Squared Frobenius norm of the adjacency matrix, `2 |E|`.
    pub fn frobenius_sq(&self) -> f64 {
        2.0 * self.edges.len() as f64
    }

    /// `A X` for a dense `n x c` matrix `X`.
    pub fn mul_dense(&self, x: &Array2<f64>) -> Array2<f64> {
        assert_eq!(x.nrows(), self.n, "row count must equal node count");
        let c = x.ncols();
        let mut out = Array2::<f64>::zeros((self.n, c));
        for i in 0..self.n {
            let mut row = out.row_mut(i);
            for &j in self.neighbors(i) {
                row += &x.row(j);
            }
        }
        debug_assert_eq!(out.ncols(), c);
        out
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.n, self.n));
        for &(u, v) in &self.edges {
            a[[u, v]] = 1.0;
            a[[v, u]] = 1.0;
        }
        a
    }

    /// Relabels node `i` as `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                found: perm.len(),
            });
        }
        Self::from_edges(self.n, self.edges.iter().map(|&(u, v)| (perm[u], perm[v])))
    }

    pub fn validate(&self) -> ValidationReport {
        let isolated = (0..self.n).filter(|&i| self.degree(i) == 0).collect();
        ValidationReport {
            n: self.n,
            num_edges: self.edges.len(),
            symmetric: true,
            asymmetric_positions: Vec::new(),
            self_loops: Vec::new(),
            non_binary: Vec::new(),
            isolated,
            components: count_components(self.n, |i, f| {
                for &j in self.neighbors(i) {
                    f(j)
                }
            }),
        }
    }
}

/// Parses a whitespace-separated edge list. `#` starts a comment line and
/// blank lines are skipped. The node count is the largest of `max id + 1`,
/// `n_hint` and a `# nodes N` header.
pub fn load_edge_list<R: BufRead>(source: R, n_hint: Option<usize>) -> Result<Graph> {
    let mut pairs = Vec::new();
    let mut max_id = None;
    let mut declared = 0;
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if let Some(comment) = trimmed.strip_prefix('#') {
            let mut words = comment.split_whitespace();
            if let (Some("nodes"), Some(count)) = (words.next(), words.next()) {
                declared = count.parse().unwrap_or(0);
            }
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        if tokens.len() == 3 && tokens[2].parse::<f64>().is_ok() {
            return Err(Error::WeightedEdge { line: lineno });
        }
        if tokens.len() != 2 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected two node ids, found {} tokens", tokens.len()),
            });
        }
        let parse = |t: &str| {
            t.parse::<usize>().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("invalid node id {t:?}"),
            })
        };
        let (u, v) = (parse(tokens[0])?, parse(tokens[1])?);
        if u == v {
            return Err(Error::SelfLoop {
                line: lineno,
                node: u,
            });
        }
        max_id = Some(max_id.unwrap_or(0).max(u).max(v));
        pairs.push((u, v));
    }
    let Some(max_id) = max_id else {
        return Err(Error::EmptyGraph);
    };
    let n = (max_id + 1).max(n_hint.unwrap_or(0)).max(declared);
    Graph::from_edges(n, pairs)
}

pub fn save_edge_list<W: Write>(graph: &Graph, mut sink: W) -> Result<()> {
    writeln!(sink, "# nodes {} edges {}", graph.n(), graph.num_edges())?;
    for &(u, v) in graph.edges() {
        writeln!(sink, "{u} {v}")?;
    }
    Ok(())
}

/// Sensitive-attribute partition of the nodes into `m` nonempty groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupAssignment {
    labels: Vec<usize>,
    names: Vec<String>,
}

impl GroupAssignment {
    /// Dense ids `0..m`; every id below `m` must occur.
    pub fn from_labels(labels: Vec<usize>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidConfig("group vector is empty".into()));
        }
        let m = labels.iter().max().unwrap() + 1;
        let mut seen = vec![false; m];
        for &g in &labels {
            seen[g] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidConfig(format!(
                "group id {missing} has no members"
            )));
        }
        let names = (0..m).map(|g| g.to_string()).collect();
        Ok(Self { labels, names })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn m(&self) -> usize {
        self.names.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.m()];
        for &g in &self.labels {
            sizes[g] += 1;
        }
        sizes
    }

    /// Node `i` moves to position `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut labels = vec![0; self.labels.len()];
        for (i, &g) in self.labels.iter().enumerate() {
            labels[perm[i]] = g;
        }
        Self {
            labels,
            names: self.names.clone(),
        }
    }
}

/// Reads one group token per line; line `i` is the group of node `i`.
/// When the tokens are exactly the integers `0..m` they keep their values;
/// any other tokens become dense ids in first-appearance order.
pub fn load_groups<R: BufRead>(source: R, n: usize) -> Result<GroupAssignment> {
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut names = Vec::new();
    let mut labels = Vec::with_capacity(n);
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        let token = line.trim();
        if token.is_empty() {
            return Err(Error::EmptyToken { line: idx + 1 });
        }
        let next = ids.len();
        let id = *ids.entry(token.to_string()).or_insert_with(|| {
            names.push(token.to_string());
            next
        });
        labels.push(id);
    }
    if labels.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: labels.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::InvalidConfig("group file is empty".into()));
    }
    let numeric: Option<Vec<usize>> = names.iter().map(|t| t.parse().ok()).collect();
    if let Some(values) = numeric {
        let mut sorted = values.clone();
        sorted.sort_unstable();
        if sorted.iter().enumerate().all(|(i, &v)| i == v) {
            let labels = labels.into_iter().map(|id| values[id]).collect();
            let names = (0..values.len()).map(|g| g.to_string()).collect();
            return Ok(GroupAssignment { labels, names });
        }
    }
    Ok(GroupAssignment { labels, names })
}

pub fn save_groups<W: Write>(groups: &GroupAssignment, mut sink: W) -> Result<()> {
    for &g in groups.labels() {
        writeln!(sink, "{}", groups.names()[g])?;
    }
    Ok(())
}

/// Hard clustering with `k >= 2` cluster ids `0..k`. Clusters may be empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterLabels {
    labels: Vec<usize>,
    k: usize,
}

impl ClusterLabels {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidConfig(format!("k must be >= 2, got {k}")));
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::LabelOutOfRange { label, k });
        }
        Ok(Self { labels, k })
    }

    /// Uses `max label + 1` (at least 2) as the cluster count.
    pub fn from_labels(labels: Vec<usize>) -> Result<Self> {
        let k = labels.iter().max().map_or(2, |m| (m + 1).max(2));
        Self::new(labels, k)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &c in &self.labels {
            sizes[c] += 1;
        }
        sizes
    }
}

/// Writes `node,cluster` CSV.
pub fn save_membership<W: Write>(labels: &ClusterLabels, mut sink: W) -> Result<()> {
    writeln!(sink, "node,cluster")?;
    for (i, c) in labels.labels().iter().enumerate() {
        writeln!(sink, "{i},{c}")?;
    }
    Ok(())
}

/// Reads `node,cluster` CSV. Rows may come in any order but must cover
/// every node exactly once. `k` defaults to `max cluster + 1`.
pub fn load_membership<R: BufRead>(source: R, n: usize, k: Option<usize>) -> Result<ClusterLabels> {
    let mut labels = vec![None; n];
    let mut rows = 0;
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || (lineno == 1 && trimmed.starts_with("node")) {
            continue;
        }
        let mut parts = trimmed.split(',').map(str::trim);
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::Parse {
                line: lineno,
                msg: "expected `node,cluster`".into(),
            });
        };
        let parse = |t: &str| {
            t.parse::<usize>().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("invalid integer {t:?}"),
            })
        };
        let (node, cluster) = (parse(a)?, parse(b)?);
        if node >= n {
            return Err(Error::LabelOutOfRange { label: node, k: n });
        }
        if labels[node].replace(cluster).is_some() {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("node {node} listed twice"),
            });
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: rows,
        });
    }
    let labels: Vec<usize> = labels.into_iter().map(Option::unwrap).collect();
    match k {
        Some(k) => ClusterLabels::new(labels, k),
        None => ClusterLabels::from_labels(labels),
    }
}

/// Structural diagnostics. Nothing here is an error; callers decide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n: usize,
    pub num_edges: usize,
    pub symmetric: bool,
    pub asymmetric_positions: Vec<(usize, usize)>,
    pub self_loops: Vec<usize>,
    /// Positions holding something other than 0 or 1.
    pub non_binary: Vec<(usize, usize)>,
    pub isolated: Vec<usize>,
    pub components: usize,
}

impl ValidationReport {
    pub fn is_simple_undirected(&self) -> bool {
        self.symmetric && self.self_loops.is_empty() && self.non_binary.is_empty()
    }
}

/// Validates an arbitrary square adjacency-like matrix. Connectivity treats
/// any nonzero entry in either direction as a link.
pub fn validate_matrix(a: ArrayView2<f64>) -> ValidationReport {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "adjacency must be square");
    let mut asymmetric_positions = Vec::new();
    let mut self_loops = Vec::new();
    let mut non_binary = Vec::new();
    let mut num_edges = 0;
    for i in 0..n {
        if a[[i, i]] != 0.0 {
            self_loops.push(i);
        }
        for j in 0..n {
            let x = a[[i, j]];
            if x != 0.0 && x != 1.0 {
                non_binary.push((i, j));
            }
            if j > i {
                if x != a[[j, i]] {
                    asymmetric_positions.push((i, j));
                }
                if x != 0.0 || a[[j, i]] != 0.0 {
                    num_edges += 1;
                }
            }
        }
    }
    let linked = |i: usize, j: usize| i != j && (a[[i, j]] != 0.0 || a[[j, i]] != 0.0);
    let isolated = (0..n).filter(|&i| (0..n).all(|j| !linked(i, j))).collect();
    let components = count_components(n, |i, f| {
        for j in 0..n {
            if linked(i, j) {
                f(j)
            }
        }
    });
    ValidationReport {
        n,
        num_edges,
        symmetric: asymmetric_positions.is_empty(),
        asymmetric_positions,
        self_loops,
        non_binary,
        isolated,
        components,
    }
}

fn count_components<F>(n: usize, mut for_each_neighbor: F) -> usize
where
    F: FnMut(usize, &mut dyn FnMut(usize)),
{
    let mut seen = vec![false; n];
    let mut stack = Vec::new();
    let mut components = 0;
    for start in 0..n {
        if seen[start] {
            continue;
        }
        components += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(i) = stack.pop() {
            for_each_neighbor(i, &mut |j| {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            });
        }
    }
    components
}
