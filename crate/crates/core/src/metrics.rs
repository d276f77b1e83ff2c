//! Clustering quality (modularity, accuracy) and fairness (average balance,
//! neighbor proportionality) scores.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ClusterLabels, Graph, GroupAssignment};

fn group_counts(members: impl IntoIterator<Item = usize>, groups: &GroupAssignment) -> Vec<usize> {
    let mut counts = vec![0usize; groups.m()];
    for i in members {
        counts[groups.labels()[i]] += 1;
    }
    counts
}

/// min over ordered pairs of count ratios equals smallest / largest count
fn min_max_ratio(counts: &[usize]) -> f64 {
    let max = counts.iter().copied().max().unwrap_or(0);
    let min = counts.iter().copied().min().unwrap_or(0);
    if max == 0 {
        0.0
    } else {
        min as f64 / max as f64
    }
}

/// Balance of one cluster: smallest group count over largest. A group with no
/// member in the cluster, or an empty cluster, gives 0.
pub fn balance_of_cluster(members: &[usize], groups: &GroupAssignment) -> Result<f64> {
    if groups.m() < 2 {
        return Err(Error::TooFewGroups(groups.m()));
    }
    Ok(min_max_ratio(&group_counts(members.iter().copied(), groups)))
}

/// Mean balance over all `k` clusters (empty ones count as 0) and the
/// per-cluster values.
pub fn average_balance(labels: &ClusterLabels, groups: &GroupAssignment) -> Result<(f64, Vec<f64>)> {
    if groups.m() < 2 {
        return Err(Error::TooFewGroups(groups.m()));
    }
    check_len(labels.n(), groups.n())?;
    let table = contingency(labels, groups);
    let per_cluster: Vec<f64> = table.iter().map(|row| min_max_ratio(row)).collect();
    let mean = per_cluster.iter().sum::<f64>() / per_cluster.len() as f64;
    Ok((mean, per_cluster))
}

/// `k x m` table of group counts per cluster.
pub fn contingency(labels: &ClusterLabels, groups: &GroupAssignment) -> Vec<Vec<usize>> {
    let mut table = vec![vec![0usize; groups.m()]; labels.k()];
    for (&c, &g) in labels.labels().iter().zip(groups.labels()) {
        table[c][g] += 1;
    }
    table
}

/// Newman modularity `sum_c [ e_c / m - (d_c / 2m)^2 ]`.
pub fn modularity(graph: &Graph, labels: &ClusterLabels) -> Result<f64> {
    check_len(graph.n(), labels.n())?;
    if graph.num_edges() == 0 {
        return Err(Error::EmptyGraph);
    }
    let l = labels.labels();
    let m = graph.num_edges() as f64;
    let mut internal = vec![0usize; labels.k()];
    let mut degree = vec![0usize; labels.k()];
    for &(u, v) in graph.edges() {
        if l[u] == l[v] {
            internal[l[u]] += 1;
        }
        degree[l[u]] += 1;
        degree[l[v]] += 1;
    }
    Ok(internal
        .iter()
        .zip(&degree)
        .map(|(&e, &d)| {
            let share = d as f64 / (2.0 * m);
            e as f64 / m - share * share
        })
        .sum())
}

/// Fraction of nodes correctly labeled under the best one-to-one matching of
/// predicted to true cluster ids.
pub fn accuracy(labels: &ClusterLabels, truth: &ClusterLabels) -> Result<f64> {
    check_len(truth.n(), labels.n())?;
    if labels.n() == 0 {
        return Ok(1.0);
    }
    let size = labels.k().max(truth.k());
    let mut confusion = vec![vec![0i64; size]; size];
    for (&p, &t) in labels.labels().iter().zip(truth.labels()) {
        confusion[p][t] += 1;
    }
    let cost: Vec<Vec<i64>> = confusion
        .iter()
        .map(|row| row.iter().map(|&x| -x).collect())
        .collect();
    let assignment = min_cost_assignment(&cost);
    let matched: i64 = assignment
        .iter()
        .enumerate()
        .map(|(r, &c)| confusion[r][c])
        .sum();
    Ok(matched as f64 / labels.n() as f64)
}

/// Hungarian method with row/column potentials on a square cost matrix.
/// Returns the column assigned to each row.
fn min_cost_assignment(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    // 1-based arrays; index 0 is the virtual column
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        row_of[0] = row;
        let mut col0 = 0;
        let mut minv = vec![i64::MAX; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r = row_of[col0];
            let mut delta = i64::MAX;
            let mut col1 = 0;
            for col in 1..=n {
                if used[col] {
                    continue;
                }
                let reduced = cost[r - 1][col - 1] - u[r] - v[col];
                if reduced < minv[col] {
                    minv[col] = reduced;
                    way[col] = col0;
                }
                if minv[col] < delta {
                    delta = minv[col];
                    col1 = col;
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[row_of[col]] += delta;
                    v[col] -= delta;
                } else {
                    minv[col] -= delta;
                }
            }
            col0 = col1;
            if row_of[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            row_of[col0] = row_of[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for col in 1..=n {
        if row_of[col] > 0 {
            assignment[row_of[col] - 1] = col - 1;
        }
    }
    assignment
}

/// Per-node neighbor proportionality: smallest over largest count of
/// neighbors across the `k` clusters, 0 if some cluster holds none of them.
/// Isolated nodes get `None` and are left out of the average.
pub fn rho_fairness(graph: &Graph, labels: &ClusterLabels) -> Result<(f64, Vec<Option<f64>>)> {
    check_len(graph.n(), labels.n())?;
    let l = labels.labels();
    let mut counts = vec![0usize; labels.k()];
    let per_node: Vec<Option<f64>> = (0..graph.n())
        .map(|i| {
            let nbrs = graph.neighbors(i);
            if nbrs.is_empty() {
                return None;
            }
            counts.iter_mut().for_each(|c| *c = 0);
            for &j in nbrs {
                counts[l[j]] += 1;
            }
            Some(min_max_ratio(&counts))
        })
        .collect();
    let scored: Vec<f64> = per_node.iter().flatten().copied().collect();
    let avg = if scored.is_empty() {
        0.0
    } else {
        scored.iter().sum::<f64>() / scored.len() as f64
    };
    Ok((avg, per_node))
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::LengthMismatch { expected, found });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub modularity: f64,
    /// `None` when the data holds a single sensitive group.
    pub avg_balance: Option<f64>,
    pub per_cluster_balance: Vec<f64>,
    pub accuracy: Option<f64>,
    pub rho_avg: f64,
    pub cluster_sizes: Vec<usize>,
    pub group_by_cluster: Vec<Vec<usize>>,
    /// Smallest over largest group size in the whole dataset.
    pub dataset_balance: f64,
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str = "Q,B,accuracy,rho,dataset_balance,empty_clusters";

    pub fn csv_row(&self) -> String {
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{}",
            self.modularity,
            opt(self.avg_balance),
            opt(self.accuracy),
            self.rho_avg,
            self.dataset_balance,
            self.cluster_sizes.iter().filter(|&&s| s == 0).count()
        )
    }
}

/// Full report for a clustering, optionally scored against ground truth.
pub fn evaluate(
    graph: &Graph,
    groups: &GroupAssignment,
    labels: &ClusterLabels,
    truth: Option<&ClusterLabels>,
) -> Result<MetricsReport> {
    check_len(graph.n(), groups.n())?;
    check_len(graph.n(), labels.n())?;
    let (avg_balance, per_cluster_balance) = if groups.m() >= 2 {
        let (b, per) = average_balance(labels, groups)?;
        (Some(b), per)
    } else {
        (None, Vec::new())
    };
    Ok(MetricsReport {
        modularity: modularity(graph, labels)?,
        avg_balance,
        per_cluster_balance,
        accuracy: truth.map(|t| accuracy(labels, t)).transpose()?,
        rho_avg: rho_fairness(graph, labels)?.0,
        cluster_sizes: labels.sizes(),
        group_by_cluster: contingency(labels, groups),
        dataset_balance: min_max_ratio(&groups.sizes()),
    })
}
