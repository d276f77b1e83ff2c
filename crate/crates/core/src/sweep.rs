//! Lambda/k grid experiments over one dataset: long-form result rows,
//! per-cell aggregates, twin-chart data (mean Q and mean B against lambda)
//! and the grid point where the two curves meet.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ClusterLabels, Graph, GroupAssignment};
use crate::metrics::evaluate;
use crate::solver::{fit, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub lambda_grid: Vec<f64>,
    pub k_grid: Vec<usize>,
    pub repeats: usize,
    pub base_seed: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_grid.is_empty() || self.k_grid.is_empty() {
            return Err(Error::InvalidConfig("sweep grids must be nonempty".into()));
        }
        if self.repeats == 0 {
            return Err(Error::InvalidConfig("repeats must be >= 1".into()));
        }
        if let Some(l) = self.lambda_grid.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
            return Err(Error::InvalidConfig(format!("invalid lambda {l}")));
        }
        if let Some(k) = self.k_grid.iter().find(|&&k| k < 2) {
            return Err(Error::InvalidConfig(format!("invalid k {k}")));
        }
        Ok(())
    }
}

/// `{0}` followed by `count - 1` geometrically spaced values ending at
/// `lambda_max`, with the ratio chosen so the grid median equals `median`.
pub fn lambda_grid(count: usize, lambda_max: f64, median: f64) -> Result<Vec<f64>> {
    if count < 3 {
        return Err(Error::InvalidConfig("lambda grid needs at least 3 points".into()));
    }
    if !(median > 0.0 && median < lambda_max && lambda_max.is_finite()) {
        return Err(Error::InvalidConfig(
            "lambda grid needs 0 < median < lambda_max".into(),
        ));
    }
    let build = |ratio: f64| -> Vec<f64> {
        let mut grid = vec![0.0];
        grid.extend((1..count).map(|i| lambda_max * ratio.powi(i as i32 - (count as i32 - 1))));
        grid
    };
    let median_of = |g: &[f64]| {
        let c = g.len();
        if c % 2 == 1 {
            g[c / 2]
        } else {
            0.5 * (g[c / 2 - 1] + g[c / 2])
        }
    };
    // the median falls monotonically as the ratio grows
    let (mut lo, mut hi) = (1.0f64, 2.0f64);
    while median_of(&build(hi)) > median {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if median_of(&build(mid)) > median {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut grid = build(0.5 * (lo + hi));
    *grid.last_mut().unwrap() = lambda_max;
    Ok(grid)
}

/// `count` evenly spaced values on `[0, lambda_max]`.
pub fn linear_grid(count: usize, lambda_max: f64) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..count)
            .map(|i| lambda_max * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Solver seed for repeat `repeat` at k-grid position `k_index`. Every
/// lambda on a row of the grid shares it, so curves compare like with like.
pub fn derive_seed(base_seed: u64, k_index: usize, repeat: usize) -> u64 {
    mix(mix(mix(base_seed) ^ k_index as u64) ^ repeat as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub lambda: f64,
    pub seed: u64,
    pub q: f64,
    pub b: f64,
    pub accuracy: Option<f64>,
    pub rho: f64,
    pub final_loss: f64,
    pub iterations: usize,
    pub wall_time_ms: u64,
    pub status: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    fn of(xs: &[f64]) -> Self {
        if xs.is_empty() {
            return Self { mean: f64::NAN, std: f64::NAN };
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub k: usize,
    pub lambda: f64,
    pub runs: usize,
    pub failures: usize,
    pub q: MeanStd,
    pub b: MeanStd,
    pub accuracy: Option<MeanStd>,
    pub rho: MeanStd,
    pub final_loss: MeanStd,
    pub iterations: MeanStd,
    pub wall_time_ms: MeanStd,
}

/// Mean Q and B against lambda for one k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwinChart {
    pub k: usize,
    pub points: Vec<TwinPoint>,
    /// Grid lambda minimizing `|Q - B|`.
    pub lambda_star: Option<f64>,
    /// Grid lambda maximizing `min(accuracy, B)`, when truth is known.
    pub lambda_accuracy_star: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwinPoint {
    pub lambda: f64,
    pub q: f64,
    pub b: f64,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub cells: Vec<CellSummary>,
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    /// Template for every run; `k`, `lambda` and `seed` are overwritten.
    pub solver: SolverConfig,
    /// Worker cap; `None` uses all cores.
    pub threads: Option<usize>,
    /// Zero wall times so repeated sweeps serialize identically.
    pub deterministic: bool,
}

struct Cell {
    k_index: usize,
    lambda_index: usize,
    repeat: usize,
}

/// Evaluates every `(k, lambda, repeat)` cell. A failing run is recorded
/// with its status and the sweep carries on.
pub fn run_sweep(
    graph: &Graph,
    groups: &GroupAssignment,
    truth: Option<&ClusterLabels>,
    spec: &SweepSpec,
    opts: &SweepOptions,
) -> Result<SweepTable> {
    spec.validate()?;
    let mut cells = Vec::new();
    for k_index in 0..spec.k_grid.len() {
        for lambda_index in 0..spec.lambda_grid.len() {
            for repeat in 0..spec.repeats {
                cells.push(Cell {
                    k_index,
                    lambda_index,
                    repeat,
                });
            }
        }
    }

    let run_cell = |cell: &Cell| -> SweepRow {
        let k = spec.k_grid[cell.k_index];
        let lambda = spec.lambda_grid[cell.lambda_index];
        let seed = derive_seed(spec.base_seed, cell.k_index, cell.repeat);
        let mut cfg = opts.solver.clone();
        cfg.k = k;
        cfg.lambda = lambda;
        cfg.seed = seed;
        let outcome = fit(graph, groups, &cfg).and_then(|run| {
            let report = evaluate(graph, groups, &run.labels, truth)?;
            Ok((run, report))
        });
        match outcome {
            Ok((run, report)) => SweepRow {
                k,
                lambda,
                seed,
                q: report.modularity,
                b: report.avg_balance.unwrap_or(f64::NAN),
                accuracy: report.accuracy,
                rho: report.rho_avg,
                final_loss: run.manifest.final_loss,
                iterations: run.iterations,
                wall_time_ms: if opts.deterministic {
                    0
                } else {
                    run.manifest.wall_time_ms
                },
                status: "ok".into(),
            },
            Err(e) => SweepRow {
                k,
                lambda,
                seed,
                q: f64::NAN,
                b: f64::NAN,
                accuracy: None,
                rho: f64::NAN,
                final_loss: f64::NAN,
                iterations: 0,
                wall_time_ms: 0,
                status: format!("failed: {}", e.to_string().replace([',', '\n'], ";")),
            },
        }
    };

    let rows = run_cells(&cells, opts.threads, run_cell)?;
    let summaries = summarize(&rows);
    Ok(SweepTable {
        rows,
        cells: summaries,
    })
}

#[cfg(feature = "parallel")]
fn run_cells<F>(cells: &[Cell], threads: Option<usize>, f: F) -> Result<Vec<SweepRow>>
where
    F: Fn(&Cell) -> SweepRow + Sync,
{
    use rayon::prelude::*;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    // par_iter().map().collect() keeps input order
    Ok(pool.install(|| cells.par_iter().map(&f).collect()))
}

#[cfg(not(feature = "parallel"))]
fn run_cells<F>(cells: &[Cell], _threads: Option<usize>, f: F) -> Result<Vec<SweepRow>>
where
    F: Fn(&Cell) -> SweepRow,
{
    Ok(cells.iter().map(f).collect())
}

/// Per-`(k, lambda)` statistics over successful repeats, in first-seen order.
pub fn summarize(rows: &[SweepRow]) -> Vec<CellSummary> {
    let mut keys: Vec<(usize, f64)> = Vec::new();
    for r in rows {
        if !keys.iter().any(|&(k, l)| k == r.k && l.to_bits() == r.lambda.to_bits()) {
            keys.push((r.k, r.lambda));
        }
    }
    keys.into_iter()
        .map(|(k, lambda)| {
            let cell: Vec<&SweepRow> = rows
                .iter()
                .filter(|r| r.k == k && r.lambda.to_bits() == lambda.to_bits())
                .collect();
            let ok: Vec<&SweepRow> = cell.iter().copied().filter(|r| r.status == "ok").collect();
            let stat = |f: &dyn Fn(&SweepRow) -> f64| MeanStd::of(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
            let accuracy = if !ok.is_empty() && ok.iter().all(|r| r.accuracy.is_some()) {
                Some(stat(&|r| r.accuracy.unwrap()))
            } else {
                None
            };
            CellSummary {
                k,
                lambda,
                runs: cell.len(),
                failures: cell.len() - ok.len(),
                q: stat(&|r| r.q),
                b: stat(&|r| r.b),
                accuracy,
                rho: stat(&|r| r.rho),
                final_loss: stat(&|r| r.final_loss),
                iterations: stat(&|r| r.iterations as f64),
                wall_time_ms: stat(&|r| r.wall_time_ms as f64),
            }
        })
        .collect()
}

impl SweepTable {
    pub const CSV_HEADER: &'static str =
        "k,lambda,seed,Q,B,accuracy,rho,final_loss,iterations,wall_time_ms,status";

    /// Long-form CSV: one row per run, then `mean` and `std` rows per cell.
    /// Rows are ordered by `(k, lambda, repeat)`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{}", Self::CSV_HEADER).unwrap();
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        let mut rows: Vec<&SweepRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| a.k.cmp(&b.k).then(a.lambda.total_cmp(&b.lambda)));
        for r in rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.k,
                r.lambda,
                r.seed,
                r.q,
                r.b,
                opt(r.accuracy),
                r.rho,
                r.final_loss,
                r.iterations,
                r.wall_time_ms,
                r.status
            )
            .unwrap();
        }
        let mut cells: Vec<&CellSummary> = self.cells.iter().collect();
        cells.sort_by(|a, b| a.k.cmp(&b.k).then(a.lambda.total_cmp(&b.lambda)));
        for c in cells {
            for (tag, pick) in [
                ("mean", (|s: &MeanStd| s.mean) as fn(&MeanStd) -> f64),
                ("std", |s: &MeanStd| s.std),
            ] {
                writeln!(
                    out,
                    "{},{},,{},{},{},{},{},{},{},{}",
                    c.k,
                    c.lambda,
                    pick(&c.q),
                    pick(&c.b),
                    opt(c.accuracy.as_ref().map(pick)),
                    pick(&c.rho),
                    pick(&c.final_loss),
                    pick(&c.iterations),
                    pick(&c.wall_time_ms),
                    tag
                )
                .unwrap();
            }
        }
        out
    }

    pub fn twin_charts(&self) -> Vec<TwinChart> {
        let mut ks: Vec<usize> = self.cells.iter().map(|c| c.k).collect();
        ks.sort_unstable();
        ks.dedup();
        ks.into_iter()
            .map(|k| {
                let mut points: Vec<TwinPoint> = self
                    .cells
                    .iter()
                    .filter(|c| c.k == k)
                    .map(|c| TwinPoint {
                        lambda: c.lambda,
                        q: c.q.mean,
                        b: c.b.mean,
                        accuracy: c.accuracy.map(|a| a.mean),
                    })
                    .collect();
                points.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
                TwinChart {
                    k,
                    lambda_star: intersection_lambda(&points),
                    lambda_accuracy_star: accuracy_balance_lambda(&points),
                    points,
                }
            })
            .collect()
    }
}

/// Grid point minimizing `|Q - B|`; ties go to the smaller lambda.
pub fn intersection_lambda(points: &[TwinPoint]) -> Option<f64> {
    points
        .iter()
        .filter(|p| p.q.is_finite() && p.b.is_finite())
        .fold(None, |best: Option<(f64, f64)>, p| {
            let gap = (p.q - p.b).abs();
            match best {
                Some((g, _)) if g <= gap => best,
                _ => Some((gap, p.lambda)),
            }
        })
        .map(|(_, l)| l)
}

/// Grid point maximizing `min(accuracy, B)`; ties go to the smaller lambda.
pub fn accuracy_balance_lambda(points: &[TwinPoint]) -> Option<f64> {
    points
        .iter()
        .filter_map(|p| {
            let a = p.accuracy?;
            (a.is_finite() && p.b.is_finite()).then_some((a.min(p.b), p.lambda))
        })
        .fold(None, |best: Option<(f64, f64)>, (score, l)| match best {
            Some((s, _)) if s >= score => best,
            _ => Some((score, l)),
        })
        .map(|(_, l)| l)
}

/// `lambda,Q,B,accuracy` rows for one chart.
pub fn twin_chart_csv(chart: &TwinChart) -> String {
    let mut out = String::from("lambda,Q,B,accuracy\n");
    for p in &chart.points {
        let acc = p.accuracy.map(|a| a.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{}", p.lambda, p.q, p.b, acc).unwrap();
    }
    out
}

/// Line chart of mean Q (solid) and mean B (dashed) against lambda on a
/// `log10(1 + lambda)` axis.
pub fn twin_chart_svg(chart: &TwinChart) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 50.0;
    let xs: Vec<f64> = chart.points.iter().map(|p| (1.0 + p.lambda).log10()).collect();
    let x_max = xs.iter().copied().fold(0.0, f64::max).max(1e-9);
    let (y_min, y_max) = chart
        .points
        .iter()
        .flat_map(|p| [p.q, p.b])
        .filter(|v| v.is_finite())
        .fold((0.0f64, 1.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let px = |x: f64| PAD + (W - 2.0 * PAD) * x / x_max;
    let py = |y: f64| H - PAD - (H - 2.0 * PAD) * (y - y_min) / (y_max - y_min);
    let path = |f: &dyn Fn(&TwinPoint) -> f64| {
        chart
            .points
            .iter()
            .zip(&xs)
            .filter(|(p, _)| f(p).is_finite())
            .map(|(p, &x)| format!("{:.2},{:.2}", px(x), py(f(p))))
            .collect::<Vec<_>>()
            .join(" ")
    };

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<line x1="{PAD}" y1="{y0:.2}" x2="{x1:.2}" y2="{y0:.2}" stroke="black"/><line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{y0:.2}" stroke="black"/>"#,
        y0 = H - PAD,
        x1 = W - PAD
    )
    .unwrap();
    for t in 0..=4 {
        let y = y_min + (y_max - y_min) * t as f64 / 4.0;
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{:.2}</text>"#,
            PAD - 6.0,
            py(y) + 4.0,
            y
        )
        .unwrap();
    }
    for (p, &x) in chart.points.iter().zip(&xs).step_by((chart.points.len() / 8).max(1)) {
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            px(x),
            H - PAD + 16.0,
            format_lambda(p.lambda)
        )
        .unwrap();
    }
    writeln!(
        s,
        r##"<polyline fill="none" stroke="#1f77b4" stroke-width="2" points="{}"/>"##,
        path(&|p| p.q)
    )
    .unwrap();
    writeln!(
        s,
        r##"<polyline fill="none" stroke="#d62728" stroke-width="2" stroke-dasharray="6 4" points="{}"/>"##,
        path(&|p| p.b)
    )
    .unwrap();
    if let Some(l) = chart.lambda_star {
        let x = px((1.0 + l).log10());
        writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{PAD}" x2="{x:.2}" y2="{:.2}" stroke="gray" stroke-dasharray="2 3"/>"#,
            H - PAD
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{:.2}" y="20" text-anchor="middle">k = {}: modularity Q (solid) and average balance B (dashed) vs lambda</text>"#,
        W / 2.0,
        chart.k
    )
    .unwrap();
    s.push_str("</svg>\n");
    s
}

fn format_lambda(l: f64) -> String {
    if l == 0.0 {
        "0".into()
    } else if l >= 10.0 {
        format!("{l:.0}")
    } else {
        format!("{l:.2}")
    }
}
