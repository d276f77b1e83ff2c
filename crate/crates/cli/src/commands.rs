use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use fairclust_core::graph::{
    load_edge_list, load_groups, load_membership, save_edge_list, save_groups, save_membership,
    validate_matrix,
};
use fairclust_core::sbm::{self, GroupLayout, SbmSpec};
use fairclust_core::solver::{fit, SolverConfig, UpdateExponent};
use fairclust_core::sweep::{
    lambda_grid, run_sweep, twin_chart_csv, twin_chart_svg, SweepOptions, SweepSpec,
};
use fairclust_core::{
    build_contrastive, evaluate, ClusterLabels, ContrastiveOptions, Graph, GroupAssignment,
};
use ndarray::Array2;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::{
    ClusterArgs, Exponent, GenerateArgs, Layout, MetricsArgs, SolverArgs, SweepArgs, ValidateArgs,
};

const THREADS_ENV: &str = "FAIRCLUST_THREADS";
const MAX_DENSE_DUMP: usize = 5000;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn input_err(path: &Path) -> impl FnOnce(fairclust_core::Error) -> CliError + '_ {
    move |source| CliError::Input {
        path: path.to_path_buf(),
        source,
    }
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(io_err(path))
}

fn write_file(path: &Path, contents: &[u8]) -> CliResult<()> {
    fs::write(path, contents).map_err(io_err(path))
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Loads the graph and groups, using the group file length as the node
/// count so trailing isolated nodes are kept.
fn load_inputs(graph_path: &Path, groups_path: &Path) -> CliResult<(Graph, GroupAssignment)> {
    let group_text = fs::read_to_string(groups_path).map_err(io_err(groups_path))?;
    let n_groups = group_text.lines().count();
    let graph = load_edge_list(open(graph_path)?, Some(n_groups)).map_err(input_err(graph_path))?;
    let groups = load_groups(group_text.as_bytes(), graph.n()).map_err(input_err(groups_path))?;
    Ok((graph, groups))
}

fn load_labels(path: &Path, n: usize, k: Option<usize>) -> CliResult<ClusterLabels> {
    load_membership(open(path)?, n, k).map_err(input_err(path))
}

fn dense_csv(m: &Array2<f64>) -> String {
    let mut out = String::new();
    for row in m.rows() {
        let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn solver_config(args: &SolverArgs, k: usize, lambda: f64, seed: u64) -> SolverConfig {
    let mut cfg = SolverConfig::new(k, lambda).with_seed(seed);
    cfg.max_iters = args.max_iters;
    cfg.tol = args.tol;
    cfg.eps = args.eps;
    cfg.regularize = !args.no_reg;
    cfg.exponent = match args.exponent {
        Exponent::Quarter => UpdateExponent::Quarter,
        Exponent::Half => UpdateExponent::Half,
    };
    cfg.contrastive = if args.zero_diagonal {
        ContrastiveOptions::zero_diagonal()
    } else {
        ContrastiveOptions::default()
    };
    cfg
}

fn worker_threads(requested: Option<usize>) -> CliResult<Option<usize>> {
    let cap = match std::env::var(THREADS_ENV) {
        Ok(v) => Some(v.trim().parse::<usize>().ok().filter(|&t| t > 0).ok_or_else(|| {
            CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))
        })?),
        Err(_) => None,
    };
    if requested == Some(0) {
        return Err(CliError::Usage("--threads must be positive".into()));
    }
    Ok(match (requested, cap) {
        (Some(r), Some(c)) => Some(r.min(c)),
        (r, c) => r.or(c),
    })
}

#[derive(Serialize)]
struct Sidecar<'a> {
    spec: &'a SbmSpec,
    nodes: usize,
    edges: usize,
    group_sizes: Vec<usize>,
    files: SidecarFiles,
    version: &'static str,
}

#[derive(Serialize)]
struct SidecarFiles {
    edges: String,
    groups: String,
    truth: String,
}

pub fn generate(args: GenerateArgs) -> CliResult<()> {
    let spec = SbmSpec::new(args.n, args.k, args.g, args.seed)
        .with_probabilities(args.p_in, args.p_out)
        .with_layout(match args.layout {
            Layout::Random => GroupLayout::Random,
            Layout::Aligned => GroupLayout::Aligned,
        });
    let sample = sbm::generate(&spec)?;
    create_dir(&args.out_dir)?;

    let names = SidecarFiles {
        edges: format!("{}_edges.txt", args.prefix),
        groups: format!("{}_groups.txt", args.prefix),
        truth: format!("{}_truth.csv", args.prefix),
    };
    let paths = [
        args.out_dir.join(&names.edges),
        args.out_dir.join(&names.groups),
        args.out_dir.join(&names.truth),
        args.out_dir.join(format!("{}.json", args.prefix)),
    ];

    let mut buf = Vec::new();
    save_edge_list(&sample.graph, &mut buf)?;
    write_file(&paths[0], &buf)?;
    buf.clear();
    save_groups(&sample.groups, &mut buf)?;
    write_file(&paths[1], &buf)?;
    buf.clear();
    save_membership(&sample.truth, &mut buf)?;
    write_file(&paths[2], &buf)?;
    let sidecar = Sidecar {
        spec: &spec,
        nodes: sample.graph.n(),
        edges: sample.graph.num_edges(),
        group_sizes: sample.groups.sizes(),
        files: names,
        version: fairclust_core::VERSION,
    };
    write_file(&paths[3], to_json(&sidecar)?.as_bytes())?;

    for p in &paths {
        println!("{}", p.display());
    }
    Ok(())
}

pub fn cluster(args: ClusterArgs) -> CliResult<()> {
    let (graph, groups) = load_inputs(&args.graph, &args.groups)?;
    let truth = args
        .truth
        .as_deref()
        .map(|p| load_labels(p, graph.n(), None))
        .transpose()?;
    let cfg = solver_config(&args.solver, args.k, args.lambda, args.seed);
    if args.dump_laplacian && graph.n() > MAX_DENSE_DUMP {
        return Err(CliError::Usage(format!(
            "--dump-laplacian writes dense n x n files and is limited to n <= {MAX_DENSE_DUMP}"
        )));
    }

    let mut run = fit(&graph, &groups, &cfg)?;
    for w in &run.warnings {
        eprintln!("warning: {w}");
    }
    if args.solver.deterministic {
        run.manifest.wall_time_ms = 0;
    }
    let report = evaluate(&graph, &groups, &run.labels, truth.as_ref())?;

    create_dir(&args.out_dir)?;
    let membership_path = args.out_dir.join("membership.csv");
    let mut buf = Vec::new();
    save_membership(&run.labels, &mut buf)?;
    write_file(&membership_path, &buf)?;
    let manifest_path = args.out_dir.join("manifest.json");
    write_file(&manifest_path, to_json(&run.manifest)?.as_bytes())?;
    let metrics_path = args.out_dir.join("metrics.json");
    write_file(&metrics_path, to_json(&report)?.as_bytes())?;
    let mut written = vec![membership_path, manifest_path, metrics_path];

    if args.dump_factors {
        let h = args.out_dir.join("H.csv");
        let w = args.out_dir.join("W.csv");
        write_file(&h, dense_csv(&run.factors.h).as_bytes())?;
        write_file(&w, dense_csv(&run.factors.w).as_bytes())?;
        written.extend([h, w]);
    }
    if args.dump_laplacian {
        let system = build_contrastive(&groups, cfg.contrastive);
        let c = args.out_dir.join("C.csv");
        let l = args.out_dir.join("L.csv");
        write_file(&c, dense_csv(&system.contrast_matrix()).as_bytes())?;
        write_file(&l, dense_csv(&system.laplacian()).as_bytes())?;
        written.extend([c, l]);
    }

    for p in &written {
        println!("{}", p.display());
    }
    println!(
        "iterations={} converged={} final_loss={} Q={} B={}",
        run.iterations,
        run.converged,
        run.manifest.final_loss,
        report.modularity,
        report
            .avg_balance
            .map_or_else(|| "n/a".to_string(), |b| b.to_string())
    );
    Ok(())
}

#[derive(Serialize)]
struct LambdaStar {
    k: usize,
    /// grid value minimizing |Q - B|
    lambda_star: Option<f64>,
    /// grid value maximizing min(accuracy, B) when truth is given
    lambda_accuracy_star: Option<f64>,
}

pub fn sweep(args: SweepArgs) -> CliResult<()> {
    let (graph, groups) = load_inputs(&args.graph, &args.groups)?;
    let truth = args
        .truth
        .as_deref()
        .map(|p| load_labels(p, graph.n(), None))
        .transpose()?;
    let grid = match &args.lambda_grid {
        Some(g) => g.clone(),
        None => lambda_grid(args.lambda_count, args.lambda_max, args.lambda_median)?,
    };
    let spec = SweepSpec {
        lambda_grid: grid,
        k_grid: args.k_grid.clone(),
        repeats: args.repeats,
        base_seed: args.base_seed,
    };
    let opts = SweepOptions {
        solver: solver_config(&args.solver, args.k_grid[0], 0.0, args.base_seed),
        threads: worker_threads(args.threads)?,
        deterministic: args.solver.deterministic,
    };
    let table = run_sweep(&graph, &groups, truth.as_ref(), &spec, &opts)?;

    create_dir(&args.out_dir)?;
    let csv_path = args.out_dir.join("sweep.csv");
    write_file(&csv_path, table.to_csv().as_bytes())?;
    println!("{}", csv_path.display());

    let charts = table.twin_charts();
    let mut stars = Vec::new();
    for chart in &charts {
        let path = args.out_dir.join(format!("twin_k{}.csv", chart.k));
        write_file(&path, twin_chart_csv(chart).as_bytes())?;
        println!("{}", path.display());
        if args.svg {
            let path = args.out_dir.join(format!("twin_k{}.svg", chart.k));
            write_file(&path, twin_chart_svg(chart).as_bytes())?;
            println!("{}", path.display());
        }
        stars.push(LambdaStar {
            k: chart.k,
            lambda_star: chart.lambda_star,
            lambda_accuracy_star: chart.lambda_accuracy_star,
        });
    }
    let star_path = args.out_dir.join("lambda_star.json");
    write_file(&star_path, to_json(&stars)?.as_bytes())?;
    println!("{}", star_path.display());

    let mut summary = String::new();
    for s in &stars {
        let fmt = |x: Option<f64>| x.map_or_else(|| "n/a".to_string(), |v| v.to_string());
        write!(summary, "k={} lambda*={}", s.k, fmt(s.lambda_star)).unwrap();
        if truth.is_some() {
            write!(summary, " lambda_acc*={}", fmt(s.lambda_accuracy_star)).unwrap();
        }
        summary.push('\n');
    }
    print!("{summary}");

    let failed = table.rows.iter().filter(|r| r.status != "ok").count();
    if failed > 0 {
        eprintln!("warning: {failed} of {} runs failed; see the status column", table.rows.len());
    }
    if failed == table.rows.len() {
        return Err(CliError::Core(fairclust_core::Error::NonFinite(
            "every sweep run failed".into(),
        )));
    }
    Ok(())
}

pub fn metrics(args: MetricsArgs) -> CliResult<()> {
    let (graph, groups) = load_inputs(&args.graph, &args.groups)?;
    let labels = load_labels(&args.membership, graph.n(), args.k)?;
    let truth = args
        .truth
        .as_deref()
        .map(|p| load_labels(p, graph.n(), None))
        .transpose()?;
    let report = evaluate(&graph, &groups, &labels, truth.as_ref())?;
    let json = to_json(&report)?;
    match &args.out {
        Some(path) => {
            write_file(path, json.as_bytes())?;
            println!("{}", path.display());
        }
        None => print!("{json}"),
    }
    Ok(())
}

fn load_dense(path: &Path) -> CliResult<Array2<f64>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>().map_err(|_| {
                    CliError::Usage(format!("{} line {}: invalid number {t:?}", path.display(), idx + 1))
                })
            })
            .collect::<CliResult<Vec<_>>>()?;
        rows.push(row);
    }
    let n = rows.len();
    if let Some(bad) = rows.iter().position(|r| r.len() != n) {
        return Err(CliError::Usage(format!(
            "{}: row {} has {} entries, expected {n}",
            path.display(),
            bad + 1,
            rows[bad].len()
        )));
    }
    Array2::from_shape_vec((n, n), rows.into_iter().flatten().collect())
        .map_err(|e| CliError::Usage(e.to_string()))
}

pub fn validate(args: ValidateArgs) -> CliResult<()> {
    let (report, source): (_, PathBuf) = match (&args.graph, &args.matrix) {
        (Some(p), _) => {
            let g = load_edge_list(open(p)?, None).map_err(input_err(p))?;
            (g.validate(), p.clone())
        }
        (None, Some(p)) => (validate_matrix(load_dense(p)?.view()), p.clone()),
        (None, None) => return Err(CliError::Usage("pass --graph or --matrix".into())),
    };
    print!("{}", to_json(&report)?);
    if let Some(gp) = &args.groups {
        load_groups(open(gp)?, report.n).map_err(input_err(gp))?;
    }
    if !report.is_simple_undirected() {
        return Err(CliError::Usage(format!(
            "{} is not a simple undirected graph",
            source.display()
        )));
    }
    Ok(())
}
