//! Multiplicative-update solver for the contrastive-regularized symmetric
//! tri-factorization
//!
//! ```text
//! min_{H, W >= 0}  ||A - H W H^T||_F^2 + lambda * Tr(H^T L H)
//! ```
//!
//! Each sweep updates `H` then `W`. Both updates rescale entries by a ratio
//! of the positive and negative parts of the gradient, so nonnegativity and
//! exact zeros are preserved.

use ndarray::{Array2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::contrastive::{build_contrastive, ContrastiveOptions, LaplacianSplit};
use crate::error::{Error, Result};
use crate::graph::{ClusterLabels, Graph, GroupAssignment};

pub const DEFAULT_MAX_ITERS: usize = 500;
pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_EPS: f64 = 1e-10;

/// Membership `H` (n x k) and cluster interaction `W` (k x k).
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPair {
    pub h: Array2<f64>,
    pub w: Array2<f64>,
}

impl FactorPair {
    pub fn new(h: Array2<f64>, w: Array2<f64>) -> Result<Self> {
        let k = h.ncols();
        if w.dim() != (k, k) {
            return Err(Error::Dimension(format!(
                "W must be {k}x{k}, got {}x{}",
                w.nrows(),
                w.ncols()
            )));
        }
        if h.iter().chain(w.iter()).any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidConfig(
                "factors must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { h, w })
    }

    pub fn k(&self) -> usize {
        self.h.ncols()
    }
}

/// Root applied to the multiplicative ratio in the `H` update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateExponent {
    #[default]
    Quarter,
    Half,
}

impl UpdateExponent {
    fn apply(self, ratio: f64) -> f64 {
        match self {
            Self::Quarter => ratio.sqrt().sqrt(),
            Self::Half => ratio.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    UniformRandom { scale: f64 },
    Provided(FactorPair),
}

impl Default for Init {
    fn default() -> Self {
        Init::UniformRandom { scale: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub k: usize,
    pub lambda: f64,
    pub max_iters: usize,
    /// Relative loss-change threshold.
    pub tol: f64,
    /// Denominator floor.
    pub eps: f64,
    pub seed: u64,
    pub init: Init,
    pub exponent: UpdateExponent,
    /// `false` skips every regularizer computation (plain tri-factorization).
    pub regularize: bool,
    pub contrastive: ContrastiveOptions,
}

impl SolverConfig {
    pub fn new(k: usize, lambda: f64) -> Self {
        Self {
            k,
            lambda,
            max_iters: DEFAULT_MAX_ITERS,
            tol: DEFAULT_TOL,
            eps: DEFAULT_EPS,
            seed: 0,
            init: Init::default(),
            exponent: UpdateExponent::default(),
            regularize: true,
            contrastive: ContrastiveOptions::default(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidConfig(format!("k must be >= 2, got {}", self.k)));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "lambda must be a finite value >= 0, got {}",
                self.lambda
            )));
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return Err(Error::InvalidConfig("eps must be > 0".into()));
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(Error::InvalidConfig("tol must be >= 0".into()));
        }
        Ok(())
    }
}

/// Strictly positive start: `H ~ scale * U(0.01, 1.01)`, `W = I + 0.01`.
pub fn initialize(n: usize, k: usize, seed: u64, scale: f64) -> Result<FactorPair> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("k must be >= 2, got {k}")));
    }
    if k > n {
        return Err(Error::InvalidConfig(format!(
            "k = {k} exceeds node count n = {n}"
        )));
    }
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidConfig("init scale must be > 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = Array2::from_shape_simple_fn((n, k), || scale * rng.random_range(0.01..1.01));
    let w = Array2::eye(k) + 0.01;
    Ok(FactorPair { h, w })
}

/// Regularizer handle for the update and objective routines.
#[derive(Clone, Copy)]
pub struct Regularization<'a> {
    pub split: &'a dyn LaplacianSplit,
    pub lambda: f64,
}

fn check_dims(graph: &Graph, h: &Array2<f64>, w: &Array2<f64>) -> Result<()> {
    if h.nrows() != graph.n() || w.dim() != (h.ncols(), h.ncols()) {
        return Err(Error::Dimension(format!(
            "n = {}, H is {}x{}, W is {}x{}",
            graph.n(),
            h.nrows(),
            h.ncols(),
            w.nrows(),
            w.ncols()
        )));
    }
    Ok(())
}

fn check_finite(what: &str, m: &Array2<f64>) -> Result<()> {
    match m.iter().position(|x| !x.is_finite()) {
        None => Ok(()),
        Some(pos) => Err(Error::NonFinite(format!(
            "{what} has a non-finite entry at ({}, {})",
            pos / m.ncols().max(1),
            pos % m.ncols().max(1)
        ))),
    }
}

/// `||A - H W H^T||_F^2 + lambda Tr(H^T L H)`.
pub fn objective(
    graph: &Graph,
    h: &Array2<f64>,
    w: &Array2<f64>,
    reg: Option<Regularization<'_>>,
) -> Result<f64> {
    check_dims(graph, h, w)?;
    check_finite("H", h)?;
    check_finite("W", w)?;
    let mut loss = reconstruction_error(graph, h, w);
    if let Some(reg) = reg {
        if reg.split.n() != graph.n() {
            return Err(Error::Dimension("Laplacian size differs from graph".into()));
        }
        loss += reg.lambda * reg.split.trace_form(h);
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("objective evaluated to {loss}")));
    }
    Ok(loss)
}

/// `||A||^2 - 2 <A, H W H^T> + ||H W H^T||^2`, using the sparse adjacency
/// and the Gram matrix `H^T H`.
fn reconstruction_error(graph: &Graph, h: &Array2<f64>, w: &Array2<f64>) -> f64 {
    let gram = h.t().dot(h);
    let model_sq = (w * &gram.dot(w).dot(&gram)).sum();
    let sym = w + &w.t();
    let hs = h.dot(&sym);
    let cross: f64 = graph
        .edges()
        .iter()
        .map(|&(u, v)| hs.row(u).dot(&h.row(v)))
        .sum();
    graph.frobenius_sq() - 2.0 * cross + model_sq
}

/// `H <- H * root((A H W + A H W^T + lambda L- H) / (H W^T H^T H W + H W H^T H W^T + lambda L+ H))`
pub fn update_h(
    graph: &Graph,
    h: &Array2<f64>,
    w: &Array2<f64>,
    reg: Option<Regularization<'_>>,
    eps: f64,
    exponent: UpdateExponent,
) -> Result<Array2<f64>> {
    check_dims(graph, h, w)?;
    let ah = graph.mul_dense(h);
    let mut numer = ah.dot(w) + ah.dot(&w.t());
    let gram = h.t().dot(h);
    let mut denom = h.dot(&(w.t().dot(&gram).dot(w) + w.dot(&gram).dot(&w.t())));
    if let Some(reg) = reg {
        numer.scaled_add(reg.lambda, &reg.split.apply_minus(h));
        denom.scaled_add(reg.lambda, &reg.split.apply_plus(h));
    }
    let mut out = h.clone();
    Zip::from(&mut out)
        .and(&numer)
        .and(&denom)
        .for_each(|x, &num, &den| *x *= exponent.apply(num / den.max(eps)));
    check_finite("H update", &out)?;
    Ok(out)
}

/// `W <- W * (H^T A H) / (H^T H W H^T H)`
pub fn update_w(graph: &Graph, h: &Array2<f64>, w: &Array2<f64>, eps: f64) -> Result<Array2<f64>> {
    check_dims(graph, h, w)?;
    let numer = h.t().dot(&graph.mul_dense(h));
    let gram = h.t().dot(h);
    let denom = gram.dot(w).dot(&gram);
    let mut out = w.clone();
    Zip::from(&mut out)
        .and(&numer)
        .and(&denom)
        .for_each(|x, &num, &den| *x *= num / den.max(eps));
    check_finite("W update", &out)?;
    Ok(out)
}

/// Row-wise argmax, ties to the lowest index. All-zero rows go to cluster 0
/// and are reported in the returned warnings.
pub fn assign_clusters(h: &Array2<f64>) -> Result<(ClusterLabels, Vec<String>)> {
    let mut warnings = Vec::new();
    let mut zero_rows = Vec::new();
    let labels = h
        .axis_iter(Axis(0))
        .enumerate()
        .map(|(i, row)| {
            let mut best = 0;
            for (c, &x) in row.iter().enumerate() {
                if x > row[best] {
                    best = c;
                }
            }
            if row.iter().all(|&x| x == 0.0) {
                zero_rows.push(i);
            }
            best
        })
        .collect();
    if !zero_rows.is_empty() {
        warnings.push(format!(
            "{} node(s) with all-zero membership assigned to cluster 0: {:?}",
            zero_rows.len(),
            &zero_rows[..zero_rows.len().min(10)]
        ));
    }
    Ok((ClusterLabels::new(labels, h.ncols())?, warnings))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub seed: u64,
    pub k: usize,
    pub lambda: f64,
    pub iterations: usize,
    pub final_loss: f64,
    pub wall_time_ms: u64,
    pub tolerance: f64,
    pub version: String,
    pub n: usize,
    pub max_iters: usize,
    pub eps: f64,
    pub exponent: UpdateExponent,
    pub regularize: bool,
    pub include_diagonal: bool,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub factors: FactorPair,
    pub labels: ClusterLabels,
    /// Objective before the first sweep and after each sweep.
    pub loss_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
    pub manifest: RunManifest,
}

/// Runs the alternating updates from the configured start until the
/// relative loss change drops below `tol` or `max_iters` sweeps are done.
pub fn fit(graph: &Graph, groups: &GroupAssignment, config: &SolverConfig) -> Result<RunResult> {
    let watch = Stopwatch::start();
    config.validate()?;
    if groups.n() != graph.n() {
        return Err(Error::LengthMismatch {
            expected: graph.n(),
            found: groups.n(),
        });
    }
    if graph.num_edges() == 0 {
        return Err(Error::EmptyGraph);
    }
    let mut factors = match &config.init {
        Init::UniformRandom { scale } => initialize(graph.n(), config.k, config.seed, *scale)?,
        Init::Provided(f) => {
            if f.h.nrows() != graph.n() || f.k() != config.k {
                return Err(Error::Dimension(format!(
                    "provided H is {}x{}, expected {}x{}",
                    f.h.nrows(),
                    f.k(),
                    graph.n(),
                    config.k
                )));
            }
            f.clone()
        }
    };

    let system = build_contrastive(groups, config.contrastive);
    let mut warnings: Vec<String> = Vec::new();
    let reg = if config.regularize {
        warnings.extend(system.warnings().iter().cloned());
        Some(Regularization {
            split: &system,
            lambda: config.lambda,
        })
    } else {
        None
    };

    let mut loss_trace = Vec::with_capacity(config.max_iters + 1);
    let mut prev = objective(graph, &factors.h, &factors.w, reg)?;
    loss_trace.push(prev);
    let mut converged = false;
    let mut increases = 0usize;
    let mut worst_increase = 0.0f64;
    for _ in 0..config.max_iters {
        factors.h = update_h(graph, &factors.h, &factors.w, reg, config.eps, config.exponent)?;
        factors.w = update_w(graph, &factors.h, &factors.w, config.eps)?;
        let loss = objective(graph, &factors.h, &factors.w, reg)?;
        loss_trace.push(loss);
        let change = (loss - prev).abs() / prev.abs().max(config.eps);
        if loss > prev {
            increases += 1;
            worst_increase = worst_increase.max(change);
        }
        prev = loss;
        if change < config.tol {
            converged = true;
            break;
        }
    }
    let iterations = loss_trace.len() - 1;
    if increases > 0 {
        warnings.push(format!(
            "objective increased on {increases} of {iterations} iterations (largest relative step {worst_increase:.3e})"
        ));
    }

    let (labels, assign_warnings) = assign_clusters(&factors.h)?;
    warnings.extend(assign_warnings);

    let manifest = RunManifest {
        seed: config.seed,
        k: config.k,
        lambda: config.lambda,
        iterations,
        final_loss: prev,
        wall_time_ms: watch.elapsed_ms(),
        tolerance: config.tol,
        version: crate::VERSION.to_string(),
        n: graph.n(),
        max_iters: config.max_iters,
        eps: config.eps,
        exponent: config.exponent,
        regularize: config.regularize,
        include_diagonal: config.contrastive.include_diagonal,
        converged,
    };
    Ok(RunResult {
        factors,
        labels,
        loss_trace,
        iterations,
        converged,
        warnings,
        manifest,
    })
}

/// Wall clock that degrades to zero where no monotonic clock exists.
pub(crate) struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Stopwatch {
    pub(crate) fn start() -> Self {
        Self {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    pub(crate) fn elapsed_ms(&self) -> u64 {
        #[cfg(not(target_arch = "wasm32"))]
        {
            self.start.elapsed().as_millis() as u64
        }
        #[cfg(target_arch = "wasm32")]
        {
            0
        }
    }
}
