//! Browser bindings: sample a planted-partition graph, cluster it at a
//! chosen lambda, and trace modularity and balance across a lambda grid.
//! Results cross the boundary as JSON strings.

use fairclust_core::metrics::evaluate;
use fairclust_core::sbm::{generate, GroupLayout, SbmSample, SbmSpec};
use fairclust_core::solver::{fit, SolverConfig};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[wasm_bindgen]
pub struct Demo {
    sample: SbmSample,
    k: usize,
}

#[derive(Serialize)]
struct ClusterView {
    labels: Vec<usize>,
    w: Vec<Vec<f64>>,
    iterations: usize,
    converged: bool,
    final_loss: f64,
    modularity: f64,
    balance: Option<f64>,
    accuracy: Option<f64>,
    rho: f64,
    cluster_sizes: Vec<usize>,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct CurvePoint {
    lambda: f64,
    modularity: f64,
    balance: f64,
    accuracy: f64,
}

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
impl Demo {
    /// Samples a graph with `n` nodes, `k` planted blocks and `g` groups.
    #[wasm_bindgen(constructor)]
    pub fn new(
        n: usize,
        k: usize,
        g: usize,
        p_in: f64,
        p_out: f64,
        seed: u64,
        aligned: bool,
    ) -> Result<Demo, JsError> {
        let layout = if aligned {
            GroupLayout::Aligned
        } else {
            GroupLayout::Random
        };
        let spec = SbmSpec::new(n, k, g, seed)
            .with_probabilities(p_in, p_out)
            .with_layout(layout);
        let sample = generate(&spec).map_err(js_err)?;
        Ok(Demo { sample, k })
    }

    pub fn node_count(&self) -> usize {
        self.sample.graph.n()
    }

    /// Flattened `[u0, v0, u1, v1, ...]`.
    pub fn edges(&self) -> Vec<u32> {
        self.sample
            .graph
            .edges()
            .iter()
            .flat_map(|&(u, v)| [u as u32, v as u32])
            .collect()
    }

    pub fn groups(&self) -> Vec<u32> {
        self.sample.groups.labels().iter().map(|&g| g as u32).collect()
    }

    pub fn truth(&self) -> Vec<u32> {
        self.sample.truth.labels().iter().map(|&c| c as u32).collect()
    }

    /// One solver run; returns labels, `W` and scores as JSON.
    pub fn cluster(&self, lambda: f64, seed: u64) -> Result<String, JsError> {
        let s = &self.sample;
        let cfg = SolverConfig::new(self.k, lambda).with_seed(seed);
        let run = fit(&s.graph, &s.groups, &cfg).map_err(js_err)?;
        let report = evaluate(&s.graph, &s.groups, &run.labels, Some(&s.truth)).map_err(js_err)?;
        let view = ClusterView {
            labels: run.labels.labels().to_vec(),
            w: run.factors.w.rows().into_iter().map(|r| r.to_vec()).collect(),
            iterations: run.iterations,
            converged: run.converged,
            final_loss: run.manifest.final_loss,
            modularity: report.modularity,
            balance: report.avg_balance,
            accuracy: report.accuracy,
            rho: report.rho_avg,
            cluster_sizes: report.cluster_sizes,
            warnings: run.warnings,
        };
        serde_json::to_string(&view).map_err(js_err)
    }

    /// Mean modularity, balance and accuracy over `repeats` seeds for each
    /// lambda. Failed runs are skipped.
    pub fn curve(&self, lambdas: Vec<f64>, repeats: usize) -> Result<String, JsError> {
        let s = &self.sample;
        let repeats = repeats.max(1);
        let mut points = Vec::with_capacity(lambdas.len());
        for &lambda in &lambdas {
            let (mut q, mut b, mut a, mut ok) = (0.0, 0.0, 0.0, 0usize);
            for seed in 0..repeats as u64 {
                let cfg = SolverConfig::new(self.k, lambda).with_seed(seed);
                let Ok(run) = fit(&s.graph, &s.groups, &cfg) else {
                    continue;
                };
                let r = evaluate(&s.graph, &s.groups, &run.labels, Some(&s.truth)).map_err(js_err)?;
                q += r.modularity;
                b += r.avg_balance.unwrap_or(f64::NAN);
                a += r.accuracy.unwrap_or(f64::NAN);
                ok += 1;
            }
            let mean = |x: f64| if ok == 0 { f64::NAN } else { x / ok as f64 };
            points.push(CurvePoint {
                lambda,
                modularity: mean(q),
                balance: mean(b),
                accuracy: mean(a),
            });
        }
        serde_json::to_string(&points).map_err(js_err)
    }
}
