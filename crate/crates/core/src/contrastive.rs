//! Contrastive fairness graph built from sensitive-group labels.
//!
//! Different-group pairs attract (`P`), same-group pairs repel (`N`); both
//! are row-normalized and combined as `C = P - N`. The regularizer is
//! `Tr(H^T L H)` with `L = D - C` and `D_ii = sum_j C_ij`.
//!
//! Every entry of `C` is determined by the groups of its row and column, so
//! the solver never materializes it. [`ContrastiveSystem`] stores one
//! coefficient triple per group and applies `L+`/`L-` in `O(n k)`. The dense
//! matrices are available for inspection and cross-checking.

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::graph::GroupAssignment;

/// The default keeps the self-pairs, which makes `L` positive semidefinite
/// for equal-size groups. Without them `L` is indefinite and the objective
/// is unbounded below along `H -> cH, W -> W / c^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContrastiveOptions {
    /// Keep the `g_i = g_i` self-pairs in the same-group indicator.
    pub include_diagonal: bool,
}

impl Default for ContrastiveOptions {
    fn default() -> Self {
        Self {
            include_diagonal: true,
        }
    }
}

impl ContrastiveOptions {
    pub fn zero_diagonal() -> Self {
        Self {
            include_diagonal: false,
        }
    }
}

/// 0/1 same-group and different-group indicators `(N_raw, P_raw)`.
pub fn build_raw_indicators(
    groups: &GroupAssignment,
    opts: ContrastiveOptions,
) -> (Array2<f64>, Array2<f64>) {
    let g = groups.labels();
    let n = g.len();
    let mut same = Array2::zeros((n, n));
    let mut diff = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            if g[i] == g[j] {
                if i != j || opts.include_diagonal {
                    same[[i, j]] = 1.0;
                }
            } else {
                diff[[i, j]] = 1.0;
            }
        }
    }
    (same, diff)
}

/// Divides each row by its sum; all-zero rows stay zero.
pub fn normalize_rows(m: &Array2<f64>) -> Array2<f64> {
    let mut out = m.clone();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let s = row.sum();
        if s > 0.0 {
            row /= s;
        }
    }
    out
}

/// Per-group entries of `L` for a node of that group.
#[derive(Debug, Clone, Copy, PartialEq)]
struct GroupCoefficients {
    /// `L_ij` for `j != i` in the same group; `>= 0`.
    same: f64,
    /// `L_ij` for `j` in another group; `<= 0`.
    other: f64,
    /// `L_ii`.
    diag: f64,
    /// `C_ii`.
    c_diag: f64,
}

#[derive(Debug, Clone)]
pub struct ContrastiveSystem {
    labels: Vec<usize>,
    coeffs: Vec<GroupCoefficients>,
    options: ContrastiveOptions,
    warnings: Vec<String>,
}

/// Builds the contrastive system for a group assignment.
pub fn build_contrastive(groups: &GroupAssignment, opts: ContrastiveOptions) -> ContrastiveSystem {
    let n = groups.n();
    let sizes = groups.sizes();
    let mut warnings = Vec::new();
    if groups.m() == 1 {
        warnings.push(
            "single sensitive group: no attraction term; the regularizer is pure repulsion and the objective is unbounded below for lambda > 0".into(),
        );
    }
    let coeffs = sizes
        .iter()
        .enumerate()
        .map(|(s, &size)| {
            let same_count = if opts.include_diagonal { size } else { size - 1 };
            let other_count = n - size;
            let repel = if same_count > 0 {
                1.0 / same_count as f64
            } else {
                warnings.push(format!(
                    "group {s} has a single member: zero repulsion row"
                ));
                0.0
            };
            let attract = if other_count > 0 {
                1.0 / other_count as f64
            } else {
                0.0
            };
            let d = f64::from(u8::from(other_count > 0)) - f64::from(u8::from(same_count > 0));
            let c_diag = if opts.include_diagonal { -repel } else { 0.0 };
            GroupCoefficients {
                same: repel,
                other: -attract,
                diag: d - c_diag,
                c_diag,
            }
        })
        .collect();
    ContrastiveSystem {
        labels: groups.labels().to_vec(),
        coeffs,
        options: opts,
        warnings,
    }
}

impl ContrastiveSystem {
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn options(&self) -> ContrastiveOptions {
        self.options
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    fn c_entry(&self, i: usize, j: usize) -> f64 {
        let c = &self.coeffs[self.labels[i]];
        if i == j {
            c.c_diag
        } else if self.labels[i] == self.labels[j] {
            -c.same
        } else {
            -c.other
        }
    }

    fn l_entry(&self, i: usize, j: usize) -> f64 {
        let c = &self.coeffs[self.labels[i]];
        if i == j {
            c.diag
        } else if self.labels[i] == self.labels[j] {
            c.same
        } else {
            c.other
        }
    }

    fn dense(&self, f: impl Fn(usize, usize) -> f64) -> Array2<f64> {
        let n = self.n();
        Array2::from_shape_fn((n, n), |(i, j)| f(i, j))
    }

    /// `C = P - N`.
    pub fn contrast_matrix(&self) -> Array2<f64> {
        self.dense(|i, j| self.c_entry(i, j))
    }

    /// Diagonal of `D`, the row sums of `C`.
    pub fn degree(&self) -> Array1<f64> {
        Array1::from_iter(
            self.labels
                .iter()
                .map(|&s| self.coeffs[s].diag + self.coeffs[s].c_diag),
        )
    }

    pub fn laplacian(&self) -> Array2<f64> {
        self.dense(|i, j| self.l_entry(i, j))
    }

    /// `(L+, L-)` with `L = L+ - L-`, both nonnegative with disjoint support.
    pub fn split(&self) -> (Array2<f64>, Array2<f64>) {
        let plus = self.dense(|i, j| self.l_entry(i, j).max(0.0));
        let minus = self.dense(|i, j| (-self.l_entry(i, j)).max(0.0));
        (plus, minus)
    }

    pub fn dense_split(&self) -> DenseSplit {
        let (plus, minus) = self.split();
        DenseSplit { plus, minus }
    }

    fn group_sums(&self, h: &Array2<f64>) -> (Array2<f64>, Array1<f64>) {
        let mut sums = Array2::zeros((self.coeffs.len(), h.ncols()));
        for (row, &s) in h.axis_iter(Axis(0)).zip(&self.labels) {
            let mut acc = sums.row_mut(s);
            acc += &row;
        }
        let total = sums.sum_axis(Axis(0));
        (sums, total)
    }

    /// `L H`.
    pub fn laplacian_mul(&self, h: &Array2<f64>) -> Array2<f64> {
        self.apply_plus(h) - self.apply_minus(h)
    }

    /// `Tr(H^T L H)`.
    pub fn regularizer(&self, h: &Array2<f64>) -> f64 {
        (h * &self.laplacian_mul(h)).sum()
    }
}

/// Multiplication by the nonnegative parts of a split Laplacian.
pub trait LaplacianSplit {
    fn n(&self) -> usize;
    /// `L+ H`
    fn apply_plus(&self, h: &Array2<f64>) -> Array2<f64>;
    /// `L- H`
    fn apply_minus(&self, h: &Array2<f64>) -> Array2<f64>;

    /// `Tr(H^T L H)` with `L = L+ - L-`.
    fn trace_form(&self, h: &Array2<f64>) -> f64 {
        (h * &(self.apply_plus(h) - self.apply_minus(h))).sum()
    }
}

impl LaplacianSplit for ContrastiveSystem {
    fn n(&self) -> usize {
        self.labels.len()
    }

    fn apply_plus(&self, h: &Array2<f64>) -> Array2<f64> {
        assert_eq!(h.nrows(), self.n());
        let (sums, _) = self.group_sums(h);
        let mut out = Array2::zeros(h.raw_dim());
        for (i, &s) in self.labels.iter().enumerate() {
            let c = &self.coeffs[s];
            let hi = h.row(i);
            let mut row = out.row_mut(i);
            row.zip_mut_with(&sums.row(s), |o, &g| *o = c.same * g);
            // the self term appears in the group sum; swap it for the diagonal
            row.scaled_add(c.diag.max(0.0) - c.same, &hi);
        }
        out
    }

    fn apply_minus(&self, h: &Array2<f64>) -> Array2<f64> {
        assert_eq!(h.nrows(), self.n());
        let (sums, total) = self.group_sums(h);
        let mut out = Array2::zeros(h.raw_dim());
        for (i, &s) in self.labels.iter().enumerate() {
            let c = &self.coeffs[s];
            let mut row = out.row_mut(i);
            let attract = -c.other;
            ndarray::Zip::from(&mut row)
                .and(&total)
                .and(&sums.row(s))
                .for_each(|o, &t, &g| *o = attract * (t - g));
            let self_weight = (-c.diag).max(0.0);
            if self_weight > 0.0 {
                row.scaled_add(self_weight, &h.row(i));
            }
        }
        out
    }
}

/// Explicit `L+`/`L-` pair, for fixtures and cross-checks.
#[derive(Debug, Clone)]
pub struct DenseSplit {
    pub plus: Array2<f64>,
    pub minus: Array2<f64>,
}

impl DenseSplit {
    pub fn from_laplacian(l: &Array2<f64>) -> Self {
        Self {
            plus: l.mapv(|x| x.max(0.0)),
            minus: l.mapv(|x| (-x).max(0.0)),
        }
    }
}

impl LaplacianSplit for DenseSplit {
    fn n(&self) -> usize {
        self.plus.nrows()
    }

    fn apply_plus(&self, h: &Array2<f64>) -> Array2<f64> {
        self.plus.dot(h)
    }

    fn apply_minus(&self, h: &Array2<f64>) -> Array2<f64> {
        self.minus.dot(h)
    }
}

/// `Tr(H^T L H)` against an explicit Laplacian.
pub fn regularizer_value(h: &Array2<f64>, l: &Array2<f64>) -> Result<f64> {
    if l.nrows() != l.ncols() || l.ncols() != h.nrows() {
        return Err(Error::Dimension(format!(
            "H is {}x{}, L is {}x{}",
            h.nrows(),
            h.ncols(),
            l.nrows(),
            l.ncols()
        )));
    }
    Ok((h * &l.dot(h)).sum())
}
