//! Functional-data substrate: grids, trapezoid quadrature, inner products,
//! centering, empirical covariance kernels and their eigendecompositions.
//!
//! Curves are represented by their values on a shared strictly increasing
//! grid; every L² operation is a quadrature sum with the grid's trapezoid
//! weights, so the rule is exact for piecewise-linear integrands.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{FcrError, Result};

/// Default relative cutoff for the numerical rank of a covariance kernel.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Trapezoid quadrature weights for a strictly increasing point sequence.
///
/// `q_1 = (t_2−t_1)/2`, `q_m = (t_m−t_{m−1})/2`, interior
/// `q_k = (t_{k+1}−t_{k−1})/2`; they sum to `t_m − t_1`.
pub fn trapezoid_weights(points: &[f64]) -> Result<Vec<f64>> {
    let m = points.len();
    if m < 2 {
        return Err(FcrError::InvalidGrid(format!(
            "need at least two grid points, got {m}"
        )));
    }
    if !points.iter().all(|t| t.is_finite()) {
        return Err(FcrError::InvalidGrid("non-finite grid point".into()));
    }
    if !points.windows(2).all(|w| w[0] < w[1]) {
        return Err(FcrError::InvalidGrid(
            "grid points must be strictly increasing".into(),
        ));
    }
    let mut weights = vec![0.0; m];
    weights[0] = (points[1] - points[0]) / 2.0;
    weights[m - 1] = (points[m - 1] - points[m - 2]) / 2.0;
    for k in 1..m - 1 {
        weights[k] = (points[k + 1] - points[k - 1]) / 2.0;
    }
    Ok(weights)
}

/// A sampling grid with its trapezoid quadrature weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl Grid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        let weights = trapezoid_weights(&points)?;
        Ok(Grid { points, weights })
    }

    /// Uniform grid of `m` points on `[a, b]`.
    pub fn uniform(a: f64, b: f64, m: usize) -> Result<Self> {
        if m < 2 || !(a < b) {
            return Err(FcrError::InvalidGrid(format!(
                "uniform grid needs m >= 2 and a < b, got m = {m}, a = {a}, b = {b}"
            )));
        }
        let h = (b - a) / (m - 1) as f64;
        let points = (0..m).map(|k| a + k as f64 * h).collect();
        Grid::new(points)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn check_len(&self, curve: &Curve) -> Result<()> {
        if curve.len() != self.len() {
            return Err(FcrError::DimensionMismatch {
                expected: self.len(),
                found: curve.len(),
            });
        }
        Ok(())
    }

    /// Quadrature inner product `⟨f, g⟩ = Σ_k q_k f_k g_k`.
    pub fn inner_product(&self, f: &Curve, g: &Curve) -> Result<f64> {
        self.check_len(f)?;
        self.check_len(g)?;
        let mut acc = 0.0;
        for k in 0..self.len() {
            acc += self.weights[k] * f.values[k] * g.values[k];
        }
        Ok(acc)
    }

    /// Quadrature norm `sqrt(⟨f, f⟩)`.
    pub fn norm(&self, f: &Curve) -> Result<f64> {
        Ok(self.inner_product(f, f)?.sqrt())
    }

    /// Cosine of the angle between two curves in the quadrature metric.
    pub fn cosine(&self, f: &Curve, g: &Curve) -> Result<f64> {
        let nf = self.norm(f)?;
        let ng = self.norm(g)?;
        if nf == 0.0 || ng == 0.0 {
            return Err(FcrError::InvalidArgument(
                "cosine undefined for a zero curve".into(),
            ));
        }
        Ok(self.inner_product(f, g)? / (nf * ng))
    }
}

/// A function sampled on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    values: Vec<f64>,
}

impl Curve {
    pub fn new(values: Vec<f64>) -> Self {
        Curve { values }
    }

    pub fn zeros(len: usize) -> Self {
        Curve {
            values: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `self += a * other`; lengths must agree.
    pub fn axpy(&mut self, a: f64, other: &Curve) {
        assert_eq!(self.len(), other.len(), "curve length mismatch");
        for (v, o) in self.values.iter_mut().zip(&other.values) {
            *v += a * o;
        }
    }

    pub fn scale(&mut self, a: f64) {
        for v in &mut self.values {
            *v *= a;
        }
    }

    /// Pointwise difference `self − other`.
    pub fn minus(&self, other: &Curve) -> Curve {
        assert_eq!(self.len(), other.len(), "curve length mismatch");
        Curve {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

/// A sample of `n` curves on a shared grid, optionally paired with scalar
/// responses.
#[derive(Clone, Debug)]
pub struct FunctionalDataset {
    grid: Grid,
    /// Row i holds curve i; n × m.
    curves: DMatrix<f64>,
    responses: Option<Vec<f64>>,
}

impl FunctionalDataset {
    pub fn new(grid: Grid, curves: DMatrix<f64>, responses: Option<Vec<f64>>) -> Result<Self> {
        if curves.ncols() != grid.len() {
            return Err(FcrError::DimensionMismatch {
                expected: grid.len(),
                found: curves.ncols(),
            });
        }
        if !curves.iter().all(|v| v.is_finite()) {
            return Err(FcrError::DataFormat("non-finite curve value".into()));
        }
        if let Some(y) = &responses {
            if y.len() != curves.nrows() {
                return Err(FcrError::DimensionMismatch {
                    expected: curves.nrows(),
                    found: y.len(),
                });
            }
            if !y.iter().all(|v| v.is_finite()) {
                return Err(FcrError::DataFormat("non-finite response value".into()));
            }
        }
        Ok(FunctionalDataset {
            grid,
            curves,
            responses,
        })
    }

    pub fn from_rows(grid: Grid, rows: &[Vec<f64>], responses: Option<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let m = grid.len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != m {
                return Err(FcrError::DataFormat(format!(
                    "curve {i} has {} values, expected {m}",
                    r.len()
                )));
            }
        }
        let curves = DMatrix::from_fn(n, m, |i, j| rows[i][j]);
        FunctionalDataset::new(grid, curves, responses)
    }

    pub fn n(&self) -> usize {
        self.curves.nrows()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn curves(&self) -> &DMatrix<f64> {
        &self.curves
    }

    pub fn responses(&self) -> Option<&[f64]> {
        self.responses.as_deref()
    }

    pub fn with_responses(&self, responses: Vec<f64>) -> Result<Self> {
        FunctionalDataset::new(self.grid.clone(), self.curves.clone(), Some(responses))
    }

    pub fn curve(&self, i: usize) -> Curve {
        Curve::new(self.curves.row(i).iter().copied().collect())
    }

    /// Subset of rows (and aligned responses) by index.
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        let m = self.grid.len();
        let mut mat = DMatrix::zeros(idx.len(), m);
        for (r, &i) in idx.iter().enumerate() {
            if i >= self.n() {
                return Err(FcrError::InvalidArgument(format!(
                    "row index {i} out of range"
                )));
            }
            mat.row_mut(r).copy_from(&self.curves.row(i));
        }
        let responses = self
            .responses
            .as_ref()
            .map(|y| idx.iter().map(|&i| y[i]).collect());
        FunctionalDataset::new(self.grid.clone(), mat, responses)
    }

    /// Center curves (and responses, if present); returns the centered
    /// dataset, the mean curve and the mean response.
    pub fn center(&self) -> Result<(Self, Curve, Option<f64>)> {
        let n = self.n();
        if n == 0 {
            return Err(FcrError::EmptyDataset);
        }
        let m = self.grid.len();
        let mut mean = vec![0.0; m];
        for j in 0..m {
            let mut acc = 0.0;
            for i in 0..n {
                acc += self.curves[(i, j)];
            }
            mean[j] = acc / n as f64;
        }
        let mut centered = self.curves.clone();
        for j in 0..m {
            for i in 0..n {
                centered[(i, j)] -= mean[j];
            }
        }
        let (y_mean, centered_y) = match &self.responses {
            Some(y) => {
                let ybar = y.iter().sum::<f64>() / n as f64;
                (Some(ybar), Some(y.iter().map(|v| v - ybar).collect()))
            }
            None => (None, None),
        };
        let ds = FunctionalDataset {
            grid: self.grid.clone(),
            curves: centered,
            responses: centered_y,
        };
        Ok((ds, Curve::new(mean), y_mean))
    }

    /// Empirical covariance kernel `K[s,t] = (1/n) Σ_i x_i(s) x_i(t)` of an
    /// already centered sample (divisor n).
    pub fn empirical_cov(&self) -> Result<CovKernel> {
        let n = self.n();
        if n == 0 {
            return Err(FcrError::EmptyDataset);
        }
        let mut k = self.curves.transpose() * &self.curves;
        k /= n as f64;
        // gemm can leave asymmetry at the last bit; make it exact.
        let m = k.nrows();
        for s in 0..m {
            for t in (s + 1)..m {
                let v = 0.5 * (k[(s, t)] + k[(t, s)]);
                k[(s, t)] = v;
                k[(t, s)] = v;
            }
        }
        CovKernel::new(self.grid.clone(), k)
    }

    /// Component scores `s_i = ⟨row_i, w⟩` in the quadrature metric.
    pub fn scores(&self, w: &Curve) -> Result<Vec<f64>> {
        self.grid.check_len(w)?;
        let n = self.n();
        let m = self.grid.len();
        let q = self.grid.weights();
        let mut s = vec![0.0; n];
        // Column-major storage: sweep columns outer for locality.
        for j in 0..m {
            let qw = q[j] * w.values[j];
            if qw == 0.0 {
                continue;
            }
            let col = self.curves.column(j);
            for i in 0..n {
                s[i] += qw * col[i];
            }
        }
        Ok(s)
    }
}

/// Discretized covariance kernel on a grid; symmetric m × m.
#[derive(Clone, Debug)]
pub struct CovKernel {
    grid: Grid,
    kernel: DMatrix<f64>,
}

impl CovKernel {
    pub fn new(grid: Grid, kernel: DMatrix<f64>) -> Result<Self> {
        let m = grid.len();
        if kernel.nrows() != m || kernel.ncols() != m {
            return Err(FcrError::DimensionMismatch {
                expected: m,
                found: kernel.nrows().max(kernel.ncols()),
            });
        }
        let scale = kernel.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for s in 0..m {
            for t in (s + 1)..m {
                if (kernel[(s, t)] - kernel[(t, s)]).abs() > 1e-12 * scale.max(1e-300) {
                    return Err(FcrError::InvalidArgument(
                        "covariance kernel is not symmetric".into(),
                    ));
                }
            }
        }
        Ok(CovKernel { grid, kernel })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    /// Apply the integral operator: `(Kf)(s) = Σ_t q_t K[s,t] f(t)`.
    pub fn apply(&self, f: &Curve) -> Result<Curve> {
        self.grid.check_len(f)?;
        let m = self.grid.len();
        let q = self.grid.weights();
        let mut out = vec![0.0; m];
        for t in 0..m {
            let qf = q[t] * f.values[t];
            if qf == 0.0 {
                continue;
            }
            let col = self.kernel.column(t);
            for (s, o) in out.iter_mut().enumerate() {
                *o += qf * col[s];
            }
        }
        Ok(Curve::new(out))
    }

    /// Quadrature-weighted eigendecomposition.
    ///
    /// Symmetrizes via `D = diag(√q)`, decomposes `D·K·D`, maps eigenvectors
    /// back to curves `φ = D⁻¹ u`, keeps eigenvalues above
    /// `rank_tol · λ̂_1` and flips each eigenfunction so its entry of
    /// largest magnitude is positive.
    pub fn eigen(&self, rank_tol: f64) -> Result<EigenSystem> {
        if !(rank_tol > 0.0 && rank_tol < 1.0) {
            return Err(FcrError::InvalidArgument(format!(
                "rank_tol must lie in (0, 1), got {rank_tol}"
            )));
        }
        let m = self.grid.len();
        let q = self.grid.weights();
        let sq: Vec<f64> = q.iter().map(|v| v.sqrt()).collect();
        let mut b = self.kernel.clone();
        for s in 0..m {
            for t in 0..m {
                b[(s, t)] *= sq[s] * sq[t];
            }
        }
        let decomp = SymmetricEigen::new(b);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &c| {
            decomp.eigenvalues[c]
                .partial_cmp(&decomp.eigenvalues[a])
                .expect("eigenvalues are finite")
        });
        let lambda_max = decomp.eigenvalues[order[0]];
        if lambda_max <= 0.0 {
            return Err(FcrError::DegenerateCovariance);
        }
        let lambda_min = decomp.eigenvalues[order[m - 1]];
        if lambda_min < -1e-10 * lambda_max {
            return Err(FcrError::InvalidArgument(
                "covariance kernel is not positive semidefinite".into(),
            ));
        }
        let cut = rank_tol * lambda_max;
        let mut eigenvalues = Vec::new();
        let mut eigenfunctions = Vec::new();
        for &j in &order {
            let lam = decomp.eigenvalues[j];
            if lam <= cut {
                break;
            }
            let u = decomp.eigenvectors.column(j);
            let mut phi: Vec<f64> = (0..m).map(|k| u[k] / sq[k]).collect();
            // Deterministic sign: largest-magnitude entry positive.
            let mut arg = 0usize;
            for (k, v) in phi.iter().enumerate() {
                if v.abs() > phi[arg].abs() {
                    arg = k;
                }
            }
            if phi[arg] < 0.0 {
                for v in &mut phi {
                    *v = -*v;
                }
            }
            eigenvalues.push(lam);
            eigenfunctions.push(Curve::new(phi));
        }
        if eigenvalues.is_empty() {
            return Err(FcrError::DegenerateCovariance);
        }
        Ok(EigenSystem {
            eigenvalues,
            eigenfunctions,
        })
    }
}

/// Positive eigenvalues (descending) and quadrature-orthonormal
/// eigenfunctions of an empirical covariance kernel.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    eigenvalues: Vec<f64>,
    eigenfunctions: Vec<Curve>,
}

impl EigenSystem {
    pub fn new(eigenvalues: Vec<f64>, eigenfunctions: Vec<Curve>) -> Self {
        assert_eq!(eigenvalues.len(), eigenfunctions.len());
        EigenSystem {
            eigenvalues,
            eigenfunctions,
        }
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenfunctions(&self) -> &[Curve] {
        &self.eigenfunctions
    }

    pub fn pair(&self, j: usize) -> (f64, &Curve) {
        (self.eigenvalues[j], &self.eigenfunctions[j])
    }

    /// Drop the leading eigenpair (used when the response is exactly
    /// orthogonal to the top eigenspace).
    pub(crate) fn without_leading(&self) -> EigenSystem {
        EigenSystem {
            eigenvalues: self.eigenvalues[1..].to_vec(),
            eigenfunctions: self.eigenfunctions[1..].to_vec(),
        }
    }
}
