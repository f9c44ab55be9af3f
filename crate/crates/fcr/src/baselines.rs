//! Independent FPCR and FPLS reference fits.
//!
//! Both share the prediction contract of the continuum model but are built
//! without the ridge-form machinery, so the α-limit agreement checks
//! exercise genuinely different code paths: FPCR regresses on eigen-scores,
//! FPLS iterates the cross-covariance/deflation (NIPALS) recursion.

use crate::continuum::CenteredSample;
use crate::error::{FcrError, Result};
use crate::fgrid::{Curve, FunctionalDataset, Grid, DEFAULT_RANK_TOL};
use crate::stats::{cov_n, var_n};

/// Which baseline produced a model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaselineKind {
    Fpcr,
    Fpls,
}

impl BaselineKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BaselineKind::Fpcr => "fpcr",
            BaselineKind::Fpls => "fpls",
        }
    }
}

/// A fitted baseline model; same prediction contract as the continuum model.
#[derive(Clone, Debug)]
pub struct BaselineModel {
    pub kind: BaselineKind,
    pub p: usize,
    pub beta_hat: Curve,
    pub x_mean: Curve,
    pub y_mean: f64,
    pub grid: Grid,
    /// Weight functions (FPLS keeps them for orthogonality checks; FPCR
    /// stores the eigenfunctions it regressed on).
    pub weights: Vec<Curve>,
    /// Regression coefficient on each weight's score, aligned with
    /// `weights`.
    pub coefs: Vec<f64>,
}

impl BaselineModel {
    pub fn predict_one(&self, x: &Curve) -> Result<f64> {
        if x.len() != self.grid.len() {
            return Err(FcrError::GridMismatch);
        }
        let centered = x.minus(&self.x_mean);
        Ok(self.y_mean + self.grid.inner_product(&self.beta_hat, &centered)?)
    }

    pub fn predict(&self, ds: &FunctionalDataset) -> Result<Vec<f64>> {
        if ds.grid().points() != self.grid.points() {
            return Err(FcrError::GridMismatch);
        }
        (0..ds.n())
            .map(|i| self.predict_one(&ds.curve(i)))
            .collect()
    }
}

/// Functional principal component regression with `p` components:
/// `β̂ = Σ_{j≤p} (a_j/λ̂_j) φ̂_j`, `a_j = ĉov(Y, ∫(X−X̄)φ̂_j)`.
pub fn fpcr_fit(ds: &FunctionalDataset, p: usize) -> Result<BaselineModel> {
    if p < 1 {
        return Err(FcrError::InvalidArgument("p must be at least 1".into()));
    }
    let sample = CenteredSample::new(ds)?;
    let eig = sample.kernel().eigen(DEFAULT_RANK_TOL)?;
    if p > eig.rank() {
        return Err(FcrError::InvalidArgument(format!(
            "p = {p} exceeds the covariance rank {}",
            eig.rank()
        )));
    }
    let grid = ds.grid().clone();
    let mut beta = Curve::zeros(grid.len());
    let mut weights = Vec::with_capacity(p);
    let mut coefs = Vec::with_capacity(p);
    for j in 0..p {
        let (lam, phi) = eig.pair(j);
        let scores = sample.ds().scores(phi)?;
        let a = cov_n(sample.y(), &scores);
        beta.axpy(a / lam, phi);
        weights.push(phi.clone());
        coefs.push(a / lam);
    }
    Ok(BaselineModel {
        kind: BaselineKind::Fpcr,
        p,
        beta_hat: beta,
        x_mean: sample.x_mean().clone(),
        y_mean: sample.y_mean(),
        grid,
        weights,
        coefs,
    })
}

/// Functional partial least squares by the NIPALS recursion: take the
/// cross-covariance curve of the current residuals, normalize it, regress,
/// deflate, repeat. Truncates early if the cross-covariance vanishes.
pub fn fpls_fit(ds: &FunctionalDataset, p: usize) -> Result<BaselineModel> {
    if p < 1 {
        return Err(FcrError::InvalidArgument("p must be at least 1".into()));
    }
    let sample = CenteredSample::new(ds)?;
    let grid = ds.grid().clone();
    let n = sample.ds().n();
    let m = grid.len();

    let mut work = sample.ds().curves().clone();
    let mut resid: Vec<f64> = sample.y().to_vec();
    let y_scale = var_n(&resid).sqrt().max(1e-300);

    let mut beta = Curve::zeros(m);
    let mut weights: Vec<Curve> = Vec::with_capacity(p);
    let mut coefs: Vec<f64> = Vec::with_capacity(p);
    let mut constraint_dirs: Vec<Curve> = Vec::new();

    for _ in 0..p {
        // Cross-covariance curve g(s) = (1/n) Σ_i ê_i Ẑ_i(s).
        let mut g = vec![0.0; m];
        for j in 0..m {
            let mut acc = 0.0;
            for i in 0..n {
                acc += resid[i] * work[(i, j)];
            }
            g[j] = acc / n as f64;
        }
        let g = Curve::new(g);
        let gnorm = grid.norm(&g)?;
        // No remaining cross-covariance: stop with the components found.
        if gnorm <= 1e-13 * y_scale {
            break;
        }
        let mut w = g;
        w.scale(1.0 / gnorm);

        let orig_scores = sample.ds().scores(&w)?;
        let variance = var_n(&orig_scores);
        if !(variance > 0.0) {
            break;
        }
        let coef = cov_n(sample.y(), &orig_scores) / variance;

        // Fitted values leave the residuals; the working curves are
        // projected off the (orthonormalized) direction V̂_X(w) so every
        // later weight is V̂-orthogonal to this one.
        let work_ds = FunctionalDataset::new(grid.clone(), work.clone(), None)?;
        let t = work_ds.scores(&w)?;
        for i in 0..n {
            resid[i] -= coef * t[i];
        }
        let vkw = sample.kernel().apply(&w)?;
        let mut direction = vkw.clone();
        for d in &constraint_dirs {
            let overlap = grid.inner_product(&direction, d)?;
            direction.axpy(-overlap, d);
        }
        let res_norm = grid.norm(&direction)?;
        if res_norm > 1e-12 * grid.norm(&vkw)?.max(1e-300) {
            direction.scale(1.0 / res_norm);
            let overlaps = work_ds.scores(&direction)?;
            for j in 0..m {
                let dj = direction.values()[j];
                if dj == 0.0 {
                    continue;
                }
                for i in 0..n {
                    work[(i, j)] -= overlaps[i] * dj;
                }
            }
            constraint_dirs.push(direction);
        }
        beta.axpy(coef, &w);
        weights.push(w);
        coefs.push(coef);
    }

    if weights.is_empty() {
        return Err(FcrError::NoSignal);
    }
    Ok(BaselineModel {
        kind: BaselineKind::Fpls,
        p: weights.len(),
        beta_hat: beta,
        x_mean: sample.x_mean().clone(),
        y_mean: sample.y_mean(),
        grid,
        weights,
        coefs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continuum::{fit, init_state, FitOptions};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn synth(n: usize, m: usize, rank: usize, noise: f64, seed: u64) -> FunctionalDataset {
        let grid = Grid::uniform(0.0, 1.0, m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let span: Vec<Vec<f64>> = (0..rank)
            .map(|k| {
                grid.points()
                    .iter()
                    .map(|t| ((k + 1) as f64 * std::f64::consts::PI * t).sin() + 0.2)
                    .collect()
            })
            .collect();
        let mut rows = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let mut row = vec![0.0; m];
            let mut y = 0.0;
            for (k, basis) in span.iter().enumerate() {
                let xi: f64 = StandardNormal.sample(&mut rng);
                let scale = 1.0 / (1.0 + k as f64);
                for (r, b) in row.iter_mut().zip(basis) {
                    *r += scale * xi * b;
                }
                y += scale * xi;
            }
            let eps: f64 = StandardNormal.sample(&mut rng);
            ys.push(y + noise * eps);
            rows.push(row);
        }
        FunctionalDataset::from_rows(grid, &rows, Some(ys)).unwrap()
    }

    #[test]
    fn fpcr_misses_then_recovers_excluded_component() {
        // Response driven purely by the second eigen-score: p=1 fits
        // nothing, p=2 fits exactly.
        let ds = synth(15, 20, 3, 0.0, 1);
        let state = init_state(&ds, &FitOptions::default()).unwrap();
        let phi2 = state.eig().eigenfunctions()[1].clone();
        let (c, _, _) = ds.center().unwrap();
        let y = c.scores(&phi2).unwrap();
        let ds2 = ds.with_responses(y.clone()).unwrap();

        let m1 = fpcr_fit(&ds2, 1).unwrap();
        let preds1 = m1.predict(&ds2).unwrap();
        let yv = ds2.responses().unwrap();
        let ss_tot: f64 = yv.iter().map(|v| v * v).sum();
        let ss_res: f64 = yv.iter().zip(&preds1).map(|(a, b)| (a - b) * (a - b)).sum();
        let r2 = 1.0 - ss_res / ss_tot;
        assert!(r2.abs() < 0.05, "p=1 in-sample R² should be ≈ 0, got {r2}");

        let m2 = fpcr_fit(&ds2, 2).unwrap();
        let preds2 = m2.predict(&ds2).unwrap();
        for (a, b) in yv.iter().zip(&preds2) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn fpcr_rejects_p_beyond_rank() {
        let ds = synth(12, 16, 2, 0.1, 2);
        assert!(matches!(
            fpcr_fit(&ds, 5),
            Err(FcrError::InvalidArgument(_))
        ));
    }

    #[test]
    fn fpcr_beta_is_sign_invariant() {
        // β̂ must not depend on the eigenfunction sign convention: a_j and
        // φ̂_j flip together, so the products are unchanged. Check against a
        // manual assembly with flipped signs.
        let ds = synth(14, 18, 3, 0.2, 3);
        let model = fpcr_fit(&ds, 3).unwrap();
        let sample = CenteredSample::new(&ds).unwrap();
        let eig = sample.kernel().eigen(DEFAULT_RANK_TOL).unwrap();
        let mut beta = Curve::zeros(18);
        for j in 0..3 {
            let (lam, phi) = eig.pair(j);
            let mut flipped = phi.clone();
            flipped.scale(-1.0);
            let scores = sample.ds().scores(&flipped).unwrap();
            let a = cov_n(sample.y(), &scores);
            beta.axpy(a / lam, &flipped);
        }
        let diff = ds.grid().norm(&beta.minus(&model.beta_hat)).unwrap();
        assert!(diff < 1e-12);
    }

    #[test]
    fn fpls_first_weight_is_cross_covariance_direction() {
        let ds = synth(20, 22, 3, 0.3, 4);
        let model = fpls_fit(&ds, 1).unwrap();
        let sample = CenteredSample::new(&ds).unwrap();
        let n = ds.n();
        let mut g = vec![0.0; 22];
        for j in 0..22 {
            let mut acc = 0.0;
            for i in 0..n {
                acc += sample.y()[i] * sample.ds().curves()[(i, j)];
            }
            g[j] = acc / n as f64;
        }
        let g = Curve::new(g);
        let cos = ds.grid().cosine(&model.weights[0], &g).unwrap();
        assert!(cos.abs() > 1.0 - 1e-12);
    }

    #[test]
    fn fpls_agrees_with_continuum_at_alpha_half() {
        let ds = synth(50, 30, 3, 0.3, 5);
        let pls = fpls_fit(&ds, 3).unwrap();
        let fcr = fit(&ds, 0.5, 3, &FitOptions::default()).unwrap();
        assert_eq!(pls.p, 3);
        assert_eq!(fcr.p(), 3);
        let grid = ds.grid();
        for k in 0..3 {
            let cos = grid
                .cosine(&pls.weights[k], &fcr.components()[k].weight)
                .unwrap()
                .abs();
            assert!(cos > 1.0 - 1e-6, "component {k}: cos = {cos}");
        }
        let rel = grid.norm(&pls.beta_hat.minus(fcr.beta_hat())).unwrap()
            / grid.norm(fcr.beta_hat()).unwrap();
        assert!(rel < 1e-4, "relative β̂ gap {rel}");
    }

    #[test]
    fn fpls_weights_satisfy_shared_invariants() {
        let ds = synth(25, 24, 4, 0.4, 6);
        let sample = CenteredSample::new(&ds).unwrap();
        let eig = sample.kernel().eigen(DEFAULT_RANK_TOL).unwrap();
        let lam1 = eig.eigenvalues()[0];
        let model = fpls_fit(&ds, 3).unwrap();
        let grid = ds.grid();
        for k in 0..model.p {
            assert!((grid.norm(&model.weights[k]).unwrap() - 1.0).abs() < 1e-8);
            let vkw = sample.kernel().apply(&model.weights[k]).unwrap();
            for l in (k + 1)..model.p {
                let ip = grid.inner_product(&model.weights[l], &vkw).unwrap();
                assert!(ip.abs() < 1e-6 * lam1, "⟨w{l}, V̂w{k}⟩ = {ip}");
            }
        }
    }

    #[test]
    fn fpls_truncates_without_cross_covariance() {
        let ds = synth(15, 14, 2, 0.0, 7);
        let constant = ds.with_responses(vec![1.5; 15]).unwrap();
        assert!(matches!(fpls_fit(&constant, 2), Err(FcrError::NoSignal)));
        // Exact one-component signal: asking for more truncates to what is
        // fittable.
        let state = init_state(&ds, &FitOptions::default()).unwrap();
        let phi1 = state.eig().eigenfunctions()[0].clone();
        let (c, _, _) = ds.center().unwrap();
        let y = c.scores(&phi1).unwrap();
        let exact = ds.with_responses(y).unwrap();
        let model = fpls_fit(&exact, 2).unwrap();
        assert_eq!(model.p, 1);
    }

    #[test]
    fn fpls_null_coefficient_shrinks_with_sample_size() {
        // Response independent of the curves: the first-component
        // coefficient is pure sampling noise and shrinks as n grows.
        let mut med = Vec::new();
        for &n in &[50usize, 800] {
            let mut coefs = Vec::new();
            for rep in 0..50u64 {
                let ds = synth(n, 12, 2, 0.0, 5000 + rep);
                let mut rng = ChaCha8Rng::seed_from_u64(6000 + rep);
                let noise: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                let nulled = ds.with_responses(noise).unwrap();
                let model = fpls_fit(&nulled, 1).unwrap();
                coefs.push(model.coefs[0].abs());
            }
            coefs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            med.push(0.5 * (coefs[24] + coefs[25]));
        }
        assert!(
            med[1] < med[0],
            "median |coef| should shrink: n=50 gives {}, n=800 gives {}",
            med[0],
            med[1]
        );
    }

    #[test]
    fn fpcr_agrees_with_continuum_near_alpha_one() {
        // Response loading on the top two eigen-scores: the α → 1 continuum
        // fit collapses onto the principal-component regression.
        let ds = synth(40, 24, 3, 0.0, 8);
        let state = init_state(&ds, &FitOptions::default()).unwrap();
        let (c, _, _) = ds.center().unwrap();
        let s1 = c.scores(&state.eig().eigenfunctions()[0]).unwrap();
        let s2 = c.scores(&state.eig().eigenfunctions()[1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let y: Vec<f64> = s1
            .iter()
            .zip(&s2)
            .map(|(a, b)| {
                let eps: f64 = StandardNormal.sample(&mut rng);
                1.2 * a + 0.8 * b + 0.05 * eps
            })
            .collect();
        let ds2 = ds.with_responses(y).unwrap();
        let pcr = fpcr_fit(&ds2, 2).unwrap();
        let fcr = fit(&ds2, 0.999, 2, &FitOptions::default()).unwrap();
        let grid = ds2.grid();
        let gap = grid.norm(&pcr.beta_hat.minus(fcr.beta_hat())).unwrap()
            / grid.norm(&pcr.beta_hat).unwrap().max(1.0);
        assert!(gap < 1e-4, "beta gap {gap}");
    }
}
