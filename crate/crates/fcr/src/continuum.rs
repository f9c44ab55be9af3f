//! Functional continuum regression: ridge-form weight construction, the
//! univariate δ search, deflation recursions, model assembly and prediction.
//!
//! Each component maximizes
//! `T̂*(w) = ĉov²(Ŷ, ∫X̂w) · (∫w V̂_X̂(w))^{α/(1−α)−1}`
//! over unit-norm weights, where `X̂, Ŷ` are the deflated curves and
//! residual responses. The maximizer lies in a one-parameter ridge family
//! over the eigenfunctions of the deflated covariance, so the search
//! reduces to maximizing `ln Q(δ)` on `(−1, 0) ∪ (0, ∞)` plus three
//! tagged boundary candidates that recover the principal-component,
//! partial-least-squares and least-squares directions.

use crate::error::{FcrError, Result};
use crate::fgrid::{CovKernel, Curve, EigenSystem, FunctionalDataset, Grid, DEFAULT_RANK_TOL};
use crate::stats::{cov_n, var_n};

/// Relative threshold below which a cross-covariance is treated as zero.
const NO_SIGNAL_RTOL: f64 = 1e-12;
/// Relative residual variance below which the response is considered
/// exhausted (used to stop after an exact fit).
const RESIDUAL_VAR_RTOL: f64 = 1e-26;

/// Ridge parameter of a fitted component: an interior value of δ or one of
/// the three boundary limits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DeltaValue {
    Interior(f64),
    /// δ → −1: the leading eigenfunction (principal-component direction).
    ToMinusOne,
    /// δ → 0: the cross-covariance (partial-least-squares direction).
    ToZero,
    /// δ → ∞: the variance-discounted (least-squares direction).
    ToInfinity,
}

/// Options for the univariate δ maximization.
#[derive(Clone, Debug)]
pub struct SearchOptions {
    /// Offset ε_b from the boundary points {−1, 0}.
    pub boundary_eps: f64,
    /// Upper end of the right search piece.
    pub delta_max: f64,
    /// Seed-scan resolution per piece.
    pub scan_points: usize,
    /// Golden-section iteration cap per piece.
    pub refine_iters: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            boundary_eps: 1e-6,
            delta_max: 1e8,
            scan_points: 64,
            refine_iters: 120,
        }
    }
}

/// Options shared by every fitting entry point.
#[derive(Clone, Debug)]
pub struct FitOptions {
    /// Relative eigenvalue cutoff for covariance rank truncation.
    pub rank_tol: f64,
    pub search: SearchOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            rank_tol: DEFAULT_RANK_TOL,
            search: SearchOptions::default(),
        }
    }
}

/// Centered training data shared by every component step: centered curves,
/// centered responses and the original covariance kernel.
#[derive(Clone, Debug)]
pub struct CenteredSample {
    ds: FunctionalDataset,
    y: Vec<f64>,
    kernel: CovKernel,
    x_mean: Curve,
    y_mean: f64,
}

impl CenteredSample {
    pub fn new(ds: &FunctionalDataset) -> Result<Self> {
        let y_raw = ds
            .responses()
            .ok_or_else(|| FcrError::InvalidArgument("dataset has no responses".into()))?;
        if ds.n() < 3 {
            return Err(FcrError::InvalidArgument(format!(
                "need at least 3 observations, got {}",
                ds.n()
            )));
        }
        debug_assert_eq!(y_raw.len(), ds.n());
        let (centered, x_mean, y_mean) = ds.center()?;
        let y = centered.responses().expect("responses preserved").to_vec();
        let kernel = centered.empirical_cov()?;
        Ok(CenteredSample {
            ds: centered,
            y,
            kernel,
            x_mean,
            y_mean: y_mean.expect("responses present"),
        })
    }

    pub fn ds(&self) -> &FunctionalDataset {
        &self.ds
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn kernel(&self) -> &CovKernel {
        &self.kernel
    }

    pub fn x_mean(&self) -> &Curve {
        &self.x_mean
    }

    pub fn y_mean(&self) -> f64 {
        self.y_mean
    }
}

/// Deflated curves, residual responses and the spectral quantities of the
/// deflated covariance at one component step.
#[derive(Clone, Debug)]
pub struct ComponentState {
    deflated: FunctionalDataset,
    residuals: Vec<f64>,
    eig: EigenSystem,
    /// a_j = ĉov(Ŷ, ∫X̂ φ̂_j)
    cross_cov: Vec<f64>,
    /// b_j = v̂ar(∫X̂ φ̂_j)
    score_var: Vec<f64>,
    /// v̂ar(Y − Ȳ) of the undeflated responses, kept for stop detection.
    base_response_var: f64,
    /// Orthonormalized constraint directions spanning {V̂_X(ŵ_j)} for the
    /// components removed so far; deflated rows are orthogonal to them.
    constraint_dirs: Vec<Curve>,
}

impl ComponentState {
    fn from_deflated(
        deflated: FunctionalDataset,
        residuals: Vec<f64>,
        base_response_var: f64,
        constraint_dirs: Vec<Curve>,
        opts: &FitOptions,
    ) -> Result<Self> {
        let kernel = deflated.empirical_cov()?;
        let eig = kernel.eigen(opts.rank_tol)?;
        let r = eig.rank();
        let mut cross_cov = Vec::with_capacity(r);
        let mut score_var = Vec::with_capacity(r);
        for j in 0..r {
            let s = deflated.scores(&eig.eigenfunctions()[j])?;
            cross_cov.push(cov_n(&residuals, &s));
            score_var.push(var_n(&s));
        }
        Ok(ComponentState {
            deflated,
            residuals,
            eig,
            cross_cov,
            score_var,
            base_response_var,
            constraint_dirs,
        })
    }

    fn initial(sample: &CenteredSample, opts: &FitOptions) -> Result<Self> {
        ComponentState::from_deflated(
            sample.ds.clone(),
            sample.y.clone(),
            var_n(&sample.y),
            Vec::new(),
            opts,
        )
    }

    pub fn deflated(&self) -> &FunctionalDataset {
        &self.deflated
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn eig(&self) -> &EigenSystem {
        &self.eig
    }

    pub fn cross_cov(&self) -> &[f64] {
        &self.cross_cov
    }

    pub fn score_var(&self) -> &[f64] {
        &self.score_var
    }

    /// Scale against which cross-covariances are judged negligible
    /// (Cauchy–Schwarz bound `sqrt(λ̂_1 · v̂ar(Ŷ))`).
    fn signal_scale(&self) -> f64 {
        (self.eig.eigenvalues()[0] * var_n(&self.residuals)).sqrt()
    }

    fn check_signal(&self) -> Result<()> {
        let res_var = var_n(&self.residuals);
        if res_var <= RESIDUAL_VAR_RTOL * self.base_response_var {
            return Err(FcrError::NoSignal);
        }
        let max_a = self.cross_cov.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        if max_a <= NO_SIGNAL_RTOL * self.signal_scale() {
            return Err(FcrError::NoSignal);
        }
        Ok(())
    }

    fn leading_cross_cov_vanishes(&self) -> bool {
        self.cross_cov[0].abs() <= NO_SIGNAL_RTOL * self.signal_scale()
    }

    /// Substitute the projection of the deflated curves onto the orthogonal
    /// complement of the leading eigenfunction (the fallback when the
    /// residual response is exactly orthogonal to the top eigenspace).
    fn project_out_leading(&self) -> Result<Self> {
        if self.eig.rank() < 2 {
            return Err(FcrError::NoSignal);
        }
        let phi1 = &self.eig.eigenfunctions()[0];
        let s1 = self.deflated.scores(phi1)?;
        let grid = self.deflated.grid().clone();
        let mut mat = self.deflated.curves().clone();
        let m = grid.len();
        for j in 0..m {
            let pv = phi1.values()[j];
            for i in 0..mat.nrows() {
                mat[(i, j)] -= s1[i] * pv;
            }
        }
        let projected = FunctionalDataset::new(grid, mat, None)?;
        // Eigenpairs of the projected data are the remaining ones; recompute
        // cross-covariances against them rather than re-decomposing.
        let eig = self.eig.without_leading();
        let mut cross_cov = Vec::with_capacity(eig.rank());
        let mut score_var = Vec::with_capacity(eig.rank());
        for j in 0..eig.rank() {
            let s = projected.scores(&eig.eigenfunctions()[j])?;
            cross_cov.push(cov_n(&self.residuals, &s));
            score_var.push(var_n(&s));
        }
        Ok(ComponentState {
            deflated: projected,
            residuals: self.residuals.clone(),
            eig,
            cross_cov,
            score_var,
            base_response_var: self.base_response_var,
            constraint_dirs: self.constraint_dirs.clone(),
        })
    }
}

/// One fitted continuum component.
#[derive(Clone, Debug)]
pub struct ComponentFit {
    /// Unit-quadrature-norm weight function ŵ.
    pub weight: Curve,
    /// Ridge parameter that produced the weight.
    pub delta: DeltaValue,
    /// Least-squares coefficient of the response on the component score,
    /// `ĉov(Y, ∫(X−X̄)ŵ) / v̂ar(∫(X−X̄)ŵ)`; flipped-sign convention keeps it
    /// nonnegative.
    pub coef: f64,
    /// `v̂ar^{1/2}(∫(X−X̄)ŵ)` over the training sample.
    pub score_sd: f64,
    /// Value of the deflated objective T̂* at the fitted weight.
    pub objective: f64,
}

/// A fitted functional continuum regression model.
#[derive(Clone, Debug)]
pub struct FCRModel {
    alpha: f64,
    components: Vec<ComponentFit>,
    beta_hat: Curve,
    x_mean: Curve,
    y_mean: f64,
    grid: Grid,
    truncated: bool,
}

impl FCRModel {
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        alpha: f64,
        components: Vec<ComponentFit>,
        beta_hat: Curve,
        x_mean: Curve,
        y_mean: f64,
        grid: Grid,
        truncated: bool,
    ) -> Result<Self> {
        let m = grid.len();
        if beta_hat.len() != m || x_mean.len() != m {
            return Err(FcrError::DimensionMismatch {
                expected: m,
                found: beta_hat.len().min(x_mean.len()),
            });
        }
        for c in &components {
            if c.weight.len() != m {
                return Err(FcrError::DimensionMismatch {
                    expected: m,
                    found: c.weight.len(),
                });
            }
        }
        Ok(FCRModel {
            alpha,
            components,
            beta_hat,
            x_mean,
            y_mean,
            grid,
            truncated,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn p(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[ComponentFit] {
        &self.components
    }

    pub fn beta_hat(&self) -> &Curve {
        &self.beta_hat
    }

    pub fn x_mean(&self) -> &Curve {
        &self.x_mean
    }

    pub fn y_mean(&self) -> f64 {
        self.y_mean
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn truncated(&self) -> bool {
        self.truncated
    }

    /// `η̂(x) = Ȳ + ⟨β̂, x − X̄⟩`.
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

/// Center a dataset and build the first component state.
pub fn init_state(ds: &FunctionalDataset, opts: &FitOptions) -> Result<ComponentState> {
    let sample = CenteredSample::new(ds)?;
    ComponentState::initial(&sample, opts)
}

fn check_alpha(alpha: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(FcrError::InvalidArgument(format!(
            "alpha must lie in [0, 1), got {alpha}"
        )));
    }
    Ok(alpha / (1.0 - alpha))
}

fn check_delta_domain(delta: f64) -> Result<()> {
    let admissible = delta.is_finite() && ((-1.0 < delta && delta < 0.0) || delta > 0.0);
    if !admissible {
        return Err(FcrError::InvalidArgument(format!(
            "delta must lie in (-1, 0) ∪ (0, ∞), got {delta}"
        )));
    }
    Ok(())
}

/// `ln Q(δ)`: the log of the deflated objective along the ridge family.
///
/// With `d_j = λ̂_j + λ̂_1/δ`, `S₁ = Σ a_j²/d_j`, `S₂ = Σ a_j²/d_j²`,
/// `S₃ = Σ a_j² b_j/d_j²`,
/// `ln Q = 2 ln|S₁| − (α/(1−α)) ln S₂ + (α/(1−α) − 1) ln S₃`,
/// which equals `ln T̂*(w(δ))` for the normalized ridge weight `w(δ)`.
pub fn log_q(state: &ComponentState, alpha: f64, delta: f64) -> Result<f64> {
    let exponent = check_alpha(alpha)?;
    check_delta_domain(delta)?;
    state.check_signal()?;
    let lam = state.eig.eigenvalues();
    let shift = lam[0] / delta;
    if !shift.is_finite() {
        return Err(FcrError::InvalidArgument(format!(
            "delta = {delta} is too close to zero"
        )));
    }
    let (mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0);
    for j in 0..lam.len() {
        let d = lam[j] + shift;
        if d == 0.0 {
            return Err(FcrError::PoleAtDelta(delta));
        }
        let a2 = state.cross_cov[j] * state.cross_cov[j];
        s1 += a2 / d;
        s2 += a2 / (d * d);
        s3 += a2 * state.score_var[j] / (d * d);
    }
    if s1 == 0.0 || s2 <= 0.0 || s3 <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(2.0 * s1.abs().ln() - exponent * s2.ln() + (exponent - 1.0) * s3.ln())
}

/// Eigen-coordinates of the (unnormalized) ridge weight at `delta`.
fn ridge_coefficients(state: &ComponentState, delta: DeltaValue) -> Result<Vec<f64>> {
    let lam = state.eig.eigenvalues();
    let a = &state.cross_cov;
    match delta {
        DeltaValue::Interior(d) => {
            check_delta_domain(d)?;
            let shift = lam[0] / d;
            if !shift.is_finite() {
                return Err(FcrError::InvalidArgument(format!(
                    "delta = {d} is too close to zero"
                )));
            }
            let mut c = Vec::with_capacity(lam.len());
            for j in 0..lam.len() {
                let dj = lam[j] + shift;
                if dj == 0.0 {
                    return Err(FcrError::PoleAtDelta(d));
                }
                c.push(a[j] / dj);
            }
            Ok(c)
        }
        DeltaValue::ToZero => Ok(a.clone()),
        DeltaValue::ToInfinity => Ok((0..lam.len()).map(|j| a[j] / lam[j]).collect()),
        DeltaValue::ToMinusOne => {
            if state.leading_cross_cov_vanishes() {
                return Err(FcrError::OrthogonalityViolation);
            }
            let mut c = vec![0.0; lam.len()];
            c[0] = 1.0;
            Ok(c)
        }
    }
}

/// Assemble and normalize the ridge weight for a given δ or limit tag.
pub fn weight_from_delta(state: &ComponentState, delta: DeltaValue) -> Result<Curve> {
    state.check_signal()?;
    let coeffs = ridge_coefficients(state, delta)?;
    let grid = state.deflated.grid();
    let mut w = Curve::zeros(grid.len());
    for (j, c) in coeffs.iter().enumerate() {
        if *c != 0.0 {
            w.axpy(*c, &state.eig.eigenfunctions()[j]);
        }
    }
    let nrm = grid.norm(&w)?;
    if !(nrm > 0.0) {
        return Err(FcrError::NoSignal);
    }
    w.scale(1.0 / nrm);
    Ok(w)
}

/// `ln T̂*` of a weight given by its eigen-coordinates (normalized here).
fn ln_t_star_coeffs(state: &ComponentState, exponent: f64, coeffs: &[f64]) -> f64 {
    let norm2: f64 = coeffs.iter().map(|c| c * c).sum();
    if !(norm2 > 0.0) || !norm2.is_finite() {
        return f64::NEG_INFINITY;
    }
    let mut cov = 0.0;
    let mut var = 0.0;
    for (j, c) in coeffs.iter().enumerate() {
        cov += state.cross_cov[j] * c;
        var += state.score_var[j] * c * c;
    }
    cov /= norm2.sqrt();
    var /= norm2;
    if cov == 0.0 || !(var > 0.0) {
        return f64::NEG_INFINITY;
    }
    2.0 * cov.abs().ln() + (exponent - 1.0) * var.ln()
}

/// Golden-section maximization of `f` on `[lo, hi]`.
fn golden_max(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if hi - lo < 1e-13 * (1.0 + lo.abs() + hi.abs()) {
            break;
        }
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Scan-then-refine maximization of `value` over `[lo, hi]`; returns the
/// best parameter and value, or `None` when no point evaluates finitely.
fn scan_refine(
    value: &mut impl FnMut(f64) -> f64,
    lo: f64,
    hi: f64,
    scan_points: usize,
    refine_iters: usize,
) -> Option<(f64, f64)> {
    let n = scan_points.max(3);
    let step = (hi - lo) / (n - 1) as f64;
    let mut best: Option<(usize, f64, f64)> = None;
    for k in 0..n {
        let x = lo + k as f64 * step;
        let v = value(x);
        if v.is_finite() && best.map_or(true, |(_, _, bv)| v > bv) {
            best = Some((k, x, v));
        }
    }
    let (k, x0, v0) = best?;
    let blo = if k == 0 {
        lo
    } else {
        lo + (k - 1) as f64 * step
    };
    let bhi = if k == n - 1 {
        hi
    } else {
        lo + (k + 1) as f64 * step
    };
    let (x, v) = golden_max(value, blo, bhi, refine_iters);
    if v.is_finite() && v > v0 {
        Some((x, v))
    } else {
        Some((x0, v0))
    }
}

/// Maximize `ln Q` over `(−1, 0) ∪ (0, ∞)` and the three boundary limits;
/// returns the winning ridge parameter and the objective value `T̂*`.
pub fn maximize_delta(
    state: &ComponentState,
    alpha: f64,
    search: &SearchOptions,
) -> Result<(DeltaValue, f64)> {
    let exponent = check_alpha(alpha)?;
    state.check_signal()?;

    let mut candidates: Vec<(DeltaValue, f64)> = Vec::with_capacity(5);
    // Boundary limits first: on exact ties the identified special case wins.
    for tag in [
        DeltaValue::ToMinusOne,
        DeltaValue::ToZero,
        DeltaValue::ToInfinity,
    ] {
        if let Ok(coeffs) = ridge_coefficients(state, tag) {
            let v = ln_t_star_coeffs(state, exponent, &coeffs);
            if v.is_finite() {
                candidates.push((tag, v));
            }
        }
    }

    let eps = search.boundary_eps;
    let mut eval_delta = |d: f64| log_q(state, alpha, d).unwrap_or(f64::NEG_INFINITY);
    if let Some((d, v)) = scan_refine(
        &mut eval_delta,
        -1.0 + eps,
        -eps,
        search.scan_points,
        search.refine_iters,
    ) {
        // Re-evaluate through the weight coordinates so every candidate is
        // compared on the identical scale.
        if let Ok(coeffs) = ridge_coefficients(state, DeltaValue::Interior(d)) {
            let vv = ln_t_star_coeffs(state, exponent, &coeffs);
            let v = if vv.is_finite() { vv } else { v };
            candidates.push((DeltaValue::Interior(d), v));
        }
    }
    let mut eval_log = |u: f64| log_q(state, alpha, u.exp()).unwrap_or(f64::NEG_INFINITY);
    if let Some((u, v)) = scan_refine(
        &mut eval_log,
        eps.ln(),
        search.delta_max.ln(),
        search.scan_points,
        search.refine_iters,
    ) {
        let d = u.exp();
        if let Ok(coeffs) = ridge_coefficients(state, DeltaValue::Interior(d)) {
            let vv = ln_t_star_coeffs(state, exponent, &coeffs);
            let v = if vv.is_finite() { vv } else { v };
            candidates.push((DeltaValue::Interior(d), v));
        }
    }

    // Limits precede interior candidates; an interior point must clear a
    // small log margin to displace an identified boundary solution, so
    // floating-point ties resolve to the exact limit direction.
    let mut best: Option<(DeltaValue, f64)> = None;
    for (delta, v) in candidates {
        if !v.is_finite() {
            continue;
        }
        let wins = match best {
            None => true,
            Some((_, bv)) => v > bv + 1e-10 * (1.0 + bv.abs()),
        };
        if wins {
            best = Some((delta, v));
        }
    }
    match best {
        Some((delta, ln_obj)) => Ok((delta, ln_obj.exp())),
        None => Err(FcrError::NoSignal),
    }
}

/// Fit one continuum component on the current state. The coefficient and
/// score scale are computed against the original centered sample.
pub fn fit_component(
    state: &ComponentState,
    sample: &CenteredSample,
    alpha: f64,
    opts: &FitOptions,
) -> Result<ComponentFit> {
    state.check_signal()?;
    // Ridge-form hypothesis: the residual response must load on the leading
    // eigenspace. If it is exactly orthogonal, substitute the projection
    // onto the complement and retry once.
    let projected;
    let working = if state.leading_cross_cov_vanishes() {
        projected = state.project_out_leading()?;
        projected.check_signal()?;
        if projected.leading_cross_cov_vanishes() {
            return Err(FcrError::NoSignal);
        }
        &projected
    } else {
        state
    };

    let (delta, objective) = maximize_delta(working, alpha, &opts.search)?;
    let mut weight = weight_from_delta(working, delta)?;

    let scores = sample.ds.scores(&weight)?;
    let score_variance = var_n(&scores);
    if !(score_variance > 0.0) {
        return Err(FcrError::UndefinedObjective);
    }
    let mut c1 = cov_n(&sample.y, &scores);
    if c1 < 0.0 {
        weight.scale(-1.0);
        c1 = -c1;
    }
    Ok(ComponentFit {
        weight,
        delta,
        coef: c1 / score_variance,
        score_sd: score_variance.sqrt(),
        objective,
    })
}

/// Remove a fitted component.
///
/// The fitted values `coef · ∫X̂ŵ` leave the residual responses; the curves
/// are projected onto the quadrature-orthocomplement of `V̂_X(ŵ)` (after
/// Gram-Schmidt against the directions already removed), so every weight
/// the next step can produce satisfies `∫w V̂_X(ŵ_j) = 0` exactly.
pub fn deflate(
    state: &ComponentState,
    fit: &ComponentFit,
    sample: &CenteredSample,
    opts: &FitOptions,
) -> Result<ComponentState> {
    if !(fit.score_sd > 0.0) {
        return Err(FcrError::UndefinedObjective);
    }
    let grid = state.deflated.grid().clone();
    let t = state.deflated.scores(&fit.weight)?;
    let residuals: Vec<f64> = state
        .residuals
        .iter()
        .zip(&t)
        .map(|(r, ti)| r - fit.coef * ti)
        .collect();

    let vkw = sample.kernel.apply(&fit.weight)?;
    let mut direction = vkw.clone();
    for d in &state.constraint_dirs {
        let overlap = grid.inner_product(&direction, d)?;
        direction.axpy(-overlap, d);
    }
    let residual_norm = grid.norm(&direction)?;
    let mut constraint_dirs = state.constraint_dirs.clone();
    let mut mat = state.deflated.curves().clone();
    // A vanished direction is already spanned by earlier constraints; the
    // rows are orthogonal to it and no projection is needed.
    if residual_norm > 1e-12 * grid.norm(&vkw)?.max(1e-300) {
        direction.scale(1.0 / residual_norm);
        let ds_now = FunctionalDataset::new(grid.clone(), mat.clone(), None)?;
        let overlaps = ds_now.scores(&direction)?;
        let m = grid.len();
        for j in 0..m {
            let dj = direction.values()[j];
            if dj == 0.0 {
                continue;
            }
            for i in 0..mat.nrows() {
                mat[(i, j)] -= overlaps[i] * dj;
            }
        }
        constraint_dirs.push(direction);
    }
    let deflated = FunctionalDataset::new(grid, mat, None)?;
    ComponentState::from_deflated(
        deflated,
        residuals,
        state.base_response_var,
        constraint_dirs,
        opts,
    )
}

/// Fit a continuum model with `p` components at a fixed `α`.
///
/// If the residual signal is exhausted at step `k ≤ p`, the model is
/// returned with `k − 1` components and the truncation flag set.
pub fn fit(ds: &FunctionalDataset, alpha: f64, p: usize, opts: &FitOptions) -> Result<FCRModel> {
    check_alpha(alpha)?;
    if p < 1 {
        return Err(FcrError::InvalidArgument("p must be at least 1".into()));
    }
    let sample = CenteredSample::new(ds)?;
    let mut state = ComponentState::initial(&sample, opts)?;
    let mut components = Vec::with_capacity(p);
    let mut beta_hat = Curve::zeros(sample.ds.grid().len());
    let mut truncated = false;
    for k in 0..p {
        match fit_component(&state, &sample, alpha, opts) {
            Ok(component) => {
                beta_hat.axpy(component.coef, &component.weight);
                components.push(component);
                if k + 1 < p {
                    match deflate(&state, components.last().unwrap(), &sample, opts) {
                        Ok(next) => state = next,
                        Err(FcrError::DegenerateCovariance) | Err(FcrError::NoSignal) => {
                            truncated = true;
                            break;
                        }
                        Err(e) => return Err(e),
                    }
                }
            }
            Err(FcrError::NoSignal) => {
                truncated = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    FCRModel::from_parts(
        alpha,
        components,
        beta_hat,
        sample.x_mean.clone(),
        sample.y_mean,
        ds.grid().clone(),
        truncated,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fgrid::Grid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    /// Random low-rank functional sample with responses.
    pub(crate) fn synth_dataset(
        n: usize,
        m: usize,
        rank: usize,
        noise: f64,
        seed: u64,
    ) -> FunctionalDataset {
        let grid = Grid::uniform(0.0, 1.0, m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let span: Vec<Vec<f64>> = (0..rank)
            .map(|k| {
                grid.points()
                    .iter()
                    .map(|t| ((k + 1) as f64 * std::f64::consts::PI * t).sin() + 0.3 * (k as f64))
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
                let scale = 1.0 / (k + 1) as f64;
                for (r, b) in row.iter_mut().zip(basis) {
                    *r += scale * xi * b;
                }
                y += scale * xi * (1.0 - 0.4 * k as f64);
            }
            let eps: f64 = StandardNormal.sample(&mut rng);
            ys.push(y + noise * eps);
            rows.push(row);
        }
        FunctionalDataset::from_rows(grid, &rows, Some(ys)).unwrap()
    }

    fn state_of(ds: &FunctionalDataset) -> (CenteredSample, ComponentState) {
        let opts = FitOptions::default();
        let sample = CenteredSample::new(ds).unwrap();
        let state = ComponentState::initial(&sample, &opts).unwrap();
        (sample, state)
    }

    #[test]
    fn init_state_centers_and_matches_eigen_scale() {
        let ds = synth_dataset(12, 25, 3, 0.1, 1);
        let (_, state) = state_of(&ds);
        // Rows mean-zero, residuals mean-zero.
        let n = state.deflated().n();
        for j in 0..25 {
            let s: f64 = (0..n).map(|i| state.deflated().curves()[(i, j)]).sum();
            assert!(s.abs() < 1e-10);
        }
        let rbar: f64 = state.residuals().iter().sum::<f64>() / n as f64;
        assert!(rbar.abs() < 1e-12);
        // b_j = λ̂_j.
        for j in 0..state.eig().rank() {
            let lam = state.eig().eigenvalues()[j];
            assert!(
                (state.score_var()[j] - lam).abs() < 1e-8 * lam,
                "b_{j} = {} vs λ_{j} = {lam}",
                state.score_var()[j]
            );
        }
    }

    #[test]
    fn init_state_constant_response_has_no_cross_cov() {
        let ds = synth_dataset(10, 15, 2, 0.0, 2);
        let constant = ds.with_responses(vec![4.2; 10]).unwrap();
        let (_, state) = state_of(&constant);
        assert!(state.cross_cov().iter().all(|a| a.abs() < 1e-14));
        let sample = CenteredSample::new(&constant).unwrap();
        assert!(matches!(
            fit_component(&state, &sample, 0.5, &FitOptions::default()),
            Err(FcrError::NoSignal)
        ));
    }

    #[test]
    fn init_state_first_eigen_score_response() {
        let ds = synth_dataset(15, 20, 3, 0.0, 3);
        let (_, base) = state_of(&ds);
        let phi1 = base.eig().eigenfunctions()[0].clone();
        let (c, _, _) = ds.center().unwrap();
        let y = c.scores(&phi1).unwrap();
        let ds2 = ds.with_responses(y).unwrap();
        let (_, state) = state_of(&ds2);
        let lam1 = state.eig().eigenvalues()[0];
        assert!((state.cross_cov()[0] - lam1).abs() < 1e-8 * lam1);
        for j in 1..state.eig().rank() {
            assert!(state.cross_cov()[j].abs() < 1e-8 * lam1);
        }
    }

    #[test]
    fn log_q_hand_computed_rank_one() {
        // r=1, a=1, b=λ=1, α=0, δ=1: S₁ = 1/2, S₂ = S₃ = 1/4, ln Q = 0.
        let grid = Grid::uniform(0.0, 1.0, 4).unwrap();
        let phi = {
            let raw = Curve::new(vec![1.0; 4]);
            let nrm = grid.norm(&raw).unwrap();
            let mut u = raw;
            u.scale(1.0 / nrm);
            u
        };
        let deflated =
            FunctionalDataset::new(grid.clone(), nalgebra::DMatrix::zeros(3, 4), None).unwrap();
        let state = ComponentState {
            deflated,
            residuals: vec![1.0, -1.0, 0.0],
            eig: EigenSystem::new(vec![1.0], vec![phi]),
            cross_cov: vec![1.0],
            score_var: vec![1.0],
            base_response_var: 1.0,
            constraint_dirs: Vec::new(),
        };
        let v = log_q(&state, 0.0, 1.0).unwrap();
        assert!(v.abs() < 1e-14, "ln Q = {v}");
    }

    #[test]
    fn log_q_matches_t_star_identity() {
        let ds = synth_dataset(14, 18, 4, 0.3, 5);
        let (_, state) = state_of(&ds);
        for &alpha in &[0.0, 0.25, 0.5, 0.75, 0.9] {
            for &delta in &[-0.9, -0.5, -0.1, 0.05, 1.0, 20.0, 5e4] {
                let lq = log_q(&state, alpha, delta).unwrap();
                let w = weight_from_delta(&state, DeltaValue::Interior(delta)).unwrap();
                let t = crate::oracle::t_star(&state, alpha, &w).unwrap();
                let rel = (lq.exp() - t).abs() / t.abs().max(1e-300);
                assert!(rel < 1e-10, "α={alpha} δ={delta}: relative gap {rel}");
            }
        }
    }

    #[test]
    fn weight_limits_match_closed_forms() {
        let ds = synth_dataset(16, 22, 3, 0.2, 8);
        let (_, state) = state_of(&ds);
        let grid = state.deflated().grid().clone();

        let to_zero = weight_from_delta(&state, DeltaValue::ToZero).unwrap();
        let mut pls = Curve::zeros(grid.len());
        for j in 0..state.eig().rank() {
            pls.axpy(state.cross_cov()[j], &state.eig().eigenfunctions()[j]);
        }
        pls.scale(1.0 / grid.norm(&pls).unwrap());
        assert!(grid.cosine(&to_zero, &pls).unwrap().abs() > 1.0 - 1e-12);

        let to_inf = weight_from_delta(&state, DeltaValue::ToInfinity).unwrap();
        let mut ols = Curve::zeros(grid.len());
        for j in 0..state.eig().rank() {
            ols.axpy(
                state.cross_cov()[j] / state.eig().eigenvalues()[j],
                &state.eig().eigenfunctions()[j],
            );
        }
        ols.scale(1.0 / grid.norm(&ols).unwrap());
        assert!(grid.cosine(&to_inf, &ols).unwrap().abs() > 1.0 - 1e-12);

        let to_pcr = weight_from_delta(&state, DeltaValue::ToMinusOne).unwrap();
        assert!(
            grid.cosine(&to_pcr, &state.eig().eigenfunctions()[0])
                .unwrap()
                .abs()
                > 1.0 - 1e-12
        );
        assert!((grid.norm(&to_zero).unwrap() - 1.0).abs() < 1e-10);
        assert!((grid.norm(&to_inf).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn weight_to_minus_one_requires_leading_signal() {
        let ds = synth_dataset(15, 20, 3, 0.0, 3);
        let (_, base) = state_of(&ds);
        let phi2 = base.eig().eigenfunctions()[1].clone();
        let (c, _, _) = ds.center().unwrap();
        let y = c.scores(&phi2).unwrap();
        let ds2 = ds.with_responses(y).unwrap();
        let (_, state) = state_of(&ds2);
        assert!(matches!(
            weight_from_delta(&state, DeltaValue::ToMinusOne),
            Err(FcrError::OrthogonalityViolation)
        ));
    }

    #[test]
    fn maximize_delta_alpha_half_selects_pls_direction() {
        for seed in [11, 12, 13] {
            let ds = synth_dataset(20, 24, 4, 0.4, seed);
            let (_, state) = state_of(&ds);
            let (delta, _) = maximize_delta(&state, 0.5, &SearchOptions::default()).unwrap();
            let chosen = weight_from_delta(&state, delta).unwrap();
            let pls = weight_from_delta(&state, DeltaValue::ToZero).unwrap();
            let cos = state.deflated().grid().cosine(&chosen, &pls).unwrap().abs();
            assert!(cos >= 1.0 - 1e-8, "seed {seed}: cos = {cos}");
        }
    }

    #[test]
    fn maximize_delta_alpha_near_one_selects_leading_eigenfunction() {
        let ds = synth_dataset(20, 24, 4, 0.4, 21);
        let (_, state) = state_of(&ds);
        let (delta, _) = maximize_delta(&state, 0.999, &SearchOptions::default()).unwrap();
        let chosen = weight_from_delta(&state, delta).unwrap();
        let cos = state
            .deflated()
            .grid()
            .cosine(&chosen, &state.eig().eigenfunctions()[0])
            .unwrap()
            .abs();
        assert!(cos >= 0.99, "cos = {cos}");
    }

    #[test]
    fn fit_component_recovers_exact_eigen_signal() {
        let ds = synth_dataset(15, 20, 3, 0.0, 6);
        let (_, base) = state_of(&ds);
        let phi1 = base.eig().eigenfunctions()[0].clone();
        let (c, _, _) = ds.center().unwrap();
        let y = c.scores(&phi1).unwrap();
        let ds2 = ds.with_responses(y).unwrap();
        let (sample, state) = state_of(&ds2);
        for &alpha in &[0.0, 0.3, 0.7] {
            let fit = fit_component(&state, &sample, alpha, &FitOptions::default()).unwrap();
            let cos = state
                .deflated()
                .grid()
                .cosine(&fit.weight, &phi1)
                .unwrap()
                .abs();
            assert!(cos > 1.0 - 1e-6, "α={alpha}: cos = {cos}");
        }
    }

    #[test]
    fn fit_component_projects_out_orthogonal_leading_space() {
        // Response exactly the second eigen-score: leading cross-cov is 0,
        // the projection fallback must land on φ̂₂ for any α.
        let ds = synth_dataset(15, 20, 3, 0.0, 3);
        let (_, base) = state_of(&ds);
        let phi2 = base.eig().eigenfunctions()[1].clone();
        let (c, _, _) = ds.center().unwrap();
        let y = c.scores(&phi2).unwrap();
        let ds2 = ds.with_responses(y).unwrap();
        let (sample, state) = state_of(&ds2);
        for &alpha in &[0.1, 0.5, 0.9] {
            let fit = fit_component(&state, &sample, alpha, &FitOptions::default()).unwrap();
            let cos = state
                .deflated()
                .grid()
                .cosine(&fit.weight, &phi2)
                .unwrap()
                .abs();
            assert!(cos > 1.0 - 1e-6, "α={alpha}: cos = {cos}");
        }
    }

    #[test]
    fn deflate_removes_component_covariance_and_is_idempotent() {
        let ds = synth_dataset(18, 25, 4, 0.3, 9);
        let (sample, state) = state_of(&ds);
        let fit = fit_component(&state, &sample, 0.4, &FitOptions::default()).unwrap();
        let next = deflate(&state, &fit, &sample, &FitOptions::default()).unwrap();
        let lam1 = state.eig().eigenvalues()[0];

        // Covariance of ⟨X̂^{(p+1)}, V̂_X(ŵ)⟩ with the original scores is 0.
        let vkw = sample.kernel().apply(&fit.weight).unwrap();
        let a = next.deflated().scores(&vkw).unwrap();
        let s = sample.ds().scores(&fit.weight).unwrap();
        let c = crate::stats::cov_n(&a, &s);
        assert!(c.abs() < 1e-8 * lam1, "cov = {c}");

        // Second pass with the same fit is a no-op on curves.
        let again = deflate(&next, &fit, &sample, &FitOptions::default()).unwrap();
        let mut max_change = 0.0f64;
        for (x, y) in next
            .deflated()
            .curves()
            .iter()
            .zip(again.deflated().curves().iter())
        {
            max_change = max_change.max((x - y).abs());
        }
        assert!(max_change < 1e-8, "max change {max_change}");

        // Residual update equals the from-scratch recomputation.
        let model = super::fit(&ds, 0.4, 1, &FitOptions::default()).unwrap();
        let preds = model.predict(&ds).unwrap();
        let y = ds.responses().unwrap();
        for i in 0..ds.n() {
            let direct = y[i] - preds[i];
            assert!(
                (next.residuals()[i] - direct).abs() < 1e-10,
                "residual {i}: {} vs {direct}",
                next.residuals()[i]
            );
        }
    }

    #[test]
    fn fit_exact_first_eigen_score_gives_zero_residuals() {
        let ds = synth_dataset(15, 20, 3, 0.0, 6);
        let (_, base) = state_of(&ds);
        let phi1 = base.eig().eigenfunctions()[0].clone();
        let (c, _, _) = ds.center().unwrap();
        let y = c.scores(&phi1).unwrap();
        let ds2 = ds.with_responses(y.clone()).unwrap();
        let model = fit(&ds2, 0.5, 1, &FitOptions::default()).unwrap();
        let preds = model.predict(&ds2).unwrap();
        for i in 0..ds2.n() {
            assert!((preds[i] - ds2.responses().unwrap()[i]).abs() < 1e-8);
        }
        // β̂ ∝ φ̂₁.
        let cos = ds2.grid().cosine(model.beta_hat(), &phi1).unwrap().abs();
        assert!(cos > 1.0 - 1e-8);
    }

    #[test]
    fn fit_truncates_when_signal_is_exhausted() {
        let ds = synth_dataset(15, 20, 3, 0.0, 6);
        let (_, base) = state_of(&ds);
        let phi1 = base.eig().eigenfunctions()[0].clone();
        let (c, _, _) = ds.center().unwrap();
        let y = c.scores(&phi1).unwrap();
        let ds2 = ds.with_responses(y).unwrap();
        let model = fit(&ds2, 0.5, 3, &FitOptions::default()).unwrap();
        assert_eq!(model.p(), 1);
        assert!(model.truncated());
    }

    #[test]
    fn fit_at_alpha_zero_stops_after_one_component() {
        let ds = synth_dataset(20, 24, 4, 0.5, 30);
        let model = fit(&ds, 0.0, 3, &FitOptions::default()).unwrap();
        assert_eq!(model.p(), 1, "least-squares step consumes all signal");
        assert!(model.truncated());
    }

    #[test]
    fn fit_invariants_unit_norm_orthogonality_monotone_rss() {
        for seed in [41, 42, 43] {
            let ds = synth_dataset(25, 30, 5, 0.5, seed);
            let (sample, state0) = state_of(&ds);
            let lam1 = state0.eig().eigenvalues()[0];
            for &alpha in &[0.1, 0.5, 0.9] {
                let model = fit(&ds, alpha, 3, &FitOptions::default()).unwrap();
                assert_eq!(model.p(), 3);
                let grid = ds.grid();
                // Unit quadrature norm.
                for c in model.components() {
                    assert!((grid.norm(&c.weight).unwrap() - 1.0).abs() < 1e-8);
                }
                // V̂-orthogonality and score uncorrelatedness.
                for j in 0..model.p() {
                    let vkw = sample
                        .kernel()
                        .apply(&model.components()[j].weight)
                        .unwrap();
                    let sj = sample.ds().scores(&model.components()[j].weight).unwrap();
                    for k in (j + 1)..model.p() {
                        let wk = &model.components()[k].weight;
                        let ip = grid.inner_product(wk, &vkw).unwrap();
                        assert!(
                            ip.abs() < 1e-6 * lam1,
                            "seed {seed} α={alpha}: ⟨w{k}, V̂w{j}⟩ = {ip}"
                        );
                        let sk = sample.ds().scores(wk).unwrap();
                        let c = crate::stats::cov_n(&sj, &sk);
                        assert!(c.abs() < 1e-6 * lam1);
                    }
                }
                // β̂ = Σ coef·w.
                let mut beta = Curve::zeros(grid.len());
                for c in model.components() {
                    beta.axpy(c.coef, &c.weight);
                }
                let diff = grid.norm(&beta.minus(model.beta_hat())).unwrap();
                assert!(diff < 1e-8);
                // Monotone in-sample RSS over p.
                let y = ds.responses().unwrap();
                let mut prev = f64::INFINITY;
                for p in 1..=3 {
                    let mp = fit(&ds, alpha, p, &FitOptions::default()).unwrap();
                    let preds = mp.predict(&ds).unwrap();
                    let rss: f64 = y
                        .iter()
                        .zip(&preds)
                        .map(|(yi, pi)| (yi - pi) * (yi - pi))
                        .sum();
                    assert!(
                        rss <= prev * (1.0 + 1e-12) + 1e-12,
                        "seed {seed} α={alpha} p={p}: RSS {rss} > {prev}"
                    );
                    prev = rss;
                }
            }
        }
    }

    #[test]
    fn predict_contract() {
        let ds = synth_dataset(12, 16, 3, 0.2, 17);
        let model = fit(&ds, 0.5, 2, &FitOptions::default()).unwrap();
        // x = X̄ → Ȳ exactly.
        let at_mean = model.predict_one(model.x_mean()).unwrap();
        assert!((at_mean - model.y_mean()).abs() < 1e-12);
        // Zero-β model returns Ȳ for any x.
        let zero = FCRModel::from_parts(
            0.5,
            Vec::new(),
            Curve::zeros(16),
            model.x_mean().clone(),
            model.y_mean(),
            ds.grid().clone(),
            true,
        )
        .unwrap();
        assert_eq!(zero.predict_one(&ds.curve(3)).unwrap(), zero.y_mean());
        // Grid mismatch is rejected.
        let other = Grid::uniform(0.0, 2.0, 16).unwrap();
        let alien = FunctionalDataset::from_rows(other, &[vec![0.0; 16]], None).unwrap();
        assert!(matches!(model.predict(&alien), Err(FcrError::GridMismatch)));
    }

    #[test]
    fn fit_rejects_bad_arguments() {
        let ds = synth_dataset(10, 12, 2, 0.1, 50);
        assert!(matches!(
            fit(&ds, 0.5, 0, &FitOptions::default()),
            Err(FcrError::InvalidArgument(_))
        ));
        assert!(matches!(
            fit(&ds, 1.0, 1, &FitOptions::default()),
            Err(FcrError::InvalidArgument(_))
        ));
        let no_y = FunctionalDataset::new(ds.grid().clone(), ds.curves().clone(), None).unwrap();
        assert!(fit(&no_y, 0.5, 1, &FitOptions::default()).is_err());
    }
}
