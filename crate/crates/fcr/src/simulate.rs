//! Karhunen–Loève data generation, SNR control, and Monte Carlo study
//! harnesses for estimation error (pointwise RMSE of the coefficient
//! function) and held-out prediction error (ReMSPE over repeated splits).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::baselines::{fpcr_fit, fpls_fit};
use crate::continuum::{fit, FitOptions};
use crate::error::{FcrError, Result};
use crate::fgrid::{Curve, FunctionalDataset, Grid};
use crate::stats::{mean, replicate_seed};
use crate::tuning::{tune, TuningGrid};

/// Curve generator: mean plus independent Gaussian scores on a fixed set of
/// orthonormal eigenfunctions, with additive response noise of standard
/// deviation `sigma`.
#[derive(Clone, Debug)]
pub struct GenerativeModel {
    grid: Grid,
    mean: Curve,
    /// (λ_j, w_j) with λ descending; eigenfunctions quadrature-orthonormal.
    eigenpairs: Vec<(f64, Curve)>,
    beta_true: Curve,
    sigma: f64,
}

/// Which coefficient function a study uses: the first or the third
/// eigenfunction of the generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    I,
    II,
}

impl GenerativeModel {
    pub fn new(
        grid: Grid,
        mean: Curve,
        eigenpairs: Vec<(f64, Curve)>,
        beta_true: Curve,
        sigma: f64,
    ) -> Result<Self> {
        let m = grid.len();
        if mean.len() != m || beta_true.len() != m {
            return Err(FcrError::DimensionMismatch {
                expected: m,
                found: mean.len().min(beta_true.len()),
            });
        }
        if eigenpairs.is_empty() {
            return Err(FcrError::InvalidArgument(
                "generative model needs at least one eigenpair".into(),
            ));
        }
        if !(sigma >= 0.0) {
            return Err(FcrError::InvalidArgument(format!(
                "sigma must be nonnegative, got {sigma}"
            )));
        }
        for window in eigenpairs.windows(2) {
            if window[0].0 < window[1].0 {
                return Err(FcrError::InvalidArgument(
                    "eigenvalues must be in descending order".into(),
                ));
            }
        }
        for (j, (lam, w)) in eigenpairs.iter().enumerate() {
            if !(*lam > 0.0) {
                return Err(FcrError::InvalidArgument(format!(
                    "eigenvalue {j} must be positive, got {lam}"
                )));
            }
            if w.len() != m {
                return Err(FcrError::DimensionMismatch {
                    expected: m,
                    found: w.len(),
                });
            }
        }
        for j in 0..eigenpairs.len() {
            for k in j..eigenpairs.len() {
                let ip = grid.inner_product(&eigenpairs[j].1, &eigenpairs[k].1)?;
                let target = if j == k { 1.0 } else { 0.0 };
                if (ip - target).abs() > 1e-8 {
                    return Err(FcrError::InvalidArgument(format!(
                        "eigenfunctions are not orthonormal: ⟨w{j}, w{k}⟩ = {ip}"
                    )));
                }
            }
        }
        Ok(GenerativeModel {
            grid,
            mean,
            eigenpairs,
            beta_true,
            sigma,
        })
    }

    /// Self-contained smooth surrogate: three sinusoidal eigenpairs on
    /// [1, 365] with eigenvalue decay 1 : 0.3 : 0.1 and a mean that projects
    /// positively on every eigenfunction.
    pub fn default_surrogate() -> Self {
        let m = 101;
        let grid = Grid::uniform(1.0, 365.0, m).expect("valid grid");
        let period = 364.0_f64;
        let amp = (2.0 / period).sqrt();
        let mode = |k: usize| -> Curve {
            Curve::new(
                grid.points()
                    .iter()
                    .map(|t| {
                        amp * (2.0 * std::f64::consts::PI * k as f64 * (t - 1.0) / period).sin()
                    })
                    .collect(),
            )
        };
        let eigenpairs = vec![(1.0, mode(1)), (0.3, mode(2)), (0.1, mode(3))];
        let mut mean = Curve::new(vec![1.0; m]);
        for (coef, (_, w)) in [0.9, 0.7, 0.5].iter().zip(&eigenpairs) {
            mean.axpy(*coef, w);
        }
        let beta_true = eigenpairs[0].1.clone();
        GenerativeModel::new(grid, mean, eigenpairs, beta_true, 0.0)
            .expect("surrogate is well formed")
    }

    /// Replace the coefficient function by the scenario's eigenfunction,
    /// oriented so the mean projects nonnegatively on it (eigenfunctions
    /// are defined up to sign; this keeps the SNR ratio well defined).
    pub fn with_scenario(mut self, scenario: Scenario) -> Result<Self> {
        let idx = match scenario {
            Scenario::I => 0,
            Scenario::II => 2,
        };
        if idx >= self.eigenpairs.len() {
            return Err(FcrError::InvalidArgument(format!(
                "scenario needs eigenpair {idx}, model has {}",
                self.eigenpairs.len()
            )));
        }
        let mut beta = self.eigenpairs[idx].1.clone();
        if self.grid.inner_product(&self.mean, &beta)? < 0.0 {
            beta.scale(-1.0);
        }
        self.beta_true = beta;
        Ok(self)
    }

    pub fn with_sigma(mut self, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) {
            return Err(FcrError::InvalidArgument(format!(
                "sigma must be nonnegative, got {sigma}"
            )));
        }
        self.sigma = sigma;
        Ok(self)
    }

    pub fn with_beta(mut self, beta: Curve) -> Result<Self> {
        if beta.len() != self.grid.len() {
            return Err(FcrError::DimensionMismatch {
                expected: self.grid.len(),
                found: beta.len(),
            });
        }
        self.beta_true = beta;
        Ok(self)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn mean(&self) -> &Curve {
        &self.mean
    }

    pub fn eigenpairs(&self) -> &[(f64, Curve)] {
        &self.eigenpairs
    }

    pub fn beta_true(&self) -> &Curve {
        &self.beta_true
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// Draw `n` curves `X_i = μ + Σ_j ξ_ij w_j`, `ξ_ij ~ N(0, λ_j)` independent;
/// deterministic for a fixed seed. Responses are left unset.
pub fn kl_sample(gm: &GenerativeModel, n: usize, seed: u64) -> Result<FunctionalDataset> {
    if n < 1 {
        return Err(FcrError::InvalidArgument("need n >= 1 curves".into()));
    }
    let m = gm.grid.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let mut row = gm.mean.values().to_vec();
        for (lam, w) in &gm.eigenpairs {
            let normal = Normal::new(0.0, lam.sqrt()).expect("positive sd");
            let xi: f64 = normal.sample(&mut rng);
            for (r, wv) in row.iter_mut().zip(w.values()) {
                *r += xi * wv;
            }
        }
        rows.push(row);
    }
    let _ = m;
    FunctionalDataset::from_rows(gm.grid.clone(), &rows, None)
}

/// Attach responses `Y_i = ⟨β, X_i⟩ + ε_i`, `ε_i ~ N(0, σ²)` with σ read as
/// a standard deviation.
pub fn make_response(
    ds: &FunctionalDataset,
    gm: &GenerativeModel,
    seed: u64,
) -> Result<FunctionalDataset> {
    if ds.grid().points() != gm.grid.points() {
        return Err(FcrError::GridMismatch);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ys = Vec::with_capacity(ds.n());
    for i in 0..ds.n() {
        let signal = ds.grid().inner_product(&ds.curve(i), &gm.beta_true)?;
        let eps = if gm.sigma > 0.0 {
            let normal = Normal::new(0.0, gm.sigma).expect("positive sd");
            normal.sample(&mut rng)
        } else {
            0.0
        };
        ys.push(signal + eps);
    }
    ds.with_responses(ys)
}

/// `σ = ⟨μ, β⟩ / snr`; the ratio definition presumes a positive numerator.
pub fn snr_to_sigma(gm: &GenerativeModel, snr: f64) -> Result<f64> {
    if !(snr > 0.0) {
        return Err(FcrError::InvalidArgument(format!(
            "snr must be positive, got {snr}"
        )));
    }
    let signal = gm.grid.inner_product(&gm.mean, &gm.beta_true)?;
    if !(signal > 0.0) {
        return Err(FcrError::InvalidSnr);
    }
    Ok(signal / snr)
}

/// Pointwise root-mean-squared error of coefficient estimates.
pub fn rmse_curve(beta_hats: &[Curve], beta_true: &Curve) -> Result<Curve> {
    if beta_hats.is_empty() {
        return Err(FcrError::InvalidArgument(
            "rmse needs at least one estimate".into(),
        ));
    }
    let m = beta_true.len();
    for b in beta_hats {
        if b.len() != m {
            return Err(FcrError::DimensionMismatch {
                expected: m,
                found: b.len(),
            });
        }
    }
    let r = beta_hats.len() as f64;
    let values = (0..m)
        .map(|t| {
            let acc: f64 = beta_hats
                .iter()
                .map(|b| {
                    let d = b.values()[t] - beta_true.values()[t];
                    d * d
                })
                .sum();
            (acc / r).sqrt()
        })
        .collect();
    Ok(Curve::new(values))
}

/// Relative mean squared prediction error against the train-mean predictor.
pub fn remspe(y_test: &[f64], y_pred: &[f64], y_train_mean: f64) -> Result<f64> {
    if y_test.len() != y_pred.len() {
        return Err(FcrError::DimensionMismatch {
            expected: y_test.len(),
            found: y_pred.len(),
        });
    }
    if y_test.is_empty() {
        return Err(FcrError::InvalidArgument("empty test set".into()));
    }
    let num: f64 = y_test
        .iter()
        .zip(y_pred)
        .map(|(y, p)| (y - p) * (y - p))
        .sum();
    let den: f64 = y_test
        .iter()
        .map(|y| (y - y_train_mean) * (y - y_train_mean))
        .sum();
    if den == 0.0 {
        return Err(FcrError::InvalidArgument(
            "ReMSPE undefined: test responses equal the training mean".into(),
        ));
    }
    Ok(num / den)
}

/// An estimator entered into a study.
#[derive(Clone, Debug)]
pub enum Method {
    /// Continuum regression tuned by GCV over (p, α).
    FcrTuned(TuningGrid),
    /// Continuum regression at fixed (α, p).
    Fcr {
        alpha: f64,
        p: usize,
    },
    Fpcr {
        p: usize,
    },
    Fpls {
        p: usize,
    },
    /// Predicts the training mean; β̂ = 0.
    MeanOnly,
}

impl Method {
    pub fn name(&self) -> String {
        match self {
            Method::FcrTuned(_) => "fcr".into(),
            Method::Fcr { alpha, p } => format!("fcr-a{alpha}-p{p}"),
            Method::Fpcr { p } => format!("fpcr{p}"),
            Method::Fpls { p } => format!("fpls{p}"),
            Method::MeanOnly => "mean".into(),
        }
    }

    fn beta_hat(&self, ds: &FunctionalDataset, opts: &FitOptions) -> Result<Curve> {
        match self {
            Method::FcrTuned(grid) => Ok(tune(ds, grid, opts)?.model.beta_hat().clone()),
            Method::Fcr { alpha, p } => Ok(fit(ds, *alpha, *p, opts)?.beta_hat().clone()),
            Method::Fpcr { p } => Ok(fpcr_fit(ds, *p)?.beta_hat),
            Method::Fpls { p } => Ok(fpls_fit(ds, *p)?.beta_hat),
            Method::MeanOnly => Ok(Curve::zeros(ds.grid().len())),
        }
    }

    fn predict_split(
        &self,
        train: &FunctionalDataset,
        test: &FunctionalDataset,
        opts: &FitOptions,
    ) -> Result<Vec<f64>> {
        match self {
            Method::FcrTuned(grid) => tune(train, grid, opts)?.model.predict(test),
            Method::Fcr { alpha, p } => fit(train, *alpha, *p, opts)?.predict(test),
            Method::Fpcr { p } => fpcr_fit(train, *p)?.predict(test),
            Method::Fpls { p } => fpls_fit(train, *p)?.predict(test),
            Method::MeanOnly => {
                let ybar = mean(train.responses().expect("responses present"));
                Ok(vec![ybar; test.n()])
            }
        }
    }
}

/// Study metadata carried into reports.
#[derive(Clone, Debug)]
pub struct StudyMeta {
    pub n: usize,
    pub replicates: usize,
    pub snr: Option<f64>,
    pub test_fraction: Option<f64>,
    pub seed: u64,
}

/// Per-method study results, aligned by replicate index.
#[derive(Clone, Debug)]
pub struct MethodReport {
    pub method: String,
    /// Fitted coefficient curves per replicate (estimation studies).
    pub beta_hats: Vec<Option<Curve>>,
    /// Integrated squared error `∫(β̂−β)²` per replicate.
    pub ise: Vec<Option<f64>>,
    /// Pointwise RMSE over successful replicates.
    pub rmse_curve: Option<Curve>,
    /// Per-split ReMSPE (prediction studies).
    pub remspe: Vec<Option<f64>>,
    pub failures: usize,
}

/// Monte Carlo study output; a pure function of (configuration, seed).
#[derive(Clone, Debug)]
pub struct StudyReport {
    pub meta: StudyMeta,
    pub grid: Grid,
    pub methods: Vec<MethodReport>,
}

/// Repeatedly draw (curves, responses) from the generator, fit every
/// method, and record coefficient-estimation accuracy.
pub fn run_estimation_study(
    gm: &GenerativeModel,
    methods: &[Method],
    n: usize,
    replicates: usize,
    snr: f64,
    seed: u64,
    opts: &FitOptions,
) -> Result<StudyReport> {
    if replicates < 1 {
        return Err(FcrError::InvalidArgument(
            "need at least 1 replicate".into(),
        ));
    }
    let sigma = snr_to_sigma(gm, snr)?;
    let gm = gm.clone().with_sigma(sigma)?;

    let per_replicate: Vec<Vec<Option<Curve>>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let curve_seed = replicate_seed(seed, 2 * r as u64);
            let noise_seed = replicate_seed(seed, 2 * r as u64 + 1);
            let ds =
                kl_sample(&gm, n, curve_seed).and_then(|ds| make_response(&ds, &gm, noise_seed));
            match ds {
                Ok(ds) => methods.iter().map(|m| m.beta_hat(&ds, opts).ok()).collect(),
                Err(_) => methods.iter().map(|_| None).collect(),
            }
        })
        .collect();

    let grid = gm.grid().clone();
    let mut reports = Vec::with_capacity(methods.len());
    for (m_idx, method) in methods.iter().enumerate() {
        let beta_hats: Vec<Option<Curve>> =
            per_replicate.iter().map(|row| row[m_idx].clone()).collect();
        let successes: Vec<Curve> = beta_hats.iter().flatten().cloned().collect();
        let failures = replicates - successes.len();
        let rmse = if successes.is_empty() {
            None
        } else {
            Some(rmse_curve(&successes, gm.beta_true())?)
        };
        let ise = beta_hats
            .iter()
            .map(|b| {
                b.as_ref().map(|bh| {
                    let diff = bh.minus(gm.beta_true());
                    grid.inner_product(&diff, &diff).expect("aligned curves")
                })
            })
            .collect();
        reports.push(MethodReport {
            method: method.name(),
            beta_hats,
            ise,
            rmse_curve: rmse,
            remspe: Vec::new(),
            failures,
        });
    }
    Ok(StudyReport {
        meta: StudyMeta {
            n,
            replicates,
            snr: Some(snr),
            test_fraction: None,
            seed,
        },
        grid,
        methods: reports,
    })
}

/// Deterministic train/test split of `0..n` for one repetition.
fn split_indices(n: usize, test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    // Fisher–Yates with explicit integer draws keeps the split stable.
    for i in (1..n).rev() {
        let j = (rand::Rng::random_range(&mut rng, 0..=i as u64)) as usize;
        perm.swap(i, j);
    }
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 2);
    let mut test: Vec<usize> = perm[..n_test].to_vec();
    let mut train: Vec<usize> = perm[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    (train, test)
}

/// Repeated random train/test splits: tune on the training part, score
/// held-out predictions relative to the train-mean predictor.
pub fn run_prediction_study(
    ds: &FunctionalDataset,
    methods: &[Method],
    test_fraction: f64,
    splits: usize,
    seed: u64,
    opts: &FitOptions,
) -> Result<StudyReport> {
    if ds.responses().is_none() {
        return Err(FcrError::InvalidArgument("dataset has no responses".into()));
    }
    if !(test_fraction > 0.0 && test_fraction < 0.5) {
        return Err(FcrError::InvalidArgument(format!(
            "test fraction must lie in (0, 0.5), got {test_fraction}"
        )));
    }
    if splits < 1 {
        return Err(FcrError::InvalidArgument("need at least 1 split".into()));
    }
    let n = ds.n();
    let per_split: Vec<Vec<Option<f64>>> = (0..splits)
        .into_par_iter()
        .map(|s| {
            let split_seed = replicate_seed(seed, s as u64);
            let (train_idx, test_idx) = split_indices(n, test_fraction, split_seed);
            let train = match ds.select(&train_idx) {
                Ok(t) => t,
                Err(_) => return methods.iter().map(|_| None).collect(),
            };
            let test = match ds.select(&test_idx) {
                Ok(t) => t,
                Err(_) => return methods.iter().map(|_| None).collect(),
            };
            let y_test = test.responses().expect("responses present").to_vec();
            let ybar_train = mean(train.responses().expect("responses present"));
            methods
                .iter()
                .map(|m| {
                    m.predict_split(&train, &test, opts)
                        .ok()
                        .and_then(|preds| remspe(&y_test, &preds, ybar_train).ok())
                })
                .collect()
        })
        .collect();

    let mut reports = Vec::with_capacity(methods.len());
    for (m_idx, method) in methods.iter().enumerate() {
        let remspe_col: Vec<Option<f64>> = per_split.iter().map(|row| row[m_idx]).collect();
        let failures = remspe_col.iter().filter(|v| v.is_none()).count();
        reports.push(MethodReport {
            method: method.name(),
            beta_hats: Vec::new(),
            ise: Vec::new(),
            rmse_curve: None,
            remspe: remspe_col,
            failures,
        });
    }
    Ok(StudyReport {
        meta: StudyMeta {
            n,
            replicates: splits,
            snr: None,
            test_fraction: Some(test_fraction),
            seed,
        },
        grid: ds.grid().clone(),
        methods: reports,
    })
}
