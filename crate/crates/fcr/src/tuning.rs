//! GCV-based joint selection of the component count p and the continuum
//! parameter α.
//!
//! For each candidate α the components 1..pmax share one deflation chain;
//! the GCV table cell (p, α) scores the in-sample residual sum of squares
//! of the p-component model. The α loop is embarrassingly parallel and the
//! merge is deterministic in grid order.

use rayon::prelude::*;

use crate::continuum::{
    deflate, fit_component, CenteredSample, ComponentFit, ComponentState, FCRModel, FitOptions,
};
use crate::error::{FcrError, Result};
use crate::fgrid::{Curve, EigenSystem, FunctionalDataset};

/// Default α candidate pool.
pub const DEFAULT_ALPHAS: [f64; 11] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.999];

/// How pmax is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PmaxRule {
    /// Smallest p whose eigenvalues capture at least this fraction of the
    /// total variance, capped at min(rank, n−3).
    Auto {
        var_threshold: f64,
    },
    Fixed(usize),
}

/// Candidate pool for the (p, α) search.
#[derive(Clone, Debug)]
pub struct TuningGrid {
    alphas: Vec<f64>,
    pub pmax: PmaxRule,
}

impl TuningGrid {
    pub fn new(mut alphas: Vec<f64>, pmax: PmaxRule) -> Result<Self> {
        if alphas.is_empty() {
            return Err(FcrError::InvalidArgument("empty alpha grid".into()));
        }
        for &a in &alphas {
            if !(0.0..1.0).contains(&a) {
                return Err(FcrError::InvalidArgument(format!(
                    "alpha must lie in [0, 1), got {a}"
                )));
            }
        }
        alphas.sort_by(|a, b| a.partial_cmp(b).expect("finite alphas"));
        alphas.dedup();
        if let PmaxRule::Auto { var_threshold } = pmax {
            if !(var_threshold > 0.0 && var_threshold <= 1.0) {
                return Err(FcrError::InvalidArgument(format!(
                    "var threshold must lie in (0, 1], got {var_threshold}"
                )));
            }
        }
        if let PmaxRule::Fixed(p) = pmax {
            if p < 1 {
                return Err(FcrError::InvalidArgument("pmax must be at least 1".into()));
            }
        }
        Ok(TuningGrid { alphas, pmax })
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }
}

impl Default for TuningGrid {
    fn default() -> Self {
        TuningGrid {
            alphas: DEFAULT_ALPHAS.to_vec(),
            pmax: PmaxRule::Auto {
                var_threshold: 0.99,
            },
        }
    }
}

/// GCV score `residual_ss / (n − p − 1)²`.
pub fn gcv(residual_ss: f64, n: usize, p: usize) -> Result<f64> {
    if n < p + 2 {
        return Err(FcrError::SaturatedModel { n, p });
    }
    let dof = (n - p - 1) as f64;
    Ok(residual_ss / (dof * dof))
}

/// Smallest p whose leading eigenvalues capture `var_threshold` of the
/// total variance, capped at min(rank, n − 3).
pub fn default_pmax(eig: &EigenSystem, var_threshold: f64, n: usize) -> usize {
    let total: f64 = eig.eigenvalues().iter().sum();
    let cap = eig.rank().min(n.saturating_sub(3)).max(1);
    let mut acc = 0.0;
    for (j, lam) in eig.eigenvalues().iter().enumerate() {
        acc += lam;
        if acc >= var_threshold * total {
            return (j + 1).min(cap);
        }
    }
    cap
}

/// GCV table plus the selected model.
#[derive(Clone, Debug)]
pub struct TuningReport {
    /// Row p−1, column = alpha index; +∞ marks infeasible cells.
    pub gcv_table: Vec<Vec<f64>>,
    pub alphas: Vec<f64>,
    pub pmax: usize,
    pub best_p: usize,
    pub best_alpha: f64,
    pub model: FCRModel,
}

struct AlphaColumn {
    gcv: Vec<f64>,
    components: Vec<ComponentFit>,
}

fn run_alpha_chain(
    sample: &CenteredSample,
    state0: &ComponentState,
    alpha: f64,
    pmax: usize,
    opts: &FitOptions,
) -> AlphaColumn {
    let n = sample.ds().n();
    let mut gcv_col = vec![f64::INFINITY; pmax];
    let mut components = Vec::with_capacity(pmax);
    let mut state = state0.clone();
    let mut residuals: Vec<f64> = sample.y().to_vec();
    for p in 1..=pmax {
        let component = match fit_component(&state, sample, alpha, opts) {
            Ok(c) => c,
            Err(_) => break,
        };
        let t = match state.deflated().scores(&component.weight) {
            Ok(t) => t,
            Err(_) => break,
        };
        for (r, ti) in residuals.iter_mut().zip(&t) {
            *r -= component.coef * ti;
        }
        let rss: f64 = residuals.iter().map(|r| r * r).sum();
        if let Ok(score) = gcv(rss, n, p) {
            gcv_col[p - 1] = score;
        }
        components.push(component);
        if p < pmax {
            match deflate(&state, components.last().unwrap(), sample, opts) {
                Ok(next) => state = next,
                Err(_) => break,
            }
        }
    }
    AlphaColumn {
        gcv: gcv_col,
        components,
    }
}

fn assemble_model(
    sample: &CenteredSample,
    ds: &FunctionalDataset,
    alpha: f64,
    components: &[ComponentFit],
    p: usize,
) -> Result<FCRModel> {
    let mut beta = Curve::zeros(ds.grid().len());
    let chosen: Vec<ComponentFit> = components[..p].to_vec();
    for c in &chosen {
        beta.axpy(c.coef, &c.weight);
    }
    FCRModel::from_parts(
        alpha,
        chosen,
        beta,
        sample.x_mean().clone(),
        sample.y_mean(),
        ds.grid().clone(),
        false,
    )
}

/// Fit the full (p, α) grid and return the GCV-minimizing model. Ties break
/// toward smaller p, then smaller α.
pub fn tune(ds: &FunctionalDataset, grid: &TuningGrid, opts: &FitOptions) -> Result<TuningReport> {
    let n = ds.n();
    if n < 5 {
        return Err(FcrError::InvalidArgument(format!(
            "tuning needs at least 5 observations, got {n}"
        )));
    }
    let sample = CenteredSample::new(ds)?;
    // Each α chain starts from a clone of the shared initial state.
    let state0 = crate::continuum::init_state(ds, opts)?;
    let rank = state0.eig().rank();
    let pmax = match grid.pmax {
        PmaxRule::Auto { var_threshold } => default_pmax(state0.eig(), var_threshold, n),
        PmaxRule::Fixed(p) => p,
    }
    .min(rank)
    .min(n.saturating_sub(2));
    if pmax < 1 {
        return Err(FcrError::TuningFailed);
    }

    let columns: Vec<AlphaColumn> = grid
        .alphas
        .par_iter()
        .map(|&alpha| run_alpha_chain(&sample, &state0, alpha, pmax, opts))
        .collect();

    let mut table = vec![vec![f64::INFINITY; grid.alphas.len()]; pmax];
    for (a_idx, col) in columns.iter().enumerate() {
        for p in 0..pmax {
            table[p][a_idx] = col.gcv[p];
        }
    }

    let mut best: Option<(usize, usize, f64)> = None;
    for p in 0..pmax {
        for a_idx in 0..grid.alphas.len() {
            let v = table[p][a_idx];
            if v.is_finite() && best.map_or(true, |(_, _, bv)| v < bv) {
                best = Some((p, a_idx, v));
            }
        }
    }
    let (best_p_idx, best_a_idx, _) = best.ok_or(FcrError::TuningFailed)?;
    let best_p = best_p_idx + 1;
    let best_alpha = grid.alphas[best_a_idx];
    let model = assemble_model(
        &sample,
        ds,
        best_alpha,
        &columns[best_a_idx].components,
        best_p,
    )?;
    Ok(TuningReport {
        gcv_table: table,
        alphas: grid.alphas.clone(),
        pmax,
        best_p,
        best_alpha,
        model,
    })
}
