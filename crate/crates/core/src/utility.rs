//! Propensity-score global utility.
//!
//! Original and synthetic rows are stacked, labelled 0 and 1, and a
//! main-effects logistic regression is fit by IRLS. The utility is the mean
//! squared distance of the fitted membership probabilities from 1/2: zero
//! when the classifier cannot tell the halves apart, 1/4 when it separates
//! them perfectly.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Column, Dataset};
use crate::error::{Error, Result};

/// Stacked design: intercept first, then one column per retained predictor.
#[derive(Clone, Debug, PartialEq)]
pub struct Design {
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
    pub column_names: Vec<String>,
}

/// Builds the `2n × p` main-effects design: original rows first (label 0),
/// synthetic rows second (label 1). Continuous columns are standardized by
/// the pooled mean and standard deviation; categorical columns are dummy
/// coded without their first level. Constant columns are dropped.
pub fn design_matrix(orig: &Dataset, syn: &Dataset) -> Result<Design> {
    let syn = syn.align_to(orig.schema())?;
    let n_orig = orig.n_rows();
    let rows = n_orig + syn.n_rows();
    let mut cols: Vec<Vec<f64>> = vec![vec![1.0; rows]];
    let mut names = vec!["(intercept)".to_string()];

    for (idx, spec) in orig.schema().variables().iter().enumerate() {
        match (orig.column_at(idx), syn.column_at(idx)) {
            (Column::Continuous(a), Column::Continuous(b)) => {
                let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
                let mean = pooled.iter().sum::<f64>() / rows as f64;
                let var = pooled.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / rows as f64;
                let sd = var.sqrt();
                if sd.is_nan() || sd <= 0.0 {
                    log::warn!("dropping constant predictor `{}`", spec.name);
                    continue;
                }
                cols.push(pooled.iter().map(|v| (v - mean) / sd).collect());
                names.push(spec.name.clone());
            }
            (Column::Categorical(a), Column::Categorical(b)) => {
                for (level_idx, label) in spec.levels.iter().enumerate().skip(1) {
                    let dummy: Vec<f64> =
                        a.iter().chain(b).map(|&l| if l as usize == level_idx { 1.0 } else { 0.0 }).collect();
                    let first = dummy.first().copied().unwrap_or(0.0);
                    if dummy.iter().all(|&v| v == first) {
                        log::warn!("dropping constant dummy `{}={label}`", spec.name);
                        continue;
                    }
                    cols.push(dummy);
                    names.push(format!("{}={label}", spec.name));
                }
            }
            _ => unreachable!("aligned schemas share kinds"),
        }
    }

    let p = cols.len();
    let x = DMatrix::from_fn(rows, p, |r, c| cols[c][r]);
    let y = (0..rows).map(|r| if r < n_orig { 0.0 } else { 1.0 }).collect();
    Ok(Design { x, y, column_names: names })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub ridge: f64,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        LogisticOptions { tol: 1e-8, max_iter: 100, ridge: 1e-8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropensityFit {
    pub coefficients: Vec<f64>,
    pub p_hat: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl PropensityFit {
    /// `(1/N) Σ (p̂ − 1/2)²` over all stacked rows.
    pub fn utility(&self) -> f64 {
        if self.p_hat.is_empty() {
            return 0.0;
        }
        self.p_hat.iter().map(|p| (p - 0.5).powi(2)).sum::<f64>() / self.p_hat.len() as f64
    }
}

const P_FLOOR: f64 = 1e-15;

fn sigmoid(eta: f64) -> f64 {
    let p = if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    };
    p.clamp(P_FLOOR, 1.0 - P_FLOOR)
}

fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

/// Ridge-penalized binomial log-likelihood `Σ y·η − log(1 + e^η) − (λ/2)‖β‖²`.
pub fn penalized_log_likelihood(x: &DMatrix<f64>, y: &[f64], beta: &[f64], ridge: f64) -> f64 {
    let b = DVector::from_column_slice(beta);
    let eta = x * &b;
    let ll: f64 = eta.iter().zip(y).map(|(&e, &yi)| yi * e - softplus(e)).sum();
    ll - 0.5 * ridge * b.norm_squared()
}

/// Gradient of [`penalized_log_likelihood`].
pub fn penalized_gradient(x: &DMatrix<f64>, y: &[f64], beta: &[f64], ridge: f64) -> Vec<f64> {
    let b = DVector::from_column_slice(beta);
    let eta = x * &b;
    let resid = DVector::from_iterator(y.len(), eta.iter().zip(y).map(|(&e, &yi)| yi - sigmoid(e)));
    let g = x.transpose() * resid - &b * ridge;
    g.iter().copied().collect()
}

/// Fits a logistic regression by iteratively reweighted least squares on the
/// ridge-penalized likelihood. Each Newton step is halved until the
/// objective does not decrease; iteration stops once the largest coefficient
/// change drops below `opts.tol`.
pub fn fit_logistic(x: &DMatrix<f64>, y: &[f64], opts: LogisticOptions) -> Result<PropensityFit> {
    if y.len() != x.nrows() {
        return Err(Error::config("y", format!("{} labels for {} design rows", y.len(), x.nrows())));
    }
    for c in 0..x.ncols() {
        for r in 0..x.nrows() {
            if !x[(r, c)].is_finite() {
                return Err(Error::NonFiniteDesign { row: r, col: c });
            }
        }
    }
    if let Some(bad) = y.iter().position(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::config("y", format!("label at row {bad} is not 0 or 1")));
    }

    let p = x.ncols();
    let xt = x.transpose();
    let mut beta = DVector::<f64>::zeros(p);
    let mut objective = penalized_log_likelihood(x, y, beta.as_slice(), opts.ridge);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let eta = x * &beta;
        let mu: Vec<f64> = eta.iter().map(|&e| sigmoid(e)).collect();
        let resid = DVector::from_iterator(y.len(), mu.iter().zip(y).map(|(m, yi)| yi - m));
        let grad = &xt * resid - &beta * opts.ridge;

        // X'WX + λI
        let mut weighted = x.clone();
        for (r, m) in mu.iter().enumerate() {
            let w = m * (1.0 - m);
            weighted.row_mut(r).scale_mut(w);
        }
        let mut hess = &xt * weighted;
        for d in 0..p {
            hess[(d, d)] += opts.ridge;
        }
        let step = match hess.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            None => match hess.lu().solve(&grad) {
                Some(s) => s,
                None => break,
            },
        };

        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let candidate = &beta + &step * scale;
            let obj = penalized_log_likelihood(x, y, candidate.as_slice(), opts.ridge);
            if obj.is_finite() && obj >= objective {
                accepted = Some((candidate, obj));
                break;
            }
            scale *= 0.5;
        }
        let Some((next, obj)) = accepted else {
            // No ascent direction left at machine precision.
            converged = step.amax() < opts.tol;
            break;
        };
        let change = (&next - &beta).amax();
        beta = next;
        objective = obj;
        if change < opts.tol {
            converged = true;
            break;
        }
    }

    let p_hat = (x * &beta).iter().map(|&e| sigmoid(e)).collect();
    Ok(PropensityFit { coefficients: beta.iter().copied().collect(), p_hat, converged, iterations })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtilityResult {
    /// `U_p` for each synthetic dataset, in input order.
    pub per_dataset: Vec<f64>,
    pub converged: Vec<bool>,
}

impl UtilityResult {
    pub fn mean(&self) -> f64 {
        crate::stats::mean(&self.per_dataset)
    }
}

/// `U_p` for every synthetic dataset, using [`design_matrix`].
pub fn propensity_utility(orig: &Dataset, syn_list: &[Dataset]) -> Result<UtilityResult> {
    propensity_utility_with(orig, syn_list, design_matrix, LogisticOptions::default())
}

/// As [`propensity_utility`] with a caller-supplied design builder, e.g. one
/// that adds interaction terms.
pub fn propensity_utility_with<F>(
    orig: &Dataset,
    syn_list: &[Dataset],
    build: F,
    opts: LogisticOptions,
) -> Result<UtilityResult>
where
    F: Fn(&Dataset, &Dataset) -> Result<Design> + Sync,
{
    if syn_list.is_empty() {
        return Err(Error::NoSyntheticData);
    }
    let fits = syn_list
        .par_iter()
        .map(|syn| {
            if syn.n_rows() != orig.n_rows() {
                return Err(Error::RowCountMismatch { original: orig.n_rows(), synthetic: syn.n_rows() });
            }
            let design = build(orig, syn)?;
            fit_logistic(&design.x, &design.y, opts)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(UtilityResult {
        per_dataset: fits.iter().map(PropensityFit::utility).collect(),
        converged: fits.iter().map(|f| f.converged).collect(),
    })
}
