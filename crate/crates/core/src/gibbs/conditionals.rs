use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};

use super::problem::{GibbsProblem, RowData};
use super::state::GibbsState;
use super::GibbsConfig;
use crate::error::{HipError, Result};
use crate::linalg::{cholesky_jittered, sample_information_form};
use crate::model::WeightMeanPosterior;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Mean and covariance of a Gaussian.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianMoments {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

fn stack(resid: &[DVector<f64>], m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(resid.len(), m, |i, j| resid[i][j])
}

/// `W^T W = V diag(d) V^T`, shared by every eigen-coordinate of a row.
fn weight_gram(w: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let eig = SymmetricEigen::new(w.tr_mul(w));
    (eig.eigenvectors, eig.eigenvalues.map(|x| x.max(0.0)))
}

/// `log N(E | 0, W W^T (x) K + s2 I)` where `E` stacks the residuals of the
/// row's instances and the columns of `W` are the weights of the features
/// whose basis functions are integrated out.
pub(crate) fn collapsed_log_likelihood(
    row: &RowData,
    resid: &[DVector<f64>],
    w: &DMatrix<f64>,
) -> f64 {
    let m = row.lambda.len();
    let b = resid.len() as f64;
    let s2 = row.noise;
    let mut sq = vec![0.0; m];
    for e in resid {
        for j in 0..m {
            sq[j] += e[j] * e[j];
        }
    }
    let q = w.ncols();
    let proj = if q > 0 {
        let (v, d) = weight_gram(w);
        Some((v.tr_mul(&w.tr_mul(&stack(resid, m))), d))
    } else {
        None
    };
    let mut total = 0.0;
    for j in 0..m {
        let lam = row.lambda[j];
        let mut logdet = b * s2.ln();
        let mut quad = sq[j];
        if let Some((u, d)) = &proj {
            for i in 0..q {
                logdet += (lam * d[i] / s2).ln_1p();
                quad -= u[(i, j)] * u[(i, j)] / (s2 / lam + d[i]);
            }
        }
        total -= 0.5 * (b * LN_2PI + logdet + quad / s2);
    }
    total
}

/// Joint posterior of `q` basis vectors given `e_b = sum_k w_kb g_k + noise`,
/// expressed in the `V` basis of `W^T W` where it factorizes completely.
struct Block {
    v: DMatrix<f64>,
    /// posterior variances, `q x m`
    var: DMatrix<f64>,
    /// posterior means, `q x m`
    mean: DMatrix<f64>,
}

fn block_posterior(row: &RowData, resid: &[DVector<f64>], w: &DMatrix<f64>) -> Block {
    let m = row.lambda.len();
    let s2 = row.noise;
    let (v, d) = weight_gram(w);
    let proj = v.tr_mul(&w.tr_mul(&stack(resid, m))) / s2;
    let q = w.ncols();
    let var = DMatrix::from_fn(q, m, |i, j| 1.0 / (1.0 / row.lambda[j] + d[i] / s2));
    let mean = var.component_mul(&proj);
    Block { v, var, mean }
}

fn split_rows(g: DMatrix<f64>) -> Vec<DVector<f64>> {
    g.row_iter().map(|r| r.transpose()).collect()
}

pub(crate) fn block_mean(row: &RowData, resid: &[DVector<f64>], w: &DMatrix<f64>) -> Vec<DVector<f64>> {
    let blk = block_posterior(row, resid, w);
    split_rows(&blk.v * blk.mean)
}

fn block_sample<R: Rng + ?Sized>(
    row: &RowData,
    resid: &[DVector<f64>],
    w: &DMatrix<f64>,
    rng: &mut R,
) -> Vec<DVector<f64>> {
    let blk = block_posterior(row, resid, w);
    let (q, m) = blk.mean.shape();
    let noise = DMatrix::from_fn(q, m, |i, j| blk.var[(i, j)].sqrt() * rng.sample::<f64, _>(StandardNormal));
    split_rows(&blk.v * (blk.mean + noise))
}

fn check_row(problem: &GibbsProblem, row: usize) -> Result<()> {
    if row >= problem.num_rows() {
        return Err(HipError::invalid(format!("row {row} outside 0..{}", problem.num_rows())));
    }
    Ok(())
}

/// Posterior of the stacked active basis vectors `[f_k1(S*); f_k2(S*); ...]`
/// of one row (support-point coordinates, features ascending) given `z` and
/// `w`. Dense; intended for inspection and testing.
pub fn basis_posterior(problem: &GibbsProblem, state: &GibbsState, row: usize) -> Result<GaussianMoments> {
    check_row(problem, row)?;
    let data = &problem.rows[row];
    let active = state.active(row);
    let resid = state.residuals(problem, row, &active);
    let w = state.weight_matrix(problem, row, &active);
    let blk = block_posterior(data, &resid, &w);
    let (q, m) = (active.len(), problem.support_len());
    let g_mean = &blk.v * &blk.mean;
    let mut mean = DVector::zeros(q * m);
    for i in 0..q {
        let f = &data.u * g_mean.row(i).transpose();
        mean.rows_mut(i * m, m).copy_from(&f);
    }
    let mut cov = DMatrix::zeros(q * m, q * m);
    for a in 0..q {
        for b in 0..q {
            let diag = DVector::from_fn(m, |j, _| {
                (0..q).map(|i| blk.v[(a, i)] * blk.var[(i, j)] * blk.v[(b, i)]).sum::<f64>()
            });
            let block = &data.u * DMatrix::from_diagonal(&diag) * data.u.transpose();
            cov.view_mut((a * m, b * m), (m, m)).copy_from(&block);
        }
    }
    Ok(GaussianMoments { mean, cov })
}

/// Draw every active basis vector of `row` jointly from its Gaussian
/// conditional.
pub fn sample_basis<R: Rng + ?Sized>(
    problem: &GibbsProblem,
    state: &mut GibbsState,
    row: usize,
    rng: &mut R,
) -> Result<()> {
    check_row(problem, row)?;
    let active = state.active(row);
    let resid = state.residuals(problem, row, &active);
    let w = state.weight_matrix(problem, row, &active);
    let draws = block_sample(&problem.rows[row], &resid, &w, rng);
    if draws.iter().any(|g| !g.iter().all(|v| v.is_finite())) {
        return Err(HipError::numerical(format!("non-finite basis draw in row {row}")));
    }
    for (k, g) in active.into_iter().zip(draws) {
        state.g[k][row] = g;
    }
    Ok(())
}

/// Replace every active basis vector by its conditional posterior mean.
pub(crate) fn set_basis_to_mean(problem: &GibbsProblem, state: &mut GibbsState) {
    for row in 0..problem.num_rows() {
        let active = state.active(row);
        let resid = state.residuals(problem, row, &active);
        let w = state.weight_matrix(problem, row, &active);
        for (k, g) in active.into_iter().zip(block_mean(&problem.rows[row], &resid, &w)) {
            state.g[k][row] = g;
        }
    }
}

/// Precision and information vector of the free weights `w_2b..w_Kb`. Rows
/// keep their own noise variance.
fn weight_information(
    problem: &GibbsProblem,
    state: &GibbsState,
    b: usize,
    sigma_w: f64,
) -> (DMatrix<f64>, DVector<f64>) {
    let q = state.num_features() - 1;
    let s2w = sigma_w * sigma_w;
    let mut p = DMatrix::identity(q, q) / s2w;
    let mut h = DVector::from_fn(q, |i, _| state.mu[i + 1] / s2w);
    for (row, data) in problem.rows.iter().enumerate() {
        let Some((_, y)) = data.obs.iter().find(|(ib, _)| *ib == b) else {
            continue;
        };
        let r = y - &state.g[0][row];
        let s2 = data.noise;
        let act: Vec<usize> = (1..state.num_features()).filter(|&k| state.z[k][row]).collect();
        for (i, &k1) in act.iter().enumerate() {
            h[k1 - 1] += state.g[k1][row].dot(&r) / s2;
            for &k2 in &act[i..] {
                let v = state.g[k1][row].dot(&state.g[k2][row]) / s2;
                p[(k1 - 1, k2 - 1)] += v;
                if k1 != k2 {
                    p[(k2 - 1, k1 - 1)] += v;
                }
            }
        }
    }
    (p, h)
}

/// Gaussian posterior of instance `b`'s free weights given the basis values,
/// filters and weight means.
pub fn weight_posterior(
    problem: &GibbsProblem,
    state: &GibbsState,
    b: usize,
    sigma_w: f64,
) -> Result<GaussianMoments> {
    if b >= problem.num_instances() {
        return Err(HipError::invalid(format!("instance {b} outside 0..{}", problem.num_instances())));
    }
    let (p, h) = weight_information(problem, state, b, sigma_w);
    let chol = cholesky_jittered(p, 0.0, "weight posterior precision")?;
    Ok(GaussianMoments {
        mean: chol.solve(&h),
        cov: chol.inverse(),
    })
}

pub fn sample_weights<R: Rng + ?Sized>(
    problem: &GibbsProblem,
    state: &mut GibbsState,
    b: usize,
    sigma_w: f64,
    rng: &mut R,
) -> Result<()> {
    if state.num_features() == 1 {
        return Ok(());
    }
    let (p, h) = weight_information(problem, state, b, sigma_w);
    let chol = cholesky_jittered(p, 0.0, "weight posterior precision")?;
    let draw = sample_information_form(&h, &chol, rng);
    state.w[b][1..].copy_from_slice(draw.as_slice());
    Ok(())
}

/// Likelihood setup for moves that change the features `exclude` of one
/// row. Conditioned mode subtracts the other features' current basis
/// values; collapsed mode keeps the raw data and integrates the other
/// features' basis functions out alongside the changed ones.
struct RowContext {
    resid: Vec<DVector<f64>>,
    kept: DMatrix<f64>,
}

impl RowContext {
    fn new(problem: &GibbsProblem, state: &GibbsState, row: usize, exclude: &[usize], collapse: bool) -> Self {
        if collapse {
            let kept: Vec<usize> = state.active(row).into_iter().filter(|k| !exclude.contains(k)).collect();
            RowContext {
                resid: problem.rows[row].obs.iter().map(|(_, y)| y.clone()).collect(),
                kept: state.weight_matrix(problem, row, &kept),
            }
        } else {
            let resid = state.residuals(problem, row, exclude);
            let n = resid.len();
            RowContext {
                resid,
                kept: DMatrix::zeros(n, 0),
            }
        }
    }

    fn log_likelihood(&self, data: &RowData, extra: &DMatrix<f64>) -> f64 {
        let (n, p) = self.kept.shape();
        let q = extra.ncols();
        let w = DMatrix::from_fn(n, p + q, |i, j| if j < p { self.kept[(i, j)] } else { extra[(i, j - p)] });
        collapsed_log_likelihood(data, &self.resid, &w)
    }
}

/// `log p(z_k,row = 1 | rest) - log p(z_k,row = 0 | rest)` with `f_k,row`
/// integrated out (and, when `cfg.collapse_basis` is set, every other
/// basis function of the row as well). Only defined while another row uses
/// feature `k`.
pub fn filter_log_odds(
    problem: &GibbsProblem,
    state: &GibbsState,
    k: usize,
    row: usize,
    cfg: &GibbsConfig,
) -> Result<f64> {
    check_row(problem, row)?;
    if k == 0 || k >= state.num_features() {
        return Err(HipError::invalid(format!("feature {k} is not a resampleable feature")));
    }
    let others = state.count_excluding(k, row);
    if others == 0 {
        return Err(HipError::invalid(format!(
            "feature {k} is used only by row {row}; singletons are resampled by proposals"
        )));
    }
    let n = problem.num_rows() as f64;
    let prior = (others as f64).ln() - (n - others as f64).ln();
    if cfg.ignore_likelihood {
        return Ok(prior);
    }
    let data = &problem.rows[row];
    let ctx = RowContext::new(problem, state, row, &[k], cfg.collapse_basis);
    let w1 = state.weight_matrix(problem, row, &[k]);
    let w0 = DMatrix::zeros(w1.nrows(), 0);
    Ok(prior + ctx.log_likelihood(data, &w1) - ctx.log_likelihood(data, &w0))
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Resample `z_k,row` for a feature that some other row also uses. On
/// activation the basis vector is drawn from its conditional posterior.
pub fn sample_filter_existing<R: Rng + ?Sized>(
    problem: &GibbsProblem,
    state: &mut GibbsState,
    k: usize,
    row: usize,
    cfg: &GibbsConfig,
    rng: &mut R,
) -> Result<bool> {
    let log_odds = filter_log_odds(problem, state, k, row, cfg)?;
    let on = rng.random::<f64>() < sigmoid(log_odds);
    state.z[k][row] = on;
    if on {
        let resid = state.residuals(problem, row, &[k]);
        let w = state.weight_matrix(problem, row, &[k]);
        state.g[k][row] = block_sample(&problem.rows[row], &resid, &w, rng).remove(0);
    } else {
        state.g[k][row].fill(0.0);
    }
    Ok(on)
}

fn log_mean_exp(xs: &[f64]) -> f64 {
    let mx = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !mx.is_finite() {
        return mx;
    }
    mx + (xs.iter().map(|x| (x - mx).exp()).sum::<f64>() / xs.len() as f64).ln()
}

/// Birth/death move for the features only `row` uses. Proposes replacing
/// them by `Poisson(alpha / N_rows)` fresh features whose weights are drawn
/// `N_w` times from `N(0, sigma_w^2)`; the importance-sampled marginal
/// likelihood is compared with that of the current singletons. Returns
/// whether the replacement was accepted.
pub fn propose_new_features<R: Rng + ?Sized>(
    problem: &GibbsProblem,
    state: &mut GibbsState,
    row: usize,
    cfg: &GibbsConfig,
    rng: &mut R,
) -> Result<bool> {
    check_row(problem, row)?;
    let singletons: Vec<usize> = (1..state.num_features())
        .filter(|&k| state.z[k][row] && state.count_excluding(k, row) == 0)
        .collect();
    let k_new = if cfg.alpha > 0.0 {
        let rate = cfg.alpha / problem.num_rows() as f64;
        Poisson::new(rate)
            .map_err(|e| HipError::invalid(format!("IBP proposal rate {rate}: {e}")))?
            .sample(rng) as usize
    } else {
        0
    };
    if k_new == 0 && singletons.is_empty() {
        return Ok(false);
    }
    let data = &problem.rows[row];
    let ctx = RowContext::new(problem, state, row, &singletons, cfg.collapse_basis);
    let use_lik = !cfg.ignore_likelihood;
    let ll_current = if use_lik {
        ctx.log_likelihood(data, &state.weight_matrix(problem, row, &singletons))
    } else {
        0.0
    };

    let nb = problem.num_instances();
    let prior = Normal::new(0.0, cfg.sigma_w).map_err(|e| HipError::invalid(e.to_string()))?;
    let row_instances: Vec<usize> = data.instances().collect();
    let restrict = |ws: &DMatrix<f64>| DMatrix::from_fn(row_instances.len(), ws.ncols(), |i, j| ws[(row_instances[i], j)]);
    let (ll_new, new_w) = if k_new == 0 {
        let ll = if use_lik {
            ctx.log_likelihood(data, &DMatrix::zeros(row_instances.len(), 0))
        } else {
            0.0
        };
        (ll, DMatrix::zeros(nb, 0))
    } else {
        let n_sets = cfg.num_weight_samples.max(1);
        let sets: Vec<DMatrix<f64>> = (0..n_sets)
            .map(|_| DMatrix::from_fn(nb, k_new, |_, _| prior.sample(rng)))
            .collect();
        if use_lik {
            let lls: Vec<f64> = sets.iter().map(|ws| ctx.log_likelihood(data, &restrict(ws))).collect();
            let mx = lls.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let weights: Vec<f64> = lls.iter().map(|l| (l - mx).exp()).collect();
            let total: f64 = weights.iter().sum();
            let mut u = rng.random::<f64>() * total;
            let mut pick = n_sets - 1;
            for (i, wt) in weights.iter().enumerate() {
                if u < *wt {
                    pick = i;
                    break;
                }
                u -= wt;
            }
            (log_mean_exp(&lls), sets[pick].clone())
        } else {
            (0.0, sets[0].clone())
        }
    };

    let accept = !use_lik || rng.random::<f64>().ln() < ll_new - ll_current;
    if !accept {
        return Ok(false);
    }
    for &k in singletons.iter().rev() {
        state.remove_feature(k);
    }
    if k_new > 0 {
        let resid = state.residuals(problem, row, &[]);
        let draws = block_sample(data, &resid, &restrict(&new_w), rng);
        let m = problem.support_len();
        for (j, g) in draws.into_iter().enumerate() {
            let mut z = vec![false; problem.num_rows()];
            z[row] = true;
            let mut gs = vec![DVector::zeros(m); problem.num_rows()];
            gs[row] = g;
            let col: Vec<f64> = new_w.column(j).iter().copied().collect();
            state.push_feature(z, gs, &col, 0.0);
        }
    }
    Ok(true)
}

/// Conjugate posterior of `mu_k` from the weights of all instances.
pub fn weight_mean_posterior(weights: &[f64], sigma_w: f64, sigma_w0: f64) -> WeightMeanPosterior {
    let s2w = sigma_w * sigma_w;
    let variance = 1.0 / (1.0 / (sigma_w0 * sigma_w0) + weights.len() as f64 / s2w);
    let mean = variance * weights.iter().sum::<f64>() / s2w;
    WeightMeanPosterior { mean, variance }
}

/// Draw every `mu_k` (k > 1) from its conjugate posterior; returns the
/// posteriors used.
pub fn update_weight_means<R: Rng + ?Sized>(
    state: &mut GibbsState,
    cfg: &GibbsConfig,
    rng: &mut R,
) -> Vec<WeightMeanPosterior> {
    (1..state.num_features())
        .map(|k| {
            let post = weight_mean_posterior(&state.feature_weights(k), cfg.sigma_w, cfg.sigma_w0);
            state.mu[k] = post.mean + post.variance.sqrt() * rng.sample::<f64, _>(StandardNormal);
            post
        })
        .collect()
}

/// `log p(Delta | z, w)` of one row with every active basis function
/// integrated out.
pub(crate) fn row_marginal_log_likelihood(problem: &GibbsProblem, state: &GibbsState, row: usize) -> f64 {
    let data = &problem.rows[row];
    let active = state.active(row);
    let ys: Vec<DVector<f64>> = data.obs.iter().map(|(_, y)| y.clone()).collect();
    collapsed_log_likelihood(data, &ys, &state.weight_matrix(problem, row, &active))
}

/// Slice-sample each free weight from `p(w_kb | w_rest, z, mu, Delta)` with
/// the basis functions integrated out. Leaves the basis values stale: the
/// caller must redraw them from their conditional before anything else
/// conditions on them.
pub fn slice_weights_collapsed<R: Rng + ?Sized>(
    problem: &GibbsProblem,
    state: &mut GibbsState,
    cfg: &GibbsConfig,
    rng: &mut R,
) {
    const MAX_STEPS: usize = 8;
    let s2w = cfg.sigma_w * cfg.sigma_w;
    for b in 0..problem.num_instances() {
        for k in 1..state.num_features() {
            let rows: Vec<usize> = (0..problem.num_rows())
                .filter(|&r| state.z[k][r] && problem.rows[r].obs.iter().any(|(ib, _)| *ib == b))
                .collect();
            let mu = state.mu[k];
            let logp = |st: &mut GibbsState, v: f64| -> f64 {
                st.w[b][k] = v;
                let prior = -0.5 * (v - mu) * (v - mu) / s2w;
                if cfg.ignore_likelihood {
                    return prior;
                }
                prior + rows.iter().map(|&r| row_marginal_log_likelihood(problem, st, r)).sum::<f64>()
            };
            let x0 = state.w[b][k];
            let level = logp(state, x0) + rng.random::<f64>().ln();
            let width = cfg.sigma_w;
            let mut lo = x0 - width * rng.random::<f64>();
            let mut hi = lo + width;
            let mut j = rng.random_range(0..MAX_STEPS);
            let mut kk = MAX_STEPS - 1 - j;
            while j > 0 && logp(state, lo) > level {
                lo -= width;
                j -= 1;
            }
            while kk > 0 && logp(state, hi) > level {
                hi += width;
                kk -= 1;
            }
            loop {
                let x1 = lo + (hi - lo) * rng.random::<f64>();
                if logp(state, x1) > level {
                    break;
                }
                if x1 < x0 {
                    lo = x1;
                } else {
                    hi = x1;
                }
                if hi - lo < 1e-12 {
                    state.w[b][k] = x0;
                    break;
                }
            }
        }
    }
}
