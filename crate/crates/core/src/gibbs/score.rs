use std::collections::HashMap;

use nalgebra::DMatrix;

use super::conditionals::collapsed_log_likelihood;
use super::problem::GibbsProblem;
use super::state::GibbsState;
use super::GibbsConfig;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// Log IBP probability of the equivalence class of the non-baseline columns
/// of `z` (`z[k][row]`, `k >= 1`), with `num_rows` customers.
pub fn ibp_log_prior(z: &[Vec<bool>], num_rows: usize, alpha: f64) -> f64 {
    let n = num_rows;
    let harmonic: f64 = (1..=n).map(|i| 1.0 / i as f64).sum();
    let mut groups: HashMap<&[bool], usize> = HashMap::new();
    let mut lp = -alpha * harmonic;
    for col in z {
        let m = col.iter().filter(|&&on| on).count();
        if m == 0 {
            continue;
        }
        *groups.entry(col.as_slice()).or_default() += 1;
        lp += alpha.ln() + ln_factorial(n - m) + ln_factorial(m - 1) - ln_factorial(n);
    }
    lp - groups.values().map(|&c| ln_factorial(c)).sum::<f64>()
}

/// `log N(w | 0, s2w I + s2w0 11^T)`: one feature's weights with the shared
/// mean integrated out.
pub fn weight_log_prior(w: &[f64], sigma_w: f64, sigma_w0: f64) -> f64 {
    let b = w.len() as f64;
    let s2w = sigma_w * sigma_w;
    let s2w0 = sigma_w0 * sigma_w0;
    let sum: f64 = w.iter().sum();
    let sq: f64 = w.iter().map(|v| v * v).sum();
    let logdet = b * s2w.ln() + (b * s2w0 / s2w).ln_1p();
    let quad = (sq - s2w0 * sum * sum / (s2w + b * s2w0)) / s2w;
    -0.5 * (b * LN_2PI + logdet + quad)
}

/// Model-selection score: data likelihood with every basis function
/// integrated out, plus the weight and IBP priors. Independent of the
/// current basis values, so states with different `K` compare fairly.
pub fn joint_log_likelihood(problem: &GibbsProblem, state: &GibbsState, cfg: &GibbsConfig) -> f64 {
    let mut total = 0.0;
    for (row, data) in problem.rows.iter().enumerate() {
        let active = state.active(row);
        let ys: Vec<_> = data.obs.iter().map(|(_, y)| y.clone()).collect();
        let w: DMatrix<f64> = state.weight_matrix(problem, row, &active);
        total += collapsed_log_likelihood(data, &ys, &w);
    }
    for k in 1..state.num_features() {
        total += weight_log_prior(&state.feature_weights(k), cfg.sigma_w, cfg.sigma_w0);
    }
    total + ibp_log_prior(&state.z[1..], problem.num_rows(), cfg.alpha)
}
