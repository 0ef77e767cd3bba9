//! Type-II maximum likelihood for the squared-exponential kernel.
//!
//! The search runs coordinate-wise golden-section passes over the
//! log-parameters `(log l_1..log l_d, log sf2, log sn2)` inside fixed boxes
//! derived from the data scale.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::kernel::KernelParams;
use super::regress::GpRegressor;
use crate::error::{HipError, Result};
use crate::linalg::variance;
use crate::model::{State, StateLayout, TransitionTuple};

/// Below this many points the fit falls back to the moment heuristic.
pub const MIN_FIT_POINTS: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperFitConfig {
    /// Maximum number of points used for the likelihood.
    pub subsample: usize,
    pub sweeps: usize,
    pub golden_iters: usize,
    /// Noise variance floor relative to the output second moment. Deterministic
    /// simulators otherwise drive the fitted noise to zero.
    pub min_noise_ratio: f64,
}

impl Default for HyperFitConfig {
    fn default() -> Self {
        HyperFitConfig {
            subsample: 200,
            sweeps: 3,
            golden_iters: 20,
            min_noise_ratio: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HyperFit {
    pub params: KernelParams,
    /// True when too few points were available and the heuristic was used.
    pub fallback: bool,
    pub log_marginal_likelihood: f64,
}

/// Search box in log space for each parameter, same order as the search vector.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

fn input_scales(xs: &[State], dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|d| {
            let col: Vec<f64> = xs.iter().map(|x| x[d]).collect();
            let sd = variance(&col).sqrt();
            if sd > 0.0 && sd.is_finite() {
                sd
            } else {
                1.0
            }
        })
        .collect()
}

/// Second moment about zero: the prior is zero-mean, so a constant offset
/// is signal the kernel must carry.
fn output_scale(ys: &[f64]) -> f64 {
    let m2 = ys.iter().map(|y| y * y).sum::<f64>() / ys.len().max(1) as f64;
    if m2 > 0.0 && m2.is_finite() {
        m2
    } else {
        1e-12
    }
}

pub fn hyper_bounds(xs: &[State], ys: &[f64], cfg: &HyperFitConfig) -> HyperBounds {
    let dim = xs.first().map_or(0, |x| x.len());
    let scales = input_scales(xs, dim);
    let v = output_scale(ys);
    let mut lower: Vec<f64> = scales.iter().map(|s| (0.01 * s).ln()).collect();
    let mut upper: Vec<f64> = scales.iter().map(|s| (100.0 * s).ln()).collect();
    lower.push((1e-8 * v).ln());
    upper.push((1e3 * v).ln());
    lower.push((cfg.min_noise_ratio * v).ln());
    upper.push((10.0 * v).ln());
    HyperBounds { lower, upper }
}

/// Moment heuristic: per-dimension input standard deviation, output second
/// moment, and a tenth of it as noise.
pub fn heuristic_params(xs: &[State], ys: &[f64], dim: usize) -> KernelParams {
    let v = output_scale(ys);
    KernelParams {
        lengthscales: input_scales(xs, dim),
        signal_variance: v,
        noise_variance: 0.1 * v,
    }
}

fn params_from_log(theta: &[f64]) -> KernelParams {
    let d = theta.len() - 2;
    KernelParams {
        lengthscales: theta[..d].iter().map(|t| t.exp()).collect(),
        signal_variance: theta[d].exp(),
        noise_variance: theta[d + 1].exp(),
    }
}

fn lml(xs: &[State], ys: &[f64], theta: &[f64]) -> f64 {
    let p = params_from_log(theta);
    match GpRegressor::fit(xs, ys, &p) {
        Ok(gp) => {
            let v = gp.log_marginal_likelihood();
            if v.is_finite() {
                v
            } else {
                f64::NEG_INFINITY
            }
        }
        Err(_) => f64::NEG_INFINITY,
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

fn golden_max(mut lo: f64, mut hi: f64, iters: usize, f: &mut impl FnMut(f64) -> f64) -> (f64, f64) {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
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

/// Fit kernel hyperparameters to `(xs, ys)` by maximizing the log marginal
/// likelihood on a seeded subsample.
pub fn fit_kernel<R: Rng + ?Sized>(
    xs: &[State],
    ys: &[f64],
    cfg: &HyperFitConfig,
    rng: &mut R,
) -> Result<HyperFit> {
    if xs.len() != ys.len() {
        return Err(HipError::invalid("inputs and outputs differ in length"));
    }
    let dim = match xs.first() {
        Some(x) => x.len(),
        None => return Err(HipError::invalid("cannot fit a kernel to zero points")),
    };
    if xs.len() < MIN_FIT_POINTS {
        log::warn!(
            "only {} points for hyperparameter fit, using heuristic",
            xs.len()
        );
        let params = heuristic_params(xs, ys, dim);
        return Ok(HyperFit {
            params,
            fallback: true,
            log_marginal_likelihood: f64::NAN,
        });
    }
    let (sx, sy): (Vec<State>, Vec<f64>) = if xs.len() > cfg.subsample {
        let mut idx = sample(rng, xs.len(), cfg.subsample).into_vec();
        idx.sort_unstable();
        idx.iter().map(|&i| (xs[i].clone(), ys[i])).unzip()
    } else {
        (xs.to_vec(), ys.to_vec())
    };

    let bounds = hyper_bounds(&sx, &sy, cfg);
    let init = heuristic_params(&sx, &sy, dim);
    let mut theta: Vec<f64> = init.lengthscales.iter().map(|l| l.ln()).collect();
    theta.push(init.signal_variance.ln());
    theta.push(init.noise_variance.ln());
    for (i, t) in theta.iter_mut().enumerate() {
        *t = t.clamp(bounds.lower[i], bounds.upper[i]);
    }
    let mut best = lml(&sx, &sy, &theta);
    for _ in 0..cfg.sweeps {
        for i in 0..theta.len() {
            let (lo, hi) = (bounds.lower[i], bounds.upper[i]);
            if hi <= lo {
                continue;
            }
            let mut trial = theta.clone();
            let (x, fx) = golden_max(lo, hi, cfg.golden_iters, &mut |v| {
                trial[i] = v;
                lml(&sx, &sy, &trial)
            });
            // the box edge is a candidate too, golden section never evaluates it
            let edges = [lo, hi];
            let mut cand = (x, fx);
            for e in edges {
                trial[i] = e;
                let fe = lml(&sx, &sy, &trial);
                if fe > cand.1 {
                    cand = (e, fe);
                }
            }
            if cand.1 > best {
                theta[i] = cand.0;
                best = cand.1;
            }
        }
    }
    Ok(HyperFit {
        params: params_from_log(&theta),
        fallback: false,
        log_marginal_likelihood: best,
    })
}

/// Fit the kernel for output dimension `d` under action `a` from raw tuples,
/// regressing `s -> s'_d - s_d`.
pub fn fit_hyperparams<R: Rng + ?Sized>(
    tuples: &[TransitionTuple],
    layout: &StateLayout,
    a: usize,
    d: usize,
    cfg: &HyperFitConfig,
    rng: &mut R,
) -> Result<HyperFit> {
    if d >= layout.dim() {
        return Err(HipError::invalid(format!("dimension {d} out of range")));
    }
    let (xs, ys): (Vec<State>, Vec<f64>) = tuples
        .iter()
        .filter(|t| t.a == a)
        .map(|t| (t.s.clone(), layout.delta_dim(t, d)))
        .unzip();
    if xs.is_empty() {
        return Err(HipError::invalid(format!("no tuples for action {a}")));
    }
    fit_kernel(&xs, &ys, cfg, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::kernel::gram;
    use crate::linalg::standard_normal;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn recovers_lengthscale_from_generated_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let truth = KernelParams::new(vec![0.5], 1.0, 0.01).unwrap();
        let xs: Vec<State> = (0..200).map(|_| vec![rng.random_range(0.0..6.0)]).collect();
        let mut k = gram(&xs, &truth);
        for i in 0..xs.len() {
            k[(i, i)] += 1e-9;
        }
        let l = k.cholesky().unwrap().l();
        let f = l * standard_normal(xs.len(), &mut rng);
        let ys: Vec<f64> = f
            .iter()
            .map(|v| v + 0.1 * standard_normal(1, &mut rng)[0])
            .collect();
        let fit = fit_kernel(&xs, &ys, &HyperFitConfig::default(), &mut rng).unwrap();
        assert!(!fit.fallback);
        let l = fit.params.lengthscales[0];
        assert!(l > 0.25 && l < 1.0, "lengthscale {l}");
    }

    #[test]
    fn zero_signal_hits_lower_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<State> = (0..30).map(|i| vec![i as f64 * 0.1, (i % 7) as f64]).collect();
        let ys = vec![0.0; 30];
        let cfg = HyperFitConfig::default();
        let fit = fit_kernel(&xs, &ys, &cfg, &mut rng).unwrap();
        let b = hyper_bounds(&xs, &ys, &cfg);
        let sf = fit.params.signal_variance.ln();
        let sn = fit.params.noise_variance.ln();
        assert!((sf - b.lower[2]).abs() < 1e-9, "{sf} vs {}", b.lower[2]);
        assert!((sn - b.lower[3]).abs() < 1e-9, "{sn} vs {}", b.lower[3]);
    }

    #[test]
    fn few_points_fall_back_to_heuristic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<State> = vec![
            vec![0.0, 1.0],
            vec![1.0, 1.0],
            vec![2.0, 3.0],
            vec![3.0, 1.0],
            vec![4.0, 4.0],
        ];
        let ys = [0.1, 0.2, 0.0, -0.3, 0.5];
        let fit = fit_kernel(&xs, &ys, &HyperFitConfig::default(), &mut rng).unwrap();
        assert!(fit.fallback);
        let col0: Vec<f64> = xs.iter().map(|x| x[0]).collect();
        let col1: Vec<f64> = xs.iter().map(|x| x[1]).collect();
        assert!((fit.params.lengthscales[0] - variance(&col0).sqrt()).abs() < 1e-12);
        assert!((fit.params.lengthscales[1] - variance(&col1).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn deterministic_given_seed() {
        let xs: Vec<State> = (0..300).map(|i| vec![(i as f64 * 0.37).sin() * 3.0]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x[0].cos()).collect();
        let cfg = HyperFitConfig::default();
        let a = fit_kernel(&xs, &ys, &cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = fit_kernel(&xs, &ys, &cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn from_tuples_uses_requested_action_and_dim() {
        let layout = StateLayout::euclidean(2);
        let tuples: Vec<TransitionTuple> = (0..40)
            .map(|i| {
                let x = i as f64 * 0.1;
                TransitionTuple::new(vec![x, 0.0], i % 2, vec![x + 0.5 * x.sin(), 1.0], 0.0)
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let fit = fit_hyperparams(&tuples, &layout, 0, 0, &HyperFitConfig::default(), &mut rng).unwrap();
        assert_eq!(fit.params.dim(), 2);
        assert!(fit_hyperparams(&tuples, &layout, 5, 0, &HyperFitConfig::default(), &mut rng).is_err());
    }
}
