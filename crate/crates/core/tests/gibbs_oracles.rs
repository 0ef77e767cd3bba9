use hipmdp::gibbs::{
    basis_posterior, filter_log_odds, propose_new_features, sample_basis, sweep,
    update_weight_means, weight_mean_posterior, weight_posterior, GibbsConfig, GibbsProblem,
    GibbsState,
};
use hipmdp::gp::{KernelParams, ProjectedBatch, SupportSet};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

struct Fixture {
    support: SupportSet,
    batches: Vec<ProjectedBatch>,
    z: Vec<Vec<bool>>,
    f: Vec<Vec<DVector<f64>>>,
    w: Vec<Vec<f64>>,
    mu: Vec<f64>,
}

impl Fixture {
    fn problem(&self) -> GibbsProblem {
        GibbsProblem::new(&self.batches, &self.support).unwrap()
    }

    fn state(&self, problem: &GibbsProblem) -> GibbsState {
        GibbsState::from_parts(problem, self.z.clone(), self.f.clone(), self.w.clone(), self.mu.clone())
            .unwrap()
    }

    /// Prior covariance of a basis vector in `row`, as the sampler defines it.
    fn prior_cov(&self, row: usize) -> DMatrix<f64> {
        let p = &self.support.kernels[row];
        let pts = &self.support.points;
        let n = pts.len();
        DMatrix::from_fn(n, n, |i, j| p.k(&pts[i], &pts[j]) + if i == j { p.jitter() } else { 0.0 })
    }

    fn present(&self, row: usize) -> Vec<usize> {
        (0..self.batches.len()).filter(|&b| self.batches[b].slots[row].is_some()).collect()
    }
}

/// Random problem with 2 actions x 1 or 2 dimensions, up to 4 instances, up
/// to 3 features and up to 10 support points. Some instances miss action 1.
fn random_fixture(seed: u64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = rng.random_range(1..=2);
    let actions = 2;
    let rows = actions * dim;
    let m = rng.random_range(3..=10);
    let nb = rng.random_range(2..=4);
    let kf = rng.random_range(1..=3);
    let points: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..dim).map(|d| i as f64 * 0.37 + d as f64 * 0.11 + rng.random_range(-0.1..0.1)).collect())
        .collect();
    let kernels: Vec<KernelParams> = (0..rows)
        .map(|_| {
            KernelParams::new(
                (0..dim).map(|_| rng.random_range(0.3..1.5)).collect(),
                rng.random_range(0.5..2.0),
                rng.random_range(0.01..0.3),
            )
            .unwrap()
        })
        .collect();
    let support = SupportSet::new(points, kernels, actions, dim).unwrap();
    let batches: Vec<ProjectedBatch> = (0..nb)
        .map(|b| ProjectedBatch {
            id: b,
            slots: (0..rows)
                .map(|row| {
                    // instance 0 always has every row so each row has data
                    let missing = b > 0 && row >= dim && rng.random_bool(0.3);
                    (!missing).then(|| DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0)))
                })
                .collect(),
        })
        .collect();
    let mut z = vec![vec![true; rows]];
    for _ in 1..kf {
        let mut col: Vec<bool> = (0..rows).map(|_| rng.random_bool(0.6)).collect();
        if !col.iter().any(|&c| c) {
            col[0] = true;
        }
        z.push(col);
    }
    let f = (0..kf)
        .map(|k| {
            (0..rows)
                .map(|row| {
                    if z[k][row] {
                        DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0))
                    } else {
                        DVector::zeros(m)
                    }
                })
                .collect()
        })
        .collect();
    let w = (0..nb)
        .map(|_| {
            let mut wb = vec![1.0];
            wb.extend((1..kf).map(|_| rng.random_range(-2.0..2.0)));
            wb
        })
        .collect();
    let mu = (0..kf).map(|_| rng.random_range(-1.0..1.0)).collect();
    Fixture { support, batches, z, f, w, mu }
}

fn gauss_logpdf(x: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let n = x.len() as f64;
    let inv = cov.clone().try_inverse().unwrap();
    -0.5 * ((x.transpose() * inv * x)[0] + cov.determinant().ln() + n * LN_2PI)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

/// Dense conditioning over the stacked system `Delta = (W (x) I) f + eps`.
fn dense_basis_posterior(fx: &Fixture, row: usize) -> (DVector<f64>, DMatrix<f64>) {
    let active: Vec<usize> = (0..fx.z.len()).filter(|&k| fx.z[k][row]).collect();
    let present = fx.present(row);
    let m = fx.support.len();
    let (q, nb) = (active.len(), present.len());
    let s2 = fx.support.kernels[row].noise_variance;
    let kinv = fx.prior_cov(row).try_inverse().unwrap();
    let mut prec = DMatrix::zeros(q * m, q * m);
    for a in 0..q {
        prec.view_mut((a * m, a * m), (m, m)).copy_from(&kinv);
    }
    let mut wbig = DMatrix::zeros(nb * m, q * m);
    let mut y = DVector::zeros(nb * m);
    for (i, &b) in present.iter().enumerate() {
        for (a, &k) in active.iter().enumerate() {
            for j in 0..m {
                wbig[(i * m + j, a * m + j)] = fx.w[b][k];
            }
        }
        y.rows_mut(i * m, m).copy_from(fx.batches[b].slots[row].as_ref().unwrap());
    }
    prec += wbig.transpose() * &wbig / s2;
    let cov = prec.try_inverse().unwrap();
    let mean = &cov * wbig.transpose() * y / s2;
    (mean, cov)
}

/// Ridge regression on the stacked support values of every row `b` observes,
/// each row weighted by its own noise precision.
fn dense_weight_posterior(fx: &Fixture, b: usize, sigma_w: f64) -> (DVector<f64>, DMatrix<f64>) {
    let q = fx.z.len() - 1;
    let m = fx.support.len();
    let rows: Vec<usize> = (0..fx.support.num_rows()).filter(|&r| fx.batches[b].slots[r].is_some()).collect();
    let n = rows.len() * m;
    let mut f = DMatrix::zeros(n, q);
    let mut r = DVector::zeros(n);
    let mut prec_noise = DMatrix::zeros(n, n);
    for (i, &row) in rows.iter().enumerate() {
        let resid = fx.batches[b].slots[row].as_ref().unwrap() - &fx.f[0][row];
        r.rows_mut(i * m, m).copy_from(&resid);
        for k in 1..=q {
            if fx.z[k][row] {
                f.view_mut((i * m, k - 1), (m, 1)).copy_from(&fx.f[k][row]);
            }
        }
        for j in 0..m {
            prec_noise[(i * m + j, i * m + j)] = 1.0 / fx.support.kernels[row].noise_variance;
        }
    }
    let s2w = sigma_w * sigma_w;
    let prec = DMatrix::identity(q, q) / s2w + f.transpose() * &prec_noise * &f;
    let cov = prec.try_inverse().unwrap();
    let mu = DVector::from_fn(q, |i, _| fx.mu[i + 1]);
    let mean = &cov * (mu / s2w + f.transpose() * prec_noise * r);
    (mean, cov)
}

/// Dense log-odds. `collapse` integrates every active basis function of the
/// row out; otherwise the other features' basis values are conditioned on.
fn dense_log_odds(fx: &Fixture, k: usize, row: usize, collapse: bool) -> f64 {
    let present = fx.present(row);
    let m = fx.support.len();
    let nb = present.len();
    let s2 = fx.support.kernels[row].noise_variance;
    let mut e = DVector::zeros(nb * m);
    for (i, &b) in present.iter().enumerate() {
        let mut r = fx.batches[b].slots[row].clone().unwrap();
        for k2 in 0..fx.z.len() {
            if !collapse && k2 != k && fx.z[k2][row] {
                r -= &fx.f[k2][row] * fx.w[b][k2];
            }
        }
        e.rows_mut(i * m, m).copy_from(&r);
    }
    let kron = |feats: &[usize]| {
        let mut c = DMatrix::identity(nb * m, nb * m) * s2;
        for &k2 in feats {
            let wk = DVector::from_fn(nb, |i, _| fx.w[present[i]][k2]);
            c += (&wk * wk.transpose()).kronecker(&fx.prior_cov(row));
        }
        c
    };
    let rest: Vec<usize> = if collapse {
        (0..fx.z.len()).filter(|&k2| k2 != k && fx.z[k2][row]).collect()
    } else {
        Vec::new()
    };
    let mut with = rest.clone();
    with.push(k);
    let ll1 = gauss_logpdf(&e, &kron(&with));
    let ll0 = gauss_logpdf(&e, &kron(&rest));
    let others = (0..fx.z[k].len()).filter(|&r| r != row && fx.z[k][r]).count() as f64;
    let n = fx.z[k].len() as f64;
    (others / (n - others)).ln() + ll1 - ll0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn basis_posterior_matches_dense_oracle(seed in any::<u64>()) {
        let fx = random_fixture(seed);
        let problem = fx.problem();
        let state = fx.state(&problem);
        for row in 0..problem.num_rows() {
            let got = basis_posterior(&problem, &state, row).unwrap();
            let (mean, cov) = dense_basis_posterior(&fx, row);
            prop_assert!((&got.mean - &mean).amax() <= 1e-6 * (1.0 + mean.amax()));
            prop_assert!((&got.cov - &cov).amax() <= 1e-6 * (1.0 + cov.amax()));
        }
    }

    #[test]
    fn weight_posterior_matches_ridge_oracle(seed in any::<u64>()) {
        let fx = random_fixture(seed);
        prop_assume!(fx.z.len() > 1);
        let problem = fx.problem();
        let state = fx.state(&problem);
        for b in 0..problem.num_instances() {
            let got = weight_posterior(&problem, &state, b, 1.7).unwrap();
            let (mean, cov) = dense_weight_posterior(&fx, b, 1.7);
            prop_assert!((&got.mean - &mean).amax() <= 1e-8 * (1.0 + mean.amax()));
            prop_assert!((&got.cov - &cov).amax() <= 1e-8 * (1.0 + cov.amax()));
        }
    }

    #[test]
    fn filter_log_odds_match_dense_density(seed in any::<u64>()) {
        let fx = random_fixture(seed);
        let problem = fx.problem();
        let state = fx.state(&problem);
        for k in 1..fx.z.len() {
            for row in 0..problem.num_rows() {
                for collapse in [false, true] {
                    let cfg = GibbsConfig { collapse_basis: collapse, ..GibbsConfig::default() };
                    let others = (0..problem.num_rows()).filter(|&r| r != row && fx.z[k][r]).count();
                    if others == 0 {
                        prop_assert!(filter_log_odds(&problem, &state, k, row, &cfg).is_err());
                        continue;
                    }
                    let got = filter_log_odds(&problem, &state, k, row, &cfg).unwrap();
                    let want = dense_log_odds(&fx, k, row, collapse);
                    prop_assert!(close(got, want, 1e-8), "{got} vs {want}");
                    let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
                    prop_assert!((sig(got) - sig(want)).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn sweeps_preserve_invariants(seed in any::<u64>()) {
        let fx = random_fixture(seed);
        let problem = fx.problem();
        let mut state = fx.state(&problem);
        let cfg = GibbsConfig { alpha: 3.0, num_weight_samples: 5, ..GibbsConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..5 {
            sweep(&problem, &mut state, &cfg, &mut rng).unwrap();
            prop_assert!(state.check_invariants(&problem).is_ok());
        }
    }
}

#[test]
fn conjugate_mean_update_matches_textbook_formula() {
    let post = weight_mean_posterior(&[1.0, 2.0, -0.5], 2.0, 3.0);
    assert!((post.variance - 36.0 / 31.0).abs() < 1e-12);
    assert!((post.mean - 22.5 / 31.0).abs() < 1e-12);
}

#[test]
fn conjugate_mean_update_without_data_is_the_hyperprior() {
    let post = weight_mean_posterior(&[], 4.0, 1.5);
    assert_eq!(post.mean, 0.0);
    assert!((post.variance - 2.25).abs() < 1e-15);
}

#[test]
fn conjugate_mean_update_concentrates_on_constant_weights() {
    let post = weight_mean_posterior(&vec![0.7; 100_000], 4.0, 4.0);
    assert!((post.mean - 0.7).abs() < 1e-4);
    assert!(post.variance < 2e-4);
}

/// Two instances, two actions, one dimension; instance 1 never takes action 1.
fn sparse_fixture(noise: f64, delta0: DVector<f64>, delta1: DVector<f64>) -> Fixture {
    let m = delta0.len();
    let p = KernelParams::new(vec![0.8], 1.0, noise).unwrap();
    let support = SupportSet::new(
        (0..m).map(|i| vec![i as f64 * 0.5]).collect(),
        vec![p.clone(), p],
        2,
        1,
    )
    .unwrap();
    let batches = vec![
        ProjectedBatch { id: 0, slots: vec![Some(delta0.clone()), Some(delta0)] },
        ProjectedBatch { id: 1, slots: vec![Some(delta1), None] },
    ];
    Fixture {
        support,
        batches,
        z: vec![vec![true, true]],
        f: vec![vec![DVector::zeros(m), DVector::zeros(m)]],
        w: vec![vec![1.0], vec![1.0]],
        mu: vec![1.0],
    }
}

#[test]
fn noiseless_single_instance_identifies_the_basis() {
    let delta = DVector::from_fn(5, |i, _| (i as f64 * 0.5).sin());
    let fx = sparse_fixture(1e-12, delta.clone(), delta.clone());
    let problem = fx.problem();
    let post = basis_posterior(&problem, &fx.state(&problem), 1).unwrap();
    assert!((&post.mean - &delta).amax() < 1e-4);
}

#[test]
fn identical_instances_pool_to_the_shared_delta() {
    let delta = DVector::from_fn(5, |i, _| 0.3 * i as f64 - 0.4);
    let fx = sparse_fixture(1e-12, delta.clone(), delta.clone());
    let problem = fx.problem();
    let post = basis_posterior(&problem, &fx.state(&problem), 0).unwrap();
    assert!((&post.mean - &delta).amax() < 1e-4);
}

fn two_feature_fixture(noise: f64, w2: [f64; 2]) -> Fixture {
    let mut fx = sparse_fixture(
        noise,
        DVector::from_fn(5, |i, _| (i as f64).cos()),
        DVector::from_fn(5, |i, _| 0.5 * (i as f64).sin()),
    );
    fx.z.push(vec![true, false]);
    fx.f = vec![
        vec![DVector::from_fn(5, |i, _| 0.1 * i as f64), DVector::from_fn(5, |i, _| 0.2 * i as f64)],
        vec![DVector::from_fn(5, |i, _| 1.0 - 0.3 * i as f64), DVector::zeros(5)],
    ];
    fx.w = vec![vec![1.0, w2[0]], vec![1.0, w2[1]]];
    fx.mu = vec![1.0, 0.25];
    fx
}

#[test]
fn flat_weight_prior_gives_least_squares() {
    let fx = two_feature_fixture(0.1, [0.3, -0.2]);
    let problem = fx.problem();
    let post = weight_posterior(&problem, &fx.state(&problem), 0, 1e7).unwrap();
    let x = &fx.f[1][0];
    let r = fx.batches[0].slots[0].as_ref().unwrap() - &fx.f[0][0];
    let ols = x.dot(&r) / x.dot(x);
    assert!((post.mean[0] - ols).abs() < 1e-8);
}

#[test]
fn weight_without_visible_feature_stays_at_prior() {
    // instance 1 only observes row 0; make feature 2 live in row 1 only
    let mut fx = two_feature_fixture(0.1, [0.3, -0.2]);
    fx.z[1] = vec![false, true];
    fx.f[1] = vec![DVector::zeros(5), DVector::from_fn(5, |i, _| i as f64)];
    let problem = fx.problem();
    let post = weight_posterior(&problem, &fx.state(&problem), 1, 4.0).unwrap();
    assert!((post.mean[0] - 0.25).abs() < 1e-14);
    assert!((post.cov[(0, 0)] - 16.0).abs() < 1e-12);
}

#[test]
fn zero_weights_leave_the_filter_at_its_prior() {
    let mut fx = random_fixture(5);
    while fx.z.len() < 2 || fx.z[1].iter().filter(|&&c| c).count() < 2 {
        fx = random_fixture(rand::random());
    }
    for wb in &mut fx.w {
        wb[1] = 0.0;
    }
    let problem = fx.problem();
    let state = fx.state(&problem);
    let row = (0..problem.num_rows()).find(|&r| fx.z[1][r]).unwrap();
    let cfg = GibbsConfig::default();
    let prior_only = GibbsConfig { ignore_likelihood: true, ..GibbsConfig::default() };
    let with = filter_log_odds(&problem, &state, 1, row, &cfg).unwrap();
    let without = filter_log_odds(&problem, &state, 1, row, &prior_only).unwrap();
    assert!((with - without).abs() < 1e-9);
}

#[test]
fn perfect_fit_switches_the_filter_on() {
    // two instances, one row per dimension; residual of row 1 is w2 (x) g
    let m = 8;
    let p = KernelParams::new(vec![1.0, 1.0], 1.0, 1e-6).unwrap();
    let support =
        SupportSet::new((0..m).map(|i| vec![i as f64 * 0.4, 0.0]).collect(), vec![p.clone(), p], 1, 2).unwrap();
    let g = DVector::from_fn(m, |i, _| (i as f64 * 0.4).sin());
    let w2 = [1.5, -0.8];
    let batches: Vec<ProjectedBatch> = (0..2)
        .map(|b| ProjectedBatch { id: b, slots: vec![Some(&g * w2[b]), Some(&g * w2[b])] })
        .collect();
    let problem = GibbsProblem::new(&batches, &support).unwrap();
    let zero = DVector::zeros(m);
    let state = GibbsState::from_parts(
        &problem,
        vec![vec![true, true], vec![true, false]],
        vec![vec![zero.clone(), zero.clone()], vec![g.clone(), zero]],
        vec![vec![1.0, w2[0]], vec![1.0, w2[1]]],
        vec![1.0, 0.0],
    )
    .unwrap();
    let lo = filter_log_odds(&problem, &state, 1, 1, &GibbsConfig::default()).unwrap();
    assert!(lo > 50.0, "{lo}");
}

fn single_row_problem(resid_scale: f64, seed: u64) -> (GibbsProblem, GibbsState) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = 10;
    let p = KernelParams::new(vec![1.0], 1.0, 0.01).unwrap();
    let support = SupportSet::new((0..m).map(|i| vec![i as f64 * 0.5]).collect(), vec![p], 1, 1).unwrap();
    let g = DVector::from_fn(m, |i, _| (i as f64 * 0.5).sin() + 0.1 * rng.random_range(-1.0..1.0));
    let w = [1.0, -2.0, 0.5];
    let batches: Vec<ProjectedBatch> = (0..3)
        .map(|b| ProjectedBatch { id: b, slots: vec![Some(&g * (w[b] * resid_scale))] })
        .collect();
    let problem = GibbsProblem::new(&batches, &support).unwrap();
    let state = GibbsState::from_parts(&problem, vec![vec![true]], vec![vec![DVector::zeros(m)]], vec![vec![1.0]; 3], vec![1.0]).unwrap();
    (problem, state)
}

#[test]
fn strong_rank_one_residual_is_adopted() {
    let cfg = GibbsConfig { alpha: 5.0, ..GibbsConfig::default() };
    let accepted = (0..20)
        .filter(|&seed| {
            let (problem, mut state) = single_row_problem(3.0, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            propose_new_features(&problem, &mut state, 0, &cfg, &mut rng).unwrap() && state.num_features() > 1
        })
        .count();
    assert!(accepted >= 19, "{accepted}/20");
}

#[test]
fn nothing_to_explain_means_no_new_features() {
    let cfg = GibbsConfig { alpha: 5.0, ..GibbsConfig::default() };
    for seed in 0..20 {
        let (problem, mut state) = single_row_problem(0.0, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        propose_new_features(&problem, &mut state, 0, &cfg, &mut rng).unwrap();
        assert_eq!(state.num_features(), 1);
    }
}

#[test]
fn zero_concentration_never_proposes() {
    let cfg = GibbsConfig { alpha: 0.0, ..GibbsConfig::default() };
    let (problem, mut state) = single_row_problem(3.0, 1);
    let before = state.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        assert!(!propose_new_features(&problem, &mut state, 0, &cfg, &mut rng).unwrap());
    }
    assert_eq!(state, before);
}

#[test]
fn prior_only_chain_has_poisson_alpha_features_per_row() {
    // two rows: one action, two dimensions
    let m = 3;
    let p = KernelParams::new(vec![1.0, 1.0], 1.0, 0.1).unwrap();
    let support = SupportSet::new((0..m).map(|i| vec![i as f64, 0.0]).collect(), vec![p.clone(), p], 1, 2).unwrap();
    let batches: Vec<ProjectedBatch> = (0..2)
        .map(|b| ProjectedBatch { id: b, slots: vec![Some(DVector::zeros(m)), Some(DVector::zeros(m))] })
        .collect();
    let problem = GibbsProblem::new(&batches, &support).unwrap();
    let mut state = hipmdp::gibbs::initial_state(&problem);
    let cfg = GibbsConfig { alpha: 2.0, num_weight_samples: 1, ignore_likelihood: true, ..GibbsConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let sweeps = 10_000;
    let burn = 200;
    let mut total = 0usize;
    for it in 0..sweeps + burn {
        sweep(&problem, &mut state, &cfg, &mut rng).unwrap();
        if it >= burn {
            total += (1..state.num_features()).map(|k| state.count(k)).sum::<usize>();
        }
    }
    let per_row = total as f64 / (sweeps * problem.num_rows()) as f64;
    assert!((per_row - 2.0).abs() < 0.2, "mean active features per row {per_row}");
}

#[test]
fn weight_means_are_drawn_from_the_conjugate_posterior() {
    let fx = two_feature_fixture(0.1, [2.0, 4.0]);
    let problem = fx.problem();
    let mut state = fx.state(&problem);
    let cfg = GibbsConfig { sigma_w: 1.0, sigma_w0: 10.0, ..GibbsConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 20_000;
    let mut acc = 0.0;
    for _ in 0..n {
        let posts = update_weight_means(&mut state, &cfg, &mut rng);
        assert_eq!(posts.len(), 1);
        acc += state.weight_mean(1);
    }
    let want = weight_mean_posterior(&[2.0, 4.0], 1.0, 10.0);
    assert!((acc / n as f64 - want.mean).abs() < 4.0 * (want.variance / n as f64).sqrt());
}

#[test]
fn basis_draws_have_the_posterior_mean() {
    let fx = random_fixture(77);
    let problem = fx.problem();
    let mut state = fx.state(&problem);
    let post = basis_posterior(&problem, &state, 0).unwrap();
    let active: Vec<usize> = (0..fx.z.len()).filter(|&k| fx.z[k][0]).collect();
    let m = problem.support_len();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 4000;
    let mut acc = DVector::zeros(post.mean.len());
    for _ in 0..n {
        sample_basis(&problem, &mut state, 0, &mut rng).unwrap();
        for (i, &k) in active.iter().enumerate() {
            let fk = state.basis(&problem, k, 0);
            let mut view = acc.rows_mut(i * m, m);
            view += &fk;
        }
    }
    acc /= n as f64;
    for i in 0..acc.len() {
        let se = (post.cov[(i, i)] / n as f64).sqrt();
        assert!((acc[i] - post.mean[i]).abs() < 5.0 * se + 1e-12, "coordinate {i}");
    }
}
