//! Small dense linear-algebra helpers shared by the GP and sampler code.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{HipError, Result};

/// Cholesky factor of `mat + jitter * I`.
pub fn cholesky_jittered(
    mut mat: DMatrix<f64>,
    jitter: f64,
    what: &str,
) -> Result<Cholesky<f64, Dyn>> {
    for i in 0..mat.nrows() {
        mat[(i, i)] += jitter;
    }
    Cholesky::new(mat).ok_or_else(|| HipError::numerical(format!("{what} is not positive definite")))
}

pub fn log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
}

pub fn standard_normal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Draw from N(P^-1 h, P^-1) given the information vector `h` and the
/// Cholesky factor of the precision `P = L L^T`.
pub fn sample_information_form<R: Rng + ?Sized>(
    h: &DVector<f64>,
    precision: &Cholesky<f64, Dyn>,
    rng: &mut R,
) -> DVector<f64> {
    let mean = precision.solve(h);
    let z = standard_normal(h.len(), rng);
    // L^T x = z  gives x ~ N(0, P^-1)
    let noise = precision
        .l_dirty()
        .lower_triangle()
        .transpose()
        .solve_upper_triangular(&z)
        .expect("cholesky factor has a positive diagonal");
    mean + noise
}

/// Row-append update of a lower Cholesky factor: given `L` for `A`, returns
/// the factor of `[[A, k], [k^T, kappa]]`.
pub fn cholesky_append(l: &DMatrix<f64>, k: &DVector<f64>, kappa: f64) -> Option<DMatrix<f64>> {
    let n = l.nrows();
    let c = if n == 0 {
        DVector::zeros(0)
    } else {
        l.solve_lower_triangular(k)?
    };
    let d2 = kappa - c.norm_squared();
    if !(d2 > 0.0) {
        return None;
    }
    let mut out = DMatrix::zeros(n + 1, n + 1);
    out.view_mut((0, 0), (n, n)).copy_from(l);
    for j in 0..n {
        out[(n, j)] = c[j];
    }
    out[(n, n)] = d2.sqrt();
    Some(out)
}

/// Solve `L L^T x = b` for a lower-triangular `L`.
pub fn cholesky_solve(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    if l.nrows() == 0 {
        return DVector::zeros(0);
    }
    let y = l.solve_lower_triangular(b).expect("nonsingular factor");
    l.transpose()
        .solve_upper_triangular(&y)
        .expect("nonsingular factor")
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population variance.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn append_matches_full_factorization() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let full = a.clone().cholesky().unwrap().l();
        let mut l = DMatrix::zeros(0, 0);
        for i in 0..3 {
            let k = DVector::from_fn(i, |j, _| a[(j, i)]);
            l = cholesky_append(&l, &k, a[(i, i)]).unwrap();
        }
        assert!((l - full).abs().max() < 1e-12);
    }

    #[test]
    fn information_form_draws_have_right_moments() {
        let p = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let h = DVector::from_vec(vec![1.0, -1.0]);
        let chol = p.clone().cholesky().unwrap();
        let target = chol.solve(&h);
        let cov = p.try_inverse().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 40_000;
        let draws: Vec<_> = (0..n)
            .map(|_| sample_information_form(&h, &chol, &mut rng))
            .collect();
        let m = draws.iter().fold(DVector::zeros(2), |acc, d| acc + d) / n as f64;
        assert!((&m - &target).amax() < 0.02);
        let mut c = DMatrix::zeros(2, 2);
        for d in &draws {
            let e = d - &m;
            c += &e * e.transpose();
        }
        c /= n as f64;
        assert!((c - cov).amax() < 0.03);
    }
}
