//! Support-point representation of the basis functions and the greedy
//! max-reconstruction-error selection of those points.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;

use super::kernel::KernelParams;
use super::regress::noisy_gram;
use crate::error::{HipError, Result};
use crate::linalg::{cholesky_append, cholesky_jittered, cholesky_solve};
use crate::model::{InstanceBatch, State, StateLayout};

fn bits(x: &[f64]) -> Vec<u64> {
    x.iter().map(|v| v.to_bits()).collect()
}

/// Observed states and state differences of one batch under one action.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionData {
    pub xs: Vec<State>,
    /// `ys[d][i]` is the change of dimension `d` for point `i`.
    pub ys: Vec<Vec<f64>>,
}

/// A batch split by action and, when large, subsampled per action.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparedBatch {
    pub id: usize,
    pub actions: Vec<Option<ActionData>>,
}

impl PreparedBatch {
    pub fn new<R: Rng + ?Sized>(
        batch: &InstanceBatch,
        layout: &StateLayout,
        num_actions: usize,
        max_per_action: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if batch.is_empty() {
            return Err(HipError::invalid(format!("batch {} is empty", batch.id)));
        }
        let dim = layout.dim();
        let mut actions = Vec::with_capacity(num_actions);
        for a in 0..num_actions {
            let mut tuples: Vec<_> = batch.for_action(a).collect();
            if tuples.is_empty() {
                actions.push(None);
                continue;
            }
            if tuples.len() > max_per_action {
                let mut idx = sample(rng, tuples.len(), max_per_action).into_vec();
                idx.sort_unstable();
                tuples = idx.into_iter().map(|i| tuples[i]).collect();
            }
            let mut xs = Vec::with_capacity(tuples.len());
            let mut ys = vec![Vec::with_capacity(tuples.len()); dim];
            for t in tuples {
                if t.s.len() != dim || t.s_next.len() != dim {
                    return Err(HipError::invalid(format!(
                        "tuple in batch {} has wrong state dimension",
                        batch.id
                    )));
                }
                xs.push(t.s.clone());
                for (d, y) in layout.delta(&t.s, &t.s_next).into_iter().enumerate() {
                    ys[d].push(y);
                }
            }
            actions.push(Some(ActionData { xs, ys }));
        }
        if let Some(t) = batch.tuples.iter().find(|t| t.a >= num_actions) {
            return Err(HipError::invalid(format!(
                "batch {} contains action {} outside 0..{num_actions}",
                batch.id, t.a
            )));
        }
        Ok(PreparedBatch {
            id: batch.id,
            actions,
        })
    }
}

/// Pseudo-input states shared by every basis function, with one kernel per
/// `(action, output dimension)` row.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportSet {
    pub points: Vec<State>,
    /// Row-major over action then dimension.
    pub kernels: Vec<KernelParams>,
    pub num_actions: usize,
    pub dim: usize,
}

impl SupportSet {
    pub fn new(
        points: Vec<State>,
        kernels: Vec<KernelParams>,
        num_actions: usize,
        dim: usize,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(HipError::invalid("support set needs at least one point"));
        }
        if kernels.len() != num_actions * dim {
            return Err(HipError::invalid(format!(
                "expected {} kernels, got {}",
                num_actions * dim,
                kernels.len()
            )));
        }
        let mut seen = HashSet::new();
        for p in &points {
            if p.len() != dim {
                return Err(HipError::invalid("support point has wrong dimension"));
            }
            if !seen.insert(bits(p)) {
                return Err(HipError::invalid("support points must be distinct"));
            }
        }
        for k in &kernels {
            k.validate()?;
            if k.dim() != dim {
                return Err(HipError::invalid("kernel dimension differs from state dimension"));
            }
        }
        Ok(SupportSet {
            points,
            kernels,
            num_actions,
            dim,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn num_rows(&self) -> usize {
        self.num_actions * self.dim
    }

    pub fn row(&self, a: usize, d: usize) -> usize {
        a * self.dim + d
    }

    pub fn kernel(&self, a: usize, d: usize) -> &KernelParams {
        &self.kernels[self.row(a, d)]
    }
}

#[derive(Clone, Debug)]
pub struct SupportSelection {
    pub support: SupportSet,
    /// Maximum reconstruction error over all observed points after each
    /// support point was added.
    pub max_errors: Vec<f64>,
}

struct Group {
    a: usize,
    offset: usize,
    xs: Vec<State>,
    /// per dimension: targets, precomputed `(K + s I)^-1 y`, and the growing
    /// cross-covariance with the support set
    ys: Vec<Vec<f64>>,
    alpha: Vec<DVector<f64>>,
    cross: Vec<DMatrix<f64>>,
    proj: Vec<Vec<f64>>,
}

/// Greedily grow a support set of `m` observed states. Each step adds the
/// observed state whose value is worst reconstructed when its own batch is
/// squeezed through the current support set.
pub fn select_support_points(
    batches: &[PreparedBatch],
    kernels: &[KernelParams],
    num_actions: usize,
    dim: usize,
    m: usize,
) -> Result<SupportSelection> {
    if m == 0 {
        return Err(HipError::invalid("support budget must be at least 1"));
    }
    if kernels.len() != num_actions * dim {
        return Err(HipError::invalid("one kernel per (action, dimension) required"));
    }
    let mut groups = Vec::new();
    let mut candidates: Vec<State> = Vec::new();
    for b in batches {
        for (a, data) in b.actions.iter().enumerate() {
            let Some(data) = data else { continue };
            let offset = candidates.len();
            candidates.extend(data.xs.iter().cloned());
            let mut alpha = Vec::with_capacity(dim);
            for d in 0..dim {
                let p = &kernels[a * dim + d];
                let k = noisy_gram(&data.xs, p);
                let chol = cholesky_jittered(k, 0.0, "batch covariance in support selection")?;
                alpha.push(chol.solve(&DVector::from_column_slice(&data.ys[d])));
            }
            groups.push(Group {
                a,
                offset,
                xs: data.xs.clone(),
                ys: data.ys.clone(),
                alpha,
                cross: vec![DMatrix::zeros(data.xs.len(), m); dim],
                proj: vec![Vec::with_capacity(m); dim],
            });
        }
    }
    let distinct: HashSet<Vec<u64>> = candidates.iter().map(|c| bits(c)).collect();
    if m > distinct.len() {
        return Err(HipError::invalid(format!(
            "support budget {m} exceeds the {} distinct observed states",
            distinct.len()
        )));
    }

    // seed: largest |delta| anywhere, lowest index on ties
    let mut point_err = vec![0.0f64; candidates.len()];
    for g in &groups {
        for ys in &g.ys {
            for (i, y) in ys.iter().enumerate() {
                point_err[g.offset + i] = point_err[g.offset + i].max(y.abs());
            }
        }
    }

    let rows = num_actions * dim;
    let mut chol_rows: Vec<DMatrix<f64>> = vec![DMatrix::zeros(0, 0); rows];
    let mut chosen: Vec<usize> = Vec::with_capacity(m);
    let mut chosen_bits: HashSet<Vec<u64>> = HashSet::new();
    let mut max_errors = Vec::with_capacity(m);

    while chosen.len() < m {
        let mut best: Option<usize> = None;
        for (i, e) in point_err.iter().enumerate() {
            if chosen_bits.contains(&bits(&candidates[i])) {
                continue;
            }
            match best {
                Some(j) if point_err[j] >= *e => {}
                _ => best = Some(i),
            }
        }
        let new_idx = best.expect("budget checked against distinct states");
        let x_new = candidates[new_idx].clone();
        let j = chosen.len();

        for (r, l) in chol_rows.iter_mut().enumerate() {
            let p = &kernels[r];
            let kvec = DVector::from_fn(j, |i, _| p.k(&candidates[chosen[i]], &x_new));
            *l = cholesky_append(l, &kvec, p.signal_variance + p.diagonal_noise()).ok_or_else(|| {
                HipError::numerical("support Gram matrix lost positive definiteness")
            })?;
        }
        chosen.push(new_idx);
        chosen_bits.insert(bits(&x_new));

        point_err.iter_mut().for_each(|e| *e = 0.0);
        let mut max_err = 0.0f64;
        for g in groups.iter_mut() {
            for d in 0..dim {
                let p = &kernels[g.a * dim + d];
                let mut col = g.cross[d].column_mut(j);
                for (i, x) in g.xs.iter().enumerate() {
                    col[i] = p.k(x, &x_new);
                }
                let pv = col.dot(&g.alpha[d]);
                g.proj[d].push(pv);
                let beta = cholesky_solve(&chol_rows[g.a * dim + d], &DVector::from_column_slice(&g.proj[d]));
                let recon = g.cross[d].columns(0, j + 1) * beta;
                for (i, y) in g.ys[d].iter().enumerate() {
                    let e = (recon[i] - y).abs();
                    let slot = &mut point_err[g.offset + i];
                    if e > *slot {
                        *slot = e;
                    }
                    max_err = max_err.max(e);
                }
            }
        }
        max_errors.push(max_err);
    }

    let points = chosen.iter().map(|&i| candidates[i].clone()).collect();
    Ok(SupportSelection {
        support: SupportSet::new(points, kernels.to_vec(), num_actions, dim)?,
        max_errors,
    })
}
