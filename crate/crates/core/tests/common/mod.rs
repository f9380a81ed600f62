//! Brute-force Lindblad propagator shared by the oracle and acceptance
//! targets: `ρ(t) = unvec(exp(𝓛 t) vec ρ0)` with `𝓛` assembled here from
//! raw Kronecker products.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use qeraser::dynamics::{Observable, TraceSet};
use qeraser::hilbert::{CompositeSpace, Operator};
use qeraser::linalg::{SparseMatrix, C64};
use std::sync::Arc;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn ladder(dim: usize) -> DMatrix<C64> {
    DMatrix::from_fn(dim, dim, |r, col| if col == r + 1 { c((col as f64).sqrt(), 0.0) } else { c(0.0, 0.0) })
}

pub fn kron_all(factors: &[DMatrix<C64>]) -> DMatrix<C64> {
    factors.iter().skip(1).fold(factors[0].clone(), |acc, f| acc.kronecker(f))
}

/// `a_k` embedded at slot `k` of a product space with the given local dims.
pub fn local(dims: &[usize], k: usize) -> DMatrix<C64> {
    let factors: Vec<_> =
        dims.iter().enumerate().map(|(j, &d)| if j == k { ladder(d) } else { DMatrix::identity(d, d) }).collect();
    kron_all(&factors)
}

/// Column-major vectorized Lindbladian.
pub fn liouvillian(h: &DMatrix<C64>, jumps: &[(DMatrix<C64>, f64)]) -> DMatrix<C64> {
    let d = h.nrows();
    let id = DMatrix::<C64>::identity(d, d);
    let i = c(0.0, 1.0);
    let mut sup = (id.kronecker(h) * (-i)) + (h.transpose().kronecker(&id) * i);
    for (l, g) in jumps {
        let ldl = l.adjoint() * l;
        sup += (l.conjugate().kronecker(l)
            - id.kronecker(&ldl) * c(0.5, 0.0)
            - ldl.transpose().kronecker(&id) * c(0.5, 0.0))
            * c(*g, 0.0);
    }
    sup
}

pub fn propagate(sup: &DMatrix<C64>, rho0: &DMatrix<C64>, t: f64) -> DMatrix<C64> {
    let d = rho0.nrows();
    let v = (sup * c(t, 0.0)).exp() * DVector::from_column_slice(rho0.as_slice());
    DMatrix::from_column_slice(d, d, v.as_slice())
}

/// Hermitian matrix units; their expectations recover every `Re ρ_ij` and
/// `Im ρ_ij`.
pub fn tomography(space: &Arc<CompositeSpace>) -> Vec<Observable> {
    let d = space.dim();
    let mut obs = Vec::new();
    for i in 0..d {
        for j in i..d {
            let op = |entries: Vec<(usize, usize, C64)>| Operator::new(space, SparseMatrix::from_triplets(d, entries)).unwrap();
            if i == j {
                obs.push((format!("d{i}"), op(vec![(i, i, c(1.0, 0.0))])));
            } else {
                obs.push((format!("re{i}_{j}"), op(vec![(i, j, c(1.0, 0.0)), (j, i, c(1.0, 0.0))])));
                obs.push((format!("im{i}_{j}"), op(vec![(i, j, c(0.0, 1.0)), (j, i, c(0.0, -1.0))])));
            }
        }
    }
    obs
}

pub fn expected(rho: &DMatrix<C64>, label: &str) -> f64 {
    let (kind, rest) = label.split_at(if label.starts_with('d') { 1 } else { 2 });
    let idx: Vec<usize> = rest.split('_').map(|s| s.parse().unwrap()).collect();
    match kind {
        "d" => rho[(idx[0], idx[0])].re,
        "re" => 2.0 * rho[(idx[0], idx[1])].re,
        _ => 2.0 * rho[(idx[0], idx[1])].im,
    }
}

/// Largest deviation of the traced `ρ` entries from the oracle.
pub fn worst_deviation(traces: &TraceSet, sup: &DMatrix<C64>, rho0: &DMatrix<C64>) -> f64 {
    let mut worst: f64 = 0.0;
    for (k, &t) in traces.times.iter().enumerate() {
        let exact = propagate(sup, rho0, t);
        for (label, series) in &traces.series {
            let scale = if label.starts_with('d') { 1.0 } else { 0.5 };
            worst = worst.max(scale * (series[k] - expected(&exact, label)).abs());
        }
    }
    worst
}

pub fn op(space: &Arc<CompositeSpace>, m: &DMatrix<C64>) -> Operator {
    Operator::new(space, SparseMatrix::from_dense(m)).unwrap()
}

