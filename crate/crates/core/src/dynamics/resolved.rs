//! Excitation-resolved master equation.
//!
//! With an excitation-conserving `H` and collapse operators that lower the
//! excitation number by exactly one, a pure initial state of definite
//! excitation `n` stays block diagonal: `ρ = ψψ† ⊕ ρ_{n−1} ⊕ … ⊕ ρ_0`. The
//! top block never receives population, so it is carried as the unnormalised
//! no-jump amplitude `ψ(t)`; each lower block is fed by the one above it.

use super::integrator::{integrate, OdeSystem};
use super::{record, CollapseChannel, Diagnostics, EvolutionConfig, Hamiltonian, Observable, TraceSet};
use crate::error::{Error, Result};
use crate::hilbert::{min_hermitian_eigenvalue, CompositeSpace, StateVector};
use crate::linalg::{SparseMatrix, C64, I, ZERO};
use crate::model::phase;
use nalgebra::DMatrix;
use std::sync::Arc;

/// Rectangular CSR block of a lowering operator, rows in block `k`,
/// columns in block `k + 1`.
struct Transition {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    entries: Vec<(usize, C64)>,
    rate: f64,
}

impl Transition {
    fn new(op: &SparseMatrix, rows: &[usize], cols: &[usize], position: &[usize], rate: f64) -> Self {
        let mut indptr = vec![0];
        let mut entries = Vec::new();
        for &r in rows {
            for (c, v) in op.row(r) {
                if position[c] != usize::MAX && cols.binary_search(&c).is_ok() {
                    entries.push((position[c], v));
                }
            }
            indptr.push(entries.len());
        }
        Self { rows: rows.len(), cols: cols.len(), indptr, entries, rate }
    }

    fn row(&self, r: usize) -> &[(usize, C64)] {
        &self.entries[self.indptr[r]..self.indptr[r + 1]]
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        for (r, yr) in y.iter_mut().enumerate() {
            *yr = self.row(r).iter().map(|&(c, v)| v * x[c]).sum();
        }
    }

    /// `out += γ (Lψ)(Lψ)†`
    fn feed_pure(&self, psi: &[C64], u: &mut [C64], out: &mut [C64]) {
        self.apply(psi, u);
        let m = self.rows;
        for j in 0..m {
            let b = u[j].conj() * self.rate;
            if b == ZERO {
                continue;
            }
            for (d, a) in out[j * m..(j + 1) * m].iter_mut().zip(u.iter()) {
                *d += a * b;
            }
        }
    }

    /// `out += γ L ρ L†`, with `scratch` holding `L ρ` (rows × cols).
    fn feed_mixed(&self, rho: &[C64], scratch: &mut [C64], out: &mut [C64]) {
        let (m, n) = (self.rows, self.cols);
        for j in 0..n {
            self.apply(&rho[j * n..(j + 1) * n], &mut scratch[j * m..(j + 1) * m]);
        }
        for i in 0..m {
            for &(j, v) in self.row(i) {
                let a = v.conj() * self.rate;
                let src = &scratch[j * m..(j + 1) * m];
                for (d, s) in out[i * m..(i + 1) * m].iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
    }
}

/// Operators of one excitation block.
struct Block {
    dim: usize,
    offset: usize,
    constant: SparseMatrix,
    terms: Vec<(SparseMatrix, SparseMatrix, f64)>,
    observables: Vec<SparseMatrix>,
    /// Lowering transitions feeding this block from the block above.
    feeds: Vec<Transition>,
}

impl Block {
    fn apply(&self, t: f64, alpha: C64, x: &[C64], out: &mut [C64], dense: bool) {
        let apply = |m: &SparseMatrix, a: C64, out: &mut [C64]| {
            if dense {
                m.left_mul_acc(a, x, out)
            } else {
                m.mul_vec_acc(a, x, out)
            }
        };
        apply(&self.constant, alpha, out);
        for (op, op_dag, delta) in &self.terms {
            let ph = phase(delta * t);
            apply(op, alpha * ph, out);
            apply(op_dag, alpha * ph.conj(), out);
        }
    }
}

/// Excitation number of a pure state, if it is definite.
pub(super) fn definite_excitation(psi: &StateVector) -> Option<usize> {
    let s = psi.space();
    let mut found = None;
    for (i, a) in psi.amplitudes().iter().enumerate() {
        if a.norm_sqr() > 1e-24 {
            let k = s.excitation(i);
            match found {
                None => found = Some(k),
                Some(f) if f != k => return None,
                _ => {}
            }
        }
    }
    found
}

/// True when every channel lowers the excitation number by exactly one.
pub(super) fn lowers_by_one(channels: &[CollapseChannel]) -> bool {
    channels.iter().all(|ch| {
        let s = ch.operator().space();
        ch.operator().matrix().iter().all(|(r, c, _)| s.excitation(r) + 1 == s.excitation(c))
    })
}

fn build_blocks(
    space: &Arc<CompositeSpace>,
    n: usize,
    hamiltonian: &Hamiltonian,
    channels: &[CollapseChannel],
    observables: &[Observable],
) -> Result<Vec<Block>> {
    let mut dissipative = SparseMatrix::zeros(space.dim());
    for ch in channels {
        let l = ch.operator().matrix();
        dissipative = dissipative.add(&l.adjoint().matmul(l).scale(C64::new(-0.5 * ch.rate(), 0.0) * I));
    }
    let (constant, terms): (SparseMatrix, Vec<(&SparseMatrix, f64)>) = match hamiltonian {
        Hamiltonian::Constant(h) => (h.matrix().add(&dissipative), Vec::new()),
        Hamiltonian::Modulated(m) => (
            m.constant().matrix().add(&dissipative),
            m.terms().iter().map(|(op, d)| (op.matrix(), *d)).collect(),
        ),
        Hamiltonian::Function(..) => {
            return Err(Error::Precondition("resolved evolution needs a constant or modulated Hamiltonian".into()))
        }
    };
    let members: Vec<Vec<usize>> =
        (0..=n).map(|k| (0..space.dim()).filter(|&i| space.excitation(i) == k).collect()).collect();
    let mut position = vec![usize::MAX; space.dim()];
    for m in &members {
        for (p, &i) in m.iter().enumerate() {
            position[i] = p;
        }
    }
    let mut blocks = Vec::with_capacity(n + 1);
    let mut offset = 0;
    for k in (0..=n).rev() {
        let keep = &members[k];
        let dim = keep.len();
        let feeds = if k < n {
            channels
                .iter()
                .filter(|c| c.rate() > 0.0)
                .map(|c| Transition::new(c.operator().matrix(), keep, &members[k + 1], &position, c.rate()))
                .collect()
        } else {
            Vec::new()
        };
        blocks.push(Block {
            dim,
            offset,
            constant: constant.restrict(keep),
            terms: terms.iter().map(|(op, d)| (op.restrict(keep), op.adjoint().restrict(keep), *d)).collect(),
            observables: observables.iter().map(|(_, o)| o.matrix().restrict(keep)).collect(),
            feeds,
        });
        offset += if k == n { dim } else { dim * dim };
    }
    Ok(blocks)
}

/// Blocks ordered from the top excitation down; block 0 is the pure part.
struct ResolvedSystem<'a> {
    blocks: &'a [Block],
    scratch: Vec<C64>,
    feed_scratch: Vec<C64>,
    max_trace_dev: f64,
    max_herm_fix: f64,
    max_trace_fix: f64,
}

fn slice(b: &Block, top: bool) -> std::ops::Range<usize> {
    let len = if top { b.dim } else { b.dim * b.dim };
    b.offset..b.offset + len
}

impl OdeSystem for ResolvedSystem<'_> {
    fn rhs(&mut self, t: f64, y: &[C64], out: &mut [C64]) {
        let top = &self.blocks[0];
        let psi = &y[slice(top, true)];
        {
            let dst = &mut out[slice(top, true)];
            dst.fill(ZERO);
            top.apply(t, -I, psi, dst, false);
        }
        for idx in 1..self.blocks.len() {
            let b = &self.blocks[idx];
            let m = b.dim;
            let rho = &y[slice(b, false)];
            let x = &mut self.scratch[..m * m];
            x.fill(ZERO);
            b.apply(t, -I, rho, x, true);
            let dst = &mut out[slice(b, false)];
            for j in 0..m {
                for i in 0..m {
                    dst[i + j * m] = x[i + j * m] + x[j + i * m].conj();
                }
            }
            let above = &self.blocks[idx - 1];
            for tr in &b.feeds {
                if idx == 1 {
                    tr.feed_pure(psi, &mut self.feed_scratch[..m], dst);
                } else {
                    tr.feed_mixed(&y[slice(above, false)], &mut self.feed_scratch[..m * above.dim], dst);
                }
            }
        }
    }

    /// Re-symmetrizes the mixed blocks, then rescales `ψ` so that
    /// `‖ψ‖² = 1 − Σ tr ρ_k`. The lower-block traces evolve linearly and are
    /// conserved by the integrator to rounding; `‖ψ‖²` is quadratic and is not.
    fn after_step(&mut self, t: f64, y: &mut [C64]) -> Result<bool> {
        let mut worst: f64 = 0.0;
        let mut lower = 0.0;
        for b in &self.blocks[1..] {
            let m = b.dim;
            let rho = &mut y[slice(b, false)];
            for j in 0..m {
                lower += rho[j + j * m].re;
                for i in 0..=j {
                    let a = rho[i + j * m];
                    let c = rho[j + i * m];
                    let dev = (a - c.conj()).norm();
                    if dev > 0.0 {
                        worst = worst.max(dev);
                        let mean = (a + c.conj()) * 0.5;
                        rho[i + j * m] = mean;
                        rho[j + i * m] = mean.conj();
                    }
                }
            }
        }
        self.max_herm_fix = self.max_herm_fix.max(worst);
        let psi = &mut y[slice(&self.blocks[0], true)];
        let norm2: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
        let target = 1.0 - lower;
        let fix = (norm2 - target).abs();
        if fix > 1e-6 || target < -1e-12 {
            return Err(Error::Integrity(format!("trace drifted to {} at t = {t} ns", norm2 + lower)));
        }
        if fix > 0.0 && norm2 > 0.0 {
            let scale = (target.max(0.0) / norm2).sqrt();
            psi.iter_mut().for_each(|a| *a *= scale);
        }
        self.max_trace_fix = self.max_trace_fix.max(fix);
        let after: f64 = psi.iter().map(|a| a.norm_sqr()).sum::<f64>() + lower;
        self.max_trace_dev = self.max_trace_dev.max((after - 1.0).abs());
        if fix > 1e-10 {
            log::debug!("restored trace at t = {t:.4} ns (correction {fix:e})");
        }
        Ok(worst > 1e-14 || fix > 1e-12)
    }
}

struct Moments {
    values: Vec<C64>,
    trace: f64,
    purity: f64,
}

fn moments(blocks: &[Block], y: &[C64], n_obs: usize) -> Moments {
    let psi = &y[slice(&blocks[0], true)];
    let norm2: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
    let mut values: Vec<C64> = blocks[0]
        .observables
        .iter()
        .map(|o| o.iter().map(|(r, c, v)| psi[r].conj() * v * psi[c]).sum())
        .collect();
    values.resize(n_obs, ZERO);
    let mut trace = norm2;
    let mut purity = norm2 * norm2;
    for b in &blocks[1..] {
        let m = b.dim;
        let rho = &y[slice(b, false)];
        for (val, o) in values.iter_mut().zip(&b.observables) {
            *val += o.iter().map(|(r, c, v)| v * rho[c + r * m]).sum::<C64>();
        }
        trace += (0..m).map(|i| rho[i + i * m].re).sum::<f64>();
        purity += rho.iter().map(|v| v.norm_sqr()).sum::<f64>();
    }
    Moments { values, trace, purity }
}

pub(super) fn evolve(
    psi0: &StateVector,
    n: usize,
    hamiltonian: &Hamiltonian,
    channels: &[CollapseChannel],
    config: &EvolutionConfig,
    observables: &[Observable],
) -> Result<TraceSet> {
    let times = config.times()?;
    let space = psi0.space();
    let blocks = build_blocks(space, n, hamiltonian, channels, observables)?;
    let total = blocks.last().map_or(0, |b| b.offset + if blocks.len() == 1 { b.dim } else { b.dim * b.dim });
    let mut y0 = vec![ZERO; total];
    {
        let members: Vec<usize> = (0..space.dim()).filter(|&i| space.excitation(i) == n).collect();
        for (p, &i) in members.iter().enumerate() {
            y0[p] = psi0.amplitudes()[i];
        }
    }
    let widest = blocks.iter().map(|b| b.dim).max().unwrap_or(0);
    let m = times.len();
    let mut series = vec![vec![0.0; m]; observables.len()];
    let mut trace_deviation = vec![0.0; m];
    let mut purity = vec![0.0; m];
    let mut max_imag: f64 = 0.0;
    let mut final_state = y0.clone();
    let mut sys = ResolvedSystem {
        blocks: &blocks,
        scratch: vec![ZERO; widest * widest],
        feed_scratch: vec![ZERO; widest * widest],
        max_trace_dev: 0.0,
        max_herm_fix: 0.0,
        max_trace_fix: 0.0,
    };
    let stats = integrate(&mut sys, config.t_start, &y0, &times, &config.tolerances(), |k, _t, y| {
        let mo = moments(&blocks, y, observables.len());
        record(mo.values, k, &mut series, &mut max_imag)?;
        trace_deviation[k] = (mo.trace - 1.0).abs();
        purity[k] = mo.purity;
        if k == m - 1 {
            final_state.copy_from_slice(y);
        }
        Ok(())
    })?;
    if let Some(worst) = trace_deviation.iter().copied().reduce(f64::max) {
        if worst > 1e-6 {
            return Err(Error::Integrity(format!("trace deviation {worst:e} on the output grid")));
        }
    }
    let top = &blocks[0];
    let norm2: f64 = final_state[slice(top, true)].iter().map(|a| a.norm_sqr()).sum();
    let mut min_eig = if top.dim > 1 { 0.0 } else { norm2 };
    for b in &blocks[1..] {
        let rho = DMatrix::from_column_slice(b.dim, b.dim, &final_state[slice(b, false)]);
        min_eig = min_eig.min(min_hermitian_eigenvalue(&rho));
    }
    Ok(TraceSet {
        times,
        series: observables.iter().map(|(l, _)| l.clone()).zip(series).collect(),
        trace_deviation,
        purity,
        diagnostics: Diagnostics {
            steps: stats.accepted,
            rejected: stats.rejected,
            rhs_evals: stats.rhs_evals,
            max_trace_deviation: sys.max_trace_dev,
            max_hermiticity_correction: sys.max_herm_fix,
            max_trace_correction: sys.max_trace_fix,
            final_min_eigenvalue: min_eig,
            max_imaginary_residue: max_imag,
            basis_dimension: blocks.iter().map(|b| b.dim).sum(),
        },
    })
}
