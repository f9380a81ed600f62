//! Composite Hilbert spaces of two-level elements and a truncated resonator.
//!
//! Basis indices follow the Kronecker convention: the first mode is the most
//! significant digit, so the global ground state is index 0 and
//! `index = Σ_k occupation_k · stride_k` with the last mode having stride 1.

use crate::error::{Error, Result};
use crate::linalg::{dense_hermiticity_deviation, SparseMatrix, C64, ONE, ZERO};
use nalgebra::{DMatrix, DVector};
use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeKind {
    WorkingQubit,
    HeadQubit,
    Coupler,
    Resonator,
}

impl fmt::Display for ModeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ModeKind::WorkingQubit => "working-qubit",
            ModeKind::HeadQubit => "head-qubit",
            ModeKind::Coupler => "coupler",
            ModeKind::Resonator => "resonator",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeSpec {
    label: String,
    kind: ModeKind,
    dimension: usize,
}

impl ModeSpec {
    pub fn new(label: impl Into<String>, kind: ModeKind, dimension: usize) -> Result<Self> {
        let label = label.into();
        if dimension < 2 {
            return Err(Error::InvalidMode(format!("mode `{label}` has dimension {dimension} < 2")));
        }
        if kind != ModeKind::Resonator && dimension != 2 {
            return Err(Error::InvalidMode(format!(
                "{kind} `{label}` must be two-level, got dimension {dimension}"
            )));
        }
        Ok(Self { label, kind, dimension })
    }

    pub fn two_level(label: impl Into<String>, kind: ModeKind) -> Result<Self> {
        Self::new(label, kind, 2)
    }

    /// A resonator holding Fock states `|0⟩..|cutoff⟩`.
    pub fn resonator(label: impl Into<String>, cutoff: usize) -> Result<Self> {
        Self::new(label, ModeKind::Resonator, cutoff + 1)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn kind(&self) -> ModeKind {
        self.kind
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompositeSpace {
    modes: Vec<ModeSpec>,
    strides: Vec<usize>,
    total_dimension: usize,
}

impl CompositeSpace {
    pub fn new(modes: Vec<ModeSpec>) -> Result<Arc<Self>> {
        if modes.is_empty() {
            return Err(Error::Shape("composite space needs at least one mode".into()));
        }
        for (i, m) in modes.iter().enumerate() {
            if modes[..i].iter().any(|o| o.label == m.label) {
                return Err(Error::InvalidMode(format!("duplicate mode label `{}`", m.label)));
            }
        }
        let mut strides = vec![1; modes.len()];
        for k in (0..modes.len() - 1).rev() {
            strides[k] = strides[k + 1] * modes[k + 1].dimension;
        }
        let total_dimension = strides[0] * modes[0].dimension;
        debug_assert_eq!(total_dimension, modes.iter().map(|m| m.dimension).product::<usize>());
        Ok(Arc::new(Self { modes, strides, total_dimension }))
    }

    pub fn modes(&self) -> &[ModeSpec] {
        &self.modes
    }

    pub fn dim(&self) -> usize {
        self.total_dimension
    }

    pub fn mode_index(&self, label: &str) -> Result<usize> {
        self.modes
            .iter()
            .position(|m| m.label == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn mode(&self, label: &str) -> Result<&ModeSpec> {
        Ok(&self.modes[self.mode_index(label)?])
    }

    pub fn contains(&self, label: &str) -> bool {
        self.modes.iter().any(|m| m.label == label)
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.modes.iter().map(|m| m.label.as_str())
    }

    pub fn stride(&self, mode: usize) -> usize {
        self.strides[mode]
    }

    /// Occupation of `mode` in basis state `index`.
    pub fn occupation(&self, index: usize, mode: usize) -> usize {
        (index / self.strides[mode]) % self.modes[mode].dimension
    }

    pub fn occupations(&self, index: usize) -> Vec<usize> {
        (0..self.modes.len()).map(|k| self.occupation(index, k)).collect()
    }

    pub fn index_of(&self, occupations: &[usize]) -> Result<usize> {
        if occupations.len() != self.modes.len() {
            return Err(Error::Shape(format!(
                "{} occupations for {} modes",
                occupations.len(),
                self.modes.len()
            )));
        }
        let mut index = 0;
        for (k, (&o, m)) in occupations.iter().zip(&self.modes).enumerate() {
            if o >= m.dimension {
                return Err(Error::Shape(format!(
                    "occupation {o} exceeds mode `{}` of dimension {}",
                    m.label, m.dimension
                )));
            }
            index += o * self.strides[k];
        }
        Ok(index)
    }

    /// Total excitation number of a basis state.
    pub fn excitation(&self, index: usize) -> usize {
        (0..self.modes.len()).map(|k| self.occupation(index, k)).sum()
    }
}

/// Bosonic lowering operator truncated to `dimension` levels; σ⁻ for two levels.
pub fn lowering_operator(dimension: usize) -> Result<DMatrix<C64>> {
    if dimension < 2 {
        return Err(Error::InvalidMode(format!("ladder operator needs dimension ≥ 2, got {dimension}")));
    }
    let mut m = DMatrix::zeros(dimension, dimension);
    for i in 1..dimension {
        m[(i - 1, i)] = C64::new((i as f64).sqrt(), 0.0);
    }
    Ok(m)
}

pub fn raising_operator(dimension: usize) -> Result<DMatrix<C64>> {
    Ok(lowering_operator(dimension)?.adjoint())
}

/// An operator on a composite space, stored sparse.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    space: Arc<CompositeSpace>,
    matrix: SparseMatrix,
}

impl Operator {
    pub fn new(space: &Arc<CompositeSpace>, matrix: SparseMatrix) -> Result<Self> {
        if matrix.dim() != space.dim() {
            return Err(Error::Shape(format!(
                "operator side {} does not match space dimension {}",
                matrix.dim(),
                space.dim()
            )));
        }
        Ok(Self { space: Arc::clone(space), matrix })
    }

    pub fn zero(space: &Arc<CompositeSpace>) -> Self {
        Self { space: Arc::clone(space), matrix: SparseMatrix::zeros(space.dim()) }
    }

    pub fn identity(space: &Arc<CompositeSpace>) -> Self {
        Self { space: Arc::clone(space), matrix: SparseMatrix::identity(space.dim()) }
    }

    pub fn space(&self) -> &Arc<CompositeSpace> {
        &self.space
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        self.matrix.to_dense()
    }

    fn check_same_space(&self, other: &Operator) -> Result<()> {
        if self.space != other.space {
            return Err(Error::Shape("operators live on different spaces".into()));
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Operator) -> Result<Operator> {
        self.check_same_space(other)?;
        Ok(Self { space: Arc::clone(&self.space), matrix: self.matrix.add(&other.matrix) })
    }

    pub fn try_mul(&self, other: &Operator) -> Result<Operator> {
        self.check_same_space(other)?;
        Ok(Self { space: Arc::clone(&self.space), matrix: self.matrix.matmul(&other.matrix) })
    }

    pub fn scale(&self, a: impl Into<C64>) -> Operator {
        Self { space: Arc::clone(&self.space), matrix: self.matrix.scale(a.into()) }
    }

    pub fn adjoint(&self) -> Operator {
        Self { space: Arc::clone(&self.space), matrix: self.matrix.adjoint() }
    }

    pub fn commutator(&self, other: &Operator) -> Result<Operator> {
        self.check_same_space(other)?;
        Ok(Self { space: Arc::clone(&self.space), matrix: self.matrix.commutator(&other.matrix) })
    }

    /// `A + A†`
    pub fn plus_adjoint(&self) -> Operator {
        Self { space: Arc::clone(&self.space), matrix: self.matrix.add(&self.matrix.adjoint()) }
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        self.matrix.hermiticity_deviation()
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.max_abs()
    }

    pub fn apply(&self, psi: &StateVector) -> Result<DVector<C64>> {
        if *psi.space() != self.space {
            return Err(Error::Shape("state and operator live on different spaces".into()));
        }
        Ok(DVector::from_vec(self.matrix.mul_vec(psi.amplitudes().as_slice())))
    }

    /// Applies to a raw amplitude vector of matching length.
    pub fn apply_raw(&self, v: &DVector<C64>) -> DVector<C64> {
        DVector::from_vec(self.matrix.mul_vec(v.as_slice()))
    }
}

impl std::ops::Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        self.try_add(rhs).expect("operator spaces differ")
    }
}

impl std::ops::Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        self.try_add(&rhs.scale(-1.0)).expect("operator spaces differ")
    }
}

impl std::ops::Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        self.try_mul(rhs).expect("operator spaces differ")
    }
}

/// Embeds a single-mode operator, with identities on every other mode.
pub fn embed(local: &DMatrix<C64>, mode_label: &str, space: &Arc<CompositeSpace>) -> Result<Operator> {
    let k = space.mode_index(mode_label)?;
    let d = space.modes()[k].dimension();
    if local.nrows() != d || local.ncols() != d {
        return Err(Error::Shape(format!(
            "local operator is {}x{} but mode `{mode_label}` has dimension {d}",
            local.nrows(),
            local.ncols()
        )));
    }
    let stride = space.stride(k);
    let mut triplets = Vec::new();
    for col in 0..space.dim() {
        let o = space.occupation(col, k);
        let base = col - o * stride;
        for r in 0..d {
            let v = local[(r, o)];
            if v != ZERO {
                triplets.push((base + r * stride, col, v));
            }
        }
    }
    Operator::new(space, SparseMatrix::from_triplets(space.dim(), triplets))
}

pub fn lowering(mode_label: &str, space: &Arc<CompositeSpace>) -> Result<Operator> {
    let d = space.mode(mode_label)?.dimension();
    embed(&lowering_operator(d)?, mode_label, space)
}

pub fn raising(mode_label: &str, space: &Arc<CompositeSpace>) -> Result<Operator> {
    Ok(lowering(mode_label, space)?.adjoint())
}

/// `n̂ = σ⁺σ⁻` for two-level modes, `a†a` for the resonator.
pub fn number_operator(mode_label: &str, space: &Arc<CompositeSpace>) -> Result<Operator> {
    let d = space.mode(mode_label)?.dimension();
    let n = raising_operator(d)? * lowering_operator(d)?;
    embed(&n, mode_label, space)
}

/// Sum of every mode's number operator.
pub fn total_number_operator(space: &Arc<CompositeSpace>) -> Operator {
    let diag: Vec<C64> = (0..space.dim()).map(|i| C64::new(space.excitation(i) as f64, 0.0)).collect();
    Operator { space: Arc::clone(space), matrix: SparseMatrix::diagonal(&diag) }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    space: Arc<CompositeSpace>,
    amplitudes: DVector<C64>,
}

impl StateVector {
    pub fn new(space: &Arc<CompositeSpace>, amplitudes: DVector<C64>) -> Result<Self> {
        if amplitudes.len() != space.dim() {
            return Err(Error::Shape(format!(
                "state has {} amplitudes for dimension {}",
                amplitudes.len(),
                space.dim()
            )));
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::Integrity(format!("state norm {norm} is not 1")));
        }
        Ok(Self { space: Arc::clone(space), amplitudes })
    }

    /// Normalizes before validating.
    pub fn normalized(space: &Arc<CompositeSpace>, amplitudes: DVector<C64>) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == 0.0 {
            return Err(Error::Integrity("cannot normalize the zero vector".into()));
        }
        Self::new(space, amplitudes.unscale(norm))
    }

    pub fn basis(space: &Arc<CompositeSpace>, occupations: &[usize]) -> Result<Self> {
        let mut v = DVector::zeros(space.dim());
        v[space.index_of(occupations)?] = ONE;
        Ok(Self { space: Arc::clone(space), amplitudes: v })
    }

    pub fn ground(space: &Arc<CompositeSpace>) -> Self {
        let mut v = DVector::zeros(space.dim());
        v[0] = ONE;
        Self { space: Arc::clone(space), amplitudes: v }
    }

    pub fn space(&self) -> &Arc<CompositeSpace> {
        &self.space
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    /// Highest total excitation with non-negligible weight.
    pub fn max_excitation(&self) -> usize {
        (0..self.space.dim())
            .filter(|&i| self.amplitudes[i].norm_sqr() > 1e-24)
            .map(|i| self.space.excitation(i))
            .max()
            .unwrap_or(0)
    }
}

/// Kronecker product of one local state per mode, in mode order.
pub fn tensor_state(locals: &[DVector<C64>], space: &Arc<CompositeSpace>) -> Result<StateVector> {
    if locals.len() != space.modes().len() {
        return Err(Error::Shape(format!("{} local states for {} modes", locals.len(), space.modes().len())));
    }
    for (v, m) in locals.iter().zip(space.modes()) {
        if v.len() != m.dimension() {
            return Err(Error::Shape(format!(
                "local state of length {} for mode `{}` of dimension {}",
                v.len(),
                m.label(),
                m.dimension()
            )));
        }
    }
    let mut amps = vec![ONE];
    for v in locals {
        amps = amps.iter().flat_map(|a| v.iter().map(move |b| a * b)).collect();
    }
    StateVector::new(space, DVector::from_vec(amps))
}

/// Occupation-number ket `|n⟩` in a `dimension`-level mode.
pub fn fock(dimension: usize, n: usize) -> DVector<C64> {
    let mut v = DVector::zeros(dimension);
    v[n] = ONE;
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    space: Arc<CompositeSpace>,
    matrix: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn new(space: &Arc<CompositeSpace>, matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != space.dim() || matrix.ncols() != space.dim() {
            return Err(Error::Shape(format!(
                "density matrix is {}x{} for dimension {}",
                matrix.nrows(),
                matrix.ncols(),
                space.dim()
            )));
        }
        let herm = dense_hermiticity_deviation(&matrix);
        if herm > 1e-10 {
            return Err(Error::Integrity(format!("density matrix not Hermitian (deviation {herm:e})")));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
            return Err(Error::Integrity(format!("density matrix trace {tr} is not 1")));
        }
        let rho = Self { space: Arc::clone(space), matrix };
        let lowest = rho.min_eigenvalue();
        if lowest < -1e-8 {
            return Err(Error::Integrity(format!("density matrix has eigenvalue {lowest:e} < 0")));
        }
        Ok(rho)
    }

    pub fn from_pure(psi: &StateVector) -> Self {
        let a = psi.amplitudes();
        Self { space: Arc::clone(psi.space()), matrix: a * a.adjoint() }
    }

    pub fn maximally_mixed(space: &Arc<CompositeSpace>) -> Self {
        let d = space.dim();
        Self {
            space: Arc::clone(space),
            matrix: DMatrix::identity(d, d).unscale(d as f64),
        }
    }

    pub fn space(&self) -> &Arc<CompositeSpace> {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        dense_hermiticity_deviation(&self.matrix)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_hermitian_eigenvalue(&self.matrix)
    }
}

/// Smallest eigenvalue of the Hermitian part of `m`.
pub fn min_hermitian_eigenvalue(m: &DMatrix<C64>) -> f64 {
    let h = (m + m.adjoint()).unscale(2.0);
    h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

/// States with total excitation `≤ n_max`, as an ordered list of global basis
/// indices. Every Hamiltonian of the device conserves excitation number and
/// the resonator decay only lowers it, so this subspace is closed.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcitationSector {
    space: Arc<CompositeSpace>,
    n_max: usize,
    indices: Vec<usize>,
}

pub fn excitation_sector(space: &Arc<CompositeSpace>, n_max: usize) -> ExcitationSector {
    let indices = (0..space.dim()).filter(|&i| space.excitation(i) <= n_max).collect();
    ExcitationSector { space: Arc::clone(space), n_max, indices }
}

impl ExcitationSector {
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn rank(&self) -> usize {
        self.indices.len()
    }

    /// Global basis index of each sector basis state, ascending.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn space(&self) -> &Arc<CompositeSpace> {
        &self.space
    }

    pub fn projector(&self) -> Operator {
        let triplets = self.indices.iter().map(|&i| (i, i, ONE));
        Operator {
            space: Arc::clone(&self.space),
            matrix: SparseMatrix::from_triplets(self.space.dim(), triplets),
        }
    }

    pub fn restrict_operator(&self, op: &Operator) -> SparseMatrix {
        op.matrix().restrict(&self.indices)
    }

    /// Sector amplitudes of a state lying inside the sector.
    pub fn restrict_state(&self, psi: &StateVector) -> Result<DVector<C64>> {
        let inside: f64 = self.indices.iter().map(|&i| psi.amplitudes()[i].norm_sqr()).sum();
        if (1.0 - inside).abs() > 1e-12 {
            return Err(Error::Precondition(format!(
                "state has weight {:e} outside the excitation sector n ≤ {}",
                1.0 - inside,
                self.n_max
            )));
        }
        Ok(DVector::from_iterator(self.rank(), self.indices.iter().map(|&i| psi.amplitudes()[i])))
    }

    pub fn restrict_density(&self, rho: &DensityMatrix) -> Result<DMatrix<C64>> {
        let inside: f64 = self.indices.iter().map(|&i| rho.matrix()[(i, i)].re).sum();
        if (1.0 - inside).abs() > 1e-12 {
            return Err(Error::Precondition(format!(
                "density matrix has weight {:e} outside the excitation sector n ≤ {}",
                1.0 - inside,
                self.n_max
            )));
        }
        let r = self.rank();
        Ok(DMatrix::from_fn(r, r, |a, b| rho.matrix()[(self.indices[a], self.indices[b])]))
    }

    pub fn expand_state(&self, amplitudes: &DVector<C64>) -> DVector<C64> {
        let mut v = DVector::zeros(self.space.dim());
        for (a, &i) in self.indices.iter().enumerate() {
            v[i] = amplitudes[a];
        }
        v
    }

    pub fn expand_density(&self, sector_rho: &DMatrix<C64>) -> DMatrix<C64> {
        let d = self.space.dim();
        let mut m = DMatrix::zeros(d, d);
        for (a, &i) in self.indices.iter().enumerate() {
            for (b, &j) in self.indices.iter().enumerate() {
                m[(i, j)] = sector_rho[(a, b)];
            }
        }
        m
    }
}
