//! Lindblad and Schrödinger time evolution with observable traces.
//!
//! The master equation is
//! `dρ/dt = −i[H, ρ] + Σ_k γ_k (L_k ρ L_k† − ½{L_k†L_k, ρ})`, integrated with
//! an adaptive Dormand–Prince pair. Evolution can be restricted to an
//! excitation sector, which is exact for excitation-conserving Hamiltonians
//! with lowering-type collapse operators.

pub mod integrator;
mod resolved;

use crate::error::{Error, Result};
use crate::hilbert::{
    excitation_sector, min_hermitian_eigenvalue, total_number_operator, CompositeSpace, DensityMatrix,
    ExcitationSector, Operator, StateVector,
};
use crate::linalg::{SparseMatrix, C64, I, ONE, ZERO};
use crate::model::phase;
use integrator::{integrate, OdeSystem, StepStats, Tolerances};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use std::sync::Arc;

/// Full spaces above this dimension are evolved inside an excitation sector.
pub const DENSE_LIMIT: usize = 4096;

/// `H(t) = H_c + Σ_k (T_k e^{iΔ_k t} + T_k† e^{−iΔ_k t})`
#[derive(Debug, Clone)]
pub struct ModulatedHamiltonian {
    constant: Operator,
    terms: Vec<(Operator, f64)>,
}

impl ModulatedHamiltonian {
    pub fn new(constant: Operator, terms: Vec<(Operator, f64)>) -> Self {
        Self { constant, terms }
    }

    pub fn constant(&self) -> &Operator {
        &self.constant
    }

    pub fn terms(&self) -> &[(Operator, f64)] {
        &self.terms
    }

    pub fn space(&self) -> &Arc<CompositeSpace> {
        self.constant.space()
    }

    pub fn at(&self, t: f64) -> Operator {
        self.terms.iter().fold(self.constant.clone(), |acc, (op, delta)| {
            &acc + &op.scale(phase(delta * t)).plus_adjoint()
        })
    }
}

pub type HamiltonianFn = Arc<dyn Fn(f64) -> Operator + Send + Sync>;

#[derive(Clone)]
pub enum Hamiltonian {
    Constant(Operator),
    Modulated(ModulatedHamiltonian),
    /// Arbitrary `t ↦ H(t)`; rebuilt on every right-hand-side evaluation.
    Function(Arc<CompositeSpace>, HamiltonianFn),
}

impl std::fmt::Debug for Hamiltonian {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Hamiltonian::Constant(h) => f.debug_tuple("Constant").field(h).finish(),
            Hamiltonian::Modulated(h) => f.debug_tuple("Modulated").field(h).finish(),
            Hamiltonian::Function(s, _) => write!(f, "Function(dim = {})", s.dim()),
        }
    }
}

impl From<Operator> for Hamiltonian {
    fn from(h: Operator) -> Self {
        Hamiltonian::Constant(h)
    }
}

impl From<ModulatedHamiltonian> for Hamiltonian {
    fn from(h: ModulatedHamiltonian) -> Self {
        Hamiltonian::Modulated(h)
    }
}

impl Hamiltonian {
    pub fn space(&self) -> &Arc<CompositeSpace> {
        match self {
            Hamiltonian::Constant(h) => h.space(),
            Hamiltonian::Modulated(h) => h.space(),
            Hamiltonian::Function(s, _) => s,
        }
    }

    pub fn at(&self, t: f64) -> Operator {
        match self {
            Hamiltonian::Constant(h) => h.clone(),
            Hamiltonian::Modulated(h) => h.at(t),
            Hamiltonian::Function(_, f) => f(t),
        }
    }

    fn conserves_excitation(&self) -> bool {
        let n = total_number_operator(self.space());
        let commutes = |op: &Operator| op.commutator(&n).map(|c| c.max_abs() < 1e-12).unwrap_or(false);
        match self {
            Hamiltonian::Constant(h) => commutes(h),
            Hamiltonian::Modulated(h) => commutes(h.constant()) && h.terms().iter().all(|(t, _)| commutes(t)),
            Hamiltonian::Function(..) => false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CollapseChannel {
    operator: Operator,
    rate: f64,
}

impl CollapseChannel {
    pub fn new(operator: Operator, rate: f64) -> Result<Self> {
        if !(rate >= 0.0) {
            return Err(Error::Config(format!("collapse rate must be ≥ 0, got {rate}")));
        }
        Ok(Self { operator, rate })
    }

    pub fn operator(&self) -> &Operator {
        &self.operator
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// True when the operator only maps excitation `n` to `n − 1` or lower.
    fn only_lowers(&self) -> bool {
        let s = self.operator.space();
        self.operator.matrix().iter().all(|(r, c, _)| s.excitation(r) < s.excitation(c))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum OutputGrid {
    Uniform(f64),
    Points(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SectorChoice {
    /// Full space up to [`DENSE_LIMIT`], otherwise the initial state's sector.
    Auto,
    Full,
    /// Excitation sector `n ≤ n_max`.
    Max(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvolutionConfig {
    pub t_start: f64,
    pub t_end: f64,
    pub grid: OutputGrid,
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub sector: SectorChoice,
}

impl EvolutionConfig {
    pub fn new(t_end: f64, step: f64) -> Self {
        Self {
            t_start: 0.0,
            t_end,
            grid: OutputGrid::Uniform(step),
            rtol: 1e-8,
            atol: 1e-10,
            max_step: f64::INFINITY,
            sector: SectorChoice::Auto,
        }
    }

    pub fn with_tolerances(mut self, rtol: f64, atol: f64) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self
    }

    pub fn with_sector(mut self, sector: SectorChoice) -> Self {
        self.sector = sector;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > self.t_start) {
            return Err(Error::Config(format!("t_end {} must exceed t_start {}", self.t_end, self.t_start)));
        }
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::Config("max_step must be positive".into()));
        }
        if let OutputGrid::Uniform(step) = self.grid {
            if !(step > 0.0) {
                return Err(Error::Config(format!("grid step must be positive, got {step}")));
            }
        }
        Ok(())
    }

    pub fn times(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let times = match &self.grid {
            OutputGrid::Uniform(step) => {
                let n = ((self.t_end - self.t_start) / step + 1e-9).floor() as usize;
                let mut v: Vec<f64> = (0..=n).map(|k| self.t_start + k as f64 * step).collect();
                if self.t_end - v[n] > 1e-9 * step {
                    v.push(self.t_end);
                }
                v
            }
            OutputGrid::Points(p) => p.clone(),
        };
        let ordered = times.windows(2).all(|w| w[1] > w[0]);
        let inside = times.iter().all(|&t| t >= self.t_start && t <= self.t_end);
        if times.is_empty() || !ordered || !inside {
            return Err(Error::Config("output times must be strictly increasing inside the window".into()));
        }
        Ok(times)
    }

    fn tolerances(&self) -> Tolerances {
        Tolerances { rtol: self.rtol, atol: self.atol, max_step: self.max_step }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub steps: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    /// Largest `|tr ρ − 1|` (or `|‖ψ‖² − 1|`) over accepted steps.
    pub max_trace_deviation: f64,
    /// Largest `‖ρ − ρ†‖_max` removed by re-symmetrization.
    pub max_hermiticity_correction: f64,
    /// Largest per-step restoration of `tr ρ` (block-resolved path) or `‖ψ‖²`.
    pub max_trace_correction: f64,
    pub final_min_eigenvalue: f64,
    /// Largest imaginary residue of a Hermitian-observable expectation.
    pub max_imaginary_residue: f64,
    pub basis_dimension: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceSet {
    pub times: Vec<f64>,
    pub series: Vec<(String, Vec<f64>)>,
    pub trace_deviation: Vec<f64>,
    pub purity: Vec<f64>,
    pub diagnostics: Diagnostics,
}

impl TraceSet {
    pub fn get(&self, label: &str) -> Option<&[f64]> {
        self.series.iter().find(|(l, _)| l == label).map(|(_, v)| v.as_slice())
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.series.iter().map(|(l, _)| l.as_str())
    }

    /// Largest absolute difference between same-labelled series on a shared grid.
    pub fn max_difference(&self, other: &TraceSet) -> Result<f64> {
        if self.times != other.times {
            return Err(Error::Shape("trace sets use different time grids".into()));
        }
        let mut worst: f64 = 0.0;
        for (label, a) in &self.series {
            let b = other
                .get(label)
                .ok_or_else(|| Error::Shape(format!("series `{label}` missing from comparison")))?;
            for (x, y) in a.iter().zip(b) {
                worst = worst.max((x - y).abs());
            }
        }
        Ok(worst)
    }
}

/// Observable with its display label.
pub type Observable = (String, Operator);

/// Operators of a problem expressed in the working basis (full space or sector).
struct Restricted {
    constant: SparseMatrix,
    terms: Vec<(SparseMatrix, SparseMatrix, f64)>,
    function: Option<(HamiltonianFn, Option<ExcitationSector>)>,
    jumps: Vec<(SparseMatrix, f64)>,
    observables: Vec<SparseMatrix>,
}

fn restrict(op: &Operator, sector: Option<&ExcitationSector>) -> SparseMatrix {
    match sector {
        Some(s) => s.restrict_operator(op),
        None => op.matrix().clone(),
    }
}

fn prepare(
    hamiltonian: &Hamiltonian,
    channels: &[CollapseChannel],
    observables: &[Observable],
    sector: Option<&ExcitationSector>,
) -> Restricted {
    let dissipative = channels.iter().fold(None::<SparseMatrix>, |acc, ch| {
        let l = restrict(ch.operator(), sector);
        let ldl = l.adjoint().matmul(&l).scale(C64::new(-0.5 * ch.rate(), 0.0) * I);
        Some(match acc {
            Some(a) => a.add(&ldl),
            None => ldl,
        })
    });
    let (base, terms, function) = match hamiltonian {
        Hamiltonian::Constant(h) => (restrict(h, sector), Vec::new(), None),
        Hamiltonian::Modulated(m) => {
            let terms = m
                .terms()
                .iter()
                .map(|(op, d)| {
                    let t = restrict(op, sector);
                    let td = t.adjoint();
                    (t, td, *d)
                })
                .collect();
            (restrict(m.constant(), sector), terms, None)
        }
        Hamiltonian::Function(space, f) => {
            (SparseMatrix::zeros(sector.map_or(space.dim(), |s| s.rank())), Vec::new(), Some((f.clone(), sector.cloned())))
        }
    };
    let constant = match dissipative {
        Some(d) => base.add(&d),
        None => base,
    };
    Restricted {
        constant,
        terms,
        function,
        jumps: channels
            .iter()
            .filter(|c| c.rate() > 0.0)
            .map(|c| (restrict(c.operator(), sector), c.rate()))
            .collect(),
        observables: observables.iter().map(|(_, o)| restrict(o, sector)).collect(),
    }
}

impl Restricted {
    /// `out += alpha · H_eff(t) · x` where `H_eff = H − (i/2) Σ γ L†L`.
    fn apply_effective(&self, t: f64, alpha: C64, x: &[C64], out: &mut [C64], dense: bool) {
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
        if let Some((f, sector)) = &self.function {
            let h = restrict(&f(t), sector.as_ref());
            apply(&h, alpha, out);
        }
    }

    fn expectations_density(&self, rho: &[C64], n: usize) -> Vec<C64> {
        self.observables
            .iter()
            .map(|o| o.iter().map(|(r, c, v)| v * rho[c + r * n]).sum())
            .collect()
    }

    fn expectations_state(&self, psi: &[C64]) -> Vec<C64> {
        self.observables
            .iter()
            .map(|o| o.iter().map(|(r, c, v)| psi[r].conj() * v * psi[c]).sum())
            .collect()
    }
}

struct MasterSystem<'a> {
    ops: &'a Restricted,
    n: usize,
    scratch: Vec<C64>,
    max_trace_dev: f64,
    max_herm_fix: f64,
}

impl OdeSystem for MasterSystem<'_> {
    fn rhs(&mut self, t: f64, rho: &[C64], out: &mut [C64]) {
        let n = self.n;
        // X = −i H_eff ρ; dρ = X + X† + Σ γ L ρ L†
        self.scratch.fill(ZERO);
        self.ops.apply_effective(t, -I, rho, &mut self.scratch, true);
        for j in 0..n {
            for i in 0..n {
                out[i + j * n] = self.scratch[i + j * n] + self.scratch[j + i * n].conj();
            }
        }
        for (l, rate) in &self.ops.jumps {
            self.scratch.fill(ZERO);
            l.left_mul_acc(ONE, rho, &mut self.scratch);
            l.right_mul_adjoint_acc(C64::new(*rate, 0.0), &self.scratch, out);
        }
    }

    fn after_step(&mut self, t: f64, rho: &mut [C64]) -> Result<bool> {
        let n = self.n;
        let mut worst: f64 = 0.0;
        let mut trace = ZERO;
        for j in 0..n {
            trace += rho[j + j * n];
            for i in 0..=j {
                let a = rho[i + j * n];
                let b = rho[j + i * n];
                let dev = (a - b.conj()).norm();
                if dev > 0.0 {
                    worst = worst.max(dev);
                    let m = (a + b.conj()) * 0.5;
                    rho[i + j * n] = m;
                    rho[j + i * n] = m.conj();
                }
            }
        }
        if worst > 1e-10 {
            log::debug!("re-symmetrized ρ at t = {t:.4} ns (deviation {worst:e})");
        }
        self.max_herm_fix = self.max_herm_fix.max(worst);
        let dev = (trace - ONE).norm();
        self.max_trace_dev = self.max_trace_dev.max(dev);
        if dev > 1e-6 {
            return Err(Error::Integrity(format!("trace drifted to {trace} at t = {t} ns")));
        }
        Ok(worst > 1e-14)
    }
}

struct SchrodingerSystem<'a> {
    ops: &'a Restricted,
    max_norm_dev: f64,
    max_norm_fix: f64,
}

impl OdeSystem for SchrodingerSystem<'_> {
    fn rhs(&mut self, t: f64, psi: &[C64], out: &mut [C64]) {
        out.fill(ZERO);
        self.ops.apply_effective(t, -I, psi, out, false);
    }

    /// Restores `‖ψ‖ = 1`; the explicit pair does not conserve the norm.
    fn after_step(&mut self, t: f64, psi: &mut [C64]) -> Result<bool> {
        let norm2: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
        let dev = (norm2 - 1.0).abs();
        if dev > 1e-6 {
            return Err(Error::Integrity(format!("state norm² drifted to {norm2} at t = {t} ns")));
        }
        self.max_norm_fix = self.max_norm_fix.max(dev);
        if dev > 0.0 {
            let s = norm2.sqrt().recip();
            psi.iter_mut().for_each(|a| *a *= s);
        }
        let after: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
        self.max_norm_dev = self.max_norm_dev.max((after - 1.0).abs());
        Ok(dev > 1e-12)
    }
}

fn check_spaces(space: &Arc<CompositeSpace>, hamiltonian: &Hamiltonian, channels: &[CollapseChannel], observables: &[Observable]) -> Result<()> {
    let same = |s: &Arc<CompositeSpace>| s == space;
    if !same(hamiltonian.space())
        || !channels.iter().all(|c| same(c.operator().space()))
        || !observables.iter().all(|(_, o)| same(o.space()))
    {
        return Err(Error::Shape("initial state, Hamiltonian, channels and observables must share one space".into()));
    }
    Ok(())
}

fn choose_sector(
    space: &Arc<CompositeSpace>,
    choice: SectorChoice,
    initial_excitation: impl FnOnce() -> usize,
    hamiltonian: &Hamiltonian,
    channels: &[CollapseChannel],
) -> Result<Option<ExcitationSector>> {
    let n_max = match choice {
        SectorChoice::Full => return Ok(None),
        SectorChoice::Auto if space.dim() <= DENSE_LIMIT => return Ok(None),
        SectorChoice::Auto => initial_excitation(),
        SectorChoice::Max(n) => n,
    };
    if !hamiltonian.conserves_excitation() {
        return Err(Error::Precondition("sector restriction needs an excitation-conserving Hamiltonian".into()));
    }
    if !channels.iter().all(CollapseChannel::only_lowers) {
        return Err(Error::Precondition("sector restriction needs lowering-type collapse operators".into()));
    }
    Ok(Some(excitation_sector(space, n_max)))
}

fn max_excitation_density(rho: &DensityMatrix) -> usize {
    let s = rho.space();
    (0..s.dim()).filter(|&i| rho.matrix()[(i, i)].re > 1e-14).map(|i| s.excitation(i)).max().unwrap_or(0)
}

/// Lindblad generator applied to `rho`.
pub fn lindblad_rhs(rho: &DensityMatrix, h: &Operator, channels: &[CollapseChannel]) -> Result<DMatrix<C64>> {
    let space = rho.space();
    if h.space() != space || channels.iter().any(|c| c.operator().space() != space) {
        return Err(Error::Shape("density matrix, Hamiltonian and channels must share one space".into()));
    }
    let n = space.dim();
    let r = rho.matrix().as_slice();
    let mut out = vec![ZERO; n * n];
    h.matrix().left_mul_acc(-I, r, &mut out);
    h.matrix().right_mul_acc(I, r, &mut out);
    for ch in channels {
        let l = ch.operator().matrix();
        let ldl = l.adjoint().matmul(l);
        let g = C64::new(ch.rate(), 0.0);
        let mut lr = vec![ZERO; n * n];
        l.left_mul_acc(ONE, r, &mut lr);
        l.right_mul_adjoint_acc(g, &lr, &mut out);
        ldl.left_mul_acc(-g * 0.5, r, &mut out);
        ldl.right_mul_acc(-g * 0.5, r, &mut out);
    }
    Ok(DMatrix::from_vec(n, n, out))
}

fn record(
    values: Vec<C64>,
    index: usize,
    series: &mut [Vec<f64>],
    max_imag: &mut f64,
) -> Result<()> {
    for (k, v) in values.into_iter().enumerate() {
        *max_imag = max_imag.max(v.im.abs());
        if v.im.abs() > 1e-8 {
            return Err(Error::Integrity(format!("expectation has imaginary part {:e}", v.im)));
        }
        series[k][index] = v.re;
    }
    Ok(())
}

fn evolve_master_in(
    sector: Option<&ExcitationSector>,
    rho0: DMatrix<C64>,
    hamiltonian: &Hamiltonian,
    channels: &[CollapseChannel],
    config: &EvolutionConfig,
    observables: &[Observable],
) -> Result<TraceSet> {
    let times = config.times()?;
    let ops = prepare(hamiltonian, channels, observables, sector);
    let n = rho0.nrows();
    let m = times.len();
    let mut series = vec![vec![0.0; m]; observables.len()];
    let mut trace_deviation = vec![0.0; m];
    let mut purity = vec![0.0; m];
    let mut max_imag: f64 = 0.0;

    let mut sys = MasterSystem { ops: &ops, n, scratch: vec![ZERO; n * n], max_trace_dev: 0.0, max_herm_fix: 0.0 };
    let mut final_rho = rho0.clone();
    let stats: StepStats = integrate(&mut sys, config.t_start, rho0.as_slice(), &times, &config.tolerances(), |k, _t, y| {
        record(ops.expectations_density(y, n), k, &mut series, &mut max_imag)?;
        let tr: C64 = (0..n).map(|i| y[i + i * n]).sum();
        trace_deviation[k] = (tr - ONE).norm();
        purity[k] = y.iter().map(|v| v.norm_sqr()).sum();
        if k == m - 1 {
            final_rho.as_mut_slice().copy_from_slice(y);
        }
        Ok(())
    })?;
    let diagnostics = Diagnostics {
        steps: stats.accepted,
        rejected: stats.rejected,
        rhs_evals: stats.rhs_evals,
        max_trace_deviation: sys.max_trace_dev,
        max_hermiticity_correction: sys.max_herm_fix,
        max_trace_correction: 0.0,
        final_min_eigenvalue: min_hermitian_eigenvalue(&final_rho),
        max_imaginary_residue: max_imag,
        basis_dimension: n,
    };
    if let Some(worst) = trace_deviation.iter().copied().reduce(f64::max) {
        if worst > 1e-6 {
            return Err(Error::Integrity(format!("trace deviation {worst:e} on the output grid")));
        }
    }
    Ok(TraceSet {
        times,
        series: observables.iter().map(|(l, _)| l.clone()).zip(series).collect(),
        trace_deviation,
        purity,
        diagnostics,
    })
}

/// Integrates the master equation from `rho0`.
pub fn evolve_master(
    rho0: &DensityMatrix,
    hamiltonian: &Hamiltonian,
    channels: &[CollapseChannel],
    config: &EvolutionConfig,
    observables: &[Observable],
) -> Result<TraceSet> {
    let space = rho0.space();
    check_spaces(space, hamiltonian, channels, observables)?;
    let sector = choose_sector(space, config.sector, || max_excitation_density(rho0), hamiltonian, channels)?;
    let start = match &sector {
        Some(s) => s.restrict_density(rho0)?,
        None => rho0.matrix().clone(),
    };
    evolve_master_in(sector.as_ref(), start, hamiltonian, channels, config, observables)
}

/// Master-equation evolution of the pure initial state `|ψ⟩⟨ψ|`.
///
/// A state of definite excitation number evolved under an
/// excitation-conserving `H` with single-quantum lowering channels is
/// integrated block by block (exact, and far cheaper); `SectorChoice::Full`
/// forces the dense full-space path.
pub fn evolve_master_from_state(
    psi0: &StateVector,
    hamiltonian: &Hamiltonian,
    channels: &[CollapseChannel],
    config: &EvolutionConfig,
    observables: &[Observable],
) -> Result<TraceSet> {
    let space = psi0.space();
    check_spaces(space, hamiltonian, channels, observables)?;
    if let Some(n) = resolved::definite_excitation(psi0) {
        let allowed = match config.sector {
            SectorChoice::Full => false,
            SectorChoice::Max(m) => m >= n,
            SectorChoice::Auto => true,
        };
        if allowed && hamiltonian.conserves_excitation() && resolved::lowers_by_one(channels) {
            return resolved::evolve(psi0, n, hamiltonian, channels, config, observables);
        }
    }
    let sector = choose_sector(space, config.sector, || psi0.max_excitation(), hamiltonian, channels)?;
    let v = match &sector {
        Some(s) => s.restrict_state(psi0)?,
        None => psi0.amplitudes().clone(),
    };
    evolve_master_in(sector.as_ref(), &v * v.adjoint(), hamiltonian, channels, config, observables)
}

/// Closed-system evolution `i dψ/dt = H(t) ψ`.
pub fn evolve_state(
    psi0: &StateVector,
    hamiltonian: &Hamiltonian,
    config: &EvolutionConfig,
    observables: &[Observable],
) -> Result<TraceSet> {
    let space = psi0.space();
    check_spaces(space, hamiltonian, &[], observables)?;
    let sector = choose_sector(space, config.sector, || psi0.max_excitation(), hamiltonian, &[])?;
    let start: DVector<C64> = match &sector {
        Some(s) => s.restrict_state(psi0)?,
        None => psi0.amplitudes().clone(),
    };
    let times = config.times()?;
    let ops = prepare(hamiltonian, &[], observables, sector.as_ref());
    let m = times.len();
    let mut series = vec![vec![0.0; m]; observables.len()];
    let mut trace_deviation = vec![0.0; m];
    let mut max_imag: f64 = 0.0;
    let mut sys = SchrodingerSystem { ops: &ops, max_norm_dev: 0.0, max_norm_fix: 0.0 };
    let stats = integrate(&mut sys, config.t_start, start.as_slice(), &times, &config.tolerances(), |k, _t, y| {
        record(ops.expectations_state(y), k, &mut series, &mut max_imag)?;
        trace_deviation[k] = (y.iter().map(|a| a.norm_sqr()).sum::<f64>() - 1.0).abs();
        Ok(())
    })?;
    if let Some(worst) = trace_deviation.iter().copied().reduce(f64::max) {
        if worst > 1e-6 {
            return Err(Error::Integrity(format!("norm deviation {worst:e} on the output grid")));
        }
    }
    Ok(TraceSet {
        times,
        series: observables.iter().map(|(l, _)| l.clone()).zip(series).collect(),
        trace_deviation,
        purity: vec![1.0; m],
        diagnostics: Diagnostics {
            steps: stats.accepted,
            rejected: stats.rejected,
            rhs_evals: stats.rhs_evals,
            max_trace_deviation: sys.max_norm_dev,
            max_hermiticity_correction: 0.0,
            max_trace_correction: sys.max_norm_fix,
            final_min_eigenvalue: 0.0,
            max_imaginary_residue: max_imag,
            basis_dimension: start.len(),
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub cutoff: usize,
    pub max_difference: f64,
    /// Largest difference of each series, in series order.
    pub per_series: Vec<(String, f64)>,
    pub threshold: f64,
    pub passed: bool,
}

pub const CONVERGENCE_THRESHOLD: f64 = 1e-4;

/// Runs a scenario at `cutoff` and `cutoff + 1` and compares every trace.
pub fn convergence_probe<F>(runner: F, cutoff: usize) -> Result<ConvergenceReport>
where
    F: Fn(usize) -> Result<TraceSet>,
{
    if cutoff < 1 {
        return Err(Error::Config("Fock cutoff must be at least 1".into()));
    }
    let low = runner(cutoff)?;
    let high = runner(cutoff + 1)?;
    let mut per_series = Vec::new();
    for (label, a) in &low.series {
        let b = high
            .get(label)
            .ok_or_else(|| Error::Shape(format!("series `{label}` missing at cutoff {}", cutoff + 1)))?;
        let d = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        per_series.push((label.clone(), d));
    }
    let max_difference = low.max_difference(&high)?;
    Ok(ConvergenceReport {
        cutoff,
        max_difference,
        per_series,
        threshold: CONVERGENCE_THRESHOLD,
        passed: max_difference < CONVERGENCE_THRESHOLD,
    })
}
