//! Device Hamiltonians of the tunable-coupler erase head.
//!
//! Units: ħ = 1, time in ns, every frequency and coupling is an angular
//! frequency in rad/ns. Use [`ghz`] and [`mhz`] to convert ordinary
//! frequencies.
//!
//! Mode order is `q1..qN, c1..cN, q0, r`. Couplers `c1`, `c2` join working
//! qubits `q1`, `q2` to the head qubit `q0`; the chain extensions hang `q3`
//! off `q1` through `c3` and `q4` off `q2` through `c4`.

use crate::dynamics::ModulatedHamiltonian;
use crate::error::{Error, Result};
use crate::hilbert::{
    lowering, number_operator, raising, CompositeSpace, ModeKind, ModeSpec, Operator,
};
use crate::linalg::C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Converts GHz to rad/ns.
pub fn ghz(f: f64) -> f64 {
    2.0 * PI * f
}

/// Converts MHz to rad/ns.
pub fn mhz(f: f64) -> f64 {
    2.0 * PI * f * 1e-3
}

pub const DEFAULT_FOCK_CUTOFF: usize = 3;
pub const HEAD_QUBIT: &str = "q0";
pub const RESONATOR: &str = "r";

pub fn working_label(n: usize) -> String {
    format!("q{n}")
}

pub fn coupler_label(n: usize) -> String {
    format!("c{n}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    pub omega_q: Vec<f64>,
    pub omega_q0: f64,
    pub omega_c: Vec<f64>,
    pub omega_r: f64,
    pub g_qc: f64,
    pub g_p: f64,
    pub g_r: f64,
    pub kappa: f64,
    pub g_qc_add: f64,
    pub fock_cutoff: usize,
}

impl DeviceParams {
    /// Two-qubit device of the selective-reset experiment, both couplers idle.
    pub fn fig1() -> Self {
        let mut p = Self {
            omega_q: vec![ghz(3.0); 2],
            omega_q0: ghz(3.0),
            omega_c: vec![0.0; 2],
            omega_r: ghz(3.0),
            g_qc: mhz(100.0),
            g_p: mhz(3.0),
            g_r: mhz(100.0),
            kappa: mhz(30.0),
            g_qc_add: 0.0,
            fock_cutoff: DEFAULT_FOCK_CUTOFF,
        };
        let idle = p.idle_frequency().expect("g_p > 0");
        p.omega_c = vec![idle; 2];
        p
    }

    /// Two-qubit device of the dark-state experiment (stronger head coupling
    /// and decay), both couplers idle.
    pub fn fig2() -> Self {
        Self { g_r: mhz(120.0), kappa: mhz(150.0), ..Self::fig1() }
    }

    /// Chain devices with three or four working qubits.
    pub fn chain(n_working: usize) -> Result<Self> {
        let omega_c = match n_working {
            3 => vec![ghz(3.1), ghz(2.9), ghz(2.9)],
            4 => vec![ghz(3.1), ghz(2.9), ghz(2.9), ghz(3.1)],
            n => return Err(Error::Capability(format!("chain device needs 3 or 4 working qubits, got {n}"))),
        };
        Ok(Self {
            omega_q: vec![ghz(3.0); n_working],
            omega_c,
            g_qc_add: mhz(90.0),
            ..Self::fig2()
        })
    }

    pub fn n_working(&self) -> usize {
        self.omega_q.len()
    }

    /// Idle coupler frequency `ω_r + g_qc²/g_p`.
    pub fn idle_frequency(&self) -> Result<f64> {
        Ok(self.omega_r - idle_detuning(self)?)
    }

    pub fn coupler_strength(&self, coupler: usize) -> f64 {
        if coupler <= 2 {
            self.g_qc
        } else {
            self.g_qc_add
        }
    }

    /// Soft check `|g_p| ≪ |g_qc|`, reported at a factor of ten.
    pub fn parasitic_is_small(&self) -> bool {
        self.g_p.abs() * 10.0 <= self.g_qc.abs()
    }
}

/// One coupler link: `g (σ_a⁺ + σ_b⁺) σ_c⁻ + g_p σ_a⁺ σ_b⁻ + h.c.`
#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub coupler: usize,
    pub a: String,
    pub b: String,
}

/// Coupler links for `n_working` working qubits.
pub fn links(n_working: usize) -> Vec<Link> {
    (1..=n_working)
        .map(|n| match n {
            1 | 2 => Link { coupler: n, a: HEAD_QUBIT.into(), b: working_label(n) },
            3 => Link { coupler: 3, a: working_label(1), b: working_label(3) },
            _ => Link { coupler: 4, a: working_label(2), b: working_label(4) },
        })
        .collect()
}

pub fn build_space(params: &DeviceParams, n_working: usize) -> Result<Arc<CompositeSpace>> {
    if !(1..=4).contains(&n_working) {
        return Err(Error::Capability(format!("supported devices have 1 to 4 working qubits, got {n_working}")));
    }
    let mut modes = Vec::with_capacity(2 * n_working + 2);
    for n in 1..=n_working {
        modes.push(ModeSpec::two_level(working_label(n), ModeKind::WorkingQubit)?);
    }
    for n in 1..=n_working {
        modes.push(ModeSpec::two_level(coupler_label(n), ModeKind::Coupler)?);
    }
    modes.push(ModeSpec::two_level(HEAD_QUBIT, ModeKind::HeadQubit)?);
    modes.push(ModeSpec::resonator(RESONATOR, params.fock_cutoff)?);
    CompositeSpace::new(modes)
}

/// Working qubits, head qubit and resonator; couplers eliminated.
pub fn build_reduced_space(params: &DeviceParams, n_working: usize) -> Result<Arc<CompositeSpace>> {
    if !(1..=2).contains(&n_working) {
        return Err(Error::Capability(format!(
            "the dispersive model covers 1 or 2 working qubits, got {n_working}"
        )));
    }
    let mut modes = Vec::new();
    for n in 1..=n_working {
        modes.push(ModeSpec::two_level(working_label(n), ModeKind::WorkingQubit)?);
    }
    modes.push(ModeSpec::two_level(HEAD_QUBIT, ModeKind::HeadQubit)?);
    modes.push(ModeSpec::resonator(RESONATOR, params.fock_cutoff)?);
    CompositeSpace::new(modes)
}

fn count_working(space: &CompositeSpace) -> usize {
    space.modes().iter().filter(|m| m.kind() == ModeKind::WorkingQubit).count()
}

fn count_couplers(space: &CompositeSpace) -> usize {
    space.modes().iter().filter(|m| m.kind() == ModeKind::Coupler).count()
}

fn mode_frequency(params: &DeviceParams, label: &str, kind: ModeKind) -> Result<f64> {
    let missing = || Error::Config(format!("no frequency configured for mode `{label}`"));
    match kind {
        ModeKind::HeadQubit => Ok(params.omega_q0),
        ModeKind::Resonator => Ok(params.omega_r),
        ModeKind::WorkingQubit | ModeKind::Coupler => {
            let n: usize = label[1..].parse().map_err(|_| missing())?;
            let list = if kind == ModeKind::WorkingQubit { &params.omega_q } else { &params.omega_c };
            list.get(n - 1).copied().ok_or_else(missing)
        }
    }
}

/// `Σ_k ω_k n̂_k` with each mode measured from `frame` (zero for the lab frame).
pub fn build_bare_in_frame(params: &DeviceParams, space: &Arc<CompositeSpace>, frame: f64) -> Result<Operator> {
    let mut h = Operator::zero(space);
    for m in space.modes() {
        let w = mode_frequency(params, m.label(), m.kind())? - frame;
        if w != 0.0 {
            h = &h + &number_operator(m.label(), space)?.scale(w);
        }
    }
    Ok(h)
}

pub fn build_bare(params: &DeviceParams, space: &Arc<CompositeSpace>) -> Result<Operator> {
    build_bare_in_frame(params, space, 0.0)
}

/// `g_r σ_{q0}⁺ a + h.c.`
pub fn build_head_coupling(params: &DeviceParams, space: &Arc<CompositeSpace>) -> Result<Operator> {
    let hop = &raising(HEAD_QUBIT, space)? * &lowering(RESONATOR, space)?;
    Ok(hop.scale(params.g_r).plus_adjoint())
}

/// The coupler exchange term of one link, `g (σ_a⁺ + σ_b⁺) σ_c⁻`, without
/// its Hermitian conjugate.
fn coupler_exchange(params: &DeviceParams, space: &Arc<CompositeSpace>, link: &Link) -> Result<Operator> {
    let c = coupler_label(link.coupler);
    let sum = &raising(&link.a, space)? + &raising(&link.b, space)?;
    Ok((&sum * &lowering(&c, space)?).scale(params.coupler_strength(link.coupler)))
}

/// `g_p σ_a⁺ σ_b⁻ + h.c.`
fn parasitic(params: &DeviceParams, space: &Arc<CompositeSpace>, link: &Link) -> Result<Operator> {
    let hop = &raising(&link.a, space)? * &lowering(&link.b, space)?;
    Ok(hop.scale(params.g_p).plus_adjoint())
}

/// Qubit–coupler and parasitic qubit–qubit exchange for every link present
/// in `space`.
pub fn build_qubit_coupler(params: &DeviceParams, space: &Arc<CompositeSpace>) -> Result<Operator> {
    let mut h = Operator::zero(space);
    for link in links(count_couplers(space)) {
        h = &h + &coupler_exchange(params, space, &link)?.plus_adjoint();
        h = &h + &parasitic(params, space, &link)?;
    }
    Ok(h)
}

#[derive(Debug, Clone)]
pub struct HamiltonianSet {
    pub space: Arc<CompositeSpace>,
    pub h0: Operator,
    pub hr0: Operator,
    pub hqc: Operator,
    pub total: Operator,
}

pub fn build_hamiltonians(params: &DeviceParams, space: &Arc<CompositeSpace>) -> Result<HamiltonianSet> {
    let h0 = build_bare(params, space)?;
    let hr0 = build_head_coupling(params, space)?;
    let hqc = build_qubit_coupler(params, space)?;
    let total = &(&h0 + &hr0) + &hqc;
    Ok(HamiltonianSet { space: Arc::clone(space), h0, hr0, hqc, total })
}

/// Device Hamiltonian in the frame rotating at `ω_r` for every mode,
/// `H − ω_r N`. Exact because `H` conserves the total excitation number.
pub fn rotating_frame_hamiltonian(params: &DeviceParams, space: &Arc<CompositeSpace>) -> Result<Operator> {
    let bare = build_bare_in_frame(params, space, params.omega_r)?;
    Ok(&(&bare + &build_head_coupling(params, space)?) + &build_qubit_coupler(params, space)?)
}

/// `Δ_idle = −g_qc²/g_p`; the coupler detuning `ω_r − ω_c` at which a branch
/// decouples from the head.
pub fn idle_detuning(params: &DeviceParams) -> Result<f64> {
    idle_detuning_for(params.g_qc, params.g_p)
}

pub fn idle_detuning_for(g: f64, g_p: f64) -> Result<f64> {
    if g_p == 0.0 {
        return Err(Error::DivisionByZero);
    }
    Ok(-g * g / g_p)
}

/// `g_eff = g_p + g_qc²/Δ`
pub fn effective_coupling(delta: f64, params: &DeviceParams) -> Result<f64> {
    if delta == 0.0 {
        return Err(Error::Resonant(delta));
    }
    Ok(params.g_p + params.g_qc * params.g_qc / delta)
}

fn check_resonant(params: &DeviceParams) -> Result<()> {
    let tol = 1e-12 * params.omega_r.abs().max(1.0);
    let off = params
        .omega_q
        .iter()
        .chain(std::iter::once(&params.omega_q0))
        .any(|w| (w - params.omega_r).abs() > tol);
    if off {
        return Err(Error::Precondition(
            "interaction picture requires every qubit resonant with the resonator".into(),
        ));
    }
    Ok(())
}

/// Interaction picture with respect to the bare Hamiltonian, qubits and
/// resonator resonant: coupler terms carry `e^{iΔ_c t}`, `Δ_c = ω_r − ω_c`;
/// parasitic and resonator couplings are static.
pub fn interaction_picture(params: &DeviceParams, space: &Arc<CompositeSpace>) -> Result<ModulatedHamiltonian> {
    check_resonant(params)?;
    let mut constant = build_head_coupling(params, space)?;
    let mut terms = Vec::new();
    for link in links(count_couplers(space)) {
        constant = &constant + &parasitic(params, space, &link)?;
        let omega_c = mode_frequency(params, &coupler_label(link.coupler), ModeKind::Coupler)?;
        terms.push((coupler_exchange(params, space, &link)?, params.omega_r - omega_c));
    }
    Ok(ModulatedHamiltonian::new(constant, terms))
}

pub fn interaction_hamiltonian(params: &DeviceParams, space: &Arc<CompositeSpace>, t: f64) -> Result<Operator> {
    Ok(interaction_picture(params, space)?.at(t))
}

/// Dispersive parameters of the two main branches.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectiveModel {
    /// `ω_r − ω_{c_n}`
    pub delta: Vec<f64>,
    /// `g_p + g_qc²/Δ_n`
    pub g_eff: Vec<f64>,
    /// `g_qc²/Δ_n`
    pub delta_phase: Vec<f64>,
    /// Shifted frequencies of `q_1..q_N` followed by `q_0`.
    pub omega_shifted: Vec<f64>,
}

pub fn effective_model(params: &DeviceParams, n_working: usize) -> Result<EffectiveModel> {
    let mut delta = Vec::new();
    for n in 0..n_working {
        let wc = *params
            .omega_c
            .get(n)
            .ok_or_else(|| Error::Config(format!("no frequency configured for coupler c{}", n + 1)))?;
        let d = params.omega_r - wc;
        if d == 0.0 {
            return Err(Error::Resonant(d));
        }
        if d.abs() < 5.0 * params.g_qc {
            log::warn!("coupler c{} detuning {d:.4} rad/ns is not dispersive (|Δ| < 5 g_qc)", n + 1);
        }
        delta.push(d);
    }
    let g2 = params.g_qc * params.g_qc;
    let delta_phase: Vec<f64> = delta.iter().map(|d| g2 / d).collect();
    let g_eff = delta.iter().map(|&d| effective_coupling(d, params)).collect::<Result<Vec<_>>>()?;
    let mut omega_shifted: Vec<f64> = delta_phase.iter().map(|s| params.omega_r + s).collect();
    omega_shifted.push(params.omega_r + delta_phase.iter().sum::<f64>());
    Ok(EffectiveModel { delta, g_eff, delta_phase, omega_shifted })
}

/// Dispersive effective Hamiltonian on the reduced space,
/// `Σ_n g_eff⁽ⁿ⁾ σ_{q_n}⁺ σ_{q_0}⁻ e^{i(g_qc²/Δ_n)t} + g_r σ_{q_0}⁻ a† + h.c.`
pub fn effective_picture(params: &DeviceParams, reduced: &Arc<CompositeSpace>) -> Result<ModulatedHamiltonian> {
    let n_working = count_working(reduced);
    if count_couplers(reduced) != 0 {
        return Err(Error::Shape("effective Hamiltonian lives on the coupler-free reduced space".into()));
    }
    let model = effective_model(params, n_working)?;
    let constant = build_head_coupling(params, reduced)?;
    let mut terms = Vec::new();
    for n in 0..n_working {
        let hop = &raising(&working_label(n + 1), reduced)? * &lowering(HEAD_QUBIT, reduced)?;
        terms.push((hop.scale(model.g_eff[n]), model.delta_phase[n]));
    }
    Ok(ModulatedHamiltonian::new(constant, terms))
}

pub fn effective_hamiltonian(params: &DeviceParams, reduced: &Arc<CompositeSpace>, t: f64) -> Result<Operator> {
    Ok(effective_picture(params, reduced)?.at(t))
}

/// `e^{iθ}` as a complex number.
pub(crate) fn phase(theta: f64) -> C64 {
    C64::from_polar(1.0, theta)
}
