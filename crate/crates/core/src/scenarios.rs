//! Scripted reset experiments on the erase-head device.
//!
//! Every scenario integrates the master equation in the frame rotating at
//! `ω_r`, restricted to the excitation sector of the initial state. Both
//! choices are exact: the device conserves excitation number and the only
//! collapse operator lowers it.

use crate::analysis::{bell_state, reset_time, CrossingMode, ResetReport, DEFAULT_THRESHOLD};
use crate::dynamics::{
    evolve_master_from_state, CollapseChannel, EvolutionConfig, Hamiltonian, Observable, OutputGrid,
    SectorChoice, TraceSet,
};
use crate::error::{Error, Result};
use crate::hilbert::{lowering, number_operator, CompositeSpace, StateVector};
use crate::model::{
    build_reduced_space, build_space, coupler_label, effective_picture, ghz, idle_detuning_for,
    rotating_frame_hamiltonian, working_label, DeviceParams, HEAD_QUBIT, RESONATOR,
};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Coupler frequency during an active reset, 3.1 GHz.
pub const RESET_FREQUENCY_GHZ: f64 = 3.1;
/// Second coupler of the detuned dark-state experiment, 2.9 GHz.
pub const DETUNED_FREQUENCY_GHZ: f64 = 2.9;

pub const SELECTIVE_WINDOW_NS: f64 = 600.0;
pub const DARK_WINDOW_NS: f64 = 200.0;
pub const SCALING_WINDOW_NS: f64 = 3000.0;
pub const EFFECTIVE_WINDOW_NS: f64 = 300.0;
/// Window of the detuned dark-state frequency sweep.
pub const SWEEP_WINDOW_NS: f64 = 500.0;

const GRID_STEP_NS: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    /// Listed modes in the given Fock states, all others in the ground state.
    Occupations(Vec<(String, usize)>),
    /// `(|10⟩ + e^{iφ}|01⟩)/√2` on `q1, q2`.
    Bell { phi: f64 },
}

impl InitialState {
    /// Every working qubit excited.
    pub fn all_excited(n_working: usize) -> Self {
        InitialState::Occupations((1..=n_working).map(|n| (working_label(n), 1)).collect())
    }

    pub fn ground() -> Self {
        InitialState::Occupations(Vec::new())
    }

    pub fn build(&self, space: &Arc<CompositeSpace>) -> Result<StateVector> {
        match self {
            InitialState::Bell { phi } => bell_state(space, *phi),
            InitialState::Occupations(list) => {
                let mut occ = vec![0; space.modes().len()];
                for (label, n) in list {
                    let k = space.mode_index(label)?;
                    if *n >= space.modes()[k].dimension() {
                        return Err(Error::Config(format!(
                            "occupation {n} of `{label}` exceeds its dimension {}",
                            space.modes()[k].dimension()
                        )));
                    }
                    occ[k] = *n;
                }
                StateVector::basis(space, &occ)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplerSetting {
    /// Frequency where the branch decouples, `ω_r + g²/g_p`.
    Idle,
    /// Angular frequency in rad/ns.
    Frequency(f64),
}

impl CouplerSetting {
    pub fn ghz(f: f64) -> Self {
        CouplerSetting::Frequency(ghz(f))
    }
}

/// Resolves coupler settings to angular frequencies.
pub fn resolve_couplers(params: &DeviceParams, settings: &[CouplerSetting]) -> Result<Vec<f64>> {
    settings
        .iter()
        .enumerate()
        .map(|(k, s)| match s {
            CouplerSetting::Frequency(w) => Ok(*w),
            CouplerSetting::Idle => Ok(params.omega_r - idle_detuning_for(params.coupler_strength(k + 1), params.g_p)?),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub id: String,
    pub params: DeviceParams,
    pub n_working: usize,
    pub initial: InitialState,
    pub couplers: Vec<CouplerSetting>,
    pub evolution: EvolutionConfig,
    /// Mode labels whose populations are traced.
    pub observables: Vec<String>,
    /// Qubits whose reset is measured.
    pub targets: Vec<String>,
    pub threshold: f64,
    pub crossing: CrossingMode,
    /// Failing to reset is an error for the caller.
    pub mandatory: bool,
}

impl ScenarioConfig {
    /// Defaults: every mode observed, every working qubit targeted, all
    /// couplers idle, 0.5 ns output grid.
    pub fn new(id: impl Into<String>, params: DeviceParams, n_working: usize, t_end: f64) -> Self {
        let mut observables: Vec<String> = (1..=n_working).map(working_label).collect();
        observables.extend((1..=n_working).map(coupler_label));
        observables.push(HEAD_QUBIT.into());
        observables.push(RESONATOR.into());
        Self {
            id: id.into(),
            params,
            n_working,
            initial: InitialState::all_excited(n_working),
            couplers: vec![CouplerSetting::Idle; n_working],
            evolution: EvolutionConfig::new(t_end, GRID_STEP_NS),
            observables,
            targets: (1..=n_working).map(working_label).collect(),
            threshold: DEFAULT_THRESHOLD,
            crossing: CrossingMode::Sustained,
            mandatory: false,
        }
    }

    /// Device parameters with the coupler settings applied.
    pub fn resolved_params(&self) -> Result<DeviceParams> {
        if self.couplers.len() != self.n_working {
            return Err(Error::Config(format!(
                "{} coupler settings given for {} working qubits",
                self.couplers.len(),
                self.n_working
            )));
        }
        if self.params.omega_q.len() < self.n_working {
            return Err(Error::Config(format!(
                "{} qubit frequencies given for {} working qubits",
                self.params.omega_q.len(),
                self.n_working
            )));
        }
        let omega_c = resolve_couplers(&self.params, &self.couplers)?;
        Ok(DeviceParams { omega_c, ..self.params.clone() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedCoupler {
    pub coupler: String,
    pub setting: String,
    pub omega_rad_ns: f64,
    pub frequency_ghz: f64,
}

/// Device parameters in the units of the configuration file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NaturalUnits {
    pub omega_q_ghz: Vec<f64>,
    pub omega_q0_ghz: f64,
    pub omega_c_ghz: Vec<f64>,
    pub omega_r_ghz: f64,
    pub g_qc_mhz: f64,
    pub g_p_mhz: f64,
    pub g_r_mhz: f64,
    pub kappa_mhz: f64,
    pub g_qc_add_mhz: f64,
}

impl NaturalUnits {
    pub fn from_params(p: &DeviceParams) -> Self {
        let to_ghz = |w: f64| w / (2.0 * PI);
        let to_mhz = |w: f64| w / (2.0 * PI) * 1e3;
        Self {
            omega_q_ghz: p.omega_q.iter().copied().map(to_ghz).collect(),
            omega_q0_ghz: to_ghz(p.omega_q0),
            omega_c_ghz: p.omega_c.iter().copied().map(to_ghz).collect(),
            omega_r_ghz: to_ghz(p.omega_r),
            g_qc_mhz: to_mhz(p.g_qc),
            g_p_mhz: to_mhz(p.g_p),
            g_r_mhz: to_mhz(p.g_r),
            kappa_mhz: to_mhz(p.kappa),
            g_qc_add_mhz: to_mhz(p.g_qc_add),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub code_version: String,
    pub frame: String,
    pub n_working: usize,
    pub fock_cutoff: usize,
    pub params_rad_ns: DeviceParams,
    pub params_natural: NaturalUnits,
    pub couplers: Vec<ResolvedCoupler>,
    pub initial: InitialState,
    pub evolution: EvolutionConfig,
    pub sector_n_max: usize,
    pub basis_dimension: usize,
}

/// Population bookkeeping of a dark-state run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trapping {
    pub max_head_population: f64,
    pub max_resonator_population: f64,
    /// Largest `|Σ_{q1,q2,c1,c2} ⟨n̂⟩ − 1|`.
    pub max_branch_deviation: f64,
}

impl Trapping {
    pub fn from_traces(traces: &TraceSet) -> Result<Self> {
        let get = |l: &str| traces.get(l).ok_or_else(|| Error::Config(format!("trapping needs a `{l}` trace")));
        let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
        let (q1, q2, c1, c2) = (get("q1")?, get("q2")?, get("c1")?, get("c2")?);
        let max_branch_deviation =
            (0..q1.len()).map(|k| (q1[k] + q2[k] + c1[k] + c2[k] - 1.0).abs()).fold(0.0, f64::max);
        Ok(Self {
            max_head_population: max(get(HEAD_QUBIT)?),
            max_resonator_population: max(get(RESONATOR)?),
            max_branch_deviation,
        })
    }

    pub fn is_trapped(&self) -> bool {
        self.max_head_population < 1e-8 && self.max_resonator_population < 1e-8 && self.max_branch_deviation < 1e-6
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioResult {
    pub id: String,
    pub traces: TraceSet,
    pub reset: ResetReport,
    pub trapping: Option<Trapping>,
    pub provenance: Provenance,
}

impl ScenarioResult {
    pub fn final_population(&self, label: &str) -> Option<f64> {
        self.traces.get(label).and_then(|v| v.last().copied())
    }
}

/// Integrates one scenario.
pub fn run(config: &ScenarioConfig) -> Result<ScenarioResult> {
    let params = config.resolved_params()?;
    let space = build_space(&params, config.n_working)?;
    let psi0 = config.initial.build(&space)?;
    let n_max = psi0.max_excitation();
    let h = rotating_frame_hamiltonian(&params, &space)?;
    let channel = CollapseChannel::new(lowering(RESONATOR, &space)?, params.kappa)?;
    let observables = config
        .observables
        .iter()
        .map(|l| Ok((l.clone(), number_operator(l, &space)?)))
        .collect::<Result<Vec<Observable>>>()?;
    for t in &config.targets {
        if !config.observables.contains(t) {
            return Err(Error::Config(format!("reset target `{t}` is not among the observables")));
        }
    }
    let evolution = config.evolution.clone().with_sector(SectorChoice::Max(n_max));
    log::info!("scenario {}: {} modes, sector n ≤ {n_max}", config.id, space.modes().len());
    let traces = evolve_master_from_state(&psi0, &Hamiltonian::Constant(h), &[channel], &evolution, &observables)?;
    let targets: Vec<&str> = config.targets.iter().map(String::as_str).collect();
    let reset = reset_time(&traces, &targets, config.threshold, config.crossing)?;
    let couplers = config
        .couplers
        .iter()
        .zip(&params.omega_c)
        .enumerate()
        .map(|(k, (s, &w))| ResolvedCoupler {
            coupler: coupler_label(k + 1),
            setting: match s {
                CouplerSetting::Idle => "idle".into(),
                CouplerSetting::Frequency(_) => "explicit".into(),
            },
            omega_rad_ns: w,
            frequency_ghz: w / (2.0 * PI),
        })
        .collect();
    let provenance = Provenance {
        code_version: env!("CARGO_PKG_VERSION").into(),
        frame: "rotating at omega_r".into(),
        n_working: config.n_working,
        fock_cutoff: params.fock_cutoff,
        params_natural: NaturalUnits::from_params(&params),
        params_rad_ns: params,
        couplers,
        initial: config.initial.clone(),
        evolution,
        sector_n_max: n_max,
        basis_dimension: traces.diagnostics.basis_dimension,
    };
    Ok(ScenarioResult { id: config.id.clone(), traces, reset, trapping: None, provenance })
}

fn two_qubit(params: &DeviceParams) -> Result<()> {
    if params.omega_q.len() < 2 {
        return Err(Error::Config("this experiment needs a two-qubit device".into()));
    }
    Ok(())
}

/// Reset of one qubit with the other branch parked at idle, starting from
/// every working qubit excited.
pub fn selective_reset_config(params: &DeviceParams, target: &str) -> Result<ScenarioConfig> {
    let n = params.n_working();
    let k = (1..=n)
        .find(|&k| working_label(k) == target)
        .ok_or_else(|| Error::Config(format!("unknown reset target `{target}`")))?;
    let mut c = ScenarioConfig::new(format!("selective_{target}"), params.clone(), n, SELECTIVE_WINDOW_NS);
    c.couplers[k - 1] = CouplerSetting::ghz(RESET_FREQUENCY_GHZ);
    c.targets = vec![target.to_string()];
    c.mandatory = true;
    Ok(c)
}

pub fn selective_reset(params: &DeviceParams, target: &str) -> Result<ScenarioResult> {
    run(&selective_reset_config(params, target)?)
}

/// Every coupler at the reset frequency.
pub fn simultaneous_reset_config(params: &DeviceParams, initial: InitialState) -> Result<ScenarioConfig> {
    let n = params.n_working();
    let mut c = ScenarioConfig::new("simultaneous", params.clone(), n, SELECTIVE_WINDOW_NS);
    c.couplers = vec![CouplerSetting::ghz(RESET_FREQUENCY_GHZ); n];
    let idle = resolve_couplers(params, &[CouplerSetting::Idle])?[0];
    if (ghz(RESET_FREQUENCY_GHZ) - idle).abs() < 1e-12 * idle.abs() {
        return Err(Error::Precondition("reset frequency coincides with the idle point".into()));
    }
    c.initial = initial;
    c.mandatory = true;
    Ok(c)
}

pub fn simultaneous_reset(params: &DeviceParams, initial: InitialState) -> Result<ScenarioResult> {
    run(&simultaneous_reset_config(params, initial)?)
}

/// `|Ψ_π⟩` with both couplers at the reset frequency (`symmetric`), or at
/// 3.1 and 2.9 GHz.
pub fn dark_state_config(params: &DeviceParams, symmetric: bool) -> Result<ScenarioConfig> {
    two_qubit(params)?;
    let second = if symmetric { RESET_FREQUENCY_GHZ } else { DETUNED_FREQUENCY_GHZ };
    dark_state_config_at(params, ghz(RESET_FREQUENCY_GHZ), ghz(second), DARK_WINDOW_NS)
}

fn dark_state_config_at(params: &DeviceParams, omega_c1: f64, omega_c2: f64, window: f64) -> Result<ScenarioConfig> {
    let mut c = ScenarioConfig::new("dark_state", params.clone(), 2, window);
    c.couplers = vec![CouplerSetting::Frequency(omega_c1), CouplerSetting::Frequency(omega_c2)];
    c.initial = InitialState::Bell { phi: PI };
    Ok(c)
}

pub fn dark_state_demo(params: &DeviceParams, symmetric: bool) -> Result<ScenarioResult> {
    let mut config = dark_state_config(params, symmetric)?;
    config.id = if symmetric { "dark_symmetric" } else { "dark_detuned" }.into();
    let mut result = run(&config)?;
    result.trapping = Some(Trapping::from_traces(&result.traces)?);
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub omega_c1_ghz: f64,
    pub omega_c2_ghz: f64,
    pub tau_ns: Option<f64>,
    /// Lowest final fidelity of the two qubits.
    pub final_fidelity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DarkSweep {
    pub window_ns: f64,
    pub points: Vec<SweepPoint>,
    pub best: Option<SweepPoint>,
}

/// Detuned dark-state erasure for every pair of distinct coupler
/// frequencies on an `n`-point grid spanning `ω_r ± span`.
pub fn dark_state_sweep(params: &DeviceParams, n: usize, span: f64) -> Result<DarkSweep> {
    two_qubit(params)?;
    if n < 2 || !(span > 0.0) {
        return Err(Error::Config("sweep needs at least two points and a positive span".into()));
    }
    let grid: Vec<f64> = (0..n).map(|k| params.omega_r - span + 2.0 * span * k as f64 / (n - 1) as f64).collect();
    let mut points = Vec::new();
    for &w1 in &grid {
        for &w2 in &grid {
            if w1 == w2 {
                continue;
            }
            let r = run(&dark_state_config_at(params, w1, w2, SWEEP_WINDOW_NS)?)?;
            points.push(SweepPoint {
                omega_c1_ghz: w1 / (2.0 * PI),
                omega_c2_ghz: w2 / (2.0 * PI),
                tau_ns: r.reset.tau_ns,
                final_fidelity: r.reset.qubits.iter().map(|q| q.final_fidelity).fold(1.0, f64::min),
            });
        }
    }
    let best = points
        .iter()
        .filter(|p| p.tau_ns.is_some())
        .min_by(|a, b| a.tau_ns.partial_cmp(&b.tau_ns).unwrap_or(std::cmp::Ordering::Equal))
        .cloned();
    Ok(DarkSweep { window_ns: SWEEP_WINDOW_NS, points, best })
}

/// Chain device with every working qubit excited.
pub fn scaling_config(params: &DeviceParams, n_working: usize) -> Result<ScenarioConfig> {
    if !(3..=4).contains(&n_working) {
        return Err(Error::Capability(format!("scaling runs use 3 or 4 working qubits, got {n_working}")));
    }
    if params.omega_c.len() < n_working {
        return Err(Error::Config(format!("{n_working} coupler frequencies required")));
    }
    let mut c = ScenarioConfig::new(format!("scaling_{n_working}"), params.clone(), n_working, SCALING_WINDOW_NS);
    c.couplers = params.omega_c[..n_working].iter().map(|&w| CouplerSetting::Frequency(w)).collect();
    c.evolution.grid = OutputGrid::Uniform(2.0);
    c.mandatory = true;
    Ok(c)
}

pub fn scaling_demo(params: &DeviceParams, n_working: usize) -> Result<ScenarioResult> {
    run(&scaling_config(params, n_working)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectiveComparison {
    pub delta: [f64; 2],
    /// Largest absolute deviation per mode over the window.
    pub per_mode: Vec<(String, f64)>,
    pub max_deviation: f64,
    /// Same for `q_n + c_n`, which absorbs the coupler's virtual population.
    pub max_branch_deviation: f64,
    pub full: TraceSet,
    pub effective: TraceSet,
}

/// Full and dispersive effective dynamics from `q1` excited, couplers at
/// detunings `Δ_n = ω_r − ω_{c_n}`.
pub fn effective_vs_full(params: &DeviceParams, delta: [f64; 2]) -> Result<EffectiveComparison> {
    two_qubit(params)?;
    for d in delta {
        if d == 0.0 {
            return Err(Error::Resonant(d));
        }
        if d.abs() < 5.0 * params.g_qc.abs() * (1.0 - 1e-9) {
            return Err(Error::Precondition(format!(
                "detuning {d:.4} rad/ns is not dispersive (|Δ| < 5 g_qc = {:.4})",
                5.0 * params.g_qc
            )));
        }
    }
    let params = DeviceParams {
        omega_c: vec![params.omega_r - delta[0], params.omega_r - delta[1]],
        ..params.clone()
    };
    let evolution = EvolutionConfig::new(EFFECTIVE_WINDOW_NS, GRID_STEP_NS).with_sector(SectorChoice::Max(1));
    let labels = ["q1", "q2", HEAD_QUBIT, RESONATOR];
    let run_on = |space: &Arc<CompositeSpace>, h: Hamiltonian, extra: &[&str]| -> Result<TraceSet> {
        let psi = InitialState::Occupations(vec![("q1".into(), 1)]).build(space)?;
        let channel = CollapseChannel::new(lowering(RESONATOR, space)?, params.kappa)?;
        let obs = labels
            .iter()
            .chain(extra)
            .map(|l| Ok((l.to_string(), number_operator(l, space)?)))
            .collect::<Result<Vec<Observable>>>()?;
        evolve_master_from_state(&psi, &h, &[channel], &evolution, &obs)
    };
    let space = build_space(&params, 2)?;
    let full = run_on(&space, Hamiltonian::Constant(rotating_frame_hamiltonian(&params, &space)?), &["c1", "c2"])?;
    let reduced = build_reduced_space(&params, 2)?;
    let effective = run_on(&reduced, Hamiltonian::Modulated(effective_picture(&params, &reduced)?), &[])?;

    let deviation = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let series = |t: &TraceSet, l: &str| t.get(l).map(<[f64]>::to_vec).unwrap_or_default();
    let per_mode: Vec<(String, f64)> =
        labels.iter().map(|l| (l.to_string(), deviation(&series(&full, l), &series(&effective, l)))).collect();
    let max_deviation = per_mode.iter().map(|(_, d)| *d).fold(0.0, f64::max);
    let mut max_branch_deviation: f64 = 0.0;
    for (q, c) in [("q1", "c1"), ("q2", "c2")] {
        let branch: Vec<f64> = series(&full, q).iter().zip(series(&full, c)).map(|(a, b)| a + b).collect();
        max_branch_deviation = max_branch_deviation.max(deviation(&branch, &series(&effective, q)));
    }
    Ok(EffectiveComparison { delta, per_mode, max_deviation, max_branch_deviation, full, effective })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioReport {
    pub ratio: f64,
    pub selective: ResetReport,
    pub simultaneous: ResetReport,
}

/// `τ_sim / τ_sq` at a common threshold, from every working qubit excited.
pub fn ratio_experiment(params: &DeviceParams, threshold: f64) -> Result<RatioReport> {
    let mut sq = selective_reset_config(params, "q1")?;
    let mut sim = simultaneous_reset_config(params, InitialState::all_excited(params.n_working()))?;
    sq.threshold = threshold;
    sim.threshold = threshold;
    let selective = run(&sq)?.reset;
    let simultaneous = run(&sim)?.reset;
    match (selective.tau_ns, simultaneous.tau_ns) {
        (Some(a), Some(b)) if a > 0.0 => Ok(RatioReport { ratio: b / a, selective, simultaneous }),
        _ => Err(Error::Precondition(format!(
            "ratio undefined: selective τ = {:?} ns, simultaneous τ = {:?} ns",
            selective.tau_ns, simultaneous.tau_ns
        ))),
    }
}
