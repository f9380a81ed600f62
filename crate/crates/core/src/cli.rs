//! Command-line front end: configuration files, runs, sweeps and artifacts.
//!
//! Configuration is TOML with six sections. Unknown keys are rejected.
//!
//! ```toml
//! [device]
//! omega_q_ghz = [3.0, 3.0]
//! omega_q0_ghz = 3.0
//! omega_r_ghz = 3.0
//! g_qc_mhz = 100.0
//! g_p_mhz = 3.0
//! g_r_mhz = 100.0
//! kappa_mhz = 30.0
//! fock_cutoff = 3
//!
//! [initial]
//! occupations = { q1 = 1, q2 = 1 }   # or: bell_phi = 3.141592653589793
//!
//! [couplers]
//! c1 = 3.1
//! c2 = "idle"
//!
//! [evolution]
//! t_end_ns = 600.0
//! grid_step_ns = 0.5
//!
//! [observables]
//! populations = ["q1", "q2", "c1", "c2", "q0", "r"]
//!
//! [scenario]
//! id = "selective_q1"
//! targets = ["q1"]
//! mandatory = true
//! ```

use crate::analysis::{
    bell_state, dark_state_scan, darkstate_eigencheck, transfer_amplitude, CrossingMode, DarkStateEntry,
    ResetReport, TransferAmplitude, DEFAULT_THRESHOLD,
};
use crate::dynamics::{convergence_probe, ConvergenceReport, Diagnostics, EvolutionConfig, OutputGrid};
use crate::error::{Error, Result};
use crate::hilbert::total_number_operator;
use crate::model::{build_hamiltonians, build_qubit_coupler, build_space, coupler_label, ghz, mhz, DeviceParams};
use crate::scenarios::{
    ratio_experiment, resolve_couplers, run, CouplerSetting, InitialState, NaturalUnits, ResolvedCoupler,
    ScenarioConfig, ScenarioResult, Trapping,
};
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

/// Overrides the default artifact directory.
pub const OUT_DIR_ENV: &str = "QERASER_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "qeraser-out";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub device: DeviceSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSection>,
    #[serde(default)]
    pub couplers: BTreeMap<String, CouplerValue>,
    pub evolution: EvolutionSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observables: Option<ObservablesSection>,
    pub scenario: ScenarioSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSection {
    pub omega_q_ghz: Vec<f64>,
    pub omega_q0_ghz: f64,
    pub omega_r_ghz: f64,
    pub g_qc_mhz: f64,
    pub g_p_mhz: f64,
    pub g_r_mhz: f64,
    pub kappa_mhz: f64,
    #[serde(default)]
    pub g_qc_add_mhz: f64,
    pub fock_cutoff: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occupations: Option<BTreeMap<String, usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bell_phi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CouplerValue {
    Ghz(f64),
    Keyword(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionSection {
    pub t_end_ns: f64,
    pub grid_step_ns: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rtol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_step_ns: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservablesSection {
    pub populations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crossing: Option<CrossingMode>,
    #[serde(default)]
    pub mandatory: bool,
}

impl<'de> Deserialize<'de> for CrossingMode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match String::deserialize(d)?.as_str() {
            "sustained" => Ok(CrossingMode::Sustained),
            "first-crossing" => Ok(CrossingMode::FirstCrossing),
            other => Err(serde::de::Error::unknown_variant(other, &["sustained", "first-crossing"])),
        }
    }
}

fn schema(e: impl std::fmt::Display) -> Error {
    Error::Config(format!("schema: {e}"))
}

/// Parses a configuration document without resolving it.
pub fn parse_document(text: &str) -> Result<ConfigFile> {
    toml::from_str(text).map_err(|e| schema(e.message()))
}

pub fn emit_document(doc: &ConfigFile) -> Result<String> {
    toml::to_string(doc).map_err(|e| Error::Config(e.to_string()))
}

impl DeviceSection {
    pub fn to_params(&self) -> Result<DeviceParams> {
        if self.fock_cutoff < 1 {
            return Err(Error::Config(format!("range: device.fock_cutoff must be ≥ 1, got {}", self.fock_cutoff)));
        }
        let n = self.omega_q_ghz.len();
        if !(1..=4).contains(&n) {
            return Err(Error::Config(format!("range: device.omega_q_ghz needs 1 to 4 entries, got {n}")));
        }
        let all = self.omega_q_ghz.iter().chain([
            &self.omega_q0_ghz,
            &self.omega_r_ghz,
            &self.g_qc_mhz,
            &self.g_p_mhz,
            &self.g_r_mhz,
            &self.kappa_mhz,
            &self.g_qc_add_mhz,
        ]);
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("range: device values must be finite".into()));
        }
        if self.kappa_mhz < 0.0 {
            return Err(Error::Config("range: device.kappa_mhz must be ≥ 0".into()));
        }
        Ok(DeviceParams {
            omega_q: self.omega_q_ghz.iter().map(|&f| ghz(f)).collect(),
            omega_q0: ghz(self.omega_q0_ghz),
            omega_c: Vec::new(),
            omega_r: ghz(self.omega_r_ghz),
            g_qc: mhz(self.g_qc_mhz),
            g_p: mhz(self.g_p_mhz),
            g_r: mhz(self.g_r_mhz),
            kappa: mhz(self.kappa_mhz),
            g_qc_add: mhz(self.g_qc_add_mhz),
            fock_cutoff: self.fock_cutoff as usize,
        })
    }
}

fn coupler_settings(doc: &ConfigFile, n: usize) -> Result<Vec<CouplerSetting>> {
    for key in doc.couplers.keys() {
        if !(1..=n).any(|k| coupler_label(k) == *key) {
            return Err(Error::Config(format!("schema: unknown coupler `couplers.{key}` for {n} working qubits")));
        }
    }
    (1..=n)
        .map(|k| match doc.couplers.get(&coupler_label(k)) {
            None => Err(Error::Config(format!("schema: missing field `couplers.{}`", coupler_label(k)))),
            Some(CouplerValue::Ghz(f)) if f.is_finite() => Ok(CouplerSetting::ghz(*f)),
            Some(CouplerValue::Ghz(f)) => Err(Error::Config(format!("range: coupler frequency {f} GHz"))),
            Some(CouplerValue::Keyword(s)) if s == "idle" => Ok(CouplerSetting::Idle),
            Some(CouplerValue::Keyword(s)) => {
                Err(Error::Config(format!("schema: coupler `{}` must be \"idle\" or a frequency in GHz, got `{s}`", coupler_label(k))))
            }
        })
        .collect()
}

/// Resolves a document to a runnable scenario, all quantities in rad/ns.
pub fn resolve(doc: &ConfigFile) -> Result<ScenarioConfig> {
    let params = doc.device.to_params()?;
    let n = params.n_working();
    let couplers = coupler_settings(doc, n)?;
    let omega_c = resolve_couplers(&params, &couplers)?;
    let mut config = ScenarioConfig::new(doc.scenario.id.clone(), DeviceParams { omega_c, ..params }, n, doc.evolution.t_end_ns);
    config.couplers = couplers;
    config.initial = match &doc.initial {
        None => InitialState::all_excited(n),
        Some(InitialSection { occupations: Some(occ), bell_phi: None }) => {
            InitialState::Occupations(occ.iter().map(|(k, v)| (k.clone(), *v)).collect())
        }
        Some(InitialSection { occupations: None, bell_phi: Some(phi) }) => InitialState::Bell { phi: *phi },
        Some(_) => return Err(Error::Config("schema: `initial` takes exactly one of `occupations` or `bell_phi`".into())),
    };
    let ev = &doc.evolution;
    config.evolution = EvolutionConfig {
        t_start: 0.0,
        t_end: ev.t_end_ns,
        grid: OutputGrid::Uniform(ev.grid_step_ns),
        rtol: ev.rtol.unwrap_or(config.evolution.rtol),
        atol: ev.atol.unwrap_or(config.evolution.atol),
        max_step: ev.max_step_ns.unwrap_or(f64::INFINITY),
        sector: config.evolution.sector,
    };
    config.evolution.validate()?;
    if let Some(obs) = &doc.observables {
        config.observables = obs.populations.clone();
    }
    if let Some(t) = &doc.scenario.targets {
        config.targets = t.clone();
    }
    config.threshold = doc.scenario.threshold.unwrap_or(DEFAULT_THRESHOLD);
    config.crossing = doc.scenario.crossing.unwrap_or(CrossingMode::Sustained);
    config.mandatory = doc.scenario.mandatory;
    // surface bad labels and occupations before any integration
    let space = build_space(&config.resolved_params()?, n)?;
    config.initial.build(&space)?;
    for l in &config.observables {
        space.mode_index(l)?;
    }
    Ok(config)
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    resolve(&parse_document(text)?)
}

fn read_document(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_document(&text)
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}

fn number(x: f64) -> String {
    format!("{x:.16e}")
}

/// `t_ns`, one column per observable, `trace_dev`, `purity`.
pub fn trace_csv(result: &ScenarioResult) -> String {
    let tr = &result.traces;
    let mut out = String::from("t_ns");
    for label in tr.labels() {
        out.push(',');
        out.push_str(label);
    }
    out.push_str(",trace_dev,purity\n");
    for (k, t) in tr.times.iter().enumerate() {
        out.push_str(&number(*t));
        for (_, series) in &tr.series {
            out.push(',');
            out.push_str(&number(series[k]));
        }
        out.push(',');
        out.push_str(&number(tr.trace_deviation[k]));
        out.push(',');
        out.push_str(&number(tr.purity[k]));
        out.push('\n');
    }
    out
}

#[derive(Debug, Serialize)]
struct DarkSummary {
    phi: f64,
    transfer: TransferAmplitude,
    eigencheck: DarkStateEntry,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    id: &'a str,
    code_version: &'a str,
    frame: &'a str,
    n_working: usize,
    fock_cutoff: usize,
    params_ghz: &'a NaturalUnits,
    params_rad_ns: &'a DeviceParams,
    couplers: &'a [ResolvedCoupler],
    initial: &'a InitialState,
    evolution: &'a EvolutionConfig,
    sector_n_max: usize,
    reached: bool,
    tau_res_ns: Option<f64>,
    reset: &'a ResetReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    dark_state: Option<DarkSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trapping: Option<&'a Trapping>,
    diagnostics: &'a Diagnostics,
    wall_time_s: f64,
}

fn summary_json(result: &ScenarioResult, wall: f64) -> Result<String> {
    let p = &result.provenance;
    let dark_state = match p.initial {
        InitialState::Bell { phi } if p.n_working >= 2 => {
            let space = build_space(&DeviceParams { fock_cutoff: 1, ..p.params_rad_ns.clone() }, 2)?;
            let h = build_qubit_coupler(&p.params_rad_ns, &space)?;
            Some(DarkSummary {
                phi,
                transfer: transfer_amplitude(&p.params_rad_ns, phi)?,
                eigencheck: darkstate_eigencheck(&h, &bell_state(&space, phi)?, p.params_rad_ns.g_qc)?,
            })
        }
        _ => None,
    };
    let s = Summary {
        id: &result.id,
        code_version: &p.code_version,
        frame: &p.frame,
        n_working: p.n_working,
        fock_cutoff: p.fock_cutoff,
        params_ghz: &p.params_natural,
        params_rad_ns: &p.params_rad_ns,
        couplers: &p.couplers,
        initial: &p.initial,
        evolution: &p.evolution,
        sector_n_max: p.sector_n_max,
        reached: result.reset.reached,
        tau_res_ns: result.reset.tau_ns,
        reset: &result.reset,
        dark_state,
        trapping: result.trapping.as_ref(),
        diagnostics: &result.traces.diagnostics,
        wall_time_s: wall,
    };
    serde_json::to_string_pretty(&s).map_err(|e| Error::Io(e.to_string()))
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    NotReached,
}

/// Runs one scenario and writes its trace and summary.
pub fn simulate(config: &ScenarioConfig, out_dir: &Path) -> Result<Outcome> {
    let start = Instant::now();
    let mut result = run(config)?;
    let two_branch = ["q1", "q2", "c1", "c2", "q0", "r"].iter().all(|l| result.traces.get(l).is_some());
    if matches!(config.initial, InitialState::Bell { .. }) && two_branch {
        result.trapping = Some(Trapping::from_traces(&result.traces)?);
    }
    let wall = start.elapsed().as_secs_f64();
    write_atomic(&out_dir.join(format!("{}_trace.csv", config.id)), trace_csv(&result).as_bytes())?;
    write_atomic(&out_dir.join(format!("{}_summary.json", config.id)), summary_json(&result, wall)?.as_bytes())?;
    log::info!("{}: reached = {}, τ = {:?} ns ({wall:.2} s)", config.id, result.reset.reached, result.reset.tau_ns);
    Ok(if config.mandatory && !result.reset.reached { Outcome::NotReached } else { Outcome::Success })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Reduction {
    /// Reset time of the scenario targets.
    Tau,
    /// Lowest final fidelity among the targets.
    Fidelity,
    /// Simultaneous over selective reset time of the device.
    Ratio,
}

/// Replaces the number at a dotted path such as `device.omega_q_ghz[1]`.
pub fn set_path(doc: &mut toml::Table, path: &str, value: f64) -> Result<()> {
    let unresolved = || Error::Config(format!("unresolvable parameter path `{path}`"));
    let mut parts = Vec::new();
    for seg in path.split('.') {
        match seg.split_once('[') {
            Some((key, rest)) => {
                let idx: usize = rest.strip_suffix(']').and_then(|s| s.parse().ok()).ok_or_else(unresolved)?;
                parts.push((key.to_string(), Some(idx)));
            }
            None => parts.push((seg.to_string(), None)),
        }
    }
    let (last, rest) = parts.split_last().ok_or_else(unresolved)?;
    let mut table = doc;
    for (key, idx) in rest {
        if idx.is_some() {
            return Err(unresolved());
        }
        table = table.get_mut(key).and_then(toml::Value::as_table_mut).ok_or_else(unresolved)?;
    }
    let slot = match last {
        (key, None) => table.get_mut(key).ok_or_else(unresolved)?,
        (key, Some(i)) => table
            .get_mut(key)
            .and_then(toml::Value::as_array_mut)
            .and_then(|a| a.get_mut(*i))
            .ok_or_else(unresolved)?,
    };
    if let toml::Value::Integer(_) = slot {
        if value.fract() != 0.0 {
            return Err(Error::Config(format!("`{path}` takes an integer, got {value}")));
        }
        *slot = toml::Value::Integer(value as i64);
    } else {
        *slot = toml::Value::Float(value);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub reduction: Option<f64>,
    pub reached: bool,
}

pub fn sweep(text: &str, path: &str, grid: &[f64], reduce: Reduction) -> Result<Vec<SweepRow>> {
    if grid.is_empty() || grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("sweep grid must be non-empty and finite".into()));
    }
    let base: toml::Table = text.parse().map_err(|e: toml::de::Error| schema(e.message()))?;
    let configs = grid
        .iter()
        .map(|&v| {
            let mut doc = base.clone();
            set_path(&mut doc, path, v)?;
            let parsed: ConfigFile = doc.try_into().map_err(|e: toml::de::Error| schema(e.message()))?;
            Ok((v, resolve(&parsed)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = configs
        .par_iter()
        .map(|(value, config)| {
            let reduction = match reduce {
                Reduction::Tau => run(config)?.reset.tau_ns,
                Reduction::Fidelity => {
                    Some(run(config)?.reset.qubits.iter().map(|q| q.final_fidelity).fold(1.0, f64::min))
                }
                Reduction::Ratio => match ratio_experiment(&config.resolved_params()?, config.threshold) {
                    Ok(r) => Some(r.ratio),
                    Err(Error::Precondition(_)) => None,
                    Err(e) => return Err(e),
                },
            };
            let reached = match reduce {
                Reduction::Fidelity => reduction.is_some_and(|f| f >= config.threshold),
                _ => reduction.is_some(),
            };
            Ok(SweepRow { value: *value, reduction, reached })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.value.total_cmp(&b.value));
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("value,reduction,reached\n");
    for r in rows {
        let red = r.reduction.map(number).unwrap_or_else(|| "NaN".into());
        out.push_str(&format!("{},{red},{}\n", number(r.value), r.reached));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub id: String,
    pub hermiticity_deviation: f64,
    pub excitation_commutator: f64,
    pub warnings: Vec<String>,
}

/// Dry run: builds the Hamiltonian and reports regime warnings.
pub fn validate(config: &ScenarioConfig) -> Result<ValidationReport> {
    let p = config.resolved_params()?;
    let space = build_space(&p, config.n_working)?;
    let set = build_hamiltonians(&p, &space)?;
    let n = total_number_operator(&space);
    let mut warnings = Vec::new();
    for (k, w) in p.omega_c.iter().enumerate() {
        let delta = p.omega_r - w;
        let g = p.coupler_strength(k + 1);
        if delta.abs() < 5.0 * g {
            warnings.push(format!(
                "dispersive: {} detuning |Δ| = {:.1} MHz < 5 g = {:.1} MHz",
                coupler_label(k + 1),
                delta.abs() / (2.0 * PI) * 1e3,
                5.0 * g / (2.0 * PI) * 1e3
            ));
        }
    }
    let units = NaturalUnits::from_params(&p);
    if !(p.g_qc < p.g_r && p.g_r < p.kappa) {
        warnings.push(format!(
            "ordering: g_qc < g_r < kappa violated (g_qc = {:.1} MHz, g_r = {:.1} MHz, kappa = {:.1} MHz)",
            units.g_qc_mhz, units.g_r_mhz, units.kappa_mhz
        ));
    }
    if !p.parasitic_is_small() {
        warnings.push(format!("parasitic: g_p = {:.1} MHz is not small against g_qc", units.g_p_mhz));
    }
    Ok(ValidationReport {
        id: config.id.clone(),
        hermiticity_deviation: set.total.hermiticity_deviation(),
        excitation_commutator: set.total.commutator(&n)?.max_abs(),
        warnings,
    })
}

pub fn converge(config: &ScenarioConfig, cutoff: usize) -> Result<ConvergenceReport> {
    convergence_probe(
        |k| {
            let mut c = config.clone();
            c.params.fock_cutoff = k;
            Ok(run(&c)?.traces)
        },
        cutoff,
    )
}

#[derive(Parser, Debug)]
#[command(name = "qeraser", version, about = "Open-system simulator for a tunable-coupler erase head")]
struct Cli {
    /// Artifact directory; defaults to $QERASER_OUT_DIR, then ./qeraser-out.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run scenarios and write `<id>_trace.csv` and `<id>_summary.json`.
    Simulate {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
    },
    /// Evaluate a reduction over a parameter grid and write `sweep.csv`.
    Sweep {
        config: PathBuf,
        /// Dotted path into the config, e.g. `device.kappa_mhz` or `couplers.c2`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        grid: Vec<f64>,
        #[arg(long, value_enum, default_value = "tau")]
        reduce: Reduction,
    },
    /// Check the configuration and the Hamiltonian without integrating.
    Validate { config: PathBuf },
    /// Transfer amplitudes and eigenchecks of the two-qubit φ states.
    Darkcheck {
        config: PathBuf,
        #[arg(long, default_value_t = 16)]
        phi_grid: usize,
    },
    /// Compare a run at Fock cutoff k against k + 1.
    Converge {
        config: PathBuf,
        #[arg(long)]
        cutoff: usize,
    },
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn load(path: &Path) -> Result<ScenarioConfig> {
    resolve(&read_document(path)?).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn execute(cli: Cli) -> Result<Outcome> {
    let out = out_dir(cli.out_dir);
    match cli.command {
        Command::Simulate { configs } => {
            let configs = configs.iter().map(|p| load(p)).collect::<Result<Vec<_>>>()?;
            let outcomes: Vec<(String, Result<Outcome>)> =
                configs.par_iter().map(|c| (c.id.clone(), simulate(c, &out))).collect();
            let mut overall = Outcome::Success;
            let mut first_error = None;
            for (id, r) in outcomes {
                match r {
                    Ok(Outcome::NotReached) => {
                        eprintln!("{id}: mandatory reset not reached");
                        overall = Outcome::NotReached;
                    }
                    Ok(Outcome::Success) => println!("{id}: ok"),
                    Err(e) => {
                        eprintln!("{id}: {e}");
                        first_error.get_or_insert(e);
                    }
                }
            }
            first_error.map_or(Ok(overall), Err)
        }
        Command::Sweep { config, param, grid, reduce } => {
            let text = std::fs::read_to_string(&config).map_err(|e| Error::Io(format!("{}: {e}", config.display())))?;
            let rows = sweep(&text, &param, &grid, reduce)?;
            write_atomic(&out.join("sweep.csv"), sweep_csv(&rows).as_bytes())?;
            for r in &rows {
                println!("{} {:?} {}", r.value, r.reduction, r.reached);
            }
            Ok(Outcome::Success)
        }
        Command::Validate { config } => {
            let report = validate(&load(&config)?)?;
            println!("{}: hermiticity {:e}, [H, N] {:e}", report.id, report.hermiticity_deviation, report.excitation_commutator);
            for w in &report.warnings {
                println!("warning: {w}");
            }
            Ok(Outcome::Success)
        }
        Command::Darkcheck { config, phi_grid } => {
            let c = load(&config)?;
            let report = dark_state_scan(&c.resolved_params()?, phi_grid)?;
            write_atomic(&out.join(format!("{}_darkcheck.json", c.id)), json(&report)?.as_bytes())?;
            for k in 0..report.phi.len() {
                println!(
                    "phi {:.6} transfer {:.6e} residual {:.3e} dark {}",
                    report.phi[k], report.transfer[k], report.residual[k], report.is_dark[k]
                );
            }
            Ok(Outcome::Success)
        }
        Command::Converge { config, cutoff } => {
            let c = load(&config)?;
            let report = converge(&c, cutoff)?;
            write_atomic(&out.join(format!("{}_converge.json", c.id)), json(&report)?.as_bytes())?;
            println!("cutoff {} vs {}: max difference {:e}, passed {}", cutoff, cutoff + 1, report.max_difference, report.passed);
            Ok(if report.passed { Outcome::Success } else { Outcome::NotReached })
        }
    }
}

/// Exit status 0 on success, 2 when a mandatory reset (or a convergence
/// check) fails, 1 on any error.
pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::NotReached) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
