//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! A criterion that misses its physics target prints FAIL and the run
//! continues; only an error while evaluating one makes the process exit
//! non-zero.

mod common;

use common::*;
use nalgebra::DVector;
use qeraser::analysis::{dark_state_scan, transfer_amplitude};
use qeraser::dynamics::{
    evolve_master, evolve_master_from_state, CollapseChannel, Diagnostics, EvolutionConfig, Hamiltonian,
    SectorChoice,
};
use qeraser::hilbert::{lowering, number_operator, CompositeSpace, DensityMatrix, ModeKind, ModeSpec, Operator, StateVector};
use qeraser::model::{build_space, ghz, rotating_frame_hamiltonian, DeviceParams};
use qeraser::scenarios::{
    dark_state_demo, dark_state_sweep, effective_vs_full, ratio_experiment, run, scaling_config, selective_reset,
    InitialState,
};
use std::f64::consts::PI;
use std::time::Instant;

type Outcome = Result<(bool, String), String>;

#[derive(Default)]
struct Ledger {
    runs: Vec<(String, Diagnostics)>,
}

impl Ledger {
    fn keep(&mut self, name: &str, d: &Diagnostics) {
        self.runs.push((name.to_string(), d.clone()));
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn ns(t: Option<f64>) -> String {
    t.map_or("not reached".into(), |t| format!("{t:.1} ns"))
}

fn c1_c3(ledger: &mut Ledger) -> (Outcome, Outcome) {
    let start = Instant::now();
    let r = match selective_reset(&DeviceParams::fig1(), "q1") {
        Ok(r) => r,
        Err(e) => return (Err(err(&e)), Err(err(e))),
    };
    let secs = start.elapsed().as_secs_f64();
    ledger.keep("selective_q1", &r.traces.diagnostics);
    let c1 = {
        let tau = r.reset.tau_ns;
        let ok = tau.is_some_and(|t| (t - 296.3).abs() <= 0.05 * 296.3) && secs < 60.0;
        let first = r.reset.first_crossing_ns;
        let first_ok = first.is_some_and(|t| (t - 296.3).abs() <= 0.05 * 296.3);
        Ok((
            ok,
            format!(
                "τ_res sustained {} / first crossing {} vs 296.3 ns ± 5% (first-crossing {}); runtime {secs:.1} s < 60 s",
                ns(tau),
                ns(first),
                if first_ok { "inside" } else { "outside" }
            ),
        ))
    };
    let c3 = {
        let q2 = r.traces.get("q2").unwrap_or(&[]);
        let min = q2.iter().copied().fold(f64::INFINITY, f64::min);
        Ok((
            min >= 0.99,
            format!("non-target q2 retains ⟨n_q2⟩ ≥ {min:.5} over 600 ns (bound 0.99; fidelity to its initial |1⟩)"),
        ))
    };
    (c1, c3)
}

fn c2() -> Outcome {
    let r = ratio_experiment(&DeviceParams::fig1(), 0.995).map_err(err)?;
    Ok((
        (r.ratio - 0.77).abs() <= 0.05,
        format!(
            "τ_sim/τ_sq = {:.4} ({} / {}) vs 0.77 ± 0.05",
            r.ratio,
            ns(r.simultaneous.tau_ns),
            ns(r.selective.tau_ns)
        ),
    ))
}

fn c4(ledger: &mut Ledger) -> Outcome {
    let r = dark_state_demo(&DeviceParams::fig2(), true).map_err(err)?;
    ledger.keep("dark_symmetric", &r.traces.diagnostics);
    let t = r.trapping.ok_or("trapping diagnostics missing")?;
    Ok((
        t.max_head_population < 1e-8 && t.max_resonator_population < 1e-8 && t.max_branch_deviation < 1e-6,
        format!(
            "max ⟨n_q0⟩ {:.2e}, max ⟨n_r⟩ {:.2e} (< 1e-8); |Σ q,c − 1| {:.2e} (< 1e-6); reset {}",
            t.max_head_population,
            t.max_resonator_population,
            t.max_branch_deviation,
            ns(r.reset.tau_ns)
        ),
    ))
}

fn c5(ledger: &mut Ledger) -> Outcome {
    let params = DeviceParams::fig2();
    let r = dark_state_demo(&params, false).map_err(err)?;
    ledger.keep("dark_detuned", &r.traces.diagnostics);
    let sweep = dark_state_sweep(&params, 16, ghz(0.2)).map_err(err)?;
    let best = sweep.best.as_ref().ok_or("no sweep point reached F_tsh")?;
    let ok = r.reset.reached && best.tau_ns.is_some_and(|t| (t - 27.0).abs() <= 0.5 * 27.0);
    let below = sweep.points.iter().filter(|p| p.tau_ns.is_none()).count();
    Ok((
        ok,
        format!(
            "3.1/2.9 GHz: τ_res {}; best over ±200 MHz ({} pairs, {} not reached in {} ns): {} at ({:.4}, {:.4}) GHz vs 27 ns ± 50%",
            ns(r.reset.tau_ns),
            sweep.points.len(),
            below,
            sweep.window_ns,
            ns(best.tau_ns),
            best.omega_c1_ghz,
            best.omega_c2_ghz
        ),
    ))
}

fn c6() -> Outcome {
    let params = DeviceParams::fig1();
    let scan = dark_state_scan(&params, 16).map_err(err)?;
    let mut worst: f64 = 0.0;
    for &phi in &scan.phi {
        let a = transfer_amplitude(&params, phi).map_err(err)?;
        worst = worst.max((a.closed_form - a.numeric).norm());
        worst = worst.max((a.magnitude() - ((1.0 + phi.cos()).hypot(phi.sin()) * params.g_p / 2f64.sqrt())).abs());
    }
    let k = scan.phi.iter().position(|&p| (p - PI).abs() < 1e-12).ok_or("φ = π missing from the grid")?;
    let residual = scan.residual[k];
    Ok((
        worst < 1e-12 && residual < 1e-12 && scan.is_dark[k],
        format!("max |closed − numeric| {worst:.2e} over 16 φ (< 1e-12); H_qc²|Ψ_π⟩ residual {residual:.2e} (< 1e-12)"),
    ))
}

fn c7(ledger: &mut Ledger) -> Outcome {
    let p = DeviceParams::fig1();
    let mut devs = Vec::new();
    for m in [5.0, 10.0, 20.0] {
        let r = effective_vs_full(&p, [-m * p.g_qc, -m * p.g_qc]).map_err(err)?;
        ledger.keep(&format!("effective_full_{m}"), &r.full.diagnostics);
        devs.push((m, r.max_deviation, r.max_branch_deviation));
    }
    let monotone = devs.windows(2).all(|w| w[1].1 < w[0].1);
    let ok = devs[0].1 < 0.05 && monotone;
    let text: Vec<String> = devs.iter().map(|(m, d, b)| format!("|Δ|={m}g: {d:.4} (q+c {b:.4})")).collect();
    Ok((ok, format!("max population deviation {} — bound 0.05 at 5g, monotone {monotone}", text.join(", "))))
}

fn c8(ledger: &Ledger) -> Outcome {
    // bare cavity
    let space = CompositeSpace::new(vec![ModeSpec::resonator("r", 3).map_err(err)?]).map_err(err)?;
    let kappa = 2.0 * PI * 0.15;
    let ch = CollapseChannel::new(lowering("r", &space).map_err(err)?, kappa).map_err(err)?;
    let n = number_operator("r", &space).map_err(err)?;
    let psi = StateVector::basis(&space, &[1]).map_err(err)?;
    let tr = evolve_master_from_state(&psi, &Operator::zero(&space).into(), &[ch], &EvolutionConfig::new(5.0 / kappa, 0.05), &[("n".into(), n)])
        .map_err(err)?;
    let decay = tr.times.iter().zip(tr.get("n").unwrap_or(&[])).map(|(t, v)| (v - (-kappa * t).exp()).abs()).fold(0.0, f64::max);

    // superoperator exponential on 8 and 16 dimensional problems
    let mut expm: f64 = 0.0;
    for levels in [2usize, 4] {
        let space = CompositeSpace::new(vec![
            ModeSpec::two_level("a", ModeKind::WorkingQubit).map_err(err)?,
            ModeSpec::two_level("b", ModeKind::HeadQubit).map_err(err)?,
            ModeSpec::resonator("r", levels - 1).map_err(err)?,
        ])
        .map_err(err)?;
        let dims = [2, 2, levels];
        let (sa, sb, a) = (local(&dims, 0), local(&dims, 1), local(&dims, 2));
        let h = (sa.adjoint() * &sb + sb.adjoint() * &sa) * c(0.3, 0.0) + (sb.adjoint() * &a + a.adjoint() * &sb) * c(0.5, 0.0);
        let jumps = vec![(a.clone(), 0.35), (sa.adjoint() * &sa, 0.02)];
        let d = space.dim();
        let mut v = DVector::zeros(d);
        v[d / 2] = c(0.8, 0.0);
        v[levels] = c(0.0, 0.6);
        let rho0 = &v * v.adjoint();
        let channels: Vec<_> = jumps.iter().map(|(l, g)| CollapseChannel::new(op(&space, l), *g)).collect::<Result<_, _>>().map_err(err)?;
        let traces = evolve_master(
            &DensityMatrix::new(&space, rho0.clone()).map_err(err)?,
            &op(&space, &h).into(),
            &channels,
            &EvolutionConfig::new(10.0, 2.5),
            &tomography(&space),
        )
        .map_err(err)?;
        expm = expm.max(worst_deviation(&traces, &liouvillian(&h, &jumps), &rho0));
    }

    let trace = ledger.runs.iter().map(|(_, d)| d.max_trace_deviation).fold(0.0, f64::max);
    let herm = ledger.runs.iter().map(|(_, d)| d.max_hermiticity_correction).fold(0.0, f64::max);
    let (worst_eig_run, eig) = ledger
        .runs
        .iter()
        .map(|(n, d)| (n.as_str(), d.final_min_eigenvalue))
        .fold(("", f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    let ok = decay < 1e-6 && expm < 1e-7 && trace < 1e-8 && herm < 1e-8 && eig > -1e-6;
    Ok((
        ok,
        format!(
            "cavity decay {decay:.1e} (< 1e-6); expm, dim 8/16, {expm:.1e} (< 1e-7); over {} runs: |tr ρ − 1| {trace:.1e}, ‖ρ − ρ†‖ fix {herm:.1e} (< 1e-8), min eig {eig:.1e} [{worst_eig_run}] (> −1e-6)",
            ledger.runs.len()
        ),
    ))
}

fn c9(ledger: &mut Ledger) -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for n in [3usize, 4] {
        let start = Instant::now();
        let r = run(&scaling_config(&DeviceParams::chain(n).map_err(err)?, n).map_err(err)?).map_err(err)?;
        let secs = start.elapsed().as_secs_f64();
        ledger.keep(&format!("scaling_{n}"), &r.traces.diagnostics);
        let tau = r.reset.tau_ns;
        ok &= tau.is_some_and(|t| (300.0..=2000.0).contains(&t)) && secs < 600.0;
        let per: Vec<String> = r.reset.qubits.iter().map(|q| format!("{} {} (F_end {:.4})", q.qubit, ns(q.tau_ns), q.final_fidelity)).collect();
        parts.push(format!("n={n}: τ_res {} [{}], dim {}, {secs:.0} s", ns(tau), per.join(", "), r.traces.diagnostics.basis_dimension));
    }
    // sector against full space on the three-qubit device
    let mut params = DeviceParams::chain(3).map_err(err)?;
    params.omega_c.truncate(3);
    let space = build_space(&params, 3).map_err(err)?;
    let psi = InitialState::all_excited(3).build(&space).map_err(err)?;
    let h: Hamiltonian = rotating_frame_hamiltonian(&params, &space).map_err(err)?.into();
    let ch = CollapseChannel::new(lowering("r", &space).map_err(err)?, params.kappa).map_err(err)?;
    let obs: Vec<_> = space.labels().map(|l| Ok((l.to_string(), number_operator(l, &space)?))).collect::<qeraser::Result<_>>().map_err(err)?;
    let cfg = EvolutionConfig::new(20.0, 1.0);
    let sector = evolve_master_from_state(&psi, &h, std::slice::from_ref(&ch), &cfg.clone().with_sector(SectorChoice::Max(3)), &obs).map_err(err)?;
    let full = evolve_master_from_state(&psi, &h, &[ch], &cfg.with_sector(SectorChoice::Full), &obs).map_err(err)?;
    let diff = sector.max_difference(&full).map_err(err)?;
    ok &= diff < 1e-7;
    parts.push(format!(
        "sector n≤3 (dim {}) vs full (dim {}) over 20 ns: {diff:.1e}",
        sector.diagnostics.basis_dimension, full.diagnostics.basis_dimension
    ));
    Ok((ok, format!("{} — band [0.3, 2] μs, < 600 s", parts.join("; "))))
}

fn c10() -> Outcome {
    let p = DeviceParams::fig1();
    let w = p.idle_frequency().map_err(err)?;
    let f = w / (2.0 * PI);
    let exact = 3.0 + 1e4 / 3.0 * 1e-3;
    Ok((
        (f - exact).abs() < 1e-9 && (f * 10.0).round() / 10.0 == 6.3,
        format!("ω_c^idle = 2π·{f:.9} GHz = {w:.6} rad/ns (expected 2π·{exact:.9}; rounds to 6.3)"),
    ))
}

fn main() {
    let mut ledger = Ledger::default();
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let (r1, r3) = c1_c3(&mut ledger);
    results.push((1, "selective reset", r1));
    results.push((2, "simultaneous/selective ratio", c2()));
    results.push((3, "idle protection", r3));
    results.push((4, "dark-state trapping", c4(&mut ledger)));
    results.push((5, "dark-state erasure", c5(&mut ledger)));
    results.push((6, "dark-state algebra", c6()));
    results.push((7, "effective-model validity", c7(&mut ledger)));
    results.push((9, "scaling", c9(&mut ledger)));
    results.push((8, "integrator oracles", c8(&ledger)));
    results.push((10, "idle-point arithmetic", c10()));
    results.sort_by_key(|r| r.0);

    let mut errors = 0;
    let mut passed = 0;
    println!("acceptance criteria");
    for (k, name, outcome) in &results {
        match outcome {
            Ok((true, detail)) => {
                passed += 1;
                println!("PASS  {k:>2} {name}: {detail}");
            }
            Ok((false, detail)) => println!("FAIL  {k:>2} {name}: {detail}"),
            Err(e) => {
                errors += 1;
                println!("FAIL  {k:>2} {name}: error: {e}");
            }
        }
    }
    println!("{passed}/{} criteria passed", results.len());
    if errors > 0 {
        std::process::exit(1);
    }
}
