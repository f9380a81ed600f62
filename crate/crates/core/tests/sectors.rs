//! Excitation-sector and block-resolved evolution against the full space,
//! plus frame independence of populations.

use qeraser::analysis::bell_state;
use qeraser::dynamics::{
    evolve_master, evolve_master_from_state, evolve_state, CollapseChannel, EvolutionConfig, Hamiltonian, Observable,
    SectorChoice, TraceSet,
};
use qeraser::hilbert::{lowering, number_operator, CompositeSpace, DensityMatrix, StateVector};
use qeraser::model::{build_hamiltonians, build_space, rotating_frame_hamiltonian, DeviceParams};
use qeraser::scenarios::{resolve_couplers, CouplerSetting, InitialState};
use std::sync::Arc;

fn populations(space: &Arc<CompositeSpace>) -> Vec<Observable> {
    space.labels().map(|l| (l.to_string(), number_operator(l, space).unwrap())).collect()
}

struct Problem {
    space: Arc<CompositeSpace>,
    params: DeviceParams,
    psi: StateVector,
    channel: CollapseChannel,
}

fn problem(mut params: DeviceParams, n: usize, couplers: &[CouplerSetting]) -> Problem {
    params.omega_c = resolve_couplers(&params, couplers).unwrap();
    let space = build_space(&params, n).unwrap();
    let psi = InitialState::all_excited(n).build(&space).unwrap();
    let channel = CollapseChannel::new(lowering("r", &space).unwrap(), params.kappa).unwrap();
    Problem { space, params, psi, channel }
}

fn run(p: &Problem, h: Hamiltonian, cfg: &EvolutionConfig) -> TraceSet {
    evolve_master_from_state(&p.psi, &h, std::slice::from_ref(&p.channel), cfg, &populations(&p.space)).unwrap()
}

#[test]
fn two_qubit_reset_blocks_sector_and_full_agree() {
    let p = problem(DeviceParams::fig1(), 2, &[CouplerSetting::ghz(3.1), CouplerSetting::Idle]);
    let h: Hamiltonian = rotating_frame_hamiltonian(&p.params, &p.space).unwrap().into();
    // tight tolerances so integration error sits well below the comparison bound
    let cfg = EvolutionConfig::new(30.0, 1.0).with_tolerances(1e-11, 1e-13);
    let blocks = run(&p, h.clone(), &cfg);
    let full = run(&p, h.clone(), &cfg.clone().with_sector(SectorChoice::Full));
    let sector = evolve_master(
        &DensityMatrix::from_pure(&p.psi),
        &h,
        std::slice::from_ref(&p.channel),
        &cfg.clone().with_sector(SectorChoice::Max(2)),
        &populations(&p.space),
    )
    .unwrap();
    assert_eq!(full.diagnostics.basis_dimension, p.space.dim());
    assert_eq!(sector.diagnostics.basis_dimension, 23);
    assert_eq!(blocks.diagnostics.basis_dimension, 23);
    let (db, ds) = (blocks.max_difference(&full).unwrap(), sector.max_difference(&full).unwrap());
    assert!(db < 1e-7 && ds < 1e-7, "blocks {db:e}, sector {ds:e}");
    assert!(full.get("q1").unwrap().last().unwrap() < &0.9);
}

#[test]
fn three_qubit_sector_spot_check() {
    let params = DeviceParams::chain(3).unwrap();
    let couplers: Vec<_> = params.omega_c.iter().map(|&w| CouplerSetting::Frequency(w)).collect();
    let p = problem(params, 3, &couplers);
    let h: Hamiltonian = rotating_frame_hamiltonian(&p.params, &p.space).unwrap().into();
    let cfg = EvolutionConfig::new(25.0, 1.0);
    let blocks = run(&p, h.clone(), &cfg.clone().with_sector(SectorChoice::Max(3)));
    let full = run(&p, h, &cfg.with_sector(SectorChoice::Full));
    assert_eq!(blocks.diagnostics.basis_dimension, 102);
    let d = blocks.max_difference(&full).unwrap();
    assert!(d < 1e-7, "{d:e}");
    assert!(full.get("r").unwrap().iter().any(|&v| v > 1e-4));
}

#[test]
fn lab_and_rotating_frames_give_the_same_populations() {
    let p = problem(DeviceParams::fig1(), 2, &[CouplerSetting::ghz(3.1), CouplerSetting::Idle]);
    let cfg = EvolutionConfig::new(6.0, 0.5).with_tolerances(1e-10, 1e-12);
    let lab = run(&p, build_hamiltonians(&p.params, &p.space).unwrap().total.into(), &cfg);
    let rotating = run(&p, rotating_frame_hamiltonian(&p.params, &p.space).unwrap().into(), &cfg);
    assert!(lab.diagnostics.steps > rotating.diagnostics.steps);
    let d = lab.max_difference(&rotating).unwrap();
    assert!(d < 1e-7, "{d:e}");
}

#[test]
fn antisymmetric_bell_state_never_reaches_the_head() {
    let params = DeviceParams::fig1();
    let space = build_space(&params, 2).unwrap();
    let hqc = build_hamiltonians(&params, &space).unwrap().hqc;
    let psi = bell_state(&space, std::f64::consts::PI).unwrap();
    let q0 = vec![("q0".to_string(), number_operator("q0", &space).unwrap())];
    let tr = evolve_state(&psi, &hqc.into(), &EvolutionConfig::new(200.0, 0.5), &q0).unwrap();
    assert!(tr.get("q0").unwrap().iter().all(|&v| v.abs() < 1e-12));
}
