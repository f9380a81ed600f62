//! Integrator against brute-force propagators for small time-independent
//! problems.

mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use qeraser::dynamics::{evolve_master, evolve_master_from_state, CollapseChannel, EvolutionConfig, OutputGrid};
use qeraser::hilbert::{lowering, CompositeSpace, DensityMatrix, ModeKind, ModeSpec, Operator, StateVector};
use qeraser::linalg::C64;
use std::sync::Arc;

/// Qubit (mode 0) ⊗ cavity with `levels` Fock states, detuned exchange.
fn jaynes_cummings(levels: usize) -> (Arc<CompositeSpace>, DMatrix<C64>, DMatrix<C64>, DMatrix<C64>) {
    let space = CompositeSpace::new(vec![
        ModeSpec::two_level("q", ModeKind::HeadQubit).unwrap(),
        ModeSpec::resonator("r", levels - 1).unwrap(),
    ])
    .unwrap();
    let dims = [2, levels];
    let sm = local(&dims, 0);
    let a = local(&dims, 1);
    let h = sm.adjoint() * &sm * c(0.13, 0.0) + a.adjoint() * &a * c(-0.05, 0.0) + (sm.adjoint() * &a + a.adjoint() * &sm) * c(0.4, 0.0);
    (space, h, sm, a)
}

#[test]
fn ladder_convention_matches_library() {
    let (space, _, sm, a) = jaynes_cummings(4);
    assert!((lowering("q", &space).unwrap().to_dense() - sm).camax() < 1e-15);
    assert!((lowering("r", &space).unwrap().to_dense() - a).camax() < 1e-15);
}

#[test]
fn jaynes_cummings_with_decay_matches_superoperator_exponential() {
    let (space, h, sm, a) = jaynes_cummings(4);
    let (kappa, gamma) = (0.3, 0.05);
    let sup = liouvillian(&h, &[(a.clone(), kappa), (sm.clone(), gamma)]);
    // mixture of |1,1⟩ and a coherent superposition of |0,2⟩ and |1,0⟩
    let d = space.dim();
    let mut v = DVector::<C64>::zeros(d);
    v[2] = c(0.6, 0.0);
    v[4] = c(0.0, 0.8);
    let mut rho0 = &v * v.adjoint() * c(0.7, 0.0);
    rho0[(5, 5)] += c(0.3, 0.0);
    let channels = vec![
        CollapseChannel::new(op(&space, &a), kappa).unwrap(),
        CollapseChannel::new(op(&space, &sm), gamma).unwrap(),
    ];
    let mut cfg = EvolutionConfig::new(12.0, 1.0);
    cfg.grid = OutputGrid::Points(vec![0.0, 0.7, 3.0, 6.5, 12.0]);
    let traces = evolve_master(
        &DensityMatrix::new(&space, rho0.clone()).unwrap(),
        &op(&space, &h).into(),
        &channels,
        &cfg,
        &tomography(&space),
    )
    .unwrap();
    let worst = worst_deviation(&traces, &sup, &rho0);
    assert!(worst < 1e-8, "max |Δρ| = {worst:e}");
}

#[test]
fn block_resolved_path_matches_superoperator_exponential() {
    let (space, h, sm, a) = jaynes_cummings(4);
    let (kappa, gamma) = (0.45, 0.02);
    let sup = liouvillian(&h, &[(a.clone(), kappa), (sm.clone(), gamma)]);
    // |1, 2⟩: three excitations, top block pure
    let psi = StateVector::basis(&space, &[1, 2]).unwrap();
    let rho0 = psi.amplitudes() * psi.amplitudes().adjoint();
    let channels = vec![
        CollapseChannel::new(op(&space, &a), kappa).unwrap(),
        CollapseChannel::new(op(&space, &sm), gamma).unwrap(),
    ];
    let traces =
        evolve_master_from_state(&psi, &op(&space, &h).into(), &channels, &EvolutionConfig::new(15.0, 2.5), &tomography(&space))
            .unwrap();
    assert!(traces.diagnostics.basis_dimension < space.dim());
    let worst = worst_deviation(&traces, &sup, &rho0);
    assert!(worst < 1e-7, "max |Δρ| = {worst:e}");
}

/// Two qubits and a cavity with dephasing, which the block path cannot take.
fn three_mode(levels: usize) {
    let space = CompositeSpace::new(vec![
        ModeSpec::two_level("a", ModeKind::WorkingQubit).unwrap(),
        ModeSpec::two_level("b", ModeKind::HeadQubit).unwrap(),
        ModeSpec::resonator("r", levels - 1).unwrap(),
    ])
    .unwrap();
    let dims = [2, 2, levels];
    let (sa, sb, a) = (local(&dims, 0), local(&dims, 1), local(&dims, 2));
    let h = (sa.adjoint() * &sb + sb.adjoint() * &sa) * c(0.25, 0.0)
        + (sb.adjoint() * &a + a.adjoint() * &sb) * c(0.35, 0.0)
        + sa.adjoint() * &sa * c(0.08, 0.0);
    let nz = sa.adjoint() * &sa;
    let jumps = vec![(a.clone(), 0.4), (nz.clone(), 0.03)];
    let sup = liouvillian(&h, &jumps);
    let d = space.dim();
    let w = DMatrix::from_fn(d, d, |i, j| c(((i * 7 + j * 3) % 5) as f64 * 0.1, ((i + 2 * j) % 3) as f64 * 0.05));
    let m = &w * w.adjoint();
    let rho0 = m.unscale(m.trace().re);
    let channels: Vec<_> = jumps.iter().map(|(l, g)| CollapseChannel::new(op(&space, l), *g).unwrap()).collect();
    let traces = evolve_master(
        &DensityMatrix::new(&space, rho0.clone()).unwrap(),
        &op(&space, &h).into(),
        &channels,
        &EvolutionConfig::new(8.0, 4.0),
        &tomography(&space),
    )
    .unwrap();
    let worst = worst_deviation(&traces, &sup, &rho0);
    assert!(worst < 1e-7, "dim {d}: max |Δρ| = {worst:e}");
}

#[test]
fn dimension_16_with_dephasing() {
    three_mode(4);
}

#[test]
fn dimension_24_with_dephasing() {
    three_mode(6);
}

#[test]
fn bare_cavity_decay() {
    let space = CompositeSpace::new(vec![ModeSpec::resonator("r", 3).unwrap()]).unwrap();
    let kappa = 2.0 * std::f64::consts::PI * 0.15;
    let ch = CollapseChannel::new(lowering("r", &space).unwrap(), kappa).unwrap();
    let n = qeraser::hilbert::number_operator("r", &space).unwrap();
    let psi = StateVector::basis(&space, &[1]).unwrap();
    let cfg = EvolutionConfig::new(5.0 / kappa, 0.05);
    let tr = evolve_master_from_state(&psi, &Operator::zero(&space).into(), &[ch], &cfg, &[("n".into(), n)]).unwrap();
    for (t, v) in tr.times.iter().zip(tr.get("n").unwrap()) {
        assert!((v - (-kappa * t).exp()).abs() < 1e-6);
    }
}
