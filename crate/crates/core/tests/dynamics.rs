use jclattice::dynamics::{
    evolve_lindblad, evolve_schrodinger, CollapseChannel, TimeDependentHamiltonian,
};
use jclattice::model::build_lattice_hamiltonian;
use jclattice::{DensityMatrix, FockBasis, QuantumState, SiteOp, SystemParams};
use nalgebra::DVector;
use num_complex::Complex64 as C64;

fn lattice() -> (FockBasis, SystemParams) {
    lattice_with(Some(3))
}

fn lattice_with(nmax: Option<u32>) -> (FockBasis, SystemParams) {
    let basis = FockBasis::new(4, 2, true, nmax).unwrap();
    let params = SystemParams {
        omega0: 8.0,
        delta: 0.3,
        g: 1.0,
        hopping: 0.25,
        kappa: 0.05,
        gamma_q: 0.02,
        ..Default::default()
    };
    (basis, params)
}

fn spread_state(basis: &FockBasis) -> QuantumState {
    let amps =
        (0..basis.dim()).map(|i| C64::new(((i * 7) % 11) as f64 - 5.0, ((i * 3) % 5) as f64 - 2.0));
    QuantumState::normalized(DVector::from_iterator(basis.dim(), amps))
}

fn sector_weights(basis: &FockBasis, psi: &QuantumState) -> Vec<f64> {
    (0..=basis.max_excitations())
        .map(|n| {
            basis
                .sector_indices(n)
                .iter()
                .map(|&i| psi.amplitudes[i].norm_sqr())
                .sum()
        })
        .collect()
}

#[test]
fn drive_free_evolution_conserves_sector_populations() {
    let (basis, params) = lattice();
    let h = TimeDependentHamiltonian::new(build_lattice_hamiltonian(&params, &basis).unwrap());
    let psi0 = spread_state(&basis);
    let before = sector_weights(&basis, &psi0);
    let times: Vec<f64> = (1..=5).map(|k| k as f64 * 2.0).collect();
    // H never couples sectors, so only the per-sector norm error of the
    // integrator shows up here; a tight tolerance isolates the structure.
    for psi in evolve_schrodinger(&h, &psi0, &times, 1e-10).unwrap() {
        for (a, b) in sector_weights(&basis, &psi).iter().zip(&before) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}: {:e}", a - b);
        }
    }
}

fn channels(basis: &FockBasis, params: &SystemParams, scale: f64) -> Vec<CollapseChannel> {
    let mut out = Vec::new();
    for j in 0..4 {
        out.push(
            CollapseChannel::new(
                basis.site_operator(j, SiteOp::Annihilate).unwrap(),
                scale * params.kappa,
            )
            .unwrap(),
        );
        out.push(
            CollapseChannel::new(
                basis.site_operator(j, SiteOp::SigmaMinus).unwrap(),
                scale * params.gamma_q,
            )
            .unwrap(),
        );
    }
    out
}

#[test]
fn lindblad_trace_and_positivity() {
    let (basis, params) = lattice_with(Some(2));
    let h = TimeDependentHamiltonian::new(build_lattice_hamiltonian(&params, &basis).unwrap());
    let rho0 = spread_state(&basis).to_density();
    let times: Vec<f64> = (1..=8).map(|k| k as f64 * 2.5).collect();
    let out = evolve_lindblad(&h, &channels(&basis, &params, 1.0), &rho0, &times, 1e-8).unwrap();
    for rho in &out {
        assert!((rho.trace() - 1.0).abs() < 1e-8);
        assert!(rho.min_eigenvalue() > -1e-6);
        assert!(rho.hermiticity_defect() < 1e-14);
    }
    // total excitation number can only fall
    let number = basis.total_excitation_operator();
    let n: Vec<f64> = std::iter::once(&rho0)
        .chain(&out)
        .map(|r| r.expectation(&number).re)
        .collect();
    assert!(n.windows(2).all(|w| w[1] <= w[0] + 1e-9));
}

#[test]
fn vanishing_rates_reproduce_schrodinger() {
    let (basis, params) = lattice_with(Some(2));
    let h = TimeDependentHamiltonian::new(build_lattice_hamiltonian(&params, &basis).unwrap());
    let psi0 = spread_state(&basis);
    let t = [6.0];
    let psi = evolve_schrodinger(&h, &psi0, &t, 1e-9)
        .unwrap()
        .pop()
        .unwrap();
    let rho: DensityMatrix = evolve_lindblad(
        &h,
        &channels(&basis, &params, 0.0),
        &psi0.to_density(),
        &t,
        1e-9,
    )
    .unwrap()
    .pop()
    .unwrap();
    assert!((rho.fidelity(&psi) - 1.0).abs() < 1e-6);
    assert!((rho.purity() - 1.0).abs() < 1e-6);
}
