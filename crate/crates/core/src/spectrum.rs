//! Sector-resolved exact diagonalization and identification of the
//! protocol's named eigenstates.
//!
//! The undriven Hamiltonians conserve the total excitation number, so each
//! sector is diagonalized on its own block. Degenerate eigenspaces are split by
//! the ring symmetries: first the cyclic shift `T` (translation eigenvalues are
//! 4th roots of unity on a 4-ring), then the mirror `R` that fixes site 1.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::csv::CsvTable;
use crate::error::{Error, Result};
use crate::hilbert::{fix_phase, FockBasis, QuantumState};
use crate::operator::Operator;

/// Relative tolerance (to the largest |eigenvalue|) below which eigenvalues
/// are treated as exactly degenerate when splitting by symmetry.
const DEGENERACY_RTOL: f64 = 1e-11;
/// Distance from a unit-modulus value below which a symmetry expectation is
/// accepted as a label.
const LABEL_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EigenBackend {
    /// nalgebra's Householder + implicit QR Hermitian solver.
    #[default]
    Householder,
    /// Cyclic complex Jacobi rotations.
    Jacobi,
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(m: &DMatrix<C64>, backend: EigenBackend) -> (Vec<f64>, DMatrix<C64>) {
    let (values, vectors) = match backend {
        EigenBackend::Householder => {
            let eig = m.clone().symmetric_eigen();
            (
                eig.eigenvalues.iter().cloned().collect::<Vec<_>>(),
                eig.eigenvectors,
            )
        }
        EigenBackend::Jacobi => jacobi_eigen(m),
    };
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let sorted_values = order.iter().map(|&i| values[i]).collect();
    let sorted_vectors = DMatrix::from_fn(m.nrows(), order.len(), |r, c| vectors[(r, order[c])]);
    (sorted_values, sorted_vectors)
}

fn jacobi_eigen(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let n = m.nrows();
    let mut a = m.clone();
    let mut v = DMatrix::<C64>::identity(n, n);
    let scale = a.norm().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|p| (0..n).filter(move |&q| q != p).map(move |q| (p, q)))
            .map(|(p, q)| a[(p, q)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag <= 1e-300 {
                    continue;
                }
                // D^dag A D makes the (p, q) element real; then a real rotation.
                let omega = apq / mag;
                let theta = (a[(q, q)].re - a[(p, p)].re) / (2.0 * mag);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let up_q = -omega.conj() * s; // U[q, p]
                let uq_q = omega.conj() * c; // U[q, q]
                for r in 0..n {
                    let (arp, arq) = (a[(r, p)], a[(r, q)]);
                    a[(r, p)] = arp * c + arq * up_q;
                    a[(r, q)] = arp * s + arq * uq_q;
                    let (vrp, vrq) = (v[(r, p)], v[(r, q)]);
                    v[(r, p)] = vrp * c + vrq * up_q;
                    v[(r, q)] = vrp * s + vrq * uq_q;
                }
                for col in 0..n {
                    let (apc, aqc) = (a[(p, col)], a[(q, col)]);
                    a[(p, col)] = apc * c + aqc * up_q.conj();
                    a[(q, col)] = apc * s + aqc * uq_q.conj();
                }
                a[(p, q)] = C64::new(0.0, 0.0);
                a[(q, p)] = C64::new(0.0, 0.0);
            }
        }
    }
    ((0..n).map(|i| a[(i, i)].re).collect(), v)
}

/// Eigenpairs of one excitation sector.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    pub sector: u32,
    /// Ascending, rad/s.
    pub energies: Vec<f64>,
    /// Eigenvectors embedded in the full basis, phase-fixed.
    pub vectors: Vec<QuantumState>,
    /// Eigenvalue of the cyclic shift, when the Hamiltonian is translation invariant.
    pub translation: Vec<Option<C64>>,
    /// Eigenvalue (+1/-1) of the mirror, when the Hamiltonian is mirror symmetric.
    pub reflection: Vec<Option<f64>>,
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }
}

/// Norm of `[N, H]`, using that `N` is diagonal in the product basis.
pub fn excitation_commutator_norm(h: &Operator, basis: &FockBasis) -> f64 {
    let n: Vec<f64> = (0..basis.dim())
        .map(|i| basis.excitations(i) as f64)
        .collect();
    h.triplets()
        .map(|(r, c, v)| ((n[r] - n[c]) * v.norm()).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn commutes(a: &Operator, b: &Operator) -> bool {
    a.commutator(b).norm() <= 1e-12 * a.norm().max(f64::MIN_POSITIVE) * b.norm().max(1.0)
}

pub fn diagonalize_sector(h: &Operator, basis: &FockBasis, n: u32) -> Result<EigenSystem> {
    diagonalize_sector_with(h, basis, n, EigenBackend::default())
}

pub fn diagonalize_sector_with(
    h: &Operator,
    basis: &FockBasis,
    n: u32,
    backend: EigenBackend,
) -> Result<EigenSystem> {
    h.require_dim(basis.dim())?;
    let scale = h.norm();
    let comm = excitation_commutator_norm(h, basis);
    if comm > 1e-12 * scale {
        return Err(Error::SectorMixing { norm: comm, scale });
    }
    let indices = basis.sector_indices(n);
    if indices.is_empty() {
        return Err(Error::EmptySector(n));
    }
    let block = h.submatrix(&indices);
    let (energies, mut vecs) = hermitian_eigen(&block, backend);

    let translation = basis.translation();
    let reflection = basis.reflection();
    let t_sym = basis.n_sites() > 1 && commutes(h, &translation);
    let r_sym = basis.n_sites() > 1 && commutes(h, &reflection);
    let t_block = translation.submatrix(&indices);
    let r_block = reflection.submatrix(&indices);

    let max_e = energies.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let tol = DEGENERACY_RTOL * max_e.max(f64::MIN_POSITIVE);
    for range in clusters(&energies, tol) {
        if range.len() < 2 {
            continue;
        }
        if t_sym {
            // cos(phi) Re(T) + sin(phi) Im(T) separates all n-th roots of unity
            // for irrational phi / pi.
            let (cphi, sphi) = (0.3f64.cos(), 0.3f64.sin());
            let t_adj = t_block.adjoint();
            let half = C64::new(0.5, 0.0);
            let mixed = (&t_block + &t_adj) * half * C64::new(cphi, 0.0)
                + (&t_block - &t_adj) * C64::new(0.0, -0.5) * C64::new(sphi, 0.0);
            resolve_cluster(&mut vecs, range.clone(), &mixed, backend);
        }
        if r_sym {
            let labels: Vec<C64> = range
                .clone()
                .map(|k| expectation(&t_block, &vecs.column(k).into()))
                .collect();
            let mut start = range.start;
            while start < range.end {
                let mut stop = start + 1;
                while stop < range.end
                    && (labels[stop - range.start] - labels[start - range.start]).norm() < 1e-6
                {
                    stop += 1;
                }
                if stop - start > 1 {
                    resolve_cluster(&mut vecs, start..stop, &r_block, backend);
                }
                start = stop;
            }
        }
    }

    let mut vectors = Vec::with_capacity(energies.len());
    let mut t_labels = Vec::with_capacity(energies.len());
    let mut r_labels = Vec::with_capacity(energies.len());
    for k in 0..energies.len() {
        let mut local: DVector<C64> = vecs.column(k).into();
        fix_phase(&mut local);
        t_labels.push(if t_sym {
            unit_label(expectation(&t_block, &local))
        } else {
            None
        });
        r_labels.push(if r_sym {
            unit_label(expectation(&r_block, &local)).map(|z| z.re)
        } else {
            None
        });
        let mut full = DVector::zeros(basis.dim());
        for (p, &i) in indices.iter().enumerate() {
            full[i] = local[p];
        }
        vectors.push(QuantumState::new(full, 0.0));
    }
    Ok(EigenSystem {
        sector: n,
        energies,
        vectors,
        translation: t_labels,
        reflection: r_labels,
    })
}

fn expectation(m: &DMatrix<C64>, v: &DVector<C64>) -> C64 {
    v.dotc(&(m * v))
}

fn unit_label(z: C64) -> Option<C64> {
    ((z.norm() - 1.0).abs() < LABEL_TOL).then_some(z)
}

/// Contiguous index ranges of eigenvalues closer than `tol` to their neighbour.
fn clusters(sorted: &[f64], tol: f64) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for k in 1..=sorted.len() {
        if k == sorted.len() || sorted[k] - sorted[k - 1] > tol {
            out.push(start..k);
            start = k;
        }
    }
    out
}

/// Rotates the columns `range` of `vecs` onto eigenvectors of the Hermitian
/// operator `sym` restricted to their span.
fn resolve_cluster(
    vecs: &mut DMatrix<C64>,
    range: std::ops::Range<usize>,
    sym: &DMatrix<C64>,
    backend: EigenBackend,
) {
    let sub = vecs.columns(range.start, range.len()).into_owned();
    let restricted = sub.adjoint() * sym * &sub;
    let herm = (&restricted + restricted.adjoint()) * C64::new(0.5, 0.0);
    let (_, rot) = hermitian_eigen(&herm, backend);
    let rotated = sub * rot;
    vecs.columns_mut(range.start, range.len())
        .copy_from(&rotated);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Lower,
    Upper,
}

/// `E_{n+-} = n omega0 + delta/2 +- sqrt(delta^2/4 + n g^2)`, measured from the
/// single-cell ground state `|0, down>`.
pub fn polariton_energy(omega0: f64, delta: f64, g: f64, n: u32, branch: Branch) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "polariton ladder starts at n = 1; the ground energy is 0".into(),
        ));
    }
    let root = (0.25 * delta * delta + n as f64 * g * g).sqrt();
    let base = n as f64 * omega0 + 0.5 * delta;
    Ok(match branch {
        Branch::Lower => base - root,
        Branch::Upper => base + root,
    })
}

/// Effective Kerr interaction `U = E_{2-} - 2 E_{1-}`.
///
/// `omega0` cancels exactly; it is dropped before evaluation so large carrier
/// frequencies do not eat the significant digits of `U`.
pub fn effective_kerr_u(_omega0: f64, delta: f64, g: f64) -> f64 {
    let e1 = polariton_energy(0.0, delta, g, 1, Branch::Lower).expect("n = 1");
    let e2 = polariton_energy(0.0, delta, g, 2, Branch::Lower).expect("n = 2");
    e2 - 2.0 * e1
}

/// Expected excitation energies of the two protocol transitions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Resonances {
    /// `E(psi_1_4) - E(psi_0)`, the first drive frequency.
    pub first: f64,
    /// `E(psi_2_3) - E(psi_1_4)`, the second drive frequency.
    pub second: f64,
}

#[derive(Clone, Debug)]
pub struct NamedStates {
    pub ground: QuantumState,
    pub ground_energy: f64,
    pub psi_1_4: QuantumState,
    pub energy_1_4: f64,
    pub psi_2_3: QuantumState,
    pub energy_2_3: f64,
}

/// Picks `|psi_0>`, `|psi_1_4>` and `|psi_2_3>` out of the N = 0, 1, 2 spectra
/// of a uniform 4-ring.
///
/// `|psi_1_4>` is the translation-symmetric (T = +1) state among the lowest
/// four of N = 1 nearest to `E0 + first`. `|psi_2_3>` is the T = -1, R = +1
/// state among the lowest six of N = 2 nearest to `E0 + first + second`. When
/// several such states are degenerate, `pair_drive` (the raising part of the
/// second pulse) applied to `|psi_1_4>` is projected onto that subspace;
/// without it the ambiguity is reported.
pub fn identify_named_states(
    systems: [&EigenSystem; 3],
    resonances: Resonances,
    pair_drive: Option<&Operator>,
) -> Result<NamedStates> {
    let [zero, one, two] = systems;
    if zero.sector != 0 || one.sector != 1 || two.sector != 2 {
        return Err(Error::InvalidArgument(
            "expected the N = 0, 1, 2 eigensystems in order".into(),
        ));
    }
    if zero.is_empty() {
        return Err(Error::EmptySector(0));
    }
    let ground = zero.vectors[0].clone();
    let e0 = zero.energies[0];
    let scale = [zero, one, two]
        .iter()
        .flat_map(|s| s.energies.iter())
        .fold(0.0f64, |m, e| m.max(e.abs()));
    let tol = 1e3 * DEGENERACY_RTOL * scale.max(f64::MIN_POSITIVE);

    let single = pick(one, 4, e0 + resonances.first, tol, |k| {
        one.translation[k].is_some_and(|z| (z - 1.0).norm() < 1e-6)
    })?;
    let [only] = single.as_slice() else {
        return Err(Error::Ambiguous(format!(
            "{} translation-symmetric N=1 states at the first resonance",
            single.len()
        )));
    };
    let psi_1_4 = one.vectors[*only].clone();
    let energy_1_4 = one.energies[*only];

    let pair = pick(
        two,
        6,
        e0 + resonances.first + resonances.second,
        tol,
        |k| {
            two.translation[k].is_some_and(|z| (z + 1.0).norm() < 1e-6)
                && two.reflection[k].is_none_or(|r| r > 0.0)
        },
    )?;
    let (psi_2_3, energy_2_3) = match (pair.as_slice(), pair_drive) {
        ([k], _) => (two.vectors[*k].clone(), two.energies[*k]),
        (ks, Some(drive)) => {
            let hint = &drive.mul_vec(&psi_1_4.amplitudes);
            let mut v = DVector::zeros(hint.len());
            for &k in ks {
                let u = &two.vectors[k].amplitudes;
                v += u * u.dotc(hint);
            }
            if v.norm() < 1e-12 * hint.norm() {
                return Err(Error::Ambiguous(
                    "drive hint has no weight on the degenerate N=2 candidates".into(),
                ));
            }
            let mut state = QuantumState::normalized(v);
            state.fix_phase();
            (state, two.energies[ks[0]])
        }
        (ks, None) => {
            return Err(Error::Ambiguous(format!(
                "{} degenerate (T=-1, R=+1) N=2 candidates",
                ks.len()
            )))
        }
    };
    Ok(NamedStates {
        ground,
        ground_energy: e0,
        psi_1_4,
        energy_1_4,
        psi_2_3,
        energy_2_3,
    })
}

/// Indices among the lowest `count` states (extended to whole degenerate
/// clusters) that satisfy `accept` and lie nearest to `target`.
fn pick(
    system: &EigenSystem,
    count: usize,
    target: f64,
    tol: f64,
    accept: impl Fn(usize) -> bool,
) -> Result<Vec<usize>> {
    let mut window = count.min(system.len());
    while window < system.len() && system.energies[window] - system.energies[window - 1] <= tol {
        window += 1;
    }
    let candidates: Vec<usize> = (0..window).filter(|&k| accept(k)).collect();
    let best = candidates
        .iter()
        .copied()
        .min_by(|&a, &b| {
            (system.energies[a] - target)
                .abs()
                .total_cmp(&(system.energies[b] - target).abs())
        })
        .ok_or_else(|| {
            Error::NotFound(format!(
                "no state with the required symmetry among the lowest {window} of N={}",
                system.sector
            ))
        })?;
    Ok(candidates
        .into_iter()
        .filter(|&k| (system.energies[k] - system.energies[best]).abs() <= tol)
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyCluster {
    /// Energy above the ground state, rad/s.
    pub energy: f64,
    pub multiplicity: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DegeneracyProfile {
    pub ground_energy: f64,
    /// `(N, clusters ascending)`.
    pub sectors: Vec<(u32, Vec<EnergyCluster>)>,
}

impl DegeneracyProfile {
    pub fn sector(&self, n: u32) -> Option<&[EnergyCluster]> {
        self.sectors
            .iter()
            .find(|(m, _)| *m == n)
            .map(|(_, c)| c.as_slice())
    }
}

/// Multiplicity table of the given sectors, eigenvalues grouped when closer
/// than `tol` (absolute, rad/s).
pub fn degeneracy_profile(
    h: &Operator,
    basis: &FockBasis,
    sectors: &[u32],
    tol: f64,
) -> Result<DegeneracyProfile> {
    let ground_energy = diagonalize_sector(h, basis, 0)?.energies[0];
    let mut out = Vec::new();
    for &n in sectors {
        let indices = basis.sector_indices(n);
        if indices.is_empty() {
            return Err(Error::EmptySector(n));
        }
        let (energies, _) = hermitian_eigen(&h.submatrix(&indices), EigenBackend::default());
        let found = clusters(&energies, tol)
            .into_iter()
            .map(|r| EnergyCluster {
                energy: energies[r.clone()].iter().sum::<f64>() / r.len() as f64 - ground_energy,
                multiplicity: r.len(),
            })
            .collect();
        out.push((n, found));
    }
    Ok(DegeneracyProfile {
        ground_energy,
        sectors: out,
    })
}

/// Spectrum table: one row per eigenstate, energies above the ground state in Hz.
pub fn spectrum_table(systems: &[EigenSystem], ground_energy: f64) -> CsvTable {
    let mut table = CsvTable::new(&[
        "sector",
        "index",
        "energy_over_2pi_Hz",
        "translation_label_re",
        "translation_label_im",
    ]);
    table.meta("energy_reference", "ground state (N=0) energy");
    for s in systems {
        for (m, &e) in s.energies.iter().enumerate() {
            let label = s.translation[m].unwrap_or(C64::new(f64::NAN, f64::NAN));
            table.row(vec![
                s.sector.to_string(),
                (m + 1).to_string(),
                crate::csv::num((e - ground_energy) / std::f64::consts::TAU),
                crate::csv::num(label.re),
                crate::csv::num(label.im),
            ]);
        }
    }
    table
}

pub fn write_spectrum_csv<W: Write>(
    out: W,
    systems: &[EigenSystem],
    ground_energy: f64,
) -> Result<()> {
    spectrum_table(systems, ground_energy).write(out)
}
