//! Truncated Fock spaces for rings of resonator (+ qubit) cells.
//!
//! A basis state is a product over sites of a photon number `n <= photon_cutoff`
//! and, when qubits are present, a qubit level `q` in {down, up}. States are
//! ordered lexicographically over (site 1, ..., site n) with the qubit level as
//! the least-significant digit of each site, so the local index of a site is
//! `n * 2 + q` (or just `n` without qubits). An optional global cutoff keeps
//! only states with `sum_j (n_j + q_j) <= n_max`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::operator::Operator;

/// Default ceiling on the basis dimension.
pub const DEFAULT_DIMENSION_CAP: usize = 200_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SiteLevel {
    pub photons: u32,
    pub excited: bool,
}

impl SiteLevel {
    pub const VACUUM: SiteLevel = SiteLevel {
        photons: 0,
        excited: false,
    };

    pub fn excitations(self) -> u32 {
        self.photons + self.excited as u32
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SiteOp {
    Annihilate,
    Create,
    Number,
    SigmaMinus,
    SigmaPlus,
    SigmaZ,
}

impl SiteOp {
    fn needs_qubit(self) -> bool {
        matches!(
            self,
            SiteOp::SigmaMinus | SiteOp::SigmaPlus | SiteOp::SigmaZ
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FockBasis {
    n_sites: usize,
    photon_cutoff: u32,
    has_qubits: bool,
    excitation_cutoff: Option<u32>,
    /// Mixed-radix codes of the admissible states, ascending.
    codes: Vec<u64>,
}

impl FockBasis {
    pub fn new(
        n_sites: usize,
        photon_cutoff: u32,
        has_qubits: bool,
        excitation_cutoff: Option<u32>,
    ) -> Result<Self> {
        Self::with_cap(
            n_sites,
            photon_cutoff,
            has_qubits,
            excitation_cutoff,
            DEFAULT_DIMENSION_CAP,
        )
    }

    pub fn with_cap(
        n_sites: usize,
        photon_cutoff: u32,
        has_qubits: bool,
        excitation_cutoff: Option<u32>,
        cap: usize,
    ) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::InvalidArgument("n_sites must be at least 1".into()));
        }
        let local_dim = (photon_cutoff as u64 + 1) * if has_qubits { 2 } else { 1 };
        if (local_dim as f64).powi(n_sites as i32) >= u64::MAX as f64 {
            return Err(Error::InvalidArgument(
                "product space too large to index".into(),
            ));
        }
        let mut basis = Self {
            n_sites,
            photon_cutoff,
            has_qubits,
            excitation_cutoff,
            codes: Vec::new(),
        };
        let mut codes = Vec::new();
        basis.enumerate(0, 0, 0, &mut codes, cap)?;
        basis.codes = codes;
        Ok(basis)
    }

    // Depth-first over sites; every admissible prefix extends to an admissible
    // state, so the walk is linear in the final dimension.
    fn enumerate(
        &self,
        site: usize,
        code: u64,
        used: u32,
        out: &mut Vec<u64>,
        cap: usize,
    ) -> Result<()> {
        if site == self.n_sites {
            if out.len() == cap {
                return Err(Error::DimensionCap { dim: cap + 1, cap });
            }
            out.push(code);
            return Ok(());
        }
        for local in 0..self.local_dim() {
            let level = self.local_level(local);
            let total = used + level.excitations();
            if self.excitation_cutoff.is_some_and(|n| total > n) {
                continue;
            }
            self.enumerate(
                site + 1,
                code * self.local_dim() as u64 + local as u64,
                total,
                out,
                cap,
            )?;
        }
        Ok(())
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn photon_cutoff(&self) -> u32 {
        self.photon_cutoff
    }

    pub fn has_qubits(&self) -> bool {
        self.has_qubits
    }

    pub fn excitation_cutoff(&self) -> Option<u32> {
        self.excitation_cutoff
    }

    pub fn dim(&self) -> usize {
        self.codes.len()
    }

    pub fn local_dim(&self) -> usize {
        (self.photon_cutoff as usize + 1) * if self.has_qubits { 2 } else { 1 }
    }

    fn local_level(&self, local: usize) -> SiteLevel {
        if self.has_qubits {
            SiteLevel {
                photons: (local / 2) as u32,
                excited: local % 2 == 1,
            }
        } else {
            SiteLevel {
                photons: local as u32,
                excited: false,
            }
        }
    }

    fn local_index(&self, level: SiteLevel) -> Option<usize> {
        if level.photons > self.photon_cutoff || (level.excited && !self.has_qubits) {
            return None;
        }
        Some(if self.has_qubits {
            level.photons as usize * 2 + level.excited as usize
        } else {
            level.photons as usize
        })
    }

    pub fn label(&self, index: usize) -> Vec<SiteLevel> {
        let d = self.local_dim() as u64;
        let mut code = self.codes[index];
        let mut levels = vec![SiteLevel::VACUUM; self.n_sites];
        for site in (0..self.n_sites).rev() {
            levels[site] = self.local_level((code % d) as usize);
            code /= d;
        }
        levels
    }

    /// Index of a product state, or `None` when it lies outside the truncation.
    pub fn index_of(&self, levels: &[SiteLevel]) -> Option<usize> {
        if levels.len() != self.n_sites {
            return None;
        }
        let d = self.local_dim() as u64;
        let mut code = 0u64;
        let mut total = 0;
        for &level in levels {
            code = code * d + self.local_index(level)? as u64;
            total += level.excitations();
        }
        if self.excitation_cutoff.is_some_and(|n| total > n) {
            return None;
        }
        self.codes.binary_search(&code).ok()
    }

    pub fn excitations(&self, index: usize) -> u32 {
        self.label(index).iter().map(|l| l.excitations()).sum()
    }

    pub fn vacuum_index(&self) -> usize {
        0
    }

    pub fn check_site(&self, site: usize) -> Result<()> {
        if site < self.n_sites {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "site {site} out of range for {} sites",
                self.n_sites
            )))
        }
    }

    /// Single-site operator embedded in the full basis. Raising past either
    /// cutoff is dropped (hard truncation).
    pub fn site_operator(&self, site: usize, kind: SiteOp) -> Result<Operator> {
        self.check_site(site)?;
        if kind.needs_qubit() && !self.has_qubits {
            return Err(Error::InvalidArgument(format!(
                "{kind:?} requires qubits in the basis"
            )));
        }
        let mut triplets = Vec::new();
        for col in 0..self.dim() {
            let mut levels = self.label(col);
            let here = levels[site];
            let (target, amp) = match kind {
                SiteOp::Annihilate if here.photons > 0 => (
                    SiteLevel {
                        photons: here.photons - 1,
                        ..here
                    },
                    (here.photons as f64).sqrt(),
                ),
                SiteOp::Create => (
                    SiteLevel {
                        photons: here.photons + 1,
                        ..here
                    },
                    (here.photons as f64 + 1.0).sqrt(),
                ),
                SiteOp::Number => (here, here.photons as f64),
                SiteOp::SigmaMinus if here.excited => (
                    SiteLevel {
                        excited: false,
                        ..here
                    },
                    1.0,
                ),
                SiteOp::SigmaPlus if !here.excited => (
                    SiteLevel {
                        excited: true,
                        ..here
                    },
                    1.0,
                ),
                SiteOp::SigmaZ => (here, if here.excited { 1.0 } else { -1.0 }),
                _ => continue,
            };
            if amp == 0.0 {
                continue;
            }
            levels[site] = target;
            if let Some(row) = self.index_of(&levels) {
                triplets.push((row, col, C64::new(amp, 0.0)));
            }
        }
        Ok(Operator::from_triplets(self.dim(), triplets))
    }

    /// `N = sum_j (a_j^dag a_j + sigma_j+ sigma_j-)`.
    pub fn total_excitation_operator(&self) -> Operator {
        let diag: Vec<f64> = (0..self.dim())
            .map(|i| self.excitations(i) as f64)
            .collect();
        Operator::diagonal(&diag)
    }

    pub fn photon_number_operator(&self) -> Operator {
        let diag: Vec<f64> = (0..self.dim())
            .map(|i| self.label(i).iter().map(|l| l.photons).sum::<u32>() as f64)
            .collect();
        Operator::diagonal(&diag)
    }

    /// Basis indices with total excitation exactly `n`, ascending.
    pub fn sector_indices(&self, n: u32) -> Vec<usize> {
        (0..self.dim())
            .filter(|&i| self.excitations(i) == n)
            .collect()
    }

    pub fn max_excitations(&self) -> u32 {
        (0..self.dim())
            .map(|i| self.excitations(i))
            .max()
            .unwrap_or(0)
    }

    /// Permutation of site contents: the state of site `j` moves to `perm[j]`.
    pub fn site_permutation(&self, perm: &[usize]) -> Result<Operator> {
        let n = self.n_sites;
        let mut seen = vec![false; n];
        if perm.len() != n
            || perm
                .iter()
                .any(|&p| p >= n || std::mem::replace(&mut seen[p], true))
        {
            return Err(Error::InvalidArgument(format!(
                "{perm:?} is not a permutation of {n} sites"
            )));
        }
        let mut triplets = Vec::with_capacity(self.dim());
        for col in 0..self.dim() {
            let old = self.label(col);
            let mut new = old.clone();
            for (j, &p) in perm.iter().enumerate() {
                new[p] = old[j];
            }
            let row = self.index_of(&new).expect("cutoffs are site-uniform");
            triplets.push((row, col, C64::new(1.0, 0.0)));
        }
        Ok(Operator::from_triplets(self.dim(), triplets))
    }

    /// Cyclic shift `j -> j + 1 (mod n)`; `T a_j T^dag = a_{j+1}`.
    pub fn translation(&self) -> Operator {
        let perm: Vec<usize> = (0..self.n_sites).map(|j| (j + 1) % self.n_sites).collect();
        self.site_permutation(&perm)
            .expect("valid cyclic permutation")
    }

    /// Mirror `j -> -j (mod n)`, fixing the first site.
    pub fn reflection(&self) -> Operator {
        let n = self.n_sites;
        let perm: Vec<usize> = (0..n).map(|j| (n - j) % n).collect();
        self.site_permutation(&perm).expect("valid reflection")
    }

    pub fn basis_vector(&self, index: usize) -> DVector<C64> {
        let mut v = DVector::zeros(self.dim());
        v[index] = C64::new(1.0, 0.0);
        v
    }

    pub fn vacuum(&self) -> DVector<C64> {
        self.basis_vector(self.vacuum_index())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    pub amplitudes: DVector<C64>,
    pub time: f64,
}

impl QuantumState {
    pub fn new(amplitudes: DVector<C64>, time: f64) -> Self {
        Self { amplitudes, time }
    }

    pub fn normalized(amplitudes: DVector<C64>) -> Self {
        let norm = amplitudes.norm();
        Self {
            amplitudes: amplitudes / C64::new(norm, 0.0),
            time: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn overlap(&self, other: &QuantumState) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    /// `|<self|other>|^2`.
    pub fn fidelity(&self, other: &QuantumState) -> f64 {
        self.overlap(other).norm_sqr()
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix {
            matrix: &self.amplitudes * self.amplitudes.adjoint(),
            time: self.time,
        }
    }

    /// Rotates the global phase so the largest-magnitude amplitude is real positive.
    pub fn fix_phase(&mut self) {
        fix_phase(&mut self.amplitudes);
    }
}

pub(crate) fn fix_phase(v: &mut DVector<C64>) {
    let mut best = 0;
    let mut best_mag = -1.0;
    for (i, a) in v.iter().enumerate() {
        // small margin so near-ties resolve to the lowest index reproducibly
        if a.norm() > best_mag * (1.0 + 1e-9) {
            best_mag = a.norm();
            best = i;
        }
    }
    if best_mag > 0.0 {
        let phase = v[best].conj() / C64::new(best_mag, 0.0);
        v.iter_mut().for_each(|a| *a *= phase);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    pub matrix: DMatrix<C64>,
    pub time: f64,
}

impl DensityMatrix {
    pub fn new(matrix: DMatrix<C64>, time: f64) -> Self {
        Self { matrix, time }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    /// `<psi| rho |psi>`.
    pub fn fidelity(&self, psi: &QuantumState) -> f64 {
        psi.amplitudes.dotc(&(&self.matrix * &psi.amplitudes)).re
    }

    pub fn population(&self, index: usize) -> f64 {
        self.matrix[(index, index)].re
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint())
            .iter()
            .fold(0.0f64, |m, z| m.max(z.norm()))
    }

    pub fn hermitize(&mut self) {
        let adj = self.matrix.adjoint();
        self.matrix = (&self.matrix + adj) * C64::new(0.5, 0.0);
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let mut m = self.matrix.clone();
        let adj = m.adjoint();
        m = (m + adj) * C64::new(0.5, 0.0);
        m.symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn expectation(&self, op: &Operator) -> C64 {
        let n = self.dim();
        let mut prod = DMatrix::zeros(n, n);
        op.apply_left_acc(
            self.matrix.as_slice(),
            prod.as_mut_slice(),
            C64::new(1.0, 0.0),
        );
        prod.trace()
    }
}
