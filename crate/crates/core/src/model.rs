//! Lattice Hamiltonians, drives and parameter helpers.
//!
//! All frequencies and rates are angular (rad/s) with hbar = 1, so an energy
//! `hbar * w` is stored as `w`.

use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hilbert::{FockBasis, SiteOp};
use crate::operator::Operator;
use crate::spectrum::polariton_energy;

#[derive(Clone, Debug, PartialEq)]
pub struct SystemParams {
    /// Resonator frequency.
    pub omega0: f64,
    /// Qubit detuning `omega_z - omega0`.
    pub delta: f64,
    /// Resonator-qubit coupling.
    pub g: f64,
    /// Nearest-neighbour photon tunneling `J`.
    pub hopping: f64,
    /// Resonator damping.
    pub kappa: f64,
    /// Qubit decoherence.
    pub gamma_q: f64,
    /// Per-site resonator frequency deviations; empty means all zero.
    pub delta_omega0: Vec<f64>,
    /// Per-site coupling deviations; empty means all zero.
    pub delta_g: Vec<f64>,
}

impl Default for SystemParams {
    /// The superconducting-circuit operating point: 10 GHz resonators,
    /// g/2pi = 100 MHz, J/2pi = 50 MHz, kappa/2pi = 10 kHz, gamma_q/2pi = 100 kHz.
    fn default() -> Self {
        Self {
            omega0: TAU * 10e9,
            delta: 0.0,
            g: TAU * 100e6,
            hopping: TAU * 50e6,
            kappa: TAU * 10e3,
            gamma_q: TAU * 100e3,
            delta_omega0: Vec::new(),
            delta_g: Vec::new(),
        }
    }
}

impl SystemParams {
    pub fn omega_z(&self) -> f64 {
        self.omega0 + self.delta
    }

    pub fn site_omega0(&self, site: usize) -> f64 {
        self.omega0 + self.delta_omega0.get(site).copied().unwrap_or(0.0)
    }

    pub fn site_g(&self, site: usize) -> f64 {
        self.g + self.delta_g.get(site).copied().unwrap_or(0.0)
    }

    /// Polariton damping `(kappa + gamma_q) / 2` at zero detuning.
    pub fn polariton_damping(&self) -> f64 {
        0.5 * (self.kappa + self.gamma_q)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.omega0,
            self.delta,
            self.g,
            self.hopping,
            self.kappa,
            self.gamma_q,
        ]
        .iter()
        .chain(&self.delta_omega0)
        .chain(&self.delta_g)
        .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidArgument(
                "system parameters must be finite".into(),
            ));
        }
        if self.g < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "coupling g must be non-negative, got {}",
                self.g
            )));
        }
        if self.hopping < 0.0 || self.kappa < 0.0 || self.gamma_q < 0.0 {
            return Err(Error::InvalidArgument(
                "J, kappa and gamma_q must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.g < 5.0 * self.hopping {
            out.push(format!(
                "g/J = {:.3} is outside the strong-coupling regime g >> J",
                self.g / self.hopping
            ));
        }
        out
    }

    fn check_basis(&self, basis: &FockBasis) -> Result<()> {
        if !basis.has_qubits() {
            return Err(Error::BasisMismatch(
                "lattice Hamiltonian needs qubit levels".into(),
            ));
        }
        let n = basis.n_sites();
        for (name, v) in [
            ("delta_omega0", &self.delta_omega0),
            ("delta_g", &self.delta_g),
        ] {
            if !v.is_empty() && v.len() != n {
                return Err(Error::BasisMismatch(format!(
                    "{name} has {} entries for {n} sites",
                    v.len()
                )));
            }
        }
        Ok(())
    }
}

/// Nearest-neighbour bonds of a ring; a single bond for two sites, none for one.
pub fn ring_bonds(n_sites: usize) -> Vec<(usize, usize)> {
    match n_sites {
        0 | 1 => Vec::new(),
        2 => vec![(0, 1)],
        n => (0..n).map(|j| (j, (j + 1) % n)).collect(),
    }
}

fn hopping_operator(basis: &FockBasis, strength: f64) -> Result<Operator> {
    let mut terms = Vec::new();
    for (j, k) in ring_bonds(basis.n_sites()) {
        let ad = basis.site_operator(j, SiteOp::Create)?;
        let a = basis.site_operator(k, SiteOp::Annihilate)?;
        let forward = ad.matmul(&a);
        terms.push(forward.adjoint());
        terms.push(forward);
    }
    let c = C64::new(strength, 0.0);
    Ok(Operator::linear_combination(
        basis.dim(),
        terms.iter().map(|t| (c, t)),
    ))
}

/// `sum_j [w0_j a^dag a + (w_z/2) sigma_z + g_j (a^dag sigma- + sigma+ a)] + J sum_<jk> (a_j^dag a_k + h.c.)`.
pub fn build_lattice_hamiltonian(params: &SystemParams, basis: &FockBasis) -> Result<Operator> {
    params.validate()?;
    params.check_basis(basis)?;
    let dim = basis.dim();
    let mut terms: Vec<(C64, Operator)> = Vec::new();
    let real = |x: f64| C64::new(x, 0.0);
    for j in 0..basis.n_sites() {
        let a = basis.site_operator(j, SiteOp::Annihilate)?;
        let sm = basis.site_operator(j, SiteOp::SigmaMinus)?;
        terms.push((
            real(params.site_omega0(j)),
            basis.site_operator(j, SiteOp::Number)?,
        ));
        terms.push((
            real(0.5 * params.omega_z()),
            basis.site_operator(j, SiteOp::SigmaZ)?,
        ));
        let exchange = a.adjoint().matmul(&sm);
        terms.push((real(params.site_g(j)), exchange.adjoint()));
        terms.push((real(params.site_g(j)), exchange));
    }
    terms.push((real(1.0), hopping_operator(basis, params.hopping)?));
    Ok(Operator::linear_combination(
        dim,
        terms.iter().map(|(c, op)| (*c, op)),
    ))
}

/// `sum_j sigma_z^(j) / 2`, the generator of a qubit-frequency change.
pub fn qubit_detuning_operator(basis: &FockBasis) -> Result<Operator> {
    let mut terms = Vec::new();
    for j in 0..basis.n_sites() {
        terms.push(basis.site_operator(j, SiteOp::SigmaZ)?);
    }
    Ok(Operator::linear_combination(
        basis.dim(),
        terms.iter().map(|t| (C64::new(0.5, 0.0), t)),
    ))
}

/// One rectangular segment of a monochromatic drive on the resonators.
#[derive(Clone, Debug, PartialEq)]
pub struct PulseSegment {
    /// Per-site amplitudes `eps_j` (rad/s).
    pub amplitudes: Vec<C64>,
    pub drive_frequency: f64,
    /// Seconds.
    pub duration: f64,
}

impl PulseSegment {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "segment duration must be positive, got {}",
                self.duration
            )));
        }
        if !self.drive_frequency.is_finite()
            || self
                .amplitudes
                .iter()
                .any(|a| !a.re.is_finite() || !a.im.is_finite())
        {
            return Err(Error::InvalidArgument("non-finite drive parameters".into()));
        }
        Ok(())
    }

    pub fn max_amplitude(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    pub fn warnings(&self, hopping: f64) -> Vec<String> {
        let mut out = Vec::new();
        if self.max_amplitude() > hopping / 5.0 {
            out.push(format!(
                "drive amplitude {:.3e} rad/s exceeds J/5; off-resonant transitions will not be negligible",
                self.max_amplitude()
            ));
        }
        out
    }
}

/// `e^{-i w_d t} R + e^{i w_d t} R^dag` with `R = sum_j eps_j a_j^dag`.
#[derive(Clone, Debug, PartialEq)]
pub struct Drive {
    raising: Operator,
    lowering: Operator,
    frequency: f64,
}

impl Drive {
    pub fn new(raising: Operator, frequency: f64) -> Self {
        let lowering = raising.adjoint();
        Self {
            raising,
            lowering,
            frequency,
        }
    }

    pub fn frequency(&self) -> f64 {
        self.frequency
    }

    pub fn raising(&self) -> &Operator {
        &self.raising
    }

    pub fn lowering(&self) -> &Operator {
        &self.lowering
    }

    /// Drive matrix at lab-frame time `t`.
    pub fn at(&self, t: f64) -> Operator {
        let phase = C64::from_polar(1.0, -self.frequency * t);
        Operator::linear_combination(
            self.raising.dim(),
            [(phase, &self.raising), (phase.conj(), &self.lowering)],
        )
    }

    /// Time-independent drive term in the frame rotating at the drive frequency.
    pub fn rotating_frame_term(&self) -> Operator {
        self.raising.add(&self.lowering)
    }
}

fn drive_from_amplitudes(amplitudes: &[C64], frequency: f64, basis: &FockBasis) -> Result<Drive> {
    if amplitudes.len() != basis.n_sites() {
        return Err(Error::BasisMismatch(format!(
            "{} drive amplitudes for {} sites",
            amplitudes.len(),
            basis.n_sites()
        )));
    }
    let mut ops = Vec::new();
    for j in 0..basis.n_sites() {
        ops.push(basis.site_operator(j, SiteOp::Create)?);
    }
    let raising =
        Operator::linear_combination(basis.dim(), amplitudes.iter().copied().zip(ops.iter()));
    Ok(Drive::new(raising, frequency))
}

/// Drive acting on the resonator modes only.
pub fn build_drive_generator(segment: &PulseSegment, basis: &FockBasis) -> Result<Drive> {
    segment.validate()?;
    drive_from_amplitudes(&segment.amplitudes, segment.drive_frequency, basis)
}

/// Parameters of the lower-polariton Bose-Hubbard model.
#[derive(Clone, Debug, PartialEq)]
pub struct BoseHubbardParams {
    /// Lower-polariton frequency `E_1-`.
    pub onsite_energy: f64,
    /// Polariton hopping.
    pub hopping: f64,
    /// On-site interaction `U`.
    pub interaction: f64,
    /// Polariton damping.
    pub gamma_p: f64,
    /// Amplitude of a resonator drive projected onto the polariton mode.
    pub drive_projection: f64,
}

impl BoseHubbardParams {
    /// Lower-polariton projection of the lattice parameters.
    ///
    /// The photon weight of the lower polariton is
    /// `c^2 = (1 + delta / sqrt(delta^2 + 4 g^2)) / 2`, which scales the hopping
    /// by `c^2` and the drive by `c` (`J/2` and `1/sqrt 2` on resonance).
    pub fn from_system(params: &SystemParams) -> Result<Self> {
        params.validate()?;
        let d = params.delta;
        let photon_weight = 0.5 * (1.0 + d / (d * d + 4.0 * params.g * params.g).sqrt());
        Ok(Self {
            onsite_energy: polariton_energy(
                params.omega0,
                d,
                params.g,
                1,
                crate::spectrum::Branch::Lower,
            )?,
            hopping: params.hopping * photon_weight,
            interaction: crate::spectrum::effective_kerr_u(params.omega0, d, params.g),
            gamma_p: params.polariton_damping(),
            drive_projection: photon_weight.sqrt(),
        })
    }

    /// Resonant-point model with the interaction and damping given relative to
    /// the lattice tunneling `J` (hopping `J/2`, projection `1/sqrt 2`).
    pub fn at_resonance(params: &SystemParams, u_over_j: f64, gamma_p_over_j: f64) -> Self {
        Self {
            onsite_energy: params.omega0 - params.g,
            hopping: 0.5 * params.hopping,
            interaction: u_over_j * params.hopping,
            gamma_p: gamma_p_over_j * params.hopping,
            drive_projection: FRAC_1_SQRT_2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [
            self.onsite_energy,
            self.hopping,
            self.interaction,
            self.gamma_p,
            self.drive_projection,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "Bose-Hubbard parameters must be finite".into(),
            ));
        }
        if self.gamma_p < 0.0 {
            return Err(Error::InvalidArgument(
                "gamma_p must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// `sum_j [w_L n_j + (U/2) n_j (n_j - 1)] + J_eff sum_<jk> (b_j^dag b_k + h.c.)`.
pub fn build_bose_hubbard(bh: &BoseHubbardParams, basis: &FockBasis) -> Result<Operator> {
    bh.validate()?;
    if basis.has_qubits() {
        return Err(Error::BasisMismatch(
            "Bose-Hubbard model takes a boson-only basis".into(),
        ));
    }
    let diag: Vec<f64> = (0..basis.dim())
        .map(|i| {
            basis
                .label(i)
                .iter()
                .map(|l| {
                    let n = l.photons as f64;
                    bh.onsite_energy * n + 0.5 * bh.interaction * n * (n - 1.0)
                })
                .sum()
        })
        .collect();
    Ok(Operator::diagonal(&diag).add(&hopping_operator(basis, bh.hopping)?))
}

/// Resonator drive mapped onto the polariton modes.
pub fn build_bose_hubbard_drive(
    segment: &PulseSegment,
    bh: &BoseHubbardParams,
    basis: &FockBasis,
) -> Result<Drive> {
    segment.validate()?;
    if basis.has_qubits() {
        return Err(Error::BasisMismatch(
            "Bose-Hubbard drive takes a boson-only basis".into(),
        ));
    }
    let scaled: Vec<C64> = segment
        .amplitudes
        .iter()
        .map(|a| a * bh.drive_projection)
        .collect();
    drive_from_amplitudes(&scaled, segment.drive_frequency, basis)
}

/// Capacitive tunneling between coplanar-waveguide resonators,
/// `J = omega0 * C_1 / C_r`, from the end-to-end voltage coupling
/// `C_1 V_j(L) V_{j+1}(0)` with `V_j(x) = sqrt(hbar omega0 / C_r)(a_j^dag + a_j) cos(2 pi x / L)`.
pub fn tunneling_from_capacitance(omega0: f64, c_coupling: f64, c_resonator: f64) -> Result<f64> {
    if !(c_resonator > 0.0) || !(c_coupling >= 0.0) || !omega0.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "capacitances must be C_1 >= 0 and C_r > 0 (got C_1 = {c_coupling:e}, C_r = {c_resonator:e})"
        )));
    }
    if c_coupling > 0.1 * c_resonator {
        log::warn!(
            "C_1/C_r = {:.3} is not small; the weak-coupling formula is approximate",
            c_coupling / c_resonator
        );
    }
    Ok(omega0 * c_coupling / c_resonator)
}

/// Qubit detuning that restores the lower-polariton energy `omega0 - g` of a
/// cell whose resonator frequency is off by `delta_omega0` and coupling by `delta_g`.
pub fn compensating_detuning(g: f64, delta_g: f64, delta_omega0: f64) -> Result<f64> {
    let denom = delta_omega0 + g;
    if denom.abs() <= 1e-12 * g.abs().max(f64::MIN_POSITIVE) || !denom.is_finite() {
        return Err(Error::Singular(format!("delta_omega0 + g = {denom:e}")));
    }
    let coupling = delta_g + g;
    Ok((coupling * coupling - denom * denom) / denom)
}
