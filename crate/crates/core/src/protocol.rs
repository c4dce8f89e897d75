//! The two-pulse entangled-pair protocol and the fidelity sweeps built on it.
//!
//! Starting from the ground state, a uniform pulse at the symmetric
//! single-polariton frequency pumps `|psi_0> -> |psi_1_4>` in `pi / (2 sqrt2 eps)`;
//! a staggered pulse `eps (1, -1, 1, -1)` detuned by `-2J` then pumps
//! `|psi_1_4> -> |psi_2_3>` in `pi / (2 eps)`.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use nalgebra::{DVector, Matrix4};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::csv::{num, CsvTable};
use crate::dynamics::{
    evolve_lindblad, evolve_schrodinger, rotate_density, rotate_state, rotating_frame_generator,
    CollapseChannel, Schedule, TimeDependentHamiltonian, DEFAULT_TOLERANCE,
};
use crate::error::{Error, Result};
use crate::hilbert::{DensityMatrix, FockBasis, QuantumState, SiteOp};
use crate::model::{
    build_bose_hubbard, build_bose_hubbard_drive, build_drive_generator, build_lattice_hamiltonian,
    compensating_detuning, BoseHubbardParams, Drive, PulseSegment, SystemParams,
};
use crate::operator::Operator;
use crate::spectrum::{
    diagonalize_sector, effective_kerr_u, identify_named_states, polariton_energy, Branch,
    NamedStates, Resonances,
};

const UNIFORM: [f64; 4] = [1.0, 1.0, 1.0, 1.0];
const STAGGERED: [f64; 4] = [1.0, -1.0, 1.0, -1.0];

fn amplitudes(pattern: &[f64; 4], epsilon: f64) -> Vec<C64> {
    pattern
        .iter()
        .map(|&s| C64::new(s * epsilon, 0.0))
        .collect()
}

/// Two back-to-back rectangular pulses tuned to the given resonances.
pub fn two_pulse_schedule(resonances: Resonances, epsilon: f64) -> Result<Schedule> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "drive amplitude must be positive, got {epsilon}"
        )));
    }
    Ok(Schedule {
        segments: vec![
            PulseSegment {
                amplitudes: amplitudes(&UNIFORM, epsilon),
                drive_frequency: resonances.first,
                duration: PI / (2.0 * SQRT_2 * epsilon),
            },
            PulseSegment {
                amplitudes: amplitudes(&STAGGERED, epsilon),
                drive_frequency: resonances.second,
                duration: PI / (2.0 * epsilon),
            },
        ],
        ramp: None,
    })
}

/// Nominal transition frequencies `E_1- + J` and `E_1- - J`.
pub fn lattice_resonances(params: &SystemParams) -> Result<Resonances> {
    let lower = polariton_energy(params.omega0, params.delta, params.g, 1, Branch::Lower)?;
    Ok(Resonances {
        first: lower + params.hopping,
        second: lower - params.hopping,
    })
}

/// Schedule for the lattice parameters: `w_d = w0 - g +- J` on resonance.
pub fn build_two_pulse_schedule(params: &SystemParams, epsilon: f64) -> Result<Schedule> {
    params.validate()?;
    let schedule = two_pulse_schedule(lattice_resonances(params)?, epsilon)?;
    for w in schedule.segments[0].warnings(params.hopping) {
        log::warn!("{w}");
    }
    Ok(schedule)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    FullJc,
    BoseHubbard,
}

#[derive(Clone, Debug)]
enum DriveCoupling {
    Resonator,
    Polariton(BoseHubbardParams),
}

/// A lattice model ready for the protocol: Hamiltonian, dissipators and the
/// identified named states.
#[derive(Clone, Debug)]
pub struct ProtocolModel {
    pub kind: ModelKind,
    pub basis: FockBasis,
    pub hamiltonian: Operator,
    pub channels: Vec<CollapseChannel>,
    pub resonances: Resonances,
    pub named: NamedStates,
    number: Operator,
    number_diag: Vec<f64>,
    coupling: DriveCoupling,
}

impl ProtocolModel {
    /// Full Jaynes-Cummings ring with photon loss `kappa` and qubit relaxation `gamma_q`.
    pub fn full_jc(
        params: &SystemParams,
        photon_cutoff: u32,
        excitation_cutoff: Option<u32>,
    ) -> Result<Self> {
        for w in params.warnings() {
            log::warn!("{w}");
        }
        let basis = FockBasis::new(4, photon_cutoff, true, excitation_cutoff)?;
        let hamiltonian = build_lattice_hamiltonian(params, &basis)?;
        let mut channels = Vec::new();
        for j in 0..4 {
            channels.push(CollapseChannel::new(
                basis.site_operator(j, SiteOp::Annihilate)?,
                params.kappa,
            )?);
            channels.push(CollapseChannel::new(
                basis.site_operator(j, SiteOp::SigmaMinus)?,
                params.gamma_q,
            )?);
        }
        Self::assemble(
            ModelKind::FullJc,
            basis,
            hamiltonian,
            channels,
            lattice_resonances(params)?,
            DriveCoupling::Resonator,
        )
    }

    /// Lower-polariton Bose-Hubbard ring with damping `gamma_p` on every mode.
    pub fn bose_hubbard(
        bh: &BoseHubbardParams,
        photon_cutoff: u32,
        excitation_cutoff: Option<u32>,
    ) -> Result<Self> {
        let basis = FockBasis::new(4, photon_cutoff, false, excitation_cutoff)?;
        let hamiltonian = build_bose_hubbard(bh, &basis)?;
        let mut channels = Vec::new();
        for j in 0..4 {
            channels.push(CollapseChannel::new(
                basis.site_operator(j, SiteOp::Annihilate)?,
                bh.gamma_p,
            )?);
        }
        let band = 2.0 * bh.hopping;
        let resonances = Resonances {
            first: bh.onsite_energy + band,
            second: bh.onsite_energy - band,
        };
        Self::assemble(
            ModelKind::BoseHubbard,
            basis,
            hamiltonian,
            channels,
            resonances,
            DriveCoupling::Polariton(bh.clone()),
        )
    }

    fn assemble(
        kind: ModelKind,
        basis: FockBasis,
        hamiltonian: Operator,
        channels: Vec<CollapseChannel>,
        resonances: Resonances,
        coupling: DriveCoupling,
    ) -> Result<Self> {
        let number = basis.total_excitation_operator();
        let number_diag = number.diagonal_entries().iter().map(|c| c.re).collect();
        let sectors = [
            diagonalize_sector(&hamiltonian, &basis, 0)?,
            diagonalize_sector(&hamiltonian, &basis, 1)?,
            diagonalize_sector(&hamiltonian, &basis, 2)?,
        ];
        let mut model = Self {
            kind,
            basis,
            hamiltonian,
            channels,
            resonances,
            named: placeholder_named(),
            number,
            number_diag,
            coupling,
        };
        let staggered = PulseSegment {
            amplitudes: amplitudes(&STAGGERED, 1.0),
            drive_frequency: 0.0,
            duration: 1.0,
        };
        let pair_drive = model.drive(&staggered)?.raising().clone();
        model.named = identify_named_states(
            [&sectors[0], &sectors[1], &sectors[2]],
            resonances,
            Some(&pair_drive),
        )?;
        Ok(model)
    }

    pub fn drive(&self, segment: &PulseSegment) -> Result<Drive> {
        match &self.coupling {
            DriveCoupling::Resonator => build_drive_generator(segment, &self.basis),
            DriveCoupling::Polariton(bh) => build_bose_hubbard_drive(segment, bh, &self.basis),
        }
    }

    /// Transition frequencies read off the identified states, as opposed to the
    /// nominal `resonances` (which neglect higher-order shifts in `J/g`).
    pub fn spectral_resonances(&self) -> Resonances {
        let n = &self.named;
        Resonances {
            first: n.energy_1_4 - n.ground_energy,
            second: n.energy_2_3 - n.energy_1_4,
        }
    }

    pub fn number_operator(&self) -> &Operator {
        &self.number
    }

    pub fn populations(&self, state: &FinalState) -> (f64, f64, f64) {
        let n = &self.named;
        (
            state.fidelity(&n.ground),
            state.fidelity(&n.psi_1_4),
            state.fidelity(&n.psi_2_3),
        )
    }
}

fn placeholder_named() -> NamedStates {
    let empty = QuantumState::new(DVector::zeros(0), 0.0);
    NamedStates {
        ground: empty.clone(),
        ground_energy: 0.0,
        psi_1_4: empty.clone(),
        energy_1_4: 0.0,
        psi_2_3: empty,
        energy_2_3: 0.0,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FinalState {
    Pure(QuantumState),
    Mixed(DensityMatrix),
}

impl FinalState {
    pub fn fidelity(&self, target: &QuantumState) -> f64 {
        match self {
            FinalState::Pure(psi) => target.fidelity(psi),
            FinalState::Mixed(rho) => rho.fidelity(target),
        }
    }

    pub fn time(&self) -> f64 {
        match self {
            FinalState::Pure(psi) => psi.time,
            FinalState::Mixed(rho) => rho.time,
        }
    }

    pub fn to_density(&self) -> DensityMatrix {
        match self {
            FinalState::Pure(psi) => psi.to_density(),
            FinalState::Mixed(rho) => rho.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Frame {
    /// Each segment integrated in the frame rotating at its drive frequency.
    #[default]
    Rotating,
    /// Lab frame with explicit `e^{-+i w_d t}` drive phases.
    Lab,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunOptions {
    pub frame: Frame,
    pub tol: f64,
    /// Lindblad evolution with the model's channels; pure-state evolution otherwise.
    pub dissipation: bool,
    /// Evenly spaced trajectory samples inside each segment, besides its end.
    pub samples_per_segment: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            frame: Frame::Rotating,
            tol: DEFAULT_TOLERANCE,
            dissipation: true,
            samples_per_segment: 0,
        }
    }
}

/// Observables along the trajectory. They are invariant under the
/// number-conserving frame rotation, so samples taken in either frame agree.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryPoint {
    pub time: f64,
    pub ground: f64,
    pub psi_1_4: f64,
    pub psi_2_3: f64,
    pub trace: f64,
    /// Smallest eigenvalue of the density matrix (zero for pure states).
    pub min_eig: f64,
}

impl TrajectoryPoint {
    fn sample(model: &ProtocolModel, state: &FinalState) -> Self {
        let (ground, psi_1_4, psi_2_3) = model.populations(state);
        let (trace, min_eig) = match state {
            FinalState::Pure(psi) => (psi.norm().powi(2), 0.0),
            FinalState::Mixed(rho) => (rho.trace(), rho.min_eigenvalue()),
        };
        Self {
            time: state.time(),
            ground,
            psi_1_4,
            psi_2_3,
            trace,
            min_eig,
        }
    }
}

pub fn trajectory_table(points: &[TrajectoryPoint]) -> CsvTable {
    let mut t = CsvTable::new(&[
        "time_s",
        "p_ground",
        "p_psi_1_4",
        "p_psi_2_3",
        "fidelity",
        "trace",
        "min_eig",
    ]);
    for p in points {
        t.row(vec![
            num(p.time),
            num(p.ground),
            num(p.psi_1_4),
            num(p.psi_2_3),
            num(p.psi_2_3),
            num(p.trace),
            num(p.min_eig),
        ]);
    }
    t
}

/// Populations of the named states at the end of one segment.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentDiagnostic {
    pub end_time: f64,
    pub ground: f64,
    pub psi_1_4: f64,
    pub psi_2_3: f64,
    /// State at the segment boundary, usable as a restart checkpoint.
    pub state: FinalState,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolResult {
    pub final_state: FinalState,
    /// `<psi_2_3| rho_f |psi_2_3>`.
    pub fidelity: f64,
    pub segments: Vec<SegmentDiagnostic>,
    /// Start point, in-segment samples and segment ends.
    pub trajectory: Vec<TrajectoryPoint>,
    pub total_duration: f64,
    /// Population outside `{psi_0, psi_1_4, psi_2_3}` at the end.
    pub leakage: f64,
}

/// Runs `schedule` from the ground state at `t = 0`.
pub fn run_schedule(
    model: &ProtocolModel,
    schedule: &Schedule,
    opts: &RunOptions,
) -> Result<ProtocolResult> {
    let ground = QuantumState::new(model.named.ground.amplitudes.clone(), 0.0);
    let start = if opts.dissipation {
        FinalState::Mixed(ground.to_density())
    } else {
        FinalState::Pure(ground)
    };
    resume_schedule(model, schedule, 0, start, opts)
}

/// Continues `schedule` at segment `first_segment` from a state taken at that
/// segment's start time.
pub fn resume_schedule(
    model: &ProtocolModel,
    schedule: &Schedule,
    first_segment: usize,
    start: FinalState,
    opts: &RunOptions,
) -> Result<ProtocolResult> {
    schedule.validate()?;
    if schedule.ramp.is_some() {
        return Err(Error::InvalidArgument(
            "protocol schedules carry no ramp; use adiabatic_ramp".into(),
        ));
    }
    let mut state = match (start, opts.dissipation) {
        (s @ FinalState::Pure(_), false) | (s @ FinalState::Mixed(_), true) => s,
        (FinalState::Pure(psi), true) => FinalState::Mixed(psi.to_density()),
        (FinalState::Mixed(_), false) => {
            return Err(Error::InvalidArgument(
                "a mixed state needs dissipative (Lindblad) evolution".into(),
            ))
        }
    };
    let bounds = schedule.boundaries();
    let mut segments = Vec::new();
    let mut trajectory = vec![TrajectoryPoint::sample(model, &state)];
    for (segment, &(t0, t1)) in schedule.segments.iter().zip(&bounds).skip(first_segment) {
        state = evolve_segment(model, segment, t0, t1, state, opts, &mut trajectory)?;
        let (ground, psi_1_4, psi_2_3) = model.populations(&state);
        segments.push(SegmentDiagnostic {
            end_time: t1,
            ground,
            psi_1_4,
            psi_2_3,
            state: state.clone(),
        });
    }
    let (p0, p1, p2) = model.populations(&state);
    Ok(ProtocolResult {
        fidelity: p2,
        leakage: (1.0 - p0 - p1 - p2).max(0.0),
        final_state: state,
        segments,
        trajectory,
        total_duration: schedule.total_duration(),
    })
}

fn evolve_segment(
    model: &ProtocolModel,
    segment: &PulseSegment,
    t0: f64,
    t1: f64,
    state: FinalState,
    opts: &RunOptions,
    trajectory: &mut Vec<TrajectoryPoint>,
) -> Result<FinalState> {
    let drive = model.drive(segment)?;
    let k = opts.samples_per_segment;
    let times: Vec<f64> = (1..=k + 1)
        .map(|i| {
            if i == k + 1 {
                t1
            } else {
                t0 + (t1 - t0) * i as f64 / (k + 1) as f64
            }
        })
        .collect();
    let mut record = |states: Vec<FinalState>| -> FinalState {
        for s in &states {
            trajectory.push(TrajectoryPoint::sample(model, s));
        }
        states.into_iter().last().expect("at least one output")
    };
    let channels: &[CollapseChannel] = &model.channels;
    match opts.frame {
        Frame::Lab => {
            let h = TimeDependentHamiltonian::new(model.hamiltonian.clone()).with_drive(&drive);
            Ok(record(advance(&h, channels, state, t0, &times, opts)?))
        }
        Frame::Rotating => {
            let w = drive.frequency();
            let h = TimeDependentHamiltonian::new(rotating_frame_generator(
                &model.hamiltonian,
                &model.number,
                &drive,
            ));
            let state = rotate(state, &model.number_diag, w * t0);
            let state = record(advance(&h, channels, state, t0, &times, opts)?);
            Ok(rotate(state, &model.number_diag, -w * t1))
        }
    }
}

fn rotate(state: FinalState, number: &[f64], theta: f64) -> FinalState {
    match state {
        FinalState::Pure(mut psi) => {
            rotate_state(&mut psi, number, theta);
            FinalState::Pure(psi)
        }
        FinalState::Mixed(mut rho) => {
            rotate_density(&mut rho, number, theta);
            FinalState::Mixed(rho)
        }
    }
}

fn advance(
    h: &TimeDependentHamiltonian,
    channels: &[CollapseChannel],
    state: FinalState,
    t0: f64,
    times: &[f64],
    opts: &RunOptions,
) -> Result<Vec<FinalState>> {
    Ok(match state {
        FinalState::Pure(mut psi) => {
            psi.time = t0;
            evolve_schrodinger(h, &psi, times, opts.tol)?
                .into_iter()
                .map(FinalState::Pure)
                .collect()
        }
        FinalState::Mixed(mut rho) => {
            rho.time = t0;
            evolve_lindblad(h, channels, &rho, times, opts.tol)?
                .into_iter()
                .map(FinalState::Mixed)
                .collect()
        }
    })
}

/// Two-pulse protocol on a prepared model; `epsilon = 0` leaves the ground state untouched.
pub fn run_two_pulse(
    model: &ProtocolModel,
    epsilon: f64,
    opts: &RunOptions,
) -> Result<ProtocolResult> {
    let schedule = if epsilon == 0.0 {
        Schedule::default()
    } else {
        two_pulse_schedule(model.resonances, epsilon)?
    };
    run_schedule(model, &schedule, opts)
}

/// Builds the requested model from the lattice parameters and runs the protocol.
/// The Bose-Hubbard model uses the lower-polariton projection of `params`.
pub fn run_protocol(
    kind: ModelKind,
    params: &SystemParams,
    epsilon: f64,
    dissipation: bool,
    cutoffs: (u32, Option<u32>),
) -> Result<ProtocolResult> {
    let model = match kind {
        ModelKind::FullJc => ProtocolModel::full_jc(params, cutoffs.0, cutoffs.1)?,
        ModelKind::BoseHubbard => ProtocolModel::bose_hubbard(
            &BoseHubbardParams::from_system(params)?,
            cutoffs.0,
            cutoffs.1,
        )?,
    };
    run_two_pulse(
        &model,
        epsilon,
        &RunOptions {
            dissipation,
            ..Default::default()
        },
    )
}

/// Change of basis to the ring's single-particle eigenmodes, `c = M a`.
#[derive(Clone, Debug)]
pub struct MomentumTransform {
    pub matrix: Matrix4<f64>,
    /// Annihilators `c_1..c_4` on the basis.
    pub modes: Vec<Operator>,
    /// Annihilators `a_1..a_4` on the basis.
    pub sites: Vec<Operator>,
}

/// `M` with rows `(1,-1,-1,1)`, `(-1,1,-1,1)`, `(-1,-1,1,1)`, `(1,1,1,1)`, all over 2.
pub fn momentum_matrix() -> Matrix4<f64> {
    Matrix4::new(
        1.0, -1.0, -1.0, 1.0, //
        -1.0, 1.0, -1.0, 1.0, //
        -1.0, -1.0, 1.0, 1.0, //
        1.0, 1.0, 1.0, 1.0,
    ) * 0.5
}

pub fn momentum_transform(basis: &FockBasis) -> Result<MomentumTransform> {
    if basis.n_sites() != 4 {
        return Err(Error::BasisMismatch(
            "momentum modes are defined for the 4-ring".into(),
        ));
    }
    let sites: Vec<Operator> = (0..4)
        .map(|j| basis.site_operator(j, SiteOp::Annihilate))
        .collect::<Result<_>>()?;
    let matrix = momentum_matrix();
    let modes = (0..4)
        .map(|j| {
            Operator::linear_combination(
                basis.dim(),
                (0..4).map(|k| (C64::new(matrix[(j, k)], 0.0), &sites[k])),
            )
        })
        .collect();
    Ok(MomentumTransform {
        matrix,
        modes,
        sites,
    })
}

impl MomentumTransform {
    /// `sum coeff * b_i^dag b_j^dag |vac>` over `pairs`, with `b` the mode
    /// (`momentum = true`) or site annihilators.
    pub fn pair_state(
        &self,
        basis: &FockBasis,
        pairs: &[(usize, usize, C64)],
        momentum: bool,
    ) -> DVector<C64> {
        let ops = if momentum { &self.modes } else { &self.sites };
        let vac = basis.vacuum();
        let mut out = DVector::zeros(basis.dim());
        for &(i, j, c) in pairs {
            let once = ops[j].adjoint().mul_vec(&vac);
            out += ops[i].adjoint().mul_vec(&once) * c;
        }
        out
    }

    /// `(a_1^dag a_3^dag - a_2^dag a_4^dag)|vac> / sqrt2` in site form, or its
    /// partner `(c_1^dag c_3^dag - c_2^dag c_4^dag)|vac> / sqrt2` in mode form.
    pub fn entangled_pair(&self, basis: &FockBasis, momentum: bool) -> DVector<C64> {
        let r = C64::new(FRAC_1_SQRT_2, 0.0);
        self.pair_state(basis, &[(0, 2, r), (1, 3, -r)], momentum)
    }
}

/// One curve of a sweep: `(x, fidelity)` pairs at a fixed curve parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub parameter: f64,
    pub points: Vec<(f64, f64)>,
}

impl Curve {
    pub fn argmax(&self) -> (f64, f64) {
        self.points
            .iter()
            .copied()
            .fold((f64::NAN, f64::NEG_INFINITY), |best, p| {
                if p.1 > best.1 {
                    p
                } else {
                    best
                }
            })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurveSet {
    pub parameter_name: String,
    pub x_name: String,
    pub metadata: Vec<(String, String)>,
    pub curves: Vec<Curve>,
}

impl CurveSet {
    pub fn table(&self) -> CsvTable {
        let mut t = CsvTable::new(&[&self.parameter_name, &self.x_name, "fidelity"]);
        for (k, v) in &self.metadata {
            t.meta(k, v);
        }
        for c in &self.curves {
            for &(x, f) in &c.points {
                t.row(vec![num(c.parameter), num(x), num(f)]);
            }
        }
        t
    }
}

/// Sweeps keep states with at most this many excitations; the protocol
/// populates N <= 2 and leakage beyond N = 4 is negligible.
pub const SWEEP_EXCITATION_CUTOFF: u32 = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepOptions {
    pub tol: f64,
    pub photon_cutoff: u32,
    pub excitation_cutoff: Option<u32>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOLERANCE,
            photon_cutoff: 2,
            excitation_cutoff: Some(SWEEP_EXCITATION_CUTOFF),
        }
    }
}

/// Default `U/J` grid: 33 points on `[0, 4]`.
pub fn default_u_grid() -> Vec<f64> {
    (0..33).map(|k| k as f64 * 0.125).collect()
}

/// Default `eps/J` grid: 25 log-spaced points on `[0.005, 0.3]`.
pub fn default_eps_grid() -> Vec<f64> {
    let (lo, hi) = (0.005f64.ln(), 0.3f64.ln());
    (0..25)
        .map(|k| (lo + (hi - lo) * k as f64 / 24.0).exp())
        .collect()
}

/// Protocol fidelity on the Bose-Hubbard model at `U/J`, `eps/J`, `gamma_p/J`.
pub fn bose_hubbard_fidelity(
    base: &SystemParams,
    u_over_j: f64,
    eps_over_j: f64,
    gamma_p_over_j: f64,
    opts: &SweepOptions,
) -> Result<f64> {
    let bh = BoseHubbardParams::at_resonance(base, u_over_j, gamma_p_over_j);
    let model = ProtocolModel::bose_hubbard(&bh, opts.photon_cutoff, opts.excitation_cutoff)?;
    let run = RunOptions {
        tol: opts.tol,
        dissipation: gamma_p_over_j > 0.0,
        ..Default::default()
    };
    Ok(run_two_pulse(&model, eps_over_j * base.hopping, &run)?.fidelity)
}

fn sweep(
    base: &SystemParams,
    curve_params: &[f64],
    xs: &[f64],
    opts: &SweepOptions,
    eval: impl Fn(f64, f64) -> (f64, f64, f64) + Sync,
) -> Result<Vec<Curve>> {
    let jobs: Vec<(usize, f64, f64)> = curve_params
        .iter()
        .enumerate()
        .flat_map(|(c, &p)| xs.iter().map(move |&x| (c, p, x)))
        .collect();
    let values: Vec<f64> = jobs
        .par_iter()
        .map(|&(_, p, x)| {
            let (u, eps, gamma) = eval(p, x);
            bose_hubbard_fidelity(base, u, eps, gamma, opts)
        })
        .collect::<Result<_>>()?;
    Ok(curve_params
        .iter()
        .enumerate()
        .map(|(c, &p)| Curve {
            parameter: p,
            points: jobs
                .iter()
                .zip(&values)
                .filter(|((ci, _, _), _)| *ci == c)
                .map(|((_, _, x), &f)| (*x, f))
                .collect(),
        })
        .collect())
}

/// Fidelity versus `U/J`, one curve per `eps/J`, at fixed `gamma_p/J`.
pub fn sweep_fidelity_vs_u(
    base: &SystemParams,
    eps_over_j: &[f64],
    u_over_j: &[f64],
    gamma_p_over_j: f64,
    opts: &SweepOptions,
) -> Result<CurveSet> {
    let curves = sweep(base, eps_over_j, u_over_j, opts, |eps, u| {
        (u, eps, gamma_p_over_j)
    })?;
    Ok(CurveSet {
        parameter_name: "eps_over_J".into(),
        x_name: "U_over_J".into(),
        metadata: vec![
            ("model".into(), "bose_hubbard".into()),
            ("gamma_p_over_J".into(), num(gamma_p_over_j)),
            (
                "J_over_2pi_Hz".into(),
                num(base.hopping / std::f64::consts::TAU),
            ),
        ],
        curves,
    })
}

/// Fidelity versus `eps/J`, one curve per `gamma_p/J`, at fixed `U/J`.
pub fn sweep_fidelity_vs_epsilon(
    base: &SystemParams,
    gamma_p_over_j: &[f64],
    eps_over_j: &[f64],
    u_over_j: f64,
    opts: &SweepOptions,
) -> Result<CurveSet> {
    let curves = sweep(base, gamma_p_over_j, eps_over_j, opts, |gamma, eps| {
        (u_over_j, eps, gamma)
    })?;
    Ok(CurveSet {
        parameter_name: "gamma_p_over_J".into(),
        x_name: "eps_over_J".into(),
        metadata: vec![
            ("model".into(), "bose_hubbard".into()),
            ("U_over_J".into(), num(u_over_j)),
            (
                "J_over_2pi_Hz".into(),
                num(base.hopping / std::f64::consts::TAU),
            ),
        ],
        curves,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompensationPoint {
    pub delta_omega0: f64,
    /// Compensating detuning.
    pub detuning: f64,
    /// Effective interaction after compensation, in units of `J`.
    pub u_over_j: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompensationCurve {
    pub delta_g: f64,
    pub points: Vec<CompensationPoint>,
}

/// Compensating detuning and resulting interaction across resonator-frequency
/// errors, one curve per coupling error. Inputs in rad/s.
pub fn compensation_curve(
    delta_g: &[f64],
    delta_omega0: &[f64],
    g: f64,
    hopping: f64,
) -> Result<Vec<CompensationCurve>> {
    if !(hopping > 0.0) {
        return Err(Error::InvalidArgument(
            "J must be positive to express U/J".into(),
        ));
    }
    delta_g
        .iter()
        .map(|&dg| {
            let points = delta_omega0
                .iter()
                .map(|&dw| {
                    if !(dw + g > 0.0) {
                        return Err(Error::Singular(format!(
                            "delta_omega0 + g = {} must be positive",
                            dw + g
                        )));
                    }
                    let detuning = compensating_detuning(g, dg, dw)?;
                    Ok(CompensationPoint {
                        delta_omega0: dw,
                        detuning,
                        u_over_j: effective_kerr_u(0.0, detuning, g + dg) / hopping,
                    })
                })
                .collect::<Result<_>>()?;
            Ok(CompensationCurve {
                delta_g: dg,
                points,
            })
        })
        .collect()
}

pub fn compensation_table(curves: &[CompensationCurve], g: f64, hopping: f64) -> CsvTable {
    let mut t = CsvTable::new(&[
        "delta_g_over_g",
        "delta_omega0_over_g",
        "Delta_over_g",
        "U_over_J",
    ]);
    t.meta("g_over_2pi_Hz", num(g / std::f64::consts::TAU));
    t.meta("J_over_2pi_Hz", num(hopping / std::f64::consts::TAU));
    for c in curves {
        for p in &c.points {
            t.row(vec![
                num(c.delta_g / g),
                num(p.delta_omega0 / g),
                num(p.detuning / g),
                num(p.u_over_j),
            ]);
        }
    }
    t
}
