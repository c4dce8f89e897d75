//! Time evolution: Schrödinger and Lindblad integration with an adaptive
//! Dormand-Prince 5(4) stepper, rotating-frame bookkeeping, and the linear
//! qubit-frequency ramp into the dispersive regime.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hilbert::{DensityMatrix, FockBasis, QuantumState};
use crate::model::{
    build_lattice_hamiltonian, qubit_detuning_operator, Drive, PulseSegment, SystemParams,
};
use crate::operator::Operator;
use crate::spectrum::{hermitian_eigen, EigenBackend};

pub const DEFAULT_TOLERANCE: f64 = 1e-8;
/// Eigenvalues of an evolved density matrix below this abort the run.
pub const POSITIVITY_TOLERANCE: f64 = 1e-6;
/// Allowed drift of `tr rho` over a Lindblad run.
pub const TRACE_TOLERANCE: f64 = 1e-8;

const I: C64 = C64 { re: 0.0, im: 1.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Scalar time dependence of one Hamiltonian term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Envelope {
    Constant(C64),
    /// `e^{-i w t}`.
    Oscillating {
        frequency: f64,
    },
    /// `start + rate * t`.
    Linear {
        start: f64,
        rate: f64,
    },
}

impl Envelope {
    pub fn at(&self, t: f64) -> C64 {
        match *self {
            Envelope::Constant(c) => c,
            Envelope::Oscillating { frequency } => C64::from_polar(1.0, -frequency * t),
            Envelope::Linear { start, rate } => C64::new(start + rate * t, 0.0),
        }
    }
}

/// `H(t) = sum_k f_k(t) O_k`; the caller keeps the sum Hermitian.
#[derive(Clone, Debug)]
pub struct TimeDependentHamiltonian {
    dim: usize,
    terms: Vec<(Operator, Envelope)>,
}

impl TimeDependentHamiltonian {
    pub fn new(static_part: Operator) -> Self {
        Self {
            dim: static_part.dim(),
            terms: vec![(static_part, Envelope::Constant(ONE))],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn with_term(mut self, op: Operator, envelope: Envelope) -> Self {
        op.require_dim(self.dim).expect("term dimension");
        self.terms.push((op, envelope));
        self
    }

    /// Adds a lab-frame drive `e^{-i w t} R + e^{i w t} R^dag`.
    pub fn with_drive(self, drive: &Drive) -> Self {
        let w = drive.frequency();
        self.with_term(
            drive.raising().clone(),
            Envelope::Oscillating { frequency: w },
        )
        .with_term(
            drive.lowering().clone(),
            Envelope::Oscillating { frequency: -w },
        )
    }

    pub fn at(&self, t: f64) -> Operator {
        Operator::linear_combination(self.dim, self.terms.iter().map(|(op, env)| (env.at(t), op)))
    }

    fn split(&self) -> (Operator, Vec<(Operator, Envelope)>) {
        let constant = Operator::linear_combination(
            self.dim,
            self.terms.iter().filter_map(|(op, env)| match env {
                Envelope::Constant(c) => Some((*c, op)),
                _ => None,
            }),
        );
        let varying = self
            .terms
            .iter()
            .filter(|(_, env)| !matches!(env, Envelope::Constant(_)))
            .cloned()
            .collect();
        (constant, varying)
    }
}

impl From<Operator> for TimeDependentHamiltonian {
    fn from(op: Operator) -> Self {
        Self::new(op)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CollapseChannel {
    pub operator: Operator,
    /// rad/s.
    pub rate: f64,
}

impl CollapseChannel {
    pub fn new(operator: Operator, rate: f64) -> Result<Self> {
        if !(rate >= 0.0) || !rate.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "collapse rate must be non-negative, got {rate}"
            )));
        }
        Ok(Self { operator, rate })
    }
}

/// Linear ramp of the qubit frequency.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ramp {
    pub start: f64,
    pub end: f64,
    pub duration: f64,
}

/// Contiguous pulse segments, optionally followed by a qubit-frequency ramp.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Schedule {
    pub segments: Vec<PulseSegment>,
    pub ramp: Option<Ramp>,
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        for s in &self.segments {
            s.validate()?;
        }
        if let Some(r) = self.ramp {
            if !(r.duration > 0.0) {
                return Err(Error::InvalidArgument(
                    "ramp duration must be positive".into(),
                ));
            }
        }
        Ok(())
    }

    /// `(start, end)` of every segment, back to back from `t = 0`.
    pub fn boundaries(&self) -> Vec<(f64, f64)> {
        let mut t = 0.0;
        self.segments
            .iter()
            .map(|s| {
                let span = (t, t + s.duration);
                t += s.duration;
                span
            })
            .collect()
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum::<f64>()
            + self.ramp.map_or(0.0, |r| r.duration)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl IntegratorOptions {
    pub fn with_tolerance(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol * 0.1,
            max_steps: 50_000_000,
        }
    }
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self::with_tolerance(DEFAULT_TOLERANCE)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evaluations: usize,
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

// Max-norm rather than RMS: an RMS over many near-empty components would let
// the few populated ones carry errors well above the tolerance.
fn scaled_norm(v: &[C64], y: &[C64], opts: &IntegratorOptions) -> f64 {
    v.iter().zip(y).fold(0.0, |m, (d, y)| {
        m.max(d.norm() / (opts.atol + opts.rtol * y.norm()))
    })
}

/// Adaptive Dormand-Prince integration of `y' = f(t, y)` from `t0`, stopping
/// exactly at each of `output_times` (ascending, `>= t0`) and handing the
/// state to `observe`, which may adjust it in place.
pub fn integrate<F, O>(
    mut rhs: F,
    t0: f64,
    y0: &[C64],
    output_times: &[f64],
    opts: &IntegratorOptions,
    mut observe: O,
) -> Result<(Vec<C64>, IntegrationStats)>
where
    F: FnMut(f64, &[C64], &mut [C64]),
    O: FnMut(f64, &mut [C64]) -> Result<()>,
{
    let n = y0.len();
    let mut stats = IntegrationStats::default();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut k: Vec<Vec<C64>> = vec![vec![C64::new(0.0, 0.0); n]; 7];
    let mut stage = vec![C64::new(0.0, 0.0); n];
    let mut y_new = vec![C64::new(0.0, 0.0); n];
    let mut err = vec![C64::new(0.0, 0.0); n];

    if output_times.windows(2).any(|w| w[1] < w[0]) || output_times.first().is_some_and(|&s| s < t0)
    {
        return Err(Error::InvalidArgument(
            "output times must be ascending and not before t0".into(),
        ));
    }

    rhs(t, &y, &mut k[0]);
    stats.rhs_evaluations += 1;
    let mut h = {
        let d0 = scaled_norm(&y, &y, opts);
        let d1 = scaled_norm(&k[0], &y, opts);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        for i in 0..n {
            stage[i] = y[i] + k[0][i] * h0;
        }
        rhs(t + h0, &stage, &mut k[1]);
        stats.rhs_evaluations += 1;
        let diff: Vec<C64> = k[1].iter().zip(&k[0]).map(|(a, b)| (a - b) / h0).collect();
        let d2 = scaled_norm(&diff, &y, opts);
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6 * h0)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1)
    };

    for &t_out in output_times {
        while t < t_out {
            if stats.accepted + stats.rejected >= opts.max_steps {
                return Err(Error::StepUnderflow { t, h });
            }
            let remaining = t_out - t;
            let last = h >= remaining;
            let step = if last { remaining } else { h };
            if step <= 1e-14 * t.abs().max(t_out.abs()) {
                if last {
                    t = t_out;
                    break;
                }
                return Err(Error::StepUnderflow { t, h: step });
            }
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = y[i];
                    for (j, kj) in k.iter().enumerate().take(s) {
                        if A[s][j] != 0.0 {
                            acc += kj[i] * (step * A[s][j]);
                        }
                    }
                    stage[i] = acc;
                }
                rhs(t + C[s] * step, &stage, &mut k[s]);
                stats.rhs_evaluations += 1;
                if s == 6 {
                    y_new.copy_from_slice(&stage);
                }
            }
            for i in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for (j, kj) in k.iter().enumerate() {
                    if E[j] != 0.0 {
                        acc += kj[i] * E[j];
                    }
                }
                err[i] = acc * step;
            }
            let scale: Vec<C64> = y
                .iter()
                .zip(&y_new)
                .map(|(a, b)| if a.norm() > b.norm() { *a } else { *b })
                .collect();
            let e = scaled_norm(&err, &scale, opts);
            if e <= 1.0 {
                stats.accepted += 1;
                t = if last { t_out } else { t + step };
                std::mem::swap(&mut y, &mut y_new);
                k.swap(0, 6);
                let factor = if e == 0.0 {
                    5.0
                } else {
                    (0.9 * e.powf(-0.2)).clamp(0.2, 5.0)
                };
                if !last || step >= h {
                    h = step * factor;
                }
            } else {
                stats.rejected += 1;
                h = step * (0.9 * e.powf(-0.2)).clamp(0.1, 0.9);
            }
        }
        let before = y.clone();
        observe(t_out, &mut y)?;
        if y != before {
            rhs(t, &y, &mut k[0]);
            stats.rhs_evaluations += 1;
        }
    }
    Ok((y, stats))
}

fn check_times(times: &[f64], start: f64) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidArgument("no output times requested".into()));
    }
    if times[0] < start {
        return Err(Error::InvalidArgument(format!(
            "output time {} precedes the initial time {start}",
            times[0]
        )));
    }
    Ok(())
}

/// Integrates `i d psi/dt = H(t) psi`, returning the state at each output time.
pub fn evolve_schrodinger(
    h: &TimeDependentHamiltonian,
    psi0: &QuantumState,
    times: &[f64],
    tol: f64,
) -> Result<Vec<QuantumState>> {
    if psi0.dim() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            got: psi0.dim(),
        });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    check_times(times, psi0.time)?;
    let (constant, varying) = h.split();
    let rhs = |t: f64, y: &[C64], dy: &mut [C64]| {
        constant.mul_vec_into(y, dy, -I, false);
        for (op, env) in &varying {
            op.mul_vec_into(y, dy, -I * env.at(t), true);
        }
    };
    let mut out = Vec::with_capacity(times.len());
    integrate(
        rhs,
        psi0.time,
        psi0.amplitudes.as_slice(),
        times,
        &IntegratorOptions::with_tolerance(tol),
        |t, y| {
            out.push(QuantumState::new(DVector::from_column_slice(y), t));
            Ok(())
        },
    )
    .map(|(_, stats)| log::debug!("schrodinger: {stats:?}"))?;
    Ok(out)
}

pub fn validate_density(rho: &DensityMatrix) -> Result<()> {
    let trace = rho.trace();
    if (trace - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidArgument(format!(
            "initial density matrix has trace {trace}"
        )));
    }
    if rho.hermiticity_defect() > 1e-10 {
        return Err(Error::InvalidArgument(
            "initial density matrix is not Hermitian".into(),
        ));
    }
    let min_eig = rho.min_eigenvalue();
    if min_eig < -POSITIVITY_TOLERANCE {
        return Err(Error::Positivity {
            t: rho.time,
            min_eig,
        });
    }
    Ok(())
}

/// Integrates `d rho/dt = -i[H(t), rho] + sum_c gamma_c (L rho L^dag - {L^dag L, rho}/2)`.
/// Each output is symmetrized and checked for unit trace and positivity.
pub fn evolve_lindblad(
    h: &TimeDependentHamiltonian,
    channels: &[CollapseChannel],
    rho0: &DensityMatrix,
    times: &[f64],
    tol: f64,
) -> Result<Vec<DensityMatrix>> {
    let n = h.dim();
    if rho0.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: rho0.dim(),
        });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    for c in channels {
        c.operator.require_dim(n)?;
    }
    validate_density(rho0)?;
    check_times(times, rho0.time)?;

    let (constant, varying) = h.split();
    let active: Vec<&CollapseChannel> = channels.iter().filter(|c| c.rate > 0.0).collect();
    let decay = Operator::linear_combination(
        n,
        active
            .iter()
            .map(|c| c.operator.adjoint().matmul(&c.operator))
            .collect::<Vec<_>>()
            .iter()
            .zip(&active)
            .map(|(op, c)| (C64::new(-0.5 * c.rate, 0.0) * I, op)),
    );
    // H_eff = H - (i/2) sum gamma L^dag L
    let h_eff = constant.add(&decay);
    let mut scratch = vec![C64::new(0.0, 0.0); n * n];
    let mut half = vec![C64::new(0.0, 0.0); n * n];
    // d rho/dt = X + X^dag with X = -i H_eff rho + (1/2) sum gamma L rho L^dag,
    // valid because H(t) is Hermitian; only left products are needed.
    let rhs = |t: f64, y: &[C64], dy: &mut [C64]| {
        half.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        h_eff.apply_left_acc(y, &mut half, -I);
        for (op, env) in &varying {
            op.apply_left_acc(y, &mut half, -I * env.at(t));
        }
        for ch in &active {
            scratch.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            ch.operator.apply_left_acc(y, &mut scratch, ONE);
            // L (L rho)^dag = L rho L^dag
            conjugate_transpose_in_place(&mut scratch, n);
            ch.operator
                .apply_left_acc(&scratch, &mut half, C64::new(0.5 * ch.rate, 0.0));
        }
        for c in 0..n {
            for r in 0..n {
                dy[c * n + r] = half[c * n + r] + half[r * n + c].conj();
            }
        }
    };
    let mut out = Vec::with_capacity(times.len());
    integrate(
        rhs,
        rho0.time,
        rho0.matrix.as_slice(),
        times,
        &IntegratorOptions::with_tolerance(tol),
        |t, y| {
            let mut rho = DensityMatrix::new(DMatrix::from_column_slice(n, n, y), t);
            rho.hermitize();
            let trace = rho.trace();
            if (trace - 1.0).abs() > TRACE_TOLERANCE {
                return Err(Error::TraceDrift { t, trace });
            }
            let min_eig = rho.min_eigenvalue();
            if min_eig < -POSITIVITY_TOLERANCE {
                return Err(Error::Positivity { t, min_eig });
            }
            y.copy_from_slice(rho.matrix.as_slice());
            out.push(rho);
            Ok(())
        },
    )
    .map(|(_, stats)| log::debug!("lindblad: {stats:?}"))?;
    Ok(out)
}

fn conjugate_transpose_in_place(m: &mut [C64], n: usize) {
    for c in 0..n {
        m[c * n + c] = m[c * n + c].conj();
        for r in c + 1..n {
            let a = m[c * n + r];
            m[c * n + r] = m[r * n + c].conj();
            m[r * n + c] = a.conj();
        }
    }
}

/// `psi -> e^{i theta N} psi` for diagonal `N` given by its entries.
pub fn rotate_state(psi: &mut QuantumState, number: &[f64], theta: f64) {
    for (a, &n) in psi.amplitudes.iter_mut().zip(number) {
        *a *= C64::from_polar(1.0, theta * n);
    }
}

/// `rho -> e^{i theta N} rho e^{-i theta N}`.
pub fn rotate_density(rho: &mut DensityMatrix, number: &[f64], theta: f64) {
    let n = rho.dim();
    for c in 0..n {
        for r in 0..n {
            rho.matrix[(r, c)] *= C64::from_polar(1.0, theta * (number[r] - number[c]));
        }
    }
}

/// Time-independent generator of a single drive segment in the frame rotating
/// at the drive frequency with the conserved number `N`: `H - w_d N + (R + R^dag)`.
pub fn rotating_frame_generator(h_static: &Operator, number: &Operator, drive: &Drive) -> Operator {
    h_static
        .sub(&number.scale_real(drive.frequency()))
        .add(&drive.rotating_frame_term())
}

#[derive(Clone, Debug)]
pub struct AdiabaticResult {
    pub state: QuantumState,
    /// `(delta_final / T) / (4 g^2)`.
    pub adiabaticity_ratio: f64,
    /// Largest overlap of the initial state with an eigenstate of the initial Hamiltonian.
    pub initial_eigen_overlap: f64,
}

/// Ramp duration giving adiabaticity ratio `r` for a sweep to `delta_final`.
pub fn ramp_duration(delta_final: f64, g: f64, ratio: f64) -> f64 {
    delta_final.abs() / (ratio * 4.0 * g * g)
}

/// Evolves `psi_init` while the qubit frequency rises linearly from
/// `omega0 + params.delta` by `delta_final` over `duration`.
///
/// Integration runs in the frame rotating at `omega0 N`, which only shifts each
/// excitation sector by a constant; the returned state is back in the lab frame.
pub fn adiabatic_ramp(
    params: &SystemParams,
    basis: &FockBasis,
    delta_final: f64,
    duration: f64,
    psi_init: &QuantumState,
    tol: f64,
) -> Result<AdiabaticResult> {
    if !(duration > 0.0) {
        return Err(Error::InvalidArgument(
            "ramp duration must be positive".into(),
        ));
    }
    let h0 = build_lattice_hamiltonian(params, basis)?;
    h0.require_dim(psi_init.dim())?;
    let number = basis.total_excitation_operator();
    let initial_eigen_overlap = best_eigen_overlap(&h0, basis, psi_init);
    if initial_eigen_overlap < 0.99 {
        log::warn!(
            "initial state overlaps its nearest eigenstate by only {initial_eigen_overlap:.4}"
        );
    }
    let frame = h0.sub(&number.scale_real(params.omega0));
    let h = TimeDependentHamiltonian::new(frame).with_term(
        qubit_detuning_operator(basis)?,
        Envelope::Linear {
            start: 0.0,
            rate: delta_final / duration,
        },
    );
    let start = QuantumState::new(psi_init.amplitudes.clone(), 0.0);
    let mut state = evolve_schrodinger(&h, &start, &[duration], tol)?
        .pop()
        .expect("one output");
    rotate_state(
        &mut state,
        &number
            .diagonal_entries()
            .iter()
            .map(|c| c.re)
            .collect::<Vec<_>>(),
        -params.omega0 * duration,
    );
    state.time = psi_init.time + duration;
    Ok(AdiabaticResult {
        state,
        adiabaticity_ratio: (delta_final.abs() / duration) / (4.0 * params.g * params.g),
        initial_eigen_overlap,
    })
}

fn best_eigen_overlap(h: &Operator, basis: &FockBasis, psi: &QuantumState) -> f64 {
    let mut best: f64 = 0.0;
    for n in 0..=basis.max_excitations() {
        let idx = basis.sector_indices(n);
        let weight: f64 = idx.iter().map(|&i| psi.amplitudes[i].norm_sqr()).sum();
        if weight < 1e-6 {
            continue;
        }
        let local = DVector::from_iterator(idx.len(), idx.iter().map(|&i| psi.amplitudes[i]));
        let (_, vecs) = hermitian_eigen(&h.submatrix(&idx), EigenBackend::default());
        for c in vecs.column_iter() {
            best = best.max(c.dotc(&local).norm_sqr());
        }
    }
    best
}
