//! Command-line dispatch: parse the configuration, run one experiment, write
//! its CSV files and a JSON run manifest.

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::config::{ConfigError, ExperimentConfig, ModelChoice};
use crate::csv::{num, CsvTable};
use crate::dynamics::{adiabatic_ramp, ramp_duration};
use crate::error::Error;
use crate::hilbert::{FockBasis, QuantumState};
use crate::model::{build_bose_hubbard, build_lattice_hamiltonian};
use crate::operator::Operator;
use crate::protocol::{
    compensation_curve, compensation_table, momentum_transform, run_two_pulse,
    sweep_fidelity_vs_epsilon, sweep_fidelity_vs_u, trajectory_table, ProtocolModel, RunOptions,
    SweepOptions, SWEEP_EXCITATION_CUTOFF,
};
use crate::spectrum::{degeneracy_profile, diagonalize_sector, spectrum_table};

#[derive(Debug, Parser)]
#[command(
    name = "jclattice",
    version,
    about = "Jaynes-Cummings ring lattice experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub experiment: Experiment,
}

#[derive(Debug, Subcommand)]
pub enum Experiment {
    /// Sector-resolved eigenvalues with translation labels.
    Spectrum(CommonArgs),
    /// Degenerate-cluster multiplicities per excitation sector.
    Degeneracy(CommonArgs),
    /// Two-pulse pair generation; prints the final fidelity.
    Protocol(CommonArgs),
    /// Fidelity versus U/J for several drive amplitudes.
    SweepU(CommonArgs),
    /// Fidelity versus eps/J for several damping rates.
    SweepEps(CommonArgs),
    /// Compensating detuning and resulting U/J versus fabrication errors.
    Compensation(CommonArgs),
    /// Linear detuning ramp from the entangled pair to the photonic regime.
    Adiabatic(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Override a configuration key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Spectrum(_) => "spectrum",
            Experiment::Degeneracy(_) => "degeneracy",
            Experiment::Protocol(_) => "protocol",
            Experiment::SweepU(_) => "sweep-u",
            Experiment::SweepEps(_) => "sweep-eps",
            Experiment::Compensation(_) => "compensation",
            Experiment::Adiabatic(_) => "adiabatic",
        }
    }

    pub fn args(&self) -> &CommonArgs {
        match self {
            Experiment::Spectrum(a)
            | Experiment::Degeneracy(a)
            | Experiment::Protocol(a)
            | Experiment::SweepU(a)
            | Experiment::SweepEps(a)
            | Experiment::Compensation(a)
            | Experiment::Adiabatic(a) => a,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("numerical error: {0}")]
    Numerical(#[from] Error),
    #[error("cannot write {path}: {source}")]
    Output {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(Error::Io(_)) | CliError::Output { .. } => 1,
            CliError::Numerical(_) => 3,
        }
    }
}

/// Files and console lines produced by one experiment.
#[derive(Debug, Default)]
pub struct Outcome {
    pub tables: Vec<(String, CsvTable)>,
    pub lines: Vec<String>,
}

pub fn run(experiment: &Experiment) -> Result<Outcome, CliError> {
    let started = Instant::now();
    let args = experiment.args();
    let config = ExperimentConfig::load(args.config.as_deref(), &args.overrides)?;
    let warnings = config.warnings();
    for w in &warnings {
        log::warn!("{w}");
    }
    let outcome = execute(experiment.name(), &config)?;
    write_outputs(
        &args.out,
        experiment.name(),
        &config,
        &warnings,
        &outcome,
        started.elapsed().as_secs_f64(),
    )?;
    Ok(outcome)
}

/// Runs the named experiment without touching the filesystem.
pub fn execute(name: &str, config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let outcome = match name {
        "spectrum" => spectrum(config)?,
        "degeneracy" => degeneracy(config)?,
        "protocol" => protocol(config)?,
        "sweep-u" => sweep_u(config)?,
        "sweep-eps" => sweep_eps(config)?,
        "compensation" => compensation(config)?,
        "adiabatic" => adiabatic(config)?,
        other => return Err(ConfigError::Invalid(format!("unknown experiment `{other}`")).into()),
    };
    Ok(outcome)
}

fn write_outputs(
    dir: &Path,
    name: &str,
    config: &ExperimentConfig,
    warnings: &[String],
    outcome: &Outcome,
    wall_time: f64,
) -> Result<(), CliError> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| CliError::Output { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mut files = Vec::new();
    for (file, table) in &outcome.tables {
        let path = dir.join(file);
        fs::write(&path, table.to_string_lossy()).map_err(io(&path))?;
        files.push(file.clone());
    }
    let params = config.system_params();
    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let manifest = json!({
        "experiment": name,
        "package": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "params_rad_per_s": {
            "omega0": params.omega0,
            "delta": params.delta,
            "g": params.g,
            "J": params.hopping,
            "kappa": params.kappa,
            "gamma_q": params.gamma_q,
            "epsilon": config.epsilon(),
        },
        "warnings": warnings,
        "outputs": files,
        "stdout": outcome.lines,
        "wall_time_s": wall_time,
        "timestamp_unix_s": timestamp,
    });
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(io(&path))?;
    Ok(())
}

fn param_metadata(table: &mut CsvTable, config: &ExperimentConfig) {
    table
        .meta("omega0_Hz", num(config.omega0_hz))
        .meta("delta_Hz", num(config.delta_hz))
        .meta("g_Hz", num(config.g_hz))
        .meta("J_Hz", num(config.j_hz));
}

fn model_name(m: ModelChoice) -> &'static str {
    match m {
        ModelChoice::FullJc => "full_jc",
        ModelChoice::BoseHubbard => "bose_hubbard",
    }
}

fn lattice(config: &ExperimentConfig) -> Result<(FockBasis, Operator), Error> {
    let cap = config.dimension_cap;
    Ok(match config.model {
        ModelChoice::FullJc => {
            let basis =
                FockBasis::with_cap(4, config.photon_cutoff, true, config.excitation_cutoff, cap)?;
            let h = build_lattice_hamiltonian(&config.system_params(), &basis)?;
            (basis, h)
        }
        ModelChoice::BoseHubbard => {
            let basis = FockBasis::with_cap(
                4,
                config.photon_cutoff,
                false,
                config.excitation_cutoff,
                cap,
            )?;
            let h = build_bose_hubbard(&config.bose_hubbard_params()?, &basis)?;
            (basis, h)
        }
    })
}

fn spectrum(config: &ExperimentConfig) -> Result<Outcome, Error> {
    let (basis, h) = lattice(config)?;
    let ground = diagonalize_sector(&h, &basis, 0)?.energies[0];
    let systems = config
        .sectors
        .iter()
        .map(|&n| diagonalize_sector(&h, &basis, n))
        .collect::<Result<Vec<_>, _>>()?;
    let mut table = spectrum_table(&systems, ground);
    table.meta("model", model_name(config.model));
    param_metadata(&mut table, config);
    Ok(Outcome {
        lines: vec![format!(
            "{} eigenvalues in {} sectors",
            table.rows.len(),
            systems.len()
        )],
        tables: vec![("spectrum.csv".into(), table)],
    })
}

fn degeneracy(config: &ExperimentConfig) -> Result<Outcome, Error> {
    let (basis, h) = lattice(config)?;
    let tol = config.degeneracy_tol_over_g * TAU * config.g_hz;
    let profile = degeneracy_profile(&h, &basis, &config.sectors, tol)?;
    let mut table = CsvTable::new(&["sector", "cluster", "energy_over_2pi_Hz", "multiplicity"]);
    table
        .meta("model", model_name(config.model))
        .meta("energy_reference", "ground state (N=0) energy");
    param_metadata(&mut table, config);
    let mut lines = Vec::new();
    for (n, clusters) in &profile.sectors {
        let counts: Vec<String> = clusters
            .iter()
            .map(|c| c.multiplicity.to_string())
            .collect();
        lines.push(format!("N={n}: multiplicities [{}]", counts.join(", ")));
        for (k, c) in clusters.iter().enumerate() {
            table.row(vec![
                n.to_string(),
                (k + 1).to_string(),
                num(c.energy / TAU),
                c.multiplicity.to_string(),
            ]);
        }
    }
    Ok(Outcome {
        tables: vec![("degeneracy.csv".into(), table)],
        lines,
    })
}

fn protocol_model(config: &ExperimentConfig) -> Result<ProtocolModel, Error> {
    match config.model {
        ModelChoice::FullJc => ProtocolModel::full_jc(
            &config.system_params(),
            config.photon_cutoff,
            config.excitation_cutoff,
        ),
        ModelChoice::BoseHubbard => ProtocolModel::bose_hubbard(
            &config.bose_hubbard_params()?,
            config.photon_cutoff,
            config.excitation_cutoff,
        ),
    }
}

fn protocol(config: &ExperimentConfig) -> Result<Outcome, Error> {
    let model = protocol_model(config)?;
    let opts = RunOptions {
        frame: config.frame.into(),
        tol: config.tol,
        dissipation: config.dissipation,
        samples_per_segment: config.samples_per_segment,
    };
    let result = run_two_pulse(&model, config.epsilon(), &opts)?;
    let mut segments = CsvTable::new(&[
        "segment",
        "end_time_s",
        "p_ground",
        "p_psi_1_4",
        "p_psi_2_3",
    ]);
    segments
        .meta("model", model_name(config.model))
        .meta("epsilon_Hz", num(config.epsilon_hz));
    param_metadata(&mut segments, config);
    for (k, s) in result.segments.iter().enumerate() {
        segments.row(vec![
            (k + 1).to_string(),
            num(s.end_time),
            num(s.ground),
            num(s.psi_1_4),
            num(s.psi_2_3),
        ]);
    }
    let mut trajectory = trajectory_table(&result.trajectory);
    trajectory.meta("model", model_name(config.model));
    Ok(Outcome {
        tables: vec![
            ("protocol_segments.csv".into(), segments),
            ("trajectory.csv".into(), trajectory),
        ],
        lines: vec![format!("fidelity: {:.6}", result.fidelity)],
    })
}

fn sweep_options(config: &ExperimentConfig) -> SweepOptions {
    SweepOptions {
        tol: config.tol,
        photon_cutoff: config.photon_cutoff,
        excitation_cutoff: Some(config.excitation_cutoff.unwrap_or(SWEEP_EXCITATION_CUTOFF)),
    }
}

fn sweep_u(config: &ExperimentConfig) -> Result<Outcome, Error> {
    let set = sweep_fidelity_vs_u(
        &config.system_params(),
        &config.eps_over_j_list,
        &config.u_over_j_grid,
        config.sweep_gamma_p_over_j,
        &sweep_options(config),
    )?;
    let lines = set
        .curves
        .iter()
        .map(|c| {
            let (x, f) = c.argmax();
            format!("eps/J = {}: max fidelity {f:.6} at U/J = {x}", c.parameter)
        })
        .collect();
    Ok(Outcome {
        tables: vec![("sweep_u.csv".into(), set.table())],
        lines,
    })
}

fn sweep_eps(config: &ExperimentConfig) -> Result<Outcome, Error> {
    let set = sweep_fidelity_vs_epsilon(
        &config.system_params(),
        &config.gamma_p_over_j_list,
        &config.eps_over_j_grid,
        config.sweep_u_over_j,
        &sweep_options(config),
    )?;
    let lines = set
        .curves
        .iter()
        .map(|c| {
            let (x, f) = c.argmax();
            format!(
                "gamma_p/J = {}: max fidelity {f:.6} at eps/J = {x}",
                c.parameter
            )
        })
        .collect();
    Ok(Outcome {
        tables: vec![("sweep_eps.csv".into(), set.table())],
        lines,
    })
}

fn compensation(config: &ExperimentConfig) -> Result<Outcome, Error> {
    let p = config.system_params();
    let dg: Vec<f64> = config.delta_g_over_g_list.iter().map(|x| x * p.g).collect();
    let dw: Vec<f64> = config
        .delta_omega0_over_g_grid
        .iter()
        .map(|x| x * p.g)
        .collect();
    let curves = compensation_curve(&dg, &dw, p.g, p.hopping)?;
    let table = compensation_table(&curves, p.g, p.hopping);
    Ok(Outcome {
        lines: vec![format!("{} compensation points", table.rows.len())],
        tables: vec![("compensation.csv".into(), table)],
    })
}

fn adiabatic(config: &ExperimentConfig) -> Result<Outcome, Error> {
    let params = config.system_params();
    let nmax = Some(config.excitation_cutoff.unwrap_or(2));
    let model = ProtocolModel::full_jc(&params, config.photon_cutoff, nmax)?;
    let basis = &model.basis;
    let target = QuantumState::normalized(momentum_transform(basis)?.entangled_pair(basis, false));
    let delta_final = config.delta_final_over_g * params.g;
    let mut table = CsvTable::new(&[
        "adiabaticity_ratio",
        "duration_s",
        "overlap_photon_pair",
        "initial_eigen_overlap",
    ]);
    table.meta("delta_final_over_g", num(config.delta_final_over_g));
    param_metadata(&mut table, config);
    let mut lines = Vec::new();
    for &r in &config.adiabaticity_ratios {
        let duration = ramp_duration(delta_final, params.g, r);
        let out = adiabatic_ramp(
            &params,
            basis,
            delta_final,
            duration,
            &model.named.psi_2_3,
            config.tol,
        )?;
        let overlap = target.fidelity(&out.state);
        lines.push(format!("r = {r}: overlap {overlap:.6}"));
        table.row(vec![
            num(r),
            num(duration),
            num(overlap),
            num(out.initial_eigen_overlap),
        ]);
    }
    Ok(Outcome {
        tables: vec![("adiabatic.csv".into(), table)],
        lines,
    })
}
