use jclattice::dynamics::Schedule;
use jclattice::model::BoseHubbardParams;
use jclattice::protocol::{
    resume_schedule, run_schedule, run_two_pulse, two_pulse_schedule, FinalState, Frame,
    ProtocolModel, RunOptions,
};
use jclattice::SystemParams;

/// Lattice in units of J with a modest carrier so lab-frame runs stay cheap.
fn params() -> SystemParams {
    SystemParams {
        omega0: 20.0,
        delta: 0.0,
        g: 5.0,
        hopping: 1.0,
        kappa: 0.0,
        gamma_q: 0.0,
        ..Default::default()
    }
}

fn model(u_over_j: f64, gamma_p_over_j: f64) -> ProtocolModel {
    let bh = BoseHubbardParams::at_resonance(&params(), u_over_j, gamma_p_over_j);
    ProtocolModel::bose_hubbard(&bh, 2, None).unwrap()
}

fn truncated_model(u_over_j: f64, gamma_p_over_j: f64) -> ProtocolModel {
    let bh = BoseHubbardParams::at_resonance(&params(), u_over_j, gamma_p_over_j);
    ProtocolModel::bose_hubbard(&bh, 2, Some(4)).unwrap()
}

fn pure() -> RunOptions {
    RunOptions {
        dissipation: false,
        ..Default::default()
    }
}

#[test]
fn populations_after_each_pulse() {
    let m = model(2.0, 0.0);
    let r = run_two_pulse(&m, 0.02, &pure()).unwrap();
    let [first, second] = r.segments.as_slice() else {
        panic!("two segments expected")
    };
    assert!(first.psi_1_4 >= 0.98, "after pulse 1: {first:?}");
    assert!(first.ground <= 0.02);
    assert!(
        second.ground <= 0.02,
        "back-transfer to ground: {}",
        second.ground
    );
    assert!(r.fidelity >= 0.98);
    assert!(r.fidelity <= 1.0 + 1e-9);
}

#[test]
fn off_resonant_leakage_scales_as_eps_squared() {
    let m = model(2.0, 0.0);
    let small = run_two_pulse(&m, 0.02, &pure()).unwrap().leakage;
    let large = run_two_pulse(&m, 0.04, &pure()).unwrap().leakage;
    let ratio = large / small;
    assert!(
        (2.5..=6.0).contains(&ratio),
        "leakage {small:e} -> {large:e}, ratio {ratio}"
    );
}

#[test]
fn restart_from_checkpoint_matches_full_run() {
    let m = model(2.0, 2e-3);
    let opts = RunOptions::default();
    let schedule = two_pulse_schedule(m.resonances, 0.05).unwrap();
    let full = run_schedule(&m, &schedule, &opts).unwrap();
    let checkpoint = full.segments[0].state.clone();
    let resumed = resume_schedule(&m, &schedule, 1, checkpoint, &opts).unwrap();
    assert!((full.fidelity - resumed.fidelity).abs() < 1e-9);
    assert!(matches!(resumed.final_state, FinalState::Mixed(_)));
}

#[test]
fn lab_and_rotating_frames_agree() {
    // the lab frame integrates the carrier phase over many more steps; a tight
    // tolerance keeps its pure-state norm drift below the comparison bound
    let m = truncated_model(2.0, 0.0);
    let tight = RunOptions {
        tol: 1e-10,
        ..pure()
    };
    let rotating = run_two_pulse(&m, 0.05, &tight).unwrap();
    let lab = run_two_pulse(
        &m,
        0.05,
        &RunOptions {
            frame: Frame::Lab,
            ..tight
        },
    )
    .unwrap();
    assert!(
        (rotating.fidelity - lab.fidelity).abs() < 1e-6,
        "{} vs {}",
        rotating.fidelity,
        lab.fidelity
    );
    for (a, b) in rotating.segments.iter().zip(&lab.segments) {
        assert!((a.ground - b.ground).abs() < 1e-6);
        assert!((a.psi_1_4 - b.psi_1_4).abs() < 1e-6);
        assert!((a.psi_2_3 - b.psi_2_3).abs() < 1e-6);
    }
}

#[test]
fn lab_and_rotating_frames_agree_with_damping() {
    let m = truncated_model(2.0, 0.01);
    let rotating = run_two_pulse(&m, 0.08, &RunOptions::default()).unwrap();
    let lab = run_two_pulse(
        &m,
        0.08,
        &RunOptions {
            frame: Frame::Lab,
            ..Default::default()
        },
    )
    .unwrap();
    assert!(
        (rotating.fidelity - lab.fidelity).abs() < 1e-6,
        "{} vs {}",
        rotating.fidelity,
        lab.fidelity
    );
}

#[test]
fn damping_lowers_fidelity() {
    let clean = run_two_pulse(&model(2.0, 0.0), 0.05, &RunOptions::default())
        .unwrap()
        .fidelity;
    let damped = run_two_pulse(&model(2.0, 0.01), 0.05, &RunOptions::default())
        .unwrap()
        .fidelity;
    assert!(damped < clean);
}

#[test]
fn full_model_protocol_reaches_the_pair_state() {
    let p = SystemParams {
        g: 20.0,
        omega0: 100.0,
        ..params()
    };
    let m = ProtocolModel::full_jc(&p, 2, Some(3)).unwrap();
    let schedule = two_pulse_schedule(m.spectral_resonances(), 0.02).unwrap();
    let r = run_schedule(&m, &schedule, &pure()).unwrap();
    assert!(r.fidelity > 0.95, "full-model fidelity {}", r.fidelity);
    // the nominal frequencies sit off resonance by corrections of order J^2/g
    let shift = (m.spectral_resonances().first - m.resonances.first).abs();
    assert!(shift > 1e-3 && shift < 0.05, "{shift}");
}

#[test]
fn empty_schedule_keeps_the_ground_state() {
    let m = model(2.0, 0.0);
    let r = run_schedule(&m, &Schedule::default(), &pure()).unwrap();
    assert_eq!(r.fidelity, 0.0);
    assert!((r.final_state.fidelity(&m.named.ground) - 1.0).abs() < 1e-15);
}

#[test]
fn trajectory_samples_cover_each_segment() {
    let m = model(2.0, 1e-3);
    let opts = RunOptions {
        samples_per_segment: 3,
        ..Default::default()
    };
    let r = run_two_pulse(&m, 0.1, &opts).unwrap();
    assert_eq!(r.trajectory.len(), 1 + 2 * 4);
    assert!(r.trajectory.windows(2).all(|w| w[1].time > w[0].time));
    for p in &r.trajectory {
        assert!((p.trace - 1.0).abs() < 1e-8);
        assert!(p.min_eig > -1e-6);
    }
    assert_eq!(r.trajectory.last().unwrap().psi_2_3, r.fidelity);
}
