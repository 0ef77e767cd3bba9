use std::collections::BTreeSet;

use hipmdp::env::{
    batches_from_rows, read_trajectories, sample_instance, write_trajectories, Acrobot, AcrobotParams,
    Cartpole, CartpoleParams, Domain, Environment, TrajectoryRow,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Second transcription of the cartpole update, written from the equations
/// independently of the library code.
fn cartpole_oracle(s: [f64; 4], force: f64, m: f64, l: f64) -> [f64; 4] {
    let (tau, g, mc) = (0.02, 9.8, 1.0);
    let total = mc + m;
    let [x, x_dot, theta, theta_dot] = s;
    let v = (force + m * l * theta_dot.powi(2) * theta.sin()) / total;
    let denom = l * (4.0 / 3.0 - m * theta.cos().powi(2) / total);
    let theta_acc = (g * theta.sin() - v * theta.cos()) / denom;
    let x_acc = v - m * l * theta_acc * theta.cos() / total;
    [x + tau * x_dot, x_dot + tau * x_acc, theta + tau * theta_dot, theta_dot + tau * theta_acc]
}

#[test]
fn cartpole_matches_transcribed_equations() {
    let env = Cartpole::new(CartpoleParams::with_pole(0.2, 0.5)).unwrap();
    let got = env.step(&[0.0, 0.0, 0.05, 0.0], 1).unwrap().s_next;
    let want = cartpole_oracle([0.0, 0.0, 0.05, 0.0], 10.0, 0.2, 0.5);
    for d in 0..4 {
        assert!((got[d] - want[d]).abs() < 1e-12, "dim {d}: {} vs {}", got[d], want[d]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let s = [
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-0.2..0.2),
            rng.random_range(-2.0..2.0),
        ];
        let a = rng.random_range(0..2);
        let got = env.transition(&s, a);
        let want = cartpole_oracle(s, if a == 0 { -10.0 } else { 10.0 }, 0.2, 0.5);
        for d in 0..4 {
            assert!((got[d] - want[d]).abs() < 1e-12);
        }
    }
}

#[test]
fn cartpole_rests_without_force_and_freezes_without_time() {
    let env = Cartpole::new(CartpoleParams::default()).unwrap();
    let mut s = vec![0.0; 4];
    for _ in 0..100 {
        s = env.euler(&s, 0.0);
    }
    assert_eq!(s, vec![0.0; 4]);
    let pushed = env.euler(&[0.0; 4], 10.0);
    assert!(pushed[1] > 0.0 && pushed[3] < 0.0);
    let frozen = Cartpole::new(CartpoleParams {
        tau: 0.0,
        ..CartpoleParams::default()
    })
    .unwrap();
    let s = [0.3, -0.2, 0.1, 0.4];
    assert_eq!(frozen.transition(&s, 1), s.to_vec());
}

#[test]
fn cartpole_terminates_outside_bounds() {
    let env = Cartpole::new(CartpoleParams::default()).unwrap();
    assert_eq!(env.outcome(&[0.0, 0.0, 0.1, 0.0]), (1.0, false));
    assert_eq!(env.outcome(&[0.0, 0.0, 0.22, 0.0]), (0.0, true));
    assert_eq!(env.outcome(&[-2.5, 0.0, 0.0, 0.0]), (0.0, true));
    assert!(env.outcome(&[f64::NAN, 0.0, 0.0, 0.0]).1);
}

#[test]
fn steps_validate_inputs() {
    let env = Cartpole::new(CartpoleParams::default()).unwrap();
    assert!(env.step(&[0.0; 3], 0).is_err());
    assert!(env.step(&[0.0; 4], 2).is_err());
    assert!(Cartpole::new(CartpoleParams::with_pole(-0.1, 0.5)).is_err());
    assert!(Acrobot::new(AcrobotParams {
        substeps: 0,
        ..AcrobotParams::default()
    })
    .is_err());
}

#[test]
fn acrobot_hanging_at_rest_stays_put() {
    let env = Acrobot::new(AcrobotParams::with_masses(0.9, 1.3)).unwrap();
    let mut s = vec![0.0; 4];
    for _ in 0..100 {
        s = env.step(&s, 1).unwrap().s_next;
    }
    assert!(s.iter().all(|v| v.abs() < 1e-12), "{s:?}");
}

fn energy_drift_per_second(m1: f64, m2: f64, s0: [f64; 4]) -> f64 {
    let env = Acrobot::new(AcrobotParams::with_masses(m1, m2)).unwrap();
    let e0 = env.energy(&s0);
    let rest = env.energy(&[0.0; 4]);
    let mut s = s0.to_vec();
    // 1 s at dt = 1e-5
    for _ in 0..5 {
        s = env.integrate(&s, 0.0, 20_000);
    }
    (env.energy(&s) - e0).abs() / (e0 - rest).abs()
}

#[test]
fn acrobot_energy_is_conserved_with_fine_substeps() {
    for (m1, m2) in [(0.7, 0.7), (1.0, 1.0), (1.3, 0.9)] {
        for s0 in [[0.8, 0.0, -0.5, 0.0], [0.3, 1.0, 0.2, -1.5], [2.0, 0.0, 1.0, 0.5]] {
            let drift = energy_drift_per_second(m1, m2, s0);
            assert!(drift < 1e-3, "drift {drift} for {s0:?}");
        }
    }
}

#[test]
fn acrobot_is_mirror_symmetric() {
    let env = Acrobot::new(AcrobotParams::with_masses(1.1, 0.7)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut s = vec![0.4, -0.3, 0.2, 0.6];
    let mut mirrored: Vec<f64> = s.iter().map(|v| -v).collect();
    for _ in 0..60 {
        let a = rng.random_range(0..3);
        s = env.step(&s, a).unwrap().s_next;
        mirrored = env.step(&mirrored, 2 - a).unwrap().s_next;
        for d in 0..4 {
            assert!((s[d] + mirrored[d]).abs() < 1e-9, "{s:?} vs {mirrored:?}");
        }
    }
}

#[test]
fn acrobot_goal_and_reward() {
    let env = Acrobot::new(AcrobotParams::default()).unwrap();
    assert_eq!(env.outcome(&[0.0; 4]), (-1.0, false));
    assert_eq!(env.outcome(&[std::f64::consts::PI, 0.0, 0.0, 0.0]), (-1.0, true));
}

#[test]
fn acrobot_wraps_angles_and_clamps_velocities() {
    let env = Acrobot::new(AcrobotParams::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut s = vec![3.0, 12.0, -3.0, 25.0];
    for _ in 0..300 {
        let next = env.step(&s, rng.random_range(0..3)).unwrap().s_next;
        assert!(next[0].abs() <= std::f64::consts::PI && next[2].abs() <= std::f64::consts::PI);
        assert!(next[1].abs() <= 4.0 * std::f64::consts::PI + 1e-12);
        assert!(next[3].abs() <= 9.0 * std::f64::consts::PI + 1e-12);
        // velocities change by at most the clamp range, never by a wrap
        assert!((next[1] - s[1]).abs() < 8.0 * std::f64::consts::PI);
        s = next;
    }
}

#[test]
fn dynamics_vary_smoothly_with_parameters() {
    let s = [0.5, 0.3, -0.4, 0.8];
    let next = |m: f64| Acrobot::new(AcrobotParams::with_masses(m, 1.0)).unwrap().transition(&s, 2);
    let fd = |m: f64, h: f64| (next(m + h)[1] - next(m - h)[1]) / (2.0 * h);
    for m in [0.8, 1.0, 1.2] {
        let (coarse, fine) = (fd(m, 1e-3), fd(m, 1e-4));
        assert!(coarse.is_finite() && (coarse - fine).abs() < 1e-4 * (1.0 + fine.abs()));
    }
    let cnext = |m: f64| Cartpole::new(CartpoleParams::with_pole(m, 0.5)).unwrap().transition(&s, 1);
    let cfd = |m: f64, h: f64| (cnext(m + h)[3] - cnext(m - h)[3]) / (2.0 * h);
    for m in [0.15, 0.2, 0.25] {
        assert!((cfd(m, 1e-3) - cfd(m, 1e-4)).abs() < 1e-4 * (1.0 + cfd(m, 1e-4).abs()));
    }
}

#[test]
fn grids_have_the_listed_settings() {
    let distinct = |v: Vec<[f64; 2]>| v.iter().map(|p| (p[0].to_bits(), p[1].to_bits())).collect::<BTreeSet<_>>();
    assert_eq!(distinct(Domain::Cartpole.evaluation_grid()).len(), 25);
    assert_eq!(distinct(Domain::Acrobot.evaluation_grid()).len(), 16);
    assert_eq!(Domain::Cartpole.training_settings().len(), 7);
    assert_eq!(distinct(Domain::Cartpole.training_settings()).len(), 6);
    assert_eq!(Domain::Acrobot.training_settings().len(), 8);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        assert_eq!(sample_instance(&[[0.2, 0.5]], &mut rng).unwrap(), [0.2, 0.5]);
    }
    assert!(sample_instance(&[], &mut rng).is_err());
    let grid = Domain::Acrobot.evaluation_grid();
    let seen: BTreeSet<_> = (0..400).map(|_| sample_instance(&grid, &mut rng).unwrap()[0].to_bits()).collect();
    assert_eq!(seen.len(), 4);
}

#[test]
fn domains_build_their_simulators() {
    let env = Domain::Acrobot.make([0.9, 1.1]).unwrap();
    assert_eq!(env.num_actions(), 3);
    assert_eq!(env.params()["m2"], 1.1);
    let env = Domain::Cartpole.make([0.25, 0.45]).unwrap();
    assert_eq!(env.num_actions(), 2);
    assert_eq!(env.max_steps(), 300);
    assert_eq!(env.params()["l"], 0.45);
}

#[test]
fn trajectory_csv_round_trips_exactly() {
    let env = Domain::Acrobot.make([0.7, 1.3]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut rows = Vec::new();
    for instance in [3, 5] {
        let mut s = env.reset(&mut rng);
        for t in 0..20 {
            let a = rng.random_range(0..3);
            let step = env.step(&s, a).unwrap();
            rows.push(TrajectoryRow {
                instance,
                episode: 0,
                t,
                s: s.clone(),
                action: a,
                reward: step.reward,
                s_next: step.s_next.clone(),
                done: step.done,
            });
            s = step.s_next;
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("traj.csv");
    write_trajectories(&path, &rows).unwrap();
    assert_eq!(read_trajectories(&path).unwrap(), rows);
    let batches = batches_from_rows(&rows);
    assert_eq!(batches.iter().map(|b| (b.id, b.len())).collect::<Vec<_>>(), vec![(3, 20), (5, 20)]);
    std::fs::write(&path, "instance_id,episode,t,s0,action,reward,next0,done\n0,0,0,x,1,1,0,0\n").unwrap();
    assert!(read_trajectories(&path).is_err());
}

proptest! {
    #[test]
    fn simulators_are_deterministic(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for domain in [Domain::Cartpole, Domain::Acrobot] {
            let grid = domain.evaluation_grid();
            let env = domain.make(sample_instance(&grid, &mut rng).unwrap()).unwrap();
            let s = env.reset(&mut rng);
            let a = rng.random_range(0..env.num_actions());
            prop_assert_eq!(env.step(&s, a).unwrap(), env.step(&s, a).unwrap());
        }
    }
}
