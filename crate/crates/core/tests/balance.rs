//! Local particle balance: bulk continuity, boundary exchange and the
//! reservoir equations.

use nalgebra::DMatrix;
use num_complex::Complex64;
use qtransport_core::dynamics::ReservoirMode;
use qtransport_core::reservoir::{occupation, population_slope};
use qtransport_core::{ChannelSpec, QuantumStatistics, Sampling, StepControl, SystemState, TransportModel, TrapSpec};

fn model(m: usize, stats: QuantumStatistics) -> TransportModel {
    let ch = ChannelSpec::new(m, 2.0, 1.0).unwrap();
    let trap = TrapSpec::new(1.0, 0.2, 0.2, 0.05).unwrap();
    TransportModel::new(ch, trap, 0.5, 0.35, stats).unwrap()
}

/// A Hermitian matrix with small, deterministic, non-trivial entries.
fn state(m: usize, mu_l: f64, mu_r: f64) -> SystemState {
    let sigma = DMatrix::from_fn(m, m, |a, b| {
        let (a, b) = (a as f64, b as f64);
        if a == b {
            Complex64::new(0.3 + 0.02 * a, 0.0)
        } else {
            let re = 0.01 * (a + b).sin();
            let im = 0.015 * (b - a) / (1.0 + (a - b).abs());
            Complex64::new(re, im)
        }
    });
    SystemState {
        t: 0.0,
        sigma,
        mu_l,
        mu_r,
    }
}

#[test]
#[allow(clippy::needless_range_loop)]
fn continuity_in_the_bulk_and_at_the_edges() {
    for stats in [QuantumStatistics::Fermi, QuantumStatistics::Bose] {
        let m = 6;
        let mdl = model(m, stats);
        let s = state(m, -0.2, -0.9);
        let d = mdl.rhs(&s).unwrap();
        let obs = mdl.observables(&s).unwrap();
        let (n_l, n_r) = mdl.resonant_occupations(s.mu_l, s.mu_r).unwrap();
        let dn: Vec<f64> = (0..m).map(|i| d.sigma[(i, i)].re).collect();

        for i in 1..m - 1 {
            let expected = obs.j[i - 1] - obs.j[i];
            assert!((dn[i] - expected).abs() < 1e-14, "{stats:?} site {i}");
        }
        let left = mdl.gamma_l * (n_l - obs.n[0]) - obs.j[0];
        let right = mdl.gamma_r * (n_r - obs.n[m - 1]) + obs.j[m - 2];
        assert!((dn[0] - left).abs() < 1e-14);
        assert!((dn[m - 1] - right).abs() < 1e-14);
    }
}

#[test]
fn reservoirs_absorb_what_the_edges_release() {
    for stats in [QuantumStatistics::Fermi, QuantumStatistics::Bose] {
        let mdl = model(5, stats);
        let s = state(5, -0.1, -0.7);
        let d = mdl.rhs(&s).unwrap();
        let trap = mdl.trap;
        let (flow_l, flow_r) = mdl.reservoir_flows(&s).unwrap();
        let dn_l = population_slope(s.mu_l, &trap, stats).unwrap() * d.mu_l;
        let dn_r = population_slope(s.mu_r, &trap, stats).unwrap() * d.mu_r;
        assert!((dn_l - flow_l).abs() < 1e-12 * flow_l.abs().max(1.0));
        assert!((dn_r - flow_r).abs() < 1e-12 * flow_r.abs().max(1.0));

        let lattice: f64 = (0..5).map(|i| d.sigma[(i, i)].re).sum();
        assert!((lattice + dn_l + dn_r).abs() < 1e-13, "{stats:?}");
    }
}

#[test]
fn steady_edges_are_offset_by_the_current() {
    // in the steady state each edge trails its reservoir by j/γ
    let m = 7;
    let mdl = model(m, QuantumStatistics::Fermi).with_reservoirs(ReservoirMode::Frozen);
    let traj = mdl
        .integrate(
            &SystemState::empty(m, 1.401, 0.907),
            1500.0,
            &StepControl::new(1e-10, 1e-12),
            Sampling::Uniform { points: 10 },
        )
        .unwrap();
    let last = traj.records.last().unwrap();
    let n_l = occupation(2.0, last.mu_l, 1.0, QuantumStatistics::Fermi).unwrap();
    let n_r = occupation(2.0, last.mu_r, 1.0, QuantumStatistics::Fermi).unwrap();
    let j = last.j[m / 2];
    assert!((n_l - last.n[0] - j / mdl.gamma_l).abs() < 1e-8);
    assert!((last.n[m - 1] - n_r - j / mdl.gamma_r).abs() < 1e-8);
    let spread = last.j.iter().map(|x| (x - j).abs()).fold(0.0, f64::max);
    assert!(spread < 1e-7 * j.abs());
}
