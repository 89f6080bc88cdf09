use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use qtransport_core::fock::{lindblad_rhs, LadderAlgebra};
use qtransport_core::lattice::rates;
use qtransport_core::reservoir::{mu_from_population, occupation, population, population_slope};
use qtransport_core::{parse_config, ChannelSpec, QuantumStatistics, SystemState, TransportModel, TrapSpec};

use QuantumStatistics::{Bose, Fermi};

fn trap() -> TrapSpec {
    TrapSpec::new(1.0, 0.2, 0.2, 0.05).unwrap()
}

fn hermitian(m: usize, entries: &[f64]) -> DMatrix<Complex64> {
    let mut s = DMatrix::zeros(m, m);
    let mut k = 0;
    let mut next = || {
        k += 1;
        entries[(k - 1) % entries.len()]
    };
    for a in 0..m {
        s[(a, a)] = Complex64::new(next().abs(), 0.0);
        for b in a + 1..m {
            let z = Complex64::new(next(), next());
            s[(a, b)] = z;
            s[(b, a)] = z.conj();
        }
    }
    s
}

proptest! {
    #[test]
    fn occupation_decreases_with_energy(x in -5.0f64..5.0, dx in 1e-3f64..3.0, beta in 0.1f64..4.0) {
        for stats in [Fermi, Bose] {
            // keep bosons above the chemical potential
            let (e1, e2) = if stats == Bose { (x.abs() + 0.01, x.abs() + 0.01 + dx) } else { (x, x + dx) };
            prop_assert!(occupation(e1, 0.0, beta, stats).unwrap() > occupation(e2, 0.0, beta, stats).unwrap());
        }
    }

    #[test]
    fn bosons_outnumber_fermions(x in 0.01f64..8.0) {
        let nb = occupation(x, 0.0, 1.0, Bose).unwrap();
        let nf = occupation(x, 0.0, 1.0, Fermi).unwrap();
        let classical = (-x).exp();
        prop_assert!(nb > classical && classical > nf);
    }

    #[test]
    fn damping_does_not_depend_on_filling(n_l in 0.0f64..1.0, n_r in 0.0f64..1.0, gl in 0.0f64..2.0, gr in 0.0f64..2.0) {
        for stats in [Fermi, Bose] {
            let r = rates(n_l, n_r, gl, gr, stats).unwrap();
            let s = stats.sign();
            prop_assert!((r.gamma_minus_l - s * r.gamma_plus_l - gl).abs() < 1e-14);
            prop_assert!((r.gamma_minus_r - s * r.gamma_plus_r - gr).abs() < 1e-14);
        }
    }

    #[test]
    fn population_inverts(mu in -3.0f64..0.2) {
        for stats in [Fermi, Bose] {
            let n = population(mu, &trap(), stats).unwrap();
            prop_assert!(population_slope(mu, &trap(), stats).unwrap() > 0.0);
            let back = mu_from_population(n, &trap(), stats).unwrap();
            prop_assert!((back - mu).abs() < 1e-9, "{:?}: {} vs {}", stats, back, mu);
        }
    }

    #[test]
    fn derivative_stays_hermitian(entries in prop::collection::vec(-0.2f64..0.2, 8..30), m in 2usize..7) {
        for stats in [Fermi, Bose] {
            let ch = ChannelSpec::new(m, 2.0, 1.0).unwrap();
            let model = TransportModel::new(ch, trap(), 0.5, 0.3, stats).unwrap();
            let state = SystemState { t: 0.0, sigma: hermitian(m, &entries), mu_l: -0.3, mu_r: -1.0 };
            let d = model.rhs(&state).unwrap().sigma;
            let asym = (&d - d.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            prop_assert!(asym < 1e-14);
        }
    }

    #[test]
    fn lindblad_preserves_trace(entries in prop::collection::vec(-1.0f64..1.0, 16..60), n_l in 0.0f64..1.0, n_r in 0.0f64..1.0) {
        for (stats, n_max) in [(Fermi, 1), (Bose, 2)] {
            let alg = LadderAlgebra::new(2, stats, n_max).unwrap();
            let rho = hermitian(alg.dim(), &entries);
            let ch = ChannelSpec::new(2, 2.0, 1.0).unwrap();
            let r = rates(n_l, n_r, 0.5, 0.3, stats).unwrap();
            let d = lindblad_rhs(&rho, &alg, &ch, &r).unwrap();
            prop_assert!(d.trace().norm() < 1e-13);
            let asym = (&d - d.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            prop_assert!(asym < 1e-13);
        }
    }

    #[test]
    fn config_round_trip(
        m in 2usize..40,
        eps in 0.5f64..4.0,
        gamma in 0.01f64..2.0,
        beta in 0.1f64..3.0,
        mu_l in -3.0f64..0.2,
        mu_r in -3.0f64..0.2,
        bose in any::<bool>(),
        t_end in prop::option::of(1.0f64..1e5),
    ) {
        let text = format!(
            "stats = {}\nM = {m}\neps_s = {eps}\nJ = 1\ngamma_L = {gamma}\nbeta = {beta}\n\
             omega_x = 0.2\nomega_y = 0.2\nomega_z = 0.05\nmu_L0 = {mu_l}\nmu_R0 = {mu_r}\nt_end = {}\n",
            if bose { "bose" } else { "fermi" },
            t_end.map_or("auto".to_string(), |t| t.to_string()),
        );
        let c = parse_config(&text).unwrap();
        prop_assert_eq!(parse_config(&c.render()).unwrap(), c);
    }
}
