//! The tight-binding channel: single-particle Hamiltonian, boundary rates and
//! the non-Hermitian effective Hamiltonian that sets the relaxation time.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::reservoir::QuantumStatistics;

/// Uniform chain of `M` sites with on-site energy `ε_S` and hopping `J`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSpec {
    sites: usize,
    eps_s: f64,
    hopping: f64,
}

impl ChannelSpec {
    pub fn new(sites: usize, eps_s: f64, hopping: f64) -> Result<Self> {
        if sites < 2 {
            return Err(Error::domain(format!(
                "channel needs at least 2 sites (one per reservoir), got {sites}"
            )));
        }
        if !(hopping > 0.0 && hopping.is_finite()) {
            return Err(Error::domain(format!("hopping J must be positive, got {hopping}")));
        }
        if !eps_s.is_finite() {
            return Err(Error::domain("on-site energy must be finite"));
        }
        Ok(ChannelSpec { sites, eps_s, hopping })
    }

    /// Number of sites `M`.
    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn eps_s(&self) -> f64 {
        self.eps_s
    }

    /// Tunnelling strength `J`.
    pub fn hopping(&self) -> f64 {
        self.hopping
    }
}

/// Instantaneous gain (`plus`) and loss (`minus`) rates at the two ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSet {
    pub gamma_plus_l: f64,
    pub gamma_minus_l: f64,
    pub gamma_plus_r: f64,
    pub gamma_minus_r: f64,
}

impl RateSet {
    pub const ZERO: RateSet = RateSet {
        gamma_plus_l: 0.0,
        gamma_minus_l: 0.0,
        gamma_plus_r: 0.0,
        gamma_minus_r: 0.0,
    };
}

/// `h_jk`: `ε_S` on the diagonal, `−J` between neighbours.
pub fn hamiltonian(channel: &ChannelSpec) -> DMatrix<f64> {
    let m = channel.sites;
    DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            channel.eps_s
        } else if i.abs_diff(j) == 1 {
            -channel.hopping
        } else {
            0.0
        }
    })
}

/// Boundary rates `γ⁺ = γ n`, `γ⁻ = γ (1 + s n)` for given resonant reservoir
/// occupations.
pub fn rates(n_l: f64, n_r: f64, gamma_l: f64, gamma_r: f64, stats: QuantumStatistics) -> Result<RateSet> {
    for (side, n) in [("left", n_l), ("right", n_r)] {
        if !(n >= 0.0) {
            return Err(Error::domain(format!("{side} occupation must be >= 0, got {n}")));
        }
        if stats == QuantumStatistics::Fermi && n > 1.0 {
            return Err(Error::domain(format!(
                "{side} fermi occupation must not exceed 1, got {n}"
            )));
        }
    }
    let s = stats.sign();
    Ok(RateSet {
        gamma_plus_l: gamma_l * n_l,
        gamma_minus_l: gamma_l * (1.0 + s * n_l),
        gamma_plus_r: gamma_r * n_r,
        gamma_minus_r: gamma_r * (1.0 + s * n_r),
    })
}

/// `h − (i/2)(γ_L P_1 + γ_R P_M)`.
///
/// The damping on each boundary is `γ⁻ − s γ⁺ = γ` whatever the reservoir
/// occupation, so this matrix does not depend on time.
pub fn effective_hamiltonian(channel: &ChannelSpec, gamma_l: f64, gamma_r: f64) -> DMatrix<Complex64> {
    let m = channel.sites;
    let mut h = hamiltonian(channel).map(|x| Complex64::new(x, 0.0));
    h[(0, 0)] -= Complex64::new(0.0, 0.5 * gamma_l);
    h[(m - 1, m - 1)] -= Complex64::new(0.0, 0.5 * gamma_r);
    h
}

/// Eigenvalues of [`effective_hamiltonian`].
pub fn effective_spectrum(channel: &ChannelSpec, gamma_l: f64, gamma_r: f64) -> Result<Vec<Complex64>> {
    let h = effective_hamiltonian(channel, gamma_l, gamma_r);
    let schur = Schur::try_new(h, 1e-15, 10_000)
        .ok_or_else(|| Error::Numeric("Schur decomposition did not converge".into()))?;
    let vals = schur
        .eigenvalues()
        .ok_or_else(|| Error::Numeric("complex Schur form yielded no eigenvalues".into()))?;
    let mut vals: Vec<Complex64> = vals.iter().copied().collect();
    vals.sort_by(|a, b| a.re.total_cmp(&b.re));
    Ok(vals)
}

/// Damping time of the single-particle coherences, `1/(2 min_k |Im λ_k|)`.
///
/// SPDM elements decay at the sum of two single-particle rates, so the slowest
/// coherence decays at twice the smallest one.
pub fn relaxation_time(channel: &ChannelSpec, gamma: f64) -> Result<f64> {
    relaxation_time_asymmetric(channel, gamma, gamma)
}

/// [`relaxation_time`] with different couplings at the two ends.
pub fn relaxation_time_asymmetric(channel: &ChannelSpec, gamma_l: f64, gamma_r: f64) -> Result<f64> {
    for g in [gamma_l, gamma_r] {
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::domain(format!("gamma must be positive, got {g}")));
        }
    }
    let spectrum = effective_spectrum(channel, gamma_l, gamma_r)?;
    let slowest = spectrum.iter().map(|l| l.im.abs()).fold(f64::INFINITY, f64::min);
    if !(slowest > 0.0) {
        return Err(Error::Numeric("effective spectrum has an undamped mode".into()));
    }
    Ok(1.0 / (2.0 * slowest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::SymmetricEigen;
    use std::f64::consts::PI;

    #[test]
    fn two_site_hamiltonian() {
        let h = hamiltonian(&ChannelSpec::new(2, 2.0, 1.0).unwrap());
        assert_eq!(h, DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]));
    }

    #[test]
    fn open_chain_spectrum() {
        for m in [3usize, 7, 20] {
            let ch = ChannelSpec::new(m, 0.4, 1.3).unwrap();
            let h = hamiltonian(&ch);
            assert_eq!(h, h.transpose());
            let mut got: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
            got.sort_by(f64::total_cmp);
            let mut want: Vec<f64> = (1..=m)
                .map(|k| 0.4 - 2.0 * 1.3 * (k as f64 * PI / (m as f64 + 1.0)).cos())
                .collect();
            want.sort_by(f64::total_cmp);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-12, "{g} vs {w}");
            }
        }
        let h = hamiltonian(&ChannelSpec::new(3, 0.0, 1.0).unwrap());
        let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let r2 = 2f64.sqrt();
        assert!((ev[0] + r2).abs() < 1e-12 && ev[1].abs() < 1e-12 && (ev[2] - r2).abs() < 1e-12);
    }

    #[test]
    fn rates_examples() {
        let r = rates(0.35457, 0.2, 0.5, 0.5, QuantumStatistics::Fermi).unwrap();
        assert!((r.gamma_plus_l - 0.177285).abs() < 1e-12);
        assert!((r.gamma_minus_l - 0.322715).abs() < 1e-12);
        let b = rates(1.0, 0.0, 0.5, 0.5, QuantumStatistics::Bose).unwrap();
        assert_eq!((b.gamma_plus_l, b.gamma_minus_l), (0.5, 1.0));
        assert_eq!((b.gamma_plus_r, b.gamma_minus_r), (0.0, 0.5));
        assert!(rates(1.01, 0.2, 0.5, 0.5, QuantumStatistics::Fermi).is_err());
        assert!(rates(0.1, -0.2, 0.5, 0.5, QuantumStatistics::Bose).is_err());
    }

    #[test]
    fn two_site_effective_spectrum() {
        let ch = ChannelSpec::new(2, 2.0, 1.0).unwrap();
        let g = 0.5;
        let ev = effective_spectrum(&ch, g, g).unwrap();
        assert!((ev[0] - Complex64::new(1.0, -g / 2.0)).norm() < 1e-12);
        assert!((ev[1] - Complex64::new(3.0, -g / 2.0)).norm() < 1e-12);
        assert_relative_eq!(relaxation_time(&ch, g).unwrap(), 2.0, max_relative = 1e-12);
    }

    #[test]
    fn effective_hamiltonian_structure() {
        let ch = ChannelSpec::new(6, 1.5, 1.0).unwrap();
        let (gl, gr) = (0.3, 0.8);
        let h = effective_hamiltonian(&ch, gl, gr);
        let tr: Complex64 = h.diagonal().iter().sum();
        assert!((tr - Complex64::new(6.0 * 1.5, -(gl + gr) / 2.0)).norm() < 1e-14);
        let anti = &h - h.adjoint();
        for i in 0..6 {
            for j in 0..6 {
                let want = match (i, j) {
                    (0, 0) => Complex64::new(0.0, -gl),
                    (5, 5) => Complex64::new(0.0, -gr),
                    _ => Complex64::new(0.0, 0.0),
                };
                assert!((anti[(i, j)] - want).norm() < 1e-15);
            }
        }
        for l in effective_spectrum(&ch, gl, gr).unwrap() {
            assert!(l.im < 0.0);
        }
    }

    #[test]
    fn relaxation_time_seven_sites() {
        let ch = ChannelSpec::new(7, 2.0, 1.0).unwrap();
        let tau = relaxation_time(&ch, 0.5).unwrap();
        assert!((tau / 27.833 - 1.0).abs() < 5e-3, "{tau}");
        // first-order perturbation theory in γ: Im λ_1 = −γ (2/(M+1)) sin²(π/(M+1))
        let m = 7.0;
        let pert = 1.0 / (2.0 * 0.5 * (2.0 / (m + 1.0)) * (PI / (m + 1.0)).sin().powi(2));
        assert!((pert - 27.31).abs() < 5e-3, "{pert}");
        assert!(tau > pert);
    }

    #[test]
    fn relaxation_time_inverse_in_small_gamma() {
        let ch = ChannelSpec::new(9, 2.0, 1.0).unwrap();
        for g in [0.1, 0.05, 0.02] {
            let ratio = relaxation_time(&ch, g / 2.0).unwrap() / relaxation_time(&ch, g).unwrap();
            assert!((ratio - 2.0).abs() < 0.02, "gamma {g}: ratio {ratio}");
        }
    }

    #[test]
    fn rejects_bad_channels() {
        assert!(ChannelSpec::new(1, 2.0, 1.0).is_err());
        assert!(ChannelSpec::new(3, 2.0, 0.0).is_err());
        assert!(relaxation_time(&ChannelSpec::new(3, 2.0, 1.0).unwrap(), 0.0).is_err());
    }
}
