//! Thermodynamics of a finite reservoir held in a 3D anisotropic harmonic trap.
//!
//! The reservoir is a grand-canonical ideal gas at inverse temperature `β` and
//! chemical potential `μ`. With the semiclassical trap density of states
//! `D(ε) = (ε − E0)² / (2 ωx ωy ωz)` the particle number is a complete
//! Bose/Fermi integral:
//!
//! ```text
//! N(μ)     = s · Li_3(s · e^{β(μ−E0)}) / (β³ ωx ωy ωz)
//! dN/dμ    = s · Li_2(s · e^{β(μ−E0)}) / (β² ωx ωy ωz)
//! ```
//!
//! with `s = +1` for bosons and `s = −1` for fermions. Energies are in units of
//! the tunnelling strength `J` with `ħ = 1`.

use std::fmt;

use crate::error::{Error, Result};
use crate::polylog;
use crate::roots::{find_root, X_TOL};

/// Bosons may not approach the band bottom closer than this (no condensate).
pub const BOSE_MARGIN: f64 = 1e-6;

/// Particle statistics; every `±`/`∓` in the transport formulas derives from
/// [`QuantumStatistics::sign`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QuantumStatistics {
    Bose,
    Fermi,
}

impl QuantumStatistics {
    /// `+1` for bosons, `-1` for fermions.
    pub fn sign(self) -> f64 {
        match self {
            QuantumStatistics::Bose => 1.0,
            QuantumStatistics::Fermi => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            QuantumStatistics::Bose => "bose",
            QuantumStatistics::Fermi => "fermi",
        }
    }
}

impl fmt::Display for QuantumStatistics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for QuantumStatistics {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bose" => Ok(QuantumStatistics::Bose),
            "fermi" => Ok(QuantumStatistics::Fermi),
            other => Err(Error::Config(format!("stats must be `bose` or `fermi`, got `{other}`"))),
        }
    }
}

/// Harmonic trap holding one reservoir.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapSpec {
    beta: f64,
    omega: [f64; 3],
}

impl TrapSpec {
    pub fn new(beta: f64, omega_x: f64, omega_y: f64, omega_z: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::domain(format!("beta must be positive, got {beta}")));
        }
        for (name, w) in [("omega_x", omega_x), ("omega_y", omega_y), ("omega_z", omega_z)] {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::domain(format!("{name} must be positive, got {w}")));
            }
        }
        Ok(TrapSpec {
            beta,
            omega: [omega_x, omega_y, omega_z],
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn omegas(&self) -> [f64; 3] {
        self.omega
    }

    /// Zero-point energy of the trap, `(ωx + ωy + ωz)/2`.
    pub fn e0(&self) -> f64 {
        0.5 * self.omega.iter().sum::<f64>()
    }

    fn omega_product(&self) -> f64 {
        self.omega.iter().product()
    }

    /// Number of particles per unit `F_3` (or `Li_3`): `1/(β³ ωx ωy ωz)`.
    fn capacity_scale(&self) -> f64 {
        1.0 / (self.beta.powi(3) * self.omega_product())
    }
}

/// Occupation `1/(e^{β(ε−μ)} − s)` of a single-particle level.
pub fn occupation(eps: f64, mu: f64, beta: f64, stats: QuantumStatistics) -> Result<f64> {
    let x = beta * (eps - mu);
    match stats {
        QuantumStatistics::Fermi => {
            // 1/(e^x + 1) without overflow for large |x|
            Ok(if x >= 0.0 {
                let e = (-x).exp();
                e / (1.0 + e)
            } else {
                1.0 / (1.0 + x.exp())
            })
        }
        QuantumStatistics::Bose => {
            if x <= 0.0 {
                return Err(Error::domain(format!(
                    "bose occupation diverges: eps = {eps} must exceed mu = {mu}"
                )));
            }
            Ok(1.0 / x.exp_m1())
        }
    }
}

/// Variance `n(1 + s n)` of a thermal occupation number.
pub fn occupation_variance(n: f64, stats: QuantumStatistics) -> Result<f64> {
    if n < 0.0 || !n.is_finite() {
        return Err(Error::domain(format!("occupation must be >= 0, got {n}")));
    }
    if stats == QuantumStatistics::Fermi && n > 1.0 {
        return Err(Error::domain(format!("fermi occupation must not exceed 1, got {n}")));
    }
    Ok(n * (1.0 + stats.sign() * n))
}

/// Trap density of states `(ε − E0)² / (2 ωx ωy ωz)`.
pub fn density_of_states(eps: f64, trap: &TrapSpec) -> Result<f64> {
    let de = eps - trap.e0();
    if de < 0.0 {
        return Err(Error::domain(format!(
            "density of states undefined below the band bottom: eps = {eps} < E0 = {}",
            trap.e0()
        )));
    }
    Ok(de * de / (2.0 * trap.omega_product()))
}

fn reduced_mu(mu: f64, trap: &TrapSpec, stats: QuantumStatistics) -> Result<f64> {
    let z = trap.beta * (mu - trap.e0());
    if !z.is_finite() {
        return Err(Error::domain(format!("chemical potential must be finite, got {mu}")));
    }
    if stats == QuantumStatistics::Bose && mu > trap.e0() - BOSE_MARGIN {
        return Err(Error::domain(format!(
            "bose chemical potential must stay below E0 - {BOSE_MARGIN:e} = {}, got {mu}",
            trap.e0() - BOSE_MARGIN
        )));
    }
    Ok(z)
}

/// Particle number `N(μ) = ∫ D(ε) n(ε, μ) dε` held by the reservoir.
pub fn population(mu: f64, trap: &TrapSpec, stats: QuantumStatistics) -> Result<f64> {
    let z = reduced_mu(mu, trap, stats)?;
    let f3 = match stats {
        QuantumStatistics::Fermi => polylog::fermi(3, z),
        QuantumStatistics::Bose => polylog::bose(3, z),
    };
    Ok(f3 * trap.capacity_scale())
}

/// `dN/dμ`, the reservoir compressibility.
pub fn population_slope(mu: f64, trap: &TrapSpec, stats: QuantumStatistics) -> Result<f64> {
    let z = reduced_mu(mu, trap, stats)?;
    let f2 = match stats {
        QuantumStatistics::Fermi => polylog::fermi(2, z),
        QuantumStatistics::Bose => polylog::bose(2, z),
    };
    Ok(trap.beta * f2 * trap.capacity_scale())
}

/// `N(μ)` by direct adaptive quadrature of `D(ε) n(ε, μ)`.
///
/// Independent of the polylogarithm route and roughly a thousand times slower;
/// used to cross-check [`population`].
pub fn population_by_quadrature(mu: f64, trap: &TrapSpec, stats: QuantumStatistics) -> Result<f64> {
    let z = reduced_mu(mu, trap, stats)?;
    // integrand in x = β(ε − E0); D dε = x² dx / (2 β³ ω³)
    let s = stats.sign();
    let f = |x: f64| {
        let arg = x - z;
        if arg > 700.0 {
            0.0
        } else {
            x * x / (arg.exp() - s)
        }
    };
    let split = z.max(0.0);
    let mut total = 0.0;
    let mut points = vec![0.0];
    if split > 0.0 {
        points.push(split);
    }
    points.extend([split + 10.0, split + 40.0, split + 90.0]);
    for w in points.windows(2) {
        let out = quadrature::integrate(f, w[0], w[1], 1e-15 * (1.0 + split.powi(3)));
        if !out.integral.is_finite() {
            return Err(Error::Numeric(format!("quadrature failed on [{}, {}]", w[0], w[1])));
        }
        total += out.integral;
    }
    Ok(0.5 * total * trap.capacity_scale())
}

/// Largest particle number a Bose reservoir can hold without crossing the
/// `E0 − BOSE_MARGIN` cap.
pub fn bose_capacity(trap: &TrapSpec) -> f64 {
    let z = -trap.beta * BOSE_MARGIN;
    polylog::bose(3, z) * trap.capacity_scale()
}

/// Inverts `N(μ)` by bracketed root finding.
pub fn mu_from_population(n: f64, trap: &TrapSpec, stats: QuantumStatistics) -> Result<f64> {
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::domain(format!("particle number must be > 0, got {n}")));
    }
    let target = |mu: f64| -> Result<f64> { Ok(population(mu, trap, stats)? / n - 1.0) };
    let (lo, hi) = bracket_monotone(trap, stats, n, |mu| population(mu, trap, stats))?;
    find_root(target, lo, hi, X_TOL)
}

/// Brackets the root of `g(μ) = target` for an increasing `g` that vanishes
/// as `μ → −∞`.
fn bracket_monotone<G>(trap: &TrapSpec, stats: QuantumStatistics, target: f64, g: G) -> Result<(f64, f64)>
where
    G: Fn(f64) -> Result<f64>,
{
    let e0 = trap.e0();
    let beta = trap.beta;
    let cap = e0 - BOSE_MARGIN;
    let mut hi = match stats {
        QuantumStatistics::Bose => {
            let top = g(cap)?;
            if top < target {
                return Err(Error::domain(format!(
                    "bose reservoir cannot hold {target}: the bound at mu = E0 - {BOSE_MARGIN:e} is {top}"
                )));
            }
            cap
        }
        QuantumStatistics::Fermi => {
            let mut hi = e0 + 1.0 / beta;
            let mut step = 1.0 / beta;
            while g(hi)? < target {
                hi += step;
                step *= 2.0;
                if hi > 1e8 {
                    return Err(Error::domain(format!("particle number {target} not bracketable")));
                }
            }
            hi
        }
    };
    let mut lo = hi.min(e0) - 1.0 / beta;
    let mut step = 1.0 / beta;
    while g(lo)? > target {
        hi = lo;
        lo -= step;
        step *= 2.0;
        if lo < -1e8 {
            return Err(Error::domain(format!("particle number {target} not bracketable")));
        }
    }
    Ok((lo, hi))
}

/// Final common equilibrium of two identical reservoirs and the channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibrium {
    pub mu_inf: f64,
    /// Resonant occupation `n(ε_S, μ∞)`, shared by every lattice site.
    pub n_inf: f64,
    /// Particles in each reservoir.
    pub pop_inf: f64,
}

/// Solves `N0 = 2 N(μ) + M n(ε_S, μ)` for the common chemical potential.
pub fn solve_equilibrium(
    n0: f64,
    channel: &crate::lattice::ChannelSpec,
    trap: &TrapSpec,
    stats: QuantumStatistics,
) -> Result<Equilibrium> {
    solve_equilibrium_sites(n0, channel.sites(), channel.eps_s(), trap, stats)
}

/// [`solve_equilibrium`] for an explicit site count, which may be zero.
pub fn solve_equilibrium_sites(
    n0: f64,
    sites: usize,
    eps_s: f64,
    trap: &TrapSpec,
    stats: QuantumStatistics,
) -> Result<Equilibrium> {
    if !(n0 > 0.0 && n0.is_finite()) {
        return Err(Error::domain(format!("total particle number must be > 0, got {n0}")));
    }
    let beta = trap.beta;
    let m = sites as f64;
    let total = |mu: f64| -> Result<f64> {
        let lattice = if sites == 0 {
            0.0
        } else {
            m * occupation(eps_s, mu, beta, stats)?
        };
        Ok(2.0 * population(mu, trap, stats)? + lattice)
    };
    if stats == QuantumStatistics::Bose && eps_s <= trap.e0() {
        return Err(Error::domain(format!(
            "bose channel level eps_s = {eps_s} must lie above E0 = {}",
            trap.e0()
        )));
    }
    let (lo, hi) = bracket_monotone(trap, stats, n0, total)?;
    let mu_inf = find_root(|mu| Ok(total(mu)? / n0 - 1.0), lo, hi, X_TOL)?;
    Ok(Equilibrium {
        mu_inf,
        n_inf: occupation(eps_s, mu_inf, beta, stats)?,
        pop_inf: population(mu_inf, trap, stats)?,
    })
}

/// Limiting resonant occupation `1/(e^{β(ε_S − E0)} − s)` reached as `μ∞ → E0`.
///
/// Lower bound of `n∞` for fermions, upper bound for bosons.
pub fn occupation_limit(eps_s: f64, trap: &TrapSpec, stats: QuantumStatistics) -> Result<f64> {
    let e0 = trap.e0();
    if eps_s <= e0 {
        return Err(Error::domain(format!(
            "occupation limit needs eps_s > E0, got eps_s = {eps_s}, E0 = {e0}"
        )));
    }
    occupation(eps_s, e0, trap.beta, stats)
}
