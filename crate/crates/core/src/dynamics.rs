//! Coupled evolution of the channel's single-particle density matrix and the
//! two reservoir chemical potentials.
//!
//! For the quadratic channel Hamiltonian with gain/loss at the end sites the
//! single-particle density matrix `σ_jk = ⟨a_j† a_k⟩` obeys the closed equation
//!
//! ```text
//! dσ/dt = i[h, σ] − ½{W, σ} + Γ⁺,     W = Γ⁻ − s Γ⁺
//! ```
//!
//! where `Γ±` are diagonal and non-zero only on sites 1 and M. The reservoirs
//! follow `dN_X/dt = γ_X (n_boundary − n_X(ε_S))`, recast as
//! `dμ_X/dt = (dN_X/dt) / (dN_X/dμ_X)`. Particle number is conserved exactly by
//! the equations and to integrator accuracy by the numerics.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{rates, ChannelSpec, RateSet};
use crate::ode::{self, OdeSystem, StepControl, StepStats};
use crate::reservoir::{occupation, population, population_slope, QuantumStatistics, TrapSpec};

/// Below this `dN/dμ` a reservoir is considered exhausted.
const MIN_SLOPE: f64 = 1e-300;

/// Dynamical variables at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub t: f64,
    /// `σ_jk = ⟨a_j† a_k⟩`, Hermitian.
    pub sigma: DMatrix<Complex64>,
    pub mu_l: f64,
    pub mu_r: f64,
}

impl SystemState {
    /// Empty lattice at `t = 0`.
    pub fn empty(sites: usize, mu_l: f64, mu_r: f64) -> Self {
        SystemState {
            t: 0.0,
            sigma: DMatrix::zeros(sites, sites),
            mu_l,
            mu_r,
        }
    }

    /// Every site holding `n0` particles, no coherences.
    pub fn uniform(sites: usize, n0: f64, mu_l: f64, mu_r: f64) -> Self {
        SystemState {
            t: 0.0,
            sigma: DMatrix::from_diagonal_element(sites, sites, Complex64::new(n0, 0.0)),
            mu_l,
            mu_r,
        }
    }

    pub fn sites(&self) -> usize {
        self.sigma.nrows()
    }

    /// `Σ_i n_i`.
    pub fn lattice_population(&self) -> f64 {
        self.sigma.diagonal().iter().map(|z| z.re).sum()
    }

    /// Checks Hermiticity and the statistics bounds on the spectrum of σ.
    pub fn check_invariants(&self, stats: QuantumStatistics, tol: f64) -> Result<()> {
        let herm = (&self.sigma - self.sigma.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if herm > 1e-12 {
            return Err(Error::Numeric(format!(
                "sigma not Hermitian at t = {}: {herm:e}",
                self.t
            )));
        }
        let (lo, hi) = sigma_spectrum_bounds(&self.sigma);
        if lo < -tol {
            return Err(Error::Numeric(format!("sigma eigenvalue {lo:e} < 0 at t = {}", self.t)));
        }
        if stats == QuantumStatistics::Fermi && hi > 1.0 + tol {
            return Err(Error::Numeric(format!(
                "fermi sigma eigenvalue {hi} > 1 at t = {}",
                self.t
            )));
        }
        Ok(())
    }
}

/// Smallest and largest eigenvalue of a Hermitian matrix.
pub fn sigma_spectrum_bounds(sigma: &DMatrix<Complex64>) -> (f64, f64) {
    let h = (sigma + sigma.adjoint()).unscale(2.0);
    let ev = nalgebra::SymmetricEigen::new(h).eigenvalues;
    let lo = ev.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Whether the reservoirs respond to the channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReservoirMode {
    Dynamic,
    /// Infinite compressibility: chemical potentials never move.
    Frozen,
}

/// Channel, reservoirs and couplings: everything the equations of motion need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportModel {
    pub channel: ChannelSpec,
    pub trap: TrapSpec,
    pub gamma_l: f64,
    pub gamma_r: f64,
    pub stats: QuantumStatistics,
    pub reservoirs: ReservoirMode,
}

/// Time derivative of a [`SystemState`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateDerivative {
    pub sigma: DMatrix<Complex64>,
    pub mu_l: f64,
    pub mu_r: f64,
}

/// One sampled row of one-body observables.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableRecord {
    pub t: f64,
    /// Site populations `n_i = σ_ii`.
    pub n: Vec<f64>,
    /// Bond currents `j_{i,i+1} = 2J Im σ_{i,i+1}`.
    pub j: Vec<f64>,
    pub mu_l: f64,
    pub mu_r: f64,
    pub pop_l: f64,
    pub pop_r: f64,
    /// Macroscopic current `I = −½ d(N_L − N_R)/dt`.
    pub current: f64,
    /// Largest long-range coherence `|σ_jk|`, `|j − k| > 1`.
    pub coh_max: f64,
}

impl ObservableRecord {
    pub fn total_particles(&self) -> f64 {
        self.pop_l + self.pop_r + self.n.iter().sum::<f64>()
    }
}

/// Output-time policy for [`TransportModel::integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sampling {
    /// `points` equally spaced samples after the start.
    Uniform {
        points: usize,
    },
    /// `points` log-spaced samples between `t_min` and the end.
    Log {
        points: usize,
        t_min: f64,
    },
    /// Log-spaced up to `t_split`, uniform afterwards.
    Hybrid {
        t_split: f64,
        log_points: usize,
        uniform_points: usize,
        t_min: f64,
    },
    EveryStep,
}

impl Sampling {
    pub const DEFAULT_LOG_POINTS: usize = 200;
    pub const DEFAULT_UNIFORM_POINTS: usize = 2000;
    pub const DEFAULT_T_MIN: f64 = 1e-3;

    /// Log grid up to `10 τ_rel`, then a uniform grid to the end.
    pub fn standard(tau_rel: f64) -> Self {
        Sampling::Hybrid {
            t_split: 10.0 * tau_rel,
            log_points: Self::DEFAULT_LOG_POINTS,
            uniform_points: Self::DEFAULT_UNIFORM_POINTS,
            t_min: Self::DEFAULT_T_MIN,
        }
    }

    /// Output times strictly after `t0`, up to and including `t_end`.
    pub fn times(&self, t0: f64, t_end: f64) -> Vec<f64> {
        let span = t_end - t0;
        let mut out = match *self {
            Sampling::Uniform { points } => uniform_grid(0.0, span, points),
            Sampling::Log { points, t_min } => log_grid(t_min, span, points),
            Sampling::Hybrid {
                t_split,
                log_points,
                uniform_points,
                t_min,
            } => {
                let split = t_split.min(span);
                let mut v = log_grid(t_min, split, log_points);
                if split < span {
                    v.extend(uniform_grid(split, span, uniform_points));
                }
                v
            }
            Sampling::EveryStep => Vec::new(),
        };
        for t in &mut out {
            *t += t0;
        }
        out.retain(|&t| t > t0 && t <= t_end);
        out.dedup();
        out
    }
}

fn uniform_grid(a: f64, b: f64, points: usize) -> Vec<f64> {
    let points = points.max(1);
    (1..=points).map(|i| a + (b - a) * i as f64 / points as f64).collect()
}

fn log_grid(t_min: f64, t_max: f64, points: usize) -> Vec<f64> {
    if !(t_max > t_min) || points == 0 {
        return vec![t_max];
    }
    if points == 1 {
        return vec![t_max];
    }
    let (la, lb) = (t_min.ln(), t_max.ln());
    let mut v: Vec<f64> = (0..points)
        .map(|i| (la + (lb - la) * i as f64 / (points - 1) as f64).exp())
        .collect();
    // pin the last point exactly
    *v.last_mut().unwrap() = t_max;
    v
}

/// Sampled solution of the coupled equations.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<SystemState>,
    pub records: Vec<ObservableRecord>,
    pub stats: StepStats,
}

impl Trajectory {
    pub fn final_state(&self) -> &SystemState {
        self.states.last().expect("trajectory always holds the initial state")
    }

    pub fn t_end(&self) -> f64 {
        self.final_state().t
    }
}

impl TransportModel {
    pub fn new(
        channel: ChannelSpec,
        trap: TrapSpec,
        gamma_l: f64,
        gamma_r: f64,
        stats: QuantumStatistics,
    ) -> Result<Self> {
        for (name, g) in [("gamma_L", gamma_l), ("gamma_R", gamma_r)] {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(Error::domain(format!("{name} must be >= 0, got {g}")));
            }
        }
        Ok(TransportModel {
            channel,
            trap,
            gamma_l,
            gamma_r,
            stats,
            reservoirs: ReservoirMode::Dynamic,
        })
    }

    pub fn with_reservoirs(mut self, mode: ReservoirMode) -> Self {
        self.reservoirs = mode;
        self
    }

    /// Resonant reservoir occupations `n_X(ε_S)`.
    pub fn resonant_occupations(&self, mu_l: f64, mu_r: f64) -> Result<(f64, f64)> {
        let eps = self.channel.eps_s();
        let beta = self.trap.beta();
        Ok((
            occupation(eps, mu_l, beta, self.stats)?,
            occupation(eps, mu_r, beta, self.stats)?,
        ))
    }

    pub fn rate_set(&self, mu_l: f64, mu_r: f64) -> Result<RateSet> {
        let (n_l, n_r) = self.resonant_occupations(mu_l, mu_r)?;
        rates(n_l, n_r, self.gamma_l, self.gamma_r, self.stats)
    }

    /// Right-hand side of the coupled equations.
    pub fn rhs(&self, state: &SystemState) -> Result<StateDerivative> {
        let m = self.channel.sites();
        let mut y = vec![0.0; flat_len(m)];
        pack(state, &mut y);
        let mut dy = vec![0.0; y.len()];
        self.rhs_flat(&y, &mut dy)?;
        let d = unpack(state.t, &dy, m);
        Ok(StateDerivative {
            sigma: d.sigma,
            mu_l: d.mu_l,
            mu_r: d.mu_r,
        })
    }

    fn rhs_flat(&self, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let m = self.channel.sites();
        let hop = self.channel.hopping();
        let off = 2 * m * m;
        let (mu_l, mu_r) = (y[off], y[off + 1]);
        let (n_l, n_r) = self.resonant_occupations(mu_l, mu_r)?;
        let r = rates(n_l, n_r, self.gamma_l, self.gamma_r, self.stats)?;
        let s = self.stats.sign();
        let w_first = r.gamma_minus_l - s * r.gamma_plus_l;
        let w_last = r.gamma_minus_r - s * r.gamma_plus_r;
        let w = |i: usize| -> f64 {
            if i == 0 {
                w_first
            } else if i == m - 1 {
                w_last
            } else {
                0.0
            }
        };

        let at = |j: usize, k: usize| -> (f64, f64) {
            let idx = 2 * (k * m + j);
            (y[idx], y[idx + 1])
        };
        for k in 0..m {
            for j in 0..m {
                // neighbour sum σ_{j−1,k} + σ_{j+1,k} − σ_{j,k−1} − σ_{j,k+1}
                let mut nb_re = 0.0;
                let mut nb_im = 0.0;
                if j > 0 {
                    let (a, b) = at(j - 1, k);
                    nb_re += a;
                    nb_im += b;
                }
                if j + 1 < m {
                    let (a, b) = at(j + 1, k);
                    nb_re += a;
                    nb_im += b;
                }
                if k > 0 {
                    let (a, b) = at(j, k - 1);
                    nb_re -= a;
                    nb_im -= b;
                }
                if k + 1 < m {
                    let (a, b) = at(j, k + 1);
                    nb_re -= a;
                    nb_im -= b;
                }
                // i[h, σ] = −iJ · nb  →  (re, im) = (J nb_im, −J nb_re)
                let (s_re, s_im) = at(j, k);
                let damp = -0.5 * (w(j) + w(k));
                let mut d_re = hop * nb_im + damp * s_re;
                let d_im = -hop * nb_re + damp * s_im;
                if j == k {
                    if j == 0 {
                        d_re += r.gamma_plus_l;
                    }
                    if j == m - 1 {
                        d_re += r.gamma_plus_r;
                    }
                }
                let idx = 2 * (k * m + j);
                dy[idx] = d_re;
                dy[idx + 1] = d_im;
            }
        }

        match self.reservoirs {
            ReservoirMode::Frozen => {
                dy[off] = 0.0;
                dy[off + 1] = 0.0;
            }
            ReservoirMode::Dynamic => {
                let n_first = y[0];
                let n_last = y[2 * ((m - 1) * m + (m - 1))];
                let flow_l = self.gamma_l * (n_first - n_l);
                let flow_r = self.gamma_r * (n_last - n_r);
                dy[off] = flow_l / self.slope(mu_l, "left")?;
                dy[off + 1] = flow_r / self.slope(mu_r, "right")?;
            }
        }
        Ok(())
    }

    pub(crate) fn slope(&self, mu: f64, side: &str) -> Result<f64> {
        let slope = population_slope(mu, &self.trap, self.stats)?;
        if !(slope >= MIN_SLOPE) {
            return Err(Error::Singular(format!(
                "{side} reservoir exhausted: dN/dmu = {slope:e} at mu = {mu}"
            )));
        }
        Ok(slope)
    }

    /// Reservoir particle flows `(dN_L/dt, dN_R/dt)`.
    pub fn reservoir_flows(&self, state: &SystemState) -> Result<(f64, f64)> {
        let (n_l, n_r) = self.resonant_occupations(state.mu_l, state.mu_r)?;
        let m = state.sites();
        Ok((
            self.gamma_l * (state.sigma[(0, 0)].re - n_l),
            self.gamma_r * (state.sigma[(m - 1, m - 1)].re - n_r),
        ))
    }

    pub fn observables(&self, state: &SystemState) -> Result<ObservableRecord> {
        let m = state.sites();
        let hop = self.channel.hopping();
        let n = (0..m).map(|i| state.sigma[(i, i)].re).collect();
        let j = (0..m - 1).map(|i| 2.0 * hop * state.sigma[(i, i + 1)].im).collect();
        let (flow_l, flow_r) = self.reservoir_flows(state)?;
        let mut coh_max = 0.0f64;
        for a in 0..m {
            for b in 0..m {
                if a.abs_diff(b) > 1 {
                    coh_max = coh_max.max(state.sigma[(a, b)].norm());
                }
            }
        }
        Ok(ObservableRecord {
            t: state.t,
            n,
            j,
            mu_l: state.mu_l,
            mu_r: state.mu_r,
            pop_l: population(state.mu_l, &self.trap, self.stats)?,
            pop_r: population(state.mu_r, &self.trap, self.stats)?,
            current: -0.5 * (flow_l - flow_r),
            coh_max,
        })
    }

    /// Total particle number `N_L + N_R + Σ n_i`.
    pub fn total_particles(&self, state: &SystemState) -> Result<f64> {
        Ok(population(state.mu_l, &self.trap, self.stats)?
            + population(state.mu_r, &self.trap, self.stats)?
            + state.lattice_population())
    }

    /// Integrates from `state0` to `t_end`, sampling per `sampling`.
    pub fn integrate(
        &self,
        state0: &SystemState,
        t_end: f64,
        control: &StepControl,
        sampling: Sampling,
    ) -> Result<Trajectory> {
        let m = self.channel.sites();
        if state0.sites() != m {
            return Err(Error::domain(format!(
                "initial sigma is {}x{}, channel has {m} sites",
                state0.sites(),
                state0.sites()
            )));
        }
        state0.check_invariants(self.stats, 1e-10)?;
        let mut y0 = vec![0.0; flat_len(m)];
        pack(state0, &mut y0);
        let outputs = sampling.times(state0.t, t_end);
        let every_step = matches!(sampling, Sampling::EveryStep);
        let mut states = Vec::with_capacity(outputs.len() + 2);
        let mut records = Vec::with_capacity(outputs.len() + 2);
        let stats = ode::integrate(self, state0.t, &y0, t_end, &outputs, every_step, control, |t, y| {
            let st = unpack(t, y, m);
            records.push(self.observables(&st)?);
            states.push(st);
            Ok(())
        })?;
        let traj = Trajectory { states, records, stats };
        traj.final_state().check_invariants(self.stats, 1e-8)?;
        Ok(traj)
    }
}

impl OdeSystem for TransportModel {
    fn dim(&self) -> usize {
        flat_len(self.channel.sites())
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        self.rhs_flat(y, dy)
    }

    fn project(&self, y: &mut [f64]) {
        let m = self.channel.sites();
        for k in 0..m {
            for j in 0..k {
                let a = 2 * (k * m + j);
                let b = 2 * (j * m + k);
                let re = 0.5 * (y[a] + y[b]);
                let im = 0.5 * (y[a + 1] - y[b + 1]);
                y[a] = re;
                y[a + 1] = im;
                y[b] = re;
                y[b + 1] = -im;
            }
            y[2 * (k * m + k) + 1] = 0.0;
        }
    }

    fn describe(&self, t: f64, y: &[f64]) -> String {
        let m = self.channel.sites();
        let off = 2 * m * m;
        let trace: f64 = (0..m).map(|i| y[2 * (i * m + i)]).sum();
        format!("t = {t}, mu_L = {}, mu_R = {}, tr sigma = {trace}", y[off], y[off + 1])
    }
}

fn flat_len(m: usize) -> usize {
    2 * m * m + 2
}

fn pack(state: &SystemState, y: &mut [f64]) {
    let m = state.sites();
    for (idx, z) in state.sigma.iter().enumerate() {
        y[2 * idx] = z.re;
        y[2 * idx + 1] = z.im;
    }
    y[2 * m * m] = state.mu_l;
    y[2 * m * m + 1] = state.mu_r;
}

fn unpack(t: f64, y: &[f64], m: usize) -> SystemState {
    let sigma = DMatrix::from_iterator(m, m, (0..m * m).map(|i| Complex64::new(y[2 * i], y[2 * i + 1])));
    SystemState {
        t,
        sigma,
        mu_l: y[2 * m * m],
        mu_r: y[2 * m * m + 1],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::hamiltonian;
    use crate::reservoir::solve_equilibrium;
    use QuantumStatistics::{Bose, Fermi};

    fn reference_model() -> TransportModel {
        TransportModel::new(
            ChannelSpec::new(7, 2.0, 1.0).unwrap(),
            TrapSpec::new(1.0, 0.2, 0.2, 0.05).unwrap(),
            0.5,
            0.5,
            Fermi,
        )
        .unwrap()
    }

    /// Dense reference: i[h,σ] − ½{W,σ} + Γ⁺ by plain matrix algebra.
    fn dense_sigma_rhs(model: &TransportModel, state: &SystemState) -> DMatrix<Complex64> {
        let m = state.sites();
        let h = hamiltonian(&model.channel).map(|x| Complex64::new(x, 0.0));
        let r = model.rate_set(state.mu_l, state.mu_r).unwrap();
        let s = model.stats.sign();
        let mut w = DMatrix::<Complex64>::zeros(m, m);
        let mut gp = DMatrix::<Complex64>::zeros(m, m);
        w[(0, 0)] += r.gamma_minus_l - s * r.gamma_plus_l;
        w[(m - 1, m - 1)] += r.gamma_minus_r - s * r.gamma_plus_r;
        gp[(0, 0)] += r.gamma_plus_l;
        gp[(m - 1, m - 1)] += r.gamma_plus_r;
        let i = Complex64::new(0.0, 1.0);
        let sig = &state.sigma;
        (h.clone() * sig - sig * h) * i - (w.clone() * sig + sig * w) * Complex64::new(0.5, 0.0) + gp
    }

    fn random_hermitian(m: usize, seed: u64) -> DMatrix<Complex64> {
        // small LCG; values only need to be generic
        let mut x = seed;
        let mut next = || {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((x >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let a = DMatrix::from_fn(m, m, |_, _| Complex64::new(next(), next()));
        // A A† / (norm) keeps eigenvalues in [0, 1)
        let p = &a * a.adjoint();
        let scale = p.norm() * 1.1;
        p / Complex64::new(scale, 0.0)
    }

    #[test]
    fn loop_rhs_matches_dense_algebra() {
        for stats in [Fermi, Bose] {
            let mut model = reference_model();
            model.stats = stats;
            model.gamma_r = 0.3;
            let state = SystemState {
                t: 0.0,
                sigma: random_hermitian(7, 42),
                mu_l: -0.2,
                mu_r: -0.7,
            };
            let d = model.rhs(&state).unwrap();
            let want = dense_sigma_rhs(&model, &state);
            let err = (&d.sigma - &want).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(err < 1e-14, "{stats}: {err}");
            // Hermitian in, Hermitian out
            let herm = (&d.sigma - d.sigma.adjoint())
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            assert!(herm < 1e-14);
        }
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let model = reference_model();
        let eq = solve_equilibrium(1500.0, &model.channel, &model.trap, Fermi).unwrap();
        let state = SystemState::uniform(7, eq.n_inf, eq.mu_inf, eq.mu_inf);
        let d = model.rhs(&state).unwrap();
        assert!(d.sigma.iter().all(|z| z.norm() < 1e-16));
        assert!(d.mu_l.abs() < 1e-18 && d.mu_r.abs() < 1e-18);
    }

    #[test]
    fn initial_derivative_of_empty_lattice() {
        let model = reference_model();
        let state = SystemState::empty(7, 1.401, 0.907);
        let d = model.rhs(&state).unwrap();
        // γ n_L(ε_S, 0) and γ n_R(ε_S, 0)
        assert!((d.sigma[(0, 0)].re - 0.17728625566).abs() < 1e-9);
        assert!((d.sigma[(6, 6)].re - 0.12552688994).abs() < 1e-9);
        for j in 0..7 {
            for k in 0..7 {
                if (j, k) != (0, 0) && (j, k) != (6, 6) {
                    assert_eq!(d.sigma[(j, k)], Complex64::new(0.0, 0.0));
                }
            }
        }
        // −γ n_L / (dN/dμ) with dN/dμ = 1024.458866 from quadrature
        assert!((d.mu_l - (-0.17728625566 / 1024.458866472517)).abs() < 1e-12);
        assert!((d.mu_l + 1.7e-4).abs() < 1e-5);
    }

    #[test]
    fn conservation_of_rhs() {
        // d/dt (N_L + N_R + Σ n_i) = 0 pointwise
        for stats in [Fermi, Bose] {
            let mut model = reference_model();
            model.stats = stats;
            let state = SystemState {
                t: 0.0,
                sigma: random_hermitian(7, 7),
                mu_l: -0.1,
                mu_r: -1.3,
            };
            let d = model.rhs(&state).unwrap();
            let sl = population_slope(state.mu_l, &model.trap, stats).unwrap();
            let sr = population_slope(state.mu_r, &model.trap, stats).unwrap();
            let total = sl * d.mu_l + sr * d.mu_r + d.sigma.diagonal().iter().map(|z| z.re).sum::<f64>();
            assert!(total.abs() < 1e-14, "{stats}: {total}");
        }
    }

    #[test]
    fn observables_definitions() {
        let model = reference_model();
        let mut state = SystemState::empty(7, 1.0, 1.0);
        state.sigma[(2, 3)] = Complex64::new(0.0, 0.125);
        state.sigma[(3, 2)] = Complex64::new(0.0, -0.125);
        let rec = model.observables(&state).unwrap();
        assert_eq!(rec.j[2], 2.0 * 0.125);
        assert_eq!(rec.coh_max, 0.0);
        state.sigma[(0, 4)] = Complex64::new(0.03, 0.04);
        state.sigma[(4, 0)] = Complex64::new(0.03, -0.04);
        assert!((model.observables(&state).unwrap().coh_max - 0.05).abs() < 1e-15);
    }

    #[test]
    fn equilibrium_observables_vanish() {
        let model = reference_model();
        let eq = solve_equilibrium(2000.0, &model.channel, &model.trap, Fermi).unwrap();
        let rec = model
            .observables(&SystemState::uniform(7, eq.n_inf, eq.mu_inf, eq.mu_inf))
            .unwrap();
        assert!(rec.j.iter().all(|&j| j == 0.0));
        assert!(rec.current.abs() < 1e-16);
    }

    #[test]
    fn reservoir_exhaustion_is_a_singularity() {
        let model = reference_model();
        let state = SystemState::empty(7, -800.0, -800.0);
        assert!(matches!(model.rhs(&state), Err(Error::Singular(_))));
    }

    #[test]
    fn bose_rhs_rejects_mu_at_band_bottom() {
        let mut model = reference_model();
        model.stats = Bose;
        let state = SystemState::empty(7, model.trap.e0(), -1.0);
        assert!(matches!(model.rhs(&state), Err(Error::Domain(_))));
    }

    #[test]
    fn sampling_grids() {
        let u = Sampling::Uniform { points: 4 }.times(1.0, 3.0);
        assert_eq!(u, vec![1.5, 2.0, 2.5, 3.0]);
        let l = Sampling::Log { points: 3, t_min: 0.01 }.times(0.0, 1.0);
        assert!((l[1] - 0.1).abs() < 1e-15 && l[2] == 1.0);
        let h = Sampling::standard(2.0).times(0.0, 100.0);
        assert_eq!(h.len(), Sampling::DEFAULT_LOG_POINTS + Sampling::DEFAULT_UNIFORM_POINTS);
        assert!(h.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(*h.last().unwrap(), 100.0);
    }

    #[test]
    fn closed_channel_evolves_unitarily() {
        let mut model = reference_model();
        model.gamma_l = 0.0;
        model.gamma_r = 0.0;
        let mut state = SystemState::empty(7, 1.0, 0.5);
        state.sigma[(0, 0)] = Complex64::new(0.8, 0.0);
        state.sigma[(1, 1)] = Complex64::new(0.7, 0.0);
        state.sigma[(0, 1)] = Complex64::new(0.1, 0.15);
        state.sigma[(1, 0)] = Complex64::new(0.1, -0.15);
        let (lo0, hi0) = sigma_spectrum_bounds(&state.sigma);
        let traj = model
            .integrate(
                &state,
                40.0,
                &StepControl::new(1e-10, 1e-12),
                Sampling::Uniform { points: 20 },
            )
            .unwrap();
        for st in &traj.states {
            assert!((st.lattice_population() - 1.5).abs() < 1e-9);
            let (lo, hi) = sigma_spectrum_bounds(&st.sigma);
            assert!((lo - lo0).abs() < 1e-8 && (hi - hi0).abs() < 1e-8);
            assert_eq!((st.mu_l, st.mu_r), (1.0, 0.5));
        }
    }
}
