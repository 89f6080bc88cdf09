//! End-to-end run: configuration in, trajectory and summary out.

use crate::analysis::{
    asymptotic_window, conductance, consistency_report, fit_exponential, tau_eq_estimate, ReportInputs, Summary,
};
use crate::config::{Config, EndTime, InitialReservoirs, LatticeInit, SamplingSpec};
use crate::dynamics::{Sampling, SystemState, Trajectory, TransportModel};
use crate::error::{Error, Result};
use crate::lattice::{relaxation_time_asymmetric, ChannelSpec};
use crate::ode::StepControl;
use crate::reservoir::{mu_from_population, occupation, population, solve_equilibrium, Equilibrium, TrapSpec};

/// Everything derived from a configuration before integrating.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub model: TransportModel,
    pub state0: SystemState,
    pub tau_rel: f64,
    /// Closed-form equilibration time; `None` without bias or with unequal
    /// couplings.
    pub tau_eq_formula: Option<f64>,
    pub equilibrium: Equilibrium,
    pub total_particles: f64,
    pub t_end: f64,
    pub sampling: Sampling,
    pub control: StepControl,
}

/// Builds the model, the initial state and the derived time scales.
pub fn prepare(config: &Config) -> Result<Prepared> {
    let channel = ChannelSpec::new(config.sites, config.eps_s, config.hopping)?;
    let trap: TrapSpec = config.trap()?;
    let stats = config.stats;
    let model = TransportModel::new(channel, trap, config.gamma_l, config.gamma_r, stats)?;

    let (mu_l, mu_r) = match config.reservoirs {
        InitialReservoirs::ChemicalPotentials { mu_l, mu_r } => (mu_l, mu_r),
        InitialReservoirs::Populations { n_l, n_r } => (
            mu_from_population(n_l, &trap, stats)?,
            mu_from_population(n_r, &trap, stats)?,
        ),
    };
    let state0 = match config.lattice {
        LatticeInit::Empty => SystemState::empty(config.sites, mu_l, mu_r),
        LatticeInit::Uniform(n0) => SystemState::uniform(config.sites, n0, mu_l, mu_r),
    };

    let tau_rel = relaxation_time_asymmetric(&channel, config.gamma_l, config.gamma_r)?;
    let (pop_l, pop_r) = (population(mu_l, &trap, stats)?, population(mu_r, &trap, stats)?);
    let total_particles = pop_l + pop_r + state0.lattice_population();
    let equilibrium = solve_equilibrium(total_particles, &channel, &trap, stats)?;

    let dn0 = occupation(config.eps_s, mu_l, config.beta, stats)? - occupation(config.eps_s, mu_r, config.beta, stats)?;
    let tau_eq_formula = if config.gamma_l == config.gamma_r && dn0 != 0.0 {
        Some(tau_eq_estimate(pop_l - pop_r, dn0, config.gamma_l, config.hopping)?)
    } else {
        None
    };

    let t_end = match config.t_end {
        EndTime::At(t) => t,
        EndTime::Auto => match tau_eq_formula {
            Some(tau) => 5.0 * tau,
            None => {
                return Err(Error::Config(
                    "t_end = auto needs gamma_L = gamma_R and a non-zero initial bias; set t_end".into(),
                ))
            }
        },
    };
    let sampling = match config.sampling {
        SamplingSpec::Auto => Sampling::standard(tau_rel),
        SamplingSpec::Uniform(points) => Sampling::Uniform { points },
        SamplingSpec::Log(points) => Sampling::Log {
            points,
            t_min: Sampling::DEFAULT_T_MIN.min(0.5 * t_end),
        },
        SamplingSpec::Steps => Sampling::EveryStep,
    };

    Ok(Prepared {
        model,
        state0,
        tau_rel,
        tau_eq_formula,
        equilibrium,
        total_particles,
        t_end,
        sampling,
        control: StepControl::new(config.reltol, config.abstol),
    })
}

/// Extra end-of-run diagnostics reported next to the [`Summary`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunDiagnostics {
    /// Largest `|N_total(t) − N_total(0)| / N_total(0)` over the samples.
    pub conservation_drift: f64,
    /// `max_i |n_i(t_end) − n∞|`
    pub endpoint_dev: f64,
    pub t_end: f64,
}

/// Integrates a prepared scenario and evaluates the summary.
pub fn run_prepared(p: &Prepared) -> Result<(Trajectory, Summary, RunDiagnostics)> {
    let traj = p.model.integrate(&p.state0, p.t_end, &p.control, p.sampling)?;
    let summary = summarize(p, &traj)?;
    let first = traj.records.first().expect("initial record").total_particles();
    let conservation_drift = traj
        .records
        .iter()
        .map(|r| (r.total_particles() - first).abs() / first)
        .fold(0.0, f64::max);
    let last = traj.records.last().expect("final record");
    let endpoint_dev = last
        .n
        .iter()
        .map(|n| (n - p.equilibrium.n_inf).abs())
        .fold(0.0, f64::max);
    let diag = RunDiagnostics {
        conservation_drift,
        endpoint_dev,
        t_end: traj.t_end(),
    };
    Ok((traj, summary, diag))
}

/// Runs the scenario described by `config`.
pub fn run_scenario(config: &Config) -> Result<(Trajectory, Summary)> {
    let p = prepare(config)?;
    let (traj, summary, _) = run_prepared(&p)?;
    Ok((traj, summary))
}

fn summarize(p: &Prepared, traj: &Trajectory) -> Result<Summary> {
    let m = &p.model;
    let eq = p.equilibrium;
    let beta = m.trap.beta();
    let equal = m.gamma_l == m.gamma_r;
    let (g_formula, g_fermi_bound) = if equal {
        let g = conductance(eq.n_inf, beta, m.gamma_l, m.channel.hopping(), m.stats)?;
        (Some(g.g), Some(g.fermi_bound))
    } else {
        (None, None)
    };

    // decay time of Δn on the asymptotic window
    let tau_eq_fitted = p.tau_eq_formula.and_then(|tau| {
        let w = asymptotic_window(tau, traj.t_end()).ok()?;
        let t: Vec<f64> = traj.records.iter().map(|r| r.t).collect();
        let dn: Vec<f64> = traj
            .records
            .iter()
            .map(|r| {
                let occ = |mu| occupation(m.channel.eps_s(), mu, beta, m.stats).unwrap_or(f64::NAN);
                occ(r.mu_l) - occ(r.mu_r)
            })
            .collect();
        let fit = fit_exponential(&t, &dn, 0.0, w).ok()?;
        (fit.rate > 0.0).then(|| 1.0 / fit.rate)
    });

    let inputs = ReportInputs {
        stats: m.stats,
        eps_s: m.channel.eps_s(),
        beta,
        hopping: m.channel.hopping(),
        gamma_l: m.gamma_l,
        gamma_r: m.gamma_r,
        tau_rel: p.tau_rel,
        tau_eq: p.tau_eq_formula,
        n_inf: eq.n_inf,
    };
    let report = match consistency_report(traj, &inputs) {
        Ok(r) => Some(r),
        Err(Error::Window(_)) => None,
        Err(e) => return Err(e),
    };

    Ok(Summary {
        tau_rel: p.tau_rel,
        tau_eq_formula: p.tau_eq_formula,
        tau_eq_fitted,
        mu_inf: eq.mu_inf,
        n_inf: eq.n_inf,
        pop_inf: eq.pop_inf,
        g_formula,
        g_measured: report.as_ref().and_then(|r| r.g_measured),
        g_fermi_bound,
        report,
    })
}
