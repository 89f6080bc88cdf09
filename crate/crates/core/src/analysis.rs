//! Closed-form transport predictions, curve fits and the trajectory
//! consistency report.

use crate::dynamics::{ObservableRecord, Trajectory};
use crate::error::{Error, Result};
use crate::reservoir::{occupation, occupation_variance, QuantumStatistics};

/// Minimum number of samples a fit window must contain.
pub const MIN_FIT_SAMPLES: usize = 10;

/// Currents and biases below this are treated as exactly zero by the report.
pub const ZERO_LEVEL: f64 = 1e-12;

fn check_coupling(gamma: f64, hopping: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::domain(format!("gamma must be positive, got {gamma}")));
    }
    if !(hopping > 0.0 && hopping.is_finite()) {
        return Err(Error::domain(format!("hopping J must be positive, got {hopping}")));
    }
    Ok(())
}

/// Transmission factor `2γJ²/(4J² + γ²)`.
fn transmission(gamma: f64, hopping: f64) -> f64 {
    let j2 = hopping * hopping;
    2.0 * gamma * j2 / (4.0 * j2 + gamma * gamma)
}

/// Homogeneous bond current `2γJ²/(4J² + γ²) Δn` of the metastable state.
pub fn metastable_current(dn: f64, gamma: f64, hopping: f64) -> Result<f64> {
    check_coupling(gamma, hopping)?;
    Ok(transmission(gamma, hopping) * dn)
}

/// Edge offset `γ² Δn / (2(4J² + γ²))` of the metastable population ladder.
pub fn boundary_offset(dn: f64, gamma: f64, hopping: f64) -> Result<f64> {
    check_coupling(gamma, hopping)?;
    Ok(gamma * gamma * dn / (2.0 * (4.0 * hopping * hopping + gamma * gamma)))
}

/// Predicted metastable current and site populations.
#[derive(Debug, Clone, PartialEq)]
pub struct MetastablePrediction {
    pub j_pred: f64,
    pub n_profile: Vec<f64>,
    /// `n_L − n_R`
    pub dn: f64,
    /// `(n_L + n_R) / 2`
    pub nbar: f64,
}

/// Flat interior at `n̄`, first site raised and last site lowered by
/// [`boundary_offset`].
pub fn metastable_profile(n_l: f64, n_r: f64, gamma: f64, hopping: f64, sites: usize) -> Result<MetastablePrediction> {
    if sites < 2 {
        return Err(Error::domain(format!("profile needs at least 2 sites, got {sites}")));
    }
    for (side, n) in [("left", n_l), ("right", n_r)] {
        if !(n >= 0.0 && n.is_finite()) {
            return Err(Error::domain(format!("{side} occupation must be >= 0, got {n}")));
        }
    }
    let dn = n_l - n_r;
    let nbar = 0.5 * (n_l + n_r);
    let off = boundary_offset(dn, gamma, hopping)?;
    let mut n_profile = vec![nbar; sites];
    n_profile[0] += off;
    n_profile[sites - 1] -= off;
    Ok(MetastablePrediction {
        j_pred: metastable_current(dn, gamma, hopping)?,
        n_profile,
        dn,
        nbar,
    })
}

/// Equilibration time `(ΔN₀/Δn₀)(4J² + γ²)/(4γJ²)`, valid when the reservoirs
/// hold far more particles than the channel.
pub fn tau_eq_estimate(dpop0: f64, dn0: f64, gamma: f64, hopping: f64) -> Result<f64> {
    check_coupling(gamma, hopping)?;
    if dn0 == 0.0 || !dn0.is_finite() {
        return Err(Error::domain(format!("occupation bias must be non-zero, got {dn0}")));
    }
    let j2 = hopping * hopping;
    Ok(dpop0 / dn0 * (4.0 * j2 + gamma * gamma) / (4.0 * gamma * j2))
}

/// Linear-response conductance and the fermionic ceiling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conductance {
    pub g: f64,
    /// `βγJ²/(2(4J² + γ²))`, reached by fermions at half filling.
    pub fermi_bound: f64,
}

/// `G = β n(1 + s n) · 2γJ²/(4J² + γ²)` at the final occupation `n_inf`.
pub fn conductance(n_inf: f64, beta: f64, gamma: f64, hopping: f64, stats: QuantumStatistics) -> Result<Conductance> {
    check_coupling(gamma, hopping)?;
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::domain(format!("beta must be positive, got {beta}")));
    }
    let var = occupation_variance(n_inf, stats)?;
    let t = transmission(gamma, hopping);
    Ok(Conductance {
        g: beta * var * t,
        fermi_bound: beta * 0.25 * t,
    })
}

/// Result of a log-linear decay fit `|x − target| ≈ A e^{−rate t}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub rate: f64,
    pub amplitude: f64,
    pub window: (f64, f64),
    /// RMS residual of the log-space fit.
    pub rms_residual: f64,
    pub samples: usize,
}

fn window_samples(t: &[f64], x: &[f64], window: (f64, f64)) -> Result<Vec<(f64, f64)>> {
    if t.len() != x.len() {
        return Err(Error::Fit(format!("series lengths differ: {} vs {}", t.len(), x.len())));
    }
    let (lo, hi) = window;
    if !(hi > lo) {
        return Err(Error::Fit(format!("empty window [{lo}, {hi}]")));
    }
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(x)
        .filter(|(&ti, _)| ti >= lo && ti <= hi)
        .map(|(&ti, &xi)| (ti, xi))
        .collect();
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(Error::Fit(format!(
            "window [{lo}, {hi}] holds {} samples, need {MIN_FIT_SAMPLES}",
            pts.len()
        )));
    }
    Ok(pts)
}

/// Ordinary least squares line; returns `(slope, intercept, rms_residual)`.
fn least_squares(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    (slope, intercept, (rss / n).sqrt())
}

/// Fits the decay rate of `x(t)` towards `target` on `window`.
///
/// A sign change of `x − target` inside the window means the window sits in
/// the wrong regime and is reported as a fit error.
pub fn fit_exponential(t: &[f64], x: &[f64], target: f64, window: (f64, f64)) -> Result<FitResult> {
    let pts = window_samples(t, x, window)?;
    let scale = target.abs().max(pts.iter().map(|p| p.1.abs()).fold(0.0, f64::max));
    let floor = 10.0 * f64::EPSILON * scale;
    let sign = (pts[0].1 - target).signum();
    let mut logs = Vec::with_capacity(pts.len());
    for &(ti, xi) in &pts {
        let d = xi - target;
        if d.signum() != sign {
            return Err(Error::Fit(format!("x - target changes sign at t = {ti}")));
        }
        if d.abs() <= floor {
            return Err(Error::Fit(format!(
                "x - target = {d:e} at t = {ti} is below the noise floor"
            )));
        }
        logs.push((ti, d.abs().ln()));
    }
    let (slope, intercept, rms) = least_squares(&logs);
    if !slope.is_finite() {
        return Err(Error::Fit("degenerate time samples".into()));
    }
    Ok(FitResult {
        rate: -slope,
        amplitude: sign * intercept.exp(),
        window,
        rms_residual: rms,
        samples: pts.len(),
    })
}

/// Leading power of `|σ_jk(t)|` for small `t` on an initially empty chain,
/// `M − |j + k − (M + 1)|` with 1-based site indices.
pub fn short_time_exponent(sites: usize, j: usize, k: usize) -> Result<u32> {
    for idx in [j, k] {
        if idx < 1 || idx > sites {
            return Err(Error::domain(format!("site index {idx} outside 1..={sites}")));
        }
    }
    let m = sites as i64;
    Ok((m - (j as i64 + k as i64 - (m + 1)).abs()) as u32)
}

/// Least-squares slope of `ln x` against `ln t` on `window`.
pub fn fit_power_law(t: &[f64], x: &[f64], window: (f64, f64)) -> Result<f64> {
    let pts = window_samples(t, x, window)?;
    let mut logs = Vec::with_capacity(pts.len());
    for &(ti, xi) in &pts {
        if !(xi > 0.0) || !(ti > 0.0) {
            return Err(Error::Fit(format!("non-positive sample x({ti}) = {xi}")));
        }
        logs.push((ti.ln(), xi.ln()));
    }
    let (slope, _, _) = least_squares(&logs);
    if !slope.is_finite() {
        return Err(Error::Fit("degenerate time samples".into()));
    }
    Ok(slope)
}

/// Median of a non-empty slice (mean of the middle pair for even length).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// `[5 τ_rel, min(τ_eq / 2, t_end / 2)]`
pub fn metastable_window(tau_rel: f64, tau_eq: f64, t_end: f64) -> Result<(f64, f64)> {
    let lo = 5.0 * tau_rel;
    let hi = (0.5 * tau_eq.abs()).min(0.5 * t_end);
    if !(hi > lo) {
        return Err(Error::Window(format!(
            "metastable window [{lo}, {hi}] is empty (t_end = {t_end}, tau_rel = {tau_rel}, tau_eq = {tau_eq})"
        )));
    }
    Ok((lo, hi))
}

/// `[τ_eq, 4 τ_eq]`, clipped to the run.
pub fn asymptotic_window(tau_eq: f64, t_end: f64) -> Result<(f64, f64)> {
    let lo = tau_eq.abs();
    let hi = (4.0 * tau_eq.abs()).min(t_end);
    if !(hi > lo) {
        return Err(Error::Window(format!(
            "asymptotic window [{lo}, {hi}] is empty (t_end = {t_end}, tau_eq = {tau_eq})"
        )));
    }
    Ok((lo, hi))
}

/// Model parameters the report compares the trajectory against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportInputs {
    pub stats: QuantumStatistics,
    pub eps_s: f64,
    pub beta: f64,
    pub hopping: f64,
    pub gamma_l: f64,
    pub gamma_r: f64,
    pub tau_rel: f64,
    /// Equilibration time entering the ohmic relation; `None` for an unbiased
    /// start.
    pub tau_eq: Option<f64>,
    pub n_inf: f64,
}

/// One pass/fail line of a [`ConsistencyReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    /// Worst relative deviation seen; `None` when the check does not apply.
    pub measured: Option<f64>,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: &'static str, measured: f64, threshold: f64) -> Self {
        Check {
            name,
            measured: Some(measured),
            threshold,
            passed: measured < threshold,
        }
    }

    fn skipped(name: &'static str, threshold: f64) -> Self {
        Check {
            name,
            measured: None,
            threshold,
            passed: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    pub metastable_window: (f64, f64),
    pub asymptotic_window: Option<(f64, f64)>,
    pub checks: Vec<Check>,
    /// Median of `I/Δμ` on the metastable window.
    pub g_measured: Option<f64>,
}

impl ConsistencyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub const CHECK_HOMOGENEITY: &str = "homogeneity";
pub const CHECK_INTERNAL_MACROSCOPIC: &str = "internal_macroscopic";
pub const CHECK_OHMIC: &str = "ohmic";
pub const CHECK_CONDUCTANCE: &str = "conductance";

/// `|a − b| / |b|`, with `0/0` read as agreement.
fn rel_dev(a: f64, b: f64) -> f64 {
    scaled(a - b, b)
}

/// `|a| / |b|`, with `0/0` read as zero.
fn scaled(a: f64, b: f64) -> f64 {
    if b.abs() < ZERO_LEVEL {
        if a.abs() < ZERO_LEVEL {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        a.abs() / b.abs()
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn in_window(records: &[ObservableRecord], w: (f64, f64)) -> Vec<&ObservableRecord> {
    records.iter().filter(|r| r.t >= w.0 && r.t <= w.1).collect()
}

/// Checks a trajectory against the metastable and ohmic relations.
///
/// On the metastable window: homogeneity of the bond currents (1%), agreement
/// of the macroscopic current with the mean bond current (1%), and the median
/// `I/Δμ` against the linear-response conductance (2%). On the asymptotic
/// window: `2 τ_eq I / ΔN = 1` (2%). The conductance formula assumes equal
/// couplings and is skipped otherwise. An unbiased trajectory passes with
/// every relative deviation read as `0/0 = 0`.
pub fn consistency_report(traj: &Trajectory, inp: &ReportInputs) -> Result<ConsistencyReport> {
    let records = &traj.records;
    let t_end = traj.t_end();
    if t_end < 10.0 * inp.tau_rel {
        return Err(Error::Window(format!(
            "run ends at t = {t_end}, before 10 tau_rel = {}",
            10.0 * inp.tau_rel
        )));
    }
    let equal = inp.gamma_l == inp.gamma_r;
    let mut checks = Vec::new();

    let meta_w = match inp.tau_eq {
        Some(tau) => metastable_window(inp.tau_rel, tau, t_end)?,
        None => (5.0 * inp.tau_rel, t_end),
    };
    let meta = in_window(records, meta_w);
    if meta.is_empty() {
        return Err(Error::Window(format!("no samples in metastable window {meta_w:?}")));
    }

    let mut homog = 0.0f64;
    let mut macro_dev = 0.0f64;
    let mut ratios = Vec::new();
    for r in &meta {
        let jbar = mean(&r.j);
        for &ji in &r.j {
            homog = homog.max(rel_dev(ji, jbar));
        }
        macro_dev = macro_dev.max(rel_dev(r.current, jbar));
        let dmu = r.mu_l - r.mu_r;
        if dmu.abs() >= ZERO_LEVEL {
            ratios.push(r.current / dmu);
        }
    }
    checks.push(Check::new(CHECK_HOMOGENEITY, homog, 0.01));
    checks.push(Check::new(CHECK_INTERNAL_MACROSCOPIC, macro_dev, 0.01));

    let g_measured = median(&ratios);
    match (equal, g_measured) {
        (true, Some(g)) => {
            let formula = conductance(inp.n_inf, inp.beta, inp.gamma_l, inp.hopping, inp.stats)?;
            checks.push(Check::new(CHECK_CONDUCTANCE, rel_dev(g, formula.g), 0.02));
        }
        _ => checks.push(Check::skipped(CHECK_CONDUCTANCE, 0.02)),
    }

    let asym_w = match inp.tau_eq {
        Some(tau) => {
            let w = asymptotic_window(tau, t_end)?;
            let asym = in_window(records, w);
            if asym.is_empty() {
                return Err(Error::Window(format!("no samples in asymptotic window {w:?}")));
            }
            let mut dev = 0.0f64;
            for r in asym {
                dev = dev.max(rel_dev(2.0 * tau * r.current, r.pop_l - r.pop_r));
            }
            checks.push(Check::new(CHECK_OHMIC, dev, 0.02));
            Some(w)
        }
        None => {
            checks.push(Check::skipped(CHECK_OHMIC, 0.02));
            None
        }
    };

    Ok(ConsistencyReport {
        metastable_window: meta_w,
        asymptotic_window: asym_w,
        checks,
        g_measured,
    })
}

/// Worst relative deviations from the closed-form metastable state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetastableAgreement {
    /// Mean bond current against [`metastable_current`].
    pub current: f64,
    /// Edge offsets `n_1 − n̄` and `n̄ − n_M` against [`boundary_offset`].
    pub ladder: f64,
    /// Interior populations against `n̄`, relative to the offset.
    pub interior: f64,
    pub samples: usize,
}

/// Compares sampled records with [`metastable_profile`] evaluated at the
/// instantaneous reservoir occupations. Requires equal couplings.
pub fn metastable_agreement(
    records: &[ObservableRecord],
    inp: &ReportInputs,
    window: (f64, f64),
) -> Result<MetastableAgreement> {
    if inp.gamma_l != inp.gamma_r {
        return Err(Error::domain("closed-form metastable state needs gamma_L = gamma_R"));
    }
    let sel = in_window(records, window);
    if sel.is_empty() {
        return Err(Error::Window(format!("no samples in window {window:?}")));
    }
    let mut out = MetastableAgreement {
        current: 0.0,
        ladder: 0.0,
        interior: 0.0,
        samples: sel.len(),
    };
    for r in sel {
        let n_l = occupation(inp.eps_s, r.mu_l, inp.beta, inp.stats)?;
        let n_r = occupation(inp.eps_s, r.mu_r, inp.beta, inp.stats)?;
        let pred = metastable_profile(n_l, n_r, inp.gamma_l, inp.hopping, r.n.len())?;
        let m = r.n.len();
        let off = pred.n_profile[0] - pred.nbar;
        out.current = out.current.max(rel_dev(mean(&r.j), pred.j_pred));
        out.ladder = out
            .ladder
            .max(rel_dev(r.n[0] - pred.nbar, off))
            .max(rel_dev(pred.nbar - r.n[m - 1], off));
        for &ni in &r.n[1..m - 1] {
            out.interior = out.interior.max(scaled(ni - pred.nbar, off));
        }
    }
    Ok(out)
}

/// Scenario-level results.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub tau_rel: f64,
    pub tau_eq_formula: Option<f64>,
    pub tau_eq_fitted: Option<f64>,
    pub mu_inf: f64,
    pub n_inf: f64,
    pub pop_inf: f64,
    /// Linear-response conductance; `None` with unequal couplings.
    pub g_formula: Option<f64>,
    pub g_measured: Option<f64>,
    pub g_fermi_bound: Option<f64>,
    /// `None` when the run was too short to evaluate the report.
    pub report: Option<ConsistencyReport>,
}

impl Summary {
    pub fn checks_passed(&self) -> bool {
        self.report.as_ref().is_some_and(ConsistencyReport::all_passed)
    }
}
