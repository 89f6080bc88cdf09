//! Command layer of the `qtransport` binary.
//!
//! Every command takes a validated [`Config`] and reports through an exit
//! status: 0 success, 2 configuration error, 3 numeric error, 4 failed check.
//! Failures also emit one `error kind=... message="..."` line on stderr.

pub mod output;

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use qtransport_core::analysis::Summary;
use qtransport_core::config::{InitialReservoirs, LatticeInit};
use qtransport_core::fock::{bose_cutoff, certify_closure, cutoff_sensitivity, ClosureReport, LadderAlgebra};
use qtransport_core::lattice::{effective_spectrum, relaxation_time_asymmetric};
use qtransport_core::reservoir::{mu_from_population, occupation, population};
use qtransport_core::scenario::{prepare, run_prepared};
use qtransport_core::{
    parse_config, solve_equilibrium, ChannelSpec, Config, ErrorKind, QuantumStatistics, StepControl, TransportModel,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_CHECK: i32 = 4;

/// Oracle agreement required by `validate`.
pub const FERMI_CLOSURE_TOL: f64 = 1e-6;
pub const BOSE_CLOSURE_TOL: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub kind: &'static str,
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: String) -> Self {
        CliError {
            kind: "config",
            code: EXIT_CONFIG,
            message,
        }
    }

    pub fn check(message: String) -> Self {
        CliError {
            kind: "check",
            code: EXIT_CHECK,
            message,
        }
    }

    pub fn io(path: &Path, e: impl fmt::Display) -> Self {
        CliError {
            kind: "io",
            code: EXIT_CONFIG,
            message: format!("{}: {e}", path.display()),
        }
    }

    /// The single machine-readable stderr line.
    pub fn line(&self) -> String {
        format!("error kind={} code={} message={:?}", self.kind, self.code, self.message)
    }
}

impl From<qtransport_core::Error> for CliError {
    fn from(e: qtransport_core::Error) -> Self {
        let (kind, code) = match e.kind() {
            ErrorKind::Config => ("config", EXIT_CONFIG),
            ErrorKind::Numeric => ("numeric", EXIT_NUMERIC),
            ErrorKind::Check => ("check", EXIT_CHECK),
        };
        CliError {
            kind,
            code,
            message: e.to_string(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunOptions {
    pub log_x: bool,
    /// Columns drawn in the SVG; empty means all site populations.
    pub plot_columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub key: String,
    pub values: Vec<f64>,
    /// For `mu_L0` or `N_L0`: also set the right partner to `value − offset`.
    pub pair_offset: Option<f64>,
    /// Row file; stdout when `None`.
    pub out: Option<PathBuf>,
}

impl SweepSpec {
    /// Evenly spaced grid including both ends.
    pub fn linspace(from: f64, to: f64, points: usize) -> Vec<f64> {
        match points {
            0 => Vec::new(),
            1 => vec![from],
            _ => (0..points)
                .map(|i| from + (to - from) * i as f64 / (points - 1) as f64)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidateSpec {
    pub t_end: f64,
    pub samples: usize,
    /// Boson cutoff; derived from the initial occupations when `None`.
    pub n_max: Option<usize>,
}

impl Default for ValidateSpec {
    fn default() -> Self {
        ValidateSpec {
            t_end: 50.0,
            samples: 100,
            n_max: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Run(RunOptions),
    Relax,
    Equilibrium,
    Sweep(SweepSpec),
    Validate(ValidateSpec),
}

/// Runs `cmd` and returns the exit status. Normal output goes to `out`,
/// the error line to `err`.
pub fn execute(cmd: &Command, config: &Config, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let res = match cmd {
        Command::Run(opts) => run(config, opts, out),
        Command::Relax => relax(config, out),
        Command::Equilibrium => equilibrium(config, out),
        Command::Sweep(spec) => sweep(config, spec, out),
        Command::Validate(spec) => validate(config, spec, out),
    };
    match res {
        Ok(()) => EXIT_OK,
        Err(e) => report_error(&e, err),
    }
}

/// Writes the error line and returns its exit code.
pub fn report_error(e: &CliError, err: &mut dyn Write) -> i32 {
    let _ = writeln!(err, "{}", e.line());
    e.code
}

/// Reads and parses a configuration file, then applies `key=value` overrides.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<Config, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let config = parse_config(&text)?;
    let mut pairs = Vec::with_capacity(overrides.len());
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("override must be key=value: {o}")))?;
        pairs.push((k.trim(), v.trim()));
    }
    if pairs.is_empty() {
        Ok(config)
    } else {
        Ok(config.with_values(&pairs)?)
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::io(Path::new("<stdout>"), e))
}

fn failed_checks(s: &Summary) -> String {
    match &s.report {
        None => "run too short for the consistency report".to_string(),
        Some(r) => {
            let names: Vec<&str> = r.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
            format!("failed checks: {}", names.join(","))
        }
    }
}

pub fn run(config: &Config, opts: &RunOptions, out: &mut dyn Write) -> Result<(), CliError> {
    let p = prepare(config)?;
    let (traj, summary, diag) = run_prepared(&p)?;

    if let Some(path) = &config.out_csv {
        output::write_csv(Path::new(path), &traj.records)?;
    }
    let text = output::render_summary(&summary, Some(&diag));
    match &config.out_summary {
        Some(path) => output::write_text(Path::new(path), &text)?,
        None => emit(out, &text)?,
    }
    if let Some(path) = &config.out_svg {
        let header = output::csv_header(config.sites);
        let rows: Vec<Vec<f64>> = traj.records.iter().map(output::csv_row).collect();
        let columns = if opts.plot_columns.is_empty() {
            header[1..=config.sites].to_vec()
        } else {
            opts.plot_columns.clone()
        };
        output::write_svg(Path::new(path), &header, &rows, &columns, opts.log_x)?;
    }

    if summary.checks_passed() {
        Ok(())
    } else {
        Err(CliError::check(failed_checks(&summary)))
    }
}

pub fn relax(config: &Config, out: &mut dyn Write) -> Result<(), CliError> {
    let ch = ChannelSpec::new(config.sites, config.eps_s, config.hopping)?;
    let tau = relaxation_time_asymmetric(&ch, config.gamma_l, config.gamma_r)?;
    let mut text = format!("tau_rel={}\n", output::fmt_f64(tau));
    for (k, z) in effective_spectrum(&ch, config.gamma_l, config.gamma_r)?
        .iter()
        .enumerate()
    {
        text += &format!("lambda_{}={},{}\n", k + 1, output::fmt_f64(z.re), output::fmt_f64(z.im));
    }
    emit(out, &text)
}

fn initial_mus(config: &Config) -> Result<(f64, f64), CliError> {
    let trap = config.trap()?;
    Ok(match config.reservoirs {
        InitialReservoirs::ChemicalPotentials { mu_l, mu_r } => (mu_l, mu_r),
        InitialReservoirs::Populations { n_l, n_r } => (
            mu_from_population(n_l, &trap, config.stats)?,
            mu_from_population(n_r, &trap, config.stats)?,
        ),
    })
}

pub fn equilibrium(config: &Config, out: &mut dyn Write) -> Result<(), CliError> {
    let ch = ChannelSpec::new(config.sites, config.eps_s, config.hopping)?;
    let trap = config.trap()?;
    let (mu_l, mu_r) = initial_mus(config)?;
    let lattice = match config.lattice {
        LatticeInit::Empty => 0.0,
        LatticeInit::Uniform(n0) => n0 * config.sites as f64,
    };
    let total = population(mu_l, &trap, config.stats)? + population(mu_r, &trap, config.stats)? + lattice;
    let eq = solve_equilibrium(total, &ch, &trap, config.stats)?;
    emit(
        out,
        &format!(
            "mu_inf={}\nn_inf={}\nN_inf={}\nN_total={}\n",
            output::fmt_f64(eq.mu_inf),
            output::fmt_f64(eq.n_inf),
            output::fmt_f64(eq.pop_inf),
            output::fmt_f64(total)
        ),
    )
}

/// One grid point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub summary: Summary,
}

pub const SWEEP_COLUMNS: [&str; 10] = [
    "mu_inf",
    "n_inf",
    "N_inf",
    "tau_rel",
    "tau_eq_formula",
    "tau_eq_fitted",
    "G_formula",
    "G_measured",
    "G_fermi_bound",
    "checks_passed",
];

fn point_config(config: &Config, spec: &SweepSpec, v: f64) -> Result<Config, CliError> {
    let value = output::fmt_f64(v);
    match spec.pair_offset {
        None => Ok(config.with_value(&spec.key, &value)?),
        Some(off) => {
            let partner = match spec.key.as_str() {
                "mu_L0" => "mu_R0",
                "N_L0" => "N_R0",
                k => {
                    return Err(CliError::config(format!(
                        "pair offset needs key mu_L0 or N_L0, got {k}"
                    )))
                }
            };
            Ok(config.with_values(&[(&spec.key, &value), (partner, &output::fmt_f64(v - off))])?)
        }
    }
}

/// Runs every grid point; rows come back in grid order.
pub fn sweep_rows(config: &Config, spec: &SweepSpec) -> Result<Vec<SweepRow>, CliError> {
    if spec.values.is_empty() {
        return Err(CliError::config("sweep grid is empty".to_string()));
    }
    let configs = spec
        .values
        .iter()
        .map(|&v| point_config(config, spec, v))
        .collect::<Result<Vec<_>, _>>()?;
    spec.values
        .par_iter()
        .zip(configs.par_iter())
        .map(|(&value, c)| {
            let p = prepare(c)?;
            let (_, summary, _) = run_prepared(&p)?;
            Ok(SweepRow { value, summary })
        })
        .collect()
}

fn sweep_table(key: &str, rows: &[SweepRow]) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec![key.to_string()];
    header.extend(SWEEP_COLUMNS.map(String::from));
    let opt = |x: Option<f64>| x.map_or_else(|| "none".to_string(), output::fmt_f64);
    let body = rows
        .iter()
        .map(|r| {
            let s = &r.summary;
            vec![
                output::fmt_f64(r.value),
                output::fmt_f64(s.mu_inf),
                output::fmt_f64(s.n_inf),
                output::fmt_f64(s.pop_inf),
                output::fmt_f64(s.tau_rel),
                opt(s.tau_eq_formula),
                opt(s.tau_eq_fitted),
                opt(s.g_formula),
                opt(s.g_measured),
                opt(s.g_fermi_bound),
                s.checks_passed().to_string(),
            ]
        })
        .collect();
    (header, body)
}

pub fn sweep(config: &Config, spec: &SweepSpec, out: &mut dyn Write) -> Result<(), CliError> {
    let rows = sweep_rows(config, spec)?;
    let (header, body) = sweep_table(&spec.key, &rows);
    match &spec.out {
        Some(path) => {
            let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
            output::write_table(file, &header, &body).map_err(|e| CliError::io(path, e))?;
        }
        None => {
            let mut buf = Vec::new();
            output::write_table(&mut buf, &header, &body).map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
            emit(out, &String::from_utf8_lossy(&buf))?;
        }
    }
    let failed: Vec<String> = rows
        .iter()
        .filter(|r| !r.summary.checks_passed())
        .map(|r| output::fmt_f64(r.value))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::check(format!(
            "checks failed at {}={}",
            spec.key,
            failed.join(";")
        )))
    }
}

/// Oracle comparison behind `validate`; also returns the cutoff change for
/// bosons.
pub fn closure_report(config: &Config, spec: &ValidateSpec) -> Result<(ClosureReport, Option<f64>, usize), CliError> {
    if config.lattice != LatticeInit::Empty {
        return Err(CliError::config("validate needs lattice_init = empty".to_string()));
    }
    let ch = ChannelSpec::new(config.sites, config.eps_s, config.hopping)?;
    let trap = config.trap()?;
    let model = TransportModel::new(ch, trap, config.gamma_l, config.gamma_r, config.stats)?;
    let (mu_l, mu_r) = initial_mus(config)?;
    let control = StepControl::new(config.reltol, config.abstol);
    let n_max = match (config.stats, spec.n_max) {
        (QuantumStatistics::Fermi, _) => 1,
        (QuantumStatistics::Bose, Some(n)) => n,
        (QuantumStatistics::Bose, None) => {
            let occ = |mu| occupation(config.eps_s, mu, config.beta, QuantumStatistics::Bose);
            bose_cutoff(occ(mu_l)?.max(occ(mu_r)?))?
        }
    };
    let alg = LadderAlgebra::new(config.sites, config.stats, n_max)?;
    let rep = certify_closure(&model, &alg, mu_l, mu_r, spec.t_end, &control, spec.samples)?;
    let sens = match config.stats {
        QuantumStatistics::Fermi => None,
        QuantumStatistics::Bose => Some(cutoff_sensitivity(
            &model,
            n_max,
            n_max + 2,
            mu_l,
            mu_r,
            spec.t_end,
            &control,
            spec.samples,
        )?),
    };
    Ok((rep, sens, n_max))
}

pub fn validate(config: &Config, spec: &ValidateSpec, out: &mut dyn Write) -> Result<(), CliError> {
    let (rep, sens, n_max) = closure_report(config, spec)?;
    let tol = match config.stats {
        QuantumStatistics::Fermi => FERMI_CLOSURE_TOL,
        QuantumStatistics::Bose => BOSE_CLOSURE_TOL,
    };
    let f = output::fmt_f64;
    let mut text = format!(
        "stats={}\nn_max={n_max}\nsamples={}\nsigma_dev={}\nmu_dev={}\nmin_rho_eigenvalue={}\ntrace_dev={}\n",
        config.stats.name(),
        rep.samples,
        f(rep.sigma_dev),
        f(rep.mu_dev),
        f(rep.min_rho_eigenvalue),
        f(rep.trace_dev)
    );
    if let Some(s) = sens {
        text += &format!("cutoff_sensitivity={}\n", f(s));
    }
    let passed = rep.sigma_dev < tol && rep.mu_dev < tol && sens.is_none_or(|s| s < tol);
    text += &format!("tolerance={}\nclosure_passed={passed}\n", f(tol));
    emit(out, &text)?;
    if passed {
        Ok(())
    } else {
        Err(CliError::check(format!(
            "oracle deviation above {}: sigma {}, mu {}",
            f(tol),
            f(rep.sigma_dev),
            f(rep.mu_dev)
        )))
    }
}
