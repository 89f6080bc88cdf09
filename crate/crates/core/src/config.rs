//! Flat `key = value` scenario configuration.
//!
//! One assignment per line; `#` starts a comment. Keys are case sensitive.
//! Defaults: `reltol = 1e-8`, `abstol = 1e-10`, `gamma_R = gamma_L`,
//! `lattice_init = empty`, `t_end = auto`, `sampling = auto`, no output files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::reservoir::{bose_capacity, QuantumStatistics, TrapSpec, BOSE_MARGIN};

pub const KEYS: [&str; 23] = [
    "stats",
    "M",
    "eps_s",
    "J",
    "gamma_L",
    "gamma_R",
    "beta",
    "omega_x",
    "omega_y",
    "omega_z",
    "mu_L0",
    "mu_R0",
    "N_L0",
    "N_R0",
    "lattice_init",
    "n0",
    "t_end",
    "reltol",
    "abstol",
    "sampling",
    "out_csv",
    "out_summary",
    "out_svg",
];

pub const DEFAULT_RELTOL: f64 = 1e-8;
pub const DEFAULT_ABSTOL: f64 = 1e-10;

/// How the reservoirs are filled at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialReservoirs {
    ChemicalPotentials { mu_l: f64, mu_r: f64 },
    Populations { n_l: f64, n_r: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LatticeInit {
    Empty,
    /// Every site at occupation `n0`, no coherences.
    Uniform(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EndTime {
    /// Five times the closed-form equilibration time.
    Auto,
    At(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingSpec {
    /// Log grid up to `10 τ_rel`, then a uniform grid.
    Auto,
    Uniform(usize),
    Log(usize),
    Steps,
}

impl FromStr for SamplingSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("sampling: expected auto, uniform:N, log:N or steps, got {s:?}"));
        match s {
            "auto" => return Ok(SamplingSpec::Auto),
            "steps" => return Ok(SamplingSpec::Steps),
            _ => {}
        }
        let (kind, n) = s.split_once(':').ok_or_else(bad)?;
        let n: usize = n.trim().parse().map_err(|_| bad())?;
        if n == 0 {
            return Err(bad());
        }
        match kind.trim() {
            "uniform" => Ok(SamplingSpec::Uniform(n)),
            "log" => Ok(SamplingSpec::Log(n)),
            _ => Err(bad()),
        }
    }
}

impl std::fmt::Display for SamplingSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SamplingSpec::Auto => write!(f, "auto"),
            SamplingSpec::Uniform(n) => write!(f, "uniform:{n}"),
            SamplingSpec::Log(n) => write!(f, "log:{n}"),
            SamplingSpec::Steps => write!(f, "steps"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub stats: QuantumStatistics,
    pub sites: usize,
    pub eps_s: f64,
    pub hopping: f64,
    pub gamma_l: f64,
    pub gamma_r: f64,
    pub beta: f64,
    pub omega: [f64; 3],
    pub reservoirs: InitialReservoirs,
    pub lattice: LatticeInit,
    pub t_end: EndTime,
    pub reltol: f64,
    pub abstol: f64,
    pub sampling: SamplingSpec,
    pub out_csv: Option<String>,
    pub out_summary: Option<String>,
    pub out_svg: Option<String>,
}

impl Config {
    pub fn trap(&self) -> Result<TrapSpec> {
        TrapSpec::new(self.beta, self.omega[0], self.omega[1], self.omega[2])
    }

    /// Reads the value of `key` as a string in the rendered form.
    pub fn get(&self, key: &str) -> Option<String> {
        parse_pairs(&self.render()).ok()?.remove(key)
    }

    /// Returns a copy with `key` replaced by `value`, revalidated.
    pub fn with_value(&self, key: &str, value: &str) -> Result<Config> {
        self.with_values(&[(key, value)])
    }

    /// Applies several assignments at once, then revalidates. Setting either
    /// reservoir description drops the other one; `lattice_init = empty`
    /// drops `n0`.
    pub fn with_values(&self, assignments: &[(&str, &str)]) -> Result<Config> {
        let mut pairs = parse_pairs(&self.render())?;
        for &(key, value) in assignments {
            if !KEYS.contains(&key) {
                return Err(Error::Config(format!("unknown key: {key}")));
            }
            let other = match key {
                "mu_L0" | "mu_R0" => ["N_L0", "N_R0"],
                "N_L0" | "N_R0" => ["mu_L0", "mu_R0"],
                "lattice_init" if value.trim() == "empty" => ["n0", ""],
                _ => ["", ""],
            };
            for k in other {
                pairs.remove(k);
            }
            pairs.insert(key.to_string(), value.to_string());
        }
        from_pairs(pairs)
    }

    /// Canonical text form; `parse_config(&c.render()) == Ok(c)`.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("stats", self.stats.name().to_string());
        kv("M", self.sites.to_string());
        kv("eps_s", self.eps_s.to_string());
        kv("J", self.hopping.to_string());
        kv("gamma_L", self.gamma_l.to_string());
        kv("gamma_R", self.gamma_r.to_string());
        kv("beta", self.beta.to_string());
        kv("omega_x", self.omega[0].to_string());
        kv("omega_y", self.omega[1].to_string());
        kv("omega_z", self.omega[2].to_string());
        match self.reservoirs {
            InitialReservoirs::ChemicalPotentials { mu_l, mu_r } => {
                kv("mu_L0", mu_l.to_string());
                kv("mu_R0", mu_r.to_string());
            }
            InitialReservoirs::Populations { n_l, n_r } => {
                kv("N_L0", n_l.to_string());
                kv("N_R0", n_r.to_string());
            }
        }
        match self.lattice {
            LatticeInit::Empty => kv("lattice_init", "empty".into()),
            LatticeInit::Uniform(n0) => {
                kv("lattice_init", "uniform".into());
                kv("n0", n0.to_string());
            }
        }
        kv(
            "t_end",
            match self.t_end {
                EndTime::Auto => "auto".into(),
                EndTime::At(t) => t.to_string(),
            },
        );
        kv("reltol", self.reltol.to_string());
        kv("abstol", self.abstol.to_string());
        kv("sampling", self.sampling.to_string());
        for (k, v) in [
            ("out_csv", &self.out_csv),
            ("out_summary", &self.out_summary),
            ("out_svg", &self.out_svg),
        ] {
            if let Some(v) = v {
                kv(k, v.clone());
            }
        }
        s
    }
}

fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut pairs = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got {line:?}", lineno + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(Error::Config(format!("unknown key: {k}")));
        }
        if v.is_empty() {
            return Err(Error::Config(format!("empty value for key: {k}")));
        }
        if pairs.insert(k.to_string(), v.to_string()).is_some() {
            return Err(Error::Config(format!("duplicate key: {k}")));
        }
    }
    Ok(pairs)
}

struct Fields(BTreeMap<String, String>);

impl Fields {
    fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn required(&self, key: &str) -> Result<&str> {
        self.raw(key)
            .ok_or_else(|| Error::Config(format!("missing key: {key}")))
    }

    fn number(&self, key: &str, v: &str) -> Result<f64> {
        let x: f64 = v
            .parse()
            .map_err(|_| Error::Config(format!("key {key}: malformed number {v:?}")))?;
        if !x.is_finite() {
            return Err(Error::Config(format!("key {key}: value must be finite, got {v}")));
        }
        Ok(x)
    }

    fn real(&self, key: &str) -> Result<f64> {
        self.number(key, self.required(key)?)
    }

    fn real_opt(&self, key: &str) -> Result<Option<f64>> {
        self.raw(key).map(|v| self.number(key, v)).transpose()
    }

    fn positive(&self, key: &str) -> Result<f64> {
        let x = self.real(key)?;
        if !(x > 0.0) {
            return Err(Error::Config(format!("key {key}: must be > 0, got {x}")));
        }
        Ok(x)
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<Config> {
    from_pairs(parse_pairs(text)?)
}

fn from_pairs(pairs: BTreeMap<String, String>) -> Result<Config> {
    let f = Fields(pairs);
    let stats: QuantumStatistics = f.required("stats")?.parse().map_err(|_| {
        Error::Config(format!(
            "key stats: expected bose or fermi, got {:?}",
            f.raw("stats").unwrap_or("")
        ))
    })?;
    let sites: usize = f
        .required("M")?
        .parse()
        .map_err(|_| Error::Config(format!("key M: malformed integer {:?}", f.raw("M").unwrap_or(""))))?;
    if sites < 2 {
        return Err(Error::Config(format!(
            "key M: channel needs at least 2 sites, got {sites}"
        )));
    }
    let eps_s = f.real("eps_s")?;
    let hopping = f.positive("J")?;
    let gamma_l = f.positive("gamma_L")?;
    let gamma_r = match f.raw("gamma_R") {
        Some(_) => f.positive("gamma_R")?,
        None => gamma_l,
    };
    let beta = f.positive("beta")?;
    let omega = [f.positive("omega_x")?, f.positive("omega_y")?, f.positive("omega_z")?];
    let trap = TrapSpec::new(beta, omega[0], omega[1], omega[2])?;
    let e0 = trap.e0();

    if stats == QuantumStatistics::Bose && eps_s <= e0 {
        return Err(Error::Config(format!(
            "bose channel level rule: eps_s = {eps_s} must exceed E0 = {e0}"
        )));
    }

    let mu_pair = (f.raw("mu_L0"), f.raw("mu_R0"));
    let pop_pair = (f.raw("N_L0"), f.raw("N_R0"));
    let reservoirs = match (mu_pair, pop_pair) {
        ((Some(_), Some(_)), (None, None)) => {
            let (mu_l, mu_r) = (f.real("mu_L0")?, f.real("mu_R0")?);
            if stats == QuantumStatistics::Bose {
                for (k, mu) in [("mu_L0", mu_l), ("mu_R0", mu_r)] {
                    if mu > e0 - BOSE_MARGIN {
                        return Err(Error::Config(format!(
                            "bose chemical potential rule: {k} = {mu} must stay below E0 - {BOSE_MARGIN:e} = {}",
                            e0 - BOSE_MARGIN
                        )));
                    }
                }
            }
            InitialReservoirs::ChemicalPotentials { mu_l, mu_r }
        }
        ((None, None), (Some(_), Some(_))) => {
            let (n_l, n_r) = (f.positive("N_L0")?, f.positive("N_R0")?);
            if stats == QuantumStatistics::Bose {
                let cap = bose_capacity(&trap);
                for (k, n) in [("N_L0", n_l), ("N_R0", n_r)] {
                    if n > cap {
                        return Err(Error::Config(format!(
                            "bose chemical potential rule: {k} = {n} exceeds the reservoir capacity {cap} below E0"
                        )));
                    }
                }
            }
            InitialReservoirs::Populations { n_l, n_r }
        }
        ((None, None), (None, None)) => {
            return Err(Error::Config("missing key: mu_L0 (or N_L0)".into()));
        }
        ((Some(_), None), (None, None)) => return Err(Error::Config("missing key: mu_R0".into())),
        ((None, Some(_)), (None, None)) => return Err(Error::Config("missing key: mu_L0".into())),
        ((None, None), (Some(_), None)) => return Err(Error::Config("missing key: N_R0".into())),
        ((None, None), (None, Some(_))) => return Err(Error::Config("missing key: N_L0".into())),
        _ => {
            return Err(Error::Config(
                "initial condition rule: give either mu_L0 and mu_R0 or N_L0 and N_R0, not both".into(),
            ))
        }
    };

    let n0 = f.real_opt("n0")?;
    let lattice = match (f.raw("lattice_init").unwrap_or("empty"), n0) {
        ("empty", None) => LatticeInit::Empty,
        ("empty", Some(_)) => {
            return Err(Error::Config("key n0: only allowed with lattice_init = uniform".into()));
        }
        ("uniform", Some(n0)) => {
            let max = if stats == QuantumStatistics::Fermi {
                1.0
            } else {
                f64::INFINITY
            };
            if !(n0 >= 0.0 && n0 <= max) {
                return Err(Error::Config(format!(
                    "key n0: occupation must lie in [0, {max}] for {stats}, got {n0}"
                )));
            }
            LatticeInit::Uniform(n0)
        }
        ("uniform", None) => return Err(Error::Config("missing key: n0".into())),
        (other, _) => {
            return Err(Error::Config(format!(
                "key lattice_init: expected empty or uniform, got {other:?}"
            )))
        }
    };

    let t_end = match f.raw("t_end") {
        None | Some("auto") => EndTime::Auto,
        Some(_) => EndTime::At(f.positive("t_end")?),
    };
    let tol = |key: &str, default: f64| -> Result<f64> {
        let v = f.real_opt(key)?.unwrap_or(default);
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::Config(format!("key {key}: must lie in (0, 1), got {v}")));
        }
        Ok(v)
    };
    let reltol = tol("reltol", DEFAULT_RELTOL)?;
    let abstol = tol("abstol", DEFAULT_ABSTOL)?;
    let sampling = match f.raw("sampling") {
        None => SamplingSpec::Auto,
        Some(v) => v.parse()?,
    };
    let path = |k: &str| f.raw(k).map(str::to_string);

    Ok(Config {
        stats,
        sites,
        eps_s,
        hopping,
        gamma_l,
        gamma_r,
        beta,
        omega,
        reservoirs,
        lattice,
        t_end,
        reltol,
        abstol,
        sampling,
        out_csv: path("out_csv"),
        out_summary: path("out_summary"),
        out_svg: path("out_svg"),
    })
}
