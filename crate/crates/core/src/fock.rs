//! Brute-force many-body reference: the full master equation for the channel
//! density matrix on a (truncated) Fock space, coupled to the same reservoir
//! equations as [`crate::dynamics`].
//!
//! Only meant for a handful of sites. Fermions use a Jordan–Wigner basis of
//! dimension `2^M`; bosons keep at most `n_max` quanta per site.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::dynamics::{Sampling, SystemState, TransportModel};
use crate::error::{Error, Result};
use crate::lattice::{ChannelSpec, RateSet};
use crate::ode::{self, OdeSystem, StepControl};
use crate::reservoir::QuantumStatistics;

/// Largest fermionic chain the algebra will build.
pub const MAX_FERMI_SITES: usize = 10;
/// Largest bosonic Hilbert space the algebra will build.
pub const MAX_BOSE_DIM: usize = 10_000;
/// Target probability of the highest kept boson level.
pub const BOSE_TAIL: f64 = 1e-10;

/// Real sparse matrix in triplet form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOp {
    dim: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseOp {
    fn new(dim: usize) -> Self {
        SparseOp {
            dim,
            entries: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn transpose(&self) -> SparseOp {
        SparseOp {
            dim: self.dim,
            entries: self.entries.iter().map(|&(r, c, v)| (c, r, v)).collect(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        m
    }

    /// Sparse product `self · other`.
    pub fn compose(&self, other: &SparseOp) -> SparseOp {
        let mut by_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.dim];
        for &(r, c, v) in &other.entries {
            by_row[r].push((c, v));
        }
        let mut acc = std::collections::BTreeMap::new();
        for &(r, k, v) in &self.entries {
            for &(c, w) in &by_row[k] {
                *acc.entry((r, c)).or_insert(0.0) += v * w;
            }
        }
        SparseOp {
            dim: self.dim,
            entries: acc
                .into_iter()
                .filter(|&(_, v)| v != 0.0)
                .map(|((r, c), v)| (r, c, v))
                .collect(),
        }
    }

    fn scaled(&self, s: f64) -> SparseOp {
        SparseOp {
            dim: self.dim,
            entries: self.entries.iter().map(|&(r, c, v)| (r, c, s * v)).collect(),
        }
    }

    fn plus(mut self, other: &SparseOp) -> SparseOp {
        self.entries.extend_from_slice(&other.entries);
        self
    }

    /// `out += s · self · rho`
    fn add_left(&self, s: Complex64, rho: &DMatrix<Complex64>, out: &mut DMatrix<Complex64>) {
        for &(r, k, v) in &self.entries {
            let f = s * v;
            for c in 0..self.dim {
                out[(r, c)] += f * rho[(k, c)];
            }
        }
    }

    /// `out += s · rho · self`
    fn add_right(&self, s: Complex64, rho: &DMatrix<Complex64>, out: &mut DMatrix<Complex64>) {
        for &(k, c, v) in &self.entries {
            let f = s * v;
            for r in 0..self.dim {
                out[(r, c)] += f * rho[(r, k)];
            }
        }
    }

    /// `out += s · self · rho · selfᵀ`
    fn add_sandwich(&self, s: f64, rho: &DMatrix<Complex64>, out: &mut DMatrix<Complex64>) {
        for &(r1, c1, v1) in &self.entries {
            for &(r2, c2, v2) in &self.entries {
                out[(r1, r2)] += rho[(c1, c2)] * (s * v1 * v2);
            }
        }
    }

    /// `Tr(selfᵀ · m)`
    fn trace_with_transpose(&self, m: &DMatrix<Complex64>) -> Complex64 {
        self.entries.iter().map(|&(r, c, v)| m[(r, c)] * v).sum()
    }
}

/// Ladder operators of the channel modes.
#[derive(Debug, Clone)]
pub struct LadderAlgebra {
    sites: usize,
    stats: QuantumStatistics,
    n_max: usize,
    dim: usize,
    lower: Vec<SparseOp>,
    /// Diagonal of `n̂_i` in the occupation basis.
    number: Vec<Vec<f64>>,
}

impl LadderAlgebra {
    /// Builds `a_i` for `i = 1..=M`. `n_max` is ignored for fermions.
    pub fn new(sites: usize, stats: QuantumStatistics, n_max: usize) -> Result<Self> {
        if sites == 0 {
            return Err(Error::domain("algebra needs at least one site"));
        }
        match stats {
            QuantumStatistics::Fermi => {
                if sites > MAX_FERMI_SITES {
                    return Err(Error::domain(format!(
                        "fermi algebra limited to {MAX_FERMI_SITES} sites, got {sites}"
                    )));
                }
                Ok(Self::fermi(sites))
            }
            QuantumStatistics::Bose => {
                if n_max == 0 {
                    return Err(Error::domain("bose cutoff n_max must be >= 1"));
                }
                let dim = (n_max as f64 + 1.0).powi(sites as i32);
                if dim > MAX_BOSE_DIM as f64 {
                    return Err(Error::domain(format!(
                        "bose Hilbert dimension {dim} exceeds {MAX_BOSE_DIM}"
                    )));
                }
                Ok(Self::bose(sites, n_max))
            }
        }
    }

    fn fermi(sites: usize) -> Self {
        let dim = 1usize << sites;
        let mut lower = Vec::with_capacity(sites);
        let mut number = Vec::with_capacity(sites);
        for i in 0..sites {
            let mut op = SparseOp::new(dim);
            let bit = 1usize << i;
            for x in 0..dim {
                if x & bit != 0 {
                    // Jordan–Wigner string over the sites before i
                    let parity = (x & (bit - 1)).count_ones();
                    let sign = if parity.is_multiple_of(2) { 1.0 } else { -1.0 };
                    op.entries.push((x ^ bit, x, sign));
                }
            }
            lower.push(op);
            number.push((0..dim).map(|x| ((x >> i) & 1) as f64).collect());
        }
        LadderAlgebra {
            sites,
            stats: QuantumStatistics::Fermi,
            n_max: 1,
            dim,
            lower,
            number,
        }
    }

    fn bose(sites: usize, n_max: usize) -> Self {
        let base = n_max + 1;
        let dim = base.pow(sites as u32);
        let mut lower = Vec::with_capacity(sites);
        let mut number = Vec::with_capacity(sites);
        for i in 0..sites {
            let stride = base.pow(i as u32);
            let mut op = SparseOp::new(dim);
            let mut diag = Vec::with_capacity(dim);
            for x in 0..dim {
                let n = (x / stride) % base;
                if n > 0 {
                    op.entries.push((x - stride, x, (n as f64).sqrt()));
                }
                diag.push(n as f64);
            }
            lower.push(op);
            number.push(diag);
        }
        LadderAlgebra {
            sites,
            stats: QuantumStatistics::Bose,
            n_max,
            dim,
            lower,
            number,
        }
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn stats(&self) -> QuantumStatistics {
        self.stats
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `a_i`, 0-based.
    pub fn lower(&self, i: usize) -> &SparseOp {
        &self.lower[i]
    }

    pub fn number_diagonal(&self, i: usize) -> &[f64] {
        &self.number[i]
    }

    /// `Σ ε_S n̂_i − J Σ (a_i† a_{i+1} + h.c.)`
    pub fn hamiltonian(&self, channel: &ChannelSpec) -> Result<SparseOp> {
        if channel.sites() != self.sites {
            return Err(Error::domain(format!(
                "channel has {} sites, algebra {}",
                channel.sites(),
                self.sites
            )));
        }
        let mut h = SparseOp::new(self.dim);
        for x in 0..self.dim {
            let n: f64 = self.number.iter().map(|d| d[x]).sum();
            if n != 0.0 {
                h.entries.push((x, x, channel.eps_s() * n));
            }
        }
        for i in 0..self.sites - 1 {
            let hop = self.lower[i].transpose().compose(&self.lower[i + 1]);
            h = h
                .plus(&hop.scaled(-channel.hopping()))
                .plus(&hop.transpose().scaled(-channel.hopping()));
        }
        Ok(h)
    }
}

/// Density matrix of the channel together with the reservoir chemical
/// potentials.
#[derive(Debug, Clone, PartialEq)]
pub struct ManyBodyState {
    pub t: f64,
    pub rho: DMatrix<Complex64>,
    pub mu_l: f64,
    pub mu_r: f64,
}

impl ManyBodyState {
    /// Empty channel.
    pub fn vacuum(alg: &LadderAlgebra, mu_l: f64, mu_r: f64) -> Self {
        let mut rho = DMatrix::zeros(alg.dim, alg.dim);
        rho[(0, 0)] = Complex64::new(1.0, 0.0);
        ManyBodyState {
            t: 0.0,
            rho,
            mu_l,
            mu_r,
        }
    }

    /// `ρ ∝ exp(−x Σ n̂_j)` with `x = β(ε_S − μ)`, normalized on the kept basis.
    pub fn product_thermal(alg: &LadderAlgebra, x: f64, mu_l: f64, mu_r: f64) -> Self {
        let weights: Vec<f64> = (0..alg.dim)
            .map(|k| (-x * alg.number.iter().map(|d| d[k]).sum::<f64>()).exp())
            .collect();
        let z: f64 = weights.iter().sum();
        let rho = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            alg.dim,
            weights.iter().map(|w| Complex64::new(w / z, 0.0)),
        ));
        ManyBodyState {
            t: 0.0,
            rho,
            mu_l,
            mu_r,
        }
    }

    pub fn trace(&self) -> Complex64 {
        self.rho.trace()
    }
}

/// `⟨n̂_i⟩ = Tr(ρ n̂_i)`.
pub fn site_population(rho: &DMatrix<Complex64>, alg: &LadderAlgebra, i: usize) -> f64 {
    alg.number[i].iter().enumerate().map(|(k, &n)| n * rho[(k, k)].re).sum()
}

/// `σ_jk = Tr(a_j† a_k ρ)`.
pub fn spdm_of(rho: &DMatrix<Complex64>, alg: &LadderAlgebra) -> DMatrix<Complex64> {
    let m = alg.sites;
    let mut sigma = DMatrix::zeros(m, m);
    for k in 0..m {
        let mut ak_rho = DMatrix::zeros(alg.dim, alg.dim);
        alg.lower[k].add_left(Complex64::new(1.0, 0.0), rho, &mut ak_rho);
        for j in 0..m {
            // Tr(a_j† a_k ρ) = Σ (a_j)_{rc} (a_k ρ)_{rc}
            sigma[(j, k)] = alg.lower[j].trace_with_transpose(&ak_rho);
        }
    }
    sigma
}

/// Precomputed generator pieces for fixed channel and algebra.
struct Generator {
    h: SparseOp,
    /// `a_1† a_1`, `a_1 a_1†` and the same for site M.
    first_nn: SparseOp,
    first_aa: SparseOp,
    last_nn: SparseOp,
    last_aa: SparseOp,
    first: SparseOp,
    first_dag: SparseOp,
    last: SparseOp,
    last_dag: SparseOp,
}

impl Generator {
    fn new(alg: &LadderAlgebra, channel: &ChannelSpec) -> Result<Self> {
        let m = alg.sites;
        let first = alg.lower[0].clone();
        let last = alg.lower[m - 1].clone();
        let first_dag = first.transpose();
        let last_dag = last.transpose();
        Ok(Generator {
            h: alg.hamiltonian(channel)?,
            first_nn: first_dag.compose(&first),
            first_aa: first.compose(&first_dag),
            last_nn: last_dag.compose(&last),
            last_aa: last.compose(&last_dag),
            first,
            first_dag,
            last,
            last_dag,
        })
    }

    fn apply(&self, rho: &DMatrix<Complex64>, r: &RateSet) -> DMatrix<Complex64> {
        let mut out = DMatrix::zeros(rho.nrows(), rho.ncols());
        let i = Complex64::new(0.0, 1.0);
        self.h.add_left(-i, rho, &mut out);
        self.h.add_right(i, rho, &mut out);
        // 𝒟[a†]: a† ρ a − ½{a a†, ρ};  𝒟[a]: a ρ a† − ½{a† a, ρ}
        let terms = [
            (r.gamma_plus_l, &self.first_dag, &self.first_aa),
            (r.gamma_minus_l, &self.first, &self.first_nn),
            (r.gamma_plus_r, &self.last_dag, &self.last_aa),
            (r.gamma_minus_r, &self.last, &self.last_nn),
        ];
        for (g, jump, loss) in terms {
            if g == 0.0 {
                continue;
            }
            jump.add_sandwich(g, rho, &mut out);
            let half = Complex64::new(-0.5 * g, 0.0);
            loss.add_left(half, rho, &mut out);
            loss.add_right(half, rho, &mut out);
        }
        out
    }
}

/// Right-hand side of the master equation with gain and loss on the end
/// sites at the given rates.
pub fn lindblad_rhs(
    rho: &DMatrix<Complex64>,
    alg: &LadderAlgebra,
    channel: &ChannelSpec,
    rates: &RateSet,
) -> Result<DMatrix<Complex64>> {
    if rho.nrows() != alg.dim || rho.ncols() != alg.dim {
        return Err(Error::domain(format!(
            "rho is {}x{}, algebra dimension is {}",
            rho.nrows(),
            rho.ncols(),
            alg.dim
        )));
    }
    Ok(Generator::new(alg, channel)?.apply(rho, rates))
}

/// The coupled many-body and reservoir system.
pub struct ManyBodyModel<'a> {
    pub model: TransportModel,
    pub alg: &'a LadderAlgebra,
    gen: Generator,
}

impl<'a> ManyBodyModel<'a> {
    pub fn new(model: TransportModel, alg: &'a LadderAlgebra) -> Result<Self> {
        if alg.stats != model.stats {
            return Err(Error::domain(format!(
                "algebra is {}, model is {}",
                alg.stats, model.stats
            )));
        }
        let gen = Generator::new(alg, &model.channel)?;
        Ok(ManyBodyModel { model, alg, gen })
    }

    fn unpack(&self, t: f64, y: &[f64]) -> ManyBodyState {
        let d = self.alg.dim;
        ManyBodyState {
            t,
            rho: DMatrix::from_iterator(d, d, (0..d * d).map(|i| Complex64::new(y[2 * i], y[2 * i + 1]))),
            mu_l: y[2 * d * d],
            mu_r: y[2 * d * d + 1],
        }
    }

    fn pack(&self, s: &ManyBodyState) -> Vec<f64> {
        let mut y = Vec::with_capacity(self.dim());
        for z in s.rho.iter() {
            y.push(z.re);
            y.push(z.im);
        }
        y.push(s.mu_l);
        y.push(s.mu_r);
        y
    }

    /// Integrates `(ρ, μ_L, μ_R)` and returns the sampled states.
    pub fn evolve(
        &self,
        state0: &ManyBodyState,
        t_end: f64,
        control: &StepControl,
        sampling: Sampling,
    ) -> Result<Vec<ManyBodyState>> {
        if state0.rho.nrows() != self.alg.dim {
            return Err(Error::domain("initial rho does not match the algebra"));
        }
        let y0 = self.pack(state0);
        let outputs = sampling.times(state0.t, t_end);
        let mut out = Vec::with_capacity(outputs.len() + 2);
        ode::integrate(
            self,
            state0.t,
            &y0,
            t_end,
            &outputs,
            matches!(sampling, Sampling::EveryStep),
            control,
            |t, y| {
                out.push(self.unpack(t, y));
                Ok(())
            },
        )?;
        Ok(out)
    }
}

impl OdeSystem for ManyBodyModel<'_> {
    fn dim(&self) -> usize {
        2 * self.alg.dim * self.alg.dim + 2
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let s = self.unpack(t, y);
        let m = &self.model;
        let rates = m.rate_set(s.mu_l, s.mu_r)?;
        let d = self.gen.apply(&s.rho, &rates);
        for (i, z) in d.iter().enumerate() {
            dy[2 * i] = z.re;
            dy[2 * i + 1] = z.im;
        }
        let off = 2 * self.alg.dim * self.alg.dim;
        match m.reservoirs {
            crate::dynamics::ReservoirMode::Frozen => {
                dy[off] = 0.0;
                dy[off + 1] = 0.0;
            }
            crate::dynamics::ReservoirMode::Dynamic => {
                let (n_l, n_r) = m.resonant_occupations(s.mu_l, s.mu_r)?;
                let first = site_population(&s.rho, self.alg, 0);
                let last = site_population(&s.rho, self.alg, self.alg.sites - 1);
                dy[off] = m.gamma_l * (first - n_l) / m.slope(s.mu_l, "left")?;
                dy[off + 1] = m.gamma_r * (last - n_r) / m.slope(s.mu_r, "right")?;
            }
        }
        Ok(())
    }

    fn project(&self, y: &mut [f64]) {
        let d = self.alg.dim;
        for c in 0..d {
            for r in 0..c {
                let a = 2 * (c * d + r);
                let b = 2 * (r * d + c);
                let re = 0.5 * (y[a] + y[b]);
                let im = 0.5 * (y[a + 1] - y[b + 1]);
                y[a] = re;
                y[a + 1] = im;
                y[b] = re;
                y[b + 1] = -im;
            }
            y[2 * (c * d + c) + 1] = 0.0;
        }
    }

    fn describe(&self, t: f64, y: &[f64]) -> String {
        let off = 2 * self.alg.dim * self.alg.dim;
        format!("t = {t}, mu_L = {}, mu_R = {}", y[off], y[off + 1])
    }
}

/// Largest differences between the many-body and single-particle engines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosureReport {
    /// `max_t ‖σ_oracle − σ_spdm‖_max`
    pub sigma_dev: f64,
    /// `max_t max(|Δμ_L|, |Δμ_R|)`
    pub mu_dev: f64,
    /// Smallest eigenvalue of ρ seen at any sample.
    pub min_rho_eigenvalue: f64,
    /// Largest `|Tr ρ − 1|`.
    pub trace_dev: f64,
    pub samples: usize,
}

/// Integrates the same empty-channel start with both engines and compares
/// the single-particle density matrices at `samples` uniform times.
pub fn certify_closure(
    model: &TransportModel,
    alg: &LadderAlgebra,
    mu_l0: f64,
    mu_r0: f64,
    t_end: f64,
    control: &StepControl,
    samples: usize,
) -> Result<ClosureReport> {
    let sampling = Sampling::Uniform { points: samples };
    let many = ManyBodyModel::new(*model, alg)?;
    let oracle = many.evolve(&ManyBodyState::vacuum(alg, mu_l0, mu_r0), t_end, control, sampling)?;
    let spdm = model.integrate(
        &SystemState::empty(model.channel.sites(), mu_l0, mu_r0),
        t_end,
        control,
        sampling,
    )?;
    if oracle.len() != spdm.states.len() {
        return Err(Error::Numeric(format!(
            "engines sampled {} and {} times",
            oracle.len(),
            spdm.states.len()
        )));
    }
    let mut rep = ClosureReport {
        sigma_dev: 0.0,
        mu_dev: 0.0,
        min_rho_eigenvalue: f64::INFINITY,
        trace_dev: 0.0,
        samples: oracle.len(),
    };
    for (o, s) in oracle.iter().zip(&spdm.states) {
        let sigma = spdm_of(&o.rho, alg);
        let dev = (&sigma - &s.sigma).iter().map(|z| z.norm()).fold(0.0, f64::max);
        rep.sigma_dev = rep.sigma_dev.max(dev);
        rep.mu_dev = rep.mu_dev.max((o.mu_l - s.mu_l).abs()).max((o.mu_r - s.mu_r).abs());
        rep.trace_dev = rep.trace_dev.max((o.trace() - 1.0).norm());
        let (lo, _) = crate::dynamics::sigma_spectrum_bounds(&o.rho);
        rep.min_rho_eigenvalue = rep.min_rho_eigenvalue.min(lo);
    }
    Ok(rep)
}

/// Largest change of the oracle's σ when the boson cutoff is raised from
/// `n_max` to `n_max_refined`.
#[allow(clippy::too_many_arguments)]
pub fn cutoff_sensitivity(
    model: &TransportModel,
    n_max: usize,
    n_max_refined: usize,
    mu_l0: f64,
    mu_r0: f64,
    t_end: f64,
    control: &StepControl,
    samples: usize,
) -> Result<f64> {
    let sampling = Sampling::Uniform { points: samples };
    let run = |cut: usize| -> Result<Vec<DMatrix<Complex64>>> {
        let alg = LadderAlgebra::new(model.channel.sites(), QuantumStatistics::Bose, cut)?;
        let many = ManyBodyModel::new(*model, &alg)?;
        let states = many.evolve(&ManyBodyState::vacuum(&alg, mu_l0, mu_r0), t_end, control, sampling)?;
        Ok(states.iter().map(|s| spdm_of(&s.rho, &alg)).collect())
    };
    let coarse = run(n_max)?;
    let fine = run(n_max_refined)?;
    Ok(coarse
        .iter()
        .zip(&fine)
        .map(|(a, b)| (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max))
        .fold(0.0, f64::max))
}

/// Smallest boson cutoff for which a thermal mode of mean occupation `n`
/// puts less than [`BOSE_TAIL`] probability on its top kept level.
pub fn bose_cutoff(n: f64) -> Result<usize> {
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::domain(format!("mean occupation must be > 0, got {n}")));
    }
    // P(k) = (1 − r) r^k with r = n / (1 + n)
    let r = n / (1.0 + n);
    let k = ((BOSE_TAIL / (1.0 - r)).ln() / r.ln()).floor() as usize + 1;
    Ok(k.max(1))
}
