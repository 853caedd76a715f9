//! Path-integral representation: Euler–Maruyama trajectories of the phase-space
//! diffusion carrying complex weights, and a Monte Carlo estimate of `φ(x,p,t)`.
//!
//! Each path `i` draws from its own ChaCha stream `(seed, i)`, and paths are
//! reduced in fixed-size chunks merged in index order, so results do not depend
//! on the number of worker threads.

use std::io::Write;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{HamiltonianSpec, ModelParams, PhaseGrid, PhaseWaveFunction, PotentialEval, XAxis};

/// Paths per reduction chunk.
const CHUNK: usize = 4096;
/// Smallest acceptable effective sample size in a significant bin.
pub const MIN_BIN_ESS: f64 = 10.0;
/// Bins whose estimate is at least this fraction of the maximum are significant.
pub const SIGNIFICANT_FRACTION: f64 = 0.1;

/// Where paths start.
#[derive(Debug, Clone)]
pub enum StartDistribution {
    Point { x: f64, p: f64 },
    /// Independent normals in `x` and `p`.
    Gaussian { x: f64, p: f64, std_x: f64, std_p: f64 },
    /// Grid nodes drawn with probability proportional to `|φ|`.
    Field(PhaseWaveFunction),
}

/// A sampled path `(x⁰,p⁰), (x¹,p¹), …` on a uniform time step.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub steps: Vec<(f64, f64)>,
    pub seed: u64,
    pub index: u64,
}

impl Trajectory {
    pub fn duration(&self) -> f64 {
        self.dt * self.steps.len().saturating_sub(1) as f64
    }
}

/// `exp(log_magnitude + i·phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexWeight {
    pub log_magnitude: f64,
    pub phase: f64,
}

impl ComplexWeight {
    pub fn value(&self) -> C64 {
        C64::from_polar(self.log_magnitude.exp(), self.phase)
    }
}

#[derive(Debug, Clone)]
pub struct TrajectoryEnsemble {
    pub trajectories: Vec<Trajectory>,
    pub dt: f64,
    pub seed: u64,
}

/// Standardised mean of the increments minus the Hamiltonian drift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftCheck {
    pub mean_residual_x: f64,
    pub mean_residual_p: f64,
    pub z_x: f64,
    pub z_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub paths: usize,
    pub steps: usize,
    pub dt: f64,
    pub seed: u64,
    pub drift: DriftCheck,
    pub final_mean_x: f64,
    pub final_mean_p: f64,
    pub final_var_x: f64,
    pub final_var_p: f64,
}

fn mean_var(v: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = v.clone().count() as f64;
    let mean = v.clone().sum::<f64>() / n;
    let var = if n > 1.0 {
        v.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

impl TrajectoryEnsemble {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// Points at step `k` of every path.
    pub fn positions_at(&self, k: usize) -> Vec<(f64, f64)> {
        self.trajectories.iter().map(|t| t.steps[k]).collect()
    }

    /// Mean and sample variance of `x` at step `k`.
    pub fn x_moments(&self, k: usize) -> (f64, f64) {
        mean_var(self.trajectories.iter().map(move |t| t.steps[k].0))
    }

    /// Mean and sample variance of `p` at step `k`.
    pub fn p_moments(&self, k: usize) -> (f64, f64) {
        mean_var(self.trajectories.iter().map(move |t| t.steps[k].1))
    }

    /// Compare all increments with `(∂H/∂p, −∂H/∂x)·Δt`.
    pub fn drift_check(&self, spec: &HamiltonianSpec, axis: Option<&XAxis>) -> Result<DriftCheck> {
        let field = VectorField::new(spec, axis)?;
        let mut rx = Vec::new();
        let mut rp = Vec::new();
        for t in &self.trajectories {
            for w in t.steps.windows(2) {
                let (hx, hp) = field.gradient(w[0].0, w[0].1);
                rx.push(w[1].0 - w[0].0 - hp * self.dt);
                rp.push(w[1].1 - w[0].1 + hx * self.dt);
            }
        }
        let z = |r: &[f64]| {
            let (m, v) = mean_var(r.iter().copied());
            let se = (v / r.len() as f64).sqrt();
            (m, if se > 0.0 { m / se } else { 0.0 })
        };
        let (mx, zx) = z(&rx);
        let (mp, zp) = z(&rp);
        Ok(DriftCheck {
            mean_residual_x: mx,
            mean_residual_p: mp,
            z_x: zx,
            z_p: zp,
        })
    }

    pub fn summary(&self, spec: &HamiltonianSpec, axis: Option<&XAxis>) -> Result<EnsembleSummary> {
        let steps = self.trajectories.first().map_or(0, |t| t.steps.len() - 1);
        let (mx, vx) = self.x_moments(steps);
        let (mp, vp) = self.p_moments(steps);
        Ok(EnsembleSummary {
            paths: self.len(),
            steps,
            dt: self.dt,
            seed: self.seed,
            drift: self.drift_check(spec, axis)?,
            final_mean_x: mx,
            final_mean_p: mp,
            final_var_x: vx,
            final_var_p: vp,
        })
    }
}

/// `(H, ∂H/∂x, ∂H/∂p)` along paths for a separable Hamiltonian.
struct VectorField {
    inv_mass: f64,
    potential: Option<PotentialEval>,
    closed: crate::model::Potential,
    axis: Option<XAxis>,
}

impl VectorField {
    fn new(spec: &HamiltonianSpec, axis: Option<&XAxis>) -> Result<Self> {
        let (inv_mass, potential) = spec.as_separable()?;
        let eval = match (potential, axis) {
            (_, Some(ax)) => Some(PotentialEval::new(potential, ax)?),
            (crate::model::Potential::Table { .. }, None) => {
                return Err(Error::InvalidParams("a tabulated potential needs a coordinate axis".into()))
            }
            _ => None,
        };
        Ok(Self {
            inv_mass,
            potential: eval,
            closed: potential.clone(),
            axis: axis.copied(),
        })
    }

    fn potential(&self, x: f64) -> (f64, f64) {
        match (&self.potential, &self.axis) {
            (Some(eval), Some(ax)) => eval.value_and_slope(ax.wrap(x)),
            _ => {
                let (v, dv, _) = self.closed.analytic(x).expect("closed form");
                (v, dv)
            }
        }
    }

    /// `(∂H/∂x, ∂H/∂p)`.
    fn gradient(&self, x: f64, p: f64) -> (f64, f64) {
        (self.potential(x).1, self.inv_mass * p)
    }

    fn hamiltonian(&self, x: f64, p: f64) -> f64 {
        0.5 * self.inv_mass * p * p + self.potential(x).0
    }
}

fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

struct Sampler {
    field: VectorField,
    sx: f64,
    sp: f64,
    dt: f64,
    steps: usize,
}

impl Sampler {
    fn new(spec: &HamiltonianSpec, params: &ModelParams, axis: Option<&XAxis>, t: f64, dt: f64) -> Result<Self> {
        params.validate()?;
        params.require_1d()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParams(format!("dt must be positive, got {dt}")));
        }
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidParams(format!("t must be nonnegative, got {t}")));
        }
        let steps = crate::diffusion::step_count(t, dt);
        let h = if steps == 0 { dt } else { t / steps as f64 };
        Ok(Self {
            field: VectorField::new(spec, axis)?,
            sx: params.a * (2.0 * h).sqrt(),
            sp: params.b * (2.0 * h).sqrt(),
            dt: h,
            steps,
        })
    }

    /// Advance one path, calling `visit` on every point including the start.
    fn run(&self, rng: &mut ChaCha8Rng, start: (f64, f64), mut visit: impl FnMut(f64, f64)) {
        let (mut x, mut p) = start;
        visit(x, p);
        for _ in 0..self.steps {
            let (hx, hp) = self.field.gradient(x, p);
            let xi: f64 = StandardNormal.sample(rng);
            let eta: f64 = StandardNormal.sample(rng);
            x += hp * self.dt + self.sx * xi;
            p += -hx * self.dt + self.sp * eta;
            visit(x, p);
        }
    }
}

fn draw_start(start: &StartDistribution, picker: Option<&WeightedIndex<f64>>, rng: &mut ChaCha8Rng) -> (f64, f64) {
    match start {
        StartDistribution::Point { x, p } => (*x, *p),
        StartDistribution::Gaussian { x, p, std_x, std_p } => {
            let u: f64 = StandardNormal.sample(rng);
            let v: f64 = StandardNormal.sample(rng);
            (x + std_x * u, p + std_p * v)
        }
        StartDistribution::Field(phi) => {
            let k = picker.expect("field start").sample(rng);
            let np = phi.grid().np();
            (phi.grid().x(k / np), phi.grid().p(k % np))
        }
    }
}

fn field_picker(phi: &PhaseWaveFunction) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(phi.values().iter().map(|z| z.norm()))
        .map_err(|e| Error::InvalidParams(format!("cannot sample from the initial field: {e}")))
}

/// Sample `n` Euler–Maruyama paths of `dx = ∂H/∂p dt + a√2 dW`,
/// `dp = −∂H/∂x dt + b√2 dW′` up to time `t`.
pub fn sample_trajectories(
    start: &StartDistribution,
    spec: &HamiltonianSpec,
    params: &ModelParams,
    t: f64,
    dt: f64,
    n: usize,
    seed: u64,
) -> Result<TrajectoryEnsemble> {
    if n == 0 {
        return Err(Error::InvalidParams("need at least one path".into()));
    }
    let axis = match start {
        StartDistribution::Field(phi) => Some(*phi.grid().x_axis()),
        _ => None,
    };
    let sampler = Sampler::new(spec, params, axis.as_ref(), t, dt)?;
    let picker = match start {
        StartDistribution::Field(phi) => Some(field_picker(phi)?),
        _ => None,
    };
    let trajectories = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i);
            let s = draw_start(start, picker.as_ref(), &mut rng);
            let mut steps = Vec::with_capacity(sampler.steps + 1);
            sampler.run(&mut rng, s, |x, p| steps.push((x, p)));
            Trajectory {
                dt: sampler.dt,
                steps,
                seed,
                index: i,
            }
        })
        .collect();
    Ok(TrajectoryEnsemble {
        trajectories,
        dt: sampler.dt,
        seed,
    })
}

/// Accumulates `Σ Z_i` along a path.
struct WeightAccumulator<'a> {
    field: &'a VectorField,
    dt: f64,
    hbar: f64,
    phase: f64,
    last: Option<(f64, f64)>,
}

impl WeightAccumulator<'_> {
    fn push(&mut self, x: f64, p: f64) {
        if let Some((x0, p0)) = self.last {
            // Z_i = abnΔt/ħ − (i/ħ)(H(x^i,p^i)Δt − (x^{i+1} − x^i)p^i)
            let h = self.field.hamiltonian(x0, p0);
            self.phase -= (h * self.dt - (x - x0) * p0) / self.hbar;
        }
        self.last = Some((x, p));
    }
}

/// Product of the per-step factors `e^{Z_i}` along `traj`.
///
/// The modulus is `e^{abn·t/ħ}` by construction and is returned directly in
/// log space.
pub fn complex_weight(traj: &Trajectory, spec: &HamiltonianSpec, params: &ModelParams) -> Result<ComplexWeight> {
    params.validate()?;
    let field = VectorField::new(spec, None)?;
    weight_with(&field, traj, params)
}

fn weight_with(field: &VectorField, traj: &Trajectory, params: &ModelParams) -> Result<ComplexWeight> {
    if traj.steps.iter().any(|(x, p)| !x.is_finite() || !p.is_finite()) {
        return Err(Error::NonFinite("trajectory"));
    }
    let mut acc = WeightAccumulator {
        field,
        dt: traj.dt,
        hbar: params.hbar,
        phase: 0.0,
        last: None,
    };
    for &(x, p) in &traj.steps {
        acc.push(x, p);
    }
    Ok(ComplexWeight {
        log_magnitude: params.normalizer_rate() * traj.duration(),
        phase: acc.phase,
    })
}

/// Monte Carlo estimate of the evolved field with per-bin diagnostics.
#[derive(Debug, Clone)]
pub struct McEstimate {
    pub estimate: PhaseWaveFunction,
    /// `√(se_re² + se_im²)` of each bin mean.
    pub stderr: Array2<f64>,
    pub counts: Array2<u64>,
    /// Phase-aware effective sample size `|Σw|² / Σ|w|²` per bin.
    pub ess: Array2<f64>,
    pub paths: usize,
    /// Paths that left the momentum window.
    pub escaped: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub paths: usize,
    pub escaped: u64,
    pub occupied_bins: usize,
    pub mean_stderr: f64,
    pub min_significant_ess: f64,
    /// Counts of occupied-bin stderr in decades `[10^k, 10^(k+1))`.
    pub stderr_histogram: Vec<(i32, usize)>,
}

impl McEstimate {
    pub fn occupied(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.counts.indexed_iter().filter(|(_, c)| **c > 0).map(|(ij, _)| ij)
    }

    /// Mean stderr over occupied bins.
    pub fn mean_stderr(&self) -> f64 {
        let (s, n) = self.occupied().fold((0.0, 0usize), |(s, n), ij| (s + self.stderr[ij], n + 1));
        if n == 0 {
            0.0
        } else {
            s / n as f64
        }
    }

    fn significant(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let max = self.estimate.values().iter().map(|z| z.norm()).fold(0.0, f64::max);
        self.estimate
            .values()
            .indexed_iter()
            .filter(move |(_, z)| max > 0.0 && z.norm() >= SIGNIFICANT_FRACTION * max)
            .map(|(ij, _)| ij)
    }

    pub fn min_significant_ess(&self) -> f64 {
        self.significant().map(|ij| self.ess[ij]).fold(f64::INFINITY, f64::min)
    }

    pub fn summary(&self) -> McSummary {
        let mut hist = std::collections::BTreeMap::new();
        for ij in self.occupied() {
            let s = self.stderr[ij];
            if s > 0.0 {
                *hist.entry(s.log10().floor() as i32).or_insert(0usize) += 1;
            }
        }
        McSummary {
            paths: self.paths,
            escaped: self.escaped,
            occupied_bins: self.occupied().count(),
            mean_stderr: self.mean_stderr(),
            min_significant_ess: self.min_significant_ess(),
            stderr_histogram: hist.into_iter().collect(),
        }
    }
}

pub fn write_summary_json<W: Write>(summary: &impl Serialize, w: W) -> Result<()> {
    serde_json::to_writer_pretty(w, summary).map_err(|e| Error::Format(e.to_string()))
}

#[derive(Clone)]
struct BinSums {
    sum: Array2<C64>,
    sum_re2: Array2<f64>,
    sum_im2: Array2<f64>,
    counts: Array2<u64>,
    escaped: u64,
}

impl BinSums {
    fn zeros(shape: (usize, usize)) -> Self {
        Self {
            sum: Array2::zeros(shape),
            sum_re2: Array2::zeros(shape),
            sum_im2: Array2::zeros(shape),
            counts: Array2::zeros(shape),
            escaped: 0,
        }
    }

    fn merge(mut self, other: &Self) -> Self {
        self.sum += &other.sum;
        self.sum_re2 += &other.sum_re2;
        self.sum_im2 += &other.sum_im2;
        self.counts += &other.counts;
        self.escaped += other.escaped;
        self
    }
}

/// Estimate `φ(x,p,t) = e^{abnt/ħ}·E[φ⁰(x⁰,p⁰)·F]` from `n` paths.
///
/// Start nodes are drawn from `|φ⁰|` on its grid and carry the phase
/// `φ⁰/|φ⁰|`; arrivals are deposited on the nearest node of `grid` and divided
/// by the cell area. Fails with `VarianceExplosion` when a bin holding at least
/// a tenth of the peak amplitude has an effective sample size below 10.
#[allow(clippy::too_many_arguments)]
pub fn mc_wavefunction(
    phi0: &PhaseWaveFunction,
    spec: &HamiltonianSpec,
    params: &ModelParams,
    t: f64,
    dt: f64,
    n: usize,
    seed: u64,
    grid: &PhaseGrid,
) -> Result<McEstimate> {
    if n == 0 {
        return Err(Error::InvalidParams("need at least one path".into()));
    }
    let axis = *phi0.grid().x_axis();
    let sampler = Sampler::new(spec, params, Some(&axis), t, dt)?;
    let picker = field_picker(phi0)?;
    let mass: f64 = phi0.values().iter().map(|z| z.norm()).sum::<f64>() * phi0.grid().cell();
    let scale = mass / grid.cell();
    let start = StartDistribution::Field(phi0.clone());
    let shape = grid.shape();

    let chunks: Vec<BinSums> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut sums = BinSums::zeros(shape);
            for i in (c * CHUNK)..((c + 1) * CHUNK).min(n) {
                let mut rng = path_rng(seed, i as u64);
                let (x0, p0) = draw_start(&start, Some(&picker), &mut rng);
                let node = phi0.grid().nearest_node(x0, p0).expect("start on grid");
                let z0 = phi0.values()[node];
                let mut acc = WeightAccumulator {
                    field: &sampler.field,
                    dt: sampler.dt,
                    hbar: params.hbar,
                    phase: 0.0,
                    last: None,
                };
                let mut end = (x0, p0);
                sampler.run(&mut rng, (x0, p0), |x, p| {
                    acc.push(x, p);
                    end = (x, p);
                });
                let w = C64::from_polar(scale, acc.phase) * (z0 / z0.norm());
                match grid.nearest_node(grid.x_axis().wrap(end.0), end.1) {
                    Some(ij) => {
                        sums.sum[ij] += w;
                        sums.sum_re2[ij] += w.re * w.re;
                        sums.sum_im2[ij] += w.im * w.im;
                        sums.counts[ij] += 1;
                    }
                    None => sums.escaped += 1,
                }
            }
            sums
        })
        .collect();
    let total = chunks.iter().fold(BinSums::zeros(shape), |a, b| a.merge(b));

    let nf = n as f64;
    let growth = (params.normalizer_rate() * sampler.dt * sampler.steps as f64).exp();
    let mut values = Array2::zeros(shape);
    let mut stderr = Array2::zeros(shape);
    let mut ess = Array2::zeros(shape);
    for ij in ndarray::indices(shape) {
        let s = total.sum[ij];
        let mean = s / nf;
        values[ij] = mean * growth;
        if nf > 1.0 {
            let var_re = (total.sum_re2[ij] - nf * mean.re * mean.re).max(0.0) / (nf - 1.0);
            let var_im = (total.sum_im2[ij] - nf * mean.im * mean.im).max(0.0) / (nf - 1.0);
            stderr[ij] = growth * ((var_re + var_im) / nf).sqrt();
        }
        let sq = total.sum_re2[ij] + total.sum_im2[ij];
        ess[ij] = if sq > 0.0 { s.norm_sqr() / sq } else { 0.0 };
    }
    let est = McEstimate {
        estimate: PhaseWaveFunction::new(*grid, values)?,
        stderr,
        counts: total.counts,
        ess,
        paths: n,
        escaped: total.escaped,
    };
    if let Some(ij) = est.significant().find(|ij| est.ess[*ij] < MIN_BIN_ESS) {
        return Err(Error::VarianceExplosion {
            ess: est.ess[ij],
            ix: ij.0,
            ip: ij.1,
        });
    }
    Ok(est)
}
