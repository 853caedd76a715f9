//! Lift/projection between configuration-space and phase-space wave functions,
//! and the two probability densities built from them.
//!
//! The lift `ψ ↦ φ(x,p) = (2πħ)^{-1/2} ∫ ψ(y) χ(x,y) e^{-i(y-x)p/ħ} dy` and the
//! projection (its adjoint) are evaluated by trapezoid quadrature on the periodic
//! x-grid with `y − x` taken to the nearest periodic image. The projection is
//! the exact discrete adjoint of the lift, so `lift ∘ project` is Hermitian.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{ConfigWaveFunction, ModelParams, PhaseGrid, PhaseWaveFunction, XAxis};
use crate::spectral::{self, Fft1d};

/// Relative magnitude a field may keep on the momentum edges before projection refuses it.
pub const BOUNDARY_DECAY_TOL: f64 = 1e-8;

/// Offsets whose kernel weight falls below this fraction of `χ(0)` are skipped.
const KERNEL_CUTOFF: f64 = 1e-17;

/// Gaussian kernel `χ(x,y) = (b/(aπħ))^{n/4} exp(−b(x−y)²/(2aħ))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiKernel {
    params: ModelParams,
    prefactor: f64,
    rate: f64,
}

impl ChiKernel {
    pub fn new(params: &ModelParams) -> Result<Self> {
        params.validate()?;
        params.require_kernel()?;
        let (a, b, hbar) = (params.a, params.b, params.hbar);
        Ok(Self {
            params: *params,
            prefactor: (b / (a * PI * hbar)).powf(params.n as f64 / 4.0),
            rate: b / (2.0 * a * hbar),
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Kernel as a function of the separation `x − y`.
    pub fn at(&self, d: f64) -> f64 {
        self.prefactor * (-self.rate * d * d).exp()
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        self.at(x - y)
    }

    /// Variance `aħ/(2b)` of `χ²(·, y)`.
    pub fn variance(&self) -> f64 {
        1.0 / (4.0 * self.rate)
    }
}

/// Evaluate `χ(x, y)`.
pub fn chi_kernel(x: f64, y: f64, params: &ModelParams) -> Result<f64> {
    Ok(ChiKernel::new(params)?.value(x, y))
}

/// Precomputed quadrature tables for lifting and projecting on one grid.
#[derive(Debug, Clone)]
pub struct Projector {
    grid: PhaseGrid,
    params: ModelParams,
    offsets: Vec<usize>,
    /// `table[o][l] = (2πħ)^{-1/2} Δx χ(d_o) e^{-i d_o p_l/ħ}` for active offsets.
    table: Vec<Vec<C64>>,
}

impl Projector {
    pub fn new(grid: &PhaseGrid, params: &ModelParams) -> Result<Self> {
        params.require_1d()?;
        let chi = ChiKernel::new(params)?;
        grid.check_resolvable(params.hbar)?;
        let width = grid.x_axis().length();
        let required = 12.0 * chi.variance().sqrt();
        if width < required {
            return Err(Error::DomainTooNarrow { width, required });
        }
        let ax = grid.x_axis();
        let nx = grid.nx();
        let ps = grid.ps();
        let c = ax.dx() / (2.0 * PI * params.hbar).sqrt();
        let chi0 = chi.at(0.0);
        let mut offsets = Vec::new();
        let mut table = Vec::new();
        for m in 0..nx {
            let d = ax.wrap_difference(m as f64 * ax.dx());
            let w = chi.at(d);
            if w < KERNEL_CUTOFF * chi0 {
                continue;
            }
            offsets.push(m);
            table.push(
                ps.iter()
                    .map(|&p| C64::from_polar(c * w, -d * p / params.hbar))
                    .collect(),
            );
        }
        Ok(Self {
            grid: *grid,
            params: *params,
            offsets,
            table,
        })
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    fn check_axis(&self, axis: &XAxis) -> Result<()> {
        if axis != self.grid.x_axis() {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", self.grid.x_axis()),
                got: format!("{axis:?}"),
            });
        }
        Ok(())
    }

    /// Phase-space wave function of the stationary family parameterised by `psi`.
    pub fn lift(&self, psi: &ConfigWaveFunction) -> Result<PhaseWaveFunction> {
        self.check_axis(psi.axis())?;
        let (nx, np) = self.grid.shape();
        let src = psi.values();
        let rows: Vec<Vec<C64>> = (0..nx)
            .into_par_iter()
            .map(|j| {
                let mut row = vec![C64::new(0.0, 0.0); np];
                for (&m, t) in self.offsets.iter().zip(&self.table) {
                    let s = src[(j + m) % nx];
                    if s == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for (r, w) in row.iter_mut().zip(t) {
                        *r += s * w;
                    }
                }
                row
            })
            .collect();
        let values = Array2::from_shape_vec((nx, np), rows.concat()).expect("shape");
        Ok(PhaseWaveFunction::from_raw(self.grid, values))
    }

    /// Projection onto the configuration-space parameter, after checking that
    /// the field decays at the momentum boundaries.
    pub fn project(&self, phi: &PhaseWaveFunction) -> Result<ConfigWaveFunction> {
        let ratio = phi.boundary_ratio();
        if ratio > BOUNDARY_DECAY_TOL {
            return Err(Error::BoundaryDecay { ratio });
        }
        self.project_unchecked(phi)
    }

    /// [`Projector::project`] without the boundary-decay check.
    pub fn project_unchecked(&self, phi: &PhaseWaveFunction) -> Result<ConfigWaveFunction> {
        if phi.grid() != &self.grid {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", self.grid.spec()),
                got: format!("{:?}", phi.grid().spec()),
            });
        }
        let nx = self.grid.nx();
        let dp = self.grid.dp();
        let v = phi.values();
        let out: Vec<C64> = (0..nx)
            .into_par_iter()
            .map(|i| {
                let mut acc = C64::new(0.0, 0.0);
                for (&m, t) in self.offsets.iter().zip(&self.table) {
                    let j = (i + nx - m) % nx;
                    let row = v.row(j);
                    let s: C64 = row.iter().zip(t).map(|(f, w)| f * w.conj()).sum();
                    acc += s;
                }
                acc * dp
            })
            .collect();
        Ok(ConfigWaveFunction::from_raw(*self.grid.x_axis(), out))
    }

    /// `lift(project(φ))` without the boundary check.
    pub fn stationary_part(&self, phi: &PhaseWaveFunction) -> Result<PhaseWaveFunction> {
        self.lift(&self.project_unchecked(phi)?)
    }

    /// Relative distance of `φ` to the stationary subspace.
    pub fn residual(&self, phi: &PhaseWaveFunction) -> Result<f64> {
        let n = phi.norm();
        if n == 0.0 {
            return Ok(0.0);
        }
        Ok(phi.distance(&self.stationary_part(phi)?) / n)
    }
}

/// Lift `psi` onto `grid`.
pub fn lift_to_phase(
    psi: &ConfigWaveFunction,
    grid: &PhaseGrid,
    params: &ModelParams,
) -> Result<PhaseWaveFunction> {
    Projector::new(grid, params)?.lift(psi)
}

/// Project `phi` onto its configuration-space parameter.
pub fn project_to_config(phi: &PhaseWaveFunction, params: &ModelParams) -> Result<ConfigWaveFunction> {
    Projector::new(phi.grid(), params)?.project(phi)
}

/// Real density on a phase grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDensity {
    pub grid: PhaseGrid,
    pub values: Array2<f64>,
}

impl PhaseDensity {
    pub fn total(&self) -> f64 {
        self.values.sum() * self.grid.cell()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `∫ ρ(x, p) dp` on the x-grid.
    pub fn marginal_x(&self) -> Vec<f64> {
        let dp = self.grid.dp();
        self.values.rows().into_iter().map(|r| r.sum() * dp).collect()
    }
}

/// `ρ(x,p) = |lift(ψ)(x,p)|²`.
///
/// With `normalize` set the input is scaled to unit norm first.
pub fn phase_density(
    psi: &ConfigWaveFunction,
    grid: &PhaseGrid,
    params: &ModelParams,
    normalize: bool,
) -> Result<PhaseDensity> {
    let psi = if normalize { psi.normalized() } else { psi.clone() };
    let phi = lift_to_phase(&psi, grid, params)?;
    Ok(PhaseDensity {
        grid: *grid,
        values: phi.values().mapv(|z| z.norm_sqr()),
    })
}

/// `ρ(x) = ∫ |ψ(y)|² χ²(x,y) dy`, a periodic convolution of `|ψ|²` with the
/// normal density of variance `aħ/(2b)`, applied as the Fourier multiplier
/// `exp(−σ²k²/2)`.
pub fn config_density(
    psi: &ConfigWaveFunction,
    params: &ModelParams,
    normalize: bool,
) -> Result<Vec<f64>> {
    params.require_1d()?;
    let var = ChiKernel::new(params)?.variance();
    let psi = if normalize { psi.normalized() } else { psi.clone() };
    let ax = psi.axis();
    let ks = ax.wavenumbers();
    let fft = Fft1d::new(ax.n);
    let mut buf: Vec<C64> = psi
        .values()
        .iter()
        .map(|z| C64::new(z.norm_sqr(), 0.0))
        .collect();
    fft.forward(&mut buf);
    for (z, k) in buf.iter_mut().zip(&ks) {
        *z *= (-0.5 * var * k * k).exp();
    }
    fft.inverse(&mut buf);
    Ok(buf.iter().map(|z| z.re).collect())
}

/// Momentum-space variance of a configuration wave function, computed spectrally.
pub fn momentum_variance(psi: &ConfigWaveFunction, hbar: f64) -> f64 {
    let ax = psi.axis();
    let (ks, amp) = spectral::fourier_transform(psi.values(), ax.x_min, ax.dx());
    let w: f64 = amp.iter().map(|z| z.norm_sqr()).sum();
    let mean: f64 = amp.iter().zip(&ks).map(|(z, k)| z.norm_sqr() * k).sum::<f64>() / w;
    let var: f64 = amp
        .iter()
        .zip(&ks)
        .map(|(z, k)| z.norm_sqr() * (k - mean) * (k - mean))
        .sum::<f64>()
        / w;
    var * hbar * hbar
}
