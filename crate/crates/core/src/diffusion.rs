//! The gauge-twisted diffusion generator
//! `Δφ = a²(∂ₓ − ip/ħ)²φ + b²∂²ₚφ + (abn/ħ)φ`, its semigroup, and a
//! finite-difference eigensolver that serves as an independent oracle.
//!
//! After a Fourier transform in `x` the generator splits into independent rows
//! `L_k g = −a²(k − p/ħ)² g + b² g″ + (ab/ħ) g`, each a harmonic oscillator in
//! `p − ħk` with eigenvalues `−2j·ab/ħ`.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, Axis};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{ModelParams, PhaseGrid, PhaseWaveFunction};
use crate::spectral::{transform_axis0, transform_axis1, Fft1d};

/// Largest admissible step in units of `ħ/(ab)`.
pub const MAX_STEP_RELAXATION_UNITS: f64 = 0.1;

fn check_generator_inputs(grid: &PhaseGrid, params: &ModelParams) -> Result<()> {
    params.validate()?;
    params.require_1d()?;
    if grid.dim() != 1 {
        return Err(Error::UnsupportedDimension(grid.dim()));
    }
    grid.check_resolvable(params.hbar)
}

/// Apply `Δ_{a,b}` spectrally: `x` derivatives via the multiplier `ik` with the
/// gauge shift applied pointwise, `∂²ₚ` via the multiplier `−η²`.
pub fn apply_diffusion_generator(phi: &PhaseWaveFunction, params: &ModelParams) -> Result<PhaseWaveFunction> {
    let grid = *phi.grid();
    check_generator_inputs(&grid, params)?;
    if params.a == 0.0 && params.b == 0.0 {
        return Ok(PhaseWaveFunction::zeros(grid));
    }
    let (nx, np) = grid.shape();
    let (a2, b2, hbar) = (params.a * params.a, params.b * params.b, params.hbar);
    let ks = grid.x_axis().wavenumbers();
    let etas = grid.momentum_wavenumbers();
    let ps = grid.ps();

    let mut gauge = phi.values().clone();
    let fx = Fft1d::new(nx);
    transform_axis0(&mut gauge, &fx, false);
    for ((m, l), z) in gauge.indexed_iter_mut() {
        let q = ks[m] - ps[l] / hbar;
        *z *= -a2 * q * q;
    }
    transform_axis0(&mut gauge, &fx, true);

    let mut mom = phi.values().clone();
    let fp = Fft1d::new(np);
    transform_axis1(&mut mom, &fp, false);
    for ((_, l), z) in mom.indexed_iter_mut() {
        *z *= -b2 * etas[l] * etas[l];
    }
    transform_axis1(&mut mom, &fp, true);

    let c = params.normalizer_rate();
    let mut out = gauge;
    ndarray::Zip::from(&mut out)
        .and(&mom)
        .and(phi.values())
        .for_each(|o, &m, &f| *o += m + c * f);
    Ok(PhaseWaveFunction::from_raw(grid, out))
}

/// Strang propagator for the diffusion equation with a fixed step.
///
/// Each step is `G(h/2) · P(h) · G(h/2)` where `G` is the gauge multiplier
/// `exp(−a²(k − p/ħ)²·)` in `(k, p)` and `P` the momentum heat kernel
/// `exp(−b²η²·)`. The scalar growth factor is `exp(n·asinh(abh/ħ))`, the exact
/// inverse of the split step's top eigenvalue, so stationary states keep their
/// amplitude and the step is a contraction.
#[derive(Clone)]
pub struct DiffusionPropagator {
    grid: PhaseGrid,
    step: f64,
    gauge_half: Array2<f64>,
    gauge_full: Array2<f64>,
    momentum: Vec<f64>,
    scalar: f64,
    fx: Fft1d,
    fp: Fft1d,
    identity: bool,
}

impl DiffusionPropagator {
    pub fn new(grid: &PhaseGrid, params: &ModelParams, step: f64) -> Result<Self> {
        check_generator_inputs(grid, params)?;
        if !(step >= 0.0 && step.is_finite()) {
            return Err(Error::InvalidParams(format!("step must be nonnegative, got {step}")));
        }
        let (nx, np) = grid.shape();
        let (a2, b2, hbar) = (params.a * params.a, params.b * params.b, params.hbar);
        let ks = grid.x_axis().wavenumbers();
        let ps = grid.ps();
        let gauge = |h: f64| {
            Array2::from_shape_fn((nx, np), |(m, l)| {
                let q = ks[m] - ps[l] / hbar;
                (-a2 * q * q * h).exp()
            })
        };
        let momentum = grid
            .momentum_wavenumbers()
            .iter()
            .map(|eta| (-b2 * eta * eta * step).exp())
            .collect();
        let tau = params.relaxation_rate() * step;
        Ok(Self {
            grid: *grid,
            step,
            gauge_half: gauge(0.5 * step),
            gauge_full: gauge(step),
            momentum,
            scalar: (params.n as f64 * tau.asinh()).exp(),
            fx: Fft1d::new(nx),
            fp: Fft1d::new(np),
            identity: params.a == 0.0 && params.b == 0.0,
        })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Apply `steps` consecutive Strang steps to a field stored in `(x, p)`.
    pub fn advance(&self, values: &mut Array2<C64>, steps: usize) {
        if steps == 0 || self.identity {
            return;
        }
        transform_axis0(values, &self.fx, false);
        self.advance_spectral(values, steps);
        transform_axis0(values, &self.fx, true);
    }

    /// Same as [`advance`](Self::advance) for a field already in `(k, p)`.
    pub fn advance_spectral(&self, values: &mut Array2<C64>, steps: usize) {
        if steps == 0 || self.identity {
            return;
        }
        let growth = self.scalar.powi(steps as i32);
        values
            .axis_iter_mut(Axis(0))
            .into_par_iter()
            .enumerate()
            .for_each(|(m, mut row)| {
                let row = row.as_slice_mut().expect("standard layout");
                let half = self.gauge_half.row(m);
                let full = self.gauge_full.row(m);
                for (z, g) in row.iter_mut().zip(half.iter()) {
                    *z *= *g;
                }
                for s in 0..steps {
                    self.fp.forward(row);
                    for (z, w) in row.iter_mut().zip(&self.momentum) {
                        *z *= *w;
                    }
                    self.fp.inverse(row);
                    let g = if s + 1 < steps { &full } else { &half };
                    for (z, w) in row.iter_mut().zip(g.iter()) {
                        *z *= *w;
                    }
                }
                for z in row.iter_mut() {
                    *z *= growth;
                }
            });
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }
}

/// Number of uniform steps covering `t` with steps no longer than `dt`.
pub fn step_count(t: f64, dt: f64) -> usize {
    if t == 0.0 {
        return 0;
    }
    let r = t / dt;
    let n = r.round();
    if (r - n).abs() <= 1e-9 * r.max(1.0) {
        n.max(1.0) as usize
    } else {
        r.ceil() as usize
    }
}

/// Reject steps longer than `0.1ħ/(ab)`.
pub fn check_diffusion_step(dt: f64, params: &ModelParams) -> Result<()> {
    let rate = params.relaxation_rate();
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParams(format!("dt must be positive, got {dt}")));
    }
    if rate > 0.0 {
        let bound = MAX_STEP_RELAXATION_UNITS / rate;
        if dt > bound * (1.0 + 1e-12) {
            return Err(Error::StepTooLarge { dt, bound });
        }
    }
    Ok(())
}

/// Solve `∂φ/∂t = Δ_{a,b}φ` up to time `t` with steps of at most `dt`.
pub fn evolve_diffusion(
    phi0: &PhaseWaveFunction,
    t: f64,
    dt: f64,
    params: &ModelParams,
) -> Result<PhaseWaveFunction> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParams(format!("t must be nonnegative, got {t}")));
    }
    check_diffusion_step(dt, params)?;
    let steps = step_count(t, dt);
    let h = if steps == 0 { 0.0 } else { t / steps as f64 };
    let prop = DiffusionPropagator::new(phi0.grid(), params, h)?;
    let mut v = phi0.values().clone();
    prop.advance(&mut v, steps);
    Ok(PhaseWaveFunction::from_raw(*phi0.grid(), v))
}

/// Top of the spectrum of `L_k` from a dense finite-difference eigensolve.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSpectrum {
    pub k_mode: f64,
    /// Descending eigenvalues, Richardson-extrapolated over grid doublings.
    pub eigenvalues: Vec<f64>,
    /// Centre `ħk` of the ground-state Gaussian in `p`.
    pub ground_center: f64,
    /// Width `s` of the ground state `exp(−(p − ħk)²/(2s²))`, `s² = ħb/a`.
    pub ground_width: f64,
    /// Finest-grid momentum nodes and the unit-norm ground eigenvector.
    pub ground_nodes: Vec<f64>,
    pub ground_state: Vec<f64>,
    /// Change of the extrapolated eigenvalues under the last grid doubling.
    pub convergence_shift: f64,
}

impl DiffusionSpectrum {
    /// Distance between the two leading eigenvalues.
    pub fn gap(&self) -> Option<f64> {
        (self.eigenvalues.len() >= 2).then(|| self.eigenvalues[0] - self.eigenvalues[1])
    }
}

/// Grid sizes (`N + 1` intervals) used by the Richardson sequence.
const SPECTRUM_INTERVALS: [usize; 4] = [64, 128, 256, 512];
const SPECTRUM_SHIFT_TOL: f64 = 1e-6;

struct FdLevel {
    eigenvalues: Vec<f64>,
    nodes: Vec<f64>,
    ground: Vec<f64>,
}

fn fd_level(params: &ModelParams, k: f64, levels: usize, half_width: f64, intervals: usize) -> FdLevel {
    let n = intervals - 1;
    let h = 2.0 * half_width / intervals as f64;
    let center = params.hbar * k;
    let nodes: Vec<f64> = (1..=n).map(|i| center - half_width + i as f64 * h).collect();
    let (a2, b2) = (params.a * params.a, params.b * params.b);
    let c = params.normalizer_rate();
    let off = b2 / (h * h);
    let m = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            let q = k - nodes[i] / params.hbar;
            -a2 * q * q - 2.0 * off + c
        } else if i.abs_diff(j) == 1 {
            off
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let eigenvalues = order.iter().take(levels).map(|&i| eig.eigenvalues[i]).collect();
    let col = eig.eigenvectors.column(order[0]);
    let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
    let sign = if col.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    let ground = col.iter().map(|v| sign * v / norm).collect();
    FdLevel {
        eigenvalues,
        nodes,
        ground,
    }
}

/// Diagonalise `L_k` on a momentum window centred at `ħk`.
///
/// The window half-width is `max(8, √(2·levels+1) + 6)` ground-state widths,
/// the Laplacian is the plain three-point stencil with Dirichlet ends, and
/// eigenvalues from successive grid doublings are combined by Richardson
/// extrapolation in `h²`.
pub fn diffusion_spectrum(params: &ModelParams, k_mode: f64, n_levels: usize) -> Result<DiffusionSpectrum> {
    params.validate()?;
    params.require_1d()?;
    params.require_kernel()?;
    if n_levels == 0 {
        return Err(Error::InvalidParams("n_levels must be at least 1".into()));
    }
    if !k_mode.is_finite() {
        return Err(Error::NonFinite("k_mode"));
    }
    let width = (params.hbar * params.b / params.a).sqrt();
    let half_width = width * 8f64.max(((2 * n_levels + 1) as f64).sqrt() + 6.0);
    let fd: Vec<FdLevel> = SPECTRUM_INTERVALS
        .iter()
        .map(|&n| fd_level(params, k_mode, n_levels, half_width, n))
        .collect();

    // Romberg tableau per level; the error estimate compares the two most
    // extrapolated values that use the finest grid.
    let mut eigenvalues = Vec::with_capacity(n_levels);
    let mut shift: f64 = 0.0;
    for lvl in 0..n_levels {
        let mut col: Vec<f64> = fd.iter().map(|f| f.eigenvalues[lvl]).collect();
        let mut prev = col[col.len() - 1];
        for r in 1..SPECTRUM_INTERVALS.len() {
            prev = col[col.len() - 1];
            let factor = 4f64.powi(r as i32);
            col = col
                .windows(2)
                .map(|w| (factor * w[1] - w[0]) / (factor - 1.0))
                .collect();
        }
        let best = col[0];
        shift = shift.max((best - prev).abs());
        eigenvalues.push(best);
    }
    let scale = params.relaxation_rate().max(f64::MIN_POSITIVE);
    if shift > SPECTRUM_SHIFT_TOL * scale {
        return Err(Error::ConvergenceFailure { shift });
    }
    let finest = fd.last().expect("non-empty");
    Ok(DiffusionSpectrum {
        k_mode,
        eigenvalues,
        ground_center: params.hbar * k_mode,
        ground_width: width,
        ground_nodes: finest.nodes.clone(),
        ground_state: finest.ground.clone(),
        convergence_shift: shift,
    })
}

/// CSV export with columns `k_mode,level_index,eigenvalue`.
pub fn write_spectrum_csv<W: Write>(spectra: &[DiffusionSpectrum], mut w: W) -> Result<()> {
    writeln!(w, "k_mode,level_index,eigenvalue")?;
    for s in spectra {
        for (i, e) in s.eigenvalues.iter().enumerate() {
            writeln!(w, "{},{},{}", s.k_mode, i, e)?;
        }
    }
    Ok(())
}
