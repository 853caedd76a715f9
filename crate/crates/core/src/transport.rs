//! First-order part of the phase-space equation: Liouville transport along the
//! Hamiltonian flow and the pointwise phase rotation
//! `exp(−(i/ħ)(H − p·∂H/∂p)·dt)`.

use ndarray::{Array2, Axis};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{eval_hamiltonian, HamiltonianSpec, ModelParams, PhaseGrid, PhaseWaveFunction};
use crate::spectral::Fft1d;

/// Precomputed split-step transport for a separable Hamiltonian.
///
/// Per step: half x-advection `e^{−ik(p/m)dt/2}` at fixed `p`, full p-advection
/// with speed `−V′(x)` at fixed `x`, half x-advection. The composition is exact
/// whenever the force is constant.
#[derive(Clone)]
pub struct TransportPropagator {
    grid: PhaseGrid,
    x_half: Array2<C64>,
    p_full: Array2<C64>,
    fx: Fft1d,
    fp: Fft1d,
}

/// Largest x-displacement `dt·max|∂H/∂p|` of one transport step.
pub fn transport_shift(spec: &HamiltonianSpec, grid: &PhaseGrid, dt: f64) -> Result<f64> {
    let (inv_mass, _) = spec.as_separable()?;
    let p_max = grid.p_min().abs().max(grid.p_max().abs());
    Ok(dt.abs() * inv_mass.abs() * p_max)
}

pub(crate) fn check_cfl(spec: &HamiltonianSpec, grid: &PhaseGrid, dt: f64) -> Result<()> {
    let shift = transport_shift(spec, grid, dt)?;
    let limit = grid.x_axis().length() / 4.0;
    if shift > limit {
        return Err(Error::CflViolation { shift, limit });
    }
    Ok(())
}

impl TransportPropagator {
    pub fn new(grid: &PhaseGrid, spec: &HamiltonianSpec, dt: f64) -> Result<Self> {
        if !dt.is_finite() {
            return Err(Error::NonFinite("dt"));
        }
        let (inv_mass, potential) = spec.as_separable()?;
        check_cfl(spec, grid, dt)?;
        let (nx, np) = grid.shape();
        let ks = grid.x_axis().wavenumbers();
        let etas = grid.momentum_wavenumbers();
        let ps = grid.ps();
        let dv = potential.tables(grid.x_axis())?.dv;
        let x_half = Array2::from_shape_fn((nx, np), |(m, l)| {
            C64::from_polar(1.0, -ks[m] * inv_mass * ps[l] * 0.5 * dt)
        });
        // ṗ = −V′ shifts the profile forward: φ(p) → φ(p + V′dt).
        let p_full = Array2::from_shape_fn((nx, np), |(j, e)| C64::from_polar(1.0, etas[e] * dv[j] * dt));
        Ok(Self {
            grid: *grid,
            x_half,
            p_full,
            fx: Fft1d::new(nx),
            fp: Fft1d::new(np),
        })
    }

    fn x_advect(&self, values: &mut Array2<C64>) {
        let fx = &self.fx;
        values
            .axis_iter_mut(Axis(1))
            .into_par_iter()
            .zip(self.x_half.axis_iter(Axis(1)).into_par_iter())
            .for_each(|(mut col, mult)| {
                let mut buf: Vec<C64> = col.iter().copied().collect();
                fx.forward(&mut buf);
                for (z, w) in buf.iter_mut().zip(mult.iter()) {
                    *z *= *w;
                }
                fx.inverse(&mut buf);
                for (v, b) in col.iter_mut().zip(buf) {
                    *v = b;
                }
            });
    }

    fn p_advect(&self, values: &mut Array2<C64>) {
        let fp = &self.fp;
        values
            .axis_iter_mut(Axis(0))
            .into_par_iter()
            .zip(self.p_full.axis_iter(Axis(0)).into_par_iter())
            .for_each(|(mut row, mult)| {
                let row = row.as_slice_mut().expect("standard layout");
                fp.forward(row);
                for (z, w) in row.iter_mut().zip(mult.iter()) {
                    *z *= *w;
                }
                fp.inverse(row);
            });
    }

    pub fn apply(&self, values: &mut Array2<C64>) {
        self.x_advect(values);
        self.p_advect(values);
        self.x_advect(values);
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }
}

fn check_field(phi: &PhaseWaveFunction) -> Result<()> {
    if phi.grid().dim() != 1 {
        return Err(Error::UnsupportedDimension(phi.grid().dim()));
    }
    Ok(())
}

/// One transport step of length `dt` along `ẋ = ∂H/∂p`, `ṗ = −∂H/∂x`.
pub fn liouville_step(phi: &PhaseWaveFunction, spec: &HamiltonianSpec, dt: f64) -> Result<PhaseWaveFunction> {
    check_field(phi)?;
    let prop = TransportPropagator::new(phi.grid(), spec, dt)?;
    let mut v = phi.values().clone();
    prop.apply(&mut v);
    Ok(PhaseWaveFunction::from_raw(*phi.grid(), v))
}

/// Unimodular multiplier `exp(−(i/ħ)(H − p·∂H/∂p)·dt)` on the grid.
pub fn rotation_multiplier(
    grid: &PhaseGrid,
    spec: &HamiltonianSpec,
    params: &ModelParams,
    dt: f64,
) -> Result<Array2<C64>> {
    params.validate()?;
    let fields = eval_hamiltonian(spec, grid)?;
    let ps = grid.ps();
    let s = -dt / params.hbar;
    Ok(Array2::from_shape_fn(grid.shape(), |(j, l)| {
        let lag = fields.h[[j, l]] - ps[l] * fields.dh_dp[[j, l]];
        C64::from_polar(1.0, s * lag)
    }))
}

pub fn phase_rotation_step(
    phi: &PhaseWaveFunction,
    spec: &HamiltonianSpec,
    params: &ModelParams,
    dt: f64,
) -> Result<PhaseWaveFunction> {
    check_field(phi)?;
    if !dt.is_finite() {
        return Err(Error::NonFinite("dt"));
    }
    let mult = rotation_multiplier(phi.grid(), spec, params, dt)?;
    Ok(PhaseWaveFunction::from_raw(*phi.grid(), phi.values() * &mult))
}
