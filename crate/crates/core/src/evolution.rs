//! Full phase-space integrator (diffusion, rotation and transport under
//! Strang splitting) and the fast/slow diagnostic.

use std::io::Write;

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::diffusion::{check_diffusion_step, step_count, DiffusionPropagator};
use crate::effective::{solve_schrodinger_traced, ApproxTerms, HOperator};
use crate::error::{Error, Result};
use crate::model::{ConfigWaveFunction, HamiltonianSpec, ModelParams, PhaseWaveFunction};
use crate::projection::Projector;
use crate::transport::{rotation_multiplier, TransportPropagator};

/// Length of the initial transient excluded from slow-track comparisons, in
/// units of `ħ/(2ab)`.
pub const TRANSIENT_RELAXATION_UNITS: f64 = 10.0;

/// Precomputed Strang step
/// `D(h/2) · R(h/2) · T(h) · R(h/2) · D(h/2)`.
pub struct FullPropagator {
    diffusion: DiffusionPropagator,
    rotation: Array2<C64>,
    transport: TransportPropagator,
    step: f64,
}

impl FullPropagator {
    pub fn new(grid: &crate::model::PhaseGrid, spec: &HamiltonianSpec, params: &ModelParams, step: f64) -> Result<Self> {
        params.validate()?;
        params.require_1d()?;
        Ok(Self {
            diffusion: DiffusionPropagator::new(grid, params, 0.5 * step)?,
            rotation: rotation_multiplier(grid, spec, params, 0.5 * step)?,
            transport: TransportPropagator::new(grid, spec, step)?,
            step,
        })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn advance(&self, values: &mut Array2<C64>, steps: usize) {
        for _ in 0..steps {
            self.diffusion.advance(values, 1);
            *values *= &self.rotation;
            self.transport.apply(values);
            *values *= &self.rotation;
            self.diffusion.advance(values, 1);
        }
    }
}

fn plan(phi0: &PhaseWaveFunction, spec: &HamiltonianSpec, params: &ModelParams, t: f64, dt: f64) -> Result<(FullPropagator, usize)> {
    params.validate()?;
    params.require_1d()?;
    if phi0.grid().dim() != 1 {
        return Err(Error::UnsupportedDimension(phi0.grid().dim()));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParams(format!("t must be nonnegative, got {t}")));
    }
    check_diffusion_step(dt, params)?;
    let steps = step_count(t, dt);
    let h = if steps == 0 { dt } else { t / steps as f64 };
    Ok((FullPropagator::new(phi0.grid(), spec, params, h)?, steps))
}

/// Integrate the full phase-space equation up to `t` with steps of at most `dt`.
pub fn evolve_full(
    phi0: &PhaseWaveFunction,
    spec: &HamiltonianSpec,
    params: &ModelParams,
    t: f64,
    dt: f64,
) -> Result<PhaseWaveFunction> {
    let (prop, steps) = plan(phi0, spec, params, t, dt)?;
    let mut v = phi0.values().clone();
    prop.advance(&mut v, steps);
    Ok(PhaseWaveFunction::new(*phi0.grid(), v)?)
}

/// Record of a fast/slow run.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionTrace {
    pub times: Vec<f64>,
    /// `‖φ − lift(project(φ))‖ / ‖φ‖`.
    pub residuals: Vec<f64>,
    pub psi_track: Vec<ConfigWaveFunction>,
    pub norms: Vec<f64>,
    /// Phase-aligned relative distance between the projected state and the
    /// closed-form Schrödinger reference; `None` before the reference starts.
    pub slow_errors: Vec<Option<f64>>,
    /// Decay rate fitted to the residual during the transient.
    pub fast_decay_rate: Option<f64>,
    /// Largest slow-track error after the transient.
    pub slow_deviation: Option<f64>,
    /// Time at which the reference solution was started.
    pub reference_start: Option<f64>,
}

impl EvolutionTrace {
    /// Minimum residual over the run.
    pub fn min_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// First sampled time at which the residual is below `level`.
    pub fn time_below(&self, level: f64) -> Option<f64> {
        self.times
            .iter()
            .zip(&self.residuals)
            .find(|(_, r)| **r < level)
            .map(|(t, _)| *t)
    }
}

/// Least-squares slope of `ln v` against `t`, returned as a decay rate.
pub fn fit_decay_rate(times: &[f64], values: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(_, v)| **v > 0.0 && v.is_finite())
        .map(|(t, v)| (*t, v.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    (sxx > 0.0).then(|| -sxy / sxx)
}

/// Evolve with [`evolve_full`] while sampling every `sample_every` steps.
///
/// After the transient (`10·ħ/(2ab)`) the projected state at the next sample
/// seeds a split-step solution of the closed-form Schrödinger equation, and
/// every later sample is compared with it up to a global phase.
pub fn fast_slow_decompose(
    phi0: &PhaseWaveFunction,
    spec: &HamiltonianSpec,
    params: &ModelParams,
    t: f64,
    dt: f64,
    sample_every: usize,
) -> Result<EvolutionTrace> {
    let every = sample_every.max(1);
    let (prop, steps) = plan(phi0, spec, params, t, dt)?;
    let projector = Projector::new(phi0.grid(), params)?;
    let h = prop.step();

    let mut times = Vec::new();
    let mut residuals = Vec::new();
    let mut psi_track = Vec::new();
    let mut norms = Vec::new();
    let mut v = phi0.values().clone();
    let mut step = 0;
    loop {
        let phi = PhaseWaveFunction::new(*phi0.grid(), v.clone())?;
        let psi = projector.project_unchecked(&phi)?;
        let norm = phi.norm();
        let stationary = projector.lift(&psi)?;
        times.push(step as f64 * h);
        residuals.push(if norm == 0.0 { 0.0 } else { phi.distance(&stationary) / norm });
        norms.push(norm);
        psi_track.push(psi);
        if step >= steps {
            break;
        }
        let n = every.min(steps - step);
        prop.advance(&mut v, n);
        step += n;
    }

    let transient = TRANSIENT_RELAXATION_UNITS * params.hbar / (2.0 * params.relaxation_rate());
    let floor = 10.0 * residuals.iter().copied().fold(f64::INFINITY, f64::min);
    let (ft, fr): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(&residuals)
        .filter(|(t, r)| **t <= transient && **r > floor)
        .map(|(t, r)| (*t, *r))
        .unzip();
    let fast_decay_rate = fit_decay_rate(&ft, &fr);

    let mut slow_errors = vec![None; times.len()];
    let mut reference_start = None;
    if let (HamiltonianSpec::Separable { inv_mass, potential }, Some(start)) =
        (spec, times.iter().position(|t| *t >= transient * (1.0 - 1e-12)))
    {
        if *inv_mass > 0.0 && start + 1 < times.len() {
            let ref_params = ModelParams {
                mass: 1.0 / inv_mass,
                ..*params
            };
            let op = HOperator::Approx {
                potential: potential.clone(),
                terms: ApproxTerms::ALL,
            };
            let span = times[times.len() - 1] - times[start];
            let (states, _) = solve_schrodinger_traced(&psi_track[start], &op, span, h, &ref_params, every)?;
            for (k, reference) in states.iter().enumerate() {
                let i = start + k;
                if i < times.len() {
                    let rn = reference.norm();
                    slow_errors[i] = Some(if rn == 0.0 { 0.0 } else { psi_track[i].phase_aligned_distance(reference) / rn });
                }
            }
            reference_start = Some(times[start]);
        }
    }
    let slow_deviation = slow_errors.iter().flatten().copied().reduce(f64::max);
    Ok(EvolutionTrace {
        times,
        residuals,
        psi_track,
        norms,
        slow_errors,
        fast_decay_rate,
        slow_deviation,
        reference_start,
    })
}

/// CSV with columns `t,norm,residual,slow_error` (empty when unavailable).
pub fn write_trace_csv<W: Write>(trace: &EvolutionTrace, mut w: W) -> Result<()> {
    writeln!(w, "t,norm,residual,slow_error")?;
    for i in 0..trace.times.len() {
        let slow = trace.slow_errors[i].map(|e| e.to_string()).unwrap_or_default();
        writeln!(w, "{},{},{},{}", trace.times[i], trace.norms[i], trace.residuals[i], slow)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::evolve_diffusion;
    use crate::model::{GridSpec, PhaseGrid, Potential};
    use crate::transport::{liouville_step, phase_rotation_step};

    fn grid() -> PhaseGrid {
        PhaseGrid::new(GridSpec::square(64, 8.0), 1.0).unwrap()
    }

    fn field(g: PhaseGrid) -> PhaseWaveFunction {
        PhaseWaveFunction::from_fn(g, |x, p| {
            C64::from_polar((-(x - 0.5).powi(2) / 2.0 - (p + 0.3).powi(2) / 1.5).exp(), 0.4 * x - 0.2 * p)
        })
        .unwrap()
    }

    #[test]
    fn no_diffusion_reduces_to_transport_and_rotation() {
        let g = grid();
        let params = ModelParams { a: 0.0, b: 0.0, ..ModelParams::default() };
        let spec = HamiltonianSpec::harmonic(1.0, 0.9).unwrap();
        let phi0 = field(g);
        let dt = 0.05;
        let full = evolve_full(&phi0, &spec, &params, 0.5, dt).unwrap();
        let mut phi = phi0.clone();
        for _ in 0..10 {
            phi = phase_rotation_step(&phi, &spec, &params, 0.5 * dt).unwrap();
            phi = liouville_step(&phi, &spec, dt).unwrap();
            phi = phase_rotation_step(&phi, &spec, &params, 0.5 * dt).unwrap();
        }
        assert!(full.distance(&phi) < 1e-8 * phi.norm());
    }

    #[test]
    fn zero_hamiltonian_reduces_to_diffusion() {
        let g = grid();
        let params = ModelParams { a: 0.8, b: 1.2, ..ModelParams::default() };
        let phi0 = field(g);
        let dt = 0.02;
        let full = evolve_full(&phi0, &HamiltonianSpec::zero(), &params, 0.6, dt).unwrap();
        let diff = evolve_diffusion(&phi0, 0.6, 0.5 * dt, &params).unwrap();
        assert!(full.distance(&diff) < 1e-8 * diff.norm());
    }

    #[test]
    fn norm_is_nonincreasing() {
        let g = grid();
        let params = ModelParams::default();
        let spec = HamiltonianSpec::harmonic(1.0, 1.0).unwrap();
        let prop = FullPropagator::new(&g, &spec, &params, 0.02).unwrap();
        let mut v = field(g).into_values();
        let mut last = PhaseWaveFunction::new(g, v.clone()).unwrap().norm();
        for _ in 0..50 {
            prop.advance(&mut v, 1);
            let n = PhaseWaveFunction::new(g, v.clone()).unwrap().norm();
            assert!(n <= last * (1.0 + 1e-8));
            last = n;
        }
    }

    #[test]
    fn step_bounds_enforced() {
        let g = grid();
        let spec = HamiltonianSpec::free(1.0).unwrap();
        let params = ModelParams::default();
        assert!(matches!(
            evolve_full(&field(g), &spec, &params, 1.0, 0.5),
            Err(Error::StepTooLarge { .. })
        ));
        let params = ModelParams { a: 0.1, b: 0.1, ..params };
        assert!(matches!(
            evolve_full(&field(g), &spec, &params, 2.0, 1.0),
            Err(Error::CflViolation { .. })
        ));
    }

    #[test]
    fn decay_fit_recovers_exponent() {
        let t: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let v: Vec<f64> = t.iter().map(|t| 3.0 * (-2.5 * t).exp()).collect();
        assert!((fit_decay_rate(&t, &v).unwrap() - 2.5).abs() < 1e-12);
        assert!(fit_decay_rate(&t[..1], &v[..1]).is_none());
    }

    #[test]
    fn lifted_state_stays_on_the_slow_manifold() {
        let g = grid();
        let params = ModelParams { a: 4.0, b: 4.0, ..ModelParams::default() };
        let spec = HamiltonianSpec::harmonic(1.0, 0.5).unwrap();
        let pr = Projector::new(&g, &params).unwrap();
        let psi = ConfigWaveFunction::gaussian(*g.x_axis(), 1.0, 1.0, 0.0, 1.0).unwrap();
        let phi0 = pr.lift(&psi).unwrap();
        let trace = fast_slow_decompose(&phi0, &spec, &params, 1.0, 0.005, 20).unwrap();
        assert!(trace.residuals.iter().all(|r| *r < 1e-2));
        assert!(trace.slow_deviation.unwrap() < 0.1);
        let mut buf = Vec::new();
        write_trace_csv(&trace, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,norm,residual,slow_error\n0,"));
        assert_eq!(text.lines().count(), trace.times.len() + 1);
    }

    #[test]
    fn random_field_relaxes_quickly() {
        let g = grid();
        let params = ModelParams { a: 3.0, b: 3.0, ..ModelParams::default() };
        let spec = HamiltonianSpec::separable(1.0, Potential::Harmonic { stiffness: 0.25 }).unwrap();
        let phi0 = PhaseWaveFunction::from_fn(g, |x, p| {
            C64::new((-(x * x) / 3.0 - p * p / 2.0).exp() * (1.0 + 0.5 * (2.0 * p).sin()), 0.3 * x * (-(x * x) - p * p).exp())
        })
        .unwrap();
        let trace = fast_slow_decompose(&phi0, &spec, &params, 0.5, 0.005, 2).unwrap();
        assert!(trace.residuals[0] > 0.1);
        let t = trace.time_below(1e-2).unwrap();
        assert!(t <= 5.0 / (2.0 * 9.0) + 1e-9, "{t}");
        let rate = trace.fast_decay_rate.unwrap();
        assert!(rate > 9.0, "{rate}");
    }
}
