//! Effective configuration-space dynamics on the stationary subspace: the
//! integral operator obtained by sandwiching `H` between lifted states, its
//! small-`aħ/b` closed form, the smoothing perturbation, and a reference
//! Schrödinger solver.

use std::f64::consts::PI;
use std::io::Write;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{eval_hamiltonian, ConfigWaveFunction, HamiltonianSpec, ModelParams, PhaseGrid, Potential, XAxis};
use crate::projection::ChiKernel;
use crate::spectral::{spectral_derivative_complex, Fft1d};

/// Largest grid accepted by the dense integral operator.
pub const MAX_INTEGRAL_POINTS: usize = 128;
/// Bound on `dt` times the operator scale in [`solve_schrodinger`].
pub const MAX_PHASE_PER_STEP: f64 = 0.5;

/// Coefficient `−aħ/(4b)` of `V″` in the closed-form operator.
pub fn perturbation_prefactor(params: &ModelParams) -> f64 {
    if params.a == 0.0 {
        return 0.0;
    }
    -params.a * params.hbar / (4.0 * params.b)
}

/// Constant `3nbħ/(4ma)` of the closed-form operator.
pub fn zero_point_constant(params: &ModelParams) -> f64 {
    3.0 * params.n as f64 * params.b * params.hbar / (4.0 * params.mass * params.a)
}

/// Dense matrix of the integral operator on a coordinate axis.
///
/// `(Kψ)(y) = (2πħ)⁻¹ ∫ [H(x,p) − (∂ₓH + (ib/a)∂ₚH)(x − y′)] χ(x,y)χ(x,y′)
/// e^{i(y−y′)p/ħ} ψ(y′) dy′ dx dp`. The momentum quadrature runs over
/// `p = ħκ` for the axis wavenumbers `κ`, so the `p`-sum reproduces discrete
/// delta functions and spectral derivatives exactly. A tabulated `H` must be
/// sampled on that dual grid ([`PhaseGrid::dual`]).
#[derive(Debug, Clone)]
pub struct IntegralHamiltonian {
    axis: XAxis,
    matrix: Array2<C64>,
}

impl IntegralHamiltonian {
    pub fn new(axis: &XAxis, spec: &HamiltonianSpec, params: &ModelParams) -> Result<Self> {
        params.validate()?;
        params.require_1d()?;
        params.require_kernel()?;
        let n = axis.n;
        if n > MAX_INTEGRAL_POINTS {
            return Err(Error::GridTooLarge(n));
        }
        let hbar = params.hbar;
        let grid = PhaseGrid::dual(n, axis.x_min, axis.x_max, hbar)?;
        let fields = eval_hamiltonian(spec, &grid)?;
        let chi = ChiKernel::new(params)?;
        let dx = axis.dx();
        let dp = grid.dp();
        let ps = grid.ps();
        let ratio = params.b / params.a;

        // Momentum sums per node x_k and lattice offset s = (i − j) mod n:
        // A = Σ H e^{isΔx p/ħ}Δp, B = Σ ∂ₚH e^{…}Δp, C = Σ ∂ₓH e^{…}Δp.
        let phase: Vec<Vec<C64>> = (0..n)
            .map(|s| {
                let d = s as f64 * dx;
                ps.iter().map(|p| C64::from_polar(dp, d * p / hbar)).collect()
            })
            .collect();
        let sums = |table: &Array2<f64>| -> Array2<C64> {
            Array2::from_shape_fn((n, n), |(k, s)| {
                table
                    .row(k)
                    .iter()
                    .zip(&phase[s])
                    .map(|(h, e)| e * *h)
                    .sum()
            })
        };
        let a_sum = sums(&fields.h);
        let b_sum = sums(&fields.dh_dp);
        let c_sum = sums(&fields.dh_dx);

        let xs = axis.points();
        // χ(x_k − y_j) and the wrapped lever arm x_k − y_j, indexed [k][j].
        let lever: Vec<Vec<f64>> = (0..n)
            .map(|k| (0..n).map(|j| axis.wrap_difference(xs[k] - xs[j])).collect())
            .collect();
        let weight: Vec<Vec<f64>> = lever.iter().map(|row| row.iter().map(|d| chi.at(*d)).collect()).collect();
        let norm = dx * dx / (2.0 * PI * hbar);
        let rows: Vec<Vec<C64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let s = (i + n - j) % n;
                        let mut acc = C64::new(0.0, 0.0);
                        for k in 0..n {
                            let w = weight[k][i] * weight[k][j];
                            if w == 0.0 {
                                continue;
                            }
                            let slope = c_sum[[k, s]] + C64::new(0.0, ratio) * b_sum[[k, s]];
                            acc += (a_sum[[k, s]] - slope * lever[k][j]) * w;
                        }
                        acc * norm
                    })
                    .collect()
            })
            .collect();
        let matrix = Array2::from_shape_fn((n, n), |(i, j)| rows[i][j]);
        Ok(Self { axis: *axis, matrix })
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.matrix
    }

    pub fn axis(&self) -> &XAxis {
        &self.axis
    }

    pub fn apply(&self, psi: &ConfigWaveFunction) -> Result<ConfigWaveFunction> {
        if psi.axis() != &self.axis {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", self.axis),
                got: format!("{:?}", psi.axis()),
            });
        }
        Ok(ConfigWaveFunction::from_raw(self.axis, self.mul(psi.values())))
    }

    fn mul(&self, v: &[C64]) -> Vec<C64> {
        self.matrix
            .outer_iter()
            .map(|row| row.iter().zip(v).map(|(m, x)| m * x).sum())
            .collect()
    }

    /// `‖K − K†‖_F / ‖K + K†‖_F`.
    pub fn anti_hermitian_residual(&self) -> f64 {
        let n = self.matrix.nrows();
        let (mut anti, mut herm) = (0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let (u, v) = (self.matrix[[i, j]], self.matrix[[j, i]].conj());
                anti += (u - v).norm_sqr();
                herm += (u + v).norm_sqr();
            }
        }
        if herm == 0.0 {
            0.0
        } else {
            (anti / herm).sqrt()
        }
    }

    /// Upper bound on the spectral radius (largest absolute row sum).
    pub fn spectral_radius_bound(&self) -> f64 {
        self.matrix
            .outer_iter()
            .map(|row| row.iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

pub fn apply_h_integral(
    psi: &ConfigWaveFunction,
    spec: &HamiltonianSpec,
    params: &ModelParams,
) -> Result<ConfigWaveFunction> {
    IntegralHamiltonian::new(psi.axis(), spec, params)?.apply(psi)
}

/// Which terms of the closed-form operator to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ApproxTerms {
    pub perturbation: bool,
    pub constant: bool,
}

impl ApproxTerms {
    pub const ALL: Self = Self {
        perturbation: true,
        constant: true,
    };
    pub const STANDARD: Self = Self {
        perturbation: false,
        constant: false,
    };
}

/// Multiplicative part `V − (aħ/4b)V″ + 3nbħ/(4ma)` with the selected terms.
pub fn effective_potential(
    potential: &Potential,
    axis: &XAxis,
    params: &ModelParams,
    terms: ApproxTerms,
) -> Result<Vec<f64>> {
    params.validate()?;
    let tables = potential.tables(axis)?;
    let pre = if terms.perturbation { perturbation_prefactor(params) } else { 0.0 };
    let c = if terms.constant {
        params.require_kernel()?;
        zero_point_constant(params)
    } else {
        0.0
    };
    Ok(tables.v.iter().zip(&tables.d2v).map(|(v, d2)| v + pre * d2 + c).collect())
}

fn apply_approx_terms(
    psi: &ConfigWaveFunction,
    potential: &Potential,
    params: &ModelParams,
    terms: ApproxTerms,
) -> Result<ConfigWaveFunction> {
    let axis = *psi.axis();
    let v = effective_potential(potential, &axis, params, terms)?;
    let d2 = spectral_derivative_complex(psi.values(), axis.length(), 2);
    let kin = -params.hbar * params.hbar / (2.0 * params.mass);
    let out = psi
        .values()
        .iter()
        .zip(d2)
        .zip(&v)
        .map(|((z, dd), v)| dd * kin + z * *v)
        .collect();
    Ok(ConfigWaveFunction::from_raw(axis, out))
}

/// `−(ħ²/2m)ψ″ + Vψ − (aħ/(4b))V″ψ + (3nbħ/(4ma))ψ` with spectral derivatives.
pub fn apply_h_approx(
    psi: &ConfigWaveFunction,
    potential: &Potential,
    params: &ModelParams,
) -> Result<ConfigWaveFunction> {
    apply_approx_terms(psi, potential, params, ApproxTerms::ALL)
}

/// First-order energy shift `⟨ψ| −(aħ/(4b))V″ |ψ⟩ / ⟨ψ|ψ⟩`.
pub fn perturbation_shift(psi: &ConfigWaveFunction, potential: &Potential, params: &ModelParams) -> Result<f64> {
    params.validate()?;
    let pre = perturbation_prefactor(params);
    if pre == 0.0 {
        return Ok(0.0);
    }
    let d2v = potential.tables(psi.axis())?.d2v;
    let w: f64 = psi.values().iter().map(|z| z.norm_sqr()).sum();
    if w == 0.0 {
        return Err(Error::InvalidParams("wave function is zero".into()));
    }
    let e: f64 = psi.values().iter().zip(&d2v).map(|(z, d)| z.norm_sqr() * d).sum();
    Ok(pre * e / w)
}

/// Operator driving [`solve_schrodinger`].
#[derive(Debug, Clone, PartialEq)]
pub enum HOperator {
    /// Closed form with mass `params.mass`; split-step Fourier.
    Approx { potential: Potential, terms: ApproxTerms },
    /// Dense integral operator; classical RK4.
    Integral { spec: HamiltonianSpec },
}

/// One sample of a Schrödinger run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchrodingerSample {
    pub t: f64,
    pub norm: f64,
    /// `|⟨ψ₀, ψ(t)⟩| / (‖ψ₀‖‖ψ(t)‖)`.
    pub overlap: f64,
    /// `Re⟨ψ, Ĥψ⟩ / ⟨ψ, ψ⟩`.
    pub energy: f64,
}

enum Stepper {
    Split {
        half_potential: Vec<C64>,
        kinetic: Vec<C64>,
        fft: Fft1d,
    },
    Rk4 {
        op: IntegralHamiltonian,
        dt: f64,
        hbar: f64,
    },
}

impl Stepper {
    fn step(&self, v: &mut Vec<C64>) {
        match self {
            Stepper::Split {
                half_potential,
                kinetic,
                fft,
            } => {
                v.iter_mut().zip(half_potential).for_each(|(z, w)| *z *= w);
                fft.forward(v);
                v.iter_mut().zip(kinetic).for_each(|(z, w)| *z *= w);
                fft.inverse(v);
                v.iter_mut().zip(half_potential).for_each(|(z, w)| *z *= w);
            }
            Stepper::Rk4 { op, dt, hbar } => {
                // ψ′ = −(i/ħ)Kψ
                let c = C64::new(0.0, -1.0 / hbar);
                let f = |x: &[C64]| -> Vec<C64> { op.mul(x).into_iter().map(|z| z * c).collect() };
                let axpy = |s: f64, k: &[C64]| -> Vec<C64> { v.iter().zip(k).map(|(a, b)| a + b * s).collect() };
                let k1 = f(v);
                let k2 = f(&axpy(0.5 * dt, &k1));
                let k3 = f(&axpy(0.5 * dt, &k2));
                let k4 = f(&axpy(*dt, &k3));
                for i in 0..v.len() {
                    v[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0);
                }
            }
        }
    }
}

struct Solver {
    stepper: Stepper,
    steps: usize,
    h: f64,
}

fn build_solver(
    axis: &XAxis,
    op: &HOperator,
    t: f64,
    dt: f64,
    params: &ModelParams,
) -> Result<Solver> {
    params.validate()?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParams(format!("t must be nonnegative, got {t}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParams(format!("dt must be positive, got {dt}")));
    }
    let steps = crate::diffusion::step_count(t, dt);
    let h = if steps == 0 { dt } else { t / steps as f64 };
    let hbar = params.hbar;
    let stepper = match op {
        HOperator::Approx { potential, terms } => {
            let v = effective_potential(potential, axis, params, *terms)?;
            let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs())) / hbar;
            if dt * scale > MAX_PHASE_PER_STEP {
                return Err(Error::StepTooLarge {
                    dt,
                    bound: MAX_PHASE_PER_STEP / scale,
                });
            }
            let kin = hbar / (2.0 * params.mass);
            Stepper::Split {
                half_potential: v.iter().map(|v| C64::from_polar(1.0, -0.5 * h * v / hbar)).collect(),
                kinetic: axis
                    .wavenumbers()
                    .iter()
                    .map(|k| C64::from_polar(1.0, -h * kin * k * k))
                    .collect(),
                fft: Fft1d::new(axis.n),
            }
        }
        HOperator::Integral { spec } => {
            let op = IntegralHamiltonian::new(axis, spec, params)?;
            let rho = op.spectral_radius_bound() / hbar;
            if dt * rho > MAX_PHASE_PER_STEP {
                return Err(Error::StepTooLarge {
                    dt,
                    bound: MAX_PHASE_PER_STEP / rho,
                });
            }
            Stepper::Rk4 { op, dt: h, hbar }
        }
    };
    Ok(Solver { stepper, steps, h })
}

fn energy_of(psi: &ConfigWaveFunction, op: &HOperator, params: &ModelParams) -> Result<f64> {
    let hpsi = match op {
        HOperator::Approx { potential, terms } => apply_approx_terms(psi, potential, params, *terms)?,
        HOperator::Integral { spec } => apply_h_integral(psi, spec, params)?,
    };
    let w = psi.norm_sqr();
    Ok(if w == 0.0 { 0.0 } else { psi.inner(&hpsi).re / w })
}

/// Integrate `iħψ̇ = Ĥψ` up to `t` with steps of at most `dt`.
pub fn solve_schrodinger(
    psi0: &ConfigWaveFunction,
    op: &HOperator,
    t: f64,
    dt: f64,
    params: &ModelParams,
) -> Result<ConfigWaveFunction> {
    let solver = build_solver(psi0.axis(), op, t, dt, params)?;
    let mut v = psi0.values().to_vec();
    for _ in 0..solver.steps {
        solver.stepper.step(&mut v);
    }
    Ok(ConfigWaveFunction::from_raw(*psi0.axis(), v))
}

/// As [`solve_schrodinger`], also returning the states and diagnostics every
/// `sample_every` steps (and at `t = 0`).
pub fn solve_schrodinger_traced(
    psi0: &ConfigWaveFunction,
    op: &HOperator,
    t: f64,
    dt: f64,
    params: &ModelParams,
    sample_every: usize,
) -> Result<(Vec<ConfigWaveFunction>, Vec<SchrodingerSample>)> {
    let every = sample_every.max(1);
    let solver = build_solver(psi0.axis(), op, t, dt, params)?;
    let n0 = psi0.norm();
    let sample = |step: usize, psi: &ConfigWaveFunction| -> Result<SchrodingerSample> {
        let norm = psi.norm();
        let denom = n0 * norm;
        Ok(SchrodingerSample {
            t: step as f64 * solver.h,
            norm,
            overlap: if denom == 0.0 { 0.0 } else { psi0.inner(psi).norm() / denom },
            energy: energy_of(psi, op, params)?,
        })
    };
    let mut states = vec![psi0.clone()];
    let mut samples = vec![sample(0, psi0)?];
    let mut v = psi0.values().to_vec();
    for step in 1..=solver.steps {
        solver.stepper.step(&mut v);
        if step % every == 0 || step == solver.steps {
            let psi = ConfigWaveFunction::from_raw(*psi0.axis(), v.clone());
            samples.push(sample(step, &psi)?);
            states.push(psi);
        }
    }
    Ok((states, samples))
}

/// CSV with columns `t,norm,overlap,energy`.
pub fn write_schrodinger_csv<W: Write>(samples: &[SchrodingerSample], mut w: W) -> Result<()> {
    writeln!(w, "t,norm,overlap,energy")?;
    for s in samples {
        writeln!(w, "{},{},{},{}", s.t, s.norm, s.overlap, s.energy)?;
    }
    Ok(())
}
