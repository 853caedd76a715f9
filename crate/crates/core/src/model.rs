//! Parameters, grids, fields and Hamiltonians shared by every solver.

use ndarray::{Array2, Zip};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral;

/// Physical constants and diffusion amplitudes in internal units.
///
/// `a` is the coordinate-diffusion amplitude (`a²` multiplies `∂²/∂x²`),
/// `b` the momentum-diffusion amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelParams {
    pub hbar: f64,
    pub mass: f64,
    pub a: f64,
    pub b: f64,
    pub n: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            hbar: 1.0,
            mass: 1.0,
            a: 1.0,
            b: 1.0,
            n: 1,
        }
    }
}

impl ModelParams {
    pub fn new(hbar: f64, mass: f64, a: f64, b: f64, n: usize) -> Result<Self> {
        let p = Self { hbar, mass, a, b, n };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.hbar, self.mass, self.a, self.b]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::NonFinite("model parameters"));
        }
        if self.hbar <= 0.0 || self.mass <= 0.0 {
            return Err(Error::InvalidParams("hbar and mass must be positive".into()));
        }
        if self.a < 0.0 || self.b < 0.0 {
            return Err(Error::InvalidParams("diffusion amplitudes must be nonnegative".into()));
        }
        if self.n == 0 {
            return Err(Error::InvalidParams("dimension must be at least 1".into()));
        }
        if !(self.a * self.b / self.hbar).is_finite() {
            return Err(Error::InvalidParams("ab/hbar overflows".into()));
        }
        Ok(())
    }

    /// `ab/ħ`, the natural relaxation rate.
    pub fn relaxation_rate(&self) -> f64 {
        self.a * self.b / self.hbar
    }

    /// Exponent of the path-integral normaliser per unit time, `abn/ħ`.
    pub fn normalizer_rate(&self) -> f64 {
        self.n as f64 * self.relaxation_rate()
    }

    /// Variance `aħ/(2b)` of the normal density `χ²(·, y)`.
    pub fn smoothing_variance(&self) -> Result<f64> {
        self.require_kernel()?;
        Ok(self.a * self.hbar / (2.0 * self.b))
    }

    /// Momentum variance `ħb/(2a)` of the stationary p-profile.
    pub fn momentum_variance(&self) -> Result<f64> {
        self.require_kernel()?;
        Ok(self.hbar * self.b / (2.0 * self.a))
    }

    pub fn require_kernel(&self) -> Result<()> {
        if self.a > 0.0 && self.b > 0.0 {
            Ok(())
        } else {
            Err(Error::DegenerateKernel {
                a: self.a,
                b: self.b,
            })
        }
    }

    pub fn require_1d(&self) -> Result<()> {
        if self.n == 1 {
            Ok(())
        } else {
            Err(Error::UnsupportedDimension(self.n))
        }
    }
}

/// Raw grid configuration, validated by [`PhaseGrid::new`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub np: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    #[serde(default = "one")]
    pub n: usize,
}

fn one() -> usize {
    1
}

impl GridSpec {
    pub fn square(size: usize, half_width: f64) -> Self {
        Self {
            nx: size,
            np: size,
            x_min: -half_width,
            x_max: half_width,
            p_min: -half_width,
            p_max: half_width,
            n: 1,
        }
    }
}

/// Periodic coordinate axis: `x_j = x_min + j Δx`, `j < n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XAxis {
    pub n: usize,
    pub x_min: f64,
    pub x_max: f64,
}

impl XAxis {
    pub fn new(n: usize, x_min: f64, x_max: f64) -> Result<Self> {
        check_pow2(n, "nx")?;
        check_bounds(x_min, x_max, "x")?;
        Ok(Self { n, x_min, x_max })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn dx(&self) -> f64 {
        self.length() / self.n as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        spectral::wavenumbers(self.n, self.length())
    }

    /// Nearest periodic image of a coordinate difference.
    pub fn wrap_difference(&self, d: f64) -> f64 {
        let l = self.length();
        d - l * (d / l).round()
    }

    /// Map a coordinate into `[x_min, x_max)`.
    pub fn wrap(&self, x: f64) -> f64 {
        let l = self.length();
        self.x_min + (x - self.x_min).rem_euclid(l)
    }

    /// Periodic linear interpolation of nodal samples.
    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        let s = (self.wrap(x) - self.x_min) / self.dx();
        let j = (s.floor() as usize).min(self.n - 1);
        let w = s - j as f64;
        values[j] * (1.0 - w) + values[(j + 1) % self.n] * w
    }
}

fn check_pow2(n: usize, name: &str) -> Result<()> {
    if n < 4 || !n.is_power_of_two() {
        return Err(Error::BadSize(format!(
            "{name} = {n} must be a power of two and at least 4"
        )));
    }
    Ok(())
}

fn check_bounds(lo: f64, hi: f64, name: &str) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
        return Err(Error::BadBounds(format!("{name}: min {lo} must be below max {hi}")));
    }
    Ok(())
}

/// Rectangular phase-space grid: periodic in `x`, a truncation window in `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    x: XAxis,
    np: usize,
    p_min: f64,
    p_max: f64,
    n: usize,
}

impl PhaseGrid {
    /// Validate `spec` and check that `ħ·π/Δx` covers the momentum window.
    pub fn new(spec: GridSpec, hbar: f64) -> Result<Self> {
        let x = XAxis::new(spec.nx, spec.x_min, spec.x_max)?;
        check_pow2(spec.np, "np")?;
        check_bounds(spec.p_min, spec.p_max, "p")?;
        if spec.n == 0 {
            return Err(Error::InvalidParams("dimension must be at least 1".into()));
        }
        if !(hbar > 0.0) {
            return Err(Error::InvalidParams("hbar must be positive".into()));
        }
        let grid = Self {
            x,
            np: spec.np,
            p_min: spec.p_min,
            p_max: spec.p_max,
            n: spec.n,
        };
        grid.check_resolvable(hbar)?;
        Ok(grid)
    }

    /// Grid whose momentum nodes are `ħ` times the x-wavenumbers (`np = nx`).
    pub fn dual(nx: usize, x_min: f64, x_max: f64, hbar: f64) -> Result<Self> {
        let x = XAxis::new(nx, x_min, x_max)?;
        let p_nyq = hbar * std::f64::consts::PI / x.dx();
        Self::new(
            GridSpec {
                nx,
                np: nx,
                x_min,
                x_max,
                p_min: -p_nyq,
                p_max: p_nyq,
                n: 1,
            },
            hbar,
        )
    }

    pub fn check_resolvable(&self, hbar: f64) -> Result<()> {
        let k_max = hbar * std::f64::consts::PI / self.dx();
        let p_max = self.p_min.abs().max(self.p_max.abs());
        if k_max < p_max * (1.0 - 1e-12) {
            return Err(Error::NonResolvableGauge { k_max, p_max });
        }
        Ok(())
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            nx: self.x.n,
            np: self.np,
            x_min: self.x.x_min,
            x_max: self.x.x_max,
            p_min: self.p_min,
            p_max: self.p_max,
            n: self.n,
        }
    }

    pub fn x_axis(&self) -> &XAxis {
        &self.x
    }
    pub fn nx(&self) -> usize {
        self.x.n
    }
    pub fn np(&self) -> usize {
        self.np
    }
    pub fn dim(&self) -> usize {
        self.n
    }
    pub fn shape(&self) -> (usize, usize) {
        (self.x.n, self.np)
    }
    pub fn dx(&self) -> f64 {
        self.x.dx()
    }
    pub fn dp(&self) -> f64 {
        (self.p_max - self.p_min) / self.np as f64
    }
    pub fn x_min(&self) -> f64 {
        self.x.x_min
    }
    pub fn x_max(&self) -> f64 {
        self.x.x_max
    }
    pub fn p_min(&self) -> f64 {
        self.p_min
    }
    pub fn p_max(&self) -> f64 {
        self.p_max
    }
    pub fn x(&self, j: usize) -> f64 {
        self.x.x(j)
    }
    pub fn p(&self, l: usize) -> f64 {
        self.p_min + l as f64 * self.dp()
    }
    pub fn xs(&self) -> Vec<f64> {
        self.x.points()
    }
    pub fn ps(&self) -> Vec<f64> {
        (0..self.np).map(|l| self.p(l)).collect()
    }
    /// Phase-space cell area `Δx Δp`.
    pub fn cell(&self) -> f64 {
        self.dx() * self.dp()
    }
    pub fn momentum_wavenumbers(&self) -> Vec<f64> {
        spectral::wavenumbers(self.np, self.p_max - self.p_min)
    }

    pub fn contains(&self, x: f64, p: f64) -> bool {
        x >= self.x.x_min && x <= self.x.x_max && p >= self.p_min && p <= self.p_max
    }

    /// Nearest-node indices of a point, with `x` taken periodically.
    /// Returns `None` when `p` lies outside the momentum window.
    pub fn nearest_node(&self, x: f64, p: f64) -> Option<(usize, usize)> {
        let sp = (p - self.p_min) / self.dp();
        if !(sp > -0.5 && sp < self.np as f64 - 0.5) {
            return None;
        }
        let sx = (self.x.wrap(x) - self.x.x_min) / self.dx();
        let j = (sx.round() as usize) % self.x.n;
        Some((j, sp.round() as usize))
    }
}

/// Complex field `φ(x, p)` on a [`PhaseGrid`], indexed `[x, p]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseWaveFunction {
    grid: PhaseGrid,
    values: Array2<C64>,
}

impl PhaseWaveFunction {
    pub fn new(grid: PhaseGrid, values: Array2<C64>) -> Result<Self> {
        if values.dim() != grid.shape() {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", grid.shape()),
                got: format!("{:?}", values.dim()),
            });
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("phase-space wave function"));
        }
        let values = if values.is_standard_layout() {
            values
        } else {
            values.as_standard_layout().to_owned()
        };
        Ok(Self { grid, values })
    }

    pub(crate) fn from_raw(grid: PhaseGrid, values: Array2<C64>) -> Self {
        debug_assert_eq!(values.dim(), grid.shape());
        Self { grid, values }
    }

    pub fn zeros(grid: PhaseGrid) -> Self {
        Self::from_raw(grid, Array2::zeros(grid.shape()))
    }

    pub fn from_fn(grid: PhaseGrid, f: impl Fn(f64, f64) -> C64) -> Result<Self> {
        let xs = grid.xs();
        let ps = grid.ps();
        let values = Array2::from_shape_fn(grid.shape(), |(j, l)| f(xs[j], ps[l]));
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }
    pub fn values(&self) -> &Array2<C64> {
        &self.values
    }
    pub fn into_values(self) -> Array2<C64> {
        self.values
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `⟨self, other⟩ = ΣΣ conj(self)·other ΔxΔp`.
    pub fn inner(&self, other: &Self) -> C64 {
        let s: C64 = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| a.conj() * b)
            .sum();
        s * self.grid.cell()
    }

    /// `‖self − other‖`.
    pub fn distance(&self, other: &Self) -> f64 {
        let s: f64 = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        (s * self.grid.cell()).sqrt()
    }

    pub fn scaled(&self, s: C64) -> Self {
        Self::from_raw(self.grid, self.values.mapv(|z| z * s))
    }

    /// `self + s·other`.
    pub fn add_scaled(&self, s: C64, other: &Self) -> Self {
        let mut v = self.values.clone();
        Zip::from(&mut v)
            .and(&other.values)
            .for_each(|a, &b| *a += s * b);
        Self::from_raw(self.grid, v)
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        self.scaled(C64::new(1.0 / n, 0.0))
    }

    /// Largest `|φ|` on the two momentum edges relative to the field maximum.
    pub fn boundary_ratio(&self) -> f64 {
        let max = self.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if max == 0.0 {
            return 0.0;
        }
        let np = self.grid.np();
        let edge = (0..self.grid.nx())
            .map(|j| self.values[[j, 0]].norm().max(self.values[[j, np - 1]].norm()))
            .fold(0.0, f64::max);
        edge / max
    }
}

/// Complex wave function `ψ(y)` on the coordinate axis of a phase grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigWaveFunction {
    axis: XAxis,
    values: Vec<C64>,
}

impl ConfigWaveFunction {
    pub fn new(axis: XAxis, values: Vec<C64>) -> Result<Self> {
        if values.len() != axis.n {
            return Err(Error::ShapeMismatch {
                expected: axis.n.to_string(),
                got: values.len().to_string(),
            });
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("configuration wave function"));
        }
        Ok(Self { axis, values })
    }

    pub(crate) fn from_raw(axis: XAxis, values: Vec<C64>) -> Self {
        Self { axis, values }
    }

    pub fn from_fn(axis: XAxis, f: impl Fn(f64) -> C64) -> Result<Self> {
        Self::new(axis, axis.points().into_iter().map(f).collect())
    }

    /// Normalised Gaussian `exp(-(y-y0)²/(4σ²) + i p0 y/ħ)` with position spread `σ`.
    pub fn gaussian(axis: XAxis, center: f64, sigma: f64, momentum: f64, hbar: f64) -> Result<Self> {
        let psi = Self::from_fn(axis, |y| {
            let d = axis.wrap_difference(y - center);
            C64::from_polar((-d * d / (4.0 * sigma * sigma)).exp(), momentum * d / hbar)
        })?;
        Ok(psi.normalized())
    }

    pub fn axis(&self) -> &XAxis {
        &self.axis
    }
    pub fn values(&self) -> &[C64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.axis.dx()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn inner(&self, other: &Self) -> C64 {
        let s: C64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum();
        s * self.axis.dx()
    }

    pub fn distance(&self, other: &Self) -> f64 {
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        (s * self.axis.dx()).sqrt()
    }

    /// `min_θ ‖self − e^{iθ} other‖`, the distance up to a global phase.
    pub fn phase_aligned_distance(&self, other: &Self) -> f64 {
        let ov = other.inner(self);
        let phase = if ov.norm() > 0.0 { ov / ov.norm() } else { C64::new(1.0, 0.0) };
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - phase * b).norm_sqr())
            .sum();
        (s * self.axis.dx()).sqrt()
    }

    pub fn scaled(&self, s: C64) -> Self {
        Self::from_raw(self.axis, self.values.iter().map(|z| z * s).collect())
    }

    pub fn add_scaled(&self, s: C64, other: &Self) -> Self {
        Self::from_raw(
            self.axis,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + s * b)
                .collect(),
        )
    }

    pub fn normalized(&self) -> Self {
        self.scaled(C64::new(1.0 / self.norm(), 0.0))
    }

    /// `⟨y⟩` computed with the nearest-image coordinate relative to `reference`.
    pub fn mean_position(&self, reference: f64) -> f64 {
        let dx = self.axis.dx();
        let (mut w, mut m) = (0.0, 0.0);
        for (j, z) in self.values.iter().enumerate() {
            let d = self.axis.wrap_difference(self.axis.x(j) - reference);
            w += z.norm_sqr() * dx;
            m += z.norm_sqr() * d * dx;
        }
        reference + m / w
    }

    /// Position variance, nearest-image relative to `reference`.
    pub fn position_variance(&self, reference: f64) -> f64 {
        let mean = self.mean_position(reference);
        let dx = self.axis.dx();
        let (mut w, mut v) = (0.0, 0.0);
        for (j, z) in self.values.iter().enumerate() {
            let d = self.axis.wrap_difference(self.axis.x(j) - mean);
            w += z.norm_sqr() * dx;
            v += z.norm_sqr() * d * d * dx;
        }
        v / w
    }
}

/// Potential energy `V(x)` of a separable Hamiltonian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Potential {
    Zero,
    /// `V = ½ k x²`.
    Harmonic { stiffness: f64 },
    /// Constant force `F`: `V = −F x`.
    Linear { force: f64 },
    /// `V = c x⁴`.
    Quartic { coeff: f64 },
    /// `V = A cos(κ x)`.
    Cosine { amplitude: f64, wavenumber: f64 },
    /// Samples on the x-grid; derivatives by periodic spectral differentiation.
    Table { values: Vec<f64> },
}

/// `V`, `V′`, `V″` sampled on the coordinate axis.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialTables {
    pub v: Vec<f64>,
    pub dv: Vec<f64>,
    pub d2v: Vec<f64>,
}

impl Potential {
    /// `(V, V′, V″)` at `x` for closed-form potentials.
    pub(crate) fn analytic(&self, x: f64) -> Option<(f64, f64, f64)> {
        Some(match *self {
            Potential::Zero => (0.0, 0.0, 0.0),
            Potential::Harmonic { stiffness } => (0.5 * stiffness * x * x, stiffness * x, stiffness),
            Potential::Linear { force } => (-force * x, -force, 0.0),
            Potential::Quartic { coeff } => (coeff * x.powi(4), 4.0 * coeff * x.powi(3), 12.0 * coeff * x * x),
            Potential::Cosine { amplitude, wavenumber } => {
                let (s, c) = (wavenumber * x).sin_cos();
                (
                    amplitude * c,
                    -amplitude * wavenumber * s,
                    -amplitude * wavenumber * wavenumber * c,
                )
            }
            Potential::Table { .. } => return None,
        })
    }

    pub fn tables(&self, axis: &XAxis) -> Result<PotentialTables> {
        match self {
            Potential::Table { values } => {
                if values.len() != axis.n {
                    return Err(Error::ShapeMismatch {
                        expected: axis.n.to_string(),
                        got: values.len().to_string(),
                    });
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("potential table"));
                }
                Ok(PotentialTables {
                    v: values.clone(),
                    dv: spectral::spectral_derivative(values, axis.length(), 1),
                    d2v: spectral::spectral_derivative(values, axis.length(), 2),
                })
            }
            _ => {
                let (mut v, mut dv, mut d2v) = (Vec::new(), Vec::new(), Vec::new());
                for x in axis.points() {
                    let (a, b, c) = self.analytic(x).expect("closed form");
                    v.push(a);
                    dv.push(b);
                    d2v.push(c);
                }
                Ok(PotentialTables { v, dv, d2v })
            }
        }
    }
}

/// Potential bound to an axis for fast pointwise evaluation.
#[derive(Debug, Clone)]
pub struct PotentialEval {
    potential: Potential,
    axis: XAxis,
    tables: PotentialTables,
}

impl PotentialEval {
    pub fn new(potential: &Potential, axis: &XAxis) -> Result<Self> {
        Ok(Self {
            potential: potential.clone(),
            axis: *axis,
            tables: potential.tables(axis)?,
        })
    }

    pub fn tables(&self) -> &PotentialTables {
        &self.tables
    }

    /// `(V(x), V′(x))`; closed forms are exact, tables are interpolated linearly.
    pub fn value_and_slope(&self, x: f64) -> (f64, f64) {
        match self.potential.analytic(x) {
            Some((v, dv, _)) => (v, dv),
            None => (
                self.axis.interpolate(&self.tables.v, x),
                self.axis.interpolate(&self.tables.dv, x),
            ),
        }
    }
}

/// A Hamiltonian `H(x, p)` on phase space.
#[derive(Debug, Clone, PartialEq)]
pub enum HamiltonianSpec {
    /// `H = p²·inv_mass/2 + V(x)`; `inv_mass = 0` drops the kinetic term.
    Separable { inv_mass: f64, potential: Potential },
    /// General real table `H[x, p]` on a phase grid.
    Tabulated { h: Array2<f64> },
}

impl HamiltonianSpec {
    pub fn separable(mass: f64, potential: Potential) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::InvalidParams("mass must be positive".into()));
        }
        Ok(Self::Separable {
            inv_mass: 1.0 / mass,
            potential,
        })
    }

    /// `H = V(x)` with no kinetic term.
    pub fn potential_only(potential: Potential) -> Self {
        Self::Separable {
            inv_mass: 0.0,
            potential,
        }
    }

    /// The identically zero Hamiltonian.
    pub fn zero() -> Self {
        Self::potential_only(Potential::Zero)
    }

    pub fn free(mass: f64) -> Result<Self> {
        Self::separable(mass, Potential::Zero)
    }

    /// `H = p²/2m + ½ m ω² x²`.
    pub fn harmonic(mass: f64, omega: f64) -> Result<Self> {
        Self::separable(
            mass,
            Potential::Harmonic {
                stiffness: mass * omega * omega,
            },
        )
    }

    pub fn tabulated(h: Array2<f64>) -> Result<Self> {
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tabulated Hamiltonian"));
        }
        Ok(Self::Tabulated { h })
    }

    pub fn is_separable(&self) -> bool {
        matches!(self, Self::Separable { .. })
    }

    /// `(inv_mass, potential)` of a separable spec.
    pub fn as_separable(&self) -> Result<(f64, &Potential)> {
        match self {
            Self::Separable {
                inv_mass,
                potential,
            } => Ok((*inv_mass, potential)),
            Self::Tabulated { .. } => Err(Error::UnsupportedHamiltonian),
        }
    }
}

/// `H`, `∂H/∂x`, `∂H/∂p` sampled on a phase grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianFields {
    pub h: Array2<f64>,
    pub dh_dx: Array2<f64>,
    pub dh_dp: Array2<f64>,
}

/// Sample `H` and its partial derivatives on `grid`.
///
/// Separable specs use closed-form `p` derivatives and the potential's own
/// derivative table. Tabulated specs differentiate spectrally in the periodic
/// `x` direction and with fourth-order differences across the `p` window.
pub fn eval_hamiltonian(spec: &HamiltonianSpec, grid: &PhaseGrid) -> Result<HamiltonianFields> {
    let (nx, np) = grid.shape();
    match spec {
        HamiltonianSpec::Separable {
            inv_mass,
            potential,
        } => {
            let t = potential.tables(grid.x_axis())?;
            let ps = grid.ps();
            Ok(HamiltonianFields {
                h: Array2::from_shape_fn((nx, np), |(j, l)| 0.5 * inv_mass * ps[l] * ps[l] + t.v[j]),
                dh_dx: Array2::from_shape_fn((nx, np), |(j, _)| t.dv[j]),
                dh_dp: Array2::from_shape_fn((nx, np), |(_, l)| inv_mass * ps[l]),
            })
        }
        HamiltonianSpec::Tabulated { h } => {
            if h.dim() != (nx, np) {
                return Err(Error::ShapeMismatch {
                    expected: format!("{:?}", (nx, np)),
                    got: format!("{:?}", h.dim()),
                });
            }
            let mut dh_dx = Array2::zeros((nx, np));
            for l in 0..np {
                let col: Vec<f64> = (0..nx).map(|j| h[[j, l]]).collect();
                let d = spectral::spectral_derivative(&col, grid.x_axis().length(), 1);
                for j in 0..nx {
                    dh_dx[[j, l]] = d[j];
                }
            }
            let mut dh_dp = Array2::zeros((nx, np));
            for j in 0..nx {
                let row: Vec<f64> = h.row(j).to_vec();
                let d = spectral::fd_derivative(&row, grid.dp());
                for l in 0..np {
                    dh_dp[[j, l]] = d[l];
                }
            }
            Ok(HamiltonianFields {
                h: h.clone(),
                dh_dx,
                dh_dp,
            })
        }
    }
}

/// Local rotation frequency `ω′ = (H − Σ p_k ∂H/∂p_k)/ħ` at a phase-space point.
///
/// Separable potentials given in closed form are evaluated exactly; tables
/// are interpolated (linearly in `x`, bilinearly for tabulated `H`).
pub fn rotation_frequency(
    spec: &HamiltonianSpec,
    grid: &PhaseGrid,
    point: (f64, f64),
    params: &ModelParams,
) -> Result<f64> {
    let (x, p) = point;
    if !grid.contains(x, p) {
        return Err(Error::OutOfDomain { x, p });
    }
    match spec {
        HamiltonianSpec::Separable {
            inv_mass,
            potential,
        } => {
            let v = PotentialEval::new(potential, grid.x_axis())?.value_and_slope(x).0;
            Ok((v - 0.5 * inv_mass * p * p) / params.hbar)
        }
        HamiltonianSpec::Tabulated { .. } => {
            let f = eval_hamiltonian(spec, grid)?;
            let h = bilinear(grid, &f.h, x, p);
            let dh_dp = bilinear(grid, &f.dh_dp, x, p);
            Ok((h - p * dh_dp) / params.hbar)
        }
    }
}

/// Rotation frequency on every grid node.
pub fn rotation_field(fields: &HamiltonianFields, grid: &PhaseGrid, hbar: f64) -> Array2<f64> {
    let ps = grid.ps();
    Array2::from_shape_fn(grid.shape(), |(j, l)| {
        (fields.h[[j, l]] - ps[l] * fields.dh_dp[[j, l]]) / hbar
    })
}

fn bilinear(grid: &PhaseGrid, f: &Array2<f64>, x: f64, p: f64) -> f64 {
    let (nx, np) = grid.shape();
    let sx = (grid.x_axis().wrap(x) - grid.x_min()) / grid.dx();
    let j = (sx.floor() as usize).min(nx - 1);
    let wx = sx - j as f64;
    let sp = ((p - grid.p_min()) / grid.dp()).clamp(0.0, (np - 1) as f64);
    let l = (sp.floor() as usize).min(np - 2);
    let wp = sp - l as f64;
    let j1 = (j + 1) % nx;
    f[[j, l]] * (1.0 - wx) * (1.0 - wp)
        + f[[j1, l]] * wx * (1.0 - wp)
        + f[[j, l + 1]] * (1.0 - wx) * wp
        + f[[j1, l + 1]] * wx * wp
}
