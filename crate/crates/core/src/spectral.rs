//! FFT plumbing shared by the solvers.
//!
//! Discrete transforms follow one convention everywhere:
//! `f̂(k) = Σ f(x) e^{-ikx} Δx` with inverse `f(x) = Σ f̂(k) e^{ikx} / (N Δx)`.
//! Diagonal multipliers are convention independent, so the solvers work with
//! raw unnormalised FFTs; [`fourier_transform`] applies the full convention
//! for callers that need physical amplitudes.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{Array2, Axis};
use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

/// Forward/inverse plan pair for one transform length.
#[derive(Clone)]
pub struct Fft1d {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fft1d {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Unnormalised forward transform (`e^{-2πi jm/N}`).
    pub fn forward(&self, buf: &mut [C64]) {
        self.fwd.process(buf);
    }

    /// Inverse transform including the `1/N` factor.
    pub fn inverse(&self, buf: &mut [C64]) {
        self.inv.process(buf);
        let s = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|z| *z *= s);
    }
}

/// Angular wavenumbers in FFT order for `n` samples on a periodic interval of `length`.
pub fn wavenumbers(n: usize, length: f64) -> Vec<f64> {
    let dk = 2.0 * PI / length;
    (0..n)
        .map(|m| {
            let m = m as i64;
            let signed = if m < (n as i64) / 2 { m } else { m - n as i64 };
            signed as f64 * dk
        })
        .collect()
}

/// Transform every column (axis 0) of `field` in place.
pub fn transform_axis0(field: &mut Array2<C64>, fft: &Fft1d, inverse: bool) {
    let mut buf = vec![C64::new(0.0, 0.0); field.nrows()];
    for mut col in field.axis_iter_mut(Axis(1)) {
        for (b, v) in buf.iter_mut().zip(col.iter()) {
            *b = *v;
        }
        if inverse {
            fft.inverse(&mut buf);
        } else {
            fft.forward(&mut buf);
        }
        for (v, b) in col.iter_mut().zip(buf.iter()) {
            *v = *b;
        }
    }
}

/// Transform every row (axis 1) of `field` in place.
pub fn transform_axis1(field: &mut Array2<C64>, fft: &Fft1d, inverse: bool) {
    for mut row in field.axis_iter_mut(Axis(0)) {
        let slice = row
            .as_slice_mut()
            .expect("phase fields are stored in standard layout");
        if inverse {
            fft.inverse(slice);
        } else {
            fft.forward(slice);
        }
    }
}

/// Physical Fourier transform `Σ f(x_j) e^{-ik x_j} Δx` with `x_j = x0 + jΔx`,
/// returned in FFT order alongside the wavenumbers.
pub fn fourier_transform(values: &[C64], x0: f64, dx: f64) -> (Vec<f64>, Vec<C64>) {
    let n = values.len();
    let ks = wavenumbers(n, n as f64 * dx);
    let mut buf = values.to_vec();
    Fft1d::new(n).forward(&mut buf);
    for (z, &k) in buf.iter_mut().zip(&ks) {
        *z *= C64::from_polar(dx, -k * x0);
    }
    (ks, buf)
}

/// Inverse of [`fourier_transform`].
pub fn inverse_fourier_transform(spectrum: &[C64], x0: f64, dx: f64) -> Vec<C64> {
    let n = spectrum.len();
    let ks = wavenumbers(n, n as f64 * dx);
    let mut buf: Vec<C64> = spectrum
        .iter()
        .zip(&ks)
        .map(|(z, &k)| z * C64::from_polar(1.0 / dx, k * x0))
        .collect();
    Fft1d::new(n).inverse(&mut buf);
    buf
}

/// Spectral derivative of order `order` of periodic real samples.
///
/// The Nyquist mode is dropped for odd orders so the result stays real.
pub fn spectral_derivative(values: &[f64], length: f64, order: u32) -> Vec<f64> {
    let n = values.len();
    let ks = wavenumbers(n, length);
    let fft = Fft1d::new(n);
    let mut buf: Vec<C64> = values.iter().map(|&v| C64::new(v, 0.0)).collect();
    fft.forward(&mut buf);
    for (m, (z, &k)) in buf.iter_mut().zip(&ks).enumerate() {
        if order % 2 == 1 && n % 2 == 0 && m == n / 2 {
            *z = C64::new(0.0, 0.0);
            continue;
        }
        *z *= C64::new(0.0, k).powu(order);
    }
    fft.inverse(&mut buf);
    buf.iter().map(|z| z.re).collect()
}

/// Complex counterpart of [`spectral_derivative`].
pub fn spectral_derivative_complex(values: &[C64], length: f64, order: u32) -> Vec<C64> {
    let n = values.len();
    let ks = wavenumbers(n, length);
    let fft = Fft1d::new(n);
    let mut buf = values.to_vec();
    fft.forward(&mut buf);
    for (z, &k) in buf.iter_mut().zip(&ks) {
        *z *= C64::new(0.0, k).powu(order);
    }
    fft.inverse(&mut buf);
    buf
}

/// Fourth-order finite-difference first derivative on a non-periodic uniform grid
/// (one-sided stencils at the two ends). Exact for polynomials up to degree four.
pub fn fd_derivative(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    assert!(n >= 5, "fourth-order stencil needs at least five samples");
    let f = values;
    let mut out = vec![0.0; n];
    let s = 1.0 / (12.0 * h);
    out[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) * s;
    out[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) * s;
    for i in 2..n - 2 {
        out[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) * s;
    }
    out[n - 2] = (3.0 * f[n - 1] + 10.0 * f[n - 2] - 18.0 * f[n - 3] + 6.0 * f[n - 4] - f[n - 5]) * s;
    out[n - 1] =
        (25.0 * f[n - 1] - 48.0 * f[n - 2] + 36.0 * f[n - 3] - 16.0 * f[n - 4] + 3.0 * f[n - 5]) * s;
    out
}
