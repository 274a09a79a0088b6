//! Uniform periodic grids, sampled fields and the FFT toolkit acting on them.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, BbmError, Result};

/// Uniform periodic grid on `[start, start + length)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub start: f64,
    pub length: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(start: f64, length: f64, n: usize) -> Result<Self> {
        if !(length > 0.0 && length.is_finite() && start.is_finite()) {
            return Err(invalid(format!("grid length {length} must be positive")));
        }
        if n < 4 || n % 2 != 0 {
            return Err(invalid(format!("grid size {n} must be even and at least 4")));
        }
        Ok(Self { start, length, n })
    }

    /// Grid on `[-halfwidth, halfwidth)`.
    pub fn centered(halfwidth: f64, n: usize) -> Result<Self> {
        Self::new(-halfwidth, 2.0 * halfwidth, n)
    }

    /// Centered grid with spacing `dx` (rounded to an even point count) covering at least `2 * halfwidth`.
    pub fn with_spacing(halfwidth: f64, dx: f64) -> Result<Self> {
        if !(dx > 0.0) {
            return Err(invalid("grid spacing must be positive"));
        }
        let mut n = (2.0 * halfwidth / dx).ceil() as usize;
        n += n % 2;
        Self::centered(0.5 * n as f64 * dx, n)
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.start + i as f64 * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    pub fn end(&self) -> f64 {
        self.start + self.length
    }

    /// Angular wavenumbers in FFT order; the Nyquist entry carries `-pi/dx`.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let base = 2.0 * PI / self.length;
        let n = self.n as isize;
        (0..n)
            .map(|j| if j < n / 2 { j as f64 * base } else { (j - n) as f64 * base })
            .collect()
    }

    pub fn same_spacing(&self, other: &Grid) -> bool {
        ((self.dx() - other.dx()) / self.dx()).abs() < 1e-12
    }
}

/// FFT plans and wavenumbers for one grid.
#[derive(Clone)]
pub struct Spectral {
    grid: Grid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    k: Vec<f64>,
}

impl fmt::Debug for Spectral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid,
            fwd: planner.plan_fft_forward(grid.n),
            inv: planner.plan_fft_inverse(grid.n),
            k: grid.wavenumbers(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn k(&self) -> &[f64] {
        &self.k
    }

    pub fn forward(&self, v: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.fwd.process(&mut buf);
        buf
    }

    pub fn forward_in_place(&self, buf: &mut [Complex64]) {
        self.fwd.process(buf);
    }

    /// Inverse transform with `1/n` normalization, keeping the real part.
    pub fn inverse(&self, mut c: Vec<Complex64>) -> Vec<f64> {
        self.inv.process(&mut c);
        let s = 1.0 / self.grid.n as f64;
        c.iter().map(|z| z.re * s).collect()
    }

    pub fn inverse_in_place(&self, buf: &mut [Complex64]) {
        self.inv.process(buf);
        let s = 1.0 / self.grid.n as f64;
        for z in buf.iter_mut() {
            *z *= s;
        }
    }

    /// Multiply the spectrum by `symbol(k)`.
    pub fn apply_symbol(&self, v: &[f64], symbol: impl Fn(f64) -> Complex64) -> Vec<f64> {
        let mut c = self.forward(v);
        for (z, &k) in c.iter_mut().zip(&self.k) {
            *z *= symbol(k);
        }
        self.inverse(c)
    }

    pub fn derivative(&self, v: &[f64], order: u32) -> Vec<f64> {
        if order == 0 {
            return v.to_vec();
        }
        self.apply_symbol(v, |k| Complex64::new(0.0, k).powu(order))
    }

    /// All derivatives `0..=max_order` from one forward transform.
    pub fn derivatives(&self, v: &[f64], max_order: u32) -> Vec<Vec<f64>> {
        let c = self.forward(v);
        (0..=max_order)
            .map(|m| {
                let d: Vec<Complex64> =
                    c.iter().zip(&self.k).map(|(z, &k)| z * Complex64::new(0.0, k).powu(m)).collect();
                self.inverse(d)
            })
            .collect()
    }

    /// Samples of `v(x + s)` for a band-limited interpolant of `v`.
    pub fn translate(&self, v: &[f64], s: f64) -> Vec<f64> {
        self.apply_symbol(v, |k| Complex64::from_polar(1.0, k * s))
    }

    /// `(1 - lambda d^2) v`.
    pub fn helmholtz(&self, v: &[f64], lambda: f64) -> Vec<f64> {
        self.apply_symbol(v, |k| Complex64::new(1.0 + lambda * k * k, 0.0))
    }

    /// Largest spectral magnitude in the upper third of the band relative to the peak.
    pub fn tail_ratio(&self, v: &[f64]) -> f64 {
        let c = self.forward(v);
        let kmax = PI / self.grid.dx();
        let peak = c.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if peak == 0.0 {
            return 0.0;
        }
        let tail = c
            .iter()
            .zip(&self.k)
            .filter(|(_, &k)| k.abs() > 2.0 * kmax / 3.0)
            .map(|(z, _)| z.norm())
            .fold(0.0, f64::max);
        tail / peak
    }
}

/// Real samples on a periodic grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n {
            return Err(BbmError::GridMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.n
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite sample at index {i}")));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.points().into_iter().map(f).collect();
        Self { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![0.0; grid.n] }
    }

    pub(crate) fn from_vec_unchecked(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n);
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn domain_length(&self) -> f64 {
        self.grid.length
    }

    pub fn num_points(&self) -> usize {
        self.grid.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Periodic trapezoid rule.
    pub fn integral(&self) -> f64 {
        self.grid.dx() * self.values.iter().sum::<f64>()
    }

    pub fn dot(&self, other: &GridFunction) -> f64 {
        self.grid.dx() * dot(&self.values, &other.values)
    }

    pub fn l2_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn derivative(&self, order: u32) -> GridFunction {
        let sp = Spectral::new(self.grid);
        Self::from_vec_unchecked(self.grid, sp.derivative(&self.values, order))
    }

    /// `sqrt(sum (1 + k^2)|c_k|^2)` normalized to match the continuous H1 norm.
    pub fn h1_norm(&self) -> f64 {
        h1_norm(&Spectral::new(self.grid), &self.values)
    }

    pub fn tail_ratio(&self) -> f64 {
        Spectral::new(self.grid).tail_ratio(&self.values)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        Self::from_vec_unchecked(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn axpy(&self, a: f64, other: &GridFunction) -> GridFunction {
        let v = self.values.iter().zip(&other.values).map(|(x, y)| x + a * y).collect();
        Self::from_vec_unchecked(self.grid, v)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn h1_norm(sp: &Spectral, v: &[f64]) -> f64 {
    let c = sp.forward(v);
    let n = sp.grid().n as f64;
    let s: f64 = c.iter().zip(sp.k()).map(|(z, &k)| (1.0 + k * k) * z.norm_sqr()).sum();
    (s * sp.grid().dx() / n).sqrt()
}

/// Evaluates a field sampled on a source grid at `x - shift` for every point `x`
/// of a target grid with the same spacing; zero outside the source box.
pub fn resample_shifted(
    sp: &Spectral,
    v: &[f64],
    order: u32,
    target: &Grid,
    shift: f64,
) -> Result<Vec<f64>> {
    let spectrum = sp.forward(v);
    Ok(resample_spectrum(sp, &spectrum, order..=order, target, shift)?.remove(0))
}

/// As `resample_shifted` for every derivative order in `orders`, from a precomputed spectrum.
pub fn resample_spectrum(
    sp: &Spectral,
    spectrum: &[Complex64],
    orders: std::ops::RangeInclusive<u32>,
    target: &Grid,
    shift: f64,
) -> Result<Vec<Vec<f64>>> {
    let src = sp.grid();
    if !src.same_spacing(target) {
        return Err(BbmError::GridMismatch(format!(
            "spacing {} vs {}",
            src.dx(),
            target.dx()
        )));
    }
    let dx = src.dx();
    let o = (target.start - shift - src.start) / dx;
    let m = o.floor();
    let phi = (o - m) * dx;
    let m = m as isize;
    let n = src.n as isize;
    let phase: Vec<Complex64> =
        sp.k().iter().zip(spectrum).map(|(k, c)| c * Complex64::from_polar(1.0, k * phi)).collect();
    let mut out = Vec::new();
    for order in orders {
        let c: Vec<Complex64> = phase
            .iter()
            .zip(sp.k())
            .map(|(c, &k)| c * Complex64::new(0.0, k).powu(order))
            .collect();
        let shifted = sp.inverse(c);
        out.push(
            (0..target.n as isize)
                .map(|j| {
                    let i = j + m;
                    if (0..n).contains(&i) {
                        shifted[i as usize]
                    } else {
                        0.0
                    }
                })
                .collect(),
        );
    }
    Ok(out)
}
