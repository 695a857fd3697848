//! Periodic spatial grids, space-time fields and Fourier-spectral operators.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Uniform periodic grid on `[-L, L)` with `n` points, `n` a power of two.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicGrid {
    half_width: f64,
    n: usize,
}

impl PeriodicGrid {
    pub fn new(half_width: f64, n: usize) -> Result<Self> {
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::invalid(format!(
                "grid half-width must be positive, got {half_width}"
            )));
        }
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::invalid(format!(
                "grid size must be a power of two >= 4, got {n}"
            )));
        }
        Ok(Self { half_width, n })
    }

    /// The `[-pi, pi)` box used for trigonometric data.
    pub fn trig(n: usize) -> Result<Self> {
        Self::new(PI, n)
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn point(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.spacing()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.point(j)).collect()
    }

    /// Angular wave number of FFT bin `m`.
    pub fn wavenumber(&self, m: usize) -> f64 {
        let n = self.n as i64;
        let k = if (m as i64) <= n / 2 { m as i64 } else { m as i64 - n };
        PI * k as f64 / self.half_width
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= -self.half_width && x <= self.half_width
    }
}

/// Values of a function of `(time, x)` on a periodic grid, one row per time.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    grid: PeriodicGrid,
    times: Vec<f64>,
    values: Vec<f64>,
}

impl SpaceTimeField {
    pub fn new(grid: PeriodicGrid, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != times.len() * grid.len() {
            return Err(Error::invalid(format!(
                "field has {} values, expected {} times x {} points",
                values.len(),
                times.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("field values must be finite"));
        }
        Ok(Self { grid, times, values })
    }

    /// Samples `u(t, x)` at every time and grid point.
    pub fn from_fn(grid: PeriodicGrid, times: Vec<f64>, mut u: impl FnMut(f64, f64) -> f64) -> Result<Self> {
        let xs = grid.points();
        let mut values = Vec::with_capacity(times.len() * grid.len());
        for &t in &times {
            values.extend(xs.iter().map(|&x| u(t, x)));
        }
        Self::new(grid, times, values)
    }

    /// Samples `u` at `t - dt, t, t + dt` for every check time `t`, with
    /// `dt = rel_step * t`; the layout expected by the residual checker.
    pub fn at_check_times(
        grid: PeriodicGrid,
        check_times: &[f64],
        rel_step: f64,
        u: impl FnMut(f64, f64) -> f64,
    ) -> Result<Self> {
        if check_times.iter().any(|&t| !(t > 0.0)) || !(rel_step > 0.0 && rel_step < 1.0) {
            return Err(Error::invalid(
                "check times must be positive and the relative step in (0,1)",
            ));
        }
        let times = check_times
            .iter()
            .flat_map(|&t| [t * (1.0 - rel_step), t, t * (1.0 + rel_step)])
            .collect();
        Self::from_fn(grid, times, u)
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.grid.len();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.len() + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// FFT-backed operators on one periodic grid.
pub struct Spectral {
    grid: PeriodicGrid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Spectral {
    pub fn new(grid: PeriodicGrid) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid,
            forward: planner.plan_fft_forward(grid.len()),
            inverse: planner.plan_fft_inverse(grid.len()),
        }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        buf
    }

    pub fn inverse(&self, mut coeffs: Vec<Complex64>) -> Vec<f64> {
        self.inverse.process(&mut coeffs);
        let scale = 1.0 / self.grid.len() as f64;
        coeffs.iter().map(|c| c.re * scale).collect()
    }

    /// Applies a real Fourier multiplier `symbol(kappa)`.
    pub fn apply_multiplier(&self, values: &[f64], symbol: impl Fn(f64) -> f64) -> Vec<f64> {
        let mut c = self.forward(values);
        for (m, cm) in c.iter_mut().enumerate() {
            *cm *= symbol(self.grid.wavenumber(m));
        }
        self.inverse(c)
    }

    pub fn derivative(&self, values: &[f64]) -> Vec<f64> {
        let n = self.grid.len();
        let mut c = self.forward(values);
        for (m, cm) in c.iter_mut().enumerate() {
            // The Nyquist bin has no odd-derivative partner.
            *cm *= if m == n / 2 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, self.grid.wavenumber(m))
            };
        }
        self.inverse(c)
    }

    pub fn laplacian(&self, values: &[f64]) -> Vec<f64> {
        self.apply_multiplier(values, |k| -k * k)
    }

    pub fn bilaplacian(&self, values: &[f64]) -> Vec<f64> {
        self.apply_multiplier(values, |k| k.powi(4))
    }

    /// Heat semigroup `exp(s/2 * d^2/dx^2)` on the periodic box.
    pub fn heat(&self, values: &[f64], s: f64) -> Vec<f64> {
        self.apply_multiplier(values, |k| (-0.5 * k * k * s).exp())
    }

    /// Evaluates the trigonometric interpolant of grid values at `x`.
    pub fn interpolate(&self, coeffs: &[Complex64], x: f64) -> f64 {
        let n = self.grid.len();
        let shift = x + self.grid.half_width();
        let mut acc = 0.0;
        for (m, c) in coeffs.iter().enumerate() {
            let phase = self.grid.wavenumber(m) * shift;
            acc += if m == n / 2 {
                c.re * phase.cos()
            } else {
                c.re * phase.cos() - c.im * phase.sin()
            };
        }
        acc / n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(PeriodicGrid::new(1.0, 48).is_err());
        assert!(PeriodicGrid::new(0.0, 64).is_err());
        let g = PeriodicGrid::trig(8).unwrap();
        assert_eq!(g.point(0), -PI);
        assert!((g.point(4)).abs() < 1e-15);
        assert_eq!(g.wavenumber(1), 1.0);
        assert_eq!(g.wavenumber(7), -1.0);
    }

    #[test]
    fn spectral_derivatives_of_trig() {
        let g = PeriodicGrid::trig(64).unwrap();
        let sp = Spectral::new(g);
        let xs = g.points();
        let f: Vec<f64> = xs.iter().map(|x| (3.0 * x).cos() + (2.0 * x).sin()).collect();
        let d = sp.derivative(&f);
        let lap = sp.laplacian(&f);
        let bi = sp.bilaplacian(&f);
        for (j, &x) in xs.iter().enumerate() {
            assert!((d[j] - (-3.0 * (3.0 * x).sin() + 2.0 * (2.0 * x).cos())).abs() < 1e-12);
            assert!((lap[j] + 9.0 * (3.0 * x).cos() + 4.0 * (2.0 * x).sin()).abs() < 1e-11);
            assert!((bi[j] - 81.0 * (3.0 * x).cos() - 16.0 * (2.0 * x).sin()).abs() < 1e-9);
        }
    }

    #[test]
    fn heat_multiplier_on_cosine() {
        let g = PeriodicGrid::trig(32).unwrap();
        let sp = Spectral::new(g);
        let f: Vec<f64> = g.points().iter().map(|x| x.cos()).collect();
        let h = sp.heat(&f, 0.8);
        for (j, x) in g.points().iter().enumerate() {
            assert!((h[j] - (-0.4f64).exp() * x.cos()).abs() < 1e-14);
        }
    }

    #[test]
    fn interpolation_is_exact_for_band_limited_data() {
        let g = PeriodicGrid::trig(32).unwrap();
        let sp = Spectral::new(g);
        let f: Vec<f64> = g
            .points()
            .iter()
            .map(|x| 1.0 + x.cos() - 0.5 * (4.0 * x).sin())
            .collect();
        let c = sp.forward(&f);
        for x in [-3.0, -0.123, 0.0, 1.0, 2.9] {
            let want = 1.0 + f64::cos(x) - 0.5 * (4.0 * x).sin();
            assert!((sp.interpolate(&c, x) - want).abs() < 1e-13);
        }
    }

    #[test]
    fn check_time_layout() {
        let g = PeriodicGrid::trig(8).unwrap();
        let f = SpaceTimeField::at_check_times(g, &[1.0, 2.0], 1e-3, |t, _| t).unwrap();
        assert_eq!(f.times().len(), 6);
        assert!((f.times()[3] - 1.998).abs() < 1e-12);
        assert_eq!(f.row(1)[0], 1.0);
    }
}
