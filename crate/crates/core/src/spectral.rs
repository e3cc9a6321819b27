//! Fourier pseudo-spectral machinery on `[0, 2π)` and `[0, 2π)²`.
//!
//! Forward transforms are unnormalised; inverse transforms divide by the
//! number of points. The 2/3 rule keeps wavenumbers `|k| ≤ ⌊(n−1)/3⌋`, so a
//! grid product of two retained fields is alias-free on the retained band.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub type Complex = Complex64;

const PARALLEL_THRESHOLD: usize = 256;
const ROWS_PER_TASK: usize = 16;

fn check_size(n: usize) -> Result<()> {
    if n < 8 || !n.is_power_of_two() {
        return Err(Error::InvalidParameter(format!(
            "grid size must be a power of two ≥ 8, got {n}"
        )));
    }
    Ok(())
}

/// Signed wavenumber of FFT index `j` on an `n`-point grid.
pub fn wavenumber(j: usize, n: usize) -> i64 {
    if j <= n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Largest retained wavenumber under the 2/3 rule.
pub fn dealias_cutoff(n: usize) -> i64 {
    ((n - 1) / 3) as i64
}

#[derive(Clone)]
pub struct Spectral1D {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Spectral1D {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral1D").field("n", &self.n).finish()
    }
}

impl Spectral1D {
    pub fn new(n: usize) -> Result<Self> {
        check_size(n)?;
        let mut planner = FftPlanner::new();
        Ok(Self {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kmax(&self) -> i64 {
        dealias_cutoff(self.n)
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| 2.0 * PI * j as f64 / self.n as f64).collect()
    }

    pub fn wavenumbers(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.n).map(|j| wavenumber(j, self.n))
    }

    pub fn forward(&self, u: &[f64]) -> Vec<Complex> {
        let mut buf: Vec<Complex> = u.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.fwd.process(&mut buf);
        buf
    }

    pub fn inverse(&self, spec: &[Complex]) -> Vec<f64> {
        let mut buf = spec.to_vec();
        self.inv.process(&mut buf);
        let s = 1.0 / self.n as f64;
        buf.iter().map(|c| c.re * s).collect()
    }

    pub fn dealias(&self, spec: &mut [Complex]) {
        let kmax = self.kmax();
        for (j, c) in spec.iter_mut().enumerate() {
            if wavenumber(j, self.n).abs() > kmax {
                *c = Complex::new(0.0, 0.0);
            }
        }
    }

    /// Nodal values projected onto the retained band.
    pub fn project(&self, u: &[f64]) -> Vec<f64> {
        let mut s = self.forward(u);
        self.dealias(&mut s);
        self.inverse(&s)
    }

    /// Multiply each retained coefficient by `m(k)`; discarded modes are zeroed.
    pub fn apply_multiplier(&self, spec: &[Complex], m: impl Fn(i64) -> Complex) -> Vec<Complex> {
        let kmax = self.kmax();
        spec.iter()
            .enumerate()
            .map(|(j, &c)| {
                let k = wavenumber(j, self.n);
                if k.abs() > kmax {
                    Complex::new(0.0, 0.0)
                } else {
                    c * m(k)
                }
            })
            .collect()
    }

    /// `∂_x^order u` of the dealiased field.
    pub fn derivative(&self, u: &[f64], order: u32) -> Vec<f64> {
        let s = self.forward(u);
        self.inverse(&self.apply_multiplier(&s, |k| Complex::new(0.0, k as f64).powu(order)))
    }

    /// Fraction of the retained energy carried by the top third of the band.
    pub fn tail_fraction(&self, u: &[f64]) -> f64 {
        let s = self.forward(u);
        let kmax = self.kmax();
        let lo = 2 * kmax / 3;
        let (mut tail, mut total) = (0.0, 0.0);
        for (j, c) in s.iter().enumerate() {
            let k = wavenumber(j, self.n).abs();
            if k > kmax {
                continue;
            }
            let e = c.norm_sqr();
            total += e;
            if k > lo {
                tail += e;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            tail / total
        }
    }

    /// Translate a band-limited field by `c`: `u(x − c)`, exactly in spectral space.
    pub fn shift(&self, u: &[f64], c: f64) -> Vec<f64> {
        let s = self.forward(u);
        self.inverse(&self.apply_multiplier(&s, |k| Complex::from_polar(1.0, -(k as f64) * c)))
    }
}

/// Row-major `n × n` fields, index `iy · n + ix`, `x` varying fastest.
#[derive(Clone)]
pub struct Spectral2D {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Spectral2D {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral2D").field("n", &self.n).finish()
    }
}

impl Spectral2D {
    pub fn new(n: usize) -> Result<Self> {
        check_size(n)?;
        let mut planner = FftPlanner::new();
        Ok(Self {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn kmax(&self) -> i64 {
        dealias_cutoff(self.n)
    }

    pub fn node(&self, ix: usize, iy: usize) -> (f64, f64) {
        let h = 2.0 * PI / self.n as f64;
        (ix as f64 * h, iy as f64 * h)
    }

    /// Nodal samples of `f(x, y)`.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let n = self.n;
        (0..n * n)
            .map(|idx| {
                let (x, y) = self.node(idx % n, idx / n);
                f(x, y)
            })
            .collect()
    }

    /// `(kx, ky)` at flat index `idx`.
    pub fn wavevector(&self, idx: usize) -> (i64, i64) {
        (wavenumber(idx % self.n, self.n), wavenumber(idx / self.n, self.n))
    }

    pub fn retained(&self, idx: usize) -> bool {
        let (kx, ky) = self.wavevector(idx);
        let m = self.kmax();
        kx.abs() <= m && ky.abs() <= m
    }

    fn transform(&self, buf: &mut [Complex], fft: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        if n >= PARALLEL_THRESHOLD {
            buf.par_chunks_mut(n * ROWS_PER_TASK).for_each(|rows| fft.process(rows));
        } else {
            fft.process(buf);
        }
        let mut t = transpose(buf, n);
        if n >= PARALLEL_THRESHOLD {
            t.par_chunks_mut(n * ROWS_PER_TASK).for_each(|rows| fft.process(rows));
        } else {
            fft.process(&mut t);
        }
        transpose_into(&t, buf, n);
    }

    pub fn forward(&self, u: &[f64]) -> Vec<Complex> {
        let mut buf: Vec<Complex> = u.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.transform(&mut buf, &self.fwd);
        buf
    }

    pub fn inverse(&self, spec: &[Complex]) -> Vec<f64> {
        let mut buf = spec.to_vec();
        self.transform(&mut buf, &self.inv);
        let s = 1.0 / (self.n * self.n) as f64;
        buf.iter().map(|c| c.re * s).collect()
    }

    pub fn dealias(&self, spec: &mut [Complex]) {
        for (idx, c) in spec.iter_mut().enumerate() {
            if !self.retained(idx) {
                *c = Complex::new(0.0, 0.0);
            }
        }
    }

    /// Multiply each retained coefficient by `m(kx, ky)`; discarded modes are zeroed.
    pub fn apply_multiplier(&self, spec: &[Complex], m: impl Fn(i64, i64) -> Complex) -> Vec<Complex> {
        spec.iter()
            .enumerate()
            .map(|(idx, &c)| {
                if self.retained(idx) {
                    let (kx, ky) = self.wavevector(idx);
                    c * m(kx, ky)
                } else {
                    Complex::new(0.0, 0.0)
                }
            })
            .collect()
    }

    /// Dealiased nodal field with the zero mode removed.
    pub fn project_mean_free(&self, u: &[f64]) -> Vec<f64> {
        let s = self.forward(u);
        self.inverse(&self.apply_multiplier(&s, |kx, ky| {
            if kx == 0 && ky == 0 {
                Complex::new(0.0, 0.0)
            } else {
                Complex::new(1.0, 0.0)
            }
        }))
    }

    pub fn project(&self, u: &[f64]) -> Vec<f64> {
        let mut s = self.forward(u);
        self.dealias(&mut s);
        self.inverse(&s)
    }

    /// `(∂_x u, ∂_y u)` from the spectrum of `u`.
    pub fn gradient_from_spectrum(&self, spec: &[Complex]) -> (Vec<f64>, Vec<f64>) {
        let dx = self.apply_multiplier(spec, |kx, _| Complex::new(0.0, kx as f64));
        let dy = self.apply_multiplier(spec, |_, ky| Complex::new(0.0, ky as f64));
        (self.inverse(&dx), self.inverse(&dy))
    }

    pub fn gradient(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        self.gradient_from_spectrum(&self.forward(u))
    }

    pub fn divergence(&self, vx: &[f64], vy: &[f64]) -> Vec<f64> {
        let (a, _) = self.gradient(vx);
        let (_, b) = self.gradient(vy);
        a.iter().zip(&b).map(|(p, q)| p + q).collect()
    }

    /// Solve `Δφ = f` for mean-free `φ`; the mean of `f` is ignored.
    pub fn solve_poisson(&self, f: &[f64]) -> Vec<f64> {
        let s = self.forward(f);
        self.inverse(&self.apply_multiplier(&s, |kx, ky| {
            let k2 = (kx * kx + ky * ky) as f64;
            if k2 == 0.0 {
                Complex::new(0.0, 0.0)
            } else {
                Complex::new(-1.0 / k2, 0.0)
            }
        }))
    }

    pub fn tail_fraction(&self, u: &[f64]) -> f64 {
        let s = self.forward(u);
        let lo = 2 * self.kmax() / 3;
        let (mut tail, mut total) = (0.0, 0.0);
        for (idx, c) in s.iter().enumerate() {
            if !self.retained(idx) {
                continue;
            }
            let (kx, ky) = self.wavevector(idx);
            let e = c.norm_sqr();
            total += e;
            if kx.abs().max(ky.abs()) > lo {
                tail += e;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            tail / total
        }
    }

    /// Translate by `(cx, cy)`: `u(x − cx, y − cy)`, exactly in spectral space.
    pub fn shift(&self, u: &[f64], cx: f64, cy: f64) -> Vec<f64> {
        let s = self.forward(u);
        self.inverse(&self.apply_multiplier(&s, |kx, ky| {
            Complex::from_polar(1.0, -(kx as f64 * cx + ky as f64 * cy))
        }))
    }

    /// `(2π)² · mean(u^p)` evaluated exactly for retained fields by
    /// zero-padding onto a `2n` grid (`p ≤ 4`).
    pub fn integrate_power(&self, u: &[f64], p: i32) -> Result<f64> {
        let fine = Spectral2D::new(2 * self.n)?;
        let s = self.forward(u);
        let n = self.n;
        let m = 2 * n;
        let mut padded = vec![Complex::new(0.0, 0.0); m * m];
        for (idx, c) in s.iter().enumerate() {
            if !self.retained(idx) {
                continue;
            }
            let (kx, ky) = self.wavevector(idx);
            let jx = kx.rem_euclid(m as i64) as usize;
            let jy = ky.rem_euclid(m as i64) as usize;
            padded[jy * m + jx] = *c * 4.0;
        }
        let v = fine.inverse(&padded);
        let mean = v.iter().map(|x| x.powi(p)).sum::<f64>() / (m * m) as f64;
        Ok(4.0 * PI * PI * mean)
    }

    /// Trigonometric interpolant of a nodal field, keeping only modes above
    /// a relative threshold.
    pub fn interpolant(&self, u: &[f64]) -> Interpolant2D {
        let s = self.forward(u);
        let scale = 1.0 / (self.n * self.n) as f64;
        let biggest = s.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let cut = biggest * 1e-15;
        let modes = s
            .iter()
            .enumerate()
            .filter(|(idx, c)| self.retained(*idx) && c.norm() > cut)
            .map(|(idx, c)| {
                let (kx, ky) = self.wavevector(idx);
                (kx, ky, *c * scale)
            })
            .collect();
        Interpolant2D { modes }
    }
}

fn transpose(a: &[Complex], n: usize) -> Vec<Complex> {
    let mut t = vec![Complex::new(0.0, 0.0); n * n];
    transpose_into(a, &mut t, n);
    t
}

fn transpose_into(a: &[Complex], t: &mut [Complex], n: usize) {
    const B: usize = 16;
    for ib in (0..n).step_by(B) {
        for jb in (0..n).step_by(B) {
            for i in ib..(ib + B).min(n) {
                for j in jb..(jb + B).min(n) {
                    t[j * n + i] = a[i * n + j];
                }
            }
        }
    }
}

/// `x ↦ Re Σ c_k e^{i k·x}` with gradient.
#[derive(Debug, Clone, Default)]
pub struct Interpolant2D {
    modes: Vec<(i64, i64, Complex)>,
}

impl Interpolant2D {
    pub fn modes(&self) -> usize {
        self.modes.len()
    }

    /// Value and gradient at `(x, y)`.
    pub fn eval_with_gradient(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let (mut v, mut gx, mut gy) = (0.0, 0.0, 0.0);
        for &(kx, ky, c) in &self.modes {
            let e = c * Complex::from_polar(1.0, kx as f64 * x + ky as f64 * y);
            v += e.re;
            // ∂(Re e) = Re(i k e) = −k Im e
            gx -= kx as f64 * e.im;
            gy -= ky as f64 * e.im;
        }
        (v, gx, gy)
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.modes
            .iter()
            .map(|&(kx, ky, c)| (c * Complex::from_polar(1.0, kx as f64 * x + ky as f64 * y)).re)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoffs() {
        assert_eq!(dealias_cutoff(128), 42);
        assert_eq!(dealias_cutoff(256), 85);
        assert_eq!(wavenumber(3, 8), 3);
        assert_eq!(wavenumber(5, 8), -3);
        assert!(Spectral1D::new(12).is_err());
    }

    #[test]
    fn derivative_of_trig() {
        let s = Spectral1D::new(64).unwrap();
        let x = s.nodes();
        let u: Vec<f64> = x.iter().map(|x| (3.0 * x).sin()).collect();
        let du = s.derivative(&u, 1);
        let ddu = s.derivative(&u, 2);
        for j in 0..64 {
            assert!((du[j] - 3.0 * (3.0 * x[j]).cos()).abs() < 1e-12);
            assert!((ddu[j] + 9.0 * u[j]).abs() < 1e-11);
        }
    }

    #[test]
    fn shift_is_exact_for_trig() {
        let s = Spectral1D::new(32).unwrap();
        let x = s.nodes();
        let u: Vec<f64> = x.iter().map(|x| x.cos() + 0.5 * (2.0 * x).sin()).collect();
        let v = s.shift(&u, 0.37);
        for j in 0..32 {
            let y = x[j] - 0.37;
            assert!((v[j] - (y.cos() + 0.5 * (2.0 * y).sin())).abs() < 1e-13);
        }
    }

    #[test]
    fn gradient_and_poisson_2d() {
        let s = Spectral2D::new(32).unwrap();
        let u = s.sample(|x, y| x.cos() * (2.0 * y).sin());
        let (ux, uy) = s.gradient(&u);
        let ex = s.sample(|x, y| -x.sin() * (2.0 * y).sin());
        let ey = s.sample(|x, y| 2.0 * x.cos() * (2.0 * y).cos());
        for i in 0..u.len() {
            assert!((ux[i] - ex[i]).abs() < 1e-12 && (uy[i] - ey[i]).abs() < 1e-12);
        }
        let lap: Vec<f64> = u.iter().map(|v| -5.0 * v).collect();
        let back = s.solve_poisson(&lap);
        for i in 0..u.len() {
            assert!((back[i] - u[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn power_integrals_are_exact() {
        let s = Spectral2D::new(32).unwrap();
        let w = s.sample(|x, y| 2.0 * x.cos() * y.cos());
        let four_pi2 = 4.0 * PI * PI;
        assert!((s.integrate_power(&w, 2).unwrap() - four_pi2).abs() < 1e-11);
        // mean of 16 cos⁴x cos⁴y = 16 · (3/8)² = 9/4
        assert!((s.integrate_power(&w, 4).unwrap() - 2.25 * four_pi2).abs() < 1e-10);
    }

    #[test]
    fn interpolant_reproduces_off_grid_values() {
        let s = Spectral2D::new(16).unwrap();
        let f = |x: f64, y: f64| (x + 2.0 * y).sin() - 0.3 * (3.0 * x).cos();
        let it = s.interpolant(&s.sample(f));
        let (v, gx, gy) = it.eval_with_gradient(0.123, 4.56);
        assert!((v - f(0.123, 4.56)).abs() < 1e-13);
        let ex = (0.123f64 + 9.12).cos() + 0.9 * (0.369f64).sin();
        assert!((gx - ex).abs() < 1e-12);
        assert!((gy - 2.0 * (0.123f64 + 9.12).cos()).abs() < 1e-12);
        assert!((it.eval(1.0, 2.0) - f(1.0, 2.0)).abs() < 1e-13);
    }

    #[test]
    fn tail_fraction_sees_high_modes() {
        let s = Spectral1D::new(64).unwrap();
        let x = s.nodes();
        let low: Vec<f64> = x.iter().map(|x| x.sin()).collect();
        let high: Vec<f64> = x.iter().map(|x| x.sin() + (20.0 * x).sin()).collect();
        assert!(s.tail_fraction(&low) < 1e-20);
        assert!((s.tail_fraction(&high) - 0.5).abs() < 1e-12);
    }
}
