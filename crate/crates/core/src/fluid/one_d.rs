//! Rough Burgers and rough Camassa–Holm on `[0, 2π)`.

use std::f64::consts::PI;

use super::{max_abs, RoughPde};
use crate::error::{Error, Result};
use crate::spectral::{Complex, Spectral1D};

/// Rough fields `ξ_k` sampled on the grid, with their first two derivatives.
#[derive(Debug, Clone)]
pub struct RoughFields1D {
    values: Vec<Vec<f64>>,
    dx: Vec<Vec<f64>>,
    dxx: Vec<Vec<f64>>,
}

impl RoughFields1D {
    /// Fields are projected onto the retained band before use.
    pub fn new(spectral: &Spectral1D, fields: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(f) = fields.iter().find(|f| f.len() != spectral.n()) {
            return Err(Error::Dimension(format!(
                "rough field with {} samples on a {}-point grid",
                f.len(),
                spectral.n()
            )));
        }
        let values: Vec<Vec<f64>> = fields.iter().map(|f| spectral.project(f)).collect();
        let dx = values.iter().map(|f| spectral.derivative(f, 1)).collect();
        let dxx = values.iter().map(|f| spectral.derivative(f, 2)).collect();
        Ok(Self { values, dx, dxx })
    }

    pub fn from_fns(spectral: &Spectral1D, fields: &[&dyn Fn(f64) -> f64]) -> Result<Self> {
        let x = spectral.nodes();
        Self::new(spectral, fields.iter().map(|f| x.iter().map(|&x| f(x)).collect()).collect())
    }

    pub fn none() -> Self {
        Self {
            values: Vec::new(),
            dx: Vec::new(),
            dxx: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, k: usize) -> &[f64] {
        &self.values[k]
    }

    /// `‖ξ‖ kmax + 2‖∂ξ‖ + α² ‖∂²ξ‖ kmax`.
    fn bound(&self, k: usize, kmax: f64, alpha: f64) -> f64 {
        max_abs(&self.values[k]) * kmax + 2.0 * max_abs(&self.dx[k]) + alpha * alpha * max_abs(&self.dxx[k]) * kmax
    }
}

fn product_dealiased(s: &Spectral1D, a: &[f64], b: &[f64]) -> Vec<f64> {
    let p: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    s.project(&p)
}

/// `−3 u ∂_x u`, dealiased.
pub fn burgers_drift(s: &Spectral1D, u: &[f64]) -> Vec<f64> {
    let ux = s.derivative(u, 1);
    product_dealiased(s, u, &ux).iter().map(|v| -3.0 * v).collect()
}

/// `−(ξ_k ∂_x u + 2 u ∂_x ξ_k)`.
pub fn burgers_rough_op(s: &Spectral1D, fields: &RoughFields1D, u: &[f64], k: usize) -> Vec<f64> {
    let ux = s.derivative(u, 1);
    let xi = &fields.values[k];
    let xix = &fields.dx[k];
    let raw: Vec<f64> = (0..u.len()).map(|j| -(xi[j] * ux[j] + 2.0 * u[j] * xix[j])).collect();
    s.project(&raw)
}

/// `Λ⁻² f` with `Λ² = 1 − α² ∂_x²`.
pub fn ch_helmholtz_inverse(s: &Spectral1D, f: &[f64], alpha: f64) -> Vec<f64> {
    let spec = s.forward(f);
    let a2 = alpha * alpha;
    s.inverse(&s.apply_multiplier(&spec, |k| Complex::new(1.0 / (1.0 + a2 * (k * k) as f64), 0.0)))
}

/// `−(u ∂_x u + ∂_x Λ⁻² (u² + (α²/2)(∂_x u)²))`.
pub fn ch_drift(s: &Spectral1D, u: &[f64], alpha: f64) -> Vec<f64> {
    let ux = s.derivative(u, 1);
    let a2 = alpha * alpha;
    let transport = product_dealiased(s, u, &ux);
    let source: Vec<f64> = u.iter().zip(&ux).map(|(v, d)| v * v + 0.5 * a2 * d * d).collect();
    let spec = s.forward(&source);
    let nonlocal = s.inverse(&s.apply_multiplier(&spec, |k| {
        Complex::new(0.0, k as f64 / (1.0 + a2 * (k * k) as f64))
    }));
    transport.iter().zip(&nonlocal).map(|(a, b)| -(a + b)).collect()
}

/// `−(ξ_k ∂_x u + Λ⁻² (2 u ∂_x ξ_k + α² ∂_x² ξ_k ∂_x u))`.
pub fn ch_rough_op(s: &Spectral1D, fields: &RoughFields1D, u: &[f64], k: usize, alpha: f64) -> Vec<f64> {
    let ux = s.derivative(u, 1);
    let a2 = alpha * alpha;
    let (xi, xix, xixx) = (&fields.values[k], &fields.dx[k], &fields.dxx[k]);
    let transport: Vec<f64> = (0..u.len()).map(|j| xi[j] * ux[j]).collect();
    let stretch: Vec<f64> = (0..u.len())
        .map(|j| 2.0 * u[j] * xix[j] + a2 * xixx[j] * ux[j])
        .collect();
    let transport = s.project(&transport);
    let stretch = ch_helmholtz_inverse(s, &stretch, alpha);
    transport.iter().zip(&stretch).map(|(a, b)| -(a + b)).collect()
}

/// `(∫u², ∫u)` over the period, exact for retained fields.
pub fn energy_and_mean(u: &[f64]) -> (f64, f64) {
    let n = u.len() as f64;
    let l = 2.0 * PI;
    (l * u.iter().map(|v| v * v).sum::<f64>() / n, l * u.iter().sum::<f64>() / n)
}

/// Momentum `m = Λ² u`.
pub fn ch_momentum(s: &Spectral1D, u: &[f64], alpha: f64) -> Vec<f64> {
    let uxx = s.derivative(u, 2);
    u.iter().zip(&uxx).map(|(v, d)| v - alpha * alpha * d).collect()
}

#[derive(Debug, Clone)]
pub struct Burgers1D {
    pub spectral: Spectral1D,
    pub fields: RoughFields1D,
}

impl Burgers1D {
    pub fn new(n: usize, fields: RoughFields1D) -> Result<Self> {
        Ok(Self {
            spectral: Spectral1D::new(n)?,
            fields,
        })
    }
}

impl RoughPde for Burgers1D {
    fn state_len(&self) -> usize {
        self.spectral.n()
    }
    fn grid_size(&self) -> usize {
        self.spectral.n()
    }
    fn noise_dim(&self) -> usize {
        self.fields.len()
    }
    fn drift(&self, u: &[f64]) -> Result<Vec<f64>> {
        Ok(burgers_drift(&self.spectral, u))
    }
    fn rough_op(&self, k: usize, u: &[f64]) -> Result<Vec<f64>> {
        Ok(burgers_rough_op(&self.spectral, &self.fields, u, k))
    }
    fn rough_bound(&self, k: usize) -> f64 {
        self.fields.bound(k, self.spectral.kmax() as f64, 0.0)
    }
    fn advection_speed(&self, u: &[f64]) -> f64 {
        3.0 * max_abs(u)
    }
    fn project(&self, u: &[f64]) -> Vec<f64> {
        self.spectral.project(u)
    }
    fn tail_fraction(&self, u: &[f64]) -> f64 {
        self.spectral.tail_fraction(u)
    }
}

#[derive(Debug, Clone)]
pub struct CamassaHolm1D {
    pub spectral: Spectral1D,
    pub fields: RoughFields1D,
    pub alpha: f64,
}

impl CamassaHolm1D {
    pub fn new(n: usize, fields: RoughFields1D, alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("α must be finite and ≥ 0, got {alpha}")));
        }
        Ok(Self {
            spectral: Spectral1D::new(n)?,
            fields,
            alpha,
        })
    }
}

impl RoughPde for CamassaHolm1D {
    fn state_len(&self) -> usize {
        self.spectral.n()
    }
    fn grid_size(&self) -> usize {
        self.spectral.n()
    }
    fn noise_dim(&self) -> usize {
        self.fields.len()
    }
    fn drift(&self, u: &[f64]) -> Result<Vec<f64>> {
        Ok(ch_drift(&self.spectral, u, self.alpha))
    }
    fn rough_op(&self, k: usize, u: &[f64]) -> Result<Vec<f64>> {
        Ok(ch_rough_op(&self.spectral, &self.fields, u, k, self.alpha))
    }
    fn rough_bound(&self, k: usize) -> f64 {
        self.fields.bound(k, self.spectral.kmax() as f64, self.alpha)
    }
    fn advection_speed(&self, u: &[f64]) -> f64 {
        3.0 * max_abs(u)
    }
    fn project(&self, u: &[f64]) -> Vec<f64> {
        self.spectral.project(u)
    }
    fn tail_fraction(&self, u: &[f64]) -> f64 {
        self.spectral.tail_fraction(u)
    }
}
