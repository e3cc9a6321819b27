//! Rough incompressible 2D Euler in vorticity form on `[0, 2π)²`.
//!
//! Velocity comes from the stream function `ψ̂ = ω̂ / |k|²` as
//! `u = (∂_y ψ, −∂_x ψ)`, so `∂_x u_y − ∂_y u_x = ω` and `∇·u = 0`.

use std::f64::consts::PI;

use super::{max_abs, RoughPde};
use crate::error::{Error, Result};
use crate::spectral::{Complex, Spectral2D};

const DIVERGENCE_TOLERANCE: f64 = 1e-12;
const MEAN_TOLERANCE: f64 = 1e-12;

/// Rough velocity fields `ξ_k = (ξ_k^x, ξ_k^y)` sampled on the grid.
#[derive(Debug, Clone)]
pub struct RoughFields2D {
    x: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
    /// `[∂_x ξ^x, ∂_y ξ^x, ∂_x ξ^y, ∂_y ξ^y]` per field.
    grad: Vec<[Vec<f64>; 4]>,
    max_divergence: Vec<f64>,
}

impl RoughFields2D {
    /// Components are projected onto the retained band.
    pub fn new(s: &Spectral2D, components: Vec<(Vec<f64>, Vec<f64>)>) -> Result<Self> {
        let mut out = Self::none();
        for (k, (fx, fy)) in components.into_iter().enumerate() {
            if fx.len() != s.len() || fy.len() != s.len() {
                return Err(Error::Dimension(format!("rough field {k} does not match the grid")));
            }
            let (fx, fy) = (s.project(&fx), s.project(&fy));
            let (xx, xy) = s.gradient(&fx);
            let (yx, yy) = s.gradient(&fy);
            let div: Vec<f64> = xx.iter().zip(&yy).map(|(a, b)| a + b).collect();
            out.max_divergence.push(max_abs(&div));
            out.grad.push([xx, xy, yx, yy]);
            out.x.push(fx);
            out.y.push(fy);
        }
        Ok(out)
    }

    /// `ξ_k = (∂_y ψ_k, −∂_x ψ_k)`, divergence-free by construction.
    pub fn from_stream_functions(s: &Spectral2D, psis: &[Vec<f64>]) -> Result<Self> {
        let comps = psis
            .iter()
            .map(|psi| {
                let (px, py) = s.gradient(psi);
                (py, px.iter().map(|v| -v).collect())
            })
            .collect();
        Self::new(s, comps)
    }

    pub fn constant(s: &Spectral2D, vectors: &[[f64; 2]]) -> Result<Self> {
        Self::new(s, vectors.iter().map(|v| (vec![v[0]; s.len()], vec![v[1]; s.len()])).collect())
    }

    pub fn none() -> Self {
        Self {
            x: Vec::new(),
            y: Vec::new(),
            grad: Vec::new(),
            max_divergence: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn components(&self, k: usize) -> (&[f64], &[f64]) {
        (&self.x[k], &self.y[k])
    }

    pub fn max_divergence(&self, k: usize) -> f64 {
        self.max_divergence[k]
    }

    pub fn is_divergence_free(&self, k: usize) -> bool {
        self.max_divergence[k] <= DIVERGENCE_TOLERANCE * (1.0 + max_abs(&self.x[k]).max(max_abs(&self.y[k])))
    }

    /// `max |[ξ_k, ξ_l]|`, the Lie bracket `(ξ_k·∇)ξ_l − (ξ_l·∇)ξ_k` in sup norm.
    pub fn bracket_sup(&self, k: usize, l: usize) -> f64 {
        let [kxx, kxy, kyx, kyy] = &self.grad[k];
        let [lxx, lxy, lyx, lyy] = &self.grad[l];
        let (ax, ay, bx, by) = (&self.x[k], &self.y[k], &self.x[l], &self.y[l]);
        (0..ax.len())
            .map(|j| {
                let cx = ax[j] * lxx[j] + ay[j] * lxy[j] - bx[j] * kxx[j] - by[j] * kxy[j];
                let cy = ax[j] * lyx[j] + ay[j] * lyy[j] - bx[j] * kyx[j] - by[j] * kyy[j];
                cx.abs() + cy.abs()
            })
            .fold(0.0, f64::max)
    }

    fn bound(&self, k: usize, kmax: f64) -> f64 {
        let speed = self.x[k]
            .iter()
            .zip(&self.y[k])
            .map(|(a, b)| a.abs() + b.abs())
            .fold(0.0, f64::max);
        speed * kmax
    }
}

fn velocity_from_spectrum(s: &Spectral2D, w: &[Complex]) -> (Vec<f64>, Vec<f64>) {
    let psi = s.apply_multiplier(w, |kx, ky| {
        let k2 = (kx * kx + ky * ky) as f64;
        if k2 == 0.0 {
            Complex::new(0.0, 0.0)
        } else {
            Complex::new(1.0 / k2, 0.0)
        }
    });
    let ux = s.apply_multiplier(&psi, |_, ky| Complex::new(0.0, ky as f64));
    let uy = s.apply_multiplier(&psi, |kx, _| Complex::new(0.0, -(kx as f64)));
    (s.inverse(&ux), s.inverse(&uy))
}

fn check_mean(s: &Spectral2D, w: &[f64], spec: &[Complex]) -> Result<()> {
    let mean = spec[0].re / s.len() as f64;
    if mean.abs() > MEAN_TOLERANCE * (1.0 + max_abs(w)) {
        return Err(Error::NonzeroMean(mean));
    }
    Ok(())
}

/// Velocity of a mean-free vorticity field.
pub fn biot_savart(s: &Spectral2D, w: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let spec = s.forward(w);
    check_mean(s, w, &spec)?;
    Ok(velocity_from_spectrum(s, &spec))
}

/// `∂_x v_y − ∂_y v_x`.
pub fn curl(s: &Spectral2D, vx: &[f64], vy: &[f64]) -> Vec<f64> {
    let (_, a) = s.gradient(vx);
    let (b, _) = s.gradient(vy);
    b.iter().zip(&a).map(|(p, q)| p - q).collect()
}

fn transport(s: &Spectral2D, vx: &[f64], vy: &[f64], wx: &[f64], wy: &[f64]) -> Vec<f64> {
    let raw: Vec<f64> = (0..vx.len()).map(|j| -(vx[j] * wx[j] + vy[j] * wy[j])).collect();
    s.project_mean_free(&raw)
}

/// `−(u·∇)ω` with `u` the Biot–Savart velocity of `ω`.
pub fn euler_vorticity_drift(s: &Spectral2D, w: &[f64]) -> Result<Vec<f64>> {
    let spec = s.forward(w);
    check_mean(s, w, &spec)?;
    let (ux, uy) = velocity_from_spectrum(s, &spec);
    let (wx, wy) = s.gradient_from_spectrum(&spec);
    Ok(transport(s, &ux, &uy, &wx, &wy))
}

/// `−(ξ_k·∇)ω`; the field must be divergence-free.
pub fn euler_rough_op(s: &Spectral2D, fields: &RoughFields2D, w: &[f64], k: usize) -> Result<Vec<f64>> {
    if !fields.is_divergence_free(k) {
        return Err(Error::NotDivergenceFree(k));
    }
    let (wx, wy) = s.gradient(w);
    Ok(transport(s, &fields.x[k], &fields.y[k], &wx, &wy))
}

/// Pressure fields of a homogeneous state: `Δp = −∇·((u·∇)u)` and
/// `Δq_k = −∇·((ξ_k·∇)u + (∇ξ_k)ᵀu)`, all mean-free.
#[derive(Debug, Clone)]
pub struct Pressures {
    pub p: Vec<f64>,
    pub q: Vec<Vec<f64>>,
}

pub fn recover_pressures(s: &Spectral2D, fields: &RoughFields2D, w: &[f64]) -> Result<Pressures> {
    let (ux, uy) = biot_savart(s, w)?;
    let (uxx, uxy) = s.gradient(&ux);
    let (uyx, uyy) = s.gradient(&uy);
    let n = w.len();
    let solve = |bx: Vec<f64>, by: Vec<f64>| {
        let div = s.divergence(&s.project(&bx), &s.project(&by));
        s.solve_poisson(&div.iter().map(|v| -v).collect::<Vec<_>>())
    };
    let ax: Vec<f64> = (0..n).map(|j| ux[j] * uxx[j] + uy[j] * uxy[j]).collect();
    let ay: Vec<f64> = (0..n).map(|j| ux[j] * uyx[j] + uy[j] * uyy[j]).collect();
    let p = solve(ax, ay);
    let q = (0..fields.len())
        .map(|k| {
            let (xi, eta) = (&fields.x[k], &fields.y[k]);
            let [xx, xy, yx, yy] = &fields.grad[k];
            let bx = (0..n)
                .map(|j| xi[j] * uxx[j] + eta[j] * uxy[j] + xx[j] * ux[j] + yx[j] * uy[j])
                .collect();
            let by = (0..n)
                .map(|j| xi[j] * uyx[j] + eta[j] * uyy[j] + xy[j] * ux[j] + yy[j] * uy[j])
                .collect();
            solve(bx, by)
        })
        .collect();
    Ok(Pressures { p, q })
}

/// Quadratic and quartic integrals of a vorticity field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Invariants2D {
    /// `½∫|u|²`.
    pub energy: f64,
    /// `∫ω²`.
    pub enstrophy: f64,
    /// `∫ω⁴`.
    pub casimir4: f64,
    /// `(2π)⁻² ∫ω`.
    pub mean_omega: f64,
}

/// Exact for retained fields: Parseval for the quadratic integrals,
/// zero-padded quadrature for the quartic one.
pub fn invariants(s: &Spectral2D, w: &[f64]) -> Result<Invariants2D> {
    let spec = s.forward(w);
    let n2 = s.len() as f64;
    let scale = 4.0 * PI * PI / (n2 * n2);
    let (mut enstrophy, mut energy) = (0.0, 0.0);
    for (idx, c) in spec.iter().enumerate() {
        if !s.retained(idx) {
            continue;
        }
        let e = c.norm_sqr();
        enstrophy += e;
        let (kx, ky) = s.wavevector(idx);
        let k2 = (kx * kx + ky * ky) as f64;
        if k2 > 0.0 {
            energy += e / k2;
        }
    }
    Ok(Invariants2D {
        energy: 0.5 * energy * scale,
        enstrophy: enstrophy * scale,
        casimir4: s.integrate_power(w, 4)?,
        mean_omega: spec[0].re / n2,
    })
}

#[derive(Debug, Clone)]
pub struct Euler2D {
    pub spectral: Spectral2D,
    pub fields: RoughFields2D,
}

impl Euler2D {
    pub fn new(n: usize, fields: RoughFields2D) -> Result<Self> {
        let spectral = Spectral2D::new(n)?;
        if let Some(f) = fields.x.first() {
            if f.len() != spectral.len() {
                return Err(Error::Dimension("rough fields were built on a different grid".into()));
            }
        }
        Ok(Self { spectral, fields })
    }

    pub fn velocity(&self, w: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        biot_savart(&self.spectral, w)
    }
}

impl RoughPde for Euler2D {
    fn state_len(&self) -> usize {
        self.spectral.len()
    }
    fn grid_size(&self) -> usize {
        self.spectral.n()
    }
    fn noise_dim(&self) -> usize {
        self.fields.len()
    }
    fn drift(&self, w: &[f64]) -> Result<Vec<f64>> {
        euler_vorticity_drift(&self.spectral, w)
    }
    fn rough_op(&self, k: usize, w: &[f64]) -> Result<Vec<f64>> {
        euler_rough_op(&self.spectral, &self.fields, w, k)
    }
    fn rough_bound(&self, k: usize) -> f64 {
        self.fields.bound(k, self.spectral.kmax() as f64)
    }
    fn commutator_bound(&self, k: usize, l: usize) -> f64 {
        // Transport operators commute up to transport by the bracket field.
        self.fields.bracket_sup(k, l) * self.spectral.kmax() as f64
    }
    fn advection_speed(&self, w: &[f64]) -> f64 {
        let spec = self.spectral.forward(w);
        let (ux, uy) = velocity_from_spectrum(&self.spectral, &spec);
        ux.iter().zip(&uy).map(|(a, b)| a.hypot(*b)).fold(0.0, f64::max)
    }
    fn project(&self, w: &[f64]) -> Vec<f64> {
        self.spectral.project_mean_free(w)
    }
    fn tail_fraction(&self, w: &[f64]) -> f64 {
        self.spectral.tail_fraction(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fluid::{integrate_deterministic, integrate_rough_pde, PdeOptions};
    use crate::gaussian::{lift_gaussian, GaussianSpec};
    use crate::grid::TimeGrid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn taylor_green(s: &Spectral2D) -> Vec<f64> {
        s.sample(|x, y| 2.0 * x.cos() * y.cos())
    }

    fn random_band_limited(s: &Spectral2D, kmax: i64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut modes = Vec::new();
        for kx in -kmax..=kmax {
            for ky in 0..=kmax {
                if ky == 0 && kx <= 0 {
                    continue;
                }
                modes.push((kx as f64, ky as f64, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            }
        }
        s.sample(|x, y| modes.iter().map(|(a, b, c, d)| c * (a * x + b * y).cos() + d * (a * x + b * y).sin()).sum())
    }

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn biot_savart_closed_forms() {
        let s = Spectral2D::new(32).unwrap();
        let (ux, uy) = biot_savart(&s, &taylor_green(&s)).unwrap();
        assert!(dist(&ux, &s.sample(|x, y| -x.cos() * y.sin())) < 1e-13);
        assert!(dist(&uy, &s.sample(|x, y| x.sin() * y.cos())) < 1e-13);
        let (ux, uy) = biot_savart(&s, &s.sample(|x, _| x.cos())).unwrap();
        assert!(max_abs(&ux) < 1e-14);
        assert!(dist(&uy, &s.sample(|x, _| x.sin())) < 1e-13);
    }

    #[test]
    fn biot_savart_round_trip() {
        let s = Spectral2D::new(64).unwrap();
        let w = random_band_limited(&s, 6, 2);
        let (ux, uy) = biot_savart(&s, &w).unwrap();
        assert!(dist(&curl(&s, &ux, &uy), &w) < 1e-12 * max_abs(&w));
        assert!(max_abs(&s.divergence(&ux, &uy)) < 1e-12);
        let shifted: Vec<f64> = w.iter().map(|v| v + 0.1).collect();
        assert!(matches!(biot_savart(&s, &shifted), Err(Error::NonzeroMean(_))));
    }

    #[test]
    fn stationary_and_single_mode_drift_vanish() {
        let s = Spectral2D::new(32).unwrap();
        assert!(max_abs(&euler_vorticity_drift(&s, &taylor_green(&s)).unwrap()) < 1e-13);
        let single = s.sample(|x, y| (2.0 * x - 3.0 * y).sin());
        assert!(max_abs(&euler_vorticity_drift(&s, &single).unwrap()) < 1e-12);
    }

    /// Eighth-order periodic central differences along x (axis 0) or y (axis 1).
    fn fd(u: &[f64], n: usize, axis: usize) -> Vec<f64> {
        let h = 2.0 * PI / n as f64;
        let c = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
        (0..n * n)
            .map(|idx| {
                let (ix, iy) = (idx % n, idx / n);
                let at = |o: i64| {
                    let (jx, jy) = if axis == 0 {
                        ((ix as i64 + o).rem_euclid(n as i64) as usize, iy)
                    } else {
                        (ix, (iy as i64 + o).rem_euclid(n as i64) as usize)
                    };
                    u[jy * n + jx]
                };
                c.iter().enumerate().map(|(m, cm)| cm * (at(m as i64 + 1) - at(-(m as i64) - 1))).sum::<f64>() / h
            })
            .collect()
    }

    #[test]
    fn two_mode_drift_matches_finite_differences() {
        let n = 256;
        let s = Spectral2D::new(n).unwrap();
        let w = s.sample(|x, y| 2.0 * x.cos() * y.cos() + 3.0 * (2.0 * x + y).sin());
        let psi = s.sample(|x, y| x.cos() * y.cos() + 0.6 * (2.0 * x + y).sin());
        let (ux, uy) = (fd(&psi, n, 1), fd(&psi, n, 0).iter().map(|v| -v).collect::<Vec<_>>());
        let (wx, wy) = (fd(&w, n, 0), fd(&w, n, 1));
        let oracle: Vec<f64> = (0..n * n).map(|j| -(ux[j] * wx[j] + uy[j] * wy[j])).collect();
        let got = euler_vorticity_drift(&s, &w).unwrap();
        assert!(dist(&got, &oracle) < 1e-8 * max_abs(&oracle));
    }

    #[test]
    fn rough_operator_oracles() {
        let s = Spectral2D::new(32).unwrap();
        let fields = RoughFields2D::constant(&s, &[[0.4, -1.1]]).unwrap();
        let w = s.sample(|x, y| (x + 2.0 * y).cos());
        let g = euler_rough_op(&s, &fields, &w, 0).unwrap();
        // −(ξ·∇) cos(k·x) = (ξ·k) sin(k·x)
        assert!(dist(&g, &s.sample(|x, y| (0.4 - 2.2) * (x + 2.0 * y).sin())) < 1e-13);

        let s = Spectral2D::new(128).unwrap();
        let psi = s.sample(|x, y| (x - y).sin() * 0.5 + (2.0 * y).cos());
        let varying = RoughFields2D::from_stream_functions(&s, &[psi]).unwrap();
        assert!(varying.is_divergence_free(0));
        let w = random_band_limited(&s, 4, 8);
        let (wx, wy) = (fd(&w, 128, 0), fd(&w, 128, 1));
        let (xi, eta) = varying.components(0);
        let oracle: Vec<f64> = (0..w.len()).map(|j| -(xi[j] * wx[j] + eta[j] * wy[j])).collect();
        let got = euler_rough_op(&s, &varying, &w, 0).unwrap();
        assert!(dist(&got, &oracle) < 1e-8 * max_abs(&oracle));

        let compressible = RoughFields2D::new(&s, vec![(s.sample(|x, _| x.sin()), vec![0.0; s.len()])]).unwrap();
        assert!(matches!(
            euler_rough_op(&s, &compressible, &w, 0),
            Err(Error::NotDivergenceFree(0))
        ));
    }

    #[test]
    fn taylor_green_pressure() {
        let s = Spectral2D::new(32).unwrap();
        let fields = RoughFields2D::constant(&s, &[[0.3, 0.2]]).unwrap();
        let pr = recover_pressures(&s, &fields, &taylor_green(&s)).unwrap();
        let want = s.sample(|x, y| -((2.0 * x).cos() + (2.0 * y).cos()) / 4.0);
        assert!(dist(&pr.p, &want) < 1e-13);
        assert!(max_abs(&pr.q[0]) < 1e-13);
    }

    #[test]
    fn pressure_closes_the_momentum_balance() {
        // ∂_t u = −((u·∇)u + ∇p) must be the velocity of the vorticity tendency.
        let s = Spectral2D::new(64).unwrap();
        let w = random_band_limited(&s, 5, 21);
        let pr = recover_pressures(&s, &RoughFields2D::none(), &w).unwrap();
        let (ux, uy) = biot_savart(&s, &w).unwrap();
        let (uxx, uxy) = s.gradient(&ux);
        let (uyx, uyy) = s.gradient(&uy);
        let (px, py) = s.gradient(&pr.p);
        let ax: Vec<f64> = (0..w.len()).map(|j| ux[j] * uxx[j] + uy[j] * uxy[j]).collect();
        let ay: Vec<f64> = (0..w.len()).map(|j| ux[j] * uyx[j] + uy[j] * uyy[j]).collect();
        let (ax, ay) = (s.project(&ax), s.project(&ay));
        let tx: Vec<f64> = (0..w.len()).map(|j| -(ax[j] + px[j])).collect();
        let ty: Vec<f64> = (0..w.len()).map(|j| -(ay[j] + py[j])).collect();
        let (vx, vy) = biot_savart(&s, &euler_vorticity_drift(&s, &w).unwrap()).unwrap();
        let scale = max_abs(&tx).max(max_abs(&ty));
        assert!(dist(&tx, &vx) < 1e-8 * scale && dist(&ty, &vy) < 1e-8 * scale);
    }

    #[test]
    fn invariants_of_taylor_green() {
        let s = Spectral2D::new(32).unwrap();
        let inv = invariants(&s, &taylor_green(&s)).unwrap();
        let a = 4.0 * PI * PI;
        assert!((inv.enstrophy - a).abs() < 1e-11);
        assert!((inv.energy - a / 4.0).abs() < 1e-12);
        assert!((inv.casimir4 - 2.25 * a).abs() < 1e-10);
        assert!(inv.mean_omega.abs() < 1e-15);
        let zero = invariants(&s, &vec![0.0; 1024]).unwrap();
        assert_eq!((zero.enstrophy, zero.casimir4, zero.mean_omega), (0.0, 0.0, 0.0));
        let fine = Spectral2D::new(64).unwrap();
        let again = invariants(&fine, &taylor_green(&fine)).unwrap();
        assert!((again.enstrophy - inv.enstrophy).abs() < 1e-11);
    }

    #[test]
    fn taylor_green_is_stationary() {
        let p = Euler2D::new(32, RoughFields2D::none()).unwrap();
        let w0 = taylor_green(&p.spectral);
        let grid = TimeGrid::uniform(0.0, 1.0, 20).unwrap();
        let w = integrate_deterministic(&p, &w0, &grid, &PdeOptions::default(), |_, _, _| {}).unwrap();
        assert!(dist(&w, &w0) < 1e-10);
    }

    #[test]
    fn constant_fields_translate_taylor_green() {
        let n = 32;
        let s = Spectral2D::new(n).unwrap();
        let fields = RoughFields2D::constant(&s, &[[0.5, 0.0], [0.2, -0.3]]).unwrap();
        let p = Euler2D::new(n, fields).unwrap();
        let spec = GaussianSpec::fbm(0.4, 2, 17).with_fine_resolution(8);
        let path = lift_gaussian(&spec, &TimeGrid::uniform(0.0, 1.0, 32).unwrap()).unwrap();
        let w0 = taylor_green(&s);
        let opts = PdeOptions {
            rough_safety: 0.02,
            ..PdeOptions::default()
        };
        let w = integrate_rough_pde(&p, &w0, &path, &opts, |_, _, _| {}).unwrap();
        let dz = path.increment(0, path.intervals());
        let (cx, cy) = (0.5 * dz[0] + 0.2 * dz[1], -0.3 * dz[1]);
        let want = s.sample(|x, y| 2.0 * (x - cx).cos() * (y - cy).cos());
        assert!(dist(&w, &want) < 1e-6, "{}", dist(&w, &want));
    }
}
