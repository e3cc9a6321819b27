//! Periodic pseudo-spectral solvers for rough transport PDEs
//! `dS = F(S) dt + G_k S d𝐙^k` with linear rough operators `G_k`.
//!
//! A step is Strang split: half a step of RK4 on the drift, the rough
//! Davie increment `S + G_k S δZ^k + G_k G_l S 𝕫^{lk}`, half a step of RK4.
//! Because `G_k` is linear the level-2 term is an exact operator product.
//! Long rough increments are cut into equal pieces whose Chen product
//! reproduces the interval's signature exactly, so the per-piece size
//! `‖G‖ |δZ|` stays below a safety bound.

pub mod euler;
pub mod one_d;

use log::warn;

use crate::error::{Error, Result};
use crate::rough_path::GeometricRoughPath;

pub use euler::{Euler2D, Invariants2D, Pressures, RoughFields2D};
pub use one_d::{Burgers1D, CamassaHolm1D, RoughFields1D};

/// A semi-discrete rough PDE on a periodic grid.
pub trait RoughPde: Sync {
    /// Number of real unknowns.
    fn state_len(&self) -> usize;

    /// Points per periodic direction.
    fn grid_size(&self) -> usize;

    fn noise_dim(&self) -> usize;

    fn drift(&self, state: &[f64]) -> Result<Vec<f64>>;

    fn rough_op(&self, k: usize, state: &[f64]) -> Result<Vec<f64>>;

    /// Upper bound for the norm of `G_k` on the retained band.
    fn rough_bound(&self, k: usize) -> f64;

    /// Upper bound for the norm of the commutator `[G_k, G_l]`.
    fn commutator_bound(&self, k: usize, l: usize) -> f64 {
        2.0 * self.rough_bound(k) * self.rough_bound(l)
    }

    /// Largest characteristic speed of the drift at this state.
    fn advection_speed(&self, state: &[f64]) -> f64;

    /// Restore the discrete constraints (dealiasing, pinned means).
    fn project(&self, state: &[f64]) -> Vec<f64>;

    /// Share of retained energy in the top third of the band.
    fn tail_fraction(&self, state: &[f64]) -> f64;
}

#[derive(Debug, Clone, Copy)]
pub struct PdeOptions {
    /// Bound on `Δt · max|u| · n`.
    pub cfl_safety: f64,
    /// Bound on `‖G‖ |δZ|` per rough piece.
    pub rough_safety: f64,
    pub tail_warn: f64,
    pub tail_abort: f64,
}

impl Default for PdeOptions {
    fn default() -> Self {
        Self {
            cfl_safety: 4.0,
            rough_safety: 0.05,
            tail_warn: 0.01,
            tail_abort: 0.1,
        }
    }
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// One classical RK4 step of the drift.
pub fn drift_rk4<P: RoughPde + ?Sized>(pde: &P, state: &[f64], h: f64) -> Result<Vec<f64>> {
    let k1 = pde.drift(state)?;
    let mut tmp = state.to_vec();
    axpy(&mut tmp, 0.5 * h, &k1);
    let k2 = pde.drift(&tmp)?;
    tmp.copy_from_slice(state);
    axpy(&mut tmp, 0.5 * h, &k2);
    let k3 = pde.drift(&tmp)?;
    tmp.copy_from_slice(state);
    axpy(&mut tmp, h, &k3);
    let k4 = pde.drift(&tmp)?;
    let mut out = state.to_vec();
    for j in 0..out.len() {
        out[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    }
    Ok(out)
}

/// Number of equal pieces the rough increment `(dz, zz)` is cut into.
pub fn rough_pieces<P: RoughPde + ?Sized>(pde: &P, dz: &[f64], zz: &[f64], safety: f64) -> usize {
    let nk = dz.len();
    let bounds: Vec<f64> = (0..nk).map(|k| pde.rough_bound(k)).collect();
    let first: f64 = bounds.iter().zip(dz).map(|(g, d)| g * d.abs()).sum();
    // The area pairs with commutators; a symmetric defect (non-geometric
    // input) pairs with plain products.
    let (mut area, mut defect) = (0.0f64, 0.0f64);
    for l in 0..nk {
        for k in 0..nk {
            let (a, b) = (zz[l * nk + k], zz[k * nk + l]);
            if k < l {
                area += pde.commutator_bound(k, l) * 0.5 * (a - b).abs();
            }
            let sym = 0.5 * (a + b) - 0.5 * dz[l] * dz[k];
            defect = defect.max(bounds[k] * bounds[l] * sym.abs());
        }
    }
    let m = (first / safety).max(area / safety).max(defect / (safety * safety));
    (m.ceil() as usize).max(1)
}

/// Apply the rough increment `(dz, zz)` in `m` Chen-consistent pieces.
/// The operators return retained fields, so no projection is needed between pieces.
/// Piece `j` carries `(dz/m, ½ (dz/m)⊗(dz/m) + (zz − ½ dz⊗dz)/m)`.
pub fn rough_increment<P: RoughPde + ?Sized>(
    pde: &P,
    state: &[f64],
    dz: &[f64],
    zz: &[f64],
    pieces: usize,
) -> Result<Vec<f64>> {
    let nk = dz.len();
    let m = pieces.max(1) as f64;
    let a: Vec<f64> = dz.iter().map(|d| d / m).collect();
    let mut b = vec![0.0; nk * nk];
    for l in 0..nk {
        for k in 0..nk {
            let idx = l * nk + k;
            b[idx] = 0.5 * a[l] * a[k] + (zz[idx] - 0.5 * dz[l] * dz[k]) / m;
        }
    }
    let mut s = state.to_vec();
    for _ in 0..pieces.max(1) {
        let first: Vec<Vec<f64>> = (0..nk).map(|l| pde.rough_op(l, &s)).collect::<Result<_>>()?;
        let mut next = s.clone();
        for k in 0..nk {
            axpy(&mut next, a[k], &first[k]);
            let mut inner = vec![0.0; s.len()];
            let mut any = false;
            for l in 0..nk {
                let c = b[l * nk + k];
                if c != 0.0 {
                    axpy(&mut inner, c, &first[l]);
                    any = true;
                }
            }
            if any {
                axpy(&mut next, 1.0, &pde.rough_op(k, &inner)?);
            }
        }
        s = next;
    }
    Ok(s)
}

/// Advance from `t_i` to `t_{i+1}` of the driver's grid.
pub fn step_rough_pde<P: RoughPde + ?Sized>(
    pde: &P,
    state: &[f64],
    path: &GeometricRoughPath,
    i: usize,
    opts: &PdeOptions,
) -> Result<Vec<f64>> {
    if pde.noise_dim() != path.dim() {
        return Err(Error::Dimension(format!(
            "{} rough operators for a {}-dimensional driver",
            pde.noise_dim(),
            path.dim()
        )));
    }
    let grid = path.grid();
    let (t0, t1) = (grid.time(i), grid.time(i + 1));
    let dt = t1 - t0;
    check_cfl(pde, state, dt, path.intervals(), opts)?;
    let mut s = drift_rk4(pde, state, 0.5 * dt)?;
    if pde.noise_dim() > 0 {
        let dz = path.step_increment(i);
        let zz = path.second_level(i);
        let m = rough_pieces(pde, &dz, zz, opts.rough_safety);
        s = rough_increment(pde, &s, &dz, zz, m)?;
    }
    s = drift_rk4(pde, &s, 0.5 * dt)?;
    s = pde.project(&s);
    check_health(pde, &s, t0, t1, opts)?;
    Ok(s)
}

/// The same split with no rough part: the deterministic reference solver.
pub fn step_deterministic<P: RoughPde + ?Sized>(
    pde: &P,
    state: &[f64],
    dt: f64,
    intervals: usize,
    opts: &PdeOptions,
) -> Result<Vec<f64>> {
    check_cfl(pde, state, dt, intervals, opts)?;
    let s = drift_rk4(pde, state, 0.5 * dt)?;
    let s = pde.project(&drift_rk4(pde, &s, 0.5 * dt)?);
    check_health(pde, &s, 0.0, dt, opts)?;
    Ok(s)
}

fn check_cfl<P: RoughPde + ?Sized>(pde: &P, state: &[f64], dt: f64, intervals: usize, opts: &PdeOptions) -> Result<()> {
    let courant = dt.abs() * pde.advection_speed(state) * pde.grid_size() as f64;
    if courant > opts.cfl_safety {
        return Err(Error::Cfl {
            courant,
            limit: opts.cfl_safety,
            suggested_steps: (intervals as f64 * courant / opts.cfl_safety).ceil() as usize,
        });
    }
    Ok(())
}

fn check_health<P: RoughPde + ?Sized>(pde: &P, s: &[f64], t0: f64, t1: f64, opts: &PdeOptions) -> Result<()> {
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::BlowUp {
            time: t1,
            last_valid: t0,
        });
    }
    let tail = pde.tail_fraction(s);
    if tail > opts.tail_abort {
        return Err(Error::Underresolved {
            time: t1,
            fraction: tail,
        });
    }
    if tail > opts.tail_warn {
        warn!("spectral tail holds {:.2}% of the energy at t = {t1}", 100.0 * tail);
    }
    Ok(())
}

/// Run over the whole grid, calling `observe(i, t_i, state)` at every instant.
pub fn integrate_rough_pde<P, F>(
    pde: &P,
    initial: &[f64],
    path: &GeometricRoughPath,
    opts: &PdeOptions,
    mut observe: F,
) -> Result<Vec<f64>>
where
    P: RoughPde + ?Sized,
    F: FnMut(usize, f64, &[f64]),
{
    if initial.len() != pde.state_len() {
        return Err(Error::Dimension(format!(
            "initial state has {} values, expected {}",
            initial.len(),
            pde.state_len()
        )));
    }
    let mut s = pde.project(initial);
    observe(0, path.grid().time(0), &s);
    for i in 0..path.intervals() {
        s = step_rough_pde(pde, &s, path, i, opts)?;
        observe(i + 1, path.grid().time(i + 1), &s);
    }
    Ok(s)
}

/// Deterministic run on the same time grid.
pub fn integrate_deterministic<P, F>(
    pde: &P,
    initial: &[f64],
    grid: &crate::grid::TimeGrid,
    opts: &PdeOptions,
    mut observe: F,
) -> Result<Vec<f64>>
where
    P: RoughPde + ?Sized,
    F: FnMut(usize, f64, &[f64]),
{
    let mut s = pde.project(initial);
    observe(0, grid.time(0), &s);
    for i in 0..grid.intervals() {
        s = step_deterministic(pde, &s, grid.step(i), grid.intervals(), opts).map_err(|e| at_time(e, grid.time(i)))?;
        observe(i + 1, grid.time(i + 1), &s);
    }
    Ok(s)
}

/// Shift the times of a health error reported relative to the step start.
fn at_time(e: Error, t0: f64) -> Error {
    match e {
        Error::BlowUp { time, last_valid } => Error::BlowUp {
            time: time + t0,
            last_valid: last_valid + t0,
        },
        Error::Underresolved { time, fraction } => Error::Underresolved {
            time: time + t0,
            fraction,
        },
        e => e,
    }
}

pub(crate) fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}
