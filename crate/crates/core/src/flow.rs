//! One-step schemes and flows for `dY = u_t(Y) dt + ξ_k(Y) d𝐙^k`.
//!
//! Both steppers Strang-split the drift around the rough increment: half a
//! step of RK4 on `u` frozen at the left end, the rough update, then half a
//! step on `u` frozen at the right end. The rough update is either
//!
//! * **Davie**: `Y + ξ_k(Y) δZ^k + (Dξ_k ξ_l)(Y) 𝕫^{lk}`, or
//! * **Magnus**: the time-one map of the frozen field
//!   `ξ_k δZ^k + Σ_{k<l} [ξ_k, ξ_l] 𝔸^{kl}`, integrated with RK4.
//!
//! The level-1 coefficient of the frozen field is the increment `δZ^k`.
//! The second-level index convention is `𝕫^{lk} = ∫ δZ^l dZ^k`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{lie_bracket, Domain, VectorFieldFamily};
use crate::grid::TimeGrid;
use crate::rough_path::{antisymmetric_part, GeometricRoughPath, Signature2, TwoParameterPath};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Davie,
    Magnus,
}

#[derive(Debug, Clone, Copy)]
pub struct StepOptions {
    pub scheme: Scheme,
    /// RK4 substeps per drift half-step.
    pub drift_substeps: usize,
    /// RK4 substeps for the unit-time Magnus ODE.
    pub ode_substeps: usize,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            scheme: Scheme::Davie,
            drift_substeps: 1,
            ode_substeps: 8,
        }
    }
}

impl StepOptions {
    pub fn davie() -> Self {
        Self::default()
    }

    pub fn magnus(ode_substeps: usize) -> Self {
        Self {
            scheme: Scheme::Magnus,
            ode_substeps,
            ..Self::default()
        }
    }
}

/// Driver data for one step, traversed forwards or backwards.
#[derive(Debug, Clone)]
pub struct StepIncrement {
    /// Time at which the drift is frozen for the first half-step.
    pub t_first: f64,
    /// Time at which the drift is frozen for the second half-step.
    pub t_second: f64,
    /// Signed step length; negative when integrating backwards.
    pub dt: f64,
    pub signature: Signature2,
}

impl StepIncrement {
    pub fn forward(path: &GeometricRoughPath, i: usize) -> Self {
        let g = path.grid();
        Self {
            t_first: g.time(i),
            t_second: g.time(i + 1),
            dt: g.step(i),
            signature: Signature2 {
                level1: path.step_increment(i),
                level2: path.second_level(i).to_vec(),
            },
        }
    }

    /// Undo interval `i`: from `t_{i+1}` back to `t_i`.
    pub fn backward(path: &GeometricRoughPath, i: usize) -> Self {
        let fwd = Self::forward(path, i);
        Self {
            t_first: fwd.t_second,
            t_second: fwd.t_first,
            dt: -fwd.dt,
            signature: fwd.signature.inverse(),
        }
    }

    /// A single step spanning `[t_i, t_j]` with the Chen-chained signature.
    pub fn span(path: &GeometricRoughPath, i: usize, j: usize) -> Self {
        let g = path.grid();
        Self {
            t_first: g.time(i),
            t_second: g.time(j),
            dt: g.time(j) - g.time(i),
            signature: TwoParameterPath::signature(path, i, j),
        }
    }
}

/// Advance `y` in place over one step.
pub fn step(y: &mut [f64], inc: &StepIncrement, fields: &VectorFieldFamily, opts: &StepOptions) -> Result<()> {
    let last_valid = inc.t_first;
    drift_half(y, inc.t_first, 0.5 * inc.dt, fields, opts.drift_substeps);
    let moved = match opts.scheme {
        Scheme::Davie => rough_davie(y, &inc.signature, fields),
        Scheme::Magnus => rough_magnus(y, &inc.signature, fields, opts.ode_substeps),
    };
    y.copy_from_slice(&moved);
    drift_half(y, inc.t_second, 0.5 * inc.dt, fields, opts.drift_substeps);
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::BlowUp {
            time: inc.t_second,
            last_valid,
        });
    }
    Ok(())
}

/// One Davie step over `[t_i, t_{i+1}]`.
pub fn davie_step(
    y: &[f64],
    i: usize,
    fields: &VectorFieldFamily,
    path: &GeometricRoughPath,
    opts: &StepOptions,
) -> Result<Vec<f64>> {
    let mut out = y.to_vec();
    let opts = StepOptions {
        scheme: Scheme::Davie,
        ..*opts
    };
    step(&mut out, &StepIncrement::forward(path, i), fields, &opts)?;
    Ok(out)
}

/// One approximate-flow (Magnus) step over `[t_i, t_{i+1}]`.
pub fn magnus_step(
    y: &[f64],
    i: usize,
    fields: &VectorFieldFamily,
    path: &GeometricRoughPath,
    ode_substeps: usize,
) -> Result<Vec<f64>> {
    let mut out = y.to_vec();
    step(&mut out, &StepIncrement::forward(path, i), fields, &StepOptions::magnus(ode_substeps))?;
    Ok(out)
}

fn drift_half(y: &mut [f64], t: f64, h: f64, fields: &VectorFieldFamily, substeps: usize) {
    let Some(u) = &fields.drift else { return };
    let substeps = substeps.max(1);
    let hs = h / substeps as f64;
    rk4(y, hs, substeps, |x, o| u.eval(t, x, o));
}

fn rk4(y: &mut [f64], h: f64, steps: usize, f: impl Fn(&[f64], &mut [f64])) {
    let d = y.len();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let mut tmp = vec![0.0; d];
    for _ in 0..steps {
        f(y, &mut k1);
        for j in 0..d {
            tmp[j] = y[j] + 0.5 * h * k1[j];
        }
        f(&tmp, &mut k2);
        for j in 0..d {
            tmp[j] = y[j] + 0.5 * h * k2[j];
        }
        f(&tmp, &mut k3);
        for j in 0..d {
            tmp[j] = y[j] + h * k3[j];
        }
        f(&tmp, &mut k4);
        for j in 0..d {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }
}

fn rough_davie(y: &[f64], sig: &Signature2, fields: &VectorFieldFamily) -> Vec<f64> {
    let d = fields.dim;
    let nk = fields.noise_dim();
    let mut out = y.to_vec();
    let mut vals = vec![vec![0.0; d]; nk];
    for (k, f) in fields.rough.iter().enumerate() {
        f.eval(y, &mut vals[k]);
        for j in 0..d {
            out[j] += vals[k][j] * sig.level1[k];
        }
    }
    let mut jac = vec![0.0; d * d];
    for (k, f) in fields.rough.iter().enumerate() {
        f.jacobian(y, &mut jac);
        for l in 0..nk {
            let c = sig.level2[l * nk + k];
            if c == 0.0 {
                continue;
            }
            for i in 0..d {
                let dv: f64 = (0..d).map(|j| jac[i * d + j] * vals[l][j]).sum();
                out[i] += c * dv;
            }
        }
    }
    out
}

fn rough_magnus(y: &[f64], sig: &Signature2, fields: &VectorFieldFamily, substeps: usize) -> Vec<f64> {
    let d = fields.dim;
    let nk = fields.noise_dim();
    let area = antisymmetric_part(&sig.level2, nk);
    let pairs: Vec<(usize, usize, f64)> = (0..nk)
        .flat_map(|k| (k + 1..nk).map(move |l| (k, l)))
        .map(|(k, l)| (k, l, area[k * nk + l]))
        .filter(|p| p.2 != 0.0)
        .collect();
    let frozen = |x: &[f64], o: &mut [f64]| {
        let mut v = vec![0.0; d];
        o.iter_mut().for_each(|a| *a = 0.0);
        for (k, f) in fields.rough.iter().enumerate() {
            f.eval(x, &mut v);
            for j in 0..d {
                o[j] += v[j] * sig.level1[k];
            }
        }
        for &(k, l, a) in &pairs {
            lie_bracket(fields.rough[k].as_ref(), fields.rough[l].as_ref(), x, &mut v);
            for j in 0..d {
                o[j] += v[j] * a;
            }
        }
    };
    let mut out = y.to_vec();
    let substeps = substeps.max(1);
    rk4(&mut out, 1.0 / substeps as f64, substeps, frozen);
    out
}

/// Particle trajectories on the driver's grid, kept in the universal cover.
#[derive(Debug, Clone)]
pub struct FlowMap {
    pub grid: TimeGrid,
    pub dim: usize,
    pub scheme: Scheme,
    pub domain: Domain,
    particles: usize,
    /// `[particle][instant][coordinate]`.
    trajectories: Vec<f64>,
}

impl FlowMap {
    pub fn particles(&self) -> usize {
        self.particles
    }

    /// Position of particle `m` at instant `i`, unwrapped.
    pub fn position(&self, m: usize, i: usize) -> &[f64] {
        let n = self.grid.len();
        let off = (m * n + i) * self.dim;
        &self.trajectories[off..off + self.dim]
    }

    /// Position reduced to the fundamental domain of the torus.
    pub fn wrapped_position(&self, m: usize, i: usize) -> Vec<f64> {
        let mut x = self.position(m, i).to_vec();
        self.domain.wrap(&mut x);
        x
    }

    pub fn positions_at(&self, i: usize) -> Vec<Vec<f64>> {
        (0..self.particles).map(|m| self.position(m, i).to_vec()).collect()
    }

    pub fn initial(&self) -> Vec<Vec<f64>> {
        self.positions_at(0)
    }
}

/// Integrate every particle over the whole grid. Particles run in parallel.
pub fn solve_flow(
    fields: &VectorFieldFamily,
    path: &GeometricRoughPath,
    particles: &[Vec<f64>],
    opts: &StepOptions,
) -> Result<FlowMap> {
    check_shapes(fields, path, particles)?;
    let n = path.grid().len();
    let d = fields.dim;
    let steps: Vec<StepIncrement> = (0..n - 1).map(|i| StepIncrement::forward(path, i)).collect();
    let per_particle: Vec<Vec<f64>> = particles
        .par_iter()
        .map(|x0| {
            let mut traj = Vec::with_capacity(n * d);
            let mut y = x0.clone();
            traj.extend_from_slice(&y);
            for inc in &steps {
                step(&mut y, inc, fields, opts)?;
                traj.extend_from_slice(&y);
            }
            Ok(traj)
        })
        .collect::<Result<_>>()?;
    Ok(FlowMap {
        grid: path.grid().clone(),
        dim: d,
        scheme: opts.scheme,
        domain: fields.domain.clone(),
        particles: particles.len(),
        trajectories: per_particle.concat(),
    })
}

/// `η_{t_to, t_from}` applied to each point; runs the time-reversed equation
/// when `to < from`.
pub fn solve_between(
    fields: &VectorFieldFamily,
    path: &GeometricRoughPath,
    points: &[Vec<f64>],
    from: usize,
    to: usize,
    opts: &StepOptions,
) -> Result<Vec<Vec<f64>>> {
    check_shapes(fields, path, points)?;
    let steps: Vec<StepIncrement> = if to >= from {
        (from..to).map(|i| StepIncrement::forward(path, i)).collect()
    } else {
        (to..from).rev().map(|i| StepIncrement::backward(path, i)).collect()
    };
    points
        .par_iter()
        .map(|x0| {
            let mut y = x0.clone();
            for inc in &steps {
                step(&mut y, inc, fields, opts)?;
            }
            Ok(y)
        })
        .collect()
}

fn check_shapes(fields: &VectorFieldFamily, path: &GeometricRoughPath, points: &[Vec<f64>]) -> Result<()> {
    if fields.noise_dim() != path.dim() {
        return Err(Error::Dimension(format!(
            "{} rough fields for a {}-dimensional driver",
            fields.noise_dim(),
            path.dim()
        )));
    }
    if let Some(p) = points.iter().find(|p| p.len() != fields.dim) {
        return Err(Error::Dimension(format!(
            "particle of dimension {} in a {}-dimensional flow",
            p.len(),
            fields.dim
        )));
    }
    Ok(())
}

fn max_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

/// `max |η_{tθ}(η_{θs}(X)) − η_{ts}(X)|` with every map computed on the grid.
/// For a one-step method this vanishes by construction.
pub fn flow_composition_residual(
    fields: &VectorFieldFamily,
    path: &GeometricRoughPath,
    (s, theta, t): (usize, usize, usize),
    probes: &[Vec<f64>],
    opts: &StepOptions,
) -> Result<f64> {
    let mid = solve_between(fields, path, probes, s, theta, opts)?;
    let composed = solve_between(fields, path, &mid, theta, t, opts)?;
    let direct = solve_between(fields, path, probes, s, t, opts)?;
    Ok(max_distance(&composed, &direct))
}

/// `max |μ_{tθ}(μ_{θs}(X)) − μ_{ts}(X)|` for single approximate-flow steps
/// spanning the given grid instants. Of order `|t − s|^{3α}`.
pub fn approximate_flow_defect(
    fields: &VectorFieldFamily,
    path: &GeometricRoughPath,
    (s, theta, t): (usize, usize, usize),
    probes: &[Vec<f64>],
    opts: &StepOptions,
) -> Result<f64> {
    let (first, second, whole) = (
        StepIncrement::span(path, s, theta),
        StepIncrement::span(path, theta, t),
        StepIncrement::span(path, s, t),
    );
    let mut worst = 0.0f64;
    for x in probes {
        let mut a = x.clone();
        step(&mut a, &first, fields, opts)?;
        step(&mut a, &second, fields, opts)?;
        let mut b = x.clone();
        step(&mut b, &whole, fields, opts)?;
        worst = worst.max(max_distance(&[a], &[b]));
    }
    Ok(worst)
}

/// `f(t_i, y) = f0(η_{t_i 0}^{-1}(y))`, the inverse flow being the
/// time-reversed equation.
pub fn advect_scalar<F>(
    f0: F,
    fields: &VectorFieldFamily,
    path: &GeometricRoughPath,
    t_index: usize,
    probes: &[Vec<f64>],
    opts: &StepOptions,
) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    let back = solve_between(fields, path, probes, t_index, 0, opts)?;
    Ok(back.iter().map(|x| f0(x)).collect())
}

/// `max_m |f(t_i, η_{t_i 0} X_m) − f0(X_m)|` over the particles of `flow`.
pub fn advect_scalar_residual<F>(
    f0: F,
    fields: &VectorFieldFamily,
    path: &GeometricRoughPath,
    flow: &FlowMap,
    t_index: usize,
    opts: &StepOptions,
) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let advected = advect_scalar(&f0, fields, path, t_index, &flow.positions_at(t_index), opts)?;
    Ok(flow
        .initial()
        .iter()
        .zip(&advected)
        .map(|(x, v)| (f0(x) - v).abs())
        .fold(0.0, f64::max))
}
