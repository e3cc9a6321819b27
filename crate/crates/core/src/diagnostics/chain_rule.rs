//! Residual of the pull-back identity for time-dependent scalars along a
//! numerical flow:
//!
//! `τ_t(η_t X) = τ_0(X) + ∫ (π + u·∇τ)(η_r X) dr + ∫ (γ_k + ξ_k·∇τ)(η_r X) d𝐙^k_r`.
//!
//! The scalar is given as `τ_t(x) = φ(t, Z_t, x)`, so `π = ∂_t φ` and
//! `γ_k = ∂_{z_k} φ`. Derivatives of `φ` are taken by central differences.
//! The residual vanishes under refinement at the rate of the flow scheme.

use std::sync::Arc;

use crate::controlled::{rough_integral, ControlledPath};
use crate::error::Result;
use crate::fields::VectorFieldFamily;
use crate::flow::{solve_flow, StepOptions};
use crate::rough_path::GeometricRoughPath;

const H_FIRST: f64 = 1e-5;
const H_SECOND: f64 = 1e-3;

type Phi<'a> = &'a (dyn Fn(f64, &[f64], &[f64]) -> f64 + Sync);

fn central(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    (f(h) - f(-h)) / (2.0 * h)
}

fn shifted(v: &[f64], j: usize, e: f64) -> Vec<f64> {
    let mut w = v.to_vec();
    w[j] += e;
    w
}

/// Integrands against the time-extended driver `(t, Z)`:
/// component 0 is `π + u·∇τ`, component `k + 1` is `γ_k + ξ_k·∇τ`.
struct Integrands<'a> {
    fields: &'a VectorFieldFamily,
    phi: Phi<'a>,
}

impl Integrands<'_> {
    /// Velocity of the flow along extended component `c`.
    fn direction(&self, c: usize, t: f64, x: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; x.len()];
        if c == 0 {
            if let Some(u) = &self.fields.drift {
                u.eval(t, x, &mut v);
            }
        } else {
            self.fields.rough[c - 1].eval(x, &mut v);
        }
        v
    }

    fn value(&self, c: usize, t: f64, z: &[f64], x: &[f64]) -> f64 {
        let phi = self.phi;
        let explicit = if c == 0 {
            central(|e| phi(t + e, z, x), H_FIRST)
        } else {
            central(|e| phi(t, &shifted(z, c - 1, e), x), H_FIRST)
        };
        let dir = self.direction(c, t, x);
        let transport: f64 = (0..x.len())
            .map(|j| dir[j] * central(|e| phi(t, z, &shifted(x, j, e)), H_FIRST))
            .sum();
        explicit + transport
    }

    /// Derivative of integrand `c` along extended component `l`.
    fn derivative(&self, c: usize, l: usize, t: f64, z: &[f64], x: &[f64]) -> f64 {
        let explicit = if l == 0 {
            central(|e| self.value(c, t + e, z, x), H_SECOND)
        } else {
            central(|e| self.value(c, t, &shifted(z, l - 1, e), x), H_SECOND)
        };
        let dir = self.direction(l, t, x);
        let transport: f64 = (0..x.len())
            .map(|j| dir[j] * central(|e| self.value(c, t, z, &shifted(x, j, e)), H_SECOND))
            .sum();
        explicit + transport
    }
}

/// `max |LHS − RHS|` over particles and grid instants. Both integrals are
/// evaluated as one rough integral against the time-extended driver.
pub fn lie_chain_rule_residual(
    fields: &VectorFieldFamily,
    path: &GeometricRoughPath,
    phi: Phi,
    particles: &[Vec<f64>],
    opts: &StepOptions,
) -> Result<f64> {
    let flow = solve_flow(fields, path, particles, opts)?;
    let extended = Arc::new(path.time_extended());
    let grid = path.grid();
    let e = extended.dim();
    let integrands = Integrands { fields, phi };
    let mut worst = 0.0f64;
    for m in 0..particles.len() {
        let state = |i: usize| (grid.time(i), path.value(i), flow.position(m, i));
        let integrand = ControlledPath::from_fn(extended.clone(), e, |i, val, der| {
            let (t, z, x) = state(i);
            for c in 0..e {
                val[c] = integrands.value(c, t, z, x);
                for l in 0..e {
                    der[c * e + l] = integrands.derivative(c, l, t, z, x);
                }
            }
        })?;
        let total = rough_integral(&integrand)?;
        let (t0, z0, x0) = state(0);
        let base = phi(t0, z0, x0);
        for i in 0..grid.len() {
            let (t, z, x) = state(i);
            worst = worst.max((phi(t, z, x) - base - total.value(i)[0]).abs());
        }
    }
    Ok(worst)
}
