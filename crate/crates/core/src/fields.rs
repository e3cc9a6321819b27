//! Vector fields on `ℝ^d` or the flat torus, with Jacobian evaluators.

use std::sync::Arc;

use crate::error::{Error, Result};

const FD_STEP: f64 = 1e-6;

/// An autonomous vector field `x ↦ v(x) ∈ ℝ^d`.
pub trait VectorField: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, x: &[f64], out: &mut [f64]);

    /// Row-major `d × d` Jacobian, entry `(i, j) = ∂v_i/∂x_j`. Defaults to
    /// central differences.
    fn jacobian(&self, x: &[f64], jac: &mut [f64]) {
        fd_jacobian(self.dim(), |y, o| self.eval(y, o), x, jac);
    }

    /// `D²v(x)[w]`, the derivative of the Jacobian in direction `w`
    /// (row-major `d × d`). Defaults to central differences of [`Self::jacobian`].
    fn hessian_vector(&self, x: &[f64], w: &[f64], out: &mut [f64]) {
        let d = self.dim();
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        for j in 0..d {
            xp[j] += FD_STEP * w[j];
            xm[j] -= FD_STEP * w[j];
        }
        let mut jm = vec![0.0; d * d];
        self.jacobian(&xp, out);
        self.jacobian(&xm, &mut jm);
        for (o, m) in out.iter_mut().zip(&jm) {
            *o = (*o - m) / (2.0 * FD_STEP);
        }
    }
}

/// A time-dependent field `(t, x) ↦ u_t(x)`.
pub trait TimeVectorField: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]);

    fn jacobian(&self, t: f64, x: &[f64], jac: &mut [f64]) {
        fd_jacobian(self.dim(), |y, o| self.eval(t, y, o), x, jac);
    }
}

fn fd_jacobian(d: usize, f: impl Fn(&[f64], &mut [f64]), x: &[f64], jac: &mut [f64]) {
    let mut xp = x.to_vec();
    let mut fp = vec![0.0; d];
    let mut fm = vec![0.0; d];
    for j in 0..d {
        let h = FD_STEP * (1.0 + x[j].abs());
        xp[j] = x[j] + h;
        f(&xp, &mut fp);
        xp[j] = x[j] - h;
        f(&xp, &mut fm);
        xp[j] = x[j];
        for i in 0..d {
            jac[i * d + j] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
}

type EvalFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;
type TimeEvalFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;

/// A field given by closures. Without a Jacobian closure the Jacobian is
/// taken by central differences.
pub struct FnField {
    dim: usize,
    eval: Box<EvalFn>,
    jac: Option<Box<EvalFn>>,
}

impl FnField {
    pub fn new<F>(dim: usize, eval: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self {
            dim,
            eval: Box::new(eval),
            jac: None,
        }
    }

    pub fn with_jacobian<J>(mut self, jac: J) -> Self
    where
        J: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.jac = Some(Box::new(jac));
        self
    }
}

impl VectorField for FnField {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        (self.eval)(x, out)
    }
    fn jacobian(&self, x: &[f64], jac: &mut [f64]) {
        match &self.jac {
            Some(j) => j(x, jac),
            None => fd_jacobian(self.dim, |y, o| (self.eval)(y, o), x, jac),
        }
    }
}

pub struct FnTimeField {
    dim: usize,
    eval: Box<TimeEvalFn>,
    jac: Option<Box<TimeEvalFn>>,
}

impl FnTimeField {
    pub fn new<F>(dim: usize, eval: F) -> Self
    where
        F: Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self {
            dim,
            eval: Box::new(eval),
            jac: None,
        }
    }

    pub fn with_jacobian<J>(mut self, jac: J) -> Self
    where
        J: Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.jac = Some(Box::new(jac));
        self
    }
}

impl TimeVectorField for FnTimeField {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) {
        (self.eval)(t, x, out)
    }
    fn jacobian(&self, t: f64, x: &[f64], jac: &mut [f64]) {
        match &self.jac {
            Some(j) => j(t, x, jac),
            None => fd_jacobian(self.dim, |y, o| (self.eval)(t, y, o), x, jac),
        }
    }
}

/// `v(x) = c`.
#[derive(Debug, Clone)]
pub struct ConstantField(pub Vec<f64>);

impl VectorField for ConstantField {
    fn dim(&self) -> usize {
        self.0.len()
    }
    fn eval(&self, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.0);
    }
    fn jacobian(&self, _x: &[f64], jac: &mut [f64]) {
        jac.iter_mut().for_each(|j| *j = 0.0);
    }
    fn hessian_vector(&self, _x: &[f64], _w: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|j| *j = 0.0);
    }
}

/// `v(x) = A x` with `A` row-major `d × d`.
#[derive(Debug, Clone)]
pub struct LinearField {
    dim: usize,
    matrix: Vec<f64>,
}

impl LinearField {
    pub fn new(dim: usize, matrix: Vec<f64>) -> Result<Self> {
        if matrix.len() != dim * dim {
            return Err(Error::Dimension(format!(
                "linear field of dimension {dim} needs {} entries, got {}",
                dim * dim,
                matrix.len()
            )));
        }
        Ok(Self { dim, matrix })
    }
}

impl VectorField for LinearField {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..d).map(|j| self.matrix[i * d + j] * x[j]).sum();
        }
    }
    fn jacobian(&self, _x: &[f64], jac: &mut [f64]) {
        jac.copy_from_slice(&self.matrix);
    }
    fn hessian_vector(&self, _x: &[f64], _w: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|j| *j = 0.0);
    }
}

/// An autonomous field viewed as time-dependent.
pub struct Autonomous(pub Arc<dyn VectorField>);

impl TimeVectorField for Autonomous {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn eval(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        self.0.eval(x, out)
    }
    fn jacobian(&self, _t: f64, x: &[f64], jac: &mut [f64]) {
        self.0.jacobian(x, jac)
    }
}

/// `(τ, x) ↦ −u(a + b − τ, x)`: the drift of the time-reversed equation on
/// `[a, b]`.
pub struct ReversedDrift {
    pub inner: Arc<dyn TimeVectorField>,
    pub a_plus_b: f64,
}

impl TimeVectorField for ReversedDrift {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.inner.eval(self.a_plus_b - t, x, out);
        out.iter_mut().for_each(|v| *v = -*v);
    }
    fn jacobian(&self, t: f64, x: &[f64], jac: &mut [f64]) {
        self.inner.jacobian(self.a_plus_b - t, x, jac);
        jac.iter_mut().for_each(|v| *v = -*v);
    }
}

/// Lie bracket `[a, b](x) = Db(x) a(x) − Da(x) b(x)`.
pub fn lie_bracket(a: &dyn VectorField, b: &dyn VectorField, x: &[f64], out: &mut [f64]) {
    let d = a.dim();
    let mut va = vec![0.0; d];
    let mut vb = vec![0.0; d];
    let mut ja = vec![0.0; d * d];
    let mut jb = vec![0.0; d * d];
    a.eval(x, &mut va);
    b.eval(x, &mut vb);
    a.jacobian(x, &mut ja);
    b.jacobian(x, &mut jb);
    for i in 0..d {
        out[i] = (0..d).map(|j| jb[i * d + j] * va[j] - ja[i * d + j] * vb[j]).sum();
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Euclidean,
    /// Flat torus with the given period per coordinate.
    Torus(Vec<f64>),
}

impl Domain {
    pub fn wrap(&self, x: &mut [f64]) {
        if let Domain::Torus(periods) = self {
            for (xi, p) in x.iter_mut().zip(periods) {
                *xi = xi.rem_euclid(*p);
            }
        }
    }
}

/// Drift `u` and rough fields `ξ_1..ξ_K` of `dY = u_t(Y) dt + ξ(Y) d𝐙`.
#[derive(Clone)]
pub struct VectorFieldFamily {
    pub dim: usize,
    pub drift: Option<Arc<dyn TimeVectorField>>,
    pub rough: Vec<Arc<dyn VectorField>>,
    pub domain: Domain,
}

impl VectorFieldFamily {
    pub fn new(dim: usize, rough: Vec<Arc<dyn VectorField>>) -> Result<Self> {
        if let Some((k, f)) = rough.iter().enumerate().find(|(_, f)| f.dim() != dim) {
            return Err(Error::Dimension(format!(
                "rough field {k} has dimension {}, expected {dim}",
                f.dim()
            )));
        }
        Ok(Self {
            dim,
            drift: None,
            rough,
            domain: Domain::Euclidean,
        })
    }

    pub fn with_drift(mut self, drift: Arc<dyn TimeVectorField>) -> Result<Self> {
        if drift.dim() != self.dim {
            return Err(Error::Dimension(format!(
                "drift has dimension {}, expected {}",
                drift.dim(),
                self.dim
            )));
        }
        self.drift = Some(drift);
        Ok(self)
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    pub fn noise_dim(&self) -> usize {
        self.rough.len()
    }

    /// Largest discrepancy between each rough field's Jacobian evaluator and
    /// a central-difference probe, over the given points.
    pub fn jacobian_self_check(&self, probes: &[Vec<f64>]) -> f64 {
        let d = self.dim;
        let mut ja = vec![0.0; d * d];
        let mut jf = vec![0.0; d * d];
        let mut worst = 0.0f64;
        for f in &self.rough {
            for x in probes {
                f.jacobian(x, &mut ja);
                fd_jacobian(d, |y, o| f.eval(y, o), x, &mut jf);
                for (a, b) in ja.iter().zip(&jf) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
        worst
    }
}
