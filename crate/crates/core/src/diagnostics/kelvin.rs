//! Circulation around loops advected by a rough Euler flow.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fields::{Domain, TimeVectorField, VectorField, VectorFieldFamily};
use crate::flow::{solve_flow, FlowMap, StepOptions};
use crate::fluid::euler::{biot_savart, RoughFields2D};
use crate::rough_path::GeometricRoughPath;
use crate::spectral::{Interpolant2D, Spectral2D};

/// A closed polyline on the plane; the last vertex connects to the first.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialLoop {
    points: Vec<[f64; 2]>,
}

impl MaterialLoop {
    pub fn new(points: Vec<[f64; 2]>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::DegenerateLoop(format!("{} vertices", points.len())));
        }
        for i in 0..points.len() {
            let (a, b) = (points[i], points[(i + 1) % points.len()]);
            if (a[0] - b[0]).hypot(a[1] - b[1]) < 1e-14 {
                return Err(Error::DegenerateLoop(format!("vertices {i} and {} coincide", (i + 1) % points.len())));
            }
        }
        Ok(Self { points })
    }

    pub fn circle(center: [f64; 2], radius: f64, vertices: usize) -> Result<Self> {
        let pts = (0..vertices)
            .map(|j| {
                let th = 2.0 * std::f64::consts::PI * j as f64 / vertices as f64;
                [center[0] + radius * th.cos(), center[1] + radius * th.sin()]
            })
            .collect();
        Self::new(pts)
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Trapezoid rule for `∮ v·dx` along the closed polyline through `points`.
pub fn circulation(points: &[[f64; 2]], v: &dyn Fn(f64, f64) -> [f64; 2]) -> f64 {
    let m = points.len();
    let vals: Vec<[f64; 2]> = points.iter().map(|p| v(p[0], p[1])).collect();
    (0..m)
        .map(|i| {
            let j = (i + 1) % m;
            let (dx, dy) = (points[j][0] - points[i][0], points[j][1] - points[i][1]);
            0.5 * ((vals[i][0] + vals[j][0]) * dx + (vals[i][1] + vals[j][1]) * dy)
        })
        .sum()
}

/// A planar field evaluated by trigonometric interpolation of grid values.
#[derive(Debug, Clone)]
pub struct SpectralField2D {
    pub x: Interpolant2D,
    pub y: Interpolant2D,
}

impl SpectralField2D {
    pub fn from_components(s: &Spectral2D, vx: &[f64], vy: &[f64]) -> Self {
        Self {
            x: s.interpolant(vx),
            y: s.interpolant(vy),
        }
    }

    pub fn velocity_of(s: &Spectral2D, w: &[f64]) -> Result<Self> {
        let (ux, uy) = biot_savart(s, w)?;
        Ok(Self::from_components(s, &ux, &uy))
    }

    pub fn rough_fields(s: &Spectral2D, fields: &RoughFields2D) -> Vec<Arc<dyn VectorField>> {
        (0..fields.len())
            .map(|k| {
                let (a, b) = fields.components(k);
                Arc::new(Self::from_components(s, a, b)) as Arc<dyn VectorField>
            })
            .collect()
    }

    pub fn at(&self, x: f64, y: f64) -> [f64; 2] {
        [self.x.eval(x, y), self.y.eval(x, y)]
    }
}

impl VectorField for SpectralField2D {
    fn dim(&self) -> usize {
        2
    }
    fn eval(&self, p: &[f64], out: &mut [f64]) {
        out[0] = self.x.eval(p[0], p[1]);
        out[1] = self.y.eval(p[0], p[1]);
    }
    fn jacobian(&self, p: &[f64], jac: &mut [f64]) {
        let (_, a, b) = self.x.eval_with_gradient(p[0], p[1]);
        let (_, c, d) = self.y.eval_with_gradient(p[0], p[1]);
        jac.copy_from_slice(&[a, b, c, d]);
    }
}

/// Velocity fields known at the instants of a time grid. Evaluation at any
/// other time uses the nearest stored instant.
pub struct VelocitySnapshots {
    times: Vec<f64>,
    fields: Vec<SpectralField2D>,
}

impl VelocitySnapshots {
    pub fn new(times: Vec<f64>, fields: Vec<SpectralField2D>) -> Result<Self> {
        if times.is_empty() || times.len() != fields.len() {
            return Err(Error::Dimension(format!(
                "{} snapshot times for {} fields",
                times.len(),
                fields.len()
            )));
        }
        Ok(Self { times, fields })
    }

    pub fn from_vorticity(s: &Spectral2D, times: Vec<f64>, vorticity: &[Vec<f64>]) -> Result<Self> {
        let fields = vorticity
            .iter()
            .map(|w| SpectralField2D::velocity_of(s, w))
            .collect::<Result<_>>()?;
        Self::new(times, fields)
    }

    pub fn at(&self, t: f64) -> &SpectralField2D {
        let idx = self.times.partition_point(|&s| s < t);
        let pick = if idx == 0 {
            0
        } else if idx == self.times.len() || (t - self.times[idx - 1]) <= (self.times[idx] - t) {
            idx - 1
        } else {
            idx
        };
        &self.fields[pick]
    }
}

impl TimeVectorField for VelocitySnapshots {
    fn dim(&self) -> usize {
        2
    }
    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.at(t).eval(x, out)
    }
    fn jacobian(&self, t: f64, x: &[f64], jac: &mut [f64]) {
        self.at(t).jacobian(x, jac)
    }
}

/// `γ_t = η_t(γ)` under `dX = u_t(X) dt + ξ_k(X) d𝐙^k`, with `u_t` frozen
/// per half-step at the stored snapshots.
pub fn advect_loop(
    lp: &MaterialLoop,
    velocity: Arc<VelocitySnapshots>,
    rough: Vec<Arc<dyn VectorField>>,
    path: &GeometricRoughPath,
    opts: &StepOptions,
) -> Result<FlowMap> {
    let tau = 2.0 * std::f64::consts::PI;
    let fields = VectorFieldFamily::new(2, rough)?
        .with_drift(velocity)?
        .with_domain(Domain::Torus(vec![tau, tau]));
    let pts: Vec<Vec<f64>> = lp.points().iter().map(|p| p.to_vec()).collect();
    solve_flow(&fields, path, &pts, opts)
}

/// Circulation of the advected loop at every grid instant, given the
/// vorticity at those instants.
pub fn kelvin_circulations(
    s: &Spectral2D,
    fields: &RoughFields2D,
    vorticity: &[Vec<f64>],
    path: &GeometricRoughPath,
    lp: &MaterialLoop,
    opts: &StepOptions,
) -> Result<Vec<f64>> {
    if vorticity.len() != path.grid().len() {
        return Err(Error::GridMismatch);
    }
    let snaps = Arc::new(VelocitySnapshots::from_vorticity(s, path.grid().times().to_vec(), vorticity)?);
    let flow = advect_loop(lp, snaps.clone(), SpectralField2D::rough_fields(s, fields), path, opts)?;
    Ok((0..path.grid().len())
        .map(|i| {
            let pts: Vec<[f64; 2]> = flow.positions_at(i).iter().map(|p| [p[0], p[1]]).collect();
            let u = &snaps.fields[i];
            circulation(&pts, &|x, y| u.at(x, y))
        })
        .collect())
}
