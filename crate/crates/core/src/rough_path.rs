//! Level-2 geometric rough paths sampled on a time grid.
//!
//! A path stores its first level `Z_i` at every grid instant and its second
//! level `𝕫_i = ∫_{t_i}^{t_{i+1}} δZ_{t_i,r} ⊗ dZ_r` on every consecutive
//! interval, row-major with entry `(l, k) = ∫ δZ^l dZ^k`. The second level
//! over any longer span is reconstructed on demand with Chen's relation
//!
//! ```text
//! 𝕫_{su} = 𝕫_{st} + 𝕫_{tu} + δZ_{st} ⊗ δZ_{tu}
//! ```
//!
//! The Lévy area is the antisymmetric part `𝔸 = ½(𝕫 − 𝕫ᵀ)`.

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::quadrature::GaussLegendre;

pub const DEFAULT_QUAD_ORDER: usize = 8;
pub const DEFAULT_QUAD_TOLERANCE: f64 = 1e-10;
/// Default Hölder exponent for Lipschitz drivers.
pub const ALPHA_SMOOTH: f64 = 1.0;

/// Level-1 and level-2 increments of a path over one span, an element of the
/// truncated tensor algebra `ℝ ⊕ ℝ^K ⊕ ℝ^{K×K}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Signature2 {
    pub level1: Vec<f64>,
    pub level2: Vec<f64>,
}

impl Signature2 {
    pub fn identity(dim: usize) -> Self {
        Self {
            level1: vec![0.0; dim],
            level2: vec![0.0; dim * dim],
        }
    }

    /// Signature of a straight segment with increment `dz`.
    pub fn segment(dz: &[f64]) -> Self {
        let mut s = Self::identity(dz.len());
        s.level1.copy_from_slice(dz);
        add_outer(&mut s.level2, dz, dz, 0.5);
        s
    }

    pub fn dim(&self) -> usize {
        self.level1.len()
    }

    /// Chen product: the signature of `self` followed by `next`.
    pub fn chain(&self, next: &Signature2) -> Signature2 {
        let mut out = self.clone();
        out.chain_in_place(&next.level1, &next.level2);
        out
    }

    pub fn chain_in_place(&mut self, dz: &[f64], zz: &[f64]) {
        let k = self.dim();
        for l in 0..k {
            for m in 0..k {
                self.level2[l * k + m] += zz[l * k + m] + self.level1[l] * dz[m];
            }
        }
        for (a, b) in self.level1.iter_mut().zip(dz) {
            *a += b;
        }
    }

    /// Group inverse, which is the signature of the reversed span.
    pub fn inverse(&self) -> Signature2 {
        let k = self.dim();
        let mut out = Signature2::identity(k);
        for l in 0..k {
            out.level1[l] = -self.level1[l];
            for m in 0..k {
                out.level2[l * k + m] = -self.level2[l * k + m] + self.level1[l] * self.level1[m];
            }
        }
        out
    }

    pub fn levy_area(&self) -> Vec<f64> {
        antisymmetric_part(&self.level2, self.dim())
    }
}

/// `dst += scale * a ⊗ b` (row-major).
pub(crate) fn add_outer(dst: &mut [f64], a: &[f64], b: &[f64], scale: f64) {
    let k = b.len();
    for (l, &al) in a.iter().enumerate() {
        for (m, &bm) in b.iter().enumerate() {
            dst[l * k + m] += scale * al * bm;
        }
    }
}

pub(crate) fn antisymmetric_part(zz: &[f64], k: usize) -> Vec<f64> {
    let mut a = vec![0.0; k * k];
    for l in 0..k {
        for m in 0..k {
            a[l * k + m] = 0.5 * (zz[l * k + m] - zz[m * k + l]);
        }
    }
    a
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// A driver path `t ↦ ℝ^K` with an evaluable derivative.
pub trait SmoothPath {
    fn dim(&self) -> usize;
    fn value(&self, t: f64, out: &mut [f64]);
    fn derivative(&self, t: f64, out: &mut [f64]);
}

/// [`SmoothPath`] built from a pair of closures.
pub struct FnPath<V, D> {
    dim: usize,
    value: V,
    derivative: D,
}

impl<V, D> FnPath<V, D>
where
    V: Fn(f64, &mut [f64]),
    D: Fn(f64, &mut [f64]),
{
    pub fn new(dim: usize, value: V, derivative: D) -> Self {
        Self {
            dim,
            value,
            derivative,
        }
    }
}

impl<V, D> SmoothPath for FnPath<V, D>
where
    V: Fn(f64, &mut [f64]),
    D: Fn(f64, &mut [f64]),
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, t: f64, out: &mut [f64]) {
        (self.value)(t, out)
    }
    fn derivative(&self, t: f64, out: &mut [f64]) {
        (self.derivative)(t, out)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LiftOptions {
    pub quad_order: usize,
    /// Bound on the geometricity residual, scaled by `1 + |δZ|²` per interval.
    pub tolerance: f64,
    pub alpha: f64,
}

impl Default for LiftOptions {
    fn default() -> Self {
        Self {
            quad_order: DEFAULT_QUAD_ORDER,
            tolerance: DEFAULT_QUAD_TOLERANCE,
            alpha: ALPHA_SMOOTH,
        }
    }
}

/// Read access to the two-parameter increments `(δZ_{t_i t_j}, 𝕫_{t_i t_j})`.
///
/// Residual diagnostics are written against this trait so that they can be
/// applied both to grid-stored paths and to arbitrary dense tables.
pub trait TwoParameterPath {
    fn dim(&self) -> usize;
    fn grid(&self) -> &TimeGrid;
    fn signature(&self, i: usize, j: usize) -> Signature2;
}

/// Level-2 geometric rough path on a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricRoughPath {
    grid: TimeGrid,
    dim: usize,
    values: Vec<f64>,
    second: Vec<f64>,
    alpha: f64,
}

impl GeometricRoughPath {
    /// Assemble a path from raw storage. Shapes and `alpha` are validated;
    /// the algebraic identities are not (use the residual diagnostics).
    pub fn from_parts(
        grid: TimeGrid,
        dim: usize,
        values: Vec<f64>,
        second: Vec<f64>,
        alpha: f64,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension("path dimension must be positive".into()));
        }
        if values.len() != grid.len() * dim {
            return Err(Error::Dimension(format!(
                "expected {} level-1 entries, got {}",
                grid.len() * dim,
                values.len()
            )));
        }
        if second.len() != grid.intervals() * dim * dim {
            return Err(Error::Dimension(format!(
                "expected {} level-2 entries, got {}",
                grid.intervals() * dim * dim,
                second.len()
            )));
        }
        check_alpha(alpha)?;
        Ok(Self {
            grid,
            dim,
            values,
            second,
            alpha,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        self.alpha = alpha;
        Ok(self)
    }

    pub fn intervals(&self) -> usize {
        self.grid.intervals()
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn second_levels(&self) -> &[f64] {
        &self.second
    }

    /// Stored second level on `[t_i, t_{i+1}]`.
    pub fn second_level(&self, i: usize) -> &[f64] {
        let kk = self.dim * self.dim;
        &self.second[i * kk..(i + 1) * kk]
    }

    pub fn increment(&self, i: usize, j: usize) -> Vec<f64> {
        self.value(j)
            .iter()
            .zip(self.value(i))
            .map(|(b, a)| b - a)
            .collect()
    }

    /// Increment over the consecutive interval `[t_i, t_{i+1}]`.
    pub fn step_increment(&self, i: usize) -> Vec<f64> {
        self.increment(i, i + 1)
    }

    /// Second level over `[t_i, t_j]`, chained from the stored intervals.
    pub fn second_level_between(&self, i: usize, j: usize) -> Vec<f64> {
        TwoParameterPath::signature(self, i, j).level2
    }

    pub fn levy_area(&self, i: usize, j: usize) -> Vec<f64> {
        TwoParameterPath::signature(self, i, j).levy_area()
    }

    /// Path over the reversed time grid, `t ↦ Z_{t_0 + t_N − t}`.
    pub fn reversed(&self) -> Self {
        let n = self.grid.len();
        let k = self.dim;
        let mut values = Vec::with_capacity(self.values.len());
        for i in (0..n).rev() {
            values.extend_from_slice(self.value(i));
        }
        let mut second = Vec::with_capacity(self.second.len());
        for i in (0..self.intervals()).rev() {
            let sig = Signature2 {
                level1: self.step_increment(i),
                level2: self.second_level(i).to_vec(),
            };
            second.extend(sig.inverse().level2);
        }
        debug_assert_eq!(second.len(), self.intervals() * k * k);
        Self {
            grid: self.grid.reversed(),
            dim: k,
            values,
            second,
            alpha: self.alpha,
        }
    }

    /// Restrict to a sub-grid, merging intervals with Chen's relation.
    pub fn coarsen(&self, target: &TimeGrid) -> Result<Self> {
        let mut idx = Vec::with_capacity(target.len());
        for &t in target.times() {
            idx.push(self.grid.position(t).ok_or(Error::NotASubset(t))?);
        }
        let k = self.dim;
        let mut values = Vec::with_capacity(idx.len() * k);
        for &i in &idx {
            values.extend_from_slice(self.value(i));
        }
        let mut second = Vec::with_capacity((idx.len() - 1) * k * k);
        for w in idx.windows(2) {
            second.extend(self.signature_span(w[0], w[1]).level2);
        }
        let grid = TimeGrid::new(idx.iter().map(|&i| self.grid.time(i)).collect())?;
        Ok(Self {
            grid,
            dim: k,
            values,
            second,
            alpha: self.alpha,
        })
    }

    fn signature_span(&self, i: usize, j: usize) -> Signature2 {
        let k = self.dim;
        let mut sig = Signature2::identity(k);
        for m in i..j {
            let dz = self.step_increment(m);
            sig.chain_in_place(&dz, self.second_level(m));
        }
        // Level 1 is taken from the stored values so that it is exact.
        sig.level1 = self.increment(i, j);
        sig
    }

    /// The path `(t, Z_t)` of dimension `K + 1`, time first. Cross integrals
    /// `∫ δt dZ` are taken as `½ δt δZ` on each stored interval, which is
    /// exact for piecewise-linear drivers and third-order accurate for smooth ones.
    pub fn time_extended(&self) -> Self {
        let k = self.dim;
        let e = k + 1;
        let n = self.grid.len();
        let mut values = Vec::with_capacity(n * e);
        for i in 0..n {
            values.push(self.grid.time(i));
            values.extend_from_slice(self.value(i));
        }
        let mut second = vec![0.0; self.intervals() * e * e];
        for i in 0..self.intervals() {
            let dt = self.grid.step(i);
            let dz = self.step_increment(i);
            let zz = self.second_level(i);
            let out = &mut second[i * e * e..(i + 1) * e * e];
            out[0] = 0.5 * dt * dt;
            for a in 0..k {
                out[a + 1] = 0.5 * dt * dz[a];
                out[(a + 1) * e] = 0.5 * dz[a] * dt;
                for b in 0..k {
                    out[(a + 1) * e + b + 1] = zz[a * k + b];
                }
            }
        }
        Self {
            grid: self.grid.clone(),
            dim: e,
            values,
            second,
            alpha: self.alpha,
        }
    }

    /// The same path with every stored `𝕫_i` replaced by its antisymmetric part.
    /// The result is deliberately not geometric; it is used to probe the
    /// sensitivity of solutions to the second level.
    pub fn with_antisymmetrized_second_level(&self) -> Self {
        let k = self.dim;
        let mut out = self.clone();
        for i in 0..self.intervals() {
            let a = antisymmetric_part(self.second_level(i), k);
            out.second[i * k * k..(i + 1) * k * k].copy_from_slice(&a);
        }
        out
    }

    /// `([Z]_α, [𝕫]_{2α})` over all grid pairs, Euclidean / Frobenius norms.
    pub fn holder_estimate(&self) -> (f64, f64) {
        let n = self.grid.len();
        let k = self.dim;
        let (mut hz, mut hzz) = (0.0f64, 0.0f64);
        for i in 0..n {
            let mut sig = Signature2::identity(k);
            for j in i + 1..n {
                let dz = self.step_increment(j - 1);
                sig.chain_in_place(&dz, self.second_level(j - 1));
                let dt = self.grid.time(j) - self.grid.time(i);
                let inc = self.increment(i, j);
                hz = hz.max(euclid(&inc) / dt.powf(self.alpha));
                hzz = hzz.max(euclid(&sig.level2) / dt.powf(2.0 * self.alpha));
            }
        }
        (hz, hzz)
    }

    /// For each `s = t_i`, `max_{t > s} |δZ_{st}| / |t − s|^{2α}`.
    ///
    /// True roughness is a limsup property and cannot be decided from
    /// finite data, so this is a diagnostic only. The last instant has no
    /// later partner and scores 0.
    pub fn true_roughness_score(&self, alpha: f64) -> Result<Vec<f64>> {
        if !(alpha > 1.0 / 3.0 && alpha <= 0.5) {
            return Err(Error::InvalidParameter(format!(
                "true roughness exponent must lie in (1/3, 1/2], got {alpha}"
            )));
        }
        let n = self.grid.len();
        Ok((0..n)
            .map(|i| {
                (i + 1..n)
                    .map(|j| {
                        let dt = self.grid.time(j) - self.grid.time(i);
                        euclid(&self.increment(i, j)) / dt.powf(2.0 * alpha)
                    })
                    .fold(0.0, f64::max)
            })
            .collect())
    }

    pub fn sup_norm(&self) -> f64 {
        max_abs(&self.values)
    }
}

impl TwoParameterPath for GeometricRoughPath {
    fn dim(&self) -> usize {
        self.dim
    }
    fn grid(&self) -> &TimeGrid {
        &self.grid
    }
    fn signature(&self, i: usize, j: usize) -> Signature2 {
        if j < i {
            return self.signature_span(j, i).inverse();
        }
        self.signature_span(i, j)
    }
}

/// Every span stored explicitly, `O(N²K²)` memory. Used to audit data that
/// did not come from a Chen-consistent constructor.
#[derive(Debug, Clone)]
pub struct DenseIncrementTable {
    grid: TimeGrid,
    dim: usize,
    values: Vec<f64>,
    spans: Vec<f64>,
}

impl DenseIncrementTable {
    /// `second(i, j)` supplies `𝕫_{t_i t_j}` for `i < j`.
    pub fn new<F>(grid: TimeGrid, dim: usize, values: Vec<f64>, mut second: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> Vec<f64>,
    {
        let n = grid.len();
        if values.len() != n * dim {
            return Err(Error::Dimension(format!(
                "expected {} level-1 entries, got {}",
                n * dim,
                values.len()
            )));
        }
        let kk = dim * dim;
        let mut spans = vec![0.0; n * n * kk];
        for i in 0..n {
            for j in i + 1..n {
                let zz = second(i, j);
                if zz.len() != kk {
                    return Err(Error::Dimension(format!("span ({i},{j}) has {} entries", zz.len())));
                }
                spans[(i * n + j) * kk..(i * n + j + 1) * kk].copy_from_slice(&zz);
            }
        }
        Ok(Self {
            grid,
            dim,
            values,
            spans,
        })
    }

    pub fn from_path(path: &GeometricRoughPath) -> Self {
        Self::new(path.grid.clone(), path.dim, path.values.clone(), |i, j| {
            path.second_level_between(i, j)
        })
        .expect("shapes come from a valid path")
    }
}

impl TwoParameterPath for DenseIncrementTable {
    fn dim(&self) -> usize {
        self.dim
    }
    fn grid(&self) -> &TimeGrid {
        &self.grid
    }
    fn signature(&self, i: usize, j: usize) -> Signature2 {
        let (a, b) = (i.min(j), i.max(j));
        let n = self.grid.len();
        let k = self.dim;
        let kk = k * k;
        let level1 = (0..k)
            .map(|m| self.values[b * k + m] - self.values[a * k + m])
            .collect();
        let level2 = self.spans[(a * n + b) * kk..(a * n + b + 1) * kk].to_vec();
        let s = Signature2 { level1, level2 };
        if j < i {
            s.inverse()
        } else {
            s
        }
    }
}

/// Indices at which two-parameter identities are audited: all instants for
/// short grids, otherwise an evenly spaced subset that always contains both ends.
fn audit_indices(n_points: usize) -> Vec<usize> {
    const MAX: usize = 33;
    if n_points <= MAX {
        return (0..n_points).collect();
    }
    let last = n_points - 1;
    let mut idx: Vec<usize> = (0..MAX).map(|m| m * last / (MAX - 1)).collect();
    idx.dedup();
    idx
}

/// `max |𝕫_{ik} − 𝕫_{ij} − 𝕫_{jk} − δZ_{ij} ⊗ δZ_{jk}|` over triples `i < j < k`
/// of audited instants.
pub fn chen_residual<P: TwoParameterPath + ?Sized>(path: &P) -> f64 {
    let idx = audit_indices(path.grid().len());
    let m = idx.len();
    let mut sigs = vec![None; m * m];
    for a in 0..m {
        for b in a + 1..m {
            sigs[a * m + b] = Some(path.signature(idx[a], idx[b]));
        }
    }
    let get = |a: usize, b: usize| sigs[a * m + b].as_ref().expect("filled above");
    let mut worst = 0.0f64;
    for a in 0..m {
        for b in a + 1..m {
            for c in b + 1..m {
                let (ac, ab, bc) = (get(a, c), get(a, b), get(b, c));
                let mut r = ac.level2.clone();
                for (x, (y, z)) in r.iter_mut().zip(ab.level2.iter().zip(&bc.level2)) {
                    *x -= y + z;
                }
                add_outer(&mut r, &ab.level1, &bc.level1, -1.0);
                worst = worst.max(max_abs(&r));
            }
        }
    }
    worst
}

/// `max |Sym(𝕫_{st}) − ½ δZ_{st} ⊗ δZ_{st}|` over every consecutive interval
/// and every pair of audited instants.
pub fn geometricity_residual<P: TwoParameterPath + ?Sized>(path: &P) -> f64 {
    let k = path.dim();
    let check = |s: &Signature2| {
        let mut worst = 0.0f64;
        for l in 0..k {
            for m in 0..k {
                let sym = 0.5 * (s.level2[l * k + m] + s.level2[m * k + l]);
                worst = worst.max((sym - 0.5 * s.level1[l] * s.level1[m]).abs());
            }
        }
        worst
    };
    let n = path.grid().len();
    let mut worst = (0..n - 1)
        .map(|i| check(&path.signature(i, i + 1)))
        .fold(0.0, f64::max);
    let idx = audit_indices(n);
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            worst = worst.max(check(&path.signature(i, j)));
        }
    }
    worst
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 1.0 / 3.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "Hölder exponent must lie in (1/3, 1], got {alpha}"
        )))
    }
}

/// Lift a differentiable path: `𝕫_i = ∫_{t_i}^{t_{i+1}} (Z_s − Z_{t_i}) ⊗ Ż_s ds`
/// by Gauss–Legendre quadrature on each interval.
pub fn lift_smooth<P: SmoothPath + ?Sized>(
    path: &P,
    grid: &TimeGrid,
    opts: LiftOptions,
) -> Result<GeometricRoughPath> {
    if opts.quad_order < 2 {
        return Err(Error::InvalidParameter(format!(
            "quadrature order must be at least 2, got {}",
            opts.quad_order
        )));
    }
    let k = path.dim();
    let rule = GaussLegendre::new(opts.quad_order);
    let mut values = vec![0.0; grid.len() * k];
    for (i, &t) in grid.times().iter().enumerate() {
        path.value(t, &mut values[i * k..(i + 1) * k]);
    }
    let mut second = vec![0.0; grid.intervals() * k * k];
    let mut zs = vec![0.0; k];
    let mut dzs = vec![0.0; k];
    let mut delta = vec![0.0; k];
    let mut worst = 0.0f64;
    for i in 0..grid.intervals() {
        let (a, b) = (grid.time(i), grid.time(i + 1));
        let z0 = &values[i * k..(i + 1) * k];
        let zz = &mut second[i * k * k..(i + 1) * k * k];
        for (s, w) in rule.mapped(a, b) {
            path.value(s, &mut zs);
            path.derivative(s, &mut dzs);
            for m in 0..k {
                delta[m] = zs[m] - z0[m];
            }
            add_outer(zz, &delta, &dzs, w);
        }
        let inc: Vec<f64> = (0..k).map(|m| values[(i + 1) * k + m] - values[i * k + m]).collect();
        let scale = 1.0 + inc.iter().map(|x| x * x).sum::<f64>();
        for l in 0..k {
            for m in 0..k {
                let sym = 0.5 * (zz[l * k + m] + zz[m * k + l]);
                worst = worst.max((sym - 0.5 * inc[l] * inc[m]).abs() / scale);
            }
        }
    }
    if !(worst <= opts.tolerance) {
        return Err(Error::QuadratureNotConverged {
            residual: worst,
            tolerance: opts.tolerance,
        });
    }
    GeometricRoughPath::from_parts(grid.clone(), k, values, second, opts.alpha)
}

/// Lift of the piecewise-linear interpolant of `values` (row-major, one row
/// of `dim` entries per grid instant): `𝕫_i = ½ δZ_i ⊗ δZ_i`.
pub fn lift_piecewise_linear(
    grid: &TimeGrid,
    dim: usize,
    values: Vec<f64>,
    alpha: f64,
) -> Result<GeometricRoughPath> {
    if dim == 0 || values.len() != grid.len() * dim {
        return Err(Error::Dimension(format!(
            "expected {} samples of dimension {dim}, got {} entries",
            grid.len(),
            values.len()
        )));
    }
    let mut second = vec![0.0; grid.intervals() * dim * dim];
    for i in 0..grid.intervals() {
        let dz: Vec<f64> = (0..dim)
            .map(|m| values[(i + 1) * dim + m] - values[i * dim + m])
            .collect();
        add_outer(&mut second[i * dim * dim..(i + 1) * dim * dim], &dz, &dz, 0.5);
    }
    GeometricRoughPath::from_parts(grid.clone(), dim, values, second, alpha)
}
