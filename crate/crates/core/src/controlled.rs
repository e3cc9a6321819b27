//! Controlled rough paths and their integrals.
//!
//! A path `Y` with values in `V = ℝ^m` is controlled by the rough path `Z`
//! when `R_{st} = δY_{st} − Y'_s δZ_{st}` is of order `|t−s|^{2α}`. The
//! Gubinelli derivative `Y'_s ∈ L(ℝ^K, V)` is stored row-major, entry
//! `(a, k) = ∂Y^a / ∂Z^k`.
//!
//! Integrals are left-point compensated Riemann sums on the base grid,
//! i.e. the sewing of the germ `Y_s δZ_{st} + Y'_s 𝕫_{st}`. The sewing limit
//! itself is probed by refinement studies, never by adaptive subdivision.
//!
//! Value spaces are finite-dimensional; Fréchet-valued paths only appear
//! through spectral truncation in the fluid solvers.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rough_path::GeometricRoughPath;

#[derive(Debug, Clone)]
pub struct ControlledPath {
    base: Arc<GeometricRoughPath>,
    value_dim: usize,
    values: Vec<f64>,
    derivatives: Vec<f64>,
}

impl ControlledPath {
    pub fn new(
        base: Arc<GeometricRoughPath>,
        value_dim: usize,
        values: Vec<f64>,
        derivatives: Vec<f64>,
    ) -> Result<Self> {
        let n = base.grid().len();
        let k = base.dim();
        if values.len() != n * value_dim || derivatives.len() != n * value_dim * k {
            return Err(Error::Dimension(format!(
                "controlled path over {n} instants with values in R^{value_dim} needs {} values and {} derivative entries, got {} and {}",
                n * value_dim,
                n * value_dim * k,
                values.len(),
                derivatives.len()
            )));
        }
        if values.iter().chain(&derivatives).any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("controlled path has non-finite entries".into()));
        }
        let path = Self {
            base,
            value_dim,
            values,
            derivatives,
        };
        let seminorm = path.remainder_seminorm();
        if !seminorm.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "remainder seminorm is not finite ({seminorm})"
            )));
        }
        Ok(path)
    }

    /// Build from a per-instant closure `f(i, Y_i, Y'_i)`.
    pub fn from_fn<F>(base: Arc<GeometricRoughPath>, value_dim: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, &mut [f64], &mut [f64]),
    {
        let n = base.grid().len();
        let k = base.dim();
        let mut values = vec![0.0; n * value_dim];
        let mut derivatives = vec![0.0; n * value_dim * k];
        for i in 0..n {
            f(
                i,
                &mut values[i * value_dim..(i + 1) * value_dim],
                &mut derivatives[i * value_dim * k..(i + 1) * value_dim * k],
            );
        }
        Self::new(base, value_dim, values, derivatives)
    }

    /// The driver itself: `Y = Z`, `Y' = I`.
    pub fn driver(base: Arc<GeometricRoughPath>) -> Self {
        let k = base.dim();
        Self::from_fn(base.clone(), k, |i, y, dy| {
            y.copy_from_slice(base.value(i));
            for a in 0..k {
                dy[a * k + a] = 1.0;
            }
        })
        .expect("the driver is controlled by itself")
    }

    /// A constant path, with zero Gubinelli derivative.
    pub fn constant(base: Arc<GeometricRoughPath>, value: &[f64]) -> Self {
        let m = value.len();
        Self::from_fn(base, m, |_, y, _| y.copy_from_slice(value)).expect("constant path")
    }

    pub fn base(&self) -> &Arc<GeometricRoughPath> {
        &self.base
    }

    pub fn value_dim(&self) -> usize {
        self.value_dim
    }

    pub fn len(&self) -> usize {
        self.base.grid().len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.value_dim..(i + 1) * self.value_dim]
    }

    pub fn derivative(&self, i: usize) -> &[f64] {
        let w = self.value_dim * self.base.dim();
        &self.derivatives[i * w..(i + 1) * w]
    }

    pub fn increment(&self, i: usize, j: usize) -> Vec<f64> {
        self.value(j).iter().zip(self.value(i)).map(|(b, a)| b - a).collect()
    }

    /// `R_{t_i t_j} = δY − Y'_{t_i} δZ`.
    pub fn remainder(&self, i: usize, j: usize) -> Vec<f64> {
        let k = self.base.dim();
        let dz = self.base.increment(i, j);
        let d = self.derivative(i);
        let mut r = self.increment(i, j);
        for (a, ra) in r.iter_mut().enumerate() {
            *ra -= (0..k).map(|l| d[a * k + l] * dz[l]).sum::<f64>();
        }
        r
    }

    /// `max |R_{st}| / |t−s|^{2α}` over grid pairs with `|t−s| ≤ T/4`
    /// (consecutive pairs are always included).
    pub fn remainder_seminorm(&self) -> f64 {
        let grid = self.base.grid();
        let cap = grid.horizon() / 4.0;
        let two_alpha = 2.0 * self.base.alpha();
        let n = grid.len();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                let dt = grid.time(j) - grid.time(i);
                if j > i + 1 && dt > cap {
                    break;
                }
                let r = self.remainder(i, j);
                let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
                worst = worst.max(norm / dt.powf(two_alpha));
            }
        }
        worst
    }

    fn same_base(&self, other: &ControlledPath) -> Result<()> {
        if Arc::ptr_eq(&self.base, &other.base)
            || (self.base.grid() == other.base.grid() && self.base.dim() == other.base.dim())
        {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// A bilinear pairing `B : V_X × V_Y → W`.
pub trait Bilinear {
    fn left_dim(&self) -> usize;
    fn right_dim(&self) -> usize;
    fn out_dim(&self) -> usize;
    /// `out += B(x, y)`.
    fn accumulate(&self, x: &[f64], y: &[f64], out: &mut [f64]);
}

/// `ℝ × ℝ → ℝ`, ordinary multiplication.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScalarProduct;

impl Bilinear for ScalarProduct {
    fn left_dim(&self) -> usize {
        1
    }
    fn right_dim(&self) -> usize {
        1
    }
    fn out_dim(&self) -> usize {
        1
    }
    fn accumulate(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        out[0] += x[0] * y[0];
    }
}

/// Matrix-vector product `ℝ^{m×n} × ℝ^n → ℝ^m` (row-major matrix).
#[derive(Debug, Clone, Copy)]
pub struct MatVec {
    pub rows: usize,
    pub cols: usize,
}

impl Bilinear for MatVec {
    fn left_dim(&self) -> usize {
        self.rows * self.cols
    }
    fn right_dim(&self) -> usize {
        self.cols
    }
    fn out_dim(&self) -> usize {
        self.rows
    }
    fn accumulate(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            *o += x[r * self.cols..(r + 1) * self.cols]
                .iter()
                .zip(y)
                .map(|(a, b)| a * b)
                .sum::<f64>();
        }
    }
}

/// Column `l` of a row-major `rows × cols` matrix.
fn column(m: &[f64], rows: usize, cols: usize, l: usize) -> Vec<f64> {
    (0..rows).map(|a| m[a * cols + l]).collect()
}

/// `∫ Y dZ` for `Y` with values in `ℝ^{m×K}` (or `ℝ^K` when `m = 1`),
/// summed from the germ `Y_s δZ_{st} + Y'_s 𝕫_{st}`. The result is
/// controlled with Gubinelli derivative `Y`.
pub fn rough_integral(y: &ControlledPath) -> Result<ControlledPath> {
    let base = y.base.clone();
    let k = base.dim();
    if y.value_dim % k != 0 {
        return Err(Error::Dimension(format!(
            "integrand dimension {} is not a multiple of the driver dimension {k}",
            y.value_dim
        )));
    }
    let m = y.value_dim / k;
    let n = base.grid().len();
    let mut values = vec![0.0; n * m];
    for i in 0..n - 1 {
        let dz = base.step_increment(i);
        let zz = base.second_level(i);
        let yi = y.value(i);
        let di = y.derivative(i);
        for a in 0..m {
            let mut acc = 0.0;
            for kk in 0..k {
                acc += yi[a * k + kk] * dz[kk];
                // Y'_{(a,kk), l} 𝕫^{l kk}
                for l in 0..k {
                    acc += di[(a * k + kk) * k + l] * zz[l * k + kk];
                }
            }
            values[(i + 1) * m + a] = values[i * m + a] + acc;
        }
    }
    ControlledPath::new(base, m, values, y.values.clone())
}

/// `∫ B(X, dY)` from the germ `B(X_s, δY_{st}) + B(X'_s, Y'_s) 𝕫_{st}`.
/// The result is controlled with derivative `B(X_s, Y'_s)`.
pub fn integral_controlled_vs_controlled<B: Bilinear + ?Sized>(
    x: &ControlledPath,
    y: &ControlledPath,
    pairing: &B,
) -> Result<ControlledPath> {
    x.same_base(y)?;
    check_pairing(pairing, x, y)?;
    let base = x.base.clone();
    let k = base.dim();
    let (mx, my, w) = (x.value_dim, y.value_dim, pairing.out_dim());
    let n = base.grid().len();
    let mut values = vec![0.0; n * w];
    let mut derivs = vec![0.0; n * w * k];
    let mut germ = vec![0.0; w];
    let mut tmp = vec![0.0; w];
    for i in 0..n {
        let (xd, yd) = (x.derivative(i), y.derivative(i));
        let ycols: Vec<Vec<f64>> = (0..k).map(|c| column(yd, my, k, c)).collect();
        for (c, ycol) in ycols.iter().enumerate() {
            tmp.iter_mut().for_each(|v| *v = 0.0);
            pairing.accumulate(x.value(i), ycol, &mut tmp);
            for a in 0..w {
                derivs[(i * w + a) * k + c] = tmp[a];
            }
        }
        if i + 1 == n {
            break;
        }
        germ.iter_mut().for_each(|v| *v = 0.0);
        pairing.accumulate(x.value(i), &y.increment(i, i + 1), &mut germ);
        let zz = base.second_level(i);
        for l in 0..k {
            let xcol = column(xd, mx, k, l);
            for (c, ycol) in ycols.iter().enumerate() {
                let coeff = zz[l * k + c];
                if coeff == 0.0 {
                    continue;
                }
                tmp.iter_mut().for_each(|v| *v = 0.0);
                pairing.accumulate(&xcol, ycol, &mut tmp);
                for a in 0..w {
                    germ[a] += coeff * tmp[a];
                }
            }
        }
        for a in 0..w {
            values[(i + 1) * w + a] = values[i * w + a] + germ[a];
        }
    }
    ControlledPath::new(base, w, values, derivs)
}

/// A `C³` map `Φ : ℝ^n → ℝ^m` with its Jacobian (row-major `m × n`).
pub trait SmoothMap {
    fn in_dim(&self) -> usize;
    fn out_dim(&self) -> usize;
    fn eval(&self, y: &[f64], out: &mut [f64]);
    fn jacobian(&self, y: &[f64], out: &mut [f64]);
}

pub struct FnMap<F, J> {
    in_dim: usize,
    out_dim: usize,
    f: F,
    jac: J,
}

impl<F, J> FnMap<F, J>
where
    F: Fn(&[f64], &mut [f64]),
    J: Fn(&[f64], &mut [f64]),
{
    pub fn new(in_dim: usize, out_dim: usize, f: F, jac: J) -> Self {
        Self {
            in_dim,
            out_dim,
            f,
            jac,
        }
    }
}

impl<F, J> SmoothMap for FnMap<F, J>
where
    F: Fn(&[f64], &mut [f64]),
    J: Fn(&[f64], &mut [f64]),
{
    fn in_dim(&self) -> usize {
        self.in_dim
    }
    fn out_dim(&self) -> usize {
        self.out_dim
    }
    fn eval(&self, y: &[f64], out: &mut [f64]) {
        (self.f)(y, out)
    }
    fn jacobian(&self, y: &[f64], out: &mut [f64]) {
        (self.jac)(y, out)
    }
}

/// `(Φ(Y), DΦ(Y) Y')`.
pub fn compose_with_map<M: SmoothMap + ?Sized>(y: &ControlledPath, map: &M) -> Result<ControlledPath> {
    if map.in_dim() != y.value_dim {
        return Err(Error::Dimension(format!(
            "map expects R^{}, path takes values in R^{}",
            map.in_dim(),
            y.value_dim
        )));
    }
    let k = y.base.dim();
    let (n_in, n_out) = (map.in_dim(), map.out_dim());
    let mut jac = vec![0.0; n_out * n_in];
    ControlledPath::from_fn(y.base.clone(), n_out, |i, v, d| {
        let yi = y.value(i);
        map.eval(yi, v);
        map.jacobian(yi, &mut jac);
        let yd = y.derivative(i);
        for a in 0..n_out {
            for l in 0..k {
                d[a * k + l] = (0..n_in).map(|b| jac[a * n_in + b] * yd[b * k + l]).sum();
            }
        }
    })
}

/// `(B(X, Y), B(X', Y) + B(X, Y'))`.
pub fn product<B: Bilinear + ?Sized>(
    x: &ControlledPath,
    y: &ControlledPath,
    pairing: &B,
) -> Result<ControlledPath> {
    x.same_base(y)?;
    check_pairing(pairing, x, y)?;
    let k = x.base.dim();
    let (mx, my, w) = (x.value_dim, y.value_dim, pairing.out_dim());
    let mut tmp = vec![0.0; w];
    ControlledPath::from_fn(x.base.clone(), w, |i, v, d| {
        pairing.accumulate(x.value(i), y.value(i), v);
        for l in 0..k {
            tmp.iter_mut().for_each(|t| *t = 0.0);
            pairing.accumulate(&column(x.derivative(i), mx, k, l), y.value(i), &mut tmp);
            pairing.accumulate(x.value(i), &column(y.derivative(i), my, k, l), &mut tmp);
            for a in 0..w {
                d[a * k + l] = tmp[a];
            }
        }
    })
}

fn check_pairing<B: Bilinear + ?Sized>(b: &B, x: &ControlledPath, y: &ControlledPath) -> Result<()> {
    if b.left_dim() != x.value_dim || b.right_dim() != y.value_dim {
        return Err(Error::Dimension(format!(
            "pairing expects R^{} x R^{}, got R^{} x R^{}",
            b.left_dim(),
            b.right_dim(),
            x.value_dim,
            y.value_dim
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;
    use crate::quadrature::GaussLegendre;
    use crate::rough_path::{lift_piecewise_linear, lift_smooth, FnPath, LiftOptions};
    use proptest::prelude::*;

    /// Z = (t, t² + sin 3t) on [0, 1].
    fn smooth_2d(n: usize) -> Arc<GeometricRoughPath> {
        let p = FnPath::new(
            2,
            |t: f64, z: &mut [f64]| {
                z[0] = t;
                z[1] = t * t + (3.0 * t).sin();
            },
            |t: f64, z: &mut [f64]| {
                z[0] = 1.0;
                z[1] = 2.0 * t + 3.0 * (3.0 * t).cos();
            },
        );
        Arc::new(lift_smooth(&p, &TimeGrid::uniform(0.0, 1.0, n).unwrap(), LiftOptions::default()).unwrap())
    }

    fn scalar_smooth(n: usize) -> Arc<GeometricRoughPath> {
        let p = FnPath::new(
            1,
            |t: f64, z: &mut [f64]| z[0] = (2.0 * t).sin() + t,
            |t: f64, z: &mut [f64]| z[0] = 2.0 * (2.0 * t).cos() + 1.0,
        );
        Arc::new(lift_smooth(&p, &TimeGrid::uniform(0.0, 1.0, n).unwrap(), LiftOptions::default()).unwrap())
    }

    /// Classical ∫₀¹ f(t) g'(t) dt by composite Gauss–Legendre.
    fn classical(f: impl Fn(f64) -> f64, dg: impl Fn(f64) -> f64) -> f64 {
        let q = GaussLegendre::new(16);
        (0..64)
            .map(|i| q.integrate(i as f64 / 64.0, (i + 1) as f64 / 64.0, |t| f(t) * dg(t)))
            .sum()
    }

    proptest! {
        #[test]
        fn scalar_self_integral_is_exact(steps in proptest::collection::vec(-2.0f64..2.0, 1..40)) {
            let n = steps.len();
            let mut vals = vec![0.3];
            for s in &steps {
                let last = *vals.last().unwrap();
                vals.push(last + s);
            }
            let grid = TimeGrid::uniform(0.0, 1.0, n).unwrap();
            let base = Arc::new(lift_piecewise_linear(&grid, 1, vals.clone(), 1.0).unwrap());
            let int = rough_integral(&ControlledPath::driver(base)).unwrap();
            let want = 0.5 * (vals[n] * vals[n] - vals[0] * vals[0]);
            prop_assert!((int.value(n)[0] - want).abs() <= 1e-12 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn constant_integrand() {
        let base = smooth_2d(8);
        let c = ControlledPath::constant(base.clone(), &[2.0, -1.0]);
        let int = rough_integral(&c).unwrap();
        let dz = base.increment(0, 8);
        assert!((int.value(8)[0] - (2.0 * dz[0] - dz[1])).abs() < 1e-14);
    }

    fn sin_of_time(base: Arc<GeometricRoughPath>) -> ControlledPath {
        // Y = (0, sin Z¹) as a covector, Y'_{(1,0)} = cos Z¹.
        ControlledPath::from_fn(base.clone(), 2, |i, y, d| {
            let t = base.value(i)[0];
            y[1] = t.sin();
            d[2] = t.cos();
        })
        .unwrap()
    }

    #[test]
    fn time_lifted_integrand_matches_classical_integral() {
        let exact = classical(f64::sin, |t| 2.0 * t + 3.0 * (3.0 * t).cos());
        let mut errs = Vec::new();
        for n in [16, 32, 64] {
            let int = rough_integral(&sin_of_time(smooth_2d(n))).unwrap();
            errs.push((int.value(n)[0] - exact).abs());
        }
        assert!(errs[2] < 1e-4, "{errs:?}");
        // O(mesh²): halving the mesh divides the error by about four.
        assert!(errs[0] / errs[1] > 3.0 && errs[1] / errs[2] > 3.0, "{errs:?}");
    }

    #[test]
    fn output_derivative_is_integrand() {
        let base = smooth_2d(8);
        let y = sin_of_time(base);
        let int = rough_integral(&y).unwrap();
        assert_eq!(int.derivative(5), y.value(5));
        assert!(int.remainder_seminorm().is_finite());
    }

    #[test]
    fn controlled_vs_controlled_reductions() {
        let base = smooth_2d(16);
        let y = sin_of_time(base.clone());
        // X ≡ 1 telescopes to δY.
        let one = ControlledPath::constant(base.clone(), &[1.0]);
        let pair = MatVec { rows: 1, cols: 1 };
        let y1 = ControlledPath::from_fn(base.clone(), 1, |i, v, d| {
            v[0] = y.value(i)[1];
            d.copy_from_slice(&[y.derivative(i)[2], y.derivative(i)[3]]);
        })
        .unwrap();
        let int = integral_controlled_vs_controlled(&one, &y1, &pair).unwrap();
        assert!((int.value(16)[0] - y1.increment(0, 16)[0]).abs() < 1e-14);

        // X = Y = Z scalar gives ½ δ(Z²).
        let sb = scalar_smooth(10);
        let z = ControlledPath::driver(sb.clone());
        let int = integral_controlled_vs_controlled(&z, &z, &ScalarProduct).unwrap();
        let (a, b) = (sb.value(0)[0], sb.value(10)[0]);
        assert!((int.value(10)[0] - 0.5 * (b * b - a * a)).abs() < 1e-13);

        // With Y = Z it is rough_integral.
        let direct = rough_integral(&y).unwrap();
        let viapair = integral_controlled_vs_controlled(&y, &ControlledPath::driver(base), &MatVec { rows: 1, cols: 2 })
            .unwrap();
        assert!((direct.value(16)[0] - viapair.value(16)[0]).abs() < 1e-14);
    }

    #[test]
    fn cross_integral_matches_classical() {
        // ∫ Z¹ dZ² with Z¹ = t.
        let exact = classical(|t| t, |t| 2.0 * t + 3.0 * (3.0 * t).cos());
        let mut errs = Vec::new();
        for n in [16, 32] {
            let base = smooth_2d(n);
            let z = ControlledPath::driver(base.clone());
            let x = ControlledPath::from_fn(base.clone(), 1, |i, v, d| {
                v[0] = z.value(i)[0];
                d[0] = 1.0;
            })
            .unwrap();
            let y = ControlledPath::from_fn(base.clone(), 1, |i, v, d| {
                v[0] = z.value(i)[1];
                d[1] = 1.0;
            })
            .unwrap();
            let int = integral_controlled_vs_controlled(&x, &y, &ScalarProduct).unwrap();
            errs.push((int.value(n)[0] - exact).abs());
        }
        // Z¹ dZ² with exact 𝕫 is exact on each interval up to quadrature.
        assert!(errs[1] < 1e-10, "{errs:?}");
    }

    #[test]
    fn grid_mismatch_rejected() {
        let a = ControlledPath::driver(scalar_smooth(4));
        let b = ControlledPath::driver(scalar_smooth(5));
        assert!(matches!(
            integral_controlled_vs_controlled(&a, &b, &ScalarProduct),
            Err(Error::GridMismatch)
        ));
        assert!(matches!(product(&a, &b, &ScalarProduct), Err(Error::GridMismatch)));
    }

    #[test]
    fn composition_identity_linear_and_square() {
        let base = smooth_2d(8);
        let z = ControlledPath::driver(base.clone());
        let id = FnMap::new(2, 2, |y: &[f64], o: &mut [f64]| o.copy_from_slice(y), |_: &[f64], j: &mut [f64]| {
            j.copy_from_slice(&[1.0, 0.0, 0.0, 1.0])
        });
        let same = compose_with_map(&z, &id).unwrap();
        assert_eq!(same.values, z.values);
        assert_eq!(same.derivatives, z.derivatives);

        let a = [1.0, 2.0, -3.0, 0.5];
        let lin = FnMap::new(
            2,
            2,
            move |y: &[f64], o: &mut [f64]| {
                o[0] = a[0] * y[0] + a[1] * y[1];
                o[1] = a[2] * y[0] + a[3] * y[1];
            },
            move |_: &[f64], j: &mut [f64]| j.copy_from_slice(&a),
        );
        let ay = compose_with_map(&z, &lin).unwrap();
        for i in 0..9 {
            assert_eq!(ay.derivative(i), &a);
        }

        // Φ(y) = y² on a scalar driver reproduces the level-1 values of the lift of Z².
        let sb = scalar_smooth(12);
        let sq = FnMap::new(1, 1, |y: &[f64], o: &mut [f64]| o[0] = y[0] * y[0], |y: &[f64], j: &mut [f64]| {
            j[0] = 2.0 * y[0]
        });
        let z2 = compose_with_map(&ControlledPath::driver(sb.clone()), &sq).unwrap();
        let zsq = FnPath::new(
            1,
            |t: f64, z: &mut [f64]| z[0] = ((2.0 * t).sin() + t).powi(2),
            |t: f64, z: &mut [f64]| z[0] = 2.0 * ((2.0 * t).sin() + t) * (2.0 * (2.0 * t).cos() + 1.0),
        );
        let oracle = lift_smooth(&zsq, sb.grid(), LiftOptions::default()).unwrap();
        for i in 0..13 {
            assert!((z2.value(i)[0] - oracle.value(i)[0]).abs() < 1e-14);
            assert!((z2.derivative(i)[0] - 2.0 * sb.value(i)[0]).abs() < 1e-15);
        }
        // Remainder δ(Z²) − 2Z δZ = (δZ)², so the seminorm is about sup|Ż|².
        assert!(z2.remainder_seminorm() < 10.0);
    }

    #[test]
    fn chain_rule_along_rde_solution() {
        // Y = exp(Z) solves dY = Y dZ. Φ(y) = y², so Φ(Y_t) − Φ(Y_0) = ∫ 2Y² dZ.
        let mut errs = Vec::new();
        for n in [32, 64, 128] {
            let base = scalar_smooth(n);
            let y = ControlledPath::from_fn(base.clone(), 1, |i, v, d| {
                v[0] = base.value(i)[0].exp();
                d[0] = v[0];
            })
            .unwrap();
            let g = FnMap::new(1, 1, |y: &[f64], o: &mut [f64]| o[0] = 2.0 * y[0] * y[0], |y: &[f64], j: &mut [f64]| {
                j[0] = 4.0 * y[0]
            });
            let integrand = compose_with_map(&y, &g).unwrap();
            let int = rough_integral(&integrand).unwrap();
            let want = y.value(n)[0].powi(2) - y.value(0)[0].powi(2);
            errs.push((int.value(n)[0] - want).abs() / want.abs());
        }
        assert!(errs[2] < 1e-3, "{errs:?}");
        assert!(errs[0] / errs[1] > 3.0 && errs[1] / errs[2] > 3.0, "{errs:?}");
    }

    #[test]
    fn product_rules() {
        let base = scalar_smooth(16);
        let z = ControlledPath::driver(base.clone());
        let one = ControlledPath::constant(base.clone(), &[3.0]);
        let p = product(&one, &z, &ScalarProduct).unwrap();
        for i in 0..17 {
            assert_eq!(p.value(i)[0], 3.0 * z.value(i)[0]);
        }
        let sq = product(&z, &z, &ScalarProduct).unwrap();
        for i in 0..17 {
            let zi = z.value(i)[0];
            assert_eq!(sq.value(i)[0], zi * zi);
            assert_eq!(sq.derivative(i)[0], 2.0 * zi);
        }
    }

    #[test]
    fn leibniz_in_integrated_form() {
        // X = sin Z¹, Y = Z² + Z¹ on the smooth 2D driver.
        // δ(XY) = ∫ X dY + ∫ Y dX, up to O(mesh²).
        let mut errs = Vec::new();
        for n in [16, 32, 64] {
            let base = smooth_2d(n);
            let x = ControlledPath::from_fn(base.clone(), 1, |i, v, d| {
                let z = base.value(i);
                v[0] = z[0].sin();
                d[0] = z[0].cos();
            })
            .unwrap();
            let y = ControlledPath::from_fn(base.clone(), 1, |i, v, d| {
                let z = base.value(i);
                v[0] = z[1] + z[0];
                d.copy_from_slice(&[1.0, 1.0]);
            })
            .unwrap();
            let xy = product(&x, &y, &ScalarProduct).unwrap();
            let a = integral_controlled_vs_controlled(&x, &y, &ScalarProduct).unwrap();
            let b = integral_controlled_vs_controlled(&y, &x, &ScalarProduct).unwrap();
            let lhs = xy.increment(0, n)[0];
            errs.push((lhs - a.value(n)[0] - b.value(n)[0]).abs());
        }
        assert!(errs[2] < 1e-4, "{errs:?}");
        assert!(errs[0] / errs[1] > 3.0 && errs[1] / errs[2] > 3.0, "{errs:?}");
    }

    #[test]
    fn refinement_rate_matches_sewing_exponent() {
        // Smooth driver, α = 1: successive differences decay like mesh^{3α−1} = mesh².
        let vals: Vec<f64> = [32, 64, 128, 256, 512]
            .iter()
            .map(|&n| rough_integral(&sin_of_time(smooth_2d(n))).unwrap().value(n)[0])
            .collect();
        let diffs: Vec<f64> = vals.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        let slope = fit_slope(&diffs);
        assert!((slope - 2.0).abs() <= 0.3, "slope {slope}, diffs {diffs:?}");
    }

    fn fit_slope(diffs: &[f64]) -> f64 {
        // Against log2(1/mesh); consecutive levels differ by one.
        let n = diffs.len() as f64;
        let xs: Vec<f64> = (0..diffs.len()).map(|i| i as f64).collect();
        let ys: Vec<f64> = diffs.iter().map(|d| -d.log2()).collect();
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        sxy / sxx
    }
}
