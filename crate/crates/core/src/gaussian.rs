//! Gaussian drivers (Brownian motion, fractional Brownian motion) and their
//! lifts to geometric rough paths by piecewise-linear refinement.
//!
//! Samples are drawn with the exact covariance on a fine grid through a
//! lower-triangular factorization; the rough path is the lift of the
//! piecewise-linear interpolant, coarsened to the requested grid.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::rough_path::{lift_piecewise_linear, GeometricRoughPath};

pub const DEFAULT_FINE_RESOLUTION: usize = 64;
/// Default Hölder exponent attached to stochastic drivers.
pub const ALPHA_STOCHASTIC: f64 = 0.4;

const JITTER_LADDER: [f64; 5] = [1e-14, 1e-13, 1e-12, 1e-11, 1e-10];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GaussianKind {
    Brownian,
    Fbm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSpec {
    pub kind: GaussianKind,
    pub hurst: f64,
    pub dim: usize,
    pub seed: u64,
    /// Sub-steps per output interval.
    pub fine_resolution: usize,
}

impl GaussianSpec {
    pub fn brownian(dim: usize, seed: u64) -> Self {
        Self {
            kind: GaussianKind::Brownian,
            hurst: 0.5,
            dim,
            seed,
            fine_resolution: DEFAULT_FINE_RESOLUTION,
        }
    }

    pub fn fbm(hurst: f64, dim: usize, seed: u64) -> Self {
        Self {
            kind: GaussianKind::Fbm,
            hurst,
            dim,
            seed,
            fine_resolution: DEFAULT_FINE_RESOLUTION,
        }
    }

    pub fn with_fine_resolution(mut self, fine_resolution: usize) -> Self {
        self.fine_resolution = fine_resolution;
        self
    }

    /// Effective Hurst parameter (Brownian motion is always 1/2).
    pub fn hurst(&self) -> f64 {
        match self.kind {
            GaussianKind::Brownian => 0.5,
            GaussianKind::Fbm => self.hurst,
        }
    }

    /// Hölder exponent recorded on the lift: 0.4, lowered to the midpoint of
    /// `(1/3, H)` when `H ≤ 0.4` so that it stays below the path regularity.
    pub fn alpha(&self) -> f64 {
        let h = self.hurst();
        if h > ALPHA_STOCHASTIC {
            ALPHA_STOCHASTIC
        } else {
            0.5 * (h + 1.0 / 3.0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.hurst();
        if !(h > 1.0 / 3.0 && h <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "Hurst parameter must lie in (1/3, 1], got {h}"
            )));
        }
        if self.dim == 0 {
            return Err(Error::InvalidParameter("driver dimension must be positive".into()));
        }
        if self.fine_resolution == 0 {
            return Err(Error::InvalidParameter("fine_resolution must be at least 1".into()));
        }
        Ok(())
    }
}

/// `R^H(s,t) = ½(s^{2H} + t^{2H} − |t−s|^{2H})`.
pub fn fbm_covariance(s: f64, t: f64, hurst: f64) -> Result<f64> {
    if s < 0.0 || t < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "fBm covariance needs non-negative times, got ({s}, {t})"
        )));
    }
    if !(hurst > 0.0 && hurst <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "Hurst parameter must lie in (0, 1], got {hurst}"
        )));
    }
    Ok(FbmCovariance { hurst }.covariance(s, t))
}

/// Covariance function of a centred scalar Gaussian process; each driver
/// component is an independent copy.
pub trait Covariance {
    fn covariance(&self, s: f64, t: f64) -> f64;
}

#[derive(Debug, Clone, Copy)]
pub struct FbmCovariance {
    pub hurst: f64,
}

impl Covariance for FbmCovariance {
    fn covariance(&self, s: f64, t: f64) -> f64 {
        // Closed forms at the two special exponents keep them exact.
        if self.hurst == 0.5 {
            return s.min(t);
        }
        if self.hurst == 1.0 {
            return s * t;
        }
        let h2 = 2.0 * self.hurst;
        0.5 * (s.powf(h2) + t.powf(h2) - (t - s).abs().powf(h2))
    }
}

/// Dense symmetric covariance matrix `R(t_i, t_j)`, row-major.
#[derive(Debug, Clone)]
pub struct CovarianceMatrix {
    size: usize,
    data: Vec<f64>,
}

impl CovarianceMatrix {
    pub fn build<C: Covariance + ?Sized>(cov: &C, times: &[f64]) -> Self {
        let n = times.len();
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let c = cov.covariance(times[i], times[j]);
                data[i * n + j] = c;
                data[j * n + i] = c;
            }
        }
        Self { size: n, data }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.size + j]
    }

    /// Lower Cholesky factor of `R + ε·d·I`, where `d` is the largest
    /// diagonal entry and `ε` climbs the jitter ladder 1e-14 … 1e-10.
    pub fn factor(&self) -> Result<LowerFactor> {
        let n = self.size;
        let dmax = (0..n).map(|i| self.get(i, i)).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let mut last = (0.0, f64::INFINITY);
        for &eps in &JITTER_LADDER {
            match cholesky(&self.data, n, eps * dmax) {
                Ok(l) => return Ok(LowerFactor { size: n, data: l }),
                Err(cond) => last = (eps, cond),
            }
        }
        Err(Error::Factorization {
            size: n,
            jitter: last.0,
            condition_estimate: last.1,
        })
    }
}

/// Lower-triangular `L` with `L Lᵀ ≈ R`.
#[derive(Debug, Clone)]
pub struct LowerFactor {
    size: usize,
    data: Vec<f64>,
}

impl LowerFactor {
    /// `L g` for a standard normal vector `g`.
    pub fn apply(&self, g: &[f64]) -> Vec<f64> {
        let n = self.size;
        (0..n)
            .map(|i| {
                self.data[i * n..i * n + i + 1]
                    .iter()
                    .zip(g)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }
}

/// Returns the factor, or a condition estimate (squared ratio of the largest
/// to the failing pivot) on breakdown.
fn cholesky(a: &[f64], n: usize, jitter: f64) -> std::result::Result<Vec<f64>, f64> {
    let mut l = vec![0.0; n * n];
    let mut max_pivot = 0.0f64;
    for i in 0..n {
        for j in 0..=i {
            let (ri, rj) = (&l[i * n..i * n + j], &l[j * n..j * n + j]);
            let dot: f64 = ri.iter().zip(rj).map(|(x, y)| x * y).sum();
            if i == j {
                let d = a[i * n + i] + jitter - dot;
                if !(d > 0.0) {
                    let pivot = d.abs().max(f64::MIN_POSITIVE);
                    return Err(max_pivot / pivot);
                }
                max_pivot = max_pivot.max(d);
                l[i * n + i] = d.sqrt();
            } else {
                l[i * n + j] = (a[i * n + j] - dot) / l[j * n + j];
            }
        }
    }
    Ok(l)
}

/// Samples of a `K`-dimensional Gaussian driver on a fine grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSample {
    pub grid: TimeGrid,
    pub dim: usize,
    /// Row-major, `dim` entries per instant.
    pub values: Vec<f64>,
    pub alpha: f64,
}

impl GaussianSample {
    /// Samples at every `stride`-th instant: the dyadic mollification of the
    /// same realization.
    pub fn subsample(&self, stride: usize) -> Result<Self> {
        let grid = self.grid.subsample(stride)?;
        let values = self
            .values
            .chunks(self.dim)
            .step_by(stride)
            .flatten()
            .copied()
            .collect();
        Ok(Self {
            grid,
            dim: self.dim,
            values,
            alpha: self.alpha,
        })
    }

    pub fn lift(&self) -> Result<GeometricRoughPath> {
        lift_piecewise_linear(&self.grid, self.dim, self.values.clone(), self.alpha)
    }

    /// The linear interpolant through every `stride`-th sample, lifted on
    /// the full sample grid. `stride = 1` reproduces [`Self::lift`].
    pub fn mollified(&self, stride: usize) -> Result<GeometricRoughPath> {
        if stride == 0 || self.grid.intervals() % stride != 0 {
            return Err(Error::InvalidParameter(format!(
                "stride {stride} does not divide {} intervals",
                self.grid.intervals()
            )));
        }
        let d = self.dim;
        let t = self.grid.times();
        let mut values = self.values.clone();
        for i in 0..self.grid.len() {
            let a = i / stride * stride;
            if a == i {
                continue;
            }
            let b = a + stride;
            let w = (t[i] - t[a]) / (t[b] - t[a]);
            for k in 0..d {
                values[i * d + k] = (1.0 - w) * self.values[a * d + k] + w * self.values[b * d + k];
            }
        }
        lift_piecewise_linear(&self.grid, d, values, self.alpha)
    }
}

/// Draw one realization on `grid` refined by `spec.fine_resolution`.
pub fn sample_path(spec: &GaussianSpec, grid: &TimeGrid) -> Result<GaussianSample> {
    spec.validate()?;
    let fine = grid.refine(spec.fine_resolution)?;
    if spec.kind == GaussianKind::Brownian {
        return sample_brownian(&fine, spec.dim, spec.seed, spec.alpha());
    }
    let cov = FbmCovariance { hurst: spec.hurst() };
    sample_with_covariance(&cov, &fine, spec.dim, spec.seed, spec.alpha())
}

/// Brownian motion via its closed-form covariance factor `L_ij = √Δt_j`
/// (`j ≤ i`): cumulative sums of scaled normals. Same draws, same order as
/// the generic path, without forming the matrix.
fn sample_brownian(grid: &TimeGrid, dim: usize, seed: u64, alpha: f64) -> Result<GaussianSample> {
    if grid.start() < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "Gaussian drivers need non-negative times, grid starts at {}",
            grid.start()
        )));
    }
    let offset = usize::from(grid.start() == 0.0);
    let t = grid.times();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let n = grid.len();
    let mut values = vec![0.0; n * dim];
    for k in 0..dim {
        let mut z = 0.0;
        let mut prev = 0.0;
        for j in offset..n {
            let g: f64 = StandardNormal.sample(&mut rng);
            z += (t[j] - prev).sqrt() * g;
            prev = t[j];
            values[j * dim + k] = z;
        }
    }
    Ok(GaussianSample {
        grid: grid.clone(),
        dim,
        values,
        alpha,
    })
}

/// Generic entry point for any covariance function. The process is pinned
/// to zero at `t = 0`; instants must be non-negative.
pub fn sample_with_covariance<C: Covariance + ?Sized>(
    cov: &C,
    grid: &TimeGrid,
    dim: usize,
    seed: u64,
    alpha: f64,
) -> Result<GaussianSample> {
    if grid.start() < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "Gaussian drivers need non-negative times, grid starts at {}",
            grid.start()
        )));
    }
    let offset = usize::from(grid.start() == 0.0);
    let times = &grid.times()[offset..];
    let factor = CovarianceMatrix::build(cov, times).factor()?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let n = grid.len();
    let mut values = vec![0.0; n * dim];
    let mut g = vec![0.0; times.len()];
    for k in 0..dim {
        for x in g.iter_mut() {
            *x = StandardNormal.sample(&mut rng);
        }
        for (j, z) in factor.apply(&g).into_iter().enumerate() {
            values[(j + offset) * dim + k] = z;
        }
    }
    Ok(GaussianSample {
        grid: grid.clone(),
        dim,
        values,
        alpha,
    })
}

/// Sample on the refined grid, lift the piecewise-linear interpolant and
/// coarsen back to `grid`.
pub fn lift_gaussian(spec: &GaussianSpec, grid: &TimeGrid) -> Result<GeometricRoughPath> {
    let sample = sample_path(spec, grid)?;
    sample.lift()?.coarsen(grid)
}

/// Log-log slope of the increment variance `σ²(τ) = R(τ,τ) − 2R(0,τ) + R(0,0)`
/// evaluated from `t0`, for the admissibility diagnostic `σ²(τ) ≲ τ^{1/q}`.
/// Reported only; sampling is never gated on it.
pub fn increment_variance_exponent<C: Covariance + ?Sized>(cov: &C, t0: f64, taus: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = taus
        .iter()
        .map(|&tau| {
            let v = cov.covariance(t0 + tau, t0 + tau) - 2.0 * cov.covariance(t0, t0 + tau)
                + cov.covariance(t0, t0);
            (tau.ln(), v.ln())
        })
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
