//! Solutions driven by piecewise-linear mollifications of one Gaussian
//! realization, compared level by level.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::GaussianSample;
use crate::rough_path::GeometricRoughPath;

#[derive(Debug, Clone, Serialize)]
pub struct WongZakaiReport {
    /// Mollification strides, coarsest first.
    pub strides: Vec<usize>,
    /// `‖S_ℓ − S_{ℓ+1}‖_∞` between consecutive levels.
    pub successive: Vec<f64>,
    /// `‖S_ℓ − S_ref‖_∞` against the solution driven by the full lift.
    pub to_reference: Vec<f64>,
    /// `‖S_corrupt − S_ref‖_∞` when the second level is replaced by its
    /// antisymmetric part; infinite when that run aborts.
    pub corrupted_to_reference: f64,
    pub monotone: bool,
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Solve with each mollified driver (mollifier knots every `stride`
/// samples), with the full piecewise-linear lift of the sample, and with
/// that lift's second level antisymmetrized. `solve` maps a driver on the
/// sample grid to a solution vector.
pub fn wong_zakai_report<F>(sample: &GaussianSample, strides: &[usize], solve: F) -> Result<WongZakaiReport>
where
    F: Fn(&GeometricRoughPath) -> Result<Vec<f64>> + Sync,
{
    if strides.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "need at least 3 mollification levels, got {}",
            strides.len()
        )));
    }
    if strides.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::InvalidParameter("strides must decrease from coarse to fine".into()));
    }
    let reference_path = sample.lift()?;
    let mut drivers = strides
        .iter()
        .map(|&s| sample.mollified(s))
        .collect::<Result<Vec<_>>>()?;
    drivers.push(reference_path.clone());
    let solutions = drivers.par_iter().map(&solve).collect::<Result<Vec<_>>>()?;
    let reference = solutions.last().expect("reference solution present");
    let levels = &solutions[..strides.len()];
    let successive: Vec<f64> = levels.windows(2).map(|w| sup_distance(&w[0], &w[1])).collect();
    let to_reference = levels.iter().map(|s| sup_distance(s, reference)).collect();
    let corrupted_to_reference = match solve(&reference_path.with_antisymmetrized_second_level()) {
        Ok(s) => {
            let d = sup_distance(&s, reference);
            if d.is_nan() {
                f64::INFINITY
            } else {
                d
            }
        }
        Err(_) => f64::INFINITY,
    };
    let monotone = successive.windows(2).all(|w| w[1] < w[0]);
    Ok(WongZakaiReport {
        strides: strides.to_vec(),
        successive,
        to_reference,
        corrupted_to_reference,
        monotone,
    })
}
