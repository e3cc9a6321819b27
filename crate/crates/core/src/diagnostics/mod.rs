//! Conserved and structural quantities: invariant series with drift audits,
//! Kelvin circulation on material loops, the scalar Lie chain rule and
//! Wong–Zakai continuity reports.

pub mod chain_rule;
pub mod kelvin;
pub mod wong_zakai;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fluid::euler::{invariants, Invariants2D};
use crate::spectral::Spectral2D;

pub use chain_rule::lie_chain_rule_residual;
pub use kelvin::{advect_loop, circulation, kelvin_circulations, MaterialLoop, SpectralField2D, VelocitySnapshots};
pub use wong_zakai::{wong_zakai_report, WongZakaiReport};

/// `(∫ω², ∫ω⁴, ∫ω)`, from the same routine the solvers' series use.
pub fn enstrophy_casimirs(s: &Spectral2D, w: &[f64]) -> Result<(f64, f64, f64)> {
    let Invariants2D {
        enstrophy,
        casimir4,
        mean_omega,
        ..
    } = invariants(s, w)?;
    Ok((enstrophy, casimir4, mean_omega * 4.0 * std::f64::consts::PI * std::f64::consts::PI))
}

/// Named scalar channels sampled at common instants.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct InvariantSeries {
    pub times: Vec<f64>,
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl InvariantSeries {
    pub fn new(names: &[&str]) -> Self {
        Self {
            times: Vec::new(),
            names: names.iter().map(|s| s.to_string()).collect(),
            columns: vec![Vec::new(); names.len()],
        }
    }

    /// Series of the 2D vorticity invariants.
    pub fn euler() -> Self {
        Self::new(&["energy", "enstrophy", "casimir4", "mean_omega"])
    }

    pub fn push(&mut self, t: f64, values: &[f64]) -> Result<()> {
        if values.len() != self.names.len() {
            return Err(Error::Dimension(format!(
                "{} values for {} channels",
                values.len(),
                self.names.len()
            )));
        }
        self.times.push(t);
        for (c, v) in self.columns.iter_mut().zip(values) {
            c.push(*v);
        }
        Ok(())
    }

    pub fn push_euler(&mut self, s: &Spectral2D, t: f64, w: &[f64]) -> Result<()> {
        let inv = invariants(s, w)?;
        self.push(t, &[inv.energy, inv.enstrophy, inv.casimir4, inv.mean_omega])
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|i| self.columns[i].as_slice())
    }

    /// False when any value is NaN or infinite.
    pub fn is_finite(&self) -> bool {
        self.columns.iter().flatten().all(|v| v.is_finite())
    }

    /// `t,<channels…>` with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for n in &self.names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (i, t) in self.times.iter().enumerate() {
            out.push_str(&format!("{t:.16e}"));
            for c in &self.columns {
                out.push_str(&format!(",{:.16e}", c[i]));
            }
            out.push('\n');
        }
        out
    }

    pub fn audit(&self, name: &str, relative_tolerance: f64) -> Option<AuditEntry> {
        self.channel(name).map(|v| AuditEntry::from_values(v, relative_tolerance))
    }
}

/// Initial values smaller than this are treated as zero by the audit.
pub const ZERO_SCALE: f64 = 1e-12;

/// Drift of one invariant over a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub initial: f64,
    #[serde(rename = "final")]
    pub final_value: f64,
    pub max_abs_drift: f64,
    /// `max_abs_drift / |initial|`, or the absolute drift when `|initial|`
    /// is below [`ZERO_SCALE`].
    pub relative_drift: f64,
    pub pass: bool,
}

impl AuditEntry {
    pub fn from_values(values: &[f64], relative_tolerance: f64) -> Self {
        let initial = values.first().copied().unwrap_or(f64::NAN);
        let final_value = values.last().copied().unwrap_or(f64::NAN);
        let max_abs_drift = if values.iter().any(|v| v.is_nan()) {
            f64::NAN
        } else {
            values.iter().map(|v| (v - initial).abs()).fold(0.0, f64::max)
        };
        let relative_drift = if initial.abs() < ZERO_SCALE {
            max_abs_drift
        } else {
            max_abs_drift / initial.abs()
        };
        Self {
            initial,
            final_value,
            max_abs_drift,
            relative_drift,
            pass: relative_drift <= relative_tolerance,
        }
    }
}

/// Per-invariant audit results keyed by channel name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditReport(pub BTreeMap<String, AuditEntry>);

impl AuditReport {
    pub fn insert(&mut self, name: &str, entry: AuditEntry) {
        self.0.insert(name.to_string(), entry);
    }

    pub fn all_pass(&self) -> bool {
        self.0.values().all(|e| e.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("audit entries are plain numbers")
    }
}
