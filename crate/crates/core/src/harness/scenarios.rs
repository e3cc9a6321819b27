use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::diagnostics::{kelvin_circulations, wong_zakai_report, AuditEntry, AuditReport, InvariantSeries, MaterialLoop};
use crate::error::{Error, Result};
use crate::fields::{TimeVectorField, VectorField, VectorFieldFamily};
use crate::flow::solve_flow;
use crate::fluid::one_d::energy_and_mean;
use crate::fluid::{integrate_rough_pde, Burgers1D, CamassaHolm1D, Euler2D, RoughFields1D, RoughFields2D};
use crate::gaussian::{lift_gaussian, sample_path, GaussianSample};
use crate::grid::TimeGrid;
use crate::io::{self, DumpHeader};
use crate::rough_path::{chen_residual, geometricity_residual, lift_piecewise_linear, lift_smooth, GeometricRoughPath, LiftOptions, Signature2, TwoParameterPath};
use crate::spectral::{Spectral1D, Spectral2D};

use super::config::{DriverKind, ExperimentConfig, FieldsConfig, Scenario, WongZakaiModel};
use super::expr::{parse_scalar, ExprField, ExprPath, ExprTimeField};
use super::presets::resolve;
use super::{Artifacts, Residuals};

const DEFAULT_N_1D: usize = 256;
const DEFAULT_N_2D: usize = 128;

pub(super) fn dispatch(scenario: Scenario, cfg: &ExperimentConfig, out: &mut Artifacts, res: &mut Residuals) -> Result<()> {
    let fields = resolve(&cfg.fields)?;
    if let Some(levels) = cfg.study.levels.filter(|_| scenario != Scenario::WongZakai) {
        record_refinement(cfg, levels, out, res)?;
    }
    match scenario {
        Scenario::Lift => lift(cfg, &fields, out, res),
        Scenario::Rde => rde(cfg, &fields, out, res),
        Scenario::Burgers | Scenario::CamassaHolm => one_d(scenario, cfg, &fields, out, res),
        Scenario::Euler2d => euler(cfg, &fields, out, res, false),
        Scenario::WongZakai => wong_zakai(cfg, &fields, out, res),
        Scenario::Audit => {
            driver_audit(cfg, &fields, res)?;
            euler(cfg, &fields, out, res, true)
        }
    }
}

fn put(res: &mut Residuals, key: &str, value: impl Serialize) {
    res.insert(key.to_string(), json!(value));
}

/// Number of rough fields the configuration describes.
fn fields_count(f: &FieldsConfig) -> Option<usize> {
    f.rough.as_ref().map(Vec::len).or(f.stream.as_ref().map(Vec::len))
}

fn driver_dim(cfg: &ExperimentConfig, f: &FieldsConfig) -> usize {
    match (&cfg.driver.components, cfg.driver.dim) {
        (Some(c), _) => c.len(),
        (None, Some(k)) => k,
        (None, None) => fields_count(f).unwrap_or(1),
    }
}

fn time_grid(cfg: &ExperimentConfig, steps: usize) -> Result<TimeGrid> {
    TimeGrid::uniform(0.0, cfg.grid.horizon, steps)
}

fn analytic_driver(cfg: &ExperimentConfig) -> Result<Option<ExprPath>> {
    match (&cfg.driver.kind, &cfg.driver.components) {
        (DriverKind::Analytic, Some(c)) => Ok(Some(ExprPath::parse(c)?)),
        _ => Ok(None),
    }
}

/// The driver lifted on a uniform grid with `steps` intervals.
fn build_driver(cfg: &ExperimentConfig, f: &FieldsConfig, steps: usize) -> Result<GeometricRoughPath> {
    let grid = time_grid(cfg, steps)?;
    if let Some(p) = analytic_driver(cfg)? {
        return lift_smooth(&p, &grid, LiftOptions::default());
    }
    let spec = cfg.gaussian_spec(driver_dim(cfg, f)).expect("Gaussian driver");
    lift_gaussian(&spec, &grid)
}

fn gaussian_sample(cfg: &ExperimentConfig, f: &FieldsConfig) -> Result<GaussianSample> {
    let spec = cfg
        .gaussian_spec(driver_dim(cfg, f))
        .ok_or_else(|| Error::Config("this scenario needs a brownian or fbm driver".into()))?;
    sample_path(&spec, &time_grid(cfg, cfg.grid.steps)?)
}

fn signature_json(sig: &Signature2) -> serde_json::Value {
    json!({ "level1": sig.level1, "level2": sig.level2 })
}

fn driver_audit(cfg: &ExperimentConfig, f: &FieldsConfig, res: &mut Residuals) -> Result<GeometricRoughPath> {
    let path = build_driver(cfg, f, cfg.grid.steps)?;
    if cfg.audit.chen {
        put(res, "driver_chen_residual", chen_residual(&path));
        put(res, "driver_geometricity_residual", geometricity_residual(&path));
    }
    Ok(path)
}

fn lift(cfg: &ExperimentConfig, f: &FieldsConfig, out: &mut Artifacts, res: &mut Residuals) -> Result<()> {
    let path = driver_audit(cfg, f, res)?;
    let (hz, hzz) = path.holder_estimate();
    put(res, "alpha", path.alpha());
    put(res, "holder_level1", hz);
    put(res, "holder_level2", hzz);
    res.insert("signature".into(), signature_json(&path.signature(0, path.intervals())));
    out.csv("rough_path_level1.csv", || io::rough_path_level1_csv(&path))?;
    out.csv("rough_path_level2.csv", || io::rough_path_level2_csv(&path))?;
    Ok(())
}

struct RdeSetup {
    family: VectorFieldFamily,
    particles: Vec<Vec<f64>>,
}

fn rde_setup(f: &FieldsConfig) -> Result<RdeSetup> {
    let rough = f
        .rough
        .as_ref()
        .ok_or_else(|| Error::Config("the rde scenario needs fields.rough".into()))?;
    if rough.is_empty() {
        return Err(Error::Config("fields.rough is empty".into()));
    }
    let d = rough[0].len();
    let mut list: Vec<Arc<dyn VectorField>> = Vec::new();
    for (k, comps) in rough.iter().enumerate() {
        if comps.len() != d {
            return Err(Error::Config(format!(
                "rough field {k} has {} components, field 0 has {d}",
                comps.len()
            )));
        }
        list.push(Arc::new(ExprField::parse(comps)?));
    }
    let mut family = VectorFieldFamily::new(d, list)?;
    if let Some(drift) = &f.drift {
        let field: Arc<dyn TimeVectorField> = Arc::new(ExprTimeField::parse(drift)?);
        family = family.with_drift(field)?;
    }
    let particles = f.particles.clone().unwrap_or_else(|| vec![vec![0.0; d]]);
    if let Some(p) = particles.iter().find(|p| p.len() != d) {
        return Err(Error::Config(format!("particle {p:?} does not have {d} coordinates")));
    }
    Ok(RdeSetup { family, particles })
}

fn solve_rde(cfg: &ExperimentConfig, setup: &RdeSetup, path: &GeometricRoughPath) -> Result<Vec<f64>> {
    let flow = solve_flow(&setup.family, path, &setup.particles, &cfg.solver.step_options())?;
    let last = path.grid().len() - 1;
    Ok((0..flow.particles()).flat_map(|m| flow.position(m, last).to_vec()).collect())
}

fn rde(cfg: &ExperimentConfig, f: &FieldsConfig, out: &mut Artifacts, res: &mut Residuals) -> Result<()> {
    let setup = rde_setup(f)?;
    let path = driver_audit(cfg, f, res)?;
    let flow = solve_flow(&setup.family, &path, &setup.particles, &cfg.solver.step_options())?;
    let last = path.grid().len() - 1;
    let finals: Vec<Vec<f64>> = (0..flow.particles()).map(|m| flow.position(m, last).to_vec()).collect();
    put(res, "final_positions", finals);
    put(res, "jacobian_self_check", setup.family.jacobian_self_check(&setup.particles));
    out.csv("trajectories.csv", || io::trajectories_csv(&flow))?;
    Ok(())
}

fn snapshot_indices(steps: usize, count: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..=count).map(|j| j * steps / count).collect();
    idx.dedup();
    idx
}

fn sample_1d(s: &Spectral1D, src: &str) -> Result<Vec<f64>> {
    let e = parse_scalar(src, 1)?;
    Ok(s.nodes().iter().map(|&x| e.eval(&[x])).collect())
}

fn sample_2d(s: &Spectral2D, src: &str) -> Result<Vec<f64>> {
    let e = parse_scalar(src, 2)?;
    Ok(s.sample(|x, y| e.eval(&[x, y])))
}

fn initial_expr(f: &FieldsConfig) -> Result<&str> {
    f.initial
        .as_deref()
        .ok_or_else(|| Error::Config("fields.initial (or a preset providing it) is required".into()))
}

fn rough_fields_1d(s: &Spectral1D, f: &FieldsConfig, k: usize) -> Result<RoughFields1D> {
    if f.stream.is_some() {
        return Err(Error::Config("stream functions apply to 2D scenarios only".into()));
    }
    let values = match &f.rough {
        Some(r) => r
            .iter()
            .map(|comps| match comps.as_slice() {
                [one] => sample_1d(s, one),
                _ => Err(Error::Config(format!("1D rough fields take one component, got {}", comps.len()))),
            })
            .collect::<Result<Vec<_>>>()?,
        None => vec![vec![0.0; s.n()]; k],
    };
    RoughFields1D::new(s, values)
}

fn rough_fields_2d(s: &Spectral2D, f: &FieldsConfig, k: usize) -> Result<RoughFields2D> {
    if let Some(psis) = &f.stream {
        let psis = psis.iter().map(|p| sample_2d(s, p)).collect::<Result<Vec<_>>>()?;
        return RoughFields2D::from_stream_functions(s, &psis);
    }
    match &f.rough {
        Some(r) => {
            let comps = r
                .iter()
                .map(|c| match c.as_slice() {
                    [a, b] => Ok((sample_2d(s, a)?, sample_2d(s, b)?)),
                    _ => Err(Error::Config(format!("2D rough fields take two components, got {}", c.len()))),
                })
                .collect::<Result<Vec<_>>>()?;
            RoughFields2D::new(s, comps)
        }
        None => RoughFields2D::constant(s, &vec![[0.0, 0.0]; k]),
    }
}

enum OneD {
    Burgers(Burgers1D),
    CamassaHolm(CamassaHolm1D),
}

fn one_d_model(scenario: Scenario, cfg: &ExperimentConfig, f: &FieldsConfig, k: usize) -> Result<(OneD, Vec<f64>)> {
    let n = cfg.grid.n.unwrap_or(DEFAULT_N_1D);
    let s = Spectral1D::new(n)?;
    let u0 = sample_1d(&s, initial_expr(f)?)?;
    let fields = rough_fields_1d(&s, f, k)?;
    let model = match scenario {
        Scenario::CamassaHolm => OneD::CamassaHolm(CamassaHolm1D::new(n, fields, f.alpha_ch.unwrap_or(1.0))?),
        _ => OneD::Burgers(Burgers1D::new(n, fields)?),
    };
    Ok((model, u0))
}

fn integrate_1d<F: FnMut(usize, f64, &[f64])>(
    model: &OneD,
    u0: &[f64],
    path: &GeometricRoughPath,
    cfg: &ExperimentConfig,
    observe: F,
) -> Result<Vec<f64>> {
    let opts = cfg.solver.pde_options();
    match model {
        OneD::Burgers(m) => integrate_rough_pde(m, u0, path, &opts, observe),
        OneD::CamassaHolm(m) => integrate_rough_pde(m, u0, path, &opts, observe),
    }
}

fn one_d(scenario: Scenario, cfg: &ExperimentConfig, f: &FieldsConfig, out: &mut Artifacts, res: &mut Residuals) -> Result<()> {
    let path = driver_audit(cfg, f, res)?;
    let (model, u0) = one_d_model(scenario, cfg, f, path.dim())?;
    let keep = snapshot_indices(path.intervals(), cfg.solver.snapshots);
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut series = InvariantSeries::new(&["energy", "mean"]);
    let mut push_err = Ok(());
    let final_state = integrate_1d(&model, &u0, &path, cfg, |i, t, u| {
        let (e, m) = energy_and_mean(u);
        if let Err(err) = series.push(t, &[e, m]) {
            push_err = Err(err);
        }
        if keep.contains(&i) {
            times.push(t);
            states.push(u.to_vec());
        }
    })?;
    push_err?;
    let spectral = match &model {
        OneD::Burgers(m) => &m.spectral,
        OneD::CamassaHolm(m) => &m.spectral,
    };
    let n = spectral.n();
    let nodes = spectral.nodes();
    put(res, "max_abs_final", final_state.iter().fold(0.0f64, |a, v| a.max(v.abs())));
    put(res, "tail_fraction_final", spectral.tail_fraction(&final_state));
    if cfg.audit.invariants {
        for name in ["energy", "mean"] {
            if let Some(e) = series.audit(name, cfg.audit.tolerance) {
                put(res, &format!("{name}_relative_drift"), e.relative_drift);
            }
        }
    }
    if let (OneD::CamassaHolm(m), Some(a)) = (&model, f.alpha_ch) {
        if a == 0.0 {
            let burgers = Burgers1D::new(n, m.fields.clone())?;
            let b = integrate_rough_pde(&burgers, &u0, &path, &cfg.solver.pde_options(), |_, _, _| {})?;
            let diff = b.iter().zip(&final_state).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            put(res, "burgers_max_difference", diff);
        }
    }
    out.csv("snapshots.csv", || io::snapshots_1d_csv(&times, &nodes, &states))?;
    let header = DumpHeader::new(vec![n], times.clone(), seed_of(cfg));
    out.binary("snapshots.bin", || io::snapshot_dump(&header, &states))?;
    if cfg.output.binary {
        out.json("snapshots.json", &header)?;
    }
    out.csv("series.csv", || series.to_csv())?;
    Ok(())
}

fn seed_of(cfg: &ExperimentConfig) -> Option<u64> {
    (cfg.driver.kind != DriverKind::Analytic).then(|| cfg.driver_seed())
}

fn euler(cfg: &ExperimentConfig, f: &FieldsConfig, out: &mut Artifacts, res: &mut Residuals, full_audit: bool) -> Result<()> {
    let path = if full_audit {
        build_driver(cfg, f, cfg.grid.steps)?
    } else {
        driver_audit(cfg, f, res)?
    };
    let n = cfg.grid.n.unwrap_or(DEFAULT_N_2D);
    let s = Spectral2D::new(n)?;
    let w0 = sample_2d(&s, initial_expr(f)?)?;
    let fields = rough_fields_2d(&s, f, path.dim())?;
    let model = Euler2D::new(n, fields)?;
    let kelvin = cfg.audit.kelvin || full_audit;
    let keep = snapshot_indices(path.intervals(), cfg.solver.snapshots);
    let mut times = Vec::new();
    let mut snaps = Vec::new();
    let mut all = Vec::new();
    let mut series = InvariantSeries::euler();
    let mut push_err = Ok(());
    integrate_rough_pde(&model, &w0, &path, &cfg.solver.pde_options(), |i, t, w| {
        if let Err(e) = series.push_euler(&model.spectral, t, w) {
            push_err = Err(e);
        }
        if keep.contains(&i) {
            times.push(t);
            snaps.push(w.to_vec());
        }
        if kelvin {
            all.push(w.to_vec());
        }
    })?;
    push_err?;

    let mut report = AuditReport::default();
    if cfg.audit.invariants || full_audit {
        for name in ["enstrophy", "casimir4", "mean_omega"] {
            if let Some(e) = series.audit(name, cfg.audit.tolerance) {
                report.insert(name, e);
            }
        }
    }
    if kelvin {
        let lp = MaterialLoop::circle(cfg.audit.kelvin_center, cfg.audit.kelvin_radius, cfg.audit.kelvin_vertices)?;
        let circ = kelvin_circulations(&model.spectral, &model.fields, &all, &path, &lp, &cfg.solver.step_options())?;
        report.insert("kelvin_circulation", AuditEntry::from_values(&circ, cfg.audit.kelvin_tolerance));
        out.csv("circulation.csv", || {
            let mut text = String::from("t,circulation\n");
            for (t, c) in path.grid().times().iter().zip(&circ) {
                text.push_str(&format!("{},{}\n", io::fmt_f64(*t), io::fmt_f64(*c)));
            }
            text
        })?;
    }
    for (name, e) in &report.0 {
        put(res, &format!("{name}_relative_drift"), e.relative_drift);
    }
    if !report.0.is_empty() {
        put(res, "audit_pass", report.all_pass());
        out.write("audit.json", report.to_json().as_bytes())?;
    }
    out.csv("invariants.csv", || series.to_csv())?;
    out.csv("snapshots.csv", || io::snapshots_2d_csv(&times, n, &snaps))?;
    let header = DumpHeader::new(vec![n, n], times.clone(), seed_of(cfg));
    out.binary("snapshots.bin", || io::snapshot_dump(&header, &snaps))?;
    if cfg.output.binary {
        out.json("snapshots.json", &header)?;
    }
    Ok(())
}

fn wong_zakai(cfg: &ExperimentConfig, f: &FieldsConfig, out: &mut Artifacts, res: &mut Residuals) -> Result<()> {
    let sample = gaussian_sample(cfg, f)?;
    let levels = cfg.wong_zakai.levels;
    let strides: Vec<usize> = (1..=levels).rev().map(|l| 1usize << l).collect();
    if sample.grid.intervals() % strides[0] != 0 {
        return Err(Error::Config(format!(
            "{} sample intervals are not divisible by the coarsest stride {}",
            sample.grid.intervals(),
            strides[0]
        )));
    }
    let report = match cfg.wong_zakai.model {
        WongZakaiModel::Rde => {
            let setup = rde_setup(f)?;
            wong_zakai_report(&sample, &strides, |p| solve_rde(cfg, &setup, p))?
        }
        model => {
            let scenario = if model == WongZakaiModel::Burgers {
                Scenario::Burgers
            } else {
                Scenario::CamassaHolm
            };
            let (m, u0) = one_d_model(scenario, cfg, f, sample.dim)?;
            wong_zakai_report(&sample, &strides, |p| integrate_1d(&m, &u0, p, cfg, |_, _, _| {}))?
        }
    };
    put(res, "monotone", report.monotone);
    put(res, "successive", &report.successive);
    put(res, "corrupted_to_reference", report.corrupted_to_reference);
    out.json("wong_zakai.json", &report)?;
    Ok(())
}

/// Errors of a quantity computed on dyadically refined time grids.
#[derive(Debug, Clone, Serialize)]
pub struct RefinementTable {
    pub steps: Vec<usize>,
    pub mesh: Vec<f64>,
    /// Sup-norm distance to the reference solution at each level.
    pub errors: Vec<f64>,
    /// Least-squares slope of `log error` against `log mesh`.
    pub order: f64,
    pub r_squared: f64,
}

impl RefinementTable {
    pub fn to_csv(&self) -> String {
        let mut text = String::from("steps,mesh,error\n");
        for ((s, h), e) in self.steps.iter().zip(&self.mesh).zip(&self.errors) {
            text.push_str(&format!("{s},{},{}\n", io::fmt_f64(*h), io::fmt_f64(*e)));
        }
        text
    }
}

/// Slope and coefficient of determination of the least-squares line.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = ly.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, r2)
}

/// Solve on `steps · 2^ℓ` intervals for `ℓ = 0..levels` and compare each
/// level with a reference on `steps · 2^levels` intervals. Gaussian drivers
/// are sampled once on the finest grid and coarsened, so every level sees
/// the same realization. Levels run in parallel.
pub fn refinement_study(cfg: &ExperimentConfig, levels: usize) -> Result<RefinementTable> {
    cfg.validate()?;
    if levels < 3 {
        return Err(Error::Config(format!("a refinement study needs at least 3 levels, got {levels}")));
    }
    let f = resolve(&cfg.fields)?;
    let scenario = cfg.scenario()?;
    let finest_steps = cfg.grid.steps << levels;
    let finest = build_driver(cfg, &f, finest_steps)?;
    let steps: Vec<usize> = (0..=levels).map(|l| cfg.grid.steps << l).collect();
    let drivers = steps
        .iter()
        .map(|&st| {
            if st == finest_steps {
                Ok(finest.clone())
            } else {
                finest.coarsen(&time_grid(cfg, st)?)
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let solve: Box<dyn Fn(&GeometricRoughPath) -> Result<Vec<f64>> + Sync + '_> = match scenario {
        // Piecewise-linear lift through the level's samples.
        Scenario::Lift => Box::new(|p: &GeometricRoughPath| {
            let pl = lift_piecewise_linear(p.grid(), p.dim(), p.values().to_vec(), p.alpha())?;
            let sig = pl.signature(0, pl.intervals());
            Ok(sig.level1.into_iter().chain(sig.level2).collect())
        }),
        Scenario::Rde => {
            let setup = rde_setup(&f)?;
            Box::new(move |p: &GeometricRoughPath| solve_rde(cfg, &setup, p))
        }
        Scenario::Burgers | Scenario::CamassaHolm => {
            let (m, u0) = one_d_model(scenario, cfg, &f, finest.dim())?;
            Box::new(move |p: &GeometricRoughPath| integrate_1d(&m, &u0, p, cfg, |_, _, _| {}))
        }
        Scenario::Euler2d => {
            let n = cfg.grid.n.unwrap_or(DEFAULT_N_2D);
            let s = Spectral2D::new(n)?;
            let w0 = sample_2d(&s, initial_expr(&f)?)?;
            let model = Euler2D::new(n, rough_fields_2d(&s, &f, finest.dim())?)?;
            Box::new(move |p: &GeometricRoughPath| {
                integrate_rough_pde(&model, &w0, p, &cfg.solver.pde_options(), |_, _, _| {})
            })
        }
        other => {
            return Err(Error::Config(format!("no refinement study is defined for the {other} scenario")));
        }
    };
    let solutions = drivers.par_iter().map(|p| solve(p)).collect::<Result<Vec<_>>>()?;
    let reference = match (scenario, analytic_driver(cfg)?) {
        (Scenario::Lift, Some(_)) => {
            let sig = finest.signature(0, finest.intervals());
            sig.level1.into_iter().chain(sig.level2).collect()
        }
        _ => solutions[levels].clone(),
    };
    let errors: Vec<f64> = solutions[..levels]
        .iter()
        .map(|s| s.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .collect();
    let mesh: Vec<f64> = steps[..levels].iter().map(|&st| cfg.grid.horizon / st as f64).collect();
    let (order, r_squared) = loglog_fit(&mesh, &errors);
    Ok(RefinementTable {
        steps: steps[..levels].to_vec(),
        mesh,
        errors,
        order,
        r_squared,
    })
}

/// Run a refinement study and add its table to the run's artifacts.
pub(crate) fn record_refinement(cfg: &ExperimentConfig, levels: usize, out: &mut Artifacts, res: &mut Residuals) -> Result<()> {
    let table = refinement_study(cfg, levels)?;
    put(res, "refinement_order", table.order);
    put(res, "refinement_r_squared", table.r_squared);
    out.csv("refinement.csv", || table.to_csv())?;
    Ok(())
}
