//! Named bundles of fields and initial data.

use crate::error::{Error, Result};

use super::config::FieldsConfig;

pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    build: fn() -> FieldsConfig,
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn nested(v: &[&[&str]]) -> Vec<Vec<String>> {
    v.iter().map(|r| strings(r)).collect()
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "taylor_green",
        summary: "2D vorticity 2 cos x cos y, no rough fields given (zero fields)",
        build: || FieldsConfig {
            initial: Some("2 * cos(x) * cos(y)".into()),
            ..Default::default()
        },
    },
    Preset {
        name: "taylor_green_shift",
        summary: "2 cos x cos y transported by constant fields (0.5, 0) and (0, 0.3)",
        build: || FieldsConfig {
            initial: Some("2 * cos(x) * cos(y)".into()),
            rough: Some(nested(&[&["0.5", "0"], &["0", "0.3"]])),
            ..Default::default()
        },
    },
    Preset {
        name: "euler_generic",
        summary: "band-limited 2D vorticity with two spatially varying divergence-free fields",
        build: || FieldsConfig {
            initial: Some("cos(x) * cos(2 * y) + 0.6 * sin(2 * x + y) - 0.4 * cos(x - 3 * y)".into()),
            stream: Some(strings(&["0.3 * sin(x) * sin(y)", "0.2 * cos(2 * x - y)"])),
            ..Default::default()
        },
    },
    Preset {
        name: "burgers_sine",
        summary: "u0 = sin x with the constant rough field 0.5",
        build: || FieldsConfig {
            initial: Some("sin(x)".into()),
            rough: Some(nested(&[&["0.5"]])),
            ..Default::default()
        },
    },
    Preset {
        name: "burgers_shift",
        summary: "u0 = 0.25 sin x with the constant rough field 1, exact shift of the deterministic flow",
        build: || FieldsConfig {
            initial: Some("0.25 * sin(x)".into()),
            rough: Some(nested(&[&["1"]])),
            ..Default::default()
        },
    },
    Preset {
        name: "ch_alpha0",
        summary: "Camassa-Holm with alpha = 0, u0 = sin x, constant rough field 0.5 (reduces to Burgers)",
        build: || FieldsConfig {
            initial: Some("sin(x)".into()),
            rough: Some(nested(&[&["0.5"]])),
            alpha_ch: Some(0.0),
            ..Default::default()
        },
    },
    Preset {
        name: "levy_area",
        summary: "fields (1, 0, -y/2) and (0, 1, x/2) whose third component accumulates signed area",
        build: || FieldsConfig {
            rough: Some(nested(&[&["1", "0", "-y / 2"], &["0", "1", "x / 2"]])),
            particles: Some(vec![vec![0.0, 0.0, 0.0]]),
            ..Default::default()
        },
    },
    Preset {
        name: "linear_scalar",
        summary: "dY = Y dZ started at 1",
        build: || FieldsConfig {
            rough: Some(nested(&[&["x"]])),
            particles: Some(vec![vec![1.0]]),
            ..Default::default()
        },
    },
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.name).collect()
}

pub fn preset(name: &str) -> Result<FieldsConfig> {
    PRESETS
        .iter()
        .find(|p| p.name == name)
        .map(|p| FieldsConfig {
            preset: Some(name.to_string()),
            ..(p.build)()
        })
        .ok_or_else(|| {
            Error::Config(format!(
                "unknown preset '{name}'; available presets: {}",
                preset_names().join(", ")
            ))
        })
}

/// Fields of `cfg` completed from its preset, if any.
pub fn resolve(cfg: &FieldsConfig) -> Result<FieldsConfig> {
    match &cfg.preset {
        Some(name) => Ok(cfg.clone().over(preset(name)?)),
        None => Ok(cfg.clone()),
    }
}
