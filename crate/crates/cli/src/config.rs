//! Layered run and sweep settings.
//!
//! A settings file is either `key = value` lines with `#` comments or a flat
//! JSON object (so a written summary can be fed back in). Every source
//! produces the same kind of partial settings; later sources overwrite
//! earlier ones key by key.

use std::path::{Path, PathBuf};

use dispersive_eo::dynamics::{coherent_truncation, matched_decay_rate};
use dispersive_eo::sweep::SweepSpec;
use dispersive_eo::{InitialAtoms, InputKind, ModelParams};
use num_complex::Complex64 as C64;
use serde_json::Value;

use crate::error::{CliError, Result};

pub const WORKERS_ENV: &str = "DISPERSIVE_EO_WORKERS";

/// Keys written into a summary that carry results rather than inputs.
const RESULT_KEYS: [&str; 5] = [
    "steps",
    "f_average",
    "p_total",
    "truncated_tail_bound",
    "max_hermiticity_drift",
];

/// Parses an angle: a number, `pi`, or `pi/<number>`.
pub fn parse_angle(s: &str) -> std::result::Result<f64, String> {
    let t = s.trim();
    if t == "pi" {
        return Ok(std::f64::consts::PI);
    }
    if let Some(den) = t.strip_prefix("pi/") {
        let d: f64 = den.trim().parse().map_err(|_| format!("bad angle '{s}'"))?;
        return Ok(std::f64::consts::PI / d);
    }
    t.parse().map_err(|_| format!("bad angle '{s}' (expected a number, pi or pi/N)"))
}

/// Parses `m:probability`.
pub fn parse_multiplicity(s: &str) -> std::result::Result<(u32, f64), String> {
    let (m, p) = s
        .split_once(':')
        .ok_or_else(|| format!("expected m:probability, got '{s}'"))?;
    let m = m.trim().parse().map_err(|_| format!("bad photon number in '{s}'"))?;
    let p = p.trim().parse().map_err(|_| format!("bad probability in '{s}'"))?;
    Ok((m, p))
}

/// Parses comma-separated amplitudes, each `re` or `re:im`.
pub fn parse_amplitudes(s: &str) -> Result<Vec<C64>> {
    s.split(',')
        .map(|tok| {
            let tok = tok.trim();
            let (re, im) = tok.split_once(':').unwrap_or((tok, "0"));
            match (re.trim().parse(), im.trim().parse()) {
                (Ok(re), Ok(im)) => Ok(C64::new(re, im)),
                _ => Err(CliError::config(format!("bad amplitude '{tok}'"))),
            }
        })
        .collect()
}

fn parse_number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| CliError::config(format!("{key}: cannot parse '{value}'")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse_number(key, v)).collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(CliError::config(format!("{key}: expected true or false, got '{other}'"))),
    }
}

fn parse_input(value: &str) -> Result<String> {
    match value.trim() {
        "single" | "single_photon" => Ok("single_photon".into()),
        "coherent" => Ok("coherent".into()),
        other => Err(CliError::config(format!("unknown input kind '{other}'"))),
    }
}

/// `(line, key, value)` triples from `key = value` text.
fn key_value_pairs(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("line {}: expected key = value", i + 1)))?;
        out.push((i + 1, k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn json_scalar(key: &str, v: &Value) -> Result<String> {
    match v {
        Value::Number(n) => Ok(n.to_string()),
        Value::String(s) => Ok(s.clone()),
        Value::Bool(b) => Ok(b.to_string()),
        _ => Err(CliError::config(format!("{key}: unsupported JSON value {v}"))),
    }
}

/// Flattens a JSON object into the same pairs as the `key = value` form.
/// Nulls are dropped; `[re, im]` pairs become `re:im`.
fn json_pairs(text: &str) -> Result<Vec<(usize, String, String)>> {
    let map: serde_json::Map<String, Value> = serde_json::from_str(text)
        .map_err(|e| CliError::config(format!("bad JSON settings: {e}")))?;
    let mut out = Vec::new();
    for (key, v) in map {
        let value = match &v {
            Value::Null => continue,
            Value::Array(items) => items
                .iter()
                .map(|item| match item {
                    Value::Array(pair) if pair.len() == 2 => Ok(format!(
                        "{}:{}",
                        json_scalar(&key, &pair[0])?,
                        json_scalar(&key, &pair[1])?
                    )),
                    other => json_scalar(&key, other),
                })
                .collect::<Result<Vec<_>>>()?
                .join(","),
            other => json_scalar(&key, other)?,
        };
        out.push((0, key, value));
    }
    Ok(out)
}

fn settings_pairs(text: &str) -> Result<Vec<(usize, String, String)>> {
    if text.trim_start().starts_with('{') {
        json_pairs(text)
    } else {
        key_value_pairs(text)
    }
}

fn read_settings(path: &Path) -> Result<Vec<(usize, String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    settings_pairs(&text)
}

fn with_line(line: usize, err: CliError) -> CliError {
    match err {
        CliError::Config(msg) if line > 0 => CliError::Config(format!("line {line}: {msg}")),
        other => other,
    }
}

/// Physics settings common to single runs and sweeps.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelSettings {
    pub g: Option<f64>,
    pub lambda_deph: Option<f64>,
    pub input: Option<String>,
    pub alpha: Option<f64>,
    pub n_max: Option<usize>,
    pub initial_atoms: Option<String>,
    pub atom_amplitudes: Option<Vec<C64>>,
    pub dt: Option<f64>,
    pub t_max: Option<f64>,
}

impl ModelSettings {
    /// Returns `false` if the key is not a model key.
    fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "g" => self.g = Some(parse_number(key, value)?),
            "lambda" | "lambda_deph" => self.lambda_deph = Some(parse_number(key, value)?),
            "input" | "input_kind" => self.input = Some(parse_input(value)?),
            "alpha" => self.alpha = Some(parse_number(key, value)?),
            "n_max" => self.n_max = Some(parse_number(key, value)?),
            "initial_atoms" => self.initial_atoms = Some(value.trim().to_string()),
            "atom_amplitudes" => self.atom_amplitudes = Some(parse_amplitudes(value)?),
            "dt" => self.dt = Some(parse_number(key, value)?),
            "t_max" => self.t_max = Some(parse_number(key, value)?),
            _ => return Ok(false),
        }
        Ok(true)
    }

    fn overlay(&mut self, top: &ModelSettings) {
        macro_rules! take {
            ($($f:ident),*) => { $( if top.$f.is_some() { self.$f = top.$f.clone(); } )* };
        }
        take!(g, lambda_deph, input, alpha, n_max, dt, t_max);
        if top.initial_atoms.is_some() || top.atom_amplitudes.is_some() {
            self.initial_atoms = top.initial_atoms.clone();
            self.atom_amplitudes = top.atom_amplitudes.clone();
        }
    }

    fn input_kind(&self) -> Result<InputKind> {
        match (self.input.as_deref().unwrap_or("single_photon"), self.alpha) {
            ("single_photon", None) => Ok(InputKind::SinglePhoton),
            ("single_photon", Some(_)) => Err(CliError::config(
                "alpha is only meaningful with coherent input",
            )),
            ("coherent", Some(alpha)) => Ok(InputKind::Coherent { alpha }),
            ("coherent", None) => Err(CliError::config("coherent input requires alpha")),
            (other, _) => Err(CliError::config(format!("unknown input kind '{other}'"))),
        }
    }

    fn n_max(&self, input: InputKind) -> usize {
        match (self.n_max, input) {
            (Some(n), _) => n,
            (None, InputKind::SinglePhoton) => 1,
            (None, InputKind::Coherent { alpha }) => coherent_truncation(alpha),
        }
    }

    fn atoms(&self) -> Result<InitialAtoms> {
        match (self.initial_atoms.as_deref(), &self.atom_amplitudes) {
            (None, None) => Ok(InitialAtoms::PlusPlus),
            (None | Some("custom"), Some(amps)) => Ok(InitialAtoms::Custom(amps.clone())),
            (Some(name), None) => Ok(InitialAtoms::from_name(name)?),
            (Some(name), Some(_)) => Err(CliError::config(format!(
                "atom amplitudes conflict with initial_atoms = {name}"
            ))),
        }
    }

    fn check_integration(&self) -> Result<()> {
        for (name, v) in [("dt", self.dt), ("t_max", self.t_max)] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(CliError::config(format!("{name} must be positive, got {v}")));
                }
            }
        }
        Ok(())
    }
}

/// Partial settings for `run`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSettings {
    pub model: ModelSettings,
    pub delta: Option<f64>,
    pub gamma_cav: Option<f64>,
    pub gamma_norm: Option<f64>,
    pub output_dir: Option<PathBuf>,
    pub emit_trajectory: Option<bool>,
    pub record_stride: Option<usize>,
}

/// Fully resolved `run` configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams,
    pub dt: Option<f64>,
    pub t_max: Option<f64>,
    pub output_dir: PathBuf,
    pub emit_trajectory: bool,
    pub record_stride: usize,
}

impl RunSettings {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if self.model.set(key, value)? {
            return Ok(());
        }
        match key {
            "delta" => self.delta = Some(parse_number(key, value)?),
            "gamma" | "gamma_cav" => self.gamma_cav = Some(parse_number(key, value)?),
            "gamma_norm" => self.gamma_norm = Some(parse_number(key, value)?),
            "output_dir" => self.output_dir = Some(PathBuf::from(value.trim())),
            "emit_trajectory" => self.emit_trajectory = Some(parse_bool(key, value)?),
            "record_stride" => self.record_stride = Some(parse_number(key, value)?),
            k if RESULT_KEYS.contains(&k) => {}
            other => return Err(CliError::config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_pairs(settings_pairs(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_pairs(read_settings(path)?)
    }

    fn from_pairs(pairs: Vec<(usize, String, String)>) -> Result<Self> {
        let mut s = RunSettings::default();
        for (line, k, v) in pairs {
            s.set(&k, &v).map_err(|e| with_line(line, e))?;
        }
        Ok(s)
    }

    /// Values from `top` replace those here. Either decay key in `top`
    /// replaces both decay keys here.
    pub fn overlay(mut self, top: &RunSettings) -> Self {
        self.model.overlay(&top.model);
        if top.gamma_cav.is_some() || top.gamma_norm.is_some() {
            self.gamma_cav = top.gamma_cav;
            self.gamma_norm = top.gamma_norm;
        }
        macro_rules! take {
            ($($f:ident),*) => { $( if top.$f.is_some() { self.$f = top.$f.clone(); } )* };
        }
        take!(delta, output_dir, emit_trajectory, record_stride);
        self
    }

    /// Fills defaults: single photon, `delta = 20`, matched decay,
    /// `lambda = 0.1`, `g = 1`, `|+>|+>` atoms.
    pub fn resolve(&self) -> Result<RunConfig> {
        let m = &self.model;
        let g = m.g.unwrap_or(1.0);
        let delta = self.delta.unwrap_or(20.0);
        let gamma_cav = match (self.gamma_cav, self.gamma_norm) {
            (Some(gc), _) => gc,
            (None, gn) => gn.unwrap_or(1.0) * matched_decay_rate(g, delta),
        };
        let input = m.input_kind()?;
        let params = ModelParams {
            g,
            delta,
            gamma_cav,
            lambda_deph: m.lambda_deph.unwrap_or(0.1),
            n_max: m.n_max(input),
            input,
            initial_atoms: m.atoms()?,
        };
        params.validate()?;
        m.check_integration()?;
        let emit_trajectory = self.emit_trajectory.unwrap_or(false);
        let record_stride = self.record_stride.unwrap_or(1);
        if emit_trajectory && record_stride == 0 {
            return Err(CliError::config("record_stride must be at least 1"));
        }
        Ok(RunConfig {
            params,
            dt: m.dt,
            t_max: m.t_max,
            output_dir: self.output_dir.clone().unwrap_or_else(|| PathBuf::from(".")),
            emit_trajectory,
            record_stride,
        })
    }
}

/// Partial settings for `sweep`. Unset grids fall back to the default scan.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepSettings {
    pub model: ModelSettings,
    pub deltas: Option<Vec<f64>>,
    pub gamma_norms: Option<Vec<f64>>,
    pub workers: Option<usize>,
}

impl SweepSettings {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if self.model.set(key, value)? {
            return Ok(());
        }
        match key {
            "deltas" => self.deltas = Some(parse_list(key, value)?),
            "gamma_norms" | "gamma_norm_grid" => self.gamma_norms = Some(parse_list(key, value)?),
            "workers" => self.workers = Some(parse_number(key, value)?),
            other => return Err(CliError::config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut s = SweepSettings::default();
        for (line, k, v) in settings_pairs(text)? {
            s.set(&k, &v).map_err(|e| with_line(line, e))?;
        }
        Ok(s)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_text(&text)
    }

    /// Worker count precedence: `flag`, then the file, then the environment.
    pub fn resolve(&self, flag_workers: Option<usize>) -> Result<SweepSpec> {
        let defaults = SweepSpec::default();
        let m = &self.model;
        let input = m.input_kind()?;
        let workers = match flag_workers.or(self.workers) {
            Some(n) => Some(n),
            None => match std::env::var(WORKERS_ENV) {
                Ok(v) => Some(parse_number(WORKERS_ENV, &v)?),
                Err(_) => None,
            },
        };
        let spec = SweepSpec {
            deltas: self.deltas.clone().unwrap_or(defaults.deltas),
            gamma_norm_grid: self.gamma_norms.clone().unwrap_or(defaults.gamma_norm_grid),
            lambda_deph: m.lambda_deph.unwrap_or(defaults.lambda_deph),
            g: m.g.unwrap_or(defaults.g),
            input,
            n_max: m.n_max,
            initial_atoms: m.atoms()?,
            dt: m.dt,
            t_max: m.t_max,
            workers,
        };
        spec.validate()?;
        m.check_integration()?;
        Ok(spec)
    }
}
