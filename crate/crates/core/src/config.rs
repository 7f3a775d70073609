//! Run configuration read from a TOML file.
//!
//! Every quantity is in SI units. Paths inside the file are resolved relative
//! to the directory containing it.

// field names mirror the unit-suffixed keys of the file
#![allow(non_snake_case)]

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::domain::{build_uniform_partition, MaterialParams, ReferenceScales, SurfaceCoefficient};
use crate::error::{Error, Result};
use crate::forward::SolverSettings;
use crate::inference::{GaussianPrior, MHConfig};
use crate::synthetic::DiurnalForcing;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub geometry: Geometry,
    pub material: Material,
    pub surface_h: SurfaceH,
    #[serde(default)]
    pub boundary: Boundary,
    #[serde(default)]
    pub initial: Option<Initial>,
    #[serde(default)]
    pub reference: Reference,
    #[serde(default)]
    pub priors: Priors,
    pub mcmc: Mcmc,
    #[serde(default)]
    pub smoothness: Smoothness,
    pub solver: Solver,
    #[serde(default)]
    pub data: Option<Data>,
    #[serde(default)]
    pub twin: Option<Twin>,
    #[serde(default)]
    pub output: Output,
    /// Directory the relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    #[serde(rename = "L_m")]
    pub depth: f64,
    #[serde(rename = "t_f_s")]
    pub final_time: f64,
}

/// Material used by `forward` and `synth` (the truth in a twin experiment).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    pub kappa: f64,
    #[serde(rename = "C")]
    pub heat_capacity: f64,
}

/// Piecewise-constant h(t). Either explicit `values` (optionally with
/// `breakpoints_s`, else a uniform partition) or a daily sine
/// `mean + amplitude·sin(2πt/period_s)` sampled at the midpoints of
/// `n_intervals` uniform intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceH {
    pub breakpoints_s: Option<Vec<f64>>,
    pub values: Option<Vec<f64>>,
    pub n_intervals: Option<usize>,
    pub mean: Option<f64>,
    pub amplitude: Option<f64>,
    pub period_s: Option<f64>,
}

/// Boundary data files, or a synthetic diurnal cycle when none are given.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Boundary {
    pub air_temperature: Option<PathBuf>,
    pub net_radiation: Option<PathBuf>,
    pub deep_temperature: Option<PathBuf>,
    pub air_mean_K: Option<f64>,
    pub air_amplitude_K: Option<f64>,
    pub solar_peak_W_m2: Option<f64>,
    pub longwave_loss_W_m2: Option<f64>,
    pub deep_mean_K: Option<f64>,
    pub deep_amplitude_K: Option<f64>,
    pub sample_every_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Initial {
    pub depths_m: Vec<f64>,
    pub values_K: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Reference {
    pub time_s: f64,
    pub temperature_K: f64,
    pub kappa: f64,
    #[serde(rename = "C")]
    pub heat_capacity: f64,
    pub h: f64,
}

impl Default for Reference {
    fn default() -> Self {
        Self {
            time_s: 3600.0,
            temperature_K: 300.0,
            kappa: 2.27,
            heat_capacity: 2.1e6,
            h: 10.0,
        }
    }
}

/// Independent Gaussian priors. The defaults are informative material priors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Priors {
    pub kappa_mean: f64,
    pub kappa_std: f64,
    pub C_mean: f64,
    pub C_std: f64,
    pub h_mean: f64,
    pub h_std: f64,
}

impl Default for Priors {
    fn default() -> Self {
        Self {
            kappa_mean: 2.27,
            kappa_std: 0.1135,
            C_mean: 2.10e6,
            C_std: 0.021e6,
            h_mean: 10.0,
            h_std: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mcmc {
    pub n_states: usize,
    /// Step radius shared by all parameters, as a fraction of the prior mean.
    #[serde(default = "default_omega")]
    pub omega: f64,
    pub omega_kappa: Option<f64>,
    pub omega_C: Option<f64>,
    pub omega_h: Option<f64>,
    pub omega_gamma: Option<f64>,
    pub seed: u64,
    pub burn_in: usize,
    #[serde(default = "one")]
    pub thin: usize,
}

fn default_omega() -> f64 {
    0.02
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Smoothness {
    pub gamma0: f64,
    pub n_intervals: usize,
}

impl Default for Smoothness {
    fn default() -> Self {
        Self {
            gamma0: 2.22,
            n_intervals: 112,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Solver {
    pub nodes: usize,
    pub dt_s: f64,
}

/// Measured temperatures in long format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Data {
    pub measurements: PathBuf,
    pub noise_std_K: f64,
}

/// Synthetic measurements generated from the `[material]` and `[surface_h]` truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Twin {
    pub depths_m: Vec<f64>,
    pub cadence_s: f64,
    #[serde(default = "default_noise")]
    pub noise_std_K: f64,
    pub seed: u64,
}

fn default_noise() -> f64 {
    0.25
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Output {
    /// Spacing of the levels written by `forward`, s.
    pub field_every_s: f64,
    /// Largest lag written by `diagnose`.
    pub max_lag: usize,
}

impl Default for Output {
    fn default() -> Self {
        Self {
            field_every_s: 900.0,
            max_lag: 2000,
        }
    }
}

fn check(key: &str, ok: bool, message: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(key, message))
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    check(key, v.is_finite() && v > 0.0, format!("must be positive, got {v}"))
}

/// Pulls the offending key out of a TOML error message such as
/// "missing field `L_m`".
fn key_of(e: &toml::de::Error) -> String {
    let msg = e.message();
    msg.split('`').nth(1).unwrap_or("<document>").to_string()
}

impl Config {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: Config = toml::from_str(text).map_err(|e| Error::config(key_of(&e), e.message().to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, &base)
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("geometry.L_m", self.geometry.depth)?;
        positive("geometry.t_f_s", self.geometry.final_time)?;
        positive("material.kappa", self.material.kappa)?;
        positive("material.C", self.material.heat_capacity)?;
        self.surface_h()?;
        let r = &self.reference;
        for (k, v) in [
            ("reference.time_s", r.time_s),
            ("reference.temperature_K", r.temperature_K),
            ("reference.kappa", r.kappa),
            ("reference.C", r.heat_capacity),
            ("reference.h", r.h),
        ] {
            positive(k, v)?;
        }
        let p = &self.priors;
        for (k, v) in [
            ("priors.kappa_mean", p.kappa_mean),
            ("priors.kappa_std", p.kappa_std),
            ("priors.C_mean", p.C_mean),
            ("priors.C_std", p.C_std),
            ("priors.h_mean", p.h_mean),
            ("priors.h_std", p.h_std),
        ] {
            positive(k, v)?;
        }
        let m = &self.mcmc;
        check("mcmc.n_states", m.n_states >= 1, "must be at least 1")?;
        check(
            "mcmc.burn_in",
            m.burn_in < m.n_states,
            format!("must be below n_states = {}", m.n_states),
        )?;
        check("mcmc.thin", m.thin >= 1, "must be at least 1")?;
        for (k, v) in [
            ("mcmc.omega", Some(m.omega)),
            ("mcmc.omega_kappa", m.omega_kappa),
            ("mcmc.omega_C", m.omega_C),
            ("mcmc.omega_h", m.omega_h),
            ("mcmc.omega_gamma", m.omega_gamma),
        ] {
            if let Some(v) = v {
                check(k, v.is_finite() && v >= 0.0, format!("must be non-negative, got {v}"))?;
            }
        }
        positive("smoothness.gamma0", self.smoothness.gamma0)?;
        check(
            "smoothness.n_intervals",
            self.smoothness.n_intervals >= 2,
            "must be at least 2",
        )?;
        check("solver.nodes", self.solver.nodes >= 4, "must be at least 4")?;
        positive("solver.dt_s", self.solver.dt_s)?;
        let b = &self.boundary;
        let files = [&b.air_temperature, &b.net_radiation, &b.deep_temperature];
        let given = files.iter().filter(|f| f.is_some()).count();
        check(
            "boundary",
            given == 0 || given == 3,
            "give all of air_temperature, net_radiation, deep_temperature or none",
        )?;
        if let Some(i) = &self.initial {
            check(
                "initial.values_K",
                i.values_K.len() == i.depths_m.len() && i.depths_m.len() >= 2,
                "needs at least two values, one per entry of depths_m",
            )?;
        }
        if let Some(d) = &self.data {
            positive("data.noise_std_K", d.noise_std_K)?;
        }
        if let Some(t) = &self.twin {
            check("twin.depths_m", !t.depths_m.is_empty(), "needs at least one sensor")?;
            positive("twin.cadence_s", t.cadence_s)?;
            check(
                "twin.noise_std_K",
                t.noise_std_K.is_finite() && t.noise_std_K >= 0.0,
                "must be non-negative",
            )?;
        }
        positive("output.field_every_s", self.output.field_every_s)?;
        Ok(())
    }

    pub fn material(&self) -> Result<MaterialParams> {
        MaterialParams::new(self.material.kappa, self.material.heat_capacity)
    }

    pub fn reference_scales(&self) -> Result<ReferenceScales> {
        let r = &self.reference;
        ReferenceScales::new(r.time_s, r.temperature_K, r.kappa, r.heat_capacity, r.h)
    }

    pub fn solver_settings(&self) -> SolverSettings {
        SolverSettings::new(self.solver.nodes, self.solver.dt_s)
    }

    /// The `[surface_h]` coefficient.
    pub fn surface_h(&self) -> Result<SurfaceCoefficient> {
        let s = &self.surface_h;
        let tf = self.geometry.final_time;
        let wrap = |e: Error| Error::config("surface_h", e.to_string());
        match (&s.values, s.mean) {
            (Some(values), None) => {
                let bp = match &s.breakpoints_s {
                    Some(bp) => bp.clone(),
                    None => build_uniform_partition(tf, values.len()).map_err(wrap)?,
                };
                check(
                    "surface_h.breakpoints_s",
                    bp.last().is_some_and(|&t| (t - tf).abs() <= 1e-9 * tf),
                    format!("must end at t_f_s = {tf}"),
                )?;
                SurfaceCoefficient::new(bp, values.clone()).map_err(wrap)
            }
            (None, Some(mean)) => {
                let n = s
                    .n_intervals
                    .ok_or_else(|| Error::config("surface_h.n_intervals", "required with `mean`"))?;
                let amplitude = s.amplitude.unwrap_or(0.0);
                let period = s.period_s.unwrap_or(86_400.0);
                positive("surface_h.period_s", period)?;
                let bp = build_uniform_partition(tf, n).map_err(wrap)?;
                let values = bp
                    .windows(2)
                    .map(|w| mean + amplitude * (2.0 * PI * 0.5 * (w[0] + w[1]) / period).sin())
                    .collect();
                SurfaceCoefficient::new(bp, values).map_err(wrap)
            }
            _ => Err(Error::config("surface_h", "give exactly one of `values` or `mean`")),
        }
    }

    /// Synthetic forcing with any `[boundary]` overrides applied.
    pub fn forcing(&self) -> DiurnalForcing {
        let b = &self.boundary;
        let d = DiurnalForcing::default();
        DiurnalForcing {
            air_mean: b.air_mean_K.unwrap_or(d.air_mean),
            air_amplitude: b.air_amplitude_K.unwrap_or(d.air_amplitude),
            solar_peak: b.solar_peak_W_m2.unwrap_or(d.solar_peak),
            longwave_loss: b.longwave_loss_W_m2.unwrap_or(d.longwave_loss),
            deep_mean: b.deep_mean_K.unwrap_or(d.deep_mean),
            deep_amplitude: b.deep_amplitude_K.unwrap_or(d.deep_amplitude),
            sample_every: b.sample_every_s.unwrap_or(d.sample_every),
            ..d
        }
    }

    pub fn has_boundary_files(&self) -> bool {
        self.boundary.air_temperature.is_some()
    }

    /// Gaussian prior on `(κ, C)`.
    pub fn material_prior(&self) -> Result<GaussianPrior> {
        let p = &self.priors;
        GaussianPrior::new(vec![p.kappa_mean, p.C_mean], vec![p.kappa_std, p.C_std], true)
    }

    /// Gaussian prior on `(κ, C, h_1..h_n)`.
    pub fn full_prior(&self, n_intervals: usize) -> Result<GaussianPrior> {
        let p = &self.priors;
        let mut mean = vec![p.kappa_mean, p.C_mean];
        let mut std = vec![p.kappa_std, p.C_std];
        mean.extend(std::iter::repeat_n(p.h_mean, n_intervals));
        std.extend(std::iter::repeat_n(p.h_std, n_intervals));
        GaussianPrior::new(mean, std, true)
    }

    /// Prior means `(κ, C, h…[, γ₀])`, used as proposal scale and starting point.
    pub fn prior_means(&self, n_intervals: usize, hyperparameter: bool) -> Vec<f64> {
        let p = &self.priors;
        let mut v = vec![p.kappa_mean, p.C_mean];
        v.extend(std::iter::repeat_n(p.h_mean, n_intervals));
        if hyperparameter {
            v.push(self.smoothness.gamma0);
        }
        v
    }

    /// Sampler settings for the given layout, with per-role step radii.
    pub fn mh_config(&self, n_intervals: usize, hyperparameter: bool, seed: u64) -> MHConfig {
        let m = &self.mcmc;
        let mut radii = vec![m.omega_kappa.unwrap_or(m.omega), m.omega_C.unwrap_or(m.omega)];
        radii.extend(std::iter::repeat_n(m.omega_h.unwrap_or(m.omega), n_intervals));
        if hyperparameter {
            radii.push(m.omega_gamma.unwrap_or(m.omega));
        }
        MHConfig {
            n_states: m.n_states,
            step_radii: radii,
            seed,
            burn_in: m.burn_in,
            thin: m.thin,
        }
    }
}
