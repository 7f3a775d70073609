//! The batch stages behind the command-line tool. Each stage reads a [`Config`]
//! and writes plot-ready files under an output directory.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::diagnostics::{
    autocorrelation_norm, chain_histogram, geweke_relative_difference, integrated_autocorrelation_time,
    residual_report, summarize, PosteriorSummary, ResidualReport, GEWEKE_FIRST, GEWEKE_LAST,
};
use crate::domain::{
    build_uniform_partition, DepthProfile, MeasurementSet, ParameterLayout, ParameterVector, PhysicalProblem,
    SurfaceCoefficient,
};
use crate::error::{Error, Result};
use crate::forward::ForwardModel;
use crate::inference::{run_chains, Chain, DataLikelihood, Posterior, PriorModel, SmoothnessPrior};
use crate::io::{
    generate_twin_data, initial_profile_from_sensors, load_chain, load_measurements, load_series_with,
    moving_average, write_chain, write_measurements, write_series, IngestUnits, TwinSpec,
};
use crate::sensitivity::sensitivities;

/// Prior structure of an estimation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Mode {
    /// Truncated Gaussians on κ, C and each h_i of the `[surface_h]` partition.
    #[default]
    CaseAB,
    /// Gaussians on κ and C, smoothness prior with a Rayleigh hyperprior on a
    /// fine uniform partition of h.
    CaseC,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "caseAB" => Ok(Mode::CaseAB),
            "caseC" => Ok(Mode::CaseC),
            other => Err(format!("unknown mode `{other}` (expected caseAB or caseC)")),
        }
    }
}

/// Command-line options shared by the stages.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides `[mcmc] seed`.
    pub seed: Option<u64>,
    pub chains: usize,
    pub mode: Mode,
    pub units: IngestUnits,
    /// Moving-average window applied to the net radiation, s.
    pub filter_radiation: Option<f64>,
    /// Command line echoed into the manifest.
    pub command: Vec<String>,
}

/// Record of one stage run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: Vec<String>,
    pub stage: String,
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
}

/// Everything a stage needs: the configuration, its problem and forward model.
pub struct Setup {
    pub config: Config,
    pub options: RunOptions,
    pub model: ForwardModel,
    config_hash: String,
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn json_to(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn boundary_problem(cfg: &Config, opts: &RunOptions, data: Option<&MeasurementSet>) -> Result<PhysicalProblem> {
    let depth = cfg.geometry.depth;
    let tf = cfg.geometry.final_time;
    let material = cfg.material()?;
    let mut problem = if cfg.has_boundary_files() {
        let b = &cfg.boundary;
        let load = |p: &Option<PathBuf>, temperature: bool| {
            let p = p.as_ref().expect("validated: all boundary files given");
            load_series_with(&cfg.resolve(p), opts.units, temperature)
        };
        let air = load(&b.air_temperature, true)?;
        let rad = load(&b.net_radiation, false)?;
        let deep = load(&b.deep_temperature, true)?;
        let initial = DepthProfile::new(vec![0.0, depth], vec![air.interpolate(0.0)?, deep.interpolate(0.0)?])?;
        PhysicalProblem::new(depth, tf, material, air, rad, deep, initial)?
    } else {
        cfg.forcing().problem(depth, tf, material)?
    };
    if let Some(window) = opts.filter_radiation {
        problem = problem.with_net_radiation(moving_average(&problem.net_radiation, window)?)?;
    }
    if let Some(init) = &cfg.initial {
        problem.initial_profile = DepthProfile::new(init.depths_m.clone(), init.values_K.clone())?;
    } else if let Some(data) = data {
        let first: Vec<f64> = (0..data.n_sensors()).map(|i| data.get(i, 0)).collect();
        problem.initial_profile = initial_profile_from_sensors(data.depths(), &first, depth)?;
    }
    Ok(problem)
}

impl Setup {
    pub fn new(config: Config, options: RunOptions, config_text: &str) -> Result<Self> {
        let data = match &config.data {
            Some(d) => Some(load_measurements(
                &config.resolve(&d.measurements),
                options.units,
                d.noise_std_K,
            )?),
            None => None,
        };
        let problem = boundary_problem(&config, &options, data.as_ref())?;
        let model = ForwardModel::new(problem, config.reference_scales()?, config.solver_settings())?;
        Ok(Self {
            config_hash: hex(&Sha256::digest(config_text.as_bytes())),
            config,
            options,
            model,
        })
    }

    /// Reads and validates the configuration file, then builds the model.
    pub fn load(path: &Path, options: RunOptions) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let config = Config::from_toml(&text, &base)?;
        Self::new(config, options, &text)
    }

    pub fn seed(&self) -> u64 {
        self.options.seed.unwrap_or(self.config.mcmc.seed)
    }

    fn twin_spec(&self) -> Result<Option<TwinSpec>> {
        let Some(t) = &self.config.twin else {
            return Ok(None);
        };
        Ok(Some(TwinSpec {
            material: self.config.material()?,
            h: self.config.surface_h()?,
            depths: t.depths_m.clone(),
            cadence: t.cadence_s,
            noise_std: t.noise_std_K,
            seed: t.seed,
        }))
    }

    /// Measurements from `[data]`, or generated from `[twin]`.
    pub fn measurements(&self) -> Result<MeasurementSet> {
        if let Some(d) = &self.config.data {
            return load_measurements(&self.config.resolve(&d.measurements), self.options.units, d.noise_std_K);
        }
        match self.twin_spec()? {
            Some(spec) => generate_twin_data(&spec, &self.model),
            None => Err(Error::config("data", "a `[data]` or `[twin]` section is required")),
        }
    }

    /// Sensor depths and observation times without generating noise.
    fn sampling_plan(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        if let Some(spec) = self.twin_spec()? {
            if self.config.data.is_none() {
                let times = spec.observation_times(self.config.geometry.final_time)?;
                return Ok((spec.depths, times));
            }
        }
        let m = self.measurements()?;
        Ok((m.depths().to_vec(), m.times().to_vec()))
    }

    /// Layout, prior and breakpoints of the estimation problem.
    pub fn estimation_problem(&self) -> Result<(ParameterLayout, PriorModel, Vec<f64>)> {
        let cfg = &self.config;
        match self.options.mode {
            Mode::CaseAB => {
                let bp = cfg.surface_h()?.breakpoints().to_vec();
                let n = bp.len() - 1;
                Ok((ParameterLayout::new(n, false), PriorModel::Gaussian(cfg.full_prior(n)?), bp))
            }
            Mode::CaseC => {
                let n = cfg.smoothness.n_intervals;
                let bp = build_uniform_partition(cfg.geometry.final_time, n)?;
                let prior = PriorModel::Smoothness {
                    material: cfg.material_prior()?,
                    smoothness: SmoothnessPrior::new(n, cfg.smoothness.gamma0)?,
                    hyperprior: true,
                };
                Ok((ParameterLayout::new(n, true), prior, bp))
            }
        }
    }

    pub fn posterior(&self, data: MeasurementSet) -> Result<Posterior> {
        let (layout, prior, bp) = self.estimation_problem()?;
        let likelihood = DataLikelihood::new(self.model.clone(), data, bp)?;
        let scale = self.config.prior_means(layout.n_intervals, layout.hyperparameter);
        Posterior::new(layout, prior, Some(likelihood), scale)
    }

    fn manifest(&self, stage: &str, out: &Path, started: (f64, Instant), outputs: &[PathBuf]) -> Result<PathBuf> {
        let path = out.join(format!("manifest_{stage}.json"));
        let manifest = RunManifest {
            command: self.options.command.clone(),
            stage: stage.to_string(),
            config_sha256: self.config_hash.clone(),
            seed: matches!(stage, "estimate").then(|| self.seed()),
            started_unix_s: started.0,
            finished_unix_s: unix_now(),
            wall_time_s: started.1.elapsed().as_secs_f64(),
            outputs: outputs
                .iter()
                .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
                .collect(),
        };
        json_to(&path, &manifest)?;
        Ok(path)
    }

    fn finish(&self, stage: &str, out: &Path, started: (f64, Instant), mut outputs: Vec<PathBuf>) -> Result<Vec<PathBuf>> {
        let manifest = self.manifest(stage, out, started, &outputs)?;
        outputs.push(manifest);
        Ok(outputs)
    }

    /// Temperature field for the `[material]` and `[surface_h]` values, written
    /// every `[output] field_every_s`.
    pub fn forward(&self, out: &Path) -> Result<Vec<PathBuf>> {
        let started = (unix_now(), Instant::now());
        fs::create_dir_all(out)?;
        let material = self.config.material()?;
        let h = self.config.surface_h()?;
        let every = (self.config.output.field_every_s / self.config.solver.dt_s).round().max(1.0) as usize;
        let depth = self.config.geometry.depth;
        let path = out.join("forward_field.csv");
        let mut w = BufWriter::new(File::create(&path)?);
        writeln!(w, "time_s,depth_m,temperature_K")?;
        let mut io_err = None;
        let last = self.model.level_times().len() - 1;
        self.model.march(&material, &h, |n, t, u| {
            if n % every != 0 && n != last {
                return;
            }
            let j_last = u.len() - 1;
            for (j, v) in u.iter().enumerate() {
                let x = if j == j_last { depth } else { depth * j as f64 / j_last as f64 };
                if let Err(e) = writeln!(w, "{t:.16e},{x:.16e},{v:.16e}") {
                    io_err.get_or_insert(e);
                }
            }
        })?;
        if let Some(e) = io_err {
            return Err(e.into());
        }
        w.flush()?;
        drop(w);
        self.finish("forward", out, started, vec![path])
    }

    /// Reduced sensitivities at the sensors for the `[material]` and
    /// `[surface_h]` values, in long format.
    pub fn sensitivity(&self, out: &Path) -> Result<Vec<PathBuf>> {
        let started = (unix_now(), Instant::now());
        fs::create_dir_all(out)?;
        let h = self.config.surface_h()?;
        let params = ParameterVector::pack(self.config.material()?, h.values(), None)?;
        let (depths, times) = self.sampling_plan()?;
        let x = sensitivities(&self.model, &params, h.breakpoints(), &depths, &times, true)?;
        let names = params.layout().names();
        let path = out.join("sensitivity.csv");
        let mut w = BufWriter::new(File::create(&path)?);
        writeln!(w, "parameter,depth_m,time_s,reduced_sensitivity_K")?;
        for (j, name) in names.iter().enumerate() {
            for (i, d) in depths.iter().enumerate() {
                for (n, t) in times.iter().enumerate() {
                    writeln!(w, "{name},{d:.16e},{t:.16e},{:.16e}", x.get(i, j, n))?;
                }
            }
        }
        w.flush()?;
        drop(w);
        self.finish("sensitivity", out, started, vec![path])
    }

    /// Boundary series, measurements and the truth of a twin experiment.
    pub fn synth(&self, out: &Path) -> Result<Vec<PathBuf>> {
        let started = (unix_now(), Instant::now());
        fs::create_dir_all(out)?;
        let data = self.measurements()?;
        let p = self.model.problem();
        let mut outputs = Vec::new();
        for (name, series) in [
            ("air_temperature.csv", &p.air_temperature),
            ("net_radiation.csv", &p.net_radiation),
            ("deep_temperature.csv", &p.deep_temperature),
        ] {
            let path = out.join(name);
            write_series(&path, series)?;
            outputs.push(path);
        }
        let path = out.join("measurements.csv");
        write_measurements(&path, &data)?;
        outputs.push(path);
        let h = self.config.surface_h()?;
        let truth = Truth {
            kappa: p.material.conductivity,
            heat_capacity: p.material.heat_capacity,
            breakpoints_s: h.breakpoints().to_vec(),
            h: h.values().to_vec(),
        };
        let path = out.join("truth.json");
        json_to(&path, &truth)?;
        outputs.push(path);
        self.finish("synth", out, started, outputs)
    }

    /// Runs the sampler and writes one chain per `--chains`, the merged
    /// posterior summary and the residuals at the posterior mean.
    pub fn estimate(&self, out: &Path) -> Result<Vec<PathBuf>> {
        let started = (unix_now(), Instant::now());
        fs::create_dir_all(out)?;
        let data = self.measurements()?;
        let posterior = self.posterior(data.clone())?;
        let layout = posterior.layout();
        let config = self.config.mh_config(layout.n_intervals, layout.hyperparameter, self.seed());
        let initial = self.config.prior_means(layout.n_intervals, layout.hyperparameter);
        let chains = run_chains(&config, &posterior, &initial, layout.names(), self.options.chains.max(1))?;
        let mut outputs = Vec::new();
        for (k, chain) in chains.iter().enumerate() {
            let path = out.join(format!("chain_{k}.csv"));
            write_chain(&path, chain)?;
            outputs.push(path);
        }
        let summary = merged_summary(&chains, config.burn_in)?;
        let path = out.join("summary.json");
        json_to(&path, &summary)?;
        outputs.push(path);
        let path = out.join("measurements.csv");
        write_measurements(&path, &data)?;
        outputs.push(path);
        outputs.extend(self.write_residuals(out, &summary, &data)?);
        self.finish("estimate", out, started, outputs)
    }

    /// Diagnostics of every `chain_*.csv` under `out`.
    pub fn diagnose(&self, out: &Path) -> Result<Vec<PathBuf>> {
        let started = (unix_now(), Instant::now());
        let chains = chain_files(out)?;
        if chains.is_empty() {
            return Err(Error::domain(format!("no chain_*.csv files in {}", out.display())));
        }
        let burn_in = self.config.mcmc.burn_in;
        let mut outputs = Vec::new();
        for (k, path) in &chains {
            let chain = load_chain(path)?;
            outputs.extend(diagnose_chain(&chain, burn_in, self.config.output.max_lag, out, *k)?);
        }
        outputs.extend(self.residuals(out)?);
        self.finish("diagnose", out, started, outputs)
    }

    /// Residuals at the posterior mean stored in `out/summary.json`.
    pub fn residuals(&self, out: &Path) -> Result<Vec<PathBuf>> {
        let path = out.join("summary.json");
        let summary: PosteriorSummary = serde_json::from_reader(File::open(&path)?)?;
        let data = self.measurements()?;
        self.write_residuals(out, &summary, &data)
    }

    /// Residuals stage run on its own, with a manifest.
    pub fn residuals_stage(&self, out: &Path) -> Result<Vec<PathBuf>> {
        let started = (unix_now(), Instant::now());
        let outputs = self.residuals(out)?;
        self.finish("residuals", out, started, outputs)
    }

    fn write_residuals(&self, out: &Path, summary: &PosteriorSummary, data: &MeasurementSet) -> Result<Vec<PathBuf>> {
        let (layout, _, bp) = self.estimation_problem()?;
        if ParameterLayout::from_names(&summary.names)? != layout {
            return Err(Error::domain("summary parameters do not match the run mode"));
        }
        let likelihood = DataLikelihood::new(self.model.clone(), data.clone(), bp)?;
        let predicted = likelihood.predict(&summary.mean)?;
        let report = residual_report(data.depths(), data.times(), data.temperatures(), &predicted, data.noise_std())?;
        let path = out.join("residuals.csv");
        write_residual_csv(&path, &report, data.temperatures(), &predicted)?;
        let json = out.join("residual_report.json");
        json_to(&json, &ResidualStats::from(&report))?;
        Ok(vec![path, json])
    }
}

/// Ground truth written by `synth`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub kappa: f64,
    #[serde(rename = "C")]
    pub heat_capacity: f64,
    pub breakpoints_s: Vec<f64>,
    pub h: Vec<f64>,
}

/// Per-sensor aggregates of a [`ResidualReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualStats {
    pub depths_m: Vec<f64>,
    #[serde(rename = "max_abs_K")]
    pub max_abs: Vec<f64>,
    pub max_relative_percent: Vec<f64>,
    pub within_sigma: f64,
}

impl From<&ResidualReport> for ResidualStats {
    fn from(r: &ResidualReport) -> Self {
        Self {
            depths_m: r.depths.clone(),
            max_abs: r.max_abs.clone(),
            max_relative_percent: r.max_relative_percent.clone(),
            within_sigma: r.within_sigma,
        }
    }
}

fn write_residual_csv(path: &Path, r: &ResidualReport, observed: &[f64], predicted: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "time_s,depth_m,observed_K,predicted_K,residual_K")?;
    let nt = r.times.len();
    for (i, d) in r.depths.iter().enumerate() {
        for (n, t) in r.times.iter().enumerate() {
            let k = i * nt + n;
            writeln!(
                w,
                "{t:.16e},{d:.16e},{:.16e},{:.16e},{:.16e}",
                observed[k], predicted[k], r.residuals[k]
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Pools the post-burn-in states of all chains.
pub fn merged_summary(chains: &[Chain], burn_in: usize) -> Result<PosteriorSummary> {
    let first = chains.first().ok_or_else(|| Error::domain("no chains to summarise"))?;
    if chains.len() == 1 {
        return summarize(first, burn_in);
    }
    let parts = chains.iter().map(|c| summarize(c, burn_in)).collect::<Result<Vec<_>>>()?;
    let d = first.dim();
    let sizes: Vec<f64> = chains.iter().map(|c| (c.len() - burn_in) as f64).collect();
    let total: f64 = sizes.iter().sum();
    let mut mean = vec![0.0; d];
    let mut std = vec![0.0; d];
    for j in 0..d {
        mean[j] = parts.iter().zip(&sizes).map(|(s, n)| n * s.mean[j]).sum::<f64>() / total;
        // pooled sum of squares about the overall mean
        let ss: f64 = parts
            .iter()
            .zip(&sizes)
            .map(|(s, n)| (n - 1.0) * s.std[j] * s.std[j] + n * (s.mean[j] - mean[j]).powi(2))
            .sum();
        std[j] = if total > 1.0 { (ss / (total - 1.0)).sqrt() } else { 0.0 };
    }
    let moves: f64 = parts.iter().zip(chains).map(|(s, c)| s.acceptance_rate * proposals(c, burn_in)).sum();
    let proposed: f64 = chains.iter().map(|c| proposals(c, burn_in)).sum();
    Ok(PosteriorSummary {
        names: first.names().to_vec(),
        mean,
        std,
        acceptance_rate: if proposed > 0.0 { moves / proposed } else { 0.0 },
        burn_in,
        n_states: chains.iter().map(Chain::len).sum(),
    })
}

fn proposals(c: &Chain, burn_in: usize) -> f64 {
    ((c.len() - burn_in).saturating_sub(1) * c.thin()) as f64
}

fn chain_files(dir: &Path) -> Result<Vec<(usize, PathBuf)>> {
    let mut found = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
        if let Some(k) = name
            .strip_prefix("chain_")
            .and_then(|s| s.strip_suffix(".csv"))
            .and_then(|s| s.parse::<usize>().ok())
        {
            found.push((k, path));
        }
    }
    found.sort();
    Ok(found)
}

/// Per-parameter convergence statistics of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub summary: PosteriorSummary,
    pub geweke: Vec<f64>,
    /// Integrated autocorrelation time in stored states; `None` when undefined.
    pub iact: Vec<Option<f64>>,
    pub iact_window: Vec<Option<usize>>,
}

/// Writes trace, histogram, autocorrelation, Geweke and summary files for chain `k`.
pub fn diagnose_chain(chain: &Chain, burn_in: usize, max_lag: usize, out: &Path, k: usize) -> Result<Vec<PathBuf>> {
    let names = chain.names();
    let kept = chain.len().saturating_sub(burn_in);
    let mut outputs = Vec::new();

    let path = out.join(format!("trace_{k}.csv"));
    let mut w = BufWriter::new(File::create(&path)?);
    writeln!(w, "index,{},log_posterior", names.join(","))?;
    for (n, row) in chain.rows().enumerate() {
        write!(w, "{}", n * chain.thin())?;
        for v in row {
            write!(w, ",{v:e}")?;
        }
        writeln!(w, ",{:e}", chain.log_posterior()[n])?;
    }
    w.flush()?;
    outputs.push(path);

    let path = out.join(format!("histogram_{k}.csv"));
    let mut w = BufWriter::new(File::create(&path)?);
    writeln!(w, "parameter,lower,upper,count")?;
    for (j, name) in names.iter().enumerate() {
        let h = chain_histogram(chain, j, burn_in, None)?;
        for (b, c) in h.counts.iter().enumerate() {
            writeln!(w, "{name},{:e},{:e},{c}", h.edges[b], h.edges[b + 1])?;
        }
    }
    w.flush()?;
    outputs.push(path);

    let lags = max_lag.min(kept.saturating_sub(1));
    let (per, norm) = autocorrelation_norm(chain, burn_in, lags);
    let path = out.join(format!("autocorrelation_{k}.csv"));
    let mut w = BufWriter::new(File::create(&path)?);
    writeln!(w, "lag,{},norm", names.join(","))?;
    for (lag, nv) in norm.iter().enumerate() {
        write!(w, "{}", lag * chain.thin())?;
        for col in &per {
            write!(w, ",{:e}", col.get(lag).copied().unwrap_or(f64::NAN))?;
        }
        writeln!(w, ",{nv:e}")?;
    }
    w.flush()?;
    outputs.push(path);

    let geweke = geweke_relative_difference(chain, burn_in, GEWEKE_FIRST, GEWEKE_LAST)?;
    let mut iact = Vec::new();
    let mut window = Vec::new();
    for j in 0..chain.dim() {
        match integrated_autocorrelation_time(&chain.column(j)[burn_in..]) {
            Ok(t) => {
                iact.push(Some(t.tau));
                window.push(Some(t.window));
            }
            Err(_) => {
                iact.push(None);
                window.push(None);
            }
        }
    }
    let path = out.join(format!("geweke_{k}.csv"));
    let mut w = BufWriter::new(File::create(&path)?);
    writeln!(w, "parameter,geweke,iact")?;
    for (j, name) in names.iter().enumerate() {
        let tau = iact[j].map(|t| format!("{t:e}")).unwrap_or_default();
        writeln!(w, "{name},{:e},{tau}", geweke[j])?;
    }
    w.flush()?;
    outputs.push(path);

    let diag = ChainDiagnostics {
        summary: summarize(chain, burn_in)?,
        geweke,
        iact,
        iact_window: window,
    };
    let path = out.join(format!("diagnostics_{k}.json"));
    json_to(&path, &diag)?;
    outputs.push(path);
    Ok(outputs)
}

/// Surface coefficient of a summary's posterior mean on the run partition.
pub fn posterior_mean_h(summary: &PosteriorSummary, breakpoints: &[f64]) -> Result<SurfaceCoefficient> {
    let layout = ParameterLayout::from_names(&summary.names)?;
    SurfaceCoefficient::new(breakpoints.to_vec(), summary.mean[layout.h_range()].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    const CONFIG: &str = r#"
[geometry]
L_m = 0.05
t_f_s = 21600.0

[material]
kappa = 1.35
C = 0.94e6

[surface_h]
values = [12.0, 9.0]

[priors]
kappa_std = 1.0
C_std = 1.0e6

[mcmc]
n_states = 60
seed = 5
burn_in = 10

[solver]
nodes = 11
dt_s = 60.0

[twin]
depths_m = [0.0, 0.02, 0.04]
cadence_s = 1800.0
seed = 2
"#;

    fn setup(mode: Mode, chains: usize) -> Setup {
        let cfg = Config::from_toml(CONFIG, Path::new(".")).unwrap();
        let opts = RunOptions {
            mode,
            chains,
            ..Default::default()
        };
        Setup::new(cfg, opts, CONFIG).unwrap()
    }

    #[test]
    fn modes_parse() {
        assert_eq!("caseAB".parse::<Mode>().unwrap(), Mode::CaseAB);
        assert_eq!("caseC".parse::<Mode>().unwrap(), Mode::CaseC);
        assert!("caseB".parse::<Mode>().is_err());
    }

    #[test]
    fn estimation_layouts_follow_the_mode() {
        let (l, _, bp) = setup(Mode::CaseAB, 1).estimation_problem().unwrap();
        assert_eq!((l.n_intervals, l.hyperparameter, bp.len()), (2, false, 3));
        let (l, _, bp) = setup(Mode::CaseC, 1).estimation_problem().unwrap();
        assert_eq!((l.n_intervals, l.hyperparameter, bp.len()), (112, true, 113));
    }

    #[test]
    fn merged_summary_pools_states() {
        let s = setup(Mode::CaseAB, 2);
        let post = s.posterior(s.measurements().unwrap()).unwrap();
        let layout = post.layout();
        let cfg = s.config.mh_config(2, false, 5);
        let init = s.config.prior_means(2, false);
        let chains = run_chains(&cfg, &post, &init, layout.names(), 2).unwrap();
        let merged = merged_summary(&chains, 10).unwrap();
        let a = summarize(&chains[0], 10).unwrap();
        let b = summarize(&chains[1], 10).unwrap();
        for j in 0..4 {
            assert!((merged.mean[j] - 0.5 * (a.mean[j] + b.mean[j])).abs() <= 1e-12 * merged.mean[j].abs());
            // the pooled variance is at least the average within-chain variance
            let within = 0.5 * (a.std[j].powi(2) + b.std[j].powi(2)) * 49.0 / 99.0;
            assert!(merged.std[j].powi(2) >= within * (1.0 - 1e-12));
        }
        assert!((merged.acceptance_rate - 0.5 * (a.acceptance_rate + b.acceptance_rate)).abs() < 1e-12);
        assert_eq!(merged.n_states, 120);
    }

    #[test]
    fn data_section_or_twin_is_required() {
        let text = CONFIG.split("[twin]").next().unwrap();
        let cfg = Config::from_toml(text, Path::new(".")).unwrap();
        let s = Setup::new(cfg, RunOptions::default(), text).unwrap();
        assert!(matches!(s.measurements(), Err(Error::Config { key, .. }) if key == "data"));
    }
}
