//! File formats, preprocessing of boundary data and synthetic measurements.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::domain::{DepthProfile, MaterialParams, MeasurementSet, SurfaceCoefficient, TimeSeries};
use crate::error::{Error, Result};
use crate::forward::ForwardModel;
use crate::inference::Chain;

pub const SECONDS_PER_HOUR: f64 = 3600.0;
pub const KELVIN_OFFSET: f64 = 273.15;

/// Unit conversions applied while reading hand-prepared files.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestUnits {
    /// Time column is in hours.
    pub hours: bool,
    /// Temperature values are in degrees Celsius.
    pub celsius: bool,
}

impl IngestUnits {
    pub fn time(&self, t: f64) -> f64 {
        if self.hours {
            t * SECONDS_PER_HOUR
        } else {
            t
        }
    }

    pub fn temperature(&self, v: f64) -> f64 {
        if self.celsius {
            v + KELVIN_OFFSET
        } else {
            v
        }
    }
}

fn parse_err(path: &Path, row: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        row,
        message: message.into(),
    }
}

fn column(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| parse_err(path, 0, format!("missing column `{name}`")))
}

fn field(rec: &csv::StringRecord, idx: usize, name: &str, path: &Path, row: usize) -> Result<f64> {
    let raw = rec
        .get(idx)
        .ok_or_else(|| parse_err(path, row, format!("missing value for `{name}`")))?;
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| parse_err(path, row, format!("`{name}` is not a number: {raw:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(path, row, format!("`{name}` is not finite")));
    }
    Ok(v)
}

/// Reads a `time_s,value` file. Row numbers in errors count data rows from 1.
pub fn load_series(path: &Path) -> Result<TimeSeries> {
    load_series_with(path, IngestUnits::default(), false)
}

/// Like [`load_series`], converting time and, for temperature series, values.
pub fn load_series_with(path: &Path, units: IngestUnits, temperature: bool) -> Result<TimeSeries> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let ti = column(&headers, "time_s", path)?;
    let vi = column(&headers, "value", path)?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let row = k + 1;
        let rec = rec?;
        let t = units.time(field(&rec, ti, "time_s", path, row)?);
        let v = field(&rec, vi, "value", path, row)?;
        if let Some(&prev) = times.last() {
            if t <= prev {
                return Err(parse_err(path, row, format!("time {t} does not increase past {prev}")));
            }
        }
        times.push(t);
        values.push(if temperature { units.temperature(v) } else { v });
    }
    if times.len() < 2 {
        return Err(parse_err(path, times.len(), "a series needs at least two rows"));
    }
    TimeSeries::new(times, values)
}

/// Writes a `time_s,value` file with 17 significant digits.
pub fn write_series(path: &Path, series: &TimeSeries) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "time_s,value")?;
    for (t, v) in series.times().iter().zip(series.values()) {
        writeln!(w, "{t:.16e},{v:.16e}")?;
    }
    w.flush()?;
    Ok(())
}

/// Piecewise-linear value of `series` at `t`.
pub fn interpolate(series: &TimeSeries, t: f64) -> Result<f64> {
    series.interpolate(t)
}

/// Reads a long-format `time_s,depth_m,temperature_K` file into a full
/// sensor × time grid.
pub fn load_measurements(path: &Path, units: IngestUnits, noise_std: f64) -> Result<MeasurementSet> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let ti = column(&headers, "time_s", path)?;
    let di = column(&headers, "depth_m", path)?;
    let yi = column(&headers, "temperature_K", path)?;
    // keyed on bit patterns so that equal decimal strings collapse
    let mut grid: BTreeMap<(u64, u64), f64> = BTreeMap::new();
    let mut depths = Vec::new();
    let mut times = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let row = k + 1;
        let rec = rec?;
        let t = units.time(field(&rec, ti, "time_s", path, row)?);
        let d = field(&rec, di, "depth_m", path, row)?;
        let y = units.temperature(field(&rec, yi, "temperature_K", path, row)?);
        if grid.insert((d.to_bits(), t.to_bits()), y).is_some() {
            return Err(parse_err(path, row, format!("duplicate entry at depth {d}, time {t}")));
        }
        depths.push(d);
        times.push(t);
    }
    let sorted_unique = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let depths = sorted_unique(depths);
    let times = sorted_unique(times);
    if grid.len() != depths.len() * times.len() {
        return Err(parse_err(
            path,
            grid.len(),
            format!(
                "{} rows do not fill a {} sensor × {} time grid",
                grid.len(),
                depths.len(),
                times.len()
            ),
        ));
    }
    let mut temps = Vec::with_capacity(grid.len());
    for d in &depths {
        for t in &times {
            temps.push(grid[&(d.to_bits(), t.to_bits())]);
        }
    }
    MeasurementSet::new(depths, times, temps, noise_std)
}

pub fn write_measurements(path: &Path, data: &MeasurementSet) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "time_s,depth_m,temperature_K")?;
    for (n, t) in data.times().iter().enumerate() {
        for (i, d) in data.depths().iter().enumerate() {
            writeln!(w, "{t:.16e},{d:.16e},{:.16e}", data.get(i, n))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Piecewise-linear profile through the sensor readings, constant beyond the
/// outermost sensors.
pub fn initial_profile_from_sensors(depths: &[f64], temperatures: &[f64], depth: f64) -> Result<DepthProfile> {
    if depths.len() < 2 {
        return Err(Error::domain("an initial profile needs at least two sensors"));
    }
    if let Some(d) = depths.iter().find(|&&d| !(0.0..=depth).contains(&d)) {
        return Err(Error::domain(format!("sensor depth {d} lies outside [0, {depth}]")));
    }
    DepthProfile::new(depths.to_vec(), temperatures.to_vec())
}

/// Centred moving average over a time window. Near the ends the half-width
/// shrinks to the distance from the edge so the window stays symmetric.
pub fn moving_average(series: &TimeSeries, window: f64) -> Result<TimeSeries> {
    if !(window > 0.0 && window.is_finite()) {
        return Err(Error::domain(format!("window must be positive, got {window}")));
    }
    let t = series.times();
    let v = series.values();
    let (t0, t1) = (series.start(), series.end());
    let tol = 1e-9 * (t1 - t0);
    let mut lo = 0;
    let mut out = Vec::with_capacity(t.len());
    for i in 0..t.len() {
        let half = (0.5 * window).min(t[i] - t0).min(t1 - t[i]);
        while t[lo] < t[i] - half - tol {
            lo += 1;
        }
        let mut sum = 0.0;
        let mut count = 0usize;
        let mut j = lo;
        while j < t.len() && t[j] <= t[i] + half + tol {
            sum += v[j];
            count += 1;
            j += 1;
        }
        out.push(if count == 1 { v[i] } else { sum / count as f64 });
    }
    TimeSeries::new(t.to_vec(), out)
}

/// Empirical convective coefficient `4 + 4v` for a wind speed in m/s.
pub fn empirical_h_from_wind(v: f64) -> Result<f64> {
    if !(v >= 0.0 && v.is_finite()) {
        return Err(Error::domain(format!("wind speed must be non-negative, got {v}")));
    }
    Ok(4.0 + 4.0 * v)
}

/// Ground truth and sampling plan of a synthetic experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct TwinSpec {
    pub material: MaterialParams,
    pub h: SurfaceCoefficient,
    pub depths: Vec<f64>,
    /// Time between observations, s. The first observation is one cadence after
    /// the start.
    pub cadence: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl TwinSpec {
    pub fn observation_times(&self, final_time: f64) -> Result<Vec<f64>> {
        if !(self.cadence > 0.0) {
            return Err(Error::domain(format!("cadence must be positive, got {}", self.cadence)));
        }
        let n = (final_time / self.cadence + 1e-9).floor() as usize;
        if n == 0 {
            return Err(Error::domain("cadence exceeds the simulated period"));
        }
        Ok((1..=n).map(|k| k as f64 * self.cadence).collect())
    }
}

/// Solves with the true parameters and adds independent Gaussian noise per
/// sensor and time.
pub fn generate_twin_data(spec: &TwinSpec, model: &ForwardModel) -> Result<MeasurementSet> {
    if !(spec.noise_std >= 0.0 && spec.noise_std.is_finite()) {
        return Err(Error::domain(format!("noise std must be non-negative, got {}", spec.noise_std)));
    }
    let times = spec.observation_times(model.problem().final_time)?;
    let mut temps = model.predict(&spec.material, &spec.h, &spec.depths, &times)?;
    if spec.noise_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let noise = Normal::new(0.0, spec.noise_std).map_err(|e| Error::domain(e.to_string()))?;
        for y in temps.iter_mut() {
            *y += noise.sample(&mut rng);
        }
    }
    MeasurementSet::new(spec.depths.clone(), times, temps, spec.noise_std)
}

/// Writes a chain as `index,<parameters>,log_posterior,accepted`. The index is
/// the transition count of each stored state and `accepted` the number of moves
/// accepted since the previous row (a 0/1 flag without thinning).
pub fn write_chain(path: &Path, chain: &Chain) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "index")?;
    for n in chain.names() {
        write!(w, ",{n}")?;
    }
    writeln!(w, ",log_posterior,accepted")?;
    for (k, row) in chain.rows().enumerate() {
        write!(w, "{}", k * chain.thin())?;
        for v in row {
            write!(w, ",{v:e}")?;
        }
        writeln!(w, ",{:e},{}", chain.log_posterior()[k], chain.accepted()[k])?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_chain(path: &Path) -> Result<Chain> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols.len() < 4 || cols[0] != "index" || cols[cols.len() - 2] != "log_posterior" || cols[cols.len() - 1] != "accepted" {
        return Err(parse_err(path, 0, "expected columns index,<parameters>,log_posterior,accepted"));
    }
    let names: Vec<String> = cols[1..cols.len() - 2].iter().map(|s| s.to_string()).collect();
    let d = names.len();
    let mut samples = Vec::new();
    let mut lp = Vec::new();
    let mut accepted = Vec::new();
    let mut index = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let row = k + 1;
        let rec = rec?;
        index.push(
            rec[0]
                .trim()
                .parse::<usize>()
                .map_err(|_| parse_err(path, row, format!("bad index {:?}", &rec[0])))?,
        );
        if rec.len() != d + 3 {
            return Err(parse_err(path, row, format!("expected {} fields, found {}", d + 3, rec.len())));
        }
        for j in 0..d {
            samples.push(field(&rec, j + 1, &names[j], path, row)?);
        }
        // -inf is legal only in principle; stored states always have finite density
        lp.push(field(&rec, d + 1, "log_posterior", path, row)?);
        let raw = rec[d + 2].trim();
        accepted.push(
            raw.parse::<u32>()
                .map_err(|_| parse_err(path, row, format!("`accepted` must be a count, got {raw:?}")))?,
        );
    }
    if accepted.is_empty() {
        return Err(parse_err(path, 0, "chain file has no states"));
    }
    // the thinning interval is the index spacing, which must be uniform from 0
    let thin = if index.len() > 1 { index[1] } else { 1 };
    if let Some(k) = index.iter().enumerate().position(|(k, &i)| i != k * thin) {
        return Err(parse_err(path, k + 1, "indices must be evenly spaced from 0"));
    }
    Chain::from_parts(names, samples, accepted, lp, 0, 0, thin.max(1))
}
