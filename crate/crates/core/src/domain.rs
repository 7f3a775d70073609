//! Problem definition, parameterization and measurement types.
//!
//! Everything here is in SI units (s, m, K, W, J). Values are validated at
//! construction and immutable afterwards.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be positive and finite, got {v}")))
    }
}

fn check_increasing(name: &str, xs: &[f64]) -> Result<()> {
    if let Some(i) = xs.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::domain(format!(
            "{name} must be strictly increasing (index {})",
            i + 1
        )));
    }
    Ok(())
}

/// Thermal properties of the homogeneous ground layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    /// Thermal conductivity, W/(m·K).
    pub conductivity: f64,
    /// Volumetric heat capacity, J/(m³·K).
    pub heat_capacity: f64,
}

impl MaterialParams {
    pub fn new(conductivity: f64, heat_capacity: f64) -> Result<Self> {
        check_positive("conductivity", conductivity)?;
        check_positive("heat capacity", heat_capacity)?;
        Ok(Self {
            conductivity,
            heat_capacity,
        })
    }

    /// Thermal diffusivity κ/C in m²/s.
    pub fn diffusivity(&self) -> f64 {
        self.conductivity / self.heat_capacity
    }
}

/// A sampled signal with strictly increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::domain(format!(
                "series has {} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::domain("series needs at least 2 samples"));
        }
        if let Some(i) = times
            .iter()
            .zip(&values)
            .position(|(t, v)| !t.is_finite() || !v.is_finite())
        {
            return Err(Error::domain(format!("non-finite sample at index {i}")));
        }
        check_increasing("series times", &times)?;
        Ok(Self { times, values })
    }

    /// A series holding `value` over `[start, end]`.
    pub fn constant(start: f64, end: f64, value: f64) -> Result<Self> {
        Self::new(vec![start, end], vec![value, value])
    }

    /// Samples `f` at `n + 1` equally spaced times over `[start, end]`.
    pub fn sample(start: f64, end: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("need at least one sampling interval"));
        }
        let dt = (end - start) / n as f64;
        let times: Vec<f64> = (0..=n)
            .map(|i| if i == n { end } else { start + i as f64 * dt })
            .collect();
        let values = times.iter().map(|&t| f(t)).collect();
        Self::new(times, values)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// True when the series covers `[start, end]`.
    pub fn covers(&self, start: f64, end: f64) -> bool {
        self.start() <= start && self.end() >= end
    }

    /// Piecewise-linear interpolation; exact at the samples.
    pub fn interpolate(&self, t: f64) -> Result<f64> {
        if !(t >= self.start() && t <= self.end()) {
            return Err(Error::domain(format!(
                "time {t} outside series span [{}, {}]",
                self.start(),
                self.end()
            )));
        }
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            return Ok(self.values[0]);
        }
        let i = k - 1;
        if self.times[i] == t || i + 1 == self.times.len() {
            return Ok(self.values[i]);
        }
        let w = (t - self.times[i]) / (self.times[i + 1] - self.times[i]);
        Ok(lerp(self.values[i], self.values[i + 1], w))
    }

    /// Same series with every value mapped through `f`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.times.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    /// Same series with every time mapped through `f`.
    pub fn map_times(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.times.iter().map(|&t| f(t)).collect(), self.values.clone())
    }
}

#[inline]
pub(crate) fn lerp(a: f64, b: f64, w: f64) -> f64 {
    if w == 0.0 {
        a
    } else {
        (1.0 - w) * a + w * b
    }
}

/// Piecewise-linear function of depth, held constant beyond its outermost knots.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthProfile {
    depths: Vec<f64>,
    values: Vec<f64>,
}

impl DepthProfile {
    pub fn new(depths: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if depths.len() != values.len() || depths.is_empty() {
            return Err(Error::domain("profile needs matching, non-empty depths and values"));
        }
        if depths.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::domain("profile contains a non-finite value"));
        }
        check_increasing("profile depths", &depths)?;
        Ok(Self { depths, values })
    }

    pub fn uniform(value: f64) -> Result<Self> {
        Self::new(vec![0.0], vec![value])
    }

    pub fn depths(&self) -> &[f64] {
        &self.depths
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.depths.len();
        if x <= self.depths[0] {
            return self.values[0];
        }
        if x >= self.depths[n - 1] {
            return self.values[n - 1];
        }
        let i = self.depths.partition_point(|&d| d <= x) - 1;
        if self.depths[i] == x {
            return self.values[i];
        }
        let w = (x - self.depths[i]) / (self.depths[i + 1] - self.depths[i]);
        lerp(self.values[i], self.values[i + 1], w)
    }
}

/// The forward heat-conduction problem in physical units.
#[derive(Debug, Clone)]
pub struct PhysicalProblem {
    /// Slab depth L, m.
    pub depth: f64,
    /// Time horizon t_f, s.
    pub final_time: f64,
    pub material: MaterialParams,
    /// Air temperature T∞(t), K.
    pub air_temperature: TimeSeries,
    /// Net radiation q∞(t) absorbed by the surface, W/m².
    pub net_radiation: TimeSeries,
    /// Temperature T_g(t) imposed at x = L, K.
    pub deep_temperature: TimeSeries,
    /// Initial profile T_in(x), K.
    pub initial_profile: DepthProfile,
}

impl PhysicalProblem {
    pub fn new(
        depth: f64,
        final_time: f64,
        material: MaterialParams,
        air_temperature: TimeSeries,
        net_radiation: TimeSeries,
        deep_temperature: TimeSeries,
        initial_profile: DepthProfile,
    ) -> Result<Self> {
        check_positive("depth", depth)?;
        check_positive("final time", final_time)?;
        for (name, s) in [
            ("air temperature", &air_temperature),
            ("net radiation", &net_radiation),
            ("deep temperature", &deep_temperature),
        ] {
            if !s.covers(0.0, final_time) {
                return Err(Error::domain(format!(
                    "{name} series [{}, {}] does not cover [0, {final_time}]",
                    s.start(),
                    s.end()
                )));
            }
        }
        Ok(Self {
            depth,
            final_time,
            material,
            air_temperature,
            net_radiation,
            deep_temperature,
            initial_profile,
        })
    }

    pub fn with_material(&self, material: MaterialParams) -> Self {
        Self {
            material,
            ..self.clone()
        }
    }

    pub fn with_net_radiation(&self, net_radiation: TimeSeries) -> Result<Self> {
        Self::new(
            self.depth,
            self.final_time,
            self.material,
            self.air_temperature.clone(),
            net_radiation,
            self.deep_temperature.clone(),
            self.initial_profile.clone(),
        )
    }
}

/// Scales used to make the problem dimensionless.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceScales {
    /// s
    pub time: f64,
    /// K
    pub temperature: f64,
    /// W/(m·K)
    pub conductivity: f64,
    /// J/(m³·K)
    pub heat_capacity: f64,
    /// W/(m²·K)
    pub h: f64,
}

impl ReferenceScales {
    pub fn new(time: f64, temperature: f64, conductivity: f64, heat_capacity: f64, h: f64) -> Result<Self> {
        let r = Self {
            time,
            temperature,
            conductivity,
            heat_capacity,
            h,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("reference time", self.time)?;
        check_positive("reference temperature", self.temperature)?;
        check_positive("reference conductivity", self.conductivity)?;
        check_positive("reference heat capacity", self.heat_capacity)?;
        check_positive("reference h", self.h)
    }

    /// Fourier number κ_ref·t_ref/(C_ref·L²).
    pub fn fourier(&self, depth: f64) -> f64 {
        self.conductivity * self.time / (self.heat_capacity * depth * depth)
    }

    /// Biot number h_ref·L/κ_ref.
    pub fn biot(&self, depth: f64) -> f64 {
        self.h * depth / self.conductivity
    }
}

/// Piecewise-constant surface heat transfer coefficient h(t).
///
/// Interval `i` is `[t_i, t_{i+1})`; the last one also contains `t_f`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceCoefficient {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl SurfaceCoefficient {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || breakpoints.len() != values.len() + 1 {
            return Err(Error::domain(format!(
                "{} breakpoints cannot delimit {} intervals",
                breakpoints.len(),
                values.len()
            )));
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::domain("first breakpoint must be 0"));
        }
        check_increasing("breakpoints", &breakpoints)?;
        if let Some(i) = values.iter().position(|&h| !(h.is_finite() && h > 0.0)) {
            check_positive(&format!("h[{i}]"), values[i])?;
        }
        Ok(Self { breakpoints, values })
    }

    /// Uniform partition of `[0, final_time]` with one value per interval.
    pub fn uniform(final_time: f64, values: Vec<f64>) -> Result<Self> {
        let b = build_uniform_partition(final_time, values.len())?;
        Self::new(b, values)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_intervals(&self) -> usize {
        self.values.len()
    }

    pub fn final_time(&self) -> f64 {
        self.breakpoints[self.values.len()]
    }

    /// Index of the interval containing `t`.
    pub fn interval_index(&self, t: f64) -> Result<usize> {
        if !(t >= 0.0 && t <= self.final_time()) {
            return Err(Error::domain(format!(
                "time {t} outside [0, {}]",
                self.final_time()
            )));
        }
        Ok(self.index_unchecked(t))
    }

    #[inline]
    pub(crate) fn index_unchecked(&self, t: f64) -> usize {
        let k = self.breakpoints.partition_point(|&b| b <= t);
        k.saturating_sub(1).min(self.values.len() - 1)
    }

    /// h(t) in W/(m²·K).
    pub fn eval(&self, t: f64) -> Result<f64> {
        Ok(self.values[self.interval_index(t)?])
    }

    /// Value of the basis function η_i at `t` (1 inside interval `i`, else 0).
    pub fn basis(&self, i: usize, t: f64) -> Result<f64> {
        Ok(if self.interval_index(t)? == i { 1.0 } else { 0.0 })
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.breakpoints.clone(), values)
    }
}

/// `n + 1` equally spaced breakpoints over `[0, final_time]`.
pub fn build_uniform_partition(final_time: f64, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::domain("partition needs at least one interval"));
    }
    check_positive("final time", final_time)?;
    let dt = final_time / n as f64;
    Ok((0..=n)
        .map(|i| if i == n { final_time } else { i as f64 * dt })
        .collect())
}

/// Temperature observations at fixed sensor depths.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    depths: Vec<f64>,
    times: Vec<f64>,
    /// Row-major, sensor by observation time.
    temperatures: Vec<f64>,
    noise_std: f64,
}

impl MeasurementSet {
    pub fn new(depths: Vec<f64>, times: Vec<f64>, temperatures: Vec<f64>, noise_std: f64) -> Result<Self> {
        if depths.is_empty() || times.is_empty() {
            return Err(Error::domain("measurement set needs sensors and times"));
        }
        if temperatures.len() != depths.len() * times.len() {
            return Err(Error::domain(format!(
                "expected {} temperatures, got {}",
                depths.len() * times.len(),
                temperatures.len()
            )));
        }
        check_positive("noise std", noise_std)?;
        let mut sorted = depths.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::domain("sensor depths must be distinct"));
        }
        if depths.iter().chain(&times).chain(&temperatures).any(|v| !v.is_finite()) {
            return Err(Error::domain("measurement set contains a non-finite value"));
        }
        check_increasing("observation times", &times)?;
        Ok(Self {
            depths,
            times,
            temperatures,
            noise_std,
        })
    }

    /// Check the sensors and times fit inside a slab of `depth` over `[0, final_time]`.
    pub fn check_within(&self, depth: f64, final_time: f64) -> Result<()> {
        if let Some(x) = self.depths.iter().find(|&&x| !(0.0..=depth).contains(&x)) {
            return Err(Error::domain(format!("sensor depth {x} outside [0, {depth}]")));
        }
        if let Some(t) = self.times.iter().find(|&&t| !(0.0..=final_time).contains(&t)) {
            return Err(Error::domain(format!(
                "observation time {t} outside [0, {final_time}]"
            )));
        }
        Ok(())
    }

    pub fn depths(&self) -> &[f64] {
        &self.depths
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn temperatures(&self) -> &[f64] {
        &self.temperatures
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    pub fn n_sensors(&self) -> usize {
        self.depths.len()
    }

    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    /// Total number of scalar observations.
    pub fn len(&self) -> usize {
        self.temperatures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.temperatures.is_empty()
    }

    pub fn get(&self, sensor: usize, time: usize) -> f64 {
        self.temperatures[sensor * self.times.len() + time]
    }

    /// Temperatures of one sensor over all observation times.
    pub fn sensor_row(&self, sensor: usize) -> &[f64] {
        let n = self.times.len();
        &self.temperatures[sensor * n..(sensor + 1) * n]
    }

    /// Same sensors and times with different temperature values.
    pub fn with_temperatures(&self, temperatures: Vec<f64>) -> Result<Self> {
        Self::new(self.depths.clone(), self.times.clone(), temperatures, self.noise_std)
    }
}

/// Meaning of one slot of the parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParameterRole {
    Conductivity,
    HeatCapacity,
    /// Surface coefficient of the given interval (0-based).
    SurfaceH(usize),
    /// Smoothness-prior precision γ.
    Smoothness,
}

/// Index layout of `(κ, C, h_1 … h_Nt [, γ])`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParameterLayout {
    pub n_intervals: usize,
    pub hyperparameter: bool,
}

impl ParameterLayout {
    pub const CONDUCTIVITY: usize = 0;
    pub const HEAT_CAPACITY: usize = 1;
    pub const FIRST_H: usize = 2;

    pub fn new(n_intervals: usize, hyperparameter: bool) -> Self {
        Self {
            n_intervals,
            hyperparameter,
        }
    }

    pub fn len(&self) -> usize {
        2 + self.n_intervals + usize::from(self.hyperparameter)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of parameters entering the forward model (κ, C, h).
    pub fn n_physical(&self) -> usize {
        2 + self.n_intervals
    }

    pub fn h_range(&self) -> std::ops::Range<usize> {
        Self::FIRST_H..Self::FIRST_H + self.n_intervals
    }

    pub fn gamma_index(&self) -> Option<usize> {
        self.hyperparameter.then(|| 2 + self.n_intervals)
    }

    pub fn role(&self, index: usize) -> Option<ParameterRole> {
        match index {
            0 => Some(ParameterRole::Conductivity),
            1 => Some(ParameterRole::HeatCapacity),
            i if self.h_range().contains(&i) => Some(ParameterRole::SurfaceH(i - 2)),
            i if Some(i) == self.gamma_index() => Some(ParameterRole::Smoothness),
            _ => None,
        }
    }

    /// Column names used in output files.
    pub fn names(&self) -> Vec<String> {
        (0..self.len())
            .map(|i| match self.role(i).expect("index in range") {
                ParameterRole::Conductivity => "kappa".to_string(),
                ParameterRole::HeatCapacity => "C".to_string(),
                ParameterRole::SurfaceH(k) => format!("h{}", k + 1),
                ParameterRole::Smoothness => "gamma".to_string(),
            })
            .collect()
    }

    /// Inverse of [`names`](Self::names).
    pub fn from_names(names: &[String]) -> Result<Self> {
        let hyper = names.last().is_some_and(|n| n == "gamma");
        let n_h = names.len().saturating_sub(2 + usize::from(hyper));
        let layout = Self::new(n_h, hyper);
        if layout.names() != names {
            return Err(Error::domain(format!("unrecognised parameter columns {names:?}")));
        }
        Ok(layout)
    }
}

/// Ordered unknowns with their layout; every component is strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    layout: ParameterLayout,
    values: Vec<f64>,
}

impl ParameterVector {
    pub fn new(layout: ParameterLayout, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::domain(format!(
                "layout expects {} values, got {}",
                layout.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|&v| !(v.is_finite() && v > 0.0)) {
            check_positive(&format!("parameter {i}"), values[i])?;
        }
        Ok(Self { layout, values })
    }

    pub fn pack(material: MaterialParams, h: &[f64], gamma: Option<f64>) -> Result<Self> {
        let layout = ParameterLayout::new(h.len(), gamma.is_some());
        let mut values = Vec::with_capacity(layout.len());
        values.push(material.conductivity);
        values.push(material.heat_capacity);
        values.extend_from_slice(h);
        values.extend(gamma);
        Self::new(layout, values)
    }

    pub fn unpack(&self) -> (MaterialParams, Vec<f64>, Option<f64>) {
        let material = MaterialParams {
            conductivity: self.values[0],
            heat_capacity: self.values[1],
        };
        let h = self.values[self.layout.h_range()].to_vec();
        let gamma = self.layout.gamma_index().map(|i| self.values[i]);
        (material, h, gamma)
    }

    pub fn layout(&self) -> ParameterLayout {
        self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn material(&self) -> MaterialParams {
        MaterialParams {
            conductivity: self.values[0],
            heat_capacity: self.values[1],
        }
    }

    pub fn h_values(&self) -> &[f64] {
        &self.values[self.layout.h_range()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const HOUR: f64 = 3600.0;

    fn case_a() -> SurfaceCoefficient {
        SurfaceCoefficient::new(
            vec![0.0, 6.0 * HOUR, 18.0 * HOUR, 28.0 * HOUR],
            vec![12.65, 8.47, 10.86],
        )
        .unwrap()
    }

    #[test]
    fn single_interval_is_constant() {
        let h = SurfaceCoefficient::new(vec![0.0, 28.0 * HOUR], vec![10.0]).unwrap();
        assert_eq!(h.eval(3.0 * HOUR).unwrap(), 10.0);
    }

    #[test]
    fn case_a_lookup() {
        let h = case_a();
        assert_eq!(h.eval(12.0 * HOUR).unwrap(), 8.47);
        // breakpoints belong to the interval on their right
        assert_eq!(h.eval(6.0 * HOUR).unwrap(), 8.47);
        assert_eq!(h.eval(0.0).unwrap(), 12.65);
        assert_eq!(h.eval(28.0 * HOUR).unwrap(), 10.86);
    }

    #[test]
    fn lookup_outside_horizon_fails() {
        let h = case_a();
        assert!(matches!(h.eval(-1.0), Err(Error::Domain(_))));
        assert!(matches!(h.eval(28.0 * HOUR + 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn surface_coefficient_rejects_bad_input() {
        assert!(SurfaceCoefficient::new(vec![0.0, 1.0], vec![0.0]).is_err());
        assert!(SurfaceCoefficient::new(vec![1.0, 2.0], vec![1.0]).is_err());
        assert!(SurfaceCoefficient::new(vec![0.0, 2.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(SurfaceCoefficient::new(vec![0.0, 1.0, 2.0], vec![1.0]).is_err());
    }

    #[test]
    fn uniform_partitions() {
        let b = build_uniform_partition(28.0 * HOUR, 4).unwrap();
        assert_eq!(b, vec![0.0, 7.0 * HOUR, 14.0 * HOUR, 21.0 * HOUR, 28.0 * HOUR]);

        let b = build_uniform_partition(28.0 * HOUR, 112).unwrap();
        assert_eq!(b.len(), 113);
        for w in b.windows(2) {
            assert!((w[1] - w[0] - 900.0).abs() < 1e-9);
        }

        assert_eq!(build_uniform_partition(1.0, 1).unwrap(), vec![0.0, 1.0]);
        assert!(build_uniform_partition(1.0, 0).is_err());
    }

    #[test]
    fn series_validation() {
        assert!(TimeSeries::new(vec![0.0], vec![1.0]).is_err());
        assert!(TimeSeries::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(TimeSeries::new(vec![0.0, 1.0], vec![1.0, f64::NAN]).is_err());
        let s = TimeSeries::new(vec![0.0, 10.0], vec![10.0, 20.0]).unwrap();
        assert_eq!(s.interpolate(5.0).unwrap(), 15.0);
        assert_eq!(s.interpolate(10.0).unwrap(), 20.0);
        assert!(s.interpolate(10.5).is_err());
    }

    #[test]
    fn profile_extrapolates_flat() {
        let p = DepthProfile::new(vec![0.0, 0.04], vec![300.0, 308.0]).unwrap();
        assert_eq!(p.eval(0.02), 304.0);
        assert_eq!(p.eval(0.05), 308.0);
        assert_eq!(p.eval(-0.01), 300.0);
    }

    #[test]
    fn layout_roles_and_names() {
        let l = ParameterLayout::new(3, true);
        assert_eq!(l.len(), 6);
        assert_eq!(l.names(), vec!["kappa", "C", "h1", "h2", "h3", "gamma"]);
        assert_eq!(l.role(4), Some(ParameterRole::SurfaceH(2)));
        assert_eq!(l.role(5), Some(ParameterRole::Smoothness));
        assert_eq!(l.role(6), None);
        assert_eq!(ParameterLayout::from_names(&l.names()).unwrap(), l);
        let l = ParameterLayout::new(2, false);
        assert_eq!(ParameterLayout::from_names(&l.names()).unwrap(), l);
    }

    #[test]
    fn parameter_vector_rejects_non_positive() {
        let m = MaterialParams::new(2.27, 2.1e6).unwrap();
        assert!(ParameterVector::pack(m, &[10.0, -1.0], None).is_err());
        assert!(ParameterVector::pack(m, &[10.0], Some(0.0)).is_err());
    }

    #[test]
    fn measurement_layout() {
        let m = MeasurementSet::new(vec![0.0, 0.01], vec![0.0, 900.0, 1800.0], (0..6).map(f64::from).collect(), 0.25)
            .unwrap();
        assert_eq!(m.get(1, 2), 5.0);
        assert_eq!(m.sensor_row(1), &[3.0, 4.0, 5.0]);
        assert!(MeasurementSet::new(vec![0.0, 0.0], vec![0.0], vec![1.0, 1.0], 0.25).is_err());
        assert!(m.check_within(0.005, 1800.0).is_err());
        assert!(m.check_within(0.05, 1800.0).is_ok());
    }

    proptest! {
        #[test]
        fn basis_functions_partition_unity(
            widths in prop::collection::vec(0.1f64..10.0, 1..12),
            frac in 0.0f64..=1.0,
        ) {
            let mut b = vec![0.0];
            for w in &widths {
                b.push(b.last().unwrap() + w);
            }
            let n = widths.len();
            let h = SurfaceCoefficient::new(b.clone(), vec![1.0; n]).unwrap();
            let t = frac * b[n];
            let total: f64 = (0..n).map(|i| h.basis(i, t).unwrap()).sum();
            prop_assert_eq!(total, 1.0);
        }

        #[test]
        fn midpoints_recover_values(values in prop::collection::vec(0.01f64..100.0, 1..20)) {
            let h = SurfaceCoefficient::uniform(100_800.0, values.clone()).unwrap();
            for (i, v) in values.iter().enumerate() {
                let mid = 0.5 * (h.breakpoints()[i] + h.breakpoints()[i + 1]);
                prop_assert_eq!(h.eval(mid).unwrap(), *v);
            }
        }

        #[test]
        fn pack_unpack_is_exact(
            kappa in 1e-3f64..1e3,
            cap in 1e3f64..1e8,
            h in prop::collection::vec(1e-3f64..1e3, 1..30),
            gamma in prop::option::of(1e-6f64..1e6),
        ) {
            let m = MaterialParams::new(kappa, cap).unwrap();
            let p = ParameterVector::pack(m, &h, gamma).unwrap();
            let (m2, h2, g2) = p.unpack();
            prop_assert_eq!(m2.conductivity.to_bits(), kappa.to_bits());
            prop_assert_eq!(m2.heat_capacity.to_bits(), cap.to_bits());
            prop_assert_eq!(h2, h);
            prop_assert_eq!(g2.map(f64::to_bits), gamma.map(f64::to_bits));
        }
    }
}
