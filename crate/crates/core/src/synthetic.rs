//! A synthetic pavement site with smooth diurnal forcing, used for twin
//! experiments when no field data are at hand.

use std::f64::consts::PI;

use crate::domain::{DepthProfile, MaterialParams, PhysicalProblem, TimeSeries};
use crate::error::Result;

const DAY: f64 = 86_400.0;
const HOUR: f64 = 3_600.0;

/// Diurnal boundary forcing. Each series is `mean + amplitude·sin(2π(t − phase)/1 day)`,
/// the radiation being clipped at night to a constant long-wave loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiurnalForcing {
    pub air_mean: f64,
    pub air_amplitude: f64,
    pub air_phase: f64,
    pub solar_peak: f64,
    pub solar_phase: f64,
    pub longwave_loss: f64,
    pub deep_mean: f64,
    pub deep_amplitude: f64,
    pub deep_phase: f64,
    /// Sampling interval of the generated series, s.
    pub sample_every: f64,
}

impl Default for DiurnalForcing {
    fn default() -> Self {
        Self {
            air_mean: 291.0,
            air_amplitude: 5.0,
            air_phase: 9.0 * HOUR,
            solar_peak: 600.0,
            solar_phase: 6.0 * HOUR,
            longwave_loss: 60.0,
            deep_mean: 300.0,
            deep_amplitude: 6.0,
            deep_phase: 12.0 * HOUR,
            sample_every: 900.0,
        }
    }
}

fn wave(t: f64, phase: f64) -> f64 {
    (2.0 * PI * (t - phase) / DAY).sin()
}

impl DiurnalForcing {
    pub fn air_temperature(&self, t: f64) -> f64 {
        self.air_mean + self.air_amplitude * wave(t, self.air_phase)
    }

    pub fn net_radiation(&self, t: f64) -> f64 {
        self.solar_peak * wave(t, self.solar_phase).max(0.0) - self.longwave_loss
    }

    pub fn deep_temperature(&self, t: f64) -> f64 {
        self.deep_mean + self.deep_amplitude * wave(t, self.deep_phase)
    }

    /// Slab problem of the given depth and duration with a linear initial profile
    /// joining the air temperature at the surface to the deep temperature.
    pub fn problem(&self, depth: f64, final_time: f64, material: MaterialParams) -> Result<PhysicalProblem> {
        let n = (final_time / self.sample_every - 1e-9).ceil().max(1.0) as usize;
        let series = |f: &dyn Fn(f64) -> f64| TimeSeries::sample(0.0, final_time, n, f);
        let initial = DepthProfile::new(vec![0.0, depth], vec![self.air_temperature(0.0), self.deep_temperature(0.0)])?;
        PhysicalProblem::new(
            depth,
            final_time,
            material,
            series(&|t| self.air_temperature(t))?,
            series(&|t| self.net_radiation(t))?,
            series(&|t| self.deep_temperature(t))?,
            initial,
        )
    }
}
