//! Finite-difference sensitivity coefficients of the predicted temperatures.

use rayon::prelude::*;

use crate::domain::{MaterialParams, ParameterLayout, ParameterVector, SurfaceCoefficient};
use crate::error::{Error, Result};
use crate::forward::ForwardModel;

/// Relative parameter step used for the central differences.
pub const RELATIVE_STEP: f64 = 1e-2;

/// ∂T/∂p_j at every sensor and observation time.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityMatrix {
    layout: ParameterLayout,
    depths: Vec<f64>,
    times: Vec<f64>,
    steps: Vec<f64>,
    reduced: bool,
    /// Indexed `[(sensor * n_params + param) * n_times + time]`.
    values: Vec<f64>,
}

impl SensitivityMatrix {
    pub fn get(&self, sensor: usize, param: usize, time: usize) -> f64 {
        let p = self.layout.len();
        self.values[(sensor * p + param) * self.times.len() + time]
    }

    /// Time series of one coefficient at one sensor.
    pub fn series(&self, sensor: usize, param: usize) -> &[f64] {
        let n = self.times.len();
        let start = (sensor * self.layout.len() + param) * n;
        &self.values[start..start + n]
    }

    pub fn layout(&self) -> ParameterLayout {
        self.layout
    }

    pub fn depths(&self) -> &[f64] {
        &self.depths
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Step Δp_j used for each parameter.
    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    /// Whether entries are scaled by p_j (units of K).
    pub fn is_reduced(&self) -> bool {
        self.reduced
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Central differences `[f(p + Δ e_j) − f(p − Δ e_j)] / (2Δ)` for each `j` with a
/// non-zero step. Columns with a zero step are left at zero.
///
/// Returns one vector per parameter.
pub fn central_differences<F>(f: F, p: &[f64], steps: &[f64]) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    assert_eq!(p.len(), steps.len());
    let columns: Vec<Result<Option<Vec<f64>>>> = (0..p.len())
        .into_par_iter()
        .map(|j| {
            let dp = steps[j];
            if dp == 0.0 {
                return Ok(None);
            }
            let wrap = |e: Error| Error::Sensitivity {
                index: j,
                source: Box::new(e),
            };
            let mut shifted = p.to_vec();
            shifted[j] = p[j] + dp;
            let plus = f(&shifted).map_err(wrap)?;
            shifted[j] = p[j] - dp;
            let minus = f(&shifted).map_err(wrap)?;
            Ok(Some(
                plus.iter()
                    .zip(&minus)
                    .map(|(a, b)| (a - b) / (2.0 * dp))
                    .collect(),
            ))
        })
        .collect();
    let mut out = Vec::with_capacity(p.len());
    let mut width = None;
    for c in &columns {
        if let Ok(Some(v)) = c {
            width = Some(v.len());
        }
    }
    for c in columns {
        match c? {
            Some(v) => out.push(v),
            None => out.push(vec![0.0; width.unwrap_or(0)]),
        }
    }
    Ok(out)
}

/// Sensitivities of the temperatures at `depths × times` to every component of
/// `params`, with `Δp_j = 10⁻²·p_j`. A trailing smoothness hyperparameter does not
/// enter the forward model and gets an all-zero column without extra solves.
///
/// `breakpoints` is the time partition of the surface coefficient.
pub fn sensitivities(
    model: &ForwardModel,
    params: &ParameterVector,
    breakpoints: &[f64],
    depths: &[f64],
    times: &[f64],
    reduced: bool,
) -> Result<SensitivityMatrix> {
    let layout = params.layout();
    let template = SurfaceCoefficient::new(breakpoints.to_vec(), params.h_values().to_vec())?;
    let n_phys = layout.n_physical();
    let p = params.values();
    let steps: Vec<f64> = p.iter().map(|&v| RELATIVE_STEP * v).collect();
    let mut solve_steps = steps.clone();
    for s in solve_steps.iter_mut().skip(n_phys) {
        *s = 0.0;
    }

    let predict = |q: &[f64]| -> Result<Vec<f64>> {
        let material = MaterialParams::new(q[0], q[1])?;
        let h = template.with_values(q[layout.h_range()].to_vec())?;
        model.predict(&material, &h, depths, times)
    };
    let columns = central_differences(predict, p, &solve_steps)?;

    let n_p = layout.len();
    let n_t = times.len();
    let mut values = vec![0.0; depths.len() * n_p * n_t];
    for (j, col) in columns.iter().enumerate() {
        let scale = if reduced { p[j] } else { 1.0 };
        for i in 0..depths.len() {
            for n in 0..n_t {
                values[(i * n_p + j) * n_t + n] = col.get(i * n_t + n).copied().unwrap_or(0.0) * scale;
            }
        }
    }
    Ok(SensitivityMatrix {
        layout,
        depths: depths.to_vec(),
        times: times.to_vec(),
        steps,
        reduced,
        values,
    })
}
