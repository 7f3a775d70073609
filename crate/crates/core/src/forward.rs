//! Dimensionless transform and DuFort–Frankel solution of the slab problem.
//!
//! The interior update is the three-level scheme
//!
//! ```text
//! (1 + 2r)·U_j^{n+1} = (1 − 2r)·U_j^{n−1} + 2r·(U_{j+1}^n + U_{j−1}^n),   r = Fo·k/C*·Δt*/Δx*²
//! ```
//!
//! started from one forward-Euler step (split into stable substeps). The surface
//! node satisfies the one-sided flux balance
//! `k·(U_1 − U_0)/Δx* = h*·Bi·(U_0 − U∞) − q*` and the bottom node is pinned to `U_g`.
//!
//! Air temperature, radiation and deep temperature are interpolated at the new
//! time level. The surface coefficient applied over a step is the one in force at
//! the start of that step, so no level at or before `t_i` depends on `h_i`.

use crate::domain::{
    lerp, DepthProfile, MaterialParams, MeasurementSet, PhysicalProblem, ReferenceScales,
    SurfaceCoefficient, TimeSeries,
};
use crate::error::{Error, Result};

/// The problem after scaling by a set of [`ReferenceScales`].
#[derive(Debug, Clone)]
pub struct DimensionlessProblem {
    /// k = κ/κ_ref
    pub conductivity: f64,
    /// C* = C/C_ref
    pub heat_capacity: f64,
    pub fourier: f64,
    pub biot: f64,
    /// U∞(t*)
    pub air_temperature: TimeSeries,
    /// q∞*(t*)
    pub net_radiation: TimeSeries,
    /// U_g(t*)
    pub deep_temperature: TimeSeries,
    /// h*(t*)
    pub h: SurfaceCoefficient,
    /// U_in(x*)
    pub initial_profile: DepthProfile,
    pub final_time: f64,
    /// Scales and depth needed to return to physical units.
    pub scales: ReferenceScales,
    pub depth: f64,
}

impl DimensionlessProblem {
    /// Effective diffusion coefficient Fo·k/C* of the scaled equation.
    pub fn diffusion(&self) -> f64 {
        self.fourier * self.conductivity / self.heat_capacity
    }
}

pub fn nondimensionalize(
    problem: &PhysicalProblem,
    refs: &ReferenceScales,
    h: &SurfaceCoefficient,
) -> Result<DimensionlessProblem> {
    refs.validate()?;
    let tf = problem.final_time;
    if (h.final_time() - tf).abs() > 1e-9 * tf {
        return Err(Error::domain(format!(
            "surface coefficient ends at {} s but the problem ends at {tf} s",
            h.final_time()
        )));
    }
    let l = problem.depth;
    let t_ref = refs.time;
    let temp_ref = refs.temperature;
    let flux_scale = l / (refs.conductivity * temp_ref);

    let scale_time = |t: f64| t / t_ref;
    let air = problem
        .air_temperature
        .map_times(scale_time)?
        .map_values(|v| v / temp_ref)?;
    let rad = problem
        .net_radiation
        .map_times(scale_time)?
        .map_values(|v| v * flux_scale)?;
    let deep = problem
        .deep_temperature
        .map_times(scale_time)?
        .map_values(|v| v / temp_ref)?;
    let h_star = SurfaceCoefficient::new(
        h.breakpoints().iter().map(|&t| t / t_ref).collect(),
        h.values().iter().map(|&v| v / refs.h).collect(),
    )?;
    let init = &problem.initial_profile;
    let initial_profile = DepthProfile::new(
        init.depths().iter().map(|&x| x / l).collect(),
        init.values().iter().map(|&v| v / temp_ref).collect(),
    )?;

    Ok(DimensionlessProblem {
        conductivity: problem.material.conductivity / refs.conductivity,
        heat_capacity: problem.material.heat_capacity / refs.heat_capacity,
        fourier: refs.fourier(l),
        biot: refs.biot(l),
        air_temperature: air,
        net_radiation: rad,
        deep_temperature: deep,
        h: h_star,
        initial_profile,
        final_time: tf / t_ref,
        scales: *refs,
        depth: l,
    })
}

/// How the second starting level of the three-level scheme is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Bootstrap {
    /// One explicit Euler step of size Δt.
    ForwardEuler,
    /// Explicit Euler split into the fewest substeps with diffusion number ≤ 1/2.
    #[default]
    SubsteppedEuler,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Number of grid nodes J + 1, including both boundaries.
    pub nodes: usize,
    /// Time step, s.
    pub dt: f64,
    pub bootstrap: Bootstrap,
    /// Store every n-th level in a [`TemperatureField`] (the last level is always kept).
    pub record_every: usize,
}

impl SolverSettings {
    pub const DEFAULT_NODES: usize = 101;

    pub fn new(nodes: usize, dt: f64) -> Self {
        Self {
            nodes,
            dt,
            bootstrap: Bootstrap::default(),
            record_every: 1,
        }
    }

    /// Time step giving `Fo·Δt*/Δx*² ≤ 1/2` for the reference material, adjusted
    /// down so that it divides `final_time`.
    pub fn reference_stable(nodes: usize, depth: f64, final_time: f64, refs: &ReferenceScales) -> Result<Self> {
        if nodes < 4 {
            return Err(Error::domain(format!("need at least 4 nodes, got {nodes}")));
        }
        let dx = depth / (nodes - 1) as f64;
        let dt_max = 0.5 * dx * dx * refs.heat_capacity / refs.conductivity;
        let steps = (final_time / dt_max).ceil().max(1.0);
        Ok(Self::new(nodes, final_time / steps))
    }

    pub fn with_record_every(mut self, every: usize) -> Self {
        self.record_every = every;
        self
    }

    pub fn with_bootstrap(mut self, bootstrap: Bootstrap) -> Self {
        self.bootstrap = bootstrap;
        self
    }

    /// Number of time steps covering `final_time`.
    pub fn steps(&self, final_time: f64) -> Result<usize> {
        if self.nodes < 4 {
            return Err(Error::domain(format!("need at least 4 nodes, got {}", self.nodes)));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::domain(format!("time step must be positive, got {}", self.dt)));
        }
        if self.record_every == 0 {
            return Err(Error::domain("record_every must be at least 1"));
        }
        let n = (final_time / self.dt).round();
        if n < 1.0 || (n * self.dt - final_time).abs() > 1e-6 * final_time {
            return Err(Error::domain(format!(
                "time step {} s does not divide the horizon {final_time} s",
                self.dt
            )));
        }
        Ok(n as usize)
    }
}

/// Physical time of each solver level.
fn level_times(final_time: f64, steps: usize) -> Vec<f64> {
    let dt = final_time / steps as f64;
    (0..=steps)
        .map(|n| if n == steps { final_time } else { n as f64 * dt })
        .collect()
}

fn node_positions(depth: f64, nodes: usize) -> Vec<f64> {
    let j = nodes - 1;
    let dx = depth / j as f64;
    (0..nodes)
        .map(|i| if i == j { depth } else { i as f64 * dx })
        .collect()
}

/// Bracketing index and weight of `x` on a sorted grid; exact grid points give weight 0.
pub(crate) fn locate(grid: &[f64], x: f64) -> Option<(usize, f64)> {
    let last = grid.len() - 1;
    let span = grid[last] - grid[0];
    let tol = 1e-12 * span.abs().max(1.0);
    if x < grid[0] - tol || x > grid[last] + tol {
        return None;
    }
    let i = grid.partition_point(|&g| g <= x).saturating_sub(1);
    if i >= last {
        return Some((last, 0.0));
    }
    let w = (x - grid[i]) / (grid[i + 1] - grid[i]);
    if w <= 1e-9 {
        Some((i, 0.0))
    } else if w >= 1.0 - 1e-9 {
        Some((i + 1, 0.0))
    } else {
        Some((i, w))
    }
}

/// Boundary data interpolated onto the solver levels (dimensionless).
#[derive(Debug, Clone)]
struct LevelData {
    times: Vec<f64>,
    air: Vec<f64>,
    radiation: Vec<f64>,
    deep: Vec<f64>,
}

fn sample_on(series: &TimeSeries, times: &[f64]) -> Vec<f64> {
    // times are sorted, so walk a cursor instead of searching each time
    let ts = series.times();
    let vs = series.values();
    let mut k = 0;
    times
        .iter()
        .map(|&t| {
            let t = t.clamp(ts[0], ts[ts.len() - 1]);
            while k + 2 < ts.len() && ts[k + 1] <= t {
                k += 1;
            }
            if t == ts[k] {
                vs[k]
            } else if t >= ts[k + 1] {
                vs[k + 1]
            } else {
                lerp(vs[k], vs[k + 1], (t - ts[k]) / (ts[k + 1] - ts[k]))
            }
        })
        .collect()
}

impl LevelData {
    fn new(dimless: &DimensionlessProblem, steps: usize) -> Self {
        let times = level_times(dimless.final_time, steps);
        Self {
            air: sample_on(&dimless.air_temperature, &times),
            radiation: sample_on(&dimless.net_radiation, &times),
            deep: sample_on(&dimless.deep_temperature, &times),
            times,
        }
    }
}

/// h* in force at the start of each step.
fn h_per_step(h: &SurfaceCoefficient, times: &[f64]) -> Vec<f64> {
    let b = h.breakpoints();
    let v = h.values();
    let mut i = 0;
    times[..times.len() - 1]
        .iter()
        .map(|&t| {
            while i + 1 < v.len() && b[i + 1] <= t {
                i += 1;
            }
            v[i]
        })
        .collect()
}

/// Surface node as `U_0 = w·U_1 + c`. Neither weight depends on the interior
/// state, so the division stays off the step-to-step dependency chain.
#[inline]
fn robin_weights(k_over_dx: f64, beta: f64, u_air: f64, q: f64) -> (f64, f64) {
    let inv = 1.0 / (k_over_dx + beta);
    (k_over_dx * inv, (beta * u_air + q) * inv)
}

fn check_level(u: &[f64], level: usize) -> Result<()> {
    match u.iter().position(|v| !v.is_finite()) {
        Some(node) => Err(Error::NumericalFailure { node, level }),
        None => Ok(()),
    }
}

/// Levels between full finiteness scans.
const CHECK_EVERY: usize = 64;

/// The parameter-dependent part of a scaled problem: k, C* and h* per step.
struct Coefficients {
    conductivity: f64,
    heat_capacity: f64,
    h_steps: Vec<f64>,
}

impl Coefficients {
    fn of(dimless: &DimensionlessProblem, levels: &LevelData) -> Self {
        Self {
            conductivity: dimless.conductivity,
            heat_capacity: dimless.heat_capacity,
            h_steps: h_per_step(&dimless.h, &levels.times),
        }
    }
}

/// Runs the scheme and hands every level (dimensionless) to `visit`. The material
/// and surface coefficient of `dimless` are replaced by `coeffs`. A few levels
/// past a numerical failure may be visited before the error is returned.
fn march(
    dimless: &DimensionlessProblem,
    coeffs: &Coefficients,
    settings: &SolverSettings,
    levels: &LevelData,
    visit: impl FnMut(usize, &[f64]),
) -> Result<()> {
    march_impl(dimless, coeffs, settings, levels, false, visit)
}

fn first_failure(
    dimless: &DimensionlessProblem,
    coeffs: &Coefficients,
    settings: &SolverSettings,
    levels: &LevelData,
) -> Error {
    match march_impl(dimless, coeffs, settings, levels, true, |_, _| {}) {
        Err(e) => e,
        Ok(()) => Error::domain("non-finite temperatures that a checked rerun did not reproduce"),
    }
}

fn march_impl(
    dimless: &DimensionlessProblem,
    coeffs: &Coefficients,
    settings: &SolverSettings,
    levels: &LevelData,
    check_all: bool,
    mut visit: impl FnMut(usize, &[f64]),
) -> Result<()> {
    let nodes = settings.nodes;
    let j_last = nodes - 1;
    let steps = levels.times.len() - 1;
    let dx = 1.0 / j_last as f64;
    let dt = dimless.final_time / steps as f64;
    let r = dimless.fourier * coeffs.conductivity / coeffs.heat_capacity * dt / (dx * dx);
    let k_over_dx = coeffs.conductivity / dx;
    let bi = dimless.biot;
    let h_steps = &coeffs.h_steps;

    let mut older: Vec<f64> = (0..nodes)
        .map(|j| dimless.initial_profile.eval(if j == j_last { 1.0 } else { j as f64 * dx }))
        .collect();
    check_level(&older, 0)?;
    visit(0, &older);
    if steps == 0 {
        return Ok(());
    }

    // first level: explicit Euler
    let substeps = match settings.bootstrap {
        Bootstrap::ForwardEuler => 1,
        Bootstrap::SubsteppedEuler => {
            let m = (r / 0.5).ceil();
            if !(m <= 1e7) {
                return Err(Error::domain(format!(
                    "diffusion number {r} too large for the Euler start-up step"
                )));
            }
            (m as usize).max(1)
        }
    };
    let rs = r / substeps as f64;
    let beta0 = h_steps[0] * bi;
    let mut cur = older.clone();
    let mut scratch = older.clone();
    for s in 1..=substeps {
        for j in 1..j_last {
            scratch[j] = cur[j] + rs * (cur[j + 1] - 2.0 * cur[j] + cur[j - 1]);
        }
        let (air, rad, deep) = if s == substeps {
            (levels.air[1], levels.radiation[1], levels.deep[1])
        } else {
            let t = levels.times[0] + dt * s as f64 / substeps as f64;
            (
                dimless.air_temperature.interpolate(t)?,
                dimless.net_radiation.interpolate(t)?,
                dimless.deep_temperature.interpolate(t)?,
            )
        };
        scratch[j_last] = deep;
        let (w, c) = robin_weights(k_over_dx, beta0, air, rad);
        scratch[0] = w * scratch[1] + c;
        std::mem::swap(&mut cur, &mut scratch);
    }
    check_level(&cur, 1)?;
    visit(1, &cur);

    let a = (1.0 - 2.0 * r) / (1.0 + 2.0 * r);
    let b = 2.0 * r / (1.0 + 2.0 * r);
    let mut next = vec![0.0; nodes];
    for n in 1..steps {
        {
            let interior = next[1..j_last].iter_mut().zip(&older[1..j_last]).zip(cur.windows(3));
            for ((out, &prev), w) in interior {
                *out = a * prev + b * (w[0] + w[2]);
            }
        }
        next[j_last] = levels.deep[n + 1];
        let (w, c) = robin_weights(k_over_dx, h_steps[n] * bi, levels.air[n + 1], levels.radiation[n + 1]);
        next[0] = w * next[1] + c;
        // non-finite values persist at interior nodes, so a periodic scan finds
        // every failure; the exact first level is located by a checked rerun
        if check_all {
            check_level(&next, n + 1)?;
        } else if ((n + 1) % CHECK_EVERY == 0 || n + 1 == steps) && next.iter().any(|v| !v.is_finite()) {
            return Err(first_failure(dimless, coeffs, settings, levels));
        }
        visit(n + 1, &next);
        // rotate: older <- cur <- next
        std::mem::swap(&mut older, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(())
}

/// Nodal temperatures in K.
#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureField {
    positions: Vec<f64>,
    times: Vec<f64>,
    /// Level-major: `values[level * nodes + node]`.
    values: Vec<f64>,
}

impl TemperatureField {
    /// Node depths, m.
    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    /// Stored time levels, s.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn n_nodes(&self) -> usize {
        self.positions.len()
    }

    pub fn n_levels(&self) -> usize {
        self.times.len()
    }

    pub fn get(&self, node: usize, level: usize) -> f64 {
        self.values[level * self.positions.len() + node]
    }

    pub fn level(&self, level: usize) -> &[f64] {
        let n = self.positions.len();
        &self.values[level * n..(level + 1) * n]
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

/// Solves the scaled problem and returns the field in K.
pub fn solve_forward(dimless: &DimensionlessProblem, settings: &SolverSettings) -> Result<TemperatureField> {
    let steps = settings.steps(dimless.final_time * dimless.scales.time)?;
    let levels = LevelData::new(dimless, steps);
    solve_with_levels(dimless, &Coefficients::of(dimless, &levels), settings, &levels)
}

fn solve_with_levels(
    dimless: &DimensionlessProblem,
    coeffs: &Coefficients,
    settings: &SolverSettings,
    levels: &LevelData,
) -> Result<TemperatureField> {
    let steps = levels.times.len() - 1;
    let tf = dimless.final_time * dimless.scales.time;
    let all_times = level_times(tf, steps);
    let every = settings.record_every;
    let keep = |n: usize| n.is_multiple_of(every) || n == steps;
    let kept = (0..=steps).filter(|&n| keep(n)).count();
    let temp_ref = dimless.scales.temperature;
    let mut values = Vec::with_capacity(kept * settings.nodes);
    let mut times = Vec::with_capacity(kept);
    march(dimless, coeffs, settings, levels, |n, u| {
        if keep(n) {
            times.push(all_times[n]);
            values.extend(u.iter().map(|&v| v * temp_ref));
        }
    })?;
    Ok(TemperatureField {
        positions: node_positions(dimless.depth, settings.nodes),
        times,
        values,
    })
}

/// Interpolation stencil for sensors at `depths` on a grid of node positions.
fn depth_stencil(positions: &[f64], depths: &[f64]) -> Result<Vec<(usize, f64)>> {
    depths
        .iter()
        .map(|&x| {
            locate(positions, x)
                .ok_or_else(|| Error::domain(format!("sensor depth {x} m outside the slab")))
        })
        .collect()
}

fn time_stencil(times: &[f64], obs: &[f64]) -> Result<Vec<(usize, f64)>> {
    obs.iter()
        .map(|&t| {
            locate(times, t)
                .ok_or_else(|| Error::domain(format!("observation time {t} s outside the solved horizon")))
        })
        .collect()
}

#[inline]
fn at_depth(level: &[f64], (j, w): (usize, f64), scale: f64) -> f64 {
    if w == 0.0 {
        level[j] * scale
    } else {
        lerp(level[j] * scale, level[j + 1] * scale, w)
    }
}

/// Bilinear interpolation of the field at every (depth, time) pair.
///
/// Returns a row-major `depths.len() × times.len()` matrix in K.
pub fn predict_at(field: &TemperatureField, depths: &[f64], times: &[f64]) -> Result<Vec<f64>> {
    let xs = depth_stencil(&field.positions, depths)?;
    let ts = time_stencil(&field.times, times)?;
    let n_obs = times.len();
    let mut out = vec![0.0; depths.len() * n_obs];
    for (i, &xw) in xs.iter().enumerate() {
        for (k, &(n, wt)) in ts.iter().enumerate() {
            let a = at_depth(field.level(n), xw, 1.0);
            out[i * n_obs + k] = if wt == 0.0 {
                a
            } else {
                lerp(a, at_depth(field.level(n + 1), xw, 1.0), wt)
            };
        }
    }
    Ok(out)
}

/// Field values at the sensors and observation times of `sensors`.
pub fn predict_at_sensors(field: &TemperatureField, sensors: &MeasurementSet) -> Result<Vec<f64>> {
    predict_at(field, sensors.depths(), sensors.times())
}

/// A forward problem with fixed data, grid and scales, evaluated for many
/// parameter values. Boundary data are interpolated onto the solver levels once.
#[derive(Debug, Clone)]
pub struct ForwardModel {
    problem: PhysicalProblem,
    refs: ReferenceScales,
    settings: SolverSettings,
    levels: LevelData,
    level_times: Vec<f64>,
    /// Scaled data; its material and surface coefficient are placeholders.
    base: DimensionlessProblem,
}

impl ForwardModel {
    pub fn new(problem: PhysicalProblem, refs: ReferenceScales, settings: SolverSettings) -> Result<Self> {
        refs.validate()?;
        let steps = settings.steps(problem.final_time)?;
        let probe = SurfaceCoefficient::new(vec![0.0, problem.final_time], vec![refs.h])?;
        let base = nondimensionalize(&problem, &refs, &probe)?;
        let levels = LevelData::new(&base, steps);
        Ok(Self {
            level_times: level_times(problem.final_time, steps),
            problem,
            refs,
            settings,
            levels,
            base,
        })
    }

    pub fn problem(&self) -> &PhysicalProblem {
        &self.problem
    }

    pub fn refs(&self) -> &ReferenceScales {
        &self.refs
    }

    pub fn settings(&self) -> &SolverSettings {
        &self.settings
    }

    /// Physical times of all solver levels.
    pub fn level_times(&self) -> &[f64] {
        &self.level_times
    }

    pub fn dimensionless(&self, material: &MaterialParams, h: &SurfaceCoefficient) -> Result<DimensionlessProblem> {
        nondimensionalize(&self.problem.with_material(*material), &self.refs, h)
    }

    fn coefficients(&self, material: &MaterialParams, h: &SurfaceCoefficient) -> Result<Coefficients> {
        let tf = self.problem.final_time;
        if (h.final_time() - tf).abs() > 1e-9 * tf {
            return Err(Error::domain(format!(
                "surface coefficient ends at {} s but the problem ends at {tf} s",
                h.final_time()
            )));
        }
        let h_ref = self.refs.h;
        let mut h_steps = h_per_step(h, &self.level_times);
        for v in h_steps.iter_mut() {
            *v /= h_ref;
        }
        Ok(Coefficients {
            conductivity: material.conductivity / self.refs.conductivity,
            heat_capacity: material.heat_capacity / self.refs.heat_capacity,
            h_steps,
        })
    }

    pub fn solve(&self, material: &MaterialParams, h: &SurfaceCoefficient) -> Result<TemperatureField> {
        let coeffs = self.coefficients(material, h)?;
        solve_with_levels(&self.base, &coeffs, &self.settings, &self.levels)
    }

    /// Visits every solver level with temperatures in K.
    pub fn march(
        &self,
        material: &MaterialParams,
        h: &SurfaceCoefficient,
        mut visit: impl FnMut(usize, f64, &[f64]),
    ) -> Result<()> {
        let coeffs = self.coefficients(material, h)?;
        let temp_ref = self.refs.temperature;
        let mut buf = vec![0.0; self.settings.nodes];
        march(&self.base, &coeffs, &self.settings, &self.levels, |n, u| {
            for (b, &v) in buf.iter_mut().zip(u) {
                *b = v * temp_ref;
            }
            visit(n, self.level_times[n], &buf);
        })
    }

    /// Predicted temperatures at `depths` × `times` (row-major, K) without
    /// storing the whole field. Agrees bit-for-bit with
    /// [`predict_at`] applied to [`solve`](Self::solve) at `record_every = 1`.
    pub fn predict(
        &self,
        material: &MaterialParams,
        h: &SurfaceCoefficient,
        depths: &[f64],
        times: &[f64],
    ) -> Result<Vec<f64>> {
        let positions = node_positions(self.problem.depth, self.settings.nodes);
        let xs = depth_stencil(&positions, depths)?;
        let ts = time_stencil(&self.level_times, times)?;
        let n_obs = times.len();
        let m = depths.len();
        let mut out = vec![0.0; m * n_obs];
        let mut prev = vec![0.0; m];
        let mut now = vec![0.0; m];
        let temp_ref = self.refs.temperature;

        // observations sorted by time, so a single cursor suffices
        let mut order: Vec<usize> = (0..n_obs).collect();
        order.sort_by_key(|&k| (ts[k].0, ts[k].1 != 0.0));
        let mut next = 0;

        // only levels an observation touches need the sensor values
        let mut needed = vec![false; self.level_times.len()];
        for &(lvl, wt) in &ts {
            needed[lvl] = true;
            if wt != 0.0 {
                needed[lvl + 1] = true;
            }
        }

        let coeffs = self.coefficients(material, h)?;
        march(&self.base, &coeffs, &self.settings, &self.levels, |n, u| {
            if !needed[n] {
                return;
            }
            for (v, &xw) in now.iter_mut().zip(&xs) {
                *v = at_depth(u, xw, temp_ref);
            }
            while next < n_obs {
                let k = order[next];
                let (lvl, wt) = ts[k];
                if lvl == n && wt == 0.0 {
                    for i in 0..m {
                        out[i * n_obs + k] = now[i];
                    }
                } else if lvl + 1 == n && wt != 0.0 {
                    for i in 0..m {
                        out[i * n_obs + k] = lerp(prev[i], now[i], wt);
                    }
                } else {
                    break;
                }
                next += 1;
            }
            std::mem::swap(&mut prev, &mut now);
        })?;
        Ok(out)
    }

    /// Predictions at the sensors and times of a measurement set.
    pub fn predict_measurements(
        &self,
        material: &MaterialParams,
        h: &SurfaceCoefficient,
        sensors: &MeasurementSet,
    ) -> Result<Vec<f64>> {
        self.predict(material, h, sensors.depths(), sensors.times())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn uniform_problem(temp: f64, depth: f64, tf: f64, material: MaterialParams) -> PhysicalProblem {
        PhysicalProblem::new(
            depth,
            tf,
            material,
            TimeSeries::constant(0.0, tf, temp).unwrap(),
            TimeSeries::constant(0.0, tf, 0.0).unwrap(),
            TimeSeries::constant(0.0, tf, temp).unwrap(),
            DepthProfile::uniform(temp).unwrap(),
        )
        .unwrap()
    }

    fn unit_refs() -> ReferenceScales {
        ReferenceScales::new(1.0, 1.0, 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn identity_scaling() {
        let m = MaterialParams::new(2.27, 2.1e6).unwrap();
        let p = uniform_problem(300.0, 0.05, 3600.0, m);
        let refs = ReferenceScales::new(3600.0, 300.0, 2.27, 2.1e6, 10.0).unwrap();
        let h = SurfaceCoefficient::new(vec![0.0, 3600.0], vec![10.0]).unwrap();
        let d = nondimensionalize(&p, &refs, &h).unwrap();
        assert_eq!(d.conductivity, 1.0);
        assert_eq!(d.heat_capacity, 1.0);
        assert_eq!(d.h.values(), &[1.0]);
        assert_eq!(d.final_time, 1.0);
    }

    #[test]
    fn fourier_and_biot_by_hand() {
        let refs = ReferenceScales::new(3600.0, 300.0, 2.27, 2.1e6, 10.0).unwrap();
        // 2.27·3600/(2.1e6·0.0025) = 8172/5250
        assert!((refs.fourier(0.05) - 1.556_571_428_571_428_5).abs() < 1e-12);
        // 10·0.05/2.27
        assert!((refs.biot(0.05) - 0.220_264_317_180_616_74).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_references() {
        let m = MaterialParams::new(1.0, 1.0).unwrap();
        let p = uniform_problem(300.0, 1.0, 1.0, m);
        let h = SurfaceCoefficient::new(vec![0.0, 1.0], vec![1.0]).unwrap();
        let mut refs = unit_refs();
        refs.heat_capacity = 0.0;
        assert!(matches!(nondimensionalize(&p, &refs, &h), Err(Error::Domain(_))));
        assert!(ReferenceScales::new(1.0, -1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn settings_validation() {
        assert!(SolverSettings::new(3, 0.1).steps(1.0).is_err());
        assert!(SolverSettings::new(10, 0.0).steps(1.0).is_err());
        assert!(SolverSettings::new(10, 0.3).steps(1.0).is_err());
        assert_eq!(SolverSettings::new(10, 0.25).steps(1.0).unwrap(), 4);
        let refs = ReferenceScales::new(3600.0, 300.0, 2.27, 2.1e6, 10.0).unwrap();
        let s = SolverSettings::reference_stable(101, 0.05, 100_800.0, &refs).unwrap();
        let dx = 0.05 / 100.0;
        let number = refs.fourier(0.05) * (s.dt / refs.time) / (dx / 0.05_f64).powi(2);
        assert!(number <= 0.5 + 1e-12, "{number}");
        s.steps(100_800.0).unwrap();
    }

    #[test]
    fn equilibrium_is_fixed() {
        let m = MaterialParams::new(2.27, 2.1e6).unwrap();
        let p = uniform_problem(300.0, 0.05, 7200.0, m);
        let refs = ReferenceScales::new(3600.0, 300.0, 2.27, 2.1e6, 10.0).unwrap();
        let h = SurfaceCoefficient::new(vec![0.0, 7200.0], vec![10.0]).unwrap();
        let d = nondimensionalize(&p, &refs, &h).unwrap();
        let s = SolverSettings::new(21, 10.0);
        let f = solve_forward(&d, &s).unwrap();
        let (lo, hi) = f.min_max();
        assert!((lo - 300.0).abs() < 1e-10 && (hi - 300.0).abs() < 1e-10);
    }

    #[test]
    fn first_level_is_initial_profile() {
        let m = MaterialParams::new(1.0, 1.0).unwrap();
        let mut p = uniform_problem(0.0, 1.0, 0.1, m);
        p.initial_profile = DepthProfile::new(vec![0.0, 1.0], vec![1.0, 3.0]).unwrap();
        let h = SurfaceCoefficient::new(vec![0.0, 0.1], vec![1.0]).unwrap();
        let d = nondimensionalize(&p, &unit_refs(), &h).unwrap();
        let f = solve_forward(&d, &SolverSettings::new(11, 0.01)).unwrap();
        for (j, &x) in f.positions().iter().enumerate() {
            assert_eq!(f.get(j, 0), p.initial_profile.eval(x));
        }
    }

    #[test]
    fn non_finite_is_reported() {
        let m = MaterialParams::new(1.0, 1.0).unwrap();
        let mut p = uniform_problem(0.0, 1.0, 1.0, m);
        let xs: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        p.initial_profile = DepthProfile::new(xs.clone(), xs.iter().map(|&x| (PI * x).sin()).collect()).unwrap();
        let h = SurfaceCoefficient::new(vec![0.0, 1.0], vec![1.0]).unwrap();
        let mut d = nondimensionalize(&p, &unit_refs(), &h).unwrap();
        d.conductivity = 1e300;
        d.heat_capacity = 1e-300;
        let s = SolverSettings::new(11, 0.01).with_bootstrap(Bootstrap::ForwardEuler);
        let err = solve_forward(&d, &s).unwrap_err();
        assert!(matches!(err, Error::NumericalFailure { level: 1, .. }), "{err}");
        let err = solve_forward(&d, &SolverSettings::new(11, 0.01)).unwrap_err();
        assert!(matches!(err, Error::Domain(_)), "{err}");
    }

    #[test]
    fn interpolation_identities() {
        let field = TemperatureField {
            positions: vec![0.0, 0.5, 1.0],
            times: vec![0.0, 1.0],
            values: vec![10.0, 20.0, 30.0, 11.0, 21.0, 31.0],
        };
        let p = predict_at(&field, &[0.5, 0.25, 1.0], &[0.0, 1.0, 0.5]).unwrap();
        assert_eq!(p[0], 20.0);
        assert_eq!(p[1], 21.0);
        assert_eq!(p[3], 15.0);
        assert_eq!(p[6], 30.0);
        assert_eq!(p[7], 31.0);
        assert_eq!(p[5], 15.5);
        assert!(predict_at(&field, &[1.5], &[0.0]).is_err());
        assert!(predict_at(&field, &[0.5], &[2.0]).is_err());
    }

    #[test]
    fn node_sensor_returns_stored_value() {
        let m = MaterialParams::new(1.35, 0.94e6).unwrap();
        let tf = 3600.0;
        let mut p = uniform_problem(295.0, 0.05, tf, m);
        p.initial_profile = DepthProfile::new(vec![0.0, 0.05], vec![290.0, 300.0]).unwrap();
        p.air_temperature = TimeSeries::new(vec![0.0, tf], vec![290.0, 296.0]).unwrap();
        let refs = ReferenceScales::new(3600.0, 300.0, 2.27, 2.1e6, 10.0).unwrap();
        let h = SurfaceCoefficient::new(vec![0.0, tf], vec![10.0]).unwrap();
        let model = ForwardModel::new(p, refs, SolverSettings::new(51, 5.0)).unwrap();
        let f = model.solve(&m, &h).unwrap();
        let pred = predict_at(&f, &[0.03], &[1800.0]).unwrap();
        assert_eq!(pred[0].to_bits(), f.get(30, 360).to_bits());
    }

    #[test]
    fn streaming_prediction_matches_field() {
        let m = MaterialParams::new(1.35, 0.94e6).unwrap();
        let tf = 7200.0;
        let mut p = uniform_problem(295.0, 0.05, tf, m);
        p.initial_profile = DepthProfile::new(vec![0.0, 0.05], vec![290.0, 300.0]).unwrap();
        p.air_temperature = TimeSeries::new(vec![0.0, tf], vec![290.0, 296.0]).unwrap();
        p.net_radiation = TimeSeries::new(vec![0.0, 3000.0, tf], vec![0.0, 400.0, -50.0]).unwrap();
        let refs = ReferenceScales::new(3600.0, 300.0, 2.27, 2.1e6, 10.0).unwrap();
        let h = SurfaceCoefficient::new(vec![0.0, 1800.0, tf], vec![12.0, 7.0]).unwrap();
        let model = ForwardModel::new(p, refs, SolverSettings::new(51, 7.5)).unwrap();
        let depths = [0.0, 0.0125, 0.02, 0.0333, 0.05];
        let times = [0.0, 3.0, 900.0, 1801.0, 3333.3, 7200.0];
        let streamed = model.predict(&m, &h, &depths, &times).unwrap();
        let field = model.solve(&m, &h).unwrap();
        let direct = predict_at(&field, &depths, &times).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&streamed), bits(&direct));
    }

    #[test]
    fn strided_field_agrees_on_recorded_levels() {
        let m = MaterialParams::new(1.0, 1.0).unwrap();
        let mut p = uniform_problem(0.0, 1.0, 0.5, m);
        p.initial_profile = DepthProfile::new(vec![0.0, 1.0], vec![1.0, 0.0]).unwrap();
        let h = SurfaceCoefficient::new(vec![0.0, 0.5], vec![3.0]).unwrap();
        let d = nondimensionalize(&p, &unit_refs(), &h).unwrap();
        let full = solve_forward(&d, &SolverSettings::new(11, 0.005)).unwrap();
        let strided = solve_forward(&d, &SolverSettings::new(11, 0.005).with_record_every(7)).unwrap();
        assert_eq!(strided.n_levels(), 100 / 7 + 2);
        assert_eq!(strided.level(1), full.level(7));
        assert_eq!(strided.level(strided.n_levels() - 1), full.level(100));
    }

    #[test]
    fn sine_mode_decays_at_the_analytic_rate() {
        // coarse smoke check; the refinement study lives in the acceptance suite
        let m = MaterialParams::new(1.0, 1.0).unwrap();
        let tf = 0.05;
        let mut p = uniform_problem(0.0, 1.0, tf, m);
        let xs: Vec<f64> = (0..=200).map(|i| i as f64 / 200.0).collect();
        p.initial_profile = DepthProfile::new(xs.clone(), xs.iter().map(|&x| (PI * x).sin()).collect()).unwrap();
        let h = SurfaceCoefficient::new(vec![0.0, tf], vec![1e12]).unwrap();
        let d = nondimensionalize(&p, &unit_refs(), &h).unwrap();
        let s = SolverSettings::reference_stable(41, 1.0, tf, &unit_refs()).unwrap();
        let f = solve_forward(&d, &s).unwrap();
        let j = 20;
        let exact = (-PI * PI * tf).exp();
        assert!((f.get(j, f.n_levels() - 1) - exact).abs() < 5e-3);
    }
}
