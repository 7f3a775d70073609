//! Post-processing of Markov chains and temperature residuals.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::Chain;

/// Default early segment for the Geweke comparison.
pub const GEWEKE_FIRST: f64 = 0.10;
/// Default late segment for the Geweke comparison.
pub const GEWEKE_LAST: f64 = 0.50;
/// Window constant of the automatic IACT truncation.
pub const SOKAL_C: f64 = 5.0;
/// Fewest post-burn-in states accepted by the autocorrelation analysis.
pub const MIN_IACT_STATES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Fraction of accepted moves after burn-in.
    pub acceptance_rate: f64,
    pub burn_in: usize,
    pub n_states: usize,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Accepted moves over proposed moves, `accepted / (N_s − 1)` for an unthinned
/// chain.
pub fn acceptance_rate(chain: &Chain) -> f64 {
    rate(chain.accepted(), chain.thin())
}

fn rate(counts: &[u32], thin: usize) -> f64 {
    if counts.len() < 2 {
        return 0.0;
    }
    let n: u64 = counts[1..].iter().map(|&a| u64::from(a)).sum();
    n as f64 / ((counts.len() - 1) * thin) as f64
}

/// Mean and standard deviation (n − 1 denominator) of each parameter over the
/// states after `burn_in`.
pub fn summarize(chain: &Chain, burn_in: usize) -> Result<PosteriorSummary> {
    if burn_in >= chain.len() {
        return Err(Error::domain(format!(
            "burn-in {burn_in} leaves no states out of {}",
            chain.len()
        )));
    }
    let kept = chain.len() - burn_in;
    let d = chain.dim();
    let mut means = vec![0.0; d];
    let mut stds = vec![0.0; d];
    for j in 0..d {
        let col: Vec<f64> = (burn_in..chain.len()).map(|k| chain.row(k)[j]).collect();
        let m = mean(&col);
        means[j] = m;
        stds[j] = if kept > 1 {
            (col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (kept - 1) as f64).sqrt()
        } else {
            0.0
        };
    }
    Ok(PosteriorSummary {
        names: chain.names().to_vec(),
        mean: means,
        std: stds,
        acceptance_rate: rate(&chain.accepted()[burn_in..], chain.thin()),
        burn_in,
        n_states: chain.len(),
    })
}

/// Relative difference of means `|m_first − m_last| / |m_last|` between the first
/// `first_frac` and the last `last_frac` of a sequence.
pub fn geweke_series(x: &[f64], first_frac: f64, last_frac: f64) -> Result<f64> {
    let ok = |f: f64| f > 0.0 && f < 1.0;
    if !ok(first_frac) || !ok(last_frac) || first_frac + last_frac > 1.0 {
        return Err(Error::domain(format!(
            "segment fractions {first_frac} and {last_frac} must lie in (0, 1) without overlap"
        )));
    }
    let n = x.len();
    let n_first = (first_frac * n as f64).floor() as usize;
    let n_last = (last_frac * n as f64).floor() as usize;
    if n_first == 0 || n_last == 0 {
        return Err(Error::domain(format!("{n} states are too few for the Geweke segments")));
    }
    let a = mean(&x[..n_first]);
    let b = mean(&x[n - n_last..]);
    let diff = (a - b).abs();
    if diff == 0.0 {
        return Ok(0.0);
    }
    Ok(diff / b.abs())
}

/// Geweke relative difference for every parameter, on the states after `burn_in`.
pub fn geweke_relative_difference(chain: &Chain, burn_in: usize, first_frac: f64, last_frac: f64) -> Result<Vec<f64>> {
    (0..chain.dim())
        .map(|j| geweke_series(&chain.column(j)[burn_in.min(chain.len())..], first_frac, last_frac))
        .collect()
}

/// Biased autocovariance `γ_k = (1/n) Σ (x_i − x̄)(x_{i+k} − x̄)` for lags
/// `0..=max_lag`, computed by FFT. Lag 0 is evaluated directly.
pub fn autocovariance(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let max_lag = max_lag.min(n - 1);
    let m = mean(x);
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = x
        .iter()
        .map(|v| Complex::new(v - m, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(size)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    let scale = 1.0 / (size as f64 * n as f64);
    let mut out: Vec<f64> = buf[..=max_lag].iter().map(|c| c.re * scale).collect();
    out[0] = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Iact {
    pub tau: f64,
    /// Summation window W.
    pub window: usize,
}

/// Integrated autocorrelation time `1 + 2 Σ_{k=1}^{W} ρ_k` with the smallest
/// window satisfying `W ≥ c·τ(W)`.
pub fn integrated_autocorrelation_time(x: &[f64]) -> Result<Iact> {
    if x.len() < MIN_IACT_STATES {
        return Err(Error::domain(format!(
            "{} states are too few for an autocorrelation estimate (need {MIN_IACT_STATES})",
            x.len()
        )));
    }
    let gamma = autocovariance(x, x.len() - 1);
    if gamma[0] <= 0.0 || !gamma[0].is_finite() {
        return Err(Error::Degenerate("chain has zero variance".into()));
    }
    let mut tau = 1.0;
    for (w, g) in gamma.iter().enumerate().skip(1) {
        tau += 2.0 * g / gamma[0];
        if w as f64 >= SOKAL_C * tau {
            return Ok(Iact { tau, window: w });
        }
    }
    Ok(Iact {
        tau,
        window: gamma.len() - 1,
    })
}

/// Per-parameter autocorrelation sequences after `burn_in` and their Euclidean
/// norm across parameters at each lag. Parameters with zero variance contribute
/// zero.
pub fn autocorrelation_norm(chain: &Chain, burn_in: usize, max_lag: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let per: Vec<Vec<f64>> = (0..chain.dim())
        .map(|j| {
            let col = &chain.column(j)[burn_in.min(chain.len())..];
            let g = autocovariance(col, max_lag);
            match g.first() {
                Some(&g0) if g0 > 0.0 => g.iter().map(|v| v / g0).collect(),
                _ => vec![0.0; g.len()],
            }
        })
        .collect();
    let lags = per.iter().map(Vec::len).max().unwrap_or(0);
    let norm = (0..lags)
        .map(|k| per.iter().map(|s| s.get(k).map_or(0.0, |v| v * v)).sum::<f64>().sqrt())
        .collect();
    (per, norm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` increasing edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Freedman–Diaconis bin count, never fewer than ten.
pub fn freedman_diaconis_bins(x: &[f64]) -> usize {
    const FLOOR: usize = 10;
    if x.len() < 2 {
        return FLOOR;
    }
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (s.len() - 1) as f64;
        let i = pos.floor() as usize;
        let w = pos - i as f64;
        if i + 1 < s.len() {
            s[i] + w * (s[i + 1] - s[i])
        } else {
            s[i]
        }
    };
    let iqr = q(0.75) - q(0.25);
    let range = s[s.len() - 1] - s[0];
    if iqr <= 0.0 || range <= 0.0 {
        return FLOOR;
    }
    let width = 2.0 * iqr / (s.len() as f64).cbrt();
    ((range / width).ceil() as usize).max(FLOOR)
}

/// Histogram on `[lo, hi)` with equal-width bins; the right edge is closed so
/// that `hi` itself is counted. Values outside the range are dropped.
pub fn histogram_with_range(x: &[f64], lo: f64, hi: f64, bins: usize) -> Result<Histogram> {
    if bins == 0 || !(hi > lo) {
        return Err(Error::domain(format!("invalid histogram range [{lo}, {hi}] with {bins} bins")));
    }
    let width = (hi - lo) / bins as f64;
    let edges = (0..=bins).map(|i| lo + width * i as f64).collect();
    let mut counts = vec![0; bins];
    for &v in x {
        if v < lo || v > hi {
            continue;
        }
        let i = (((v - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    Ok(Histogram { edges, counts })
}

/// Histogram over the data range. A constant sequence gets a unit-wide range
/// centred on its value, so all mass lands in the middle bin.
pub fn histogram(x: &[f64], bins: Option<usize>) -> Result<Histogram> {
    if x.is_empty() {
        return Err(Error::domain("histogram of an empty sequence"));
    }
    let bins = bins.unwrap_or_else(|| freedman_diaconis_bins(x));
    let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if hi > lo {
        histogram_with_range(x, lo, hi, bins)
    } else {
        histogram_with_range(x, lo - 0.5, lo + 0.5, bins)
    }
}

/// Histogram of one chain parameter after `burn_in`.
pub fn chain_histogram(chain: &Chain, param: usize, burn_in: usize, bins: Option<usize>) -> Result<Histogram> {
    histogram(&chain.column(param)[burn_in.min(chain.len())..], bins)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub depths: Vec<f64>,
    pub times: Vec<f64>,
    /// Observed minus predicted, row-major by sensor.
    pub residuals: Vec<f64>,
    pub max_abs: Vec<f64>,
    /// Largest `|r| / |Y|` per sensor, in percent.
    pub max_relative_percent: Vec<f64>,
    /// Share of residuals with `|r| ≤ σ`.
    pub within_sigma: f64,
}

impl ResidualReport {
    pub fn sensor(&self, i: usize) -> &[f64] {
        let n = self.times.len();
        &self.residuals[i * n..(i + 1) * n]
    }
}

/// Residuals `Y − T` on a sensor × time grid (row-major by sensor).
pub fn residual_report(
    depths: &[f64],
    times: &[f64],
    observed: &[f64],
    predicted: &[f64],
    sigma: f64,
) -> Result<ResidualReport> {
    let n = depths.len() * times.len();
    if observed.len() != n || predicted.len() != n {
        return Err(Error::domain(format!(
            "expected {n} values, got {} observed and {} predicted",
            observed.len(),
            predicted.len()
        )));
    }
    let residuals: Vec<f64> = observed.iter().zip(predicted).map(|(y, t)| y - t).collect();
    let nt = times.len();
    let mut max_abs = vec![0.0; depths.len()];
    let mut max_rel = vec![0.0; depths.len()];
    for i in 0..depths.len() {
        for k in i * nt..(i + 1) * nt {
            let r = residuals[k].abs();
            max_abs[i] = f64::max(max_abs[i], r);
            if observed[k] != 0.0 {
                max_rel[i] = f64::max(max_rel[i], 100.0 * r / observed[k].abs());
            }
        }
    }
    let within = residuals.iter().filter(|r| r.abs() <= sigma).count();
    Ok(ResidualReport {
        depths: depths.to_vec(),
        times: times.to_vec(),
        residuals,
        max_abs,
        max_relative_percent: max_rel,
        within_sigma: if n == 0 { 1.0 } else { within as f64 / n as f64 },
    })
}
