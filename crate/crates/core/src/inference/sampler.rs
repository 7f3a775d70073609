//! Random-walk Metropolis–Hastings with a uniform box proposal.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// A density known up to a constant, together with the scale of each coordinate
/// used to express the proposal radius.
pub trait LogTarget: Sync {
    fn dim(&self) -> usize;

    fn log_density(&self, p: &[f64]) -> f64;

    /// Per-coordinate unit of the proposal radius (the prior means in the
    /// heat-transfer posterior).
    fn proposal_scale(&self) -> &[f64];
}

#[derive(Debug, Clone, PartialEq)]
pub struct MHConfig {
    /// Number of stored states N_s, including the initial state.
    pub n_states: usize,
    /// Proposal radius ω_j as a fraction of the coordinate scale.
    pub step_radii: Vec<f64>,
    pub seed: u64,
    /// Stored states discarded before computing statistics.
    pub burn_in: usize,
    /// Metropolis–Hastings transitions between stored states (1 keeps every state).
    pub thin: usize,
}

impl MHConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.n_states == 0 {
            return Err(Error::domain("chain needs at least one state"));
        }
        if self.thin == 0 {
            return Err(Error::domain("thinning interval must be at least 1"));
        }
        if self.burn_in >= self.n_states {
            return Err(Error::domain(format!(
                "burn-in {} must be shorter than the chain ({})",
                self.burn_in, self.n_states
            )));
        }
        if self.step_radii.len() != dim {
            return Err(Error::domain(format!(
                "{} step radii for {dim} parameters",
                self.step_radii.len()
            )));
        }
        if let Some(w) = self.step_radii.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::domain(format!("step radius must be non-negative, got {w}")));
        }
        Ok(())
    }
}

/// Stored states of one Markov chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    names: Vec<String>,
    /// Row-major `n_states × dim`.
    samples: Vec<f64>,
    /// Accepted moves among the `thin` transitions leading to each row.
    accepted: Vec<u32>,
    log_posterior: Vec<f64>,
    seed: u64,
    stream: u64,
    thin: usize,
}

impl Chain {
    /// Assembles a chain from stored rows. `accepted[0]` refers to the initial
    /// state and is ignored by the acceptance rate.
    pub fn from_parts(
        names: Vec<String>,
        samples: Vec<f64>,
        accepted: Vec<u32>,
        log_posterior: Vec<f64>,
        seed: u64,
        stream: u64,
        thin: usize,
    ) -> Result<Self> {
        let dim = names.len();
        let n = accepted.len();
        if dim == 0 || samples.len() != n * dim || log_posterior.len() != n || n == 0 || thin == 0 {
            return Err(Error::domain("inconsistent chain dimensions"));
        }
        if let Some(k) = accepted.iter().skip(1).position(|&a| a as usize > thin) {
            return Err(Error::domain(format!(
                "row {} records more accepted moves than the thinning interval {thin}",
                k + 1
            )));
        }
        Ok(Self {
            names,
            samples,
            accepted,
            log_posterior,
            seed,
            stream,
            thin,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn len(&self) -> usize {
        self.accepted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accepted.is_empty()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        let d = self.dim();
        &self.samples[k * d..(k + 1) * d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.chunks_exact(self.dim())
    }

    /// All states of one parameter.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// Accepted-move counts per row; with `thin = 1` these are 0/1 flags.
    pub fn accepted(&self) -> &[u32] {
        &self.accepted
    }

    /// Whether any move was accepted on the way to row `k`.
    pub fn moved(&self, k: usize) -> bool {
        self.accepted[k] > 0
    }

    pub fn thin(&self) -> usize {
        self.thin
    }

    pub fn log_posterior(&self) -> &[f64] {
        &self.log_posterior
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Chain without its first `n` states.
    pub fn skip(&self, n: usize) -> Chain {
        let n = n.min(self.len());
        let d = self.dim();
        Chain {
            names: self.names.clone(),
            samples: self.samples[n * d..].to_vec(),
            accepted: self.accepted[n..].to_vec(),
            log_posterior: self.log_posterior[n..].to_vec(),
            seed: self.seed,
            stream: self.stream,
            thin: self.thin,
        }
    }

    /// Same chain with every value of parameter `j` mapped through `f`.
    pub fn map_column(&self, j: usize, f: impl Fn(f64) -> f64) -> Chain {
        let mut c = self.clone();
        let d = c.dim();
        for row in c.samples.chunks_exact_mut(d) {
            row[j] = f(row[j]);
        }
        c
    }
}

/// Candidate `p_j + ω_j·s_j·u_j`, `u_j ~ U[−1, 1]`, written into `out`.
pub fn propose<R: Rng + ?Sized>(p: &[f64], radii: &[f64], scale: &[f64], rng: &mut R, out: &mut [f64]) {
    for (((o, &x), &w), &s) in out.iter_mut().zip(p).zip(radii).zip(scale) {
        let u: f64 = rng.random_range(-1.0..=1.0);
        *o = x + w * s * u;
    }
}

/// `min(1, exp(candidate − current))` for a symmetric proposal; an infeasible
/// candidate is never accepted.
pub fn acceptance_probability(candidate: f64, current: f64) -> f64 {
    if candidate == f64::NEG_INFINITY || candidate.is_nan() {
        return 0.0;
    }
    if current == f64::NEG_INFINITY || current.is_nan() {
        return 1.0;
    }
    (candidate - current).exp().min(1.0)
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Runs one chain of `config.n_states` states from `initial`.
pub fn run_chain<T: LogTarget + ?Sized>(config: &MHConfig, target: &T, initial: &[f64], names: Vec<String>) -> Result<Chain> {
    run_chain_on_stream(config, target, initial, names, 0)
}

fn run_chain_on_stream<T: LogTarget + ?Sized>(
    config: &MHConfig,
    target: &T,
    initial: &[f64],
    names: Vec<String>,
    stream: u64,
) -> Result<Chain> {
    let dim = target.dim();
    config.validate(dim)?;
    if initial.len() != dim || names.len() != dim {
        return Err(Error::domain(format!("initial state and names must have {dim} entries")));
    }
    let scale = target.proposal_scale();
    let mut current = initial.to_vec();
    let mut current_lp = target.log_density(&current);
    if !current_lp.is_finite() {
        return Err(Error::domain(format!(
            "initial state has non-finite log-posterior {current_lp}"
        )));
    }

    let n = config.n_states;
    let mut samples = Vec::with_capacity(n * dim);
    let mut accepted = Vec::with_capacity(n);
    let mut trace = Vec::with_capacity(n);
    samples.extend_from_slice(&current);
    accepted.push(0);
    trace.push(current_lp);

    let mut rng = rng_for(config.seed, stream);
    let mut candidate = vec![0.0; dim];
    for _ in 1..n {
        let mut moves = 0;
        for _ in 0..config.thin {
            propose(&current, &config.step_radii, scale, &mut rng, &mut candidate);
            let lp = target.log_density(&candidate);
            let alpha = acceptance_probability(lp, current_lp);
            let u: f64 = rng.random();
            if u < alpha {
                current.copy_from_slice(&candidate);
                current_lp = lp;
                moves += 1;
            }
        }
        samples.extend_from_slice(&current);
        accepted.push(moves);
        trace.push(current_lp);
    }
    Chain::from_parts(names, samples, accepted, trace, config.seed, stream, config.thin)
}

/// Runs `count` independent chains concurrently; chain `k` uses random stream `k`
/// of the configured seed.
pub fn run_chains<T: LogTarget + ?Sized>(
    config: &MHConfig,
    target: &T,
    initial: &[f64],
    names: Vec<String>,
    count: usize,
) -> Result<Vec<Chain>> {
    (0..count as u64)
        .into_par_iter()
        .map(|k| run_chain_on_stream(config, target, initial, names.clone(), k))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Gauss2 {
        scale: Vec<f64>,
    }

    impl LogTarget for Gauss2 {
        fn dim(&self) -> usize {
            2
        }
        fn log_density(&self, p: &[f64]) -> f64 {
            -0.5 * (p[0] * p[0] + p[1] * p[1])
        }
        fn proposal_scale(&self) -> &[f64] {
            &self.scale
        }
    }

    fn names() -> Vec<String> {
        vec!["a".into(), "b".into()]
    }

    fn config(n: usize, w: f64, seed: u64) -> MHConfig {
        MHConfig {
            n_states: n,
            step_radii: vec![w; 2],
            seed,
            burn_in: 0,
            thin: 1,
        }
    }

    #[test]
    fn acceptance_values() {
        assert_eq!(acceptance_probability(-3.0, -3.0), 1.0);
        assert!((acceptance_probability(0.5f64.ln(), 0.0) - 0.5).abs() < 1e-15);
        assert_eq!(acceptance_probability(f64::NEG_INFINITY, 0.0), 0.0);
        assert_eq!(acceptance_probability(f64::NEG_INFINITY, f64::NEG_INFINITY), 0.0);
        assert_eq!(acceptance_probability(2.0, 1.0), 1.0);
    }

    #[test]
    fn zero_radius_keeps_state() {
        let mut rng = rng_for(1, 0);
        let p = [2.27, 2.1e6, 10.0];
        let mut out = [0.0; 3];
        propose(&p, &[0.0; 3], &[2.27, 2.1e6, 10.0], &mut rng, &mut out);
        assert_eq!(out.map(f64::to_bits), p.map(f64::to_bits));

        let t = Gauss2 { scale: vec![1.0, 1.0] };
        let c = run_chain(&config(50, 0.0, 3), &t, &[0.3, -0.2], names()).unwrap();
        assert!(c.accepted()[1..].iter().all(|&a| a == 1));
        assert!(c.rows().all(|r| r == [0.3, -0.2]));
    }

    #[test]
    fn proposals_stay_in_the_box() {
        let mut rng = rng_for(7, 0);
        let p = [2.27, 2.1e6];
        let w = [0.02, 0.05];
        let s = [2.27, 2.1e6];
        let mut out = [0.0; 2];
        for _ in 0..10_000 {
            propose(&p, &w, &s, &mut rng, &mut out);
            for j in 0..2 {
                assert!((out[j] - p[j]).abs() <= w[j] * s[j] * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn proposal_increments_are_centred() {
        let mut rng = rng_for(11, 0);
        let p = [1.0, 5.0];
        let w = [0.5, 0.1];
        let s = [1.0, 10.0];
        let n = 100_000;
        let mut out = [0.0; 2];
        let mut sums = [0.0; 2];
        for _ in 0..n {
            propose(&p, &w, &s, &mut rng, &mut out);
            for j in 0..2 {
                sums[j] += out[j] - p[j];
            }
        }
        for j in 0..2 {
            let half = w[j] * s[j];
            let se = half / 3f64.sqrt() / (n as f64).sqrt();
            assert!((sums[j] / n as f64).abs() < 3.0 * se);
        }
    }

    #[test]
    fn rejected_rows_repeat_their_predecessor() {
        let t = Gauss2 { scale: vec![1.0, 1.0] };
        let c = run_chain(&config(5_000, 2.0, 5), &t, &[0.0, 0.0], names()).unwrap();
        let mut moved = 0;
        for k in 1..c.len() {
            let same = c.row(k) == c.row(k - 1);
            if !c.moved(k) {
                assert!(same);
            }
            if !same {
                moved += 1;
                assert!(c.moved(k));
            }
        }
        let n_acc = c.accepted()[1..].iter().filter(|&&a| a == 1).count();
        // a continuous proposal almost surely differs from the current state
        assert_eq!(n_acc, moved);
        assert!(n_acc > 0 && n_acc < c.len() - 1);
    }

    #[test]
    fn chains_are_reproducible() {
        let t = Gauss2 { scale: vec![1.0, 1.0] };
        let a = run_chain(&config(2_000, 1.0, 42), &t, &[0.0, 0.0], names()).unwrap();
        let b = run_chain(&config(2_000, 1.0, 42), &t, &[0.0, 0.0], names()).unwrap();
        assert_eq!(a, b);
        let c = run_chain(&config(2_000, 1.0, 43), &t, &[0.0, 0.0], names()).unwrap();
        assert_ne!(a, c);
        let many = run_chains(&config(2_000, 1.0, 42), &t, &[0.0, 0.0], names(), 3).unwrap();
        assert_eq!(many[0], a);
        assert_ne!(many[1], many[2]);
    }

    #[test]
    fn shifting_the_log_density_changes_nothing() {
        struct Shifted(Gauss2, f64);
        impl LogTarget for Shifted {
            fn dim(&self) -> usize {
                2
            }
            fn log_density(&self, p: &[f64]) -> f64 {
                self.0.log_density(p) + self.1
            }
            fn proposal_scale(&self) -> &[f64] {
                self.0.proposal_scale()
            }
        }
        let base = Gauss2 { scale: vec![1.0, 1.0] };
        let a = run_chain(&config(3_000, 1.5, 9), &base, &[0.0, 0.0], names()).unwrap();
        let b = run_chain(
            &config(3_000, 1.5, 9),
            &Shifted(Gauss2 { scale: vec![1.0, 1.0] }, -17.25),
            &[0.0, 0.0],
            names(),
        )
        .unwrap();
        assert_eq!(a.accepted(), b.accepted());
    }

    #[test]
    fn thinning_keeps_every_kth_state() {
        let t = Gauss2 { scale: vec![1.0, 1.0] };
        let full = run_chain(&config(31, 1.0, 4), &t, &[0.0, 0.0], names()).unwrap();
        let mut cfg = config(11, 1.0, 4);
        cfg.thin = 3;
        let thin = run_chain(&cfg, &t, &[0.0, 0.0], names()).unwrap();
        assert_eq!(thin.thin(), 3);
        for k in 0..11 {
            assert_eq!(thin.row(k), full.row(3 * k));
            let moves: u32 = if k == 0 { 0 } else { full.accepted()[3 * k - 2..=3 * k].iter().sum() };
            assert_eq!(thin.accepted()[k], moves);
        }
    }

    #[test]
    fn invalid_configurations() {
        let t = Gauss2 { scale: vec![1.0, 1.0] };
        let mut c = config(10, 0.1, 1);
        c.thin = 0;
        assert!(run_chain(&c, &t, &[0.0, 0.0], names()).is_err());
        let t = Gauss2 { scale: vec![1.0, 1.0] };
        let mut c = config(10, 0.1, 1);
        c.burn_in = 10;
        assert!(run_chain(&c, &t, &[0.0, 0.0], names()).is_err());
        let mut c = config(10, 0.1, 1);
        c.step_radii = vec![0.1];
        assert!(run_chain(&c, &t, &[0.0, 0.0], names()).is_err());
        let mut c = config(10, 0.1, 1);
        c.step_radii[1] = -0.1;
        assert!(run_chain(&c, &t, &[0.0, 0.0], names()).is_err());
        assert!(run_chain(&config(0, 0.1, 1), &t, &[0.0, 0.0], names()).is_err());
    }

    #[test]
    fn infeasible_start_is_rejected() {
        struct Half(Vec<f64>);
        impl LogTarget for Half {
            fn dim(&self) -> usize {
                1
            }
            fn log_density(&self, p: &[f64]) -> f64 {
                if p[0] > 0.0 {
                    -p[0]
                } else {
                    f64::NEG_INFINITY
                }
            }
            fn proposal_scale(&self) -> &[f64] {
                &self.0
            }
        }
        let cfg = MHConfig {
            n_states: 10,
            step_radii: vec![0.1],
            seed: 0,
            burn_in: 0,
            thin: 1,
        };
        assert!(run_chain(&cfg, &Half(vec![1.0]), &[-1.0], vec!["x".into()]).is_err());
        let c = run_chain(&cfg, &Half(vec![1.0]), &[0.01], vec!["x".into()]).unwrap();
        assert!(c.rows().all(|r| r[0] > 0.0));
    }
}
