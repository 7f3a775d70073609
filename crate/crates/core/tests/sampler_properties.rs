use groundtherm::domain::ParameterLayout;
use groundtherm::inference::{
    run_chain, squared_differences, GaussianPrior, LogTarget, MHConfig, Posterior, PriorModel, SmoothnessPrior,
};

/// Standard normal in one dimension.
struct StdNormal {
    scale: Vec<f64>,
}

impl LogTarget for StdNormal {
    fn dim(&self) -> usize {
        1
    }

    fn log_density(&self, p: &[f64]) -> f64 {
        -0.5 * p[0] * p[0]
    }

    fn proposal_scale(&self) -> &[f64] {
        &self.scale
    }
}

fn bin(x: f64) -> usize {
    if x < -0.5 {
        0
    } else if x < 0.5 {
        1
    } else {
        2
    }
}

#[test]
fn transitions_between_outer_bins_balance() {
    let target = StdNormal { scale: vec![1.0] };
    let config = MHConfig {
        n_states: 400_000,
        step_radii: vec![3.0],
        seed: 5,
        burn_in: 0,
        thin: 1,
    };
    let chain = run_chain(&config, &target, &[0.0], vec!["x".into()]).unwrap();
    let x = chain.column(0);
    let mut counts = [[0u64; 3]; 3];
    for w in x.windows(2) {
        counts[bin(w[0])][bin(w[1])] += 1;
    }
    // jumps across the middle bin can happen in either direction without an
    // intervening visit, so their balance is a real test of reversibility
    let (forward, backward) = (counts[0][2] as f64, counts[2][0] as f64);
    assert!(forward > 1000.0 && backward > 1000.0);
    let sd = (forward + backward).sqrt();
    assert!((forward - backward).abs() < 4.0 * sd, "{forward} vs {backward}");
}

fn prior_only_roughness(gamma0: f64) -> f64 {
    let n = 8;
    let layout = ParameterLayout::new(n, true);
    let prior = PriorModel::Smoothness {
        material: GaussianPrior::new(vec![2.27, 2.1e6], vec![0.1135, 0.021e6], true).unwrap(),
        smoothness: SmoothnessPrior::new(n, gamma0).unwrap(),
        hyperprior: true,
    };
    let mut scale = vec![2.27, 2.1e6];
    scale.extend(vec![10.0; n]);
    scale.push(gamma0);
    let posterior = Posterior::new(layout, prior, None, scale.clone()).unwrap();
    let mut radii = vec![0.05, 0.01];
    radii.extend(vec![0.05; n]);
    radii.push(0.3);
    let config = MHConfig {
        n_states: 200_000,
        step_radii: radii,
        seed: 3,
        burn_in: 20_000,
        thin: 1,
    };
    let chain = run_chain(&config, &posterior, &scale, layout.names()).unwrap();
    let h = layout.h_range();
    let rows: Vec<f64> = chain.rows().skip(config.burn_in).map(|r| squared_differences(&r[h.clone()])).collect();
    rows.iter().sum::<f64>() / rows.len() as f64
}

#[test]
fn roughness_falls_as_the_smoothness_scale_grows() {
    let r: Vec<f64> = [2.22, 3.33, 22.22].iter().map(|&g| prior_only_roughness(g)).collect();
    assert!(r[0] > r[1] && r[1] > r[2], "{r:?}");
}
