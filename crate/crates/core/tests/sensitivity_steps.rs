use groundtherm::domain::{MaterialParams, ParameterVector, ReferenceScales, SurfaceCoefficient};
use groundtherm::forward::{ForwardModel, SolverSettings};
use groundtherm::sensitivity::{central_differences, sensitivities, RELATIVE_STEP};
use groundtherm::synthetic::DiurnalForcing;

const HORIZON: f64 = 28.0 * 3600.0;
const DEPTHS: [f64; 5] = [0.0, 0.01, 0.02, 0.03, 0.04];

fn default_twin() -> (ForwardModel, MaterialParams, SurfaceCoefficient, Vec<f64>) {
    let m = MaterialParams::new(1.35, 0.94e6).unwrap();
    let problem = DiurnalForcing::default().problem(0.05, HORIZON, m).unwrap();
    let refs = ReferenceScales::new(3600.0, 300.0, 2.27, 2.1e6, 10.0).unwrap();
    let model = ForwardModel::new(problem, refs, SolverSettings::new(51, 5.0)).unwrap();
    let h = SurfaceCoefficient::uniform(HORIZON, vec![12.65, 8.47, 10.86]).unwrap();
    let times = (1..=112).map(|k| k as f64 * 900.0).collect();
    (model, m, h, times)
}

#[test]
fn halving_the_step_changes_little() {
    let (model, m, h, times) = default_twin();
    let params = ParameterVector::pack(m, h.values(), None).unwrap();
    let p = params.values().to_vec();
    let bp = h.breakpoints().to_vec();
    let predict = |q: &[f64]| {
        let material = MaterialParams::new(q[0], q[1])?;
        let coeff = SurfaceCoefficient::new(bp.clone(), q[2..].to_vec())?;
        model.predict(&material, &coeff, &DEPTHS, &times)
    };
    let full: Vec<f64> = p.iter().map(|v| RELATIVE_STEP * v).collect();
    let half: Vec<f64> = full.iter().map(|s| 0.5 * s).collect();
    let a = central_differences(predict, &p, &full).unwrap();
    let b = central_differences(predict, &p, &half).unwrap();
    for j in 0..p.len() {
        // compare in reduced units so every column is on the kelvin scale
        let scale = a[j].iter().fold(0.0f64, |m, v| m.max(v.abs())) * p[j];
        let diff = a[j].iter().zip(&b[j]).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) * p[j];
        assert!(diff < 0.01 * scale, "parameter {j}: {diff} vs {scale}");
    }
}

#[test]
fn library_sensitivities_match_a_direct_difference() {
    let (model, m, h, times) = default_twin();
    let params = ParameterVector::pack(m, h.values(), None).unwrap();
    let x = sensitivities(&model, &params, h.breakpoints(), &DEPTHS, &times, true).unwrap();
    let dk = RELATIVE_STEP * m.conductivity;
    let up = model.predict(&MaterialParams::new(m.conductivity + dk, m.heat_capacity).unwrap(), &h, &DEPTHS, &times).unwrap();
    let down = model.predict(&MaterialParams::new(m.conductivity - dk, m.heat_capacity).unwrap(), &h, &DEPTHS, &times).unwrap();
    for s in 0..DEPTHS.len() {
        for n in 0..times.len() {
            let k = s * times.len() + n;
            let direct = m.conductivity * (up[k] - down[k]) / (2.0 * dk);
            assert!((x.get(s, 0, n) - direct).abs() <= 1e-9 * (1.0 + direct.abs()));
        }
    }
}
