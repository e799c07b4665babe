use std::sync::Arc;

use bathyflow::config::RunConfig;
use bathyflow::hamiltonian::{assemble_model, normal_form_chain};
use bathyflow::hierarchy::run_hierarchy;
use proptest::prelude::*;

fn config(mu: f64, a: f64) -> RunConfig {
    RunConfig::from_json(&format!(
        r#"{{
            "channel": {{"F": 1, "Fcal": -6, "d": 0.1, "mu": {mu:e}, "nu": 1, "Mcal": 1, "rho": 0.5}},
            "wave": {{"kappa": 2, "m_tilde": 1, "A": 2}},
            "bathymetry": {{"kind": "builtin", "nu": 1, "modes": [{{"l": 1, "a": [{a}, 0]}}, {{"l": 2, "a": [{b}, 0]}}]}},
            "run": {{"enforce_threshold": false}}
        }}"#,
        b = -0.3 * a
    ))
    .unwrap()
}

#[test]
fn config_to_probe() {
    let cfg = config(2e-7, 0.5);
    let checked = cfg.checked(None).unwrap();
    assert!(checked.threshold_ok);
    let bathy = cfg.build_bathymetry().unwrap();
    let state = run_hierarchy(&checked, &bathy, cfg.run.j_max, cfg.run.m_max, cfg.run.tolerances)
        .unwrap();
    // two bottom modes widen the lossless mode set to 1 + 2 * 2
    assert_eq!(state.modes.m_max, 5);
    let chain = normal_form_chain(&checked, cfg.run.nf_degree).unwrap();
    let model = assemble_model(chain, Some(Arc::new(state)));
    let i = 0.5 * model.g_interval.1;
    let t = model.earliest_time();
    let h1 = model.h1_sup(i, t, 32).unwrap();
    assert!(h1 > 0.0 && h1 < 1e-4, "{h1}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn layers_scale_with_powers_of_mu(mu in 1e-4f64..5e-3, a in 0.1f64..1.0) {
        let run = |mu: f64| {
            let cfg = config(mu, a);
            let checked = cfg.checked(None).unwrap();
            run_hierarchy(&checked, &cfg.build_bathymetry().unwrap(), 2, None, cfg.run.tolerances)
                .unwrap()
        };
        let (s, h) = (run(mu), run(0.5 * mu));
        for j in 1..=2 {
            let ratio = s.convergence.eps[j] / h.convergence.eps[j];
            prop_assert!((ratio / 2f64.powi(j as i32) - 1.0).abs() < 1e-9, "layer {}: {}", j, ratio);
        }
        for layer in &s.layers {
            prop_assert_eq!(layer.symmetry_violation(), 0.0);
        }
    }
}
