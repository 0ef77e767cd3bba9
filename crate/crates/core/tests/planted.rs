use hipmdp::gibbs::GibbsConfig;
use hipmdp::synthetic::{recovery_trial, PlantedSpec};

#[test]
fn planted_two_feature_model_is_recovered() {
    let cfg = GibbsConfig { iterations: 100, ..GibbsConfig::default() };
    let mut ok = 0;
    for seed in 0..5 {
        let out = recovery_trial(&PlantedSpec::two_extra(), seed, &cfg).unwrap();
        eprintln!(
            "seed {seed}: extra={} mse={:.5} (2 s2 = {:.5}) best it {}",
            out.extra_features,
            out.held_out_mse,
            2.0 * out.noise_variance,
            out.fit.iteration
        );
        if (1..=3).contains(&out.extra_features) && out.held_out_mse <= 2.0 * out.noise_variance {
            ok += 1;
        }
    }
    assert!(ok >= 4, "{ok}/5");
}

#[test]
fn data_without_instance_variation_keeps_the_baseline() {
    let cfg = GibbsConfig { iterations: 100, ..GibbsConfig::default() };
    let mut ok = 0;
    for seed in 0..5 {
        let out = recovery_trial(&PlantedSpec::baseline_only(), seed, &cfg).unwrap();
        eprintln!("seed {seed}: extra={} mse={:.5}", out.extra_features, out.held_out_mse);
        if out.extra_features == 0 {
            ok += 1;
        }
    }
    assert!(ok >= 4, "{ok}/5");
}
