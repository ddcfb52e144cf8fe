use gampsi::calibrate::mean_prevalence;
use gampsi_core::regime::RegimeConfig;
use gampsi_core::sim::{SimConfig, SparsityLevel};

/// Seeds disjoint from the pilot seeds the presets were calibrated on.
const FRESH_SEED: u64 = 10_000;

#[test]
fn presets_hit_their_sparsity_on_fresh_seeds() {
    for level in SparsityLevel::ALL {
        let sim = SimConfig {
            seed: FRESH_SEED,
            ..SimConfig::preset(level)
        };
        let p = mean_prevalence(&sim, &RegimeConfig::default(), 400).unwrap();
        println!("{level:?}: target {:.4}, measured {p:.4}", level.target());
        assert!(
            (p - level.target()).abs() <= 0.005,
            "{level:?}: target {}, measured {p}",
            level.target()
        );
    }
}
