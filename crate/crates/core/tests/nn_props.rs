#[path = "common/gen.rs"]
mod gen;
#[path = "common/oracle.rs"]
mod oracle;

use ccl_core::fold::fold_batchnorm;
use ccl_core::model::{forward_model, init_weights, Model};
use ccl_core::tensor::Tensor1D;
use ccl_core::zoo::{reference_config, ModelId};
use proptest::prelude::*;

fn max_abs_diff(config: &ccl_core::model::ArchConfig, seed: u64) -> f64 {
    let mut r = gen::rng(seed ^ 0x5eed);
    let w = init_weights(config, seed);
    let x = gen::window(&mut r);
    let got = forward_model(&Tensor1D::from_window(&x).unwrap(), config, &w).unwrap();
    (got as f64 - oracle::forward(config, &w, &x)).abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn crn_family_matches_oracle(seed in any::<u64>()) {
        let cfg = gen::crn_config(&mut gen::rng(seed));
        let d = max_abs_diff(&cfg, seed);
        prop_assert!(d <= 1e-5, "diff {d} for {:?}", cfg.layers);
    }

    #[test]
    fn mixed_padding_stacks_match_oracle(seed in any::<u64>()) {
        let cfg = gen::conv_stack(&mut gen::rng(seed));
        let d = max_abs_diff(&cfg, seed);
        prop_assert!(d <= 1e-5, "diff {d} for {:?}", cfg.layers);
    }

    #[test]
    fn folding_preserves_logits(seed in any::<u64>()) {
        let mut r = gen::rng(seed);
        let cfg = gen::crn_config(&mut r);
        let w = init_weights(&cfg, seed);
        let (fcfg, fw) = fold_batchnorm(&cfg, &w).unwrap();
        prop_assert!(fcfg.layers.len() < cfg.layers.len());
        let x = Tensor1D::from_window(&gen::window(&mut r)).unwrap();
        let a = forward_model(&x, &cfg, &w).unwrap();
        let b = forward_model(&x, &fcfg, &fw).unwrap();
        prop_assert!((a - b).abs() <= 1e-5, "{a} vs {b}");
    }

    #[test]
    fn preallocated_path_is_bit_identical(seed in any::<u64>()) {
        let mut r = gen::rng(seed);
        let cfg = gen::crn_config(&mut r);
        let w = init_weights(&cfg, seed);
        let mut model = Model::new(cfg.clone(), w.clone()).unwrap();
        for _ in 0..3 {
            let x = gen::window(&mut r);
            let a = forward_model(&Tensor1D::from_window(&x).unwrap(), &cfg, &w).unwrap();
            let b = model.infer(&x);
            let c = model.infer(&x);
            prop_assert_eq!(a.to_bits(), b.to_bits());
            prop_assert_eq!(b.to_bits(), c.to_bits());
        }
    }
}

#[test]
fn reference_models_match_oracle() {
    for id in ModelId::ALL {
        let cfg = reference_config(id);
        for seed in 0..10 {
            assert!(max_abs_diff(&cfg, seed) <= 1e-5, "{id} seed {seed}");
        }
    }
}
