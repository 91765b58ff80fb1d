use evosnn_core::genome::{random_genome, GenomeConfig};
use evosnn_core::variation::{polynomial_mutation, two_point_crossover, VariationParams};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn configs() -> impl Strategy<Value = GenomeConfig> {
    (1usize..5, 2usize..21, 1usize..4).prop_map(|(l, b, ops)| GenomeConfig::new(l, b, ops).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn children_are_valid_and_conserve_genes(cfg in configs(), s1 in any::<u64>(), s2 in any::<u64>(), eta in 0.0f64..30.0) {
        let a = random_genome(&cfg, s1).unwrap();
        let b = random_genome(&cfg, s2).unwrap();
        let params = VariationParams { eta, mutation_probability: Some(0.2), ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(s1 ^ s2);
        let (c, d) = two_point_crossover(&a, &b, &params, &mut rng).unwrap();
        prop_assert!(c.is_valid() && d.is_valid());
        for i in 0..a.len() {
            let mut parents = [a.genes()[i], b.genes()[i]];
            let mut kids = [c.genes()[i], d.genes()[i]];
            parents.sort_unstable();
            kids.sort_unstable();
            prop_assert_eq!(parents, kids);
        }
        let m = polynomial_mutation(&c, &params, &mut rng);
        prop_assert!(m.is_valid(), "{:?}", m.validate());
    }
}
