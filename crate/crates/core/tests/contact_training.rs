use epidp_core::contact::{
    contact_from_counts, train_d, ConsumptionDistribution, ContactLoss, MixingVector, NationalAveraging,
    TrainingHyperparams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Four cities by ten categories of volumes, loosely shaped like the default
/// generator's output.
pub fn desk_counts() -> Vec<Vec<f64>> {
    let base = [20.0, 60.0, 30.0, 70.0, 80.0, 120.0, 25.0, 15.0, 90.0, 40.0];
    let merchants = [127.0, 355.0, 244.0, 275.0];
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    merchants
        .iter()
        .map(|m| base.iter().map(|b| b * m * 209.0 * rng.random_range(0.7..1.3)).collect())
        .collect()
}

#[test]
fn recovers_a_self_generated_target() {
    let counts = desk_counts();
    let mix = MixingVector::ones(5);
    let truth = ConsumptionDistribution::random(5, 10, 2024);
    let target = contact_from_counts(truth.matrix(), &mix, &counts, &NationalAveraging::Unweighted).unwrap();
    let hp = TrainingHyperparams {
        seed: 1,
        ..TrainingHyperparams::default()
    };
    let start = std::time::Instant::now();
    let out = train_d(&counts, &target, None, &mix, &NationalAveraging::Unweighted, &hp).unwrap();
    println!(
        "iterations {} initial {:e} final {:e} in {:?}",
        out.iterations,
        out.log[0].loss,
        out.loss,
        start.elapsed()
    );
    assert!(out.loss < 1e-3);
    assert!(out.iterations <= 5000);
    assert!(out.log.windows(2).all(|w| w[1].loss <= w[0].loss));
    ConsumptionDistribution::new(out.d.matrix().clone()).unwrap();
}

#[test]
fn numeric_gradient_is_self_consistent() {
    let counts = desk_counts();
    let mix = MixingVector::new(vec![1.0, 1.2, 0.9, 1.1, 0.8]).unwrap();
    let truth = ConsumptionDistribution::random(5, 10, 5);
    let avg = NationalAveraging::Unweighted;
    let target = contact_from_counts(truth.matrix(), &mix, &counts, &avg).unwrap();
    let loss = ContactLoss {
        mixing: &mix,
        city_counts: &counts,
        averaging: &avg,
        target: &target,
    };
    let d = ConsumptionDistribution::random(5, 10, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..5 {
        let (a, k) = (rng.random_range(0..5), rng.random_range(0..10));
        let h = 1e-6;
        let g1 = loss.partial(d.matrix(), a, k, h).unwrap();
        let g2 = loss.partial(d.matrix(), a, k, 2.0 * h).unwrap();
        assert!((g1 - g2).abs() <= 1e-4 * g1.abs().max(g2.abs()), "({a},{k}): {g1} vs {g2}");
    }
}
