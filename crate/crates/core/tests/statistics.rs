use statrs::distribution::{ChiSquared, ContinuousCDF};

use rws_core::curb::minimal_k_curb_blocks;
use rws_core::engine::sample_play;
use rws_core::stats::{
    concentration_curve, ergodicity_decay, estimate_invariant, occupancy_fraction, variance_scaling,
    w1_marginal,
};
use rws_core::{exact_play_distribution, simulate_trajectory, Game, Role, RwsParams, StatePoint, StreamSeed};

fn mp() -> Game {
    Game::builtin("matching-pennies").unwrap()
}

/// Pearson statistic of `counts` against `probs` and its upper tail.
fn chi_square(counts: &[u64], probs: &[f64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let stat: f64 = counts
        .iter()
        .zip(probs)
        .map(|(&c, &p)| {
            let e = p * n as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    let df = (counts.len() - 1) as f64;
    1.0 - ChiSquared::new(df).unwrap().cdf(stat)
}

#[test]
fn sampled_plays_follow_the_exact_law() {
    let g = Game::builtin("unstable-rps").unwrap();
    let p = RwsParams::new(0.9, 7, 0.1).unwrap();
    let opp = [0.2, 0.5, 0.3];
    let exact = exact_play_distribution(&g, Role::One, &opp, &p).unwrap();
    let mut rng = StreamSeed::new(17, 0).rng();
    let mut counts = [0u64; 3];
    for _ in 0..200_000 {
        counts[sample_play(&g, Role::One, &opp, &p, &mut rng)] += 1;
    }
    assert!(chi_square(&counts, &exact) > 0.001, "{counts:?} vs {exact:?}");
}

#[test]
fn invariant_estimates_agree_across_seeds() {
    let p = RwsParams::new(0.99, 20, 0.05).unwrap();
    let start = StatePoint::uniform(2, 2);
    let a = estimate_invariant(&mp(), &p, &start, 1000, 10_000, 100, StreamSeed::new(1, 0)).unwrap();
    let b = estimate_invariant(&mp(), &p, &start, 1000, 10_000, 100, StreamSeed::new(2, 0)).unwrap();
    for c in 0..4 {
        let d = w1_marginal(&a.marginal(c), &b.marginal(c)).unwrap();
        assert!(d < 0.02, "coordinate {c}: {d}");
    }
    let again = estimate_invariant(&mp(), &p, &start, 1000, 10_000, 100, StreamSeed::new(1, 0)).unwrap();
    assert_eq!(a, again);
}

#[test]
fn unburnt_samples_start_at_the_fixed_point() {
    let p = RwsParams::new(0.999, 21, 0.05).unwrap();
    let x = StatePoint::uniform(2, 2);
    let m = estimate_invariant(&mp(), &p, &x, 0, 20, 1, StreamSeed::new(4, 0)).unwrap();
    assert!(m.samples.iter().all(|s| s.dist_inf(&x) <= 0.02));
}

#[test]
fn ergodicity_examples() {
    let p = RwsParams::new(0.99, 20, 0.05).unwrap();
    let (a, b) = (StatePoint::corner(2, 2, 0, 0), StatePoint::corner(2, 2, 1, 1));
    let same = ergodicity_decay(&mp(), &p, [&a, &a], [StreamSeed::new(5, 0); 2], 500, 5000).unwrap();
    assert!(same.distances.iter().all(|&d| d < 1e-12));

    let seeds = [StreamSeed::new(5, 0), StreamSeed::new(5, 1)];
    let r = ergodicity_decay(&mp(), &p, [&a, &b], seeds, 2000, 40_000).unwrap();
    assert_eq!(r.distances.len(), 20);
    assert!(r.fit.unwrap().slope < 0.0);

    let noise = ergodicity_decay(&mp(), &p.with_epsilon(1.0), [&a, &b], seeds, 2000, 20_000).unwrap();
    // windows after the first forget the starts entirely
    assert!(noise.distances[1..].iter().all(|&d| d < 0.05), "{:?}", noise.distances);

    assert!(ergodicity_decay(&mp(), &p, [&a, &b], seeds, 300, 1000).is_err());
}

#[test]
fn occupancy_is_monotone_in_delta() {
    let g = Game::builtin("coordination").unwrap();
    let p = RwsParams::new(0.95, 5, 0.2).unwrap();
    let blocks = minimal_k_curb_blocks(&g, 5).unwrap();
    let t = simulate_trajectory(&StatePoint::uniform(2, 2), &g, &p, 5000, StreamSeed::new(8, 0)).unwrap();
    let mut last = 0.0;
    for delta in [0.0, 0.05, 0.1, 0.2, 0.4, 0.6, 1.0] {
        let f = occupancy_fraction(&t, &blocks, delta);
        assert!((0.0..=1.0).contains(&f));
        assert!(f >= last);
        last = f;
    }
    assert_eq!(last, 1.0);
}

#[test]
fn concentration_is_monotone_in_eta() {
    let p = RwsParams::new(0.95, 21, 0.05).unwrap();
    let etas = [0.0, 0.01, 0.02, 0.05, 0.1, 0.2, 2.0];
    let c = concentration_curve(&mp(), &p, &[0.95, 0.99], &etas, 2000, StreamSeed::new(9, 0), None).unwrap();
    for rows in c.rows.chunks(etas.len()) {
        for w in rows.windows(2) {
            assert!(w[1].probability <= w[0].probability + 2.0 * w[0].stderr.max(w[1].stderr));
        }
        assert_eq!(rows[0].probability, 1.0);
        assert_eq!(rows[etas.len() - 1].probability, 0.0);
    }
}

#[test]
fn variance_shrinks_with_memory() {
    let p = RwsParams::new(0.9, 21, 0.05).unwrap();
    let t = variance_scaling(&mp(), &p, &[0.9, 0.99, 0.999], 4000, StreamSeed::new(10, 0)).unwrap();
    for w in t.rows.windows(2) {
        assert!(w[1].var < w[0].var);
    }
    let ratios: Vec<f64> = t.rows.iter().map(|r| r.ratio).collect();
    let (lo, hi) = ratios.iter().fold((f64::MAX, 0.0f64), |(l, h), &r| (l.min(r), h.max(r)));
    assert!(hi / lo < 3.0, "{ratios:?}");
}
