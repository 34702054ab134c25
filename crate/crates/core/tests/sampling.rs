use std::collections::BTreeSet;

use mblbfgs_core::sampling::{
    intersect_sorted, plan_fault, plan_strategy1_epoch, reshard, FaultSampler, PlanSource, Sampler, SamplingMode,
    Strategy1Sampler, Strategy2Sampler,
};
use mblbfgs_core::verification::{check_fault_responders, check_strategy2_uniformity};
use mblbfgs_core::{NodeLayout, SeededRng};
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn is_sorted_unique(v: &[usize]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

proptest! {
    #[test]
    fn strategy1_epoch_invariants(n in 20usize..400, r in 0.05..0.6f64, o in 0.05..0.3f64, seed in any::<u64>()) {
        let Ok(sampler) = Strategy1Sampler::new(n, r, o) else { return Ok(()) };
        let sizes = sampler.sizes();
        let plans = plan_strategy1_epoch(n, r, o, &mut SeededRng::new(seed)).unwrap();
        let mut covered = BTreeSet::new();
        for (k, p) in plans.iter().enumerate() {
            prop_assert!(is_sorted_unique(&p.batch));
            prop_assert!(p.batch.len() <= sizes.batch);
            prop_assert!(p.overlap_next.iter().all(|i| p.batch.binary_search(i).is_ok()));
            prop_assert!(intersect_sorted(&p.overlap_prev, &p.overlap_next).is_empty() || sizes.batch == n);
            covered.extend(p.batch.iter().copied());
            if let Some(next) = plans.get(k + 1) {
                prop_assert_eq!(p.batch.len(), sizes.batch);
                prop_assert_eq!(p.overlap_next.len(), sizes.overlap);
                prop_assert_eq!(&intersect_sorted(&p.batch, &next.batch), &p.overlap_next);
                prop_assert_eq!(&next.overlap_prev, &p.overlap_next);
            }
        }
        prop_assert!(plans[0].overlap_prev.is_empty());
        prop_assert!(plans.last().unwrap().overlap_next.is_empty());
        prop_assert_eq!(covered.len(), n);
    }

    #[test]
    fn strategy2_sizes_and_containment(n in 10usize..300, r in 0.1..1.0f64, o in 0.05..0.9f64, seed in any::<u64>()) {
        let Ok(mut s) = Strategy2Sampler::new(n, r, o) else { return Ok(()) };
        let sizes = s.sizes();
        let mut rng = SeededRng::new(seed);
        let mut prev: Vec<usize> = Vec::new();
        for _ in 0..20 {
            let p = s.next_plan(&mut rng);
            prop_assert_eq!(p.batch.len(), sizes.batch);
            prop_assert_eq!(p.overlap_next.len(), sizes.overlap);
            prop_assert!(is_sorted_unique(&p.batch) && is_sorted_unique(&p.overlap_next));
            prop_assert!(p.overlap_next.iter().all(|i| p.batch.binary_search(i).is_ok()));
            prop_assert_eq!(&p.overlap_prev, &prev);
            prev = p.overlap_next.clone();
        }
    }
}

#[test]
fn strategy1_epochs_chain_without_cross_epoch_overlap() {
    let mut s = Strategy1Sampler::new(100, 0.2, 0.2).unwrap();
    let mut rng = SeededRng::new(3);
    let plans: Vec<_> = (0..30).map(|_| s.next_plan(&mut rng)).collect();
    let mut epoch_starts = 0;
    for w in plans.windows(2) {
        let (PlanSource::Strategy1 { epoch: a }, PlanSource::Strategy1 { epoch: b }) = (&w[0].source, &w[1].source)
        else {
            panic!("strategy 1 plans expected")
        };
        if a != b {
            epoch_starts += 1;
            assert!(w[0].overlap_next.is_empty() && w[1].overlap_prev.is_empty());
        }
    }
    assert!(epoch_starts >= 4);
}

fn strategy2_counts(seed: u64, draws: usize) -> [u32; 100] {
    let mut s = Strategy2Sampler::new(100, 0.1, 0.2).unwrap();
    let mut rng = SeededRng::new(seed);
    let mut counts = [0u32; 100];
    for _ in 0..draws {
        for &i in &s.next_plan(&mut rng).batch {
            counts[i] += 1;
        }
    }
    counts
}

#[test]
fn strategy2_inclusion_frequency_near_r() {
    // One 10^4-draw run puts the band at about 3.3 sd per index: roughly 9% of runs leave it.
    let mut pooled = [0u64; 100];
    let mut runs_outside = 0;
    for seed in 0..40 {
        let counts = strategy2_counts(seed, 10_000);
        let mut outside = false;
        for (p, &c) in pooled.iter_mut().zip(&counts) {
            *p += u64::from(c);
            outside |= (f64::from(c) / 10_000.0 - 0.1).abs() > 0.01;
        }
        runs_outside += usize::from(outside);
    }
    for (i, &c) in pooled.iter().enumerate() {
        let f = c as f64 / 400_000.0;
        assert!((f - 0.1).abs() <= 0.01, "index {i}: {f}");
    }
    assert!(runs_outside <= 9, "{runs_outside}/40 runs left the band");
}

#[test]
fn strategy2_chi_square_uniform() {
    let n = 100;
    let critical = ChiSquared::new((n - 1) as f64).unwrap().inverse_cdf(0.99);
    let r = check_strategy2_uniformity(n, 0.1, 0.2, 10_000, 5, critical).unwrap();
    assert!(r.passed, "{:?}", r.notes);
}

#[test]
fn fault_responder_mean_matches_binomial() {
    let r = check_fault_responders(1600, 16, 0.3, 10_000, 7, 0.2 / 11.2).unwrap();
    assert!(r.passed, "{:?}", r.notes);
}

#[test]
fn fault_overlap_is_union_of_common_nodes() {
    let layout = NodeLayout::contiguous(97, 6, 0.4).unwrap();
    let mut s = FaultSampler::new(layout.clone(), false);
    let mut rng = SeededRng::new(8);
    let plans: Vec<_> = (0..300).map(|_| s.next_plan(&mut rng)).collect();
    for w in plans.windows(2) {
        let expected: Vec<usize> = intersect_sorted(&w[0].batch, &w[1].batch);
        assert_eq!(w[0].overlap_next, expected);
        assert_eq!(w[1].overlap_prev, expected);
    }
}

#[test]
fn fault_p_zero_is_full_batch() {
    let layout = NodeLayout::contiguous(50, 16, 0.0).unwrap();
    let mut rng = SeededRng::new(1);
    for _ in 0..10 {
        let d = plan_fault(&layout, &mut rng);
        assert_eq!(d.responding.len(), 16);
        assert_eq!(d.batch, (0..50).collect::<Vec<_>>());
        assert_eq!(d.redraws, 0);
    }
}

#[test]
fn reshard_keeps_balance_and_partition() {
    let layout = NodeLayout::contiguous(10, 3, 0.2).unwrap();
    let mut sizes: Vec<usize> = layout.shards().iter().map(Vec::len).collect();
    sizes.sort_unstable();
    assert_eq!(sizes, vec![3, 3, 4]);
    let mut rng = SeededRng::new(2);
    let fresh = reshard(&layout, &mut rng);
    let mut all: Vec<usize> = fresh.shards().iter().flatten().copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..10).collect::<Vec<_>>());
    let single = NodeLayout::contiguous(10, 1, 0.0).unwrap();
    let mut again: Vec<usize> = reshard(&single, &mut rng).shard(0).to_vec();
    again.sort_unstable();
    assert_eq!(again, single.shard(0));
}

#[test]
fn every_mode_replays_bit_exactly() {
    for mode in [
        SamplingMode::Strategy1 { batch_frac: 0.25, overlap_frac: 0.2 },
        SamplingMode::Strategy2 { batch_frac: 0.25, overlap_frac: 0.2 },
        SamplingMode::Fault { nodes: 5, fail_prob: 0.3, reshard_each_epoch: true },
    ] {
        let stream = |seed| {
            let mut rng = SeededRng::new(seed);
            let mut s = Sampler::new(&mode, 20, &mut rng).unwrap();
            (0..50).map(|_| s.next_plan(&mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(stream(42), stream(42));
        assert_ne!(stream(42), stream(43));
    }
}

#[test]
fn strategy1_rejects_degenerate_overlap() {
    assert!(Strategy1Sampler::new(10, 0.5, 0.2).is_ok());
    assert!(Strategy1Sampler::new(10, 0.5, 0.5).is_err());
    assert!(Strategy1Sampler::new(100, 0.05, 0.1).is_err());
}
