use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Duration;

use holoforge_core::assets::{
    select, AcquireOptions, AssetPipeline, AssetRecord, Budget, MockCatalog, SimulatedFetcher, VirtualClock, DEFAULT_TOP_K,
};
use holoforge_core::Vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_catalog(rng: &mut ChaCha8Rng) -> Vec<AssetRecord> {
    let n = rng.random_range(1..40);
    (0..n)
        .map(|i| AssetRecord {
            id: format!("r{:03}", rng.random_range(0..1000) * 100 + i),
            name: format!("thing {i}"),
            tags: BTreeSet::new(),
            // narrow ranges force frequent ties on both keys
            likes: rng.random_range(0..8),
            vertex_count: rng.random_range(1..6) * 100,
            size_bytes: 1000,
            download_url: format!("mock://{i}"),
            base_extents: Vec3::ONE,
        })
        .collect()
}

/// Brute force: sort by (likes desc, id asc), cut at k, take the minimum
/// vertex count of that prefix.
fn oracle(records: &[AssetRecord], k: usize) -> (u64, BTreeSet<String>) {
    let mut all: Vec<(i64, String, u64)> = records
        .iter()
        .map(|r| (-(r.likes as i64), r.id.clone(), r.vertex_count))
        .collect();
    all.sort();
    let pool = &all[..k.min(all.len())];
    let min = pool.iter().map(|p| p.2).min().unwrap();
    (min, pool.iter().map(|p| p.1.clone()).collect())
}

#[test]
fn selection_matches_brute_force_over_1000_catalogs() {
    let mut failures = 0;
    for seed in 0..1000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let recs = random_catalog(&mut rng);
        let k = if seed % 3 == 0 {
            rng.random_range(1..12)
        } else {
            DEFAULT_TOP_K
        };
        let (min, pool) = oracle(&recs, k);
        let got = select(&recs, seed, k).unwrap();
        if got.vertex_count != min || !pool.contains(&got.id) {
            failures += 1;
        }
        let mut shuffled = recs.clone();
        shuffled.reverse();
        assert_eq!(
            select(&shuffled, seed, k).unwrap().id,
            got.id,
            "order dependence at seed {seed}"
        );
    }
    assert_eq!(failures, 0);
}

#[test]
fn six_second_candidate_falls_back_to_one_second() {
    let cat = MockCatalog::bundled();
    let clock = VirtualClock::new();
    // find what would be picked first, then script it as slow
    let pool = holoforge_core::assets::Repository::search(&cat, "computer desk");
    assert!(pool.len() >= 2);
    let probe = AssetPipeline::new(
        Arc::new(cat.clone()),
        Arc::new(SimulatedFetcher::new(VirtualClock::new())),
        Arc::new(VirtualClock::new()),
    );
    let first = probe.acquire("computer desk", 0).unwrap().record.id;
    let mut fetcher = SimulatedFetcher::new(clock.clone()).with_latency(first.clone(), Duration::from_secs(6));
    for r in &pool {
        if r.id != first {
            fetcher = fetcher.with_latency(r.id.clone(), Duration::from_secs(1));
        }
    }
    let fetcher = Arc::new(fetcher);
    let p = AssetPipeline::new(Arc::new(cat), fetcher.clone(), Arc::new(clock.clone()));
    let h = p.acquire("computer desk", 0).unwrap();
    assert_ne!(h.record.id, first);
    assert_eq!(fetcher.fetch_count(), 2);
    assert!(clock.now() <= 2 * Duration::from_secs(5) + Duration::from_millis(100));
}

#[test]
fn acquire_respects_budget_and_attempt_cap() {
    let cat = Arc::new(MockCatalog::bundled());
    for seed in 0..50u64 {
        let clock = VirtualClock::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = SimulatedFetcher::new(clock.clone());
        for r in cat.records() {
            f = f.with_latency(r.id.clone(), Duration::from_millis(rng.random_range(100..9000)));
        }
        let f = Arc::new(f);
        let budget = Budget::default();
        let opts = AcquireOptions {
            seed,
            ..AcquireOptions::default()
        };
        let p = AssetPipeline::new(cat.clone(), f.clone(), Arc::new(clock.clone())).with_options(opts);
        for q in ["knife", "table", "tree", "egg", "lamp"] {
            let load = rng.random_range(0..500_000);
            let before = f.fetch_count();
            if let Ok(h) = p.acquire(q, load) {
                assert!(h.record.vertex_count <= budget.max_single_asset_vertices);
                assert!(h.from_cache || load + h.record.vertex_count <= budget.max_scene_vertices);
            }
            assert!(f.fetch_count() - before <= opts.max_attempts as usize);
        }
    }
}
