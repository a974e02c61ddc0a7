use std::path::PathBuf;

use holoforge_core::assets::{AssetPipeline, MockCatalog, SimulatedFetcher, VirtualClock};
use holoforge_core::dsl::arbitrary::{random_program, GenConfig};
use holoforge_core::dsl::{format, parse, run_source, unexplained, CapabilitySet, Interpreter, StatementKind};
use holoforge_core::scene::SceneGraph;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

fn pipeline() -> AssetPipeline {
    let clock = VirtualClock::new();
    AssetPipeline::new(
        Arc::new(MockCatalog::bundled()),
        Arc::new(SimulatedFetcher::new(clock.clone())),
        Arc::new(clock),
    )
}

fn corpus() -> Vec<(PathBuf, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let mut files: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "scn"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| (p.clone(), std::fs::read_to_string(&p).unwrap()))
        .collect()
}

#[test]
fn thousand_random_programs_round_trip() {
    let cfg = GenConfig::default();
    for seed in 0..1000u64 {
        let p = random_program(&mut ChaCha8Rng::seed_from_u64(seed), &cfg);
        let text = format(&p);
        let back = parse(&text).unwrap_or_else(|e| panic!("seed {seed}: {e}\n{text}"));
        assert_eq!(back, p, "seed {seed}\n{text}");
    }
}

#[test]
fn corpus_is_canonical() {
    let files = corpus();
    assert!(files.len() >= 5);
    for (path, text) in files {
        let once = format(&parse(&text).unwrap());
        assert_eq!(once, text, "{} is not in canonical form", path.display());
        assert_eq!(format(&parse(&once).unwrap()), once);
    }
}

#[test]
fn corpus_executes_in_the_room() {
    for (path, text) in corpus() {
        let mut scene = SceneGraph::holodeck_room(3);
        let mut assets = pipeline();
        let report = run_source(&text, &mut scene, CapabilitySet::all(), &mut assets)
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert!(report.succeeded(), "{}: {:?}", path.display(), report.error);
    }
}

fn random_caps(rng: &mut ChaCha8Rng) -> CapabilitySet {
    StatementKind::ALL
        .iter()
        .filter(|_| rng.random_bool(0.6))
        .fold(CapabilitySet::none(), |c, k| c.with(*k))
}

#[test]
fn fuzzed_programs_stay_inside_capabilities() {
    let cfg = GenConfig::executable();
    let mut seen_effects = 0;
    for seed in 0..600u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut scene = SceneGraph::holodeck_room(seed);
        let mut assets = pipeline();
        run_source(
            "primitive cube as a\nload \"lamp\" as b\nmove b to (2, 0.5, 2)",
            &mut scene,
            CapabilitySet::all(),
            &mut assets,
        )
        .unwrap();
        let caps = random_caps(&mut rng);
        let program = random_program(&mut rng, &cfg);
        let before = scene.clone();
        // no validation: the interpreter has to enforce the whitelist itself
        Interpreter::new(caps, &mut assets).execute(&program, &mut scene);
        let bad = unexplained(&before, &scene, caps);
        assert!(bad.is_empty(), "seed {seed}, caps {caps:?}:\n{}\n{bad:?}", format(&program));
        if before.scene_hash() != scene.scene_hash() {
            seen_effects += 1;
        }
    }
    assert!(seen_effects > 100, "fuzzer rarely changed anything ({seen_effects})");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn format_is_idempotent(seed in any::<u64>()) {
        let p = random_program(&mut ChaCha8Rng::seed_from_u64(seed), &GenConfig::default());
        let once = format(&p);
        prop_assert_eq!(format(&parse(&once).unwrap()), once);
    }

    #[test]
    fn parser_never_panics(text in "[ -~\n]{0,200}") {
        let _ = parse(&text);
    }
}
