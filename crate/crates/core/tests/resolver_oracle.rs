use std::sync::Arc;
use std::time::Instant;

use holoforge_core::assets::{AssetPipeline, MockCatalog, SimulatedFetcher, VirtualClock};
use holoforge_core::dsl::{run_source, CapabilitySet};
use holoforge_core::resolver::oracle::SCENE_LEXICON;
use holoforge_core::resolver::{
    parse_completion, replay, CompletionLog, LogRecord, MockClient, Resolver, ResolverConfig, COLLISION_CONTEXT, CONTEXT_PAIRS,
    HAND_TOOLS_CONTEXT, HOLODECK_CONTEXT, TABLE_ONE,
};
use holoforge_core::scene::{SceneGraph, JOINT_NAMES};
use proptest::prelude::*;

#[test]
fn every_listed_pair_resolves_exactly() {
    let started = Instant::now();
    let r = Resolver::mock();
    let expected = [
        ("salmon", "knife", "sushi"),
        ("fried egg", "time", "rotten egg"),
        ("fire", "ice", "water"),
        ("family", "time", "memory"),
        ("memory", "disaster", "ptsd"),
        ("pineapple", "banana", "smoothie"),
        ("apple", "tennis racket", "apple pie"),
        ("dinner", "trash can", "maggot"),
    ];
    assert_eq!(TABLE_ONE, expected);
    for (ball, paddle, out) in expected {
        assert_eq!(r.resolve_collision(ball, paddle).unwrap().output_object, out);
    }
    assert_eq!(CONTEXT_PAIRS.len(), 15);
    for (ball, paddle, out) in CONTEXT_PAIRS {
        assert_eq!(
            r.resolve_collision(ball, paddle).unwrap().output_object,
            out,
            "{ball} + {paddle}"
        );
    }
    assert_eq!(r.log().len(), 23);
    assert!(started.elapsed().as_secs_f64() < 1.0);
}

#[test]
fn context_pairs_come_from_the_shipped_context() {
    // each worked example line names its pair and its product
    let examples: Vec<&str> = COLLISION_CONTEXT.lines().filter(|l| l.starts_with("When ")).collect();
    assert_eq!(examples.len(), 14);
    for ((ball, paddle, out), line) in CONTEXT_PAIRS.iter().zip(&examples) {
        let lower = line.to_lowercase();
        assert!(
            lower.contains(ball) && lower.contains(paddle) && lower.contains(out),
            "{line}"
        );
    }
    assert!(COLLISION_CONTEXT.ends_with("it spawns a plant.\n\n"));
}

#[test]
fn shipped_contexts_are_unescaped_text() {
    for ctx in [COLLISION_CONTEXT, HOLODECK_CONTEXT, HAND_TOOLS_CONTEXT] {
        assert!(!ctx.contains("\\_") && !ctx.contains("\\{") && !ctx.contains('$'));
    }
    assert!(HOLODECK_CONTEXT.contains("The walls are at (0,0,5), (5,0,0), (0,0,-5) and (-5,0,0)."));
    assert!(HOLODECK_CONTEXT.contains("loader.ScaleModel(computerDesk, 1.77f);"));
    for joint in JOINT_NAMES {
        assert!(HAND_TOOLS_CONTEXT.contains(joint), "{joint}");
    }
}

#[test]
fn lexicon_programs_run_in_an_empty_room() {
    let r = Resolver::mock();
    for scene in &SCENE_LEXICON {
        let clock = VirtualClock::new();
        let mut assets = AssetPipeline::new(
            Arc::new(MockCatalog::bundled()),
            Arc::new(SimulatedFetcher::new(clock.clone())),
            Arc::new(clock),
        );
        let mut room = SceneGraph::holodeck_room(5);
        let src = r.generate_program(&format!("make {}", scene.keywords[0])).unwrap();
        assert_eq!(src, scene.program);
        let report = run_source(&src, &mut room, CapabilitySet::all(), &mut assets).unwrap();
        assert!(report.succeeded(), "{}: {:?}", scene.title, report.error);
        for e in room.entities() {
            assert!(room.bounds().contains_point(e.position), "{} at {}", e.name, e.position);
        }
    }
}

#[test]
fn file_log_replays_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("completions.jsonl");
    let log = Arc::new(CompletionLog::open(&path).unwrap());
    let r = Resolver::new(ResolverConfig::default(), Arc::new(MockClient::default()), log);
    r.resolve_collision("salmon", "knife").unwrap();
    r.resolve_collision("water", "fire").unwrap();
    r.scene_program("a bedroom").unwrap();
    let bytes = std::fs::read(&path).unwrap();
    let records = replay(&path).unwrap();
    assert_eq!(records.len(), 4);
    let rebuilt: String = records.iter().map(LogRecord::to_line).collect();
    assert_eq!(rebuilt.into_bytes(), bytes);
}

proptest! {
    #[test]
    fn parse_completion_is_idempotent(raw in "\\PC{0,60}") {
        if let Ok(once) = parse_completion(&raw) {
            prop_assert_eq!(parse_completion(&once).unwrap(), once.clone());
            prop_assert!(once.split(' ').count() <= 5);
            prop_assert_eq!(once.to_lowercase(), once);
        }
    }

    #[test]
    fn fallback_is_deterministic(a in "[a-z]{4,8}", b in "[a-z]{4,8}") {
        let r = Resolver::mock();
        let x = r.resolve_collision(&a, &b).unwrap().output_object;
        let y = r.resolve_collision(&a, &b).unwrap().output_object;
        prop_assert_eq!(x, y);
    }
}
