//! One PASS/FAIL line per acceptance criterion. Runs without the test
//! harness so the lines show up in plain `cargo test` output.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use holoforge_core::assets::{
    select, AssetPipeline, AssetRecord, MockCatalog, Repository, SimulatedFetcher, VirtualClock, DEFAULT_TOP_K,
};
use holoforge_core::dsl::arbitrary::{random_program, GenConfig};
use holoforge_core::dsl::{format, parse, run_source, unexplained, CapabilitySet, Interpreter, StatementKind};
use holoforge_core::math::Vec3;
use holoforge_core::replication::{
    model_check, simulate, ClientId, ClientMessage, EngineBackend, Mode, ModelConfig, Outgoing, Replica, ReplicaAction,
    ReplicationMessage, SessionState, SimConfig, TicketStatus,
};
use holoforge_core::resolver::Resolver;
use holoforge_core::scene::{SceneGraph, TICK_DT};
use holoforge_core::sweep::map_seeds;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<(), String>;
type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        match $cond {
            true => {}
            false => return Err(format!($($fmt)+)),
        }
    };
}

fn collision_oracle() -> Check {
    let started = Instant::now();
    let r = Resolver::mock();
    let rows = [
        ("salmon", "knife", "sushi"),
        ("fried egg", "time", "rotten egg"),
        ("fire", "ice", "water"),
        ("family", "time", "memory"),
        ("memory", "disaster", "ptsd"),
        ("pineapple", "banana", "smoothie"),
        ("apple", "tennis racket", "apple pie"),
        ("dinner", "trash can", "maggot"),
        ("loaf of bread", "cheese", "sandwich"),
        ("pen", "paper", "notebook"),
        ("meat", "clock", "bacteria"),
        ("music note", "cube", "instrument"),
        ("water", "air", "ice"),
        ("tree", "clock", "dead tree"),
        ("egg", "clock", "chicken"),
        ("cube", "wheel", "car"),
        ("egg", "frying pan", "fried egg"),
        ("balloon", "pin", "popped balloon"),
        ("bread", "clock", "moldy bread"),
        ("caterpillar", "clock", "butterfly"),
        ("water", "fire", "steam"),
        ("seed", "water", "plant"),
        ("egg", "clock", "chicken"),
    ];
    for (ball, paddle, want) in rows {
        let got = r.resolve_collision(ball, paddle).map_err(|e| e.to_string())?.output_object;
        ensure!(got == want, "{ball} + {paddle}: {got}, expected {want}");
    }
    let took = started.elapsed();
    ensure!(took < Duration::from_secs(1), "took {took:?}");
    Ok(())
}

fn random_catalog(rng: &mut ChaCha8Rng) -> Vec<AssetRecord> {
    let n = rng.random_range(1..40);
    (0..n)
        .map(|i| AssetRecord {
            id: format!("r{:03}", rng.random_range(0..1000) * 100 + i),
            name: format!("thing {i}"),
            tags: BTreeSet::new(),
            likes: rng.random_range(0..8),
            vertex_count: rng.random_range(1..6) * 100,
            size_bytes: 1000,
            download_url: format!("mock://{i}"),
            base_extents: Vec3::ONE,
        })
        .collect()
}

fn selection() -> Check {
    let mut failures = 0;
    for seed in 0..1000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let recs = random_catalog(&mut rng);
        let k = if seed % 3 == 0 {
            rng.random_range(1..12)
        } else {
            DEFAULT_TOP_K
        };
        let mut ranked: Vec<(i64, String, u64)> = recs
            .iter()
            .map(|r| (-(r.likes as i64), r.id.clone(), r.vertex_count))
            .collect();
        ranked.sort();
        ranked.truncate(k);
        let min = ranked.iter().map(|r| r.2).min().unwrap();
        let got = select(&recs, seed, k).map_err(|e| e.to_string())?;
        if got.vertex_count != min || !ranked.iter().any(|r| r.1 == got.id) {
            failures += 1;
        }
    }
    ensure!(failures == 0, "{failures} of 1000 catalogs disagree with brute force");
    Ok(())
}

fn timeout_fallback() -> Check {
    let cat = MockCatalog::bundled();
    let probe = AssetPipeline::new(
        Arc::new(cat.clone()),
        Arc::new(SimulatedFetcher::new(VirtualClock::new())),
        Arc::new(VirtualClock::new()),
    );
    let first = probe.acquire("computer desk", 0).map_err(|e| e.to_string())?.record.id;
    let clock = VirtualClock::new();
    let mut fetcher = SimulatedFetcher::new(clock.clone()).with_latency(first.clone(), Duration::from_secs(6));
    for r in Repository::search(&cat, "computer desk") {
        if r.id != first {
            fetcher = fetcher.with_latency(r.id.clone(), Duration::from_secs(1));
        }
    }
    let fetcher = Arc::new(fetcher);
    let p = AssetPipeline::new(Arc::new(cat), fetcher.clone(), Arc::new(clock.clone()));
    let got = p.acquire("computer desk", 0).map_err(|e| e.to_string())?;
    let ids = fetcher.fetched_ids();
    ensure!(
        ids.len() == 2 && ids[0] == first && ids[1] == got.record.id,
        "fetch order {ids:?}"
    );
    let limit = ids.len() as u32 * Duration::from_secs(5) + Duration::from_millis(100);
    ensure!(clock.now() <= limit, "virtual time {:?}", clock.now());
    Ok(())
}

fn convergence() -> Check {
    let seeds: Vec<u64> = (0..100).collect();
    for drop in [0.0, 0.05] {
        let reports = map_seeds(&seeds, |s| simulate(&SimConfig::seeded(Mode::Pong, s, drop, 20)));
        for (s, r) in seeds.iter().zip(&reports) {
            if drop == 0.0 {
                ensure!(r.converged_without_repair(), "seed {s} diverged without loss");
            } else {
                ensure!(r.converged(), "seed {s} still diverged after the final audit at drop {drop}");
            }
        }
    }
    Ok(())
}

fn barrier() -> Check {
    let r = model_check(&ModelConfig::default());
    ensure!(r.complete, "search did not finish");
    ensure!(r.states <= 10_000, "{} states", r.states);
    ensure!(r.violations.is_empty(), "{:?}", r.violations);
    ensure!(r.commits_observed > 0, "no commit was reached");
    Ok(())
}

const A: ClientId = ClientId(1);
const B: ClientId = ClientId(2);

/// A session and two replicas with instant delivery.
struct Rig {
    session: SessionState,
    replicas: Vec<Replica>,
    backend: EngineBackend,
    inbound: Vec<(ClientId, ClientMessage)>,
    log: Vec<Outgoing>,
}

impl Rig {
    fn new(seed: u64) -> Self {
        let mut session = SessionState::new("acceptance", Mode::Pong, seed);
        let mut replicas = Vec::new();
        for c in [A, B] {
            session.join(c).expect("room for two");
            replicas.push(Replica::new(c, "acceptance", session.world().clone()));
        }
        let out = session.take_outbox();
        let mut rig = Self {
            session,
            replicas,
            backend: EngineBackend::mock(),
            inbound: Vec::new(),
            log: Vec::new(),
        };
        rig.deliver(out);
        rig
    }

    fn deliver(&mut self, out: Vec<Outgoing>) {
        let now = Duration::from_secs_f64(self.session.tick() as f64 * TICK_DT);
        for o in out {
            let r = self.replicas.iter_mut().find(|r| r.client == o.to).unwrap();
            let mut actions = r.receive(o.envelope.clone(), now);
            while let Some(a) = actions.pop() {
                match a {
                    ReplicaAction::Send(m) => self.inbound.push((r.client, m)),
                    ReplicaAction::Download { asset_id, .. } => actions.extend(r.download_finished(&asset_id)),
                }
            }
            self.log.push(o);
        }
    }

    fn tick(&mut self, extra: Vec<(ClientId, ClientMessage)>) -> Vec<Outgoing> {
        let mut inbound = std::mem::take(&mut self.inbound);
        inbound.extend(extra);
        let out = self.session.run_tick(inbound, &self.backend);
        self.deliver(out.clone());
        out
    }
}

fn submit(text: &str) -> ClientMessage {
    ClientMessage::SubmitCommand { text: text.into() }
}

fn queue_serialization() -> Check {
    let mut rig = Rig::new(9);
    rig.tick(vec![
        (B, submit("change paddle to knife")),
        (A, submit("change ball to salmon")),
    ]);
    for _ in 0..30 {
        rig.tick(Vec::new());
    }
    let seen: Vec<(u64, ReplicationMessage)> = rig
        .log
        .iter()
        .filter(|o| o.to == A)
        .map(|o| (o.envelope.tick, o.envelope.message.clone()))
        .collect();
    let requests: Vec<_> = seen
        .iter()
        .filter_map(|(_, m)| match m {
            ReplicationMessage::CommandRequest { ticket, client, .. } => Some((*ticket, *client)),
            _ => None,
        })
        .collect();
    ensure!(requests.len() == 2, "{} requests", requests.len());
    ensure!(
        requests[0].1 == Some(A) && requests[1].1 == Some(B),
        "tie-break order {requests:?}"
    );
    let tickets = [requests[0].0, requests[1].0];
    ensure!(rig.session.committed() == tickets, "committed {:?}", rig.session.committed());
    let statuses: Vec<_> = seen
        .iter()
        .filter_map(|(_, m)| match m {
            ReplicationMessage::TicketStatus { ticket, status } => Some((*ticket, status.clone())),
            _ => None,
        })
        .collect();
    let first_done = statuses.iter().position(|s| *s == (tickets[0], TicketStatus::Committed));
    let second_start = statuses.iter().position(|s| *s == (tickets[1], TicketStatus::Resolving));
    match (first_done, second_start) {
        (Some(d), Some(s)) => ensure!(d < s, "second request started before the first committed"),
        _ => return Err(format!("missing status transitions: {statuses:?}")),
    }
    Ok(())
}

fn ball(s: &SessionState) -> (Vec3, Vec3) {
    let e = s.world().scene.entity(s.world().pong.as_ref().unwrap().ball).unwrap();
    (e.position, e.velocity)
}

/// Per-tick ball displacement and velocity over 5 normal, 10 dilated and 5
/// normal ticks; `None` if anything touched the ball.
fn dilation_window(seed: u64) -> Option<(Vec<f64>, Vec<Vec3>)> {
    let mut rig = Rig::new(seed);
    for _ in 0..3 {
        rig.tick(Vec::new());
    }
    let mut held = Vec::new();
    let (mut steps, mut velocities) = (Vec::new(), Vec::new());
    for i in 0..20 {
        let (p0, _) = ball(&rig.session);
        let mut extra = Vec::new();
        if i == 5 {
            extra.push((A, submit("change ball to salmon")));
        }
        if i == 15 {
            extra.append(&mut held);
        }
        let out = rig.tick(extra);
        if (5..15).contains(&i) {
            held.extend(
                rig.inbound
                    .iter()
                    .filter(|(_, m)| matches!(m, ClientMessage::AssetReady { .. }))
                    .cloned(),
            );
            rig.inbound.retain(|(_, m)| !matches!(m, ClientMessage::AssetReady { .. }));
        }
        if out
            .iter()
            .any(|o| matches!(o.envelope.message, ReplicationMessage::MatchEvent { .. }))
        {
            return None;
        }
        let (p1, v1) = ball(&rig.session);
        steps.push((p1 - p0).length());
        velocities.push(v1);
    }
    (rig.session.pending().is_none() && rig.session.committed().len() == 1).then_some((steps, velocities))
}

fn time_dilation() -> Check {
    let (steps, velocities) = (0..30)
        .find_map(dilation_window)
        .ok_or("no seed with an undisturbed window")?;
    let normal = steps[0];
    ensure!(normal > 0.0, "the ball is not moving");
    for (i, d) in steps.iter().enumerate() {
        let want = if (5..15).contains(&i) { normal * 0.01 } else { normal };
        ensure!((d - want).abs() <= want * 1e-9, "tick {i}: moved {d}, expected {want}");
    }
    ensure!(
        velocities.iter().all(|v| *v == velocities[0]),
        "velocity changed across a transition"
    );
    Ok(())
}

fn mock_assets() -> AssetPipeline {
    let clock = VirtualClock::new();
    AssetPipeline::new(
        Arc::new(MockCatalog::bundled()),
        Arc::new(SimulatedFetcher::new(clock.clone())),
        Arc::new(clock),
    )
}

fn corpus() -> Vec<(PathBuf, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures");
    let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map(|d| d.filter_map(|e| e.ok().map(|e| e.path())).collect())
        .unwrap_or_default();
    files.retain(|p| p.extension().is_some_and(|x| x == "scn"));
    files.sort();
    files
        .into_iter()
        .map(|p| (p.clone(), std::fs::read_to_string(&p).unwrap()))
        .collect()
}

fn dsl_round_trip() -> Check {
    for seed in 0..1000u64 {
        let p = random_program(&mut ChaCha8Rng::seed_from_u64(seed), &GenConfig::default());
        let text = format(&p);
        let back = parse(&text).map_err(|e| format!("seed {seed}: {e}"))?;
        ensure!(back == p, "seed {seed} does not round-trip:\n{text}");
    }
    let files = corpus();
    ensure!(!files.is_empty(), "corpus not found");
    for (path, text) in files {
        let p = parse(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        ensure!(format(&p) == text, "{} is not a fixed point", path.display());
    }
    let cfg = GenConfig::executable();
    for seed in 0..300u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut scene = SceneGraph::holodeck_room(seed);
        let mut assets = mock_assets();
        run_source(
            "primitive cube as a\nload \"lamp\" as b",
            &mut scene,
            CapabilitySet::all(),
            &mut assets,
        )
        .map_err(|e| e.to_string())?;
        let caps = StatementKind::ALL
            .iter()
            .filter(|_| rng.random_bool(0.6))
            .fold(CapabilitySet::none(), |c, k| c.with(*k));
        let program = random_program(&mut rng, &cfg);
        let before = scene.clone();
        Interpreter::new(caps, &mut assets).execute(&program, &mut scene);
        let bad = unexplained(&before, &scene, caps);
        ensure!(bad.is_empty(), "seed {seed} escaped {caps:?}: {bad:?}");
    }
    Ok(())
}

fn desk_and_flashlight() -> Check {
    let (_, text) = corpus()
        .into_iter()
        .find(|(p, _)| p.ends_with("desk_and_flashlight.scn"))
        .ok_or("program missing")?;
    let mut scene = SceneGraph::holodeck_room(1);
    let report = run_source(&text, &mut scene, CapabilitySet::all(), &mut mock_assets()).map_err(|e| e.to_string())?;
    ensure!(report.succeeded(), "{:?}", report.error);
    let desk = scene.find_by_name("desk").ok_or("no desk")?;
    let light = scene.find_by_name("flashlight").ok_or("no flashlight")?;
    ensure!((desk.max_extent() - 1.77).abs() <= 1e-6, "desk extent {}", desk.max_extent());
    ensure!(
        (light.max_extent() - 0.2).abs() <= 1e-6,
        "flashlight extent {}",
        light.max_extent()
    );
    ensure!(
        desk.mass == Some(30.0) && light.mass == Some(0.25),
        "masses {:?} {:?}",
        desk.mass,
        light.mass
    );
    let room = scene.bounds();
    ensure!(room.extents() == Vec3::new(10.0, 10.0, 10.0), "room {room:?}");
    ensure!(
        room.contains_box(&desk.aabb()) && room.contains_box(&light.aabb()),
        "outside the room: {room:?} {:?} {:?}",
        desk.aabb(),
        light.aabb()
    );
    let (d, l) = (desk.aabb(), light.aabb());
    ensure!(
        l.min.y >= d.max.y - 1e-9 && l.overlaps_footprint(&d),
        "flashlight is not on the desk"
    );
    Ok(())
}

fn gateway_end_to_end() -> Check {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()
        .map_err(|e| e.to_string())?;
    rt.block_on(common::scenario::salmon_meets_knife());
    Ok(())
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("collision oracle equivalence", collision_oracle),
        ("selection property", selection),
        ("timeout fallback", timeout_fallback),
        ("convergence", convergence),
        ("barrier safety", barrier),
        ("queue serialization", queue_serialization),
        ("dsl round-trip", dsl_round_trip),
        ("desk and flashlight reproduction", desk_and_flashlight),
        ("time dilation", time_dilation),
        ("gateway end-to-end", gateway_end_to_end),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(()) => println!("PASS  {name} ({secs:.2}s)"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name} ({secs:.2}s): {why}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
