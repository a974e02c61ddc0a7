//! Single-threaded network simulation on a virtual microsecond clock. Every
//! message goes through the wire codec, so a trace is byte-for-byte what a
//! live transport would carry.

use std::collections::BTreeMap;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::backend::{Backend, EngineBackend, PrepError, Prepared};
use super::message::{
    decode_client_envelope, decode_envelope, encode_frame, ClientEnvelope, ClientId, ClientMessage, TicketId, TicketStatus,
    WIRE_VERSION,
};
use super::replica::{Replica, ReplicaAction, ReplicaStats};
use super::session::{Outgoing, SessionState};
use super::world::{Mode, World};
use crate::math::Vec3;
use crate::pong::paddle_key;
use crate::scene::{Digest256, TICK_HZ};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// Each link's fixed one-way latency is drawn uniformly from this range.
    pub latency_ms: (f64, f64),
    /// Per-message uniform jitter in `[-jitter_ms, jitter_ms]`.
    pub jitter_ms: f64,
    /// Probability that a message is held back by an extra random delay.
    pub reorder: f64,
    pub reorder_delay_ms: f64,
    /// Probability that an unreliable message is lost.
    pub drop: f64,
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            latency_ms: (100.0, 500.0),
            jitter_ms: 200.0,
            reorder: 0.1,
            reorder_delay_ms: 300.0,
            drop: 0.0,
            seed: 0,
        }
    }
}

impl NetworkConfig {
    /// Instant, lossless delivery.
    pub fn ideal() -> Self {
        Self {
            latency_ms: (0.0, 0.0),
            jitter_ms: 0.0,
            reorder: 0.0,
            reorder_delay_ms: 0.0,
            drop: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, p) in [("reorder", self.reorder), ("drop", self.drop)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} probability {p} is outside [0, 1]"));
            }
        }
        let (lo, hi) = self.latency_ms;
        if !(lo >= 0.0 && hi >= lo && self.jitter_ms >= 0.0 && self.reorder_delay_ms >= 0.0) {
            return Err("latencies must be nonnegative with min <= max".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum ScriptAction {
    Submit { text: String },
    MovePaddle { position: Vec3 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedAction {
    pub at_ms: u64,
    pub client: ClientId,
    pub action: ScriptAction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub mode: Mode,
    /// Clients are numbered 1..=clients.
    pub clients: u32,
    pub world_seed: u64,
    pub network: NetworkConfig,
    pub script: Vec<ScriptedAction>,
    /// Hard stop for the scripted phase.
    pub max_ticks: u64,
    /// Client download speeds are the link model scaled by a factor from
    /// this range.
    pub download_factor: (f64, f64),
}

impl SimConfig {
    pub fn new(mode: Mode, clients: u32, network: NetworkConfig, script: Vec<ScriptedAction>) -> Self {
        Self {
            mode,
            clients,
            world_seed: network.seed,
            network,
            script,
            max_ticks: 60 * 120,
            download_factor: (0.5, 3.0),
        }
    }
}

impl SimConfig {
    /// Two clients on the default lossy-latency links and a random
    /// `commands`-long script spread over 20 s.
    pub fn seeded(mode: Mode, seed: u64, drop: f64, commands: usize) -> Self {
        let net = NetworkConfig {
            seed,
            drop,
            ..NetworkConfig::default()
        };
        Self::new(mode, 2, net, random_script(mode, 2, commands, 20_000, seed))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "dir", content = "client", rename_all = "snake_case")]
pub enum Link {
    Down(ClientId),
    Up(ClientId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub at_us: u64,
    pub link: Link,
    pub kind: String,
    pub seq: Option<u64>,
    pub tick: Option<u64>,
    pub bytes: usize,
    /// Delivery time, or `None` when dropped.
    pub deliver_at_us: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientOutcome {
    pub client: ClientId,
    /// Digest the client reported for the final audit tick.
    pub reported: Option<Digest256>,
    /// Digest after any repair snapshot.
    pub digest: Digest256,
    pub applied: u64,
    pub duplicates: u64,
    pub snapshots: u64,
    pub gap_skips: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub trace: Vec<TraceEvent>,
    /// SHA-256 over every encoded frame with its timing and fate.
    pub trace_digest: Digest256,
    pub final_tick: u64,
    pub authoritative: Digest256,
    pub clients: Vec<ClientOutcome>,
    pub tickets: BTreeMap<TicketId, TicketStatus>,
    pub committed: Vec<TicketId>,
    /// Client-submitted tickets that never reached a terminal status.
    pub open_client_tickets: Vec<TicketId>,
    /// Audits that found a client out of sync, over the whole run.
    pub divergences: usize,
    pub sent: usize,
    pub dropped: usize,
    pub virtual_time: Duration,
}

impl SimReport {
    /// Every client ends on the authoritative digest.
    pub fn converged(&self) -> bool {
        self.clients.iter().all(|c| c.digest == self.authoritative)
    }

    /// Every client already matched at the final audit, before any repair.
    pub fn converged_without_repair(&self) -> bool {
        self.clients.iter().all(|c| c.reported.as_ref() == Some(&self.authoritative))
    }

    pub fn all_tickets_terminal(&self) -> bool {
        self.tickets.values().all(TicketStatus::is_terminal)
    }
}

enum Event {
    ServerTick,
    ToClient {
        client: ClientId,
        bytes: Vec<u8>,
    },
    ToServer {
        client: ClientId,
        bytes: Vec<u8>,
    },
    Poll {
        client: ClientId,
    },
    DownloadDone {
        client: ClientId,
        asset_id: String,
    },
    PrepDone {
        ticket: TicketId,
        result: Box<Result<Prepared, PrepError>>,
    },
    Script {
        index: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Running,
    Frozen,
    Draining,
    FinalAudit,
}

struct Links {
    rng: ChaCha8Rng,
    net: NetworkConfig,
    base_ms: Vec<f64>,
    download_factor: Vec<f64>,
}

impl Links {
    fn delay_us(&mut self, client: ClientId) -> u64 {
        let base = self.base_ms[client.0 as usize - 1];
        let j = self.net.jitter_ms;
        let mut ms = base + if j > 0.0 { self.rng.random_range(-j..=j) } else { 0.0 };
        if self.net.reorder > 0.0 && self.rng.random::<f64>() < self.net.reorder {
            ms += self.rng.random::<f64>() * self.net.reorder_delay_ms;
        }
        (ms.max(0.0) * 1000.0).round() as u64
    }

    fn dropped(&mut self, reliable: bool) -> bool {
        !reliable && self.net.drop > 0.0 && self.rng.random::<f64>() < self.net.drop
    }
}

struct Sim<'a> {
    now_us: u64,
    events: BTreeMap<(u64, u64), Event>,
    order: u64,
    inflight: usize,
    links: Links,
    trace: Vec<TraceEvent>,
    hasher: Sha256,
    dropped: usize,
    final_phase: bool,
    session: SessionState,
    replicas: Vec<Replica>,
    inbound: Vec<(ClientId, ClientMessage)>,
    backend: &'a dyn Backend,
    reports: BTreeMap<ClientId, (u64, Digest256)>,
    submits_sent: usize,
    submits_received: usize,
    scripts_fired: usize,
}

fn tick_time_us(tick: u64) -> u64 {
    tick * 1_000_000 / TICK_HZ as u64
}

impl Sim<'_> {
    fn schedule(&mut self, at_us: u64, ev: Event) {
        if !matches!(ev, Event::ServerTick) {
            self.inflight += 1;
        }
        self.events.insert((at_us, self.order), ev);
        self.order += 1;
    }

    fn record(&mut self, link: Link, kind: &str, seq: Option<u64>, tick: Option<u64>, bytes: &[u8], deliver: Option<u64>) {
        self.hasher.update(self.now_us.to_be_bytes());
        self.hasher.update(deliver.unwrap_or(u64::MAX).to_be_bytes());
        self.hasher.update(bytes);
        self.trace.push(TraceEvent {
            at_us: self.now_us,
            link,
            kind: kind.to_owned(),
            seq,
            tick,
            bytes: bytes.len(),
            deliver_at_us: deliver,
        });
    }

    fn flush(&mut self, out: Vec<Outgoing>) {
        for o in out {
            let bytes = encode_frame(&o.envelope);
            let kind = o.envelope.message.kind();
            let link = Link::Down(o.to);
            if self.links.dropped(o.reliable || self.final_phase) {
                self.dropped += 1;
                self.record(link, kind, Some(o.envelope.seq), Some(o.envelope.tick), &bytes, None);
                continue;
            }
            let at = self.now_us + self.links.delay_us(o.to);
            self.record(link, kind, Some(o.envelope.seq), Some(o.envelope.tick), &bytes, Some(at));
            self.schedule(at, Event::ToClient { client: o.to, bytes });
        }
    }

    fn client_send(&mut self, client: ClientId, message: ClientMessage) {
        let reliable = self.final_phase || matches!(message, ClientMessage::SubmitCommand { .. });
        if let ClientMessage::StateHashReport { tick, digest } = &message {
            self.reports.insert(client, (*tick, digest.clone()));
        }
        if let ClientMessage::SubmitCommand { .. } = message {
            self.submits_sent += 1;
        }
        let env = ClientEnvelope {
            version: WIRE_VERSION,
            session: self.session.id().to_owned(),
            client,
            message,
        };
        let bytes = encode_frame(&env);
        let kind = env.message.kind();
        if self.links.dropped(reliable) {
            self.dropped += 1;
            self.record(Link::Up(client), kind, None, None, &bytes, None);
            return;
        }
        let at = self.now_us + self.links.delay_us(client);
        self.record(Link::Up(client), kind, None, None, &bytes, Some(at));
        self.schedule(at, Event::ToServer { client, bytes });
    }

    fn replica_actions(&mut self, client: ClientId, actions: Vec<ReplicaAction>) {
        for a in actions {
            match a {
                ReplicaAction::Send(m) => self.client_send(client, m),
                ReplicaAction::Download {
                    asset_id, size_bytes, ..
                } => {
                    let factor = self.links.download_factor[client.0 as usize - 1];
                    let secs = (0.150 + size_bytes as f64 / 5.0e6) * factor;
                    let at = self.now_us + (secs * 1e6).round() as u64;
                    self.schedule(at, Event::DownloadDone { client, asset_id });
                }
            }
        }
        let replica = &self.replicas[client.0 as usize - 1];
        if let Some(deadline) = replica.gap_deadline() {
            let at = (deadline.as_micros() as u64).max(self.now_us);
            self.schedule(at, Event::Poll { client });
        }
    }

    fn now(&self) -> Duration {
        Duration::from_micros(self.now_us)
    }
}

/// Run a scripted session against the mock engine.
pub fn simulate(config: &SimConfig) -> SimReport {
    simulate_with(config, &EngineBackend::mock())
}

pub fn simulate_with(config: &SimConfig, backend: &dyn Backend) -> SimReport {
    config.network.validate().expect("valid network config");
    let mut rng = ChaCha8Rng::seed_from_u64(config.network.seed);
    let n = config.clients.max(1);
    let (lo, hi) = config.network.latency_ms;
    let base_ms = (0..n).map(|_| if hi > lo { rng.random_range(lo..=hi) } else { lo }).collect();
    let (flo, fhi) = config.download_factor;
    let download_factor = (0..n)
        .map(|_| if fhi > flo { rng.random_range(flo..=fhi) } else { flo })
        .collect();

    let world = World::new(config.mode, config.world_seed);
    let mut session = SessionState::with_world(format!("sim-{}", config.network.seed), world.clone());
    let mut replicas = Vec::new();
    for i in 1..=n {
        let c = ClientId(i);
        session.join(c).expect("simulated sessions stay under capacity");
        replicas.push(Replica::new(c, session.id(), world.clone()));
    }
    let mut sim = Sim {
        now_us: 0,
        events: BTreeMap::new(),
        order: 0,
        inflight: 0,
        links: Links {
            rng,
            net: config.network.clone(),
            base_ms,
            download_factor,
        },
        trace: Vec::new(),
        hasher: Sha256::new(),
        dropped: 0,
        final_phase: false,
        session,
        replicas,
        inbound: Vec::new(),
        backend,
        reports: BTreeMap::new(),
        submits_sent: 0,
        submits_received: 0,
        scripts_fired: 0,
    };
    // join snapshots
    let out = sim.session.take_outbox();
    sim.flush(out);
    for (i, a) in config.script.iter().enumerate() {
        sim.schedule(a.at_ms * 1000, Event::Script { index: i });
    }
    sim.schedule(0, Event::ServerTick);

    let mut phase = Phase::Running;
    let mut loops: u64 = 0;
    let loop_cap = config.max_ticks + 60 * 600;
    while let Some(((at, _), ev)) = sim.events.pop_first() {
        sim.now_us = at;
        if !matches!(ev, Event::ServerTick) {
            sim.inflight -= 1;
        }
        match ev {
            Event::ServerTick => {
                let inbound = std::mem::take(&mut sim.inbound);
                let mut jobs = Vec::new();
                let out = sim.session.tick_with(inbound, sim.backend, |_, job| jobs.push(job));
                sim.flush(out);
                for job in jobs {
                    let result = sim.backend.prepare(&job);
                    let delay = result.as_ref().map(|p| p.latency()).unwrap_or_default();
                    let at = sim.now_us + delay.as_micros() as u64;
                    sim.schedule(
                        at,
                        Event::PrepDone {
                            ticket: job.ticket,
                            result: Box::new(result),
                        },
                    );
                }
                loops += 1;
                let quiet = sim.inflight == 0 && sim.inbound.is_empty();
                match phase {
                    Phase::Running => {
                        let script_done = sim.scripts_fired == config.script.len();
                        let client_work_left = sim.session.queue().any(|r| r.client.is_some())
                            || sim.session.pending().is_some_and(|p| p.request.client.is_some());
                        let idle = script_done
                            && sim.submits_received == sim.submits_sent
                            && !client_work_left
                            && sim.inbound.is_empty();
                        if idle || loops >= config.max_ticks {
                            sim.session.freeze();
                            phase = Phase::Frozen;
                        }
                    }
                    Phase::Frozen => {
                        if sim.session.pending().is_none() {
                            sim.final_phase = true;
                            phase = Phase::Draining;
                        }
                    }
                    Phase::Draining => {
                        if quiet {
                            sim.session.start_audit();
                            let out = sim.session.take_outbox();
                            sim.flush(out);
                            phase = Phase::FinalAudit;
                        }
                    }
                    Phase::FinalAudit => {
                        if quiet {
                            break;
                        }
                    }
                }
                if loops >= loop_cap {
                    break;
                }
                sim.schedule(tick_time_us(loops), Event::ServerTick);
            }
            Event::ToClient { client, bytes } => {
                let env = decode_envelope(&bytes).expect("simulator frames decode");
                let now = sim.now();
                let actions = sim.replicas[client.0 as usize - 1].receive(env, now);
                sim.replica_actions(client, actions);
            }
            Event::ToServer { client, bytes } => {
                let env = decode_client_envelope(&bytes).expect("simulator frames decode");
                if let ClientMessage::SubmitCommand { .. } = env.message {
                    sim.submits_received += 1;
                }
                sim.inbound.push((client, env.message));
            }
            Event::Poll { client } => {
                let now = sim.now();
                let actions = sim.replicas[client.0 as usize - 1].poll(now);
                sim.replica_actions(client, actions);
            }
            Event::DownloadDone { client, asset_id } => {
                let actions = sim.replicas[client.0 as usize - 1].download_finished(&asset_id);
                sim.replica_actions(client, actions);
            }
            Event::PrepDone { ticket, result } => {
                sim.session.complete_preparation(ticket, *result);
                let out = sim.session.take_outbox();
                sim.flush(out);
            }
            Event::Script { index } => {
                sim.scripts_fired += 1;
                let a = &config.script[index];
                let msg = match &a.action {
                    ScriptAction::Submit { text } => ClientMessage::SubmitCommand { text: text.clone() },
                    ScriptAction::MovePaddle { position } => {
                        let player = sim.session.player_of(a.client).unwrap_or(0);
                        ClientMessage::JointPose {
                            key: paddle_key(player),
                            position: *position,
                        }
                    }
                };
                sim.client_send(a.client, msg);
            }
        }
    }

    let authoritative = sim.session.world().digest();
    let final_tick = sim.session.tick();
    let clients = sim
        .replicas
        .iter()
        .map(|r| {
            let ReplicaStats {
                applied,
                duplicates,
                snapshots,
                gap_skips,
            } = r.stats().clone();
            ClientOutcome {
                client: r.client,
                reported: sim
                    .reports
                    .get(&r.client)
                    .filter(|(t, _)| *t == final_tick)
                    .map(|(_, d)| d.clone()),
                digest: r.digest(),
                applied,
                duplicates,
                snapshots,
                gap_skips,
            }
        })
        .collect();
    SimReport {
        trace_digest: Digest256(hex::encode(sim.hasher.finalize())),
        sent: sim.trace.len(),
        trace: sim.trace,
        final_tick,
        authoritative,
        clients,
        tickets: sim.session.tickets().clone(),
        committed: sim.session.committed().to_vec(),
        open_client_tickets: sim
            .session
            .tickets()
            .iter()
            .filter(|(t, st)| !st.is_terminal() && sim.session.requester(**t).is_some())
            .map(|(t, _)| *t)
            .collect(),
        divergences: sim.session.divergences().len(),
        dropped: sim.dropped,
        virtual_time: Duration::from_micros(sim.now_us),
    }
}

const PONG_LABELS: [&str; 16] = [
    "salmon",
    "knife",
    "fried egg",
    "time",
    "fire",
    "ice",
    "apple",
    "tennis racket",
    "pineapple",
    "banana",
    "dinner",
    "trash can",
    "balloon",
    "pin",
    "egg",
    "clock",
];

const HOLODECK_PROMPTS: [&str; 6] = [
    "Change the scene into a bedroom",
    "make a kitchen",
    "put a flashlight in my right hand",
    "primitive cube as crate\nmove crate to (2, 0.5, 2)",
    "load \"office chair\" as seat\nscale seat 1\nplace seat next_to floor (0, 1, 0)",
    "clear the room",
];

/// `commands` random submissions spread over `span_ms`, plus occasional
/// paddle moves in pong. Includes requests that fail (unknown assets,
/// non-commands) so both terminal ticket states are exercised.
pub fn random_script(mode: Mode, clients: u32, commands: usize, span_ms: u64, seed: u64) -> Vec<ScriptedAction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5C21_7000);
    let mut out = Vec::new();
    for _ in 0..commands {
        let at_ms = rng.random_range(0..=span_ms);
        let client = ClientId(rng.random_range(1..=clients.max(1)));
        let text = match mode {
            Mode::Pong => match rng.random_range(0..20) {
                0 => "hello world".to_owned(),
                1 => "change ball to zeppelin".to_owned(),
                k => {
                    let what = if k % 2 == 0 { "ball" } else { "paddle" };
                    format!("change {what} to {}", PONG_LABELS[rng.random_range(0..PONG_LABELS.len())])
                }
            },
            Mode::Holodeck => HOLODECK_PROMPTS[rng.random_range(0..HOLODECK_PROMPTS.len())].to_owned(),
        };
        out.push(ScriptedAction {
            at_ms,
            client,
            action: ScriptAction::Submit { text },
        });
        if mode == Mode::Pong && rng.random_bool(0.5) {
            let player_z = if client.0 == 1 { -1.8 } else { 1.8 };
            out.push(ScriptedAction {
                at_ms: rng.random_range(0..=span_ms),
                client,
                action: ScriptAction::MovePaddle {
                    position: Vec3::new(rng.random_range(-0.7..=0.7), rng.random_range(0.6..=1.4), player_z),
                },
            });
        }
    }
    out.sort_by_key(|a| a.at_ms);
    out
}
