use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{debug, warn};

use super::backend::{Announce, Backend, Plan, PrepError, PrepJob, Prepared, RequestBody, SubmitError};
use super::message::{ClientId, ClientMessage, EntityChange, Envelope, ReplicationMessage, TicketId, TicketStatus, WIRE_VERSION};
use super::world::{diff_scenes, Mode, World};
use crate::assets::PrefetchedAssets;
use crate::dsl::{self, CapabilitySet, Interpreter};
use crate::pong::{self, MatchEvent, SkinTarget};
use crate::scene::Digest256;

/// Time scale while a transformation is pending.
pub const TIME_DILATION: f64 = 0.01;
pub const AUDIT_PERIOD_TICKS: u64 = 120;
/// Unacknowledged asset directives are repeated this often (in loop ticks).
pub const DIRECTIVE_RESEND_TICKS: u64 = 300;
pub const MAX_SESSION_CLIENTS: usize = 8;
const HASH_HISTORY: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("{0} is not a member of this session")]
    UnknownClient(ClientId),
    #[error("session is full")]
    Capacity,
}

impl SessionError {
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::UnknownClient(_) => "UNKNOWN_CLIENT",
            SessionError::Capacity => "CAPACITY",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueuedRequest {
    pub ticket: TicketId,
    /// `None` for requests the session raised itself.
    pub client: Option<ClientId>,
    pub player: Option<usize>,
    pub text: String,
    pub body: RequestBody,
    pub arrival_tick: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Directive {
    pub asset_id: String,
    pub download_url: String,
    pub size_bytes: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PendingPhase {
    Preparing,
    AwaitingAcks {
        prepared: Prepared,
        directives: Vec<Directive>,
        acks: BTreeMap<ClientId, BTreeSet<String>>,
        last_sent: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pending {
    pub request: QueuedRequest,
    pub phase: PendingPhase,
}

/// A message addressed to one client.
#[derive(Debug, Clone, PartialEq)]
pub struct Outgoing {
    pub to: ClientId,
    pub envelope: Envelope,
    /// Must survive a lossy link (snapshots).
    pub reliable: bool,
}

#[derive(Debug, Clone, PartialEq)]
struct Member {
    next_seq: u64,
    report: Option<(u64, Digest256)>,
}

/// Authoritative per-session state machine: FIFO request queue, at most one
/// pending transformation, the asset-ready barrier, time dilation and the
/// periodic desync audit. All output goes through per-recipient sequenced
/// envelopes collected in an outbox.
#[derive(Debug, Clone)]
pub struct SessionState {
    id: String,
    world: World,
    caps: CapabilitySet,
    members: BTreeMap<ClientId, Member>,
    players: Vec<ClientId>,
    queue: VecDeque<QueuedRequest>,
    pending: Option<Pending>,
    tickets: BTreeMap<TicketId, TicketStatus>,
    requesters: BTreeMap<TicketId, ClientId>,
    next_ticket: u64,
    hash_history: BTreeMap<u64, Digest256>,
    loops: u64,
    frozen: bool,
    committed: Vec<TicketId>,
    divergences: Vec<(u64, ClientId)>,
    outbox: Vec<Outgoing>,
    audit_period: u64,
    journal: Option<Vec<(u64, ReplicationMessage)>>,
}

impl SessionState {
    pub fn new(id: impl Into<String>, mode: Mode, seed: u64) -> Self {
        Self::with_world(id, World::new(mode, seed))
    }

    pub fn with_world(id: impl Into<String>, world: World) -> Self {
        Self {
            id: id.into(),
            world,
            caps: CapabilitySet::all(),
            members: BTreeMap::new(),
            players: Vec::new(),
            queue: VecDeque::new(),
            pending: None,
            tickets: BTreeMap::new(),
            requesters: BTreeMap::new(),
            next_ticket: 1,
            hash_history: BTreeMap::new(),
            loops: 0,
            frozen: false,
            committed: Vec::new(),
            divergences: Vec::new(),
            outbox: Vec::new(),
            audit_period: AUDIT_PERIOD_TICKS,
            journal: None,
        }
    }

    /// Ticks between state audits. Zero disables periodic audits.
    pub fn with_audit_period(mut self, ticks: u64) -> Self {
        self.audit_period = ticks;
        self
    }

    /// Keep a copy of every broadcast, stamped with its tick, for
    /// [`SessionState::take_journal`].
    pub fn with_journal(mut self) -> Self {
        self.journal = Some(Vec::new());
        self
    }

    pub fn take_journal(&mut self) -> Vec<(u64, ReplicationMessage)> {
        self.journal.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn with_capabilities(mut self, caps: CapabilitySet) -> Self {
        self.caps = caps;
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn mode(&self) -> Mode {
        self.world.mode
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn tick(&self) -> u64 {
        self.world.tick()
    }

    pub fn time_scale(&self) -> f64 {
        self.world.scene.time_scale()
    }

    pub fn pending(&self) -> Option<&Pending> {
        self.pending.as_ref()
    }

    pub fn queue(&self) -> impl Iterator<Item = &QueuedRequest> {
        self.queue.iter()
    }

    pub fn tickets(&self) -> &BTreeMap<TicketId, TicketStatus> {
        &self.tickets
    }

    pub fn ticket(&self, id: TicketId) -> Option<&TicketStatus> {
        self.tickets.get(&id)
    }

    /// The client that submitted a ticket; `None` for session-raised ones.
    pub fn requester(&self, id: TicketId) -> Option<ClientId> {
        self.requesters.get(&id).copied()
    }

    /// Tickets in the order their transformations were committed.
    pub fn committed(&self) -> &[TicketId] {
        &self.committed
    }

    pub fn members(&self) -> impl Iterator<Item = ClientId> + '_ {
        self.members.keys().copied()
    }

    pub fn is_member(&self, client: ClientId) -> bool {
        self.members.contains_key(&client)
    }

    /// Pong player index: the first two clients to join hold the paddles.
    pub fn player_of(&self, client: ClientId) -> Option<usize> {
        self.players.iter().position(|c| *c == client)
    }

    /// `(tick, client)` for every failed audit so far.
    pub fn divergences(&self) -> &[(u64, ClientId)] {
        &self.divergences
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// Stop stepping the world and starting new requests. A pending
    /// transformation may still complete.
    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn take_outbox(&mut self) -> Vec<Outgoing> {
        std::mem::take(&mut self.outbox)
    }

    fn send(&mut self, to: ClientId, message: ReplicationMessage, reliable: bool) {
        let tick = self.world.tick();
        let Some(m) = self.members.get_mut(&to) else {
            return;
        };
        let seq = m.next_seq;
        m.next_seq += 1;
        self.outbox.push(Outgoing {
            to,
            envelope: Envelope {
                version: WIRE_VERSION,
                session: self.id.clone(),
                seq,
                tick,
                message,
            },
            reliable,
        });
    }

    fn broadcast(&mut self, message: ReplicationMessage) {
        let tick = self.world.tick();
        if let Some(j) = self.journal.as_mut() {
            j.push((tick, message.clone()));
        }
        let to: Vec<ClientId> = self.members.keys().copied().collect();
        for c in to {
            self.send(c, message.clone(), false);
        }
    }

    fn set_status(&mut self, ticket: TicketId, status: TicketStatus) {
        self.tickets.insert(ticket, status.clone());
        self.broadcast(ReplicationMessage::TicketStatus { ticket, status });
    }

    pub fn join(&mut self, client: ClientId) -> Result<(), SessionError> {
        if self.members.contains_key(&client) {
            return Ok(());
        }
        if self.members.len() >= MAX_SESSION_CLIENTS {
            return Err(SessionError::Capacity);
        }
        self.members.insert(
            client,
            Member {
                next_seq: 0,
                report: None,
            },
        );
        if self.players.len() < 2 {
            self.players.push(client);
        }
        let world = self.world.snapshot();
        self.send(client, ReplicationMessage::Snapshot { world }, true);
        let player = self.player_of(client);
        self.send(client, ReplicationMessage::Joined { client, player }, true);
        if let Some(Pending {
            phase: PendingPhase::AwaitingAcks { directives, .. },
            request,
        }) = &self.pending
        {
            let (ticket, directives) = (request.ticket, directives.clone());
            for d in directives {
                self.send(client, directive_message(ticket, &d), false);
            }
        }
        Ok(())
    }

    pub fn leave(&mut self, client: ClientId) {
        self.members.remove(&client);
        self.players.retain(|c| *c != client);
    }

    fn push_ticket(&mut self, client: Option<ClientId>, text: &str) -> TicketId {
        let ticket = TicketId(self.next_ticket);
        self.next_ticket += 1;
        if let Some(c) = client {
            self.requesters.insert(ticket, c);
        }
        self.broadcast(ReplicationMessage::CommandRequest {
            ticket,
            client,
            text: text.to_owned(),
        });
        ticket
    }

    fn enqueue(&mut self, client: Option<ClientId>, text: &str, body: RequestBody) -> TicketId {
        let ticket = self.push_ticket(client, text);
        if let RequestBody::Program { source } = &body {
            self.broadcast(ReplicationMessage::CodePanel {
                ticket,
                source: source.clone(),
            });
        }
        self.queue.push_back(QueuedRequest {
            ticket,
            client,
            player: client.and_then(|c| self.player_of(c)),
            text: text.to_owned(),
            body,
            arrival_tick: self.world.tick(),
        });
        self.set_status(ticket, TicketStatus::Queued);
        ticket
    }

    /// Append an already-interpreted request. Never dropped; the ticket
    /// reaches a terminal status eventually.
    pub fn enqueue_request(&mut self, client: ClientId, text: &str, body: RequestBody) -> Result<TicketId, SessionError> {
        if !self.is_member(client) {
            return Err(SessionError::UnknownClient(client));
        }
        Ok(self.enqueue(Some(client), text, body))
    }

    /// Record a submission. Interpretation failures still get a ticket, which
    /// fails immediately with the diagnostics.
    pub fn submit(
        &mut self,
        client: ClientId,
        text: &str,
        interpreted: Result<RequestBody, SubmitError>,
    ) -> Result<TicketId, SessionError> {
        if !self.is_member(client) {
            return Err(SessionError::UnknownClient(client));
        }
        match interpreted {
            Ok(body) => Ok(self.enqueue(Some(client), text, body)),
            Err(e) => {
                let ticket = self.push_ticket(Some(client), text);
                self.set_status(
                    ticket,
                    TicketStatus::Failed {
                        code: e.code().into(),
                        message: e.to_string(),
                    },
                );
                Ok(ticket)
            }
        }
    }

    /// Handle one client message. Submissions are interpreted synchronously
    /// through `backend`.
    pub fn handle_message(&mut self, client: ClientId, msg: &ClientMessage, backend: &dyn Backend) -> Result<(), SessionError> {
        if !self.is_member(client) {
            return Err(SessionError::UnknownClient(client));
        }
        match msg {
            ClientMessage::SubmitCommand { text } => {
                let body = backend.interpret(&self.world, text);
                self.submit(client, text, body)?;
            }
            ClientMessage::AssetReady { asset_id } => self.record_ack(client, asset_id),
            ClientMessage::StateHashReport { tick, digest } => {
                if let Some(m) = self.members.get_mut(&client) {
                    m.report = Some((*tick, digest.clone()));
                }
            }
            ClientMessage::JointPose { key, position } => {
                if self.world.scene.set_joint_pose(*key, *position).is_ok() {
                    self.broadcast(ReplicationMessage::JointPose {
                        key: *key,
                        position: *position,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn record_ack(&mut self, client: ClientId, asset_id: &str) {
        let Some(Pending {
            phase: PendingPhase::AwaitingAcks { directives, acks, .. },
            ..
        }) = self.pending.as_mut()
        else {
            return;
        };
        if !directives.iter().any(|d| d.asset_id == asset_id) {
            return;
        }
        if acks.entry(client).or_default().insert(asset_id.to_owned()) {
            self.broadcast(ReplicationMessage::AssetReady {
                client,
                asset_id: asset_id.to_owned(),
            });
        }
    }

    /// Pop the next request if idle. Time dilation starts here so that
    /// resolution and download latency are both covered.
    pub fn begin_next(&mut self) -> Option<PrepJob> {
        if self.frozen || self.pending.is_some() {
            return None;
        }
        let request = self.queue.pop_front()?;
        let job = PrepJob {
            ticket: request.ticket,
            body: request.body.clone(),
            player: request.player,
            scene_vertex_load: self.world.scene.vertex_load(),
        };
        let ticket = request.ticket;
        self.pending = Some(Pending {
            request,
            phase: PendingPhase::Preparing,
        });
        self.set_time_scale(TIME_DILATION);
        self.set_status(ticket, TicketStatus::Resolving);
        Some(job)
    }

    fn set_time_scale(&mut self, factor: f64) {
        self.world
            .scene
            .set_time_scale(factor)
            .expect("dilation factors are positive");
        self.broadcast(ReplicationMessage::TimeScale { factor });
    }

    pub fn complete_preparation(&mut self, ticket: TicketId, result: Result<Prepared, PrepError>) {
        match &self.pending {
            Some(p) if p.request.ticket == ticket && p.phase == PendingPhase::Preparing => {}
            _ => {
                warn!(%ticket, "preparation result for a ticket that is not preparing");
                return;
            }
        }
        let prepared = match result {
            Ok(p) => p,
            Err(e) => return self.abort(ticket, e.code(), &e.to_string()),
        };
        if let Some(Announce { ball, paddle, output }) = prepared.announce.clone() {
            self.broadcast(ReplicationMessage::ResolutionAnnounce {
                ticket,
                ball,
                paddle,
                output,
            });
        }
        let mut directives: Vec<Directive> = Vec::new();
        for (_, h) in &prepared.assets {
            if !directives.iter().any(|d| d.asset_id == h.record.id) {
                directives.push(Directive {
                    asset_id: h.record.id.clone(),
                    download_url: h.record.download_url.clone(),
                    size_bytes: h.record.size_bytes,
                });
            }
        }
        self.set_status(ticket, TicketStatus::Downloading);
        for d in &directives {
            self.broadcast(directive_message(ticket, d));
        }
        if let Some(p) = self.pending.as_mut() {
            p.phase = PendingPhase::AwaitingAcks {
                prepared,
                directives,
                acks: BTreeMap::new(),
                last_sent: self.loops,
            };
        }
    }

    /// Every current member has acknowledged every directive.
    pub fn barrier_clear(&self) -> bool {
        match &self.pending {
            Some(Pending {
                phase: PendingPhase::AwaitingAcks { directives, acks, .. },
                ..
            }) => self.members.keys().all(|c| {
                let got = acks.get(c);
                directives.iter().all(|d| got.is_some_and(|s| s.contains(&d.asset_id)))
            }),
            _ => false,
        }
    }

    /// Resend overdue directives and commit once the barrier clears.
    pub fn poll_barrier(&mut self) {
        let loops = self.loops;
        let mut resend: Vec<(ClientId, ReplicationMessage)> = Vec::new();
        if let Some(Pending {
            request,
            phase:
                PendingPhase::AwaitingAcks {
                    directives,
                    acks,
                    last_sent,
                    ..
                },
        }) = self.pending.as_mut()
        {
            if loops.saturating_sub(*last_sent) >= DIRECTIVE_RESEND_TICKS {
                *last_sent = loops;
                for c in self.members.keys() {
                    for d in directives.iter() {
                        if !acks.get(c).is_some_and(|s| s.contains(&d.asset_id)) {
                            resend.push((*c, directive_message(request.ticket, d)));
                        }
                    }
                }
            }
        }
        for (c, m) in resend {
            self.send(c, m, false);
        }
        if self.barrier_clear() {
            self.commit();
        }
    }

    fn abort(&mut self, ticket: TicketId, code: &str, message: &str) {
        debug!(%ticket, code, "transformation aborted");
        self.pending = None;
        self.set_time_scale(1.0);
        self.set_status(
            ticket,
            TicketStatus::Failed {
                code: code.into(),
                message: message.into(),
            },
        );
    }

    fn commit(&mut self) {
        let Some(Pending {
            request,
            phase: PendingPhase::AwaitingAcks { prepared, .. },
        }) = self.pending.clone()
        else {
            return;
        };
        let ticket = request.ticket;
        let changes = match self.apply_plan(&request, &prepared) {
            Ok(c) => c,
            Err((code, msg)) => return self.abort(ticket, code, &msg),
        };
        let next_entity_id = self.world.scene.next_id();
        self.broadcast(ReplicationMessage::SpawnCommit {
            ticket,
            changes,
            next_entity_id,
        });
        self.pending = None;
        self.set_time_scale(1.0);
        self.committed.push(ticket);
        self.set_status(ticket, TicketStatus::Committed);
    }

    fn apply_plan(&mut self, request: &QueuedRequest, prepared: &Prepared) -> Result<Vec<EntityChange>, (&'static str, String)> {
        match &prepared.plan {
            Plan::Reskin { target, label } => {
                let handle = &prepared
                    .assets
                    .first()
                    .ok_or(("INVALID_REQUEST", "reskin without an asset".to_string()))?
                    .1;
                let World { scene, pong: m, .. } = &mut self.world;
                let m = m.as_mut().ok_or(("INVALID_REQUEST", "reskin outside a match".to_string()))?;
                pong::apply_transformation(scene, m, *target, label, handle).map_err(|e| ("EXECUTION_FAILED", e.to_string()))?;
                let id = match target {
                    SkinTarget::Ball => m.ball,
                    SkinTarget::Paddle(p) => m.paddles[(*p).min(1)],
                };
                let label = match target {
                    SkinTarget::Ball => m.ball_label.clone(),
                    SkinTarget::Paddle(p) => m.paddle_labels[(*p).min(1)].clone(),
                };
                let entity = scene.entity(id).cloned().expect("match entities exist");
                Ok(vec![EntityChange::Reskin {
                    target: *target,
                    label,
                    entity,
                }])
            }
            Plan::Program { source } => {
                let program = dsl::parse(source).map_err(|e| ("INVALID_REQUEST", e.to_string()))?;
                let mut assets = PrefetchedAssets::default();
                for (q, h) in &prepared.assets {
                    assets.insert(q, h.clone());
                }
                let mut after = self.world.scene.clone();
                let hand = request.player.unwrap_or(0) as u8;
                let report = Interpreter::new(self.caps, &mut assets)
                    .with_hand(hand)
                    .execute(&program, &mut after);
                if let Some(err) = report.error {
                    return Err((
                        "EXECUTION_FAILED",
                        format!("{}: {err}", report.error_code.as_deref().unwrap_or("EXEC")),
                    ));
                }
                let changes = diff_scenes(&self.world.scene, &after);
                self.world.scene = after;
                Ok(changes)
            }
        }
    }

    /// Periodic audit point: broadcast the authoritative digest for this
    /// tick. Clients answer with their own.
    pub fn start_audit(&mut self) {
        let tick = self.world.tick();
        let digest = self.world.digest();
        self.hash_history.insert(tick, digest.clone());
        while self.hash_history.len() > HASH_HISTORY {
            self.hash_history.pop_first();
        }
        self.broadcast(ReplicationMessage::StateHash { tick, digest });
    }

    /// Compare the reports received since the last call. Divergent clients
    /// get a snapshot; reports for ticks without a recorded digest are
    /// skipped.
    pub fn audit_consistency(&mut self) -> Vec<ClientId> {
        let reports: Vec<(ClientId, u64, Digest256)> = self
            .members
            .iter_mut()
            .filter_map(|(c, m)| m.report.take().map(|(t, d)| (*c, t, d)))
            .collect();
        let mut divergent = Vec::new();
        for (c, tick, digest) in reports {
            match self.hash_history.get(&tick) {
                Some(expected) if *expected == digest => {}
                Some(_) => divergent.push((c, tick)),
                None => debug!(%c, tick, "audit report for an unrecorded tick"),
            }
        }
        for (c, tick) in &divergent {
            self.divergences.push((*tick, *c));
            let world = self.world.snapshot();
            self.send(*c, ReplicationMessage::Snapshot { world }, true);
        }
        divergent.into_iter().map(|(c, _)| c).collect()
    }

    /// One fixed world step. Contacts between transformed objects enqueue a
    /// collision request.
    pub fn step(&mut self) -> Vec<MatchEvent> {
        if self.frozen {
            return Vec::new();
        }
        let events = self.world.step();
        for e in &events {
            self.broadcast(ReplicationMessage::MatchEvent { event: e.clone() });
            if let MatchEvent::Transform { player, ball, paddle } = e {
                let body = RequestBody::Collision {
                    ball: ball.clone(),
                    paddle: paddle.clone(),
                    player: *player,
                };
                self.enqueue(None, &format!("{ball} hits {paddle}"), body);
            }
        }
        events
    }

    /// Begin, prepare synchronously and poll the barrier.
    pub fn advance(&mut self, backend: &dyn Backend) -> Vec<Outgoing> {
        if let Some(job) = self.begin_next() {
            let result = backend.prepare(&job);
            self.complete_preparation(job.ticket, result);
        }
        self.poll_barrier();
        self.take_outbox()
    }

    /// One loop iteration: inbound messages (same-tick ties broken by client
    /// id), audit, state-machine advance, world step. `dispatch` receives
    /// each new preparation job and must eventually feed the result to
    /// [`SessionState::complete_preparation`].
    pub fn tick_with(
        &mut self,
        mut inbound: Vec<(ClientId, ClientMessage)>,
        backend: &dyn Backend,
        mut dispatch: impl FnMut(&mut Self, PrepJob),
    ) -> Vec<Outgoing> {
        inbound.sort_by_key(|(c, _)| *c);
        for (c, m) in &inbound {
            if let Err(e) = self.handle_message(*c, m, backend) {
                warn!(%c, error = %e, "client message rejected");
            }
        }
        self.audit_consistency();
        if let Some(job) = self.begin_next() {
            dispatch(self, job);
        }
        self.poll_barrier();
        if !self.frozen && self.audit_period > 0 && self.world.tick().is_multiple_of(self.audit_period) {
            self.start_audit();
        }
        self.step();
        self.loops += 1;
        self.take_outbox()
    }

    /// [`SessionState::tick_with`] with synchronous preparation.
    pub fn run_tick(&mut self, inbound: Vec<(ClientId, ClientMessage)>, backend: &dyn Backend) -> Vec<Outgoing> {
        self.tick_with(inbound, backend, |s, job| {
            let r = backend.prepare(&job);
            s.complete_preparation(job.ticket, r);
        })
    }
}

fn directive_message(ticket: TicketId, d: &Directive) -> ReplicationMessage {
    ReplicationMessage::AssetDirective {
        ticket,
        asset_id: d.asset_id.clone(),
        download_url: d.download_url.clone(),
        size_bytes: d.size_bytes,
    }
}
