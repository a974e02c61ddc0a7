//! Exhaustive exploration of a small session: every interleaving of
//! preparation, barrier polls and acknowledgement arrivals, checked against
//! the spawn barrier, serialization and dilation invariants.

use std::collections::{BTreeSet, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::backend::{Backend, EngineBackend, PrepError, Prepared};
use super::message::{ClientId, ClientMessage, ReplicationMessage, TicketId};
use super::session::{SessionState, TIME_DILATION};
use super::world::Mode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub clients: u32,
    /// Submitted in this order before exploration starts.
    pub requests: Vec<(ClientId, String)>,
    pub max_states: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            clients: 2,
            requests: vec![
                (ClientId(1), "change ball to salmon".into()),
                (ClientId(2), "change paddle to knife".into()),
            ],
            max_states: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub states: usize,
    pub transitions: usize,
    pub terminal_states: usize,
    pub commits_observed: usize,
    /// True if the whole reachable space fit under `max_states`.
    pub complete: bool,
    pub violations: Vec<String>,
}

#[derive(Clone)]
struct State {
    session: SessionState,
    /// Prepared result waiting to be delivered, per the ticket it belongs to.
    preparing: Option<(TicketId, Result<Prepared, PrepError>)>,
    /// Directive ticket and assets as observed on the wire.
    directed: Option<(TicketId, BTreeSet<String>)>,
    /// Acknowledgements delivered since the current directive.
    acked: BTreeSet<(ClientId, String)>,
    /// Every asset ever directed; acks for any of them may arrive at any time.
    seen_assets: BTreeSet<String>,
    visible_scale: f64,
    commits: Vec<TicketId>,
}

impl State {
    fn key(&self) -> String {
        format!(
            "{:?}|{:?}|{:?}|{:?}|{:?}|{:?}|{}|{:?}|{:?}",
            self.session.pending(),
            self.session.queue().map(|r| r.ticket).collect::<Vec<_>>(),
            self.session.tickets(),
            self.preparing.as_ref().map(|(t, r)| (t, r.is_ok())),
            self.directed,
            self.acked,
            self.visible_scale,
            self.commits,
            self.seen_assets,
        )
    }
}

#[derive(Debug, Clone)]
enum Move {
    Begin,
    Complete,
    Poll,
    Ack(ClientId, String),
}

/// Observe what the session emitted towards client 1 (all of it is
/// broadcast) and check the wire-level invariants.
fn observe(s: &mut State, clients: &[ClientId], violations: &mut Vec<String>) {
    let out = s.session.take_outbox();
    for o in out.iter().filter(|o| o.to == clients[0]) {
        match &o.envelope.message {
            ReplicationMessage::AssetDirective { ticket, asset_id, .. } => {
                if s.directed.as_ref().map(|(t, _)| *t) != Some(*ticket) {
                    s.directed = Some((*ticket, BTreeSet::new()));
                    s.acked.clear();
                }
                if let Some((_, set)) = s.directed.as_mut() {
                    set.insert(asset_id.clone());
                }
                s.seen_assets.insert(asset_id.clone());
            }
            ReplicationMessage::SpawnCommit { ticket, .. } => {
                let assets = match &s.directed {
                    Some((t, a)) if t == ticket => a.clone(),
                    _ => {
                        violations.push(format!("spawn commit {ticket} without any asset directive"));
                        BTreeSet::new()
                    }
                };
                for c in clients {
                    for a in &assets {
                        if !s.acked.contains(&(*c, a.clone())) {
                            violations.push(format!("spawn commit {ticket} before {c} acknowledged {a}"));
                        }
                    }
                }
                if s.commits.last().is_some_and(|last| last >= ticket) {
                    violations.push(format!("commit {ticket} out of queue order after {:?}", s.commits));
                }
                s.commits.push(*ticket);
            }
            ReplicationMessage::TimeScale { factor } => s.visible_scale = *factor,
            _ => {}
        }
    }
    let pending = s.session.pending().is_some();
    let scale = s.session.time_scale();
    if pending != (scale == TIME_DILATION) || (!pending && scale != 1.0) {
        violations.push(format!("time scale {scale} with pending = {pending}"));
    }
    if s.visible_scale != scale {
        violations.push(format!(
            "clients see time scale {} but the server runs at {scale}",
            s.visible_scale
        ));
    }
}

fn apply(mut s: State, mv: &Move, backend: &dyn Backend, clients: &[ClientId], violations: &mut Vec<String>) -> Option<State> {
    match mv {
        Move::Begin => {
            let job = s.session.begin_next()?;
            let result = backend.prepare(&job);
            s.preparing = Some((job.ticket, result));
        }
        Move::Complete => {
            let (ticket, result) = s.preparing.take()?;
            s.session.complete_preparation(ticket, result);
        }
        Move::Poll => s.session.poll_barrier(),
        Move::Ack(c, a) => {
            let in_directive = s.directed.as_ref().is_some_and(|(_, set)| set.contains(a));
            let msg = ClientMessage::AssetReady { asset_id: a.clone() };
            s.session.handle_message(*c, &msg, backend).ok()?;
            if in_directive {
                s.acked.insert((*c, a.clone()));
            }
        }
    }
    observe(&mut s, clients, violations);
    Some(s)
}

/// Breadth-first search over the reachable states.
pub fn model_check(config: &ModelConfig) -> ModelReport {
    let backend = EngineBackend::mock();
    let clients: Vec<ClientId> = (1..=config.clients).map(ClientId).collect();
    let mut session = SessionState::new("model", Mode::Pong, 1);
    for c in &clients {
        session.join(*c).expect("model stays under capacity");
    }
    for (c, text) in &config.requests {
        let body = backend.interpret(session.world(), text);
        session.submit(*c, text, body).expect("requesters are members");
    }
    session.take_outbox();
    let init = State {
        session,
        preparing: None,
        directed: None,
        acked: BTreeSet::new(),
        seen_assets: BTreeSet::new(),
        visible_scale: 1.0,
        commits: Vec::new(),
    };

    let mut violations = Vec::new();
    let mut seen = HashSet::new();
    let mut frontier = VecDeque::new();
    seen.insert(init.key());
    frontier.push_back(init);
    let (mut transitions, mut terminal, mut commits) = (0, 0, 0);
    let mut complete = true;
    while let Some(s) = frontier.pop_front() {
        let mut moves = vec![Move::Begin, Move::Complete, Move::Poll];
        for c in &clients {
            for a in &s.seen_assets {
                moves.push(Move::Ack(*c, a.clone()));
            }
        }
        let mut progressed = false;
        for mv in &moves {
            let before = violations.len();
            let Some(next) = apply(s.clone(), mv, &backend, &clients, &mut violations) else {
                continue;
            };
            transitions += 1;
            if violations.len() > before {
                violations.truncate(before + 8);
            }
            let key = next.key();
            if key != s.key() {
                progressed = true;
            }
            if next.commits.len() > s.commits.len() {
                commits += 1;
            }
            if seen.insert(key) {
                if seen.len() > config.max_states {
                    complete = false;
                    break;
                }
                frontier.push_back(next);
            }
        }
        if !complete {
            break;
        }
        if !progressed {
            terminal += 1;
            let open: Vec<_> = s
                .session
                .tickets()
                .iter()
                .filter(|(_, st)| !st.is_terminal())
                .map(|(t, _)| *t)
                .collect();
            if !open.is_empty() {
                violations.push(format!("stuck with open tickets {open:?}"));
            }
        }
    }
    ModelReport {
        states: seen.len(),
        transitions,
        terminal_states: terminal,
        commits_observed: commits,
        complete,
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_model_is_clean() {
        let r = model_check(&ModelConfig::default());
        assert!(r.complete, "{r:?}");
        assert!(r.violations.is_empty(), "{:?}", r.violations);
        assert!(r.commits_observed > 0);
        assert!(r.terminal_states > 0);
    }
}
