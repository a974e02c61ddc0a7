//! One task per session. It owns the [`SessionState`]; sockets and HTTP
//! handlers talk to it only through [`Command`]s.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use holoforge_core::replication::{
    Backend, ClientId, ClientMessage, Envelope, Mode, PrepError, Prepared, ReplicationMessage, RequestBody, SessionError,
    SessionState, SubmitError, TicketId, WorldSnapshot,
};
use serde::Serialize;
use tokio::sync::{mpsc, oneshot, watch};
use tokio::time::MissedTickBehavior;
use tracing::{debug, warn};

pub struct Joined {
    pub client: ClientId,
    pub frames: mpsc::UnboundedReceiver<Envelope>,
}

pub enum Command {
    Join {
        client: ClientId,
        reply: oneshot::Sender<Result<Joined, SessionError>>,
    },
    Leave(ClientId),
    Inbound(ClientId, ClientMessage),
    Snapshot(oneshot::Sender<WorldSnapshot>),
    Close,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub id: String,
    pub mode: Mode,
    pub tick: u64,
    pub clients: usize,
    pub time_scale: f64,
    pub pending: Option<TicketId>,
    pub queued: usize,
}

impl Summary {
    fn of(s: &SessionState) -> Self {
        Self {
            id: s.id().to_owned(),
            mode: s.mode(),
            tick: s.tick(),
            clients: s.members().count(),
            time_scale: s.time_scale(),
            pending: s.pending().map(|p| p.request.ticket),
            queued: s.queue().count(),
        }
    }
}

#[derive(Serialize)]
struct TraceLine<'a> {
    tick: u64,
    message: &'a ReplicationMessage,
}

/// Every broadcast of one session, one JSON object per line.
struct TraceWriter {
    out: Option<BufWriter<File>>,
}

impl TraceWriter {
    fn open(path: &Path) -> Self {
        let file = path
            .parent()
            .map_or(Ok(()), std::fs::create_dir_all)
            .and_then(|_| OpenOptions::new().create(true).append(true).open(path));
        match file {
            Ok(f) => Self {
                out: Some(BufWriter::new(f)),
            },
            Err(e) => {
                warn!(path = %path.display(), error = %e, "match trace disabled");
                Self { out: None }
            }
        }
    }

    fn write(&mut self, entries: &[(u64, ReplicationMessage)]) {
        let Some(out) = self.out.as_mut() else {
            return;
        };
        let mut res = Ok(());
        for (tick, message) in entries {
            let line = serde_json::to_string(&TraceLine { tick: *tick, message }).expect("messages serialize");
            res = res.and_then(|_| writeln!(out, "{line}"));
        }
        if let Err(e) = res.and_then(|_| out.flush()) {
            warn!(error = %e, "match trace write failed");
            self.out = None;
        }
    }
}

pub struct LoopConfig {
    pub loop_hz: f64,
    pub trace_path: std::path::PathBuf,
}

type PrepResult = (TicketId, Result<Prepared, PrepError>);
type Interpreted = (u64, ClientId, String, Result<RequestBody, SubmitError>);

struct Loop {
    session: SessionState,
    backend: Arc<dyn Backend>,
    sockets: BTreeMap<ClientId, mpsc::UnboundedSender<Envelope>>,
    prep_tx: mpsc::UnboundedSender<PrepResult>,
    prep_rx: mpsc::UnboundedReceiver<PrepResult>,
    interp_tx: mpsc::UnboundedSender<Interpreted>,
    interp_rx: mpsc::UnboundedReceiver<Interpreted>,
    /// Interpretations finish in any order but are submitted in arrival order.
    interp_issued: u64,
    interp_next: u64,
    interp_done: BTreeMap<u64, (ClientId, String, Result<RequestBody, SubmitError>)>,
    trace: TraceWriter,
    summary: watch::Sender<Summary>,
}

/// Spawn the loop for `session`. The returned sender stays valid until
/// [`Command::Close`] or until every sender is dropped.
pub fn spawn(
    session: SessionState,
    backend: Arc<dyn Backend>,
    config: LoopConfig,
) -> (
    mpsc::UnboundedSender<Command>,
    watch::Receiver<Summary>,
    tokio::task::JoinHandle<()>,
) {
    let (tx, rx) = mpsc::unbounded_channel();
    let (summary, summary_rx) = watch::channel(Summary::of(&session));
    let (prep_tx, prep_rx) = mpsc::unbounded_channel();
    let (interp_tx, interp_rx) = mpsc::unbounded_channel();
    let state = Loop {
        session: session.with_journal(),
        backend,
        sockets: BTreeMap::new(),
        prep_tx,
        prep_rx,
        interp_tx,
        interp_rx,
        interp_issued: 0,
        interp_next: 0,
        interp_done: BTreeMap::new(),
        trace: TraceWriter::open(&config.trace_path),
        summary,
    };
    let period = Duration::from_secs_f64(1.0 / config.loop_hz);
    let handle = tokio::spawn(state.run(rx, period));
    (tx, summary_rx, handle)
}

impl Loop {
    async fn run(mut self, mut rx: mpsc::UnboundedReceiver<Command>, period: Duration) {
        let mut interval = tokio::time::interval(period);
        interval.set_missed_tick_behavior(MissedTickBehavior::Delay);
        loop {
            interval.tick().await;
            let (mut inbound, mut programs) = (Vec::new(), Vec::new());
            loop {
                match rx.try_recv() {
                    Ok(Command::Close) | Err(mpsc::error::TryRecvError::Disconnected) => {
                        self.flush();
                        return;
                    }
                    Ok(cmd) => self.command(cmd, &mut inbound, &mut programs),
                    Err(mpsc::error::TryRecvError::Empty) => break,
                }
            }
            self.interpret(programs);
            self.tick(inbound);
        }
    }

    fn command(&mut self, cmd: Command, inbound: &mut Vec<(ClientId, ClientMessage)>, programs: &mut Vec<(ClientId, String)>) {
        match cmd {
            Command::Join { client, reply } => {
                let result = self.session.join(client).map(|_| {
                    let (tx, frames) = mpsc::unbounded_channel();
                    self.sockets.insert(client, tx);
                    Joined { client, frames }
                });
                // the join snapshot goes out with this tick's outbox
                let _ = reply.send(result);
            }
            Command::Leave(client) => {
                self.session.leave(client);
                self.sockets.remove(&client);
            }
            Command::Inbound(client, ClientMessage::SubmitCommand { text }) if self.session.mode() == Mode::Holodeck => {
                programs.push((client, text));
            }
            Command::Inbound(client, msg) => inbound.push((client, msg)),
            Command::Snapshot(reply) => {
                let _ = reply.send(self.session.world().snapshot());
            }
            Command::Close => {}
        }
    }

    /// Program generation may call a remote model, so it runs off the loop.
    /// Same-tick submissions are ordered by client id.
    fn interpret(&mut self, mut programs: Vec<(ClientId, String)>) {
        programs.sort_by_key(|(c, _)| *c);
        for (client, text) in programs {
            let seq = self.interp_issued;
            self.interp_issued += 1;
            let world = self.session.world().clone();
            let (backend, tx) = (self.backend.clone(), self.interp_tx.clone());
            tokio::task::spawn_blocking(move || {
                let r = backend.interpret(&world, &text);
                let _ = tx.send((seq, client, text, r));
            });
        }
    }

    fn tick(&mut self, inbound: Vec<(ClientId, ClientMessage)>) {
        while let Ok((ticket, result)) = self.prep_rx.try_recv() {
            self.session.complete_preparation(ticket, result);
        }
        while let Ok((seq, client, text, body)) = self.interp_rx.try_recv() {
            self.interp_done.insert(seq, (client, text, body));
        }
        while let Some((client, text, body)) = self.interp_done.remove(&self.interp_next) {
            self.interp_next += 1;
            if let Err(e) = self.session.submit(client, &text, body) {
                debug!(%client, error = %e, "submission from a departed client");
            }
        }
        let backend = self.backend.clone();
        let prep_tx = self.prep_tx.clone();
        let out = self.session.tick_with(inbound, &*self.backend, |_, job| {
            let (backend, tx) = (backend.clone(), prep_tx.clone());
            tokio::task::spawn_blocking(move || {
                let r = backend.prepare(&job);
                let _ = tx.send((job.ticket, r));
            });
        });
        for o in out {
            if let Some(tx) = self.sockets.get(&o.to) {
                if tx.send(o.envelope).is_err() {
                    self.sockets.remove(&o.to);
                }
            }
        }
        self.flush();
        self.summary.send_replace(Summary::of(&self.session));
    }

    fn flush(&mut self) {
        let journal = self.session.take_journal();
        if !journal.is_empty() {
            self.trace.write(&journal);
        }
    }
}
