#![allow(dead_code)]

pub mod scenario;

use std::path::Path;
use std::time::{Duration, Instant};

use futures_util::{SinkExt, StreamExt};
use holoforge_core::math::Vec3;
use holoforge_core::pong::{paddle_key, rest_pose};
use holoforge_core::replication::{
    decode_envelope, ClientId, ClientMessage, Envelope, Mode, Replica, ReplicaAction, ReplicationMessage, TicketId, TicketStatus,
    World, WorldSnapshot,
};
use holoforge_gateway::{start, GatewayConfig, Running, SessionCreated};
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

pub const LOOP_HZ: f64 = 120.0;

pub async fn server(data_dir: &Path) -> Running {
    server_with(data_dir, |_| {}).await
}

pub async fn server_with(data_dir: &Path, tweak: impl FnOnce(&mut GatewayConfig)) -> Running {
    let mut config = GatewayConfig {
        port: 0,
        data_dir: data_dir.to_path_buf(),
        loop_hz: LOOP_HZ,
        ..GatewayConfig::default()
    };
    tweak(&mut config);
    start(config).await.expect("gateway starts")
}

pub fn http() -> reqwest::Client {
    reqwest::Client::new()
}

pub async fn create(addr: std::net::SocketAddr, body: serde_json::Value) -> SessionCreated {
    let resp = http()
        .post(format!("http://{addr}/sessions"))
        .json(&body)
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), 201, "{:?}", resp.text().await);
    resp.json().await.unwrap()
}

pub async fn state(addr: std::net::SocketAddr, id: &str) -> WorldSnapshot {
    let resp = http().get(format!("http://{addr}/sessions/{id}/state")).send().await.unwrap();
    assert_eq!(resp.status(), 200);
    resp.json().await.unwrap()
}

/// A scripted player: keeps a replica, acknowledges downloads at once and
/// answers audits the way a real client would.
pub struct TestClient {
    ws: WebSocketStream<MaybeTlsStream<TcpStream>>,
    pub replica: Replica,
    pub client: ClientId,
    pub player: Option<usize>,
    pub log: Vec<Envelope>,
    pub audit_mismatches: usize,
    pub audits: usize,
    last: (u64, Instant),
}

impl TestClient {
    pub async fn connect(addr: std::net::SocketAddr, s: &SessionCreated) -> Self {
        let url = format!("ws://{addr}/sessions/{}/ws?token={}", s.id, s.token);
        let (ws, _) = connect_async(url).await.expect("socket opens");
        let mut c = Self {
            ws,
            replica: Replica::new(ClientId(0), s.id.clone(), World::new(s.mode, 0)),
            client: ClientId(0),
            player: None,
            log: Vec::new(),
            audit_mismatches: 0,
            audits: 0,
            last: (0, Instant::now()),
        };
        let deadline = Instant::now() + Duration::from_secs(10);
        while c.client == ClientId(0) {
            assert!(Instant::now() < deadline, "no join notice");
            c.recv(Duration::from_millis(100)).await;
        }
        c
    }

    pub async fn send(&mut self, msg: &ClientMessage) {
        let text = serde_json::to_string(msg).unwrap();
        self.ws.send(Message::Text(text.into())).await.unwrap();
    }

    pub async fn submit(&mut self, text: &str) {
        self.send(&ClientMessage::SubmitCommand { text: text.into() }).await;
    }

    /// Move the own paddle (pong players only).
    pub async fn paddle_to(&mut self, x: f64, y: f64) {
        let p = self.player.expect("a player");
        let z = rest_pose(p).z;
        self.send(&ClientMessage::JointPose {
            key: paddle_key(p),
            position: Vec3::new(x, y, z),
        })
        .await;
    }

    pub async fn park(&mut self) {
        self.paddle_to(0.0, 2.8).await;
    }

    /// Ball position extrapolated to the server's current tick.
    pub fn ball_now(&self) -> Option<Vec3> {
        let ahead = (self.last.1.elapsed().as_secs_f64() * LOOP_HZ) as u64;
        let mut w = self.replica.world().clone();
        let target = self.last.0 + ahead.min(30);
        while w.tick() < target {
            w.step();
        }
        let m = w.pong.as_ref()?;
        w.scene.entity(m.ball).map(|e| e.position)
    }

    /// Handle at most one frame; false on timeout.
    pub async fn recv(&mut self, wait: Duration) -> bool {
        let msg = match tokio::time::timeout(wait, self.ws.next()).await {
            Ok(Some(Ok(m))) => m,
            Ok(other) => panic!("socket ended: {other:?}"),
            Err(_) => return false,
        };
        let env = match msg {
            Message::Binary(b) => decode_envelope(&b).expect("valid frame"),
            Message::Text(t) => serde_json::from_str(&t).expect("valid envelope"),
            _ => return true,
        };
        self.last = (self.last.0.max(env.tick), Instant::now());
        if let ReplicationMessage::Joined { client, player } = &env.message {
            self.client = *client;
            self.replica.client = *client;
            self.player = *player;
        }
        let audit = match &env.message {
            ReplicationMessage::StateHash { tick, digest } => Some((*tick, digest.clone())),
            _ => None,
        };
        let mut actions = self.replica.receive(env.clone(), Duration::ZERO);
        if let Some((tick, digest)) = audit {
            self.audits += 1;
            if self.replica.world().tick() != tick || self.replica.digest() != digest {
                self.audit_mismatches += 1;
            }
        }
        self.log.push(env);
        while let Some(a) = actions.pop() {
            match a {
                ReplicaAction::Send(m) => self.send(&m).await,
                ReplicaAction::Download { asset_id, .. } => actions.extend(self.replica.download_finished(&asset_id)),
            }
        }
        true
    }

    pub fn messages(&self) -> impl Iterator<Item = &ReplicationMessage> {
        self.log.iter().map(|e| &e.message)
    }

    pub fn my_tickets(&self) -> Vec<TicketId> {
        self.messages()
            .filter_map(|m| match m {
                ReplicationMessage::CommandRequest {
                    ticket, client: Some(c), ..
                } if *c == self.client => Some(*ticket),
                _ => None,
            })
            .collect()
    }

    pub fn status(&self, ticket: TicketId) -> Option<TicketStatus> {
        self.messages()
            .filter_map(|m| match m {
                ReplicationMessage::TicketStatus { ticket: t, status } if *t == ticket => Some(status.clone()),
                _ => None,
            })
            .last()
    }
}

/// Drain frames from every client until `done` holds.
pub async fn pump(clients: &mut [TestClient], timeout: Duration, mut done: impl FnMut(&[TestClient]) -> bool) {
    let deadline = Instant::now() + timeout;
    while !done(clients) {
        assert!(Instant::now() < deadline, "timed out");
        for c in clients.iter_mut() {
            while c.recv(Duration::from_millis(2)).await {}
        }
    }
}

pub fn pong() -> serde_json::Value {
    serde_json::json!({"mode": Mode::Pong, "seed": 7})
}
