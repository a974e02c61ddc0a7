use std::time::Duration;

use super::*;
use holoforge_core::replication::{ReplicationMessage, TicketId, TicketStatus};
use holoforge_core::resolver::{replay, LogRecord, Provenance, Purpose};

fn committed(c: &TestClient, t: TicketId) -> bool {
    c.status(t) == Some(TicketStatus::Committed)
}

fn announce(c: &TestClient) -> Option<(TicketId, String, String, String)> {
    c.messages().find_map(|m| match m {
        ReplicationMessage::ResolutionAnnounce {
            ticket,
            ball,
            paddle,
            output,
        } => Some((*ticket, ball.clone(), paddle.clone(), output.clone())),
        _ => None,
    })
}

/// Two players reskin ball and paddles, then let the ball hit a paddle.
/// Panics on the first deviation from the expected stream and log.
pub async fn salmon_meets_knife() {
    let dir = tempfile::tempdir().unwrap();
    let server = server(dir.path()).await;
    let addr = server.addr;
    let s = create(addr, pong()).await;
    let mut cs = vec![TestClient::connect(addr, &s).await, TestClient::connect(addr, &s).await];
    assert_eq!(cs[0].player, Some(0));
    assert_eq!(cs[1].player, Some(1));

    // no contact until every reskin is in place
    for c in cs.iter_mut() {
        c.park().await;
    }
    cs[1].submit("change paddle to knife").await;
    cs[0].submit("change paddle to knife").await;
    cs[0].submit("change ball to salmon").await;
    pump(&mut cs, Duration::from_secs(20), |cs| {
        cs[0].my_tickets().len() == 2
            && cs[1].my_tickets().len() == 1
            && cs.iter().all(|c| c.my_tickets().iter().all(|t| committed(&cs[0], *t)))
    })
    .await;
    let snap = state(addr, &s.id).await;
    let m = snap.pong.unwrap();
    assert_eq!(m.ball_label, "salmon");
    assert_eq!(m.paddle_labels, ["knife".to_string(), "knife".to_string()]);
    let lines_before = std::fs::read_to_string(dir.path().join("completions.jsonl")).unwrap_or_default();
    assert_eq!(lines_before, "", "reskins never consult the language model");

    // both players track the ball until it meets a paddle
    let deadline = std::time::Instant::now() + Duration::from_secs(60);
    while announce(&cs[0]).is_none() {
        assert!(std::time::Instant::now() < deadline, "the ball never met a paddle");
        for c in cs.iter_mut() {
            if let Some(b) = c.ball_now() {
                c.paddle_to(b.x, b.y).await;
            }
            while c.recv(Duration::from_millis(4)).await {}
        }
    }
    for c in cs.iter_mut() {
        c.park().await;
    }
    let (ticket, ball, paddle, output) = announce(&cs[0]).unwrap();
    assert_eq!(
        (ball.as_str(), paddle.as_str(), output.as_str()),
        ("salmon", "knife", "sushi")
    );
    pump(&mut cs, Duration::from_secs(20), |cs| cs.iter().all(|c| committed(c, ticket))).await;

    // stream order on each client: announce, one ack per client, commit
    for c in &cs {
        let kinds: Vec<&'static str> =
            c.messages()
                .filter(|m| match m {
                    ReplicationMessage::ResolutionAnnounce { ticket: t, .. }
                    | ReplicationMessage::SpawnCommit { ticket: t, .. } => *t == ticket,
                    ReplicationMessage::AssetReady { asset_id, .. } => asset_id.contains("sushi"),
                    _ => false,
                })
                .map(|m| m.kind())
                .collect();
        assert_eq!(
            kinds,
            ["resolution_announce", "asset_ready", "asset_ready", "spawn_commit"],
            "{}",
            c.client
        );
        let ackers: Vec<_> = c
            .messages()
            .filter_map(|m| match m {
                ReplicationMessage::AssetReady { client, asset_id } if asset_id.contains("sushi") => Some(*client),
                _ => None,
            })
            .collect();
        assert!(ackers.contains(&cs[0].client) && ackers.contains(&cs[1].client));
    }

    let log = std::fs::read_to_string(dir.path().join("completions.jsonl")).unwrap();
    let records: Vec<LogRecord> = log.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 1, "{log}");
    let r = &records[0];
    assert_eq!(r.kind, Purpose::Collision);
    assert_eq!(r.ball.as_deref(), Some("salmon"));
    assert_eq!(r.paddle.as_deref(), Some("knife"));
    assert_eq!(r.output, "sushi");
    assert_eq!(r.provenance, Provenance::Mock);
    assert_eq!(r.temperature, 0.5);
    assert_eq!(r.raw_completion, " sushi.\n");

    let snap = state(addr, &s.id).await;
    assert_eq!(snap.pong.unwrap().ball_label, "sushi");

    // replicas agreed with every audit they answered
    pump(&mut cs, Duration::from_secs(20), |cs| cs.iter().all(|c| c.audits >= 2)).await;
    for c in &cs {
        assert_eq!(c.audit_mismatches, 0, "{}", c.client);
    }
    let sessions: Vec<serde_json::Value> = http()
        .get(format!("http://{addr}/sessions"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(sessions.len(), 1);
    assert_eq!(sessions[0]["clients"], 2);

    drop(cs);
    server.stop().await.unwrap();

    let trace = std::fs::read_to_string(dir.path().join("traces").join(format!("{}.jsonl", s.id))).unwrap();
    for kind in ["\"resolution_announce\"", "\"spawn_commit\"", "\"match_event\""] {
        assert!(trace.contains(kind), "trace lacks {kind}");
    }
    for line in trace.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["tick"].is_u64() && v["message"]["type"].is_string());
    }
    // the log replays to the same bytes
    let replayed: String = replay(dir.path().join("completions.jsonl"))
        .unwrap()
        .iter()
        .map(LogRecord::to_line)
        .collect();
    assert_eq!(replayed, log);
}
