use std::future::IntoFuture;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use futures::{SinkExt, StreamExt};
use serde_json::{json, Value};
use timbre::session::SessionState;
use timbre_service::{router, AppState, CLOSE_BAD_VERSION, CLOSE_FULL, CLOSE_PROTOCOL};
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::protocol::frame::coding::CloseCode;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

async fn server() -> SocketAddr {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(axum::serve(listener, router(Arc::new(AppState::new(None)))).into_future());
    addr
}

async fn connect(addr: SocketAddr, session: &str, user: &str) -> Ws {
    connect_async(format!("ws://{addr}/session?session={session}&user={user}"))
        .await
        .unwrap()
        .0
}

async fn next_json(ws: &mut Ws) -> Value {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(5), ws.next())
            .await
            .expect("message in time")
            .unwrap()
            .unwrap();
        match msg {
            Message::Text(t) => return serde_json::from_str(t.as_str()).unwrap(),
            Message::Ping(_) | Message::Pong(_) => continue,
            other => panic!("unexpected {other:?}"),
        }
    }
}

async fn close_code(ws: &mut Ws) -> CloseCode {
    loop {
        match tokio::time::timeout(Duration::from_secs(5), ws.next())
            .await
            .expect("close in time")
        {
            Some(Ok(Message::Close(Some(f)))) => return f.code,
            Some(Ok(Message::Text(_))) => continue,
            other => panic!("expected close, got {other:?}"),
        }
    }
}

async fn send(ws: &mut Ws, v: Value) {
    ws.send(Message::Text(v.to_string().into())).await.unwrap();
}

#[tokio::test]
async fn snapshot_then_deltas_with_awareness() {
    let addr = server().await;
    let mut a = connect(addr, "s1", "alice").await;
    let snap = next_json(&mut a).await;
    assert_eq!(snap["kind"], "snapshot");
    assert_eq!(snap["v"], 1);
    assert_eq!(snap["state"]["nodes"].as_object().unwrap().len(), 0);

    let mut b = connect(addr, "s1", "bob").await;
    let snap_b = next_json(&mut b).await;
    assert_eq!(snap_b["state"]["users"].as_object().unwrap().len(), 2);
    let join = next_json(&mut a).await;
    assert_eq!(
        (join["type"].as_str(), join["user"].as_str()),
        (Some("join"), Some("bob"))
    );

    send(
        &mut a,
        json!({"v":1,"type":"create_node","payload":{"id":"n1","position":[0.0,0.0]}}),
    )
    .await;
    send(
        &mut a,
        json!({"v":1,"type":"move_node","payload":{"id":"n1","position":[0.3,-0.2]}}),
    )
    .await;
    for ws in [&mut a, &mut b] {
        let created = next_json(ws).await;
        assert_eq!(created["type"], "create_node");
        let moved = next_json(ws).await;
        assert_eq!(moved["type"], "move_node");
        assert_eq!(moved["user"], "alice");
        assert_eq!(
            moved["seq"].as_u64().unwrap(),
            created["seq"].as_u64().unwrap() + 1
        );
    }
}

#[tokio::test]
async fn rejected_event_is_reported_to_sender_only() {
    let addr = server().await;
    let mut a = connect(addr, "s2", "alice").await;
    next_json(&mut a).await;
    send(
        &mut a,
        json!({"v":1,"type":"move_node","payload":{"id":"ghost","position":[0.0,0.0]}}),
    )
    .await;
    let err = next_json(&mut a).await;
    assert_eq!(err["kind"], "error");
    assert_eq!(err["code"], "unknown_entity");
    // still connected
    send(
        &mut a,
        json!({"v":1,"type":"create_node","payload":{"id":"n","position":[0.1,0.1]}}),
    )
    .await;
    assert_eq!(next_json(&mut a).await["type"], "create_node");
}

#[tokio::test]
async fn sixth_user_is_rejected() {
    let addr = server().await;
    let mut clients = Vec::new();
    for i in 0..5 {
        let mut c = connect(addr, "full", &format!("u{i}")).await;
        assert_eq!(next_json(&mut c).await["kind"], "snapshot");
        clients.push(c);
    }
    let mut sixth = connect(addr, "full", "u5").await;
    assert_eq!(close_code(&mut sixth).await, CloseCode::from(CLOSE_FULL));
}

#[tokio::test]
async fn protocol_errors_close_with_codes() {
    let addr = server().await;
    let mut a = connect(addr, "s3", "alice").await;
    next_json(&mut a).await;
    a.send(Message::Text("{not json".into())).await.unwrap();
    assert_eq!(close_code(&mut a).await, CloseCode::from(CLOSE_PROTOCOL));

    let mut b = connect(addr, "s3", "bob").await;
    next_json(&mut b).await;
    send(&mut b, json!({"v":99,"type":"tick","payload":{"dt":0.1}})).await;
    assert_eq!(close_code(&mut b).await, CloseCode::from(CLOSE_BAD_VERSION));

    let bad = connect_async(format!("ws://{addr}/session?session=s3")).await;
    assert!(bad.is_err());
}

#[tokio::test]
async fn clients_converge_with_gapless_sequence() {
    let addr = server().await;
    let users = ["u0", "u1", "u2"];
    let mut clients = Vec::new();
    for u in users {
        let mut c = connect(addr, "conv", u).await;
        let snap = next_json(&mut c).await;
        clients.push((c, snap["seq"].as_u64().unwrap()));
    }
    // drain the later joins
    for (i, (c, seq)) in clients.iter_mut().enumerate() {
        for _ in i + 1..users.len() {
            *seq = next_json(c).await["seq"].as_u64().unwrap();
        }
    }
    let per_client = 20;
    for (i, (c, _)) in clients.iter_mut().enumerate() {
        send(c, json!({"v":1,"type":"create_node","payload":{"id":format!("n{i}"),"position":[0.0,0.0]}})).await;
        for k in 0..per_client - 1 {
            let x = (k as f64) / 40.0;
            send(c, json!({"v":1,"type":"move_node","payload":{"id":format!("n{i}"),"position":[x,-x]}})).await;
        }
    }
    let total = users.len() * per_client;
    let mut hashes = Vec::new();
    for (c, last) in clients.iter_mut() {
        let mut hash = String::new();
        for _ in 0..total {
            let m = next_json(c).await;
            let seq = m["seq"].as_u64().unwrap();
            assert_eq!(seq, *last + 1, "gapless");
            *last = seq;
            hash = m["hash"].as_str().unwrap().to_string();
        }
        hashes.push(hash);
    }
    assert!(hashes.windows(2).all(|w| w[0] == w[1]));

    // a late joiner's snapshot carries the same state plus its own join
    let mut late = connect(addr, "conv", "late").await;
    let snap = next_json(&mut late).await;
    let state: SessionState = serde_json::from_value(snap["state"].clone()).unwrap();
    assert_eq!(state.hash(), snap["hash"].as_str().unwrap());
    assert_eq!(state.nodes.len(), 3);
}
