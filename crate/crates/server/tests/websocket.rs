use std::sync::Arc;
use std::time::Duration;

use futures::{SinkExt, StreamExt};
use notebridge_core::{snapshot_decode, BlockKind, ErrorCode, Frame, ReplicaState};
use notebridge_server::{ws, Durability, Role, Store, SyncConfig, SyncServer};
use tokio_tungstenite::tungstenite::Message;

type Socket = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

async fn connect(addr: std::net::SocketAddr) -> Socket {
    let (socket, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/ws")).await.unwrap();
    socket
}

async fn send(socket: &mut Socket, frame: &Frame) {
    socket.send(Message::Text(frame.to_json().into())).await.unwrap();
}

/// Next data frame, skipping presence updates and pings.
async fn recv(socket: &mut Socket) -> Option<Frame> {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(5), socket.next()).await.expect("timed out")?;
        match msg.ok()? {
            Message::Text(t) => {
                let frame = Frame::from_json(t.as_str()).unwrap();
                if !matches!(frame, Frame::PresenceFanout { .. }) {
                    return Some(frame);
                }
            }
            Message::Close(_) => return None,
            _ => {}
        }
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn two_clients_sync_over_websocket() {
    let dir = tempfile::TempDir::new().unwrap();
    let store = Arc::new(Store::open(dir.path(), Durability::Flush).unwrap());
    let (a, alice) = store.create_user("alice", Role::Swd).unwrap();
    let (b, bob) = store.create_user("bob", Role::Pnt).unwrap();
    let class = store.create_class("Physics").unwrap();
    store.enroll(&class.class_id, &a.user_id).unwrap();
    store.enroll(&class.class_id, &b.user_id).unwrap();
    let doc = store.create_document(&class.class_id, "Waves", &a.user_id, 0).unwrap().doc_id;
    let hub = Arc::new(SyncServer::new(store.clone(), SyncConfig::default()));
    let addr = ws::spawn("127.0.0.1:0", hub, Duration::from_secs(15)).await.unwrap();

    let mut sa = connect(addr).await;
    send(&mut sa, &Frame::Hello { token: alice, doc: doc.clone(), have_seq: 0, replica: None }).await;
    let mut state = match recv(&mut sa).await.unwrap() {
        Frame::Welcome { snapshot, replica, .. } => {
            let mut s: ReplicaState = snapshot_decode(&snapshot.unwrap()).unwrap();
            s.set_replica(replica);
            s
        }
        other => panic!("expected welcome, got {other:?}"),
    };

    let mut sb = connect(addr).await;
    send(&mut sb, &Frame::Hello { token: bob, doc: doc.clone(), have_seq: 0, replica: None }).await;
    let mut bob_state = match recv(&mut sb).await.unwrap() {
        Frame::Welcome { snapshot, replica, participants, .. } => {
            assert_eq!(participants.len(), 2);
            let mut s: ReplicaState = snapshot_decode(&snapshot.unwrap()).unwrap();
            s.set_replica(replica);
            s
        }
        other => panic!("expected welcome, got {other:?}"),
    };

    let (block, mut ops) = state.local_insert_block_at(0, BlockKind::Heading1).unwrap();
    ops.extend(state.local_insert_text(block, 0, "Standing waves").unwrap());
    send(&mut sa, &Frame::Ops { ops, seq: None }).await;

    match recv(&mut sa).await.unwrap() {
        Frame::Ops { seq, .. } => assert_eq!(seq, Some(15)),
        other => panic!("expected ack, got {other:?}"),
    }
    match recv(&mut sb).await.unwrap() {
        Frame::Ops { ops, seq } => {
            assert_eq!(seq, Some(15));
            for op in ops {
                bob_state.integrate(op);
            }
        }
        other => panic!("expected ops, got {other:?}"),
    }
    assert_eq!(bob_state.state_hash(), state.state_hash());

    send(&mut sb, &Frame::Chitchat { emoji: "cc.thank_you".into() }).await;
    for socket in [&mut sa, &mut sb] {
        match recv(socket).await.unwrap() {
            Frame::ChitchatFanout { sender, .. } => assert_eq!(sender, b.user_id),
            other => panic!("expected chitchat, got {other:?}"),
        }
    }

    sa.send(Message::Text("{not json".into())).await.unwrap();
    match recv(&mut sa).await.unwrap() {
        Frame::Error { code, .. } => assert_eq!(code, ErrorCode::MalformedFrame),
        other => panic!("expected error, got {other:?}"),
    }
    assert_eq!(store.op_count(&doc).unwrap(), 15);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn bad_token_is_refused_and_closed() {
    let dir = tempfile::TempDir::new().unwrap();
    let store = Arc::new(Store::open(dir.path(), Durability::Flush).unwrap());
    let hub = Arc::new(SyncServer::new(store, SyncConfig::default()));
    let addr = ws::spawn("127.0.0.1:0", hub, Duration::from_secs(15)).await.unwrap();
    let mut s = connect(addr).await;
    send(&mut s, &Frame::Hello { token: "u1.00".into(), doc: "d1".into(), have_seq: 0, replica: None }).await;
    match recv(&mut s).await.unwrap() {
        Frame::Error { code, .. } => assert_eq!(code, ErrorCode::AuthFailed),
        other => panic!("expected error, got {other:?}"),
    }
    assert!(recv(&mut s).await.is_none());
}
