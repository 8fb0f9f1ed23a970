mod common;

use std::io::Write;
use std::net::TcpStream;
use std::time::{Duration, Instant};

use asab::bridge::{
    BridgeClient, BridgeConfig, BridgeHandle, GatewayReply, TOPIC_CLOUD, TOPIC_MODE,
};
use asab::pointcloud::{random_cloud, ShadingMode};
use asab::wire::{encode, Body, Role, SubscribeAction, WireMessage};
use tungstenite::Message;

fn wait_for(what: &str, mut f: impl FnMut() -> bool) {
    let t0 = Instant::now();
    while !f() {
        assert!(
            t0.elapsed() < Duration::from_secs(5),
            "timed out waiting for {what}"
        );
        std::thread::sleep(Duration::from_millis(5));
    }
}

fn cloud(ts: u64, n: usize) -> WireMessage {
    let points = random_cloud(n, 2.0, ts).into_points();
    WireMessage::new(ts, "map", Body::PointCloud { points })
}

#[test]
fn stalled_tcp_subscriber_does_not_block_publishers() {
    let bridge = BridgeHandle::start(BridgeConfig::ephemeral()).unwrap();
    let mut stalled = TcpStream::connect(bridge.tcp_addr()).unwrap();
    let sub = WireMessage::new(
        0,
        "",
        Body::Subscribe {
            action: SubscribeAction::Subscribe,
            topic: TOPIC_CLOUD.into(),
        },
    );
    stalled.write_all(&encode(&sub).unwrap()).unwrap();
    let healthy = BridgeClient::connect(bridge.tcp_addr(), "healthy", Role::Subscriber).unwrap();
    healthy.subscribe(TOPIC_CLOUD).unwrap();
    wait_for("two subscribers", || {
        bridge.hub().subscribers(TOPIC_CLOUD).unwrap().len() == 2
    });

    // 200 clouds of ~150 kB overflow every socket buffer on the stalled path
    let publisher = BridgeClient::connect(bridge.tcp_addr(), "pub", Role::Publisher).unwrap();
    let t0 = Instant::now();
    for ts in 1..=200 {
        publisher.publish(&cloud(ts, 10_000)).unwrap();
    }
    wait_for("all published", || bridge.hub().published() >= 200);
    assert!(
        t0.elapsed() < Duration::from_secs(5),
        "publishing took {:?}",
        t0.elapsed()
    );

    let mut last = 0;
    while last < 200 {
        let m = healthy
            .recv_timeout(Duration::from_secs(5))
            .expect("healthy subscriber starves");
        assert!(
            m.timestamp_ns > last,
            "out of order: {} after {last}",
            m.timestamp_ns
        );
        last = m.timestamp_ns;
    }

    // the stalled peer is still served once it reads again, and in order
    stalled
        .set_read_timeout(Some(Duration::from_secs(5)))
        .unwrap();
    let mut reader = std::io::BufReader::new(stalled);
    let mut seen = Vec::new();
    while seen.last() != Some(&200) {
        let (m, _) = asab::wire::read_frame(&mut reader)
            .unwrap()
            .expect("bridge closed the stalled session");
        if let Body::PointCloud { .. } = m.body {
            seen.push(m.timestamp_ns);
        }
    }
    assert!(seen.windows(2).all(|w| w[0] < w[1]));
    assert!(seen.len() < 200, "nothing was dropped for the stalled peer");
}

#[test]
fn disconnect_releases_subscriptions() {
    let bridge = BridgeHandle::start(BridgeConfig::ephemeral()).unwrap();
    let c = BridgeClient::connect(bridge.tcp_addr(), "gone", Role::Subscriber).unwrap();
    c.subscribe(TOPIC_CLOUD).unwrap();
    wait_for("subscription", || {
        bridge.hub().subscribers(TOPIC_CLOUD).unwrap().len() == 1
    });
    drop(c);
    wait_for("cleanup", || {
        bridge.hub().subscribers(TOPIC_CLOUD).unwrap().is_empty()
            && bridge.hub().session_count() == 0
    });
    // a half-written frame followed by a hang-up is also cleaned up
    let mut raw = TcpStream::connect(bridge.tcp_addr()).unwrap();
    wait_for("raw session", || bridge.hub().session_count() == 1);
    raw.write_all(b"ASAB\x01").unwrap();
    drop(raw);
    wait_for("raw cleanup", || bridge.hub().session_count() == 0);
    assert_eq!(bridge.hub().published(), 0);
}

fn read_text(
    ws: &mut tungstenite::WebSocket<tungstenite::stream::MaybeTlsStream<TcpStream>>,
) -> String {
    loop {
        if let Message::Text(t) = ws.read().unwrap() {
            return t.to_string();
        }
    }
}

fn read_binary(
    ws: &mut tungstenite::WebSocket<tungstenite::stream::MaybeTlsStream<TcpStream>>,
) -> Vec<u8> {
    loop {
        if let Message::Binary(b) = ws.read().unwrap() {
            return b.to_vec();
        }
    }
}

#[test]
fn gateway_speaks_the_documented_json_and_frames() {
    let bridge = BridgeHandle::start(BridgeConfig::ephemeral()).unwrap();
    let (mut ws, _) = tungstenite::connect(format!("ws://{}/", bridge.ws_addr().unwrap())).unwrap();
    if let tungstenite::stream::MaybeTlsStream::Plain(s) = ws.get_ref() {
        s.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
    }

    ws.send(Message::text(r#"{"op":"subscribe","topic":"map/cloud"}"#))
        .unwrap();
    assert_eq!(
        read_text(&mut ws),
        r#"{"op":"subscribed","topic":"map/cloud"}"#
    );
    ws.send(Message::text(r#"{"op":"ping"}"#)).unwrap();
    assert_eq!(read_text(&mut ws), r#"{"op":"pong"}"#);
    ws.send(Message::text(r#"{"op":"subscribe","topic":"no/such"}"#))
        .unwrap();
    let err: GatewayReply = serde_json::from_str(&read_text(&mut ws)).unwrap();
    assert!(matches!(err, GatewayReply::Error { .. }));

    // the browser receives the exact bytes frozen in the golden fixture
    let (_, golden) = common::golden_messages()
        .into_iter()
        .find(|(n, _)| *n == "point_cloud")
        .unwrap();
    bridge.hub().publish(TOPIC_CLOUD, golden).unwrap();
    assert_eq!(
        read_binary(&mut ws),
        common::read_hex("golden/point_cloud.hex")
    );

    // a mode change from the browser reaches framed subscribers
    let tcp = BridgeClient::connect(bridge.tcp_addr(), "ui-mirror", Role::Subscriber).unwrap();
    tcp.subscribe(TOPIC_MODE).unwrap();
    wait_for("mode subscriber", || {
        bridge.hub().subscribers(TOPIC_MODE).unwrap().len() == 1
    });
    ws.send(Message::text(
        r#"{"op":"mode","mode":"natural_color","near_cutoff":2,"far_cutoff":4}"#,
    ))
    .unwrap();
    assert_eq!(read_text(&mut ws), r#"{"op":"ok"}"#);
    let m = tcp.recv_timeout(Duration::from_secs(5)).unwrap();
    assert_eq!(
        m.body,
        Body::ModeChange {
            mode: ShadingMode::natural_color(2.0, 4.0).unwrap()
        }
    );
    ws.send(Message::text(
        r#"{"op":"mode","mode":"natural_color","near_cutoff":4,"far_cutoff":2}"#,
    ))
    .unwrap();
    let err: GatewayReply = serde_json::from_str(&read_text(&mut ws)).unwrap();
    assert!(matches!(err, GatewayReply::Error { .. }));
}
