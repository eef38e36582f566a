use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::thread;

use tiba_cli::commands::{run_sim, Serve};
use tiba_cli::service::{Service, HEARTBEAT_TIMEOUT};
use tiba_cli::wire::{ClientMessage, PoseMsg, ServerMessage, VssMsg};
use tiba_core::config::ScenarioConfig;
use tiba_core::nav::NavMode;
use tiba_core::pipeline::vss::relay;
use tiba_core::pipeline::{RelayCommand, TeleopInput};
use tiba_core::sim::Simulation;
use tungstenite::stream::MaybeTlsStream;
use tungstenite::{Message, WebSocket};

type Client = WebSocket<MaybeTlsStream<TcpStream>>;

fn connect(port: u16) -> Client {
    tungstenite::connect(format!("ws://127.0.0.1:{port}")).unwrap().0
}

fn send(ws: &mut Client, m: &ClientMessage) {
    ws.send(Message::Text(serde_json::to_string(m).unwrap())).unwrap();
}

fn next(ws: &mut Client) -> ServerMessage {
    loop {
        if let Message::Text(t) = ws.read().unwrap() {
            return serde_json::from_str(&t).unwrap();
        }
    }
}

fn next_pose(ws: &mut Client) -> PoseMsg {
    loop {
        if let ServerMessage::Pose(p) = next(ws) {
            return p;
        }
    }
}

fn next_vss(ws: &mut Client) -> VssMsg {
    loop {
        if let ServerMessage::Vss(v) = next(ws) {
            return v;
        }
    }
}

fn forward() -> ClientMessage {
    ClientMessage::Teleop(TeleopInput { axis_forward: 1.0, deadman: true, ..Default::default() })
}

/// Pose frames read until the setpoint is zero, including that frame.
fn frames_until_stopped(ws: &mut Client) -> usize {
    for n in 1..=100 {
        let p = next_pose(ws);
        if p.v == 0.0 && p.omega == 0.0 {
            return n;
        }
    }
    panic!("setpoint never returned to zero");
}

#[test]
fn teleop_session_over_websocket() {
    let mut cfg = ScenarioConfig::load(Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/teleop.cfg"))).unwrap();
    cfg.duration_s = 16.0;
    let sim = Simulation::new(cfg).unwrap();
    let service = Service::start(TcpListener::bind("127.0.0.1:0").unwrap(), HEARTBEAT_TIMEOUT).unwrap();
    let port = service.port();
    let mut ws = connect(port);
    while !service.has_connected() {
        thread::yield_now();
    }
    let runner = thread::spawn(move || run_sim(sim, None, Some(Serve { service: &service, speed: 2.0 })).unwrap());

    // hold forward
    let start = next_pose(&mut ws);
    assert_eq!(start.mode, NavMode::Teleop);
    let mut p = start.clone();
    for _ in 0..20 {
        send(&mut ws, &forward());
        p = next_pose(&mut ws);
    }
    assert!(p.v > 0.0, "{p:?}");
    assert!(p.x > start.x + 0.05, "{p:?}");

    // release: the next frame may already be in flight
    send(&mut ws, &ClientMessage::Teleop(TeleopInput::default()));
    assert!(frames_until_stopped(&mut ws) <= 2);
    for _ in 0..20 {
        next_pose(&mut ws);
    }
    let (a, b) = (next_pose(&mut ws), next_pose(&mut ws));
    assert!((b.x - a.x).abs() < 1e-3, "still moving: {a:?} {b:?}");

    // hold, then go silent without releasing
    for _ in 0..5 {
        send(&mut ws, &forward());
        next_pose(&mut ws);
    }
    let silent = next_pose(&mut ws);
    assert!(silent.v > 0.0);
    let n = frames_until_stopped(&mut ws);
    // frames are 50 ms of wall time apart at double speed
    assert!((n as u128) * 50 <= HEARTBEAT_TIMEOUT.as_millis() + 200, "{n} frames");

    // a second client holds forward and drops the connection
    let mut other = connect(port);
    for _ in 0..5 {
        send(&mut other, &forward());
        next_pose(&mut ws);
    }
    assert!(next_pose(&mut ws).v > 0.0);
    other.close(None).unwrap();
    while other.read().is_ok() {}
    assert!(frames_until_stopped(&mut ws) <= 2);

    // relays
    let before = next_vss(&mut ws);
    assert_eq!(before.state.relays[relay::LIGHTS], true);
    send(&mut ws, &ClientMessage::Relay(RelayCommand { name: relay::LIGHTS.into(), on: false }));
    let mut after = next_vss(&mut ws);
    for _ in 0..3 {
        if !after.state.relays[relay::LIGHTS] {
            break;
        }
        after = next_vss(&mut ws);
    }
    assert!(!after.state.relays[relay::LIGHTS]);
    assert!(after.state.bus12_current < before.state.bus12_current);

    let summary = runner.join().unwrap();
    assert!(summary.metrics.distance_traveled > 0.05);
}

#[test]
fn unparseable_messages_are_ignored() {
    let service = Service::start(TcpListener::bind("127.0.0.1:0").unwrap(), HEARTBEAT_TIMEOUT).unwrap();
    let mut ws = connect(service.port());
    ws.send(Message::Text("{\"type\":\"warp\"}".into())).unwrap();
    ws.send(Message::Text("not json".into())).unwrap();
    send(&mut ws, &ClientMessage::Mode { mode: NavMode::Lidar });
    let mut got = Vec::new();
    while got.is_empty() {
        got = service.drain_commands();
        thread::yield_now();
    }
    assert_eq!(got.len(), 1);
    assert!(matches!(got[0], tiba_core::sim::SimCommand::Mode(NavMode::Lidar)));
}
