/*
Copyright 2026 The Inchworm Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

use std::net::TcpStream;
use std::time::{Duration, Instant};

use inchworm_core::End;
use inchworm_sim::protocol::{
    read_frame, write_frame, ClientMessage, ServerMessage, PROTOCOL_VERSION,
};
use inchworm_sim::service::{serve, ServiceConfig, ServiceHandle};
use inchworm_sim::{Command, ErrorCode, Scenario, TraceEvent};

fn start(snapshot_hz: f64) -> ServiceHandle {
    let mut config = ServiceConfig::new("127.0.0.1:0".parse().unwrap());
    config.snapshot_hz = snapshot_hz;
    serve(&Scenario::mockup(), config).unwrap()
}

struct Client {
    stream: TcpStream,
}

impl Client {
    fn raw(handle: &ServiceHandle) -> Client {
        let stream = TcpStream::connect(handle.local_addr()).unwrap();
        stream
            .set_read_timeout(Some(Duration::from_secs(5)))
            .unwrap();
        Client { stream }
    }

    /// Connects and completes the handshake, returning the welcome.
    fn connect(handle: &ServiceHandle) -> (Client, ServerMessage) {
        let mut c = Client::raw(handle);
        c.send(&ClientMessage::Hello {
            protocol: PROTOCOL_VERSION.into(),
            client: Some("test".into()),
        });
        let welcome = c.recv().expect("welcome");
        (c, welcome)
    }

    fn send(&mut self, msg: &ClientMessage) {
        write_frame(&mut self.stream, msg).unwrap();
    }

    fn command(&mut self, id: u64, command: Command) {
        self.send(&ClientMessage::Command {
            id: Some(id),
            command,
        });
    }

    fn recv(&mut self) -> Option<ServerMessage> {
        let body = read_frame(&mut self.stream).ok()??;
        Some(serde_json::from_slice(&body).expect("server sent valid JSON"))
    }

    /// Reads until `pick` accepts a message or the stream ends.
    fn until<T>(&mut self, mut pick: impl FnMut(&ServerMessage) -> Option<T>) -> Option<T> {
        while let Some(msg) = self.recv() {
            if let Some(v) = pick(&msg) {
                return Some(v);
            }
        }
        None
    }
}

#[test]
fn handshake_returns_the_scene() {
    let handle = start(20.0);
    let (mut c, welcome) = Client::connect(&handle);
    let ServerMessage::Welcome {
        protocol,
        period,
        snapshot_hz,
        scene,
        ..
    } = welcome
    else {
        panic!("expected welcome, got {welcome:?}");
    };
    assert_eq!(protocol, PROTOCOL_VERSION);
    assert_eq!(period, 0.01);
    assert_eq!(snapshot_hz, 20.0);
    assert_eq!(scene.interfaces.len(), 8);
    assert_eq!(scene.blocks.len(), 14);
    assert_eq!(scene.links.len(), 8);
    let snap = c.until(|m| match m {
        ServerMessage::Snapshot(s) => Some(s.clone()),
        _ => None,
    });
    let snap = snap.expect("a snapshot follows the welcome");
    assert_eq!(snap.segments.len(), 8);
    assert!(snap.docks[0].coupled && snap.docks[1].coupled);
    c.send(&ClientMessage::Bye);
    let summary = handle.shutdown();
    assert!(summary.ticks > 0);
}

#[test]
fn snapshots_arrive_at_the_configured_rate() {
    let handle = start(20.0);
    let (mut c, _) = Client::connect(&handle);
    let window = Duration::from_secs(2);
    let t0 = Instant::now();
    let mut ticks = Vec::new();
    while t0.elapsed() < window {
        if let Some(ServerMessage::Snapshot(s)) = c.recv() {
            ticks.push(s.tick);
        }
    }
    let elapsed = t0.elapsed().as_secs_f64();
    let rate = ticks.len() as f64 / elapsed;
    assert!(rate >= 18.0, "{rate:.1} Hz over {elapsed:.2} s");
    // Past the snapshot sent on connect, spacing is exactly five control ticks.
    for w in ticks[1..].windows(2) {
        assert_eq!(w[1] - w[0], 5, "{ticks:?}");
    }
    handle.shutdown();
}

#[test]
fn wrong_protocol_version_is_refused() {
    let handle = start(20.0);
    let mut c = Client::raw(&handle);
    c.send(&ClientMessage::Hello {
        protocol: "inchworm/0".into(),
        client: None,
    });
    match c.recv() {
        Some(ServerMessage::Error(e)) => assert_eq!(e.error.code, ErrorCode::VersionMismatch),
        other => panic!("expected an error, got {other:?}"),
    }
    assert!(c.recv().is_none(), "server should hang up");

    let mut c = Client::raw(&handle);
    c.send(&ClientMessage::Bye);
    match c.recv() {
        Some(ServerMessage::Error(e)) => assert_eq!(e.error.code, ErrorCode::VersionMismatch),
        other => panic!("expected an error, got {other:?}"),
    }
    handle.shutdown();
}

#[test]
fn malformed_frames_get_an_error_and_the_session_survives() {
    let handle = start(20.0);
    let (mut c, _) = Client::connect(&handle);
    write_frame(
        &mut c.stream,
        &serde_json::json!({"type": "command", "id": 1, "command": {"op": "fly"}}),
    )
    .unwrap();
    let code = c.until(|m| match m {
        ServerMessage::Error(e) => Some(e.error.code),
        _ => None,
    });
    assert_eq!(code, Some(ErrorCode::Malformed));

    c.command(2, Command::Undock { end: End::E });
    let acked = c.until(|m| match m {
        ServerMessage::Ack { id } => Some(*id),
        ServerMessage::Error(e) => panic!("unexpected error {e:?}"),
        _ => None,
    });
    assert_eq!(acked, Some(Some(2)));
    let before = handle_ticks(&mut c);
    std::thread::sleep(Duration::from_millis(300));
    let after = handle_ticks(&mut c);
    assert!(after > before, "control loop stalled");
    let summary = handle.shutdown();
    let echoed = summary.events.iter().any(|(_, e)| {
        matches!(
            e,
            TraceEvent::Command {
                id: Some(2),
                command: Command::Undock { end: End::E },
                ..
            }
        )
    });
    assert!(echoed, "the accepted command is recorded");
}

fn handle_ticks(c: &mut Client) -> u64 {
    c.until(|m| match m {
        ServerMessage::Snapshot(s) => Some(s.tick),
        _ => None,
    })
    .unwrap()
}

#[test]
fn refusals_carry_a_code_and_the_request_id() {
    let handle = start(20.0);
    let (mut c, _) = Client::connect(&handle);
    c.command(7, Command::Undock { end: End::E });
    c.command(8, Command::Undock { end: End::B });
    c.command(
        9,
        Command::PlanTo {
            end: End::B,
            interface: "nowhere".into(),
            seed: None,
            budget_s: None,
            duration_s: None,
        },
    );
    let mut replies = Vec::new();
    c.until(|m| {
        match m {
            ServerMessage::Ack { id } => replies.push((*id, None)),
            ServerMessage::Error(e) => replies.push((e.id, Some(e.error.code))),
            _ => {}
        }
        (replies.len() == 3).then_some(())
    });
    assert_eq!(
        replies,
        vec![
            (Some(7), None),
            (Some(8), Some(ErrorCode::LastConnectionError)),
            (Some(9), Some(ErrorCode::UnknownInterface)),
        ]
    );
    handle.shutdown();
}

#[test]
fn events_are_broadcast_to_every_client() {
    let handle = start(20.0);
    let (mut a, _) = Client::connect(&handle);
    let (mut b, _) = Client::connect(&handle);
    a.command(1, Command::Undock { end: End::E });
    for c in [&mut a, &mut b] {
        let seen = c.until(|m| match m {
            ServerMessage::Event {
                event: TraceEvent::Command { source, .. },
                ..
            } => Some(source.clone()),
            _ => None,
        });
        assert!(seen.is_some());
    }
    handle.shutdown();
}

#[test]
fn a_client_that_never_reads_does_not_stall_the_loop() {
    let mut config = ServiceConfig::new("127.0.0.1:0".parse().unwrap());
    config.snapshot_hz = 100.0;
    config.client_queue = 4;
    let handle = serve(&Scenario::mockup(), config).unwrap();
    let (_slow, _) = Client::connect(&handle);
    let (mut fast, _) = Client::connect(&handle);

    let t0 = Instant::now();
    let first = handle_ticks(&mut fast);
    let mut last = first;
    while t0.elapsed() < Duration::from_secs(3) {
        last = handle_ticks(&mut fast);
    }
    let elapsed = t0.elapsed().as_secs_f64();
    let simulated = (last - first) as f64 * 0.01;
    assert!(
        simulated > 0.9 * elapsed - 0.1,
        "loop ran {simulated:.2} s in {elapsed:.2} s"
    );
    let summary = handle.shutdown();
    assert!(summary.snapshots_sent > 0);
}

#[test]
fn shutdown_says_goodbye() {
    let handle = start(20.0);
    let (mut c, _) = Client::connect(&handle);
    handle_ticks(&mut c);
    let summary = std::thread::spawn(move || handle.shutdown());
    let reason = c.until(|m| match m {
        ServerMessage::Goodbye { reason } => Some(reason.clone()),
        _ => None,
    });
    assert!(reason.is_some());
    summary.join().unwrap();
}
