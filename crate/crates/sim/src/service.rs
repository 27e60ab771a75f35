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

//! Live service: one thread owns the simulation and ticks it at 100 Hz,
//! an acceptor hands connections to per-client sessions, and everything
//! in between goes through bounded channels.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, SyncSender, TryRecvError, TrySendError};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use inchworm_core::rig::CONTROL_PERIOD;
use log::{debug, info, warn};

use crate::command::{Command, CommandError, ErrorCode};
use crate::protocol::{
    read_frame, write_frame, ClientMessage, ErrorReply, FrameError, Scene, ServerMessage,
    PROTOCOL_VERSION,
};
use crate::scenario::{Scenario, ScenarioError};
use crate::simulation::{Planning, Simulation};
use crate::trace::{Trace, TraceEvent, TraceWriter};

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub bind: SocketAddr,
    pub snapshot_hz: f64,
    /// Commands waiting for the control loop.
    pub mailbox_capacity: usize,
    /// Outgoing messages waiting for one client.
    pub client_queue: usize,
    pub handshake_timeout: Duration,
    /// Write the trace of the session to this file.
    pub trace_path: Option<PathBuf>,
}

impl ServiceConfig {
    pub fn new(bind: SocketAddr) -> Self {
        ServiceConfig {
            bind,
            snapshot_hz: 20.0,
            mailbox_capacity: 256,
            client_queue: 64,
            handshake_timeout: Duration::from_secs(5),
            trace_path: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{0}")]
    Io(#[from] io::Error),
}

/// What happened while the service was up.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ServiceSummary {
    pub ticks: u64,
    /// Every trace event with its tick.
    pub events: Vec<(u64, TraceEvent)>,
    pub snapshots_sent: u64,
    pub snapshots_dropped: u64,
    /// Clients dropped because they could not keep up with events.
    pub clients_evicted: u64,
}

enum LoopMsg {
    Connect {
        client: u64,
        tx: SyncSender<ServerMessage>,
        stream: TcpStream,
    },
    Disconnect {
        client: u64,
    },
    Command {
        client: u64,
        id: Option<u64>,
        command: Command,
    },
}

struct Client {
    tx: SyncSender<ServerMessage>,
    stream: TcpStream,
}

pub struct ServiceHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    control: JoinHandle<ServiceSummary>,
    acceptor: JoinHandle<()>,
}

impl ServiceHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops accepting, says goodbye to every client and returns the summary.
    pub fn shutdown(self) -> ServiceSummary {
        self.stop.store(true, Ordering::SeqCst);
        let _ = self.acceptor.join();
        self.control.join().unwrap_or_default()
    }

    /// Blocks until the service stops.
    pub fn wait(self) -> ServiceSummary {
        let _ = self.acceptor.join();
        self.control.join().unwrap_or_default()
    }
}

/// Starts the service on `config.bind` (port 0 picks a free port).
pub fn serve(scenario: &Scenario, config: ServiceConfig) -> Result<ServiceHandle, ServiceError> {
    let sim = Simulation::new(scenario, Planning::Background)?;
    let trace = match &config.trace_path {
        Some(path) => {
            let header = Trace::new(&scenario.name, sim.seed()).header;
            Some(TraceWriter::new(
                BufWriter::new(File::create(path)?),
                &header,
            )?)
        }
        None => None,
    };
    let listener = TcpListener::bind(config.bind)?;
    listener.set_nonblocking(true)?;
    let addr = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let (mailbox, inbox) = mpsc::sync_channel(config.mailbox_capacity);

    let control = {
        let stop = stop.clone();
        let config = config.clone();
        thread::Builder::new()
            .name("inchworm-control".into())
            .spawn(move || control_loop(sim, inbox, stop, &config, trace))?
    };
    let welcome = Arc::new(ServerMessage::Welcome {
        protocol: PROTOCOL_VERSION.into(),
        server: format!("inchworm-sim {}", env!("CARGO_PKG_VERSION")),
        period: CONTROL_PERIOD,
        snapshot_hz: config.snapshot_hz,
        scene: Scene::from_scenario(scenario),
    });
    let acceptor = {
        let stop = stop.clone();
        thread::Builder::new()
            .name("inchworm-accept".into())
            .spawn(move || accept_loop(listener, mailbox, welcome, stop, config))?
    };
    info!("serving {} on {addr}", scenario.name);
    Ok(ServiceHandle {
        addr,
        stop,
        control,
        acceptor,
    })
}

fn control_loop(
    mut sim: Simulation,
    inbox: Receiver<LoopMsg>,
    stop: Arc<AtomicBool>,
    config: &ServiceConfig,
    mut trace: Option<TraceWriter<BufWriter<File>>>,
) -> ServiceSummary {
    let period = Duration::from_secs_f64(CONTROL_PERIOD);
    let every = ((1.0 / CONTROL_PERIOD) / config.snapshot_hz)
        .round()
        .max(1.0) as u64;
    let mut clients: BTreeMap<u64, Client> = BTreeMap::new();
    let mut summary = ServiceSummary::default();
    let mut deadline = Instant::now();

    if let Some(w) = trace.as_mut() {
        if let Err(e) = w.write(&sim.record()) {
            warn!("trace disabled: {e}");
            trace = None;
        }
    }

    while !stop.load(Ordering::SeqCst) {
        loop {
            match inbox.try_recv() {
                Ok(LoopMsg::Connect { client, tx, stream }) => {
                    let c = Client { tx, stream };
                    if deliver(&c, ServerMessage::Snapshot(sim.snapshot())) {
                        clients.insert(client, c);
                    }
                }
                Ok(LoopMsg::Disconnect { client }) => {
                    clients.remove(&client);
                }
                Ok(LoopMsg::Command {
                    client,
                    id,
                    command,
                }) => {
                    let reply = match sim.apply(&format!("client:{client}"), id, command) {
                        Ok(()) => ServerMessage::Ack { id },
                        Err(error) => ServerMessage::Error(ErrorReply { id, error }),
                    };
                    if let Some(c) = clients.get(&client) {
                        if !deliver(c, reply) {
                            evict(&mut clients, client, &mut summary);
                        }
                    }
                }
                Err(TryRecvError::Empty) | Err(TryRecvError::Disconnected) => break,
            }
        }

        let record = sim.tick();
        if let Some(w) = trace.as_mut() {
            if let Err(e) = w.write(&record) {
                warn!("trace disabled: {e}");
                trace = None;
            }
        }
        for event in &record.events {
            summary.events.push((record.tick, event.clone()));
            let lagging: Vec<u64> = clients
                .iter()
                .filter(|(_, c)| {
                    !deliver(
                        c,
                        ServerMessage::Event {
                            tick: record.tick,
                            event: event.clone(),
                        },
                    )
                })
                .map(|(id, _)| *id)
                .collect();
            for id in lagging {
                evict(&mut clients, id, &mut summary);
            }
        }
        if record.tick.is_multiple_of(every) && !clients.is_empty() {
            let snapshot = sim.snapshot();
            for c in clients.values() {
                match c.tx.try_send(ServerMessage::Snapshot(snapshot.clone())) {
                    Ok(()) => summary.snapshots_sent += 1,
                    Err(_) => summary.snapshots_dropped += 1,
                }
            }
        }

        deadline += period;
        let now = Instant::now();
        if deadline > now {
            thread::sleep(deadline - now);
        } else if now - deadline > 10 * period {
            // Fell far behind (e.g. a suspended process): resynchronise
            // instead of running a burst of catch-up ticks.
            deadline = now;
        }
    }

    for (_, c) in clients {
        let _ = c.tx.try_send(ServerMessage::Goodbye {
            reason: "service stopping".into(),
        });
        drop(c.tx);
        // Ends the session's reader; its writer then flushes the goodbye
        // and closes the socket.
        let _ = c.stream.shutdown(Shutdown::Read);
    }
    if let Some(w) = trace.as_mut() {
        let _ = w.flush();
    }
    summary.ticks = sim.tick_count();
    summary
}

/// Queues a message that must not be lost. `false` when the client's queue
/// is full or gone.
fn deliver(client: &Client, message: ServerMessage) -> bool {
    client.tx.try_send(message).is_ok()
}

fn evict(clients: &mut BTreeMap<u64, Client>, id: u64, summary: &mut ServiceSummary) {
    if let Some(c) = clients.remove(&id) {
        warn!("client {id} cannot keep up; disconnecting");
        summary.clients_evicted += 1;
        let _ = c.stream.shutdown(Shutdown::Both);
    }
}

fn accept_loop(
    listener: TcpListener,
    mailbox: SyncSender<LoopMsg>,
    welcome: Arc<ServerMessage>,
    stop: Arc<AtomicBool>,
    config: ServiceConfig,
) {
    let next_id = AtomicU64::new(1);
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                let client = next_id.fetch_add(1, Ordering::Relaxed);
                debug!("client {client} connected from {peer}");
                let mailbox = mailbox.clone();
                let welcome = welcome.clone();
                let config = config.clone();
                let _ = thread::Builder::new()
                    .name(format!("inchworm-client-{client}"))
                    .spawn(move || {
                        if let Err(e) = session(stream, client, mailbox, &welcome, &config) {
                            debug!("client {client}: {e}");
                        }
                    });
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                thread::sleep(Duration::from_millis(10))
            }
            Err(e) => {
                warn!("accept failed: {e}");
                thread::sleep(Duration::from_millis(50));
            }
        }
    }
}

fn refuse(stream: &mut TcpStream, code: ErrorCode, message: String) -> Result<(), FrameError> {
    write_frame(
        stream,
        &ServerMessage::Error(ErrorReply {
            id: None,
            error: CommandError::new(code, message),
        }),
    )
}

fn session(
    mut stream: TcpStream,
    client: u64,
    mailbox: SyncSender<LoopMsg>,
    welcome: &ServerMessage,
    config: &ServiceConfig,
) -> Result<(), FrameError> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    stream.set_read_timeout(Some(config.handshake_timeout))?;

    let Some(body) = read_frame(&mut stream)? else {
        return Ok(());
    };
    match serde_json::from_slice::<ClientMessage>(&body) {
        Ok(ClientMessage::Hello { protocol, .. }) if protocol == PROTOCOL_VERSION => {}
        Ok(ClientMessage::Hello { protocol, .. }) => {
            return refuse(
                &mut stream,
                ErrorCode::VersionMismatch,
                format!("server speaks {PROTOCOL_VERSION}, client asked for {protocol}"),
            );
        }
        Ok(_) => {
            return refuse(
                &mut stream,
                ErrorCode::VersionMismatch,
                "the first message must be a hello".into(),
            );
        }
        Err(e) => return refuse(&mut stream, ErrorCode::Malformed, e.to_string()),
    }
    write_frame(&mut stream, welcome)?;
    stream.set_read_timeout(None)?;

    let (tx, rx) = mpsc::sync_channel::<ServerMessage>(config.client_queue);
    let mut writer_stream = stream.try_clone()?;
    let writer = thread::spawn(move || {
        while let Ok(msg) = rx.recv() {
            if write_frame(&mut writer_stream, &msg).is_err() {
                break;
            }
        }
        let _ = writer_stream.shutdown(Shutdown::Both);
    });
    if mailbox
        .send(LoopMsg::Connect {
            client,
            tx: tx.clone(),
            stream: stream.try_clone()?,
        })
        .is_err()
    {
        return Ok(());
    }

    let result = read_commands(&mut stream, client, &mailbox, &tx);
    let _ = mailbox.try_send(LoopMsg::Disconnect { client });
    drop(tx);
    let _ = stream.shutdown(Shutdown::Read);
    let _ = writer.join();
    result
}

fn read_commands(
    stream: &mut TcpStream,
    client: u64,
    mailbox: &SyncSender<LoopMsg>,
    tx: &SyncSender<ServerMessage>,
) -> Result<(), FrameError> {
    let reply = |code: ErrorCode, id: Option<u64>, message: String| {
        tx.send(ServerMessage::Error(ErrorReply {
            id,
            error: CommandError::new(code, message),
        }))
        .is_ok()
    };
    loop {
        let body = match read_frame(stream) {
            Ok(Some(body)) => body,
            Ok(None) => return Ok(()),
            Err(FrameError::TooLarge(n)) => {
                reply(
                    ErrorCode::Malformed,
                    None,
                    format!("frame of {n} bytes exceeds the limit"),
                );
                return Err(FrameError::TooLarge(n));
            }
            Err(e) => return Err(e),
        };
        let message = match serde_json::from_slice::<ClientMessage>(&body) {
            Ok(m) => m,
            Err(e) => {
                if !reply(ErrorCode::Malformed, None, e.to_string()) {
                    return Ok(());
                }
                continue;
            }
        };
        match message {
            ClientMessage::Hello { .. } => {
                if !reply(ErrorCode::Malformed, None, "already greeted".into()) {
                    return Ok(());
                }
            }
            ClientMessage::Command { id, command } => {
                match mailbox.try_send(LoopMsg::Command {
                    client,
                    id,
                    command,
                }) {
                    Ok(()) => {}
                    Err(TrySendError::Full(_)) => {
                        if !reply(ErrorCode::Overloaded, id, "command mailbox is full".into()) {
                            return Ok(());
                        }
                    }
                    Err(TrySendError::Disconnected(_)) => return Ok(()),
                }
            }
            ClientMessage::Bye => return Ok(()),
        }
    }
}
