//! WebSocket telemetry and command endpoint. Each client gets its own
//! thread; telemetry is fanned out through per-client channels and
//! commands are queued back to the stepping loop.

use std::io::ErrorKind;
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use tungstenite::{Message, WebSocket};

use tiba_core::pipeline::TeleopInput;
use tiba_core::sim::SimCommand;

use crate::wire::{ClientMessage, ServerMessage};

pub const DEFAULT_PORT: u16 = 8473;
pub const PORT_ENV: &str = "TIBA_SIM_PORT";
/// With the deadman held, a client silent for longer than this is treated
/// as having let go.
pub const HEARTBEAT_TIMEOUT: Duration = Duration::from_millis(250);

const POLL: Duration = Duration::from_millis(5);

#[derive(Default)]
struct Hub {
    clients: Mutex<Vec<Sender<Arc<str>>>>,
}

impl Hub {
    fn broadcast(&self, text: Arc<str>) {
        let mut clients = self.clients.lock().expect("hub lock");
        clients.retain(|c| c.send(text.clone()).is_ok());
    }
}

pub struct Service {
    hub: Arc<Hub>,
    commands: Receiver<SimCommand>,
    stop: Arc<AtomicBool>,
    connected: Arc<AtomicBool>,
    port: u16,
}

impl Service {
    /// Serves on an already bound listener (port 0 picks a free one).
    pub fn start(listener: TcpListener, heartbeat: Duration) -> std::io::Result<Self> {
        let port = listener.local_addr()?.port();
        listener.set_nonblocking(true)?;
        let hub = Arc::new(Hub::default());
        let stop = Arc::new(AtomicBool::new(false));
        let connected = Arc::new(AtomicBool::new(false));
        let (tx, rx) = mpsc::channel();
        {
            let (hub, stop, connected) = (hub.clone(), stop.clone(), connected.clone());
            thread::spawn(move || accept_loop(listener, hub, tx, stop, connected, heartbeat));
        }
        Ok(Self { hub, commands: rx, stop, connected, port })
    }

    pub fn port(&self) -> u16 {
        self.port
    }

    /// True once any client has completed the handshake.
    pub fn has_connected(&self) -> bool {
        self.connected.load(Ordering::SeqCst)
    }

    pub fn publish(&self, msg: &ServerMessage) {
        self.hub.broadcast(msg.to_text().into());
    }

    /// Commands received since the last call, in arrival order.
    pub fn drain_commands(&self) -> Vec<SimCommand> {
        self.commands.try_iter().collect()
    }
}

impl Drop for Service {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
    }
}

fn accept_loop(
    listener: TcpListener,
    hub: Arc<Hub>,
    commands: Sender<SimCommand>,
    stop: Arc<AtomicBool>,
    connected: Arc<AtomicBool>,
    heartbeat: Duration,
) {
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, addr)) => {
                log::info!("client {addr} connected");
                let (hub, commands, stop, connected) = (hub.clone(), commands.clone(), stop.clone(), connected.clone());
                thread::spawn(move || {
                    if let Err(e) = client_loop(stream, hub, commands, stop, connected, heartbeat) {
                        log::warn!("client {addr}: {e}");
                    }
                    log::info!("client {addr} gone");
                });
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(POLL),
            Err(e) => {
                log::error!("accept failed: {e}");
                thread::sleep(POLL);
            }
        }
    }
}

fn is_timeout(e: &tungstenite::Error) -> bool {
    matches!(e, tungstenite::Error::Io(io) if matches!(io.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut))
}

fn release() -> SimCommand {
    SimCommand::Teleop(TeleopInput::default())
}

fn client_loop(
    stream: TcpStream,
    hub: Arc<Hub>,
    commands: Sender<SimCommand>,
    stop: Arc<AtomicBool>,
    connected: Arc<AtomicBool>,
    heartbeat: Duration,
) -> anyhow::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    let mut ws: WebSocket<TcpStream> = tungstenite::accept(stream)?;
    ws.get_mut().set_read_timeout(Some(POLL))?;
    let (tx, rx) = mpsc::channel::<Arc<str>>();
    hub.clients.lock().expect("hub lock").push(tx);
    connected.store(true, Ordering::SeqCst);

    let mut deadman_held = false;
    let mut last_teleop = Instant::now();
    let result = loop {
        if stop.load(Ordering::SeqCst) {
            let _ = ws.close(None);
            let _ = ws.flush();
            break Ok(());
        }
        let mut send_err = None;
        for text in rx.try_iter() {
            if let Err(e) = ws.send(Message::Text(text.to_string())) {
                send_err = Some(e);
                break;
            }
        }
        if let Some(e) = send_err {
            break Err(e.into());
        }
        match ws.read() {
            Ok(Message::Text(text)) => match serde_json::from_str::<ClientMessage>(&text) {
                Ok(ClientMessage::Teleop(input)) => {
                    deadman_held = input.deadman;
                    last_teleop = Instant::now();
                    let _ = commands.send(SimCommand::Teleop(input));
                }
                Ok(ClientMessage::Relay(rc)) => {
                    let _ = commands.send(SimCommand::Relay(rc));
                }
                Ok(ClientMessage::Mode { mode }) => {
                    let _ = commands.send(SimCommand::Mode(mode));
                }
                Err(e) => log::warn!("ignoring message {text:?}: {e}"),
            },
            Ok(Message::Close(_)) => break Ok(()),
            Ok(_) => {}
            Err(e) if is_timeout(&e) => {}
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => break Ok(()),
            Err(e) => break Err(e.into()),
        }
        if deadman_held && last_teleop.elapsed() > heartbeat {
            log::warn!("teleop heartbeat lost, zeroing setpoint");
            deadman_held = false;
            let _ = commands.send(release());
        }
    };
    if deadman_held {
        let _ = commands.send(release());
    }
    result
}
