//! Live session server.
//!
//! One thread owns the [`Simulation`]; each WebSocket client gets its own
//! thread and talks to the loop only through channels. Any number of clients
//! may watch; one at a time may hold the pilot role.

use crate::protocol::{ClientMessage, ServerMessage, SessionCommand};
use anyhow::{bail, Context, Result};
use colscan_core::report::write_report;
use colscan_core::{Params, RunReport, Scenario, Simulation, TerminationReason, VelocityCommand};
use std::collections::BTreeMap;
use std::io::ErrorKind;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};
use tungstenite::{Message, WebSocket};

pub struct ServeConfig {
    pub scenario: Scenario,
    pub params: Params,
    pub seed: u64,
    /// 0 picks a free port.
    pub port: u16,
    /// Real-time multiplier; ticks run every `dt / rate` seconds.
    pub rate: f64,
    pub report_path: Option<PathBuf>,
}

type ClientId = u64;

enum Inbound {
    Connected(ClientId, Sender<String>),
    Disconnected(ClientId),
    Message(ClientId, String),
    Shutdown,
}

pub struct ServeHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    inbound: Sender<Inbound>,
    reports: Arc<Mutex<Vec<RunReport>>>,
    threads: Vec<JoinHandle<()>>,
}

impl ServeHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Reports of every session ended so far, oldest first.
    pub fn reports(&self) -> Vec<RunReport> {
        self.reports.lock().expect("report lock").clone()
    }

    pub fn join(self) {
        for t in self.threads {
            let _ = t.join();
        }
    }

    pub fn shutdown(self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = self.inbound.send(Inbound::Shutdown);
        // Wake the blocking accept.
        let _ = TcpStream::connect(self.addr);
        self.join();
    }
}

pub fn serve(config: ServeConfig) -> Result<ServeHandle> {
    if !(config.rate.is_finite() && config.rate > 0.0) {
        bail!("rate must be a positive number, got {}", config.rate);
    }
    let listener = TcpListener::bind(("127.0.0.1", config.port))
        .with_context(|| format!("binding port {}", config.port))?;
    let addr = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let reports = Arc::new(Mutex::new(Vec::new()));
    let (tx, rx) = mpsc::channel();

    let period = Duration::from_secs_f64(config.params.vehicle.dt / config.rate);
    let sim = Simulation::new(config.scenario, config.params, config.seed);
    let mut session = Session {
        sim,
        running: false,
        pilot: None,
        clients: BTreeMap::new(),
        report_path: config.report_path,
        reports: Arc::clone(&reports),
    };
    let sim_stop = Arc::clone(&stop);
    let sim_thread = thread::spawn(move || session.run(rx, period, sim_stop));

    let accept_stop = Arc::clone(&stop);
    let accept_tx = tx.clone();
    let accept_thread = thread::spawn(move || accept_loop(listener, accept_tx, accept_stop));

    Ok(ServeHandle {
        addr,
        stop,
        inbound: tx,
        reports,
        threads: vec![sim_thread, accept_thread],
    })
}

fn accept_loop(listener: TcpListener, tx: Sender<Inbound>, stop: Arc<AtomicBool>) {
    let mut next_id: ClientId = 0;
    for stream in listener.incoming() {
        if stop.load(Ordering::SeqCst) {
            break;
        }
        let Ok(stream) = stream else { continue };
        let id = next_id;
        next_id += 1;
        let tx = tx.clone();
        let stop = Arc::clone(&stop);
        thread::spawn(move || client_loop(id, stream, tx, stop));
    }
}

fn client_loop(id: ClientId, stream: TcpStream, tx: Sender<Inbound>, stop: Arc<AtomicBool>) {
    let Ok(mut ws) = tungstenite::accept(stream) else {
        return;
    };
    let _ = ws
        .get_ref()
        .set_read_timeout(Some(Duration::from_millis(5)));
    let (out_tx, out_rx) = mpsc::channel();
    if tx.send(Inbound::Connected(id, out_tx)).is_err() {
        return;
    }
    while !stop.load(Ordering::SeqCst) {
        match ws.read() {
            Ok(Message::Text(text)) => {
                if tx.send(Inbound::Message(id, text)).is_err() {
                    break;
                }
            }
            Ok(Message::Close(_)) => break,
            Ok(_) => {}
            Err(tungstenite::Error::Io(e))
                if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(_) => break,
        }
        if !flush_outgoing(&mut ws, &out_rx) {
            break;
        }
    }
    let _ = ws.close(None);
    let _ = ws.flush();
    let _ = tx.send(Inbound::Disconnected(id));
}

fn flush_outgoing(ws: &mut WebSocket<TcpStream>, out: &Receiver<String>) -> bool {
    let mut queued = false;
    while let Ok(text) = out.try_recv() {
        if ws.write(Message::Text(text)).is_err() {
            return false;
        }
        queued = true;
    }
    if queued {
        return match ws.flush() {
            Ok(()) => true,
            Err(tungstenite::Error::Io(e)) => e.kind() == ErrorKind::WouldBlock,
            Err(_) => false,
        };
    }
    true
}

struct Session {
    sim: Simulation,
    running: bool,
    pilot: Option<ClientId>,
    clients: BTreeMap<ClientId, Sender<String>>,
    report_path: Option<PathBuf>,
    reports: Arc<Mutex<Vec<RunReport>>>,
}

impl Session {
    fn run(&mut self, rx: Receiver<Inbound>, period: Duration, stop: Arc<AtomicBool>) {
        let mut next_tick = Instant::now();
        while !stop.load(Ordering::SeqCst) {
            let inbound = if self.running {
                let now = Instant::now();
                if now >= next_tick {
                    self.tick();
                    next_tick += period;
                    // Fall behind gracefully instead of bursting.
                    if next_tick < now {
                        next_tick = now + period;
                    }
                    continue;
                }
                match rx.recv_timeout(next_tick - now) {
                    Ok(m) => m,
                    Err(RecvTimeoutError::Timeout) => continue,
                    Err(RecvTimeoutError::Disconnected) => break,
                }
            } else {
                match rx.recv() {
                    Ok(m) => m,
                    Err(_) => break,
                }
            };
            match inbound {
                Inbound::Connected(id, out) => {
                    self.clients.insert(id, out);
                }
                Inbound::Disconnected(id) => {
                    self.clients.remove(&id);
                    if self.pilot == Some(id) {
                        self.pilot = None;
                    }
                }
                Inbound::Message(id, text) => {
                    let was_running = self.running;
                    self.handle(id, &text);
                    if self.running && !was_running {
                        next_tick = Instant::now();
                    }
                }
                Inbound::Shutdown => break,
            }
        }
    }

    fn send(&self, id: ClientId, msg: &ServerMessage) {
        if let Some(out) = self.clients.get(&id) {
            let _ = out.send(msg.to_json());
        }
    }

    fn broadcast(&self, msg: &ServerMessage) {
        let text = msg.to_json();
        for out in self.clients.values() {
            let _ = out.send(text.clone());
        }
    }

    fn handle(&mut self, id: ClientId, text: &str) {
        let msg = match ClientMessage::parse(text) {
            Ok(m) => m,
            Err(e) => return self.send(id, &ServerMessage::error(e)),
        };
        match msg {
            ClientMessage::ClaimPilot => match self.pilot {
                None => self.pilot = Some(id),
                Some(p) if p == id => {}
                Some(_) => self.send(id, &ServerMessage::error("pilot role taken")),
            },
            ClientMessage::Pilot {
                v_forward,
                v_lateral,
                yaw_rate,
            } => {
                if self.pilot != Some(id) {
                    return self.send(id, &ServerMessage::error("pilot role not held"));
                }
                if !self.running {
                    return self.send(id, &ServerMessage::error("session not running"));
                }
                let cmd = VelocityCommand::new(v_forward, v_lateral, yaw_rate);
                if let Err(e) = self.sim.submit_pilot(cmd) {
                    self.send(id, &ServerMessage::error(e.to_string()));
                }
            }
            ClientMessage::Session { cmd } => match cmd {
                SessionCommand::Start => {
                    if self.running {
                        self.send(id, &ServerMessage::error("session already running"));
                    } else {
                        self.running = true;
                    }
                }
                SessionCommand::Reset => self.sim.reset(),
                SessionCommand::End => {
                    if self.sim.tick() == 0 && !self.running {
                        return self.send(id, &ServerMessage::error("no session to end"));
                    }
                    self.end_session();
                }
            },
        }
    }

    fn tick(&mut self) {
        let out = self.sim.step();
        self.broadcast(&ServerMessage::tick(&out));
        for a in &out.assessments {
            self.broadcast(&ServerMessage::Assessment(a.clone()));
        }
        if self.sim.tick() >= self.sim.params().tick_budget {
            self.end_session();
        }
    }

    fn end_session(&mut self) {
        self.running = false;
        let report = self.sim.report(TerminationReason::SessionEnded);
        if let Some(path) = &self.report_path {
            if let Err(e) = write_report(&report, path) {
                self.broadcast(&ServerMessage::error(format!("writing report: {e}")));
            }
        }
        self.reports.lock().expect("report lock").push(report);
        self.sim.reset();
    }
}
