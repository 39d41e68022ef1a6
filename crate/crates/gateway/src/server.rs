//! Threaded WebSocket server.
//!
//! One thread accepts connections and one thread serves each client. The
//! frame loop hands messages over through bounded per-client queues; when a
//! queue is full the message is dropped for that client only, so a slow
//! client never stalls the loop. Commands travel the other way through a
//! mailbox that the loop drains between frames.

use std::io::ErrorKind;
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::ops::ControlFlow;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, Sender, SyncSender, TrySendError};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use palmkey_core::interface::InterfaceSpec;
use palmkey_pipeline::{FrameReport, LoopObserver, Pipeline};
use thiserror::Error;
use tungstenite::protocol::WebSocket;

use crate::protocol::{hello_json, parse_command, report_messages, ClientCommand, Message};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("binding {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug)]
pub struct GatewayOptions {
    /// Messages buffered per client before new ones are dropped.
    pub queue_capacity: usize,
    /// How long a client thread waits for input before checking its queue.
    pub poll_interval: Duration,
}

impl Default for GatewayOptions {
    fn default() -> Self {
        Self {
            queue_capacity: 1024,
            poll_interval: Duration::from_millis(5),
        }
    }
}

enum Outbound {
    Msg(Arc<Message>),
    Close,
}

struct ClientSlot {
    id: u64,
    tx: SyncSender<Outbound>,
}

struct State {
    clients: Vec<ClientSlot>,
    spec: Arc<InterfaceSpec>,
    page: String,
    threads: Vec<JoinHandle<()>>,
}

struct Shared {
    state: Mutex<State>,
    shutdown: AtomicBool,
    next_id: AtomicU64,
    dropped: AtomicU64,
    options: GatewayOptions,
}

struct Incoming {
    client: u64,
    command: ClientCommand,
}

pub struct Gateway {
    shared: Arc<Shared>,
    commands: Receiver<Incoming>,
    local_addr: SocketAddr,
    accept: Option<JoinHandle<()>>,
    last_text: Option<String>,
}

impl Gateway {
    /// Bind and start accepting clients. `spec` and `page` seed the snapshot
    /// sent to each new client.
    pub fn start(
        addr: impl ToSocketAddrs + std::fmt::Display,
        spec: Arc<InterfaceSpec>,
        page: &str,
        options: GatewayOptions,
    ) -> Result<Gateway, GatewayError> {
        let listener = TcpListener::bind(&addr).map_err(|source| GatewayError::Bind {
            addr: addr.to_string(),
            source,
        })?;
        listener.set_nonblocking(true)?;
        let local_addr = listener.local_addr()?;
        let shared = Arc::new(Shared {
            state: Mutex::new(State {
                clients: Vec::new(),
                spec,
                page: page.to_string(),
                threads: Vec::new(),
            }),
            shutdown: AtomicBool::new(false),
            next_id: AtomicU64::new(1),
            dropped: AtomicU64::new(0),
            options,
        });
        let (cmd_tx, commands) = mpsc::channel();
        let accept = {
            let shared = Arc::clone(&shared);
            std::thread::Builder::new()
                .name("gateway-accept".into())
                .spawn(move || accept_loop(listener, shared, cmd_tx))?
        };
        log::info!("gateway listening on ws://{local_addr}");
        Ok(Gateway {
            shared,
            commands,
            local_addr,
            accept: Some(accept),
            last_text: None,
        })
    }

    /// Start from a pipeline's current interface and page.
    pub fn for_pipeline(
        addr: impl ToSocketAddrs + std::fmt::Display,
        pipeline: &Pipeline,
        options: GatewayOptions,
    ) -> Result<Gateway, GatewayError> {
        Self::start(addr, Arc::clone(pipeline.spec()), pipeline.page_id(), options)
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    pub fn client_count(&self) -> usize {
        self.shared.state.lock().expect("gateway state").clients.len()
    }

    /// Messages dropped so far because a client queue was full.
    pub fn dropped(&self) -> u64 {
        self.shared.dropped.load(Ordering::Relaxed)
    }

    /// Queue `msg` for every client.
    pub fn broadcast(&self, msg: Message) {
        let msg = Arc::new(msg);
        let mut st = self.shared.state.lock().expect("gateway state");
        st.clients.retain(|c| match c.tx.try_send(Outbound::Msg(Arc::clone(&msg))) {
            Ok(()) => true,
            Err(TrySendError::Full(_)) => {
                self.shared.dropped.fetch_add(1, Ordering::Relaxed);
                true
            }
            Err(TrySendError::Disconnected(_)) => false,
        });
    }

    fn send_to(&self, client: u64, msg: Message) {
        let st = self.shared.state.lock().expect("gateway state");
        if let Some(c) = st.clients.iter().find(|c| c.id == client) {
            if c.tx.try_send(Outbound::Msg(Arc::new(msg))).is_err() {
                self.shared.dropped.fetch_add(1, Ordering::Relaxed);
            }
        }
    }

    fn set_page(&self, page: &str) {
        let mut st = self.shared.state.lock().expect("gateway state");
        if st.page != page {
            st.page = page.to_string();
        }
    }

    /// Apply queued client commands to `pipeline` and acknowledge them.
    pub fn apply_pending(&mut self, pipeline: &mut Pipeline) {
        while let Ok(Incoming { client, command }) = self.commands.try_recv() {
            let name = command.command.name();
            let result = pipeline.apply_command(&command.command);
            match &result {
                Ok(_) => log::info!("client {client}: {name} applied"),
                Err(e) => log::warn!("client {client}: {name} rejected: {e}"),
            }
            self.set_page(pipeline.page_id());
            let outcome = result.as_ref().ok().cloned();
            self.send_to(client, Message::ack(command.id, name, result.map(|_| ()).map_err(|e| e.to_string())));
            if let Some(outcome) = outcome {
                if outcome.spec_changed {
                    {
                        let mut st = self.shared.state.lock().expect("gateway state");
                        st.spec = Arc::clone(pipeline.spec());
                    }
                    self.broadcast(Message::spec(pipeline.spec(), pipeline.page_id()));
                }
                for e in &outcome.events {
                    self.broadcast(Message::zone_event(e));
                }
            }
        }
    }

    /// Publish one frame report.
    pub fn publish(&mut self, report: &FrameReport) {
        self.set_page(&report.page);
        for msg in report_messages(report, &mut self.last_text) {
            self.broadcast(msg);
        }
    }

    /// Stop accepting, let every client drain its queue, close the
    /// connections and wait for the threads.
    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        if self.shared.shutdown.swap(true, Ordering::SeqCst) {
            return;
        }
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
        let threads = {
            let mut st = self.shared.state.lock().expect("gateway state");
            let senders: Vec<SyncSender<Outbound>> = st.clients.drain(..).map(|c| c.tx).collect();
            // Blocking send: the client thread is draining, or gone.
            for tx in senders {
                let _ = tx.send(Outbound::Close);
            }
            std::mem::take(&mut st.threads)
        };
        for h in threads {
            let _ = h.join();
        }
    }
}

impl Drop for Gateway {
    fn drop(&mut self) {
        self.stop();
    }
}

impl LoopObserver for Gateway {
    fn between_frames(&mut self, pipeline: &mut Pipeline) -> ControlFlow<()> {
        self.apply_pending(pipeline);
        ControlFlow::Continue(())
    }

    fn on_report(&mut self, _pipeline: &Pipeline, report: &FrameReport) {
        self.publish(report);
    }
}

fn accept_loop(listener: TcpListener, shared: Arc<Shared>, cmd_tx: Sender<Incoming>) {
    while !shared.shutdown.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                let id = shared.next_id.fetch_add(1, Ordering::Relaxed);
                let shared2 = Arc::clone(&shared);
                let tx = cmd_tx.clone();
                let spawned = std::thread::Builder::new()
                    .name(format!("gateway-client-{id}"))
                    .spawn(move || {
                        if let Err(e) = serve_client(stream, id, &shared2, tx) {
                            log::debug!("client {id} ({peer}) ended: {e}");
                        }
                        let mut st = shared2.state.lock().expect("gateway state");
                        st.clients.retain(|c| c.id != id);
                    });
                match spawned {
                    Ok(h) => shared.state.lock().expect("gateway state").threads.push(h),
                    Err(e) => log::error!("cannot spawn client thread: {e}"),
                }
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => std::thread::sleep(Duration::from_millis(10)),
            Err(e) => {
                log::error!("accept failed: {e}");
                std::thread::sleep(Duration::from_millis(10));
            }
        }
    }
}

fn is_timeout(e: &tungstenite::Error) -> bool {
    matches!(e, tungstenite::Error::Io(io) if matches!(io.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut))
}

#[allow(clippy::result_large_err)]
fn serve_client(stream: TcpStream, id: u64, shared: &Shared, cmd_tx: Sender<Incoming>) -> Result<(), tungstenite::Error> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    stream.set_read_timeout(Some(Duration::from_secs(5)))?;
    let mut ws: WebSocket<TcpStream> = tungstenite::accept(stream).map_err(|e| match e {
        tungstenite::HandshakeError::Failure(e) => e,
        tungstenite::HandshakeError::Interrupted(_) => {
            tungstenite::Error::Io(std::io::Error::new(ErrorKind::TimedOut, "handshake timed out"))
        }
    })?;
    ws.get_mut().set_read_timeout(Some(shared.options.poll_interval))?;

    ws.send(hello_json().into())?;
    // Register and snapshot under one lock: every message queued after the
    // snapshot reaches this client after the spec.
    let (rx, spec_msg) = {
        let mut st = shared.state.lock().expect("gateway state");
        let (tx, rx) = mpsc::sync_channel(shared.options.queue_capacity);
        st.clients.push(ClientSlot { id, tx });
        (rx, Message::spec(&st.spec, &st.page))
    };
    let mut seq = 1;
    ws.send(spec_msg.to_json(seq).into())?;

    loop {
        let mut wrote = false;
        loop {
            match rx.try_recv() {
                Ok(Outbound::Msg(m)) => {
                    seq += 1;
                    ws.write(m.to_json(seq).into())?;
                    wrote = true;
                }
                Ok(Outbound::Close) | Err(mpsc::TryRecvError::Disconnected) => {
                    ws.flush()?;
                    let _ = ws.close(None);
                    // Wait briefly for the peer's close frame.
                    for _ in 0..100 {
                        match ws.read() {
                            Ok(_) => {}
                            Err(e) if is_timeout(&e) => {}
                            Err(_) => break,
                        }
                    }
                    return Ok(());
                }
                Err(mpsc::TryRecvError::Empty) => break,
            }
        }
        if wrote {
            ws.flush()?;
        }
        match ws.read() {
            Ok(tungstenite::Message::Text(text)) => match parse_command(&text) {
                Ok(command) => {
                    if cmd_tx.send(Incoming { client: id, command }).is_err() {
                        return Ok(());
                    }
                }
                Err(bad) => {
                    seq += 1;
                    let ack = Message::ack(bad.id, &bad.command, Err(bad.error));
                    ws.send(ack.to_json(seq).into())?;
                }
            },
            Ok(tungstenite::Message::Close(_)) => return Ok(()),
            Ok(_) => {}
            Err(e) if is_timeout(&e) => {}
            Err(e) => return Err(e),
        }
    }
}
