//! TCP driver for [`ServerEngine`].
//!
//! One task owns the engine and runs the actuation ticker. Each connection
//! gets a reader task that forwards complete lines and a writer task fed by a
//! bounded queue; a client whose queue overflows is disconnected.

use std::collections::HashMap;
use std::future::Future;
use std::net::SocketAddr;
use std::time::Duration;

use bytes::Bytes;
use thiserror::Error;
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::tcp::{OwnedReadHalf, OwnedWriteHalf};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::mpsc;
use tokio::task::{AbortHandle, JoinHandle};
use tokio::time::{Instant, MissedTickBehavior};

use super::config::{ConfigError, ServerConfig};
use super::engine::{EngineConfig, Outbound, ServerEngine};
use crate::protocol::LineFramer;
use crate::session::ClientId;

/// Frames buffered per client before it is considered too slow.
pub const OUTBOUND_BUFFER: usize = 256;

const WRITER_DRAIN_TIMEOUT: Duration = Duration::from_secs(1);

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("accept failed: {0}")]
    Io(#[from] std::io::Error),
}

enum Inbound {
    Line(ClientId, Vec<u8>),
    Closed(ClientId),
}

struct Connection {
    tx: mpsc::Sender<Bytes>,
    reader: AbortHandle,
    writer: JoinHandle<()>,
}

pub struct TcpServer {
    listener: TcpListener,
    engine: ServerEngine,
}

impl TcpServer {
    pub async fn bind(cfg: &ServerConfig) -> Result<Self, ServerError> {
        cfg.validate()?;
        let engine_cfg = cfg.engine_config()?;
        let addr = SocketAddr::new(cfg.listen, cfg.port);
        let listener = TcpListener::bind(addr).await.map_err(|source| ServerError::Bind {
            addr: addr.to_string(),
            source,
        })?;
        Ok(Self::from_listener(listener, engine_cfg))
    }

    pub fn from_listener(listener: TcpListener, cfg: EngineConfig) -> Self {
        Self {
            listener,
            engine: ServerEngine::new(cfg),
        }
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Serves until `shutdown` resolves, then sends every client its final
    /// status and closes the connections.
    pub async fn run(self, shutdown: impl Future<Output = ()>) -> Result<(), ServerError> {
        let TcpServer { listener, mut engine } = self;
        let start = Instant::now();
        let mut ticker = tokio::time::interval(engine.config().tick);
        ticker.set_missed_tick_behavior(MissedTickBehavior::Burst);
        let (in_tx, mut in_rx) = mpsc::unbounded_channel::<Inbound>();
        let mut conns: HashMap<ClientId, Connection> = HashMap::new();
        let mut next_id = 1u64;
        tokio::pin!(shutdown);

        log::info!("robot server listening on {}", listener.local_addr()?);
        loop {
            tokio::select! {
                _ = &mut shutdown => break,
                accepted = listener.accept() => {
                    let (stream, peer) = match accepted {
                        Ok(v) => v,
                        Err(e) => {
                            log::warn!("accept failed: {e}");
                            continue;
                        }
                    };
                    let id = ClientId::new(format!("c{next_id}"));
                    next_id += 1;
                    let conn = spawn_connection(stream, id.clone(), in_tx.clone());
                    conns.insert(id.clone(), conn);
                    let out = engine
                        .connect(id, &peer.to_string(), start.elapsed())
                        .expect("server-assigned ids are unique");
                    dispatch(&mut engine, &mut conns, out, start);
                }
                Some(ev) = in_rx.recv() => {
                    let now = start.elapsed();
                    let out = match ev {
                        Inbound::Line(id, line) => engine.receive(&id, &line, now),
                        Inbound::Closed(id) => {
                            if let Some(c) = conns.remove(&id) {
                                c.reader.abort();
                            }
                            engine.disconnect(&id, now)
                        }
                    };
                    dispatch(&mut engine, &mut conns, out, start);
                }
                _ = ticker.tick() => {
                    let out = engine.tick(start.elapsed());
                    dispatch(&mut engine, &mut conns, out, start);
                }
            }
        }

        let out = engine.shutdown(start.elapsed());
        dispatch(&mut engine, &mut conns, out, start);
        let writers: Vec<JoinHandle<()>> = conns
            .into_values()
            .map(|c| {
                c.reader.abort();
                c.writer
            })
            .collect();
        for w in writers {
            let _ = tokio::time::timeout(WRITER_DRAIN_TIMEOUT, w).await;
        }
        log::info!("robot server stopped");
        Ok(())
    }
}

fn spawn_connection(stream: TcpStream, id: ClientId, events: mpsc::UnboundedSender<Inbound>) -> Connection {
    let _ = stream.set_nodelay(true);
    let (read, write) = stream.into_split();
    let (tx, rx) = mpsc::channel(OUTBOUND_BUFFER);
    let reader = tokio::spawn(read_lines(read, id, events)).abort_handle();
    let writer = tokio::spawn(write_lines(write, rx));
    Connection { tx, reader, writer }
}

async fn read_lines(mut read: OwnedReadHalf, id: ClientId, events: mpsc::UnboundedSender<Inbound>) {
    let mut framer = LineFramer::default();
    let mut chunk = [0u8; 1024];
    'outer: loop {
        match read.read(&mut chunk).await {
            Ok(0) | Err(_) => break,
            Ok(n) => framer.push(&chunk[..n]),
        }
        loop {
            match framer.next_line() {
                Ok(Some(line)) => {
                    if events.send(Inbound::Line(id.clone(), line)).is_err() {
                        return;
                    }
                }
                Ok(None) => break,
                Err(e) => {
                    log::warn!("{id}: {e}, closing");
                    break 'outer;
                }
            }
        }
    }
    let _ = events.send(Inbound::Closed(id));
}

async fn write_lines(mut write: OwnedWriteHalf, mut rx: mpsc::Receiver<Bytes>) {
    while let Some(line) = rx.recv().await {
        if write.write_all(&line).await.is_err() {
            return;
        }
    }
    let _ = write.shutdown().await;
}

/// Hands frames to connection queues, disconnecting clients whose queue is
/// full or gone. Disconnects can emit further frames, so this loops.
fn dispatch(
    engine: &mut ServerEngine,
    conns: &mut HashMap<ClientId, Connection>,
    mut out: Vec<Outbound>,
    start: Instant,
) {
    loop {
        let mut dropped: Vec<ClientId> = Vec::new();
        for o in out.drain(..) {
            let Some(conn) = conns.get(&o.to) else {
                continue;
            };
            if conn.tx.try_send(o.line).is_err() && !dropped.contains(&o.to) {
                log::warn!("{}: outbound queue overflow, disconnecting", o.to);
                dropped.push(o.to);
            }
        }
        for entry in engine.drain_log() {
            log::info!(target: "telerobot::wire", "{entry}");
        }
        if dropped.is_empty() {
            return;
        }
        for id in dropped {
            if let Some(c) = conns.remove(&id) {
                c.reader.abort();
                c.writer.abort();
            }
            out.extend(engine.disconnect(&id, start.elapsed()));
        }
    }
}

/// Binds per `cfg` and serves until `shutdown` resolves.
pub async fn serve(cfg: &ServerConfig, shutdown: impl Future<Output = ()>) -> Result<(), ServerError> {
    TcpServer::bind(cfg).await?.run(shutdown).await
}
