//! Application-level echo: `P <nonce>` out, matching `p <nonce>` back.

use std::io::{self, Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use super::LatencyError;
use crate::protocol::{decode, encode, LineFramer, WireMessage};

pub const DEFAULT_PING_TIMEOUT: Duration = Duration::from_secs(2);

/// A bidirectional frame transport able to carry pings.
pub trait EchoLink {
    fn send_frame(&mut self, msg: &WireMessage) -> io::Result<()>;

    /// Waits up to `timeout` for the next frame. `Ok(None)` means the wait expired.
    fn recv_frame(&mut self, timeout: Duration) -> io::Result<Option<WireMessage>>;
}

/// Sends one ping and waits for its pong, skipping unrelated frames.
pub fn ping<L: EchoLink + ?Sized>(link: &mut L, nonce: u64, timeout: Duration) -> Result<Duration, LatencyError> {
    let start = Instant::now();
    link.send_frame(&WireMessage::Ping(nonce))?;
    loop {
        let elapsed = start.elapsed();
        let Some(remaining) = timeout.checked_sub(elapsed).filter(|d| !d.is_zero()) else {
            return Err(LatencyError::PingTimeout(timeout));
        };
        match link.recv_frame(remaining)? {
            Some(WireMessage::Pong(n)) if n == nonce => return Ok(start.elapsed()),
            Some(_) => continue,
            None => return Err(LatencyError::PingTimeout(timeout)),
        }
    }
}

fn to_io(e: impl std::error::Error + Send + Sync + 'static) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, e)
}

/// In-process loopback whose far end answers pings immediately.
pub struct NullLink {
    tx: mpsc::Sender<Vec<u8>>,
    rx: mpsc::Receiver<Vec<u8>>,
}

pub fn null_link() -> NullLink {
    let (tx, far_rx) = mpsc::channel::<Vec<u8>>();
    let (far_tx, rx) = mpsc::channel::<Vec<u8>>();
    thread::spawn(move || {
        for line in far_rx {
            if let Ok(WireMessage::Ping(n)) = decode(&line) {
                let pong = encode(&WireMessage::Pong(n)).expect("pong encodes");
                if far_tx.send(pong).is_err() {
                    break;
                }
            }
        }
    });
    NullLink { tx, rx }
}

impl EchoLink for NullLink {
    fn send_frame(&mut self, msg: &WireMessage) -> io::Result<()> {
        let line = encode(msg).map_err(to_io)?;
        self.tx
            .send(line)
            .map_err(|_| io::Error::new(io::ErrorKind::BrokenPipe, "echo thread gone"))
    }

    fn recv_frame(&mut self, timeout: Duration) -> io::Result<Option<WireMessage>> {
        match self.rx.recv_timeout(timeout) {
            Ok(line) => decode(&line).map(Some).map_err(to_io),
            Err(mpsc::RecvTimeoutError::Timeout) => Ok(None),
            Err(mpsc::RecvTimeoutError::Disconnected) => {
                Err(io::Error::new(io::ErrorKind::BrokenPipe, "echo thread gone"))
            }
        }
    }
}

/// Blocking client connection to a robot server.
pub struct TcpEchoLink {
    stream: TcpStream,
    framer: LineFramer,
}

impl TcpEchoLink {
    pub fn connect(addr: impl ToSocketAddrs) -> io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Self {
            stream,
            framer: LineFramer::default(),
        })
    }

    pub fn stream(&self) -> &TcpStream {
        &self.stream
    }
}

impl EchoLink for TcpEchoLink {
    fn send_frame(&mut self, msg: &WireMessage) -> io::Result<()> {
        let line = encode(msg).map_err(to_io)?;
        self.stream.write_all(&line)
    }

    fn recv_frame(&mut self, timeout: Duration) -> io::Result<Option<WireMessage>> {
        let deadline = Instant::now() + timeout;
        let mut chunk = [0u8; 512];
        loop {
            if let Some(line) = self.framer.next_line().map_err(to_io)? {
                return decode(&line).map(Some).map_err(to_io);
            }
            let now = Instant::now();
            if now >= deadline {
                return Ok(None);
            }
            self.stream.set_read_timeout(Some(deadline - now))?;
            match self.stream.read(&mut chunk) {
                Ok(0) => return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "server closed")),
                Ok(n) => self.framer.push(&chunk[..n]),
                Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {
                    return Ok(None)
                }
                Err(e) => return Err(e),
            }
        }
    }
}
