use std::io::{BufReader, BufWriter, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use super::frame::{FrameKind, ProbeFrame};
use super::ProbeError;

/// Withhold every acknowledgment for `duration`, starting when the
/// `after_requests`-th request of a connection arrives.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Stall {
    pub after_requests: u64,
    pub duration: Duration,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ServerOptions {
    /// Added before each acknowledgment is written.
    pub reply_delay: Duration,
    pub stall: Option<Stall>,
}

pub struct ProbeServer {
    listener: TcpListener,
    options: ServerOptions,
}

impl ProbeServer {
    pub fn bind(addr: impl ToSocketAddrs, options: ServerOptions) -> Result<Self, ProbeError> {
        Ok(ProbeServer { listener: TcpListener::bind(addr)?, options })
    }

    pub fn local_addr(&self) -> Result<SocketAddr, ProbeError> {
        Ok(self.listener.local_addr()?)
    }

    /// Accepts connections forever, one reader and one writer thread each.
    pub fn serve(self) -> Result<(), ProbeError> {
        self.accept_loop(&AtomicBool::new(false))
    }

    /// Serves on a background thread until the handle is stopped or dropped.
    pub fn spawn(self) -> Result<ServerHandle, ProbeError> {
        let addr = self.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let flag = Arc::clone(&stop);
        let thread = thread::spawn(move || {
            if let Err(e) = self.accept_loop(&flag) {
                log::warn!("probe server stopped: {e}");
            }
        });
        Ok(ServerHandle { addr, stop, thread: Some(thread) })
    }

    fn accept_loop(&self, stop: &AtomicBool) -> Result<(), ProbeError> {
        for conn in self.listener.incoming() {
            if stop.load(Ordering::SeqCst) {
                break;
            }
            match conn {
                Ok(stream) => {
                    let options = self.options;
                    thread::spawn(move || {
                        let peer = stream.peer_addr().ok();
                        if let Err(e) = handle_connection(stream, options) {
                            log::warn!("probe connection {peer:?}: {e}");
                        }
                    });
                }
                Err(e) => log::warn!("accept failed: {e}"),
            }
        }
        Ok(())
    }
}

pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn stop(mut self) {
        self.shutdown();
    }

    fn shutdown(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // wake the blocking accept
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn handle_connection(stream: TcpStream, options: ServerOptions) -> Result<(), ProbeError> {
    stream.set_nodelay(true)?;
    let write_half = stream.try_clone()?;
    let (tx, rx) = mpsc::channel::<(Instant, ProbeFrame)>();
    let writer = thread::spawn(move || write_acks(write_half, rx));

    let mut reader = BufReader::new(stream.try_clone()?);
    let mut received = 0u64;
    let mut stall_until: Option<Instant> = None;
    let result = loop {
        let frame = match ProbeFrame::read_from(&mut reader) {
            Ok(Some(f)) => f,
            Ok(None) => break Ok(()),
            Err(e) => break Err(e),
        };
        if frame.kind != FrameKind::Request {
            break Err(ProbeError::Malformed("server received a non-request frame".into()));
        }
        let now = Instant::now();
        received += 1;
        if let Some(stall) = options.stall {
            if received == stall.after_requests {
                stall_until = Some(now + stall.duration);
            }
        }
        let mut due = now + options.reply_delay;
        if let Some(until) = stall_until {
            due = due.max(until);
        }
        if tx.send((due, ProbeFrame::ack_for(&frame))).is_err() {
            break Ok(());
        }
    };
    drop(tx);
    if result.is_err() {
        let _ = stream.shutdown(Shutdown::Both);
    }
    let _ = writer.join();
    result
}

fn write_acks(stream: TcpStream, rx: mpsc::Receiver<(Instant, ProbeFrame)>) {
    let mut out = BufWriter::new(stream);
    while let Ok((due, ack)) = rx.recv() {
        let now = Instant::now();
        if due > now {
            thread::sleep(due - now);
        }
        if ack.write_to(&mut out).and_then(|_| out.flush()).is_err() {
            return;
        }
    }
}
