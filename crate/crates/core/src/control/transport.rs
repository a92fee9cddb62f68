//! Ways of carrying frames between a user and a router.

use std::io;
use std::net::{SocketAddr, ToSocketAddrs, UdpSocket};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use super::router::Router;
use super::wire::MAX_FRAME;

/// Default control port, as used by LISP map resolvers.
pub const DEFAULT_CONTROL_PORT: u16 = 4342;

pub trait Transport: Send + Sync {
    /// Send one frame and wait for the answer; `Ok(None)` is silence.
    fn exchange(&self, frame: &[u8]) -> io::Result<Option<Vec<u8>>>;
}

/// Calls the router directly; deterministic and free of network jitter.
#[derive(Debug, Clone)]
pub struct InProcessTransport {
    router: Arc<Router>,
}

impl InProcessTransport {
    pub fn new(router: Arc<Router>) -> Self {
        InProcessTransport { router }
    }
}

impl Transport for InProcessTransport {
    fn exchange(&self, frame: &[u8]) -> io::Result<Option<Vec<u8>>> {
        Ok(self.router.handle_frame(frame))
    }
}

/// Wraps another transport and keeps a copy of every byte sent back.
#[derive(Debug)]
pub struct CapturingTransport<T> {
    inner: T,
    replies: Mutex<Vec<Vec<u8>>>,
}

impl<T: Transport> CapturingTransport<T> {
    pub fn new(inner: T) -> Self {
        CapturingTransport {
            inner,
            replies: Mutex::new(Vec::new()),
        }
    }

    pub fn replies(&self) -> Vec<Vec<u8>> {
        self.replies.lock().expect("capture poisoned").clone()
    }

    pub fn reply_bytes(&self) -> usize {
        self.replies.lock().expect("capture poisoned").iter().map(Vec::len).sum()
    }

    pub fn clear(&self) {
        self.replies.lock().expect("capture poisoned").clear();
    }
}

impl<T: Transport> Transport for CapturingTransport<T> {
    fn exchange(&self, frame: &[u8]) -> io::Result<Option<Vec<u8>>> {
        let out = self.inner.exchange(frame)?;
        if let Some(bytes) = &out {
            self.replies.lock().expect("capture poisoned").push(bytes.clone());
        }
        Ok(out)
    }
}

/// Client side of the datagram transport. Silence is detected by timeout.
#[derive(Debug)]
pub struct UdpTransport {
    socket: UdpSocket,
}

impl UdpTransport {
    pub fn connect(router: impl ToSocketAddrs, timeout: Duration) -> io::Result<Self> {
        let socket = UdpSocket::bind(("0.0.0.0", 0))?;
        socket.connect(router)?;
        socket.set_read_timeout(Some(timeout))?;
        Ok(UdpTransport { socket })
    }
}

impl Transport for UdpTransport {
    fn exchange(&self, frame: &[u8]) -> io::Result<Option<Vec<u8>>> {
        self.socket.send(frame)?;
        let mut buf = vec![0; MAX_FRAME];
        match self.socket.recv(&mut buf) {
            Ok(n) => {
                buf.truncate(n);
                Ok(Some(buf))
            }
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => Ok(None),
            Err(e) => Err(e),
        }
    }
}

/// A router answering datagrams on a UDP socket from a background thread.
#[derive(Debug)]
pub struct UdpRouterService {
    local: SocketAddr,
    stop: Arc<AtomicBool>,
    worker: Option<JoinHandle<()>>,
}

impl UdpRouterService {
    pub fn bind(router: Arc<Router>, addr: impl ToSocketAddrs) -> io::Result<Self> {
        let socket = UdpSocket::bind(addr)?;
        socket.set_read_timeout(Some(Duration::from_millis(50)))?;
        let local = socket.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let flag = Arc::clone(&stop);
        let worker = std::thread::Builder::new().name("udp-router".into()).spawn(move || {
            let mut buf = vec![0; MAX_FRAME];
            while !flag.load(Ordering::Relaxed) {
                let (n, peer) = match socket.recv_from(&mut buf) {
                    Ok(x) => x,
                    Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => continue,
                    Err(e) => {
                        tracing::warn!(error = %e, "control socket receive failed");
                        continue;
                    }
                };
                if let Some(reply) = router.handle_frame(&buf[..n]) {
                    if let Err(e) = socket.send_to(&reply, peer) {
                        tracing::warn!(error = %e, %peer, "control socket send failed");
                    }
                }
            }
        })?;
        Ok(UdpRouterService {
            local,
            stop,
            worker: Some(worker),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.local
    }

    /// Block until the service is stopped from another thread.
    pub fn join(mut self) {
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }

    pub fn shutdown(mut self) {
        self.stop_worker();
    }

    fn stop_worker(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}

impl Drop for UdpRouterService {
    fn drop(&mut self) {
        self.stop_worker();
    }
}
