use std::io::{BufReader, BufWriter};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use super::protocol::{read_frame_bytes, write_frame, Frame, Request, Response};
use super::worker::{InProcessWorker, Worker};
use super::ServiceError;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

fn serve_connection(worker: &InProcessWorker, stream: TcpStream) -> Result<(), ServiceError> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    while let Some(body) = read_frame_bytes(&mut reader)? {
        let reply = match serde_json::from_slice::<Frame>(&body) {
            Ok(frame) => worker.handle_frame(frame),
            Err(e) => Response::Error(format!("malformed frame: {e}")).to_frame(0),
        };
        write_frame(&mut writer, &reply)?;
        if worker.is_shut_down() {
            break;
        }
    }
    Ok(())
}

/// Serve `worker` on an already bound listener until a SHUTDOWN request
/// arrives. One thread per connection.
pub fn serve_listener(worker: Arc<InProcessWorker>, listener: TcpListener) -> Result<(), ServiceError> {
    let local = listener.local_addr()?;
    for stream in listener.incoming() {
        if worker.is_shut_down() {
            break;
        }
        let stream = match stream {
            Ok(s) => s,
            Err(_) => continue,
        };
        let _ = stream.set_nodelay(true);
        let w = Arc::clone(&worker);
        std::thread::spawn(move || {
            let _ = serve_connection(&w, stream);
            if w.is_shut_down() {
                // wake the accept loop so it can observe the flag
                let _ = TcpStream::connect(local);
            }
        });
    }
    Ok(())
}

/// Bind `addr` and serve until shutdown.
pub fn serve_worker(worker: Arc<InProcessWorker>, addr: impl ToSocketAddrs) -> Result<(), ServiceError> {
    serve_listener(worker, TcpListener::bind(addr)?)
}

/// Client side of one worker connection. Requests on the connection are
/// serialized; the connection is re-established after a failure.
pub struct TcpWorker {
    addr: SocketAddr,
    timeout: Duration,
    next_id: AtomicU64,
    conn: Mutex<Option<TcpStream>>,
}

impl TcpWorker {
    pub fn new(addr: impl ToSocketAddrs, timeout: Duration) -> Result<Self, ServiceError> {
        let addr = addr
            .to_socket_addrs()?
            .next()
            .ok_or_else(|| ServiceError::Protocol("address did not resolve".into()))?;
        Ok(Self {
            addr,
            timeout,
            next_id: AtomicU64::new(1),
            conn: Mutex::new(None),
        })
    }

    fn connect(&self) -> Result<TcpStream, ServiceError> {
        let s = TcpStream::connect_timeout(&self.addr, self.timeout)?;
        s.set_read_timeout(Some(self.timeout))?;
        s.set_write_timeout(Some(self.timeout))?;
        s.set_nodelay(true)?;
        Ok(s)
    }

    /// Send one frame and wait for the reply frame.
    pub fn round_trip(&self, frame: &Frame) -> Result<Frame, ServiceError> {
        let mut guard = self.conn.lock().unwrap_or_else(|p| p.into_inner());
        if guard.is_none() {
            *guard = Some(self.connect()?);
        }
        let stream = guard.as_mut().expect("connected");
        let result = (|| {
            write_frame(stream, frame)?;
            let body = read_frame_bytes(stream)?.ok_or(ServiceError::Closed)?;
            serde_json::from_slice::<Frame>(&body).map_err(|e| ServiceError::Protocol(e.to_string()))
        })();
        if result.is_err() {
            *guard = None;
        }
        result
    }
}

impl Worker for TcpWorker {
    fn call(&self, request: &Request) -> Result<Response, ServiceError> {
        let id = self.next_id.fetch_add(1, Ordering::SeqCst);
        let reply = self.round_trip(&request.to_frame(id))?;
        if reply.id != id {
            return Err(ServiceError::Protocol(format!("reply id {} for request {id}", reply.id)));
        }
        Response::from_frame(reply)
    }

    fn describe(&self) -> String {
        format!("tcp:{}", self.addr)
    }
}
