//! Session server for building episodes. One port accepts both raw TCP
//! clients (newline-delimited JSON) and browser clients, which open the
//! same socket with a WebSocket upgrade and send one message per text frame.

mod session;
pub mod wire;

use std::future::Future;
use std::io;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use tokio::net::{TcpListener, TcpStream, ToSocketAddrs};
use tokio::sync::broadcast;
use tokio::time::{sleep_until, timeout, Instant};
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::WebSocketStream;
use tokio_util::codec::{Framed, LinesCodec, LinesCodecError};

use iglu_core::tasks::TaskLibrary;

pub use session::ServerConfig;
use session::{Connection, Event, Hub};
use wire::{ErrorCode, Reply};

pub const DEFAULT_PORT: u16 = 7878;

pub struct Server {
    listener: TcpListener,
    hub: Arc<Hub>,
}

impl Server {
    pub async fn bind(addr: impl ToSocketAddrs, library: TaskLibrary, config: ServerConfig) -> io::Result<Self> {
        let listener = TcpListener::bind(addr).await?;
        Ok(Server {
            listener,
            hub: Arc::new(Hub::new(library, config)),
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub async fn run(self) -> io::Result<()> {
        self.run_until(std::future::pending()).await
    }

    /// Accepts connections until `shutdown` resolves.
    pub async fn run_until(self, shutdown: impl Future<Output = ()>) -> io::Result<()> {
        tokio::pin!(shutdown);
        loop {
            tokio::select! {
                _ = &mut shutdown => return Ok(()),
                accepted = self.listener.accept() => match accepted {
                    Ok((stream, _)) => {
                        let hub = self.hub.clone();
                        tokio::spawn(async move {
                            if let Err(e) = serve_connection(stream, hub).await {
                                eprintln!("connection error: {e}");
                            }
                        });
                    }
                    // e.g. out of file descriptors; keep serving the others
                    Err(e) => {
                        eprintln!("accept failed: {e}");
                        tokio::time::sleep(Duration::from_millis(50)).await;
                    }
                },
            }
        }
    }
}

enum Transport {
    Lines(Framed<TcpStream, LinesCodec>),
    Ws(Box<WebSocketStream<TcpStream>>),
}

enum Received {
    Text(String),
    /// A frame that could not be read as a message; answered with an error.
    Garbled(String),
    Closed,
}

impl Transport {
    async fn detect(stream: TcpStream, max_line: usize, wait: Duration) -> io::Result<Self> {
        let mut buf = [0u8; 4];
        let deadline = Instant::now() + wait;
        loop {
            let n = timeout(deadline - Instant::now(), stream.peek(&mut buf))
                .await
                .map_err(|_| io::Error::new(io::ErrorKind::TimedOut, "no data"))??;
            if n == 0 || n == 4 || buf[..n] != b"GET "[..n] {
                break;
            }
            tokio::time::sleep(Duration::from_millis(5)).await;
        }
        if &buf == b"GET " {
            let ws = tokio_tungstenite::accept_async(stream)
                .await
                .map_err(io::Error::other)?;
            Ok(Transport::Ws(Box::new(ws)))
        } else {
            Ok(Transport::Lines(Framed::new(
                stream,
                LinesCodec::new_with_max_length(max_line),
            )))
        }
    }

    async fn recv(&mut self) -> io::Result<Received> {
        match self {
            Transport::Lines(framed) => match framed.next().await {
                None => Ok(Received::Closed),
                Some(Ok(line)) => Ok(Received::Text(line)),
                Some(Err(LinesCodecError::MaxLineLengthExceeded)) => {
                    Ok(Received::Garbled("line exceeds the maximum length".into()))
                }
                Some(Err(LinesCodecError::Io(e))) if e.kind() == io::ErrorKind::InvalidData => {
                    Ok(Received::Garbled("line is not valid UTF-8".into()))
                }
                Some(Err(LinesCodecError::Io(e))) => Err(e),
            },
            Transport::Ws(ws) => loop {
                match ws.next().await {
                    None | Some(Ok(Message::Close(_))) => return Ok(Received::Closed),
                    Some(Ok(Message::Text(text))) => return Ok(Received::Text(text.to_string())),
                    Some(Ok(Message::Binary(bytes))) => {
                        return Ok(match String::from_utf8(bytes.to_vec()) {
                            Ok(text) => Received::Text(text),
                            Err(_) => Received::Garbled("binary frame is not valid UTF-8".into()),
                        })
                    }
                    Some(Ok(_)) => continue,
                    Some(Err(e)) => return Err(io::Error::other(e)),
                }
            },
        }
    }

    async fn send(&mut self, text: String) -> io::Result<()> {
        match self {
            Transport::Lines(framed) => framed.send(text).await.map_err(|e| match e {
                LinesCodecError::Io(e) => e,
                other => io::Error::other(other),
            }),
            Transport::Ws(ws) => ws.send(Message::text(text)).await.map_err(io::Error::other),
        }
    }

    async fn close(&mut self) {
        if let Transport::Ws(ws) = self {
            let _ = ws.as_mut().close(None).await;
        }
    }
}

async fn next_event(events: &mut Option<broadcast::Receiver<Event>>) -> Option<Event> {
    let Some(rx) = events else {
        return std::future::pending().await;
    };
    loop {
        match rx.recv().await {
            Ok(ev) => return Some(ev),
            // a slow observer misses old notifications
            Err(broadcast::error::RecvError::Lagged(_)) => continue,
            Err(broadcast::error::RecvError::Closed) => return None,
        }
    }
}

async fn serve_connection(stream: TcpStream, hub: Arc<Hub>) -> io::Result<()> {
    let idle = hub.config.idle_timeout;
    let mut transport = Transport::detect(stream, hub.config.max_line_bytes, idle).await?;
    let mut conn = Connection::new(hub);
    let result = drive(&mut transport, &mut conn, idle).await;
    conn.close();
    transport.close().await;
    result
}

async fn drive(transport: &mut Transport, conn: &mut Connection, idle: Duration) -> io::Result<()> {
    let mut events = None;
    let mut own_activity = Instant::now();
    loop {
        let last = conn
            .session()
            .map_or(own_activity, |s| Instant::from_std(s.last_activity()).max(own_activity));
        tokio::select! {
            received = transport.recv() => {
                own_activity = Instant::now();
                let outcome = match received? {
                    Received::Closed => return Ok(()),
                    Received::Garbled(why) => {
                        let line = conn.encode(&Reply::error(ErrorCode::BadMessage, why), None);
                        transport.send(line).await?;
                        continue;
                    }
                    Received::Text(text) => conn.handle(&text),
                };
                // subscribe before the ack goes out so no notification is missed
                if events.is_none() {
                    events = conn.session().map(|s| s.subscribe());
                }
                for line in outcome.lines {
                    transport.send(line).await?;
                }
                if outcome.close {
                    return Ok(());
                }
            }
            event = next_event(&mut events) => match event {
                Some(ev) if ev.origin == conn.id => {}
                Some(ev) => {
                    let closing = matches!(ev.reply, Reply::Bye { .. });
                    let line = conn.encode(&ev.reply, None);
                    transport.send(line).await?;
                    if closing {
                        return Ok(());
                    }
                }
                None => events = None,
            },
            _ = sleep_until(last + idle) => {
                let recent = conn.session().map_or(own_activity, |s| Instant::from_std(s.last_activity()).max(own_activity));
                if recent + idle <= Instant::now() {
                    let line = conn.encode(&Reply::bye("idle_timeout"), None);
                    transport.send(line).await?;
                    return Ok(());
                }
            }
        }
    }
}
