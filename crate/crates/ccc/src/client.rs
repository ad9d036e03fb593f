//! Async client for the TCP channel; used by the CLI and by tests.

use crate::frame_codec;
use cage_core::wire::{Action, CommandRequest, Envelope, Message, Sequencer, WireError};
use futures::{SinkExt, StreamExt};
use std::io;
use std::net::SocketAddr;
use std::time::Duration;
use tokio::net::TcpStream;
use tokio_util::codec::Framed;

pub struct CccClient {
    framed: Framed<TcpStream, tokio_util::codec::LengthDelimitedCodec>,
    seq: Sequencer,
}

impl CccClient {
    pub async fn connect(addr: SocketAddr, sender: &str) -> io::Result<Self> {
        let stream = TcpStream::connect(addr).await?;
        stream.set_nodelay(true)?;
        Ok(Self { framed: Framed::new(stream, frame_codec()), seq: Sequencer::new(sender) })
    }

    pub fn sender(&self) -> &str {
        self.seq.sender()
    }

    /// Send `message` about `vehicle`; returns the sequence it was stamped with.
    pub async fn send(&mut self, vehicle: &str, message: &Message) -> io::Result<u64> {
        let env = self.seq.stamp(message, vehicle);
        self.send_envelope(&env).await?;
        Ok(env.sequence)
    }

    pub async fn send_envelope(&mut self, env: &Envelope) -> io::Result<()> {
        self.framed.send(bytes::Bytes::from(env.to_bytes())).await
    }

    pub async fn request(&mut self, vehicle: &str, action: Action) -> io::Result<u64> {
        self.send(vehicle, &Message::CommandRequest(CommandRequest::new(action))).await
    }

    /// Next envelope; `Ok(None)` when the service closed the connection.
    pub async fn recv(&mut self) -> io::Result<Option<Envelope>> {
        match self.framed.next().await {
            None => Ok(None),
            Some(frame) => Envelope::from_bytes(&frame?).map(Some).map_err(|e| match e {
                WireError::Io(e) => e,
                other => io::Error::new(io::ErrorKind::InvalidData, other),
            }),
        }
    }

    /// Skip messages until `pick` returns a value, or fail after `timeout`.
    pub async fn recv_until<T>(&mut self, timeout: Duration, mut pick: impl FnMut(&Envelope, Message) -> Option<T>) -> io::Result<T> {
        let wait = async {
            loop {
                let Some(env) = self.recv().await? else {
                    return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "service closed the connection"));
                };
                let Ok(Some(msg)) = env.decode() else { continue };
                if let Some(v) = pick(&env, msg) {
                    return Ok(v);
                }
            }
        };
        tokio::time::timeout(timeout, wait).await.map_err(|_| io::Error::new(io::ErrorKind::TimedOut, "no matching message"))?
    }

    /// Reply to the request stamped `sequence`: a grant, deny or ack.
    pub async fn reply_to(&mut self, sequence: u64, timeout: Duration) -> io::Result<Message> {
        self.recv_until(timeout, |_, m| {
            let seq = match &m {
                Message::ControlGrant(g) => g.request_sequence,
                Message::ControlDeny(d) => d.request_sequence,
                Message::CommandAck(a) => a.request_sequence,
                _ => return None,
            };
            (seq == sequence).then_some(m)
        })
        .await
    }
}
