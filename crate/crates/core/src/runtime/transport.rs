//! Real network sinks for `post`, `publish` and `stream`.
//!
//! * post: HTTP/1.1 `POST` of the JSON body to the destination URL.
//! * publish: MQTT 3.1.1, CONNECT then one QoS 0 PUBLISH then DISCONNECT.
//! * stream: one TCP connection per delivery carrying a 4-byte big-endian
//!   length followed by the body.
//!
//! TLS schemes are refused: the hub has no TLS stack.

use std::io::{Read, Write};
use std::net::{SocketAddr, TcpStream, ToSocketAddrs};
use std::time::Duration;

use crate::operators::{OutboundRequest, Protocol, Transport, TransportError};

pub const APP_HEADER: &str = "x-privhub-app";
pub const CONTENT_HEADER: &str = "x-privhub-content";

pub struct NetTransport {
    timeout: Duration,
    http: reqwest::blocking::Client,
    /// Sends every delivery here instead of the manifest destination.
    sink: Option<SocketAddr>,
}

fn unreachable(what: impl std::fmt::Display) -> TransportError {
    TransportError::Unreachable(what.to_string())
}

impl NetTransport {
    pub fn new(timeout: Duration) -> Self {
        let http = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .expect("plain HTTP client builds");
        NetTransport { timeout, http, sink: None }
    }

    pub fn with_sink(mut self, sink: SocketAddr) -> Self {
        self.sink = Some(sink);
        self
    }

    fn addr(&self, req: &OutboundRequest) -> Result<SocketAddr, TransportError> {
        if let Some(s) = self.sink {
            return Ok(s);
        }
        let d = &req.destination;
        (d.host.as_str(), d.port.unwrap_or_else(|| d.default_port()))
            .to_socket_addrs()
            .map_err(unreachable)?
            .next()
            .ok_or_else(|| unreachable(format!("{} does not resolve", d.host)))
    }

    fn connect(&self, req: &OutboundRequest) -> Result<TcpStream, TransportError> {
        let s = TcpStream::connect_timeout(&self.addr(req)?, self.timeout).map_err(unreachable)?;
        s.set_read_timeout(Some(self.timeout)).map_err(unreachable)?;
        s.set_write_timeout(Some(self.timeout)).map_err(unreachable)?;
        Ok(s)
    }

    fn post(&self, req: &OutboundRequest) -> Result<(), TransportError> {
        let url = match self.sink {
            Some(s) => format!("http://{s}{}", req.destination.path),
            None => req.destination.to_string(),
        };
        let resp = self
            .http
            .post(url)
            .header("content-type", "application/json")
            .header(APP_HEADER, &req.app)
            .header(CONTENT_HEADER, req.content.key())
            .body(req.body.clone())
            .send()
            .map_err(unreachable)?;
        if resp.status().is_server_error() {
            return Err(unreachable(resp.status()));
        }
        Ok(())
    }

    fn publish(&self, req: &OutboundRequest) -> Result<(), TransportError> {
        let mut s = self.connect(req)?;
        let topic = req.topic.clone().unwrap_or_else(|| format!("privhub/{}/{}", req.app, req.node));
        s.write_all(&mqtt::connect(&format!("privhub-{}", req.app))).map_err(unreachable)?;
        let mut ack = [0u8; 4];
        s.read_exact(&mut ack).map_err(unreachable)?;
        if ack[0] != 0x20 || ack[3] != 0 {
            return Err(unreachable(format!("broker refused the connection (code {})", ack[3])));
        }
        s.write_all(&mqtt::publish(&topic, &req.body)).map_err(unreachable)?;
        s.write_all(&mqtt::DISCONNECT).map_err(unreachable)?;
        Ok(())
    }

    fn stream(&self, req: &OutboundRequest) -> Result<(), TransportError> {
        let mut s = self.connect(req)?;
        let len = u32::try_from(req.body.len()).map_err(unreachable)?;
        s.write_all(&len.to_be_bytes()).map_err(unreachable)?;
        s.write_all(&req.body).map_err(unreachable)
    }
}

impl Transport for NetTransport {
    fn deliver(&self, req: &OutboundRequest) -> Result<(), TransportError> {
        if req.destination.is_tls() && self.sink.is_none() {
            return Err(unreachable(format!("{}: TLS is not supported", req.destination)));
        }
        match req.protocol {
            Protocol::Post => self.post(req),
            Protocol::Publish => self.publish(req),
            Protocol::Stream => self.stream(req),
        }
    }
}

/// Just enough MQTT 3.1.1 to publish at QoS 0.
pub mod mqtt {
    pub const DISCONNECT: [u8; 2] = [0xe0, 0x00];

    fn remaining_length(mut n: usize, out: &mut Vec<u8>) {
        loop {
            let mut byte = (n % 128) as u8;
            n /= 128;
            if n > 0 {
                byte |= 0x80;
            }
            out.push(byte);
            if n == 0 {
                break;
            }
        }
    }

    fn string(s: &str, out: &mut Vec<u8>) {
        out.extend_from_slice(&(s.len() as u16).to_be_bytes());
        out.extend_from_slice(s.as_bytes());
    }

    fn packet(header: u8, body: Vec<u8>) -> Vec<u8> {
        let mut out = vec![header];
        remaining_length(body.len(), &mut out);
        out.extend(body);
        out
    }

    pub fn connect(client_id: &str) -> Vec<u8> {
        let mut body = Vec::new();
        string("MQTT", &mut body);
        // level 4, clean session, keep-alive 60 s
        body.extend_from_slice(&[4, 0x02, 0, 60]);
        string(client_id, &mut body);
        packet(0x10, body)
    }

    pub fn publish(topic: &str, payload: &[u8]) -> Vec<u8> {
        let mut body = Vec::new();
        string(topic, &mut body);
        body.extend_from_slice(payload);
        packet(0x30, body)
    }

    /// Decodes the remaining-length field at the start of `bytes`:
    /// (value, bytes used).
    pub fn decode_length(bytes: &[u8]) -> Option<(usize, usize)> {
        let mut value = 0usize;
        for (i, b) in bytes.iter().take(4).enumerate() {
            value += ((b & 0x7f) as usize) << (7 * i);
            if b & 0x80 == 0 {
                return Some((value, i + 1));
            }
        }
        None
    }
}
