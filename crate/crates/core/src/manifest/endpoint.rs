use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EndpointError {
    #[error("{0:?} is not an absolute URL")]
    NotAbsolute(String),
    #[error("{0:?} has an empty host")]
    EmptyHost(String),
    #[error("{0:?} has an invalid port")]
    BadPort(String),
}

/// A network destination. The host keeps the spelling used in the manifest
/// for display; comparisons go through [`Endpoint::origin`], which is
/// case-insensitive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Endpoint {
    pub scheme: String,
    pub host: String,
    pub port: Option<u16>,
    pub path: String,
}

impl Endpoint {
    pub fn parse(text: &str) -> Result<Self, EndpointError> {
        let (scheme, rest) = text
            .split_once("://")
            .filter(|(s, _)| !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric()))
            .ok_or_else(|| EndpointError::NotAbsolute(text.to_string()))?;
        let (authority, path) = match rest.find('/') {
            Some(i) => (&rest[..i], &rest[i..]),
            None => (rest, ""),
        };
        let (host, port) = match authority.rsplit_once(':') {
            Some((h, p)) => {
                let port = p
                    .parse::<u16>()
                    .map_err(|_| EndpointError::BadPort(text.to_string()))?;
                (h, Some(port))
            }
            None => (authority, None),
        };
        if host.is_empty() {
            return Err(EndpointError::EmptyHost(text.to_string()));
        }
        Ok(Endpoint {
            scheme: scheme.to_ascii_lowercase(),
            host: host.to_string(),
            port,
            path: path.to_string(),
        })
    }

    /// Normalized `scheme://host[:port]`.
    pub fn origin(&self) -> String {
        match self.port {
            Some(p) => format!("{}://{}:{}", self.scheme, self.host.to_ascii_lowercase(), p),
            None => format!("{}://{}", self.scheme, self.host.to_ascii_lowercase()),
        }
    }

    /// Host as written in the manifest, with the port when one was given.
    pub fn authority(&self) -> String {
        match self.port {
            Some(p) => format!("{}:{}", self.host, p),
            None => self.host.clone(),
        }
    }

    pub fn is_tls(&self) -> bool {
        matches!(self.scheme.as_str(), "https" | "mqtts" | "rtsps")
    }

    pub fn default_port(&self) -> u16 {
        match self.scheme.as_str() {
            "http" => 80,
            "https" => 443,
            "mqtt" => 1883,
            "mqtts" => 8883,
            "rtsp" => 554,
            "rtsps" => 322,
            _ => 9000,
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}://{}", self.scheme, self.host)?;
        if let Some(p) = self.port {
            write!(f, ":{p}")?;
        }
        f.write_str(&self.path)
    }
}
