// SPDX-License-Identifier: MIT OR Apache-2.0

//! Rate-limited SPARQL client.
//!
//! At most one request per `min_interval`, with exponential backoff on
//! transport failures, HTTP 429 and 5xx responses. The transport and the clock
//! are traits so the retry schedule can be exercised offline.

use std::time::{Duration, Instant};

use crate::error::{Error, Result};

pub const DEFAULT_ENDPOINT: &str = "https://query.wikidata.org/sparql";
pub const USER_AGENT_ENV: &str = "AWARESCOPE_USER_AGENT";
pub const ENDPOINT_ENV: &str = "AWARESCOPE_ENDPOINT";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

pub trait Transport {
    /// Issues a GET for `query` against `endpoint`. `Err` means no response was received.
    fn get(&self, endpoint: &str, query: &str, user_agent: &str) -> std::result::Result<HttpResponse, String>;
}

pub trait Clock {
    fn elapsed(&self) -> Duration;
    fn sleep(&self, d: Duration);
}

#[derive(Debug)]
pub struct SystemClock(Instant);

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock(Instant::now())
    }
}

impl Clock for SystemClock {
    fn elapsed(&self) -> Duration {
        self.0.elapsed()
    }

    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Blocking HTTPS transport.
pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl ReqwestTransport {
    pub fn new(timeout: Duration) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::Http(e.to_string()))?;
        Ok(Self { client })
    }
}

impl Transport for ReqwestTransport {
    fn get(&self, endpoint: &str, query: &str, user_agent: &str) -> std::result::Result<HttpResponse, String> {
        let resp = self
            .client
            .get(endpoint)
            .query(&[("query", query), ("format", "json")])
            .header(reqwest::header::ACCEPT, "application/sparql-results+json")
            .header(reqwest::header::USER_AGENT, user_agent)
            .send()
            .map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let body = resp.text().map_err(|e| e.to_string())?;
        Ok(HttpResponse { status, body })
    }
}

/// Reads the mandatory client identification from the environment.
pub fn user_agent_from_env() -> Result<String> {
    match std::env::var(USER_AGENT_ENV) {
        Ok(v) if !v.trim().is_empty() => Ok(v),
        _ => Err(Error::config(format!(
            "{USER_AGENT_ENV} must be set to a descriptive client identification (tool name and contact)"
        ))),
    }
}

/// Endpoint resolution: explicit flag, then environment, then the public default.
pub fn resolve_endpoint(flag: Option<&str>) -> String {
    flag.map(str::to_owned)
        .or_else(|| std::env::var(ENDPOINT_ENV).ok().filter(|s| !s.is_empty()))
        .unwrap_or_else(|| DEFAULT_ENDPOINT.to_owned())
}

pub struct SparqlClient<T, C = SystemClock> {
    endpoint: String,
    user_agent: String,
    transport: T,
    clock: C,
    pub min_interval: Duration,
    pub max_retries: u32,
    pub base_backoff: Duration,
    last_request: Option<Duration>,
}

impl<T: Transport> SparqlClient<T, SystemClock> {
    pub fn new(endpoint: impl Into<String>, user_agent: impl Into<String>, transport: T) -> Result<Self> {
        Self::with_clock(endpoint, user_agent, transport, SystemClock::default())
    }
}

impl<T: Transport, C: Clock> SparqlClient<T, C> {
    pub fn with_clock(
        endpoint: impl Into<String>,
        user_agent: impl Into<String>,
        transport: T,
        clock: C,
    ) -> Result<Self> {
        let user_agent = user_agent.into();
        if user_agent.trim().is_empty() {
            return Err(Error::config("a client identification header is required"));
        }
        Ok(Self {
            endpoint: endpoint.into(),
            user_agent,
            transport,
            clock,
            min_interval: Duration::from_secs(1),
            max_retries: 3,
            base_backoff: Duration::from_secs(1),
            last_request: None,
        })
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn throttle(&mut self) {
        if let Some(last) = self.last_request {
            let since = self.clock.elapsed().saturating_sub(last);
            if since < self.min_interval {
                self.clock.sleep(self.min_interval - since);
            }
        }
        self.last_request = Some(self.clock.elapsed());
    }

    /// Runs a query and returns the response body.
    pub fn fetch(&mut self, query: &str) -> Result<String> {
        let mut last_error = String::new();
        for attempt in 0..=self.max_retries {
            if attempt > 0 {
                self.clock.sleep(self.base_backoff * 2u32.pow(attempt - 1));
            }
            self.throttle();
            match self.transport.get(&self.endpoint, query, &self.user_agent) {
                Ok(resp) if (200..300).contains(&resp.status) => return Ok(resp.body),
                Ok(resp) if resp.status == 429 || resp.status >= 500 => {
                    last_error = format!("HTTP {}", resp.status);
                }
                Ok(resp) => return Err(Error::Http(format!("HTTP {} from {}", resp.status, self.endpoint))),
                Err(e) => last_error = e,
            }
        }
        Err(Error::Http(format!(
            "{} failed after {} retries: {last_error}",
            self.endpoint, self.max_retries
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::RefCell;

    #[derive(Default)]
    struct FakeClock {
        now: RefCell<Duration>,
        sleeps: RefCell<Vec<Duration>>,
    }

    impl Clock for &FakeClock {
        fn elapsed(&self) -> Duration {
            *self.now.borrow()
        }
        fn sleep(&self, d: Duration) {
            *self.now.borrow_mut() += d;
            self.sleeps.borrow_mut().push(d);
        }
    }

    struct Scripted {
        replies: RefCell<Vec<std::result::Result<HttpResponse, String>>>,
        agents: RefCell<Vec<String>>,
    }

    impl Scripted {
        fn new(mut replies: Vec<std::result::Result<HttpResponse, String>>) -> Self {
            replies.reverse();
            Self { replies: RefCell::new(replies), agents: RefCell::default() }
        }
    }

    impl Transport for &Scripted {
        fn get(&self, _: &str, _: &str, ua: &str) -> std::result::Result<HttpResponse, String> {
            self.agents.borrow_mut().push(ua.to_owned());
            self.replies.borrow_mut().pop().expect("unexpected request")
        }
    }

    fn ok(body: &str) -> std::result::Result<HttpResponse, String> {
        Ok(HttpResponse { status: 200, body: body.into() })
    }

    fn status(code: u16) -> std::result::Result<HttpResponse, String> {
        Ok(HttpResponse { status: code, body: String::new() })
    }

    #[test]
    fn consecutive_requests_are_spaced_by_one_second() {
        let clock = FakeClock::default();
        let transport = Scripted::new(vec![ok("a"), ok("b")]);
        let mut client = SparqlClient::with_clock("http://x", "test-agent/1.0", &transport, &clock).unwrap();
        assert_eq!(client.fetch("q").unwrap(), "a");
        assert_eq!(client.fetch("q").unwrap(), "b");
        assert_eq!(*clock.sleeps.borrow(), vec![Duration::from_secs(1)]);
        assert_eq!(*transport.agents.borrow(), vec!["test-agent/1.0", "test-agent/1.0"]);
    }

    #[test]
    fn retries_back_off_exponentially() {
        let clock = FakeClock::default();
        let transport = Scripted::new(vec![status(503), Err("reset".into()), status(429), ok("done")]);
        let mut client = SparqlClient::with_clock("http://x", "ua", &transport, &clock).unwrap();
        assert_eq!(client.fetch("q").unwrap(), "done");
        let sleeps = clock.sleeps.borrow();
        // backoff 1s, 2s, 4s; the throttle is already satisfied by each backoff
        assert_eq!(*sleeps, vec![Duration::from_secs(1), Duration::from_secs(2), Duration::from_secs(4)]);
    }

    #[test]
    fn gives_up_after_three_retries() {
        let clock = FakeClock::default();
        let transport = Scripted::new(vec![status(500), status(500), status(500), status(500)]);
        let mut client = SparqlClient::with_clock("http://x", "ua", &transport, &clock).unwrap();
        assert!(matches!(client.fetch("q"), Err(Error::Http(_))));
        assert_eq!(transport.agents.borrow().len(), 4);
    }

    #[test]
    fn client_errors_are_not_retried() {
        let clock = FakeClock::default();
        let transport = Scripted::new(vec![status(400)]);
        let mut client = SparqlClient::with_clock("http://x", "ua", &transport, &clock).unwrap();
        assert!(matches!(client.fetch("q"), Err(Error::Http(_))));
        assert_eq!(transport.agents.borrow().len(), 1);
    }

    #[test]
    fn blank_user_agent_is_rejected() {
        let transport = Scripted::new(vec![]);
        let clock = FakeClock::default();
        assert!(matches!(
            SparqlClient::with_clock("http://x", "  ", &transport, &clock),
            Err(Error::Config(_))
        ));
    }
}
