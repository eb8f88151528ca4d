//! Running the protocols over TCP: prover servers and a coordinator that
//! plays one verifier endpoint per prover and enforces reply deadlines.
//!
//! Frames are ASCII lines of space-separated fields:
//!
//! ```text
//! HELLO loc2 <digest as 16 hex digits> <role>
//! Q <i> <j> [<r> <s>]
//! A <w1> <w2>
//! A-REFUSE
//! VERDICT ACCEPT ALL_PASSED
//! ERR <text>
//! ```
//!
//! The server echoes the HELLO to acknowledge a session. Round `k` of a
//! session (counting from zero) is answered with the secret drawn from
//! `stream_rng(seed, k)`, so every prover sharing a seed uses the same
//! coloring and masks in the same round.

use std::fmt;
use std::io::{self, BufRead, BufReader, ErrorKind, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use log::{debug, info, warn};

use crate::commit::{NonzeroTrit, ProverSecret, Trit};
use crate::dist::{Epsilon, Question};
use crate::engine::{
    check, honest_answer_committed, honest_answer_std, sample_questions, Answer, Protocol, Query, Transcript, Verdict,
    VerdictReason,
};
use crate::error::{NetError, ProtocolError};
use crate::graph::{Edge, Graph};

/// How long the coordinator waits for a HELLO acknowledgement or for a
/// reply that already missed its deadline.
pub const HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WireMessage {
    Hello { protocol: Protocol, digest: u64, role: usize },
    Q(Query),
    A(Trit, Trit),
    ARefuse,
    Verdict(Verdict),
    Error(String),
}

impl WireMessage {
    pub fn from_answer(a: Answer) -> Self {
        match a {
            Answer::Committed(x, y) => WireMessage::A(x, y),
            Answer::Refused => WireMessage::ARefuse,
        }
    }

    /// One line without the terminating newline.
    pub fn encode(&self) -> String {
        match self {
            WireMessage::Hello { protocol, digest, role } => format!("HELLO {protocol} {digest:016x} {role}"),
            WireMessage::Q(Query::Plain(e)) => format!("Q {} {}", e.lo(), e.hi()),
            WireMessage::Q(Query::Committed(q)) => format!("Q {} {} {} {}", q.edge.lo(), q.edge.hi(), q.r, q.s),
            WireMessage::A(a, b) => format!("A {a} {b}"),
            WireMessage::ARefuse => "A-REFUSE".to_string(),
            WireMessage::Verdict(v) => format!("VERDICT {v}"),
            WireMessage::Error(text) => {
                let text: String = text.chars().map(|c| if c.is_control() { ' ' } else { c }).collect();
                format!("ERR {text}")
            }
        }
    }

    pub fn decode(line: &str) -> Result<Self, NetError> {
        let line = line.strip_suffix('\n').unwrap_or(line);
        let line = line.strip_suffix('\r').unwrap_or(line);
        let bad = |reason: &str| NetError::Frame { frame: line.to_string(), reason: reason.to_string() };
        let (tag, rest) = line.split_once(' ').unwrap_or((line, ""));
        let fields: Vec<&str> = if rest.is_empty() { Vec::new() } else { rest.split(' ').collect() };
        let number = |s: &str| s.parse::<usize>().map_err(|_| bad("expected a decimal number"));
        let trit = |s: &str| {
            s.parse::<u8>().ok().and_then(|v| Trit::try_new(v).ok()).ok_or_else(|| bad("expected a trit 0-2"))
        };
        let nonzero = |s: &str| {
            s.parse::<u8>().ok().and_then(|v| NonzeroTrit::from_u8(v).ok()).ok_or_else(|| bad("expected 1 or 2"))
        };
        match (tag, fields.as_slice()) {
            ("HELLO", [p, d, r]) => {
                if d.len() != 16 {
                    return Err(bad("digest must be 16 hex digits"));
                }
                Ok(WireMessage::Hello {
                    protocol: p.parse().map_err(|_| bad("unknown protocol"))?,
                    digest: u64::from_str_radix(d, 16).map_err(|_| bad("digest must be hex"))?,
                    role: number(r)?,
                })
            }
            ("Q", [i, j, rest @ ..]) if rest.is_empty() || rest.len() == 2 => {
                let (i, j) = (number(i)?, number(j)?);
                if i >= j || i == 0 {
                    return Err(bad("vertices must satisfy 1 <= i < j"));
                }
                let edge = Edge::new(i, j).map_err(|_| bad("loop"))?;
                Ok(WireMessage::Q(match rest {
                    [r, s] => Query::Committed(Question::new(edge, nonzero(r)?, nonzero(s)?)),
                    _ => Query::Plain(edge),
                }))
            }
            ("A", [a, b]) => Ok(WireMessage::A(trit(a)?, trit(b)?)),
            ("A-REFUSE", []) => Ok(WireMessage::ARefuse),
            ("VERDICT", [_, _]) => Ok(WireMessage::Verdict(rest.parse().map_err(|_| bad("bad verdict"))?)),
            ("ERR", _) => Ok(WireMessage::Error(rest.to_string())),
            ("HELLO" | "Q" | "A" | "A-REFUSE" | "VERDICT", _) => Err(bad("wrong number of fields")),
            _ => Err(bad("unknown frame tag")),
        }
    }
}

impl fmt::Display for WireMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.encode())
    }
}

impl FromStr for WireMessage {
    type Err = NetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        WireMessage::decode(s)
    }
}

/// A line-framed connection. A read that times out keeps the bytes it has
/// seen so the next read resumes mid-frame.
struct Connection {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    partial: Vec<u8>,
}

impl Connection {
    fn new(stream: TcpStream) -> io::Result<Self> {
        stream.set_nodelay(true)?;
        let writer = stream.try_clone()?;
        Ok(Connection { reader: BufReader::new(stream), writer, partial: Vec::new() })
    }

    fn send(&mut self, msg: &WireMessage) -> io::Result<()> {
        let mut line = msg.encode();
        line.push('\n');
        self.writer.write_all(line.as_bytes())
    }

    /// Next frame, `Ok(None)` on timeout.
    fn recv_line(&mut self, timeout: Option<Duration>) -> Result<Option<String>, NetError> {
        self.reader.get_ref().set_read_timeout(timeout.map(|t| t.max(Duration::from_micros(1))))?;
        match self.reader.read_until(b'\n', &mut self.partial) {
            Ok(0) => Err(NetError::Closed),
            Ok(_) if self.partial.ends_with(b"\n") => {
                let line = String::from_utf8(std::mem::take(&mut self.partial)).map_err(|e| NetError::Frame {
                    frame: String::from_utf8_lossy(e.as_bytes()).into_owned(),
                    reason: "not ASCII".into(),
                })?;
                Ok(Some(line.trim_end_matches(['\r', '\n']).to_string()))
            }
            Ok(_) => Err(NetError::Closed),
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    fn recv(&mut self, timeout: Option<Duration>) -> Result<Option<WireMessage>, NetError> {
        self.recv_line(timeout)?.map(|l| WireMessage::decode(&l)).transpose()
    }
}

/// Everything one prover session received and sent, in order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SessionLog {
    pub peer: Option<SocketAddr>,
    pub received: Vec<String>,
    pub sent: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct ServerOptions {
    /// Sleep before every answer.
    pub delay: Duration,
}

/// An honest prover listening for coordinator sessions.
pub struct ProverServer {
    listener: TcpListener,
    graph: Arc<Graph>,
    seed: u64,
    options: ServerOptions,
    logs: Arc<Mutex<Vec<SessionLog>>>,
    stop: Arc<AtomicBool>,
}

impl ProverServer {
    /// Fails if `graph` has no proper 3-coloring.
    pub fn bind<A: ToSocketAddrs>(addr: A, graph: Graph, seed: u64, options: ServerOptions) -> Result<Self, NetError> {
        round_secret(&graph, seed, 0)?;
        Ok(ProverServer {
            listener: TcpListener::bind(addr)?,
            graph: Arc::new(graph),
            seed,
            options,
            logs: Arc::default(),
            stop: Arc::default(),
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub fn logs(&self) -> Arc<Mutex<Vec<SessionLog>>> {
        Arc::clone(&self.logs)
    }

    /// Accepts sessions until [`ServerHandle::shutdown`]; each session runs
    /// on its own thread.
    pub fn run(&self) -> Result<(), NetError> {
        for stream in self.listener.incoming() {
            if self.stop.load(Ordering::SeqCst) {
                break;
            }
            let stream = match stream {
                Ok(s) => s,
                Err(e) => {
                    warn!("accept failed: {e}");
                    continue;
                }
            };
            let graph = Arc::clone(&self.graph);
            let logs = Arc::clone(&self.logs);
            let (seed, delay) = (self.seed, self.options.delay);
            thread::spawn(move || {
                let mut log = SessionLog { peer: stream.peer_addr().ok(), ..SessionLog::default() };
                if let Err(e) = serve_session(stream, &graph, seed, delay, &mut log) {
                    debug!("session {:?} ended: {e}", log.peer);
                }
                logs.lock().expect("log mutex").push(log);
            });
        }
        Ok(())
    }

    /// Runs the server on a background thread.
    pub fn spawn(self) -> Result<ServerHandle, NetError> {
        let addr = self.local_addr()?;
        let logs = self.logs();
        let stop = Arc::clone(&self.stop);
        let join = thread::spawn(move || self.run());
        Ok(ServerHandle { addr, logs, stop, join: Some(join) })
    }
}

pub struct ServerHandle {
    pub addr: SocketAddr,
    logs: Arc<Mutex<Vec<SessionLog>>>,
    stop: Arc<AtomicBool>,
    join: Option<thread::JoinHandle<Result<(), NetError>>>,
}

impl ServerHandle {
    /// Logs of sessions that have ended.
    pub fn session_logs(&self) -> Vec<SessionLog> {
        self.logs.lock().expect("log mutex").clone()
    }

    pub fn shutdown(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // Wake the accept loop.
        let _ = TcpStream::connect(self.addr);
        if let Some(join) = self.join.take() {
            let _ = join.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.shutdown();
    }
}

/// The honest secret for round `round` of a session.
pub fn round_secret(graph: &Graph, seed: u64, round: u64) -> Result<ProverSecret, ProtocolError> {
    ProverSecret::random(graph, &mut crate::stream_rng(seed, round))
}

fn serve_session(
    stream: TcpStream,
    graph: &Graph,
    seed: u64,
    delay: Duration,
    log: &mut SessionLog,
) -> Result<(), NetError> {
    let mut conn = Connection::new(stream)?;
    let send = |conn: &mut Connection, log: &mut SessionLog, msg: WireMessage| {
        log.sent.push(msg.encode());
        conn.send(&msg)
    };
    let reject = |conn: &mut Connection, log: &mut SessionLog, text: String| -> Result<(), NetError> {
        let msg = WireMessage::Error(text.clone());
        log.sent.push(msg.encode());
        conn.send(&msg)?;
        conn.writer.shutdown(Shutdown::Both)?;
        Err(NetError::Handshake(text))
    };

    let Some(first) = conn.recv_line(None)? else { return Err(NetError::Closed) };
    log.received.push(first.clone());
    let protocol = match WireMessage::decode(&first) {
        Ok(WireMessage::Hello { protocol, digest, role }) => {
            if digest != graph.digest() {
                return reject(&mut conn, log, format!("digest mismatch: serving {:016x}", graph.digest()));
            }
            if role == 0 || role > protocol.arity() {
                return reject(&mut conn, log, format!("role {role} out of range for {protocol}"));
            }
            send(&mut conn, log, WireMessage::Hello { protocol, digest, role })?;
            info!("session from {:?}: {protocol} role {role}", log.peer);
            protocol
        }
        Ok(_) => return reject(&mut conn, log, "expected HELLO".into()),
        Err(e) => return reject(&mut conn, log, e.to_string()),
    };

    let mut round = 0u64;
    loop {
        let line = match conn.recv_line(None) {
            Ok(Some(line)) => line,
            Ok(None) => continue,
            Err(NetError::Closed) => return Ok(()),
            Err(e) => return Err(e),
        };
        log.received.push(line.clone());
        let query = match WireMessage::decode(&line) {
            Ok(WireMessage::Q(q)) => q,
            Ok(WireMessage::Verdict(v)) => {
                debug!("round {} verdict {v}", round.saturating_sub(1));
                continue;
            }
            Ok(other) => return reject(&mut conn, log, format!("unexpected frame {}", other.encode())),
            Err(e) => return reject(&mut conn, log, e.to_string()),
        };
        if matches!(query, Query::Plain(_)) == protocol.is_committed() {
            return reject(&mut conn, log, format!("question shape does not match {protocol}"));
        }
        let secret = round_secret(graph, seed, round)?;
        round += 1;
        let answer = match query {
            Query::Plain(e) => honest_answer_std(graph, &secret, e),
            Query::Committed(q) => honest_answer_committed(graph, &secret, &q),
        };
        if !delay.is_zero() {
            thread::sleep(delay);
        }
        send(&mut conn, log, WireMessage::from_answer(answer))?;
    }
}

/// Send and receive times of one prover's exchange, relative to the start
/// of the round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProverTiming {
    pub sent: Duration,
    /// `None` if no reply arrived before the deadline.
    pub received: Option<Duration>,
}

impl ProverTiming {
    pub fn latency(&self) -> Option<Duration> {
        self.received.map(|r| r - self.sent)
    }

    pub fn violated(&self, deadline: Duration) -> bool {
        !matches!(self.latency(), Some(l) if l <= deadline)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundTiming {
    pub deadline: Duration,
    pub provers: Vec<ProverTiming>,
}

impl RoundTiming {
    /// One-based slots of provers that missed the deadline.
    pub fn violations(&self) -> Vec<usize> {
        (1..=self.provers.len()).filter(|&k| self.provers[k - 1].violated(self.deadline)).collect()
    }
}

struct Endpoint {
    conn: Connection,
    /// Replies still owed for rounds whose deadline passed.
    owed: usize,
}

/// The verifier side: one connection per prover, opened once and reused
/// for every round.
pub struct Coordinator {
    graph: Graph,
    protocol: Protocol,
    endpoints: Vec<Endpoint>,
    rounds: u64,
}

impl Coordinator {
    pub fn connect<A: ToSocketAddrs>(addrs: &[A], graph: Graph, protocol: Protocol) -> Result<Self, NetError> {
        if addrs.len() != protocol.arity() {
            return Err(ProtocolError::Arity {
                protocol: protocol.to_string(),
                expected: protocol.arity(),
                found: addrs.len(),
            }
            .into());
        }
        let digest = graph.digest();
        let mut endpoints = Vec::with_capacity(addrs.len());
        for (k, addr) in addrs.iter().enumerate() {
            let role = k + 1;
            let mut conn = Connection::new(TcpStream::connect(addr)?)?;
            let hello = WireMessage::Hello { protocol, digest, role };
            conn.send(&hello)?;
            match conn.recv(Some(HANDSHAKE_TIMEOUT))? {
                Some(ack) if ack == hello => {}
                Some(WireMessage::Error(text)) => return Err(NetError::Remote { slot: role, text }),
                Some(other) => return Err(NetError::Unexpected { slot: role, frame: other.encode() }),
                None => return Err(NetError::Handshake(format!("prover {role} did not acknowledge"))),
            }
            endpoints.push(Endpoint { conn, owed: 0 });
        }
        Ok(Coordinator { graph, protocol, endpoints, rounds: 0 })
    }

    pub fn protocol(&self) -> Protocol {
        self.protocol
    }

    /// Rounds played so far on these sessions.
    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    /// One round with questions drawn from `crate::seeded_rng(seed)`, the
    /// same draw as [`crate::engine::run_round`]. Questions go out
    /// concurrently. A prover that misses `deadline` makes the round
    /// reject with [`VerdictReason::DeadlineExceeded`]; its answer is
    /// recorded as a refusal.
    pub fn coordinate_round(
        &mut self,
        eps: Epsilon,
        seed: u64,
        deadline: Duration,
    ) -> Result<(Transcript, RoundTiming), NetError> {
        let mut rng = crate::seeded_rng(seed);
        let questions = sample_questions(&self.graph, self.protocol, eps, &mut rng);
        let start = Instant::now();
        let results: Vec<Result<(Option<Answer>, ProverTiming), NetError>> = thread::scope(|scope| {
            let workers: Vec<_> = self
                .endpoints
                .iter_mut()
                .zip(&questions)
                .enumerate()
                .map(|(k, (ep, q))| scope.spawn(move || exchange(ep, k + 1, q, start, deadline)))
                .collect();
            workers.into_iter().map(|w| w.join().expect("exchange thread panicked")).collect()
        });
        self.rounds += 1;
        let mut answers = Vec::with_capacity(results.len());
        let mut provers = Vec::with_capacity(results.len());
        for r in results {
            let (answer, timing) = r?;
            answers.push(answer.unwrap_or(Answer::Refused));
            provers.push(timing);
        }
        let timing = RoundTiming { deadline, provers };
        let verdict = if timing.violations().is_empty() {
            check(&self.graph, self.protocol, &questions, &answers)?
        } else {
            warn!("round seed {seed}: deadline exceeded by prover(s) {:?}", timing.violations());
            Verdict::reject(VerdictReason::DeadlineExceeded)
        };
        for ep in &mut self.endpoints {
            ep.conn.send(&WireMessage::Verdict(verdict))?;
        }
        let transcript = Transcript { protocol: self.protocol, epsilon: eps, seed, questions, answers, verdict };
        Ok((transcript, timing))
    }
}

fn exchange(
    ep: &mut Endpoint,
    slot: usize,
    q: &Query,
    start: Instant,
    deadline: Duration,
) -> Result<(Option<Answer>, ProverTiming), NetError> {
    while ep.owed > 0 {
        match ep.conn.recv(Some(HANDSHAKE_TIMEOUT))? {
            Some(WireMessage::A(..) | WireMessage::ARefuse) => ep.owed -= 1,
            Some(WireMessage::Error(text)) => return Err(NetError::Remote { slot, text }),
            Some(other) => return Err(NetError::Unexpected { slot, frame: other.encode() }),
            None => return Err(NetError::Handshake(format!("prover {slot} stopped answering"))),
        }
    }
    let sent = start.elapsed();
    ep.conn.send(&WireMessage::Q(*q))?;
    let reply = ep.conn.recv(Some(deadline.saturating_sub(start.elapsed() - sent)))?;
    let received = start.elapsed();
    match reply {
        Some(WireMessage::A(a, b)) => {
            Ok((Some(Answer::Committed(a, b)), ProverTiming { sent, received: Some(received) }))
        }
        Some(WireMessage::ARefuse) => Ok((Some(Answer::Refused), ProverTiming { sent, received: Some(received) })),
        Some(WireMessage::Error(text)) => Err(NetError::Remote { slot, text }),
        Some(other) => Err(NetError::Unexpected { slot, frame: other.encode() }),
        None => {
            ep.owed += 1;
            Ok((None, ProverTiming { sent, received: None }))
        }
    }
}
