use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("line {line}: malformed input: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: loop at vertex {vertex}")]
    Loop { line: usize, vertex: usize },
    #[error("line {line}: duplicate edge {edge}")]
    DuplicateEdge { line: usize, edge: String },
    #[error("graph is disconnected: vertex {unreachable} is unreachable from vertex 1")]
    Disconnected { unreachable: usize },
    #[error("line {line}: vertex {vertex} out of range 1..={n}")]
    VertexOutOfRange { line: usize, vertex: usize, n: usize },
    #[error("header declares {declared} edges but {found} were listed")]
    EdgeCountMismatch { declared: usize, found: usize },
    #[error("empty graph")]
    Empty,
    #[error("graph has {n} vertices, enumeration limit is {limit}")]
    TooLarge { n: usize, limit: usize },
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum FieldError {
    #[error("zero has no inverse in F3")]
    InverseOfZero,
    #[error("zero is not a valid commitment randomness")]
    ZeroRandomness,
    #[error("trit value {0} out of range")]
    OutOfRange(u8),
    #[error("implicit unveiling needs two different randomness values")]
    SameRandomness,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("protocol {protocol} needs {expected} provers, got {found}")]
    Arity { protocol: String, expected: usize, found: usize },
    #[error("epsilon must lie strictly between 0 and 1, got {0}")]
    Epsilon(String),
    #[error("graph has {edges} edges, limit for {what} is {limit}")]
    TooLarge { what: &'static str, edges: usize, limit: usize },
    #[error("strategy table is not total: missing answer for {0}")]
    NotTotal(String),
    #[error("strategy table kind does not match protocol {0}")]
    TableKind(String),
    #[error("graph is not 3-colorable")]
    NotColorable,
    #[error("coloring is not proper for the graph")]
    ImproperColoring,
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Error)]
pub enum NetError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed frame `{frame}`: {reason}")]
    Frame { frame: String, reason: String },
    #[error("peer closed the connection")]
    Closed,
    #[error("handshake rejected: {0}")]
    Handshake(String),
    #[error("prover {slot} sent an unexpected frame `{frame}`")]
    Unexpected { slot: usize, frame: String },
    #[error("prover {slot} reported an error: {text}")]
    Remote { slot: usize, text: String },
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}
