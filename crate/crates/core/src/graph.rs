//! Graph representation, edge algebra and proper 3-coloring search.
//!
//! Vertices are labeled `1..=n`. Every edge is stored canonically as
//! `(lo, hi)` with `lo < hi`.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::commit::Trit;
use crate::error::GraphError;

pub type Vertex = usize;

/// Default vertex limit for [`Graph::proper_colorings`].
pub const ENUMERATION_LIMIT: usize = 12;

/// A canonical undirected edge `(lo, hi)`, `lo < hi`.
///
/// Edges are not tied to a particular graph: a dishonest verifier may ask
/// about any pair of distinct vertices, even ones outside `1..=n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    lo: Vertex,
    hi: Vertex,
}

impl Edge {
    /// Canonicalizes the pair `{a, b}`. Fails on a loop.
    pub fn new(a: Vertex, b: Vertex) -> Result<Self, GraphError> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Ok(Edge { lo: a, hi: b }),
            std::cmp::Ordering::Greater => Ok(Edge { lo: b, hi: a }),
            std::cmp::Ordering::Equal => Err(GraphError::Loop { line: 0, vertex: a }),
        }
    }

    pub fn lo(&self) -> Vertex {
        self.lo
    }

    pub fn hi(&self) -> Vertex {
        self.hi
    }

    pub fn contains(&self, v: Vertex) -> bool {
        self.lo == v || self.hi == v
    }

    /// The endpoint that is not `v`, if `v` is an endpoint.
    pub fn other(&self, v: Vertex) -> Option<Vertex> {
        if v == self.lo {
            Some(self.hi)
        } else if v == self.hi {
            Some(self.lo)
        } else {
            None
        }
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.lo, self.hi)
    }
}

impl std::str::FromStr for Edge {
    type Err = GraphError;

    /// Parses the `(i,j)` token form.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || GraphError::Malformed { line: 0, message: format!("bad edge token `{s}`") };
        let inner = s.strip_prefix('(').and_then(|t| t.strip_suffix(')')).ok_or_else(bad)?;
        let (a, b) = inner.split_once(',').ok_or_else(bad)?;
        let a: Vertex = a.trim().parse().map_err(|_| bad())?;
        let b: Vertex = b.trim().parse().map_err(|_| bad())?;
        Edge::new(a, b)
    }
}

/// Intersection of two edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeRelation {
    Disjoint,
    SharedVertex(Vertex),
    Same,
}

pub fn edge_relation(e: Edge, f: Edge) -> EdgeRelation {
    if e == f {
        return EdgeRelation::Same;
    }
    if f.contains(e.lo) {
        EdgeRelation::SharedVertex(e.lo)
    } else if f.contains(e.hi) {
        EdgeRelation::SharedVertex(e.hi)
    } else {
        EdgeRelation::Disjoint
    }
}

/// A loop-free, connected, undirected graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
    index: HashMap<Edge, usize>,
    incident: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph, canonicalizing edge orientation. Duplicate edges,
    /// loops, out-of-range vertices and disconnected graphs are rejected.
    pub fn new(n: usize, pairs: impl IntoIterator<Item = (Vertex, Vertex)>) -> Result<Self, GraphError> {
        let mut set = BTreeSet::new();
        for (k, (a, b)) in pairs.into_iter().enumerate() {
            Self::insert_pair(&mut set, n, a, b, k + 1)?;
        }
        Self::from_set(n, set)
    }

    fn insert_pair(set: &mut BTreeSet<Edge>, n: usize, a: Vertex, b: Vertex, line: usize) -> Result<(), GraphError> {
        for v in [a, b] {
            if v == 0 || v > n {
                return Err(GraphError::VertexOutOfRange { line, vertex: v, n });
            }
        }
        let e = Edge::new(a, b).map_err(|_| GraphError::Loop { line, vertex: a })?;
        if !set.insert(e) {
            return Err(GraphError::DuplicateEdge { line, edge: e.to_string() });
        }
        Ok(())
    }

    fn from_set(n: usize, set: BTreeSet<Edge>) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let edges: Vec<Edge> = set.into_iter().collect();
        let index = edges.iter().enumerate().map(|(k, e)| (*e, k)).collect();
        let mut incident = vec![Vec::new(); n + 1];
        for (k, e) in edges.iter().enumerate() {
            incident[e.lo].push(k);
            incident[e.hi].push(k);
        }
        let graph = Graph { n, edges, index, incident };
        graph.check_connected()?;
        Ok(graph)
    }

    fn check_connected(&self) -> Result<(), GraphError> {
        let mut seen = vec![false; self.n + 1];
        let mut queue = VecDeque::from([1]);
        seen[1] = true;
        let mut reached = 1;
        while let Some(v) = queue.pop_front() {
            for &k in &self.incident[v] {
                let w = self.edges[k].other(v).expect("incident edge");
                if !seen[w] {
                    seen[w] = true;
                    reached += 1;
                    queue.push_back(w);
                }
            }
        }
        if reached == self.n {
            Ok(())
        } else {
            let missing = (1..=self.n).find(|&v| !seen[v]).unwrap_or(0);
            Err(GraphError::Disconnected { unreachable: missing })
        }
    }

    /// Parses the ASCII graph file format: a header line `n m` followed by
    /// `m` lines `i j`. Lines starting with `#` and blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self, GraphError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(k, l)| (k + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let (hline, header) = lines.next().ok_or(GraphError::Empty)?;
        let (n, m) = parse_pair(hline, header)?;
        let mut set = BTreeSet::new();
        let mut count = 0;
        for (line, l) in lines {
            let (a, b) = parse_pair(line, l)?;
            Self::insert_pair(&mut set, n, a, b, line)?;
            count += 1;
        }
        if count != m {
            return Err(GraphError::EdgeCountMismatch { declared: m, found: count });
        }
        Self::from_set(n, set)
    }

    /// Canonical file text: header then edges in lexicographic order.
    pub fn to_canonical_text(&self) -> String {
        let mut out = format!("{} {}\n", self.n, self.edges.len());
        for e in &self.edges {
            out.push_str(&format!("{} {}\n", e.lo, e.hi));
        }
        out
    }

    /// 64-bit FNV-1a hash of the canonical file bytes.
    pub fn digest(&self) -> u64 {
        fnv1a64(self.to_canonical_text().as_bytes())
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn vertices(&self) -> impl Iterator<Item = Vertex> {
        1..=self.n
    }

    pub fn has_edge(&self, e: Edge) -> bool {
        self.index.contains_key(&e)
    }

    pub fn edge_index(&self, e: Edge) -> Option<usize> {
        self.index.get(&e).copied()
    }

    pub fn adjacent(&self, a: Vertex, b: Vertex) -> bool {
        Edge::new(a, b).map(|e| self.has_edge(e)).unwrap_or(false)
    }

    /// `Edges(v)`: every edge incident to `v`, in canonical order.
    pub fn edges_of(&self, v: Vertex) -> Result<Vec<Edge>, GraphError> {
        self.check_vertex(v)?;
        Ok(self.incident[v].iter().map(|&k| self.edges[k]).collect())
    }

    /// Indices into [`Graph::edges`] of the edges incident to `v`.
    pub fn incident_indices(&self, v: Vertex) -> &[usize] {
        &self.incident[v]
    }

    pub fn degree(&self, v: Vertex) -> usize {
        self.incident.get(v).map_or(0, Vec::len)
    }

    fn check_vertex(&self, v: Vertex) -> Result<(), GraphError> {
        if v == 0 || v > self.n {
            Err(GraphError::VertexOutOfRange { line: 0, vertex: v, n: self.n })
        } else {
            Ok(())
        }
    }

    /// One proper coloring found by deterministic backtracking (smallest
    /// vertex first, smallest color first), or `None`.
    pub fn base_coloring(&self) -> Option<Coloring> {
        let mut colors = vec![None; self.n + 1];
        if self.backtrack(1, &mut colors) {
            Some(Coloring::new(colors[1..].iter().map(|c| c.expect("assigned")).collect()))
        } else {
            None
        }
    }

    fn backtrack(&self, v: Vertex, colors: &mut [Option<Trit>]) -> bool {
        if v > self.n {
            return true;
        }
        for c in Trit::ALL {
            let clash = self.incident[v].iter().any(|&k| {
                let w = self.edges[k].other(v).expect("incident edge");
                colors[w] == Some(c)
            });
            if !clash {
                colors[v] = Some(c);
                if self.backtrack(v + 1, colors) {
                    return true;
                }
                colors[v] = None;
            }
        }
        false
    }

    /// A proper coloring composed with a uniformly random permutation of the
    /// three colors, or `None` if the graph is not 3-colorable.
    pub fn find_coloring<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<Coloring> {
        let base = self.base_coloring()?;
        let mut perm = Trit::ALL;
        perm.shuffle(rng);
        Some(base.permuted(&perm))
    }

    /// All proper 3-colorings in lexicographic order, for `n <= limit`.
    pub fn proper_colorings(&self) -> Result<Vec<Coloring>, GraphError> {
        self.proper_colorings_with_limit(ENUMERATION_LIMIT)
    }

    pub fn proper_colorings_with_limit(&self, limit: usize) -> Result<Vec<Coloring>, GraphError> {
        if self.n > limit {
            return Err(GraphError::TooLarge { n: self.n, limit });
        }
        let mut out = Vec::new();
        let mut colors = vec![Trit::ZERO; self.n + 1];
        self.enumerate(1, &mut colors, &mut out);
        Ok(out)
    }

    fn enumerate(&self, v: Vertex, colors: &mut Vec<Trit>, out: &mut Vec<Coloring>) {
        if v > self.n {
            out.push(Coloring::new(colors[1..].to_vec()));
            return;
        }
        for c in Trit::ALL {
            let clash = self.incident[v].iter().any(|&k| {
                let w = self.edges[k].other(v).expect("incident edge");
                w < v && colors[w] == c
            });
            if !clash {
                colors[v] = c;
                self.enumerate(v + 1, colors, out);
            }
        }
    }

    pub fn is_proper(&self, coloring: &Coloring) -> bool {
        coloring.len() == self.n && self.edges.iter().all(|e| coloring.color(e.lo) != coloring.color(e.hi))
    }
}

fn parse_pair(line: usize, text: &str) -> Result<(usize, usize), GraphError> {
    let fields: Vec<&str> = text.split_whitespace().collect();
    let malformed = |message: String| GraphError::Malformed { line, message };
    if fields.len() != 2 {
        return Err(malformed(format!("expected two integers, found `{text}`")));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| malformed(format!("`{s}` is not a non-negative integer")));
    Ok((parse(fields[0])?, parse(fields[1])?))
}

pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes.iter().fold(OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}

/// A color per vertex; `colors[v - 1]` is the color of vertex `v`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Coloring {
    colors: Vec<Trit>,
}

impl Coloring {
    pub fn new(colors: Vec<Trit>) -> Self {
        Coloring { colors }
    }

    /// The constant coloring; never proper on a graph with an edge.
    pub fn uniform(n: usize, c: Trit) -> Self {
        Coloring { colors: vec![c; n] }
    }

    pub fn color(&self, v: Vertex) -> Trit {
        self.colors[v - 1]
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }

    pub fn as_slice(&self) -> &[Trit] {
        &self.colors
    }

    /// Applies `perm` to every color: vertex `v` gets `perm[color(v)]`.
    pub fn permuted(&self, perm: &[Trit; 3]) -> Self {
        Coloring { colors: self.colors.iter().map(|c| perm[c.index()]).collect() }
    }
}

/// Small graphs used throughout the tests, CLI examples and benches.
pub mod fixtures {
    use super::Graph;

    pub fn single_edge() -> Graph {
        Graph::new(2, [(1, 2)]).expect("valid fixture")
    }

    pub fn k3() -> Graph {
        complete(3)
    }

    pub fn k4() -> Graph {
        complete(4)
    }

    pub fn complete(n: usize) -> Graph {
        let pairs = (1..=n).flat_map(|i| ((i + 1)..=n).map(move |j| (i, j)));
        Graph::new(n, pairs).expect("valid fixture")
    }

    pub fn path(n: usize) -> Graph {
        Graph::new(n, (1..n).map(|i| (i, i + 1))).expect("valid fixture")
    }

    pub fn cycle(n: usize) -> Graph {
        Graph::new(n, (1..=n).map(|i| (i, i % n + 1))).expect("valid fixture")
    }

    pub fn c5() -> Graph {
        cycle(5)
    }

    /// Outer 5-cycle 1..5, inner pentagram 6..10, spokes `i -- i+5`.
    pub fn petersen() -> Graph {
        let outer = (1..=5).map(|i| (i, i % 5 + 1));
        let spokes = (1..=5).map(|i| (i, i + 5));
        let inner = (0..5).map(|k| (6 + k, 6 + (k + 2) % 5));
        Graph::new(10, outer.chain(spokes).chain(inner)).expect("valid fixture")
    }
}
