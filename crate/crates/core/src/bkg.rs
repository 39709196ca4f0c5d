//! The bibliographic knowledge graph and its weighted projections.
//!
//! Node ids are canonical strings of the form `kind:key` (for example
//! `paper:W12`, `author:lovelace, a.`, `keyword:llm`), so graphs built from
//! the same record set are identical regardless of ingest order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CorpusStore;
use crate::embed::{EmbeddingIndex, EmbeddingVector};
use crate::text::squash;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Paper,
    Author,
    Venue,
    Keyword,
    Institution,
}

impl NodeKind {
    pub fn prefix(self) -> &'static str {
        match self {
            NodeKind::Paper => "paper",
            NodeKind::Author => "author",
            NodeKind::Venue => "venue",
            NodeKind::Keyword => "keyword",
            NodeKind::Institution => "institution",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    /// Paper → Paper
    Cites,
    /// Author → Paper
    Authored,
    /// Paper → Venue
    PublishedIn,
    /// Paper → Keyword
    HasKeyword,
    /// Author → Institution
    AffiliatedWith,
}

impl EdgeKind {
    pub const ALL: [EdgeKind; 5] =
        [EdgeKind::Cites, EdgeKind::Authored, EdgeKind::PublishedIn, EdgeKind::HasKeyword, EdgeKind::AffiliatedWith];

    pub fn endpoints(self) -> (NodeKind, NodeKind) {
        match self {
            EdgeKind::Cites => (NodeKind::Paper, NodeKind::Paper),
            EdgeKind::Authored => (NodeKind::Author, NodeKind::Paper),
            EdgeKind::PublishedIn => (NodeKind::Paper, NodeKind::Venue),
            EdgeKind::HasKeyword => (NodeKind::Paper, NodeKind::Keyword),
            EdgeKind::AffiliatedWith => (NodeKind::Author, NodeKind::Institution),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(kind: NodeKind, key: &str) -> NodeId {
        NodeId(format!("{}:{}", kind.prefix(), key))
    }

    pub fn paper(uid: &str) -> NodeId {
        NodeId::new(NodeKind::Paper, uid)
    }

    pub fn author(canonical: &str) -> NodeId {
        NodeId::new(NodeKind::Author, canonical)
    }

    pub fn keyword(keyword: &str) -> NodeId {
        NodeId::new(NodeKind::Keyword, keyword)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The part after the `kind:` prefix, or the whole id for bare ids.
    pub fn key(&self) -> &str {
        self.0.split_once(':').map_or(&self.0, |(_, key)| key)
    }
}

impl From<&str> for NodeId {
    fn from(raw: &str) -> NodeId {
        NodeId(raw.to_string())
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PaperAttrs {
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub year: i32,
    pub embedding: Option<EmbeddingVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    pub label: String,
    pub paper: Option<PaperAttrs>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Out,
    In,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BkgError {
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BuildStats {
    pub nodes_by_kind: BTreeMap<NodeKind, usize>,
    pub edges_by_kind: BTreeMap<EdgeKind, usize>,
    /// References to uids outside the corpus.
    pub dropped_refs: usize,
}

/// Heterogeneous typed graph. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Bkg {
    nodes: BTreeMap<NodeId, Node>,
    edges: BTreeSet<Edge>,
    out_adj: BTreeMap<(NodeId, EdgeKind), Vec<NodeId>>,
    in_adj: BTreeMap<(NodeId, EdgeKind), Vec<NodeId>>,
    stats: BuildStats,
}

fn add_node(nodes: &mut BTreeMap<NodeId, Node>, kind: NodeKind, key: &str, label: &str) -> NodeId {
    let id = NodeId::new(kind, key);
    nodes.entry(id.clone()).or_insert_with(|| Node { id: id.clone(), kind, label: label.to_string(), paper: None });
    id
}

/// Builds the graph. Venue and institution keys are lowercased and
/// whitespace-collapsed; authors are keyed by canonical name.
pub fn build_bkg(store: &CorpusStore) -> Bkg {
    let mut nodes = BTreeMap::new();
    let mut edges = BTreeSet::new();
    let mut dropped_refs = 0;

    for record in store.records() {
        let paper = NodeId::paper(&record.uid);
        nodes.insert(
            paper.clone(),
            Node {
                id: paper.clone(),
                kind: NodeKind::Paper,
                label: record.title.clone(),
                paper: Some(PaperAttrs {
                    title: record.title.clone(),
                    abstract_text: record.abstract_text.clone(),
                    year: record.year,
                    embedding: None,
                }),
            },
        );
    }

    for record in store.records() {
        let paper = NodeId::paper(&record.uid);
        for author in &record.authors {
            let a = add_node(&mut nodes, NodeKind::Author, &author.canonical_name, author.raw_name.trim());
            edges.insert(Edge { src: a.clone(), dst: paper.clone(), kind: EdgeKind::Authored });
            if let Some(inst) = &author.institution {
                let i = add_node(&mut nodes, NodeKind::Institution, &squash(inst), inst);
                edges.insert(Edge { src: a, dst: i, kind: EdgeKind::AffiliatedWith });
            }
        }
        let venue = squash(&record.venue);
        if !venue.is_empty() {
            let v = add_node(&mut nodes, NodeKind::Venue, &venue, record.venue.trim());
            edges.insert(Edge { src: paper.clone(), dst: v, kind: EdgeKind::PublishedIn });
        }
        for keyword in &record.keywords {
            let k = add_node(&mut nodes, NodeKind::Keyword, keyword, keyword);
            edges.insert(Edge { src: paper.clone(), dst: k, kind: EdgeKind::HasKeyword });
        }
        for cited in &record.references {
            if store.contains(cited) {
                edges.insert(Edge { src: paper.clone(), dst: NodeId::paper(cited), kind: EdgeKind::Cites });
            } else {
                dropped_refs += 1;
            }
        }
    }

    let mut out_adj: BTreeMap<(NodeId, EdgeKind), Vec<NodeId>> = BTreeMap::new();
    let mut in_adj: BTreeMap<(NodeId, EdgeKind), Vec<NodeId>> = BTreeMap::new();
    let mut stats = BuildStats { dropped_refs, ..BuildStats::default() };
    // edges iterate in (src, dst, kind) order so adjacency lists come out sorted
    for edge in &edges {
        out_adj.entry((edge.src.clone(), edge.kind)).or_default().push(edge.dst.clone());
        *stats.edges_by_kind.entry(edge.kind).or_default() += 1;
    }
    for edge in &edges {
        in_adj.entry((edge.dst.clone(), edge.kind)).or_default().push(edge.src.clone());
    }
    for list in in_adj.values_mut() {
        list.sort();
    }
    for node in nodes.values() {
        *stats.nodes_by_kind.entry(node.kind).or_default() += 1;
    }

    Bkg { nodes, edges, out_adj, in_adj, stats }
}

impl Bkg {
    /// Attaches paper embeddings as node attributes.
    pub fn with_embeddings(mut self, index: &EmbeddingIndex) -> Bkg {
        for (uid, vector) in index.entries() {
            if let Some(Node { paper: Some(attrs), .. }) = self.nodes.get_mut(&NodeId::paper(uid)) {
                attrs.embedding = Some(vector.clone());
            }
        }
        self
    }

    pub fn node(&self, id: &NodeId) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.nodes.contains_key(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn nodes_of(&self, kind: NodeKind) -> impl Iterator<Item = &Node> {
        self.nodes.values().filter(move |n| n.kind == kind)
    }

    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn stats(&self) -> &BuildStats {
        &self.stats
    }

    fn adjacent(&self, node: &NodeId, kind: EdgeKind, direction: Direction) -> &[NodeId] {
        let adj = match direction {
            Direction::Out => &self.out_adj,
            Direction::In => &self.in_adj,
        };
        adj.get(&(node.clone(), kind)).map_or(&[], Vec::as_slice)
    }

    /// Neighbours along edges of `kind`, in ascending id order.
    pub fn neighbors(&self, node: &NodeId, kind: EdgeKind, direction: Direction) -> Result<Vec<NodeId>, BkgError> {
        if !self.contains(node) {
            return Err(BkgError::UnknownNode(node.clone()));
        }
        Ok(self.adjacent(node, kind, direction).to_vec())
    }

    /// Papers cited by `uid` (empty for unknown uids).
    pub fn references_of(&self, uid: &str) -> &[NodeId] {
        self.adjacent(&NodeId::paper(uid), EdgeKind::Cites, Direction::Out)
    }

    pub fn citations_of(&self, uid: &str) -> &[NodeId] {
        self.adjacent(&NodeId::paper(uid), EdgeKind::Cites, Direction::In)
    }

    pub fn dump(&self) -> GraphDump {
        GraphDump {
            nodes: self
                .nodes
                .values()
                .map(|n| DumpNode { id: n.id.clone(), kind: n.kind, label: n.label.clone() })
                .collect(),
            edges: self.edges.iter().cloned().collect(),
        }
    }

    /// Author → coauthor graph; weight = number of shared papers.
    pub fn coauthor_projection(&self) -> WeightedGraph {
        self.paper_projection(EdgeKind::Authored, Direction::In, NodeKind::Author)
    }

    /// Keyword co-occurrence; weight = number of papers listing both.
    pub fn keyword_cooccurrence(&self) -> WeightedGraph {
        self.paper_projection(EdgeKind::HasKeyword, Direction::Out, NodeKind::Keyword)
    }

    fn paper_projection(&self, kind: EdgeKind, direction: Direction, node_kind: NodeKind) -> WeightedGraph {
        let mut graph = WeightedGraph::new();
        for node in self.nodes_of(node_kind) {
            graph.add_node(node.id.clone());
        }
        for paper in self.nodes_of(NodeKind::Paper) {
            let members = self.adjacent(&paper.id, kind, direction);
            for (i, a) in members.iter().enumerate() {
                for b in &members[i + 1..] {
                    graph.add_weight(a, b, 1);
                }
            }
        }
        graph
    }

    /// Directed citation graph over all papers.
    pub fn citation_graph(&self) -> DiGraph {
        let papers: Vec<NodeId> = self.nodes_of(NodeKind::Paper).map(|n| n.id.clone()).collect();
        let edges = self
            .edges
            .iter()
            .filter(|e| e.kind == EdgeKind::Cites)
            .map(|e| (e.src.clone(), e.dst.clone()));
        DiGraph::from_edges(papers, edges)
    }
}

pub fn coauthor_projection(bkg: &Bkg) -> WeightedGraph {
    bkg.coauthor_projection()
}

pub fn keyword_cooccurrence(bkg: &Bkg) -> WeightedGraph {
    bkg.keyword_cooccurrence()
}

pub fn neighbors(bkg: &Bkg, node: &NodeId, kind: EdgeKind, direction: Direction) -> Result<Vec<NodeId>, BkgError> {
    bkg.neighbors(node, kind, direction)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DumpNode {
    pub id: NodeId,
    pub kind: NodeKind,
    pub label: String,
}

/// JSON graph dump: `{nodes: [{id, kind, label}], edges: [{src, dst, kind}]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphDump {
    pub nodes: Vec<DumpNode>,
    pub edges: Vec<Edge>,
}

/// Undirected simple graph with positive integer edge weights.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct WeightedGraph {
    adj: BTreeMap<NodeId, BTreeMap<NodeId, u64>>,
}

impl WeightedGraph {
    pub fn new() -> WeightedGraph {
        WeightedGraph::default()
    }

    /// Builds from `(a, b, weight)` triples; repeated pairs accumulate.
    pub fn from_edges<I, N>(edges: I) -> WeightedGraph
    where
        I: IntoIterator<Item = (N, N, u64)>,
        N: Into<NodeId>,
    {
        let mut graph = WeightedGraph::new();
        for (a, b, w) in edges {
            let (a, b) = (a.into(), b.into());
            graph.add_node(a.clone());
            graph.add_node(b.clone());
            graph.add_weight(&a, &b, w);
        }
        graph
    }

    pub fn add_node(&mut self, node: NodeId) {
        self.adj.entry(node).or_default();
    }

    /// Adds `w` to the weight of `{a, b}`. Self-loops and zero weights are ignored.
    pub fn add_weight(&mut self, a: &NodeId, b: &NodeId, w: u64) {
        if a == b || w == 0 {
            return;
        }
        *self.adj.entry(a.clone()).or_default().entry(b.clone()).or_default() += w;
        *self.adj.entry(b.clone()).or_default().entry(a.clone()).or_default() += w;
    }

    pub fn nodes(&self) -> impl Iterator<Item = &NodeId> {
        self.adj.keys()
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn contains(&self, node: &NodeId) -> bool {
        self.adj.contains_key(node)
    }

    pub fn neighbors(&self, node: &NodeId) -> impl Iterator<Item = (&NodeId, u64)> {
        self.adj.get(node).into_iter().flat_map(|m| m.iter().map(|(n, w)| (n, *w)))
    }

    pub fn weight(&self, a: &NodeId, b: &NodeId) -> Option<u64> {
        self.adj.get(a).and_then(|m| m.get(b)).copied()
    }

    pub fn degree(&self, node: &NodeId) -> usize {
        self.adj.get(node).map_or(0, BTreeMap::len)
    }

    pub fn weighted_degree(&self, node: &NodeId) -> u64 {
        self.neighbors(node).map(|(_, w)| w).sum()
    }

    /// Each undirected edge once, with `a < b`.
    pub fn edges(&self) -> impl Iterator<Item = (&NodeId, &NodeId, u64)> {
        self.adj.iter().flat_map(|(a, m)| m.iter().filter(move |(b, _)| a < *b).map(move |(b, w)| (a, b, *w)))
    }

    pub fn edge_count(&self) -> usize {
        self.edges().count()
    }
}

/// Index-based directed graph; node order is the order given at construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiGraph {
    nodes: Vec<NodeId>,
    out: Vec<Vec<usize>>,
}

impl DiGraph {
    /// Edges with unknown endpoints are ignored; parallel edges collapse.
    pub fn from_edges<I, N>(nodes: Vec<NodeId>, edges: I) -> DiGraph
    where
        I: IntoIterator<Item = (N, N)>,
        N: Into<NodeId>,
    {
        let index: BTreeMap<&NodeId, usize> = nodes.iter().enumerate().map(|(i, n)| (n, i)).collect();
        let mut out: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); nodes.len()];
        for (src, dst) in edges {
            let (src, dst) = (src.into(), dst.into());
            if let (Some(&s), Some(&d)) = (index.get(&src), index.get(&dst)) {
                out[s].insert(d);
            }
        }
        DiGraph { out: out.into_iter().map(|s| s.into_iter().collect()).collect(), nodes }
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn successors(&self, node: usize) -> &[usize] {
        &self.out[node]
    }

    pub fn edge_count(&self) -> usize {
        self.out.iter().map(Vec::len).sum()
    }
}
