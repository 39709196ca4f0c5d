use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{MiningError, Ranked, RankedList};
use crate::bkg::{Bkg, Direction, EdgeKind, NodeId, NodeKind, WeightedGraph};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Communities {
    /// Node → community id; ids are numbered by smallest member.
    pub membership: BTreeMap<NodeId, usize>,
    pub count: usize,
    pub iterations: usize,
    pub converged: bool,
}

impl Communities {
    /// Members per community, each list in id order.
    pub fn groups(&self) -> Vec<Vec<&NodeId>> {
        let mut groups = vec![Vec::new(); self.count];
        for (node, c) in &self.membership {
            groups[*c].push(node);
        }
        groups
    }
}

fn common_neighbors(a: &[(usize, u64)], b: &[(usize, u64)]) -> u64 {
    let (mut i, mut j, mut shared) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                shared += 1;
                i += 1;
                j += 1;
            }
        }
    }
    shared
}

/// Asynchronous label propagation. Labels start as node indices in id order;
/// each sweep visits nodes in id order and adopts the neighbour label with the
/// largest total edge weight. Ties go to the label whose carriers share the
/// most neighbours with the node, then to the smallest label.
pub fn communities(graph: &WeightedGraph, max_iter: usize) -> Communities {
    let nodes: Vec<&NodeId> = graph.nodes().collect();
    let index: BTreeMap<&NodeId, usize> = nodes.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let adj: Vec<Vec<(usize, u64)>> =
        nodes.iter().map(|n| graph.neighbors(n).map(|(m, w)| (index[m], w)).collect()).collect();
    let support: Vec<Vec<u64>> = adj
        .iter()
        .map(|edges| edges.iter().map(|&(m, _)| common_neighbors(edges, &adj[m])).collect())
        .collect();

    let mut labels: Vec<usize> = (0..nodes.len()).collect();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let mut changed = false;
        for u in 0..nodes.len() {
            if adj[u].is_empty() {
                continue;
            }
            let mut votes: BTreeMap<usize, (u64, u64)> = BTreeMap::new();
            for (&(v, w), s) in adj[u].iter().zip(&support[u]) {
                let entry = votes.entry(labels[v]).or_default();
                entry.0 += w;
                entry.1 += s;
            }
            // BTreeMap iterates labels ascending; strict comparison keeps the smallest on ties
            let mut best = None;
            for (label, score) in votes {
                if best.is_none_or(|(_, top)| score > top) {
                    best = Some((label, score));
                }
            }
            let (label, _) = best.expect("non-isolated node has votes");
            if label != labels[u] {
                labels[u] = label;
                changed = true;
            }
        }
        if !changed {
            converged = true;
            break;
        }
    }

    let mut renumber = BTreeMap::new();
    let mut membership = BTreeMap::new();
    for (i, node) in nodes.iter().enumerate() {
        let next = renumber.len();
        let c = *renumber.entry(labels[i]).or_insert(next);
        membership.insert((*node).clone(), c);
    }
    Communities { count: renumber.len(), membership, iterations, converged }
}

/// Authors scored by paper count plus weighted coauthor degree; ties by
/// canonical name.
pub fn active_researchers(bkg: &Bkg, k: usize) -> RankedList<String> {
    let coauthors = bkg.coauthor_projection();
    let scored = bkg.nodes_of(NodeKind::Author).map(|author| {
        let papers = bkg.neighbors(&author.id, EdgeKind::Authored, Direction::Out).map_or(0, |p| p.len());
        let score = papers as f64 + coauthors.weighted_degree(&author.id) as f64;
        (author.id.key().to_string(), score)
    });
    RankedList::top_k(scored, k)
}

/// Keywords touching communities other than their own, scored by the number
/// of distinct communities among their neighbours. Keywords whose neighbours
/// all share their community score 0. Ties: weighted degree descending, then
/// keyword ascending.
pub fn bridging_keywords(graph: &WeightedGraph, k: usize, max_iter: usize) -> RankedList<String> {
    let parts = communities(graph, max_iter);
    let mut scored: Vec<(String, usize, u64)> = graph
        .nodes()
        .map(|w| {
            let own = parts.membership[w];
            let touched: BTreeSet<usize> = graph.neighbors(w).map(|(n, _)| parts.membership[n]).collect();
            let score = if touched.iter().any(|c| *c != own) { touched.len() } else { 0 };
            (w.key().to_string(), score, graph.weighted_degree(w))
        })
        .collect();
    scored.sort_by(|a, b| b.1.cmp(&a.1).then(b.2.cmp(&a.2)).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(k);
    RankedList::from_sorted(scored.into_iter().map(|(item, score, _)| Ranked { item, score: score as f64 }).collect())
}

/// Paper counts backing co-occurrence probabilities.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct KeywordTotals {
    pub papers: usize,
    pub occurrences: BTreeMap<NodeId, usize>,
}

pub fn keyword_totals(bkg: &Bkg) -> KeywordTotals {
    KeywordTotals {
        papers: bkg.nodes_of(NodeKind::Paper).count(),
        occurrences: bkg
            .nodes_of(NodeKind::Keyword)
            .map(|k| {
                let n = bkg.neighbors(&k.id, EdgeKind::HasKeyword, Direction::In).map_or(0, |p| p.len());
                (k.id.clone(), n)
            })
            .collect(),
    }
}

/// `ln(p(a, b) / (p(a) p(b)))` over paper counts; negative infinity when the
/// keywords never co-occur.
pub fn pmi(graph: &WeightedGraph, totals: &KeywordTotals, a: &NodeId, b: &NodeId) -> Result<f64, MiningError> {
    let count = |k: &NodeId| match totals.occurrences.get(k) {
        Some(&n) if n > 0 => Ok(n as f64),
        _ => Err(MiningError::UnknownKeyword(k.key().to_string())),
    };
    let (na, nb) = (count(a)?, count(b)?);
    let joint = if a == b { na } else { graph.weight(a, b).unwrap_or(0) as f64 };
    if joint == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let n = totals.papers as f64;
    Ok((joint * n / (na * nb)).ln())
}

/// Adamic–Adar over non-adjacent pairs with at least one common neighbour.
pub fn predict_links(graph: &WeightedGraph, k: usize) -> Result<RankedList<(NodeId, NodeId)>, MiningError> {
    if graph.edge_count() == 0 {
        return Err(MiningError::EdgelessGraph);
    }
    let mut scores: BTreeMap<(&NodeId, &NodeId), f64> = BTreeMap::new();
    for z in graph.nodes() {
        let degree = graph.degree(z);
        if degree < 2 {
            continue;
        }
        let contribution = 1.0 / (degree as f64).ln();
        let around: Vec<&NodeId> = graph.neighbors(z).map(|(n, _)| n).collect();
        for (i, a) in around.iter().enumerate() {
            for b in &around[i + 1..] {
                if graph.weight(a, b).is_none() {
                    *scores.entry((*a, *b)).or_default() += contribution;
                }
            }
        }
    }
    Ok(RankedList::top_k(scores.into_iter().map(|((a, b), s)| ((a.clone(), b.clone()), s)), k))
}
