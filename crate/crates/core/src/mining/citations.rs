use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{MiningError, MiningParams, RankedList};
use crate::bkg::{Bkg, DiGraph, NodeId};
use crate::embed::{cosine, EmbeddingIndex};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PageRank {
    pub scores: BTreeMap<NodeId, f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// PageRank with uniform teleport; dangling mass is spread uniformly.
/// Iterates until the L1 change drops below `params.tol` or `max_iter`.
pub fn pagerank(graph: &DiGraph, params: &MiningParams) -> Result<PageRank, MiningError> {
    params.validate()?;
    let n = graph.node_count();
    if n == 0 {
        return Err(MiningError::EmptyGraph);
    }
    let d = params.damping;
    let nf = n as f64;
    let mut rank = vec![1.0 / nf; n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < params.max_iter {
        iterations += 1;
        let dangling: f64 = (0..n).filter(|&i| graph.successors(i).is_empty()).map(|i| rank[i]).sum();
        let base = (1.0 - d) / nf + d * dangling / nf;
        let mut next = vec![base; n];
        for (i, r) in rank.iter().enumerate() {
            let succ = graph.successors(i);
            if !succ.is_empty() {
                let share = d * r / succ.len() as f64;
                for &j in succ {
                    next[j] += share;
                }
            }
        }
        let change: f64 = next.iter().zip(&rank).map(|(a, b)| (a - b).abs()).sum();
        rank = next;
        if change < params.tol {
            converged = true;
            break;
        }
    }
    let total: f64 = rank.iter().sum();
    let scores = graph.nodes().iter().cloned().zip(rank.into_iter().map(|r| r / total)).collect();
    Ok(PageRank { scores, iterations, converged })
}

fn paper_node(bkg: &Bkg, uid: &str) -> Result<NodeId, MiningError> {
    let id = NodeId::paper(uid);
    if bkg.contains(&id) {
        Ok(id)
    } else {
        Err(MiningError::UnknownPaper(uid.to_string()))
    }
}

fn overlap(a: &[NodeId], b: &[NodeId]) -> usize {
    let a: BTreeSet<&NodeId> = a.iter().collect();
    b.iter().filter(|x| a.contains(x)).count()
}

/// Number of references shared by `a` and `b`.
pub fn biblio_coupling(bkg: &Bkg, a: &str, b: &str) -> Result<usize, MiningError> {
    paper_node(bkg, a)?;
    paper_node(bkg, b)?;
    Ok(overlap(bkg.references_of(a), bkg.references_of(b)))
}

/// Number of papers citing both `a` and `b`.
pub fn co_citation(bkg: &Bkg, a: &str, b: &str) -> Result<usize, MiningError> {
    paper_node(bkg, a)?;
    paper_node(bkg, b)?;
    Ok(overlap(bkg.citations_of(a), bkg.citations_of(b)))
}

/// Scores every other embedded paper by
/// `0.5 * cosine + 0.5 * coupling / max(1, max coupling)`.
pub fn recommend_similar(
    bkg: &Bkg,
    embeddings: &EmbeddingIndex,
    uid: &str,
    k: usize,
) -> Result<RankedList<String>, MiningError> {
    paper_node(bkg, uid)?;
    let query = embeddings.get(uid).ok_or_else(|| MiningError::NotEmbedded(uid.to_string()))?;
    let refs = bkg.references_of(uid);
    let mut candidates = Vec::new();
    for (other, vector) in embeddings.entries() {
        if other == uid {
            continue;
        }
        let coupling = overlap(refs, bkg.references_of(other));
        candidates.push((other.clone(), cosine(query, vector)?, coupling));
    }
    let max_coupling = candidates.iter().map(|c| c.2).max().unwrap_or(0).max(1) as f64;
    let scored = candidates
        .into_iter()
        .map(|(other, cos, coupling)| (other, 0.5 * cos + 0.5 * coupling as f64 / max_coupling));
    Ok(RankedList::top_k(scored, k))
}
