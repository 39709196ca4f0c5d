use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{MiningError, MiningParams, Ranked, RankedList};
use crate::corpus::CorpusStore;
use crate::embed::{dot, EmbeddingIndex, EmbeddingVector};
use crate::text::content_tokens;

/// Topic id carried by papers not assigned to any topic.
pub const OUTLIER: i64 = -1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    pub k: usize,
    /// uid → topic id in `0..k`, or [`OUTLIER`].
    pub assignment: BTreeMap<String, i64>,
    pub centroids: Vec<EmbeddingVector>,
    /// Per topic, top c-TF-IDF terms; empty until [`TopicModel::attach_terms`].
    pub terms: Vec<Vec<Ranked<String>>>,
    pub sizes: Vec<usize>,
    pub outlier_count: usize,
    pub projection: BTreeMap<String, (f64, f64)>,
    pub projection_degenerate: bool,
    pub outlier_threshold: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Set when every paper fell below the outlier threshold.
    pub all_outliers: bool,
}

impl TopicModel {
    pub fn paper_count(&self) -> usize {
        self.assignment.len()
    }

    pub fn has_topic(&self, topic: i64) -> bool {
        topic == OUTLIER || (topic >= 0 && (topic as usize) < self.k)
    }

    pub fn members(&self, topic: i64) -> Vec<&str> {
        self.assignment.iter().filter(|(_, t)| **t == topic).map(|(u, _)| u.as_str()).collect()
    }

    /// Size of a topic, or the outlier count for [`OUTLIER`].
    pub fn size(&self, topic: i64) -> Option<usize> {
        if topic == OUTLIER {
            Some(self.outlier_count)
        } else if self.has_topic(topic) {
            Some(self.sizes[topic as usize])
        } else {
            None
        }
    }

    /// Computes c-TF-IDF terms from member titles, abstracts and keywords.
    pub fn attach_terms(&mut self, store: &CorpusStore, m: usize) {
        let docs = topic_documents(self, store);
        let mut terms = vec![Vec::new(); self.k];
        if let Ok(ranked) = ctfidf_terms(&docs, m) {
            for (topic, list) in ranked {
                if topic >= 0 && (topic as usize) < self.k {
                    terms[topic as usize] = list.items().to_vec();
                }
            }
        }
        self.terms = terms;
    }
}

/// Content tokens of every non-outlier paper, concatenated per topic.
pub fn topic_documents(model: &TopicModel, store: &CorpusStore) -> BTreeMap<i64, Vec<String>> {
    let mut docs: BTreeMap<i64, Vec<String>> = (0..model.k as i64).map(|t| (t, Vec::new())).collect();
    for (uid, topic) in &model.assignment {
        if *topic == OUTLIER {
            continue;
        }
        if let Some(record) = store.get(uid) {
            let doc = docs.entry(*topic).or_default();
            doc.extend(content_tokens(&record.title));
            doc.extend(content_tokens(&record.abstract_text));
            for keyword in &record.keywords {
                doc.extend(content_tokens(keyword));
            }
        }
    }
    docs
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let sim = dot(point, c);
        if sim > best.1 {
            best = (i, sim);
        }
    }
    best
}

fn assign(points: &[&[f64]], centroids: &[Vec<f64>]) -> Vec<usize> {
    points.iter().map(|p| nearest(p, centroids).0).collect()
}

/// Recomputes centroids as normalized member sums, dropping empty clusters
/// and remapping `assignment` onto the surviving indices.
fn update_centroids(points: &[&[f64]], assignment: &mut [usize], centroids: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let dim = points[0].len();
    let mut sums = vec![vec![0.0; dim]; centroids.len()];
    let mut counts = vec![0usize; centroids.len()];
    for (p, &c) in points.iter().zip(assignment.iter()) {
        counts[c] += 1;
        for (s, x) in sums[c].iter_mut().zip(p.iter()) {
            *s += x;
        }
    }
    let mut remap = vec![usize::MAX; centroids.len()];
    let mut next = Vec::new();
    for (c, sum) in sums.into_iter().enumerate() {
        if counts[c] == 0 {
            continue;
        }
        remap[c] = next.len();
        match EmbeddingVector::normalized(sum) {
            Ok(v) => next.push(v.as_slice().to_vec()),
            // members cancel out exactly; keep the previous direction
            Err(_) => next.push(centroids[c].clone()),
        }
    }
    for a in assignment.iter_mut() {
        *a = remap[*a];
    }
    next
}

/// `max(2, round(sqrt(n / 2)))`, the topic count used when none is requested.
pub fn default_topic_count(n: usize) -> usize {
    ((n as f64 / 2.0).sqrt().round() as usize).max(2)
}

/// Spherical k-means with farthest-first seeding from the smallest uid,
/// followed by cosine-threshold outlier labelling.
pub fn fit_topics(embeddings: &[(String, EmbeddingVector)], params: &MiningParams) -> Result<TopicModel, MiningError> {
    params.validate()?;
    let mut sorted: Vec<&(String, EmbeddingVector)> = embeddings.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    let n = sorted.len();
    if n < 2 {
        return Err(MiningError::TooFewPoints { needed: 2, found: n });
    }
    let index = EmbeddingIndex::new("fit", sorted.iter().map(|(u, v)| (u.clone(), v.clone())).collect())?;
    let points: Vec<&[f64]> = sorted.iter().map(|(_, v)| v.as_slice()).collect();

    let k = params.k.unwrap_or_else(|| default_topic_count(n)).min(n);

    // farthest-first traversal
    let mut seeds = vec![0usize];
    let mut closest: Vec<f64> = points.iter().map(|p| dot(p, points[0])).collect();
    while seeds.len() < k {
        let next = (0..n)
            .filter(|i| !seeds.contains(i))
            .min_by(|&a, &b| closest[a].total_cmp(&closest[b]).then(a.cmp(&b)))
            .expect("k <= n leaves a candidate");
        seeds.push(next);
        for (i, p) in points.iter().enumerate() {
            closest[i] = closest[i].max(dot(p, points[next]));
        }
    }

    let mut centroids: Vec<Vec<f64>> = seeds.iter().map(|&s| points[s].to_vec()).collect();
    let mut assignment = assign(&points, &centroids);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < params.max_iter {
        iterations += 1;
        centroids = update_centroids(&points, &mut assignment, &centroids);
        let next = assign(&points, &centroids);
        if next == assignment {
            converged = true;
            break;
        }
        assignment = next;
    }

    let labels: Vec<Option<usize>> = points
        .iter()
        .zip(&assignment)
        .map(|(p, &c)| (dot(p, &centroids[c]) >= params.outlier_threshold).then_some(c))
        .collect();

    // drop clusters left without members and renumber the survivors
    let mut sizes_raw = vec![0usize; centroids.len()];
    for c in labels.iter().flatten() {
        sizes_raw[*c] += 1;
    }
    let mut remap = vec![None; centroids.len()];
    let mut kept = Vec::new();
    for (c, size) in sizes_raw.iter().enumerate() {
        if *size > 0 {
            remap[c] = Some(kept.len());
            kept.push(c);
        }
    }
    let final_centroids = kept
        .iter()
        .map(|&c| EmbeddingVector::normalized(centroids[c].clone()))
        .collect::<Result<Vec<_>, _>>()?;
    let sizes: Vec<usize> = kept.iter().map(|&c| sizes_raw[c]).collect();

    let assignment: BTreeMap<String, i64> = sorted
        .iter()
        .zip(&labels)
        .map(|((uid, _), label)| {
            let topic = label.and_then(|c| remap[c]).map_or(OUTLIER, |t| t as i64);
            (uid.clone(), topic)
        })
        .collect();
    let outlier_count = n - sizes.iter().sum::<usize>();

    let (projection, projection_degenerate) = if n >= 3 {
        let p = project_2d(index.entries(), params)?;
        (p.coords, p.degenerate)
    } else {
        (sorted.iter().map(|(u, _)| (u.clone(), (0.0, 0.0))).collect(), true)
    };

    Ok(TopicModel {
        k: kept.len(),
        assignment,
        centroids: final_centroids,
        terms: vec![Vec::new(); kept.len()],
        sizes,
        outlier_count,
        projection,
        projection_degenerate,
        outlier_threshold: params.outlier_threshold,
        iterations,
        converged,
        all_outliers: kept.is_empty(),
    })
}

/// Class-based TF-IDF: `tf(t, c) * ln(1 + A / f(t))`, with `f(t)` the count
/// of `t` over all classes and `A` the mean number of tokens per class.
pub fn ctfidf_terms(
    docs_by_topic: &BTreeMap<i64, Vec<String>>,
    m: usize,
) -> Result<BTreeMap<i64, RankedList<String>>, MiningError> {
    let mut class_counts: BTreeMap<i64, BTreeMap<&str, usize>> = BTreeMap::new();
    let mut totals: BTreeMap<&str, usize> = BTreeMap::new();
    let mut token_count = 0usize;
    for (topic, tokens) in docs_by_topic {
        let counts = class_counts.entry(*topic).or_default();
        for token in tokens {
            *counts.entry(token.as_str()).or_default() += 1;
            *totals.entry(token.as_str()).or_default() += 1;
            token_count += 1;
        }
    }
    if token_count == 0 {
        return Err(MiningError::EmptyVocabulary);
    }
    let mean_tokens = token_count as f64 / docs_by_topic.len() as f64;
    Ok(class_counts
        .into_iter()
        .map(|(topic, counts)| {
            let scored = counts.into_iter().map(|(term, tf)| {
                let weight = tf as f64 * (1.0 + mean_tokens / totals[term] as f64).ln();
                (term.to_string(), weight)
            });
            (topic, RankedList::top_k(scored, m))
        })
        .collect())
}

/// Topic members ranked by cosine to the topic centroid.
pub fn representatives(
    model: &TopicModel,
    embeddings: &EmbeddingIndex,
    topic: i64,
    k: usize,
) -> Result<RankedList<String>, MiningError> {
    if topic == OUTLIER {
        return Err(MiningError::OutlierTopic);
    }
    if !model.has_topic(topic) {
        return Err(MiningError::UnknownTopic(topic));
    }
    let centroid = &model.centroids[topic as usize];
    let mut scored = Vec::new();
    for uid in model.members(topic) {
        let v = embeddings.get(uid).ok_or_else(|| MiningError::NotEmbedded(uid.to_string()))?;
        scored.push((uid.to_string(), dot(v.as_slice(), centroid.as_slice())));
    }
    Ok(RankedList::top_k(scored, k))
}

/// Member counts per publication year; years without members are absent.
pub fn topic_trend(model: &TopicModel, store: &CorpusStore, topic: i64) -> Result<BTreeMap<i32, usize>, MiningError> {
    if !model.has_topic(topic) {
        return Err(MiningError::UnknownTopic(topic));
    }
    let mut trend = BTreeMap::new();
    for uid in model.members(topic) {
        if let Some(record) = store.get(uid) {
            *trend.entry(record.year).or_default() += 1;
        }
    }
    Ok(trend)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Projection {
    pub coords: BTreeMap<String, (f64, f64)>,
    /// Unit principal axes in embedding space.
    pub axes: [Vec<f64>; 2],
    pub variances: [f64; 2],
    pub total_variance: f64,
    /// All points identical; every coordinate is (0, 0).
    pub degenerate: bool,
}

struct Centered {
    rows: Vec<Vec<f64>>,
}

impl Centered {
    fn covariance_times(&self, v: &[f64]) -> Vec<f64> {
        let n = self.rows.len() as f64;
        let mut out = vec![0.0; v.len()];
        for row in &self.rows {
            let s = dot(row, v) / n;
            for (o, x) in out.iter_mut().zip(row) {
                *o += s * x;
            }
        }
        out
    }

    fn variance_along(&self, v: &[f64]) -> f64 {
        dot(&self.covariance_times(v), v)
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

fn remove_component(v: &mut [f64], axis: &[f64]) {
    let p = dot(v, axis);
    v.iter_mut().zip(axis).for_each(|(x, a)| *x -= p * a);
}

const ZERO_NORM: f64 = 1e-12;

/// Power iteration, optionally restricted to the complement of `deflate`.
fn principal_axis(data: &Centered, deflate: Option<&[f64]>, tol: f64, max_iter: usize) -> Option<Vec<f64>> {
    let dim = data.rows[0].len();
    let diag: Vec<f64> = (0..dim).map(|j| data.rows.iter().map(|r| r[j] * r[j]).sum::<f64>()).collect();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| diag[b].total_cmp(&diag[a]).then(a.cmp(&b)));

    let apply = |v: &[f64]| {
        let mut w = data.covariance_times(v);
        if let Some(axis) = deflate {
            remove_component(&mut w, axis);
        }
        w
    };

    // start from the covariance column of the highest-variance coordinate
    let mut v = order.iter().find_map(|&j| {
        let mut e = vec![0.0; dim];
        e[j] = 1.0;
        if let Some(axis) = deflate {
            remove_component(&mut e, axis);
        }
        let mut w = apply(&e);
        (normalize(&mut w) > ZERO_NORM).then_some(w)
    })?;

    for _ in 0..max_iter {
        let mut w = apply(&v);
        if normalize(&mut w) <= ZERO_NORM {
            break;
        }
        let change: f64 = w.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
        v = w;
        if change < tol {
            break;
        }
    }
    Some(v)
}

fn fix_sign(axis: &mut [f64]) {
    let mut pivot = 0;
    for (i, x) in axis.iter().enumerate() {
        if x.abs() > axis[pivot].abs() {
            pivot = i;
        }
    }
    if axis[pivot] < 0.0 {
        axis.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Any unit vector orthogonal to `axis`.
fn orthogonal_to(axis: &[f64]) -> Vec<f64> {
    let j = (0..axis.len()).min_by(|&a, &b| axis[a].abs().total_cmp(&axis[b].abs())).unwrap_or(0);
    let mut e = vec![0.0; axis.len()];
    e[j] = 1.0;
    remove_component(&mut e, axis);
    normalize(&mut e);
    e
}

/// PCA onto the two leading principal components via power iteration with
/// deflation. Each axis is signed so its largest-magnitude component is positive.
pub fn project_2d(points: &[(String, EmbeddingVector)], params: &MiningParams) -> Result<Projection, MiningError> {
    if points.len() < 3 {
        return Err(MiningError::TooFewPoints { needed: 3, found: points.len() });
    }
    let dim = points[0].1.dimension();
    if let Some((_, v)) = points.iter().find(|(_, v)| v.dimension() != dim) {
        return Err(crate::embed::EmbedError::DimensionMismatch { expected: dim, found: v.dimension() }.into());
    }
    let n = points.len() as f64;
    let mut mean = vec![0.0; dim];
    for (_, v) in points {
        mean.iter_mut().zip(v.as_slice()).for_each(|(m, x)| *m += x / n);
    }
    let data = Centered {
        rows: points.iter().map(|(_, v)| v.as_slice().iter().zip(&mean).map(|(x, m)| x - m).collect()).collect(),
    };
    let total_variance: f64 = data.rows.iter().map(|r| dot(r, r)).sum::<f64>() / n;

    let Some(mut first) = (total_variance > ZERO_NORM * ZERO_NORM)
        .then(|| principal_axis(&data, None, params.tol, params.max_iter))
        .flatten()
    else {
        return Ok(Projection {
            coords: points.iter().map(|(u, _)| (u.clone(), (0.0, 0.0))).collect(),
            axes: [vec![0.0; dim], vec![0.0; dim]],
            variances: [0.0, 0.0],
            total_variance,
            degenerate: true,
        });
    };
    fix_sign(&mut first);
    let mut second = principal_axis(&data, Some(&first), params.tol, params.max_iter)
        .unwrap_or_else(|| orthogonal_to(&first));
    // re-orthogonalize against drift
    remove_component(&mut second, &first);
    normalize(&mut second);
    fix_sign(&mut second);

    let coords = points
        .iter()
        .zip(&data.rows)
        .map(|((uid, _), row)| (uid.clone(), (dot(row, &first), dot(row, &second))))
        .collect();
    Ok(Projection {
        coords,
        variances: [data.variance_along(&first), data.variance_along(&second)],
        axes: [first, second],
        total_variance,
        degenerate: false,
    })
}
