//! Response bodies of the data endpoints. Every number is copied from the
//! fitted artifacts; nothing is recomputed for presentation.

use litnav_core::agent::outputs::{PaperScore, TermScore, YearCount};
use litnav_core::agent::Artifacts;
use litnav_core::mining::{representatives, topic_trend, MiningError, OUTLIER};
use serde::{Deserialize, Serialize};

pub const REPRESENTATIVES_K: usize = 5;
pub const LANDSCAPE_TERMS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapePoint {
    pub uid: String,
    pub x: f64,
    pub y: f64,
    /// `-1` for outliers.
    pub topic: i64,
    pub title: String,
    pub year: i32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeTopic {
    pub id: i64,
    pub size: usize,
    pub terms: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Landscape {
    pub points: Vec<LandscapePoint>,
    pub topics: Vec<LandscapeTopic>,
}

pub fn landscape(a: &Artifacts) -> Landscape {
    let model = &a.model;
    let points = model
        .assignment
        .iter()
        .map(|(uid, topic)| {
            let (x, y) = model.projection.get(uid).copied().unwrap_or((0.0, 0.0));
            let (title, year) = a.store.get(uid).map_or((String::new(), 0), |r| (r.title.clone(), r.year));
            LandscapePoint { uid: uid.clone(), x, y, topic: *topic, title, year }
        })
        .collect();
    let topics = (0..model.k)
        .map(|t| LandscapeTopic {
            id: t as i64,
            size: model.sizes[t],
            terms: model.terms[t].iter().take(LANDSCAPE_TERMS).map(|r| r.item.clone()).collect(),
        })
        .collect();
    Landscape { points, topics }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopicBundle {
    pub topic_id: i64,
    pub size: usize,
    /// Absent for the outlier class, which has no centroid or terms.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terms: Option<Vec<TermScore>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub representatives: Option<Vec<PaperScore>>,
    pub trend: Vec<YearCount>,
}

pub fn topic_bundle(a: &Artifacts, topic: i64) -> Result<TopicBundle, MiningError> {
    let size = a.model.size(topic).ok_or(MiningError::UnknownTopic(topic))?;
    let trend = topic_trend(&a.model, &a.store, topic)?
        .into_iter()
        .map(|(year, count)| YearCount { year, count })
        .collect();
    if topic == OUTLIER {
        return Ok(TopicBundle { topic_id: topic, size, terms: None, representatives: None, trend });
    }
    let terms = a.model.terms[topic as usize].iter().map(|r| TermScore { term: r.item.clone(), score: r.score }).collect();
    let reps = representatives(&a.model, &a.index, topic, REPRESENTATIVES_K)?
        .iter()
        .map(|r| {
            let (title, year) = a.store.get(&r.item).map_or((String::new(), 0), |p| (p.title.clone(), p.year));
            PaperScore { uid: r.item.clone(), title, year, score: r.score }
        })
        .collect();
    Ok(TopicBundle { topic_id: topic, size, terms: Some(terms), representatives: Some(reps), trend })
}
