use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gallery::{l2_normalize, Gallery};
use super::IdentError;
use crate::types::{BibNumber, Detection};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMetric {
    #[default]
    Cosine,
    Euclidean,
}

impl std::str::FromStr for DistanceMetric {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cosine" => Ok(Self::Cosine),
            "euclidean" => Ok(Self::Euclidean),
            other => Err(format!("unknown distance {other:?}")),
        }
    }
}

impl DistanceMetric {
    /// Distance between two unit vectors.
    #[inline]
    pub fn between(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            DistanceMetric::Cosine => {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                (1.0 - dot).max(0.0)
            }
            DistanceMetric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutlierConfig {
    pub k: usize,
    pub metric: DistanceMetric,
    pub threshold: f64,
}

impl Default for OutlierConfig {
    fn default() -> Self {
        Self {
            k: 5,
            metric: DistanceMetric::Cosine,
            threshold: 0.22,
        }
    }
}

impl OutlierConfig {
    pub fn validate(&self) -> Result<(), IdentError> {
        if self.k == 0 {
            return Err(IdentError::InvalidConfig("k must be at least 1".into()));
        }
        if !(self.threshold >= 0.0) {
            return Err(IdentError::InvalidConfig(format!(
                "threshold {} must be non-negative",
                self.threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    /// Index into the gallery.
    pub entry: usize,
    pub bib: BibNumber,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnResult {
    pub avg_distance: f64,
    /// Sorted by ascending distance, then gallery order.
    pub neighbors: Vec<Neighbor>,
}

/// Mean distance from `query` to its `k` nearest gallery entries.
pub fn knn_avg_distance(
    query: &[f64],
    gallery: &Gallery,
    k: usize,
    metric: DistanceMetric,
) -> Result<KnnResult, IdentError> {
    if k == 0 {
        return Err(IdentError::InvalidConfig("k must be at least 1".into()));
    }
    if gallery.len() < k {
        return Err(IdentError::GalleryTooSmall {
            size: gallery.len(),
            k,
        });
    }
    if query.len() != gallery.dim() {
        return Err(IdentError::DimensionMismatch {
            expected: gallery.dim(),
            found: query.len(),
        });
    }
    let q = l2_normalize(query).ok_or(IdentError::DegenerateEmbedding)?;

    // sorted (distance, entry) of the best k seen so far
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
    for (i, (_, e)) in gallery.iter().enumerate() {
        let d = metric.between(&q, e);
        if best.len() == k && d >= best[k - 1].0 {
            continue;
        }
        let pos = best.partition_point(|&(bd, _)| bd <= d);
        best.insert(pos, (d, i));
        best.truncate(k);
    }

    let sum: f64 = best.iter().map(|(d, _)| d).sum();
    Ok(KnnResult {
        avg_distance: sum / k as f64,
        neighbors: best
            .into_iter()
            .map(|(distance, entry)| Neighbor {
                entry,
                bib: gallery.entries()[entry].bib.clone(),
                distance,
            })
            .collect(),
    })
}

/// Majority label among neighbors. Count ties go to the smaller mean
/// distance, then to the lexicographically smaller bib.
pub fn vote(neighbors: &[Neighbor]) -> Option<BibNumber> {
    let mut tally: BTreeMap<&BibNumber, (usize, f64)> = BTreeMap::new();
    for n in neighbors {
        let t = tally.entry(&n.bib).or_insert((0, 0.0));
        t.0 += 1;
        t.1 += n.distance;
    }
    tally
        .into_iter()
        .map(|(bib, (count, sum))| (bib, count, sum / count as f64))
        .min_by(|a, b| b.1.cmp(&a.1).then(a.2.total_cmp(&b.2)).then(a.0.cmp(b.0)))
        .map(|(bib, _, _)| bib.clone())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    /// Index of the person detection in the dataset.
    pub detection: usize,
    pub predicted_bib: Option<BibNumber>,
    pub avg_knn_distance: f64,
    pub accepted: bool,
}

/// Threshold-independent part of a classification, reusable across a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredQuery {
    pub detection: usize,
    pub avg_knn_distance: f64,
    pub voted_bib: BibNumber,
}

impl ScoredQuery {
    pub fn accepted_at(&self, threshold: f64) -> bool {
        self.avg_knn_distance <= threshold
    }

    pub fn at(&self, threshold: f64) -> Classification {
        let accepted = self.accepted_at(threshold);
        Classification {
            detection: self.detection,
            predicted_bib: accepted.then(|| self.voted_bib.clone()),
            avg_knn_distance: self.avg_knn_distance,
            accepted,
        }
    }
}

fn score(
    index: usize,
    det: &Detection,
    gallery: &Gallery,
    k: usize,
    metric: DistanceMetric,
) -> Result<ScoredQuery, IdentError> {
    let emb = det
        .embedding
        .as_deref()
        .ok_or(IdentError::MissingEmbedding(index))?;
    let knn = knn_avg_distance(emb, gallery, k, metric)?;
    Ok(ScoredQuery {
        detection: index,
        avg_knn_distance: knn.avg_distance,
        voted_bib: vote(&knn.neighbors).expect("k >= 1 neighbors"),
    })
}

/// Accepts the query as an inlier when its average k-NN distance is within
/// the threshold, labeling it by neighbor vote.
pub fn classify(
    index: usize,
    det: &Detection,
    gallery: &Gallery,
    cfg: &OutlierConfig,
) -> Result<Classification, IdentError> {
    cfg.validate()?;
    Ok(score(index, det, gallery, cfg.k, cfg.metric)?.at(cfg.threshold))
}

/// Scores every listed person detection against the gallery, in parallel.
/// Output order follows `queries`.
pub fn score_queries(
    detections: &[Detection],
    queries: &[usize],
    gallery: &Gallery,
    k: usize,
    metric: DistanceMetric,
) -> Result<Vec<ScoredQuery>, IdentError> {
    queries
        .par_iter()
        .map(|&i| score(i, &detections[i], gallery, k, metric))
        .collect()
}
