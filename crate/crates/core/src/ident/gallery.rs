use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::IdentError;
use crate::types::BibNumber;

/// Where a gallery embedding came from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CropRef {
    pub video_id: String,
    pub frame: u32,
    /// Index of the person detection in the dataset, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detection: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GalleryEntry {
    pub bib: BibNumber,
    pub source: CropRef,
}

/// Labeled embeddings, stored unit-length in one contiguous buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gallery {
    dim: usize,
    round: u8,
    entries: Vec<GalleryEntry>,
    data: Vec<f64>,
}

/// Unit-length copy of `v`, or `None` for a zero or non-finite vector.
pub fn l2_normalize(v: &[f64]) -> Option<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 && norm.is_finite() {
        Some(v.iter().map(|x| x / norm).collect())
    } else {
        None
    }
}

impl Gallery {
    pub fn new(dim: usize, round: u8) -> Self {
        Self {
            dim,
            round,
            entries: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn round(&self) -> u8 {
        self.round
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[GalleryEntry] {
        &self.entries
    }

    pub fn embedding(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&GalleryEntry, &[f64])> {
        self.entries.iter().zip(self.data.chunks_exact(self.dim.max(1)))
    }

    /// Adds an entry; the embedding is normalized on the way in.
    pub fn push(
        &mut self,
        bib: BibNumber,
        embedding: &[f64],
        source: CropRef,
    ) -> Result<(), IdentError> {
        if embedding.len() != self.dim {
            return Err(IdentError::DimensionMismatch {
                expected: self.dim,
                found: embedding.len(),
            });
        }
        let unit = l2_normalize(embedding).ok_or(IdentError::DegenerateEmbedding)?;
        self.entries.push(GalleryEntry { bib, source });
        self.data.extend_from_slice(&unit);
        Ok(())
    }

    pub(crate) fn with_round(mut self, round: u8) -> Self {
        self.round = round;
        self
    }

    pub fn labels(&self) -> BTreeSet<BibNumber> {
        self.entries.iter().map(|e| e.bib.clone()).collect()
    }

    pub fn contains_detection(&self, detection: usize) -> bool {
        self.entries
            .iter()
            .any(|e| e.source.detection == Some(detection))
    }
}
