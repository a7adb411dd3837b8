//! Per-face labelings shared by the mesh and segmentation layers.

use serde::{Deserialize, Serialize};

/// Per-face integer labels in `[0, num_labels)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labeling {
    pub labels: Vec<u32>,
    pub num_labels: u32,
}

impl Labeling {
    pub fn new(labels: Vec<u32>) -> Labeling {
        let num_labels = labels.iter().copied().max().map_or(0, |m| m + 1);
        Labeling { labels, num_labels }
    }

    pub fn uniform(n_faces: usize) -> Labeling {
        Labeling {
            labels: vec![0; n_faces],
            num_labels: 1,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Face indices carrying `label`.
    pub fn faces_with(&self, label: u32) -> Vec<u32> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == label)
            .map(|(i, _)| i as u32)
            .collect()
    }

    /// Number of faces per label.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.num_labels as usize];
        for &l in &self.labels {
            sizes[l as usize] += 1;
        }
        sizes
    }
}
