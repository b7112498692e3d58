//! Confusion-matrix evaluation: per-class accuracy (recall) and
//! intersection-over-union.

use crate::error::{Error, Result};
use crate::label::LabelMap;

/// Square matrix of pixel counts, `counts[gt][pred]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    num_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(num_classes: usize) -> ConfusionMatrix {
        ConfusionMatrix { num_classes, counts: vec![0; num_classes * num_classes] }
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn count(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.num_classes + pred]
    }

    /// Total evaluated (non-ignored) pixels.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Adds one count per non-ignored pixel of the pair. A pixel is skipped
    /// when its ground-truth label equals `ignore_id`.
    pub fn accumulate(
        &mut self,
        pred: &LabelMap,
        gt: &LabelMap,
        ignore_id: Option<u8>,
    ) -> Result<()> {
        if (pred.height(), pred.width()) != (gt.height(), gt.width()) {
            return Err(Error::shape(
                "ConfusionMatrix::accumulate",
                format!("{}x{}", gt.height(), gt.width()),
                format!("{}x{}", pred.height(), pred.width()),
            ));
        }
        let nc = self.num_classes;
        for y in 0..gt.height() {
            for x in 0..gt.width() {
                let g = gt.at(y, x);
                if Some(g) == ignore_id {
                    continue;
                }
                let p = pred.at(y, x);
                if g as usize >= nc {
                    return Err(Error::LabelOutOfRange { label: g, num_classes: nc, y, x });
                }
                if p as usize >= nc {
                    return Err(Error::LabelOutOfRange { label: p, num_classes: nc, y, x });
                }
                self.counts[g as usize * nc + p as usize] += 1;
            }
        }
        Ok(())
    }

    /// Sums another matrix into this one. Counts are integers, so merging is
    /// exact and order-independent — per-image matrices can be built in
    /// parallel and combined in any order.
    pub fn merge(&mut self, other: &ConfusionMatrix) {
        assert_eq!(self.num_classes, other.num_classes, "class counts must match");
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    fn row_sum(&self, gt: usize) -> u64 {
        (0..self.num_classes).map(|p| self.count(gt, p)).sum()
    }

    fn col_sum(&self, pred: usize) -> u64 {
        (0..self.num_classes).map(|g| self.count(g, pred)).sum()
    }

    /// Per-class recall `counts[c][c] / sum_p counts[c][p]` and its average.
    /// Classes with no ground-truth pixels are undefined (`None`) and do not
    /// enter the average.
    pub fn class_accuracy(&self) -> (Vec<Option<f64>>, Option<f64>) {
        let per: Vec<Option<f64>> = (0..self.num_classes)
            .map(|c| {
                let denom = self.row_sum(c);
                (denom > 0).then(|| self.count(c, c) as f64 / denom as f64)
            })
            .collect();
        (per.clone(), average(&per))
    }

    /// Per-class `IoU_c = tp / (tp + fn + fp)` and the mean over defined
    /// classes. A class absent from both prediction and ground truth is
    /// undefined rather than zero.
    pub fn iou(&self) -> (Vec<Option<f64>>, Option<f64>) {
        let per: Vec<Option<f64>> = (0..self.num_classes)
            .map(|c| {
                let tp = self.count(c, c);
                let denom = self.row_sum(c) + self.col_sum(c) - tp;
                (denom > 0).then(|| tp as f64 / denom as f64)
            })
            .collect();
        (per.clone(), average(&per))
    }
}

fn average(values: &[Option<f64>]) -> Option<f64> {
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    }
}
