use serde::{Deserialize, Serialize};

/// Confusion counts and recalls for one binary task.
/// `(request, complaint)` decisions or labels.
pub type TaskPair = (bool, bool);

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TaskMetrics {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub recall_pos: f64,
    pub recall_neg: f64,
    pub uar: f64,
    /// Ground truth held a single class; `uar` is then that class's recall.
    pub degenerate: bool,
}

impl TaskMetrics {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (bool, bool)>) -> Self {
        let mut m = TaskMetrics::default();
        for (pred, truth) in pairs {
            match (pred, truth) {
                (true, true) => m.tp += 1,
                (true, false) => m.fp += 1,
                (false, false) => m.tn += 1,
                (false, true) => m.fn_ += 1,
            }
        }
        m.finish();
        m
    }

    fn finish(&mut self) {
        let pos = self.tp + self.fn_;
        let neg = self.tn + self.fp;
        self.recall_pos = if pos > 0 {
            self.tp as f64 / pos as f64
        } else {
            0.0
        };
        self.recall_neg = if neg > 0 {
            self.tn as f64 / neg as f64
        } else {
            0.0
        };
        (self.uar, self.degenerate) = match (pos > 0, neg > 0) {
            (true, true) => (0.5 * (self.recall_pos + self.recall_neg), false),
            (true, false) => (self.recall_pos, true),
            (false, true) => (self.recall_neg, true),
            (false, false) => (0.0, true),
        };
    }
}

/// Both tasks plus their mean UAR.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub n: usize,
    pub request: TaskMetrics,
    pub complaint: TaskMetrics,
    pub mean_uar: f64,
}

impl Metrics {
    /// `(predicted, truth)` per sample, request first then complaint.
    pub fn from_predictions(preds: &[(TaskPair, TaskPair)]) -> Self {
        let request = TaskMetrics::from_pairs(preds.iter().map(|&(p, t)| (p.0, t.0)));
        let complaint = TaskMetrics::from_pairs(preds.iter().map(|&(p, t)| (p.1, t.1)));
        Self {
            n: preds.len(),
            request,
            complaint,
            mean_uar: 0.5 * (request.uar + complaint.uar),
        }
    }

    pub fn degenerate(&self) -> bool {
        self.request.degenerate || self.complaint.degenerate
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_and_uar() {
        // truth: 3 pos, 2 neg; predict pos on 2 pos and 1 neg
        let m = TaskMetrics::from_pairs([
            (true, true),
            (true, true),
            (false, true),
            (true, false),
            (false, false),
        ]);
        assert_eq!((m.tp, m.fp, m.tn, m.fn_), (2, 1, 1, 1));
        assert!((m.uar - 0.5 * (2.0 / 3.0 + 0.5)).abs() < 1e-15);
        assert!(!m.degenerate);
    }

    #[test]
    fn constant_predictor_scores_half() {
        let m = TaskMetrics::from_pairs((0..10).map(|i| (true, i % 3 == 0)));
        assert_eq!(m.uar, 0.5);
    }

    #[test]
    fn single_class_truth_is_flagged() {
        let m = TaskMetrics::from_pairs([(true, true), (false, true)]);
        assert!(m.degenerate);
        assert_eq!(m.uar, 0.5);
    }
}
