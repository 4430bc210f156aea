//! How many units augmentation produced per document.

use serde::{Deserialize, Serialize};

use crate::augment::{GenerationRecord, Task};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitCountStats {
    pub qa_documents: usize,
    pub event_documents: usize,
    /// `None` when no QA generation succeeded.
    pub mean_qa_per_doc: Option<f64>,
    pub mean_events_per_doc: Option<f64>,
    pub failed: usize,
}

/// Means over successful records only; failures are counted separately.
pub fn unit_count_stats(records: &[GenerationRecord]) -> UnitCountStats {
    let mean = |task: Task| {
        let ok: Vec<usize> = records
            .iter()
            .filter(|r| r.task == task && r.is_ok())
            .map(|r| r.units.len())
            .collect();
        let m = (!ok.is_empty()).then(|| ok.iter().sum::<usize>() as f64 / ok.len() as f64);
        (ok.len(), m)
    };
    let (qa_documents, mean_qa_per_doc) = mean(Task::Qag);
    let (event_documents, mean_events_per_doc) = mean(Task::Ee);
    UnitCountStats {
        qa_documents,
        event_documents,
        mean_qa_per_doc,
        mean_events_per_doc,
        failed: records.iter().filter(|r| !r.is_ok()).count(),
    }
}
