//! Seeded three-modality benchmark with planted, partly cross-modal label
//! signal, and a linear-classifier oracle that certifies what single
//! modalities can achieve.

mod config;
mod generate;
mod oracle;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use config::{Amplitudes, CountRange, CountRanges, ModalityAmplitudes, SynthConfig};
pub use generate::{generate_dataset, sample_seed, SignalDirections, SynthDataset};
pub use oracle::{oracle_uar, oracle_unimodal_uar};

use crate::error::{Error, Result};
use crate::tokenstore::{manifest_line, write_embedding_file, Modality, Split, Task};

/// Required complaint-task margin of the pooled all-modality oracle over
/// every unimodal oracle, and of a trained fuser over the unimodal ceiling.
pub const FUSION_MARGIN: f64 = 0.05;

pub const DEFAULT_ORACLE_SAMPLES: usize = 2000;

/// Oracle UARs of one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskOracle {
    pub unimodal: BTreeMap<Modality, f64>,
    pub all_modalities: f64,
}

impl TaskOracle {
    pub fn best_unimodal(&self) -> f64 {
        self.unimodal
            .values()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Contents of `dataset_meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub config: SynthConfig,
    pub oracle_samples: usize,
    pub request: TaskOracle,
    pub complaint: TaskOracle,
    /// `complaint.all_modalities - complaint.best_unimodal()`.
    pub complaint_fusion_gap: f64,
    pub fusion_necessity_holds: bool,
    /// Best unimodal complaint oracle plus [`FUSION_MARGIN`]: the dev complaint
    /// UAR a fuser must reach to count as beating every single modality.
    pub complaint_fusion_threshold: f64,
}

impl DatasetMeta {
    pub fn task(&self, task: Task) -> &TaskOracle {
        match task {
            Task::Request => &self.request,
            Task::Complaint => &self.complaint,
        }
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn task_oracle(cfg: &SynthConfig, task: Task, n_mc: usize) -> Result<TaskOracle> {
    let mut unimodal = BTreeMap::new();
    for m in Modality::FUSED {
        unimodal.insert(m, oracle_unimodal_uar(cfg, m, task, n_mc)?);
    }
    Ok(TaskOracle {
        unimodal,
        all_modalities: oracle_uar(cfg, &Modality::FUSED, task, n_mc)?,
    })
}

pub fn compute_meta(cfg: &SynthConfig, n_mc: usize) -> Result<DatasetMeta> {
    let request = task_oracle(cfg, Task::Request, n_mc)?;
    let complaint = task_oracle(cfg, Task::Complaint, n_mc)?;
    let best = complaint.best_unimodal();
    let gap = complaint.all_modalities - best;
    Ok(DatasetMeta {
        config: cfg.clone(),
        oracle_samples: n_mc,
        request,
        complaint,
        complaint_fusion_gap: gap,
        fusion_necessity_holds: gap >= FUSION_MARGIN,
        complaint_fusion_threshold: best + FUSION_MARGIN,
    })
}

/// Write `embeddings/<id>.bin`, `manifest.jsonl` and `dataset_meta.json` under `out`.
pub fn write_dataset(cfg: &SynthConfig, out: impl AsRef<Path>, n_mc: usize) -> Result<DatasetMeta> {
    let out = out.as_ref();
    let data = generate_dataset(cfg)?;
    let emb_dir = out.join("embeddings");
    fs::create_dir_all(&emb_dir).map_err(|e| Error::io(&emb_dir, e))?;
    let mut manifest = Vec::new();
    for (split, samples) in [(Split::Train, &data.train), (Split::Dev, &data.dev)] {
        for s in samples {
            let rel = format!("embeddings/{}.bin", s.id);
            write_embedding_file(out.join(&rel), &s.token_sets)?;
            writeln!(manifest, "{}", manifest_line(&s.id, &rel, s.labels, split)?)
                .expect("write to Vec");
        }
    }
    let manifest_path = out.join("manifest.jsonl");
    fs::write(&manifest_path, manifest).map_err(|e| Error::io(&manifest_path, e))?;
    let meta = compute_meta(cfg, n_mc)?;
    let meta_path = out.join("dataset_meta.json");
    let mut text = serde_json::to_string_pretty(&meta)?;
    text.push('\n');
    fs::write(&meta_path, text).map_err(|e| Error::io(&meta_path, e))?;
    Ok(meta)
}
