use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokenstore::{Modality, Task};

/// Inclusive token-count range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRange {
    pub min: usize,
    pub max: usize,
}

impl CountRange {
    pub const fn new(min: usize, max: usize) -> Self {
        Self { min, max }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRanges {
    pub audio: CountRange,
    pub text_fr: CountRange,
    pub text_en: CountRange,
}

/// Signal amplitude per modality for one task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModalityAmplitudes {
    pub text_fr: f64,
    pub text_en: f64,
    pub audio: f64,
}

impl ModalityAmplitudes {
    pub fn get(&self, m: Modality) -> f64 {
        match m {
            Modality::TextFr => self.text_fr,
            Modality::TextEn => self.text_en,
            Modality::Audio => self.audio,
            Modality::TextOther => 0.0,
        }
    }

    pub const ZERO: Self = Self {
        text_fr: 0.0,
        text_en: 0.0,
        audio: 0.0,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Amplitudes {
    pub request: ModalityAmplitudes,
    pub complaint: ModalityAmplitudes,
}

impl Amplitudes {
    pub fn get(&self, task: Task, m: Modality) -> f64 {
        match task {
            Task::Request => self.request.get(m),
            Task::Complaint => self.complaint.get(m),
        }
    }

    pub const ZERO: Self = Self {
        request: ModalityAmplitudes::ZERO,
        complaint: ModalityAmplitudes::ZERO,
    };
}

/// Parameters of the synthetic three-modality benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_train: usize,
    pub n_dev: usize,
    pub dim: usize,
    pub counts: CountRanges,
    pub noise_sigma: f64,
    /// Per-token probability that a positive sample's token carries the task direction.
    pub injection_prob: f64,
    pub amplitudes: Amplitudes,
    pub label_flip_prob: f64,
    pub prior_request: f64,
    pub prior_complaint: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_train: 1000,
            n_dev: 500,
            dim: 32,
            counts: CountRanges {
                audio: CountRange::new(40, 120),
                text_fr: CountRange::new(10, 60),
                text_en: CountRange::new(10, 60),
            },
            noise_sigma: 1.0,
            injection_prob: 0.3,
            amplitudes: Amplitudes {
                request: ModalityAmplitudes {
                    text_fr: 1.2,
                    text_en: 1.0,
                    audio: 0.3,
                },
                complaint: ModalityAmplitudes {
                    text_fr: 1.2,
                    text_en: 0.5,
                    audio: 0.65,
                },
            },
            label_flip_prob: 0.05,
            prior_request: 0.5,
            prior_complaint: 0.35,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n_train == 0 || self.n_dev == 0 {
            return fail("n_train and n_dev must be positive".into());
        }
        if self.dim < 4 {
            return fail(format!(
                "dim {} is too small for four orthonormal signal directions",
                self.dim
            ));
        }
        for (name, r) in [
            ("audio", self.counts.audio),
            ("text_fr", self.counts.text_fr),
            ("text_en", self.counts.text_en),
        ] {
            if r.min == 0 || r.min > r.max {
                return fail(format!(
                    "{name} count range [{}, {}] is empty or starts at 0",
                    r.min, r.max
                ));
            }
        }
        for (name, p) in [
            ("injection_prob", self.injection_prob),
            ("label_flip_prob", self.label_flip_prob),
            ("prior_request", self.prior_request),
            ("prior_complaint", self.prior_complaint),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return fail(format!("{name} = {p} is not a probability"));
            }
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return fail(format!(
                "noise_sigma {} must be finite and non-negative",
                self.noise_sigma
            ));
        }
        for task in Task::ALL {
            for m in Modality::FUSED {
                let a = self.amplitudes.get(task, m);
                if !(a >= 0.0) || !a.is_finite() {
                    return fail(format!(
                        "amplitude for {}/{m} = {a} must be finite and non-negative",
                        task.name()
                    ));
                }
            }
        }
        Ok(())
    }
}
