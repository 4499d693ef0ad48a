use std::collections::BTreeMap;

use super::SynthConfig;
use crate::error::Result;
use crate::numerics::Tensor;
use crate::tokenstore::{mix64, Labels, Modality, Rng, SampleRecord, Task, TokenSet};

const DIRECTION_SALT: u64 = 0x5EED_D1EC_7105_0001;
const SAMPLE_SALT: u64 = 0x5EED_5A3B_1E00_0003;

/// The four orthonormal planted directions, indexed by task and text/audio.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalDirections {
    pub request_text: Vec<f64>,
    pub request_audio: Vec<f64>,
    pub complaint_text: Vec<f64>,
    pub complaint_audio: Vec<f64>,
}

impl SignalDirections {
    /// Gram–Schmidt over seeded Gaussian draws.
    pub fn draw(seed: u64, dim: usize) -> Self {
        let mut rng = Rng::new(mix64(seed ^ DIRECTION_SALT));
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(4);
        while basis.len() < 4 {
            let mut v: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
            for b in &basis {
                let p: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
            }
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n < 1e-6 {
                continue;
            }
            v.iter_mut().for_each(|x| *x /= n);
            basis.push(v);
        }
        let mut it = basis.into_iter();
        Self {
            request_text: it.next().unwrap(),
            request_audio: it.next().unwrap(),
            complaint_text: it.next().unwrap(),
            complaint_audio: it.next().unwrap(),
        }
    }

    pub fn get(&self, task: Task, audio: bool) -> &[f64] {
        match (task, audio) {
            (Task::Request, false) => &self.request_text,
            (Task::Request, true) => &self.request_audio,
            (Task::Complaint, false) => &self.complaint_text,
            (Task::Complaint, true) => &self.complaint_audio,
        }
    }

    pub fn all(&self) -> [&[f64]; 4] {
        [
            &self.request_text,
            &self.request_audio,
            &self.complaint_text,
            &self.complaint_audio,
        ]
    }
}

/// Raw draw of one sample before packaging: token rows without class tokens.
pub(crate) struct RawSample {
    pub labels: Labels,
    pub audio: Vec<Vec<f64>>,
    pub text_fr: Vec<Vec<f64>>,
    pub text_en: Vec<Vec<f64>>,
}

fn noise(rng: &mut Rng, dim: usize, sigma: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.normal() * sigma).collect()
}

fn add_scaled(v: &mut [f64], dir: &[f64], a: f64) {
    v.iter_mut().zip(dir).for_each(|(x, d)| *x += a * d);
}

/// Draw one sample from its own rng stream. The draw order is fixed:
/// labels, counts, audio, French, English, label flips.
pub(crate) fn draw_raw(cfg: &SynthConfig, dirs: &SignalDirections, rng: &mut Rng) -> RawSample {
    let dim = cfg.dim;
    let truth = Labels {
        request: rng.bernoulli(cfg.prior_request),
        complaint: rng.bernoulli(cfg.prior_complaint),
    };
    let n_audio = rng.range_inclusive(cfg.counts.audio.min, cfg.counts.audio.max);
    let n_fr = rng.range_inclusive(cfg.counts.text_fr.min, cfg.counts.text_fr.max);
    let n_en = rng.range_inclusive(cfg.counts.text_en.min, cfg.counts.text_en.max);

    let mut audio = Vec::with_capacity(n_audio);
    for _ in 0..n_audio {
        let mut t = noise(rng, dim, cfg.noise_sigma);
        for task in Task::ALL {
            if truth.get(task) && rng.bernoulli(cfg.injection_prob) {
                add_scaled(
                    &mut t,
                    dirs.get(task, true),
                    cfg.amplitudes.get(task, Modality::Audio),
                );
            }
        }
        audio.push(t);
    }

    // French rows keep their noise part and injection flags so the English
    // "translation" can reuse both.
    let mut fr_noise = Vec::with_capacity(n_fr);
    let mut fr_flags = Vec::with_capacity(n_fr);
    let mut text_fr = Vec::with_capacity(n_fr);
    for _ in 0..n_fr {
        let base = noise(rng, dim, cfg.noise_sigma);
        let mut t = base.clone();
        let mut flags = [false; 2];
        for (i, task) in Task::ALL.into_iter().enumerate() {
            if truth.get(task) && rng.bernoulli(cfg.injection_prob) {
                flags[i] = true;
                add_scaled(
                    &mut t,
                    dirs.get(task, false),
                    cfg.amplitudes.get(task, Modality::TextFr),
                );
            }
        }
        fr_noise.push(base);
        fr_flags.push(flags);
        text_fr.push(t);
    }

    let mut text_en = Vec::with_capacity(n_en);
    for _ in 0..n_en {
        let src = rng.below(n_fr);
        let mut t = fr_noise[src].clone();
        let jitter = noise(rng, dim, 0.5 * cfg.noise_sigma);
        t.iter_mut().zip(&jitter).for_each(|(x, j)| *x += j);
        for (i, task) in Task::ALL.into_iter().enumerate() {
            if fr_flags[src][i] {
                add_scaled(
                    &mut t,
                    dirs.get(task, false),
                    cfg.amplitudes.get(task, Modality::TextEn),
                );
            }
        }
        text_en.push(t);
    }

    let labels = Labels {
        request: truth.request ^ rng.bernoulli(cfg.label_flip_prob),
        complaint: truth.complaint ^ rng.bernoulli(cfg.label_flip_prob),
    };
    RawSample {
        labels,
        audio,
        text_fr,
        text_en,
    }
}

fn mean_row(rows: &[Vec<f64>]) -> Vec<f64> {
    let dim = rows[0].len();
    let mut m = vec![0.0; dim];
    for r in rows {
        m.iter_mut().zip(r).for_each(|(a, b)| *a += b);
    }
    let n = rows.len() as f64;
    m.iter_mut().for_each(|a| *a /= n);
    m
}

fn to_set(modality: Modality, rows: &[Vec<f64>], class_token: bool) -> Result<TokenSet> {
    let dim = rows[0].len();
    let mut data: Vec<f32> = Vec::with_capacity((rows.len() + 1) * dim);
    if class_token {
        data.extend(mean_row(rows).iter().map(|&x| x as f32));
    }
    for r in rows {
        data.extend(r.iter().map(|&x| x as f32));
    }
    let count = rows.len() + usize::from(class_token);
    TokenSet::new(modality, Tensor::matrix(count, dim, data)?, class_token)
}

impl RawSample {
    /// Package into token sets: text sets get their mean as class token, audio none.
    pub fn into_record(self, id: String) -> Result<SampleRecord> {
        let mut sets = BTreeMap::new();
        sets.insert(
            Modality::Audio,
            to_set(Modality::Audio, &self.audio, false)?,
        );
        sets.insert(
            Modality::TextFr,
            to_set(Modality::TextFr, &self.text_fr, true)?,
        );
        sets.insert(
            Modality::TextEn,
            to_set(Modality::TextEn, &self.text_en, true)?,
        );
        SampleRecord::new(id, sets, self.labels)
    }

    /// Mean over the (non-class) tokens of one modality.
    pub fn pooled(&self, m: Modality) -> Vec<f64> {
        match m {
            Modality::Audio => mean_row(&self.audio),
            Modality::TextFr => mean_row(&self.text_fr),
            Modality::TextEn => mean_row(&self.text_en),
            Modality::TextOther => vec![0.0; self.audio[0].len()],
        }
    }
}

/// Rng seed of sample `index`. The dataset seed is hashed before the index is
/// mixed in, so nearby dataset seeds do not share samples.
pub fn sample_seed(dataset_seed: u64, index: usize) -> u64 {
    mix64(mix64(dataset_seed ^ SAMPLE_SALT) ^ index as u64)
}

/// In-memory dataset with stable ids `train-NNNNNN` / `dev-NNNNNN`.
#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub train: Vec<SampleRecord>,
    pub dev: Vec<SampleRecord>,
    pub directions: SignalDirections,
}

pub fn generate_dataset(cfg: &SynthConfig) -> Result<SynthDataset> {
    cfg.validate()?;
    let directions = SignalDirections::draw(cfg.seed, cfg.dim);
    let make = |index: usize, id: String| {
        let mut rng = Rng::new(sample_seed(cfg.seed, index));
        draw_raw(cfg, &directions, &mut rng).into_record(id)
    };
    use rayon::prelude::*;
    let train = (0..cfg.n_train)
        .into_par_iter()
        .map(|i| make(i, format!("train-{i:06}")))
        .collect::<Result<Vec<_>>>()?;
    let dev = (0..cfg.n_dev)
        .into_par_iter()
        .map(|i| make(cfg.n_train + i, format!("dev-{i:06}")))
        .collect::<Result<Vec<_>>>()?;
    Ok(SynthDataset {
        train,
        dev,
        directions,
    })
}
