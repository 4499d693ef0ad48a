use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Rng;
use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Input stream of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    TextFr,
    TextEn,
    TextOther,
    Audio,
}

impl Modality {
    /// The three streams the fusers consume.
    pub const FUSED: [Modality; 3] = [Modality::TextFr, Modality::TextEn, Modality::Audio];

    pub fn name(self) -> &'static str {
        match self {
            Modality::TextFr => "text_fr",
            Modality::TextEn => "text_en",
            Modality::TextOther => "text_other",
            Modality::Audio => "audio",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text_fr" | "fr" => Ok(Modality::TextFr),
            "text_en" | "en" => Ok(Modality::TextEn),
            "text_other" | "other" => Ok(Modality::TextOther),
            "audio" => Ok(Modality::Audio),
            _ => Err(Error::Config(format!("unknown modality {s:?}"))),
        }
    }
}

/// One modality's `count x dim` token matrix. When `has_class_token` is set,
/// row 0 is the class token.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenSet {
    pub modality: Modality,
    tokens: Tensor<f32>,
    has_class_token: bool,
}

impl TokenSet {
    pub fn new(modality: Modality, tokens: Tensor<f32>, has_class_token: bool) -> Result<Self> {
        if tokens.shape().len() != 2 {
            return Err(Error::Contract(format!(
                "token set for {modality} must be a matrix, got shape {:?}",
                tokens.shape()
            )));
        }
        if !tokens.is_finite() {
            return Err(Error::Contract(format!(
                "token set for {modality} has non-finite values"
            )));
        }
        Ok(Self {
            modality,
            tokens,
            has_class_token,
        })
    }

    pub fn tokens(&self) -> &Tensor<f32> {
        &self.tokens
    }

    pub fn into_tokens(self) -> Tensor<f32> {
        self.tokens
    }

    pub fn has_class_token(&self) -> bool {
        self.has_class_token
    }

    pub fn count(&self) -> usize {
        self.tokens.rows()
    }

    pub fn dim(&self) -> usize {
        self.tokens.cols()
    }

    /// Rows that are not the class token.
    pub fn body_count(&self) -> usize {
        self.count() - usize::from(self.has_class_token)
    }
}

/// Row indices selected by [`uniformize`] for a set with `count` rows.
///
/// Down-sampling keeps the class row and draws the remaining rows without
/// replacement with a partial Fisher–Yates pass over the non-class indices.
/// Up-sampling keeps every row in order and appends uniformly drawn
/// non-class rows. A class-only set is padded with copies of the class row.
pub fn uniformize_indices(
    count: usize,
    has_class_token: bool,
    k: usize,
    rng: &mut Rng,
) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::Contract(
            "uniformize target k must be at least 1".into(),
        ));
    }
    if count == 0 {
        return Err(Error::Contract("uniformize of an empty token set".into()));
    }
    if count == k {
        return Ok((0..count).collect());
    }
    let first_body = usize::from(has_class_token);
    let body = count - first_body;
    if count > k {
        let keep = k - first_body;
        let mut pool: Vec<usize> = (first_body..count).collect();
        for i in 0..keep {
            let j = i + rng.below(body - i);
            pool.swap(i, j);
        }
        let mut out = Vec::with_capacity(k);
        if has_class_token {
            out.push(0);
        }
        out.extend_from_slice(&pool[..keep]);
        return Ok(out);
    }
    let mut out: Vec<usize> = (0..count).collect();
    while out.len() < k {
        if body == 0 {
            out.push(0);
        } else {
            out.push(first_body + rng.below(body));
        }
    }
    Ok(out)
}

/// Resample `ts` to exactly `k` rows (class token included when present).
pub fn uniformize(ts: &TokenSet, k: usize, rng: &mut Rng) -> Result<TokenSet> {
    let idx = uniformize_indices(ts.count(), ts.has_class_token, k, rng)?;
    Ok(TokenSet {
        modality: ts.modality,
        tokens: ts.tokens.gather_rows(&idx),
        has_class_token: ts.has_class_token,
    })
}

/// Attach `class_vec` as row 0.
pub fn prepend_class_token(ts: &TokenSet, class_vec: &[f32]) -> Result<TokenSet> {
    if ts.has_class_token {
        return Err(Error::Contract(format!(
            "{} token set already has a class token",
            ts.modality
        )));
    }
    if class_vec.len() != ts.dim() {
        return Err(Error::Dimension {
            op: "prepend_class_token",
            left: vec![ts.count(), ts.dim()],
            right: vec![class_vec.len()],
        });
    }
    let mut data = Vec::with_capacity((ts.count() + 1) * ts.dim());
    data.extend_from_slice(class_vec);
    data.extend_from_slice(ts.tokens.data());
    TokenSet::new(
        ts.modality,
        Tensor::matrix(ts.count() + 1, ts.dim(), data)?,
        true,
    )
}

/// Binary task labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labels {
    pub request: bool,
    pub complaint: bool,
}

impl Labels {
    pub fn get(&self, task: Task) -> bool {
        match task {
            Task::Request => self.request,
            Task::Complaint => self.complaint,
        }
    }
}

/// The two binary classification tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Request,
    Complaint,
}

impl Task {
    pub const ALL: [Task; 2] = [Task::Request, Task::Complaint];

    pub fn name(self) -> &'static str {
        match self {
            Task::Request => "request",
            Task::Complaint => "complaint",
        }
    }
}

/// A sample with all of its token sets and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub id: String,
    pub token_sets: BTreeMap<Modality, TokenSet>,
    pub labels: Labels,
}

impl SampleRecord {
    pub fn new(
        id: impl Into<String>,
        token_sets: BTreeMap<Modality, TokenSet>,
        labels: Labels,
    ) -> Result<Self> {
        let id = id.into();
        let mut dims = token_sets.values().map(TokenSet::dim);
        if let Some(d) = dims.next() {
            if dims.any(|x| x != d) {
                return Err(Error::Contract(format!(
                    "sample {id}: token sets disagree on dim"
                )));
            }
        }
        Ok(Self {
            id,
            token_sets,
            labels,
        })
    }

    pub fn get(&self, m: Modality) -> Result<&TokenSet> {
        self.token_sets
            .get(&m)
            .ok_or_else(|| Error::Contract(format!("sample {} has no {m} token set", self.id)))
    }

    pub fn dim(&self) -> Option<usize> {
        self.token_sets.values().next().map(TokenSet::dim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn numbered(count: usize, dim: usize, class: bool) -> TokenSet {
        let data = (0..count * dim).map(|i| (i / dim) as f32).collect();
        TokenSet::new(
            Modality::TextFr,
            Tensor::matrix(count, dim, data).unwrap(),
            class,
        )
        .unwrap()
    }

    #[test]
    fn equal_count_is_identity() {
        let ts = numbered(5, 3, true);
        let mut rng = Rng::new(1);
        let before = rng.clone();
        assert_eq!(uniformize(&ts, 5, &mut rng).unwrap(), ts);
        assert_eq!(rng, before);
    }

    #[test]
    fn upsampling_draws_match_rng_sequence() {
        // class + 2 rows, k = 5, seed 7: appended rows are 1 + draw mod 2.
        let ts = numbered(3, 2, true);
        let out = uniformize(&ts, 5, &mut Rng::new(7)).unwrap();
        let mut r = Rng::new(7);
        let expected: Vec<usize> = vec![
            0,
            1,
            2,
            1 + (r.next_u64() % 2) as usize,
            1 + (r.next_u64() % 2) as usize,
        ];
        let idx = uniformize_indices(3, true, 5, &mut Rng::new(7)).unwrap();
        assert_eq!(idx, expected);
        assert_eq!(out.tokens(), &ts.tokens().gather_rows(&expected));
    }

    #[test]
    fn downsampling_keeps_class_row_and_distinct_rows() {
        let ts = numbered(50, 4, true);
        let out = uniformize(&ts, 10, &mut Rng::new(99)).unwrap();
        assert_eq!(out.count(), 10);
        assert_eq!(out.tokens().row(0), ts.tokens().row(0));
        let mut ids: Vec<i64> = (1..10).map(|r| out.tokens().get(r, 0) as i64).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), 9);
        assert!(ids.iter().all(|&i| i >= 1));
    }

    #[test]
    fn without_class_token_all_k_rows_are_sampled() {
        let ts = numbered(20, 2, false);
        let out = uniformize(&ts, 7, &mut Rng::new(5)).unwrap();
        assert_eq!(out.count(), 7);
        assert!(!out.has_class_token());
    }

    #[test]
    fn class_only_set_duplicates_class_row() {
        let ts = numbered(1, 3, true);
        let out = uniformize(&ts, 4, &mut Rng::new(0)).unwrap();
        assert_eq!(out.count(), 4);
        for r in 0..4 {
            assert_eq!(out.tokens().row(r), ts.tokens().row(0));
        }
    }

    #[test]
    fn zero_k_rejected() {
        let ts = numbered(3, 2, true);
        assert!(matches!(
            uniformize(&ts, 0, &mut Rng::new(0)),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn prepend_class_token_places_row_zero() {
        let ts = numbered(1, 3, false);
        let out = prepend_class_token(&ts, &[9.0, 8.0, 7.0]).unwrap();
        assert_eq!(out.count(), 2);
        assert!(out.has_class_token());
        assert_eq!(out.tokens().row(0), &[9.0, 8.0, 7.0]);
        assert_eq!(out.tokens().row(1), ts.tokens().row(0));
        assert!(prepend_class_token(&out, &[0.0; 3]).is_err());
    }
}
