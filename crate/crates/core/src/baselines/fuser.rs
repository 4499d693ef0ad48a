use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::mlp::{init_mlp, mlp_fusion_forward, unimodal_forward};
use super::transformer::{block_prefix, transformer_fusion_forward, FUSION_CLASS_TOKEN};
use super::voting::plurality_vote;
use crate::ccmt::{
    class_token_name, embed_modality, init_block, init_heads, pos_name, CascadeLayout, Ccmt,
    CcmtConfig, Initializer, ModelInput,
};
use crate::error::{Error, Result};
use crate::numerics::{Bound, Graph, ParamStore, Real, Var};
use crate::tokenstore::{Modality, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FuserKind {
    Voting,
    Mlp,
    Transformer,
    Ccmt,
}

impl fmt::Display for FuserKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FuserKind::Voting => "voting",
            FuserKind::Mlp => "mlp",
            FuserKind::Transformer => "transformer",
            FuserKind::Ccmt => "ccmt",
        })
    }
}

impl FromStr for FuserKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "voting" => Ok(FuserKind::Voting),
            "mlp" => Ok(FuserKind::Mlp),
            "transformer" => Ok(FuserKind::Transformer),
            "ccmt" => Ok(FuserKind::Ccmt),
            _ => Err(Error::Config(format!("unknown fusion kind {s:?}"))),
        }
    }
}

/// Which fuser to build over which modalities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuserSpec {
    pub kind: FuserKind,
    pub modalities: Vec<Modality>,
    /// Hidden width of MLP classifiers; defaults to `4d`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden: Option<usize>,
    /// Block count for attention fusers; defaults to the model config's depth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
}

impl FuserSpec {
    pub fn new(kind: FuserKind, modalities: &[Modality]) -> Self {
        Self {
            kind,
            modalities: modalities.to_vec(),
            hidden: None,
            depth: None,
        }
    }

    /// A single-modality MLP classifier on mean-pooled tokens.
    pub fn unimodal(m: Modality) -> Self {
        Self::new(FuserKind::Mlp, &[m])
    }
}

/// A validated fuser: spec plus the effective architecture config.
#[derive(Debug, Clone, PartialEq)]
pub struct Fuser {
    pub spec: FuserSpec,
    pub cfg: CcmtConfig,
    modalities: Vec<Modality>,
}

impl Fuser {
    pub fn new(spec: FuserSpec, cfg: CcmtConfig) -> Result<Self> {
        let mut cfg = cfg;
        if let Some(depth) = spec.depth {
            cfg.depth = depth;
        }
        cfg.validate()?;
        if spec.modalities.is_empty() {
            return Err(Error::Config("a fuser needs at least one modality".into()));
        }
        if let Some(m) = spec
            .modalities
            .iter()
            .find(|m| !Modality::FUSED.contains(m))
        {
            return Err(Error::Config(format!("modality {m} is not fusable")));
        }
        if spec.hidden == Some(0) {
            return Err(Error::Config("hidden width must be positive".into()));
        }
        // Canonical order fixes parameter creation and rng consumption.
        let modalities: Vec<Modality> = Modality::FUSED
            .into_iter()
            .filter(|m| spec.modalities.contains(m))
            .collect();
        if modalities.len() != spec.modalities.len() {
            return Err(Error::Config("duplicate modality in fuser spec".into()));
        }
        if spec.kind == FuserKind::Ccmt {
            CascadeLayout::for_modalities(&modalities)?;
        }
        Ok(Self {
            spec,
            cfg,
            modalities,
        })
    }

    pub fn kind(&self) -> FuserKind {
        self.spec.kind
    }

    /// Modalities in canonical (fr, en, audio) order.
    pub fn modalities(&self) -> &[Modality] {
        &self.modalities
    }

    fn hidden(&self) -> usize {
        self.spec.hidden.unwrap_or(4 * self.cfg.d)
    }

    fn ccmt(&self) -> Result<Ccmt> {
        Ccmt::new(
            self.cfg.clone(),
            CascadeLayout::for_modalities(&self.modalities)?,
        )
    }

    pub fn init_params(&self, rng: &mut Rng) -> Result<ParamStore<f32>> {
        let d = self.cfg.d;
        let has_audio = self.modalities.contains(&Modality::Audio);
        match self.spec.kind {
            FuserKind::Ccmt => self.ccmt()?.init_params(rng),
            FuserKind::Voting => {
                let mut init = Initializer::new(rng);
                if has_audio {
                    init.small(&class_token_name(Modality::Audio), &[1, d])?;
                }
                for m in &self.modalities {
                    init_mlp(&mut init, &format!("vote.{m}"), d, self.hidden())?;
                }
                Ok(init.finish())
            }
            FuserKind::Mlp => {
                let mut init = Initializer::new(rng);
                if has_audio {
                    init.small(&class_token_name(Modality::Audio), &[1, d])?;
                }
                init_mlp(&mut init, "mlp", self.modalities.len() * d, self.hidden())?;
                Ok(init.finish())
            }
            FuserKind::Transformer => {
                let mut init = Initializer::new(rng);
                for &m in &self.modalities {
                    init.small(&pos_name(m), &[self.cfg.k, d])?;
                }
                if has_audio {
                    init.small(&class_token_name(Modality::Audio), &[1, d])?;
                }
                init.small(FUSION_CLASS_TOKEN, &[1, d])?;
                for i in 0..self.cfg.depth {
                    init_block(&mut init, &block_prefix(i), &self.cfg)?;
                }
                init_heads(&mut init, d, self.cfg.d_mlp)?;
                Ok(init.finish())
            }
        }
    }

    /// Logit pairs: one per voter for plurality voting, a single pair otherwise.
    pub fn forward<T: Real>(
        &self,
        g: &mut Graph<T>,
        bound: &Bound<'_>,
        input: &ModelInput,
    ) -> Result<Vec<(Var, Var)>> {
        match self.spec.kind {
            FuserKind::Ccmt => Ok(vec![self.ccmt()?.forward(g, bound, input)?]),
            FuserKind::Voting => self
                .modalities
                .iter()
                .map(|&m| {
                    let x = embed_modality(g, bound, input, m, false)?;
                    unimodal_forward(g, bound, &format!("vote.{m}"), x)
                })
                .collect(),
            FuserKind::Mlp => {
                let mut features = Vec::with_capacity(self.modalities.len());
                for &m in &self.modalities {
                    let x = embed_modality(g, bound, input, m, false)?;
                    features.push(g.mean_rows(x));
                }
                Ok(vec![mlp_fusion_forward(g, bound, "mlp", &features)?])
            }
            FuserKind::Transformer => {
                let mut sets = Vec::with_capacity(self.modalities.len());
                for &m in &self.modalities {
                    sets.push(embed_modality(g, bound, input, m, true)?);
                }
                Ok(vec![transformer_fusion_forward(
                    g, bound, &self.cfg, &sets,
                )?])
            }
        }
    }

    /// Binary decisions from logit values: `logit > 0` per task, combined by
    /// plurality vote when there are several voters.
    pub fn decide(logits: &[(f64, f64)]) -> Result<(bool, bool)> {
        let preds: Vec<(bool, bool)> = logits.iter().map(|&(r, c)| (r > 0.0, c > 0.0)).collect();
        match preds.as_slice() {
            [] => Err(Error::Contract("no logits to decide on".into())),
            [one] => Ok(*one),
            many => plurality_vote(many),
        }
    }
}
