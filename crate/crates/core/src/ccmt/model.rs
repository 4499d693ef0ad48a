use serde::{Deserialize, Serialize};

use super::{
    class_token_name, cross_attention_block, embed_modality, heads_forward, init_block, init_heads,
    pos_name, BlockVars, CcmtConfig, Initializer, ModelInput,
};
use crate::error::{Error, Result};
use crate::numerics::{Bound, Graph, ParamStore, Real, Var};
use crate::tokenstore::{Modality, Rng};

/// Which cascade stages run, chosen by the modality subset.
///
/// - `Full` (fr+en+audio): `T_c = stage1(q=T_e, k=T_f, v=T_f)`, `T_o = stage2(q=T_a, k=T_c, v=T_a)`
/// - `FrAudio`: `T_o = stage2(q=T_a, k=T_f, v=T_a)`
/// - `FrEn`: `T_o = stage1(q=T_e, k=T_f, v=T_f)`
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CascadeLayout {
    Full,
    FrAudio,
    FrEn,
}

impl CascadeLayout {
    pub fn for_modalities(modalities: &[Modality]) -> Result<Self> {
        let has = |m| modalities.contains(&m);
        let (fr, en, audio) = (
            has(Modality::TextFr),
            has(Modality::TextEn),
            has(Modality::Audio),
        );
        let extra = modalities.iter().any(|m| !Modality::FUSED.contains(m));
        match (fr, en, audio, extra) {
            (true, true, true, false) => Ok(Self::Full),
            (true, false, true, false) => Ok(Self::FrAudio),
            (true, true, false, false) => Ok(Self::FrEn),
            _ => Err(Error::Contract(format!(
                "the cascade needs fr+en+audio, fr+audio or fr+en; got {modalities:?}"
            ))),
        }
    }

    pub fn modalities(self) -> &'static [Modality] {
        match self {
            Self::Full => &[Modality::TextFr, Modality::TextEn, Modality::Audio],
            Self::FrAudio => &[Modality::TextFr, Modality::Audio],
            Self::FrEn => &[Modality::TextFr, Modality::TextEn],
        }
    }

    fn has_stage1(self) -> bool {
        matches!(self, Self::Full | Self::FrEn)
    }

    fn has_stage2(self) -> bool {
        matches!(self, Self::Full | Self::FrAudio)
    }
}

/// The cascaded cross-modal transformer.
#[derive(Debug, Clone, PartialEq)]
pub struct Ccmt {
    pub cfg: CcmtConfig,
    pub layout: CascadeLayout,
}

impl Ccmt {
    pub fn new(cfg: CcmtConfig, layout: CascadeLayout) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, layout })
    }

    pub fn init_params(&self, rng: &mut Rng) -> Result<ParamStore<f32>> {
        let cfg = &self.cfg;
        let mut init = Initializer::new(rng);
        for &m in self.layout.modalities() {
            init.small(&pos_name(m), &[cfg.k, cfg.d])?;
        }
        if self.layout.modalities().contains(&Modality::Audio) {
            init.small(&class_token_name(Modality::Audio), &[1, cfg.d])?;
        }
        if self.layout.has_stage1() {
            for i in 0..cfg.depth {
                init_block(&mut init, &format!("stage1.{i}"), cfg)?;
            }
        }
        if self.layout.has_stage2() {
            for i in 0..cfg.depth {
                init_block(&mut init, &format!("stage2.{i}"), cfg)?;
            }
        }
        init_heads(&mut init, cfg.d, cfg.d_mlp)?;
        Ok(init.finish())
    }

    fn stage<T: Real>(
        &self,
        g: &mut Graph<T>,
        bound: &Bound<'_>,
        name: &str,
        query: Var,
        keys: Var,
        values: Var,
    ) -> Result<Var> {
        let mut x = query;
        for i in 0..self.cfg.depth {
            let p = BlockVars::bind(bound, &format!("{name}.{i}"), self.cfg.heads)?;
            x = cross_attention_block(g, x, keys, values, &p, &self.cfg)?;
        }
        Ok(x)
    }

    /// Final token matrix (`T_o`) before the readout.
    pub fn encode<T: Real>(
        &self,
        g: &mut Graph<T>,
        bound: &Bound<'_>,
        input: &ModelInput,
    ) -> Result<Var> {
        self.encode_rows(g, bound, input, false)
    }

    /// With `class_row_only`, the last stage runs on query row 0 alone. Its
    /// keys and values stay fixed across blocks and everything on the query
    /// side is row-wise, so that row comes out the same as in the full pass.
    fn encode_rows<T: Real>(
        &self,
        g: &mut Graph<T>,
        bound: &Bound<'_>,
        input: &ModelInput,
        class_row_only: bool,
    ) -> Result<Var> {
        for &m in self.layout.modalities() {
            let t = input
                .tokens
                .get(&m)
                .ok_or_else(|| Error::Contract(format!("ccmt input is missing {m}")))?;
            if t.rows() != self.cfg.k || t.cols() != self.cfg.d {
                return Err(Error::Dimension {
                    op: "ccmt input",
                    left: vec![self.cfg.k, self.cfg.d],
                    right: t.shape().to_vec(),
                });
            }
        }
        let t_f = embed_modality(g, bound, input, Modality::TextFr, true)?;
        let t_c = if self.layout.has_stage1() {
            let t_e = embed_modality(g, bound, input, Modality::TextEn, true)?;
            let last = !self.layout.has_stage2();
            let q = if last && class_row_only {
                g.row(t_e, 0)?
            } else {
                t_e
            };
            self.stage(g, bound, "stage1", q, t_f, t_f)?
        } else {
            t_f
        };
        if !self.layout.has_stage2() {
            return Ok(t_c);
        }
        let t_a = embed_modality(g, bound, input, Modality::Audio, true)?;
        let q = if class_row_only { g.row(t_a, 0)? } else { t_a };
        self.stage(g, bound, "stage2", q, t_c, t_a)
    }

    /// `(logit_request, logit_complaint)` read from row 0 of the final tokens.
    pub fn forward<T: Real>(
        &self,
        g: &mut Graph<T>,
        bound: &Bound<'_>,
        input: &ModelInput,
    ) -> Result<(Var, Var)> {
        let cls = self.encode_rows(g, bound, input, true)?;
        heads_forward(g, bound, cls)
    }
}

/// Full three-modality forward pass.
pub fn ccmt_forward<T: Real>(
    g: &mut Graph<T>,
    bound: &Bound<'_>,
    cfg: &CcmtConfig,
    input: &ModelInput,
) -> Result<(Var, Var)> {
    Ccmt::new(cfg.clone(), CascadeLayout::Full)?.forward(g, bound, input)
}
