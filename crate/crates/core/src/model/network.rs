use alloc::format;
use alloc::vec::Vec;

use super::{Ablation, ComparisonMode, LevelGeometry, ModelError, TgeConfig};
use crate::autodiff::nn::{FeedForward, Linear, Mlp, MultiHeadAttention};
use crate::autodiff::{Graph, ParamStore, Var};
use crate::rng::ChaCha8Rng;

/// Layers of one grouping scale inside a level.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ScaleLayers {
    geom: Mlp,
    geom_proj: Linear,
    latent: Option<(Mlp, Linear)>,
    self_geom: Option<MultiHeadAttention>,
    self_latent: Option<MultiHeadAttention>,
    cross: Option<MultiHeadAttention>,
    ffn: Option<FeedForward>,
    out: Mlp,
}

impl ScaleLayers {
    fn new(
        store: &mut ParamStore,
        name: &str,
        config: &TgeConfig,
        level: usize,
        scale: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let cfg = config.level(level);
        let ablation = config.ablation;
        let d_l = config.latent_width(level);
        let d = cfg.d_emb;
        let geom_in = if ablation.has_latent_stream() { 3 } else { 3 + d_l };
        let geom = Mlp::new(store, &format!("{name}.geom"), geom_in, &cfg.geom_mlp_dims[scale], rng);
        let geom_proj = Linear::new(store, &format!("{name}.geom_proj"), geom.output(), d, rng);
        let latent = ablation.has_latent_stream().then(|| {
            let mlp = Mlp::new(store, &format!("{name}.latent"), d_l, &cfg.latent_mlp_dims[scale], rng);
            let proj = Linear::new(store, &format!("{name}.latent_proj"), mlp.output(), d, rng);
            (mlp, proj)
        });
        let mut attention = |which: &str, on: bool| {
            on.then(|| MultiHeadAttention::new(store, &format!("{name}.{which}"), d, cfg.heads, rng))
        };
        let self_geom = attention("self_geom", ablation.has_self_attention());
        let self_latent = attention("self_latent", ablation.has_self_attention());
        let cross = attention("cross", ablation.has_cross_attention());
        let ffn = ablation
            .has_latent_stream()
            .then(|| FeedForward::new(store, &format!("{name}.ffn"), d, rng));
        let out_in = if ablation.keeps_geometry_feature() { 2 * d } else { d };
        let out = Mlp::new(store, &format!("{name}.out"), out_in, &cfg.out_mlp_dims[scale], rng);
        Self {
            geom,
            geom_proj,
            latent,
            self_geom,
            self_latent,
            cross,
            ffn,
            out,
        }
    }

    fn forward(
        &self,
        g: &mut Graph<'_>,
        ablation: Ablation,
        k: usize,
        relative: Var,
        grouped_latent: Var,
    ) -> Result<Var, ModelError> {
        let Some((latent_mlp, latent_proj)) = &self.latent else {
            let x = g.concat_cols(&[relative, grouped_latent])?;
            let h = self.geom.forward(g, x)?;
            let h = g.group_max(h, k)?;
            let geo = self.geom_proj.forward(g, h)?;
            return Ok(self.out.forward(g, geo)?);
        };
        let h = self.geom.forward(g, relative)?;
        let h = g.group_max(h, k)?;
        let geo = self.geom_proj.forward(g, h)?;
        let h = latent_mlp.forward(g, grouped_latent)?;
        let h = g.group_max(h, k)?;
        let lat = latent_proj.forward(g, h)?;

        let (geo, lat) = match (&self.self_geom, &self.self_latent) {
            (Some(sg), Some(sl)) => (sg.forward(g, geo, geo)?, sl.forward(g, lat, lat)?),
            _ => (geo, lat),
        };
        let ffn = self.ffn.as_ref().expect("latent stream has a feed-forward block");
        let fed = ffn.forward(g, lat)?;
        let fused = match &self.cross {
            // geometry queries attend to appearance
            Some(cross) => {
                let attended = cross.forward(g, geo, lat)?;
                g.add(attended, fed)?
            }
            None => g.add(geo, fed)?,
        };
        let x = if ablation.keeps_geometry_feature() {
            g.concat_cols(&[fused, geo])?
        } else {
            fused
        };
        Ok(self.out.forward(g, x)?)
    }

    pub(crate) fn grouped_macs(&self, rows: usize) -> u64 {
        self.geom.macs(rows) + self.latent.as_ref().map_or(0, |(mlp, _)| mlp.macs(rows))
    }

    pub(crate) fn centroid_macs(&self, m: usize) -> u64 {
        let attention: u64 = [&self.self_geom, &self.self_latent, &self.cross]
            .iter()
            .filter_map(|a| a.as_ref())
            .map(|a| a.macs(m, m))
            .sum();
        self.geom_proj.macs(m)
            + self.latent.as_ref().map_or(0, |(_, p)| p.macs(m))
            + attention
            + self.ffn.as_ref().map_or(0, |f| f.macs(m))
            + self.out.macs(m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Network {
    pub(crate) levels: [Vec<ScaleLayers>; 2],
    pub(crate) global: Mlp,
    pub(crate) head: Mlp,
    pub(crate) score: Linear,
}

impl Network {
    pub(crate) fn new(store: &mut ParamStore, config: &TgeConfig, rng: &mut ChaCha8Rng) -> Self {
        let levels = [0, 1].map(|level| {
            (0..config.level(level).scales())
                .map(|s| ScaleLayers::new(store, &format!("level{}.scale{s}", level + 1), config, level, s, rng))
                .collect()
        });
        let global = Mlp::new(store, "global", 3 + config.level2.output_width(), &config.final_mlp_dims, rng);
        let head_in = config.comparison_mode.width(config.final_dim());
        let head = Mlp::new(store, "head", head_in, &config.head_dims, rng);
        let score = Linear::new(store, "head.score", head.output(), 1, rng);
        Self {
            levels,
            global,
            head,
            score,
        }
    }

    /// One level: per-scale grouping, streams, attention, output MLP;
    /// scales concatenated channel-wise.
    pub(crate) fn level(
        &self,
        g: &mut Graph<'_>,
        config: &TgeConfig,
        level: usize,
        geometry: &LevelGeometry,
        latent: Var,
    ) -> Result<Var, ModelError> {
        let cfg = config.level(level);
        let (_, width) = g.shape(latent);
        if width != config.latent_width(level) {
            return Err(ModelError::Width {
                expected: config.latent_width(level),
                found: width,
            });
        }
        let mut outs = Vec::with_capacity(cfg.scales());
        for (s, layers) in self.levels[level].iter().enumerate() {
            let relative = g.constant(geometry.relative[s].clone());
            let grouped = g.gather_rows(latent, &geometry.groups[s])?;
            outs.push(layers.forward(g, config.ablation, cfg.max_samples[s], relative, grouped)?);
        }
        Ok(if outs.len() == 1 { outs[0] } else { g.concat_cols(&outs)? })
    }

    pub(crate) fn compare(
        &self,
        g: &mut Graph<'_>,
        mode: ComparisonMode,
        f_input: Var,
        f_ref: Var,
    ) -> Result<Var, ModelError> {
        let diff = g.sub(f_input, f_ref)?;
        let diff = g.abs(diff);
        let x = match mode {
            ComparisonMode::ConcatDiff => g.concat_cols(&[f_input, f_ref, diff])?,
            ComparisonMode::Concat => g.concat_cols(&[f_input, f_ref])?,
            ComparisonMode::Diff => diff,
        };
        let h = self.head.forward(g, x)?;
        let s = self.score.forward(g, h)?;
        Ok(g.sigmoid(s))
    }
}
