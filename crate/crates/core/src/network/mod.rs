//! Coarse-to-fine reconstruction network.
//!
//! A coarse patch of `M` points goes through three dynamic edge-convolution
//! levels with a self-attention unit per level, a concatenating aggregation
//! MLP and a final attention unit. The resulting per-point features are then
//! expanded `r`-fold by folding blocks that append fixed and learnable 2-D
//! codes to duplicated features, and a small head regresses coordinates.

mod layers;

pub use layers::{edge_conv, self_attention, EdgeConv, ExpandBlock, Linear, SelfAttention};

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, ParamStore, Tensor, Value};
use crate::error::{invalid, Result};
use crate::geometry::{knn, NeighborGraph, Point3};
use crate::rng;

/// Architecture widths and ablation toggles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// Neighbors per point in every edge-convolution level.
    pub k: usize,
    /// Width of each level's features.
    pub d: usize,
    /// Width of the aggregated features.
    pub c: usize,
    /// Width after expansion.
    pub c_prime: usize,
    /// Upsampling rate, a perfect square.
    pub r: usize,
    /// Hidden width of the coordinate regression head.
    pub head_hidden: usize,
    /// Half-extent of the fixed folding codes.
    pub fixed_grid_span: f64,
    pub use_self_attention: bool,
    pub use_learnable_grid: bool,
    pub use_hierarchical_folding: bool,
}

/// Number of edge-convolution levels.
pub const LEVELS: usize = 3;

impl NetworkConfig {
    /// Widths used for full-size patches of 256 points.
    pub fn full() -> Self {
        Self {
            k: 10,
            d: 64,
            c: 480,
            c_prime: 128,
            r: 4,
            head_hidden: 64,
            fixed_grid_span: 0.2,
            use_self_attention: true,
            use_learnable_grid: true,
            use_hierarchical_folding: true,
        }
    }

    /// Reduced widths that keep CPU training and gradient checks quick.
    pub fn desk() -> Self {
        Self {
            k: 6,
            d: 16,
            c: 64,
            c_prime: 32,
            ..Self::full()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if rate_root(self.r).is_none() || self.r < 4 {
            return Err(invalid(format!("rate r={} must be a perfect square >= 4", self.r)));
        }
        if self.k < 2 {
            return Err(invalid("network k must be at least 2"));
        }
        if self.d == 0 || self.c == 0 || self.c_prime == 0 || self.head_hidden == 0 {
            return Err(invalid("network widths must be positive"));
        }
        if !(self.fixed_grid_span.is_finite() && self.fixed_grid_span > 0.0) {
            return Err(invalid("fixed_grid_span must be positive"));
        }
        Ok(())
    }

    /// Per-block upsampling factors.
    pub fn block_rates(&self) -> Result<Vec<usize>> {
        let u = rate_root(self.r)
            .ok_or_else(|| invalid(format!("rate r={} is not a perfect square", self.r)))?;
        Ok(if self.use_hierarchical_folding {
            vec![u, u]
        } else {
            vec![self.r]
        })
    }
}

fn rate_root(r: usize) -> Option<usize> {
    let u = (r as f64).sqrt().round() as usize;
    (u * u == r && r > 0).then_some(u)
}

/// Fixed 2-D codes for a block of rate `u`: `u` points evenly spaced on the
/// diagonal of `[-span, span]^2`.
pub fn fixed_codes(u: usize, span: f64) -> Vec<[f64; 2]> {
    if u == 1 {
        return vec![[0.0, 0.0]];
    }
    (0..u)
        .map(|j| {
            let t = -span + 2.0 * span * j as f64 / (u - 1) as f64;
            [t, t]
        })
        .collect()
}

/// Features of one semantic level plus the neighborhood used to build the
/// next level from them.
#[derive(Debug, Clone)]
pub struct FeatureMap {
    pub level: usize,
    pub features: Value,
    pub neighborhood: NeighborGraph,
}

/// Layer handles of the reconstruction network. Parameters live in the
/// [`ParamStore`] returned alongside by [`SpuNet::new`].
#[derive(Debug, Clone)]
pub struct SpuNet {
    pub config: NetworkConfig,
    gcn: Vec<EdgeConv>,
    level_attention: Vec<SelfAttention>,
    aggregate: [Linear; 2],
    final_attention: Option<SelfAttention>,
    blocks: Vec<ExpandBlock>,
    reduce: Linear,
    head: [Linear; 2],
}

impl SpuNet {
    /// Register every parameter and initialize it from `seed`.
    pub fn new(config: NetworkConfig, seed: u64) -> Result<(Self, ParamStore)> {
        config.validate()?;
        let mut store = ParamStore::new();
        let mut init = rng::stream(seed, &[rng::tag::INIT]);
        let mut gcn = Vec::with_capacity(LEVELS);
        let mut level_attention = Vec::new();
        let mut width = 3;
        for l in 0..LEVELS {
            gcn.push(EdgeConv::new(
                &mut store,
                &mut init,
                &format!("extract.gcn{l}"),
                width,
                config.d,
            )?);
            width = config.d;
            if config.use_self_attention {
                level_attention.push(SelfAttention::new(
                    &mut store,
                    &mut init,
                    &format!("extract.attn{l}"),
                    config.d,
                )?);
            }
        }
        let aggregate = [
            Linear::new(&mut store, &mut init, "extract.aggregate0", 4 * config.d, config.c)?,
            Linear::new(&mut store, &mut init, "extract.aggregate1", config.c, config.c)?,
        ];
        let final_attention = if config.use_self_attention {
            Some(SelfAttention::new(
                &mut store,
                &mut init,
                "extract.attn_final",
                config.c,
            )?)
        } else {
            None
        };
        let mut blocks = Vec::new();
        for (b, u) in config.block_rates()?.into_iter().enumerate() {
            let code_width = if config.use_learnable_grid { 4 } else { 2 };
            let mlp = Linear::new(
                &mut store,
                &mut init,
                &format!("expand.block{b}"),
                config.c + code_width,
                config.c,
            )?;
            let learnable = if config.use_learnable_grid {
                let codes: Vec<f64> = (0..u * 2).map(|_| StandardNormal.sample(&mut init)).collect();
                Some(store.register(format!("expand.block{b}.codes"), Tensor::new(vec![u, 2], codes)?)?)
            } else {
                None
            };
            blocks.push(ExpandBlock {
                rate: u,
                mlp,
                learnable,
                fixed: fixed_codes(u, config.fixed_grid_span),
            });
        }
        let reduce = Linear::new(&mut store, &mut init, "expand.reduce", config.c, config.c_prime)?;
        let head = [
            Linear::new(&mut store, &mut init, "head.hidden", config.c_prime, config.head_hidden)?,
            Linear::new(&mut store, &mut init, "head.out", config.head_hidden, 3)?,
        ];
        Ok((
            Self {
                config,
                gcn,
                level_attention,
                aggregate,
                final_attention,
                blocks,
                reduce,
                head,
            },
            store,
        ))
    }

    /// Per-point features of a normalized coarse patch, `M x C`.
    pub fn extract_features(&self, store: &ParamStore, g: &mut Graph, coarse: &[Point3]) -> Result<Value> {
        let k = self.config.k;
        if k >= coarse.len() {
            return Err(invalid(format!(
                "network k={k} needs more than {k} coarse points, got {}",
                coarse.len()
            )));
        }
        let mut fmap = FeatureMap {
            level: 0,
            features: g.constant(Tensor::from_rows(coarse)),
            neighborhood: knn(coarse, k)?,
        };
        let mut levels = Vec::with_capacity(LEVELS);
        for layer in &self.gcn {
            fmap = edge_conv(g, store, layer, &fmap, k)?;
            levels.push(fmap.features);
        }
        let attended: Vec<Value> = if self.config.use_self_attention {
            levels
                .iter()
                .zip(&self.level_attention)
                .map(|(&f, a)| self_attention(g, store, a, f))
                .collect::<Result<_>>()?
        } else {
            levels.clone()
        };
        let stacked = g.concat(&[levels[0], attended[0], attended[1], attended[2]], 1)?;
        let hidden = self.aggregate[0].forward(g, store, stacked)?;
        let hidden = g.relu(hidden);
        let aggregated = self.aggregate[1].forward(g, store, hidden)?;
        match &self.final_attention {
            Some(a) => self_attention(g, store, a, aggregated),
            None => Ok(aggregated),
        }
    }

    /// Expand `M x C` features to `(r M) x C'`.
    ///
    /// Output rows are grouped by source point: rows `i*r .. (i+1)*r` all
    /// descend from input row `i`.
    pub fn expand_features(&self, store: &ParamStore, g: &mut Graph, features: Value) -> Result<Value> {
        let mut f = features;
        for block in &self.blocks {
            f = block.forward(g, store, f)?;
        }
        let reduced = self.reduce.forward(g, store, f)?;
        Ok(g.relu(reduced))
    }

    /// Reconstruct an `r M`-point fine patch from an `M`-point coarse patch.
    pub fn coarse_to_fine(&self, store: &ParamStore, g: &mut Graph, coarse: &[Point3]) -> Result<Value> {
        let features = self.extract_features(store, g, coarse)?;
        let expanded = self.expand_features(store, g, features)?;
        let hidden = self.head[0].forward(g, store, expanded)?;
        let hidden = g.relu(hidden);
        self.head[1].forward(g, store, hidden)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::normalize;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_patch(n: usize, seed: u64) -> Vec<Point3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Point3> = (0..n)
            .map(|_| [rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() * 0.2])
            .collect();
        normalize(&pts).unwrap().points
    }

    #[test]
    fn full_widths() {
        let (net, store) = SpuNet::new(NetworkConfig::full(), 0).unwrap();
        let coarse = random_patch(64, 1);
        let mut g = Graph::new();
        let f = net.extract_features(&store, &mut g, &coarse).unwrap();
        assert_eq!(g.shape(f), &[64, 480]);
        let up = net.expand_features(&store, &mut g, f).unwrap();
        assert_eq!(g.shape(up), &[256, 128]);
        let q = net.coarse_to_fine(&store, &mut g, &coarse).unwrap();
        assert_eq!(g.shape(q), &[256, 3]);
    }

    #[test]
    fn output_is_r_times_input_for_every_layout() {
        for r in [4, 9] {
            for hierarchical in [true, false] {
                let cfg = NetworkConfig {
                    r,
                    use_hierarchical_folding: hierarchical,
                    ..NetworkConfig::desk()
                };
                let (net, store) = SpuNet::new(cfg, 3).unwrap();
                let coarse = random_patch(12, 2);
                let mut g = Graph::new();
                let q = net.coarse_to_fine(&store, &mut g, &coarse).unwrap();
                assert_eq!(g.shape(q), &[12 * r, 3]);
            }
        }
    }

    #[test]
    fn rejects_bad_rates() {
        for r in [1, 2, 8] {
            let cfg = NetworkConfig {
                r,
                ..NetworkConfig::desk()
            };
            assert!(SpuNet::new(cfg, 0).is_err());
        }
    }

    #[test]
    fn zero_weights_collapse_to_output_bias() {
        let (net, mut store) = SpuNet::new(NetworkConfig::desk(), 5).unwrap();
        for p in store.iter_mut() {
            p.value.data_mut().iter_mut().for_each(|x| *x = 0.0);
        }
        let bias = store.find("head.out.bias").unwrap();
        store.get_mut(bias).value.data_mut().copy_from_slice(&[0.5, -1.0, 2.0]);
        let mut g = Graph::new();
        let q = net.coarse_to_fine(&store, &mut g, &random_patch(16, 4)).unwrap();
        assert!(g.tensor(q).to_points().iter().all(|p| *p == [0.5, -1.0, 2.0]));
    }

    #[test]
    fn permuting_input_permutes_output_groups() {
        let (net, store) = SpuNet::new(NetworkConfig::desk(), 6).unwrap();
        let coarse = random_patch(16, 7);
        let perm: Vec<usize> = (0..16).map(|i| (i * 5 + 3) % 16).collect();
        let permuted: Vec<Point3> = perm.iter().map(|&i| coarse[i]).collect();
        let mut g = Graph::new();
        let a = net.coarse_to_fine(&store, &mut g, &coarse).unwrap();
        let b = net.coarse_to_fine(&store, &mut g, &permuted).unwrap();
        let (a, b) = (g.tensor(a).to_points(), g.tensor(b).to_points());
        let r = 4;
        for (new_i, &old_i) in perm.iter().enumerate() {
            for j in 0..r {
                let (p, q) = (a[old_i * r + j], b[new_i * r + j]);
                for c in 0..3 {
                    assert!((p[c] - q[c]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn fixed_code_layout() {
        assert_eq!(fixed_codes(2, 0.2), vec![[-0.2, -0.2], [0.2, 0.2]]);
        assert_eq!(fixed_codes(1, 0.2), vec![[0.0, 0.0]]);
        let four = fixed_codes(4, 0.3);
        assert_eq!(four.first(), Some(&[-0.3, -0.3]));
        assert_eq!(four.last(), Some(&[0.3, 0.3]));
    }
}
