use rand::Rng;

use super::FeatureMap;
use crate::autodiff::{Graph, ParamId, ParamStore, Tensor, Value};
use crate::error::{invalid, Result};
use crate::geometry::knn_features;

/// Row-wise affine map `x W + b`, `W` stored `in x out`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Linear {
    /// Glorot-uniform weights, zero bias.
    pub fn new(
        store: &mut ParamStore,
        rng: &mut impl Rng,
        name: &str,
        fan_in: usize,
        fan_out: usize,
    ) -> Result<Self> {
        let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let w: Vec<f64> = (0..fan_in * fan_out)
            .map(|_| rng.random_range(-a..=a))
            .collect();
        let weight = store.register(format!("{name}.weight"), Tensor::new(vec![fan_in, fan_out], w)?)?;
        let bias = store.register(format!("{name}.bias"), Tensor::zeros(&[fan_out]))?;
        Ok(Self { weight, bias })
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Value) -> Result<Value> {
        let w = g.param(store, self.weight);
        let b = g.param(store, self.bias);
        let y = g.matmul(x, w)?;
        g.add(y, b)
    }
}

/// Shared edge MLP of one graph-convolution level.
#[derive(Debug, Clone)]
pub struct EdgeConv {
    pub mlp: Linear,
}

impl EdgeConv {
    pub fn new(store: &mut ParamStore, rng: &mut impl Rng, name: &str, c_in: usize, d: usize) -> Result<Self> {
        Ok(Self {
            mlp: Linear::new(store, rng, name, c_in, d)?,
        })
    }
}

/// One edge-convolution level: `f'_i = max_j relu(h(f_j - f_i))` over the
/// neighborhood stored in `fmap`, followed by a k-NN rebuild in the new
/// feature space.
pub fn edge_conv(
    g: &mut Graph,
    store: &ParamStore,
    layer: &EdgeConv,
    fmap: &FeatureMap,
    k: usize,
) -> Result<FeatureMap> {
    let m = g.shape(fmap.features)[0];
    if k >= m {
        return Err(invalid(format!("edge_conv needs k < {m} points, got k={k}")));
    }
    if fmap.neighborhood.indices.len() != m || fmap.neighborhood.k < k {
        return Err(invalid("neighborhood does not match the feature map"));
    }
    let neighbors: Vec<usize> = fmap
        .neighborhood
        .indices
        .iter()
        .flat_map(|list| list[..k].iter().copied())
        .collect();
    let centers: Vec<usize> = (0..m).flat_map(|i| std::iter::repeat_n(i, k)).collect();
    let fj = g.gather(fmap.features, &neighbors)?;
    let fi = g.gather(fmap.features, &centers)?;
    let edges = g.sub(fj, fi)?;
    let h = layer.mlp.forward(g, store, edges)?;
    let h = g.relu(h);
    let d = g.shape(h)[1];
    let h = g.reshape(h, &[m, k, d])?;
    let features = g.reduce_max(h, 1)?;
    let neighborhood = knn_features(g.data(features), d, k)?;
    Ok(FeatureMap {
        level: fmap.level + 1,
        features,
        neighborhood,
    })
}

/// Query/key/value embeddings of a self-attention unit.
#[derive(Debug, Clone)]
pub struct SelfAttention {
    pub x: Linear,
    pub y: Linear,
    pub h: Linear,
}

impl SelfAttention {
    /// Key width is a quarter of the feature width, at least 4.
    pub fn new(store: &mut ParamStore, rng: &mut impl Rng, name: &str, width: usize) -> Result<Self> {
        let key = (width / 4).max(4);
        Ok(Self {
            x: Linear::new(store, rng, &format!("{name}.x"), width, key)?,
            y: Linear::new(store, rng, &format!("{name}.y"), width, key)?,
            h: Linear::new(store, rng, &format!("{name}.h"), width, width)?,
        })
    }
}

/// Residual attention `F + softmax(Y X^T) H`, softmax over each row.
pub fn self_attention(g: &mut Graph, store: &ParamStore, unit: &SelfAttention, f: Value) -> Result<Value> {
    let x = unit.x.forward(g, store, f)?;
    let y = unit.y.forward(g, store, f)?;
    let h = unit.h.forward(g, store, f)?;
    let xt = g.transpose(x)?;
    let logits = g.matmul(y, xt)?;
    let weights = g.softmax(logits, 1)?;
    let mixed = g.matmul(weights, h)?;
    g.add(f, mixed)
}

/// One folding block: duplicate every feature row `rate` times, append the
/// fixed code and (optionally) the learnable code of each replica, then a
/// shared MLP.
#[derive(Debug, Clone)]
pub struct ExpandBlock {
    pub rate: usize,
    pub mlp: Linear,
    pub learnable: Option<ParamId>,
    pub fixed: Vec<[f64; 2]>,
}

impl ExpandBlock {
    pub fn forward(&self, g: &mut Graph, store: &ParamStore, f: Value) -> Result<Value> {
        let m = g.shape(f)[0];
        let u = self.rate;
        let rows: Vec<usize> = (0..m).flat_map(|i| std::iter::repeat_n(i, u)).collect();
        let dup = g.gather(f, &rows)?;
        let fixed: Vec<f64> = (0..m).flat_map(|_| self.fixed.iter().flatten().copied()).collect();
        let fixed = g.constant(Tensor::new(vec![m * u, 2], fixed)?);
        let mut parts = vec![dup, fixed];
        if let Some(id) = self.learnable {
            let codes = g.param(store, id);
            parts.push(g.tile(codes, 0, m)?);
        }
        let joined = g.concat(&parts, 1)?;
        let out = self.mlp.forward(g, store, joined)?;
        Ok(g.relu(out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::knn;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Vec<f64> {
        (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn set(store: &mut ParamStore, id: ParamId, data: &[f64]) {
        store.get_mut(id).value.data_mut().copy_from_slice(data);
    }

    #[test]
    fn identical_features_give_relu_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut store = ParamStore::new();
        let layer = EdgeConv::new(&mut store, &mut rng, "e", 3, 4).unwrap();
        set(&mut store, layer.mlp.bias, &[0.5, -0.5, 0.0, 2.0]);
        let mut g = Graph::new();
        let pts = vec![[0.3, 0.3, 0.3]; 5];
        let fmap = FeatureMap {
            level: 0,
            features: g.constant(Tensor::from_rows(&pts)),
            neighborhood: knn(&pts, 2).unwrap(),
        };
        let out = edge_conv(&mut g, &store, &layer, &fmap, 2).unwrap();
        assert_eq!(out.level, 1);
        for row in g.data(out.features).chunks(4) {
            assert_eq!(row, &[0.5, 0.0, 0.0, 2.0]);
        }
    }

    #[test]
    fn edge_conv_matches_scalar_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::new();
        let (c_in, d, k) = (3, 5, 2);
        let layer = EdgeConv::new(&mut store, &mut rng, "e", c_in, d).unwrap();
        let bias = rand_matrix(&mut rng, 1, d);
        set(&mut store, layer.mlp.bias, &bias);
        let pts: Vec<[f64; 3]> = (0..8).map(|_| rng.random()).collect();
        let nb = knn(&pts, k).unwrap();
        let w = store.get(layer.mlp.weight).value.data().to_vec();

        let mut expected = vec![f64::NEG_INFINITY; 8 * d];
        for i in 0..8 {
            for &j in &nb.indices[i] {
                for o in 0..d {
                    let mut acc = bias[o];
                    for c in 0..c_in {
                        acc += (pts[j][c] - pts[i][c]) * w[c * d + o];
                    }
                    expected[i * d + o] = expected[i * d + o].max(acc.max(0.0));
                }
            }
        }

        let mut g = Graph::new();
        let fmap = FeatureMap {
            level: 0,
            features: g.constant(Tensor::from_rows(&pts)),
            neighborhood: nb,
        };
        let out = edge_conv(&mut g, &store, &layer, &fmap, k).unwrap();
        for (a, b) in g.data(out.features).iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(out.neighborhood.k, k);
    }

    #[test]
    fn edge_conv_rejects_large_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut store = ParamStore::new();
        let layer = EdgeConv::new(&mut store, &mut rng, "e", 3, 2).unwrap();
        let pts: Vec<[f64; 3]> = (0..4).map(|_| rng.random()).collect();
        let mut g = Graph::new();
        let fmap = FeatureMap {
            level: 0,
            features: g.constant(Tensor::from_rows(&pts)),
            neighborhood: knn(&pts, 3).unwrap(),
        };
        assert!(edge_conv(&mut g, &store, &layer, &fmap, 4).is_err());
    }

    fn attention_fixture(seed: u64, m: usize, w: usize) -> (ParamStore, SelfAttention, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let unit = SelfAttention::new(&mut store, &mut rng, "a", w).unwrap();
        for lin in [&unit.x, &unit.y, &unit.h] {
            let n = store.get(lin.bias).value.len();
            let b = rand_matrix(&mut rng, 1, n);
            set(&mut store, lin.bias, &b);
        }
        let f = rand_matrix(&mut rng, m, w);
        (store, unit, f)
    }

    fn run_attention(store: &ParamStore, unit: &SelfAttention, f: &[f64], m: usize, w: usize) -> Vec<f64> {
        let mut g = Graph::new();
        let x = g.constant(Tensor::new(vec![m, w], f.to_vec()).unwrap());
        let out = self_attention(&mut g, store, unit, x).unwrap();
        g.data(out).to_vec()
    }

    #[test]
    fn zero_value_path_is_identity() {
        let (mut store, unit, f) = attention_fixture(3, 6, 8);
        for id in [unit.h.weight, unit.h.bias] {
            let n = store.get(id).value.len();
            set(&mut store, id, &vec![0.0; n]);
        }
        assert_eq!(run_attention(&store, &unit, &f, 6, 8), f);
    }

    #[test]
    fn zero_query_key_gives_uniform_mixing() {
        let (mut store, unit, f) = attention_fixture(4, 5, 8);
        for id in [unit.x.weight, unit.x.bias, unit.y.weight, unit.y.bias] {
            let n = store.get(id).value.len();
            set(&mut store, id, &vec![0.0; n]);
        }
        let out = run_attention(&store, &unit, &f, 5, 8);
        let wh = store.get(unit.h.weight).value.data();
        let bh = store.get(unit.h.bias).value.data();
        let mut mean_h = [0.0; 8];
        for i in 0..5 {
            for o in 0..8 {
                let mut acc = bh[o];
                for c in 0..8 {
                    acc += f[i * 8 + c] * wh[c * 8 + o];
                }
                mean_h[o] += acc / 5.0;
            }
        }
        for i in 0..5 {
            for o in 0..8 {
                assert!((out[i * 8 + o] - (f[i * 8 + o] + mean_h[o])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn attention_matches_scalar_loops() {
        let (m, w) = (4, 8);
        let (store, unit, f) = attention_fixture(5, m, w);
        let embed = |lin: &Linear| {
            let wt = store.get(lin.weight).value.data();
            let b = store.get(lin.bias).value.data();
            let out_w = b.len();
            let mut e = vec![0.0; m * out_w];
            for i in 0..m {
                for o in 0..out_w {
                    e[i * out_w + o] = b[o] + (0..w).map(|c| f[i * w + c] * wt[c * out_w + o]).sum::<f64>();
                }
            }
            (e, out_w)
        };
        let (x, kw) = embed(&unit.x);
        let (y, _) = embed(&unit.y);
        let (h, _) = embed(&unit.h);
        let mut expected = f.clone();
        for i in 0..m {
            let logits: Vec<f64> = (0..m)
                .map(|j| (0..kw).map(|c| y[i * kw + c] * x[j * kw + c]).sum())
                .collect();
            let z: f64 = logits.iter().map(|l| l.exp()).sum();
            for j in 0..m {
                let a = logits[j].exp() / z;
                for o in 0..w {
                    expected[i * w + o] += a * h[j * w + o];
                }
            }
        }
        for (a, b) in run_attention(&store, &unit, &f, m, w).iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    fn block(store: &mut ParamStore, rate: usize, learnable: bool, width: usize) -> ExpandBlock {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let code_width = if learnable { 4 } else { 2 };
        let mlp = Linear::new(store, &mut rng, "b", width + code_width, width).unwrap();
        let learnable = learnable.then(|| {
            let codes = rand_matrix(&mut rng, rate, 2);
            store
                .register("b.codes", Tensor::new(vec![rate, 2], codes).unwrap())
                .unwrap()
        });
        ExpandBlock {
            rate,
            mlp,
            learnable,
            fixed: super::super::fixed_codes(rate, 0.2),
        }
    }

    #[test]
    fn unit_rate_block_keeps_row_count() {
        let mut store = ParamStore::new();
        let b = block(&mut store, 1, true, 6);
        let mut g = Graph::new();
        let f = g.constant(Tensor::full(&[5, 6], 0.3));
        let out = b.forward(&mut g, &store, f).unwrap();
        assert_eq!(g.shape(out), &[5, 6]);
    }

    #[test]
    fn identical_rows_expand_identically_without_learnable_codes() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let row = rand_matrix(&mut rng, 1, 6);
        let mut data = row.clone();
        data.extend_from_slice(&row);
        for learnable in [false, true] {
            let mut store = ParamStore::new();
            let b = block(&mut store, 2, learnable, 6);
            let mut g = Graph::new();
            let f = g.constant(Tensor::new(vec![2, 6], data.clone()).unwrap());
            let out = b.forward(&mut g, &store, f).unwrap();
            let rows: Vec<&[f64]> = g.data(out).chunks(6).collect();
            assert_eq!(rows.len(), 4);
            // Both source rows are identical, so both replica groups are too.
            assert_eq!(rows[0], rows[2]);
            assert_eq!(rows[1], rows[3]);
        }
    }
}
