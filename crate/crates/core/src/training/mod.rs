//! Optimization loop, checkpointing and whole-cloud inference.

mod checkpoint;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{grad_check, GradCheckReport, Gradients, Graph, ParamStore, SlotSelection, Tensor, Value};
use crate::error::{invalid, Error, Result};
use crate::geometry::{denormalize, downsample_coarse, fps, geodesic_patches, Point3, PointCloud};
use crate::loss::{joint_loss, LossWeights, SelfProjectionConfig, UniformConfig};
use crate::network::{NetworkConfig, SpuNet};
use crate::rng;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Everything that determines a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Points per input patch.
    pub patch_size: usize,
    pub patches_per_model: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr0: f64,
    pub decay_rate: f64,
    /// Optimizer steps between learning-rate decays.
    pub decay_every: u64,
    pub lr_floor: f64,
    /// Neighbors per point in the graph used to grow geodesic patches.
    pub graph_k: usize,
    pub weights: LossWeights,
    pub net: NetworkConfig,
    pub uniform: UniformConfig,
    pub sp: SelfProjectionConfig,
    pub seed: u64,
}

impl TrainConfig {
    /// Full-size settings: 256-point patches, batch 24, 200 epochs.
    pub fn full() -> Self {
        Self {
            patch_size: 256,
            patches_per_model: 24,
            batch_size: 24,
            epochs: 200,
            lr0: 1e-4,
            decay_rate: 0.7,
            decay_every: 50_000,
            lr_floor: 1e-6,
            graph_k: 5,
            weights: LossWeights::default(),
            net: NetworkConfig::full(),
            uniform: UniformConfig::full(),
            sp: SelfProjectionConfig::default(),
            seed: 0,
        }
    }

    /// CPU-sized settings: 64-point patches, batch 4.
    pub fn desk() -> Self {
        Self {
            patch_size: 64,
            patches_per_model: 8,
            batch_size: 4,
            epochs: 100,
            lr0: 1e-3,
            net: NetworkConfig::desk(),
            uniform: UniformConfig::desk(),
            ..Self::full()
        }
    }

    pub fn rate(&self) -> usize {
        self.net.r
    }

    pub fn validate(&self) -> Result<()> {
        self.net.validate()?;
        self.weights.validate()?;
        self.uniform.validate()?;
        if !(self.lr_floor > 0.0 && self.lr0 > self.lr_floor) {
            return Err(invalid("learning rates need lr0 > lr_floor > 0"));
        }
        if !(self.decay_rate > 0.0 && self.decay_rate < 1.0) {
            return Err(invalid("decay_rate must lie in (0, 1)"));
        }
        if self.decay_every == 0 {
            return Err(invalid("decay_every must be positive"));
        }
        let r = self.rate();
        if !self.patch_size.is_multiple_of(r) {
            return Err(invalid(format!("patch size {} is not a multiple of r={r}", self.patch_size)));
        }
        if self.patch_size / r <= self.net.k {
            return Err(invalid(format!(
                "coarse patches of {} points are too small for k={}",
                self.patch_size / r,
                self.net.k
            )));
        }
        if self.sp.k == 0 || self.sp.k >= self.patch_size {
            return Err(invalid("self-projection k must lie in 1..patch_size"));
        }
        if self.batch_size == 0 || self.patches_per_model == 0 || self.graph_k == 0 {
            return Err(invalid("batch_size, patches_per_model and graph_k must be positive"));
        }
        Ok(())
    }

    /// `max(lr_floor, lr0 * decay_rate^floor(step / decay_every))`.
    pub fn lr_schedule(&self, step: u64) -> f64 {
        let decays = (step / self.decay_every).min(i32::MAX as u64) as i32;
        (self.lr0 * self.decay_rate.powi(decays)).max(self.lr_floor)
    }
}

/// One Adam update with bias correction; `step` counts from 0. Gradients are
/// zeroed afterward. Any non-finite gradient aborts before touching the
/// parameters.
pub fn adam_step(store: &mut ParamStore, grads: &mut Gradients, lr: f64, step: u64) -> Result<()> {
    for (id, g) in grads.iter() {
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("gradient of parameter {}", store.get(id).name)));
        }
    }
    let t = step as f64 + 1.0;
    let c1 = 1.0 - ADAM_BETA1.powf(t);
    let c2 = 1.0 - ADAM_BETA2.powf(t);
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let g = grads.get(id);
        let p = store.get_mut(id);
        let (value, m, v) = (p.value.data_mut(), &mut p.adam_m, &mut p.adam_v);
        for i in 0..g.len() {
            m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
            v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
            value[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + ADAM_EPS);
        }
    }
    grads.clear();
    Ok(())
}

/// Batch-mean losses of one optimizer step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub step: u64,
    pub lr: f64,
    pub total: f64,
    pub reconstruction: f64,
    pub uniform: f64,
    pub self_projection: f64,
}

impl fmt::Display for StepStats {
    /// The training log line format.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "step={} lr={:e} total={:?} rec={:?} uni={:?} sp={:?}",
            self.step, self.lr, self.total, self.reconstruction, self.uniform, self.self_projection
        )
    }
}

/// Network, parameters and step counter of a training run.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub config: TrainConfig,
    pub net: SpuNet,
    pub store: ParamStore,
    /// Optimizer steps taken so far.
    pub step: u64,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let (net, store) = SpuNet::new(config.net.clone(), config.seed)?;
        Ok(Self {
            config,
            net,
            store,
            step: 0,
        })
    }

    /// Losses and parameter gradients of one batch at the current step,
    /// without updating anything.
    pub fn evaluate_batch(&self, batch: &[&[Point3]]) -> Result<(StepStats, Gradients)> {
        if batch.is_empty() {
            return Err(invalid("empty training batch"));
        }
        let per_patch: Vec<([f64; 4], Gradients)> = batch
            .par_iter()
            .enumerate()
            .map(|(slot, patch)| self.patch_pass(patch, slot as u64))
            .collect::<Result<_>>()?;
        let mut grads = Gradients::zeros(&self.store);
        let mut sums = [0.0; 4];
        for (terms, g) in &per_patch {
            grads.merge(g);
            for (s, t) in sums.iter_mut().zip(terms) {
                *s += t;
            }
        }
        let inv = 1.0 / batch.len() as f64;
        grads.scale(inv);
        let stats = StepStats {
            step: self.step,
            lr: self.config.lr_schedule(self.step),
            total: sums[0] * inv,
            reconstruction: sums[1] * inv,
            uniform: sums[2] * inv,
            self_projection: sums[3] * inv,
        };
        if !stats.total.is_finite() {
            return Err(Error::NonFinite(format!("loss at step {}", self.step)));
        }
        Ok((stats, grads))
    }

    /// Forward, backward and one Adam update.
    pub fn train_step(&mut self, batch: &[&[Point3]]) -> Result<StepStats> {
        let (stats, mut grads) = self.evaluate_batch(batch)?;
        adam_step(&mut self.store, &mut grads, stats.lr, self.step)?;
        self.step += 1;
        Ok(stats)
    }

    /// Downsample, reconstruct `r` fine patches and backpropagate the joint
    /// loss for one normalized patch. Randomness is keyed by (step, slot).
    fn patch_pass(&self, patch: &[Point3], slot: u64) -> Result<([f64; 4], Gradients)> {
        let cfg = &self.config;
        if patch.len() != cfg.patch_size {
            return Err(invalid(format!(
                "patch has {} points, expected {}",
                patch.len(),
                cfg.patch_size
            )));
        }
        let mut g = Graph::new();
        let seed = rng::derive(cfg.seed, &[rng::tag::DOWNSAMPLE, self.step, slot]);
        let fine = self.reconstruct(&mut g, patch, seed)?;
        let s = g.constant(Tensor::from_rows(patch));
        let start = rng::stream(cfg.seed, &[rng::tag::UNIFORM_SEEDS, self.step, slot])
            .random_range(0..cfg.rate() * patch.len());
        let loss = joint_loss(&mut g, s, &fine, &cfg.weights, &cfg.uniform, &cfg.sp, start)?;
        g.backward(loss.total)?;
        let terms = [loss.total, loss.reconstruction, loss.uniform, loss.self_projection].map(|v| g.item(v));
        Ok((terms, g.param_grads(&self.store)))
    }

    /// The `r` fine patches reconstructed from the coarse subsets of `patch`.
    pub fn reconstruct(&self, g: &mut Graph, patch: &[Point3], seed: u64) -> Result<Vec<Value>> {
        downsample_coarse(patch, self.config.rate(), seed)?
            .iter()
            .map(|subset| {
                let coarse: Vec<Point3> = subset.iter().map(|&i| patch[i]).collect();
                self.net.coarse_to_fine(&self.store, g, &coarse)
            })
            .collect()
    }

    /// Patch indices of the batch taken at `step`. Patch order is reshuffled
    /// every epoch; the last batch of an epoch may be short.
    pub fn batch_indices(&self, n_patches: usize, step: u64) -> Vec<usize> {
        let b = self.config.batch_size.min(n_patches).max(1);
        let per_epoch = n_patches.div_ceil(b) as u64;
        let epoch = step / per_epoch;
        let mut order: Vec<usize> = (0..n_patches).collect();
        order.shuffle(&mut rng::stream(self.config.seed, &[rng::tag::SHUFFLE, epoch]));
        let first = (step % per_epoch) as usize * b;
        order[first..(first + b).min(n_patches)].to_vec()
    }

    /// Optimizer steps in the configured number of epochs.
    pub fn total_steps(&self, n_patches: usize) -> u64 {
        let b = self.config.batch_size.min(n_patches).max(1);
        (n_patches.div_ceil(b) * self.config.epochs) as u64
    }

    /// Train until `self.step == until`, reporting every step.
    pub fn fit(
        &mut self,
        patches: &[Vec<Point3>],
        until: u64,
        mut on_step: impl FnMut(&Trainer, &StepStats) -> Result<()>,
    ) -> Result<()> {
        if patches.is_empty() {
            return Err(invalid("no training patches"));
        }
        while self.step < until {
            let idx = self.batch_indices(patches.len(), self.step);
            let batch: Vec<&[Point3]> = idx.iter().map(|&i| patches[i].as_slice()).collect();
            let stats = self.train_step(&batch)?;
            on_step(self, &stats)?;
        }
        Ok(())
    }

    /// Normalized training patches cropped from each cloud.
    pub fn make_patches(&self, clouds: &[PointCloud]) -> Result<Vec<Vec<Point3>>> {
        let cfg = &self.config;
        let mut out = Vec::new();
        for cloud in clouds {
            let n = cfg.patches_per_model.min(cloud.len());
            for p in geodesic_patches(cloud, n, cfg.patch_size, cfg.graph_k)? {
                out.push(p.points);
            }
        }
        Ok(out)
    }

    /// Upsample a whole cloud to `r` times its size. See [`upsample_cloud`].
    pub fn upsample(&self, cloud: &PointCloud) -> Result<PointCloud> {
        upsample_cloud(&self.net, &self.store, &self.config, cloud)
    }
}

/// Patches are seeded so that, on average, every point is covered this many
/// times during inference.
pub const INFERENCE_OVERLAP: usize = 3;

/// Crop overlapping geodesic patches, upsample each through the network,
/// map back to model space, merge, and reduce to exactly `r * |cloud|`
/// points by FPS.
pub fn upsample_cloud(net: &SpuNet, store: &ParamStore, cfg: &TrainConfig, cloud: &PointCloud) -> Result<PointCloud> {
    let n = cfg.patch_size;
    if cloud.len() < n {
        return Err(invalid(format!(
            "cloud of {} points is smaller than one {n}-point patch",
            cloud.len()
        )));
    }
    let r = net.config.r;
    let n_patches = (INFERENCE_OVERLAP * cloud.len()).div_ceil(n).min(cloud.len());
    let patches = geodesic_patches(cloud, n_patches, n, cfg.graph_k)?;
    let outputs: Vec<Vec<Point3>> = patches
        .par_iter()
        .enumerate()
        .map(|(i, patch)| {
            let mut g = Graph::new();
            let seed = rng::derive(cfg.seed, &[rng::tag::EVAL, i as u64]);
            let mut pts = Vec::with_capacity(r * n);
            for subset in downsample_coarse(&patch.points, r, seed)? {
                let coarse: Vec<Point3> = subset.iter().map(|&j| patch.points[j]).collect();
                let q = net.coarse_to_fine(store, &mut g, &coarse)?;
                pts.extend(g.tensor(q).to_points());
            }
            Ok(denormalize(&pts, patch.center, patch.scale))
        })
        .collect::<Result<_>>()?;
    let merged: Vec<Point3> = outputs.into_iter().flatten().collect();
    let target = r * cloud.len();
    let keep = fps(&merged, target, 0)?;
    PointCloud::new(keep.into_iter().map(|i| merged[i]).collect())
}

/// Shrink neighborhood sizes of `base` so that a `patch_size`-point patch is
/// valid input; everything else is kept.
pub fn gradcheck_config(base: &TrainConfig, patch_size: usize) -> TrainConfig {
    let mut cfg = base.clone();
    cfg.patch_size = patch_size;
    let coarse = patch_size / cfg.rate().max(1);
    cfg.net.k = cfg.net.k.min(coarse.saturating_sub(1)).max(2);
    cfg.sp.k = cfg.sp.k.min(patch_size.saturating_sub(1)).max(1);
    cfg
}

/// Finite-difference check of every network parameter through the full
/// downsample, reconstruct and joint-loss path on one normalized patch.
pub fn network_grad_check(
    cfg: &TrainConfig,
    patch: &[Point3],
    eps: f64,
    slots: SlotSelection,
) -> Result<GradCheckReport> {
    let trainer = Trainer::new(cfg.clone())?;
    if patch.len() != cfg.patch_size {
        return Err(invalid(format!(
            "patch has {} points, expected {}",
            patch.len(),
            cfg.patch_size
        )));
    }
    let subsets = downsample_coarse(patch, cfg.rate(), rng::derive(cfg.seed, &[rng::tag::DOWNSAMPLE]))?;
    let coarse: Vec<Vec<Point3>> = subsets
        .iter()
        .map(|s| s.iter().map(|&i| patch[i]).collect())
        .collect();
    grad_check(&trainer.store, eps, slots, |store, g| {
        let fine = coarse
            .iter()
            .map(|c| trainer.net.coarse_to_fine(store, g, c))
            .collect::<Result<Vec<_>>>()?;
        let s = g.constant(Tensor::from_rows(patch));
        Ok(joint_loss(g, s, &fine, &cfg.weights, &cfg.uniform, &cfg.sp, 0)?.total)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives;
    use crate::io::{sample_mesh, SampleMode};

    fn toy_config() -> TrainConfig {
        TrainConfig {
            patch_size: 32,
            batch_size: 2,
            patches_per_model: 4,
            net: NetworkConfig {
                k: 4,
                d: 8,
                c: 16,
                c_prime: 8,
                head_hidden: 8,
                ..NetworkConfig::desk()
            },
            ..TrainConfig::desk()
        }
    }

    fn toy_patches(cfg: &TrainConfig) -> Vec<Vec<Point3>> {
        let cloud = sample_mesh(&primitives::icosphere(1.0, 2), 128, SampleMode::PoissonDisk, 1).unwrap();
        Trainer::new(cfg.clone()).unwrap().make_patches(&[cloud]).unwrap()
    }

    #[test]
    fn schedule_values() {
        let cfg = TrainConfig::full();
        assert_eq!(cfg.lr_schedule(0), 1e-4);
        assert_eq!(cfg.lr_schedule(49_999), 1e-4);
        assert!((cfg.lr_schedule(50_000) - 7e-5).abs() < 1e-18);
        assert_eq!(cfg.lr_schedule(u64::MAX), 1e-6);
        let mut prev = f64::INFINITY;
        for step in (0..2_000_000).step_by(10_000) {
            let lr = cfg.lr_schedule(step);
            assert!(lr <= prev && lr >= cfg.lr_floor);
            prev = lr;
        }
    }

    fn bowl(values: &[f64]) -> (ParamStore, Gradients) {
        let mut store = ParamStore::new();
        store
            .register("theta", Tensor::new(vec![values.len()], values.to_vec()).unwrap())
            .unwrap();
        let grads = Gradients::zeros(&store);
        (store, grads)
    }

    fn bowl_grads(store: &ParamStore) -> Gradients {
        let mut g = Graph::new();
        let id = store.find("theta").unwrap();
        let theta = g.param(store, id);
        let sq = g.square(theta);
        let loss = g.sum(sq);
        g.backward(loss).unwrap();
        g.param_grads(store)
    }

    #[test]
    fn adam_minimizes_a_bowl() {
        let (mut store, _) = bowl(&[1.0, -1.0, 0.5]);
        for step in 0..500 {
            let mut grads = bowl_grads(&store);
            adam_step(&mut store, &mut grads, 1e-2, step).unwrap();
        }
        let norm: f64 = store.iter().next().unwrap().value.data().iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(norm < 1e-3, "norm {norm}");
    }

    #[test]
    fn adam_zero_gradient_and_unit_step() {
        let (mut store, mut grads) = bowl(&[1.0, 2.0]);
        adam_step(&mut store, &mut grads, 0.1, 0).unwrap();
        assert_eq!(store.iter().next().unwrap().value.data(), &[1.0, 2.0]);

        let (mut store, _) = bowl(&[0.0]);
        let id = store.find("theta").unwrap();
        let mut last = 0.0;
        for step in 0..200 {
            let mut grads = Gradients::zeros(&store);
            grads.add(id, &[3.0]);
            let before = store.get(id).value.data()[0];
            adam_step(&mut store, &mut grads, 1e-3, step).unwrap();
            last = before - store.get(id).value.data()[0];
            assert!(grads.get(id).iter().all(|&x| x == 0.0));
        }
        assert!((last - 1e-3).abs() < 1e-9, "{last}");
    }

    #[test]
    fn nan_gradient_names_the_parameter() {
        let (mut store, mut grads) = bowl(&[1.0]);
        grads.add(store.find("theta").unwrap(), &[f64::NAN]);
        let err = adam_step(&mut store, &mut grads, 0.1, 0).unwrap_err();
        assert!(err.to_string().contains("theta"), "{err}");
    }

    #[test]
    fn same_seed_same_losses() {
        let cfg = toy_config();
        let patches = toy_patches(&cfg);
        let run = || {
            let mut t = Trainer::new(cfg.clone()).unwrap();
            let mut losses = Vec::new();
            t.fit(&patches, 5, |_, s| {
                losses.push(s.total);
                Ok(())
            })
            .unwrap();
            losses
        };
        let a = run();
        assert_eq!(a, run());
        assert!(a.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn batches_cover_each_epoch() {
        let t = Trainer::new(toy_config()).unwrap();
        let mut seen: Vec<usize> = (0..3).flat_map(|s| t.batch_indices(5, s)).collect();
        seen.sort();
        assert_eq!(seen, vec![0, 1, 2, 3, 4]);
        assert_ne!(t.batch_indices(5, 0), t.batch_indices(5, 3));
    }

    #[test]
    fn upsample_count_contract() {
        let cfg = toy_config();
        let t = Trainer::new(cfg).unwrap();
        let cloud = sample_mesh(&primitives::icosphere(1.0, 2), 100, SampleMode::AreaWeighted, 2).unwrap();
        assert_eq!(t.upsample(&cloud).unwrap().len(), 400);
        let small = PointCloud::new(cloud.points()[..20].to_vec()).unwrap();
        assert!(t.upsample(&small).is_err());
    }

    #[test]
    fn rejects_inconsistent_configs() {
        let mut cfg = TrainConfig::desk();
        cfg.lr_floor = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = TrainConfig::desk();
        cfg.patch_size = 66;
        assert!(cfg.validate().is_err());
        let mut cfg = TrainConfig::desk();
        cfg.patch_size = 16;
        assert!(cfg.validate().is_err());
        assert!(TrainConfig::full().validate().is_ok());
    }
}
