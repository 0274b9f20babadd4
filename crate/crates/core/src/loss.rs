//! Differentiable training objectives: reconstruction (Chamfer), uniformity
//! and self-projection, plus their weighted sum.
//!
//! Discrete choices (nearest partners, FPS seeds, ball membership, k-NN
//! neighborhoods) are made on the forward values and held fixed; gradients
//! flow through the continuous distances only.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Tensor, Value};
use crate::error::{invalid, Result};
use crate::geometry::{dist2, fps, knn, KdTree, Point3};

/// Seeds and disk sizes of the uniformity statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformConfig {
    /// Number of FPS seeds per disk size.
    pub seeds: usize,
    /// Area fractions `p`; each disk has radius `sqrt(p)`.
    pub p_values: Vec<f64>,
}

impl UniformConfig {
    pub fn full() -> Self {
        Self {
            seeds: 50,
            p_values: vec![0.004, 0.006, 0.008, 0.010, 0.012],
        }
    }

    pub fn desk() -> Self {
        Self {
            seeds: 8,
            ..Self::full()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds == 0 {
            return Err(invalid("uniform term needs at least one seed"));
        }
        if self.p_values.is_empty() || self.p_values.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
            return Err(invalid("uniform p values must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfProjectionConfig {
    /// Neighbors per local region.
    pub k: usize,
}

impl Default for SelfProjectionConfig {
    fn default() -> Self {
        Self { k: 8 }
    }
}

/// Weights of reconstruction, uniform and self-projection terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            alpha: 100.0,
            beta: 10.0,
            gamma: 0.01,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let w = [self.alpha, self.beta, self.gamma];
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(invalid("loss weights must be finite and non-negative"));
        }
        if w.iter().all(|&x| x == 0.0) {
            return Err(invalid("at least one loss weight must be positive"));
        }
        Ok(())
    }
}

/// Symmetric mean nearest-neighbor distance (un-squared).
pub fn chamfer(g: &mut Graph, s: Value, q: Value) -> Result<Value> {
    let sp = g.tensor(s).to_points();
    let qp = g.tensor(q).to_points();
    if sp.is_empty() || qp.is_empty() {
        return Err(invalid("chamfer distance of an empty set"));
    }
    let s_to_q = nearest_indices(&sp, &qp);
    let q_to_s = nearest_indices(&qp, &sp);
    let a = mean_partner_distance(g, s, q, &s_to_q)?;
    let b = mean_partner_distance(g, q, s, &q_to_s)?;
    g.add(a, b)
}

/// For each query point, the index of its nearest point in `target`.
pub(crate) fn nearest_indices(query: &[Point3], target: &[Point3]) -> Vec<usize> {
    let tree = KdTree::new(target);
    query.iter().map(|p| tree.nearest_one(p).1).collect()
}

fn row_distances(g: &mut Graph, a: Value, b: Value) -> Result<Value> {
    let diff = g.sub(a, b)?;
    let sq = g.square(diff);
    let d2 = g.reduce_sum(sq, 1)?;
    Ok(g.sqrt(d2))
}

fn mean_partner_distance(g: &mut Graph, from: Value, to: Value, partner: &[usize]) -> Result<Value> {
    let matched = g.gather(to, partner)?;
    let d = row_distances(g, from, matched)?;
    g.mean(d)
}

/// One FPS-seeded disk of the uniformity statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformRegion {
    /// Indices of the points strictly inside the disk.
    pub members: Vec<usize>,
    /// For each member, the index of its nearest other member.
    pub nearest: Vec<usize>,
    /// Expected count `|T| r_d^2`.
    pub n_hat: f64,
    /// `(|T_j| - n_hat)^2 / n_hat`.
    pub count_term: f64,
    /// Expected nearest-neighbor spacing for this region's count.
    pub d_hat: f64,
}

/// Build the disks of area fraction `p` around `seeds` FPS seeds, the first
/// seed at `start`.
pub fn uniform_regions(points: &[Point3], seeds: usize, p: f64, start: usize) -> Result<Vec<UniformRegion>> {
    let n = points.len();
    let seeds = fps(points, seeds.min(n), start % n)?;
    let tree = KdTree::new(points);
    let radius = p.sqrt();
    let n_hat = n as f64 * radius * radius;
    Ok(seeds
        .into_iter()
        .map(|seed| {
            let members = tree.within(&points[seed], radius);
            let nearest = members
                .iter()
                .map(|&i| {
                    members
                        .iter()
                        .copied()
                        .filter(|&j| j != i)
                        .map(|j| (dist2(&points[i], &points[j]), j))
                        .min_by(crate::geometry::cmp_hit)
                        .map_or(i, |h| h.1)
                })
                .collect();
            let count = members.len() as f64;
            let d_hat = (2.0 * std::f64::consts::PI * radius * radius / (count * 3f64.sqrt())).sqrt();
            UniformRegion {
                members,
                nearest,
                n_hat,
                count_term: (count - n_hat).powi(2) / n_hat,
                d_hat,
            }
        })
        .collect())
}

/// Chi-square uniformity of `t`, averaged over the configured disk sizes.
///
/// Regions with fewer than two points have no spacing term and contribute
/// zero.
pub fn uniform_term(g: &mut Graph, t: Value, cfg: &UniformConfig, start: usize) -> Result<Value> {
    cfg.validate()?;
    let pts = g.tensor(t).to_points();
    if pts.is_empty() {
        return Err(invalid("uniform term of an empty set"));
    }
    let mut terms = Vec::with_capacity(cfg.p_values.len());
    for &p in &cfg.p_values {
        let regions = uniform_regions(&pts, cfg.seeds, p, start)?;
        let mut members = Vec::new();
        let mut partners = Vec::new();
        let mut d_hat = Vec::new();
        let mut weight = Vec::new();
        for r in regions.iter().filter(|r| r.members.len() >= 2) {
            members.extend_from_slice(&r.members);
            partners.extend_from_slice(&r.nearest);
            d_hat.extend(std::iter::repeat_n(r.d_hat, r.members.len()));
            weight.extend(std::iter::repeat_n(r.count_term / r.d_hat, r.members.len()));
        }
        if members.is_empty() {
            terms.push(g.constant(Tensor::scalar(0.0)));
            continue;
        }
        let a = g.gather(t, &members)?;
        let b = g.gather(t, &partners)?;
        let d = row_distances(g, a, b)?;
        let n = members.len();
        let d_hat = g.constant(Tensor::new(vec![n], d_hat)?);
        let weight = g.constant(Tensor::new(vec![n], weight)?);
        let dev = g.sub(d, d_hat)?;
        let dev = g.square(dev);
        let weighted = g.mul(dev, weight)?;
        terms.push(g.sum(weighted));
    }
    let rows = terms
        .iter()
        .map(|&v| g.reshape(v, &[1]))
        .collect::<Result<Vec<_>>>()?;
    let stacked = g.concat(&rows, 0)?;
    g.mean(stacked)
}

/// Self-projection regularizer.
///
/// For each point `q_i` with k-NN region `N_i` and region centroid `c_i`,
/// sums `|d2(q_i, q_j) - d2(c_i, q_j)| / (1 + d2(q_i, q_j))` over `j` in
/// `N_i`, normalized by `|Q| * k`.
pub fn self_projection_term(g: &mut Graph, q: Value, cfg: &SelfProjectionConfig) -> Result<Value> {
    let pts = g.tensor(q).to_points();
    let n = pts.len();
    let k = cfg.k;
    if k < 2 || k >= n {
        return Err(invalid(format!(
            "self-projection needs 2 <= k < point count, got k={k} for {n} points"
        )));
    }
    let graph = knn(&pts, k)?;
    let neighbors = graph.flat_indices();
    let centers: Vec<usize> = (0..n).flat_map(|i| std::iter::repeat_n(i, k)).collect();
    let qj = g.gather(q, &neighbors)?;
    let grouped = g.reshape(qj, &[n, k, 3])?;
    let centroid = g.reduce_mean(grouped, 1)?;
    let qi = g.gather(q, &centers)?;
    let ci = g.gather(centroid, &centers)?;
    let real = squared_row_distances(g, qi, qj)?;
    let target = squared_row_distances(g, ci, qj)?;
    let gap = g.sub(real, target)?;
    let gap = g.abs(gap);
    let denom = g.add_scalar(real, 1.0)?;
    let inv = g.reciprocal(denom);
    let contrib = g.mul(gap, inv)?;
    let total = g.sum(contrib);
    g.scale(total, 1.0 / (n * k) as f64)
}

fn squared_row_distances(g: &mut Graph, a: Value, b: Value) -> Result<Value> {
    let diff = g.sub(a, b)?;
    let sq = g.square(diff);
    g.reduce_sum(sq, 1)
}

/// Weighted loss plus its unweighted terms.
#[derive(Debug, Clone, Copy)]
pub struct JointLoss {
    pub total: Value,
    pub reconstruction: Value,
    pub uniform: Value,
    pub self_projection: Value,
}

/// `alpha * mean_j CD(S, Q_j) + beta * U(T) + gamma * mean_j SP(Q_j)` with
/// `T` the concatenation of the fine patches.
pub fn joint_loss(
    g: &mut Graph,
    s: Value,
    fine: &[Value],
    weights: &LossWeights,
    uniform: &UniformConfig,
    sp: &SelfProjectionConfig,
    uniform_start: usize,
) -> Result<JointLoss> {
    if fine.is_empty() {
        return Err(invalid("joint loss needs at least one fine patch"));
    }
    let mut rec = Vec::with_capacity(fine.len());
    let mut proj = Vec::with_capacity(fine.len());
    for &q in fine {
        let c = chamfer(g, s, q)?;
        rec.push(g.reshape(c, &[1])?);
        let p = self_projection_term(g, q, sp)?;
        proj.push(g.reshape(p, &[1])?);
    }
    let rec = g.concat(&rec, 0)?;
    let reconstruction = g.mean(rec)?;
    let proj = g.concat(&proj, 0)?;
    let self_projection = g.mean(proj)?;
    let t = g.concat(fine, 0)?;
    let uniform = uniform_term(g, t, uniform, uniform_start)?;

    let a = g.scale(reconstruction, weights.alpha)?;
    let b = g.scale(uniform, weights.beta)?;
    let c = g.scale(self_projection, weights.gamma)?;
    let ab = g.add(a, b)?;
    let total = g.add(ab, c)?;
    Ok(JointLoss {
        total,
        reconstruction,
        uniform,
        self_projection,
    })
}
