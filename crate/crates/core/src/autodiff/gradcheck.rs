use rand::seq::index;

use super::graph::Graph;
use super::params::ParamStore;
use super::Value;
use crate::error::{invalid, Error, Result};
use crate::rng;

/// Which parameter entries a gradient check perturbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotSelection {
    All,
    /// At most this many entries per parameter, drawn with the given seed.
    Sample { per_param: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// `name[index]` of the worst entry.
    pub worst_slot: String,
    pub analytic: f64,
    pub numeric: f64,
    pub slots_checked: usize,
}

/// Compare reverse-mode gradients of `f` against central differences.
///
/// `f` builds the scalar to differentiate from the parameters in `store`.
/// Relative error per entry is `|a - n| / max(1, |a|, |n|)`.
pub fn grad_check<F>(store: &ParamStore, eps: f64, slots: SlotSelection, f: F) -> Result<GradCheckReport>
where
    F: Fn(&ParamStore, &mut Graph) -> Result<Value>,
{
    if !(1e-5..=1e-2).contains(&eps) {
        return Err(invalid(format!("finite-difference step {eps} outside [1e-5, 1e-2]")));
    }
    let eval = |s: &ParamStore| -> Result<f64> {
        let mut g = Graph::new();
        let root = f(s, &mut g)?;
        Ok(g.item(root))
    };

    let mut g = Graph::new();
    let root = f(store, &mut g)?;
    let base = g.item(root);
    g.backward(root)?;
    let analytic = g.param_grads(store);
    let again = eval(store)?;
    if base.to_bits() != again.to_bits() {
        return Err(Error::NonDeterministic {
            first: base,
            second: again,
        });
    }

    let mut probe = store.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_slot: String::new(),
        analytic: 0.0,
        numeric: 0.0,
        slots_checked: 0,
    };
    for id in store.ids() {
        let n = store.get(id).value.len();
        let chosen: Vec<usize> = match slots {
            SlotSelection::All => (0..n).collect(),
            SlotSelection::Sample { per_param, seed } if per_param < n => {
                let mut s = rng::stream(seed, &[id.0 as u64]);
                let mut v = index::sample(&mut s, n, per_param).into_vec();
                v.sort_unstable();
                v
            }
            SlotSelection::Sample { .. } => (0..n).collect(),
        };
        for i in chosen {
            let orig = store.get(id).value.data()[i];
            probe.get_mut(id).value.data_mut()[i] = orig + eps;
            let plus = eval(&probe)?;
            probe.get_mut(id).value.data_mut()[i] = orig - eps;
            let minus = eval(&probe)?;
            probe.get_mut(id).value.data_mut()[i] = orig;

            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic.get(id)[i];
            let err = (a - numeric).abs() / 1f64.max(a.abs()).max(numeric.abs());
            report.slots_checked += 1;
            if err > report.max_relative_error || report.worst_slot.is_empty() {
                report.max_relative_error = err;
                report.worst_slot = format!("{}[{i}]", store.get(id).name);
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}
