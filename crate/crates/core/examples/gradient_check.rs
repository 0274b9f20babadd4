//! Finite-difference check of the network and joint loss on a 16-point patch.

use spunet::autodiff::SlotSelection;
use spunet::cli::gradcheck_patch;
use spunet::training::{gradcheck_config, network_grad_check, TrainConfig};

pub fn main() {
    let cfg = gradcheck_config(&TrainConfig::desk(), 16);
    let patch = gradcheck_patch(16, 0).expect("patch");
    let report = network_grad_check(&cfg, &patch, 1e-5, SlotSelection::Sample { per_param: 8, seed: 0 })
        .expect("gradient check runs");
    println!(
        "{} entries checked, max relative error {:e} at {}",
        report.slots_checked, report.max_relative_error, report.worst_slot
    );
    assert!(report.max_relative_error < 1e-4);
}
