//! Greedy whole-tensor distribution of optimizer state across devices.
//!
//! Each tensor travels as one unit together with its scale, so no device
//! ever holds a scale without the payload it belongs to. Tensors are placed
//! largest-first onto the currently least-loaded device, the classic LPT
//! heuristic, which keeps the spread between the fullest and emptiest device
//! below one tensor size.

use crate::error::{Error, Result};
use crate::tensor::ScaledTensor;

/// One tensor as the distributor sees it: an id, its wire size, and the
/// scale that must travel with it.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorDescriptor {
    pub id: usize,
    pub size_bytes: u64,
    pub scale: f64,
}

impl TensorDescriptor {
    pub fn new(id: usize, size_bytes: u64, scale: f64) -> TensorDescriptor {
        assert!(size_bytes > 0, "tensor {id} has zero size");
        TensorDescriptor { id, size_bytes, scale }
    }

    /// Describe an existing scaled tensor: payload bytes plus the 8-byte
    /// scale that rides along.
    pub fn for_scaled_tensor(id: usize, tensor: &ScaledTensor) -> TensorDescriptor {
        TensorDescriptor::new(id, tensor.len() as u64 + 8, tensor.scale())
    }
}

/// Assignment of every tensor to exactly one device.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroPlan {
    /// Per-device tensor lists, in placement order.
    pub partitions: Vec<Vec<TensorDescriptor>>,
    /// Per-device total bytes; always equals the sum of the partition sizes.
    pub loads: Vec<u64>,
}

/// Load-balance summary of a plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanStats {
    pub min_load: u64,
    pub max_load: u64,
    /// (max − min) / max, or 0 for an all-empty plan.
    pub imbalance_ratio: f64,
}

/// Place each tensor, largest first, on the device with the least load.
///
/// Ties in the size sort break by ascending id and ties in the device choice
/// by lowest device index, so identical inputs always produce identical
/// plans.
pub fn greedy_distribute(tensors: &[TensorDescriptor], n_devices: usize) -> Result<ZeroPlan> {
    if n_devices < 1 {
        return Err(Error::Empty("device"));
    }
    let mut order: Vec<&TensorDescriptor> = tensors.iter().collect();
    order.sort_by(|a, b| b.size_bytes.cmp(&a.size_bytes).then(a.id.cmp(&b.id)));

    let mut partitions = vec![Vec::new(); n_devices];
    let mut loads = vec![0u64; n_devices];
    for tensor in order {
        let device = loads
            .iter()
            .enumerate()
            .min_by_key(|&(i, &load)| (load, i))
            .map(|(i, _)| i)
            .expect("at least one device");
        loads[device] += tensor.size_bytes;
        partitions[device].push(tensor.clone());
    }
    Ok(ZeroPlan { partitions, loads })
}

/// Min/max device loads and their relative spread.
pub fn plan_stats(plan: &ZeroPlan) -> PlanStats {
    let min_load = plan.loads.iter().copied().min().unwrap_or(0);
    let max_load = plan.loads.iter().copied().max().unwrap_or(0);
    let imbalance_ratio = if max_load == 0 {
        0.0
    } else {
        (max_load - min_load) as f64 / max_load as f64
    };
    PlanStats { min_load, max_load, imbalance_ratio }
}
