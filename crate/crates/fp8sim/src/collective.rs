//! Simulated gradient all-reduce over 8-bit payloads.
//!
//! Four reduction protocols over N workers' gradient tensors:
//!
//! - pre-scaling: divide each gradient by N, quantize, sum. Small values get
//!   N times smaller before they meet the format floor, so underflow is the
//!   failure mode.
//! - post-scaling: quantize raw gradients, sum, divide by N afterwards. The
//!   running sums grow toward the format ceiling, so overflow is the failure
//!   mode.
//! - auto-scaling: multiply gradients by a global factor mu before the
//!   post-scaling sum and divide by N*mu at the end. A controller lowers mu
//!   when too many elements hit the top code and raises it slowly toward 2
//!   otherwise, steering between the two failure modes.
//! - shared-scale: operate on per-tensor scaled payloads, align every worker
//!   to the smallest scale, sum payloads, and emit scale N*s_min. This is the
//!   protocol that keeps per-tensor scaling intact end to end.
//!
//! All sums requantize after every pairwise addition in ascending worker
//! order, mimicking a ring reduction that stores intermediates in FP8.

use crate::codec::Fp8Format;
use crate::error::{Error, Result};
use crate::tensor::{QuantCounts, ScaledTensor};

/// Per-worker gradient tensors of equal length, kept in f64 so the exact
/// mean is always available as the oracle.
#[derive(Debug, Clone)]
pub struct WorkerSet {
    gradients: Vec<Vec<f64>>,
}

impl WorkerSet {
    pub fn new(gradients: Vec<Vec<f64>>) -> Result<WorkerSet> {
        if gradients.is_empty() {
            return Err(Error::Empty("worker"));
        }
        let len = gradients[0].len();
        for g in &gradients {
            if g.len() != len {
                return Err(Error::MismatchedWorkers { expected: len, got: g.len() });
            }
        }
        Ok(WorkerSet { gradients })
    }

    pub fn n_workers(&self) -> usize {
        self.gradients.len()
    }

    pub fn tensor_len(&self) -> usize {
        self.gradients[0].len()
    }

    pub fn gradients(&self) -> &[Vec<f64>] {
        &self.gradients
    }

    /// Exact elementwise mean across workers, the reduction oracle.
    pub fn oracle_mean(&self) -> Vec<f64> {
        let n = self.n_workers() as f64;
        let mut mean = vec![0.0; self.tensor_len()];
        for g in &self.gradients {
            for (m, &x) in mean.iter_mut().zip(g) {
                *m += x;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        mean
    }
}

/// How mu reacts when the saturation ratio trips the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MuRule {
    /// Halve the current mu.
    Halve,
    /// Assign mu = 1/2 outright.
    AssignHalf,
}

/// Controller for the auto-scaling factor mu.
///
/// After each reduction it observes the fraction of quantized gradient
/// elements that attained the maximum-magnitude code. Above `threshold`
/// (default 0.001%), mu drops per `rule`; otherwise it grows by
/// `2^(1/growth_steps)` per step, reaching 2 over `growth_steps`
/// consecutive quiet steps and capping there.
#[derive(Debug, Clone)]
pub struct AutoScaleController {
    pub mu: f64,
    pub threshold: f64,
    pub growth_steps: u32,
    pub rule: MuRule,
    pub consecutive_below: u32,
}

impl Default for AutoScaleController {
    fn default() -> Self {
        AutoScaleController {
            mu: 1.0,
            threshold: 1e-5,
            growth_steps: 1000,
            rule: MuRule::Halve,
            consecutive_below: 0,
        }
    }
}

impl AutoScaleController {
    pub fn growth_factor(&self) -> f64 {
        2f64.powf(1.0 / self.growth_steps as f64)
    }

    /// Update mu from the observed max-code ratio of this step.
    pub fn observe(&mut self, max_ratio: f64) {
        if max_ratio > self.threshold {
            self.mu = match self.rule {
                MuRule::Halve => self.mu * 0.5,
                MuRule::AssignHalf => 0.5,
            };
            self.consecutive_below = 0;
        } else {
            self.consecutive_below = self.consecutive_below.saturating_add(1);
            self.mu = (self.mu * self.growth_factor()).min(2.0);
        }
    }
}

/// Quantization-event log of one reduction, for rate and traffic accounting.
#[derive(Debug, Clone, Copy, Default)]
pub struct CommLog {
    pub counts: QuantCounts,
    pub bytes_transferred: u64,
}

/// Quality and cost summary of one reduction.
#[derive(Debug, Clone, Copy)]
pub struct CommStats {
    /// `10 log10(|oracle|^2 / |result - oracle|^2)`; +inf for exact results.
    pub snr_db: f64,
    pub underflow_rate: f64,
    pub overflow_rate: f64,
    pub bytes_transferred: u64,
}

/// Which reduction protocol to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AllReduceStrategy {
    PreScale,
    PostScale,
    AutoScale,
    SharedScale,
}

impl AllReduceStrategy {
    pub fn name(self) -> &'static str {
        match self {
            AllReduceStrategy::PreScale => "pre",
            AllReduceStrategy::PostScale => "post",
            AllReduceStrategy::AutoScale => "auto",
            AllReduceStrategy::SharedScale => "shared",
        }
    }
}

impl std::str::FromStr for AllReduceStrategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pre" => Ok(AllReduceStrategy::PreScale),
            "post" => Ok(AllReduceStrategy::PostScale),
            "auto" => Ok(AllReduceStrategy::AutoScale),
            "shared" => Ok(AllReduceStrategy::SharedScale),
            other => Err(format!("unknown strategy {other:?} (expected pre, post, auto, shared)")),
        }
    }
}

/// Compute reduction stats against the FP64 oracle.
pub fn comm_stats(result: &ScaledTensor, oracle: &[f64], log: &CommLog) -> CommStats {
    let deq = result.dequantize();
    let mut osq = 0.0;
    let mut esq = 0.0;
    for (d, &o) in deq.iter().zip(oracle) {
        osq += o * o;
        let e = d - o;
        esq += e * e;
    }
    let snr_db = if esq == 0.0 { f64::INFINITY } else { 10.0 * (osq / esq).log10() };
    CommStats {
        snr_db,
        underflow_rate: log.counts.underflow_rate(),
        overflow_rate: log.counts.overflow_rate(),
        bytes_transferred: log.bytes_transferred,
    }
}

/// Sum FP8 payloads elementwise, requantizing after every pairwise addition,
/// folding left in ascending worker order.
fn fold_sum(payloads: &[Vec<u8>], format: Fp8Format) -> (Vec<u8>, QuantCounts) {
    let spec = format.spec();
    let max_normal = spec.max_normal();
    let max_code = spec.max_normal_code() as u8;
    let mut acc = payloads[0].clone();
    let mut counts = QuantCounts::default();
    for addend in &payloads[1..] {
        for (a, &b) in acc.iter_mut().zip(addend) {
            let s = format.decode(*a) + format.decode(b);
            let bits = format.encode(s);
            counts.total += 1;
            if s.abs() > max_normal {
                counts.overflow += 1;
            }
            if s != 0.0 && !s.is_nan() && format.classify(bits) == crate::codec::FloatClass::Zero
            {
                counts.underflow += 1;
            }
            if bits & 0x7f == max_code {
                counts.max_hits += 1;
            }
            *a = bits;
        }
    }
    (acc, counts)
}

fn quantize_workers(
    values: impl Iterator<Item = Vec<f64>>,
    format: Fp8Format,
) -> Result<(Vec<Vec<u8>>, QuantCounts)> {
    let mut payloads = Vec::new();
    let mut counts = QuantCounts::default();
    for v in values {
        let (t, c) = ScaledTensor::from_values_with_scale(&v, 1.0, format)?;
        counts.merge(c);
        payloads.push(t.payload().to_vec());
    }
    Ok((payloads, counts))
}

/// Pre-scaling reduction: quantize `g_i / N`, then fold.
pub fn allreduce_prescale(
    ws: &WorkerSet,
    format: Fp8Format,
) -> Result<(ScaledTensor, CommStats)> {
    let n = ws.n_workers() as f64;
    let (payloads, mut counts) = quantize_workers(
        ws.gradients().iter().map(|g| g.iter().map(|&x| x / n).collect()),
        format,
    )?;
    let (sum, fold_counts) = fold_sum(&payloads, format);
    counts.merge(fold_counts);
    let result = ScaledTensor::from_payload(sum, 1.0, format)?;
    let log = CommLog { counts, bytes_transferred: bytes_fp8(ws, false) };
    let stats = comm_stats(&result, &ws.oracle_mean(), &log);
    Ok((result, stats))
}

/// Post-scaling reduction: quantize raw gradients, fold, divide by N via the
/// output scale (the division itself is exact; the damage is done by the
/// large intermediate sums).
pub fn allreduce_postscale(
    ws: &WorkerSet,
    format: Fp8Format,
) -> Result<(ScaledTensor, CommStats)> {
    let (payloads, mut counts) =
        quantize_workers(ws.gradients().iter().cloned(), format)?;
    let (sum, fold_counts) = fold_sum(&payloads, format);
    counts.merge(fold_counts);
    let result = ScaledTensor::from_payload(sum, ws.n_workers() as f64, format)?;
    let log = CommLog { counts, bytes_transferred: bytes_fp8(ws, false) };
    let stats = comm_stats(&result, &ws.oracle_mean(), &log);
    Ok((result, stats))
}

/// Auto-scaling reduction: quantize `mu * g_i`, fold as post-scaling, divide
/// by `N * mu` via the output scale, then let the controller react to the
/// fraction of worker elements that hit the top code.
pub fn allreduce_autoscale(
    ws: &WorkerSet,
    format: Fp8Format,
    ctrl: &mut AutoScaleController,
) -> Result<(ScaledTensor, CommStats)> {
    let mu = ctrl.mu;
    let (payloads, worker_counts) = quantize_workers(
        ws.gradients().iter().map(|g| g.iter().map(|&x| x * mu).collect()),
        format,
    )?;
    let (sum, fold_counts) = fold_sum(&payloads, format);
    let mut counts = worker_counts;
    counts.merge(fold_counts);
    let result = ScaledTensor::from_payload(sum, ws.n_workers() as f64 * mu, format)?;
    ctrl.observe(worker_counts.max_hit_ratio());
    let log = CommLog { counts, bytes_transferred: bytes_fp8(ws, false) };
    let stats = comm_stats(&result, &ws.oracle_mean(), &log);
    Ok((result, stats))
}

/// Shared-scale reduction over per-tensor scaled payloads.
///
/// Every worker requantizes onto the smallest scale present, payloads are
/// folded pairwise, and the output carries scale `N * s_min` so it
/// dequantizes straight to the mean. Refuses scale spreads beyond 2^60,
/// where requantization would be pure noise.
pub fn allreduce_sharedscale(tensors: &[ScaledTensor]) -> Result<(ScaledTensor, CommLog)> {
    if tensors.is_empty() {
        return Err(Error::Empty("tensor"));
    }
    let format = tensors[0].format();
    let len = tensors[0].len();
    let mut s_min = f64::INFINITY;
    let mut s_max = 0.0f64;
    for t in tensors {
        if t.format() != format {
            return Err(Error::IncompatibleTensors("mixed formats in one reduction"));
        }
        if t.len() != len {
            return Err(Error::MismatchedWorkers { expected: len, got: t.len() });
        }
        s_min = s_min.min(t.scale());
        s_max = s_max.max(t.scale());
    }
    if s_max / s_min > crate::codec::exp2i(60) {
        return Err(Error::ScaleSpread { min: s_min, max: s_max });
    }
    let mut counts = QuantCounts::default();
    let mut payloads = Vec::with_capacity(tensors.len());
    for t in tensors {
        let (aligned, c) = t.rescale(s_min)?;
        counts.merge(c);
        payloads.push(aligned.payload().to_vec());
    }
    let (sum, fold_counts) = fold_sum(&payloads, format);
    counts.merge(fold_counts);
    let result = ScaledTensor::from_payload(sum, tensors.len() as f64 * s_min, format)?;
    let bytes = tensors.len() as u64 * len as u64 + 8;
    Ok((result, CommLog { counts, bytes_transferred: bytes }))
}

/// FP8 wire traffic for one reduction: one byte per element per worker, plus
/// 8 bytes for the shared scalar when the protocol carries one.
fn bytes_fp8(ws: &WorkerSet, shared_scalar: bool) -> u64 {
    let b = ws.n_workers() as u64 * ws.tensor_len() as u64;
    if shared_scalar {
        b + 8
    } else {
        b
    }
}

/// FP32 wire traffic for the same reduction, the baseline for savings.
pub fn bytes_fp32(n_workers: usize, tensor_len: usize) -> u64 {
    n_workers as u64 * tensor_len as u64 * 4
}
