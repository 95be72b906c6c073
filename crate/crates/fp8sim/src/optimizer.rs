//! AdamW with independently configurable storage precision per variable.
//!
//! The update arithmetic always runs in f64 on dequantized inputs; precision
//! only enters where a variable is *stored* between steps (master weights,
//! gradient, first and second moments). This isolates the effect of storage
//! precision from arithmetic precision, which is the point of the ablation:
//! narrow formats are assigned per variable and the trajectory is compared
//! against the all-FP32 baseline.
//!
//! Storage options are FP32, FP16 with a per-tensor just-in-time scale, plain
//! BF16, and an 8-bit format with a per-tensor scale. The named presets wire
//! these into the standard ablation grid (see [`PrecisionSpec::preset`]).

use crate::codec::{FloatClass, Fp8Format, MiniFloat};
use crate::error::{Error, Result};
use crate::tensor::{QuantCounts, ScaledTensor};

/// Storage precision of one optimizer variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarPrecision {
    Fp32,
    /// FP16 payload with one per-tensor scale chosen from the tensor's amax.
    Fp16Scaled,
    /// Plain BF16, no scaling (its exponent range matches FP32).
    Bf16,
    /// 8-bit payload with one per-tensor scale; format per [`PrecisionSpec`].
    Fp8Scaled,
}

impl VarPrecision {
    pub fn width_bytes(self) -> usize {
        match self {
            VarPrecision::Fp32 => 4,
            VarPrecision::Fp16Scaled | VarPrecision::Bf16 => 2,
            VarPrecision::Fp8Scaled => 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            VarPrecision::Fp32 => "fp32",
            VarPrecision::Fp16Scaled => "fp16-scaled",
            VarPrecision::Bf16 => "bf16",
            VarPrecision::Fp8Scaled => "fp8-scaled",
        }
    }
}

/// Which storage format each optimizer variable uses.
///
/// Not every combination is meaningful; [`PrecisionSpec::validate`] enforces
/// the supported sets: master weights may use any option, gradients any
/// except scaled FP16, the first moment only FP32 or scaled 8-bit, and the
/// second moment anything except plain BF16.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrecisionSpec {
    pub master_weight: VarPrecision,
    pub gradient: VarPrecision,
    pub moment1: VarPrecision,
    pub moment2: VarPrecision,
    /// Payload format for every `Fp8Scaled` variable. The precision-favoring
    /// E4M3 is the default; moments need mantissa more than range.
    pub fp8_format: Fp8Format,
}

/// Labels accepted by [`PrecisionSpec::preset`], in ablation order.
pub const PRESET_LABELS: [&str; 6] = ["0", "1", "2a", "2b", "3", "4"];

impl PrecisionSpec {
    /// The all-FP32 baseline: 16 bytes per parameter.
    pub fn fp32_baseline() -> PrecisionSpec {
        PrecisionSpec {
            master_weight: VarPrecision::Fp32,
            gradient: VarPrecision::Fp32,
            moment1: VarPrecision::Fp32,
            moment2: VarPrecision::Fp32,
            fp8_format: Fp8Format::E4M3,
        }
    }

    /// Named ablation presets.
    ///
    /// - `"0"` — everything FP32 (16 bytes/param).
    /// - `"1"` — same storage as `"0"`; differs only in compute precision,
    ///   which is the caller's concern, not the optimizer's.
    /// - `"2a"` — FP16-scaled master, 8-bit gradient and first moment,
    ///   FP16-scaled second moment (6 bytes/param).
    /// - `"2b"` — like `"2a"` but BF16 master.
    /// - `"3"` — like `"2a"` but 8-bit master.
    /// - `"4"` — like `"2a"` but 8-bit second moment.
    pub fn preset(label: &str) -> Option<PrecisionSpec> {
        let base = PrecisionSpec::fp32_baseline();
        let fp8 = VarPrecision::Fp8Scaled;
        let spec = match label {
            "0" | "1" => base,
            "2a" => PrecisionSpec {
                master_weight: VarPrecision::Fp16Scaled,
                gradient: fp8,
                moment1: fp8,
                moment2: VarPrecision::Fp16Scaled,
                ..base
            },
            "2b" => PrecisionSpec {
                master_weight: VarPrecision::Bf16,
                gradient: fp8,
                moment1: fp8,
                moment2: VarPrecision::Fp16Scaled,
                ..base
            },
            "3" => PrecisionSpec {
                master_weight: fp8,
                gradient: fp8,
                moment1: fp8,
                moment2: VarPrecision::Fp16Scaled,
                ..base
            },
            "4" => PrecisionSpec {
                master_weight: VarPrecision::Fp16Scaled,
                gradient: fp8,
                moment1: fp8,
                moment2: fp8,
                ..base
            },
            _ => return None,
        };
        Some(spec)
    }

    /// Reject assignments outside each variable's supported set.
    pub fn validate(&self) -> Result<()> {
        if self.gradient == VarPrecision::Fp16Scaled {
            return Err(Error::InvalidPrecision("gradients do not support scaled FP16"));
        }
        if matches!(self.moment1, VarPrecision::Fp16Scaled | VarPrecision::Bf16) {
            return Err(Error::InvalidPrecision("first moment supports only FP32 or scaled 8-bit"));
        }
        if self.moment2 == VarPrecision::Bf16 {
            return Err(Error::InvalidPrecision("second moment does not support plain BF16"));
        }
        Ok(())
    }

    /// Total optimizer memory per parameter: master + gradient + both
    /// moments, at their declared storage widths. No hidden state.
    pub fn bytes_per_param(&self) -> usize {
        self.master_weight.width_bytes()
            + self.gradient.width_bytes()
            + self.moment1.width_bytes()
            + self.moment2.width_bytes()
    }
}

/// One optimizer variable held at its storage precision.
///
/// `F32` is the native path (bit-identical to routing through the generic
/// FP32 codec, which the codec tests pin down, but much faster). `Coded`
/// covers the scaled and 16-bit formats: logical value = `decode(code) /
/// scale`.
#[derive(Debug, Clone, PartialEq)]
pub enum StoredTensor {
    F32(Vec<f32>),
    Coded { codes: Vec<u32>, fmt: MiniFloat, scale: f64 },
}

impl StoredTensor {
    /// Quantize `values` for storage at `prec`, counting quantization events
    /// the same way tensor payload encoding does.
    pub fn store(values: &[f64], prec: VarPrecision, fp8: Fp8Format) -> (StoredTensor, QuantCounts) {
        let mut counts = QuantCounts { total: values.len() as u64, ..QuantCounts::default() };
        match prec {
            VarPrecision::Fp32 => {
                let max = f32::MAX as f64;
                let out = values
                    .iter()
                    .map(|&v| {
                        let x = v as f32;
                        if v.is_finite() && v.abs() > max {
                            counts.overflow += 1;
                        }
                        if v != 0.0 && x == 0.0 {
                            counts.underflow += 1;
                        }
                        if x.abs() == f32::MAX {
                            counts.max_hits += 1;
                        }
                        x
                    })
                    .collect();
                (StoredTensor::F32(out), counts)
            }
            _ => {
                let fmt = match prec {
                    VarPrecision::Fp16Scaled => MiniFloat::FP16,
                    VarPrecision::Bf16 => MiniFloat::BF16,
                    VarPrecision::Fp8Scaled => *fp8.spec(),
                    VarPrecision::Fp32 => unreachable!(),
                };
                let scale = if prec == VarPrecision::Bf16 {
                    1.0
                } else {
                    let amax = values
                        .iter()
                        .filter(|v| v.is_finite())
                        .fold(0.0f64, |a, &v| a.max(v.abs()));
                    if amax == 0.0 {
                        1.0
                    } else {
                        fmt.max_normal() / amax
                    }
                };
                let max_normal = fmt.max_normal();
                let mag_mask = (1u32 << (fmt.total_bits() - 1)) - 1;
                let max_code = fmt.max_normal_code();
                let codes = values
                    .iter()
                    .map(|&v| {
                        let x = v * scale;
                        let code = fmt.encode(x);
                        if x.abs() > max_normal {
                            counts.overflow += 1;
                        }
                        if v != 0.0 && fmt.classify(code) == FloatClass::Zero {
                            counts.underflow += 1;
                        }
                        if code & mag_mask == max_code {
                            counts.max_hits += 1;
                        }
                        code
                    })
                    .collect();
                (StoredTensor::Coded { codes, fmt, scale }, counts)
            }
        }
    }

    /// Dequantize back to f64.
    pub fn values(&self) -> Vec<f64> {
        match self {
            StoredTensor::F32(v) => v.iter().map(|&x| x as f64).collect(),
            StoredTensor::Coded { codes, fmt, scale } => {
                codes.iter().map(|&c| fmt.decode(c) / scale).collect()
            }
        }
    }

    pub fn len(&self) -> usize {
        match self {
            StoredTensor::F32(v) => v.len(),
            StoredTensor::Coded { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// AdamW hyperparameters. `Default` gives the usual large-model recipe:
/// β1 = 0.9, β2 = 0.95, weight decay 0.1, eps 1e-8.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamWHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub weight_decay: f64,
    pub eps: f64,
}

impl Default for AdamWHyper {
    fn default() -> Self {
        AdamWHyper { lr: 1e-3, beta1: 0.9, beta2: 0.95, weight_decay: 0.1, eps: 1e-8 }
    }
}

impl AdamWHyper {
    pub fn with_lr(lr: f64) -> AdamWHyper {
        AdamWHyper { lr, ..AdamWHyper::default() }
    }
}

/// Full optimizer state for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub master: StoredTensor,
    pub m1: StoredTensor,
    pub m2: StoredTensor,
    pub step: u64,
    pub hyper: AdamWHyper,
}

impl OptimizerState {
    /// Fresh state: weights quantized into their storage precision, both
    /// moments zero (zero is exact in every format), step counter zero.
    pub fn new(initial: &[f64], hyper: AdamWHyper, spec: &PrecisionSpec) -> OptimizerState {
        let (master, _) = StoredTensor::store(initial, spec.master_weight, spec.fp8_format);
        let zeros = vec![0.0; initial.len()];
        let (m1, _) = StoredTensor::store(&zeros, spec.moment1, spec.fp8_format);
        let (m2, _) = StoredTensor::store(&zeros, spec.moment2, spec.fp8_format);
        OptimizerState { master, m1, m2, step: 0, hyper }
    }

    /// Dequantized master weights.
    pub fn weights(&self) -> Vec<f64> {
        self.master.values()
    }
}

/// Quantization events from one step, per stored variable.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepCounts {
    pub gradient: QuantCounts,
    pub master: QuantCounts,
    pub moment1: QuantCounts,
    pub moment2: QuantCounts,
}

impl StepCounts {
    /// Accumulate another step's events, variable by variable.
    pub fn merge(&mut self, other: StepCounts) {
        self.gradient.merge(other.gradient);
        self.master.merge(other.master);
        self.moment1.merge(other.moment1);
        self.moment2.merge(other.moment2);
    }
}

/// A gradient either as plain values (quantized here per the spec's gradient
/// precision) or already quantized upstream (used as-is).
#[derive(Debug, Clone, Copy)]
pub enum GradientInput<'a> {
    Dense(&'a [f64]),
    Quantized(&'a ScaledTensor),
}

/// One AdamW step with decoupled weight decay.
///
/// Per element, in f64 on dequantized inputs:
///
/// ```text
/// m1' = β1·m1 + (1−β1)·g          m̂1 = m1' / (1 − β1^t)
/// m2' = β2·m2 + (1−β2)·g²         m̂2 = m2' / (1 − β2^t)
/// w'  = w − lr·wd·w − lr·m̂1 / (√m̂2 + eps)
/// ```
///
/// with t the new step count. The decay term uses the old `w`, independent
/// of the moment update. Afterwards `w'`, `m1'`, `m2'` are requantized to
/// their storage precisions; the returned counts expose what that cost.
pub fn adamw_step(
    state: &OptimizerState,
    grad: GradientInput<'_>,
    spec: &PrecisionSpec,
) -> Result<(OptimizerState, StepCounts)> {
    spec.validate()?;
    let w = state.master.values();
    let m1 = state.m1.values();
    let m2 = state.m2.values();
    for (i, &v) in m2.iter().enumerate() {
        if v < 0.0 {
            return Err(Error::CorruptedMoment { index: i, value: v });
        }
    }

    let mut counts = StepCounts::default();
    let g = match grad {
        GradientInput::Dense(values) => {
            if values.len() != w.len() {
                return Err(Error::IncompatibleTensors("gradient length differs from parameters"));
            }
            let (stored, c) = StoredTensor::store(values, spec.gradient, spec.fp8_format);
            counts.gradient = c;
            stored.values()
        }
        GradientInput::Quantized(tensor) => {
            if tensor.len() != w.len() {
                return Err(Error::IncompatibleTensors("gradient length differs from parameters"));
            }
            tensor.dequantize()
        }
    };

    let h = state.hyper;
    let t = state.step + 1;
    let bc1 = 1.0 - h.beta1.powi(t.min(i32::MAX as u64) as i32);
    let bc2 = 1.0 - h.beta2.powi(t.min(i32::MAX as u64) as i32);

    let n = w.len();
    let mut w_new = Vec::with_capacity(n);
    let mut m1_new = Vec::with_capacity(n);
    let mut m2_new = Vec::with_capacity(n);
    for i in 0..n {
        let gi = g[i];
        let m1n = h.beta1 * m1[i] + (1.0 - h.beta1) * gi;
        let m2n = h.beta2 * m2[i] + (1.0 - h.beta2) * gi * gi;
        let mh1 = m1n / bc1;
        let mh2 = m2n / bc2;
        let wn = w[i] - h.lr * h.weight_decay * w[i] - h.lr * mh1 / (mh2.sqrt() + h.eps);
        w_new.push(wn);
        m1_new.push(m1n);
        m2_new.push(m2n);
    }

    let (master, cm) = StoredTensor::store(&w_new, spec.master_weight, spec.fp8_format);
    let (m1s, c1) = StoredTensor::store(&m1_new, spec.moment1, spec.fp8_format);
    let (m2s, c2) = StoredTensor::store(&m2_new, spec.moment2, spec.fp8_format);
    counts.master = cm;
    counts.moment1 = c1;
    counts.moment2 = c2;

    let next = OptimizerState { master, m1: m1s, m2: m2s, step: t, hyper: state.hyper };
    Ok((next, counts))
}
