//! FP8 tensors carrying one per-tensor scale.
//!
//! The logical value of element `i` is `decode(payload[i]) / scale`, so the
//! scale maps real data into the representable window of the 8-bit format.
//! Two scale-selection policies are provided: just-in-time (from the current
//! tensor's amax) and delayed (from a sliding window of recent amax values,
//! trading scale freshness for not having to touch the data twice).

use std::collections::VecDeque;

use crate::codec::{exp2i, FloatClass, Fp8Format};
use crate::error::{Error, Result};

/// Counters for one batch of element quantizations.
///
/// `underflow` counts nonzero inputs that collapsed to a zero code,
/// `overflow` counts inputs whose scaled magnitude exceeded the format's
/// `max_normal` (saturating or overflowing to infinity), and `max_hits`
/// counts encodes that landed on the maximum-magnitude finite code, whether
/// by rounding or by saturation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QuantCounts {
    pub total: u64,
    pub underflow: u64,
    pub overflow: u64,
    pub max_hits: u64,
}

impl QuantCounts {
    pub fn merge(&mut self, other: QuantCounts) {
        self.total += other.total;
        self.underflow += other.underflow;
        self.overflow += other.overflow;
        self.max_hits += other.max_hits;
    }

    pub fn underflow_rate(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.underflow as f64 / self.total as f64
        }
    }

    pub fn overflow_rate(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.overflow as f64 / self.total as f64
        }
    }

    pub fn max_hit_ratio(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.max_hits as f64 / self.total as f64
        }
    }
}

/// Sliding window of recent amax observations for delayed scaling.
#[derive(Debug, Clone)]
pub struct AmaxHistory {
    window: VecDeque<f64>,
    capacity: usize,
}

impl Default for AmaxHistory {
    fn default() -> Self {
        AmaxHistory::new(16)
    }
}

impl AmaxHistory {
    pub fn new(capacity: usize) -> AmaxHistory {
        assert!(capacity > 0, "history needs room for at least one amax");
        AmaxHistory { window: VecDeque::with_capacity(capacity), capacity }
    }

    /// Record an amax, evicting the oldest observation once full.
    pub fn push(&mut self, amax: f64) {
        if self.window.len() == self.capacity {
            self.window.pop_front();
        }
        self.window.push_back(amax);
    }

    /// Largest amax in the window, `None` while empty.
    pub fn max(&self) -> Option<f64> {
        self.window.iter().copied().fold(None, |acc, x| match acc {
            None => Some(x),
            Some(a) => Some(if x > a { x } else { a }),
        })
    }

    pub fn len(&self) -> usize {
        self.window.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }
}

/// An FP8 payload plus the positive finite scale that maps logical values
/// into the format's representable window.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledTensor {
    payload: Vec<u8>,
    scale: f64,
    format: Fp8Format,
    shape: Vec<usize>,
}

fn amax_checked(values: &[f64]) -> Result<f64> {
    let mut amax = 0.0f64;
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFiniteInput { index: i, value: v });
        }
        let a = v.abs();
        if a > amax {
            amax = a;
        }
    }
    Ok(amax)
}

fn encode_all(values: &[f64], scale: f64, format: Fp8Format) -> (Vec<u8>, QuantCounts) {
    let spec = format.spec();
    let max_normal = spec.max_normal();
    let max_code = spec.max_normal_code() as u8;
    let mut counts = QuantCounts { total: values.len() as u64, ..QuantCounts::default() };
    let payload = values
        .iter()
        .map(|&v| {
            let x = v * scale;
            let bits = format.encode(x);
            if x.abs() > max_normal {
                counts.overflow += 1;
            }
            if v != 0.0 && format.classify(bits) == FloatClass::Zero {
                counts.underflow += 1;
            }
            if bits & 0x7f == max_code {
                counts.max_hits += 1;
            }
            bits
        })
        .collect();
    (payload, counts)
}

impl ScaledTensor {
    /// Quantize with a scale computed from this tensor's own amax:
    /// `scale = max_normal / (amax * 2^margin)`, so the largest magnitude
    /// lands `margin` binades below the top of the format. All-zero tensors
    /// get scale 1.
    ///
    /// Inputs must be finite; sanitize NaN/infinity upstream.
    pub fn quantize_jit(
        values: &[f64],
        format: Fp8Format,
        margin: u32,
    ) -> Result<(ScaledTensor, QuantCounts)> {
        let amax = amax_checked(values)?;
        let scale = if amax == 0.0 {
            1.0
        } else {
            format.max_normal() / (amax * exp2i(margin as i32))
        };
        Self::from_values_with_scale(values, scale, format)
    }

    /// Quantize with a scale derived from the history window's max rather
    /// than the current tensor (falling back to the current amax while the
    /// window is empty). The current amax is appended afterwards, so a tensor
    /// hotter than its history saturates and is counted as overflow.
    pub fn quantize_delayed(
        values: &[f64],
        format: Fp8Format,
        history: &mut AmaxHistory,
        margin: u32,
    ) -> Result<(ScaledTensor, QuantCounts)> {
        let amax = amax_checked(values)?;
        let basis = history.max().unwrap_or(amax);
        let scale = if basis == 0.0 {
            1.0
        } else {
            format.max_normal() / (basis * exp2i(margin as i32))
        };
        history.push(amax);
        Self::from_values_with_scale(values, scale, format)
    }

    /// Quantize at an explicitly chosen scale.
    pub fn from_values_with_scale(
        values: &[f64],
        scale: f64,
        format: Fp8Format,
    ) -> Result<(ScaledTensor, QuantCounts)> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidScale { scale });
        }
        amax_checked(values)?;
        let (payload, counts) = encode_all(values, scale, format);
        let shape = vec![values.len()];
        Ok((ScaledTensor { payload, scale, format, shape }, counts))
    }

    /// Wrap raw codes produced elsewhere (reduction folds).
    pub(crate) fn from_payload(
        payload: Vec<u8>,
        scale: f64,
        format: Fp8Format,
    ) -> Result<ScaledTensor> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidScale { scale });
        }
        let shape = vec![payload.len()];
        Ok(ScaledTensor { payload, scale, format, shape })
    }

    /// Recover logical values: `decode(payload[i]) / scale`.
    pub fn dequantize(&self) -> Vec<f64> {
        self.payload.iter().map(|&b| self.format.decode(b) / self.scale).collect()
    }

    /// Re-encode the payload for a new scale. The logical values are
    /// preserved up to requantization: ratios that are powers of two move
    /// codes along the grid losslessly as long as nothing saturates or
    /// drops below the subnormal floor.
    pub fn rescale(&self, new_scale: f64) -> Result<(ScaledTensor, QuantCounts)> {
        if !(new_scale.is_finite() && new_scale > 0.0) {
            return Err(Error::InvalidScale { scale: new_scale });
        }
        let ratio = new_scale / self.scale;
        let spec = self.format.spec();
        let max_normal = spec.max_normal();
        let max_code = spec.max_normal_code() as u8;
        let mut counts =
            QuantCounts { total: self.payload.len() as u64, ..QuantCounts::default() };
        let payload: Vec<u8> = self
            .payload
            .iter()
            .map(|&b| {
                let x = self.format.decode(b) * ratio;
                let bits = self.format.encode(x);
                if x.abs() > max_normal {
                    counts.overflow += 1;
                }
                if x != 0.0 && !x.is_nan() && self.format.classify(bits) == FloatClass::Zero {
                    counts.underflow += 1;
                }
                if bits & 0x7f == max_code {
                    counts.max_hits += 1;
                }
                bits
            })
            .collect();
        let tensor = ScaledTensor {
            payload,
            scale: new_scale,
            format: self.format,
            shape: self.shape.clone(),
        };
        Ok((tensor, counts))
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn format(&self) -> Fp8Format {
        self.format
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.payload.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payload.is_empty()
    }

    /// Reshape in place; the element count must not change.
    pub fn with_shape(mut self, shape: Vec<usize>) -> Result<ScaledTensor> {
        let n: usize = shape.iter().product();
        if n != self.payload.len() {
            return Err(Error::IncompatibleTensors("reshape changes element count"));
        }
        self.shape = shape;
        Ok(self)
    }

    /// Serialize to a binary blob:
    /// format tag (1 byte), ndim (1 byte), dims (8 bytes each, LE),
    /// scale (8 bytes, LE f64), then the raw payload.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(2 + 8 * self.shape.len() + 8 + self.payload.len());
        out.push(match self.format {
            Fp8Format::E4M3 => 0u8,
            Fp8Format::E5M2 => 1u8,
        });
        out.push(self.shape.len() as u8);
        for &d in &self.shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        out.extend_from_slice(&self.scale.to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    /// Parse a blob produced by [`ScaledTensor::to_bytes`].
    pub fn from_bytes(bytes: &[u8]) -> Result<ScaledTensor> {
        if bytes.len() < 2 {
            return Err(Error::MalformedBlob("missing header"));
        }
        let format = match bytes[0] {
            0 => Fp8Format::E4M3,
            1 => Fp8Format::E5M2,
            _ => return Err(Error::MalformedBlob("unknown format tag")),
        };
        let ndim = bytes[1] as usize;
        let mut pos = 2;
        let mut shape = Vec::with_capacity(ndim);
        let mut count = 1usize;
        for _ in 0..ndim {
            let end = pos + 8;
            if end > bytes.len() {
                return Err(Error::MalformedBlob("truncated shape"));
            }
            let d = u64::from_le_bytes(bytes[pos..end].try_into().unwrap());
            let d = usize::try_from(d).map_err(|_| Error::MalformedBlob("dimension too large"))?;
            count = count
                .checked_mul(d)
                .ok_or(Error::MalformedBlob("element count overflow"))?;
            shape.push(d);
            pos = end;
        }
        if pos + 8 > bytes.len() {
            return Err(Error::MalformedBlob("truncated scale"));
        }
        let scale = f64::from_le_bytes(bytes[pos..pos + 8].try_into().unwrap());
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::MalformedBlob("scale not positive finite"));
        }
        pos += 8;
        if bytes.len() - pos != count {
            return Err(Error::MalformedBlob("payload length mismatch"));
        }
        let payload = bytes[pos..].to_vec();
        Ok(ScaledTensor { payload, scale, format, shape })
    }
}
