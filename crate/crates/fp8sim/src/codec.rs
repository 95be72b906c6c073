//! Parameterized mini-float codecs with round-to-nearest-even encoding.
//!
//! One descriptor covers every storage format the simulator touches: the two
//! 8-bit payload formats (E4M3, E5M2), the 16-bit formats used for optimizer
//! state ablations (FP16, BF16), and FP32 itself, which doubles as a
//! cross-check of the generic machinery against the hardware `f32` path.
//!
//! Two special-value conventions exist:
//!
//! - `has_infinity = true` (E5M2, FP16, BF16, FP32): IEEE style. Exponent
//!   all-ones encodes infinity (mantissa zero) and NaN (mantissa nonzero).
//!   Rounded magnitudes beyond `max_normal` become infinity.
//! - `has_infinity = false` (E4M3): the top exponent is reused for finite
//!   values, the only NaN codes are exponent all-ones with mantissa all-ones,
//!   and out-of-range magnitudes saturate to `max_normal` instead of
//!   producing NaN or infinity.

/// Bit layout and value conventions of one binary mini-float format.
///
/// Codes live in the low `1 + exponent_bits + mantissa_bits` bits of a `u32`:
/// sign on top, then exponent, then mantissa. Higher bits are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MiniFloat {
    pub name: &'static str,
    pub exponent_bits: u32,
    pub mantissa_bits: u32,
    pub bias: i32,
    pub has_infinity: bool,
}

/// What a code represents once decoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FloatClass {
    Zero,
    Subnormal,
    Normal,
    Inf,
    Nan,
}

impl FloatClass {
    pub fn label(self) -> &'static str {
        match self {
            FloatClass::Zero => "zero",
            FloatClass::Subnormal => "subnormal",
            FloatClass::Normal => "normal",
            FloatClass::Inf => "inf",
            FloatClass::Nan => "nan",
        }
    }
}

/// Exact power of two as f64. Valid for exponents of normal f64 values,
/// which covers every exponent any supported format can produce.
#[inline]
pub(crate) fn exp2i(e: i32) -> f64 {
    debug_assert!((-1022..=1023).contains(&e), "exp2i exponent {e} out of range");
    f64::from_bits(((e + 1023) as u64) << 52)
}

/// Quiet f64 NaN carrying `payload` in its low mantissa bits.
///
/// Lets decode -> encode round-trip every NaN code of every format: the
/// payload survives the f64 intermediary as long as no arithmetic touches it.
fn nan_with_payload(negative: bool, payload: u32) -> f64 {
    let sign = (negative as u64) << 63;
    f64::from_bits(sign | 0x7ff8_0000_0000_0000 | payload as u64)
}

/// floor(log2(a)) for finite positive a, exact, including f64 subnormals.
#[inline]
fn floor_log2(a: f64) -> i32 {
    let bits = a.to_bits();
    let raw = ((bits >> 52) & 0x7ff) as i32;
    if raw != 0 {
        raw - 1023
    } else {
        let mant = bits & ((1u64 << 52) - 1);
        (63 - mant.leading_zeros() as i32) - 1074
    }
}

impl MiniFloat {
    pub const E4M3: MiniFloat = MiniFloat {
        name: "E4M3",
        exponent_bits: 4,
        mantissa_bits: 3,
        bias: 7,
        has_infinity: false,
    };
    pub const E5M2: MiniFloat = MiniFloat {
        name: "E5M2",
        exponent_bits: 5,
        mantissa_bits: 2,
        bias: 15,
        has_infinity: true,
    };
    pub const FP16: MiniFloat = MiniFloat {
        name: "FP16",
        exponent_bits: 5,
        mantissa_bits: 10,
        bias: 15,
        has_infinity: true,
    };
    pub const BF16: MiniFloat = MiniFloat {
        name: "BF16",
        exponent_bits: 8,
        mantissa_bits: 7,
        bias: 127,
        has_infinity: true,
    };
    pub const FP32: MiniFloat = MiniFloat {
        name: "FP32",
        exponent_bits: 8,
        mantissa_bits: 23,
        bias: 127,
        has_infinity: true,
    };

    pub const fn total_bits(&self) -> u32 {
        1 + self.exponent_bits + self.mantissa_bits
    }

    const fn code_mask(&self) -> u32 {
        if self.total_bits() == 32 {
            u32::MAX
        } else {
            (1 << self.total_bits()) - 1
        }
    }

    const fn max_exp_field(&self) -> u32 {
        (1 << self.exponent_bits) - 1
    }

    const fn mant_mask(&self) -> u32 {
        (1 << self.mantissa_bits) - 1
    }

    /// Largest unbiased exponent available to finite values.
    const fn emax(&self) -> i32 {
        if self.has_infinity {
            self.max_exp_field() as i32 - 1 - self.bias
        } else {
            self.max_exp_field() as i32 - self.bias
        }
    }

    /// Largest finite representable magnitude.
    ///
    /// Under the no-infinity convention the top binade loses only its
    /// all-ones mantissa point (the NaN code), so one extra mantissa step is
    /// missing compared with IEEE layouts.
    pub fn max_normal(&self) -> f64 {
        let m = self.mantissa_bits;
        let lost = if self.has_infinity { 1 } else { 2 };
        ((1u64 << (m + 1)) - lost) as f64 * exp2i(self.emax() - m as i32)
    }

    /// Smallest positive normal magnitude, `2^(1 - bias)`.
    pub fn min_normal(&self) -> f64 {
        exp2i(1 - self.bias)
    }

    /// Smallest positive subnormal magnitude, `2^(1 - bias - mantissa_bits)`.
    pub fn min_subnormal(&self) -> f64 {
        exp2i(1 - self.bias - self.mantissa_bits as i32)
    }

    /// Positive code holding `max_normal`.
    pub fn max_normal_code(&self) -> u32 {
        if self.has_infinity {
            ((self.max_exp_field() - 1) << self.mantissa_bits) | self.mant_mask()
        } else {
            (self.max_exp_field() << self.mantissa_bits) | (self.mant_mask() - 1)
        }
    }

    /// Positive infinity code. Only meaningful when `has_infinity`.
    pub fn inf_code(&self) -> u32 {
        debug_assert!(self.has_infinity);
        self.max_exp_field() << self.mantissa_bits
    }

    /// Canonical positive NaN code (exponent and mantissa all-ones).
    pub fn nan_code(&self) -> u32 {
        (self.max_exp_field() << self.mantissa_bits) | self.mant_mask()
    }

    /// Decode a code to the exact f64 it represents.
    ///
    /// Exact because every representable magnitude of every supported format
    /// fits in an f64 without rounding.
    pub fn decode(&self, code: u32) -> f64 {
        let m = self.mantissa_bits;
        let code = code & self.code_mask();
        let mant = code & self.mant_mask();
        let exp_field = (code >> m) & self.max_exp_field();
        let negative = (code >> (self.exponent_bits + m)) == 1;
        let magnitude = if exp_field == self.max_exp_field() && self.has_infinity {
            if mant == 0 {
                f64::INFINITY
            } else {
                return nan_with_payload(negative, mant);
            }
        } else if exp_field == self.max_exp_field() && mant == self.mant_mask() {
            // no-infinity convention: the single NaN pattern per sign
            return nan_with_payload(negative, mant);
        } else if exp_field == 0 {
            mant as f64 * exp2i(1 - self.bias - m as i32)
        } else {
            ((1u32 << m) + mant) as f64 * exp2i(exp_field as i32 - self.bias - m as i32)
        };
        if negative {
            -magnitude
        } else {
            magnitude
        }
    }

    /// Encode an f64 with round-to-nearest, ties to even.
    ///
    /// Total over all f64 inputs: a NaN whose low mantissa bits hold a
    /// payload this format can carry (as planted by `decode`) keeps it, any
    /// other NaN maps to the canonical NaN code, magnitudes below half the
    /// smallest subnormal map to a signed zero, and magnitudes whose rounded
    /// value exceeds `max_normal` map to infinity (IEEE convention) or
    /// saturate to `max_normal` (no-infinity convention).
    pub fn encode(&self, value: f64) -> u32 {
        let m = self.mantissa_bits;
        let sign = (value.is_sign_negative() as u32) << (self.exponent_bits + m);
        if value.is_nan() {
            let mant = (value.to_bits() & self.mant_mask() as u64) as u32;
            let carries = if self.has_infinity { mant != 0 } else { mant == self.mant_mask() };
            return if carries {
                sign | (self.max_exp_field() << m) | mant
            } else {
                sign | self.nan_code()
            };
        }
        if value.is_infinite() {
            return if self.has_infinity {
                sign | self.inf_code()
            } else {
                sign | self.max_normal_code()
            };
        }
        let a = value.abs();
        if a == 0.0 {
            return sign;
        }
        // Round onto the grid whose step is the ULP of the binade holding
        // |value|, clamped below at the subnormal step. The quotient of a
        // finite f64 by a power of two is exact, so the tie test is exact.
        let emin = 1 - self.bias;
        let mut e = floor_log2(a).max(emin);
        let q = a / exp2i(e - m as i32);
        let f = q.floor();
        let rem = q - f;
        let mut n = if rem > 0.5 || (rem == 0.5 && (f as u64) & 1 == 1) {
            f + 1.0
        } else {
            f
        };
        if n == 0.0 {
            return sign;
        }
        if n >= exp2i((m + 1) as i32) {
            // mantissa overflow carries into the next binade
            e += 1;
            n = exp2i(m as i32);
        }
        let rounded = n * exp2i(e - m as i32);
        if rounded > self.max_normal() {
            return if self.has_infinity {
                sign | self.inf_code()
            } else {
                sign | self.max_normal_code()
            };
        }
        let n = n as u32;
        if n < (1 << m) {
            // e == emin here: subnormal, exponent field zero
            sign | n
        } else {
            sign | (((e + self.bias) as u32) << m) | (n - (1 << m))
        }
    }

    /// Classify a code without decoding it.
    pub fn classify(&self, code: u32) -> FloatClass {
        let code = code & self.code_mask();
        let mant = code & self.mant_mask();
        let exp_field = (code >> self.mantissa_bits) & self.max_exp_field();
        if exp_field == self.max_exp_field() {
            if self.has_infinity {
                return if mant == 0 { FloatClass::Inf } else { FloatClass::Nan };
            }
            if mant == self.mant_mask() {
                return FloatClass::Nan;
            }
            return FloatClass::Normal;
        }
        if exp_field == 0 {
            if mant == 0 {
                FloatClass::Zero
            } else {
                FloatClass::Subnormal
            }
        } else {
            FloatClass::Normal
        }
    }
}

// ---------------------------------------------------------------------------
// 8-bit front end
// ---------------------------------------------------------------------------

/// The two 8-bit formats used for tensor payloads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Fp8Format {
    E4M3,
    E5M2,
}

impl Fp8Format {
    pub const fn spec(self) -> &'static MiniFloat {
        match self {
            Fp8Format::E4M3 => &MiniFloat::E4M3,
            Fp8Format::E5M2 => &MiniFloat::E5M2,
        }
    }

    pub fn encode(self, value: f64) -> u8 {
        self.spec().encode(value) as u8
    }

    pub fn decode(self, bits: u8) -> f64 {
        self.spec().decode(bits as u32)
    }

    pub fn classify(self, bits: u8) -> FloatClass {
        self.spec().classify(bits as u32)
    }

    pub fn max_normal(self) -> f64 {
        self.spec().max_normal()
    }

    pub fn min_normal(self) -> f64 {
        self.spec().min_normal()
    }

    pub fn min_subnormal(self) -> f64 {
        self.spec().min_subnormal()
    }

    pub fn name(self) -> &'static str {
        self.spec().name
    }
}

impl std::str::FromStr for Fp8Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "e4m3" => Ok(Fp8Format::E4M3),
            "e5m2" => Ok(Fp8Format::E5M2),
            other => Err(format!("unknown FP8 format {other:?} (expected e4m3 or e5m2)")),
        }
    }
}

impl std::fmt::Display for Fp8Format {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One encoded 8-bit value together with its format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fp8Code {
    pub bits: u8,
    pub format: Fp8Format,
}

impl Fp8Code {
    pub fn encode(value: f64, format: Fp8Format) -> Fp8Code {
        Fp8Code { bits: format.encode(value), format }
    }

    pub fn value(self) -> f64 {
        self.format.decode(self.bits)
    }

    pub fn class(self) -> FloatClass {
        self.format.classify(self.bits)
    }
}

// ---------------------------------------------------------------------------
// Quantization error bounds
// ---------------------------------------------------------------------------

/// Magnitude regime a value falls in for error accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorRegime {
    Normal,
    Subnormal,
}

/// Closed interval of relative quantization error magnitudes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelErrorInterval {
    pub lower: f64,
    pub upper: f64,
}

impl RelErrorInterval {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

/// Analytic relative-error interval for round-to-nearest quantization.
///
/// Normal regime: the worst-case relative error of rounding a value inside a
/// binade ranges from the half-ULP bound `2^-(mantissa_bits+1)` at the top of
/// a binade up to the full relative spacing `2^-mantissa_bits` at the bottom
/// (the top format binade, truncated by saturation or NaN codes, stays inside
/// the same bounds).
///
/// Subnormal regime: the absolute grid step is constant, so the relative
/// error grows as magnitudes shrink, from `1 / (2 * (2^mantissa_bits - 1))`
/// at the largest subnormal up to `1/2` just above the smallest one.
pub fn max_relative_error(format: Fp8Format, regime: ErrorRegime) -> RelErrorInterval {
    let m = format.spec().mantissa_bits;
    match regime {
        ErrorRegime::Normal => RelErrorInterval {
            lower: exp2i(-(m as i32) - 1),
            upper: exp2i(-(m as i32)),
        },
        ErrorRegime::Subnormal => RelErrorInterval {
            lower: 0.5 / ((1u64 << m) - 1) as f64,
            upper: 0.5,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Reference decoder built directly from the format definition, kept
    /// independent of the bit-twiddling path above: library powi for the
    /// scale, rational mantissa, explicit special cases.
    fn reference_decode(fmt: &MiniFloat, code: u32) -> f64 {
        let m = fmt.mantissa_bits;
        let mant = (code & ((1 << m) - 1)) as f64;
        let exp_field = (code >> m) & ((1 << fmt.exponent_bits) - 1);
        let sign = if (code >> (fmt.exponent_bits + m)) & 1 == 1 { -1.0 } else { 1.0 };
        let top = (1u32 << fmt.exponent_bits) - 1;
        if exp_field == top {
            if fmt.has_infinity {
                if mant == 0.0 {
                    return sign * f64::INFINITY;
                }
                return f64::NAN;
            }
            if mant == ((1u32 << m) - 1) as f64 {
                return f64::NAN;
            }
        }
        let steps = 2.0f64.powi(m as i32);
        if exp_field == 0 {
            sign * (mant / steps) * 2.0f64.powi(1 - fmt.bias)
        } else {
            sign * (1.0 + mant / steps) * 2.0f64.powi(exp_field as i32 - fmt.bias)
        }
    }

    fn all_codes(fmt: &MiniFloat) -> impl Iterator<Item = u32> {
        0..(1u64 << fmt.total_bits()) as u32
    }

    #[test]
    fn test_range_constants_e4m3() {
        let f = MiniFloat::E4M3;
        assert_eq!(f.max_normal(), 448.0);
        assert_eq!(f.min_normal(), 0.015625); // 2^-6
        assert_eq!(f.min_subnormal(), 0.001953125); // 2^-9
        assert_eq!(f.max_normal_code(), 0x7e);
        assert_eq!(f.nan_code(), 0x7f);
    }

    #[test]
    fn test_range_constants_e5m2() {
        let f = MiniFloat::E5M2;
        assert_eq!(f.max_normal(), 57344.0);
        assert_eq!(f.min_normal(), 6.103515625e-5); // 2^-14
        assert_eq!(f.min_subnormal(), 1.52587890625e-5); // 2^-16
        assert_eq!(f.max_normal_code(), 0x7b);
        assert_eq!(f.inf_code(), 0x7c);
    }

    #[test]
    fn test_range_constants_wide_formats() {
        assert_eq!(MiniFloat::FP16.max_normal(), 65504.0);
        // BF16 max normal is FP32 max with the mantissa truncated to 7 bits
        assert_eq!(MiniFloat::BF16.max_normal(), f32::from_bits(0x7f7f_0000) as f64);
        assert_eq!(MiniFloat::FP32.max_normal(), f32::MAX as f64);
        assert_eq!(MiniFloat::FP32.min_normal(), f32::MIN_POSITIVE as f64);
    }

    #[test]
    fn test_decode_matches_reference_8_and_16_bit() {
        for fmt in [MiniFloat::E4M3, MiniFloat::E5M2, MiniFloat::FP16, MiniFloat::BF16] {
            for code in all_codes(&fmt) {
                let got = fmt.decode(code);
                let want = reference_decode(&fmt, code);
                assert!(
                    got == want || (got.is_nan() && want.is_nan()),
                    "{} code {:#x}: decode {} vs reference {}",
                    fmt.name,
                    code,
                    got,
                    want
                );
            }
        }
    }

    #[test]
    fn test_fp32_decode_matches_hardware() {
        // structured sweep plus binade edges: the generic decoder must agree
        // bit-for-bit with the native f32 interpretation
        let mut codes: Vec<u32> = (0..=0xffffu32).map(|c| c << 16).collect();
        codes.extend((0..=0xffffu32).map(|c| c | 0x3f80_0000));
        codes.extend([0x0000_0001, 0x007f_ffff, 0x0080_0000, 0x7f7f_ffff, 0x7f80_0000, 0xff80_0000]);
        for code in codes {
            let got = MiniFloat::FP32.decode(code);
            let want = f32::from_bits(code) as f64;
            assert!(
                got == want || (got.is_nan() && want.is_nan()),
                "FP32 code {code:#010x}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn test_fp32_encode_matches_hardware_rounding() {
        // f64 -> f32 casts round to nearest even, the same rule encode claims
        let mut x = -3.0f64;
        let mut n = 0u64;
        while x < 3.0 {
            let got = MiniFloat::FP32.encode(x);
            let want = (x as f32).to_bits();
            assert_eq!(got, want, "FP32 encode mismatch at {x}");
            x += 1.23456789e-3;
            n += 1;
        }
        assert!(n > 4000);
        for x in [
            0.0,
            -0.0,
            1e-300,
            -1e-300,
            3.5e38,
            -3.5e38,
            1e39,
            f64::INFINITY,
            f64::MAX,
            f32::MAX as f64 * (1.0 + 1e-8),
            2.0f64.powi(-127) * 1.5,
            2.0f64.powi(-149),
            2.0f64.powi(-150),
            2.0f64.powi(-150) * 1.0000001,
        ] {
            assert_eq!(MiniFloat::FP32.encode(x), (x as f32).to_bits(), "at {x}");
            assert_eq!(MiniFloat::FP32.encode(-x), ((-x) as f32).to_bits(), "at {}", -x);
        }
    }

    #[test]
    fn test_encode_e4m3_exact_values() {
        let f = Fp8Format::E4M3;
        assert_eq!(f.encode(0.0), 0x00);
        assert_eq!(f.encode(-0.0), 0x80);
        assert_eq!(f.encode(1.0), 0x38);
        assert_eq!(f.encode(-1.0), 0xb8);
        assert_eq!(f.encode(448.0), 0x7e);
        assert_eq!(f.encode(0.015625), 0x08); // min normal
        assert_eq!(f.encode(0.001953125), 0x01); // min subnormal
        assert_eq!(f.encode(240.0), 0x77);
    }

    #[test]
    fn test_encode_e4m3_saturates_never_nan() {
        let f = Fp8Format::E4M3;
        // 464 is the midpoint between 448 and the 480 grid point that would
        // be the NaN code; everything past max_normal clamps to max_normal
        for x in [448.1, 464.0, 465.0, 480.0, 600.0, 1e30, f64::INFINITY] {
            assert_eq!(f.encode(x), 0x7e, "at {x}");
            assert_eq!(f.encode(-x), 0xfe, "at {}", -x);
        }
        assert_eq!(f.encode(f64::NAN), 0x7f);
    }

    #[test]
    fn test_encode_e5m2_overflow_to_infinity() {
        let f = Fp8Format::E5M2;
        assert_eq!(f.encode(1.0), 0x3c);
        assert_eq!(f.encode(57344.0), 0x7b);
        // 61440 is the round-to-nearest-even overflow threshold
        assert_eq!(f.encode(61439.0), 0x7b);
        assert_eq!(f.encode(61440.0), 0x7c);
        assert_eq!(f.encode(-61440.0), 0xfc);
        assert_eq!(f.encode(f64::INFINITY), 0x7c);
        assert_eq!(f.encode(f64::NEG_INFINITY), 0xfc);
        assert_eq!(f.encode(f64::NAN), 0x7f);
        assert_eq!(f.encode(1.52587890625e-5), 0x01);
        assert_eq!(f.encode(6.103515625e-5), 0x04);
    }

    #[test]
    fn test_round_to_nearest_even_ties() {
        let f = Fp8Format::E4M3;
        // binade [1, 2) has step 1/8; ties go to the even mantissa
        assert_eq!(f.encode(1.0625), 0x38); // tie between 1.0 and 1.125 -> 1.0
        assert_eq!(f.encode(1.1875), 0x3a); // tie between 1.125 and 1.25 -> 1.25
        assert_eq!(f.decode(0x3a), 1.25);
        // half the smallest subnormal ties down to zero
        assert_eq!(f.encode(0.0009765625), 0x00);
        assert_eq!(f.encode(-0.0009765625), 0x80);
        // anything strictly above it rounds up to the smallest subnormal
        assert_eq!(f.encode(0.0009765626), 0x01);
        // 1.5 steps above zero ties to the even code 0x02
        assert_eq!(f.encode(0.0029296875), 0x02);
    }

    #[test]
    fn test_roundtrip_all_codes() {
        // NaN codes included: decode plants the payload, encode recovers it
        for format in [Fp8Format::E4M3, Fp8Format::E5M2] {
            for code in 0..=255u8 {
                let value = format.decode(code);
                assert_eq!(
                    format.encode(value),
                    code,
                    "{} code {:#04x} decoded to {} did not round-trip",
                    format.name(),
                    code,
                    value
                );
            }
        }
        // same property for the 16-bit formats
        for fmt in [MiniFloat::FP16, MiniFloat::BF16] {
            for code in all_codes(&fmt) {
                assert_eq!(fmt.encode(fmt.decode(code)), code, "{} {:#x}", fmt.name, code);
            }
        }
    }

    #[test]
    fn test_nan_codes_decode_to_nan() {
        assert!(Fp8Format::E4M3.decode(0x7f).is_nan());
        assert!(Fp8Format::E4M3.decode(0xff).is_nan());
        for bits in [0x7d, 0x7e, 0xfd, 0xfe, 0xff] {
            assert!(Fp8Format::E5M2.decode(bits).is_nan(), "{bits:#04x}");
        }
        assert_eq!(Fp8Format::E5M2.decode(0x7c), f64::INFINITY);
        assert_eq!(Fp8Format::E5M2.decode(0xfc), f64::NEG_INFINITY);
        // a decoded NaN keeps its payload; a NaN from arithmetic, which
        // carries none of ours, canonicalizes
        assert_eq!(Fp8Format::E5M2.encode(Fp8Format::E5M2.decode(0x7d)), 0x7d);
        assert_eq!(Fp8Format::E5M2.encode(Fp8Format::E5M2.decode(0xfe)), 0xfe);
        assert_eq!(Fp8Format::E5M2.encode(f64::NAN), 0x7f);
        assert_eq!(Fp8Format::E4M3.encode(f64::NAN), 0x7f);
    }

    #[test]
    fn test_monotonic_decode_over_positive_codes() {
        // magnitude-ordered codes decode to strictly increasing values
        for format in [Fp8Format::E4M3, Fp8Format::E5M2] {
            let mut prev = f64::NEG_INFINITY;
            for code in 0..=0x7fu8 {
                if format.classify(code) == FloatClass::Nan {
                    continue;
                }
                let v = format.decode(code);
                assert!(v > prev, "{} code {:#04x}: {} !> {}", format.name(), code, v, prev);
                prev = v;
            }
        }
    }

    #[test]
    fn test_class_census() {
        let census = |format: Fp8Format| {
            let mut counts = [0usize; 5];
            for code in 0..=255u8 {
                let i = match format.classify(code) {
                    FloatClass::Zero => 0,
                    FloatClass::Subnormal => 1,
                    FloatClass::Normal => 2,
                    FloatClass::Inf => 3,
                    FloatClass::Nan => 4,
                };
                counts[i] += 1;
            }
            counts
        };
        assert_eq!(census(Fp8Format::E4M3), [2, 14, 238, 0, 2]);
        assert_eq!(census(Fp8Format::E5M2), [2, 6, 240, 2, 6]);
    }

    #[test]
    fn test_classify_agrees_with_decode() {
        for format in [Fp8Format::E4M3, Fp8Format::E5M2] {
            for code in 0..=255u8 {
                let v = format.decode(code);
                let class = format.classify(code);
                match class {
                    FloatClass::Zero => assert_eq!(v, 0.0),
                    FloatClass::Subnormal => {
                        assert!(v != 0.0 && v.abs() < format.min_normal())
                    }
                    FloatClass::Normal => assert!(v.abs() >= format.min_normal()),
                    FloatClass::Inf => assert!(v.is_infinite()),
                    FloatClass::Nan => assert!(v.is_nan()),
                }
            }
        }
    }

    #[test]
    fn test_relative_error_intervals_cover_known_points() {
        let e4_normal = max_relative_error(Fp8Format::E4M3, ErrorRegime::Normal);
        assert_eq!(e4_normal.lower, 0.0625);
        assert_eq!(e4_normal.upper, 0.125);
        assert!(e4_normal.contains(7.69e-2));
        assert!(e4_normal.contains(1.11e-1));

        let e5_normal = max_relative_error(Fp8Format::E5M2, ErrorRegime::Normal);
        assert_eq!(e5_normal.lower, 0.125);
        assert_eq!(e5_normal.upper, 0.25);
        assert!(e5_normal.contains(1.67e-1));
        assert!(e5_normal.contains(2.00e-1));

        let e4_sub = max_relative_error(Fp8Format::E4M3, ErrorRegime::Subnormal);
        assert_eq!(e4_sub.upper, 0.5);
        assert!(e4_sub.contains(1.67e-1));
        let e5_sub = max_relative_error(Fp8Format::E5M2, ErrorRegime::Subnormal);
        assert_eq!(e5_sub.upper, 0.5);
    }

    #[test]
    fn test_encode_error_stays_within_normal_bound() {
        // sweep magnitudes across the full normal range of both formats and
        // confirm the measured relative error obeys the analytic interval
        for format in [Fp8Format::E4M3, Fp8Format::E5M2] {
            let bound = max_relative_error(format, ErrorRegime::Normal).upper;
            let spec = format.spec();
            let mut x = spec.min_normal();
            while x < spec.max_normal() {
                let rel = (format.decode(format.encode(x)) - x).abs() / x;
                assert!(rel <= bound, "{} at {}: rel {}", format.name(), x, rel);
                x *= 1.0173;
            }
        }
    }

    #[test]
    fn test_fp8_code_convenience() {
        let c = Fp8Code::encode(1.5, Fp8Format::E4M3);
        assert_eq!(c.bits, 0x3c);
        assert_eq!(c.value(), 1.5);
        assert_eq!(c.class(), FloatClass::Normal);
        assert_eq!("e4m3".parse::<Fp8Format>().unwrap(), Fp8Format::E4M3);
        assert_eq!("E5M2".parse::<Fp8Format>().unwrap(), Fp8Format::E5M2);
        assert!("fp7".parse::<Fp8Format>().is_err());
    }
}
