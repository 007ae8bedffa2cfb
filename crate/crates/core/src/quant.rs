//! Fake quantization (quantize then dequantize) onto low-bit value grids.
//!
//! Values are snapped in `f64`; the compute type never changes. Scaling is
//! per tensor: `s = max_abs(x) / G_max`, each entry becomes `s * snap(x / s)`.
//!
//! Grids:
//! * `INT-k`: the symmetric integers `-(2^(k-1)-1) ..= 2^(k-1)-1`.
//! * `FP4-E1M2`: sign, one exponent bit, two mantissa bits, bias 1 with
//!   subnormals at `e = 0`, i.e. `{0, ±0.25, ..., ±1.75}`.
//!
//! Both grids are evenly spaced around zero, so every point has a signed
//! code `q / step`. Ties between two grid points go to the even code, which
//! for FP4 coincides with picking the even mantissa.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::QuantError;
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantFormat {
    None,
    Int2,
    Int3,
    Int4,
    Fp4E1M2,
}

impl QuantFormat {
    pub const ALL_QUANTIZED: [QuantFormat; 4] = [
        QuantFormat::Int2,
        QuantFormat::Int3,
        QuantFormat::Int4,
        QuantFormat::Fp4E1M2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            QuantFormat::None => "none",
            QuantFormat::Int2 => "int2",
            QuantFormat::Int3 => "int3",
            QuantFormat::Int4 => "int4",
            QuantFormat::Fp4E1M2 => "fp4_e1m2",
        }
    }

    /// Spacing between neighbouring grid points and the largest code.
    fn lattice(self) -> Option<(f64, i64)> {
        match self {
            QuantFormat::None => None,
            QuantFormat::Int2 => Some((1.0, 1)),
            QuantFormat::Int3 => Some((1.0, 3)),
            QuantFormat::Int4 => Some((1.0, 7)),
            QuantFormat::Fp4E1M2 => Some((0.25, 7)),
        }
    }

    /// Largest representable magnitude, `None` for the identity format.
    pub fn grid_max(self) -> Option<f64> {
        self.lattice().map(|(step, max)| step * max as f64)
    }
}

impl fmt::Display for QuantFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QuantFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(QuantFormat::None),
            "int2" => Ok(QuantFormat::Int2),
            "int3" => Ok(QuantFormat::Int3),
            "int4" => Ok(QuantFormat::Int4),
            "fp4_e1m2" => Ok(QuantFormat::Fp4E1M2),
            other => Err(format!(
                "unknown format `{other}` (expected none|int2|int3|int4|fp4_e1m2)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Granularity {
    #[default]
    PerTensor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Rounding {
    #[default]
    NearestEven,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantSpec {
    pub format: QuantFormat,
    pub granularity: Granularity,
    pub rounding: Rounding,
}

impl QuantSpec {
    pub const NONE: QuantSpec = QuantSpec::new(QuantFormat::None);

    pub const fn new(format: QuantFormat) -> Self {
        Self {
            format,
            granularity: Granularity::PerTensor,
            rounding: Rounding::NearestEven,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.format == QuantFormat::None
    }
}

impl Default for QuantSpec {
    fn default() -> Self {
        Self::NONE
    }
}

/// The full representable value set of `format`, sorted ascending.
/// Empty for [`QuantFormat::None`].
pub fn grid(format: QuantFormat) -> Vec<f64> {
    match format.lattice() {
        None => Vec::new(),
        Some((step, max)) => (-max..=max).map(|k| k as f64 * step).collect(),
    }
}

/// Nearest code to `t` in `-max..=max`, ties to the even code.
fn snap_code(t: f64, max: i64) -> i64 {
    let lo = t.floor();
    let frac = t - lo;
    let lo = lo as i64;
    let code = if frac > 0.5 {
        lo + 1
    } else if frac < 0.5 {
        lo
    } else if lo % 2 == 0 {
        lo
    } else {
        lo + 1
    };
    code.clamp(-max, max)
}

/// Quantize-dequantize `x` under `spec`.
pub fn qdq(x: &Matrix, spec: &QuantSpec) -> Result<Matrix, QuantError> {
    if let Some((row, col)) = x.first_non_finite() {
        return Err(QuantError::NonFinite {
            row,
            col,
            value: x[(row, col)],
        });
    }
    let Some((step, max_code)) = spec.format.lattice() else {
        return Ok(x.clone());
    };
    let amax = x.as_slice().iter().fold(0.0_f64, |a, &v| a.max(v.abs()));
    let grid_max = step * max_code as f64;
    let scale = if amax == 0.0 { 1.0 } else { amax / grid_max };
    Ok(x.map(|v| {
        let code = snap_code(v / scale / step, max_code);
        if code == max_code {
            // s * G_max can differ from max_abs by an ulp; the extreme code
            // maps back onto max_abs itself.
            amax
        } else if code == -max_code {
            -amax
        } else {
            scale * (code as f64 * step)
        }
    }))
}

/// True iff applying `qdq` twice gives exactly the same values as once.
pub fn qdq_idempotent_check(x: &Matrix, spec: &QuantSpec) -> bool {
    let Ok(once) = qdq(x, spec) else {
        return false;
    };
    let Ok(twice) = qdq(&once, spec) else {
        return false;
    };
    once
        .as_slice()
        .iter()
        .zip(twice.as_slice())
        .all(|(a, b)| a.to_bits() == b.to_bits() || (*a == 0.0 && *b == 0.0))
}
