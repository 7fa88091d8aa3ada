use std::fmt;
use std::str::FromStr;

use crate::error::SketchError;

/// Which of the four compaction improvements are switched on.
///
/// Written as four 0/1 digits in the order lazy, anti-correlated, spreading,
/// sweep: `0000` is plain KLL and `1111` enables everything.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct VariantFlags {
    pub lazy: bool,
    pub anti_correlated: bool,
    pub spreading: bool,
    pub sweep: bool,
}

impl VariantFlags {
    pub const VANILLA: Self = Self::from_bits(0);
    pub const ALL: Self = Self::from_bits(0b1111);

    /// bit0 = lazy, bit1 = anti-correlated, bit2 = spreading, bit3 = sweep.
    pub const fn from_bits(bits: u8) -> Self {
        Self {
            lazy: bits & 1 != 0,
            anti_correlated: bits & 2 != 0,
            spreading: bits & 4 != 0,
            sweep: bits & 8 != 0,
        }
    }

    pub const fn bits(self) -> u8 {
        (self.lazy as u8)
            | (self.anti_correlated as u8) << 1
            | (self.spreading as u8) << 2
            | (self.sweep as u8) << 3
    }

    /// All sixteen combinations, `0000` first.
    pub fn all_variants() -> impl Iterator<Item = Self> {
        (0u8..16).map(|i| {
            // digit order: lazy is the most significant digit of the name
            let name_bits = ((i >> 3) & 1) | ((i >> 1) & 2) | ((i << 1) & 4) | ((i << 3) & 8);
            Self::from_bits(name_bits)
        })
    }
}

impl fmt::Display for VariantFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for on in [self.lazy, self.anti_correlated, self.spreading, self.sweep] {
            f.write_str(if on { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for VariantFlags {
    type Err = SketchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s.as_bytes();
        if digits.len() != 4 || !digits.iter().all(|d| *d == b'0' || *d == b'1') {
            return Err(SketchError::InvalidParameter(format!(
                "variant must be four 0/1 digits, got {s:?}"
            )));
        }
        Ok(Self {
            lazy: digits[0] == b'1',
            anti_correlated: digits[1] == b'1',
            spreading: digits[2] == b'1',
            sweep: digits[3] == b'1',
        })
    }
}
