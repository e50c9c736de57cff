use crate::{Error, Result};

/// Value 0 frequency of ternary c2048-scale expert weights.
pub const DEFAULT_P0: f64 = 0.885;

/// I.i.d. ternary value model: `P(0) = p0`, `P(1) = P(2) = (1 - p0) / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairDistribution {
    p0: f64,
}

impl Default for PairDistribution {
    fn default() -> Self {
        Self { p0: DEFAULT_P0 }
    }
}

impl PairDistribution {
    /// Accepts any `p0` in `[0, 1]`. Dictionary generation further requires
    /// `1/3 < p0 < 1`, see [`PairDistribution::check_for_dictionary`].
    pub fn new(p0: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p0) {
            return Err(Error::InvalidDistribution(p0));
        }
        Ok(Self { p0 })
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    /// Probability of each non-zero value.
    pub fn p_nonzero(&self) -> f64 {
        (1.0 - self.p0) / 2.0
    }

    pub fn value_probability(&self, v: u8) -> f64 {
        if v == 0 {
            self.p0
        } else {
            self.p_nonzero()
        }
    }

    /// With `p0 > 1/3` the zero value is strictly the most likely, which
    /// makes the all-zero pair the unique most probable entry. `p0 = 1`
    /// leaves non-zero pairs with probability 0.
    pub fn check_for_dictionary(&self) -> Result<()> {
        if self.p0 > 1.0 / 3.0 && self.p0 < 1.0 {
            Ok(())
        } else {
            Err(Error::InvalidDistribution(self.p0))
        }
    }

    /// Natural log probability of a sequence with the given value counts.
    pub fn log_probability(&self, zeros: u32, nonzeros: u32) -> f64 {
        zeros as f64 * self.p0.ln() + nonzeros as f64 * self.p_nonzero().ln()
    }

    /// Shannon entropy in bits per ternary value.
    pub fn entropy_bits(&self) -> f64 {
        let q = self.p_nonzero();
        let h0 = if self.p0 > 0.0 {
            -self.p0 * self.p0.log2()
        } else {
            0.0
        };
        let h1 = if q > 0.0 { -2.0 * q * q.log2() } else { 0.0 };
        h0 + h1
    }
}
