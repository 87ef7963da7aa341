use serde::{Deserialize, Serialize};

use super::ReportError;

/// 1000- or 1024-based size prefixes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitBase {
    Binary,
    Decimal,
}

impl UnitBase {
    fn factor(self) -> f64 {
        match self {
            UnitBase::Binary => 1024.0,
            UnitBase::Decimal => 1000.0,
        }
    }
}

/// `bytes` expressed in units of `base^power` (power 1 = KB, 3 = GB).
pub fn scale_bytes(bytes: f64, base: UnitBase, power: i32) -> f64 {
    bytes / base.factor().powi(power)
}

/// Bits needed to hold the interest weights: `m * (k + 2) * x_bits` for
/// `m` interests, `k` daily samples and `x_bits` per stored value.
pub fn teci_alloc(m: u64, k: u64, x_bits: u64) -> Result<u128, ReportError> {
    for (name, v) in [("m", m), ("k", k), ("x_bits", x_bits)] {
        if v == 0 {
            return Err(ReportError::ZeroInput(name));
        }
    }
    u128::from(m)
        .checked_mul(u128::from(k) + 2)
        .and_then(|v| v.checked_mul(u128::from(x_bits)))
        .ok_or(ReportError::Overflow)
}

/// Average bytes a node buffers: `forwardings / (days * nodes) * avg_msg_bytes`.
pub fn buffer_estimate(forwardings: u64, days: u64, nodes: u64, avg_msg_bytes: f64) -> Result<f64, ReportError> {
    if days == 0 {
        return Err(ReportError::ZeroInput("days"));
    }
    if nodes == 0 {
        return Err(ReportError::ZeroInput("nodes"));
    }
    Ok(forwardings as f64 / (days as f64 * nodes as f64) * avg_msg_bytes)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn thirty_five_interests() {
        let bits = teci_alloc(35, 24, 64).unwrap();
        assert_eq!(bits, 58_240);
        let kb = scale_bytes(bits as f64 / 8.0, UnitBase::Binary, 1);
        assert!((kb - 7.11).abs() / 7.11 < 0.005, "{kb}");
    }

    #[test]
    fn smallest() {
        assert_eq!(teci_alloc(1, 1, 1).unwrap(), 3);
    }

    #[test]
    fn a_billion_interests() {
        let bits = teci_alloc(1_000_000_000, 24, 64).unwrap();
        assert_eq!(bits, 1_664_000_000_000);
        let gb = scale_bytes(bits as f64 / 8.0, UnitBase::Binary, 3);
        assert!((gb - 193.71).abs() / 193.71 < 0.005, "{gb}");
    }

    #[test]
    fn overflow_and_zero() {
        assert_eq!(teci_alloc(u64::MAX, u64::MAX, u64::MAX), Err(ReportError::Overflow));
        assert_eq!(teci_alloc(0, 1, 1), Err(ReportError::ZeroInput("m")));
    }

    #[test]
    fn buffer_examples() {
        let b = buffer_estimate(39_240, 12, 35, 52_275.0).unwrap();
        let mb = scale_bytes(b, UnitBase::Decimal, 2);
        assert!((mb - 4.88).abs() / 4.88 < 0.01, "{mb}");
        assert_eq!(buffer_estimate(0, 12, 35, 52_275.0).unwrap(), 0.0);
        assert_eq!(buffer_estimate(700, 7, 10, 1000.0).unwrap(), 10_000.0);
        assert!(buffer_estimate(1, 0, 1, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn linear_in_each_argument(m in 1u64..1_000_000, k in 1u64..1000, x in 1u64..128, c in 1u64..50) {
            let base = teci_alloc(m, k, x).unwrap();
            prop_assert_eq!(teci_alloc(m * c, k, x).unwrap(), base * u128::from(c));
            prop_assert_eq!(teci_alloc(m, k, x * c).unwrap(), base * u128::from(c));
            // affine in k: doubling k+2 doubles the result
            prop_assert_eq!(teci_alloc(m, 2 * k + 2, x).unwrap(), 2 * base);
        }
    }
}
