//! Row-major run-length encoding of binary masks.
//!
//! Counts alternate zero-runs and one-runs and always start with a zero-run,
//! which may have length 0. A 1×4 row `[1,1,0,1]` encodes as `[0,2,1,1]`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mask::BinaryMask;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RleError {
    #[error("run lengths sum to {sum}, expected {expected} for a {width}x{height} mask")]
    Corrupt {
        sum: u64,
        expected: u64,
        width: usize,
        height: usize,
    },
}

/// Encoded mask as it appears in interchange files: `{"rle": [...], "width": W, "height": H}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RleMask {
    pub rle: Vec<u64>,
    pub width: usize,
    pub height: usize,
}

impl RleMask {
    pub fn encode(mask: &BinaryMask) -> Self {
        Self {
            rle: encode(mask),
            width: mask.width(),
            height: mask.height(),
        }
    }

    pub fn decode(&self) -> Result<BinaryMask, RleError> {
        decode(&self.rle, self.width, self.height)
    }
}

pub fn encode(mask: &BinaryMask) -> Vec<u64> {
    let total = mask.width() * mask.height();
    let mut counts = Vec::new();
    let mut cursor = 0usize;
    for start in mask.ones() {
        if start < cursor {
            continue;
        }
        // zero-run then one-run beginning at `start`
        counts.push((start - cursor) as u64);
        let mut end = start + 1;
        while end < total && mask.get_index(end) {
            end += 1;
        }
        counts.push((end - start) as u64);
        cursor = end;
    }
    if cursor < total || counts.is_empty() {
        counts.push((total - cursor) as u64);
    }
    counts
}

pub fn decode(counts: &[u64], width: usize, height: usize) -> Result<BinaryMask, RleError> {
    let expected = (width * height) as u64;
    let sum = counts.iter().try_fold(0u64, |acc, &c| acc.checked_add(c));
    if sum != Some(expected) {
        return Err(RleError::Corrupt {
            sum: sum.unwrap_or(u64::MAX),
            expected,
            width,
            height,
        });
    }
    let mut mask = BinaryMask::new(width, height);
    let mut cursor = 0usize;
    for (i, &run) in counts.iter().enumerate() {
        let run = run as usize;
        if i % 2 == 1 {
            for index in cursor..cursor + run {
                mask.set(index % width, index / width, true);
            }
        }
        cursor += run;
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(bits: &[u8]) -> BinaryMask {
        BinaryMask::from_fn(bits.len(), 1, |x, _| bits[x] == 1)
    }

    #[test]
    fn encodes_documented_rows() {
        assert_eq!(encode(&row(&[0, 0, 1, 1, 1, 0])), vec![2, 3, 1]);
        assert_eq!(encode(&BinaryMask::new(2, 2)), vec![4]);
        assert_eq!(encode(&row(&[1, 1, 0, 1])), vec![0, 2, 1, 1]);
        assert_eq!(encode(&row(&[1, 1, 1])), vec![0, 3]);
    }

    #[test]
    fn decodes_documented_rows() {
        assert_eq!(decode(&[2, 3, 1], 6, 1).unwrap(), row(&[0, 0, 1, 1, 1, 0]));
        assert_eq!(decode(&[0, 2, 1, 1], 4, 1).unwrap(), row(&[1, 1, 0, 1]));
    }

    #[test]
    fn rejects_wrong_run_sum() {
        assert_eq!(
            decode(&[5], 2, 2),
            Err(RleError::Corrupt {
                sum: 5,
                expected: 4,
                width: 2,
                height: 2
            })
        );
        assert!(decode(&[u64::MAX, 2], 2, 2).is_err());
    }

    #[test]
    fn json_shape() {
        let m = RleMask::encode(&row(&[0, 1]));
        assert_eq!(
            serde_json::to_string(&m).unwrap(),
            r#"{"rle":[1,1],"width":2,"height":1}"#
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn round_trip_is_identity(
            (w, h, bits) in (1usize..24, 1usize..24)
                .prop_flat_map(|(w, h)| (Just(w), Just(h), proptest::collection::vec(any::<bool>(), w * h)))
        ) {
            let mask = BinaryMask::from_bools(w, h, &bits).unwrap();
            let counts = encode(&mask);
            prop_assert_eq!(counts.iter().sum::<u64>(), (w * h) as u64);
            prop_assert!(counts[1..].iter().all(|&c| c > 0));
            prop_assert_eq!(decode(&counts, w, h).unwrap(), mask);
        }
    }
}
