//! Weighted pool-adjacent-violators.
//!
//! Computes the weighted L2 projection of a sequence onto the cone of
//! non-decreasing sequences. The same routine resolves buoyancy inversions
//! in the vessel (weights are layer volumes) and enforces monotone sensor
//! profiles on learned predictions (unit weights).

/// A run of pooled values sharing one fitted level.
#[derive(Debug, Clone, Copy)]
struct Block {
    weighted_sum: f64,
    weight: f64,
    len: usize,
}

impl Block {
    fn level(&self) -> f64 {
        self.weighted_sum / self.weight
    }
}

/// Non-decreasing weighted isotonic fit of `values`.
///
/// `weights` must have the same length as `values` and be strictly positive.
/// Adjacent violating blocks are merged into their weighted mean until the
/// fitted sequence is non-decreasing; the weighted sum is preserved.
pub fn pava_weighted(values: &[f64], weights: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), weights.len(), "values/weights length mismatch");
    let mut blocks: Vec<Block> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push(Block {
            weighted_sum: v * w,
            weight: w,
            len: 1,
        });
        while blocks.len() > 1 {
            let n = blocks.len();
            if blocks[n - 2].level() <= blocks[n - 1].level() {
                break;
            }
            let top = blocks.pop().unwrap();
            let below = blocks.last_mut().unwrap();
            below.weighted_sum += top.weighted_sum;
            below.weight += top.weight;
            below.len += top.len;
        }
    }

    let mut out = Vec::with_capacity(values.len());
    for b in &blocks {
        let level = b.level();
        out.extend(std::iter::repeat_n(level, b.len));
    }
    out
}

/// Unit-weight non-decreasing isotonic fit.
pub fn pava(values: &[f64]) -> Vec<f64> {
    let weights = vec![1.0; values.len()];
    pava_weighted(values, &weights)
}

pub(crate) fn is_non_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[0] <= w[1])
}
