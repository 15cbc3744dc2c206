//! Set partitions of `{0, ..., t-1}` and the partition-weighted tensor sums
//! behind the moment/cumulant formulas.

use std::sync::OnceLock;

use crate::tensor::DenseTensor;

/// Largest supported cumulant order.
pub const MAX_ORDER: usize = 6;

/// A set partition; each block is a bitmask over `{0, ..., t-1}`.
/// Blocks are ordered by their smallest element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    blocks: Vec<u32>,
}

impl Partition {
    pub fn blocks(&self) -> &[u32] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Moebius weight `(|pi| - 1)! (-1)^(|pi| - 1)` of the moment-to-cumulant formula.
    pub fn moebius_weight(&self) -> f64 {
        let k = self.blocks.len();
        let fact: f64 = (1..k).map(|x| x as f64).product();
        if k % 2 == 1 {
            fact
        } else {
            -fact
        }
    }
}

/// All set partitions of `{0, ..., t-1}` for `1 <= t <= MAX_ORDER`.
pub fn partitions(t: usize) -> &'static [Partition] {
    static CACHE: OnceLock<Vec<Vec<Partition>>> = OnceLock::new();
    assert!((1..=MAX_ORDER).contains(&t), "partition order {t} out of range");
    &CACHE.get_or_init(|| (0..=MAX_ORDER).map(enumerate).collect())[t]
}

fn enumerate(t: usize) -> Vec<Partition> {
    if t == 0 {
        return Vec::new();
    }
    let mut out = vec![Partition { blocks: vec![1] }];
    for elem in 1..t {
        let bit = 1u32 << elem;
        let mut next = Vec::new();
        for p in &out {
            for b in 0..p.blocks.len() {
                let mut blocks = p.blocks.clone();
                blocks[b] |= bit;
                next.push(Partition { blocks });
            }
            let mut blocks = p.blocks.clone();
            blocks.push(bit);
            next.push(Partition { blocks });
        }
        out = next;
    }
    out
}

pub(crate) fn block_modes(mask: u32) -> impl Iterator<Item = usize> {
    (0..32).filter(move |l| mask & (1 << l) != 0)
}

/// Computes `sum_pi weight(pi) * prod_{B in pi} block(B)[i_B]` for every index
/// tuple `i` of an order-`dims.len()` tensor.
///
/// `block(B)` must return a tensor whose modes are the modes of `B` in
/// increasing order, so mode order is preserved in every product.
pub(crate) fn partition_sum<'a>(
    dims: &[usize],
    mut block: impl FnMut(u32) -> &'a DenseTensor,
    weight: impl Fn(&Partition) -> f64,
) -> DenseTensor {
    let t = dims.len();
    let mut out = DenseTensor::zeros(dims);
    for p in partitions(t) {
        let w = weight(p);
        if w == 0.0 {
            continue;
        }
        // per block: tensor and the stride each full mode contributes
        let parts: Vec<(&DenseTensor, Vec<usize>)> = p
            .blocks()
            .iter()
            .map(|&mask| {
                let tensor = block(mask);
                let local = tensor.strides();
                let mut full = vec![0usize; t];
                for (k, l) in block_modes(mask).enumerate() {
                    full[l] = local[k];
                }
                (tensor, full)
            })
            .collect();
        let mut idx = vec![0usize; t];
        for slot in out.data_mut().iter_mut() {
            let mut prod = w;
            for (tensor, s) in &parts {
                let off: usize = idx.iter().zip(s).map(|(i, st)| i * st).sum();
                prod *= tensor.data()[off];
            }
            *slot += prod;
            crate::tensor::increment(&mut idx, dims);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bell_numbers() {
        let counts: Vec<usize> = (1..=MAX_ORDER).map(|t| partitions(t).len()).collect();
        assert_eq!(counts, vec![1, 2, 5, 15, 52, 203]);
    }

    #[test]
    fn blocks_cover_every_element_once() {
        for t in 1..=MAX_ORDER {
            for p in partitions(t) {
                let mut union = 0u32;
                for &b in p.blocks() {
                    assert_eq!(union & b, 0);
                    union |= b;
                }
                assert_eq!(union, (1 << t) - 1);
            }
        }
    }

    #[test]
    fn moebius_weights_sum_to_zero_for_t_above_one() {
        // sum over partitions of (|pi|-1)!(-1)^(|pi|-1) is the cumulant of a constant 1
        for t in 2..=MAX_ORDER {
            let s: f64 = partitions(t).iter().map(|p| p.moebius_weight()).sum();
            assert_eq!(s, 0.0);
        }
    }
}
