//! Set partitions of tag subsets, enumerated once for every bitmask below
//! `2^MAX_TAGS` (4140 partitions for the full 8-element set).

use std::sync::OnceLock;

use super::MAX_TAGS;

/// Blocks of one partition, each a bitmask.
pub(crate) type Partition = Box<[usize]>;

static TABLE: OnceLock<Vec<Vec<Partition>>> = OnceLock::new();

/// All partitions of the bitmask `mask`.
pub(crate) fn partitions_of(mask: usize) -> &'static [Partition] {
    &TABLE.get_or_init(build)[mask]
}

fn build() -> Vec<Vec<Partition>> {
    (0..1usize << MAX_TAGS)
        .map(|mask| {
            let mut out = Vec::new();
            let mut blocks = Vec::new();
            enumerate(mask, &mut blocks, &mut out);
            out
        })
        .collect()
}

fn enumerate(rest: usize, blocks: &mut Vec<usize>, out: &mut Vec<Partition>) {
    if rest == 0 {
        if !blocks.is_empty() {
            out.push(blocks.clone().into_boxed_slice());
        }
        return;
    }
    // the lowest remaining element anchors the next block
    let anchor = rest & rest.wrapping_neg();
    let others = rest ^ anchor;
    let mut sub = others;
    loop {
        blocks.push(anchor | sub);
        enumerate(others ^ sub, blocks, out);
        blocks.pop();
        if sub == 0 {
            break;
        }
        sub = (sub - 1) & others;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_are_bell_numbers() {
        let bell = [1, 1, 2, 5, 15, 52, 203, 877, 4140];
        for (t, &b) in bell.iter().enumerate().skip(1) {
            assert_eq!(partitions_of((1 << t) - 1).len(), b);
        }
        assert!(partitions_of(0).is_empty());
    }

    #[test]
    fn blocks_cover_the_mask_disjointly() {
        let mask = 0b1011_0110;
        for p in partitions_of(mask) {
            let mut seen = 0;
            for &b in p.iter() {
                assert_ne!(b, 0);
                assert_eq!(seen & b, 0);
                seen |= b;
            }
            assert_eq!(seen, mask);
        }
    }
}
