use super::rng::RngStream;
use super::state::Group;
use crate::error::{Error, Result};

fn check(n0: usize, block_size: usize) -> Result<()> {
    if block_size == 0 || block_size % 2 != 0 {
        return Err(Error::BadBlockConfig(format!(
            "block size must be a positive even number, got {block_size}"
        )));
    }
    if n0 % block_size != 0 {
        return Err(Error::BadBlockConfig(format!(
            "n0 = {n0} is not divisible by block size {block_size}"
        )));
    }
    Ok(())
}

/// Group sequence for the first `n0` subjects, drawn as consecutive blocks of
/// `block_size` that each hold `block_size / 2` subjects per group. Every
/// balanced ordering of a block is equally likely.
pub fn permuted_block_init(n0: usize, block_size: usize, rng: &mut RngStream) -> Result<Vec<Group>> {
    check(n0, block_size)?;
    let mut out = Vec::with_capacity(n0);
    for _ in 0..n0 / block_size {
        let mut block: Vec<Group> = (0..block_size)
            .map(|i| if i < block_size / 2 { Group::One } else { Group::Two })
            .collect();
        rng.shuffle(&mut block);
        out.extend(block);
    }
    Ok(out)
}

/// Conditional probability that each position of a block sequence is group
/// one, given the positions before it in the same block.
pub fn block_probabilities(sequence: &[Group], block_size: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(sequence.len());
    for block in sequence.chunks(block_size.max(1)) {
        let mut ones_left = block_size / 2;
        let mut left = block_size;
        for g in block {
            out.push(ones_left as f64 / left as f64);
            if *g == Group::One {
                ones_left = ones_left.saturating_sub(1);
            }
            left -= 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn blocks_of_four_balance_at_boundaries() {
        let mut rng = RngStream::new(11, 0);
        let seq = permuted_block_init(8, 4, &mut rng).unwrap();
        assert_eq!(seq.len(), 8);
        for end in [4, 8] {
            let n1 = seq[..end].iter().filter(|g| **g == Group::One).count();
            assert_eq!(n1 * 2, end);
        }
    }

    #[test]
    fn smallest_block_is_fair() {
        let mut ones_first = 0;
        for s in 0..4000 {
            let seq = permuted_block_init(2, 2, &mut RngStream::new(s, 0)).unwrap();
            assert_ne!(seq[0], seq[1]);
            if seq[0] == Group::One {
                ones_first += 1;
            }
        }
        let f = ones_first as f64 / 4000.0;
        assert!((f - 0.5).abs() < 0.03, "{f}");
    }

    #[test]
    fn deterministic_under_seed() {
        let a = permuted_block_init(4, 2, &mut RngStream::new(5, 9)).unwrap();
        let b = permuted_block_init(4, 2, &mut RngStream::new(5, 9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_config() {
        let mut rng = RngStream::new(1, 1);
        assert!(matches!(
            permuted_block_init(8, 3, &mut rng),
            Err(Error::BadBlockConfig(_))
        ));
        assert!(matches!(
            permuted_block_init(6, 4, &mut rng),
            Err(Error::BadBlockConfig(_))
        ));
        assert!(matches!(
            permuted_block_init(4, 0, &mut rng),
            Err(Error::BadBlockConfig(_))
        ));
    }

    #[test]
    fn six_orderings_equiprobable() {
        let runs = 10_000;
        let mut freq: HashMap<Vec<Group>, usize> = HashMap::new();
        for s in 0..runs {
            let seq = permuted_block_init(4, 4, &mut RngStream::new(2024, s)).unwrap();
            *freq.entry(seq).or_default() += 1;
        }
        assert_eq!(freq.len(), 6);
        for (k, v) in freq {
            let f = v as f64 / runs as f64;
            assert!((f - 1.0 / 6.0).abs() < 0.02, "{k:?}: {f}");
        }
    }

    #[test]
    fn conditional_probabilities() {
        use Group::*;
        let p = block_probabilities(&[One, Two, Two, One], 4);
        assert_eq!(p, vec![0.5, 1.0 / 3.0, 0.5, 1.0]);
    }
}
