use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_RATIOS: [f64; 3] = [0.7, 0.1, 0.2];

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

/// 70/10/20 board-level split.
pub fn split(boards: &[String], seed: u64) -> Split {
    split_with_ratios(boards, DEFAULT_RATIOS, seed).expect("default ratios are valid")
}

/// Shuffles the distinct board ids with `seed` and cuts them into three parts
/// whose sizes follow `ratios` by largest-remainder rounding (ties go to the
/// earlier part). Input order and duplicates do not affect the result.
pub fn split_with_ratios(boards: &[String], ratios: [f64; 3], seed: u64) -> Result<Split> {
    if ratios.iter().any(|r| !r.is_finite() || *r < 0.0) || ratios.iter().sum::<f64>() <= 0.0 {
        return Err(Error::invalid(format!("invalid split ratios {ratios:?}")));
    }
    let mut ids: Vec<String> = boards.to_vec();
    ids.sort();
    ids.dedup();
    if ids.is_empty() {
        return Ok(Split::default());
    }
    if ids.len() < 10 {
        log::warn!("{} boards: some split parts will be empty", ids.len());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);

    let counts = largest_remainder(ids.len(), ratios);
    let mut rest = ids.into_iter();
    let mut take = |n: usize| rest.by_ref().take(n).collect::<Vec<_>>();
    Ok(Split {
        train: take(counts[0]),
        val: take(counts[1]),
        test: take(counts[2]),
    })
}

fn largest_remainder(total: usize, ratios: [f64; 3]) -> [usize; 3] {
    let sum: f64 = ratios.iter().sum();
    let quotas = ratios.map(|r| r / sum * total as f64);
    let mut counts = quotas.map(|q| q.floor() as usize);
    let assigned: usize = counts.iter().sum();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("board{i:03}")).collect()
    }

    fn sizes(s: &Split) -> (usize, usize, usize) {
        (s.train.len(), s.val.len(), s.test.len())
    }

    #[test]
    fn proportions() {
        assert_eq!(sizes(&split(&ids(10), 0)), (7, 1, 2));
        assert_eq!(sizes(&split(&ids(113), 0)), (79, 11, 23));
        assert_eq!(sizes(&split(&ids(1), 0)), (1, 0, 0));
        assert_eq!(split(&[], 0), Split::default());
    }

    #[test]
    fn disjoint_cover_and_deterministic() {
        let boards = ids(57);
        let s = split(&boards, 9);
        let mut all: Vec<_> = s.train.iter().chain(&s.val).chain(&s.test).cloned().collect();
        all.sort();
        assert_eq!(all, boards);
        assert_eq!(s, split(&boards, 9));
        let mut reversed = boards.clone();
        reversed.reverse();
        reversed.push(boards[0].clone());
        assert_eq!(s, split(&reversed, 9));
        assert_ne!(s, split(&boards, 10));
    }

    #[test]
    fn custom_ratios() {
        let s = split_with_ratios(&ids(10), [1.0, 1.0, 0.0], 1).unwrap();
        assert_eq!(sizes(&s), (5, 5, 0));
        assert!(split_with_ratios(&ids(10), [0.0, 0.0, 0.0], 1).is_err());
        assert!(split_with_ratios(&ids(10), [-1.0, 1.0, 1.0], 1).is_err());
    }
}
