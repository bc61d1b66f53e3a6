//! The three MONK's problems, generated from their target concepts.
//!
//! Each robot is described by six attributes; the full space has 432
//! instances and serves as the test set. Training sets are seeded samples of
//! the published sizes (124, 169, 122), with 5% of the Monks-3 training labels
//! flipped to model its classification noise.

use std::fmt::Write as _;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Number of values of `a1..a6`.
pub const ATTRIBUTE_VALUES: [usize; 6] = [3, 3, 2, 3, 4, 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Problem {
    One,
    Two,
    Three,
}

impl Problem {
    pub fn all() -> [Problem; 3] {
        [Problem::One, Problem::Two, Problem::Three]
    }

    pub fn number(self) -> u8 {
        match self {
            Problem::One => 1,
            Problem::Two => 2,
            Problem::Three => 3,
        }
    }

    pub fn train_size(self) -> usize {
        match self {
            Problem::One => 124,
            Problem::Two => 169,
            Problem::Three => 122,
        }
    }

    /// Training labels flipped after sampling.
    pub fn noisy_labels(self) -> usize {
        match self {
            Problem::Three => 6,
            _ => 0,
        }
    }

    /// Target concept over 1-based attribute values.
    pub fn label(self, a: [u8; 6]) -> bool {
        match self {
            Problem::One => a[0] == a[1] || a[4] == 1,
            Problem::Two => a.iter().filter(|&&v| v == 1).count() == 2,
            Problem::Three => (a[4] == 3 && a[3] == 1) || (a[4] != 4 && a[1] != 3),
        }
    }
}

/// All 432 attribute combinations in lexicographic order.
pub fn instance_space() -> Vec<[u8; 6]> {
    let mut out = Vec::with_capacity(ATTRIBUTE_VALUES.iter().product());
    let mut cur = [1u8; 6];
    loop {
        out.push(cur);
        let mut pos = 5;
        loop {
            if (cur[pos] as usize) < ATTRIBUTE_VALUES[pos] {
                cur[pos] += 1;
                break;
            }
            cur[pos] = 1;
            if pos == 0 {
                return out;
            }
            pos -= 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonksSplit {
    pub train: Vec<([u8; 6], bool)>,
    pub test: Vec<([u8; 6], bool)>,
}

pub fn generate(problem: Problem, seed: u64) -> MonksSplit {
    let space = instance_space();
    let test: Vec<_> = space.iter().map(|&a| (a, problem.label(a))).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks = index::sample(&mut rng, space.len(), problem.train_size()).into_vec();
    picks.sort_unstable();
    let mut train: Vec<_> = picks.iter().map(|&i| test[i]).collect();
    let mut flip: Vec<usize> = (0..train.len()).collect();
    flip.shuffle(&mut rng);
    for &i in &flip[..problem.noisy_labels()] {
        train[i].1 = !train[i].1;
    }
    MonksSplit { train, test }
}

/// CSV with header `a1,...,a6,class`.
pub fn to_csv(rows: &[([u8; 6], bool)]) -> String {
    let mut out = String::from("a1,a2,a3,a4,a5,a6,class\n");
    for (a, y) in rows {
        for v in a {
            write!(out, "{v},").unwrap();
        }
        writeln!(out, "{}", u8::from(*y)).unwrap();
    }
    out
}
