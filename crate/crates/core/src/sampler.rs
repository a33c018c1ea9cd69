//! Randomized column selection: batch multinomial draws and the
//! Shrink-Expand weight chains used by the streaming algorithms.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{input, Result};

/// Seeded source of independent, reproducible random substreams.
///
/// Each `(stream, index)` pair addresses its own ChaCha8 keystream region, so
/// the draws consumed by one Bernoulli chain never depend on how many draws
/// other chains used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngHandle {
    seed: u64,
}

impl RngHandle {
    pub fn new(seed: u64) -> Self {
        RngHandle { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Generator for substream `(stream, index)`. Holds 2^36 words per index.
    pub fn substream(&self, stream: u64, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng.set_word_pos(u128::from(index) << 36);
        rng
    }

    /// A handle for an independent derived experiment (e.g. trial `k` of a sweep).
    pub fn derive(&self, k: u64) -> RngHandle {
        let mut rng = self.substream(u64::MAX, k);
        RngHandle::new(rng.random())
    }
}

/// Draws `m` i.i.d. indices from the multinomial distribution `p`, in draw order.
pub fn direct_sample<R: Rng + ?Sized>(p: &[f64], m: usize, rng: &mut R) -> Result<Vec<usize>> {
    if p.is_empty() {
        return input("cannot sample from an empty distribution");
    }
    if let Some(bad) = p.iter().find(|&&x| !(x >= 0.0) || !x.is_finite()) {
        return input(format!(
            "probability {bad} is not a finite nonnegative number"
        ));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return input(format!("probabilities sum to {total}, expected 1"));
    }
    let mut cdf = Vec::with_capacity(p.len());
    let mut acc = 0.0;
    for &x in p {
        acc += x;
        cdf.push(acc);
    }
    let last_positive = p.iter().rposition(|&x| x > 0.0).unwrap_or(0);
    Ok((0..m)
        .map(|_| {
            let u: f64 = rng.random::<f64>() * total;
            let i = cdf.partition_point(|&c| c <= u);
            i.min(last_positive)
        })
        .collect())
}

/// Retained column indices with their integer Shrink-Expand weights.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dictionary {
    weights: BTreeMap<usize, u64>,
    q_bar: u64,
}

impl Dictionary {
    pub fn new(q_bar: u64) -> Result<Self> {
        if q_bar == 0 {
            return input("space budget q̄ must be at least 1");
        }
        Ok(Dictionary {
            weights: BTreeMap::new(),
            q_bar,
        })
    }

    pub fn q_bar(&self) -> u64 {
        self.q_bar
    }

    /// `Q_t`
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.weights.contains_key(&i)
    }

    /// Weight `b_i`, zero for absent indices.
    pub fn weight(&self, i: usize) -> u64 {
        self.weights.get(&i).copied().unwrap_or(0)
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.weights.keys().copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.weights.iter().map(|(&i, &b)| (i, b))
    }

    pub(crate) fn remove(&mut self, i: usize) -> Option<u64> {
        self.weights.remove(&i)
    }

    /// Rebuilds a dictionary from `(index, weight)` pairs; every weight must be positive.
    pub fn from_entries(
        q_bar: u64,
        entries: impl IntoIterator<Item = (usize, u64)>,
    ) -> Result<Self> {
        let mut dict = Dictionary::new(q_bar)?;
        for (i, b) in entries {
            if b == 0 {
                return input(format!("index {i} has zero weight"));
            }
            if dict.weights.insert(i, b).is_some() {
                return input(format!("index {i} listed twice"));
            }
        }
        Ok(dict)
    }
}

/// Result of one Shrink-Expand pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShrinkExpandOutcome {
    pub dictionary: Dictionary,
    /// Previously retained indices whose weight dropped to zero.
    pub evicted: Vec<usize>,
    /// Whether the new index survived its own chain.
    pub admitted: bool,
}

/// Runs the weight chain for one column: while `b·p ≤ 1/q̄` and `b ≠ 0`,
/// draw `Bernoulli(b/(b+1))`, incrementing `b` on success and zeroing it on
/// failure.
pub fn run_chain<R: Rng + ?Sized>(mut b: u64, p: f64, q_bar: u64, rng: &mut R) -> u64 {
    let threshold = 1.0 / q_bar as f64;
    while b != 0 && b as f64 * p <= threshold {
        if rng.random_range(0..=b) < b {
            b += 1;
        } else {
            b = 0;
        }
    }
    b
}

/// One Shrink-Expand pass at step `step` (the zero-based index of the new column).
///
/// `p_tilde` must hold a positive probability for every retained index and for
/// `step`. Retained indices are processed in ascending order; each chain draws
/// from its own substream `(step, index)`.
pub fn shrink_expand(
    dict: &Dictionary,
    p_tilde: &BTreeMap<usize, f64>,
    step: usize,
    rng: &RngHandle,
) -> Result<ShrinkExpandOutcome> {
    shrink_expand_inner(dict, p_tilde, step, rng, true)
}

/// The Shrink half of [`shrink_expand`] alone: the new column is not offered.
pub fn shrink(
    dict: &Dictionary,
    p_tilde: &BTreeMap<usize, f64>,
    step: usize,
    rng: &RngHandle,
) -> Result<ShrinkExpandOutcome> {
    shrink_expand_inner(dict, p_tilde, step, rng, false)
}

fn shrink_expand_inner(
    dict: &Dictionary,
    p_tilde: &BTreeMap<usize, f64>,
    step: usize,
    rng: &RngHandle,
    expand: bool,
) -> Result<ShrinkExpandOutcome> {
    let mut weights = BTreeMap::new();
    let mut evicted = Vec::new();
    for (i, b) in dict.entries() {
        if i >= step {
            return input(format!("retained index {i} is not older than step {step}"));
        }
        let p = checked_probability(p_tilde, i)?;
        let mut chain = rng.substream(step as u64, i as u64);
        let out = run_chain(b, p, dict.q_bar, &mut chain);
        if out == 0 {
            evicted.push(i);
        } else {
            weights.insert(i, out);
        }
    }
    let b_new = if expand {
        let p_new = checked_probability(p_tilde, step)?;
        let mut chain = rng.substream(step as u64, step as u64);
        run_chain(1, p_new, dict.q_bar, &mut chain)
    } else {
        0
    };
    if b_new != 0 {
        weights.insert(step, b_new);
    }
    Ok(ShrinkExpandOutcome {
        dictionary: Dictionary {
            weights,
            q_bar: dict.q_bar,
        },
        evicted,
        admitted: b_new != 0,
    })
}

fn checked_probability(p_tilde: &BTreeMap<usize, f64>, i: usize) -> Result<f64> {
    match p_tilde.get(&i) {
        Some(&p) if p > 0.0 && p.is_finite() => Ok(p),
        Some(&p) => input(format!("probability {p} for index {i} is not positive")),
        None => input(format!("no probability supplied for index {i}")),
    }
}

/// Column weights `√b_i` of the selection matrix.
pub fn selection_weights(dict: &Dictionary) -> BTreeMap<usize, f64> {
    dict.entries()
        .map(|(i, b)| (i, (b as f64).sqrt()))
        .collect()
}
