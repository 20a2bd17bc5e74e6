//! Cardinality-constrained greedy maximization.
//!
//! Every variant breaks ties towards the lowest index, so naive and lazy
//! greedy agree element for element whenever gains are nonincreasing.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use log::warn;
use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::InfoFunction;

/// Ground sets above this size default to stochastic greedy.
pub const STOCHASTIC_THRESHOLD: usize = 20_000;

/// Enumeration limit of [`exhaustive_opt`].
pub const EXHAUSTIVE_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Naive,
    Lazy,
    Stochastic,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "naive" => Ok(Variant::Naive),
            "lazy" => Ok(Variant::Lazy),
            "stochastic" => Ok(Variant::Stochastic),
            other => Err(Error::config(format!("unknown optimizer '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GreedyConfig {
    pub budget: usize,
    /// `None` picks lazy greedy, or stochastic above
    /// [`STOCHASTIC_THRESHOLD`] elements.
    pub variant: Option<Variant>,
    /// Stochastic greedy accuracy parameter, in (0, 1).
    pub epsilon: f64,
    pub seed: u64,
    pub partitions: usize,
    /// Stop as soon as the best available gain is negative.
    pub stop_on_negative: bool,
}

impl Default for GreedyConfig {
    fn default() -> Self {
        Self {
            budget: 1,
            variant: None,
            epsilon: 0.01,
            seed: 0,
            partitions: 1,
            stop_on_negative: false,
        }
    }
}

impl GreedyConfig {
    pub fn new(budget: usize) -> Self {
        Self {
            budget,
            ..Self::default()
        }
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = Some(variant);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_partitions(mut self, partitions: usize) -> Self {
        self.partitions = partitions;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::config("budget must be positive"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::config(format!(
                "stochastic epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        if self.partitions == 0 {
            return Err(Error::config("partitions must be at least 1"));
        }
        if self.partitions > self.budget {
            return Err(Error::config(format!(
                "{} partitions cannot each receive a pick from a budget of {}",
                self.partitions, self.budget
            )));
        }
        Ok(())
    }

    pub fn resolved_variant(&self, n: usize) -> Variant {
        self.variant.unwrap_or(if n > STOCHASTIC_THRESHOLD {
            Variant::Stochastic
        } else {
            Variant::Lazy
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionResult {
    pub chosen: Vec<usize>,
    pub gains: Vec<f64>,
    pub value: f64,
    /// Number of marginal-gain queries.
    pub evaluations: u64,
    pub numerical_warnings: usize,
    #[serde(with = "duration_secs")]
    pub elapsed: Duration,
}

/// Equality ignores wall time.
impl PartialEq for SelectionResult {
    fn eq(&self, other: &Self) -> bool {
        self.chosen == other.chosen
            && self.gains.len() == other.gains.len()
            && self
                .gains
                .iter()
                .zip(&other.gains)
                .all(|(a, b)| a.to_bits() == b.to_bits())
            && self.value.to_bits() == other.value.to_bits()
            && self.evaluations == other.evaluations
            && self.numerical_warnings == other.numerical_warnings
    }
}

mod duration_secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_secs_f64(f64::deserialize(d)?))
    }
}

/// `⌈(n/B)·ln(1/ε)⌉`, at least 1.
pub fn stochastic_sample_size(n: usize, budget: usize, epsilon: f64) -> usize {
    let s = (n as f64 / budget as f64 * (1.0 / epsilon).ln()).ceil();
    (s as usize).max(1)
}

/// Per-partition quotas: `⌊B/p⌋` each, one extra for the first `B mod p`.
pub fn partition_quotas(budget: usize, partitions: usize) -> Vec<usize> {
    let (base, extra) = (budget / partitions, budget % partitions);
    (0..partitions).map(|i| base + usize::from(i < extra)).collect()
}

/// Max-heap entry: larger gain first, then smaller index.
#[derive(Debug, Clone, Copy)]
struct Entry {
    gain: f64,
    index: usize,
    stamp: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| other.index.cmp(&self.index))
    }
}

/// `true` if `(g, i)` beats the incumbent under gain-then-lowest-index.
#[inline]
fn better(g: f64, i: usize, best: Option<(f64, usize)>) -> bool {
    match best {
        None => true,
        Some((bg, bi)) => g > bg || (g == bg && i < bi),
    }
}

/// Greedy maximization of `f` under `|A| ≤ B`.
pub fn greedy_select(f: &InfoFunction, cfg: &GreedyConfig) -> Result<SelectionResult> {
    if cfg.budget == 0 {
        return Err(Error::config("budget must be positive"));
    }
    if !(cfg.epsilon > 0.0 && cfg.epsilon < 1.0) {
        return Err(Error::config("stochastic epsilon must lie in (0, 1)"));
    }
    let n = f.ground_size();
    if n == 0 {
        return Err(Error::config("ground set is empty"));
    }
    let budget = if cfg.budget > n {
        warn!("budget {} exceeds ground set of {n}; selecting everything", cfg.budget);
        n
    } else {
        cfg.budget
    };
    let start = Instant::now();
    let mut run = Run {
        f,
        state: f.new_state(),
        gains: Vec::with_capacity(budget),
        evaluations: 0,
    };
    match cfg.resolved_variant(n) {
        Variant::Naive => run.naive(budget, cfg.stop_on_negative),
        Variant::Lazy => run.lazy(budget, cfg.stop_on_negative),
        Variant::Stochastic => run.stochastic(budget, cfg),
    }
    Ok(run.finish(start))
}

struct Run<'f> {
    f: &'f InfoFunction,
    state: crate::functions::SelectionState,
    gains: Vec<f64>,
    evaluations: u64,
}

impl Run<'_> {
    #[inline]
    fn gain(&mut self, x: usize) -> f64 {
        self.evaluations += 1;
        self.f.gain_unchecked(&self.state, x)
    }

    fn take(&mut self, x: usize, g: f64) {
        self.f.commit_unchecked(&mut self.state, x, g);
        self.gains.push(g);
    }

    fn naive(&mut self, budget: usize, stop_on_negative: bool) {
        let n = self.f.ground_size();
        for _ in 0..budget {
            let mut best = None;
            for x in 0..n {
                if self.state.contains(x) {
                    continue;
                }
                let g = self.gain(x);
                if better(g, x, best) {
                    best = Some((g, x));
                }
            }
            let Some((g, x)) = best else { break };
            if stop_on_negative && g < 0.0 {
                break;
            }
            self.take(x, g);
        }
    }

    fn lazy(&mut self, budget: usize, stop_on_negative: bool) {
        let n = self.f.ground_size();
        let mut heap: BinaryHeap<Entry> = (0..n)
            .map(|index| Entry {
                gain: self.gain(index),
                index,
                stamp: 0,
            })
            .collect();
        while self.gains.len() < budget {
            let Some(top) = heap.pop() else { break };
            let round = self.gains.len();
            if top.stamp == round {
                if stop_on_negative && top.gain < 0.0 {
                    break;
                }
                self.take(top.index, top.gain);
            } else {
                heap.push(Entry {
                    gain: self.gain(top.index),
                    index: top.index,
                    stamp: round,
                });
            }
        }
    }

    fn stochastic(&mut self, budget: usize, cfg: &GreedyConfig) {
        let n = self.f.ground_size();
        let s = stochastic_sample_size(n, budget, cfg.epsilon);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut remaining: Vec<usize> = (0..n).collect();
        for _ in 0..budget {
            let k = s.min(remaining.len());
            let mut best: Option<(f64, usize)> = None;
            let mut best_slot = 0;
            for slot in index::sample(&mut rng, remaining.len(), k) {
                let x = remaining[slot];
                let g = self.gain(x);
                if better(g, x, best) {
                    best = Some((g, x));
                    best_slot = slot;
                }
            }
            let Some((g, x)) = best else { break };
            if cfg.stop_on_negative && g < 0.0 {
                break;
            }
            remaining.swap_remove(best_slot);
            self.take(x, g);
        }
    }

    fn finish(self, start: Instant) -> SelectionResult {
        SelectionResult {
            chosen: self.state.chosen().to_vec(),
            value: self.gains.iter().sum(),
            gains: self.gains,
            evaluations: self.evaluations,
            numerical_warnings: self.state.numerical_warnings(),
            elapsed: start.elapsed(),
        }
    }
}

/// Random-partition greedy over a ground set of `n` elements.
///
/// The ground set is shuffled with `cfg.seed` into `p` near-equal chunks;
/// `build` receives each chunk's global indices (ascending) and returns a
/// function over exactly those elements. Chunks run concurrently and are
/// merged in chunk order; `chosen` holds global indices and `value` is the
/// sum of per-chunk objectives.
pub fn partitioned_select<B>(n: usize, cfg: &GreedyConfig, build: B) -> Result<SelectionResult>
where
    B: Fn(&[usize]) -> Result<InfoFunction> + Sync,
{
    cfg.validate()?;
    if n == 0 {
        return Err(Error::config("ground set is empty"));
    }
    let start = Instant::now();
    let p = cfg.partitions;
    let budget = cfg.budget.min(n);
    if cfg.budget > n {
        warn!("budget {} exceeds ground set of {n}; selecting everything", cfg.budget);
    }
    let chunks = split_chunks(n, p, cfg.seed);
    let quotas = partition_quotas(budget, p);
    for (i, (chunk, &q)) in chunks.iter().zip(&quotas).enumerate() {
        if chunk.len() < q {
            return Err(Error::config(format!(
                "partition {i} holds {} elements but needs {q} picks",
                chunk.len()
            )));
        }
    }
    let run_chunk = |(i, (chunk, &quota)): (usize, (&Vec<usize>, &usize))| -> Result<SelectionResult> {
        let f = build(chunk)?;
        if f.ground_size() != chunk.len() {
            return Err(Error::DimensionMismatch(format!(
                "partition {i}: function covers {} elements, chunk has {}",
                f.ground_size(),
                chunk.len()
            )));
        }
        let local = GreedyConfig {
            budget: quota,
            partitions: 1,
            seed: cfg.seed.wrapping_add(i as u64 + 1),
            ..cfg.clone()
        };
        let mut r = greedy_select(&f, &local)?;
        for x in &mut r.chosen {
            *x = chunk[*x];
        }
        Ok(r)
    };
    let parts: Vec<SelectionResult> = if p == 1 {
        vec![run_chunk((0, (&chunks[0], &quotas[0])))?]
    } else {
        chunks
            .par_iter()
            .zip(quotas.par_iter())
            .enumerate()
            .map(run_chunk)
            .collect::<Result<_>>()?
    };
    let mut out = SelectionResult {
        chosen: Vec::with_capacity(budget),
        gains: Vec::with_capacity(budget),
        value: 0.0,
        evaluations: 0,
        numerical_warnings: 0,
        elapsed: Duration::ZERO,
    };
    for part in parts {
        out.chosen.extend(part.chosen);
        out.gains.extend(part.gains);
        out.value += part.value;
        out.evaluations += part.evaluations;
        out.numerical_warnings += part.numerical_warnings;
    }
    out.elapsed = start.elapsed();
    Ok(out)
}

/// Seeded split of `0..n` into `p` chunks whose sizes differ by at most one.
/// Each chunk is returned in ascending order; with `p == 1` it is `0..n`.
pub fn split_chunks(n: usize, p: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    if p > 1 {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let sizes = partition_quotas(n, p);
    let mut chunks = Vec::with_capacity(p);
    let mut rest = order.as_slice();
    for size in sizes {
        let (head, tail) = rest.split_at(size);
        let mut chunk = head.to_vec();
        chunk.sort_unstable();
        chunks.push(chunk);
        rest = tail;
    }
    chunks
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Best set of size at most `budget` by enumeration. Ties keep the set
/// found first (smaller sets first, then lexicographic order).
pub fn exhaustive_opt(f: &InfoFunction, budget: usize) -> Result<SelectionResult> {
    let n = f.ground_size();
    if budget == 0 {
        return Err(Error::config("budget must be positive"));
    }
    let budget = budget.min(n);
    let total: u128 = (0..=budget).map(|k| binomial(n, k)).sum();
    if total > EXHAUSTIVE_LIMIT {
        return Err(Error::TooLarge(format!(
            "{total} subsets for n={n}, B={budget} (limit {EXHAUSTIVE_LIMIT})"
        )));
    }
    let start = Instant::now();
    let mut best: (f64, Vec<usize>) = (0.0, Vec::new());
    let mut evaluations = 0u64;
    for k in 1..=budget {
        let mut comb: Vec<usize> = (0..k).collect();
        loop {
            evaluations += 1;
            let v = f.evaluate(&comb)?;
            if v > best.0 {
                best = (v, comb.clone());
            }
            // Advance to the next k-combination in lexicographic order.
            let mut i = k;
            while i > 0 && comb[i - 1] == n - k + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            comb[i - 1] += 1;
            for j in i..k {
                comb[j] = comb[j - 1] + 1;
            }
        }
    }
    let mut state = f.new_state();
    let mut gains = Vec::with_capacity(best.1.len());
    for &x in &best.1 {
        gains.push(f.commit(&mut state, x)?);
    }
    Ok(SelectionResult {
        chosen: best.1,
        gains,
        value: best.0,
        evaluations,
        numerical_warnings: state.numerical_warnings(),
        elapsed: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use ndarray::{array, Array2};
    use rand::Rng;
    use rand_distr::StandardNormal;

    use super::*;
    use crate::functions::{FunctionKind, FunctionParams, KernelBlocks};
    use crate::similarity::{cosine_kernel, EmbeddingMatrix, SimilarityKernel};

    /// GCMI with `|Q| = 1` and cross similarities `w / 2` has gains `w`.
    fn modular(w: &[f64]) -> InfoFunction {
        let cross = Array2::from_shape_fn((w.len(), 1), |(i, _)| w[i] / 2.0);
        InfoFunction::new(
            FunctionKind::Gcmi,
            KernelBlocks {
                query: Some(Arc::new(SimilarityKernel::from_dense(cross, false).unwrap())),
                ..Default::default()
            },
            FunctionParams::default(),
        )
        .unwrap()
    }

    fn random_flvmi(seed: u64, n: usize, q: usize) -> InfoFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = Array2::from_shape_fn((n + q, 8), |_| rng.sample::<f64, _>(StandardNormal));
        let e = EmbeddingMatrix::from_rows(e).unwrap();
        let joint = cosine_kernel(&e, &e).unwrap();
        let u: Vec<usize> = (0..n).collect();
        let qs: Vec<usize> = (n..n + q).collect();
        InfoFunction::from_joint(FunctionKind::Flvmi, &joint, &u, &qs, &[], FunctionParams::default())
            .unwrap()
    }

    #[test]
    fn modular_greedy_is_top_b() {
        let f = modular(&[3.0, 1.0, 2.0]);
        for v in [Variant::Naive, Variant::Lazy] {
            let r = greedy_select(&f, &GreedyConfig::new(2).with_variant(v)).unwrap();
            assert_eq!(r.chosen, vec![0, 2]);
            assert_eq!(r.gains, vec![3.0, 2.0]);
        }
        let r = exhaustive_opt(&f, 2).unwrap();
        assert_eq!(r.chosen, vec![0, 2]);
    }

    #[test]
    fn naive_and_lazy_agree_on_k3() {
        let k3 = SimilarityKernel::from_dense(
            array![[1.0, 0.5, 0.2], [0.5, 1.0, 0.4], [0.2, 0.4, 1.0]],
            true,
        )
        .unwrap();
        let f = InfoFunction::from_joint(
            FunctionKind::Flvmi,
            &k3,
            &[0, 1, 2],
            &[2],
            &[],
            FunctionParams::default(),
        )
        .unwrap();
        let naive = greedy_select(&f, &GreedyConfig::new(2).with_variant(Variant::Naive)).unwrap();
        let lazy = greedy_select(&f, &GreedyConfig::new(2).with_variant(Variant::Lazy)).unwrap();
        assert_eq!(naive.chosen, lazy.chosen);
        assert_eq!(naive.gains, lazy.gains);
    }

    #[test]
    fn lazy_matches_naive_on_random_instances() {
        for seed in 0..30 {
            let f = random_flvmi(seed, 40, 3);
            let naive = greedy_select(&f, &GreedyConfig::new(10).with_variant(Variant::Naive)).unwrap();
            let lazy = greedy_select(&f, &GreedyConfig::new(10).with_variant(Variant::Lazy)).unwrap();
            assert_eq!(naive.chosen, lazy.chosen);
            assert_eq!(naive.gains, lazy.gains);
            assert!(lazy.evaluations <= naive.evaluations);
        }
    }

    #[test]
    fn sample_size_formula() {
        assert_eq!(stochastic_sample_size(1000, 10, 0.01), 461);
        assert_eq!(stochastic_sample_size(10, 10, 0.5), 1);
    }

    #[test]
    fn quotas_distribute_remainder_first() {
        assert_eq!(partition_quotas(7, 3), vec![3, 2, 2]);
        assert!(partition_quotas(25_000, 50).iter().all(|&q| q == 500));
    }

    #[test]
    fn budget_beyond_ground_set_selects_everything() {
        let f = modular(&[1.0, 2.0, 3.0]);
        let r = greedy_select(&f, &GreedyConfig::new(10)).unwrap();
        assert_eq!(r.chosen, vec![2, 1, 0]);
        assert!(greedy_select(&f, &GreedyConfig::new(0)).is_err());
    }

    #[test]
    fn stop_on_negative_is_opt_in() {
        let k = SimilarityKernel::from_dense(
            array![[1.0, 0.9, 0.9], [0.9, 1.0, 0.9], [0.9, 0.9, 1.0]],
            true,
        )
        .unwrap();
        let f = InfoFunction::from_joint(
            FunctionKind::Gc,
            &k,
            &[0, 1, 2],
            &[],
            &[],
            FunctionParams::default(),
        )
        .unwrap();
        let full = greedy_select(&f, &GreedyConfig::new(3)).unwrap();
        assert_eq!(full.chosen.len(), 3);
        assert!(full.gains.iter().any(|&g| g < 0.0));
        let cfg = GreedyConfig {
            stop_on_negative: true,
            ..GreedyConfig::new(3)
        };
        let early = greedy_select(&f, &cfg).unwrap();
        assert!(early.chosen.len() < 3);
        assert!(early.gains.iter().all(|&g| g >= 0.0));
    }

    #[test]
    fn stochastic_is_deterministic_per_seed() {
        let f = random_flvmi(5, 300, 4);
        let cfg = GreedyConfig::new(20).with_variant(Variant::Stochastic).with_seed(9);
        let a = greedy_select(&f, &cfg).unwrap();
        let b = greedy_select(&f, &cfg).unwrap();
        assert_eq!(a, b);
        let mut seen = a.chosen.clone();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 20);
    }

    #[test]
    fn single_partition_equals_plain_greedy() {
        let f = random_flvmi(3, 50, 2);
        let cfg = GreedyConfig::new(7).with_variant(Variant::Lazy);
        let plain = greedy_select(&f, &cfg).unwrap();
        let parted = partitioned_select(50, &cfg, |chunk| {
            assert_eq!(chunk, (0..50).collect::<Vec<_>>().as_slice());
            Ok(f.clone())
        })
        .unwrap();
        assert_eq!(plain, parted);
    }

    #[test]
    fn partitions_cover_budget_without_duplicates() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let e = Array2::from_shape_fn((103, 6), |_| rng.sample::<f64, _>(StandardNormal));
        let e = EmbeddingMatrix::from_rows(e).unwrap();
        let cfg = GreedyConfig::new(17).with_partitions(4).with_seed(3);
        let r = partitioned_select(103, &cfg, |chunk| {
            let sub = e.select(chunk)?;
            InfoFunction::from_embeddings(FunctionKind::Fl, &sub, None, None, FunctionParams::default())
        })
        .unwrap();
        assert_eq!(r.chosen.len(), 17);
        let mut s = r.chosen.clone();
        s.sort_unstable();
        s.dedup();
        assert_eq!(s.len(), 17);
        assert!(s.iter().all(|&x| x < 103));
        let again = partitioned_select(103, &cfg, |chunk| {
            let sub = e.select(chunk)?;
            InfoFunction::from_embeddings(FunctionKind::Fl, &sub, None, None, FunctionParams::default())
        })
        .unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn partition_validation() {
        let unit = |c: &[usize]| Ok(modular(&vec![1.0; c.len()]));
        let too_many = GreedyConfig::new(2).with_partitions(3);
        assert!(partitioned_select(6, &too_many, unit).is_err());
        let one_each = GreedyConfig::new(4).with_partitions(4);
        assert_eq!(partitioned_select(4, &one_each, unit).unwrap().chosen.len(), 4);
        let wrong_size = GreedyConfig::new(2).with_partitions(2);
        assert!(partitioned_select(6, &wrong_size, |_| Ok(modular(&[1.0]))).is_err());
    }

    #[test]
    fn chunks_are_a_partition() {
        let chunks = split_chunks(23, 5, 7);
        let sizes: Vec<usize> = chunks.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![5, 5, 5, 4, 4]);
        let mut all: Vec<usize> = chunks.concat();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
    }

    #[test]
    fn exhaustive_beats_greedy_and_full_set_for_n3() {
        let f = random_flvmi(2, 12, 3);
        let opt = exhaustive_opt(&f, 3).unwrap();
        let g = greedy_select(&f, &GreedyConfig::new(3).with_variant(Variant::Naive)).unwrap();
        assert!(opt.value >= g.value - 1e-12);
        assert!(g.value >= (1.0 - (-1.0f64).exp()) * opt.value);

        let small = modular(&[0.5, 0.25, 0.125]);
        assert_eq!(exhaustive_opt(&small, 3).unwrap().chosen, vec![0, 1, 2]);

        let big = modular(&vec![1.0; 40]);
        assert!(matches!(exhaustive_opt(&big, 10), Err(Error::TooLarge(_))));
    }
}
