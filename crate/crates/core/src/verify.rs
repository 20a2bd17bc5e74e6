//! Brute-force self-checks: closed forms against set-arithmetic definitions,
//! Table 1 style reductions, the greedy approximation bound and stochastic
//! greedy quality. Used by the `verify` command and the acceptance tests.

use std::fmt;
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::functions::{
    BaseKind, Family, FunctionKind, FunctionParams, GroundTruthOracle, InfoFunction,
};
use crate::greedy::{exhaustive_opt, greedy_select, GreedyConfig, Variant};
use crate::scenarios::make_blobs;
use crate::similarity::{cosine_kernel, regularize, EmbeddingMatrix, SimilarityKernel, LOGDET_EPSILON};

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub name: &'static str,
    pub checks: u64,
    pub failures: u64,
    /// Largest error relative to the suite's tolerance scale.
    pub worst: f64,
    pub first_failure: Option<String>,
    pub elapsed: Duration,
}

impl SuiteReport {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            checks: 0,
            failures: 0,
            worst: 0.0,
            first_failure: None,
            elapsed: Duration::ZERO,
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.checks > 0
    }

    fn check(&mut self, ok: bool, worst: f64, describe: impl FnOnce() -> String) {
        self.checks += 1;
        self.worst = self.worst.max(worst);
        if !ok {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(describe());
            }
        }
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {} checks, {} failures, worst {:.3e}, {:.2}s",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.checks,
            self.failures,
            self.worst,
            self.elapsed.as_secs_f64()
        )?;
        if let Some(msg) = &self.first_failure {
            write!(f, " (first: {msg})")?;
        }
        Ok(())
    }
}

/// Comparison tolerance: relative for the log-determinant family.
pub fn tolerance(kind: FunctionKind, reference: f64) -> f64 {
    if kind.base() == BaseKind::LogDet {
        1e-6 * reference.abs().max(1.0)
    } else {
        1e-9
    }
}

/// Cosine kernel over `nu + nq + np` Gaussian points in 5 dimensions with
/// ε added to the diagonal; U, Q and P are consecutive index ranges.
pub fn random_joint(seed: u64, nu: usize, nq: usize, np: usize, eps: f64) -> Result<SimilarityKernel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((nu + nq + np, 5), |_| rng.sample::<f64, _>(StandardNormal));
    let e = EmbeddingMatrix::from_rows(x)?;
    regularize(&cosine_kernel(&e, &e)?, eps)
}

fn subsets(n: usize) -> impl Iterator<Item = Vec<usize>> {
    (0u32..1 << n).map(move |mask| (0..n).filter(|&i| mask >> i & 1 == 1).collect())
}

/// Direct evaluation of `Σ_{i∈Q} max_{j∈A} s_ij + Σ_{j∈A} max_{i∈Q} s_ij`.
fn flqmi_direct(joint: &SimilarityKernel, a: &[usize], q: &[usize]) -> f64 {
    if a.is_empty() || q.is_empty() {
        return 0.0;
    }
    let best = |i: usize, over: &[usize]| over.iter().map(|&j| joint.get(i, j)).fold(f64::NEG_INFINITY, f64::max);
    q.iter().map(|&i| best(i, a)).sum::<f64>() + a.iter().map(|&j| best(j, q)).sum::<f64>()
}

/// Every kind on `trials` random instances with up to 10 ground elements
/// and up to 3 query and conditioning elements, over all subsets of U.
pub fn oracle_equivalence(trials: usize, seed: u64) -> Result<SuiteReport> {
    let start = Instant::now();
    let mut report = SuiteReport::new("oracle equivalence");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = FunctionParams::default();
    for t in 0..trials {
        let nu = rng.random_range(1..=10);
        let nq = rng.random_range(1..=3);
        let np = rng.random_range(1..=3);
        let joint = random_joint(rng.random(), nu, nq, np, LOGDET_EPSILON)?;
        let u: Vec<usize> = (0..nu).collect();
        let q: Vec<usize> = (nu..nu + nq).collect();
        let p: Vec<usize> = (nu + nq..nu + nq + np).collect();
        for kind in FunctionKind::ALL {
            let f = InfoFunction::from_joint(kind, &joint, &u, &q, &p, params)?;
            let oracle = GroundTruthOracle::new(kind.base(), &joint, u.clone()).with_lambda(params.gc_lambda);
            let fl = GroundTruthOracle::new(BaseKind::Fl, &joint, u.clone());
            for a in subsets(nu) {
                let want = match kind {
                    FunctionKind::Flqmi => flqmi_direct(&joint, &a, &q),
                    FunctionKind::DivGcmi => oracle.mutual_information(&a, &q) + params.eta * fl.f(&a),
                    _ => match kind.family() {
                        Family::Submodular => oracle.f(&a),
                        Family::MutualInformation => oracle.mutual_information(&a, &q),
                        Family::ConditionalGain => oracle.conditional_gain(&a, &p),
                        Family::ConditionalMutualInformation => {
                            oracle.conditional_mutual_information(&a, &q, &p)
                        }
                    },
                };
                let got = f.evaluate(&a)?;
                let tol = tolerance(kind, want);
                let err = (got - want).abs();
                report.check(err <= tol, err / tol, || {
                    format!("trial {t} {kind} A={a:?}: closed form {got}, definition {want}")
                });
            }
        }
    }
    report.elapsed = start.elapsed();
    Ok(report)
}

/// FLCMI with empty P equals FLVMI, FLCMI with Q = U equals FLCG and
/// LOGDETCMI with empty P equals LOGDETMI, on every subset of an
/// `n`-element ground set.
pub fn reductions(n: usize, trials: usize, seed: u64) -> Result<SuiteReport> {
    let start = Instant::now();
    let mut report = SuiteReport::new("reductions");
    let params = FunctionParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in 0..trials {
        let joint = random_joint(rng.random(), n, 3, 3, LOGDET_EPSILON)?;
        let u: Vec<usize> = (0..n).collect();
        let q: Vec<usize> = (n..n + 3).collect();
        let p: Vec<usize> = (n + 3..n + 6).collect();
        let build = |kind, q: &[usize], p: &[usize]| InfoFunction::from_joint(kind, &joint, &u, q, p, params);
        let pairs = [
            ("FLCMI(P=0) vs FLVMI", build(FunctionKind::Flcmi, &q, &[])?, build(FunctionKind::Flvmi, &q, &[])?),
            ("FLCMI(Q=U) vs FLCG", build(FunctionKind::Flcmi, &u, &p)?, build(FunctionKind::Flcg, &[], &p)?),
            (
                "LOGDETCMI(P=0) vs LOGDETMI",
                build(FunctionKind::LogDetCmi, &q, &[])?,
                build(FunctionKind::LogDetMi, &q, &[])?,
            ),
        ];
        for (name, lhs, rhs) in &pairs {
            for a in subsets(n) {
                let (x, y) = (lhs.evaluate(&a)?, rhs.evaluate(&a)?);
                let tol = tolerance(rhs.kind(), y);
                let err = (x - y).abs();
                report.check(err <= tol, err / tol, || format!("trial {t} {name} A={a:?}: {x} vs {y}"));
            }
        }
    }
    report.elapsed = start.elapsed();
    Ok(report)
}

/// Naive greedy reaches `(1 - 1/e)` of the exhaustive optimum on monotone
/// instances, and lazy greedy reproduces naive greedy bit for bit.
pub fn greedy_guarantee(trials: usize, n: usize, budget: usize, seed: u64) -> Result<SuiteReport> {
    let start = Instant::now();
    let mut report = SuiteReport::new("greedy guarantee");
    let monotone: Vec<FunctionKind> = FunctionKind::ALL.into_iter().filter(|k| k.is_monotone()).collect();
    let bound = 1.0 - (-1.0f64).exp();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in 0..trials {
        let kind = monotone[t % monotone.len()];
        let joint = random_joint(rng.random(), n, 3, 3, 0.0)?;
        let u: Vec<usize> = (0..n).collect();
        let q: Vec<usize> = (n..n + 3).collect();
        let p: Vec<usize> = (n + 3..n + 6).collect();
        let f = InfoFunction::from_joint(kind, &joint, &u, &q, &p, FunctionParams::default())?;
        let cfg = GreedyConfig::new(budget);
        let naive = greedy_select(&f, &cfg.clone().with_variant(Variant::Naive))?;
        let lazy = greedy_select(&f, &cfg.with_variant(Variant::Lazy))?;
        let opt = exhaustive_opt(&f, budget)?;
        let ratio = if opt.value > 0.0 { naive.value / opt.value } else { 1.0 };
        report.check(naive.value >= bound * opt.value, (bound - ratio).max(0.0), || {
            format!("trial {t} {kind}: greedy {} below bound of optimum {}", naive.value, opt.value)
        });
        let same = naive.chosen == lazy.chosen
            && naive.value.to_bits() == lazy.value.to_bits()
            && naive.gains.iter().zip(&lazy.gains).all(|(a, b)| a.to_bits() == b.to_bits());
        report.check(same, 0.0, || {
            format!("trial {t} {kind}: lazy {:?} differs from naive {:?}", lazy.chosen, naive.chosen)
        });
    }
    report.elapsed = start.elapsed();
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct StochasticReport {
    pub naive_value: f64,
    pub mean_value: f64,
    pub naive_evaluations: u64,
    pub mean_evaluations: f64,
    pub elapsed: Duration,
}

impl StochasticReport {
    pub fn quality(&self) -> f64 {
        self.mean_value / self.naive_value
    }

    pub fn speedup(&self) -> f64 {
        self.naive_evaluations as f64 / self.mean_evaluations
    }
}

/// FLVMI on 10-class blobs of `n` points with a 20-point query: naive
/// greedy against stochastic greedy averaged over `seeds` runs.
pub fn stochastic_quality(n: usize, budget: usize, epsilon: f64, seeds: u64) -> Result<StochasticReport> {
    let start = Instant::now();
    let classes = 10;
    let counts: Vec<usize> = (0..classes).map(|c| n / classes + usize::from(c < n % classes)).collect();
    let (x, _) = make_blobs(&counts, 16, 1.0, 11)?;
    let ground = EmbeddingMatrix::from_rows(x)?;
    let (qx, _) = make_blobs(&[10, 10], 16, 1.0, 12)?;
    let query = EmbeddingMatrix::from_rows(qx)?;
    let f = InfoFunction::from_embeddings(FunctionKind::Flvmi, &ground, Some(&query), None, FunctionParams::default())?;
    let naive = greedy_select(&f, &GreedyConfig::new(budget).with_variant(Variant::Naive))?;
    let (mut value, mut evals) = (0.0, 0.0);
    for s in 0..seeds {
        let cfg = GreedyConfig {
            epsilon,
            ..GreedyConfig::new(budget).with_variant(Variant::Stochastic).with_seed(s)
        };
        let r = greedy_select(&f, &cfg)?;
        value += r.value;
        evals += r.evaluations as f64;
    }
    Ok(StochasticReport {
        naive_value: naive.value,
        mean_value: value / seeds as f64,
        naive_evaluations: naive.evaluations,
        mean_evaluations: evals / seeds as f64,
        elapsed: start.elapsed(),
    })
}

/// The suites run by `verify`; `quick` shrinks the trial counts.
pub fn all_suites(quick: bool, seed: u64) -> Result<Vec<SuiteReport>> {
    let trials = if quick { 20 } else { 200 };
    Ok(vec![
        oracle_equivalence(trials, seed)?,
        reductions(8, if quick { 3 } else { 10 }, seed)?,
        greedy_guarantee(trials, 12, 3, seed)?,
    ])
}
