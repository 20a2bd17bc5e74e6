//! Facility-location family: FL, FLVMI, FLCG, FLCMI over a square ground
//! kernel, and FLQMI over the rectangular ground-by-query kernel.
//!
//! The square variants share one form. With `m_i = max_{j∈A} S_ij` (zero for
//! the empty set), each ground point contributes
//!
//! ```text
//! t_i(m) = max(min(m, cap_i) - floor_i, 0)
//! ```
//!
//! where `cap_i = max_{j∈Q} S_ij` is present for the query variants and
//! `floor_i = max_{j∈P} S_ij` for the conditioned ones. Without a floor the
//! outer clamp is dropped, without a cap `min` is dropped.

use std::sync::Arc;

use crate::similarity::SimilarityKernel;

#[derive(Debug, Clone)]
pub(crate) struct FacilityLocation {
    ground: Arc<SimilarityKernel>,
    cap: Option<Vec<f64>>,
    floor: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub(crate) struct FacilityMemo {
    /// Current `max_{j∈A} S_ij` per ground point.
    best: Vec<f64>,
    /// Cached `t_i(best_i)`.
    term: Vec<f64>,
}

fn row_max(k: &SimilarityKernel, i: usize) -> f64 {
    k.row(i).iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

impl FacilityLocation {
    /// `query` is the U×Q block, `conditioning` the U×P block. An empty
    /// conditioning block is treated as absent.
    pub(crate) fn new(
        ground: Arc<SimilarityKernel>,
        query: Option<&SimilarityKernel>,
        conditioning: Option<&SimilarityKernel>,
    ) -> Self {
        let n = ground.n_rows();
        let cap = query.map(|q| {
            (0..n)
                .map(|i| if q.n_cols() == 0 { 0.0 } else { row_max(q, i) })
                .collect()
        });
        let floor = conditioning
            .filter(|p| p.n_cols() > 0)
            .map(|p| (0..n).map(|i| row_max(p, i)).collect());
        Self { ground, cap, floor }
    }

    #[inline]
    fn term(&self, i: usize, m: f64) -> f64 {
        let v = match &self.cap {
            Some(c) => m.min(c[i]),
            None => m,
        };
        match &self.floor {
            Some(f) => (v - f[i]).max(0.0),
            None => v,
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.ground.n_rows()
    }

    pub(crate) fn evaluate(&self, a: &[usize]) -> f64 {
        if a.is_empty() {
            return 0.0;
        }
        (0..self.len())
            .map(|i| {
                let row = self.ground.row(i);
                let m = a.iter().map(|&j| row[j]).fold(f64::NEG_INFINITY, f64::max);
                self.term(i, m)
            })
            .sum()
    }

    pub(crate) fn memo(&self) -> FacilityMemo {
        let n = self.len();
        let best = vec![0.0; n];
        let term = (0..n).map(|i| self.term(i, 0.0)).collect();
        FacilityMemo { best, term }
    }

    pub(crate) fn gain(&self, memo: &FacilityMemo, x: usize) -> f64 {
        // S is symmetric, so row x holds S_ix for every ground point i.
        let row = self.ground.row(x);
        let mut g = 0.0;
        for (i, (&s, &b)) in row.iter().zip(&memo.best).enumerate() {
            if s > b {
                g += self.term(i, s) - memo.term[i];
            }
        }
        g
    }

    pub(crate) fn commit(&self, memo: &mut FacilityMemo, x: usize) {
        let row = self.ground.row(x);
        for (i, &s) in row.iter().enumerate() {
            if s > memo.best[i] {
                memo.best[i] = s;
                memo.term[i] = self.term(i, s);
            }
        }
    }
}

/// FLQMI: `Σ_{i∈Q} max_{j∈A} S_ij + Σ_{j∈A} max_{i∈Q} S_ij`, read entirely
/// from the U×Q block.
#[derive(Debug, Clone)]
pub(crate) struct QueryFacility {
    cross: Arc<SimilarityKernel>,
    row_best: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct QueryMemo {
    best: Vec<f64>,
}

impl QueryFacility {
    pub(crate) fn new(cross: Arc<SimilarityKernel>) -> Self {
        let row_best = (0..cross.n_rows())
            .map(|x| if cross.n_cols() == 0 { 0.0 } else { row_max(&cross, x) })
            .collect();
        Self { cross, row_best }
    }

    pub(crate) fn evaluate(&self, a: &[usize]) -> f64 {
        if a.is_empty() {
            return 0.0;
        }
        let q = self.cross.n_cols();
        let query_side: f64 = (0..q)
            .map(|k| a.iter().map(|&j| self.cross.get(j, k)).fold(f64::NEG_INFINITY, f64::max))
            .sum();
        let ground_side: f64 = a.iter().map(|&j| self.row_best[j]).sum();
        query_side + ground_side
    }

    pub(crate) fn memo(&self) -> QueryMemo {
        QueryMemo {
            best: vec![0.0; self.cross.n_cols()],
        }
    }

    pub(crate) fn gain(&self, memo: &QueryMemo, x: usize) -> f64 {
        let mut g = 0.0;
        for (&s, &b) in self.cross.row(x).iter().zip(&memo.best) {
            if s > b {
                g += s - b;
            }
        }
        g + self.row_best[x]
    }

    pub(crate) fn commit(&self, memo: &mut QueryMemo, x: usize) {
        for (b, &s) in memo.best.iter_mut().zip(self.cross.row(x)) {
            if s > *b {
                *b = s;
            }
        }
    }
}
