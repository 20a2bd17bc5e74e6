//! Graph-cut family.
//!
//! `f(A) = Σ_{i∈U, j∈A} S_ij - λ Σ_{i,j∈A} S_ij`, with
//! GCMI `= 2λ Σ_{i∈A, j∈Q} S_ij` (modular in A) and
//! GCCG `= f(A) - 2λ Σ_{i∈A, j∈P} S_ij`.

use std::sync::Arc;

use crate::similarity::SimilarityKernel;

#[derive(Debug, Clone)]
pub(crate) enum GraphCut {
    Plain {
        ground: Arc<SimilarityKernel>,
        col_sums: Vec<f64>,
        penalty: Option<Vec<f64>>,
        lambda: f64,
    },
    Query {
        query_sums: Vec<f64>,
        lambda: f64,
    },
}

#[derive(Debug, Clone)]
pub(crate) struct GraphCutMemo {
    /// `Σ_{j∈A} S_xj` per ground point; unused for GCMI.
    within: Vec<f64>,
}

fn row_sums(k: &SimilarityKernel) -> Vec<f64> {
    (0..k.n_rows()).map(|i| k.row(i).iter().sum()).collect()
}

impl GraphCut {
    /// GC, or GCCG when a U×P block is given.
    pub(crate) fn plain(
        ground: Arc<SimilarityKernel>,
        conditioning: Option<&SimilarityKernel>,
        lambda: f64,
    ) -> Self {
        // Symmetric ground kernel: row sums equal column sums.
        let col_sums = row_sums(&ground);
        let penalty = conditioning.map(row_sums);
        GraphCut::Plain {
            ground,
            col_sums,
            penalty,
            lambda,
        }
    }

    pub(crate) fn query(cross: &SimilarityKernel, lambda: f64) -> Self {
        GraphCut::Query {
            query_sums: row_sums(cross),
            lambda,
        }
    }

    pub(crate) fn evaluate(&self, a: &[usize]) -> f64 {
        match self {
            GraphCut::Plain {
                ground,
                col_sums,
                penalty,
                lambda,
            } => {
                let coverage: f64 = a.iter().map(|&j| col_sums[j]).sum();
                let mut inner = 0.0;
                for &i in a {
                    for &j in a {
                        inner += ground.get(i, j);
                    }
                }
                let cross = penalty
                    .as_ref()
                    .map_or(0.0, |p| a.iter().map(|&j| p[j]).sum::<f64>());
                coverage - lambda * inner - 2.0 * lambda * cross
            }
            GraphCut::Query { query_sums, lambda } => {
                2.0 * lambda * a.iter().map(|&j| query_sums[j]).sum::<f64>()
            }
        }
    }

    pub(crate) fn memo(&self) -> GraphCutMemo {
        let within = match self {
            GraphCut::Plain { col_sums, .. } => vec![0.0; col_sums.len()],
            GraphCut::Query { .. } => Vec::new(),
        };
        GraphCutMemo { within }
    }

    pub(crate) fn gain(&self, memo: &GraphCutMemo, x: usize) -> f64 {
        match self {
            GraphCut::Plain {
                ground,
                col_sums,
                penalty,
                lambda,
            } => {
                let mut g = col_sums[x] - lambda * (2.0 * memo.within[x] + ground.get(x, x));
                if let Some(p) = penalty {
                    g -= 2.0 * lambda * p[x];
                }
                g
            }
            GraphCut::Query { query_sums, lambda } => 2.0 * lambda * query_sums[x],
        }
    }

    pub(crate) fn commit(&self, memo: &mut GraphCutMemo, x: usize) {
        if let GraphCut::Plain { ground, .. } = self {
            for (w, &s) in memo.within.iter_mut().zip(ground.row(x)) {
                *w += s;
            }
        }
    }
}
