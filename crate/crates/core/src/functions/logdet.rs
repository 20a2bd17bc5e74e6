//! Log-determinant family.
//!
//! Every member is a difference of log-determinants of Schur-conditioned
//! kernels restricted to A. Writing `S|X = S_UU - S_UX S_X⁻¹ S_XU`:
//!
//! * LOGDET    = logdet (S)_A
//! * LOGDETMI  = logdet (S)_A   - logdet (S|Q)_A
//! * LOGDETCG  = logdet (S|P)_A
//! * LOGDETCMI = logdet (S|P)_A - logdet (S|Q∪P)_A
//!
//! Gains are maintained with one incremental Cholesky per conditioned
//! kernel: each candidate keeps its current conditional variance `d_x²`, so
//! a gain is `ln d_x² (first) - ln d_x² (second)` and a commit costs one
//! kernel column plus `O(n·|A|)` updates. `evaluate` instead uses the
//! closed forms with explicit inverses, which keeps the two routes
//! independent.

use std::sync::Arc;

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::linalg::{
    cholesky, cholesky_clamped, cholesky_solve, logdet_from_cholesky, lower_inverse,
    lu_log_abs_det, solve_lower, PIVOT_FLOOR,
};
use crate::similarity::SimilarityKernel;

use super::KernelBlocks;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LogDetForm {
    Plain,
    Mutual,
    Conditional,
    ConditionalMutual,
}

/// A point of the joint ground set, tagged by the block it lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pt {
    U(usize),
    Q(usize),
    P(usize),
}

/// Low-rank description of a regularized kernel over U ∪ Q ∪ P:
/// `S = F Fᵀ + ε I`, with the three row groups of `F` stored separately.
#[derive(Debug, Clone)]
pub struct FactoredBlocks {
    pub ground: Array2<f64>,
    pub query: Array2<f64>,
    pub conditioning: Array2<f64>,
    pub epsilon: f64,
}

#[derive(Debug, Clone)]
enum Source {
    Dense(KernelBlocks),
    Factored(FactoredBlocks),
}

impl Source {
    fn ground_len(&self) -> Result<usize> {
        match self {
            Source::Dense(b) => Ok(b.ground.as_ref().ok_or(Error::MissingBlock("ground"))?.n_rows()),
            Source::Factored(f) => Ok(f.ground.nrows()),
        }
    }

    fn query_len(&self) -> usize {
        match self {
            Source::Dense(b) => b
                .query_square
                .as_ref()
                .map(|k| k.n_rows())
                .or_else(|| b.query.as_ref().map(|k| k.n_cols()))
                .unwrap_or(0),
            Source::Factored(f) => f.query.nrows(),
        }
    }

    fn cond_len(&self) -> usize {
        match self {
            Source::Dense(b) => b
                .conditioning_square
                .as_ref()
                .map(|k| k.n_rows())
                .or_else(|| b.conditioning.as_ref().map(|k| k.n_cols()))
                .unwrap_or(0),
            Source::Factored(f) => f.conditioning.nrows(),
        }
    }

    fn entry(&self, a: Pt, b: Pt) -> Result<f64> {
        match self {
            Source::Dense(k) => {
                fn need<'k>(b: &'k Option<Arc<SimilarityKernel>>, name: &'static str) -> Result<&'k SimilarityKernel> {
                    b.as_deref().ok_or(Error::MissingBlock(name))
                }
                Ok(match (a, b) {
                    (Pt::U(i), Pt::U(j)) => need(&k.ground, "ground")?.get(i, j),
                    (Pt::U(i), Pt::Q(j)) | (Pt::Q(j), Pt::U(i)) => need(&k.query, "query")?.get(i, j),
                    (Pt::U(i), Pt::P(j)) | (Pt::P(j), Pt::U(i)) => {
                        need(&k.conditioning, "conditioning")?.get(i, j)
                    }
                    (Pt::Q(i), Pt::Q(j)) => need(&k.query_square, "query_square")?.get(i, j),
                    (Pt::P(i), Pt::P(j)) => {
                        need(&k.conditioning_square, "conditioning_square")?.get(i, j)
                    }
                    (Pt::Q(i), Pt::P(j)) | (Pt::P(j), Pt::Q(i)) => {
                        need(&k.query_conditioning, "query_conditioning")?.get(i, j)
                    }
                })
            }
            Source::Factored(f) => {
                let row = |p: Pt| match p {
                    Pt::U(i) => f.ground.row(i),
                    Pt::Q(i) => f.query.row(i),
                    Pt::P(i) => f.conditioning.row(i),
                };
                let same = a == b;
                Ok(row(a).dot(&row(b)) + if same { f.epsilon } else { 0.0 })
            }
        }
    }

    fn block(&self, rows: &[Pt], cols: &[Pt]) -> Result<Array2<f64>> {
        let mut m = Array2::<f64>::zeros((rows.len(), cols.len()));
        for (r, &a) in rows.iter().enumerate() {
            for (c, &b) in cols.iter().enumerate() {
                m[[r, c]] = self.entry(a, b)?;
            }
        }
        Ok(m)
    }

    /// Kernel over U conditioned on the points `on`.
    fn conditioned(&self, on: &[Pt], what: &str) -> Result<Conditioned> {
        let n = self.ground_len()?;
        match self {
            Source::Dense(b) => {
                let ground = b.ground.clone().ok_or(Error::MissingBlock("ground"))?;
                if on.is_empty() {
                    return Ok(Conditioned::Dense { ground, proj: None });
                }
                let sxx = self.block(on, on)?;
                let l = cholesky(sxx.view(), what)?;
                let all: Vec<Pt> = (0..n).map(Pt::U).collect();
                let sxu = self.block(on, &all)?;
                let y = solve_lower(&l, sxu.view());
                let proj = y.t().as_standard_layout().to_owned();
                Ok(Conditioned::Dense {
                    ground,
                    proj: Some(proj),
                })
            }
            Source::Factored(f) => {
                if on.is_empty() {
                    return Ok(Conditioned::Factored {
                        h: f.ground.clone(),
                        epsilon: f.epsilon,
                    });
                }
                if !(f.epsilon > 0.0) {
                    return Err(Error::config(
                        "factored log-determinant conditioning needs epsilon > 0",
                    ));
                }
                let r = f.ground.ncols();
                let mut gram = Array2::<f64>::zeros((r, r));
                for &p in on {
                    let row = match p {
                        Pt::Q(i) => f.query.row(i),
                        Pt::P(i) => f.conditioning.row(i),
                        Pt::U(i) => f.ground.row(i),
                    };
                    let row2 = row.insert_axis(Axis(1));
                    gram += &row2.dot(&row2.t());
                }
                // S|X = εI + F_U ε(εI + F_XᵀF_X)⁻¹ F_Uᵀ; factor the middle term.
                let mut middle = gram / f.epsilon;
                for i in 0..r {
                    middle[[i, i]] += 1.0;
                }
                let l = cholesky(middle.view(), what)?;
                let linv = lower_inverse(&l);
                Ok(Conditioned::Factored {
                    h: f.ground.dot(&linv.t()),
                    epsilon: f.epsilon,
                })
            }
        }
    }
}

#[derive(Debug, Clone)]
enum Conditioned {
    /// `S_UU - proj projᵀ`, with `proj = (L_X⁻¹ S_XU)ᵀ`.
    Dense {
        ground: Arc<SimilarityKernel>,
        proj: Option<Array2<f64>>,
    },
    /// `H Hᵀ + ε I`.
    Factored { h: Array2<f64>, epsilon: f64 },
}

impl Conditioned {
    fn diag(&self) -> Vec<f64> {
        match self {
            Conditioned::Dense { ground, proj } => (0..ground.n_rows())
                .map(|i| {
                    let base = ground.get(i, i);
                    match proj {
                        Some(p) => base - p.row(i).dot(&p.row(i)),
                        None => base,
                    }
                })
                .collect(),
            Conditioned::Factored { h, epsilon } => h
                .axis_iter(Axis(0))
                .map(|row| row.dot(&row) + epsilon)
                .collect(),
        }
    }

    fn column(&self, j: usize) -> Vec<f64> {
        match self {
            Conditioned::Dense { ground, proj } => {
                let mut col = ground.row(j).to_vec();
                if let Some(p) = proj {
                    let sub: Array1<f64> = p.dot(&p.row(j));
                    for (c, s) in col.iter_mut().zip(sub.iter()) {
                        *c -= s;
                    }
                }
                col
            }
            Conditioned::Factored { h, epsilon } => {
                let mut col = h.dot(&h.row(j)).into_raw_vec_and_offset().0;
                col[j] += epsilon;
                col
            }
        }
    }
}

/// Greedy-friendly incremental Cholesky: conditional variances of every
/// candidate given the committed set.
#[derive(Debug, Clone)]
pub(crate) struct IncrementalCholesky {
    residual: Vec<f64>,
    factors: Vec<Vec<f64>>,
    clamps: usize,
}

impl IncrementalCholesky {
    fn new(diag: Vec<f64>) -> Self {
        Self {
            residual: diag,
            factors: Vec::new(),
            clamps: 0,
        }
    }

    #[inline]
    fn log_gain(&self, x: usize) -> f64 {
        self.residual[x].max(PIVOT_FLOOR).ln()
    }

    fn commit(&mut self, j: usize, mut column: Vec<f64>) {
        let mut pivot = self.residual[j];
        if !(pivot >= PIVOT_FLOOR) {
            pivot = PIVOT_FLOOR;
            self.clamps += 1;
        }
        for f in &self.factors {
            let c = f[j];
            if c != 0.0 {
                for (v, &fi) in column.iter_mut().zip(f) {
                    *v -= c * fi;
                }
            }
        }
        let inv = 1.0 / pivot.sqrt();
        for (r, v) in self.residual.iter_mut().zip(column.iter_mut()) {
            *v *= inv;
            *r -= *v * *v;
        }
        self.factors.push(column);
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LogDetMemo {
    first: IncrementalCholesky,
    second: Option<IncrementalCholesky>,
}

impl LogDetMemo {
    pub(crate) fn clamps(&self) -> usize {
        self.first.clamps + self.second.as_ref().map_or(0, |s| s.clamps)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LogDetFamily {
    form: LogDetForm,
    source: Source,
    first: Conditioned,
    second: Option<Conditioned>,
}

impl LogDetFamily {
    pub(crate) fn dense(form: LogDetForm, blocks: KernelBlocks) -> Result<Self> {
        Self::build(form, Source::Dense(blocks))
    }

    pub(crate) fn factored(form: LogDetForm, blocks: FactoredBlocks) -> Result<Self> {
        let r = blocks.ground.ncols();
        if blocks.query.ncols() != r || blocks.conditioning.ncols() != r {
            return Err(Error::DimensionMismatch(
                "factor blocks must share their column count".into(),
            ));
        }
        Self::build(form, Source::Factored(blocks))
    }

    fn build(form: LogDetForm, source: Source) -> Result<Self> {
        let q: Vec<Pt> = (0..source.query_len()).map(Pt::Q).collect();
        let p: Vec<Pt> = (0..source.cond_len()).map(Pt::P).collect();
        let (first, second) = match form {
            LogDetForm::Plain => (source.conditioned(&[], "S")?, None),
            LogDetForm::Mutual => (
                source.conditioned(&[], "S")?,
                Some(source.conditioned(&q, "S_Q")?),
            ),
            LogDetForm::Conditional => (source.conditioned(&p, "S_P")?, None),
            LogDetForm::ConditionalMutual => {
                let qp: Vec<Pt> = q.iter().chain(p.iter()).copied().collect();
                (
                    source.conditioned(&p, "S_P")?,
                    Some(source.conditioned(&qp, "S_{Q∪P}")?),
                )
            }
        };
        Ok(Self {
            form,
            source,
            first,
            second,
        })
    }

    /// Closed-form value.
    pub(crate) fn evaluate(&self, a: &[usize]) -> Result<f64> {
        if a.is_empty() {
            return Ok(0.0);
        }
        let src = &self.source;
        let av: Vec<Pt> = a.iter().map(|&i| Pt::U(i)).collect();
        let qv: Vec<Pt> = (0..src.query_len()).map(Pt::Q).collect();
        let pv: Vec<Pt> = (0..src.cond_len()).map(Pt::P).collect();
        let s_a = src.block(&av, &av)?;
        let logdet = |m: &Array2<f64>| logdet_from_cholesky(&cholesky_clamped(m.view()).0);
        match self.form {
            LogDetForm::Plain => Ok(logdet(&s_a)),
            LogDetForm::Mutual => {
                let schur = schur_complement(src, &s_a, &av, &qv, "S_Q")?;
                Ok(logdet(&s_a) - logdet(&schur))
            }
            LogDetForm::Conditional => {
                let schur = schur_complement(src, &s_a, &av, &pv, "S_P")?;
                Ok(logdet(&schur))
            }
            LogDetForm::ConditionalMutual => {
                let s_q = src.block(&qv, &qv)?;
                let l_q = cholesky(s_q.view(), "S_Q")?;
                let numerator = if pv.is_empty() {
                    0.0
                } else {
                    let s_p = src.block(&pv, &pv)?;
                    let l_p = cholesky(s_p.view(), "S_P")?;
                    log_det_identity_minus(src, &l_p, &pv, &l_q, &qv)?
                };
                let mv: Vec<Pt> = av.iter().chain(pv.iter()).copied().collect();
                let s_m = src.block(&mv, &mv)?;
                let (l_m, _) = cholesky_clamped(s_m.view());
                let denominator = log_det_identity_minus(src, &l_m, &mv, &l_q, &qv)?;
                Ok(numerator - denominator)
            }
        }
    }

    pub(crate) fn memo(&self) -> LogDetMemo {
        LogDetMemo {
            first: IncrementalCholesky::new(self.first.diag()),
            second: self.second.as_ref().map(|c| IncrementalCholesky::new(c.diag())),
        }
    }

    pub(crate) fn gain(&self, memo: &LogDetMemo, x: usize) -> f64 {
        let g = memo.first.log_gain(x);
        match &memo.second {
            Some(s) => g - s.log_gain(x),
            None => g,
        }
    }

    pub(crate) fn commit(&self, memo: &mut LogDetMemo, x: usize) {
        memo.first.commit(x, self.first.column(x));
        if let (Some(cond), Some(state)) = (&self.second, memo.second.as_mut()) {
            state.commit(x, cond.column(x));
        }
    }
}

/// `S_A - S_AX S_X⁻¹ S_XA`.
fn schur_complement(
    src: &Source,
    s_a: &Array2<f64>,
    a: &[Pt],
    x: &[Pt],
    what: &str,
) -> Result<Array2<f64>> {
    if x.is_empty() {
        return Ok(s_a.clone());
    }
    let s_x = src.block(x, x)?;
    let l = cholesky(s_x.view(), what)?;
    let s_xa = src.block(x, a)?;
    let w = solve_lower(&l, s_xa.view());
    Ok(s_a - &w.t().dot(&w))
}

/// `log det(I - S_M⁻¹ S_MQ S_Q⁻¹ S_QM)` given Cholesky factors of `S_M`
/// and `S_Q`.
fn log_det_identity_minus(
    src: &Source,
    l_m: &Array2<f64>,
    m: &[Pt],
    l_q: &Array2<f64>,
    q: &[Pt],
) -> Result<f64> {
    let s_qm = src.block(q, m)?;
    let t = cholesky_solve(l_q, s_qm.view());
    let inner = s_qm.t().dot(&t);
    let z = cholesky_solve(l_m, inner.view());
    let id_minus = Array2::<f64>::eye(m.len()) - z;
    let (_, log_abs) = lu_log_abs_det(id_minus.view());
    Ok(log_abs)
}
