//! Submodular information measures as incremental set-function oracles.
//!
//! An [`InfoFunction`] is immutable once built and exposes
//! `evaluate` (closed form, from scratch) together with memoized
//! `gain`/`commit` over a [`SelectionState`]. Any number of states may be
//! driven concurrently against one function.

mod facility;
mod graph_cut;
mod logdet;
mod oracle;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::similarity::{
    cosine_factors, cosine_kernel, submatrix, EmbeddingMatrix, SimilarityKernel,
    LOGDET_EPSILON,
};

use facility::{FacilityLocation, FacilityMemo, QueryFacility, QueryMemo};
use graph_cut::{GraphCut, GraphCutMemo};
use logdet::{LogDetFamily, LogDetForm, LogDetMemo};

pub use logdet::FactoredBlocks;
pub use oracle::GroundTruthOracle;

/// Every acquisition function the library knows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FunctionKind {
    Fl,
    Gc,
    LogDet,
    Flvmi,
    Flqmi,
    Gcmi,
    LogDetMi,
    Flcg,
    Gccg,
    LogDetCg,
    Flcmi,
    LogDetCmi,
    /// GCMI plus `η·FL`; a heuristic reconstruction, not a closed form.
    DivGcmi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaseKind {
    Fl,
    Gc,
    LogDet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Submodular,
    MutualInformation,
    ConditionalGain,
    ConditionalMutualInformation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Block {
    Ground,
    Query,
    Conditioning,
    QuerySquare,
    ConditioningSquare,
    QueryConditioning,
}

impl FunctionKind {
    pub const ALL: [FunctionKind; 13] = [
        FunctionKind::Fl,
        FunctionKind::Gc,
        FunctionKind::LogDet,
        FunctionKind::Flvmi,
        FunctionKind::Flqmi,
        FunctionKind::Gcmi,
        FunctionKind::LogDetMi,
        FunctionKind::Flcg,
        FunctionKind::Gccg,
        FunctionKind::LogDetCg,
        FunctionKind::Flcmi,
        FunctionKind::LogDetCmi,
        FunctionKind::DivGcmi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FunctionKind::Fl => "FL",
            FunctionKind::Gc => "GC",
            FunctionKind::LogDet => "LOGDET",
            FunctionKind::Flvmi => "FLVMI",
            FunctionKind::Flqmi => "FLQMI",
            FunctionKind::Gcmi => "GCMI",
            FunctionKind::LogDetMi => "LOGDETMI",
            FunctionKind::Flcg => "FLCG",
            FunctionKind::Gccg => "GCCG",
            FunctionKind::LogDetCg => "LOGDETCG",
            FunctionKind::Flcmi => "FLCMI",
            FunctionKind::LogDetCmi => "LOGDETCMI",
            FunctionKind::DivGcmi => "DIV_GCMI",
        }
    }

    pub fn base(self) -> BaseKind {
        use FunctionKind::*;
        match self {
            Fl | Flvmi | Flqmi | Flcg | Flcmi => BaseKind::Fl,
            Gc | Gcmi | Gccg | DivGcmi => BaseKind::Gc,
            LogDet | LogDetMi | LogDetCg | LogDetCmi => BaseKind::LogDet,
        }
    }

    pub fn family(self) -> Family {
        use FunctionKind::*;
        match self {
            Fl | Gc | LogDet => Family::Submodular,
            Flvmi | Flqmi | Gcmi | LogDetMi | DivGcmi => Family::MutualInformation,
            Flcg | Gccg | LogDetCg => Family::ConditionalGain,
            Flcmi | LogDetCmi => Family::ConditionalMutualInformation,
        }
    }

    pub fn uses_query(self) -> bool {
        matches!(
            self.family(),
            Family::MutualInformation | Family::ConditionalMutualInformation
        )
    }

    pub fn uses_conditioning(self) -> bool {
        matches!(
            self.family(),
            Family::ConditionalGain | Family::ConditionalMutualInformation
        )
    }

    /// Kernel blocks the function reads.
    pub fn required_blocks(self) -> &'static [Block] {
        use Block::*;
        use FunctionKind::*;
        match self {
            Fl | Gc | LogDet => &[Ground],
            Flqmi | Gcmi => &[Query],
            Flvmi | DivGcmi => &[Ground, Query],
            LogDetMi => &[Ground, Query, QuerySquare],
            Flcg | Gccg => &[Ground, Conditioning],
            LogDetCg => &[Ground, Conditioning, ConditioningSquare],
            Flcmi => &[Ground, Query, Conditioning],
            LogDetCmi => &[
                Ground,
                Query,
                Conditioning,
                QuerySquare,
                ConditioningSquare,
                QueryConditioning,
            ],
        }
    }

    /// Monotone non-decreasing in A for nonnegative kernels.
    pub fn is_monotone(self) -> bool {
        use FunctionKind::*;
        matches!(self, Fl | Flvmi | Flqmi | Gcmi | Flcg | Flcmi | DivGcmi)
    }

    pub fn is_heuristic(self) -> bool {
        self == FunctionKind::DivGcmi
    }
}

impl fmt::Display for FunctionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FunctionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase().replace('-', "_");
        FunctionKind::ALL
            .into_iter()
            .find(|k| k.name() == upper)
            .ok_or_else(|| Error::config(format!("unknown function kind '{s}'")))
    }
}

impl TryFrom<String> for FunctionKind {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FunctionKind> for String {
    fn from(k: FunctionKind) -> String {
        k.name().to_string()
    }
}

/// Scalar knobs of the function families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FunctionParams {
    /// Graph-cut λ.
    pub gc_lambda: f64,
    /// Weight of the facility-location term in DIV_GCMI.
    pub eta: f64,
    /// Diagonal shift for kernels built from embeddings; `None` picks
    /// [`LOGDET_EPSILON`] for the log-determinant family and 0 otherwise.
    pub epsilon: Option<f64>,
}

impl Default for FunctionParams {
    fn default() -> Self {
        Self {
            gc_lambda: 1.0,
            eta: 1.0,
            epsilon: None,
        }
    }
}

impl FunctionParams {
    pub fn epsilon_for(&self, kind: FunctionKind) -> f64 {
        self.epsilon.unwrap_or(match kind.base() {
            BaseKind::LogDet => LOGDET_EPSILON,
            _ => 0.0,
        })
    }
}

/// Dense kernel blocks over the ground set U, query set Q and conditioning
/// set P. Only the blocks a kind requires need to be present.
#[derive(Debug, Clone, Default)]
pub struct KernelBlocks {
    /// U×U, symmetric.
    pub ground: Option<Arc<SimilarityKernel>>,
    /// U×Q.
    pub query: Option<Arc<SimilarityKernel>>,
    /// U×P.
    pub conditioning: Option<Arc<SimilarityKernel>>,
    /// Q×Q.
    pub query_square: Option<Arc<SimilarityKernel>>,
    /// P×P.
    pub conditioning_square: Option<Arc<SimilarityKernel>>,
    /// Q×P.
    pub query_conditioning: Option<Arc<SimilarityKernel>>,
}

impl KernelBlocks {
    /// Extracts the blocks `kind` needs from one joint kernel, with U, Q and
    /// P given as index lists into it.
    pub fn from_joint(
        kind: FunctionKind,
        joint: &SimilarityKernel,
        u: &[usize],
        q: &[usize],
        p: &[usize],
    ) -> Result<Self> {
        let mut out = KernelBlocks::default();
        let sub = |r: &[usize], c: &[usize]| submatrix(joint, r, c).map(Arc::new);
        for block in kind.required_blocks() {
            match block {
                Block::Ground => out.ground = Some(sub(u, u)?),
                Block::Query => out.query = Some(sub(u, q)?),
                Block::Conditioning => out.conditioning = Some(sub(u, p)?),
                Block::QuerySquare => out.query_square = Some(sub(q, q)?),
                Block::ConditioningSquare => out.conditioning_square = Some(sub(p, p)?),
                Block::QueryConditioning => out.query_conditioning = Some(sub(q, p)?),
            }
        }
        Ok(out)
    }

    fn get(&self, block: Block) -> Option<&Arc<SimilarityKernel>> {
        match block {
            Block::Ground => self.ground.as_ref(),
            Block::Query => self.query.as_ref(),
            Block::Conditioning => self.conditioning.as_ref(),
            Block::QuerySquare => self.query_square.as_ref(),
            Block::ConditioningSquare => self.conditioning_square.as_ref(),
            Block::QueryConditioning => self.query_conditioning.as_ref(),
        }
    }

    fn block_name(block: Block) -> &'static str {
        match block {
            Block::Ground => "ground (U×U)",
            Block::Query => "query (U×Q)",
            Block::Conditioning => "conditioning (U×P)",
            Block::QuerySquare => "query square (Q×Q)",
            Block::ConditioningSquare => "conditioning square (P×P)",
            Block::QueryConditioning => "query-conditioning (Q×P)",
        }
    }

    fn validate(&self, kind: FunctionKind) -> Result<usize> {
        for &b in kind.required_blocks() {
            if self.get(b).is_none() {
                return Err(Error::MissingBlock(Self::block_name(b)));
            }
        }
        let n = self
            .ground
            .as_ref()
            .map(|k| k.n_rows())
            .or_else(|| self.query.as_ref().map(|k| k.n_rows()))
            .ok_or(Error::MissingBlock("ground (U×U)"))?;
        let rows_match = |k: &Option<Arc<SimilarityKernel>>| k.as_ref().is_none_or(|k| k.n_rows() == n);
        if let Some(g) = &self.ground {
            if g.n_cols() != n || !g.is_symmetric() {
                return Err(Error::DimensionMismatch(
                    "ground block must be a symmetric n×n kernel".into(),
                ));
            }
        }
        if !rows_match(&self.query) || !rows_match(&self.conditioning) {
            return Err(Error::DimensionMismatch(
                "query/conditioning blocks must have one row per ground element".into(),
            ));
        }
        Ok(n)
    }
}

#[derive(Debug, Clone)]
enum Backend {
    Facility(FacilityLocation),
    QueryFacility(QueryFacility),
    GraphCut(GraphCut),
    LogDet(LogDetFamily),
    DivGcmi {
        relevance: GraphCut,
        diversity: FacilityLocation,
        eta: f64,
    },
}

#[derive(Debug, Clone)]
enum Memo {
    Facility(FacilityMemo),
    QueryFacility(QueryMemo),
    GraphCut(GraphCutMemo),
    LogDet(LogDetMemo),
    DivGcmi(GraphCutMemo, FacilityMemo),
}

/// A selection in progress: the chosen elements plus whatever the function
/// memoizes to answer gains quickly.
#[derive(Debug, Clone)]
pub struct SelectionState {
    chosen: Vec<usize>,
    member: Vec<bool>,
    value: f64,
    memo: Memo,
}

impl SelectionState {
    pub fn chosen(&self) -> &[usize] {
        &self.chosen
    }

    pub fn contains(&self, x: usize) -> bool {
        self.member.get(x).copied().unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.chosen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chosen.is_empty()
    }

    /// Sum of committed gains.
    pub fn value(&self) -> f64 {
        self.value
    }

    /// Number of clamped Cholesky pivots (log-determinant family only).
    pub fn numerical_warnings(&self) -> usize {
        match &self.memo {
            Memo::LogDet(m) => m.clamps(),
            _ => 0,
        }
    }
}

/// An acquisition function over a ground set of `n` elements.
#[derive(Debug, Clone)]
pub struct InfoFunction {
    kind: FunctionKind,
    params: FunctionParams,
    n: usize,
    backend: Backend,
}

impl InfoFunction {
    /// Builds a function from dense kernel blocks.
    pub fn new(kind: FunctionKind, blocks: KernelBlocks, params: FunctionParams) -> Result<Self> {
        let n = blocks.validate(kind)?;
        let ground = || blocks.ground.clone().expect("validated");
        let query = || blocks.query.clone().expect("validated");
        let backend = match kind {
            FunctionKind::Fl => Backend::Facility(FacilityLocation::new(ground(), None, None)),
            FunctionKind::Flvmi => {
                Backend::Facility(FacilityLocation::new(ground(), Some(&query()), None))
            }
            FunctionKind::Flcg => Backend::Facility(FacilityLocation::new(
                ground(),
                None,
                blocks.conditioning.as_deref(),
            )),
            FunctionKind::Flcmi => Backend::Facility(FacilityLocation::new(
                ground(),
                Some(&query()),
                blocks.conditioning.as_deref(),
            )),
            FunctionKind::Flqmi => Backend::QueryFacility(QueryFacility::new(query())),
            FunctionKind::Gc => Backend::GraphCut(GraphCut::plain(ground(), None, params.gc_lambda)),
            FunctionKind::Gccg => Backend::GraphCut(GraphCut::plain(
                ground(),
                blocks.conditioning.as_deref(),
                params.gc_lambda,
            )),
            FunctionKind::Gcmi => Backend::GraphCut(GraphCut::query(&query(), params.gc_lambda)),
            FunctionKind::DivGcmi => Backend::DivGcmi {
                relevance: GraphCut::query(&query(), params.gc_lambda),
                diversity: FacilityLocation::new(ground(), None, None),
                eta: params.eta,
            },
            FunctionKind::LogDet => Backend::LogDet(LogDetFamily::dense(LogDetForm::Plain, blocks)?),
            FunctionKind::LogDetMi => {
                Backend::LogDet(LogDetFamily::dense(LogDetForm::Mutual, blocks)?)
            }
            FunctionKind::LogDetCg => {
                Backend::LogDet(LogDetFamily::dense(LogDetForm::Conditional, blocks)?)
            }
            FunctionKind::LogDetCmi => {
                Backend::LogDet(LogDetFamily::dense(LogDetForm::ConditionalMutual, blocks)?)
            }
        };
        Ok(Self {
            kind,
            params,
            n,
            backend,
        })
    }

    /// Builds a log-determinant function from low-rank factors; no n×n
    /// matrix is ever formed.
    pub fn logdet_factored(kind: FunctionKind, blocks: FactoredBlocks) -> Result<Self> {
        let form = match kind {
            FunctionKind::LogDet => LogDetForm::Plain,
            FunctionKind::LogDetMi => LogDetForm::Mutual,
            FunctionKind::LogDetCg => LogDetForm::Conditional,
            FunctionKind::LogDetCmi => LogDetForm::ConditionalMutual,
            other => {
                return Err(Error::config(format!(
                    "{other} has no factored representation"
                )))
            }
        };
        let n = blocks.ground.nrows();
        let params = FunctionParams {
            epsilon: Some(blocks.epsilon),
            ..FunctionParams::default()
        };
        Ok(Self {
            kind,
            params,
            n,
            backend: Backend::LogDet(LogDetFamily::factored(form, blocks)?),
        })
    }

    /// Convenience for tests and small instances: blocks cut from one joint
    /// kernel.
    pub fn from_joint(
        kind: FunctionKind,
        joint: &SimilarityKernel,
        u: &[usize],
        q: &[usize],
        p: &[usize],
        params: FunctionParams,
    ) -> Result<Self> {
        Self::new(kind, KernelBlocks::from_joint(kind, joint, u, q, p)?, params)
    }

    /// Builds the function from embeddings of U, Q and P using the rescaled
    /// cosine kernel. The log-determinant family goes through low-rank
    /// factors when ε > 0, everything else through dense blocks.
    pub fn from_embeddings(
        kind: FunctionKind,
        ground: &EmbeddingMatrix,
        query: Option<&EmbeddingMatrix>,
        conditioning: Option<&EmbeddingMatrix>,
        params: FunctionParams,
    ) -> Result<Self> {
        let eps = params.epsilon_for(kind);
        let empty = EmbeddingMatrix::from_rows(ndarray::Array2::zeros((0, ground.dim())))?;
        let q = query.unwrap_or(&empty);
        let p = conditioning.unwrap_or(&empty);
        if kind.base() == BaseKind::LogDet && eps > 0.0 {
            let blocks = FactoredBlocks {
                ground: cosine_factors(ground)?,
                query: if kind.uses_query() { cosine_factors(q)? } else { cosine_factors(&empty)? },
                conditioning: if kind.uses_conditioning() {
                    cosine_factors(p)?
                } else {
                    cosine_factors(&empty)?
                },
                epsilon: eps,
            };
            return Self::logdet_factored(kind, blocks);
        }
        let square = |e: &EmbeddingMatrix| -> Result<Arc<SimilarityKernel>> {
            Ok(Arc::new(cosine_kernel(e, e)?.into_regularized(eps)?))
        };
        let cross = |a: &EmbeddingMatrix, b: &EmbeddingMatrix| -> Result<Arc<SimilarityKernel>> {
            Ok(Arc::new(cosine_kernel(a, b)?))
        };
        let mut blocks = KernelBlocks::default();
        for block in kind.required_blocks() {
            match block {
                Block::Ground => blocks.ground = Some(square(ground)?),
                Block::Query => blocks.query = Some(cross(ground, q)?),
                Block::Conditioning => blocks.conditioning = Some(cross(ground, p)?),
                Block::QuerySquare => blocks.query_square = Some(square(q)?),
                Block::ConditioningSquare => blocks.conditioning_square = Some(square(p)?),
                Block::QueryConditioning => blocks.query_conditioning = Some(cross(q, p)?),
            }
        }
        Self::new(kind, blocks, params)
    }

    pub fn kind(&self) -> FunctionKind {
        self.kind
    }

    pub fn params(&self) -> &FunctionParams {
        &self.params
    }

    pub fn ground_size(&self) -> usize {
        self.n
    }

    fn check_set(&self, a: &[usize]) -> Result<()> {
        let mut seen = vec![false; self.n];
        for &x in a {
            if x >= self.n {
                return Err(Error::IndexOutOfRange {
                    index: x,
                    len: self.n,
                });
            }
            if std::mem::replace(&mut seen[x], true) {
                return Err(Error::AlreadySelected(x));
            }
        }
        Ok(())
    }

    /// Value on `a`, computed from scratch with the closed form.
    pub fn evaluate(&self, a: &[usize]) -> Result<f64> {
        self.check_set(a)?;
        Ok(match &self.backend {
            Backend::Facility(f) => f.evaluate(a),
            Backend::QueryFacility(f) => f.evaluate(a),
            Backend::GraphCut(f) => f.evaluate(a),
            Backend::LogDet(f) => f.evaluate(a)?,
            Backend::DivGcmi {
                relevance,
                diversity,
                eta,
            } => relevance.evaluate(a) + eta * diversity.evaluate(a),
        })
    }

    pub fn new_state(&self) -> SelectionState {
        let memo = match &self.backend {
            Backend::Facility(f) => Memo::Facility(f.memo()),
            Backend::QueryFacility(f) => Memo::QueryFacility(f.memo()),
            Backend::GraphCut(f) => Memo::GraphCut(f.memo()),
            Backend::LogDet(f) => Memo::LogDet(f.memo()),
            Backend::DivGcmi {
                relevance,
                diversity,
                ..
            } => Memo::DivGcmi(relevance.memo(), diversity.memo()),
        };
        SelectionState {
            chosen: Vec::new(),
            member: vec![false; self.n],
            value: 0.0,
            memo,
        }
    }

    fn check_candidate(&self, state: &SelectionState, x: usize) -> Result<()> {
        if x >= self.n {
            return Err(Error::IndexOutOfRange {
                index: x,
                len: self.n,
            });
        }
        if state.member[x] {
            return Err(Error::AlreadySelected(x));
        }
        Ok(())
    }

    /// Marginal gain of adding `x` to the state's selection.
    pub fn gain(&self, state: &SelectionState, x: usize) -> Result<f64> {
        self.check_candidate(state, x)?;
        Ok(self.gain_unchecked(state, x))
    }

    pub(crate) fn gain_unchecked(&self, state: &SelectionState, x: usize) -> f64 {
        match (&self.backend, &state.memo) {
            (Backend::Facility(f), Memo::Facility(m)) => f.gain(m, x),
            (Backend::QueryFacility(f), Memo::QueryFacility(m)) => f.gain(m, x),
            (Backend::GraphCut(f), Memo::GraphCut(m)) => f.gain(m, x),
            (Backend::LogDet(f), Memo::LogDet(m)) => f.gain(m, x),
            (
                Backend::DivGcmi {
                    relevance,
                    diversity,
                    eta,
                },
                Memo::DivGcmi(gm, fm),
            ) => relevance.gain(gm, x) + eta * diversity.gain(fm, x),
            _ => unreachable!("state does not belong to this function"),
        }
    }

    /// Adds `x` to the selection and returns its gain.
    pub fn commit(&self, state: &mut SelectionState, x: usize) -> Result<f64> {
        let g = self.gain(state, x)?;
        self.commit_unchecked(state, x, g);
        Ok(g)
    }

    pub(crate) fn commit_unchecked(&self, state: &mut SelectionState, x: usize, gain: f64) {
        match (&self.backend, &mut state.memo) {
            (Backend::Facility(f), Memo::Facility(m)) => f.commit(m, x),
            (Backend::QueryFacility(f), Memo::QueryFacility(m)) => f.commit(m, x),
            (Backend::GraphCut(f), Memo::GraphCut(m)) => f.commit(m, x),
            (Backend::LogDet(f), Memo::LogDet(m)) => f.commit(m, x),
            (
                Backend::DivGcmi {
                    relevance,
                    diversity,
                    ..
                },
                Memo::DivGcmi(gm, fm),
            ) => {
                relevance.commit(gm, x);
                diversity.commit(fm, x);
            }
            _ => unreachable!("state does not belong to this function"),
        }
        state.member[x] = true;
        state.chosen.push(x);
        state.value += gain;
    }
}

/// Query-set choice for [`reduce_scmi`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QueryChoice {
    /// Q ← U.
    Ground,
    Set(Vec<usize>),
}

/// Specializes a conditional mutual information kind by the choice of Q and
/// P: Q←U, P←∅ gives the plain function; Q←Q, P←∅ the mutual information;
/// Q←U, P←P the conditional gain; otherwise the full form.
pub fn reduce_scmi(
    kind: FunctionKind,
    joint: &SimilarityKernel,
    u: &[usize],
    query: &QueryChoice,
    conditioning: &[usize],
    params: FunctionParams,
) -> Result<InfoFunction> {
    let (plain, mi, cg) = match kind {
        FunctionKind::Flcmi => (FunctionKind::Fl, FunctionKind::Flvmi, FunctionKind::Flcg),
        FunctionKind::LogDetCmi => (
            FunctionKind::LogDet,
            FunctionKind::LogDetMi,
            FunctionKind::LogDetCg,
        ),
        other => {
            return Err(Error::config(format!(
                "{other} is not a conditional mutual information kind"
            )))
        }
    };
    let (reduced, q) = match (query, conditioning.is_empty()) {
        (QueryChoice::Ground, true) => (plain, Vec::new()),
        (QueryChoice::Set(q), true) => (mi, q.clone()),
        (QueryChoice::Ground, false) => (cg, Vec::new()),
        (QueryChoice::Set(q), false) => (kind, q.clone()),
    };
    InfoFunction::from_joint(reduced, joint, u, &q, conditioning, params)
}
