//! Synthetic experimental settings: standard, rare-class, redundancy and
//! out-of-distribution splits over Gaussian blobs, plus the query and
//! conditioning wiring each setting uses and the uncertainty baselines.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use log::warn;
use ndarray::{Array2, Axis};
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::{Family, FunctionKind};
use crate::surrogate::SurrogateModel;

/// SplitMix64 step, used to derive independent sub-seeds.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Isotropic Gaussian classes with means on a sphere of radius `4·spread`
/// and per-coordinate noise `spread`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlobModel {
    means: Array2<f64>,
    spread: f64,
}

impl BlobModel {
    pub fn new(classes: usize, dim: usize, spread: f64, seed: u64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::config("blob dimension must be at least 2"));
        }
        if !(spread > 0.0) {
            return Err(Error::config("blob spread must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut means = Array2::<f64>::zeros((classes, dim));
        for mut row in means.axis_iter_mut(Axis(0)) {
            row.mapv_inplace(|_| rng.sample(StandardNormal));
            let norm = row.dot(&row).sqrt();
            row *= 4.0 * spread / norm;
        }
        Ok(Self { means, spread })
    }

    pub fn classes(&self) -> usize {
        self.means.nrows()
    }

    pub fn dim(&self) -> usize {
        self.means.ncols()
    }

    pub fn means(&self) -> &Array2<f64> {
        &self.means
    }

    /// `counts[c]` points of class `c`, grouped by class in order.
    pub fn sample(&self, counts: &[usize], seed: u64) -> (Array2<f64>, Vec<usize>) {
        let total: usize = counts.iter().sum();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Array2::<f64>::zeros((total, self.dim()));
        let mut y = Vec::with_capacity(total);
        let mut r = 0;
        for (c, &n) in counts.iter().enumerate() {
            for _ in 0..n {
                for (v, &m) in x.row_mut(r).iter_mut().zip(self.means.row(c)) {
                    *v = m + self.spread * rng.sample::<f64, _>(StandardNormal);
                }
                y.push(c);
                r += 1;
            }
        }
        (x, y)
    }
}

/// One-shot blob sample: `counts.len()` classes.
pub fn make_blobs(
    counts: &[usize],
    dim: usize,
    spread: f64,
    seed: u64,
) -> Result<(Array2<f64>, Vec<usize>)> {
    let model = BlobModel::new(counts.len(), dim, spread, derive_seed(seed, 1))?;
    Ok(model.sample(counts, derive_seed(seed, 2)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Standard,
    Rare,
    Redundant,
    Ood,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Labeled,
    Unlabeled,
    RareQuery,
    Validation,
}

impl Role {
    fn name(self) -> &'static str {
        match self {
            Role::Labeled => "labeled",
            Role::Unlabeled => "unlabeled",
            Role::RareQuery => "rare_query",
            Role::Validation => "validation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlobConfig {
    pub classes: usize,
    pub dim: usize,
    pub spread: f64,
    pub test_per_class: usize,
    /// Fixes class means, point features and the test set. The run seed
    /// only decides which points take which role.
    pub data_seed: u64,
}

impl Default for BlobConfig {
    fn default() -> Self {
        Self {
            classes: 10,
            dim: 32,
            spread: 1.0,
            test_per_class: 500,
            data_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StandardConfig {
    pub blobs: BlobConfig,
    pub labeled_per_class: usize,
    pub valid_per_class: usize,
    pub unlabeled_per_class: usize,
}

impl Default for StandardConfig {
    fn default() -> Self {
        Self {
            blobs: BlobConfig::default(),
            labeled_per_class: 20,
            valid_per_class: 5,
            unlabeled_per_class: 500,
        }
    }
}

/// Rare-class layout. The upper half of the classes is rare; a rare class
/// gets `labeled_rare` labeled and `round(unlabeled_common / ρ)` unlabeled
/// points, a common class `labeled_common` and `unlabeled_common`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RareConfig {
    pub blobs: BlobConfig,
    pub rho: f64,
    pub labeled_rare: usize,
    pub labeled_common: usize,
    pub valid_per_class: usize,
    pub unlabeled_common: usize,
    /// Held-out query examples per rare class.
    pub rare_in_query: usize,
}

impl Default for RareConfig {
    fn default() -> Self {
        Self {
            blobs: BlobConfig::default(),
            rho: 20.0,
            labeled_rare: 3,
            labeled_common: 22,
            valid_per_class: 5,
            unlabeled_common: 3000,
            rare_in_query: 5,
        }
    }
}

impl RareConfig {
    pub fn unlabeled_rare(&self) -> usize {
        (self.unlabeled_common as f64 / self.rho).round() as usize
    }

    pub fn rare_classes(&self) -> Vec<usize> {
        (self.blobs.classes / 2..self.blobs.classes).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RedundantConfig {
    pub blobs: BlobConfig,
    /// Unique unlabeled points before duplication.
    pub unique: usize,
    pub dup_fraction: f64,
    /// Total copies of each duplicated point, the original included.
    pub redundancy_factor: usize,
    pub labeled_per_class: usize,
    pub valid_per_class: usize,
}

impl Default for RedundantConfig {
    fn default() -> Self {
        Self {
            blobs: BlobConfig::default(),
            unique: 5000,
            dup_fraction: 0.2,
            redundancy_factor: 10,
            labeled_per_class: 50,
            valid_per_class: 5,
        }
    }
}

impl RedundantConfig {
    pub fn duplicated_originals(&self) -> usize {
        (self.unique as f64 * self.dup_fraction).round() as usize
    }

    pub fn total_unlabeled(&self) -> usize {
        let k = self.duplicated_originals();
        self.unique - k + k * self.redundancy_factor
    }
}

/// OOD layout: classes `0..id_classes` are in-distribution, the next
/// `ood_classes` are out-of-distribution. The model gets one extra class
/// standing for every OOD class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OodConfig {
    pub dim: usize,
    pub spread: f64,
    pub test_per_class: usize,
    pub id_classes: usize,
    pub ood_classes: usize,
    pub labeled_per_id: usize,
    pub valid_per_id: usize,
    pub unlabeled_per_id: usize,
    pub unlabeled_per_ood: usize,
    /// See [`BlobConfig::data_seed`].
    pub data_seed: u64,
}

impl Default for OodConfig {
    fn default() -> Self {
        Self {
            dim: 32,
            spread: 1.0,
            test_per_class: 500,
            id_classes: 8,
            ood_classes: 2,
            labeled_per_id: 200,
            valid_per_id: 5,
            unlabeled_per_id: 500,
            unlabeled_per_ood: 5000,
            data_seed: 0,
        }
    }
}

/// A scenario's configuration, tagged by kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ScenarioConfig {
    Standard(StandardConfig),
    Rare(RareConfig),
    Redundant(RedundantConfig),
    Ood(OodConfig),
    /// External data: a dataset CSV and a role CSV. Validation points
    /// double as the test set.
    Csv {
        dataset: std::path::PathBuf,
        roles: std::path::PathBuf,
    },
}

impl ScenarioConfig {
    pub fn kind(&self) -> ScenarioKind {
        match self {
            ScenarioConfig::Standard(_) | ScenarioConfig::Csv { .. } => ScenarioKind::Standard,
            ScenarioConfig::Rare(_) => ScenarioKind::Rare,
            ScenarioConfig::Redundant(_) => ScenarioKind::Redundant,
            ScenarioConfig::Ood(_) => ScenarioKind::Ood,
        }
    }

    pub fn build(&self, seed: u64) -> Result<ScenarioSplit> {
        match self {
            ScenarioConfig::Standard(c) => build_standard_split(c, seed),
            ScenarioConfig::Rare(c) => build_rare_split(c, seed),
            ScenarioConfig::Redundant(c) => build_redundant_split(c, seed),
            ScenarioConfig::Ood(c) => build_ood_split(c, seed),
            ScenarioConfig::Csv { dataset, roles } => read_split_csv(dataset, roles),
        }
    }
}

/// All points of one experiment with their roles and bookkeeping sets.
///
/// Ground-truth labels of unlabeled points are readable only through
/// [`ScenarioSplit::label`], which counts such reads.
#[derive(Debug)]
pub struct ScenarioSplit {
    kind: ScenarioKind,
    features: Array2<f64>,
    classes: Vec<usize>,
    num_classes: usize,
    model_classes: usize,
    roles: Vec<Role>,
    labeled: Vec<usize>,
    unlabeled: Vec<usize>,
    rare_set: Vec<usize>,
    validation: Vec<usize>,
    id_set: Vec<usize>,
    ood_set: Vec<usize>,
    duplication_map: Vec<usize>,
    rare_classes: Vec<usize>,
    ood_classes: Vec<usize>,
    pub rho: f64,
    pub redundancy_factor: usize,
    test_features: Array2<f64>,
    test_classes: Vec<usize>,
    unlabeled_reads: AtomicUsize,
}

impl Clone for ScenarioSplit {
    fn clone(&self) -> Self {
        Self {
            kind: self.kind,
            features: self.features.clone(),
            classes: self.classes.clone(),
            num_classes: self.num_classes,
            model_classes: self.model_classes,
            roles: self.roles.clone(),
            labeled: self.labeled.clone(),
            unlabeled: self.unlabeled.clone(),
            rare_set: self.rare_set.clone(),
            validation: self.validation.clone(),
            id_set: self.id_set.clone(),
            ood_set: self.ood_set.clone(),
            duplication_map: self.duplication_map.clone(),
            rare_classes: self.rare_classes.clone(),
            ood_classes: self.ood_classes.clone(),
            rho: self.rho,
            redundancy_factor: self.redundancy_factor,
            test_features: self.test_features.clone(),
            test_classes: self.test_classes.clone(),
            unlabeled_reads: AtomicUsize::new(self.unlabeled_reads.load(Ordering::Relaxed)),
        }
    }
}

struct Draft {
    kind: ScenarioKind,
    features: Array2<f64>,
    classes: Vec<usize>,
    num_classes: usize,
    roles: Vec<Role>,
    duplication_map: Vec<usize>,
    rare_classes: Vec<usize>,
    ood_classes: Vec<usize>,
    rho: f64,
    redundancy_factor: usize,
    test_features: Array2<f64>,
    test_classes: Vec<usize>,
}

impl Draft {
    fn finish(self) -> ScenarioSplit {
        let pick = |r: Role| -> Vec<usize> {
            (0..self.roles.len()).filter(|&i| self.roles[i] == r).collect()
        };
        let labeled = pick(Role::Labeled);
        let unlabeled = pick(Role::Unlabeled);
        let rare_set = pick(Role::RareQuery);
        let validation = pick(Role::Validation);
        let ood = !self.ood_classes.is_empty();
        let id_set = if self.kind == ScenarioKind::Ood {
            validation
                .iter()
                .copied()
                .filter(|&i| !self.ood_classes.contains(&self.classes[i]))
                .collect()
        } else {
            Vec::new()
        };
        let model_classes = if ood {
            self.num_classes - self.ood_classes.len() + 1
        } else {
            self.num_classes
        };
        ScenarioSplit {
            kind: self.kind,
            features: self.features,
            classes: self.classes,
            num_classes: self.num_classes,
            model_classes,
            roles: self.roles,
            labeled,
            unlabeled,
            rare_set,
            validation,
            id_set,
            ood_set: Vec::new(),
            duplication_map: self.duplication_map,
            rare_classes: self.rare_classes,
            ood_classes: self.ood_classes,
            rho: self.rho,
            redundancy_factor: self.redundancy_factor,
            test_features: self.test_features,
            test_classes: self.test_classes,
            unlabeled_reads: AtomicUsize::new(0),
        }
    }
}

/// Samples the per-class point counts with `data_seed`, then shuffles the
/// role assignment within each class with `role_seed`.
fn layout(
    model: &BlobModel,
    per_class: &[Vec<(Role, usize)>],
    data_seed: u64,
    role_seed: u64,
) -> (Array2<f64>, Vec<usize>, Vec<Role>) {
    let counts: Vec<usize> = per_class
        .iter()
        .map(|roles| roles.iter().map(|(_, n)| n).sum())
        .collect();
    let (x, y) = model.sample(&counts, derive_seed(data_seed, 2));
    let mut rng = ChaCha8Rng::seed_from_u64(role_seed);
    let mut roles = Vec::with_capacity(y.len());
    for rs in per_class {
        let mut block: Vec<Role> = rs.iter().flat_map(|&(r, n)| std::iter::repeat_n(r, n)).collect();
        block.shuffle(&mut rng);
        roles.extend(block);
    }
    (x, y, roles)
}

fn test_draw(model: &BlobModel, classes: &[usize], per_class: usize, seed: u64) -> (Array2<f64>, Vec<usize>) {
    let mut counts = vec![0; model.classes()];
    for &c in classes {
        counts[c] = per_class;
    }
    model.sample(&counts, seed)
}

pub fn build_standard_split(cfg: &StandardConfig, seed: u64) -> Result<ScenarioSplit> {
    let b = &cfg.blobs;
    let model = BlobModel::new(b.classes, b.dim, b.spread, derive_seed(b.data_seed, 1))?;
    let per_class: Vec<Vec<(Role, usize)>> = (0..b.classes)
        .map(|_| {
            vec![
                (Role::Labeled, cfg.labeled_per_class),
                (Role::Validation, cfg.valid_per_class),
                (Role::Unlabeled, cfg.unlabeled_per_class),
            ]
        })
        .collect();
    let (features, classes, roles) = layout(&model, &per_class, b.data_seed, derive_seed(seed, 2));
    let all: Vec<usize> = (0..b.classes).collect();
    let (test_features, test_classes) = test_draw(&model, &all, b.test_per_class, derive_seed(b.data_seed, 3));
    let n = classes.len();
    Ok(Draft {
        kind: ScenarioKind::Standard,
        features,
        classes,
        num_classes: b.classes,
        roles,
        duplication_map: (0..n).collect(),
        rare_classes: Vec::new(),
        ood_classes: Vec::new(),
        rho: 1.0,
        redundancy_factor: 1,
        test_features,
        test_classes,
    }
    .finish())
}

pub fn build_rare_split(cfg: &RareConfig, seed: u64) -> Result<ScenarioSplit> {
    if !(cfg.rho >= 1.0) {
        return Err(Error::config(format!("imbalance factor must be >= 1, got {}", cfg.rho)));
    }
    let b = &cfg.blobs;
    if b.classes < 2 {
        return Err(Error::config("the rare scenario needs at least two classes"));
    }
    let rare = cfg.rare_classes();
    let model = BlobModel::new(b.classes, b.dim, b.spread, derive_seed(b.data_seed, 1))?;
    let per_class: Vec<Vec<(Role, usize)>> = (0..b.classes)
        .map(|c| {
            if rare.contains(&c) {
                vec![
                    (Role::Labeled, cfg.labeled_rare),
                    (Role::Validation, cfg.valid_per_class),
                    (Role::RareQuery, cfg.rare_in_query),
                    (Role::Unlabeled, cfg.unlabeled_rare()),
                ]
            } else {
                vec![
                    (Role::Labeled, cfg.labeled_common),
                    (Role::Validation, cfg.valid_per_class),
                    (Role::Unlabeled, cfg.unlabeled_common),
                ]
            }
        })
        .collect();
    let (features, classes, roles) = layout(&model, &per_class, b.data_seed, derive_seed(seed, 2));
    let all: Vec<usize> = (0..b.classes).collect();
    let (test_features, test_classes) = test_draw(&model, &all, b.test_per_class, derive_seed(b.data_seed, 3));
    let n = classes.len();
    Ok(Draft {
        kind: ScenarioKind::Rare,
        features,
        classes,
        num_classes: b.classes,
        roles,
        duplication_map: (0..n).collect(),
        rare_classes: rare,
        ood_classes: Vec::new(),
        rho: cfg.rho,
        redundancy_factor: 1,
        test_features,
        test_classes,
    }
    .finish())
}

pub fn build_redundant_split(cfg: &RedundantConfig, seed: u64) -> Result<ScenarioSplit> {
    if !(0.0..=1.0).contains(&cfg.dup_fraction) {
        return Err(Error::config("duplication fraction must lie in [0, 1]"));
    }
    if cfg.redundancy_factor == 0 {
        return Err(Error::config("redundancy factor must be at least 1"));
    }
    let b = &cfg.blobs;
    let model = BlobModel::new(b.classes, b.dim, b.spread, derive_seed(b.data_seed, 1))?;
    let (base, extra) = (cfg.unique / b.classes, cfg.unique % b.classes);
    let per_class: Vec<Vec<(Role, usize)>> = (0..b.classes)
        .map(|c| {
            vec![
                (Role::Labeled, cfg.labeled_per_class),
                (Role::Validation, cfg.valid_per_class),
                (Role::Unlabeled, base + usize::from(c < extra)),
            ]
        })
        .collect();
    let (x, y, roles) = layout(&model, &per_class, b.data_seed, derive_seed(seed, 2));
    let unique: Vec<usize> = (0..roles.len()).filter(|&i| roles[i] == Role::Unlabeled).collect();
    let k = cfg.duplicated_originals();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 4));
    let mut originals: Vec<usize> = index::sample(&mut rng, unique.len(), k)
        .into_iter()
        .map(|i| unique[i])
        .collect();
    originals.sort_unstable();
    let copies = k * (cfg.redundancy_factor - 1);
    let n = roles.len() + copies;
    let mut features = Array2::<f64>::zeros((n, b.dim));
    features.slice_mut(ndarray::s![..roles.len(), ..]).assign(&x);
    let mut classes = y;
    let mut all_roles = roles;
    let mut duplication_map: Vec<usize> = (0..all_roles.len()).collect();
    let mut r = all_roles.len();
    for &o in &originals {
        for _ in 1..cfg.redundancy_factor {
            let src = features.row(o).to_owned();
            features.row_mut(r).assign(&src);
            classes.push(classes[o]);
            all_roles.push(Role::Unlabeled);
            duplication_map.push(o);
            r += 1;
        }
    }
    let all: Vec<usize> = (0..b.classes).collect();
    let (test_features, test_classes) = test_draw(&model, &all, b.test_per_class, derive_seed(b.data_seed, 3));
    Ok(Draft {
        kind: ScenarioKind::Redundant,
        features,
        classes,
        num_classes: b.classes,
        roles: all_roles,
        duplication_map,
        rare_classes: Vec::new(),
        ood_classes: Vec::new(),
        rho: 1.0,
        redundancy_factor: cfg.redundancy_factor,
        test_features,
        test_classes,
    }
    .finish())
}

pub fn build_ood_split(cfg: &OodConfig, seed: u64) -> Result<ScenarioSplit> {
    if cfg.id_classes < 2 {
        return Err(Error::config("the OOD scenario needs at least two ID classes"));
    }
    let total = cfg.id_classes + cfg.ood_classes;
    let model = BlobModel::new(total, cfg.dim, cfg.spread, derive_seed(cfg.data_seed, 1))?;
    let per_class: Vec<Vec<(Role, usize)>> = (0..total)
        .map(|c| {
            if c < cfg.id_classes {
                vec![
                    (Role::Labeled, cfg.labeled_per_id),
                    (Role::Validation, cfg.valid_per_id),
                    (Role::Unlabeled, cfg.unlabeled_per_id),
                ]
            } else {
                vec![(Role::Unlabeled, cfg.unlabeled_per_ood)]
            }
        })
        .collect();
    let (features, classes, roles) = layout(&model, &per_class, cfg.data_seed, derive_seed(seed, 2));
    let id: Vec<usize> = (0..cfg.id_classes).collect();
    let (test_features, test_classes) = test_draw(&model, &id, cfg.test_per_class, derive_seed(cfg.data_seed, 3));
    let n = classes.len();
    let kind = if cfg.ood_classes == 0 {
        ScenarioKind::Standard
    } else {
        ScenarioKind::Ood
    };
    Ok(Draft {
        kind,
        features,
        classes,
        num_classes: total,
        roles,
        duplication_map: (0..n).collect(),
        rare_classes: Vec::new(),
        ood_classes: (cfg.id_classes..total).collect(),
        rho: 1.0,
        redundancy_factor: 1,
        test_features,
        test_classes,
    }
    .finish())
}

impl ScenarioSplit {
    pub fn kind(&self) -> ScenarioKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.roles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roles.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn rows(&self, idx: &[usize]) -> Array2<f64> {
        self.features.select(Axis(0), idx)
    }

    pub fn role(&self, i: usize) -> Role {
        self.roles[i]
    }

    pub fn labeled(&self) -> &[usize] {
        &self.labeled
    }

    pub fn unlabeled(&self) -> &[usize] {
        &self.unlabeled
    }

    pub fn rare_set(&self) -> &[usize] {
        &self.rare_set
    }

    pub fn validation(&self) -> &[usize] {
        &self.validation
    }

    /// Labeled in-distribution points used as the OOD query set.
    pub fn id_set(&self) -> &[usize] {
        &self.id_set
    }

    /// Labeled out-of-distribution points used as the OOD conditioning set.
    pub fn ood_set(&self) -> &[usize] {
        &self.ood_set
    }

    pub fn duplication_map(&self) -> &[usize] {
        &self.duplication_map
    }

    pub fn rare_classes(&self) -> &[usize] {
        &self.rare_classes
    }

    pub fn ood_classes(&self) -> &[usize] {
        &self.ood_classes
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Classifier outputs: the dataset classes, or the ID classes plus one
    /// OOD class.
    pub fn model_classes(&self) -> usize {
        self.model_classes
    }

    /// Number of in-distribution classes; accuracy is taken over these.
    pub fn id_classes(&self) -> usize {
        self.num_classes - self.ood_classes.len()
    }

    fn to_model_class(&self, c: usize) -> usize {
        if self.ood_classes.contains(&c) {
            self.model_classes - 1
        } else {
            c
        }
    }

    /// Ground-truth dataset class. Reads on unlabeled points are counted.
    pub fn label(&self, i: usize) -> usize {
        if self.roles[i] == Role::Unlabeled {
            self.unlabeled_reads.fetch_add(1, Ordering::Relaxed);
        }
        self.classes[i]
    }

    /// Training target for point `i` (OOD classes collapse to one).
    pub fn model_label(&self, i: usize) -> usize {
        self.to_model_class(self.label(i))
    }

    /// How many times a ground-truth label of an unlabeled point was read.
    pub fn unlabeled_label_reads(&self) -> usize {
        self.unlabeled_reads.load(Ordering::Relaxed)
    }

    pub fn is_rare_class(&self, c: usize) -> bool {
        self.rare_classes.contains(&c)
    }

    pub fn is_ood_class(&self, c: usize) -> bool {
        self.ood_classes.contains(&c)
    }

    pub fn test_features(&self) -> &Array2<f64> {
        &self.test_features
    }

    /// Test labels as model classes.
    pub fn test_labels(&self) -> Vec<usize> {
        self.test_classes.iter().map(|&c| self.to_model_class(c)).collect()
    }

    pub fn test_classes(&self) -> &[usize] {
        &self.test_classes
    }

    /// Reveals the labels of `a`, moving it from U to L. In the OOD
    /// scenario the revealed ID points join I and the OOD points join O.
    pub fn reveal(&mut self, a: &[usize]) -> Result<()> {
        let mut seen = BTreeSet::new();
        for &i in a {
            if i >= self.len() || self.roles[i] != Role::Unlabeled {
                return Err(Error::config(format!("point {i} is not in the unlabeled set")));
            }
            if !seen.insert(i) {
                return Err(Error::AlreadySelected(i));
            }
        }
        for &i in a {
            self.roles[i] = Role::Labeled;
        }
        self.unlabeled.retain(|i| !seen.contains(i));
        self.labeled.extend(a);
        self.labeled.sort_unstable();
        if self.kind == ScenarioKind::Ood {
            for &i in a {
                if self.is_ood_class(self.classes[i]) {
                    self.ood_set.push(i);
                } else {
                    self.id_set.push(i);
                }
            }
            self.id_set.sort_unstable();
            self.ood_set.sort_unstable();
        }
        Ok(())
    }

    /// Distinct originals among `selected`.
    pub fn unique_originals(&self, selected: &[usize]) -> usize {
        selected
            .iter()
            .map(|&i| self.duplication_map[i])
            .collect::<BTreeSet<_>>()
            .len()
    }

    /// Writes the dataset as `id,label,f0..` and the roles as `id,role`.
    pub fn write_csv(&self, dataset: &Path, roles: &Path) -> Result<()> {
        let mut f = BufWriter::new(std::fs::File::create(dataset)?);
        let cols: Vec<String> = (0..self.dim()).map(|j| format!("f{j}")).collect();
        writeln!(f, "id,label,{}", cols.join(","))?;
        for i in 0..self.len() {
            let vals: Vec<String> = self.features.row(i).iter().map(|v| format!("{v:e}")).collect();
            writeln!(f, "{i},{},{}", self.classes[i], vals.join(","))?;
        }
        f.flush()?;
        let mut f = BufWriter::new(std::fs::File::create(roles)?);
        writeln!(f, "id,role")?;
        for i in 0..self.len() {
            writeln!(f, "{i},{}", self.roles[i].name())?;
        }
        f.flush()?;
        Ok(())
    }
}

fn csv_lines(path: &Path) -> Result<Vec<Vec<String>>> {
    let f = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for line in f.lines().skip(1) {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(line.split(',').map(|s| s.trim().to_string()).collect());
    }
    Ok(out)
}

fn parse<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::config(format!("cannot parse {what} '{s}'")))
}

/// Loads an external dataset and role assignment. Ids in the files are
/// matched up and points are renumbered in dataset order; validation points
/// also serve as the test set.
pub fn read_split_csv(dataset: &Path, roles: &Path) -> Result<ScenarioSplit> {
    let rows = csv_lines(dataset)?;
    if rows.is_empty() {
        return Err(Error::config("dataset file has no rows"));
    }
    let d = rows[0].len().saturating_sub(2);
    let mut features = Array2::<f64>::zeros((rows.len(), d));
    let mut classes = Vec::with_capacity(rows.len());
    let mut ids = std::collections::HashMap::new();
    for (r, row) in rows.iter().enumerate() {
        if row.len() != d + 2 {
            return Err(Error::config(format!("dataset row {r} has {} fields", row.len())));
        }
        let id: String = row[0].clone();
        if ids.insert(id.clone(), r).is_some() {
            return Err(Error::config(format!("duplicate id '{id}'")));
        }
        classes.push(parse::<usize>(&row[1], "label")?);
        for j in 0..d {
            features[[r, j]] = parse(&row[j + 2], "feature")?;
        }
    }
    let mut assigned: Vec<Option<Role>> = vec![None; rows.len()];
    for row in csv_lines(roles)? {
        if row.len() != 2 {
            return Err(Error::config("role rows must be 'id,role'"));
        }
        let &r = ids
            .get(&row[0])
            .ok_or_else(|| Error::config(format!("unknown id '{}' in role file", row[0])))?;
        assigned[r] = Some(match row[1].as_str() {
            "labeled" => Role::Labeled,
            "unlabeled" => Role::Unlabeled,
            "rare_query" => Role::RareQuery,
            "validation" => Role::Validation,
            other => return Err(Error::config(format!("unknown role '{other}'"))),
        });
    }
    let roles: Vec<Role> = assigned
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.ok_or_else(|| Error::config(format!("row {i} has no role"))))
        .collect::<Result<_>>()?;
    let num_classes = classes.iter().max().map_or(0, |&m| m + 1);
    let valid: Vec<usize> = (0..roles.len()).filter(|&i| roles[i] == Role::Validation).collect();
    let test_features = features.select(Axis(0), &valid);
    let test_classes = valid.iter().map(|&i| classes[i]).collect();
    let n = roles.len();
    Ok(Draft {
        kind: ScenarioKind::Standard,
        features,
        classes,
        num_classes,
        roles,
        duplication_map: (0..n).collect(),
        rare_classes: Vec::new(),
        ood_classes: Vec::new(),
        rho: 1.0,
        redundancy_factor: 1,
        test_features,
        test_classes,
    }
    .finish())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuerySource {
    None,
    RareSet,
    LabeledId,
    FullUnlabeled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditioningSource {
    None,
    Labeled,
    LabeledOod,
}

/// Which function to maximize and where its query and conditioning sets
/// come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcquisitionSpec {
    pub kind: FunctionKind,
    pub query: QuerySource,
    pub conditioning: ConditioningSource,
}

impl AcquisitionSpec {
    pub fn validate(&self) -> Result<()> {
        use ConditioningSource as C;
        use QuerySource as Q;
        let ok = match self.kind.family() {
            Family::Submodular => matches!(self.query, Q::None | Q::FullUnlabeled) && self.conditioning == C::None,
            Family::MutualInformation => {
                matches!(self.query, Q::RareSet | Q::LabeledId) && self.conditioning == C::None
            }
            Family::ConditionalGain => self.query == Q::FullUnlabeled && self.conditioning != C::None,
            Family::ConditionalMutualInformation => {
                self.query != Q::None && self.conditioning != C::None
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!(
                "{} cannot use query source {:?} with conditioning source {:?}",
                self.kind, self.query, self.conditioning
            )))
        }
    }

    /// The wiring each scenario uses for `kind`.
    pub fn for_scenario(kind: FunctionKind, scenario: ScenarioKind) -> Result<Self> {
        use ConditioningSource as C;
        use QuerySource as Q;
        let (query, conditioning) = match (kind.family(), scenario) {
            (Family::Submodular, _) => (Q::FullUnlabeled, C::None),
            (Family::MutualInformation, ScenarioKind::Rare) => (Q::RareSet, C::None),
            (Family::MutualInformation, ScenarioKind::Ood) => (Q::LabeledId, C::None),
            (Family::ConditionalGain, ScenarioKind::Ood) => (Q::FullUnlabeled, C::LabeledOod),
            (Family::ConditionalGain, _) => (Q::FullUnlabeled, C::Labeled),
            (Family::ConditionalMutualInformation, ScenarioKind::Ood) => (Q::LabeledId, C::LabeledOod),
            (Family::ConditionalMutualInformation, ScenarioKind::Rare) => (Q::RareSet, C::Labeled),
            _ => {
                return Err(Error::config(format!(
                    "{kind} has no default wiring in the {scenario} scenario"
                )))
            }
        };
        let spec = Self {
            kind,
            query,
            conditioning,
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScenarioKind::Standard => "standard",
            ScenarioKind::Rare => "rare",
            ScenarioKind::Redundant => "redundant",
            ScenarioKind::Ood => "ood",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    Random,
    Entropy,
    Margin,
    LeastConfidence,
}

impl Baseline {
    pub fn name(self) -> &'static str {
        match self {
            Baseline::Random => "RANDOM",
            Baseline::Entropy => "ENTROPY",
            Baseline::Margin => "MARGIN",
            Baseline::LeastConfidence => "LEAST_CONF",
        }
    }
}

impl std::str::FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "random" => Ok(Baseline::Random),
            "entropy" => Ok(Baseline::Entropy),
            "margin" => Ok(Baseline::Margin),
            "least_confidence" | "least_conf" => Ok(Baseline::LeastConfidence),
            other => Err(Error::config(format!("unknown baseline '{other}'"))),
        }
    }
}

/// Picks `b` unlabeled points with a baseline rule. Scores are sorted with
/// ties going to the lowest index.
pub fn baseline_select(
    method: Baseline,
    model: &SurrogateModel,
    split: &ScenarioSplit,
    b: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    let u = split.unlabeled();
    let b = if b > u.len() {
        warn!("budget {b} exceeds {} unlabeled points; selecting all", u.len());
        u.len()
    } else {
        b
    };
    if method == Baseline::Random {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked: Vec<usize> = index::sample(&mut rng, u.len(), b)
            .into_iter()
            .map(|i| u[i])
            .collect();
        picked.shuffle(&mut rng);
        return Ok(picked);
    }
    let scores = model.uncertainty(split.rows(u).view())?;
    // Larger key is selected first.
    let key: Vec<f64> = match method {
        Baseline::Entropy => scores.entropy,
        Baseline::Margin => scores.margin.iter().map(|m| -m).collect(),
        Baseline::LeastConfidence => scores.least_confidence,
        Baseline::Random => unreachable!(),
    };
    let mut order: Vec<usize> = (0..u.len()).collect();
    order.sort_by(|&a, &c| key[c].total_cmp(&key[a]).then(a.cmp(&c)));
    Ok(order[..b].iter().map(|&i| u[i]).collect())
}
