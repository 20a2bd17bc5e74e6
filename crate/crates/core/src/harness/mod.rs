//! The active-learning loop: retrain, embed, select, reveal, measure.

mod penalty;

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::{FunctionKind, FunctionParams, InfoFunction};
use crate::greedy::{greedy_select, partitioned_select, GreedyConfig, Variant};
use crate::scenarios::{
    baseline_select, derive_seed, AcquisitionSpec, Baseline, ConditioningSource, QuerySource,
    ScenarioConfig, ScenarioKind, ScenarioSplit,
};
use crate::similarity::EmbeddingMatrix;
use crate::surrogate::{SurrogateModel, TrainConfig};

pub use penalty::{paired_t, penalty_matrix, PenaltyMatrix, DEFAULT_ALPHA};

/// What picks each batch: an information measure or a baseline rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Function(FunctionKind),
    Baseline(Baseline),
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Function(k) => k.name(),
            Method::Baseline(b) => b.name(),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Ok(k) = s.parse::<FunctionKind>() {
            return Ok(Method::Function(k));
        }
        s.parse::<Baseline>()
            .map(Method::Baseline)
            .map_err(|_| Error::config(format!("unknown method '{s}'")))
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Query and conditioning sources overriding the scenario defaults.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sources {
    pub query: QuerySource,
    pub conditioning: ConditioningSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub variant: Option<Variant>,
    /// Stochastic greedy ε.
    pub epsilon: f64,
    pub partitions: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            variant: None,
            epsilon: 0.01,
            partitions: 1,
        }
    }
}

/// Everything that determines a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub method: Method,
    pub rounds: usize,
    pub budget: usize,
    pub optimizer: OptimizerConfig,
    pub model: TrainConfig,
    pub function: FunctionParams,
    pub sources: Option<Sources>,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    /// Adds wall-clock seconds to each record, which makes output
    /// non-reproducible.
    pub record_timing: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::Rare(Default::default()),
            method: Method::Baseline(Baseline::Random),
            rounds: 3,
            budget: 125,
            optimizer: OptimizerConfig::default(),
            model: TrainConfig::default(),
            function: FunctionParams::default(),
            sources: None,
            seed: 0,
            output_dir: None,
            record_timing: false,
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    /// The acquisition wiring, when the method is a function.
    pub fn acquisition(&self) -> Result<Option<AcquisitionSpec>> {
        let Method::Function(kind) = self.method else {
            return Ok(None);
        };
        let spec = match self.sources {
            Some(s) => AcquisitionSpec {
                kind,
                query: s.query,
                conditioning: s.conditioning,
            },
            None => AcquisitionSpec::for_scenario(kind, self.scenario.kind())?,
        };
        spec.validate()?;
        Ok(Some(spec))
    }

    fn greedy(&self, round: usize) -> GreedyConfig {
        GreedyConfig {
            budget: self.budget,
            variant: self.optimizer.variant,
            epsilon: self.optimizer.epsilon,
            seed: derive_seed(self.seed, 3000 + round as u64),
            partitions: self.optimizer.partitions,
            stop_on_negative: false,
        }
    }

    /// Checks everything that does not need the data.
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::config("rounds must be at least 1"));
        }
        self.greedy(0).validate()?;
        self.acquisition()?;
        Ok(())
    }
}

/// Metrics of one selection round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub labeled_size: usize,
    /// Accuracy on the test set; in-distribution classes only for OOD.
    pub test_accuracy: f64,
    /// Mean per-class accuracy over the rare classes, if there are any.
    pub rare_accuracy: Option<f64>,
    pub rare_selected: Option<usize>,
    /// Distinct originals among all points selected so far.
    pub unique_selected: usize,
    pub id_selected: Option<usize>,
    pub selected: Vec<usize>,
    /// Objective value of the batch, for function methods.
    pub objective: Option<f64>,
    pub gain_evaluations: Option<u64>,
    pub numerical_warnings: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub method: Method,
    pub scenario: ScenarioKind,
    pub seed: u64,
    pub rounds: usize,
    pub budget: usize,
    pub initial_accuracy: f64,
    pub final_accuracy: f64,
    pub final_rare_accuracy: Option<f64>,
    pub total_rare_selected: Option<usize>,
    pub final_unique_selected: usize,
    pub total_id_selected: Option<usize>,
    pub labeled_size: usize,
    /// Reads of ground-truth labels of still-unlabeled points; always zero.
    pub unlabeled_label_reads: usize,
}

pub struct RunOutcome {
    pub records: Vec<RoundRecord>,
    pub summary: RunSummary,
    pub model: SurrogateModel,
    pub split: ScenarioSplit,
}

fn train(split: &ScenarioSplit, cfg: &TrainConfig, seed: u64) -> Result<SurrogateModel> {
    let l = split.labeled();
    let labels: Vec<usize> = l.iter().map(|&i| split.model_label(i)).collect();
    let cfg = TrainConfig { seed, ..*cfg };
    SurrogateModel::train(split.rows(l).view(), &labels, split.model_classes(), &cfg)
}

/// Test accuracy and mean rare-class accuracy of `model`.
pub fn test_metrics(model: &SurrogateModel, split: &ScenarioSplit) -> Result<(f64, Option<f64>)> {
    let x = split.test_features();
    let y = split.test_labels();
    let restrict = (!split.ood_classes().is_empty()).then(|| split.id_classes());
    let pred = match restrict {
        Some(k) => model.predict_restricted(x.view(), k)?,
        None => model.hypothesized_labels(x.view())?,
    };
    let acc = if y.is_empty() {
        0.0
    } else {
        pred.iter().zip(&y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64
    };
    let rare = split.rare_classes();
    if rare.is_empty() {
        return Ok((acc, None));
    }
    let mut per_class = Vec::with_capacity(rare.len());
    for &c in rare {
        let (mut hit, mut total) = (0usize, 0usize);
        for (i, &t) in split.test_classes().iter().enumerate() {
            if t == c {
                total += 1;
                hit += usize::from(pred[i] == y[i]);
            }
        }
        if total > 0 {
            per_class.push(hit as f64 / total as f64);
        }
    }
    let mean = (!per_class.is_empty()).then(|| per_class.iter().sum::<f64>() / per_class.len() as f64);
    Ok((acc, mean))
}

/// Round metrics after `selected` has been revealed.
pub fn compute_metrics(
    model: &SurrogateModel,
    split: &ScenarioSplit,
    round: usize,
    selected: &[usize],
    all_selected: &[usize],
) -> Result<RoundRecord> {
    for &i in selected {
        if split.role(i) != crate::scenarios::Role::Labeled {
            return Err(Error::config(format!("point {i} was selected but not revealed")));
        }
    }
    let (test_accuracy, rare_accuracy) = test_metrics(model, split)?;
    let rare_selected = (!split.rare_classes().is_empty())
        .then(|| selected.iter().filter(|&&i| split.is_rare_class(split.label(i))).count());
    let id_selected = (split.kind() == ScenarioKind::Ood)
        .then(|| selected.iter().filter(|&&i| !split.is_ood_class(split.label(i))).count());
    Ok(RoundRecord {
        round,
        labeled_size: split.labeled().len(),
        test_accuracy,
        rare_accuracy,
        rare_selected,
        unique_selected: split.unique_originals(all_selected),
        id_selected,
        selected: selected.to_vec(),
        objective: None,
        gain_evaluations: None,
        numerical_warnings: 0,
        seconds: None,
    })
}

/// Embeddings of labeled points under their true labels.
fn labeled_embeddings(
    model: &SurrogateModel,
    split: &ScenarioSplit,
    idx: &[usize],
) -> Result<EmbeddingMatrix> {
    let labels: Vec<usize> = idx.iter().map(|&i| split.model_label(i)).collect();
    let e = model.gradient_embeddings(split.rows(idx).view(), &labels)?;
    EmbeddingMatrix::new(e.data().to_owned(), idx.to_vec())
}

fn function_select(
    cfg: &RunConfig,
    spec: &AcquisitionSpec,
    model: &SurrogateModel,
    split: &ScenarioSplit,
    round: usize,
) -> Result<crate::greedy::SelectionResult> {
    let u = split.unlabeled();
    let hyp = model.hypothesized_labels(split.rows(u).view())?;
    let ground = model.gradient_embeddings(split.rows(u).view(), &hyp)?;
    let ground = EmbeddingMatrix::new(ground.data().to_owned(), u.to_vec())?;
    let query = match spec.query {
        QuerySource::RareSet => Some(labeled_embeddings(model, split, split.rare_set())?),
        QuerySource::LabeledId => Some(labeled_embeddings(model, split, split.id_set())?),
        QuerySource::FullUnlabeled | QuerySource::None => None,
    };
    let conditioning = match spec.conditioning {
        ConditioningSource::Labeled => Some(labeled_embeddings(model, split, split.labeled())?),
        ConditioningSource::LabeledOod => Some(labeled_embeddings(model, split, split.ood_set())?),
        ConditioningSource::None => None,
    };
    let full_query = spec.query == QuerySource::FullUnlabeled && spec.kind.uses_query();
    let greedy = cfg.greedy(round);
    let result = if greedy.partitions > 1 {
        partitioned_select(u.len(), &greedy, |chunk| {
            let g = ground.select(chunk)?;
            let q = if full_query { Some(&g) } else { query.as_ref() };
            InfoFunction::from_embeddings(spec.kind, &g, q, conditioning.as_ref(), cfg.function)
        })?
    } else {
        let q = if full_query { Some(&ground) } else { query.as_ref() };
        let f = InfoFunction::from_embeddings(spec.kind, &ground, q, conditioning.as_ref(), cfg.function)?;
        greedy_select(&f, &greedy)?
    };
    let mut result = result;
    for x in &mut result.chosen {
        *x = u[*x];
    }
    Ok(result)
}

/// Runs the loop, calling `on_round` after every round.
pub fn run_al_with(
    cfg: &RunConfig,
    mut on_round: impl FnMut(&RoundRecord) -> Result<()>,
) -> Result<RunOutcome> {
    cfg.validate()?;
    let spec = cfg.acquisition()?;
    let mut split = cfg.scenario.build(derive_seed(cfg.seed, 100))?;
    let needed = cfg.budget.saturating_mul(cfg.rounds);
    if needed > split.unlabeled().len() {
        return Err(Error::config(format!(
            "{} rounds of {} exceed the {} unlabeled points",
            cfg.rounds,
            cfg.budget,
            split.unlabeled().len()
        )));
    }
    let mut model = train(&split, &cfg.model, derive_seed(cfg.seed, 1000))?;
    let (initial_accuracy, _) = test_metrics(&model, &split)?;
    let mut records = Vec::with_capacity(cfg.rounds);
    let mut all_selected = Vec::new();
    for round in 1..=cfg.rounds {
        let wrap = |e: Error| Error::Round {
            round,
            source: Box::new(e),
        };
        let start = Instant::now();
        let (selected, objective, evaluations, warnings) = match (cfg.method, &spec) {
            (Method::Baseline(b), _) => {
                let seed = derive_seed(cfg.seed, 2000 + round as u64);
                (baseline_select(b, &model, &split, cfg.budget, seed).map_err(wrap)?, None, None, 0)
            }
            (Method::Function(_), Some(spec)) => {
                let r = function_select(cfg, spec, &model, &split, round).map_err(wrap)?;
                (r.chosen, Some(r.value), Some(r.evaluations), r.numerical_warnings)
            }
            (Method::Function(_), None) => unreachable!("validated"),
        };
        split.reveal(&selected).map_err(wrap)?;
        all_selected.extend_from_slice(&selected);
        model = train(&split, &cfg.model, derive_seed(cfg.seed, 1000 + round as u64)).map_err(wrap)?;
        let mut record = compute_metrics(&model, &split, round, &selected, &all_selected).map_err(wrap)?;
        record.objective = objective;
        record.gain_evaluations = evaluations;
        record.numerical_warnings = warnings;
        if cfg.record_timing {
            record.seconds = Some(start.elapsed().as_secs_f64());
        }
        info!(
            "{} seed {} round {round}: accuracy {:.4}",
            cfg.method, cfg.seed, record.test_accuracy
        );
        on_round(&record)?;
        records.push(record);
    }
    let last = records.last().expect("rounds >= 1");
    let sum_opt = |f: fn(&RoundRecord) -> Option<usize>| -> Option<usize> {
        records.iter().map(f).sum()
    };
    let summary = RunSummary {
        method: cfg.method,
        scenario: split.kind(),
        seed: cfg.seed,
        rounds: cfg.rounds,
        budget: cfg.budget,
        initial_accuracy,
        final_accuracy: last.test_accuracy,
        final_rare_accuracy: last.rare_accuracy,
        total_rare_selected: sum_opt(|r| r.rare_selected),
        final_unique_selected: last.unique_selected,
        total_id_selected: sum_opt(|r| r.id_selected),
        labeled_size: split.labeled().len(),
        unlabeled_label_reads: split.unlabeled_label_reads(),
    };
    Ok(RunOutcome {
        records,
        summary,
        model,
        split,
    })
}

pub fn run_al(cfg: &RunConfig) -> Result<RunOutcome> {
    run_al_with(cfg, |_| Ok(()))
}

/// Runs `cfg`, streaming records to `dir/<stem>.jsonl` and writing
/// `dir/<stem>.summary.json`. Records written before a failure stay on disk.
pub fn run_to_dir(cfg: &RunConfig, dir: &Path, stem: &str) -> Result<RunOutcome> {
    std::fs::create_dir_all(dir)?;
    let mut out = BufWriter::new(File::create(dir.join(format!("{stem}.jsonl")))?);
    let result = run_al_with(cfg, |r| {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(())
    });
    out.flush()?;
    let outcome = result?;
    let f = File::create(dir.join(format!("{stem}.summary.json")))?;
    serde_json::to_writer_pretty(f, &outcome.summary)?;
    Ok(outcome)
}

/// A grid of methods and seeds over one base configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub base: RunConfig,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub alpha: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            base: RunConfig::default(),
            methods: vec![
                Method::Baseline(Baseline::Random),
                Method::Function(FunctionKind::Flqmi),
            ],
            seeds: vec![0, 1, 2],
            alpha: DEFAULT_ALPHA,
        }
    }
}

pub struct SweepOutcome {
    /// Indexed `[method][seed]`.
    pub summaries: Vec<Vec<RunSummary>>,
    pub records: Vec<Vec<Vec<RoundRecord>>>,
    pub penalty: PenaltyMatrix,
}

/// Runs every method for every seed concurrently and compares test
/// accuracy traces with the penalty matrix. With an output directory each
/// run is written as `<METHOD>_seed<s>` and the matrix as `penalty.csv`.
pub fn sweep(cfg: &SweepConfig, dir: Option<&Path>) -> Result<SweepOutcome> {
    if cfg.methods.is_empty() {
        return Err(Error::config("sweep needs at least one method"));
    }
    if cfg.seeds.len() < 2 {
        return Err(Error::config("sweep needs at least two seeds"));
    }
    let jobs: Vec<(usize, usize)> = (0..cfg.methods.len())
        .flat_map(|m| (0..cfg.seeds.len()).map(move |s| (m, s)))
        .collect();
    let outcomes: Vec<(Vec<RoundRecord>, RunSummary)> = jobs
        .par_iter()
        .map(|&(m, s)| {
            let run = RunConfig {
                method: cfg.methods[m],
                seed: cfg.seeds[s],
                ..cfg.base.clone()
            };
            let o = match dir {
                Some(d) => run_to_dir(&run, d, &format!("{}_seed{}", run.method, run.seed))?,
                None => run_al(&run)?,
            };
            Ok((o.records, o.summary))
        })
        .collect::<Result<_>>()?;
    let mut summaries = vec![Vec::new(); cfg.methods.len()];
    let mut records = vec![Vec::new(); cfg.methods.len()];
    for (&(m, _), (r, s)) in jobs.iter().zip(outcomes) {
        records[m].push(r);
        summaries[m].push(s);
    }
    let names: Vec<String> = cfg.methods.iter().map(|m| m.to_string()).collect();
    let traces: Vec<Vec<Vec<f64>>> = records
        .iter()
        .map(|runs| {
            runs.iter()
                .map(|rs| rs.iter().map(|r| r.test_accuracy).collect())
                .collect()
        })
        .collect();
    let penalty = penalty_matrix(&names, &traces, cfg.alpha)?;
    if let Some(d) = dir {
        penalty.write_csv(&d.join("penalty.csv"))?;
    }
    Ok(SweepOutcome {
        summaries,
        records,
        penalty,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{BlobConfig, OodConfig, RareConfig, RedundantConfig, StandardConfig};

    fn blobs() -> BlobConfig {
        BlobConfig {
            test_per_class: 50,
            ..Default::default()
        }
    }

    fn rare() -> ScenarioConfig {
        ScenarioConfig::Rare(RareConfig {
            blobs: blobs(),
            rho: 10.0,
            unlabeled_common: 200,
            ..Default::default()
        })
    }

    fn quick(scenario: ScenarioConfig, method: &str, budget: usize, rounds: usize) -> RunConfig {
        RunConfig {
            scenario,
            method: method.parse().unwrap(),
            rounds,
            budget,
            model: TrainConfig {
                epochs: 60,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    fn check_conservation(o: &RunOutcome, start_labeled: usize, budget: usize) {
        for (k, r) in o.records.iter().enumerate() {
            assert_eq!(r.labeled_size, start_labeled + (k + 1) * budget);
            assert_eq!(r.selected.len(), budget);
            assert!((0.0..=1.0).contains(&r.test_accuracy));
        }
        assert_eq!(o.summary.unlabeled_label_reads, 0);
        let l: std::collections::BTreeSet<_> = o.split.labeled().iter().collect();
        assert!(o.split.unlabeled().iter().all(|i| !l.contains(i)));
    }

    #[test]
    fn every_method_runs_on_the_rare_scenario() {
        for m in ["random", "entropy", "margin", "least_confidence", "FLQMI", "FLVMI", "GCMI", "DIV_GCMI", "LOGDETMI", "FL", "LOGDET", "FLCMI", "LOGDETCMI"] {
            let o = run_al(&quick(rare(), m, 20, 2)).unwrap();
            check_conservation(&o, 125, 20);
            assert!(o.records[0].rare_selected.unwrap() <= 20);
            assert!(o.records[0].rare_accuracy.is_some());
            assert_eq!(o.records[0].objective.is_some(), !m.chars().next().unwrap().is_lowercase());
        }
    }

    #[test]
    fn standard_fl_is_plain_selection() {
        let s = ScenarioConfig::Standard(StandardConfig {
            blobs: blobs(),
            unlabeled_per_class: 30,
            ..Default::default()
        });
        let o = run_al(&quick(s, "FL", 10, 2)).unwrap();
        check_conservation(&o, 200, 10);
        assert_eq!(o.records[0].rare_accuracy, None);
        assert_eq!(o.records[0].id_selected, None);
        assert_eq!(o.records[0].unique_selected, 10);
    }

    #[test]
    fn conditional_gains_on_redundant_data() {
        let s = ScenarioConfig::Redundant(RedundantConfig {
            blobs: blobs(),
            unique: 300,
            labeled_per_class: 5,
            ..Default::default()
        });
        for m in ["FLCG", "LOGDETCG", "GCCG"] {
            let o = run_al(&quick(s.clone(), m, 30, 2)).unwrap();
            check_conservation(&o, 50, 30);
            assert!(o.records[1].unique_selected <= 60);
        }
    }

    #[test]
    fn ood_with_empty_conditioning_at_first() {
        let s = ScenarioConfig::Ood(OodConfig {
            test_per_class: 20,
            labeled_per_id: 5,
            valid_per_id: 2,
            unlabeled_per_id: 30,
            unlabeled_per_ood: 100,
            ..Default::default()
        });
        for m in ["FLCMI", "LOGDETCMI", "FLQMI", "LOGDETMI", "random"] {
            let o = run_al(&quick(s.clone(), m, 15, 3)).unwrap();
            check_conservation(&o, 40, 15);
            for r in &o.records {
                assert!(r.id_selected.unwrap() <= 15);
            }
            let id: usize = o.records.iter().map(|r| r.id_selected.unwrap()).sum();
            assert_eq!(o.split.id_set().len(), 16 + id);
            assert_eq!(o.split.ood_set().len(), 45 - id);
        }
    }

    #[test]
    fn partitioned_runs_select_the_full_budget() {
        let mut cfg = quick(rare(), "LOGDETMI", 20, 1);
        cfg.optimizer.partitions = 4;
        let o = run_al(&cfg).unwrap();
        check_conservation(&o, 125, 20);
    }

    #[test]
    fn same_config_same_records() {
        let cfg = quick(rare(), "FLQMI", 15, 2);
        let a = run_al(&cfg).unwrap().records;
        let b = run_al(&cfg).unwrap().records;
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn config_errors() {
        let mut cfg = quick(rare(), "FLQMI", 1000, 3);
        assert!(matches!(run_al(&cfg), Err(Error::InvalidConfig(_))));
        cfg.budget = 10;
        cfg.rounds = 0;
        assert!(cfg.validate().is_err());
        cfg.rounds = 1;
        cfg.method = "FLCG".parse().unwrap();
        cfg.sources = Some(Sources {
            query: QuerySource::RareSet,
            conditioning: ConditioningSource::None,
        });
        assert!(cfg.validate().is_err());
        assert!("nonsense".parse::<Method>().is_err());
    }

    #[test]
    fn run_config_json_round_trip() {
        let cfg = quick(rare(), "LOGDETCMI", 5, 1);
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        assert!(text.contains("\"method\": \"LOGDETCMI\""));
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        let partial: RunConfig = serde_json::from_str(r#"{"method": "entropy", "budget": 7}"#).unwrap();
        assert_eq!(partial.budget, 7);
        assert_eq!(partial.rounds, 3);
    }

    #[test]
    fn files_are_streamed() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = quick(rare(), "random", 10, 2);
        run_to_dir(&cfg, dir.path(), "run").unwrap();
        let text = std::fs::read_to_string(dir.path().join("run.jsonl")).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(!text.contains("seconds"));
        assert!(dir.path().join("run.summary.json").exists());
    }

    #[test]
    fn duplicate_selection_counts_once() {
        let s = build_dup_split();
        let o = &s;
        let dup = (0..o.len()).find(|&i| o.duplication_map()[i] != i).unwrap();
        let orig = o.duplication_map()[dup];
        assert_eq!(o.unique_originals(&[dup, orig]), 1);
    }

    fn build_dup_split() -> ScenarioSplit {
        crate::scenarios::build_redundant_split(
            &RedundantConfig {
                blobs: blobs(),
                unique: 100,
                labeled_per_class: 2,
                ..Default::default()
            },
            0,
        )
        .unwrap()
    }

    #[test]
    fn small_sweep_produces_a_matrix() {
        let cfg = SweepConfig {
            base: quick(rare(), "random", 10, 2),
            methods: vec!["random".parse().unwrap(), "FLQMI".parse().unwrap()],
            seeds: vec![0, 1],
            alpha: DEFAULT_ALPHA,
        };
        let dir = tempfile::tempdir().unwrap();
        let out = sweep(&cfg, Some(dir.path())).unwrap();
        assert_eq!(out.penalty.methods(), &["RANDOM".to_string(), "FLQMI".to_string()]);
        assert!(dir.path().join("penalty.csv").exists());
        assert!(dir.path().join("FLQMI_seed1.jsonl").exists());
        let one = SweepConfig {
            seeds: vec![0],
            ..cfg
        };
        assert!(sweep(&one, None).is_err());
    }
}
