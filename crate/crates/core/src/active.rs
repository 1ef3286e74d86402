//! Risk-based active learning.
//!
//! Unlabeled observations are presented one at a time. For each, the current
//! classifier's posterior over health states feeds the decision engine; when
//! the EVPI of the current state exceeds the inspection cost the label is
//! requested from the oracle, appended to the labeled set, and the classifier
//! is refit from the fixed prior. Decision accuracy on a held-out test set is
//! recorded after every refit. A random-sampling baseline reveals labels in
//! random order for comparison at equal query counts.

use crate::data::{DataError, Standardizer};
use crate::decision::{evpi, meu_unobserved, DecisionError, DecisionProcess};
use crate::gmm::{FeatureVector, GmmError, GmmPosterior, GmmPrior, LabeledSet};
use crate::prob::{Action, ClassLabel, DiscreteDistribution};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

/// Redraw limit for the class-coverage rule on the initial labeled set.
const MAX_COVERAGE_DRAWS: usize = 100_000;

// Independent seed streams within one repetition.
const STREAM_SPLIT: u64 = 1;
const STREAM_INITIAL: u64 = 2;
const STREAM_ORDER: u64 = 3;
const STREAM_BASELINE: u64 = 4;

#[derive(Debug, Error)]
pub enum ActiveError {
    #[error("cannot seed class {class}: no training observation carries that label")]
    InsufficientInitialLabels { class: usize },
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("observation {0} is not in the unlabeled pool")]
    UnknownObservation(usize),
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Gmm(#[from] GmmError),
    #[error(transparent)]
    Decision(#[from] DecisionError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("failed to start worker pool: {0}")]
    ThreadPool(String),
}

/// Anything that maps a feature vector to a distribution over health states.
pub trait Classifier {
    fn predict(&self, x: &FeatureVector) -> Result<DiscreteDistribution, ActiveError>;
}

impl Classifier for GmmPosterior {
    fn predict(&self, x: &FeatureVector) -> Result<DiscreteDistribution, ActiveError> {
        Ok(GmmPosterior::predict(self, x)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresentationOrder {
    RandomShuffle,
    Sequential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub order: PresentationOrder,
    pub seed: u64,
    pub initial_fraction: f64,
    /// Redraw the initial labeled subset until every class is present.
    #[serde(default = "default_true")]
    pub coverage_enforcement: bool,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    /// Standardize features with statistics of the training half.
    #[serde(default)]
    pub standardize: bool,
}

fn default_true() -> bool {
    true
}

fn default_test_fraction() -> f64 {
    0.5
}

impl RunConfig {
    pub fn new(order: PresentationOrder, seed: u64, initial_fraction: f64) -> Self {
        RunConfig {
            order,
            seed,
            initial_fraction,
            coverage_enforcement: true,
            test_fraction: 0.5,
            standardize: false,
        }
    }

    pub fn validate(&self) -> Result<(), ActiveError> {
        if !(self.initial_fraction > 0.0 && self.initial_fraction < 1.0) {
            return Err(ActiveError::InvalidConfig(format!(
                "initial_fraction must lie in (0, 1), got {}",
                self.initial_fraction
            )));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(ActiveError::InvalidConfig(format!(
                "test_fraction must lie in (0, 1), got {}",
                self.test_fraction
            )));
        }
        Ok(())
    }
}

/// Everything a repetition needs besides its seed.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub data: &'a LabeledSet,
    pub process: &'a DecisionProcess,
    pub prior: &'a GmmPrior,
}

impl Problem<'_> {
    fn k(&self) -> usize {
        self.prior.k()
    }
}

/// Ground-truth labels of the unlabeled pool, revealed one query at a time.
#[derive(Debug, Clone)]
pub struct LabelOracle {
    labels: HashMap<usize, ClassLabel>,
}

impl LabelOracle {
    pub fn new(data: &LabeledSet, pool: &[usize]) -> Self {
        LabelOracle {
            labels: pool.iter().map(|&i| (i, data.label(i))).collect(),
        }
    }

    pub fn query(&self, index: usize) -> Result<ClassLabel, ActiveError> {
        self.labels
            .get(&index)
            .copied()
            .ok_or(ActiveError::UnknownObservation(index))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// One presentation of an unlabeled observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub step: usize,
    /// Row of the observation in the full dataset.
    pub observation: usize,
    /// EVPI under the model current at this step.
    pub evpi: f64,
    pub queried: bool,
}

pub type QueryLog = Vec<QueryRecord>;

/// Train/test split, initial labels and presentation order for one repetition.
#[derive(Debug, Clone)]
pub struct Episode {
    pub seed: u64,
    /// Dataset with features mapped through `standardizer` if one was fitted.
    pub features: LabeledSet,
    pub standardizer: Option<Standardizer>,
    pub test: Vec<usize>,
    pub initial: Vec<usize>,
    /// Unlabeled pool in presentation order.
    pub pool: Vec<usize>,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl Episode {
    pub fn new(problem: &Problem<'_>, cfg: &RunConfig, seed: u64) -> Result<Self, ActiveError> {
        cfg.validate()?;
        let data = problem.data;
        let n = data.len();
        let k = problem.k();
        let n_test = (n as f64 * cfg.test_fraction).floor() as usize;
        if n_test == 0 {
            return Err(ActiveError::EmptyTestSet);
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng_for(seed, STREAM_SPLIT));
        let mut test = order[..n_test].to_vec();
        let mut train = order[n_test..].to_vec();
        test.sort_unstable();
        if train.is_empty() {
            return Err(ActiveError::InvalidConfig("training half is empty".into()));
        }

        let mut n_initial = ((train.len() as f64) * cfg.initial_fraction).round() as usize;
        if cfg.coverage_enforcement {
            n_initial = n_initial.max(k);
            let present = data.subset(&train).class_counts(k);
            if let Some(c) = present.iter().position(|&n| n == 0) {
                return Err(ActiveError::InsufficientInitialLabels { class: c + 1 });
            }
        }
        let n_initial = n_initial.clamp(1, train.len());

        // partial shuffle until the head covers every class
        let mut rng = rng_for(seed, STREAM_INITIAL);
        let mut draws = 0;
        loop {
            train.partial_shuffle(&mut rng, n_initial);
            draws += 1;
            if !cfg.coverage_enforcement {
                break;
            }
            let mut seen = vec![false; k];
            for &i in &train[..n_initial] {
                seen[data.label(i).index()] = true;
            }
            if seen.iter().all(|&s| s) {
                break;
            }
            if draws >= MAX_COVERAGE_DRAWS {
                let class = seen.iter().position(|s| !s).unwrap() + 1;
                return Err(ActiveError::InsufficientInitialLabels { class });
            }
        }
        let initial = train[..n_initial].to_vec();
        let mut pool = train[n_initial..].to_vec();
        match cfg.order {
            PresentationOrder::Sequential => pool.sort_unstable(),
            PresentationOrder::RandomShuffle => pool.shuffle(&mut rng_for(seed, STREAM_ORDER)),
        }

        let (features, standardizer) = if cfg.standardize {
            let train_points: Vec<FeatureVector> = initial
                .iter()
                .chain(&pool)
                .map(|&i| data.point(i).clone())
                .collect();
            let st = Standardizer::fit(&train_points)?;
            (data.map_points(|x| st.apply(x)), Some(st))
        } else {
            (data.clone(), None)
        };

        Ok(Episode {
            seed,
            features,
            standardizer,
            test,
            initial,
            pool,
        })
    }

    pub fn oracle(&self) -> LabelOracle {
        LabelOracle::new(&self.features, &self.pool)
    }

    pub fn initial_set(&self) -> LabeledSet {
        self.features.subset(&self.initial)
    }

    pub fn test_set(&self) -> LabeledSet {
        self.features.subset(&self.test)
    }

    pub fn train_set(&self) -> LabeledSet {
        let idx: Vec<usize> = self.initial.iter().chain(&self.pool).copied().collect();
        self.features.subset(&idx)
    }
}

/// Fraction of test points where the classifier-driven action matches the
/// action of an agent that knows the true state.
pub fn decision_accuracy<C: Classifier + ?Sized>(
    classifier: &C,
    dp: &DecisionProcess,
    test: &LabeledSet,
) -> Result<f64, ActiveError> {
    let evaluator = AccuracyEvaluator::new(dp, test)?;
    evaluator.evaluate(classifier)
}

/// Test set with the perfect-information actions computed once.
struct AccuracyEvaluator<'a> {
    dp: &'a DecisionProcess,
    test: &'a LabeledSet,
    perfect: Vec<Action>,
}

impl<'a> AccuracyEvaluator<'a> {
    fn new(dp: &'a DecisionProcess, test: &'a LabeledSet) -> Result<Self, ActiveError> {
        if test.is_empty() {
            return Err(ActiveError::EmptyTestSet);
        }
        let k = dp.states();
        let perfect = test
            .labels()
            .iter()
            .map(|l| {
                if l.get() > k {
                    return Err(ActiveError::Gmm(GmmError::LabelOutOfRange { label: l.get(), k }));
                }
                let point = DiscreteDistribution::point_mass(k, l.index());
                Ok(meu_unobserved(dp, &point)?.action)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(AccuracyEvaluator { dp, test, perfect })
    }

    fn evaluate<C: Classifier + ?Sized>(&self, classifier: &C) -> Result<f64, ActiveError> {
        let mut correct = 0usize;
        for (x, &want) in self.test.points().iter().zip(&self.perfect) {
            let posterior = classifier.predict(x)?;
            if meu_unobserved(self.dp, &posterior)?.action == want {
                correct += 1;
            }
        }
        Ok(correct as f64 / self.test.len() as f64)
    }
}

/// Result of one pass of the querying loop.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub initial_model: GmmPosterior,
    pub final_model: GmmPosterior,
    pub log: QueryLog,
    /// Decision accuracy after `q` queries, for `q = 0..=queries`.
    pub accuracy: Vec<f64>,
    /// Labeled-set rows in the order they were added.
    pub labeled: Vec<usize>,
}

impl RunOutcome {
    pub fn queries(&self) -> usize {
        self.accuracy.len().saturating_sub(1)
    }
}

struct Learner<'a> {
    problem: &'a Problem<'a>,
    episode: &'a Episode,
    oracle: LabelOracle,
    labeled_set: LabeledSet,
    labeled: Vec<usize>,
    model: GmmPosterior,
    evaluator: AccuracyEvaluator<'a>,
    accuracy: Vec<f64>,
}

impl<'a> Learner<'a> {
    fn new(problem: &'a Problem<'a>, episode: &'a Episode, test: &'a LabeledSet) -> Result<Self, ActiveError> {
        let labeled_set = episode.initial_set();
        let model = problem.prior.fit(&labeled_set)?;
        let evaluator = AccuracyEvaluator::new(problem.process, test)?;
        let accuracy = vec![evaluator.evaluate(&model)?];
        Ok(Learner {
            problem,
            episode,
            oracle: episode.oracle(),
            labeled_set,
            labeled: episode.initial.clone(),
            model,
            evaluator,
            accuracy,
        })
    }

    fn current_evpi(&self, observation: usize) -> Result<f64, ActiveError> {
        let posterior = self.model.predict(self.episode.features.point(observation))?;
        Ok(evpi(self.problem.process, &posterior)?)
    }

    fn inspect(&mut self, observation: usize) -> Result<(), ActiveError> {
        let label = self.oracle.query(observation)?;
        self.labeled_set
            .push(self.episode.features.point(observation).clone(), label)?;
        self.labeled.push(observation);
        self.model = self.problem.prior.fit(&self.labeled_set)?;
        self.accuracy.push(self.evaluator.evaluate(&self.model)?);
        Ok(())
    }

    fn finish(self, initial_model: GmmPosterior, log: QueryLog) -> RunOutcome {
        RunOutcome {
            initial_model,
            final_model: self.model,
            log,
            accuracy: self.accuracy,
            labeled: self.labeled,
        }
    }
}

/// EVPI-driven querying over the episode's pool.
pub fn run_active(problem: &Problem<'_>, episode: &Episode) -> Result<RunOutcome, ActiveError> {
    let test = episode.test_set();
    let mut learner = Learner::new(problem, episode, &test)?;
    let initial_model = learner.model.clone();
    let c_ins = problem.process.inspection_cost();
    let mut log = Vec::with_capacity(episode.pool.len());
    for (step, &observation) in episode.pool.iter().enumerate() {
        let value = learner.current_evpi(observation)?;
        let queried = value > c_ins;
        log.push(QueryRecord {
            step,
            observation,
            evpi: value,
            queried,
        });
        if queried {
            learner.inspect(observation)?;
        }
    }
    Ok(learner.finish(initial_model, log))
}

/// Reveals `budget` labels drawn uniformly without replacement from the pool.
pub fn run_random_baseline(
    problem: &Problem<'_>,
    episode: &Episode,
    budget: usize,
) -> Result<RunOutcome, ActiveError> {
    let test = episode.test_set();
    let mut learner = Learner::new(problem, episode, &test)?;
    let initial_model = learner.model.clone();
    let mut order = episode.pool.clone();
    order.shuffle(&mut rng_for(episode.seed, STREAM_BASELINE));
    let budget = budget.min(order.len());
    let mut log = Vec::with_capacity(budget);
    for (step, &observation) in order[..budget].iter().enumerate() {
        let value = learner.current_evpi(observation)?;
        log.push(QueryRecord {
            step,
            observation,
            evpi: value,
            queried: true,
        });
        learner.inspect(observation)?;
    }
    Ok(learner.finish(initial_model, log))
}

/// Mean and spread of decision accuracy at one query count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub q: usize,
    pub mean: f64,
    pub sd: f64,
    /// Repetitions that reached `q` queries.
    pub n: usize,
}

/// Decision accuracy against number of queries, aggregated over repetitions.
///
/// Runs that stop early contribute only up to their own final query count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub repetitions: usize,
    pub points: Vec<CurvePoint>,
}

impl LearningCurve {
    pub fn from_traces<T: AsRef<[f64]>>(traces: &[T]) -> Self {
        let max_len = traces.iter().map(|t| t.as_ref().len()).max().unwrap_or(0);
        let points = (0..max_len)
            .map(|q| {
                let vals: Vec<f64> = traces
                    .iter()
                    .filter_map(|t| t.as_ref().get(q).copied())
                    .collect();
                let n = vals.len();
                let mean = vals.iter().sum::<f64>() / n as f64;
                let sd = if n > 1 {
                    (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
                } else {
                    0.0
                };
                CurvePoint { q, mean, sd, n }
            })
            .collect();
        LearningCurve {
            repetitions: traces.len(),
            points,
        }
    }

    pub fn at(&self, q: usize) -> Option<&CurvePoint> {
        self.points.get(q)
    }
}

/// Paired active and random runs from one seed.
#[derive(Debug, Clone)]
pub struct Repetition {
    pub seed: u64,
    pub episode: Episode,
    pub active: RunOutcome,
    pub random: RunOutcome,
}

#[derive(Debug, Clone)]
pub struct MonteCarloResult {
    pub repetitions: Vec<Repetition>,
    pub active: LearningCurve,
    pub random: LearningCurve,
}

/// How many labels the random baseline may reveal in a repetition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineBudget {
    /// As many as the active run queried with the same seed.
    MatchActive,
    Fixed(usize),
}

/// Independent repetitions with seeds `base_seed + r`, run on `parallelism`
/// worker threads. Results do not depend on the thread count.
pub fn monte_carlo(
    problem: &Problem<'_>,
    cfg: &RunConfig,
    repetitions: usize,
    base_seed: u64,
    budget: BaselineBudget,
    parallelism: usize,
) -> Result<MonteCarloResult, ActiveError> {
    if repetitions == 0 {
        return Err(ActiveError::InvalidConfig("repetitions must be at least 1".into()));
    }
    let one = |r: usize| -> Result<Repetition, ActiveError> {
        let seed = base_seed.wrapping_add(r as u64);
        let episode = Episode::new(problem, cfg, seed)?;
        let active = run_active(problem, &episode)?;
        let budget = match budget {
            BaselineBudget::MatchActive => active.queries(),
            BaselineBudget::Fixed(b) => b,
        };
        let random = run_random_baseline(problem, &episode, budget)?;
        Ok(Repetition {
            seed,
            episode,
            active,
            random,
        })
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| ActiveError::ThreadPool(e.to_string()))?;
    let reps = pool.install(|| {
        (0..repetitions)
            .into_par_iter()
            .map(one)
            .collect::<Result<Vec<_>, _>>()
    })?;
    let active = LearningCurve::from_traces(&reps.iter().map(|r| &r.active.accuracy[..]).collect::<Vec<_>>());
    let random = LearningCurve::from_traces(&reps.iter().map(|r| &r.random.accuracy[..]).collect::<Vec<_>>());
    Ok(MonteCarloResult {
        repetitions: reps,
        active,
        random,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, ClassSpec, SyntheticSpec};
    use crate::prob::UtilityTable;

    fn small_spec(seed: u64) -> SyntheticSpec {
        let mut spec = SyntheticSpec::four_class_default();
        spec.seed = seed;
        for c in &mut spec.classes {
            c.count /= 5;
        }
        spec
    }

    struct Fixture {
        data: LabeledSet,
        dp: DecisionProcess,
        prior: GmmPrior,
    }

    impl Fixture {
        fn new(spec: &SyntheticSpec, dp: DecisionProcess) -> Self {
            Fixture {
                data: generate_synthetic(spec).unwrap(),
                dp,
                prior: GmmPrior::unit(spec.dim(), 4),
            }
        }

        fn problem(&self) -> Problem<'_> {
            Problem {
                data: &self.data,
                process: &self.dp,
                prior: &self.prior,
            }
        }
    }

    fn cfg(seed: u64) -> RunConfig {
        RunConfig::new(PresentationOrder::RandomShuffle, seed, 0.015)
    }

    /// Reports the true label as a point mass.
    struct Truth(HashMap<Vec<u64>, usize>);

    impl Truth {
        fn new(set: &LabeledSet) -> Self {
            Truth(
                set.iter()
                    .map(|(x, l)| (x.iter().map(|v| v.to_bits()).collect(), l.index()))
                    .collect(),
            )
        }
    }

    impl Classifier for Truth {
        fn predict(&self, x: &FeatureVector) -> Result<DiscreteDistribution, ActiveError> {
            let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
            Ok(DiscreteDistribution::point_mass(4, self.0[&key]))
        }
    }

    struct Fixed(DiscreteDistribution);

    impl Classifier for Fixed {
        fn predict(&self, _: &FeatureVector) -> Result<DiscreteDistribution, ActiveError> {
            Ok(self.0.clone())
        }
    }

    #[test]
    fn episode_split_sizes_and_coverage() {
        let fx = Fixture::new(&small_spec(1), DecisionProcess::synthetic_example());
        let ep = Episode::new(&fx.problem(), &cfg(7), 7).unwrap();
        let n = fx.data.len();
        assert_eq!(ep.test.len(), n / 2);
        assert_eq!(ep.test.len() + ep.initial.len() + ep.pool.len(), n);
        assert!(ep.initial.len() >= 4);
        assert!(fx.data.subset(&ep.initial).class_counts(4).iter().all(|&c| c > 0));
        let mut all: Vec<usize> = ep.test.iter().chain(&ep.initial).chain(&ep.pool).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn sequential_order_follows_rows() {
        let fx = Fixture::new(&small_spec(1), DecisionProcess::synthetic_example());
        let mut c = cfg(3);
        c.order = PresentationOrder::Sequential;
        let ep = Episode::new(&fx.problem(), &c, 3).unwrap();
        assert!(ep.pool.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn coverage_fails_when_class_absent() {
        let spec = SyntheticSpec {
            seed: 1,
            classes: vec![
                ClassSpec { mean: vec![0.0, 0.0], covariance: vec![vec![1.0, 0.0], vec![0.0, 1.0]], count: 50 },
                ClassSpec { mean: vec![3.0, 0.0], covariance: vec![vec![1.0, 0.0], vec![0.0, 1.0]], count: 50 },
            ],
            schedule: None,
        };
        let fx = Fixture::new(&spec, DecisionProcess::synthetic_example());
        // prior over four classes, data only has two
        assert!(matches!(
            Episode::new(&fx.problem(), &cfg(1), 1),
            Err(ActiveError::InsufficientInitialLabels { class: 3 })
        ));
        let mut c = cfg(1);
        c.coverage_enforcement = false;
        assert!(Episode::new(&fx.problem(), &c, 1).is_ok());
    }

    #[test]
    fn infinite_cost_never_queries() {
        let dp = DecisionProcess::synthetic_example().with_inspection_cost(f64::INFINITY).unwrap();
        let fx = Fixture::new(&small_spec(2), dp);
        let ep = Episode::new(&fx.problem(), &cfg(4), 4).unwrap();
        let out = run_active(&fx.problem(), &ep).unwrap();
        assert_eq!(out.queries(), 0);
        assert_eq!(out.log.len(), ep.pool.len());
        assert!(out.log.iter().all(|r| !r.queried));
        assert_eq!(out.labeled, ep.initial);
        let test = ep.test_set();
        assert_eq!(
            decision_accuracy(&out.final_model, &fx.dp, &test).unwrap(),
            decision_accuracy(&out.initial_model, &fx.dp, &test).unwrap()
        );
    }

    #[test]
    fn zero_cost_queries_every_positive_evpi() {
        let dp = DecisionProcess::synthetic_example().with_inspection_cost(0.0).unwrap();
        let fx = Fixture::new(&small_spec(3), dp);
        let ep = Episode::new(&fx.problem(), &cfg(5), 5).unwrap();
        let out = run_active(&fx.problem(), &ep).unwrap();
        assert!(out.log.iter().all(|r| r.queried == (r.evpi > 0.0)));
        assert!(out.queries() > 0);
    }

    #[test]
    fn loop_bookkeeping_invariants() {
        let fx = Fixture::new(&small_spec(4), DecisionProcess::synthetic_example().with_inspection_cost(2.0).unwrap());
        let ep = Episode::new(&fx.problem(), &cfg(6), 6).unwrap();
        let out = run_active(&fx.problem(), &ep).unwrap();
        let c_ins = fx.dp.inspection_cost();
        let queried: Vec<_> = out.log.iter().filter(|r| r.queried).collect();
        assert_eq!(queried.len(), out.labeled.len() - ep.initial.len());
        assert_eq!(out.accuracy.len(), queried.len() + 1);
        for r in &out.log {
            assert!(r.evpi >= 0.0);
            assert_eq!(r.queried, r.evpi > c_ins);
        }
        for (r, &row) in queried.iter().zip(&out.labeled[ep.initial.len()..]) {
            assert_eq!(r.observation, row);
        }
        assert!(out.accuracy.iter().all(|a| (0.0..=1.0).contains(a)));
        assert_eq!(out.final_model.counts().iter().sum::<usize>(), out.labeled.len());
    }

    #[test]
    fn queried_labels_match_ground_truth() {
        let fx = Fixture::new(&small_spec(5), DecisionProcess::synthetic_example().with_inspection_cost(1.0).unwrap());
        let ep = Episode::new(&fx.problem(), &cfg(8), 8).unwrap();
        let oracle = ep.oracle();
        for &i in &ep.pool {
            assert_eq!(oracle.query(i).unwrap(), fx.data.label(i));
        }
        assert!(matches!(oracle.query(ep.test[0]), Err(ActiveError::UnknownObservation(_))));
        let out = run_active(&fx.problem(), &ep).unwrap();
        let refit = fx.prior.fit(&fx.data.subset(&out.labeled)).unwrap();
        assert_eq!(refit.counts(), out.final_model.counts());
    }

    #[test]
    fn baseline_budget_extremes() {
        let fx = Fixture::new(&small_spec(6), DecisionProcess::synthetic_example());
        let ep = Episode::new(&fx.problem(), &cfg(9), 9).unwrap();
        let none = run_random_baseline(&fx.problem(), &ep, 0).unwrap();
        assert_eq!(none.queries(), 0);
        assert_eq!(none.final_model.counts(), none.initial_model.counts());

        let all = run_random_baseline(&fx.problem(), &ep, ep.pool.len()).unwrap();
        let full = fx.prior.fit(&ep.train_set()).unwrap();
        assert_eq!(all.final_model.counts(), full.counts());
        let x = fx.data.point(ep.test[0]);
        let (a, b) = (all.final_model.predict(x).unwrap(), full.predict(x).unwrap());
        for (p, q) in a.probs().iter().zip(b.probs()) {
            assert!((p - q).abs() < 1e-9);
        }
    }

    #[test]
    fn runs_are_deterministic_per_seed() {
        let fx = Fixture::new(&small_spec(7), DecisionProcess::synthetic_example().with_inspection_cost(3.0).unwrap());
        let run = || {
            let ep = Episode::new(&fx.problem(), &cfg(10), 10).unwrap();
            (
                run_active(&fx.problem(), &ep).unwrap(),
                run_random_baseline(&fx.problem(), &ep, 12).unwrap(),
            )
        };
        let (a1, r1) = run();
        let (a2, r2) = run();
        assert_eq!(a1.log, a2.log);
        assert_eq!(a1.accuracy, a2.accuracy);
        assert_eq!(r1.log, r2.log);
        assert_eq!(r1.accuracy, r2.accuracy);
    }

    #[test]
    fn accuracy_with_perfect_classifier_is_one() {
        let fx = Fixture::new(&small_spec(8), DecisionProcess::synthetic_example());
        let truth = Truth::new(&fx.data);
        assert_eq!(decision_accuracy(&truth, &fx.dp, &fx.data).unwrap(), 1.0);
    }

    #[test]
    fn accuracy_with_flat_state_utilities_is_one() {
        let base = DecisionProcess::synthetic_example();
        let dp = DecisionProcess::new(
            base.transitions().to_vec(),
            base.u_action().clone(),
            UtilityTable::new(vec![3.0; 4]).unwrap(),
            7.0,
        )
        .unwrap();
        let fx = Fixture::new(&small_spec(9), dp);
        let model = fx.prior.fit(&fx.data.subset(&[0, 1, 2])).unwrap();
        assert_eq!(decision_accuracy(&model, &fx.dp, &fx.data).unwrap(), 1.0);
        let skewed = Fixed(DiscreteDistribution::point_mass(4, 3));
        assert_eq!(decision_accuracy(&skewed, &fx.dp, &fx.data).unwrap(), 1.0);
    }

    #[test]
    fn confident_healthy_prediction_on_failed_point_is_wrong() {
        let dp = DecisionProcess::synthetic_example();
        let test = LabeledSet::from_parts(
            2,
            vec![FeatureVector::zeros(2)],
            vec![ClassLabel::new(4, 4).unwrap()],
        )
        .unwrap();
        let model = Fixed(DiscreteDistribution::new(vec![0.9, 0.1, 0.0, 0.0]).unwrap());
        assert_eq!(decision_accuracy(&model, &dp, &test).unwrap(), 0.0);
        assert!(matches!(
            decision_accuracy(&model, &dp, &LabeledSet::new(2)),
            Err(ActiveError::EmptyTestSet)
        ));
    }

    #[test]
    fn maintenance_dominant_process_has_perfect_accuracy() {
        // free maintenance and catastrophic failure: maintain is optimal everywhere
        let base = DecisionProcess::synthetic_example();
        let dp = DecisionProcess::new(
            base.transitions().to_vec(),
            UtilityTable::new(vec![0.0, 0.0]).unwrap(),
            UtilityTable::new(vec![10.0, 10.0, 5.0, -1e6]).unwrap(),
            7.0,
        )
        .unwrap();
        let fx = Fixture::new(&small_spec(10), dp);
        for seed in 0..5 {
            let model = fx.prior.fit(&fx.data.subset(&[seed, seed + 50])).unwrap();
            assert_eq!(decision_accuracy(&model, &fx.dp, &fx.data).unwrap(), 1.0);
        }
    }

    #[test]
    fn curve_aggregation_is_ragged() {
        let curve = LearningCurve::from_traces(&[vec![0.5, 0.6, 0.7], vec![0.7, 0.8]]);
        assert_eq!(curve.repetitions, 2);
        assert_eq!(curve.points.len(), 3);
        assert_eq!(curve.points[0].n, 2);
        assert!((curve.points[0].mean - 0.6).abs() < 1e-15);
        assert!((curve.points[0].sd - 0.02f64.sqrt()).abs() < 1e-12);
        assert_eq!(curve.points[2], CurvePoint { q: 2, mean: 0.7, sd: 0.0, n: 1 });
    }

    #[test]
    fn single_repetition_has_zero_spread() {
        let fx = Fixture::new(&small_spec(11), DecisionProcess::synthetic_example());
        let mc = monte_carlo(&fx.problem(), &cfg(0), 1, 42, BaselineBudget::MatchActive, 1).unwrap();
        assert!(mc.active.points.iter().all(|p| p.sd == 0.0 && p.n == 1));
        assert_eq!(mc.repetitions[0].seed, 42);
    }

    #[test]
    fn monte_carlo_prefix_and_parallel_stability() {
        let fx = Fixture::new(&small_spec(12), DecisionProcess::synthetic_example());
        let a = monte_carlo(&fx.problem(), &cfg(0), 3, 100, BaselineBudget::MatchActive, 1).unwrap();
        let b = monte_carlo(&fx.problem(), &cfg(0), 6, 100, BaselineBudget::MatchActive, 4).unwrap();
        for (x, y) in a.repetitions.iter().zip(&b.repetitions) {
            assert_eq!(x.seed, y.seed);
            assert_eq!(x.active.log, y.active.log);
            assert_eq!(x.active.accuracy, y.active.accuracy);
            assert_eq!(x.random.accuracy, y.random.accuracy);
        }
        let c = monte_carlo(&fx.problem(), &cfg(0), 6, 100, BaselineBudget::MatchActive, 1).unwrap();
        assert_eq!(b.active, c.active);
        assert_eq!(b.random, c.random);
        for r in &b.repetitions {
            assert_eq!(r.random.queries(), r.active.queries());
        }
    }

    #[test]
    fn standardized_episode_uses_training_statistics() {
        let fx = Fixture::new(&small_spec(13), DecisionProcess::synthetic_example());
        let mut c = cfg(2);
        c.standardize = true;
        let ep = Episode::new(&fx.problem(), &c, 2).unwrap();
        let train = ep.train_set();
        let n = train.len() as f64;
        for j in 0..2 {
            let m: f64 = train.points().iter().map(|x| x[j]).sum::<f64>() / n;
            assert!(m.abs() < 1e-9);
        }
    }
}
