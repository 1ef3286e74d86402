//! End-to-end experiment driver: config in, result files out.

use crate::active::{
    monte_carlo, Episode, LearningCurve, MonteCarloResult, Problem, RunOutcome,
};
use crate::config::{DataSource, ExperimentConfig};
use crate::data::{generate_synthetic, load_dataset, write_dataset, Projection};
use crate::decision::{evpi, meu_observed, meu_unobserved, DecisionProcess};
use crate::error::Error;
use crate::export::{self, MapSummaries};
use crate::gmm::{ClassSummary, GmmPosterior, GmmPrior, LabeledSet};
use crate::grid::{evpi_grid, EvpiGrid, GridSpec};
use crate::prob::DiscreteDistribution;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use std::path::{Path, PathBuf};

pub const DEFAULT_GRID_RESOLUTION: [usize; 2] = [100, 100];
pub const DEFAULT_GRID_PADDING: f64 = 0.1;

pub fn load_config(path: &Path) -> Result<ExperimentConfig, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let cfg = ExperimentConfig::from_json(&text).map_err(|source| Error::ConfigParse {
        path: path.to_path_buf(),
        source,
    })?;
    cfg.validate().map_err(Error::Config)?;
    Ok(cfg)
}

/// Draws the configured synthetic dataset and writes it as CSV.
pub fn generate(cfg: &ExperimentConfig, out: &Path) -> Result<usize, Error> {
    let spec = match cfg.data_source().map_err(Error::Config)? {
        DataSource::Synthetic(s) => s,
        DataSource::File { .. } => {
            return Err(Error::Config("generate needs a data.synthetic section".into()))
        }
    };
    let data = generate_synthetic(spec)?;
    export::write_atomic(out, |w| write_dataset(&data, w)).map_err(|e| Error::io(out, e))?;
    Ok(data.len())
}

/// A validated config with its dataset and prior materialized.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub data: LabeledSet,
    pub prior: GmmPrior,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self, Error> {
        config.validate().map_err(Error::Config)?;
        let k = config.decision.states();
        let data = match config.data_source().map_err(Error::Config)? {
            DataSource::Synthetic(spec) => generate_synthetic(spec)?,
            DataSource::File { path, dim } => load_dataset(path, dim, k).map_err(|e| match e {
                crate::data::DataError::Io(source) => Error::io(path, source),
                e => e.into(),
            })?,
        };
        let prior = config.prior()?;
        Ok(Experiment {
            config,
            data,
            prior,
        })
    }

    pub fn problem(&self) -> Problem<'_> {
        Problem {
            data: &self.data,
            process: &self.config.decision,
            prior: &self.prior,
        }
    }

    pub fn output_dir(&self) -> &Path {
        &self.config.outputs.directory
    }

    pub fn monte_carlo(&self) -> Result<MonteCarloResult, Error> {
        Ok(monte_carlo(
            &self.problem(),
            &self.config.run_config(),
            self.config.run.repetitions,
            self.config.run.seed,
            self.config.baseline_budget(),
            self.config.parallelism(),
        )?)
    }

    /// Grid plane for one repetition: its training half, projected to two
    /// dimensions when the features have more.
    pub fn grid_frame(&self, episode: &Episode) -> Result<GridFrame, Error> {
        let train = episode.train_set();
        let projection = if train.dim() > 2 {
            Some(Projection::fit(train.points())?)
        } else {
            None
        };
        let spec = match self.config.run.grid {
            Some(g) => g,
            None => {
                let plane = projection.as_ref().map_or_else(|| train.clone(), |p| p.project_set(&train));
                GridSpec::covering(&plane, DEFAULT_GRID_PADDING, DEFAULT_GRID_RESOLUTION)
            }
        };
        Ok(GridFrame { spec, projection })
    }

    pub fn grid(&self, frame: &GridFrame, model: &GmmPosterior) -> Result<EvpiGrid, Error> {
        Ok(evpi_grid(
            model,
            &self.config.decision,
            &frame.spec,
            frame.projection.as_ref(),
        )?)
    }
}

#[derive(Debug, Clone)]
pub struct GridFrame {
    pub spec: GridSpec,
    pub projection: Option<Projection>,
}

fn project_summaries(p: &Projection, summaries: &[ClassSummary]) -> Vec<ClassSummary> {
    summaries
        .iter()
        .map(|s| ClassSummary {
            class: s.class,
            count: s.count,
            mean: p.project(&DVector::from_column_slice(&s.mean)).iter().copied().collect(),
            covariance: s.covariance.as_ref().map(|rows| {
                let d = rows.len();
                let c = DMatrix::from_fn(d, d, |i, j| rows[i][j]);
                let pc = &p.loadings * c * p.loadings.transpose();
                pc.row_iter().map(|r| r.iter().copied().collect()).collect()
            }),
        })
        .collect()
}

pub fn map_summaries(
    initial: &GmmPosterior,
    fin: Option<&GmmPosterior>,
    projection: Option<&Projection>,
) -> MapSummaries {
    let initial = initial.map_summaries();
    let fin = fin.map(GmmPosterior::map_summaries);
    MapSummaries {
        projected_initial: projection.map(|p| project_summaries(p, &initial)),
        projected_final: projection.zip(fin.as_ref()).map(|(p, f)| project_summaries(p, f)),
        initial,
        r#final: fin,
    }
}

#[derive(Debug, Clone, Serialize)]
struct QueryCounts {
    active: Vec<usize>,
    random: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    subcommand: &'a str,
    config: ExperimentConfig,
    base_seed: u64,
    seeds: Vec<u64>,
    queries: QueryCounts,
    files: Vec<&'static str>,
}

fn write_manifest(
    exp: &Experiment,
    dir: &Path,
    subcommand: &str,
    mc: Option<&MonteCarloResult>,
    files: Vec<&'static str>,
) -> Result<(), Error> {
    let mut config = exp.config.clone();
    // thread count never changes results, so it stays out of the manifest
    config.run.parallelism = None;
    let (seeds, queries) = match mc {
        Some(mc) => (
            mc.repetitions.iter().map(|r| r.seed).collect(),
            QueryCounts {
                active: mc.repetitions.iter().map(|r| r.active.queries()).collect(),
                random: mc.repetitions.iter().map(|r| r.random.queries()).collect(),
            },
        ),
        None => (
            vec![exp.config.run.seed],
            QueryCounts {
                active: vec![],
                random: vec![],
            },
        ),
    };
    let manifest = Manifest {
        tool: "rbal",
        version: env!("CARGO_PKG_VERSION"),
        subcommand,
        base_seed: exp.config.run.seed,
        config,
        seeds,
        queries,
        files,
    };
    let path = dir.join(export::MANIFEST_FILE);
    export::write_json(&path, &manifest).map_err(|e| Error::io(path, e))
}

fn io_at(dir: &Path, name: &str) -> impl FnOnce(std::io::Error) -> Error {
    let path = dir.join(name);
    move |e| Error::io(path, e)
}

/// What a `run` produced.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub directory: PathBuf,
    pub result: MonteCarloResult,
    pub initial_grid: EvpiGrid,
    pub final_grid: EvpiGrid,
}

/// Active learning and the random baseline over every repetition, with all
/// exports written to `dir`.
pub fn run(exp: &Experiment, dir: &Path) -> Result<RunReport, Error> {
    let mc = exp.monte_carlo()?;
    let first = &mc.repetitions[0];
    let frame = exp.grid_frame(&first.episode)?;
    let initial_grid = exp.grid(&frame, &first.active.initial_model)?;
    let final_grid = exp.grid(&frame, &first.active.final_model)?;
    let summaries = map_summaries(
        &first.active.initial_model,
        Some(&first.active.final_model),
        frame.projection.as_ref(),
    );

    use export::*;
    write_curves(&dir.join(CURVE_FILE), &mc.active, &mc.random).map_err(io_at(dir, CURVE_FILE))?;
    write_traces(&dir.join(TRACE_FILE), &mc).map_err(io_at(dir, TRACE_FILE))?;
    write_query_log(&dir.join(QUERY_LOG_FILE), &mc, &exp.data).map_err(io_at(dir, QUERY_LOG_FILE))?;
    write_grid(&dir.join(GRID_INITIAL_FILE), &initial_grid).map_err(io_at(dir, GRID_INITIAL_FILE))?;
    write_grid(&dir.join(GRID_FINAL_FILE), &final_grid).map_err(io_at(dir, GRID_FINAL_FILE))?;
    write_json(&dir.join(SUMMARY_FILE), &summaries).map_err(io_at(dir, SUMMARY_FILE))?;
    write_manifest(
        exp,
        dir,
        "run",
        Some(&mc),
        vec![
            CURVE_FILE,
            TRACE_FILE,
            QUERY_LOG_FILE,
            GRID_INITIAL_FILE,
            GRID_FINAL_FILE,
            SUMMARY_FILE,
        ],
    )?;
    Ok(RunReport {
        directory: dir.to_path_buf(),
        result: mc,
        initial_grid,
        final_grid,
    })
}

/// Random-baseline runs only. Under the `match-active` budget the active
/// runs are still executed to size each repetition's budget, but only the
/// baseline is exported.
pub fn baseline(exp: &Experiment, dir: &Path) -> Result<MonteCarloResult, Error> {
    let mut mc = exp.monte_carlo()?;
    let empty = LearningCurve::from_traces::<Vec<f64>>(&[]);
    use export::*;
    write_curves(&dir.join(CURVE_FILE), &empty, &mc.random).map_err(io_at(dir, CURVE_FILE))?;
    // the manifest still records each repetition's active query count (the budget)
    write_manifest(exp, dir, "baseline", Some(&mc), vec![CURVE_FILE, TRACE_FILE, QUERY_LOG_FILE])?;
    for rep in &mut mc.repetitions {
        strip(&mut rep.active);
    }
    write_traces(&dir.join(TRACE_FILE), &mc).map_err(io_at(dir, TRACE_FILE))?;
    write_query_log(&dir.join(QUERY_LOG_FILE), &mc, &exp.data).map_err(io_at(dir, QUERY_LOG_FILE))?;
    Ok(mc)
}

fn strip(outcome: &mut RunOutcome) {
    outcome.accuracy.clear();
    outcome.log.clear();
}

/// Rebuilds `learning_curve.csv` in `dir` from the `traces.csv` next to it.
pub fn curves(dir: &Path) -> Result<(LearningCurve, LearningCurve), Error> {
    use export::*;
    let traces = read_traces(&dir.join(TRACE_FILE)).map_err(io_at(dir, TRACE_FILE))?;
    let keep = |t: &[Vec<f64>]| t.iter().filter(|v| !v.is_empty()).cloned().collect::<Vec<_>>();
    let active = LearningCurve::from_traces(&keep(&traces.active));
    let random = LearningCurve::from_traces(&keep(&traces.random));
    write_curves(&dir.join(CURVE_FILE), &active, &random).map_err(io_at(dir, CURVE_FILE))?;
    Ok((active, random))
}

/// EVPI over the feature plane for the first repetition's initial model.
pub fn evpi_map(exp: &Experiment, dir: &Path) -> Result<EvpiGrid, Error> {
    let episode = Episode::new(&exp.problem(), &exp.config.run_config(), exp.config.run.seed)?;
    let model = exp.prior.fit(&episode.initial_set())?;
    let frame = exp.grid_frame(&episode)?;
    let grid = exp.grid(&frame, &model)?;
    let summaries = map_summaries(&model, None, frame.projection.as_ref());
    use export::*;
    write_grid(&dir.join(GRID_INITIAL_FILE), &grid).map_err(io_at(dir, GRID_INITIAL_FILE))?;
    write_json(&dir.join(SUMMARY_FILE), &summaries).map_err(io_at(dir, SUMMARY_FILE))?;
    write_manifest(exp, dir, "evpi-map", None, vec![GRID_INITIAL_FILE, SUMMARY_FILE])?;
    Ok(grid)
}

pub const EXAMPLE_POSTERIOR: [f64; 4] = [0.4, 0.3, 0.2, 0.1];
pub const EXAMPLE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ExampleCheck {
    pub name: &'static str,
    pub expected: f64,
    pub actual: f64,
}

impl ExampleCheck {
    pub fn delta(&self) -> f64 {
        self.actual - self.expected
    }

    pub fn passed(&self) -> bool {
        self.delta().abs() <= EXAMPLE_TOLERANCE
    }
}

/// The hand-computed four-state example, evaluated on `dp`.
pub fn verify_example(dp: &DecisionProcess) -> Result<Vec<ExampleCheck>, Error> {
    let p = DiscreteDistribution::new(EXAMPLE_POSTERIOR.to_vec())?;
    Ok(vec![
        ExampleCheck {
            name: "MEU(I)",
            expected: -4.4,
            actual: meu_unobserved(dp, &p)?.expected_utility,
        },
        ExampleCheck {
            name: "MEU(I_H->d)",
            expected: 1.015,
            actual: meu_observed(dp, &p)?,
        },
        ExampleCheck {
            name: "EVPI",
            expected: 5.415,
            actual: evpi(dp, &p)?,
        },
    ])
}
