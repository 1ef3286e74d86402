//! EVPI evaluated over a regular 2-D grid of feature space.

use crate::data::Projection;
use crate::decision::{evpi, DecisionError, DecisionProcess};
use crate::gmm::{GmmError, GmmPosterior, LabeledSet};
use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("invalid grid: {0}")]
    InvalidSpec(String),
    #[error("model is {0}-dimensional; a projection is required to map it onto a plane")]
    ProjectionRequired(usize),
    #[error("projection is {projection}-dimensional but the model is {model}-dimensional")]
    ProjectionMismatch { projection: usize, model: usize },
    #[error(transparent)]
    Gmm(#[from] GmmError),
    #[error(transparent)]
    Decision(#[from] DecisionError),
}

/// Axis ranges and resolution; values are taken at cell centers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub resolution: [usize; 2],
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), GridError> {
        let finite = self.x.iter().chain(&self.y).all(|v| v.is_finite());
        if !finite || self.x[0] >= self.x[1] || self.y[0] >= self.y[1] {
            return Err(GridError::InvalidSpec(format!(
                "axis ranges must be finite and increasing, got x={:?} y={:?}",
                self.x, self.y
            )));
        }
        if self.resolution.contains(&0) {
            return Err(GridError::InvalidSpec("resolution must be positive".into()));
        }
        Ok(())
    }

    /// Bounding box of 2-D points padded by `pad` of its extent on each side.
    pub fn covering(points: &LabeledSet, pad: f64, resolution: [usize; 2]) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in points.points() {
            for a in 0..2 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let widen = |a: usize| {
            let span = (hi[a] - lo[a]).max(1e-9);
            [lo[a] - pad * span, hi[a] + pad * span]
        };
        GridSpec {
            x: widen(0),
            y: widen(1),
            resolution,
        }
    }

    pub fn cells(&self) -> usize {
        self.resolution[0] * self.resolution[1]
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> [f64; 2] {
        let hx = (self.x[1] - self.x[0]) / self.resolution[0] as f64;
        let hy = (self.y[1] - self.y[0]) / self.resolution[1] as f64;
        [
            self.x[0] + (ix as f64 + 0.5) * hx,
            self.y[0] + (iy as f64 + 0.5) * hy,
        ]
    }

    /// Cell containing `(x, y)`, clamped to the grid.
    pub fn cell_of(&self, p: [f64; 2]) -> (usize, usize) {
        let locate = |v: f64, range: [f64; 2], n: usize| {
            let t = (v - range[0]) / (range[1] - range[0]) * n as f64;
            (t.floor().max(0.0) as usize).min(n - 1)
        };
        (
            locate(p[0], self.x, self.resolution[0]),
            locate(p[1], self.y, self.resolution[1]),
        )
    }
}

/// Row-major (`y` outer, `x` inner) EVPI values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvpiGrid {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

impl EvpiGrid {
    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.spec.resolution[0] + ix]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Empirical quantile of the cell values (nearest rank).
    pub fn quantile(&self, p: f64) -> f64 {
        let mut sorted = self.values.clone();
        sorted.sort_by(f64::total_cmp);
        let rank = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
        sorted[rank - 1]
    }
}

/// Evaluates EVPI of the classifier's posterior at every cell center. Models
/// of dimension above two need a projection; grid points are lifted back to
/// feature space as `mean + loadings^T * (x, y)`.
pub fn evpi_grid(
    model: &GmmPosterior,
    dp: &DecisionProcess,
    spec: &GridSpec,
    projection: Option<&Projection>,
) -> Result<EvpiGrid, GridError> {
    spec.validate()?;
    let d = model.dim();
    match projection {
        None if d != 2 => return Err(GridError::ProjectionRequired(d)),
        Some(p) if p.dim() != d => {
            return Err(GridError::ProjectionMismatch {
                projection: p.dim(),
                model: d,
            })
        }
        _ => {}
    }
    let [nx, ny] = spec.resolution;
    let rows = (0..ny)
        .into_par_iter()
        .map(|iy| {
            (0..nx)
                .map(|ix| {
                    let [x, y] = spec.cell_center(ix, iy);
                    let coords = DVector::from_vec(vec![x, y]);
                    let point = match projection {
                        Some(p) => p.lift(&coords),
                        None => coords,
                    };
                    let posterior = model.predict(&point)?;
                    Ok(evpi(dp, &posterior)?)
                })
                .collect::<Result<Vec<f64>, GridError>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EvpiGrid {
        spec: *spec,
        values: rows.into_iter().flatten().collect(),
    })
}
