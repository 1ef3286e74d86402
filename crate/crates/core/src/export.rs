//! Result files: learning curves, accuracy traces, query logs, EVPI grids,
//! class summaries and the run manifest.
//!
//! Text tables are comma separated with a header row and LF line endings.
//! Floats are written with 17 significant digits so they read back exactly.
//! Every file is written to a temporary sibling and renamed into place.

use crate::active::{LearningCurve, MonteCarloResult};
use crate::gmm::{ClassSummary, LabeledSet};
use crate::grid::{EvpiGrid, GridSpec};
use serde::Serialize;
use std::fmt::Write as _;
use std::io::{self, BufWriter, Write};
use std::path::Path;

pub const CURVE_FILE: &str = "learning_curve.csv";
pub const TRACE_FILE: &str = "traces.csv";
pub const QUERY_LOG_FILE: &str = "query_log.csv";
pub const GRID_INITIAL_FILE: &str = "evpi_grid_initial.csv";
pub const GRID_FINAL_FILE: &str = "evpi_grid_final.csv";
pub const SUMMARY_FILE: &str = "map_summary.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// `{:.16e}`: 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic<F>(path: &Path, fill: F) -> io::Result<()>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    let result = (|| {
        let file = std::fs::File::create(&tmp)?;
        let mut w = BufWriter::new(file);
        fill(&mut w)?;
        w.flush()?;
        w.into_inner().map_err(|e| e.into_error())?.sync_all()
    })();
    match result {
        Ok(()) => std::fs::rename(&tmp, path),
        Err(e) => {
            let _ = std::fs::remove_file(&tmp);
            Err(e)
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")
    })
}

/// One row of the combined learning-curve table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub q: usize,
    pub mean_active: Option<f64>,
    pub sd_active: Option<f64>,
    pub mean_random: Option<f64>,
    pub sd_random: Option<f64>,
    pub n_reps_at_q: usize,
}

pub fn curve_rows(active: &LearningCurve, random: &LearningCurve) -> Vec<CurveRow> {
    let len = active.points.len().max(random.points.len());
    (0..len)
        .map(|q| {
            let a = active.at(q);
            let r = random.at(q);
            CurveRow {
                q,
                mean_active: a.map(|p| p.mean),
                sd_active: a.map(|p| p.sd),
                mean_random: r.map(|p| p.mean),
                sd_random: r.map(|p| p.sd),
                n_reps_at_q: a.or(r).map_or(0, |p| p.n),
            }
        })
        .collect()
}

pub fn write_curves(path: &Path, active: &LearningCurve, random: &LearningCurve) -> io::Result<()> {
    let cell = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    write_atomic(path, |w| {
        writeln!(w, "q,mean_active,sd_active,mean_random,sd_random,n_reps_at_q")?;
        for row in curve_rows(active, random) {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                row.q,
                cell(row.mean_active),
                cell(row.sd_active),
                cell(row.mean_random),
                cell(row.sd_random),
                row.n_reps_at_q
            )?;
        }
        Ok(())
    })
}

fn invalid(msg: String) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg)
}

pub fn read_curves(path: &Path) -> io::Result<Vec<CurveRow>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some("q,mean_active,sd_active,mean_random,sd_random,n_reps_at_q") => {}
        other => return Err(invalid(format!("unexpected curve header {other:?}"))),
    }
    let opt = |s: &str| -> io::Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|_| invalid(format!("bad number {s:?}")))
        }
    };
    lines
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(invalid(format!("expected 6 fields in {line:?}")));
            }
            Ok(CurveRow {
                q: f[0].parse().map_err(|_| invalid(format!("bad q {:?}", f[0])))?,
                mean_active: opt(f[1])?,
                sd_active: opt(f[2])?,
                mean_random: opt(f[3])?,
                sd_random: opt(f[4])?,
                n_reps_at_q: f[5].parse().map_err(|_| invalid(format!("bad count {:?}", f[5])))?,
            })
        })
        .collect()
}

/// Per-repetition accuracy after each query: `repetition,seed,method,q,accuracy`.
pub fn write_traces(path: &Path, mc: &MonteCarloResult) -> io::Result<()> {
    write_atomic(path, |w| {
        writeln!(w, "repetition,seed,method,q,accuracy")?;
        for (r, rep) in mc.repetitions.iter().enumerate() {
            for (method, run) in [("active", &rep.active), ("random", &rep.random)] {
                for (q, a) in run.accuracy.iter().enumerate() {
                    writeln!(w, "{r},{},{method},{q},{}", rep.seed, fmt_f64(*a))?;
                }
            }
        }
        Ok(())
    })
}

/// Accuracy traces per method, in repetition order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Traces {
    pub active: Vec<Vec<f64>>,
    pub random: Vec<Vec<f64>>,
}

pub fn read_traces(path: &Path) -> io::Result<Traces> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some("repetition,seed,method,q,accuracy") {
        return Err(invalid("unexpected trace header".into()));
    }
    let mut traces = Traces::default();
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(invalid(format!("expected 5 fields in {line:?}")));
        }
        let rep: usize = f[0].parse().map_err(|_| invalid(format!("bad repetition {:?}", f[0])))?;
        let q: usize = f[3].parse().map_err(|_| invalid(format!("bad q {:?}", f[3])))?;
        let acc: f64 = f[4].parse().map_err(|_| invalid(format!("bad accuracy {:?}", f[4])))?;
        let target = match f[2] {
            "active" => &mut traces.active,
            "random" => &mut traces.random,
            m => return Err(invalid(format!("unknown method {m:?}"))),
        };
        if target.len() <= rep {
            target.resize(rep + 1, Vec::new());
        }
        if target[rep].len() != q {
            return Err(invalid(format!("repetition {rep}: q={q} out of sequence")));
        }
        target[rep].push(acc);
    }
    Ok(traces)
}

/// Every presentation of the active runs and every query of the baseline.
pub fn write_query_log(path: &Path, mc: &MonteCarloResult, data: &LabeledSet) -> io::Result<()> {
    write_atomic(path, |w| {
        writeln!(w, "repetition,method,step,observation,true_label,evpi,queried")?;
        for (r, rep) in mc.repetitions.iter().enumerate() {
            for (method, run) in [("active", &rep.active), ("random", &rep.random)] {
                for rec in &run.log {
                    writeln!(
                        w,
                        "{r},{method},{},{},{},{},{}",
                        rec.step,
                        rec.observation,
                        data.label(rec.observation),
                        fmt_f64(rec.evpi),
                        u8::from(rec.queried)
                    )?;
                }
            }
        }
        Ok(())
    })
}

fn grid_header(spec: &GridSpec) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        "# x_min={},x_max={},nx={},y_min={},y_max={},ny={}",
        fmt_f64(spec.x[0]),
        fmt_f64(spec.x[1]),
        spec.resolution[0],
        fmt_f64(spec.y[0]),
        fmt_f64(spec.y[1]),
        spec.resolution[1]
    );
    s
}

/// `# axis metadata`, then `x,y,evpi` per cell center, `x` varying fastest.
pub fn write_grid(path: &Path, grid: &EvpiGrid) -> io::Result<()> {
    write_atomic(path, |w| {
        writeln!(w, "{}", grid_header(&grid.spec))?;
        writeln!(w, "x,y,evpi")?;
        let [nx, ny] = grid.spec.resolution;
        for iy in 0..ny {
            for ix in 0..nx {
                let [x, y] = grid.spec.cell_center(ix, iy);
                writeln!(w, "{},{},{}", fmt_f64(x), fmt_f64(y), fmt_f64(grid.get(ix, iy)))?;
            }
        }
        Ok(())
    })
}

pub fn read_grid(path: &Path) -> io::Result<EvpiGrid> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let meta = lines
        .next()
        .and_then(|l| l.strip_prefix("# "))
        .ok_or_else(|| invalid("missing grid metadata line".into()))?;
    let get = |key: &str| -> io::Result<&str> {
        meta.split(',')
            .find_map(|kv| kv.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
            .ok_or_else(|| invalid(format!("grid metadata lacks {key}")))
    };
    let num = |s: &str| s.parse::<f64>().map_err(|_| invalid(format!("bad number {s:?}")));
    let int = |s: &str| s.parse::<usize>().map_err(|_| invalid(format!("bad integer {s:?}")));
    let spec = GridSpec {
        x: [num(get("x_min")?)?, num(get("x_max")?)?],
        y: [num(get("y_min")?)?, num(get("y_max")?)?],
        resolution: [int(get("nx")?)?, int(get("ny")?)?],
    };
    if lines.next() != Some("x,y,evpi") {
        return Err(invalid("unexpected grid header".into()));
    }
    let values = lines
        .map(|l| {
            let v = l.rsplit(',').next().unwrap_or_default();
            num(v)
        })
        .collect::<io::Result<Vec<f64>>>()?;
    if values.len() != spec.cells() {
        return Err(invalid(format!(
            "grid has {} cells, metadata says {}",
            values.len(),
            spec.cells()
        )));
    }
    Ok(EvpiGrid { spec, values })
}

/// Class summaries of the first repetition's initial and final models.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapSummaries {
    pub initial: Vec<ClassSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r#final: Option<Vec<ClassSummary>>,
    /// Summaries mapped into the plotting plane when features exceed two dimensions.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub projected_initial: Option<Vec<ClassSummary>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub projected_final: Option<Vec<ClassSummary>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::active::CurvePoint;

    fn curve(vals: &[(f64, f64)]) -> LearningCurve {
        LearningCurve {
            repetitions: 3,
            points: vals
                .iter()
                .enumerate()
                .map(|(q, &(mean, sd))| CurvePoint { q, mean, sd, n: 3 })
                .collect(),
        }
    }

    #[test]
    fn curves_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(CURVE_FILE);
        let a = curve(&[(0.1 + 0.2, 1.0 / 3.0), (std::f64::consts::PI / 4.0, 1e-17)]);
        let r = curve(&[(0.7, 0.0)]);
        write_curves(&path, &a, &r).unwrap();
        let rows = read_curves(&path).unwrap();
        assert_eq!(rows, curve_rows(&a, &r));
        assert_eq!(rows[0].mean_active, Some(0.1 + 0.2));
        assert_eq!(rows[1].mean_random, None);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(!text.contains('\r'));
        assert!(!dir.path().join(format!(".{CURVE_FILE}.tmp")).exists());
    }

    #[test]
    fn grid_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.csv");
        let spec = GridSpec {
            x: [-1.0, 2.0],
            y: [0.5, 1.5],
            resolution: [7, 3],
        };
        let grid = EvpiGrid {
            spec,
            values: (0..21).map(|i| f64::from(i) / 7.0).collect(),
        };
        write_grid(&path, &grid).unwrap();
        let back = read_grid(&path).unwrap();
        assert_eq!(back, grid);
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2 + spec.cells());
    }

    #[test]
    fn failed_write_leaves_no_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        let err = write_atomic(&path, |w| {
            w.write_all(b"partial")?;
            Err(io::Error::other("boom"))
        });
        assert!(err.is_err());
        assert!(!path.exists());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn formatting_round_trips() {
        for v in [0.0, -0.0, 1.0, 0.1, 1e-300, 123456789.123456789, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }
}
