//! Summary tables from `results.csv` files, and solution profiles.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use crate::network::NetworkParams;
use crate::problems::PdeProblem;
use crate::Real;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("unknown table layout `{0}` (known: reaction, heat2d_hf, heat1d_nl, allen_cahn, convection)")]
    UnknownLayout(String),
    #[error("{path}: {message}")]
    Input { path: String, message: String },
    #[error("invalid slice `{slice}`: {message}")]
    Slice { slice: String, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Rows a summary table expects, as `(parameter, method label)` pairs.
/// Layouts are named after their benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct TableLayout {
    pub name: &'static str,
    pub benchmark: &'static str,
    /// Header of the key column; empty when the benchmark has no parameter.
    pub key: &'static str,
    pub keys: Vec<Real>,
    pub methods: Vec<&'static str>,
}

impl TableLayout {
    pub fn named(name: &str) -> Result<Self, ReportError> {
        let (name, key, keys, methods): (&'static str, _, Vec<Real>, Vec<&str>) = match name {
            "reaction" => (
                "reaction",
                "rho",
                vec![5.0, 10.0, 15.0, 20.0],
                vec!["standard", "pt_pinn_k1"],
            ),
            "heat2d_hf" => ("heat2d_hf", "", vec![], vec!["standard", "pt_pinn_k1"]),
            "heat1d_nl" => (
                "heat1d_nl",
                "l",
                vec![0.0, 1.0, 2.0, 3.0, 4.0],
                vec!["standard", "pt_pinn_k1"],
            ),
            "allen_cahn" => ("allen_cahn", "", vec![], vec!["standard", "pt_pinn_k1", "pt_pinn_k2"]),
            "convection" => (
                "convection",
                "beta",
                vec![20.0, 30.0, 40.0, 50.0, 60.0],
                vec!["standard", "pt_pinn_k2"],
            ),
            _ => return Err(ReportError::UnknownLayout(name.to_string())),
        };
        let benchmark = name;
        Ok(Self {
            name,
            benchmark,
            key,
            keys,
            methods,
        })
    }

    fn expected(&self) -> Vec<(Option<String>, String)> {
        let keys: Vec<Option<String>> = if self.keys.is_empty() {
            vec![None]
        } else {
            self.keys.iter().map(|k| Some(key_text(*k))).collect()
        };
        keys.iter()
            .flat_map(|k| self.methods.iter().map(move |m| (k.clone(), m.to_string())))
            .collect()
    }
}

fn key_text(v: Real) -> String {
    if v.fract() == 0.0 && v.abs() < 1e9 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

#[derive(Debug, Clone, Default)]
struct Summary {
    mean: [Option<Real>; 3],
    std: [Option<Real>; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableReport {
    pub rows: usize,
    /// Expected rows with no results, as `key/method`.
    pub missing: Vec<String>,
}

pub const TABLE_HEADER: [&str; 8] = [
    "key",
    "method",
    "l2_rel_mean",
    "l2_rel_std",
    "l1_abs_mean",
    "l1_abs_std",
    "linf_abs_mean",
    "linf_abs_std",
];

/// Collects the `mean`/`std` rows of the given `results.csv` files into one
/// table. Layout rows come first in layout order, then any other results for
/// the same benchmark. Missing layout rows are listed in the report and left
/// out of the table.
pub fn emit_table<W: Write>(results: &[&Path], layout: &TableLayout, out: W) -> Result<TableReport, ReportError> {
    let mut found: BTreeMap<(Option<String>, String), Summary> = BTreeMap::new();
    let mut order: Vec<(Option<String>, String)> = Vec::new();
    for path in results {
        let mut rd = csv::Reader::from_path(path)?;
        let headers = rd.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| ReportError::Input {
                    path: path.display().to_string(),
                    message: format!("missing column `{name}`"),
                })
        };
        let (cb, cp, cm, cr) = (col("benchmark")?, col("parameter")?, col("method")?, col("row")?);
        let metrics = [col("l2_rel")?, col("l1_abs")?, col("linf_abs")?];
        for rec in rd.records() {
            let rec = rec?;
            if &rec[cb] != layout.benchmark {
                continue;
            }
            let row = &rec[cr];
            if row != "mean" && row != "std" {
                continue;
            }
            let key = if layout.key.is_empty() || rec[cp].is_empty() {
                None
            } else {
                let v: Real = rec[cp].parse().map_err(|_| ReportError::Input {
                    path: path.display().to_string(),
                    message: format!("bad parameter `{}`", &rec[cp]),
                })?;
                Some(key_text(v))
            };
            let id = (key, rec[cm].to_string());
            if !found.contains_key(&id) {
                order.push(id.clone());
            }
            let entry = found.entry(id).or_default();
            let slot = if row == "mean" { &mut entry.mean } else { &mut entry.std };
            for (s, c) in slot.iter_mut().zip(metrics) {
                *s = rec[c].parse().ok();
            }
        }
    }

    let expected = layout.expected();
    let mut rows: Vec<(Option<String>, String)> = expected.iter().filter(|e| found.contains_key(e)).cloned().collect();
    rows.extend(order.into_iter().filter(|id| !expected.contains(id)));
    let missing = expected
        .iter()
        .filter(|e| !found.contains_key(e))
        .map(|(k, m)| match k {
            Some(k) => format!("{}={k}/{m}", layout.key),
            None => m.clone(),
        })
        .collect();

    let mut w = csv::Writer::from_writer(out);
    w.write_record(TABLE_HEADER)?;
    for id in &rows {
        let s = &found[id];
        let cell = |v: Option<Real>| v.map(|v| format!("{v:.2e}")).unwrap_or_default();
        let mut rec = vec![id.0.clone().unwrap_or_default(), id.1.clone()];
        for i in 0..3 {
            rec.push(cell(s.mean[i]));
            rec.push(cell(s.std[i]));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(TableReport {
        rows: rows.len(),
        missing,
    })
}

/// Axis names of a problem's inputs: spatial ones, then `t`.
pub fn axis_names(problem: &PdeProblem) -> Vec<&'static str> {
    let spatial: &[&str] = match problem.spatial_dim() {
        1 => &["x"],
        2 => &["x", "y"],
        _ => &["x", "y", "z"],
    };
    spatial.iter().copied().chain(["t"]).collect()
}

/// A slice fixes some coordinates (`"x=1,y=1"`) and leaves one or two free.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice {
    pub fixed: Vec<Option<Real>>,
    pub free: Vec<usize>,
}

pub fn parse_slice(problem: &PdeProblem, text: &str) -> Result<Slice, ReportError> {
    let names = axis_names(problem);
    let err = |m: String| ReportError::Slice {
        slice: text.to_string(),
        message: m,
    };
    let mut fixed: Vec<Option<Real>> = vec![None; names.len()];
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| err(format!("expected `axis=value`, got `{part}`")))?;
        let axis = names
            .iter()
            .position(|n| *n == k.trim())
            .ok_or_else(|| err(format!("unknown axis `{}` (axes: {})", k.trim(), names.join(", "))))?;
        let v: Real = v.trim().parse().map_err(|_| err(format!("bad value `{}`", v.trim())))?;
        let (lo, hi) = bounds(problem, axis);
        if !(v >= lo && v <= hi) {
            return Err(err(format!("{} = {v} lies outside [{lo}, {hi}]", names[axis])));
        }
        if fixed[axis].replace(v).is_some() {
            return Err(err(format!("axis `{}` fixed twice", names[axis])));
        }
    }
    let free: Vec<usize> = (0..names.len()).filter(|i| fixed[*i].is_none()).collect();
    if free.is_empty() || free.len() > 2 {
        return Err(err(format!("must leave one or two axes free, leaves {}", free.len())));
    }
    Ok(Slice { fixed, free })
}

fn bounds(problem: &PdeProblem, axis: usize) -> (Real, Real) {
    let d = problem.spatial_dim();
    if axis == d {
        (0.0, problem.horizon())
    } else {
        (problem.domain().lo[axis], problem.domain().hi[axis])
    }
}

/// Evaluates the network (and the reference, where one exists) on a
/// uniform `points`-per-free-axis grid over the slice (one point sits at
/// the lower end), writing CSV with one column per axis, then `u_pred` and
/// `u_ref`.
pub fn emit_profile<W: Write>(
    params: &NetworkParams,
    problem: &PdeProblem,
    slice: &Slice,
    points: usize,
    out: W,
) -> Result<usize, ReportError> {
    if points == 0 {
        return Err(ReportError::Slice {
            slice: String::new(),
            message: "need at least 1 point per free axis".into(),
        });
    }
    let dim = slice.fixed.len();
    let ticks: Vec<Vec<Real>> = slice
        .free
        .iter()
        .map(|&a| {
            let (lo, hi) = bounds(problem, a);
            let step = if points > 1 {
                (hi - lo) / (points - 1) as Real
            } else {
                0.0
            };
            (0..points).map(|i| lo + step * i as Real).collect()
        })
        .collect();
    let n = ticks.iter().map(Vec::len).product::<usize>();
    let mut grid = Array2::<Real>::zeros((n, dim));
    for (row, mut r) in grid.rows_mut().into_iter().enumerate() {
        let mut rem = row;
        for (slot, &axis) in slice.free.iter().enumerate().rev() {
            r[axis] = ticks[slot][rem % points];
            rem /= points;
        }
        for (axis, v) in slice.fixed.iter().enumerate() {
            if let Some(v) = v {
                r[axis] = *v;
            }
        }
    }
    let pred = params.predict(grid.view()).map_err(|e| ReportError::Slice {
        slice: String::new(),
        message: e.to_string(),
    })?;
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = axis_names(problem);
    header.extend(["u_pred", "u_ref"]);
    w.write_record(&header)?;
    for (r, p) in grid.rows().into_iter().zip(&pred) {
        let mut rec: Vec<String> = r.iter().map(|v| format!("{v:e}")).collect();
        rec.push(format!("{p:e}"));
        rec.push(
            problem
                .reference(r.as_slice().expect("standard layout"))
                .map(|v| format!("{v:e}"))
                .unwrap_or_default(),
        );
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(n)
}
