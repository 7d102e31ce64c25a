//! Repeated training runs and their result files.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;

use super::config::{ExperimentConfig, Method};
use crate::metrics::{default_test_seed, make_test_set, Scores, TestSet};
use crate::optimizers::LossComponents;
use crate::problems::PdeProblem;
use crate::training::{run_pt_pinn, train_standard, TrainedModel};
use crate::Real;

#[derive(Debug, Clone, PartialEq)]
pub enum ReplicateStatus {
    Ok,
    /// Final loss above `failure_factor × median`.
    Failed,
    /// Training stopped with an error (for example a non-finite loss).
    Error(String),
}

impl ReplicateStatus {
    pub fn as_str(&self) -> &str {
        match self {
            Self::Ok => "ok",
            Self::Failed => "failed",
            Self::Error(_) => "error",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReplicateResult {
    pub index: usize,
    pub seed: u64,
    pub status: ReplicateStatus,
    pub scores: Option<Scores>,
    pub loss: Real,
    pub components: LossComponents,
    pub wall: Duration,
}

/// Mean and sample standard deviation over successful replicates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub count: usize,
    pub mean: Scores,
    pub std: Scores,
    pub loss_mean: Real,
    pub loss_std: Real,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub benchmark: String,
    pub parameter: Option<Real>,
    pub label: String,
    pub replicates: Vec<ReplicateResult>,
    pub aggregate: Option<Aggregate>,
    pub output_dir: PathBuf,
}

impl RunResult {
    pub fn failures(&self) -> usize {
        self.replicates
            .iter()
            .filter(|r| r.status != ReplicateStatus::Ok)
            .count()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("{0}")]
    Setup(String),
    #[error("i/o error at {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Mean and sample standard deviation (`n − 1`); the deviation is 0 for a
/// single value.
pub fn mean_std(values: &[Real]) -> (Real, Real) {
    let n = values.len();
    if n == 0 {
        return (Real::NAN, Real::NAN);
    }
    let mean = values.iter().map(|v| *v as f64).sum::<f64>() / n as f64;
    if n == 1 {
        return (mean as Real, 0.0);
    }
    let var = values.iter().map(|v| (*v as f64 - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean as Real, var.sqrt() as Real)
}

fn median(values: &mut [Real]) -> Real {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Marks replicates whose final loss exceeds `factor × median` over the
/// replicates that finished.
pub fn flag_failures(replicates: &mut [ReplicateResult], factor: Real) {
    let mut losses: Vec<Real> = replicates
        .iter()
        .filter(|r| r.status == ReplicateStatus::Ok)
        .map(|r| r.loss)
        .collect();
    if losses.is_empty() {
        return;
    }
    let threshold = factor * median(&mut losses);
    for r in replicates.iter_mut() {
        if r.status == ReplicateStatus::Ok && r.loss > threshold {
            r.status = ReplicateStatus::Failed;
        }
    }
}

pub fn aggregate(replicates: &[ReplicateResult]) -> Option<Aggregate> {
    let ok: Vec<&ReplicateResult> = replicates.iter().filter(|r| r.status == ReplicateStatus::Ok).collect();
    if ok.is_empty() {
        return None;
    }
    let col = |f: fn(&Scores) -> Real| mean_std(&ok.iter().map(|r| f(r.scores.as_ref().unwrap())).collect::<Vec<_>>());
    let (l2m, l2s) = col(|s| s.l2_rel);
    let (l1m, l1s) = col(|s| s.l1_abs);
    let (lim, lis) = col(|s| s.linf_abs);
    let (lm, ls) = mean_std(&ok.iter().map(|r| r.loss).collect::<Vec<_>>());
    Some(Aggregate {
        count: ok.len(),
        mean: Scores {
            l2_rel: l2m,
            l1_abs: l1m,
            linf_abs: lim,
        },
        std: Scores {
            l2_rel: l2s,
            l1_abs: l1s,
            linf_abs: lis,
        },
        loss_mean: lm,
        loss_std: ls,
    })
}

fn train_one(config: &ExperimentConfig, problem: &PdeProblem, seed: u64, dir: &Path) -> Result<TrainedModel, String> {
    match config.method {
        Method::Standard => {
            let model = train_standard(problem, &config.schedule.network, config.standard_stage(), seed)
                .map_err(|e| e.to_string())?;
            fs::create_dir_all(dir).map_err(|e| e.to_string())?;
            let ckpt = fs::File::create(dir.join("final.ckpt")).map_err(|e| e.to_string())?;
            crate::network::write_checkpoint(&model.params, std::io::BufWriter::new(ckpt))
                .map_err(|e| e.to_string())?;
            let log = fs::File::create(dir.join("log.csv")).map_err(|e| e.to_string())?;
            model
                .log
                .write_csv(std::io::BufWriter::new(log))
                .map_err(|e| e.to_string())?;
            Ok(model)
        }
        Method::PtPinn => {
            let result = run_pt_pinn(problem, &config.schedule, seed, config.formal_init, Some(dir))
                .map_err(|e| e.to_string())?;
            let model = result.final_model().clone();
            let src = dir.join(format!("stage_{}.ckpt", model.stage));
            fs::copy(&src, dir.join("final.ckpt")).map_err(|e| e.to_string())?;
            Ok(model)
        }
    }
}

fn run_replicate(
    config: &ExperimentConfig,
    problem: &PdeProblem,
    test: &TestSet,
    index: usize,
    out: &Path,
) -> ReplicateResult {
    let seed = config.run.seed + index as u64;
    let start = Instant::now();
    let dir = out.join(format!("replicate_{index}"));
    log::info!(
        "{} {}: replicate {index} (seed {seed}) started",
        problem.name(),
        config.label
    );
    let outcome = train_one(config, problem, seed, &dir).and_then(|m| {
        let scores = test.score(&m.params).map_err(|e| e.to_string())?;
        Ok((m, scores))
    });
    let wall = start.elapsed();
    match outcome {
        Ok((m, scores)) => {
            log::info!(
                "{} {}: replicate {index} done in {:.1}s, loss {:e}, l2_rel {:e}",
                problem.name(),
                config.label,
                wall.as_secs_f64(),
                m.loss,
                scores.l2_rel
            );
            ReplicateResult {
                index,
                seed,
                status: ReplicateStatus::Ok,
                scores: Some(scores),
                loss: m.loss,
                components: m.components,
                wall,
            }
        }
        Err(e) => {
            log::warn!("{} {}: replicate {index} failed: {e}", problem.name(), config.label);
            ReplicateResult {
                index,
                seed,
                status: ReplicateStatus::Error(e),
                scores: None,
                loss: Real::NAN,
                components: LossComponents::default(),
                wall,
            }
        }
    }
}

/// Trains `run.repeats` replicates with seeds `run.seed + i`, scores each on
/// the shared test set and writes `results.csv`, `timing.csv` and one
/// `replicate_<i>/` directory per replicate under the output directory.
///
/// Replicates run in parallel on the rayon pool; results do not depend on
/// the thread count.
pub fn run_experiment(config: &ExperimentConfig, output_root: Option<&Path>) -> Result<RunResult, ExperimentError> {
    let problem = config.benchmark.build().map_err(|e| {
        let hint = if config.benchmark.kind == super::config::BenchmarkKind::AllenCahn {
            format!(
                " (generate it with `ptpinn ac-reference {}`)",
                config.benchmark.reference.display()
            )
        } else {
            String::new()
        };
        ExperimentError::Setup(format!("{e}{hint}"))
    })?;
    match config.method {
        Method::PtPinn => config.schedule.validate(&problem),
        Method::Standard => config.standard_stage().validate(),
    }
    .map_err(|e| ExperimentError::Setup(e.to_string()))?;
    let test_seed = config.run.test_seed.unwrap_or_else(|| default_test_seed(&problem));
    let test =
        make_test_set(&problem, config.run.test_size, test_seed).map_err(|e| ExperimentError::Setup(e.to_string()))?;

    let out = config.resolved_output_dir(output_root);
    fs::create_dir_all(&out).map_err(io_err(&out))?;
    let mut replicates: Vec<ReplicateResult> = (0..config.run.repeats)
        .into_par_iter()
        .map(|i| run_replicate(config, &problem, &test, i, &out))
        .collect();
    flag_failures(&mut replicates, config.run.failure_factor);
    let result = RunResult {
        benchmark: problem.name().to_string(),
        parameter: problem.parameter(),
        label: config.label.clone(),
        aggregate: aggregate(&replicates),
        replicates,
        output_dir: out.clone(),
    };
    write_results(&result, &out.join("results.csv"))?;
    write_timing(&result, &out.join("timing.csv"))?;
    Ok(result)
}

pub const RESULTS_HEADER: [&str; 14] = [
    "benchmark",
    "parameter",
    "method",
    "row",
    "seed",
    "status",
    "l2_rel",
    "l1_abs",
    "linf_abs",
    "loss",
    "loss_i",
    "loss_b",
    "loss_r",
    "loss_sp",
];

fn fmt(v: Real) -> String {
    format!("{v:e}")
}

/// One row per replicate, then `mean` and `std` rows over the successful
/// replicates. Wall time is kept out of this file so it is reproducible
/// byte for byte; see `timing.csv`.
pub fn write_results(result: &RunResult, path: &Path) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RESULTS_HEADER)?;
    let param = result.parameter.map(fmt).unwrap_or_default();
    for r in &result.replicates {
        let (l2, l1, li) = match &r.scores {
            Some(s) => (fmt(s.l2_rel), fmt(s.l1_abs), fmt(s.linf_abs)),
            None => Default::default(),
        };
        let c = &r.components;
        w.write_record([
            result.benchmark.clone(),
            param.clone(),
            result.label.clone(),
            r.index.to_string(),
            r.seed.to_string(),
            r.status.as_str().to_string(),
            l2,
            l1,
            li,
            fmt(r.loss),
            fmt(c.initial),
            fmt(c.boundary),
            fmt(c.residual),
            fmt(c.supervised),
        ])?;
    }
    if let Some(a) = &result.aggregate {
        for (row, s, loss) in [("mean", &a.mean, a.loss_mean), ("std", &a.std, a.loss_std)] {
            w.write_record([
                result.benchmark.clone(),
                param.clone(),
                result.label.clone(),
                row.to_string(),
                String::new(),
                format!("n={}", a.count),
                fmt(s.l2_rel),
                fmt(s.l1_abs),
                fmt(s.linf_abs),
                fmt(loss),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ])?;
        }
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

fn write_timing(result: &RunResult, path: &Path) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["row", "seed", "wall_seconds"])?;
    for r in &result.replicates {
        w.write_record([
            r.index.to_string(),
            r.seed.to_string(),
            format!("{:.3}", r.wall.as_secs_f64()),
        ])?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rep(index: usize, loss: Real, l2: Real) -> ReplicateResult {
        ReplicateResult {
            index,
            seed: index as u64,
            status: ReplicateStatus::Ok,
            scores: Some(Scores {
                l2_rel: l2,
                l1_abs: l2 / 2.0,
                linf_abs: l2 * 3.0,
            }),
            loss,
            components: LossComponents::default(),
            wall: Duration::ZERO,
        }
    }

    #[test]
    fn mean_std_known_values() {
        let (m, s) = mean_std(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert!((m - 5.0).abs() < 1e-12);
        // sample variance 32/7
        assert!((s - (32.0f64 / 7.0).sqrt() as Real).abs() < 1e-6);
        assert_eq!(mean_std(&[3.0]), (3.0, 0.0));
    }

    #[test]
    fn outliers_are_flagged_and_excluded() {
        let mut reps = vec![rep(0, 1.0, 0.1), rep(1, 2.0, 0.2), rep(2, 1.5, 0.3), rep(3, 100.0, 0.9)];
        flag_failures(&mut reps, 10.0);
        let status: Vec<&str> = reps.iter().map(|r| r.status.as_str()).collect();
        assert_eq!(status, ["ok", "ok", "ok", "failed"]);
        let a = aggregate(&reps).unwrap();
        assert_eq!(a.count, 3);
        assert!((a.mean.l2_rel - 0.2).abs() < 1e-12);
        assert!((a.std.l2_rel - 0.1).abs() < 1e-12);
    }

    #[test]
    fn results_csv_round_trips_aggregates() {
        let reps = vec![rep(0, 1.0, 0.125), rep(1, 2.0, 0.3), rep(2, 1.5, 1.0 / 3.0)];
        let result = RunResult {
            benchmark: "reaction".into(),
            parameter: Some(5.0),
            label: "standard".into(),
            aggregate: aggregate(&reps),
            replicates: reps,
            output_dir: PathBuf::new(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("results.csv");
        write_results(&result, &path).unwrap();
        let mut rd = csv::Reader::from_path(&path).unwrap();
        let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), 5);
        let l2: Vec<Real> = rows[..3].iter().map(|r| r[6].parse().unwrap()).collect();
        let (m, s) = mean_std(&l2);
        assert_eq!(rows[3][6].parse::<Real>().unwrap(), m);
        assert_eq!(rows[4][6].parse::<Real>().unwrap(), s);
    }
}
