//! C ABI over `ptpinn`.
//!
//! Every fallible function returns a [`PtStatus`]; on failure the message
//! is available from [`ptpinn_last_error`] on the same thread. Handles are
//! opaque and must be released with the matching `_free` function. All
//! floating-point values cross the boundary as `double`.

// `as f64` casts from `Real` are no-ops in the default f64 build only.
#![allow(clippy::unnecessary_cast)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use ptpinn::cli::{load_config, run_experiment};
use ptpinn::metrics::make_test_set;
use ptpinn::network::{read_checkpoint, write_checkpoint, NetworkParams, NetworkSpec};
use ptpinn::problems::{
    ac_reference_oracle, make_allen_cahn, make_convection, make_heat1d_nl, make_heat2d_hf, make_heat3d, make_reaction,
    write_reference_grid, AcOracleSettings, PdeProblem,
};
use ptpinn::Real;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Numerical = 5,
    /// More replicates failed than the config allows; results were written.
    TooManyFailures = 6,
    Panic = 7,
}

/// A benchmark problem.
pub struct PtProblem(PdeProblem);

/// A network with its parameters.
pub struct PtNetwork(NetworkParams);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PtScores {
    pub l2_rel: f64,
    pub l1_abs: f64,
    pub linf_abs: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PtRunSummary {
    pub replicates: u32,
    pub failures: u32,
    pub mean: PtScores,
    pub std: PtScores,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(PtStatus, String);

impl Failure {
    fn new(status: PtStatus, message: impl std::fmt::Display) -> Self {
        Self(status, message.to_string())
    }
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            PtStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal panic: {msg}"));
            PtStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(Failure::new(PtStatus::NullPointer, format!("{what} is null")));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(PtStatus::InvalidArgument, format!("{what} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure::new(PtStatus::NullPointer, format!("{what} is null")))
}

fn out_ptr<T>(p: *mut T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure::new(PtStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn ptpinn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// `"f64"` or `"f32"`: the precision the library computes in.
#[no_mangle]
pub extern "C" fn ptpinn_precision() -> *const c_char {
    if ptpinn::PRECISION == "f32" {
        c"f32".as_ptr()
    } else {
        c"f64".as_ptr()
    }
}

/// Builds a benchmark by name: `heat3d`, `reaction` (parameter = rho),
/// `heat2d_hf`, `heat1d_nl` (parameter = l), `allen_cahn` (needs
/// `reference_path`) or `convection` (parameter = beta).
///
/// # Safety
/// `name` must be a NUL-terminated string; `reference_path` may be null
/// unless the benchmark is `allen_cahn`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ptpinn_problem_new(
    name: *const c_char,
    parameter: f64,
    reference_path: *const c_char,
    out: *mut *mut PtProblem,
) -> PtStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let name = path_arg(name, "name")?;
        let bad = |e: ptpinn::problems::ProblemError| Failure::new(PtStatus::InvalidArgument, e);
        let p = match name.to_str().unwrap_or("") {
            "heat3d" => make_heat3d(),
            "reaction" => make_reaction(parameter as Real).map_err(bad)?,
            "heat2d_hf" => make_heat2d_hf(),
            "heat1d_nl" => {
                if parameter.fract() != 0.0 || !(0.0..=4.0).contains(&parameter) {
                    return Err(Failure::new(
                        PtStatus::InvalidArgument,
                        "heat1d_nl needs an integer l in 0..=4",
                    ));
                }
                make_heat1d_nl(parameter as u32).map_err(bad)?
            }
            "allen_cahn" => {
                let path = path_arg(reference_path, "reference_path")?;
                make_allen_cahn(&path).map_err(|e| Failure::new(PtStatus::Io, e))?
            }
            "convection" => make_convection(parameter as Real).map_err(bad)?,
            other => {
                return Err(Failure::new(
                    PtStatus::InvalidArgument,
                    format!("unknown benchmark `{other}`"),
                ))
            }
        };
        *out = Box::into_raw(Box::new(PtProblem(p)));
        Ok(())
    })
}

/// # Safety
/// `problem` must come from [`ptpinn_problem_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn ptpinn_problem_free(problem: *mut PtProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Number of network inputs the problem expects (spatial dimension + 1).
///
/// # Safety
/// `problem` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn ptpinn_problem_input_dim(problem: *const PtProblem) -> u32 {
    problem.as_ref().map_or(0, |p| p.0.spatial_dim() as u32 + 1)
}

fn new_network(spec: NetworkSpec, seed: u64, out: *mut *mut PtNetwork) -> Result<(), Failure> {
    out_ptr(out, "out")?;
    let params = NetworkParams::xavier_init(spec, seed).map_err(|e| Failure::new(PtStatus::InvalidArgument, e))?;
    unsafe { *out = Box::into_raw(Box::new(PtNetwork(params))) };
    Ok(())
}

/// Xavier-initialized tanh MLP with one output.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ptpinn_network_new_mlp(
    input_dim: u32,
    hidden_layers: u32,
    width: u32,
    seed: u64,
    out: *mut *mut PtNetwork,
) -> PtStatus {
    guard(|| {
        new_network(
            NetworkSpec::mlp(input_dim as usize, hidden_layers as usize, width as usize),
            seed,
            out,
        )
    })
}

/// Xavier-initialized residual network with one output.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ptpinn_network_new_resnet(
    input_dim: u32,
    blocks: u32,
    width: u32,
    seed: u64,
    out: *mut *mut PtNetwork,
) -> PtStatus {
    guard(|| {
        new_network(
            NetworkSpec::resnet(input_dim as usize, blocks as usize, width as usize),
            seed,
            out,
        )
    })
}

/// Loads a checkpoint written by training or [`ptpinn_network_save`].
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ptpinn_network_load(path: *const c_char, out: *mut *mut PtNetwork) -> PtStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let path = path_arg(path, "path")?;
        let f = File::open(&path).map_err(|e| Failure::new(PtStatus::Io, format!("{}: {e}", path.display())))?;
        let params = read_checkpoint(BufReader::new(f)).map_err(|e| Failure::new(PtStatus::Format, e))?;
        *out = Box::into_raw(Box::new(PtNetwork(params)));
        Ok(())
    })
}

/// # Safety
/// `network` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ptpinn_network_save(network: *const PtNetwork, path: *const c_char) -> PtStatus {
    guard(|| {
        let net = handle(network, "network")?;
        let path = path_arg(path, "path")?;
        let f = File::create(&path).map_err(|e| Failure::new(PtStatus::Io, format!("{}: {e}", path.display())))?;
        write_checkpoint(&net.0, BufWriter::new(f)).map_err(|e| Failure::new(PtStatus::Io, e))
    })
}

/// # Safety
/// `network` must come from a `ptpinn_network_*` constructor or be null.
#[no_mangle]
pub unsafe extern "C" fn ptpinn_network_free(network: *mut PtNetwork) {
    if !network.is_null() {
        drop(Box::from_raw(network));
    }
}

/// # Safety
/// `network` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn ptpinn_network_input_dim(network: *const PtNetwork) -> u32 {
    network.as_ref().map_or(0, |n| n.0.spec().input_dim() as u32)
}

/// # Safety
/// `network` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn ptpinn_network_param_count(network: *const PtNetwork) -> u64 {
    network.as_ref().map_or(0, |n| n.0.values().len() as u64)
}

/// Evaluates the network at `n` points stored row-major in `points`
/// (`n × input_dim` values) and writes `n` outputs.
///
/// # Safety
/// `points` must hold `n * input_dim` doubles and `out` room for `n`.
#[no_mangle]
pub unsafe extern "C" fn ptpinn_network_predict(
    network: *const PtNetwork,
    points: *const f64,
    n: usize,
    out: *mut f64,
) -> PtStatus {
    guard(|| {
        let net = handle(network, "network")?;
        if n == 0 {
            return Ok(());
        }
        if points.is_null() || out.is_null() {
            return Err(Failure::new(PtStatus::NullPointer, "points or out is null"));
        }
        let dim = net.0.spec().input_dim();
        let raw = std::slice::from_raw_parts(points, n * dim);
        let grid = ndarray::Array2::from_shape_fn((n, dim), |(i, j)| raw[i * dim + j] as Real);
        let pred = net
            .0
            .predict(grid.view())
            .map_err(|e| Failure::new(PtStatus::InvalidArgument, e))?;
        let dst = std::slice::from_raw_parts_mut(out, n);
        for (d, p) in dst.iter_mut().zip(pred) {
            *d = p as f64;
        }
        Ok(())
    })
}

/// Scores the network on `n_test` uniform points of the problem's domain
/// drawn with `seed`.
///
/// # Safety
/// Both handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ptpinn_score(
    network: *const PtNetwork,
    problem: *const PtProblem,
    n_test: usize,
    seed: u64,
    out: *mut PtScores,
) -> PtStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let net = handle(network, "network")?;
        let problem = handle(problem, "problem")?;
        if net.0.spec().input_dim() != problem.0.spatial_dim() + 1 {
            return Err(Failure::new(
                PtStatus::InvalidArgument,
                "network and problem dimensions differ",
            ));
        }
        let test = make_test_set(&problem.0, n_test, seed).map_err(|e| Failure::new(PtStatus::InvalidArgument, e))?;
        let s = test.score(&net.0).map_err(|e| Failure::new(PtStatus::Numerical, e))?;
        *out = PtScores {
            l2_rel: s.l2_rel as f64,
            l1_abs: s.l1_abs as f64,
            linf_abs: s.linf_abs as f64,
        };
        Ok(())
    })
}

/// Solves Allen-Cahn with the spectral oracle on an `nx × nt` grid and
/// writes it to `path`. Zero `nx` or `nt` selects the default grid size and
/// `max_dt <= 0` the default step bound.
///
/// # Safety
/// `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ptpinn_ac_reference(nx: u32, nt: u32, max_dt: f64, path: *const c_char) -> PtStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        let mut settings = AcOracleSettings::default();
        if nx > 0 {
            settings.nx = nx as usize;
        }
        if nt > 0 {
            settings.nt = nt as usize;
        }
        if max_dt > 0.0 {
            settings.max_dt = max_dt;
        }
        let report = ac_reference_oracle(settings).map_err(|e| Failure::new(PtStatus::Numerical, e))?;
        let f = File::create(&path).map_err(|e| Failure::new(PtStatus::Io, format!("{}: {e}", path.display())))?;
        write_reference_grid(&report.grid, BufWriter::new(f)).map_err(|e| Failure::new(PtStatus::Io, e))
    })
}

/// Runs the experiment described by a config file, as `ptpinn run` does.
/// `output_root` may be null. The summary is filled even when
/// [`PtStatus::TooManyFailures`] is returned.
///
/// # Safety
/// `config_path` must be a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ptpinn_run_experiment(
    config_path: *const c_char,
    output_root: *const c_char,
    out: *mut PtRunSummary,
) -> PtStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let cfg_path = path_arg(config_path, "config_path")?;
        let root = if output_root.is_null() {
            None
        } else {
            Some(path_arg(output_root, "output_root")?)
        };
        let cfg = load_config(&cfg_path).map_err(|e| Failure::new(PtStatus::Format, e))?;
        let result = run_experiment(&cfg, root.as_deref().map(Path::new))
            .map_err(|e| Failure::new(PtStatus::InvalidArgument, e))?;
        let conv = |s: &ptpinn::metrics::Scores| PtScores {
            l2_rel: s.l2_rel as f64,
            l1_abs: s.l1_abs as f64,
            linf_abs: s.linf_abs as f64,
        };
        let nan = PtScores {
            l2_rel: f64::NAN,
            l1_abs: f64::NAN,
            linf_abs: f64::NAN,
        };
        let failures = result.failures();
        *out = PtRunSummary {
            replicates: result.replicates.len() as u32,
            failures: failures as u32,
            mean: result.aggregate.as_ref().map_or(nan, |a| conv(&a.mean)),
            std: result.aggregate.as_ref().map_or(nan, |a| conv(&a.std)),
        };
        if failures > cfg.run.max_failures {
            return Err(Failure::new(
                PtStatus::TooManyFailures,
                format!("{failures} replicate(s) failed, allowed {}", cfg.run.max_failures),
            ));
        }
        Ok(())
    })
}
