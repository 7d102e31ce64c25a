//! Reference solution for the Allen-Cahn benchmark.
//!
//! `u_t = ε u_xx + 5u − 5u³` on the periodic interval `[−1, 1)` is solved
//! with a Fourier pseudo-spectral discretization in space and the
//! integrating-factor (Lawson) fourth-order Runge-Kutta scheme in time: the
//! diffusion term is integrated exactly in Fourier space, the cubic term
//! explicitly. Every solve is repeated with half the time step and the two
//! results must agree to `1e-6` in max norm.
//!
//! Grid file (plain text):
//!
//! ```text
//! nx nt
//! x_0 … x_{nx−1}
//! t_0 … t_{nt−1}
//! u(x_0, t_0) … u(x_{nx−1}, t_0)
//! …                                   (nt rows)
//! ```

use std::io::{BufRead, BufReader, Read, Write};
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::ProblemError;

pub const AC_DIFFUSION: crate::Real = 1.0e-4;
pub const AC_REACTION: crate::Real = 5.0;

const SELF_CONVERGENCE_TOL: f64 = 1e-6;

/// Solution samples on a periodic-in-`x` tensor grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceGrid {
    pub x: Vec<f64>,
    pub t: Vec<f64>,
    /// Row `j` holds `u(·, t_j)`.
    pub u: Vec<f64>,
}

impl ReferenceGrid {
    pub fn nx(&self) -> usize {
        self.x.len()
    }

    pub fn nt(&self) -> usize {
        self.t.len()
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.u[j * self.nx() + i]
    }

    fn period(&self) -> f64 {
        let dx = self.x[1] - self.x[0];
        dx * self.nx() as f64
    }

    /// Bilinear interpolation, periodic in `x`, clamped in `t`. Exact at
    /// grid nodes.
    pub fn interpolate(&self, x: f64, t: f64) -> f64 {
        let nx = self.nx();
        let x0 = self.x[0];
        let period = self.period();
        let mut xr = (x - x0).rem_euclid(period) + x0;
        if xr >= x0 + period {
            xr = x0;
        }
        let mut i = self.x.partition_point(|&v| v <= xr).saturating_sub(1);
        if i >= nx {
            i = nx - 1;
        }
        let (xa, xb) = (self.x[i], if i + 1 < nx { self.x[i + 1] } else { x0 + period });
        let fx = (xr - xa) / (xb - xa);
        let i1 = (i + 1) % nx;

        let nt = self.nt();
        let row = |j: usize| {
            let a = self.at(i, j);
            if fx == 0.0 {
                a
            } else {
                a + fx * (self.at(i1, j) - a)
            }
        };
        if t <= self.t[0] {
            return row(0);
        }
        if t >= self.t[nt - 1] {
            return row(nt - 1);
        }
        let j = self.t.partition_point(|&v| v <= t) - 1;
        let ft = (t - self.t[j]) / (self.t[j + 1] - self.t[j]);
        let a = row(j);
        if ft == 0.0 {
            a
        } else {
            a + ft * (row(j + 1) - a)
        }
    }
}

pub fn write_reference_grid<W: Write>(grid: &ReferenceGrid, mut out: W) -> Result<(), ProblemError> {
    let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ");
    writeln!(out, "{} {}", grid.nx(), grid.nt())?;
    writeln!(out, "{}", join(&grid.x))?;
    writeln!(out, "{}", join(&grid.t))?;
    for row in grid.u.chunks(grid.nx()) {
        writeln!(out, "{}", join(row))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_reference_grid<R: Read>(input: R) -> Result<ReferenceGrid, ProblemError> {
    let mut lines = BufReader::new(input).lines();
    let mut line_no = 0;
    let mut next_numbers = |expect: Option<usize>| -> Result<Vec<f64>, ProblemError> {
        line_no += 1;
        let line = lines.next().ok_or(ProblemError::ReferenceFormat {
            line: line_no,
            message: "unexpected end of file".into(),
        })??;
        let v = line
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ProblemError::ReferenceFormat {
                line: line_no,
                message: e.to_string(),
            })?;
        if let Some(n) = expect {
            if v.len() != n {
                return Err(ProblemError::ReferenceFormat {
                    line: line_no,
                    message: format!("expected {n} values, found {}", v.len()),
                });
            }
        }
        Ok(v)
    };
    let header = next_numbers(Some(2))?;
    let (nx, nt) = (header[0] as usize, header[1] as usize);
    if nx < 2 || nt < 1 {
        return Err(ProblemError::ReferenceFormat {
            line: 1,
            message: format!("grid too small: {nx} x {nt}"),
        });
    }
    let x = next_numbers(Some(nx))?;
    let t = next_numbers(Some(nt))?;
    let mut u = Vec::with_capacity(nx * nt);
    for _ in 0..nt {
        u.extend(next_numbers(Some(nx))?);
    }
    if x.windows(2).any(|w| w[1] <= w[0]) || t.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ProblemError::ReferenceFormat {
            line: 2,
            message: "coordinates must be strictly increasing".into(),
        });
    }
    Ok(ReferenceGrid { x, t, u })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcOracleSettings {
    /// Spatial nodes on `[−1, 1)`, a power of two ≥ 256.
    pub nx: usize,
    /// Output times `0, 1/(nt−1), …, 1`, at least 100.
    pub nt: usize,
    /// Largest internal time step.
    pub max_dt: f64,
}

impl AcOracleSettings {
    /// Grid used for stored references. Bilinear interpolation across the
    /// sharp interfaces needs a fine x spacing: doubling both sizes from here
    /// moves interpolated values by under 1e-4.
    pub const DEFAULT_NX: usize = 8192;
    pub const DEFAULT_NT: usize = 201;

    pub fn new(nx: usize, nt: usize) -> Self {
        Self { nx, nt, max_dt: 1e-5 }
    }
}

impl Default for AcOracleSettings {
    fn default() -> Self {
        Self::new(Self::DEFAULT_NX, Self::DEFAULT_NT)
    }
}

#[derive(Debug, Clone)]
pub struct AcOracleReport {
    pub grid: ReferenceGrid,
    /// Internal step of the returned (finer) solve.
    pub dt: f64,
    /// Max-norm difference between the `2·dt` and `dt` solves.
    pub self_convergence: f64,
}

/// Solves the Allen-Cahn benchmark on an `nx × nt` grid (see module docs).
pub fn ac_reference_oracle(settings: AcOracleSettings) -> Result<AcOracleReport, ProblemError> {
    let AcOracleSettings { nx, nt, max_dt } = settings;
    if nx < 256 || !nx.is_power_of_two() {
        return Err(ProblemError::InvalidParameter(format!(
            "nx must be a power of two >= 256, got {nx}"
        )));
    }
    if nt < 100 {
        return Err(ProblemError::InvalidParameter(format!("nt must be >= 100, got {nt}")));
    }
    if !(max_dt > 0.0) {
        return Err(ProblemError::InvalidParameter(format!(
            "max_dt must be positive, got {max_dt}"
        )));
    }
    let interval = 1.0 / (nt - 1) as f64;
    let substeps = (interval / max_dt).ceil() as usize;
    // coarse run at 2·dt, fine run at dt
    let coarse = solve(nx, nt, substeps.div_ceil(2).max(1))?;
    let fine_steps = 2 * substeps.div_ceil(2).max(1);
    let fine = solve(nx, nt, fine_steps)?;
    let diff = coarse
        .u
        .iter()
        .zip(&fine.u)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if diff >= SELF_CONVERGENCE_TOL {
        return Err(ProblemError::NotConverged { diff });
    }
    Ok(AcOracleReport {
        grid: fine,
        dt: interval / fine_steps as f64,
        self_convergence: diff,
    })
}

struct Spectral {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex<f64>>,
    n: usize,
}

impl Spectral {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
        Self {
            forward,
            inverse,
            scratch: vec![Complex::new(0.0, 0.0); len],
            n,
        }
    }

    fn physical(&mut self, hat: &[Complex<f64>], out: &mut Vec<Complex<f64>>) {
        out.clear();
        out.extend_from_slice(hat);
        self.inverse.process_with_scratch(out, &mut self.scratch);
        let scale = 1.0 / self.n as f64;
        for v in out.iter_mut() {
            *v = Complex::new(v.re * scale, 0.0);
        }
    }

    /// Fourier transform of `5u − 5u³`.
    fn reaction(&mut self, hat: &[Complex<f64>], work: &mut Vec<Complex<f64>>, out: &mut [Complex<f64>]) {
        self.physical(hat, work);
        for v in work.iter_mut() {
            let u = v.re;
            *v = Complex::new(AC_REACTION as f64 * (u - u * u * u), 0.0);
        }
        self.forward.process_with_scratch(work, &mut self.scratch);
        out.copy_from_slice(work);
    }
}

fn solve(nx: usize, nt: usize, substeps: usize) -> Result<ReferenceGrid, ProblemError> {
    let pi = std::f64::consts::PI;
    let eps = AC_DIFFUSION as f64;
    let x: Vec<f64> = (0..nx).map(|j| -1.0 + 2.0 * j as f64 / nx as f64).collect();
    let t: Vec<f64> = (0..nt).map(|j| j as f64 / (nt - 1) as f64).collect();
    let dt = 1.0 / ((nt - 1) * substeps) as f64;
    // wavenumbers for period 2
    let k: Vec<f64> = (0..nx)
        .map(|j| {
            let m = if j < nx / 2 { j as f64 } else { j as f64 - nx as f64 };
            pi * m
        })
        .collect();
    let e_half: Vec<f64> = k.iter().map(|k| (-eps * k * k * dt / 2.0).exp()).collect();
    let e_full: Vec<f64> = e_half.iter().map(|e| e * e).collect();

    let mut sp = Spectral::new(nx);
    let initial: Vec<f64> = x.iter().map(|&x| x * x * (pi * x).cos()).collect();
    let mut hat: Vec<Complex<f64>> = initial.iter().map(|&u| Complex::new(u, 0.0)).collect();
    let fwd = sp.forward.clone();
    fwd.process_with_scratch(&mut hat, &mut sp.scratch);

    let mut u = Vec::with_capacity(nx * nt);
    u.extend_from_slice(&initial);
    let zero = Complex::new(0.0, 0.0);
    let (mut k1, mut k2, mut k3, mut k4) = (vec![zero; nx], vec![zero; nx], vec![zero; nx], vec![zero; nx]);
    let mut stage = vec![zero; nx];
    let mut work = Vec::with_capacity(nx);
    for &tj in &t[1..] {
        for _ in 0..substeps {
            sp.reaction(&hat, &mut work, &mut k1);
            for q in 0..nx {
                stage[q] = (hat[q] + k1[q] * (dt / 2.0)) * e_half[q];
            }
            sp.reaction(&stage, &mut work, &mut k2);
            for q in 0..nx {
                stage[q] = hat[q] * e_half[q] + k2[q] * (dt / 2.0);
            }
            sp.reaction(&stage, &mut work, &mut k3);
            for q in 0..nx {
                stage[q] = hat[q] * e_full[q] + k3[q] * (dt * e_half[q]);
            }
            sp.reaction(&stage, &mut work, &mut k4);
            for q in 0..nx {
                hat[q] =
                    hat[q] * e_full[q] + (k1[q] * e_full[q] + (k2[q] + k3[q]) * (2.0 * e_half[q]) + k4[q]) * (dt / 6.0);
            }
        }
        sp.physical(&hat, &mut work);
        if work.iter().any(|v| !v.re.is_finite()) {
            return Err(ProblemError::Unstable { t: tj });
        }
        u.extend(work.iter().map(|v| v.re));
    }
    Ok(ReferenceGrid { x, t, u })
}
