//! Periodic drift-diffusion problem, analytic reference and classical solvers.
//!
//! Grid point `j` on each axis sits at `x_j = -L + 2L·j/(n_x-1)`, so both
//! domain ends are sampled, while the finite-difference spacing is
//! `Δx = 2L/n_x`.  Multi-indices are flattened with axis 0 fastest.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::fft;
use crate::math::{self, C64};
use crate::{Error, Result};

/// Parameters of the drift-diffusion equation and its discretisation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DdeProblem {
    pub d: usize,
    pub n_x: usize,
    pub n_t: usize,
    /// Spatial half extent: the domain is `[-L, L]^d`.
    pub l: f64,
    /// Final time.
    pub t_final: f64,
    /// Drift coefficient.
    pub a: f64,
    /// Diffusion coefficient.
    pub diff: f64,
    /// Smoothness bound. Carried for completeness, never used numerically.
    pub zeta: f64,
    /// Total error target.
    pub epsilon: f64,
    pub x0: f64,
    pub t0: f64,
}

impl DdeProblem {
    /// Reference parameters (`T = 10`, `n_t = 100`, `a = 0.2366`,
    /// `D = 0.2455`, `ζ = 1`, `ε = 0.03`, `x0 = 2`).
    pub fn table2(d: usize, n_x: usize, l: f64) -> Self {
        DdeProblem {
            d,
            n_x,
            n_t: 100,
            l,
            t_final: 10.0,
            a: 0.2366,
            diff: 0.2455,
            zeta: 1.0,
            epsilon: 0.03,
            x0: 2.0,
            t0: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidProblem(m.into()));
        if self.d == 0 {
            return bad("d must be at least 1");
        }
        if self.n_x < 2 || !self.n_x.is_power_of_two() {
            return bad("n_x must be an even power of two");
        }
        let fields = [self.l, self.t_final, self.a, self.diff, self.zeta, self.epsilon, self.x0, self.t0];
        if fields.iter().any(|v| !v.is_finite()) {
            return bad("parameters must be finite");
        }
        if self.l <= 0.0 {
            return bad("L must be positive");
        }
        if self.t_final <= 0.0 {
            return bad("T must be positive");
        }
        if self.a < 0.0 {
            return bad("drift a must be non-negative");
        }
        if self.diff <= 0.0 {
            return bad("diffusion D must be positive");
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad("epsilon must lie in (0, 1)");
        }
        if (self.n_x as u128).pow(self.d as u32) > (1u128 << 40) {
            return bad("grid has more than 2^40 points");
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.l / self.n_x as f64
    }

    /// Time step `T/n_t`; zero when `n_t = 0` (no evolution).
    pub fn dt(&self) -> f64 {
        if self.n_t == 0 {
            0.0
        } else {
            self.t_final / self.n_t as f64
        }
    }

    /// `2dDΔt/Δx²`; the explicit scheme is stable when this is at most 1.
    pub fn stability_number(&self) -> f64 {
        let dx = self.dx();
        2.0 * self.d as f64 * self.diff * self.dt() / (dx * dx)
    }

    pub fn is_stable(&self) -> bool {
        self.stability_number() <= 1.0
    }

    /// Qubits per spatial axis.
    pub fn qubits_per_axis(&self) -> usize {
        self.n_x.trailing_zeros() as usize
    }

    /// Total state-register qubits `q = d·log₂ n_x`.
    pub fn q(&self) -> usize {
        self.d * self.qubits_per_axis()
    }

    pub fn grid_len(&self) -> usize {
        self.n_x.pow(self.d as u32)
    }

    pub fn cell_volume(&self) -> f64 {
        math::powf(self.dx(), self.d as f64)
    }

    /// Coordinate of grid index `j` along one axis.
    pub fn coord(&self, j: usize) -> f64 {
        -self.l + 2.0 * self.l * j as f64 / (self.n_x - 1) as f64
    }

    /// Splits a flat index into its per-axis indices.
    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.d);
        for _ in 0..self.d {
            out.push(flat % self.n_x);
            flat /= self.n_x;
        }
        out
    }

    pub fn flat_index(&self, idx: &[usize]) -> Result<usize> {
        if idx.len() != self.d {
            return Err(Error::IndexOutOfRange(format!("expected {} indices, got {}", self.d, idx.len())));
        }
        let mut flat = 0;
        for &j in idx.iter().rev() {
            if j >= self.n_x {
                return Err(Error::IndexOutOfRange(format!("index {j} >= n_x = {}", self.n_x)));
            }
            flat = flat * self.n_x + j;
        }
        Ok(flat)
    }

    /// FTCS weights `(centre, x+Δx neighbour, x−Δx neighbour)`.
    pub fn ftcs_weights(&self) -> (f64, f64, f64) {
        let dx = self.dx();
        let dt = self.dt();
        let r = self.diff * dt / (dx * dx);
        let c = self.a * dt / (2.0 * dx);
        (1.0 - 2.0 * self.d as f64 * r, r + c, r - c)
    }
}

/// Real values on the `n_x^d` grid at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub problem: DdeProblem,
    pub values: Vec<f64>,
    pub time: f64,
    pub normalized: bool,
}

impl GridField {
    pub fn new(problem: DdeProblem, values: Vec<f64>, time: f64) -> Result<Self> {
        problem.validate()?;
        if values.len() != problem.grid_len() {
            return Err(Error::GridMismatch(format!(
                "field has {} values, grid has {}",
                values.len(),
                problem.grid_len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Unstable("field contains non-finite values".into()));
        }
        Ok(GridField { problem, values, time, normalized: false })
    }

    /// `Σ values · Δx^d`.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.problem.cell_volume()
    }

    /// Rescales so the mass is one and sets the `normalized` flag.
    pub fn normalize(mut self) -> Result<Self> {
        let m = self.mass();
        if !(m.is_finite() && m != 0.0) {
            return Err(Error::InvalidInput(format!("cannot normalise field with mass {m}")));
        }
        for v in &mut self.values {
            *v /= m;
        }
        self.normalized = true;
        Ok(self)
    }

    pub fn l2_norm(&self) -> f64 {
        math::sqrt(self.values.iter().map(|v| v * v).sum())
    }

    fn check_same_grid(&self, other: &GridField) -> Result<()> {
        let (p, o) = (&self.problem, &other.problem);
        if p.d != o.d || p.n_x != o.n_x || p.l != o.l || self.values.len() != other.values.len() {
            return Err(Error::GridMismatch(format!(
                "d={}, n_x={}, L={} vs d={}, n_x={}, L={}",
                p.d, p.n_x, p.l, o.d, o.n_x, o.l
            )));
        }
        Ok(())
    }
}

/// Complex values on the grid, indexed by frequency multi-index.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    pub n_x: usize,
    pub d: usize,
    pub values: Vec<C64>,
}

impl SpectralField {
    pub fn forward(p: &GridField) -> Result<Self> {
        let x: Vec<C64> = p.values.iter().map(|v| C64::new(*v, 0.0)).collect();
        Ok(SpectralField { n_x: p.problem.n_x, d: p.problem.d, values: fft::fft_nd(&x, p.problem.n_x, p.problem.d)? })
    }

    pub fn inverse(&self) -> Result<Vec<C64>> {
        fft::ifft_nd(&self.values, self.n_x, self.d)
    }
}

/// Eigenvalues of the one-step operator together with the
/// subnormalisation `α = max |λ^{n_t}|`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSpectrum {
    pub n_x: usize,
    pub d: usize,
    pub lambda: Vec<C64>,
    pub alpha: f64,
}

impl EigenSpectrum {
    pub fn of(prob: &DdeProblem) -> Result<Self> {
        prob.validate()?;
        let lambda: Vec<C64> = (0..prob.grid_len())
            .map(|i| eigenvalue_unchecked(prob, &prob.multi_index(i)))
            .collect();
        let alpha = lambda.iter().map(|l| cpowi(*l, prob.n_t).norm()).fold(0.0, f64::max);
        Ok(EigenSpectrum { n_x: prob.n_x, d: prob.d, lambda, alpha })
    }
}

/// `z^n` by repeated squaring.
pub fn cpowi(mut z: C64, mut n: usize) -> C64 {
    let mut acc = C64::new(1.0, 0.0);
    while n > 0 {
        if n & 1 == 1 {
            acc *= z;
        }
        z *= z;
        n >>= 1;
    }
    acc
}

/// One-dimensional analytic solution for a unit-width Gaussian started at `x0`.
pub fn analytic_solution(prob: &DdeProblem, x: f64, t: f64) -> Result<f64> {
    if prob.d != 1 {
        return Err(Error::InvalidProblem(format!(
            "1-d analytic solution requested for d = {}",
            prob.d
        )));
    }
    analytic_1d(prob, x, t)
}

fn analytic_1d(prob: &DdeProblem, x: f64, t: f64) -> Result<f64> {
    if !(t >= prob.t0) {
        return Err(Error::InvalidInput(format!("t = {t} precedes t0 = {}", prob.t0)));
    }
    let s = t - prob.t0;
    let width = 4.0 * prob.diff * s + 2.0;
    let shift = prob.a * s + (x - prob.x0);
    Ok(math::exp(-shift * shift / width) / math::sqrt(math::PI * width))
}

/// Product of 1-d solutions over the axes.
pub fn analytic_solution_nd(prob: &DdeProblem, x: &[f64], t: f64) -> Result<f64> {
    if x.len() != prob.d {
        return Err(Error::GridMismatch(format!("point has {} coordinates, d = {}", x.len(), prob.d)));
    }
    x.iter().try_fold(1.0, |acc, xi| Ok(acc * analytic_1d(prob, *xi, t)?))
}

/// Samples the analytic solution on the grid at time `t` and normalises it
/// to unit mass.
pub fn analytic_field(prob: &DdeProblem, t: f64) -> Result<GridField> {
    prob.validate()?;
    let axis: Vec<f64> = (0..prob.n_x)
        .map(|j| analytic_1d(prob, prob.coord(j), t))
        .collect::<Result<_>>()?;
    let values = (0..prob.grid_len())
        .map(|i| prob.multi_index(i).iter().map(|&j| axis[j]).product())
        .collect();
    GridField::new(*prob, values, t)?.normalize()
}

pub fn initial_condition(prob: &DdeProblem) -> Result<GridField> {
    analytic_field(prob, prob.t0)
}

/// One FTCS step with periodic wraparound.
pub fn ftcs_apply(p: &GridField) -> Result<GridField> {
    let prob = &p.problem;
    if p.values.len() != prob.grid_len() {
        return Err(Error::GridMismatch(format!(
            "field has {} values, grid has {}",
            p.values.len(),
            prob.grid_len()
        )));
    }
    let (c0, cp, cm) = prob.ftcs_weights();
    let n = prob.n_x;
    let mut out: Vec<f64> = p.values.iter().map(|v| c0 * v).collect();
    let mut stride = 1;
    for _ in 0..prob.d {
        for (i, o) in out.iter_mut().enumerate() {
            let j = (i / stride) % n;
            let base = i - j * stride;
            let up = base + ((j + 1) % n) * stride;
            let down = base + ((j + n - 1) % n) * stride;
            *o += cp * p.values[up] + cm * p.values[down];
        }
        stride *= n;
    }
    Ok(GridField { problem: *prob, values: out, time: p.time + prob.dt(), normalized: false })
}

/// `n_t` FTCS steps from `p0`.
pub fn ftcs_solve(prob: &DdeProblem, p0: &GridField) -> Result<GridField> {
    prob.validate()?;
    let mut p = GridField { problem: *prob, ..p0.clone() };
    p.check_same_grid(p0)?;
    for step in 0..prob.n_t {
        p = ftcs_apply(&p)?;
        if p.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Unstable(format!(
                "non-finite value after step {} (stability number {:.4})",
                step + 1,
                prob.stability_number()
            )));
        }
    }
    p.normalized = p0.normalized && prob.n_t == 0;
    Ok(p)
}

fn eigenvalue_unchecked(prob: &DdeProblem, j: &[usize]) -> C64 {
    let dx = prob.dx();
    let dt = prob.dt();
    let r = 4.0 * prob.diff * dt / (dx * dx);
    let c = prob.a * dt / dx;
    let n = prob.n_x as f64;
    let mut z = C64::new(1.0, 0.0);
    for &jk in j {
        if jk == 0 {
            continue;
        }
        let s = math::sin(math::PI * jk as f64 / n);
        z -= C64::new(r * s * s, -c * math::sin(math::TAU * jk as f64 / n));
    }
    z
}

/// Eigenvalue of the one-step operator at a frequency multi-index.
pub fn eigenvalue(prob: &DdeProblem, j: &[usize]) -> Result<C64> {
    prob.flat_index(j)?;
    Ok(eigenvalue_unchecked(prob, j))
}

/// `Λ^{n_t}` applied in the Fourier basis.
pub fn classical_diag_solve(prob: &DdeProblem, p0: &GridField) -> Result<GridField> {
    prob.validate()?;
    if p0.values.len() != prob.grid_len() {
        return Err(Error::GridMismatch(format!(
            "field has {} values, grid has {}",
            p0.values.len(),
            prob.grid_len()
        )));
    }
    let mut spec = SpectralField::forward(&GridField { problem: *prob, ..p0.clone() })?;
    for (i, v) in spec.values.iter_mut().enumerate() {
        *v *= cpowi(eigenvalue_unchecked(prob, &prob.multi_index(i)), prob.n_t);
    }
    let values = spec.inverse()?.into_iter().map(|z| z.re).collect();
    GridField::new(*prob, values, p0.time + prob.n_t as f64 * prob.dt())
}

/// `max_j |a_j − b_j|`.
pub fn error_inf(a: &GridField, b: &GridField) -> Result<f64> {
    a.check_same_grid(b)?;
    Ok(a.values.iter().zip(&b.values).map(|(x, y)| math::abs(x - y)).fold(0.0, f64::max))
}

/// Dense `N×N` matrix of one step (row-major), for oracle tests on small grids.
pub fn ftcs_matrix(prob: &DdeProblem) -> Result<Vec<f64>> {
    prob.validate()?;
    let n = prob.grid_len();
    let mut m = vec![0.0; n * n];
    for col in 0..n {
        let mut e = vec![0.0; n];
        e[col] = 1.0;
        let out = ftcs_apply(&GridField { problem: *prob, values: e, time: 0.0, normalized: false })?;
        for (row, v) in out.values.iter().enumerate() {
            m[row * n + col] = *v;
        }
    }
    Ok(m)
}
