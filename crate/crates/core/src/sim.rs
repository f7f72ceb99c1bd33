//! Dense statevector simulation, post-selection, seeded sampling and the
//! error bookkeeping of the quantum solver.
//!
//! Basis index bit `k` holds the state of qubit `k`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::circuit::{Axis, Circuit, Gate, GateKind, Kernel, Multiplexor, Op};
use crate::dde::{self, DdeProblem, GridField};
use crate::linalg::{self, Mat2};
use crate::math::{self, C64};
use crate::{Error, Result};

/// Largest width the dense simulator accepts.
pub const MAX_WIDTH: usize = 30;

/// `2^w` complex amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    width: usize,
    amps: Vec<C64>,
}

impl StateVector {
    /// `|0…0⟩` on `width` qubits.
    pub fn zero(width: usize) -> Result<Self> {
        Self::basis(width, 0)
    }

    pub fn basis(width: usize, index: usize) -> Result<Self> {
        if width > MAX_WIDTH {
            return Err(Error::TooWide(width));
        }
        if index >> width != 0 {
            return Err(Error::IndexOutOfRange(format!("basis index {index} on {width} qubits")));
        }
        let mut amps = vec![C64::new(0.0, 0.0); 1 << width];
        amps[index] = C64::new(1.0, 0.0);
        Ok(StateVector { width, amps })
    }

    /// Wraps amplitudes; the vector must have unit norm within `1e-8`.
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        if amps.is_empty() || !amps.len().is_power_of_two() {
            return Err(Error::NotPowerOfTwo(amps.len()));
        }
        let n: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (n - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidInput(format!("state has squared norm {n}")));
        }
        Ok(StateVector { width: amps.len().trailing_zeros() as usize, amps })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        math::sqrt(self.amps.iter().map(|a| a.norm_sqr()).sum())
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Applies one validated gate.
    pub fn apply_gate(&mut self, g: &Gate) -> Result<()> {
        g.validate(self.width)?;
        self.apply_unchecked(g, 0);
        Ok(())
    }

    fn apply_unchecked(&mut self, g: &Gate, off: usize) {
        let q = |i: usize| g.qubits[i] + off;
        match g.kind {
            k if k.is_single_qubit() => self.apply_1q(q(0), &g.matrix_1q()),
            GateKind::CX => self.apply_mcx(&[(q(0), true)], q(1)),
            GateKind::CCX => self.apply_mcx(&[(q(0), true), (q(1), true)], q(2)),
            GateKind::CZ => self.apply_phase_where(&[(q(0), true), (q(1), true)], C64::new(-1.0, 0.0)),
            GateKind::CPhase => self.apply_phase_where(&[(q(0), true), (q(1), true)], math::cis(g.params[0])),
            GateKind::MCX | GateKind::MCZ => {
                let n = g.qubits.len() - 1;
                let ctrls: Vec<(usize, bool)> = (0..n).map(|i| (q(i), g.polarities[i])).collect();
                if g.kind == GateKind::MCX {
                    self.apply_mcx(&ctrls, q(n));
                } else {
                    let mut all = ctrls;
                    all.push((q(n), true));
                    self.apply_phase_where(&all, C64::new(-1.0, 0.0));
                }
            }
            GateKind::SWAP => self.apply_swap(q(0), q(1)),
            _ => self.apply_2q(q(0), q(1), &g.matrix_2q()),
        }
    }

    fn apply_1q(&mut self, t: usize, m: &Mat2) {
        let bit = 1usize << t;
        for i in 0..self.amps.len() {
            if i & bit == 0 {
                let (a, b) = (self.amps[i], self.amps[i | bit]);
                self.amps[i] = m[0][0] * a + m[0][1] * b;
                self.amps[i | bit] = m[1][0] * a + m[1][1] * b;
            }
        }
    }

    fn mask_of(ctrls: &[(usize, bool)]) -> (usize, usize) {
        let mut mask = 0;
        let mut want = 0;
        for &(q, pol) in ctrls {
            mask |= 1 << q;
            if pol {
                want |= 1 << q;
            }
        }
        (mask, want)
    }

    fn apply_mcx(&mut self, ctrls: &[(usize, bool)], t: usize) {
        let (mask, want) = Self::mask_of(ctrls);
        let bit = 1usize << t;
        for i in 0..self.amps.len() {
            if i & bit == 0 && i & mask == want {
                self.amps.swap(i, i | bit);
            }
        }
    }

    fn apply_phase_where(&mut self, bits: &[(usize, bool)], ph: C64) {
        let (mask, want) = Self::mask_of(bits);
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i & mask == want {
                *a *= ph;
            }
        }
    }

    fn apply_swap(&mut self, a: usize, b: usize) {
        let (ba, bb) = (1usize << a, 1usize << b);
        for i in 0..self.amps.len() {
            if i & ba != 0 && i & bb == 0 {
                self.amps.swap(i, (i & !ba) | bb);
            }
        }
    }

    fn apply_2q(&mut self, a: usize, b: usize, m: &[[C64; 4]; 4]) {
        let (ba, bb) = (1usize << a, 1usize << b);
        for i in 0..self.amps.len() {
            if i & (ba | bb) == 0 {
                let idx = [i, i | ba, i | bb, i | ba | bb];
                let v = idx.map(|k| self.amps[k]);
                for (r, &k) in idx.iter().enumerate() {
                    self.amps[k] = m[r][0] * v[0] + m[r][1] * v[1] + m[r][2] * v[2] + m[r][3] * v[3];
                }
            }
        }
    }

    fn apply_multiplexor(&mut self, mx: &Multiplexor, off: usize) {
        let t = 1usize << (mx.target + off);
        let ctrl: Vec<usize> = mx.controls.iter().map(|c| c + off).collect();
        let mats: Vec<Mat2> = mx
            .angles
            .iter()
            .map(|a| match mx.axis {
                Axis::Y => linalg::ry(*a),
                Axis::Z => linalg::rz(*a),
            })
            .collect();
        for i in 0..self.amps.len() {
            if i & t != 0 {
                continue;
            }
            let mut k = 0;
            for (bit, c) in ctrl.iter().enumerate() {
                k |= ((i >> c) & 1) << bit;
            }
            let m = &mats[k];
            let (a, b) = (self.amps[i], self.amps[i | t]);
            self.amps[i] = m[0][0] * a + m[0][1] * b;
            self.amps[i | t] = m[1][0] * a + m[1][1] * b;
        }
    }

    fn apply_kernel(&mut self, k: &Kernel, off: usize) {
        match k {
            Kernel::Multiplexors(ms) => ms.iter().for_each(|m| self.apply_multiplexor(m, off)),
        }
    }

    fn run_ops(&mut self, c: &Circuit, off: usize, adjoint: bool, use_kernels: bool) {
        if use_kernels {
            if let Some(k) = c.kernel() {
                if adjoint {
                    self.apply_kernel(&k.adjoint(), off);
                } else {
                    self.apply_kernel(k, off);
                }
                return;
            }
        }
        let mut step = |op: &Op| match op {
            Op::Gate(g) => {
                if adjoint {
                    self.apply_unchecked(&g.adjoint(), off)
                } else {
                    self.apply_unchecked(g, off)
                }
            }
            Op::Call(call) => self.run_ops(&call.body, off + call.offset, adjoint ^ call.adjoint, use_kernels),
        };
        if adjoint {
            c.ops().iter().rev().for_each(&mut step);
        } else {
            c.ops().iter().for_each(&mut step);
        }
    }
}

/// Simulates `c` starting from `initial` (or `|0…0⟩`), using attached
/// kernels where available.
pub fn run(c: &Circuit, initial: Option<StateVector>) -> Result<StateVector> {
    run_with(c, initial, true)
}

/// As [`run`], optionally forcing gate-by-gate evaluation.
pub fn run_with(c: &Circuit, initial: Option<StateVector>, use_kernels: bool) -> Result<StateVector> {
    let mut s = match initial {
        Some(s) => s,
        None => StateVector::zero(c.width())?,
    };
    if s.width != c.width() {
        return Err(Error::WidthMismatch { expected: c.width(), found: s.width });
    }
    check_ops(c, c.width())?;
    s.run_ops(c, 0, false, use_kernels);
    Ok(s)
}

fn check_ops(c: &Circuit, width: usize) -> Result<()> {
    for op in c.ops() {
        match op {
            Op::Gate(g) => g.validate(width)?,
            Op::Call(call) => {
                if call.offset + call.body.width() > width {
                    return Err(Error::WidthMismatch { expected: width, found: call.offset + call.body.width() });
                }
                check_ops(&call.body, call.body.width())?;
            }
        }
    }
    Ok(())
}

/// Keeps the branch where each `(qubit, bit)` holds; returns the
/// renormalised state and the branch probability.
pub fn postselect(s: &StateVector, pattern: &[(usize, bool)]) -> Result<(StateVector, f64)> {
    for &(q, _) in pattern {
        if q >= s.width {
            return Err(Error::IndexOutOfRange(format!("qubit {q} on {} qubits", s.width)));
        }
    }
    let (mask, want) = StateVector::mask_of(pattern);
    let mut amps = s.amps.clone();
    let mut p = 0.0;
    for (i, a) in amps.iter_mut().enumerate() {
        if i & mask == want {
            p += a.norm_sqr();
        } else {
            *a = C64::new(0.0, 0.0);
        }
    }
    if !(p > 0.0) {
        return Err(Error::ZeroProbability);
    }
    let r = 1.0 / math::sqrt(p);
    for a in &mut amps {
        *a *= r;
    }
    Ok((StateVector { width: s.width, amps }, p))
}

/// Extracts the amplitudes of qubits `start..start+len` on the branch
/// where every other qubit is `|0⟩`, or reads `rest` for them.
pub fn register_amplitudes(s: &StateVector, start: usize, len: usize, rest: usize) -> Vec<C64> {
    (0..1usize << len).map(|k| s.amps[rest | (k << start)]).collect()
}

/// `N` draws from `|amplitude|²` with a seeded ChaCha8 generator.
pub fn sample_shots(s: &StateVector, n: u64, seed: u64) -> BTreeMap<usize, u64> {
    sample_from_probabilities(&s.probabilities(), n, seed)
}

pub fn sample_from_probabilities(p: &[f64], n: u64, seed: u64) -> BTreeMap<usize, u64> {
    let mut cdf = Vec::with_capacity(p.len());
    let mut acc = 0.0;
    for v in p {
        acc += v;
        cdf.push(acc);
    }
    let total = acc;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = BTreeMap::new();
    for _ in 0..n {
        let u: f64 = rng.gen::<f64>() * total;
        let mut i = cdf.partition_point(|c| *c <= u);
        // Skip zero-probability cells that share the cumulative value.
        while i < p.len() && p[i] == 0.0 {
            i += 1;
        }
        let i = i.min(p.len() - 1);
        *counts.entry(i).or_insert(0) += 1;
    }
    counts
}

/// How the shot budget is spent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShotMode {
    /// `N` usable shots drawn from the post-selected branch.
    #[default]
    PostSelected,
    /// `N` shots of the whole register; failures are discarded.
    Raw,
}

/// Outcome of measuring the pipeline output.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementReport {
    /// Probability of the success pattern: exact in post-selected mode,
    /// empirical in raw mode.
    pub success_fraction: f64,
    /// Successful shots by state-register index.
    pub counts: BTreeMap<usize, u64>,
    pub recovered: GridField,
    pub shots: u64,
    pub seed: u64,
    pub mode: ShotMode,
}

/// Measures the pipeline state: success pattern `AA=1`, `flag=0`,
/// `zeros=0`, then the state register.
pub fn measure_pipeline(s: &StateVector, prob: &DdeProblem, shots: u64, seed: u64, mode: ShotMode) -> Result<MeasurementReport> {
    let q = prob.q();
    if s.width != 2 * q + 2 {
        return Err(Error::WidthMismatch { expected: 2 * q + 2, found: s.width });
    }
    let pattern = success_pattern(q);
    let (post, p_success) = postselect(s, &pattern)?;
    let (counts, frac) = match mode {
        ShotMode::PostSelected => {
            let marg: Vec<f64> = register_amplitudes(&post, q + 2, q, 1).iter().map(|a| a.norm_sqr()).collect();
            (sample_from_probabilities(&marg, shots, seed), p_success)
        }
        ShotMode::Raw => {
            let raw = sample_shots(s, shots, seed);
            let mut kept = BTreeMap::new();
            let (mask, want) = StateVector::mask_of(&pattern);
            for (i, c) in raw {
                if i & mask == want {
                    *kept.entry(i >> (q + 2)).or_insert(0) += c;
                }
            }
            let good: u64 = kept.values().sum();
            (kept, good as f64 / shots as f64)
        }
    };
    let recovered = recover_distribution(&counts, prob)?;
    Ok(MeasurementReport { success_fraction: frac, counts, recovered, shots, seed, mode })
}

/// `(qubit, bit)` pairs of the pipeline success branch.
pub fn success_pattern(q: usize) -> Vec<(usize, bool)> {
    let mut p = vec![(0, true), (1, false)];
    p.extend((2..q + 2).map(|z| (z, false)));
    p
}

/// `√(count/total)` per grid point, rescaled to unit mass.
pub fn recover_distribution(counts: &BTreeMap<usize, u64>, prob: &DdeProblem) -> Result<GridField> {
    let total: u64 = counts.values().sum();
    if total == 0 {
        return Err(Error::ZeroProbability);
    }
    let mut values = vec![0.0; prob.grid_len()];
    for (&i, &c) in counts {
        if i >= values.len() {
            return Err(Error::IndexOutOfRange(format!("count index {i} outside grid of {}", values.len())));
        }
        values[i] = math::sqrt(c as f64 / total as f64);
    }
    GridField::new(*prob, values, prob.t0 + prob.t_final)?.normalize()
}

/// Shots required for sup-norm accuracy `eps_q` with failure chance `delta`.
pub fn hoeffding_shots(delta: f64, eps_q: f64) -> Result<u64> {
    if !(delta > 0.0 && delta <= 2.0) {
        return Err(Error::InvalidInput(format!("delta = {delta} outside (0, 2]")));
    }
    if !(eps_q > 0.0 && eps_q.is_finite()) {
        return Err(Error::InvalidInput(format!("eps_q = {eps_q} must be positive")));
    }
    let n = -math::ln(delta / 2.0) / (2.0 * eps_q * eps_q);
    Ok(math::ceil(n.max(0.0)) as u64)
}

/// Failure probability `δ = 2·exp(−2Nε²)` implied by `N` shots.
pub fn hoeffding_delta(n: u64, eps_q: f64) -> f64 {
    (2.0 * math::exp(-2.0 * n as f64 * eps_q * eps_q)).min(2.0)
}

/// `(ε_c, ε_q, ε)` for one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonReport {
    pub eps_c: f64,
    pub eps_q: f64,
    pub eps: f64,
}

pub fn epsilon_report(quantum: &GridField, classical: &GridField, analytic: &GridField) -> Result<EpsilonReport> {
    let eps_c = dde::error_inf(classical, analytic)?;
    let eps_q = dde::error_inf(quantum, classical)?;
    Ok(EpsilonReport { eps_c, eps_q, eps: eps_c + eps_q })
}

/// Dense unitary of a small circuit, column `j` = image of basis state `j`.
pub fn unitary(c: &Circuit) -> Result<Vec<Vec<C64>>> {
    if c.width() > 12 {
        return Err(Error::TooWide(c.width()));
    }
    (0..1usize << c.width())
        .map(|j| Ok(run(c, Some(StateVector::basis(c.width(), j)?))?.amps))
        .collect()
}
