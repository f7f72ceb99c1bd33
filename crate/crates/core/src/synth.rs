//! Circuit generators: state preparation, QFT, FABLE block encoding of a
//! diagonal, amplitude amplification, and the assembled solver pipeline.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::circuit::{Axis, Circuit, Gate, Kernel, Multiplexor, Tag};
use crate::dde::{self, cpowi, DdeProblem, EigenSpectrum};
use crate::math::{self, C64};
use crate::sim;
use crate::{Error, Result};

/// Walsh coefficients below this magnitude are treated as exact zeros.
const ZERO_COEFF: f64 = 1e-12;

/// In-place fast Walsh–Hadamard transform scaled by `1/n`, giving
/// `ĉ(m) = (1/n)·Σ_x c(x)·(−1)^{m·x}`.
pub fn walsh_coefficients(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    let n = v.len();
    let mut h = 1;
    while h < n {
        for start in (0..n).step_by(2 * h) {
            for k in start..start + h {
                let (a, b) = (v[k], v[k + h]);
                v[k] = a + b;
                v[k + h] = a - b;
            }
        }
        h *= 2;
    }
    let s = 1.0 / n as f64;
    v.iter_mut().for_each(|x| *x *= s);
    v
}

/// Inverse of [`walsh_coefficients`].
pub fn walsh_reconstruct(coeffs: &[f64]) -> Vec<f64> {
    let n = coeffs.len() as f64;
    walsh_coefficients(coeffs).into_iter().map(|x| x * n).collect()
}

fn gray_rank(mut g: u64) -> u64 {
    let mut r = 0;
    while g != 0 {
        r ^= g;
        g >>= 1;
    }
    r
}

/// One rotation axis worth of `(mask, coefficient)` terms.
struct Chain {
    axis: Axis,
    terms: Vec<(u64, f64)>,
}

/// Emits a product of multiplexed rotations on `target` as rotations
/// interleaved with CX gates. Each chain's terms are visited in Gray-code
/// order of their control masks; the CX pattern only tracks parity changes,
/// so consecutive chains share CX gates and the target is restored at the end.
fn emit_chains(chains: &[Chain], target: usize, controls: &[usize], tag: Tag, out: &mut Vec<Gate>) {
    let mut mask: u64 = 0;
    let mut to = |m: u64, out: &mut Vec<Gate>| {
        let diff = mask ^ m;
        for (bit, &c) in controls.iter().enumerate() {
            if diff >> bit & 1 == 1 {
                out.push(Gate::cx(c, target).tagged(tag));
            }
        }
        mask = m;
    };
    for ch in chains {
        let mut terms: Vec<&(u64, f64)> = ch.terms.iter().collect();
        terms.sort_by_key(|t| gray_rank(t.0));
        for &&(m, theta) in &terms {
            to(m, out);
            out.push(match ch.axis {
                Axis::Y => Gate::ry(target, theta),
                Axis::Z => Gate::rz(target, theta),
            }
            .tagged(tag));
        }
    }
    to(0, out);
}

/// Gates of a single multiplexed rotation, dropping zero Walsh terms.
pub fn multiplexed_rotation(axis: Axis, target: usize, controls: &[usize], angles: &[f64], tag: Tag) -> Result<Vec<Gate>> {
    if angles.len() != 1usize << controls.len() {
        return Err(Error::InvalidInput(format!(
            "{} angles for {} controls",
            angles.len(),
            controls.len()
        )));
    }
    let terms = walsh_coefficients(angles)
        .into_iter()
        .enumerate()
        .filter(|(_, c)| math::abs(*c) > ZERO_COEFF)
        .map(|(m, c)| (m as u64, c))
        .collect();
    let mut out = Vec::new();
    emit_chains(&[Chain { axis, terms }], target, controls, tag, &mut out);
    Ok(out)
}

fn push_all(c: &mut Circuit, gates: Vec<Gate>) -> Result<()> {
    for g in gates {
        c.append(g)?;
    }
    Ok(())
}

fn check_amplitudes(amps: &[f64], q: usize) -> Result<()> {
    if amps.len() != 1usize << q {
        return Err(Error::InvalidInput(format!("{} amplitudes for {q} qubits", amps.len())));
    }
    if amps.iter().any(|a| !a.is_finite() || *a < 0.0) {
        return Err(Error::InvalidInput("amplitudes must be finite and non-negative".into()));
    }
    let n: f64 = amps.iter().map(|a| a * a).sum();
    if (math::sqrt(n) - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidInput(format!("amplitudes have 2-norm {}", math::sqrt(n))));
    }
    Ok(())
}

/// Uniformly controlled RY cascade on `qubits` (little-endian order).
fn naive_gates(amps: &[f64], qubits: &[usize]) -> Vec<Gate> {
    let q = qubits.len();
    let mut out = Vec::new();
    for t in (0..q).rev() {
        let n_ctrl = q - 1 - t;
        let mut angles = vec![0.0; 1 << n_ctrl];
        for (k, angle) in angles.iter_mut().enumerate() {
            let (mut n0, mut n1) = (0.0, 0.0);
            for low in 0..1usize << t {
                let base = (k << (t + 1)) | low;
                n0 += amps[base] * amps[base];
                n1 += amps[base | 1 << t] * amps[base | 1 << t];
            }
            *angle = 2.0 * math::atan2(math::sqrt(n1), math::sqrt(n0));
        }
        let controls = &qubits[t + 1..];
        // Angle vectors always have a power-of-two length here.
        out.extend(multiplexed_rotation(Axis::Y, qubits[t], controls, &angles, Tag::StatePrep).expect("sized above"));
    }
    out
}

/// Binary-tree RY state preparation of a non-negative unit vector.
pub fn synth_state_prep_naive(amps: &[f64], q: usize) -> Result<Circuit> {
    check_amplitudes(amps, q)?;
    let qubits: Vec<usize> = (0..q).collect();
    let mut c = Circuit::new(q);
    push_all(&mut c, naive_gates(amps, &qubits))?;
    Ok(c)
}

/// Relative tolerance of the rank-one tests.
const RANK_TOL: f64 = 1e-10;
/// Amplitudes below this are treated as zero by the low-rank path.
const PRUNE: f64 = 1e-14;

/// Splits `v` (row index = high part) into a rank-one factorisation
/// `v[lo + hi·n_lo] = a[lo]·b[hi]` when one exists.
fn rank_one_split(v: &[f64], n_lo: usize) -> Option<(Vec<f64>, Vec<f64>)> {
    let n_hi = v.len() / n_lo;
    let (piv, &pv) = v.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
    if pv <= 0.0 {
        return None;
    }
    let (pl, ph) = (piv % n_lo, piv / n_lo);
    let a: Vec<f64> = (0..n_lo).map(|l| v[l + ph * n_lo]).collect();
    let b: Vec<f64> = (0..n_hi).map(|h| v[pl + h * n_lo] / pv).collect();
    for h in 0..n_hi {
        for l in 0..n_lo {
            if math::abs(v[l + h * n_lo] - a[l] * b[h]) > RANK_TOL * pv {
                return None;
            }
        }
    }
    let na = math::sqrt(a.iter().map(|x| x * x).sum());
    let nb = math::sqrt(b.iter().map(|x| x * x).sum());
    Some((a.iter().map(|x| x / na).collect(), b.iter().map(|x| x / nb).collect()))
}

/// Recursive preparation of one register, exploiting product structure
/// across qubit halves and two-term supports.
fn lowrank_block(v: &[f64], qubits: &[usize]) -> Vec<Gate> {
    let support: Vec<usize> = (0..v.len()).filter(|&i| v[i] != 0.0).collect();
    let tag = Tag::StatePrep;
    if support.len() == 1 {
        let i = support[0];
        return qubits.iter().enumerate().filter(|(b, _)| i >> b & 1 == 1).map(|(_, &q)| Gate::x(q).tagged(tag)).collect();
    }
    if qubits.len() == 1 {
        return naive_gates(v, qubits);
    }
    if support.len() == 2 {
        let (i, j) = (support[0], support[1]);
        let diff = i ^ j;
        let carrier = usize::BITS as usize - 1 - diff.leading_zeros() as usize;
        let (i0, i1) = if i >> carrier & 1 == 0 { (i, j) } else { (j, i) };
        let mut out = vec![Gate::ry(qubits[carrier], 2.0 * math::atan2(v[i1], v[i0])).tagged(tag)];
        for (b, &q) in qubits.iter().enumerate() {
            if b != carrier && i0 >> b & 1 == 1 {
                out.push(Gate::x(q).tagged(tag));
            }
        }
        for (b, &q) in qubits.iter().enumerate() {
            if b != carrier && diff >> b & 1 == 1 {
                out.push(Gate::cx(qubits[carrier], q).tagged(tag));
            }
        }
        return out;
    }
    let k_lo = qubits.len() / 2;
    if let Some((lo, hi)) = rank_one_split(v, 1 << k_lo) {
        let mut out = lowrank_block(&lo, &qubits[..k_lo]);
        out.extend(lowrank_block(&hi, &qubits[k_lo..]));
        return out;
    }
    naive_gates(v, qubits)
}

/// State preparation that factorises the `d` axis blocks first and then
/// exploits structure inside each block; falls back to the naive cascade
/// when the axis blocks are entangled.
pub fn synth_state_prep_lowrank(amps: &[f64], d: usize, n_x: usize) -> Result<Circuit> {
    if d == 0 || n_x < 2 || !n_x.is_power_of_two() {
        return Err(Error::InvalidInput(format!("invalid grid d={d}, n_x={n_x}")));
    }
    let m = n_x.trailing_zeros() as usize;
    let q = d * m;
    check_amplitudes(amps, q)?;
    let pruned: Vec<f64> = amps.iter().map(|a| if *a < PRUNE { 0.0 } else { *a }).collect();
    let mut factors = Vec::with_capacity(d);
    let mut rest = pruned.clone();
    for _ in 1..d {
        match rank_one_split(&rest, n_x) {
            Some((axis, tail)) => {
                factors.push(axis);
                rest = tail;
            }
            None => return synth_state_prep_naive(amps, q),
        }
    }
    factors.push(rest);
    let mut c = Circuit::new(q);
    for (k, f) in factors.iter().enumerate() {
        let qubits: Vec<usize> = (k * m..(k + 1) * m).collect();
        push_all(&mut c, lowrank_block(f, &qubits))?;
    }
    Ok(c)
}

/// Textbook QFT with kernel `e^{+2πi xy/2^q}`, including the final
/// bit-reversal SWAPs.
pub fn synth_qft(q: usize) -> Result<Circuit> {
    if q == 0 {
        return Err(Error::InvalidInput("QFT needs at least one qubit".into()));
    }
    let mut c = Circuit::new(q);
    for t in (0..q).rev() {
        c.append(Gate::h(t).tagged(Tag::QFT))?;
        for ctl in (0..t).rev() {
            let angle = math::PI / (1u64 << (t - ctl)) as f64;
            c.append(Gate::cphase(ctl, t, angle).tagged(Tag::QFT))?;
        }
    }
    for k in 0..q / 2 {
        c.append(Gate::swap(k, q - 1 - k).tagged(Tag::QFT))?;
    }
    Ok(c)
}

pub fn synth_iqft(q: usize) -> Result<Circuit> {
    Ok(synth_qft(q)?.inverse().retagged(Tag::IQFT))
}

/// Diagonal to block-encode.
#[derive(Debug, Clone, PartialEq)]
pub struct FableSpec {
    pub q: usize,
    pub entries: Vec<C64>,
    /// Budget for `‖Λ̃ − Λ‖₂`.
    pub tolerance: f64,
    pub alpha: f64,
}

impl FableSpec {
    pub fn validate(&self) -> Result<()> {
        if self.entries.len() != 1usize << self.q {
            return Err(Error::InvalidInput(format!("{} entries for q = {}", self.entries.len(), self.q)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidInput(format!("tolerance {} must be positive", self.tolerance)));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidInput(format!("alpha {} must be positive", self.alpha)));
        }
        if let Some(e) = self.entries.iter().find(|e| !(e.norm() <= self.alpha * (1.0 + 1e-12))) {
            return Err(Error::InvalidInput(format!("entry {e} exceeds alpha {}", self.alpha)));
        }
        Ok(())
    }
}

/// `λᵢ^{n_t}` for every eigenvalue, with `α = max |λᵢ^{n_t}|`.
pub fn diag_power(spectrum: &EigenSpectrum, n_t: usize, tolerance: f64) -> Result<FableSpec> {
    let entries: Vec<C64> = spectrum.lambda.iter().map(|l| cpowi(*l, n_t)).collect();
    let alpha = entries.iter().map(|e| e.norm()).fold(0.0, f64::max);
    let len = entries.len();
    if !len.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(len));
    }
    let spec = FableSpec { q: len.trailing_zeros() as usize, entries, tolerance, alpha };
    spec.validate()?;
    Ok(spec)
}

/// A synthesised block encoding and its bookkeeping.
#[derive(Debug, Clone)]
pub struct FableBlock {
    pub circuit: Circuit,
    /// The post-selected block equals `diag(λ̃)/subnormalization`.
    pub subnormalization: f64,
    /// `‖Λ̃ − Λ‖₂` actually achieved.
    pub encoding_error: f64,
    /// Encoded diagonal after compression.
    pub encoded: Vec<C64>,
    pub rotations: usize,
    pub cnots: usize,
    /// Walsh groups of the magnitude multiplexor kept, out of `2^q`.
    pub kept_magnitude_groups: usize,
    pub kept_phase_terms: usize,
}

/// Rotation count of the uncompressed complex construction, `2·4^q`.
pub fn fable_uncompressed_rotations(q: usize) -> usize {
    2 << (2 * q)
}

struct FableCoeffs {
    /// `ĝ(w)` for the diagonal offsets `g(i) = θᵢ − π`.
    mag: Vec<f64>,
    /// `ĥ(u)` for the phases.
    phase: Vec<f64>,
}

fn reconstruct(coeffs: &FableCoeffs, cutoff: f64) -> (Vec<f64>, Vec<f64>) {
    let keep = |v: &[f64]| v.iter().map(|c| if math::abs(*c) >= cutoff && math::abs(*c) > ZERO_COEFF { *c } else { 0.0 }).collect::<Vec<_>>();
    let theta = walsh_reconstruct(&keep(&coeffs.mag)).into_iter().map(|g| g + math::PI).collect();
    let phi = walsh_reconstruct(&keep(&coeffs.phase));
    (theta, phi)
}

fn encoded_diag(theta: &[f64], phi: &[f64], alpha: f64) -> Vec<C64> {
    theta.iter().zip(phi).map(|(t, p)| math::cis(-p / 2.0) * (alpha * math::cos(t / 2.0))).collect()
}

fn diag_error(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// FABLE block encoding of a diagonal on `{flag, zeros(q), state(q)}`.
///
/// The oracle rotates the flag by `θ(i, j)` (RY) and `φ(i)` (RZ), where `i`
/// and `j` are the zeros and state register values: `θ = π` off the diagonal
/// and `2·arccos(|λᵢ|/α)` on it, `φ = −2·arg λᵢ`. Sandwiched between
/// `H^{⊗q}` on zeros and the zeros/state SWAP layer this gives the block
/// `diag(λ)/(α·2^q)`. Walsh coefficients of the magnitude multiplexor come
/// in groups of `2^q` that only move the diagonal, so compression drops
/// whole groups and the phase terms below a cutoff, taking the largest
/// cutoff within the tolerance.
pub fn synth_fable(spec: &FableSpec) -> Result<FableBlock> {
    spec.validate()?;
    let q = spec.q;
    let n = 1usize << q;
    let target: Vec<C64> = spec.entries.clone();
    let g: Vec<f64> = target
        .iter()
        .map(|e| 2.0 * math::acos((e.norm() / spec.alpha).min(1.0)) - math::PI)
        .collect();
    let h: Vec<f64> = target.iter().map(|e| if e.norm() > 0.0 { -2.0 * e.arg() } else { 0.0 }).collect();
    let coeffs = FableCoeffs { mag: walsh_coefficients(&g), phase: walsh_coefficients(&h) };

    let err_at = |cut: f64| {
        let (t, p) = reconstruct(&coeffs, cut);
        diag_error(&encoded_diag(&t, &p, spec.alpha), &target)
    };
    let mut cands: Vec<f64> = coeffs.mag.iter().chain(&coeffs.phase).map(|c| math::abs(*c)).filter(|c| *c > ZERO_COEFF).collect();
    cands.sort_by(f64::total_cmp);
    cands.dedup();
    // Cutting at cands[k] drops every coefficient smaller than it.
    let (mut lo, mut hi) = (0usize, cands.len());
    while lo < hi {
        let mid = (lo + hi).div_ceil(2);
        let cut = if mid == cands.len() { f64::INFINITY } else { cands[mid] };
        if err_at(cut) <= spec.tolerance {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    let mut cutoff = if lo == 0 { 0.0 } else if lo == cands.len() { f64::INFINITY } else { cands[lo] };
    if err_at(cutoff) > spec.tolerance {
        cutoff = 0.0;
    }
    let (theta, phi) = reconstruct(&coeffs, cutoff);
    let encoded = encoded_diag(&theta, &phi, spec.alpha);
    let encoding_error = diag_error(&encoded, &target);

    // Controls: zeros register first (bits 0..q), then state (bits q..2q).
    let flag = 0;
    let controls: Vec<usize> = (1..=2 * q).collect();
    let keep = |c: f64| math::abs(c) >= cutoff && math::abs(c) > ZERO_COEFF;
    let scale = 1.0 / n as f64;
    let mut mag_terms = Vec::new();
    let mut groups = 0;
    for (w, &c) in coeffs.mag.iter().enumerate() {
        if !keep(c) {
            continue;
        }
        groups += 1;
        for u in 0..n {
            mag_terms.push(((u | (u ^ w) << q) as u64, c * scale));
        }
    }
    match mag_terms.iter_mut().find(|t| t.0 == 0) {
        Some(t) => t.1 += math::PI,
        None => mag_terms.push((0, math::PI)),
    }
    let phase_terms: Vec<(u64, f64)> = coeffs.phase.iter().enumerate().filter(|(_, c)| keep(**c)).map(|(u, c)| (u as u64, *c)).collect();
    let kept_phase_terms = phase_terms.len();

    let mut oracle_gates = Vec::new();
    let chains = [Chain { axis: Axis::Y, terms: mag_terms }, Chain { axis: Axis::Z, terms: phase_terms }];
    emit_chains(&chains, flag, &controls, Tag::FABLE, &mut oracle_gates);
    let rotations = chains.iter().map(|c| c.terms.len()).sum();
    let cnots = oracle_gates.len() - rotations;
    let mut oracle = Circuit::fable_layout(q);
    push_all(&mut oracle, oracle_gates)?;
    // The closed form is only materialised when it stays small.
    if 2 * q <= 20 {
        let mut ry = vec![math::PI; n * n];
        for i in 0..n {
            ry[i | i << q] = theta[i];
        }
        oracle.set_kernel(Some(Kernel::Multiplexors(vec![
            Multiplexor { axis: Axis::Y, target: flag, controls: controls.clone(), angles: ry },
            Multiplexor { axis: Axis::Z, target: flag, controls: controls[..q].to_vec(), angles: phi },
        ])));
    }

    let mut c = Circuit::fable_layout(q);
    for z in 1..=q {
        c.append(Gate::h(z).tagged(Tag::FABLE))?;
    }
    c.call(Arc::new(oracle), 0, false, None)?;
    for k in 0..q {
        c.append(Gate::swap(1 + k, 1 + q + k).tagged(Tag::FABLE))?;
    }
    for z in 1..=q {
        c.append(Gate::h(z).tagged(Tag::FABLE))?;
    }
    Ok(FableBlock {
        circuit: c,
        subnormalization: spec.alpha * n as f64,
        encoding_error,
        encoded,
        rotations,
        cnots,
        kept_magnitude_groups: groups,
        kept_phase_terms,
    })
}

/// How many amplification rounds to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OaaMode {
    /// `⌊(4√n_t)^{d/2}⌋`.
    #[default]
    PaperCount,
    /// `⌊π/(4θ̂) − 1/2⌋` with `sin(θ̂/2)` the un-amplified success amplitude.
    OracleCount,
}

/// `⌊(4√n_t)^{d/2}⌋`.
pub fn paper_repetitions(d: usize, n_t: usize) -> usize {
    let v = math::powf(4.0 * math::sqrt(n_t as f64), d as f64 / 2.0);
    // Guard perfect powers against rounding just below an integer.
    math::floor(v + 1e-9) as usize
}

/// `⌊π/(4θ̂) − 1/2⌋` for `sin(θ̂/2) = amplitude`, floored at zero.
pub fn oracle_repetitions_from_amplitude(amplitude: f64) -> usize {
    let a = amplitude.clamp(0.0, 1.0);
    if a == 0.0 {
        return 0;
    }
    let theta = 2.0 * math::asin(a);
    let k = math::floor(math::PI / (4.0 * theta) - 0.5);
    if k > 0.0 {
        k as usize
    } else {
        0
    }
}

/// Resolves the amplification count. `OracleCount` simulates the circuit
/// up to and including one uncompensated block encoding.
pub fn oaa_repetitions(prob: &DdeProblem, mode: OaaMode) -> Result<usize> {
    prob.validate()?;
    match mode {
        OaaMode::PaperCount => Ok(paper_repetitions(prob.d, prob.n_t)),
        OaaMode::OracleCount => {
            if prob.n_t == 0 {
                return Ok(0);
            }
            let spec = PipelineSpec { oaa_repetitions: Some(0), oaa_compensation: false, ..PipelineSpec::new(*prob) };
            let p = assemble_pipeline(&spec)?;
            if p.circuit.width() > sim::MAX_WIDTH {
                return Err(Error::TooWide(p.circuit.width()));
            }
            let s = sim::run(&p.circuit, None)?;
            let (_, prob_success) = sim::postselect(&s, &sim::success_pattern(prob.q()))?;
            Ok(oracle_repetitions_from_amplitude(math::sqrt(prob_success)))
        }
    }
}

/// Amplitude amplification around a block encoding on `{flag, zeros, state}`.
///
/// Output width is `2q + 2` with the AA flag on qubit 0. The flag is first
/// set when flag and zeros read all-zero; each round is
/// `Z, MCX, FABLE†, MCX, MCZ, MCX, FABLE, MCX` with the multi-controlled
/// gates targeting the AA flag and open-controlled on flag and zeros.
pub fn synth_oaa(fable: &Circuit, q: usize, reps: usize) -> Result<Circuit> {
    if fable.width() != 2 * q + 1 {
        return Err(Error::WidthMismatch { expected: 2 * q + 1, found: fable.width() });
    }
    let body = Arc::new(fable.clone());
    let mut c = Circuit::pipeline_layout(q);
    let ctrls: Vec<(usize, bool)> = (1..q + 2).map(|i| (i, false)).collect();
    let mcx = || Gate::mcx(&ctrls, 0).tagged(Tag::OAA);
    c.append(mcx())?;
    for _ in 0..reps {
        c.append(Gate::z(0).tagged(Tag::OAA))?;
        c.append(mcx())?;
        c.call(body.clone(), 1, true, Some(Tag::OAA))?;
        c.append(mcx())?;
        c.append(Gate::mcz(&ctrls, 0).tagged(Tag::OAA))?;
        c.append(mcx())?;
        c.call(body.clone(), 1, false, Some(Tag::OAA))?;
        c.append(mcx())?;
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StatePrepMethod {
    #[default]
    Naive,
    LowRank,
}

/// Everything needed to build the solver circuit.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSpec {
    pub problem: DdeProblem,
    pub state_prep: StatePrepMethod,
    pub oaa_mode: OaaMode,
    /// Explicit repetition count; `None` resolves through `oaa_mode`.
    pub oaa_repetitions: Option<usize>,
    /// FABLE budget; `None` uses the discretisation error `ε_c`.
    pub fable_tolerance: Option<f64>,
    /// Pre-distort encoded magnitudes so the amplified output stays
    /// proportional to `Λ^{n_t}` (amplification is nonlinear in them).
    pub oaa_compensation: bool,
}

impl PipelineSpec {
    pub fn new(problem: DdeProblem) -> Self {
        PipelineSpec {
            problem,
            state_prep: StatePrepMethod::Naive,
            oaa_mode: OaaMode::PaperCount,
            oaa_repetitions: None,
            fable_tolerance: None,
            oaa_compensation: true,
        }
    }
}

/// The assembled circuit with the quantities used to build it.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub circuit: Circuit,
    pub q: usize,
    pub repetitions: usize,
    pub fable: FableBlock,
    pub fable_tolerance: f64,
    /// Diagonal in QFT index order before any compensation.
    pub diagonal: Vec<C64>,
}

/// Index map from QFT output order to DFT bin: the textbook QFT uses the
/// `+i` kernel, so QFT basis state `y` carries DFT bin `−y` on every axis.
pub fn qft_bin(prob: &DdeProblem, y: usize) -> usize {
    let n = prob.n_x;
    prob.multi_index(y).iter().rev().fold(0, |acc, &j| acc * n + (n - j) % n)
}

/// `κ·|λ|` target magnitudes turned into pre-amplification magnitudes.
fn compensate(entries: &[C64], alpha: f64, q: usize, reps: usize) -> Vec<C64> {
    let n = (1u64 << q) as f64;
    let k = (2 * reps + 1) as f64;
    let kappa = math::sin((k * math::asin(1.0 / n)).min(math::FRAC_PI_2));
    entries
        .iter()
        .map(|e| {
            let m = (n * math::sin(math::asin((kappa * e.norm() / alpha).min(1.0)) / k)).min(1.0);
            let ph = if e.norm() > 0.0 { *e / e.norm() } else { C64::new(1.0, 0.0) };
            ph * (m * alpha)
        })
        .collect()
}

/// Builds state preparation, per-axis QFT, FABLE, amplification and
/// per-axis inverse QFT on the `{AA_flag, flag, zeros, state}` layout.
pub fn assemble_pipeline(spec: &PipelineSpec) -> Result<Pipeline> {
    let prob = &spec.problem;
    prob.validate()?;
    let q = prob.q();
    let m = prob.qubits_per_axis();
    let reps = match spec.oaa_repetitions {
        Some(r) => r,
        None => oaa_repetitions(prob, spec.oaa_mode)?,
    };
    let tol = match spec.fable_tolerance {
        Some(t) => t,
        None => discretization_error(prob)?,
    };
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("FABLE tolerance {tol} must be positive")));
    }

    let p0 = dde::initial_condition(prob)?;
    let norm = p0.l2_norm();
    let amps: Vec<f64> = p0.values.iter().map(|v| v / norm).collect();
    let prep = match spec.state_prep {
        StatePrepMethod::Naive => synth_state_prep_naive(&amps, q)?,
        StatePrepMethod::LowRank => synth_state_prep_lowrank(&amps, prob.d, prob.n_x)?,
    };

    let spectrum = EigenSpectrum::of(prob)?;
    let powered = diag_power(&spectrum, prob.n_t, tol)?;
    let diagonal: Vec<C64> = (0..1usize << q).map(|y| powered.entries[qft_bin(prob, y)]).collect();
    let entries = if spec.oaa_compensation { compensate(&diagonal, powered.alpha, q, reps) } else { diagonal.clone() };
    let fable = synth_fable(&FableSpec { q, entries, tolerance: tol, alpha: powered.alpha })?;
    let oaa = synth_oaa(&fable.circuit, q, reps)?;

    let mut c = Circuit::pipeline_layout(q);
    let state0 = q + 2;
    c.extend_from(&prep, state0)?;
    let qft = Arc::new(synth_qft(m)?);
    let iqft = Arc::new(synth_iqft(m)?);
    for k in 0..prob.d {
        c.call(qft.clone(), state0 + k * m, false, None)?;
    }
    c.call(Arc::new(fable.circuit.clone()), 1, false, None)?;
    c.extend_from(&oaa, 0)?;
    for k in 0..prob.d {
        c.call(iqft.clone(), state0 + k * m, false, None)?;
    }
    Ok(Pipeline { circuit: c, q, repetitions: reps, fable, fable_tolerance: tol, diagonal })
}

/// `ε_c = ‖classical_diag_solve − analytic(T)‖_∞`.
pub fn discretization_error(prob: &DdeProblem) -> Result<f64> {
    let p0 = dde::initial_condition(prob)?;
    let classical = dde::classical_diag_solve(prob, &p0)?;
    let analytic = dde::analytic_field(prob, prob.t0 + prob.t_final)?;
    dde::error_inf(&classical, &analytic)
}

/// State-register amplitudes on the success branch, unnormalised.
pub fn success_register(s: &sim::StateVector, q: usize) -> Vec<C64> {
    sim::register_amplitudes(s, q + 2, q, 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{postselect, run, run_with, unitary, StateVector};
    use proptest::prelude::*;
    use std::vec::Vec as SVec;

    fn lcg(seed: u64) -> impl FnMut() -> f64 {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        }
    }

    fn random_unit(n: usize, seed: u64) -> SVec<f64> {
        let mut r = lcg(seed);
        let v: SVec<f64> = (0..n).map(|_| r()).collect();
        let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter().map(|x| x / nrm).collect()
    }

    fn fidelity(c: &Circuit, amps: &[f64]) -> f64 {
        let s = run(c, None).unwrap();
        s.amplitudes().iter().zip(amps).map(|(a, b)| a * *b).sum::<C64>().norm()
    }

    #[test]
    fn walsh_round_trip_and_basis() {
        let v = [1.0, 2.0, -0.5, 4.0];
        let c = walsh_coefficients(&v);
        assert!((c[0] - 6.5 / 4.0).abs() < 1e-15);
        let back = walsh_reconstruct(&c);
        for (a, b) in back.iter().zip(&v) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn qft_matches_dft_kernel() {
        for q in 1..=5 {
            let u = unitary(&synth_qft(q).unwrap()).unwrap();
            let n = 1usize << q;
            for (j, col) in u.iter().enumerate() {
                for (y, v) in col.iter().enumerate() {
                    let e = math::cis(math::TAU * (j * y % n) as f64 / n as f64) / math::sqrt(n as f64);
                    assert!((v - e).norm() < 1e-12, "q={q} j={j} y={y}");
                }
            }
        }
    }

    #[test]
    fn iqft_inverts_qft() {
        let c = synth_qft(4).unwrap().compose(&synth_iqft(4).unwrap()).unwrap();
        let u = unitary(&c).unwrap();
        for (j, col) in u.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((v - e).norm() < 1e-12);
            }
        }
        assert!(synth_iqft(4).unwrap().gates().iter().all(|g| g.tag == Tag::IQFT));
    }

    #[test]
    fn naive_prep_fidelity() {
        for q in 1..=6 {
            let a = random_unit(1 << q, q as u64);
            let c = synth_state_prep_naive(&a, q).unwrap();
            assert!((fidelity(&c, &a) - 1.0).abs() < 1e-10, "q={q}");
            assert!(c.gates().iter().all(|g| g.tag == Tag::StatePrep));
        }
    }

    #[test]
    fn prep_rejects_bad_input() {
        assert!(synth_state_prep_naive(&[1.0, 0.0, 0.0], 2).is_err());
        assert!(synth_state_prep_naive(&[0.5, 0.5, 0.5, 0.6], 2).is_err());
        assert!(synth_state_prep_naive(&[-0.6, 0.8], 1).is_err());
    }

    #[test]
    fn lowrank_prep_fidelity_on_initial_conditions() {
        for (d, n_x) in [(1, 8), (1, 16), (2, 4), (2, 8), (3, 4)] {
            let p = DdeProblem::table2(d, n_x, 20.0);
            let f = dde::initial_condition(&p).unwrap();
            let nrm = f.l2_norm();
            let a: SVec<f64> = f.values.iter().map(|v| v / nrm).collect();
            let q = p.q();
            let lr = synth_state_prep_lowrank(&a, d, n_x).unwrap();
            let nv = synth_state_prep_naive(&a, q).unwrap();
            assert!((fidelity(&lr, &a) - 1.0).abs() < 1e-9, "d={d} n_x={n_x}");
            assert!(lr.depth() <= nv.depth(), "d={d} n_x={n_x}: {} > {}", lr.depth(), nv.depth());
        }
    }

    #[test]
    fn lowrank_prep_sparse_states() {
        let mut a = vec![0.0; 16];
        a[5] = 1.0;
        let c = synth_state_prep_lowrank(&a, 1, 16).unwrap();
        assert!((fidelity(&c, &a) - 1.0).abs() < 1e-12);
        assert!(c.gates().iter().all(|g| g.kind == crate::circuit::GateKind::X));
        let mut b = vec![0.0; 16];
        b[3] = 0.6;
        b[12] = 0.8;
        let c = synth_state_prep_lowrank(&b, 1, 16).unwrap();
        assert!((fidelity(&c, &b) - 1.0).abs() < 1e-12);
        let r = random_unit(64, 3);
        let c = synth_state_prep_lowrank(&r, 2, 8).unwrap();
        assert!((fidelity(&c, &r) - 1.0).abs() < 1e-10);
    }

    fn random_diag(q: usize, seed: u64) -> (SVec<C64>, f64) {
        let mut r = lcg(seed);
        let e: SVec<C64> = (0..1 << q).map(|_| math::cis(math::TAU * r()) * (0.1 + 0.9 * r())).collect();
        let alpha = e.iter().map(|x| x.norm()).fold(0.0, f64::max);
        (e, alpha)
    }

    /// Post-selected block: rows are outputs on the state register.
    fn block(f: &FableBlock, q: usize, kernels: bool) -> SVec<SVec<C64>> {
        let mut cols = SVec::new();
        for j in 0..1usize << q {
            let s0 = StateVector::basis(2 * q + 1, j << (q + 1)).unwrap();
            let s = run_with(&f.circuit, Some(s0), kernels).unwrap();
            cols.push(sim::register_amplitudes(&s, q + 1, q, 0));
        }
        cols
    }

    #[test]
    fn fable_block_is_scaled_diagonal() {
        for q in 1..=3 {
            let (entries, alpha) = random_diag(q, 10 + q as u64);
            let f = synth_fable(&FableSpec { q, entries: entries.clone(), tolerance: 1e-12, alpha }).unwrap();
            assert!((f.subnormalization - alpha * (1 << q) as f64).abs() < 1e-12);
            let b = block(&f, q, false);
            for (j, col) in b.iter().enumerate() {
                for (i, v) in col.iter().enumerate() {
                    let e = if i == j { entries[j] / f.subnormalization } else { C64::new(0.0, 0.0) };
                    assert!((v - e).norm() < 1e-8, "q={q} ({i},{j}): {v} vs {e}");
                }
            }
            assert!(f.encoding_error < 1e-12);
        }
    }

    #[test]
    fn fable_kernel_matches_gates() {
        let q = 3;
        let (entries, alpha) = random_diag(q, 77);
        let f = synth_fable(&FableSpec { q, entries, tolerance: 1e-3, alpha }).unwrap();
        assert!(f.circuit.ops().iter().any(|o| matches!(o, crate::circuit::Op::Call(c) if c.body.kernel().is_some())));
        let a = block(&f, q, true);
        let b = block(&f, q, false);
        for (x, y) in a.iter().flatten().zip(b.iter().flatten()) {
            assert!((x - y).norm() < 1e-10);
        }
    }

    #[test]
    fn constant_diagonal_cost() {
        // Off-diagonal positions of the 2q-control angle table are π, so a
        // constant diagonal is not a constant angle vector.
        let q = 3;
        let f = synth_fable(&FableSpec { q, entries: vec![C64::new(0.5, 0.0); 1 << q], tolerance: 1e-12, alpha: 0.5 }).unwrap();
        assert_eq!(f.rotations, 1 << q);
        assert!(f.encoding_error < 1e-12);
    }

    #[test]
    fn fable_compression_respects_budget() {
        let p = DdeProblem::table2(1, 16, 20.0);
        let sp = EigenSpectrum::of(&p).unwrap();
        let full = synth_fable(&diag_power(&sp, p.n_t, 1e-12).unwrap()).unwrap();
        for tol in [1e-6, 1e-3, 1e-2, 1e-1] {
            let spec = diag_power(&sp, p.n_t, tol).unwrap();
            let f = synth_fable(&spec).unwrap();
            assert!(f.encoding_error <= tol * (1.0 + 1e-9), "tol {tol}: {}", f.encoding_error);
            assert!(f.rotations <= full.rotations);
            let b = block(&f, p.q(), true);
            for (j, col) in b.iter().enumerate() {
                let e = f.encoded[j] / f.subnormalization;
                assert!((col[j] - e).norm() < 1e-9);
            }
        }
        let loose = synth_fable(&diag_power(&sp, p.n_t, 1e-1).unwrap()).unwrap();
        assert!(loose.rotations < full.rotations);
    }

    #[test]
    fn fable_rejects_bad_spec() {
        let e = vec![C64::new(1.0, 0.0); 4];
        assert!(synth_fable(&FableSpec { q: 2, entries: e.clone(), tolerance: 0.0, alpha: 1.0 }).is_err());
        assert!(synth_fable(&FableSpec { q: 3, entries: e.clone(), tolerance: 1e-3, alpha: 1.0 }).is_err());
        assert!(synth_fable(&FableSpec { q: 2, entries: e, tolerance: 1e-3, alpha: 0.5 }).is_err());
    }

    #[test]
    fn repetition_counts() {
        assert_eq!(paper_repetitions(1, 16), 4);
        assert_eq!(paper_repetitions(2, 16), 16);
        assert_eq!(paper_repetitions(1, 1), 2);
        assert_eq!(paper_repetitions(3, 4), 22);
        assert_eq!(oracle_repetitions_from_amplitude(1.0), 0);
        assert_eq!(oracle_repetitions_from_amplitude(0.0), 0);
        // θ̂ = π/11 gives ⌊11/4 − 1/2⌋.
        assert_eq!(oracle_repetitions_from_amplitude(math::sin(math::PI / 22.0)), 2);
    }

    fn success_probability(p: &Pipeline) -> f64 {
        let s = run(&p.circuit, None).unwrap();
        postselect(&s, &sim::success_pattern(p.q)).unwrap().1
    }

    fn tiny(d: usize, n_x: usize, n_t: usize) -> DdeProblem {
        DdeProblem { n_t, ..DdeProblem::table2(d, n_x, 20.0) }
    }

    #[test]
    fn oaa_raises_success() {
        let prob = tiny(1, 8, 4);
        let mut last = 0.0;
        for reps in 0..=2 {
            let spec = PipelineSpec {
                oaa_repetitions: Some(reps),
                oaa_compensation: false,
                fable_tolerance: Some(1e-12),
                ..PipelineSpec::new(prob)
            };
            let pr = success_probability(&assemble_pipeline(&spec).unwrap());
            assert!(pr > last, "reps {reps}: {pr} <= {last}");
            last = pr;
        }
    }

    fn normalized(v: &[C64]) -> SVec<C64> {
        let n = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        v.iter().map(|x| x / n).collect()
    }

    #[test]
    fn pipeline_is_proportional_to_classical() {
        for (d, n_x, n_t, reps) in [(1, 8, 3, 0), (1, 8, 3, 2), (2, 4, 2, 1)] {
            let prob = tiny(d, n_x, n_t);
            let spec = PipelineSpec { oaa_repetitions: Some(reps), fable_tolerance: Some(1e-12), ..PipelineSpec::new(prob) };
            let p = assemble_pipeline(&spec).unwrap();
            let s = run(&p.circuit, None).unwrap();
            let out = normalized(&success_register(&s, p.q));
            let p0 = dde::initial_condition(&prob).unwrap();
            let cl = dde::classical_diag_solve(&prob, &p0).unwrap();
            let cv: SVec<C64> = cl.values.iter().map(|v| C64::new(*v, 0.0)).collect();
            let cv = normalized(&cv);
            let phase = {
                let ip: C64 = cv.iter().zip(&out).map(|(a, b)| a.conj() * b).sum();
                ip / ip.norm()
            };
            for (a, b) in out.iter().zip(&cv) {
                assert!((a - b * phase).norm() < 1e-8, "d={d} n_x={n_x} reps={reps}");
            }
        }
    }

    #[test]
    fn compensation_keeps_amplified_output_proportional() {
        // Without compensation the amplified magnitudes are distorted.
        let prob = tiny(1, 8, 6);
        let base = PipelineSpec { oaa_repetitions: Some(1), fable_tolerance: Some(1e-12), ..PipelineSpec::new(prob) };
        let p0 = dde::initial_condition(&prob).unwrap();
        let cl = dde::classical_diag_solve(&prob, &p0).unwrap();
        let cv = normalized(&cl.values.iter().map(|v| C64::new(*v, 0.0)).collect::<SVec<_>>());
        let dev = |spec: &PipelineSpec| {
            let p = assemble_pipeline(spec).unwrap();
            let out = normalized(&success_register(&run(&p.circuit, None).unwrap(), p.q));
            out.iter().zip(&cv).map(|(a, b)| (a.norm() - b.norm()).abs()).fold(0.0, f64::max)
        };
        assert!(dev(&base) < 1e-8);
        assert!(dev(&PipelineSpec { oaa_compensation: false, ..base.clone() }) > 1e-6);
    }

    #[test]
    fn pipeline_widths_and_tags() {
        for (d, n_x, w) in [(1, 32, 12), (2, 16, 18), (3, 4, 14)] {
            let p = assemble_pipeline(&PipelineSpec::new(DdeProblem::table2(d, n_x, 20.0))).unwrap();
            assert_eq!(p.circuit.width(), w);
            let rep = p.circuit.depth_by_subroutine();
            for tag in [Tag::StatePrep, Tag::QFT, Tag::FABLE, Tag::OAA, Tag::IQFT] {
                assert!(rep.tag_depth(tag) > 0, "{tag}");
            }
        }
    }

    #[test]
    fn qft_bin_negates_each_axis() {
        let p = DdeProblem::table2(2, 4, 20.0);
        assert_eq!(qft_bin(&p, 0), 0);
        assert_eq!(qft_bin(&p, 1), 3);
        assert_eq!(qft_bin(&p, 4), 12);
        assert_eq!(qft_bin(&p, 5), 15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn prep_reproduces_random_states(q in 1usize..6, seed in any::<u64>()) {
            let a = random_unit(1 << q, seed);
            let c = synth_state_prep_naive(&a, q).unwrap();
            prop_assert!((fidelity(&c, &a) - 1.0).abs() < 1e-10);
        }

        #[test]
        fn walsh_reconstructs(v in proptest::collection::vec(-5.0f64..5.0, 16)) {
            let back = walsh_reconstruct(&walsh_coefficients(&v));
            for (a, b) in back.iter().zip(&v) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
