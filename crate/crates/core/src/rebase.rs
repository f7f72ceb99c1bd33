//! Compilation into native gate sets.
//!
//! Every gate set runs the same pipeline: multi-controlled gates are lowered
//! with borrowed (dirty) qubits, Toffolis and SWAPs are expanded where not
//! native, the entangler is canonicalised, and then single-qubit runs are
//! fused and re-expressed while adjacent self-inverse pairs cancel, until
//! nothing changes. Global phase is not tracked.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::circuit::{Circuit, DepthReport, Gate, GateKind, Op, Tag};
use crate::linalg::{self, Mat2};
use crate::math::{self, C64};
use crate::sim::{self, StateVector};
use crate::{Error, Result};

/// Rotation angles closer than this to zero (mod 2π) are dropped.
pub const ANGLE_EPS: f64 = 1e-12;

/// Supported target vocabularies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GateSetId {
    Unconstrained,
    Textbook,
    Tket,
    Heron,
    Star,
    Ionq,
}

impl GateSetId {
    pub const ALL: [GateSetId; 6] =
        [GateSetId::Unconstrained, GateSetId::Textbook, GateSetId::Tket, GateSetId::Heron, GateSetId::Star, GateSetId::Ionq];

    pub fn name(self) -> &'static str {
        match self {
            GateSetId::Unconstrained => "unconstrained",
            GateSetId::Textbook => "textbook",
            GateSetId::Tket => "tket",
            GateSetId::Heron => "heron",
            GateSetId::Star => "star",
            GateSetId::Ionq => "ionq",
        }
    }

    /// Kinds allowed in rebased output.
    pub fn members(self) -> &'static [GateKind] {
        use GateKind as K;
        match self {
            GateSetId::Unconstrained => {
                &[K::Unitary1Q, K::CX, K::CZ, K::CPhase, K::CCX, K::SWAP, K::MS, K::MCX, K::MCZ]
            }
            GateSetId::Textbook => &[K::H, K::RZ, K::CX, K::SWAP],
            GateSetId::Tket => &[K::TK1, K::CX, K::CCX],
            GateSetId::Heron => &[K::SX, K::RZ, K::X, K::CZ],
            GateSetId::Star => &[K::CX, K::H, K::S, K::RZ],
            GateSetId::Ionq => &[K::GPI, K::GPI2, K::Z, K::MS],
        }
    }

    pub fn contains(self, k: GateKind) -> bool {
        self.members().contains(&k)
    }

    fn keeps(self, k: GateKind) -> bool {
        self == GateSetId::Unconstrained && self.contains(k) || self.contains(k) && !k.is_single_qubit()
    }
}

impl fmt::Display for GateSetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GateSetId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        GateSetId::ALL
            .iter()
            .copied()
            .find(|g| g.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Unknown(format!("gate set `{s}`")))
    }
}

/// Outcome of one rebase.
#[derive(Debug, Clone, PartialEq)]
pub struct RebaseReport {
    pub gate_set: GateSetId,
    pub input_gates: usize,
    pub output_gates: usize,
    pub depth: DepthReport,
    pub equivalence_checked: bool,
    pub equivalence_error: Option<f64>,
}

/// Rewrites `c` into `gs`. Shared call bodies are compiled once each.
pub fn rebase(c: &Circuit, gs: GateSetId) -> Result<Circuit> {
    let mut memo = BTreeMap::new();
    rebase_memo(c, gs, &mut memo)
}

type Memo = BTreeMap<(usize, bool), Arc<Circuit>>;

fn rebase_memo(c: &Circuit, gs: GateSetId, memo: &mut Memo) -> Result<Circuit> {
    let mut out = Circuit::with_registers(c.width(), c.registers().to_vec())?;
    let mut run: Vec<Gate> = Vec::new();
    let flush = |run: &mut Vec<Gate>, out: &mut Circuit| -> Result<()> {
        if !run.is_empty() {
            for g in compile_gates(run, c.width(), gs)? {
                out.append(g)?;
            }
            run.clear();
        }
        Ok(())
    };
    for op in c.ops() {
        match op {
            Op::Gate(g) => run.push(g.clone()),
            Op::Call(call) => {
                flush(&mut run, &mut out)?;
                let key = (Arc::as_ptr(&call.body) as usize, call.adjoint);
                let body = match memo.get(&key) {
                    Some(b) => b.clone(),
                    None => {
                        let src = if call.adjoint { call.body.inverse() } else { (*call.body).clone() };
                        let b = Arc::new(rebase_memo(&src, gs, memo)?);
                        memo.insert(key, b.clone());
                        b
                    }
                };
                out.call(body, call.offset, false, call.tag)?;
            }
        }
    }
    flush(&mut run, &mut out)?;
    Ok(out)
}

/// Rebases, measures depth and optionally checks equivalence (width ≤ 10).
pub fn rebase_with_report(c: &Circuit, gs: GateSetId, check: bool) -> Result<RebaseReport> {
    let out = rebase(c, gs)?;
    let equivalence_error = if check { Some(verify_equivalence(c, &out)?) } else { None };
    Ok(RebaseReport {
        gate_set: gs,
        input_gates: c.gate_count(),
        output_gates: out.gate_count(),
        depth: out.depth_by_subroutine(),
        equivalence_checked: check,
        equivalence_error,
    })
}

/// Whether every flattened gate of `c` belongs to `gs`.
pub fn is_closed(c: &Circuit, gs: GateSetId) -> bool {
    let mut ok = true;
    c.visit(&mut |g, _| ok &= gs.contains(g.kind));
    ok
}

fn compile_gates(gates: &[Gate], width: usize, gs: GateSetId) -> Result<Vec<Gate>> {
    let mut lowered = Vec::with_capacity(gates.len() * 2);
    // Z-axis phases are held back per qubit while they commute with what follows.
    let mut deferred: Vec<Option<(f64, Tag)>> = vec![None; width];
    let flush = |q: usize, deferred: &mut Vec<Option<(f64, Tag)>>, out: &mut Vec<Gate>| {
        if let Some((th, tag)) = deferred[q].take() {
            if !is_zero_angle(th) {
                out.push(Gate::rz(q, math::wrap_angle(th)).tagged(tag));
            }
        }
    };
    let defer = |q: usize, th: f64, tag: Tag, deferred: &mut Vec<Option<(f64, Tag)>>, out: &mut Vec<Gate>| {
        if matches!(deferred[q], Some((_, t)) if t != tag) {
            flush(q, deferred, out);
        }
        let prev = deferred[q].map_or(0.0, |(a, _)| a);
        deferred[q] = Some((prev + th, tag));
    };
    for g in gates {
        g.validate(width)?;
        for (slot, &q) in g.qubits.iter().enumerate() {
            if !commutes_with_diagonal(g, slot) {
                flush(q, &mut deferred, &mut lowered);
            }
        }
        if let Some(th) = z_angle(g) {
            defer(g.qubits[0], th, g.tag, &mut deferred, &mut lowered);
            continue;
        }
        if g.kind == GateKind::CPhase && !gs.keeps(GateKind::CPhase) {
            let (c, tq, th) = (g.qubits[0], g.qubits[1], g.params[0]);
            lowered.push(Gate::cx(c, tq).tagged(g.tag));
            lowered.push(Gate::rz(tq, -th / 2.0).tagged(g.tag));
            lowered.push(Gate::cx(c, tq).tagged(g.tag));
            defer(c, th / 2.0, g.tag, &mut deferred, &mut lowered);
            defer(tq, th / 2.0, g.tag, &mut deferred, &mut lowered);
            continue;
        }
        lower(g, width, gs, &mut lowered);
    }
    for q in 0..width {
        flush(q, &mut deferred, &mut lowered);
    }
    let pre = settle(lowered, width, GateSetId::Unconstrained);
    let canon = canonicalize(pre, gs);
    Ok(optimize(canon, width, gs))
}

// ---------------------------------------------------------------------------
// Lowering

fn t(g: Gate, tag: Tag) -> Gate {
    g.tagged(tag)
}

fn lower(g: &Gate, width: usize, gs: GateSetId, out: &mut Vec<Gate>) {
    use GateKind as K;
    let tag = g.tag;
    if g.kind.is_single_qubit() || gs.keeps(g.kind) {
        out.push(g.clone());
        return;
    }
    match g.kind {
        K::MCX | K::MCZ => {
            let n = g.qubits.len() - 1;
            let target = g.target();
            let controls = &g.qubits[..n];
            let mut inner = Vec::new();
            let flips: Vec<usize> = (0..n).filter(|&i| !g.polarities[i]).map(|i| controls[i]).collect();
            for &q in &flips {
                inner.push(t(Gate::x(q), tag));
            }
            if g.kind == K::MCZ {
                inner.push(t(Gate::h(target), tag));
            }
            let free: Vec<usize> = (0..width).filter(|q| !g.qubits.contains(q)).collect();
            mcx_closed(controls, target, &free, tag, &mut inner);
            if g.kind == K::MCZ {
                inner.push(t(Gate::h(target), tag));
            }
            for &q in &flips {
                inner.push(t(Gate::x(q), tag));
            }
            for h in inner {
                lower(&h, width, gs, out);
            }
        }
        K::CCX => ccx_six_cx(g.qubits[0], g.qubits[1], g.qubits[2], tag, out),
        K::CPhase => {
            let (c, tq, th) = (g.qubits[0], g.qubits[1], g.params[0]);
            out.push(t(Gate::phase(c, th / 2.0), tag));
            out.push(t(Gate::phase(tq, th / 2.0), tag));
            out.push(t(Gate::cx(c, tq), tag));
            out.push(t(Gate::phase(tq, -th / 2.0), tag));
            out.push(t(Gate::cx(c, tq), tag));
        }
        K::CZ => {
            let (c, tq) = (g.qubits[0], g.qubits[1]);
            if gs == GateSetId::Heron {
                out.push(g.clone());
            } else {
                out.push(t(Gate::h(tq), tag));
                out.push(t(Gate::cx(c, tq), tag));
                out.push(t(Gate::h(tq), tag));
            }
        }
        K::SWAP => swap_as_cx(g.qubits[0], g.qubits[1], tag, out),
        K::MS => {
            // MS(φ0, φ1) = (Rz(φ0) ⊗ Rz(φ1)) · exp(−iπ/4 X⊗X) · (Rz(−φ0) ⊗ Rz(−φ1)).
            let (a, b) = (g.qubits[0], g.qubits[1]);
            let (p0, p1) = (g.params[0], g.params[1]);
            out.push(t(Gate::rz(a, -p0), tag));
            out.push(t(Gate::rz(b, -p1), tag));
            out.push(t(Gate::h(a), tag));
            out.push(t(Gate::h(b), tag));
            out.push(t(Gate::cx(a, b), tag));
            out.push(t(Gate::rz(b, math::FRAC_PI_2), tag));
            out.push(t(Gate::cx(a, b), tag));
            out.push(t(Gate::h(a), tag));
            out.push(t(Gate::h(b), tag));
            out.push(t(Gate::rz(a, p0), tag));
            out.push(t(Gate::rz(b, p1), tag));
        }
        K::CX => out.push(g.clone()),
        _ => out.push(g.clone()),
    }
}

/// Toffoli with six CX gates and T-family phases.
fn ccx_six_cx(c0: usize, c1: usize, tq: usize, tag: Tag, out: &mut Vec<Gate>) {
    let seq = [
        Gate::h(tq),
        Gate::cx(c1, tq),
        Gate::tdg(tq),
        Gate::cx(c0, tq),
        Gate::t(tq),
        Gate::cx(c1, tq),
        Gate::tdg(tq),
        Gate::cx(c0, tq),
        Gate::t(c1),
        Gate::t(tq),
        Gate::h(tq),
        Gate::cx(c0, c1),
        Gate::t(c0),
        Gate::tdg(c1),
        Gate::cx(c0, c1),
    ];
    out.extend(seq.into_iter().map(|g| g.tagged(tag)));
}

/// SWAP as three CX gates. When the most recent two-qubit gate on the same
/// pair is a CX, single-qubit gates in between are moved through the SWAP
/// so that CX cancels against the first of the three.
fn swap_as_cx(a: usize, b: usize, tag: Tag, out: &mut Vec<Gate>) {
    let mut moved = Vec::new();
    let mut found = None;
    for idx in (0..out.len()).rev() {
        let g = &out[idx];
        if !g.qubits.iter().any(|q| *q == a || *q == b) {
            continue;
        }
        if g.kind.is_single_qubit() {
            moved.push(idx);
            continue;
        }
        if g.kind == GateKind::CX && g.qubits.len() == 2 && (g.qubits == [a, b] || g.qubits == [b, a]) {
            found = Some(idx);
        }
        break;
    }
    if let Some(idx) = found {
        let (c, tq) = (out[idx].qubits[0], out[idx].qubits[1]);
        let mut relabeled: Vec<Gate> = moved
            .iter()
            .rev()
            .map(|&i| {
                let mut g = out[i].clone();
                g.qubits[0] = if g.qubits[0] == a { b } else { a };
                g
            })
            .collect();
        let mut drop: Vec<usize> = moved.clone();
        drop.push(idx);
        drop.sort_unstable();
        for i in drop.into_iter().rev() {
            out.remove(i);
        }
        // CX(c,t) · SWAP = CX(t,c) · CX(c,t) applied after the first CX.
        out.push(Gate::cx(tq, c).tagged(tag));
        out.push(Gate::cx(c, tq).tagged(tag));
        out.append(&mut relabeled);
        return;
    }
    out.push(Gate::cx(a, b).tagged(tag));
    out.push(Gate::cx(b, a).tagged(tag));
    out.push(Gate::cx(a, b).tagged(tag));
}

/// Closed-control multi-controlled X over CCX, CX and single-qubit gates.
/// `free` lists qubits the gate may borrow in any state.
fn mcx_closed(controls: &[usize], target: usize, free: &[usize], tag: Tag, out: &mut Vec<Gate>) {
    let n = controls.len();
    match n {
        0 => out.push(t(Gate::x(target), tag)),
        1 => out.push(t(Gate::cx(controls[0], target), tag)),
        2 => out.push(t(Gate::ccx(controls[0], controls[1], target), tag)),
        _ if free.len() >= n - 2 => vchain(controls, target, &free[..n - 2], tag, out),
        _ if !free.is_empty() => {
            // Split on one borrowed qubit; each half borrows from the other.
            let anc = free[0];
            let m1 = n.div_ceil(2);
            let (c1, c2) = controls.split_at(m1);
            let mut c2a: Vec<usize> = c2.to_vec();
            c2a.push(anc);
            let free1: Vec<usize> = c2.iter().copied().chain([target]).chain(free[1..].iter().copied()).collect();
            let free2: Vec<usize> = c1.iter().copied().chain(free[1..].iter().copied()).collect();
            for _ in 0..2 {
                mcx_closed(c1, anc, &free1, tag, out);
                mcx_closed(&c2a, target, &free2, tag, out);
            }
        }
        _ => {
            let x = [[linalg::ZERO, linalg::ONE], [linalg::ONE, linalg::ZERO]];
            mc_unitary(controls, target, &x, tag, out);
        }
    }
}

/// Barenco-style Toffoli ladder with `n − 2` borrowed qubits: `4(n − 2)` CCX.
fn vchain(c: &[usize], target: usize, a: &[usize], tag: Tag, out: &mut Vec<Gate>) {
    let n = c.len();
    let top = Gate::ccx(c[n - 1], a[n - 3], target).tagged(tag);
    let down: Vec<Gate> = (3..n).rev().map(|k| Gate::ccx(c[k - 1], a[k - 3], a[k - 2]).tagged(tag)).collect();
    let mid = Gate::ccx(c[0], c[1], a[0]).tagged(tag);
    let half = |out: &mut Vec<Gate>| {
        out.extend(down.iter().cloned());
        out.push(mid.clone());
        out.extend(down.iter().rev().cloned());
    };
    out.push(top.clone());
    half(out);
    out.push(top);
    half(out);
}

/// Square root of a 2×2 unitary via its eigen-decomposition.
fn sqrt_unitary(u: &Mat2) -> Mat2 {
    // Eigenvalues of u: roots of x² − tr·x + det.
    let tr = u[0][0] + u[1][1];
    let det = linalg::det(u);
    let disc = (tr * tr - det * 4.0).sqrt();
    let l1 = (tr + disc) / 2.0;
    let l2 = (tr - disc) / 2.0;
    if (l1 - l2).norm() < 1e-12 {
        return linalg::scale(&linalg::IDENTITY, l1.sqrt());
    }
    // u = l1·P1 + l2·P2 with P1 = (u − l2 I)/(l1 − l2).
    let p1 = [
        [(u[0][0] - l2) / (l1 - l2), u[0][1] / (l1 - l2)],
        [u[1][0] / (l1 - l2), (u[1][1] - l2) / (l1 - l2)],
    ];
    let (s1, s2) = (l1.sqrt(), l2.sqrt());
    let mut out = [[linalg::ZERO; 2]; 2];
    for r in 0..2 {
        for cc in 0..2 {
            let p2 = linalg::IDENTITY[r][cc] - p1[r][cc];
            out[r][cc] = p1[r][cc] * s1 + p2 * s2;
        }
    }
    out
}

/// Singly controlled `u` exactly, as CX gates and single-qubit gates.
fn controlled_unitary(c: usize, tq: usize, u: &Mat2, tag: Tag, out: &mut Vec<Gate>) {
    let (alpha, beta, gamma, phi) = linalg::zyz_angles(u);
    // u = e^{iφ}·A·X·B·X·C with A·B·C = I.
    out.push(t(Gate::rz(tq, (gamma - alpha) / 2.0), tag));
    out.push(t(Gate::cx(c, tq), tag));
    out.push(t(Gate::ry(tq, -beta / 2.0), tag));
    out.push(t(Gate::rz(tq, -(gamma + alpha) / 2.0), tag));
    out.push(t(Gate::cx(c, tq), tag));
    out.push(t(Gate::ry(tq, beta / 2.0), tag));
    out.push(t(Gate::rz(tq, alpha), tag));
    out.push(t(Gate::phase(c, phi), tag));
}

/// Multi-controlled `u` without spare qubits (recursive square roots).
fn mc_unitary(controls: &[usize], tq: usize, u: &Mat2, tag: Tag, out: &mut Vec<Gate>) {
    let n = controls.len();
    if n == 1 {
        controlled_unitary(controls[0], tq, u, tag, out);
        return;
    }
    let v = sqrt_unitary(u);
    let last = controls[n - 1];
    let rest = &controls[..n - 1];
    controlled_unitary(last, tq, &v, tag, out);
    mcx_closed(rest, last, &[tq], tag, out);
    controlled_unitary(last, tq, &linalg::adjoint(&v), tag, out);
    mcx_closed(rest, last, &[tq], tag, out);
    mc_unitary(rest, tq, &v, tag, out);
}

// ---------------------------------------------------------------------------
// Entangler canonicalisation

fn canonicalize(gates: Vec<Gate>, gs: GateSetId) -> Vec<Gate> {
    match gs {
        GateSetId::Heron => {
            let mut out = Vec::with_capacity(gates.len());
            for g in gates {
                if g.kind == GateKind::CX {
                    let (c, tq) = (g.qubits[0], g.qubits[1]);
                    out.push(Gate::h(tq).tagged(g.tag));
                    out.push(Gate::cz(c, tq).tagged(g.tag));
                    out.push(Gate::h(tq).tagged(g.tag));
                } else {
                    out.push(g);
                }
            }
            out
        }
        GateSetId::Ionq => {
            let mut out = Vec::with_capacity(gates.len());
            for g in gates {
                if g.kind == GateKind::CX {
                    let (c, tq, tag) = (g.qubits[0], g.qubits[1], g.tag);
                    out.push(Gate::ry(c, math::FRAC_PI_2).tagged(tag));
                    out.push(Gate::ms(c, tq, 0.0, 0.0).tagged(tag));
                    out.push(Gate::rx(c, -math::FRAC_PI_2).tagged(tag));
                    out.push(Gate::rx(tq, -math::FRAC_PI_2).tagged(tag));
                    out.push(Gate::ry(c, -math::FRAC_PI_2).tagged(tag));
                } else {
                    out.push(g);
                }
            }
            out
        }
        _ => gates,
    }
}

// ---------------------------------------------------------------------------
// Optimisation

fn optimize(gates: Vec<Gate>, width: usize, gs: GateSetId) -> Vec<Gate> {
    settle(gates, width, gs)
}

/// Alternates pair cancellation and single-qubit fusion to a fixed point.
fn settle(mut gates: Vec<Gate>, width: usize, gs: GateSetId) -> Vec<Gate> {
    for _ in 0..8 {
        let next = fuse(cancel_pairs(gates.clone(), width), width, gs);
        let done = next == gates;
        gates = next;
        if done {
            break;
        }
    }
    gates
}

fn same_action(a: &Gate, b: &Gate) -> bool {
    if a.kind != b.kind || a.qubits.len() != b.qubits.len() {
        return false;
    }
    match a.kind {
        GateKind::CZ | GateKind::SWAP => {
            let (mut x, mut y) = (a.qubits.clone(), b.qubits.clone());
            x.sort_unstable();
            y.sort_unstable();
            x == y
        }
        GateKind::CCX => {
            a.target() == b.target() && {
                let (mut x, mut y) = (a.qubits[..2].to_vec(), b.qubits[..2].to_vec());
                x.sort_unstable();
                y.sort_unstable();
                x == y
            }
        }
        GateKind::CX => a.qubits == b.qubits,
        _ => false,
    }
}

/// Removes adjacent identical self-inverse multi-qubit gates.
fn cancel_pairs(gates: Vec<Gate>, width: usize) -> Vec<Gate> {
    let mut live: Vec<Option<Gate>> = Vec::with_capacity(gates.len());
    let mut stacks: Vec<Vec<usize>> = vec![Vec::new(); width];
    for g in gates {
        if !g.kind.is_single_qubit() {
            let tops: Vec<Option<usize>> = g.qubits.iter().map(|q| stacks[*q].last().copied()).collect();
            if let Some(Some(k)) = tops.first() {
                let k = *k;
                if tops.iter().all(|x| *x == Some(k)) {
                    if let Some(prev) = &live[k] {
                        if prev.qubits.len() == g.qubits.len() && same_action(prev, &g) {
                            live[k] = None;
                            for q in &g.qubits {
                                stacks[*q].pop();
                            }
                            continue;
                        }
                    }
                }
            }
        }
        let idx = live.len();
        for q in &g.qubits {
            stacks[*q].push(idx);
        }
        live.push(Some(g));
    }
    live.into_iter().flatten().collect()
}

/// Fuses each run of single-qubit gates (same tag) and re-expresses it.
fn fuse(gates: Vec<Gate>, width: usize, gs: GateSetId) -> Vec<Gate> {
    let mut out = Vec::with_capacity(gates.len());
    let mut pending: Vec<Option<(Mat2, Tag, usize)>> = vec![None; width];
    let flush = |q: usize, pending: &mut Vec<Option<(Mat2, Tag, usize)>>, out: &mut Vec<Gate>| {
        if let Some((m, tag, _)) = pending[q].take() {
            out.extend(express_1q(q, &m, gs).into_iter().map(|g| g.tagged(tag)));
        }
    };
    for g in gates {
        if g.kind.is_single_qubit() {
            let q = g.qubits[0];
            if let Some((_, tag, _)) = &pending[q] {
                if *tag != g.tag {
                    flush(q, &mut pending, &mut out);
                }
            }
            let m = g.matrix_1q();
            pending[q] = Some(match pending[q].take() {
                Some((acc, tag, n)) => (linalg::mul(&m, &acc), tag, n + 1),
                None => (m, g.tag, 1),
            });
        } else {
            for (slot, &q) in g.qubits.iter().enumerate() {
                let Some((m, tag, _)) = pending[q].take() else { continue };
                if !commutes_with_diagonal(&g, slot) {
                    pending[q] = Some((m, tag, 0));
                    flush(q, &mut pending, &mut out);
                    continue;
                }
                // Trailing diagonal gates ride through `g` into the next run.
                let mut gates = express_1q(q, &m, gs);
                let mut carry = linalg::IDENTITY;
                while let Some(last) = gates.last() {
                    let lm = last.matrix_1q();
                    if !is_diagonal(&lm) {
                        break;
                    }
                    carry = linalg::mul(&carry, &lm);
                    gates.pop();
                }
                out.extend(gates.into_iter().map(|x| x.tagged(tag)));
                if !is_identity(&carry) {
                    pending[q] = Some((carry, tag, 1));
                }
            }
            out.push(g);
        }
    }
    for q in 0..width {
        flush(q, &mut pending, &mut out);
    }
    out
}

/// Rotation angle of a diagonal single-qubit gate, up to global phase.
fn z_angle(g: &Gate) -> Option<f64> {
    use GateKind as K;
    Some(match g.kind {
        K::Z => math::PI,
        K::S => math::FRAC_PI_2,
        K::Sdg => -math::FRAC_PI_2,
        K::T => math::FRAC_PI_4,
        K::Tdg => -math::FRAC_PI_4,
        K::RZ | K::Phase => g.params[0],
        _ => return None,
    })
}

fn is_diagonal(m: &Mat2) -> bool {
    m[0][1].norm() < 1e-13 && m[1][0].norm() < 1e-13
}

/// Whether a diagonal single-qubit gate on operand `slot` commutes with `g`.
fn commutes_with_diagonal(g: &Gate, slot: usize) -> bool {
    match g.kind {
        GateKind::CZ | GateKind::CPhase | GateKind::MCZ => true,
        GateKind::CX | GateKind::CCX | GateKind::MCX => slot + 1 < g.qubits.len(),
        k => z_angle(g).is_some() && k.is_single_qubit(),
    }
}

fn is_zero_angle(theta: f64) -> bool {
    math::abs(math::wrap_angle(theta)) < ANGLE_EPS
}

fn near(theta: f64, target: f64) -> bool {
    math::abs(math::wrap_angle(theta - target)) < 1e-9
}

/// `u = e^{iφ}·Rz(a)·Rx(b)·Rz(c)`, returned as `(a, b, c)` with `b` wrapped.
fn zxz_angles(u: &Mat2) -> (f64, f64, f64) {
    let (alpha, beta, gamma, _) = linalg::zyz_angles(u);
    (math::wrap_angle(alpha + math::FRAC_PI_2), math::wrap_angle(beta), math::wrap_angle(gamma - math::FRAC_PI_2))
}

fn push_rz(out: &mut Vec<Gate>, q: usize, theta: f64, use_s: bool) {
    let th = math::wrap_angle(theta);
    if is_zero_angle(th) {
        return;
    }
    if use_s && near(th, math::FRAC_PI_2) {
        out.push(Gate::s(q));
    } else {
        out.push(Gate::rz(q, th));
    }
}

fn is_identity(u: &Mat2) -> bool {
    linalg::distance_up_to_phase(u, &linalg::IDENTITY) < 1e-11
}

/// Native gates (time order) implementing `u` up to global phase.
fn express_1q(q: usize, u: &Mat2, gs: GateSetId) -> Vec<Gate> {
    let mut out = Vec::new();
    if is_identity(u) {
        return out;
    }
    match gs {
        GateSetId::Unconstrained => out.push(Gate::unitary(q, u)),
        GateSetId::Ionq => ionq_1q(q, u, &mut out),
        GateSetId::Tket => {
            let (a, b, c, _) = linalg::zyz_angles(u);
            out.push(Gate::tk1(q, math::wrap_angle(a), math::wrap_angle(b), math::wrap_angle(c)));
        }
        GateSetId::Textbook | GateSetId::Star => {
            let use_s = gs == GateSetId::Star;
            let (a, b, c) = zxz_angles(u);
            if is_zero_angle(b) {
                push_rz(&mut out, q, a + c, use_s);
            } else if near(b, math::FRAC_PI_2) || near(b, -math::FRAC_PI_2) {
                // Rx(π/2) = Rz(−π/2)·H·Rz(−π/2); Rx(−π/2) = Rz(π)·Rx(π/2)·Rz(−π).
                let (a, c) = if near(b, math::FRAC_PI_2) { (a, c) } else { (a + math::PI, c - math::PI) };
                push_rz(&mut out, q, c - math::FRAC_PI_2, use_s);
                out.push(Gate::h(q));
                push_rz(&mut out, q, a - math::FRAC_PI_2, use_s);
            } else {
                push_rz(&mut out, q, c, use_s);
                out.push(Gate::h(q));
                push_rz(&mut out, q, b, use_s);
                out.push(Gate::h(q));
                push_rz(&mut out, q, a, use_s);
            }
        }
        GateSetId::Heron => {
            let (a, b, c) = zxz_angles(u);
            if is_zero_angle(b) {
                push_rz(&mut out, q, a + c, false);
            } else if near(b, math::FRAC_PI_2) || near(b, -math::FRAC_PI_2) {
                let (a, c) = if near(b, math::FRAC_PI_2) { (a, c) } else { (a + math::PI, c - math::PI) };
                push_rz(&mut out, q, c, false);
                out.push(Gate::sx(q));
                push_rz(&mut out, q, a, false);
            } else if near(b, math::PI) {
                push_rz(&mut out, q, c, false);
                out.push(Gate::x(q));
                push_rz(&mut out, q, a, false);
            } else {
                // Rz(α)·Ry(β)·Rz(γ) = Rz(α + π)·SX·Rz(β + π)·SX·Rz(γ) up to phase.
                let (al, be, ga, _) = linalg::zyz_angles(u);
                push_rz(&mut out, q, ga, false);
                out.push(Gate::sx(q));
                push_rz(&mut out, q, be + math::PI, false);
                out.push(Gate::sx(q));
                push_rz(&mut out, q, al + math::PI, false);
            }
        }
    }
    out
}

/// IonQ pulses for `u`: Z rotations are absorbed into pulse phases, with
/// `GPI(φ) = Rz(2φ)·X` and `GPI2(φ) = Rz(φ)·Rx(π/2)·Rz(−φ)`.
fn ionq_1q(q: usize, u: &Mat2, out: &mut Vec<Gate>) {
    let (a, b, c) = zxz_angles(u);
    if is_zero_angle(b) {
        // Rz(δ) = GPI(δ/2)·GPI(0).
        let d = math::wrap_angle(a + c);
        if near(d, math::PI) {
            out.push(Gate::z(q));
        } else if !is_zero_angle(d) {
            out.push(Gate::gpi(q, 0.0));
            out.push(Gate::gpi(q, d / 2.0));
        }
        return;
    }
    if near(b, math::PI) || near(b, -math::PI) {
        // Rz(a)·X·Rz(c) = Rz(a − c)·X.
        out.push(Gate::gpi(q, math::wrap_angle(a - c) / 2.0));
        return;
    }
    if near(b, math::FRAC_PI_2) || near(b, -math::FRAC_PI_2) {
        let (a, c) = if near(b, math::FRAC_PI_2) { (a, c) } else { (a + math::PI, c - math::PI) };
        // Rz(a)·Rx(π/2)·Rz(c) = Rz(a + c)·GPI2(−c).
        let d = math::wrap_angle(a + c);
        if is_zero_angle(d) {
            out.push(Gate::gpi2(q, math::wrap_angle(-c)));
            return;
        }
        if near(d, math::PI) {
            out.push(Gate::gpi2(q, math::wrap_angle(-c)));
            out.push(Gate::z(q));
            return;
        }
    }
    // GPI2(x)·GPI(y)·GPI2(z) = V·X with V = Rz(x)·Rx(π/2)·Rz(2y − x − z)·Rx(π/2)·Rz(z),
    // so V = u·X fixes all three phases.
    let x = [[linalg::ZERO, linalg::ONE], [linalg::ONE, linalg::ZERO]];
    let (al, be, ga, _) = linalg::zyz_angles(&linalg::mul(u, &x));
    let (va, vb, vc) = (al + math::PI, be + math::PI, ga);
    out.push(Gate::gpi2(q, math::wrap_angle(vc)));
    out.push(Gate::gpi(q, math::wrap_angle((va + vb + vc) / 2.0)));
    out.push(Gate::gpi2(q, math::wrap_angle(va)));
}

// ---------------------------------------------------------------------------
// Equivalence and reference counts

/// Largest entrywise deviation between the unitaries of `a` and `b` after
/// aligning global phase on the largest-magnitude entry of `a`.
pub fn verify_equivalence(a: &Circuit, b: &Circuit) -> Result<f64> {
    if a.width() != b.width() {
        return Err(Error::WidthMismatch { expected: a.width(), found: b.width() });
    }
    if a.width() > 10 {
        return Err(Error::TooWide(a.width()));
    }
    let w = a.width();
    let mut cols_a = Vec::with_capacity(1 << w);
    let mut cols_b = Vec::with_capacity(1 << w);
    for j in 0..1usize << w {
        cols_a.push(sim::run(a, Some(StateVector::basis(w, j)?))?.into_amplitudes());
        cols_b.push(sim::run(b, Some(StateVector::basis(w, j)?))?.into_amplitudes());
    }
    let mut best = (0, 0, -1.0);
    for (j, col) in cols_a.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            if v.norm() > best.2 {
                best = (i, j, v.norm());
            }
        }
    }
    let (bi, bj, _) = best;
    let rb = cols_b[bj][bi];
    let ph = if rb.norm() > 1e-12 {
        let r = cols_a[bj][bi] / rb;
        r / r.norm()
    } else {
        C64::new(1.0, 0.0)
    };
    let mut worst: f64 = 0.0;
    for (ca, cb) in cols_a.iter().zip(&cols_b) {
        for (x, y) in ca.iter().zip(cb) {
            worst = worst.max((x - y * ph).norm());
        }
    }
    Ok(worst)
}

/// Reference operation counts plotted for the hand-derived series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TheoreticalCount {
    /// Value read from the reference series, when it covers `q`.
    pub plotted: Option<usize>,
    /// Closed form: `q + q(q−1)/2 + ⌊q/2⌋` gates for the QFT, `4^q` for FABLE.
    pub formula: usize,
}

impl TheoreticalCount {
    /// The plotted value when available, otherwise the closed form.
    pub fn value(&self) -> usize {
        self.plotted.unwrap_or(self.formula)
    }
}

pub fn theoretical_counts(subroutine: Tag, q: usize) -> Result<TheoreticalCount> {
    match subroutine {
        Tag::QFT | Tag::IQFT => {
            let plotted = match q {
                2 => Some(4),
                3 => Some(8),
                4 => Some(12),
                5 => Some(18),
                _ => None,
            };
            Ok(TheoreticalCount { plotted, formula: q + q * q.saturating_sub(1) / 2 + q / 2 })
        }
        Tag::FABLE => {
            let f = 1usize << (2 * q);
            Ok(TheoreticalCount { plotted: Some(f), formula: f })
        }
        other => Err(Error::Unknown(format!("theoretical count for {other}"))),
    }
}
