//! Gate-level IR: a fixed gate catalogue, tagged gates, labelled registers,
//! shared sub-circuit calls and ASAP depth measurement.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::linalg::{self, Mat2};
use crate::math::{self, C64};
use crate::{Error, Result};

/// Gate kinds understood by every pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GateKind {
    H,
    X,
    Z,
    S,
    Sdg,
    T,
    Tdg,
    SX,
    SXdg,
    RX,
    RY,
    RZ,
    Phase,
    TK1,
    GPI,
    GPI2,
    CX,
    CZ,
    CPhase,
    CCX,
    SWAP,
    MS,
    MCX,
    MCZ,
    Unitary1Q,
}

impl GateKind {
    pub const ALL: [GateKind; 25] = [
        GateKind::H,
        GateKind::X,
        GateKind::Z,
        GateKind::S,
        GateKind::Sdg,
        GateKind::T,
        GateKind::Tdg,
        GateKind::SX,
        GateKind::SXdg,
        GateKind::RX,
        GateKind::RY,
        GateKind::RZ,
        GateKind::Phase,
        GateKind::TK1,
        GateKind::GPI,
        GateKind::GPI2,
        GateKind::CX,
        GateKind::CZ,
        GateKind::CPhase,
        GateKind::CCX,
        GateKind::SWAP,
        GateKind::MS,
        GateKind::MCX,
        GateKind::MCZ,
        GateKind::Unitary1Q,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GateKind::H => "H",
            GateKind::X => "X",
            GateKind::Z => "Z",
            GateKind::S => "S",
            GateKind::Sdg => "Sdg",
            GateKind::T => "T",
            GateKind::Tdg => "Tdg",
            GateKind::SX => "SX",
            GateKind::SXdg => "SXdg",
            GateKind::RX => "RX",
            GateKind::RY => "RY",
            GateKind::RZ => "RZ",
            GateKind::Phase => "Phase",
            GateKind::TK1 => "TK1",
            GateKind::GPI => "GPI",
            GateKind::GPI2 => "GPI2",
            GateKind::CX => "CX",
            GateKind::CZ => "CZ",
            GateKind::CPhase => "CPhase",
            GateKind::CCX => "CCX",
            GateKind::SWAP => "SWAP",
            GateKind::MS => "MS",
            GateKind::MCX => "MCX",
            GateKind::MCZ => "MCZ",
            GateKind::Unitary1Q => "Unitary1Q",
        }
    }

    /// Fixed operand count, or `None` for the multi-controlled kinds.
    pub fn qubit_arity(self) -> Option<usize> {
        match self {
            GateKind::CX | GateKind::CZ | GateKind::CPhase | GateKind::SWAP | GateKind::MS => Some(2),
            GateKind::CCX => Some(3),
            GateKind::MCX | GateKind::MCZ => None,
            _ => Some(1),
        }
    }

    pub fn param_arity(self) -> usize {
        match self {
            GateKind::RX
            | GateKind::RY
            | GateKind::RZ
            | GateKind::Phase
            | GateKind::GPI
            | GateKind::GPI2
            | GateKind::CPhase => 1,
            GateKind::MS => 2,
            GateKind::TK1 => 3,
            GateKind::Unitary1Q => 8,
            _ => 0,
        }
    }

    pub fn is_single_qubit(self) -> bool {
        self.qubit_arity() == Some(1)
    }

    pub fn is_multi_controlled(self) -> bool {
        matches!(self, GateKind::MCX | GateKind::MCZ)
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GateKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        GateKind::ALL
            .iter()
            .copied()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Unknown(format!("gate kind `{s}`")))
    }
}

/// Which pipeline stage produced a gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Tag {
    StatePrep,
    QFT,
    FABLE,
    OAA,
    IQFT,
    Other,
}

impl Tag {
    pub const ALL: [Tag; 6] = [Tag::StatePrep, Tag::QFT, Tag::FABLE, Tag::OAA, Tag::IQFT, Tag::Other];

    pub fn name(self) -> &'static str {
        match self {
            Tag::StatePrep => "StatePrep",
            Tag::QFT => "QFT",
            Tag::FABLE => "FABLE",
            Tag::OAA => "OAA",
            Tag::IQFT => "IQFT",
            Tag::Other => "Other",
        }
    }

    fn slot(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Tag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Tag::ALL
            .iter()
            .copied()
            .find(|t| t.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Unknown(format!("tag `{s}`")))
    }
}

/// One gate. For controlled kinds the target is the last operand; for
/// `MCX`/`MCZ` `polarities[i]` is `true` when control `i` fires on `|1⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    pub params: Vec<f64>,
    pub polarities: Vec<bool>,
    pub tag: Tag,
}

macro_rules! fixed_1q {
    ($($fn:ident => $kind:ident),*) => {
        $(pub fn $fn(q: usize) -> Gate { Gate::raw(GateKind::$kind, vec![q], vec![]) })*
    };
}

macro_rules! rot_1q {
    ($($fn:ident => $kind:ident),*) => {
        $(pub fn $fn(q: usize, theta: f64) -> Gate { Gate::raw(GateKind::$kind, vec![q], vec![theta]) })*
    };
}

impl Gate {
    fn raw(kind: GateKind, qubits: Vec<usize>, params: Vec<f64>) -> Gate {
        Gate { kind, qubits, params, polarities: Vec::new(), tag: Tag::Other }
    }

    /// Builds and validates a gate of any kind.
    pub fn new(kind: GateKind, qubits: Vec<usize>, params: Vec<f64>, polarities: Vec<bool>, tag: Tag) -> Result<Gate> {
        let g = Gate { kind, qubits, params, polarities, tag };
        g.validate(usize::MAX)?;
        Ok(g)
    }

    fixed_1q!(h => H, x => X, z => Z, s => S, sdg => Sdg, t => T, tdg => Tdg, sx => SX, sxdg => SXdg);
    rot_1q!(rx => RX, ry => RY, rz => RZ, phase => Phase, gpi => GPI, gpi2 => GPI2);

    pub fn tk1(q: usize, a: f64, b: f64, c: f64) -> Gate {
        Gate::raw(GateKind::TK1, vec![q], vec![a, b, c])
    }

    pub fn unitary(q: usize, m: &Mat2) -> Gate {
        let p = vec![m[0][0].re, m[0][0].im, m[0][1].re, m[0][1].im, m[1][0].re, m[1][0].im, m[1][1].re, m[1][1].im];
        Gate::raw(GateKind::Unitary1Q, vec![q], p)
    }

    pub fn cx(c: usize, t: usize) -> Gate {
        Gate::raw(GateKind::CX, vec![c, t], vec![])
    }
    pub fn cz(c: usize, t: usize) -> Gate {
        Gate::raw(GateKind::CZ, vec![c, t], vec![])
    }
    pub fn cphase(c: usize, t: usize, theta: f64) -> Gate {
        Gate::raw(GateKind::CPhase, vec![c, t], vec![theta])
    }
    pub fn ccx(c0: usize, c1: usize, t: usize) -> Gate {
        Gate::raw(GateKind::CCX, vec![c0, c1, t], vec![])
    }
    pub fn swap(a: usize, b: usize) -> Gate {
        Gate::raw(GateKind::SWAP, vec![a, b], vec![])
    }
    pub fn ms(a: usize, b: usize, phi0: f64, phi1: f64) -> Gate {
        Gate::raw(GateKind::MS, vec![a, b], vec![phi0, phi1])
    }

    /// Multi-controlled X; `controls[i].1` is the polarity of control `i`.
    pub fn mcx(controls: &[(usize, bool)], target: usize) -> Gate {
        Gate::multi(GateKind::MCX, controls, target)
    }

    pub fn mcz(controls: &[(usize, bool)], target: usize) -> Gate {
        Gate::multi(GateKind::MCZ, controls, target)
    }

    fn multi(kind: GateKind, controls: &[(usize, bool)], target: usize) -> Gate {
        let mut qubits: Vec<usize> = controls.iter().map(|c| c.0).collect();
        qubits.push(target);
        Gate { kind, qubits, params: Vec::new(), polarities: controls.iter().map(|c| c.1).collect(), tag: Tag::Other }
    }

    pub fn tagged(mut self, tag: Tag) -> Gate {
        self.tag = tag;
        self
    }

    pub fn target(&self) -> usize {
        *self.qubits.last().expect("gates have at least one operand")
    }

    /// Checks arity, operand distinctness and range, and parameter sanity.
    pub fn validate(&self, width: usize) -> Result<()> {
        let err = |m: String| Err(Error::InvalidGate(format!("{}: {m}", self.kind)));
        match self.kind.qubit_arity() {
            Some(n) if self.qubits.len() != n => return err(format!("expects {n} qubits, got {}", self.qubits.len())),
            None if self.qubits.len() < 2 => return err("needs at least one control".into()),
            _ => {}
        }
        let controls = if self.kind.is_multi_controlled() { self.qubits.len() - 1 } else { 0 };
        if self.polarities.len() != controls {
            return err(format!("expects {controls} polarities, got {}", self.polarities.len()));
        }
        if self.params.len() != self.kind.param_arity() {
            return err(format!("expects {} params, got {}", self.kind.param_arity(), self.params.len()));
        }
        if self.params.iter().any(|p| !p.is_finite()) {
            return err("non-finite parameter".into());
        }
        for (i, &q) in self.qubits.iter().enumerate() {
            if q >= width {
                return err(format!("operand {q} outside width {width}"));
            }
            if self.qubits[..i].contains(&q) {
                return err(format!("duplicate operand {q}"));
            }
        }
        if self.kind == GateKind::Unitary1Q && linalg::unitarity_error(&self.matrix_1q()) > 1e-9 {
            return err("matrix is not unitary".into());
        }
        Ok(())
    }

    /// The exact inverse gate.
    pub fn adjoint(&self) -> Gate {
        use GateKind as K;
        let mut g = self.clone();
        match self.kind {
            K::S => g.kind = K::Sdg,
            K::Sdg => g.kind = K::S,
            K::T => g.kind = K::Tdg,
            K::Tdg => g.kind = K::T,
            K::SX => g.kind = K::SXdg,
            K::SXdg => g.kind = K::SX,
            K::RX | K::RY | K::RZ | K::Phase | K::CPhase => g.params[0] = -g.params[0],
            K::TK1 => g.params = vec![-self.params[2], -self.params[1], -self.params[0]],
            K::GPI2 => g.params[0] = math::wrap_angle(self.params[0] + math::PI),
            K::MS => g.params[0] = math::wrap_angle(self.params[0] + math::PI),
            K::Unitary1Q => {
                let m = linalg::adjoint(&self.matrix_1q());
                g = Gate::unitary(self.qubits[0], &m).tagged(self.tag);
            }
            K::H | K::X | K::Z | K::GPI | K::CX | K::CZ | K::CCX | K::SWAP | K::MCX | K::MCZ => {}
        }
        g
    }

    /// 2×2 matrix of a single-qubit gate.
    ///
    /// # Panics
    /// On multi-qubit kinds.
    pub fn matrix_1q(&self) -> Mat2 {
        use GateKind as K;
        let (o, z) = (linalg::ONE, linalg::ZERO);
        let s2 = math::FRAC_1_SQRT_2;
        let p = &self.params;
        match self.kind {
            K::H => [[C64::new(s2, 0.0), C64::new(s2, 0.0)], [C64::new(s2, 0.0), C64::new(-s2, 0.0)]],
            K::X => [[z, o], [o, z]],
            K::Z => [[o, z], [z, -o]],
            K::S => [[o, z], [z, linalg::I]],
            K::Sdg => [[o, z], [z, -linalg::I]],
            K::T => linalg::phase(math::FRAC_PI_4),
            K::Tdg => linalg::phase(-math::FRAC_PI_4),
            K::SX => [[C64::new(0.5, 0.5), C64::new(0.5, -0.5)], [C64::new(0.5, -0.5), C64::new(0.5, 0.5)]],
            K::SXdg => [[C64::new(0.5, -0.5), C64::new(0.5, 0.5)], [C64::new(0.5, 0.5), C64::new(0.5, -0.5)]],
            K::RX => linalg::rx(p[0]),
            K::RY => linalg::ry(p[0]),
            K::RZ => linalg::rz(p[0]),
            K::Phase => linalg::phase(p[0]),
            K::TK1 => linalg::mul(&linalg::rz(p[0]), &linalg::mul(&linalg::ry(p[1]), &linalg::rz(p[2]))),
            K::GPI => [[z, math::cis(-p[0])], [math::cis(p[0]), z]],
            K::GPI2 => {
                let m = -linalg::I * s2;
                [[C64::new(s2, 0.0), m * math::cis(-p[0])], [m * math::cis(p[0]), C64::new(s2, 0.0)]]
            }
            K::Unitary1Q => [[C64::new(p[0], p[1]), C64::new(p[2], p[3])], [C64::new(p[4], p[5]), C64::new(p[6], p[7])]],
            other => panic!("{other} is not a single-qubit gate"),
        }
    }

    /// `4×4` matrix of a two-qubit gate on the local basis `b0 + 2·b1`,
    /// where `b0` is the state of `qubits[0]`.
    ///
    /// # Panics
    /// On kinds that are not two-qubit.
    pub fn matrix_2q(&self) -> [[C64; 4]; 4] {
        use GateKind as K;
        let (o, z) = (linalg::ONE, linalg::ZERO);
        let mut m = [[z; 4]; 4];
        match self.kind {
            K::CX => {
                // control = bit 0, target = bit 1
                m[0][0] = o;
                m[2][2] = o;
                m[3][1] = o;
                m[1][3] = o;
            }
            K::CZ | K::CPhase => {
                for (i, row) in m.iter_mut().enumerate() {
                    row[i] = o;
                }
                m[3][3] = if self.kind == K::CZ { -o } else { math::cis(self.params[0]) };
            }
            K::SWAP => {
                m[0][0] = o;
                m[3][3] = o;
                m[1][2] = o;
                m[2][1] = o;
            }
            K::MS => {
                let s = math::FRAC_1_SQRT_2;
                let (p0, p1) = (self.params[0], self.params[1]);
                let mi = C64::new(0.0, -s);
                for (i, row) in m.iter_mut().enumerate() {
                    row[i] = C64::new(s, 0.0);
                }
                // Local index b0 + 2·b1; the |b0 b1⟩ pairs (00,11) and (01,10) mix.
                m[0][3] = mi * math::cis(-(p0 + p1));
                m[3][0] = mi * math::cis(p0 + p1);
                m[1][2] = mi * math::cis(p0 - p1);
                m[2][1] = mi * math::cis(-(p0 - p1));
            }
            other => panic!("{other} is not a two-qubit gate"),
        }
        m
    }
}

/// A named contiguous range of qubits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Register {
    pub name: String,
    pub start: usize,
    pub len: usize,
}

impl Register {
    pub fn qubits(&self) -> core::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

/// Register names used by the pipeline layouts.
pub mod reg {
    pub const AA_FLAG: &str = "AA_flag";
    pub const FLAG: &str = "flag";
    pub const ZEROS: &str = "zeros";
    pub const STATE: &str = "state";
}

/// Rotation axis of a multiplexed rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Y,
    Z,
}

/// A uniformly controlled rotation: when the control bits read `k`
/// (little-endian in `controls` order) the target receives
/// `R_axis(angles[k])`.
#[derive(Debug, Clone, PartialEq)]
pub struct Multiplexor {
    pub axis: Axis,
    pub target: usize,
    pub controls: Vec<usize>,
    pub angles: Vec<f64>,
}

/// A closed form a circuit body may carry alongside its gate list, letting
/// the simulator skip gate-by-gate evaluation. The gate list stays
/// authoritative for depth, rebasing and serialisation.
#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    /// Product of multiplexors, applied in order.
    Multiplexors(Vec<Multiplexor>),
}

impl Kernel {
    pub fn adjoint(&self) -> Kernel {
        match self {
            Kernel::Multiplexors(ms) => Kernel::Multiplexors(
                ms.iter()
                    .rev()
                    .map(|m| Multiplexor { angles: m.angles.iter().map(|a| -a).collect(), ..m.clone() })
                    .collect(),
            ),
        }
    }
}

/// A reference to a shared sub-circuit placed at a qubit offset.
#[derive(Debug, Clone, PartialEq)]
pub struct Call {
    pub body: Arc<Circuit>,
    pub offset: usize,
    pub adjoint: bool,
    /// Overrides the tags of every gate inside the body.
    pub tag: Option<Tag>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    Gate(Gate),
    Call(Call),
}

/// Ordered operations over `width` qubits.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Circuit {
    width: usize,
    registers: Vec<Register>,
    ops: Vec<Op>,
    kernel: Option<Kernel>,
}

/// Context passed to [`Circuit::visit`] for each flattened gate.
#[derive(Debug, Clone, Copy)]
pub struct Placement {
    pub offset: usize,
    pub adjoint: bool,
    pub tag: Option<Tag>,
}

impl Placement {
    pub fn tag_of(&self, g: &Gate) -> Tag {
        self.tag.unwrap_or(g.tag)
    }

    /// Materialises the gate at its absolute position.
    pub fn resolve(&self, g: &Gate) -> Gate {
        let mut out = if self.adjoint { g.adjoint() } else { g.clone() };
        if self.offset != 0 {
            for q in &mut out.qubits {
                *q += self.offset;
            }
        }
        out.tag = self.tag_of(g);
        out
    }
}

impl Circuit {
    pub fn new(width: usize) -> Circuit {
        Circuit { width, ..Default::default() }
    }

    pub fn with_registers(width: usize, registers: Vec<Register>) -> Result<Circuit> {
        for r in &registers {
            if r.start + r.len > width {
                return Err(Error::InvalidInput(format!("register {} exceeds width {width}", r.name)));
            }
        }
        Ok(Circuit { width, registers, ..Default::default() })
    }

    /// Layout `{flag, zeros(q), state(q)}`.
    pub fn fable_layout(q: usize) -> Circuit {
        let regs = vec![
            Register { name: reg::FLAG.into(), start: 0, len: 1 },
            Register { name: reg::ZEROS.into(), start: 1, len: q },
            Register { name: reg::STATE.into(), start: 1 + q, len: q },
        ];
        Circuit { width: 2 * q + 1, registers: regs, ..Default::default() }
    }

    /// Layout `{AA_flag, flag, zeros(q), state(q)}`.
    pub fn pipeline_layout(q: usize) -> Circuit {
        let regs = vec![
            Register { name: reg::AA_FLAG.into(), start: 0, len: 1 },
            Register { name: reg::FLAG.into(), start: 1, len: 1 },
            Register { name: reg::ZEROS.into(), start: 2, len: q },
            Register { name: reg::STATE.into(), start: 2 + q, len: q },
        ];
        Circuit { width: 2 * q + 2, registers: regs, ..Default::default() }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn registers(&self) -> &[Register] {
        &self.registers
    }

    pub fn register(&self, name: &str) -> Option<&Register> {
        self.registers.iter().find(|r| r.name == name)
    }

    pub fn ops(&self) -> &[Op] {
        &self.ops
    }

    pub fn kernel(&self) -> Option<&Kernel> {
        self.kernel.as_ref()
    }

    /// Attaches a closed form. The caller guarantees it equals the gate list.
    pub fn set_kernel(&mut self, k: Option<Kernel>) {
        self.kernel = k;
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Validates and appends one gate.
    pub fn append(&mut self, g: Gate) -> Result<()> {
        g.validate(self.width)?;
        self.ops.push(Op::Gate(g));
        Ok(())
    }

    /// Appends a call to a shared body occupying qubits `offset..offset+body.width()`.
    pub fn call(&mut self, body: Arc<Circuit>, offset: usize, adjoint: bool, tag: Option<Tag>) -> Result<()> {
        if offset + body.width > self.width {
            return Err(Error::WidthMismatch { expected: self.width, found: offset + body.width });
        }
        self.ops.push(Op::Call(Call { body, offset, adjoint, tag }));
        Ok(())
    }

    /// Appends every operation of `other`, shifted by `offset` qubits.
    pub fn extend_from(&mut self, other: &Circuit, offset: usize) -> Result<()> {
        if offset + other.width > self.width {
            return Err(Error::WidthMismatch { expected: self.width, found: offset + other.width });
        }
        for op in &other.ops {
            match op {
                Op::Gate(g) => {
                    let mut g = g.clone();
                    for q in &mut g.qubits {
                        *q += offset;
                    }
                    self.ops.push(Op::Gate(g));
                }
                Op::Call(c) => self.ops.push(Op::Call(Call { offset: c.offset + offset, ..c.clone() })),
            }
        }
        Ok(())
    }

    /// Sequential composition on equal widths.
    pub fn compose(&self, other: &Circuit) -> Result<Circuit> {
        if self.width != other.width {
            return Err(Error::WidthMismatch { expected: self.width, found: other.width });
        }
        let mut out = self.clone();
        out.kernel = None;
        out.extend_from(other, 0)?;
        Ok(out)
    }

    /// Reversed operations, each replaced by its adjoint.
    pub fn inverse(&self) -> Circuit {
        let ops = self
            .ops
            .iter()
            .rev()
            .map(|op| match op {
                Op::Gate(g) => Op::Gate(g.adjoint()),
                Op::Call(c) => Op::Call(Call { adjoint: !c.adjoint, ..c.clone() }),
            })
            .collect();
        Circuit {
            width: self.width,
            registers: self.registers.clone(),
            ops,
            kernel: self.kernel.as_ref().map(Kernel::adjoint),
        }
    }

    /// Returns a copy with every gate (calls included) assigned `tag`.
    pub fn retagged(&self, tag: Tag) -> Circuit {
        let ops = self
            .ops
            .iter()
            .map(|op| match op {
                Op::Gate(g) => Op::Gate(g.clone().tagged(tag)),
                Op::Call(c) => Op::Call(Call { tag: Some(tag), ..c.clone() }),
            })
            .collect();
        Circuit { ops, ..self.clone() }
    }

    /// Walks flattened gates in execution order.
    pub fn visit<F: FnMut(&Gate, &Placement)>(&self, f: &mut F) {
        self.visit_at(&Placement { offset: 0, adjoint: false, tag: None }, f);
    }

    fn visit_at<F: FnMut(&Gate, &Placement)>(&self, at: &Placement, f: &mut F) {
        let mut step = |op: &Op| match op {
            Op::Gate(g) => f(g, at),
            Op::Call(c) => {
                let inner = Placement {
                    offset: at.offset + c.offset,
                    adjoint: at.adjoint ^ c.adjoint,
                    tag: at.tag.or(c.tag),
                };
                c.body.visit_at(&inner, f);
            }
        };
        if at.adjoint {
            self.ops.iter().rev().for_each(&mut step);
        } else {
            self.ops.iter().for_each(&mut step);
        }
    }

    /// Fully expanded gate list.
    pub fn gates(&self) -> Vec<Gate> {
        let mut out = Vec::new();
        self.visit(&mut |g, at| out.push(at.resolve(g)));
        out
    }

    /// A call-free copy with the same gates.
    pub fn flattened(&self) -> Circuit {
        Circuit {
            width: self.width,
            registers: self.registers.clone(),
            ops: self.gates().into_iter().map(Op::Gate).collect(),
            kernel: self.kernel.clone(),
        }
    }

    pub fn gate_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, _| n += 1);
        n
    }

    pub fn count_by_kind(&self) -> BTreeMap<GateKind, usize> {
        let mut m = BTreeMap::new();
        self.visit(&mut |g, _| *m.entry(g.kind).or_insert(0) += 1);
        m
    }

    /// ASAP layer count.
    pub fn depth(&self) -> usize {
        let mut layer = vec![0usize; self.width];
        let mut best = 0;
        self.visit(&mut |g, at| {
            let l = 1 + g.qubits.iter().map(|q| layer[q + at.offset]).max().unwrap_or(0);
            for q in &g.qubits {
                layer[q + at.offset] = l;
            }
            best = best.max(l);
        });
        best
    }

    /// Total depth plus the depth of each tag's gates scheduled on their own.
    pub fn depth_by_subroutine(&self) -> DepthReport {
        let mut total = vec![0usize; self.width];
        let mut per_tag = vec![vec![0usize; self.width]; Tag::ALL.len()];
        let mut best_total = 0;
        let mut best_tag = [0usize; 6];
        let mut counts = BTreeMap::new();
        let mut tag_counts = BTreeMap::new();
        self.visit(&mut |g, at| {
            let tag = at.tag_of(g);
            let lt = &mut per_tag[tag.slot()];
            let l = 1 + g.qubits.iter().map(|q| total[q + at.offset]).max().unwrap_or(0);
            let m = 1 + g.qubits.iter().map(|q| lt[q + at.offset]).max().unwrap_or(0);
            for q in &g.qubits {
                total[q + at.offset] = l;
                lt[q + at.offset] = m;
            }
            best_total = best_total.max(l);
            best_tag[tag.slot()] = best_tag[tag.slot()].max(m);
            *counts.entry(g.kind).or_insert(0usize) += 1;
            *tag_counts.entry(tag).or_insert(0usize) += 1;
        });
        let depth_by_tag = Tag::ALL.iter().filter(|t| best_tag[t.slot()] > 0).map(|t| (*t, best_tag[t.slot()])).collect();
        DepthReport { total_depth: best_total, depth_by_tag, count_by_kind: counts, count_by_tag: tag_counts, width: self.width }
    }
}

/// Depth and gate-count summary of one circuit.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DepthReport {
    pub total_depth: usize,
    pub depth_by_tag: BTreeMap<Tag, usize>,
    pub count_by_kind: BTreeMap<GateKind, usize>,
    pub count_by_tag: BTreeMap<Tag, usize>,
    pub width: usize,
}

impl DepthReport {
    pub fn gate_count(&self) -> usize {
        self.count_by_kind.values().sum()
    }

    pub fn tag_depth(&self, t: Tag) -> usize {
        self.depth_by_tag.get(&t).copied().unwrap_or(0)
    }
}
