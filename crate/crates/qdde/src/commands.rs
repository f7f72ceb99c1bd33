//! The scan and report commands. Each computes typed rows first and
//! renders them separately, so tests can check values without parsing
//! CSV back.

use std::collections::btree_map::{BTreeMap, Entry};
use std::path::{Path, PathBuf};

use qdde_core::circuit::{DepthReport, Tag};
use qdde_core::dde::{self, DdeProblem, EigenSpectrum, GridField};
use qdde_core::rebase::{self, GateSetId};
use qdde_core::sim::{self, EpsilonReport, StateVector};
use qdde_core::synth::{self, FableBlock, FableSpec, Pipeline, PipelineSpec};

use crate::error::{CliError, Result};
use crate::numfmt::fmt12;
use crate::scenario::{Scenario, DEFAULT_ERROR_SCAN_N_X};

/// Gate sets drawn in the subroutine depth plots.
pub const DEPTH_SCAN_SETS: [GateSetId; 5] =
    [GateSetId::Unconstrained, GateSetId::Tket, GateSetId::Heron, GateSetId::Star, GateSetId::Ionq];
pub const GATESET_SCAN_SETS: [GateSetId; 2] = [GateSetId::Tket, GateSetId::Star];
pub const GATESET_SCAN_TAGS: [Tag; 4] = [Tag::StatePrep, Tag::QFT, Tag::FABLE, Tag::OAA];
/// Coherent operations available before errors dominate.
pub const COHERENT_BUDGET: f64 = 300.0;
/// Physical qubits needed per logical qubit to correct any single error.
pub const PHYSICAL_PER_LOGICAL: usize = 5;

/// A header and stringified rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Table {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::io("<csv buffer>", e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is built from UTF-8 strings"))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_csv()?)
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt12).unwrap_or_default()
}

fn spec_for(sc: &Scenario, prob: DdeProblem) -> PipelineSpec {
    PipelineSpec {
        problem: prob,
        state_prep: sc.state_prep,
        oaa_mode: sc.oaa_mode,
        oaa_repetitions: sc.oaa_repetitions,
        fable_tolerance: sc.fable_tolerance,
        oaa_compensation: sc.oaa_compensation,
    }
}

/// Simulated pipeline with its classical references.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub problem: DdeProblem,
    pub pipeline: Pipeline,
    pub state: StateVector,
    pub initial: GridField,
    pub analytic: GridField,
    pub classical: GridField,
}

/// Builds and simulates the pipeline, refusing widths above the cap.
pub fn prepare(sc: &Scenario, prob: DdeProblem) -> Result<Prepared> {
    prob.validate().map_err(|e| CliError::InvalidScenario(e.to_string()))?;
    let width = 2 * prob.q() + 2;
    if width > sc.width_cap {
        return Err(CliError::ResourceCap { width, cap: sc.width_cap });
    }
    let pipeline = synth::assemble_pipeline(&spec_for(sc, prob))?;
    let state = sim::run(&pipeline.circuit, None)?;
    let initial = dde::initial_condition(&prob)?;
    let analytic = dde::analytic_field(&prob, prob.t0 + prob.t_final)?;
    let classical = dde::classical_diag_solve(&prob, &initial)?;
    Ok(Prepared { problem: prob, pipeline, state, initial, analytic, classical })
}

#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub problem: DdeProblem,
    pub initial: GridField,
    pub analytic: GridField,
    pub classical: GridField,
    pub quantum: GridField,
    pub eps: EpsilonReport,
    pub success_fraction: f64,
    pub shots: u64,
    pub seed: u64,
    pub repetitions: usize,
    pub fable_tolerance: f64,
    pub width: usize,
}

fn measure(p: &Prepared, sc: &Scenario, shots: u64) -> Result<SolveOutput> {
    let m = sim::measure_pipeline(&p.state, &p.problem, shots, sc.seed, sc.shot_mode)?;
    let eps = sim::epsilon_report(&m.recovered, &p.classical, &p.analytic)?;
    Ok(SolveOutput {
        problem: p.problem,
        initial: p.initial.clone(),
        analytic: p.analytic.clone(),
        classical: p.classical.clone(),
        quantum: m.recovered,
        eps,
        success_fraction: m.success_fraction,
        shots,
        seed: sc.seed,
        repetitions: p.pipeline.repetitions,
        fable_tolerance: p.pipeline.fable_tolerance,
        width: p.pipeline.circuit.width(),
    })
}

pub fn solve(sc: &Scenario) -> Result<SolveOutput> {
    let p = prepare(sc, sc.problem)?;
    measure(&p, sc, sc.shots)
}

impl SolveOutput {
    /// One row per grid point.
    pub fn grid_table(&self) -> Table {
        let d = self.problem.d;
        let mut header: Vec<String> = (0..d).map(|k| format!("x{k}")).collect();
        header.push("initial".into());
        if d == 1 {
            header.push("analytic".into());
        }
        header.extend(["classical".into(), "quantum".into()]);
        let mut t = Table { header, rows: Vec::new() };
        for i in 0..self.problem.grid_len() {
            let mut row: Vec<String> = self.problem.multi_index(i).iter().map(|&j| fmt12(self.problem.coord(j))).collect();
            row.push(fmt12(self.initial.values[i]));
            if d == 1 {
                row.push(fmt12(self.analytic.values[i]));
            }
            row.push(fmt12(self.classical.values[i]));
            row.push(fmt12(self.quantum.values[i]));
            t.rows.push(row);
        }
        t
    }

    pub fn summary_table(&self) -> Table {
        let mut t = Table::new(&[
            "d",
            "n_x",
            "width",
            "shots",
            "seed",
            "oaa_repetitions",
            "fable_tolerance",
            "success_probability",
            "eps_c",
            "eps_q",
            "eps",
        ]);
        t.rows.push(vec![
            self.problem.d.to_string(),
            self.problem.n_x.to_string(),
            self.width.to_string(),
            self.shots.to_string(),
            self.seed.to_string(),
            self.repetitions.to_string(),
            fmt12(self.fable_tolerance),
            fmt12(self.success_fraction),
            fmt12(self.eps.eps_c),
            fmt12(self.eps.eps_q),
            fmt12(self.eps.eps),
        ]);
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRow {
    pub n_x: usize,
    pub eps: EpsilonReport,
}

pub fn error_scan(sc: &Scenario) -> Result<Vec<ErrorRow>> {
    let grid = sc.n_x_list.clone().unwrap_or_else(|| DEFAULT_ERROR_SCAN_N_X.to_vec());
    grid.iter()
        .map(|&n_x| {
            let p = prepare(sc, sc.problem_at(sc.problem.d, n_x))?;
            Ok(ErrorRow { n_x, eps: measure(&p, sc, sc.shots)?.eps })
        })
        .collect()
}

pub fn error_table(rows: &[ErrorRow]) -> Table {
    let mut t = Table::new(&["n_x", "eps", "eps_c", "eps_q"]);
    for r in rows {
        t.rows.push(vec![r.n_x.to_string(), fmt12(r.eps.eps), fmt12(r.eps.eps_c), fmt12(r.eps.eps_q)]);
    }
    t
}

/// `gate_set` is `None` for the theoretical series.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthRow {
    pub subroutine: Tag,
    pub gate_set: Option<GateSetId>,
    pub q: usize,
    pub n_x: usize,
    pub depth: usize,
    pub gate_count: usize,
}

/// The FABLE block of `d = 1`, `n_x = 2^q` under the scenario parameters.
pub fn fable_block(sc: &Scenario, q: usize) -> Result<FableBlock> {
    let prob = sc.problem_at(1, 1 << q);
    prob.validate().map_err(|e| CliError::InvalidScenario(e.to_string()))?;
    let tol = match sc.fable_tolerance {
        Some(t) => t,
        None => synth::discretization_error(&prob)?,
    };
    let spectrum = EigenSpectrum::of(&prob)?;
    let powered = synth::diag_power(&spectrum, prob.n_t, tol)?;
    let entries = (0..1usize << q).map(|y| powered.entries[synth::qft_bin(&prob, y)]).collect();
    Ok(synth::synth_fable(&FableSpec { q, entries, tolerance: tol, alpha: powered.alpha })?)
}

pub fn depth_scan(sc: &Scenario) -> Result<Vec<DepthRow>> {
    let sets = sc.gate_sets_or(&DEPTH_SCAN_SETS);
    let mut rows = Vec::new();
    for &q in &sc.q_list {
        let theory = rebase::theoretical_counts(sc.subroutine, q)?.value();
        rows.push(DepthRow { subroutine: sc.subroutine, gate_set: None, q, n_x: 1 << q, depth: theory, gate_count: theory });
        let c = match sc.subroutine {
            Tag::QFT => synth::synth_qft(q)?,
            Tag::FABLE => fable_block(sc, q)?.circuit,
            other => return Err(CliError::InvalidScenario(format!("subroutine {other} is not scanned"))),
        };
        for &gs in &sets {
            let r = rebase::rebase(&c, gs)?;
            rows.push(DepthRow {
                subroutine: sc.subroutine,
                gate_set: Some(gs),
                q,
                n_x: 1 << q,
                depth: r.depth(),
                gate_count: r.gate_count(),
            });
        }
    }
    Ok(rows)
}

fn set_name(gs: Option<GateSetId>) -> &'static str {
    gs.map(|g| g.name()).unwrap_or("theoretical")
}

pub fn depth_table(rows: &[DepthRow]) -> Table {
    let mut t = Table::new(&["subroutine", "gate_set", "q", "n_x", "depth", "gate_count"]);
    for r in rows {
        t.rows.push(vec![
            r.subroutine.to_string(),
            set_name(r.gate_set).into(),
            r.q.to_string(),
            r.n_x.to_string(),
            r.depth.to_string(),
            r.gate_count.to_string(),
        ]);
    }
    t
}

/// Rebased pipeline depths, keyed by `(d, n_x, gate set)`.
#[derive(Debug, Default)]
pub struct DepthCache {
    reports: BTreeMap<(usize, usize, GateSetId), DepthReport>,
}

impl DepthCache {
    pub fn get(&mut self, sc: &Scenario, d: usize, n_x: usize, gs: GateSetId) -> Result<&DepthReport> {
        match self.reports.entry((d, n_x, gs)) {
            Entry::Occupied(e) => Ok(e.into_mut()),
            Entry::Vacant(e) => {
                let prob = sc.problem_at(d, n_x);
                prob.validate().map_err(|e| CliError::InvalidScenario(e.to_string()))?;
                let p = synth::assemble_pipeline(&spec_for(sc, prob))?;
                Ok(e.insert(rebase::rebase(&p.circuit, gs)?.depth_by_subroutine()))
            }
        }
    }
}

/// `tag = None` is the whole-circuit total.
#[derive(Debug, Clone, PartialEq)]
pub struct GatesetRow {
    pub d: usize,
    pub n_x: usize,
    pub gate_set: GateSetId,
    pub tag: Option<Tag>,
    pub depth: usize,
    /// `d²·n_x^{d/2}` scaled to the `d = 1`, `n_x = 16` TKET total; totals only.
    pub theoretical: Option<f64>,
}

pub fn theoretical_scaling(d: usize, n_x: usize) -> f64 {
    (d * d) as f64 * (n_x as f64).powf(d as f64 / 2.0)
}

pub fn gateset_scan(sc: &Scenario, cache: &mut DepthCache) -> Result<Vec<GatesetRow>> {
    let sets = sc.gate_sets_or(&GATESET_SCAN_SETS);
    let anchor = cache.get(sc, 1, 16, GateSetId::Tket)?.total_depth as f64 / theoretical_scaling(1, 16);
    let mut rows = Vec::new();
    for &(d, n_x) in &sc.cases {
        for &gs in &sets {
            let rep = cache.get(sc, d, n_x, gs)?;
            for tag in GATESET_SCAN_TAGS {
                rows.push(GatesetRow { d, n_x, gate_set: gs, tag: Some(tag), depth: rep.tag_depth(tag), theoretical: None });
            }
            rows.push(GatesetRow {
                d,
                n_x,
                gate_set: gs,
                tag: None,
                depth: rep.total_depth,
                theoretical: Some(anchor * theoretical_scaling(d, n_x)),
            });
        }
    }
    Ok(rows)
}

pub fn gateset_table(rows: &[GatesetRow]) -> Table {
    let mut t = Table::new(&["d", "n_x", "gate_set", "tag", "depth", "theoretical"]);
    for r in rows {
        t.rows.push(vec![
            r.d.to_string(),
            r.n_x.to_string(),
            r.gate_set.name().into(),
            r.tag.map(|t| t.name()).unwrap_or("Total").into(),
            r.depth.to_string(),
            opt(r.theoretical),
        ]);
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResourceEstimate {
    pub d: usize,
    pub n_x: usize,
    pub logical_qubits: usize,
    pub physical_lower_bound: usize,
    pub star_depth: usize,
    pub budget_percent: f64,
}

impl ResourceEstimate {
    pub fn new(d: usize, n_x: usize, logical_qubits: usize, star_depth: usize) -> Self {
        ResourceEstimate {
            d,
            n_x,
            logical_qubits,
            physical_lower_bound: PHYSICAL_PER_LOGICAL * logical_qubits,
            star_depth,
            budget_percent: 100.0 * star_depth as f64 / COHERENT_BUDGET,
        }
    }
}

pub fn resource_table(sc: &Scenario, cache: &mut DepthCache) -> Result<Vec<ResourceEstimate>> {
    sc.cases
        .iter()
        .map(|&(d, n_x)| {
            let rep = cache.get(sc, d, n_x, GateSetId::Star)?;
            Ok(ResourceEstimate::new(d, n_x, rep.width, rep.total_depth))
        })
        .collect()
}

pub fn resource_markdown(rows: &[ResourceEstimate]) -> String {
    let mut s = String::from(
        "| d | n_x | logical qubits | physical qubits | STAR depth | budget (300 ops) |\n|---|---|---|---|---|---|\n",
    );
    for r in rows {
        s.push_str(&format!(
            "| {} | {} | {} | ≥{} | {} | {:.0}% |\n",
            r.d, r.n_x, r.logical_qubits, r.physical_lower_bound, r.star_depth, r.budget_percent
        ));
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotsRow {
    pub shots: u64,
    pub eps_q: f64,
    /// Hoeffding accuracy at failure chance `hoeffding_delta` for this `N`.
    pub bound_eps_q: f64,
    /// Hoeffding failure chance at accuracy `hoeffding_eps` for this `N`.
    pub bound_delta: f64,
}

pub fn shots_scan(sc: &Scenario) -> Result<Vec<ShotsRow>> {
    let p = prepare(sc, sc.problem)?;
    sc.shots_list
        .iter()
        .map(|&n| {
            let eps_q = measure(&p, sc, n)?.eps.eps_q;
            let bound_eps_q = (-(sc.hoeffding_delta / 2.0).ln() / (2.0 * n as f64)).sqrt();
            Ok(ShotsRow { shots: n, eps_q, bound_eps_q, bound_delta: sim::hoeffding_delta(n, sc.hoeffding_eps) })
        })
        .collect()
}

pub fn shots_table(rows: &[ShotsRow]) -> Table {
    let mut t = Table::new(&["N", "eps_q", "bound_eps_q", "bound_delta"]);
    for r in rows {
        t.rows.push(vec![r.shots.to_string(), fmt12(r.eps_q), fmt12(r.bound_eps_q), fmt12(r.bound_delta)]);
    }
    t
}

/// Shots the bound requires at the scenario's `(δ, ε_q)`.
pub fn shots_bound_table(sc: &Scenario) -> Result<Table> {
    let mut t = Table::new(&["delta", "eps_q", "shots_required"]);
    let n = sim::hoeffding_shots(sc.hoeffding_delta, sc.hoeffding_eps)?;
    t.rows.push(vec![fmt12(sc.hoeffding_delta), fmt12(sc.hoeffding_eps), n.to_string()]);
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatePrepRow {
    pub d: usize,
    pub n_x: usize,
    pub q: usize,
    pub naive_depth: usize,
    pub lowrank_depth: usize,
    pub reduction_percent: f64,
}

/// Normalised initial amplitudes of a grid.
pub fn initial_amplitudes(prob: &DdeProblem) -> Result<Vec<f64>> {
    let p0 = dde::initial_condition(prob)?;
    let norm = p0.l2_norm();
    Ok(p0.values.iter().map(|v| v / norm).collect())
}

pub fn stateprep_compare(sc: &Scenario) -> Result<Vec<StatePrepRow>> {
    let grid = sc.n_x_list.clone().unwrap_or_else(|| vec![16]);
    let mut rows = Vec::new();
    for &d in &sc.d_list {
        for &n_x in &grid {
            let prob = sc.problem_at(d, n_x);
            prob.validate().map_err(|e| CliError::InvalidScenario(e.to_string()))?;
            let amps = initial_amplitudes(&prob)?;
            let q = prob.q();
            let naive = rebase::rebase(&synth::synth_state_prep_naive(&amps, q)?, GateSetId::Tket)?.depth();
            let lowrank = rebase::rebase(&synth::synth_state_prep_lowrank(&amps, d, n_x)?, GateSetId::Tket)?.depth();
            let reduction_percent = if naive == 0 { 0.0 } else { 100.0 * (naive as f64 - lowrank as f64) / naive as f64 };
            rows.push(StatePrepRow { d, n_x, q, naive_depth: naive, lowrank_depth: lowrank, reduction_percent });
        }
    }
    Ok(rows)
}

pub fn stateprep_table(rows: &[StatePrepRow]) -> Table {
    let mut t = Table::new(&["d", "n_x", "q", "naive_depth", "lowrank_depth", "reduction_percent"]);
    for r in rows {
        t.rows.push(vec![
            r.d.to_string(),
            r.n_x.to_string(),
            r.q.to_string(),
            r.naive_depth.to_string(),
            r.lowrank_depth.to_string(),
            fmt12(r.reduction_percent),
        ]);
    }
    t
}

/// Membership table of every gate set.
pub fn gate_set_catalog() -> String {
    let mut s = String::new();
    for gs in GateSetId::ALL {
        let kinds: Vec<&str> = gs.members().iter().map(|k| k.name()).collect();
        s.push_str(&format!("{:<13} {}\n", gs.name(), kinds.join(" ")));
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    ErrorScan,
    DepthScan,
    GatesetScan,
    ResourceTable,
    ShotsScan,
    StateprepCompare,
}

/// Runs one command and writes its artefacts under `out`.
pub fn run(cmd: Command, sc: &Scenario, out: &Path) -> Result<Vec<PathBuf>> {
    let path = |name: &str| out.join(name);
    let mut written = Vec::new();
    let mut emit = |name: &str, t: &Table| -> Result<()> {
        t.write_csv(&path(name))?;
        written.push(path(name));
        Ok(())
    };
    match cmd {
        Command::Solve => {
            let s = solve(sc)?;
            emit("solve.csv", &s.grid_table())?;
            emit("solve_summary.csv", &s.summary_table())?;
        }
        Command::ErrorScan => emit("error_scan.csv", &error_table(&error_scan(sc)?))?,
        Command::DepthScan => emit("depth_scan.csv", &depth_table(&depth_scan(sc)?))?,
        Command::GatesetScan => emit("gateset_scan.csv", &gateset_table(&gateset_scan(sc, &mut DepthCache::default())?))?,
        Command::ResourceTable => {
            let md = resource_markdown(&resource_table(sc, &mut DepthCache::default())?);
            write_file(&path("resource_table.md"), &md)?;
            written.push(path("resource_table.md"));
        }
        Command::ShotsScan => {
            emit("shots_scan.csv", &shots_table(&shots_scan(sc)?))?;
            emit("shots_bound.csv", &shots_bound_table(sc)?)?;
        }
        Command::StateprepCompare => emit("stateprep_compare.csv", &stateprep_table(&stateprep_compare(sc)?))?,
    }
    Ok(written)
}
