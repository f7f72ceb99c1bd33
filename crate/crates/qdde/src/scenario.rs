//! Flat `key = value` scenario files.
//!
//! One assignment per line, `#` starts a comment, keys are case-sensitive
//! and may appear at most once. Lists are comma-separated. Anything not
//! given takes the reference parameters (`d = 1`, `n_x = 32`, `L = 20`).

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use qdde_core::circuit::Tag;
use qdde_core::dde::DdeProblem;
use qdde_core::rebase::GateSetId;
use qdde_core::sim::ShotMode;
use qdde_core::synth::{OaaMode, StatePrepMethod};

use crate::error::{CliError, Result};

/// Default simulation width cap in qubits.
pub const DEFAULT_WIDTH_CAP: usize = 26;

pub const DEFAULT_ERROR_SCAN_N_X: [usize; 4] = [16, 32, 64, 128];
pub const DEFAULT_SHOTS_LIST: [u64; 9] = [50, 100, 250, 500, 1000, 5000, 10_000, 50_000, 100_000];

/// Every recognised key.
pub const KEYS: &[&str] = &[
    "d",
    "n_x",
    "n_t",
    "L",
    "T",
    "a",
    "D",
    "zeta",
    "epsilon",
    "x0",
    "t0",
    "N",
    "shots",
    "seed",
    "gate_sets",
    "state_prep",
    "oaa_mode",
    "oaa_repetitions",
    "fable_tolerance",
    "oaa_compensation",
    "shot_mode",
    "width_cap",
    "out",
    "n_x_list",
    "shots_list",
    "d_list",
    "q_list",
    "subroutine",
    "cases",
    "hoeffding_delta",
    "hoeffding_eps",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub problem: DdeProblem,
    pub shots: u64,
    pub seed: u64,
    /// `None` lets each command pick its own default sets.
    pub gate_sets: Option<Vec<GateSetId>>,
    pub state_prep: StatePrepMethod,
    pub oaa_mode: OaaMode,
    pub oaa_repetitions: Option<usize>,
    pub fable_tolerance: Option<f64>,
    pub oaa_compensation: bool,
    pub shot_mode: ShotMode,
    pub width_cap: usize,
    pub out: Option<PathBuf>,
    pub n_x_list: Option<Vec<usize>>,
    pub shots_list: Vec<u64>,
    pub d_list: Vec<usize>,
    pub q_list: Vec<usize>,
    pub subroutine: Tag,
    /// `(d, n_x)` pairs for the pipeline-wide commands.
    pub cases: Vec<(usize, usize)>,
    pub hoeffding_delta: f64,
    pub hoeffding_eps: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            problem: DdeProblem::table2(1, 32, 20.0),
            shots: 50_000,
            seed: 0,
            gate_sets: None,
            state_prep: StatePrepMethod::Naive,
            oaa_mode: OaaMode::PaperCount,
            oaa_repetitions: None,
            fable_tolerance: None,
            oaa_compensation: true,
            shot_mode: ShotMode::PostSelected,
            width_cap: DEFAULT_WIDTH_CAP,
            out: None,
            n_x_list: None,
            shots_list: DEFAULT_SHOTS_LIST.to_vec(),
            d_list: vec![1, 2, 3],
            q_list: vec![2, 3, 4, 5],
            subroutine: Tag::QFT,
            cases: vec![(1, 16), (2, 32)],
            hoeffding_delta: 0.1,
            hoeffding_eps: 0.003,
        }
    }
}

impl Scenario {
    pub fn from_file(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        text.parse()
    }

    /// The problem with another grid.
    pub fn problem_at(&self, d: usize, n_x: usize) -> DdeProblem {
        DdeProblem { d, n_x, ..self.problem }
    }

    pub fn gate_sets_or(&self, default: &[GateSetId]) -> Vec<GateSetId> {
        self.gate_sets.clone().unwrap_or_else(|| default.to_vec())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::InvalidScenario(m));
        if let Err(e) = self.problem.validate() {
            return bad(e.to_string());
        }
        if self.shots == 0 {
            return bad("N must be at least 1".into());
        }
        if matches!(&self.gate_sets, Some(g) if g.is_empty()) {
            return bad("gate_sets is empty".into());
        }
        if let Some(t) = self.fable_tolerance {
            if !(t > 0.0 && t.is_finite()) {
                return bad(format!("fable_tolerance = {t} must be positive"));
            }
        }
        if !(self.hoeffding_delta > 0.0 && self.hoeffding_delta <= 2.0) {
            return bad(format!("hoeffding_delta = {} outside (0, 2]", self.hoeffding_delta));
        }
        if !(self.hoeffding_eps > 0.0 && self.hoeffding_eps.is_finite()) {
            return bad(format!("hoeffding_eps = {} must be positive", self.hoeffding_eps));
        }
        if self.shots_list.contains(&0) {
            return bad("shots_list entries must be at least 1".into());
        }
        if self.q_list.contains(&0) {
            return bad("q_list entries must be at least 1".into());
        }
        let grids = self
            .cases
            .iter()
            .copied()
            .chain(self.d_list.iter().flat_map(|&d| self.n_x_list.iter().flatten().map(move |&n| (d, n))))
            .chain(self.n_x_list.iter().flatten().map(|&n| (self.problem.d, n)));
        for (d, n_x) in grids {
            if let Err(e) = self.problem_at(d, n_x).validate() {
                return bad(format!("d = {d}, n_x = {n_x}: {e}"));
            }
        }
        if !matches!(self.subroutine, Tag::QFT | Tag::FABLE) {
            return bad(format!("subroutine {} is not scanned; use QFT or FABLE", self.subroutine));
        }
        Ok(())
    }
}

impl FromStr for Scenario {
    type Err = CliError;

    fn from_str(text: &str) -> Result<Scenario> {
        let mut sc = Scenario::default();
        let mut seen = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |msg: String| CliError::Scenario { line, msg };
            let (key, value) = content.split_once('=').ok_or_else(|| err(format!("expected `key = value`, got `{content}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(err(format!("unknown key `{key}`")));
            }
            // `N` and `shots` name the same field.
            let canonical = if key == "shots" { "N" } else { key };
            if !seen.insert(canonical) {
                return Err(err(format!("duplicate key `{key}`")));
            }
            apply(&mut sc, canonical, value).map_err(err)?;
        }
        sc.validate()?;
        Ok(sc)
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("`{key}`: cannot parse `{v}`"))
}

fn list<T: FromStr>(key: &str, v: &str) -> std::result::Result<Vec<T>, String> {
    v.split(',').map(|s| num(key, s.trim())).collect()
}

fn boolean(key: &str, v: &str) -> std::result::Result<bool, String> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(format!("`{key}`: expected a boolean, got `{v}`")),
    }
}

/// Parses `NAME[,NAME...]`.
pub fn parse_gate_sets(v: &str) -> std::result::Result<Vec<GateSetId>, String> {
    v.split(',').map(|s| s.trim().parse::<GateSetId>().map_err(|e| e.to_string())).collect()
}

fn apply(sc: &mut Scenario, key: &str, v: &str) -> std::result::Result<(), String> {
    let p = &mut sc.problem;
    match key {
        "d" => p.d = num(key, v)?,
        "n_x" => p.n_x = num(key, v)?,
        "n_t" => p.n_t = num(key, v)?,
        "L" => p.l = num(key, v)?,
        "T" => p.t_final = num(key, v)?,
        "a" => p.a = num(key, v)?,
        "D" => p.diff = num(key, v)?,
        "zeta" => p.zeta = num(key, v)?,
        "epsilon" => p.epsilon = num(key, v)?,
        "x0" => p.x0 = num(key, v)?,
        "t0" => p.t0 = num(key, v)?,
        "N" => sc.shots = num(key, v)?,
        "seed" => sc.seed = num(key, v)?,
        "gate_sets" => sc.gate_sets = Some(parse_gate_sets(v)?),
        "state_prep" => {
            sc.state_prep = match v.to_ascii_lowercase().as_str() {
                "naive" => StatePrepMethod::Naive,
                "lowrank" | "low_rank" | "low-rank" => StatePrepMethod::LowRank,
                _ => return Err(format!("`state_prep`: expected naive or lowrank, got `{v}`")),
            }
        }
        "oaa_mode" => {
            sc.oaa_mode = match v.to_ascii_lowercase().as_str() {
                "paper_count" => OaaMode::PaperCount,
                "oracle_count" => OaaMode::OracleCount,
                _ => return Err(format!("`oaa_mode`: expected paper_count or oracle_count, got `{v}`")),
            }
        }
        "oaa_repetitions" => sc.oaa_repetitions = Some(num(key, v)?),
        "fable_tolerance" => sc.fable_tolerance = Some(num(key, v)?),
        "oaa_compensation" => sc.oaa_compensation = boolean(key, v)?,
        "shot_mode" => {
            sc.shot_mode = match v.to_ascii_lowercase().as_str() {
                "postselected" | "post_selected" => ShotMode::PostSelected,
                "raw" => ShotMode::Raw,
                _ => return Err(format!("`shot_mode`: expected postselected or raw, got `{v}`")),
            }
        }
        "width_cap" => sc.width_cap = num(key, v)?,
        "out" => sc.out = Some(PathBuf::from(v)),
        "n_x_list" => sc.n_x_list = Some(list(key, v)?),
        "shots_list" => sc.shots_list = list(key, v)?,
        "d_list" => sc.d_list = list(key, v)?,
        "q_list" => sc.q_list = list(key, v)?,
        "subroutine" => sc.subroutine = v.parse::<Tag>().map_err(|e| e.to_string())?,
        "cases" => {
            sc.cases = v
                .split(',')
                .map(|pair| {
                    let (d, n) = pair.trim().split_once(':').ok_or_else(|| format!("`cases`: expected d:n_x, got `{pair}`"))?;
                    Ok((num(key, d.trim())?, num(key, n.trim())?))
                })
                .collect::<std::result::Result<_, String>>()?
        }
        "hoeffding_delta" => sc.hoeffding_delta = num(key, v)?,
        "hoeffding_eps" => sc.hoeffding_eps = num(key, v)?,
        _ => unreachable!("key list and match arms agree"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_reference_parameters() {
        let sc: Scenario = "".parse().unwrap();
        let p = sc.problem;
        assert_eq!((p.d, p.n_x, p.n_t), (1, 32, 100));
        assert_eq!((p.l, p.t_final, p.a, p.diff, p.zeta, p.epsilon), (20.0, 10.0, 0.2366, 0.2455, 1.0, 0.03));
        assert_eq!(sc.shots, 50_000);
        assert_eq!(sc.width_cap, 26);
    }

    #[test]
    fn parses_every_key() {
        let text = "\
# comment
d = 2
n_x = 16   # trailing
n_t = 50
L = 40
T = 5
a = 0.1
D = 0.2
zeta = 2
epsilon = 0.05
x0 = 1
t0 = 0.5
shots = 1000
seed = 7
gate_sets = tket, STAR
state_prep = lowrank
oaa_mode = oracle_count
oaa_repetitions = 3
fable_tolerance = 1e-6
oaa_compensation = false
shot_mode = raw
width_cap = 20
out = results
n_x_list = 8,16
shots_list = 10,20
d_list = 1,2
q_list = 1,2,3
subroutine = FABLE
cases = 1:8, 2:16
hoeffding_delta = 0.2
hoeffding_eps = 0.01
";
        let sc: Scenario = text.parse().unwrap();
        assert_eq!(sc.problem.d, 2);
        assert_eq!(sc.problem.l, 40.0);
        assert_eq!(sc.problem.t0, 0.5);
        assert_eq!(sc.shots, 1000);
        assert_eq!(sc.gate_sets, Some(vec![GateSetId::Tket, GateSetId::Star]));
        assert_eq!(sc.state_prep, StatePrepMethod::LowRank);
        assert_eq!(sc.oaa_mode, OaaMode::OracleCount);
        assert_eq!(sc.oaa_repetitions, Some(3));
        assert_eq!(sc.fable_tolerance, Some(1e-6));
        assert!(!sc.oaa_compensation);
        assert_eq!(sc.shot_mode, ShotMode::Raw);
        assert_eq!(sc.out, Some(PathBuf::from("results")));
        assert_eq!(sc.n_x_list, Some(vec![8, 16]));
        assert_eq!(sc.q_list, vec![1, 2, 3]);
        assert_eq!(sc.subroutine, Tag::FABLE);
        assert_eq!(sc.cases, vec![(1, 8), (2, 16)]);
    }

    fn line_of(text: &str) -> usize {
        match text.parse::<Scenario>() {
            Err(CliError::Scenario { line, .. }) => line,
            other => panic!("expected a line error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_malformed_lines() {
        assert_eq!(line_of("d = 1\nbogus = 3"), 2);
        assert_eq!(line_of("d = 1\n\nd = 2"), 3);
        assert_eq!(line_of("N = 10\nshots = 10"), 2);
        assert_eq!(line_of("n_x 32"), 1);
        assert_eq!(line_of("n_x = many"), 1);
        assert_eq!(line_of("gate_sets = tket,nope"), 1);
        assert_eq!(line_of("D_x = 1"), 1);
        assert_eq!(line_of("l = 20"), 1);
    }

    #[test]
    fn rejects_invalid_values() {
        for text in ["N = 0", "n_x = 12", "d = 0", "fable_tolerance = -1", "subroutine = OAA", "cases = 1:12"] {
            let e = text.parse::<Scenario>().unwrap_err();
            assert_eq!(e.exit_code(), 2, "{text}: {e}");
        }
    }
}
