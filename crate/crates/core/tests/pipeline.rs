use proptest::prelude::*;

use qdde_core::dde::{self, DdeProblem};
use qdde_core::rebase::{self, GateSetId};
use qdde_core::sim::{self, ShotMode};
use qdde_core::synth::{self, PipelineSpec, StatePrepMethod};

fn small(d: usize, n_x: usize, n_t: usize) -> DdeProblem {
    DdeProblem { n_t, t_final: n_t.max(1) as f64 * 0.1, ..DdeProblem::table2(d, n_x, 4.0) }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn diagonal_solver_matches_ftcs(d in 1usize..=2, m in 1u32..=3, n_t in 0usize..12, a in 0.0f64..0.5) {
        let prob = DdeProblem { a, ..small(d, 1 << m, n_t) };
        let p0 = dde::initial_condition(&prob).unwrap();
        let x = dde::classical_diag_solve(&prob, &p0).unwrap();
        let y = dde::ftcs_solve(&prob, &p0).unwrap();
        prop_assert!(dde::error_inf(&x, &y).unwrap() < 1e-10);
    }
}

#[test]
fn rebased_pipeline_keeps_the_unitary() {
    let spec = PipelineSpec { oaa_repetitions: Some(1), fable_tolerance: Some(1e-12), ..PipelineSpec::new(small(1, 4, 2)) };
    let p = synth::assemble_pipeline(&spec).unwrap();
    assert_eq!(p.circuit.width(), 6);
    for gs in GateSetId::ALL {
        let r = rebase::rebase(&p.circuit, gs).unwrap();
        assert!(rebase::is_closed(&r, gs), "{gs}");
        let err = rebase::verify_equivalence(&p.circuit, &r).unwrap();
        assert!(err < 1e-8, "{gs}: {err}");
    }
}

#[test]
fn lowrank_pipeline_matches_naive_output() {
    let prob = small(2, 4, 3);
    let run = |method| {
        let spec = PipelineSpec { state_prep: method, fable_tolerance: Some(1e-12), ..PipelineSpec::new(prob) };
        let p = synth::assemble_pipeline(&spec).unwrap();
        let s = sim::run(&p.circuit, None).unwrap();
        synth::success_register(&s, p.q)
    };
    let (a, b) = (run(StatePrepMethod::Naive), run(StatePrepMethod::LowRank));
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).norm() < 1e-8);
    }
}

#[test]
fn seeded_measurement_is_reproducible_and_converges() {
    let prob = small(1, 8, 4);
    let p = synth::assemble_pipeline(&PipelineSpec { fable_tolerance: Some(1e-12), ..PipelineSpec::new(prob) }).unwrap();
    let s = sim::run(&p.circuit, None).unwrap();
    let p0 = dde::initial_condition(&prob).unwrap();
    let cl = dde::classical_diag_solve(&prob, &p0).unwrap();
    let m1 = sim::measure_pipeline(&s, &prob, 5000, 11, ShotMode::PostSelected).unwrap();
    let m2 = sim::measure_pipeline(&s, &prob, 5000, 11, ShotMode::PostSelected).unwrap();
    assert_eq!(m1.counts, m2.counts);
    let coarse = dde::error_inf(&sim::measure_pipeline(&s, &prob, 100, 11, ShotMode::PostSelected).unwrap().recovered, &cl).unwrap();
    let fine = dde::error_inf(&sim::measure_pipeline(&s, &prob, 200_000, 11, ShotMode::PostSelected).unwrap().recovered, &cl).unwrap();
    assert!(fine < coarse, "{fine} vs {coarse}");
    let raw = sim::measure_pipeline(&s, &prob, 20_000, 3, ShotMode::Raw).unwrap();
    assert!((raw.success_fraction - m1.success_fraction).abs() < 0.02);
}

#[test]
fn zero_steps_reproduce_the_initial_condition() {
    let prob = small(1, 8, 0);
    let p = synth::assemble_pipeline(&PipelineSpec::new(prob)).unwrap();
    assert_eq!(p.repetitions, 0);
    let s = sim::run(&p.circuit, None).unwrap();
    let out = synth::success_register(&s, p.q);
    let p0 = dde::initial_condition(&prob).unwrap();
    let norm = p0.l2_norm();
    let na = out.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for (z, v) in out.iter().zip(&p0.values) {
        assert!((z.norm() / na - v / norm).abs() < 1e-8);
    }
}
