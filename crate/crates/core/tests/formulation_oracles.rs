//! Subproblem, full model and cut construction checked against brute force.

mod common;

use common::{feasible_schedules, one_bus, q_value, u_patterns};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uc_core::formulation::{max_affine, num_commit_vars, CommitAffine};
use uc_core::hybrid::exact_optimum;
use uc_core::qubo::{extract_raw_cut, CutEncoding};
use uc_core::{
    build_full_uc, build_subproblem, commit_index, evaluate_schedule_cost, synth_instance, BendersCut, CommitKind,
    CommitmentSchedule,
};
use uc_milp::{solve_lp, solve_milp, MilpOptions, MilpStatus};

fn raw_cut(inst: &uc_core::UcInstance, sched: &CommitmentSchedule) -> uc_core::qubo::RawCut {
    let sp = build_subproblem(inst, sched);
    let sol = solve_lp(&sp.lp).unwrap();
    extract_raw_cut(inst, &sp, &sol).unwrap()
}

#[test]
fn subproblem_matches_full_model_with_fixed_commitments() {
    for seed in 0..4 {
        let inst = synth_instance(2, 2, 2, seed);
        let full = build_full_uc(&inst);
        for sched in feasible_schedules(&inst) {
            let mut model = full.model.clone();
            for (j, x) in sched.to_vector().into_iter().enumerate() {
                model.lp.lower[j] = x;
                model.lp.upper[j] = x;
            }
            let sol = solve_milp(&model, &MilpOptions::default()).unwrap();
            assert_eq!(sol.status, MilpStatus::Optimal);
            let cost = evaluate_schedule_cost(&inst, &sched).unwrap();
            let tol = 1e-6 * cost.total.abs().max(1.0);
            assert!(
                (sol.objective - cost.total).abs() <= tol,
                "seed {seed}, {sched}: full {} vs decomposed {}",
                sol.objective,
                cost.total
            );
        }
    }
}

#[test]
fn optimal_schedule_costs_the_milp_optimum() {
    for (g, n, t, seed) in [(2, 2, 3, 1), (3, 3, 3, 2), (2, 4, 4, 3)] {
        let inst = synth_instance(g, n, t, seed);
        let oracle = exact_optimum(&inst).unwrap();
        let cost = evaluate_schedule_cost(&inst, &oracle.schedule).unwrap();
        assert!((cost.total - oracle.objective).abs() <= 1e-6 * oracle.objective.abs().max(1.0));
        assert!(cost.check.feasible());
    }
}

#[test]
fn single_committed_unit_serves_load_exactly() {
    let inst = synth_instance(1, 1, 1, 0);
    let full = build_full_uc(&inst);
    let sol = solve_milp(&full.model, &MilpOptions::default()).unwrap();
    assert_eq!(sol.status, MilpStatus::Optimal);
    assert!(full.schedule(&inst, &sol.x).u[0][0]);
    let d = full.dispatch(&sol.x);
    assert!(d.delta_plus[0][0].abs() < 1e-9 && d.delta_minus[0][0].abs() < 1e-9);
}

#[test]
fn balance_dual_alone_gives_hand_assembled_cut() {
    // Committed unit in its interior: only the balance row prices.
    let (d, p_min, slope) = (15.0, 10.0, 7.0);
    let inst = one_bus(vec![d], p_min, 20.0, slope);
    let sched = CommitmentSchedule::all_on(&inst);
    let raw = raw_cut(&inst, &sched);
    let u = commit_index(&inst, CommitKind::U, 0, 0);
    assert!((raw.affine.coef[u] + p_min * slope).abs() < 1e-9, "{:?}", raw.affine);
    assert!((raw.affine.constant - d * slope).abs() < 1e-9);
    assert!((raw.affine.eval_schedule(&sched) - q_value(&inst, &sched)).abs() < 1e-9);
}

#[test]
fn cuts_are_tight_at_their_own_schedule() {
    for seed in 0..3 {
        let inst = synth_instance(2, 3, 3, seed);
        for sched in feasible_schedules(&inst).into_iter().step_by(5) {
            let raw = raw_cut(&inst, &sched);
            let q = q_value(&inst, &sched);
            assert!(
                (raw.affine.eval_schedule(&sched) - q).abs() <= 1e-6 * q.abs().max(1.0),
                "seed {seed}, {sched}"
            );
        }
    }
}

#[test]
fn raw_and_rounded_cuts_underestimate_every_schedule() {
    let enc = CutEncoding {
        rounded: true,
        precision: 2,
    };
    for (g, n, t, seed) in [(1, 2, 3, 5), (2, 2, 2, 6), (2, 3, 3, 7)] {
        let inst = synth_instance(g, n, t, seed);
        let scheds = u_patterns(&inst);
        let qs: Vec<f64> = scheds.iter().map(|s| q_value(&inst, s)).collect();
        for source in scheds.iter().step_by(3) {
            let cut = BendersCut::new(&inst, raw_cut(&inst, source), enc).unwrap();
            for (s, &q) in scheds.iter().zip(&qs) {
                let tol = 1e-6 * q.abs().max(1.0);
                assert!(cut.raw.eval_schedule(s) <= q + tol, "raw cut from {source} at {s}");
                assert!(cut.rounded.eval_schedule(s) <= q + 1.0, "rounded cut from {source} at {s}");
            }
        }
    }
}

#[test]
fn max_eta_equals_enumerated_maximum() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for case in 0..40 {
        let g = rng.gen_range(1..=2);
        let t = rng.gen_range(1..=10 / (3 * g)).max(1);
        let mut inst = synth_instance(g, 2, t, case);
        for gen in &mut inst.generators {
            gen.t_minup = rng.gen_range(1..=t);
            gen.t_mindn = rng.gen_range(1..=t);
        }
        let mut affine = CommitAffine::zero(num_commit_vars(&inst));
        for c in &mut affine.coef {
            *c = rng.gen_range(-50.0..50.0);
        }
        affine.constant = rng.gen_range(-20.0..20.0);
        let brute = feasible_schedules(&inst)
            .iter()
            .map(|s| affine.eval_schedule(s))
            .fold(f64::NEG_INFINITY, f64::max);
        let got = max_affine(&inst, &affine).unwrap();
        assert!((got - brute).abs() < 1e-6, "case {case}: {got} vs {brute}");
    }
}
