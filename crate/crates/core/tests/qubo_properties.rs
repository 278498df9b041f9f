//! Cut rounding, register widths and master QUBO energies checked by
//! exhaustive enumeration.

mod common;

use std::collections::BTreeMap;

use common::{feasible_schedules, one_bus, q_value};
use proptest::prelude::*;
use uc_core::formulation::{num_commit_vars, CommitAffine};
use uc_core::qubo::{encode_assignment, round_to_units, CutEncoding, EtaEncoding, RawCut};
use uc_core::{
    build_master_qubo, build_subproblem, decode_sample, eta_encoding_width, extract_raw_cut, round_cut, synth_instance,
    BendersCut, CommitmentSchedule, Penalties, Qubo, UcInstance,
};
use uc_milp::solve_lp;

fn bits_of(mask: u64, n: usize) -> Vec<u8> {
    (0..n).map(|k| ((mask >> k) & 1) as u8).collect()
}

fn points(n: usize) -> impl Iterator<Item = Vec<f64>> {
    (0u64..1 << n).map(move |m| bits_of(m, n).into_iter().map(f64::from).collect())
}

/// Smallest `k` with `2^k ≥ x + 1`, by counting.
fn width_by_counting(x: u64) -> usize {
    let mut k = 0;
    while (1u128 << k) < x as u128 + 1 {
        k += 1;
    }
    k
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn rounded_cut_never_exceeds_raw_cut(
        coef in prop::collection::vec(-100.0f64..100.0, 1..=10),
        constant in -500.0f64..500.0,
    ) {
        let raw = CommitAffine { coef, constant };
        let rounded = round_cut(&raw);
        for (a, r) in raw.coef.iter().zip(&rounded.coef) {
            let expect = if *a > 0.0 { a.floor() } else { a.ceil() };
            prop_assert_eq!(*r, expect);
        }
        for x in points(raw.coef.len()) {
            prop_assert!(rounded.eval(&x) <= raw.eval(&x) + 1e-9);
        }
    }

    #[test]
    fn fixed_point_cut_never_exceeds_raw_cut(
        coef in prop::collection::vec(-100.0f64..100.0, 1..=10),
        constant in -500.0f64..500.0,
        p in 0u32..=3,
    ) {
        let res = 10f64.powi(-(p as i32));
        let raw = CommitAffine { coef, constant };
        let (units, c) = round_to_units(&raw, res);
        for x in points(raw.coef.len()) {
            let lhs = (units.iter().zip(&x).map(|(k, b)| *k as f64 * b).sum::<f64>() + c as f64) * res;
            prop_assert!(lhs <= raw.eval(&x) + 1e-9);
        }
    }

    #[test]
    fn register_widths_follow_the_log_formulas(eta in 0u64..2_000_000_000, p in 0u32..=3) {
        let m = eta_encoding_width(eta as f64, p, true);
        let n = eta_encoding_width(eta as f64, p, false);
        prop_assert_eq!(m, width_by_counting(eta));
        prop_assert_eq!(n, width_by_counting(eta * 10u64.pow(p)));
        if eta >= 10 {
            let c = (3.322 * p as f64).ceil() as i64;
            let d = n as i64 - m as i64;
            prop_assert!((c - 1..=c + 1).contains(&d), "N - M = {} for p = {}", d, p);
        }
    }
}

#[test]
fn integer_cuts_are_left_alone() {
    let raw = CommitAffine {
        coef: vec![3.0, -4.0, 0.0, 12.0],
        constant: -9.0,
    };
    assert_eq!(round_cut(&raw), raw);
}

fn constant_cut(inst: &UcInstance, value: f64) -> BendersCut {
    let mut affine = CommitAffine::zero(num_commit_vars(inst));
    affine.constant = value;
    let raw = RawCut {
        affine,
        duals: BTreeMap::new(),
    };
    BendersCut::new(
        inst,
        raw,
        CutEncoding {
            rounded: true,
            precision: 0,
        },
    )
    .unwrap()
}

fn sp_cut(inst: &UcInstance, sched: &CommitmentSchedule, enc: CutEncoding) -> BendersCut {
    let sp = build_subproblem(inst, sched);
    let sol = solve_lp(&sp.lp).unwrap();
    BendersCut::new(inst, extract_raw_cut(inst, &sp, &sol).unwrap(), enc).unwrap()
}

#[test]
fn cut_free_master_minimum_is_cheapest_feasible_commitment() {
    let inst = one_bus(vec![12.0], 5.0, 20.0, 3.0);
    let eta = EtaEncoding {
        bits: 2,
        resolution: 1.0,
    };
    let mq = build_master_qubo(&inst, &[], Penalties::sized(&inst, eta), eta).unwrap();
    let n = mq.qubo.len();
    assert!(n <= 16);
    let scan = (0u64..1 << n)
        .map(|m| mq.qubo.energy(&bits_of(m, n)))
        .fold(f64::INFINITY, f64::min);
    let mp = feasible_schedules(&inst)
        .iter()
        .map(|s| uc_core::formulation::commitment_cost(&inst, s))
        .fold(f64::INFINITY, f64::min);
    assert_eq!(scan, mp);
}

#[test]
fn logic_violations_cost_more_than_any_feasible_point() {
    let inst = one_bus(vec![12.0, 15.0], 5.0, 20.0, 3.0);
    let enc = CutEncoding {
        rounded: true,
        precision: 0,
    };
    let cut = sp_cut(&inst, &CommitmentSchedule::all_on(&inst), enc);
    let cuts = vec![cut];
    let eta = EtaEncoding::for_cuts(&cuts, enc);
    let mq = build_master_qubo(&inst, &cuts, Penalties::sized(&inst, eta), eta).unwrap();
    let n = mq.qubo.len();
    assert!(n <= 24, "{n} bits");
    let mut worst_feasible = f64::NEG_INFINITY;
    let mut best_violating = f64::INFINITY;
    for m in 0u64..1 << n {
        let bits = bits_of(m, n);
        let d = decode_sample(&inst, &mq, &bits).unwrap();
        let e = mq.qubo.energy(&bits);
        if d.residuals.p1 > 0.0 {
            best_violating = best_violating.min(e);
        } else if d.residuals.commitment_clean() && d.residuals.p4.iter().all(|&r| r == 0.0) {
            worst_feasible = worst_feasible.max(e);
        }
    }
    assert!(best_violating > worst_feasible, "{best_violating} vs {worst_feasible}");
}

#[test]
fn empty_eta_register_against_lhs_five() {
    let inst = one_bus(vec![12.0], 5.0, 20.0, 3.0);
    let cuts = vec![constant_cut(&inst, 5.0)];
    let eta = EtaEncoding::for_cuts(
        &cuts,
        CutEncoding {
            rounded: true,
            precision: 0,
        },
    );
    assert_eq!(eta.bits, 3);
    let mq = build_master_qubo(&inst, &cuts, Penalties::sized(&inst, eta), eta).unwrap();
    let n = mq.qubo.len();
    assert!(n <= 16);
    let p4 = mq.penalties.p4;
    let (start, width) = mq.layout.cut_slack[0];
    let block = mq.qubo.blocks().iter().find(|b| b.terms.iter().any(|&(i, _)| i == start)).unwrap();
    let mut best = (f64::INFINITY, u64::MAX);
    for m in 0u64..1 << n {
        let bits = bits_of(m, n);
        if mq.layout.eta_bits().any(|i| bits[i] == 1) {
            continue;
        }
        let s3 = eta.decode(&bits[start..start + width]);
        let e = block.energy(&bits);
        assert_eq!(e, p4 * (5.0 + s3 as f64).powi(2));
        if e < best.0 {
            best = (e, s3);
        }
    }
    assert_eq!(best, (p4 * 25.0, 0));
    // With the register free, the scan's minimum satisfies the cut with η = 5.
    let (_, argmin) = (0u64..1 << n)
        .map(|m| (mq.qubo.energy(&bits_of(m, n)), m))
        .fold((f64::INFINITY, 0), |a, b| if b.0 < a.0 { b } else { a });
    let d = decode_sample(&inst, &mq, &bits_of(argmin, n)).unwrap();
    assert_eq!(d.eta, 5.0);
    assert_eq!(d.residuals.p4, vec![0.0]);
}

fn master_with_cuts(rounded: bool) -> (UcInstance, Vec<BendersCut>, uc_core::qubo::MasterQubo) {
    let inst = synth_instance(2, 2, 3, 9);
    let enc = CutEncoding { rounded, precision: 2 };
    let scheds = feasible_schedules(&inst);
    let cuts: Vec<BendersCut> = scheds.iter().step_by(7).take(3).map(|s| sp_cut(&inst, s, enc)).collect();
    let eta = EtaEncoding::for_cuts(&cuts, enc);
    let mq = build_master_qubo(&inst, &cuts, Penalties::sized(&inst, eta), eta).unwrap();
    (inst, cuts, mq)
}

#[test]
fn energy_is_objective_plus_weighted_residuals() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    for rounded in [true, false] {
        let (inst, _, mq) = master_with_cuts(rounded);
        let p = mq.penalties;
        for _ in 0..200 {
            let bits: Vec<u8> = (0..mq.qubo.len()).map(|_| rng.gen_range(0..=1)).collect();
            let d = decode_sample(&inst, &mq, &bits).unwrap();
            let r = &d.residuals;
            let expect = d.objective + p.p1 * r.p1 + p.p2 * r.p2 + p.p3 * r.p3 + p.p4 * r.p4.iter().sum::<f64>();
            let e = mq.qubo.energy(&bits);
            assert!((e - expect).abs() <= 1e-9 * e.abs().max(1.0), "{e} vs {expect}");
        }
    }
}

#[test]
fn feasible_cut_satisfying_points_cost_their_master_objective() {
    for rounded in [true, false] {
        let (inst, cuts, mq) = master_with_cuts(rounded);
        for s in feasible_schedules(&inst) {
            let bits = encode_assignment(&inst, &mq, &s, &cuts);
            let d = decode_sample(&inst, &mq, &bits).unwrap();
            assert!(d.residuals.commitment_clean());
            assert!(d.residuals.p4.iter().all(|&r| r == 0.0), "{s}");
            let eta = cuts.iter().map(|c| c.rounded.eval_schedule(&s)).fold(0.0, f64::max);
            let mp = uc_core::formulation::commitment_cost(&inst, &s) + eta;
            assert!((mq.qubo.energy(&bits) - mp).abs() <= 1e-9 * mp.abs().max(1.0));
            // η never exceeds the subproblem value it stands in for.
            assert!(eta <= q_value(&inst, &s) + 1.0);
        }
    }
}

#[test]
fn exported_text_keeps_energies() {
    let (_, _, mq) = master_with_cuts(true);
    let back = Qubo::from_text(&mq.qubo.to_text()).unwrap();
    assert_eq!(back.len(), mq.qubo.len());
    for m in [0u64, 1, 0xdead_beef, u64::MAX] {
        let bits = bits_of(m, mq.qubo.len().min(64));
        let mut bits = bits;
        bits.resize(mq.qubo.len(), 1);
        let (a, b) = (mq.qubo.energy(&bits), back.energy(&bits));
        assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{a} vs {b}");
    }
}
