//! Helpers shared by the integration tests.
#![allow(dead_code)]

use uc_core::instance::{Bus, Generator, Segment};
use uc_core::{evaluate_schedule_cost, CommitmentSchedule, UcInstance};

/// Every `u` pattern with `v`, `w` derived from the logic identity.
pub fn u_patterns(inst: &UcInstance) -> Vec<CommitmentSchedule> {
    let (g, t) = (inst.num_gens(), inst.horizon);
    assert!(g * t <= 16, "too many commitment bits to enumerate");
    (0u32..1 << (g * t))
        .map(|mask| {
            let u = (0..g)
                .map(|i| (0..t).map(|s| (mask >> (i * t + s)) & 1 == 1).collect())
                .collect();
            CommitmentSchedule::from_commitment(inst, u)
        })
        .collect()
}

/// Patterns that also respect minimum up and down times.
pub fn feasible_schedules(inst: &UcInstance) -> Vec<CommitmentSchedule> {
    u_patterns(inst)
        .into_iter()
        .filter(|s| s.check(inst).feasible())
        .collect()
}

/// Subproblem value `Q(u)` from a cold LP solve.
pub fn q_value(inst: &UcInstance, sched: &CommitmentSchedule) -> f64 {
    evaluate_schedule_cost(inst, sched).unwrap().recourse
}

/// One bus, one generator with a two-breakpoint cost curve.
pub fn one_bus(demand: Vec<f64>, p_min: f64, p_max: f64, slope: f64) -> UcInstance {
    let horizon = demand.len();
    let inst = UcInstance {
        horizon,
        buses: vec![Bus {
            id: "n".into(),
            reference: true,
            demand,
        }],
        lines: vec![],
        generators: vec![Generator {
            id: "g".into(),
            bus: "n".into(),
            p_min: vec![p_min; horizon],
            p_max: vec![p_max; horizon],
            c1: 20.0,
            c2: 80.0,
            c3: 5.0,
            c4: 0.0,
            c5: 0.0,
            segments: vec![
                Segment {
                    p_level: p_min,
                    c6: slope * p_min,
                },
                Segment {
                    p_level: p_max,
                    c6: slope * p_max,
                },
            ],
            t_minup: 1,
            t_mindn: 1,
            r_startup: p_max,
            r_shutdown: p_max,
            r_up: p_max,
            r_down: p_max,
            initial_on: false,
        }],
        penalty_cost: vec![1000.0; horizon],
    };
    inst.validate().unwrap();
    inst
}
