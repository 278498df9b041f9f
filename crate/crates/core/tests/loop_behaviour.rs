//! Benders loop, GVNS and recovery behaviour against exact optima.

mod common;

use std::sync::{Arc, Mutex};

use common::{feasible_schedules, one_bus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uc_core::hybrid::{gap_percent, SubproblemCache};
use uc_core::{
    build_master_qubo, decode_sample, detect_stall, eta_encoding_width, evaluate_schedule_cost, exact_optimum,
    k_local_recovery, run_benders, run_gvns, run_qc4uc, synth_instance, AnnealParams, CommitmentSchedule,
    EtaEncoding, LoopConfig, Penalties, Qubo, SampleSet, Sampler, SamplerError, SamplerRegistry, StopReason,
};

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-6 * b.abs().max(1.0)
}

#[test]
fn single_generator_instance_reaches_the_optimum_without_shedding() {
    let inst = one_bus(vec![12.0, 15.0, 9.0], 5.0, 20.0, 3.0);
    let out = run_benders(&inst, &LoopConfig::default(), &SamplerRegistry::default()).unwrap();
    let exact = exact_optimum(&inst).unwrap();
    assert_eq!(out.cost.penalty, 0.0);
    assert!(out.cost.check.feasible());
    assert!(close(out.cost.total, exact.objective), "{} vs {}", out.cost.total, exact.objective);
    assert_eq!(out.schedule.u, exact.schedule.u);
}

#[test]
fn every_seed_terminates_within_the_iteration_cap() {
    let inst = synth_instance(2, 2, 3, 0);
    let reg = SamplerRegistry::default();
    for seed in 0..10 {
        let cfg = LoopConfig { seed, ..LoopConfig::default() };
        let out = run_benders(&inst, &cfg, &reg).unwrap();
        assert!(out.records.len() <= 25);
        assert!(out.records.len() == 25 || out.stop != StopReason::MaxIterations);
    }
}

#[test]
fn exact_master_without_rounding_is_classical_benders() {
    let cfg = LoopConfig {
        sampler: "exact".into(),
        rounding: false,
        samples: 4,
        stall_window: 1000,
        max_iters: 400,
        ..LoopConfig::default()
    };
    let reg = SamplerRegistry::default();
    for (g, n, t, seed) in [(1, 1, 4, 0), (1, 2, 3, 1), (2, 2, 2, 2), (2, 1, 2, 3), (1, 1, 4, 4)] {
        let inst = synth_instance(g, n, t, seed);
        assert!(3 * g * t <= 14);
        let out = run_benders(&inst, &cfg, &reg).unwrap();
        let exact = exact_optimum(&inst).unwrap();
        assert_eq!(out.stop, StopReason::Converged, "({g},{n},{t},{seed})");
        assert!(
            close(out.cost.total, exact.objective),
            "({g},{n},{t},{seed}): {} vs {}",
            out.cost.total,
            exact.objective
        );
    }
}

#[test]
fn stall_detection_matches_its_definition() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..2000 {
        let len = rng.gen_range(1..8);
        let history: Vec<f64> = (0..len).map(|_| rng.gen_range(0..4) as f64 * 0.4).collect();
        let i = rng.gen_range(0..6);
        let eps = rng.gen_range(0.0..1.0);
        let mut expect = i >= 1 && history.len() > i;
        if expect {
            for k in history.len() - i..history.len() {
                expect &= (history[k] - history[k - 1]).abs() <= eps;
            }
        }
        assert_eq!(detect_stall(&history, i, eps), expect, "{history:?} {i} {eps}");
    }
}

#[test]
fn recovery_stays_in_the_ball_and_is_feasible() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for case in 0..12 {
        let inst = synth_instance(2, 2, 3, case);
        let gt = 6;
        let u: Vec<Vec<bool>> = (0..2).map(|_| (0..3).map(|_| rng.gen_bool(0.5)).collect()).collect();
        let star = CommitmentSchedule::from_commitment(&inst, u);
        let k = rng.gen_range(0..=gt);
        match k_local_recovery(&inst, &star, k) {
            Ok(rec) => {
                assert!(rec.hamming <= k);
                assert_eq!(rec.hamming, rec.schedule.hamming_u(&star));
                assert!(rec.max_residual <= 1e-6);
                assert!(rec.schedule.check(&inst).feasible());
                if star.check(&inst).feasible() {
                    let own = evaluate_schedule_cost(&inst, &star).unwrap().total;
                    assert!(rec.objective <= own + 1e-6 * own);
                }
            }
            Err(e) => {
                // Only possible when no feasible schedule lies within distance k.
                let reachable = feasible_schedules(&inst).iter().any(|s| s.hamming_u(&star) <= k);
                assert!(!reachable, "case {case}, k {k}: {e}");
            }
        }
    }
}

#[test]
fn two_flips_from_the_optimum_are_undone_by_radius_two() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for seed in 0..6 {
        let inst = synth_instance(2, 2, 4, seed);
        let exact = exact_optimum(&inst).unwrap();
        let mut u = exact.schedule.u.clone();
        let a = rng.gen_range(0..8);
        let b = (a + rng.gen_range(1..8)) % 8;
        for idx in [a, b] {
            u[idx / 4][idx % 4] ^= true;
        }
        let star = CommitmentSchedule::from_commitment(&inst, u);
        let rec = k_local_recovery(&inst, &star, 2).unwrap();
        assert!(close(rec.objective, exact.objective), "seed {seed}");
    }
}

#[test]
fn gvns_keeps_sample_count_and_repairs_logic() {
    let inst = synth_instance(3, 2, 4, 1);
    let cache = SubproblemCache::new(&inst).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let samples: Vec<CommitmentSchedule> = (0..7)
        .map(|_| {
            let u = (0..3).map(|_| (0..4).map(|_| rng.gen_bool(0.5)).collect()).collect();
            CommitmentSchedule::from_commitment(&inst, u)
        })
        .collect();
    let tracks = run_gvns(&samples, &inst, &LoopConfig::default(), &cache, 9).unwrap();
    assert_eq!(tracks.len(), samples.len());
    for (s, tr) in samples.iter().zip(&tracks) {
        assert!(tr.shaken.check(&inst).logic);
        if let Some(better) = &tr.improved {
            assert!(better.check(&inst).logic);
            let before = evaluate_schedule_cost(&inst, s).unwrap();
            let after = evaluate_schedule_cost(&inst, better).unwrap();
            assert!(after.total < before.total);
            assert!(after.check.feasible() || !before.check.feasible());
        }
    }
}

#[test]
fn optimal_sample_is_only_shaken() {
    let inst = synth_instance(2, 2, 4, 3);
    let cache = SubproblemCache::new(&inst).unwrap();
    let opt = exact_optimum(&inst).unwrap().schedule;
    let cfg = LoopConfig::default();
    for seed in 0..10 {
        let tracks = run_gvns(std::slice::from_ref(&opt), &inst, &cfg, &cache, seed).unwrap();
        assert!(tracks[0].improved.is_none());
        assert_eq!(tracks[0].shaken.hamming_u(&opt), cfg.gvns_k2);
    }
}

#[test]
fn single_flip_finds_the_missing_unit() {
    // One unit must run at every step; starting with step 1 off, only that
    // flip improves, so an attempt succeeds with probability 1/3.
    let inst = one_bus(vec![12.0, 15.0, 9.0], 5.0, 20.0, 3.0);
    let cache = SubproblemCache::new(&inst).unwrap();
    let start = CommitmentSchedule::from_commitment(&inst, vec![vec![true, false, true]]);
    let target = CommitmentSchedule::all_on(&inst);
    for budget in [1usize, 2, 4] {
        let cfg = LoopConfig {
            gvns_attempts: budget,
            ..LoopConfig::default()
        };
        let runs = 600;
        let hits = (0..runs)
            .filter(|&seed| {
                let tr = run_gvns(std::slice::from_ref(&start), &inst, &cfg, &cache, seed).unwrap();
                tr[0].improved.as_ref() == Some(&target)
            })
            .count();
        let bound = 1.0 - (2.0f64 / 3.0).powi(budget as i32);
        let sd = (bound * (1.0 - bound) / runs as f64).sqrt();
        let rate = hits as f64 / runs as f64;
        assert!(rate >= bound - 4.0 * sd, "budget {budget}: {rate} < {bound}");
    }
}

#[test]
fn rounding_shrinks_registers_by_about_the_decimal_bits() {
    let inst = synth_instance(2, 3, 4, 5);
    let reg = SamplerRegistry::default();
    for rounding in [true, false] {
        for precision in 1..=3 {
            let cfg = LoopConfig {
                rounding,
                precision,
                max_iters: 6,
                ..LoopConfig::default()
            };
            let out = run_benders(&inst, &cfg, &reg).unwrap();
            let c = (3.322 * precision as f64).ceil() as i64;
            for r in &out.records {
                assert_eq!(r.cut_bits_rounded, eta_encoding_width(r.cut_eta_star, precision, true));
                assert_eq!(r.cut_bits_unrounded, eta_encoding_width(r.cut_eta_star, precision, false));
                if r.cut_eta_star >= 10.0 {
                    let d = r.cut_bits_unrounded as i64 - r.cut_bits_rounded as i64;
                    assert!((c - 1..=c + 1).contains(&d), "p {precision}: {d}");
                }
            }
        }
    }
}

/// Annealer that keeps every QUBO it is given and the samples it returned.
struct Recorder {
    log: Arc<Mutex<Vec<(String, SampleSet)>>>,
}

impl Sampler for Recorder {
    fn name(&self) -> &str {
        "recorder"
    }

    fn sample(&self, qubo: &Qubo, params: &AnnealParams) -> Result<SampleSet, SamplerError> {
        let set = SamplerRegistry::default().sample("noisy", qubo, params)?;
        self.log.lock().unwrap().push((qubo.to_text(), set.clone()));
        Ok(set)
    }
}

#[test]
fn chosen_sample_has_the_largest_violation() {
    let inst = synth_instance(2, 2, 4, 6);
    let log = Arc::new(Mutex::new(Vec::new()));
    let mut reg = SamplerRegistry::empty();
    reg.register("recorder", Box::new(Recorder { log: log.clone() })).unwrap();
    let cfg = LoopConfig {
        sampler: "recorder".into(),
        stall_window: 1000,
        max_iters: 8,
        ..LoopConfig::default()
    };
    let out = run_benders(&inst, &cfg, &reg).unwrap();
    let log = log.lock().unwrap();
    assert_eq!(log.len(), out.records.len());
    let mut before = 0;
    for (rec, (text, set)) in out.records.iter().zip(log.iter()) {
        let cuts = &out.cuts[..before];
        let eta = EtaEncoding::for_cuts(cuts, cfg.encoding());
        let mq = build_master_qubo(&inst, cuts, Penalties::sized(&inst, eta), eta).unwrap();
        assert_eq!(&mq.qubo.to_text(), text);
        let best = set
            .samples
            .iter()
            .map(|s| {
                let d = decode_sample(&inst, &mq, &s.bits).unwrap();
                evaluate_schedule_cost(&inst, &d.schedule.repaired(&inst)).unwrap().recourse - d.eta
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(close(rec.violation, best), "iteration {}: {} vs {best}", rec.iteration, rec.violation);
        before = rec.cuts_total;
    }
}

#[test]
fn annealing_runs_land_near_the_optimum() {
    let reg = SamplerRegistry::default();
    let mut within = 0;
    for seed in 0..100 {
        let inst = synth_instance(2, 2, 4, seed);
        let cfg = LoopConfig { seed, ..LoopConfig::default() };
        let res = run_qc4uc(&inst, &cfg, &reg, true).unwrap();
        assert!(res.recovery.max_residual <= 1e-6);
        if res.gap_percent.unwrap() <= 1.0 {
            within += 1;
        }
    }
    assert!(within >= 90, "{within}/100");
}

#[test]
fn recovery_closes_most_of_a_noisy_gap() {
    let reg = SamplerRegistry::default();
    let mut closed = Vec::new();
    for seed in 0..100 {
        let inst = synth_instance(2, 2, 4, seed);
        let cfg = LoopConfig {
            sampler: "noisy".into(),
            max_iters: 2,
            seed,
            ..LoopConfig::default()
        };
        let res = run_qc4uc(&inst, &cfg, &reg, true).unwrap();
        let exact = res.oracle.as_ref().unwrap().objective;
        let pre = gap_percent(res.benders.cost.total, exact);
        assert!(close(res.pre_recovery_gap_percent.unwrap(), pre));
        if pre > 1e-6 {
            closed.push((pre - res.gap_percent.unwrap()) / pre);
        }
    }
    assert!(!closed.is_empty(), "no run left a gap before recovery");
    closed.sort_by(f64::total_cmp);
    let median = closed[closed.len() / 2];
    assert!(median >= 0.5, "median share closed {median} over {} runs", closed.len());
}

#[test]
fn infinite_penalty_bound_means_one_iteration() {
    let inst = synth_instance(3, 2, 3, 2);
    let cfg = LoopConfig {
        penalty_bound: f64::INFINITY,
        ..LoopConfig::default()
    };
    let out = run_benders(&inst, &cfg, &SamplerRegistry::default()).unwrap();
    assert_eq!((out.records.len(), out.stop), (1, StopReason::PenaltyBound));
}
