//! Simplex and branch-and-bound checked against brute-force oracles.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uc_milp::{
    solve_lp, solve_lp_factored, solve_milp, FactoredBasis, LinearProgram, LpStatus, MilpModel, MilpOptions,
    MilpStatus, Relation,
};

/// Random LP with finite bounds that is feasible by construction (the rows
/// are satisfied by a random interior point).
fn random_lp(rng: &mut ChaCha8Rng, nvars: usize, nrows: usize) -> LinearProgram {
    let mut lp = LinearProgram::new();
    let mut x0 = Vec::new();
    for _ in 0..nvars {
        let lo = rng.gen_range(-5..=0) as f64;
        let hi = lo + rng.gen_range(1..=6) as f64;
        lp.add_var(lo, hi, rng.gen_range(-9..=9) as f64);
        x0.push(rng.gen_range(lo..=hi));
    }
    for _ in 0..nrows {
        let mut coefs = Vec::new();
        for j in 0..nvars {
            if rng.gen_bool(0.7) {
                coefs.push((j, rng.gen_range(-4..=4) as f64));
            }
        }
        let act: f64 = coefs.iter().map(|&(j, a)| a * x0[j]).sum();
        let (rel, rhs) = match rng.gen_range(0..3) {
            0 => (Relation::Le, (act + rng.gen_range(0.0..3.0)).round()),
            1 => (Relation::Ge, (act - rng.gen_range(0.0..3.0)).round()),
            _ => (Relation::Eq, act),
        };
        let rhs = match rel {
            Relation::Le => rhs.max(act),
            Relation::Ge => rhs.min(act),
            Relation::Eq => rhs,
        };
        lp.add_row(coefs, rel, rhs);
    }
    lp
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-10 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Minimum objective over every basic solution: pick `n` tight constraints
/// from rows and bounds, solve, keep the feasible ones.
fn vertex_enumeration(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_vars();
    let mut hyperplanes: Vec<(Vec<f64>, f64)> = Vec::new();
    for r in &lp.rows {
        let mut a = vec![0.0; n];
        for &(j, v) in &r.coefs {
            a[j] += v;
        }
        hyperplanes.push((a, r.rhs));
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        hyperplanes.push((e.clone(), lp.lower[j]));
        hyperplanes.push((e, lp.upper[j]));
    }
    let h = hyperplanes.len();
    let mut best: Option<f64> = None;
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let a: Vec<Vec<f64>> = idx.iter().map(|&i| hyperplanes[i].0.clone()).collect();
        let b: Vec<f64> = idx.iter().map(|&i| hyperplanes[i].1).collect();
        if let Some(x) = solve_square(a, b) {
            if lp.max_violation(&x) <= 1e-7 {
                let v = lp.objective_value(&x);
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        }
        // next combination
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if idx[i] < h - n + i {
                idx[i] += 1;
                for k in i + 1..n {
                    idx[k] = idx[k - 1] + 1;
                }
                break;
            }
        }
    }
}

#[test]
fn objective_matches_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..150 {
        let lp = random_lp(&mut rng, 5, 4);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal, "case {case}");
        let oracle = vertex_enumeration(&lp).expect("feasible by construction");
        assert!(
            (sol.objective - oracle).abs() <= 1e-7 * oracle.abs().max(1.0),
            "case {case}: simplex {} vs vertices {}",
            sol.objective,
            oracle
        );
    }
}

fn check_certificate(lp: &LinearProgram) {
    let sol = solve_lp(lp).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    let scale = |v: f64| v.abs().max(1.0);
    assert!(lp.max_violation(&sol.x) <= 1e-8);
    let dual = sol.dual_objective(lp);
    assert!(
        (sol.objective - dual).abs() <= 1e-8 * scale(sol.objective),
        "strong duality {} vs {}",
        sol.objective,
        dual
    );
    for (i, row) in lp.rows.iter().enumerate() {
        let y = sol.duals[i];
        let slack = row.rhs - row.activity(&sol.x);
        match row.relation {
            Relation::Le => assert!(y <= 1e-9, "≤ row dual {y}"),
            Relation::Ge => assert!(y >= -1e-9, "≥ row dual {y}"),
            Relation::Eq => {}
        }
        assert!((y * slack).abs() <= 1e-8 * scale(y), "complementary slackness row {i}");
    }
    for j in 0..lp.num_vars() {
        let d = sol.reduced_costs[j];
        let at_lo = (sol.x[j] - lp.lower[j]).abs() <= 1e-9;
        let at_hi = (sol.x[j] - lp.upper[j]).abs() <= 1e-9;
        if d > 1e-9 {
            assert!(at_lo, "positive reduced cost off lower bound");
        }
        if d < -1e-9 {
            assert!(at_hi, "negative reduced cost off upper bound");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]
    #[test]
    fn optimal_solutions_carry_a_dual_certificate(seed in any::<u64>(), nvars in 1usize..=8, nrows in 0usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        check_certificate(&random_lp(&mut rng, nvars, nrows));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]
    #[test]
    fn factored_warm_start_agrees_with_cold_solve(seed in any::<u64>(), nvars in 1usize..=8, nrows in 1usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut lp = random_lp(&mut rng, nvars, nrows);
        let first = solve_lp(&lp).unwrap();
        let factored = match FactoredBasis::new(&lp, first.basis.as_ref().unwrap()).unwrap() {
            Some(f) => f,
            None => return Ok(()),
        };
        for row in lp.rows.iter_mut() {
            row.rhs += rng.gen_range(-2..=2) as f64;
        }
        let cold = solve_lp(&lp).unwrap();
        let warm = solve_lp_factored(&lp, &factored).unwrap();
        prop_assert_eq!(warm.status, cold.status);
        if cold.status == LpStatus::Optimal {
            prop_assert!((warm.objective - cold.objective).abs() <= 1e-8 * cold.objective.abs().max(1.0));
            prop_assert!(lp.max_violation(&warm.x) <= 1e-8);
            prop_assert!((warm.objective - warm.dual_objective(&lp)).abs() <= 1e-8 * warm.objective.abs().max(1.0));
        }
    }
}

fn random_binary_milp(rng: &mut ChaCha8Rng, n: usize) -> MilpModel {
    let mut m = MilpModel::default();
    let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(0..=1) as f64).collect();
    for _ in 0..n {
        m.add_binary(rng.gen_range(-10..=10) as f64);
    }
    for _ in 0..rng.gen_range(1..=5) {
        let mut coefs = Vec::new();
        for j in 0..n {
            if rng.gen_bool(0.6) {
                coefs.push((j, rng.gen_range(-6..=6) as f64));
            }
        }
        let act: f64 = coefs.iter().map(|&(j, a)| a * x0[j]).sum();
        let rel = if rng.gen_bool(0.5) { Relation::Le } else { Relation::Ge };
        let rhs = match rel {
            Relation::Le => act + rng.gen_range(0..=3) as f64,
            _ => act - rng.gen_range(0..=3) as f64,
        };
        m.lp.add_row(coefs, rel, rhs);
    }
    m
}

fn exhaustive(m: &MilpModel) -> f64 {
    let n = m.lp.num_vars();
    (0u32..1 << n)
        .map(|mask| (0..n).map(|i| ((mask >> i) & 1) as f64).collect::<Vec<_>>())
        .filter(|x| m.lp.max_violation(x) <= 1e-9)
        .map(|x| m.lp.objective_value(&x))
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn branch_and_bound_matches_exhaustive_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..60 {
        let n = rng.gen_range(1..=12);
        let m = random_binary_milp(&mut rng, n);
        let sol = solve_milp(&m, &MilpOptions::default()).unwrap();
        assert_eq!(sol.status, MilpStatus::Optimal);
        let oracle = exhaustive(&m);
        assert!((sol.objective - oracle).abs() < 1e-6, "case {case}: {} vs {}", sol.objective, oracle);
        assert!(m.max_violation(&sol.x) <= 1e-9);
    }
}
