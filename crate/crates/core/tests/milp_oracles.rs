use std::time::Duration;

use cnma_core::milp::{
    export_lp_format, parse_lp_format, solve_lp, solve_milp, solve_relaxation, LinearConstraint, LpStatus, Milp,
    MilpExpr, MilpStatus, MilpVar, Pricing,
};
use cnma_core::problem::{Cmp, Sense};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LIMIT: Duration = Duration::from_secs(30);

fn random_cmp(rng: &mut ChaCha8Rng) -> Cmp {
    match rng.random_range(0..5) {
        0 => Cmp::Ge,
        1 => Cmp::Eq,
        _ => Cmp::Le,
    }
}

fn random_lp(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Milp {
    let sense = if rng.random_bool(0.5) { Sense::Maximize } else { Sense::Minimize };
    let mut milp = Milp::new(sense);
    for j in 0..n {
        let lo = rng.random_range(-3.0..0.0);
        let hi = rng.random_range(0.5..4.0);
        milp.add_var(MilpVar::continuous(format!("x{j}"), lo, hi));
    }
    for i in 0..m {
        let terms: Vec<(usize, f64)> = (0..n).map(|j| (j, rng.random_range(-2.0..2.0))).collect();
        let cmp = if rng.random_bool(0.8) { Cmp::Le } else { Cmp::Ge };
        let rhs = rng.random_range(-1.0..3.0);
        milp.add_constraint(LinearConstraint::new(format!("r{i}"), terms, cmp, rhs));
    }
    milp.objective = MilpExpr::new((0..n).map(|j| (j, rng.random_range(-3.0..3.0))).collect(), 0.0);
    milp
}

/// Solves the square system `a·x = b` by Gaussian elimination; `None` when
/// singular.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &k| a[i][col].abs().total_cmp(&a[k][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in 0..n {
            if row != col {
                let f = a[row][col] / a[col][col];
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Best objective over all vertices, each the intersection of `n` tight
/// hyperplanes taken from the rows and the variable bounds.
fn vertex_oracle(milp: &Milp) -> Option<f64> {
    let n = milp.vars.len();
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for c in &milp.constraints {
        let mut row = vec![0.0; n];
        for &(j, a) in &c.terms {
            row[j] += a;
        }
        planes.push((row, c.rhs));
    }
    for (j, v) in milp.vars.iter().enumerate() {
        for bound in [v.lower, v.upper] {
            let mut row = vec![0.0; n];
            row[j] = 1.0;
            planes.push((row, bound));
        }
    }
    let mut best: Option<f64> = None;
    for subset in combinations(planes.len(), n) {
        let a = subset.iter().map(|&i| planes[i].0.clone()).collect();
        let b = subset.iter().map(|&i| planes[i].1).collect();
        let Some(x) = solve_square(a, b) else { continue };
        if milp.max_violation(&x) > 1e-9 {
            continue;
        }
        let value = milp.objective_value(&x);
        best = Some(match (best, milp.sense) {
            (None, _) => value,
            (Some(b), Sense::Maximize) => b.max(value),
            (Some(b), Sense::Minimize) => b.min(value),
        });
    }
    best
}

#[test]
fn five_variable_lps_match_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut feasible = 0;
    for _ in 0..60 {
        let milp = random_lp(&mut rng, 5, 4);
        let oracle = vertex_oracle(&milp);
        let lp = solve_lp(&milp);
        match oracle {
            Some(best) => {
                feasible += 1;
                assert_eq!(lp.status, LpStatus::Optimal);
                assert!((lp.objective - best).abs() <= 1e-7, "simplex {} vs oracle {best}", lp.objective);
                assert!(milp.max_violation(&lp.values) <= 1e-7);
            }
            None => assert_eq!(lp.status, LpStatus::Infeasible),
        }
    }
    assert!(feasible > 30);
}

#[test]
fn bland_and_dantzig_pricing_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..50 {
        let milp = random_lp(&mut rng, 6, 5);
        let lower: Vec<f64> = milp.vars.iter().map(|v| v.lower).collect();
        let upper: Vec<f64> = milp.vars.iter().map(|v| v.upper).collect();
        let a = solve_relaxation(&milp, &lower, &upper, Pricing::Bland);
        let b = solve_relaxation(&milp, &lower, &upper, Pricing::DantzigBland);
        assert_eq!(a.status, b.status);
        if a.status == LpStatus::Optimal {
            assert!((a.objective - b.objective).abs() <= 1e-7);
        }
    }
}

fn random_milp(rng: &mut ChaCha8Rng) -> Milp {
    let binaries = rng.random_range(1..=8);
    let continuous = rng.random_range(0..=3);
    let rows = rng.random_range(1..=6);
    let sense = if rng.random_bool(0.5) { Sense::Maximize } else { Sense::Minimize };
    let mut milp = Milp::new(sense);
    for k in 0..binaries {
        milp.add_var(MilpVar::binary(format!("b{k}")));
    }
    for k in 0..continuous {
        milp.add_var(MilpVar::continuous(format!("x{k}"), rng.random_range(-2.0..0.0), rng.random_range(0.0..2.0)));
    }
    let n = binaries + continuous;
    for i in 0..rows {
        let mut terms: Vec<(usize, f64)> = Vec::new();
        for j in 0..n {
            if rng.random_bool(0.7) {
                terms.push((j, (rng.random_range(-4.0f64..4.0) * 4.0).round() / 4.0));
            }
        }
        let rhs = (rng.random_range(-1.0f64..4.0) * 2.0).round() / 2.0;
        milp.add_constraint(LinearConstraint::new(format!("r{i}"), terms, random_cmp(rng), rhs));
    }
    milp.objective = MilpExpr::new((0..n).map(|j| (j, rng.random_range(-5.0..5.0))).collect(), 0.0);
    milp
}

/// Enumerates every binary pattern, completing each with an LP solve over
/// the continuous variables.
fn enumeration_oracle(milp: &Milp) -> Option<f64> {
    let bins: Vec<usize> = milp.integer_indices();
    let mut best: Option<f64> = None;
    for pattern in 0u32..(1 << bins.len()) {
        let mut lower: Vec<f64> = milp.vars.iter().map(|v| v.lower).collect();
        let mut upper: Vec<f64> = milp.vars.iter().map(|v| v.upper).collect();
        for (bit, &j) in bins.iter().enumerate() {
            let v = ((pattern >> bit) & 1) as f64;
            lower[j] = v;
            upper[j] = v;
        }
        let lp = solve_relaxation(milp, &lower, &upper, Pricing::Bland);
        if lp.status != LpStatus::Optimal {
            continue;
        }
        best = Some(match (best, milp.sense) {
            (None, _) => lp.objective,
            (Some(b), Sense::Maximize) => b.max(lp.objective),
            (Some(b), Sense::Minimize) => b.min(lp.objective),
        });
    }
    best
}

#[test]
fn random_milps_match_exhaustive_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut solved = 0;
    for instance in 0..200 {
        let milp = random_milp(&mut rng);
        let oracle = enumeration_oracle(&milp);
        let sol = solve_milp(&milp, LIMIT, 1e-9);
        match oracle {
            Some(best) => {
                solved += 1;
                assert_eq!(sol.status, MilpStatus::Optimal, "instance {instance}");
                assert!((sol.objective - best).abs() <= 1e-6, "instance {instance}: {} vs {best}", sol.objective);
                assert!(milp.is_feasible(&sol.values, 1e-6, 1e-6), "instance {instance}");
            }
            None => assert_eq!(sol.status, MilpStatus::Infeasible, "instance {instance}"),
        }
    }
    assert!(solved >= 100, "only {solved} feasible instances");
}

#[test]
fn incumbent_never_exceeds_bound_at_checkpoints() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let mut milp = random_milp(&mut rng);
        milp.sense = Sense::Maximize;
        let sol = solve_milp(&milp, LIMIT, 1e-6);
        for cp in &sol.checkpoints {
            if let Some(inc) = cp.incumbent {
                assert!(inc <= cp.bound + 1e-6, "{cp:?}");
            }
        }
        if sol.status.has_solution() {
            assert!(sol.objective <= sol.bound + 1e-6);
        }
    }
}

#[test]
fn identical_inputs_give_identical_results() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..30 {
        let milp = random_milp(&mut rng);
        let a = solve_milp(&milp, LIMIT, 1e-6);
        let b = solve_milp(&milp, LIMIT, 1e-6);
        assert_eq!(a.status, b.status);
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
        assert_eq!(a.nodes_explored, b.nodes_explored);
    }
}

#[test]
fn golden_lp_file() {
    let mut milp = Milp::new(Sense::Maximize);
    let x = milp.add_var(MilpVar::continuous("x", 0.0, 10.0));
    milp.add_constraint(LinearConstraint::new("c0", vec![(x, 1.0)], Cmp::Le, 5.0));
    milp.objective = MilpExpr::var(x);
    let text = export_lp_format(&milp);
    assert_eq!(text, include_str!("golden/bounded_max.lp"));
    for needle in ["Maximize", "x <= 5", "0 <= x <= 10", "End"] {
        assert!(text.contains(needle));
    }
}

#[test]
fn binaries_section_lists_binary_variables() {
    let mut milp = Milp::new(Sense::Minimize);
    let d = milp.add_var(MilpVar::binary("d"));
    let y = milp.add_var(MilpVar::continuous("y", -1.0, 1.0));
    milp.add_constraint(LinearConstraint::new("link", vec![(y, 1.0), (d, -2.0)], Cmp::Ge, -1.0));
    milp.objective = MilpExpr::new(vec![(y, 1.0)], 0.0);
    let text = export_lp_format(&milp);
    let section = text.split("Binaries\n").nth(1).expect("binaries section");
    assert!(section.lines().next().unwrap().split_whitespace().any(|t| t == "d"));
}

#[test]
fn export_then_parse_preserves_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for instance in 0..20 {
        let mut milp = random_milp(&mut rng);
        // awkward names exercise the escaping scheme
        for (j, v) in milp.vars.iter_mut().enumerate() {
            v.name = format!("{j} h[{j}]_{}", v.name);
        }
        milp.objective.constant = rng.random_range(-2.0..2.0);
        let back = parse_lp_format(&export_lp_format(&milp)).unwrap();
        assert_eq!(back.vars, milp.vars, "instance {instance}");
        assert_eq!(back.constraints.len(), milp.constraints.len());
        let a = solve_milp(&milp, LIMIT, 1e-9);
        let b = solve_milp(&back, LIMIT, 1e-9);
        assert_eq!(a.status, b.status, "instance {instance}");
        if a.status.has_solution() {
            assert!((a.objective - b.objective).abs() <= 1e-9, "instance {instance}");
        }
    }
}
