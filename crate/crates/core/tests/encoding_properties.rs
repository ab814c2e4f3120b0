use std::sync::Arc;
use std::time::Duration;

use cnma_core::encoding::{extract_xy, nn_to_milp, BigMMode, EncodingOptions};
use cnma_core::milp::{solve_lp, solve_milp, LpStatus, Milp, MilpStatus};
use cnma_core::problem::{EvalResult, FnBlackbox, LinearExpr, Problem, Sample, Sense, VarKind, VariableSpec};
use cnma_core::surrogate::{train, AffineScaler, Architecture, Layer, ReluNetwork, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LIMIT: Duration = Duration::from_secs(30);

fn random_network(rng: &mut ChaCha8Rng) -> ReluNetwork {
    let inputs = rng.random_range(1..=3);
    let outputs = rng.random_range(1..=2);
    let depth = rng.random_range(1..=2);
    let mut widths = vec![inputs, rng.random_range(1..=8)];
    if depth == 2 {
        widths.push(rng.random_range(1..=4));
    }
    widths.push(outputs);
    let layers = widths
        .windows(2)
        .map(|w| {
            Layer::new(
                w[0],
                w[1],
                (0..w[0] * w[1]).map(|_| rng.random_range(-1.5..1.5)).collect(),
                (0..w[1]).map(|_| rng.random_range(-1.0..1.0)).collect(),
            )
        })
        .collect();
    let input_scaler = AffineScaler {
        shift: (0..inputs).map(|_| rng.random_range(-1.0..1.0)).collect(),
        scale: (0..inputs).map(|_| rng.random_range(0.5..2.0)).collect(),
    };
    let output_scaler = AffineScaler {
        shift: (0..outputs).map(|_| rng.random_range(-5.0..5.0)).collect(),
        scale: (0..outputs).map(|_| rng.random_range(0.5..10.0)).collect(),
    };
    ReluNetwork::new(layers, input_scaler, output_scaler).unwrap()
}

fn problem_for(net: &ReluNetwork, sense: Sense) -> Problem {
    let x_vars = (0..net.input_arity()).map(|i| VariableSpec::continuous(format!("x{i}"), -2.0, 3.0)).collect();
    let y_vars = (0..net.output_arity()).map(|k| VariableSpec::output(format!("y{k}"))).collect();
    let n = net.output_arity();
    Problem::new(
        x_vars,
        y_vars,
        LinearExpr::var("y0"),
        sense,
        Arc::new(FnBlackbox::new(net.input_arity(), n, move |_: &[f64]| Ok(vec![0.0; n]))),
    )
}

fn indicator_count(milp: &Milp) -> usize {
    milp.vars.iter().filter(|v| v.kind == VarKind::Binary && v.name.starts_with("nn.d")).count()
}

#[test]
fn fixing_x_reproduces_forward_pass() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for net_index in 0..100 {
        let net = random_network(&mut rng);
        for _ in 0..10 {
            let mut problem = problem_for(&net, Sense::Maximize);
            let x0: Vec<f64> = (0..net.input_arity()).map(|_| rng.random_range(-2.0..3.0)).collect();
            for (spec, &v) in problem.x_vars.iter_mut().zip(&x0) {
                spec.lower = v;
                spec.upper = v;
            }
            let expected = net.forward(&x0).unwrap();
            for mode in [BigMMode::Interval, BigMMode::Fixed] {
                let milp = nn_to_milp(&net, &problem, &EncodingOptions { big_m: mode, ..Default::default() }).unwrap();
                let sol = solve_milp(&milp, LIMIT, 1e-9);
                assert_eq!(sol.status, MilpStatus::Optimal, "network {net_index}, {mode:?}");
                let (_, y) = extract_xy(&milp, &problem, &sol.values);
                for (a, b) in y.iter().zip(&expected) {
                    assert!((a - b).abs() <= 1e-5, "network {net_index}, {mode:?}: milp {a} vs forward {b}");
                }
            }
        }
    }
}

#[test]
fn interval_and_fixed_big_m_agree_on_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for net_index in 0..40 {
        let net = random_network(&mut rng);
        let sense = if net_index % 2 == 0 { Sense::Maximize } else { Sense::Minimize };
        let problem = problem_for(&net, sense);
        let tight = nn_to_milp(&net, &problem, &EncodingOptions::default()).unwrap();
        let loose = nn_to_milp(&net, &problem, &EncodingOptions { big_m: BigMMode::Fixed, ..Default::default() }).unwrap();
        let a = solve_milp(&tight, LIMIT, 1e-9);
        let b = solve_milp(&loose, LIMIT, 1e-9);
        assert_eq!(a.status, MilpStatus::Optimal);
        assert_eq!(b.status, MilpStatus::Optimal);
        assert!((a.objective - b.objective).abs() <= 1e-5, "network {net_index}: {} vs {}", a.objective, b.objective);
        // the optimizer really is a forward-pass value
        let (x, _) = extract_xy(&tight, &problem, &a.values);
        assert!((net.forward(&x).unwrap()[0] - a.objective).abs() <= 1e-5);
    }
}

#[test]
fn one_indicator_per_hidden_neuron() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let net = random_network(&mut rng);
        let problem = problem_for(&net, Sense::Maximize);
        let milp = nn_to_milp(&net, &problem, &EncodingOptions::default()).unwrap();
        assert_eq!(indicator_count(&milp), net.architecture.hidden_neurons());
        assert_eq!(milp.binary_count(), net.architecture.hidden_neurons());
    }
}

/// With `d` pinned, the LP relaxation must force the matching ReLU branch.
#[test]
fn indicator_branches_hold_as_lp_feasibility() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut checked = 0;
    for _ in 0..60 {
        let net = random_network(&mut rng);
        let problem = problem_for(&net, Sense::Maximize);
        let base = nn_to_milp(&net, &problem, &EncodingOptions::default()).unwrap();
        let d = base.var_index("nn.d[0][0]").unwrap();
        let h = base.var_index("nn.h[0][0]").unwrap();
        if base.vars[d].lower == base.vars[d].upper {
            continue;
        }
        let layer = &net.layers[0];
        let pre_of = |values: &[f64]| -> f64 {
            let z: Vec<f64> = (0..net.input_arity()).map(|i| values[base.var_index(&format!("nn.xn[{i}]")).unwrap()]).collect();
            layer.biases[0] + layer.row(0).iter().zip(&z).map(|(w, v)| w * v).sum::<f64>()
        };
        for (fixed, sense) in [(0.0, Sense::Maximize), (0.0, Sense::Minimize), (1.0, Sense::Maximize), (1.0, Sense::Minimize)] {
            let mut milp = base.relaxed();
            milp.vars[d].lower = fixed;
            milp.vars[d].upper = fixed;
            // push h and pre apart as far as the relaxation allows
            milp.objective = cnma_core::milp::MilpExpr::new(vec![(h, 1.0)], 0.0);
            milp.sense = sense;
            let lp = solve_lp(&milp);
            if lp.status != LpStatus::Optimal {
                continue;
            }
            let out = lp.values[h];
            let pre = pre_of(&lp.values);
            if fixed == 0.0 {
                assert!((out - pre).abs() <= 1e-6 && pre >= -1e-6, "d=0: out {out}, pre {pre}");
            } else {
                assert!(out.abs() <= 1e-6 && pre <= 1e-6, "d=1: out {out}, pre {pre}");
            }
            checked += 1;
        }
    }
    assert!(checked > 40);
}

#[test]
fn objective_bound_cuts_off_worse_solutions() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let net = random_network(&mut rng);
    let problem = problem_for(&net, Sense::Maximize);
    let plain = solve_milp(&nn_to_milp(&net, &problem, &EncodingOptions::default()).unwrap(), LIMIT, 1e-9);
    let options = EncodingOptions { objective_bound: Some(plain.objective + 1.0), ..Default::default() };
    let bounded = solve_milp(&nn_to_milp(&net, &problem, &options).unwrap(), LIMIT, 1e-9);
    assert_eq!(bounded.status, MilpStatus::Infeasible);
}

#[test]
fn two_sample_rastrigin_surrogate_peaks_at_left_edge() {
    let samples = vec![
        Sample { x: vec![-3.495], result: EvalResult::ok(vec![32.210], 0.0) },
        Sample { x: vec![-2.436], result: EvalResult::ok(vec![25.161], 0.0) },
    ];
    let problem = Problem::new(
        vec![VariableSpec::continuous("x", -5.12, 5.12)],
        vec![VariableSpec::output("y")],
        LinearExpr::var("y"),
        Sense::Maximize,
        Arc::new(FnBlackbox::new(1, 1, |x: &[f64]| Ok(vec![x[0]]))),
    );
    for seed in 0..5 {
        let config = TrainConfig { weight_init_seed: seed, ..TrainConfig::default() };
        let net = train(&samples, &Architecture::default_sequential(), &config).unwrap();
        let milp = nn_to_milp(&net, &problem, &EncodingOptions::default()).unwrap();
        let sol = solve_milp(&milp, LIMIT, 1e-9);
        assert_eq!(sol.status, MilpStatus::Optimal);
        let (x, _) = extract_xy(&milp, &problem, &sol.values);
        assert!((x[0] + 5.12).abs() < 1e-6, "seed {seed}: maximizer at {}", x[0]);
    }
}
