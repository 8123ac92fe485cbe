mod common;

use common::{newton_oracle, random_design, to_matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use synrisk::utility::{penalized_gradient, penalized_log_likelihood};
use synrisk::{fit_logistic, propensity_utility, Cell, Dataset, LogisticOptions, Schema, VariableSpec};

#[test]
fn coefficients_match_newton_oracle() {
    for seed in 0..20 {
        let (x, y) = random_design(seed);
        let fit = fit_logistic(&to_matrix(&x), &y, LogisticOptions::default()).unwrap();
        let oracle = newton_oracle(&x, &y, 1e-8);
        assert!(fit.converged, "seed {seed}");
        for (a, b) in fit.coefficients.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-6, "seed {seed}: {a} vs {b}");
        }
    }
}

#[test]
fn six_row_fixed_instance() {
    let x: Vec<Vec<f64>> = [-1.5, -0.5, 0.2, 0.4, 1.0, 2.0].iter().map(|&v| vec![1.0, v]).collect();
    let y = [0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
    let fit = fit_logistic(&to_matrix(&x), &y, LogisticOptions::default()).unwrap();
    let oracle = newton_oracle(&x, &y, 1e-8);
    for (a, b) in fit.coefficients.iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
}

#[test]
fn gradient_vanishes_and_matches_finite_differences() {
    for seed in 100..120 {
        let (x, y) = random_design(seed);
        let xm = to_matrix(&x);
        let fit = fit_logistic(&xm, &y, LogisticOptions::default()).unwrap();
        let grad = penalized_gradient(&xm, &y, &fit.coefficients, 1e-8);
        let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        assert!(gmax < 1e-6, "seed {seed}: gradient {gmax}");

        // Away from the optimum the analytic gradient must agree with
        // central differences.
        let probe: Vec<f64> = fit.coefficients.iter().map(|b| b + 0.3).collect();
        let analytic = penalized_gradient(&xm, &y, &probe, 1e-8);
        let h = 1e-5;
        for k in 0..probe.len() {
            let mut up = probe.clone();
            let mut dn = probe.clone();
            up[k] += h;
            dn[k] -= h;
            let fd = (penalized_log_likelihood(&xm, &y, &up, 1e-8) - penalized_log_likelihood(&xm, &y, &dn, 1e-8))
                / (2.0 * h);
            let rel = (fd - analytic[k]).abs() / analytic[k].abs().max(1e-8);
            assert!(rel < 1e-4, "seed {seed} coef {k}: fd {fd} vs {}", analytic[k]);
        }
    }
}

#[test]
fn four_plus_four_utility_matches_oracle() {
    let schema = Schema::new(vec![VariableSpec::continuous("x")]).unwrap();
    let mk = |v: &[f64]| {
        let rows: Vec<Vec<Cell>> = v.iter().map(|&x| vec![Cell::Num(x)]).collect();
        Dataset::from_rows(schema.clone(), &rows).unwrap()
    };
    let o = [1.0, 2.0, 3.0, 4.0];
    let s = [2.5, 3.5, 4.5, 6.0];
    let u = propensity_utility(&mk(&o), &[mk(&s)]).unwrap().per_dataset[0];

    // Oracle: hand standardization, Newton fit, then the mean squared deviation from 1/2.
    let pooled: Vec<f64> = o.iter().chain(&s).copied().collect();
    let mean = pooled.iter().sum::<f64>() / 8.0;
    let sd = (pooled.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 8.0).sqrt();
    let x: Vec<Vec<f64>> = pooled.iter().map(|v| vec![1.0, (v - mean) / sd]).collect();
    let y = [0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0];
    let beta = newton_oracle(&x, &y, 1e-8);
    let expected: f64 = x
        .iter()
        .map(|r| {
            let p = 1.0 / (1.0 + (-(beta[0] + beta[1] * r[1])).exp());
            (p - 0.5).powi(2)
        })
        .sum::<f64>()
        / 8.0;
    assert!((u - expected).abs() < 1e-6, "{u} vs {expected}");
    assert!(u > 0.0 && u < 0.25);
}

#[test]
fn utility_bounds_and_row_order_invariance() {
    let schema =
        Schema::new(vec![VariableSpec::continuous("x"), VariableSpec::categorical("g", ["a", "b", "c"])]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut rows = |shift: f64| -> Vec<Vec<Cell>> {
        (0..40).map(|_| vec![Cell::Num(rng.random::<f64>() + shift), Cell::Level(rng.random_range(0..3))]).collect()
    };
    let o_rows = rows(0.0);
    let s_rows = rows(0.3);
    let o = Dataset::from_rows(schema.clone(), &o_rows).unwrap();
    let s = Dataset::from_rows(schema.clone(), &s_rows).unwrap();
    let u = propensity_utility(&o, &[s]).unwrap().per_dataset[0];
    assert!((0.0..=0.25).contains(&u));

    let rev =
        |r: &[Vec<Cell>]| Dataset::from_rows(schema.clone(), &r.iter().rev().cloned().collect::<Vec<_>>()).unwrap();
    let u2 = propensity_utility(&rev(&o_rows), &[rev(&s_rows)]).unwrap().per_dataset[0];
    assert!((u - u2).abs() < 1e-8, "{u} vs {u2}");
}
