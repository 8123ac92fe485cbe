mod common;

use common::{oracle_counts, random_instance};
use proptest::prelude::*;
use synrisk::{evaluate, evaluate_fast, record_risk, Cell, Dataset, RiskConfig, Schema, VariableSpec};

fn three_var_schema() -> Schema {
    Schema::new(vec![
        VariableSpec::continuous("Age"),
        VariableSpec::categorical("Urban", ["a", "b"]),
        VariableSpec::continuous("Income"),
    ])
    .unwrap()
}

fn rows(data: &[(f64, u32, f64)]) -> Vec<Vec<Cell>> {
    data.iter().map(|&(a, u, i)| vec![Cell::Num(a), Cell::Level(u), Cell::Num(i)]).collect()
}

#[test]
fn six_record_hand_enumeration() {
    let schema = three_var_schema();
    let orig = Dataset::from_rows(
        schema.clone(),
        &rows(&[
            (40.0, 0, 100.0),
            (42.0, 0, 105.0),
            (40.0, 1, 100.0),
            (60.0, 0, 200.0),
            (41.0, 0, 300.0),
            (65.0, 0, 210.0),
        ]),
    )
    .unwrap();
    let syn = Dataset::from_rows(
        schema,
        &rows(&[
            (40.0, 0, 108.0),
            (42.0, 0, 120.0),
            (40.0, 1, 95.0),
            (60.0, 0, 215.0),
            (41.0, 0, 98.0),
            (65.0, 0, 190.0),
        ]),
    )
    .unwrap();
    let cfg = RiskConfig::new(["Age", "Urban"], ["Income"]).with_radius("Age", 0.1).with_radius("Income", 0.1);

    let res = evaluate(&orig, std::slice::from_ref(&syn), &cfg).unwrap();
    let c: Vec<usize> = res.c_matrix.iter().map(|r| r[0]).collect();
    let t: Vec<u8> = res.t_matrix.iter().map(|r| r[0]).collect();
    let ir: Vec<f64> = res.ir_matrix.iter().map(|r| r[0]).collect();
    assert_eq!(c, vec![2, 2, 1, 2, 0, 2]);
    assert_eq!(t, vec![1, 0, 1, 1, 0, 1]);
    assert_eq!(ir, vec![0.5, 0.0, 1.0, 0.5, 0.0, 0.5]);
    assert_eq!(res.file_risk, vec![2.5]);
    assert_eq!(res.true_match_rate, vec![1.0 / 6.0]);
    assert_eq!(res.false_match_rate, vec![0.0]);

    let oracle = oracle_counts(&orig, &syn, &cfg);
    assert_eq!(oracle, c.iter().zip(&t).map(|(&c, &t)| (c, t == 1)).collect::<Vec<_>>());
    assert_eq!(evaluate_fast(&orig, std::slice::from_ref(&syn), &cfg).unwrap(), res);
    assert_eq!(record_risk(1, &orig, &syn, &cfg).unwrap().c, 2);
}

#[test]
fn identical_replicates_give_identical_columns() {
    let inst = random_instance(11, 60, 1);
    let syn = inst.syns[0].clone();
    let res = evaluate_fast(&inst.orig, &[syn.clone(), syn.clone(), syn], &inst.cfg).unwrap();
    for row in &res.ir_matrix {
        assert!(row.iter().all(|v| *v == row[0]));
    }
}

#[test]
fn synthetic_levels_matched_by_label() {
    // The synthetic file lists levels in a different order; matching must
    // still compare labels.
    let schema = three_var_schema();
    let orig = Dataset::from_rows(schema, &rows(&[(40.0, 0, 100.0), (50.0, 1, 100.0)])).unwrap();
    let flipped = Schema::new(vec![
        VariableSpec::continuous("Age"),
        VariableSpec::categorical("Urban", ["b", "a"]),
        VariableSpec::continuous("Income"),
    ])
    .unwrap();
    let syn = Dataset::from_rows(flipped, &rows(&[(40.0, 1, 100.0), (50.0, 0, 100.0)])).unwrap();
    let cfg = RiskConfig::new(["Age", "Urban"], ["Income"]).with_radius("Age", 0.0).with_radius("Income", 0.0);
    let res = evaluate(&orig, &[syn], &cfg).unwrap();
    assert_eq!(res.file_risk, vec![2.0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fast_equals_brute_equals_oracle(seed in any::<u64>()) {
        let inst = random_instance(seed, 120, 2);
        let brute = evaluate(&inst.orig, &inst.syns, &inst.cfg).unwrap();
        let fast = evaluate_fast(&inst.orig, &inst.syns, &inst.cfg).unwrap();
        prop_assert_eq!(&brute, &fast);
        for (k, syn) in inst.syns.iter().enumerate() {
            let oracle = oracle_counts(&inst.orig, syn, &inst.cfg);
            for (i, (c, t)) in oracle.into_iter().enumerate() {
                prop_assert_eq!(brute.c_matrix[i][k], c);
                prop_assert_eq!(brute.t_matrix[i][k] == 1, t);
            }
        }
    }

    #[test]
    fn record_bounds(seed in any::<u64>()) {
        let inst = random_instance(seed, 80, 2);
        let n = inst.orig.n_rows();
        let res = evaluate_fast(&inst.orig, &inst.syns, &inst.cfg).unwrap();
        for k in 0..res.n_datasets() {
            let mut sum = 0.0;
            for i in 0..n {
                let rr = res.record(i, k);
                prop_assert!((0.0..=1.0).contains(&rr.ir));
                prop_assert!(!rr.t || rr.c >= 1);
                prop_assert!(rr.c <= n);
                sum += rr.ir;
            }
            prop_assert_eq!(sum, res.file_risk[k]);
            prop_assert!(res.file_risk[k] <= n as f64);
            prop_assert!((0.0..=1.0).contains(&res.true_match_rate[k]));
            prop_assert!((0.0..=1.0).contains(&res.false_match_rate[k]));
        }
    }

    #[test]
    fn synthetic_row_permutation_invariance(seed in any::<u64>()) {
        // Permuting every row except the targets' own would change T_i, so
        // permute synthetic rows and apply the same permutation to the
        // original (the pairing is what defines "own record").
        let inst = random_instance(seed, 80, 1);
        let n = inst.orig.n_rows();
        let perm: Vec<usize> = (0..n).rev().collect();
        let permute = |d: &Dataset| {
            let r: Vec<Vec<Cell>> = perm.iter().map(|&i| d.record(i)).collect();
            Dataset::from_rows(d.schema().clone(), &r).unwrap()
        };
        let base = evaluate_fast(&inst.orig, &inst.syns, &inst.cfg).unwrap();
        let moved = evaluate_fast(&permute(&inst.orig), &[permute(&inst.syns[0])], &inst.cfg).unwrap();
        for (new_i, &old_i) in perm.iter().enumerate() {
            prop_assert_eq!(moved.record(new_i, 0), base.record(old_i, 0));
        }
    }

    #[test]
    fn non_target_rows_can_be_shuffled(seed in any::<u64>(), rot in 1usize..50) {
        // Shuffling the synthetic rows other than the target's own leaves
        // that target's c and t unchanged.
        let inst = random_instance(seed, 60, 1);
        let n = inst.orig.n_rows();
        prop_assume!(n > 2);
        let syn = &inst.syns[0];
        let target = 0;
        let mut others: Vec<usize> = (1..n).collect();
        let k = rot % others.len();
        others.rotate_left(k);
        let mut order = vec![target];
        order.extend(others);
        let r: Vec<Vec<Cell>> = order.iter().map(|&i| syn.record(i)).collect();
        let shuffled = Dataset::from_rows(syn.schema().clone(), &r).unwrap();
        let a = record_risk(target, &inst.orig, syn, &inst.cfg).unwrap();
        let b = record_risk(target, &inst.orig, &shuffled, &inst.cfg).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn rectangle_and_ellipse_agree_in_one_dimension(seed in any::<u64>()) {
        let mut inst = random_instance(seed, 80, 1);
        inst.cfg.known.retain(|k| k != "KA");
        inst.cfg.synthesized.retain(|s| s == "C0" || s.starts_with('G'));
        let rect = evaluate_fast(&inst.orig, &inst.syns, &inst.cfg.clone().euclidean(false)).unwrap();
        let ell = evaluate_fast(&inst.orig, &inst.syns, &inst.cfg.clone().euclidean(true)).unwrap();
        prop_assert_eq!(rect, ell);
    }
}
