//! Synthetic stand-in for a household expenditure survey extract.
//!
//! Seven variables: Age, Urban, Tenure, Educ, Expenditure, Marital, Income.
//! Log income depends on age and education; log expenditure depends on log
//! income and age; tenure and marital status depend on age (tenure also on
//! income).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{Column, Dataset, Schema, VariableSpec};
use crate::error::{Error, Result};

pub const URBAN_LEVELS: [&str; 2] = ["Urban", "Rural"];
pub const TENURE_LEVELS: [&str; 4] = ["OwnerMortgage", "OwnerNoMortgage", "Renter", "Other"];
pub const EDUC_LEVELS: [&str; 5] = ["LessThanHS", "HighSchool", "SomeCollege", "Bachelor", "Graduate"];
pub const MARITAL_LEVELS: [&str; 5] = ["Married", "Widowed", "Divorced", "Separated", "NeverMarried"];

pub fn ce_schema() -> Schema {
    Schema::new(vec![
        VariableSpec::continuous("Age"),
        VariableSpec::categorical("Urban", URBAN_LEVELS),
        VariableSpec::categorical("Tenure", TENURE_LEVELS),
        VariableSpec::categorical("Educ", EDUC_LEVELS),
        VariableSpec::continuous("Expenditure"),
        VariableSpec::categorical("Marital", MARITAL_LEVELS),
        VariableSpec::continuous("Income"),
    ])
    .expect("static schema is valid")
}

fn draw_weighted(rng: &mut ChaCha8Rng, weights: &[f64]) -> u32 {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i as u32;
        }
        u -= w;
    }
    (weights.len() - 1) as u32
}

/// `n` records, deterministic in `seed`.
pub fn generate_ce_like(n: usize, seed: u64) -> Result<Dataset> {
    if n < 1 {
        return Err(Error::config("n", "at least one record is required"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std = Normal::new(0.0, 1.0).expect("unit normal");

    let mut age = Vec::with_capacity(n);
    let mut urban = Vec::with_capacity(n);
    let mut tenure = Vec::with_capacity(n);
    let mut educ = Vec::with_capacity(n);
    let mut expenditure = Vec::with_capacity(n);
    let mut marital = Vec::with_capacity(n);
    let mut income = Vec::with_capacity(n);

    for _ in 0..n {
        let a = loop {
            let v: f64 = 50.0 + 15.0 * std.sample(&mut rng);
            if (20.0..=80.0).contains(&v) {
                break v.round();
            }
        };
        let u = draw_weighted(&mut rng, &[0.9, 0.1]);
        let e = draw_weighted(&mut rng, &[0.1, 0.25, 0.3, 0.22, 0.13]);
        let young = ((a - 20.0) / 60.0).clamp(0.0, 1.0);
        let m = draw_weighted(
            &mut rng,
            &[0.25 + 0.35 * young, 0.01 + 0.2 * young * young, 0.1 + 0.08 * young, 0.03, 0.5 * (1.0 - young) + 0.03],
        );

        let log_inc =
            10.6 + 0.15 * f64::from(e) + 0.02 * (a - 45.0) - 0.0008 * (a - 45.0).powi(2) + 0.75 * std.sample(&mut rng);
        let log_exp = 8.6 + 0.45 * (log_inc - 10.9) + 0.004 * (a - 50.0) + 0.45 * std.sample(&mut rng);
        let inc = log_inc.exp().round().max(1.0);
        let exp = log_exp.exp().round().max(1.0);

        let rich = (log_inc - 10.9).clamp(-2.0, 2.0);
        let t = draw_weighted(
            &mut rng,
            &[
                (0.35 + 0.15 * rich) * (1.0 - 0.5 * young * young),
                0.05 + 0.45 * young * young,
                (0.4 - 0.12 * rich).max(0.05) * (1.0 - 0.6 * young),
                0.04,
            ],
        );

        age.push(a);
        urban.push(u);
        tenure.push(t);
        educ.push(e);
        expenditure.push(exp);
        marital.push(m);
        income.push(inc);
    }

    Dataset::new(
        ce_schema(),
        vec![
            Column::Continuous(age),
            Column::Categorical(urban),
            Column::Categorical(tenure),
            Column::Categorical(educ),
            Column::Continuous(expenditure),
            Column::Categorical(marital),
            Column::Continuous(income),
        ],
    )
}
