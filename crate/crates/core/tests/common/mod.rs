#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use synrisk::{Cell, Dataset, RiskConfig, Schema, VariableSpec};

/// Random orig/syn pair plus a config that exercises every variable role.
pub struct Instance {
    pub orig: Dataset,
    pub syns: Vec<Dataset>,
    pub cfg: RiskConfig,
}

/// Variables: K0 (known cat), KA (known continuous), C0..C{nc-1}
/// (synthesized continuous), G0..G{ng-1} (synthesized categorical).
pub fn random_instance(seed: u64, max_n: usize, m: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=max_n);
    let n_con = rng.random_range(1..=3);
    let n_cat = rng.random_range(0..=2);
    let percentage = rng.random_bool(0.5);
    let euclidean = rng.random_bool(0.5);
    let with_known_con = rng.random_bool(0.7);

    let mut vars = vec![VariableSpec::categorical("K0", ["a", "b"])];
    if with_known_con {
        vars.push(VariableSpec::continuous("KA"));
    }
    for c in 0..n_con {
        vars.push(VariableSpec::continuous(format!("C{c}")));
    }
    for g in 0..n_cat {
        vars.push(VariableSpec::categorical(format!("G{g}"), ["x", "y", "z"]));
    }
    let schema = Schema::new(vars).unwrap();

    // Clustered continuous values so that matches are common; a few
    // negative values exercise the |x| convention.
    let draw_con = |rng: &mut ChaCha8Rng| -> f64 {
        let centre = [50.0, 100.0, 400.0, -80.0][rng.random_range(0..4)];
        centre * (1.0 + 0.15 * (rng.random::<f64>() - 0.5))
    };
    let draw_row = |rng: &mut ChaCha8Rng| -> Vec<Cell> {
        schema
            .variables()
            .iter()
            .map(|v| {
                if v.is_continuous() {
                    Cell::Num(draw_con(rng))
                } else {
                    Cell::Level(rng.random_range(0..v.levels.len() as u32))
                }
            })
            .collect()
    };
    let orig_rows: Vec<Vec<Cell>> = (0..n).map(|_| draw_row(&mut rng)).collect();
    let orig = Dataset::from_rows(schema.clone(), &orig_rows).unwrap();

    let syns = (0..m)
        .map(|_| {
            let rows: Vec<Vec<Cell>> = orig_rows
                .iter()
                .map(|row| {
                    row.iter()
                        .zip(schema.variables())
                        .map(|(cell, v)| {
                            let synthesized = v.name.starts_with('C') || v.name.starts_with('G');
                            if !synthesized {
                                return *cell;
                            }
                            match rng.random_range(0..3) {
                                // keep, resample from another record, or fresh draw
                                0 => *cell,
                                1 => orig_rows[rng.random_range(0..n)][schema.index_of(&v.name).unwrap()],
                                _ => {
                                    if v.is_continuous() {
                                        Cell::Num(draw_con(&mut rng))
                                    } else {
                                        Cell::Level(rng.random_range(0..3))
                                    }
                                }
                            }
                        })
                        .collect()
                })
                .collect();
            Dataset::from_rows(schema.clone(), &rows).unwrap()
        })
        .collect();

    let mut known = vec!["K0".to_string()];
    if with_known_con {
        known.push("KA".into());
    }
    let mut synthesized: Vec<String> = (0..n_con).map(|c| format!("C{c}")).collect();
    synthesized.extend((0..n_cat).map(|g| format!("G{g}")));
    let mut cfg = RiskConfig::new(known, synthesized).percentage(percentage).euclidean(euclidean);
    for v in schema.variables().iter().filter(|v| v.is_continuous()) {
        let r = if percentage { rng.random_range(0.0..0.3) } else { rng.random_range(0.0..40.0) };
        cfg.radii.insert(v.name.clone(), r);
    }
    Instance { orig, syns, cfg }
}

/// Independent reference: direct double loop over records, written only
/// from the matching definitions.
pub fn oracle_counts(orig: &Dataset, syn: &Dataset, cfg: &RiskConfig) -> Vec<(usize, bool)> {
    let schema = orig.schema();
    let n = orig.n_rows();
    let half = |x: f64, r: f64| if cfg.percentage { r * x.abs() } else { r };
    let inside = |x: f64, r: f64, y: f64| {
        let h = half(x, r);
        x - h <= y && y <= x + h
    };
    let matches = |i: usize, j: usize| -> bool {
        let t = orig.record(i);
        let c = syn.record(j);
        for name in &cfg.known {
            let k = schema.index_of(name).unwrap();
            match (t[k], c[k]) {
                (Cell::Level(a), Cell::Level(b)) if a != b => return false,
                (Cell::Num(x), Cell::Num(y)) if !inside(x, cfg.radii[name], y) => return false,
                _ => {}
            }
        }
        let mut dist2 = 0.0;
        for name in &cfg.synthesized {
            let k = schema.index_of(name).unwrap();
            match (t[k], c[k]) {
                (Cell::Level(a), Cell::Level(b)) if a != b => return false,
                (Cell::Num(x), Cell::Num(y)) => {
                    let r = cfg.radii[name];
                    if !inside(x, r, y) {
                        return false;
                    }
                    let h = half(x, r);
                    if h > 0.0 {
                        dist2 += ((y - x) / h).powi(2);
                    }
                }
                _ => {}
            }
        }
        !cfg.euclidean || dist2 <= 1.0
    };
    (0..n).map(|i| ((0..n).filter(|&j| matches(i, j)).count(), matches(i, i))).collect()
}

/// Plain Newton–Raphson on the ridge-penalized log-likelihood with Gaussian
/// elimination, independent of the library's linear algebra.
#[allow(clippy::needless_range_loop)]
pub fn newton_oracle(x: &[Vec<f64>], y: &[f64], ridge: f64) -> Vec<f64> {
    let p = x[0].len();
    let mut beta = vec![0.0; p];
    for _ in 0..200 {
        let mut grad = vec![0.0; p];
        let mut hess = vec![vec![0.0; p]; p];
        for (row, &yi) in x.iter().zip(y) {
            let eta: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
            let mu = 1.0 / (1.0 + (-eta).exp());
            for a in 0..p {
                grad[a] += (yi - mu) * row[a];
                for b in 0..p {
                    hess[a][b] += mu * (1.0 - mu) * row[a] * row[b];
                }
            }
        }
        for a in 0..p {
            grad[a] -= ridge * beta[a];
            hess[a][a] += ridge;
        }
        let step = gauss_solve(hess, grad);
        let mut change: f64 = 0.0;
        for a in 0..p {
            beta[a] += step[a];
            change = change.max(step[a].abs());
        }
        if change < 1e-13 {
            break;
        }
    }
    beta
}

#[allow(clippy::needless_range_loop)]
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Random logistic design with an intercept column and 1 to 3 predictors.
pub fn random_design(seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(30..80);
    let p = rng.random_range(1..4);
    let truth: Vec<f64> = (0..=p).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for _ in 0..n {
        let mut row = vec![1.0];
        row.extend((0..p).map(|_| rng.random_range(-2.0..2.0)));
        let eta: f64 = row.iter().zip(&truth).map(|(a, b)| a * b).sum();
        let prob = 1.0 / (1.0 + (-eta).exp());
        y.push(if rng.random::<f64>() < prob { 1.0 } else { 0.0 });
        x.push(row);
    }
    (x, y)
}

pub fn to_matrix(x: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(x.len(), x[0].len(), |r, c| x[r][c])
}
