//! Sequential CART synthesis.
//!
//! Each variable of the visit sequence gets a regression tree (continuous
//! response, variance reduction) or classification tree (categorical
//! response, Gini decrease) fit on the original data with every other
//! variable as a predictor. Synthetic values are produced by dropping each
//! record down the tree, using already-synthesized values for predictors
//! earlier in the sequence, and drawing a donor uniformly from the leaf.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Column, Dataset};
use crate::error::{Error, Result};

/// Level subsets are searched exhaustively up to this many levels.
pub const EXHAUSTIVE_LEVELS: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisPlan {
    pub visit_sequence: Vec<String>,
    pub m: usize,
    #[serde(default = "default_min_bucket")]
    pub min_bucket: usize,
    #[serde(default = "default_min_split")]
    pub min_split: usize,
    #[serde(default = "default_cp")]
    pub complexity_threshold: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_min_bucket() -> usize {
    5
}
fn default_min_split() -> usize {
    10
}
fn default_cp() -> f64 {
    1e-8
}

impl SynthesisPlan {
    pub fn new<S: Into<String>>(visit_sequence: impl IntoIterator<Item = S>, m: usize, seed: u64) -> Self {
        SynthesisPlan {
            visit_sequence: visit_sequence.into_iter().map(Into::into).collect(),
            m,
            min_bucket: default_min_bucket(),
            min_split: default_min_split(),
            complexity_threshold: default_cp(),
            seed,
        }
    }

    fn validate(&self, data: &Dataset) -> Result<Vec<usize>> {
        if self.m == 0 {
            return Err(Error::config("m", "at least one replicate is required"));
        }
        if self.min_bucket == 0 {
            return Err(Error::config("min_bucket", "must be positive"));
        }
        let mut idx = Vec::with_capacity(self.visit_sequence.len());
        for name in &self.visit_sequence {
            let i = data
                .schema()
                .index_of(name)
                .map_err(|_| Error::config("visit_sequence", format!("unknown variable `{name}`")))?;
            if idx.contains(&i) {
                return Err(Error::config("visit_sequence", format!("`{name}` listed twice")));
            }
            idx.push(i);
        }
        Ok(idx)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SplitRule {
    /// `x <= threshold` goes left.
    Threshold(f64),
    /// Listed level indices go left, everything else right.
    Levels(Vec<u32>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { donors: Vec<usize> },
    Split { variable: usize, rule: SplitRule, left: usize, right: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CartTree {
    pub response: usize,
    pub predictors: Vec<usize>,
    /// Root at index 0.
    pub nodes: Vec<Node>,
}

impl CartTree {
    pub fn leaves(&self) -> impl Iterator<Item = &[usize]> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { donors } => Some(donors.as_slice()),
            Node::Split { .. } => None,
        })
    }

    pub fn root_split(&self) -> Option<(usize, &SplitRule)> {
        match &self.nodes[0] {
            Node::Split { variable, rule, .. } => Some((*variable, rule)),
            Node::Leaf { .. } => None,
        }
    }

    /// Donor rows of the leaf that `row` of `columns` falls into.
    pub fn leaf_for(&self, columns: &[Column], row: usize) -> &[usize] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { donors } => return donors,
                Node::Split { variable, rule, left, right } => {
                    let go_left = match (rule, &columns[*variable]) {
                        (SplitRule::Threshold(t), Column::Continuous(v)) => v[row] <= *t,
                        (SplitRule::Levels(set), Column::Categorical(v)) => set.contains(&v[row]),
                        _ => unreachable!("split rule matches predictor kind"),
                    };
                    at = if go_left { *left } else { *right };
                }
            }
        }
    }
}

/// Response summary used by the impurity computations.
enum Response<'a> {
    /// Values centred on the root mean.
    Continuous(Vec<f64>),
    Categorical {
        values: &'a [u32],
        n_classes: usize,
    },
}

#[derive(Clone)]
enum Stats {
    Cont { n: usize, sum: f64, sumsq: f64 },
    Cat { n: usize, counts: Vec<usize> },
}

impl Stats {
    fn empty(resp: &Response) -> Self {
        match resp {
            Response::Continuous(_) => Stats::Cont { n: 0, sum: 0.0, sumsq: 0.0 },
            Response::Categorical { n_classes, .. } => Stats::Cat { n: 0, counts: vec![0; *n_classes] },
        }
    }

    fn add(&mut self, resp: &Response, row: usize) {
        match (self, resp) {
            (Stats::Cont { n, sum, sumsq }, Response::Continuous(y)) => {
                *n += 1;
                *sum += y[row];
                *sumsq += y[row] * y[row];
            }
            (Stats::Cat { n, counts }, Response::Categorical { values, .. }) => {
                *n += 1;
                counts[values[row] as usize] += 1;
            }
            _ => unreachable!(),
        }
    }

    fn merge(&mut self, other: &Stats) {
        match (self, other) {
            (Stats::Cont { n, sum, sumsq }, Stats::Cont { n: n2, sum: s2, sumsq: q2 }) => {
                *n += n2;
                *sum += s2;
                *sumsq += q2;
            }
            (Stats::Cat { n, counts }, Stats::Cat { n: n2, counts: c2 }) => {
                *n += n2;
                for (a, b) in counts.iter_mut().zip(c2) {
                    *a += b;
                }
            }
            _ => unreachable!(),
        }
    }

    fn minus(&self, other: &Stats) -> Stats {
        match (self, other) {
            (Stats::Cont { n, sum, sumsq }, Stats::Cont { n: n2, sum: s2, sumsq: q2 }) => {
                Stats::Cont { n: n - n2, sum: sum - s2, sumsq: sumsq - q2 }
            }
            (Stats::Cat { n, counts }, Stats::Cat { n: n2, counts: c2 }) => {
                Stats::Cat { n: n - n2, counts: counts.iter().zip(c2).map(|(a, b)| a - b).collect() }
            }
            _ => unreachable!(),
        }
    }

    fn n(&self) -> usize {
        match self {
            Stats::Cont { n, .. } | Stats::Cat { n, .. } => *n,
        }
    }

    /// Sum of squared deviations, or `n` times the Gini index.
    fn impurity(&self) -> f64 {
        match self {
            Stats::Cont { n, sum, sumsq } => {
                if *n == 0 {
                    0.0
                } else {
                    (sumsq - sum * sum / *n as f64).max(0.0)
                }
            }
            Stats::Cat { n, counts } => {
                if *n == 0 {
                    0.0
                } else {
                    let sq: f64 = counts.iter().map(|&c| (c * c) as f64).sum();
                    *n as f64 - sq / *n as f64
                }
            }
        }
    }

    /// Ordering key for the many-level categorical heuristic.
    fn ordering_key(&self, majority: usize) -> f64 {
        match self {
            Stats::Cont { n, sum, .. } => sum / *n as f64,
            Stats::Cat { n, counts } => counts[majority] as f64 / *n as f64,
        }
    }
}

struct Candidate {
    variable: usize,
    rule: SplitRule,
    gain: f64,
}

/// Fits one tree with `response` as the target.
pub fn fit_tree(data: &Dataset, response: &str, predictors: &[String], plan: &SynthesisPlan) -> Result<CartTree> {
    let schema = data.schema();
    let resp_idx = schema.index_of(response)?;
    let mut pred_idx = Vec::with_capacity(predictors.len());
    for p in predictors {
        let i = schema.index_of(p)?;
        if i == resp_idx {
            return Err(Error::config("predictors", format!("`{p}` is the response")));
        }
        pred_idx.push(i);
    }
    Ok(fit_indices(data, resp_idx, &pred_idx, plan))
}

fn fit_indices(data: &Dataset, resp_idx: usize, pred_idx: &[usize], plan: &SynthesisPlan) -> CartTree {
    let n = data.n_rows();
    let response = match data.column_at(resp_idx) {
        Column::Continuous(v) => {
            let mean = if n == 0 { 0.0 } else { v.iter().sum::<f64>() / n as f64 };
            Response::Continuous(v.iter().map(|x| x - mean).collect())
        }
        Column::Categorical(v) => {
            Response::Categorical { values: v, n_classes: data.schema().spec(resp_idx).levels.len() }
        }
    };

    let all_rows: Vec<usize> = (0..n).collect();
    let root_stats = stats_of(&response, &all_rows);
    let root_impurity = root_stats.impurity();

    let mut nodes = vec![Node::Leaf { donors: Vec::new() }];
    let mut stack = vec![(0usize, all_rows)];
    while let Some((at, rows)) = stack.pop() {
        let split = if rows.len() < plan.min_split || root_impurity <= 0.0 || is_pure(data.column_at(resp_idx), &rows) {
            None
        } else {
            best_split(data, &response, pred_idx, &rows, plan.min_bucket)
                .filter(|c| c.gain / root_impurity >= plan.complexity_threshold && c.gain > 0.0)
        };
        match split {
            None => nodes[at] = Node::Leaf { donors: rows },
            Some(c) => {
                let col = data.column_at(c.variable);
                let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&row| match (&c.rule, col) {
                    (SplitRule::Threshold(t), Column::Continuous(v)) => v[row] <= *t,
                    (SplitRule::Levels(set), Column::Categorical(v)) => set.contains(&v[row]),
                    _ => unreachable!(),
                });
                let left = nodes.len();
                nodes.push(Node::Leaf { donors: Vec::new() });
                let right = nodes.len();
                nodes.push(Node::Leaf { donors: Vec::new() });
                nodes[at] = Node::Split { variable: c.variable, rule: c.rule, left, right };
                stack.push((right, r));
                stack.push((left, l));
            }
        }
    }
    CartTree { response: resp_idx, predictors: pred_idx.to_vec(), nodes }
}

fn is_pure(col: &Column, rows: &[usize]) -> bool {
    match col {
        Column::Continuous(v) => rows.windows(2).all(|w| v[w[0]] == v[w[1]]),
        Column::Categorical(v) => rows.windows(2).all(|w| v[w[0]] == v[w[1]]),
    }
}

fn stats_of(resp: &Response, rows: &[usize]) -> Stats {
    let mut s = Stats::empty(resp);
    for &r in rows {
        s.add(resp, r);
    }
    s
}

fn best_split(
    data: &Dataset,
    resp: &Response,
    pred_idx: &[usize],
    rows: &[usize],
    min_bucket: usize,
) -> Option<Candidate> {
    let parent = stats_of(resp, rows);
    let parent_impurity = parent.impurity();
    let mut best: Option<Candidate> = None;
    let mut consider = |cand: Candidate| {
        if best.as_ref().is_none_or(|b| cand.gain > b.gain) {
            best = Some(cand);
        }
    };
    for &var in pred_idx {
        match data.column_at(var) {
            Column::Continuous(x) => {
                let mut sorted = rows.to_vec();
                sorted.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
                let mut left = Stats::empty(resp);
                for k in 0..sorted.len() - 1 {
                    left.add(resp, sorted[k]);
                    let (lo, hi) = (x[sorted[k]], x[sorted[k + 1]]);
                    if lo == hi || k + 1 < min_bucket || sorted.len() - k - 1 < min_bucket {
                        continue;
                    }
                    let right = parent.minus(&left);
                    let gain = parent_impurity - left.impurity() - right.impurity();
                    let mid = lo + (hi - lo) / 2.0;
                    let threshold = if mid < hi { mid } else { lo };
                    consider(Candidate { variable: var, rule: SplitRule::Threshold(threshold), gain });
                }
            }
            Column::Categorical(x) => {
                let n_levels = data.schema().spec(var).levels.len();
                let mut per_level: Vec<Option<Stats>> = vec![None; n_levels];
                for &r in rows {
                    per_level[x[r] as usize].get_or_insert_with(|| Stats::empty(resp)).add(resp, r);
                }
                let mut present: Vec<(u32, Stats)> =
                    per_level.into_iter().enumerate().filter_map(|(l, s)| s.map(|s| (l as u32, s))).collect();
                if present.len() < 2 {
                    continue;
                }
                let mut eval = |left_levels: Vec<u32>, left: &Stats| {
                    let right = parent.minus(left);
                    if left.n() < min_bucket || right.n() < min_bucket {
                        return;
                    }
                    let gain = parent_impurity - left.impurity() - right.impurity();
                    let mut levels = left_levels;
                    levels.sort_unstable();
                    consider(Candidate { variable: var, rule: SplitRule::Levels(levels), gain });
                };
                if present.len() <= EXHAUSTIVE_LEVELS {
                    // The first present level always goes left; this skips
                    // mirror-image partitions.
                    let others = present.len() - 1;
                    for mask in 0u32..(1u32 << others) - 1 {
                        let mut left = present[0].1.clone();
                        let mut levels = vec![present[0].0];
                        for (b, (lvl, s)) in present[1..].iter().enumerate() {
                            if mask & (1 << b) != 0 {
                                left.merge(s);
                                levels.push(*lvl);
                            }
                        }
                        eval(levels, &left);
                    }
                } else {
                    let majority = match &parent {
                        Stats::Cat { counts, .. } => counts
                            .iter()
                            .enumerate()
                            .max_by_key(|&(i, c)| (*c, std::cmp::Reverse(i)))
                            .map_or(0, |(i, _)| i),
                        Stats::Cont { .. } => 0,
                    };
                    present.sort_by(|a, b| {
                        a.1.ordering_key(majority).total_cmp(&b.1.ordering_key(majority)).then(a.0.cmp(&b.0))
                    });
                    let mut left = Stats::empty(resp);
                    let mut levels = Vec::new();
                    for (lvl, s) in &present[..present.len() - 1] {
                        left.merge(s);
                        levels.push(*lvl);
                        eval(levels.clone(), &left);
                    }
                }
            }
        }
    }
    best
}

/// Trees for one visit sequence, fit once on the original data and reused
/// for any number of replicates.
#[derive(Clone, Debug)]
pub struct Synthesizer<'a> {
    orig: &'a Dataset,
    trees: Vec<CartTree>,
}

impl<'a> Synthesizer<'a> {
    pub fn fit(orig: &'a Dataset, plan: &SynthesisPlan) -> Result<Self> {
        let visit = plan.validate(orig)?;
        let trees = visit
            .iter()
            .map(|&v| {
                let predictors: Vec<usize> = (0..orig.schema().len()).filter(|&p| p != v).collect();
                fit_indices(orig, v, &predictors, plan)
            })
            .collect();
        Ok(Synthesizer { orig, trees })
    }

    pub fn trees(&self) -> &[CartTree] {
        &self.trees
    }

    /// Replicate `replicate` under `seed`; each replicate index has its own
    /// RNG stream.
    pub fn draw(&self, seed: u64, replicate: usize) -> Dataset {
        let orig = self.orig;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(replicate as u64);
        let mut columns = orig.columns().to_vec();
        for tree in &self.trees {
            let source = orig.column_at(tree.response);
            let drawn: Vec<usize> = (0..orig.n_rows())
                .map(|i| {
                    let donors = tree.leaf_for(&columns, i);
                    donors[rng.random_range(0..donors.len())]
                })
                .collect();
            columns[tree.response] = match source {
                Column::Continuous(v) => Column::Continuous(drawn.iter().map(|&d| v[d]).collect()),
                Column::Categorical(v) => Column::Categorical(drawn.iter().map(|&d| v[d]).collect()),
            };
        }
        Dataset::new(orig.schema().clone(), columns).expect("donor values come from valid columns")
    }

    pub fn draw_many(&self, seed: u64, m: usize) -> Vec<Dataset> {
        (0..m).into_par_iter().map(|k| self.draw(seed, k)).collect()
    }
}

/// Produces `plan.m` partially synthetic replicates of `orig`.
pub fn synthesize(orig: &Dataset, plan: &SynthesisPlan) -> Result<Vec<Dataset>> {
    let synth = Synthesizer::fit(orig, plan)?;
    Ok(synth.draw_many(plan.seed, plan.m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Cell, Schema, VariableSpec};

    fn xy(rows: &[(f64, f64)]) -> Dataset {
        let schema = Schema::new(vec![VariableSpec::continuous("x"), VariableSpec::continuous("y")]).unwrap();
        let rows: Vec<Vec<Cell>> = rows.iter().map(|&(x, y)| vec![Cell::Num(x), Cell::Num(y)]).collect();
        Dataset::from_rows(schema, &rows).unwrap()
    }

    #[test]
    fn constant_response_is_one_leaf() {
        let d = xy(&(0..30).map(|i| (i as f64, 7.0)).collect::<Vec<_>>());
        let t = fit_tree(&d, "y", &["x".into()], &SynthesisPlan::new(["y"], 1, 0)).unwrap();
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.leaves().next().unwrap().len(), 30);
    }

    #[test]
    fn no_predictors_is_one_leaf() {
        let d = xy(&(0..30).map(|i| (i as f64, i as f64)).collect::<Vec<_>>());
        let t = fit_tree(&d, "y", &[], &SynthesisPlan::new(["y"], 1, 0)).unwrap();
        assert_eq!(t.nodes.len(), 1);
    }

    #[test]
    fn perfect_split() {
        let rows: Vec<(f64, f64)> = (0..40).map(|i| if i % 2 == 0 { (-1.0, 0.0) } else { (1.0, 1.0) }).collect();
        let t = fit_tree(&xy(&rows), "y", &["x".into()], &SynthesisPlan::new(["y"], 1, 0)).unwrap();
        assert_eq!(t.nodes.len(), 3);
        assert_eq!(t.root_split(), Some((0, &SplitRule::Threshold(0.0))));
        for leaf in t.leaves() {
            assert_eq!(leaf.len(), 20);
        }
    }

    #[test]
    fn categorical_response_and_predictor() {
        let schema = Schema::new(vec![
            VariableSpec::categorical("g", ["a", "b", "c", "d"]),
            VariableSpec::categorical("h", ["yes", "no"]),
        ])
        .unwrap();
        // h = yes exactly for g in {b, d}
        let rows: Vec<Vec<Cell>> = (0..40)
            .map(|i| {
                let g = (i % 4) as u32;
                vec![Cell::Level(g), Cell::Level(u32::from(g.is_multiple_of(2)))]
            })
            .collect();
        let d = Dataset::from_rows(schema, &rows).unwrap();
        let t = fit_tree(&d, "h", &["g".into()], &SynthesisPlan::new(["h"], 1, 0)).unwrap();
        assert_eq!(t.root_split(), Some((0, &SplitRule::Levels(vec![0, 2]))));
        assert_eq!(t.leaves().count(), 2);
    }

    #[test]
    fn plan_validation() {
        let d = xy(&[(1.0, 1.0)]);
        assert!(synthesize(&d, &SynthesisPlan::new(["nope"], 1, 0)).is_err());
        assert!(synthesize(&d, &SynthesisPlan::new(["y", "y"], 1, 0)).is_err());
        assert!(synthesize(&d, &SynthesisPlan::new(["y"], 0, 0)).is_err());
    }

    #[test]
    fn tiny_data_still_synthesizes() {
        let d = xy(&[(1.0, 2.0), (3.0, 4.0)]);
        let out = synthesize(&d, &SynthesisPlan::new(["y"], 3, 9)).unwrap();
        assert_eq!(out.len(), 3);
        for s in out {
            for y in s.column_at(1).as_continuous().unwrap() {
                assert!(*y == 2.0 || *y == 4.0);
            }
        }
    }
}
