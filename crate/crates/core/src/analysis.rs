//! Score-level fusion and pairwise significance testing of EERs.

use std::collections::HashSet;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::io::ScoreSet;
use crate::metrics::{probit_warp, MetricsError};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("fusion needs at least one member")]
    NoMembers,
    #[error("member {member} does not cover the same trials as member 0: {detail}")]
    TrialSetMismatch { member: usize, detail: String },
    #[error("{weights} weights for {members} members")]
    WeightLengthMismatch { members: usize, weights: usize },
    #[error("EERs {a} and {b} give zero variance")]
    ZeroVariance { a: f64, b: f64 },
    #[error("{0}")]
    OutOfDomain(String),
    #[error("need at least 2 runs, got {0}")]
    TooFewRuns(usize),
    #[error("run `{label}` has {n_bona}/{n_spoof} trials, others have {expected_bona}/{expected_spoof}")]
    CountMismatch {
        label: String,
        n_bona: usize,
        n_spoof: usize,
        expected_bona: usize,
        expected_spoof: usize,
    },
    #[error("duplicate run label `{0}`")]
    DuplicateLabel(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Member score sets and their weights.
#[derive(Debug, Clone)]
pub struct FusionSpec<'a, T> {
    pub members: Vec<&'a ScoreSet<T>>,
    pub weights: Vec<T>,
}

impl<'a, T: Real> FusionSpec<'a, T> {
    /// Weights `1/M` each.
    pub fn uniform(members: Vec<&'a ScoreSet<T>>) -> Self {
        let w = T::one() / T::from_count(members.len().max(1));
        let weights = vec![w; members.len()];
        Self { members, weights }
    }

    pub fn weighted(members: Vec<&'a ScoreSet<T>>, weights: Vec<T>) -> Self {
        Self { members, weights }
    }
}

/// Per trial, `Σ_m w_m s^(m)` accumulated in member order. Trial order follows
/// the first member.
pub fn fuse_scores<T: Real>(spec: &FusionSpec<'_, T>) -> Result<ScoreSet<T>, AnalysisError> {
    let first = *spec.members.first().ok_or(AnalysisError::NoMembers)?;
    if spec.weights.len() != spec.members.len() {
        return Err(AnalysisError::WeightLengthMismatch {
            members: spec.members.len(),
            weights: spec.weights.len(),
        });
    }
    for (m, member) in spec.members.iter().enumerate().skip(1) {
        if let Some(id) = first.trial_ids().find(|id| !member.contains(id)) {
            return Err(AnalysisError::TrialSetMismatch {
                member: m,
                detail: format!("missing `{id}`"),
            });
        }
        if let Some(id) = member.trial_ids().find(|id| !first.contains(id)) {
            return Err(AnalysisError::TrialSetMismatch {
                member: m,
                detail: format!("extra `{id}`"),
            });
        }
    }
    let mut out = ScoreSet::new();
    for id in first.trial_ids() {
        let fused = spec
            .members
            .iter()
            .zip(&spec.weights)
            .fold(T::zero(), |acc, (member, &w)| {
                acc + w * member.get(id).expect("checked above")
            });
        out.insert(id, fused)
            .map_err(|e| AnalysisError::OutOfDomain(e.to_string()))?;
    }
    Ok(out)
}

/// `2|a - b| / sqrt([a(1-a) + b(1-b)] (n_bona + n_spoof) / (n_bona n_spoof))`.
pub fn z_statistic<T: Real>(eer_a: T, eer_b: T, n_bona: usize, n_spoof: usize) -> Result<T, AnalysisError> {
    let unit = |v: T| v >= T::zero() && v <= T::one();
    if !unit(eer_a) || !unit(eer_b) {
        return Err(AnalysisError::OutOfDomain(format!(
            "EERs must lie in [0, 1], got {} and {}",
            eer_a.as_f64(),
            eer_b.as_f64()
        )));
    }
    if n_bona == 0 || n_spoof == 0 {
        return Err(AnalysisError::OutOfDomain("trial counts must be positive".into()));
    }
    let var = eer_a * (T::one() - eer_a) + eer_b * (T::one() - eer_b);
    if var == T::zero() {
        return Err(AnalysisError::ZeroVariance {
            a: eer_a.as_f64(),
            b: eer_b.as_f64(),
        });
    }
    let (nb, ns) = (T::from_count(n_bona), T::from_count(n_spoof));
    Ok(T::lit(2.0) * (eer_a - eer_b).abs() / (var * (nb + ns) / (nb * ns)).sqrt())
}

/// Two-sided critical value at level `alpha / n_tests`: the normal quantile
/// of `1 - alpha / (2 n_tests)`.
pub fn critical_z(alpha: f64, n_tests: usize) -> Result<f64, AnalysisError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(AnalysisError::OutOfDomain(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    if n_tests == 0 {
        return Err(AnalysisError::OutOfDomain("at least one test is required".into()));
    }
    Ok(probit_warp(1.0 - alpha / (2.0 * n_tests as f64))?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Correction {
    None,
    Bonferroni,
    Holm,
}

impl FromStr for Correction {
    type Err = AnalysisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Correction::None),
            "bonferroni" => Ok(Correction::Bonferroni),
            "holm" => Ok(Correction::Holm),
            other => Err(AnalysisError::OutOfDomain(format!("unknown correction `{other}`"))),
        }
    }
}

impl fmt::Display for Correction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Correction::None => "none",
            Correction::Bonferroni => "bonferroni",
            Correction::Holm => "holm",
        })
    }
}

/// How corrected thresholds are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThresholdRule {
    /// Adjust the level (`α/N`, Holm `α/(N-i+1)` with step-down stopping) and
    /// take the normal quantile.
    #[default]
    AdjustLevel,
    /// Divide the uncorrected critical value instead: `Z/N` for Bonferroni;
    /// for Holm, sort `z` ascending and test the rank-`i` value against `Z/i`
    /// with no stopping rule.
    DivideCritical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary<T> {
    pub label: String,
    pub eer: T,
    pub n_bona: usize,
    pub n_spoof: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignificanceMatrix<T> {
    pub labels: Vec<String>,
    /// Row-major `k x k`, symmetric, zero diagonal.
    pub z: Vec<T>,
    pub significant: Vec<bool>,
    pub alpha: f64,
    pub correction: Correction,
    pub rule: ThresholdRule,
}

impl<T: Real> SignificanceMatrix<T> {
    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn z_at(&self, i: usize, j: usize) -> T {
        self.z[i * self.size() + j]
    }

    pub fn is_significant(&self, i: usize, j: usize) -> bool {
        self.significant[i * self.size() + j]
    }

    fn csv(&self, cell: impl Fn(usize, usize) -> String) -> String {
        let mut out = String::from("label");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (i, l) in self.labels.iter().enumerate() {
            out.push_str(l);
            for j in 0..self.size() {
                write!(out, ",{}", cell(i, j)).expect("writing to a String");
            }
            out.push('\n');
        }
        out
    }

    /// `label,<labels...>` header, then one row of 0/1 cells per run.
    pub fn significance_csv(&self) -> String {
        self.csv(|i, j| u8::from(self.is_significant(i, j)).to_string())
    }

    /// Same layout with the z values.
    pub fn z_csv(&self) -> String {
        self.csv(|i, j| format!("{:?}", self.z_at(i, j).as_f64()))
    }
}

/// All pairwise z statistics and their significance under `correction`.
/// Runs must share trial counts; equal EERs give `z = 0`.
pub fn significance_matrix<T: Real>(
    runs: &[RunSummary<T>],
    alpha: f64,
    correction: Correction,
    rule: ThresholdRule,
) -> Result<SignificanceMatrix<T>, AnalysisError> {
    let k = runs.len();
    if k < 2 {
        return Err(AnalysisError::TooFewRuns(k));
    }
    let (nb, ns) = (runs[0].n_bona, runs[0].n_spoof);
    let mut seen = HashSet::new();
    for r in runs {
        if r.n_bona != nb || r.n_spoof != ns {
            return Err(AnalysisError::CountMismatch {
                label: r.label.clone(),
                n_bona: r.n_bona,
                n_spoof: r.n_spoof,
                expected_bona: nb,
                expected_spoof: ns,
            });
        }
        if !seen.insert(r.label.as_str()) {
            return Err(AnalysisError::DuplicateLabel(r.label.clone()));
        }
    }

    let mut pairs: Vec<(usize, usize, T)> = Vec::with_capacity(k * (k - 1) / 2);
    for i in 0..k {
        for j in i + 1..k {
            let z = if runs[i].eer == runs[j].eer {
                z_statistic(runs[i].eer, runs[j].eer, nb, ns).unwrap_or(T::zero())
            } else {
                z_statistic(runs[i].eer, runs[j].eer, nb, ns)?
            };
            pairs.push((i, j, z));
        }
    }
    let n = pairs.len();
    let base = critical_z(alpha, 1)?;
    let mut marked = vec![false; n];
    match (correction, rule) {
        (Correction::None, _) => {
            for (p, &(_, _, z)) in pairs.iter().enumerate() {
                marked[p] = z.as_f64() >= base;
            }
        }
        (Correction::Bonferroni, rule) => {
            let crit = match rule {
                ThresholdRule::AdjustLevel => critical_z(alpha, n)?,
                ThresholdRule::DivideCritical => base / n as f64,
            };
            for (p, &(_, _, z)) in pairs.iter().enumerate() {
                marked[p] = z.as_f64() >= crit;
            }
        }
        (Correction::Holm, ThresholdRule::AdjustLevel) => {
            let order = sorted_pairs(&pairs, true);
            for (rank, &p) in order.iter().enumerate() {
                if pairs[p].2.as_f64() < critical_z(alpha, n - rank)? {
                    break;
                }
                marked[p] = true;
            }
        }
        (Correction::Holm, ThresholdRule::DivideCritical) => {
            let order = sorted_pairs(&pairs, false);
            for (rank, &p) in order.iter().enumerate() {
                marked[p] = pairs[p].2.as_f64() >= base / (rank + 1) as f64;
            }
        }
    }

    let mut z = vec![T::zero(); k * k];
    let mut significant = vec![false; k * k];
    for (&(i, j, v), &s) in pairs.iter().zip(&marked) {
        z[i * k + j] = v;
        z[j * k + i] = v;
        significant[i * k + j] = s;
        significant[j * k + i] = s;
    }
    Ok(SignificanceMatrix {
        labels: runs.iter().map(|r| r.label.clone()).collect(),
        z,
        significant,
        alpha,
        correction,
        rule,
    })
}

/// Pair indices ordered by z (descending or ascending), ties by pair position.
fn sorted_pairs<T: Real>(pairs: &[(usize, usize, T)], descending: bool) -> Vec<usize> {
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by(|&a, &b| {
        let ord = pairs[a].2.partial_cmp(&pairs[b].2).expect("finite z");
        if descending { ord.reverse() } else { ord }.then(a.cmp(&b))
    });
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(pairs: &[(&str, f64)]) -> ScoreSet<f64> {
        pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
    }

    fn run(label: &str, eer: f64, n: usize) -> RunSummary<f64> {
        RunSummary {
            label: label.into(),
            eer,
            n_bona: n,
            n_spoof: n,
        }
    }

    #[test]
    fn fusion_fixtures() {
        let a = set(&[("t1", 1.0)]);
        let b = set(&[("t1", 3.0)]);
        assert_eq!(
            fuse_scores(&FusionSpec::uniform(vec![&a, &b])).unwrap().get("t1"),
            Some(2.0)
        );
        let w = FusionSpec::weighted(vec![&a, &b], vec![0.25, 0.75]);
        assert_eq!(fuse_scores(&w).unwrap().get("t1"), Some(2.5));
        let many = set(&[("x", 0.3), ("y", -1.7), ("z", 1e-9)]);
        assert_eq!(fuse_scores(&FusionSpec::uniform(vec![&many, &many])).unwrap(), many);
    }

    #[test]
    fn fusion_contracts() {
        let a = set(&[("t1", 1.0), ("t2", 0.0)]);
        let b = set(&[("t1", 3.0)]);
        assert!(matches!(
            fuse_scores(&FusionSpec::uniform(vec![&a, &b])),
            Err(AnalysisError::TrialSetMismatch { member: 1, .. })
        ));
        assert!(matches!(
            fuse_scores(&FusionSpec::uniform(vec![&b, &a])),
            Err(AnalysisError::TrialSetMismatch { member: 1, .. })
        ));
        assert_eq!(
            fuse_scores(&FusionSpec::weighted(vec![&a], vec![0.5, 0.5])),
            Err(AnalysisError::WeightLengthMismatch { members: 1, weights: 2 })
        );
        assert_eq!(
            fuse_scores(&FusionSpec::<f64>::uniform(vec![])),
            Err(AnalysisError::NoMembers)
        );
    }

    #[test]
    fn z_fixtures() {
        assert_eq!(z_statistic(0.05, 0.05, 1000, 9000).unwrap(), 0.0);
        // 0.04 / sqrt((0.0475 + 0.0291) * 10000 / 9e6)
        let z = z_statistic(0.05_f64, 0.03, 1000, 9000).unwrap();
        assert!((z - 4.335776241179546).abs() < 1e-12);
        assert!((z - 4.336).abs() < 1e-3);
        assert_eq!(z, z_statistic(0.03, 0.05, 1000, 9000).unwrap());
        assert!(matches!(
            z_statistic(0.0, 1.0, 10, 10),
            Err(AnalysisError::ZeroVariance { .. })
        ));
        assert!(z_statistic(1.5, 0.0, 10, 10).is_err());
    }

    #[test]
    fn critical_values() {
        assert!((critical_z(0.05, 1).unwrap() - 1.95996).abs() < 1e-4);
        assert!((critical_z(0.05, 2).unwrap() - 2.24140).abs() < 1e-4);
        let mut prev = 0.0;
        for n in 1..50 {
            let c = critical_z(0.05, n).unwrap();
            assert!(c > prev);
            prev = c;
        }
        assert!(critical_z(0.0, 1).is_err());
        assert!(critical_z(0.05, 0).is_err());
    }

    #[test]
    fn identical_runs_are_never_significant() {
        for c in [Correction::None, Correction::Bonferroni, Correction::Holm] {
            let m = significance_matrix(
                &[run("a", 0.1, 100), run("b", 0.1, 100)],
                0.05,
                c,
                ThresholdRule::default(),
            )
            .unwrap();
            assert!(m.significant.iter().all(|s| !s));
            assert!(m.z.iter().all(|&z| z == 0.0));
        }
        let perfect = [run("a", 0.0, 100), run("b", 0.0, 100)];
        let m = significance_matrix(&perfect, 0.05, Correction::Holm, ThresholdRule::default()).unwrap();
        assert_eq!(m.z_at(0, 1), 0.0);
    }

    #[test]
    fn three_run_fixture() {
        // z: (a,b) 87.458, (a,c) 89.682, (b,c) 2.1721
        // critical values at α = 0.05: 1.95996 (1 test), 2.24140 (2), 2.39398 (3)
        let runs = [run("a", 0.01, 10000), run("b", 0.30, 10000), run("c", 0.31, 10000)];
        let sig = |c| significance_matrix(&runs, 0.05, c, ThresholdRule::AdjustLevel).unwrap();
        let bonf = sig(Correction::Bonferroni);
        let holm = sig(Correction::Holm);
        assert!((bonf.z_at(1, 2) - 2.1721).abs() < 1e-4);
        for m in [&bonf, &holm, &sig(Correction::None)] {
            assert!(m.is_significant(0, 1) && m.is_significant(0, 2));
        }
        assert!(!bonf.is_significant(1, 2));
        // the step-down reaches the smallest z with the unadjusted level
        assert!(holm.is_significant(1, 2));
        let literal = significance_matrix(&runs, 0.05, Correction::Bonferroni, ThresholdRule::DivideCritical).unwrap();
        assert!(literal.is_significant(1, 2));
    }

    #[test]
    fn holm_stops_at_first_failure() {
        // one large z then two equal small ones; the first small one fails at
        // the adjusted level, so the second is not tested
        let runs = [run("a", 0.10, 1000), run("b", 0.30, 1000), run("c", 0.30, 1000)];
        let m = significance_matrix(&runs, 0.05, Correction::Holm, ThresholdRule::AdjustLevel).unwrap();
        assert!(m.is_significant(0, 1) && m.is_significant(0, 2));
        assert!(!m.is_significant(1, 2));
    }

    #[test]
    fn matrix_contracts_and_csv() {
        assert_eq!(
            significance_matrix(&[run("a", 0.1, 10)], 0.05, Correction::None, ThresholdRule::default()),
            Err(AnalysisError::TooFewRuns(1))
        );
        assert!(matches!(
            significance_matrix(
                &[run("a", 0.1, 10), run("b", 0.1, 11)],
                0.05,
                Correction::None,
                ThresholdRule::default()
            ),
            Err(AnalysisError::CountMismatch { .. })
        ));
        assert_eq!(
            significance_matrix(
                &[run("a", 0.1, 10), run("a", 0.2, 10)],
                0.05,
                Correction::None,
                ThresholdRule::default()
            ),
            Err(AnalysisError::DuplicateLabel("a".into()))
        );
        let m = significance_matrix(
            &[run("x", 0.01, 10000), run("y", 0.3, 10000)],
            0.05,
            Correction::None,
            ThresholdRule::default(),
        )
        .unwrap();
        assert_eq!(m.significance_csv(), "label,x,y\nx,0,1\ny,1,0\n");
        let z = format!("{:?}", m.z_at(0, 1));
        assert_eq!(m.z_csv(), format!("label,x,y\nx,0.0,{z}\ny,{z},0.0\n"));
    }

    fn random_runs() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec((1u32..60).prop_map(|v| f64::from(v) / 200.0), 2..7)
    }

    proptest! {
        #[test]
        fn holm_marks_a_superset_of_bonferroni(eers in random_runs(), n in 50usize..5000) {
            let runs: Vec<_> = eers.iter().enumerate().map(|(i, &e)| run(&format!("r{i}"), e, n)).collect();
            let bonf = significance_matrix(&runs, 0.05, Correction::Bonferroni, ThresholdRule::default()).unwrap();
            let holm = significance_matrix(&runs, 0.05, Correction::Holm, ThresholdRule::default()).unwrap();
            for (b, h) in bonf.significant.iter().zip(&holm.significant) {
                prop_assert!(!b || *h);
            }
        }

        #[test]
        fn matrix_is_invariant_to_run_order(eers in random_runs(), n in 50usize..5000, rot in 0usize..7) {
            let runs: Vec<_> = eers.iter().enumerate().map(|(i, &e)| run(&format!("r{i}"), e, n)).collect();
            let mut shuffled = runs.clone();
            shuffled.rotate_left(rot % runs.len());
            shuffled.reverse();
            let a = significance_matrix(&runs, 0.05, Correction::Holm, ThresholdRule::default()).unwrap();
            let b = significance_matrix(&shuffled, 0.05, Correction::Holm, ThresholdRule::default()).unwrap();
            let pos = |l: &str| b.labels.iter().position(|x| x == l).unwrap();
            for i in 0..runs.len() {
                for j in 0..runs.len() {
                    let (bi, bj) = (pos(&a.labels[i]), pos(&a.labels[j]));
                    prop_assert_eq!(a.z_at(i, j), b.z_at(bi, bj));
                    prop_assert_eq!(a.is_significant(i, j), b.is_significant(bi, bj));
                }
            }
        }

        #[test]
        fn fusion_is_linear(vals in proptest::collection::vec(-10.0f64..10.0, 1..20), w1 in -2.0f64..2.0, w2 in -2.0f64..2.0) {
            let a: ScoreSet<f64> = vals.iter().enumerate().map(|(i, &v)| (format!("t{i}"), v)).collect();
            let b: ScoreSet<f64> = vals.iter().enumerate().map(|(i, &v)| (format!("t{i}"), v * 0.5 - 1.0)).collect();
            let scale = |s: &ScoreSet<f64>, w: f64| s.iter().map(|(k, v)| (k.to_string(), w * v)).collect::<ScoreSet<f64>>();
            let (sa, sb) = (scale(&a, w1), scale(&b, w2));
            let pre = fuse_scores(&FusionSpec::weighted(vec![&sa, &sb], vec![1.0, 1.0])).unwrap();
            let post = fuse_scores(&FusionSpec::weighted(vec![&a, &b], vec![w1, w2])).unwrap();
            prop_assert_eq!(pre, post);
        }
    }
}
