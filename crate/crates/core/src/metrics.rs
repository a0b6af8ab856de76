//! Detection metrics over labeled scores: counting FRR/FAR, EER, DET curve
//! points with probit warping, and the minimum normalized t-DCF.
//!
//! Counting convention: a bona fide trial is falsely rejected when its score
//! is strictly below the threshold, a spoof trial is falsely accepted when its
//! score is at or above it. Thresholds are swept over the sorted unique pooled
//! scores plus one value above the maximum, which enumerates every achievable
//! `(FRR, FAR)` pair.

use std::fmt::Write as _;

use thiserror::Error;

use crate::io::{Key, ScoreSet, TrialEntry};
use crate::scalar::Real;

/// Result of `probit_warp_clamped` at or beyond the unit interval ends.
pub const PROBIT_CLAMP: f64 = 8.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no {0} scores")]
    EmptyClass(&'static str),
    #[error("non-finite score")]
    NonFiniteScore,
    #[error("{value} is outside the open unit interval")]
    OutOfDomain { value: f64 },
    #[error("t-DCF costs must be finite, non-negative and have C0 + min(C1, C2) > 0")]
    DegenerateCosts,
    #[error("no score for {} protocol trial(s): {}", .0.len(), .0.join(", "))]
    MissingScores(Vec<String>),
}

/// Bona fide and spoof score sets, each sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledScores<T> {
    bona: Vec<T>,
    spoof: Vec<T>,
}

impl<T: Real> LabeledScores<T> {
    pub fn new(mut bona: Vec<T>, mut spoof: Vec<T>) -> Result<Self, MetricsError> {
        if bona.is_empty() {
            return Err(MetricsError::EmptyClass("bona fide"));
        }
        if spoof.is_empty() {
            return Err(MetricsError::EmptyClass("spoof"));
        }
        if bona.iter().chain(&spoof).any(|v| !v.is_finite()) {
            return Err(MetricsError::NonFiniteScore);
        }
        let by_value = |a: &T, b: &T| a.as_f64().total_cmp(&b.as_f64());
        bona.sort_by(by_value);
        spoof.sort_by(by_value);
        Ok(Self { bona, spoof })
    }

    /// Joins scores with protocol keys by trial id. Every protocol trial must
    /// have a score; scores for trials outside the protocol are ignored.
    pub fn from_protocol(scores: &ScoreSet<T>, protocol: &[TrialEntry]) -> Result<Self, MetricsError> {
        let mut bona = Vec::new();
        let mut spoof = Vec::new();
        let mut missing = Vec::new();
        for entry in protocol {
            match scores.get(&entry.trial_id) {
                Some(s) => match entry.key {
                    Key::BonaFide => bona.push(s),
                    Key::Spoof => spoof.push(s),
                },
                None => missing.push(entry.trial_id.clone()),
            }
        }
        if !missing.is_empty() {
            return Err(MetricsError::MissingScores(missing));
        }
        Self::new(bona, spoof)
    }

    pub fn bona(&self) -> &[T] {
        &self.bona
    }

    pub fn spoof(&self) -> &[T] {
        &self.spoof
    }

    /// Sorted unique pooled scores followed by one value above the maximum.
    pub fn candidate_thresholds(&self) -> Vec<T> {
        let mut all: Vec<T> = self.bona.iter().chain(&self.spoof).copied().collect();
        all.sort_by(|a, b| a.as_f64().total_cmp(&b.as_f64()));
        all.dedup();
        let max = *all.last().expect("non-empty");
        let above = max + T::one();
        all.push(if above > max { above } else { T::infinity() });
        all
    }

    /// `(FRR, FAR)` for every candidate threshold, in increasing threshold
    /// order.
    fn sweep(&self) -> impl Iterator<Item = (T, T, T)> + '_ {
        let nb = T::from_count(self.bona.len());
        let ns = T::from_count(self.spoof.len());
        let (mut ib, mut is) = (0, 0);
        self.candidate_thresholds().into_iter().map(move |tau| {
            while ib < self.bona.len() && self.bona[ib] < tau {
                ib += 1;
            }
            while is < self.spoof.len() && self.spoof[is] < tau {
                is += 1;
            }
            let frr = T::from_count(ib) / nb;
            let far = T::from_count(self.spoof.len() - is) / ns;
            (tau, frr, far)
        })
    }
}

pub fn frr_far<T: Real>(s: &LabeledScores<T>, tau: T) -> (T, T) {
    let rejected = s.bona.partition_point(|&v| v < tau);
    let accepted = s.spoof.len() - s.spoof.partition_point(|&v| v < tau);
    (
        T::from_count(rejected) / T::from_count(s.bona.len()),
        T::from_count(accepted) / T::from_count(s.spoof.len()),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EerResult<T> {
    pub eer: T,
    pub threshold: T,
}

/// Threshold minimizing `|FRR - FAR|` (ties to the smallest) and the mean of
/// the two rates there.
pub fn eer<T: Real>(s: &LabeledScores<T>) -> EerResult<T> {
    let mut best: Option<(T, T, T)> = None;
    for (tau, frr, far) in s.sweep() {
        let gap = (frr - far).abs();
        if best.is_none_or(|(g, _, _)| gap < g) {
            best = Some((gap, tau, (frr + far) / T::lit(2.0)));
        }
    }
    let (_, threshold, eer) = best.expect("at least one candidate");
    EerResult { eer, threshold }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetPoint<T> {
    pub tau: T,
    pub frr: T,
    pub far: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetCurve<T> {
    pub points: Vec<DetPoint<T>>,
    /// `(probit(FAR), probit(FRR))` per point, clamped to ±8.
    pub warped: Vec<(f64, f64)>,
}

impl<T: Real> DetCurve<T> {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau,frr,far,probit_far,probit_frr\n");
        for (p, (wx, wy)) in self.points.iter().zip(&self.warped) {
            writeln!(
                out,
                "{:?},{:?},{:?},{wx:?},{wy:?}",
                p.tau.as_f64(),
                p.frr.as_f64(),
                p.far.as_f64()
            )
            .expect("writing to a String");
        }
        out
    }
}

/// One point per candidate threshold, dropping a point whose `(FRR, FAR)`
/// repeats the previous one.
pub fn det_points<T: Real>(s: &LabeledScores<T>) -> DetCurve<T> {
    let mut points: Vec<DetPoint<T>> = Vec::new();
    for (tau, frr, far) in s.sweep() {
        if points.last().is_some_and(|p| p.frr == frr && p.far == far) {
            continue;
        }
        points.push(DetPoint { tau, frr, far });
    }
    let warped = points
        .iter()
        .map(|p| (probit_warp_clamped(p.far.as_f64()), probit_warp_clamped(p.frr.as_f64())))
        .collect();
    DetCurve { points, warped }
}

/// Standard normal quantile, `sqrt(2) * erfinv(2x - 1)`, by Acklam's rational
/// approximation (relative error below 1.2e-9).
pub fn probit_warp(x: f64) -> Result<f64, MetricsError> {
    if !(x > 0.0 && x < 1.0) {
        return Err(MetricsError::OutOfDomain { value: x });
    }
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.38357751867269e2,
        -3.066479806614716e1,
        2.506628277459239,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e1,
        1.615858368580409e2,
        -1.556989798598866e2,
        6.680131188771972e1,
        -1.328068155288572e1,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838,
        -2.549732539343734,
        4.374664141464968,
        2.938163982698783,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-3,
        3.224671290700398e-1,
        2.445134137142996,
        3.754408661907416,
    ];
    const LOW: f64 = 0.02425;
    let tail = |q: f64| {
        let t = (-2.0 * q.ln()).sqrt();
        (((((C[0] * t + C[1]) * t + C[2]) * t + C[3]) * t + C[4]) * t + C[5])
            / ((((D[0] * t + D[1]) * t + D[2]) * t + D[3]) * t + 1.0)
    };
    let value = if x < LOW {
        tail(x)
    } else if x <= 1.0 - LOW {
        let q = x - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail(1.0 - x)
    };
    Ok(value)
}

/// `probit_warp` with the result limited to ±8, including at 0 and 1.
pub fn probit_warp_clamped(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x <= 0.0 {
        return -PROBIT_CLAMP;
    }
    if x >= 1.0 {
        return PROBIT_CLAMP;
    }
    probit_warp(x)
        .expect("inside the unit interval")
        .clamp(-PROBIT_CLAMP, PROBIT_CLAMP)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdcfCosts<T> {
    pub c0: T,
    pub c1: T,
    pub c2: T,
}

impl<T: Real> TdcfCosts<T> {
    pub fn new(c0: T, c1: T, c2: T) -> Result<Self, MetricsError> {
        let ok = |v: T| v.is_finite() && v >= T::zero();
        if !(ok(c0) && ok(c1) && ok(c2)) || !(c0 + c1.min(c2) > T::zero()) {
            return Err(MetricsError::DegenerateCosts);
        }
        Ok(Self { c0, c1, c2 })
    }

    /// Normalized cost of a system that accepts or rejects everything.
    pub fn normalizer(&self) -> T {
        self.c0 + self.c1.min(self.c2)
    }

    /// Lowest attainable value, reached at `FRR = FAR = 0`.
    pub fn floor(&self) -> T {
        self.c0 / self.normalizer()
    }

    pub fn normalized(&self, frr: T, far: T) -> T {
        (self.c0 + self.c1 * frr + self.c2 * far) / self.normalizer()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdcfResult<T> {
    pub value: T,
    pub threshold: T,
}

/// Minimum normalized t-DCF over the candidate thresholds (ties to the
/// smallest threshold).
pub fn min_tdcf<T: Real>(s: &LabeledScores<T>, costs: &TdcfCosts<T>) -> TdcfResult<T> {
    let mut best: Option<TdcfResult<T>> = None;
    for (tau, frr, far) in s.sweep() {
        let value = costs.normalized(frr, far);
        if best.as_ref().is_none_or(|b| value < b.value) {
            best = Some(TdcfResult { value, threshold: tau });
        }
    }
    best.expect("at least one candidate")
}
