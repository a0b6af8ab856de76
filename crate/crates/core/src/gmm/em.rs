//! Maximum-likelihood EM for diagonal GMMs, grown by binary splitting from the
//! global Gaussian.
//!
//! The E-step runs over fixed-size frame chunks in parallel; chunk
//! accumulators are always reduced in chunk order, so results are
//! bit-identical for any thread count.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::io::FeatureMatrix;
use crate::scalar::{log_sum_exp, Real};

use super::{Gmm, GmmError};

const CHUNK_FRAMES: usize = 512;
const SPLIT_OFFSET: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct EmOptions<T> {
    /// EM iterations per splitting stage.
    pub max_iters: usize,
    /// Stop a stage once one iteration gains less than this fraction of the
    /// stage's total gain in average log-likelihood.
    pub rel_tol: T,
    /// Seeds the sign pattern of each mean split.
    pub seed: u64,
    /// Variance floor as a fraction of the global per-dimension variance.
    pub var_floor_factor: T,
}

impl<T: Real> Default for EmOptions<T> {
    fn default() -> Self {
        Self {
            max_iters: 100,
            rel_tol: T::lit(1e-5),
            seed: 0,
            var_floor_factor: T::lit(1e-3),
        }
    }
}

/// Average per-frame log-likelihood after each EM iteration, grouped by
/// splitting stage. Entry `i` of a stage is the likelihood of the parameters
/// the stage held before its `i`-th M-step; the last entry belongs to the
/// parameters the stage ended with.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmTrace<T> {
    pub stages: Vec<StageTrace<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageTrace<T> {
    pub components: usize,
    pub avg_log_likelihood: Vec<T>,
}

struct Accumulator<T> {
    log_likelihood: T,
    occupancy: Vec<T>,
    first: Vec<T>,
    second: Vec<T>,
}

impl<T: Real> Accumulator<T> {
    fn zeros(m: usize, d: usize) -> Self {
        Self {
            log_likelihood: T::zero(),
            occupancy: vec![T::zero(); m],
            first: vec![T::zero(); m * d],
            second: vec![T::zero(); m * d],
        }
    }

    fn add(&mut self, other: &Self) {
        self.log_likelihood = self.log_likelihood + other.log_likelihood;
        for (a, &b) in self.occupancy.iter_mut().zip(&other.occupancy) {
            *a = *a + b;
        }
        for (a, &b) in self.first.iter_mut().zip(&other.first) {
            *a = *a + b;
        }
        for (a, &b) in self.second.iter_mut().zip(&other.second) {
            *a = *a + b;
        }
    }
}

/// Sufficient statistics centered on the current means, which keeps the
/// variance update free of large cancellations.
fn e_step<T: Real>(gmm: &Gmm<T>, frames: &FeatureMatrix<T>) -> Accumulator<T> {
    let m = gmm.n_components();
    let d = gmm.dim();
    let log_norm = gmm.log_normalizers();
    let partials: Vec<Accumulator<T>> = frames
        .data()
        .par_chunks(CHUNK_FRAMES * d)
        .map(|chunk| {
            let mut acc = Accumulator::zeros(m, d);
            let mut post = vec![T::zero(); m];
            for frame in chunk.chunks_exact(d) {
                gmm.component_log_densities(&log_norm, frame, &mut post);
                let total = log_sum_exp(&post);
                acc.log_likelihood = acc.log_likelihood + total;
                for (c, p) in post.iter_mut().enumerate() {
                    let gamma = (*p - total).exp();
                    *p = gamma;
                    if gamma == T::zero() {
                        continue;
                    }
                    acc.occupancy[c] = acc.occupancy[c] + gamma;
                    let mu = gmm.mean(c);
                    for k in 0..d {
                        let diff = frame[k] - mu[k];
                        let g = gamma * diff;
                        acc.first[c * d + k] = acc.first[c * d + k] + g;
                        acc.second[c * d + k] = acc.second[c * d + k] + g * diff;
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = Accumulator::zeros(m, d);
    for p in &partials {
        total.add(p);
    }
    total
}

fn m_step<T: Real>(gmm: &Gmm<T>, acc: &Accumulator<T>, n_frames: usize, floor: &[T]) -> Gmm<T> {
    let m = gmm.n_components();
    let d = gmm.dim();
    let n = T::from_count(n_frames);
    let mut weights = Vec::with_capacity(m);
    let mut means = gmm.means.clone();
    let mut variances = gmm.variances.clone();
    for c in 0..m {
        let occ = acc.occupancy[c];
        weights.push(occ / n);
        if !(occ > T::zero()) {
            continue;
        }
        for k in 0..d {
            let shift = acc.first[c * d + k] / occ;
            means[c * d + k] = gmm.means[c * d + k] + shift;
            let var = acc.second[c * d + k] / occ - shift * shift;
            variances[c * d + k] = if var > floor[k] { var } else { floor[k] };
        }
    }
    let total: T = weights.iter().copied().sum();
    for w in &mut weights {
        *w = *w / total;
    }
    Gmm {
        dim: d,
        weights,
        means,
        variances,
        label: gmm.label.clone(),
    }
}

fn global_gaussian<T: Real>(frames: &FeatureMatrix<T>, factor: T) -> Result<(Gmm<T>, Vec<T>), GmmError> {
    let d = frames.cols();
    let n = T::from_count(frames.rows());
    let mut mean = vec![T::zero(); d];
    for row in frames.iter_rows() {
        for (m, &x) in mean.iter_mut().zip(row) {
            *m = *m + x;
        }
    }
    for m in &mut mean {
        *m = *m / n;
    }
    let mut var = vec![T::zero(); d];
    for row in frames.iter_rows() {
        for k in 0..d {
            let diff = row[k] - mean[k];
            var[k] = var[k] + diff * diff;
        }
    }
    for v in &mut var {
        *v = *v / n;
    }
    let positive: Vec<T> = var.iter().copied().filter(|&v| v > T::zero()).collect();
    if positive.is_empty() {
        return Err(GmmError::DegenerateData);
    }
    // dimensions with no spread borrow the average positive variance for their floor
    let fallback = positive.iter().copied().sum::<T>() / T::from_count(positive.len());
    let floor: Vec<T> = var
        .iter()
        .map(|&v| factor * if v > T::zero() { v } else { fallback })
        .collect();
    let variances = var
        .iter()
        .zip(&floor)
        .map(|(&v, &f)| if v > f { v } else { f })
        .collect();
    let gmm = Gmm {
        dim: d,
        weights: vec![T::one()],
        means: mean,
        variances,
        label: None,
    };
    Ok((gmm, floor))
}

/// Splits the `count` heaviest components (ties broken by index) into pairs
/// offset by `±0.1 σ` along a seeded sign pattern.
fn split<T: Real>(gmm: &Gmm<T>, count: usize, rng: &mut ChaCha8Rng) -> Gmm<T> {
    let d = gmm.dim();
    let mut order: Vec<usize> = (0..gmm.n_components()).collect();
    order.sort_by(|&a, &b| {
        gmm.weights[b]
            .partial_cmp(&gmm.weights[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut out = gmm.clone();
    let offset = T::lit(SPLIT_OFFSET);
    let half = T::lit(0.5);
    for &c in order.iter().take(count) {
        let sigma: Vec<T> = gmm.variance(c).iter().map(|v| v.sqrt()).collect();
        let signs: Vec<T> = (0..d)
            .map(|_| if rng.gen::<bool>() { T::one() } else { -T::one() })
            .collect();
        let w = out.weights[c] * half;
        out.weights[c] = w;
        out.weights.push(w);
        let mut twin = Vec::with_capacity(d);
        for k in 0..d {
            let delta = offset * sigma[k] * signs[k];
            twin.push(gmm.means[c * d + k] - delta);
            out.means[c * d + k] = gmm.means[c * d + k] + delta;
        }
        out.means.extend(twin);
        out.variances.extend_from_slice(gmm.variance(c));
    }
    out
}

fn run_stage<T: Real>(
    mut gmm: Gmm<T>,
    frames: &FeatureMatrix<T>,
    floor: &[T],
    opts: &EmOptions<T>,
) -> (Gmm<T>, StageTrace<T>) {
    let n = frames.rows();
    let n_t = T::from_count(n);
    let mut history = Vec::new();
    let mut converged = false;
    for _ in 0..opts.max_iters {
        let acc = e_step(&gmm, frames);
        let avg = acc.log_likelihood / n_t;
        if let (Some(&first), Some(&prev)) = (history.first(), history.last()) {
            // improvement relative to what the stage has gained so far; right
            // after a split the first steps are tiny next to |LL|
            let gain = avg - prev;
            history.push(avg);
            if gain <= opts.rel_tol * (avg - first) {
                converged = true;
                break;
            }
        } else {
            history.push(avg);
        }
        gmm = m_step(&gmm, &acc, n, floor);
    }
    if !converged {
        let acc = e_step(&gmm, frames);
        history.push(acc.log_likelihood / n_t);
    }
    let trace = StageTrace {
        components: gmm.n_components(),
        avg_log_likelihood: history,
    };
    (gmm, trace)
}

/// Trains an `n_components` mixture and records the likelihood trajectory.
pub fn em_fit_traced<T: Real>(
    frames: &FeatureMatrix<T>,
    n_components: usize,
    opts: &EmOptions<T>,
) -> Result<(Gmm<T>, EmTrace<T>), GmmError> {
    if n_components == 0 {
        return Err(GmmError::InvalidModel("at least one component is required".into()));
    }
    if frames.rows() < n_components {
        return Err(GmmError::TooFewFrames {
            frames: frames.rows(),
            components: n_components,
        });
    }
    let (mut gmm, floor) = global_gaussian(frames, opts.var_floor_factor)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut trace = EmTrace::default();
    loop {
        let (fitted, stage) = run_stage(gmm, frames, &floor, opts);
        gmm = fitted;
        trace.stages.push(stage);
        let have = gmm.n_components();
        if have >= n_components {
            break;
        }
        gmm = split(&gmm, have.min(n_components - have), &mut rng);
    }
    Ok((gmm, trace))
}

/// Maximum-likelihood mixture of `n_components` diagonal Gaussians.
pub fn em_fit<T: Real>(
    frames: &FeatureMatrix<T>,
    n_components: usize,
    opts: &EmOptions<T>,
) -> Result<Gmm<T>, GmmError> {
    em_fit_traced(frames, n_components, opts).map(|(g, _)| g)
}
