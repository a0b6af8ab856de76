//! Central finite-difference checks of the analytic loss gradients.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{margin_softmax, oc_softmax, p2sgrad_mse, vanilla_softmax_ce, MarginParams};

pub const DEFAULT_STEP: f64 = 1e-6;
/// Angles are drawn this far from 0 and π, where `sin θ` vanishes.
pub const ANGLE_MARGIN: f64 = 1e-3;

/// `(f(x + h e_i) - f(x - h e_i)) / 2h` for every coordinate.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + step;
            let up = f(&probe);
            probe[i] = x[i] - step;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// `|a - n| / max(1, |a|, |n|)`: relative for large gradients, absolute near
/// zero.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / 1f64.max(analytic.abs()).max(numeric.abs())
}

/// Largest per-coordinate error between an analytic gradient and the finite
/// difference of `f` at `x`.
pub fn max_gradient_error(f: impl Fn(&[f64]) -> f64, analytic: &[f64], x: &[f64], step: f64) -> f64 {
    central_difference(f, x, step)
        .into_iter()
        .zip(analytic)
        .map(|(n, &a)| relative_error(a, n))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub name: &'static str,
    pub cases: usize,
    pub max_rel_error: f64,
}

impl GradCheckReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.max_rel_error < tol
    }
}

fn random_angles(rng: &mut ChaCha8Rng, classes: usize) -> Vec<f64> {
    (0..classes)
        .map(|_| rng.gen_range(ANGLE_MARGIN..PI - ANGLE_MARGIN))
        .collect()
}

fn check_margin(
    name: &'static str,
    cases: usize,
    rng: &mut ChaCha8Rng,
    mut draw: impl FnMut(&mut ChaCha8Rng) -> (MarginParams<f64>, usize),
    oc: bool,
    step: f64,
) -> GradCheckReport {
    let mut worst = 0.0_f64;
    for _ in 0..cases {
        let (params, classes) = draw(rng);
        let theta = random_angles(rng, classes);
        let y = rng.gen_range(0..classes);
        let eval = |t: &[f64]| {
            if oc {
                oc_softmax(t, y, &params)
            } else {
                margin_softmax(t, y, &params)
            }
            .expect("valid margin configuration")
        };
        let analytic = eval(&theta).grad;
        worst = worst.max(max_gradient_error(|t| eval(t).loss, &analytic, &theta, step));
    }
    GradCheckReport {
        name,
        cases,
        max_rel_error: worst,
    }
}

/// Checks every loss on `cases` random inputs each: vanilla cross-entropy,
/// the general margin softmax with `m1 ∈ {1, 2}`, the AM and OC presets and
/// MSE-for-P2SGrad.
pub fn run_suite(cases: usize, seed: u64, step: f64) -> Vec<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reports = Vec::new();

    let mut worst = 0.0_f64;
    for _ in 0..cases {
        let classes = rng.gen_range(2..=10);
        let q: Vec<f64> = (0..classes).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let y = rng.gen_range(0..classes);
        let analytic = vanilla_softmax_ce(&q, y).expect("class in range").grad;
        let f = |x: &[f64]| vanilla_softmax_ce(x, y).expect("class in range").loss;
        worst = worst.max(max_gradient_error(f, &analytic, &q, step));
    }
    reports.push(GradCheckReport {
        name: "vanilla-ce",
        cases,
        max_rel_error: worst,
    });

    reports.push(check_margin(
        "margin-softmax",
        cases,
        &mut rng,
        |r| {
            let params = MarginParams {
                alpha: r.gen_range(1.0..30.0),
                m1: if r.gen::<bool>() { 1.0 } else { 2.0 },
                m2: r.gen_range(0.0..0.5),
                m3: vec![r.gen_range(0.0..1.0)],
            };
            (params, r.gen_range(2..=6))
        },
        false,
        step,
    ));
    reports.push(check_margin(
        "am-softmax",
        cases,
        &mut rng,
        |r| (MarginParams::am_default(), r.gen_range(2..=6)),
        false,
        step,
    ));
    reports.push(check_margin(
        "oc-softmax",
        cases,
        &mut rng,
        |_| (MarginParams::oc_default(), 2),
        true,
        step,
    ));

    let mut worst = 0.0_f64;
    for _ in 0..cases {
        let classes = rng.gen_range(2..=10);
        let theta = random_angles(&mut rng, classes);
        let y = rng.gen_range(0..classes);
        let analytic = p2sgrad_mse(&theta, y).expect("class in range").grad;
        let f = |t: &[f64]| p2sgrad_mse(t, y).expect("class in range").loss;
        worst = worst.max(max_gradient_error(f, &analytic, &theta, step));
    }
    reports.push(GradCheckReport {
        name: "p2sgrad-mse",
        cases,
        max_rel_error: worst,
    });

    reports
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn central_difference_of_a_cubic() {
        let g = central_difference(|x| x[0].powi(3) + 2.0 * x[1], &[2.0, 5.0], 1e-6);
        assert!((g[0] - 12.0).abs() < 1e-6);
        assert!((g[1] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn relative_error_switches_to_absolute_near_zero() {
        assert_eq!(relative_error(1e-9, 0.0), 1e-9);
        assert_eq!(relative_error(200.0, 202.0), 2.0 / 202.0);
    }

    #[test]
    fn detects_a_wrong_gradient() {
        let theta = [0.4, 1.3];
        let wrong = [0.0, 0.0];
        let err = max_gradient_error(|t| p2sgrad_mse(t, 0).unwrap().loss, &wrong, &theta, DEFAULT_STEP);
        assert!(err > 1e-2);
    }

    #[test]
    fn suite_passes_and_is_seeded() {
        let a = run_suite(20, 3, DEFAULT_STEP);
        assert_eq!(a.len(), 5);
        assert!(a.iter().all(|r| r.passed(1e-6)), "{a:?}");
        assert_eq!(a, run_suite(20, 3, DEFAULT_STEP));
    }
}
