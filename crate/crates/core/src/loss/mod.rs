//! Utterance-level training criteria as scalar functions with analytic
//! gradients: softmax cross-entropy, the margin-based softmax family
//! (AM- and OC-softmax as parameter sets) and MSE-for-P2SGrad.
//!
//! The margin losses and P2SGrad take the class angles `θ` as input; the
//! gradients are with respect to `θ`. Class indices are zero-based.

pub mod gradcheck;

use thiserror::Error;

use crate::scalar::{log_sum_exp, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("vector has zero length")]
    ZeroVector,
    #[error("class {class} out of range for {classes} classes")]
    ClassOutOfRange { class: usize, classes: usize },
    #[error("expected {expected} values, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("invalid margin parameters: {0}")]
    InvalidParams(String),
}

/// Loss value and its gradient with respect to the input vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad<T> {
    pub loss: T,
    pub grad: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxOutput<T> {
    pub probs: Vec<T>,
    pub loss: T,
    pub grad: Vec<T>,
}

fn check_class(y: usize, classes: usize) -> Result<(), LossError> {
    if y >= classes {
        return Err(LossError::ClassOutOfRange { class: y, classes });
    }
    Ok(())
}

/// Class weight matrix `W` (`classes x dim`, row-major) of a cosine output
/// layer.
#[derive(Debug, Clone, PartialEq)]
pub struct CosineLayer<T> {
    weights: Vec<T>,
    classes: usize,
    dim: usize,
}

impl<T: Real> CosineLayer<T> {
    pub fn new(weights: Vec<T>, classes: usize, dim: usize) -> Result<Self, LossError> {
        if weights.len() != classes * dim || classes == 0 || dim == 0 {
            return Err(LossError::LengthMismatch {
                expected: classes * dim,
                found: weights.len(),
            });
        }
        if weights.chunks_exact(dim).any(|row| row.iter().all(|v| *v == T::zero())) {
            return Err(LossError::ZeroVector);
        }
        Ok(Self { weights, classes, dim })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, k: usize) -> &[T] {
        &self.weights[k * self.dim..(k + 1) * self.dim]
    }
}

fn norm<T: Real>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

/// Angles between `h` and each class weight, `arccos` of the cosine clamped
/// to `[-1, 1]`.
pub fn cosine_angles<T: Real>(layer: &CosineLayer<T>, h: &[T]) -> Result<Vec<T>, LossError> {
    if h.len() != layer.dim {
        return Err(LossError::LengthMismatch {
            expected: layer.dim,
            found: h.len(),
        });
    }
    let hn = norm(h);
    if hn == T::zero() {
        return Err(LossError::ZeroVector);
    }
    Ok((0..layer.classes)
        .map(|k| {
            let w = layer.row(k);
            let dot: T = w.iter().zip(h).map(|(&a, &b)| a * b).sum();
            (dot / (norm(w) * hn)).max(-T::one()).min(T::one()).acos()
        })
        .collect())
}

fn softmax_from_logits<T: Real>(z: &[T]) -> (Vec<T>, T) {
    let lse = log_sum_exp(z);
    (z.iter().map(|&v| (v - lse).exp()).collect(), lse)
}

/// `-log softmax(q)_y` and its gradient `softmax(q) - onehot(y)`.
pub fn vanilla_softmax_ce<T: Real>(q: &[T], y: usize) -> Result<LossGrad<T>, LossError> {
    check_class(y, q.len())?;
    let (probs, lse) = softmax_from_logits(q);
    let grad = probs
        .iter()
        .enumerate()
        .map(|(k, &p)| if k == y { p - T::one() } else { p })
        .collect();
    Ok(LossGrad { loss: lse - q[y], grad })
}

/// `(α, m1, m2, m3)` of the general margin softmax. A single `m3` value is
/// shared by all classes.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginParams<T> {
    pub alpha: T,
    pub m1: T,
    pub m2: T,
    pub m3: Vec<T>,
}

impl<T: Real> MarginParams<T> {
    /// Reduces to softmax over cosine logits.
    pub fn vanilla() -> Self {
        Self {
            alpha: T::one(),
            m1: T::one(),
            m2: T::zero(),
            m3: vec![T::zero()],
        }
    }

    /// Additive-margin softmax.
    pub fn am(alpha: T, m3: T) -> Self {
        Self {
            alpha,
            m1: T::one(),
            m2: T::zero(),
            m3: vec![m3],
        }
    }

    /// One-class softmax: a margin per class.
    pub fn oc(alpha: T, m3: Vec<T>) -> Self {
        Self {
            alpha,
            m1: T::one(),
            m2: T::zero(),
            m3,
        }
    }

    /// `α = 20, m3 = 0.9`.
    pub fn am_default() -> Self {
        Self::am(T::lit(20.0), T::lit(0.9))
    }

    /// `α = 20, m3 = (0.9, 0.2)` for (bona fide, spoof).
    pub fn oc_default() -> Self {
        Self::oc(T::lit(20.0), vec![T::lit(0.9), T::lit(0.2)])
    }

    pub fn m3_for(&self, class: usize) -> T {
        if self.m3.len() == 1 {
            self.m3[0]
        } else {
            self.m3[class]
        }
    }

    pub fn validate(&self, classes: usize) -> Result<(), LossError> {
        if !(self.alpha > T::zero()) || !self.alpha.is_finite() {
            return Err(LossError::InvalidParams("alpha must be positive".into()));
        }
        if !self.m1.is_finite() || !self.m2.is_finite() || self.m3.iter().any(|v| !v.is_finite()) {
            return Err(LossError::InvalidParams("margins must be finite".into()));
        }
        if self.m3.len() != 1 && self.m3.len() != classes {
            return Err(LossError::LengthMismatch {
                expected: classes,
                found: self.m3.len(),
            });
        }
        Ok(())
    }

    /// Overrides fields from `key=value` lines (`alpha`, `m1`, `m2`, and `m3`
    /// as a comma-separated list). Blank lines and `#` comments are skipped.
    pub fn apply_kv(mut self, text: &str) -> Result<Self, LossError> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| LossError::InvalidParams(format!("line {}: expected key=value", idx + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let real = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map(T::lit)
                    .map_err(|_| LossError::InvalidParams(format!("line {}: bad {key} `{value}`", idx + 1)))
            };
            match key {
                "alpha" => self.alpha = real(value)?,
                "m1" => self.m1 = real(value)?,
                "m2" => self.m2 = real(value)?,
                "m3" => self.m3 = value.split(',').map(real).collect::<Result<_, _>>()?,
                other => {
                    return Err(LossError::InvalidParams(format!(
                        "line {}: unknown key `{other}`",
                        idx + 1
                    )))
                }
            }
        }
        if self.m3.is_empty() {
            return Err(LossError::InvalidParams("m3 needs at least one value".into()));
        }
        Ok(self)
    }

    pub fn to_kv(&self) -> String {
        let m3: Vec<String> = self.m3.iter().map(|v| format!("{:?}", v.as_f64())).collect();
        format!(
            "alpha={:?}\nm1={:?}\nm2={:?}\nm3={}\n",
            self.alpha.as_f64(),
            self.m1.as_f64(),
            self.m2.as_f64(),
            m3.join(",")
        )
    }
}

/// Softmax over the logits `α[cos(m1 θ_y + m2) - m3_y]` for the target class
/// and `α cos θ_i` elsewhere, with the cross-entropy loss and its gradient in
/// `θ`.
pub fn margin_softmax<T: Real>(theta: &[T], y: usize, p: &MarginParams<T>) -> Result<SoftmaxOutput<T>, LossError> {
    let classes = theta.len();
    check_class(y, classes)?;
    p.validate(classes)?;
    let logits: Vec<T> = theta
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            if k == y {
                p.alpha * ((p.m1 * t + p.m2).cos() - p.m3_for(y))
            } else {
                p.alpha * t.cos()
            }
        })
        .collect();
    let (probs, lse) = softmax_from_logits(&logits);
    let grad = theta
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            if k == y {
                (probs[k] - T::one()) * (-p.alpha * p.m1 * (p.m1 * t + p.m2).sin())
            } else {
                probs[k] * (-p.alpha * t.sin())
            }
        })
        .collect();
    Ok(SoftmaxOutput {
        loss: lse - logits[y],
        probs,
        grad,
    })
}

/// Margin softmax with one `m3` per class.
pub fn oc_softmax<T: Real>(theta: &[T], y: usize, p: &MarginParams<T>) -> Result<SoftmaxOutput<T>, LossError> {
    if p.m3.len() != theta.len() {
        return Err(LossError::LengthMismatch {
            expected: theta.len(),
            found: p.m3.len(),
        });
    }
    margin_softmax(theta, y, p)
}

/// `Σ_k (cos θ_k - 1{k = y})²` and its gradient `-2 (cos θ_k - 1{k = y}) sin θ_k`.
pub fn p2sgrad_mse<T: Real>(theta: &[T], y: usize) -> Result<LossGrad<T>, LossError> {
    check_class(y, theta.len())?;
    let two = T::lit(2.0);
    let residual = |k: usize, t: T| t.cos() - if k == y { T::one() } else { T::zero() };
    let loss = theta.iter().enumerate().map(|(k, &t)| residual(k, t).powi(2)).sum();
    let grad = theta
        .iter()
        .enumerate()
        .map(|(k, &t)| -two * residual(k, t) * t.sin())
        .collect();
    Ok(LossGrad { loss, grad })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, LN_2, PI};

    #[test]
    fn cosine_angle_fixtures() {
        let layer = CosineLayer::new(vec![1.0, 0.0, 0.0, 1.0], 2, 2).unwrap();
        let th = cosine_angles(&layer, &[3.0, 0.0]).unwrap();
        assert_eq!(th[0], 0.0);
        assert_eq!(th[1], FRAC_PI_2);
        assert_eq!(cosine_angles(&layer, &[0.0, 0.0]), Err(LossError::ZeroVector));
        assert_eq!(
            CosineLayer::new(vec![0.0, 0.0, 1.0, 1.0], 2, 2),
            Err(LossError::ZeroVector)
        );
        // a cosine that rounds above 1 is clamped instead of producing NaN
        let skew = CosineLayer::new(vec![0.1_f64, 0.2, 0.3], 1, 3).unwrap();
        let th = cosine_angles(&skew, &[0.1, 0.2, 0.3]).unwrap();
        assert!(th[0].is_finite() && th[0].abs() < 1e-7);
    }

    #[test]
    fn vanilla_fixtures() {
        let r = vanilla_softmax_ce(&[0.0, 0.0], 0).unwrap();
        assert!((r.loss - LN_2).abs() < 1e-15);
        assert_eq!(r.grad, vec![-0.5, 0.5]);
        let r = vanilla_softmax_ce(&[1000.0_f64, 0.0], 0).unwrap();
        assert!(r.loss.is_finite() && r.loss.abs() < 1e-300);
        assert!(vanilla_softmax_ce(&[0.0, 0.0], 2).is_err());
    }

    #[test]
    fn margin_fixtures() {
        let r = margin_softmax(&[0.7, 0.7], 0, &MarginParams::vanilla()).unwrap();
        assert_eq!(r.probs, vec![0.5, 0.5]);
        // target logit 20 (1 - 0.9) = 2, other logit 20 cos(π/2) ≈ 0
        let r = margin_softmax(&[0.0, FRAC_PI_2], 0, &MarginParams::am_default()).unwrap();
        let e2 = 2.0_f64.exp();
        assert!((r.probs[0] - e2 / (e2 + 1.0)).abs() < 1e-12);
        assert!((r.probs[0] - 0.88080).abs() < 1e-5);
    }

    #[test]
    fn oc_requires_per_class_margins() {
        assert!(oc_softmax(&[0.3, 1.0], 0, &MarginParams::am_default()).is_err());
        let th = [0.3, 1.9, 1.0];
        let per_class = MarginParams::oc(20.0, vec![0.4; 3]);
        let scalar = MarginParams::am(20.0, 0.4);
        for y in 0..3 {
            assert_eq!(
                oc_softmax(&th, y, &per_class).unwrap(),
                margin_softmax(&th, y, &scalar).unwrap()
            );
        }
    }

    #[test]
    fn margin_params_kv_round_trip() {
        let oc = MarginParams::<f64>::oc_default();
        assert_eq!(oc.alpha, 20.0);
        assert_eq!(oc.m3, vec![0.9, 0.2]);
        let back = MarginParams::<f64>::vanilla().apply_kv(&oc.to_kv()).unwrap();
        assert_eq!(back, oc);
        let am = MarginParams::<f64>::vanilla()
            .apply_kv("alpha=20\nm1=0 # as printed\nm3=0.9\n")
            .unwrap();
        assert_eq!(am.m1, 0.0);
        assert!(MarginParams::<f64>::vanilla().apply_kv("gamma=1").is_err());
        assert!(MarginParams::<f64>::vanilla().apply_kv("m3=0.9,x").is_err());
        assert!(MarginParams::<f64>::vanilla()
            .apply_kv("alpha=-1")
            .unwrap()
            .validate(2)
            .is_err());
    }

    #[test]
    fn p2sgrad_fixtures() {
        let r = p2sgrad_mse(&[0.0, FRAC_PI_2, PI / 2.0], 0).unwrap();
        assert!(r.loss < 1e-30);
        let r = p2sgrad_mse(&[FRAC_PI_2, FRAC_PI_2], 0).unwrap();
        assert!((r.loss - 1.0).abs() < 1e-15);
    }

    #[test]
    fn works_in_single_precision() {
        let r = margin_softmax(&[0.2_f32, 1.4], 1, &MarginParams::oc_default()).unwrap();
        assert!((r.probs.iter().sum::<f32>() - 1.0).abs() < 1e-6);
    }

    fn angles() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(1e-3..PI - 1e-3, 2..8)
    }

    proptest! {
        #[test]
        fn probabilities_form_a_distribution(
            th in angles(), alpha in 0.5f64..30.0, m1 in 1.0f64..3.0, m2 in 0.0f64..0.5, m3 in 0.0f64..1.0, pick in 0usize..8
        ) {
            let y = pick % th.len();
            let r = margin_softmax(&th, y, &MarginParams { alpha, m1, m2, m3: vec![m3] }).unwrap();
            prop_assert!((r.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(r.probs.iter().all(|p| (0.0..=1.0).contains(p)));
        }

        #[test]
        fn margin_free_config_is_vanilla(th in angles(), pick in 0usize..8) {
            let y = pick % th.len();
            let m = margin_softmax(&th, y, &MarginParams::vanilla()).unwrap();
            let cos: Vec<f64> = th.iter().map(|t| t.cos()).collect();
            let v = vanilla_softmax_ce(&cos, y).unwrap();
            prop_assert!((m.loss - v.loss).abs() < 1e-12);
        }

        #[test]
        fn angular_margin_decision_boundary(t1 in 1e-3..3.0 * PI / 4.0, t2 in 1e-3..3.0 * PI / 4.0, m2 in 1e-3..PI / 4.0) {
            let p = MarginParams { alpha: 1.0, m1: 1.0, m2, m3: vec![0.0] };
            let lhs = (t1 + m2).cos();
            let rhs = t2.cos();
            prop_assume!((lhs - rhs).abs() > 1e-12);
            let r = margin_softmax(&[t1, t2], 0, &p).unwrap();
            prop_assert_eq!(r.probs[0] > 0.5, lhs > rhs);
        }

        #[test]
        fn p2sgrad_loss_range(th in angles(), pick in 0usize..8) {
            let y = pick % th.len();
            let r = p2sgrad_mse(&th, y).unwrap();
            prop_assert!(r.loss > 0.0 && r.loss <= 4.0 * th.len() as f64);
        }
    }
}
