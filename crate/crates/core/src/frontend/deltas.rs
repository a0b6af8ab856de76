use crate::io::{FeatureMatrix, TrialIoError};
use crate::scalar::Real;

const DELTA_WINDOW: usize = 2;

/// Regression deltas over a ±2 frame window with edge replication:
/// `Δa_n = Σ_k k (a_{n+k} - a_{n-k}) / (2 Σ_k k²)`.
pub fn delta_rows<T: Real>(rows: usize, cols: usize, data: &[T]) -> Vec<T> {
    let denom = T::lit(2.0) * T::from_count((1..=DELTA_WINDOW).map(|k| k * k).sum());
    let last = rows - 1;
    let mut out = vec![T::zero(); rows * cols];
    for n in 0..rows {
        for k in 1..=DELTA_WINDOW {
            let ahead = (n + k).min(last);
            let behind = n.saturating_sub(k);
            let weight = T::from_count(k);
            for d in 0..cols {
                out[n * cols + d] = out[n * cols + d] + weight * (data[ahead * cols + d] - data[behind * cols + d]);
            }
        }
        for v in &mut out[n * cols..(n + 1) * cols] {
            *v = *v / denom;
        }
    }
    out
}

/// Returns `[static | Δ | Δ²]`, tripling the column count.
pub fn append_deltas<T: Real>(m: &FeatureMatrix<T>) -> Result<FeatureMatrix<T>, TrialIoError> {
    let (rows, cols) = (m.rows(), m.cols());
    let d1 = delta_rows(rows, cols, m.data());
    let d2 = delta_rows(rows, cols, &d1);
    let mut data = Vec::with_capacity(rows * cols * 3);
    for n in 0..rows {
        let span = n * cols..(n + 1) * cols;
        data.extend_from_slice(&m.data()[span.clone()]);
        data.extend_from_slice(&d1[span.clone()]);
        data.extend_from_slice(&d2[span]);
    }
    FeatureMatrix::new(rows, cols * 3, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_rows_have_zero_deltas() {
        let m = FeatureMatrix::new(5, 2, [3.0_f64, -1.0].repeat(5)).unwrap();
        let out = append_deltas(&m).unwrap();
        assert_eq!(out.cols(), 6);
        for row in out.iter_rows() {
            assert_eq!(&row[..2], &[3.0, -1.0]);
            assert!(row[2..].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn ramp_has_unit_interior_delta() {
        // hand evaluation: (1*(n+1 - (n-1)) + 2*(n+2 - (n-2))) / 10 = (2 + 8) / 10
        let m = FeatureMatrix::new(10, 1, (0..10).map(f64::from).collect()).unwrap();
        let out = append_deltas(&m).unwrap();
        for n in 2..8 {
            assert!((out.get(n, 1) - 1.0).abs() < 1e-15);
        }
        // edge replication: frame 0 sees a_{-1} = a_{-2} = 0, so (1*1 + 2*2) / 10
        assert!((out.get(0, 1) - 0.5).abs() < 1e-15);
        assert!((out.get(9, 1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn single_frame_has_zero_deltas() {
        let m = FeatureMatrix::new(1, 3, vec![1.0_f64, 2.0, 3.0]).unwrap();
        let out = append_deltas(&m).unwrap();
        assert_eq!(out.data(), &[1.0, 2.0, 3.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }
}
