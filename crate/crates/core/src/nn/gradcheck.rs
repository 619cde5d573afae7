//! Finite-difference gradient checking. Central differences at 64-bit with a
//! caller-chosen step; comparisons use relative error floored at magnitude 1,
//! `|a - b| <= tol * max(1, |a|, |b|)`.

use super::Tensor;

/// Default central-difference step.
pub const DEFAULT_STEP: f64 = 1e-5;

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Central finite differences of `f` at `x`, for the given flat indices.
pub fn finite_difference<F>(x: &Tensor<f64>, indices: &[usize], step: f64, mut f: F) -> Vec<f64>
where
    F: FnMut(&Tensor<f64>) -> f64,
{
    let mut result = Vec::with_capacity(indices.len());
    let mut probe = x.clone();
    for &i in indices {
        let original = probe.data()[i];
        probe.data_mut()[i] = original + step;
        let plus = f(&probe);
        probe.data_mut()[i] = original - step;
        let minus = f(&probe);
        probe.data_mut()[i] = original;
        result.push((plus - minus) / (2.0 * step));
    }
    result
}

/// Compares an analytic gradient against central differences of `f` at `x`
/// on the given flat indices. Returns the first mismatch as an error string.
pub fn check_gradient<F>(
    x: &Tensor<f64>,
    grad: &Tensor<f64>,
    indices: &[usize],
    step: f64,
    tol: f64,
    f: F,
) -> Result<(), String>
where
    F: FnMut(&Tensor<f64>) -> f64,
{
    let numeric = finite_difference(x, indices, step, f);
    for (&i, &fd) in indices.iter().zip(&numeric) {
        let ad = grad.data()[i];
        if !rel_close(ad, fd, tol) {
            return Err(format!(
                "gradient mismatch at flat index {i}: analytic {ad:.9e}, finite-difference {fd:.9e}"
            ));
        }
    }
    Ok(())
}

/// Deterministic spread of `count` probe indices over a tensor of `len`
/// values (all indices when `len <= count`).
pub fn probe_indices(len: usize, count: usize) -> Vec<usize> {
    if len <= count {
        return (0..len).collect();
    }
    (0..count).map(|k| k * len / count).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_difference_of_square_sum() {
        // f(x) = sum(x^2) has gradient 2x.
        let x = Tensor::row(vec![1.0, -2.0, 0.5]);
        let indices = [0, 1, 2];
        let fd = finite_difference(&x, &indices, 1e-5, |t| {
            t.data().iter().map(|v| v * v).sum()
        });
        for (i, g) in fd.iter().enumerate() {
            assert!(rel_close(*g, 2.0 * x.data()[i], 1e-6));
        }
    }

    #[test]
    fn probe_indices_cover_and_dedup() {
        assert_eq!(probe_indices(3, 10), vec![0, 1, 2]);
        let idx = probe_indices(1000, 10);
        assert_eq!(idx.len(), 10);
        assert!(idx.windows(2).all(|w| w[0] < w[1]));
        assert!(*idx.last().unwrap() < 1000);
    }
}
