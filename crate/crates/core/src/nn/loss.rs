use super::{NnError, Scalar, Tensor};

/// Softmax cross-entropy averaged over rows whose target is not `ignore`.
///
/// Returns the loss and its gradient with respect to the logits: softmax
/// minus one-hot scaled by `1/kept`, exactly zero at ignored rows. When all
/// rows are ignored the loss is zero with a zero gradient.
pub fn softmax_cross_entropy<T: Scalar>(
    logits: &Tensor<T>,
    targets: &[u16],
    ignore: u16,
) -> Result<(T, Tensor<T>), NnError> {
    let (m, v) = logits.dims2();
    if targets.len() != m {
        return Err(NnError::ShapeMismatch {
            op: "softmax_cross_entropy",
            detail: format!("{m} logit rows vs {} targets", targets.len()),
        });
    }
    for &t in targets {
        if t != ignore && (t as usize) >= v {
            return Err(NnError::TokenOutOfVocab { id: t, vocab: v });
        }
    }
    let kept = targets.iter().filter(|&&t| t != ignore).count();
    let mut grad = Tensor::zeros(m, v);
    let mut total = T::zero();
    let inv_kept = if kept > 0 {
        T::one() / T::from_count(kept)
    } else {
        T::zero()
    };
    for i in 0..m {
        if targets[i] == ignore {
            continue;
        }
        let row = logits.row_slice(i);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for &x in row {
            sum += (x - max).exp();
        }
        let lse = max + sum.ln();
        total += lse - row[targets[i] as usize];
        for j in 0..v {
            let p = (row[j] - max).exp() / sum;
            let indicator = if j == targets[i] as usize {
                T::one()
            } else {
                T::zero()
            };
            grad.set(i, j, (p - indicator) * inv_kept);
        }
    }
    let loss = if kept == 0 { T::zero() } else { total * inv_kept };
    Ok((loss, grad))
}
