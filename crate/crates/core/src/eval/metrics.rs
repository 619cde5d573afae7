use super::MetricError;

/// Root mean squared error.
pub fn rmse(preds: &[f64], targets: &[f64]) -> Result<f64, MetricError> {
    if preds.is_empty() {
        return Err(MetricError::Empty);
    }
    if preds.len() != targets.len() {
        return Err(MetricError::LengthMismatch {
            a: preds.len(),
            b: targets.len(),
        });
    }
    let mse = preds
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / preds.len() as f64;
    Ok(mse.sqrt())
}

/// Ranks with average ranks for ties (1-based).
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j + 1) as f64 / 2.0; // mean of ranks i+1 ..= j
        for &idx in &order[i..j] {
            ranks[idx] = avg;
        }
        i = j;
    }
    ranks
}

/// Area under the ROC curve via the rank statistic; tied scores contribute
/// half credit, matching the pairwise "probability a positive outranks a
/// negative" definition. Errors when only one class is present.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64, MetricError> {
    if scores.is_empty() {
        return Err(MetricError::Empty);
    }
    if scores.len() != labels.len() {
        return Err(MetricError::LengthMismatch {
            a: scores.len(),
            b: labels.len(),
        });
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricError::SingleClass);
    }
    let ranks = average_ranks(scores);
    let rank_sum_pos: f64 = ranks
        .iter()
        .zip(labels)
        .filter(|&(_, &l)| l)
        .map(|(r, _)| r)
        .sum();
    let n_pos_f = n_pos as f64;
    Ok((rank_sum_pos - n_pos_f * (n_pos_f + 1.0) / 2.0) / (n_pos_f * n_neg as f64))
}

/// Average precision: the step-wise integral of precision over recall,
/// thresholded at each distinct score. Errors when only one class is present.
pub fn prc_auc(scores: &[f64], labels: &[bool]) -> Result<f64, MetricError> {
    if scores.is_empty() {
        return Err(MetricError::Empty);
    }
    if scores.len() != labels.len() {
        return Err(MetricError::LengthMismatch {
            a: scores.len(),
            b: labels.len(),
        });
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos == 0 || n_pos == labels.len() {
        return Err(MetricError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut ap = 0.0;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut last_recall = 0.0;
    let mut i = 0;
    while i < order.len() {
        // Consume the whole tied-score group before measuring.
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] {
                tp += 1;
            } else {
                fp += 1;
            }
            j += 1;
        }
        let recall = tp as f64 / n_pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        ap += (recall - last_recall) * precision;
        last_recall = recall;
        i = j;
    }
    Ok(ap)
}

/// Unweighted mean over tasks whose metric is defined; `None` entries are
/// skipped. Errors when every task is undefined.
pub fn multi_task_average(values: &[Option<f64>]) -> Result<f64, MetricError> {
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    if defined.is_empty() {
        return Err(MetricError::AllUndefined);
    }
    Ok(defined.iter().sum::<f64>() / defined.len() as f64)
}
