use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn check<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<(usize, usize)> {
    let (n, c) = match *logits.shape() {
        [n, c] => (n, c),
        _ => return Err(Error::usage("logits must be (N, classes)")),
    };
    if labels.len() != n {
        return Err(Error::usage(format!("{} labels for {n} logit rows", labels.len())));
    }
    if let Some(bad) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::usage(format!("label {bad} out of range for {c} classes")));
    }
    Ok((n, c))
}

fn log_softmax_row<T: Scalar>(row: &[T]) -> Vec<T> {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let log_sum = row.iter().map(|&v| (v - max).exp()).sum::<T>().ln();
    row.iter().map(|&v| v - max - log_sum).collect()
}

/// `−log softmax(logits)[label]` for every row.
pub fn cross_entropy_per_item<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<Vec<T>> {
    let (n, _) = check(logits, labels)?;
    Ok((0..n).map(|i| -log_softmax_row(logits.item(i))[labels[i]]).collect())
}

/// Mean cross-entropy over the batch and its gradient `(softmax − onehot)/N`.
pub fn softmax_cross_entropy<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<(T, Tensor<T>)> {
    let (n, c) = check(logits, labels)?;
    if n == 0 {
        return Err(Error::usage("empty batch"));
    }
    let nf = T::lit(n as f64);
    let mut loss = T::zero();
    let mut grad = Vec::with_capacity(n * c);
    for (i, &label) in labels.iter().enumerate() {
        let ls = log_softmax_row(logits.item(i));
        loss -= ls[label];
        for (k, l) in ls.into_iter().enumerate() {
            let onehot = if k == label { T::one() } else { T::zero() };
            grad.push((l.exp() - onehot) / nf);
        }
    }
    Ok((loss / nf, Tensor::new(vec![n, c], grad)?))
}

/// Index of the largest score per row, first one on ties.
pub fn predictions<T: Scalar>(logits: &Tensor<T>) -> Vec<usize> {
    (0..logits.batch())
        .map(|i| {
            let row = logits.item(i);
            let mut best = 0;
            for (k, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}
