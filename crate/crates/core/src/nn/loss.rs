use crate::error::{Error, Result};
use crate::nn::{Real, Tensor};

/// Mean squared error over every element, with its gradient `2(p − t)/N`.
pub fn mse_and_grad<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(T, Tensor<T>)> {
    if pred.shape() != target.shape() {
        return Err(Error::dim(
            "mse_and_grad",
            format!("{:?}", pred.shape()),
            format!("{:?}", target.shape()),
        ));
    }
    let n = pred.len();
    if n == 0 {
        return Ok((T::zero(), pred.clone()));
    }
    let inv = T::one() / T::of(n as f64);
    let two = T::of(2.0);
    let mut loss = T::zero();
    let mut grad = pred.clone();
    for (g, &t) in grad.data_mut().iter_mut().zip(target.data()) {
        let d = *g - t;
        loss += d * d;
        *g = two * d * inv;
    }
    Ok((loss * inv, grad))
}

/// Mean softmax cross-entropy of `logits: [n, classes]` against class labels,
/// with the gradient with respect to the logits.
pub fn softmax_cross_entropy<T: Real>(logits: &Tensor<T>, labels: &[usize]) -> Result<(T, Tensor<T>)> {
    let (n, c) = (logits.rows(), logits.cols());
    if labels.len() != n {
        return Err(Error::dim("softmax_cross_entropy", n, labels.len()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::dim("softmax_cross_entropy", format!("label < {c}"), bad));
    }
    let inv = T::one() / T::of(n.max(1) as f64);
    let mut loss = T::zero();
    let mut grad = Tensor::zeros(vec![n, c]);
    for (r, &label) in labels.iter().enumerate() {
        let row = logits.row(r);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let exps: Vec<T> = row.iter().map(|&z| (z - max).exp()).collect();
        let sum: T = exps.iter().copied().sum();
        loss += sum.ln() - (row[label] - max);
        for (g, e) in grad.row_mut(r).iter_mut().zip(&exps) {
            *g = *e / sum * inv;
        }
        grad.row_mut(r)[label] -= inv;
    }
    Ok((loss * inv, grad))
}
