use crate::error::Result;
use crate::tensor::{Element, Tensor};

/// Mean squared error over every element and its gradient with respect to `pred`.
///
/// With equally sized samples the per-element mean equals the per-sample
/// mean averaged over the batch.
pub fn mse_loss<T: Element>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(T, Tensor<T>)> {
    pred.ensure_same_dims(target, "mse operands")?;
    let n = T::from_f64(pred.len() as f64);
    let two = T::from_f64(2.0);
    let mut sum = T::zero();
    let grad: Vec<T> = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| {
            let d = p - t;
            sum += d * d;
            two * d / n
        })
        .collect();
    Ok((sum / n, Tensor::from_vec(pred.dims(), grad)?))
}
