use crate::error::Result;
use crate::tensor::Tensor;

pub fn relu_forward(input: &Tensor) -> Tensor {
    input.map(|x| if x > 0.0 { x } else { 0.0 })
}

/// Passes `grad_output` where the forward input was strictly positive; the
/// subgradient at exactly zero is taken as 0.
pub fn relu_backward(input: &Tensor, grad_output: &Tensor) -> Result<Tensor> {
    input.ensure_same_shape(grad_output, "relu_backward")?;
    let mut g = grad_output.clone();
    for (gi, &x) in g.data_mut().iter_mut().zip(input.data()) {
        if x <= 0.0 {
            *gi = 0.0;
        }
    }
    Ok(g)
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

pub fn sigmoid_forward(input: &Tensor) -> Tensor {
    input.map(sigmoid)
}

/// Backward pass expressed through the forward *output* `s`: `ds/dx = s(1-s)`.
pub fn sigmoid_backward(output: &Tensor, grad_output: &Tensor) -> Result<Tensor> {
    output.ensure_same_shape(grad_output, "sigmoid_backward")?;
    let mut g = grad_output.clone();
    for (gi, &s) in g.data_mut().iter_mut().zip(output.data()) {
        *gi *= s * (1.0 - s);
    }
    Ok(g)
}
