use crate::error::{invalid, Result};

use super::{axpy, dot, Matrix, Real};

#[inline]
pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

fn check_shapes<T: Real>(input: &[T], w: &Matrix<T>, b: &[T]) -> Result<()> {
    if w.rows() != input.len() || w.cols() != b.len() {
        return Err(invalid!(
            "affine_tanh: input {}, weight {}x{}, bias {}",
            input.len(),
            w.rows(),
            w.cols(),
            b.len()
        ));
    }
    Ok(())
}

/// `tanh(Wᵀ·input + b)` with `W` stored `d_in × d_out`.
pub fn affine_tanh<T: Real>(input: &[T], w: &Matrix<T>, b: &[T]) -> Result<Vec<T>> {
    check_shapes(input, w, b)?;
    Ok(affine_tanh_unchecked(input, w, b))
}

#[inline]
pub(crate) fn affine_tanh_unchecked<T: Real>(input: &[T], w: &Matrix<T>, b: &[T]) -> Vec<T> {
    let mut z = w.t_matvec(input);
    for (zi, &bi) in z.iter_mut().zip(b) {
        *zi = (*zi + bi).tanh();
    }
    z
}

#[derive(Clone, Debug, PartialEq)]
pub struct AffineTanhGrads<T> {
    pub input: Vec<T>,
    pub weight: Matrix<T>,
    pub bias: Vec<T>,
}

/// Exact gradients of [`affine_tanh`] given its forward `output`.
pub fn affine_tanh_backward<T: Real>(
    input: &[T],
    w: &Matrix<T>,
    output: &[T],
    grad_out: &[T],
) -> Result<AffineTanhGrads<T>> {
    check_shapes(input, w, output)?;
    if grad_out.len() != output.len() {
        return Err(invalid!(
            "affine_tanh_backward: grad_out {} vs output {}",
            grad_out.len(),
            output.len()
        ));
    }
    let mut weight = Matrix::zeros(w.rows(), w.cols());
    let mut bias = vec![T::zero(); w.cols()];
    let input_grad = affine_tanh_backward_acc(input, w, output, grad_out, &mut weight, &mut bias);
    Ok(AffineTanhGrads {
        input: input_grad,
        weight,
        bias,
    })
}

/// Accumulating backward pass: adds into `gw`/`gb` and returns the input gradient.
pub(crate) fn affine_tanh_backward_acc<T: Real>(
    input: &[T],
    w: &Matrix<T>,
    output: &[T],
    grad_out: &[T],
    gw: &mut Matrix<T>,
    gb: &mut [T],
) -> Vec<T> {
    let gz: Vec<T> = output
        .iter()
        .zip(grad_out)
        .map(|(&y, &g)| g * (T::one() - y * y))
        .collect();
    gw.add_outer(input, &gz);
    axpy(T::one(), &gz, gb);
    (0..w.rows()).map(|r| dot(w.row(r), &gz)).collect()
}
