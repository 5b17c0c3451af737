use super::{Scalar, Tensor};

/// A trainable tensor with its accumulated gradient.
///
/// `decay` marks parameters subject to L2 weight decay: convolution and
/// dense kernels. Biases and batch-norm scale/shift are exempt.
#[derive(Clone, Debug)]
pub struct Param<T = f32> {
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
    pub decay: bool,
}

impl<T: Scalar> Param<T> {
    pub fn new(value: Tensor<T>, decay: bool) -> Self {
        let grad = Tensor::zeros(value.shape());
        Self { value, grad, decay }
    }

    pub fn zero_grad(&mut self) {
        self.grad.data_mut().fill(T::zero());
    }

    pub fn accumulate(&mut self, g: &Tensor<T>) {
        debug_assert_eq!(g.shape(), self.value.shape());
        for (acc, &v) in self.grad.data_mut().iter_mut().zip(g.data()) {
            *acc += v;
        }
    }

    pub fn cast<U: Scalar>(&self) -> Param<U> {
        Param {
            value: self.value.cast(),
            grad: self.grad.cast(),
            decay: self.decay,
        }
    }
}

/// Momentum buffers, one per parameter, in the order parameters are passed.
#[derive(Clone, Debug, Default)]
pub struct SgdState<T = f32> {
    velocity: Vec<Vec<T>>,
}

impl<T: Scalar> SgdState<T> {
    pub fn new() -> Self {
        Self { velocity: Vec::new() }
    }

    /// `v ← momentum·v + grad + wd·value` (decay-flagged only), then
    /// `value ← value − lr·v`.
    pub fn step(&mut self, params: &mut [&mut Param<T>], lr: T, momentum: T, weight_decay: T) {
        if self.velocity.len() != params.len() {
            self.velocity = params.iter().map(|p| vec![T::zero(); p.value.len()]).collect();
        }
        for (p, v) in params.iter_mut().zip(&mut self.velocity) {
            let wd = if p.decay { weight_decay } else { T::zero() };
            let Param { value, grad, .. } = &mut **p;
            for ((x, &g), vel) in value.data_mut().iter_mut().zip(grad.data()).zip(v.iter_mut()) {
                *vel = momentum * *vel + g + wd * *x;
                *x -= lr * *vel;
            }
        }
    }
}

/// One SGD-with-momentum update; see [`SgdState::step`].
pub fn sgd_step<T: Scalar>(
    params: &mut [&mut Param<T>],
    lr: T,
    momentum: T,
    weight_decay: T,
    state: &mut SgdState<T>,
) {
    state.step(params, lr, momentum, weight_decay);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn param(values: &[f64], grads: &[f64], decay: bool) -> Param<f64> {
        let mut p = Param::new(Tensor::new(&[values.len()], values.to_vec()).unwrap(), decay);
        p.grad.data_mut().copy_from_slice(grads);
        p
    }

    #[test]
    fn zero_grad_zero_decay_leaves_params() {
        let mut p = param(&[1.0, -2.0], &[0.0, 0.0], true);
        let mut s = SgdState::new();
        sgd_step(&mut [&mut p], 0.1, 0.9, 0.0, &mut s);
        assert_eq!(p.value.data(), &[1.0, -2.0]);
    }

    #[test]
    fn first_step_closed_form() {
        let mut p = param(&[1.0, -2.0], &[0.5, 0.25], true);
        let mut s = SgdState::new();
        sgd_step(&mut [&mut p], 0.1, 0.9, 0.01, &mut s);
        let expect = [1.0 - 0.1 * (0.5 + 0.01 * 1.0), -2.0 - 0.1 * (0.25 + 0.01 * -2.0)];
        for (a, e) in p.value.data().iter().zip(expect) {
            assert!((a - e).abs() < 1e-15);
        }
    }

    #[test]
    fn decay_skipped_for_unflagged() {
        let mut p = param(&[3.0], &[0.0], false);
        let mut s = SgdState::new();
        sgd_step(&mut [&mut p], 0.1, 0.9, 0.5, &mut s);
        assert_eq!(p.value.data(), &[3.0]);
    }

    #[test]
    fn two_steps_with_momentum_match_hand_recurrence() {
        // x0 = 1, g = 0.5 both steps, lr 0.1, μ 0.9, wd 0
        // v1 = 0.5, x1 = 0.95; v2 = 0.9·0.5 + 0.5 = 0.95, x2 = 0.95 − 0.095 = 0.855
        let mut p = param(&[1.0], &[0.5], true);
        let mut s = SgdState::new();
        sgd_step(&mut [&mut p], 0.1, 0.9, 0.0, &mut s);
        assert!((p.value.data()[0] - 0.95).abs() < 1e-15);
        sgd_step(&mut [&mut p], 0.1, 0.9, 0.0, &mut s);
        assert!((p.value.data()[0] - 0.855).abs() < 1e-15);
    }
}
