//! Compares analytic gradients with central differences: one convolution,
//! then a few sampled parameters of a narrow ResNet18 in f64.

use fer_core::model::{loss_with_l2, ResNet, ResNetConfig};
use fer_core::tensor::{conv2d_backward, conv2d_forward, finite_diff_check, softmax_cross_entropy};
use fer_core::{Rng, Tensor};

fn main() -> fer_core::Result<()> {
    let mut rng = Rng::new(1);
    let x = Tensor::from_fn(&[2, 3, 8, 8], |_| rng.normal());
    let k = Tensor::from_fn(&[4, 3, 3, 3], |_| rng.normal());
    let out = conv2d_forward(&x, &k, None, 2, 1)?;
    let proj = Tensor::from_fn(out.shape(), |_| rng.normal());
    let grads = conv2d_backward(&proj, &x, &k, 2, 1)?;
    let loss = |kd: &[f64]| {
        let kt = Tensor::new(k.shape(), kd.to_vec()).unwrap();
        let y = conv2d_forward(&x, &kt, None, 2, 1).unwrap();
        y.data().iter().zip(proj.data()).map(|(a, b)| a * b).sum()
    };
    let r = finite_diff_check(loss, k.data(), grads.kernel.data(), 1e-5);
    println!("conv kernel: {} coords, max rel err {:.2e}", r.checked, r.max_rel_error);

    let mut model = ResNet::<f64>::new(ResNetConfig::narrow(8), &mut Rng::new(2))?;
    let batch = Tensor::from_fn(&[2, 1, 48, 48], |_| rng.uniform());
    let labels = [1, 4];
    let analytic = loss_with_l2(&mut model, &batch, &labels, None)?;
    println!("resnet18/8 loss {:.4} (data {:.4})", analytic.total, analytic.data);
    let wd = model.config().weight_decay as f64;
    let h = 1e-7;
    for _ in 0..5 {
        let n = model.params_mut().len();
        let ti = rng.below(n as u64) as usize;
        let ei = rng.below(model.params_mut()[ti].value.len() as u64) as usize;
        let g = model.params_mut()[ti].grad.data()[ei];
        let mut at = |delta: f64| {
            let orig = model.params_mut()[ti].value.data()[ei];
            model.params_mut()[ti].value.data_mut()[ei] = orig + delta;
            let logits = model.forward_train(&batch).unwrap();
            let l = softmax_cross_entropy(&logits, &labels, None).unwrap().loss + 0.5 * wd * model.decayed_sum_squares();
            model.params_mut()[ti].value.data_mut()[ei] = orig;
            l
        };
        let numeric = (at(h) - at(-h)) / (2.0 * h);
        println!("param {ti:>2}[{ei:>5}]: analytic {g:+.6e} numeric {numeric:+.6e}");
    }
    Ok(())
}
