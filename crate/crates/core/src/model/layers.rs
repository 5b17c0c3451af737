//! Stateful layer wrappers around the tensor primitives.
//!
//! `forward_train` caches what the backward pass needs and updates batch
//! norm running statistics; `infer` takes `&self` and caches nothing, so a
//! trained model can be shared across threads.

use crate::error::{Error, Result};
use crate::tensor::{
    batchnorm_backward, batchnorm_forward, conv2d_backward, conv2d_forward, dense_backward,
    dense_forward, relu, relu_backward, BnCache, Mode, Param, Rng, Scalar, Tensor,
};

pub const BN_MOMENTUM: f64 = 0.9;
pub const BN_EPSILON: f64 = 1e-5;

/// Role of a stored tensor within its layer; also used as the weights-file tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    Kernel,
    Bias,
    Gamma,
    Beta,
    RunningMean,
    RunningVar,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Kernel => "kernel",
            Role::Bias => "bias",
            Role::Gamma => "gamma",
            Role::Beta => "beta",
            Role::RunningMean => "running_mean",
            Role::RunningVar => "running_var",
        }
    }

    pub fn parse(s: &str) -> Option<Role> {
        Some(match s {
            "kernel" => Role::Kernel,
            "bias" => Role::Bias,
            "gamma" => Role::Gamma,
            "beta" => Role::Beta,
            "running_mean" => Role::RunningMean,
            "running_var" => Role::RunningVar,
            _ => return None,
        })
    }
}

/// A named tensor slot, in build order.
pub struct Slot<'a, T> {
    pub layer: String,
    pub role: Role,
    pub tensor: &'a Tensor<T>,
}

pub struct SlotMut<'a, T> {
    pub layer: String,
    pub role: Role,
    pub tensor: &'a mut Tensor<T>,
}

fn missing_cache(layer: &str) -> Error {
    Error::Contract(format!("{layer}: backward called without a training forward pass"))
}

/// He-normal: N(0, 2 / fan_in).
fn he_normal<T: Scalar>(shape: &[usize], fan_in: usize, rng: &mut Rng) -> Tensor<T> {
    let std = (2.0 / fan_in as f64).sqrt();
    Tensor::from_fn(shape, |_| T::lit(rng.normal() * std))
}

/// Bias-free convolution; every convolution in the network feeds a batch norm.
#[derive(Clone, Debug)]
pub struct ConvLayer<T> {
    pub kernel: Param<T>,
    pub stride: usize,
    pub pad: usize,
    saved_input: Option<Tensor<T>>,
}

impl<T: Scalar> ConvLayer<T> {
    pub fn new(in_c: usize, out_c: usize, k: usize, stride: usize, pad: usize, rng: &mut Rng) -> Self {
        let kernel = he_normal(&[out_c, in_c, k, k], in_c * k * k, rng);
        Self {
            kernel: Param::new(kernel, true),
            stride,
            pad,
            saved_input: None,
        }
    }

    pub fn forward_train(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let y = self.infer(x)?;
        self.saved_input = Some(x.clone());
        Ok(y)
    }

    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        conv2d_forward(x, &self.kernel.value, None, self.stride, self.pad)
    }

    pub fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self.saved_input.take().ok_or_else(|| missing_cache("conv"))?;
        let g = conv2d_backward(grad, &x, &self.kernel.value, self.stride, self.pad)?;
        self.kernel.accumulate(&g.kernel);
        Ok(g.input)
    }

    pub(crate) fn cast<U: Scalar>(&self) -> ConvLayer<U> {
        ConvLayer {
            kernel: self.kernel.cast(),
            stride: self.stride,
            pad: self.pad,
            saved_input: None,
        }
    }

    pub(crate) fn params_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Param<T>>) {
        out.push(&mut self.kernel);
    }

    pub(crate) fn slots<'a>(&'a self, name: &str, out: &mut Vec<Slot<'a, T>>) {
        out.push(Slot { layer: name.into(), role: Role::Kernel, tensor: &self.kernel.value });
    }

    pub(crate) fn slots_mut<'a>(&'a mut self, name: &str, out: &mut Vec<SlotMut<'a, T>>) {
        out.push(SlotMut { layer: name.into(), role: Role::Kernel, tensor: &mut self.kernel.value });
    }
}

#[derive(Clone, Debug)]
pub struct BatchNormLayer<T> {
    pub gamma: Param<T>,
    pub beta: Param<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
    cache: Option<BnCache<T>>,
}

impl<T: Scalar> BatchNormLayer<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Param::new(Tensor::full(&[channels], T::one()), false),
            beta: Param::new(Tensor::zeros(&[channels]), false),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::full(&[channels], T::one()),
            cache: None,
        }
    }

    pub fn forward_train(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (y, cache) = batchnorm_forward(
            x,
            &self.gamma.value,
            &self.beta.value,
            &mut self.running_mean,
            &mut self.running_var,
            Mode::Train,
            T::lit(BN_MOMENTUM),
            T::lit(BN_EPSILON),
        )?;
        self.cache = Some(cache);
        Ok(y)
    }

    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut rm = self.running_mean.clone();
        let mut rv = self.running_var.clone();
        let (y, _) = batchnorm_forward(
            x,
            &self.gamma.value,
            &self.beta.value,
            &mut rm,
            &mut rv,
            Mode::Infer,
            T::lit(BN_MOMENTUM),
            T::lit(BN_EPSILON),
        )?;
        Ok(y)
    }

    pub fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let cache = self.cache.take().ok_or_else(|| missing_cache("batchnorm"))?;
        let g = batchnorm_backward(grad, &cache, &self.gamma.value)?;
        self.gamma.accumulate(&g.gamma);
        self.beta.accumulate(&g.beta);
        Ok(g.input)
    }

    pub(crate) fn cast<U: Scalar>(&self) -> BatchNormLayer<U> {
        BatchNormLayer {
            gamma: self.gamma.cast(),
            beta: self.beta.cast(),
            running_mean: self.running_mean.cast(),
            running_var: self.running_var.cast(),
            cache: None,
        }
    }

    pub(crate) fn params_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Param<T>>) {
        out.push(&mut self.gamma);
        out.push(&mut self.beta);
    }

    pub(crate) fn slots<'a>(&'a self, name: &str, out: &mut Vec<Slot<'a, T>>) {
        for (role, tensor) in [
            (Role::Gamma, &self.gamma.value),
            (Role::Beta, &self.beta.value),
            (Role::RunningMean, &self.running_mean),
            (Role::RunningVar, &self.running_var),
        ] {
            out.push(Slot { layer: name.into(), role, tensor });
        }
    }

    pub(crate) fn slots_mut<'a>(&'a mut self, name: &str, out: &mut Vec<SlotMut<'a, T>>) {
        for (role, tensor) in [
            (Role::Gamma, &mut self.gamma.value),
            (Role::Beta, &mut self.beta.value),
            (Role::RunningMean, &mut self.running_mean),
            (Role::RunningVar, &mut self.running_var),
        ] {
            out.push(SlotMut { layer: name.into(), role, tensor });
        }
    }
}

#[derive(Clone, Debug)]
pub struct DenseLayer<T> {
    pub weight: Param<T>,
    pub bias: Param<T>,
    saved_input: Option<Tensor<T>>,
}

impl<T: Scalar> DenseLayer<T> {
    pub fn new(inputs: usize, outputs: usize, rng: &mut Rng) -> Self {
        Self {
            weight: Param::new(he_normal(&[inputs, outputs], inputs, rng), true),
            bias: Param::new(Tensor::zeros(&[outputs]), false),
            saved_input: None,
        }
    }

    pub fn forward_train(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let y = self.infer(x)?;
        self.saved_input = Some(x.clone());
        Ok(y)
    }

    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        dense_forward(x, &self.weight.value, &self.bias.value)
    }

    pub fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self.saved_input.take().ok_or_else(|| missing_cache("dense"))?;
        let g = dense_backward(grad, &x, &self.weight.value)?;
        self.weight.accumulate(&g.weight);
        self.bias.accumulate(&g.bias);
        Ok(g.input)
    }

    pub(crate) fn cast<U: Scalar>(&self) -> DenseLayer<U> {
        DenseLayer {
            weight: self.weight.cast(),
            bias: self.bias.cast(),
            saved_input: None,
        }
    }

    pub(crate) fn params_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Param<T>>) {
        out.push(&mut self.weight);
        out.push(&mut self.bias);
    }

    pub(crate) fn slots<'a>(&'a self, name: &str, out: &mut Vec<Slot<'a, T>>) {
        out.push(Slot { layer: name.into(), role: Role::Kernel, tensor: &self.weight.value });
        out.push(Slot { layer: name.into(), role: Role::Bias, tensor: &self.bias.value });
    }

    pub(crate) fn slots_mut<'a>(&'a mut self, name: &str, out: &mut Vec<SlotMut<'a, T>>) {
        out.push(SlotMut { layer: name.into(), role: Role::Kernel, tensor: &mut self.weight.value });
        out.push(SlotMut { layer: name.into(), role: Role::Bias, tensor: &mut self.bias.value });
    }
}

/// Conv → BN; the building unit of stems, block branches and projections.
#[derive(Clone, Debug)]
pub struct ConvBn<T> {
    pub conv: ConvLayer<T>,
    pub bn: BatchNormLayer<T>,
}

impl<T: Scalar> ConvBn<T> {
    pub fn new(in_c: usize, out_c: usize, k: usize, stride: usize, pad: usize, rng: &mut Rng) -> Self {
        Self {
            conv: ConvLayer::new(in_c, out_c, k, stride, pad, rng),
            bn: BatchNormLayer::new(out_c),
        }
    }

    pub fn forward_train(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let y = self.conv.forward_train(x)?;
        self.bn.forward_train(&y)
    }

    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.bn.infer(&self.conv.infer(x)?)
    }

    pub fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let g = self.bn.backward(grad)?;
        self.conv.backward(&g)
    }

    pub(crate) fn cast<U: Scalar>(&self) -> ConvBn<U> {
        ConvBn { conv: self.conv.cast(), bn: self.bn.cast() }
    }

    pub(crate) fn params_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Param<T>>) {
        self.conv.params_mut(out);
        self.bn.params_mut(out);
    }

    pub(crate) fn slots<'a>(&'a self, name: &str, out: &mut Vec<Slot<'a, T>>) {
        self.conv.slots(&format!("{name}.conv"), out);
        self.bn.slots(&format!("{name}.bn"), out);
    }

    pub(crate) fn slots_mut<'a>(&'a mut self, name: &str, out: &mut Vec<SlotMut<'a, T>>) {
        self.conv.slots_mut(&format!("{name}.conv"), out);
        self.bn.slots_mut(&format!("{name}.bn"), out);
    }
}

fn add<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    crate::tensor::same_shape(a, b, "residual add")?;
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| x + y).collect();
    Tensor::new(a.shape(), data)
}

/// Basic residual block: `relu(bn(conv(relu(bn(conv(x))))) + shortcut(x))`.
///
/// The shortcut is the identity unless the block changes stride or width,
/// in which case it is a 1×1 convolution + BN projection.
#[derive(Clone, Debug)]
pub struct BasicBlock<T> {
    pub branch1: ConvBn<T>,
    pub branch2: ConvBn<T>,
    pub projection: Option<ConvBn<T>>,
    mid_pre_relu: Option<Tensor<T>>,
    sum_pre_relu: Option<Tensor<T>>,
}

impl<T: Scalar> BasicBlock<T> {
    pub fn new(in_c: usize, out_c: usize, stride: usize, rng: &mut Rng) -> Self {
        let branch1 = ConvBn::new(in_c, out_c, 3, stride, 1, rng);
        let branch2 = ConvBn::new(out_c, out_c, 3, 1, 1, rng);
        let projection = (stride != 1 || in_c != out_c).then(|| ConvBn::new(in_c, out_c, 1, stride, 0, rng));
        Self {
            branch1,
            branch2,
            projection,
            mid_pre_relu: None,
            sum_pre_relu: None,
        }
    }

    pub fn forward_train(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let a = self.branch1.forward_train(x)?;
        let b = self.branch2.forward_train(&relu(&a))?;
        self.mid_pre_relu = Some(a);
        let s = match &mut self.projection {
            Some(p) => p.forward_train(x)?,
            None => x.clone(),
        };
        let z = add(&b, &s)?;
        let out = relu(&z);
        self.sum_pre_relu = Some(z);
        Ok(out)
    }

    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let a = relu(&self.branch1.infer(x)?);
        let b = self.branch2.infer(&a)?;
        let z = match &self.projection {
            Some(p) => add(&b, &p.infer(x)?)?,
            None => add(&b, x)?,
        };
        Ok(relu(&z))
    }

    pub fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let z = self.sum_pre_relu.take().ok_or_else(|| missing_cache("block"))?;
        let a = self.mid_pre_relu.take().ok_or_else(|| missing_cache("block"))?;
        let gz = relu_backward(grad, &z)?;
        let ga = self.branch2.backward(&gz)?;
        let gx_main = self.branch1.backward(&relu_backward(&ga, &a)?)?;
        let gx_short = match &mut self.projection {
            Some(p) => p.backward(&gz)?,
            None => gz,
        };
        add(&gx_main, &gx_short)
    }

    pub(crate) fn cast<U: Scalar>(&self) -> BasicBlock<U> {
        BasicBlock {
            branch1: self.branch1.cast(),
            branch2: self.branch2.cast(),
            projection: self.projection.as_ref().map(ConvBn::cast),
            mid_pre_relu: None,
            sum_pre_relu: None,
        }
    }

    pub(crate) fn params_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Param<T>>) {
        self.branch1.params_mut(out);
        self.branch2.params_mut(out);
        if let Some(p) = &mut self.projection {
            p.params_mut(out);
        }
    }

    pub(crate) fn slots<'a>(&'a self, name: &str, out: &mut Vec<Slot<'a, T>>) {
        self.branch1.slots(&format!("{name}.branch1"), out);
        self.branch2.slots(&format!("{name}.branch2"), out);
        if let Some(p) = &self.projection {
            p.slots(&format!("{name}.projection"), out);
        }
    }

    pub(crate) fn slots_mut<'a>(&'a mut self, name: &str, out: &mut Vec<SlotMut<'a, T>>) {
        self.branch1.slots_mut(&format!("{name}.branch1"), out);
        self.branch2.slots_mut(&format!("{name}.branch2"), out);
        if let Some(p) = &mut self.projection {
            p.slots_mut(&format!("{name}.projection"), out);
        }
    }
}
