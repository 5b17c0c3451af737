use serde::{Deserialize, Serialize};

use super::layers::{BasicBlock, ConvBn, DenseLayer, Slot, SlotMut};
use crate::error::{invalid, Result};
use crate::tensor::{
    global_avg_pool, global_avg_pool_backward, relu, relu_backward, Param, Rng, Scalar, Tensor,
};

/// Network shape. Stage widths are the knob the architecture variants differ in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResNetConfig {
    pub stage_filters: [usize; 4],
    pub blocks_per_stage: [usize; 4],
    pub num_classes: usize,
    /// `[channels, height, width]`.
    pub input_shape: [usize; 3],
    pub weight_decay: f32,
}

impl Default for ResNetConfig {
    fn default() -> Self {
        Self {
            stage_filters: [64, 128, 256, 512],
            blocks_per_stage: [2, 2, 2, 2],
            num_classes: 8,
            input_shape: [1, 48, 48],
            weight_decay: 1e-4,
        }
    }
}

impl ResNetConfig {
    /// Same topology with every stage width divided by `factor` (minimum 1).
    pub fn narrow(factor: usize) -> Self {
        let mut c = Self::default();
        for f in &mut c.stage_filters {
            *f = (*f / factor.max(1)).max(1);
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        if self.stage_filters.contains(&0) {
            return Err(invalid("stage_filters must be positive"));
        }
        if self.blocks_per_stage.contains(&0) {
            return Err(invalid("blocks_per_stage must all be at least 1"));
        }
        if self.num_classes < 2 {
            return Err(invalid("num_classes must be at least 2"));
        }
        if self.input_shape.contains(&0) {
            return Err(invalid("input_shape must be positive"));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(invalid("weight_decay must be non-negative"));
        }
        Ok(())
    }

    /// Trainable parameter count from the layer formulas.
    pub fn parameter_count(&self) -> usize {
        let conv_bn = |cin: usize, cout: usize, k: usize| cin * cout * k * k + 2 * cout;
        let mut total = conv_bn(self.input_shape[0], self.stage_filters[0], 3);
        let mut cin = self.stage_filters[0];
        for (stage, (&cout, &blocks)) in self.stage_filters.iter().zip(&self.blocks_per_stage).enumerate() {
            for b in 0..blocks {
                let stride = if stage > 0 && b == 0 { 2 } else { 1 };
                total += conv_bn(cin, cout, 3) + conv_bn(cout, cout, 3);
                if stride != 1 || cin != cout {
                    total += conv_bn(cin, cout, 1);
                }
                cin = cout;
            }
        }
        total + cin * self.num_classes + self.num_classes
    }
}

/// ResNet18-style classifier for small grayscale faces.
///
/// Stem: 3×3 conv (stride 1) → BN → ReLU with no max-pool. Four stages of
/// basic blocks; the first block of stages 2-4 halves the resolution. Global
/// average pooling feeds a dense layer producing `num_classes` logits.
#[derive(Clone, Debug)]
pub struct ResNet<T = f32> {
    config: ResNetConfig,
    pub stem: ConvBn<T>,
    pub blocks: Vec<BasicBlock<T>>,
    pub head: DenseLayer<T>,
    block_names: Vec<String>,
    stem_pre_relu: Option<Tensor<T>>,
    pooled_from: Option<Vec<usize>>,
}

impl<T: Scalar> ResNet<T> {
    /// He-normal kernels, unit BN scale, zero shifts and biases.
    pub fn new(config: ResNetConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let stem = ConvBn::new(config.input_shape[0], config.stage_filters[0], 3, 1, 1, rng);
        let mut blocks = Vec::new();
        let mut block_names = Vec::new();
        let mut cin = config.stage_filters[0];
        for (stage, (&cout, &count)) in config.stage_filters.iter().zip(&config.blocks_per_stage).enumerate() {
            for b in 0..count {
                let stride = if stage > 0 && b == 0 { 2 } else { 1 };
                blocks.push(BasicBlock::new(cin, cout, stride, rng));
                block_names.push(format!("stage{}.block{}", stage + 1, b + 1));
                cin = cout;
            }
        }
        let head = DenseLayer::new(cin, config.num_classes, rng);
        Ok(Self {
            config,
            stem,
            blocks,
            head,
            block_names,
            stem_pre_relu: None,
            pooled_from: None,
        })
    }

    pub fn config(&self) -> &ResNetConfig {
        &self.config
    }

    pub fn num_classes(&self) -> usize {
        self.config.num_classes
    }

    pub fn block_names(&self) -> &[String] {
        &self.block_names
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        let (_, c, h, w) = x.dims4("network input")?;
        if [c, h, w] != self.config.input_shape {
            return Err(invalid(format!(
                "network expects [N, {}, {}, {}] input, got {:?}",
                self.config.input_shape[0],
                self.config.input_shape[1],
                self.config.input_shape[2],
                x.shape()
            )));
        }
        Ok(())
    }

    /// Training-mode forward pass: batch statistics, caches kept for [`ResNet::backward`].
    pub fn forward_train(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x)?;
        let s = self.stem.forward_train(x)?;
        let mut h = relu(&s);
        self.stem_pre_relu = Some(s);
        for block in &mut self.blocks {
            h = block.forward_train(&h)?;
        }
        self.pooled_from = Some(h.shape().to_vec());
        let pooled = global_avg_pool(&h)?;
        self.head.forward_train(&pooled)
    }

    /// Accumulates parameter gradients for the last [`ResNet::forward_train`]
    /// call and returns the gradient with respect to its input.
    pub fn backward(&mut self, grad_logits: &Tensor<T>) -> Result<Tensor<T>> {
        let g = self.head.backward(grad_logits)?;
        let shape = self
            .pooled_from
            .take()
            .ok_or_else(|| crate::Error::Contract("backward without forward_train".into()))?;
        let mut g = global_avg_pool_backward(&g, &shape)?;
        for block in self.blocks.iter_mut().rev() {
            g = block.backward(&g)?;
        }
        let s = self
            .stem_pre_relu
            .take()
            .ok_or_else(|| crate::Error::Contract("backward without forward_train".into()))?;
        self.stem.backward(&relu_backward(&g, &s)?)
    }

    /// Inference-mode logits using running statistics.
    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x)?;
        let mut h = relu(&self.stem.infer(x)?);
        for block in &self.blocks {
            h = block.infer(&h)?;
        }
        self.head.infer(&global_avg_pool(&h)?)
    }

    /// Output shape after the stem and after each block, for a given input.
    pub fn trace_shapes(&self, x: &Tensor<T>) -> Result<Vec<(String, Vec<usize>)>> {
        self.check_input(x)?;
        let mut h = relu(&self.stem.infer(x)?);
        let mut out = vec![("stem".to_string(), h.shape().to_vec())];
        for (block, name) in self.blocks.iter().zip(&self.block_names) {
            h = block.infer(&h)?;
            out.push((name.clone(), h.shape().to_vec()));
        }
        let pooled = global_avg_pool(&h)?;
        out.push(("pool".into(), pooled.shape().to_vec()));
        Ok(out)
    }

    /// Trainable parameters in build order.
    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut out = Vec::new();
        self.stem.params_mut(&mut out);
        for block in &mut self.blocks {
            block.params_mut(&mut out);
        }
        self.head.params_mut(&mut out);
        out
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn parameter_count(&mut self) -> usize {
        self.params_mut().iter().map(|p| p.value.len()).sum()
    }

    /// `Σ‖W‖²` over decay-flagged parameters.
    pub fn decayed_sum_squares(&mut self) -> T {
        self.params_mut()
            .iter()
            .filter(|p| p.decay)
            .map(|p| p.value.sum_squares())
            .sum()
    }

    /// Every stored tensor (parameters and running statistics) in build order.
    pub fn slots(&self) -> Vec<Slot<'_, T>> {
        let mut out = Vec::new();
        self.stem.slots("stem", &mut out);
        for (block, name) in self.blocks.iter().zip(&self.block_names) {
            block.slots(name, &mut out);
        }
        self.head.slots("head", &mut out);
        out
    }

    pub fn slots_mut(&mut self) -> Vec<SlotMut<'_, T>> {
        let mut out = Vec::new();
        self.stem.slots_mut("stem", &mut out);
        for (block, name) in self.blocks.iter_mut().zip(&self.block_names) {
            block.slots_mut(name, &mut out);
        }
        self.head.slots_mut("head", &mut out);
        out
    }

    /// Copy in another element type, e.g. `f64` for gradient checks.
    pub fn cast<U: Scalar>(&self) -> ResNet<U> {
        ResNet {
            config: self.config.clone(),
            stem: self.stem.cast(),
            blocks: self.blocks.iter().map(BasicBlock::cast).collect(),
            head: self.head.cast(),
            block_names: self.block_names.clone(),
            stem_pre_relu: None,
            pooled_from: None,
        }
    }
}
