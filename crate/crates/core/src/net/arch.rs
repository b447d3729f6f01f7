use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::ops::{self, ConvGeom, PoolGeom};
use super::params::{Gradients, ParamKind, ParamSpec, Parameters};
use super::{softmax_rows, NetError, Scalar, Tensor, BN_MOMENTUM};

const SHUFFLE_REPEATS: [usize; 3] = [4, 8, 4];
const MIN_INPUT_SIDE: u32 = 32;
/// Smallest side accepted for explicit-channel shuffle layouts.
const MIN_CUSTOM_SIDE: u32 = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Architecture {
    Shuffle { width_multiplier: f64 },
    Residual { depth: u32 },
    /// Shuffle-unit network with explicit widths: `stage_channels` lists the
    /// stem, one entry per stage, then the final 1×1 conv.
    ShuffleCustom { stage_channels: Vec<usize>, stage_repeats: Vec<usize> },
}

impl Architecture {
    pub fn family(&self) -> &'static str {
        match self {
            Self::Shuffle { .. } | Self::ShuffleCustom { .. } => "shuffle",
            Self::Residual { .. } => "residual",
        }
    }

    pub fn name(&self) -> String {
        match self {
            Self::Shuffle { width_multiplier } => format!("shuffle x{width_multiplier:.1}"),
            Self::Residual { depth } => format!("residual-{depth}"),
            Self::ShuffleCustom { stage_channels, stage_repeats } => {
                format!("shuffle custom {stage_channels:?}/{stage_repeats:?}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum InitMode {
    #[default]
    Random,
    External { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub architecture: Architecture,
    /// `(width, height)` in pixels.
    pub input_size: (u32, u32),
    pub num_classes: usize,
    #[serde(default)]
    pub init: InitMode,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self::shuffle(0.5, 96)
    }
}

impl ClassifierConfig {
    pub fn shuffle(width_multiplier: f64, side: u32) -> Self {
        Self {
            architecture: Architecture::Shuffle { width_multiplier },
            input_size: (side, side),
            num_classes: crate::GlitchClass::COUNT,
            init: InitMode::Random,
        }
    }

    pub fn residual(depth: u32, side: u32) -> Self {
        Self { architecture: Architecture::Residual { depth }, ..Self::shuffle(0.5, side) }
    }

    pub fn name(&self) -> String {
        self.architecture.name()
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let (w, h) = self.input_size;
        let min_side = match &self.architecture {
            Architecture::Shuffle { width_multiplier } => {
                if shuffle_channels(*width_multiplier).is_none() {
                    return Err(NetError::Config(format!("width multiplier {width_multiplier} is not one of 0.5, 1.0, 1.5, 2.0")));
                }
                MIN_INPUT_SIDE
            }
            Architecture::Residual { depth } => {
                if residual_blocks(*depth).is_none() {
                    return Err(NetError::Config(format!("residual depth {depth} is not 18 or 34")));
                }
                MIN_INPUT_SIDE
            }
            Architecture::ShuffleCustom { stage_channels, stage_repeats } => {
                if stage_repeats.is_empty() || stage_repeats.contains(&0) || stage_channels.len() != stage_repeats.len() + 2 {
                    return Err(NetError::Config("custom layout needs nonzero repeats and repeats+2 channel widths".into()));
                }
                if stage_channels.contains(&0) || stage_channels[1..=stage_repeats.len()].iter().any(|c| c % 2 != 0) {
                    return Err(NetError::Config("custom stage widths must be positive and even".into()));
                }
                MIN_CUSTOM_SIDE
            }
        };
        if w < min_side || h < min_side {
            return Err(NetError::Config(format!("input size {w}×{h} is below the {min_side}×{min_side} minimum")));
        }
        if self.num_classes < 2 {
            return Err(NetError::Config(format!("num_classes must be at least 2, got {}", self.num_classes)));
        }
        Ok(())
    }

    pub fn param_specs(&self) -> Vec<ParamSpec> {
        Classifier::new(self.clone()).map(|c| c.specs).unwrap_or_default()
    }
}

fn shuffle_channels(width: f64) -> Option<Vec<usize>> {
    let table: [(f64, [usize; 5]); 4] = [
        (0.5, [24, 48, 96, 192, 1024]),
        (1.0, [24, 116, 232, 464, 1024]),
        (1.5, [24, 176, 352, 704, 1024]),
        (2.0, [24, 244, 488, 976, 2048]),
    ];
    table.iter().find(|(w, _)| *w == width).map(|(_, c)| c.to_vec())
}

fn residual_blocks(depth: u32) -> Option<[usize; 4]> {
    match depth {
        18 => Some([2, 2, 2, 2]),
        34 => Some([3, 4, 6, 3]),
        _ => None,
    }
}

/// Convolution followed by batch normalization and an optional ReLU.
#[derive(Debug, Clone)]
struct ConvBn {
    conv: String,
    bn: String,
    geom: ConvGeom,
    relu: bool,
}

struct BnCache<T> {
    xhat: Tensor<T>,
    inv_std: Vec<T>,
}

struct ConvBnTrace<T> {
    input: Tensor<T>,
    bn: BnCache<T>,
    mask: Option<Vec<bool>>,
}

struct BnUpdate<T> {
    prefix: String,
    mean: Vec<T>,
    var: Vec<T>,
}

impl ConvBn {
    fn new(conv: String, bn: String, geom: ConvGeom, relu: bool) -> Self {
        Self { conv, bn, geom, relu }
    }

    fn specs(&self, out: &mut Vec<ParamSpec>) {
        let g = &self.geom;
        let fan_in = g.in_channels / g.groups * g.kernel * g.kernel;
        out.push(ParamSpec { name: format!("{}.weight", self.conv), shape: g.weight_shape().to_vec(), kind: ParamKind::ConvWeight, fan_in });
        let c = vec![g.out_channels];
        for (suffix, kind) in [
            ("weight", ParamKind::BnWeight),
            ("bias", ParamKind::BnBias),
            ("running_mean", ParamKind::BnRunningMean),
            ("running_var", ParamKind::BnRunningVar),
        ] {
            out.push(ParamSpec { name: format!("{}.{suffix}", self.bn), shape: c.clone(), kind, fan_in: 0 });
        }
    }

    fn bn_param<'a, T: Scalar>(&self, p: &'a Parameters<T>, suffix: &str) -> Result<&'a [T], NetError> {
        Ok(p.get(&format!("{}.{suffix}", self.bn))?.data())
    }

    fn eval<T: Scalar>(&self, p: &Parameters<T>, x: &Tensor<T>) -> Result<Tensor<T>, NetError> {
        let y = ops::conv2d(x, p.get(&format!("{}.weight", self.conv))?, &self.geom);
        let mut y = ops::batch_norm_eval(
            &y,
            self.bn_param(p, "weight")?,
            self.bn_param(p, "bias")?,
            self.bn_param(p, "running_mean")?,
            self.bn_param(p, "running_var")?,
        );
        if self.relu {
            ops::relu_inplace(&mut y);
        }
        Ok(y)
    }

    fn train<T: Scalar>(
        &self,
        p: &Parameters<T>,
        x: &Tensor<T>,
        updates: &mut Vec<BnUpdate<T>>,
    ) -> Result<(Tensor<T>, ConvBnTrace<T>), NetError> {
        let y = ops::conv2d(x, p.get(&format!("{}.weight", self.conv))?, &self.geom);
        let (mut y, stats) = ops::batch_norm_train(&y, self.bn_param(p, "weight")?, self.bn_param(p, "bias")?);
        let mask = self.relu.then(|| ops::relu_inplace(&mut y));
        updates.push(BnUpdate { prefix: self.bn.clone(), mean: stats.mean, var: stats.var_unbiased });
        let trace = ConvBnTrace { input: x.clone(), bn: BnCache { xhat: stats.xhat, inv_std: stats.inv_std }, mask };
        Ok((y, trace))
    }

    fn backward<T: Scalar>(
        &self,
        p: &Parameters<T>,
        trace: ConvBnTrace<T>,
        dy: Tensor<T>,
        need_dx: bool,
        grads: &mut Gradients<T>,
    ) -> Result<Option<Tensor<T>>, NetError> {
        let dy = match &trace.mask {
            Some(mask) => ops::relu_backward(dy, mask),
            None => dy,
        };
        let gamma = self.bn_param(p, "weight")?;
        let (dz, dgamma, dbeta) = ops::batch_norm_train_backward(&dy, &trace.bn.xhat, &trace.bn.inv_std, gamma);
        let c = dgamma.len();
        grads.insert(format!("{}.weight", self.bn), Tensor::from_vec(&[c], dgamma)?);
        grads.insert(format!("{}.bias", self.bn), Tensor::from_vec(&[c], dbeta)?);
        let weight = p.get(&format!("{}.weight", self.conv))?;
        let (dx, dw) = ops::conv2d_backward(&trace.input, weight, &dz, &self.geom, need_dx);
        grads.insert(format!("{}.weight", self.conv), dw);
        Ok(dx)
    }
}

#[derive(Debug, Clone)]
struct ShuffleUnit {
    in_channels: usize,
    branch1: Option<[ConvBn; 2]>,
    branch2: [ConvBn; 3],
}

#[derive(Debug, Clone)]
struct BasicBlock {
    conv1: ConvBn,
    conv2: ConvBn,
    downsample: Option<ConvBn>,
}

#[derive(Debug, Clone)]
enum Node {
    ConvBn(ConvBn),
    MaxPool(PoolGeom),
    Shuffle(ShuffleUnit),
    Basic(BasicBlock),
}

enum NodeTrace<T> {
    ConvBn(ConvBnTrace<T>),
    MaxPool { argmax: Vec<u32>, input_shape: Vec<usize> },
    Shuffle { branch1: Option<Vec<ConvBnTrace<T>>>, branch2: Vec<ConvBnTrace<T>> },
    Basic { conv1: ConvBnTrace<T>, conv2: ConvBnTrace<T>, downsample: Option<ConvBnTrace<T>>, mask: Vec<bool> },
}

/// Everything a training-mode forward pass keeps for the backward pass,
/// plus the batch statistics that feed the running estimates.
pub struct Trace<T> {
    nodes: Vec<NodeTrace<T>>,
    feature_hw: (usize, usize),
    embedding: Tensor<T>,
    bn_updates: Vec<BnUpdate<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput<T = f32> {
    /// N×C.
    pub logits: Tensor<T>,
    /// N×C softmax of the logits, computed in `f64`.
    pub probabilities: Tensor<f64>,
    /// N×D globally pooled features feeding the classifier.
    pub embedding: Tensor<T>,
}

impl<T: Scalar> ForwardOutput<T> {
    pub fn probability_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.probabilities.data().chunks(self.probabilities.shape()[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cost {
    /// Trainable parameters; running statistics are excluded.
    pub params: u64,
    /// Multiply-accumulates per image in convolutions and the classifier.
    pub macs: u64,
}

/// A validated network layout that runs forward and backward passes over
/// externally owned [`Parameters`].
#[derive(Debug, Clone)]
pub struct Classifier {
    config: ClassifierConfig,
    nodes: Vec<Node>,
    feature_dim: usize,
    specs: Vec<ParamSpec>,
}

impl Classifier {
    pub fn new(config: ClassifierConfig) -> Result<Self, NetError> {
        config.validate()?;
        let (nodes, feature_dim) = match &config.architecture {
            Architecture::Shuffle { width_multiplier } => {
                shuffle_nodes(&shuffle_channels(*width_multiplier).expect("validated"), &SHUFFLE_REPEATS)
            }
            Architecture::ShuffleCustom { stage_channels, stage_repeats } => shuffle_nodes(stage_channels, stage_repeats),
            Architecture::Residual { depth } => residual_nodes(&residual_blocks(*depth).expect("validated")),
        };
        let mut specs = Vec::new();
        for node in &nodes {
            match node {
                Node::ConvBn(cb) => cb.specs(&mut specs),
                Node::MaxPool(_) => {}
                Node::Shuffle(u) => {
                    for cb in u.branch1.iter().flatten().chain(&u.branch2) {
                        cb.specs(&mut specs);
                    }
                }
                Node::Basic(b) => {
                    for cb in [&b.conv1, &b.conv2].into_iter().chain(&b.downsample) {
                        cb.specs(&mut specs);
                    }
                }
            }
        }
        let classes = config.num_classes;
        specs.push(ParamSpec { name: "fc.weight".into(), shape: vec![classes, feature_dim], kind: ParamKind::LinearWeight, fan_in: feature_dim });
        specs.push(ParamSpec { name: "fc.bias".into(), shape: vec![classes], kind: ParamKind::LinearBias, fan_in: feature_dim });
        let classifier = Self { config, nodes, feature_dim, specs };
        classifier.spatial_sizes()?;
        Ok(classifier)
    }

    pub fn config(&self) -> &ClassifierConfig {
        &self.config
    }

    pub fn param_specs(&self) -> &[ParamSpec] {
        &self.specs
    }

    /// Width of the embedding.
    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    /// Output size after each node, checking nothing collapses to zero.
    fn spatial_sizes(&self) -> Result<Vec<(usize, usize)>, NetError> {
        let (w, h) = self.config.input_size;
        let mut hw = (h as usize, w as usize);
        let mut out = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let next = |g: &ConvGeom, (h, w): (usize, usize)| {
                if h + 2 * g.padding < g.kernel || w + 2 * g.padding < g.kernel {
                    None
                } else {
                    Some(g.out_size(h, w))
                }
            };
            let res = match node {
                Node::ConvBn(cb) => next(&cb.geom, hw),
                Node::MaxPool(p) => (hw.0 + 2 * p.padding >= p.kernel && hw.1 + 2 * p.padding >= p.kernel).then(|| p.out_size(hw.0, hw.1)),
                Node::Shuffle(u) => next(&u.branch2[1].geom, hw),
                Node::Basic(b) => next(&b.conv1.geom, hw),
            };
            hw = res.filter(|&(a, b)| a > 0 && b > 0).ok_or_else(|| {
                NetError::Config(format!("input size {:?} is too small for {}", self.config.input_size, self.config.name()))
            })?;
            out.push(hw);
        }
        Ok(out)
    }

    pub fn cost(&self) -> Cost {
        let (w, h) = self.config.input_size;
        let mut hw = (h as usize, w as usize);
        let mut macs = 0u64;
        let sizes = self.spatial_sizes().expect("validated at construction");
        for (node, &out_hw) in self.nodes.iter().zip(&sizes) {
            match node {
                Node::ConvBn(cb) => macs += cb.geom.macs(hw.0, hw.1),
                Node::MaxPool(_) => {}
                Node::Shuffle(u) => {
                    // Both branches start from the unit's input resolution.
                    for branch in [u.branch1.as_ref().map(|b| b.as_slice()).unwrap_or(&[]), u.branch2.as_slice()] {
                        let mut cur = hw;
                        for cb in branch {
                            macs += cb.geom.macs(cur.0, cur.1);
                            cur = cb.geom.out_size(cur.0, cur.1);
                        }
                    }
                }
                Node::Basic(bb) => {
                    macs += bb.conv1.geom.macs(hw.0, hw.1);
                    macs += bb.conv2.geom.macs(out_hw.0, out_hw.1);
                    if let Some(d) = &bb.downsample {
                        macs += d.geom.macs(hw.0, hw.1);
                    }
                }
            }
            hw = out_hw;
        }
        macs += (self.feature_dim * self.config.num_classes) as u64;
        let params = self.specs.iter().filter(|s| s.kind.trainable()).map(|s| s.numel() as u64).sum();
        Cost { params, macs }
    }

    fn check_input<T: Scalar>(&self, params: &Parameters<T>, x: &Tensor<T>) -> Result<(), NetError> {
        let (w, h) = self.config.input_size;
        let ok = x.shape().len() == 4 && x.shape()[1] == 3 && x.shape()[2] == h as usize && x.shape()[3] == w as usize && x.shape()[0] > 0;
        if !ok {
            return Err(NetError::Shape { expected: format!("N×3×{h}×{w}"), got: format!("{:?}", x.shape()) });
        }
        for spec in &self.specs {
            let t = params.get(&spec.name)?;
            if t.shape() != spec.shape.as_slice() {
                return Err(NetError::ParamShape { name: spec.name.clone(), expected: spec.shape.clone(), got: t.shape().to_vec() });
            }
        }
        Ok(())
    }

    fn head<T: Scalar>(&self, params: &Parameters<T>, features: &Tensor<T>) -> Result<ForwardOutput<T>, NetError> {
        let embedding = ops::global_avg_pool(features);
        let logits = ops::linear(&embedding, params.get("fc.weight")?, params.get("fc.bias")?.data());
        let n = logits.shape()[0];
        let c = self.config.num_classes;
        let wide: Vec<f64> = logits.data().iter().map(|v| v.to_f64_lossy()).collect();
        let probabilities = Tensor::from_vec(&[n, c], softmax_rows(&wide, c))?;
        Ok(ForwardOutput { logits, probabilities, embedding })
    }

    /// Inference pass using running normalization statistics.
    pub fn forward<T: Scalar>(&self, params: &Parameters<T>, x: &Tensor<T>) -> Result<ForwardOutput<T>, NetError> {
        self.check_input(params, x)?;
        let mut cur = x.clone();
        for node in &self.nodes {
            cur = match node {
                Node::ConvBn(cb) => cb.eval(params, &cur)?,
                Node::MaxPool(g) => ops::max_pool(&cur, g).0,
                Node::Shuffle(u) => {
                    let (left, right) = match &u.branch1 {
                        Some(b1) => (b1[1].eval(params, &b1[0].eval(params, &cur)?)?, &cur),
                        None => {
                            let (a, b) = ops::split_channels(&cur, u.in_channels / 2);
                            cur = b;
                            (a, &cur)
                        }
                    };
                    let mut r = right.clone();
                    for cb in &u.branch2 {
                        r = cb.eval(params, &r)?;
                    }
                    ops::channel_shuffle(&ops::concat_channels(&left, &r), 2)?
                }
                Node::Basic(b) => {
                    let main = b.conv2.eval(params, &b.conv1.eval(params, &cur)?)?;
                    let skip = match &b.downsample {
                        Some(d) => d.eval(params, &cur)?,
                        None => cur,
                    };
                    let mut y = ops::add(main, &skip);
                    ops::relu_inplace(&mut y);
                    y
                }
            };
        }
        self.head(params, &cur)
    }

    /// Training pass using batch statistics; keeps a [`Trace`] for
    /// [`Classifier::backward`].
    pub fn forward_train<T: Scalar>(&self, params: &Parameters<T>, x: &Tensor<T>) -> Result<(ForwardOutput<T>, Trace<T>), NetError> {
        self.check_input(params, x)?;
        let mut updates = Vec::new();
        let mut traces = Vec::with_capacity(self.nodes.len());
        let mut cur = x.clone();
        for node in &self.nodes {
            let (y, t) = match node {
                Node::ConvBn(cb) => {
                    let (y, t) = cb.train(params, &cur, &mut updates)?;
                    (y, NodeTrace::ConvBn(t))
                }
                Node::MaxPool(g) => {
                    let (y, argmax) = ops::max_pool(&cur, g);
                    (y, NodeTrace::MaxPool { argmax, input_shape: cur.shape().to_vec() })
                }
                Node::Shuffle(u) => {
                    let (left, right, b1) = match &u.branch1 {
                        Some(b1) => {
                            let (a, t0) = b1[0].train(params, &cur, &mut updates)?;
                            let (a, t1) = b1[1].train(params, &a, &mut updates)?;
                            (a, cur, Some(vec![t0, t1]))
                        }
                        None => {
                            let (a, b) = ops::split_channels(&cur, u.in_channels / 2);
                            (a, b, None)
                        }
                    };
                    let mut r = right;
                    let mut b2 = Vec::with_capacity(3);
                    for cb in &u.branch2 {
                        let (y, t) = cb.train(params, &r, &mut updates)?;
                        r = y;
                        b2.push(t);
                    }
                    let y = ops::channel_shuffle(&ops::concat_channels(&left, &r), 2)?;
                    (y, NodeTrace::Shuffle { branch1: b1, branch2: b2 })
                }
                Node::Basic(b) => {
                    let (m, t1) = b.conv1.train(params, &cur, &mut updates)?;
                    let (m, t2) = b.conv2.train(params, &m, &mut updates)?;
                    let (skip, td) = match &b.downsample {
                        Some(d) => {
                            let (s, t) = d.train(params, &cur, &mut updates)?;
                            (s, Some(t))
                        }
                        None => (cur, None),
                    };
                    let mut y = ops::add(m, &skip);
                    let mask = ops::relu_inplace(&mut y);
                    (y, NodeTrace::Basic { conv1: t1, conv2: t2, downsample: td, mask })
                }
            };
            traces.push(t);
            cur = y;
        }
        let (_, _, h, w) = cur.dims4();
        let out = self.head(params, &cur)?;
        let trace = Trace { nodes: traces, feature_hw: (h, w), embedding: out.embedding.clone(), bn_updates: updates };
        Ok((out, trace))
    }

    /// Gradients of every trainable parameter given dLoss/dLogits.
    pub fn backward<T: Scalar>(&self, params: &Parameters<T>, trace: Trace<T>, grad_logits: &Tensor<T>) -> Result<Gradients<T>, NetError> {
        let mut grads = Gradients::new();
        let Trace { nodes: traces, feature_hw: (h, w), embedding, .. } = trace;
        let (d_emb, dw, db) = ops::linear_backward(&embedding, params.get("fc.weight")?, grad_logits);
        let mut d = ops::global_avg_pool_backward(&d_emb, h, w);
        for (i, (node, t)) in self.nodes.iter().zip(traces).enumerate().rev() {
            let need_dx = i > 0;
            d = match (node, t) {
                (Node::ConvBn(cb), NodeTrace::ConvBn(t)) => match cb.backward(params, t, d, need_dx, &mut grads)? {
                    Some(dx) => dx,
                    None => break,
                },
                (Node::MaxPool(_), NodeTrace::MaxPool { argmax, input_shape }) => ops::max_pool_backward(&d, &argmax, &input_shape),
                (Node::Shuffle(u), NodeTrace::Shuffle { branch1, branch2 }) => {
                    let d = ops::channel_unshuffle(&d, 2)?;
                    let (_, c, _, _) = d.dims4();
                    let (d_left, mut d_right) = ops::split_channels(&d, c / 2);
                    for (cb, t) in u.branch2.iter().zip(branch2).rev() {
                        d_right = cb.backward(params, t, d_right, true, &mut grads)?.expect("input grad requested");
                    }
                    match (&u.branch1, branch1) {
                        (Some(b1), Some(t1)) => {
                            let mut d_l = d_left;
                            for (cb, t) in b1.iter().zip(t1).rev() {
                                d_l = cb.backward(params, t, d_l, true, &mut grads)?.expect("input grad requested");
                            }
                            ops::add(d_l, &d_right)
                        }
                        _ => ops::concat_channels(&d_left, &d_right),
                    }
                }
                (Node::Basic(b), NodeTrace::Basic { conv1, conv2, downsample, mask }) => {
                    let d = ops::relu_backward(d, &mask);
                    let dm = b.conv2.backward(params, conv2, d.clone(), true, &mut grads)?.expect("input grad requested");
                    let dm = b.conv1.backward(params, conv1, dm, true, &mut grads)?.expect("input grad requested");
                    let ds = match (&b.downsample, downsample) {
                        (Some(cb), Some(t)) => cb.backward(params, t, d, true, &mut grads)?.expect("input grad requested"),
                        _ => d,
                    };
                    ops::add(dm, &ds)
                }
                _ => unreachable!("trace does not match the network layout"),
            };
        }
        grads.insert("fc.weight", dw);
        let c = db.len();
        grads.insert("fc.bias", Tensor::from_vec(&[c], db)?);
        let trainable: Vec<ParamSpec> = self.specs.iter().filter(|s| s.kind.trainable()).cloned().collect();
        Ok(grads.ordered_like(&trainable))
    }

    /// Folds the batch statistics recorded in `trace` into the running
    /// estimates: `running ← (1 − m)·running + m·batch`.
    pub fn update_running_stats<T: Scalar>(&self, params: &mut Parameters<T>, trace: &Trace<T>) -> Result<(), NetError> {
        let m = T::from_f64_lossy(BN_MOMENTUM);
        let keep = T::one() - m;
        for u in &trace.bn_updates {
            for (suffix, batch) in [("running_mean", &u.mean), ("running_var", &u.var)] {
                let t = params.get_mut(&format!("{}.{suffix}", u.prefix))?;
                for (r, &b) in t.data_mut().iter_mut().zip(batch) {
                    *r = keep * *r + m * b;
                }
            }
        }
        Ok(())
    }
}

fn shuffle_nodes(channels: &[usize], repeats: &[usize]) -> (Vec<Node>, usize) {
    let mut nodes = vec![
        Node::ConvBn(ConvBn::new("conv1.0".into(), "conv1.1".into(), ConvGeom::dense(3, channels[0], 3, 2, 1), true)),
        Node::MaxPool(PoolGeom { kernel: 3, stride: 2, padding: 1 }),
    ];
    let mut inp = channels[0];
    for (si, &rep) in repeats.iter().enumerate() {
        let out = channels[si + 1];
        for r in 0..rep {
            let p = format!("stage{}.{r}", si + 2);
            let bf = out / 2;
            let stride = if r == 0 { 2 } else { 1 };
            let b1 = |a: usize, b: usize, geom: ConvGeom, relu: bool| {
                ConvBn::new(format!("{p}.branch1.{a}"), format!("{p}.branch1.{b}"), geom, relu)
            };
            let branch1 = (stride > 1).then(|| [b1(0, 1, ConvGeom::depthwise(inp, 3, stride, 1), false), b1(2, 3, ConvGeom::dense(inp, bf, 1, 1, 0), true)]);
            let b2 = |a: usize, b: usize, geom: ConvGeom, relu: bool| {
                ConvBn::new(format!("{p}.branch2.{a}"), format!("{p}.branch2.{b}"), geom, relu)
            };
            let b2_in = if stride > 1 { inp } else { bf };
            let branch2 = [
                b2(0, 1, ConvGeom::dense(b2_in, bf, 1, 1, 0), true),
                b2(3, 4, ConvGeom::depthwise(bf, 3, stride, 1), false),
                b2(5, 6, ConvGeom::dense(bf, bf, 1, 1, 0), true),
            ];
            nodes.push(Node::Shuffle(ShuffleUnit { in_channels: inp, branch1, branch2 }));
            inp = out;
        }
    }
    let last = *channels.last().expect("validated");
    nodes.push(Node::ConvBn(ConvBn::new("conv5.0".into(), "conv5.1".into(), ConvGeom::dense(inp, last, 1, 1, 0), true)));
    (nodes, last)
}

fn residual_nodes(blocks: &[usize; 4]) -> (Vec<Node>, usize) {
    let mut nodes = vec![
        Node::ConvBn(ConvBn::new("conv1".into(), "bn1".into(), ConvGeom::dense(3, 64, 7, 2, 3), true)),
        Node::MaxPool(PoolGeom { kernel: 3, stride: 2, padding: 1 }),
    ];
    let mut inp = 64;
    for (li, &count) in blocks.iter().enumerate() {
        let out = 64 << li;
        for b in 0..count {
            let p = format!("layer{}.{b}", li + 1);
            let stride = if b == 0 && li > 0 { 2 } else { 1 };
            let downsample = (stride != 1 || inp != out)
                .then(|| ConvBn::new(format!("{p}.downsample.0"), format!("{p}.downsample.1"), ConvGeom::dense(inp, out, 1, stride, 0), false));
            nodes.push(Node::Basic(BasicBlock {
                conv1: ConvBn::new(format!("{p}.conv1"), format!("{p}.bn1"), ConvGeom::dense(inp, out, 3, stride, 1), true),
                conv2: ConvBn::new(format!("{p}.conv2"), format!("{p}.bn2"), ConvGeom::dense(out, out, 3, 1, 1), false),
                downsample,
            }));
            inp = out;
        }
    }
    (nodes, 512)
}

/// Analytic parameter and multiply-accumulate counts for `config`.
pub fn count_cost(config: &ClassifierConfig) -> Result<Cost, NetError> {
    Ok(Classifier::new(config.clone())?.cost())
}
