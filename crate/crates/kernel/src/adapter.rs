//! Residual adapter stacks.
//!
//! A stack is a chain of affine layers applied independently to every vector
//! along one tensor axis, with parameters shared across all other positions.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::tensor::Tensor5;
use crate::KernelError;

pub const DEFAULT_DEPTH: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, v: &mut DVector<f64>) {
        if self == Activation::Relu {
            v.apply(|x| *x = x.max(0.0));
        }
    }
}

/// Axis whose vectors the adapter maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeatureAxis {
    Channel,
    #[default]
    Last,
}

impl FeatureAxis {
    fn index(self) -> usize {
        match self {
            FeatureAxis::Channel => 1,
            FeatureAxis::Last => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffineLayer {
    /// `out x in`.
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl AffineLayer {
    pub fn new(weight: DMatrix<f64>, bias: DVector<f64>) -> Result<Self, KernelError> {
        if weight.nrows() != bias.len() {
            return Err(KernelError::DimensionMismatch(format!(
                "weight has {} rows but bias has {} entries",
                weight.nrows(),
                bias.len()
            )));
        }
        Ok(AffineLayer { weight, bias })
    }

    pub fn zeros(input: usize, output: usize) -> Self {
        AffineLayer {
            weight: DMatrix::zeros(output, input),
            bias: DVector::zeros(output),
        }
    }

    pub fn identity(width: usize) -> Self {
        AffineLayer {
            weight: DMatrix::identity(width, width),
            bias: DVector::zeros(width),
        }
    }

    pub fn input_width(&self) -> usize {
        self.weight.ncols()
    }

    pub fn output_width(&self) -> usize {
        self.weight.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdapterStack {
    layers: Vec<AffineLayer>,
    activation: Activation,
    axis: FeatureAxis,
}

impl AdapterStack {
    pub fn new(layers: Vec<AffineLayer>, activation: Activation, axis: FeatureAxis) -> Result<Self, KernelError> {
        let (Some(first), Some(last)) = (layers.first(), layers.last()) else {
            return Err(KernelError::DimensionMismatch("adapter needs at least one layer".into()));
        };
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].output_width() != pair[1].input_width() {
                return Err(KernelError::DimensionMismatch(format!(
                    "layer {i} emits {} values but layer {} takes {}",
                    pair[0].output_width(),
                    i + 1,
                    pair[1].input_width()
                )));
            }
        }
        if last.output_width() != first.input_width() {
            return Err(KernelError::DimensionMismatch(format!(
                "adapter maps width {} to {}",
                first.input_width(),
                last.output_width()
            )));
        }
        Ok(AdapterStack {
            layers,
            activation,
            axis,
        })
    }

    /// `depth` layers of width `width`; hidden layers drawn uniformly in
    /// `±1/sqrt(width)`, final layer zero so the stack starts as a zero map.
    pub fn zero_init<R: Rng + ?Sized>(width: usize, depth: usize, axis: FeatureAxis, rng: &mut R) -> Result<Self, KernelError> {
        if width == 0 || depth == 0 {
            return Err(KernelError::DimensionMismatch("width and depth must be positive".into()));
        }
        let bound = 1.0 / (width as f64).sqrt();
        let mut layers: Vec<AffineLayer> = (1..depth)
            .map(|_| AffineLayer {
                weight: DMatrix::from_fn(width, width, |_, _| rng.random_range(-bound..=bound)),
                bias: DVector::from_fn(width, |_, _| rng.random_range(-bound..=bound)),
            })
            .collect();
        layers.push(AffineLayer::zeros(width, width));
        AdapterStack::new(layers, Activation::Relu, axis)
    }

    pub fn identity(width: usize, axis: FeatureAxis) -> Self {
        AdapterStack {
            layers: vec![AffineLayer::identity(width)],
            activation: Activation::Identity,
            axis,
        }
    }

    pub fn layers(&self) -> &[AffineLayer] {
        &self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn axis(&self) -> FeatureAxis {
        self.axis
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].input_width()
    }

    fn map_vector(&self, v: DVector<f64>) -> DVector<f64> {
        let last = self.layers.len() - 1;
        self.layers.iter().enumerate().fold(v, |acc, (i, layer)| {
            let mut out = &layer.weight * acc + &layer.bias;
            if i < last {
                self.activation.apply(&mut out);
            }
            out
        })
    }
}

pub fn adapter_forward(x: &Tensor5, stack: &AdapterStack) -> Result<Tensor5, KernelError> {
    let shape = x.shape();
    let axis = stack.axis.index();
    let width = shape[axis];
    if width != stack.input_width() {
        return Err(KernelError::DimensionMismatch(format!(
            "axis {axis} has length {width}, adapter expects {}",
            stack.input_width()
        )));
    }
    let stride: usize = shape[axis + 1..].iter().product();
    let data = x.data();
    let mut out = vec![0.0; data.len()];
    for base in (0..data.len()).filter(|i| (i / stride).is_multiple_of(width)) {
        let v = DVector::from_fn(width, |k, _| data[base + k * stride]);
        let mapped = stack.map_vector(v);
        for (k, value) in mapped.iter().enumerate() {
            out[base + k * stride] = *value;
        }
    }
    Tensor5::new(shape, out)
}

/// Spatial residual: `base(x) + alpha * adapter(base(x))` on single-frame input.
pub fn spatial_block_forward<F>(x: &Tensor5, base: F, stack: &AdapterStack, alpha: f64) -> Result<Tensor5, KernelError>
where
    F: Fn(&Tensor5) -> Result<Tensor5, KernelError>,
{
    let frames = x.shape()[2];
    if frames != 1 {
        return Err(KernelError::FrameAxisNotSingleton(frames));
    }
    let b = base(x)?;
    let residual = adapter_forward(&b, stack)?;
    b.zip_with(&residual, |p, r| p + alpha * r)
}

/// Temporal residual: `base(y) + beta * adapter(y)`; the adapter sees the layer input.
pub fn temporal_block_forward<F>(y: &Tensor5, base: F, stack: &AdapterStack, beta: f64) -> Result<Tensor5, KernelError>
where
    F: Fn(&Tensor5) -> Result<Tensor5, KernelError>,
{
    let b = base(y)?;
    let residual = adapter_forward(y, stack)?;
    b.zip_with(&residual, |p, r| p + beta * r)
}
