use nalgebra::{DMatrix, DVector};

use crate::diffusion::epsilon_loss;
use crate::schedule::NoiseSchedule;
use crate::tensor::Tensor5;
use crate::KernelError;

/// Noise predictor. Implementations must return a tensor with the shape of
/// `x_t` and be deterministic for fixed inputs.
pub trait Denoiser: Send + Sync {
    fn predict(&self, x_t: &Tensor5, t: usize, cond: Option<&[f64]>) -> Result<Tensor5, KernelError>;
}

/// Exact denoiser for a data distribution concentrated on one tensor.
#[derive(Debug, Clone)]
pub struct PointMassDenoiser {
    target: Tensor5,
    schedule: NoiseSchedule,
}

impl PointMassDenoiser {
    pub fn new(target: Tensor5, schedule: NoiseSchedule) -> Self {
        PointMassDenoiser { target, schedule }
    }

    pub fn target(&self) -> &Tensor5 {
        &self.target
    }
}

impl Denoiser for PointMassDenoiser {
    fn predict(&self, x_t: &Tensor5, t: usize, _cond: Option<&[f64]>) -> Result<Tensor5, KernelError> {
        if t == 0 {
            return Err(KernelError::StepOutOfRange { t, max: self.schedule.steps() });
        }
        let ab = self.schedule.alpha_bar(t)?;
        let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
        x_t.zip_with(&self.target, |x, x0| (x - a * x0) / b)
    }
}

/// `eps = W * vec(x_t) + b` over the flattened tensor; ignores step and conditioning.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearDenoiser {
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearGrad {
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl LinearDenoiser {
    pub fn new(weight: DMatrix<f64>, bias: DVector<f64>) -> Result<Self, KernelError> {
        if !weight.is_square() || weight.nrows() != bias.len() {
            return Err(KernelError::DimensionMismatch(format!(
                "weight {}x{} with bias of length {}",
                weight.nrows(),
                weight.ncols(),
                bias.len()
            )));
        }
        Ok(LinearDenoiser { weight, bias })
    }

    pub fn dim(&self) -> usize {
        self.bias.len()
    }

    fn apply(&self, x_t: &Tensor5) -> Result<DVector<f64>, KernelError> {
        if x_t.len() != self.dim() {
            return Err(KernelError::DimensionMismatch(format!(
                "denoiser width {} for tensor of {} elements",
                self.dim(),
                x_t.len()
            )));
        }
        let x = DVector::from_column_slice(x_t.data());
        Ok(&self.weight * x + &self.bias)
    }

    /// Noise-prediction loss against `eps` and its gradient in the parameters.
    pub fn loss_and_grad(&self, x_t: &Tensor5, eps: &Tensor5) -> Result<(f64, LinearGrad), KernelError> {
        x_t.check_same_shape(eps)?;
        let pred = Tensor5::new(x_t.shape(), self.apply(x_t)?.as_slice().to_vec())?;
        let loss = epsilon_loss(&pred, eps)?;
        let residual = DVector::from_column_slice(pred.data()) - DVector::from_column_slice(eps.data());
        let k = 2.0 / self.dim() as f64;
        let x = DVector::from_column_slice(x_t.data());
        Ok((
            loss,
            LinearGrad {
                weight: &residual * x.transpose() * k,
                bias: residual * k,
            },
        ))
    }
}

impl Denoiser for LinearDenoiser {
    fn predict(&self, x_t: &Tensor5, _t: usize, _cond: Option<&[f64]>) -> Result<Tensor5, KernelError> {
        Tensor5::new(x_t.shape(), self.apply(x_t)?.as_slice().to_vec())
    }
}
