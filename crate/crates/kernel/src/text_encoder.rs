//! Text projection with a low-rank trainable branch and an additive tag embedding.
//!
//! `Y = (X + T) W0 + gamma * (X + T) L1 L2`, where `X` is `q x w`, `T` is
//! either `q x w` or a single `1 x w` row broadcast over tokens.

use nalgebra::DMatrix;

use crate::KernelError;

#[derive(Debug, Clone, PartialEq)]
pub struct TextEncoderAugment {
    w0: DMatrix<f64>,
    l1: DMatrix<f64>,
    l2: DMatrix<f64>,
    tag: DMatrix<f64>,
    gamma: f64,
}

fn mismatch(what: &str, got: (usize, usize), want: (usize, usize)) -> KernelError {
    KernelError::DimensionMismatch(format!("{what} is {}x{}, expected {}x{}", got.0, got.1, want.0, want.1))
}

impl TextEncoderAugment {
    pub fn new(
        w0: DMatrix<f64>,
        l1: DMatrix<f64>,
        l2: DMatrix<f64>,
        tag: DMatrix<f64>,
        gamma: f64,
    ) -> Result<Self, KernelError> {
        let (w, r) = w0.shape();
        let e = l1.ncols();
        if l1.nrows() != w {
            return Err(mismatch("L1", l1.shape(), (w, e)));
        }
        if l2.shape() != (e, r) {
            return Err(mismatch("L2", l2.shape(), (e, r)));
        }
        if tag.ncols() != w || tag.nrows() == 0 {
            return Err(mismatch("tag embedding", tag.shape(), (1, w)));
        }
        Ok(TextEncoderAugment { w0, l1, l2, tag, gamma })
    }

    /// Zero adapter branch and zero tag embedding around a frozen projection.
    pub fn frozen(w0: DMatrix<f64>, rank: usize, gamma: f64) -> Self {
        let (w, r) = w0.shape();
        TextEncoderAugment {
            l1: DMatrix::zeros(w, rank),
            l2: DMatrix::zeros(rank, r),
            tag: DMatrix::zeros(1, w),
            w0,
            gamma,
        }
    }

    pub fn w0(&self) -> &DMatrix<f64> {
        &self.w0
    }

    pub fn l1(&self) -> &DMatrix<f64> {
        &self.l1
    }

    pub fn l2(&self) -> &DMatrix<f64> {
        &self.l2
    }

    pub fn tag(&self) -> &DMatrix<f64> {
        &self.tag
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Replaces the trainable low-rank factors; everything else stays fixed.
    pub fn set_adapter(&mut self, l1: DMatrix<f64>, l2: DMatrix<f64>) -> Result<(), KernelError> {
        if l1.shape() != self.l1.shape() {
            return Err(mismatch("L1", l1.shape(), self.l1.shape()));
        }
        if l2.shape() != self.l2.shape() {
            return Err(mismatch("L2", l2.shape(), self.l2.shape()));
        }
        self.l1 = l1;
        self.l2 = l2;
        Ok(())
    }
}

pub fn magic_text_encode(x0: &DMatrix<f64>, aug: &TextEncoderAugment) -> Result<DMatrix<f64>, KernelError> {
    let (q, w) = x0.shape();
    if w != aug.w0.nrows() {
        return Err(mismatch("token matrix", x0.shape(), (q, aug.w0.nrows())));
    }
    let tagged = match aug.tag.nrows() {
        1 => DMatrix::from_fn(q, w, |i, j| x0[(i, j)] + aug.tag[(0, j)]),
        n if n == q => x0 + &aug.tag,
        _ => return Err(mismatch("tag embedding", aug.tag.shape(), (q, w))),
    };
    let base = &tagged * &aug.w0;
    let low_rank = &tagged * &aug.l1 * &aug.l2;
    Ok(base + low_rank * aug.gamma)
}
