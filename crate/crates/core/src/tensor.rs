//! Trainable parameter containers.

use rand::Rng;

use crate::real::Real;

/// A named, shaped array of trainable values with a paired gradient buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTensor<F> {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<F>,
    pub grad: Vec<F>,
}

impl<F: Real> ParamTensor<F> {
    pub fn zeros(name: impl Into<String>, shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Self {
            name: name.into(),
            shape: shape.to_vec(),
            values: vec![F::zero(); len],
            grad: vec![F::zero(); len],
        }
    }

    pub fn filled(name: impl Into<String>, shape: &[usize], value: F) -> Self {
        let mut t = Self::zeros(name, shape);
        t.values.iter_mut().for_each(|v| *v = value);
        t
    }

    pub fn uniform<R: Rng + ?Sized>(
        name: impl Into<String>,
        shape: &[usize],
        bound: f64,
        rng: &mut R,
    ) -> Self {
        let mut t = Self::zeros(name, shape);
        for v in &mut t.values {
            *v = F::lit(rng.gen_range(-bound..=bound));
        }
        t
    }

    pub fn from_values(name: impl Into<String>, shape: &[usize], values: Vec<F>) -> Self {
        let len: usize = shape.iter().product();
        assert_eq!(len, values.len(), "values do not match shape");
        Self {
            name: name.into(),
            shape: shape.to_vec(),
            grad: vec![F::zero(); len],
            values,
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = F::zero());
    }

    /// Adds another tensor's gradient into this one.
    pub fn accumulate_grad(&mut self, other: &Self) {
        debug_assert_eq!(self.shape, other.shape);
        for (g, o) in self.grad.iter_mut().zip(&other.grad) {
            *g += *o;
        }
    }

    pub fn cast<G: Real>(&self) -> ParamTensor<G> {
        ParamTensor {
            name: self.name.clone(),
            shape: self.shape.clone(),
            values: self.values.iter().map(|v| G::lit(v.as_f64())).collect(),
            grad: self.grad.iter().map(|v| G::lit(v.as_f64())).collect(),
        }
    }
}

/// Anything that owns trainable tensors.
pub trait Parameters<F> {
    fn params(&self) -> Vec<&ParamTensor<F>>;
    fn params_mut(&mut self) -> Vec<&mut ParamTensor<F>>;

    fn zero_grads(&mut self)
    where
        F: Real,
    {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn num_scalars(&self) -> usize
    where
        F: Real,
    {
        self.params().iter().map(|p| p.len()).sum()
    }
}
