//! Frequency-band positional encoding.

use serde::{Deserialize, Serialize};

use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodingSpec {
    pub num_bands: usize,
    pub include_input: bool,
}

impl EncodingSpec {
    pub const fn new(num_bands: usize, include_input: bool) -> Self {
        Self {
            num_bands,
            include_input,
        }
    }

    /// Values emitted per input component.
    pub fn per_component(&self) -> usize {
        2 * self.num_bands + usize::from(self.include_input)
    }

    pub fn output_dim(&self, input_dim: usize) -> usize {
        input_dim * self.per_component()
    }

    /// Encodes `x` into `out`, grouped per component as
    /// `[p?, sin(2^0 π p), cos(2^0 π p), sin(2^1 π p), ...]`.
    pub fn encode_into<F: Real>(&self, x: &[F], out: &mut [F]) {
        debug_assert_eq!(out.len(), self.output_dim(x.len()));
        let pi = F::lit(std::f64::consts::PI);
        let mut o = 0;
        for &p in x {
            if self.include_input {
                out[o] = p;
                o += 1;
            }
            let mut freq = pi;
            for _ in 0..self.num_bands {
                let (s, c) = (freq * p).sin_cos();
                out[o] = s;
                out[o + 1] = c;
                o += 2;
                freq = freq + freq;
            }
        }
    }

    pub fn encode<F: Real>(&self, x: &[F]) -> Vec<F> {
        let mut out = vec![F::zero(); self.output_dim(x.len())];
        self.encode_into(x, &mut out);
        out
    }

    /// Adds `∂L/∂x` into `grad_x` given the gradient of the encoded vector.
    pub fn backward_into<F: Real>(&self, x: &[F], grad_out: &[F], grad_x: &mut [F]) {
        debug_assert_eq!(grad_out.len(), self.output_dim(x.len()));
        let pi = F::lit(std::f64::consts::PI);
        let mut o = 0;
        for (i, &p) in x.iter().enumerate() {
            let mut g = F::zero();
            if self.include_input {
                g += grad_out[o];
                o += 1;
            }
            let mut freq = pi;
            for _ in 0..self.num_bands {
                let (s, c) = (freq * p).sin_cos();
                g += freq * (c * grad_out[o] - s * grad_out[o + 1]);
                o += 2;
                freq = freq + freq;
            }
            grad_x[i] += g;
        }
    }
}

/// Encodes `x` with the given band count.
pub fn positional_encode<F: Real>(x: &[F], spec: &EncodingSpec) -> Vec<F> {
    spec.encode(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_input_two_bands() {
        let spec = EncodingSpec::new(2, false);
        assert_eq!(spec.encode(&[0.0f64]), vec![0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn half_with_input() {
        let spec = EncodingSpec::new(1, true);
        let e = spec.encode(&[0.5f64]);
        assert_eq!(e[0], 0.5);
        assert!((e[1] - 1.0).abs() < 1e-15);
        assert!(e[2].abs() < 1e-15);
    }

    #[test]
    fn two_components() {
        let spec = EncodingSpec::new(1, false);
        let e = spec.encode(&[0.25f64, 0.0]);
        let want = [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2, 0.0, 1.0];
        for (a, b) in e.iter().zip(want) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    proptest! {
        #[test]
        fn dimension_law(dim in 1usize..6, bands in 0usize..8, inc in any::<bool>()) {
            let spec = EncodingSpec::new(bands, inc);
            let x = vec![0.1f64; dim];
            prop_assert_eq!(spec.encode(&x).len(), dim * (2 * bands + usize::from(inc)));
        }
    }
}
