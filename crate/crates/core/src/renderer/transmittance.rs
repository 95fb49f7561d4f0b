use crate::real::Real;

/// `T_i = exp(-Σ_{j<i} σ_j δ_j)`, `w_i = T_i (1 - exp(-σ_i δ_i))`.
pub fn transmittance_weights<F: Real>(sigma: &[F], delta: &[F]) -> (Vec<F>, Vec<F>) {
    assert_eq!(sigma.len(), delta.len());
    let mut t = Vec::with_capacity(sigma.len());
    let mut w = Vec::with_capacity(sigma.len());
    let mut trans = F::one();
    for (s, d) in sigma.iter().zip(delta) {
        let keep = (-(*s * *d)).exp();
        t.push(trans);
        w.push(trans * (F::one() - keep));
        trans *= keep;
    }
    (t, w)
}

/// Transmittance past the last sample.
pub fn residual_transmittance<F: Real>(sigma: &[F], delta: &[F]) -> F {
    let optical: F = sigma.iter().zip(delta).map(|(s, d)| *s * *d).sum();
    (-optical).exp()
}

/// `∂L/∂σ` from `∂L/∂w` (intervals are constants).
pub fn transmittance_backward<F: Real>(
    sigma: &[F],
    delta: &[F],
    transmittance: &[F],
    weights: &[F],
    grad_w: &[F],
) -> Vec<F> {
    let n = sigma.len();
    let mut out = vec![F::zero(); n];
    // ∂w_i/∂a_k = T_{k+1} for i = k, -w_i for i > k
    let mut suffix = F::zero();
    for k in (0..n).rev() {
        let t_next = transmittance[k] * (-(sigma[k] * delta[k])).exp();
        let ga = grad_w[k] * t_next - suffix;
        out[k] = ga * delta[k];
        suffix += grad_w[k] * weights[k];
    }
    out
}

/// `Σ_i w_i f_i` for `dim`-wide per-sample vectors.
pub fn aggregate_features<F: Real>(weights: &[F], features: &[F], dim: usize) -> Vec<F> {
    assert_eq!(features.len(), weights.len() * dim);
    let mut out = vec![F::zero(); dim];
    for (w, f) in weights.iter().zip(features.chunks_exact(dim)) {
        for (o, v) in out.iter_mut().zip(f) {
            *o += *w * *v;
        }
    }
    out
}

/// Transmittance-weighted colour sum over samples.
pub fn composite<F: Real>(sigma: &[F], delta: &[F], colors: &[[F; 3]]) -> [F; 3] {
    let (_, w) = transmittance_weights(sigma, delta);
    let mut c = [F::zero(); 3];
    for (wi, ci) in w.iter().zip(colors) {
        for k in 0..3 {
            c[k] += *wi * ci[k];
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn vacuum() {
        let (t, w) = transmittance_weights(&[0.0f64; 4], &[0.3; 4]);
        assert_eq!(t, vec![1.0; 4]);
        assert_eq!(w, vec![0.0; 4]);
    }

    #[test]
    fn two_unit_samples() {
        let (t, w) = transmittance_weights(&[1.0f64, 1.0], &[1.0, 1.0]);
        assert!((w[0] - 0.63212).abs() < 1e-5);
        assert!((w[1] - 0.23254).abs() < 1e-5);
        assert_eq!(t[0], 1.0);
        assert!((t[1] - 0.36788).abs() < 1e-5);
    }

    #[test]
    fn opaque_first() {
        let (_, w) = transmittance_weights(&[1e6f64, 3.0, 2.0], &[0.1, 0.1, 0.1]);
        assert!((w[0] - 1.0).abs() < 1e-12);
        assert!(w[1] < 1e-12 && w[2] < 1e-12);
    }

    #[test]
    fn feature_aggregation_two_samples() {
        let (_, w) = transmittance_weights(&[1.0f64, 1.0], &[1.0, 1.0]);
        let f = aggregate_features(&w, &[1.0, 0.0, 0.0, 1.0], 2);
        assert!((f[0] - 0.63212).abs() < 1e-5 && (f[1] - 0.23254).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn weights_partition_unity(
            sigma in proptest::collection::vec(0.0f64..20.0, 1..64),
            seed in 0.01f64..0.5,
        ) {
            let delta = vec![seed; sigma.len()];
            let (_, w) = transmittance_weights(&sigma, &delta);
            let total: f64 = w.iter().sum::<f64>() + residual_transmittance(&sigma, &delta);
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(w.iter().all(|x| (0.0..=1.0).contains(x)));
        }

        #[test]
        fn partition_drift_f32(sigma in proptest::collection::vec(0.0f32..10.0, 1..256)) {
            let delta = vec![0.02f32; sigma.len()];
            let (_, w) = transmittance_weights(&sigma, &delta);
            let total: f32 = w.iter().sum::<f32>() + residual_transmittance(&sigma, &delta);
            prop_assert!((total - 1.0).abs() <= 1e-5);
        }
    }
}
