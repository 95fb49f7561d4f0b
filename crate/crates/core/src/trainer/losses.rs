use crate::field::FeatureGrid;
use crate::real::Real;

/// Mean over pixels of the per-pixel squared L2 distance (summed over
/// channels). Inputs are `(pixels, 3)`.
pub fn photometric_loss<F: Real>(pred: &[F], target: &[F]) -> F {
    assert_eq!(pred.len(), target.len(), "prediction/target shapes differ");
    let n = F::lit((pred.len() / 3).max(1) as f64);
    pred.iter()
        .zip(target)
        .map(|(p, t)| (*p - *t) * (*p - *t))
        .sum::<F>()
        / n
}

/// Gradient of `scale * Σ ||pred - target||²`.
pub fn photometric_grad<F: Real>(pred: &[F], target: &[F], scale: F) -> Vec<F> {
    let two = F::lit(2.0);
    pred.iter()
        .zip(target)
        .map(|(p, t)| two * scale * (*p - *t))
        .collect()
}

/// Both coarse blend terms; `stage2 = None` drops the second one.
pub fn coarse_loss<F: Real>(stage1: &[F], stage2: Option<&[F]>, target: &[F]) -> F {
    let mut l = photometric_loss(stage1, target);
    if let Some(s2) = stage2 {
        l += photometric_loss(s2, target);
    }
    l
}

pub fn tv_sum<F: Real>(coarse: &FeatureGrid<F>, fine: &FeatureGrid<F>) -> F {
    coarse.tv_loss() + fine.tv_loss()
}

pub fn total_loss<F: Real>(coarse: F, fine: F, tv: F, tv_weight: F) -> F {
    coarse + fine + tv_weight * tv
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn photometric_examples() {
        let t = [0.2, 0.4, 0.6, 0.1, 0.1, 0.1];
        assert_eq!(photometric_loss(&t, &t), 0.0);
        let p: Vec<f64> = t.iter().map(|v| v + 0.1).collect();
        assert!((photometric_loss(&p, &t) - 0.03).abs() < 1e-12);
    }

    #[test]
    fn coarse_examples() {
        let t = [0.5, 0.5, 0.5];
        assert_eq!(coarse_loss(&t, Some(&t), &t), 0.0);
        let off = [0.6, 0.5, 0.3];
        assert_eq!(coarse_loss(&t, Some(&off), &t), photometric_loss(&off, &t));
        assert_eq!(coarse_loss(&off, None, &t), photometric_loss(&off, &t));
    }

    #[test]
    fn total_examples() {
        assert!((total_loss(0.1, 0.2, 0.3, 0.01) - 0.303f64).abs() < 1e-15);
        assert_eq!(total_loss(0.1, 0.2, 5.0, 0.0), 0.1 + 0.2);
    }
}
