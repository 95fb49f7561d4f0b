//! PSNR and single-scale luminance SSIM.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::raster::Image;

/// Reported for identical images.
pub const PSNR_CAP: f64 = 99.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

fn check_shapes(a: &Image, b: &Image) -> Result<()> {
    if a.same_shape(b) && a.data.len() == b.data.len() {
        Ok(())
    } else {
        Err(Error::Shape(format!(
            "{}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )))
    }
}

pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    check_shapes(a, b)?;
    let s: f64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (f64::from(*x) - f64::from(*y)).powi(2))
        .sum();
    Ok(s / a.data.len().max(1) as f64)
}

/// `10 log10(1 / MSE)`, capped at [`PSNR_CAP`].
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    Ok(psnr_from_mse(mse(a, b)?))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        PSNR_CAP
    } else {
        (10.0 * (1.0 / mse).log10()).min(PSNR_CAP)
    }
}

fn luminance(img: &Image) -> Vec<f64> {
    img.data
        .chunks(3)
        .map(|p| (f64::from(p[0]) + f64::from(p[1]) + f64::from(p[2])) / 3.0)
        .collect()
}

fn gaussian_window() -> Vec<f64> {
    let half = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-(i as f64 - half).powi(2) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Mean SSIM over all fully-contained 11x11 Gaussian windows of the
/// channel-mean luminance.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    check_shapes(a, b)?;
    let (w, h) = (a.width, a.height);
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::Shape(format!(
            "ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {w}x{h}"
        )));
    }
    let x = luminance(a);
    let y = luminance(b);
    let g = gaussian_window();
    let mut total = 0.0;
    let mut count = 0usize;
    for oy in 0..=h - SSIM_WINDOW {
        for ox in 0..=w - SSIM_WINDOW {
            let (mut mx, mut my, mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for j in 0..SSIM_WINDOW {
                for i in 0..SSIM_WINDOW {
                    let wt = g[i] * g[j];
                    let idx = (oy + j) * w + ox + i;
                    let (p, q) = (x[idx], y[idx]);
                    mx += wt * p;
                    my += wt * q;
                    xx += wt * p * p;
                    yy += wt * q * q;
                    xy += wt * p * q;
                }
            }
            let vx = xx - mx * mx;
            let vy = yy - my * my;
            let cxy = xy - mx * my;
            total += ((2.0 * mx * my + C1) * (2.0 * cxy + C2))
                / ((mx * mx + my * my + C1) * (vx + vy + C2));
            count += 1;
        }
    }
    Ok(total / count as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewMetrics {
    pub name: String,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub per_view: Vec<ViewMetrics>,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
}

impl MetricReport {
    pub fn new(per_view: Vec<ViewMetrics>) -> Self {
        let n = per_view.len().max(1) as f64;
        let mean_psnr = per_view.iter().map(|v| v.psnr).sum::<f64>() / n;
        let mean_ssim = per_view.iter().map(|v| v.ssim).sum::<f64>() / n;
        Self {
            per_view,
            mean_psnr,
            mean_ssim,
        }
    }

    /// Scores `(name, rendered, reference)` triples.
    pub fn evaluate<'a, I>(items: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a Image, &'a Image)>,
    {
        let per_view = items
            .into_iter()
            .map(|(name, pred, gt)| {
                Ok(ViewMetrics {
                    name: name.to_string(),
                    psnr: psnr(pred, gt)?,
                    ssim: ssim(pred, gt)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(per_view))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("view,psnr,ssim\n");
        for v in &self.per_view {
            let _ = writeln!(s, "{},{:.6},{:.6}", v.name, v.psnr, v.ssim);
        }
        let _ = writeln!(s, "mean,{:.6},{:.6}", self.mean_psnr, self.mean_ssim);
        s
    }

    pub fn to_table(&self) -> String {
        let width = self
            .per_view
            .iter()
            .map(|v| v.name.len())
            .chain([4])
            .max()
            .unwrap_or(4);
        let mut s = format!("{:<width$}  {:>9}  {:>7}\n", "view", "PSNR(dB)", "SSIM");
        for v in &self.per_view {
            let _ = writeln!(s, "{:<width$}  {:>9.3}  {:>7.4}", v.name, v.psnr, v.ssim);
        }
        let _ = writeln!(s, "{:<width$}  {:>9.3}  {:>7.4}", "mean", self.mean_psnr, self.mean_ssim);
        s
    }
}
