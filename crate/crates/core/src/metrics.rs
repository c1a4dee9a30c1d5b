//! Image quality metrics for unit-range images.

use crate::error::{Error, Result};
use crate::grid::ImageGrid;

/// `10 log10(1 / MSE)`; infinite for identical images.
pub fn psnr(estimate: &ImageGrid, truth: &ImageGrid) -> Result<f64> {
    let mse = estimate.squared_distance(truth)? / truth.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

const SSIM_RADIUS: usize = 5;
const SSIM_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

fn gaussian_window(radius: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// Mean SSIM with an 11×11 Gaussian window (σ = 1.5), `K1 = 0.01`,
/// `K2 = 0.03` and dynamic range 1, averaged over the positions where the
/// window fits. Images smaller than the window use the largest odd window
/// that fits.
pub fn ssim(estimate: &ImageGrid, truth: &ImageGrid) -> Result<f64> {
    estimate.ensure_same_shape(truth)?;
    let (h, w) = truth.dims();
    let radius = SSIM_RADIUS.min((h.min(w) - 1) / 2);
    let win = gaussian_window(radius);
    let size = 2 * radius + 1;
    let (c1, c2) = (K1 * K1, K2 * K2);
    let (a, b) = (estimate.as_slice(), truth.as_slice());
    let mut total = 0.0;
    let mut count = 0usize;
    for i in 0..=h - size {
        for j in 0..=w - size {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for di in 0..size {
                for dj in 0..size {
                    let g = win[di] * win[dj];
                    let p = (i + di) * w + j + dj;
                    ma += g * a[p];
                    mb += g * b[p];
                    saa += g * a[p] * a[p];
                    sbb += g * b[p] * b[p];
                    sab += g * a[p] * b[p];
                }
            }
            let (va, vb, cov) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Domain("image too small for SSIM".into()));
    }
    Ok(total / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_images() {
        let x = ImageGrid::from_fn(16, 16, |i, j| ((i * 3 + j * 5) % 7) as f64 / 7.0);
        assert_eq!(psnr(&x, &x).unwrap(), f64::INFINITY);
        assert!((ssim(&x, &x).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn psnr_of_constant_offset() {
        let x = ImageGrid::filled(4, 4, 0.5);
        let y = ImageGrid::filled(4, 4, 0.6);
        assert!((psnr(&x, &y).unwrap() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn ssim_of_constant_images() {
        // means 0.5 and 0.6, no variance: luminance term only
        let x = ImageGrid::filled(12, 12, 0.5);
        let y = ImageGrid::filled(12, 12, 0.6);
        let c1 = 1e-4;
        let expected = (2.0 * 0.5 * 0.6 + c1) / (0.25 + 0.36 + c1);
        assert!((ssim(&x, &y).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn ssim_drops_with_noise_and_handles_small_images() {
        let x = ImageGrid::from_fn(20, 20, |i, j| if (i / 4 + j / 4) % 2 == 0 { 0.2 } else { 0.8 });
        let y = ImageGrid::from_fn(20, 20, |i, j| x.get(i, j) + if (i + j) % 2 == 0 { 0.1 } else { -0.1 });
        let s = ssim(&x, &y).unwrap();
        assert!(s < 1.0 && s > 0.0);
        let small = ImageGrid::from_fn(4, 5, |i, j| (i + j) as f64 / 10.0);
        assert!((ssim(&small, &small).unwrap() - 1.0).abs() < 1e-12);
    }
}
