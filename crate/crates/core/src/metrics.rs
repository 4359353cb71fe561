//! PSNR and mean SSIM on 8-bit intensity scale.
//!
//! MSSIM uses the usual constants: an 11x11 Gaussian window with standard
//! deviation 1.5, `K₁ = 0.01`, `K₂ = 0.03`, dynamic range 255, averaged over
//! the window positions that fit entirely inside the image.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::imagegrid::ImageVector;
use crate::Real;

pub const PEAK: f64 = 255.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn same_shape<T: Real>(a: &ImageVector<T>, b: &ImageVector<T>) -> Result<()> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::dim(
            format!("{}x{}", a.width(), a.height()),
            format!("{}x{}", b.width(), b.height()),
        ));
    }
    Ok(())
}

/// `10 log₁₀(255² N / Σ(sᵢ − s*ᵢ)²)`; `+∞` for identical images.
pub fn psnr<T: Real>(reference: &ImageVector<T>, estimate: &ImageVector<T>) -> Result<T> {
    same_shape(reference, estimate)?;
    let sse: T = reference
        .data()
        .iter()
        .zip(estimate.data().iter())
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum();
    if sse == T::zero() {
        return Ok(T::infinity());
    }
    let peak = T::lit(PEAK);
    Ok(T::lit(10.0) * (peak * peak * T::lit(reference.len() as f64) / sse).log10())
}

/// Clamps intensities into `[0, 255]`.
pub fn clip_to_range<T: Real>(img: &ImageVector<T>) -> ImageVector<T> {
    img.map(|v| v.max(T::zero()).min(T::lit(PEAK)))
}

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
pub fn gaussian_taps<T: Real>() -> Vec<T> {
    let half = (SSIM_WINDOW / 2) as f64;
    let raw: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| {
            let d = i as f64 - half;
            (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| T::lit(v / total)).collect()
}

/// Separable "valid" filtering of a `height x width` (row-major) grid.
fn filter_valid<T: Real>(img: &Array2<T>, taps: &[T]) -> Array2<T> {
    let (h, w) = img.dim();
    let win = taps.len();
    let (oh, ow) = (h + 1 - win, w + 1 - win);
    let mut rows = Array2::<T>::zeros((h, ow));
    for r in 0..h {
        for c in 0..ow {
            rows[[r, c]] = (0..win).map(|t| taps[t] * img[[r, c + t]]).sum();
        }
    }
    let mut out = Array2::<T>::zeros((oh, ow));
    for r in 0..oh {
        for c in 0..ow {
            out[[r, c]] = (0..win).map(|t| taps[t] * rows[[r + t, c]]).sum();
        }
    }
    out
}

fn to_grid<T: Real>(img: &ImageVector<T>) -> Array2<T> {
    Array2::from_shape_fn((img.height(), img.width()), |(r, c)| img.get(r, c))
}

/// Mean of the SSIM map.
pub fn mssim<T: Real>(reference: &ImageVector<T>, estimate: &ImageVector<T>) -> Result<T> {
    same_shape(reference, estimate)?;
    if reference.width() < SSIM_WINDOW || reference.height() < SSIM_WINDOW {
        return Err(Error::InvalidArgument(format!(
            "MSSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {}x{}",
            reference.width(),
            reference.height()
        )));
    }
    let taps = gaussian_taps::<T>();
    let x = to_grid(reference);
    let y = to_grid(estimate);
    let mu_x = filter_valid(&x, &taps);
    let mu_y = filter_valid(&y, &taps);
    let xx = filter_valid(&(&x * &x), &taps);
    let yy = filter_valid(&(&y * &y), &taps);
    let xy = filter_valid(&(&x * &y), &taps);
    let c1 = T::lit((SSIM_K1 * PEAK) * (SSIM_K1 * PEAK));
    let c2 = T::lit((SSIM_K2 * PEAK) * (SSIM_K2 * PEAK));
    let two = T::lit(2.0);
    let mut total = T::zero();
    for i in 0..mu_x.len() {
        let (mx, my) = (mu_x.as_slice().unwrap()[i], mu_y.as_slice().unwrap()[i]);
        let sx = xx.as_slice().unwrap()[i] - mx * mx;
        let sy = yy.as_slice().unwrap()[i] - my * my;
        let sxy = xy.as_slice().unwrap()[i] - mx * my;
        let num = (two * mx * my + c1) * (two * sxy + c2);
        let den = (mx * mx + my * my + c1) * (sx + sy + c2);
        total += num / den;
    }
    Ok(total / T::lit(mu_x.len() as f64))
}
