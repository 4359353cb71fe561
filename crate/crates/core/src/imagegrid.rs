//! Patch extraction with replicate padding, mean removal, and its adjoint.
//!
//! Images are stored column-stacked: pixel `(r, c)` of an `h`-row image lives
//! at index `c·h + r`. Patches use the same convention inside the `side x side`
//! window.

use ndarray::{Array1, ArrayView1, ArrayViewMut1};

use crate::error::{Error, Result};
use crate::Real;

/// A grayscale image flattened column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageVector<T> {
    data: Array1<T>,
    width: usize,
    height: usize,
}

impl<T: Real> ImageVector<T> {
    pub fn new(data: Array1<T>, width: usize, height: usize) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::dim(
                format!("{width}x{height} = {}", width * height),
                data.len(),
            ));
        }
        Ok(Self {
            data,
            width,
            height,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            data: Array1::zeros(width * height),
            width,
            height,
        }
    }

    /// Builds an image from a pixel function `f(row, col)`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Array1::zeros(width * height);
        for c in 0..width {
            for r in 0..height {
                data[c * height + r] = f(r, c);
            }
        }
        Self {
            data,
            width,
            height,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of pixels `N = w·h`.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &Array1<T> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut Array1<T> {
        &mut self.data
    }

    pub fn into_data(self) -> Array1<T> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[col * self.height + row]
    }

    /// Same shape, new pixel values.
    pub fn with_data(&self, data: Array1<T>) -> Result<Self> {
        Self::new(data, self.width, self.height)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            data: self.data.mapv(f),
            width: self.width,
            height: self.height,
        }
    }
}

/// Square patch geometry and the patch-center grid step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchGeometry {
    side: usize,
    stride: usize,
}

impl PatchGeometry {
    /// Odd sides center the window on the pixel; even sides extend one pixel
    /// further up and left than down and right.
    pub fn new(side: usize, stride: usize) -> Result<Self> {
        if side == 0 {
            return Err(Error::InvalidArgument("patch side must be positive".into()));
        }
        if stride == 0 {
            return Err(Error::InvalidArgument("patch stride must be positive".into()));
        }
        Ok(Self { side, stride })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    /// Patch dimension `n = side²`.
    pub fn n(&self) -> usize {
        self.side * self.side
    }

    fn half(&self) -> isize {
        (self.side / 2) as isize
    }

    /// Number of patches `B` on a `width x height` image.
    pub fn patch_count(&self, width: usize, height: usize) -> usize {
        width.div_ceil(self.stride) * height.div_ceil(self.stride)
    }
}

/// Patch centers in raster order (row by row, left to right).
pub fn patch_centers(geom: &PatchGeometry, width: usize, height: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(geom.patch_count(width, height));
    for r in (0..height).step_by(geom.stride) {
        for c in (0..width).step_by(geom.stride) {
            out.push((r, c));
        }
    }
    out
}

fn check_center(r: usize, c: usize, width: usize, height: usize) -> Result<()> {
    if r >= height || c >= width {
        return Err(Error::Index {
            row: r,
            col: c,
            height,
            width,
        });
    }
    Ok(())
}

/// Column-stacked pixel indices of the patch at `(r, c)`, coordinates clamped
/// to the image.
#[inline]
fn for_each_tap(
    geom: &PatchGeometry,
    width: usize,
    height: usize,
    r: usize,
    c: usize,
    mut f: impl FnMut(usize, usize),
) {
    let half = geom.half();
    let side = geom.side;
    let (rmax, cmax) = (height as isize - 1, width as isize - 1);
    for dc in 0..side {
        let cc = (c as isize + dc as isize - half).clamp(0, cmax) as usize;
        let base = cc * height;
        for dr in 0..side {
            let rr = (r as isize + dr as isize - half).clamp(0, rmax) as usize;
            f(dc * side + dr, base + rr);
        }
    }
}

/// Writes `M·P_rc·s` into `out` without bounds checks on the center.
pub(crate) fn extract_into<T: Real>(
    pixels: ArrayView1<'_, T>,
    width: usize,
    height: usize,
    geom: &PatchGeometry,
    r: usize,
    c: usize,
    mut out: ArrayViewMut1<'_, T>,
) {
    let mut sum = T::zero();
    for_each_tap(geom, width, height, r, c, |j, idx| {
        let v = pixels[idx];
        out[j] = v;
        sum += v;
    });
    let mean = sum / T::lit(geom.n() as f64);
    out.mapv_inplace(|v| v - mean);
}

/// Adds `P_rcᵀ·M·v` to `acc`.
pub(crate) fn scatter_into<T: Real>(
    mut acc: ArrayViewMut1<'_, T>,
    width: usize,
    height: usize,
    geom: &PatchGeometry,
    r: usize,
    c: usize,
    v: ArrayView1<'_, T>,
) {
    let mean = v.sum() / T::lit(geom.n() as f64);
    for_each_tap(geom, width, height, r, c, |j, idx| {
        acc[idx] += v[j] - mean;
    });
}

/// The mean-removed patch centered at `(r, c)`, replicating border pixels.
pub fn extract_centered_patch<T: Real>(
    img: &ImageVector<T>,
    r: usize,
    c: usize,
    geom: &PatchGeometry,
) -> Result<Array1<T>> {
    check_center(r, c, img.width, img.height)?;
    let mut out = Array1::zeros(geom.n());
    extract_into(img.data.view(), img.width, img.height, geom, r, c, out.view_mut());
    Ok(out)
}

/// Accumulates the adjoint of [`extract_centered_patch`] applied to `v`.
///
/// The centering is included, so for every image `x`:
/// `⟨extract_centered_patch(x, r, c), v⟩ = ⟨x, scatter_add(0, v, r, c)⟩`.
/// Taps that were clamped at the border accumulate onto the border pixel.
pub fn scatter_add<T: Real>(
    acc: &mut ImageVector<T>,
    v: ArrayView1<'_, T>,
    r: usize,
    c: usize,
    geom: &PatchGeometry,
) -> Result<()> {
    if v.len() != geom.n() {
        return Err(Error::dim(geom.n(), v.len()));
    }
    check_center(r, c, acc.width, acc.height)?;
    let (w, h) = (acc.width, acc.height);
    scatter_into(acc.data.view_mut(), w, h, geom, r, c, v);
    Ok(())
}
